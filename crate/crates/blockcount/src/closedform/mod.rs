//! Closed-form stationary laws, moments and equation residuals.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::specfun::roots::ridders_derivative;

pub mod beta31;
pub mod bs;
pub mod master;
pub mod moran;
pub mod star;
mod terminating;
pub mod wf;

pub use beta31::{beta31_pgf, Beta31Solution};
pub use bs::{bs_rho, bs_rho_lambert};
pub use master::{verify_master_equation, MasterEquation};
pub use moran::{
    moran_closed, moran_closed_weights, moran_factorial_moments, moran_mean, moran_moment_residual,
    moran_moment_residual_pmf,
};
pub use star::{star_closed, star_p1};
pub use wf::{
    wf_closed, wf_closed_weights, wf_factorial_moments, wf_mean, wf_moment_residual,
    wf_moment_residual_pmf,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ModelTag {
    Moran,
    WrightFisher,
    Star,
    BolthausenSznitman,
    CrowKimura,
    Beta31,
    General,
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A probability generating function on [0, 1].
#[derive(Clone)]
pub struct PgfEvaluator {
    pub model: ModelTag,
    pub params: serde_json::Value,
    pub p1: f64,
    pub p2: Option<f64>,
    eval: RealFn,
    deriv: Option<RealFn>,
}

impl fmt::Debug for PgfEvaluator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PgfEvaluator")
            .field("model", &self.model)
            .field("params", &self.params)
            .field("p1", &self.p1)
            .field("p2", &self.p2)
            .finish()
    }
}

impl PgfEvaluator {
    pub fn new<F>(model: ModelTag, params: serde_json::Value, p1: f64, eval: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        PgfEvaluator {
            model,
            params,
            p1,
            p2: None,
            eval: Arc::new(eval),
            deriv: None,
        }
    }

    pub fn with_derivative<F>(mut self, d: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.deriv = Some(Arc::new(d));
        self
    }

    pub fn with_p2(mut self, p2: f64) -> Self {
        self.p2 = Some(p2);
        self
    }

    /// Pgf of a finite pmf, `probs[n-1] = p_n`.
    pub fn from_pmf(model: ModelTag, params: serde_json::Value, probs: Vec<f64>) -> Self {
        let p1 = probs.first().copied().unwrap_or(0.0);
        let p2 = probs.get(1).copied().unwrap_or(0.0);
        let probs = Arc::new(probs);
        let pd = probs.clone();
        PgfEvaluator::new(model, params, p1, move |z| {
            probs.iter().rev().fold(0.0, |acc, p| (acc + p) * z)
        })
        .with_derivative(move |z| {
            let mut acc = 0.0;
            for (i, p) in pd.iter().enumerate().rev() {
                acc = acc * z + (i + 1) as f64 * p;
            }
            acc
        })
        .with_p2(p2)
    }

    pub fn evaluate(&self, z: f64) -> f64 {
        if z == 0.0 {
            return 0.0;
        }
        (self.eval)(z)
    }

    /// `g'(z)`, analytic when available, otherwise Ridders' extrapolation.
    pub fn derivative(&self, z: f64) -> f64 {
        match &self.deriv {
            Some(d) => d(z),
            None => {
                let h = 0.1 * z.min(1.0 - z).max(1e-6);
                ridders_derivative(|x| (self.eval)(x), z, h).0
            }
        }
    }

    /// Ancestral type function `h(x) = 1 − g(1 − x)`.
    pub fn ancestral_type(&self, x: f64) -> f64 {
        if x >= 1.0 {
            return 1.0;
        }
        1.0 - self.evaluate(1.0 - x)
    }
}

/// JSON record `{model, params, pmf, moments, diagnostics, version}`;
/// `moments[n-1]` is the factorial moment of order `n`.
pub fn export_record(
    model: ModelTag,
    params: serde_json::Value,
    pmf: &crate::recursions::StationaryPmf,
    n_moments: usize,
    extra: serde_json::Value,
) -> serde_json::Value {
    let mut diagnostics = pmf.diagnostics_json();
    if let (Some(d), serde_json::Value::Object(e)) = (diagnostics.as_object_mut(), extra) {
        d.extend(e);
    }
    if !pmf.warnings.is_empty() {
        diagnostics["warnings"] = serde_json::json!(pmf.warnings);
    }
    let moments: Vec<f64> = (1..=n_moments).map(|n| pmf.factorial_moment(n)).collect();
    serde_json::json!({
        "model": model,
        "params": params,
        "pmf": pmf.probs,
        "moments": moments,
        "diagnostics": diagnostics,
        "version": crate::VERSION,
    })
}

/// A closed-form stationary law with its generating function.
#[derive(Debug, Clone)]
pub struct ClosedForm {
    pub pmf: crate::recursions::StationaryPmf,
    pub pgf: PgfEvaluator,
}

/// `E[(L−1)_n↓] = Σ_k C(n,k)(−1)^k k!·E[(L)_{n−k}↓]` from the moments `e[0..=n]`.
pub fn shifted_from_factorial(e: &[f64], n: usize) -> f64 {
    let mut total = 0.0;
    let mut c = 1.0; // C(n,k)·k!
    for k in 0..=n {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * c * e[n - k];
        c *= (n - k) as f64;
    }
    total
}
