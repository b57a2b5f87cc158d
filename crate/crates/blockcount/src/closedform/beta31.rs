//! β(3,1)-coalescent: the pgf from its first-order ODE
//! `Q g′ + (2σz − σ − θ − 3) g = θ1p₁ − ((3 + 2(σ+θ))p₁ − 2θ1p₂) z`,
//! `Q(z) = σz² − (σ+θ)z + θ1`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::measures::ModelParams;
use crate::recursions::{SolverTag, StationaryPmf};
use crate::specfun::ode::{dopri5, OdeOptions};

use super::star::star_roots;
use super::{ClosedForm, ModelTag, PgfEvaluator};

#[derive(Debug, Clone)]
pub struct Beta31Solution {
    pub pgf: PgfEvaluator,
    pub p1: f64,
    pub p2: f64,
    pub pmf: StationaryPmf,
    /// Condition number of the boundary system.
    pub condition: f64,
}

impl Beta31Solution {
    pub fn into_closed_form(self) -> ClosedForm {
        ClosedForm {
            pmf: self.pmf,
            pgf: self.pgf,
        }
    }
}

/// Two basis solutions, analytic at the root `x₋` of `Q`, for the unit
/// loads multiplying `p₁` and `p₂`.
#[derive(Debug)]
struct Basis {
    sigma: f64,
    theta: f64,
    theta1: f64,
    x_minus: f64,
    h: f64,
    coeffs: [Vec<f64>; 2],
}

impl Basis {
    fn new(params: &ModelParams) -> Result<Self> {
        let (sigma, theta, theta1) = (params.sigma, params.theta(), params.theta1);
        let (x_minus, delta, d) = if theta1 == 0.0 {
            let xp = (sigma + theta) / sigma;
            (0.0, xp, sigma + theta)
        } else {
            let r = star_roots(params)?;
            (r.x_minus, r.x_plus - r.x_minus, r.d)
        };
        let mut h = 0.25 * delta.min(1.0 - x_minus);
        if x_minus > 0.0 {
            h = h.min(0.25 * x_minus);
        }
        let b = 3.0 + 2.0 * (sigma + theta);
        let loads = [
            (theta1 - b * x_minus, -b),
            (2.0 * theta1 * x_minus, 2.0 * theta1),
        ];
        let coeffs = loads.map(|(r0, r1)| {
            let mut c: Vec<f64> = Vec::new();
            let mut scale = 0.0f64;
            for k in 0..400 {
                let prev = if k == 0 { 0.0 } else { c[k - 1] };
                let rk = match k {
                    0 => r0,
                    1 => r1,
                    _ => 0.0,
                };
                let ck = (sigma * (k + 1) as f64 * prev - rk) / (d * (k + 1) as f64 + 3.0);
                c.push(ck);
                let term = (ck * h.powi(k as i32)).abs();
                scale = scale.max(term);
                if k > 2 && term < 1e-19 * scale.max(1e-300) {
                    break;
                }
            }
            c
        });
        Ok(Basis {
            sigma,
            theta,
            theta1,
            x_minus,
            h,
            coeffs,
        })
    }

    fn series(&self, c: &[f64], t: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, ck| acc * t + ck)
    }

    fn loads(&self, z: f64) -> [f64; 2] {
        [
            self.theta1 - (3.0 + 2.0 * (self.sigma + self.theta)) * z,
            2.0 * self.theta1 * z,
        ]
    }

    /// `[G₁(z), G₂(z)]`.
    fn both(&self, z: f64) -> Result<[f64; 2]> {
        let t = z - self.x_minus;
        if t.abs() <= self.h {
            return Ok([
                self.series(&self.coeffs[0], t),
                self.series(&self.coeffs[1], t),
            ]);
        }
        let start = self.x_minus + self.h.copysign(t);
        let y0 = [
            self.series(&self.coeffs[0], start - self.x_minus),
            self.series(&self.coeffs[1], start - self.x_minus),
        ];
        let (s, th) = (self.sigma, self.theta);
        let rhs = |x: f64, y: &[f64; 2]| {
            let q = s * x * x - (s + th) * x + self.theta1;
            let p = 2.0 * s * x - s - th - 3.0;
            let l = self.loads(x);
            [(l[0] - p * y[0]) / q, (l[1] - p * y[1]) / q]
        };
        let opts = OdeOptions {
            rtol: 1e-12,
            atol: 1e-14,
            ..OdeOptions::default()
        };
        dopri5(rhs, start, y0, z, opts)
    }

    fn combined(&self, w: [f64; 2], z: f64) -> Result<f64> {
        let g = self.both(z)?;
        Ok(w[0] * g[0] + w[1] * g[1])
    }
}

/// Solves the boundary problem `g(0) = 0`, `g(1) = 1`.
pub fn beta31_pgf(params: &ModelParams) -> Result<Beta31Solution> {
    if !(params.sigma > 0.0) {
        return Err(Error::PreconditionViolated(
            "beta31_pgf needs sigma > 0".into(),
        ));
    }
    if params.theta() == 0.0 {
        return Err(Error::PreconditionViolated(
            "beta31_pgf needs theta > 0".into(),
        ));
    }
    let basis = Basis::new(params)?;
    let g1 = basis.both(1.0)?;
    let (p1, p2, condition) = if params.theta1 == 0.0 {
        if !(g1[0] > 0.0) {
            return Err(Error::IllConditioned(f64::INFINITY));
        }
        let p1 = 1.0 / g1[0];
        let p2 = 3.0 * params.sigma * p1 / (3.0 * (params.sigma + params.theta()) + 3.0);
        (p1, p2, 1.0)
    } else {
        let g0 = basis.both(0.0)?;
        // [g0[0] g0[1]; g1[0] g1[1]] (p1, p2) = (0, 1)
        let det = g0[0] * g1[1] - g0[1] * g1[0];
        let norm = (g0[0].abs() + g1[0].abs()).max(g0[1].abs() + g1[1].abs());
        let inv_norm = (g1[1].abs() + g1[0].abs()).max(g0[1].abs() + g0[0].abs()) / det.abs();
        let condition = norm * inv_norm;
        if !(condition.is_finite() && condition <= 1e10) {
            return Err(Error::IllConditioned(condition));
        }
        (-g0[1] / det, g0[0] / det, condition)
    };
    if !(p1 >= 0.0 && p2 >= 0.0 && p1 + p2 <= 1.0 + 1e-12) {
        return Err(Error::NegativeMass(p1.min(p2)));
    }
    let pmf = beta31_pmf(params, p1, p2)?;
    let basis = Arc::new(basis);
    let w = [p1, p2];
    let record = serde_json::json!({ "sigma": params.sigma, "theta0": params.theta0, "theta1": params.theta1 });
    let eval = move |z: f64| {
        if z >= 1.0 {
            return 1.0;
        }
        basis.combined(w, z).unwrap_or(f64::NAN)
    };
    let pgf = PgfEvaluator::new(ModelTag::Beta31, record, p1, eval).with_p2(p2);
    Ok(Beta31Solution {
        pgf,
        p1,
        p2,
        pmf,
        condition,
    })
}

/// Taylor coefficients from the three-term recurrence
/// `θ1(m+1)p_{m+1} = ((σ+θ)(m+1)+3)p_m − σ(m+1)p_{m−1}`, `m ≥ 2`, run
/// backwards (Miller) for the minimal solution and scaled to `p₁`.
fn beta31_pmf(params: &ModelParams, p1: f64, p2: f64) -> Result<StationaryPmf> {
    let (s, t, t1) = (params.sigma, params.theta(), params.theta1);
    let mut probs = vec![p1, p2];
    if t1 == 0.0 {
        let mut m = 3;
        while *probs.last().unwrap() > 1e-18 && m < 1 << 16 {
            let prev = *probs.last().unwrap();
            probs.push(s * (m + 1) as f64 / ((s + t) * (m + 1) as f64 + 3.0) * prev);
            m += 1;
        }
    } else {
        let miller = |top: usize| -> Vec<f64> {
            let mut p = vec![0.0; top + 2];
            p[top] = 1.0;
            for m in (2..=top).rev() {
                let mf = (m + 1) as f64;
                p[m - 1] = (((s + t) * mf + 3.0) * p[m] - t1 * mf * p[m + 1]) / (s * mf);
                if p[m - 1].abs() > 1e250 {
                    for v in p.iter_mut() {
                        *v *= 1e-250;
                    }
                }
            }
            let scale = p1 / p[1];
            p.iter().map(|v| v * scale).collect()
        };
        let mut top = 64;
        let mut prev = miller(top);
        loop {
            top *= 2;
            if top > 1 << 16 {
                return Err(Error::NoConvergence("beta31 backward recurrence".into()));
            }
            let next = miller(top);
            let change = (1..=top / 2)
                .map(|m| (next[m] - prev[m]).abs())
                .fold(0.0, f64::max);
            if change < 1e-16 {
                let mut end = top;
                while end > 2 && next[end] < 1e-18 {
                    end -= 1;
                }
                probs = next[1..=end].to_vec();
                break;
            }
            prev = next;
        }
    }
    let mut pmf = StationaryPmf::from_weights(probs, SolverTag::Beta31Ode)?;
    let gap = (pmf.p(2) - p2).abs();
    pmf.residual = gap;
    if gap > 1e-8 {
        pmf.warnings.push(format!(
            "p2 from the ODE and from the recurrence differ by {gap:e}"
        ));
    }
    Ok(pmf)
}
