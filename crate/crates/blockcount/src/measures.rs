//! The measure Λ, model parameters and the derived coalescence rates.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::{ln_beta, ln_gamma, Quadrature};

/// Largest atom list accepted by [`LambdaMeasure::atoms`].
pub const ATOM_CAP: usize = 10_000;

/// An atom of Λ₀. `cx` stores `1 − x` separately so that atoms close to 1
/// keep full relative precision in their distance to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: f64,
    pub cx: f64,
    pub mass: f64,
}

impl Atom {
    pub fn new(x: f64, mass: f64) -> Self {
        Atom {
            x,
            cx: 1.0 - x,
            mass,
        }
    }
}

/// Density on (0,1) with declared power behaviour `x^e0` near 0 and
/// `(1−x)^e1` near 1.
#[derive(Clone)]
pub struct CustomDensity {
    pub density: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub exponent_at_0: f64,
    pub exponent_at_1: f64,
}

impl fmt::Debug for CustomDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomDensity")
            .field("exponent_at_0", &self.exponent_at_0)
            .field("exponent_at_1", &self.exponent_at_1)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum Interior {
    Zero,
    /// Constant density `c` on (0,1).
    Uniform {
        c: f64,
    },
    /// `mass · x^{a−1}(1−x)^{b−1}/B(a,b)`.
    Beta {
        a: f64,
        b: f64,
        mass: f64,
    },
    Atoms(Vec<Atom>),
    Custom(CustomDensity),
}

/// `Λ = m0·δ0 + m1·δ1 + interior`.
#[derive(Debug, Clone)]
pub struct LambdaMeasure {
    pub m0: f64,
    pub m1: f64,
    pub interior: Interior,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub sigma: f64,
    pub theta0: f64,
    pub theta1: f64,
}

impl ModelParams {
    pub fn new(sigma: f64, theta0: f64, theta1: f64) -> Result<Self> {
        for (name, v) in [("sigma", sigma), ("theta0", theta0), ("theta1", theta1)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} = {v} must be finite and >= 0"
                )));
            }
        }
        Ok(ModelParams {
            sigma,
            theta0,
            theta1,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta0 + self.theta1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoranParams {
    #[serde(rename = "N")]
    pub n: usize,
    pub s: f64,
    pub u0: f64,
    pub u1: f64,
}

impl MoranParams {
    pub fn new(n: usize, s: f64, u0: f64, u1: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!(
                "N = {n} must be at least 2"
            )));
        }
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidParameter(format!("s = {s} must be positive")));
        }
        if !(u0 >= 0.0 && u1 >= 0.0 && u0.is_finite() && u1.is_finite()) {
            return Err(Error::InvalidParameter(
                "mutation rates must be >= 0".into(),
            ));
        }
        Ok(MoranParams { n, s, u0, u1 })
    }

    pub fn u(&self) -> f64 {
        self.u0 + self.u1
    }
}

fn ln_choose(n: usize, k: usize) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

impl LambdaMeasure {
    pub fn zero() -> Self {
        LambdaMeasure {
            m0: 0.0,
            m1: 0.0,
            interior: Interior::Zero,
        }
    }

    pub fn kingman(m0: f64) -> Self {
        LambdaMeasure {
            m0,
            m1: 0.0,
            interior: Interior::Zero,
        }
    }

    pub fn star(m1: f64) -> Self {
        LambdaMeasure {
            m0: 0.0,
            m1,
            interior: Interior::Zero,
        }
    }

    pub fn uniform(c: f64) -> Self {
        LambdaMeasure {
            m0: 0.0,
            m1: 0.0,
            interior: Interior::Uniform { c },
        }
    }

    pub fn beta(a: f64, b: f64, mass: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && mass > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "beta({a}, {b}) with mass {mass}"
            )));
        }
        Ok(LambdaMeasure {
            m0: 0.0,
            m1: 0.0,
            interior: Interior::Beta { a, b, mass },
        })
    }

    /// Atomic interior part; locations must lie in (0,1) and increase strictly.
    pub fn atoms(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.len() > ATOM_CAP {
            return Err(Error::AtomCap(ATOM_CAP));
        }
        for w in atoms.windows(2) {
            if !(w[0].x < w[1].x || (w[0].x == w[1].x && w[0].cx > w[1].cx)) {
                return Err(Error::InvalidParameter(
                    "atom locations must increase strictly".into(),
                ));
            }
        }
        for a in &atoms {
            if !(a.x > 0.0 && a.cx > 0.0 && a.mass > 0.0) {
                return Err(Error::InvalidParameter(format!("invalid atom {a:?}")));
            }
        }
        Ok(LambdaMeasure {
            m0: 0.0,
            m1: 0.0,
            interior: Interior::Atoms(atoms),
        })
    }

    pub fn custom(density: CustomDensity) -> Result<Self> {
        if density.exponent_at_0 <= -1.0 || density.exponent_at_1 <= -1.0 {
            return Err(Error::Integrability(
                "density is not a finite measure".into(),
            ));
        }
        Ok(LambdaMeasure {
            m0: 0.0,
            m1: 0.0,
            interior: Interior::Custom(density),
        })
    }

    pub fn with_m0(mut self, m0: f64) -> Self {
        self.m0 = m0;
        self
    }

    pub fn with_m1(mut self, m1: f64) -> Self {
        self.m1 = m1;
        self
    }

    pub fn is_zero(&self) -> bool {
        self.m0 == 0.0 && self.m1 == 0.0 && self.interior_is_zero()
    }

    pub fn interior_is_zero(&self) -> bool {
        match &self.interior {
            Interior::Zero => true,
            Interior::Uniform { c } => *c == 0.0,
            Interior::Atoms(a) => a.is_empty(),
            _ => false,
        }
    }

    /// Density of the interior part and its endpoint exponents.
    /// Density as a function of `(x, 1−x)`.
    fn density(&self) -> Option<(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>, f64, f64)> {
        match &self.interior {
            Interior::Uniform { c } => {
                let c = *c;
                Some((Arc::new(move |_, _| c), 0.0, 0.0))
            }
            &Interior::Beta { a, b, mass } => {
                let lnorm = mass.ln() - ln_beta(a, b);
                Some((
                    Arc::new(move |x: f64, cx: f64| {
                        ((a - 1.0) * x.ln() + (b - 1.0) * cx.ln() + lnorm).exp()
                    }),
                    a - 1.0,
                    b - 1.0,
                ))
            }
            Interior::Custom(d) => {
                let f = d.density.clone();
                Some((Arc::new(move |x, _| f(x)), d.exponent_at_0, d.exponent_at_1))
            }
            _ => None,
        }
    }

    /// `∫ g(x, 1−x) Λ_int(dx)` over the interior part only. `g_exp0` and
    /// `g_exp1` declare the power behaviour of `g` at the endpoints.
    pub fn integrate_interior<G: Fn(f64, f64) -> f64>(
        &self,
        g: G,
        g_exp0: f64,
        g_exp1: f64,
    ) -> Result<f64> {
        match &self.interior {
            Interior::Zero => Ok(0.0),
            Interior::Atoms(atoms) => Ok(atoms.iter().map(|a| a.mass * g(a.x, a.cx)).sum()),
            _ => {
                let (f, e0, e1) = self.density().expect("density variant");
                let e0 = e0 + g_exp0;
                let e1 = e1 + g_exp1;
                if e0 <= -1.0 || e1 <= -1.0 {
                    return Err(Error::Integrability(format!(
                        "integrand exponents {e0} at 0 and {e1} at 1"
                    )));
                }
                let q = Quadrature::new(1e-14, 1e-13);
                let r = q.integrate_singular_gaps(
                    |x: f64, cx: f64| {
                        if x <= 0.0 || cx <= 0.0 {
                            0.0
                        } else {
                            g(x, cx) * f(x, cx)
                        }
                    },
                    0.0,
                    1.0,
                    e0.min(0.0),
                    e1.min(0.0),
                )?;
                Ok(r.value)
            }
        }
    }

    pub fn interior_mass(&self) -> Result<f64> {
        match &self.interior {
            Interior::Zero => Ok(0.0),
            Interior::Uniform { c } => Ok(*c),
            Interior::Beta { mass, .. } => Ok(*mass),
            _ => self.integrate_interior(|_, _| 1.0, 0.0, 0.0),
        }
    }

    pub fn total_mass(&self) -> Result<f64> {
        Ok(self.m0 + self.m1 + self.interior_mass()?)
    }

    /// `λ_{k,j} = ∫ x^{j−2}(1−x)^{k−j} Λ(dx)`.
    pub fn lambda_rate(&self, k: usize, j: usize) -> Result<f64> {
        if !(2 <= j && j <= k) {
            return Err(Error::Domain(format!(
                "lambda_rate needs 2 <= j <= k, got k={k}, j={j}"
            )));
        }
        let mut v = 0.0;
        if j == 2 {
            v += self.m0;
        }
        if j == k {
            v += self.m1;
        }
        let (jf, kf) = (j as f64, k as f64);
        v += match &self.interior {
            Interior::Zero => 0.0,
            Interior::Uniform { c } => c * ln_beta(jf - 1.0, kf - jf + 1.0).exp(),
            &Interior::Beta { a, b, mass } => {
                (mass.ln() - ln_beta(a, b) + ln_beta(a + jf - 2.0, b + kf - jf)).exp()
            }
            Interior::Atoms(atoms) => atoms
                .iter()
                .map(|a| a.mass * ((jf - 2.0) * a.x.ln() + (kf - jf) * a.cx.ln()).exp())
                .sum(),
            Interior::Custom(_) => self.integrate_interior(
                |x, cx| x.powf(jf - 2.0) * cx.powf(kf - jf),
                jf - 2.0,
                kf - jf,
            )?,
        };
        Ok(v)
    }

    /// Interior contributions `C(k,j)·λ_{k,j}` for `j = 0..=k`
    /// (entries 0 and 1 are zero).
    fn interior_binomial_terms(&self, k: usize) -> Result<Vec<f64>> {
        let mut t = vec![0.0; k + 1];
        if k < 2 {
            return Ok(t);
        }
        match &self.interior {
            Interior::Zero => {}
            Interior::Uniform { c } => {
                for (j, tj) in t.iter_mut().enumerate().skip(2) {
                    *tj = c * k as f64 / (j as f64 * (j as f64 - 1.0));
                }
            }
            &Interior::Beta { a, b, mass } => {
                let kf = k as f64;
                let norm = mass / ln_beta(a, b).exp();
                let mut tj = ln_beta(a + kf - 2.0, b).exp();
                t[k] = norm * tj;
                for j in (2..k).rev() {
                    let jf = j as f64;
                    tj *= (jf + 1.0) * (b + kf - jf - 1.0) / ((kf - jf) * (a + jf - 2.0));
                    t[j] = norm * tj;
                }
            }
            Interior::Atoms(atoms) => {
                let lc: Vec<f64> = (0..=k).map(|j| ln_choose(k, j)).collect();
                for at in atoms {
                    let (lx, lcx) = (at.x.ln(), at.cx.ln());
                    let scale = at.mass / (at.x * at.x);
                    for j in 2..=k {
                        let e = lc[j] + j as f64 * lx + (k - j) as f64 * lcx;
                        if e > -745.0 {
                            t[j] += scale * e.exp();
                        }
                    }
                }
            }
            Interior::Custom(_) => {
                for (j, tj) in t.iter_mut().enumerate().skip(2) {
                    let c = ln_choose(k, j).exp();
                    *tj = c * self.lambda_rate_interior_custom(k, j)?;
                }
            }
        }
        Ok(t)
    }

    fn lambda_rate_interior_custom(&self, k: usize, j: usize) -> Result<f64> {
        let (jf, kf) = (j as f64, k as f64);
        self.integrate_interior(
            |x, cx| x.powf(jf - 2.0) * cx.powf(kf - jf),
            jf - 2.0,
            kf - jf,
        )
    }

    /// Total rates of the coalescence transitions out of `k`: entry `j`
    /// (for `j = 2..=k`) is `C(k,j)·λ_{k,j}`, the rate of `k → k−j+1`.
    pub fn merger_rates(&self, k: usize) -> Result<Vec<f64>> {
        let mut t = self.interior_binomial_terms(k)?;
        if k >= 2 {
            t[2] += self.m0 * (k * (k - 1)) as f64 / 2.0;
            t[k] += self.m1;
        }
        Ok(t)
    }

    /// `c_{n,k}` of the pmf recursion, interior part of Λ only.
    pub fn cnk(&self, n: usize, k: usize) -> Result<f64> {
        if !(n >= 1 && k > n) {
            return Err(Error::Domain(format!(
                "cnk needs k > n >= 1, got n={n}, k={k}"
            )));
        }
        if let Interior::Uniform { c } = self.interior {
            return Ok(c / (k - n) as f64);
        }
        Ok(self.cnk_column(k)?[n])
    }

    /// `c_{n,k}` for `n = 0..k` (entry 0 unused) as tail sums of the
    /// binomial terms: `c_{n,k} = (1/n) Σ_{j=k−n+1}^{k} C(k,j) λ_{k,j}`.
    pub fn cnk_column(&self, k: usize) -> Result<Vec<f64>> {
        let mut col = vec![0.0; k];
        if let Interior::Uniform { c } = self.interior {
            for (n, v) in col.iter_mut().enumerate().skip(1) {
                *v = c / (k - n) as f64;
            }
            return Ok(col);
        }
        let t = self.interior_binomial_terms(k)?;
        let mut tail = 0.0;
        for n in 1..k {
            tail += t[k - n + 1];
            col[n] = tail / n as f64;
        }
        Ok(col)
    }

    /// `σ_Λ = −∫ log(1−x) x^{−2} Λ(dx)`.
    pub fn sigma_lambda(&self) -> SigmaLambda {
        if self.m0 > 0.0 {
            return SigmaLambda {
                value: f64::INFINITY,
                flag: Some(SigmaFlag::AtomAtZero),
            };
        }
        if self.m1 > 0.0 {
            return SigmaLambda {
                value: f64::INFINITY,
                flag: Some(SigmaFlag::AtomAtOne),
            };
        }
        let g = |x: f64, cx: f64| -cx.ln() / (x * x);
        let value = match &self.interior {
            Interior::Zero => 0.0,
            Interior::Uniform { c } if *c > 0.0 => f64::INFINITY,
            Interior::Uniform { .. } => 0.0,
            Interior::Beta { a, .. } if *a <= 1.0 => f64::INFINITY,
            Interior::Atoms(atoms) => atoms.iter().map(|a| a.mass * g(a.x, a.cx)).sum(),
            Interior::Beta { .. } => self
                .integrate_interior(g, -1.0, -0.01)
                .unwrap_or(f64::INFINITY),
            Interior::Custom(d) => self.custom_sigma(d),
        };
        let flag = if value.is_infinite() {
            Some(SigmaFlag::DivergentDensity)
        } else {
            None
        };
        SigmaLambda { value, flag }
    }

    fn custom_sigma(&self, d: &CustomDensity) -> f64 {
        // dyadic shells towards both endpoints
        let q = Quadrature::new(1e-13, 1e-11);
        let f = &d.density;
        let g = |x: f64| -(-x).ln_1p() / (x * x) * f(x);
        let mut total = match q.integrate(g, 0.25, 0.75) {
            Ok(r) => r.value,
            Err(_) => return f64::INFINITY,
        };
        for j in 2..60 {
            let lo = 2f64.powi(-(j + 1));
            let hi = 2f64.powi(-j);
            let left = q
                .integrate(g, lo, hi)
                .map(|r| r.value)
                .unwrap_or(f64::INFINITY);
            let right = q
                .integrate(g, 1.0 - hi, 1.0 - lo)
                .map(|r| r.value)
                .unwrap_or(f64::INFINITY);
            total += left + right;
            if !(total < 1e12) {
                return f64::INFINITY;
            }
            if left.abs() + right.abs() < 1e-16 * total.abs() {
                break;
            }
        }
        total
    }

    pub fn to_spec(&self) -> Result<MeasureSpec> {
        let interior = match &self.interior {
            Interior::Zero => InteriorSpec::Zero,
            Interior::Uniform { c } => InteriorSpec::Uniform { c: *c },
            &Interior::Beta { a, b, mass } => InteriorSpec::Beta { a, b, mass },
            Interior::Atoms(atoms) => InteriorSpec::Atoms {
                atoms: atoms.iter().map(|a| [a.x, a.mass]).collect(),
            },
            Interior::Custom(_) => {
                return Err(Error::InvalidParameter(
                    "custom densities cannot be serialized".into(),
                ))
            }
        };
        Ok(MeasureSpec {
            m0: self.m0,
            m1: self.m1,
            interior,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SigmaFlag {
    AtomAtZero,
    AtomAtOne,
    DivergentDensity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SigmaLambda {
    pub value: f64,
    pub flag: Option<SigmaFlag>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RecurrenceClause {
    Theta0Positive,
    SelectionBelowThreshold,
    /// Λ ≡ 0, θ0 = 0: recurrent iff θ1 > σ.
    CrowKimura,
    /// The sufficient condition fails; recurrence is not decided.
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Recurrence {
    pub recurrent: bool,
    pub clause: RecurrenceClause,
}

pub fn is_positive_recurrent(measure: &LambdaMeasure, params: &ModelParams) -> Recurrence {
    if params.theta0 > 0.0 {
        return Recurrence {
            recurrent: true,
            clause: RecurrenceClause::Theta0Positive,
        };
    }
    if measure.is_zero() {
        return Recurrence {
            recurrent: params.theta1 > params.sigma,
            clause: RecurrenceClause::CrowKimura,
        };
    }
    let sl = measure.sigma_lambda().value;
    if params.sigma < sl + params.theta1 {
        Recurrence {
            recurrent: true,
            clause: RecurrenceClause::SelectionBelowThreshold,
        }
    } else {
        Recurrence {
            recurrent: false,
            clause: RecurrenceClause::Undecided,
        }
    }
}

/// Serialized form of a measure, as read from measure files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    #[serde(default)]
    pub m0: f64,
    #[serde(default)]
    pub m1: f64,
    #[serde(default = "zero_interior")]
    pub interior: InteriorSpec,
}

fn zero_interior() -> InteriorSpec {
    InteriorSpec::Zero
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum InteriorSpec {
    Zero,
    Uniform {
        #[serde(default = "one")]
        c: f64,
    },
    Beta {
        a: f64,
        b: f64,
        #[serde(default = "one")]
        mass: f64,
    },
    Atoms {
        atoms: Vec<[f64; 2]>,
    },
}

fn one() -> f64 {
    1.0
}

impl MeasureSpec {
    pub fn build(&self) -> Result<LambdaMeasure> {
        if !(self.m0 >= 0.0 && self.m1 >= 0.0) {
            return Err(Error::InvalidParameter("atom masses must be >= 0".into()));
        }
        let base = match &self.interior {
            InteriorSpec::Zero => LambdaMeasure::zero(),
            InteriorSpec::Uniform { c } => {
                if !(*c >= 0.0) {
                    return Err(Error::InvalidParameter(format!("uniform density c = {c}")));
                }
                LambdaMeasure::uniform(*c)
            }
            InteriorSpec::Beta { a, b, mass } => LambdaMeasure::beta(*a, *b, *mass)?,
            InteriorSpec::Atoms { atoms } => {
                LambdaMeasure::atoms(atoms.iter().map(|&[x, m]| Atom::new(x, m)).collect())?
            }
        };
        Ok(base.with_m0(self.m0).with_m1(self.m1))
    }

    pub fn from_json(text: &str) -> Result<LambdaMeasure> {
        let spec: MeasureSpec = serde_json::from_str(text)?;
        spec.build()
    }
}
