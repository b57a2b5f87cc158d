//! Moment duality: the moments `w_n = E[(1−X_∞)^n]`, the
//! Bolthausen–Sznitman generating function `w(s)` and the classical
//! absorption and fixation probabilities.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::closedform::PgfEvaluator;
use crate::error::{Error, Result};
use crate::measures::{LambdaMeasure, ModelParams};
use crate::recursions::StationaryPmf;
use crate::specfun::quad::Quadrature;
use crate::specfun::roots::safeguarded_newton;

/// Largest truncation tried by [`solve_w_moments`].
pub const MAX_MOMENT_K: usize = 4096;

#[derive(Debug, Clone, Serialize)]
pub struct MomentSequence {
    /// `w[n] = w_n` for `n = 0..=n_max`, `w[0] = 1`.
    pub w: Vec<f64>,
    pub truncation_k: usize,
    /// `max_n |w_n(K) − w_n(K/2)|` over the reported head.
    pub residual: f64,
    /// Most negative `(−1)^n Δ^n w_k` with `n + k ≤ 12`.
    pub monotonicity_defect: f64,
}

impl MomentSequence {
    /// CSV with columns `n,w_n`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,w_n\n");
        for (n, w) in self.w.iter().enumerate() {
            let _ = writeln!(s, "{n},{w:e}");
        }
        s
    }
}

/// Solves the moment system with closure `w_{K+1} = 0`.
fn moments_truncated(rates: &[Vec<f64>], params: &ModelParams, k: usize) -> Result<Vec<f64>> {
    let (s, t, t1) = (params.sigma, params.theta(), params.theta1);
    let mut a = DMatrix::<f64>::zeros(k, k);
    let mut rhs = DVector::<f64>::zeros(k);
    for n in 1..=k {
        let i = n - 1;
        let r = &rates[n];
        let nf = n as f64;
        let coal: f64 = r.iter().skip(2).sum::<f64>() / nf;
        a[(i, i)] = t + s + coal;
        if n == 1 {
            rhs[i] += t1;
        } else {
            a[(i, i - 1)] -= t1;
        }
        if n < k {
            a[(i, i + 1)] -= s;
        }
        // k → ℓ at rate C(n, n−ℓ+1)λ_{n,n−ℓ+1}
        for l in 1..n {
            a[(i, l - 1)] -= r[n - l + 1] / nf;
        }
    }
    let sol = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NoConvergence("moment system is singular".into()))?;
    let mut w = Vec::with_capacity(k + 1);
    w.push(1.0);
    w.extend(sol.iter().copied());
    Ok(w)
}

/// Moments `w_0..=w_{n_max}`, doubling `K` from `max(64, 4 n_max)` until
/// the head moves by less than `tol`.
pub fn solve_w_moments(
    measure: &LambdaMeasure,
    params: &ModelParams,
    n_max: usize,
    tol: f64,
) -> Result<MomentSequence> {
    if !(params.theta0 > 0.0 && params.theta1 > 0.0) {
        return Err(Error::PreconditionViolated(
            "moments need theta0 > 0 and theta1 > 0".into(),
        ));
    }
    let mut k = (4 * n_max).max(64);
    let mut rates: Vec<Vec<f64>> = vec![Vec::new()];
    let extend = |rates: &mut Vec<Vec<f64>>, k: usize| -> Result<()> {
        while rates.len() <= k {
            let n = rates.len();
            rates.push(measure.merger_rates(n)?);
        }
        Ok(())
    };
    extend(&mut rates, k)?;
    let mut prev = moments_truncated(&rates, params, k)?;
    loop {
        let next_k = 2 * k;
        if next_k > MAX_MOMENT_K {
            return Err(Error::NoConvergence(format!(
                "moment head not stable at K = {k}"
            )));
        }
        extend(&mut rates, next_k)?;
        let next = moments_truncated(&rates, params, next_k)?;
        let head = (next_k / 4).max(n_max);
        let change = (0..=head)
            .map(|n| (next[n] - prev[n]).abs())
            .fold(0.0, f64::max);
        k = next_k;
        if change < tol {
            let w = next[..=n_max].to_vec();
            let monotonicity_defect = monotonicity_defect(&next[..=12.min(next.len() - 1)]);
            return Ok(MomentSequence {
                w,
                truncation_k: k,
                residual: change,
                monotonicity_defect,
            });
        }
        prev = next;
    }
}

/// Most negative `(−1)^n Δ^n w_k` over `n + k ≤ len − 1` (zero if none).
pub fn monotonicity_defect(w: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    let mut diff = w.to_vec();
    for _n in 1..w.len() {
        diff = diff.windows(2).map(|p| p[0] - p[1]).collect();
        worst = diff.iter().fold(worst, |m, &d| m.min(d));
    }
    worst
}

/// Chebyshev interpolant on `[lo, hi]`.
#[derive(Debug, Clone)]
struct Chebyshev {
    lo: f64,
    hi: f64,
    coeffs: Vec<f64>,
}

impl Chebyshev {
    /// Interpolates at the `n` Chebyshev–Gauss nodes.
    fn fit<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, n: usize) -> Self {
        let pi = std::f64::consts::PI;
        let vals: Vec<f64> = (0..n)
            .map(|j| {
                let x = ((j as f64 + 0.5) * pi / n as f64).cos();
                f(0.5 * (hi + lo) + 0.5 * (hi - lo) * x)
            })
            .collect();
        let coeffs = (0..n)
            .map(|k| {
                let s: f64 = vals
                    .iter()
                    .enumerate()
                    .map(|(j, v)| v * (k as f64 * (j as f64 + 0.5) * pi / n as f64).cos())
                    .sum();
                s * if k == 0 { 1.0 } else { 2.0 } / n as f64
            })
            .collect();
        Chebyshev { lo, hi, coeffs }
    }

    fn unit(&self, x: f64) -> f64 {
        (2.0 * x - self.lo - self.hi) / (self.hi - self.lo)
    }

    fn eval(&self, x: f64) -> f64 {
        let u = self.unit(x);
        let (mut b1, mut b2) = (0.0, 0.0);
        for c in self.coeffs.iter().skip(1).rev() {
            let b0 = 2.0 * u * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        u * b1 - b2 + self.coeffs[0]
    }

    /// Antiderivative vanishing at `lo`.
    fn integral(&self) -> Chebyshev {
        let n = self.coeffs.len();
        let c = &self.coeffs;
        let half = 0.5 * (self.hi - self.lo);
        let at = |i: usize| if i < n { c[i] } else { 0.0 };
        let mut out = vec![0.0; n + 1];
        for (k, o) in out.iter_mut().enumerate().skip(1) {
            let prev = if k == 1 { 2.0 * at(0) } else { at(k - 1) };
            *o = half * (prev - at(k + 1)) / (2.0 * k as f64);
        }
        let mut cheb = Chebyshev {
            lo: self.lo,
            hi: self.hi,
            coeffs: out,
        };
        let v = cheb.eval(self.lo);
        cheb.coeffs[0] -= v;
        cheb
    }
}

/// The generating function `w(s) = Σ_{n≥1} w_n s^n` of the
/// Bolthausen–Sznitman moments on `(−s₂, s₂)`.
#[derive(Debug, Clone)]
pub struct BsGenerating {
    pub params: ModelParams,
    /// Root of `h` in (0,1), the singularity of the ODE.
    pub s2: f64,
    /// Exponent of the homogeneous solution at `s₂`.
    pub r: f64,
    /// Antiderivative of the regular part of `a`.
    a_reg: Chebyshev,
    /// `h(t)/(t − s₂)`.
    k: Chebyshev,
}

fn bs_h(p: &ModelParams, s: f64) -> f64 {
    p.theta() * s - p.theta1 * s * s - p.sigma * (1.0 - s) - (1.0 - s) * (-s).ln_1p()
}

fn bs_dh(p: &ModelParams, s: f64) -> f64 {
    p.theta() - 2.0 * p.theta1 * s + p.sigma + (-s).ln_1p() + 1.0
}

impl BsGenerating {
    pub fn new(params: &ModelParams) -> Result<Self> {
        let p = *params;
        if !(p.theta0 > 0.0 && p.theta1 > 0.0) {
            return Err(Error::PreconditionViolated(
                "w(s) needs theta0 > 0 and theta1 > 0".into(),
            ));
        }
        let s2 = safeguarded_newton(
            |s| bs_h(&p, s),
            |s| bs_dh(&p, s),
            0.0,
            1.0 - f64::EPSILON,
            1e-16,
        )?;
        let d2 = bs_dh(&p, s2);
        let m = |u: f64| 2.0 * p.theta1 * u - p.sigma - p.theta() - (-u).ln_1p();
        let r = m(s2) / d2;
        if !(r < 0.0) {
            return Err(Error::Domain(format!("exponent {r} at s2 is not negative")));
        }
        let lo = -s2;
        let kfun = |t: f64| {
            let d = t - s2;
            if d.abs() < 1e-7 {
                // h(s₂) = 0, h'' = −2θ1 − 1/(1−t)
                d2 + 0.5 * d * (-2.0 * p.theta1 - 1.0 / (1.0 - s2))
            } else {
                bs_h(&p, t) / d
            }
        };
        let k = Chebyshev::fit(kfun, lo, s2, 64);
        // a − 1/t − r/(t − s₂) = (M(t)/k(t) − r)/(t − s₂)
        let a_reg = Chebyshev::fit(|t| (m(t) / kfun(t) - r) / (t - s2), lo, s2, 64).integral();
        Ok(BsGenerating {
            params: p,
            s2,
            r,
            a_reg,
            k,
        })
    }

    /// `w(s)` for `s ∈ (−s₂, s₂)`.
    pub fn eval(&self, s: f64) -> Result<f64> {
        Ok(s * self.eval_ratio(s)?)
    }

    /// `w(s)/s`, continuous at 0 with value `w_1`.
    pub fn eval_ratio(&self, s: f64) -> Result<f64> {
        if !(s > -self.s2 && s < self.s2) {
            return Err(Error::Domain(format!("w(s) needs |s| < s2 = {}", self.s2)));
        }
        let (s2, r) = (self.s2, self.r);
        let a_s = self.a_reg.eval(s);
        let f = |l: f64, gap: f64| {
            let t = if l <= gap { s + l } else { s2 - gap };
            (gap / (s2 - s)).powf(-r) / gap * (a_s - self.a_reg.eval(t)).exp() / self.k.eval(t)
        };
        let q = Quadrature::new(1e-15, 1e-14);
        let v = q.integrate_singular_gaps(f, s, s2, 0.0, -r - 1.0)?.value;
        Ok(self.params.theta1 * v)
    }

    /// Taylor coefficients `w_1..=w_n`: `w_1 = lim w(s)/s` from the
    /// regular solution, the rest from the coefficient identity
    /// `(θ+σ+1−1/n)w_n = θ1w_{n−1} + σw_{n+1} + Σ_{ℓ<n} w_ℓ/((n−ℓ)(n−ℓ+1))`.
    pub fn taylor_head(&self, n: usize) -> Result<Vec<f64>> {
        let p = &self.params;
        let mut w = vec![1.0, self.eval_ratio(0.0)?];
        for m in 1..n {
            let mf = m as f64;
            let conv: f64 = (1..m).map(|l| w[l] / ((m - l) * (m - l + 1)) as f64).sum();
            let next = ((p.theta() + p.sigma + 1.0 - 1.0 / mf) * w[m] - p.theta1 * w[m - 1] - conv)
                / p.sigma;
            w.push(next);
        }
        w.truncate(n + 1);
        Ok(w[1..].to_vec())
    }

    /// Stieltjes transform `E[1/(t − (1−X_∞))] = (1 + w(1/t))/t`, `t > 1/s₂`.
    pub fn stieltjes(&self, t: f64) -> Result<f64> {
        if !(t > 1.0 / self.s2) {
            return Err(Error::Domain(format!(
                "Stieltjes transform needs t > 1/s2 = {}",
                1.0 / self.s2
            )));
        }
        Ok((1.0 + self.eval(1.0 / t)?) / t)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BsWValues {
    pub s2: f64,
    pub values: Vec<(f64, f64)>,
    pub taylor: Vec<f64>,
}

impl BsWValues {
    /// CSV with columns `s,w`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,w\n");
        for (s, w) in &self.values {
            let _ = writeln!(out, "{s:e},{w:e}");
        }
        out
    }
}

/// `w(s)` on a grid in `(0, s₂)` together with `w_1..=w_10`.
pub fn bs_w_generating(params: &ModelParams, s_grid: &[f64]) -> Result<BsWValues> {
    let g = BsGenerating::new(params)?;
    let values = s_grid
        .iter()
        .map(|&s| g.eval(s).map(|w| (s, w)))
        .collect::<Result<_>>()?;
    let taylor = g.taylor_head(10)?;
    Ok(BsWValues {
        s2: g.s2,
        values,
        taylor,
    })
}

/// `Σ_{k≥1} s^k/(k(k+1)) = 1 + (1−s)log(1−s)/s`.
pub fn bs_phi(s: f64) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    1.0 + (1.0 - s) * (-s).ln_1p() / s
}

/// Absorption probability of the Bolthausen–Sznitman model without
/// mutation: `(1−x)e^{−σ}/(x + (1−x)e^{−σ})`.
pub fn bs_absorption(x: f64, sigma: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) || !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("x = {x}, sigma = {sigma}")));
    }
    let e = (-sigma).exp();
    Ok((1.0 - x) * e / (x + (1.0 - x) * e))
}

/// Kimura: `(1 − e^{−2σx/m0})/(1 − e^{−2σ/m0})`.
pub fn kimura_fixation(x: f64, sigma: f64, m0: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) || !(sigma > 0.0 && m0 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "x = {x}, sigma = {sigma}, m0 = {m0}"
        )));
    }
    let c = 2.0 * sigma / m0;
    Ok((-c * x).exp_m1() / (-c).exp_m1())
}

/// `((1+s)^N − (1+s)^{N−k})/((1+s)^N − 1)` in log space.
pub fn moran_fixation(k: usize, n: usize, s: f64) -> Result<f64> {
    if !(1 <= k && k <= n) || !(s > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "k = {k}, N = {n}, s = {s}"
        )));
    }
    let l = s.ln_1p();
    // (1 − (1+s)^{−k}) / (1 − (1+s)^{−N})
    Ok((-(k as f64) * l).exp_m1() / (-(n as f64) * l).exp_m1())
}

/// `h(x) = 1 − g(1−x)`.
pub fn ancestral_type_h(pgf: &PgfEvaluator, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidParameter(format!("x = {x} not in [0,1]")));
    }
    Ok(pgf.ancestral_type(x))
}

/// `h(x) = Σ_{n≥0} x(1−x)^n a_n` from the pmf tails.
pub fn ancestral_type_from_tails(pmf: &StationaryPmf, x: f64) -> f64 {
    let a = pmf.tails();
    a.iter().rev().fold(0.0, |acc, an| acc * (1.0 - x) + an) * x
}
