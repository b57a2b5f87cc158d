//! Solvers for the Fearnhead-type recursions.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{is_positive_recurrent, LambdaMeasure, ModelParams, MoranParams};
use crate::scalar::{DoubleDouble, Exact};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolverTag {
    MoranShooting,
    MoranNullspace,
    MoranClosed,
    LambdaTruncated,
    StarClosed,
    StarForward,
    StarTwoSided,
    StarSeries,
    CrowKimura,
    WrightFisherClosed,
    Beta31Ode,
    Geometric,
}

/// Stationary law of a block counting process, `probs[n-1] = p_n`.
#[derive(Debug, Clone, Serialize)]
pub struct StationaryPmf {
    pub probs: Vec<f64>,
    pub truncation_k: usize,
    pub residual: f64,
    pub solver: SolverTag,
    pub warnings: Vec<String>,
}

/// Negative entries above this (relative to the largest weight) are clipped.
const CLIP_TOL: f64 = 1e-12;

impl StationaryPmf {
    /// Normalize nonnegative weights; small negative entries are clipped.
    pub fn from_weights(mut w: Vec<f64>, solver: SolverTag) -> Result<Self> {
        let scale = w.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::NoConvergence(
                "weights are zero or non-finite".into(),
            ));
        }
        let total: f64 = w.iter().sum();
        for x in w.iter_mut() {
            if *x < 0.0 {
                if *x < -CLIP_TOL * scale.max(total) {
                    return Err(Error::NegativeMass(*x / total));
                }
                *x = 0.0;
            }
        }
        let total: f64 = w.iter().sum();
        for x in w.iter_mut() {
            *x /= total;
        }
        let k = w.len();
        Ok(StationaryPmf {
            probs: w,
            truncation_k: k,
            residual: 0.0,
            solver,
            warnings: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// `p_n`, zero outside the stored support.
    pub fn p(&self, n: usize) -> f64 {
        if n == 0 {
            0.0
        } else {
            self.probs.get(n - 1).copied().unwrap_or(0.0)
        }
    }

    /// Tails `a_n = Σ_{k>n} p_k` for `n = 0..len`, with `a_0 = 1`.
    pub fn tails(&self) -> Vec<f64> {
        let len = self.probs.len();
        let mut a = vec![0.0; len + 1];
        let mut acc = 0.0;
        for n in (0..len).rev() {
            acc += self.probs[n];
            a[n] = acc;
        }
        a[0] = 1.0;
        a
    }

    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, p)| (i + 1) as f64 * p)
            .sum()
    }

    /// `E[(L)_n↓]`.
    pub fn factorial_moment(&self, n: usize) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let l = (i + 1) as f64;
                let mut f = 1.0;
                for j in 0..n {
                    f *= l - j as f64;
                }
                f * p
            })
            .sum()
    }

    /// `E[(L−1)_n↓]`.
    pub fn shifted_factorial_moment(&self, n: usize) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let l = i as f64;
                let mut f = 1.0;
                for j in 0..n {
                    f *= l - j as f64;
                }
                f * p
            })
            .sum()
    }

    pub fn pgf(&self, z: f64) -> f64 {
        self.probs.iter().rev().fold(0.0, |acc, p| (acc + p) * z)
    }

    pub fn sup_distance(&self, other: &StationaryPmf) -> f64 {
        let n = self.len().max(other.len());
        (1..=n)
            .map(|k| (self.p(k) - other.p(k)).abs())
            .fold(0.0, f64::max)
    }

    pub fn total_variation(&self, other: &StationaryPmf) -> f64 {
        let n = self.len().max(other.len());
        0.5 * (1..=n).map(|k| (self.p(k) - other.p(k)).abs()).sum::<f64>()
    }

    /// CSV with columns `n,p_n,a_n`.
    pub fn to_csv(&self) -> String {
        let a = self.tails();
        let mut out = String::from("n,p_n,a_n\n");
        for (i, p) in self.probs.iter().enumerate() {
            out.push_str(&format!("{},{:e},{:e}\n", i + 1, p, a[i + 1]));
        }
        out
    }

    pub fn diagnostics_json(&self) -> serde_json::Value {
        serde_json::json!({
            "K": self.truncation_k,
            "residual": self.residual,
            "solver_tag": self.solver,
        })
    }
}

/// Max violation of the tail recursion and its boundary equation.
pub fn moran_tail_residual(params: &MoranParams, pmf: &StationaryPmf) -> f64 {
    let n_pop = params.n;
    let nf = n_pop as f64;
    let (s, u1, u) = (params.s, params.u1, params.u());
    let a = pmf.tails();
    let at = |n: usize| a.get(n).copied().unwrap_or(0.0);
    let mut r: f64 = 0.0;
    for n in 2..n_pop {
        let m = (nf - n as f64 + 1.0) / nf * s;
        let lhs = (n as f64 / nf + u1) * at(n);
        let rhs = (n as f64 / nf + m + u) * at(n - 1) - m * at(n - 2);
        r = r.max((lhs - rhs).abs());
    }
    let b = (1.0 + u + s / nf) * at(n_pop - 1) - s / nf * at(n_pop - 2);
    r.max(b.abs()).max((at(0) - 1.0).abs())
}

/// Max violation of the pmf form of the Moran recursion and its boundary.
pub fn moran_pmf_residual(params: &MoranParams, pmf: &StationaryPmf) -> f64 {
    let n_pop = params.n;
    let nf = n_pop as f64;
    let (s, u0, u1, u) = (params.s, params.u0, params.u1, params.u());
    let a = pmf.tails();
    let mut r: f64 = 0.0;
    for n in 2..n_pop {
        let lhs = (n as f64 / nf + u1) * pmf.p(n);
        let rhs = (nf - n as f64 + 1.0) * s / nf * pmf.p(n - 1)
            - u0 * a.get(n - 1).copied().unwrap_or(0.0);
        r = r.max((lhs - rhs).abs());
    }
    let b = (1.0 + u) * pmf.p(n_pop) - s / nf * pmf.p(n_pop - 1);
    let total: f64 = pmf.probs.iter().sum();
    r.max(b.abs()).max((total - 1.0).abs())
}

/// Moran stationary law by positive backward propagation of the pmf
/// recursion from `p_N`.
pub fn solve_moran(params: &MoranParams) -> Result<StationaryPmf> {
    let n_pop = params.n;
    let nf = n_pop as f64;
    let (s, u0, u1, u) = (params.s, params.u0, params.u1, params.u());
    let mut p = vec![0.0; n_pop + 1];
    p[n_pop] = 1.0;
    p[n_pop - 1] = nf * (1.0 + u) / s;
    let mut suffix = p[n_pop] + p[n_pop - 1];
    for n in (2..n_pop).rev() {
        let v = ((n as f64 / nf + u1) * p[n] + u0 * suffix) * nf / ((nf - n as f64 + 1.0) * s);
        p[n - 1] = v;
        suffix += v;
        if v > 1e250 {
            for x in p[n - 1..].iter_mut() {
                *x *= 1e-250;
            }
            suffix *= 1e-250;
        }
    }
    if !suffix.is_finite() || suffix <= 0.0 {
        return Err(Error::SingularShooting(
            "propagation produced a non-finite mass".into(),
        ));
    }
    let mut pmf = StationaryPmf::from_weights(p[1..].to_vec(), SolverTag::MoranShooting)?;
    pmf.residual = moran_tail_residual(params, &pmf).max(moran_pmf_residual(params, &pmf));
    Ok(pmf)
}

/// Moran generator rates `q_N(i, j)` for `i, j ∈ [N]`.
pub fn moran_rate(params: &MoranParams, i: usize, j: usize) -> f64 {
    let nf = params.n as f64;
    let (s, u0, u1) = (params.s, params.u0, params.u1);
    let fi = i as f64;
    if j == i + 1 {
        fi * (nf - fi) * s / nf
    } else if j + 1 == i {
        fi * (fi - 1.0) / nf + (fi - 1.0) * u1 + u0
    } else if j + 2 <= i && j >= 1 {
        u0
    } else {
        0.0
    }
}

/// Stationary vector of the dense Moran generator by an LU solve.
pub fn solve_moran_nullspace(params: &MoranParams) -> Result<StationaryPmf> {
    let n_pop = params.n;
    if n_pop > 2000 {
        return Err(Error::PreconditionViolated(format!(
            "N = {n_pop} exceeds 2000"
        )));
    }
    let mut q = DMatrix::<f64>::zeros(n_pop, n_pop);
    for i in 1..=n_pop {
        let mut out = 0.0;
        for j in 1..=n_pop {
            if j != i {
                let r = moran_rate(params, i, j);
                q[(i - 1, j - 1)] = r;
                out += r;
            }
        }
        q[(i - 1, i - 1)] = -out;
    }
    // π Q = 0 with Σπ = 1: transpose and overwrite one equation
    let mut a = q.transpose();
    for j in 0..n_pop {
        a[(n_pop - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n_pop);
    b[n_pop - 1] = 1.0;
    let pi = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::SingularShooting("generator matrix is singular".into()))?;
    let mut pmf =
        StationaryPmf::from_weights(pi.iter().copied().collect(), SolverTag::MoranNullspace)?;
    let pv = DVector::from_vec(pmf.probs.clone());
    let res = q.transpose() * pv;
    pmf.residual = res.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Ok(pmf)
}

/// Default cap on the truncation level.
pub const K_CAP: usize = 1 << 14;

fn lambda_truncated_once(
    measure: &LambdaMeasure,
    params: &ModelParams,
    k: usize,
) -> Result<(Vec<f64>, f64)> {
    let (sigma, th0, th1) = (params.sigma, params.theta0, params.theta1);
    let (m0, m1) = (measure.m0, measure.m1);
    let mut p = vec![0.0; k + 1];
    let mut acc = vec![0.0; k + 1];
    p[k] = 1.0;
    let mut suffix = 0.0;
    let mut n = k;
    let mut col = measure.cnk_column(k)?;
    loop {
        // p[n] is known: fold its column into the running sums
        for (i, a) in acc.iter_mut().enumerate().take(n).skip(1) {
            *a += p[n] * col[i];
        }
        suffix += p[n];
        if n == 1 {
            break;
        }
        let m = n - 1;
        let v =
            ((m0 * n as f64 / 2.0 + th1) * p[n] + acc[m] + (m1 / m as f64 + th0) * suffix) / sigma;
        p[m] = v;
        if v > 1e250 {
            for x in p[m..].iter_mut() {
                *x *= 1e-250;
            }
            for x in acc.iter_mut() {
                *x *= 1e-250;
            }
            suffix *= 1e-250;
        }
        n = m;
        if n > 1 {
            col = measure.cnk_column(n)?;
        }
    }
    let total: f64 = p[1..].iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::NoConvergence(
            "truncated system produced no mass".into(),
        ));
    }
    let probs: Vec<f64> = p[1..].iter().map(|x| x / total).collect();
    // tail beyond K estimated from the last ratio
    let r = if k >= 2 && probs[k - 2] > 0.0 {
        probs[k - 1] / probs[k - 2]
    } else {
        1.0
    };
    let tail = if r < 1.0 {
        probs[k - 1] * r / (1.0 - r)
    } else {
        probs[k - 1] * k as f64
    };
    Ok((probs, tail))
}

/// Residual of the pmf equations `n = 1..K−1` for a candidate `p`.
pub fn lambda_pmf_residual(
    measure: &LambdaMeasure,
    params: &ModelParams,
    probs: &[f64],
) -> Result<f64> {
    let k = probs.len();
    let mut res: f64 = 0.0;
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(k + 1);
    for kk in 0..=k {
        cols.push(if kk >= 2 {
            measure.cnk_column(kk)?
        } else {
            Vec::new()
        });
    }
    let p = |i: usize| if i >= 1 && i <= k { probs[i - 1] } else { 0.0 };
    let mut suffix = vec![0.0; k + 2];
    for i in (1..=k).rev() {
        suffix[i] = suffix[i + 1] + p(i);
    }
    for n in 1..k {
        let mut lhs = (measure.m0 * (n + 1) as f64 / 2.0 + params.theta1) * p(n + 1);
        for kk in n + 1..=k {
            lhs += p(kk) * cols[kk][n];
        }
        lhs += (measure.m1 / n as f64 + params.theta0) * suffix[n + 1];
        res = res.max((lhs - params.sigma * p(n)).abs());
    }
    Ok(res)
}

/// Truncated pmf system for a general Λ, doubling `K` until the sup-norm
/// change drops below `tol`.
pub fn solve_lambda_truncated(
    measure: &LambdaMeasure,
    params: &ModelParams,
    k: usize,
    tol: f64,
) -> Result<StationaryPmf> {
    solve_lambda_truncated_capped(measure, params, k, tol, K_CAP)
}

pub fn solve_lambda_truncated_capped(
    measure: &LambdaMeasure,
    params: &ModelParams,
    k: usize,
    tol: f64,
    cap: usize,
) -> Result<StationaryPmf> {
    let mut warnings = Vec::new();
    let rec = is_positive_recurrent(measure, params);
    if !rec.recurrent {
        warnings.push(format!(
            "positive recurrence not established ({:?})",
            rec.clause
        ));
    }
    if params.sigma == 0.0 {
        let mut pmf = StationaryPmf::from_weights(vec![1.0], SolverTag::LambdaTruncated)?;
        pmf.warnings = warnings;
        return Ok(pmf);
    }
    let mut k = k.max(10);
    let (mut prev, _) = lambda_truncated_once(measure, params, k)?;
    loop {
        let k2 = 2 * k;
        if k2 > cap {
            return Err(Error::NoConvergence(format!(
                "truncation level exceeded cap {cap}"
            )));
        }
        let (next, tail) = lambda_truncated_once(measure, params, k2)?;
        let change = (0..k2)
            .map(|i| (next[i] - prev.get(i).copied().unwrap_or(0.0)).abs())
            .fold(0.0, f64::max);
        if change < tol {
            let mut pmf = StationaryPmf::from_weights(next, SolverTag::LambdaTruncated)?;
            let coef =
                params.sigma + params.theta() + measure.m1 + measure.m0 * (k2 + 1) as f64 / 2.0;
            let trunc = lambda_pmf_residual_fast(measure, params, &pmf.probs)?;
            pmf.residual = trunc + coef * tail;
            pmf.truncation_k = k2;
            pmf.warnings = warnings;
            return Ok(pmf);
        }
        prev = next;
        k = k2;
    }
}

/// Residual of the truncated equations computed with column sweeps.
fn lambda_pmf_residual_fast(
    measure: &LambdaMeasure,
    params: &ModelParams,
    probs: &[f64],
) -> Result<f64> {
    let k = probs.len();
    let mut lhs = vec![0.0; k + 1];
    let p = |i: usize| if i >= 1 && i <= k { probs[i - 1] } else { 0.0 };
    for kk in 2..=k {
        let col = measure.cnk_column(kk)?;
        for n in 1..kk {
            lhs[n] += p(kk) * col[n];
        }
    }
    let mut suffix = 0.0;
    let mut res: f64 = 0.0;
    for n in (1..k).rev() {
        suffix += p(n + 1);
        let l = lhs[n]
            + (measure.m0 * (n + 1) as f64 / 2.0 + params.theta1) * p(n + 1)
            + (measure.m1 / n as f64 + params.theta0) * suffix;
        res = res.max((l - params.sigma * p(n)).abs());
    }
    Ok(res)
}

/// Crow–Kimura (Λ ≡ 0) geometric parameter `p`; the law is Geom(1−p).
pub fn crow_kimura_p(params: &ModelParams) -> Result<f64> {
    let (sigma, th0, th1) = (params.sigma, params.theta0, params.theta1);
    if !(th0 > 0.0 || th1 > sigma) {
        return Err(Error::NotPositiveRecurrent(format!(
            "Crow-Kimura needs theta0 > 0 or theta1 > sigma (theta0 = {th0}, theta1 = {th1}, sigma = {sigma})"
        )));
    }
    if th1 == 0.0 {
        return Ok(sigma / (sigma + th0));
    }
    let th = th0 + th1;
    let disc = ((sigma - th) * (sigma - th) + 4.0 * sigma * th0).sqrt();
    // rationalized root avoids cancellation when σ+θ ≈ disc
    let num = sigma + th - disc;
    let alt = 2.0 * sigma / (sigma + th + disc);
    Ok(if num.abs() < 1e-3 * (sigma + th) {
        alt
    } else {
        num / (2.0 * th1)
    })
}

/// Geometric pmf `(1−p)p^{n−1}` truncated where the tail drops below 1e−17.
pub fn geometric_pmf(p: f64, k: Option<usize>, solver: SolverTag) -> Result<StationaryPmf> {
    let k = k.unwrap_or_else(|| {
        if p <= 0.0 {
            1
        } else {
            ((1e-17f64.ln() / p.ln()).ceil() as usize).clamp(1, 1 << 20)
        }
    });
    let probs: Vec<f64> = (0..k).map(|i| (1.0 - p) * p.powi(i as i32)).collect();
    let tail = p.powi(k as i32);
    Ok(StationaryPmf {
        probs,
        truncation_k: k,
        residual: tail,
        solver,
        warnings: Vec::new(),
    })
}

pub fn crow_kimura_geometric(
    params: &ModelParams,
    k: Option<usize>,
) -> Result<(f64, StationaryPmf)> {
    let p = crow_kimura_p(params)?;
    Ok((p, geometric_pmf(p, k, SolverTag::CrowKimura)?))
}

/// Star-shaped tails for θ1 = 0:
/// `a_n = n!·(σ/(σ+θ0))^n / (1 + m1/(σ+θ0))_n↑`.
pub fn star_tails_no_theta1(params: &ModelParams, m1: f64, k: usize) -> Vec<f64> {
    let st = params.sigma + params.theta0;
    let r = params.sigma / st;
    let c = m1 / st;
    let mut a = vec![1.0; k + 1];
    for n in 1..=k {
        a[n] = a[n - 1] * n as f64 * r / (c + n as f64);
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StarMethod {
    /// Forward substitution; falls back to the two-sided solve when the
    /// error monitor trips.
    Auto,
    /// Forward substitution only; instability is an error.
    ForwardOnly,
    TwoSided,
}

/// Star-shaped stationary law from the tail recursion
/// `(m1/n + θ + σ) a_n = σ a_{n−1} + θ1 a_{n+1}`.
pub fn solve_star(params: &ModelParams, m1: f64, k: usize) -> Result<StationaryPmf> {
    if params.theta1 == 0.0 {
        return solve_star_with(params, m1, k, None, StarMethod::Auto);
    }
    match crate::closedform::star::star_p1(m1, params) {
        Ok(p1) => solve_star_with(params, m1, k, Some(p1), StarMethod::Auto),
        Err(Error::RootOrderViolation(_)) => {
            solve_star_with(params, m1, k, None, StarMethod::TwoSided)
        }
        Err(e) => Err(e),
    }
}

pub fn solve_star_with(
    params: &ModelParams,
    m1: f64,
    k: usize,
    p1: Option<f64>,
    method: StarMethod,
) -> Result<StationaryPmf> {
    if !(params.sigma > 0.0) {
        return Err(Error::PreconditionViolated(
            "solve_star needs sigma > 0".into(),
        ));
    }
    let k = k.max(2);
    if params.theta1 == 0.0 {
        let a = star_tails_no_theta1(params, m1, k);
        let probs: Vec<f64> = (1..=k).map(|n| a[n - 1] - a[n]).collect();
        let mut pmf = StationaryPmf {
            probs,
            truncation_k: k,
            residual: a[k],
            solver: SolverTag::StarClosed,
            warnings: Vec::new(),
        };
        pmf.residual = star_tail_residual(params, m1, &pmf.tails()).max(a[k]);
        return Ok(pmf);
    }
    if method == StarMethod::TwoSided {
        return star_two_sided(params, m1, k);
    }
    let p1 = p1.ok_or_else(|| Error::PreconditionViolated("forward recursion needs p1".into()))?;
    match star_forward(params, m1, k, p1) {
        Ok(pmf) => Ok(pmf),
        Err(e) if method == StarMethod::ForwardOnly => Err(e),
        Err(_) => {
            let mut pmf = star_two_sided(params, m1, k)?;
            let gap = (pmf.p(1) - p1).abs();
            pmf.warnings.push(format!(
                "forward recursion unstable; two-sided solve used (|p1 difference| = {gap:e})"
            ));
            Ok(pmf)
        }
    }
}

fn star_coef(params: &ModelParams, m1: f64, n: usize) -> f64 {
    m1 / n as f64 + params.theta() + params.sigma
}

fn star_forward(params: &ModelParams, m1: f64, k: usize, p1: f64) -> Result<StationaryPmf> {
    let th1 = DoubleDouble::new(params.theta1);
    let sig = DoubleDouble::new(params.sigma);
    let mut a = vec![DoubleDouble::new(1.0), DoubleDouble::new(1.0 - p1)];
    // homogeneous perturbation seeded at the precision of p1
    let mut e_prev = 0.0f64;
    let mut e = 1e-15f64;
    let mut n = 1;
    while n < k {
        let c = DoubleDouble::new(star_coef(params, m1, n));
        let next = (c * a[n] - sig * a[n - 1]) / th1;
        let e_next = (star_coef(params, m1, n) * e - params.sigma * e_prev) / params.theta1;
        e_prev = e;
        e = e_next;
        let v = next.value();
        if v < -1e-15
            || v > a[n].value() + 1e-15
            || e.abs() > 1e-9 * v.abs().max(1e-300) && v > 1e-17
        {
            return Err(Error::InstabilityDetected(format!(
                "tail recursion lost accuracy at n = {}",
                n + 1
            )));
        }
        a.push(next);
        n += 1;
        if v <= 1e-17 {
            break;
        }
    }
    let tails: Vec<f64> = a.iter().map(|x| x.value().max(0.0)).collect();
    let probs: Vec<f64> = (1..tails.len()).map(|i| tails[i - 1] - tails[i]).collect();
    let mut pmf = StationaryPmf {
        truncation_k: probs.len(),
        probs,
        residual: 0.0,
        solver: SolverTag::StarForward,
        warnings: Vec::new(),
    };
    pmf.residual = star_tail_residual(params, m1, &pmf.tails());
    Ok(pmf)
}

/// Tridiagonal solve with `a_0 = 1`, `a_K = 0`, doubling `K` to convergence.
fn star_two_sided(params: &ModelParams, m1: f64, k: usize) -> Result<StationaryPmf> {
    let mut k = k.max(16);
    let mut prev = star_thomas(params, m1, k);
    loop {
        let k2 = 2 * k;
        if k2 > K_CAP * 64 {
            return Err(Error::NoConvergence("star two-sided solve".into()));
        }
        let next = star_thomas(params, m1, k2);
        let change = (0..=k)
            .map(|i| (next[i] - prev[i]).abs())
            .fold(0.0, f64::max);
        let last = next[k];
        if change < 1e-16 && last < 1e-17 {
            let mut end = k2;
            while end > 1 && next[end - 1] < 1e-300 {
                end -= 1;
            }
            let probs: Vec<f64> = (1..=end).map(|i| next[i - 1] - next[i]).collect();
            let mut pmf = StationaryPmf {
                truncation_k: k2,
                probs,
                residual: 0.0,
                solver: SolverTag::StarTwoSided,
                warnings: Vec::new(),
            };
            pmf.residual = star_tail_residual(params, m1, &pmf.tails());
            return Ok(pmf);
        }
        prev = next;
        k = k2;
    }
}

fn star_thomas(params: &ModelParams, m1: f64, k: usize) -> Vec<f64> {
    // unknowns a_1..a_{K-1}: −σ a_{n−1} + c_n a_n − θ1 a_{n+1} = 0
    let m = k - 1;
    let mut cp = vec![0.0; m];
    let mut dp = vec![0.0; m];
    for i in 0..m {
        let n = i + 1;
        let b = star_coef(params, m1, n);
        let lower = -params.sigma;
        let upper = -params.theta1;
        let rhs = if n == 1 { params.sigma } else { 0.0 };
        let (cprev, dprev) = if i == 0 {
            (0.0, 0.0)
        } else {
            (cp[i - 1], dp[i - 1])
        };
        let lo = if i == 0 { 0.0 } else { lower };
        let denom = b - lo * cprev;
        cp[i] = upper / denom;
        dp[i] = (rhs - lo * dprev) / denom;
    }
    let mut a = vec![0.0; k + 1];
    a[0] = 1.0;
    for i in (0..m).rev() {
        let next = if i + 1 < m { a[i + 2] } else { 0.0 };
        a[i + 1] = dp[i] - cp[i] * next;
    }
    a
}

/// Max violation of the star-shaped tail recursion over the given tails.
pub fn star_tail_residual(params: &ModelParams, m1: f64, tails: &[f64]) -> f64 {
    let mut r: f64 = 0.0;
    for n in 1..tails.len() {
        let next = tails.get(n + 1).copied().unwrap_or(0.0);
        let v = star_coef(params, m1, n) * tails[n]
            - params.sigma * tails[n - 1]
            - params.theta1 * next;
        r = r.max(v.abs());
    }
    r
}

/// Exact-scalar helper: `Σ_{k} w_k` for converting closed-form weights.
pub fn exact_weights_to_pmf<T: Exact>(w: &[T], solver: SolverTag) -> Result<StationaryPmf> {
    let total = w.iter().cloned().fold(T::zero(), |a, b| a + b);
    let probs: Vec<f64> = w
        .iter()
        .map(|x| (x.clone() / total.clone()).to_f64())
        .collect();
    StationaryPmf::from_weights(probs, solver)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moran_two_states() {
        let p = MoranParams::new(2, 1.0, 0.0, 0.0).unwrap();
        let a = solve_moran(&p).unwrap();
        assert!((a.p(1) - 2.0 / 3.0).abs() < 1e-15);
        assert!((a.p(2) - 1.0 / 3.0).abs() < 1e-15);
        let b = solve_moran_nullspace(&p).unwrap();
        assert!(a.sup_distance(&b) < 1e-15);
    }

    #[test]
    fn moran_small_agreement() {
        let p = MoranParams::new(3, 1.0, 0.5, 0.5).unwrap();
        let a = solve_moran(&p).unwrap();
        let b = solve_moran_nullspace(&p).unwrap();
        assert!(a.sup_distance(&b) < 1e-12);
        assert!(b.residual < 1e-12);
        assert!(a.residual < 1e-12);
    }

    #[test]
    fn crow_kimura_examples() {
        let p = crow_kimura_p(&ModelParams::new(1.0, 1.0, 0.0).unwrap()).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
        let p = crow_kimura_p(&ModelParams::new(1.0, 0.0, 2.0).unwrap()).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
        let p = crow_kimura_p(&ModelParams::new(1.0, 1.0, 1.0).unwrap()).unwrap();
        assert!((p - (3.0 - 5f64.sqrt()) / 2.0).abs() < 1e-15);
        assert!(crow_kimura_p(&ModelParams::new(2.0, 0.0, 1.0).unwrap()).is_err());
    }

    #[test]
    fn truncated_crow_kimura() {
        let params = ModelParams::new(1.0, 1.0, 0.0).unwrap();
        let pmf = solve_lambda_truncated(&LambdaMeasure::zero(), &params, 16, 1e-13).unwrap();
        for n in 1..30 {
            assert!((pmf.p(n) - 0.5f64.powi(n as i32)).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn star_no_theta1() {
        let params = ModelParams::new(1.0, 0.0, 0.0).unwrap();
        let pmf = solve_star(&params, 1.0, 60).unwrap();
        assert!((pmf.p(1) - 0.5).abs() < 1e-15);
        assert_eq!(pmf.tails()[0], 1.0);
    }

    #[test]
    fn clipping_rules() {
        assert!(StationaryPmf::from_weights(vec![1.0, -1e-14], SolverTag::Geometric).is_ok());
        assert!(matches!(
            StationaryPmf::from_weights(vec![1.0, -1e-3], SolverTag::Geometric),
            Err(Error::NegativeMass(_))
        ));
    }
}
