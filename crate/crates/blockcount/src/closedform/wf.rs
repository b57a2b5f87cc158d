//! Wright–Fisher diffusion (Kingman coalescent): exact stationary law,
//! mean and factorial moments.

use crate::error::{Error, Result};
use crate::measures::ModelParams;
use crate::recursions::{SolverTag, StationaryPmf};
use crate::scalar::{BigFixed, Exact};
use crate::specfun::exact::pfq_convergent;
use crate::specfun::{kummer_1f1, Quadrature};

use super::terminating::QFamily;
use super::{shifted_from_factorial, ClosedForm, ModelTag, PgfEvaluator};

const MASS_TOL: f64 = 1e-18;
const N_CAP: usize = 5000;

fn check(m0: f64, params: &ModelParams) -> Result<()> {
    if !(m0 > 0.0 && m0.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "m0 = {m0} must be positive"
        )));
    }
    if !(params.sigma > 0.0) {
        return Err(Error::PreconditionViolated("sigma must be positive".into()));
    }
    Ok(())
}

/// `I_1/I_0` through the Kummer-transformed confluent functions, which
/// have positive terms.
fn wf_ratio<T: Exact>(alpha: &T, beta: &T, c: &T) -> Result<T> {
    let one = T::one();
    let tol = T::from_f64(1e-200);
    let f1 = pfq_convergent(
        std::slice::from_ref(beta),
        &[alpha.clone() + beta.clone() + T::from_i64(2)],
        c,
        &tol,
        100_000,
    )?;
    let f0 = pfq_convergent(
        std::slice::from_ref(beta),
        &[alpha.clone() + beta.clone() + one.clone()],
        c,
        &tol,
        100_000,
    )?;
    Ok((alpha.clone() + one.clone()) / (alpha.clone() + one + beta.clone()) * f1 / f0)
}

/// Exact pmf weights for `θ0 > 0` over an [`Exact`] scalar, stopping once
/// the remaining mass is below `mass_tol`.
pub fn wf_closed_weights<T: Exact>(m0: f64, params: &ModelParams, mass_tol: f64) -> Result<Vec<T>> {
    check(m0, params)?;
    if params.theta0 == 0.0 {
        return Err(Error::PreconditionViolated(
            "exact weights need theta0 > 0".into(),
        ));
    }
    let m = T::from_f64(m0);
    let two = T::from_i64(2);
    let alpha = two.clone() * T::from_f64(params.theta1) / m.clone();
    let beta = two.clone() * T::from_f64(params.theta0) / m.clone();
    let c = two * T::from_f64(params.sigma) / m;
    let r = wf_ratio(&alpha, &beta, &c)?;
    let one = T::one();
    let pref = beta.clone() / (one.clone() - r.clone());
    let family = |i: i64| {
        let (a_d, a_e, c_d, b_e) = (alpha.clone(), alpha.clone(), c.clone(), beta.clone());
        QFamily::new(
            i as usize,
            move |m: usize| c_d.clone() / (a_d.clone() + T::from_i64(i + m as i64)),
            move |m: usize, k: usize| {
                let (m, k) = (m as i64, k as i64);
                T::from_i64(m + k) * (T::from_i64(k) - b_e.clone())
                    / ((a_e.clone() + T::from_i64(m + i + k)) * T::from_i64(k))
            },
        )
    };
    let mut q1 = family(1);
    let mut q2 = family(2);
    let c1 = r / (alpha.clone() + one.clone());
    let c2 = one.clone() / (alpha + T::from_i64(2));
    let tol = T::from_f64(mass_tol);
    let mut remaining = one;
    let mut out = Vec::new();
    for n in 1..=N_CAP {
        let p = pref.clone() * (c1.clone() * q1.q(n) - c2.clone() * q2.q(n));
        remaining = remaining - p.clone();
        out.push(p);
        if n >= 2 && remaining.abs_val() < tol {
            return Ok(out);
        }
    }
    Err(Error::NoConvergence(format!(
        "mass not exhausted after {N_CAP} terms"
    )))
}

/// Stationary law for `Λ = m0·δ0`.
pub fn wf_closed(m0: f64, params: &ModelParams) -> Result<ClosedForm> {
    check(m0, params)?;
    let c = 2.0 * params.sigma / m0;
    let b = 2.0 + 2.0 * params.theta() / m0;
    let record = serde_json::json!({ "m0": m0, "sigma": params.sigma, "theta0": params.theta0, "theta1": params.theta1 });
    if params.theta0 == 0.0 {
        let norm = kummer_1f1(1.0, b, c)?.value;
        let mut probs = vec![1.0 / norm];
        let mut n = 1;
        loop {
            let next = probs[n - 1] * c / (b + (n - 1) as f64);
            if next < 1e-300 || (next < 1e-18 && c < b + n as f64) {
                break;
            }
            probs.push(next);
            n += 1;
        }
        let mut pmf = StationaryPmf::from_weights(probs, SolverTag::WrightFisherClosed)?;
        pmf.residual = kingman_residual(m0, params, &pmf.probs);
        let p1 = pmf.p(1);
        let eval = move |z: f64| {
            z * kummer_1f1(1.0, b, c * z)
                .map(|r| r.value)
                .unwrap_or(f64::NAN)
                / norm
        };
        let deriv = move |z: f64| {
            let f = kummer_1f1(1.0, b, c * z)
                .map(|r| r.value)
                .unwrap_or(f64::NAN);
            let fp = kummer_1f1(2.0, b + 1.0, c * z)
                .map(|r| r.value)
                .unwrap_or(f64::NAN)
                / b;
            (f + c * z * fp) / norm
        };
        let pgf =
            PgfEvaluator::new(ModelTag::WrightFisher, record, p1, eval).with_derivative(deriv);
        return Ok(ClosedForm { pmf, pgf });
    }
    let w: Vec<BigFixed> = wf_closed_weights(m0, params, MASS_TOL)?;
    let probs: Vec<f64> = w.iter().map(|x| x.to_f64()).collect();
    let mut pmf = StationaryPmf::from_weights(probs, SolverTag::WrightFisherClosed)?;
    pmf.residual = kingman_residual(m0, params, &pmf.probs);
    let p1 = pmf.p(1);
    let alpha = 2.0 * params.theta1 / m0;
    let beta = 2.0 * params.theta0 / m0;
    let r = {
        let (a, b, cc) = (
            BigFixed::from_f64(alpha),
            BigFixed::from_f64(beta),
            BigFixed::from_f64(c),
        );
        wf_ratio(&a, &b, &cc)?.to_f64()
    };
    let eval = move |z: f64| wf_pgf_integral(alpha, beta, c, r, z).unwrap_or(f64::NAN);
    let pgf = PgfEvaluator::new(ModelTag::WrightFisher, record, p1, eval).with_p2(pmf.p(2));
    Ok(ClosedForm { pmf, pgf })
}

/// Integral representation of the pgf for `θ0 > 0`, `0 < z < 1`.
fn wf_pgf_integral(alpha: f64, beta: f64, c: f64, r: f64, z: f64) -> Result<f64> {
    if z >= 1.0 {
        return Ok(1.0);
    }
    if z <= 0.0 {
        return Ok(0.0);
    }
    let lz = -beta * (-z).ln_1p() + c * z;
    let f = |xi: f64| {
        if xi <= 0.0 {
            return if alpha == 0.0 { r * lz.exp() } else { 0.0 };
        }
        let l = alpha * (xi / z).ln() + (beta - 1.0) * (-xi).ln_1p() - c * xi + lz;
        (r - xi) * l.exp()
    };
    let q = Quadrature::new(1e-15, 1e-13);
    let v = q.integrate_singular(f, 0.0, z, 0.0, 0.0)?.value;
    Ok(beta / (1.0 - r) * v)
}

/// Max violation of the Kingman pmf recursion.
pub fn kingman_residual(m0: f64, params: &ModelParams, probs: &[f64]) -> f64 {
    let k = probs.len();
    let p = |i: usize| if i >= 1 && i <= k { probs[i - 1] } else { 0.0 };
    let mut suffix = vec![0.0; k + 2];
    for i in (1..=k).rev() {
        suffix[i] = suffix[i + 1] + p(i);
    }
    let mut r: f64 = 0.0;
    for n in 1..k {
        let lhs = (m0 * (n + 1) as f64 / 2.0 + params.theta1) * p(n + 1);
        let rhs = params.sigma * p(n) - params.theta0 * suffix[n + 1];
        r = r.max((lhs - rhs).abs());
    }
    r
}

pub fn wf_mean(m0: f64, params: &ModelParams, p1: f64) -> f64 {
    (2.0 * (params.sigma + params.theta0 - params.theta1) + (m0 + 2.0 * params.theta1) * p1)
        / (m0 + 2.0 * params.theta0)
}

/// `E[(L)_n↓]` for `n = 0..=n_max` from the moment recursion.
pub fn wf_factorial_moments(
    m0: f64,
    params: &ModelParams,
    p1: f64,
    n_max: usize,
) -> Result<Vec<f64>> {
    check(m0, params)?;
    let mut e = vec![1.0];
    if n_max >= 1 {
        e.push(wf_mean(m0, params, p1));
    }
    for n in 1..n_max {
        let nn = n as f64;
        let shifted = shifted_from_factorial(&e, n);
        let v = (2.0 * (nn + 1.0) * params.sigma * e[n]
            - 2.0 * (nn + 1.0) * params.theta1 * shifted)
            / ((nn + 1.0) * m0 + 2.0 * params.theta0);
        e.push(v);
    }
    Ok(e)
}

/// Relative residual of the moment recursion on given moments.
pub fn wf_moment_residual(m0: f64, params: &ModelParams, e: &[f64]) -> f64 {
    let shifted: Vec<f64> = (0..e.len()).map(|n| shifted_from_factorial(e, n)).collect();
    moment_residual(m0, params, e, &shifted)
}

/// As [`wf_moment_residual`] for `n ≤ n_max`, with both moment families
/// summed directly from `pmf`.
pub fn wf_moment_residual_pmf(
    m0: f64,
    params: &ModelParams,
    pmf: &StationaryPmf,
    n_max: usize,
) -> f64 {
    let e: Vec<f64> = (0..=n_max).map(|n| pmf.factorial_moment(n)).collect();
    let shifted: Vec<f64> = (0..=n_max)
        .map(|n| pmf.shifted_factorial_moment(n))
        .collect();
    moment_residual(m0, params, &e, &shifted)
}

fn moment_residual(m0: f64, params: &ModelParams, e: &[f64], shifted: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for n in 1..e.len().saturating_sub(1) {
        let nn = n as f64;
        let lhs = ((nn + 1.0) * m0 + 2.0 * params.theta0) * e[n + 1];
        let a = 2.0 * (nn + 1.0) * params.sigma * e[n];
        let b = 2.0 * (nn + 1.0) * params.theta1 * shifted[n];
        let scale = lhs.abs().max(a.abs()).max(b.abs()).max(1.0);
        worst = worst.max((lhs - a + b).abs() / scale);
    }
    worst
}

/// Closed forms of the factorial moments for `θ0 = 0` or `θ1 = 0`.
pub fn wf_factorial_moments_closed(
    m0: f64,
    params: &ModelParams,
    pmf: &StationaryPmf,
    n_max: usize,
) -> Result<Option<Vec<f64>>> {
    let c = 2.0 * params.sigma / m0;
    let t = 2.0 * params.theta() / m0;
    let mut out = vec![1.0];
    if params.theta0 == 0.0 {
        let mut fact = 1.0;
        for k in 1..=n_max {
            fact *= k as f64;
            let kk = k as f64;
            let h1 = kummer_1f1(kk + 1.0, kk + 2.0 + t, c)?.value;
            let h0 = kummer_1f1(kk, kk + 1.0 + t, c)?.value;
            out.push(fact * (h1 * pmf.p(k + 1) + h0 * pmf.p(k)));
        }
        return Ok(Some(out));
    }
    if params.theta1 == 0.0 {
        let mut v = wf_mean(m0, params, pmf.p(1));
        for n in 1..=n_max {
            if n > 1 {
                v *= n as f64 * c / (2.0 + t + (n - 2) as f64);
            }
            out.push(v);
        }
        return Ok(Some(out));
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conditioned_poisson() {
        let params = ModelParams::new(1.0, 0.0, 0.0).unwrap();
        let c = wf_closed(2.0, &params).unwrap();
        let e1 = (-1f64).exp();
        let mut fact = 1.0;
        for n in 1..12 {
            fact *= n as f64;
            let want = e1 / (fact * (1.0 - e1));
            assert!((c.pmf.p(n) - want).abs() < 1e-15, "{n}");
        }
        let mean = wf_mean(2.0, &params, c.pmf.p(1));
        assert!((mean - 1.0 / (1.0 - e1)).abs() < 1e-12);
    }

    #[test]
    fn theta0_positive_against_recursion() {
        let params = ModelParams::new(1.0, 1.0, 1.0).unwrap();
        let c = wf_closed(2.0, &params).unwrap();
        assert!(c.pmf.residual < 1e-14, "{}", c.pmf.residual);
        let total: f64 = c.pmf.probs.iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
        let t = crate::recursions::solve_lambda_truncated(
            &crate::measures::LambdaMeasure::kingman(2.0),
            &params,
            16,
            1e-14,
        )
        .unwrap();
        assert!(c.pmf.sup_distance(&t) < 1e-10);
    }

    #[test]
    fn pgf_integral_matches_pmf() {
        let params = ModelParams::new(0.7, 0.4, 0.9).unwrap();
        let c = wf_closed(1.5, &params).unwrap();
        for z in [0.1, 0.5, 0.9] {
            assert!((c.pgf.evaluate(z) - c.pmf.pgf(z)).abs() < 1e-11, "{z}");
        }
    }

    #[test]
    fn moments() {
        for params in [
            ModelParams::new(1.3, 0.0, 0.7).unwrap(),
            ModelParams::new(1.3, 0.7, 0.0).unwrap(),
        ] {
            let c = wf_closed(2.0, &params).unwrap();
            let rec = wf_factorial_moments(2.0, &params, c.pmf.p(1), 8).unwrap();
            let closed = wf_factorial_moments_closed(2.0, &params, &c.pmf, 8)
                .unwrap()
                .unwrap();
            for n in 0..=8 {
                let d = c.pmf.factorial_moment(n);
                assert!((rec[n] - d).abs() < 1e-8 * d.max(1.0));
                assert!((closed[n] - d).abs() < 1e-8 * d.max(1.0));
            }
        }
    }
}
