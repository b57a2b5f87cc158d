//! Moran model: exact stationary law, mean and factorial moments.

use crate::error::{Error, Result};
use crate::measures::MoranParams;
use crate::recursions::{SolverTag, StationaryPmf};
use crate::scalar::{BigFixed, Exact};
use crate::specfun::{gauss_2f1, Quadrature};

use super::terminating::QFamily;
use super::{shifted_from_factorial, ClosedForm, ModelTag, PgfEvaluator};

/// Remaining mass below which the progressive evaluation stops.
const MASS_TOL: f64 = 1e-18;

/// `I_1/I_0` as a terminating hypergeometric ratio.
fn moran_ratio<T: Exact>(params: &MoranParams) -> T {
    let n = params.n as i64;
    let nn = T::from_i64(n);
    let s = T::from_f64(params.s);
    let one = T::one();
    let nu1 = nn.clone() * T::from_f64(params.u1);
    let nrho0 = nn.clone() * T::from_f64(params.u0) / (one.clone() + s.clone());
    let x = s.clone() / (one.clone() + s.clone());
    let f = |i: i64| {
        // 2F1(i−N, 1+α_i; 1+Nu1+i+Nρ0; x), α_i = Nu1 + i
        let a = T::from_i64(i - n);
        let b = one.clone() + nu1.clone() + T::from_i64(i);
        let c = one.clone() + nu1.clone() + T::from_i64(i) + nrho0.clone();
        let mut term = T::one();
        let mut sum = T::one();
        for k in 0..(n - i) {
            let kk = T::from_i64(k);
            term = term * (a.clone() + kk.clone()) * (b.clone() + kk.clone()) * x.clone()
                / ((c.clone() + kk) * T::from_i64(k + 1));
            sum = sum + term.clone();
        }
        sum
    };
    let f0 = f(0);
    let f1 = f(1);
    (one.clone() + nu1.clone()) / ((one.clone() + s) * (one + nu1 + nrho0)) * f1 / f0
}

/// Exact Moran pmf weights over an [`Exact`] scalar. With `u0 > 0` the
/// weights sum to one; evaluation stops early once the remaining mass is
/// below `mass_tol`. With `u0 = 0` the weights are unnormalized.
pub fn moran_closed_weights<T: Exact>(params: &MoranParams, mass_tol: Option<f64>) -> Vec<T> {
    let n_pop = params.n;
    let nn = T::from_i64(n_pop as i64);
    let s = T::from_f64(params.s);
    let one = T::one();
    if params.u0 == 0.0 {
        let nu = nn * T::from_f64(params.u());
        let mut w = vec![T::one()];
        for n in 2..=n_pop {
            let prev = w[n - 2].clone();
            // ratio (N−n+1)·s/(Nu+n)
            let r = T::from_i64((n_pop - n + 1) as i64) * s.clone()
                / (nu.clone() + T::from_i64(n as i64));
            w.push(prev * r);
        }
        return w;
    }
    let nu1 = nn.clone() * T::from_f64(params.u1);
    let nu0 = nn.clone() * T::from_f64(params.u0);
    let nrho0 = nu0.clone() / (one.clone() + s.clone());
    let r: T = moran_ratio(params);
    let pref = nu0 / (one.clone() - r.clone());
    let s2 = s.clone();
    let nu1d = nu1.clone();
    let family = |i: i64| {
        let s_d = s2.clone();
        let s_e = s2.clone();
        let nu1_d = nu1d.clone();
        let nu1_e = nu1d.clone();
        let nrho = nrho0.clone();
        let big_n = n_pop as i64;
        QFamily::new(
            i as usize,
            move |m: usize| {
                let m = m as i64;
                // ((m−1) − N + i − 1)·(−s)/(Nu1 + i + 1 + m − 1)
                T::from_i64(m - big_n + i - 2) * (-s_d.clone())
                    / (nu1_d.clone() + T::from_i64(i + m))
            },
            move |m: usize, k: usize| {
                let (m, k) = (m as i64, k as i64);
                T::from_i64(m + k) * (T::from_i64(k) - nrho.clone()) * (T::one() + s_e.clone())
                    / ((nu1_e.clone() + T::from_i64(m + i + k)) * T::from_i64(k))
            },
        )
    };
    let mut q1 = family(1);
    let mut q2 = family(2);
    let c1 = r.clone() / (one.clone() + nu1.clone());
    let c2 = one.clone() / (T::from_i64(2) + nu1);
    let tol = mass_tol.map(T::from_f64);
    let mut out = Vec::new();
    let mut remaining = T::one();
    for n in 1..=n_pop {
        let p = pref.clone() * (c1.clone() * q1.q(n) - c2.clone() * q2.q(n));
        remaining = remaining - p.clone();
        out.push(p);
        if let Some(t) = &tol {
            if remaining.abs_val() < *t && n >= 2 {
                break;
            }
        }
    }
    out
}

/// Moran stationary law from the closed form. The terminating sums are
/// evaluated in [`BigFixed`] since they cancel heavily in doubles.
pub fn moran_closed(params: &MoranParams) -> Result<ClosedForm> {
    let probs: Vec<f64> = if params.u0 == 0.0 {
        let w: Vec<f64> = moran_closed_weights::<f64>(params, None);
        let nu = params.n as f64 * params.u();
        let norm = gauss_2f1(1.0, 1.0 - params.n as f64, nu + 2.0, -params.s)?.value;
        let total: f64 = w.iter().sum();
        if ((total - norm) / norm).abs() > 1e-10 {
            return Err(Error::NoConvergence(format!(
                "normalizer mismatch: sum {total:e} vs 2F1 {norm:e}"
            )));
        }
        w.iter().map(|x| x / total).collect()
    } else {
        let w: Vec<BigFixed> = moran_closed_weights(params, Some(MASS_TOL));
        w.iter().map(|x| x.to_f64()).collect()
    };
    let solver = SolverTag::MoranClosed;
    let mut pmf = StationaryPmf::from_weights(probs, solver)?;
    pmf.residual = crate::recursions::moran_pmf_residual(params, &pmf);
    pmf.truncation_k = params.n;
    let pgf = PgfEvaluator::from_pmf(
        ModelTag::Moran,
        serde_json::to_value(params)?,
        pmf.probs.clone(),
    );
    Ok(ClosedForm { pmf, pgf })
}

/// `p_1` of the Moran law.
pub fn moran_p1(params: &MoranParams) -> Result<f64> {
    Ok(moran_closed(params)?.pmf.p(1))
}

/// The pgf as the integral representation, `0 < z < 1`, in log space.
/// The integrand changes sign at `ξ = r`, so this loses accuracy when the
/// exponents are large; the polynomial form is exact.
pub fn moran_pgf_integral(params: &MoranParams, z: f64) -> Result<f64> {
    if params.u0 == 0.0 {
        let nu = params.n as f64 * params.u();
        let a = 1.0 - params.n as f64;
        let num = gauss_2f1(1.0, a, nu + 2.0, -params.s * z)?.value;
        let den = gauss_2f1(1.0, a, nu + 2.0, -params.s)?.value;
        return Ok(z * num / den);
    }
    if !(z > 0.0 && z < 1.0) {
        return Err(Error::Domain(format!("z = {z} outside (0,1)")));
    }
    let nf = params.n as f64;
    let s = params.s;
    let r = moran_ratio::<BigFixed>(params).to_f64();
    let rho0 = params.u0 / (1.0 + s);
    let a0 = nf * params.u1;
    let beta = nf * rho0 - 1.0;
    let e = (1.0 + params.u1 + rho0) * nf + 1.0;
    let ln_pref = (e - 1.0) * (s * z).ln_1p() - nf * rho0 * (-z).ln_1p();
    let f = |xi: f64| {
        if xi <= 0.0 {
            return if a0 == 0.0 { r * (ln_pref).exp() } else { 0.0 };
        }
        let l = a0 * (xi / z).ln() + beta * (-xi).ln_1p() - e * (s * xi).ln_1p() + ln_pref;
        (r - xi) * l.exp()
    };
    let q = Quadrature::new(1e-15, 1e-13);
    let v = q.integrate_singular(f, 0.0, z, 0.0, 0.0)?.value;
    Ok(nf * params.u0 / (1.0 - r) * v)
}

/// Mean from `p_1`.
pub fn moran_mean(params: &MoranParams, p1: f64) -> f64 {
    let nf = params.n as f64;
    (nf * (params.s + params.u0 - params.u1) + (1.0 + nf * params.u1) * p1)
        / (1.0 + params.s + nf * params.u0)
}

/// `E[(L)_n↓]` for `n = 0..=n_max` from the three-term moment recursion.
pub fn moran_factorial_moments(params: &MoranParams, p1: f64, n_max: usize) -> Result<Vec<f64>> {
    if n_max > params.n {
        return Err(Error::PreconditionViolated(format!(
            "n_max = {n_max} exceeds N = {}",
            params.n
        )));
    }
    let nf = params.n as f64;
    let (s, u0, u1) = (params.s, params.u0, params.u1);
    let mut e = vec![1.0];
    if n_max >= 1 {
        e.push(moran_mean(params, p1));
    }
    for n in 1..n_max {
        let nn = n as f64;
        let shifted = shifted_from_factorial(&e, n);
        let v = ((nn + 1.0) * (nf - nn) * s * e[n] - nf * (nn + 1.0) * u1 * shifted)
            / ((nn + 1.0) * (1.0 + s) + nf * u0);
        e.push(v);
    }
    Ok(e)
}

/// Residual of the moment recursion on given moments, relative to the
/// size of its terms.
pub fn moran_moment_residual(params: &MoranParams, e: &[f64]) -> f64 {
    let shifted: Vec<f64> = (0..e.len()).map(|n| shifted_from_factorial(e, n)).collect();
    moment_residual(params, e, &shifted)
}

/// As [`moran_moment_residual`] for `n ≤ n_max`, with both moment families
/// summed directly from `pmf`.
pub fn moran_moment_residual_pmf(params: &MoranParams, pmf: &StationaryPmf, n_max: usize) -> f64 {
    let e: Vec<f64> = (0..=n_max).map(|n| pmf.factorial_moment(n)).collect();
    let shifted: Vec<f64> = (0..=n_max)
        .map(|n| pmf.shifted_factorial_moment(n))
        .collect();
    moment_residual(params, &e, &shifted)
}

fn moment_residual(params: &MoranParams, e: &[f64], shifted: &[f64]) -> f64 {
    let nf = params.n as f64;
    let (s, u0, u1) = (params.s, params.u0, params.u1);
    let mut worst: f64 = 0.0;
    for n in 1..e.len().saturating_sub(1) {
        let nn = n as f64;
        let lhs = ((nn + 1.0) * (1.0 + s) + nf * u0) * e[n + 1];
        let a = (nn + 1.0) * (nf - nn) * s * e[n];
        let b = nf * (nn + 1.0) * u1 * shifted[n];
        let scale = lhs.abs().max(a.abs()).max(b.abs()).max(1.0);
        worst = worst.max((lhs - a + b).abs() / scale);
    }
    worst
}

/// Closed forms of the factorial moments in the cases `u0 = 0` and
/// `u1 = 0`; `None` otherwise.
pub fn moran_factorial_moments_closed(
    params: &MoranParams,
    pmf: &StationaryPmf,
    n_max: usize,
) -> Result<Option<Vec<f64>>> {
    let nf = params.n as f64;
    let s = params.s;
    let nu = nf * params.u();
    let mut out = vec![1.0];
    if params.u0 == 0.0 {
        let mut fact = 1.0;
        for n in 1..=n_max {
            fact *= n as f64;
            let nn = n as f64;
            let h1 = gauss_2f1(nn + 1.0, nn + 1.0 - nf, nu + nn + 2.0, -s)?.value;
            let h0 = gauss_2f1(nn, nn - nf, nu + nn + 1.0, -s)?.value;
            out.push(fact * (h1 * pmf.p(n + 1) + h0 * pmf.p(n)));
        }
        return Ok(Some(out));
    }
    if params.u1 == 0.0 {
        let mean = moran_mean(params, pmf.p(1));
        let x = s / (1.0 + s);
        let b = 2.0 + nu / (1.0 + s);
        let mut c = mean; // n!(N−1)_{n−1}↓ x^{n−1}/(b)_{n−1}↑ · E[L]
        for n in 1..=n_max {
            if n > 1 {
                let k = (n - 1) as f64;
                c *= n as f64 * (nf - k) * x / (b + k - 1.0);
            }
            out.push(c);
        }
        return Ok(Some(out));
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;
    use num_traits::One;

    #[test]
    fn binomial_case() {
        let p = MoranParams::new(2, 1.0, 0.0, 0.0).unwrap();
        let c = moran_closed(&p).unwrap();
        assert!((c.pmf.p(1) - 2.0 / 3.0).abs() < 1e-15);
        assert!((c.pmf.p(2) - 1.0 / 3.0).abs() < 1e-15);
        assert!((moran_mean(&p, c.pmf.p(1)) - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn exact_rational_sum_is_one() {
        let p = MoranParams::new(6, 0.75, 0.25, 0.5).unwrap();
        let w: Vec<BigRational> = moran_closed_weights(&p, None);
        let total = w
            .iter()
            .cloned()
            .fold(BigRational::from_integer(0.into()), |a, b| a + b);
        assert!(total.is_one());
        assert!(w.iter().all(|x| *x > BigRational::from_integer(0.into())));
    }

    #[test]
    fn matches_shooting() {
        let p = MoranParams::new(15, 0.8, 0.3, 0.2).unwrap();
        let c = moran_closed(&p).unwrap();
        let s = crate::recursions::solve_moran(&p).unwrap();
        assert!(c.pmf.sup_distance(&s) < 1e-9);
    }

    #[test]
    fn pgf_integral_matches_polynomial() {
        let p = MoranParams::new(8, 0.6, 0.4, 0.3).unwrap();
        let c = moran_closed(&p).unwrap();
        for z in [0.1, 0.4, 0.7, 0.9] {
            let a = moran_pgf_integral(&p, z).unwrap();
            assert!(
                (a - c.pgf.evaluate(z)).abs() < 1e-10,
                "{z}: {a} vs {}",
                c.pgf.evaluate(z)
            );
        }
    }

    #[test]
    fn moment_closed_forms() {
        for p in [
            MoranParams::new(12, 0.8, 0.0, 0.3).unwrap(),
            MoranParams::new(12, 0.8, 0.3, 0.0).unwrap(),
        ] {
            let c = moran_closed(&p).unwrap();
            let rec = moran_factorial_moments(&p, c.pmf.p(1), 6).unwrap();
            let closed = moran_factorial_moments_closed(&p, &c.pmf, 6)
                .unwrap()
                .unwrap();
            for n in 0..=6 {
                let direct = c.pmf.factorial_moment(n);
                assert!((rec[n] - direct).abs() < 1e-8 * direct.max(1.0), "{n}");
                assert!((closed[n] - direct).abs() < 1e-8 * direct.max(1.0), "{n}");
            }
        }
    }

    #[test]
    fn truncated_mass() {
        let p = MoranParams::new(20, 0.1, 0.5, 0.05).unwrap();
        let c = moran_closed(&p).unwrap();
        assert!(c.pmf.len() < 20);
        let s = crate::recursions::solve_moran(&p).unwrap();
        assert!(c.pmf.sup_distance(&s) < 1e-9);
    }
}
