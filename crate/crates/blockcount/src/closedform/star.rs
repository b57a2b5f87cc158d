//! Star-shaped coalescent, `Λ = m1·δ1`.

use crate::error::{Error, Result};
use crate::measures::ModelParams;
use crate::recursions::{solve_star_with, StarMethod};
use crate::specfun::{gauss_2f1, rising_factorial, Quadrature};

use super::{ClosedForm, ModelTag, PgfEvaluator};

/// Roots `x₋ < x₊` of `σz² − (σ+θ)z + θ1` and `d = σ(x₊ − x₋)`.
#[derive(Debug, Clone, Copy)]
pub struct StarRoots {
    pub d: f64,
    pub x_minus: f64,
    pub x_plus: f64,
}

pub fn star_roots(params: &ModelParams) -> Result<StarRoots> {
    let (s, t, t1) = (params.sigma, params.theta(), params.theta1);
    let disc = (s + t) * (s + t) - 4.0 * s * t1;
    if !(disc > 0.0) {
        return Err(Error::RootOrderViolation(format!(
            "discriminant {disc} is not positive"
        )));
    }
    let d = disc.sqrt();
    let x_plus = (s + t + d) / (2.0 * s);
    // product of the roots is θ1/σ
    let x_minus = t1 / (s * x_plus);
    if !(x_minus > 0.0 && x_minus < 1.0) || !(x_plus > 1.0) {
        return Err(Error::RootOrderViolation(format!(
            "need 0 < x- < 1 < x+, got x- = {x_minus}, x+ = {x_plus}"
        )));
    }
    Ok(StarRoots { d, x_minus, x_plus })
}

/// `∫₀¹ (1−t)^γ (1−wt)^{−γ} dt` for `w < 1`.
fn kernel_integral(gamma: f64, w: f64) -> Result<f64> {
    let q = Quadrature::new(1e-16, 1e-14);
    let f = |t: f64, ct: f64| (gamma * (ct.ln() - (-w * t).ln_1p())).exp();
    Ok(q.integrate_singular_gaps(f, 0.0, 1.0, 0.0, gamma)?.value)
}

/// `p₁` for `θ1 > 0`.
pub fn star_p1(m1: f64, params: &ModelParams) -> Result<f64> {
    if !(m1 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "m1 = {m1} must be positive"
        )));
    }
    if params.theta1 == 0.0 {
        return Ok(1.0 - params.sigma / (params.sigma + params.theta0 + m1));
    }
    let r = star_roots(params)?;
    let gamma = m1 / r.d;
    let integral = r.x_minus * kernel_integral(gamma, r.x_minus / r.x_plus)?;
    Ok(1.0 - params.sigma / params.theta1 * integral)
}

/// `f(z)` with `g(z) = z(1 − (1−z)f(z))`.
fn star_f(r: &StarRoots, gamma: f64, z: f64) -> f64 {
    let delta = r.x_plus - r.x_minus;
    if z < r.x_minus {
        let w = (r.x_minus - z) / (r.x_plus - z);
        if w < 0.9 {
            if let Ok(v) = gauss_2f1(gamma, 1.0, gamma + 2.0, w) {
                return v.value / ((gamma + 1.0) * (r.x_plus - z));
            }
        }
    } else {
        let w = (z - r.x_minus) / delta;
        if w < 0.9 {
            if let Ok(v) = gauss_2f1(2.0, 1.0, gamma + 2.0, w) {
                return v.value / ((gamma + 1.0) * delta);
            }
        }
    }
    let w = (r.x_minus - z) / (r.x_plus - z);
    kernel_integral(gamma, w)
        .map(|v| v / (r.x_plus - z))
        .unwrap_or(f64::NAN)
}

/// Stationary law and pgf for the star-shaped model.
pub fn star_closed(m1: f64, params: &ModelParams) -> Result<ClosedForm> {
    if !(params.sigma > 0.0) || !(m1 > 0.0) {
        return Err(Error::PreconditionViolated(
            "star_closed needs sigma > 0 and m1 > 0".into(),
        ));
    }
    let record = serde_json::json!({ "m1": m1, "sigma": params.sigma, "theta0": params.theta0, "theta1": params.theta1 });
    if params.theta1 == 0.0 {
        let st = params.sigma + params.theta0;
        let (x, c) = (params.sigma / st, 1.0 + m1 / st);
        let mut k = 64;
        let pmf = loop {
            let pmf = solve_star_with(params, m1, k, None, StarMethod::Auto)?;
            if pmf.residual < 1e-18 || k >= 1 << 20 {
                break pmf;
            }
            k *= 2;
        };
        let p1 = pmf.p(1);
        let eval = move |z: f64| {
            if z >= 1.0 {
                return 1.0;
            }
            let h = gauss_2f1(1.0, 1.0, c, x * z)
                .map(|r| r.value)
                .unwrap_or(f64::NAN);
            1.0 - (1.0 - z) * h
        };
        let pgf = PgfEvaluator::new(ModelTag::Star, record, p1, eval).with_p2(pmf.p(2));
        return Ok(ClosedForm { pmf, pgf });
    }
    let roots = star_roots(params)?;
    let p1 = star_p1(m1, params)?;
    let pmf = solve_star_with(params, m1, 64, Some(p1), StarMethod::Auto)?;
    let gamma = m1 / roots.d;
    let eval = move |z: f64| {
        if z >= 1.0 {
            return 1.0;
        }
        z * (1.0 - (1.0 - z) * star_f(&roots, gamma, z))
    };
    let pgf = PgfEvaluator::new(ModelTag::Star, record, p1, eval).with_p2(pmf.p(2));
    Ok(ClosedForm { pmf, pgf })
}

/// Pmf `p_1..p_n` from the Taylor coefficients of `f`, available when
/// `2x₋ < x₊`.
pub fn star_remark_series(m1: f64, params: &ModelParams, n: usize) -> Result<Vec<f64>> {
    let r = star_roots(params)?;
    if !(2.0 * r.x_minus < r.x_plus) {
        return Err(Error::PreconditionViolated(format!(
            "series needs 2x- < x+, got x- = {}, x+ = {}",
            r.x_minus, r.x_plus
        )));
    }
    let gamma = m1 / r.d;
    let w = r.x_minus / r.x_plus;
    // f_k = (2)_k/((γ+1)(γ+2)_k) · x₊^{−k−1} · ₂F₁(γ, k+1; γ+k+2; x₋/x₊)
    let f: Vec<f64> = (0..n)
        .map(|k| {
            let kk = k as f64;
            let h = gauss_2f1(gamma, kk + 1.0, gamma + kk + 2.0, w)?.value;
            let lead = rising_factorial(2.0, k as u64) / rising_factorial(gamma + 2.0, k as u64);
            Ok(lead / (gamma + 1.0) * r.x_plus.powi(-(k as i32) - 1) * h)
        })
        .collect::<Result<_>>()?;
    let mut p = Vec::with_capacity(n);
    p.push(1.0 - f[0]);
    for k in 1..n {
        p.push(f[k - 1] - f[k]);
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::LambdaMeasure;
    use crate::recursions::solve_lambda_truncated;

    #[test]
    fn vieta() {
        let params = ModelParams::new(1.3, 0.4, 0.7).unwrap();
        let r = star_roots(&params).unwrap();
        assert!((r.x_minus * r.x_plus - 0.7 / 1.3).abs() < 1e-15);
        assert!((r.x_minus + r.x_plus - 2.4 / 1.3).abs() < 1e-15);
    }

    #[test]
    fn no_theta1_half() {
        let params = ModelParams::new(1.0, 0.0, 0.0).unwrap();
        let c = star_closed(1.0, &params).unwrap();
        assert!((c.pmf.p(1) - 0.5).abs() < 1e-15);
        for z in [0.2, 0.6, 0.95] {
            assert!((c.pgf.evaluate(z) - c.pmf.pgf(z)).abs() < 1e-13);
        }
    }

    #[test]
    fn against_truncated() {
        let params = ModelParams::new(1.0, 0.5, 0.5).unwrap();
        let c = star_closed(1.0, &params).unwrap();
        let t = solve_lambda_truncated(&LambdaMeasure::star(1.0), &params, 16, 1e-14).unwrap();
        assert!(c.pmf.sup_distance(&t) < 1e-7);
        for z in [0.1, 0.3, 0.5, 0.7, 0.9, 0.999] {
            assert!((c.pgf.evaluate(z) - t.pgf(z)).abs() < 1e-7, "{z}");
        }
    }

    #[test]
    fn remark_series() {
        let params = ModelParams::new(2.0, 1.0, 0.3).unwrap();
        let r = star_roots(&params).unwrap();
        assert!(2.0 * r.x_minus < r.x_plus);
        let s = star_remark_series(0.8, &params, 30).unwrap();
        let c = star_closed(0.8, &params).unwrap();
        for (n, p) in s.iter().enumerate() {
            assert!((p - c.pmf.p(n + 1)).abs() < 1e-10, "{n}");
        }
    }
}
