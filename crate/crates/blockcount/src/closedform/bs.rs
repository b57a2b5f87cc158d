//! Bolthausen–Sznitman coalescent: the geometric parameter `ρ`.

use crate::error::{Error, Result};
use crate::measures::ModelParams;
use crate::specfun::lambert_w;
use crate::specfun::roots::safeguarded_newton;

/// Unique root in `(0,1)` of `σ + log(1−x) − θ1x − θ0x/(1−x)`.
///
/// Solved in `t = −log(1−x)`, where the equation reads
/// `σ − t − θ1(1 − e^{−t}) − θ0(e^t − 1) = 0` with the root in `(0, σ]`.
pub fn bs_rho(params: &ModelParams) -> Result<f64> {
    if !(params.sigma > 0.0) {
        return Err(Error::PreconditionViolated("bs_rho needs sigma > 0".into()));
    }
    let (s, t0, t1) = (params.sigma, params.theta0, params.theta1);
    let f = |t: f64| s - t + t1 * (-t).exp_m1() - t0 * t.exp_m1();
    let df = |t: f64| -1.0 - t1 * (-t).exp() - t0 * t.exp();
    let t = safeguarded_newton(f, df, 0.0, s, 1e-16)?;
    Ok(-(-t).exp_m1())
}

/// Lambert-W forms, available when `θ = 0`, `θ0 = 0` or `θ1 = 0`.
pub fn bs_rho_lambert(params: &ModelParams) -> Option<f64> {
    let (s, t0, t1) = (params.sigma, params.theta0, params.theta1);
    if t0 == 0.0 && t1 == 0.0 {
        return Some(-(-s).exp_m1());
    }
    if t0 == 0.0 {
        return lambert_w(t1 * (t1 - s).exp()).ok().map(|w| 1.0 - w / t1);
    }
    if t1 == 0.0 {
        return lambert_w(t0 * (t0 + s).exp()).ok().map(|w| 1.0 - t0 / w);
    }
    None
}

/// `r(x) = (σ + log(1−x) − θ1x)(x−1) + θ0x`.
pub fn bs_root_function(params: &ModelParams, x: f64) -> f64 {
    (params.sigma + (-x).ln_1p() - params.theta1 * x) * (x - 1.0) + params.theta0 * x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let p = ModelParams::new(2f64.ln(), 0.0, 0.0).unwrap();
        assert!((bs_rho(&p).unwrap() - 0.5).abs() < 1e-15);
        let p = ModelParams::new(1.0, 0.0, 1.0).unwrap();
        assert!((bs_rho(&p).unwrap() - 0.432_856_709_590_216).abs() < 1e-14);
    }

    #[test]
    fn lambert_agreement() {
        for &s in &[0.1, 0.5, 1.0, 1.9] {
            for &t in &[0.0, 0.3, 1.0, 1.7] {
                for p in [
                    ModelParams::new(s, 0.0, t).unwrap(),
                    ModelParams::new(s, t, 0.0).unwrap(),
                ] {
                    let a = bs_rho(&p).unwrap();
                    let b = bs_rho_lambert(&p).unwrap();
                    assert!((a - b).abs() < 1e-12, "{p:?}: {a} vs {b}");
                    assert!(bs_root_function(&p, a).abs() < 1e-12);
                }
            }
        }
    }
}
