//! Residuals of the pgf differential and integral equations.

use crate::error::{Error, Result};
use crate::measures::{Interior, LambdaMeasure, ModelParams, MoranParams};
use crate::specfun::Quadrature;

use super::PgfEvaluator;

/// Which identity to check.
#[derive(Debug, Clone)]
pub enum MasterEquation {
    /// `z(1−z)(1+sz)g′ = −N(sz² − (s+u)z + u1)g + (1+Nu1)p₁z(1−z) − Nu0z²`.
    MoranOde(MoranParams),
    /// `(m0/2)z(1−z)g′ + Qg = (m0/2+θ1)p₁z(1−z) − θ0z²`.
    WfOde,
    /// `m1z(1−z)∫₀^z (u−g)/(u(1−u))du + Qg = θ1p₁z(1−z) − θ0z²`.
    StarDess,
    /// Master equation I; the `c_k(z)` sum runs over the given pmf.
    MasterI {
        probs: Vec<f64>,
    },
    /// Master equation II, with the interior part of Λ integrated directly.
    MasterII,
    /// Carleman singular integral equation for the uniform measure.
    Carleman,
    Beta31Ode,
}

fn q(params: &ModelParams, z: f64) -> f64 {
    params.sigma * z * z - (params.sigma + params.theta()) * z + params.theta1
}

fn quad() -> Quadrature<f64> {
    Quadrature::new(1e-15, 1e-13)
}

/// `∫_a^b (u − g(u))/(u(1−u)) du`.
fn integral_a(pgf: &PgfEvaluator, a: f64, b: f64) -> Result<f64> {
    let f = |u: f64| (u - pgf.evaluate(u)) / (u * (1.0 - u));
    Ok(quad().integrate(f, a, b)?.value)
}

/// `∫_a^b (1 − g(u))/(1−u) du`.
fn integral_b(pgf: &PgfEvaluator, a: f64, b: f64) -> Result<f64> {
    let f = |u: f64| (1.0 - pgf.evaluate(u)) / (1.0 - u);
    Ok(quad().integrate(f, a, b)?.value)
}

/// Max absolute residual of `equation` over `z_grid` (points in `(0,1)`).
pub fn verify_master_equation(
    pgf: &PgfEvaluator,
    measure: &LambdaMeasure,
    params: &ModelParams,
    equation: &MasterEquation,
    z_grid: &[f64],
) -> Result<f64> {
    if let Some(z) = z_grid.iter().find(|z| !(**z > 0.0 && **z < 1.0)) {
        return Err(Error::Domain(format!("grid point {z} outside (0,1)")));
    }
    let columns = match equation {
        MasterEquation::MasterI { probs } => (2..=probs.len())
            .map(|k| measure.cnk_column(k))
            .collect::<Result<Vec<_>>>()?,
        _ => Vec::new(),
    };
    let mut worst: f64 = 0.0;
    for &z in z_grid {
        let g = pgf.evaluate(z);
        let p1 = pgf.p1;
        let r = match equation {
            MasterEquation::MoranOde(mp) => {
                let n = mp.n as f64;
                let lhs = z * (1.0 - z) * (1.0 + mp.s * z) * pgf.derivative(z);
                let rhs = -n * (mp.s * z * z - (mp.s + mp.u()) * z + mp.u1) * g
                    + (1.0 + n * mp.u1) * p1 * z * (1.0 - z)
                    - n * mp.u0 * z * z;
                lhs - rhs
            }
            MasterEquation::WfOde => {
                let m0 = measure.m0;
                let lhs = 0.5 * m0 * z * (1.0 - z) * pgf.derivative(z) + q(params, z) * g;
                lhs - (0.5 * m0 + params.theta1) * p1 * z * (1.0 - z) + params.theta0 * z * z
            }
            MasterEquation::StarDess => {
                let lhs = measure.m1 * z * (1.0 - z) * integral_a(pgf, 0.0, z)? + q(params, z) * g;
                lhs - params.theta1 * p1 * z * (1.0 - z) + params.theta0 * z * z
            }
            MasterEquation::MasterI { probs } => {
                let sum: f64 = columns
                    .iter()
                    .enumerate()
                    .map(|(i, col)| {
                        let ck = col.iter().skip(1).rev().fold(0.0, |acc, c| (acc + c) * z);
                        probs[i + 1] * ck
                    })
                    .sum();
                master_lhs(pgf, measure, params, z, g)? - master_rhs(measure, params, z, p1) + sum
            }
            MasterEquation::MasterII => {
                let integral = master_two_integral(pgf, measure, z)?;
                master_lhs(pgf, measure, params, z, g)? - master_rhs(measure, params, z, p1)
                    + integral
            }
            MasterEquation::Carleman => {
                let c = match measure.interior {
                    Interior::Uniform { c } => c,
                    _ => {
                        return Err(Error::PreconditionViolated(
                            "the Carleman equation needs a uniform measure".into(),
                        ))
                    }
                };
                let rho = |t: f64| pgf.evaluate(t) / t;
                let alpha = params.sigma + (-z).ln_1p() - z.ln() - params.theta1 / z
                    + params.theta0 / (1.0 - z);
                let f = params.theta0 / (1.0 - z) - params.theta1 * p1 / z;
                // the c_{n,k} = c/(k−n) identity scales the principal value by c;
                // the logarithms in α come from the same term
                let pv = carleman_pv(rho, z)?;
                let log_part = (-z).ln_1p() - z.ln();
                (alpha - (1.0 - c) * log_part) * rho(z) - c * pv - f
            }
            MasterEquation::Beta31Ode => {
                let p2 = pgf
                    .p2
                    .ok_or_else(|| Error::PreconditionViolated("Beta31Ode needs p2".into()))?;
                let (s, th, t1) = (params.sigma, params.theta(), params.theta1);
                let lhs = q(params, z) * pgf.derivative(z) + (2.0 * s * z - s - th - 3.0) * g;
                lhs - (t1 * p1 - ((3.0 + 2.0 * (s + th)) * p1 - 2.0 * t1 * p2) * z)
            }
        };
        worst = worst.max(r.abs());
    }
    Ok(worst)
}

fn master_lhs(
    pgf: &PgfEvaluator,
    measure: &LambdaMeasure,
    params: &ModelParams,
    z: f64,
    g: f64,
) -> Result<f64> {
    let mut lhs = q(params, z) / (z * (1.0 - z)) * g;
    if measure.m0 != 0.0 {
        lhs += 0.5 * measure.m0 * pgf.derivative(z);
    }
    if measure.m1 != 0.0 {
        lhs += measure.m1 * integral_a(pgf, 0.0, z)?;
    }
    Ok(lhs)
}

fn master_rhs(measure: &LambdaMeasure, params: &ModelParams, z: f64, p1: f64) -> f64 {
    (0.5 * measure.m0 + params.theta1) * p1 - params.theta0 * z / (1.0 - z)
}

/// `∫ Λ0(dξ)/ξ² · [bracket]`; below `ξ = 1e−3` the integrand is replaced
/// by its linear interpolant towards the limit `(g′(z) − p₁)/2`.
fn master_two_integral(pgf: &PgfEvaluator, measure: &LambdaMeasure, z: f64) -> Result<f64> {
    const CUT: f64 = 1e-3;
    let bracket = |xi: f64| -> Result<f64> {
        let lo = z * (1.0 - xi);
        let v = integral_a(pgf, lo, z)? - integral_b(pgf, lo, xi + lo)? + integral_b(pgf, 0.0, xi)?;
        Ok(v / (xi * xi))
    };
    let head = 0.5 * (pgf.derivative(z) - pgf.p1);
    let at_cut = bracket(CUT)?;
    let failure = std::cell::Cell::new(None);
    let v = measure.integrate_interior(
        |xi, _| {
            if xi < CUT {
                return head + (at_cut - head) * xi / CUT;
            }
            match bracket(xi) {
                Ok(v) => v,
                Err(e) => {
                    failure.set(Some(e));
                    0.0
                }
            }
        },
        0.0,
        0.0,
    )?;
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// Principal value `⨍₀¹ h(t)/(t−x) dt` by symmetric excision at
/// `ε = 1e−2, 1e−3, 1e−4` and two Richardson steps for the `ε` and `ε³` terms.
pub fn carleman_pv<H: Fn(f64) -> f64>(h: H, x: f64) -> Result<f64> {
    let q = Quadrature::new(1e-15, 1e-14);
    let excised = |eps: f64| -> Result<f64> {
        let f = |t: f64| h(t) / (t - x);
        let left = q.integrate(&f, 0.0, x - eps)?.value;
        let right = q.integrate(&f, x + eps, 1.0)?.value;
        Ok(left + right)
    };
    let eps = [1e-2, 1e-3, 1e-4];
    if x - eps[0] <= 0.0 || x + eps[0] >= 1.0 {
        return Err(Error::Domain(format!(
            "principal value point {x} too close to an endpoint"
        )));
    }
    let e: Vec<f64> = eps.iter().map(|&e| excised(e)).collect::<Result<_>>()?;
    let r1 = (10.0 * e[1] - e[0]) / 9.0;
    let r2 = (10.0 * e[2] - e[1]) / 9.0;
    Ok((1000.0 * r2 - r1) / 999.0)
}

/// Closed form of the principal value for `ρ(x) = (1−ρ)/(1−ρx)`.
pub fn carleman_pv_geometric(rho: f64, x: f64) -> f64 {
    let r = (1.0 - rho) / (1.0 - rho * x);
    r * ((-x).ln_1p() - x.ln() - (-rho).ln_1p())
}
