//! Geometric stationary laws: the conditions on Λ, the Möbius maps and
//! fixed points of the measure operator `Ŝ`.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{Atom, CustomDensity, Interior, LambdaMeasure, ModelParams};
use crate::specfun::roots::safeguarded_newton;

/// The maps `φ(x) = (1−x)/(1−ρx)` (an involution) and
/// `ϕ(y) = (1−ρ)y/(1−ρy)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MobiusInvolution {
    pub rho: f64,
}

impl MobiusInvolution {
    pub fn new(rho: f64) -> Result<Self> {
        check_rho(rho)?;
        Ok(MobiusInvolution { rho })
    }

    pub fn big(&self, x: f64) -> f64 {
        (1.0 - x) / (1.0 - self.rho * x)
    }

    pub fn small(&self, y: f64) -> f64 {
        (1.0 - self.rho) * y / (1.0 - self.rho * y)
    }

    pub fn small_inverse(&self, y: f64) -> f64 {
        y / (1.0 - self.rho + self.rho * y)
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "rho = {rho} must lie in (0,1)"
        )));
    }
    Ok(())
}

/// `ϕ⁽ⁿ⁾(x)`; negative `n` gives iterates of the inverse.
pub fn phi_iterate(rho: f64, x: f64, n: i64) -> f64 {
    phi_iterate_pair(rho, x, 1.0 - x, n).0
}

/// `(ϕ⁽ⁿ⁾(x), 1 − ϕ⁽ⁿ⁾(x))` with the complement computed without
/// cancellation; `cx = 1 − x` is passed separately.
pub fn phi_iterate_pair(rho: f64, x: f64, cx: f64, n: i64) -> (f64, f64) {
    if n == 0 {
        return (x, cx);
    }
    let q = (1.0 - rho).powi(n.unsigned_abs() as i32);
    let one_minus_q = -(((n.unsigned_abs() as f64) * (-rho).ln_1p()).exp_m1());
    if n > 0 {
        let d = 1.0 - x * one_minus_q;
        normalize(q * x / d, cx / d)
    } else {
        let d = q + x * one_minus_q;
        normalize(x / d, q * cx / d)
    }
}

/// Near 1 the location is recomputed from its complement so that both
/// orderings agree.
fn normalize(x: f64, cx: f64) -> (f64, f64) {
    if cx < 0.5 {
        (1.0 - cx, cx)
    } else {
        (x, cx)
    }
}

/// A finite atomic measure on (0,1) along one orbit of `ϕ`.
#[derive(Debug, Clone, Serialize)]
pub struct AtomicMeasure {
    pub atoms: Vec<OrbitAtom>,
    pub truncation_k: usize,
    pub tail_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrbitAtom {
    pub k: i64,
    pub x: f64,
    /// `1 − x`.
    pub cx: f64,
    pub mass: f64,
}

impl AtomicMeasure {
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum()
    }

    /// CSV with header `k,location,mass`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,location,mass\n");
        for a in &self.atoms {
            let _ = writeln!(s, "{},{:e},{:e}", a.k, a.x, a.mass);
        }
        s
    }

    fn sort(&mut self) {
        self.atoms
            .sort_by(|a, b| a.x.total_cmp(&b.x).then(b.cx.total_cmp(&a.cx)));
    }

    /// Merges atoms whose locations agree to a relative `1e−12`.
    fn merge(&mut self) {
        self.sort();
        let mut out: Vec<OrbitAtom> = Vec::with_capacity(self.atoms.len());
        for a in self.atoms.drain(..) {
            if let Some(last) = out.last_mut() {
                let close = if a.x < 0.5 {
                    (a.x - last.x).abs() <= 1e-12 * a.x
                } else {
                    (a.cx - last.cx).abs() <= 1e-12 * a.cx
                };
                if close {
                    last.mass += a.mass;
                    continue;
                }
            }
            out.push(a);
        }
        self.atoms = out;
    }
}

pub type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A measure acted on by `Ŝ`.
#[derive(Clone)]
pub enum SMeasure {
    Atomic(AtomicMeasure),
    Density(DensityFn),
}

impl std::fmt::Debug for SMeasure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SMeasure::Atomic(a) => f.debug_tuple("Atomic").field(a).finish(),
            SMeasure::Density(_) => f.write_str("Density(..)"),
        }
    }
}

/// `Ŝμ(dy) = ρy(2−ρy)μ(dy) + (1−ρ)(μ∘ϕ⁻¹)(dy)`.
pub fn apply_s(mu: &SMeasure, rho: f64) -> Result<SMeasure> {
    check_rho(rho)?;
    match mu {
        SMeasure::Atomic(m) => {
            let mut atoms = Vec::with_capacity(2 * m.atoms.len());
            for a in &m.atoms {
                let stay = rho * a.x * (2.0 - rho * a.x) * a.mass;
                if stay > 0.0 {
                    atoms.push(OrbitAtom { mass: stay, ..*a });
                }
                let (x, cx) = phi_iterate_pair(rho, a.x, a.cx, 1);
                atoms.push(OrbitAtom {
                    k: a.k + 1,
                    x,
                    cx,
                    mass: (1.0 - rho) * a.mass,
                });
            }
            let mut out = AtomicMeasure {
                atoms,
                truncation_k: m.truncation_k,
                tail_bound: m.tail_bound,
            };
            out.merge();
            Ok(SMeasure::Atomic(out))
        }
        SMeasure::Density(h) => {
            let h = h.clone();
            Ok(SMeasure::Density(Arc::new(move |y: f64| {
                let d = 1.0 - rho + rho * y;
                rho * y * (2.0 - rho * y) * h(y) + (1.0 - rho) * h(y / d) * (1.0 - rho) / (d * d)
            })))
        }
    }
}

/// The continuous fixed density `(1−ρ)/(1−ρy)²`.
pub fn continuous_fixed_density(rho: f64) -> DensityFn {
    Arc::new(move |y: f64| (1.0 - rho) / ((1.0 - rho * y) * (1.0 - rho * y)))
}

/// Masses `m_k` of the fixed point along the orbit of `x0`.
pub fn orbit_mass(rho: f64, x0: f64, m0: f64, k: i64) -> f64 {
    let q = 1.0 - rho;
    let c = (1.0 - rho * x0).powi(2) * m0;
    if k == 0 {
        return m0;
    }
    if k > 0 {
        let d = 1.0 - x0 * (1.0 - q.powi(k as i32 + 1));
        q.powi(k as i32) * c / (d * d)
    } else {
        let n = (-k) as i32;
        let d = q.powi(n - 1) + x0 * (1.0 - q.powi(n - 1));
        q.powi(n - 2) * c / (d * d)
    }
}

fn tail_bound(rho: f64, x0: f64, m0: f64, k: usize) -> f64 {
    let ki = k as i64;
    let (xp, _) = phi_iterate_pair(rho, x0, 1.0 - x0, ki + 1);
    let up = (1.0 - rho) / (1.0 - rho * xp).powi(2);
    let (_, cxm) = phi_iterate_pair(rho, x0, 1.0 - x0, -ki);
    let down = (1.0 - rho + rho * cxm).powi(2) / (1.0 - rho);
    let mut b = 0.0;
    for (ratio, mass) in [
        (up, orbit_mass(rho, x0, m0, ki)),
        (down, orbit_mass(rho, x0, m0, -ki)),
    ] {
        if ratio >= 1.0 {
            return f64::INFINITY;
        }
        b += mass * ratio / (1.0 - ratio);
    }
    b
}

/// Discrete fixed point `μ(ρ, x0, m0)` truncated to `|k| ≤ K`. With
/// `k = None` the smallest `K` with tail bound below `1e−10` is used.
pub fn build_discrete_fixed_point(
    rho: f64,
    x0: f64,
    m0_mass: f64,
    k: Option<usize>,
) -> Result<AtomicMeasure> {
    check_rho(rho)?;
    if !(x0 > 0.0 && x0 < 1.0) || !(m0_mass > 0.0) {
        return Err(Error::InvalidParameter(
            "need x0 in (0,1) and positive mass".into(),
        ));
    }
    let k = match k {
        Some(k) => k,
        None => {
            let mut k = 1;
            while tail_bound(rho, x0, m0_mass, k) >= 1e-10 {
                k += 1;
                if 2 * k + 1 > crate::measures::ATOM_CAP {
                    return Err(Error::AtomCap(crate::measures::ATOM_CAP));
                }
            }
            k
        }
    };
    let ki = k as i64;
    let atoms = (-ki..=ki)
        .rev()
        .map(|j| {
            let (x, cx) = phi_iterate_pair(rho, x0, 1.0 - x0, j);
            OrbitAtom {
                k: j,
                x,
                cx,
                mass: orbit_mass(rho, x0, m0_mass, j),
            }
        })
        .collect();
    let mut m = AtomicMeasure {
        atoms,
        truncation_k: k,
        tail_bound: tail_bound(rho, x0, m0_mass, k),
    };
    m.sort();
    Ok(m)
}

/// Root `ρ*` in (0,1) of `m0(1−ρx0)² − x0(1−x0)(θ1ρ² − (σ+θ)ρ + σ)`.
pub fn rho_star(x0: f64, m0_mass: f64, params: &ModelParams) -> Result<f64> {
    if !(x0 > 0.0 && x0 < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "x0 = {x0} must lie in (0,1)"
        )));
    }
    if !(m0_mass > 0.0 && m0_mass < params.sigma * x0 * (1.0 - x0)) {
        return Err(Error::PreconditionViolated(format!(
            "need 0 < m0 < sigma x0 (1-x0) = {}",
            params.sigma * x0 * (1.0 - x0)
        )));
    }
    let (s, t, t1) = (params.sigma, params.theta(), params.theta1);
    let w = x0 * (1.0 - x0);
    let r = |z: f64| m0_mass * (1.0 - z * x0).powi(2) - w * (t1 * z * z - (s + t) * z + s);
    let dr = |z: f64| -2.0 * m0_mass * x0 * (1.0 - z * x0) - w * (2.0 * t1 * z - (s + t));
    safeguarded_newton(r, dr, 0.0, 1.0, 1e-16)
}

/// `Λ = μ∘φ⁻¹`: each atom `(y, m)` moves to `φ(y)`.
pub fn pushforward_to_lambda(mu: &AtomicMeasure, rho: f64) -> Result<LambdaMeasure> {
    check_rho(rho)?;
    let mut atoms: Vec<Atom> = mu
        .atoms
        .iter()
        .map(|a| {
            let d = if a.x < 0.5 {
                1.0 - rho * a.x
            } else {
                1.0 - rho + rho * a.cx
            };
            let (x, cx) = normalize(a.cx / d, (1.0 - rho) * a.x / d);
            Atom {
                x,
                cx,
                mass: a.mass,
            }
        })
        .collect();
    atoms.sort_by(|a, b| a.x.total_cmp(&b.x).then(b.cx.total_cmp(&a.cx)));
    LambdaMeasure::atoms(atoms)
}

/// `Σ_i a_i` with `a_i = m_i(1−ρϕ⁽ⁱ⁾(x0))/(1−ρ)` and its closed form
/// `m0(1−ρx0)²/(ρ(1−ρ)x0(1−x0))`.
pub fn proof_sum_identity(mu: &AtomicMeasure, rho: f64, x0: f64, m0_mass: f64) -> (f64, f64) {
    let sum: f64 = mu
        .atoms
        .iter()
        .map(|a| {
            let d = if a.x < 0.5 {
                1.0 - rho * a.x
            } else {
                1.0 - rho + rho * a.cx
            };
            a.mass * d / (1.0 - rho)
        })
        .sum();
    let closed = m0_mass * (1.0 - rho * x0).powi(2) / (rho * (1.0 - rho) * x0 * (1.0 - x0));
    (sum, closed)
}

#[derive(Debug, Clone, Serialize)]
pub struct GeometricReport {
    pub rho: f64,
    pub m0_zero: bool,
    pub m1_zero: bool,
    /// Residuals of the moment condition for `n = 0..=n_max`.
    pub cg3a: Vec<f64>,
    pub cg3b: f64,
    /// Redundant check of the first form of the condition, `n = 1..=min(10, n_max)`.
    pub cg1: Vec<f64>,
    /// `∫ x⁻¹ Λ₀(dx) = ∞`.
    pub dust_free: bool,
    pub tol: f64,
    pub passed: bool,
}

/// `eᵃ − 1 − a` without cancellation.
fn expm1_minus(a: f64) -> f64 {
    if a.abs() < 0.5 {
        let mut term = a * a / 2.0;
        let mut s = 0.0f64;
        let mut j = 2.0;
        while term.abs() > 1e-18 * s.abs().max(1e-300) {
            s += term;
            j += 1.0;
            term *= a / j;
        }
        s
    } else {
        a.exp_m1() - a
    }
}

/// `log(1−ρx) − ρ log(1−x)` without cancellation.
fn log_gap(rho: f64, x: f64, cx: f64) -> f64 {
    if x < 0.1 {
        let mut s = 0.0;
        let mut xp = x;
        let mut rp = rho;
        for j in 2..200 {
            xp *= x;
            rp *= rho;
            let term = (rho - rp) * xp / j as f64;
            s += term;
            if term.abs() < 1e-18 * s.abs() {
                break;
            }
        }
        s
    } else {
        (1.0 - rho + rho * cx).ln() - rho * cx.ln()
    }
}

/// Checks whether `L∞ ~ Geom(1−ρ)` through the conditions on Λ.
pub fn check_geometric(
    measure: &LambdaMeasure,
    params: &ModelParams,
    rho: f64,
    n_max: usize,
    tol: f64,
) -> Result<GeometricReport> {
    check_rho(rho)?;
    let one_minus = |x: f64, cx: f64| {
        if x < 0.5 {
            1.0 - rho * x
        } else {
            1.0 - rho + rho * cx
        }
    };
    let mut cg3a = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let nf = n as f64;
        let v = measure.integrate_interior(
            |x, cx| {
                let d = one_minus(x, cx);
                cx.powf(nf) - (1.0 - rho) * (cx / d).powf(nf) / (d * d)
            },
            0.0,
            nf,
        )?;
        cg3a.push(v);
    }
    let rhs = (params.theta1 * rho * rho - (params.sigma + params.theta()) * rho + params.sigma)
        / (rho * (1.0 - rho));
    let cg3b = measure.integrate_interior(|x, cx| 1.0 / one_minus(x, cx), 0.0, 0.0)? - rhs;
    let rhs1 = rhs * rho * (1.0 - rho);
    let mut cg1 = Vec::new();
    for n in 1..=n_max.min(10) {
        let nf = n as f64;
        let v = measure.integrate_interior(
            |x, cx| {
                // (1−ρ)(1−x)^n + ρ − ((1−x)/(1−ρx))^n over x²
                let a = nf * cx.ln();
                let b = a - nf * one_minus(x, cx).ln();
                let lin = nf * log_gap(rho, x, cx);
                ((1.0 - rho) * expm1_minus(a) - expm1_minus(b) + lin) / (x * x)
            },
            0.0,
            0.0,
        )?;
        let total = v / nf + measure.m1 * rho / nf;
        cg1.push(total - rhs1);
    }
    let dust_free = match &measure.interior {
        Interior::Zero => false,
        Interior::Uniform { c } => *c > 0.0,
        Interior::Beta { a, .. } => *a <= 1.0,
        Interior::Atoms(_) => false,
        Interior::Custom(CustomDensity { exponent_at_0, .. }) => *exponent_at_0 <= 0.0,
    };
    let m0_zero = measure.m0 == 0.0;
    let m1_zero = measure.m1 == 0.0;
    let worst = cg3a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let passed = m0_zero && m1_zero && worst <= tol && cg3b.abs() <= tol;
    Ok(GeometricReport {
        rho,
        m0_zero,
        m1_zero,
        cg3a,
        cg3b,
        cg1,
        dust_free,
        tol,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iterates() {
        assert_eq!(phi_iterate(0.5, 0.3, 0), 0.3);
        assert!((phi_iterate(0.5, 0.5, 1) - 1.0 / 3.0).abs() < 1e-16);
        for &x in &[0.01, 0.3, 0.77, 0.999] {
            let y = phi_iterate(0.3, phi_iterate(0.3, x, 5), -5);
            assert!((y - x).abs() < 1e-13);
        }
        let m = MobiusInvolution::new(0.4).unwrap();
        for i in 0..=20 {
            let x = i as f64 / 20.0;
            assert!((m.big(m.big(x)) - x).abs() < 1e-14);
            assert!((m.small(x) - phi_iterate(0.4, x, 1)).abs() < 1e-15);
            assert!((m.small_inverse(m.small(x)) - x).abs() < 1e-15);
        }
    }

    #[test]
    fn complement_identity() {
        let (rho, x0) = (0.35, 0.4);
        for i in 0..30i64 {
            let (x, _) = phi_iterate_pair(rho, x0, 1.0 - x0, i);
            let lhs = 1.0 - rho * x;
            let q = |k: i64| 1.0 - x0 * (1.0 - (1.0 - rho).powi(k as i32));
            assert!((lhs - q(i + 1) / q(i)).abs() < 1e-13);
        }
        for i in 1..60i64 {
            let (x, cx) = phi_iterate_pair(rho, x0, 1.0 - x0, -i);
            assert!((x + cx - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn orbit_recursions() {
        let (rho, x0, m0) = (0.5, 0.3, 0.2);
        for k in 0..40i64 {
            let (xk, cxk) = phi_iterate_pair(rho, x0, 1.0 - x0, -k);
            let d = if xk < 0.5 {
                1.0 - rho * xk
            } else {
                1.0 - rho + rho * cxk
            };
            let next = orbit_mass(rho, x0, m0, -k) * d * d / (1.0 - rho);
            let want = orbit_mass(rho, x0, m0, -k - 1);
            assert!((next - want).abs() <= 1e-14 * want, "{k}");
            let (xk1, _) = phi_iterate_pair(rho, x0, 1.0 - x0, k + 1);
            let up = (1.0 - rho) / (1.0 - rho * xk1).powi(2) * orbit_mass(rho, x0, m0, k);
            let want = orbit_mass(rho, x0, m0, k + 1);
            assert!((up - want).abs() <= 1e-14 * want, "{k}");
        }
    }

    #[test]
    fn discrete_fixed_point() {
        let mu = build_discrete_fixed_point(0.5, 0.3, 0.1, Some(200)).unwrap();
        assert!(mu.tail_bound < 1e-10);
        let s = apply_s(&SMeasure::Atomic(mu.clone()), 0.5).unwrap();
        let SMeasure::Atomic(s) = s else { panic!() };
        let by_k = |m: &AtomicMeasure, k: i64| m.atoms.iter().find(|a| a.k == k).map(|a| a.mass);
        for k in -150..150 {
            let a = by_k(&mu, k).unwrap();
            let b = by_k(&s, k).unwrap();
            assert!((a - b).abs() <= 1e-12 * a, "{k}: {a} {b}");
        }
        assert_eq!(by_k(&mu, 0), Some(0.1));
    }

    #[test]
    fn continuous_fixed() {
        let rho = 0.6;
        let h = continuous_fixed_density(rho);
        let SMeasure::Density(sh) = apply_s(&SMeasure::Density(h.clone()), rho).unwrap() else {
            panic!()
        };
        for i in 0..=50 {
            let y = i as f64 / 50.0;
            assert!((sh(y) - h(y)).abs() < 1e-12);
        }
    }

    #[test]
    fn rho_star_residual_and_limit() {
        let params = ModelParams::new(1.0, 0.0, 0.0).unwrap();
        let r = rho_star(0.5, 0.1, &params).unwrap();
        let res = 0.1 * (1.0 - r / 2.0).powi(2) - 0.25 * (1.0 - r);
        assert!(res.abs() < 1e-14);
        let params = ModelParams::new(1.0, 1.0, 1.0).unwrap();
        let r = rho_star(0.5, 1e-12, &params).unwrap();
        let p = crate::recursions::crow_kimura_p(&params).unwrap();
        assert!((r - p).abs() < 1e-10);
        assert!(rho_star(0.5, 0.3, &ModelParams::new(1.0, 0.0, 0.0).unwrap()).is_err());
    }

    #[test]
    fn uniform_is_geometric() {
        let params = ModelParams::new(1.0, 0.5, 0.5).unwrap();
        let rho = crate::closedform::bs_rho(&params).unwrap();
        let rep = check_geometric(&LambdaMeasure::uniform(1.0), &params, rho, 50, 1e-8).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert!(rep.dust_free);
        assert!(rep.cg1.iter().all(|v| v.abs() < 1e-8), "{:?}", rep.cg1);
        let off =
            check_geometric(&LambdaMeasure::uniform(1.0), &params, rho + 1e-3, 5, 1e-8).unwrap();
        assert!(off.cg3b.abs() >= 1e-4);
    }

    #[test]
    fn pushforward_pipeline() {
        let params = ModelParams::new(1.0, 0.2, 0.2).unwrap();
        let (x0, m0) = (0.3, 0.05);
        let rho = rho_star(x0, m0, &params).unwrap();
        let mu = build_discrete_fixed_point(rho, x0, m0, None).unwrap();
        let (sum, closed) = proof_sum_identity(&mu, rho, x0, m0);
        assert!((sum - closed).abs() < 1e-10 * closed);
        let lambda = pushforward_to_lambda(&mu, rho).unwrap();
        let rep = check_geometric(&lambda, &params, rho, 20, 1e-8).unwrap();
        assert!(rep.passed, "{rep:?}");
    }
}
