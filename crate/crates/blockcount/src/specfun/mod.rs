//! Special functions: factorials, hypergeometric series, Lambert-W,
//! gamma/beta and the integral family `I(α,β,γ,ν;z)`.

pub mod exact;
pub mod ode;
pub mod quad;
pub mod roots;

use crate::error::{Error, Result};
use crate::scalar::Real;
pub use quad::{integrate, QuadResult, Quadrature};

/// Value of a power series together with its truncation diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesResult<T> {
    pub value: T,
    pub terms_used: usize,
    /// Estimated truncation error; exactly zero for terminating series.
    pub tail_bound: T,
}

const MAX_TERMS: usize = 1_000_000;

pub fn rising_factorial<T: Real>(alpha: T, n: u64) -> T {
    let mut p = T::one();
    for k in 0..n {
        p = p * (alpha + T::c(k as f64));
        if !p.is_finite() {
            return p;
        }
    }
    p
}

pub fn falling_factorial<T: Real>(alpha: T, n: u64) -> T {
    let mut p = T::one();
    for k in 0..n {
        p = p * (alpha - T::c(k as f64));
        if !p.is_finite() {
            return p;
        }
    }
    p
}

/// `Some(n)` when `x` equals the nonpositive integer `−n`.
pub fn nonpositive_integer<T: Real>(x: T) -> Option<u64> {
    if x <= T::zero() && x == x.round() && x > T::c(-1e15) {
        Some((-x).as_f64() as u64)
    } else {
        None
    }
}

/// Generic `pFq` power series with Kahan summation.
pub fn hypergeometric_pfq<T: Real>(a: &[T], b: &[T], z: T) -> Result<SeriesResult<T>> {
    for &bj in b {
        if nonpositive_integer(bj).is_some() {
            return Err(Error::Pole(bj.as_f64()));
        }
    }
    let terminate = a.iter().filter_map(|&ai| nonpositive_integer(ai)).min();
    if terminate.is_none() && a.len() > b.len() && z.abs() >= T::one() {
        return Err(Error::Domain(format!(
            "|z| = {} outside the disk for a nonterminating series",
            z.abs()
        )));
    }
    let limit = terminate.map(|n| n as usize).unwrap_or(MAX_TERMS);
    let mut sum = T::one();
    let mut comp = T::zero();
    let mut term = T::one();
    let mut small = 0;
    let mut ratio = T::zero();
    let eps = T::epsilon();
    let mut k = 0usize;
    while k < limit {
        let kf = T::c(k as f64);
        let mut r = z / (kf + T::one());
        for &ai in a {
            r = r * (ai + kf);
        }
        for &bj in b {
            r = r / (bj + kf);
        }
        let next = term * r;
        k += 1;
        ratio = r.abs();
        term = next;
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        if !sum.is_finite() {
            return Err(Error::NoConvergence("series overflowed".into()));
        }
        if terminate.is_none() {
            if term.abs() <= eps * sum.abs() || term == T::zero() {
                small += 1;
                if small >= 3 {
                    break;
                }
            } else {
                small = 0;
            }
        }
    }
    if terminate.is_none() && k >= MAX_TERMS {
        return Err(Error::NoConvergence(format!(
            "series did not converge in {MAX_TERMS} terms"
        )));
    }
    let tail_bound = if terminate.is_some() {
        T::zero()
    } else if ratio < T::one() {
        term.abs() * ratio / (T::one() - ratio) + eps * sum.abs()
    } else {
        term.abs() * T::c(10.0)
    };
    Ok(SeriesResult {
        value: sum,
        terms_used: k + 1,
        tail_bound,
    })
}

pub fn gauss_2f1<T: Real>(a: T, b: T, c: T, z: T) -> Result<SeriesResult<T>> {
    hypergeometric_pfq(&[a, b], &[c], z)
}

pub fn kummer_1f1<T: Real>(a: T, c: T, z: T) -> Result<SeriesResult<T>> {
    hypergeometric_pfq(&[a], &[c], z)
}

pub fn hyper_3f2<T: Real>(a1: T, a2: T, a3: T, b1: T, b2: T, z: T) -> Result<SeriesResult<T>> {
    hypergeometric_pfq(&[a1, a2, a3], &[b1, b2], z)
}

/// Appell `F1(a; b, c; d; z, w)` as an outer series over `m` of inner ₂F₁ values.
pub fn appell_f1<T: Real>(a: T, b: T, c: T, d: T, z: T, w: T) -> Result<SeriesResult<T>> {
    if nonpositive_integer(d).is_some() {
        return Err(Error::Pole(d.as_f64()));
    }
    let outer_stop = nonpositive_integer(b).or_else(|| nonpositive_integer(a));
    if outer_stop.is_none() && z.abs() >= T::one() {
        return Err(Error::Domain("|z| outside the disk for Appell F1".into()));
    }
    let limit = outer_stop.map(|n| n as usize).unwrap_or(MAX_TERMS);
    let mut coef = T::one();
    let mut sum = T::zero();
    let mut comp = T::zero();
    let mut tail = T::zero();
    let mut small = 0;
    let mut m = 0usize;
    let mut last;
    loop {
        let mf = T::c(m as f64);
        let inner = gauss_2f1(a + mf, c, d + mf, w)?;
        let term = coef * inner.value;
        tail = tail + coef.abs() * inner.tail_bound;
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        last = term;
        if m >= limit {
            break;
        }
        if outer_stop.is_none() {
            if term.abs() <= T::epsilon() * sum.abs() {
                small += 1;
                if small >= 3 {
                    break;
                }
            } else {
                small = 0;
            }
        }
        coef = coef * (a + mf) * (b + mf) / ((d + mf) * (mf + T::one())) * z;
        m += 1;
        if m >= MAX_TERMS {
            return Err(Error::NoConvergence("Appell F1 outer series".into()));
        }
    }
    if outer_stop.is_none() {
        tail = tail + last.abs() * T::c(2.0) + T::epsilon() * sum.abs();
    }
    Ok(SeriesResult {
        value: sum,
        terms_used: m + 1,
        tail_bound: tail,
    })
}

pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

pub fn beta(a: f64, b: f64) -> f64 {
    ln_beta(a, b).exp()
}

/// ₂F₁ from its Euler integral; needs `c > b > 0`.
pub fn gauss_2f1_integral(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    if !(c > b && b > 0.0) {
        return Err(Error::Domain("Euler integral needs c > b > 0".into()));
    }
    let q = Quadrature::new(1e-14, 1e-13);
    let r = q.integrate_singular_gaps(
        |t: f64, ct: f64| t.powf(b - 1.0) * ct.powf(c - b - 1.0) * (1.0 - z * t).powf(-a),
        0.0,
        1.0,
        (b - 1.0).min(0.0),
        (c - b - 1.0).min(0.0),
    )?;
    Ok(r.value / beta(b, c - b))
}

/// ₁F₁ from its integral representation; needs `c > a > 0`.
pub fn kummer_1f1_integral(a: f64, c: f64, z: f64) -> Result<f64> {
    if !(c > a && a > 0.0) {
        return Err(Error::Domain("integral form needs c > a > 0".into()));
    }
    let q = Quadrature::new(1e-14, 1e-13);
    let r = q.integrate_singular_gaps(
        |t: f64, ct: f64| (t * z).exp() * t.powf(a - 1.0) * ct.powf(c - a - 1.0),
        0.0,
        1.0,
        (a - 1.0).min(0.0),
        (c - a - 1.0).min(0.0),
    )?;
    Ok(r.value / beta(a, c - a))
}

/// Appell F1 from its integral representation; needs `d > a > 0`.
pub fn appell_f1_integral(a: f64, b: f64, c: f64, d: f64, z: f64, w: f64) -> Result<f64> {
    if !(d > a && a > 0.0) {
        return Err(Error::Domain("integral form needs d > a > 0".into()));
    }
    let q = Quadrature::new(1e-14, 1e-13);
    let r = q.integrate_singular_gaps(
        |t: f64, ct: f64| {
            t.powf(a - 1.0) * ct.powf(d - a - 1.0) * (1.0 - z * t).powf(-b) * (1.0 - w * t).powf(-c)
        },
        0.0,
        1.0,
        (a - 1.0).min(0.0),
        (d - a - 1.0).min(0.0),
    )?;
    Ok(r.value / beta(a, d - a))
}

/// Principal branch of Lambert-W on `[0, ∞)`.
pub fn lambert_w<T: Real>(x: T) -> Result<T> {
    if x < T::zero() || x.is_nan() {
        return Err(Error::Domain(format!("lambert_w needs x >= 0, got {x}")));
    }
    if x == T::zero() {
        return Ok(T::zero());
    }
    if x.is_infinite() {
        return Ok(x);
    }
    let one = T::one();
    let two = T::c(2.0);
    let mut w = (one + x).ln();
    for _ in 0..100 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + one;
        let denom = ew * wp1 - (w + two) * f / (two * wp1);
        let step = f / denom;
        w = w - step;
        if step.abs() <= T::epsilon() * T::c(4.0) * w.abs() {
            break;
        }
    }
    Ok(w)
}

/// `I(α,β,γ,ν;z) = ∫₀^z y^α (1−y)^β (y+ν)^{−γ} dy` by adaptive quadrature.
pub fn integral_i(alpha: f64, beta_: f64, gamma_: f64, nu: f64, z: f64) -> Result<f64> {
    if !(alpha > 0.0 && beta_ > 0.0 && gamma_ > 0.0 && nu > 0.0) {
        return Err(Error::Domain("integral_I needs positive parameters".into()));
    }
    if !(z >= 0.0 && z <= 1.0) {
        return Err(Error::Domain(format!(
            "integral_I needs z in (0, 1], got {z}"
        )));
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    let f = |y: f64| {
        if y <= 0.0 || y >= 1.0 {
            return 0.0;
        }
        (alpha * y.ln() + beta_ * (-y).ln_1p() - gamma_ * (y + nu).ln()).exp()
    };
    let q = Quadrature::new(1e-15, 1e-13);
    Ok(q.integrate(f, 0.0, z)?.value)
}

/// Closed form of `I(α,β,γ,ν;1)` through ₂F₁ at `1/(1+ν)`.
pub fn integral_i_gauss(alpha: f64, beta_: f64, gamma_: f64, nu: f64) -> Result<f64> {
    let pre = ((1.0 + alpha - gamma_) * nu.ln() - (1.0 + alpha) * (1.0 + nu).ln()
        + ln_beta(1.0 + alpha, 1.0 + beta_))
    .exp();
    let f = gauss_2f1(
        2.0 + alpha + beta_ - gamma_,
        1.0 + alpha,
        2.0 + alpha + beta_,
        1.0 / (1.0 + nu),
    )?;
    Ok(pre * f.value)
}

/// Closed form of `I(α,β,γ,ν;z)` through Appell F1, valid for `z < ν/√(ν²+2ν)`.
pub fn integral_i_appell(alpha: f64, beta_: f64, gamma_: f64, nu: f64, z: f64) -> Result<f64> {
    let zmax = nu / (nu * nu + 2.0 * nu).sqrt();
    if !(z > 0.0 && z < zmax) {
        return Err(Error::Domain(format!("z = {z} outside (0, {zmax})")));
    }
    let x = z / (z + nu);
    let pre = ((alpha - gamma_ + 1.0) * nu.ln() + (1.0 + alpha) * x.ln()).exp() / (1.0 + alpha);
    let f = appell_f1(
        1.0 + alpha,
        2.0 + alpha + beta_ - gamma_,
        -beta_,
        2.0 + alpha,
        x,
        (1.0 + nu) * x,
    )?;
    Ok(pre * f.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factorials() {
        assert_eq!(rising_factorial(3.7f64, 0), 1.0);
        assert_eq!(rising_factorial(1.0f64, 4), 24.0);
        assert_eq!(rising_factorial(2.0f64, 3), 24.0);
        assert_eq!(falling_factorial(5.0f64, 3), 60.0);
        assert!(rising_factorial(1e200f64, 3).is_infinite());
    }

    #[test]
    fn gauss_examples() {
        assert_eq!(gauss_2f1(0.3, 0.4, 0.5, 0.0f64).unwrap().value, 1.0);
        let r = gauss_2f1(1.0, -2.0, 3.0, 1.0f64).unwrap();
        assert!((r.value - 0.5).abs() < 1e-15);
        assert_eq!(r.tail_bound, 0.0);
        let r = gauss_2f1(1.0, 1.0, 2.0, 0.5f64).unwrap();
        assert!((r.value - 2.0 * 2f64.ln()).abs() < 1e-14);
        assert!(matches!(
            gauss_2f1(1.0, 1.0, -2.0, 0.5f64),
            Err(Error::Pole(_))
        ));
        assert!(matches!(
            gauss_2f1(1.0, 1.0, 2.0, 1.5f64),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn kummer_examples() {
        assert_eq!(kummer_1f1(2.0, 3.0, 0.0f64).unwrap().value, 1.0);
        let e = 1f64.exp();
        assert!((kummer_1f1(1.0, 1.0, 1.0f64).unwrap().value - e).abs() < 1e-15);
        assert!((kummer_1f1(1.0, 2.0, 1.0f64).unwrap().value - (e - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn hyper_3f2_examples() {
        assert!((hyper_3f2(1.0, 1.0, -1.0, 2.0, 1.0, 1.0f64).unwrap().value - 0.5).abs() < 1e-15);
        assert!(
            (hyper_3f2(2.0, 1.0, -2.0, 3.0, 1.0, 1.0f64).unwrap().value - 1.0 / 6.0).abs() < 1e-15
        );
    }

    #[test]
    fn appell_examples() {
        assert_eq!(
            appell_f1(1.0, 2.0, 3.0, 4.0, 0.0, 0.0f64).unwrap().value,
            1.0
        );
        let a = appell_f1(1.5, 2.0, 0.7, 3.0, 0.4, 0.0f64).unwrap().value;
        let g = gauss_2f1(1.5, 2.0, 3.0, 0.4f64).unwrap().value;
        assert!((a - g).abs() < 1e-14);
        let series = appell_f1(1.0, 1.0, 1.0, 3.0, 0.3, 0.5f64).unwrap().value;
        let quad = integrate(
            |t: f64| 2.0 * (1.0 - t) / ((1.0 - 0.3 * t) * (1.0 - 0.5 * t)),
            0.0,
            1.0,
        )
        .unwrap();
        assert!((series - quad).abs() < 1e-10);
    }

    #[test]
    fn lambert_examples() {
        assert_eq!(lambert_w(0.0f64).unwrap(), 0.0);
        let e = 1f64.exp();
        assert!((lambert_w(e).unwrap() - 1.0).abs() < 1e-15);
        assert!((lambert_w(2.0 * e * e).unwrap() - 2.0).abs() < 1e-14);
        assert!(lambert_w(-1.0f64).is_err());
        assert!((lambert_w(1.0f32).unwrap() - 0.567_143_3).abs() < 1e-6);
    }

    #[test]
    fn integral_i_examples() {
        let v = integral_i(1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!((v - (1.5 - 2.0 * 2f64.ln())).abs() < 1e-13);
        assert_eq!(integral_i(1.0, 1.0, 1.0, 1.0, 0.0).unwrap(), 0.0);
        let q = integral_i(2.0, 3.0, 1.5, 0.7, 1.0).unwrap();
        let g = integral_i_gauss(2.0, 3.0, 1.5, 0.7).unwrap();
        assert!((q - g).abs() < 1e-9);
    }
}
