//! Scalar root finding and numerical differentiation.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Bisection on a sign change; returns the midpoint of the final bracket.
pub fn bisect<T: Real, F: Fn(T) -> T>(f: F, mut a: T, mut b: T, tol: T) -> Result<T> {
    let mut fa = f(a);
    let fb = f(b);
    if fa == T::zero() {
        return Ok(a);
    }
    if fb == T::zero() {
        return Ok(b);
    }
    if (fa > T::zero()) == (fb > T::zero()) {
        return Err(Error::Domain(format!("no sign change on [{a}, {b}]")));
    }
    for _ in 0..2000 {
        let m = T::c(0.5) * (a + b);
        if (b - a).abs() <= tol || m == a || m == b {
            return Ok(m);
        }
        let fm = f(m);
        if fm == T::zero() {
            return Ok(m);
        }
        if (fm > T::zero()) == (fa > T::zero()) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(T::c(0.5) * (a + b))
}

/// Newton steps kept inside a shrinking bisection bracket.
pub fn safeguarded_newton<T: Real, F, D>(f: F, df: D, mut a: T, mut b: T, tol: T) -> Result<T>
where
    F: Fn(T) -> T,
    D: Fn(T) -> T,
{
    let mut fa = f(a);
    let fb = f(b);
    if fa == T::zero() {
        return Ok(a);
    }
    if fb == T::zero() {
        return Ok(b);
    }
    if (fa > T::zero()) == (fb > T::zero()) {
        return Err(Error::Domain(format!("no sign change on [{a}, {b}]")));
    }
    let mut x = T::c(0.5) * (a + b);
    for _ in 0..500 {
        let fx = f(x);
        if fx == T::zero() {
            return Ok(x);
        }
        if (fx > T::zero()) == (fa > T::zero()) {
            a = x;
            fa = fx;
        } else {
            b = x;
        }
        let d = df(x);
        let newton = x - fx / d;
        let inside = newton > a.min(b) && newton < a.max(b) && newton.is_finite();
        let next = if inside { newton } else { T::c(0.5) * (a + b) };
        if (next - x).abs() <= tol * (T::one() + x.abs()) {
            return Ok(next);
        }
        if (b - a).abs() <= tol {
            return Ok(T::c(0.5) * (a + b));
        }
        x = next;
    }
    Err(Error::NoConvergence("safeguarded Newton".into()))
}

/// Ridders' extrapolated central difference; returns (derivative, error).
pub fn ridders_derivative<F: Fn(f64) -> f64>(f: F, x: f64, h0: f64) -> (f64, f64) {
    const NTAB: usize = 10;
    const CON: f64 = 1.4;
    const CON2: f64 = CON * CON;
    let mut a = [[0.0f64; NTAB]; NTAB];
    let mut h = h0;
    a[0][0] = (f(x + h) - f(x - h)) / (2.0 * h);
    let mut err = f64::MAX;
    let mut ans = a[0][0];
    for i in 1..NTAB {
        h /= CON;
        a[0][i] = (f(x + h) - f(x - h)) / (2.0 * h);
        let mut fac = CON2;
        for j in 1..=i {
            a[j][i] = (a[j - 1][i] * fac - a[j - 1][i - 1]) / (fac - 1.0);
            fac *= CON2;
            let errt = (a[j][i] - a[j - 1][i])
                .abs()
                .max((a[j][i] - a[j - 1][i - 1]).abs());
            if errt <= err {
                err = errt;
                ans = a[j][i];
            }
        }
        if (a[i][i] - a[i - 1][i - 1]).abs() >= 2.0 * err {
            break;
        }
    }
    (ans, err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_sqrt2() {
        let r = bisect(|x: f64| x * x - 2.0, 0.0, 2.0, 1e-15).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn newton_cubic() {
        let r = safeguarded_newton(
            |x: f64| x.powi(3) - x - 1.0,
            |x| 3.0 * x * x - 1.0,
            1.0,
            2.0,
            1e-15,
        )
        .unwrap();
        assert!((r.powi(3) - r - 1.0).abs() < 1e-13);
    }

    #[test]
    fn no_sign_change() {
        assert!(bisect(|x: f64| x * x + 1.0, -1.0, 1.0, 1e-10).is_err());
    }

    #[test]
    fn ridders_exp() {
        let (d, e) = ridders_derivative(f64::exp, 1.0, 0.1);
        assert!((d - 1f64.exp()).abs() < 1e-11, "{d} {e}");
    }
}
