//! Adaptive Gauss–Kronrod quadrature.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::scalar::Real;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: T,
    pub evaluations: usize,
}

/// One 15-point Kronrod panel; returns (integral, error estimate).
pub fn gk15<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T) -> (T, T) {
    let half = T::c(0.5);
    let center = half * (a + b);
    let h = half * (b - a);
    let fc = f(center);
    let mut kron = fc * T::c(WGK[7]);
    let mut gauss = fc * T::c(WG[3]);
    for j in 0..7 {
        let dx = h * T::c(XGK[j]);
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        kron = kron + T::c(WGK[j]) * (f1 + f2);
        if j % 2 == 1 {
            gauss = gauss + T::c(WG[j / 2]) * (f1 + f2);
        }
    }
    let value = kron * h;
    let err = ((kron - gauss) * h).abs();
    (value, err)
}

struct Panel<T> {
    a: T,
    b: T,
    value: T,
    error: T,
}

impl<T: Real> PartialEq for Panel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T: Real> Eq for Panel<T> {}
impl<T: Real> PartialOrd for Panel<T> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Real> Ord for Panel<T> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error
            .partial_cmp(&other.error)
            .unwrap_or(std::cmp::Ordering::Equal)
    }
}

/// Global adaptive integrator: the panel with the largest error estimate is
/// bisected until the total error meets `max(abs_tol, rel_tol·|I|)`.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature<T> {
    pub abs_tol: T,
    pub rel_tol: T,
    pub max_panels: usize,
}

impl<T: Real> Default for Quadrature<T> {
    fn default() -> Self {
        Quadrature {
            abs_tol: T::c(1e-12),
            rel_tol: T::c(1e-12),
            max_panels: 4000,
        }
    }
}

impl<T: Real> Quadrature<T> {
    pub fn new(abs_tol: T, rel_tol: T) -> Self {
        Quadrature {
            abs_tol,
            rel_tol,
            ..Default::default()
        }
    }

    pub fn integrate<F: Fn(T) -> T>(&self, f: F, a: T, b: T) -> Result<QuadResult<T>> {
        if a == b {
            return Ok(QuadResult {
                value: T::zero(),
                error: T::zero(),
                evaluations: 0,
            });
        }
        let (value, error) = gk15(&f, a, b);
        let mut heap = BinaryHeap::new();
        heap.push(Panel { a, b, value, error });
        let mut total = value;
        let mut total_err = error;
        let mut evaluations = 15;
        // floor below which further bisection cannot help
        let eps = T::epsilon() * T::c(50.0);
        while total_err > self.abs_tol.max(self.rel_tol * total.abs()) {
            if heap.len() >= self.max_panels {
                if total_err <= eps * total.abs().max(T::one()) * T::c(100.0) {
                    break;
                }
                return Err(Error::Quadrature(format!(
                    "panel limit reached, value {total:e} error {total_err:e}"
                )));
            }
            let worst = heap.pop().expect("nonempty heap");
            let mid = T::c(0.5) * (worst.a + worst.b);
            if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
                heap.push(worst);
                break;
            }
            let (v1, e1) = gk15(&f, worst.a, mid);
            let (v2, e2) = gk15(&f, mid, worst.b);
            evaluations += 30;
            total = total - worst.value + v1 + v2;
            total_err = total_err - worst.error + e1 + e2;
            heap.push(Panel {
                a: worst.a,
                b: mid,
                value: v1,
                error: e1,
            });
            heap.push(Panel {
                a: mid,
                b: worst.b,
                value: v2,
                error: e2,
            });
            if heap.len() % 64 == 0 {
                // resum to shed accumulated cancellation in the running totals
                total = heap.iter().fold(T::zero(), |s, p| s + p.value);
                total_err = heap.iter().fold(T::zero(), |s, p| s + p.error);
            }
        }
        total = heap.iter().fold(T::zero(), |s, p| s + p.value);
        total_err = heap.iter().fold(T::zero(), |s, p| s + p.error);
        if !total.is_finite() {
            return Err(Error::Quadrature("non-finite integrand".into()));
        }
        Ok(QuadResult {
            value: total,
            error: total_err,
            evaluations,
        })
    }

    /// Integrate over `[a, b]` when the integrand behaves like
    /// `(y−a)^ea` near `a` and `(b−y)^eb` near `b` with exponents > −1.
    /// Negative exponents are removed by `y = a + h·t^p`, `p = 1/(1+e)`.
    pub fn integrate_singular<F: Fn(T) -> T>(
        &self,
        f: F,
        a: T,
        b: T,
        ea: T,
        eb: T,
    ) -> Result<QuadResult<T>> {
        self.integrate_singular_gaps(
            |l, r| if l <= r { f(a + l) } else { f(b - r) },
            a,
            b,
            ea,
            eb,
        )
    }

    /// As [`Self::integrate_singular`], but `f` receives the gaps
    /// `(y−a, b−y)`, each exact near its own endpoint. Needs `a < b`.
    pub fn integrate_singular_gaps<F: Fn(T, T) -> T>(
        &self,
        f: F,
        a: T,
        b: T,
        ea: T,
        eb: T,
    ) -> Result<QuadResult<T>> {
        if a == b {
            return Ok(QuadResult {
                value: T::zero(),
                error: T::zero(),
                evaluations: 0,
            });
        }
        if !(a < b) {
            return Err(Error::Domain(format!(
                "singular quadrature needs a < b, got [{a}, {b}]"
            )));
        }
        if ea <= -T::one() || eb <= -T::one() {
            return Err(Error::Integrability(format!(
                "endpoint exponents {ea} and {eb} are not integrable"
            )));
        }
        let width = b - a;
        let left = self.half_singular(|d| f(d, width - d), width, ea)?;
        let right = self.half_singular(|d| f(width - d, d), width, eb)?;
        Ok(QuadResult {
            value: left.value + right.value,
            error: left.error + right.error,
            evaluations: left.evaluations + right.evaluations,
        })
    }

    /// `∫₀^{w/2} f(d) dd` for `f(d) ~ d^e`.
    fn half_singular<F: Fn(T) -> T>(&self, f: F, width: T, e: T) -> Result<QuadResult<T>> {
        let h = T::c(0.5) * width;
        let p = if e < T::zero() {
            T::one() / (T::one() + e)
        } else {
            T::one()
        };
        let g = |t: T| {
            let d = h * t.powf(p);
            if d <= T::zero() {
                return T::zero();
            }
            f(d) * h * p * t.powf(p - T::one())
        };
        self.integrate(g, T::zero(), T::one())
    }
}

/// Adaptive integration with default tolerances.
pub fn integrate<T: Real, F: Fn(T) -> T>(f: F, a: T, b: T) -> Result<T> {
    Quadrature::default().integrate(f, a, b).map(|r| r.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let r = integrate(|x: f64| x.powi(5) - 2.0 * x, 0.0, 2.0).unwrap();
        assert!((r - (64.0 / 6.0 - 4.0)).abs() < 1e-13);
    }

    #[test]
    fn endpoint_singularity() {
        let q = Quadrature::<f64>::default();
        let r = q
            .integrate_singular(
                |x| x.powf(-0.7) * (1.0 - x).powf(-0.5),
                0.0,
                1.0,
                -0.7,
                -0.5,
            )
            .unwrap();
        let exact = statrs::function::beta::beta(0.3, 0.5);
        assert!((r.value - exact).abs() < 1e-10, "{} {}", r.value, exact);
    }

    #[test]
    fn strong_singularity_near_one() {
        let q = Quadrature::<f64>::default();
        let r = q
            .integrate_singular_gaps(|_, r: f64| r.powf(-0.95), 0.0, 1.0, 0.0, -0.95)
            .unwrap();
        assert!((r.value - 20.0).abs() < 1e-9, "{}", r.value);
    }

    #[test]
    fn reversed_bounds() {
        let r = integrate(|x: f64| x.exp(), 1.0, 0.0).unwrap();
        assert!((r + (1f64.exp() - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn single_precision() {
        let q = Quadrature::<f32>::new(1e-5, 1e-5);
        let r = q.integrate(|x| x.sin(), 0.0, std::f32::consts::PI).unwrap();
        assert!((r.value - 2.0).abs() < 1e-5);
    }
}
