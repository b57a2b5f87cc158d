//! Hypergeometric sums over an [`Exact`] scalar.

use crate::error::{Error, Result};
use crate::scalar::Exact;

pub fn rising<T: Exact>(a: &T, n: usize) -> T {
    let mut p = T::one();
    let mut x = a.clone();
    for _ in 0..n {
        p = p * x.clone();
        x = x + T::one();
    }
    p
}

/// Partial sum `Σ_{k=0}^{n} Π(a_i)_k / Π(b_j)_k · z^k/k!`.
pub fn pfq_partial<T: Exact>(a: &[T], b: &[T], z: &T, n: usize) -> T {
    let mut term = T::one();
    let mut sum = T::one();
    for k in 0..n {
        let kk = T::from_i64(k as i64);
        let mut num = z.clone();
        for ai in a {
            num = num * (ai.clone() + kk.clone());
        }
        let mut den = kk + T::one();
        for bj in b {
            den = den * (bj.clone() + T::from_i64(k as i64));
        }
        term = term * num / den;
        sum = sum + term.clone();
    }
    sum
}

/// Series with eventually positive terms, summed until a term drops
/// below `rel_tol·|sum|`.
pub fn pfq_convergent<T: Exact>(
    a: &[T],
    b: &[T],
    z: &T,
    rel_tol: &T,
    max_terms: usize,
) -> Result<T> {
    let mut term = T::one();
    let mut sum = T::one();
    let mut quiet = 0;
    for k in 0..max_terms {
        let kk = T::from_i64(k as i64);
        let mut num = z.clone();
        for ai in a {
            num = num * (ai.clone() + kk.clone());
        }
        let mut den = kk.clone() + T::one();
        for bj in b {
            den = den * (bj.clone() + kk.clone());
        }
        term = term * num / den;
        sum = sum + term.clone();
        if term.abs_val() <= rel_tol.clone() * sum.abs_val() {
            quiet += 1;
            if quiet >= 3 {
                return Ok(sum);
            }
        } else {
            quiet = 0;
        }
    }
    Err(Error::NoConvergence("exact series did not converge".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::BigFixed;
    use num_bigint::BigInt;
    use num_rational::BigRational;

    #[test]
    fn rational_terminating_sum() {
        // ₂F₁(1, −2; 3; 1) = 1 − 2/3 + 1/6
        let q = |n: i64| BigRational::from_integer(BigInt::from(n));
        let v = pfq_partial(&[q(1), q(-2)], &[q(3)], &q(1), 2);
        assert_eq!(v, BigRational::new(BigInt::from(1), BigInt::from(2)));
    }

    #[test]
    fn fixed_exponential() {
        let one = BigFixed::from_i64(1);
        let tol = BigFixed::from_f64(1e-60);
        let e = pfq_convergent::<BigFixed>(&[], &[], &one, &tol, 1000).unwrap();
        assert!((e.to_f64() - 1f64.exp()).abs() < 1e-15);
    }
}
