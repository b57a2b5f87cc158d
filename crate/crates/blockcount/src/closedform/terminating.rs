//! The `q_{n,i}` sums shared by the Moran and Wright–Fisher closed forms,
//! accumulated progressively in `n`.

use crate::scalar::Exact;

/// Data of one family `i`:
/// `q_{n,i} = Σ_{m=0}^{n−i} d_m · Σ_{k=0}^{n−i−m} (−1)^k C(n−i−m, k) e_k^{(m)}`
/// with `d_0 = e_0^{(m)} = 1`; the closures give the ratios
/// `d_m/d_{m−1}` and `e_k^{(m)}/e_{k−1}^{(m)}`.
pub(crate) struct QFamily<T, D, E> {
    pub i: usize,
    pub d: D,
    pub e: E,
    d_cache: Vec<T>,
    e_cache: Vec<Vec<T>>,
}

impl<T, D, E> QFamily<T, D, E>
where
    T: Exact,
    D: Fn(usize) -> T,
    E: Fn(usize, usize) -> T,
{
    pub fn new(i: usize, d: D, e: E) -> Self {
        QFamily {
            i,
            d,
            e,
            d_cache: Vec::new(),
            e_cache: Vec::new(),
        }
    }

    fn d_at(&mut self, m: usize) -> T {
        while self.d_cache.len() <= m {
            let m = self.d_cache.len();
            let v = match self.d_cache.last() {
                None => T::one(),
                Some(prev) => prev.clone() * (self.d)(m),
            };
            self.d_cache.push(v);
        }
        self.d_cache[m].clone()
    }

    fn e_row(&mut self, m: usize, upto: usize) -> &[T] {
        while self.e_cache.len() <= m {
            self.e_cache.push(Vec::new());
        }
        while self.e_cache[m].len() <= upto {
            let k = self.e_cache[m].len();
            let v = match self.e_cache[m].last() {
                None => T::one(),
                Some(prev) => prev.clone() * (self.e)(m, k),
            };
            self.e_cache[m].push(v);
        }
        &self.e_cache[m]
    }

    /// `q_{n,i}` with the conventions `q_{1,1} = 1`, `q_{1,2} = 0`.
    pub fn q(&mut self, n: usize) -> T {
        if n == 1 {
            return if self.i == 1 { T::one() } else { T::zero() };
        }
        if n < self.i {
            return T::zero();
        }
        let mut total = T::zero();
        for m in 0..=(n - self.i) {
            let j = n - self.i - m;
            let dm = self.d_at(m);
            if dm.is_zero() {
                continue;
            }
            self.e_row(m, j);
            let row = &self.e_cache[m];
            let mut s = T::zero();
            let mut binom = T::one();
            for (k, ek) in row.iter().take(j + 1).enumerate() {
                let term = binom.clone() * ek.clone();
                s = if k % 2 == 0 { s + term } else { s - term };
                // C(j, k+1) = C(j, k)·(j−k)/(k+1)
                binom = binom.mul_small((j - k) as i64).div_small(k as i64 + 1);
            }
            total = total + dm * s;
        }
        total
    }
}
