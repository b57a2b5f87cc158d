//! Scalar abstractions.
//!
//! [`Real`] covers the floating point paths (quadrature, series, ODEs).
//! [`Exact`] covers the terminating sums in the closed forms, which lose
//! many digits to cancellation in double precision and are therefore also
//! available over [`BigFixed`] and `BigRational`.

use std::cmp::Ordering;
use std::fmt::{self, Debug, Display};
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{Float, FloatConst, FromPrimitive, One, Signed, ToPrimitive, Zero};

pub trait Real:
    Float + FloatConst + FromPrimitive + Debug + Display + fmt::LowerExp + Send + Sync + 'static
{
    fn c(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable")
    }
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite conversion")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Field-like scalar used for terminating sums.
pub trait Exact:
    Clone
    + Debug
    + PartialOrd
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(x: f64) -> Self;
    fn to_f64(&self) -> f64;
    fn from_i64(i: i64) -> Self;
    fn mul_small(self, k: i64) -> Self {
        self * Self::from_i64(k)
    }
    fn div_small(self, k: i64) -> Self {
        self / Self::from_i64(k)
    }
    fn abs_val(&self) -> Self {
        if *self < Self::zero() {
            -self.clone()
        } else {
            self.clone()
        }
    }
}

impl Exact for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn from_i64(i: i64) -> Self {
        i as f64
    }
}

impl Exact for BigRational {
    fn from_f64(x: f64) -> Self {
        BigRational::from_float(x).expect("finite f64")
    }
    fn to_f64(&self) -> f64 {
        ratio_to_f64(self.numer(), self.denom())
    }
    fn from_i64(i: i64) -> Self {
        BigRational::from_integer(BigInt::from(i))
    }
}

fn ratio_to_f64(n: &BigInt, d: &BigInt) -> f64 {
    if n.is_zero() {
        return 0.0;
    }
    // scale so the integer quotient carries 64 significant bits
    let shift = d.bits() as i64 - n.bits() as i64 + 64;
    let q = if shift >= 0 {
        (n << shift as usize) / d
    } else {
        n / (d << (-shift) as usize)
    };
    scaled_to_f64(&q, -shift)
}

/// `x·2^e` rounded to the nearest double.
fn scaled_to_f64(x: &BigInt, e: i64) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    let bits = x.bits() as i64;
    let drop = (bits - 64).max(0);
    let top = (x.abs() >> drop as usize).to_f64().unwrap_or(f64::NAN);
    let mut v = top;
    let mut k = drop + e;
    while k > 0 {
        let step = k.min(1000);
        v *= 2f64.powi(step as i32);
        k -= step;
    }
    while k < 0 {
        let step = (-k).min(1000);
        v *= 2f64.powi(-(step as i32));
        k += step;
    }
    if x.is_negative() {
        -v
    } else {
        v
    }
}

/// Number of fractional bits carried by [`BigFixed`].
pub const FRAC_BITS: usize = 768;

/// Binary fixed point number with [`FRAC_BITS`] fractional bits and an
/// unbounded integer part.
#[derive(Clone, PartialEq, Eq)]
pub struct BigFixed(BigInt);

impl BigFixed {
    pub fn from_ratio(n: i64, d: i64) -> Self {
        BigFixed((BigInt::from(n) << FRAC_BITS) / BigInt::from(d))
    }

    /// log2 of the magnitude, or `None` for zero.
    pub fn log2_abs(&self) -> Option<f64> {
        if self.0.is_zero() {
            return None;
        }
        let bits = self.0.bits();
        let drop = bits.saturating_sub(64);
        let top = (self.0.abs() >> drop as usize).to_f64().unwrap_or(1.0);
        Some(top.log2() + drop as f64 - FRAC_BITS as f64)
    }
}

impl Debug for BigFixed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BigFixed({:e})", self.to_f64())
    }
}

impl Display for BigFixed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

impl PartialOrd for BigFixed {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.0.cmp(&other.0))
    }
}

impl Add for BigFixed {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        BigFixed(self.0 + rhs.0)
    }
}

impl Sub for BigFixed {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        BigFixed(self.0 - rhs.0)
    }
}

impl Mul for BigFixed {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        BigFixed((self.0 * rhs.0) >> FRAC_BITS)
    }
}

impl Div for BigFixed {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        BigFixed((self.0 << FRAC_BITS) / rhs.0)
    }
}

impl Neg for BigFixed {
    type Output = Self;
    fn neg(self) -> Self {
        BigFixed(-self.0)
    }
}

impl Zero for BigFixed {
    fn zero() -> Self {
        BigFixed(BigInt::zero())
    }
    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

impl One for BigFixed {
    fn one() -> Self {
        BigFixed(BigInt::one() << FRAC_BITS)
    }
}

impl Exact for BigFixed {
    fn from_f64(x: f64) -> Self {
        assert!(x.is_finite(), "BigFixed::from_f64 on non-finite value");
        if x == 0.0 {
            return BigFixed::zero();
        }
        let bits = x.to_bits();
        let sign = if bits >> 63 == 0 {
            Sign::Plus
        } else {
            Sign::Minus
        };
        let exp = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (mant, e) = if exp == 0 {
            (frac, -1074)
        } else {
            (frac | (1u64 << 52), exp - 1075)
        };
        let m = BigInt::from_biguint(sign, mant.into());
        let shift = e + FRAC_BITS as i64;
        BigFixed(if shift >= 0 {
            m << shift as usize
        } else {
            m >> (-shift) as usize
        })
    }
    fn mul_small(self, k: i64) -> Self {
        BigFixed(self.0 * k)
    }
    fn div_small(self, k: i64) -> Self {
        BigFixed(self.0 / k)
    }
    fn to_f64(&self) -> f64 {
        scaled_to_f64(&self.0, -(FRAC_BITS as i64))
    }
    fn from_i64(i: i64) -> Self {
        BigFixed(BigInt::from(i) << FRAC_BITS)
    }
}

/// Unevaluated sum of two doubles, about 106 bits of significand.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl DoubleDouble {
    pub const fn new(x: f64) -> Self {
        DoubleDouble { hi: x, lo: 0.0 }
    }
    pub fn value(self) -> f64 {
        self.hi + self.lo
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let (s, e) = two_sum(self.hi, rhs.hi);
        let (t, f) = two_sum(self.lo, rhs.lo);
        let (s, e) = two_sum(s, e + t);
        let (hi, lo) = two_sum(s, e + f);
        DoubleDouble { hi, lo }
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    fn neg(self) -> Self {
        DoubleDouble {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let (p, e) = two_prod(self.hi, rhs.hi);
        let e = e + (self.hi * rhs.lo + self.lo * rhs.hi);
        let (hi, lo) = two_sum(p, e);
        DoubleDouble { hi, lo }
    }
}

impl Div for DoubleDouble {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let q1 = self.hi / rhs.hi;
        let r = self - rhs * DoubleDouble::new(q1);
        let q2 = r.hi / rhs.hi;
        let r = r - rhs * DoubleDouble::new(q2);
        let q3 = r.hi / rhs.hi;
        let (hi, lo) = two_sum(q1, q2);
        DoubleDouble { hi, lo } + DoubleDouble::new(q3)
    }
}

impl PartialOrd for DoubleDouble {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            o => o,
        }
    }
}

impl Zero for DoubleDouble {
    fn zero() -> Self {
        DoubleDouble::new(0.0)
    }
    fn is_zero(&self) -> bool {
        self.hi == 0.0 && self.lo == 0.0
    }
}

impl One for DoubleDouble {
    fn one() -> Self {
        DoubleDouble::new(1.0)
    }
}

impl Exact for DoubleDouble {
    fn from_f64(x: f64) -> Self {
        DoubleDouble::new(x)
    }
    fn to_f64(&self) -> f64 {
        self.value()
    }
    fn from_i64(i: i64) -> Self {
        let hi = i as f64;
        let lo = (i - hi as i64) as f64;
        DoubleDouble { hi, lo }
    }
}
