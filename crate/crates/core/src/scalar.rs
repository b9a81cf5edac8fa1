//! Complex scalar types the coefficient solver can run on.
//!
//! Production runs use [`Complex64`]. [`ExtComplex`] carries a few hundred
//! bits of mantissa and exists to measure the truncation order of an
//! expansion without a double-precision rounding floor.

use core::fmt;

use astro_float::{BigFloat, RoundingMode};
use num_complex::Complex64;

/// Field operations needed by the coefficient solver.
pub trait Scalar: Clone + fmt::Debug + Send + Sync {
    fn zero() -> Self;
    fn from_c64(c: Complex64) -> Self;
    fn to_c64(&self) -> Complex64;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn scale(&self, f: f64) -> Self;
    fn is_zero(&self) -> bool;

    /// `self += a·b`.
    fn add_mul(&mut self, a: &Self, b: &Self) {
        *self = self.add(&a.mul(b));
    }

    fn neg(&self) -> Self {
        Self::zero().sub(self)
    }

    fn conj(&self) -> Self;

    fn norm(&self) -> f64 {
        self.to_c64().norm()
    }
}

impl Scalar for Complex64 {
    #[inline]
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    #[inline]
    fn from_c64(c: Complex64) -> Self {
        c
    }
    #[inline]
    fn to_c64(&self) -> Complex64 {
        *self
    }
    #[inline]
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    #[inline]
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    #[inline]
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    #[inline]
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    #[inline]
    fn scale(&self, f: f64) -> Self {
        self * f
    }
    #[inline]
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    #[inline]
    fn add_mul(&mut self, a: &Self, b: &Self) {
        *self += a * b;
    }
    #[inline]
    fn conj(&self) -> Self {
        Complex64::conj(self)
    }
}

/// Mantissa bits used by [`ExtComplex`].
pub const EXT_PRECISION: usize = 320;
const RM: RoundingMode = RoundingMode::None;

/// Complex number with [`EXT_PRECISION`]-bit real and imaginary parts.
#[derive(Clone)]
pub struct ExtComplex {
    re: BigFloat,
    im: BigFloat,
}

fn big(x: f64) -> BigFloat {
    BigFloat::from_f64(x, EXT_PRECISION)
}

fn big_to_f64(b: &BigFloat) -> f64 {
    if b.is_zero() {
        return 0.0;
    }
    if b.is_nan() {
        return f64::NAN;
    }
    if b.is_inf_pos() {
        return f64::INFINITY;
    }
    if b.is_inf_neg() {
        return f64::NEG_INFINITY;
    }
    let Some((words, _, sign, exp, _)) = b.as_raw_parts() else {
        return f64::NAN;
    };
    // value = 0.m × 2^exp with the most significant word last
    let two64 = 18446744073709551616.0f64;
    let top = words[words.len() - 1] as f64 / two64;
    let next = if words.len() > 1 {
        words[words.len() - 2] as f64 / two64 / two64
    } else {
        0.0
    };
    let mut v = top + next;
    let mut e = exp as i64;
    while e > 512 {
        v *= 2f64.powi(512);
        e -= 512;
    }
    while e < -512 {
        v *= 2f64.powi(-512);
        e += 512;
    }
    v *= 2f64.powi(e as i32);
    if sign == astro_float::Sign::Neg {
        -v
    } else {
        v
    }
}

impl ExtComplex {
    pub fn new(re: f64, im: f64) -> Self {
        ExtComplex {
            re: big(re),
            im: big(im),
        }
    }
}

impl fmt::Debug for ExtComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.to_c64())
    }
}

impl Scalar for ExtComplex {
    fn zero() -> Self {
        ExtComplex::new(0.0, 0.0)
    }
    fn from_c64(c: Complex64) -> Self {
        ExtComplex::new(c.re, c.im)
    }
    fn to_c64(&self) -> Complex64 {
        Complex64::new(big_to_f64(&self.re), big_to_f64(&self.im))
    }
    fn add(&self, o: &Self) -> Self {
        ExtComplex {
            re: self.re.add(&o.re, EXT_PRECISION, RM),
            im: self.im.add(&o.im, EXT_PRECISION, RM),
        }
    }
    fn sub(&self, o: &Self) -> Self {
        ExtComplex {
            re: self.re.sub(&o.re, EXT_PRECISION, RM),
            im: self.im.sub(&o.im, EXT_PRECISION, RM),
        }
    }
    fn mul(&self, o: &Self) -> Self {
        let p = EXT_PRECISION;
        let rr = self.re.mul(&o.re, p, RM);
        let ii = self.im.mul(&o.im, p, RM);
        let ri = self.re.mul(&o.im, p, RM);
        let ir = self.im.mul(&o.re, p, RM);
        ExtComplex {
            re: rr.sub(&ii, p, RM),
            im: ri.add(&ir, p, RM),
        }
    }
    fn div(&self, o: &Self) -> Self {
        let p = EXT_PRECISION;
        let den = o.re.mul(&o.re, p, RM).add(&o.im.mul(&o.im, p, RM), p, RM);
        let num = self.mul(&o.conj());
        ExtComplex {
            re: num.re.div(&den, p, RM),
            im: num.im.div(&den, p, RM),
        }
    }
    fn scale(&self, f: f64) -> Self {
        let b = big(f);
        ExtComplex {
            re: self.re.mul(&b, EXT_PRECISION, RM),
            im: self.im.mul(&b, EXT_PRECISION, RM),
        }
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
    fn conj(&self) -> Self {
        ExtComplex {
            re: self.re.clone(),
            im: self.im.neg(),
        }
    }
}
