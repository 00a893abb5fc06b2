//! Double-double arithmetic (about 32 significant digits) for cancellation-heavy sums.

use std::ops::{Add, Mul, Neg, Sub};

/// Unevaluated sum `hi + lo` with `|lo| ≤ ulp(hi)/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

#[allow(clippy::approx_constant)]
const LN2: Dd = Dd { hi: 0.6931471805599453, lo: 2.3190468138462996e-17 };

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn from_f64(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    /// Exact product of two doubles.
    pub fn prod(a: f64, b: f64) -> Self {
        let (hi, lo) = two_prod(a, b);
        Self { hi, lo }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn recip(self) -> Self {
        Self::ONE.div(self)
    }

    pub fn div(self, b: Self) -> Self {
        let q1 = self.hi / b.hi;
        let r = self - b * q1;
        let q2 = r.hi / b.hi;
        let r = r - b * q2;
        let q3 = r.hi / b.hi;
        let (s, e) = quick_two_sum(q1, q2);
        Self { hi: s, lo: e } + q3
    }

    fn mul_pow2(self, k: i32) -> Self {
        let s = 2f64.powi(k);
        Self { hi: self.hi * s, lo: self.lo * s }
    }

    /// `e^x`, by reduction `x = k ln 2 + 2^{10} r` and a Taylor series in `r`.
    pub fn exp(self) -> Self {
        if self.hi < -745.0 {
            return Self::ZERO;
        }
        let k = (self.hi / LN2.hi).round();
        let r = (self - LN2 * k).mul_pow2(-10);
        // |r| < 3.4e-4, so twelve terms leave a remainder below 1e-45
        let mut term = r;
        let mut sum = r;
        for n in 2..=12 {
            term = (term * r).div(Self::from_f64(n as f64));
            sum = sum + term;
        }
        for _ in 0..10 {
            // e^{2r} − 1 = (e^r − 1)(e^r + 1)
            sum = sum * (sum + 2.0);
        }
        (sum + 1.0).mul_pow2_checked(k as i32)
    }

    fn mul_pow2_checked(self, k: i32) -> Self {
        // split to stay clear of overflow in 2^k for subnormal results
        if k < -1000 {
            self.mul_pow2(-1000).mul_pow2(k + 1000)
        } else {
            self.mul_pow2(k)
        }
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, y: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, y.hi);
        let (t, f) = two_sum(self.lo, y.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Add<f64> for Dd {
    type Output = Dd;
    fn add(self, y: f64) -> Dd {
        let (s, e) = two_sum(self.hi, y);
        let (hi, lo) = quick_two_sum(s, e + self.lo);
        Dd { hi, lo }
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, y: Dd) -> Dd {
        self + (-y)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, y: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, y.hi);
        let (hi, lo) = quick_two_sum(p, e + (self.hi * y.lo + self.lo * y.hi));
        Dd { hi, lo }
    }
}

impl Mul<f64> for Dd {
    type Output = Dd;
    fn mul(self, y: f64) -> Dd {
        let (p, e) = two_prod(self.hi, y);
        let (hi, lo) = quick_two_sum(p, e + self.lo * y);
        Dd { hi, lo }
    }
}
