//! Exact floating-point summation with non-overlapping partials.

use crate::dd::Dd;

/// The exact sum of the values added so far, kept as non-overlapping partials in
/// increasing magnitude. [`ExactSum::value`] is the correctly rounded total, so it
/// depends only on the multiset of summands and not on their order or grouping.
#[derive(Clone, Debug, Default, PartialEq)]
pub(crate) struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    pub fn add(&mut self, mut x: f64) {
        let mut i = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    /// Adds `a·b` exactly.
    pub fn add_product(&mut self, a: f64, b: f64) {
        let p = Dd::prod(a, b);
        self.add(p.hi);
        self.add(p.lo);
    }

    pub fn merge(&mut self, other: &ExactSum) {
        for &p in &other.partials {
            self.add(p);
        }
    }

    /// Correctly rounded total.
    pub fn value(&self) -> f64 {
        let p = &self.partials;
        let Some(&top) = p.last() else {
            return 0.0;
        };
        let mut n = p.len() - 1;
        let (mut hi, mut lo) = (top, 0.0);
        while n > 0 {
            let x = hi;
            let y = p[n - 1];
            n -= 1;
            hi = x + y;
            lo = y - (hi - x);
            if lo != 0.0 {
                break;
            }
        }
        // round half to even needs the sign of what lies below `lo`
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
        hi
    }

    /// Total rounded to double-double.
    pub fn to_dd(&self) -> Dd {
        let hi = self.value();
        let mut rest = self.clone();
        rest.add(-hi);
        Dd { hi, lo: rest.value() }
    }
}
