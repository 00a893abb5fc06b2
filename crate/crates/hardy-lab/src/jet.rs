//! Truncated Taylor series ("jets") for exact derivatives of composed profiles.
//!
//! A jet of order `N` at `u₀` stores `c_k = f^{(k)}(u₀)/k!` for `k ≤ N`.

use std::ops::{Add, Mul, Neg, Sub};

#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    c: Vec<f64>,
}

impl Jet {
    pub fn constant(v: f64, order: usize) -> Self {
        let mut c = vec![0.0; order + 1];
        c[0] = v;
        Self { c }
    }

    /// The identity function expanded at `u`.
    pub fn variable(u: f64, order: usize) -> Self {
        let mut c = vec![0.0; order + 1];
        c[0] = u;
        if order > 0 {
            c[1] = 1.0;
        }
        Self { c }
    }

    pub fn from_coeffs(c: Vec<f64>) -> Self {
        assert!(!c.is_empty());
        Self { c }
    }

    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    /// `f^{(k)}(u₀)`.
    pub fn derivative(&self, k: usize) -> f64 {
        self.c.get(k).map_or(0.0, |&ck| ck * factorial(k))
    }

    pub fn derivatives(&self) -> Vec<f64> {
        (0..self.c.len()).map(|k| self.derivative(k)).collect()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { c: self.c.iter().map(|x| x * s).collect() }
    }

    pub fn add_const(&self, a: f64) -> Self {
        let mut c = self.c.clone();
        c[0] += a;
        Self { c }
    }

    pub fn powi(&self, k: u32) -> Self {
        let mut acc = Jet::constant(1.0, self.order());
        let mut base = self.clone();
        let mut e = k;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    pub fn exp(&self) -> Self {
        let n = self.c.len();
        let mut b = vec![0.0; n];
        b[0] = self.c[0].exp();
        for k in 1..n {
            let s: f64 = (1..=k).map(|j| j as f64 * self.c[j] * b[k - j]).sum();
            b[k] = s / k as f64;
        }
        Self { c: b }
    }

    /// Square root; requires a positive constant term.
    pub fn sqrt(&self) -> Self {
        let n = self.c.len();
        let mut b = vec![0.0; n];
        b[0] = self.c[0].sqrt();
        for k in 1..n {
            let s: f64 = (1..k).map(|j| b[j] * b[k - j]).sum();
            b[k] = (self.c[k] - s) / (2.0 * b[0]);
        }
        Self { c: b }
    }

    /// `1/self`; requires a nonzero constant term.
    pub fn recip(&self) -> Self {
        let n = self.c.len();
        let mut b = vec![0.0; n];
        b[0] = 1.0 / self.c[0];
        for k in 1..n {
            let s: f64 = (1..=k).map(|j| self.c[j] * b[k - j]).sum();
            b[k] = -s * b[0];
        }
        Self { c: b }
    }

    /// Substitutes this jet into a power series `Σ a_j δ^j` expanded at `self.value()`.
    pub fn compose(&self, series: &[f64]) -> Self {
        let order = self.order();
        let mut delta = self.clone();
        delta.c[0] = 0.0;
        let mut acc = Jet::constant(0.0, order);
        for &a in series.iter().take(order + 1).rev() {
            acc = &acc * &delta;
            acc.c[0] += a;
        }
        acc
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, o: &Jet) -> Jet {
        Jet { c: self.c.iter().zip(&o.c).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, o: &Jet) -> Jet {
        Jet { c: self.c.iter().zip(&o.c).map(|(a, b)| a - b).collect() }
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, o: &Jet) -> Jet {
        let n = self.c.len().min(o.c.len());
        let mut c = vec![0.0; n];
        for (i, &a) in self.c.iter().enumerate().take(n) {
            if a == 0.0 {
                continue;
            }
            for (j, &b) in o.c.iter().enumerate().take(n - i) {
                c[i + j] += a * b;
            }
        }
        Jet { c }
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

pub fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_derivatives_match_hermite() {
        // d^k/du^k e^{-u^2} = (-1)^k H_k(u) e^{-u^2}
        let u = 0.7;
        let x = Jet::variable(u, 6);
        let g = (&x * &x).scale(-1.0).exp();
        let mut h = vec![1.0, 2.0 * u];
        for k in 1..6 {
            let next = 2.0 * u * h[k] - 2.0 * k as f64 * h[k - 1];
            h.push(next);
        }
        for (k, hk) in h.iter().enumerate() {
            let want = if k % 2 == 0 { 1.0 } else { -1.0 } * hk * (-u * u).exp();
            assert!((g.derivative(k) - want).abs() < 1e-12 * want.abs().max(1.0), "k={k}");
        }
    }

    #[test]
    fn sqrt_and_recip_invert() {
        let x = Jet::variable(2.3, 5);
        let s = x.sqrt();
        let back = &s * &s;
        for (a, b) in back.coeffs().iter().zip(x.coeffs()) {
            assert!((a - b).abs() < 1e-14);
        }
        let one = &x * &x.recip();
        assert!((one.value() - 1.0).abs() < 1e-15);
        assert!(one.coeffs()[1..].iter().all(|c| c.abs() < 1e-14));
    }

    #[test]
    fn compose_matches_chain_rule() {
        // sin(u^2) at u = 0.5 via its Taylor series at v = 0.25
        let u = 0.5;
        let x = Jet::variable(u, 3);
        let v = &x * &x;
        let v0 = v.value();
        let series = [v0.sin(), v0.cos(), -v0.sin() / 2.0, -v0.cos() / 6.0];
        let j = v.compose(&series);
        let d1 = 2.0 * u * (u * u).cos();
        let d2 = 2.0 * (u * u).cos() - 4.0 * u * u * (u * u).sin();
        assert!((j.derivative(1) - d1).abs() < 1e-14);
        assert!((j.derivative(2) - d2).abs() < 1e-14);
    }

    #[test]
    fn powi_matches_repeated_product() {
        let x = Jet::variable(1.1, 4).add_const(0.3);
        let p = x.powi(5);
        let mut q = Jet::constant(1.0, 4);
        for _ in 0..5 {
            q = &q * &x;
        }
        for (a, b) in p.coeffs().iter().zip(q.coeffs()) {
            assert!((a - b).abs() < 1e-12 * b.abs().max(1.0));
        }
    }
}
