//! The band-limited admissible profile with prescribed flatness at the origin.
//!
//! `φ(x) = ∫ ξ⁻¹ Δ_h^m Θ(ξ) e^{iξx} dξ`, normalized to `φ(0) = 1`, where `Θ` is an
//! odd pair of bumps and `Δ_h^m` the m-fold symmetric difference with `h = 1/(8m)`.
//! The spectral density is supported in `[1/8, 7/8]` on each half-line.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rayon::prelude::*;
use rustfft::FftPlanner;

use super::ProfileError;
use crate::dd::Dd;
use crate::jet::{factorial, Jet};

/// Period of the trapezoid rule in `x`; fixes the frequency spacing `2π/P`.
const PERIOD: f64 = 16384.0;
/// Samples are kept on `[0, U_MAX]`; beyond it values come from direct quadrature.
pub const U_MAX: f64 = 4096.0;
/// Midpoint nodes on `[1/8, 7/8]` for pointwise evaluation.
const DIRECT_NODES: usize = 8192;
const SUPPORT: (f64, f64) = (0.125, 0.875);

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `φ₀(x) = exp(−1/(1 − 16x²))` on `|x| < 1/4`.
fn bump(x: Dd) -> Dd {
    let y = x * 4.0;
    let one_minus = -(y * y) + 1.0;
    if one_minus.hi <= 0.0 {
        return Dd::ZERO;
    }
    (-one_minus.recip()).exp()
}

/// `Δ_h^mΘ(ξ) = Σ_j C(m,j)(−1)^j Θ(ξ + (m−2j)h)` with `h = 1/(8m)`.
///
/// The terms exceed the result by up to eight orders of magnitude, so the bump values
/// and the sum are carried in double-double arithmetic.
struct DeltaTheta {
    coeffs: Vec<f64>,
    shifts: Vec<Dd>,
}

impl DeltaTheta {
    fn new(m: usize) -> Self {
        let h = Dd::ONE.div(Dd::from_f64(8.0 * m as f64));
        Self {
            coeffs: (0..=m).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 } * binomial(m, j)).collect(),
            shifts: (0..=m).map(|j| h * (m as f64 - 2.0 * j as f64)).collect(),
        }
    }

    fn eval(&self, xi: f64) -> f64 {
        self.eval_dd(xi).to_f64()
    }

    fn eval_dd(&self, xi: f64) -> Dd {
        if xi.abs() <= SUPPORT.0 || xi.abs() >= SUPPORT.1 {
            return Dd::ZERO;
        }
        let mut acc = Dd::ZERO;
        for (&c, &s) in self.coeffs.iter().zip(&self.shifts) {
            let x = s + xi;
            acc = acc + (bump(x + 0.5) - bump(x + (-0.5))) * c;
        }
        acc
    }

    /// Spectral density `g(ξ) = ξ⁻¹Δ_h^mΘ(ξ)` (even in ξ).
    fn density(&self, xi: f64) -> f64 {
        if xi == 0.0 {
            0.0
        } else {
            self.eval(xi) / xi
        }
    }

    /// `g(i·δξ)` for `i < len`.
    fn grid(&self, len: usize, dxi: f64) -> Vec<f64> {
        let lo = (SUPPORT.0 / dxi).floor() as usize;
        let hi = ((SUPPORT.1 / dxi).ceil() as usize + 1).min(len);
        let inside: Vec<f64> = (lo..hi).into_par_iter().map(|i| self.density(i as f64 * dxi)).collect();
        let mut g = vec![0.0; len];
        g[lo..hi].copy_from_slice(&inside);
        g
    }
}

#[derive(Debug)]
pub struct BandLimited {
    m: usize,
    step: f64,
    raw_zero: f64,
    /// Density on the FFT frequency grid.
    g: Vec<f64>,
    values: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
    /// Midpoint nodes and `2·g·δξ/raw_zero` weights for pointwise evaluation.
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// `|φ^{(ν)}(0)|` for `ν = 1..=m`.
    certificate: Vec<f64>,
}

/// `|φ^{(ν)}(0)|` for `ν = 1..=m` from the midpoint rule, with moments `∫ ξ^{ν−1}Δ_h^mΘ`
/// accumulated in double-double precision and normalized by the same rule's `φ(0)`.
/// Odd orders vanish identically since `φ` is even.
fn flatness_certificate(delta: &DeltaTheta, nodes: &[f64], m: usize) -> Vec<f64> {
    let mut moments = vec![Dd::ZERO; m + 1];
    for &x in nodes {
        let mut term = delta.eval_dd(x).div(Dd::from_f64(x));
        for mk in moments.iter_mut() {
            *mk = *mk + term;
            term = term * x;
        }
    }
    (1..=m)
        .map(|nu| if nu % 2 == 1 { 0.0 } else { moments[nu].div(moments[0]).to_f64().abs() })
        .collect()
}

impl BandLimited {
    /// Builds the profile of order `m` with `samples_per_unit` samples per unit length.
    pub fn build(m: usize, samples_per_unit: usize) -> Result<Self, ProfileError> {
        if m < 2 || !m.is_multiple_of(2) {
            return Err(ProfileError::InvalidOrder(m));
        }
        if !samples_per_unit.is_power_of_two() || samples_per_unit < 4 {
            return Err(ProfileError::InvalidResolution(samples_per_unit));
        }
        let step = 1.0 / samples_per_unit as f64;
        let len = (PERIOD / step) as usize;
        let dxi = 2.0 * PI / PERIOD;
        let delta = DeltaTheta::new(m);
        let g = delta.grid(len, dxi);
        let n_keep = (U_MAX / step) as usize + 1;

        let raw = derivative_samples(&g, dxi, 0, n_keep);
        let raw_zero = raw[0];
        // Same rule on every other node: the integral must already be resolved.
        let coarse: f64 = 2.0 * 2.0 * dxi * g.iter().step_by(2).sum::<f64>();
        if !((raw_zero - coarse).abs() <= 1e-7 * raw_zero.abs()) || raw_zero == 0.0 {
            return Err(ProfileError::QuadratureNotConverged { fine: raw_zero, coarse });
        }
        let values: Vec<f64> = raw.iter().map(|v| v / raw_zero).collect();
        let d1: Vec<f64> = derivative_samples(&g, dxi, 1, n_keep).iter().map(|v| v / raw_zero).collect();
        let d2: Vec<f64> = derivative_samples(&g, dxi, 2, n_keep).iter().map(|v| v / raw_zero).collect();

        let hq = (SUPPORT.1 - SUPPORT.0) / DIRECT_NODES as f64;
        let nodes: Vec<f64> = (0..DIRECT_NODES).map(|i| SUPPORT.0 + (i as f64 + 0.5) * hq).collect();
        let weights: Vec<f64> = nodes.iter().map(|&x| 2.0 * delta.density(x) * hq / raw_zero).collect();
        let certificate = flatness_certificate(&delta, &nodes, m);
        Ok(Self { m, step, raw_zero, g, values, d1, d2, nodes, weights, certificate })
    }

    pub fn order(&self) -> usize {
        self.m
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Unnormalized `φ(0)`.
    pub fn raw_zero(&self) -> f64 {
        self.raw_zero
    }

    pub fn samples(&self) -> &[f64] {
        &self.values
    }

    /// `|φ^{(ν)}(0)|` for `ν = 1..=m`.
    pub fn vanishing_certificate(&self) -> &[f64] {
        &self.certificate
    }

    /// Quintic Hermite interpolation of the stored samples (direct quadrature beyond `U_MAX`).
    pub fn eval(&self, u: f64) -> f64 {
        let u = u.abs();
        if u >= U_MAX {
            return self.direct_derivative(u, 0);
        }
        let s = u / self.step;
        let j = (s.floor() as usize).min(self.values.len() - 2);
        let t = s - j as f64;
        let h = self.step;
        let (t2, t3) = (t * t, t * t * t);
        let (t4, t5) = (t3 * t, t3 * t2);
        let h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
        let h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
        let h2 = 0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5;
        let h3 = 0.5 * t3 - t4 + 0.5 * t5;
        let h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
        let h5 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
        h0 * self.values[j]
            + h * h1 * self.d1[j]
            + h * h * h2 * self.d2[j]
            + h * h * h3 * self.d2[j + 1]
            + h * h4 * self.d1[j + 1]
            + h5 * self.values[j + 1]
    }

    /// `φ^{(k)}(u)` by midpoint quadrature of `2∫ g(ξ) ξ^k cos(ξu + kπ/2) dξ`.
    pub fn direct_derivative(&self, u: f64, k: usize) -> f64 {
        let phase = k as f64 * PI / 2.0;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * x.powi(k as i32) * (x * u + phase).cos())
            .sum()
    }

    /// Taylor coefficients `φ^{(k)}(u)/k!`, `k ≤ order`; the constant term is interpolated.
    pub fn taylor(&self, u: f64, order: usize) -> Vec<f64> {
        let mut c = vec![0.0; order + 1];
        c[0] = self.eval(u);
        if order == 0 {
            return c;
        }
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            let (s, co) = (x * u).sin_cos();
            let mut xk = 1.0;
            for (k, ck) in c.iter_mut().enumerate().skip(1) {
                xk *= x;
                // cos(θ + kπ/2) cycles through cos, −sin, −cos, sin
                let trig = match k % 4 {
                    0 => co,
                    1 => -s,
                    2 => -co,
                    _ => s,
                };
                *ck += w * xk * trig;
            }
        }
        for (k, ck) in c.iter_mut().enumerate().skip(1) {
            *ck /= factorial(k);
        }
        c
    }

    pub fn jet(&self, x: &Jet) -> Jet {
        let u0 = x.value();
        let mut series = self.taylor(u0.abs(), x.order());
        if u0 < 0.0 {
            for (k, c) in series.iter_mut().enumerate() {
                if k % 2 == 1 {
                    *c = -*c;
                }
            }
        }
        x.compose(&series)
    }

    /// `sup_{u≥0} (1+u)^N max_{k≤N} |d^k/du^k φ(a·u)|` over the sample grid.
    pub fn norm_dilated(&self, n: usize, a: f64) -> f64 {
        self.norm_dilates(n, &[a])[0]
    }

    /// [`Self::norm_dilated`] for several dilations sharing one set of derivative grids.
    pub fn norm_dilates(&self, n: usize, dilations: &[f64]) -> Vec<f64> {
        let dxi = 2.0 * PI / PERIOD;
        let g = &self.g;
        let keep = self.values.len();
        let grids: Vec<Vec<f64>> = (0..=n)
            .into_par_iter()
            .map(|k| derivative_samples(g, dxi, k, keep).iter().map(|v| v.abs() / self.raw_zero.abs()).collect())
            .collect();
        dilations
            .iter()
            .map(|&a| {
                let mut best = vec![0.0f64; keep];
                for (k, dk) in grids.iter().enumerate() {
                    let scale = a.powi(k as i32);
                    for (b, v) in best.iter_mut().zip(dk) {
                        *b = b.max(scale * v);
                    }
                }
                best.iter()
                    .enumerate()
                    .map(|(j, b)| (1.0 + j as f64 * self.step / a).powi(n as i32) * b)
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    /// Fraction of `Σ|φ̂|` outside `[−A, A]`, from a DFT of the even extension of the samples.
    pub fn fourier_mass_outside(&self, a: f64) -> f64 {
        fourier_mass_outside(&self.values, self.step, a)
    }
}

/// `φ^{(k)}(x_j)`, `x_j = j·step`, for the trapezoid rule with spacing `dxi` (unnormalized).
fn derivative_samples(g: &[f64], dxi: f64, k: usize, keep: usize) -> Vec<f64> {
    let len = g.len();
    let ik = match k % 4 {
        0 => Complex::new(1.0, 0.0),
        1 => Complex::new(0.0, 1.0),
        2 => Complex::new(-1.0, 0.0),
        _ => Complex::new(0.0, -1.0),
    };
    let mut buf: Vec<Complex<f64>> =
        (0..len).map(|i| ik * (g[i] * (i as f64 * dxi).powi(k as i32))).collect();
    FftPlanner::new().plan_fft_inverse(len).process(&mut buf);
    buf.iter().take(keep).map(|c| 2.0 * dxi * c.re).collect()
}

/// Share of DFT magnitude at frequencies `|ω| > a` for samples of an even function on `[0, U]`.
pub fn fourier_mass_outside(samples: &[f64], step: f64, a: f64) -> f64 {
    // Resample to spacing ≤ 1/4 so that the DFT band comfortably exceeds the support.
    let stride = ((0.25 / step).floor() as usize).max(1);
    let half: Vec<f64> = samples.iter().step_by(stride).copied().collect();
    let dx = step * stride as f64;
    let m = half.len();
    let len = 2 * (m - 1);
    if len == 0 {
        return 0.0;
    }
    let mut buf: Vec<Complex<f64>> = (0..len)
        .map(|i| Complex::new(if i < m { half[i] } else { half[len - i] }, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let (mut inside, mut outside) = (0.0, 0.0);
    for (i, c) in buf.iter().enumerate() {
        let k = if i <= len / 2 { i as f64 } else { i as f64 - len as f64 };
        let omega = 2.0 * PI * k / (len as f64 * dx);
        if omega.abs() > a {
            outside += c.norm();
        } else {
            inside += c.norm();
        }
    }
    outside / (inside + outside)
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;

    #[test]
    fn density_support_and_parity() {
        for &m in &[2usize, 6] {
            let delta = DeltaTheta::new(m);
            for i in 0..200 {
                let xi = i as f64 / 100.0;
                let g = delta.density(xi);
                if xi <= 0.125 || xi >= 0.875 {
                    assert_eq!(g, 0.0, "m={m} ξ={xi}");
                }
                assert!((g - delta.density(-xi)).abs() <= 1e-13 * g.abs().max(1.0));
            }
        }
    }

    #[test]
    fn difference_matches_high_precision_expansion() {
        // binomial expansion of the m-fold difference evaluated with 50 significant digits
        let oracle = [
            (2, 0.3, -0.20888402911199118),
            (2, 0.5, 0.2085646061114311),
            (2, 0.61, 0.21198405713597462),
            (2, 0.8, -0.14074798704123069),
            (12, 0.3, -3.4884015289847525),
            (12, 0.5, -8.1488115054886659e-6),
            (12, 0.61, 0.013824195045208415),
            (12, 0.8, -0.41847340606674409),
        ];
        for (m, xi, want) in oracle {
            let got = DeltaTheta::new(m).eval(xi);
            assert!((got - want).abs() <= 1e-13 * want.abs().max(1e-3), "m={m} ξ={xi}: {got} vs {want}");
        }
    }

    #[test]
    fn rejects_odd_order() {
        assert!(matches!(BandLimited::build(3, 64), Err(ProfileError::InvalidOrder(3))));
    }

    #[test]
    fn interpolation_matches_quadrature() {
        let bl = BandLimited::build(4, 64).unwrap();
        for &u in &[0.0, 0.3, 1.7, 13.37, 250.5, 1234.567] {
            let a = bl.eval(u);
            let b = bl.direct_derivative(u, 0);
            assert!((a - b).abs() < 1e-9, "u={u}: {a} vs {b}");
        }
        assert_eq!(bl.eval(0.0), 1.0);
        assert!(bl.raw_zero() < 0.0, "the unnormalized value at 0 is negative");
    }

    #[test]
    fn taylor_matches_samples() {
        let bl = BandLimited::build(2, 64).unwrap();
        let j = 77 * 64;
        let c = bl.taylor(77.0, 2);
        assert!((c[1] - bl.d1[j]).abs() < 1e-9);
        assert!((2.0 * c[2] - bl.d2[j]).abs() < 1e-9);
    }
}
