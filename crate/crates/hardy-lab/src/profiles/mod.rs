//! Even profile functions `φ: [0, ∞) → ℝ` used in the functional calculus `φ(t√L)`.
//!
//! A [`Profile`] is an expression tree over a few primitives (Gaussian, exponential,
//! the band-limited admissible function, sampled data, Stein's `Φ`) closed under
//! dilation, scaling, sums and products. Evaluating on a [`Jet`] yields exact
//! derivatives of any order for analytic pieces.

mod bandlimited;
mod stein;

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bandlimited::{fourier_mass_outside, BandLimited, U_MAX};
pub use stein::{stein_eta, stein_moment, stein_phi, stein_phi_derivative};

use crate::jet::{factorial, Jet};
use crate::quadrature::QuadratureNotConverged;

/// Tolerance for numerically certified vanishing derivatives.
pub const VANISHING_TOL: f64 = 1e-6;
/// Default sample density of band-limited profiles.
pub const DEFAULT_SAMPLES_PER_UNIT: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("order m = {0} must be an even integer ≥ 2")]
    InvalidOrder(usize),
    #[error("samples per unit {0} must be a power of two ≥ 4")]
    InvalidResolution(usize),
    #[error("spectral quadrature not resolved: {fine:.6e} vs {coarse:.6e} at half resolution")]
    QuadratureNotConverged { fine: f64, coarse: f64 },
    #[error(transparent)]
    Adaptive(#[from] QuadratureNotConverged),
    #[error("vanishing order {certified} is below the required {required}")]
    InsufficientVanishingOrder { required: usize, certified: usize },
    #[error("derivative of order {order} is not grid-converged (relative change {change:.3e})")]
    GridTooCoarse { order: usize, change: f64 },
    #[error("profile must satisfy φ(0) = 1, got {0}")]
    NotNormalized(f64),
    #[error("exponent p = {0} must lie in (0, ∞)")]
    InvalidExponent(f64),
    #[error("sampled profile needs at least 4 finite samples and a positive step")]
    InvalidSamples,
}

#[derive(Debug)]
enum Expr {
    Const(f64),
    Monomial(u32),
    Gaussian,
    Exponential,
    SmoothExponential,
    BandLimited(Arc<BandLimited>),
    Sampled(Arc<Sampled>),
    Stein,
    Dilate(Profile, f64),
    Scale(Profile, f64),
    Add(Profile, Profile),
    Sub(Profile, Profile),
    Mul(Profile, Profile),
    RychkovPsi0(Profile, u32),
    RychkovPsi(Profile, u32),
}

/// An even real profile with exact (or certified numerical) derivatives.
#[derive(Clone, Debug)]
pub struct Profile {
    expr: Arc<Expr>,
    name: String,
}

type Cache = Mutex<HashMap<(usize, usize), Arc<BandLimited>>>;

fn cache() -> &'static Cache {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl Profile {
    fn new(expr: Expr, name: impl Into<String>) -> Self {
        Self { expr: Arc::new(expr), name: name.into() }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(Expr::Const(c), format!("const({c})"))
    }

    /// `u^k` (even `k` keeps the profile even).
    pub fn monomial(k: u32) -> Self {
        Self::new(Expr::Monomial(k), format!("u^{k}"))
    }

    /// `e^{−u²}`.
    pub fn gaussian() -> Self {
        Self::new(Expr::Gaussian, "gaussian")
    }

    /// `e^{−|u|}`.
    pub fn exponential() -> Self {
        Self::new(Expr::Exponential, "exp")
    }

    /// `e^{1−√(1+u²)}`: smooth at the origin and exponentially decaying.
    pub fn smooth_exponential() -> Self {
        Self::new(Expr::SmoothExponential, "smooth-exp")
    }

    /// `Φ(u) = ∫₁^∞ η(s) e^{−s|u|} ds`.
    pub fn stein() -> Self {
        Self::new(Expr::Stein, "stein")
    }

    /// The band-limited admissible profile of order `m` (cached per resolution).
    pub fn admissible(m: usize) -> Result<Self, ProfileError> {
        Self::admissible_with(m, DEFAULT_SAMPLES_PER_UNIT)
    }

    pub fn admissible_with(m: usize, samples_per_unit: usize) -> Result<Self, ProfileError> {
        let key = (m, samples_per_unit);
        let cached = cache().lock().expect("profile cache poisoned").get(&key).cloned();
        let bl = match cached {
            Some(bl) => bl,
            None => {
                let bl = Arc::new(BandLimited::build(m, samples_per_unit)?);
                cache().lock().expect("profile cache poisoned").insert(key, bl.clone());
                bl
            }
        };
        Ok(Self::new(Expr::BandLimited(bl), format!("admissible(m={m})")))
    }

    pub fn sampled(samples: Vec<f64>, step: f64, name: impl Into<String>) -> Result<Self, ProfileError> {
        Ok(Self::new(Expr::Sampled(Arc::new(Sampled::new(samples, step)?)), name))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// `u ↦ φ(a·u)`.
    pub fn dilate(&self, a: f64) -> Self {
        Self::new(Expr::Dilate(self.clone(), a), format!("{}({a}·)", self.name))
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::new(Expr::Scale(self.clone(), c), format!("{c}·{}", self.name))
    }

    pub fn add(&self, o: &Profile) -> Self {
        Self::new(Expr::Add(self.clone(), o.clone()), format!("({} + {})", self.name, o.name))
    }

    pub fn sub(&self, o: &Profile) -> Self {
        Self::new(Expr::Sub(self.clone(), o.clone()), format!("({} − {})", self.name, o.name))
    }

    pub fn mul(&self, o: &Profile) -> Self {
        Self::new(Expr::Mul(self.clone(), o.clone()), format!("({}·{})", self.name, o.name))
    }

    pub fn bandlimited(&self) -> Option<&Arc<BandLimited>> {
        match &*self.expr {
            Expr::BandLimited(bl) => Some(bl),
            _ => None,
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        match &*self.expr {
            Expr::Const(c) => *c,
            Expr::Monomial(k) => u.abs().powi(*k as i32),
            Expr::Gaussian => (-u * u).exp(),
            Expr::Exponential => (-u.abs()).exp(),
            Expr::SmoothExponential => (1.0 - (1.0 + u * u).sqrt()).exp(),
            Expr::BandLimited(bl) => bl.eval(u),
            Expr::Sampled(s) => s.eval(u),
            Expr::Stein => stein_phi(u).unwrap_or(f64::NAN),
            Expr::Dilate(p, a) => p.eval(a * u),
            Expr::Scale(p, c) => c * p.eval(u),
            Expr::Add(p, q) => p.eval(u) + q.eval(u),
            Expr::Sub(p, q) => p.eval(u) - q.eval(u),
            Expr::Mul(p, q) => p.eval(u) * q.eval(u),
            Expr::RychkovPsi0(phi, n) => rychkov_psi0_value(phi.eval(u), *n),
            Expr::RychkovPsi(phi, n) => rychkov_psi_value(phi.eval(u), phi.eval(2.0 * u), *n),
        }
    }

    /// Composition with a jet: Taylor expansion of `φ ∘ x`.
    pub fn eval_jet(&self, x: &Jet) -> Jet {
        let order = x.order();
        match &*self.expr {
            Expr::Const(c) => Jet::constant(*c, order),
            Expr::Monomial(k) => {
                if *k % 2 == 1 && x.value() < 0.0 {
                    x.powi(*k).scale(-1.0)
                } else {
                    x.powi(*k)
                }
            }
            Expr::Gaussian => (x * x).scale(-1.0).exp(),
            Expr::Exponential => {
                if x.value() < 0.0 {
                    x.exp()
                } else {
                    x.scale(-1.0).exp()
                }
            }
            Expr::SmoothExponential => (x * x).add_const(1.0).sqrt().scale(-1.0).add_const(1.0).exp(),
            Expr::BandLimited(bl) => bl.jet(x),
            Expr::Sampled(s) => x.compose(&s.taylor(x.value(), order)),
            Expr::Stein => {
                let u0 = x.value();
                let series: Vec<f64> = (0..=order)
                    .map(|k| stein_phi_derivative(u0, k as u32).unwrap_or(f64::NAN) / factorial(k))
                    .collect();
                x.compose(&series)
            }
            Expr::Dilate(p, a) => p.eval_jet(&x.scale(*a)),
            Expr::Scale(p, c) => p.eval_jet(x).scale(*c),
            Expr::Add(p, q) => &p.eval_jet(x) + &q.eval_jet(x),
            Expr::Sub(p, q) => &p.eval_jet(x) - &q.eval_jet(x),
            Expr::Mul(p, q) => &p.eval_jet(x) * &q.eval_jet(x),
            Expr::RychkovPsi0(phi, n) => {
                let v = phi.eval_jet(x);
                let one_minus = (&v * &v).scale(-1.0).add_const(1.0);
                let mut acc = Jet::constant(0.0, order);
                for m in 1..=*n {
                    let term = &v.powi(2 * m - 1) * &one_minus.powi(*n - m);
                    acc = &acc + &term.scale(binomial(*n, m));
                }
                acc
            }
            Expr::RychkovPsi(phi, n) => {
                let a = phi.eval_jet(x);
                let b = phi.eval_jet(&x.scale(2.0));
                let diff = &(&a * &a) - &(&b * &b);
                let one_minus = (&a * &a).scale(-1.0).add_const(1.0);
                let mut acc = Jet::constant(0.0, order);
                for m in 1..=*n {
                    let term = &diff.powi(m - 1) * &one_minus.powi(*n - m);
                    acc = &acc + &term.scale(binomial(*n, m));
                }
                &(&a + &b) * &acc
            }
        }
    }

    /// Taylor jet of order `order` at `u`.
    pub fn jet(&self, u: f64, order: usize) -> Jet {
        self.eval_jet(&Jet::variable(u, order))
    }

    /// `[φ(u), φ'(u), …, φ^{(order)}(u)]`.
    pub fn derivatives(&self, u: f64, order: usize) -> Vec<f64> {
        self.jet(u, order).derivatives()
    }

    /// Largest `|u|` at which evaluation is supported.
    pub fn domain(&self) -> f64 {
        match &*self.expr {
            Expr::Sampled(s) => s.u_max(),
            Expr::Dilate(p, a) => p.domain() / a.abs(),
            Expr::Scale(p, _) => p.domain(),
            Expr::Add(p, q) | Expr::Sub(p, q) | Expr::Mul(p, q) => p.domain().min(q.domain()),
            Expr::RychkovPsi0(p, _) => p.domain(),
            Expr::RychkovPsi(p, _) => p.domain() / 2.0,
            _ => f64::INFINITY,
        }
    }

    /// `A` with `supp φ̂ ⊂ [−A, A]`, when known from the construction.
    pub fn bandlimit(&self) -> Option<f64> {
        match &*self.expr {
            Expr::Const(_) => Some(0.0),
            Expr::BandLimited(_) => Some(1.0),
            Expr::Dilate(p, a) => p.bandlimit().map(|b| b * a.abs()),
            Expr::Scale(p, _) => p.bandlimit(),
            Expr::Add(p, q) | Expr::Sub(p, q) => Some(p.bandlimit()?.max(q.bandlimit()?)),
            Expr::Mul(p, q) => Some(p.bandlimit()? + q.bandlimit()?),
            Expr::RychkovPsi0(p, n) => p.bandlimit().map(|b| b * (2 * n - 1) as f64),
            Expr::RychkovPsi(p, n) => p.bandlimit().map(|b| 2.0 * b * (2 * n - 1) as f64),
            _ => None,
        }
    }

    /// Largest `m` with `φ^{(ν)}(0) = 0` for `1 ≤ ν ≤ m`: the construction order for
    /// band-limited profiles, otherwise a numerical scan up to order 40.
    pub fn vanishing_order(&self) -> usize {
        match &*self.expr {
            Expr::BandLimited(bl) => bl.order(),
            Expr::Dilate(p, _) | Expr::Scale(p, _) => p.vanishing_order(),
            _ => self.numeric_vanishing_order(40),
        }
    }

    pub fn numeric_vanishing_order(&self, max_order: usize) -> usize {
        let d = self.derivatives(0.0, max_order);
        (1..=max_order).find(|&nu| d[nu].abs() >= VANISHING_TOL).map_or(max_order, |nu| nu - 1)
    }

    /// `𝒩_N(φ) = sup_{u≥0} (1+u)^N max_{k≤N} |φ^{(k)}(u)|`, evaluated on a grid.
    pub fn norm_n(&self, n: usize) -> Result<f64, ProfileError> {
        if let Some((bl, a, c)) = self.as_scaled_bandlimited() {
            return Ok(c.abs() * bl.norm_dilated(n, a));
        }
        if let Expr::Sampled(s) = &*self.expr {
            return s.norm_n(n);
        }
        const STEP: f64 = 1.0 / 32.0;
        let weighted = |u: f64| -> f64 {
            let d = self.derivatives(u, n);
            (1.0 + u).powi(n as i32) * d.iter().fold(0.0f64, |m, v| m.max(v.abs()))
        };
        let mut best = 0.0f64;
        let mut lo = 0.0;
        let mut hi = 64.0f64.min(self.domain());
        loop {
            let mut seg = 0.0f64;
            let steps = ((hi - lo) / STEP).round() as usize;
            for i in 0..=steps {
                seg = seg.max(weighted(lo + i as f64 * STEP));
            }
            best = best.max(seg);
            if seg <= 1e-6 * best || hi >= U_MAX.min(self.domain()) {
                return Ok(best);
            }
            lo = hi;
            hi = (2.0 * hi).min(U_MAX.min(self.domain()));
        }
    }

    fn as_scaled_bandlimited(&self) -> Option<(Arc<BandLimited>, f64, f64)> {
        match &*self.expr {
            Expr::BandLimited(bl) => Some((bl.clone(), 1.0, 1.0)),
            Expr::Dilate(p, a) => p.as_scaled_bandlimited().map(|(bl, b, c)| (bl, a * b, c)),
            Expr::Scale(p, k) => p.as_scaled_bandlimited().map(|(bl, b, c)| (bl, b, k * c)),
            _ => None,
        }
    }

    /// Samples on `[0, u_max]` with spacing `step` plus descriptive metadata.
    pub fn export(&self, u_max: f64, step: f64) -> ProfileExport {
        let count = (u_max / step).round() as usize + 1;
        let samples = (0..count).map(|j| self.eval(j as f64 * step)).collect();
        ProfileExport {
            grid_step: step,
            samples,
            metadata: ProfileMetadata {
                name: self.name.clone(),
                value_at_zero: self.eval(0.0),
                bandlimit: self.bandlimit(),
                vanishing_order: self.vanishing_order(),
                construction_order: self.bandlimited().map(|b| b.order()),
                u_max,
                derivative_order: 3,
            },
        }
    }

    pub fn from_export(e: &ProfileExport) -> Result<Self, ProfileError> {
        Self::sampled(e.samples.clone(), e.grid_step, e.metadata.name.clone())
    }
}

/// Serialized samples of a profile.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ProfileExport {
    pub grid_step: f64,
    pub samples: Vec<f64>,
    pub metadata: ProfileMetadata,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ProfileMetadata {
    pub name: String,
    pub value_at_zero: f64,
    pub bandlimit: Option<f64>,
    pub vanishing_order: usize,
    pub construction_order: Option<usize>,
    pub u_max: f64,
    pub derivative_order: usize,
}

/// Profile given by samples on a uniform grid over `[0, U]`, extended evenly.
#[derive(Debug)]
pub struct Sampled {
    values: Vec<f64>,
    step: f64,
}

impl Sampled {
    fn new(values: Vec<f64>, step: f64) -> Result<Self, ProfileError> {
        if values.len() < 4 || !(step > 0.0) || values.iter().any(|v| !v.is_finite()) {
            return Err(ProfileError::InvalidSamples);
        }
        Ok(Self { values, step })
    }

    fn u_max(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.step
    }

    /// Sample at signed index, using evenness below zero.
    fn at(&self, j: i64) -> f64 {
        let j = j.unsigned_abs() as usize;
        self.values[j.min(self.values.len() - 1)]
    }

    /// Coefficients of the Catmull–Rom cubic on the cell containing `u`, in powers of `(u − u₀)`.
    fn taylor(&self, u: f64, order: usize) -> Vec<f64> {
        let a = u.abs().min(self.u_max());
        let h = self.step;
        let j = ((a / h).floor() as i64).min(self.values.len() as i64 - 2);
        let t = a / h - j as f64;
        let (p0, p1, p2, p3) = (self.at(j - 1), self.at(j), self.at(j + 1), self.at(j + 2));
        // cubic in t: c0 + c1 t + c2 t² + c3 t³
        let c0 = p1;
        let c1 = 0.5 * (p2 - p0);
        let c2 = p0 - 2.5 * p1 + 2.0 * p2 - 0.5 * p3;
        let c3 = 0.5 * (p3 - p0) + 1.5 * (p1 - p2);
        // re-expand at t, scale to derivatives in u
        let v = c0 + t * (c1 + t * (c2 + t * c3));
        let d1 = (c1 + t * (2.0 * c2 + 3.0 * t * c3)) / h;
        let d2 = (2.0 * c2 + 6.0 * t * c3) / (h * h);
        let d3 = 6.0 * c3 / (h * h * h);
        let sign = if u < 0.0 { -1.0 } else { 1.0 };
        let mut out = vec![0.0; order + 1];
        let coeffs = [v, sign * d1, d2 / 2.0, sign * d3 / 6.0];
        for (o, c) in out.iter_mut().zip(coeffs) {
            *o = c;
        }
        out
    }

    fn eval(&self, u: f64) -> f64 {
        self.taylor(u, 0)[0]
    }

    /// Central differences at spacings `2h` and `4h`, Richardson-combined.
    fn norm_n(&self, n: usize) -> Result<f64, ProfileError> {
        let len = self.values.len() as i64;
        let h = self.step;
        let mut best = 0.0f64;
        let mut deriv = vec![0.0f64; len as usize];
        for k in 0..=n {
            let reach = 2 * k as i64;
            let (mut worst_change, mut scale) = (0.0f64, 0.0f64);
            for j in 0..(len - reach).max(0) {
                let est = |s: i64| -> f64 {
                    let acc: f64 = (0..=k)
                        .map(|i| {
                            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                            sign * binomial(k as u32, i as u32) * self.at(j + s * (k as i64 - 2 * i as i64))
                        })
                        .sum();
                    acc / (2.0 * s as f64 * h).powi(k as i32)
                };
                let (a, b) = (est(1), est(2));
                let r = if k == 0 { a } else { (4.0 * a - b) / 3.0 };
                worst_change = worst_change.max((a - b).abs());
                scale = scale.max(r.abs());
                deriv[j as usize] = r;
            }
            if k > 0 && worst_change > 1e-2 * scale + 1e-12 {
                return Err(ProfileError::GridTooCoarse { order: k, change: worst_change / scale.max(1e-300) });
            }
            for j in 0..(len - reach).max(0) {
                let u = j as f64 * h;
                best = best.max((1.0 + u).powi(n as i32) * deriv[j as usize].abs());
            }
        }
        Ok(best)
    }
}

pub(crate) fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn rychkov_psi0_value(v: f64, n: u32) -> f64 {
    let w = 1.0 - v * v;
    (1..=n).map(|m| binomial(n, m) * v.powi(2 * m as i32 - 1) * w.powi((n - m) as i32)).sum()
}

fn rychkov_psi_value(a: f64, b: f64, n: u32) -> f64 {
    let diff = a * a - b * b;
    let w = 1.0 - a * a;
    (a + b) * (1..=n).map(|m| binomial(n, m) * diff.powi(m as i32 - 1) * w.powi((n - m) as i32)).sum::<f64>()
}

/// Littlewood–Paley companions `ψ = φ − φ(2·)` and `ψ̃ = φ + φ(2·)`.
#[derive(Clone, Debug)]
pub struct LpPair {
    pub phi: Profile,
    pub psi: Profile,
    pub psi_tilde: Profile,
    /// Certified: `ψ^{(ν)}(0) = 0` for `ν < k`.
    pub k: usize,
}

/// `n = ⌊d/2p⌋ + 1`.
pub fn atom_order(d: f64, p: f64) -> usize {
    (d / (2.0 * p)).floor() as usize + 1
}

/// Smallest even `K ≥ 2n + d + d/p + 1`.
pub fn required_vanishing(d: f64, p: f64) -> usize {
    let n = atom_order(d, p) as f64;
    let bound = 2.0 * n + d + d / p + 1.0;
    let mut k = bound.ceil() as usize;
    if k % 2 == 1 {
        k += 1;
    }
    k
}

impl LpPair {
    /// Pair without a certificate requirement.
    pub fn from_phi(phi: &Profile) -> Self {
        let two = phi.dilate(2.0);
        let psi = phi.sub(&two).with_name(format!("psi[{}]", phi.name()));
        let psi_tilde = phi.add(&two).with_name(format!("psi~[{}]", phi.name()));
        let d = phi.derivatives(0.0, 0);
        let k = if d[0].abs() < VANISHING_TOL { 1 } else { 0 };
        Self { phi: phi.clone(), psi, psi_tilde, k }
    }
}

/// Builds `(φ, ψ, ψ̃)` and certifies the vanishing order `K` required for `(d, p)`.
pub fn lp_pair(phi: &Profile, p: f64, d: f64) -> Result<LpPair, ProfileError> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(ProfileError::InvalidExponent(p));
    }
    let k = required_vanishing(d, p);
    let certified = phi.vanishing_order();
    if certified + 1 < k {
        return Err(ProfileError::InsufficientVanishingOrder { required: k - 1, certified });
    }
    let mut pair = LpPair::from_phi(phi);
    let dphi = phi.derivatives(0.0, k - 1);
    for (nu, v) in dphi.iter().enumerate() {
        let psi_nu = (1.0 - 2f64.powi(nu as i32)) * v;
        if psi_nu.abs() >= VANISHING_TOL {
            return Err(ProfileError::InsufficientVanishingOrder { required: k - 1, certified: nu.saturating_sub(1) });
        }
    }
    pair.k = k;
    Ok(pair)
}

/// The pair `(ψ₀, ψ)` with `ψ₀φ + Σ_{k≥1} ψ(2^{−k}·)[φ(2^{−k}·) − φ(2^{1−k}·)] = 1`,
/// built with exponent `N + 2` so that `ψ` vanishes to order `N` at the origin.
pub fn rychkov_pair(phi: &Profile, n: u32) -> Result<(Profile, Profile), ProfileError> {
    let v0 = phi.eval(0.0);
    if (v0 - 1.0).abs() > 1e-12 {
        return Err(ProfileError::NotNormalized(v0));
    }
    let np = n + 2;
    let psi0 = Profile::new(Expr::RychkovPsi0(phi.clone(), np), format!("rychkov-psi0[{}; {np}]", phi.name()));
    let psi = Profile::new(Expr::RychkovPsi(phi.clone(), np), format!("rychkov-psi[{}; {np}]", phi.name()));
    Ok((psi0, psi))
}
