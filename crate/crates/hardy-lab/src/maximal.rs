//! Maximal operators over a dyadic scale grid and the `H^p` quasi-norms built from them.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::profiles::{Profile, ProfileError};
use crate::space::MetricMeasureSpace;
use crate::spectral::{SpectralError, SpectralOperator};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaximalError {
    #[error("scale grid is empty")]
    EmptyGrid,
    #[error("profile dictionary is empty")]
    EmptyDictionary,
    #[error("parameter {name} = {value} is out of range")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("signal has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

/// Scales `t = 2^{−k}` for `k_lo ≤ k ≤ k_hi`, optionally with the midpoints `2^{−k}√2`,
/// together with the limit `t → 0` where `φ(t√L) → φ(0)·I`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TGrid {
    pub k_lo: i32,
    pub k_hi: i32,
    pub refined: bool,
    pub include_zero_limit: bool,
}

impl TGrid {
    pub fn dyadic(k_lo: i32, k_hi: i32) -> Self {
        Self { k_lo, k_hi, refined: false, include_zero_limit: true }
    }

    /// `2^{−k_hi}` below the resolution and `2^{−k_lo}` above the diameter.
    pub fn for_space(space: &MetricMeasureSpace) -> Self {
        let res = space.resolution();
        let mut k_hi = 0;
        while 2f64.powi(-k_hi) >= res {
            k_hi += 1;
        }
        while 2f64.powi(-(k_hi - 1)) < res {
            k_hi -= 1;
        }
        let mut k_lo = k_hi;
        while 2f64.powi(-k_lo) <= space.diam() {
            k_lo -= 1;
        }
        Self::dyadic(k_lo, k_hi)
    }

    pub fn refined(mut self) -> Self {
        self.refined = true;
        self
    }

    pub fn without_zero_limit(mut self) -> Self {
        self.include_zero_limit = false;
        self
    }

    /// Positive scales in increasing order (the zero limit is not listed).
    pub fn scales(&self) -> Vec<f64> {
        let mut ts = Vec::new();
        for k in (self.k_lo..=self.k_hi).rev() {
            let t = 2f64.powi(-k);
            ts.push(t);
            if self.refined && k > self.k_lo {
                ts.push(t * std::f64::consts::SQRT_2);
            }
        }
        ts
    }

    pub fn is_empty(&self) -> bool {
        self.k_lo > self.k_hi && !self.include_zero_limit
    }
}

/// Which maximal operator produced a field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MaximalKind {
    Radial,
    Nontangential { a: f64 },
    Tangential { gamma: f64 },
    /// Lower approximation of the grand maximal function from a finite dictionary.
    Grand { n: usize, entries: usize },
    HardyLittlewood { theta: f64 },
    Heat,
    Poisson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaximalField {
    pub values: Vec<f64>,
    pub kind: MaximalKind,
    pub profile: String,
    pub grid: Option<TGrid>,
}

impl MaximalField {
    /// `(Σ_x v(x)^p μ(x))^{1/p}`.
    pub fn lp_norm(&self, mu: &[f64], p: f64) -> f64 {
        lp_norm(&self.values, mu, p)
    }
}

pub fn lp_norm(v: &[f64], mu: &[f64], p: f64) -> f64 {
    v.iter().zip(mu).map(|(a, m)| a.abs().powf(p) * m).sum::<f64>().powf(1.0 / p)
}

/// `φ(t√L)f` for every scale of the grid, the `t → 0` limit first when included.
/// Entries are `(t, values)` with `t = 0` marking the limit.
pub fn smoothed_family(
    op: &SpectralOperator,
    f: &[f64],
    phi: &Profile,
    grid: &TGrid,
) -> Result<Vec<(f64, Vec<f64>)>, MaximalError> {
    if f.len() != op.len() {
        return Err(MaximalError::DimensionMismatch { expected: op.len(), got: f.len() });
    }
    if grid.is_empty() {
        return Err(MaximalError::EmptyGrid);
    }
    let coeffs = op.analyze(f);
    let mut out: Vec<(f64, Vec<f64>)> = grid
        .scales()
        .par_iter()
        .map(|&t| -> Result<(f64, Vec<f64>), MaximalError> {
            let w = op.profile_weights(phi, t)?;
            Ok((t, op.synthesize(&coeffs, &w)))
        })
        .collect::<Result<_, _>>()?;
    if grid.include_zero_limit {
        let c = phi.eval(0.0);
        out.insert(0, (0.0, f.iter().map(|v| c * v).collect()));
    }
    Ok(out)
}

/// `M(f;φ)(x) = sup_t |φ(t√L)f(x)|`.
pub fn radial_maximal(
    op: &SpectralOperator,
    f: &[f64],
    phi: &Profile,
    grid: &TGrid,
) -> Result<MaximalField, MaximalError> {
    let fam = smoothed_family(op, f, phi, grid)?;
    Ok(MaximalField {
        values: radial_from_family(&fam, op.len()),
        kind: MaximalKind::Radial,
        profile: phi.name().to_string(),
        grid: Some(grid.clone()),
    })
}

fn radial_from_family(fam: &[(f64, Vec<f64>)], n: usize) -> Vec<f64> {
    let mut v = vec![0.0f64; n];
    for (_, u) in fam {
        for (m, x) in v.iter_mut().zip(u) {
            *m = m.max(x.abs());
        }
    }
    v
}

/// Pointwise sup over `(t, y)` of `|u_t(y)|·w(ρ(x,y), t)`.
fn cone_sup(
    space: &MetricMeasureSpace,
    fam: &[(f64, Vec<f64>)],
    weight: impl Fn(f64, f64) -> f64 + Sync,
) -> Vec<f64> {
    let n = space.len();
    (0..n)
        .into_par_iter()
        .map(|x| {
            let mut best = 0.0f64;
            for (t, u) in fam {
                for (y, uy) in u.iter().enumerate() {
                    let w = if *t == 0.0 {
                        if y == x {
                            1.0
                        } else {
                            0.0
                        }
                    } else {
                        weight(space.dist(x, y), *t)
                    };
                    if w > 0.0 {
                        best = best.max(uy.abs() * w);
                    }
                }
            }
            best
        })
        .collect()
}

/// `M*_a(f;φ)(x) = sup_t sup_{ρ(x,y) ≤ at} |φ(t√L)f(y)|`.
pub fn nontangential_maximal(
    op: &SpectralOperator,
    space: &MetricMeasureSpace,
    f: &[f64],
    phi: &Profile,
    a: f64,
    grid: &TGrid,
) -> Result<MaximalField, MaximalError> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(MaximalError::InvalidParameter { name: "a", value: a });
    }
    let fam = smoothed_family(op, f, phi, grid)?;
    Ok(MaximalField {
        values: nontangential_from_family(space, &fam, a),
        kind: MaximalKind::Nontangential { a },
        profile: phi.name().to_string(),
        grid: Some(grid.clone()),
    })
}

fn nontangential_from_family(space: &MetricMeasureSpace, fam: &[(f64, Vec<f64>)], a: f64) -> Vec<f64> {
    cone_sup(space, fam, |rho, t| if rho <= a * t { 1.0 } else { 0.0 })
}

/// `M**_γ(f;φ)(x) = sup_{t,y} |φ(t√L)f(y)| (1 + ρ(x,y)/t)^{−γ}`.
pub fn tangential_maximal(
    op: &SpectralOperator,
    space: &MetricMeasureSpace,
    f: &[f64],
    phi: &Profile,
    gamma: f64,
    grid: &TGrid,
) -> Result<MaximalField, MaximalError> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(MaximalError::InvalidParameter { name: "gamma", value: gamma });
    }
    let fam = smoothed_family(op, f, phi, grid)?;
    Ok(MaximalField {
        values: tangential_from_family(space, &fam, gamma),
        kind: MaximalKind::Tangential { gamma },
        profile: phi.name().to_string(),
        grid: Some(grid.clone()),
    })
}

fn tangential_from_family(space: &MetricMeasureSpace, fam: &[(f64, Vec<f64>)], gamma: f64) -> Vec<f64> {
    cone_sup(space, fam, |rho, t| (1.0 + rho / t).powf(-gamma))
}

/// Radial, nontangential and tangential fields from one family of smoothings.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MaximalTriple {
    pub radial: MaximalField,
    pub nontangential: MaximalField,
    pub tangential: MaximalField,
}

#[allow(clippy::too_many_arguments)]
pub fn maximal_triple(
    op: &SpectralOperator,
    space: &MetricMeasureSpace,
    f: &[f64],
    phi: &Profile,
    a: f64,
    gamma: f64,
    grid: &TGrid,
) -> Result<MaximalTriple, MaximalError> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(MaximalError::InvalidParameter { name: "a", value: a });
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(MaximalError::InvalidParameter { name: "gamma", value: gamma });
    }
    let fam = smoothed_family(op, f, phi, grid)?;
    let field = |values, kind| MaximalField { values, kind, profile: phi.name().to_string(), grid: Some(grid.clone()) };
    Ok(MaximalTriple {
        radial: field(radial_from_family(&fam, op.len()), MaximalKind::Radial),
        nontangential: field(nontangential_from_family(space, &fam, a), MaximalKind::Nontangential { a }),
        tangential: field(tangential_from_family(space, &fam, gamma), MaximalKind::Tangential { gamma }),
    })
}

/// Violations of `M ≤ M*_a ≤ (1+a)^γ M**_γ`, compared up to a few units of rounding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainCheck {
    pub violations: usize,
    /// `min_x M*_a/M` over points with `M > 0`.
    pub min_ratio_nontangential: f64,
    /// `min_x (1+a)^γ M**_γ / M*_a` over points with `M*_a > 0`.
    pub min_ratio_tangential: f64,
}

pub fn chain_check(t: &MaximalTriple) -> ChainCheck {
    let (a, gamma) = match (&t.nontangential.kind, &t.tangential.kind) {
        (MaximalKind::Nontangential { a }, MaximalKind::Tangential { gamma }) => (*a, *gamma),
        _ => return ChainCheck { violations: usize::MAX, min_ratio_nontangential: 0.0, min_ratio_tangential: 0.0 },
    };
    let factor = (1.0 + a).powf(gamma);
    let slack = 1.0 + 8.0 * f64::EPSILON;
    let mut out = ChainCheck { violations: 0, min_ratio_nontangential: f64::INFINITY, min_ratio_tangential: f64::INFINITY };
    for ((r, nt), tg) in t.radial.values.iter().zip(&t.nontangential.values).zip(&t.tangential.values) {
        if *r > nt * slack {
            out.violations += 1;
        }
        if *nt > factor * tg * slack {
            out.violations += 1;
        }
        if *r > 0.0 {
            out.min_ratio_nontangential = out.min_ratio_nontangential.min(nt / r);
        }
        if *nt > 0.0 {
            out.min_ratio_tangential = out.min_ratio_tangential.min(factor * tg / nt);
        }
    }
    out
}

/// A profile with its `𝒩_N` norm; it enters the grand maximal function as `φ/𝒩_N(φ)`.
#[derive(Clone, Debug)]
pub struct DictionaryEntry {
    pub profile: Profile,
    pub norm: f64,
}

/// A finite subset of `{φ : 𝒩_N(φ) ≤ 1}`.
#[derive(Clone, Debug)]
pub struct Dictionary {
    n: usize,
    entries: Vec<DictionaryEntry>,
}

fn standard_cache() -> &'static Mutex<HashMap<usize, Dictionary>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Dictionary>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

pub const STANDARD_DILATIONS: [f64; 3] = [0.5, 1.0, 2.0];

impl Dictionary {
    pub fn empty(n: usize) -> Self {
        Self { n, entries: Vec::new() }
    }

    /// Gaussian, smoothed exponential and the admissible profiles of order 2, 4, 6,
    /// each at dilations `1/2, 1, 2`. Built once per `N`.
    pub fn standard(n: usize) -> Result<Self, MaximalError> {
        if let Some(d) = standard_cache().lock().expect("dictionary cache poisoned").get(&n) {
            return Ok(d.clone());
        }
        let mut dict = Self::empty(n);
        for base in [Profile::gaussian(), Profile::smooth_exponential()] {
            for a in STANDARD_DILATIONS {
                dict.push(if a == 1.0 { base.clone() } else { base.dilate(a) })?;
            }
        }
        for m in [2, 4, 6] {
            let phi = Profile::admissible(m)?;
            let bl = phi.bandlimited().expect("admissible profiles are band-limited").clone();
            let norms = bl.norm_dilates(n, &STANDARD_DILATIONS);
            for (a, norm) in STANDARD_DILATIONS.iter().zip(norms) {
                let profile = if *a == 1.0 { phi.clone() } else { phi.dilate(*a) };
                dict.entries.push(DictionaryEntry { profile, norm });
            }
        }
        standard_cache().lock().expect("dictionary cache poisoned").insert(n, dict.clone());
        Ok(dict)
    }

    pub fn from_profiles(n: usize, profiles: impl IntoIterator<Item = Profile>) -> Result<Self, MaximalError> {
        let mut d = Self::empty(n);
        for p in profiles {
            d.push(p)?;
        }
        Ok(d)
    }

    pub fn push(&mut self, profile: Profile) -> Result<(), MaximalError> {
        let norm = profile.norm_n(self.n)?;
        self.entries.push(DictionaryEntry { profile, norm });
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[DictionaryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Smallest integer `N > 6d/p + 3d/2 + 2`.
pub fn default_grand_order(d: f64, p: f64) -> usize {
    (6.0 * d / p + 1.5 * d + 2.0).floor() as usize + 1
}

/// `𝓜_N f ≈ max_{φ ∈ dictionary} M*_1(f; φ/𝒩_N(φ))`, a lower bound for the true sup.
pub fn grand_maximal(
    op: &SpectralOperator,
    space: &MetricMeasureSpace,
    f: &[f64],
    dict: &Dictionary,
    grid: &TGrid,
) -> Result<MaximalField, MaximalError> {
    if dict.is_empty() {
        return Err(MaximalError::EmptyDictionary);
    }
    let fields: Vec<Vec<f64>> = dict
        .entries()
        .par_iter()
        .map(|e| -> Result<Vec<f64>, MaximalError> {
            let fam = smoothed_family(op, f, &e.profile, grid)?;
            Ok(nontangential_from_family(space, &fam, 1.0).into_iter().map(|v| v / e.norm).collect())
        })
        .collect::<Result<_, _>>()?;
    let mut values = vec![0.0f64; op.len()];
    for fv in &fields {
        for (m, v) in values.iter_mut().zip(fv) {
            *m = m.max(*v);
        }
    }
    Ok(MaximalField {
        values,
        kind: MaximalKind::Grand { n: dict.n(), entries: dict.len() },
        profile: "dictionary".into(),
        grid: Some(grid.clone()),
    })
}

/// `M_θ f(x) = sup_{B ∋ x} (|B|⁻¹ ∫_B |f|^θ)^{1/θ}` over all realizable balls.
pub fn hl_maximal(space: &MetricMeasureSpace, f: &[f64], theta: f64) -> Result<MaximalField, MaximalError> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(MaximalError::InvalidParameter { name: "theta", value: theta });
    }
    if f.len() != space.len() {
        return Err(MaximalError::DimensionMismatch { expected: space.len(), got: f.len() });
    }
    let n = space.len();
    let mu = space.measure();
    let ft: Vec<f64> = f.iter().map(|v| v.abs().powf(theta)).collect();
    let radii = space.radii_grid();
    let averages: Vec<Vec<(Vec<usize>, f64)>> = (0..n)
        .into_par_iter()
        .map(|z| {
            radii
                .iter()
                .map(|&r| {
                    let members: Vec<usize> = (0..n).filter(|&y| space.dist(z, y) < r).collect();
                    let mass: f64 = members.iter().map(|&y| mu[y]).sum();
                    let integral: f64 = members.iter().map(|&y| ft[y] * mu[y]).sum();
                    (members, (integral / mass).powf(1.0 / theta))
                })
                .collect()
        })
        .collect();
    let mut values = vec![0.0f64; n];
    for per_center in &averages {
        for (members, avg) in per_center {
            for &y in members {
                values[y] = values[y].max(*avg);
            }
        }
    }
    Ok(MaximalField { values, kind: MaximalKind::HardyLittlewood { theta }, profile: String::new(), grid: None })
}

/// Which smoothing defines an `H^p` quasi-norm.
#[derive(Clone, Debug)]
pub enum Flavor {
    /// `e^{−t²L}`.
    Heat,
    /// `e^{−t√L}`.
    Poisson,
    Profile(Profile),
}

impl Flavor {
    pub fn profile(&self) -> Profile {
        match self {
            Flavor::Heat => Profile::gaussian(),
            Flavor::Poisson => Profile::exponential(),
            Flavor::Profile(p) => p.clone(),
        }
    }
}

/// `‖sup_t |φ(t√L)f|‖_{L^p(μ)}`.
pub fn hp_quasinorm(
    op: &SpectralOperator,
    f: &[f64],
    p: f64,
    grid: &TGrid,
    flavor: &Flavor,
) -> Result<f64, MaximalError> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(MaximalError::InvalidParameter { name: "p", value: p });
    }
    let field = radial_maximal(op, f, &flavor.profile(), grid)?;
    Ok(field.lp_norm(op.mu(), p))
}

/// Parameters of an equivalence report.
#[derive(Clone, Debug)]
pub struct EquivalenceParams {
    pub p: f64,
    /// Homogeneous dimension used for the hypotheses.
    pub d: f64,
    pub a: f64,
    /// Defaults to `p/2`.
    pub theta: Option<f64>,
    /// Defaults to `2d/θ + 1`.
    pub gamma: Option<f64>,
    /// Defaults to [`default_grand_order`].
    pub n: Option<usize>,
    pub grid: TGrid,
}

/// Empirical constants of the pointwise and norm comparisons between maximal functions.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub p: f64,
    pub theta: f64,
    pub gamma: f64,
    pub n: usize,
    pub chain: ChainCheck,
    /// `max_x M**_γ(f;φ)(x) / M_θ(M(f;φ))(x)`.
    pub tangential_over_hl: f64,
    /// `‖f‖_{H^p, heat} / ‖f‖_{H^p, Poisson}`.
    pub heat_over_poisson: f64,
    /// `‖𝓜_N f‖_p / ‖f‖_{H^p, heat}` with the dictionary lower bound for `𝓜_N`.
    pub grand_over_heat: f64,
    /// `‖M(f;φ)‖_p / ‖f‖_{H^p, heat}` per profile.
    pub profile_over_heat: Vec<(String, f64)>,
}

pub fn equivalence_report(
    op: &SpectralOperator,
    space: &MetricMeasureSpace,
    f: &[f64],
    profiles: &[Profile],
    params: &EquivalenceParams,
) -> Result<EquivalenceReport, MaximalError> {
    let p = params.p;
    let theta = params.theta.unwrap_or(p / 2.0);
    let gamma = params.gamma.unwrap_or(2.0 * params.d / theta + 1.0);
    let n = params.n.unwrap_or_else(|| default_grand_order(params.d, p));
    let mu = op.mu();
    let grid = &params.grid;
    let heat = radial_maximal(op, f, &Profile::gaussian(), grid)?.lp_norm(mu, p);
    let poisson = radial_maximal(op, f, &Profile::exponential(), grid)?.lp_norm(mu, p);
    let grand = grand_maximal(op, space, f, &Dictionary::standard(n)?, grid)?.lp_norm(mu, p);
    let mut chain = ChainCheck { violations: 0, min_ratio_nontangential: f64::INFINITY, min_ratio_tangential: f64::INFINITY };
    let mut tangential_over_hl = 0.0f64;
    let mut profile_over_heat = Vec::new();
    for phi in profiles {
        let triple = maximal_triple(op, space, f, phi, params.a, gamma, grid)?;
        let c = chain_check(&triple);
        chain.violations += c.violations;
        chain.min_ratio_nontangential = chain.min_ratio_nontangential.min(c.min_ratio_nontangential);
        chain.min_ratio_tangential = chain.min_ratio_tangential.min(c.min_ratio_tangential);
        let hl = hl_maximal(space, &triple.radial.values, theta)?;
        for (tg, h) in triple.tangential.values.iter().zip(&hl.values) {
            if *h > 0.0 {
                tangential_over_hl = tangential_over_hl.max(tg / h);
            }
        }
        profile_over_heat.push((phi.name().to_string(), triple.radial.lp_norm(mu, p) / heat));
    }
    Ok(EquivalenceReport {
        p,
        theta,
        gamma,
        n,
        chain,
        tangential_over_hl,
        heat_over_poisson: heat / poisson,
        grand_over_heat: grand / heat,
        profile_over_heat,
    })
}
