//! Constructive atomic decomposition of `H^p_L` on a finite space.
//!
//! A signal is split as `f = φ_j²f + Σ_{k>j} ψ_kψ̃_k f`, where `j` is the coarsest scale
//! at which one ball is the whole space. The fine part is cut along the level sets
//! of the grand maximal function and regrouped over Whitney balls into atoms
//! `a = Lⁿb`; the coarse part becomes the outstanding atom.
//!
//! Kernels of `ψ̃_k` and of `L^{−n}ψ_k` are truncated to `ρ(x,y) ≤ τ2^{−k}`. The
//! piece kernel is `P_k = Lⁿ·trunc(L^{−n}ψ_k)`, so `a = Lⁿb` holds by construction
//! and the supports of `L^k b` are exact. The gap between `P_k` and `ψ_k` is logged
//! as the truncation budget.

mod levels;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use levels::{level_below, level_sets, LevelStructure, PartitionReport};

use crate::maximal::{default_grand_order, grand_maximal, hp_quasinorm, Dictionary, Flavor, MaximalError, TGrid};
use crate::profiles::{atom_order, lp_pair, required_vanishing, LpPair, Profile, ProfileError};
use crate::dd::Dd;
use crate::exact::ExactSum;
use crate::space::{GeometryReport, MetricMeasureSpace, PointSet};
use crate::spectral::{default_fit_grid, fit_heat_constants, SpectralError, SpectralOperator};

/// Level, ball, inflation, `F_B` and `G_B` of one regrouped piece.
type Piece = (i32, Ball, f64, Vec<f64>, Vec<f64>);
use crate::whitney::{whitney_cover, WhitneyError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AtomicError {
    #[error("exponent p = {0} must lie in (0, 1]")]
    InvalidExponent(f64),
    #[error("signal has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("grand maximal field vanishes identically")]
    ZeroField,
    #[error("vanishing order {k} of ψ must exceed 2n = {two_n}")]
    VanishingOrderTooLow { k: usize, two_n: usize },
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Maximal(#[from] MaximalError),
    #[error(transparent)]
    Whitney(#[from] WhitneyError),
}

/// Where the Littlewood–Paley telescoping starts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// `f = φ_j²f + Σ_{k>j}`; the first term is the outstanding atom.
    Compact,
    /// `Σ_{k>j−extra}` without an outstanding atom; `φ_{j−extra}²f` stays in the residual.
    Noncompact { extra_scales: u32 },
}

#[derive(Clone, Debug)]
pub struct DecomposeConfig {
    pub p: f64,
    /// Homogeneous dimension; defaults to `log₂ c₀` of the space.
    pub d: Option<f64>,
    /// Grand-maximal order; defaults to the smallest `N > 6d/p + 3d/2 + 2`.
    pub grand_order: Option<usize>,
    /// Locality constant; defaults to `max(1, 1/√c*)` from the heat fit.
    pub tau: Option<f64>,
    /// Order of the band-limited `φ`; defaults to the smallest even `m ≥ max(10, K−1)`.
    pub profile_order: Option<usize>,
    /// Added to the default finest scale.
    pub k_max_extra: i32,
    /// Relative level share below which bottom levels are dropped.
    pub clip: f64,
    pub branch: Branch,
    pub grid: Option<TGrid>,
}

impl DecomposeConfig {
    pub fn new(p: f64) -> Self {
        Self {
            p,
            d: None,
            grand_order: None,
            tau: None,
            profile_order: None,
            k_max_extra: 0,
            clip: 1e-12,
            branch: Branch::Compact,
            grid: None,
        }
    }
}

/// Smallest even `m ≥ max(10, K − 1)`.
pub fn default_profile_order(k: usize) -> usize {
    let m = 10.max(k.saturating_sub(1));
    m + m % 2
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: usize,
    pub radius: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomKind {
    Regular,
    Outstanding,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub kind: AtomKind,
    pub a: Vec<f64>,
    /// `a = Lⁿb`; absent for the outstanding atom.
    pub b: Option<Vec<f64>>,
    pub ball: Ball,
    /// `μ(B)`.
    pub ball_mass: f64,
    pub n: usize,
    pub p: f64,
    /// `‖L^k b‖_∞` for `k = 0..=n`.
    pub lk_b_sup: Vec<f64>,
    /// Level `r` of the piece.
    pub level: Option<i32>,
    /// Radius of the ball over `(7/2)ρ_ℓ` when supports forced an enlargement.
    pub inflation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub lambda: f64,
    #[serde(flatten)]
    pub atom: Atom,
}

/// Per-scale kernel mass discarded by truncation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleLeak {
    pub k: i32,
    pub radius: f64,
    /// `max |ψ_k(x,y)|` over `ρ(x,y) > τ2^{−k}`, relative to `max |ψ_k|`.
    pub psi_relative: f64,
    pub psi_tilde_relative: f64,
    /// `max_x |(Lⁿ trunc(L^{−n}ψ_k) − ψ_k)(x,y)|`, relative to `max |ψ_k|`.
    pub effective_relative: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationLog {
    pub scales: Vec<ScaleLeak>,
    /// `‖Σ_k (ψ_kψ̃_k f − P_k h_k)‖₂`.
    pub budget_l2: f64,
    /// `‖(I − φ_{k_max}²) f‖₂`.
    pub tail_l2: f64,
    /// `‖φ_{k_lo−1}² f‖₂` left in the residual by the noncompact branch.
    pub head_l2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub r: i32,
    pub omega_size: usize,
    pub omega_mass: f64,
    pub s_r: Option<i32>,
    pub balls: usize,
    pub atoms: usize,
    /// `‖Σ_ℓ F_{B_ℓ} − F_r‖_∞` with both sides summed exactly.
    pub regroup_defect: f64,
    /// `‖F_r‖_∞`.
    pub piece_sup: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualNorms {
    pub l2: f64,
    pub linf: f64,
    pub relative_l2: f64,
}

/// Consistency of the pieces with the Littlewood–Paley identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    /// `‖f − f₀ − Σ_r F_r − tail‖₂`.
    pub gap_l2: f64,
    /// Logged truncation budget it should reproduce.
    pub budget_l2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomicDecomposition {
    pub p: f64,
    pub n: usize,
    pub d: f64,
    pub c0: f64,
    pub tau: f64,
    pub j: i32,
    pub k_range: (i32, i32),
    pub grand_order: usize,
    pub profile_order: usize,
    pub branch: Branch,
    pub terms: Vec<Term>,
    pub outstanding: Option<Term>,
    pub residual: Vec<f64>,
    pub residual_norms: ResidualNorms,
    /// `Σ|λ_B|^p + |λ_A|^p`.
    pub budget: f64,
    /// `Σ|λ_B|^p` over regular atoms.
    pub regular_budget: f64,
    /// `Σ_r 2^{pr}|Ω_r|`.
    pub level_mass: f64,
    pub hp_norm: f64,
    pub c_sharp: f64,
    pub c_star: Option<f64>,
    pub truncation_log: TruncationLog,
    pub levels: Vec<LevelSummary>,
    pub clipped_levels: Vec<i32>,
    pub partition: PartitionReport,
    pub identity: IdentityCheck,
}

impl AtomicDecomposition {
    /// `c♯^p c₀ 7^d Σ_r 2^{pr}|Ω_r|`.
    pub fn budget_bound(&self) -> f64 {
        self.c_sharp.powf(self.p) * self.c0 * 7f64.powf(self.d) * self.level_mass
    }
}

struct ScaleKernels {
    k: i32,
    radius: f64,
    psi_tilde: DMatrix<f64>,
    /// `trunc(L^{−n}ψ_k)`.
    g: DMatrix<f64>,
    /// `Lⁿ g`.
    effective: DMatrix<f64>,
    leak: ScaleLeak,
}

/// Everything about a decomposition that depends on the model but not on the signal.
pub struct Pipeline<'a> {
    space: &'a MetricMeasureSpace,
    op: &'a SpectralOperator,
    geometry: GeometryReport,
    pub p: f64,
    pub d: f64,
    pub n: usize,
    pub tau: f64,
    pub c_star: Option<f64>,
    pub pair: LpPair,
    pub x0: usize,
    pub j: i32,
    pub k_lo: i32,
    pub k_hi: i32,
    pub grand_order: usize,
    pub profile_order: usize,
    pub grid: TGrid,
    branch: Branch,
    clip: f64,
    dictionary: Dictionary,
    kernels: Vec<ScaleKernels>,
}

/// `τ2^{−k}` with kernel entries beyond it zeroed; returns the largest discarded entry.
fn truncate(space: &MetricMeasureSpace, m: &mut DMatrix<f64>, radius: f64) -> f64 {
    let mut dropped = 0.0f64;
    for x in 0..m.nrows() {
        for y in 0..m.ncols() {
            if space.dist(x, y) > radius {
                dropped = dropped.max(m[(x, y)].abs());
                m[(x, y)] = 0.0;
            }
        }
    }
    dropped
}

/// `(Kv)(x) = Σ_{y ∈ S} K(x,y) v(y) μ(y)`.
fn apply_on(k: &DMatrix<f64>, v: &[f64], mu: &[f64], s: &PointSet) -> Vec<f64> {
    let n = v.len();
    let members: Vec<usize> = s.iter().collect();
    (0..n).map(|x| members.iter().map(|&y| k[(x, y)] * (v[y] * mu[y])).sum()).collect()
}

/// `acc(x) += Σ_{y ∈ S} K(x,y) w(y)` with exact products and double-double sums, so that
/// any regrouping of `S` reproduces the same totals.
fn accumulate(acc: &mut [Dd], k: &DMatrix<f64>, w: &[f64], s: &PointSet) {
    let members: Vec<usize> = s.iter().collect();
    for (x, a) in acc.iter_mut().enumerate() {
        for &y in &members {
            *a = *a + Dd::prod(k[(x, y)], w[y]);
        }
    }
}

/// `⟨f, v_i⟩_μ` in double-double.
fn coefficients(op: &SpectralOperator, f: &[f64]) -> Vec<Dd> {
    let v = op.eigenvectors();
    (0..f.len())
        .map(|i| (0..f.len()).fold(Dd::ZERO, |acc, y| acc + Dd::prod(v[(y, i)], op.mu()[y]) * f[y]))
        .collect()
}

/// Like [`accumulate`] but exact, so that regroupings agree to the last bit.
fn accumulate_exact(acc: &mut [ExactSum], k: &DMatrix<f64>, w: &[f64], s: &PointSet) {
    let members: Vec<usize> = s.iter().collect();
    for (x, a) in acc.iter_mut().enumerate() {
        for &y in &members {
            a.add_product(k[(x, y)], w[y]);
        }
    }
}

/// `Σ_i w_i c_i v_i` in double-double.
fn synthesize(op: &SpectralOperator, w: &[Dd], c: &[Dd]) -> Vec<Dd> {
    let v = op.eigenvectors();
    let wc: Vec<Dd> = w.iter().zip(c).map(|(&a, &b)| a * b).collect();
    (0..c.len()).map(|x| wc.iter().enumerate().fold(Dd::ZERO, |acc, (i, &t)| acc + t * v[(x, i)])).collect()
}

fn to_f64(v: &[Dd]) -> Vec<f64> {
    v.iter().map(|d| d.to_f64()).collect()
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Smallest radius of the form "next distance level" whose open ball around `c`
/// contains every point of `support`.
fn enclosing_radius(space: &MetricMeasureSpace, c: usize, support: &PointSet) -> f64 {
    let far = support.iter().map(|x| space.dist(c, x)).fold(0.0f64, f64::max);
    space
        .distance_levels()
        .iter()
        .copied()
        .find(|&l| l > far)
        .unwrap_or(space.diam() + space.resolution())
}

impl<'a> Pipeline<'a> {
    pub fn new(
        space: &'a MetricMeasureSpace,
        op: &'a SpectralOperator,
        config: &DecomposeConfig,
    ) -> Result<Self, AtomicError> {
        let p = config.p;
        if !(p > 0.0 && p <= 1.0) {
            return Err(AtomicError::InvalidExponent(p));
        }
        if op.len() != space.len() {
            return Err(AtomicError::DimensionMismatch { expected: space.len(), got: op.len() });
        }
        let geometry = space.geometry_report();
        let d = config.d.unwrap_or(geometry.d);
        let n = atom_order(d, p);
        let k_req = required_vanishing(d, p);
        if k_req <= 2 * n {
            return Err(AtomicError::VanishingOrderTooLow { k: k_req, two_n: 2 * n });
        }
        let profile_order = config.profile_order.unwrap_or_else(|| default_profile_order(k_req));
        let pair = lp_pair(&Profile::admissible(profile_order)?, p, d)?;
        let (tau, c_star) = match config.tau {
            Some(t) => (t, None),
            None => {
                let diag = fit_heat_constants(op, space, &default_fit_grid(space))?;
                (diag.tau(), Some(diag.c_star))
            }
        };
        let x0 = space.center();
        let ecc = space.eccentricity(x0);
        // largest j with B(x0, 2^{−j}) = M, i.e. 2^{−j} > ecc
        let mut j = -(level_below(ecc) + 1);
        while 2f64.powi(-j) <= ecc {
            j -= 1;
        }
        let mut k_hi = 0;
        while 2f64.powi(-k_hi) >= space.resolution() / 4.0 {
            k_hi += 1;
        }
        while 2f64.powi(-(k_hi - 1)) < space.resolution() / 4.0 {
            k_hi -= 1;
        }
        k_hi += config.k_max_extra;
        let k_lo = match config.branch {
            Branch::Compact => j + 1,
            Branch::Noncompact { extra_scales } => j + 1 - extra_scales as i32,
        };
        let grand_order = config.grand_order.unwrap_or_else(|| default_grand_order(d, p));
        let dictionary = Dictionary::standard(grand_order)?;
        let grid = config.grid.clone().unwrap_or_else(|| TGrid::for_space(space));
        let mut pipeline = Self {
            space,
            op,
            geometry,
            p,
            d,
            n,
            tau,
            c_star,
            pair,
            x0,
            j,
            k_lo,
            k_hi,
            grand_order,
            profile_order,
            grid,
            branch: config.branch.clone(),
            clip: config.clip,
            dictionary,
            kernels: Vec::new(),
        };
        pipeline.kernels = (k_lo..=k_hi).into_par_iter().map(|k| pipeline.scale_kernels(k)).collect::<Result<_, _>>()?;
        Ok(pipeline)
    }

    fn scale_kernels(&self, k: i32) -> Result<ScaleKernels, AtomicError> {
        let op = self.op;
        let s = 2f64.powi(-k);
        let radius = self.tau * s;
        let psi_w = op.profile_weights(&self.pair.psi, s)?;
        let tilde_w = op.profile_weights(&self.pair.psi_tilde, s)?;
        let lambda_floor = 1e-12 * op.lambda_max().max(1.0);
        let g_w: Vec<f64> = op
            .eigenvalues()
            .iter()
            .zip(&psi_w)
            .map(|(&l, &w)| if l > lambda_floor { w / l.powi(self.n as i32) } else { 0.0 })
            .collect();
        let psi = op.kernel_from_weights(&psi_w);
        let psi_max = psi.amax().max(f64::MIN_POSITIVE);
        let mut psi_t = psi.clone();
        let psi_drop = truncate(self.space, &mut psi_t, radius);
        let mut psi_tilde = op.kernel_from_weights(&tilde_w);
        let tilde_max = psi_tilde.amax().max(f64::MIN_POSITIVE);
        let tilde_drop = truncate(self.space, &mut psi_tilde, radius);
        let mut g = op.kernel_from_weights(&g_w);
        truncate(self.space, &mut g, radius);
        let mut effective = g.clone();
        for _ in 0..self.n {
            effective = op.matrix() * effective;
        }
        let eff_gap = (&effective - &psi).amax();
        Ok(ScaleKernels {
            k,
            radius,
            psi_tilde,
            g,
            effective,
            leak: ScaleLeak {
                k,
                radius,
                psi_relative: psi_drop / psi_max,
                psi_tilde_relative: tilde_drop / tilde_max,
                effective_relative: eff_gap / psi_max,
            },
        })
    }

    pub fn geometry(&self) -> &GeometryReport {
        &self.geometry
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dictionary
    }

    /// Weights of `φ(2^{−k}√L)²`, exact in double-double.
    fn phi_sq(&self, k: i32) -> Result<Vec<Dd>, AtomicError> {
        Ok(self.op.profile_weights(&self.pair.phi, 2f64.powi(-k))?.iter().map(|&v| Dd::prod(v, v)).collect())
    }

    pub fn decompose(&self, f: &[f64]) -> Result<AtomicDecomposition, AtomicError> {
        let (space, op) = (self.space, self.op);
        let nn = space.len();
        if f.len() != nn {
            return Err(AtomicError::DimensionMismatch { expected: nn, got: f.len() });
        }
        let mu = op.mu();
        let p = self.p;
        let hp_norm = hp_quasinorm(op, f, p, &self.grid, &Flavor::Heat)?;
        let total_mass = space.total_mass();

        // Σ_{k_lo ≤ k ≤ k_hi} ψ_kψ̃_k = φ_{k_hi}² − φ_{k_lo−1}², with ψ_kψ̃_k = φ_k² − φ_{k−1}²
        let coeffs = coefficients(op, f);
        let coarse = self.phi_sq(self.k_lo - 1)?;
        let fine = self.phi_sq(self.k_hi)?;
        let coarse_part = synthesize(op, &coarse, &coeffs);
        let head = to_f64(&coarse_part);
        let lp_sum: Vec<Dd> = fine.iter().zip(&coarse).map(|(&a, &b)| a - b).collect();
        let lp_block = synthesize(op, &lp_sum, &coeffs);
        let kept = synthesize(op, &fine, &coeffs);
        let fine_rest: Vec<Dd> = f.iter().zip(&kept).map(|(&a, &b)| -b + a).collect();
        let tail = to_f64(&fine_rest);

        // h_k = trunc(ψ̃_k) f, carried as h_k μ
        let all = PointSet::full(nn);
        let hmu: Vec<Vec<f64>> = self
            .kernels
            .iter()
            .map(|sk| apply_on(&sk.psi_tilde, f, mu, &all).iter().zip(mu).map(|(a, m)| a * m).collect())
            .collect();
        let mut pieces_total = vec![Dd::ZERO; nn];
        for (sk, w) in self.kernels.iter().zip(&hmu) {
            accumulate(&mut pieces_total, &sk.effective, w, &all);
        }
        let budget_vec: Vec<f64> = lp_block.iter().zip(&pieces_total).map(|(&a, &b)| (a - b).to_f64()).collect();

        let grand = grand_maximal(op, space, f, &self.dictionary, &self.grid)?;
        let levels = level_sets(space, &grand.values, p, self.tau, (self.k_lo, self.k_hi), self.clip)?;
        let partition = levels.partition_check();

        let mut sum_f_r = vec![Dd::ZERO; nn];
        let mut pieces: Vec<Piece> = Vec::new();
        let mut summaries = Vec::new();
        let mut level_mass = 0.0;
        for r in levels.levels() {
            let omega = levels.omega(r);
            level_mass += 2f64.powf(p * r as f64) * space.mass(omega);
            let s_r = levels.s_r(r);
            let scales: Vec<usize> = (0..self.kernels.len()).filter(|&i| !levels.e_rk(r, self.kernels[i].k).is_empty()).collect();
            let mut f_r = vec![ExactSum::default(); nn];
            for &i in &scales {
                let e = levels.e_rk(r, self.kernels[i].k);
                accumulate_exact(&mut f_r, &self.kernels[i].effective, &hmu[i], e);
            }
            // (center, ρ_ℓ) pairs; the whole space gets one ball of radius 2^{−j}/2 ⋅ 2
            let cover: Vec<(usize, f64)> = if omega.is_full() {
                vec![(self.x0, 2.0 * 2f64.powi(-self.j))]
            } else {
                let c = whitney_cover(space, omega)?;
                c.centers.into_iter().zip(c.radii).collect()
            };
            let halves: Vec<PointSet> = cover.iter().map(|&(c, rho)| space.ball(c, rho / 2.0)).collect();
            let mut regrouped = vec![ExactSum::default(); nn];
            let mut atoms_here = 0;
            for (l, &(c, rho)) in cover.iter().enumerate() {
                let mut f_b = vec![ExactSum::default(); nn];
                let mut g_b = vec![Dd::ZERO; nn];
                for &i in &scales {
                    let sk = &self.kernels[i];
                    let e = levels.e_rk(r, sk.k);
                    let near = |b: &PointSet| -> PointSet {
                        PointSet::from_mask((0..nn).map(|x| e.contains(x) && space.dist_to_set(x, b) < 2.0 * sk.radius).collect())
                    };
                    let mut region = near(&halves[l]);
                    for later in halves.iter().skip(l + 1) {
                        region = region.difference(&near(later));
                    }
                    if region.is_empty() {
                        continue;
                    }
                    accumulate_exact(&mut f_b, &sk.effective, &hmu[i], &region);
                    accumulate(&mut g_b, &sk.g, &hmu[i], &region);
                }
                for x in 0..nn {
                    regrouped[x].merge(&f_b[x]);
                }
                let f_b: Vec<f64> = f_b.iter().map(ExactSum::value).collect();
                let g_b = to_f64(&g_b);
                if g_b.iter().all(|v| *v == 0.0) && f_b.iter().all(|v| *v == 0.0) {
                    continue;
                }
                // smallest ball around c holding the supports of L^k G for k ≤ n
                let mut support = PointSet::empty(nn);
                let mut lk = g_b.clone();
                for step in 0..=self.n {
                    if step > 0 {
                        lk = op.apply_l(&lk);
                    }
                    for (x, v) in lk.iter().enumerate() {
                        if *v != 0.0 {
                            support.insert(x);
                        }
                    }
                }
                let seven = 3.5 * rho;
                let radius = seven.max(enclosing_radius(space, c, &support));
                pieces.push((r, Ball { center: c, radius }, radius / seven, f_b, g_b));
                atoms_here += 1;
            }
            let defect = regrouped.iter().zip(&f_r).map(|(a, b)| (a.value() - b.value()).abs()).fold(0.0, f64::max);
            for x in 0..nn {
                sum_f_r[x] = sum_f_r[x] + f_r[x].to_dd();
            }
            summaries.push(LevelSummary {
                r,
                omega_size: omega.len(),
                omega_mass: space.mass(omega),
                s_r,
                balls: cover.len(),
                atoms: atoms_here,
                regroup_defect: defect,
                piece_sup: f_r.iter().map(|v| v.value().abs()).fold(0.0, f64::max),
            });
        }

        // c♯: smallest constant with ‖L^k b‖_∞ ≤ r^{2(n−k)}|B|^{−1/p} for every atom and k
        let powers: Vec<Vec<Vec<f64>>> = pieces
            .par_iter()
            .map(|(_, _, _, _, g_b)| {
                let mut out = vec![g_b.clone()];
                for _ in 0..self.n {
                    out.push(op.apply_l(out.last().expect("nonempty")));
                }
                out
            })
            .collect();
        let mut c_sharp = 0.0f64;
        for ((r, ball, _, _, _), lk) in pieces.iter().zip(&powers) {
            for (k, v) in lk.iter().enumerate() {
                let bound = ball.radius.powi(2 * (self.n - k) as i32);
                c_sharp = c_sharp.max(2f64.powi(-r) * sup(v) / bound);
            }
        }
        c_sharp *= 1.0 + 1e-12;

        let mut terms = Vec::with_capacity(pieces.len());
        let mut regular_budget = 0.0;
        for (r, ball, inflation, f_b, g_b) in pieces {
            let mass = space.ball_mass(ball.center, ball.radius);
            let lambda = c_sharp * mass.powf(1.0 / p) * 2f64.powi(r);
            let a: Vec<f64> = f_b.iter().map(|v| v / lambda).collect();
            let b: Vec<f64> = g_b.iter().map(|v| v / lambda).collect();
            let mut lk_b_sup = vec![sup(&b)];
            let mut cur = b.clone();
            for _ in 0..self.n {
                cur = op.apply_l(&cur);
                lk_b_sup.push(sup(&cur));
            }
            regular_budget += lambda.abs().powf(p);
            terms.push(Term {
                lambda,
                atom: Atom {
                    kind: AtomKind::Regular,
                    a,
                    b: Some(b),
                    ball,
                    ball_mass: mass,
                    n: self.n,
                    p,
                    lk_b_sup,
                    level: Some(r),
                    inflation,
                },
            });
        }

        let (outstanding, c_star) = match self.branch {
            Branch::Compact => {
                let f0 = &head;
                let f0_sup = sup(f0);
                if f0_sup > 0.0 {
                    let c_star = f0_sup * total_mass.powf(1.0 / p) / hp_norm * (1.0 + 1e-12);
                    let lambda = c_star * hp_norm;
                    let a: Vec<f64> = f0.iter().map(|v| v / lambda).collect();
                    let atom = Atom {
                        kind: AtomKind::Outstanding,
                        lk_b_sup: vec![sup(&a)],
                        a,
                        b: None,
                        ball: Ball { center: self.x0, radius: 2f64.powi(-self.j) },
                        ball_mass: total_mass,
                        n: self.n,
                        p,
                        level: None,
                        inflation: 1.0,
                    };
                    (Some(Term { lambda, atom }), Some(c_star))
                } else {
                    (None, None)
                }
            }
            Branch::Noncompact { .. } => (None, None),
        };
        let _ = c_star;

        let recon = reconstruct(nn, &terms, outstanding.as_ref());
        let residual: Vec<f64> = f.iter().zip(&recon).map(|(a, b)| a - b).collect();
        let f_norm = l2(f);
        let residual_norms = ResidualNorms {
            l2: l2(&residual),
            linf: sup(&residual),
            relative_l2: if f_norm > 0.0 { l2(&residual) / f_norm } else { 0.0 },
        };
        // f − f₀ − Σ_r F_r − tail, with f₀ and the tail kept in double-double
        let gap: Vec<f64> = (0..nn).map(|x| (-coarse_part[x] - sum_f_r[x] - fine_rest[x] + f[x]).to_f64()).collect();
        let budget = regular_budget + outstanding.as_ref().map_or(0.0, |t| t.lambda.abs().powf(p));
        Ok(AtomicDecomposition {
            p,
            n: self.n,
            d: self.d,
            c0: self.geometry.c0,
            tau: self.tau,
            j: self.j,
            k_range: (self.k_lo, self.k_hi),
            grand_order: self.grand_order,
            profile_order: self.profile_order,
            branch: self.branch.clone(),
            terms,
            outstanding: outstanding.clone(),
            residual,
            residual_norms,
            budget,
            regular_budget,
            level_mass,
            hp_norm,
            c_sharp,
            c_star: outstanding.as_ref().map(|t| t.lambda / hp_norm),
            truncation_log: TruncationLog {
                scales: self.kernels.iter().map(|s| s.leak.clone()).collect(),
                budget_l2: l2(&budget_vec),
                tail_l2: l2(&tail),
                head_l2: if matches!(self.branch, Branch::Noncompact { .. }) { l2(&head) } else { 0.0 },
            },
            levels: summaries,
            clipped_levels: levels.clipped.clone(),
            partition,
            identity: IdentityCheck { gap_l2: l2(&gap), budget_l2: l2(&budget_vec) },
        })
    }
}

/// `Σ λ_B a_B + λ_A A`.
pub fn reconstruct(n: usize, terms: &[Term], outstanding: Option<&Term>) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for t in terms.iter().chain(outstanding) {
        for (o, a) in out.iter_mut().zip(&t.atom.a) {
            *o += t.lambda * a;
        }
    }
    out
}

/// One-shot decomposition with a fresh [`Pipeline`].
pub fn decompose(
    space: &MetricMeasureSpace,
    op: &SpectralOperator,
    f: &[f64],
    config: &DecomposeConfig,
) -> Result<AtomicDecomposition, AtomicError> {
    Pipeline::new(space, op, config)?.decompose(f)
}

/// Outcome of checking an atom against its defining conditions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomReport {
    pub kind: AtomKind,
    /// `‖a − Lⁿb‖_∞ / ‖a‖_∞`.
    pub representation_residual: f64,
    pub representation_ok: bool,
    /// Points outside the ball where some `L^k b` is nonzero.
    pub support_leaks: usize,
    pub support_ok: bool,
    /// `min_k r^{2(n−k)}|B|^{−1/p} / ‖L^k b‖_∞`; at least 1 when the size condition holds.
    pub size_slack: f64,
    pub size_ok: bool,
}

impl AtomReport {
    pub fn passed(&self) -> bool {
        self.representation_ok && self.support_ok && self.size_ok
    }
}

pub const REPRESENTATION_TOL: f64 = 1e-9;

pub fn validate_atom(space: &MetricMeasureSpace, op: &SpectralOperator, atom: &Atom) -> AtomReport {
    let mass = space.ball_mass(atom.ball.center, atom.ball.radius);
    let inv = mass.powf(-1.0 / atom.p);
    match (&atom.kind, &atom.b) {
        (AtomKind::Regular, Some(b)) => {
            let ball = space.ball(atom.ball.center, atom.ball.radius);
            let mut leaks = PointSet::empty(space.len());
            let mut slack = f64::INFINITY;
            let mut cur = b.clone();
            for k in 0..=atom.n {
                if k > 0 {
                    cur = op.apply_l(&cur);
                }
                for (x, v) in cur.iter().enumerate() {
                    if *v != 0.0 && !ball.contains(x) {
                        leaks.insert(x);
                    }
                }
                let s = sup(&cur);
                if s > 0.0 {
                    slack = slack.min(atom.ball.radius.powi(2 * (atom.n - k) as i32) * inv / s);
                }
            }
            let a_sup = sup(&atom.a);
            let diff = atom.a.iter().zip(&cur).map(|(a, l)| (a - l).abs()).fold(0.0, f64::max);
            let rel = if a_sup > 0.0 { diff / a_sup } else { diff };
            AtomReport {
                kind: atom.kind,
                representation_residual: rel,
                representation_ok: rel < REPRESENTATION_TOL,
                support_leaks: leaks.len(),
                support_ok: leaks.is_empty(),
                size_slack: slack,
                size_ok: slack >= 1.0,
            }
        }
        _ => {
            let bound = space.total_mass().powf(-1.0 / atom.p);
            let s = sup(&atom.a);
            let slack = if s > 0.0 { bound / s } else { f64::INFINITY };
            let regular_without_b = atom.kind == AtomKind::Regular;
            AtomReport {
                kind: atom.kind,
                representation_residual: 0.0,
                representation_ok: !regular_without_b,
                support_leaks: 0,
                support_ok: true,
                size_slack: slack,
                size_ok: slack >= 1.0,
            }
        }
    }
}

/// `‖a‖_{H^p}` with the heat maximal function.
pub fn atom_hp_norm(op: &SpectralOperator, atom: &Atom, grid: &TGrid) -> Result<f64, AtomicError> {
    Ok(hp_quasinorm(op, &atom.a, atom.p, grid, &Flavor::Heat)?)
}

/// A regular atom `a = Lⁿb` with `b` a normalized bump on `B(c, r − n·step)`, where
/// `step` is the propagation distance of one application of `L`.
pub fn bump_atom(
    space: &MetricMeasureSpace,
    op: &SpectralOperator,
    center: usize,
    radius: f64,
    n: usize,
    p: f64,
) -> Option<Atom> {
    let step = op.propagation_step(space);
    let inner = radius - n as f64 * step;
    if inner <= 0.0 {
        return None;
    }
    let b0: Vec<f64> = (0..space.len())
        .map(|x| {
            let s = space.dist(center, x) / inner;
            if s < 1.0 {
                (1.0 - s * s).powi(2)
            } else {
                0.0
            }
        })
        .collect();
    let mut powers = vec![b0.clone()];
    for _ in 0..n {
        powers.push(op.apply_l(powers.last().expect("nonempty")));
    }
    let mass = space.ball_mass(center, radius);
    let scale = powers
        .iter()
        .enumerate()
        .map(|(k, v)| sup(v) / (radius.powi(2 * (n - k) as i32) * mass.powf(-1.0 / p)))
        .fold(0.0f64, f64::max)
        * (1.0 + 1e-12);
    if !(scale > 0.0) {
        return None;
    }
    let b: Vec<f64> = b0.iter().map(|v| v / scale).collect();
    let mut cur = b.clone();
    let mut lk_b_sup = vec![sup(&b)];
    for _ in 0..n {
        cur = op.apply_l(&cur);
        lk_b_sup.push(sup(&cur));
    }
    Some(Atom {
        kind: AtomKind::Regular,
        a: cur,
        b: Some(b),
        ball: Ball { center, radius },
        ball_mass: mass,
        n,
        p,
        lk_b_sup,
        level: None,
        inflation: 1.0,
    })
}
