//! The operator `L`, its eigensystem, and the functional calculus `f(t√L)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::profiles::{LpPair, Profile};
use crate::quadrature::{QuadratureNotConverged, SubordinationRule};
use crate::space::MetricMeasureSpace;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("matrix is {rows}x{cols}, expected {n}x{n}")]
    DimensionMismatch { rows: usize, cols: usize, n: usize },
    #[error("adjacency is not symmetric at ({0}, {1})")]
    AsymmetricAdjacency(usize, usize),
    #[error("adjacency entry ({0}, {1}) is negative, non-finite or on the diagonal")]
    InvalidAdjacency(usize, usize),
    #[error("graph is disconnected (point {0} unreachable from 0)")]
    Disconnected(usize),
    #[error("measure entry {0} is not positive")]
    NonpositiveMass(usize),
    #[error("operator is not self-adjoint in L²(μ): residual {0:.3e}")]
    NotSelfAdjoint(f64),
    #[error("operator has negative eigenvalue {0:.3e}")]
    NegativeSpectrum(f64),
    #[error("eigenvectors fail μ-orthonormality: residual {0:.3e}")]
    EigenvectorsNotOrthonormal(f64),
    #[error("profile defined up to {available} but t·√λ_max = {needed}")]
    ProfileDomainTooSmall { needed: f64, available: f64 },
    #[error("scale must be positive, got {0}")]
    NonpositiveScale(f64),
    #[error(transparent)]
    Quadrature(#[from] QuadratureNotConverged),
    #[error("heat-kernel fit has no usable data: {0}")]
    FitDegenerate(String),
}

/// How the measure of a graph model is chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureMode {
    Degree,
    Uniform,
    Custom(Vec<f64>),
}

/// A μ-self-adjoint non-negative matrix with its cached eigensystem.
#[derive(Clone, Debug)]
pub struct SpectralOperator {
    l: DMatrix<f64>,
    mu: Vec<f64>,
    eigenvalues: Vec<f64>,
    /// Columns form a μ-orthonormal eigenbasis.
    eigenvectors: DMatrix<f64>,
    markov: bool,
}

/// A kernel `K(x,y)`, acting as `(Kf)(x) = Σ_y K(x,y) f(y) μ(y)`.
#[derive(Clone, Debug)]
pub struct KernelMatrix {
    pub entries: DMatrix<f64>,
    pub t: f64,
    pub label: String,
}

impl KernelMatrix {
    pub fn apply(&self, f: &[f64], mu: &[f64]) -> Vec<f64> {
        let n = f.len();
        (0..n).map(|x| (0..n).map(|y| self.entries[(x, y)] * f[y] * mu[y]).sum()).collect()
    }

    /// `Σ_y K(x,y) μ(y)` for each `x`.
    pub fn row_sums(&self, mu: &[f64]) -> Vec<f64> {
        self.apply(&vec![1.0; mu.len()], mu)
    }

    /// Kernel of the composition `self ∘ other`.
    pub fn compose(&self, other: &KernelMatrix, mu: &[f64]) -> DMatrix<f64> {
        let m = DMatrix::from_diagonal(&DVector::from_column_slice(mu));
        &self.entries * m * &other.entries
    }

    pub fn symmetry_residual(&self) -> f64 {
        (&self.entries - self.entries.transpose()).amax()
    }
}

impl SpectralOperator {
    /// `L = M⁻¹(D − A)`; for the degree measure this is `I − D⁻¹A`.
    pub fn from_weighted_graph(adjacency: &DMatrix<f64>, mode: &MeasureMode) -> Result<Self, SpectralError> {
        let n = adjacency.nrows();
        if adjacency.ncols() != n {
            return Err(SpectralError::DimensionMismatch { rows: n, cols: adjacency.ncols(), n });
        }
        for i in 0..n {
            for j in 0..n {
                let a = adjacency[(i, j)];
                if !(a >= 0.0 && a.is_finite()) || (i == j && a != 0.0) {
                    return Err(SpectralError::InvalidAdjacency(i, j));
                }
                if a != adjacency[(j, i)] {
                    return Err(SpectralError::AsymmetricAdjacency(i, j));
                }
            }
        }
        check_connected(adjacency)?;
        let deg: Vec<f64> = (0..n).map(|i| adjacency.row(i).sum()).collect();
        let mu = match mode {
            MeasureMode::Degree => deg.clone(),
            MeasureMode::Uniform => vec![1.0; n],
            MeasureMode::Custom(m) => {
                if m.len() != n {
                    return Err(SpectralError::DimensionMismatch { rows: m.len(), cols: 1, n });
                }
                m.clone()
            }
        };
        let l = DMatrix::from_fn(n, n, |i, j| {
            let dij = if i == j { deg[i] } else { 0.0 };
            (dij - adjacency[(i, j)]) / mu[i]
        });
        Self::from_matrix(l, mu)
    }

    /// Wraps an arbitrary matrix that is self-adjoint and non-negative in `L²(μ)`.
    pub fn from_matrix(l: DMatrix<f64>, mu: Vec<f64>) -> Result<Self, SpectralError> {
        let n = mu.len();
        if l.nrows() != n || l.ncols() != n {
            return Err(SpectralError::DimensionMismatch { rows: l.nrows(), cols: l.ncols(), n });
        }
        if let Some(i) = mu.iter().position(|&m| !(m > 0.0 && m.is_finite())) {
            return Err(SpectralError::NonpositiveMass(i));
        }
        let norm = l.amax().max(f64::MIN_POSITIVE);
        let mut asym = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                asym = asym.max((mu[i] * l[(i, j)] - mu[j] * l[(j, i)]).abs() / mu[i].max(mu[j]));
            }
        }
        if asym > 1e-10 * norm {
            return Err(SpectralError::NotSelfAdjoint(asym));
        }
        let sq: Vec<f64> = mu.iter().map(|m| m.sqrt()).collect();
        let s = DMatrix::from_fn(n, n, |i, j| {
            let a = sq[i] * l[(i, j)] / sq[j];
            let b = sq[j] * l[(j, i)] / sq[i];
            0.5 * (a + b)
        });
        let eig = SymmetricEigen::new(s);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let lam_max = order.last().map_or(0.0, |&i| eig.eigenvalues[i]).max(0.0);
        let lam_min = order.first().map_or(0.0, |&i| eig.eigenvalues[i]);
        if lam_min < -1e-10 * lam_max.max(norm) {
            return Err(SpectralError::NegativeSpectrum(lam_min));
        }
        // eigenvalues at rounding level are zero; otherwise `√λ` turns 1e-16 into 1e-8
        let floor = 64.0 * f64::EPSILON * lam_max.max(norm);
        let eigenvalues: Vec<f64> =
            order.iter().map(|&i| eig.eigenvalues[i]).map(|l| if l <= floor { 0.0 } else { l }).collect();
        let mut eigenvectors = DMatrix::from_fn(n, n, |x, k| eig.eigenvectors[(x, order[k])] / sq[x]);
        let l1 = (0..n).map(|i| l.row(i).sum().abs()).fold(0.0, f64::max);
        let markov = l1 < 1e-12 * norm;
        if markov && n > 0 && eigenvalues.get(1).is_none_or(|&l| l > 0.0) {
            let c = 1.0 / mu.iter().sum::<f64>().sqrt();
            eigenvectors.column_mut(0).fill(c);
        }
        let op = Self { markov, l, mu, eigenvalues, eigenvectors };
        let orth = op.orthonormality_residual();
        if orth > 1e-8 {
            return Err(SpectralError::EigenvectorsNotOrthonormal(orth));
        }
        Ok(op)
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn markov(&self) -> bool {
        self.markov
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    /// `max |VᵀMV − I|`.
    pub fn orthonormality_residual(&self) -> f64 {
        let m = DMatrix::from_diagonal(&DVector::from_column_slice(&self.mu));
        let g = self.eigenvectors.transpose() * m * &self.eigenvectors;
        (g - DMatrix::identity(self.len(), self.len())).amax()
    }

    /// Coefficients `⟨f, v_i⟩_μ` in the eigenbasis.
    pub fn analyze(&self, f: &[f64]) -> DVector<f64> {
        let wf = DVector::from_iterator(f.len(), f.iter().zip(&self.mu).map(|(a, m)| a * m));
        self.eigenvectors.tr_mul(&wf)
    }

    /// `Σ_i w_i c_i v_i`.
    pub fn synthesize(&self, coeffs: &DVector<f64>, weights: &[f64]) -> Vec<f64> {
        let wc = DVector::from_iterator(coeffs.len(), coeffs.iter().zip(weights).map(|(c, w)| c * w));
        (&self.eigenvectors * wc).as_slice().to_vec()
    }

    /// `g(L) f` where `weights[i] = g(λ_i)`.
    pub fn apply_weights(&self, weights: &[f64], f: &[f64]) -> Vec<f64> {
        self.synthesize(&self.analyze(f), weights)
    }

    /// Kernel of `g(L)` for `weights[i] = g(λ_i)`.
    pub fn kernel_from_weights(&self, weights: &[f64]) -> DMatrix<f64> {
        let n = self.len();
        let mut scaled = self.eigenvectors.clone();
        for (k, &w) in weights.iter().enumerate().take(n) {
            scaled.column_mut(k).scale_mut(w);
        }
        scaled * self.eigenvectors.transpose()
    }

    /// Weights `f(t√λ_i)`, checking the profile's domain.
    pub fn profile_weights(&self, f: &Profile, t: f64) -> Result<Vec<f64>, SpectralError> {
        if !(t > 0.0) {
            return Err(SpectralError::NonpositiveScale(t));
        }
        let needed = t * self.lambda_max().sqrt();
        if needed > f.domain() {
            return Err(SpectralError::ProfileDomainTooSmall { needed, available: f.domain() });
        }
        Ok(self.eigenvalues.iter().map(|&l| f.eval(t * l.sqrt())).collect())
    }

    pub fn apply_profile(&self, f: &Profile, t: f64) -> Result<KernelMatrix, SpectralError> {
        let w = self.profile_weights(f, t)?;
        Ok(KernelMatrix { entries: self.kernel_from_weights(&w), t, label: f.name().to_string() })
    }

    /// `p_t`, the kernel of `e^{−tL}`.
    pub fn heat_kernel(&self, t: f64) -> Result<KernelMatrix, SpectralError> {
        if !(t > 0.0) {
            return Err(SpectralError::NonpositiveScale(t));
        }
        let w: Vec<f64> = self.eigenvalues.iter().map(|l| (-t * l).exp()).collect();
        Ok(KernelMatrix { entries: self.kernel_from_weights(&w), t, label: "heat".into() })
    }

    /// Kernel of `e^{−t√L}` from the spectrum.
    pub fn poisson_direct(&self, t: f64) -> Result<KernelMatrix, SpectralError> {
        if !(t > 0.0) {
            return Err(SpectralError::NonpositiveScale(t));
        }
        let w: Vec<f64> = self.eigenvalues.iter().map(|l| (-t * l.sqrt()).exp()).collect();
        Ok(KernelMatrix { entries: self.kernel_from_weights(&w), t, label: "poisson".into() })
    }

    /// Kernel of `e^{−t√L}` as a heat-semigroup average.
    ///
    /// `e^{−t√λ} = π^{−1/2} ∫₀^∞ u^{−1/2} e^{−u} e^{−(t²/4u)λ} du`; the result with
    /// `nodes` is compared against `2·nodes` and rejected if they differ by more
    /// than `tol` in max-norm.
    pub fn poisson_subordinated(&self, t: f64, nodes: usize, tol: f64) -> Result<KernelMatrix, SpectralError> {
        if !(t > 0.0) {
            return Err(SpectralError::NonpositiveScale(t));
        }
        let weights = |rule: &SubordinationRule| -> Vec<f64> {
            let c = t * t / 4.0;
            self.eigenvalues.iter().map(|&l| rule.apply(|u| (-c * l / u).exp()) / PI.sqrt()).collect()
        };
        let coarse = self.kernel_from_weights(&weights(&SubordinationRule::new(nodes.max(2))));
        let fine = self.kernel_from_weights(&weights(&SubordinationRule::new(2 * nodes.max(2))));
        let diff = (&coarse - &fine).amax();
        if diff > tol {
            return Err(QuadratureNotConverged { error: diff, tolerance: tol }.into());
        }
        Ok(KernelMatrix { entries: coarse, t, label: "poisson-subordinated".into() })
    }

    pub fn apply_l(&self, f: &[f64]) -> Vec<f64> {
        let n = f.len();
        (0..n).map(|x| (0..n).map(|y| self.l[(x, y)] * f[y]).sum()).collect()
    }

    pub fn apply_l_pow(&self, f: &[f64], k: usize) -> Vec<f64> {
        (0..k).fold(f.to_vec(), |g, _| self.apply_l(&g))
    }

    /// Largest distance between `x ≠ y` with `L(x,y) ≠ 0`: one application of `L`
    /// spreads supports by at most this much.
    pub fn propagation_step(&self, space: &MetricMeasureSpace) -> f64 {
        let n = self.len();
        let mut step = 0.0f64;
        for x in 0..n {
            for y in 0..n {
                if x != y && self.l[(x, y)] != 0.0 {
                    step = step.max(space.dist(x, y));
                }
            }
        }
        step
    }
}

fn check_connected(adj: &DMatrix<f64>) -> Result<(), SpectralError> {
    let n = adj.nrows();
    if n == 0 {
        return Ok(());
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(x) = stack.pop() {
        for y in 0..n {
            if adj[(x, y)] > 0.0 && !seen[y] {
                seen[y] = true;
                stack.push(y);
            }
        }
    }
    match seen.iter().position(|s| !s) {
        Some(i) => Err(SpectralError::Disconnected(i)),
        None => Ok(()),
    }
}

/// Fitted Gaussian-bound and Hölder constants of the heat kernel.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HeatDiagnostics {
    /// Prefactor making the fitted Gaussian bound hold on every sampled entry.
    pub c_upper: f64,
    /// Gaussian exponent `c*`.
    pub c_star: f64,
    /// Hölder exponent from kernel increments; `None` if no admissible pairs.
    pub alpha: Option<f64>,
    pub markov_defect: f64,
    pub fit_range: (f64, f64),
    pub samples: usize,
}

impl HeatDiagnostics {
    /// `c̃ = 1/(2√c*)`.
    pub fn c_tilde(&self) -> f64 {
        0.5 / self.c_star.sqrt()
    }

    /// Locality constant `τ = max(1, 2c̃)`.
    pub fn tau(&self) -> f64 {
        (2.0 * self.c_tilde()).max(1.0)
    }
}

/// Default fit grid `t ∈ {r², 2r², …, 16r²}` with `r` the space resolution.
pub fn default_fit_grid(space: &MetricMeasureSpace) -> Vec<f64> {
    let r2 = space.resolution().powi(2);
    (0..5).map(|e| r2 * f64::from(1u32 << e)).collect()
}

/// Least-squares fit of `log p_t(x,y) + ½log(|B(x,√t)||B(y,√t)|)` against `−ρ²/t`.
///
/// The Markov defect is measured on the whole grid; the Gaussian and Hölder fits
/// use only `t ≥ resolution²`, below which a discrete space has no spatial structure.
pub fn fit_heat_constants(
    op: &SpectralOperator,
    space: &MetricMeasureSpace,
    t_grid: &[f64],
) -> Result<HeatDiagnostics, SpectralError> {
    let n = op.len();
    let mu = op.mu();
    let t_floor = space.resolution().powi(2) * (1.0 - 1e-12);
    let mut markov_defect = 0.0f64;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let mut diag_logs = Vec::new();
    let (mut hx, mut hy) = (Vec::new(), Vec::new());
    let mut range = (f64::INFINITY, f64::NEG_INFINITY);
    for &t in t_grid {
        let p = op.heat_kernel(t)?;
        for s in p.row_sums(mu) {
            markov_defect = markov_defect.max((s - 1.0).abs());
        }
        if t < t_floor {
            continue;
        }
        range = (range.0.min(t), range.1.max(t));
        let st = t.sqrt();
        let vol: Vec<f64> = (0..n).map(|x| space.ball_mass(x, st)).collect();
        for x in 0..n {
            for y in 0..n {
                let pxy = p.entries[(x, y)];
                if pxy <= 1e-14 {
                    continue;
                }
                let lhs = pxy.ln() + 0.5 * (vol[x] * vol[y]).ln();
                if x == y {
                    diag_logs.push(lhs);
                } else {
                    xs.push(-space.dist(x, y).powi(2) / t);
                    ys.push(lhs);
                }
                for y2 in 0..n {
                    let r = space.dist(y, y2);
                    if y2 == y || r > st {
                        continue;
                    }
                    let inc = (pxy - p.entries[(x, y2)]).abs() * (vol[x] * vol[y]).sqrt();
                    if inc > 1e-14 {
                        hx.push((r / st).ln());
                        hy.push(inc.ln());
                    }
                }
            }
        }
    }
    if xs.len() < 2 {
        return Err(SpectralError::FitDegenerate(format!("{} off-diagonal samples", xs.len())));
    }
    let (_, c_star) = least_squares(&xs, &ys)
        .ok_or_else(|| SpectralError::FitDegenerate("all samples share one distance ratio".into()))?;
    if !(c_star > 0.0) {
        return Err(SpectralError::FitDegenerate(format!("non-positive exponent {c_star:.3e}")));
    }
    let log_c = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| y - c_star * x)
        .chain(diag_logs.iter().copied())
        .fold(f64::NEG_INFINITY, f64::max);
    let alpha = least_squares(&hx, &hy).map(|(_, slope)| slope);
    Ok(HeatDiagnostics {
        c_upper: log_c.exp(),
        c_star,
        alpha,
        markov_defect,
        fit_range: range,
        samples: xs.len(),
    })
}

/// `(intercept, slope)` of the ordinary least-squares line, if determined.
fn least_squares(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len() as f64;
    if x.len() < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx <= 1e-300 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some((my - slope * mx, slope))
}

/// Per-scale kernel mass outside the nominal propagation radius.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FiniteSpeedReport {
    pub applicable: bool,
    pub tau: f64,
    /// `(k, max |ψ_k(x,y)| beyond τ2^{−k}, same relative to max |ψ_k|)`.
    pub leakage: Vec<(i32, f64, f64)>,
}

pub fn finite_speed_check(
    op: &SpectralOperator,
    space: &MetricMeasureSpace,
    pair: &LpPair,
    k_range: std::ops::RangeInclusive<i32>,
    tau: f64,
) -> Result<FiniteSpeedReport, SpectralError> {
    if pair.phi.bandlimit().is_none() {
        return Ok(FiniteSpeedReport { applicable: false, tau, leakage: Vec::new() });
    }
    let n = op.len();
    let mut leakage = Vec::new();
    for k in k_range {
        let scale = 2f64.powi(-k);
        let kern = op.apply_profile(&pair.psi, scale)?;
        let radius = tau * scale;
        let (mut out, mut all) = (0.0f64, 0.0f64);
        for x in 0..n {
            for y in 0..n {
                let v = kern.entries[(x, y)].abs();
                all = all.max(v);
                if space.dist(x, y) > radius {
                    out = out.max(v);
                }
            }
        }
        leakage.push((k, out, if all > 0.0 { out / all } else { 0.0 }));
    }
    Ok(FiniteSpeedReport { applicable: true, tau, leakage })
}

/// Smallest `c` with `|f(t√L)(x,y)| ≤ c |B(x,t)|⁻¹ (1 + ρ(x,y)/t)^{−m+d/2}` on all pairs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LocalizationReport {
    pub t: f64,
    pub m: f64,
    pub constant: f64,
}

pub fn kernel_localization_check(
    op: &SpectralOperator,
    space: &MetricMeasureSpace,
    f: &Profile,
    t: f64,
    m: f64,
    d: f64,
) -> Result<LocalizationReport, SpectralError> {
    let kern = op.apply_profile(f, t)?;
    let n = op.len();
    let mut c = 0.0f64;
    for x in 0..n {
        let vol = space.ball_mass(x, t);
        for y in 0..n {
            let w = (1.0 + space.dist(x, y) / t).powf(m - d / 2.0);
            c = c.max(kern.entries[(x, y)].abs() * vol * w);
        }
    }
    Ok(LocalizationReport { t, m, constant: c })
}
