//! Finite metric measure spaces, balls and geometric diagnostics.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative slack used when validating floating-point distance data.
const METRIC_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("distance matrix is {rows}x{cols} but measure has {len} entries")]
    DimensionMismatch { rows: usize, cols: usize, len: usize },
    #[error("space has no points")]
    Empty,
    #[error("distance is not symmetric at ({0}, {1})")]
    AsymmetricDistance(usize, usize),
    #[error("distance entry ({0}, {1}) is invalid (negative, non-finite, or nonzero diagonal)")]
    InvalidDistance(usize, usize),
    #[error("distinct points {0} and {1} are at distance zero")]
    CoincidentPoints(usize, usize),
    #[error("triangle inequality fails for ({i}, {j}, {k}): {direct} > {via}")]
    TriangleViolation { i: usize, j: usize, k: usize, direct: f64, via: f64 },
    #[error("measure entry {0} is not a positive finite number")]
    NonpositiveMass(usize),
    #[error("edge list leaves point {0} unreachable")]
    Disconnected(usize),
    #[error("edge ({0}, {1}) is invalid")]
    InvalidEdge(usize, usize),
}

/// A subset of the points of a space, stored as a membership mask.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PointSet {
    bits: Vec<bool>,
}

impl PointSet {
    pub fn empty(n: usize) -> Self {
        Self { bits: vec![false; n] }
    }

    pub fn full(n: usize) -> Self {
        Self { bits: vec![true; n] }
    }

    pub fn from_mask(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn from_indices(n: usize, idx: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(n);
        for i in idx {
            s.bits[i] = true;
        }
        s
    }

    /// Size of the ambient space.
    pub fn universe(&self) -> usize {
        self.bits.len()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn insert(&mut self, i: usize) {
        self.bits[i] = true;
    }

    pub fn remove(&mut self, i: usize) {
        self.bits[i] = false;
    }

    pub fn len(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn is_full(&self) -> bool {
        self.bits.iter().all(|&b| b)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    pub fn mask(&self) -> &[bool] {
        &self.bits
    }

    pub fn complement(&self) -> Self {
        Self { bits: self.bits.iter().map(|b| !b).collect() }
    }

    pub fn union(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a && b)
    }

    pub fn difference(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a && !b)
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    pub fn intersects(&self, other: &Self) -> bool {
        self.bits.iter().zip(&other.bits).any(|(&a, &b)| a && b)
    }

    fn zip(&self, other: &Self, op: impl Fn(bool, bool) -> bool) -> Self {
        assert_eq!(self.bits.len(), other.bits.len(), "point sets from different spaces");
        Self { bits: self.bits.iter().zip(&other.bits).map(|(&a, &b)| op(a, b)).collect() }
    }
}

/// A finite set of points with a metric and a positive measure.
#[derive(Clone, Debug)]
pub struct MetricMeasureSpace {
    dist: DMatrix<f64>,
    measure: Vec<f64>,
    diam: f64,
    /// Sorted distinct positive distances.
    levels: Vec<f64>,
}

impl MetricMeasureSpace {
    /// Validates a distance matrix and measure.
    pub fn new(dist: DMatrix<f64>, measure: Vec<f64>) -> Result<Self, SpaceError> {
        let n = measure.len();
        if dist.nrows() != n || dist.ncols() != n {
            return Err(SpaceError::DimensionMismatch { rows: dist.nrows(), cols: dist.ncols(), len: n });
        }
        if n == 0 {
            return Err(SpaceError::Empty);
        }
        for (i, &m) in measure.iter().enumerate() {
            if !(m > 0.0 && m.is_finite()) {
                return Err(SpaceError::NonpositiveMass(i));
            }
        }
        let mut diam = 0.0f64;
        for i in 0..n {
            if dist[(i, i)] != 0.0 {
                return Err(SpaceError::InvalidDistance(i, i));
            }
            for j in 0..n {
                let d = dist[(i, j)];
                if !(d >= 0.0 && d.is_finite()) {
                    return Err(SpaceError::InvalidDistance(i, j));
                }
                if i != j && d == 0.0 {
                    return Err(SpaceError::CoincidentPoints(i, j));
                }
                if (d - dist[(j, i)]).abs() > METRIC_TOL * d.max(1.0) {
                    return Err(SpaceError::AsymmetricDistance(i, j));
                }
                diam = diam.max(d);
            }
        }
        for i in 0..n {
            for j in 0..n {
                let direct = dist[(i, j)];
                for k in 0..n {
                    let via = dist[(i, k)] + dist[(k, j)];
                    if direct > via + METRIC_TOL * via.max(1.0) {
                        return Err(SpaceError::TriangleViolation { i, j, k, direct, via });
                    }
                }
            }
        }
        let mut levels: Vec<f64> = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                levels.push(dist[(i, j)]);
            }
        }
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        Ok(Self { dist, measure, diam, levels })
    }

    /// Shortest-path metric of a weighted undirected edge list (weights are lengths).
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)], measure: Vec<f64>) -> Result<Self, SpaceError> {
        let mut d = DMatrix::from_element(n, n, f64::INFINITY);
        for i in 0..n {
            d[(i, i)] = 0.0;
        }
        for &(a, b, w) in edges {
            if a >= n || b >= n || a == b || !(w > 0.0 && w.is_finite()) {
                return Err(SpaceError::InvalidEdge(a, b));
            }
            let w = w.min(d[(a, b)]);
            d[(a, b)] = w;
            d[(b, a)] = w;
        }
        floyd_warshall(&mut d);
        for j in 0..n {
            if d[(0, j)].is_infinite() {
                return Err(SpaceError::Disconnected(j));
            }
        }
        Self::new(d, measure)
    }

    pub fn len(&self) -> usize {
        self.measure.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measure.is_empty()
    }

    pub fn dist(&self, x: usize, y: usize) -> f64 {
        self.dist[(x, y)]
    }

    pub fn dist_matrix(&self) -> &DMatrix<f64> {
        &self.dist
    }

    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    pub fn total_mass(&self) -> f64 {
        self.measure.iter().sum()
    }

    pub fn diam(&self) -> f64 {
        self.diam
    }

    /// Sorted distinct positive pairwise distances.
    pub fn distance_levels(&self) -> &[f64] {
        &self.levels
    }

    /// Smallest positive distance, or `diam` for a one-point space.
    pub fn resolution(&self) -> f64 {
        self.levels.first().copied().unwrap_or(1.0)
    }

    /// The open ball `{y : ρ(x,y) < r}`.
    pub fn ball(&self, x: usize, r: f64) -> PointSet {
        PointSet::from_mask((0..self.len()).map(|y| self.dist[(x, y)] < r).collect())
    }

    pub fn ball_mass(&self, x: usize, r: f64) -> f64 {
        (0..self.len()).filter(|&y| self.dist[(x, y)] < r).map(|y| self.measure[y]).sum()
    }

    pub fn mass(&self, s: &PointSet) -> f64 {
        s.iter().map(|i| self.measure[i]).sum()
    }

    /// `inf_{y∈S} ρ(x,y)`, with `+∞` for the empty set.
    pub fn dist_to_set(&self, x: usize, s: &PointSet) -> f64 {
        s.iter().map(|y| self.dist[(x, y)]).fold(f64::INFINITY, f64::min)
    }

    /// Distance from `x` to the set, for every `x` at once.
    pub fn dist_field(&self, s: &PointSet) -> Vec<f64> {
        (0..self.len()).map(|x| self.dist_to_set(x, s)).collect()
    }

    /// `inf` distance between two sets (`+∞` if either is empty).
    pub fn set_distance(&self, a: &PointSet, b: &PointSet) -> f64 {
        a.iter().map(|x| self.dist_to_set(x, b)).fold(f64::INFINITY, f64::min)
    }

    pub fn eccentricity(&self, x: usize) -> f64 {
        (0..self.len()).map(|y| self.dist[(x, y)]).fold(0.0, f64::max)
    }

    /// Point of minimal eccentricity (ties to the lowest index).
    pub fn center(&self) -> usize {
        let mut best = 0;
        for x in 1..self.len() {
            if self.eccentricity(x) < self.eccentricity(best) {
                best = x;
            }
        }
        best
    }

    /// Radii at which every realizable pair (B(x,r), B(x,2r)) is attained.
    ///
    /// Ball contents jump only at distance values `δ` (for `r`) and `δ/2` (for `2r`);
    /// both are constant on each interval `(b_i, b_{i+1}]` of the merged breakpoints,
    /// so evaluating at the breakpoints themselves, at midpoints, and once beyond
    /// the diameter visits every distinct configuration.
    pub fn radii_grid(&self) -> Vec<f64> {
        let mut bp: Vec<f64> = Vec::with_capacity(3 * self.levels.len() + 2);
        for &d in &self.levels {
            bp.push(d);
            bp.push(d / 2.0);
        }
        bp.sort_by(f64::total_cmp);
        bp.dedup();
        let mut grid = Vec::with_capacity(2 * bp.len() + 2);
        let mut prev = 0.0;
        for &b in &bp {
            grid.push(0.5 * (prev + b));
            grid.push(b);
            prev = b;
        }
        grid.push(2.0 * self.diam.max(prev) + 1.0);
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        grid
    }

    /// Median over points of the nearest-neighbour distance.
    pub fn median_nearest_distance(&self) -> f64 {
        let n = self.len();
        if n < 2 {
            return 1.0;
        }
        let mut nn: Vec<f64> = (0..n)
            .map(|x| (0..n).filter(|&y| y != x).map(|y| self.dist[(x, y)]).fold(f64::INFINITY, f64::min))
            .collect();
        nn.sort_by(f64::total_cmp);
        if n % 2 == 1 {
            nn[n / 2]
        } else {
            0.5 * (nn[n / 2 - 1] + nn[n / 2])
        }
    }

    /// Doubling, reverse-doubling and non-collapse diagnostics.
    pub fn geometry_report(&self) -> GeometryReport {
        self.geometry_report_with_unit(self.median_nearest_distance())
    }

    pub fn geometry_report_with_unit(&self, unit: f64) -> GeometryReport {
        let grid = self.radii_grid();
        let third = self.diam / 3.0;
        let mut c0 = 1.0f64;
        let mut c1 = f64::INFINITY;
        for x in 0..self.len() {
            for &r in &grid {
                let ratio = self.ball_mass(x, 2.0 * r) / self.ball_mass(x, r);
                c0 = c0.max(ratio);
                if r <= third {
                    c1 = c1.min(ratio);
                }
            }
        }
        let reverse_tested = c1.is_finite();
        if !reverse_tested {
            c1 = 1.0;
        }
        let c2 = (0..self.len()).map(|x| self.ball_mass(x, unit)).fold(f64::INFINITY, f64::min);
        GeometryReport { c0, d: c0.log2(), c1, c2, epsilon: c1.log2(), unit, reverse_tested }
    }
}

/// Scale-invariant geometric constants of a space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryReport {
    /// Doubling constant.
    pub c0: f64,
    /// Homogeneous dimension `log₂ c0`.
    pub d: f64,
    /// Reverse doubling constant over radii up to `diam/3`.
    pub c1: f64,
    /// `min_x μ(B(x, unit))`.
    pub c2: f64,
    /// Reverse doubling exponent `log₂ c1`.
    pub epsilon: f64,
    /// Length mapped to the unit scale.
    pub unit: f64,
    /// Whether any test radius satisfied `r ≤ diam/3`.
    pub reverse_tested: bool,
}

pub(crate) fn floyd_warshall(d: &mut DMatrix<f64>) {
    let n = d.nrows();
    for k in 0..n {
        for i in 0..n {
            let dik = d[(i, k)];
            if dik.is_infinite() {
                continue;
            }
            for j in 0..n {
                let via = dik + d[(k, j)];
                if via < d[(i, j)] {
                    d[(i, j)] = via;
                }
            }
        }
    }
}
