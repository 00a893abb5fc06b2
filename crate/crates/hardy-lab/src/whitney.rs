//! Whitney-type ball covers of a proper subset `Ω ⊂ M`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::space::{GeometryReport, MetricMeasureSpace, PointSet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WhitneyError {
    #[error("Ω must be a nonempty proper subset (has {size} of {total} points)")]
    NotProperSubset { size: usize, total: usize },
    #[error("set is over {got} points but the space has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Balls `B(ξ_j, ρ_j/2)` with `ρ_j = dist(ξ_j, Ω^c)`, sorted by nonincreasing `ρ_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WhitneyCover {
    pub omega: Vec<usize>,
    pub centers: Vec<usize>,
    pub radii: Vec<f64>,
}

impl WhitneyCover {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn omega_set(&self, n: usize) -> PointSet {
        PointSet::from_indices(n, self.omega.iter().copied())
    }

    /// `B(ξ_j, s·ρ_j)`.
    pub fn ball(&self, space: &MetricMeasureSpace, j: usize, s: f64) -> PointSet {
        space.ball(self.centers[j], s * self.radii[j])
    }
}

/// Greedy maximal family of disjoint balls `B(x, ρ(x)/5)`, scanning `Ω` by decreasing
/// `ρ(x)` with ties broken by index.
pub fn whitney_cover(space: &MetricMeasureSpace, omega: &PointSet) -> Result<WhitneyCover, WhitneyError> {
    let n = space.len();
    if omega.universe() != n {
        return Err(WhitneyError::DimensionMismatch { expected: n, got: omega.universe() });
    }
    if omega.is_empty() || omega.is_full() {
        return Err(WhitneyError::NotProperSubset { size: omega.len(), total: n });
    }
    let complement = omega.complement();
    let mut order: Vec<(usize, f64)> = omega.iter().map(|x| (x, space.dist_to_set(x, &complement))).collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut covered = PointSet::empty(n);
    let (mut centers, mut radii) = (Vec::new(), Vec::new());
    for (x, rho) in order {
        let fifth = space.ball(x, rho / 5.0);
        if !fifth.intersects(&covered) {
            covered = covered.union(&fifth);
            centers.push(x);
            radii.push(rho);
        }
    }
    Ok(WhitneyCover { omega: omega.iter().collect(), centers, radii })
}

/// Outcome of checking the four cover properties.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverReport {
    /// `∪ B(ξ_j, ρ_j/2) = Ω`.
    pub union_equals_omega: bool,
    /// The balls `B(ξ_j, ρ_j/5)` are pairwise disjoint.
    pub fifth_balls_disjoint: bool,
    /// Meeting `3/4`-balls have radii within a factor 7.
    pub radii_comparable: bool,
    /// Largest number of other `3/4`-balls met by one `3/4`-ball.
    pub max_overlap: usize,
    /// `70^d c₀²`.
    pub overlap_bound: f64,
}

impl CoverReport {
    pub fn passed(&self) -> bool {
        self.union_equals_omega
            && self.fifth_balls_disjoint
            && self.radii_comparable
            && (self.max_overlap as f64) <= self.overlap_bound
    }
}

pub fn verify_cover(space: &MetricMeasureSpace, cover: &WhitneyCover, geometry: &GeometryReport) -> CoverReport {
    let n = space.len();
    let m = cover.len();
    let halves: Vec<PointSet> = (0..m).map(|j| cover.ball(space, j, 0.5)).collect();
    let fifths: Vec<PointSet> = (0..m).map(|j| cover.ball(space, j, 0.2)).collect();
    let threes: Vec<PointSet> = (0..m).map(|j| cover.ball(space, j, 0.75)).collect();
    let union = halves.iter().fold(PointSet::empty(n), |acc, b| acc.union(b));
    let mut report = CoverReport {
        union_equals_omega: union == cover.omega_set(n),
        fifth_balls_disjoint: true,
        radii_comparable: true,
        max_overlap: 0,
        overlap_bound: 70f64.powf(geometry.d) * geometry.c0 * geometry.c0,
    };
    for j in 0..m {
        let mut met = 0;
        for nu in 0..m {
            if nu == j {
                continue;
            }
            if fifths[j].intersects(&fifths[nu]) {
                report.fifth_balls_disjoint = false;
            }
            if threes[j].intersects(&threes[nu]) {
                met += 1;
                let (rj, rn) = (cover.radii[j], cover.radii[nu]);
                if !(rn <= 7.0 * rj && rj <= 7.0 * rn) {
                    report.radii_comparable = false;
                }
            }
        }
        report.max_overlap = report.max_overlap.max(met);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn singleton_omega() {
        let (space, _) = fixtures::path(8).build().unwrap();
        let omega = PointSet::from_indices(8, [3]);
        let c = whitney_cover(&space, &omega).unwrap();
        assert_eq!(c.centers, vec![3]);
        assert_eq!(c.radii, vec![1.0]);
        assert!(verify_cover(&space, &c, &space.geometry_report()).passed());
    }

    #[test]
    fn prefix_of_path() {
        let (space, _) = fixtures::path(8).build().unwrap();
        let omega = PointSet::from_indices(8, 0..6);
        let c = whitney_cover(&space, &omega).unwrap();
        let rep = verify_cover(&space, &c, &space.geometry_report());
        assert!(rep.passed(), "{rep:?}");
        assert!(c.radii.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn whole_space_rejected() {
        let (space, _) = fixtures::path(4).build().unwrap();
        let r = whitney_cover(&space, &PointSet::full(4));
        assert_eq!(r, Err(WhitneyError::NotProperSubset { size: 4, total: 4 }));
        assert!(whitney_cover(&space, &PointSet::empty(4)).is_err());
    }

    #[test]
    fn inflated_ball_is_detected() {
        let (space, _) = fixtures::path(32).build().unwrap();
        let omega = PointSet::from_indices(32, 2..30);
        let mut c = whitney_cover(&space, &omega).unwrap();
        let geo = space.geometry_report();
        assert!(verify_cover(&space, &c, &geo).passed());
        let j = c.len() - 1;
        c.radii[j] *= 3.0;
        let rep = verify_cover(&space, &c, &geo);
        assert!(!rep.union_equals_omega || !rep.fifth_balls_disjoint || !rep.radii_comparable);
    }
}
