//! Level sets `Ω_r` of the grand maximal function and the sets `E_rk`.

use serde::{Deserialize, Serialize};

use super::AtomicError;
use crate::space::{MetricMeasureSpace, PointSet};

/// Largest integer `r` with `2^r < v` (`v > 0`).
pub fn level_below(v: f64) -> i32 {
    let mut r = v.log2().floor() as i32;
    while 2f64.powi(r) >= v {
        r -= 1;
    }
    while 2f64.powi(r + 1) < v {
        r += 1;
    }
    r
}

/// `Ω_r` for `r_min ≤ r ≤ r_max` and `E_rk` for `k_lo ≤ k ≤ k_hi`.
#[derive(Clone, Debug)]
pub struct LevelStructure {
    pub r_min: i32,
    pub r_max: i32,
    pub k_lo: i32,
    pub k_hi: i32,
    pub tau: f64,
    omega: Vec<PointSet>,
    e: Vec<Vec<PointSet>>,
    /// Levels below `r_min` dropped for negligible `2^{pr}|Ω_r|`.
    pub clipped: Vec<i32>,
}

/// Thresholds a nonnegative field into nested level sets.
///
/// `r_min` is the largest `r` with `Ω_r = M`. Levels whose share `2^{pr}|Ω_r|` of the
/// total falls below `clip` are dropped from the bottom, and the new lowest level is
/// replaced by `M`.
pub fn level_sets(
    space: &MetricMeasureSpace,
    field: &[f64],
    p: f64,
    tau: f64,
    k_range: (i32, i32),
    clip: f64,
) -> Result<LevelStructure, AtomicError> {
    let n = space.len();
    if field.len() != n {
        return Err(AtomicError::DimensionMismatch { expected: n, got: field.len() });
    }
    let max = field.iter().copied().fold(0.0f64, f64::max);
    if !(max > 0.0) {
        return Err(AtomicError::ZeroField);
    }
    let min = field.iter().copied().fold(f64::INFINITY, f64::min);
    let r_max = level_below(max);
    let mut r_min = if min > 0.0 { level_below(min) } else { r_max - 1100 };
    let threshold = |r: i32| PointSet::from_mask(field.iter().map(|&v| v > 2f64.powi(r)).collect());
    let share = |r: i32| 2f64.powf(p * r as f64) * space.mass(&threshold(r));
    let total: f64 = (r_min..=r_max).map(share).sum();
    let mut clipped = Vec::new();
    while r_min < r_max && share(r_min) < clip * total {
        clipped.push(r_min);
        r_min += 1;
    }
    let mut omega: Vec<PointSet> = (r_min..=r_max).map(threshold).collect();
    omega[0] = PointSet::full(n);

    let (k_lo, k_hi) = k_range;
    let inner = |set: &PointSet, k: i32| -> PointSet {
        let comp = set.complement();
        let radius = 2.0 * tau * 2f64.powi(-k);
        PointSet::from_mask((0..n).map(|x| set.contains(x) && space.dist_to_set(x, &comp) > radius).collect())
    };
    let mut e = Vec::with_capacity(omega.len());
    for (i, set) in omega.iter().enumerate() {
        let row: Vec<PointSet> = (k_lo..=k_hi)
            .map(|k| {
                let here = inner(set, k);
                match omega.get(i + 1) {
                    Some(next) => here.difference(&inner(next, k)),
                    None => here,
                }
            })
            .collect();
        e.push(row);
    }
    Ok(LevelStructure { r_min, r_max, k_lo, k_hi, tau, omega, e, clipped })
}

/// Exact set-arithmetic check that, for each `k`, the `E_rk` partition `Ω_{r_min}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub pairs_checked: usize,
    pub overlaps: usize,
    pub uncovered_scales: Vec<i32>,
}

impl PartitionReport {
    pub fn exact(&self) -> bool {
        self.overlaps == 0 && self.uncovered_scales.is_empty()
    }
}

impl LevelStructure {
    pub fn levels(&self) -> impl Iterator<Item = i32> {
        self.r_min..=self.r_max
    }

    pub fn omega(&self, r: i32) -> &PointSet {
        &self.omega[(r - self.r_min) as usize]
    }

    pub fn e_rk(&self, r: i32, k: i32) -> &PointSet {
        &self.e[(r - self.r_min) as usize][(k - self.k_lo) as usize]
    }

    /// Smallest `k` with `E_rk ≠ ∅`.
    pub fn s_r(&self, r: i32) -> Option<i32> {
        (self.k_lo..=self.k_hi).find(|&k| !self.e_rk(r, k).is_empty())
    }

    pub fn partition_check(&self) -> PartitionReport {
        let mut rep = PartitionReport { pairs_checked: 0, overlaps: 0, uncovered_scales: Vec::new() };
        let base = self.omega(self.r_min);
        for k in self.k_lo..=self.k_hi {
            let mut union = PointSet::empty(base.universe());
            for r in self.levels() {
                let e = self.e_rk(r, k);
                rep.pairs_checked += 1;
                if e.intersects(&union) {
                    rep.overlaps += 1;
                }
                union = union.union(e);
            }
            if &union != base {
                rep.uncovered_scales.push(k);
            }
        }
        rep
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn level_below_handles_powers() {
        assert_eq!(level_below(1.0), -1);
        assert_eq!(level_below(1.5), 0);
        assert_eq!(level_below(4.0), 1);
        assert_eq!(level_below(0.3), -2);
    }

    #[test]
    fn unit_field_has_single_full_level() {
        let (space, _) = fixtures::path(8).build().unwrap();
        let l = level_sets(&space, &[1.0; 8], 1.0, 1.0, (0, 3), 1e-12).unwrap();
        assert_eq!((l.r_min, l.r_max), (-1, -1));
        assert!(l.omega(-1).is_full());
        assert!(l.partition_check().exact());
    }

    #[test]
    fn two_valued_field() {
        let (space, _) = fixtures::path(8).build().unwrap();
        let field = [1.0, 1.0, 4.0, 4.0, 4.0, 1.0, 1.0, 1.0];
        let l = level_sets(&space, &field, 1.0, 1.0, (-2, 3), 1e-12).unwrap();
        assert_eq!((l.r_min, l.r_max), (-1, 1));
        assert_eq!(l.omega(0).iter().collect::<Vec<_>>(), vec![2, 3, 4]);
        assert_eq!(l.omega(0), l.omega(1));
        let rep = l.partition_check();
        assert!(rep.exact(), "{rep:?}");
        // nothing is deep enough inside {2,3,4} at coarse scales
        assert!(l.e_rk(1, -2).is_empty());
        assert_eq!(l.s_r(1), Some(1));
    }

    #[test]
    fn zero_field_is_reported() {
        let (space, _) = fixtures::path(4).build().unwrap();
        assert!(matches!(level_sets(&space, &[0.0; 4], 1.0, 1.0, (0, 1), 1e-12), Err(AtomicError::ZeroField)));
    }
}
