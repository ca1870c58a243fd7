//! Multipath detection by attitude consistency.
//!
//! [`ransac_detect`] hypothesizes clean satellite sets from random minimal
//! subsets and keeps the consensus set whose attitude lies closest to a
//! reference attitude. [`dbscan_detect`] is the exhaustive baseline: every
//! subset above a minimum size is solved and the subset errors are clustered.

mod dbscan;
mod metrics;
mod ransac;

pub use dbscan::{dbscan_1d, dbscan_detect, subset_count};
pub use metrics::{baseline_error_deg, score_detection, BenchmarkMetrics, ScoredEpoch};
pub use ransac::{ransac_consensus, ransac_consensus_gated, ransac_detect, ransac_prepared};

use crate::error::{Error, Result};
use crate::so3::RotationMatrix;

/// Upper bound on the iteration count from [`n_iterations`].
pub const MAX_ITERATIONS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    /// Inlier threshold on the geodesic distance, radians.
    pub epsilon_inlier: f64,
    /// Minimum consensus size for a candidate solution.
    pub n_min: usize,
    /// Seed subset size.
    pub m: usize,
    /// Probability of drawing at least one clean seed.
    pub p: f64,
    /// Assumed outlier ratio.
    pub eta: f64,
    /// Fixed iteration count; derived from `p`, `eta`, `m` when `None`.
    pub n_iter: Option<usize>,
    /// Smallest subset the exhaustive baseline enumerates.
    pub n_smin: usize,
    /// DBSCAN neighbourhood radius; `epsilon_inlier / 2` when `None`.
    pub dbscan_eps: Option<f64>,
    pub dbscan_min_pts: usize,
    /// Largest subset count the exhaustive baseline will enumerate.
    pub subset_guard: u64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            epsilon_inlier: 0.02,
            n_min: 4,
            m: 4,
            p: 0.99,
            eta: 0.3,
            n_iter: None,
            n_smin: 4,
            dbscan_eps: None,
            dbscan_min_pts: 3,
            subset_guard: 20_000,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.p > 0.0 && self.p < 1.0) {
            return bad("p must lie in (0, 1)");
        }
        if !(self.eta >= 0.0 && self.eta < 1.0) {
            return bad("eta must lie in [0, 1)");
        }
        if self.m < 3 {
            return bad("m must be at least 3");
        }
        if self.n_min < self.m {
            return bad("n_min must be at least m");
        }
        if !(self.epsilon_inlier > 0.0) {
            return bad("epsilon_inlier must be positive");
        }
        if self.n_smin < 3 {
            return bad("n_smin must be at least 3");
        }
        if self.dbscan_min_pts == 0 || self.dbscan_eps.is_some_and(|e| !(e > 0.0)) {
            return bad("invalid DBSCAN parameters");
        }
        if self.n_iter == Some(0) {
            return bad("n_iter must be positive");
        }
        Ok(())
    }

    pub fn iterations(&self) -> usize {
        self.n_iter.unwrap_or_else(|| n_iterations(self.p, self.eta, self.m))
    }

    pub fn eps(&self) -> f64 {
        self.dbscan_eps.unwrap_or(self.epsilon_inlier / 2.0)
    }
}

/// RANSAC iteration count `⌈log(1−p) / log(1−(1−η)^m)⌉`, clamped to
/// `[1, MAX_ITERATIONS]`.
pub fn n_iterations(p: f64, eta: f64, m: usize) -> usize {
    let clean = (1.0 - eta).powi(m as i32);
    let denom = (1.0 - clean).ln();
    let n = (1.0 - p).ln() / denom;
    // η = 0 makes the denominator −∞ and the ratio 0: one draw suffices
    if !(n > 1.0) {
        return 1;
    }
    if !n.is_finite() {
        return MAX_ITERATIONS;
    }
    (n.ceil() as usize).min(MAX_ITERATIONS)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    /// `true` marks a satellite flagged as contaminated.
    pub flags: Vec<bool>,
    /// Indices of the satellites kept as clean, ascending.
    pub best_set: Vec<usize>,
    pub rotation: RotationMatrix,
    /// Geodesic distance of `rotation` to the reference, radians.
    pub error: f64,
    /// Attitude solves performed after initialization (distinct subsets).
    pub attitude_solves: usize,
    /// How many of `attitude_solves` were consensus refits rather than seed
    /// or inlier-test subsets.
    pub refit_solves: usize,
    /// Iterations actually run.
    pub iterations: usize,
}

impl DetectionResult {
    /// Result keeping the satellites in `best_set` and flagging the rest.
    pub fn from_set(n: usize, mut best_set: Vec<usize>, rotation: RotationMatrix, error: f64) -> Self {
        best_set.sort_unstable();
        let mut flags = vec![true; n];
        for &i in &best_set {
            flags[i] = false;
        }
        Self { flags, best_set, rotation, error, attitude_solves: 0, refit_solves: 0, iterations: 0 }
    }

    /// Number of satellites flagged contaminated.
    pub fn flagged(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iteration_counts() {
        assert_eq!(n_iterations(0.99, 0.3, 4), 17);
        assert_eq!(n_iterations(0.99, 0.5, 4), 72);
        let direct = ((1.0f64 - 0.95).ln() / (1.0 - 0.8f64.powi(5)).ln()).ceil() as usize;
        assert_eq!(n_iterations(0.95, 0.2, 5), direct);
        assert_eq!(n_iterations(0.99, 0.0, 4), 1);
        assert_eq!(n_iterations(0.999999, 0.99, 8), MAX_ITERATIONS);
    }

    #[test]
    fn iteration_count_monotone_in_outlier_ratio() {
        let mut prev = 0;
        for k in 0..95 {
            let n = n_iterations(0.99, k as f64 / 100.0, 4);
            assert!(n >= prev);
            prev = n;
        }
    }

    #[test]
    fn config_validation() {
        DetectorConfig::default().validate().unwrap();
        assert_eq!(DetectorConfig::default().iterations(), 17);
        assert_eq!(DetectorConfig::default().eps(), 0.01);
        for cfg in [
            DetectorConfig { p: 1.0, ..Default::default() },
            DetectorConfig { eta: 1.0, ..Default::default() },
            DetectorConfig { m: 2, ..Default::default() },
            DetectorConfig { n_min: 3, ..Default::default() },
            DetectorConfig { n_iter: Some(0), ..Default::default() },
        ] {
            assert!(cfg.validate().is_err());
        }
    }

    #[test]
    fn flags_complement_best_set() {
        let r = DetectionResult::from_set(6, vec![4, 0, 2], RotationMatrix::identity(), 0.0);
        assert_eq!(r.best_set, vec![0, 2, 4]);
        assert_eq!(r.flags, vec![false, true, false, true, false, true]);
        assert_eq!(r.flagged(), 3);
    }
}
