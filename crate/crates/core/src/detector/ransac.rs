use std::collections::{HashMap, HashSet};

use rand::seq::index::sample;
use rand::Rng;

use super::{DetectionResult, DetectorConfig};
use crate::attitude::PreparedPhases;
use crate::error::{Error, Result};
use crate::obs_sim::{ArrayEpoch, ArrayGeometry};
use crate::so3::{geodesic_distance, RotationMatrix};

/// Memoized subset solves. `solves` counts cache misses only.
pub(super) struct SubsetSolver<'a> {
    prep: &'a PreparedPhases,
    memo: HashMap<Vec<usize>, Option<(RotationMatrix, f64)>>,
    pub(super) solves: usize,
}

impl<'a> SubsetSolver<'a> {
    pub(super) fn new(prep: &'a PreparedPhases) -> Self {
        Self { prep, memo: HashMap::new(), solves: 0 }
    }

    /// Rotation and post-fit residual for the sorted index set `set`.
    pub(super) fn solve(&mut self, set: &[usize]) -> Option<(RotationMatrix, f64)> {
        if let Some(hit) = self.memo.get(set) {
            return *hit;
        }
        self.solves += 1;
        let out = self.prep.solve(set).ok().map(|s| (s.rotation, s.residual));
        self.memo.insert(set.to_vec(), out);
        out
    }

    fn prime(&mut self, set: &[usize], value: Option<(RotationMatrix, f64)>) {
        self.memo.insert(set.to_vec(), value);
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i as u128 + 1))
}

enum Objective<'a> {
    /// Minimize the geodesic distance to a reference attitude.
    Reference(&'a RotationMatrix),
    /// Maximize the consensus size, then minimize the post-fit residual,
    /// among refits the optional gate accepts.
    Consensus(Option<&'a dyn Fn(&RotationMatrix) -> bool>),
}

struct Best {
    set: Vec<usize>,
    rotation: RotationMatrix,
    error: f64,
    residual: f64,
}

fn run(
    prep: &PreparedPhases,
    objective: Objective<'_>,
    cfg: &DetectorConfig,
    rng: &mut impl Rng,
) -> Result<DetectionResult> {
    cfg.validate()?;
    let n = prep.len();
    if n < cfg.m {
        return Err(Error::InsufficientSatellites { needed: cfg.m, available: n });
    }
    let candidates: Vec<usize> = (0..n).filter(|&i| prep.resolvable(i)).collect();
    if candidates.len() < cfg.m {
        return Err(Error::InsufficientSatellites { needed: cfg.m, available: candidates.len() });
    }

    let mut solver = SubsetSolver::new(prep);
    let all: Vec<usize> = (0..n).collect();
    let init = prep.solve(&all);
    let mut best: Option<Best> = None;
    let mut init_err = None;
    match (&init, &objective) {
        (Ok(sol), Objective::Reference(r_ref)) => {
            solver.prime(&all, Some((sol.rotation, sol.residual)));
            solver.prime(&candidates, Some((sol.rotation, sol.residual)));
            best = Some(Best {
                set: sol.used_satellites.clone(),
                rotation: sol.rotation,
                error: geodesic_distance(r_ref, &sol.rotation),
                residual: sol.residual,
            });
        }
        (Ok(sol), Objective::Consensus(_)) => {
            solver.prime(&all, Some((sol.rotation, sol.residual)));
            solver.prime(&candidates, Some((sol.rotation, sol.residual)));
        }
        (Err(e), _) => init_err = Some(e.clone()),
    }

    let budget = cfg.iterations();
    let combos = binomial(candidates.len(), cfg.m);
    let iterations = (budget as u128).min(combos) as usize;
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut refit_solves = 0;

    for _ in 0..iterations {
        let seed = loop {
            let mut s: Vec<usize> = sample(rng, candidates.len(), cfg.m).into_iter().map(|j| candidates[j]).collect();
            s.sort_unstable();
            if seen.insert(s.clone()) {
                break s;
            }
        };
        let Some((r_k, _)) = solver.solve(&seed) else { continue };

        let mut inliers = seed.clone();
        for &sv in &candidates {
            if seed.contains(&sv) {
                continue;
            }
            let mut trial = seed.clone();
            let pos = trial.partition_point(|&x| x < sv);
            trial.insert(pos, sv);
            if let Some((r_sv, _)) = solver.solve(&trial) {
                if geodesic_distance(&r_k, &r_sv) < cfg.epsilon_inlier {
                    inliers.push(sv);
                }
            }
        }
        if inliers.len() < cfg.n_min {
            continue;
        }
        inliers.sort_unstable();
        let before = solver.solves;
        let refit = solver.solve(&inliers);
        refit_solves += solver.solves - before;
        let Some((r_fit, residual)) = refit else { continue };
        let candidate = match objective {
            Objective::Reference(r_ref) => {
                let error = geodesic_distance(r_ref, &r_fit);
                let better = best.as_ref().is_none_or(|b| error < b.error);
                better.then(|| Best { set: inliers, rotation: r_fit, error, residual })
            }
            Objective::Consensus(gate) => {
                if gate.is_some_and(|g| !g(&r_fit)) {
                    continue;
                }
                let better = best.as_ref().is_none_or(|b| {
                    inliers.len() > b.set.len() || (inliers.len() == b.set.len() && residual < b.residual)
                });
                let error = geodesic_distance(&r_k, &r_fit);
                better.then(|| Best { set: inliers, rotation: r_fit, error, residual })
            }
        };
        if let Some(c) = candidate {
            best = Some(c);
        }
    }

    let Some(best) = best else {
        return Err(init_err.unwrap_or(Error::InsufficientSatellites { needed: cfg.n_min, available: 0 }));
    };
    let mut out = DetectionResult::from_set(n, best.set, best.rotation, best.error);
    out.attitude_solves = solver.solves;
    out.refit_solves = refit_solves;
    out.iterations = iterations;
    Ok(out)
}

/// RANSAC detection on a prepared epoch against reference attitude `r_ref`.
pub fn ransac_prepared(
    prep: &PreparedPhases,
    r_ref: &RotationMatrix,
    cfg: &DetectorConfig,
    rng: &mut impl Rng,
) -> Result<DetectionResult> {
    run(prep, Objective::Reference(r_ref), cfg, rng)
}

/// Flags satellites whose phases are inconsistent with the attitude closest
/// to `r_ref` among the random consensus sets.
pub fn ransac_detect(
    epoch: &ArrayEpoch,
    geometry: &ArrayGeometry,
    r_ref: &RotationMatrix,
    cfg: &DetectorConfig,
    rng: &mut impl Rng,
) -> Result<DetectionResult> {
    let prep = PreparedPhases::from_epoch(epoch, geometry)?;
    ransac_prepared(&prep, r_ref, cfg, rng)
}

/// Reference-free variant for when no attitude prior exists: keeps the
/// largest consensus set (ties broken by post-fit residual). The reported
/// error is the distance between the seed and the refitted attitude.
pub fn ransac_consensus(
    epoch: &ArrayEpoch,
    geometry: &ArrayGeometry,
    cfg: &DetectorConfig,
    rng: &mut impl Rng,
) -> Result<DetectionResult> {
    let prep = PreparedPhases::from_epoch(epoch, geometry)?;
    run(&prep, Objective::Consensus(None), cfg, rng)
}

/// [`ransac_consensus`] restricted to attitudes accepted by `gate`, e.g. a
/// tilt check against the accelerometer. Wall reflections mirror the
/// cross-track direction, so without a prior a set of reflected signals can
/// agree on an upside-down attitude.
pub fn ransac_consensus_gated(
    epoch: &ArrayEpoch,
    geometry: &ArrayGeometry,
    cfg: &DetectorConfig,
    gate: &dyn Fn(&RotationMatrix) -> bool,
    rng: &mut impl Rng,
) -> Result<DetectionResult> {
    let prep = PreparedPhases::from_epoch(epoch, geometry)?;
    run(&prep, Objective::Consensus(Some(gate)), cfg, rng)
}
