use super::{DetectionResult, DetectorConfig};
use crate::attitude::PreparedPhases;
use crate::error::{Error, Result};
use crate::obs_sim::{ArrayEpoch, ArrayGeometry};
use crate::so3::{geodesic_distance, RotationMatrix};

/// Number of subsets of `n` items with at least `k_min` members.
pub fn subset_count(n: usize, k_min: usize) -> u64 {
    let mut row = vec![1u64; 1];
    for i in 1..=n {
        let mut next = vec![1u64; i + 1];
        for j in 1..i {
            next[j] = row[j - 1].saturating_add(row[j]);
        }
        row = next;
    }
    row.iter().skip(k_min).fold(0u64, |a, &c| a.saturating_add(c))
}

/// DBSCAN over scalar values. Returns a cluster id per point, `None` for
/// noise. A point is core when at least `min_pts` points (itself included) lie
/// within `eps`; border points join the cluster of their nearest core point.
pub fn dbscan_1d(values: &[f64], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();

    let mut core = vec![false; n];
    let (mut lo, mut hi) = (0usize, 0usize);
    for k in 0..n {
        while sorted[k] - sorted[lo] > eps {
            lo += 1;
        }
        if hi < k {
            hi = k;
        }
        while hi + 1 < n && sorted[hi + 1] - sorted[k] <= eps {
            hi += 1;
        }
        core[k] = hi - lo + 1 >= min_pts;
    }

    let mut label = vec![None; n];
    let mut cluster = 0usize;
    let mut last_core: Option<usize> = None;
    for k in 0..n {
        if !core[k] {
            continue;
        }
        match last_core {
            Some(p) if sorted[k] - sorted[p] <= eps => {}
            Some(_) => cluster += 1,
            None => {}
        }
        label[k] = Some(cluster);
        last_core = Some(k);
    }
    // border points
    let cores: Vec<usize> = (0..n).filter(|&k| core[k]).collect();
    for k in 0..n {
        if core[k] {
            continue;
        }
        let pos = cores.partition_point(|&c| sorted[c] < sorted[k]);
        let near = [pos.checked_sub(1), (pos < cores.len()).then_some(pos)]
            .into_iter()
            .flatten()
            .map(|j| cores[j])
            .filter(|&c| (sorted[c] - sorted[k]).abs() <= eps)
            .min_by(|&a, &b| (sorted[a] - sorted[k]).abs().total_cmp(&(sorted[b] - sorted[k]).abs()));
        label[k] = near.and_then(|c| label[c]);
    }

    let mut out = vec![None; n];
    for (k, &i) in order.iter().enumerate() {
        out[i] = label[k];
    }
    out
}

/// Exhaustive baseline: solves every subset of at least `n_smin` satellites,
/// clusters the subset errors against `r_ref`, picks the cluster with the
/// lowest mean error (ties to the larger cluster) and keeps its largest
/// subset. When every subset is noise, the lowest-error subset is kept.
pub fn dbscan_detect(
    epoch: &ArrayEpoch,
    geometry: &ArrayGeometry,
    r_ref: &RotationMatrix,
    cfg: &DetectorConfig,
) -> Result<DetectionResult> {
    let prep = PreparedPhases::from_epoch(epoch, geometry)?;
    dbscan_prepared(&prep, r_ref, cfg)
}

pub(crate) fn dbscan_prepared(prep: &PreparedPhases, r_ref: &RotationMatrix, cfg: &DetectorConfig) -> Result<DetectionResult> {
    cfg.validate()?;
    let n = prep.len();
    if n < cfg.n_smin {
        return Err(Error::InsufficientSatellites { needed: cfg.n_smin, available: n });
    }
    let count = subset_count(n, cfg.n_smin);
    // the mask enumeration below visits all 2^n subsets
    if count > cfg.subset_guard || n > 30 {
        return Err(Error::CombinatorialBlowup { subsets: count, guard: cfg.subset_guard });
    }

    let mut subsets: Vec<(Vec<usize>, RotationMatrix, f64)> = Vec::new();
    let mut solves = 0usize;
    for mask in 1u64..(1u64 << n) {
        if (mask.count_ones() as usize) < cfg.n_smin {
            continue;
        }
        let set: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
        if set.iter().any(|&i| !prep.resolvable(i)) {
            continue;
        }
        solves += 1;
        if let Ok(sol) = prep.solve(&set) {
            let err = geodesic_distance(r_ref, &sol.rotation);
            subsets.push((set, sol.rotation, err));
        }
    }
    if subsets.is_empty() {
        return Err(Error::InsufficientSatellites { needed: cfg.n_smin, available: 0 });
    }

    let errors: Vec<f64> = subsets.iter().map(|s| s.2).collect();
    let labels = dbscan_1d(&errors, cfg.eps(), cfg.dbscan_min_pts);
    let n_clusters = labels.iter().flatten().max().map_or(0, |m| m + 1);
    let pick = if n_clusters == 0 {
        (0..subsets.len()).min_by(|&a, &b| errors[a].total_cmp(&errors[b]))
    } else {
        let mut stats = vec![(0.0f64, 0usize); n_clusters];
        for (l, e) in labels.iter().zip(&errors) {
            if let Some(c) = l {
                stats[*c].0 += e;
                stats[*c].1 += 1;
            }
        }
        let chosen = (0..n_clusters)
            .min_by(|&a, &b| {
                let (ma, mb) = (stats[a].0 / stats[a].1 as f64, stats[b].0 / stats[b].1 as f64);
                ma.total_cmp(&mb).then(stats[b].1.cmp(&stats[a].1))
            })
            .expect("nonempty");
        (0..subsets.len())
            .filter(|&i| labels[i] == Some(chosen))
            .max_by(|&a, &b| subsets[a].0.len().cmp(&subsets[b].0.len()).then(errors[b].total_cmp(&errors[a])))
    };
    let i = pick.expect("nonempty");
    let (set, rotation, error) = subsets.swap_remove(i);
    let mut out = DetectionResult::from_set(n, set, rotation, error);
    out.attitude_solves = solves;
    Ok(out)
}
