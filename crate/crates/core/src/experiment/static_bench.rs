use std::io::Write;

use nalgebra::Vector3;
use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;

use super::config::{DetectorKind, RunConfig};
use super::{stream_rng, visible_satellites};
use crate::attitude::PreparedPhases;
use crate::detector::{
    baseline_error_deg, dbscan_detect, ransac_prepared, score_detection, BenchmarkMetrics, DetectionResult, ScoredEpoch,
};
use crate::error::{Error, Result};
use crate::obs_sim::{generate_epoch, ArrayGeometry, Environment, InjectedMultipath, NoiseConfig, TruthPose};
use crate::so3::{exp_so3, geodesic_distance, rpy_to_so3, EulerRpy, RotationMatrix};

pub const STATIC_COLUMNS: [&str; 13] = [
    "sigma_phase_mm",
    "n_mp",
    "detector",
    "trials",
    "success_rate",
    "false_negative_rate",
    "false_positive_rate",
    "misclassification_rate",
    "baseline_mae_deg",
    "no_exclusion_mae_deg",
    "improved_fraction",
    "mean_attitude_solves",
    "failed_trials",
];

/// One detector's verdict on one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub detector: DetectorKind,
    pub result: DetectionResult,
    pub labels: Vec<bool>,
    pub truth: RotationMatrix,
    /// Baseline error after exclusion and with all satellites, degrees.
    pub mae_deg: f64,
    pub no_exclusion_mae_deg: f64,
    /// The detector returned an error; `result` keeps every satellite.
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaticRow {
    pub sigma_phase_mm: f64,
    pub n_mp: usize,
    pub detector: DetectorKind,
    pub metrics: BenchmarkMetrics,
    pub no_exclusion_mae_deg: f64,
    /// Fraction of trials where exclusion lowered the baseline error.
    pub improved_fraction: f64,
    pub mean_attitude_solves: f64,
    pub failed_trials: usize,
}

#[derive(Debug, Clone)]
pub struct StaticBenchReport {
    pub rows: Vec<StaticRow>,
    /// Per cell (sweep order), per trial, per detector.
    pub trials: Vec<Vec<Vec<TrialOutcome>>>,
}

impl StaticBenchReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(STATIC_COLUMNS).map_err(io)?;
        for r in &self.rows {
            let m = &r.metrics;
            w.write_record([
                r.sigma_phase_mm.to_string(),
                r.n_mp.to_string(),
                r.detector.as_str().to_string(),
                m.epochs.to_string(),
                m.success_rate.to_string(),
                m.false_negative_rate.to_string(),
                m.false_positive_rate.to_string(),
                m.misclassification_rate.to_string(),
                m.baseline_mae_deg.to_string(),
                r.no_exclusion_mae_deg.to_string(),
                r.improved_fraction.to_string(),
                r.mean_attitude_solves.to_string(),
                r.failed_trials.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn random_unit(rng: &mut impl Rng) -> Vector3<f64> {
    let z: f64 = rng.random_range(-1.0..=1.0);
    let az: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let r = (1.0 - z * z).sqrt();
    Vector3::new(r * az.cos(), r * az.sin(), z)
}

fn uniform(rng: &mut impl Rng, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..r[1])
    }
}

fn run_trial(
    cfg: &RunConfig,
    sats: &[(u32, nalgebra::Vector3<f64>)],
    sigma_phase_mm: f64,
    n_mp: usize,
    kinds: &[DetectorKind],
    rng: &mut impl Rng,
) -> Result<Vec<TrialOutcome>> {
    let b = &cfg.static_bench;
    let geometry = ArrayGeometry::default();
    let truth = rpy_to_so3(&EulerRpy::new(
        rng.random_range(-5f64..5.0).to_radians(),
        rng.random_range(-5f64..5.0).to_radians(),
        rng.random_range(-180f64..180.0).to_radians(),
    ));
    let dirty: Vec<usize> = sample(rng, sats.len(), n_mp).into_vec();
    let injected: Vec<InjectedMultipath> = dirty
        .iter()
        .map(|&i| {
            let d = uniform(rng, b.reflector_distance_m);
            let az = rng.random_range(0.0..std::f64::consts::TAU);
            let h = uniform(rng, b.reflector_height_m);
            InjectedMultipath {
                prn: sats[i].0,
                reflection_points: vec![Vector3::new(d * az.sin(), d * az.cos(), h)],
                amplitudes: vec![uniform(rng, b.amplitude)],
                direct_blocked: false,
            }
        })
        .collect();
    let noise = NoiseConfig { sigma_pseudorange: cfg.noise.sigma_pseudorange_m, sigma_phase: sigma_phase_mm * 1e-3 };
    let epoch = generate_epoch(
        &TruthPose::at_origin(cfg.site(), truth),
        cfg.start_time()?,
        sats,
        Environment::Injected(&injected),
        &geometry,
        &noise,
        0.0,
        rng,
    )?;
    let labels = epoch.truth_labels();
    let n = epoch.len();
    let r_ref = truth * exp_so3(&(random_unit(rng) * b.ref_perturbation_deg.to_radians()));
    let det_cfg = cfg.detector_config();

    let prep = PreparedPhases::from_epoch(&epoch, &geometry);
    let all: Vec<usize> = (0..n).collect();
    let all_solution = prep.as_ref().ok().and_then(|p| p.solve(&all).ok());
    let all_rotation = all_solution.as_ref().map_or(r_ref, |s| s.rotation);
    let keep_all = || DetectionResult::from_set(n, all.clone(), all_rotation, geodesic_distance(&r_ref, &all_rotation));
    let no_exclusion_mae_deg = baseline_error_deg(&all_rotation, &truth);

    let mut out = Vec::with_capacity(kinds.len());
    for &kind in kinds {
        let detected = match (kind, &prep) {
            (DetectorKind::None, _) => Ok(keep_all()),
            (DetectorKind::Ransac, Ok(p)) => ransac_prepared(p, &r_ref, &det_cfg, rng),
            (DetectorKind::Dbscan, Ok(_)) => dbscan_detect(&epoch, &geometry, &r_ref, &det_cfg),
            (_, Err(e)) => Err(e.clone()),
        };
        let failed = detected.is_err() || (kind == DetectorKind::None && all_solution.is_none());
        let result = detected.unwrap_or_else(|_| keep_all());
        out.push(TrialOutcome {
            detector: kind,
            mae_deg: baseline_error_deg(&result.rotation, &truth),
            no_exclusion_mae_deg,
            result,
            labels: labels.clone(),
            truth,
            failed,
        });
    }
    Ok(out)
}

/// Monte-Carlo detection benchmark over the `(σ_φ, N_MP)` sweep. Trials run in
/// parallel; each has its own generator derived from the seed, the cell and
/// the trial index, so results do not depend on scheduling.
pub fn run_static_bench(cfg: &RunConfig) -> Result<StaticBenchReport> {
    cfg.validate()?;
    let b = &cfg.static_bench;
    let almanac = cfg.load_almanac()?;
    let t = cfg.start_time()?;
    let vis = visible_satellites(&almanac, &t, &cfg.site(), cfg.cutoff())?;
    if vis.len() < b.n_sv {
        return Err(Error::Scenario(format!(
            "only {} satellites above {}° at the configured site and time; {} needed, try another gps_tow",
            vis.len(),
            cfg.site.elevation_cutoff_deg,
            b.n_sv
        )));
    }
    let sats: Vec<(u32, Vector3<f64>)> = vis.iter().take(b.n_sv).map(|s| (s.0, s.1)).collect();
    let kinds = cfg.detector.kind.kinds();

    let cells: Vec<(usize, f64, usize)> = b
        .sigma_phase_mm
        .iter()
        .flat_map(|&s| b.n_mp.iter().map(move |&k| (s, k)))
        .enumerate()
        .map(|(i, (s, k))| (i, s, k))
        .collect();

    let jobs: Vec<(usize, usize)> = cells.iter().flat_map(|c| (0..b.trials).map(move |t| (c.0, t))).collect();
    let outcomes: Vec<Vec<TrialOutcome>> = jobs
        .par_iter()
        .map(|&(cell, trial)| {
            let (_, s, k) = cells[cell];
            let mut rng = stream_rng(cfg.seed, cell as u64 + 1, trial as u64);
            run_trial(cfg, &sats, s, k, &kinds, &mut rng)
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut trials = Vec::new();
    for (cell, chunk) in outcomes.chunks(b.trials).enumerate() {
        let (_, s, k) = cells[cell];
        for (d, &kind) in kinds.iter().enumerate() {
            let per: Vec<&TrialOutcome> = chunk.iter().map(|t| &t[d]).collect();
            let scored: Vec<ScoredEpoch<'_>> = per
                .iter()
                .map(|o| ScoredEpoch { result: &o.result, truth: &o.labels, attitude: &o.truth })
                .collect();
            let metrics = score_detection(&scored)?;
            let n = per.len() as f64;
            rows.push(StaticRow {
                sigma_phase_mm: s,
                n_mp: k,
                detector: kind,
                metrics,
                no_exclusion_mae_deg: per.iter().map(|o| o.no_exclusion_mae_deg).sum::<f64>() / n,
                improved_fraction: per.iter().filter(|o| o.mae_deg < o.no_exclusion_mae_deg).count() as f64 / n,
                mean_attitude_solves: per.iter().map(|o| o.result.attitude_solves as f64).sum::<f64>() / n,
                failed_trials: per.iter().filter(|o| o.failed).count(),
            });
        }
        trials.push(chunk.to_vec());
    }
    Ok(StaticBenchReport { rows, trials })
}
