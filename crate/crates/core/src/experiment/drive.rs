use std::io::Write;

use nalgebra::{Matrix4, Vector3};
use rand::Rng;

use super::config::{CanyonChoice, ImuSource, RunConfig, TrajectoryKind};
use super::{healthy_positions, stream_rng};
use crate::attitude::PreparedPhases;
use crate::detector::{ransac_consensus_gated, ransac_detect, DetectionResult};
use crate::error::{Error, Result};
use crate::frames::{ecef_to_enu, ecef_to_enu_rotation, geodetic_to_ecef, los_in_frame, enu_to_ecef, GeodeticPosition};
use crate::ingest::{builtin_trajectory, local_positions, parse_oxts, read_trajectory_csv, synth_imu_from_truth, ImuBias, TrajectorySample};
use crate::obs_sim::{
    generate_epoch, ArrayEpoch, ArrayGeometry, CanyonModel, Environment, InjectedMultipath, NoiseConfig, TruthPose, NUM_ANTENNAS,
};
use crate::so3::{rotation_angle, so3_to_rpy, RotationMatrix};
use crate::spp::{spp_solve, SppSolution};
use crate::ukf::{default_initial_covariance, ArrayMeasurement, MeasurementNoise, Ukf, UkfState};

pub const DRIVE_TRAJECTORY_COLUMNS: [&str; 25] = [
    "t",
    "truth_e",
    "truth_n",
    "truth_u",
    "truth_roll",
    "truth_pitch",
    "truth_yaw",
    "gnss_all_e",
    "gnss_all_n",
    "gnss_all_u",
    "gnss_imu_all_e",
    "gnss_imu_all_n",
    "gnss_imu_all_u",
    "proposed_e",
    "proposed_n",
    "proposed_u",
    "proposed_roll",
    "proposed_pitch",
    "proposed_yaw",
    "n_visible",
    "n_contaminated",
    "n_flagged",
    "detection_ok",
    "mode",
    "attitude_error_deg",
];

pub const DRIVE_SUMMARY_COLUMNS: [&str; 13] = [
    "epochs",
    "position_mse_gnss_all_m2",
    "position_mse_gnss_imu_all_m2",
    "position_mse_proposed_m2",
    "position_rmse_gnss_all_m",
    "position_rmse_gnss_imu_all_m",
    "position_rmse_proposed_m",
    "attitude_mae_gnss_imu_all_deg",
    "attitude_mae_proposed_deg",
    "success_rate",
    "detection_epochs",
    "propagation_only_epochs",
    "gnss_all_failures",
];

/// Largest angle between the accelerometer-derived and the detected vertical
/// accepted when seeding the proposed filter.
const COLD_START_TILT: f64 = 10.0 * std::f64::consts::PI / 180.0;

/// What the proposed filter did at an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpochMode {
    /// Filter seeded from this epoch's fix.
    Init,
    Update,
    /// No trusted clean set (or no fix yet): inertial propagation only.
    PropagateOnly,
}

impl EpochMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EpochMode::Init => "init",
            EpochMode::Update => "update",
            EpochMode::PropagateOnly => "propagate",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriveEpoch {
    pub t: f64,
    pub truth_position: Vector3<f64>,
    pub truth_attitude: RotationMatrix,
    /// Antenna 1 SPP from all satellites.
    pub gnss_all: Option<Vector3<f64>>,
    /// Filter fed with all satellites.
    pub gnss_imu_all: Option<Vector3<f64>>,
    pub proposed: Option<Vector3<f64>>,
    pub proposed_attitude: Option<RotationMatrix>,
    pub n_visible: usize,
    pub n_contaminated: usize,
    pub n_flagged: Option<usize>,
    /// Every satellite classified correctly; `None` when no detection ran.
    pub detection_ok: Option<bool>,
    pub mode: EpochMode,
    pub gnss_imu_all_attitude: Option<RotationMatrix>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveSummary {
    pub epochs: usize,
    pub position_mse_gnss_all: f64,
    pub position_mse_gnss_imu_all: f64,
    pub position_mse_proposed: f64,
    pub attitude_mae_gnss_imu_all_deg: f64,
    pub attitude_mae_proposed_deg: f64,
    pub success_rate: f64,
    pub detection_epochs: usize,
    pub propagation_only_epochs: usize,
    pub gnss_all_failures: usize,
}

#[derive(Debug, Clone)]
pub struct DriveReport {
    pub epochs: Vec<DriveEpoch>,
    pub summary: DriveSummary,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl DriveReport {
    pub fn write_trajectory_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(DRIVE_TRAJECTORY_COLUMNS).map_err(io)?;
        for e in &self.epochs {
            let (truth_rpy, _) = so3_to_rpy(&e.truth_attitude);
            let prop_rpy = e.proposed_attitude.map(|r| so3_to_rpy(&r).0);
            let mut rec = vec![e.t.to_string()];
            rec.extend(e.truth_position.iter().map(|v| v.to_string()));
            rec.extend(truth_rpy.to_vector().iter().map(|v| v.to_string()));
            for p in [e.gnss_all, e.gnss_imu_all, e.proposed] {
                rec.extend((0..3).map(|k| opt(p.map(|v| v[k]))));
            }
            rec.extend((0..3).map(|k| opt(prop_rpy.map(|r| r.to_vector()[k]))));
            rec.push(e.n_visible.to_string());
            rec.push(e.n_contaminated.to_string());
            rec.push(e.n_flagged.map(|n| n.to_string()).unwrap_or_default());
            rec.push(e.detection_ok.map(|b| (b as u8).to_string()).unwrap_or_default());
            rec.push(e.mode.as_str().to_string());
            rec.push(opt(e.proposed_attitude.map(|r| attitude_error_deg(&r, &e.truth_attitude))));
            w.write_record(rec).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let s = &self.summary;
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(DRIVE_SUMMARY_COLUMNS).map_err(io)?;
        w.write_record([
            s.epochs.to_string(),
            s.position_mse_gnss_all.to_string(),
            s.position_mse_gnss_imu_all.to_string(),
            s.position_mse_proposed.to_string(),
            s.position_mse_gnss_all.sqrt().to_string(),
            s.position_mse_gnss_imu_all.sqrt().to_string(),
            s.position_mse_proposed.sqrt().to_string(),
            s.attitude_mae_gnss_imu_all_deg.to_string(),
            s.attitude_mae_proposed_deg.to_string(),
            s.success_rate.to_string(),
            s.detection_epochs.to_string(),
            s.propagation_only_epochs.to_string(),
            s.gnss_all_failures.to_string(),
        ])
        .map_err(io)?;
        w.flush()?;
        Ok(())
    }
}

fn attitude_error_deg(a: &RotationMatrix, b: &RotationMatrix) -> f64 {
    rotation_angle(&(a.transpose() * *b)).to_degrees()
}

fn load_trajectory(cfg: &RunConfig) -> Result<Vec<TrajectorySample>> {
    let d = &cfg.drive;
    let mut traj = match d.trajectory {
        TrajectoryKind::Builtin => builtin_trajectory(d.duration_s, d.step_s)?,
        TrajectoryKind::Csv => read_trajectory_csv(d.path.as_deref().expect("validated"))?,
        TrajectoryKind::Oxts => parse_oxts(d.path.as_deref().expect("validated"))?,
    };
    if traj.len() < 3 {
        return Err(Error::EmptyStream(format!("trajectory has {} samples, need at least 3", traj.len())));
    }
    if d.imu == ImuSource::Synth || d.trajectory == TrajectoryKind::Builtin {
        let bias = ImuBias { gyro: Vector3::from(d.gyro_bias), accel: Vector3::from(d.accel_bias) };
        let mut rng = stream_rng(cfg.seed, 0x400, 0);
        traj = synth_imu_from_truth(&traj, &cfg.process_noise(), &bias, &mut rng)?;
    }
    Ok(traj)
}

/// Per-antenna SPP on the satellites in `idx`.
fn array_spp(epoch: &ArrayEpoch, idx: &[usize], guess: &Vector3<f64>) -> Result<Vec<SppSolution>> {
    let sats: Vec<Vector3<f64>> = idx.iter().map(|&i| epoch.sats[i].position).collect();
    (0..NUM_ANTENNAS)
        .map(|r| {
            let pr: Vec<f64> = idx.iter().map(|&i| epoch.sats[i].pseudoranges[r]).collect();
            spp_solve(&pr, &sats, guess)
        })
        .collect()
}

/// ENU position variances of an SPP fix: `σ̂²·diag((GᵀG)⁻¹)` with the
/// variance factor floored at the nominal pseudorange variance.
fn spp_variances(sol: &SppSolution, sats: &[Vector3<f64>], frame: &GeodeticPosition, sigma_pr: f64) -> Vector3<f64> {
    let rot = ecef_to_enu_rotation(frame);
    let mut normal = Matrix4::<f64>::zeros();
    for s in sats {
        let u = rot * (s - sol.position).normalize();
        let g = nalgebra::Vector4::new(-u.x, -u.y, -u.z, 1.0);
        normal += g * g.transpose();
    }
    let n = sats.len();
    let rss: f64 = sol.residuals.iter().map(|r| r * r).sum();
    let factor = if n > 4 { (rss / (n - 4) as f64).max(sigma_pr * sigma_pr) } else { sigma_pr * sigma_pr };
    match normal.try_inverse() {
        Some(inv) => Vector3::new(inv[(0, 0)], inv[(1, 1)], inv[(2, 2)]) * factor,
        None => Vector3::repeat(f64::INFINITY),
    }
}

/// Builds the filter measurement from per-antenna fixes on `idx` and an
/// attitude with its detector error.
fn measurement(
    epoch: &ArrayEpoch,
    idx: &[usize],
    fixes: &[SppSolution],
    attitude: &RotationMatrix,
    attitude_error: f64,
    sigma_pr: f64,
) -> (ArrayMeasurement, MeasurementNoise) {
    let sats: Vec<Vector3<f64>> = idx.iter().map(|&i| epoch.sats[i].position).collect();
    let positions = std::array::from_fn(|r| ecef_to_enu(&fixes[r].position, &epoch.frame));
    let variances = std::array::from_fn(|r| spp_variances(&fixes[r], &sats, &epoch.frame, sigma_pr));
    let var_att = MeasurementNoise::attitude_from_error(attitude_error);
    (
        ArrayMeasurement { attitude: so3_to_rpy(attitude).0, positions, attitude_error },
        MeasurementNoise { attitude: Vector3::repeat(var_att), positions: variances },
    )
}

/// Reflection-only reception for every satellite except the three highest.
fn degraded_environment(
    sats: &[(u32, Vector3<f64>)],
    receiver: &Vector3<f64>,
    frame: &GeodeticPosition,
    cutoff: f64,
    rng: &mut impl Rng,
) -> Result<Vec<InjectedMultipath>> {
    let pos: Vec<Vector3<f64>> = sats.iter().map(|s| s.1).collect();
    let angles = los_in_frame(&pos, receiver, frame)?;
    let mut vis: Vec<usize> = (0..sats.len()).filter(|&i| angles.elevations[i] >= cutoff).collect();
    vis.sort_by(|&a, &b| angles.elevations[b].total_cmp(&angles.elevations[a]));
    Ok(vis
        .iter()
        .skip(3)
        .map(|&i| {
            let d: f64 = rng.random_range(10.0..30.0);
            let az: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            InjectedMultipath {
                prn: sats[i].0,
                reflection_points: vec![Vector3::new(d * az.sin(), d * az.cos(), rng.random_range(0.0..15.0))],
                amplitudes: vec![rng.random_range(0.3..0.8)],
                direct_blocked: true,
            }
        })
        .collect())
}

/// Moving-vehicle simulation. Three estimates are produced per epoch: SPP
/// with every satellite, a filter fed with every satellite, and the proposed
/// filter fed only with satellites the detector kept, using the filter's
/// predicted attitude as the detection reference.
pub fn run_drive_sim(cfg: &RunConfig) -> Result<DriveReport> {
    cfg.validate()?;
    let traj = load_trajectory(cfg)?;
    let positions = local_positions(&traj);
    let frame = traj[0].position;
    let origin_ecef = geodetic_to_ecef(&frame);
    let almanac = cfg.load_almanac()?;
    let t0 = cfg.start_time()?;
    let geometry = ArrayGeometry::default();
    let noise = NoiseConfig { sigma_pseudorange: cfg.noise.sigma_pseudorange_m, sigma_phase: cfg.noise.sigma_phase_mm * 1e-3 };
    let sigma_pr = noise.sigma_pseudorange.max(0.1);
    let det_cfg = cfg.detector_config();
    let q = cfg.process_noise();

    let mut along = vec![0.0; positions.len()];
    for k in 1..positions.len() {
        along[k] = along[k - 1] + (positions[k] - positions[k - 1]).norm();
    }
    let (half_width, scale) = cfg.canyon_shape();
    let segments = (along[along.len() - 1] / 10.0).ceil() as usize + 2;
    let canyon = CanyonModel::sample(half_width, scale, segments, &mut stream_rng(cfg.seed, 0x300, 0));

    let mut meas_rng = stream_rng(cfg.seed, 0x100, 0);
    let mut det_rng = stream_rng(cfg.seed, 0x200, 0);
    let mut all_filter: Option<Ukf> = None;
    let mut proposed: Option<Ukf> = None;
    let mut guess = origin_ecef;
    let mut epochs = Vec::with_capacity(traj.len());

    for (n, sample) in traj.iter().enumerate() {
        if n > 0 {
            let imu = traj[n - 1].imu;
            for f in [&mut all_filter, &mut proposed].into_iter().flatten() {
                f.propagate(&imu)?;
            }
        }
        let truth = TruthPose { frame, position: positions[n], attitude: sample.rotation() };
        let time = t0.add_seconds(sample.t);
        let sats = healthy_positions(&almanac, &time)?;
        let injected;
        let env = if cfg.drive.degrade_epochs.contains(&n) {
            injected = degraded_environment(&sats, &enu_to_ecef(&positions[n], &frame), &frame, cfg.cutoff(), &mut meas_rng)?;
            Environment::Injected(&injected)
        } else if cfg.drive.canyon == CanyonChoice::Open {
            Environment::Open
        } else {
            let heading = sample.attitude.yaw;
            Environment::Canyon { model: &canyon, heading, along_track: along[n] }
        };

        let mut rec = DriveEpoch {
            t: sample.t,
            truth_position: positions[n],
            truth_attitude: truth.attitude,
            gnss_all: None,
            gnss_imu_all: None,
            proposed: None,
            proposed_attitude: None,
            n_visible: 0,
            n_contaminated: 0,
            n_flagged: None,
            detection_ok: None,
            mode: EpochMode::PropagateOnly,
            gnss_imu_all_attitude: None,
        };

        let epoch = match generate_epoch(&truth, time, &sats, env, &geometry, &noise, cfg.cutoff(), &mut meas_rng) {
            Ok(e) => Some(e),
            Err(Error::EmptyEpoch) => None,
            Err(e) => return Err(e),
        };

        if let Some(epoch) = &epoch {
            let labels = epoch.truth_labels();
            rec.n_visible = epoch.len();
            rec.n_contaminated = labels.iter().filter(|&&l| l).count();
            let all: Vec<usize> = (0..epoch.len()).collect();
            let prep = PreparedPhases::from_epoch(epoch, &geometry).ok();

            // every satellite
            let fixes = array_spp(epoch, &all, &guess).ok();
            if let Some(f) = &fixes {
                rec.gnss_all = Some(ecef_to_enu(&f[0].position, &frame));
                guess = f[0].position;
            }
            let att_all = prep.as_ref().and_then(|p| p.solve(&all).ok());
            if let (Some(f), Some(att)) = (&fixes, &att_all) {
                match &mut all_filter {
                    None => {
                        let pos = ecef_to_enu(&f[0].position, &frame);
                        let state = UkfState::new(att.rotation, pos, traj[0].velocity);
                        all_filter = Some(Ukf::new(state, default_initial_covariance(), q, geometry));
                    }
                    Some(filter) => {
                        let er = crate::so3::geodesic_distance(&filter.state.rotation, &att.rotation);
                        let (z, r) = measurement(epoch, &all, f, &att.rotation, er, sigma_pr);
                        let _ = filter.update(&z, &r);
                    }
                }
            }

            // proposed
            let detection: Option<DetectionResult> = match &proposed {
                None => {
                    // level the array with the accelerometer: the body axis
                    // along the measured specific force must point up
                    let f = sample.imu.accel;
                    let gate = move |r: &RotationMatrix| {
                        let up = r.rotate(&f);
                        up.z > up.norm() * COLD_START_TILT.cos()
                    };
                    ransac_consensus_gated(epoch, &geometry, &det_cfg, &gate, &mut det_rng).ok()
                }
                Some(filter) => ransac_detect(epoch, &geometry, &filter.state.rotation, &det_cfg, &mut det_rng).ok(),
            };
            if let Some(det) = &detection {
                rec.n_flagged = Some(det.flagged());
                rec.detection_ok = Some(det.flags == labels);
                // the gate opens with the filter's own attitude uncertainty so
                // a long propagation stretch cannot lock detection out
                let gate = match &proposed {
                    Some(f) => cfg.drive.attitude_gate + 3.0 * std::f64::consts::SQRT_2 * attitude_std(&f.covariance),
                    None => cfg.drive.attitude_gate,
                };
                let trusted = det.best_set.len() >= 4 && det.error < gate;
                let clean_fix = if trusted { array_spp(epoch, &det.best_set, &guess).ok() } else { None };
                if let Some(f) = clean_fix {
                    match &mut proposed {
                        None => {
                            let pos = ecef_to_enu(&f[0].position, &frame);
                            let state = UkfState::new(det.rotation, pos, traj[0].velocity);
                            proposed = Some(Ukf::new(state, default_initial_covariance(), q, geometry));
                            rec.mode = EpochMode::Init;
                        }
                        Some(filter) => {
                            let (z, r) = measurement(epoch, &det.best_set, &f, &det.rotation, det.error, sigma_pr);
                            if filter.update(&z, &r).is_ok() {
                                rec.mode = EpochMode::Update;
                            }
                        }
                    }
                }
            }
        }

        if let Some(f) = &all_filter {
            rec.gnss_imu_all = Some(f.state.position);
            rec.gnss_imu_all_attitude = Some(f.state.rotation);
        }
        if let Some(f) = &proposed {
            if !f.state.is_finite() {
                return Err(Error::Scenario(format!("filter diverged at epoch {n}")));
            }
            rec.proposed = Some(f.state.position);
            rec.proposed_attitude = Some(f.state.rotation);
        }
        epochs.push(rec);
    }

    let summary = summarize(&epochs);
    Ok(DriveReport { epochs, summary })
}

/// Largest one-sigma attitude uncertainty of a filter covariance, radians.
fn attitude_std(p: &crate::ukf::Covariance) -> f64 {
    let block = p.fixed_view::<3, 3>(0, 0).into_owned();
    block.symmetric_eigenvalues().max().max(0.0).sqrt()
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

fn summarize(epochs: &[DriveEpoch]) -> DriveSummary {
    let sq = |p: Option<Vector3<f64>>, t: &Vector3<f64>| p.map(|p| (p - t).norm_squared());
    let detections: Vec<bool> = epochs.iter().filter_map(|e| e.detection_ok).collect();
    DriveSummary {
        epochs: epochs.len(),
        position_mse_gnss_all: mean(epochs.iter().filter_map(|e| sq(e.gnss_all, &e.truth_position))),
        position_mse_gnss_imu_all: mean(epochs.iter().filter_map(|e| sq(e.gnss_imu_all, &e.truth_position))),
        position_mse_proposed: mean(epochs.iter().filter_map(|e| sq(e.proposed, &e.truth_position))),
        attitude_mae_gnss_imu_all_deg: mean(
            epochs.iter().filter_map(|e| e.gnss_imu_all_attitude.map(|r| attitude_error_deg(&r, &e.truth_attitude))),
        ),
        attitude_mae_proposed_deg: mean(
            epochs.iter().filter_map(|e| e.proposed_attitude.map(|r| attitude_error_deg(&r, &e.truth_attitude))),
        ),
        success_rate: if detections.is_empty() {
            f64::NAN
        } else {
            detections.iter().filter(|&&b| b).count() as f64 / detections.len() as f64
        },
        detection_epochs: detections.len(),
        propagation_only_epochs: epochs.iter().filter(|e| e.mode == EpochMode::PropagateOnly).count(),
        gnss_all_failures: epochs.iter().filter(|e| e.gnss_all.is_none()).count(),
    }
}
