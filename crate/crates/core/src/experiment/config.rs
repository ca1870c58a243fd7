//! Run configuration, read from TOML. Every key is optional.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::constellation::{parse_yuma, AlmanacRecord, GpsTime};
use crate::detector::DetectorConfig;
use crate::error::{Error, Result};
use crate::frames::GeodeticPosition;
use crate::obs_sim::{CanyonPreset, NoiseConfig};
use crate::ukf::ProcessNoise;

/// Almanac used when the configuration names none.
pub const BUNDLED_ALMANAC: &str = include_str!("../../fixtures/almanac.yuma.txt");

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// YUMA almanac path; the bundled almanac when absent.
    pub almanac: Option<PathBuf>,
    pub site: SiteConfig,
    pub noise: NoiseSection,
    pub detector: DetectorSection,
    pub static_bench: StaticBenchConfig,
    pub drive: DriveConfig,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SiteConfig {
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub height_m: f64,
    pub gps_week: u32,
    pub gps_tow: f64,
    pub elevation_cutoff_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub sigma_pseudorange_m: f64,
    /// Carrier phase noise for the drive simulation, millimeters.
    pub sigma_phase_mm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorChoice {
    Ransac,
    Dbscan,
    None,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectorKind {
    Ransac,
    Dbscan,
    None,
}

impl DetectorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DetectorKind::Ransac => "ransac",
            DetectorKind::Dbscan => "dbscan",
            DetectorKind::None => "none",
        }
    }
}

impl DetectorChoice {
    pub fn kinds(self) -> Vec<DetectorKind> {
        match self {
            DetectorChoice::Ransac => vec![DetectorKind::Ransac],
            DetectorChoice::Dbscan => vec![DetectorKind::Dbscan],
            DetectorChoice::None => vec![DetectorKind::None],
            DetectorChoice::Both => vec![DetectorKind::Ransac, DetectorKind::Dbscan],
        }
    }
}

impl std::str::FromStr for DetectorChoice {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "ransac" => Ok(Self::Ransac),
            "dbscan" => Ok(Self::Dbscan),
            "none" => Ok(Self::None),
            "both" => Ok(Self::Both),
            other => Err(format!("unknown detector '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    pub kind: DetectorChoice,
    pub epsilon_inlier: f64,
    pub n_min: usize,
    pub m: usize,
    pub p: f64,
    pub eta: f64,
    pub n_iter: Option<usize>,
    pub n_smin: usize,
    pub dbscan_eps: Option<f64>,
    pub dbscan_min_pts: usize,
    pub subset_guard: u64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StaticBenchConfig {
    pub sigma_phase_mm: Vec<f64>,
    pub n_mp: Vec<usize>,
    pub trials: usize,
    /// Satellites used per trial (the highest ones above the cutoff).
    pub n_sv: usize,
    /// Angle of the random rotation applied to the truth to form the
    /// reference attitude, degrees.
    pub ref_perturbation_deg: f64,
    /// Horizontal distance range of random reflectors, meters.
    pub reflector_distance_m: [f64; 2],
    /// Height range of random reflectors relative to antenna 1, meters.
    pub reflector_height_m: [f64; 2],
    /// Reflection amplitude range relative to the direct signal.
    pub amplitude: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectoryKind {
    Builtin,
    Csv,
    Oxts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CanyonChoice {
    Open,
    Suburban,
    Urban,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImuSource {
    /// Finite differences of the truth plus simulated sensor errors.
    Synth,
    /// Readings stored in the trajectory file.
    File,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriveConfig {
    pub trajectory: TrajectoryKind,
    /// CSV file or KITTI drive directory.
    pub path: Option<PathBuf>,
    /// Length and step of the built-in trajectory, seconds.
    pub duration_s: f64,
    pub step_s: f64,
    pub canyon: CanyonChoice,
    /// Street half-width and Rayleigh building-height scale for `custom`.
    pub half_width_m: f64,
    pub rayleigh_scale_m: f64,
    pub imu: ImuSource,
    pub gyro_noise: f64,
    pub accel_noise: f64,
    pub gyro_bias_walk: f64,
    pub accel_bias_walk: f64,
    /// Constant sensor biases added to synthesized readings.
    pub gyro_bias: [f64; 3],
    pub accel_bias: [f64; 3],
    /// A detected attitude farther than this (geodesic radians) from the
    /// prediction is not trusted; the epoch runs propagation-only.
    pub attitude_gate: f64,
    /// Epoch indices at which all but three satellites are forced into
    /// reflection-only reception.
    pub degrade_epochs: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            almanac: None,
            site: SiteConfig::default(),
            noise: NoiseSection::default(),
            detector: DetectorSection::default(),
            static_bench: StaticBenchConfig::default(),
            drive: DriveConfig::default(),
        }
    }
}

impl Default for SiteConfig {
    fn default() -> Self {
        Self { lat_deg: 49.0114, lon_deg: 8.4165, height_m: 115.0, gps_week: 338, gps_tow: 61_524.0, elevation_cutoff_deg: 15.0 }
    }
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self { sigma_pseudorange_m: 0.5, sigma_phase_mm: 1.0 }
    }
}

impl Default for DetectorSection {
    fn default() -> Self {
        let d = DetectorConfig::default();
        Self {
            kind: DetectorChoice::Both,
            epsilon_inlier: d.epsilon_inlier,
            n_min: d.n_min,
            m: d.m,
            p: d.p,
            eta: d.eta,
            n_iter: d.n_iter,
            n_smin: d.n_smin,
            dbscan_eps: d.dbscan_eps,
            dbscan_min_pts: d.dbscan_min_pts,
            subset_guard: d.subset_guard,
        }
    }
}

impl Default for StaticBenchConfig {
    fn default() -> Self {
        Self {
            sigma_phase_mm: vec![0.5, 1.0, 2.0, 3.0, 5.0],
            n_mp: vec![0, 1, 2, 3],
            trials: 500,
            n_sv: 7,
            ref_perturbation_deg: 0.5,
            reflector_distance_m: [5.0, 40.0],
            reflector_height_m: [0.0, 20.0],
            amplitude: [0.2, 0.8],
        }
    }
}

impl Default for DriveConfig {
    fn default() -> Self {
        let q = ProcessNoise::default();
        Self {
            trajectory: TrajectoryKind::Builtin,
            path: None,
            duration_s: 60.0,
            step_s: 0.1,
            canyon: CanyonChoice::Urban,
            half_width_m: 10.0,
            rayleigh_scale_m: 20.0,
            imu: ImuSource::Synth,
            gyro_noise: q.gyro,
            accel_noise: q.accel,
            gyro_bias_walk: q.gyro_bias_walk,
            accel_bias_walk: q.accel_bias_walk,
            gyro_bias: [0.0; 3],
            accel_bias: [0.0; 3],
            attitude_gate: 0.04,
            degrade_epochs: Vec::new(),
        }
    }
}

fn range_ok(r: &[f64; 2]) -> bool {
    r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn detector_config(&self) -> DetectorConfig {
        let d = &self.detector;
        DetectorConfig {
            epsilon_inlier: d.epsilon_inlier,
            n_min: d.n_min,
            m: d.m,
            p: d.p,
            eta: d.eta,
            n_iter: d.n_iter,
            n_smin: d.n_smin,
            dbscan_eps: d.dbscan_eps,
            dbscan_min_pts: d.dbscan_min_pts,
            subset_guard: d.subset_guard,
        }
    }

    pub fn site(&self) -> GeodeticPosition {
        GeodeticPosition::from_degrees(self.site.lat_deg, self.site.lon_deg, self.site.height_m)
    }

    pub fn start_time(&self) -> Result<GpsTime> {
        GpsTime::new(self.site.gps_week, self.site.gps_tow)
    }

    pub fn cutoff(&self) -> f64 {
        self.site.elevation_cutoff_deg.to_radians()
    }

    pub fn process_noise(&self) -> ProcessNoise {
        let d = &self.drive;
        ProcessNoise {
            gyro: d.gyro_noise,
            accel: d.accel_noise,
            gyro_bias_walk: d.gyro_bias_walk,
            accel_bias_walk: d.accel_bias_walk,
            ..ProcessNoise::default()
        }
    }

    pub fn canyon_shape(&self) -> (f64, f64) {
        match self.drive.canyon {
            CanyonChoice::Open => CanyonPreset::Open.parameters(),
            CanyonChoice::Suburban => CanyonPreset::Suburban.parameters(),
            CanyonChoice::Urban => CanyonPreset::Urban.parameters(),
            CanyonChoice::Custom => (self.drive.half_width_m, self.drive.rayleigh_scale_m),
        }
    }

    /// Almanac text from the configured file or the bundled one. Read errors
    /// are data errors, not configuration errors.
    pub fn load_almanac(&self) -> Result<Vec<AlmanacRecord>> {
        match &self.almanac {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
                parse_yuma(&text)
            }
            None => parse_yuma(BUNDLED_ALMANAC),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.detector_config().validate()?;
        let s = &self.site;
        if !(s.lat_deg.abs() <= 90.0 && s.lon_deg.abs() <= 360.0 && s.height_m.is_finite()) {
            return bad("site coordinates out of range".into());
        }
        self.start_time()?;
        if !(0.0..90.0).contains(&s.elevation_cutoff_deg) {
            return bad("elevation cutoff must lie in [0, 90) degrees".into());
        }
        NoiseConfig { sigma_pseudorange: self.noise.sigma_pseudorange_m, sigma_phase: self.noise.sigma_phase_mm * 1e-3 }.validate()?;

        let b = &self.static_bench;
        if b.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if b.sigma_phase_mm.is_empty() || b.n_mp.is_empty() {
            return bad("sigma_phase_mm and n_mp sweeps must be nonempty".into());
        }
        if b.sigma_phase_mm.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return bad("phase noise levels must be finite and non-negative".into());
        }
        if b.n_sv < 4 || b.n_mp.iter().any(|&k| k > b.n_sv) {
            return bad(format!("need 4 <= n_sv and every n_mp <= n_sv (n_sv = {})", b.n_sv));
        }
        if !(b.ref_perturbation_deg >= 0.0 && b.ref_perturbation_deg.is_finite()) {
            return bad("ref_perturbation_deg must be non-negative".into());
        }
        if !range_ok(&b.reflector_distance_m) || b.reflector_distance_m[0] <= 0.0 || !range_ok(&b.reflector_height_m) {
            return bad("reflector ranges must be ordered, distances positive".into());
        }
        if !range_ok(&b.amplitude) || b.amplitude[0] < 0.0 || b.amplitude[1] >= 1.0 {
            return bad("amplitude range must lie in [0, 1)".into());
        }

        let d = &self.drive;
        if matches!(d.trajectory, TrajectoryKind::Csv | TrajectoryKind::Oxts) && d.path.is_none() {
            return bad("drive.path is required for csv and oxts trajectories".into());
        }
        if !(d.step_s > 0.0 && d.step_s <= 1.0 && d.duration_s >= 2.0 * d.step_s && d.duration_s.is_finite()) {
            return bad("builtin trajectory needs 0 < step_s <= 1 and duration_s >= 2 steps".into());
        }
        let (w, scale) = self.canyon_shape();
        if !(w > 0.0 && scale >= 0.0 && scale.is_finite()) {
            return bad("canyon half-width must be positive and the height scale non-negative".into());
        }
        self.process_noise().validate()?;
        if !(d.attitude_gate > 0.0) {
            return bad("attitude_gate must be positive".into());
        }
        if d.gyro_bias.iter().chain(&d.accel_bias).any(|v| !v.is_finite()) {
            return bad("IMU biases must be finite".into());
        }
        Ok(())
    }
}
