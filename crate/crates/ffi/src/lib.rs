//! C ABI over the `arraymp` library.
//!
//! Every fallible call returns an [`AmpStatus`]; on failure the message is
//! available from [`amp_last_error`] on the same thread. Objects with state
//! live behind opaque handles that the caller releases with the matching
//! `*_free` function. Matrices are 3×3 row-major `double[9]`, vectors
//! `double[3]`, and arrays of per-satellite rows are contiguous.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use arraymp::attitude::{PhaseSet, PreparedPhases};
use arraymp::constellation::{parse_yuma, sat_position, AlmanacRecord, GpsTime};
use arraymp::detector::{n_iterations, ransac_prepared, DetectorConfig};
use arraymp::frames::LosMatrix;
use arraymp::obs_sim::{ArrayGeometry, NUM_ANTENNAS};
use arraymp::so3::{EulerRpy, RotationMatrix};
use arraymp::spp::spp_solve;
use arraymp::ukf::{default_initial_covariance, ArrayMeasurement, ImuSample, MeasurementNoise, ProcessNoise, Ukf, UkfState};
use arraymp::Error;
use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmpStatus {
    Ok = 0,
    /// A required pointer was null.
    NullPointer = 1,
    /// A size or numeric argument is out of range.
    InvalidArgument = 2,
    /// Text input could not be parsed.
    Parse = 3,
    /// Well-formed input with inconsistent content.
    InvalidData = 4,
    /// Too few or badly placed satellites, or an invalid array layout.
    Geometry = 5,
    /// A solver failed to converge or a matrix was singular.
    Numeric = 6,
    Io = 7,
    /// A Rust panic was caught at the boundary.
    Internal = 8,
}

impl From<&Error> for AmpStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Parse { .. } => AmpStatus::Parse,
            Error::InvalidRecord { .. }
            | Error::Schema(_)
            | Error::Ordering(_)
            | Error::EmptyStream(_)
            | Error::Scenario(_)
            | Error::InvalidRotation(_) => AmpStatus::InvalidData,
            Error::DegenerateGeometry(_)
            | Error::InvalidGeometry(_)
            | Error::EmptyEpoch
            | Error::UnresolvableAmbiguity { .. }
            | Error::InsufficientSatellites { .. }
            | Error::IllConditioned(_) => AmpStatus::Geometry,
            Error::Config(_) | Error::InvalidStep(_) => AmpStatus::InvalidArgument,
            Error::KeplerNonConvergence { .. }
            | Error::DestructiveInterference(_)
            | Error::NonConvergence { .. }
            | Error::CombinatorialBlowup { .. }
            | Error::SingularUpdate => AmpStatus::Numeric,
            Error::Io(_) => AmpStatus::Io,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nuls replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Fail(AmpStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(AmpStatus::from(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(AmpStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(AmpStatus::InvalidArgument, msg.into())
}

/// Runs `f`, records any error for [`amp_last_error`] and converts it.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> AmpStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AmpStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            AmpStatus::Internal
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn vec3(p: *const f64, what: &str) -> Result<Vector3<f64>, Fail> {
    let s = slice(p, 3, what)?;
    Ok(Vector3::new(s[0], s[1], s[2]))
}

unsafe fn read_rotation(p: *const f64, what: &str) -> Result<RotationMatrix, Fail> {
    let s = slice(p, 9, what)?;
    Ok(RotationMatrix::from_matrix(Matrix3::from_row_slice(s))?)
}

unsafe fn write<T: Copy>(out: *mut T, values: &[T], what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(())
}

fn row_major(r: &RotationMatrix) -> [f64; 9] {
    let m = r.matrix();
    std::array::from_fn(|k| m[(k / 3, k % 3)])
}

/// Five-antenna layout: antennas 1-2-3 on body x, 1-4-5 on body y.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct AmpGeometry {
    pub d12: f64,
    pub d23: f64,
    pub d14: f64,
    pub d45: f64,
    /// Carrier wavelength, meters.
    pub wavelength: f64,
}

impl From<ArrayGeometry> for AmpGeometry {
    fn from(g: ArrayGeometry) -> Self {
        Self { d12: g.d12, d23: g.d23, d14: g.d14, d45: g.d45, wavelength: g.wavelength }
    }
}

unsafe fn read_geometry(g: *const AmpGeometry) -> Result<ArrayGeometry, Fail> {
    if g.is_null() {
        return Ok(ArrayGeometry::default());
    }
    let g = &*g;
    Ok(ArrayGeometry::new(g.d12, g.d23, g.d14, g.d45, g.wavelength)?)
}

/// Phases (`n × 5` cycles) and ENU lines of sight (`n × 3`) as a prepared epoch.
unsafe fn prepared(phases: *const f64, los: *const f64, n: usize, g: &ArrayGeometry) -> Result<PreparedPhases, Fail> {
    let ph = slice(phases, n * NUM_ANTENNAS, "phases")?;
    let h = slice(los, n * 3, "los")?;
    let rows: Vec<[f64; NUM_ANTENNAS]> =
        ph.chunks_exact(NUM_ANTENNAS).map(|c| std::array::from_fn(|a| c[a])).collect();
    let los: Vec<Vector3<f64>> = h.chunks_exact(3).map(|c| Vector3::new(c[0], c[1], c[2])).collect();
    let set = PhaseSet::new(rows, (0..n).collect())?;
    Ok(PreparedPhases::new(&set, g, &LosMatrix::from_rows(los))?)
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn amp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn amp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default five-antenna layout for GPS L1.
#[no_mangle]
pub extern "C" fn amp_geometry_default() -> AmpGeometry {
    ArrayGeometry::default().into()
}

/// RANSAC iteration count for success probability `p`, outlier ratio `eta`
/// and seed size `m`.
#[no_mangle]
pub extern "C" fn amp_ransac_iterations(p: f64, eta: f64, m: usize) -> usize {
    n_iterations(p, eta, m)
}

/// Parsed YUMA almanac.
pub struct AmpAlmanac {
    records: Vec<AlmanacRecord>,
}

/// Parses YUMA almanac `text` into a new handle stored in `*out`.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn amp_almanac_parse(text: *const c_char, out: *mut *mut AmpAlmanac) -> AmpStatus {
    guard(|| {
        if text.is_null() {
            return Err(null("text"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(text).to_str().map_err(|_| Fail(AmpStatus::Parse, "almanac is not UTF-8".into()))?;
        let records = parse_yuma(text)?;
        *out = Box::into_raw(Box::new(AmpAlmanac { records }));
        Ok(())
    })
}

/// Number of records in the almanac; 0 for NULL.
///
/// # Safety
/// `almanac` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn amp_almanac_len(almanac: *const AmpAlmanac) -> usize {
    almanac.as_ref().map_or(0, |a| a.records.len())
}

/// PRN of record `index`, 0 when out of range.
///
/// # Safety
/// `almanac` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn amp_almanac_prn(almanac: *const AmpAlmanac, index: usize) -> u32 {
    almanac.as_ref().and_then(|a| a.records.get(index)).map_or(0, |r| r.prn)
}

/// ECEF position (meters) of record `index` at GPS `week`/`tow`.
///
/// # Safety
/// `almanac` must be a live handle and `out_ecef` point to 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn amp_almanac_position(
    almanac: *const AmpAlmanac,
    index: usize,
    week: u32,
    tow: f64,
    out_ecef: *mut f64,
) -> AmpStatus {
    guard(|| {
        let a = almanac.as_ref().ok_or_else(|| null("almanac"))?;
        let rec = a.records.get(index).ok_or_else(|| invalid(format!("record {index} out of range")))?;
        let p = sat_position(rec, &GpsTime::new(week, tow)?)?;
        write(out_ecef, p.as_slice(), "out_ecef")
    })
}

/// # Safety
/// `almanac` must be NULL or a handle from [`amp_almanac_parse`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn amp_almanac_free(almanac: *mut AmpAlmanac) {
    if !almanac.is_null() {
        drop(Box::from_raw(almanac));
    }
}

/// Attitude of the array from `n` satellites. `geometry` may be NULL for the
/// default layout. Writes the body-to-ENU rotation to `out_rotation`.
///
/// # Safety
/// `phases` holds `n × 5` doubles, `los` `n × 3`, `out_rotation` 9.
#[no_mangle]
pub unsafe extern "C" fn amp_attitude_solve(
    phases: *const f64,
    los: *const f64,
    n: usize,
    geometry: *const AmpGeometry,
    out_rotation: *mut f64,
) -> AmpStatus {
    guard(|| {
        let g = read_geometry(geometry)?;
        let prep = prepared(phases, los, n, &g)?;
        let all: Vec<usize> = (0..n).collect();
        let sol = prep.solve(&all)?;
        write(out_rotation, &row_major(&sol.rotation), "out_rotation")
    })
}

/// Position (ECEF meters) and clock bias (meters) from `n` pseudoranges.
///
/// # Safety
/// `pseudoranges` holds `n` doubles, `sat_ecef` `n × 3`, `initial` 3 (or
/// NULL for the Earth's centre), `out_position` 3, `out_clock` 1.
#[no_mangle]
pub unsafe extern "C" fn amp_spp_solve(
    pseudoranges: *const f64,
    sat_ecef: *const f64,
    n: usize,
    initial: *const f64,
    out_position: *mut f64,
    out_clock: *mut f64,
) -> AmpStatus {
    guard(|| {
        let pr = slice(pseudoranges, n, "pseudoranges")?;
        let sats: Vec<Vector3<f64>> =
            slice(sat_ecef, n * 3, "sat_ecef")?.chunks_exact(3).map(|c| Vector3::new(c[0], c[1], c[2])).collect();
        let init = if initial.is_null() { Vector3::zeros() } else { vec3(initial, "initial")? };
        let sol = spp_solve(pr, &sats, &init)?;
        write(out_position, sol.position.as_slice(), "out_position")?;
        write(out_clock, &[sol.clock_bias], "out_clock")
    })
}

/// RANSAC detector tuning. Zero `n_iter` derives the count from `p`, `eta`
/// and `m`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct AmpDetectorConfig {
    /// Inlier threshold on the geodesic distance, radians.
    pub epsilon_inlier: f64,
    pub n_min: usize,
    pub m: usize,
    pub p: f64,
    pub eta: f64,
    pub n_iter: usize,
}

impl From<&DetectorConfig> for AmpDetectorConfig {
    fn from(c: &DetectorConfig) -> Self {
        Self {
            epsilon_inlier: c.epsilon_inlier,
            n_min: c.n_min,
            m: c.m,
            p: c.p,
            eta: c.eta,
            n_iter: c.n_iter.unwrap_or(0),
        }
    }
}

#[no_mangle]
pub extern "C" fn amp_detector_config_default() -> AmpDetectorConfig {
    (&DetectorConfig::default()).into()
}

/// Seeded RANSAC detector with a fixed array layout.
pub struct AmpDetector {
    config: DetectorConfig,
    geometry: ArrayGeometry,
    rng: ChaCha8Rng,
}

/// Creates a detector. `config` and `geometry` may be NULL for defaults.
///
/// # Safety
/// Non-NULL pointers must be readable; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn amp_detector_new(
    config: *const AmpDetectorConfig,
    geometry: *const AmpGeometry,
    seed: u64,
    out: *mut *mut AmpDetector,
) -> AmpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let mut cfg = DetectorConfig::default();
        if let Some(c) = config.as_ref() {
            cfg.epsilon_inlier = c.epsilon_inlier;
            cfg.n_min = c.n_min;
            cfg.m = c.m;
            cfg.p = c.p;
            cfg.eta = c.eta;
            cfg.n_iter = (c.n_iter > 0).then_some(c.n_iter);
        }
        cfg.validate()?;
        let geometry = read_geometry(geometry)?;
        *out = Box::into_raw(Box::new(AmpDetector { config: cfg, geometry, rng: ChaCha8Rng::seed_from_u64(seed) }));
        Ok(())
    })
}

/// Flags satellites inconsistent with the attitude closest to `r_ref`.
/// `out_flags` receives one byte per satellite (1 = contaminated); the fitted
/// rotation and its geodesic distance to `r_ref` go to `out_rotation` and
/// `out_error`, either of which may be NULL.
///
/// # Safety
/// `detector` must be live; `phases` holds `n × 5` doubles, `los` `n × 3`,
/// `r_ref` 9, `out_flags` `n` bytes, `out_rotation` 9 when non-NULL.
#[no_mangle]
pub unsafe extern "C" fn amp_detector_run(
    detector: *mut AmpDetector,
    phases: *const f64,
    los: *const f64,
    n: usize,
    r_ref: *const f64,
    out_flags: *mut u8,
    out_rotation: *mut f64,
    out_error: *mut f64,
) -> AmpStatus {
    guard(|| {
        let d = detector.as_mut().ok_or_else(|| null("detector"))?;
        let r_ref = read_rotation(r_ref, "r_ref")?;
        let prep = prepared(phases, los, n, &d.geometry)?;
        let res = ransac_prepared(&prep, &r_ref, &d.config, &mut d.rng)?;
        let flags: Vec<u8> = res.flags.iter().map(|&f| f as u8).collect();
        write(out_flags, &flags, "out_flags")?;
        if !out_rotation.is_null() {
            write(out_rotation, &row_major(&res.rotation), "out_rotation")?;
        }
        if !out_error.is_null() {
            *out_error = res.error;
        }
        Ok(())
    })
}

/// # Safety
/// `detector` must be NULL or a handle from [`amp_detector_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn amp_detector_free(detector: *mut AmpDetector) {
    if !detector.is_null() {
        drop(Box::from_raw(detector));
    }
}

/// Navigation state of the filter (ENU frame).
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct AmpNavState {
    /// Body-to-ENU rotation, row-major.
    pub rotation: [f64; 9],
    pub position: [f64; 3],
    pub velocity: [f64; 3],
    pub gyro_bias: [f64; 3],
    pub accel_bias: [f64; 3],
}

/// Unscented Kalman filter on rotation × vectors.
pub struct AmpUkf {
    inner: Ukf,
}

/// Starts a filter at the given pose with the default initial covariance and
/// process noise. `geometry` may be NULL.
///
/// # Safety
/// `rotation` holds 9 doubles, `position` and `velocity` 3; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn amp_ukf_new(
    rotation: *const f64,
    position: *const f64,
    velocity: *const f64,
    geometry: *const AmpGeometry,
    out: *mut *mut AmpUkf,
) -> AmpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let state = UkfState::new(read_rotation(rotation, "rotation")?, vec3(position, "position")?, vec3(velocity, "velocity")?);
        if !state.is_finite() {
            return Err(invalid("initial state is not finite"));
        }
        let inner = Ukf::new(state, default_initial_covariance(), ProcessNoise::default(), read_geometry(geometry)?);
        *out = Box::into_raw(Box::new(AmpUkf { inner }));
        Ok(())
    })
}

/// Propagates with body-frame angular rate (rad/s) and specific force (m/s²)
/// over `dt` seconds.
///
/// # Safety
/// `ukf` must be live; `gyro` and `accel` hold 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn amp_ukf_propagate(ukf: *mut AmpUkf, gyro: *const f64, accel: *const f64, dt: f64) -> AmpStatus {
    guard(|| {
        let f = ukf.as_mut().ok_or_else(|| null("ukf"))?;
        let u = ImuSample { gyro: vec3(gyro, "gyro")?, accel: vec3(accel, "accel")?, dt };
        Ok(f.inner.propagate(&u)?)
    })
}

/// Updates with a measured attitude (roll, pitch, yaw, radians) and the five
/// antenna positions (`5 × 3` ENU meters). `attitude_error` is the detector's
/// geodesic error and sets the attitude variance; `position_var` is the
/// per-axis antenna position variance in m². A non-finite `attitude_error`
/// skips the attitude rows.
///
/// # Safety
/// `ukf` must be live; `rpy` holds 3 doubles and `antenna_positions` 15.
#[no_mangle]
pub unsafe extern "C" fn amp_ukf_update(
    ukf: *mut AmpUkf,
    rpy: *const f64,
    antenna_positions: *const f64,
    attitude_error: f64,
    position_var: f64,
) -> AmpStatus {
    guard(|| {
        let f = ukf.as_mut().ok_or_else(|| null("ukf"))?;
        let a = vec3(rpy, "rpy")?;
        let pos = slice(antenna_positions, 3 * NUM_ANTENNAS, "antenna_positions")?;
        if !(position_var > 0.0) {
            return Err(invalid("position_var must be positive"));
        }
        let z = ArrayMeasurement {
            attitude: EulerRpy::from_vector(&a),
            positions: std::array::from_fn(|r| Vector3::new(pos[3 * r], pos[3 * r + 1], pos[3 * r + 2])),
            attitude_error,
        };
        let att_var = if attitude_error.is_finite() { MeasurementNoise::attitude_from_error(attitude_error) } else { f64::INFINITY };
        Ok(f.inner.update(&z, &MeasurementNoise::isotropic(att_var, position_var))?)
    })
}

/// Copies the current state into `*out`.
///
/// # Safety
/// `ukf` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn amp_ukf_state(ukf: *const AmpUkf, out: *mut AmpNavState) -> AmpStatus {
    guard(|| {
        let f = ukf.as_ref().ok_or_else(|| null("ukf"))?;
        let s = &f.inner.state;
        let v = |x: &Vector3<f64>| [x.x, x.y, x.z];
        let state = AmpNavState {
            rotation: row_major(&s.rotation),
            position: v(&s.position),
            velocity: v(&s.velocity),
            gyro_bias: v(&s.gyro_bias),
            accel_bias: v(&s.accel_bias),
        };
        write(out, &[state], "out")
    })
}

/// # Safety
/// `ukf` must be NULL or a handle from [`amp_ukf_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn amp_ukf_free(ukf: *mut AmpUkf) {
    if !ukf.is_null() {
        drop(Box::from_raw(ukf));
    }
}
