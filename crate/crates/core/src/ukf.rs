//! Unscented Kalman filter on SO(3)×R¹².
//!
//! The state is `(R, P, V, b_g, b_a)`. Perturbations live in a 15-vector
//! `[δθ, δP, δV, δb_g, δb_a]` mapped onto the state by [`retract`], with the
//! rotation perturbed on the right. Sigma points are drawn in that tangent
//! space; the propagated mean is evaluated exactly and only the covariance is
//! carried through the unscented transform, with the process noise appended
//! to the state (joint augmentation).

use nalgebra::{DMatrix, DVector, SMatrix, SVector, Vector3};

use crate::error::{Error, Result};
use crate::obs_sim::{ArrayGeometry, NUM_ANTENNAS};
use crate::so3::{exp_so3, log_so3, so3_to_rpy, wrap_pi, EulerRpy, RotationMatrix};

pub const STATE_DIM: usize = 15;
pub const NOISE_DIM: usize = 12;
pub const MEAS_DIM: usize = 3 + 3 * NUM_ANTENNAS;

/// Standard gravity, m/s².
pub const GRAVITY: f64 = 9.80665;

/// Attitude rows are skipped when |pitch| exceeds this (radians).
pub const GIMBAL_PITCH_LIMIT: f64 = 85.0 * std::f64::consts::PI / 180.0;

pub type Tangent = SVector<f64, STATE_DIM>;
pub type Covariance = SMatrix<f64, STATE_DIM, STATE_DIM>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UkfState {
    pub rotation: RotationMatrix,
    /// Antenna 1 position, ENU meters.
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub gyro_bias: Vector3<f64>,
    pub accel_bias: Vector3<f64>,
}

impl UkfState {
    pub fn new(rotation: RotationMatrix, position: Vector3<f64>, velocity: Vector3<f64>) -> Self {
        Self { rotation, position, velocity, gyro_bias: Vector3::zeros(), accel_bias: Vector3::zeros() }
    }

    pub fn is_finite(&self) -> bool {
        self.rotation.matrix().iter().all(|v| v.is_finite())
            && [self.position, self.velocity, self.gyro_bias, self.accel_bias]
                .iter()
                .all(|v| v.iter().all(|x| x.is_finite()))
    }
}

/// One inertial sample: body angular rate (rad/s), body specific force
/// (m/s²) and the interval it covers (s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    pub gyro: Vector3<f64>,
    pub accel: Vector3<f64>,
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessNoise {
    /// Gyro white noise density, rad/s/√Hz.
    pub gyro: f64,
    /// Accelerometer white noise density, m/s²/√Hz.
    pub accel: f64,
    /// Gyro bias random walk, rad/s/√s.
    pub gyro_bias_walk: f64,
    /// Accelerometer bias random walk, m/s²/√s.
    pub accel_bias_walk: f64,
    /// Gravity in ENU.
    pub gravity: Vector3<f64>,
}

impl Default for ProcessNoise {
    fn default() -> Self {
        Self {
            gyro: 0.005,
            accel: 0.05,
            gyro_bias_walk: 1e-5,
            accel_bias_walk: 1e-4,
            gravity: Vector3::new(0.0, 0.0, -GRAVITY),
        }
    }
}

impl ProcessNoise {
    pub fn zero() -> Self {
        Self { gyro: 0.0, accel: 0.0, gyro_bias_walk: 0.0, accel_bias_walk: 0.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let stds = [self.gyro, self.accel, self.gyro_bias_walk, self.accel_bias_walk];
        if stds.iter().any(|s| !(*s >= 0.0)) || !self.gravity.iter().all(|g| g.is_finite()) {
            return Err(Error::Config("process noise must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// Covariance of the discrete noise vector `[w_ω, w_a, w_bg, w_ba]` over `dt`.
    fn discrete(&self, dt: f64) -> SVector<f64, NOISE_DIM> {
        let mut q = SVector::<f64, NOISE_DIM>::zeros();
        for (block, s) in [self.gyro, self.accel, self.gyro_bias_walk, self.accel_bias_walk].iter().enumerate() {
            for k in 0..3 {
                q[3 * block + k] = s * s / dt;
            }
        }
        q
    }
}

/// Scaled unscented transform parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaParams {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
}

impl Default for SigmaParams {
    fn default() -> Self {
        Self { alpha: 1e-3, beta: 2.0, kappa: 0.0 }
    }
}

struct Weights {
    scale: f64,
    c0: f64,
    mi: f64,
}

impl SigmaParams {
    fn weights(&self, n: usize) -> Weights {
        let nf = n as f64;
        let lambda = self.alpha * self.alpha * (nf + self.kappa) - nf;
        let m0 = lambda / (nf + lambda);
        Weights {
            scale: (nf + lambda).sqrt(),
            c0: m0 + 1.0 - self.alpha * self.alpha + self.beta,
            mi: 1.0 / (2.0 * (nf + lambda)),
        }
    }
}

/// Predicted or measured array outputs: attitude angles and the five antenna
/// positions (ENU).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayMeasurement {
    pub attitude: EulerRpy,
    pub positions: [Vector3<f64>; NUM_ANTENNAS],
    /// Detector confidence in the attitude, geodesic radians.
    pub attitude_error: f64,
}

/// Measurement noise variances. Non-finite entries drop the matching rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementNoise {
    /// Roll, pitch, yaw variances, rad².
    pub attitude: Vector3<f64>,
    /// Per-antenna ENU position variances, m².
    pub positions: [Vector3<f64>; NUM_ANTENNAS],
}

impl MeasurementNoise {
    pub fn isotropic(attitude_var: f64, position_var: f64) -> Self {
        Self { attitude: Vector3::repeat(attitude_var), positions: [Vector3::repeat(position_var); NUM_ANTENNAS] }
    }

    /// Attitude variance `max(er², 1e-4)` from the detector error.
    pub fn attitude_from_error(er: f64) -> f64 {
        (er * er).max(1e-4)
    }

    fn diagonal(&self) -> SVector<f64, MEAS_DIM> {
        let mut d = SVector::<f64, MEAS_DIM>::zeros();
        d.fixed_rows_mut::<3>(0).copy_from(&self.attitude);
        for r in 0..NUM_ANTENNAS {
            d.fixed_rows_mut::<3>(3 + 3 * r).copy_from(&self.positions[r]);
        }
        d
    }
}

/// Initial covariance used when a filter is seeded from a first fix.
pub fn default_initial_covariance() -> Covariance {
    let stds = [0.05, 5.0, 0.5, 0.01, 0.1];
    let mut p = Covariance::zeros();
    for (b, s) in stds.iter().enumerate() {
        for k in 0..3 {
            p[(3 * b + k, 3 * b + k)] = s * s;
        }
    }
    p
}

pub fn retract(x: &UkfState, xi: &Tangent) -> UkfState {
    let b = |i: usize| Vector3::new(xi[3 * i], xi[3 * i + 1], xi[3 * i + 2]);
    UkfState {
        rotation: x.rotation * exp_so3(&b(0)),
        position: x.position + b(1),
        velocity: x.velocity + b(2),
        gyro_bias: x.gyro_bias + b(3),
        accel_bias: x.accel_bias + b(4),
    }
}

/// Tangent vector taking `x` to `y`.
pub fn inverse_retract(x: &UkfState, y: &UkfState) -> Tangent {
    let mut xi = Tangent::zeros();
    let blocks = [
        log_so3(&(x.rotation.transpose() * y.rotation)),
        y.position - x.position,
        y.velocity - x.velocity,
        y.gyro_bias - x.gyro_bias,
        y.accel_bias - x.accel_bias,
    ];
    for (i, v) in blocks.iter().enumerate() {
        xi.fixed_rows_mut::<3>(3 * i).copy_from(v);
    }
    xi
}

/// Motion model with explicit noise `w = [w_ω, w_a, w_bg, w_ba]`.
fn motion(x: &UkfState, u: &ImuSample, w: &SVector<f64, NOISE_DIM>, g: &Vector3<f64>) -> UkfState {
    let dt = u.dt;
    let wb = |i: usize| Vector3::new(w[3 * i], w[3 * i + 1], w[3 * i + 2]);
    let omega = u.gyro + wb(0) - x.gyro_bias;
    let a = x.rotation.rotate(&(u.accel + wb(1) - x.accel_bias)) + g;
    UkfState {
        rotation: x.rotation * exp_so3(&(omega * dt)),
        position: x.position + x.velocity * dt + a * (0.5 * dt * dt),
        velocity: x.velocity + a * dt,
        gyro_bias: x.gyro_bias + wb(2) * dt,
        accel_bias: x.accel_bias + wb(3) * dt,
    }
}

/// Symmetric square root factor `L` with `L·Lᵀ = m`, clipping negative
/// eigenvalues to zero.
fn sqrt_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let d = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&d)
}

/// Symmetrizes and floors eigenvalues at zero.
pub fn condition_covariance(p: &Covariance) -> Covariance {
    let sym = (p + p.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    if eig.eigenvalues.iter().all(|&v| v >= 0.0) {
        return sym;
    }
    let d = eig.eigenvalues.map(|v| v.max(0.0));
    let out = eig.eigenvectors * Covariance::from_diagonal(&d) * eig.eigenvectors.transpose();
    (out + out.transpose()) * 0.5
}

pub fn propagate(
    x: &UkfState,
    p: &Covariance,
    u: &ImuSample,
    q: &ProcessNoise,
    params: &SigmaParams,
) -> Result<(UkfState, Covariance)> {
    if !(u.dt > 0.0 && u.dt <= 1.0) {
        return Err(Error::InvalidStep(u.dt));
    }
    let zero_w = SVector::<f64, NOISE_DIM>::zeros();
    let mut mean = motion(x, u, &zero_w, &q.gravity);
    mean.rotation = mean.rotation.renormalized();

    let n = STATE_DIM + NOISE_DIM;
    let mut aug = DMatrix::<f64>::zeros(n, n);
    aug.view_mut((0, 0), (STATE_DIM, STATE_DIM)).copy_from(p);
    let qd = q.discrete(u.dt);
    for k in 0..NOISE_DIM {
        aug[(STATE_DIM + k, STATE_DIM + k)] = qd[k];
    }
    let w = params.weights(n);
    let l = sqrt_psd(&aug) * w.scale;

    let mut xis: Vec<Tangent> = Vec::with_capacity(2 * n);
    for j in 0..n {
        for sign in [1.0, -1.0] {
            let col: DVector<f64> = l.column(j) * sign;
            let dx = Tangent::from_iterator(col.rows(0, STATE_DIM).iter().copied());
            let dw = SVector::<f64, NOISE_DIM>::from_iterator(col.rows(STATE_DIM, NOISE_DIM).iter().copied());
            let y = motion(&retract(x, &dx), u, &dw, &q.gravity);
            xis.push(inverse_retract(&mean, &y));
        }
    }
    // the centre point maps exactly onto the mean (ξ₀ = 0)
    let xbar: Tangent = xis.iter().fold(Tangent::zeros(), |acc, v| acc + v * w.mi);
    let mut cov = xbar * xbar.transpose() * w.c0;
    for v in &xis {
        let d = v - xbar;
        cov += d * d.transpose() * w.mi;
    }
    Ok((mean, condition_covariance(&cov)))
}

pub fn predict_measurement(x: &UkfState, geometry: &ArrayGeometry) -> ArrayMeasurement {
    let (attitude, _) = so3_to_rpy(&x.rotation);
    let positions = std::array::from_fn(|r| x.position + x.rotation.rotate(&geometry.body_offset(r)));
    ArrayMeasurement { attitude, positions, attitude_error: 0.0 }
}

fn stack(m: &ArrayMeasurement) -> SVector<f64, MEAS_DIM> {
    let mut z = SVector::<f64, MEAS_DIM>::zeros();
    z.fixed_rows_mut::<3>(0).copy_from(&m.attitude.to_vector());
    for r in 0..NUM_ANTENNAS {
        z.fixed_rows_mut::<3>(3 + 3 * r).copy_from(&m.positions[r]);
    }
    z
}

/// `a − b` with the three angle rows wrapped to (−π, π].
fn meas_diff(a: &SVector<f64, MEAS_DIM>, b: &SVector<f64, MEAS_DIM>) -> SVector<f64, MEAS_DIM> {
    let mut d = a - b;
    for k in 0..3 {
        d[k] = wrap_pi(d[k]);
    }
    d
}

pub fn update(
    x: &UkfState,
    p: &Covariance,
    z: &ArrayMeasurement,
    noise: &MeasurementNoise,
    geometry: &ArrayGeometry,
    params: &SigmaParams,
) -> Result<(UkfState, Covariance)> {
    let r_diag = noise.diagonal();
    let predicted = predict_measurement(x, geometry);
    let skip_attitude = z.attitude.pitch.abs() > GIMBAL_PITCH_LIMIT || predicted.attitude.pitch.abs() > GIMBAL_PITCH_LIMIT;
    let rows: Vec<usize> = (0..MEAS_DIM)
        .filter(|&k| r_diag[k].is_finite() && !(skip_attitude && k < 3))
        .collect();
    if rows.is_empty() {
        return Ok((*x, *p));
    }
    if r_diag.iter().any(|v| *v < 0.0) {
        return Err(Error::Config("negative measurement variance".into()));
    }

    let w = params.weights(STATE_DIM);
    let l = sqrt_psd(&DMatrix::from_iterator(STATE_DIM, STATE_DIM, p.iter().copied())) * w.scale;
    let z0 = stack(&predicted);
    let mut xis = Vec::with_capacity(2 * STATE_DIM);
    let mut dzs = Vec::with_capacity(2 * STATE_DIM);
    for j in 0..STATE_DIM {
        for sign in [1.0, -1.0] {
            let xi = Tangent::from_iterator(l.column(j).iter().map(|v| v * sign));
            let zi = stack(&predict_measurement(&retract(x, &xi), geometry));
            xis.push(xi);
            dzs.push(meas_diff(&zi, &z0));
        }
    }
    let dbar = dzs.iter().fold(SVector::<f64, MEAS_DIM>::zeros(), |acc, d| acc + d * w.mi);
    let zbar = z0 + dbar;

    let m = rows.len();
    let pick = |v: &SVector<f64, MEAS_DIM>| DVector::from_iterator(m, rows.iter().map(|&k| v[k]));
    let mut s = DMatrix::<f64>::zeros(m, m);
    let mut c = DMatrix::<f64>::zeros(STATE_DIM, m);
    let d0 = pick(&(-dbar));
    s += &d0 * d0.transpose() * w.c0;
    for (xi, dz) in xis.iter().zip(&dzs) {
        let d = pick(&(dz - dbar));
        s += &d * d.transpose() * w.mi;
        c += DMatrix::from_iterator(STATE_DIM, 1, xi.iter().copied()) * d.transpose() * w.mi;
    }
    for (i, &k) in rows.iter().enumerate() {
        s[(i, i)] += r_diag[k];
    }
    let s = (&s + s.transpose()) * 0.5;
    let chol = s.clone().cholesky().ok_or(Error::SingularUpdate)?;
    let gain = c * chol.inverse();
    let innovation = pick(&meas_diff(&stack(z), &zbar));
    let dx = &gain * innovation;
    let xi = Tangent::from_iterator(dx.iter().copied());
    let mut post = retract(x, &xi);
    post.rotation = post.rotation.renormalized();
    let pk = &gain * s * gain.transpose();
    let cov = p - Covariance::from_iterator(pk.iter().copied());
    Ok((post, condition_covariance(&cov)))
}

/// A filter instance: state, covariance and fixed model parameters.
#[derive(Debug, Clone)]
pub struct Ukf {
    pub state: UkfState,
    pub covariance: Covariance,
    pub process_noise: ProcessNoise,
    pub geometry: ArrayGeometry,
    pub params: SigmaParams,
}

impl Ukf {
    pub fn new(state: UkfState, covariance: Covariance, process_noise: ProcessNoise, geometry: ArrayGeometry) -> Self {
        Self { state, covariance, process_noise, geometry, params: SigmaParams::default() }
    }

    pub fn propagate(&mut self, u: &ImuSample) -> Result<()> {
        let (x, p) = propagate(&self.state, &self.covariance, u, &self.process_noise, &self.params)?;
        self.state = x;
        self.covariance = p;
        Ok(())
    }

    pub fn update(&mut self, z: &ArrayMeasurement, noise: &MeasurementNoise) -> Result<()> {
        let (x, p) = update(&self.state, &self.covariance, z, noise, &self.geometry, &self.params)?;
        self.state = x;
        self.covariance = p;
        Ok(())
    }

    pub fn predicted_measurement(&self) -> ArrayMeasurement {
        predict_measurement(&self.state, &self.geometry)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::so3::{geodesic_distance, rpy_to_so3};
    use proptest::prelude::*;

    fn assert_psd(p: &Covariance) {
        assert!((p - p.transpose()).abs().max() < 1e-9);
        let min = p.symmetric_eigenvalues().min();
        assert!(min >= -1e-9, "min eigenvalue {min}");
    }

    fn sample_state() -> UkfState {
        UkfState {
            rotation: rpy_to_so3(&EulerRpy::new(0.1, -0.2, 1.3)),
            position: Vector3::new(10.0, -4.0, 2.0),
            velocity: Vector3::new(3.0, 1.0, 0.0),
            gyro_bias: Vector3::new(0.001, 0.0, -0.002),
            accel_bias: Vector3::new(0.01, 0.02, 0.0),
        }
    }

    fn level_imu(dt: f64) -> ImuSample {
        ImuSample { gyro: Vector3::zeros(), accel: Vector3::new(0.0, 0.0, GRAVITY), dt }
    }

    #[test]
    fn retract_examples() {
        let x = sample_state();
        assert_eq!(retract(&x, &Tangent::zeros()), x);
        let mut xi = Tangent::zeros();
        xi[4] = 2.0;
        let y = retract(&x, &xi);
        assert_eq!(y.rotation, x.rotation);
        assert_eq!(y.position, x.position + Vector3::new(0.0, 2.0, 0.0));
        assert_eq!(y.velocity, x.velocity);
    }

    proptest! {
        #[test]
        fn retract_roundtrip(v in prop::array::uniform15(-1.0f64..1.0)) {
            let x = sample_state();
            let xi = Tangent::from_iterator(v.iter().copied());
            let back = inverse_retract(&x, &retract(&x, &xi));
            prop_assert!((back - xi).norm() < 1e-9);
        }
    }

    #[test]
    fn stationary_propagation() {
        let x = UkfState::new(RotationMatrix::identity(), Vector3::new(1.0, 2.0, 3.0), Vector3::zeros());
        let (y, p) = propagate(&x, &default_initial_covariance(), &level_imu(0.1), &ProcessNoise::default(), &SigmaParams::default()).unwrap();
        assert!((y.position - x.position).norm() < 1e-12);
        assert!(y.velocity.norm() < 1e-12);
        assert_psd(&p);
    }

    #[test]
    fn constant_velocity_and_gyro_bias() {
        let mut x = UkfState::new(RotationMatrix::identity(), Vector3::zeros(), Vector3::new(1.0, 0.0, 0.0));
        x.gyro_bias = Vector3::new(0.01, 0.0, 0.0);
        let u = ImuSample { gyro: Vector3::new(0.01, 0.0, 0.0), ..level_imu(0.5) };
        let (y, _) = propagate(&x, &default_initial_covariance(), &u, &ProcessNoise::zero(), &SigmaParams::default()).unwrap();
        assert!((y.position - Vector3::new(0.5, 0.0, 0.0)).norm() < 1e-12);
        assert!(geodesic_distance(&y.rotation, &x.rotation) < 1e-12);
    }

    #[test]
    fn invalid_steps() {
        let x = sample_state();
        for dt in [0.0, -0.1, 1.5, f64::NAN] {
            let err = propagate(&x, &default_initial_covariance(), &level_imu(dt), &ProcessNoise::default(), &SigmaParams::default());
            assert!(matches!(err, Err(Error::InvalidStep(_))));
        }
    }

    #[test]
    fn propagation_grows_position_uncertainty_from_velocity() {
        let x = sample_state();
        let p0 = default_initial_covariance();
        let (_, p1) = propagate(&x, &p0, &level_imu(1.0), &ProcessNoise::default(), &SigmaParams::default()).unwrap();
        // δP' = δP + δV·dt + ...
        assert!((p1[(3, 3)] - (25.0 + 0.25)).abs() < 0.1, "{}", p1[(3, 3)]);
        assert_psd(&p1);
    }

    #[test]
    fn zero_covariance_and_noise_stays_zero() {
        let x = sample_state();
        let (_, p) = propagate(&x, &Covariance::zeros(), &level_imu(0.1), &ProcessNoise::zero(), &SigmaParams::default()).unwrap();
        assert!(p.abs().max() < 1e-15, "{}", p.abs().max());
    }

    #[test]
    fn predicted_positions() {
        let g = ArrayGeometry::default();
        let mut x = sample_state();
        x.rotation = RotationMatrix::identity();
        let m = predict_measurement(&x, &g);
        assert_eq!(m.positions[0], x.position);
        assert!((m.positions[1] - (x.position + Vector3::new(g.d12, 0.0, 0.0))).norm() < 1e-15);
        x.rotation = RotationMatrix::rz(std::f64::consts::FRAC_PI_2);
        let m = predict_measurement(&x, &g);
        assert!((m.positions[1] - (x.position + Vector3::new(0.0, g.d12, 0.0))).norm() < 1e-12);
        let x = sample_state();
        let m = predict_measurement(&x, &g);
        assert!(((m.positions[2] - x.position).norm() - (g.d12 + g.d23)).abs() < 1e-12);
        assert!(((m.positions[4] - x.position).norm() - (g.d14 + g.d45)).abs() < 1e-12);
    }

    #[test]
    fn exact_measurement_leaves_state() {
        let g = ArrayGeometry::default();
        let x = sample_state();
        let z = predict_measurement(&x, &g);
        // the unscented mean differs from h(x) at second order in P
        let p0 = default_initial_covariance() * 1e-8;
        let (y, p) = update(&x, &p0, &z, &MeasurementNoise::isotropic(1e-4, 1.0), &g, &SigmaParams::default()).unwrap();
        assert!(inverse_retract(&x, &y).norm() < 1e-9);
        assert_psd(&p);
        assert!(p.trace() < p0.trace());
        let (y, p) = update(&x, &default_initial_covariance(), &z, &MeasurementNoise::isotropic(1e-4, 1.0), &g, &SigmaParams::default()).unwrap();
        assert!(inverse_retract(&x, &y).norm() < 1e-2);
        assert_psd(&p);
    }

    #[test]
    fn position_offset_pulls_toward_measurement() {
        let g = ArrayGeometry::default();
        let x = sample_state();
        let mut z = predict_measurement(&x, &g);
        let offset = Vector3::new(5.0, 0.0, 0.0);
        for p in z.positions.iter_mut() {
            *p += offset;
        }
        let (y, _) = update(&x, &default_initial_covariance(), &z, &MeasurementNoise::isotropic(1e-4, 0.01), &g, &SigmaParams::default()).unwrap();
        let moved = (y.position - x.position).x;
        assert!(moved > 4.9 && moved <= 5.0 + 1e-9, "{moved}");
        // scalar Kalman oracle: five looks with variance r against prior 25
        let (mut loose, mut prev) = (0.0, 0.0);
        for r in [0.01, 1.0, 25.0, 400.0] {
            let (y, _) = update(&x, &default_initial_covariance(), &z, &MeasurementNoise::isotropic(1e-4, r), &g, &SigmaParams::default()).unwrap();
            loose = (y.position - x.position).x;
            let oracle = 25.0 / (25.0 + r / 5.0) * 5.0;
            assert!((loose - oracle).abs() < 0.05 * oracle + 1e-3, "r={r}: {loose} vs {oracle}");
            if prev > 0.0 {
                assert!(loose < prev);
            }
            prev = loose;
        }
        assert!(loose > 0.0);
    }

    #[test]
    fn yaw_wrap_invariance() {
        let g = ArrayGeometry::default();
        let x = sample_state();
        let mut z = predict_measurement(&x, &g);
        z.attitude.yaw += 0.05;
        let noise = MeasurementNoise::isotropic(1e-4, 1.0);
        let p0 = default_initial_covariance();
        let (a, _) = update(&x, &p0, &z, &noise, &g, &SigmaParams::default()).unwrap();
        z.attitude.yaw += std::f64::consts::TAU;
        let (b, _) = update(&x, &p0, &z, &noise, &g, &SigmaParams::default()).unwrap();
        assert!(inverse_retract(&a, &b).norm() < 1e-12);
    }

    #[test]
    fn infinite_noise_is_ignored() {
        let g = ArrayGeometry::default();
        let x = sample_state();
        let mut z = predict_measurement(&x, &g);
        z.positions[0] += Vector3::new(30.0, 0.0, 0.0);
        z.attitude.roll += 0.3;
        let p0 = default_initial_covariance();
        let (y, p) = update(&x, &p0, &z, &MeasurementNoise::isotropic(f64::INFINITY, f64::INFINITY), &g, &SigmaParams::default()).unwrap();
        assert!(inverse_retract(&x, &y).norm() < 1e-9);
        assert_eq!(p, p0);
    }

    #[test]
    fn gimbal_lock_skips_attitude_rows() {
        let g = ArrayGeometry::default();
        let mut x = sample_state();
        x.rotation = rpy_to_so3(&EulerRpy::new(0.0, 1.52, 0.0));
        let z = predict_measurement(&x, &g);
        let mut bad = z;
        bad.attitude.roll += 1.0;
        let p0 = default_initial_covariance();
        let (y, _) = update(&x, &p0, &bad, &MeasurementNoise::isotropic(1e-4, 1.0), &g, &SigmaParams::default()).unwrap();
        let mut no_att = MeasurementNoise::isotropic(1e-4, 1.0);
        no_att.attitude = Vector3::repeat(f64::INFINITY);
        let (y_ref, _) = update(&x, &p0, &z, &no_att, &g, &SigmaParams::default()).unwrap();
        assert!(inverse_retract(&y_ref, &y).norm() < 1e-12);
    }

    #[test]
    fn singular_innovation() {
        let g = ArrayGeometry::default();
        let x = sample_state();
        let z = predict_measurement(&x, &g);
        let err = update(&x, &Covariance::zeros(), &z, &MeasurementNoise::isotropic(0.0, 0.0), &g, &SigmaParams::default());
        assert_eq!(err.unwrap_err(), Error::SingularUpdate);
    }

    #[test]
    fn renormalization_keeps_rotation_orthonormal() {
        let mut x = sample_state();
        let p = Covariance::zeros();
        let u = ImuSample { gyro: Vector3::new(0.3, -0.7, 1.1), accel: Vector3::new(0.0, 0.0, GRAVITY), dt: 0.01 };
        let q = ProcessNoise::zero();
        for _ in 0..10_000 {
            x = propagate(&x, &p, &u, &q, &SigmaParams::default()).unwrap().0;
        }
        let m = x.rotation.matrix();
        assert!((m.transpose() * m - nalgebra::Matrix3::identity()).norm() < 1e-9);
    }
}
