use nalgebra::Vector3;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{finish_stream, TrajectorySample};
use crate::error::{Error, Result};
use crate::frames::{ecef_to_geodetic, enu_to_ecef, GeodeticPosition};
use crate::so3::{log_so3, so3_to_rpy, EulerRpy};
use crate::ukf::{ImuSample, ProcessNoise};

/// Constant sensor biases added to synthesized readings.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ImuBias {
    pub gyro: Vector3<f64>,
    pub accel: Vector3<f64>,
}

/// Replaces the IMU fields with readings that reproduce the truth under the
/// filter's motion model: `ω = log(R_nᵀR_{n+1})/Δt` and
/// `a_b = R_nᵀ((V_{n+1} − V_n)/Δt − g)`, plus white noise at the densities in
/// `noise` and the constant `bias`. The last sample repeats the previous
/// reading.
pub fn synth_imu_from_truth(
    samples: &[TrajectorySample],
    noise: &ProcessNoise,
    bias: &ImuBias,
    rng: &mut impl Rng,
) -> Result<Vec<TrajectorySample>> {
    if samples.len() < 3 {
        return Err(Error::EmptyStream(format!("need at least 3 samples, got {}", samples.len())));
    }
    noise.validate()?;
    let mut out = samples.to_vec();
    for n in 0..samples.len() - 1 {
        let (a, b) = (&samples[n], &samples[n + 1]);
        let dt = b.t - a.t;
        if !(dt > 0.0) {
            return Err(Error::InvalidStep(dt));
        }
        let r = a.rotation();
        let gyro = log_so3(&(r.transpose() * b.rotation())) / dt;
        let accel = r.transpose().rotate(&((b.velocity - a.velocity) / dt - noise.gravity));
        let mut white = || Vector3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        let sg = noise.gyro / dt.sqrt();
        let sa = noise.accel / dt.sqrt();
        out[n].imu = ImuSample {
            gyro: gyro + bias.gyro + white() * sg,
            accel: accel + bias.accel + white() * sa,
            dt,
        };
    }
    let n = out.len();
    out[n - 1].imu = out[n - 2].imu;
    Ok(out)
}

/// Start of the built-in drive (Karlsruhe, where the KITTI drives were
/// recorded).
pub const BUILTIN_ORIGIN: GeodeticPosition = GeodeticPosition { lat: 0.855_411_3, lon: 0.146_895_7, height: 115.0 };

/// A smooth synthetic drive: speed oscillating around 8 m/s, weaving yaw rate
/// and small pitch and roll. Positions are the trapezoidal integral of the
/// velocity, so [`synth_imu_from_truth`] readings propagate back onto the
/// truth exactly. IMU fields are filled noise-free.
pub fn builtin_trajectory(duration: f64, dt: f64) -> Result<Vec<TrajectorySample>> {
    if !(dt > 0.0 && duration >= 2.0 * dt) {
        return Err(Error::Config(format!("bad builtin trajectory duration {duration} / step {dt}")));
    }
    use std::f64::consts::TAU;
    let steps = (duration / dt).round() as usize;
    let speed = |t: f64| 8.0 + 2.0 * (TAU * t / 30.0).sin();
    let yaw = |t: f64| 0.6 - 0.12 * 20.0 / TAU * (TAU * t / 20.0).cos();
    let pitch = |t: f64| 0.02 * (TAU * t / 15.0).sin();
    let roll = |t: f64| 0.01 * (TAU * t / 9.0).sin();

    let mut enu = Vector3::zeros();
    let mut prev_v: Option<Vector3<f64>> = None;
    let mut out = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let t = k as f64 * dt;
        let (p, y) = (pitch(t), yaw(t));
        let v = speed(t) * Vector3::new(y.cos() * p.cos(), y.sin() * p.cos(), p.sin());
        if let Some(pv) = prev_v {
            enu += (pv + v) * (0.5 * dt);
        }
        prev_v = Some(v);
        let attitude = EulerRpy::new(roll(t), p, y);
        // normalize angles through the rotation so the stored RPY is canonical
        let (attitude, _) = so3_to_rpy(&crate::so3::rpy_to_so3(&attitude));
        out.push(TrajectorySample {
            t,
            position: ecef_to_geodetic(&enu_to_ecef(&enu, &BUILTIN_ORIGIN)),
            attitude,
            velocity: v,
            imu: ImuSample { gyro: Vector3::zeros(), accel: Vector3::zeros(), dt },
        });
    }
    finish_stream(&mut out)?;
    // zero noise: the generator is never drawn from
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
    synth_imu_from_truth(&out, &ProcessNoise::zero(), &ImuBias::default(), &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::local_positions;
    use crate::so3::{geodesic_distance, rpy_to_so3};
    use crate::ukf::{propagate, Covariance, SigmaParams, UkfState};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn still(n: usize, attitude: EulerRpy) -> Vec<TrajectorySample> {
        (0..n)
            .map(|k| TrajectorySample {
                t: k as f64 * 0.1,
                position: BUILTIN_ORIGIN,
                attitude,
                velocity: Vector3::zeros(),
                imu: ImuSample { gyro: Vector3::zeros(), accel: Vector3::zeros(), dt: 0.1 },
            })
            .collect()
    }

    #[test]
    fn stationary_reads_gravity() {
        let att = EulerRpy::new(0.1, -0.05, 2.0);
        let q = ProcessNoise::zero();
        let out = synth_imu_from_truth(&still(5, att), &q, &ImuBias::default(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let expect = rpy_to_so3(&att).transpose().rotate(&(-q.gravity));
        for s in &out {
            assert!(s.imu.gyro.norm() < 1e-15);
            assert!((s.imu.accel - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn constant_yaw_rate() {
        let rate = 0.3;
        let mut s = still(20, EulerRpy::default());
        for (k, x) in s.iter_mut().enumerate() {
            let (e, _) = so3_to_rpy(&rpy_to_so3(&EulerRpy::new(0.0, 0.0, rate * k as f64 * 0.1)));
            x.attitude = e;
        }
        let out = synth_imu_from_truth(&s, &ProcessNoise::zero(), &ImuBias::default(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        for x in &out {
            assert!((x.imu.gyro - Vector3::new(0.0, 0.0, rate)).norm() < 1e-6);
        }
    }

    #[test]
    fn bias_and_noise_are_injected() {
        let bias = ImuBias { gyro: Vector3::new(0.01, 0.0, 0.0), accel: Vector3::new(0.0, 0.2, 0.0) };
        let clean = synth_imu_from_truth(&still(4000, EulerRpy::default()), &ProcessNoise::zero(), &bias, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!((clean[7].imu.gyro - bias.gyro).norm() < 1e-15);
        let noisy = synth_imu_from_truth(&still(4000, EulerRpy::default()), &ProcessNoise::default(), &ImuBias::default(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let gx: Vec<f64> = noisy.iter().map(|s| s.imu.gyro.x).collect();
        let var = gx.iter().map(|v| v * v).sum::<f64>() / gx.len() as f64;
        let expect = 0.005f64.powi(2) / 0.1;
        assert!((var / expect - 1.0).abs() < 0.1, "{var} vs {expect}");
    }

    #[test]
    fn rejects_short_and_repeated_time() {
        let q = ProcessNoise::zero();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(synth_imu_from_truth(&still(2, EulerRpy::default()), &q, &ImuBias::default(), &mut rng), Err(Error::EmptyStream(_))));
        let mut s = still(4, EulerRpy::default());
        s[2].t = s[1].t;
        assert!(matches!(synth_imu_from_truth(&s, &q, &ImuBias::default(), &mut rng), Err(Error::InvalidStep(_))));
    }

    #[test]
    fn synthesized_imu_propagates_onto_truth() {
        let traj = builtin_trajectory(10.0, 0.1).unwrap();
        assert_eq!(traj.len(), 101);
        let pos = local_positions(&traj);
        let q = ProcessNoise::zero();
        let mut x = UkfState::new(traj[0].rotation(), pos[0], traj[0].velocity);
        let mut max_err: f64 = 0.0;
        for n in 0..100 {
            x = propagate(&x, &Covariance::zeros(), &traj[n].imu, &q, &SigmaParams::default()).unwrap().0;
            max_err = max_err.max((x.position - pos[n + 1]).norm());
            assert!(geodesic_distance(&x.rotation, &traj[n + 1].rotation()) < 1e-9);
        }
        assert!(max_err < 1e-3, "{max_err}");
    }
}
