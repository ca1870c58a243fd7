#![allow(dead_code)]

use arraymp::constellation::GpsTime;
use arraymp::frames::{enu_to_ecef, EcefPosition, GeodeticPosition};
use arraymp::obs_sim::{generate_epoch, ArrayEpoch, ArrayGeometry, Environment, NoiseConfig, TruthPose};
use arraymp::so3::{exp_so3, RotationMatrix};
use nalgebra::Vector3;
use rand::Rng;

pub const ORBIT_DISTANCE: f64 = 2.02e7;

pub fn site() -> GeodeticPosition {
    GeodeticPosition::from_degrees(49.0114, 8.4165, 115.0)
}

pub fn time() -> GpsTime {
    GpsTime::new(338, 61_524.0).unwrap()
}

pub fn random_rotation(rng: &mut impl Rng) -> RotationMatrix {
    let axis = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let axis = if axis.norm() < 1e-3 { Vector3::z() } else { axis.normalize() };
    exp_so3(&(axis * rng.random_range(0.0..std::f64::consts::PI - 1e-3)))
}

/// `n` satellites spread in azimuth with elevations in 15-85 degrees.
pub fn random_sky(n: usize, frame: &GeodeticPosition, rng: &mut impl Rng) -> Vec<(u32, EcefPosition)> {
    (0..n)
        .map(|k| {
            let el: f64 = rng.random_range(15f64..85.0).to_radians();
            let az = std::f64::consts::TAU * (k as f64 + rng.random_range(0.1..0.9)) / n as f64;
            let u = Vector3::new(el.cos() * az.sin(), el.cos() * az.cos(), el.sin());
            (k as u32 + 1, enu_to_ecef(&(u * ORBIT_DISTANCE), frame))
        })
        .collect()
}

pub fn open_sky_epoch(
    sats: &[(u32, EcefPosition)],
    attitude: RotationMatrix,
    noise: &NoiseConfig,
    rng: &mut impl Rng,
) -> ArrayEpoch {
    generate_epoch(
        &TruthPose::at_origin(site(), attitude),
        time(),
        sats,
        Environment::Open,
        &ArrayGeometry::default(),
        noise,
        0.0,
        rng,
    )
    .unwrap()
}
