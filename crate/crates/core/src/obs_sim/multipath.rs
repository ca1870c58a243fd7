use std::f64::consts::TAU;

use nalgebra::Vector3;

use super::{ArrayGeometry, NUM_ANTENNAS};
use crate::error::{Error, Result};
use crate::so3::{wrap_pi, RotationMatrix};

/// Minimum composite amplitude `|1 + Σ a·e^{jΔφ}|` for which the error
/// models are evaluated; below it the signal has faded out.
pub const AMPLITUDE_GUARD: f64 = 0.05;

/// One reflected ray as seen by the five antennas.
#[derive(Debug, Clone, PartialEq)]
pub struct MultipathPath {
    /// Amplitude relative to the direct signal.
    pub amplitude: f64,
    /// Reflection point for antenna 1 (ECEF).
    pub reflection_point: Vector3<f64>,
    /// Excess path length per antenna, meters.
    pub excess: [f64; NUM_ANTENNAS],
    /// Wrapped carrier phase delay per antenna, radians in (−π, π].
    pub phase_delay: [f64; NUM_ANTENNAS],
    /// Unit direction (local ENU) from antenna 1 toward the reflection point.
    pub arrival: Vector3<f64>,
}

/// Extra distance of the path satellite → `o` → receiver over the direct path.
pub fn excess_path_length(sat: &Vector3<f64>, rx: &Vector3<f64>, o: &Vector3<f64>) -> Result<f64> {
    let so = (sat - o).norm();
    let or = (o - rx).norm();
    let sr = (sat - rx).norm();
    if so < 1e-9 || or < 1e-9 || sr < 1e-9 {
        return Err(Error::DegenerateGeometry("coincident points in excess path".into()));
    }
    Ok((so + or - sr).max(0.0))
}

/// Excess path at every antenna from antenna 1's value and the arrival
/// direction `q`: `δ_r = δ_1 − d_1r·q` with `d_1r = R·offset_r`. The result is
/// indexed by antenna, so element 0 is `delta1` itself.
pub fn propagate_to_antennas(
    delta1: f64,
    q: &Vector3<f64>,
    geometry: &ArrayGeometry,
    attitude: &RotationMatrix,
) -> [f64; NUM_ANTENNAS] {
    std::array::from_fn(|r| delta1 - attitude.rotate(&geometry.body_offset(r)).dot(q))
}

/// `2π·δ/λ` wrapped to (−π, π].
pub fn phase_delay(delta: f64, wavelength: f64) -> f64 {
    wrap_pi(TAU * delta / wavelength)
}

/// `|1 + Σ a·e^{jΔφ}|`.
pub fn composite_amplitude(paths: &[(f64, f64)]) -> f64 {
    let (re, im) = paths
        .iter()
        .fold((1.0, 0.0), |(re, im), &(a, dphi)| (re + a * dphi.cos(), im + a * dphi.sin()));
    re.hypot(im)
}

fn guard(paths: &[(f64, f64)]) -> Result<()> {
    let amp = composite_amplitude(paths);
    if amp < AMPLITUDE_GUARD {
        return Err(Error::DestructiveInterference(amp));
    }
    Ok(())
}

/// Carrier phase error (radians) from `(amplitude, phase delay)` pairs.
pub fn carrier_phase_error(paths: &[(f64, f64)]) -> Result<f64> {
    guard(paths)?;
    let (num, den) = paths.iter().fold((0.0, 1.0), |(n, d), &(a, dphi)| {
        (n + a * dphi.sin(), d + a * dphi.cos())
    });
    Ok(num.atan2(den))
}

/// Pseudorange error (meters) from `(amplitude, excess path, phase delay)` triples.
pub fn pseudorange_error(paths: &[(f64, f64, f64)]) -> Result<f64> {
    let pairs: Vec<(f64, f64)> = paths.iter().map(|&(a, _, p)| (a, p)).collect();
    guard(&pairs)?;
    let (num, den) = paths.iter().fold((0.0, 1.0), |(n, d), &(a, delta, dphi)| {
        (n + a * delta * dphi.sin(), d + a * dphi.cos())
    });
    Ok(num / den)
}
