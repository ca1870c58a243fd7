//! Synthetic array observations: clean geometric ranges, multipath
//! contamination, urban canyon ray geometry and noise.

mod canyon;
mod epoch;
mod multipath;

pub use canyon::{
    reflect_against_canyon, CanyonModel, CanyonPreset, CanyonReflection, Wall, WallReflection,
};
pub use epoch::{
    generate_epoch, ArrayEpoch, Environment, InjectedMultipath, SatObservation, TruthPose,
};
pub use multipath::{
    carrier_phase_error, composite_amplitude, excess_path_length, phase_delay,
    propagate_to_antennas, pseudorange_error, MultipathPath, AMPLITUDE_GUARD,
};

use nalgebra::Vector3;

use crate::error::{Error, Result};

/// Speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// GPS L1 carrier wavelength, m.
pub const GPS_L1_WAVELENGTH: f64 = SPEED_OF_LIGHT / 1_575.42e6;

pub const NUM_ANTENNAS: usize = 5;

/// Rigid five-antenna array: antennas 1-2-3 on the body x axis, 1-4-5 on the
/// body y axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    pub d12: f64,
    pub d23: f64,
    pub d14: f64,
    pub d45: f64,
    pub wavelength: f64,
}

impl Default for ArrayGeometry {
    fn default() -> Self {
        Self { d12: 0.30, d23: 0.39, d14: 0.30, d45: 0.39, wavelength: GPS_L1_WAVELENGTH }
    }
}

impl ArrayGeometry {
    pub fn new(d12: f64, d23: f64, d14: f64, d45: f64, wavelength: f64) -> Result<Self> {
        let g = Self { d12, d23, d14, d45, wavelength };
        g.validate()?;
        Ok(g)
    }

    /// Checks the dual-baseline disambiguation conditions.
    pub fn validate(&self) -> Result<()> {
        let half = self.wavelength / 2.0;
        if !(self.wavelength > 0.0) {
            return Err(Error::InvalidGeometry("wavelength must be positive".into()));
        }
        for (name, d) in [("d12", self.d12), ("d23", self.d23), ("d14", self.d14), ("d45", self.d45)] {
            if !(d > half) {
                return Err(Error::InvalidGeometry(format!("{name} = {d} m must exceed λ/2 = {half:.4} m")));
            }
        }
        for (name, diff) in [("|d12 - d23|", self.d12 - self.d23), ("|d14 - d45|", self.d14 - self.d45)] {
            if diff == 0.0 || diff.abs() > half {
                return Err(Error::InvalidGeometry(format!(
                    "{name} = {:.4} m must lie in (0, λ/2]",
                    diff.abs()
                )));
            }
        }
        Ok(())
    }

    /// Body-frame offset of antenna `r` (0-based) from antenna 1.
    pub fn body_offset(&self, r: usize) -> Vector3<f64> {
        match r {
            0 => Vector3::zeros(),
            1 => Vector3::new(self.d12, 0.0, 0.0),
            2 => Vector3::new(self.d12 + self.d23, 0.0, 0.0),
            3 => Vector3::new(0.0, self.d14, 0.0),
            4 => Vector3::new(0.0, self.d14 + self.d45, 0.0),
            _ => panic!("antenna index {r} out of range"),
        }
    }

    /// Distance from antenna 1 to antenna `r` (0-based).
    pub fn distance_from_first(&self, r: usize) -> f64 {
        self.body_offset(r).norm()
    }
}

/// How a satellite's signal reaches the array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReceptionScenario {
    Los,
    Nlos,
    Multipath,
    Blocked,
}

impl ReceptionScenario {
    /// Truth contamination label.
    pub fn is_contaminated(self) -> bool {
        matches!(self, ReceptionScenario::Nlos | ReceptionScenario::Multipath)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ReceptionScenario::Los => "LOS",
            ReceptionScenario::Nlos => "NLOS",
            ReceptionScenario::Multipath => "Multipath",
            ReceptionScenario::Blocked => "Blocked",
        }
    }
}

/// White Gaussian measurement noise. The phase sigma is in meters and is
/// applied as `sigma_phase / λ` cycles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    pub sigma_pseudorange: f64,
    pub sigma_phase: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { sigma_pseudorange: 0.5, sigma_phase: 0.001 }
    }
}

impl NoiseConfig {
    pub fn zero() -> Self {
        Self { sigma_pseudorange: 0.0, sigma_phase: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_pseudorange >= 0.0) || !(self.sigma_phase >= 0.0) {
            return Err(Error::Config("noise sigmas must be non-negative".into()));
        }
        Ok(())
    }
}
