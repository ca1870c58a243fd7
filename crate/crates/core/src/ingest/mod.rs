//! Ground-truth trajectories with inertial data: KITTI OXTS packets, a plain
//! CSV schema, finite-difference IMU synthesis and a built-in drive.

mod csv_io;
mod oxts;
mod synth;

pub use csv_io::{parse_trajectory_csv, read_trajectory_csv, write_trajectory_csv, TRAJECTORY_COLUMNS};
pub use oxts::{parse_oxts, parse_oxts_records, parse_oxts_timestamp, OXTS_FIELDS};
pub use synth::{builtin_trajectory, synth_imu_from_truth, ImuBias, BUILTIN_ORIGIN};

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::frames::{ecef_to_enu, geodetic_to_ecef, GeodeticPosition};
use crate::so3::{rpy_to_so3, EulerRpy, RotationMatrix};
use crate::ukf::ImuSample;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    /// Seconds from the start of the stream.
    pub t: f64,
    pub position: GeodeticPosition,
    pub attitude: EulerRpy,
    /// ENU velocity, m/s.
    pub velocity: Vector3<f64>,
    /// Body-frame inertial reading; `dt` is the interval to the next sample
    /// (the last sample repeats the previous interval).
    pub imu: ImuSample,
}

impl TrajectorySample {
    pub fn rotation(&self) -> RotationMatrix {
        rpy_to_so3(&self.attitude)
    }
}

/// Fills `imu.dt` from the timestamps and rejects non-increasing time.
pub(crate) fn finish_stream(samples: &mut [TrajectorySample]) -> Result<()> {
    for k in 1..samples.len() {
        if !(samples[k].t > samples[k - 1].t) {
            return Err(Error::Ordering(k));
        }
    }
    let n = samples.len();
    for k in 0..n {
        samples[k].imu.dt = match (k + 1 < n, k > 0) {
            (true, _) => samples[k + 1].t - samples[k].t,
            (false, true) => samples[k].t - samples[k - 1].t,
            (false, false) => 0.0,
        };
    }
    Ok(())
}

/// ENU positions relative to the first sample.
pub fn local_positions(samples: &[TrajectorySample]) -> Vec<Vector3<f64>> {
    let Some(first) = samples.first() else { return Vec::new() };
    samples.iter().map(|s| ecef_to_enu(&geodetic_to_ecef(&s.position), &first.position)).collect()
}
