//! Trajectory CSV: header `t,lat,lon,alt,roll,pitch,yaw,vn,ve,vu,ax,ay,az,wx,wy,wz`,
//! angles (including latitude and longitude) in radians.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::Vector3;

use super::{finish_stream, TrajectorySample};
use crate::error::{Error, Result};
use crate::frames::GeodeticPosition;
use crate::so3::EulerRpy;
use crate::ukf::ImuSample;

pub const TRAJECTORY_COLUMNS: [&str; 16] =
    ["t", "lat", "lon", "alt", "roll", "pitch", "yaw", "vn", "ve", "vu", "ax", "ay", "az", "wx", "wy", "wz"];

pub fn parse_trajectory_csv<R: Read>(input: R) -> Result<Vec<TrajectorySample>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = rdr.headers().map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?.clone();
    let mut col = [0usize; 16];
    for (k, name) in TRAJECTORY_COLUMNS.iter().enumerate() {
        col[k] = header
            .iter()
            .position(|h| h == *name)
            .ok_or_else(|| Error::Schema(format!("missing column '{name}'")))?;
    }
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let line = row + 2;
        let rec = rec.map_err(|e| Error::Parse { line, msg: e.to_string() })?;
        let mut v = [0.0; 16];
        for k in 0..16 {
            let raw = rec.get(col[k]).unwrap_or("");
            v[k] = raw
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::Parse { line, msg: format!("column '{}': bad value '{raw}'", TRAJECTORY_COLUMNS[k]) })?;
        }
        out.push(TrajectorySample {
            t: v[0],
            position: GeodeticPosition::new(v[1], v[2], v[3]),
            attitude: EulerRpy::new(v[4], v[5], v[6]),
            velocity: Vector3::new(v[8], v[7], v[9]),
            imu: ImuSample { accel: Vector3::new(v[10], v[11], v[12]), gyro: Vector3::new(v[13], v[14], v[15]), dt: 0.0 },
        });
    }
    if out.is_empty() {
        return Err(Error::EmptyStream("trajectory CSV has no rows".into()));
    }
    finish_stream(&mut out)?;
    Ok(out)
}

pub fn read_trajectory_csv(path: &Path) -> Result<Vec<TrajectorySample>> {
    let f = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_trajectory_csv(f)
}

/// Writes the CSV with shortest round-trip float formatting.
pub fn write_trajectory_csv<W: Write>(out: W, samples: &[TrajectorySample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(TRAJECTORY_COLUMNS).map_err(io)?;
    for s in samples {
        let v = [
            s.t,
            s.position.lat,
            s.position.lon,
            s.position.height,
            s.attitude.roll,
            s.attitude.pitch,
            s.attitude.yaw,
            s.velocity.y,
            s.velocity.x,
            s.velocity.z,
            s.imu.accel.x,
            s.imu.accel.y,
            s.imu.accel.z,
            s.imu.gyro.x,
            s.imu.gyro.y,
            s.imu.gyro.z,
        ];
        w.write_record(v.iter().map(|x| x.to_string())).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
