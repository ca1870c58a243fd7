//! KITTI raw OXTS packets: `oxts/data/NNNNNNNNNN.txt` with one line of 30
//! space-separated values each, plus `oxts/timestamps.txt`.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use nalgebra::Vector3;

use super::{finish_stream, TrajectorySample};
use crate::error::{Error, Result};
use crate::frames::GeodeticPosition;
use crate::so3::EulerRpy;
use crate::ukf::ImuSample;

pub const OXTS_FIELDS: usize = 30;

// Field positions in a packet, per the KITTI raw-data readme.
const LAT: usize = 0; // deg
const LON: usize = 1; // deg
const ALT: usize = 2; // m
const ROLL: usize = 3; // rad
const PITCH: usize = 4;
const YAW: usize = 5; // rad, 0 = east, counter-clockwise
const VN: usize = 6;
const VE: usize = 7;
const VU: usize = 10;
const AX: usize = 11; // body x forward, m/s²
const WX: usize = 17; // body rates, rad/s

fn parse_record(text: &str, line: usize) -> Result<TrajectorySample> {
    let fields: Vec<&str> = text.split_whitespace().collect();
    if fields.len() != OXTS_FIELDS {
        return Err(Error::Parse { line, msg: format!("expected {OXTS_FIELDS} fields, found {}", fields.len()) });
    }
    let mut v = [0.0; OXTS_FIELDS];
    for (i, f) in fields.iter().enumerate() {
        v[i] = f
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| Error::Parse { line, msg: format!("field {i} is not a finite number: '{f}'") })?;
    }
    Ok(TrajectorySample {
        t: 0.0,
        position: GeodeticPosition::from_degrees(v[LAT], v[LON], v[ALT]),
        attitude: EulerRpy::new(v[ROLL], v[PITCH], v[YAW]),
        velocity: Vector3::new(v[VE], v[VN], v[VU]),
        imu: ImuSample {
            gyro: Vector3::new(v[WX], v[WX + 1], v[WX + 2]),
            accel: Vector3::new(v[AX], v[AX + 1], v[AX + 2]),
            dt: 0.0,
        },
    })
}

/// Absolute time in nanoseconds. Accepts `YYYY-MM-DD HH:MM:SS.fffffffff` or a
/// bare number of seconds.
pub fn parse_oxts_timestamp(text: &str, line: usize) -> Result<i128> {
    let s = text.trim();
    if let Ok(dt) = NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S%.f") {
        let utc = dt.and_utc();
        return Ok(utc.timestamp() as i128 * 1_000_000_000 + utc.timestamp_subsec_nanos() as i128);
    }
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok((x * 1e9).round() as i128),
        _ => Err(Error::Parse { line, msg: format!("bad timestamp '{s}'") }),
    }
}

/// Parses packets and their timestamps, already in order. Errors name the
/// 1-based record index.
pub fn parse_oxts_records<R: AsRef<str>, T: AsRef<str>>(records: &[R], timestamps: &[T]) -> Result<Vec<TrajectorySample>> {
    if records.is_empty() {
        return Err(Error::EmptyStream("no OXTS records".into()));
    }
    if records.len() != timestamps.len() {
        return Err(Error::Schema(format!("{} OXTS records but {} timestamps", records.len(), timestamps.len())));
    }
    let t0 = parse_oxts_timestamp(timestamps[0].as_ref(), 1)?;
    let mut out = Vec::with_capacity(records.len());
    for (k, (rec, ts)) in records.iter().zip(timestamps).enumerate() {
        let mut s = parse_record(rec.as_ref(), k + 1)?;
        s.t = (parse_oxts_timestamp(ts.as_ref(), k + 1)? - t0) as f64 * 1e-9;
        out.push(s);
    }
    finish_stream(&mut out)?;
    Ok(out)
}

fn read_text(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    String::from_utf8(bytes).map_err(|_| Error::Parse { line: 0, msg: format!("{} is not UTF-8", path.display()) })
}

/// Reads a drive directory. `dir` may be the drive itself (containing
/// `oxts/`) or the `oxts` directory.
pub fn parse_oxts(dir: &Path) -> Result<Vec<TrajectorySample>> {
    let root = if dir.join("oxts").is_dir() { dir.join("oxts") } else { dir.to_path_buf() };
    let data = root.join("data");
    let mut files: Vec<PathBuf> = match fs::read_dir(&data) {
        Ok(rd) => rd
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "txt"))
            .collect(),
        Err(_) => Vec::new(),
    };
    if files.is_empty() {
        return Err(Error::EmptyStream(format!("no packets under {}", data.display())));
    }
    files.sort();
    let records = files.iter().map(|p| read_text(p)).collect::<Result<Vec<_>>>()?;
    let stamps: Vec<String> = read_text(&root.join("timestamps.txt"))?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(str::to_owned)
        .collect();
    let records: Vec<&str> = records.iter().map(|r| r.lines().find(|l| !l.trim().is_empty()).unwrap_or("")).collect();
    parse_oxts_records(&records, &stamps).map_err(|e| match e {
        Error::Parse { line, msg } if line >= 1 && line <= files.len() => {
            Error::Parse { line, msg: format!("{}: {msg}", files[line - 1].display()) }
        }
        other => other,
    })
}
