//! GPS almanac handling: YUMA text parsing and Keplerian propagation of
//! almanac records to ECEF positions.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::frames::EcefPosition;

/// WGS-84 gravitational parameter used by the GPS interface specification.
pub const GM_EARTH: f64 = 3.986_005e14;
/// Earth rotation rate, rad/s.
pub const OMEGA_EARTH: f64 = 7.292_115_146_7e-5;
pub const SECONDS_PER_WEEK: f64 = 604_800.0;

/// GPS week and seconds of week.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpsTime {
    pub week: u32,
    pub tow: f64,
}

impl GpsTime {
    pub fn new(week: u32, tow: f64) -> Result<Self> {
        if !(0.0..SECONDS_PER_WEEK).contains(&tow) {
            return Err(Error::Config(format!("time of week {tow} outside [0, 604800)")));
        }
        Ok(Self { week, tow })
    }

    /// Advances by `dt` seconds, rolling the week as needed.
    pub fn add_seconds(&self, dt: f64) -> Self {
        let total = self.tow + dt;
        let weeks = (total / SECONDS_PER_WEEK).floor();
        Self {
            week: (self.week as i64 + weeks as i64).max(0) as u32,
            tow: total - weeks * SECONDS_PER_WEEK,
        }
    }
}

/// One satellite's almanac entry, angles in radians.
#[derive(Debug, Clone, PartialEq)]
pub struct AlmanacRecord {
    pub prn: u32,
    pub health: u32,
    pub eccentricity: f64,
    pub toa: f64,
    pub inclination: f64,
    pub raan_rate: f64,
    pub sqrt_a: f64,
    pub raan0: f64,
    pub arg_perigee: f64,
    pub mean_anomaly: f64,
    pub af0: f64,
    pub af1: f64,
    pub week: u32,
}

impl AlmanacRecord {
    pub fn is_healthy(&self) -> bool {
        self.health == 0
    }

    pub fn semi_major_axis(&self) -> f64 {
        self.sqrt_a * self.sqrt_a
    }

    pub fn mean_motion(&self) -> f64 {
        (GM_EARTH / self.semi_major_axis().powi(3)).sqrt()
    }

    /// Seconds from the time of applicability to `t`. YUMA files usually carry
    /// the week modulo 1024, so the week difference is taken modulo 1024.
    pub fn time_from_toa(&self, t: &GpsTime) -> f64 {
        let mut dw = (t.week as i64 - self.week as i64).rem_euclid(1024);
        if dw > 512 {
            dw -= 1024;
        }
        dw as f64 * SECONDS_PER_WEEK + t.tow - self.toa
    }
}

/// Solves Kepler's equation `E − e·sin E = M` for the eccentric anomaly.
pub fn kepler_solve(mean_anomaly: f64, e: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&e) || !mean_anomaly.is_finite() {
        return Err(Error::KeplerNonConvergence { mean_anomaly, eccentricity: e });
    }
    // Reduce to (-π, π]; the solution shifts by the same multiple of 2π.
    let turns = ((mean_anomaly + PI) / TAU).floor();
    let m = mean_anomaly - turns * TAU;
    let shift = turns * TAU;

    let f = |x: f64| x - e * x.sin() - m;
    let (mut lo, mut hi) = (m - e, m + e);
    let mut x = if e > 0.8 { m.signum() * PI.min(m.abs() + e) } else { m };
    x = x.clamp(lo, hi);
    for _ in 0..50 {
        let fx = f(x);
        if fx.abs() < 1e-12 {
            return Ok(x + shift);
        }
        if fx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let step = fx / (1.0 - e * x.cos());
        let next = x - step;
        x = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
    }
    let fx = f(x);
    if fx.abs() < 1e-12 {
        return Ok(x + shift);
    }
    Err(Error::KeplerNonConvergence { mean_anomaly, eccentricity: e })
}

/// ECEF position of the satellite described by `rec` at `t`.
pub fn sat_position(rec: &AlmanacRecord, t: &GpsTime) -> Result<EcefPosition> {
    if !(0.0..1.0).contains(&rec.eccentricity) {
        return Err(Error::InvalidRecord {
            prn: rec.prn,
            msg: format!("eccentricity {} outside [0, 1)", rec.eccentricity),
        });
    }
    if rec.sqrt_a <= 0.0 {
        return Err(Error::InvalidRecord { prn: rec.prn, msg: "non-positive sqrt(A)".into() });
    }
    let tk = rec.time_from_toa(t);
    if tk.abs() > 7.0 * 86_400.0 {
        return Err(Error::InvalidRecord {
            prn: rec.prn,
            msg: format!("epoch is {:.1} days from time of applicability", tk / 86_400.0),
        });
    }
    let a = rec.semi_major_axis();
    let e = rec.eccentricity;
    let mk = rec.mean_anomaly + rec.mean_motion() * tk;
    let ek = kepler_solve(mk, e)?;
    let (se, ce) = ek.sin_cos();
    let nu = ((1.0 - e * e).sqrt() * se).atan2(ce - e);
    let phi = nu + rec.arg_perigee;
    let r = a * (1.0 - e * ce);
    let (xp, yp) = (r * phi.cos(), r * phi.sin());
    let omega = rec.raan0 + (rec.raan_rate - OMEGA_EARTH) * tk - OMEGA_EARTH * rec.toa;
    let (so, co) = omega.sin_cos();
    let (si, ci) = rec.inclination.sin_cos();
    Ok(Vector3::new(
        xp * co - yp * ci * so,
        xp * so + yp * ci * co,
        yp * si,
    ))
}

const YUMA_KEYS: [&str; 13] = [
    "id",
    "health",
    "eccentricity",
    "timeofapplicability",
    "orbitalinclination",
    "rateofrightascen",
    "sqrt(a)",
    "rightascenatweek",
    "argumentofperigee",
    "meananom",
    "af0",
    "af1",
    "week",
];

const YUMA_LABELS: [&str; 13] = [
    "ID",
    "Health",
    "Eccentricity",
    "Time of Applicability",
    "Orbital Inclination",
    "Rate of Right Ascen",
    "SQRT(A)",
    "Right Ascen at Week",
    "Argument of Perigee",
    "Mean Anom",
    "Af0",
    "Af1",
    "week",
];

fn normalize_key(raw: &str) -> String {
    raw.chars().filter(|c| !c.is_whitespace()).flat_map(char::to_lowercase).collect()
}

#[derive(Default)]
struct Block {
    start: Option<usize>,
    fields: HashMap<usize, (String, usize)>,
}

impl Block {
    fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    fn finish(self) -> Result<AlmanacRecord> {
        for (k, label) in YUMA_LABELS.iter().enumerate() {
            if !self.fields.contains_key(&k) {
                return Err(Error::Parse {
                    line: self.start.unwrap_or(0),
                    msg: format!("almanac block starting here is missing '{label}'"),
                });
            }
        }
        let float = |k: usize| -> Result<f64> {
            let (v, line) = &self.fields[&k];
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::Parse {
                    line: *line,
                    msg: format!("invalid number '{v}' for '{}'", YUMA_LABELS[k]),
                })
        };
        let int = |k: usize| -> Result<u32> {
            let (v, line) = &self.fields[&k];
            v.parse::<u32>().map_err(|_| Error::Parse {
                line: *line,
                msg: format!("invalid integer '{v}' for '{}'", YUMA_LABELS[k]),
            })
        };
        let rec = AlmanacRecord {
            prn: int(0)?,
            health: int(1)?,
            eccentricity: float(2)?,
            toa: float(3)?,
            inclination: float(4)?,
            raan_rate: float(5)?,
            sqrt_a: float(6)?,
            raan0: float(7)?,
            arg_perigee: float(8)?,
            mean_anomaly: float(9)?,
            af0: float(10)?,
            af1: float(11)?,
            week: int(12)?,
        };
        if !(0.0..1.0).contains(&rec.eccentricity) {
            return Err(Error::Parse {
                line: self.fields[&2].1,
                msg: format!("eccentricity {} outside [0, 1)", rec.eccentricity),
            });
        }
        if rec.sqrt_a <= 0.0 {
            return Err(Error::Parse {
                line: self.fields[&6].1,
                msg: "SQRT(A) must be positive".into(),
            });
        }
        Ok(rec)
    }
}

/// Parses a YUMA almanac. Blocks are separated by blank lines or
/// `*****` header lines; each block carries the 13 standard `KEY: value`
/// lines in any order. Line numbers in errors are 1-based.
pub fn parse_yuma(text: &str) -> Result<Vec<AlmanacRecord>> {
    let mut out = Vec::new();
    let mut block = Block::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('*') {
            if !block.is_empty() {
                out.push(std::mem::take(&mut block).finish()?);
            }
            if line.starts_with('*') {
                block.start = Some(line_no);
            } else if block.is_empty() {
                block.start = None;
            }
            continue;
        }
        let Some((key, value)) = line.split_once(':') else {
            return Err(Error::Parse { line: line_no, msg: format!("expected 'KEY: value', got '{line}'") });
        };
        let norm = normalize_key(key);
        let Some(k) = YUMA_KEYS.iter().position(|p| norm.starts_with(p)) else {
            return Err(Error::Parse { line: line_no, msg: format!("unrecognized key '{}'", key.trim()) });
        };
        block.start.get_or_insert(line_no);
        if block.fields.insert(k, (value.trim().to_string(), line_no)).is_some() {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("duplicate '{}' in block", YUMA_LABELS[k]),
            });
        }
    }
    if !block.is_empty() {
        out.push(block.finish()?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const FIXTURE: &str = include_str!("../fixtures/almanac.yuma.txt");

    fn toy(e: f64, i: f64) -> AlmanacRecord {
        AlmanacRecord {
            prn: 99,
            health: 0,
            eccentricity: e,
            toa: 0.0,
            inclination: i,
            raan_rate: 0.0,
            sqrt_a: 5153.6,
            raan0: 0.3,
            arg_perigee: 0.7,
            mean_anomaly: -1.2,
            af0: 0.0,
            af1: 0.0,
            week: 100,
        }
    }

    #[test]
    fn empty_input_yields_no_records() {
        assert!(parse_yuma("").unwrap().is_empty());
        assert!(parse_yuma("\n\n   \n").unwrap().is_empty());
    }

    #[test]
    fn fixture_parses_31_records() {
        let recs = parse_yuma(FIXTURE).unwrap();
        assert_eq!(recs.len(), 31);
        let prns: Vec<u32> = recs.iter().map(|r| r.prn).collect();
        let want: Vec<u32> = (1..=32).filter(|&p| p != 20).collect();
        assert_eq!(prns, want);
        let first = &recs[0];
        assert_eq!(first.health, 0);
        assert_eq!(first.eccentricity, 1.5108531973e-2);
        assert_eq!(first.toa, 589824.0);
        assert_eq!(first.inclination, 0.9825375187);
        assert_eq!(first.raan_rate, -8.0453123107e-9);
        assert_eq!(first.sqrt_a, 5153.728492);
        assert_eq!(first.raan0, -2.7726413293);
        assert_eq!(first.arg_perigee, 2.365902685);
        assert_eq!(first.mean_anomaly, -2.3472795356);
        assert_eq!(first.week, 337);
        // PRN 27 is flagged unhealthy and retained.
        let p27 = recs.iter().find(|r| r.prn == 27).unwrap();
        assert_eq!(p27.health, 63);
        assert!(!p27.is_healthy());
    }

    #[test]
    fn missing_key_names_the_block() {
        let block: String = FIXTURE
            .lines()
            .take(15)
            .filter(|l| !l.starts_with("Eccentricity"))
            .collect::<Vec<_>>()
            .join("\n");
        match parse_yuma(&block) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 1);
                assert!(msg.contains("Eccentricity"), "{msg}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncated_block_is_an_error() {
        let truncated: String = FIXTURE.lines().take(20).collect::<Vec<_>>().join("\n");
        assert!(matches!(parse_yuma(&truncated), Err(Error::Parse { .. })));
    }

    #[test]
    fn malformed_number_reports_line() {
        let bad = FIXTURE.replacen("5153.728492", "51x3.7", 1);
        match parse_yuma(&bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 8),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn spacing_around_colon_tolerated() {
        let spaced = FIXTURE.replace("ID:", "ID   :   ").replace("week:", "week :");
        assert_eq!(parse_yuma(&spaced).unwrap().len(), 31);
    }

    #[test]
    fn kepler_examples() {
        assert_eq!(kepler_solve(1.234, 0.0).unwrap(), 1.234);
        assert_eq!(kepler_solve(0.0, 0.7).unwrap(), 0.0);
        let e = kepler_solve(1.0, 0.1).unwrap();
        assert!((e - 0.1 * e.sin() - 1.0).abs() < 1e-12);
        // bisection oracle, 10^6 halvings capped by floating resolution
        let (mut lo, mut hi) = (0.0f64, 2.0f64);
        for _ in 0..1_000_000 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if mid - 0.1 * mid.sin() - 1.0 > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert!((e - lo).abs() < 1e-12);
    }

    #[test]
    fn kepler_rejects_hyperbolic() {
        assert!(kepler_solve(1.0, 1.0).is_err());
    }

    #[test]
    fn equatorial_circular_orbit() {
        let rec = toy(0.0, 0.0);
        let a = rec.semi_major_axis();
        for k in 0..50 {
            let t = GpsTime { week: 100, tow: k as f64 * 3000.0 };
            let p = sat_position(&rec, &t).unwrap();
            assert!(p.z.abs() < 1e-6);
            assert!((p.norm() - a).abs() < 1e-6);
        }
    }

    #[test]
    fn hyperbolic_record_rejected() {
        let rec = toy(1.0, 0.5);
        let t = GpsTime { week: 100, tow: 10.0 };
        assert!(matches!(sat_position(&rec, &t), Err(Error::InvalidRecord { .. })));
    }

    #[test]
    fn radius_within_apsides_and_periodic() {
        for rec in parse_yuma(FIXTURE).unwrap() {
            let a = rec.semi_major_axis();
            let e = rec.eccentricity;
            let n = rec.mean_motion();
            let period = TAU / n;
            for k in 0..24 {
                let t = GpsTime { week: rec.week, tow: rec.toa - 43_200.0 + k as f64 * 3_600.0 };
                let p = sat_position(&rec, &t).unwrap();
                assert!(p.norm() >= a * (1.0 - e) - 1e-3 && p.norm() <= a * (1.0 + e) + 1e-3);
            }
            // Periodicity holds in the inertial frame; undo Earth rotation.
            let t0 = GpsTime { week: rec.week, tow: rec.toa - 20_000.0 };
            let t1 = GpsTime { week: rec.week, tow: t0.tow + period };
            let p0 = sat_position(&rec, &t0).unwrap();
            let p1 = sat_position(&rec, &t1).unwrap();
            let turn = (rec.raan_rate - OMEGA_EARTH) * period;
            let undo = nalgebra::Rotation3::from_axis_angle(&Vector3::z_axis(), -turn);
            assert!((undo * p1 - p0).norm() < 10.0);
        }
    }

    #[test]
    fn gps_time_rollover() {
        let t = GpsTime::new(10, 604_790.0).unwrap().add_seconds(20.0);
        assert_eq!(t.week, 11);
        assert!((t.tow - 10.0).abs() < 1e-9);
        assert!(GpsTime::new(1, 604_800.0).is_err());
    }

    proptest! {
        #[test]
        fn parser_is_total(s in "\\PC{0,400}") {
            let _ = parse_yuma(&s);
        }

        #[test]
        fn parser_total_on_mangled_fixture(cut in 0usize..3000, junk in "[a-zA-Z0-9:.*\\- \n]{0,40}") {
            let cut = cut.min(FIXTURE.len());
            let mut s = FIXTURE[..cut].to_string();
            s.push_str(&junk);
            let _ = parse_yuma(&s);
        }

        #[test]
        fn kepler_residual(m in -20.0f64..20.0, e in 0.0f64..0.99) {
            let ecc = kepler_solve(m, e).unwrap();
            prop_assert!((ecc - e * ecc.sin() - m).abs() < 1e-11);
        }
    }
}
