//! Experiment runners behind the command-line tool: the static detection
//! benchmark, the moving-vehicle simulation and almanac inspection.

mod config;
mod drive;
mod static_bench;

pub use config::{
    CanyonChoice, DetectorChoice, DetectorKind, DetectorSection, DriveConfig, ImuSource, NoiseSection, RunConfig,
    SiteConfig, StaticBenchConfig, TrajectoryKind, BUNDLED_ALMANAC,
};
pub use drive::{run_drive_sim, DriveEpoch, DriveReport, DriveSummary, EpochMode, DRIVE_SUMMARY_COLUMNS, DRIVE_TRAJECTORY_COLUMNS};
pub use static_bench::{run_static_bench, StaticBenchReport, StaticRow, TrialOutcome, STATIC_COLUMNS};

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::constellation::{parse_yuma, sat_position, AlmanacRecord, GpsTime};
use crate::error::Result;
use crate::frames::{los_and_angles, EcefPosition, GeodeticPosition};

/// Healthy satellites above `cutoff` at `site`, highest first, as
/// `(prn, position, elevation)`.
pub fn visible_satellites(
    almanac: &[AlmanacRecord],
    t: &GpsTime,
    site: &GeodeticPosition,
    cutoff: f64,
) -> Result<Vec<(u32, EcefPosition, f64)>> {
    let mut sats = Vec::new();
    for rec in almanac.iter().filter(|r| r.is_healthy()) {
        sats.push((rec.prn, sat_position(rec, t)?));
    }
    if sats.is_empty() {
        return Ok(Vec::new());
    }
    let pos: Vec<EcefPosition> = sats.iter().map(|s| s.1).collect();
    let angles = los_and_angles(&pos, site)?;
    let mut out: Vec<(u32, EcefPosition, f64)> = sats
        .into_iter()
        .zip(angles.elevations)
        .filter(|(_, el)| *el >= cutoff)
        .map(|((prn, p), el)| (prn, p, el))
        .collect();
    out.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
    Ok(out)
}

/// Positions of every healthy satellite at `t`.
pub(crate) fn healthy_positions(almanac: &[AlmanacRecord], t: &GpsTime) -> Result<Vec<(u32, EcefPosition)>> {
    almanac.iter().filter(|r| r.is_healthy()).map(|r| Ok((r.prn, sat_position(r, t)?))).collect()
}

/// Independent generator for item `index` of stream `stream`.
pub(crate) fn stream_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((stream << 32) ^ index);
    rng
}

/// Table of PRN, health, orbit radius and inclination per almanac record.
pub fn inspect_almanac(text: &str) -> Result<String> {
    let recs = parse_yuma(text)?;
    let mut out = String::new();
    if recs.is_empty() {
        out.push_str("0 records\n");
        return Ok(out);
    }
    writeln!(out, "{:>4}  {:>6}  {:>12}  {:>15}", "PRN", "health", "radius_km", "inclination_deg").unwrap();
    for r in &recs {
        writeln!(
            out,
            "{:>4}  {:>6}  {:>12.3}  {:>15.4}",
            r.prn,
            r.health,
            r.semi_major_axis() / 1e3,
            r.inclination.to_degrees()
        )
        .unwrap();
    }
    writeln!(out, "{} records", recs.len()).unwrap();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_almanac_table() {
        let table = inspect_almanac(BUNDLED_ALMANAC).unwrap();
        let rows = table.lines().filter(|l| l.trim_start().chars().next().is_some_and(|c| c.is_ascii_digit())).count();
        // 31 record rows plus the count line
        assert_eq!(rows, 32);
        assert!(table.ends_with("31 records\n"));
        assert_eq!(inspect_almanac("").unwrap(), "0 records\n");
        assert!(inspect_almanac("ID: x\n").is_err());
    }

    #[test]
    fn default_site_has_enough_satellites() {
        let cfg = RunConfig::default();
        let alm = cfg.load_almanac().unwrap();
        let vis = visible_satellites(&alm, &cfg.start_time().unwrap(), &cfg.site(), cfg.cutoff()).unwrap();
        assert!(vis.len() >= 7, "{}", vis.len());
        assert!(vis.windows(2).all(|w| w[0].2 >= w[1].2));
    }
}
