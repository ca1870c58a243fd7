use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use arraymp::experiment::{
    inspect_almanac, run_drive_sim, run_static_bench, CanyonChoice, DetectorChoice, RunConfig, TrajectoryKind,
    BUNDLED_ALMANAC,
};
use arraymp::{Error, Result};

/// GNSS antenna-array multipath detection experiments.
#[derive(Parser, Debug)]
#[command(name = "arraymp", version)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for output CSVs (created if missing).
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte-Carlo detection benchmark with a static array.
    StaticBench {
        #[arg(long)]
        trials: Option<usize>,
        /// ransac, dbscan, none or both.
        #[arg(long)]
        detector: Option<DetectorChoice>,
    },
    /// Moving vehicle through a simulated street canyon.
    DriveSim {
        /// open, suburban, urban or custom.
        #[arg(long, value_parser = parse_canyon)]
        canyon: Option<CanyonChoice>,
        /// builtin, csv or oxts.
        #[arg(long, value_parser = parse_trajectory)]
        trajectory: Option<TrajectoryKind>,
        /// Trajectory CSV file or KITTI drive directory.
        #[arg(long)]
        path: Option<PathBuf>,
    },
    /// Print the records of a YUMA almanac.
    InspectAlmanac {
        /// Almanac file; the configured or bundled almanac when omitted.
        path: Option<PathBuf>,
    },
}

fn parse_canyon(s: &str) -> std::result::Result<CanyonChoice, String> {
    match s {
        "open" => Ok(CanyonChoice::Open),
        "suburban" => Ok(CanyonChoice::Suburban),
        "urban" => Ok(CanyonChoice::Urban),
        "custom" => Ok(CanyonChoice::Custom),
        _ => Err(format!("unknown canyon '{s}'")),
    }
}

fn parse_trajectory(s: &str) -> std::result::Result<TrajectoryKind, String> {
    match s {
        "builtin" => Ok(TrajectoryKind::Builtin),
        "csv" => Ok(TrajectoryKind::Csv),
        "oxts" => Ok(TrajectoryKind::Oxts),
        _ => Err(format!("unknown trajectory source '{s}'")),
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(BufWriter::new(f))
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    match cli.command {
        Command::InspectAlmanac { path } => {
            let text = match path.or(cfg.almanac.clone()) {
                Some(p) => fs::read_to_string(&p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
                None => BUNDLED_ALMANAC.to_string(),
            };
            print!("{}", inspect_almanac(&text)?);
        }
        Command::StaticBench { trials, detector } => {
            if let Some(t) = trials {
                cfg.static_bench.trials = t;
            }
            if let Some(d) = detector {
                cfg.detector.kind = d;
            }
            let report = run_static_bench(&cfg)?;
            fs::create_dir_all(&cli.out_dir)?;
            report.write_csv(create(&cli.out_dir, "static_bench.csv")?)?;
            for r in &report.rows {
                println!(
                    "sigma_phase={}mm n_mp={} {:<6} success={:.3} FN={:.3} FP={:.3} MAE={:.3}° (all sats {:.3}°)",
                    r.sigma_phase_mm,
                    r.n_mp,
                    r.detector.as_str(),
                    r.metrics.success_rate,
                    r.metrics.false_negative_rate,
                    r.metrics.false_positive_rate,
                    r.metrics.baseline_mae_deg,
                    r.no_exclusion_mae_deg
                );
            }
        }
        Command::DriveSim { canyon, trajectory, path } => {
            if let Some(c) = canyon {
                cfg.drive.canyon = c;
            }
            if let Some(t) = trajectory {
                cfg.drive.trajectory = t;
            }
            if path.is_some() {
                cfg.drive.path = path;
            }
            let report = run_drive_sim(&cfg)?;
            fs::create_dir_all(&cli.out_dir)?;
            report.write_trajectory_csv(create(&cli.out_dir, "drive_trajectory.csv")?)?;
            report.write_summary_csv(create(&cli.out_dir, "drive_summary.csv")?)?;
            let s = &report.summary;
            println!("epochs: {}", s.epochs);
            println!(
                "position MSE [m²]: gnss-all {:.3}, gnss+imu-all {:.3}, proposed {:.3}",
                s.position_mse_gnss_all, s.position_mse_gnss_imu_all, s.position_mse_proposed
            );
            println!("attitude MAE [deg]: gnss+imu-all {:.3}, proposed {:.3}", s.attitude_mae_gnss_imu_all_deg, s.attitude_mae_proposed_deg);
            println!("success rate: {:.3} over {} epochs", s.success_rate, s.detection_epochs);
            println!("propagation-only epochs: {}", s.propagation_only_epochs);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
