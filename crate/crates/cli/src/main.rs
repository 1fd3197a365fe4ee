//! `stickpose` command-line pipeline.
//!
//! Exit codes: 0 success, 1 I/O or input error, 2 configuration error,
//! 3 numerical failure, 4 acceptance thresholds not met (`report`).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stickpose::pipeline::{self, fan_out, PipelineConfig, RunLayout};
use stickpose::Error;

#[derive(Parser, Debug)]
#[command(
    name = "stickpose",
    version,
    about = "Camera-stick tracking simulation, calibration and fusion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML configuration; defaults to the run's resolved scene config, then built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Scene seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Run directory.
    #[arg(long, global = true, default_value = "run")]
    out: PathBuf,

    /// Monte-Carlo fan-out: run seeds seed..seed+N in `seed_<n>` subdirectories.
    #[arg(long, global = true, default_value_t = 1)]
    seeds: usize,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq)]
enum Command {
    /// Generate ground truth, noisy controller streams and target observations.
    Simulate,
    /// Hand-eye calibration of both controllers from the calibration stations.
    Calibrate,
    /// Fuse both propagated camera streams with the UKF.
    Fuse,
    /// Stability, calibration and accuracy reports plus CSV series.
    Evaluate,
    /// Aggregate reports and check them against the configured thresholds.
    Report,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        e if e.is_numerical() => 3,
        _ => 1,
    }
}

fn load_config(cli: &Cli, run_dir: &Path) -> Result<PipelineConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => {
            let resolved = RunLayout::new(run_dir, &Default::default()).config();
            if cli.command != Command::Simulate && resolved.exists() {
                PipelineConfig::load(&resolved)?
            } else {
                PipelineConfig::default()
            }
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

/// Directory whose resolved config supplies the thresholds for `report`.
fn report_probe(out: &Path) -> PathBuf {
    let has_config = |d: &Path| RunLayout::new(d, &Default::default()).config().exists();
    if has_config(out) {
        return out.to_path_buf();
    }
    let mut seeds: Vec<(u64, PathBuf)> = std::fs::read_dir(out)
        .into_iter()
        .flatten()
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().to_string_lossy().into_owned();
            name.strip_prefix("seed_")?.parse().ok().map(|s| (s, e.path()))
        })
        .filter(|(_, p)| has_config(p))
        .collect();
    seeds.sort();
    seeds
        .into_iter()
        .next()
        .map(|(_, p)| p)
        .unwrap_or_else(|| out.to_path_buf())
}

fn stage(cli: &Cli, cfg: &PipelineConfig, out: &Path) -> Result<String, Error> {
    Ok(match cli.command {
        Command::Simulate => {
            pipeline::simulate(cfg, out)?;
            format!(
                "scene written to {}",
                RunLayout::new(out, &cfg.paths).scene_dir().display()
            )
        }
        Command::Calibrate => {
            let r = pipeline::calibrate(cfg, out)?;
            let mut line = String::from("calibration written");
            for (name, c) in [("controller1", &r.controller1), ("controller2", &r.controller2)] {
                if let Some(i) = &c.improvement {
                    line.push_str(&format!(
                        "\n  {name}: raw {:.2} mm / {:.2} deg, refined {:.2} mm / {:.2} deg",
                        i.raw_error.mm, i.raw_error.deg, i.refined_error.mm, i.refined_error.deg
                    ));
                }
            }
            line
        }
        Command::Fuse => {
            let f = pipeline::fuse(cfg, out)?;
            format!("fused {} samples", f.trajectory.len())
        }
        Command::Evaluate => {
            let r = pipeline::evaluate(cfg, out)?;
            let mut line = format!(
                "controllers: max {:.2} mm / {:.2} deg, std {:.2} mm / {:.2} deg",
                r.controller_stability.max_deviation.mm,
                r.controller_stability.max_deviation.deg,
                r.controller_stability.std_deviation.mm,
                r.controller_stability.std_deviation.deg
            );
            if let Some(a) = &r.accuracy {
                line.push_str(&format!(
                    "\n  camera1 {:.2} mm, camera2 {:.2} mm, fused {:.2} mm / {:.2} deg",
                    a.camera1.stats.mean.mm, a.camera2.stats.mean.mm, a.fused.stats.mean.mm, a.fused.stats.mean.deg
                ));
            }
            line
        }
        Command::Report => unreachable!("report aggregates across seeds"),
    })
}

fn execute(cli: &Cli) -> Result<bool, Error> {
    if cli.seeds == 0 {
        return Err(Error::Config("--seeds must be >= 1".into()));
    }
    if cli.command == Command::Report {
        let cfg = load_config(cli, &report_probe(&cli.out))?;
        let summary = pipeline::report(&cfg, &cli.out)?;
        print!("{}", summary.to_text());
        return Ok(summary.pass);
    }
    if cli.seeds == 1 {
        let cfg = load_config(cli, &cli.out)?;
        println!("{}", stage(cli, &cfg, &cli.out)?);
        return Ok(true);
    }
    let base = load_config(cli, &cli.out)?;
    let lines = fan_out(&base, &cli.out, cli.seeds, |cfg, dir| {
        let mut per_seed = load_config(cli, dir)?;
        per_seed.seed = cfg.seed;
        stage(cli, &per_seed, dir).map(|l| format!("seed {}: {l}", cfg.seed))
    })?;
    for l in lines {
        println!("{l}");
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(4),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
