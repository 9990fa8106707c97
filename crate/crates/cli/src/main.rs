//! `twotone`: simulate two-tone (ω, t)-maps, generate datasets, estimate TLS
//! parameters and compare steady-state predictions.
//!
//! Exit codes: 0 success, 1 invalid input or configuration, 2 file errors,
//! 3 numerical failure (pulse-B calibration, degenerate steady state).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use twotone::io::{
    estimate_report, generate_dataset, read_map, steady_report, write_map, Config, DatasetPlan, IoError, MapFile,
    MANIFEST_FILE,
};
use twotone::protocol::{calibrate_pulse_b, TwoToneExperiment};

#[derive(Debug, Parser)]
#[command(name = "twotone", version, about = "Two-tone TLS spectroscopy on a fixed-frequency transmon")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Calibrate pulse B and write the (ω, t)-map of the configured system.
    Map(Common),
    /// Write a directory of random maps and a JSONL manifest.
    Dataset(Common),
    /// Extract features from a map file and estimate TLS parameters.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Map file to analyse.
        #[arg(long)]
        map: PathBuf,
    },
    /// Compare steady-state transmon populations under a continuous drive.
    Steady(Common),
}

fn require<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, IoError> {
    path.as_deref()
        .ok_or_else(|| IoError::invalid(flag, "this subcommand needs it"))
}

fn load(common: &Common) -> Result<Config, IoError> {
    let mut config = Config::load(require(&common.config, "--config")?)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| IoError::File {
        path: path.to_path_buf(),
        source: e,
    })
}

fn run_map(common: &Common) -> Result<(), IoError> {
    let config = load(common)?;
    let out = require(&common.out, "--out")?;
    let spec = config.system_spec()?;
    let grid = config.grid()?;
    let calibration = calibrate_pulse_b(&spec, &config.probe)?;
    println!(
        "pulse B: {:.6} GHz, {:.0} ns, {:.3} MHz, excited population {:.4}",
        calibration.frequency / 1e9,
        calibration.duration * 1e9,
        calibration.amplitude / 1e6,
        calibration.population
    );
    let start = Instant::now();
    let map = TwoToneExperiment::new(spec, calibration, config.pump.amplitude)?.generate_map(&grid)?;
    println!(
        "map: {} × {} in {:.2} s",
        grid.n_freq(),
        grid.n_time(),
        start.elapsed().as_secs_f64()
    );
    write_map(out, &MapFile::new(map))?;
    println!("wrote {}", out.display());
    Ok(())
}

fn run_dataset(common: &Common) -> Result<(), IoError> {
    let config = load(common)?;
    let out = require(&common.out, "--out")?;
    let plan = DatasetPlan::from_config(&config)?;
    let start = Instant::now();
    let records = generate_dataset(&plan, out, config.seed)?;
    let failed = records.iter().filter(|r| !r.calibration_passed).count();
    println!(
        "{} maps ({} with pulse-B population below {}) in {:.1} s; manifest {}",
        records.len(),
        failed,
        plan.probe.min_population,
        start.elapsed().as_secs_f64(),
        out.join(MANIFEST_FILE).display()
    );
    Ok(())
}

fn run_estimate(common: &Common, map: &Path) -> Result<(), IoError> {
    let settings = match &common.config {
        Some(_) => load(common)?.features,
        None => Default::default(),
    };
    let file = read_map(map)?;
    let report = estimate_report(&file.map, &settings);
    match &common.out {
        Some(out) => {
            write_json(out, &report)?;
            print!("{report}");
        }
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(())
}

fn run_steady(common: &Common) -> Result<(), IoError> {
    let config = load(common)?;
    let spec = config.system_spec()?;
    let steady = config.steady.unwrap_or_default();
    if steady.tls >= spec.tls_count() {
        return Err(IoError::invalid("tls", "the steady-state comparison needs at least one TLS"));
    }
    let report = steady_report(&spec, &steady, config.pump.amplitude)?;
    match &common.out {
        Some(out) => {
            write_json(out, &report)?;
            println!("{report}");
        }
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), IoError> {
    let common = match &cli.command {
        Command::Map(c) | Command::Dataset(c) | Command::Steady(c) => c,
        Command::Estimate { common, .. } => common,
    };
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(IoError::invalid("--threads", "must be >= 1"));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already initialised: {e}");
        }
    }
    match &cli.command {
        Command::Map(c) => run_map(c),
        Command::Dataset(c) => run_dataset(c),
        Command::Estimate { common, map } => run_estimate(common, map),
        Command::Steady(c) => run_steady(c),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
