//! Seeded random map datasets.
//!
//! Map `i` draws its TLS parameters from a ChaCha8 generator seeded with
//! `seed` on stream `i`, so the output does not depend on scheduling. Each
//! map is written to its own file and described by one JSON line of the
//! manifest.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Config, DatasetConfig};
use super::mapfile::{write_map, GeneratorInfo, MapFile};
use super::IoError;
use crate::model::{SystemSpec, TlsParams, TransmonParams};
use crate::protocol::{calibrate_pulse_b_best_effort, CalibrationSettings, MapGrid, TwoToneExperiment};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
/// Generator identification stored with every map and manifest record.
pub const PRNG_NAME: &str = "ChaCha8Rng(seed_from_u64(seed), stream = index)";

// Rejection sampling gives up after this many draws of one TLS.
const MAX_DRAWS: usize = 10_000;

/// Ground truth of one TLS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TlsLabel {
    /// Hz.
    pub frequency: f64,
    /// Hz.
    pub coupling: f64,
    /// s.
    pub t1: f64,
    /// s.
    pub t_phi: f64,
}

impl TlsLabel {
    pub fn params(&self) -> TlsParams {
        TlsParams::new(self.frequency, self.coupling).with_times(self.t1, self.t_phi)
    }
}

/// One manifest line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRecord {
    /// Map file name relative to the manifest.
    pub file: String,
    /// Labels sorted by ascending frequency.
    pub tls: Vec<TlsLabel>,
    pub seed: u64,
    pub index: u64,
    pub prng: String,
    /// Pulse-B frequency used for the map (Hz).
    pub calibration_frequency: f64,
    pub calibration_population: f64,
    /// Whether the calibration reached the configured population threshold.
    pub calibration_passed: bool,
}

/// Draws `config.n_tls` TLSs for map `index`, sorted by frequency.
pub fn sample_tls(config: &DatasetConfig, qubit_frequency: f64, seed: u64, index: u64) -> Result<Vec<TlsLabel>, IoError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut draw = |[lo, hi]: [f64; 2]| if lo == hi { lo } else { rng.gen_range(lo..hi) };
    let mut labels = Vec::with_capacity(config.n_tls);
    for _ in 0..config.n_tls {
        let mut accepted = None;
        for _ in 0..MAX_DRAWS {
            let label = TlsLabel {
                frequency: draw(config.frequency),
                coupling: draw(config.coupling),
                t1: draw(config.t1),
                t_phi: draw(config.t_phi),
            };
            let detuning = (qubit_frequency - label.frequency).abs();
            let ok = match config.max_coupling_ratio {
                Some(r) => label.coupling <= r * detuning,
                None => detuning > 0.0,
            };
            if ok {
                accepted = Some(label);
                break;
            }
        }
        labels.push(accepted.ok_or_else(|| {
            IoError::invalid(
                "dataset.max_coupling_ratio",
                format!("no admissible TLS in {MAX_DRAWS} draws"),
            )
        })?);
    }
    labels.sort_by(|a, b| a.frequency.total_cmp(&b.frequency));
    Ok(labels)
}

fn file_name(index: usize, n_maps: usize) -> String {
    let width = n_maps.saturating_sub(1).to_string().len().max(5);
    format!("map_{index:0width$}.wtmap")
}

/// Everything shared by the maps of one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetPlan {
    pub dataset: DatasetConfig,
    pub transmon: TransmonParams,
    pub grid: MapGrid,
    pub probe: CalibrationSettings,
    pub pump_amplitude: f64,
}

impl DatasetPlan {
    /// Requires a `[dataset]` table; TLSs listed in the config are ignored.
    pub fn from_config(config: &Config) -> Result<Self, IoError> {
        let dataset = config
            .dataset
            .ok_or_else(|| IoError::invalid("dataset", "the config has no [dataset] table"))?;
        Ok(Self {
            dataset,
            transmon: config.system_spec()?.transmon,
            grid: config.grid()?,
            probe: config.probe,
            pump_amplitude: config.pump.amplitude,
        })
    }
}

fn generate_one(plan: &DatasetPlan, dir: &Path, seed: u64, index: usize) -> Result<DatasetRecord, IoError> {
    let DatasetPlan {
        dataset: config,
        transmon,
        grid,
        probe,
        pump_amplitude,
    } = plan;
    let pump_amplitude = *pump_amplitude;
    let labels = sample_tls(config, transmon.frequency, seed, index as u64)?;
    let spec = SystemSpec::new(*transmon, labels.iter().map(TlsLabel::params).collect());
    let (calibration, passed) = calibrate_pulse_b_best_effort(&spec, probe)?;
    if !passed {
        log::warn!(
            "map {index}: pulse-B population {:.3} below {}; using the best point",
            calibration.population,
            probe.min_population
        );
    }
    let map = TwoToneExperiment::new(spec, calibration, pump_amplitude)?.generate_map(grid)?;
    let file = file_name(index, config.n_maps);
    let generator = GeneratorInfo {
        prng: PRNG_NAME.into(),
        seed,
        index: index as u64,
    };
    write_map(
        &dir.join(&file),
        &MapFile {
            map,
            generator: Some(generator),
        },
    )?;
    Ok(DatasetRecord {
        file,
        tls: labels,
        seed,
        index: index as u64,
        prng: PRNG_NAME.into(),
        calibration_frequency: calibration.frequency,
        calibration_population: calibration.population,
        calibration_passed: passed,
    })
}

/// Generates `config.n_maps` maps into `dir` (created if missing) and writes
/// the manifest. Maps are computed in parallel on the current rayon pool.
pub fn generate_dataset(plan: &DatasetPlan, dir: &Path, seed: u64) -> Result<Vec<DatasetRecord>, IoError> {
    fs::create_dir_all(dir).map_err(|e| IoError::file(dir, e))?;
    let records = (0..plan.dataset.n_maps)
        .into_par_iter()
        .map(|i| generate_one(plan, dir, seed, i))
        .collect::<Result<Vec<_>, IoError>>()?;

    let path = dir.join(MANIFEST_FILE);
    let io = |e| IoError::file(&path, e);
    let mut w = BufWriter::new(File::create(&path).map_err(io)?);
    for r in &records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)?;
    Ok(records)
}

/// Reads a manifest and checks that every referenced map exists next to it.
pub fn read_manifest(path: &Path) -> Result<Vec<DatasetRecord>, IoError> {
    let f = File::open(path).map_err(|e| IoError::file(path, e))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for (n, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| IoError::file(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: DatasetRecord = serde_json::from_str(&line).map_err(|e| IoError::Parse {
            path: path.to_path_buf(),
            message: format!("line {}: {e}", n + 1),
        })?;
        let map = dir.join(&record.file);
        if !map.is_file() {
            return Err(IoError::file(
                &map,
                std::io::Error::new(std::io::ErrorKind::NotFound, "listed in the manifest but missing"),
            ));
        }
        out.push(record);
    }
    Ok(out)
}
