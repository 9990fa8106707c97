//! TOML run configuration.
//!
//! ```toml
//! version = 1
//! seed = 0
//!
//! [transmon]
//! frequency = 7.0e9        # Hz
//! anharmonicity = 180e6    # Hz
//! t1 = 10e-6               # s, omit for no relaxation
//! t_phi = 1e-6             # s, omit for no dephasing
//!
//! [[tls]]
//! frequency = 7.08e9
//! coupling = 30e6
//! t1 = 800e-9
//! t_phi = 1.6e-6
//!
//! [grid]                   # pulse-A frequency and duration axes
//! f_start = 6.8e9
//! f_step = 2e6
//! n_freq = 201
//! dt = 10e-9
//! n_time = 201
//!
//! [pump]
//! amplitude = 16.666667e6  # Hz
//!
//! [probe]                  # pulse B and its calibration scan
//! amplitude = 5e6
//! duration = 100e-9
//! ```
//!
//! Optional `[features]`, `[steady]` and `[dataset]` tables configure the
//! corresponding subcommands. Unknown keys are rejected everywhere.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IoError;
use crate::analytics::FeatureSettings;
use crate::model::{ModelError, SystemSpec, TlsParams, TransmonParams, DEFAULT_MAX_DIM};
use crate::protocol::{CalibrationSettings, MapGrid, DEFAULT_PUMP_AMPLITUDE};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default = "default_version")]
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    pub transmon: TransmonConfig,
    #[serde(default)]
    pub tls: Vec<TlsConfig>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub pump: PumpConfig,
    #[serde(default)]
    pub probe: CalibrationSettings,
    #[serde(default)]
    pub features: FeatureSettings,
    pub steady: Option<SteadyConfig>,
    pub dataset: Option<DatasetConfig>,
}

fn default_version() -> u32 {
    CONFIG_VERSION
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmonConfig {
    pub frequency: f64,
    pub anharmonicity: f64,
    pub t1: Option<f64>,
    pub t_phi: Option<f64>,
    #[serde(default = "default_levels")]
    pub n_levels: usize,
}

fn default_levels() -> usize {
    3
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TlsConfig {
    pub frequency: f64,
    pub coupling: f64,
    pub t1: Option<f64>,
    pub t_phi: Option<f64>,
    #[serde(default)]
    pub drive_factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub f_start: f64,
    pub f_step: f64,
    pub n_freq: usize,
    pub dt: f64,
    pub n_time: usize,
    /// Start the duration axis at `dt` instead of 0.
    pub skip_zero: bool,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            f_start: 6.8e9,
            f_step: 2e6,
            n_freq: 201,
            dt: 10e-9,
            n_time: 201,
            skip_zero: false,
        }
    }
}

impl GridConfig {
    pub fn to_grid(&self) -> Result<MapGrid, IoError> {
        positive("grid.f_start", self.f_start)?;
        if !(self.f_step.is_finite() && (self.f_step > 0.0 || self.n_freq == 1)) {
            return Err(IoError::invalid("grid.f_step", format!("must be > 0, got {}", self.f_step)));
        }
        positive("grid.dt", self.dt)?;
        nonzero("grid.n_freq", self.n_freq)?;
        nonzero("grid.n_time", self.n_time)?;
        Ok(MapGrid::uniform(
            self.f_start,
            self.f_step,
            self.n_freq,
            self.dt,
            self.n_time,
            self.skip_zero,
        )?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PumpConfig {
    /// Pulse-A amplitude (Hz).
    pub amplitude: f64,
}

impl Default for PumpConfig {
    fn default() -> Self {
        Self {
            amplitude: DEFAULT_PUMP_AMPLITUDE,
        }
    }
}

/// Continuous drive for the steady-state comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SteadyConfig {
    /// Index of the TLS the analytic formulas refer to.
    pub tls: usize,
    /// Drive frequency (Hz); defaults to the dressed |00⟩ ↔ |01⟩ transition.
    pub drive_frequency: Option<f64>,
    /// Drive amplitude (Hz); defaults to the pump amplitude.
    pub amplitude: Option<f64>,
    /// Length of the direct propagation (s).
    pub long_time: f64,
}

impl Default for SteadyConfig {
    fn default() -> Self {
        Self {
            tls: 0,
            drive_frequency: None,
            amplitude: None,
            long_time: 20e-6,
        }
    }
}

/// Random single- or multi-TLS maps. Each parameter is drawn uniformly from
/// its `[low, high]` range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub n_maps: usize,
    pub n_tls: usize,
    /// TLS frequency range (Hz).
    pub frequency: [f64; 2],
    /// Coupling range (Hz).
    pub coupling: [f64; 2],
    /// TLS T1 range (s).
    pub t1: [f64; 2],
    /// TLS T_phi range (s).
    pub t_phi: [f64; 2],
    /// When set, draws with g/|ω_q − ω_k| above this are rejected.
    pub max_coupling_ratio: Option<f64>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            n_maps: 1,
            n_tls: 2,
            frequency: [6.8e9, 7.2e9],
            coupling: [5e6, 50e6],
            t1: [0.5e-6, 10e-6],
            t_phi: [0.5e-6, 30e-6],
            max_coupling_ratio: None,
        }
    }
}

impl DatasetConfig {
    fn validate(&self, transmon_levels: usize) -> Result<(), IoError> {
        nonzero("dataset.n_maps", self.n_maps)?;
        let fits = u32::try_from(self.n_tls)
            .ok()
            .and_then(|k| 2usize.checked_pow(k))
            .and_then(|p| p.checked_mul(transmon_levels))
            .is_some_and(|d| d <= DEFAULT_MAX_DIM);
        if !fits {
            return Err(IoError::invalid(
                "dataset.n_tls",
                format!("{} TLSs exceed the Hilbert-space cap {DEFAULT_MAX_DIM}", self.n_tls),
            ));
        }
        for (key, [lo, hi]) in [
            ("dataset.frequency", self.frequency),
            ("dataset.coupling", self.coupling),
            ("dataset.t1", self.t1),
            ("dataset.t_phi", self.t_phi),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
                return Err(IoError::invalid(key, format!("need 0 < low <= high, got [{lo}, {hi}]")));
            }
        }
        if let Some(r) = self.max_coupling_ratio {
            positive("dataset.max_coupling_ratio", r)?;
        }
        Ok(())
    }
}

fn positive(key: &str, value: f64) -> Result<(), IoError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(IoError::invalid(key, format!("must be > 0, got {value}")))
    }
}

fn nonzero(key: &str, value: usize) -> Result<(), IoError> {
    if value > 0 {
        Ok(())
    } else {
        Err(IoError::invalid(key, "must be >= 1"))
    }
}

fn optional_time(key: String, value: Option<f64>) -> Result<f64, IoError> {
    match value {
        None => Ok(f64::INFINITY),
        Some(t) => positive(&key, t).map(|_| t),
    }
}

fn model_to_io(err: ModelError) -> IoError {
    match err {
        ModelError::InvalidParameter { key, value, reason } => IoError::invalid(key, format!("{reason}, got {value}")),
        other => IoError::Model(other),
    }
}

impl Config {
    /// Parses and validates a TOML document. `origin` labels error messages.
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self, IoError> {
        let config: Self = toml::from_str(text).map_err(|e| IoError::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        let text = std::fs::read_to_string(path).map_err(|e| IoError::file(path, e))?;
        Self::from_toml_str(&text, path)
    }

    pub fn validate(&self) -> Result<(), IoError> {
        if self.version != CONFIG_VERSION {
            return Err(IoError::invalid(
                "version",
                format!("unsupported version {}, expected {CONFIG_VERSION}", self.version),
            ));
        }
        let spec = self.system_spec()?;
        spec.validate(DEFAULT_MAX_DIM).map_err(model_to_io)?;
        self.grid.to_grid()?;
        positive("pump.amplitude", self.pump.amplitude)?;
        positive("probe.amplitude", self.probe.amplitude)?;
        positive("probe.duration", self.probe.duration)?;
        positive("probe.scan_step", self.probe.scan_step)?;
        positive("probe.refine_tolerance", self.probe.refine_tolerance)?;
        if !(0.0..=1.0).contains(&self.probe.min_population) {
            return Err(IoError::invalid("probe.min_population", "must lie in [0, 1]"));
        }
        if let Some(steady) = &self.steady {
            if steady.tls >= spec.tls_count() {
                return Err(IoError::invalid(
                    "steady.tls",
                    format!("index {} but only {} TLS configured", steady.tls, spec.tls_count()),
                ));
            }
            if let Some(f) = steady.drive_frequency {
                positive("steady.drive_frequency", f)?;
            }
            if let Some(a) = steady.amplitude {
                positive("steady.amplitude", a)?;
            }
            positive("steady.long_time", steady.long_time)?;
        }
        if let Some(dataset) = &self.dataset {
            dataset.validate(self.transmon.n_levels)?;
        }
        Ok(())
    }

    /// The physical system described by `[transmon]` and `[[tls]]`.
    pub fn system_spec(&self) -> Result<SystemSpec, IoError> {
        let t = &self.transmon;
        let transmon = TransmonParams::new(t.frequency, t.anharmonicity)
            .with_times(
                optional_time("transmon.t1".into(), t.t1)?,
                optional_time("transmon.t_phi".into(), t.t_phi)?,
            )
            .with_levels(t.n_levels);
        let tls = self
            .tls
            .iter()
            .enumerate()
            .map(|(k, c)| {
                Ok(TlsParams::new(c.frequency, c.coupling)
                    .with_times(
                        optional_time(format!("tls[{k}].t1"), c.t1)?,
                        optional_time(format!("tls[{k}].t_phi"), c.t_phi)?,
                    )
                    .with_drive_factor(c.drive_factor))
            })
            .collect::<Result<Vec<_>, IoError>>()?;
        Ok(SystemSpec::new(transmon, tls))
    }

    pub fn grid(&self) -> Result<MapGrid, IoError> {
        self.grid.to_grid()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG2: &str = r#"
version = 1
[transmon]
frequency = 7.0e9
anharmonicity = 180e6
t1 = 10e-6
t_phi = 1e-6
[[tls]]
frequency = 7.08e9
coupling = 30e6
t1 = 800e-9
t_phi = 1.6e-6
"#;

    fn parse(text: &str) -> Result<Config, IoError> {
        Config::from_toml_str(text, Path::new("test.toml"))
    }

    #[test]
    fn parses_with_defaults() {
        let c = parse(FIG2).unwrap();
        let spec = c.system_spec().unwrap();
        assert_eq!(spec.tls_count(), 1);
        assert!((spec.transmon.gamma - 1e5).abs() < 1e-6);
        assert!((spec.transmon.kappa - 2e6).abs() < 1e-6);
        assert!((spec.tls[0].gamma - 1.25e6).abs() < 1e-6);
        assert_eq!(c.grid().unwrap(), MapGrid::default_grid());
        assert_eq!(c.pump.amplitude, DEFAULT_PUMP_AMPLITUDE);
        assert_eq!(c.probe, CalibrationSettings::default());
        assert!(c.steady.is_none() && c.dataset.is_none());
    }

    #[test]
    fn omitted_times_mean_no_decoherence() {
        let c = parse("[transmon]\nfrequency = 7e9\nanharmonicity = 180e6\n").unwrap();
        assert!(!c.system_spec().unwrap().has_decoherence());
    }

    #[test]
    fn negative_coupling_names_the_key() {
        let err = parse(&FIG2.replace("coupling = 30e6", "coupling = -30e6")).unwrap_err();
        assert!(err.to_string().contains("tls[0].coupling"), "{err}");
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn unknown_key_is_rejected_with_its_line() {
        let err = parse(&FIG2.replace("coupling = 30e6", "cuopling = 30e6")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("cuopling"), "{msg}");
        assert!(msg.contains("line 10"), "{msg}");
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn nonpositive_times_are_rejected() {
        let err = parse(&FIG2.replace("t1 = 800e-9", "t1 = 0.0")).unwrap_err();
        assert!(err.to_string().contains("tls[0].t1"), "{err}");
    }

    #[test]
    fn grid_and_version_are_checked() {
        let err = parse(&format!("{FIG2}\n[grid]\nn_freq = 0\n")).unwrap_err();
        assert!(err.to_string().contains("grid.n_freq"), "{err}");
        let err = parse(&format!("version = 2\n{}", FIG2.replace("version = 1", ""))).unwrap_err();
        assert!(err.to_string().contains("version"), "{err}");
    }

    #[test]
    fn steady_index_must_exist() {
        let err = parse(&format!("{FIG2}\n[steady]\ntls = 1\n")).unwrap_err();
        assert!(err.to_string().contains("steady.tls"), "{err}");
        let c = parse(&format!("{FIG2}\n[steady]\n")).unwrap();
        assert_eq!(c.steady.unwrap().long_time, 20e-6);
    }

    #[test]
    fn dataset_ranges_are_checked() {
        let c = parse(&format!("{FIG2}\n[dataset]\nn_maps = 3\n")).unwrap();
        assert_eq!(c.dataset.unwrap().frequency, [6.8e9, 7.2e9]);
        let err = parse(&format!("{FIG2}\n[dataset]\ncoupling = [50e6, 5e6]\n")).unwrap_err();
        assert!(err.to_string().contains("dataset.coupling"), "{err}");
        let err = parse(&format!("{FIG2}\n[dataset]\nn_tls = 7\n")).unwrap_err();
        assert!(err.to_string().contains("dataset.n_tls"), "{err}");
    }

    #[test]
    fn roundtrips_through_toml() {
        let c = parse(FIG2).unwrap();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(parse(&text).unwrap(), c);
    }
}
