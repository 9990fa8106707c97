//! The excite-then-probe pulse sequence and (ω, t)-map generation.
//!
//! Each map cell is the transmon level-1 population after
//! ground state → pulse A (ω_d, t_A) → pulse B (ω̃_q, t_π). Every pulse is
//! evolved under its own rotating-frame Liouvillian; the relative frame phase
//! between pulses is discarded.

use std::f64::consts::TAU;

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lindblad::{self, DensityMatrix, LindbladError, Liouvillian, PropagationMethod, VectorizedState};
use crate::model::{
    self, build_operators, hamiltonian_rwa, CMatrix, DrivePulse, ModelError, Operators, SystemSpec, DEFAULT_MAX_DIM,
};

/// Default pulse-B length t_π (s).
pub const DEFAULT_PI_DURATION: f64 = 100e-9;
/// Default pulse-B amplitude (Hz): a full Rabi period of 200 ns.
pub const DEFAULT_PROBE_AMPLITUDE: f64 = 5e6;
/// Default pulse-A amplitude (Hz), 1/(60 ns).
pub const DEFAULT_PUMP_AMPLITUDE: f64 = 1.0 / 60e-9;
/// Tolerance on map values outside [0, 1].
pub const MAP_RANGE_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lindblad(#[from] LindbladError),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("pulse-B calibration failed: best population {achieved:.4} at {frequency:.6e} Hz is below {required}")]
    CalibrationFailed {
        achieved: f64,
        frequency: f64,
        required: f64,
        best: PulseBCalibration,
    },
    #[error("map value {value} at ({row}, {col}) lies outside [0, 1]")]
    Unphysical { row: usize, col: usize, value: f64 },
}

/// Sampling grid of an (ω, t)-map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapGrid {
    /// Pulse-A drive frequencies (Hz), strictly increasing.
    pub frequencies: Vec<f64>,
    /// Pulse-A durations (s), uniform with step `dt`, starting at 0 or `dt`.
    pub durations: Vec<f64>,
    pub dt: f64,
}

impl MapGrid {
    pub fn new(frequencies: Vec<f64>, durations: Vec<f64>, dt: f64) -> Result<Self, ProtocolError> {
        let grid = Self {
            frequencies,
            durations,
            dt,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// `n_freq` frequencies from `f_start` in steps of `f_step`, and `n_time`
    /// durations `0, dt, ...` (or `dt, 2dt, ...` when `skip_zero`).
    pub fn uniform(
        f_start: f64,
        f_step: f64,
        n_freq: usize,
        dt: f64,
        n_time: usize,
        skip_zero: bool,
    ) -> Result<Self, ProtocolError> {
        let frequencies = (0..n_freq).map(|i| f_start + i as f64 * f_step).collect();
        let offset = usize::from(skip_zero);
        let durations = (0..n_time).map(|i| (i + offset) as f64 * dt).collect();
        Self::new(frequencies, durations, dt)
    }

    /// 6.8–7.2 GHz in 2 MHz steps by 0–2 μs in 10 ns steps (201 × 201).
    pub fn default_grid() -> Self {
        Self::uniform(6.8e9, 2e6, 201, 10e-9, 201, false).expect("default grid is valid")
    }

    pub fn n_freq(&self) -> usize {
        self.frequencies.len()
    }

    pub fn n_time(&self) -> usize {
        self.durations.len()
    }

    /// Mean spacing of the frequency axis, or 0 for a single column.
    pub fn frequency_step(&self) -> f64 {
        match self.frequencies.as_slice() {
            [first, .., last] => (last - first) / (self.frequencies.len() - 1) as f64,
            _ => 0.0,
        }
    }

    /// Number of `dt` steps before the first duration (0 or 1).
    pub fn time_offset(&self) -> usize {
        if self.durations.first().copied().unwrap_or(0.0) == 0.0 {
            0
        } else {
            1
        }
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        let bad = |msg: String| Err(ProtocolError::InvalidGrid(msg));
        if self.frequencies.is_empty() || self.durations.is_empty() {
            return bad("both axes need at least one point".into());
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("time step must be positive, got {}", self.dt));
        }
        if self.frequencies.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return bad("drive frequencies must be positive".into());
        }
        if self.frequencies.windows(2).any(|w| w[1] <= w[0]) {
            return bad("drive frequencies must be strictly increasing".into());
        }
        let first = self.durations[0];
        let offset = if first == 0.0 {
            0.0
        } else if (first - self.dt).abs() <= 1e-9 * self.dt {
            1.0
        } else {
            return bad(format!("durations must start at 0 or dt, got {first}"));
        };
        for (i, t) in self.durations.iter().enumerate() {
            let expected = (i as f64 + offset) * self.dt;
            if (t - expected).abs() > 1e-9 * self.dt {
                return bad(format!("duration {i} is {t}, expected {expected} on a uniform axis"));
            }
        }
        Ok(())
    }
}

/// Pulse-B (π-pulse) calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseBCalibration {
    /// Calibrated qubit frequency ω̃_q (Hz).
    pub frequency: f64,
    /// π-pulse length (s).
    pub duration: f64,
    /// Pulse-B amplitude (Hz).
    pub amplitude: f64,
    /// Decoherence-free level-1 population reached from the ground state.
    pub population: f64,
}

impl PulseBCalibration {
    pub fn pulse(&self) -> DrivePulse {
        DrivePulse::new(self.amplitude, self.frequency, self.duration)
    }
}

/// Settings for the pulse-B frequency scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationSettings {
    pub duration: f64,
    pub amplitude: f64,
    /// Coarse scan step (Hz).
    pub scan_step: f64,
    /// Scan half-width in units of Σ g_k²/|Δ_k|.
    pub window_factor: f64,
    /// Bounds on the scan half-width (Hz).
    pub min_window: f64,
    pub max_window: f64,
    /// Golden-section stopping width (Hz).
    pub refine_tolerance: f64,
    /// Smallest acceptable calibrated population.
    pub min_population: f64,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        Self {
            duration: DEFAULT_PI_DURATION,
            amplitude: DEFAULT_PROBE_AMPLITUDE,
            scan_step: 0.1e6,
            window_factor: 3.0,
            min_window: 1e6,
            max_window: 100e6,
            refine_tolerance: 100.0,
            // A TLS hybridized with the qubit caps the reachable bare
            // population at cos²θ; the 30 MHz / −80 MHz example tops out near 0.89.
            min_population: 0.8,
        }
    }
}

/// Projector onto transmon level 1, identity on every TLS.
pub fn qubit_projector(spec: &SystemSpec) -> CMatrix {
    level_projector(spec, 1)
}

fn level_projector(spec: &SystemSpec, level: usize) -> CMatrix {
    let d = spec.dim();
    let mut p = CMatrix::zeros((d, d));
    for i in 0..d {
        if model::basis_labels(spec, i).0 == level {
            p[[i, i]] = C64::new(1.0, 0.0);
        }
    }
    p
}

/// Tr(P_q ρ): population of the first excited transmon level.
pub fn qubit_population(rho: &DensityMatrix, spec: &SystemSpec) -> f64 {
    let d = spec.dim();
    (0..d)
        .filter(|&i| model::basis_labels(spec, i).0 == 1)
        .map(|i| rho.0[[i, i]].re)
        .sum()
}

/// ⟨b_k†b_k⟩.
pub fn tls_population(rho: &DensityMatrix, spec: &SystemSpec, k: usize) -> Result<f64, ModelError> {
    let count = spec.tls_count();
    if k >= count {
        return Err(ModelError::TlsIndex { index: k, count });
    }
    let d = spec.dim();
    Ok((0..d)
        .filter(|&i| model::basis_labels(spec, i).1[k])
        .map(|i| rho.0[[i, i]].re)
        .sum())
}

/// Decoherence-free level-1 population after one rectangular pulse from the
/// ground state, by exact diagonalization of the rotating-frame Hamiltonian.
fn unitary_pulse_population(spec: &SystemSpec, ops: &Operators, levels: &[usize], pulse: &DrivePulse) -> f64 {
    let h = hamiltonian_rwa(spec, ops, pulse);
    let (energies, q) = h.eigh(UPLO::Lower).expect("Hermitian eigensolve");
    let phases: Vec<C64> = energies
        .iter()
        .zip(q.row(0).iter())
        .map(|(e, q0)| C64::from_polar(1.0, -e * pulse.duration) * q0.conj())
        .collect();
    levels
        .iter()
        .map(|&i| {
            let amp: C64 = q.row(i).iter().zip(&phases).map(|(a, b)| a * b).sum();
            amp.norm_sqr()
        })
        .sum()
}

/// Finds the pulse-B frequency that maximizes the post-pulse qubit population
/// of the decoherence-free system. Returns the best point even when it falls
/// short of `min_population`, paired with whether it passed.
pub fn calibrate_pulse_b_best_effort(
    spec: &SystemSpec,
    settings: &CalibrationSettings,
) -> Result<(PulseBCalibration, bool), ProtocolError> {
    let free = spec.decoherence_free();
    let ops = build_operators(&free, DEFAULT_MAX_DIM)?;
    let levels: Vec<usize> = (0..free.dim())
        .filter(|&i| model::basis_labels(&free, i).0 == 1)
        .collect();
    let wq = free.transmon.frequency;
    let population = |f: f64| {
        let pulse = DrivePulse::new(settings.amplitude, f, settings.duration);
        unitary_pulse_population(&free, &ops, &levels, &pulse)
    };

    let shift: f64 = (0..free.tls_count())
        .map(|k| {
            let g = free.tls[k].coupling;
            g * g / free.detuning(k).abs()
        })
        .sum();
    let window = (settings.window_factor * shift).clamp(settings.min_window, settings.max_window);
    let steps = (window / settings.scan_step).ceil() as i64;
    let (mut best_f, mut best_p) = (wq, f64::NEG_INFINITY);
    for i in -steps..=steps {
        let f = wq + i as f64 * settings.scan_step;
        let p = population(f);
        if p > best_p {
            best_p = p;
            best_f = f;
        }
    }

    // golden-section refinement inside the neighbouring scan cells
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (best_f - settings.scan_step, best_f + settings.scan_step);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut p1, mut p2) = (population(x1), population(x2));
    while hi - lo > settings.refine_tolerance {
        if p1 > p2 {
            hi = x2;
            x2 = x1;
            p2 = p1;
            x1 = hi - inv_phi * (hi - lo);
            p1 = population(x1);
        } else {
            lo = x1;
            x1 = x2;
            p1 = p2;
            x2 = lo + inv_phi * (hi - lo);
            p2 = population(x2);
        }
    }
    let refined = 0.5 * (lo + hi);
    let refined_p = population(refined);
    if refined_p > best_p {
        best_f = refined;
        best_p = refined_p;
    }

    let cal = PulseBCalibration {
        frequency: best_f,
        duration: settings.duration,
        amplitude: settings.amplitude,
        population: best_p,
    };
    Ok((cal, best_p >= settings.min_population))
}

/// Calibrates pulse B, failing when the best population is below
/// `settings.min_population`.
pub fn calibrate_pulse_b(spec: &SystemSpec, settings: &CalibrationSettings) -> Result<PulseBCalibration, ProtocolError> {
    let (cal, ok) = calibrate_pulse_b_best_effort(spec, settings)?;
    if ok {
        Ok(cal)
    } else {
        Err(ProtocolError::CalibrationFailed {
            achieved: cal.population,
            frequency: cal.frequency,
            required: settings.min_population,
            best: cal,
        })
    }
}

/// An (ω, t)-map with the metadata needed to interpret it.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaTMap {
    /// Populations, rows = drive frequency, columns = pulse-A duration.
    pub values: Array2<f64>,
    pub grid: MapGrid,
    pub spec: SystemSpec,
    pub calibration: PulseBCalibration,
    /// Pulse-A amplitude (Hz).
    pub pump_amplitude: f64,
}

impl OmegaTMap {
    pub fn check_range(&self) -> Result<(), ProtocolError> {
        for ((row, col), &value) in self.values.indexed_iter() {
            if !(-MAP_RANGE_TOL..=1.0 + MAP_RANGE_TOL).contains(&value) {
                return Err(ProtocolError::Unphysical { row, col, value });
            }
        }
        Ok(())
    }

    /// Time trace at one drive frequency.
    pub fn column(&self, row: usize) -> Array1<f64> {
        self.values.row(row).to_owned()
    }
}

/// A calibrated two-tone experiment on one system.
#[derive(Debug, Clone)]
pub struct TwoToneExperiment {
    spec: SystemSpec,
    ops: Operators,
    calibration: PulseBCalibration,
    pump_amplitude: f64,
    probe_liouvillian: Liouvillian,
    // P̄_q† e^{t_π L_B}, shared by every map cell
    readout: Array1<C64>,
    ground: VectorizedState,
}

impl TwoToneExperiment {
    pub fn new(spec: SystemSpec, calibration: PulseBCalibration, pump_amplitude: f64) -> Result<Self, ProtocolError> {
        let ops = build_operators(&spec, DEFAULT_MAX_DIM)?;
        DrivePulse::new(pump_amplitude, calibration.frequency, 0.0).validate()?;
        calibration.pulse().validate()?;
        let probe_h = hamiltonian_rwa(&spec, &ops, &calibration.pulse());
        let probe_liouvillian = lindblad::liouvillian(&spec, &ops, &probe_h)?;
        let probe = probe_liouvillian.propagator(calibration.duration)?;
        let projector = lindblad::vectorize(&DensityMatrix(qubit_projector(&spec)));
        // row vector p̄† E, stored unconjugated so that value = Σ readout_i v_i
        let readout = projector.0.mapv(|z| z.conj()).dot(&probe);
        let ground = lindblad::vectorize(&DensityMatrix::ground(ops.dim));
        Ok(Self {
            spec,
            ops,
            calibration,
            pump_amplitude,
            probe_liouvillian,
            readout,
            ground,
        })
    }

    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    pub fn calibration(&self) -> &PulseBCalibration {
        &self.calibration
    }

    pub fn pump_amplitude(&self) -> f64 {
        self.pump_amplitude
    }

    pub fn operators(&self) -> &Operators {
        &self.ops
    }

    /// Liouvillian of pulse A at drive frequency `omega_d`.
    pub fn pump_liouvillian(&self, omega_d: f64) -> Result<Liouvillian, ProtocolError> {
        let pulse = DrivePulse::new(self.pump_amplitude, omega_d, 0.0);
        pulse.validate()?;
        let h = hamiltonian_rwa(&self.spec, &self.ops, &pulse);
        Ok(lindblad::liouvillian(&self.spec, &self.ops, &h)?)
    }

    /// State after pulse A alone.
    pub fn after_pump(&self, omega_d: f64, t_a: f64) -> Result<DensityMatrix, ProtocolError> {
        let l = self.pump_liouvillian(omega_d)?;
        Ok(l.evolve(&DensityMatrix::ground(self.ops.dim), t_a)?)
    }

    /// One full sequence, propagating both pulses explicitly.
    pub fn run_sequence(&self, omega_d: f64, t_a: f64) -> Result<f64, ProtocolError> {
        let pump = self.pump_liouvillian(omega_d)?.propagator(t_a)?;
        let probe = self.probe_liouvillian.propagator(self.calibration.duration)?;
        let out = probe.dot(&pump.dot(&self.ground.0));
        let rho = lindblad::devectorize(&VectorizedState(out))?;
        Ok(qubit_population(&rho, &self.spec))
    }

    /// Map column at one drive frequency: one single-step propagator, iterated.
    /// Scaling and squaring is used for the step since it costs less than a
    /// full eigendecomposition at these sizes.
    pub fn map_column(&self, omega_d: f64, grid: &MapGrid) -> Result<Vec<f64>, ProtocolError> {
        let step = self
            .pump_liouvillian(omega_d)?
            .propagator_with(grid.dt, PropagationMethod::ScalingSquaring)?;
        let mut state = self.ground.0.clone();
        for _ in 0..grid.time_offset() {
            state = step.dot(&state);
        }
        let mut column = Vec::with_capacity(grid.n_time());
        for i in 0..grid.n_time() {
            if i > 0 {
                state = step.dot(&state);
            }
            let value: C64 = self.readout.iter().zip(state.iter()).map(|(a, b)| a * b).sum();
            column.push(value.re);
        }
        Ok(column)
    }

    /// Full (ω, t)-map; columns are computed in parallel on the current rayon pool.
    pub fn generate_map(&self, grid: &MapGrid) -> Result<OmegaTMap, ProtocolError> {
        grid.validate()?;
        let columns: Vec<Vec<f64>> = grid
            .frequencies
            .par_iter()
            .map(|&f| self.map_column(f, grid))
            .collect::<Result<_, _>>()?;
        let mut values = Array2::zeros((grid.n_freq(), grid.n_time()));
        for (i, col) in columns.iter().enumerate() {
            values.row_mut(i).assign(&Array1::from_vec(col.clone()));
        }
        let map = OmegaTMap {
            values,
            grid: grid.clone(),
            spec: self.spec.clone(),
            calibration: self.calibration,
            pump_amplitude: self.pump_amplitude,
        };
        map.check_range()?;
        Ok(map)
    }
}

/// One sequence on a freshly built experiment.
pub fn run_sequence(
    spec: &SystemSpec,
    calibration: &PulseBCalibration,
    pump_amplitude: f64,
    omega_d: f64,
    t_a: f64,
) -> Result<f64, ProtocolError> {
    TwoToneExperiment::new(spec.clone(), *calibration, pump_amplitude)?.run_sequence(omega_d, t_a)
}

pub fn generate_map(
    spec: &SystemSpec,
    calibration: &PulseBCalibration,
    grid: &MapGrid,
    pump_amplitude: f64,
) -> Result<OmegaTMap, ProtocolError> {
    TwoToneExperiment::new(spec.clone(), *calibration, pump_amplitude)?.generate_map(grid)
}

/// Half period of the |00⟩ ↔ |01⟩ oscillation in seconds, π Δ̃_k / (A g_k)
/// with frequencies converted to rad/s.
pub fn half_rabi_period(delta_tilde: f64, amplitude: f64, coupling: f64) -> f64 {
    std::f64::consts::PI * (TAU * delta_tilde).abs() / (TAU * amplitude * TAU * coupling)
}
