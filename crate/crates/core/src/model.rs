//! Physical description of a transmon coupled to hard-core-boson defects, and
//! the operators and Hamiltonians built on the truncated product space.
//!
//! All user-facing frequencies and amplitudes are ordinary frequencies in Hz;
//! they are converted to angular frequency exactly once, when a Hamiltonian is
//! assembled. Rates are in 1/s and never carry a factor of 2π.
//!
//! Basis ordering: the transmon occupies the most significant slot, followed
//! by TLS 0, 1, ..., K-1. A basis index is `n * 2^K + sum_k m_k 2^(K-1-k)`.

use std::f64::consts::TAU;

use ndarray::{Array2, linalg::kron};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dense complex matrix on the system Hilbert space.
pub type CMatrix = Array2<C64>;

/// Default cap on the Hilbert-space dimension `n_levels * 2^K`.
pub const DEFAULT_MAX_DIM: usize = 256;

/// Relative tolerance for Hermiticity checks.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter `{key}`: {reason} (got {value})")]
    InvalidParameter {
        key: String,
        value: f64,
        reason: &'static str,
    },
    #[error("Hilbert-space dimension {dim} exceeds the configured cap {cap}")]
    DimensionOverflow { dim: usize, cap: usize },
    #[error("TLS index {index} out of range for a system with {count} TLSs")]
    TlsIndex { index: usize, count: usize },
}

fn check(key: impl Into<String>, value: f64, ok: bool, reason: &'static str) -> Result<(), ModelError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter { key: key.into(), value, reason })
    }
}

/// Transmon parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmonParams {
    /// Bare qubit frequency (Hz).
    pub frequency: f64,
    /// Anharmonicity U (Hz), positive for a transmon.
    pub anharmonicity: f64,
    /// Energy relaxation rate 1/T1 (1/s).
    pub gamma: f64,
    /// Pure dephasing rate 2/T_phi (1/s).
    pub kappa: f64,
    /// Number of transmon levels kept in the truncation.
    pub n_levels: usize,
}

impl TransmonParams {
    /// Decoherence-free three-level transmon.
    pub fn new(frequency: f64, anharmonicity: f64) -> Self {
        Self {
            frequency,
            anharmonicity,
            gamma: 0.0,
            kappa: 0.0,
            n_levels: 3,
        }
    }

    /// Sets the rates from T1 and T_phi (seconds). A non-finite or zero time
    /// means "no decoherence of this kind".
    pub fn with_times(mut self, t1: f64, t_phi: f64) -> Self {
        self.gamma = rate_from_time(t1, 1.0);
        self.kappa = rate_from_time(t_phi, 2.0);
        self
    }

    pub fn with_levels(mut self, n_levels: usize) -> Self {
        self.n_levels = n_levels;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        check("transmon.frequency", self.frequency, self.frequency > 0.0, "must be > 0")?;
        check(
            "transmon.anharmonicity",
            self.anharmonicity,
            self.anharmonicity > 0.0,
            "must be > 0",
        )?;
        check("transmon.gamma", self.gamma, self.gamma >= 0.0, "must be >= 0")?;
        check("transmon.kappa", self.kappa, self.kappa >= 0.0, "must be >= 0")?;
        if self.n_levels < 2 {
            return Err(ModelError::InvalidParameter {
                key: "transmon.n_levels".into(),
                value: self.n_levels as f64,
                reason: "must be >= 2",
            });
        }
        Ok(())
    }
}

/// Parameters of one two-level defect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TlsParams {
    /// TLS frequency (Hz).
    pub frequency: f64,
    /// Transverse coupling g to the transmon (Hz).
    pub coupling: f64,
    /// Direct-drive factor lambda (dimensionless).
    #[serde(default)]
    pub drive_factor: f64,
    /// 1/T1 (1/s).
    pub gamma: f64,
    /// 2/T_phi (1/s).
    pub kappa: f64,
}

impl TlsParams {
    pub fn new(frequency: f64, coupling: f64) -> Self {
        Self {
            frequency,
            coupling,
            drive_factor: 0.0,
            gamma: 0.0,
            kappa: 0.0,
        }
    }

    pub fn with_times(mut self, t1: f64, t_phi: f64) -> Self {
        self.gamma = rate_from_time(t1, 1.0);
        self.kappa = rate_from_time(t_phi, 2.0);
        self
    }

    pub fn with_drive_factor(mut self, lambda: f64) -> Self {
        self.drive_factor = lambda;
        self
    }

    pub fn validate(&self, index: usize) -> Result<(), ModelError> {
        let key = |f: &str| format!("tls[{index}].{f}");
        check(key("frequency"), self.frequency, self.frequency > 0.0, "must be > 0")?;
        check(key("coupling"), self.coupling, self.coupling >= 0.0, "must be >= 0")?;
        check(
            key("drive_factor"),
            self.drive_factor,
            self.drive_factor >= 0.0,
            "must be >= 0",
        )?;
        check(key("gamma"), self.gamma, self.gamma >= 0.0, "must be >= 0")?;
        check(key("kappa"), self.kappa, self.kappa >= 0.0, "must be >= 0")?;
        Ok(())
    }
}

fn rate_from_time(time: f64, numerator: f64) -> f64 {
    if time.is_finite() && time > 0.0 {
        numerator / time
    } else {
        0.0
    }
}

/// Full physical description: one transmon and an ordered list of TLSs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub transmon: TransmonParams,
    #[serde(default)]
    pub tls: Vec<TlsParams>,
}

impl SystemSpec {
    pub fn new(transmon: TransmonParams, tls: Vec<TlsParams>) -> Self {
        Self { transmon, tls }
    }

    pub fn tls_count(&self) -> usize {
        self.tls.len()
    }

    /// Hilbert-space dimension `n_levels * 2^K`, or `None` on overflow.
    pub fn checked_dim(&self) -> Option<usize> {
        let k = u32::try_from(self.tls.len()).ok()?;
        2usize.checked_pow(k)?.checked_mul(self.transmon.n_levels)
    }

    pub fn dim(&self) -> usize {
        self.checked_dim().expect("Hilbert-space dimension overflows usize")
    }

    pub fn validate(&self, max_dim: usize) -> Result<(), ModelError> {
        self.transmon.validate()?;
        for (k, t) in self.tls.iter().enumerate() {
            t.validate(k)?;
        }
        match self.checked_dim() {
            Some(dim) if dim <= max_dim => Ok(()),
            Some(dim) => Err(ModelError::DimensionOverflow { dim, cap: max_dim }),
            None => Err(ModelError::DimensionOverflow { dim: usize::MAX, cap: max_dim }),
        }
    }

    /// Detuning Δ_k = ω_q − ω_k (Hz).
    pub fn detuning(&self, k: usize) -> f64 {
        self.transmon.frequency - self.tls[k].frequency
    }

    /// Copy of this spec with every dissipation and dephasing rate set to zero.
    pub fn decoherence_free(&self) -> Self {
        let mut out = self.clone();
        out.transmon.gamma = 0.0;
        out.transmon.kappa = 0.0;
        for t in &mut out.tls {
            t.gamma = 0.0;
            t.kappa = 0.0;
        }
        out
    }

    pub fn has_decoherence(&self) -> bool {
        self.transmon.gamma > 0.0
            || self.transmon.kappa > 0.0
            || self.tls.iter().any(|t| t.gamma > 0.0 || t.kappa > 0.0)
    }
}

/// One rectangular drive pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrivePulse {
    /// Drive amplitude A (Hz).
    pub amplitude: f64,
    /// Carrier frequency ω_d (Hz).
    pub frequency: f64,
    /// Pulse length (s).
    pub duration: f64,
}

impl DrivePulse {
    pub fn new(amplitude: f64, frequency: f64, duration: f64) -> Self {
        Self { amplitude, frequency, duration }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        check("pulse.amplitude", self.amplitude, self.amplitude >= 0.0, "must be >= 0")?;
        check("pulse.frequency", self.frequency, self.frequency > 0.0, "must be > 0")?;
        check("pulse.duration", self.duration, self.duration >= 0.0, "must be >= 0")?;
        Ok(())
    }
}

/// Ladder operators on the full product space.
#[derive(Debug, Clone)]
pub struct Operators {
    pub dim: usize,
    pub n_levels: usize,
    /// Truncated transmon lowering operator.
    pub a: CMatrix,
    pub a_dag: CMatrix,
    /// Hard-core lowering operator for each TLS slot.
    pub b: Vec<CMatrix>,
    pub b_dag: Vec<CMatrix>,
}

impl Operators {
    /// Transmon number operator a†a.
    pub fn transmon_number(&self) -> CMatrix {
        self.a_dag.dot(&self.a)
    }

    /// Number operator b_k†b_k.
    pub fn tls_number(&self, k: usize) -> CMatrix {
        self.b_dag[k].dot(&self.b[k])
    }

    /// Total excitation number N = a†a + Σ b_k†b_k.
    pub fn excitation_number(&self) -> CMatrix {
        let mut n = self.transmon_number();
        for k in 0..self.b.len() {
            n = n + self.tls_number(k);
        }
        n
    }

    /// Drive coupling operator a + a† + Σ λ_k (b_k + b_k†).
    pub fn drive_operator(&self, spec: &SystemSpec) -> CMatrix {
        let mut x = &self.a + &self.a_dag;
        for (k, t) in spec.tls.iter().enumerate() {
            if t.drive_factor != 0.0 {
                x = x + (&self.b[k] + &self.b_dag[k]).mapv(|z| z * t.drive_factor);
            }
        }
        x
    }
}

fn identity(n: usize) -> CMatrix {
    Array2::from_diag_elem(n, C64::new(1.0, 0.0))
}

fn lowering(n: usize) -> CMatrix {
    let mut m = CMatrix::zeros((n, n));
    for i in 1..n {
        m[[i - 1, i]] = C64::new((i as f64).sqrt(), 0.0);
    }
    m
}

fn dagger(m: &CMatrix) -> CMatrix {
    m.t().mapv(|z| z.conj())
}

/// Builds a, a† and every b_k, b_k† on the full product space.
pub fn build_operators(spec: &SystemSpec, max_dim: usize) -> Result<Operators, ModelError> {
    spec.validate(max_dim)?;
    let n = spec.transmon.n_levels;
    let k_count = spec.tls_count();
    let tls_dim = 1usize << k_count;
    let a = kron(&lowering(n), &identity(tls_dim));
    let sigma = lowering(2);
    let b: Vec<CMatrix> = (0..k_count)
        .map(|k| {
            let left = identity(n * (1 << k));
            let right = identity(1 << (k_count - 1 - k));
            kron(&kron(&left, &sigma), &right)
        })
        .collect();
    let a_dag = dagger(&a);
    let b_dag = b.iter().map(dagger).collect();
    Ok(Operators {
        dim: n * tls_dim,
        n_levels: n,
        a,
        a_dag,
        b,
        b_dag,
    })
}

fn scaled(m: &CMatrix, s: f64) -> CMatrix {
    m.mapv(|z| z * s)
}

/// Shared part of the static and rotating-frame Hamiltonians: number terms use
/// frequencies shifted by `frame` (Hz), everything returned in rad/s.
fn frame_hamiltonian(spec: &SystemSpec, ops: &Operators, frame: f64) -> CMatrix {
    let q = &spec.transmon;
    let ad_a = ops.transmon_number();
    let ad_ad_a_a = ops.a_dag.dot(&ops.a_dag).dot(&ops.a).dot(&ops.a);
    let mut h = scaled(&ad_a, TAU * (q.frequency - frame)) - scaled(&ad_ad_a_a, TAU * q.anharmonicity / 2.0);
    for (k, t) in spec.tls.iter().enumerate() {
        h = h + scaled(&ops.tls_number(k), TAU * (t.frequency - frame));
        let exchange = ops.a_dag.dot(&ops.b[k]) + ops.a.dot(&ops.b_dag[k]);
        h = h + scaled(&exchange, TAU * t.coupling);
    }
    h
}

/// Static Hamiltonian H/ħ (rad/s):
/// ω_q a†a − (U/2) a†a†aa + Σ_k [ω_k b_k†b_k + g_k (a†b_k + a b_k†)].
pub fn hamiltonian_static(spec: &SystemSpec, ops: &Operators) -> CMatrix {
    frame_hamiltonian(spec, ops, 0.0)
}

/// Time-independent Hamiltonian in the frame rotating at the drive frequency,
/// after the rotating-wave approximation (rad/s).
pub fn hamiltonian_rwa(spec: &SystemSpec, ops: &Operators, pulse: &DrivePulse) -> CMatrix {
    let h = frame_hamiltonian(spec, ops, pulse.frequency);
    h + scaled(&ops.drive_operator(spec), TAU * pulse.amplitude / 2.0)
}

/// Lab-frame Hamiltonian with the full cos(ω_d t) drive at time `t` (rad/s).
pub fn hamiltonian_lab(spec: &SystemSpec, ops: &Operators, pulse: &DrivePulse, t: f64) -> CMatrix {
    let envelope = TAU * pulse.amplitude * (TAU * pulse.frequency * t).cos();
    hamiltonian_static(spec, ops) + scaled(&ops.drive_operator(spec), envelope)
}

/// Largest element of |H − H†| relative to the largest element of |H|.
pub fn hermiticity_defect(h: &CMatrix) -> f64 {
    let scale = h.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    let n = h.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((h[[i, j]] - h[[j, i]].conj()).norm());
        }
    }
    worst / scale
}

pub fn is_hermitian(h: &CMatrix) -> bool {
    h.is_square() && hermiticity_defect(h) < HERMITIAN_TOL
}

/// Basis index of the product state |n, m_0, ..., m_{K-1}⟩.
pub fn basis_index(spec: &SystemSpec, transmon_level: usize, tls_bits: &[bool]) -> usize {
    let k_count = spec.tls_count();
    assert_eq!(tls_bits.len(), k_count, "one occupation per TLS");
    let mut idx = transmon_level << k_count;
    for (k, &bit) in tls_bits.iter().enumerate() {
        if bit {
            idx |= 1 << (k_count - 1 - k);
        }
    }
    idx
}

/// Transmon level and TLS occupations of a basis index.
pub fn basis_labels(spec: &SystemSpec, index: usize) -> (usize, Vec<bool>) {
    let k_count = spec.tls_count();
    let level = index >> k_count;
    let bits = (0..k_count).map(|k| index & (1 << (k_count - 1 - k)) != 0).collect();
    (level, bits)
}
