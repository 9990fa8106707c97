//! Closed-form predictions for the two-tone map, the incoherent rate model,
//! feature extraction from maps and inversion to TLS parameters.
//!
//! Closed forms take and return ordinary frequencies in Hz; decay rates are
//! in 1/s. Every expression is homogeneous in its frequency arguments, so the
//! 2π factors cancel except where rates and frequencies mix (the rate model).

mod estimate;
mod features;
mod rates;

pub use estimate::{estimate_tls, EstimateSettings, TlsEstimate};
pub use features::{contrast_profile, dominant_frequency, extract_features, FeatureKind, FeatureSettings, MapFeature};
pub use rates::{
    rate_coefficients, rate_evolve, rate_steady_full, rate_steady_printed, RateCoefficients, RatePopulations,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelError, SystemSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("{formula} is singular: {reason}")]
    Pole { formula: &'static str, reason: String },
    #[error("invalid argument {name} = {value}: {reason}")]
    InvalidArgument {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("fixed-point iteration did not converge after {iterations} iterations (last step {step:.3e} Hz)")]
    NotConverged { iterations: usize, step: f64 },
    #[error("fixed-point iteration left the physical range: {0}")]
    Diverged(String),
    #[error("feature kind {0:?} cannot be inverted")]
    WrongKind(FeatureKind),
    #[error(transparent)]
    Model(#[from] ModelError),
}

// Denominators smaller than this fraction of their terms count as poles.
const POLE_RELATIVE: f64 = 1e-12;

fn checked_denominator(formula: &'static str, terms: &[f64], denominator: f64) -> Result<f64, AnalyticsError> {
    let scale = terms.iter().fold(0.0_f64, |m, t| m.max(t.abs()));
    if !denominator.is_finite() || denominator.abs() <= POLE_RELATIVE * scale || denominator == 0.0 {
        return Err(AnalyticsError::Pole {
            formula,
            reason: format!("denominator {denominator:e} vanishes"),
        });
    }
    Ok(denominator)
}

/// Decay and dephasing rates of a transmon-TLS pair (1/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayRates {
    pub gamma_q: f64,
    pub kappa_q: f64,
    pub gamma_k: f64,
    pub kappa_k: f64,
}

impl DecayRates {
    pub fn from_spec(spec: &SystemSpec, k: usize) -> Result<Self, ModelError> {
        let tls = spec.tls.get(k).ok_or(ModelError::TlsIndex {
            index: k,
            count: spec.tls_count(),
        })?;
        Ok(Self {
            gamma_q: spec.transmon.gamma,
            kappa_q: spec.transmon.kappa,
            gamma_k: tls.gamma,
            kappa_k: tls.kappa,
        })
    }

    /// Γ = γ_q + γ_k + κ_q + κ_k.
    pub fn total(&self) -> f64 {
        self.gamma_q + self.gamma_k + self.kappa_q + self.kappa_k
    }

    fn validate(&self) -> Result<(), AnalyticsError> {
        for (name, value) in [
            ("gamma_q", self.gamma_q),
            ("kappa_q", self.kappa_q),
            ("gamma_k", self.gamma_k),
            ("kappa_k", self.kappa_k),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(AnalyticsError::InvalidArgument {
                    name,
                    value,
                    reason: "rates must be finite and non-negative",
                });
            }
        }
        Ok(())
    }
}

/// Δ̃ = Δ + 2g²/Δ.
pub fn delta_tilde(delta: f64, coupling: f64) -> Result<f64, AnalyticsError> {
    checked_denominator("delta_tilde", &[coupling * coupling], delta)?;
    Ok(delta + 2.0 * coupling * coupling / delta)
}

/// Detunings and total decoherence rate of one TLS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedQuantities {
    /// Δ_k = ω_q − ω_k (Hz).
    pub delta_k: f64,
    /// Δ̃_k (Hz).
    pub delta_tilde_k: f64,
    /// Γ (1/s).
    pub gamma_total: f64,
}

impl DerivedQuantities {
    pub fn new(spec: &SystemSpec, k: usize) -> Result<Self, AnalyticsError> {
        let rates = DecayRates::from_spec(spec, k)?;
        let delta_k = spec.detuning(k);
        Ok(Self {
            delta_k,
            delta_tilde_k: delta_tilde(delta_k, spec.tls[k].coupling)?,
            gamma_total: rates.total(),
        })
    }
}

/// Pulse-B-visible qubit shift when the TLS is excited,
/// δω = 4g²/(U − Δ) + A²Δ/g².
pub fn shift_delta_omega(coupling: f64, delta: f64, anharmonicity: f64, amplitude: f64) -> Result<f64, AnalyticsError> {
    if !(coupling > 0.0) {
        return Err(AnalyticsError::InvalidArgument {
            name: "coupling",
            value: coupling,
            reason: "must be positive",
        });
    }
    let den = checked_denominator("shift_delta_omega", &[anharmonicity, delta], anharmonicity - delta)?;
    Ok(4.0 * coupling * coupling / den + amplitude * amplitude * delta / (coupling * coupling))
}

/// Drive frequency of the two-photon |00⟩ ↔ |20⟩ feature,
/// ω_q − U/2 − g²/(U − Δ).
pub fn freq_two_photon(omega_q: f64, anharmonicity: f64, coupling: f64, delta: f64) -> Result<f64, AnalyticsError> {
    let den = checked_denominator("freq_two_photon", &[anharmonicity, delta], anharmonicity - delta)?;
    Ok(omega_q - anharmonicity / 2.0 - coupling * coupling / den)
}

/// Drive frequency of the |00⟩ ↔ |01⟩ feature, ω_k − g²/Δ.
pub fn freq_01(omega_k: f64, coupling: f64, delta: f64) -> Result<f64, AnalyticsError> {
    let den = checked_denominator("freq_01", &[coupling * coupling], delta)?;
    Ok(omega_k - coupling * coupling / den)
}

/// Ω₀₁ = gA/Δ̃ + λA, with its sign.
pub fn rabi_01_signed(coupling: f64, delta_tilde: f64, drive_factor: f64, amplitude: f64) -> Result<f64, AnalyticsError> {
    let den = checked_denominator("rabi_01", &[coupling], delta_tilde)?;
    Ok(coupling * amplitude / den + drive_factor * amplitude)
}

/// |Ω₀₁|.
pub fn rabi_01(coupling: f64, delta_tilde: f64, drive_factor: f64, amplitude: f64) -> Result<f64, AnalyticsError> {
    rabi_01_signed(coupling, delta_tilde, drive_factor, amplitude).map(f64::abs)
}

/// Drive frequency of the |00⟩ ↔ |11⟩ feature, (ω_q + ω_k)/2 + g²/(U − Δ̃).
pub fn freq_11(
    omega_q: f64,
    omega_k: f64,
    coupling: f64,
    anharmonicity: f64,
    delta_tilde: f64,
) -> Result<f64, AnalyticsError> {
    let den = checked_denominator("freq_11", &[anharmonicity, delta_tilde], anharmonicity - delta_tilde)?;
    Ok(0.5 * (omega_q + omega_k) + coupling * coupling / den)
}

/// Ω₁₁ = 2A²g(U + λ²(U − Δ̃)) / (Δ̃²(U − Δ̃)), with its sign.
pub fn rabi_11_signed(
    amplitude: f64,
    coupling: f64,
    anharmonicity: f64,
    delta_tilde: f64,
    drive_factor: f64,
) -> Result<f64, AnalyticsError> {
    let gap = anharmonicity - delta_tilde;
    checked_denominator("rabi_11", &[anharmonicity, delta_tilde], gap)?;
    let den = checked_denominator("rabi_11", &[anharmonicity, delta_tilde], delta_tilde * delta_tilde * gap)?;
    let lambda2 = drive_factor * drive_factor;
    Ok(2.0 * amplitude * amplitude * coupling * (anharmonicity + lambda2 * gap) / den)
}

/// |Ω₁₁|.
pub fn rabi_11(
    amplitude: f64,
    coupling: f64,
    anharmonicity: f64,
    delta_tilde: f64,
    drive_factor: f64,
) -> Result<f64, AnalyticsError> {
    rabi_11_signed(amplitude, coupling, anharmonicity, delta_tilde, drive_factor).map(f64::abs)
}

/// Long-time transmon population under a drive at the TLS frequency,
/// (2g²Γ + A²(γ_q+κ_q)) / (6g²Γ + 3A²(γ_q+κ_q) + 8γ_qΔ²).
///
/// `detuning` is the drive-to-qubit detuning; pass Δ̃ rather than Δ to account
/// for the dressed qubit frequency.
pub fn steady_population_approx(
    coupling: f64,
    amplitude: f64,
    detuning: f64,
    rates: &DecayRates,
) -> Result<f64, AnalyticsError> {
    rates.validate()?;
    let total = rates.total();
    if total == 0.0 {
        return Err(AnalyticsError::InvalidArgument {
            name: "rates",
            value: 0.0,
            reason: "at least one rate must be positive",
        });
    }
    let g2 = coupling * coupling;
    let a2 = amplitude * amplitude;
    let transverse = rates.gamma_q + rates.kappa_q;
    let num = 2.0 * g2 * total + a2 * transverse;
    let den = 6.0 * g2 * total + 3.0 * a2 * transverse + 8.0 * rates.gamma_q * detuning * detuning;
    let den = checked_denominator("steady_population_approx", &[num], den)?;
    Ok(num / den)
}
