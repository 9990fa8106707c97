//! Inversion of a |00⟩ ↔ |01⟩ feature into the bare TLS frequency and coupling.

use serde::{Deserialize, Serialize};

use super::{delta_tilde, freq_01, rabi_01, AnalyticsError, FeatureKind, MapFeature};
use crate::model::TransmonParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateSettings {
    /// Weight of the new iterate in each damped update.
    pub damping: f64,
    pub max_iterations: usize,
    /// Convergence threshold on both unknowns (Hz).
    pub tolerance: f64,
    /// Iterates with g/|Δ| above this are treated as divergent.
    pub max_coupling_ratio: f64,
}

impl Default for EstimateSettings {
    fn default() -> Self {
        Self {
            damping: 0.5,
            max_iterations: 100,
            tolerance: 1e3,
            max_coupling_ratio: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TlsEstimate {
    /// Bare TLS frequency (Hz).
    pub omega_k_hat: f64,
    /// Coupling (Hz).
    pub g_k_hat: f64,
    pub source_feature: MapFeature,
    /// Relative mismatch between the feature and the forward formulas at the
    /// estimate.
    pub residual: f64,
    pub iterations: usize,
}

/// Solves center = ω_k − g²/Δ and oscillation = gA/|Δ̃| for (ω_k, g).
pub(crate) fn invert_tls_01(
    center: f64,
    oscillation: f64,
    transmon: &TransmonParams,
    amplitude: f64,
    settings: &EstimateSettings,
) -> Result<(f64, f64, usize), AnalyticsError> {
    if !(oscillation > 0.0 && oscillation.is_finite()) {
        return Err(AnalyticsError::InvalidArgument {
            name: "oscillation_frequency",
            value: oscillation,
            reason: "must be positive",
        });
    }
    if !(amplitude > 0.0) {
        return Err(AnalyticsError::InvalidArgument {
            name: "amplitude",
            value: amplitude,
            reason: "must be positive",
        });
    }
    let wq = transmon.frequency;
    let alpha = settings.damping;
    let (mut wk, mut g) = (center, 0.0);
    let mut step = f64::INFINITY;
    for iteration in 1..=settings.max_iterations {
        let delta = wq - wk;
        let dt = delta_tilde(delta, g)
            .map_err(|_| AnalyticsError::Diverged(format!("iterate ω_k = {wk:.6e} Hz reached the qubit")))?;
        let g_new = oscillation * dt.abs() / amplitude;
        let wk_new = center + g_new * g_new / delta;
        let (wk_next, g_next) = if iteration == 1 {
            (wk_new, g_new)
        } else {
            ((1.0 - alpha) * wk + alpha * wk_new, (1.0 - alpha) * g + alpha * g_new)
        };
        step = (wk_next - wk).abs().max((g_next - g).abs());
        wk = wk_next;
        g = g_next;
        let new_delta = wq - wk;
        if !(wk.is_finite() && g.is_finite()) || g > settings.max_coupling_ratio * new_delta.abs() {
            return Err(AnalyticsError::Diverged(format!(
                "iterate ω_k = {wk:.6e} Hz, g = {g:.3e} Hz is outside the dispersive regime"
            )));
        }
        if step < settings.tolerance {
            return Ok((wk, g, iteration));
        }
    }
    Err(AnalyticsError::NotConverged {
        iterations: settings.max_iterations,
        step,
    })
}

fn residual(center: f64, oscillation: f64, wq: f64, wk: f64, g: f64, amplitude: f64) -> Result<f64, AnalyticsError> {
    let delta = wq - wk;
    let f = freq_01(wk, g, delta)?;
    let r = rabi_01(g, delta_tilde(delta, g)?, 0.0, amplitude)?;
    Ok((((f - center) / delta).powi(2) + ((r - oscillation) / oscillation).powi(2)).sqrt())
}

/// One estimate per TLS_01 feature. Other kinds are skipped; failures are
/// reported per feature.
pub fn estimate_tls(
    features: &[MapFeature],
    transmon: &TransmonParams,
    amplitude: f64,
    settings: &EstimateSettings,
) -> Vec<Result<TlsEstimate, AnalyticsError>> {
    features
        .iter()
        .filter(|f| f.kind == FeatureKind::Tls01)
        .map(|f| estimate_one(f, transmon, amplitude, settings))
        .collect()
}

pub(crate) fn estimate_one(
    feature: &MapFeature,
    transmon: &TransmonParams,
    amplitude: f64,
    settings: &EstimateSettings,
) -> Result<TlsEstimate, AnalyticsError> {
    if feature.kind != FeatureKind::Tls01 {
        return Err(AnalyticsError::WrongKind(feature.kind));
    }
    let (wk, g, iterations) = invert_tls_01(
        feature.center_frequency,
        feature.oscillation_frequency,
        transmon,
        amplitude,
        settings,
    )?;
    Ok(TlsEstimate {
        omega_k_hat: wk,
        g_k_hat: g,
        source_feature: feature.clone(),
        residual: residual(
            feature.center_frequency,
            feature.oscillation_frequency,
            transmon.frequency,
            wk,
            g,
            amplitude,
        )?,
        iterations,
    })
}
