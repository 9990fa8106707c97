//! Feature extraction from (ω, t)-maps.
//!
//! Each frequency column is reduced to a contrast (mean absolute deviation
//! from its first sample). Peaks in the contrast profile become features
//! whose center is the centroid of the contrast above half maximum and whose
//! oscillation frequency is the on-resonance Rabi frequency fitted to the
//! dominant Fourier components of the columns across the chevron.

use std::f64::consts::{PI, TAU};

use ndarray::{Array1, Array2};
use ndarray_linalg::Solve;
use rustfft::{num_complex::Complex64 as C64, FftPlanner};
use serde::{Deserialize, Serialize};

use super::estimate::{invert_tls_01, EstimateSettings};
use super::{delta_tilde, freq_11, shift_delta_omega};
use crate::protocol::{OmegaTMap, PulseBCalibration};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureKind {
    #[serde(rename = "TLS_01")]
    Tls01,
    #[serde(rename = "TLS_11")]
    Tls11,
    #[serde(rename = "QUBIT_10")]
    Qubit10,
    #[serde(rename = "QUBIT_20")]
    Qubit20,
    #[serde(rename = "UNKNOWN")]
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapFeature {
    /// Hz.
    pub center_frequency: f64,
    /// Hz, 0 when no oscillation is found.
    pub oscillation_frequency: f64,
    /// Peak column contrast, in [0, 1].
    pub contrast: f64,
    pub kind: FeatureKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSettings {
    /// Minimum peak contrast.
    pub contrast_threshold: f64,
    /// Minimum height of a peak above the higher of its flanking minima.
    pub min_prominence: f64,
    /// Classification window, in frequency grid steps.
    pub proximity_steps: f64,
    /// Zero-padding factor of the oscillation FFT.
    pub zero_padding: usize,
    /// Oscillations completing fewer periods than this within the time window
    /// are not resolved; such features are left unclassified.
    pub min_periods: f64,
    pub estimate: EstimateSettings,
}

impl Default for FeatureSettings {
    fn default() -> Self {
        Self {
            contrast_threshold: 0.05,
            min_prominence: 0.01,
            proximity_steps: 3.0,
            zero_padding: 8,
            min_periods: 1.5,
            estimate: EstimateSettings::default(),
        }
    }
}

/// Mean |x_i − x_0| of each row.
pub fn contrast_profile(map: &OmegaTMap) -> Vec<f64> {
    map.values
        .rows()
        .into_iter()
        .map(|row| {
            let base = row[0];
            let n = row.len() as f64;
            (row.iter().map(|v| (v - base).abs()).sum::<f64>() / n).clamp(0.0, 1.0)
        })
        .collect()
}

/// Dominant frequency of a uniformly sampled signal (Hz), from a linearly
/// detrended, Hann-windowed, zero-padded FFT with parabolic peak
/// interpolation; ties go to the lower frequency. Returns 0 when the
/// strongest component lies below `min_frequency` (unresolved).
pub fn dominant_frequency(signal: &[f64], dt: f64, zero_padding: usize, min_frequency: f64) -> f64 {
    let n = signal.len();
    if n < 4 {
        return 0.0;
    }
    let nf = n as f64;
    let t_mean = (nf - 1.0) / 2.0;
    let mean = signal.iter().sum::<f64>() / nf;
    let (mut sty, mut stt) = (0.0, 0.0);
    for (i, x) in signal.iter().enumerate() {
        let t = i as f64 - t_mean;
        sty += t * (x - mean);
        stt += t * t;
    }
    let slope = sty / stt;
    let len = n * zero_padding.max(1);
    let mut buf = vec![C64::new(0.0, 0.0); len];
    for (i, (x, slot)) in signal.iter().zip(buf.iter_mut()).enumerate() {
        let w = 0.5 * (1.0 - (TAU * i as f64 / (nf - 1.0)).cos());
        *slot = C64::new((x - mean - slope * (i as f64 - t_mean)) * w, 0.0);
    }
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let last = len / 2;
    let mag: Vec<f64> = buf[..=last].iter().map(|z| z.norm()).collect();
    let scale = mag.iter().copied().fold(0.0, f64::max);
    if scale <= 1e-12 * nf {
        return 0.0;
    }
    let bin_width = 1.0 / (len as f64 * dt);
    // strongest component away from DC; ties go to the lower bin
    let mut best = 1;
    for k in 2..last {
        if mag[k] > mag[best] {
            best = k;
        }
    }
    if (best as f64) * bin_width < min_frequency || !(mag[best] > mag[best - 1]) {
        return 0.0;
    }
    let (a, b, c) = (mag[best - 1], mag[best], mag[best + 1]);
    let den = a - 2.0 * b + c;
    let offset = if den != 0.0 { (0.5 * (a - c) / den).clamp(-0.5, 0.5) } else { 0.0 };
    (best as f64 + offset) * bin_width
}

// Chevron curvature separating one-photon (1) from two-photon (4) transitions.
const ONE_PHOTON_MAX_CURVATURE: f64 = 2.0;

// Flank columns down to this fraction of the peak contrast enter the chevron fit.
const FIT_LEVEL: f64 = 0.25;

// Relative residual above which the chevron fit is discarded.
const MAX_FIT_MISFIT: f64 = 0.1;

struct ChevronFit {
    rabi: f64,
    resonance: f64,
    curvature: f64,
}

/// Quadratic fit of f² against drive frequency across a chevron. Detuned
/// columns oscillate at sqrt(Ω² + c(ω − ω_r)²), with c = 1 for one-photon and
/// c = 4 for two-photon transitions. Returns the fit when it has a positive
/// minimum inside the fitted columns.
fn chevron_fit(freqs: &[f64], oscillations: &[f64]) -> Option<ChevronFit> {
    let points: Vec<(f64, f64)> = freqs
        .iter()
        .zip(oscillations)
        .filter(|(_, f)| **f > 0.0)
        .map(|(w, f)| (*w, f * f))
        .collect();
    if points.len() < 4 {
        return None;
    }
    let origin = points.iter().map(|p| p.0).sum::<f64>() / points.len() as f64;
    let scale = points.iter().map(|p| (p.0 - origin).abs()).fold(0.0, f64::max);
    let x = Array2::from_shape_fn((points.len(), 3), |(r, k)| ((points[r].0 - origin) / scale).powi(k as i32));
    let y = Array1::from_iter(points.iter().map(|p| p.1));
    let coef = x.t().dot(&x).solve_into(x.t().dot(&y)).ok()?;
    let (a, b, c) = (coef[0], coef[1], coef[2]);
    if !(c > 0.0) {
        return None;
    }
    let vertex = -b / (2.0 * c);
    let minimum = a - b * b / (4.0 * c);
    let fitted = x.dot(&coef);
    let misfit = (&fitted - &y).mapv(|r| r * r).sum().sqrt() / y.mapv(|v| v * v).sum().sqrt();
    (vertex.abs() <= 1.0 && minimum > 0.0 && misfit <= MAX_FIT_MISFIT).then(|| ChevronFit {
        rabi: minimum.sqrt(),
        resonance: origin + vertex * scale,
        curvature: c / (scale * scale),
    })
}

// Observed contrast may exceed the single-TLS probe bound by this factor.
const CONTRAST_SLACK: f64 = 2.0;

/// Largest contrast pulse B can show for a TLS of coupling `g` and detuning
/// `delta`: one minus the π-pulse transfer when the qubit is shifted by the
/// dispersive shift of the fully excited TLS.
fn probe_contrast_bound(g: f64, delta: f64, anharmonicity: f64, probe: &PulseBCalibration) -> Option<f64> {
    let shift = shift_delta_omega(g, delta, anharmonicity, 0.0).ok()?;
    let a = probe.amplitude;
    let generalized = (a * a + shift * shift).sqrt();
    let transfer = a * a / (generalized * generalized) * (PI * generalized * probe.duration).sin().powi(2);
    Some(1.0 - transfer)
}

struct Peak {
    index: usize,
    center: f64,
    // columns of the flanks used for the oscillation fit
    lo: usize,
    hi: usize,
}

// Columns reachable from `peak` by non-increasing steps that stay above `level`.
fn monotone_span(contrast: &[f64], peak: usize, level: f64) -> (usize, usize) {
    let mut lo = peak;
    while lo > 0 && contrast[lo - 1] > level && contrast[lo - 1] <= contrast[lo] {
        lo -= 1;
    }
    let mut hi = peak;
    while hi + 1 < contrast.len() && contrast[hi + 1] > level && contrast[hi + 1] <= contrast[hi] {
        hi += 1;
    }
    (lo, hi)
}

fn find_peaks(contrast: &[f64], freqs: &[f64], settings: &FeatureSettings) -> Vec<Peak> {
    let n = contrast.len();
    let mut peaks = Vec::new();
    for i in 0..n {
        let c = contrast[i];
        let rises = i == 0 || c > contrast[i - 1];
        let holds = i + 1 == n || c >= contrast[i + 1];
        if !(rises && holds && c >= settings.contrast_threshold) {
            continue;
        }
        // prominence over the lowest point before a higher column or the edge
        let mut left_min = c;
        for j in (0..i).rev() {
            if contrast[j] > c {
                break;
            }
            left_min = left_min.min(contrast[j]);
        }
        let mut right_min = c;
        for &v in &contrast[i + 1..] {
            if v > c {
                break;
            }
            right_min = right_min.min(v);
        }
        if c - left_min.max(right_min) < settings.min_prominence {
            continue;
        }
        // centroid of the excess over half maximum along the monotone flanks
        let half = 0.5 * c;
        let (lo, hi) = monotone_span(contrast, i, half);
        let (mut weight, mut moment) = (0.0, 0.0);
        for j in lo..=hi {
            let w = contrast[j] - half;
            weight += w;
            moment += w * freqs[j];
        }
        let center = if weight > 0.0 { moment / weight } else { freqs[i] };
        let (lo, hi) = monotone_span(contrast, i, FIT_LEVEL * c);
        peaks.push(Peak { index: i, center, lo, hi });
    }
    peaks
}

/// Extracts and classifies the features of a map. Only the transmon
/// parameters, the pulse-B calibration and the pulse-A amplitude recorded in
/// the map are used; its TLS parameters are ignored.
///
/// Classification, in order: near the dressed qubit (or a chevron resonating
/// there) is QUBIT_10; near ω_q − U/2 is QUBIT_20; a one-photon chevron whose
/// inversion stays in the dispersive regime, and whose implied qubit shift can
/// produce the observed contrast, is TLS_01; a feature where a
/// TLS_01 candidate predicts its |11⟩ feature is TLS_11; the rest is UNKNOWN.
pub fn extract_features(map: &OmegaTMap, settings: &FeatureSettings) -> Vec<MapFeature> {
    let grid = &map.grid;
    let contrast = contrast_profile(map);
    let peaks = find_peaks(&contrast, &grid.frequencies, settings);

    let step = match grid.frequency_step() {
        s if s > 0.0 => s,
        _ => 1e6,
    };
    let proximity = settings.proximity_steps * step;
    let transmon = &map.spec.transmon;
    let dressed_qubit = map.calibration.frequency;
    let two_photon = transmon.frequency - transmon.anharmonicity / 2.0;
    let two_photon_window = proximity + (dressed_qubit - transmon.frequency).abs();
    let min_frequency = settings.min_periods / (grid.n_time() as f64 * grid.dt);

    let mut features = Vec::with_capacity(peaks.len());
    // (ω_k, g) of every TLS_01 candidate
    let mut inverted = Vec::with_capacity(peaks.len());
    for p in &peaks {
        let column_frequency = |j: usize| {
            dominant_frequency(&map.values.row(j).to_vec(), grid.dt, settings.zero_padding, min_frequency)
        };
        let at_peak = column_frequency(p.index);
        let flank: Vec<f64> = (p.lo..=p.hi).map(column_frequency).collect();
        // the resonant column oscillates slowest; a fit above it is off
        let fit = chevron_fit(&grid.frequencies[p.lo..=p.hi], &flank)
            .filter(|f| at_peak == 0.0 || f.rabi <= at_peak * (1.0 + MAX_FIT_MISFIT));
        let oscillation = fit.as_ref().map_or(at_peak, |f| f.rabi);
        // a bump on the flank of the qubit chevron resonates at the qubit
        let resonance = fit.as_ref().map_or(p.center, |f| f.resonance);
        let two_photon_shape = fit.as_ref().is_some_and(|f| f.curvature > ONE_PHOTON_MAX_CURVATURE);

        let mut estimate = None;
        let kind = if (p.center - dressed_qubit).abs() <= proximity || (resonance - dressed_qubit).abs() <= proximity {
            FeatureKind::Qubit10
        } else if (p.center - two_photon).abs() <= two_photon_window {
            FeatureKind::Qubit20
        } else if oscillation == 0.0 || two_photon_shape {
            FeatureKind::Unknown
        } else {
            estimate = invert_tls_01(p.center, oscillation, transmon, map.pump_amplitude, &settings.estimate)
                .ok()
                .filter(|&(wk, g, _)| {
                    probe_contrast_bound(g, transmon.frequency - wk, transmon.anharmonicity, &map.calibration)
                        .is_some_and(|bound| contrast[p.index] <= CONTRAST_SLACK * bound + settings.contrast_threshold)
                });
            if estimate.is_some() {
                FeatureKind::Tls01
            } else {
                FeatureKind::Unknown
            }
        };
        inverted.push(estimate.map(|(wk, g, _)| (wk, g)));
        features.push(MapFeature {
            center_frequency: p.center,
            oscillation_frequency: oscillation,
            contrast: contrast[p.index],
            kind,
        });
    }

    // The |11⟩ feature lies near the midpoint of qubit and TLS, shifted by
    // g²/(U − Δ̃); the shift is also the slack, since it diverges as the |11⟩
    // and |20⟩ levels cross.
    let mut order: Vec<usize> = (0..features.len()).filter(|&i| inverted[i].is_some()).collect();
    order.sort_by(|&a, &b| features[b].contrast.total_cmp(&features[a].contrast));
    for &x in &order {
        let Some((wk, g)) = inverted[x] else { continue };
        if features[x].kind != FeatureKind::Tls01 {
            continue;
        }
        let wq = transmon.frequency;
        let midpoint = 0.5 * (wq + wk);
        let shift = delta_tilde(wq - wk, g)
            .and_then(|dt| freq_11(wq, wk, g, transmon.anharmonicity, dt))
            .map_or(0.0, |f| f - midpoint);
        let window = proximity + shift.abs();
        let x_distance = (features[x].center_frequency - dressed_qubit).abs();
        for (y, candidate) in features.iter_mut().enumerate() {
            if y != x
                && matches!(candidate.kind, FeatureKind::Tls01 | FeatureKind::Unknown)
                && (candidate.center_frequency - midpoint).abs() <= window
                && (candidate.center_frequency - dressed_qubit).abs() < x_distance
            {
                candidate.kind = FeatureKind::Tls11;
            }
        }
    }
    features
}
