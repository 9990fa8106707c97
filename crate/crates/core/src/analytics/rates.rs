//! Incoherent rate model of a driven transmon-TLS pair.
//!
//! Three populations (ground, transmon excited, TLS excited) exchange
//! probability through drive-induced rates c1 (ground ↔ qubit), c2
//! (ground ↔ TLS), c3 (qubit ↔ TLS) and decay with γ_q, γ_k.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::{delta_tilde, rabi_01_signed, AnalyticsError, DecayRates};
use crate::model::SystemSpec;

/// Rate coefficients in 1/s, together with the decay rates they pair with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateCoefficients {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub gamma_q: f64,
    pub gamma_k: f64,
}

impl RateCoefficients {
    /// Coefficients from frequencies in Hz (coupling, amplitude, Δ = ω_q − ω_k)
    /// and rates in 1/s.
    pub fn from_parameters(
        coupling: f64,
        amplitude: f64,
        delta: f64,
        drive_factor: f64,
        rates: &DecayRates,
    ) -> Result<Self, AnalyticsError> {
        rates.validate()?;
        let dt = delta_tilde(delta, coupling)?;
        let rabi = TAU * rabi_01_signed(coupling, dt, drive_factor, amplitude)?;
        let (g, a, d) = (TAU * coupling, TAU * amplitude, TAU * delta);
        if g.abs() > 0.1 * d.abs() || a.abs() > 0.1 * d.abs() {
            log::warn!(
                "rate model assumes g, A << Δ; got g/Δ = {:.3}, A/Δ = {:.3}",
                coupling / delta,
                amplitude / delta
            );
        }
        let transverse_q = rates.gamma_q + rates.kappa_q;
        let transverse_k = rates.gamma_k + rates.kappa_k;
        let total = rates.total();
        let dispersive = 2.0 * g * g / d;
        Ok(Self {
            c1: (a / 2.0).powi(2) * transverse_q / (d * d + transverse_q * transverse_q),
            c2: guarded_ratio(rabi * rabi * transverse_k, dispersive * dispersive + transverse_k * transverse_k),
            c3: guarded_ratio(g * g * total, d * d + total * total),
            gamma_q: rates.gamma_q,
            gamma_k: rates.gamma_k,
        })
    }

    fn max_rate(&self) -> f64 {
        [self.c1, self.c2, self.c3, self.gamma_q, self.gamma_k]
            .into_iter()
            .fold(0.0, f64::max)
    }

    fn derivative(&self, p: &RatePopulations) -> RatePopulations {
        let RateCoefficients {
            c1,
            c2,
            c3,
            gamma_q,
            gamma_k,
        } = *self;
        RatePopulations {
            ground: gamma_q * p.qubit + gamma_k * p.tls + c1 * (p.qubit - p.ground) + c2 * (p.tls - p.ground),
            qubit: -gamma_q * p.qubit + c1 * (p.ground - p.qubit) + c3 * (p.tls - p.qubit),
            tls: -gamma_k * p.tls + c2 * (p.ground - p.tls) + c3 * (p.qubit - p.tls),
        }
    }
}

// 0/0 happens when a drive term is absent and its linewidth vanishes.
fn guarded_ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Coefficients for TLS `k` of `spec` driven with `amplitude` (Hz).
pub fn rate_coefficients(spec: &SystemSpec, k: usize, amplitude: f64) -> Result<RateCoefficients, AnalyticsError> {
    let rates = DecayRates::from_spec(spec, k)?;
    let tls = &spec.tls[k];
    RateCoefficients::from_parameters(tls.coupling, amplitude, spec.detuning(k), tls.drive_factor, &rates)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePopulations {
    pub ground: f64,
    pub qubit: f64,
    pub tls: f64,
}

impl RatePopulations {
    pub fn ground_state() -> Self {
        Self {
            ground: 1.0,
            qubit: 0.0,
            tls: 0.0,
        }
    }

    pub fn total(&self) -> f64 {
        self.ground + self.qubit + self.tls
    }

    fn axpy(&self, h: f64, d: &Self) -> Self {
        Self {
            ground: self.ground + h * d.ground,
            qubit: self.qubit + h * d.qubit,
            tls: self.tls + h * d.tls,
        }
    }
}

/// Integrates the rate equations from `initial` with fixed-step RK4 and
/// returns the populations at each of the non-decreasing `times`.
pub fn rate_evolve(
    coefficients: &RateCoefficients,
    initial: RatePopulations,
    times: &[f64],
) -> Result<Vec<RatePopulations>, AnalyticsError> {
    if (initial.total() - 1.0).abs() > 1e-9 || [initial.ground, initial.qubit, initial.tls].iter().any(|p| *p < 0.0) {
        return Err(AnalyticsError::InvalidArgument {
            name: "initial",
            value: initial.total(),
            reason: "populations must lie on the probability simplex",
        });
    }
    let max_step = match coefficients.max_rate() {
        r if r > 0.0 => 1.0 / (100.0 * r),
        _ => f64::INFINITY,
    };
    let mut out = Vec::with_capacity(times.len());
    let (mut t, mut p) = (0.0, initial);
    for &target in times {
        if !(target >= t) {
            return Err(AnalyticsError::InvalidArgument {
                name: "times",
                value: target,
                reason: "output times must be non-negative and non-decreasing",
            });
        }
        let span = target - t;
        let steps = if span > 0.0 { (span / max_step).ceil().max(1.0) as usize } else { 0 };
        let h = if steps > 0 { span / steps as f64 } else { 0.0 };
        for _ in 0..steps {
            let k1 = coefficients.derivative(&p);
            let k2 = coefficients.derivative(&p.axpy(h / 2.0, &k1));
            let k3 = coefficients.derivative(&p.axpy(h / 2.0, &k2));
            let k4 = coefficients.derivative(&p.axpy(h, &k3));
            p = RatePopulations {
                ground: p.ground + h / 6.0 * (k1.ground + 2.0 * k2.ground + 2.0 * k3.ground + k4.ground),
                qubit: p.qubit + h / 6.0 * (k1.qubit + 2.0 * k2.qubit + 2.0 * k3.qubit + k4.qubit),
                tls: p.tls + h / 6.0 * (k1.tls + 2.0 * k2.tls + 2.0 * k3.tls + k4.tls),
            };
        }
        t = target;
        out.push(p);
    }
    Ok(out)
}

/// Stationary transmon population of the rate equations.
pub fn rate_steady_full(c: &RateCoefficients) -> Result<f64, AnalyticsError> {
    let RateCoefficients {
        c1,
        c2,
        c3,
        gamma_q: gq,
        gamma_k: gk,
    } = *c;
    let num = c1 * c2 + c1 * c3 + c1 * gk + c2 * c3;
    let den = 3.0 * c1 * c2 + 3.0 * c1 * c3 + 2.0 * c1 * gk + 3.0 * c2 * c3 + 2.0 * c2 * gq + c3 * gk + c3 * gq + gk * gq;
    stationary_ratio(num, den)
}

/// The closed form in the literature for the same quantity. Its denominator
/// has c2(3c3 + γ_q + γ_k) where the fixed point has c3(3c2 + γ_q + γ_k), so
/// it differs from [`rate_steady_full`] whenever c2 ≠ c3.
pub fn rate_steady_printed(c: &RateCoefficients) -> Result<f64, AnalyticsError> {
    let RateCoefficients {
        c1,
        c2,
        c3,
        gamma_q: gq,
        gamma_k: gk,
    } = *c;
    let num = c2 * c3 + c1 * (c2 + c3 + gk);
    let den = 3.0 * c1 * (c2 + c3) + 2.0 * c1 * gk + gq * (2.0 * c2 + gk) + c2 * (3.0 * c3 + gq + gk);
    stationary_ratio(num, den)
}

fn stationary_ratio(num: f64, den: f64) -> Result<f64, AnalyticsError> {
    if den > 0.0 && den.is_finite() {
        Ok(num / den)
    } else {
        Err(AnalyticsError::Pole {
            formula: "rate steady state",
            reason: "no decay and no drive: stationary state is not unique".into(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use ndarray_linalg::Solve;
    use proptest::prelude::*;

    fn fig3_rates() -> DecayRates {
        DecayRates {
            gamma_q: 1e5,
            kappa_q: 2e6,
            gamma_k: 1.25e6,
            kappa_k: 1.25e6,
        }
    }

    // stationary point from the generator with one row replaced by normalization
    fn linear_solve_oracle(c: &RateCoefficients) -> [f64; 3] {
        let RateCoefficients {
            c1,
            c2,
            c3,
            gamma_q: gq,
            gamma_k: gk,
        } = *c;
        let m = array![
            [c1, -gq - c1 - c3, c3],
            [c2, c3, -gk - c2 - c3],
            [1.0, 1.0, 1.0],
        ];
        let x = m.solve_into(array![0.0, 0.0, 1.0]).unwrap();
        [x[0], x[1], x[2]]
    }

    #[test]
    fn zero_amplitude_turns_off_drive_rates() {
        let c = RateCoefficients::from_parameters(30e6, 0.0, -80e6, 0.0, &fig3_rates()).unwrap();
        assert_eq!((c.c1, c.c2), (0.0, 0.0));
        assert!(c.c3 > 0.0);
    }

    #[test]
    fn no_decoherence_turns_off_exchange() {
        let none = DecayRates {
            gamma_q: 0.0,
            kappa_q: 0.0,
            gamma_k: 0.0,
            kappa_k: 0.0,
        };
        let c = RateCoefficients::from_parameters(30e6, 16e6, -80e6, 0.0, &none).unwrap();
        assert_eq!(c.c3, 0.0);
        assert_eq!(c.c1, 0.0);
    }

    #[test]
    fn coefficients_use_angular_frequencies() {
        let r = fig3_rates();
        let c = RateCoefficients::from_parameters(10e6, 10e6, -100e6, 0.0, &r).unwrap();
        let (a, d) = (TAU * 10e6, TAU * -100e6);
        let t = r.gamma_q + r.kappa_q;
        assert!((c.c1 - (a / 2.0).powi(2) * t / (d * d + t * t)).abs() < 1e-9 * c.c1);
    }

    #[test]
    fn undriven_qubit_decays_exponentially() {
        let c = RateCoefficients {
            c1: 0.0,
            c2: 0.0,
            c3: 0.0,
            gamma_q: 1e5,
            gamma_k: 1e6,
        };
        let start = RatePopulations {
            ground: 0.0,
            qubit: 1.0,
            tls: 0.0,
        };
        let times = [1e-6, 5e-6, 20e-6];
        let traj = rate_evolve(&c, start, &times).unwrap();
        for (t, p) in times.iter().zip(&traj) {
            assert!((p.qubit - (-1e5 * t).exp()).abs() < 1e-10);
            assert!((p.total() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn long_evolution_reaches_the_fixed_point() {
        let c = RateCoefficients::from_parameters(10e6, 10e6, -100e6, 0.0, &fig3_rates()).unwrap();
        let traj = rate_evolve(&c, RatePopulations::ground_state(), &[2e-4]).unwrap();
        assert!((traj[0].qubit - rate_steady_full(&c).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn rejects_off_simplex_start() {
        let c = RateCoefficients::from_parameters(10e6, 10e6, -100e6, 0.0, &fig3_rates()).unwrap();
        let bad = RatePopulations {
            ground: 0.5,
            qubit: 0.0,
            tls: 0.0,
        };
        assert!(rate_evolve(&c, bad, &[1e-6]).is_err());
        assert!(rate_evolve(&c, RatePopulations::ground_state(), &[2e-6, 1e-6]).is_err());
    }

    #[test]
    fn closed_forms_agree_when_c2_equals_c3() {
        let c = RateCoefficients {
            c1: 0.3,
            c2: 0.7,
            c3: 0.7,
            gamma_q: 0.2,
            gamma_k: 0.2,
        };
        let full = rate_steady_full(&c).unwrap();
        let printed = rate_steady_printed(&c).unwrap();
        assert!((full - printed).abs() < 1e-15);
    }

    #[test]
    fn weak_drive_limit_is_c1_over_gamma_q() {
        let c = RateCoefficients {
            c1: 1e-6,
            c2: 0.0,
            c3: 0.0,
            gamma_q: 1.0,
            gamma_k: 1.0,
        };
        assert!((rate_steady_full(&c).unwrap() - 1e-6).abs() < 1e-11);
    }

    #[test]
    fn undamped_undriven_is_singular() {
        let c = RateCoefficients {
            c1: 0.0,
            c2: 0.0,
            c3: 0.0,
            gamma_q: 0.0,
            gamma_k: 0.0,
        };
        assert!(rate_steady_full(&c).is_err());
    }

    proptest! {
        #[test]
        fn steady_full_matches_linear_solve(
            c1 in 0.0..10.0f64, c2 in 0.0..10.0f64, c3 in 0.0..10.0f64,
            gq in 0.01..10.0f64, gk in 0.01..10.0f64,
        ) {
            let c = RateCoefficients { c1, c2, c3, gamma_q: gq, gamma_k: gk };
            let oracle = linear_solve_oracle(&c);
            prop_assert!((rate_steady_full(&c).unwrap() - oracle[1]).abs() < 1e-9);
        }
    }
}
