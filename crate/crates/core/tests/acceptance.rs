//! End-to-end acceptance checks. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line; exits nonzero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use twotone::analytics::{
    delta_tilde, dominant_frequency, extract_features, freq_01, freq_two_photon, rabi_01, rate_coefficients,
    rate_steady_full, rate_steady_printed, steady_population_approx, DecayRates, FeatureKind, FeatureSettings,
    MapFeature, RateCoefficients,
};
use twotone::io::{sample_tls, DatasetConfig};
use twotone::lindblad::{liouvillian, DensityMatrix, PropagationMethod, POSITIVITY_TOL};
use twotone::model::{build_operators, hamiltonian_rwa, DrivePulse, SystemSpec, TlsParams, TransmonParams, DEFAULT_MAX_DIM};
use twotone::protocol::{
    calibrate_pulse_b, calibrate_pulse_b_best_effort, qubit_population, CalibrationSettings, MapGrid,
    TwoToneExperiment, DEFAULT_PUMP_AMPLITUDE,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn fig2_spec() -> SystemSpec {
    SystemSpec::new(
        TransmonParams::new(7e9, 180e6).with_times(10e-6, 1e-6),
        vec![TlsParams::new(7.08e9, 30e6).with_times(800e-9, 1.6e-6)],
    )
}

// e^M by Taylor series on M / 2^s, squared back s times.
fn taylor_expm(m: &Array2<C64>) -> Array2<C64> {
    let n = m.nrows();
    let norm = m
        .columns()
        .into_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let a = m.mapv(|z| z / 2f64.powi(s));
    let mut term = Array2::<C64>::eye(n);
    let mut sum = term.clone();
    for k in 1..=30 {
        term = term.dot(&a).mapv(|z| z / k as f64);
        sum += &term;
    }
    for _ in 0..s {
        sum = sum.dot(&sum);
    }
    sum
}

fn propagator_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let wq = rng.gen_range(6.5e9..7.5e9);
        let spec = SystemSpec::new(
            TransmonParams::new(wq, rng.gen_range(150e6..250e6))
                .with_times(rng.gen_range(1e-6..20e-6), rng.gen_range(0.5e-6..20e-6)),
            vec![TlsParams::new(wq + rng.gen_range(-300e6..300e6), rng.gen_range(5e6..50e6))
                .with_times(rng.gen_range(0.5e-6..10e-6), rng.gen_range(0.5e-6..30e-6))],
        );
        let ops = build_operators(&spec, DEFAULT_MAX_DIM).unwrap();
        let pulse = DrivePulse::new(rng.gen_range(1e6..20e6), wq + rng.gen_range(-200e6..200e6), 0.0);
        let l = liouvillian(&spec, &ops, &hamiltonian_rwa(&spec, &ops, &pulse)).unwrap();
        let t = rng.gen_range(10e-9..200e-9);
        let eig = l.propagator_with(t, PropagationMethod::Eigen).unwrap();
        let oracle = taylor_expm(&l.matrix().mapv(|z| z * t));
        let err = (&eig - &oracle).iter().map(|z| z.norm()).fold(0.0, f64::max);
        worst = worst.max(err);
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst < 1e-8 && secs < 5.0,
        format!("max element error {worst:.2e} (< 1e-8), {secs:.2} s (< 5 s)"),
    )
}

fn physicality() -> Outcome {
    let spec = fig2_spec();
    let ops = build_operators(&spec, DEFAULT_MAX_DIM).unwrap();
    let drive = freq_01(7.08e9, 30e6, -80e6).unwrap();
    let h = hamiltonian_rwa(&spec, &ops, &DrivePulse::new(DEFAULT_PUMP_AMPLITUDE, drive, 0.0));
    let l = liouvillian(&spec, &ops, &h).unwrap();
    let rho0 = DensityMatrix::ground(spec.dim());
    let (mut trace, mut herm, mut min_eig) = (0.0_f64, 0.0_f64, f64::INFINITY);
    for i in 1..=100 {
        let rho = l.evolve(&rho0, i as f64 * 1e-6).unwrap();
        trace = trace.max((rho.trace() - C64::new(1.0, 0.0)).norm());
        herm = herm.max(rho.hermiticity_error());
        min_eig = min_eig.min(rho.min_eigenvalue().unwrap());
    }
    outcome(
        trace < 1e-9 && herm < 1e-9 && min_eig > -POSITIVITY_TOL,
        format!("over 100 us: trace drift {trace:.1e} (< 1e-9), Hermiticity {herm:.1e}, min eigenvalue {min_eig:.1e}"),
    )
}

fn find(features: &[MapFeature], kind: FeatureKind, near: f64) -> Option<&MapFeature> {
    features
        .iter()
        .filter(|f| f.kind == kind)
        .min_by(|a, b| (a.center_frequency - near).abs().total_cmp(&(b.center_frequency - near).abs()))
}

fn fig2() -> Outcome {
    let spec = fig2_spec();
    let start = Instant::now();
    let cal = calibrate_pulse_b(&spec, &CalibrationSettings::default()).unwrap();
    let grid = MapGrid::default_grid();
    let exp = TwoToneExperiment::new(spec.clone(), cal, DEFAULT_PUMP_AMPLITUDE).unwrap();
    let map = exp.generate_map(&grid).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let features = extract_features(&map, &FeatureSettings::default());

    let delta = spec.detuning(0);
    let eq8 = freq_01(7.08e9, 30e6, delta).unwrap();
    let eq7 = freq_two_photon(7e9, 180e6, 30e6, delta).unwrap();
    let tls01 = find(&features, FeatureKind::Tls01, eq8).map(|f| f.center_frequency);
    let two = find(&features, FeatureKind::Qubit20, eq7).map(|f| f.center_frequency);
    let a = tls01.is_some_and(|c| (c - eq8).abs() <= 2e6);
    let b = two.is_some_and(|c| (c - eq7).abs() <= 2e6);

    // decoherence-free column exactly at the predicted transition
    let free = TwoToneExperiment::new(spec.decoherence_free(), cal, DEFAULT_PUMP_AMPLITUDE).unwrap();
    let column = free.map_column(eq8, &grid).unwrap();
    let osc = dominant_frequency(&column, grid.dt, 8, 0.0);
    let eq9 = rabi_01(30e6, delta_tilde(delta, 30e6).unwrap(), 0.0, DEFAULT_PUMP_AMPLITUDE).unwrap();
    let c = (osc - eq9).abs() / eq9 < 0.10;

    let mhz = |x: Option<f64>| x.map_or("none".into(), |v| format!("{:.3}", v / 1e6));
    outcome(
        a && b && c && secs < 120.0,
        format!(
            "(a) TLS_01 at {} MHz vs {:.3} [{}] (b) |20> at {} MHz vs {:.3} [{}] (c) {:.3} MHz vs {:.3} ({:.1}%) [{}], map {:.2} s",
            mhz(tls01),
            eq8 / 1e6,
            if a { "ok" } else { "off" },
            mhz(two),
            eq7 / 1e6,
            if b { "ok" } else { "off" },
            osc / 1e6,
            eq9 / 1e6,
            100.0 * (osc - eq9).abs() / eq9,
            if c { "ok" } else { "off" },
            secs
        ),
    )
}

fn lindblad_long_time(spec: &SystemSpec, amplitude: f64, drive: f64, t: f64) -> f64 {
    let ops = build_operators(spec, DEFAULT_MAX_DIM).unwrap();
    let h = hamiltonian_rwa(spec, &ops, &DrivePulse::new(amplitude, drive, 0.0));
    let l = liouvillian(spec, &ops, &h).unwrap();
    qubit_population(&l.evolve(&DensityMatrix::ground(spec.dim()), t).unwrap(), spec)
}

fn fig3_steady() -> Outcome {
    let spec = fig2_spec();
    let (g, delta) = (30e6, spec.detuning(0));
    let rates = DecayRates::from_spec(&spec, 0).unwrap();
    let dt = delta_tilde(delta, g).unwrap();
    let eq12 = steady_population_approx(g, DEFAULT_PUMP_AMPLITUDE, dt, &rates).unwrap();
    let drive = freq_01(7.08e9, g, delta).unwrap();
    let long = lindblad_long_time(&spec, DEFAULT_PUMP_AMPLITUDE, drive, 20e-6);
    let ten_gamma = lindblad_long_time(&spec, DEFAULT_PUMP_AMPLITUDE, drive, 10.0 / rates.total());
    let lindblad_err = (long - eq12).abs() / eq12;

    // rate-model closed form in the weak-coupling regime: g = A = Δ/10 at
    // equal TLS and qubit linewidths, plus a seeded sweep of that regime
    let weak = |g: f64, a: f64, delta: f64, rates: &DecayRates| -> (f64, f64, f64) {
        let c = RateCoefficients::from_parameters(g, a, delta, 0.0, rates).unwrap();
        let e12 = steady_population_approx(g, a, delta_tilde(delta, g).unwrap(), rates).unwrap();
        (rate_steady_printed(&c).unwrap(), rate_steady_full(&c).unwrap(), e12)
    };
    let equal = DecayRates {
        gamma_q: 1e5,
        kappa_q: 2e6,
        gamma_k: 1e5,
        kappa_k: 2e6,
    };
    let (printed, fixed, e12_weak) = weak(10e6, 10e6, -100e6, &equal);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = (printed - e12_weak).abs() / e12_weak;
    let mut samples = 0;
    while samples < 200 {
        let delta: f64 = -rng.gen_range(50e6..300e6);
        let g = rng.gen_range(0.02..0.1) * delta.abs();
        let a = rng.gen_range(0.02..0.1) * delta.abs();
        let gamma = 10f64.powf(rng.gen_range(3.0..6.5));
        let r = DecayRates {
            gamma_q: gamma,
            kappa_q: 10f64.powf(rng.gen_range(3.0..7.0)),
            gamma_k: gamma,
            kappa_k: 10f64.powf(rng.gen_range(3.0..7.0)),
        };
        let c = RateCoefficients::from_parameters(g, a, delta, 0.0, &r).unwrap();
        if c.c2 < 10.0 * c.gamma_q || c.c3 < 10.0 * c.c1 {
            continue;
        }
        let (p, _, e) = weak(g, a, delta, &r);
        worst = worst.max((p - e).abs() / e);
        samples += 1;
    }
    let fig3_rates = rate_coefficients(&spec, 0, DEFAULT_PUMP_AMPLITUDE).unwrap();
    outcome(
        lindblad_err < 0.05 && worst < 0.10,
        format!(
            "master equation at 20 us {long:.4} vs closed form {eq12:.4} ({:.1}% < 5%; {ten_gamma:.4} at 10/Gamma); \
             rate closed form vs closed form, g = A = |Delta|/10: {printed:.4} vs {e12_weak:.4}, worst over 200 regime samples {:.1}% (< 10%); \
             rate fixed point {fixed:.4}, at the figure's rates {:.4} / {:.4}",
            100.0 * lindblad_err,
            100.0 * worst,
            rate_steady_printed(&fig3_rates).unwrap(),
            rate_steady_full(&fig3_rates).unwrap(),
        ),
    )
}

fn fast_formula() -> Outcome {
    let spec = fig2_spec();
    let cal = calibrate_pulse_b(&spec, &CalibrationSettings::default()).unwrap();
    let exp = TwoToneExperiment::new(spec, cal, DEFAULT_PUMP_AMPLITUDE).unwrap();
    let grid = MapGrid::uniform(7.0e9, 10e6, 10, 50e-9, 10, false).unwrap();
    let map = exp.generate_map(&grid).unwrap();
    let mut worst = 0.0_f64;
    for (i, &f) in grid.frequencies.iter().enumerate() {
        for (j, &t) in grid.durations.iter().enumerate() {
            worst = worst.max((map.values[[i, j]] - exp.run_sequence(f, t).unwrap()).abs());
        }
    }
    outcome(worst < 1e-9, format!("max cell difference {worst:.2e} (< 1e-9) on 10 x 10"))
}

fn decoherence_invariance() -> Outcome {
    let spec = fig2_spec();
    let cal = calibrate_pulse_b(&spec, &CalibrationSettings::default()).unwrap();
    let grid = MapGrid::default_grid();
    let settings = FeatureSettings::default();
    let features = |s: SystemSpec| {
        let map = TwoToneExperiment::new(s, cal, DEFAULT_PUMP_AMPLITUDE)
            .unwrap()
            .generate_map(&grid)
            .unwrap();
        extract_features(&map, &settings)
    };
    let with = features(spec.clone());
    let without = features(spec.decoherence_free());
    let step = grid.frequency_step();
    let mut worst = 0.0_f64;
    let mut missing = Vec::new();
    for f in &with {
        match without
            .iter()
            .map(|o| (o.center_frequency - f.center_frequency).abs())
            .min_by(f64::total_cmp)
        {
            Some(d) => worst = worst.max(d),
            None => missing.push(f.center_frequency),
        }
    }
    let listing = |fs: &[MapFeature]| {
        fs.iter()
            .map(|f| format!("{:.1}", f.center_frequency / 1e6))
            .collect::<Vec<_>>()
            .join(", ")
    };
    outcome(
        missing.is_empty() && worst <= step && !with.is_empty(),
        format!(
            "largest center shift {:.2} MHz (<= {:.0} MHz); with rates [{}], without [{}]",
            worst / 1e6,
            step / 1e6,
            listing(&with),
            listing(&without)
        ),
    )
}

fn estimator_round_trip() -> Outcome {
    let ranges = DatasetConfig {
        n_maps: 50,
        n_tls: 1,
        max_coupling_ratio: Some(0.3),
        ..DatasetConfig::default()
    };
    let grid = MapGrid::default_grid();
    let step = grid.frequency_step();
    let settings = FeatureSettings::default();
    let transmon = TransmonParams::new(7e9, 180e6).with_times(10e-6, 1e-6);
    let mut passed = 0;
    let mut misses = Vec::new();
    for i in 0..50u64 {
        let label = sample_tls(&ranges, transmon.frequency, 7, i).unwrap()[0];
        let spec = SystemSpec::new(transmon, vec![label.params()]);
        let (cal, _) = calibrate_pulse_b_best_effort(&spec, &CalibrationSettings::default()).unwrap();
        let map = TwoToneExperiment::new(spec, cal, DEFAULT_PUMP_AMPLITUDE)
            .unwrap()
            .generate_map(&grid)
            .unwrap();
        let report = twotone::io::estimate_report(&map, &settings);
        let best = report
            .estimates
            .iter()
            .max_by(|a, b| a.source_feature.contrast.total_cmp(&b.source_feature.contrast));
        let ok = best.is_some_and(|e| {
            (e.omega_k_hat - label.frequency).abs() <= 2.0 * step
                && (e.g_k_hat - label.coupling).abs() <= 0.2 * label.coupling
        });
        if ok {
            passed += 1;
        } else {
            misses.push(format!(
                "#{i} {:.1}/{:.1}",
                label.frequency / 1e6,
                label.coupling / 1e6
            ));
        }
    }
    outcome(
        passed * 10 >= 50 * 9,
        format!(
            "{passed}/50 recovered (>= 45); misses (MHz, f/g): {}",
            misses.join(" ")
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("propagator oracle", propagator_oracle),
        ("physicality", physicality),
        ("fig2 reproduction", fig2),
        ("fig3 steady state", fig3_steady),
        ("fast-formula equivalence", fast_formula),
        ("decoherence invariance", decoherence_invariance),
        ("estimator round-trip", estimator_round_trip),
    ];
    let mut failures = 0;
    for (name, run) in criteria {
        let o = run();
        if !o.pass {
            failures += 1;
        }
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
