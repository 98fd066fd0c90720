//! Acceptance suite: one test per release criterion. Each test prints a
//! PASS line when its criterion holds at the stated tolerance.

use enose_cli::commands::{cmd_simulate, sweep_table};
use enose_cli::config::RunConfig;
use enose_core::can::{decode, encode, CanFrame, SimBus, TelemetryMessage};
use enose_core::classifier::{
    classify, fit_concentration, predict_ratios, ClassifyOptions, FingerprintLibrary,
};
use enose_core::daq::extract_features;
use enose_core::gas::{
    loglog_slope, resistance_from_output, steady_state_ratio, steady_state_resistance,
    step_response, EnvConditions, GasMixture, GasSpecies, SensorTrace,
};
use enose_core::protocol::{clamp_flow, scripted_run, MfcConfig, PhaseDurations, ProtocolPhase};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

fn pass(n: u32, what: &str) {
    println!("criterion {}: PASS - {}", n, what);
}

/// Sensitivity-curve reproduction: log-log tail slope equals the
/// configured exponent within 2%, every Rs/Ro column strictly
/// decreasing.
#[test]
fn criterion_1_sensitivity_curve_slopes() {
    let cfg = RunConfig::default().resolve().unwrap();
    for (s, spec) in cfg.sensors.iter().enumerate() {
        for gas in GasSpecies::ALL {
            let sens = spec.sensitivity[gas.code() as usize];
            let scale = spec.c_ref * sens.gain.powf(-1.0 / sens.exponent);
            let table = sweep_table(&cfg, gas, 1e3 * scale, 1e5 * scale, 50).unwrap();
            let column: Vec<f64> = table.ratios.iter().map(|row| row[s]).collect();
            for w in column.windows(2) {
                assert!(w[1] < w[0], "{} {}: ratio column not strictly decreasing", spec.id, gas);
            }
            let slope = loglog_slope(&table.concentrations, &column);
            let rel = (slope + sens.exponent).abs() / sens.exponent;
            assert!(
                rel < 0.02,
                "{} {}: tail slope {:.5} vs -{:.5} (rel err {:.4})",
                spec.id,
                gas,
                slope,
                sens.exponent,
                rel
            );
        }
    }
    pass(1, "all 25 (sensor, gas) tail slopes within 2% of -alpha, ratios strictly decreasing");
}

/// Output-voltage reproduction: V_RL strictly increasing with
/// concentration and invertible back to Rs within 1e-9 relative error.
#[test]
fn criterion_2_output_voltage_curves() {
    let cfg = RunConfig::default().resolve().unwrap();
    for gas in GasSpecies::ALL {
        let table = sweep_table(&cfg, gas, 10.0, 1e5, 60).unwrap();
        for s in 0..5 {
            let column: Vec<f64> = table.v_rl.iter().map(|row| row[s]).collect();
            for w in column.windows(2) {
                assert!(w[1] > w[0], "V_RL column not strictly increasing");
            }
            for (i, &c) in table.concentrations.iter().enumerate() {
                let mix = GasMixture::single(gas, c).unwrap();
                let rs = steady_state_resistance(&cfg.sensors[s], &mix, &cfg.env);
                let back = resistance_from_output(table.v_rl[i][s], &cfg.circuits[s]).unwrap();
                assert!(
                    (back - rs).abs() / rs < 1e-9,
                    "round trip error {} at {} ppm",
                    (back - rs).abs() / rs,
                    c
                );
            }
        }
    }
    pass(2, "V_RL strictly increasing and divider round-trips within 1e-9");
}

/// First-order dynamics: monotone approach, t90 = tau ln 10 within one
/// sample period, recovery to within 5% of baseline after 5 tau_fall.
#[test]
fn criterion_3_response_dynamics() {
    let cfg = RunConfig::default().resolve().unwrap();
    let mix = GasMixture::single(GasSpecies::Methane, 500.0).unwrap();
    let schedule =
        enose_core::protocol::exposure_schedule(&cfg.durations, &mix, cfg.measure_duration)
            .unwrap();
    let total = cfg.durations.scripted_total() + cfg.measure_duration;
    let gas_on = cfg.durations.evacuate;
    let gas_off = gas_on + cfg.durations.intake + cfg.durations.stabilize + cfg.measure_duration;
    for (i, spec) in cfg.sensors.iter().enumerate() {
        let trace = step_response(
            spec,
            &schedule,
            &cfg.env,
            &cfg.circuits[i],
            cfg.sample_period,
            total,
        )
        .unwrap();
        let slice = |from: f64, to: f64| SensorTrace {
            sample_period: trace.sample_period,
            samples: trace
                .samples
                .iter()
                .filter(|s| s.t >= from - 1e-9 && s.t <= to + 1e-9)
                .cloned()
                .collect(),
        };
        let exposure = slice(gas_on, gas_off);
        let recovery = slice(gas_off, total);
        for w in exposure.samples.windows(2) {
            assert!(w[1].resistance <= w[0].resistance, "exposure not monotone");
        }
        let feats = extract_features(&exposure, &recovery, spec.r0_clean_air).unwrap();
        let expected = spec.tau_rise * 10f64.ln();
        assert!(
            (feats.response_time_t90 - expected).abs() <= cfg.sample_period + 1e-9,
            "{}: t90 {} vs tau ln10 = {}",
            spec.id,
            feats.response_time_t90,
            expected
        );
        let t_check = gas_off + 5.0 * spec.tau_fall;
        let r_check = trace
            .samples
            .iter()
            .find(|s| s.t >= t_check)
            .unwrap()
            .resistance;
        let rel = (r_check - spec.r0_clean_air).abs() / spec.r0_clean_air;
        assert!(rel < 0.05, "{}: {} from baseline after 5 tau_fall", spec.id, rel);
    }
    pass(3, "monotone approach, t90 = tau ln10 within one sample, 5% recovery after 5 tau_fall");
}

/// Protocol fidelity: phase durations, illegal-transition rejection,
/// actuator/phase consistency, MFC clamping.
#[test]
fn criterion_4_protocol_fidelity() {
    let durations = PhaseDurations::default();
    let rows = scripted_run(
        &durations,
        GasMixture::single(GasSpecies::Methane, 500.0).unwrap(),
        0.0,
        1.0,
    )
    .unwrap();
    let at = |phase: ProtocolPhase| rows.iter().find(|r| r.phase == phase).unwrap().t_s;
    assert_eq!(at(ProtocolPhase::Intake) - at(ProtocolPhase::Evacuate), 10.0);
    assert_eq!(at(ProtocolPhase::Stabilize) - at(ProtocolPhase::Intake), 10.0);
    assert_eq!(at(ProtocolPhase::Measure) - at(ProtocolPhase::Stabilize), 60.0);

    // every reachable state carries the actuator pattern of its phase,
    // and out-of-phase commands are rejected
    use enose_core::protocol::{actuators_for, advance, end_measurement, start_run, ChamberState};
    let mut state = ChamberState::idle();
    let mut visited = std::collections::HashSet::new();
    state = start_run(&state, GasMixture::clean_air()).unwrap();
    for _ in 0..2000 {
        visited.insert(state.phase);
        assert_eq!(
            (state.valve1_open, state.valve2_open, state.pump_on),
            actuators_for(state.phase)
        );
        if state.phase != ProtocolPhase::Idle {
            assert!(start_run(&state, GasMixture::clean_air()).is_err());
        }
        if state.phase != ProtocolPhase::Measure {
            assert!(end_measurement(&state).is_err());
        }
        state = if state.phase == ProtocolPhase::Measure {
            end_measurement(&state).unwrap()
        } else if state.phase == ProtocolPhase::Idle {
            break;
        } else {
            advance(&state, &durations, 0.25)
        };
    }
    assert_eq!(visited.len(), 6, "not all phases reached: {:?}", visited);

    let mfc = MfcConfig::default();
    let mut rng = ChaCha12Rng::seed_from_u64(4);
    for gas in GasSpecies::ALL {
        for _ in 0..200 {
            let requested: f64 = rng.random_range(0.0..1e6);
            assert!(clamp_flow(&mfc, gas, requested).unwrap() <= 200.0);
        }
    }
    pass(4, "phase timing 10/10/60 s, exhaustive actuator check, MFC clamp at 200 sccm");
}

/// Classification quality: 100% noiseless over a 50-5000 ppm log grid,
/// >= 95% under 2% multiplicative noise, and the grid+refinement fit
/// matching a 1e6-point brute-force oracle within 0.1%.
#[test]
fn criterion_5_classification() {
    let lib = FingerprintLibrary::with_default_pack();
    let opts = ClassifyOptions::default();

    // noiseless: exact species and <= 0.5% concentration error
    let grid: Vec<f64> = (0..20)
        .map(|i| 50.0 * (5000.0f64 / 50.0).powf(i as f64 / 19.0))
        .collect();
    for species in GasSpecies::ALL {
        for &c in &grid {
            let observed = predict_ratios(&lib, species, c);
            let result = classify(&lib, &observed, &opts).unwrap();
            assert_eq!(result.species, Some(species), "noiseless miss at {} ppm", c);
            assert!(
                (result.concentration - c).abs() / c < 0.005,
                "{} at {} ppm fit {}",
                species,
                c,
                result.concentration
            );
        }
    }

    // 2% multiplicative resistance noise, 1000 seeded trials
    let mut rng = ChaCha12Rng::seed_from_u64(5);
    let noise = Normal::new(0.0, 0.02).unwrap();
    let mut correct = 0u32;
    let trials = 1000;
    for t in 0..trials {
        let species = GasSpecies::from_code((t % 5) as u8).unwrap();
        let c = 50.0 * (5000.0f64 / 50.0).powf(rng.random::<f64>());
        let mut observed = predict_ratios(&lib, species, c);
        for r in &mut observed {
            *r = (*r * (1.0 + noise.sample(&mut rng))).clamp(1e-6, 1.0);
        }
        let result = classify(&lib, &observed, &opts).unwrap();
        if result.species == Some(species) {
            correct += 1;
        }
    }
    let accuracy = correct as f64 / trials as f64;
    assert!(accuracy >= 0.95, "noisy accuracy {}", accuracy);

    // brute-force oracle: 1e6-point grid over the same search range
    let oracle_points = 1_000_000usize;
    let lo = opts.c_floor.log10();
    let hi = opts.c_max.log10();
    let noise = Normal::new(0.0, 0.01).unwrap();
    for species in GasSpecies::ALL {
        // predicted log-ratios over the oracle grid, one pass per species
        let pred: Vec<[f64; 5]> = (0..oracle_points)
            .map(|j| {
                let c = 10f64.powf(lo + (hi - lo) * j as f64 / (oracle_points - 1) as f64);
                predict_ratios(&lib, species, c).map(|r| r.ln())
            })
            .collect();
        for _ in 0..20 {
            let c_true = 1.0 * (1e4f64).powf(rng.random::<f64>());
            let mut observed = predict_ratios(&lib, species, c_true);
            for r in &mut observed {
                *r = (*r * (1.0 + noise.sample(&mut rng))).clamp(1e-6, 1.0);
            }
            let obs_log = observed.map(|r| r.ln());
            let mut best_j = 0;
            let mut best_l = f64::INFINITY;
            for (j, p) in pred.iter().enumerate() {
                let mut l = 0.0;
                for s in 0..5 {
                    let d = obs_log[s] - p[s];
                    l += d * d;
                }
                if l < best_l {
                    best_l = l;
                    best_j = j;
                }
            }
            let c_oracle = 10f64.powf(lo + (hi - lo) * best_j as f64 / (oracle_points - 1) as f64);
            let (c_fit, _) = fit_concentration(&lib, species, &observed);
            assert!(
                (c_fit - c_oracle).abs() / c_oracle < 0.001,
                "{}: fit {} vs oracle {} (true {})",
                species,
                c_fit,
                c_oracle,
                c_true
            );
        }
    }
    pass(5, "noiseless 100% within 0.5% ppm, noisy accuracy >= 95%, fit matches 1e6-point oracle within 0.1%");
}

/// CAN layer: codec bijection, the documented example frame, arbitration
/// order, and replay determinism of a full simulate run's bus log.
#[test]
fn criterion_6_can_layer() {
    let mut rng = ChaCha12Rng::seed_from_u64(6);
    for _ in 0..100_000 {
        let msg = match rng.random_range(0..3) {
            0 => TelemetryMessage::Reading {
                sensor_index: rng.random_range(0..5),
                seq: rng.random(),
                adc_code: rng.random(),
                resistance: rng.random(),
            },
            1 => TelemetryMessage::Classification {
                species_code: if rng.random_bool(0.2) { 255 } else { rng.random_range(0..5) },
                confidence_byte: rng.random(),
                concentration: rng.random(),
            },
            _ => TelemetryMessage::Alert {
                species_code: rng.random_range(0..5),
                level: rng.random_range(1..=3),
            },
        };
        let frame = encode(&msg).unwrap();
        assert_eq!(decode(&frame).unwrap(), msg);
    }

    // the hand-assembled example frame
    let frame = CanFrame::new(
        0x102,
        vec![0x02, 0x07, 0x02, 0x00, 0x00, 0x00, 0x27, 0x10],
    )
    .unwrap();
    assert_eq!(
        decode(&frame).unwrap(),
        TelemetryMessage::Reading {
            sensor_index: 2,
            seq: 7,
            adc_code: 512,
            resistance: 10_000,
        }
    );

    // arbitration: lowest id always transmits first
    for _ in 0..200 {
        let mut bus = SimBus::new();
        let n = rng.random_range(2..8);
        let mut lowest = u16::MAX;
        for k in 0..n {
            let msg = match rng.random_range(0..3) {
                0 => TelemetryMessage::Reading {
                    sensor_index: rng.random_range(0..5),
                    seq: 0,
                    adc_code: 0,
                    resistance: 0,
                },
                1 => TelemetryMessage::Classification {
                    species_code: 0,
                    confidence_byte: 0,
                    concentration: 0,
                },
                _ => TelemetryMessage::Alert {
                    species_code: 0,
                    level: 1,
                },
            };
            let frame = encode(&msg).unwrap();
            lowest = lowest.min(frame.id());
            bus.submit(&format!("n{}", k), frame);
        }
        bus.step(0);
        assert_eq!(bus.log.entries[0].frame.id(), lowest);
        // remaining frames drain in ascending id order
        bus.run_until_idle(1);
        for w in bus.log.entries.windows(2) {
            assert!(w[0].frame.id() <= w[1].frame.id());
        }
    }

    // a full simulate run's bus log replays byte-identically
    let cfg = RunConfig::default().resolve().unwrap();
    let mix = GasMixture::single(GasSpecies::Methane, 2500.0).unwrap();
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    cmd_simulate(&cfg, &mix, dir_a.path()).unwrap();
    cmd_simulate(&cfg, &mix, dir_b.path()).unwrap();
    let log_a = std::fs::read(dir_a.path().join("bus.log")).unwrap();
    let log_b = std::fs::read(dir_b.path().join("bus.log")).unwrap();
    assert!(!log_a.is_empty());
    assert_eq!(log_a, log_b);
    pass(6, "codec bijection over 1e5 messages, example frame, arbitration order, replay determinism");
}

/// End-to-end determinism: two binary invocations with the same config
/// and seed produce byte-identical CSVs, SVGs and bus logs.
#[test]
fn criterion_7_determinism() {
    let exe = env!("CARGO_BIN_EXE_enose");
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    for dir in [dir_a.path(), dir_b.path()] {
        let status = std::process::Command::new(exe)
            .args([
                "simulate",
                "--mix",
                "ethanol=800",
                "--seed",
                "7",
                "--out",
            ])
            .arg(dir)
            .status()
            .unwrap();
        assert!(status.success());
        let status = std::process::Command::new(exe)
            .args([
                "sweep", "--species", "methane", "--min", "100", "--max", "10000", "--points",
                "50", "--svg", "--out",
            ])
            .arg(dir)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let mut names: Vec<String> = std::fs::read_dir(dir_a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert!(names.len() >= 12, "expected full output set, got {:?}", names);
    for name in &names {
        let a = std::fs::read(dir_a.path().join(name)).unwrap();
        let b = std::fs::read(dir_b.path().join(name)).unwrap();
        assert_eq!(a, b, "{} differs between identical runs", name);
    }
    pass(7, "all simulate and sweep outputs byte-identical across runs");
}
