//! Data acquisition: ADC quantization, seeded measurement noise,
//! clean-air baseline calibration, and extraction of steady-state
//! ratio plus response/recovery times from traces.

use crate::gas::{divider_output, DividerCircuit, SensorTrace};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DaqError {
    #[error("voltage {v} V outside ADC range [0, {v_ref}] V")]
    OutOfRange { v: f64, v_ref: f64 },
    #[error("baseline window {window} s exceeds trace length {trace} s")]
    WindowTooLong { window: f64, trace: f64 },
    #[error("trace has not reached steady state (relative change {0} across the tail window)")]
    NoSteadyState(f64),
    #[error("trace is empty")]
    EmptyTrace,
    #[error("invalid ADC config: {0}")]
    InvalidConfig(String),
}

/// ADC resolution and full-scale reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdcConfig {
    pub bits: u32,
    pub v_ref: f64,
}

impl Default for AdcConfig {
    fn default() -> AdcConfig {
        AdcConfig {
            bits: 10,
            v_ref: 5.0,
        }
    }
}

impl AdcConfig {
    pub fn validate(&self) -> Result<(), DaqError> {
        if !(8..=16).contains(&self.bits) {
            return Err(DaqError::InvalidConfig(format!(
                "bits must be in [8, 16], got {}",
                self.bits
            )));
        }
        if !(self.v_ref > 0.0) {
            return Err(DaqError::InvalidConfig(format!(
                "v_ref must be > 0, got {}",
                self.v_ref
            )));
        }
        Ok(())
    }

    pub fn max_code(&self) -> u32 {
        (1u32 << self.bits) - 1
    }
}

/// Multiplicative Gaussian resistance noise with a fixed seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    pub resistance_sigma: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> NoiseConfig {
        NoiseConfig {
            resistance_sigma: 0.01,
            seed: 42,
        }
    }
}

/// Per-sensor features pulled from one exposure/recovery pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorFeatures {
    /// Rs/Ro at steady state, in (0, 1].
    pub steady_ratio: f64,
    /// Time to cover 90% of the span from baseline to steady state, s.
    pub response_time_t90: f64,
    /// Time to recover 90% of the way back to baseline, s.
    pub recovery_time_t90: f64,
    /// Calibrated clean-air resistance, ohms.
    pub baseline_r0: f64,
}

/// Features for the whole array, one entry per sensor in array order.
pub type FeatureVector = Vec<SensorFeatures>;

/// Relative change across the steady-state tail window above which the
/// trace is rejected as not settled.
pub const FLATNESS_THRESHOLD: f64 = 0.01;

/// Quantize a voltage: round(v / v_ref * (2^bits - 1)).
pub fn quantize(v: f64, cfg: &AdcConfig) -> Result<u32, DaqError> {
    if !(0.0..=cfg.v_ref).contains(&v) {
        return Err(DaqError::OutOfRange { v, v_ref: cfg.v_ref });
    }
    let code = (v / cfg.v_ref * cfg.max_code() as f64).round() as u32;
    Ok(code.min(cfg.max_code()))
}

/// Voltage level represented by an ADC code.
pub fn dequantize(code: u32, cfg: &AdcConfig) -> f64 {
    code as f64 / cfg.max_code() as f64 * cfg.v_ref
}

/// Multiply each resistance sample by (1 + N(0, sigma)) from a seeded
/// generator and recompute the divider voltage. Same seed, same output.
pub fn apply_noise(trace: &SensorTrace, circuit: &DividerCircuit, cfg: &NoiseConfig) -> SensorTrace {
    if cfg.resistance_sigma == 0.0 {
        return trace.clone();
    }
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, cfg.resistance_sigma).expect("sigma must be finite and >= 0");
    let samples = trace
        .samples
        .iter()
        .map(|s| {
            // resistances must stay positive; a >100% downward excursion
            // is clipped to a sliver of the true value
            let factor = (1.0 + normal.sample(&mut rng)).max(1e-6);
            let r = s.resistance * factor;
            crate::gas::TraceSample {
                t: s.t,
                resistance: r,
                v_out: divider_output(r, circuit),
            }
        })
        .collect();
    SensorTrace {
        sample_period: trace.sample_period,
        samples,
    }
}

/// Mean resistance over the final `window` seconds of a clean-air trace.
pub fn calibrate_baseline(trace: &SensorTrace, window: f64) -> Result<f64, DaqError> {
    if trace.samples.is_empty() {
        return Err(DaqError::EmptyTrace);
    }
    let span = trace.duration();
    if !(window > 0.0) || window > span + 1e-9 {
        return Err(DaqError::WindowTooLong {
            window,
            trace: span,
        });
    }
    let t_end = trace.samples.last().unwrap().t;
    let cut = t_end - window;
    let tail: Vec<f64> = trace
        .samples
        .iter()
        .filter(|s| s.t >= cut - 1e-9)
        .map(|s| s.resistance)
        .collect();
    Ok(tail.iter().sum::<f64>() / tail.len() as f64)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Extract steady-state ratio and t90 response/recovery times from an
/// exposure trace and the following recovery trace.
///
/// Steady state is the mean of the final 10% of the exposure window,
/// gated by a flatness check: the means of the two halves of that
/// window may differ by at most `FLATNESS_THRESHOLD` relative to the
/// window mean. Times are measured from each trace's first sample.
pub fn extract_features(
    exposure: &SensorTrace,
    recovery: &SensorTrace,
    baseline: f64,
) -> Result<SensorFeatures, DaqError> {
    if exposure.samples.is_empty() || recovery.samples.is_empty() {
        return Err(DaqError::EmptyTrace);
    }
    assert!(baseline > 0.0, "baseline must be positive");

    let n = exposure.samples.len();
    let tail_len = (n / 10).max(2).min(n);
    let tail: Vec<f64> = exposure.samples[n - tail_len..]
        .iter()
        .map(|s| s.resistance)
        .collect();
    let steady = mean(&tail);
    let half = tail.len() / 2;
    if half >= 1 {
        let first = mean(&tail[..half]);
        let second = mean(&tail[half..]);
        let rel = (second - first).abs() / steady;
        if rel > FLATNESS_THRESHOLD {
            return Err(DaqError::NoSteadyState(rel));
        }
    }

    let steady_ratio = (steady / baseline).min(1.0);

    // response: first time 90% of the baseline-to-steady span is covered
    let span = steady - baseline;
    let t0 = exposure.samples[0].t;
    let response_time_t90 = if span.abs() < 1e-9 * baseline {
        0.0
    } else {
        exposure
            .samples
            .iter()
            .find(|s| (s.resistance - baseline).abs() >= 0.9 * span.abs())
            .map(|s| s.t - t0)
            .unwrap_or(exposure.samples.last().unwrap().t - t0)
    };

    // recovery: first time only 10% of the return span remains
    let rec_start = recovery.samples[0].resistance;
    let rec_span = rec_start - baseline;
    let r0 = recovery.samples[0].t;
    let recovery_time_t90 = if rec_span.abs() < 1e-9 * baseline {
        0.0
    } else {
        recovery
            .samples
            .iter()
            .find(|s| (s.resistance - baseline).abs() <= 0.1 * rec_span.abs())
            .map(|s| s.t - r0)
            .unwrap_or(recovery.samples.last().unwrap().t - r0)
    };

    Ok(SensorFeatures {
        steady_ratio,
        response_time_t90,
        recovery_time_t90,
        baseline_r0: baseline,
    })
}

/// Write a trace in the interchange CSV format: `#`-prefixed header
/// lines carrying the sensor id and config, then
/// `t_s,resistance_ohm,v_rl_volt,adc_code` rows.
pub fn trace_csv(sensor_id: &str, trace: &SensorTrace, adc: &AdcConfig) -> Result<String, DaqError> {
    adc.validate()?;
    let mut out = String::new();
    out.push_str(&format!("# sensor: {}\n", sensor_id));
    out.push_str(&format!("# sample_period_s: {}\n", trace.sample_period));
    out.push_str(&format!("# adc_bits: {}\n", adc.bits));
    out.push_str(&format!("# adc_v_ref: {}\n", adc.v_ref));
    out.push_str("t_s,resistance_ohm,v_rl_volt,adc_code\n");
    for s in &trace.samples {
        // the divider bounds v_out to (0, v_bias]; clamp defensively for
        // quantization when v_ref < v_bias
        let v = s.v_out.clamp(0.0, adc.v_ref);
        let code = quantize(v, adc)?;
        out.push_str(&format!("{},{},{},{}\n", s.t, s.resistance, s.v_out, code));
    }
    Ok(out)
}
