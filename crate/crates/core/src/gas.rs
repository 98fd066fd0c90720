//! MOX sensor physics: steady-state sensitivity, first-order response
//! dynamics, and the load-resistor divider that converts sensor
//! resistance to an output voltage.

use thiserror::Error;

/// Reference ambient temperature for drift compensation, in °C.
pub const REFERENCE_TEMP_C: f64 = 20.0;
/// Reference relative humidity for drift compensation, in %RH.
pub const REFERENCE_RH_PCT: f64 = 50.0;

#[derive(Debug, Error, PartialEq)]
pub enum GasError {
    #[error("divider output voltage must be positive, got {0} V")]
    NonPositiveVoltage(f64),
    #[error("divider output voltage {v} V exceeds bias voltage {v_bias} V")]
    OverBias { v: f64, v_bias: f64 },
    #[error("invalid exposure schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid gas mixture: {0}")]
    InvalidMixture(String),
    #[error("invalid sensor spec: {0}")]
    InvalidSpec(String),
}

/// The five target gases. The discriminant doubles as the wire code
/// used by the CAN codec, so the order is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum GasSpecies {
    Methane = 0,
    Ethanol = 1,
    Propane = 2,
    Isobutane = 3,
    Hydrogen = 4,
}

impl GasSpecies {
    pub const ALL: [GasSpecies; 5] = [
        GasSpecies::Methane,
        GasSpecies::Ethanol,
        GasSpecies::Propane,
        GasSpecies::Isobutane,
        GasSpecies::Hydrogen,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<GasSpecies> {
        GasSpecies::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            GasSpecies::Methane => "Methane",
            GasSpecies::Ethanol => "Ethanol",
            GasSpecies::Propane => "Propane",
            GasSpecies::Isobutane => "Isobutane",
            GasSpecies::Hydrogen => "Hydrogen",
        }
    }

    pub fn parse(s: &str) -> Option<GasSpecies> {
        let lower = s.to_ascii_lowercase();
        GasSpecies::ALL
            .iter()
            .copied()
            .find(|g| g.name().to_ascii_lowercase() == lower)
    }
}

impl std::fmt::Display for GasSpecies {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-species concentrations in ppm. All zero means clean air.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasMixture {
    ppm: [f64; 5],
}

impl GasMixture {
    pub fn clean_air() -> GasMixture {
        GasMixture { ppm: [0.0; 5] }
    }

    pub fn new(ppm: [f64; 5]) -> Result<GasMixture, GasError> {
        for (i, &c) in ppm.iter().enumerate() {
            if !c.is_finite() || c < 0.0 {
                return Err(GasError::InvalidMixture(format!(
                    "{} concentration {} ppm is not finite and non-negative",
                    GasSpecies::ALL[i],
                    c
                )));
            }
        }
        Ok(GasMixture { ppm })
    }

    pub fn single(species: GasSpecies, ppm: f64) -> Result<GasMixture, GasError> {
        let mut all = [0.0; 5];
        all[species.code() as usize] = ppm;
        GasMixture::new(all)
    }

    pub fn ppm(&self, species: GasSpecies) -> f64 {
        self.ppm[species.code() as usize]
    }

    pub fn concentrations(&self) -> &[f64; 5] {
        &self.ppm
    }

    pub fn is_clean_air(&self) -> bool {
        self.ppm.iter().all(|&c| c == 0.0)
    }
}

/// Power-law sensitivity of one sensor to one gas:
/// the gas contributes `gain * (C / c_ref)^exponent` to Ro/Rs - 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sensitivity {
    pub gain: f64,
    pub exponent: f64,
}

/// The Figaro sensor models in the array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SensorModel {
    Tgs2602,
    Tgs822,
    Tgs825,
    Tgs813,
    Tgs880,
}

impl SensorModel {
    pub const ALL: [SensorModel; 5] = [
        SensorModel::Tgs2602,
        SensorModel::Tgs822,
        SensorModel::Tgs825,
        SensorModel::Tgs813,
        SensorModel::Tgs880,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            SensorModel::Tgs2602 => "TGS2602",
            SensorModel::Tgs822 => "TGS822",
            SensorModel::Tgs825 => "TGS825",
            SensorModel::Tgs813 => "TGS813",
            SensorModel::Tgs880 => "TGS880",
        }
    }

    pub fn parse(s: &str) -> Option<SensorModel> {
        let upper = s.to_ascii_uppercase();
        SensorModel::ALL.iter().copied().find(|m| m.tag() == upper)
    }
}

impl std::fmt::Display for SensorModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// Physics parameters for one MOX sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorSpec {
    pub id: SensorModel,
    /// Baseline resistance Ro in clean air at the reference environment, ohms.
    pub r0_clean_air: f64,
    /// Per-species power-law coefficients, indexed by `GasSpecies` code.
    pub sensitivity: [Sensitivity; 5],
    /// Reference concentration for the power law, ppm.
    pub c_ref: f64,
    /// Time constant while gas is adsorbing (resistance dropping), seconds.
    pub tau_rise: f64,
    /// Time constant during recovery toward baseline, seconds.
    pub tau_fall: f64,
    /// Heater supply V_H, volts.
    pub heater_voltage: f64,
    /// Heater operating point, °C.
    pub operating_temp: f64,
    /// Fractional Ro drift per °C away from the reference temperature.
    pub temp_coeff: f64,
    /// Fractional Ro drift per %RH away from the reference humidity.
    pub humidity_coeff: f64,
}

impl SensorSpec {
    pub fn validate(&self) -> Result<(), GasError> {
        if !(self.r0_clean_air > 0.0) {
            return Err(GasError::InvalidSpec(format!(
                "{}: r0_clean_air must be > 0",
                self.id
            )));
        }
        if !(self.c_ref > 0.0) {
            return Err(GasError::InvalidSpec(format!("{}: c_ref must be > 0", self.id)));
        }
        if !(self.tau_rise > 0.0) || !(self.tau_fall > 0.0) {
            return Err(GasError::InvalidSpec(format!(
                "{}: time constants must be > 0",
                self.id
            )));
        }
        for (i, s) in self.sensitivity.iter().enumerate() {
            if !(s.gain >= 0.0) || !(s.exponent > 0.0) {
                return Err(GasError::InvalidSpec(format!(
                    "{}: sensitivity to {} must have gain >= 0 and exponent > 0",
                    self.id,
                    GasSpecies::ALL[i]
                )));
            }
        }
        Ok(())
    }
}

/// The measurement circuit of the sensor schematic: sensor in series
/// with a load resistor, read across the load.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DividerCircuit {
    /// Load resistance R_L, ohms.
    pub r_load: f64,
    /// Bias voltage V_C across the series pair, volts.
    pub v_bias: f64,
}

impl Default for DividerCircuit {
    fn default() -> DividerCircuit {
        DividerCircuit {
            r_load: 10_000.0,
            v_bias: 5.0,
        }
    }
}

/// Ambient conditions from the temperature/humidity sensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvConditions {
    pub temperature: f64,
    pub relative_humidity: f64,
}

impl Default for EnvConditions {
    fn default() -> EnvConditions {
        EnvConditions {
            temperature: REFERENCE_TEMP_C,
            relative_humidity: REFERENCE_RH_PCT,
        }
    }
}

/// One sampled point of a sensor's output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    pub t: f64,
    pub resistance: f64,
    pub v_out: f64,
}

/// Uniformly sampled resistance/voltage time series from one sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorTrace {
    pub sample_period: f64,
    pub samples: Vec<TraceSample>,
}

impl SensorTrace {
    pub fn duration(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }
}

/// A piecewise-constant gas exposure over time. Segments are contiguous
/// starting at t = 0 with no gaps or overlaps.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureSchedule {
    segments: Vec<ExposureSegment>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExposureSegment {
    pub start: f64,
    pub end: f64,
    pub mix: GasMixture,
}

impl ExposureSchedule {
    pub fn new(segments: Vec<ExposureSegment>) -> Result<ExposureSchedule, GasError> {
        if segments.is_empty() {
            return Err(GasError::InvalidSchedule("schedule has no segments".into()));
        }
        if segments[0].start != 0.0 {
            return Err(GasError::InvalidSchedule(format!(
                "first segment starts at {} s, expected 0",
                segments[0].start
            )));
        }
        let mut prev_end = 0.0;
        for seg in &segments {
            if seg.start < 0.0 || seg.end < 0.0 {
                return Err(GasError::InvalidSchedule("negative segment time".into()));
            }
            if seg.start != prev_end {
                return Err(GasError::InvalidSchedule(format!(
                    "gap or overlap at t = {} s (segment starts at {} s)",
                    prev_end, seg.start
                )));
            }
            if seg.end <= seg.start {
                return Err(GasError::InvalidSchedule(format!(
                    "segment [{}, {}] has non-positive length",
                    seg.start, seg.end
                )));
            }
            prev_end = seg.end;
        }
        Ok(ExposureSchedule { segments })
    }

    /// A single clean-air segment over [0, duration].
    pub fn clean_air(duration: f64) -> Result<ExposureSchedule, GasError> {
        ExposureSchedule::new(vec![ExposureSegment {
            start: 0.0,
            end: duration,
            mix: GasMixture::clean_air(),
        }])
    }

    pub fn segments(&self) -> &[ExposureSegment] {
        &self.segments
    }

    pub fn end(&self) -> f64 {
        self.segments.last().map(|s| s.end).unwrap_or(0.0)
    }

    /// The mixture in effect at time t (segments are start-inclusive).
    pub fn mixture_at(&self, t: f64) -> GasMixture {
        for seg in &self.segments {
            if t < seg.end {
                return seg.mix;
            }
        }
        self.segments.last().map(|s| s.mix).unwrap_or_else(GasMixture::clean_air)
    }
}

/// Steady-state Rs/Ro for a mixture:
/// Ro/Rs = 1 + sum over gases of A_g * (C_g / c_ref)^alpha_g.
///
/// Equals exactly 1 in clean air and decreases strictly as any
/// concentration rises.
pub fn steady_state_ratio(spec: &SensorSpec, mix: &GasMixture) -> f64 {
    let mut conductance_gain = 0.0;
    for g in GasSpecies::ALL {
        let c = mix.ppm(g);
        if c > 0.0 {
            let s = spec.sensitivity[g.code() as usize];
            conductance_gain += s.gain * (c / spec.c_ref).powf(s.exponent);
        }
    }
    1.0 / (1.0 + conductance_gain)
}

/// Steady-state sensor resistance: drift-adjusted baseline times Rs/Ro.
pub fn steady_state_resistance(spec: &SensorSpec, mix: &GasMixture, env: &EnvConditions) -> f64 {
    drift_adjusted_r0(spec, env) * steady_state_ratio(spec, mix)
}

/// Baseline resistance corrected linearly for ambient temperature and
/// humidity, clamped so drift can never drive it below 0.1 * Ro.
pub fn drift_adjusted_r0(spec: &SensorSpec, env: &EnvConditions) -> f64 {
    let t_term = 1.0 + spec.temp_coeff * (env.temperature - REFERENCE_TEMP_C);
    let h_term = 1.0 + spec.humidity_coeff * (env.relative_humidity - REFERENCE_RH_PCT);
    (spec.r0_clean_air * t_term * h_term).max(0.1 * spec.r0_clean_air)
}

/// Output voltage across the load resistor: V_RL = V_C * R_L / (Rs + R_L).
pub fn divider_output(rs: f64, circuit: &DividerCircuit) -> f64 {
    circuit.v_bias * circuit.r_load / (rs + circuit.r_load)
}

/// Inverse of `divider_output`: recovers Rs from a measured V_RL.
pub fn resistance_from_output(v_rl: f64, circuit: &DividerCircuit) -> Result<f64, GasError> {
    if v_rl <= 0.0 {
        return Err(GasError::NonPositiveVoltage(v_rl));
    }
    if v_rl > circuit.v_bias {
        return Err(GasError::OverBias {
            v: v_rl,
            v_bias: circuit.v_bias,
        });
    }
    Ok(circuit.r_load * (circuit.v_bias - v_rl) / v_rl)
}

/// Simulate the sensor's first-order relaxation through a piecewise-constant
/// exposure schedule.
///
/// Within each constant segment the resistance follows the closed form
/// R(t) = R* + (R_entry - R*) * exp(-(t - t_entry) / tau), anchored at the
/// segment entry. Samples are therefore bit-identical under sample-period
/// refinement at shared timestamps. The time constant is tau_rise while the
/// target is below the entry resistance (gas adsorbing) and tau_fall
/// otherwise (recovery).
pub fn step_response(
    spec: &SensorSpec,
    schedule: &ExposureSchedule,
    env: &EnvConditions,
    circuit: &DividerCircuit,
    sample_period: f64,
    duration: f64,
) -> Result<SensorTrace, GasError> {
    if !(sample_period > 0.0) {
        return Err(GasError::InvalidSchedule(format!(
            "sample_period must be > 0, got {}",
            sample_period
        )));
    }
    if duration < sample_period {
        return Err(GasError::InvalidSchedule(format!(
            "duration {} s is shorter than one sample period {} s",
            duration, sample_period
        )));
    }
    if schedule.end() + 1e-9 < duration {
        return Err(GasError::InvalidSchedule(format!(
            "schedule ends at {} s but duration is {} s",
            schedule.end(),
            duration
        )));
    }

    let r0 = drift_adjusted_r0(spec, env);
    let n = (duration / sample_period + 1e-9).floor() as usize;

    // Per-segment anchor: resistance at segment entry plus the segment's
    // steady-state target and direction-dependent time constant.
    let mut seg_idx = 0usize;
    let segs = schedule.segments();
    let mut entry_r = r0;
    let mut target = r0 * steady_state_ratio(spec, &segs[0].mix);
    let mut tau = if target < entry_r { spec.tau_rise } else { spec.tau_fall };

    let mut samples = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let t = k as f64 * sample_period;
        // advance the anchor across any segment boundaries passed
        while seg_idx + 1 < segs.len() && t >= segs[seg_idx + 1].start {
            let seg = &segs[seg_idx];
            let dt = seg.end - seg.start;
            entry_r = target + (entry_r - target) * (-dt / tau).exp();
            seg_idx += 1;
            target = r0 * steady_state_ratio(spec, &segs[seg_idx].mix);
            tau = if target < entry_r { spec.tau_rise } else { spec.tau_fall };
        }
        let dt = t - segs[seg_idx].start;
        let r = target + (entry_r - target) * (-dt / tau).exp();
        samples.push(TraceSample {
            t,
            resistance: r,
            v_out: divider_output(r, circuit),
        });
    }
    Ok(SensorTrace {
        sample_period,
        samples,
    })
}

/// Ordinary least-squares slope of log10(y) against log10(x).
/// Used to check the power-law tail of sensitivity sweeps.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2);
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.log10()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.log10()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Synthetic parameter pack for the five-sensor array.
///
/// The gains and exponents are NOT Figaro datasheet values; they are
/// invented numbers whose cross-sensitivity pattern follows each model's
/// stated specialty (TGS813 strongest on combustibles, TGS822 on organic
/// solvent vapors, and so on) so the array produces distinguishable
/// fingerprints for the five target gases.
pub fn default_sensor_pack() -> [SensorSpec; 5] {
    // columns: Methane, Ethanol, Propane, Isobutane, Hydrogen
    let s = |gain: f64, exponent: f64| Sensitivity { gain, exponent };
    let base = |id, r0, sens, tau_rise, tau_fall| SensorSpec {
        id,
        r0_clean_air: r0,
        sensitivity: sens,
        c_ref: 100.0,
        tau_rise,
        tau_fall,
        heater_voltage: 5.0,
        operating_temp: 300.0,
        temp_coeff: -0.005,
        humidity_coeff: -0.002,
    };
    [
        // air contaminants: broad, moderate response
        base(
            SensorModel::Tgs2602,
            30_000.0,
            [s(0.25, 0.50), s(1.50, 0.55), s(0.40, 0.52), s(1.80, 0.50), s(0.80, 0.60)],
            5.0,
            8.0,
        ),
        // organic solvent vapors: ethanol dominant
        base(
            SensorModel::Tgs822,
            20_000.0,
            [s(0.20, 0.50), s(8.00, 0.65), s(1.20, 0.55), s(0.50, 0.52), s(1.50, 0.55)],
            4.0,
            7.0,
        ),
        // sulfide-oriented element with a strong hydrogen side response
        base(
            SensorModel::Tgs825,
            25_000.0,
            [s(0.15, 0.50), s(0.90, 0.52), s(0.30, 0.50), s(0.35, 0.55), s(4.00, 0.70)],
            6.0,
            9.0,
        ),
        // general-purpose combustible gases: methane/propane/isobutane strongest
        base(
            SensorModel::Tgs813,
            10_000.0,
            [s(6.00, 0.60), s(1.00, 0.50), s(5.00, 0.55), s(4.50, 0.52), s(2.00, 0.50)],
            4.5,
            7.5,
        ),
        // oil vapors: heavier organics over light gases
        base(
            SensorModel::Tgs880,
            15_000.0,
            [s(0.50, 0.52), s(2.50, 0.55), s(0.80, 0.50), s(2.50, 0.65), s(0.70, 0.50)],
            5.5,
            8.5,
        ),
    ]
}
