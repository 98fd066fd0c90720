//! The chamber sampling procedure as an explicit state machine:
//! valve/pump sequencing through evacuate, intake, stabilize, measure
//! and purge, plus MFC flow clamping and the exposure schedule the
//! protocol hands to the sensor model.

use crate::gas::{ExposureSchedule, ExposureSegment, GasError, GasMixture, GasSpecies};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("start_run requires the Idle phase, chamber is in {0:?}")]
    NotIdle(ProtocolPhase),
    #[error("end_measurement requires the Measure phase, chamber is in {0:?}")]
    NotMeasuring(ProtocolPhase),
    #[error("requested flow {0} sccm is negative")]
    NegativeFlow(f64),
    #[error(transparent)]
    Gas(#[from] GasError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProtocolPhase {
    Idle,
    Evacuate,
    Intake,
    Stabilize,
    Measure,
    Purge,
}

impl ProtocolPhase {
    pub const ALL: [ProtocolPhase; 6] = [
        ProtocolPhase::Idle,
        ProtocolPhase::Evacuate,
        ProtocolPhase::Intake,
        ProtocolPhase::Stabilize,
        ProtocolPhase::Measure,
        ProtocolPhase::Purge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProtocolPhase::Idle => "Idle",
            ProtocolPhase::Evacuate => "Evacuate",
            ProtocolPhase::Intake => "Intake",
            ProtocolPhase::Stabilize => "Stabilize",
            ProtocolPhase::Measure => "Measure",
            ProtocolPhase::Purge => "Purge",
        }
    }
}

impl std::fmt::Display for ProtocolPhase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Valve and pump settings for a phase: (valve1_open, valve2_open, pump_on).
///
/// Evacuate: valve 1 shut, valve 2 released, pump running.
/// Intake: valve 1 open for the gas sample, valve 2 shut, pump off.
/// Stabilize/Measure: chamber sealed.
/// Purge: both valves open with the pump discharging the odor.
pub fn actuators_for(phase: ProtocolPhase) -> (bool, bool, bool) {
    match phase {
        ProtocolPhase::Idle => (false, false, false),
        ProtocolPhase::Evacuate => (false, true, true),
        ProtocolPhase::Intake => (true, false, false),
        ProtocolPhase::Stabilize => (false, false, false),
        ProtocolPhase::Measure => (false, false, false),
        ProtocolPhase::Purge => (true, true, true),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChamberState {
    pub phase: ProtocolPhase,
    pub valve1_open: bool,
    pub valve2_open: bool,
    pub pump_on: bool,
    pub phase_elapsed: f64,
    pub sample_mixture: GasMixture,
}

impl ChamberState {
    pub fn idle() -> ChamberState {
        ChamberState::in_phase(ProtocolPhase::Idle, GasMixture::clean_air())
    }

    fn in_phase(phase: ProtocolPhase, mix: GasMixture) -> ChamberState {
        let (valve1_open, valve2_open, pump_on) = actuators_for(phase);
        ChamberState {
            phase,
            valve1_open,
            valve2_open,
            pump_on,
            phase_elapsed: 0.0,
            sample_mixture: mix,
        }
    }
}

/// Configured lengths of the timed protocol phases, seconds.
/// Measure has no duration here: it is open-ended and terminated by
/// the caller via `end_measurement`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseDurations {
    pub evacuate: f64,
    pub intake: f64,
    pub stabilize: f64,
    pub purge: f64,
}

impl Default for PhaseDurations {
    fn default() -> PhaseDurations {
        PhaseDurations {
            evacuate: 10.0,
            intake: 10.0,
            stabilize: 60.0,
            purge: 120.0,
        }
    }
}

impl PhaseDurations {
    pub fn validate(&self) -> Result<(), GasError> {
        for (name, v) in [
            ("evacuate", self.evacuate),
            ("intake", self.intake),
            ("stabilize", self.stabilize),
            ("purge", self.purge),
        ] {
            if !(v > 0.0) {
                return Err(GasError::InvalidSchedule(format!(
                    "phase duration {} must be > 0, got {}",
                    name, v
                )));
            }
        }
        Ok(())
    }

    /// Scripted run time excluding the open-ended Measure hold.
    pub fn scripted_total(&self) -> f64 {
        self.evacuate + self.intake + self.stabilize + self.purge
    }
}

/// Per-species mass-flow-controller limits, sccm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MfcConfig {
    pub max_flow: [f64; 5],
}

impl Default for MfcConfig {
    fn default() -> MfcConfig {
        MfcConfig {
            max_flow: [200.0; 5],
        }
    }
}

/// Begin a run: legal only from Idle, moves the chamber to Evacuate
/// with the sample mixture stored for the intake phase.
pub fn start_run(state: &ChamberState, mix: GasMixture) -> Result<ChamberState, ProtocolError> {
    if state.phase != ProtocolPhase::Idle {
        return Err(ProtocolError::NotIdle(state.phase));
    }
    Ok(ChamberState::in_phase(ProtocolPhase::Evacuate, mix))
}

/// Terminate the Measure hold and move to Purge.
pub fn end_measurement(state: &ChamberState) -> Result<ChamberState, ProtocolError> {
    if state.phase != ProtocolPhase::Measure {
        return Err(ProtocolError::NotMeasuring(state.phase));
    }
    Ok(ChamberState::in_phase(
        ProtocolPhase::Purge,
        state.sample_mixture,
    ))
}

// tolerance for phase-boundary comparison under accumulated float dt
const BOUNDARY_EPS: f64 = 1e-9;

/// Elapse `dt` seconds of chamber time. Timed phases hand over to the
/// next phase exactly when their configured duration is reached,
/// carrying any remainder; Idle and Measure hold indefinitely.
pub fn advance(state: &ChamberState, durations: &PhaseDurations, dt: f64) -> ChamberState {
    assert!(dt > 0.0, "advance requires dt > 0");
    let mut state = state.clone();
    let mut remaining = dt;
    while remaining > 0.0 {
        let phase_len = match state.phase {
            ProtocolPhase::Idle | ProtocolPhase::Measure => {
                state.phase_elapsed += remaining;
                return state;
            }
            ProtocolPhase::Evacuate => durations.evacuate,
            ProtocolPhase::Intake => durations.intake,
            ProtocolPhase::Stabilize => durations.stabilize,
            ProtocolPhase::Purge => durations.purge,
        };
        let to_boundary = phase_len - state.phase_elapsed;
        if remaining + BOUNDARY_EPS < to_boundary {
            state.phase_elapsed += remaining;
            return state;
        }
        remaining -= to_boundary;
        if remaining < BOUNDARY_EPS {
            remaining = 0.0;
        }
        let next = match state.phase {
            ProtocolPhase::Evacuate => ProtocolPhase::Intake,
            ProtocolPhase::Intake => ProtocolPhase::Stabilize,
            ProtocolPhase::Stabilize => ProtocolPhase::Measure,
            ProtocolPhase::Purge => ProtocolPhase::Idle,
            _ => unreachable!(),
        };
        state = ChamberState::in_phase(next, state.sample_mixture);
    }
    state
}

/// Clamp a requested MFC flow to the configured per-species maximum.
pub fn clamp_flow(
    cfg: &MfcConfig,
    species: GasSpecies,
    requested: f64,
) -> Result<f64, ProtocolError> {
    if requested < 0.0 {
        return Err(ProtocolError::NegativeFlow(requested));
    }
    Ok(requested.min(cfg.max_flow[species.code() as usize]))
}

/// Build the piecewise-constant exposure seen by the sensors during a
/// scripted run: clean air while evacuating, the sample mixture from
/// intake start through measure end, then clean air during the purge.
/// Adjacent segments with equal mixtures merge.
pub fn exposure_schedule(
    durations: &PhaseDurations,
    mix: &GasMixture,
    measure_len: f64,
) -> Result<ExposureSchedule, ProtocolError> {
    durations.validate()?;
    if !(measure_len >= 0.0) {
        return Err(ProtocolError::Gas(GasError::InvalidSchedule(format!(
            "measure length must be >= 0, got {}",
            measure_len
        ))));
    }
    let t_gas_on = durations.evacuate;
    let t_gas_off = t_gas_on + durations.intake + durations.stabilize + measure_len;
    let t_end = t_gas_off + durations.purge;
    let clean = GasMixture::clean_air();

    let mut segments: Vec<ExposureSegment> = Vec::new();
    let mut push = |start: f64, end: f64, m: GasMixture| {
        if end <= start {
            return;
        }
        if let Some(last) = segments.last_mut() {
            if last.mix == m {
                last.end = end;
                return;
            }
        }
        segments.push(ExposureSegment { start, end, mix: m });
    };
    push(0.0, t_gas_on, clean);
    push(t_gas_on, t_gas_off, *mix);
    push(t_gas_off, t_end, clean);
    Ok(ExposureSchedule::new(segments)?)
}

/// One row of the protocol run log, recorded at each phase transition.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRow {
    pub t_s: f64,
    pub phase: ProtocolPhase,
    pub valve1: bool,
    pub valve2: bool,
    pub pump: bool,
}

/// Drive a complete scripted run through the state machine with time
/// step `dt`, recording a row per phase transition. The Measure hold
/// lasts `measure_len` seconds before `end_measurement` fires.
pub fn scripted_run(
    durations: &PhaseDurations,
    mix: GasMixture,
    measure_len: f64,
    dt: f64,
) -> Result<Vec<TransitionRow>, ProtocolError> {
    durations.validate()?;
    let mut rows = Vec::new();
    let mut state = ChamberState::idle();
    let mut step = 0u64;
    let log = |rows: &mut Vec<TransitionRow>, t: f64, s: &ChamberState| {
        rows.push(TransitionRow {
            t_s: t,
            phase: s.phase,
            valve1: s.valve1_open,
            valve2: s.valve2_open,
            pump: s.pump_on,
        });
    };
    log(&mut rows, 0.0, &state);
    state = start_run(&state, mix)?;
    log(&mut rows, 0.0, &state);
    loop {
        let prev_phase = state.phase;
        if state.phase == ProtocolPhase::Measure && state.phase_elapsed + BOUNDARY_EPS >= measure_len
        {
            state = end_measurement(&state)?;
        } else {
            state = advance(&state, durations, dt);
            step += 1;
        }
        if state.phase != prev_phase {
            log(&mut rows, step as f64 * dt, &state);
        }
        if state.phase == ProtocolPhase::Idle {
            return Ok(rows);
        }
    }
}

/// Serialize a run log in the `t_s,phase,valve1,valve2,pump` CSV format.
pub fn run_log_csv(rows: &[TransitionRow]) -> String {
    let mut out = String::from("t_s,phase,valve1,valve2,pump\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.t_s,
            r.phase,
            r.valve1 as u8,
            r.valve2 as u8,
            r.pump as u8
        ));
    }
    out
}
