//! Bit-exact CAN frame codec for readings, classifications and alerts,
//! plus a deterministic simulated bus with lowest-id-wins arbitration
//! and a line-oriented bus log interchange format.

use crate::classifier::ClassificationResult;
use thiserror::Error;

/// Alert frames carry the highest CAN priority.
pub const ALERT_ID: u16 = 0x080;
/// Reading frames occupy 0x100 + sensor_index (0x100..=0x104).
pub const READING_BASE_ID: u16 = 0x100;
/// Classification report frame id.
pub const CLASSIFICATION_ID: u16 = 0x200;

#[derive(Debug, Error, PartialEq)]
pub enum CanError {
    #[error("field {field} value {value} exceeds its range")]
    FieldOverflow { field: &'static str, value: u64 },
    #[error("id {0:#05x} does not belong to the telemetry schema")]
    UnknownId(u16),
    #[error("id {id:#05x} requires dlc {expected}, frame has {actual}")]
    BadLength { id: u16, expected: u8, actual: u8 },
    #[error("species code {0} is invalid (valid: 0-4 and 255)")]
    InvalidSpeciesCode(u8),
    #[error("alert level {0} outside 1-3")]
    InvalidLevel(u8),
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("bus log parse error at line {line}: {reason}")]
    LogParse { line: usize, reason: String },
}

/// Classic CAN data frame: 11-bit identifier, up to 8 payload bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanFrame {
    id: u16,
    payload: Vec<u8>,
}

impl CanFrame {
    pub fn new(id: u16, payload: Vec<u8>) -> Result<CanFrame, CanError> {
        if id >= 0x800 {
            return Err(CanError::InvalidFrame(format!(
                "id {:#x} does not fit in 11 bits",
                id
            )));
        }
        if payload.len() > 8 {
            return Err(CanError::InvalidFrame(format!(
                "payload of {} bytes exceeds 8",
                payload.len()
            )));
        }
        Ok(CanFrame { id, payload })
    }

    pub fn id(&self) -> u16 {
        self.id
    }

    pub fn dlc(&self) -> u8 {
        self.payload.len() as u8
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }
}

/// Species code carried on the wire for an Unknown classification.
pub const SPECIES_UNKNOWN: u8 = 255;

/// Application messages carried over the bus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TelemetryMessage {
    Reading {
        sensor_index: u8,
        seq: u8,
        adc_code: u16,
        resistance: u32,
    },
    Classification {
        species_code: u8,
        confidence_byte: u8,
        concentration: u32,
    },
    Alert {
        species_code: u8,
        level: u8,
    },
}

fn check_species(code: u8, allow_unknown: bool) -> Result<(), CanError> {
    if code <= 4 || (allow_unknown && code == SPECIES_UNKNOWN) {
        Ok(())
    } else {
        Err(CanError::InvalidSpeciesCode(code))
    }
}

/// Encode a message into its frame. Layouts (all multi-byte fields
/// big-endian):
/// - Reading: id 0x100 + sensor_index, dlc 8,
///   `[sensor_index, seq, adc_hi, adc_lo, r_b3, r_b2, r_b1, r_b0]`
/// - Classification: id 0x200, dlc 8,
///   `[species_code, confidence_byte, c_b3, c_b2, c_b1, c_b0, 0, 0]`
/// - Alert: id 0x080, dlc 2, `[species_code, level]`
pub fn encode(msg: &TelemetryMessage) -> Result<CanFrame, CanError> {
    match *msg {
        TelemetryMessage::Reading {
            sensor_index,
            seq,
            adc_code,
            resistance,
        } => {
            if sensor_index > 4 {
                return Err(CanError::FieldOverflow {
                    field: "sensor_index",
                    value: sensor_index as u64,
                });
            }
            let a = adc_code.to_be_bytes();
            let r = resistance.to_be_bytes();
            CanFrame::new(
                READING_BASE_ID + sensor_index as u16,
                vec![sensor_index, seq, a[0], a[1], r[0], r[1], r[2], r[3]],
            )
        }
        TelemetryMessage::Classification {
            species_code,
            confidence_byte,
            concentration,
        } => {
            check_species(species_code, true)?;
            let c = concentration.to_be_bytes();
            CanFrame::new(
                CLASSIFICATION_ID,
                vec![species_code, confidence_byte, c[0], c[1], c[2], c[3], 0x00, 0x00],
            )
        }
        TelemetryMessage::Alert { species_code, level } => {
            check_species(species_code, false)?;
            if !(1..=3).contains(&level) {
                return Err(CanError::FieldOverflow {
                    field: "level",
                    value: level as u64,
                });
            }
            CanFrame::new(ALERT_ID, vec![species_code, level])
        }
    }
}

fn expect_dlc(frame: &CanFrame, expected: u8) -> Result<(), CanError> {
    if frame.dlc() != expected {
        return Err(CanError::BadLength {
            id: frame.id,
            expected,
            actual: frame.dlc(),
        });
    }
    Ok(())
}

/// Exact inverse of `encode` on every encodable message.
pub fn decode(frame: &CanFrame) -> Result<TelemetryMessage, CanError> {
    let p = frame.payload();
    match frame.id {
        ALERT_ID => {
            expect_dlc(frame, 2)?;
            check_species(p[0], false)?;
            if !(1..=3).contains(&p[1]) {
                return Err(CanError::InvalidLevel(p[1]));
            }
            Ok(TelemetryMessage::Alert {
                species_code: p[0],
                level: p[1],
            })
        }
        id if (READING_BASE_ID..READING_BASE_ID + 5).contains(&id) => {
            expect_dlc(frame, 8)?;
            let idx = (id - READING_BASE_ID) as u8;
            if p[0] != idx {
                return Err(CanError::InvalidFrame(format!(
                    "reading id {:#05x} disagrees with sensor_index byte {}",
                    id, p[0]
                )));
            }
            Ok(TelemetryMessage::Reading {
                sensor_index: idx,
                seq: p[1],
                adc_code: u16::from_be_bytes([p[2], p[3]]),
                resistance: u32::from_be_bytes([p[4], p[5], p[6], p[7]]),
            })
        }
        CLASSIFICATION_ID => {
            expect_dlc(frame, 8)?;
            check_species(p[0], true)?;
            Ok(TelemetryMessage::Classification {
                species_code: p[0],
                confidence_byte: p[1],
                concentration: u32::from_be_bytes([p[2], p[3], p[4], p[5]]),
            })
        }
        id => Err(CanError::UnknownId(id)),
    }
}

/// Build the wire message for a classification result. Concentration
/// saturates at u32::MAX ppm and confidence maps to a byte.
pub fn classification_message(result: &ClassificationResult) -> TelemetryMessage {
    let species_code = result
        .species
        .map(|s| s.code())
        .unwrap_or(SPECIES_UNKNOWN);
    let concentration = if result.concentration >= u32::MAX as f64 {
        u32::MAX
    } else {
        result.concentration.round() as u32
    };
    TelemetryMessage::Classification {
        species_code,
        confidence_byte: (result.confidence.clamp(0.0, 1.0) * 255.0).round() as u8,
        concentration,
    }
}

/// Per-species alert thresholds, ppm, indexed by species code.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlertThresholds {
    pub ppm: [f64; 5],
}

impl Default for AlertThresholds {
    fn default() -> AlertThresholds {
        AlertThresholds { ppm: [1000.0; 5] }
    }
}

/// Alert escalation: level 1 at the threshold, 2 at twice it, 3 at five
/// times it. Unknown classifications never alert.
pub fn alert_policy(
    result: &ClassificationResult,
    thresholds: &AlertThresholds,
) -> Option<TelemetryMessage> {
    let species = result.species?;
    let threshold = thresholds.ppm[species.code() as usize];
    let c = result.concentration;
    let level = if c >= 5.0 * threshold {
        3
    } else if c >= 2.0 * threshold {
        2
    } else if c >= threshold {
        1
    } else {
        return None;
    };
    Some(TelemetryMessage::Alert {
        species_code: species.code(),
        level,
    })
}

/// One transmitted frame with its tick and sending node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BusLogEntry {
    pub tick: u64,
    pub frame: CanFrame,
    pub sender: String,
}

/// Ordered transmission record. Ticks are non-decreasing and frames
/// within a tick appear in arbitration (ascending id) order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BusLog {
    pub entries: Vec<BusLogEntry>,
}

/// Deterministic single-wire bus: each tick, the pending frame with the
/// lowest id (ties by lowest node id) wins arbitration and transmits;
/// the losers stay pending.
#[derive(Debug, Clone, Default)]
pub struct SimBus {
    pending: Vec<(String, CanFrame)>,
    pub log: BusLog,
}

impl SimBus {
    pub fn new() -> SimBus {
        SimBus::default()
    }

    pub fn submit(&mut self, node: &str, frame: CanFrame) {
        self.pending.push((node.to_string(), frame));
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    /// Transmit at most one frame at this tick. Returns whether a frame
    /// was sent.
    pub fn step(&mut self, tick: u64) -> bool {
        let winner = self
            .pending
            .iter()
            .enumerate()
            .min_by(|(_, (na, fa)), (_, (nb, fb))| (fa.id, na).cmp(&(fb.id, nb)))
            .map(|(i, _)| i);
        match winner {
            Some(i) => {
                let (node, frame) = self.pending.remove(i);
                self.log.entries.push(BusLogEntry {
                    tick,
                    frame,
                    sender: node,
                });
                true
            }
            None => false,
        }
    }

    /// Drain all pending frames, one per tick starting at `start_tick`.
    pub fn run_until_idle(&mut self, start_tick: u64) -> u64 {
        let mut tick = start_tick;
        while self.step(tick) {
            tick += 1;
        }
        tick
    }
}

/// Render a bus log in the interchange text format, one frame per line:
/// `<tick> <id-hex-3> <dlc> <payload-hex-bytes> <node>`.
pub fn bus_log_text(log: &BusLog) -> String {
    let mut out = String::new();
    for e in &log.entries {
        out.push_str(&format!("{} {:03x} {}", e.tick, e.frame.id(), e.frame.dlc()));
        for b in e.frame.payload() {
            out.push_str(&format!(" {:02x}", b));
        }
        out.push(' ');
        out.push_str(&e.sender);
        out.push('\n');
    }
    out
}

/// Parse the interchange text format back into a bus log.
pub fn parse_bus_log(text: &str) -> Result<BusLog, CanError> {
    let mut log = BusLog::default();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let fail = |reason: String| CanError::LogParse {
            line: lineno,
            reason,
        };
        if fields.len() < 4 {
            return Err(fail(format!("expected at least 4 fields, got {}", fields.len())));
        }
        let tick: u64 = fields[0]
            .parse()
            .map_err(|_| fail(format!("bad tick '{}'", fields[0])))?;
        let id = u16::from_str_radix(fields[1], 16)
            .map_err(|_| fail(format!("bad hex id '{}'", fields[1])))?;
        let dlc: usize = fields[2]
            .parse()
            .map_err(|_| fail(format!("bad dlc '{}'", fields[2])))?;
        if fields.len() != 4 + dlc {
            return Err(fail(format!(
                "dlc {} implies {} fields, line has {}",
                dlc,
                4 + dlc,
                fields.len()
            )));
        }
        let mut payload = Vec::with_capacity(dlc);
        for f in &fields[3..3 + dlc] {
            payload.push(
                u8::from_str_radix(f, 16).map_err(|_| fail(format!("bad hex byte '{}'", f)))?,
            );
        }
        let sender = fields[3 + dlc].to_string();
        let frame = CanFrame::new(id, payload).map_err(|e| fail(e.to_string()))?;
        if let Some(last) = log.entries.last() {
            if tick < last.tick {
                return Err(fail(format!(
                    "tick {} goes backwards (previous {})",
                    tick, last.tick
                )));
            }
            if tick == last.tick && frame.id() < last.frame.id() {
                return Err(fail(format!(
                    "id {:03x} out of arbitration order within tick {}",
                    frame.id(),
                    tick
                )));
            }
        }
        log.entries.push(BusLogEntry {
            tick,
            frame,
            sender,
        });
    }
    Ok(log)
}
