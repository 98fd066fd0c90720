//! The run configuration file: a single nested key-value text file
//! (TOML) describing the sensor pack, measurement circuit, protocol
//! timings, acquisition settings and alert thresholds. `default.conf`
//! at the repository root is the canonical serialization of
//! `RunConfig::default()`.

use crate::error::CliError;
use enose_core::can::AlertThresholds;
use enose_core::daq::{AdcConfig, NoiseConfig};
use enose_core::gas::{
    default_sensor_pack, DividerCircuit, EnvConditions, GasSpecies, SensorModel, SensorSpec,
    Sensitivity,
};
use enose_core::protocol::{MfcConfig, PhaseDurations};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Acquisition sample period, seconds.
    pub sample_period: f64,
    /// Length of the Measure hold during simulate, seconds.
    pub measure_duration: f64,
    pub circuit: CircuitSection,
    pub durations: DurationsSection,
    pub adc: AdcSection,
    pub noise: NoiseSection,
    pub env: EnvSection,
    pub mfc: PerSpecies,
    pub alerts: PerSpecies,
    pub sensors: Vec<SensorEntry>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CircuitSection {
    pub r_load: f64,
    pub v_bias: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DurationsSection {
    pub evacuate: f64,
    pub intake: f64,
    pub stabilize: f64,
    pub purge: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AdcSection {
    pub bits: u32,
    pub v_ref: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub resistance_sigma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EnvSection {
    pub temperature: f64,
    pub relative_humidity: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PerSpecies {
    pub methane: f64,
    pub ethanol: f64,
    pub propane: f64,
    pub isobutane: f64,
    pub hydrogen: f64,
}

impl PerSpecies {
    pub fn as_array(&self) -> [f64; 5] {
        [
            self.methane,
            self.ethanol,
            self.propane,
            self.isobutane,
            self.hydrogen,
        ]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SensorEntry {
    pub id: String,
    pub r0_clean_air: f64,
    pub c_ref: f64,
    pub tau_rise: f64,
    pub tau_fall: f64,
    pub heater_voltage: f64,
    pub operating_temp: f64,
    pub temp_coeff: f64,
    pub humidity_coeff: f64,
    /// Per-sensor divider override; the global [circuit] applies when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub circuit: Option<CircuitSection>,
    pub sensitivity: SensitivityTable,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SensitivityTable {
    pub methane: SensitivityEntry,
    pub ethanol: SensitivityEntry,
    pub propane: SensitivityEntry,
    pub isobutane: SensitivityEntry,
    pub hydrogen: SensitivityEntry,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SensitivityEntry {
    pub gain: f64,
    pub exponent: f64,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        let pack = default_sensor_pack();
        RunConfig {
            sample_period: 0.1,
            measure_duration: 0.0,
            circuit: CircuitSection {
                r_load: 10_000.0,
                v_bias: 5.0,
            },
            durations: DurationsSection {
                evacuate: 10.0,
                intake: 10.0,
                stabilize: 60.0,
                purge: 120.0,
            },
            adc: AdcSection { bits: 10, v_ref: 5.0 },
            noise: NoiseSection {
                resistance_sigma: 0.01,
                seed: 42,
            },
            env: EnvSection {
                temperature: 20.0,
                relative_humidity: 50.0,
            },
            mfc: PerSpecies {
                methane: 200.0,
                ethanol: 200.0,
                propane: 200.0,
                isobutane: 200.0,
                hydrogen: 200.0,
            },
            alerts: PerSpecies {
                methane: 1000.0,
                ethanol: 1000.0,
                propane: 1000.0,
                isobutane: 1000.0,
                hydrogen: 1000.0,
            },
            sensors: pack.iter().map(sensor_entry_from_spec).collect(),
        }
    }
}

fn sensor_entry_from_spec(spec: &SensorSpec) -> SensorEntry {
    let s = |g: GasSpecies| {
        let sv = spec.sensitivity[g.code() as usize];
        SensitivityEntry {
            gain: sv.gain,
            exponent: sv.exponent,
        }
    };
    SensorEntry {
        id: spec.id.tag().to_string(),
        r0_clean_air: spec.r0_clean_air,
        c_ref: spec.c_ref,
        tau_rise: spec.tau_rise,
        tau_fall: spec.tau_fall,
        heater_voltage: spec.heater_voltage,
        operating_temp: spec.operating_temp,
        temp_coeff: spec.temp_coeff,
        humidity_coeff: spec.humidity_coeff,
        circuit: None,
        sensitivity: SensitivityTable {
            methane: s(GasSpecies::Methane),
            ethanol: s(GasSpecies::Ethanol),
            propane: s(GasSpecies::Propane),
            isobutane: s(GasSpecies::Isobutane),
            hydrogen: s(GasSpecies::Hydrogen),
        },
    }
}

/// Config resolved into core model types, validated.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub sample_period: f64,
    pub measure_duration: f64,
    pub sensors: [SensorSpec; 5],
    pub circuits: [DividerCircuit; 5],
    pub durations: PhaseDurations,
    pub adc: AdcConfig,
    pub noise: NoiseConfig,
    pub env: EnvConditions,
    pub mfc: MfcConfig,
    pub alerts: AlertThresholds,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {}", path.display(), e)))?;
        RunConfig::parse(&text)
    }

    /// Canonical serialization; `parse` of this output round-trips.
    pub fn serialize(&self) -> String {
        toml::to_string(self).expect("config serialization cannot fail")
    }

    pub fn resolve(&self) -> Result<ResolvedConfig, CliError> {
        let cfg_err = |msg: String| CliError::Config(msg);

        if !(self.sample_period > 0.0) {
            return Err(cfg_err(format!(
                "sample_period must be > 0, got {}",
                self.sample_period
            )));
        }
        if !(self.measure_duration >= 0.0) {
            return Err(cfg_err(format!(
                "measure_duration must be >= 0, got {}",
                self.measure_duration
            )));
        }
        if self.sensors.len() != 5 {
            return Err(cfg_err(format!(
                "exactly 5 sensors required, got {}",
                self.sensors.len()
            )));
        }

        let global_circuit = resolve_circuit(&self.circuit)?;
        let mut sensors: Vec<SensorSpec> = Vec::with_capacity(5);
        let mut circuits: Vec<DividerCircuit> = Vec::with_capacity(5);
        for entry in &self.sensors {
            let id = SensorModel::parse(&entry.id).ok_or_else(|| {
                cfg_err(format!(
                    "sensors.id '{}' is not one of TGS2602|TGS822|TGS825|TGS813|TGS880",
                    entry.id
                ))
            })?;
            let t = &entry.sensitivity;
            let conv = |e: SensitivityEntry| Sensitivity {
                gain: e.gain,
                exponent: e.exponent,
            };
            let spec = SensorSpec {
                id,
                r0_clean_air: entry.r0_clean_air,
                sensitivity: [
                    conv(t.methane),
                    conv(t.ethanol),
                    conv(t.propane),
                    conv(t.isobutane),
                    conv(t.hydrogen),
                ],
                c_ref: entry.c_ref,
                tau_rise: entry.tau_rise,
                tau_fall: entry.tau_fall,
                heater_voltage: entry.heater_voltage,
                operating_temp: entry.operating_temp,
                temp_coeff: entry.temp_coeff,
                humidity_coeff: entry.humidity_coeff,
            };
            spec.validate()
                .map_err(|e| cfg_err(format!("sensors[{}]: {}", entry.id, e)))?;
            sensors.push(spec);
            circuits.push(match &entry.circuit {
                Some(c) => resolve_circuit(c)
                    .map_err(|e| cfg_err(format!("sensors[{}]: {}", entry.id, e)))?,
                None => global_circuit,
            });
        }

        let durations = PhaseDurations {
            evacuate: self.durations.evacuate,
            intake: self.durations.intake,
            stabilize: self.durations.stabilize,
            purge: self.durations.purge,
        };
        durations
            .validate()
            .map_err(|e| cfg_err(format!("durations: {}", e)))?;

        let adc = AdcConfig {
            bits: self.adc.bits,
            v_ref: self.adc.v_ref,
        };
        adc.validate().map_err(|e| cfg_err(format!("adc: {}", e)))?;

        if !(self.noise.resistance_sigma >= 0.0) {
            return Err(cfg_err(format!(
                "noise.resistance_sigma must be >= 0, got {}",
                self.noise.resistance_sigma
            )));
        }
        let rh = self.env.relative_humidity;
        if !(0.0..=100.0).contains(&rh) {
            return Err(cfg_err(format!(
                "env.relative_humidity must be in [0, 100], got {}",
                rh
            )));
        }
        for (name, v) in [("mfc", self.mfc.as_array()), ("alerts", self.alerts.as_array())] {
            for (i, &x) in v.iter().enumerate() {
                if !(x > 0.0) {
                    return Err(cfg_err(format!(
                        "{}.{} must be > 0, got {}",
                        name,
                        GasSpecies::ALL[i].name().to_ascii_lowercase(),
                        x
                    )));
                }
            }
        }

        Ok(ResolvedConfig {
            sample_period: self.sample_period,
            measure_duration: self.measure_duration,
            sensors: sensors.try_into().expect("length checked above"),
            circuits: circuits.try_into().expect("length checked above"),
            durations,
            adc,
            noise: NoiseConfig {
                resistance_sigma: self.noise.resistance_sigma,
                seed: self.noise.seed,
            },
            env: EnvConditions {
                temperature: self.env.temperature,
                relative_humidity: rh,
            },
            mfc: MfcConfig {
                max_flow: self.mfc.as_array(),
            },
            alerts: AlertThresholds {
                ppm: self.alerts.as_array(),
            },
        })
    }
}

fn resolve_circuit(c: &CircuitSection) -> Result<DividerCircuit, CliError> {
    if !(c.r_load > 0.0) || !(c.v_bias > 0.0) {
        return Err(CliError::Config(format!(
            "circuit requires r_load > 0 and v_bias > 0, got r_load={} v_bias={}",
            c.r_load, c.v_bias
        )));
    }
    Ok(DividerCircuit {
        r_load: c.r_load,
        v_bias: c.v_bias,
    })
}
