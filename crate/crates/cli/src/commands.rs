//! Subcommand implementations. Everything here is deterministic given
//! the resolved config and seed.

use crate::config::ResolvedConfig;
use crate::error::CliError;
use crate::svg::{line_plot, PlotSpec, Series};
use enose_core::can::{
    alert_policy, bus_log_text, classification_message, decode, encode, parse_bus_log, SimBus,
    TelemetryMessage,
};
use enose_core::classifier::{
    classification_csv, classify, ClassificationResult, ClassifyOptions, FingerprintLibrary,
};
use enose_core::daq::{apply_noise, calibrate_baseline, extract_features, quantize, trace_csv, NoiseConfig, SensorFeatures};
use enose_core::gas::{
    divider_output, step_response, steady_state_ratio, steady_state_resistance, GasMixture,
    GasSpecies, SensorTrace,
};
use enose_core::protocol::{exposure_schedule, run_log_csv, scripted_run};
use std::path::{Path, PathBuf};

/// Everything a simulate run produced, with the paths written.
pub struct SimulateOutput {
    pub features: Vec<SensorFeatures>,
    pub result: ClassificationResult,
    pub alert: Option<TelemetryMessage>,
    pub files: Vec<PathBuf>,
}

fn write(out_dir: &Path, name: &str, contents: &str, files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let path = out_dir.join(name);
    std::fs::write(&path, contents)?;
    files.push(path);
    Ok(())
}

fn slice_trace(trace: &SensorTrace, from: f64, to: f64) -> SensorTrace {
    SensorTrace {
        sample_period: trace.sample_period,
        samples: trace
            .samples
            .iter()
            .filter(|s| s.t >= from - 1e-9 && s.t <= to + 1e-9)
            .cloned()
            .collect(),
    }
}

/// Run the full chamber protocol against the sensor array and emit
/// trace CSVs, the protocol transition log, the feature and
/// classification reports, a trace plot, and the CAN bus log.
pub fn cmd_simulate(
    cfg: &ResolvedConfig,
    mix: &GasMixture,
    out_dir: &Path,
) -> Result<SimulateOutput, CliError> {
    std::fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();

    let schedule = exposure_schedule(&cfg.durations, mix, cfg.measure_duration)?;
    let total = cfg.durations.scripted_total() + cfg.measure_duration;
    let gas_on = cfg.durations.evacuate;
    let gas_off = gas_on + cfg.durations.intake + cfg.durations.stabilize + cfg.measure_duration;

    let rows = scripted_run(&cfg.durations, *mix, cfg.measure_duration, cfg.sample_period)?;
    write(out_dir, "protocol.csv", &run_log_csv(&rows), &mut files)?;

    let mut bus = SimBus::new();
    let mut features = Vec::with_capacity(5);
    let mut trace_series = Vec::with_capacity(5);
    for (i, spec) in cfg.sensors.iter().enumerate() {
        let circuit = &cfg.circuits[i];
        let clean = step_response(spec, &schedule, &cfg.env, circuit, cfg.sample_period, total)?;
        // independent noise stream per sensor, derived from the run seed
        let noise = NoiseConfig {
            resistance_sigma: cfg.noise.resistance_sigma,
            seed: cfg.noise.seed.wrapping_add(i as u64),
        };
        let trace = apply_noise(&clean, circuit, &noise);

        write(
            out_dir,
            &format!("trace_{}.csv", spec.id.tag()),
            &trace_csv(spec.id.tag(), &trace, &cfg.adc)?,
            &mut files,
        )?;

        let baseline_trace = slice_trace(&trace, 0.0, gas_on);
        let baseline = calibrate_baseline(&baseline_trace, baseline_trace.duration())?;
        let exposure = slice_trace(&trace, gas_on, gas_off);
        let recovery = slice_trace(&trace, gas_off, total);
        let feats = extract_features(&exposure, &recovery, baseline)?;
        features.push(feats);

        // one Reading frame per sensor at the end of the measurement window
        let last = exposure.samples.last().ok_or_else(|| {
            CliError::Runtime("exposure window produced no samples".to_string())
        })?;
        let reading = TelemetryMessage::Reading {
            sensor_index: i as u8,
            seq: 0,
            adc_code: quantize(last.v_out.clamp(0.0, cfg.adc.v_ref), &cfg.adc)? as u16,
            resistance: last.resistance.round().min(u32::MAX as f64) as u32,
        };
        bus.submit(
            &format!("sensor{}", i),
            encode(&reading).map_err(|e| CliError::Runtime(e.to_string()))?,
        );

        trace_series.push(Series {
            label: spec.id.tag().to_string(),
            points: trace.samples.iter().map(|s| (s.t, s.resistance)).collect(),
        });
    }

    let mut feat_csv =
        String::from("sensor,steady_ratio,response_time_t90_s,recovery_time_t90_s,baseline_r0_ohm\n");
    for (spec, f) in cfg.sensors.iter().zip(&features) {
        feat_csv.push_str(&format!(
            "{},{},{},{},{}\n",
            spec.id.tag(),
            f.steady_ratio,
            f.response_time_t90,
            f.recovery_time_t90,
            f.baseline_r0
        ));
    }
    write(out_dir, "features.csv", &feat_csv, &mut files)?;

    let lib = FingerprintLibrary::new(cfg.sensors.clone())
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let ratios: Vec<f64> = features.iter().map(|f| f.steady_ratio).collect();
    let result = classify(&lib, &ratios, &ClassifyOptions::default())?;
    write(out_dir, "classification.csv", &classification_csv(&result), &mut files)?;

    bus.submit(
        "classifier",
        encode(&classification_message(&result)).map_err(|e| CliError::Runtime(e.to_string()))?,
    );
    let alert = alert_policy(&result, &cfg.alerts);
    if let Some(msg) = &alert {
        bus.submit(
            "safety",
            encode(msg).map_err(|e| CliError::Runtime(e.to_string()))?,
        );
    }
    bus.run_until_idle(0);
    write(out_dir, "bus.log", &bus_log_text(&bus.log), &mut files)?;

    let plot = line_plot(
        &PlotSpec {
            title: "Sensor array response",
            x_label: "time [s]",
            y_label: "resistance [ohm]",
            log_x: false,
            log_y: false,
        },
        &trace_series,
    );
    write(out_dir, "traces.svg", &plot, &mut files)?;

    Ok(SimulateOutput {
        features,
        result,
        alert,
        files,
    })
}

/// Steady-state sensitivity table over a log-spaced concentration grid.
pub struct SweepTable {
    pub sensor_ids: Vec<String>,
    pub concentrations: Vec<f64>,
    /// ratios[row][sensor]
    pub ratios: Vec<[f64; 5]>,
    /// v_rl[row][sensor]
    pub v_rl: Vec<[f64; 5]>,
}

pub fn sweep_table(
    cfg: &ResolvedConfig,
    species: GasSpecies,
    c_min: f64,
    c_max: f64,
    points: usize,
) -> Result<SweepTable, CliError> {
    if !(c_min > 0.0) || !(c_max > c_min) {
        return Err(CliError::Parse(format!(
            "bad range: need 0 < min < max, got min={} max={}",
            c_min, c_max
        )));
    }
    if points < 2 {
        return Err(CliError::Parse(format!(
            "bad range: need at least 2 points, got {}",
            points
        )));
    }
    let mut concentrations = Vec::with_capacity(points);
    let mut ratios = Vec::with_capacity(points);
    let mut v_rl = Vec::with_capacity(points);
    for i in 0..points {
        let f = i as f64 / (points - 1) as f64;
        let c = c_min * (c_max / c_min).powf(f);
        let mix = GasMixture::single(species, c)?;
        let mut row_r = [0.0; 5];
        let mut row_v = [0.0; 5];
        for (s, spec) in cfg.sensors.iter().enumerate() {
            row_r[s] = steady_state_ratio(spec, &mix);
            let rs = steady_state_resistance(spec, &mix, &cfg.env);
            row_v[s] = divider_output(rs, &cfg.circuits[s]);
        }
        concentrations.push(c);
        ratios.push(row_r);
        v_rl.push(row_v);
    }
    Ok(SweepTable {
        sensor_ids: cfg.sensors.iter().map(|s| s.id.tag().to_string()).collect(),
        concentrations,
        ratios,
        v_rl,
    })
}

/// Sweep CSV: `ppm`, then one Rs/Ro column per sensor, then one V_RL
/// column per sensor.
pub fn sweep_csv(table: &SweepTable) -> String {
    let mut out = String::from("ppm");
    for id in &table.sensor_ids {
        out.push_str(&format!(",ratio_{}", id));
    }
    for id in &table.sensor_ids {
        out.push_str(&format!(",v_rl_{}", id));
    }
    out.push('\n');
    for (i, c) in table.concentrations.iter().enumerate() {
        out.push_str(&format!("{}", c));
        for r in table.ratios[i] {
            out.push_str(&format!(",{}", r));
        }
        for v in table.v_rl[i] {
            out.push_str(&format!(",{}", v));
        }
        out.push('\n');
    }
    out
}

pub fn cmd_sweep(
    cfg: &ResolvedConfig,
    species: GasSpecies,
    c_min: f64,
    c_max: f64,
    points: usize,
    svg: bool,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    let table = sweep_table(cfg, species, c_min, c_max, points)?;
    std::fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    let name = format!("sweep_{}", species.name().to_ascii_lowercase());
    write(out_dir, &format!("{}.csv", name), &sweep_csv(&table), &mut files)?;
    if svg {
        let series: Vec<Series> = table
            .sensor_ids
            .iter()
            .enumerate()
            .map(|(s, id)| Series {
                label: id.clone(),
                points: table
                    .concentrations
                    .iter()
                    .zip(&table.ratios)
                    .map(|(&c, row)| (c, row[s]))
                    .collect(),
            })
            .collect();
        let plot = line_plot(
            &PlotSpec {
                title: &format!("Sensitivity to {} (Rs/Ro)", species.name()),
                x_label: "concentration [ppm]",
                y_label: "Rs/Ro",
                log_x: true,
                log_y: true,
            },
            &series,
        );
        write(out_dir, &format!("{}.svg", name), &plot, &mut files)?;
    }
    Ok(files)
}

/// Parse a fingerprint file: either the `features.csv` layout (the
/// steady_ratio column is taken) or a bare list of exactly five ratios.
pub fn parse_fingerprint(text: &str) -> Result<[f64; 5], CliError> {
    let mut data_lines: Vec<&str> = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        data_lines.push(line);
    }
    let mut values: Vec<f64> = Vec::new();
    if data_lines
        .first()
        .map_or(false, |l| l.starts_with("sensor,steady_ratio"))
    {
        for (i, line) in data_lines[1..].iter().enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() < 2 {
                return Err(CliError::Parse(format!(
                    "row {}: expected a steady_ratio column",
                    i + 2
                )));
            }
            values.push(fields[1].parse().map_err(|_| {
                CliError::Parse(format!("row {} column 2: bad number '{}'", i + 2, fields[1]))
            })?);
        }
    } else {
        for (i, line) in data_lines.iter().enumerate() {
            for (j, field) in line.split(',').map(str::trim).enumerate() {
                if field.is_empty() {
                    continue;
                }
                values.push(field.parse().map_err(|_| {
                    CliError::Parse(format!("row {} column {}: bad number '{}'", i + 1, j + 1, field))
                })?);
            }
        }
    }
    if values.len() != 5 {
        return Err(CliError::Parse(format!(
            "expected exactly 5 steady ratios, found {}",
            values.len()
        )));
    }
    Ok([values[0], values[1], values[2], values[3], values[4]])
}

/// Classify a fingerprint file against the configured library and
/// return the single-row report CSV.
pub fn cmd_classify(cfg: &ResolvedConfig, path: &Path) -> Result<String, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Parse(format!("{}: {}", path.display(), e)))?;
    let fingerprint = parse_fingerprint(&text)?;
    let lib = FingerprintLibrary::new(cfg.sensors.clone())
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let result = classify(&lib, &fingerprint, &ClassifyOptions::default())
        .map_err(|e| CliError::Parse(e.to_string()))?;
    Ok(classification_csv(&result))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogFilter {
    All,
    Reading,
    Classification,
    Alert,
}

impl LogFilter {
    pub fn parse(s: &str) -> Result<LogFilter, CliError> {
        match s.to_ascii_lowercase().as_str() {
            "all" => Ok(LogFilter::All),
            "reading" => Ok(LogFilter::Reading),
            "classification" => Ok(LogFilter::Classification),
            "alert" => Ok(LogFilter::Alert),
            other => Err(CliError::Parse(format!(
                "unknown filter '{}' (expected all|reading|classification|alert)",
                other
            ))),
        }
    }

    fn matches(self, msg: &TelemetryMessage) -> bool {
        matches!(
            (self, msg),
            (LogFilter::All, _)
                | (LogFilter::Reading, TelemetryMessage::Reading { .. })
                | (LogFilter::Classification, TelemetryMessage::Classification { .. })
                | (LogFilter::Alert, TelemetryMessage::Alert { .. })
        )
    }
}

/// Decode a bus log file into a human-readable listing, one frame per
/// line, optionally filtered by message kind.
pub fn cmd_canlog(path: &Path, filter: LogFilter) -> Result<String, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Parse(format!("{}: {}", path.display(), e)))?;
    let log = parse_bus_log(&text).map_err(|e| CliError::Parse(e.to_string()))?;
    let mut out = String::new();
    for (i, entry) in log.entries.iter().enumerate() {
        let msg = decode(&entry.frame)
            .map_err(|e| CliError::Parse(format!("line {}: {}", i + 1, e)))?;
        if !filter.matches(&msg) {
            continue;
        }
        let desc = match msg {
            TelemetryMessage::Reading {
                sensor_index,
                seq,
                adc_code,
                resistance,
            } => format!(
                "Reading sensor={} seq={} adc={} resistance={} ohm",
                sensor_index, seq, adc_code, resistance
            ),
            TelemetryMessage::Classification {
                species_code,
                confidence_byte,
                concentration,
            } => {
                let name = GasSpecies::from_code(species_code)
                    .map(|s| s.name())
                    .unwrap_or("Unknown");
                format!(
                    "Classification species={} concentration={} ppm confidence={}/255",
                    name, concentration, confidence_byte
                )
            }
            TelemetryMessage::Alert {
                species_code,
                level,
            } => {
                let name = GasSpecies::from_code(species_code)
                    .map(|s| s.name())
                    .unwrap_or("Unknown");
                format!("Alert species={} level={}", name, level)
            }
        };
        out.push_str(&format!(
            "tick={} id={:#05x} node={} {}\n",
            entry.tick,
            entry.frame.id(),
            entry.sender,
            desc
        ));
    }
    Ok(out)
}

/// Parse repeated `species=ppm` arguments into a mixture.
pub fn parse_mixture(args: &[String]) -> Result<GasMixture, CliError> {
    let mut ppm = [0.0; 5];
    for arg in args {
        let (name, value) = arg.split_once('=').ok_or_else(|| {
            CliError::Parse(format!("bad mixture '{}', expected species=ppm", arg))
        })?;
        let species = GasSpecies::parse(name.trim())
            .ok_or_else(|| CliError::Parse(format!("unknown gas species '{}'", name)))?;
        let c: f64 = value
            .trim()
            .parse()
            .map_err(|_| CliError::Parse(format!("bad concentration '{}'", value)))?;
        ppm[species.code() as usize] += c;
    }
    GasMixture::new(ppm).map_err(|e| CliError::Parse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;

    #[test]
    fn sweep_rejects_bad_range() {
        let cfg = RunConfig::default().resolve().unwrap();
        assert!(matches!(
            sweep_table(&cfg, GasSpecies::Methane, 100.0, 100.0, 10),
            Err(CliError::Parse(_))
        ));
        assert!(matches!(
            sweep_table(&cfg, GasSpecies::Methane, 100.0, 1000.0, 1),
            Err(CliError::Parse(_))
        ));
    }

    #[test]
    fn sweep_endpoints_are_exact() {
        let cfg = RunConfig::default().resolve().unwrap();
        let t = sweep_table(&cfg, GasSpecies::Methane, 100.0, 10_000.0, 2).unwrap();
        assert_eq!(t.concentrations.len(), 2);
        assert!((t.concentrations[0] - 100.0).abs() < 1e-9);
        assert!((t.concentrations[1] - 10_000.0).abs() < 1e-9);
    }

    #[test]
    fn sweep_columns_are_monotone() {
        let cfg = RunConfig::default().resolve().unwrap();
        let t = sweep_table(&cfg, GasSpecies::Methane, 100.0, 10_000.0, 50).unwrap();
        assert_eq!(t.concentrations.len(), 50);
        for s in 0..5 {
            for w in t.ratios.windows(2) {
                assert!(w[1][s] < w[0][s]);
            }
            for w in t.v_rl.windows(2) {
                assert!(w[1][s] > w[0][s]);
            }
        }
    }

    #[test]
    fn fingerprint_accepts_bare_ratio_list() {
        let parsed = parse_fingerprint("0.5,0.6,0.7,0.8,0.9\n").unwrap();
        assert_eq!(parsed, [0.5, 0.6, 0.7, 0.8, 0.9]);
        let parsed = parse_fingerprint("0.5\n0.6\n0.7\n0.8\n0.9\n").unwrap();
        assert_eq!(parsed, [0.5, 0.6, 0.7, 0.8, 0.9]);
    }

    #[test]
    fn fingerprint_rejects_three_columns() {
        assert!(matches!(
            parse_fingerprint("0.5,0.6,0.7\n"),
            Err(CliError::Parse(_))
        ));
    }

    #[test]
    fn mixture_parsing() {
        let mix = parse_mixture(&["methane=500".to_string()]).unwrap();
        assert_eq!(mix.ppm(GasSpecies::Methane), 500.0);
        assert!(parse_mixture(&["krypton=1".to_string()]).is_err());
        assert!(parse_mixture(&["methane".to_string()]).is_err());
    }
}
