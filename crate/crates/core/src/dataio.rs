//! Flight-log CSV schema, dataset directory layout, and derived metrics
//! (voltage-contour irregularity, per-run summaries).
//!
//! The CSV format is bit-exact: `.` decimal separator, `\n` line endings, no
//! quoting, numbers rendered in the shortest decimal form that round-trips.
//! `read_log` is the exact inverse of `write_log` on its own output.

use std::io::{self, BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{CompassDir, VoltageTrace};
use crate::grid::TICK_MILLIS;
use crate::sim::{MissionResult, Outcome, SimEventKind};

pub const LOG_HEADER: &str =
    "timestamp_ms,x,y,z,roll,pitch,yaw,voltage,rel_wind_dir,travel_distance,waiting_time";

#[derive(Debug, Error)]
pub enum DataIoError {
    #[error("malformed header: expected {LOG_HEADER:?}")]
    MalformedHeader,
    #[error("timestamp at row {row} does not advance by {TICK_MILLIS} ms")]
    NonMonotoneTimestamp { row: usize },
    #[error("timestamp at row {row} is not a multiple of {TICK_MILLIS} ms")]
    BadTimestamp { row: usize },
    #[error("unparseable number in row {row}, column {column:?}")]
    BadNumber { row: usize, column: &'static str },
    #[error("row {row} has {got} fields, expected 11")]
    WrongFieldCount { row: usize, got: usize },
    #[error("{field} decreases at row {row}")]
    NonMonotoneCumulative { row: usize, field: &'static str },
    #[error("records violate the log invariants: {0}")]
    InvariantViolation(String),
    #[error("trace too short for a second difference: {0} samples")]
    TooShort(usize),
    #[error("invalid dataset key: {0}")]
    InvalidKey(String),
    #[error("invalid dataset path {0:?}")]
    InvalidPath(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One 100 ms telemetry sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightLogRecord {
    pub timestamp_ms: u64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    pub voltage: f64,
    /// Signed relative wind direction, degrees; `None` in calm air.
    pub rel_wind_dir: Option<f64>,
    /// Cumulative travel distance, meters.
    pub travel_distance: f64,
    /// Cumulative waiting time, seconds.
    pub waiting_time: f64,
}

fn validate_records(records: &[FlightLogRecord]) -> Result<(), String> {
    for (i, r) in records.iter().enumerate() {
        if r.timestamp_ms % TICK_MILLIS != 0 {
            return Err(format!("timestamp {} at row {} off the 100 ms grid", r.timestamp_ms, i + 1));
        }
        let floats = [
            r.x,
            r.y,
            r.z,
            r.roll,
            r.pitch,
            r.yaw,
            r.voltage,
            r.rel_wind_dir.unwrap_or(0.0),
            r.travel_distance,
            r.waiting_time,
        ];
        if floats.iter().any(|v| !v.is_finite()) {
            return Err(format!("non-finite field at row {}", i + 1));
        }
        if i > 0 {
            let prev = &records[i - 1];
            if r.timestamp_ms != prev.timestamp_ms + TICK_MILLIS {
                return Err(format!("timestamp at row {} does not advance by 100 ms", i + 1));
            }
            if r.travel_distance < prev.travel_distance {
                return Err(format!("travel_distance decreases at row {}", i + 1));
            }
            if r.waiting_time < prev.waiting_time {
                return Err(format!("waiting_time decreases at row {}", i + 1));
            }
        }
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Write records as CSV: header row, then one row per record in the fixed
/// column order. Fails on records violating the schema invariants.
pub fn write_log<W: Write>(records: &[FlightLogRecord], mut w: W) -> Result<(), DataIoError> {
    validate_records(records).map_err(DataIoError::InvariantViolation)?;
    writeln!(w, "{LOG_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.timestamp_ms,
            r.x,
            r.y,
            r.z,
            r.roll,
            r.pitch,
            r.yaw,
            r.voltage,
            fmt_opt(r.rel_wind_dir),
            r.travel_distance,
            r.waiting_time
        )?;
    }
    Ok(())
}

pub fn write_log_file(records: &[FlightLogRecord], path: &Path) -> Result<(), DataIoError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut file = io::BufWriter::new(std::fs::File::create(path)?);
    write_log(records, &mut file)?;
    file.flush()?;
    Ok(())
}

fn parse_f64(field: &str, row: usize, column: &'static str) -> Result<f64, DataIoError> {
    let v: f64 = field
        .parse()
        .map_err(|_| DataIoError::BadNumber { row, column })?;
    if !v.is_finite() {
        return Err(DataIoError::BadNumber { row, column });
    }
    Ok(v)
}

/// Parse and validate a flight-log CSV. Row indices in errors are 1-based
/// over data rows (the header is row 0).
pub fn read_log<R: BufRead>(reader: R) -> Result<Vec<FlightLogRecord>, DataIoError> {
    let mut lines = reader.lines();
    match lines.next().transpose()? {
        Some(line) if line == LOG_HEADER => {}
        _ => return Err(DataIoError::MalformedHeader),
    }
    let mut records: Vec<FlightLogRecord> = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = i + 1;
        let line = line?;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 11 {
            return Err(DataIoError::WrongFieldCount {
                row,
                got: fields.len(),
            });
        }
        let timestamp_ms: u64 = fields[0].parse().map_err(|_| DataIoError::BadNumber {
            row,
            column: "timestamp_ms",
        })?;
        if timestamp_ms % TICK_MILLIS != 0 {
            return Err(DataIoError::BadTimestamp { row });
        }
        let record = FlightLogRecord {
            timestamp_ms,
            x: parse_f64(fields[1], row, "x")?,
            y: parse_f64(fields[2], row, "y")?,
            z: parse_f64(fields[3], row, "z")?,
            roll: parse_f64(fields[4], row, "roll")?,
            pitch: parse_f64(fields[5], row, "pitch")?,
            yaw: parse_f64(fields[6], row, "yaw")?,
            voltage: parse_f64(fields[7], row, "voltage")?,
            rel_wind_dir: if fields[8].is_empty() {
                None
            } else {
                Some(parse_f64(fields[8], row, "rel_wind_dir")?)
            },
            travel_distance: parse_f64(fields[9], row, "travel_distance")?,
            waiting_time: parse_f64(fields[10], row, "waiting_time")?,
        };
        if let Some(prev) = records.last() {
            if record.timestamp_ms != prev.timestamp_ms + TICK_MILLIS {
                return Err(DataIoError::NonMonotoneTimestamp { row });
            }
            if record.travel_distance < prev.travel_distance {
                return Err(DataIoError::NonMonotoneCumulative {
                    row,
                    field: "travel_distance",
                });
            }
            if record.waiting_time < prev.waiting_time {
                return Err(DataIoError::NonMonotoneCumulative {
                    row,
                    field: "waiting_time",
                });
            }
        }
        records.push(record);
    }
    Ok(records)
}

pub fn read_log_file(path: &Path) -> Result<Vec<FlightLogRecord>, DataIoError> {
    read_log(io::BufReader::new(std::fs::File::open(path)?))
}

/// Grouping key of one per-drone log file in the dataset tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetKey {
    pub stations: u8,
    pub path_set: u8,
    pub wind_speed_kmh: f64,
    pub wind_dir: Option<CompassDir>,
    pub drone: String,
}

pub const DATASET_DRONES: [&str; 3] = ["E3", "E5", "E7"];
pub const DATASET_WIND_SPEEDS: [f64; 2] = [6.1, 7.6];
pub const DATASET_WIND_DIRS: [CompassDir; 3] = [CompassDir::N, CompassDir::S, CompassDir::E];

impl DatasetKey {
    pub fn validate(&self) -> Result<(), DataIoError> {
        let err = |msg: String| Err(DataIoError::InvalidKey(msg));
        if !(1..=2).contains(&self.stations) {
            return err(format!("stations {} not in {{1, 2}}", self.stations));
        }
        if !(1..=5).contains(&self.path_set) {
            return err(format!("path_set {} not in 1..=5", self.path_set));
        }
        match (self.wind_speed_kmh, self.wind_dir) {
            (s, None) if s == 0.0 => {}
            (s, Some(d)) if DATASET_WIND_SPEEDS.contains(&s) => {
                if !DATASET_WIND_DIRS.contains(&d) {
                    return err(format!("wind direction {d} not in {{N, S, E}}"));
                }
            }
            (s, d) => {
                return err(format!(
                    "wind speed {s} with direction {d:?}: direction must be absent exactly when speed is 0"
                ))
            }
        }
        if !DATASET_DRONES.contains(&self.drone.as_str()) {
            return err(format!("drone {:?} not in {{E3, E5, E7}}", self.drone));
        }
        Ok(())
    }
}

fn speed_label(speed: f64) -> String {
    if speed == 0.0 {
        "0".to_string()
    } else {
        speed.to_string()
    }
}

/// Relative path of a log file inside the dataset tree:
/// `{stations}station/path{p}/wind{speed}/{dir}/{drone}.csv`.
pub fn dataset_path(key: &DatasetKey) -> Result<String, DataIoError> {
    key.validate()?;
    let dir = key.wind_dir.map(|d| d.letter()).unwrap_or("calm");
    Ok(format!(
        "{}station/path{}/wind{}/{}/{}.csv",
        key.stations,
        key.path_set,
        speed_label(key.wind_speed_kmh),
        dir,
        key.drone
    ))
}

/// Recover the dataset key from a relative path produced by [`dataset_path`].
pub fn parse_dataset_path(path: &str) -> Result<DatasetKey, DataIoError> {
    let bad = || DataIoError::InvalidPath(path.to_string());
    let parts: Vec<&str> = path.split('/').collect();
    if parts.len() != 5 {
        return Err(bad());
    }
    let stations: u8 = parts[0].strip_suffix("station").ok_or_else(bad)?.parse().map_err(|_| bad())?;
    let path_set: u8 = parts[1].strip_prefix("path").ok_or_else(bad)?.parse().map_err(|_| bad())?;
    let speed_text = parts[2].strip_prefix("wind").ok_or_else(bad)?;
    let wind_speed_kmh: f64 = speed_text.parse().map_err(|_| bad())?;
    if speed_label(wind_speed_kmh) != speed_text {
        return Err(bad());
    }
    let wind_dir = match parts[3] {
        "calm" => None,
        d => Some(d.parse::<CompassDir>().map_err(|_| bad())?),
    };
    let drone = parts[4].strip_suffix(".csv").ok_or_else(bad)?.to_string();
    let key = DatasetKey {
        stations,
        path_set,
        wind_speed_kmh,
        wind_dir,
        drone,
    };
    key.validate()?;
    Ok(key)
}

/// Jaggedness of a voltage contour: the population standard deviation of the
/// second differences of the series. Affine traces score exactly 0, so the
/// metric is invariant to offset and to the (wind-dependent) drain slope.
pub fn contour_irregularity(trace: &VoltageTrace) -> Result<f64, DataIoError> {
    irregularity_of(trace.voltages())
}

fn irregularity_of(v: &[f64]) -> Result<f64, DataIoError> {
    if v.len() < 3 {
        return Err(DataIoError::TooShort(v.len()));
    }
    let d2: Vec<f64> = v.windows(3).map(|w| w[2] - 2.0 * w[1] + w[0]).collect();
    let mean = d2.iter().sum::<f64>() / d2.len() as f64;
    let var = d2.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / d2.len() as f64;
    Ok(var.sqrt())
}

/// Maximal index ranges (inclusive sample spans) during which the drone was
/// moving, judged by strictly increasing travel distance.
pub fn flight_segments(records: &[FlightLogRecord]) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start: Option<usize> = None;
    for k in 0..records.len().saturating_sub(1) {
        let moving = records[k + 1].travel_distance > records[k].travel_distance + 1e-12;
        match (moving, start) {
            (true, None) => start = Some(k),
            (false, Some(s)) => {
                spans.push((s, k));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push((s, records.len() - 1));
    }
    spans
}

/// Per-drone summary of one mission run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub drone: String,
    pub outcome: Outcome,
    pub initial_voltage: f64,
    pub final_voltage: f64,
    /// Total voltage drained over the run (recharge gains excluded).
    pub consumed_voltage: f64,
    #[serde(with = "crate::grid::ticks_as_seconds")]
    pub flight_s: u64,
    #[serde(with = "crate::grid::ticks_as_seconds")]
    pub recharge_s: u64,
    #[serde(with = "crate::grid::ticks_as_seconds")]
    pub waiting_s: u64,
    #[serde(with = "crate::grid::ticks_as_seconds")]
    pub completion_s: u64,
    /// Consumed voltage divided by flight time.
    pub mean_drain_vps: f64,
    /// Contour irregularity of each flight leg, in flight order.
    pub leg_irregularity: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub rows: Vec<SummaryRow>,
    #[serde(with = "crate::grid::ticks_as_seconds")]
    pub makespan_s: u64,
}

/// Reduce a mission result to one summary row per drone plus the fleet
/// makespan.
pub fn summarize_run(result: &MissionResult) -> RunSummary {
    let rows = result
        .drones
        .iter()
        .map(|d| {
            let mut recharge_gain = 0.0;
            let mut charge_start = None;
            for ev in result.events.iter().filter(|e| e.drone == d.id) {
                match &ev.kind {
                    SimEventKind::ChargeStart { voltage, .. } => charge_start = Some(*voltage),
                    SimEventKind::ChargeEnd { voltage, .. } => {
                        if let Some(start) = charge_start.take() {
                            recharge_gain += voltage - start;
                        }
                    }
                    _ => {}
                }
            }
            let consumed = d.initial_voltage - d.final_voltage + recharge_gain;
            let flight_seconds = crate::grid::seconds(d.flight_ticks);
            let mean_drain = if d.flight_ticks > 0 {
                consumed / flight_seconds
            } else {
                0.0
            };
            let leg_irregularity = flight_segments(&d.log)
                .into_iter()
                .map(|(a, b)| {
                    let volts: Vec<f64> = d.log[a..=b].iter().map(|r| r.voltage).collect();
                    irregularity_of(&volts).unwrap_or(0.0)
                })
                .collect();
            SummaryRow {
                drone: d.id.clone(),
                outcome: d.outcome,
                initial_voltage: d.initial_voltage,
                final_voltage: d.final_voltage,
                consumed_voltage: consumed,
                flight_s: d.flight_ticks,
                recharge_s: d.recharge_ticks,
                waiting_s: d.waiting_ticks,
                completion_s: d.completion_ticks,
                mean_drain_vps: mean_drain,
                leg_irregularity,
            }
        })
        .collect();
    RunSummary {
        rows,
        makespan_s: result.makespan_ticks,
    }
}

pub const SUMMARY_HEADER: &str = "drone,outcome,initial_v,final_v,consumed_v,flight_s,recharge_s,waiting_s,completion_s,mean_drain_vps,leg_irregularity,makespan_s";

pub fn write_summary_csv<W: Write>(summary: &RunSummary, mut w: W) -> Result<(), DataIoError> {
    writeln!(w, "{SUMMARY_HEADER}")?;
    for row in &summary.rows {
        let legs = row
            .leg_irregularity
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(";");
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            row.drone,
            row.outcome,
            row.initial_voltage,
            row.final_voltage,
            row.consumed_voltage,
            crate::grid::seconds(row.flight_s),
            crate::grid::seconds(row.recharge_s),
            crate::grid::seconds(row.waiting_s),
            crate::grid::seconds(row.completion_s),
            row.mean_drain_vps,
            legs,
            crate::grid::seconds(summary.makespan_s)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{simulate_drain, EnergyModel, WindField};
    use proptest::prelude::*;

    fn record(timestamp_ms: u64) -> FlightLogRecord {
        FlightLogRecord {
            timestamp_ms,
            x: 0.1,
            y: 0.2,
            z: 0.5,
            roll: 0.0,
            pitch: 0.0,
            yaw: 90.0,
            voltage: 4.0,
            rel_wind_dir: None,
            travel_distance: timestamp_ms as f64 * 1e-4,
            waiting_time: 0.0,
        }
    }

    #[test]
    fn empty_log_is_header_only() {
        let mut out = Vec::new();
        write_log(&[], &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), format!("{LOG_HEADER}\n"));
    }

    #[test]
    fn calm_record_has_empty_rel_wind_field() {
        let mut out = Vec::new();
        write_log(&[record(0)], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let row = text.lines().nth(1).unwrap();
        assert!(row.contains(",,"), "empty rel_wind_dir field: {row}");
        let back = read_log(text.as_bytes()).unwrap();
        assert_eq!(back, vec![record(0)]);
    }

    #[test]
    fn read_rejects_malformed_inputs() {
        let wrong_header = "timestamp_ms,x,y,z,roll,pitch,voltage,yaw,rel_wind_dir,travel_distance,waiting_time\n";
        assert!(matches!(
            read_log(wrong_header.as_bytes()).unwrap_err(),
            DataIoError::MalformedHeader
        ));

        let dup = format!(
            "{LOG_HEADER}\n0,0,0,0,0,0,0,4,,0,0\n100,0,0,0,0,0,0,4,,0,0\n100,0,0,0,0,0,0,4,,0,0\n"
        );
        assert!(matches!(
            read_log(dup.as_bytes()).unwrap_err(),
            DataIoError::NonMonotoneTimestamp { row: 3 }
        ));

        let bad_num = format!("{LOG_HEADER}\n0,0,0,0,0,0,0,abc,,0,0\n");
        assert!(matches!(
            read_log(bad_num.as_bytes()).unwrap_err(),
            DataIoError::BadNumber { row: 1, column: "voltage" }
        ));

        let few = format!("{LOG_HEADER}\n0,0,0\n");
        assert!(matches!(
            read_log(few.as_bytes()).unwrap_err(),
            DataIoError::WrongFieldCount { row: 1, got: 3 }
        ));

        let off_grid = format!("{LOG_HEADER}\n150,0,0,0,0,0,0,4,,0,0\n");
        assert!(matches!(
            read_log(off_grid.as_bytes()).unwrap_err(),
            DataIoError::BadTimestamp { row: 1 }
        ));
    }

    #[test]
    fn write_rejects_invariant_violations() {
        let mut bad = vec![record(0), record(100)];
        bad[1].travel_distance = 0.0 - 1.0;
        let mut out = Vec::new();
        assert!(matches!(
            write_log(&bad, &mut out).unwrap_err(),
            DataIoError::InvariantViolation(_)
        ));
    }

    #[test]
    fn dataset_path_examples() {
        let key = DatasetKey {
            stations: 1,
            path_set: 3,
            wind_speed_kmh: 6.1,
            wind_dir: Some(CompassDir::N),
            drone: "E5".into(),
        };
        assert_eq!(dataset_path(&key).unwrap(), "1station/path3/wind6.1/N/E5.csv");

        let calm = DatasetKey {
            stations: 2,
            path_set: 1,
            wind_speed_kmh: 0.0,
            wind_dir: None,
            drone: "E3".into(),
        };
        assert_eq!(dataset_path(&calm).unwrap(), "2station/path1/wind0/calm/E3.csv");

        assert_eq!(parse_dataset_path("1station/path3/wind6.1/N/E5.csv").unwrap(), key);
        assert_eq!(parse_dataset_path("2station/path1/wind0/calm/E3.csv").unwrap(), calm);

        let calm_with_dir = DatasetKey {
            wind_dir: Some(CompassDir::N),
            ..calm.clone()
        };
        assert!(dataset_path(&calm_with_dir).is_err());
        let west = DatasetKey {
            wind_speed_kmh: 6.1,
            wind_dir: Some(CompassDir::W),
            ..calm.clone()
        };
        assert!(dataset_path(&west).is_err());
        assert!(parse_dataset_path("3station/path1/wind0/calm/E3.csv").is_err());
    }

    #[test]
    fn irregularity_affine_invariance() {
        // an affine series scores exactly zero (dyadic slope keeps the
        // series representable, so the second differences vanish bitwise)
        let linear: Vec<f64> = (0..100).map(|k| 4.5 - 0.125 * k as f64).collect();
        assert_eq!(irregularity_of(&linear).unwrap(), 0.0);

        // translation and slope leave the metric unchanged
        let mut rng = crate::rng::seeded(5);
        let noisy: Vec<f64> = (0..200)
            .map(|_| 4.0 + crate::rng::symmetric(&mut rng, 0.002))
            .collect();
        let base = irregularity_of(&noisy).unwrap();
        let shifted: Vec<f64> = noisy
            .iter()
            .enumerate()
            .map(|(k, v)| v + 1.5 + 0.01 * k as f64)
            .collect();
        let moved = irregularity_of(&shifted).unwrap();
        assert!((base - moved).abs() < 1e-12);

        assert!(matches!(
            irregularity_of(&[1.0, 2.0]).unwrap_err(),
            DataIoError::TooShort(2)
        ));
    }

    #[test]
    fn irregularity_scales_with_noise_amplitude() {
        let model = EnergyModel::default();
        let double = EnergyModel {
            noise_gain: 2.0 * model.noise_gain,
            ..model
        };
        let wind = WindField::new(7.6, 0.0);
        let mut ratios = Vec::new();
        for seed in 0..30u64 {
            let a = simulate_drain(&model, 4.2, 60.0, wind, 0.0, seed).unwrap();
            let b = simulate_drain(&double, 4.2, 60.0, wind, 0.0, seed).unwrap();
            ratios.push(
                contour_irregularity(&b).unwrap() / contour_irregularity(&a).unwrap(),
            );
        }
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        assert!((mean - 2.0).abs() / 2.0 < 0.2, "mean ratio {mean}");
    }

    #[test]
    fn calm_simulated_trace_has_zero_irregularity() {
        let model = EnergyModel::default();
        let trace = simulate_drain(&model, 4.2, 30.0, WindField::CALM, 0.0, 3).unwrap();
        assert_eq!(contour_irregularity(&trace).unwrap(), 0.0);
    }

    #[test]
    fn flight_segments_split_on_pauses() {
        let mut records: Vec<FlightLogRecord> = (0..10).map(|k| record(k * 100)).collect();
        // freeze travel distance over rows 4..=6 (a charging pause)
        for r in records.iter_mut().skip(4).take(3) {
            r.travel_distance = 4.0 * 1e-2;
        }
        for (k, r) in records.iter_mut().enumerate().skip(7) {
            r.travel_distance = (k as f64 + 10.0) * 1e-2;
        }
        for (k, r) in records.iter_mut().enumerate().take(4) {
            r.travel_distance = k as f64 * 1e-2;
        }
        let spans = flight_segments(&records);
        assert_eq!(spans, vec![(0, 4), (6, 9)]);
    }

    fn arb_record_list() -> impl Strategy<Value = Vec<FlightLogRecord>> {
        (
            0u64..50,
            proptest::collection::vec(
                (
                    -10.0f64..10.0,
                    -10.0f64..10.0,
                    proptest::option::of(-180.0f64..180.0),
                    0.0f64..0.5,
                    0.0f64..0.5,
                ),
                0..40,
            ),
        )
            .prop_map(|(t0, rows)| {
                let mut travel = 0.0;
                let mut waited = 0.0;
                rows.into_iter()
                    .enumerate()
                    .map(|(k, (a, b, rel, dtravel, dwait))| {
                        travel += dtravel;
                        waited += dwait;
                        FlightLogRecord {
                            timestamp_ms: (t0 + k as u64) * 100,
                            x: a,
                            y: b,
                            z: a * 0.1,
                            roll: b * 0.3,
                            pitch: a * 0.2,
                            yaw: (a + 10.0) * 17.0,
                            voltage: 4.2 - 0.001 * k as f64,
                            rel_wind_dir: rel,
                            travel_distance: travel,
                            waiting_time: waited,
                        }
                    })
                    .collect()
            })
    }

    proptest! {
        #[test]
        fn log_round_trip_identity(records in arb_record_list()) {
            let mut out = Vec::new();
            write_log(&records, &mut out).unwrap();
            let back = read_log(out.as_slice()).unwrap();
            prop_assert_eq!(back, records);
        }
    }
}
