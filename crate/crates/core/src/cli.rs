//! Command implementations backing the `skyway` binary: run one simulation,
//! generate the full scenario matrix, plan itineraries, and calibrate energy
//! models from a dataset tree. Exit codes are stable contracts: 0 success,
//! 1 config/data error, 2 infeasible mission, 3 infeasible plan.
//!
//! All randomness flows from the single `--seed` flag; matrix run `i` uses
//! the derived seed `rng::derive_seed(seed, i)`, recorded in the index so
//! any single run can be reproduced in isolation.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataio::{self, DatasetKey};
use crate::energy::{self, AnnotatedTrace, CompassDir, EnergyModel, VoltageTrace, WindField};
use crate::grid;
use crate::network::SkywayNetwork;
use crate::planner::{self, PadTimeline};
use crate::rng;
use crate::scenario;
use crate::sim::{
    self, HeldLaunch, LaunchDiscipline, MatrixConfig, Mission, MissionResult, Policy, RunSpec,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("file not found: {0}")]
    ConfigNotFound(PathBuf),
    #[error("{0}")]
    ConfigInvalid(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("infeasible mission: {0}")]
    InfeasibleMission(String),
    #[error("infeasible plan: {0}")]
    InfeasiblePlan(String),
    #[error("insufficient calibration data: {0}")]
    InsufficientData(String),
    #[error("degenerate calibration design: all traces share one wind condition")]
    DegenerateDesign,
}

impl CliError {
    /// Machine-readable error code, printed to standard error.
    pub fn code(&self) -> &'static str {
        match self {
            CliError::ConfigNotFound(_) => "CONFIG_NOT_FOUND",
            CliError::ConfigInvalid(_) => "CONFIG_INVALID",
            CliError::Io(_) => "IO_ERROR",
            CliError::InfeasibleMission(_) => "INFEASIBLE_MISSION",
            CliError::InfeasiblePlan(_) => "INFEASIBLE",
            CliError::InsufficientData(_) => "INSUFFICIENT_DATA",
            CliError::DegenerateDesign => "DEGENERATE_DESIGN",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::InfeasibleMission(_) => 2,
            CliError::InfeasiblePlan(_) => 3,
            _ => 1,
        }
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::ConfigNotFound(path.to_path_buf())
        } else {
            CliError::Io(e)
        }
    })
}

pub fn load_network(path: &Path) -> Result<SkywayNetwork, CliError> {
    let text = read_file(path)?;
    SkywayNetwork::from_json(&text)
        .map_err(|e| CliError::ConfigInvalid(format!("{}: {e}", path.display())))
}

pub fn load_missions(path: &Path) -> Result<Vec<Mission>, CliError> {
    let text = read_file(path)?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::ConfigInvalid(format!("{}: {e}", path.display())))
}

pub fn load_model(path: Option<&Path>) -> Result<EnergyModel, CliError> {
    match path {
        None => Ok(EnergyModel::default()),
        Some(p) => {
            let text = read_file(p)?;
            EnergyModel::from_json(&text)
                .map_err(|e| CliError::ConfigInvalid(format!("{}: {e}", p.display())))
        }
    }
}

/// Parse `--wind-speed` / `--wind-dir` flags. The direction accepts a
/// compass letter (N, E, S, W) or degrees; it is required when the speed is
/// positive and ignored when calm.
pub fn parse_wind(speed_kmh: f64, dir: Option<&str>) -> Result<WindField, CliError> {
    if !speed_kmh.is_finite() || speed_kmh < 0.0 {
        return Err(CliError::ConfigInvalid(format!(
            "wind speed {speed_kmh} must be finite and nonnegative"
        )));
    }
    if speed_kmh == 0.0 {
        return Ok(WindField::CALM);
    }
    let dir = dir.ok_or_else(|| {
        CliError::ConfigInvalid("wind direction is required when wind speed is positive".into())
    })?;
    if let Ok(compass) = dir.parse::<CompassDir>() {
        return Ok(WindField::from_compass(speed_kmh, compass));
    }
    let degrees: f64 = dir.parse().map_err(|_| {
        CliError::ConfigInvalid(format!(
            "wind direction {dir:?} is neither a compass letter nor degrees"
        ))
    })?;
    if !degrees.is_finite() {
        return Err(CliError::ConfigInvalid(format!("wind direction {dir:?}")));
    }
    Ok(WindField::new(speed_kmh, degrees))
}

pub fn parse_policy(name: &str) -> Result<Policy, CliError> {
    match name.replace('_', "-").as_str() {
        "nearest-first" => Ok(Policy::default()),
        "nearest-first-assigned" => Ok(Policy {
            held_launch: HeldLaunch::AssignedStation,
            ..Policy::default()
        }),
        "nearest-first-immediate" => Ok(Policy {
            launch: LaunchDiscipline::Immediate,
            ..Policy::default()
        }),
        other => Err(CliError::ConfigInvalid(format!(
            "unknown policy {other:?}; expected nearest-first, nearest-first-assigned, or nearest-first-immediate"
        ))),
    }
}

#[derive(Debug, Clone)]
pub struct SimulateArgs {
    pub network: PathBuf,
    pub missions: PathBuf,
    pub wind: WindField,
    pub model: Option<PathBuf>,
    pub policy: Policy,
    pub seed: u64,
    pub out: PathBuf,
}

fn map_sim_error(e: sim::SimError) -> CliError {
    match e {
        sim::SimError::InfeasibleMission { drone } => {
            CliError::InfeasibleMission(format!("no path source -> station -> destination for {drone:?}"))
        }
        other => CliError::ConfigInvalid(other.to_string()),
    }
}

/// Run one fleet simulation; writes `result.json`, `summary.csv`, and
/// `logs/<drone>.csv` under the output directory.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<MissionResult, CliError> {
    let network = load_network(&args.network)?;
    let missions = load_missions(&args.missions)?;
    let model = load_model(args.model.as_deref())?;
    let result = sim::run_mission(&network, &missions, args.wind, &model, args.policy, args.seed)
        .map_err(map_sim_error)?;

    std::fs::create_dir_all(args.out.join("logs"))?;
    for drone in &result.drones {
        dataio::write_log_file(&drone.log, &args.out.join("logs").join(format!("{}.csv", drone.id)))
            .map_err(io_of_dataio)?;
    }
    let summary = dataio::summarize_run(&result);
    let mut summary_file = std::io::BufWriter::new(std::fs::File::create(args.out.join("summary.csv"))?);
    dataio::write_summary_csv(&summary, &mut summary_file).map_err(io_of_dataio)?;
    summary_file.flush()?;
    std::fs::write(args.out.join("result.json"), result.to_json())?;
    Ok(result)
}

fn io_of_dataio(e: dataio::DataIoError) -> CliError {
    match e {
        dataio::DataIoError::Io(io) => CliError::Io(io),
        other => CliError::ConfigInvalid(other.to_string()),
    }
}

#[derive(Debug, Clone)]
pub struct MatrixArgs {
    pub config: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub seed: u64,
    pub out: PathBuf,
    pub jobs: usize,
}

/// One row of the matrix index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndexRow {
    pub stations: u8,
    pub path_set: u8,
    pub wind_speed_kmh: f64,
    pub wind_dir: Option<CompassDir>,
    pub seed: u64,
    pub status: String,
    pub makespan_s: f64,
    pub consumed_v: Vec<(String, f64)>,
}

pub const INDEX_HEADER: &str =
    "stations,path_set,wind_speed_kmh,wind_dir,seed,status,makespan_s,consumed_E3,consumed_E5,consumed_E7";

fn dir_label(dir: Option<CompassDir>) -> &'static str {
    dir.map(CompassDir::letter).unwrap_or("calm")
}

fn run_one_matrix_entry(
    spec: &RunSpec,
    model: &EnergyModel,
    run_seed: u64,
    out: &Path,
) -> Result<IndexRow, CliError> {
    let (network, missions, wind) = scenario::build_run(spec);
    let row = match sim::run_mission(&network, &missions, wind, model, Policy::default(), run_seed) {
        Ok(result) => {
            for drone in &result.drones {
                let key = DatasetKey {
                    stations: spec.stations,
                    path_set: spec.path_set,
                    wind_speed_kmh: spec.wind_speed_kmh,
                    wind_dir: spec.wind_dir,
                    drone: drone.id.clone(),
                };
                let rel = dataio::dataset_path(&key).map_err(io_of_dataio)?;
                dataio::write_log_file(&drone.log, &out.join(rel)).map_err(io_of_dataio)?;
            }
            let summary = dataio::summarize_run(&result);
            let failed: Vec<&str> = summary
                .rows
                .iter()
                .filter(|r| r.outcome == sim::Outcome::Failed)
                .map(|r| r.drone.as_str())
                .collect();
            IndexRow {
                stations: spec.stations,
                path_set: spec.path_set,
                wind_speed_kmh: spec.wind_speed_kmh,
                wind_dir: spec.wind_dir,
                seed: run_seed,
                status: if failed.is_empty() {
                    "ok".to_string()
                } else {
                    format!("failed:{}", failed.join("+"))
                },
                makespan_s: grid::seconds(summary.makespan_s),
                consumed_v: summary
                    .rows
                    .iter()
                    .map(|r| (r.drone.clone(), r.consumed_voltage))
                    .collect(),
            }
        }
        Err(e) => IndexRow {
            stations: spec.stations,
            path_set: spec.path_set,
            wind_speed_kmh: spec.wind_speed_kmh,
            wind_dir: spec.wind_dir,
            seed: run_seed,
            status: format!("error:{e}"),
            makespan_s: 0.0,
            consumed_v: Vec::new(),
        },
    };
    Ok(row)
}

/// Generate the scenario matrix dataset tree plus `index.csv`. Runs execute
/// in parallel up to `jobs`; outputs are byte-identical regardless of the
/// job count. Per-run failures are recorded in the index; only config errors
/// exit nonzero.
pub fn cmd_matrix(args: &MatrixArgs) -> Result<Vec<IndexRow>, CliError> {
    let config = match &args.config {
        None => MatrixConfig::default(),
        Some(path) => {
            let text = read_file(path)?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::ConfigInvalid(format!("{}: {e}", path.display())))?
        }
    };
    config.validate().map_err(CliError::ConfigInvalid)?;
    let model = load_model(args.model.as_deref())?;
    let specs = sim::scenario_matrix(&config);

    std::fs::create_dir_all(&args.out)?;
    // scenario inputs, so any single run can be repeated via `simulate`
    for &stations in &config.stations {
        for &path_set in &config.path_sets {
            let dir = args.out.join(format!("{stations}station/path{path_set}"));
            std::fs::create_dir_all(&dir)?;
            let network = scenario::paper_network(stations, path_set);
            std::fs::write(dir.join("network.json"), network.to_json())?;
            let missions = serde_json::to_string_pretty(&scenario::paper_missions())
                .expect("missions serialize");
            std::fs::write(dir.join("missions.json"), missions)?;
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.max(1))
        .build()
        .map_err(|e| CliError::ConfigInvalid(e.to_string()))?;
    let rows: Vec<Result<IndexRow, CliError>> = pool.install(|| {
        use rayon::prelude::*;
        specs
            .par_iter()
            .enumerate()
            .map(|(i, spec)| {
                run_one_matrix_entry(spec, &model, rng::derive_seed(args.seed, i as u64), &args.out)
            })
            .collect()
    });
    let rows: Vec<IndexRow> = rows.into_iter().collect::<Result<_, _>>()?;

    let mut index = std::io::BufWriter::new(std::fs::File::create(args.out.join("index.csv"))?);
    writeln!(index, "{INDEX_HEADER}")?;
    for row in &rows {
        let consumed = |drone: &str| {
            row.consumed_v
                .iter()
                .find(|(d, _)| d == drone)
                .map(|(_, v)| v.to_string())
                .unwrap_or_default()
        };
        writeln!(
            index,
            "{},{},{},{},{},{},{},{},{},{}",
            row.stations,
            row.path_set,
            row.wind_speed_kmh,
            dir_label(row.wind_dir),
            row.seed,
            row.status,
            row.makespan_s,
            consumed("E3"),
            consumed("E5"),
            consumed("E7"),
        )?;
    }
    index.flush()?;
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct PlanArgs {
    pub network: PathBuf,
    pub missions: PathBuf,
    pub wind: WindField,
    pub model: Option<PathBuf>,
    pub timeline: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct FleetPlanOutput {
    itineraries: Vec<planner::Itinerary>,
    timeline: PadTimeline,
}

fn map_plan_error(e: planner::PlanError) -> CliError {
    match e {
        planner::PlanError::Infeasible { .. } | planner::PlanError::MissionInfeasible { .. } => {
            CliError::InfeasiblePlan(e.to_string())
        }
        other => CliError::ConfigInvalid(other.to_string()),
    }
}

/// Plan itineraries. A single mission prints its itinerary JSON; several
/// missions print the fleet plan with the final pad timeline.
pub fn cmd_plan(args: &PlanArgs) -> Result<String, CliError> {
    let network = load_network(&args.network)?;
    let missions = load_missions(&args.missions)?;
    let model = load_model(args.model.as_deref())?;
    match missions.as_slice() {
        [] => Err(CliError::ConfigInvalid("missions file is empty".into())),
        [mission] => {
            let timeline = match &args.timeline {
                None => PadTimeline::for_network(&network),
                Some(path) => {
                    let text = read_file(path)?;
                    PadTimeline::from_json(&text)
                        .map_err(|e| CliError::ConfigInvalid(format!("{}: {e}", path.display())))?
                }
            };
            let itinerary = planner::plan_route(
                &network,
                &mission.source,
                &mission.destination,
                mission.initial_voltage,
                args.wind,
                &model,
                &timeline,
            )
            .map_err(map_plan_error)?;
            Ok(itinerary.to_json())
        }
        _ => {
            if args.timeline.is_some() {
                return Err(CliError::ConfigInvalid(
                    "--timeline applies to single-mission plans only; fleet plans build their own".into(),
                ));
            }
            let (itineraries, timeline) =
                planner::plan_fleet(&network, &missions, args.wind, &model).map_err(map_plan_error)?;
            let output = FleetPlanOutput {
                itineraries,
                timeline,
            };
            Ok(serde_json::to_string_pretty(&output).expect("plan serializes"))
        }
    }
}

#[derive(Debug, Clone)]
pub struct CalibrateArgs {
    pub logs: PathBuf,
    pub model: Option<PathBuf>,
}

/// Split one log into constant-heading flight stretches and annotate them
/// with the wind condition from the dataset key. Stretches shorter than the
/// calibration minimum are dropped.
fn traces_of_log(
    records: &[dataio::FlightLogRecord],
    wind_speed_kmh: f64,
) -> Vec<AnnotatedTrace> {
    let mut traces = Vec::new();
    for (a, b) in dataio::flight_segments(records) {
        let mut start = a;
        let mut k = a + 1;
        while k <= b + 1 {
            let boundary = k > b || records[k].rel_wind_dir != records[start].rel_wind_dir;
            if boundary {
                if k - start >= 10 {
                    let volts: Vec<f64> = records[start..k].iter().map(|r| r.voltage).collect();
                    traces.push(AnnotatedTrace {
                        trace: VoltageTrace::new(volts),
                        wind_speed_kmh,
                        rel_wind_angle_deg: records[start].rel_wind_dir,
                    });
                }
                start = k;
            }
            k += 1;
        }
    }
    traces
}

/// Fit drain parameters from a dataset tree (the layout written by
/// `matrix`); wind speeds come from the directory structure and relative
/// angles from the log column. Prints the fitted model JSON.
pub fn cmd_calibrate(args: &CalibrateArgs) -> Result<String, CliError> {
    if !args.logs.is_dir() {
        return Err(CliError::ConfigNotFound(args.logs.clone()));
    }
    let base = load_model(args.model.as_deref())?;
    let mut files: Vec<PathBuf> = walkdir::WalkDir::new(&args.logs)
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .collect();
    files.sort();

    let mut traces = Vec::new();
    for path in files {
        let rel = path
            .strip_prefix(&args.logs)
            .unwrap_or(&path)
            .to_string_lossy()
            .replace('\\', "/");
        let Ok(key) = dataio::parse_dataset_path(&rel) else {
            continue;
        };
        let records = dataio::read_log_file(&path).map_err(io_of_dataio)?;
        traces.extend(traces_of_log(&records, key.wind_speed_kmh));
    }

    let fitted = energy::calibrate(&traces).map_err(|e| match e {
        energy::EnergyError::InsufficientData(msg) => CliError::InsufficientData(msg),
        energy::EnergyError::DegenerateDesign => CliError::DegenerateDesign,
        other => CliError::ConfigInvalid(other.to_string()),
    })?;
    Ok(fitted.apply_to(&base).to_json())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wind_parsing() {
        assert_eq!(parse_wind(0.0, None).unwrap(), WindField::CALM);
        assert_eq!(
            parse_wind(6.1, Some("N")).unwrap(),
            WindField::from_compass(6.1, CompassDir::N)
        );
        assert_eq!(parse_wind(6.1, Some("135")).unwrap(), WindField::new(6.1, 135.0));
        assert!(parse_wind(6.1, None).is_err());
        assert!(parse_wind(-1.0, Some("N")).is_err());
        assert!(parse_wind(6.1, Some("NNE")).is_err());
    }

    #[test]
    fn policy_parsing() {
        assert_eq!(parse_policy("nearest-first").unwrap(), Policy::default());
        assert_eq!(parse_policy("nearest_first").unwrap(), Policy::default());
        assert_eq!(
            parse_policy("nearest-first-assigned").unwrap().held_launch,
            HeldLaunch::AssignedStation
        );
        assert!(parse_policy("farthest-first").is_err());
    }

    #[test]
    fn error_codes_and_exits() {
        assert_eq!(CliError::ConfigNotFound("x".into()).code(), "CONFIG_NOT_FOUND");
        assert_eq!(CliError::ConfigNotFound("x".into()).exit_code(), 1);
        assert_eq!(CliError::InfeasibleMission(String::new()).exit_code(), 2);
        assert_eq!(CliError::InfeasiblePlan(String::new()).exit_code(), 3);
        assert_eq!(CliError::InsufficientData(String::new()).code(), "INSUFFICIENT_DATA");
        assert_eq!(CliError::DegenerateDesign.code(), "DEGENERATE_DESIGN");
    }
}
