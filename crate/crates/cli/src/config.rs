//! Pipeline configuration: one JSON document naming every input, plus the
//! knobs (fleet, scenarios, simulation and emission parameters) that default
//! to the calibrated values. Relative paths resolve against the config file's
//! own directory, so a bundle directory is relocatable.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use modeshift_core::demand::{
    builtin_profile, load_od_matrix, load_profile, ODMatrix, TemporalProfile, BUILTIN_PROFILES,
};
use modeshift_core::emissions::{
    ClassCoefficients, EmissionCoefficients, DEFAULT_BIN_WIDTH_S, DEFAULT_SMOOTHING_BINS,
};
use modeshift_core::gtfs::{parse_feed, runs_in_window, GtfsError, TransitSchedule};
use modeshift_core::network::{load_network, NetworkError, NetworkGraph};
use modeshift_core::scenario::{standard_scenarios, BaselineCounts, FleetParams, ScenarioSpec};
use modeshift_core::sim::{load_stop_map, SimError, SimParams, StopMap};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub network_file: String,
    pub gtfs_dir: String,
    pub car_od_file: String,
    pub bus_od_file: String,
    pub stop_map_file: String,
    /// Built-in profile name (`uniform`, `mixed_use`, `residential_bimodal`)
    /// or a path to a 96-row profile CSV.
    pub profile: String,
    /// Service date the GTFS calendar is resolved against, `YYYY-MM-DD`.
    pub service_date: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    /// Explicit baseline counts; when absent they are derived from the
    /// inputs (OD totals and the runs active in the window).
    #[serde(default)]
    pub baseline: Option<BaselineCounts>,
    #[serde(default)]
    pub fleet: FleetParams,
    #[serde(default = "standard_scenarios")]
    pub scenarios: Vec<ScenarioSpec>,
    #[serde(default)]
    pub sim: SimParams,
    #[serde(default)]
    pub emissions: EmissionSettings,

    /// Directory of the config file itself; set on load, not serialized.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_output_dir() -> String {
    "out".to_string()
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmissionSettings {
    pub bin_width_s: f64,
    pub smoothing_bins: usize,
    pub car: EmissionCoefficients,
    pub bus: EmissionCoefficients,
}

impl Default for EmissionSettings {
    fn default() -> Self {
        let c = ClassCoefficients::default();
        EmissionSettings {
            bin_width_s: DEFAULT_BIN_WIDTH_S,
            smoothing_bins: DEFAULT_SMOOTHING_BINS,
            car: c.car,
            bus: c.bus,
        }
    }
}

impl EmissionSettings {
    pub fn coefficients(&self) -> ClassCoefficients {
        ClassCoefficients { car: self.car, bus: self.bus }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<PipelineConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Validation(vec![format!("cannot read config {}: {e}", path.display())])
        })?;
        let mut config: PipelineConfig = serde_json::from_str(&text).map_err(|e| {
            CliError::Validation(vec![format!(
                "config {} is not valid: line {}: {e}",
                path.display(),
                e.line()
            )])
        })?;
        config.base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Ok(config)
    }

    pub fn resolve(&self, file: &str) -> PathBuf {
        let p = Path::new(file);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self, override_out: Option<&Path>) -> PathBuf {
        match override_out {
            Some(p) => p.to_path_buf(),
            None => self.resolve(&self.output_dir),
        }
    }

    pub fn service_date(&self) -> Result<NaiveDate, String> {
        NaiveDate::parse_from_str(&self.service_date, "%Y-%m-%d")
            .map_err(|_| format!("service_date {:?} is not YYYY-MM-DD", self.service_date))
    }

    /// Paths whose digests go into the run manifest, keyed by config field
    /// (GTFS member files get a `gtfs:` prefix).
    pub fn input_files(&self) -> Vec<(String, PathBuf)> {
        let mut files = vec![
            ("network_file".to_string(), self.resolve(&self.network_file)),
            ("car_od_file".to_string(), self.resolve(&self.car_od_file)),
            ("bus_od_file".to_string(), self.resolve(&self.bus_od_file)),
            ("stop_map_file".to_string(), self.resolve(&self.stop_map_file)),
        ];
        for name in ["stops.txt", "routes.txt", "trips.txt", "stop_times.txt", "calendar.txt", "calendar_dates.txt"] {
            let p = self.resolve(&self.gtfs_dir).join(name);
            if p.exists() {
                files.push((format!("gtfs:{name}"), p));
            }
        }
        if !BUILTIN_PROFILES.contains(&self.profile.as_str()) {
            files.push(("profile".to_string(), self.resolve(&self.profile)));
        }
        files
    }
}

/// Everything the pipeline needs, fully loaded and cross-referenced.
pub struct LoadedInputs {
    pub graph: NetworkGraph,
    pub schedule: TransitSchedule,
    pub stop_map: StopMap,
    pub car_od: ODMatrix,
    pub bus_od: ODMatrix,
    pub profile: TemporalProfile,
}

/// Load and cross-check every input, collecting one diagnostic per problem
/// rather than stopping at the first. Returns the loaded bundle only when
/// the diagnostic list is empty.
pub fn check_inputs(config: &PipelineConfig) -> (Option<LoadedInputs>, Vec<String>) {
    let mut diags: Vec<String> = Vec::new();

    let service_date = match config.service_date() {
        Ok(d) => Some(d),
        Err(msg) => {
            diags.push(msg);
            None
        }
    };
    if config.sim.window.start_s >= config.sim.window.end_s {
        diags.push(format!(
            "window start {} is not before end {}",
            config.sim.window.start_s, config.sim.window.end_s
        ));
    }
    if let Err(e) = config.emissions.coefficients().validate() {
        diags.push(e.to_string());
    }

    let graph = match load_network(&config.resolve(&config.network_file)) {
        Ok(g) => Some(g),
        Err(NetworkError::Invalid(violations)) => {
            diags.extend(violations.iter().map(|v| format!("network: {v}")));
            None
        }
        Err(e) => {
            diags.push(e.to_string());
            None
        }
    };

    let schedule = service_date.and_then(|date| {
        match parse_feed(&config.resolve(&config.gtfs_dir), date) {
            Ok(s) => Some(s),
            Err(GtfsError::Invalid(violations)) => {
                diags.extend(violations.iter().map(|v| format!("gtfs: {v}")));
                None
            }
            Err(e) => {
                diags.push(e.to_string());
                None
            }
        }
    });

    let stop_map = match (&schedule, &graph) {
        (Some(schedule), Some(graph)) => {
            match load_stop_map(&config.resolve(&config.stop_map_file), schedule, graph) {
                Ok(m) => Some(m),
                Err(SimError::BadStopMap(problems)) => {
                    diags.extend(problems.iter().map(|p| format!("stop map: {p}")));
                    None
                }
                Err(e) => {
                    diags.push(e.to_string());
                    None
                }
            }
        }
        _ => None,
    };

    // Every stop served inside the window must resolve to an edge.
    if let (Some(schedule), Some(map)) = (&schedule, &stop_map) {
        if let Ok(runs) = runs_in_window(schedule, config.sim.window, None) {
            let mut missing: Vec<String> = runs
                .iter()
                .flat_map(|r| r.stop_events.iter())
                .filter(|ev| map.edge_for_stop(ev.stop).is_none())
                .map(|ev| schedule.stop(ev.stop).stop_id.clone())
                .collect();
            missing.sort();
            missing.dedup();
            diags.extend(
                missing.iter().map(|s| format!("stop map: served stop {s:?} has no edge mapping")),
            );
        }
    }

    let mut load_od = |file: &str, what: &str| -> Option<ODMatrix> {
        match load_od_matrix(&config.resolve(file)) {
            Ok(od) => {
                if let Some(graph) = &graph {
                    if let Err(e) = od.validate_zones(graph) {
                        diags.push(format!("{what}: {e}"));
                        return None;
                    }
                }
                Some(od)
            }
            Err(e) => {
                diags.push(format!("{what}: {e}"));
                None
            }
        }
    };
    let car_od = load_od(&config.car_od_file, "car OD");
    let bus_od = load_od(&config.bus_od_file, "bus OD");

    let profile = if BUILTIN_PROFILES.contains(&config.profile.as_str()) {
        Some(builtin_profile(&config.profile).unwrap())
    } else {
        match load_profile(&config.resolve(&config.profile)) {
            Ok(p) => Some(p),
            Err(e) => {
                diags.push(format!("profile: {e}"));
                None
            }
        }
    };

    if diags.is_empty() {
        let inputs = LoadedInputs {
            graph: graph.unwrap(),
            schedule: schedule.unwrap(),
            stop_map: stop_map.unwrap(),
            car_od: car_od.unwrap(),
            bus_od: bus_od.unwrap(),
            profile: profile.unwrap(),
        };
        (Some(inputs), diags)
    } else {
        (None, diags)
    }
}

/// `check_inputs`, promoted to an error when anything is wrong.
pub fn load_inputs(config: &PipelineConfig) -> Result<LoadedInputs, CliError> {
    let (inputs, diags) = check_inputs(config);
    match inputs {
        Some(inputs) => Ok(inputs),
        None => Err(CliError::Validation(diags)),
    }
}
