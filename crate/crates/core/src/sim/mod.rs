//! Deterministic mesoscopic day simulation.
//!
//! Cars and scheduled buses traverse the network under congestion; bus
//! passengers wait at stops, board the first run of their assigned route with
//! a spare seat, and alight at their target stop. The engine is a point-queue
//! model: vehicles occupy edges in aggregate, exits are FIFO per edge, and
//! traversal time follows the volume-delay form
//! `t = t_ff * (1 + alpha * (V/C)^beta)` where `V` is the edge's trailing
//! 15-minute flow scaled to vehicles per hour.
//!
//! Congestion is resolved in two passes. Pass one lays every vehicle onto the
//! network at free-flow speed and freezes, per vehicle and edge, the flow it
//! encounters there; pass two replays all movements event by event with those
//! frozen traversal times under per-edge FIFO. Freezing makes the model
//! flow-monotone: removing any subset of vehicles can only lower volumes, so
//! no remaining vehicle ever gets slower — the property the scenario
//! comparisons rely on. A reactive measurement (volumes from pass-two state)
//! loses that guarantee, because reordered exits can locally raise measured
//! flow after a removal.
//!
//! The event loop itself is strictly single-threaded with a total event order
//! (time, kind, vehicle, sequence); parallelism belongs at the scenario-sweep
//! level where runs share only immutable inputs.

mod engine;
mod plan;
mod shift;

pub use shift::{apply_modeshift_to_trips, ShiftError};

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gtfs::{TransitSchedule, Window};
use crate::network::NetworkGraph;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("stop map line {line}: {msg}")]
    StopMapFormat { line: usize, msg: String },
    #[error("stop map problems: {}", .0.join("; "))]
    BadStopMap(Vec<String>),
    #[error("stops without an edge mapping: {}", .0.join(", "))]
    UnmappedStops(Vec<String>),
    #[error("trip {trip} references unknown edge {edge}")]
    UnknownTripEdge { trip: String, edge: String },
    #[error("no route from {from} to {to} for trip {trip}")]
    NoRoute { trip: String, from: String, to: String },
    #[error("bus run {run} has no road path from stop {from_stop} to stop {to_stop}")]
    BusLeg { run: String, from_stop: String, to_stop: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VehicleClass {
    Car,
    Bus,
}

impl VehicleClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            VehicleClass::Car => "car",
            VehicleClass::Bus => "bus",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimParams {
    /// Departure admission window; trips and runs outside it are not loaded.
    pub window: Window,
    /// Extra horizon after the window so en-route vehicles can finish.
    pub cooldown_s: u32,
    /// Trailing interval over which edge flow is measured.
    pub flow_window_s: f64,
    pub bpr_alpha: f64,
    pub bpr_beta: f64,
    /// Every scheduled stop costs at least this much time.
    pub dwell_min_s: f64,
    pub board_s_per_pax: f64,
    pub alight_s_per_pax: f64,
    /// Seats per bus; boarding beyond this is denied.
    pub bus_seats: u32,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            window: Window { start_s: 18_000, end_s: 75_600 }, // 05:00-21:00
            cooldown_s: 7_200,
            flow_window_s: 900.0,
            bpr_alpha: 0.15,
            bpr_beta: 4.0,
            dwell_min_s: 10.0,
            board_s_per_pax: 2.0,
            alight_s_per_pax: 1.5,
            bus_seats: 35,
        }
    }
}

impl SimParams {
    pub fn horizon_s(&self) -> f64 {
        (self.window.end_s + self.cooldown_s) as f64
    }
}

/// Stop-to-edge placement: each stop sits at the downstream end of one edge.
#[derive(Debug, Clone, Default)]
pub struct StopMap {
    edge_for_stop: HashMap<u32, u32>,
}

impl StopMap {
    pub fn edge_for_stop(&self, stop: u32) -> Option<u32> {
        self.edge_for_stop.get(&stop).copied()
    }

    /// Build from `(stop_id, edge_id)` pairs, validating every reference and
    /// reporting all problems at once.
    pub fn from_pairs(
        pairs: &[(String, String)],
        schedule: &TransitSchedule,
        graph: &NetworkGraph,
    ) -> Result<StopMap, SimError> {
        let mut map = HashMap::new();
        let mut problems = Vec::new();
        for (stop_id, edge_id) in pairs {
            let stop = schedule.stop_idx(stop_id);
            let edge = graph.edge_idx(edge_id);
            if stop.is_none() {
                problems.push(format!("unknown stop {stop_id}"));
            }
            if edge.is_none() {
                problems.push(format!("unknown edge {edge_id}"));
            }
            if let (Some(s), Some(e)) = (stop, edge) {
                if map.insert(s, e).is_some() {
                    problems.push(format!("stop {stop_id} mapped twice"));
                }
            }
        }
        if problems.is_empty() {
            Ok(StopMap { edge_for_stop: map })
        } else {
            Err(SimError::BadStopMap(problems))
        }
    }
}

/// Load a `stop_id,edge_id` CSV into a [`StopMap`].
pub fn load_stop_map(
    path: &Path,
    schedule: &TransitSchedule,
    graph: &NetworkGraph,
) -> Result<StopMap, SimError> {
    let text = std::fs::read_to_string(path).map_err(|source| SimError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("stop_id")) {
            continue;
        }
        let (stop, edge) = line.split_once(',').ok_or(SimError::StopMapFormat {
            line: i + 1,
            msg: "expected stop_id,edge_id".into(),
        })?;
        pairs.push((stop.trim().to_string(), edge.trim().to_string()));
    }
    StopMap::from_pairs(&pairs, schedule, graph)
}

/// One vehicle's stay on one edge. Mean speed is `length / (exit - enter)`,
/// never above the edge's free speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySegment {
    /// Index into [`SimOutput::vehicles`].
    pub vehicle: u32,
    pub edge: u32,
    pub enter_s: f64,
    pub exit_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleInfo {
    pub id: String,
    pub class: VehicleClass,
}

/// Per-stop bus record: schedule adherence plus boarding activity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BusStopEvent {
    /// Index into [`SimOutput::vehicles`].
    pub run: u32,
    /// Index into the schedule's stop list.
    pub stop: u32,
    pub sched_arrival_s: f64,
    pub actual_arrival_s: f64,
    pub sched_departure_s: f64,
    pub actual_departure_s: f64,
    pub boardings: u32,
    pub alightings: u32,
    /// Onboard load over seats after this stop, in `[0, 1]`.
    pub load_factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaitRecord {
    pub run: u32,
    pub stop: u32,
    pub board_s: f64,
    pub wait_s: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SimTotals {
    pub cars_departed: u32,
    pub cars_arrived: u32,
    pub cars_unfinished: u32,
    pub cars_outside_window: u32,
    pub pax_departed: u32,
    pub pax_arrived: u32,
    /// Onboard a bus when the horizon closed.
    pub pax_en_route: u32,
    /// Never picked up: no feasible route, or no run with a spare seat came.
    pub pax_unserved: u32,
    pub pax_outside_window: u32,
    pub runs_simulated: u32,
    pub runs_completed: u32,
    pub runs_unfinished: u32,
}

impl SimTotals {
    /// Departed = arrived + unfinished, per mode.
    pub fn conserves(&self) -> bool {
        self.cars_departed == self.cars_arrived + self.cars_unfinished
            && self.pax_departed == self.pax_arrived + self.pax_en_route + self.pax_unserved
            && self.runs_simulated == self.runs_completed + self.runs_unfinished
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimOutput {
    pub vehicles: Vec<VehicleInfo>,
    pub segments: Vec<TrajectorySegment>,
    pub stop_events: Vec<BusStopEvent>,
    pub waits: Vec<WaitRecord>,
    pub totals: SimTotals,
    /// `(vehicle, journey seconds)` for every car that finished.
    pub car_times: Vec<(u32, f64)>,
}

impl SimOutput {
    /// Trips still en route when the horizon closed.
    pub fn unfinished(&self) -> u32 {
        self.totals.cars_unfinished + self.totals.pax_en_route
    }

    pub fn car_journey_times(&self) -> BTreeMap<String, f64> {
        self.car_times
            .iter()
            .map(|&(v, t)| (self.vehicles[v as usize].id.clone(), t))
            .collect()
    }

    pub fn segments_csv(&self, graph: &NetworkGraph) -> String {
        let mut out = String::from("vehicle_id,class,edge_id,enter_s,exit_s,mean_speed_mps\n");
        for s in &self.segments {
            let v = &self.vehicles[s.vehicle as usize];
            let edge = graph.edge(s.edge);
            let speed = edge.length_m / (s.exit_s - s.enter_s);
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                v.id,
                v.class.as_str(),
                edge.id,
                s.enter_s,
                s.exit_s,
                speed
            ));
        }
        out
    }

    pub fn bus_kpis_csv(&self, schedule: &TransitSchedule) -> String {
        let mut out = String::from("run_id,stop_id,sched_s,actual_s,boardings,alightings,load_factor\n");
        for e in &self.stop_events {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                self.vehicles[e.run as usize].id,
                schedule.stop(e.stop).stop_id,
                e.sched_arrival_s,
                e.actual_arrival_s,
                e.boardings,
                e.alightings,
                e.load_factor
            ));
        }
        out
    }

    pub fn waits_csv(&self, schedule: &TransitSchedule) -> String {
        let mut out = String::from("run_id,stop_id,board_s,wait_s\n");
        for w in &self.waits {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.vehicles[w.run as usize].id,
                schedule.stop(w.stop).stop_id,
                w.board_s,
                w.wait_s
            ));
        }
        out
    }

    /// Write the three standard exports into `dir`.
    pub fn write_exports(
        &self,
        dir: &Path,
        graph: &NetworkGraph,
        schedule: &TransitSchedule,
    ) -> std::io::Result<()> {
        for (name, text) in [
            ("segments.csv", self.segments_csv(graph)),
            ("bus_kpis.csv", self.bus_kpis_csv(schedule)),
            ("waits.csv", self.waits_csv(schedule)),
        ] {
            let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join(name))?);
            f.write_all(text.as_bytes())?;
        }
        Ok(())
    }
}

/// Simulate one service day.
///
/// The `seed` parameter is part of the stable call signature but currently
/// unused: planning, loading, and the event loop are all deterministic
/// functions of the inputs, so runs with any seed are byte-identical.
pub fn run_day(
    graph: &NetworkGraph,
    trips: &crate::demand::TripTable,
    schedule: &TransitSchedule,
    stop_map: &StopMap,
    params: &SimParams,
    _seed: u64,
) -> Result<SimOutput, SimError> {
    let plan = plan::plan_journeys(graph, trips, schedule, stop_map, params)?;
    let entries = engine::freeflow_entries(&plan.vehicles, graph, params);
    let traversal = engine::frozen_traversals(&plan.vehicles, &entries, graph, params);
    Ok(engine::run_events(graph, &plan, &traversal, params))
}
