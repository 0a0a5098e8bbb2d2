//! Journey planning: fixed free-flow routes for cars and buses, and
//! passenger-to-route assignment. Everything here is pure preprocessing; the
//! event loop never re-routes.

use std::collections::{BTreeSet, HashMap};

use crate::demand::{Mode, TripTable};
use crate::gtfs::{runs_in_window, TransitSchedule};
use crate::network::{path_trees, NetworkGraph, PathTree};

use super::{SimError, SimParams, StopMap, VehicleClass};

#[derive(Debug, Clone)]
pub(crate) struct PlannedStop {
    /// Index into the schedule's stop list.
    pub stop: u32,
    /// Position in `VehiclePlan::edges` of the edge whose exit is this stop's
    /// arrival; `None` when the stop precedes all driving (route start, or a
    /// stop sharing the start edge).
    pub seq_pos: Option<usize>,
    pub sched_arrival_s: f64,
    pub sched_departure_s: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct VehiclePlan {
    pub id: String,
    pub class: VehicleClass,
    /// Route index for buses; unused for cars.
    pub route: u32,
    /// Cars: entry time to the first edge. Buses: arrival at the first stop.
    pub start_s: f64,
    pub edges: Vec<u32>,
    /// Stop visits in order; empty for cars. `seq_pos` is non-decreasing.
    pub stops: Vec<PlannedStop>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct PaxPlan {
    pub route: u32,
    pub board_stop: u32,
    pub alight_stop: u32,
    /// When the passenger shows up at the board stop.
    pub stop_arrival_s: f64,
}

#[derive(Debug, Default)]
pub(crate) struct DayPlan {
    /// Buses first (schedule order), then cars (trip-table order).
    pub vehicles: Vec<VehiclePlan>,
    pub pax: Vec<PaxPlan>,
    pub cars_outside_window: u32,
    pub pax_outside_window: u32,
    /// In-window passengers with no usable route/stop pair.
    pub pax_unassigned: u32,
}

pub(crate) fn plan_journeys(
    graph: &NetworkGraph,
    trips: &TripTable,
    schedule: &TransitSchedule,
    stop_map: &StopMap,
    params: &SimParams,
) -> Result<DayPlan, SimError> {
    let runs = runs_in_window(schedule, params.window, None)
        .expect("no route filter in use");

    // Every stop a simulated run visits must be placed on an edge.
    let mut missing = BTreeSet::new();
    for run in &runs {
        for ev in &run.stop_events {
            if stop_map.edge_for_stop(ev.stop).is_none() {
                missing.insert(schedule.stop(ev.stop).stop_id.clone());
            }
        }
    }
    if !missing.is_empty() {
        return Err(SimError::UnmappedStops(missing.into_iter().collect()));
    }

    // Resolve trip edges up front; any dangling reference is fatal.
    let start = params.window.start_s as f64;
    let end = params.window.end_s as f64;
    let mut plan = DayPlan::default();
    let mut cars = Vec::new(); // (trip index, origin, dest)
    let mut pax = Vec::new();
    for (i, trip) in trips.trips.iter().enumerate() {
        let origin = graph.edge_idx(&trip.origin_edge).ok_or_else(|| SimError::UnknownTripEdge {
            trip: trip.trip_id.clone(),
            edge: trip.origin_edge.clone(),
        })?;
        let dest = graph.edge_idx(&trip.dest_edge).ok_or_else(|| SimError::UnknownTripEdge {
            trip: trip.trip_id.clone(),
            edge: trip.dest_edge.clone(),
        })?;
        let admitted = trip.depart_s >= start && trip.depart_s < end;
        match (trip.mode, admitted) {
            (Mode::Car, true) => cars.push((i, origin, dest)),
            (Mode::Car, false) => plan.cars_outside_window += 1,
            (Mode::BusPassenger, true) => pax.push((i, origin, dest)),
            (Mode::BusPassenger, false) => plan.pax_outside_window += 1,
        }
    }

    // Shortest-path trees from every origin we will query: car origins,
    // passenger origins, and stop edges (bus legs + passenger egress).
    let mut origin_set: BTreeSet<u32> = BTreeSet::new();
    origin_set.extend(cars.iter().map(|&(_, o, _)| o));
    origin_set.extend(pax.iter().map(|&(_, o, _)| o));
    for run in &runs {
        for ev in &run.stop_events {
            origin_set.extend(stop_map.edge_for_stop(ev.stop));
        }
    }
    let origins: Vec<u32> = origin_set.into_iter().collect();
    let trees: HashMap<u32, PathTree> =
        origins.iter().copied().zip(path_trees(graph, &origins)).collect();

    // Bus plans: legs between consecutive stop edges, stops pinned to the
    // edge position whose exit is the arrival.
    for run in &runs {
        let first = run.stop_events[0];
        let mut edges: Vec<u32> = Vec::new();
        let mut stops = vec![PlannedStop {
            stop: first.stop,
            seq_pos: None,
            sched_arrival_s: first.arrival_s as f64,
            sched_departure_s: first.departure_s as f64,
        }];
        for pair in run.stop_events.windows(2) {
            let from = stop_map.edge_for_stop(pair[0].stop).expect("checked above");
            let to = stop_map.edge_for_stop(pair[1].stop).expect("checked above");
            let leg = trees[&from].path_to(to).ok_or_else(|| SimError::BusLeg {
                run: run.run_id.clone(),
                from_stop: schedule.stop(pair[0].stop).stop_id.clone(),
                to_stop: schedule.stop(pair[1].stop).stop_id.clone(),
            })?;
            edges.extend(&leg[1..]); // the leg's first edge was already traversed
            stops.push(PlannedStop {
                stop: pair[1].stop,
                seq_pos: edges.len().checked_sub(1),
                sched_arrival_s: pair[1].arrival_s as f64,
                sched_departure_s: pair[1].departure_s as f64,
            });
        }
        plan.vehicles.push(VehiclePlan {
            id: run.run_id.clone(),
            class: VehicleClass::Bus,
            route: run.route,
            start_s: first.arrival_s as f64,
            edges,
            stops,
        });
    }

    // Car plans: one fixed shortest path each.
    for (i, origin, dest) in cars {
        let trip = &trips.trips[i];
        let path = trees[&origin].path_to(dest).ok_or_else(|| SimError::NoRoute {
            trip: trip.trip_id.clone(),
            from: trip.origin_edge.clone(),
            to: trip.dest_edge.clone(),
        })?;
        plan.vehicles.push(VehiclePlan {
            id: trip.trip_id.clone(),
            class: VehicleClass::Car,
            route: u32::MAX,
            start_s: trip.depart_s,
            edges: path,
            stops: Vec::new(),
        });
    }

    // Passenger assignment: pick the (route, board, alight) pair minimising
    // free-flow access + egress cost; ties break on route id, then stop
    // positions, so assignment never depends on map iteration order.
    struct Pattern {
        route: u32,
        stops: Vec<u32>,
        stop_edges: Vec<u32>,
    }
    let mut seen_routes = BTreeSet::new();
    let mut patterns: Vec<Pattern> = Vec::new();
    for run in &runs {
        if seen_routes.insert(run.route) {
            patterns.push(Pattern {
                route: run.route,
                stops: run.stop_events.iter().map(|ev| ev.stop).collect(),
                stop_edges: run
                    .stop_events
                    .iter()
                    .map(|ev| stop_map.edge_for_stop(ev.stop).expect("checked above"))
                    .collect(),
            });
        }
    }
    patterns.sort_by(|a, b| {
        schedule.routes[a.route as usize].route_id.cmp(&schedule.routes[b.route as usize].route_id)
    });

    for (i, origin, dest) in pax {
        let trip = &trips.trips[i];
        let mut best: Option<(f64, usize, usize, usize)> = None;
        for (rank, pat) in patterns.iter().enumerate() {
            for bi in 0..pat.stops.len() {
                let Some(access) = trees[&origin].cost_to(pat.stop_edges[bi]) else { continue };
                for ai in bi + 1..pat.stops.len() {
                    let Some(egress) = trees[&pat.stop_edges[ai]].cost_to(dest) else { continue };
                    let cost = access + egress;
                    if best.map_or(true, |(c, ..)| cost < c) {
                        best = Some((cost, rank, bi, ai));
                    }
                }
            }
        }
        match best {
            Some((_, rank, bi, ai)) => plan.pax.push(PaxPlan {
                route: patterns[rank].route,
                board_stop: patterns[rank].stops[bi],
                alight_stop: patterns[rank].stops[ai],
                stop_arrival_s: trip.depart_s,
            }),
            None => plan.pax_unassigned += 1,
        }
    }

    Ok(plan)
}
