//! The two-pass loading engine: frozen flow measurement, then an event-driven
//! FIFO point-queue replay.

use std::collections::{BinaryHeap, HashMap, VecDeque};

use crate::network::NetworkGraph;

use super::plan::{DayPlan, VehiclePlan};
use super::{
    BusStopEvent, SimOutput, SimParams, SimTotals, TrajectorySegment, VehicleClass, VehicleInfo,
    WaitRecord,
};

/// Pass one: entry times assuming free flow everywhere. Independent per
/// vehicle — a bus is delayed only by its schedule and the minimum dwell,
/// a car only by its own path — so removing vehicles never changes the
/// remaining entries.
pub(crate) fn freeflow_entries(
    plans: &[VehiclePlan],
    graph: &NetworkGraph,
    params: &SimParams,
) -> Vec<Vec<f64>> {
    plans.iter().map(|p| vehicle_entries(p, graph, params)).collect()
}

fn vehicle_entries(plan: &VehiclePlan, graph: &NetworkGraph, params: &SimParams) -> Vec<f64> {
    let mut entries = Vec::with_capacity(plan.edges.len());
    let mut t = plan.start_s;
    let mut si = 0;
    while si < plan.stops.len() && plan.stops[si].seq_pos.is_none() {
        t = plan.stops[si].sched_departure_s.max(t + params.dwell_min_s);
        si += 1;
    }
    for (k, &e) in plan.edges.iter().enumerate() {
        entries.push(t);
        t += graph.edge(e).free_flow_time_s();
        while si < plan.stops.len() && plan.stops[si].seq_pos == Some(k) {
            t = plan.stops[si].sched_departure_s.max(t + params.dwell_min_s);
            si += 1;
        }
    }
    entries
}

/// Pass one, step two: freeze each vehicle's traversal time per edge from the
/// flow it meets there. Volume counts strictly-earlier free-flow entries in
/// the trailing window, scaled to vehicles/hour; the vehicle itself is never
/// counted (a lone vehicle must see exactly free flow).
pub(crate) fn frozen_traversals(
    plans: &[VehiclePlan],
    entries: &[Vec<f64>],
    graph: &NetworkGraph,
    params: &SimParams,
) -> Vec<Vec<f64>> {
    let mut by_edge: Vec<Vec<f64>> = vec![Vec::new(); graph.edges.len()];
    for (plan, ent) in plans.iter().zip(entries) {
        for (&e, &t) in plan.edges.iter().zip(ent) {
            by_edge[e as usize].push(t);
        }
    }
    for times in &mut by_edge {
        times.sort_by(f64::total_cmp);
    }

    let w = params.flow_window_s;
    let per_hour = 3600.0 / w;
    plans
        .iter()
        .zip(entries)
        .map(|(plan, ent)| {
            plan.edges
                .iter()
                .zip(ent)
                .map(|(&e, &t)| {
                    let edge = graph.edge(e);
                    let times = &by_edge[e as usize];
                    let lo = times.partition_point(|&x| x <= t - w);
                    let hi = times.partition_point(|&x| x < t);
                    let volume = (hi - lo) as f64 * per_hour;
                    let factor =
                        1.0 + params.bpr_alpha * (volume / edge.capacity_vph).powf(params.bpr_beta);
                    edge.free_flow_time_s() * factor
                })
                .collect()
        })
        .collect()
}

const KIND_ENTER: u8 = 0;
const KIND_SERVICE: u8 = 1;
const KIND_COMPLETE: u8 = 2;

/// Heap entry ordered as a min-heap on (time, kind, vehicle, seq) — the
/// documented total event order.
#[derive(PartialEq)]
struct Event {
    time: f64,
    kind: u8,
    vehicle: u32,
    seq: u64,
    /// Edge position for enter events, stop index for service events.
    pos: usize,
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.kind.cmp(&self.kind))
            .then_with(|| other.vehicle.cmp(&self.vehicle))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum PaxState {
    Waiting,
    Onboard,
    Done,
}

/// Pass two: replay all movements in event order with the frozen traversal
/// times. Per-edge FIFO is enforced by clamping each exit to the edge's
/// latest exit so far; boarding consumes stop queues in bus-arrival order.
pub(crate) fn run_events(
    graph: &NetworkGraph,
    plan: &DayPlan,
    traversal: &[Vec<f64>],
    params: &SimParams,
) -> SimOutput {
    let plans = &plan.vehicles;
    let horizon = params.horizon_s();
    let seats = params.bus_seats as usize;

    // Waiting passengers per (route, stop), earliest arrival first.
    let mut queues: HashMap<(u32, u32), VecDeque<u32>> = HashMap::new();
    let mut pax_order: Vec<u32> = (0..plan.pax.len() as u32).collect();
    pax_order.sort_by(|&a, &b| {
        plan.pax[a as usize]
            .stop_arrival_s
            .total_cmp(&plan.pax[b as usize].stop_arrival_s)
            .then_with(|| a.cmp(&b))
    });
    for p in pax_order {
        let pp = &plan.pax[p as usize];
        queues.entry((pp.route, pp.board_stop)).or_default().push_back(p);
    }

    // First stop index at each edge position, per bus.
    let stop_at: Vec<HashMap<usize, usize>> = plans
        .iter()
        .map(|p| {
            let mut m = HashMap::new();
            for (si, s) in p.stops.iter().enumerate() {
                if let Some(pos) = s.seq_pos {
                    m.entry(pos).or_insert(si);
                }
            }
            m
        })
        .collect();

    let mut heap: BinaryHeap<Event> = BinaryHeap::new();
    let mut seq = 0u64;
    let push = |heap: &mut BinaryHeap<Event>, seq: &mut u64, time: f64, kind: u8, vehicle: u32, pos: usize| {
        *seq += 1;
        heap.push(Event { time, kind, vehicle, seq: *seq, pos });
    };

    for (v, p) in plans.iter().enumerate() {
        match p.class {
            VehicleClass::Car => push(&mut heap, &mut seq, p.start_s, KIND_ENTER, v as u32, 0),
            VehicleClass::Bus => push(&mut heap, &mut seq, p.start_s, KIND_SERVICE, v as u32, 0),
        }
    }

    let mut last_exit: Vec<f64> = vec![f64::NEG_INFINITY; graph.edges.len()];
    let mut onboard: Vec<Vec<u32>> = vec![Vec::new(); plans.len()];
    let mut pax_state = vec![PaxState::Waiting; plan.pax.len()];
    let mut finished = vec![false; plans.len()];
    let mut arrived = vec![false; plans.len()];

    let mut out = SimOutput {
        vehicles: plans
            .iter()
            .map(|p| VehicleInfo { id: p.id.clone(), class: p.class })
            .collect(),
        ..SimOutput::default()
    };

    while let Some(ev) = heap.pop() {
        let v = ev.vehicle as usize;
        if finished[v] {
            continue;
        }
        if ev.time >= horizon {
            finished[v] = true; // still en route when the day closed
            continue;
        }
        let p = &plans[v];
        match ev.kind {
            KIND_ENTER => {
                let e = p.edges[ev.pos];
                let exit = (ev.time + traversal[v][ev.pos]).max(last_exit[e as usize]);
                last_exit[e as usize] = exit;
                out.segments.push(TrajectorySegment {
                    vehicle: ev.vehicle,
                    edge: e,
                    enter_s: ev.time,
                    exit_s: exit,
                });
                if let Some(&si) = stop_at[v].get(&ev.pos) {
                    push(&mut heap, &mut seq, exit, KIND_SERVICE, ev.vehicle, si);
                } else if ev.pos + 1 < p.edges.len() {
                    push(&mut heap, &mut seq, exit, KIND_ENTER, ev.vehicle, ev.pos + 1);
                } else {
                    push(&mut heap, &mut seq, exit, KIND_COMPLETE, ev.vehicle, 0);
                }
            }
            KIND_SERVICE => {
                let stop = &p.stops[ev.pos];
                let arrival = ev.time;

                let mut alightings = 0u32;
                onboard[v].retain(|&q| {
                    if plan.pax[q as usize].alight_stop == stop.stop {
                        pax_state[q as usize] = PaxState::Done;
                        alightings += 1;
                        false
                    } else {
                        true
                    }
                });

                let mut boardings = 0u32;
                if let Some(queue) = queues.get_mut(&(p.route, stop.stop)) {
                    while onboard[v].len() < seats {
                        match queue.front() {
                            Some(&q)
                                if plan.pax[q as usize].stop_arrival_s <= arrival =>
                            {
                                queue.pop_front();
                                onboard[v].push(q);
                                pax_state[q as usize] = PaxState::Onboard;
                                boardings += 1;
                                out.waits.push(WaitRecord {
                                    run: ev.vehicle,
                                    stop: stop.stop,
                                    board_s: arrival,
                                    wait_s: arrival - plan.pax[q as usize].stop_arrival_s,
                                });
                            }
                            _ => break,
                        }
                    }
                }

                let dwell = params
                    .dwell_min_s
                    .max(params.board_s_per_pax * boardings as f64
                        + params.alight_s_per_pax * alightings as f64);
                let departure = stop.sched_departure_s.max(arrival + dwell);
                out.stop_events.push(BusStopEvent {
                    run: ev.vehicle,
                    stop: stop.stop,
                    sched_arrival_s: stop.sched_arrival_s,
                    actual_arrival_s: arrival,
                    sched_departure_s: stop.sched_departure_s,
                    actual_departure_s: departure,
                    boardings,
                    alightings,
                    load_factor: onboard[v].len() as f64 / seats as f64,
                });

                let chained = ev.pos + 1 < p.stops.len()
                    && p.stops[ev.pos + 1].seq_pos == stop.seq_pos;
                if chained {
                    push(&mut heap, &mut seq, departure, KIND_SERVICE, ev.vehicle, ev.pos + 1);
                } else {
                    let next_edge = stop.seq_pos.map_or(0, |pos| pos + 1);
                    if next_edge < p.edges.len() {
                        push(&mut heap, &mut seq, departure, KIND_ENTER, ev.vehicle, next_edge);
                    } else {
                        push(&mut heap, &mut seq, departure, KIND_COMPLETE, ev.vehicle, 0);
                    }
                }
            }
            _ => {
                finished[v] = true;
                arrived[v] = true;
                if p.class == VehicleClass::Car {
                    out.car_times.push((ev.vehicle, ev.time - p.start_s));
                }
            }
        }
    }

    let mut totals = SimTotals {
        cars_outside_window: plan.cars_outside_window,
        pax_outside_window: plan.pax_outside_window,
        ..SimTotals::default()
    };
    for (v, p) in plans.iter().enumerate() {
        match p.class {
            VehicleClass::Car => {
                totals.cars_departed += 1;
                if arrived[v] {
                    totals.cars_arrived += 1;
                } else {
                    totals.cars_unfinished += 1;
                }
            }
            VehicleClass::Bus => {
                totals.runs_simulated += 1;
                if arrived[v] {
                    totals.runs_completed += 1;
                } else {
                    totals.runs_unfinished += 1;
                }
            }
        }
    }
    totals.pax_departed = plan.pax.len() as u32 + plan.pax_unassigned;
    totals.pax_unserved = plan.pax_unassigned;
    for state in &pax_state {
        match state {
            PaxState::Done => totals.pax_arrived += 1,
            PaxState::Onboard => totals.pax_en_route += 1,
            PaxState::Waiting => totals.pax_unserved += 1,
        }
    }
    out.totals = totals;
    out
}
