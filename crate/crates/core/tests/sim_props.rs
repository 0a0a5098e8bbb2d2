//! Behavioural properties of the day simulation on randomized scenarios:
//! removing traffic can only help the vehicles that remain, pure free-flow
//! scenarios scale emissions exactly with fleet size, per-mode bookkeeping
//! always balances, and buses honour schedule and dwell floors.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use modeshift_core::demand::{Mode, Trip, TripTable};
use modeshift_core::emissions::{integrate, ClassCoefficients, DEFAULT_BIN_WIDTH_S};
use modeshift_core::gtfs::{BusRunTemplate, RouteDef, Stop, StopEvent, TransitSchedule};
use modeshift_core::network::{shortest_path, NetworkGraph};
use modeshift_core::rng::SeededRng;
use modeshift_core::sim::{run_day, SimOutput, SimParams, StopMap};
use modeshift_core::testkit::gen;

fn run_cars(graph: &NetworkGraph, trips: &TripTable, params: &SimParams) -> SimOutput {
    let schedule = gen::empty_schedule();
    let stop_map = StopMap::from_pairs(&[], &schedule, graph).unwrap();
    run_day(graph, trips, &schedule, &stop_map, params, 0).unwrap()
}

fn total_co2_g(out: &SimOutput, graph: &NetworkGraph) -> f64 {
    integrate(
        &out.segments,
        &out.vehicles,
        graph,
        &ClassCoefficients::default(),
        DEFAULT_BIN_WIDTH_S,
    )
    .unwrap()
    .total_g()
}

/// Removing a random slice of the fleet must leave every remaining car no
/// slower, keep everyone who previously finished finishing, and not raise
/// total emissions. Thirty seeded scenarios with real congestion.
#[test]
fn traffic_relief_never_hurts() {
    let params = SimParams::default();
    for seed in 0..30u64 {
        let mut rng = SeededRng::new(0xC0FFEE ^ seed);
        let n_nodes = 5 + rng.index(4);
        let extra = rng.index(5);
        let graph = gen::random_network(&mut rng, n_nodes, extra);
        let n_cars = 30 + rng.index(51);
        let trips = gen::random_car_trips(&mut rng, &graph, n_cars, 28800.0, 1500.0);

        let base = run_cars(&graph, &trips, &params);
        let base_times = base.car_journey_times();

        let mut order: Vec<usize> = (0..n_cars).collect();
        rng.shuffle(&mut order);
        let k = 1 + rng.index(n_cars / 4);
        let drop: std::collections::HashSet<usize> = order[..k].iter().copied().collect();
        let variant_trips = TripTable {
            trips: trips
                .trips
                .iter()
                .enumerate()
                .filter(|(i, _)| !drop.contains(i))
                .map(|(_, t)| t.clone())
                .collect(),
        };
        let variant = run_cars(&graph, &variant_trips, &params);
        let variant_times = variant.car_journey_times();

        for t in &variant_trips.trips {
            match (base_times.get(&t.trip_id), variant_times.get(&t.trip_id)) {
                (Some(&b), Some(&v)) => assert!(
                    v <= b + 1e-9,
                    "seed {seed}: {} slowed from {b} to {v} after relief",
                    t.trip_id
                ),
                (Some(&b), None) => {
                    panic!("seed {seed}: {} finished at {b} in base but not after relief", t.trip_id)
                }
                _ => {}
            }
        }
        let co2_base = total_co2_g(&base, &graph);
        let co2_variant = total_co2_g(&variant, &graph);
        assert!(
            co2_variant <= co2_base + 1e-9,
            "seed {seed}: emissions rose from {co2_base} to {co2_variant} after removing {k} cars"
        );
    }
}

/// With every car on the same uncongested itinerary the flow window never
/// sees an earlier entry, so traversal stays at free flow and total emissions
/// are exactly proportional to fleet size.
#[test]
fn freeflow_emissions_scale_with_fleet() {
    let mut rng = SeededRng::new(7);
    let graph = gen::random_network(&mut rng, 6, 2);
    let make = |n: usize| TripTable {
        trips: (0..n)
            .map(|i| Trip {
                trip_id: format!("car_{i:04}"),
                mode: Mode::Car,
                depart_s: 30000.0,
                origin_edge: "r00".into(),
                dest_edge: "r03".into(),
                origin_zone: "all".into(),
                dest_zone: "all".into(),
            })
            .collect(),
    };
    let params = SimParams::default();

    let full = run_cars(&graph, &make(40), &params);
    let reduced = run_cars(&graph, &make(30), &params);

    let (_, cost) = shortest_path(&graph, "r00", "r03").unwrap();
    let ff_total = graph.edge(graph.edge_idx("r00").unwrap()).free_flow_time_s() + cost;
    for (id, &t) in &full.car_journey_times() {
        assert!(
            (t - ff_total).abs() <= 1e-9,
            "{id} took {t}, free flow is {ff_total}"
        );
    }

    let g_full = total_co2_g(&full, &graph);
    let g_reduced = total_co2_g(&reduced, &graph);
    let reduction = (g_full - g_reduced) / g_full;
    assert!(
        (reduction - 0.25).abs() <= 1e-9,
        "removing 10 of 40 identical cars cut emissions by {reduction}, want 0.25"
    );
}

fn mixed_scenario(seed: u64) -> (NetworkGraph, TripTable, TransitSchedule, StopMap) {
    let mut rng = SeededRng::new(seed);
    let graph = gen::random_network(&mut rng, 8, 4);
    let mk_stop = |id: &str| Stop {
        stop_id: id.into(),
        name: format!("stop {id}"),
        lat: 45.0,
        lon: -93.0,
    };
    let stops = vec![mk_stop("s0"), mk_stop("s1"), mk_stop("s2")];
    let routes =
        vec![RouteDef { route_id: "r7".into(), short_name: "7".into(), route_type: 3 }];
    let runs = (0..4)
        .map(|k| {
            let t0 = 29_000 + 1_200 * k;
            BusRunTemplate {
                run_id: format!("r7_{k}"),
                route: 0,
                service_id: "wk".into(),
                stop_events: vec![
                    StopEvent { stop: 0, arrival_s: t0, departure_s: t0 + 20 },
                    StopEvent { stop: 1, arrival_s: t0 + 400, departure_s: t0 + 420 },
                    StopEvent { stop: 2, arrival_s: t0 + 800, departure_s: t0 + 820 },
                ],
            }
        })
        .collect();
    let schedule = TransitSchedule::build(
        NaiveDate::from_ymd_opt(2024, 6, 5).unwrap(),
        stops,
        routes,
        runs,
    );
    let pairs = vec![
        ("s0".to_string(), "r00".to_string()),
        ("s1".to_string(), "r02".to_string()),
        ("s2".to_string(), "r05".to_string()),
    ];
    let stop_map = StopMap::from_pairs(&pairs, &schedule, &graph).unwrap();

    let mut trips = gen::random_car_trips(&mut rng, &graph, 40, 28_800.0, 3_600.0);
    for i in 0..25 {
        let o = rng.index(graph.edges.len());
        let d = rng.index(graph.edges.len());
        trips.trips.push(Trip {
            trip_id: format!("pax_{i:04}"),
            mode: Mode::BusPassenger,
            depart_s: 28_800.0 + rng.uniform() * 3_600.0,
            origin_edge: graph.edges[o].id.clone(),
            dest_edge: graph.edges[d].id.clone(),
            origin_zone: "all".into(),
            dest_zone: "all".into(),
        });
    }
    (graph, trips, schedule, stop_map)
}

/// Per-mode bookkeeping identities, dwell and punctuality floors, per-edge
/// FIFO, speed caps, and the free-flow lower bound, across mixed scenarios.
#[test]
fn mixed_scenarios_keep_invariants() {
    let params = SimParams::default();
    for seed in 100..110u64 {
        let (graph, trips, schedule, stop_map) = mixed_scenario(seed);
        let out = run_day(&graph, &trips, &schedule, &stop_map, &params, 1).unwrap();

        assert!(out.totals.conserves(), "seed {seed}: totals do not balance: {:?}", out.totals);
        assert!(out.totals.pax_arrived > 0, "seed {seed}: nobody rode the bus");

        for ev in &out.stop_events {
            assert!(
                (0.0..=1.0).contains(&ev.load_factor),
                "seed {seed}: load factor {} out of range",
                ev.load_factor
            );
            assert!(
                ev.actual_departure_s >= ev.sched_departure_s as f64 - 1e-9,
                "seed {seed}: run {} left stop {} early",
                ev.run,
                ev.stop
            );
            assert!(
                ev.actual_departure_s >= ev.actual_arrival_s + params.dwell_min_s - 1e-9,
                "seed {seed}: run {} dwell below the floor at stop {}",
                ev.run,
                ev.stop
            );
        }
        for w in &out.waits {
            assert!(w.wait_s >= 0.0, "seed {seed}: negative wait {}", w.wait_s);
        }

        let mut per_edge: BTreeMap<u32, Vec<(f64, f64)>> = BTreeMap::new();
        for s in &out.segments {
            let e = graph.edge(s.edge);
            let dur = s.exit_s - s.enter_s;
            assert!(dur > 0.0, "seed {seed}: non-positive segment duration");
            assert!(
                e.length_m / dur <= e.free_speed_mps + 1e-9,
                "seed {seed}: edge {} traversed above free speed",
                e.id
            );
            per_edge.entry(s.edge).or_default().push((s.enter_s, s.exit_s));
        }
        for (edge, mut v) in per_edge {
            v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
            for pair in v.windows(2) {
                assert!(
                    pair[0].1 <= pair[1].1 + 1e-9,
                    "seed {seed}: edge {edge} exits out of entry order"
                );
            }
        }

        let by_id: BTreeMap<&str, &Trip> =
            trips.trips.iter().map(|t| (t.trip_id.as_str(), t)).collect();
        for (id, &t) in &out.car_journey_times() {
            let trip = by_id[id.as_str()];
            let (_, cost) = shortest_path(&graph, &trip.origin_edge, &trip.dest_edge).unwrap();
            let ff = graph.edge(graph.edge_idx(&trip.origin_edge).unwrap()).free_flow_time_s()
                + cost;
            assert!(
                t >= ff - 1e-9,
                "seed {seed}: {id} journey {t} beats free flow {ff}"
            );
        }
    }
}

/// Rebuilding the same scenario from scratch and re-running it must produce
/// byte-identical export files.
#[test]
fn mixed_rerun_is_byte_identical() {
    let run_once = || {
        let (graph, trips, schedule, stop_map) = mixed_scenario(4242);
        let out = run_day(&graph, &trips, &schedule, &stop_map, &SimParams::default(), 9).unwrap();
        (
            out.segments_csv(&graph),
            out.bus_kpis_csv(&schedule),
            out.waits_csv(&schedule),
        )
    };
    let a = run_once();
    let b = run_once();
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
    assert_eq!(a.2, b.2);
}
