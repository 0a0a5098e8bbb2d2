//! Shared test support, compiled only with the `testkit` feature.
//!
//! Holds the brute-force replay oracle for the queue engine, seeded random
//! scenario generators, and transit-feed scaffolding used across the
//! integration suites. Nothing here is part of the library's public contract.

pub mod gen {
    //! Seeded random networks and trip tables, small enough for brute force.

    use crate::demand::{Mode, Trip, TripTable};
    use crate::network::{parse_network, NetworkGraph};
    use crate::rng::SeededRng;

    /// A strongly connected network: a ring of `n_nodes` edges plus `extra`
    /// random chords. Urban-range speeds (8-13.9 m/s) and deliberately small
    /// capacities so a handful of vehicles already congests an edge.
    pub fn random_network(rng: &mut SeededRng, n_nodes: usize, extra: usize) -> NetworkGraph {
        assert!(n_nodes >= 2);
        let mut edges = Vec::new();
        for i in 0..n_nodes {
            edges.push(serde_json::json!({
                "id": format!("r{i:02}"),
                "from": format!("n{i}"),
                "to": format!("n{}", (i + 1) % n_nodes),
                "length_m": 50.0 + (rng.uniform() * 2500.0).round() / 10.0,
                "free_speed_mps": 8.0 + (rng.uniform() * 59.0).round() / 10.0,
                "lanes": 1,
                "capacity_vph": (120.0 + (rng.uniform() * 480.0).round()),
            }));
        }
        for k in 0..extra {
            let a = rng.index(n_nodes);
            let mut b = rng.index(n_nodes);
            if b == a {
                b = (a + 1) % n_nodes;
            }
            edges.push(serde_json::json!({
                "id": format!("x{k:02}"),
                "from": format!("n{a}"),
                "to": format!("n{b}"),
                "length_m": 50.0 + (rng.uniform() * 2500.0).round() / 10.0,
                "free_speed_mps": 8.0 + (rng.uniform() * 59.0).round() / 10.0,
                "lanes": 1,
                "capacity_vph": (120.0 + (rng.uniform() * 480.0).round()),
            }));
        }
        let nodes: Vec<_> = (0..n_nodes)
            .map(|i| serde_json::json!({"id": format!("n{i}")}))
            .collect();
        let edge_ids: Vec<_> = edges.iter().map(|e| e["id"].clone()).collect();
        let text = serde_json::json!({
            "nodes": nodes,
            "edges": edges,
            "zones": [{"id": "all", "edges": edge_ids}],
        })
        .to_string();
        parse_network(&text).expect("generated network is valid")
    }

    /// Empty transit schedule for car-only scenarios.
    pub fn empty_schedule() -> crate::gtfs::TransitSchedule {
        crate::gtfs::TransitSchedule::build(
            chrono::NaiveDate::from_ymd_opt(2024, 6, 5).unwrap(),
            Vec::new(),
            Vec::new(),
            Vec::new(),
        )
    }

    /// `n` car trips between random edges, departing uniformly in
    /// `[start_s, start_s + span_s)`.
    pub fn random_car_trips(
        rng: &mut SeededRng,
        graph: &NetworkGraph,
        n: usize,
        start_s: f64,
        span_s: f64,
    ) -> TripTable {
        let trips = (0..n)
            .map(|i| {
                let o = rng.index(graph.edges.len());
                let d = rng.index(graph.edges.len());
                Trip {
                    trip_id: format!("car_{i:04}"),
                    mode: Mode::Car,
                    depart_s: start_s + rng.uniform() * span_s,
                    origin_edge: graph.edges[o].id.clone(),
                    dest_edge: graph.edges[d].id.clone(),
                    origin_zone: "all".into(),
                    dest_zone: "all".into(),
                }
            })
            .collect();
        TripTable { trips }
    }
}

pub mod replay {
    //! Brute-force re-simulation of car traffic at one-second bucket
    //! resolution. Deliberately shares no control flow with the engine: naive
    //! quadratic flow counting instead of sorted windows, and a linear bucket
    //! scan instead of a priority queue. Used to cross-check traversal and
    //! journey times.

    use std::collections::{BTreeMap, BTreeSet};

    use crate::demand::{Mode, TripTable};
    use crate::network::{shortest_path, NetworkGraph};
    use crate::sim::SimParams;

    pub struct ReplayResult {
        /// Journey seconds per finished car.
        pub journey_s: BTreeMap<String, f64>,
        pub unfinished: BTreeSet<String>,
    }

    pub fn replay_cars(graph: &NetworkGraph, trips: &TripTable, params: &SimParams) -> ReplayResult {
        let start = params.window.start_s as f64;
        let end = params.window.end_s as f64;
        let horizon = params.horizon_s();

        struct Veh {
            id: String,
            depart: f64,
            path: Vec<u32>,
            entries: Vec<f64>,
            traversal: Vec<f64>,
        }
        let mut vehicles: Vec<Veh> = Vec::new();
        for t in &trips.trips {
            if t.mode != Mode::Car || t.depart_s < start || t.depart_s >= end {
                continue;
            }
            let (ids, _) = shortest_path(graph, &t.origin_edge, &t.dest_edge).expect("reachable");
            let path: Vec<u32> = ids.iter().map(|id| graph.edge_idx(id).unwrap()).collect();
            let mut entries = Vec::new();
            let mut clock = t.depart_s;
            for &e in &path {
                entries.push(clock);
                clock += graph.edge(e).free_flow_time_s();
            }
            vehicles.push(Veh {
                id: t.trip_id.clone(),
                depart: t.depart_s,
                path,
                entries,
                traversal: Vec::new(),
            });
        }

        // Quadratic volume count: strictly-earlier entries within the window.
        let w = params.flow_window_s;
        for v in 0..vehicles.len() {
            let mut tt = Vec::with_capacity(vehicles[v].path.len());
            for (k, &e) in vehicles[v].path.iter().enumerate() {
                let t0 = vehicles[v].entries[k];
                let mut count = 0usize;
                for other in &vehicles {
                    for (&oe, &ot) in other.path.iter().zip(&other.entries) {
                        if oe == e && ot > t0 - w && ot < t0 {
                            count += 1;
                        }
                    }
                }
                let edge = graph.edge(e);
                let volume = count as f64 * 3600.0 / w;
                let factor = 1.0
                    + params.bpr_alpha * (volume / edge.capacity_vph).powf(params.bpr_beta);
                tt.push(edge.free_flow_time_s() * factor);
            }
            vehicles[v].traversal = tt;
        }

        // One-second buckets; within a bucket, process pending edge entries
        // by (time, vehicle) using repeated minimum selection.
        let n_buckets = horizon.ceil() as usize + 1;
        let mut buckets: Vec<Vec<(f64, usize, usize)>> = vec![Vec::new(); n_buckets];
        let mut result = ReplayResult { journey_s: BTreeMap::new(), unfinished: BTreeSet::new() };
        for (v, veh) in vehicles.iter().enumerate() {
            if veh.depart < horizon {
                buckets[veh.depart.floor() as usize].push((veh.depart, v, 0));
            } else {
                result.unfinished.insert(veh.id.clone());
            }
        }
        let mut last_exit: BTreeMap<u32, f64> = BTreeMap::new();
        for b in 0..n_buckets {
            while !buckets[b].is_empty() {
                let mut min = 0;
                for i in 1..buckets[b].len() {
                    let (ti, vi, _) = buckets[b][i];
                    let (tm, vm, _) = buckets[b][min];
                    if ti < tm || (ti == tm && vi < vm) {
                        min = i;
                    }
                }
                let (t, v, pos) = buckets[b].swap_remove(min);
                let veh = &vehicles[v];
                let e = veh.path[pos];
                let exit = (t + veh.traversal[pos])
                    .max(last_exit.get(&e).copied().unwrap_or(f64::NEG_INFINITY));
                last_exit.insert(e, exit);
                if pos + 1 < veh.path.len() {
                    if exit < horizon {
                        buckets[exit.floor() as usize].push((exit, v, pos + 1));
                    } else {
                        result.unfinished.insert(veh.id.clone());
                    }
                } else if exit < horizon {
                    result.journey_s.insert(veh.id.clone(), exit - veh.depart);
                } else {
                    result.unfinished.insert(veh.id.clone());
                }
            }
        }
        result
    }
}

pub mod feeds {
    //! A complete five-file transit feed, small but internally consistent,
    //! plus a writer so tests can drop or corrupt individual files.

    use std::collections::BTreeMap;
    use std::path::Path;

    pub fn minimal_feed() -> BTreeMap<&'static str, String> {
        let mut files = BTreeMap::new();
        files.insert(
            "stops.txt",
            "stop_id,stop_name,stop_lat,stop_lon\n\
             s1,First & Main,45.01,-93.20\n\
             s2,Second & Main,45.02,-93.20\n\
             s3,Third & Main,45.03,-93.20\n"
                .to_string(),
        );
        files.insert(
            "routes.txt",
            "route_id,route_short_name,route_type\nr1,10,3\n".to_string(),
        );
        files.insert(
            "trips.txt",
            "route_id,service_id,trip_id\nr1,wk,t1\nr1,wk,t2\n".to_string(),
        );
        files.insert(
            "stop_times.txt",
            "trip_id,arrival_time,departure_time,stop_id,stop_sequence\n\
             t1,06:00:00,06:00:30,s1,1\n\
             t1,06:10:00,06:10:30,s2,2\n\
             t1,06:20:00,06:20:30,s3,3\n\
             t2,07:00:00,07:00:30,s1,1\n\
             t2,07:10:00,07:10:30,s2,2\n\
             t2,07:20:00,07:20:30,s3,3\n"
                .to_string(),
        );
        files.insert(
            "calendar.txt",
            "service_id,monday,tuesday,wednesday,thursday,friday,saturday,sunday,start_date,end_date\n\
             wk,1,1,1,1,1,0,0,20240101,20261231\n"
                .to_string(),
        );
        files
    }

    pub fn write_feed(dir: &Path, files: &BTreeMap<&'static str, String>) {
        std::fs::create_dir_all(dir).unwrap();
        for (name, body) in files {
            std::fs::write(dir.join(name), body).unwrap();
        }
    }
}
