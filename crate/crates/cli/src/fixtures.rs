//! Deterministic generators for the bundled example areas: a downtown-style
//! mixed-use grid, a residential district, and a minimal smoke bundle for
//! quick end-to-end checks. `make_fixtures` regenerates them byte-for-byte.
//!
//! Grid layout: an `n x n` intersection lattice with a one-way edge pair on
//! every street segment. Edge ids read `r{row}c{col}{direction}`, named after
//! their from-node; rows and columns divisible by four are arterials (faster,
//! two lanes, more capacity). Bus routes run along fixed rows with a stop
//! every other intersection, placed on the edge arriving there.

use std::fmt::Write as _;
use std::path::Path;

use modeshift_core::demand::largest_remainder;

pub struct RouteSpec {
    pub short_name: &'static str,
    pub row: usize,
    pub eastbound: bool,
    pub n_runs: u32,
    /// First departure offset from the window start.
    pub offset_s: u32,
    pub headway_s: u32,
}

pub struct BundleSpec {
    pub name: &'static str,
    /// Intersections per side.
    pub n: usize,
    pub block_m: f64,
    pub zones_per_side: usize,
    /// Row-major zone names, `zones_per_side^2` of them.
    pub zone_names: &'static [&'static str],
    /// Relative trip weight per zone (production and attraction alike).
    pub zone_weights: &'static [f64],
    pub routes: Vec<RouteSpec>,
    pub car_total: u64,
    pub bus_total: u64,
    pub profile: &'static str,
    pub seed: u64,
}

/// Downtown replica: published baseline P0=6585, B0=1035, C0=35335.
pub fn mixeduse_grid() -> BundleSpec {
    BundleSpec {
        name: "mixeduse-grid",
        n: 23,
        block_m: 150.0,
        zones_per_side: 3,
        zone_names: &["nw", "north", "ne", "west", "core", "east", "sw", "south", "se"],
        zone_weights: &[0.8, 1.2, 0.8, 1.2, 2.4, 1.2, 0.8, 1.2, 0.8],
        routes: vec![
            RouteSpec { short_name: "5", row: 3, eastbound: true, n_runs: 207, offset_s: 0, headway_s: 278 },
            RouteSpec { short_name: "16", row: 7, eastbound: false, n_runs: 207, offset_s: 55, headway_s: 278 },
            RouteSpec { short_name: "19", row: 11, eastbound: true, n_runs: 207, offset_s: 110, headway_s: 278 },
            RouteSpec { short_name: "35", row: 15, eastbound: false, n_runs: 207, offset_s: 165, headway_s: 278 },
            RouteSpec { short_name: "41x", row: 19, eastbound: true, n_runs: 207, offset_s: 220, headway_s: 278 },
        ],
        car_total: 35_335,
        bus_total: 6_585,
        profile: "mixed_use",
        seed: 61,
    }
}

/// Residential district replica: published baseline P0=982, B0=173, C0=7239.
pub fn residential_grid() -> BundleSpec {
    BundleSpec {
        name: "residential-grid",
        n: 12,
        block_m: 160.0,
        zones_per_side: 2,
        zone_names: &["nw", "ne", "sw", "se"],
        zone_weights: &[1.3, 1.0, 1.0, 0.8],
        routes: vec![
            RouteSpec { short_name: "10A", row: 3, eastbound: true, n_runs: 57, offset_s: 0, headway_s: 1010 },
            RouteSpec { short_name: "10C", row: 6, eastbound: false, n_runs: 58, offset_s: 30, headway_s: 990 },
            RouteSpec { short_name: "10G", row: 9, eastbound: true, n_runs: 58, offset_s: 60, headway_s: 992 },
        ],
        car_total: 7_239,
        bus_total: 982,
        profile: "residential_bimodal",
        seed: 7,
    }
}

/// Small bundle that runs the whole pipeline in well under a second.
pub fn smoke() -> BundleSpec {
    BundleSpec {
        name: "smoke",
        n: 6,
        block_m: 140.0,
        zones_per_side: 2,
        zone_names: &["nw", "ne", "sw", "se"],
        zone_weights: &[1.0, 1.0, 1.0, 1.0],
        routes: vec![RouteSpec {
            short_name: "1",
            row: 2,
            eastbound: true,
            n_runs: 24,
            offset_s: 0,
            headway_s: 2_400,
        }],
        car_total: 400,
        bus_total: 60,
        profile: "uniform",
        seed: 1,
    }
}

pub fn all_bundles() -> Vec<BundleSpec> {
    vec![mixeduse_grid(), residential_grid(), smoke()]
}

fn node_id(r: usize, c: usize) -> String {
    format!("n{r:02}{c:02}")
}

fn edge_id(r: usize, c: usize, dir: char) -> String {
    format!("r{r:02}c{c:02}{dir}")
}

fn is_arterial(index: usize) -> bool {
    index % 4 == 0
}

/// (length stays the block length; arterials are faster and wider)
fn edge_attrs(arterial: bool) -> (f64, u32, f64) {
    if arterial {
        (12.5, 2, 900.0) // speed m/s, lanes, capacity vph
    } else {
        (10.0, 1, 600.0)
    }
}

fn zone_of(spec: &BundleSpec, r: usize, c: usize) -> usize {
    let z = spec.zones_per_side;
    (r * z / spec.n) * z + (c * z / spec.n)
}

pub fn network_json(spec: &BundleSpec) -> String {
    let n = spec.n;
    let mut nodes = Vec::new();
    for r in 0..n {
        for c in 0..n {
            nodes.push(serde_json::json!({"id": node_id(r, c)}));
        }
    }
    let mut edges = Vec::new();
    let mut zone_edges: Vec<Vec<String>> = vec![Vec::new(); spec.zones_per_side * spec.zones_per_side];
    let mut push = |r: usize, c: usize, dir: char, tr: usize, tc: usize, arterial: bool| {
        let (speed, lanes, capacity) = edge_attrs(arterial);
        let id = edge_id(r, c, dir);
        edges.push(serde_json::json!({
            "id": id,
            "from": node_id(r, c),
            "to": node_id(tr, tc),
            "length_m": spec.block_m,
            "free_speed_mps": speed,
            "lanes": lanes,
            "capacity_vph": capacity,
        }));
        zone_edges[zone_of(spec, r, c)].push(id);
    };
    for r in 0..n {
        for c in 0..n {
            if c + 1 < n {
                push(r, c, 'e', r, c + 1, is_arterial(r));
            }
            if c > 0 {
                push(r, c, 'w', r, c - 1, is_arterial(r));
            }
            if r + 1 < n {
                push(r, c, 's', r + 1, c, is_arterial(c));
            }
            if r > 0 {
                push(r, c, 'n', r - 1, c, is_arterial(c));
            }
        }
    }
    let zones: Vec<_> = spec
        .zone_names
        .iter()
        .zip(&zone_edges)
        .map(|(name, edges)| serde_json::json!({"id": name, "edges": edges}))
        .collect();
    serde_json::json!({"nodes": nodes, "edges": edges, "zones": zones}).to_string()
}

/// Stop columns for a route and the edge each stop sits on (the edge whose
/// downstream end is the stop's intersection, in travel direction).
pub fn route_stops(spec: &BundleSpec, route: &RouteSpec) -> Vec<(String, String)> {
    let n = spec.n;
    let mut out = Vec::new();
    if route.eastbound {
        let mut c = 2;
        while c < n {
            out.push((format!("st{:02}{:02}", route.row, c), edge_id(route.row, c - 1, 'e')));
            c += 2;
        }
    } else {
        let mut c = n as i64 - 3;
        while c >= 0 {
            let cu = c as usize;
            out.push((format!("st{:02}{:02}", route.row, cu), edge_id(route.row, cu + 1, 'w')));
            c -= 2;
        }
    }
    out
}

fn gtfs_time(seconds: u32) -> String {
    format!("{:02}:{:02}:{:02}", seconds / 3600, (seconds % 3600) / 60, seconds % 60)
}

pub struct GtfsFiles {
    pub stops: String,
    pub routes: String,
    pub trips: String,
    pub stop_times: String,
    pub calendar: String,
    pub stop_map: String,
}

pub fn gtfs_files(spec: &BundleSpec, window_start_s: u32) -> GtfsFiles {
    let mut stops = String::from("stop_id,stop_name,stop_lat,stop_lon\n");
    let mut routes = String::from("route_id,route_short_name,route_type\n");
    let mut trips = String::from("route_id,service_id,trip_id\n");
    let mut stop_times = String::from("trip_id,arrival_time,departure_time,stop_id,stop_sequence\n");
    let calendar = "service_id,monday,tuesday,wednesday,thursday,friday,saturday,sunday,start_date,end_date\n\
                    wk,1,1,1,1,1,0,0,20240101,20261231\n"
        .to_string();
    let mut stop_map = String::from("stop_id,edge_id\n");

    for (ri, route) in spec.routes.iter().enumerate() {
        let route_id = format!("rt{ri}");
        let _ = writeln!(routes, "{route_id},{},3", route.short_name);
        let stop_list = route_stops(spec, route);
        for (stop_id, edge) in &stop_list {
            // A coarse synthetic coordinate; the simulator never reads it.
            let r: f64 = stop_id[2..4].parse().unwrap();
            let c: f64 = stop_id[4..6].parse().unwrap();
            let _ = writeln!(stops, "{stop_id},Stop {stop_id},{:.5},{:.5}", 45.0 + r * 0.0015, -93.3 + c * 0.0015);
            let _ = writeln!(stop_map, "{stop_id},{edge}");
        }

        // Scheduled leg time: two blocks at that row's free speed, with 25%
        // slack, plus a 15 s scheduled dwell at each stop.
        let (speed, _, _) = edge_attrs(is_arterial(route.row));
        let leg_s = (2.0 * spec.block_m / speed * 1.25).ceil() as u32;
        for k in 0..route.n_runs {
            let trip_id = format!("{}_{k:03}", route.short_name);
            let _ = writeln!(trips, "rt{ri},wk,{trip_id}");
            let mut t = window_start_s + route.offset_s + k * route.headway_s;
            for (si, (stop_id, _)) in stop_list.iter().enumerate() {
                let arr = t;
                let dep = t + 15;
                let _ = writeln!(
                    stop_times,
                    "{trip_id},{},{},{stop_id},{}",
                    gtfs_time(arr),
                    gtfs_time(dep),
                    si + 1
                );
                t = dep + leg_s;
            }
        }
    }

    GtfsFiles { stops, routes, trips, stop_times, calendar, stop_map }
}

/// Integer OD matrix with the exact requested total. Cell weight is the
/// product of origin and destination zone weights, with intra-zone cells
/// damped (short hops are less common than cross-town trips).
pub fn od_csv(spec: &BundleSpec, total: u64) -> String {
    let z = spec.zone_names.len();
    let mut weights = vec![0.0; z * z];
    for i in 0..z {
        for j in 0..z {
            let damp = if i == j { 0.4 } else { 1.0 };
            weights[i * z + j] = spec.zone_weights[i] * spec.zone_weights[j] * damp;
        }
    }
    let sum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let cells = largest_remainder(&quotas);

    let mut out = String::new();
    for name in spec.zone_names {
        let _ = write!(out, ",{name}");
    }
    out.push('\n');
    for i in 0..z {
        let _ = write!(out, "{}", spec.zone_names[i]);
        for j in 0..z {
            let _ = write!(out, ",{}", cells[i * z + j]);
        }
        out.push('\n');
    }
    out
}

pub fn config_json(spec: &BundleSpec) -> String {
    format!(
        r#"{{
  "network_file": "network.json",
  "gtfs_dir": "gtfs",
  "car_od_file": "car_od.csv",
  "bus_od_file": "bus_od.csv",
  "stop_map_file": "stop_map.csv",
  "profile": "{}",
  "service_date": "2024-06-05",
  "seed": {},
  "output_dir": "out"
}}
"#,
        spec.profile, spec.seed
    )
}

/// Write one bundle under `root/<name>/`. Existing files are overwritten.
pub fn write_bundle(root: &Path, spec: &BundleSpec) -> std::io::Result<()> {
    let dir = root.join(spec.name);
    let gtfs_dir = dir.join("gtfs");
    std::fs::create_dir_all(&gtfs_dir)?;

    std::fs::write(dir.join("network.json"), network_json(spec))?;
    std::fs::write(dir.join("car_od.csv"), od_csv(spec, spec.car_total))?;
    std::fs::write(dir.join("bus_od.csv"), od_csv(spec, spec.bus_total))?;
    std::fs::write(dir.join("config.json"), config_json(spec))?;

    let files = gtfs_files(spec, 18_000);
    std::fs::write(dir.join("stop_map.csv"), files.stop_map)?;
    std::fs::write(gtfs_dir.join("stops.txt"), files.stops)?;
    std::fs::write(gtfs_dir.join("routes.txt"), files.routes)?;
    std::fs::write(gtfs_dir.join("trips.txt"), files.trips)?;
    std::fs::write(gtfs_dir.join("stop_times.txt"), files.stop_times)?;
    std::fs::write(gtfs_dir.join("calendar.txt"), files.calendar)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use modeshift_core::demand::load_od_matrix;
    use modeshift_core::gtfs::{parse_feed, runs_in_window, Window};
    use modeshift_core::network::parse_network;

    #[test]
    fn bundle_dimensions_match_their_published_baselines() {
        let spec = mixeduse_grid();
        let graph = parse_network(&network_json(&spec)).unwrap();
        assert_eq!(graph.edges.len(), 2024);
        assert_eq!(graph.zones.len(), 9);
        let total_runs: u32 = spec.routes.iter().map(|r| r.n_runs).sum();
        assert_eq!(total_runs, 1035);

        let spec = residential_grid();
        let graph = parse_network(&network_json(&spec)).unwrap();
        assert_eq!(graph.edges.len(), 528);
        let total_runs: u32 = spec.routes.iter().map(|r| r.n_runs).sum();
        assert_eq!(total_runs, 173);
    }

    #[test]
    fn od_totals_are_exact_integers() {
        for spec in all_bundles() {
            let dir = tempfile::tempdir().unwrap();
            std::fs::write(dir.path().join("od.csv"), od_csv(&spec, spec.car_total)).unwrap();
            let od = load_od_matrix(&dir.path().join("od.csv")).unwrap();
            assert_eq!(od.total(), spec.car_total as f64, "{}", spec.name);
            for i in 0..od.len() {
                for j in 0..od.len() {
                    assert_eq!(od.get(i, j).fract(), 0.0);
                }
            }
        }
    }

    #[test]
    fn every_zone_sends_and_receives_trips() {
        for spec in all_bundles() {
            let dir = tempfile::tempdir().unwrap();
            std::fs::write(dir.path().join("od.csv"), od_csv(&spec, spec.bus_total)).unwrap();
            let od = load_od_matrix(&dir.path().join("od.csv")).unwrap();
            for i in 0..od.len() {
                let sent: f64 = (0..od.len()).map(|j| od.get(i, j)).sum();
                assert!(sent > 0.0, "{} zone {} sends nothing", spec.name, od.zones[i]);
            }
        }
    }

    #[test]
    fn feeds_parse_and_runs_fill_the_window() {
        for spec in all_bundles() {
            let dir = tempfile::tempdir().unwrap();
            write_bundle(dir.path(), &spec).unwrap();
            let date = chrono::NaiveDate::from_ymd_opt(2024, 6, 5).unwrap();
            let schedule = parse_feed(&dir.path().join(spec.name).join("gtfs"), date).unwrap();
            let window = Window { start_s: 18_000, end_s: 75_600 };
            let runs = runs_in_window(&schedule, window, None).unwrap();
            let expected: usize = spec.routes.iter().map(|r| r.n_runs as usize).sum();
            assert_eq!(runs.len(), expected, "{}", spec.name);
            // Every scheduled run starts inside the window by construction;
            // none may leak past the end.
            for route in &spec.routes {
                let last = 18_000 + route.offset_s + (route.n_runs - 1) * route.headway_s;
                assert!(last < 75_600, "{} route {} overflows", spec.name, route.short_name);
            }
        }
    }

    #[test]
    fn stops_map_onto_real_edges_in_travel_direction() {
        for spec in all_bundles() {
            let graph = parse_network(&network_json(&spec)).unwrap();
            for route in &spec.routes {
                let stops = route_stops(&spec, route);
                assert!(stops.len() >= 2, "{} route {}", spec.name, route.short_name);
                for (stop_id, edge) in &stops {
                    let idx = graph.edge_idx(edge).unwrap_or_else(|| {
                        panic!("{}: stop {stop_id} on unknown edge {edge}", spec.name)
                    });
                    let e = graph.edge(idx);
                    let dir = edge.chars().last().unwrap();
                    assert_eq!(dir, if route.eastbound { 'e' } else { 'w' });
                    assert!(e.length_m > 0.0);
                }
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = network_json(&mixeduse_grid());
        let b = network_json(&mixeduse_grid());
        assert_eq!(a, b);
        let fa = gtfs_files(&residential_grid(), 18_000);
        let fb = gtfs_files(&residential_grid(), 18_000);
        assert_eq!(fa.stop_times, fb.stop_times);
        assert_eq!(od_csv(&smoke(), 400), od_csv(&smoke(), 400));
    }
}
