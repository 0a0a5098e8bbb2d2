//! OD demand calibration and seeded trip synthesis.
//!
//! Demand comes in as a square origin-destination matrix of fractional
//! trips/day between zones. `calibrate_total` rescales it to a target daily
//! total; `generate_trips` turns it into an integer trip table:
//!
//! * per-cell integer counts by largest-remainder apportionment, so the table
//!   total equals `round(sum(od))` exactly;
//! * departure times stratified over the 96 quarter-hour bins of a
//!   [`TemporalProfile`] (largest-remainder bin quotas, seeded shuffle, uniform
//!   placement within the bin), which keeps the realised histogram within
//!   `96/n` of the profile in L1 — tight enough that profile shape, not
//!   sampling noise, decides what the day looks like;
//! * origin and destination edges drawn uniformly from each zone's edge set.
//!
//! Everything is a pure function of `(od, profile, graph, mode, seed)`.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use thiserror::Error;

use crate::network::NetworkGraph;
use crate::rng::SeededRng;

pub const BINS_PER_DAY: usize = 96;
pub const BIN_SECONDS: f64 = 900.0;
pub const DAY_SECONDS: f64 = 86400.0;

#[derive(Debug, Error)]
pub enum DemandError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{file} line {line}: {msg}")]
    Format { file: String, line: u64, msg: String },
    #[error("OD matrix is degenerate: total is zero but target is {target}")]
    DegenerateDemand { target: f64 },
    #[error("calibration target must be finite and non-negative, got {0}")]
    BadTarget(f64),
    #[error("OD matrix is invalid: {0}")]
    BadMatrix(String),
    #[error("unknown built-in profile {0:?}")]
    UnknownProfile(String),
    #[error("invalid temporal profile: {0}")]
    BadProfile(String),
    #[error("OD zone {0:?} does not exist in the network")]
    UnknownZone(String),
    #[error("zone {0:?} has demand but an empty edge set")]
    EmptyZone(String),
}

/// Square OD matrix over an ordered zone list; cell `(i, j)` holds fractional
/// trips/day from zone `i` to zone `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ODMatrix {
    pub zones: Vec<String>,
    /// Row-major, `zones.len() * zones.len()` cells.
    values: Vec<f64>,
}

impl ODMatrix {
    pub fn new(zones: Vec<String>, values: Vec<f64>) -> Result<Self, DemandError> {
        let n = zones.len();
        if values.len() != n * n {
            return Err(DemandError::BadMatrix(format!(
                "{} zones need {} cells, got {}",
                n,
                n * n,
                values.len()
            )));
        }
        let mut seen = HashSet::new();
        for z in &zones {
            if !seen.insert(z.as_str()) {
                return Err(DemandError::BadMatrix(format!("duplicate zone id {z:?}")));
            }
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() || *v < 0.0 {
                return Err(DemandError::BadMatrix(format!(
                    "cell ({}, {}) is {v}, want finite and non-negative",
                    i / n,
                    i % n
                )));
            }
        }
        Ok(Self { zones, values })
    }

    pub fn len(&self) -> usize {
        self.zones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zones.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.zones.len() + j]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Check that every zone id resolves in the graph.
    pub fn validate_zones(&self, graph: &NetworkGraph) -> Result<(), DemandError> {
        for z in &self.zones {
            if graph.zone_idx(z).is_none() {
                return Err(DemandError::UnknownZone(z.clone()));
            }
        }
        Ok(())
    }
}

/// Uniformly rescale the matrix so its total equals `target_total`.
/// Relative cell proportions are preserved exactly (one shared factor).
pub fn calibrate_total(od: &ODMatrix, target_total: f64) -> Result<ODMatrix, DemandError> {
    if !target_total.is_finite() || target_total < 0.0 {
        return Err(DemandError::BadTarget(target_total));
    }
    let total = od.total();
    if total == 0.0 {
        if target_total > 0.0 {
            return Err(DemandError::DegenerateDemand { target: target_total });
        }
        return Ok(od.clone());
    }
    let factor = target_total / total;
    let values = od.values.iter().map(|v| v * factor).collect();
    Ok(ODMatrix { zones: od.zones.clone(), values })
}

/// Load an OD matrix CSV: header row `,z1,z2,...`, then one row per origin
/// zone with the same ids in the same order.
pub fn load_od_matrix(path: &Path) -> Result<ODMatrix, DemandError> {
    let file = path.display().to_string();
    let text = std::fs::read_to_string(path)
        .map_err(|source| DemandError::Io { path: file.clone(), source })?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| DemandError::Format { file: file.clone(), line: 1, msg: e.to_string() })?
        .clone();
    let zones: Vec<String> = headers.iter().skip(1).map(|h| h.trim().to_string()).collect();
    let n = zones.len();
    let mut values = Vec::with_capacity(n * n);
    let mut row_ids = Vec::new();
    for record in reader.records() {
        let record =
            record.map_err(|e| DemandError::Format { file: file.clone(), line: 0, msg: e.to_string() })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        if record.len() != n + 1 {
            return Err(DemandError::Format {
                file,
                line,
                msg: format!("expected {} fields, got {}", n + 1, record.len()),
            });
        }
        row_ids.push(record.get(0).unwrap_or("").trim().to_string());
        for field in record.iter().skip(1) {
            let v: f64 = field.trim().parse().map_err(|_| DemandError::Format {
                file: file.clone(),
                line,
                msg: format!("bad cell value {field:?}"),
            })?;
            values.push(v);
        }
    }
    if row_ids != zones {
        return Err(DemandError::BadMatrix(format!(
            "row zone ids {row_ids:?} do not match header zone ids {zones:?}"
        )));
    }
    ODMatrix::new(zones, values)
}

/// Daily departure-time profile over 96 quarter-hour bins; weights sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalProfile {
    weights: Vec<f64>,
}

impl TemporalProfile {
    pub fn new(weights: Vec<f64>) -> Result<Self, DemandError> {
        if weights.len() != BINS_PER_DAY {
            return Err(DemandError::BadProfile(format!(
                "expected {} weights, got {}",
                BINS_PER_DAY,
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(DemandError::BadProfile(format!("weight {w} is not a finite non-negative number")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(DemandError::BadProfile(format!("weights sum to {sum}, want 1 within 1e-9")));
        }
        Ok(Self { weights })
    }

    fn normalized(raw: Vec<f64>) -> Self {
        let sum: f64 = raw.iter().sum();
        Self { weights: raw.into_iter().map(|w| w / sum).collect() }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight_at(&self, seconds: f64) -> f64 {
        self.weights[((seconds / BIN_SECONDS) as usize).min(BINS_PER_DAY - 1)]
    }
}

/// Names accepted by [`builtin_profile`].
pub const BUILTIN_PROFILES: [&str; 3] = ["uniform", "mixed_use", "residential_bimodal"];

pub fn builtin_profile(name: &str) -> Result<TemporalProfile, DemandError> {
    let bin_center = |b: usize| b as f64 * BIN_SECONDS + BIN_SECONDS / 2.0;
    match name {
        "uniform" => Ok(TemporalProfile::normalized(vec![1.0; BINS_PER_DAY])),
        "mixed_use" => {
            // Broad flat plateau over the 07:00-19:00 business day with short
            // shoulders and a thin overnight floor.
            let mut w = vec![0.0; BINS_PER_DAY];
            for (b, slot) in w.iter_mut().enumerate() {
                let h = bin_center(b) / 3600.0;
                *slot = if (7.0..19.0).contains(&h) {
                    1.0
                } else if (5.0..7.0).contains(&h) {
                    0.08 + 0.92 * (h - 5.0) / 2.0
                } else if (19.0..22.0).contains(&h) {
                    1.0 - 0.92 * (h - 19.0) / 3.0
                } else {
                    0.08
                };
            }
            // Pin the plateau bins to one exact value: the in-plateau max/min
            // ratio is what downstream flatness checks lean on.
            Ok(TemporalProfile::normalized(w))
        }
        "residential_bimodal" => {
            // Commuter shape: morning peak at 07:30, evening peak at 17:00,
            // quiet midday. Gaussian bumps, sigma = 45 min.
            let sigma = 2700.0;
            let bump = |t: f64, center: f64| {
                let d = (t - center) / sigma;
                (-0.5 * d * d).exp()
            };
            let mut w = vec![0.0; BINS_PER_DAY];
            for (b, slot) in w.iter_mut().enumerate() {
                let t = bin_center(b);
                *slot = 0.08 + 0.7 * bump(t, 27000.0) + 0.7 * bump(t, 61200.0);
            }
            Ok(TemporalProfile::normalized(w))
        }
        other => Err(DemandError::UnknownProfile(other.to_string())),
    }
}

/// Load a profile CSV: 96 rows of `bin_start_s,weight` in bin order.
pub fn load_profile(path: &Path) -> Result<TemporalProfile, DemandError> {
    let file = path.display().to_string();
    let text = std::fs::read_to_string(path)
        .map_err(|source| DemandError::Io { path: file.clone(), source })?;
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let mut weights = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| DemandError::Format { file: file.clone(), line: 0, msg: e.to_string() })?;
        let expected_start = i as f64 * BIN_SECONDS;
        let start: f64 = record.get(0).unwrap_or("").trim().parse().map_err(|_| {
            DemandError::BadProfile(format!("bad bin_start_s {:?}", record.get(0)))
        })?;
        if start != expected_start {
            return Err(DemandError::BadProfile(format!(
                "row {} has bin_start_s {start}, expected {expected_start}",
                i + 1
            )));
        }
        let w: f64 = record
            .get(1)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| DemandError::BadProfile(format!("bad weight {:?}", record.get(1))))?;
        weights.push(w);
    }
    TemporalProfile::new(weights)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Car,
    BusPassenger,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Car => "car",
            Mode::BusPassenger => "bus_passenger",
        }
    }

    fn id_prefix(&self) -> &'static str {
        match self {
            Mode::Car => "car",
            Mode::BusPassenger => "pax",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trip {
    pub trip_id: String,
    pub mode: Mode,
    /// Seconds since midnight, in `[0, 86400)`.
    pub depart_s: f64,
    pub origin_edge: String,
    pub dest_edge: String,
    pub origin_zone: String,
    pub dest_zone: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TripTable {
    pub trips: Vec<Trip>,
}

impl TripTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trip_id,mode,depart_s,origin_edge,dest_edge,origin_zone,dest_zone\n");
        for t in &self.trips {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                t.trip_id, t.mode, t.depart_s, t.origin_edge, t.dest_edge, t.origin_zone, t.dest_zone
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_csv())
    }
}

/// Largest-remainder apportionment: integer counts whose sum is
/// `round(sum(quotas))`. Ties on the fractional remainder break by index.
pub fn largest_remainder(quotas: &[f64]) -> Vec<u64> {
    let total: f64 = quotas.iter().sum();
    let target = total.round() as i64;
    let mut counts: Vec<u64> = quotas.iter().map(|q| q.floor() as u64).collect();
    let assigned: i64 = counts.iter().map(|&c| c as i64).sum();
    let mut leftover = (target - assigned).max(0) as usize;
    if leftover == 0 {
        return counts;
    }
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in &order {
        if leftover == 0 {
            break;
        }
        counts[i] += 1;
        leftover -= 1;
    }
    counts
}

/// Assign a departure bin to each of `n` trips so the realised bin histogram
/// matches the profile up to integer rounding, then shuffle so cell order and
/// time of day stay independent.
fn departure_bins(n: u64, profile: &TemporalProfile, rng: &mut SeededRng) -> Vec<u16> {
    let quotas: Vec<f64> = profile.weights().iter().map(|w| w * n as f64).collect();
    let per_bin = largest_remainder(&quotas);
    let mut bins: Vec<u16> = Vec::with_capacity(n as usize);
    for (b, &count) in per_bin.iter().enumerate() {
        for _ in 0..count {
            bins.push(b as u16);
        }
    }
    // Rounding of the quota total can in principle differ from n by one trip;
    // keep the vector length exact either way.
    while (bins.len() as u64) < n {
        bins.push((BINS_PER_DAY - 1) as u16);
    }
    bins.truncate(n as usize);
    rng.shuffle(&mut bins);
    bins
}

/// Expand a calibrated OD matrix into a seeded trip table.
pub fn generate_trips(
    od: &ODMatrix,
    profile: &TemporalProfile,
    graph: &NetworkGraph,
    mode: Mode,
    seed: u64,
) -> Result<TripTable, DemandError> {
    od.validate_zones(graph)?;

    let n_zones = od.len();
    let quotas: Vec<f64> = (0..n_zones * n_zones).map(|i| od.values[i]).collect();
    let counts = largest_remainder(&quotas);
    let total: u64 = counts.iter().sum();

    // Zones actually sending or receiving trips must have edges to draw from.
    for (idx, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        for z in [idx / n_zones, idx % n_zones] {
            let zone = graph.zone(graph.zone_idx(&od.zones[z]).unwrap());
            if zone.edges.is_empty() {
                return Err(DemandError::EmptyZone(od.zones[z].clone()));
            }
        }
    }

    let mut rng = SeededRng::new(seed);
    let mut bin_rng = rng.fork("departure-bins");
    let mut trip_rng = rng.fork("trip-draws");
    let bins = departure_bins(total, profile, &mut bin_rng);

    let mut trips = Vec::with_capacity(total as usize);
    let mut k = 0usize;
    for i in 0..n_zones {
        for j in 0..n_zones {
            let count = counts[i * n_zones + j];
            if count == 0 {
                continue;
            }
            let origin_zone = graph.zone(graph.zone_idx(&od.zones[i]).unwrap());
            let dest_zone = graph.zone(graph.zone_idx(&od.zones[j]).unwrap());
            for _ in 0..count {
                let bin = bins[k] as f64;
                let depart_s =
                    (bin * BIN_SECONDS + trip_rng.uniform() * BIN_SECONDS).min(DAY_SECONDS - 1e-6);
                let o = origin_zone.edges[trip_rng.index(origin_zone.edges.len())];
                let d = dest_zone.edges[trip_rng.index(dest_zone.edges.len())];
                trips.push(Trip {
                    trip_id: format!("{}_{:06}", mode.id_prefix(), k),
                    mode,
                    depart_s,
                    origin_edge: graph.edge(o).id.clone(),
                    dest_edge: graph.edge(d).id.clone(),
                    origin_zone: od.zones[i].clone(),
                    dest_zone: od.zones[j].clone(),
                });
                k += 1;
            }
        }
    }
    Ok(TripTable { trips })
}
