//! Static GTFS ingest for bus feeds.
//!
//! Reads the standard CSV tables (`stops.txt`, `routes.txt`, `trips.txt`,
//! `stop_times.txt`, `calendar.txt`, optional `calendar_dates.txt`) and
//! resolves which runs are active on one service date. Column order is taken
//! from each file's header row, quoting is RFC 4180, and times past midnight
//! (`25:10:00`) are kept as seconds greater than 86400. Frequency-expanded
//! trips are out of scope: a `frequencies.txt` with data rows is rejected.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GtfsError {
    #[error("feed is incomplete: missing {file}")]
    FeedIncomplete { file: String },
    #[error("cannot read {file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {file}: {source}")]
    Csv {
        file: String,
        #[source]
        source: csv::Error,
    },
    #[error("{file} is missing required column {column:?}")]
    MissingColumn { file: String, column: String },
    #[error("{file} line {line}: {msg}")]
    Parse { file: String, line: u64, msg: String },
    #[error("unsupported feature: {0}")]
    Unsupported(String),
    #[error("invalid feed: {}", format_violations(.0))]
    Invalid(Vec<GtfsViolation>),
    #[error("unknown route short name {0:?}")]
    UnknownRoute(String),
    #[error("unknown stop id {0:?}")]
    UnknownStop(String),
    #[error("route {route:?} does not serve stop {stop:?}")]
    NotServed { route: String, stop: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GtfsViolationKind {
    DanglingReference,
    InvalidTimes,
    EmptyRun,
    InvalidValue,
}

#[derive(Debug, Clone)]
pub struct GtfsViolation {
    pub kind: GtfsViolationKind,
    pub subject: String,
    pub detail: String,
}

impl fmt::Display for GtfsViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.detail)
    }
}

fn format_violations(violations: &[GtfsViolation]) -> String {
    violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stop {
    pub stop_id: String,
    pub name: String,
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteDef {
    pub route_id: String,
    pub short_name: String,
    /// GTFS route_type; only bus values (3, or extended 700-799) are accepted.
    pub route_type: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopEvent {
    /// Index into `TransitSchedule::stops`.
    pub stop: u32,
    pub arrival_s: u32,
    pub departure_s: u32,
}

/// One scheduled bus run (a GTFS trip) active on the service date.
#[derive(Debug, Clone, PartialEq)]
pub struct BusRunTemplate {
    pub run_id: String,
    /// Index into `TransitSchedule::routes`.
    pub route: u32,
    pub service_id: String,
    /// In stop_sequence order; times are non-decreasing along the run.
    pub stop_events: Vec<StopEvent>,
}

impl BusRunTemplate {
    pub fn first_departure_s(&self) -> u32 {
        self.stop_events[0].departure_s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitSchedule {
    pub service_date: NaiveDate,
    pub stops: Vec<Stop>,
    pub routes: Vec<RouteDef>,
    /// Sorted by run id; only runs whose service is active on `service_date`.
    pub runs: Vec<BusRunTemplate>,
    stop_index: HashMap<String, u32>,
    /// Route short names may be shared by several route ids.
    short_name_index: HashMap<String, Vec<u32>>,
}

impl TransitSchedule {
    pub fn stop_idx(&self, stop_id: &str) -> Option<u32> {
        self.stop_index.get(stop_id).copied()
    }

    pub fn stop(&self, idx: u32) -> &Stop {
        &self.stops[idx as usize]
    }

    pub fn routes_named(&self, short_name: &str) -> Option<&[u32]> {
        self.short_name_index.get(short_name).map(|v| v.as_slice())
    }

    /// Assemble a schedule directly from parts, bypassing feed files. Meant
    /// for programmatic construction (generators, tests); indices must be in
    /// range and runs non-empty with non-decreasing times.
    ///
    /// # Panics
    /// On out-of-range stop/route indices or an empty run.
    pub fn build(
        service_date: NaiveDate,
        stops: Vec<Stop>,
        routes: Vec<RouteDef>,
        mut runs: Vec<BusRunTemplate>,
    ) -> TransitSchedule {
        for run in &runs {
            assert!(!run.stop_events.is_empty(), "run {} has no stops", run.run_id);
            assert!((run.route as usize) < routes.len(), "run {} route index", run.run_id);
            for ev in &run.stop_events {
                assert!((ev.stop as usize) < stops.len(), "run {} stop index", run.run_id);
                assert!(ev.arrival_s <= ev.departure_s, "run {} times", run.run_id);
            }
        }
        runs.sort_by(|a, b| a.run_id.cmp(&b.run_id));
        let stop_index = stops
            .iter()
            .enumerate()
            .map(|(i, s)| (s.stop_id.clone(), i as u32))
            .collect();
        let mut short_name_index: HashMap<String, Vec<u32>> = HashMap::new();
        for (i, r) in routes.iter().enumerate() {
            short_name_index.entry(r.short_name.clone()).or_default().push(i as u32);
        }
        TransitSchedule { service_date, stops, routes, runs, stop_index, short_name_index }
    }
}

/// Half-open time-of-day window `[start_s, end_s)` in seconds since midnight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start_s: u32,
    pub end_s: u32,
}

impl Window {
    pub fn contains(&self, t: u32) -> bool {
        self.start_s <= t && t < self.end_s
    }
}

/// Parse `HH:MM:SS`; hours may exceed 24 for after-midnight times.
pub fn parse_gtfs_time(text: &str) -> Result<u32, String> {
    let parts: Vec<&str> = text.trim().split(':').collect();
    if parts.len() != 3 {
        return Err(format!("bad time {text:?}, expected HH:MM:SS"));
    }
    let num = |s: &str, what: &str| -> Result<u32, String> {
        if s.is_empty() || s.len() > 3 || !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(format!("bad {what} in time {text:?}"));
        }
        Ok(s.parse().unwrap())
    };
    let h = num(parts[0], "hour")?;
    let m = num(parts[1], "minute")?;
    let s = num(parts[2], "second")?;
    if m >= 60 || s >= 60 {
        return Err(format!("bad time {text:?}: minute/second out of range"));
    }
    Ok(h * 3600 + m * 60 + s)
}

struct Table {
    file: String,
    headers: Vec<String>,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl Table {
    fn col(&self, name: &str) -> Result<usize, GtfsError> {
        self.headers.iter().position(|h| h == name).ok_or_else(|| GtfsError::MissingColumn {
            file: self.file.clone(),
            column: name.to_string(),
        })
    }

    fn get<'a>(&self, row: &'a csv::StringRecord, col: usize) -> &'a str {
        row.get(col).unwrap_or("").trim()
    }
}

fn read_table(dir: &Path, file: &str, required: bool) -> Result<Option<Table>, GtfsError> {
    let path = dir.join(file);
    if !path.exists() {
        if required {
            return Err(GtfsError::FeedIncomplete { file: file.to_string() });
        }
        return Ok(None);
    }
    let text = std::fs::read_to_string(&path).map_err(|source| GtfsError::Io {
        file: file.to_string(),
        source,
    })?;
    // Tolerate a UTF-8 BOM in front of the header row.
    let text = text.strip_prefix('\u{feff}').unwrap_or(&text);
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|source| GtfsError::Csv { file: file.to_string(), source })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|source| GtfsError::Csv { file: file.to_string(), source })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        rows.push((line, record));
    }
    Ok(Some(Table { file: file.to_string(), headers, rows }))
}

struct CalendarEntry {
    weekdays: [bool; 7],
    start: NaiveDate,
    end: NaiveDate,
}

fn weekday_index(day: Weekday) -> usize {
    // calendar.txt column order: monday..sunday
    day.num_days_from_monday() as usize
}

/// Parse a GTFS directory and resolve the runs active on `service_date`.
pub fn parse_feed(dir: &Path, service_date: NaiveDate) -> Result<TransitSchedule, GtfsError> {
    if !dir.is_dir() {
        return Err(GtfsError::FeedIncomplete { file: dir.display().to_string() });
    }

    // Reject frequency-expanded feeds up front.
    if let Some(freq) = read_table(dir, "frequencies.txt", false)? {
        if !freq.rows.is_empty() {
            return Err(GtfsError::Unsupported(
                "frequencies-based trips (frequencies.txt has data rows)".into(),
            ));
        }
    }

    let stops_t = read_table(dir, "stops.txt", true)?.unwrap();
    let routes_t = read_table(dir, "routes.txt", true)?.unwrap();
    let trips_t = read_table(dir, "trips.txt", true)?.unwrap();
    let stop_times_t = read_table(dir, "stop_times.txt", true)?.unwrap();
    let calendar_t = read_table(dir, "calendar.txt", true)?.unwrap();
    let calendar_dates_t = read_table(dir, "calendar_dates.txt", false)?;

    let mut violations: Vec<GtfsViolation> = Vec::new();

    // stops.txt
    let (c_sid, c_sname, c_slat, c_slon) = (
        stops_t.col("stop_id")?,
        stops_t.col("stop_name")?,
        stops_t.col("stop_lat")?,
        stops_t.col("stop_lon")?,
    );
    let mut stops = Vec::new();
    let mut stop_index = HashMap::new();
    for (line, row) in &stops_t.rows {
        let id = stops_t.get(row, c_sid).to_string();
        let parse_coord = |s: &str, what: &str| -> Result<f64, GtfsError> {
            s.parse::<f64>().map_err(|_| GtfsError::Parse {
                file: stops_t.file.clone(),
                line: *line,
                msg: format!("bad {what} {s:?}"),
            })
        };
        let lat = parse_coord(stops_t.get(row, c_slat), "stop_lat")?;
        let lon = parse_coord(stops_t.get(row, c_slon), "stop_lon")?;
        if !lat.is_finite() || !lon.is_finite() || lat.abs() > 90.0 || lon.abs() > 180.0 {
            violations.push(GtfsViolation {
                kind: GtfsViolationKind::InvalidValue,
                subject: id.clone(),
                detail: format!("stop coordinates out of range ({lat}, {lon})"),
            });
        }
        if stop_index.insert(id.clone(), stops.len() as u32).is_some() {
            violations.push(GtfsViolation {
                kind: GtfsViolationKind::InvalidValue,
                subject: id.clone(),
                detail: "duplicate stop_id".into(),
            });
        }
        stops.push(Stop { stop_id: id, name: stops_t.get(row, c_sname).to_string(), lat, lon });
    }

    // routes.txt — bus only.
    let (c_rid, c_rshort, c_rtype) = (
        routes_t.col("route_id")?,
        routes_t.col("route_short_name")?,
        routes_t.col("route_type")?,
    );
    let mut routes = Vec::new();
    let mut route_index: HashMap<String, u32> = HashMap::new();
    for (line, row) in &routes_t.rows {
        let id = routes_t.get(row, c_rid).to_string();
        let rtype: u32 = routes_t.get(row, c_rtype).parse().map_err(|_| GtfsError::Parse {
            file: routes_t.file.clone(),
            line: *line,
            msg: format!("bad route_type {:?}", routes_t.get(row, c_rtype)),
        })?;
        let is_bus = rtype == 3 || (700..=799).contains(&rtype);
        if !is_bus {
            return Err(GtfsError::Unsupported(format!(
                "route {id:?} has route_type {rtype}; only bus routes are supported"
            )));
        }
        if route_index.insert(id.clone(), routes.len() as u32).is_some() {
            violations.push(GtfsViolation {
                kind: GtfsViolationKind::InvalidValue,
                subject: id.clone(),
                detail: "duplicate route_id".into(),
            });
        }
        routes.push(RouteDef {
            route_id: id,
            short_name: routes_t.get(row, c_rshort).to_string(),
            route_type: rtype,
        });
    }

    // calendar.txt
    let c_cal_sid = calendar_t.col("service_id")?;
    let day_cols: Vec<usize> = ["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"]
        .iter()
        .map(|d| calendar_t.col(d))
        .collect::<Result<_, _>>()?;
    let (c_start, c_end) = (calendar_t.col("start_date")?, calendar_t.col("end_date")?);
    let parse_date = |file: &str, line: u64, s: &str| -> Result<NaiveDate, GtfsError> {
        NaiveDate::parse_from_str(s, "%Y%m%d").map_err(|_| GtfsError::Parse {
            file: file.to_string(),
            line,
            msg: format!("bad date {s:?}, expected YYYYMMDD"),
        })
    };
    let mut calendar: HashMap<String, CalendarEntry> = HashMap::new();
    for (line, row) in &calendar_t.rows {
        let sid = calendar_t.get(row, c_cal_sid).to_string();
        let mut weekdays = [false; 7];
        for (i, &col) in day_cols.iter().enumerate() {
            weekdays[i] = match calendar_t.get(row, col) {
                "0" => false,
                "1" => true,
                other => {
                    return Err(GtfsError::Parse {
                        file: calendar_t.file.clone(),
                        line: *line,
                        msg: format!("bad weekday flag {other:?}"),
                    })
                }
            };
        }
        let start = parse_date(&calendar_t.file, *line, calendar_t.get(row, c_start))?;
        let end = parse_date(&calendar_t.file, *line, calendar_t.get(row, c_end))?;
        calendar.insert(sid, CalendarEntry { weekdays, start, end });
    }

    // calendar_dates.txt (exceptions)
    let mut added: HashSet<String> = HashSet::new();
    let mut removed: HashSet<String> = HashSet::new();
    let mut exception_services: HashSet<String> = HashSet::new();
    if let Some(t) = &calendar_dates_t {
        let (c_sid, c_date, c_ex) =
            (t.col("service_id")?, t.col("date")?, t.col("exception_type")?);
        for (line, row) in &t.rows {
            let sid = t.get(row, c_sid).to_string();
            exception_services.insert(sid.clone());
            let date = parse_date(&t.file, *line, t.get(row, c_date))?;
            if date != service_date {
                continue;
            }
            match t.get(row, c_ex) {
                "1" => {
                    added.insert(sid);
                }
                "2" => {
                    removed.insert(sid);
                }
                other => {
                    return Err(GtfsError::Parse {
                        file: t.file.clone(),
                        line: *line,
                        msg: format!("bad exception_type {other:?}"),
                    })
                }
            }
        }
    }

    let service_active = |sid: &str| -> bool {
        if removed.contains(sid) {
            return false;
        }
        if added.contains(sid) {
            return true;
        }
        match calendar.get(sid) {
            Some(c) => {
                c.start <= service_date
                    && service_date <= c.end
                    && c.weekdays[weekday_index(service_date.weekday())]
            }
            None => false,
        }
    };

    // trips.txt
    let (c_t_rid, c_t_sid, c_t_tid) =
        (trips_t.col("route_id")?, trips_t.col("service_id")?, trips_t.col("trip_id")?);
    struct TripRow {
        route: u32,
        service_id: String,
    }
    let mut trip_rows: HashMap<String, TripRow> = HashMap::new();
    let mut trip_active: HashMap<String, bool> = HashMap::new();
    for (_line, row) in &trips_t.rows {
        let trip_id = trips_t.get(row, c_t_tid).to_string();
        let route_id = trips_t.get(row, c_t_rid);
        let service_id = trips_t.get(row, c_t_sid).to_string();
        let Some(&route) = route_index.get(route_id) else {
            violations.push(GtfsViolation {
                kind: GtfsViolationKind::DanglingReference,
                subject: route_id.to_string(),
                detail: format!("trip {trip_id:?} references undefined route {route_id:?}"),
            });
            continue;
        };
        if !calendar.contains_key(&service_id) && !exception_services.contains(&service_id) {
            violations.push(GtfsViolation {
                kind: GtfsViolationKind::DanglingReference,
                subject: service_id.clone(),
                detail: format!("trip {trip_id:?} references undefined service {service_id:?}"),
            });
            continue;
        }
        if trip_rows.contains_key(&trip_id) {
            violations.push(GtfsViolation {
                kind: GtfsViolationKind::InvalidValue,
                subject: trip_id.clone(),
                detail: "duplicate trip_id".into(),
            });
            continue;
        }
        trip_active.insert(trip_id.clone(), service_active(&service_id));
        trip_rows.insert(trip_id, TripRow { route, service_id });
    }

    // stop_times.txt
    let (c_st_tid, c_st_arr, c_st_dep, c_st_stop, c_st_seq) = (
        stop_times_t.col("trip_id")?,
        stop_times_t.col("arrival_time")?,
        stop_times_t.col("departure_time")?,
        stop_times_t.col("stop_id")?,
        stop_times_t.col("stop_sequence")?,
    );
    let mut events: HashMap<String, Vec<(u32, StopEvent)>> = HashMap::new();
    for (line, row) in &stop_times_t.rows {
        let trip_id = stop_times_t.get(row, c_st_tid);
        let stop_id = stop_times_t.get(row, c_st_stop);
        if !trip_rows.contains_key(trip_id) {
            // Either a dangling trip reference or a trip already rejected above;
            // only flag the former.
            if !trip_active.contains_key(trip_id) && !violation_mentions(&violations, trip_id) {
                violations.push(GtfsViolation {
                    kind: GtfsViolationKind::DanglingReference,
                    subject: trip_id.to_string(),
                    detail: format!("stop_times row references undefined trip {trip_id:?}"),
                });
            }
            continue;
        }
        let Some(&stop) = stop_index.get(stop_id) else {
            violations.push(GtfsViolation {
                kind: GtfsViolationKind::DanglingReference,
                subject: stop_id.to_string(),
                detail: format!("stop_times row references undefined stop {stop_id:?}"),
            });
            continue;
        };
        let seq: u32 =
            stop_times_t.get(row, c_st_seq).parse().map_err(|_| GtfsError::Parse {
                file: stop_times_t.file.clone(),
                line: *line,
                msg: format!("bad stop_sequence {:?}", stop_times_t.get(row, c_st_seq)),
            })?;
        let time = |col: usize, what: &str| -> Result<u32, GtfsError> {
            parse_gtfs_time(stop_times_t.get(row, col)).map_err(|msg| GtfsError::Parse {
                file: stop_times_t.file.clone(),
                line: *line,
                msg: format!("{what}: {msg}"),
            })
        };
        let arrival_s = time(c_st_arr, "arrival_time")?;
        let departure_s = time(c_st_dep, "departure_time")?;
        events
            .entry(trip_id.to_string())
            .or_default()
            .push((seq, StopEvent { stop, arrival_s, departure_s }));
    }

    // Assemble active runs, checking time ordering per run.
    let mut runs = Vec::new();
    for (trip_id, trip) in &trip_rows {
        if !trip_active[trip_id] {
            continue;
        }
        let Some(mut evs) = events.remove(trip_id) else {
            violations.push(GtfsViolation {
                kind: GtfsViolationKind::EmptyRun,
                subject: trip_id.clone(),
                detail: "trip has no stop_times rows".into(),
            });
            continue;
        };
        evs.sort_by_key(|(seq, _)| *seq);
        let mut ok = true;
        for window in evs.windows(2) {
            if window[0].0 == window[1].0 {
                violations.push(GtfsViolation {
                    kind: GtfsViolationKind::InvalidValue,
                    subject: trip_id.clone(),
                    detail: format!("duplicate stop_sequence {}", window[0].0),
                });
                ok = false;
            }
        }
        let stop_events: Vec<StopEvent> = evs.into_iter().map(|(_, e)| e).collect();
        let mut prev_dep: Option<u32> = None;
        for e in &stop_events {
            if e.arrival_s > e.departure_s {
                violations.push(GtfsViolation {
                    kind: GtfsViolationKind::InvalidTimes,
                    subject: trip_id.clone(),
                    detail: format!("arrival {} after departure {}", e.arrival_s, e.departure_s),
                });
                ok = false;
                break;
            }
            if let Some(p) = prev_dep {
                if e.arrival_s < p {
                    violations.push(GtfsViolation {
                        kind: GtfsViolationKind::InvalidTimes,
                        subject: trip_id.clone(),
                        detail: format!("times go backwards ({} then {})", p, e.arrival_s),
                    });
                    ok = false;
                    break;
                }
            }
            prev_dep = Some(e.departure_s);
        }
        if ok {
            runs.push(BusRunTemplate {
                run_id: trip_id.clone(),
                route: trip.route,
                service_id: trip.service_id.clone(),
                stop_events,
            });
        }
    }

    if !violations.is_empty() {
        // Deterministic report order regardless of hash-map iteration.
        violations.sort_by(|a, b| (a.subject.as_str(), a.detail.as_str())
            .cmp(&(b.subject.as_str(), b.detail.as_str())));
        return Err(GtfsError::Invalid(violations));
    }

    runs.sort_by(|a, b| a.run_id.cmp(&b.run_id));

    let mut short_name_index: HashMap<String, Vec<u32>> = HashMap::new();
    for (i, r) in routes.iter().enumerate() {
        short_name_index.entry(r.short_name.clone()).or_default().push(i as u32);
    }

    Ok(TransitSchedule { service_date, stops, routes, runs, stop_index, short_name_index })
}

fn violation_mentions(violations: &[GtfsViolation], subject: &str) -> bool {
    violations.iter().any(|v| v.subject == subject)
}

/// Runs whose *first departure* falls in `[window.start_s, window.end_s)`,
/// optionally restricted to a set of route short names.
pub fn runs_in_window<'a>(
    schedule: &'a TransitSchedule,
    window: Window,
    route_filter: Option<&BTreeSet<String>>,
) -> Result<Vec<&'a BusRunTemplate>, GtfsError> {
    let allowed: Option<HashSet<u32>> = match route_filter {
        None => None,
        Some(names) => {
            let mut set = HashSet::new();
            for name in names {
                let routes = schedule
                    .routes_named(name)
                    .ok_or_else(|| GtfsError::UnknownRoute(name.clone()))?;
                set.extend(routes.iter().copied());
            }
            Some(set)
        }
    };
    Ok(schedule
        .runs
        .iter()
        .filter(|run| window.contains(run.first_departure_s()))
        .filter(|run| allowed.as_ref().is_none_or(|set| set.contains(&run.route)))
        .collect())
}

/// Inter-departure gaps (seconds, ascending) for one route at one stop.
///
/// All departures of the route's runs at the stop are collected, sorted, and
/// differenced; the gap list is then sorted. A stop with a single departure
/// has no gaps and yields an empty vector.
pub fn headways(
    schedule: &TransitSchedule,
    route_short_name: &str,
    stop_id: &str,
) -> Result<Vec<u32>, GtfsError> {
    let routes = schedule
        .routes_named(route_short_name)
        .ok_or_else(|| GtfsError::UnknownRoute(route_short_name.to_string()))?;
    let routes: HashSet<u32> = routes.iter().copied().collect();
    let stop = schedule
        .stop_idx(stop_id)
        .ok_or_else(|| GtfsError::UnknownStop(stop_id.to_string()))?;

    let mut departures: Vec<u32> = schedule
        .runs
        .iter()
        .filter(|run| routes.contains(&run.route))
        .flat_map(|run| run.stop_events.iter())
        .filter(|e| e.stop == stop)
        .map(|e| e.departure_s)
        .collect();
    if departures.is_empty() {
        return Err(GtfsError::NotServed {
            route: route_short_name.to_string(),
            stop: stop_id.to_string(),
        });
    }
    departures.sort_unstable();
    let mut gaps: Vec<u32> = departures.windows(2).map(|w| w[1] - w[0]).collect();
    gaps.sort_unstable();
    Ok(gaps)
}
