//! Command implementations. Each returns the lines it wants printed; `main`
//! handles exit codes. `run_pipeline` builds everything in a staging
//! directory and renames it into place only on success, so a failed run
//! leaves no partial outputs behind.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use modeshift_core::demand::{generate_trips, load_od_matrix, Mode, TripTable};
use modeshift_core::emissions::{
    aggregate, build_series, compare, integrate, ComparisonReport, DailySeries,
};
use modeshift_core::gtfs::{parse_feed, runs_in_window};
use modeshift_core::rng::SeededRng;
use modeshift_core::scenario::{
    apply_scenario, derive_baseline, scenario_table_csv, scenario_table_json, BaselineStats,
    ScenarioResult,
};
use modeshift_core::sim::{apply_modeshift_to_trips, run_day, SimOutput};

use crate::config::{check_inputs, load_inputs, LoadedInputs, PipelineConfig};
use crate::manifest::{digest_file, RunManifest, StageClock};
use crate::{chart, CliError};

/// Per-stage sub-seed, derived from a fresh root so the value does not depend
/// on which other stages ran first. Commands that share a stage label (e.g.
/// `gen-demand` and the pipeline's demand stage) therefore agree exactly.
pub fn stage_seed(seed: u64, label: &str) -> u64 {
    SeededRng::new(seed).fork(label).next_u64()
}

/// Directory name for the i-th scenario: `s1_2x`, `s2_50pct`, ...
pub fn scenario_dir(index: usize, label: &str) -> String {
    let mut name = format!("s{}_", index + 1);
    for c in label.chars() {
        match c {
            '%' => name.push_str("pct"),
            c if c.is_ascii_alphanumeric() => name.push(c.to_ascii_lowercase()),
            _ => name.push('_'),
        }
    }
    name
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::runtime("write", format!("{}: {e}", path.display())))
}

fn make_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path)
        .map_err(|e| CliError::runtime("write", format!("{}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// validate

pub fn cmd_validate(config_path: &Path) -> Result<Vec<String>, CliError> {
    let config = PipelineConfig::load(config_path)?;
    let (inputs, diags) = check_inputs(&config);
    match inputs {
        Some(inputs) => Ok(vec![format!(
            "ok: {} edges, {} zones, {} stops, {} runs on {}, car demand {:.0}, bus demand {:.0}",
            inputs.graph.edges.len(),
            inputs.graph.zones.len(),
            inputs.schedule.stops.len(),
            inputs.schedule.runs.len(),
            config.service_date,
            inputs.car_od.total(),
            inputs.bus_od.total(),
        )]),
        None => Err(CliError::Validation(diags)),
    }
}

// ---------------------------------------------------------------------------
// scenario-table

/// Baseline counts from the demand inputs: bus passengers and car trips are
/// the OD totals, runs are the schedule runs starting inside the window.
/// Deliberately loads neither the road network nor the emission settings, so
/// the table is invariant to both.
fn baseline_from_config(config: &PipelineConfig) -> Result<BaselineStats, CliError> {
    if let Some(counts) = &config.baseline {
        return derive_baseline(counts.p0, counts.b0, counts.c0, &config.fleet)
            .map_err(|e| CliError::runtime("baseline", e));
    }
    let mut diags = Vec::new();
    let bus_od = load_od_matrix(&config.resolve(&config.bus_od_file))
        .map_err(|e| diags.push(format!("bus OD: {e}")))
        .ok();
    let car_od = load_od_matrix(&config.resolve(&config.car_od_file))
        .map_err(|e| diags.push(format!("car OD: {e}")))
        .ok();
    let runs = match config.service_date() {
        Ok(date) => parse_feed(&config.resolve(&config.gtfs_dir), date)
            .map_err(|e| diags.push(format!("gtfs: {e}")))
            .ok()
            .and_then(|schedule| {
                runs_in_window(&schedule, config.sim.window, None)
                    .map(|runs| runs.len() as f64)
                    .map_err(|e| diags.push(format!("gtfs: {e}")))
                    .ok()
            }),
        Err(msg) => {
            diags.push(msg);
            None
        }
    };
    match (bus_od, car_od, runs) {
        (Some(bus), Some(car), Some(runs)) => {
            derive_baseline(bus.total(), runs, car.total(), &config.fleet)
                .map_err(|e| CliError::runtime("baseline", e))
        }
        _ => Err(CliError::Validation(diags)),
    }
}

fn scenario_suite_for(
    config: &PipelineConfig,
    baseline: &BaselineStats,
) -> Result<Vec<ScenarioResult>, CliError> {
    config
        .scenarios
        .iter()
        .map(|&spec| apply_scenario(baseline, spec, &config.fleet))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::runtime("scenario", e))
}

pub fn cmd_scenario_table(
    config_path: &Path,
    out: Option<&Path>,
) -> Result<Vec<String>, CliError> {
    let config = PipelineConfig::load(config_path)?;
    let baseline = baseline_from_config(&config)?;
    let results = scenario_suite_for(&config, &baseline)?;
    let dir = config.output_dir(out);
    make_dir(&dir)?;
    write_file(&dir.join("scenario_table.csv"), &scenario_table_csv(&baseline, &results))?;
    let json = serde_json::to_string_pretty(&scenario_table_json(&baseline, &results)).unwrap();
    write_file(&dir.join("scenario_table.json"), &format!("{json}\n"))?;
    Ok(vec![
        format!("wrote {}", dir.join("scenario_table.csv").display()),
        format!("wrote {}", dir.join("scenario_table.json").display()),
    ])
}

// ---------------------------------------------------------------------------
// gen-demand

/// Expand both OD matrices into the base-case trip table (cars, then bus
/// passengers), with per-purpose sub-seeds.
pub fn build_demand(inputs: &LoadedInputs, seed: u64) -> Result<TripTable, CliError> {
    let cars = generate_trips(
        &inputs.car_od,
        &inputs.profile,
        &inputs.graph,
        Mode::Car,
        stage_seed(seed, "car-demand"),
    )
    .map_err(|e| CliError::runtime("demand", e))?;
    let pax = generate_trips(
        &inputs.bus_od,
        &inputs.profile,
        &inputs.graph,
        Mode::BusPassenger,
        stage_seed(seed, "bus-demand"),
    )
    .map_err(|e| CliError::runtime("demand", e))?;
    let mut trips = cars.trips;
    trips.extend(pax.trips);
    Ok(TripTable { trips })
}

pub fn cmd_gen_demand(
    config_path: &Path,
    out: Option<&Path>,
    seed: Option<u64>,
) -> Result<Vec<String>, CliError> {
    let config = PipelineConfig::load(config_path)?;
    let inputs = load_inputs(&config)?;
    let seed = seed.unwrap_or(config.seed);
    let trips = build_demand(&inputs, seed)?;
    let dir = config.output_dir(out);
    make_dir(&dir)?;
    let path = dir.join("trips.csv");
    write_file(&path, &trips.to_csv())?;
    Ok(vec![format!("wrote {} ({} trips, seed {seed})", path.display(), trips.trips.len())])
}

// ---------------------------------------------------------------------------
// simulate

/// Simulate one trip table and write its exports + emission outputs into
/// `dir`. Returns the daily series for downstream comparison.
fn simulate_into(
    dir: &Path,
    trips: &TripTable,
    inputs: &LoadedInputs,
    config: &PipelineConfig,
    seed: u64,
    with_ledger: bool,
) -> Result<(SimOutput, DailySeries), CliError> {
    make_dir(dir)?;
    let output = run_day(
        &inputs.graph,
        trips,
        &inputs.schedule,
        &inputs.stop_map,
        &config.sim,
        seed,
    )
    .map_err(|e| CliError::runtime("simulate", e))?;
    output
        .write_exports(dir, &inputs.graph, &inputs.schedule)
        .map_err(|e| CliError::runtime("simulate", format!("{}: {e}", dir.display())))?;
    let totals = serde_json::to_string_pretty(&output.totals).unwrap();
    write_file(&dir.join("totals.json"), &format!("{totals}\n"))?;

    let coeffs = config.emissions.coefficients();
    let ledger = integrate(
        &output.segments,
        &output.vehicles,
        &inputs.graph,
        &coeffs,
        config.emissions.bin_width_s,
    )
    .map_err(|e| CliError::runtime("emissions", e))?;
    if with_ledger {
        write_file(
            &dir.join("emission_ledger.csv"),
            &ledger.to_csv(&output.vehicles, &inputs.graph),
        )?;
    }
    let series = aggregate(
        &ledger,
        config.emissions.smoothing_bins,
        Some(config.sim.horizon_s()),
    )
    .map_err(|e| CliError::runtime("emissions", e))?;
    write_file(&dir.join("emission_series.csv"), &series.to_csv())?;
    Ok((output, series))
}

pub fn cmd_simulate(
    config_path: &Path,
    out: Option<&Path>,
    seed: Option<u64>,
) -> Result<Vec<String>, CliError> {
    let config = PipelineConfig::load(config_path)?;
    let inputs = load_inputs(&config)?;
    let seed = seed.unwrap_or(config.seed);
    let trips = build_demand(&inputs, seed)?;
    let dir = config.output_dir(out);
    let (output, series) =
        simulate_into(&dir, &trips, &inputs, &config, stage_seed(seed, "simulate"), true)?;
    Ok(vec![
        format!(
            "simulated {} vehicles: {} cars arrived, {} pax arrived, {} runs completed",
            output.vehicles.len(),
            output.totals.cars_arrived,
            output.totals.pax_arrived,
            output.totals.runs_completed,
        ),
        format!("total CO2 {:.1} kg, peak at {}s", series.total_g / 1000.0, series.peak_time_s),
        format!("wrote exports to {}", dir.display()),
    ])
}

// ---------------------------------------------------------------------------
// run-pipeline

#[derive(Serialize)]
struct SeriesSummary {
    label: String,
    dir: String,
    total_g: f64,
    peak_time_s: f64,
    peak_value_g: f64,
}

#[derive(Serialize)]
struct ScenarioComparison {
    #[serde(flatten)]
    summary: SeriesSummary,
    cars_removed: f64,
    traffic_reduction_pct: f64,
    #[serde(flatten)]
    report: ComparisonReport,
}

#[derive(Serialize)]
struct ComparisonDoc {
    baseline: SeriesSummary,
    scenarios: Vec<ScenarioComparison>,
}

fn summarize(label: &str, dir: &str, series: &DailySeries) -> SeriesSummary {
    SeriesSummary {
        label: label.to_string(),
        dir: dir.to_string(),
        total_g: series.total_g,
        peak_time_s: series.peak_time_s,
        peak_value_g: series.peak_value_g,
    }
}

/// The comparison report, plot CSV and chart for a base + variants set.
fn write_report_files(
    dir: &Path,
    config: &PipelineConfig,
    base: &DailySeries,
    variants: &[(String, String, DailySeries, Option<&ScenarioResult>)],
) -> Result<(), CliError> {
    // Pad to a common length so `compare` accepts series whose last occupied
    // bin differs (trailing zeros change nothing else).
    let max_bins = variants
        .iter()
        .map(|(_, _, s, _)| s.values.len())
        .fold(base.values.len(), usize::max);
    let base = base.padded_to(max_bins);
    let variants: Vec<(String, String, DailySeries, Option<&ScenarioResult>)> = variants
        .iter()
        .map(|(l, d, s, r)| (l.clone(), d.clone(), s.padded_to(max_bins), *r))
        .collect();

    let mut doc = ComparisonDoc {
        baseline: summarize("base", "base", &base),
        scenarios: Vec::new(),
    };
    for (label, subdir, series, result) in &variants {
        let report = compare(&base, series).map_err(|e| CliError::runtime("report", e))?;
        doc.scenarios.push(ScenarioComparison {
            summary: summarize(label, subdir, series),
            cars_removed: result.map_or(0.0, |r| r.cars_removed),
            traffic_reduction_pct: result.map_or(0.0, |r| r.reduction_car_basis * 100.0),
            report,
        });
    }
    let json = serde_json::to_string_pretty(&doc).unwrap();
    write_file(&dir.join("comparison.json"), &format!("{json}\n"))?;

    // Plot-ready CSV: one column of smoothed grams per scenario.
    let mut csv = String::from("bin_start_s,base");
    for (_, subdir, _, _) in &variants {
        csv.push(',');
        csv.push_str(subdir);
    }
    csv.push('\n');
    for bin in 0..max_bins {
        csv.push_str(&format!("{}", bin as f64 * base.bin_width_s));
        csv.push_str(&format!(",{}", base.smoothed[bin]));
        for (_, _, series, _) in &variants {
            csv.push_str(&format!(",{}", series.smoothed[bin]));
        }
        csv.push('\n');
    }
    write_file(&dir.join("chart_series.csv"), &csv)?;

    let mut entries = vec![chart::ChartSeries {
        label: "base".to_string(),
        color: chart::PALETTE[0],
        series: &base,
    }];
    for (i, (label, _, series, _)) in variants.iter().enumerate() {
        entries.push(chart::ChartSeries {
            label: label.clone(),
            color: chart::PALETTE[(i + 1) % chart::PALETTE.len()],
            series,
        });
    }
    let title = format!("Daily CO2 by scenario ({})", config.service_date);
    write_file(&dir.join("chart.svg"), &chart::render_chart(&title, &entries))?;
    Ok(())
}

pub fn cmd_run_pipeline(
    config_path: &Path,
    out: Option<&Path>,
    seed: Option<u64>,
) -> Result<Vec<String>, CliError> {
    let config = PipelineConfig::load(config_path)?;
    let final_dir = config.output_dir(out);
    let staging = staging_dir(&final_dir)?;

    let result = build_pipeline(&config, config_path, seed, &staging);
    match result {
        Ok(mut messages) => {
            if final_dir.exists() {
                std::fs::remove_dir_all(&final_dir).map_err(|e| {
                    CliError::runtime("write", format!("{}: {e}", final_dir.display()))
                })?;
            }
            std::fs::rename(&staging, &final_dir).map_err(|e| {
                CliError::runtime("write", format!("{}: {e}", final_dir.display()))
            })?;
            messages.push(format!("pipeline outputs in {}", final_dir.display()));
            Ok(messages)
        }
        Err(e) => {
            // A failed run must not leave partial outputs behind.
            let _ = std::fs::remove_dir_all(&staging);
            Err(e)
        }
    }
}

fn staging_dir(final_dir: &Path) -> Result<PathBuf, CliError> {
    let name = final_dir
        .file_name()
        .map(|n| n.to_string_lossy().to_string())
        .unwrap_or_else(|| "out".to_string());
    let staging = final_dir.with_file_name(format!("{name}.partial"));
    if staging.exists() {
        std::fs::remove_dir_all(&staging)
            .map_err(|e| CliError::runtime("write", format!("{}: {e}", staging.display())))?;
    }
    make_dir(&staging)?;
    Ok(staging)
}

fn build_pipeline(
    config: &PipelineConfig,
    config_path: &Path,
    seed: Option<u64>,
    dir: &Path,
) -> Result<Vec<String>, CliError> {
    let seed = seed.unwrap_or(config.seed);
    let mut clock = StageClock::new();
    let mut messages = Vec::new();

    let inputs = clock.stage("ingest", || load_inputs(config))?;
    messages.push(format!(
        "ingest: {} edges, {} runs",
        inputs.graph.edges.len(),
        inputs.schedule.runs.len()
    ));

    let baseline = clock.stage("baseline", || baseline_from_config(config))?;
    let results = clock.stage("scenario-table", || {
        let results = scenario_suite_for(config, &baseline)?;
        write_file(&dir.join("scenario_table.csv"), &scenario_table_csv(&baseline, &results))?;
        let json =
            serde_json::to_string_pretty(&scenario_table_json(&baseline, &results)).unwrap();
        write_file(&dir.join("scenario_table.json"), &format!("{json}\n"))?;
        Ok(results)
    })?;
    messages.push(format!(
        "baseline: P0={} B0={} C0={}; {} scenarios",
        baseline.bus_passengers,
        baseline.bus_runs,
        baseline.car_trips,
        results.len()
    ));

    let base_trips = clock.stage("demand", || {
        let trips = build_demand(&inputs, seed)?;
        write_file(&dir.join("trips.csv"), &trips.to_csv())?;
        Ok(trips)
    })?;
    messages.push(format!("demand: {} base trips", base_trips.trips.len()));

    let sim_seed = stage_seed(seed, "simulate");
    let (base_out, base_series) = clock.stage("simulate:base", || {
        simulate_into(&dir.join("base"), &base_trips, &inputs, config, sim_seed, false)
    })?;
    messages.push(format!(
        "base: {} cars arrived, total CO2 {:.1} kg",
        base_out.totals.cars_arrived,
        base_series.total_g / 1000.0
    ));

    let mut variants: Vec<(String, String, DailySeries, Option<&ScenarioResult>)> = Vec::new();
    for (i, result) in results.iter().enumerate() {
        let subdir = scenario_dir(i, &result.label);
        let shift_seed = stage_seed(seed, &format!("shift:{}", result.label));
        let trips = apply_modeshift_to_trips(&base_trips, result, shift_seed)
            .map_err(|e| CliError::runtime("shift", e))?;
        let (sim_out, series) = clock.stage(&format!("simulate:{subdir}"), || {
            simulate_into(&dir.join(&subdir), &trips, &inputs, config, sim_seed, false)
        })?;
        messages.push(format!(
            "{}: removed {:.0} cars, {} cars arrived, total CO2 {:.1} kg",
            result.label,
            result.cars_removed,
            sim_out.totals.cars_arrived,
            series.total_g / 1000.0
        ));
        variants.push((result.label.clone(), subdir, series, Some(result)));
    }

    clock.stage("report", || write_report_files(dir, config, &base_series, &variants))?;

    let mut manifest = RunManifest::for_run(config, config_path, seed)?;
    manifest.output_digests = digest_tree(dir)?;
    manifest.stage_timings_ms = clock.into_timings();
    write_file(&dir.join("manifest.json"), &manifest.to_json())?;
    messages.push("wrote manifest.json".to_string());
    Ok(messages)
}

/// Relative path → digest for every file under `dir` (sorted by path).
fn digest_tree(dir: &Path) -> Result<BTreeMap<String, String>, CliError> {
    fn walk(
        root: &Path,
        dir: &Path,
        out: &mut BTreeMap<String, String>,
    ) -> Result<(), CliError> {
        let entries = std::fs::read_dir(dir)
            .map_err(|e| CliError::runtime("digest", format!("{}: {e}", dir.display())))?;
        for entry in entries {
            let entry =
                entry.map_err(|e| CliError::runtime("digest", format!("{}: {e}", dir.display())))?;
            let path = entry.path();
            if path.is_dir() {
                walk(root, &path, out)?;
            } else {
                let rel = path
                    .strip_prefix(root)
                    .unwrap()
                    .components()
                    .map(|c| c.as_os_str().to_string_lossy())
                    .collect::<Vec<_>>()
                    .join("/");
                out.insert(rel, digest_file(&path)?);
            }
        }
        Ok(())
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out)?;
    Ok(out)
}

// ---------------------------------------------------------------------------
// report

/// Rebuild a series from an exported `emission_series.csv`. The raw grams
/// column is authoritative; smoothing and peaks are recomputed, which matches
/// the original because `Display` round-trips `f64` exactly.
fn read_series_csv(
    path: &Path,
    smoothing_bins: usize,
    fallback_bin_width_s: f64,
) -> Result<DailySeries, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::runtime("report", format!("{}: {e}", path.display())))?;
    let mut bin_width = None;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            continue;
        }
        let mut fields = line.split(',');
        let (start, grams) = (fields.next(), fields.next());
        let parse = |s: Option<&str>| -> Result<f64, CliError> {
            s.and_then(|v| v.parse::<f64>().ok()).ok_or_else(|| {
                CliError::runtime("report", format!("{}: bad row {}", path.display(), i + 1))
            })
        };
        let start = parse(start)?;
        if i == 2 {
            bin_width = Some(start);
        }
        values.push(parse(grams)?);
    }
    if values.is_empty() {
        return Err(CliError::runtime("report", format!("{}: no data rows", path.display())));
    }
    let bin_width = bin_width.unwrap_or(fallback_bin_width_s);
    Ok(build_series(bin_width, smoothing_bins, values))
}

/// Rebuild comparison.json, chart_series.csv and chart.svg from the series
/// files a previous `run-pipeline` left in the output directory.
pub fn cmd_report(config_path: &Path, out: Option<&Path>) -> Result<Vec<String>, CliError> {
    let config = PipelineConfig::load(config_path)?;
    let dir = config.output_dir(out);
    let smoothing = config.emissions.smoothing_bins;
    let width = config.emissions.bin_width_s;
    let base = read_series_csv(&dir.join("base").join("emission_series.csv"), smoothing, width)?;

    let baseline = baseline_from_config(&config)?;
    let results = scenario_suite_for(&config, &baseline)?;
    let mut variants = Vec::new();
    for (i, result) in results.iter().enumerate() {
        let subdir = scenario_dir(i, &result.label);
        let series =
            read_series_csv(&dir.join(&subdir).join("emission_series.csv"), smoothing, width)?;
        variants.push((result.label.clone(), subdir, series, Some(result)));
    }
    write_report_files(&dir, &config, &base, &variants)?;
    Ok(vec![
        format!("rebuilt comparison.json, chart_series.csv, chart.svg in {}", dir.display()),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_dir_names_are_filesystem_safe() {
        assert_eq!(scenario_dir(0, "2X"), "s1_2x");
        assert_eq!(scenario_dir(1, "50%"), "s2_50pct");
        assert_eq!(scenario_dir(2, "70%"), "s3_70pct");
        assert_eq!(scenario_dir(3, "1.5X"), "s4_1_5x");
    }

    #[test]
    fn stage_seeds_are_label_scoped_and_order_free() {
        let a = stage_seed(7, "car-demand");
        let b = stage_seed(7, "bus-demand");
        assert_ne!(a, b);
        assert_eq!(a, stage_seed(7, "car-demand"), "same label, same seed");
        assert_ne!(a, stage_seed(8, "car-demand"));
    }

    #[test]
    fn series_csv_roundtrips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let values = vec![0.0, 1.5, 2.671_828_182_845e3, 0.1 + 0.2];
        let series = build_series(60.0, 2, values);
        let path = dir.path().join("emission_series.csv");
        std::fs::write(&path, series.to_csv()).unwrap();
        let back = read_series_csv(&path, 2, 60.0).unwrap();
        assert_eq!(back.values, series.values);
        assert_eq!(back.smoothed, series.smoothed);
        assert_eq!(back.bin_width_s, 60.0);
        assert_eq!(back.to_csv(), series.to_csv());
    }

    #[test]
    fn digest_tree_uses_relative_slash_paths() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(dir.path().join("sub")).unwrap();
        std::fs::write(dir.path().join("a.txt"), "a").unwrap();
        std::fs::write(dir.path().join("sub").join("b.txt"), "b").unwrap();
        let digests = digest_tree(dir.path()).unwrap();
        let keys: Vec<&str> = digests.keys().map(|s| s.as_str()).collect();
        assert_eq!(keys, vec!["a.txt", "sub/b.txt"]);
    }
}
