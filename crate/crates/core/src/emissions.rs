//! CO2 accounting: trajectory segments -> per-bin gram ledger -> daily series
//! with smoothed peak detection and scenario comparison.
//!
//! The emission rate is quadratic in speed, `rate(v) = c0 + c1*v + c2*v^2`
//! grams per second with `v` in m/s. Over a segment driven at constant mean
//! speed this integrates to `c0*dur + c1*length + c2*length*v`: an idle term
//! that grows when congestion stretches the duration, plus distance terms.
//! Stop-and-go idling inside congestion is therefore folded into the reduced
//! mean speed — the point-queue model has no explicit stopped phase.
//!
//! Default coefficients are calibration knobs, not measurements. They are
//! chosen so that at 13.9 m/s (50 km/h) the distance-proportional part
//! `c1 + c2*v` comes to about 162 g/km for a car and 1.11 kg/km for a bus,
//! typical mid-size urban figures; the idle term adds roughly a quarter on
//! top at that speed.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::NetworkGraph;
use crate::sim::{TrajectorySegment, VehicleClass, VehicleInfo};

pub const DEFAULT_BIN_WIDTH_S: f64 = 60.0;
pub const DEFAULT_SMOOTHING_BINS: usize = 5;

#[derive(Debug, Error)]
pub enum EmissionError {
    #[error("{class} coefficients give a negative rate at {v} m/s ({rate:.4} g/s)")]
    NegativeRate { class: &'static str, v: f64, rate: f64 },
    #[error("bin width must be positive, got {0}")]
    BadBinWidth(f64),
    #[error("smoothing window must cover at least one bin")]
    BadSmoothing,
    #[error("cannot aggregate an empty ledger")]
    EmptyLedger,
    #[error("series are incompatible: {0}")]
    MismatchedSeries(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// `rate(v) = c0 + c1*v + c2*v^2` grams per second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmissionCoefficients {
    /// Grams per second at standstill.
    pub c0: f64,
    /// Grams per meter.
    pub c1: f64,
    /// Grams times seconds per square meter.
    pub c2: f64,
}

impl EmissionCoefficients {
    pub fn rate_g_per_s(&self, v: f64) -> f64 {
        self.c0 + self.c1 * v + self.c2 * v * v
    }

    /// Reject coefficient sets whose rate dips below zero anywhere on the
    /// plausible speed range [0, 60] m/s.
    pub fn validate(&self, class: &'static str) -> Result<(), EmissionError> {
        let mut candidates = vec![0.0, 60.0];
        if self.c2 != 0.0 {
            let vertex = -self.c1 / (2.0 * self.c2);
            if (0.0..=60.0).contains(&vertex) {
                candidates.push(vertex);
            }
        }
        for v in candidates {
            let rate = self.rate_g_per_s(v);
            if rate < 0.0 {
                return Err(EmissionError::NegativeRate { class, v, rate });
            }
        }
        Ok(())
    }
}

/// Per-class coefficient sets; defaults are the documented urban calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassCoefficients {
    pub car: EmissionCoefficients,
    pub bus: EmissionCoefficients,
}

impl Default for ClassCoefficients {
    fn default() -> Self {
        ClassCoefficients {
            car: EmissionCoefficients { c0: 0.6, c1: 0.12, c2: 0.003 },
            bus: EmissionCoefficients { c0: 2.0, c1: 0.9, c2: 0.015 },
        }
    }
}

impl ClassCoefficients {
    pub fn for_class(&self, class: VehicleClass) -> &EmissionCoefficients {
        match class {
            VehicleClass::Car => &self.car,
            VehicleClass::Bus => &self.bus,
        }
    }

    pub fn validate(&self) -> Result<(), EmissionError> {
        self.car.validate("car")?;
        self.bus.validate("bus")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerEntry {
    /// Index into the simulation's vehicle list.
    pub vehicle: u32,
    pub class: VehicleClass,
    pub edge: u32,
    /// Aligned to the bin width.
    pub bin_start_s: f64,
    pub grams: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmissionLedger {
    pub bin_width_s: f64,
    pub entries: Vec<LedgerEntry>,
}

impl EmissionLedger {
    pub fn total_g(&self) -> f64 {
        self.entries.iter().map(|e| e.grams).sum()
    }

    pub fn to_csv(&self, vehicles: &[VehicleInfo], graph: &NetworkGraph) -> String {
        let mut out = String::from("vehicle_id,class,edge_id,bin_start_s,grams\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                vehicles[e.vehicle as usize].id,
                e.class.as_str(),
                graph.edge(e.edge).id,
                e.bin_start_s,
                e.grams
            ));
        }
        out
    }
}

fn segment_entries(
    seg: &TrajectorySegment,
    class: VehicleClass,
    graph: &NetworkGraph,
    coeffs: &ClassCoefficients,
    bin_width_s: f64,
) -> Vec<LedgerEntry> {
    let dur = seg.exit_s - seg.enter_s;
    debug_assert!(dur > 0.0, "segments must have positive duration");
    let v = graph.edge(seg.edge).length_m / dur;
    let rate = coeffs.for_class(class).rate_g_per_s(v);
    let grams = rate * dur;

    // Split across bins by overlap; the final bin takes the exact residual so
    // the split conserves the segment total to the last ulp.
    let mut out = Vec::with_capacity(2);
    let mut bin = (seg.enter_s / bin_width_s).floor();
    let mut acc = 0.0;
    loop {
        let bin_start = bin * bin_width_s;
        let bin_end = bin_start + bin_width_s;
        if seg.exit_s <= bin_end {
            out.push(LedgerEntry {
                vehicle: seg.vehicle,
                class,
                edge: seg.edge,
                bin_start_s: bin_start,
                grams: (grams - acc).max(0.0),
            });
            break;
        }
        let slice = rate * (bin_end - seg.enter_s.max(bin_start));
        out.push(LedgerEntry {
            vehicle: seg.vehicle,
            class,
            edge: seg.edge,
            bin_start_s: bin_start,
            grams: slice,
        });
        acc += slice;
        bin += 1.0;
    }
    out
}

/// Turn trajectories into a per-bin gram ledger. Dispatches across segments
/// with rayon when the `parallel` feature is on; entry order is identical
/// either way (segment order is preserved).
pub fn integrate(
    segments: &[TrajectorySegment],
    vehicles: &[VehicleInfo],
    graph: &NetworkGraph,
    coeffs: &ClassCoefficients,
    bin_width_s: f64,
) -> Result<EmissionLedger, EmissionError> {
    check_integrate_inputs(coeffs, bin_width_s)?;
    #[cfg(feature = "parallel")]
    let per_segment: Vec<Vec<LedgerEntry>> = {
        use rayon::prelude::*;
        segments
            .par_iter()
            .map(|s| segment_entries(s, vehicles[s.vehicle as usize].class, graph, coeffs, bin_width_s))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let per_segment: Vec<Vec<LedgerEntry>> = segments
        .iter()
        .map(|s| segment_entries(s, vehicles[s.vehicle as usize].class, graph, coeffs, bin_width_s))
        .collect();
    Ok(EmissionLedger { bin_width_s, entries: per_segment.into_iter().flatten().collect() })
}

/// Sequential counterpart of [`integrate`]; always available for comparison.
pub fn integrate_seq(
    segments: &[TrajectorySegment],
    vehicles: &[VehicleInfo],
    graph: &NetworkGraph,
    coeffs: &ClassCoefficients,
    bin_width_s: f64,
) -> Result<EmissionLedger, EmissionError> {
    check_integrate_inputs(coeffs, bin_width_s)?;
    let entries = segments
        .iter()
        .flat_map(|s| segment_entries(s, vehicles[s.vehicle as usize].class, graph, coeffs, bin_width_s))
        .collect();
    Ok(EmissionLedger { bin_width_s, entries })
}

fn check_integrate_inputs(
    coeffs: &ClassCoefficients,
    bin_width_s: f64,
) -> Result<(), EmissionError> {
    coeffs.validate()?;
    if !(bin_width_s > 0.0) {
        return Err(EmissionError::BadBinWidth(bin_width_s));
    }
    Ok(())
}

/// Grams per bin over the day, with a centered-moving-average copy used for
/// peak detection.
#[derive(Debug, Clone, PartialEq)]
pub struct DailySeries {
    pub bin_width_s: f64,
    pub smoothing_bins: usize,
    /// Raw per-bin sums, anchored at midnight (bin 0 starts at 0 s).
    pub values: Vec<f64>,
    pub smoothed: Vec<f64>,
    pub total_g: f64,
    /// Start of the bin where the smoothed series peaks; earliest bin on ties.
    pub peak_time_s: f64,
    pub peak_value_g: f64,
}

fn smooth(values: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(values.len());
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

fn peak_of(smoothed: &[f64]) -> (usize, f64) {
    let mut best = (0usize, f64::MIN);
    for (i, &v) in smoothed.iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

/// Sum the ledger into a daily series. `horizon_s` pads (never truncates) the
/// series to a fixed length so scenario series stay comparable.
pub fn aggregate(
    ledger: &EmissionLedger,
    smoothing_bins: usize,
    horizon_s: Option<f64>,
) -> Result<DailySeries, EmissionError> {
    if ledger.entries.is_empty() {
        return Err(EmissionError::EmptyLedger);
    }
    if smoothing_bins == 0 {
        return Err(EmissionError::BadSmoothing);
    }
    let w = ledger.bin_width_s;
    let mut bins = horizon_s.map_or(0, |h| (h / w).ceil() as usize);
    for e in &ledger.entries {
        let idx = (e.bin_start_s / w).round() as usize;
        bins = bins.max(idx + 1);
    }
    let mut values = vec![0.0; bins];
    for e in &ledger.entries {
        values[(e.bin_start_s / w).round() as usize] += e.grams;
    }
    Ok(build_series(w, smoothing_bins, values))
}

/// Assemble a series from raw per-bin grams (bin 0 starts at midnight),
/// computing the smoothed copy, total and peak. [`aggregate`] uses this after
/// summing a ledger; it is also the way to rebuild a series from an exported
/// values column.
pub fn build_series(bin_width_s: f64, smoothing_bins: usize, values: Vec<f64>) -> DailySeries {
    let smoothed = smooth(&values, smoothing_bins);
    let (peak_bin, peak_value_g) = peak_of(&smoothed);
    DailySeries {
        bin_width_s,
        smoothing_bins,
        total_g: values.iter().sum(),
        peak_time_s: peak_bin as f64 * bin_width_s,
        peak_value_g,
        values,
        smoothed,
    }
}

impl DailySeries {
    /// Same series zero-padded to `bins` bins (smoothing and peak recomputed;
    /// the total is unchanged). Panics if this would truncate.
    pub fn padded_to(&self, bins: usize) -> DailySeries {
        assert!(bins >= self.values.len(), "padded_to never truncates");
        let mut values = self.values.clone();
        values.resize(bins, 0.0);
        build_series(self.bin_width_s, self.smoothing_bins, values)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_start_s,grams,smoothed_grams\n");
        for (i, (&v, &s)) in self.values.iter().zip(&self.smoothed).enumerate() {
            out.push_str(&format!("{},{},{}\n", i as f64 * self.bin_width_s, v, s));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), EmissionError> {
        std::fs::write(path, self.to_csv()).map_err(|source| EmissionError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub total_base_g: f64,
    pub total_variant_g: f64,
    /// `100 * (base - variant) / base`.
    pub percent_reduction: f64,
    pub base_peak_time_s: f64,
    pub variant_peak_time_s: f64,
    pub peak_shift_s: f64,
}

pub fn compare(base: &DailySeries, variant: &DailySeries) -> Result<ComparisonReport, EmissionError> {
    if base.bin_width_s != variant.bin_width_s {
        return Err(EmissionError::MismatchedSeries(format!(
            "bin widths {} vs {}",
            base.bin_width_s, variant.bin_width_s
        )));
    }
    if base.values.len() != variant.values.len() {
        return Err(EmissionError::MismatchedSeries(format!(
            "horizons {} vs {} bins",
            base.values.len(),
            variant.values.len()
        )));
    }
    let percent = if base.total_g > 0.0 {
        100.0 * (base.total_g - variant.total_g) / base.total_g
    } else {
        0.0
    };
    Ok(ComparisonReport {
        total_base_g: base.total_g,
        total_variant_g: variant.total_g,
        percent_reduction: percent,
        base_peak_time_s: base.peak_time_s,
        variant_peak_time_s: variant.peak_time_s,
        peak_shift_s: variant.peak_time_s - base.peak_time_s,
    })
}
