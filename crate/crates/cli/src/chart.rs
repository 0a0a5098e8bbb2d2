//! Hand-rolled SVG line chart of daily emission series: one smoothed line
//! per scenario on a shared time axis, with labeled axes, a legend and a
//! marker + annotation at each line's peak. All numbers are formatted with
//! fixed precision so identical inputs render byte-identical SVG.

use std::fmt::Write;

use modeshift_core::emissions::DailySeries;

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 540.0;
const MARGIN_LEFT: f64 = 78.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 48.0;
const MARGIN_BOTTOM: f64 = 58.0;

pub const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

pub struct ChartSeries<'a> {
    pub label: String,
    pub color: &'a str,
    pub series: &'a DailySeries,
}

fn hhmm(seconds: f64) -> String {
    let total_min = (seconds / 60.0).round() as i64;
    format!("{:02}:{:02}", total_min / 60, total_min % 60)
}

/// Render the chart. Series should share a bin width; the x axis spans the
/// longest series.
pub fn render_chart(title: &str, entries: &[ChartSeries]) -> String {
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;

    let x_max_s = entries
        .iter()
        .map(|e| e.series.smoothed.len() as f64 * e.series.bin_width_s)
        .fold(1.0_f64, f64::max);
    let y_max = entries
        .iter()
        .flat_map(|e| e.series.smoothed.iter().copied())
        .fold(0.0_f64, f64::max)
        .max(1e-9)
        * 1.08;

    let x = |t: f64| MARGIN_LEFT + t / x_max_s * plot_w;
    let y = |g: f64| MARGIN_TOP + plot_h - (g / y_max * plot_h);

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">\n"
    );
    let _ = write!(svg, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n");
    let _ = write!(
        svg,
        "<text x=\"{:.2}\" y=\"26\" font-size=\"17\" text-anchor=\"middle\">{}</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        escape(title)
    );

    // Gridlines + axis ticks. X: one tick every 2 hours that fits; Y: 5 ticks.
    let tick_step_s = 7200.0;
    let mut t = 0.0;
    while t <= x_max_s + 1e-9 {
        let px = x(t);
        let _ = write!(
            svg,
            "<line x1=\"{px:.2}\" y1=\"{:.2}\" x2=\"{px:.2}\" y2=\"{:.2}\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n",
            MARGIN_TOP,
            MARGIN_TOP + plot_h
        );
        let _ = write!(
            svg,
            "<text x=\"{px:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
            MARGIN_TOP + plot_h + 18.0,
            hhmm(t)
        );
        t += tick_step_s;
    }
    for i in 0..=5 {
        let g = y_max * i as f64 / 5.0;
        let py = y(g);
        let _ = write!(
            svg,
            "<line x1=\"{:.2}\" y1=\"{py:.2}\" x2=\"{:.2}\" y2=\"{py:.2}\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n",
            MARGIN_LEFT,
            MARGIN_LEFT + plot_w
        );
        let _ = write!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"end\">{:.2}</text>\n",
            MARGIN_LEFT - 8.0,
            py + 4.0,
            g / 1000.0
        );
    }

    // Axis lines and labels.
    let _ = write!(
        svg,
        "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\" stroke-width=\"1.5\"/>\n",
        MARGIN_LEFT,
        MARGIN_TOP + plot_h,
        MARGIN_LEFT + plot_w,
        MARGIN_TOP + plot_h
    );
    let _ = write!(
        svg,
        "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\" stroke-width=\"1.5\"/>\n",
        MARGIN_LEFT, MARGIN_TOP, MARGIN_LEFT,
        MARGIN_TOP + plot_h
    );
    let _ = write!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"13\" text-anchor=\"middle\">time of day</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 14.0
    );
    let _ = write!(
        svg,
        "<text x=\"20\" y=\"{:.2}\" font-size=\"13\" text-anchor=\"middle\" \
         transform=\"rotate(-90 20 {:.2})\">CO2 per minute (kg)</text>\n",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    );

    // One polyline per series, sampled at bin midpoints.
    for entry in entries {
        let mut points = String::new();
        for (i, &g) in entry.series.smoothed.iter().enumerate() {
            let t = (i as f64 + 0.5) * entry.series.bin_width_s;
            let _ = write!(points, "{:.2},{:.2} ", x(t), y(g));
        }
        let _ = write!(
            svg,
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.8\" points=\"{}\"/>\n",
            entry.color,
            points.trim_end()
        );
    }

    // Peak markers and annotations, drawn after the lines so they sit on top.
    for (i, entry) in entries.iter().enumerate() {
        let s = entry.series;
        let px = x(s.peak_time_s + 0.5 * s.bin_width_s);
        let py = y(s.peak_value_g);
        let _ = write!(
            svg,
            "<circle cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"4\" fill=\"{}\"/>\n",
            entry.color
        );
        // Stagger annotation rows so close peaks stay readable.
        let label_y = MARGIN_TOP + 14.0 + 15.0 * i as f64;
        let _ = write!(
            svg,
            "<text x=\"{px:.2}\" y=\"{label_y:.2}\" font-size=\"11\" fill=\"{}\" \
             text-anchor=\"middle\">{} peak {} ({:.1} kg)</text>\n",
            entry.color,
            escape(&entry.label),
            hhmm(s.peak_time_s),
            s.peak_value_g / 1000.0
        );
    }

    // Legend, top-right inside the plot area.
    let legend_x = MARGIN_LEFT + plot_w - 150.0;
    for (i, entry) in entries.iter().enumerate() {
        let ly = MARGIN_TOP + plot_h - 18.0 * (entries.len() - i) as f64;
        let _ = write!(
            svg,
            "<line x1=\"{legend_x:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" \
             stroke=\"{}\" stroke-width=\"3\"/>\n",
            legend_x + 26.0,
            entry.color
        );
        let _ = write!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\">{}</text>\n",
            legend_x + 32.0,
            ly + 4.0,
            escape(&entry.label)
        );
    }

    svg.push_str("</svg>\n");
    svg
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
