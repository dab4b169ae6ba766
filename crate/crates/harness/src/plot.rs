//! Deterministic SVG overlay plots. One series per algorithm: the median
//! objective over seeds as a polyline plus an interquartile band when more
//! than one seed is present. All geometry is emitted with fixed-precision
//! formatting from sorted inputs, so identical trajectories yield identical
//! bytes.

use crate::runner::CSV_HEADER;
use crate::{HarnessError, Result};
use std::collections::BTreeMap;
use std::path::Path;

/// One (algorithm, seed) trajectory: objective value by cumulative queries.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub algorithm: String,
    pub seed: u64,
    pub points: Vec<(u64, f64)>,
}

#[derive(Debug, Clone)]
pub struct PlotStyle {
    pub title: String,
    pub log_y: bool,
}

impl Default for PlotStyle {
    fn default() -> Self {
        PlotStyle { title: String::from("objective vs queries"), log_y: false }
    }
}

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 540.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 790.0;
const TOP: f64 = 60.0;
const BOTTOM: f64 = 480.0;
/// Grid points kept after pooling query marks across series.
const MAX_GRID: usize = 512;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

/// Reads every trajectory CSV under `dir` (skipping `summary.csv`) into one
/// series per file. Files are visited in sorted order; a header differing
/// from the canonical one or out-of-order query counts are data errors.
pub fn read_trajectories(dir: &Path) -> Result<Vec<Series>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .map(|e| Ok(e?.path()))
        .collect::<Result<Vec<_>>>()?;
    paths.sort();
    let mut out = Vec::new();
    for path in paths {
        if path.extension().map_or(true, |e| e != "csv")
            || path.file_name().is_some_and(|n| n == "summary.csv")
        {
            continue;
        }
        let text = std::fs::read_to_string(&path)?;
        let mut lines = text.lines();
        let header = lines.next().unwrap_or("");
        if header != CSV_HEADER {
            return Err(HarnessError::Data(format!(
                "{}: header {header:?} does not match {CSV_HEADER:?}",
                path.display()
            )));
        }
        let mut series: Option<Series> = None;
        for (i, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(HarnessError::Data(format!(
                    "{} row {}: expected 6 fields, got {}",
                    path.display(),
                    i + 2,
                    fields.len()
                )));
            }
            let bad = |what: &str| {
                HarnessError::Data(format!("{} row {}: bad {what}", path.display(), i + 2))
            };
            let seed: u64 = fields[0].parse().map_err(|_| bad("seed"))?;
            let queries: u64 = fields[2].parse().map_err(|_| bad("queries"))?;
            let f: f64 = fields[3].parse().map_err(|_| bad("objective"))?;
            let s = series.get_or_insert_with(|| Series {
                algorithm: fields[1].to_string(),
                seed,
                points: Vec::new(),
            });
            if s.algorithm != fields[1] || s.seed != seed {
                return Err(HarnessError::Data(format!(
                    "{} row {}: mixed (algorithm, seed) within one file",
                    path.display(),
                    i + 2
                )));
            }
            if s.points.last().is_some_and(|&(q, _)| queries < q) {
                return Err(HarnessError::Data(format!(
                    "{} row {}: rows are not sorted by queries",
                    path.display(),
                    i + 2
                )));
            }
            s.points.push((queries, f));
        }
        if let Some(s) = series {
            out.push(s);
        }
    }
    Ok(out)
}

/// Renders the overlay SVG. Trajectories are step functions: between
/// recorded marks the last value holds.
pub fn emit_plot(series: &[Series], style: &PlotStyle) -> Result<String> {
    if series.is_empty() {
        return Err(HarnessError::Data(String::from("no trajectories to plot")));
    }
    let mut groups: BTreeMap<&str, Vec<&Series>> = BTreeMap::new();
    for s in series {
        groups.entry(&s.algorithm).or_default().push(s);
    }
    let mut grid: Vec<u64> = series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).collect();
    grid.sort_unstable();
    grid.dedup();
    if grid.len() > MAX_GRID {
        let last = grid.len() - 1;
        let mut kept: Vec<u64> =
            (0..MAX_GRID).map(|i| grid[i * last / (MAX_GRID - 1)]).collect();
        kept.dedup();
        grid = kept;
    }
    // Per group: (q1, median, q3) at each grid point.
    let mut stats: BTreeMap<&str, Vec<(f64, f64, f64)>> = BTreeMap::new();
    for (&name, members) in &groups {
        let rows = grid
            .iter()
            .map(|&g| {
                let mut vals: Vec<f64> = members.iter().map(|s| step_eval(&s.points, g)).collect();
                order_stats(&mut vals)
            })
            .collect();
        stats.insert(name, rows);
    }
    let banded: BTreeMap<&str, bool> =
        groups.iter().map(|(&n, m)| (n, m.len() > 1)).collect();
    let mut drawn: Vec<f64> = Vec::new();
    for (name, rows) in &stats {
        for &(q1, med, q3) in rows {
            drawn.push(med);
            if banded[name] {
                drawn.push(q1);
                drawn.push(q3);
            }
        }
    }
    if style.log_y && drawn.iter().any(|&v| v <= 0.0) {
        return Err(HarnessError::Data(String::from(
            "log scale requires strictly positive objective values",
        )));
    }
    let ty = |v: f64| if style.log_y { v.log10() } else { v };
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for &v in &drawn {
        y_min = y_min.min(ty(v));
        y_max = y_max.max(ty(v));
    }
    let pad = if y_max > y_min { 0.05 * (y_max - y_min) } else { y_max.abs().max(1.0) * 0.1 };
    y_min -= pad;
    y_max += pad;
    let q_max = (*grid.last().unwrap()).max(1);
    let map_x = |q: u64| LEFT + (RIGHT - LEFT) * q as f64 / q_max as f64;
    let map_y = |v: f64| BOTTOM - (BOTTOM - TOP) * (ty(v) - y_min) / (y_max - y_min);

    let mut svg = String::with_capacity(1 << 16);
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">\n"
    ));
    svg.push_str(&format!(
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"30\" text-anchor=\"middle\" font-size=\"18\">{}</text>\n",
        (LEFT + RIGHT) / 2.0,
        escape(&style.title)
    ));
    // Axes with 5 ticks each.
    svg.push_str(&format!(
        "<line x1=\"{LEFT}\" y1=\"{BOTTOM}\" x2=\"{RIGHT}\" y2=\"{BOTTOM}\" stroke=\"black\"/>\n\
         <line x1=\"{LEFT}\" y1=\"{TOP}\" x2=\"{LEFT}\" y2=\"{BOTTOM}\" stroke=\"black\"/>\n"
    ));
    for i in 0..5 {
        let q = q_max * i / 4;
        let x = map_x(q);
        svg.push_str(&format!(
            "<line x1=\"{x:.2}\" y1=\"{BOTTOM}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n\
             <text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"12\">{q}</text>\n",
            BOTTOM + 6.0,
            BOTTOM + 22.0
        ));
        let t = y_min + (y_max - y_min) * i as f64 / 4.0;
        let label = if style.log_y { 10f64.powf(t) } else { t };
        let y = BOTTOM - (BOTTOM - TOP) * i as f64 / 4.0;
        svg.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{LEFT}\" y2=\"{y:.2}\" stroke=\"black\"/>\n\
             <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-size=\"12\">{label:.3e}</text>\n",
            LEFT - 6.0,
            LEFT - 10.0,
            y + 4.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"14\">queries</text>\n",
        (LEFT + RIGHT) / 2.0,
        BOTTOM + 42.0
    ));
    for (idx, (name, rows)) in stats.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        if banded[name] {
            let mut pts = String::new();
            for (&g, &(_, _, q3)) in grid.iter().zip(rows) {
                pts.push_str(&format!("{:.2},{:.2} ", map_x(g), map_y(q3)));
            }
            for (&g, &(q1, _, _)) in grid.iter().zip(rows).rev() {
                pts.push_str(&format!("{:.2},{:.2} ", map_x(g), map_y(q1)));
            }
            svg.push_str(&format!(
                "<polygon points=\"{}\" fill=\"{color}\" fill-opacity=\"0.15\" stroke=\"none\"/>\n",
                pts.trim_end()
            ));
        }
        let mut pts = String::new();
        for (&g, &(_, med, _)) in grid.iter().zip(rows) {
            pts.push_str(&format!("{:.2},{:.2} ", map_x(g), map_y(med)));
        }
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            pts.trim_end()
        ));
        let ly = TOP + 8.0 + 22.0 * idx as f64;
        svg.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" \
             stroke=\"{color}\" stroke-width=\"3\"/>\n\
             <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"13\">{}</text>\n",
            RIGHT + 10.0,
            RIGHT + 40.0,
            RIGHT + 46.0,
            ly + 4.0,
            escape(name)
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Reads trajectories under `dir` and writes the overlay SVG to `out`.
pub fn plot_dir(dir: &Path, out: &Path, style: &PlotStyle) -> Result<()> {
    let series = read_trajectories(dir)?;
    let svg = emit_plot(&series, style)?;
    std::fs::write(out, svg)?;
    Ok(())
}

/// Step-function evaluation: the last recorded value at or before `g`, or
/// the first value when `g` precedes the series.
fn step_eval(points: &[(u64, f64)], g: u64) -> f64 {
    let idx = points.partition_point(|&(q, _)| q <= g);
    if idx == 0 {
        points[0].1
    } else {
        points[idx - 1].1
    }
}

/// (first quartile, median, third quartile) by order statistics; the median
/// of an even count averages the two middle values.
pub(crate) fn order_stats(vals: &mut [f64]) -> (f64, f64, f64) {
    vals.sort_by(|a, b| a.total_cmp(b));
    let n = vals.len();
    let median = if n % 2 == 1 {
        vals[n / 2]
    } else {
        0.5 * (vals[n / 2 - 1] + vals[n / 2])
    };
    (vals[(n - 1) / 4], median, vals[3 * (n - 1) / 4])
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
