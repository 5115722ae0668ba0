//! Learning curves from finished runs: a CSV of plotted points and SVG
//! plots of the test metric against reading and labeling cost, shaded by
//! one standard deviation across seeds.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::EvalReport;
use crate::selector::{mean_std, read_seed_records, CycleRecord};

#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint {
    pub cycle: usize,
    pub seeds: usize,
    pub reading: (f64, f64),
    pub labeling: (f64, f64),
    pub metric: (f64, f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub label: String,
    pub task: String,
    pub points: Vec<CurvePoint>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CostAxis {
    Reading,
    Labeling,
}

impl CostAxis {
    fn name(self) -> &'static str {
        match self {
            CostAxis::Reading => "reading",
            CostAxis::Labeling => "labeling",
        }
    }
}

fn task_name(report: &EvalReport) -> &'static str {
    match report {
        EvalReport::Tagging { .. } => "tagging",
        EvalReport::Parsing { .. } => "parsing",
        EvalReport::Ie { .. } => "ie",
    }
}

fn metric_name(task: &str) -> &'static str {
    match task {
        "tagging" => "span F1",
        "parsing" => "LAS",
        _ => "relation F1",
    }
}

/// Seed numbers with a `seed<k>` directory under `dir`, ascending.
fn seed_dirs(dir: &Path) -> Result<Vec<u64>> {
    let mut seeds = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if let Some(k) = entry.file_name().to_str().and_then(|n| n.strip_prefix("seed")) {
            if let Ok(k) = k.parse::<u64>() {
                if entry.path().is_dir() {
                    seeds.push(k);
                }
            }
        }
    }
    seeds.sort_unstable();
    Ok(seeds)
}

/// Mean and std per cycle over every seed of one run directory.
pub fn load_curve(dir: &Path) -> Result<Curve> {
    let mut runs: Vec<Vec<CycleRecord>> = Vec::new();
    for seed in seed_dirs(dir)? {
        if let Some(r) = read_seed_records(dir, seed)? {
            if !r.is_empty() {
                runs.push(r);
            }
        }
    }
    let first = runs
        .first()
        .and_then(|r| r.first())
        .ok_or_else(|| Error::Empty(format!("no cycle records under {}", dir.display())))?;
    let task = task_name(&first.test).to_string();
    let label = first.strategy.clone();
    if let Some(bad) = runs
        .iter()
        .flatten()
        .find(|r| task_name(&r.test) != task || r.strategy != label)
    {
        return Err(Error::validation(
            dir.display().to_string(),
            format!("seed {} mixes tasks or strategies", bad.seed),
        ));
    }
    let max_cycle = runs.iter().map(Vec::len).max().unwrap_or(0);
    let mut points = Vec::new();
    for cycle in 1..=max_cycle {
        let rows: Vec<&CycleRecord> = runs
            .iter()
            .filter_map(|r| r.iter().find(|c| c.cycle == cycle))
            .collect();
        let col = |f: &dyn Fn(&CycleRecord) -> f64| mean_std(&rows.iter().map(|r| f(r)).collect::<Vec<_>>());
        points.push(CurvePoint {
            cycle,
            seeds: rows.len(),
            reading: col(&|r| r.reading_cost as f64),
            labeling: col(&|r| r.labeling_cost),
            metric: col(&|r| r.test.primary()),
        });
    }
    Ok(Curve { label, task, points })
}

/// Loads several runs of one task; duplicate strategy labels get the
/// directory name appended.
pub fn load_curves(dirs: &[&Path]) -> Result<Vec<Curve>> {
    let mut curves = Vec::new();
    for dir in dirs {
        let mut c = load_curve(dir)?;
        if let Some(first) = curves.first() {
            let first: &Curve = first;
            if first.task != c.task {
                return Err(Error::config(
                    "runs",
                    format!(
                        "{} is a {} run but {} is {}",
                        dir.display(),
                        c.task,
                        dirs[0].display(),
                        first.task
                    ),
                ));
            }
        }
        if curves.iter().any(|o: &Curve| o.label == c.label) {
            let name = dir.file_name().and_then(|n| n.to_str()).unwrap_or("run");
            c.label = format!("{} ({name})", c.label);
        }
        curves.push(c);
    }
    Ok(curves)
}

pub fn curves_csv(curves: &[Curve]) -> String {
    let mut out = String::from(
        "strategy,cycle,seeds,reading_cost_mean,reading_cost_std,labeling_cost_mean,labeling_cost_std,metric_mean,metric_std\n",
    );
    for c in curves {
        for p in &c.points {
            let _ = writeln!(
                out,
                "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
                c.label, p.cycle, p.seeds, p.reading.0, p.reading.1, p.labeling.0, p.labeling.1, p.metric.0, p.metric.1
            );
        }
    }
    out
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 52.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// A "nice" tick step covering `span` in about five steps.
fn tick_step(span: f64) -> f64 {
    if span <= 0.0 || !span.is_finite() {
        return 1.0;
    }
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm <= 1.0 {
        1.0
    } else if norm <= 2.0 {
        2.0
    } else if norm <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn fmt_tick(v: f64, step: f64) -> String {
    if step >= 1.0 {
        format!("{v:.0}")
    } else {
        let digits = (-step.log10().floor()) as usize;
        format!("{v:.digits$}")
    }
}

/// Metric against cumulative cost; one shaded curve per run.
pub fn curves_svg(curves: &[Curve], axis: CostAxis) -> String {
    let x_of = |p: &CurvePoint| match axis {
        CostAxis::Reading => p.reading.0,
        CostAxis::Labeling => p.labeling.0,
    };
    let pts = curves.iter().flat_map(|c| c.points.iter());
    let x_max = pts.clone().map(x_of).fold(0.0f64, f64::max);
    let y_lo = pts
        .clone()
        .map(|p| p.metric.0 - p.metric.1)
        .fold(f64::INFINITY, f64::min);
    let y_hi = pts.map(|p| p.metric.0 + p.metric.1).fold(f64::NEG_INFINITY, f64::max);
    let (y_lo, y_hi) = if y_lo.is_finite() {
        ((y_lo * 20.0).floor() / 20.0, (y_hi * 20.0).ceil() / 20.0)
    } else {
        (0.0, 1.0)
    };
    let y_lo = y_lo.max(0.0);
    let y_hi = if y_hi <= y_lo {
        y_lo + 0.05
    } else {
        y_hi.min(1.0).max(y_lo + 0.05)
    };
    let x_step = tick_step(x_max);
    let x_hi = (x_max / x_step).ceil().max(1.0) * x_step;
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + x / x_hi * plot_w;
    let sy = |y: f64| TOP + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h;

    let task = curves.first().map_or("", |c| c.task.as_str());
    let metric = metric_name(task);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="14">{} vs {} cost ({})</text>"#,
        LEFT + plot_w / 2.0,
        escape(metric),
        axis.name(),
        escape(task)
    );
    // Grid and ticks.
    let mut x = 0.0;
    while x <= x_hi + x_step * 1e-9 {
        let px = sx(x);
        let _ = writeln!(
            s,
            r##"<line x1="{px:.2}" y1="{TOP:.2}" x2="{px:.2}" y2="{:.2}" stroke="#e0e0e0"/>"##,
            TOP + plot_h
        );
        let _ = writeln!(
            s,
            r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + plot_h + 16.0,
            fmt_tick(x, x_step)
        );
        x += x_step;
    }
    let y_step = tick_step(y_hi - y_lo);
    let mut y = (y_lo / y_step).ceil() * y_step;
    while y <= y_hi + y_step * 1e-9 {
        let py = sy(y);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT:.2}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#e0e0e0"/>"##,
            LEFT + plot_w
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            py + 4.0,
            fmt_tick(y, y_step)
        );
        y += y_step;
    }
    let _ = writeln!(
        s,
        r##"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="#333333"/>"##
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{} cost</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        axis.name()
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0,
        escape(metric)
    );

    for (k, c) in curves.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let upper: Vec<String> = c
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", sx(x_of(p)), sy((p.metric.0 + p.metric.1).min(y_hi))))
            .collect();
        let lower: Vec<String> = c
            .points
            .iter()
            .rev()
            .map(|p| format!("{:.2},{:.2}", sx(x_of(p)), sy((p.metric.0 - p.metric.1).max(y_lo))))
            .collect();
        let _ = writeln!(
            s,
            r#"<polygon points="{} {}" fill="{color}" fill-opacity="0.18" stroke="none"/>"#,
            upper.join(" "),
            lower.join(" ")
        );
        let mean: Vec<String> = c
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", sx(x_of(p)), sy(p.metric.0)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            mean.join(" ")
        );
        for p in &c.points {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#,
                sx(x_of(p)),
                sy(p.metric.0)
            );
        }
        let ly = TOP + 12.0 + 18.0 * k as f64;
        let lx = WIDTH - RIGHT + 14.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 26.0,
            ly + 4.0,
            escape(&c.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `report.csv`, `<task>_reading.svg` and `<task>_labeling.svg`
/// into `out`.
pub fn write_report(dirs: &[&Path], out: &Path) -> Result<Vec<std::path::PathBuf>> {
    if dirs.is_empty() {
        return Err(Error::Empty("no run directories given".into()));
    }
    let curves = load_curves(dirs)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let task = curves[0].task.clone();
    let files = [
        (out.join("report.csv"), curves_csv(&curves)),
        (
            out.join(format!("{task}_reading.svg")),
            curves_svg(&curves, CostAxis::Reading),
        ),
        (
            out.join(format!("{task}_labeling.svg")),
            curves_svg(&curves, CostAxis::Labeling),
        ),
    ];
    let mut written = Vec::new();
    for (path, text) in files {
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
