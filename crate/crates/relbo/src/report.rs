//! Convergence reports: `curves.csv`, one SVG figure per suite and a
//! markdown summary of the final medians.
//!
//! The CSV is the source of truth. Figures are rendered from the curves as
//! read back from the CSV, so every plotted coordinate can be recomputed
//! from it.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use relbo_core::acquisition::AcquisitionKind;
use relbo_core::problems::SUITE_LAYOUT;
use relbo_core::report::{aggregate, AggregateCurve, Trajectory, LOG_FLOOR};
use walkdir::WalkDir;

use crate::experiment::{Manifest, MANIFEST};
use crate::trace::{fmt_f64, parse_f64, read_trace};

/// A curve together with the suite (problem mode) it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteCurve {
    pub suite: String,
    pub curve: AggregateCurve,
}

/// Which runs to include.
#[derive(Debug, Clone, Default)]
pub struct Filter {
    pub problems: Vec<String>,
    pub algorithms: Vec<String>,
}

impl Filter {
    fn keep(&self, problem: &str, algorithm: &str) -> bool {
        (self.problems.is_empty() || self.problems.iter().any(|p| p == problem))
            && (self.algorithms.is_empty() || self.algorithms.iter().any(|a| a == algorithm))
    }
}

/// Finds every manifest under `root` and aggregates the completed repeats
/// by (suite, problem, algorithm).
pub fn collect(root: &Path, filter: &Filter) -> Result<Vec<SuiteCurve>> {
    let mut groups: BTreeMap<(String, String, String), Vec<Trajectory>> = BTreeMap::new();
    let mut manifests: Vec<PathBuf> = WalkDir::new(root)
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file() && e.file_name() == MANIFEST)
        .map(|e| e.into_path())
        .collect();
    manifests.sort();
    if manifests.is_empty() {
        bail!("no {MANIFEST} found under {}", root.display());
    }
    for mpath in manifests {
        let m = Manifest::load(&mpath)?;
        if !filter.keep(&m.problem, &m.algorithm) {
            continue;
        }
        let dir = mpath.parent().expect("manifest has a parent");
        for rep in m.repeats.iter().filter(|r| r.status == "complete") {
            let tpath = dir.join(&rep.trace);
            let t = read_trace(&tpath)?;
            if !t.is_complete() {
                continue;
            }
            let (n, p): (Vec<usize>, Vec<f64>) = t.checkpoints().map(|(n, c)| (n, c.p_true)).unzip();
            groups
                .entry((m.mode.clone(), m.problem.clone(), m.algorithm.clone()))
                .or_default()
                .push(Trajectory { label: tpath.display().to_string(), n, p });
        }
    }
    groups
        .into_iter()
        .map(|((suite, problem, algorithm), traces)| {
            Ok(SuiteCurve { suite, curve: aggregate(&problem, &algorithm, &traces)? })
        })
        .collect()
}

pub const CURVES_HEADER: &str = "suite,problem,algorithm,repeats,n,lower,median,upper,floored";

/// `*` when a value is clamped to the log-axis floor in the figure.
fn floored_mark(vals: [f64; 3]) -> &'static str {
    if vals.iter().any(|&v| !(v >= LOG_FLOOR)) { "*" } else { "" }
}

pub fn write_curves_csv(curves: &[SuiteCurve]) -> String {
    let mut out = String::from(CURVES_HEADER);
    out.push('\n');
    for sc in curves {
        let c = &sc.curve;
        for k in 0..c.n.len() {
            let vals = [c.lower[k], c.median[k], c.upper[k]];
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                sc.suite,
                c.problem,
                c.algorithm,
                c.repeats,
                c.n[k],
                fmt_f64(vals[0]),
                fmt_f64(vals[1]),
                fmt_f64(vals[2]),
                floored_mark(vals)
            )
            .expect("string write");
        }
    }
    out
}

pub fn read_curves_csv(text: &str) -> Result<Vec<SuiteCurve>> {
    let mut lines = text.lines();
    if lines.next() != Some(CURVES_HEADER) {
        bail!("unexpected curves header");
    }
    let mut out: Vec<SuiteCurve> = Vec::new();
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            bail!("curves row {}: expected 9 fields", i + 1);
        }
        let (suite, problem, algorithm) = (f[0], f[1], f[2]);
        let repeats: usize = f[3].parse().with_context(|| format!("curves row {}", i + 1))?;
        let n: usize = f[4].parse().with_context(|| format!("curves row {}", i + 1))?;
        let same = out.last().is_some_and(|s| s.suite == suite && s.curve.problem == problem && s.curve.algorithm == algorithm);
        if !same {
            out.push(SuiteCurve {
                suite: suite.into(),
                curve: AggregateCurve {
                    problem: problem.into(),
                    algorithm: algorithm.into(),
                    n: Vec::new(),
                    lower: Vec::new(),
                    median: Vec::new(),
                    upper: Vec::new(),
                    repeats,
                },
            });
        }
        let c = &mut out.last_mut().expect("pushed above").curve;
        c.n.push(n);
        c.lower.push(parse_f64(f[5])?);
        c.median.push(parse_f64(f[6])?);
        c.upper.push(parse_f64(f[7])?);
    }
    Ok(out)
}

const COLORS: [&str; 7] = ["#d62728", "#ff7f0e", "#9467bd", "#2ca02c", "#1f77b4", "#8c564b", "#7f7f7f"];
const EXTRA_COLORS: [&str; 5] = ["#e377c2", "#bcbd22", "#17becf", "#393b79", "#637939"];

/// Fixed colors for the built-in strategies, then a cycle for other labels.
fn color_for(algorithm: &str, others: &[String]) -> &'static str {
    if let Some(i) = AcquisitionKind::ALL.iter().position(|k| k.as_str() == algorithm) {
        return COLORS[i];
    }
    let i = others.iter().position(|a| a == algorithm).unwrap_or(0);
    EXTRA_COLORS[i % EXTRA_COLORS.len()]
}

const PANEL_W: f64 = 260.0;
const PANEL_H: f64 = 200.0;
const MARGIN_L: f64 = 52.0;
const MARGIN_T: f64 = 24.0;
const PLOT_W: f64 = 190.0;
const PLOT_H: f64 = 140.0;

/// Mapping from data to panel coordinates.
#[derive(Debug, Clone, Copy)]
pub struct Axes {
    pub n_min: f64,
    pub n_max: f64,
    pub log_min: f64,
    pub log_max: f64,
    pub x0: f64,
    pub y0: f64,
}

impl Axes {
    fn for_curves(curves: &[&AggregateCurve], x0: f64, y0: f64) -> Self {
        let (mut n_min, mut n_max) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for c in curves {
            for k in 0..c.n.len() {
                n_min = n_min.min(c.n[k] as f64);
                n_max = n_max.max(c.n[k] as f64);
                for v in [c.lower[k], c.median[k], c.upper[k]] {
                    let l = v.max(LOG_FLOOR).log10();
                    lo = lo.min(l);
                    hi = hi.max(l);
                }
            }
        }
        let mut log_min = lo.floor();
        let mut log_max = hi.ceil();
        if log_max <= log_min {
            log_min -= 1.0;
            log_max += 1.0;
        }
        if n_max <= n_min {
            n_max = n_min + 1.0;
        }
        Self { n_min, n_max, log_min, log_max, x0, y0 }
    }

    pub fn x(&self, n: usize) -> f64 {
        self.x0 + MARGIN_L + PLOT_W * (n as f64 - self.n_min) / (self.n_max - self.n_min)
    }

    pub fn y(&self, p: f64) -> f64 {
        let l = p.max(LOG_FLOOR).log10();
        self.y0 + MARGIN_T + PLOT_H * (self.log_max - l) / (self.log_max - self.log_min)
    }
}

/// Panel slots: the 3×4 suite layout when every problem belongs to it,
/// otherwise rows of four in name order.
fn layout(problems: &[String]) -> (usize, usize, Vec<(String, usize)>) {
    if problems.iter().all(|p| SUITE_LAYOUT.contains(&p.as_str())) {
        let slots = SUITE_LAYOUT
            .iter()
            .enumerate()
            .filter(|(_, name)| problems.iter().any(|p| p == *name))
            .map(|(i, name)| (name.to_string(), i))
            .collect();
        return (3, 4, slots);
    }
    let cols = problems.len().clamp(1, 4);
    let rows = problems.len().div_ceil(cols);
    (rows, cols, problems.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect())
}

/// Renders one suite as an SVG document with one panel per problem.
pub fn render_svg(suite: &str, curves: &[&AggregateCurve]) -> Result<String> {
    if curves.is_empty() {
        bail!("no curves to plot for suite `{suite}`");
    }
    let mut problems: Vec<String> = curves.iter().map(|c| c.problem.clone()).collect();
    problems.sort();
    problems.dedup();
    let mut others: Vec<String> = curves
        .iter()
        .map(|c| c.algorithm.clone())
        .filter(|a| !AcquisitionKind::ALL.iter().any(|k| k.as_str() == a))
        .collect();
    others.sort();
    others.dedup();
    let mut algorithms: Vec<String> = curves.iter().map(|c| c.algorithm.clone()).collect();
    algorithms.sort_by_key(|a| (AcquisitionKind::ALL.iter().position(|k| k.as_str() == a).unwrap_or(usize::MAX), a.clone()));
    algorithms.dedup();

    let (rows, cols, slots) = layout(&problems);
    let legend_h = 20.0 * algorithms.len().div_ceil(4) as f64 + 10.0;
    let width = cols as f64 * PANEL_W;
    let height = rows as f64 * PANEL_H + legend_h + 24.0;
    let mut s = String::new();
    writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#)?;
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="10">"#
    )?;
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#)?;
    writeln!(s, r#"<text x="8" y="16" font-size="12">Failure probability of the recommended design ({suite})</text>"#)?;
    for (problem, slot) in &slots {
        let (r, c) = (slot / cols, slot % cols);
        let (x0, y0) = (c as f64 * PANEL_W, 24.0 + r as f64 * PANEL_H);
        let panel: Vec<&AggregateCurve> = curves.iter().copied().filter(|cv| &cv.problem == problem).collect();
        let ax = Axes::for_curves(&panel, x0, y0);
        writeln!(s, r#"<g class="panel" data-problem="{problem}">"#)?;
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="11">{problem}</text>"#, x0 + MARGIN_L, y0 + MARGIN_T - 8.0)?;
        writeln!(
            s,
            r##"<rect x="{:.2}" y="{:.2}" width="{PLOT_W:.2}" height="{PLOT_H:.2}" fill="none" stroke="#444"/>"##,
            x0 + MARGIN_L,
            y0 + MARGIN_T
        )?;
        let mut e = ax.log_min as i32;
        while e <= ax.log_max as i32 {
            let y = ax.y(10f64.powi(e));
            writeln!(s, r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/>"##, x0 + MARGIN_L, x0 + MARGIN_L + PLOT_W)?;
            writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{e}</text>"#, x0 + MARGIN_L - 4.0, y + 3.0)?;
            e += 1;
        }
        for n in [ax.n_min as usize, ax.n_max as usize] {
            writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{n}</text>"#, ax.x(n), y0 + MARGIN_T + PLOT_H + 12.0)?;
        }
        for cv in &panel {
            let color = color_for(&cv.algorithm, &others);
            let mut band = String::new();
            for k in 0..cv.n.len() {
                write!(band, "{:.2},{:.2} ", ax.x(cv.n[k]), ax.y(cv.upper[k]))?;
            }
            for k in (0..cv.n.len()).rev() {
                write!(band, "{:.2},{:.2} ", ax.x(cv.n[k]), ax.y(cv.lower[k]))?;
            }
            let line: Vec<String> = (0..cv.n.len()).map(|k| format!("{:.2},{:.2}", ax.x(cv.n[k]), ax.y(cv.median[k]))).collect();
            writeln!(
                s,
                r#"<polygon class="band" data-algorithm="{}" points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
                cv.algorithm,
                band.trim_end()
            )?;
            writeln!(
                s,
                r#"<polyline class="median" data-algorithm="{}" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                cv.algorithm,
                line.join(" ")
            )?;
        }
        writeln!(s, "</g>")?;
    }
    let ly = 24.0 + rows as f64 * PANEL_H + 10.0;
    for (i, a) in algorithms.iter().enumerate() {
        let (lx, yy) = (12.0 + (i % 4) as f64 * 180.0, ly + 20.0 * (i / 4) as f64);
        let color = color_for(a, &others);
        writeln!(s, r#"<line x1="{lx:.2}" y1="{yy:.2}" x2="{:.2}" y2="{yy:.2}" stroke="{color}" stroke-width="3"/>"#, lx + 20.0)?;
        writeln!(s, r#"<text x="{:.2}" y="{:.2}">{a}</text>"#, lx + 26.0, yy + 3.0)?;
    }
    writeln!(s, "</svg>")?;
    Ok(s)
}

/// Markdown tables of the final-evaluation median and quartiles.
pub fn render_summary(curves: &[SuiteCurve]) -> String {
    let mut s = String::from("# Summary\n\nMedian true failure probability of the final recommendation, with the interquartile range and the number of repeats.\n");
    let mut suites: Vec<&str> = curves.iter().map(|c| c.suite.as_str()).collect();
    suites.dedup();
    suites.sort();
    suites.dedup();
    for suite in suites {
        let sc: Vec<&AggregateCurve> = curves.iter().filter(|c| c.suite == suite).map(|c| &c.curve).collect();
        let mut algs: Vec<&str> = sc.iter().map(|c| c.algorithm.as_str()).collect();
        algs.sort_by_key(|a| (AcquisitionKind::ALL.iter().position(|k| k.as_str() == *a).unwrap_or(usize::MAX), a.to_string()));
        algs.dedup();
        let mut probs: Vec<&str> = sc.iter().map(|c| c.problem.as_str()).collect();
        probs.sort_by_key(|p| (SUITE_LAYOUT.iter().position(|q| q == p).unwrap_or(usize::MAX), p.to_string()));
        probs.dedup();
        let _ = write!(s, "\n## {suite}\n\n| problem |");
        for a in &algs {
            let _ = write!(s, " {a} |");
        }
        s.push_str("\n|---|");
        s.push_str(&"---|".repeat(algs.len()));
        s.push('\n');
        for p in probs {
            let _ = write!(s, "| {p} |");
            for a in &algs {
                match sc.iter().find(|c| c.problem == p && c.algorithm == *a) {
                    Some(c) if !c.n.is_empty() => {
                        let k = c.n.len() - 1;
                        let _ = write!(s, " {:.3e} [{:.3e}, {:.3e}] (n = {}, {}) |", c.median[k], c.lower[k], c.upper[k], c.n[k], c.repeats);
                    }
                    _ => s.push_str(" |"),
                }
            }
            s.push('\n');
        }
    }
    s
}

/// Writes `curves.csv`, `fig_<suite>.svg` and `summary.md` into `out`.
pub fn write_report(input: &Path, filter: &Filter, out: &Path) -> Result<Vec<PathBuf>> {
    let curves = collect(input, filter)?;
    if curves.is_empty() {
        bail!("no completed repeats match the filter under {}", input.display());
    }
    std::fs::create_dir_all(out)?;
    let csv = write_curves_csv(&curves);
    let csv_path = out.join("curves.csv");
    std::fs::write(&csv_path, &csv)?;
    let back = read_curves_csv(&csv)?;
    if back != curves {
        return Err(anyhow!("curves.csv does not reproduce the aggregated curves"));
    }
    let mut written = vec![csv_path];
    let mut suites: Vec<&str> = back.iter().map(|c| c.suite.as_str()).collect();
    suites.sort();
    suites.dedup();
    for suite in suites {
        let cs: Vec<&AggregateCurve> = back.iter().filter(|c| c.suite == suite).map(|c| &c.curve).collect();
        let path = out.join(format!("fig_{suite}.svg"));
        std::fs::write(&path, render_svg(suite, &cs)?)?;
        written.push(path);
    }
    let path = out.join("summary.md");
    std::fs::write(&path, render_summary(&back))?;
    written.push(path);
    Ok(written)
}
