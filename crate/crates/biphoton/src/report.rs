//! Report assembly and file I/O: the versioned JSON report, the plain-text
//! summary table, and the count-grid / histogram CSV formats.
//!
//! # Count-grid CSV, version 1
//!
//! ```text
//! # biphoton countgrid v1
//! # distribution: joint_spectrum
//! # signal-axis: kind=frequency center=2586.9 step=0.66 n=128
//! # idler-axis: kind=frequency center=2276.9 step=0.605625 n=128
//! # total-expected: 1000000
//! # master-seed: 42
//! # generator: splitmix64-chacha8-poisson/v1
//! 0,0,1,...        <- n_idler integers per row
//! ...              <- n_signal rows, signal axis ascending
//! ```
//!
//! Rows follow the signal axis ascending, columns the idler axis ascending.
//! Axis floats are written in Rust's shortest round-trip form, so a parsed
//! grid is bit-identical to the written one.
//!
//! Histogram CSV files carry two comment lines (label and axis unit) followed
//! by `center,weight` lines.

use std::io::{BufRead, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimate::{AnalyzedGrid, Hist1D};
use crate::grid::{Axis, AxisKind, CountGrid, Grid2D, GridError};
use crate::scenario::Scenario;
use crate::witness::{Verdict, WitnessReport};

pub const COUNTGRID_MAGIC: &str = "# biphoton countgrid v1";
pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed count-grid CSV {path}: {reason}")]
    MalformedCsv { path: String, reason: String },
    #[error(transparent)]
    Grid(#[from] GridError),
}

fn io_err(path: &Path, source: std::io::Error) -> ReportError {
    ReportError::Io {
        path: path.display().to_string(),
        source,
    }
}

// ---------------------------------------------------------------------------
// Report structure
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

impl ToolInfo {
    pub fn current() -> Self {
        Self {
            name: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub master_seed: u64,
    pub generator: String,
    pub mc_trials: usize,
    pub significance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisInfo {
    pub kind: String,
    pub unit: String,
    pub center: f64,
    pub step: f64,
    pub n: usize,
}

impl AxisInfo {
    pub fn from_axis(axis: &Axis) -> Self {
        Self {
            kind: axis.kind.label().to_string(),
            unit: axis.kind.unit().to_string(),
            center: axis.center,
            step: axis.step,
            n: axis.n,
        }
    }
}

/// A fitted width with raw and deconvolved values, errors, and unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthEntry {
    pub raw: f64,
    pub raw_error: f64,
    pub deconvolved: f64,
    pub deconvolved_error: f64,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEntry {
    pub raw: f64,
    pub raw_error: f64,
    pub deconvolved: f64,
    pub deconvolved_error: f64,
    /// Set when the deconvolved correlation had to be clamped into (-1, 1),
    /// which signals responses inconsistent with the data.
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterEntry {
    pub value: f64,
    pub error: f64,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub label: String,
    pub signal_axis: AxisInfo,
    pub idler_axis: AxisInfo,
    pub total_counts: u64,
    pub center_s: CenterEntry,
    pub center_i: CenterEntry,
    pub signal_marginal: WidthEntry,
    pub signal_heralded: WidthEntry,
    pub idler_marginal: WidthEntry,
    pub idler_heralded: WidthEntry,
    pub correlation: CorrelationEntry,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width_sum: Option<WidthEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width_diff: Option<WidthEntry>,
}

impl DistributionReport {
    /// Assemble one distribution's section from an analyzed grid.
    pub fn from_analysis(label: &str, counts: &CountGrid, analysis: &AnalyzedGrid) -> Self {
        let grid = &counts.grid;
        let unit_s = grid.signal.kind.unit().to_string();
        let unit_i = grid.idler.kind.unit().to_string();
        let raw = &analysis.fit.summary;
        let dec = &analysis.deconvolved.summary;
        let re = &analysis.raw_errors;
        let de = &analysis.dec_errors;
        let width = |r: f64, re_: f64, d: f64, de_: f64, unit: &str| WidthEntry {
            raw: r,
            raw_error: re_,
            deconvolved: d,
            deconvolved_error: de_,
            unit: unit.to_string(),
        };
        let rotated_unit = unit_s.clone();
        DistributionReport {
            label: label.to_string(),
            signal_axis: AxisInfo::from_axis(&grid.signal),
            idler_axis: AxisInfo::from_axis(&grid.idler),
            total_counts: counts.total(),
            center_s: CenterEntry {
                value: analysis.fit.marginal_fit_s.center,
                error: analysis.center_errors.0,
                unit: unit_s.clone(),
            },
            center_i: CenterEntry {
                value: analysis.fit.marginal_fit_i.center,
                error: analysis.center_errors.1,
                unit: unit_i.clone(),
            },
            signal_marginal: width(raw.marginal_s, re.marginal_s, dec.marginal_s, de.marginal_s, &unit_s),
            signal_heralded: width(raw.heralded_s, re.heralded_s, dec.heralded_s, de.heralded_s, &unit_s),
            idler_marginal: width(raw.marginal_i, re.marginal_i, dec.marginal_i, de.marginal_i, &unit_i),
            idler_heralded: width(raw.heralded_i, re.heralded_i, dec.heralded_i, de.heralded_i, &unit_i),
            correlation: CorrelationEntry {
                raw: raw.rho,
                raw_error: re.rho,
                deconvolved: dec.rho,
                deconvolved_error: de.rho,
                clamped: analysis.deconvolved.rho_clamped,
            },
            width_sum: raw.width_sum.map(|w| {
                width(
                    w,
                    re.width_sum.unwrap_or(0.0),
                    dec.width_sum.unwrap_or(f64::NAN),
                    de.width_sum.unwrap_or(0.0),
                    &rotated_unit,
                )
            }),
            width_diff: raw.width_diff.map(|w| {
                width(
                    w,
                    re.width_diff.unwrap_or(0.0),
                    dec.width_diff.unwrap_or(f64::NAN),
                    de.width_diff.unwrap_or(0.0),
                    &rotated_unit,
                )
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub tool: ToolInfo,
    pub provenance: Provenance,
    pub scenario: Scenario,
    pub distributions: Vec<DistributionReport>,
    pub witnesses: Vec<WitnessReport>,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    pub fn any_inconclusive(&self) -> bool {
        self.witnesses
            .iter()
            .any(|w| w.verdict == Verdict::Inconclusive)
    }

    /// Aligned plain-text summary: the two joint distributions side by side,
    /// then the time-frequency plots, rotated widths, and witnesses.
    pub fn to_text_table(&self) -> String {
        let mut out = String::new();
        let push = |out: &mut String, line: &str| {
            out.push_str(line);
            out.push('\n');
        };
        push(
            &mut out,
            &format!(
                "biphoton report  |  scenario {}  |  seed {}  |  {} MC trials",
                self.scenario.run.name, self.provenance.master_seed, self.provenance.mc_trials
            ),
        );
        push(&mut out, "values are raw, deconvolved in parentheses");
        push(&mut out, "");

        let find = |label: &str| self.distributions.iter().find(|d| d.label == label);
        let spectrum = find("joint_spectrum");
        let temporal = find("joint_temporal");
        if spectrum.is_some() || temporal.is_some() {
            push(
                &mut out,
                &format!(
                    "{:<24}{:<34}{:<34}",
                    "property", "joint spectrum", "joint temporal"
                ),
            );
            let rows: [(&str, fn(&DistributionReport) -> String); 5] = [
                ("signal marginal width", |d| fmt_width(&d.signal_marginal)),
                ("signal heralded width", |d| fmt_width(&d.signal_heralded)),
                ("idler marginal width", |d| fmt_width(&d.idler_marginal)),
                ("idler heralded width", |d| fmt_width(&d.idler_heralded)),
                ("correlation", |d| fmt_corr(&d.correlation)),
            ];
            for (name, cell) in rows {
                let a = spectrum.map(cell).unwrap_or_default();
                let b = temporal.map(cell).unwrap_or_default();
                push(&mut out, &format!("{name:<24}{a:<34}{b:<34}"));
            }
            let sum_a = spectrum.and_then(|d| d.width_sum.as_ref()).map(fmt_width);
            let sum_b = temporal.and_then(|d| d.width_sum.as_ref()).map(fmt_width);
            let diff_a = spectrum.and_then(|d| d.width_diff.as_ref()).map(fmt_width);
            let diff_b = temporal.and_then(|d| d.width_diff.as_ref()).map(fmt_width);
            push(
                &mut out,
                &format!(
                    "{:<24}{:<34}{:<34}",
                    "sum width",
                    sum_a.unwrap_or_default(),
                    sum_b.unwrap_or_default()
                ),
            );
            push(
                &mut out,
                &format!(
                    "{:<24}{:<34}{:<34}",
                    "difference width",
                    diff_a.unwrap_or_default(),
                    diff_b.unwrap_or_default()
                ),
            );
            push(&mut out, "");
        }

        for d in &self.distributions {
            if d.label == "joint_spectrum" || d.label == "joint_temporal" {
                continue;
            }
            push(&mut out, &format!("{}:", d.label.replace('_', " ")));
            push(
                &mut out,
                &format!("  signal marginal   {}", fmt_width(&d.signal_marginal)),
            );
            push(
                &mut out,
                &format!("  signal heralded   {}", fmt_width(&d.signal_heralded)),
            );
            push(
                &mut out,
                &format!("  idler marginal    {}", fmt_width(&d.idler_marginal)),
            );
            push(
                &mut out,
                &format!("  idler heralded    {}", fmt_width(&d.idler_heralded)),
            );
            push(
                &mut out,
                &format!("  correlation       {}", fmt_corr(&d.correlation)),
            );
            push(&mut out, "");
        }

        if !self.witnesses.is_empty() {
            push(
                &mut out,
                &format!(
                    "{:<34}{:>12}{:>12}{:>11}{:>14}  verdict",
                    "witness", "value", "error", "threshold", "sigma"
                ),
            );
            for w in &self.witnesses {
                let verdict = match w.verdict {
                    Verdict::Violated => "violated",
                    Verdict::NotViolated => "not violated",
                    Verdict::Inconclusive => "inconclusive",
                };
                push(
                    &mut out,
                    &format!(
                        "{:<34}{:>12}{:>12}{:>11}{:>14}  {verdict}",
                        w.name,
                        fmt_num(w.value),
                        fmt_num(w.error),
                        fmt_num(w.threshold),
                        fmt_num(w.sigma_distance),
                    ),
                );
            }
        }
        out
    }
}

fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else if v.abs() < 1e-3 || v.abs() >= 1e5 {
        format!("{v:.3e}")
    } else {
        format!("{v:.4}")
    }
}

fn fmt_width(w: &WidthEntry) -> String {
    format!(
        "{} ± {} ({} ± {}) {}",
        fmt_num(w.raw),
        fmt_num(w.raw_error),
        fmt_num(w.deconvolved),
        fmt_num(w.deconvolved_error),
        w.unit
    )
}

fn fmt_corr(c: &CorrelationEntry) -> String {
    let clamp = if c.clamped { " [clamped]" } else { "" };
    format!(
        "{} ± {} ({} ± {}){clamp}",
        fmt_num(c.raw),
        fmt_num(c.raw_error),
        fmt_num(c.deconvolved),
        fmt_num(c.deconvolved_error)
    )
}

// ---------------------------------------------------------------------------
// Count-grid CSV
// ---------------------------------------------------------------------------

/// Write a count grid in the versioned CSV format. `label` names the
/// distribution; `master_seed` is the scenario seed the per-distribution
/// stream was derived from.
pub fn write_count_grid_csv(
    path: &Path,
    counts: &CountGrid,
    label: &str,
    master_seed: u64,
    generator: &str,
) -> Result<(), ReportError> {
    let mut buf = String::new();
    buf.push_str(COUNTGRID_MAGIC);
    buf.push('\n');
    buf.push_str(&format!("# distribution: {label}\n"));
    for (name, axis) in [("signal", &counts.grid.signal), ("idler", &counts.grid.idler)] {
        buf.push_str(&format!(
            "# {name}-axis: kind={} center={} step={} n={}\n",
            axis.kind.label(),
            axis.center,
            axis.step,
            axis.n
        ));
    }
    buf.push_str(&format!("# total-expected: {}\n", counts.total_expected));
    buf.push_str(&format!("# master-seed: {master_seed}\n"));
    buf.push_str(&format!("# generator: {generator}\n"));
    let (ns, ni) = counts.grid.shape();
    for j in 0..ns {
        for k in 0..ni {
            if k > 0 {
                buf.push(',');
            }
            buf.push_str(&counts.counts[(j, k)].to_string());
        }
        buf.push('\n');
    }
    std::fs::write(path, buf).map_err(|e| io_err(path, e))
}

/// A parsed count-grid CSV: the grid, its distribution label, and the master
/// seed recorded at write time.
#[derive(Debug, Clone)]
pub struct ParsedCountGrid {
    pub counts: CountGrid,
    pub label: String,
    pub master_seed: u64,
    pub generator: String,
}

pub fn read_count_grid_csv(path: &Path) -> Result<ParsedCountGrid, ReportError> {
    let malformed = |reason: &str| ReportError::MalformedCsv {
        path: path.display().to_string(),
        reason: reason.to_string(),
    };
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let reader = std::io::BufReader::new(file);

    let mut label = None;
    let mut axes: [Option<Axis>; 2] = [None, None];
    let mut total_expected = None;
    let mut master_seed = None;
    let mut generator = String::new();
    let mut rows: Vec<Vec<u64>> = Vec::new();
    let mut saw_magic = false;

    for line in reader.lines() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if line == COUNTGRID_MAGIC {
                saw_magic = true;
            } else if let Some(v) = comment.strip_prefix("distribution:") {
                label = Some(v.trim().to_string());
            } else if let Some(v) = comment.strip_prefix("signal-axis:") {
                axes[0] = Some(parse_axis(v).ok_or_else(|| malformed("bad signal-axis line"))?);
            } else if let Some(v) = comment.strip_prefix("idler-axis:") {
                axes[1] = Some(parse_axis(v).ok_or_else(|| malformed("bad idler-axis line"))?);
            } else if let Some(v) = comment.strip_prefix("total-expected:") {
                total_expected =
                    Some(v.trim().parse::<f64>().map_err(|_| malformed("bad total-expected"))?);
            } else if let Some(v) = comment.strip_prefix("master-seed:") {
                master_seed =
                    Some(v.trim().parse::<u64>().map_err(|_| malformed("bad master-seed"))?);
            } else if let Some(v) = comment.strip_prefix("generator:") {
                generator = v.trim().to_string();
            }
            continue;
        }
        let row: Result<Vec<u64>, _> = line.split(',').map(|c| c.trim().parse::<u64>()).collect();
        rows.push(row.map_err(|_| malformed("non-integer count value"))?);
    }

    if !saw_magic {
        return Err(malformed("missing 'biphoton countgrid v1' header"));
    }
    let signal = axes[0].ok_or_else(|| malformed("missing signal-axis header"))?;
    let idler = axes[1].ok_or_else(|| malformed("missing idler-axis header"))?;
    let label = label.ok_or_else(|| malformed("missing distribution header"))?;
    let master_seed = master_seed.ok_or_else(|| malformed("missing master-seed header"))?;
    let total_expected = total_expected.ok_or_else(|| malformed("missing total-expected header"))?;
    if rows.len() != signal.n {
        return Err(malformed(&format!(
            "expected {} rows, found {}",
            signal.n,
            rows.len()
        )));
    }
    if rows.iter().any(|r| r.len() != idler.n) {
        return Err(malformed("row length does not match idler axis"));
    }
    let mut counts = Array2::zeros((signal.n, idler.n));
    for (j, row) in rows.iter().enumerate() {
        for (k, &c) in row.iter().enumerate() {
            counts[(j, k)] = c;
        }
    }
    let grid = Grid2D::new(signal, idler);
    Ok(ParsedCountGrid {
        counts: CountGrid::new(grid, counts, total_expected, master_seed)?,
        label,
        master_seed,
        generator,
    })
}

fn parse_axis(text: &str) -> Option<Axis> {
    let mut kind = None;
    let mut center = None;
    let mut step = None;
    let mut n = None;
    for field in text.split_whitespace() {
        let (key, value) = field.split_once('=')?;
        match key {
            "kind" => {
                kind = Some(match value {
                    "frequency" => AxisKind::Frequency,
                    "time" => AxisKind::Time,
                    _ => return None,
                })
            }
            "center" => center = value.parse().ok(),
            "step" => step = value.parse().ok(),
            "n" => n = value.parse().ok(),
            _ => return None,
        }
    }
    Axis::new(kind?, center?, step?, n?).ok()
}

// ---------------------------------------------------------------------------
// Histogram CSV
// ---------------------------------------------------------------------------

pub fn write_hist_csv(path: &Path, hist: &Hist1D, label: &str) -> Result<(), ReportError> {
    let file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    (|| -> std::io::Result<()> {
        writeln!(w, "# biphoton hist v1")?;
        writeln!(w, "# label: {label}")?;
        writeln!(w, "# unit: {}", hist.kind.unit())?;
        writeln!(w, "center,weight")?;
        for (c, wt) in hist.centers.iter().zip(&hist.weights) {
            writeln!(w, "{c},{wt}")?;
        }
        w.flush()
    })()
    .map_err(|e| io_err(path, e))
}
