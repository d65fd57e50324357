//! Plot-ready data plus a renderer-agnostic description of each figure.
//!
//! Every figure is a `<stem>.dat` file holding one whitespace-separated
//! block per series (blocks separated by two blank lines, missing values as
//! `nan`) and a `<stem>.plot.json` naming axes, scales, blocks and columns.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use decouple_core::ensemble::{AcfSummary, DecayRecord};
use decouple_core::multiscaling::ControlCalibration;
use decouple_core::stats::{AcfReport, DistributionReport};
use serde::Serialize;

use crate::error::{AppResult, IoContext};
use crate::report::write_json;
use crate::trail::{FORMAT_VERSION, TOOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    /// `ln` observable against `t`.
    Convergence,
    /// `C_α(τ)` on log-log axes.
    AcfDecay,
    /// `h_q` against `q`.
    Multiscaling,
    /// Log-density of standardised returns.
    LogDensity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Linear,
    Log,
}

/// Lower and upper edges, one entry per point.
pub type Band = (Vec<Option<f64>>, Vec<Option<f64>>);

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<Option<f64>>,
    pub band: Option<Band>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotData {
    pub kind: PlotKind,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_scale: Scale,
    pub y_scale: Scale,
    /// Free-text annotations, echoed into the data header.
    pub notes: Vec<String>,
    pub series: Vec<Series>,
}

#[derive(Serialize)]
struct SeriesSpec<'a> {
    label: &'a str,
    block: usize,
    columns: Vec<&'static str>,
}

#[derive(Serialize)]
struct PlotSpec<'a> {
    format_version: u32,
    tool: &'static str,
    kind: PlotKind,
    title: &'a str,
    data_file: String,
    x: Axis<'a>,
    y: Axis<'a>,
    notes: &'a [String],
    series: Vec<SeriesSpec<'a>>,
}

#[derive(Serialize)]
struct Axis<'a> {
    label: &'a str,
    scale: Scale,
}

fn num(v: Option<f64>) -> String {
    match v {
        Some(v) if v.is_finite() => format!("{v:?}"),
        _ => "nan".into(),
    }
}

/// Writes `<dir>/<stem>.dat` and `<dir>/<stem>.plot.json`.
pub fn emit_plot_data(dir: &Path, stem: &str, plot: &PlotData) -> AppResult<Vec<PathBuf>> {
    let dat = dir.join(format!("{stem}.dat"));
    let spec = dir.join(format!("{stem}.plot.json"));
    let mut text = String::new();
    writeln!(text, "# {}", plot.title).unwrap();
    for note in &plot.notes {
        writeln!(text, "# {note}").unwrap();
    }
    for (k, s) in plot.series.iter().enumerate() {
        if k > 0 {
            text.push_str("\n\n");
        }
        let cols = if s.band.is_some() { "x y lo hi" } else { "x y" };
        writeln!(text, "# block {k}: {} ({cols})", s.label).unwrap();
        for (i, &x) in s.x.iter().enumerate() {
            write!(text, "{} {}", num(Some(x)), num(s.y[i])).unwrap();
            if let Some((lo, hi)) = &s.band {
                write!(text, " {} {}", num(lo[i]), num(hi[i])).unwrap();
            }
            text.push('\n');
        }
    }
    std::fs::write(&dat, text).at(&dat)?;
    let desc = PlotSpec {
        format_version: FORMAT_VERSION,
        tool: TOOL,
        kind: plot.kind,
        title: &plot.title,
        data_file: format!("{stem}.dat"),
        x: Axis {
            label: &plot.x_label,
            scale: plot.x_scale,
        },
        y: Axis {
            label: &plot.y_label,
            scale: plot.y_scale,
        },
        notes: &plot.notes,
        series: plot
            .series
            .iter()
            .enumerate()
            .map(|(block, s)| SeriesSpec {
                label: &s.label,
                block,
                columns: if s.band.is_some() {
                    vec!["x", "y", "lo", "hi"]
                } else {
                    vec!["x", "y"]
                },
            })
            .collect(),
    };
    write_json(&spec, &desc)?;
    Ok(vec![dat, spec])
}

/// Mean log observable with its fitted line; the fit goes into the header.
pub fn convergence_plot(rec: &DecayRecord) -> PlotData {
    let x: Vec<f64> = rec.mean_curve.iter().map(|&(t, _)| t as f64).collect();
    let y = rec.mean_curve.iter().map(|&(_, v)| Some(v)).collect();
    let mut notes = vec![format!(
        "observable: {:?}; a = {}, b = {}, seeds = {}",
        rec.observable, rec.spec.a, rec.spec.b, rec.spec.seeds
    )];
    let mut series = vec![Series {
        label: "mean log observable".into(),
        x: x.clone(),
        y,
        band: None,
    }];
    if let Some(fit) = rec.mean_curve_fit {
        notes.push(format!(
            "linear fit: slope = {:?}, intercept = {:?}, r2 = {:?}",
            fit.slope, fit.intercept, fit.r2
        ));
        series.push(Series {
            label: "linear fit".into(),
            y: x.iter()
                .map(|t| Some(fit.intercept + fit.slope * t))
                .collect(),
            x,
            band: None,
        });
    }
    if let Some(p) = rec.predicted {
        notes.push(format!(
            "predicted rate: {:?} +/- {:?} ({} samples)",
            p.mean, p.stderr, p.n_samples
        ));
    }
    PlotData {
        kind: PlotKind::Convergence,
        title: "Exponential convergence".into(),
        x_label: "t".into(),
        y_label: "ln observable".into(),
        x_scale: Scale::Linear,
        y_scale: Scale::Linear,
        notes,
        series,
    }
}

fn positive(v: Option<f64>) -> Option<f64> {
    v.filter(|&c| c > 0.0)
}

/// One curve per alpha, `τ ≥ 1`; non-positive values are written as `nan`.
pub fn acf_plot_series(
    label: &str,
    alphas: &[u32],
    taus: &[usize],
    values: &[Vec<Option<f64>>],
) -> Vec<Series> {
    alphas
        .iter()
        .zip(values)
        .map(|(a, curve)| Series {
            label: format!("{label} C{a}"),
            x: taus[1..].iter().map(|&t| t as f64).collect(),
            y: curve[1..].iter().map(|&v| positive(v)).collect(),
            band: None,
        })
        .collect()
}

pub fn acf_plot(label: &str, acf: &AcfReport) -> PlotData {
    acf_figure(
        acf_plot_series(label, &acf.alphas, &acf.taus, &acf.values),
        Vec::new(),
    )
}

/// Ensemble means with `±2·sd` bands; variance columns stay in the CSVs.
pub fn acf_ensemble_plot(label: &str, acf: &AcfSummary) -> PlotData {
    let series = acf
        .alphas
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let edge = |sign: f64| -> Vec<Option<f64>> {
                acf.mean[k][1..]
                    .iter()
                    .zip(&acf.std_dev[k][1..])
                    .map(|(m, s)| positive(Some((*m)? + sign * 2.0 * (*s)?)))
                    .collect()
            };
            Series {
                label: format!("{label} <C{a}>"),
                x: acf.taus[1..].iter().map(|&t| t as f64).collect(),
                y: acf.mean[k][1..].iter().map(|&v| positive(v)).collect(),
                band: Some((edge(-1.0), edge(1.0))),
            }
        })
        .collect();
    acf_figure(
        series,
        vec!["band: mean +/- 2 standard deviations across runs".into()],
    )
}

pub fn acf_figure(series: Vec<Series>, notes: Vec<String>) -> PlotData {
    PlotData {
        kind: PlotKind::AcfDecay,
        title: "Autocorrelation of |Z|^alpha".into(),
        x_label: "tau".into(),
        y_label: "C_alpha(tau)".into(),
        x_scale: Scale::Log,
        y_scale: Scale::Log,
        notes,
        series,
    }
}

/// `h_q` curves, with the monofractal control band when given.
pub fn multiscaling_plot(
    curves: &[(&str, &[f64], &[f64])],
    control: Option<&ControlCalibration>,
) -> PlotData {
    let mut series: Vec<Series> = curves
        .iter()
        .map(|(label, qs, hq)| Series {
            label: label.to_string(),
            x: qs.to_vec(),
            y: hq.iter().map(|&h| Some(h)).collect(),
            band: None,
        })
        .collect();
    let mut notes = Vec::new();
    if let Some(c) = control {
        notes.push(format!(
            "control: {:?}, length {}, {} seeds; band = 2.5%..97.5% of h_q",
            c.generator,
            c.length,
            c.spreads.len()
        ));
        series.push(Series {
            label: "control median".into(),
            x: c.qs.clone(),
            y: c.hq_median.iter().map(|&h| Some(h)).collect(),
            band: Some((
                c.hq_low.iter().map(|&h| Some(h)).collect(),
                c.hq_high.iter().map(|&h| Some(h)).collect(),
            )),
        });
    }
    PlotData {
        kind: PlotKind::Multiscaling,
        title: "Multiscaling spectrum h_q".into(),
        x_label: "q".into(),
        y_label: "h_q".into(),
        x_scale: Scale::Linear,
        y_scale: Scale::Linear,
        notes,
        series,
    }
}

pub fn log_density_plot(curves: &[(&str, &DistributionReport)]) -> PlotData {
    let series = curves
        .iter()
        .map(|(label, h)| Series {
            label: label.to_string(),
            x: h.bin_edges
                .windows(2)
                .map(|w| 0.5 * (w[0] + w[1]))
                .collect(),
            y: h.log_density.clone(),
            band: None,
        })
        .collect();
    let notes = curves
        .iter()
        .filter_map(|(label, h)| {
            h.shape.map(|s| {
                format!(
                    "{label}: shape {:?} (statistic {:?}), excess kurtosis {:?}",
                    s.class, s.statistic, h.excess_kurtosis
                )
            })
        })
        .collect();
    PlotData {
        kind: PlotKind::LogDensity,
        title: "Log-density of standardised returns".into(),
        x_label: "z".into(),
        y_label: "ln density".into(),
        x_scale: Scale::Linear,
        y_scale: Scale::Linear,
        notes,
        series,
    }
}
