//! Single-series pipeline: load, analyse, write reports.

use std::path::Path;

use decouple_core::ensemble::{analyze_returns, AnalysisOptions, RunMetrics, StylizedFacts};
use decouple_core::multiscaling::{self, legendre_transform, SingularitySpectrum};
use decouple_core::stats::{self, PowerLawFit, ShapeClassification};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult, IoContext};
use crate::ingest::{ingest_csv, ColumnSpec, IngestReport};
use crate::plot::{self, emit_plot_data};
use crate::report::{
    write_acf_csv, write_hist_csv, write_json, write_scaling_csv, write_spectrum_csv,
};
use crate::trail::{is_trail_file, read_trail_csv, FORMAT_VERSION, TOOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceMeta {
    /// `trail` or `empirical`.
    pub kind: String,
    pub path: String,
    pub label: String,
    pub n_prices: usize,
    pub seed: Option<u64>,
    pub run_index: Option<u64>,
    pub config_hash: Option<String>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub first_date: Option<String>,
    pub last_date: Option<String>,
    pub ingest: Option<IngestReport>,
}

/// Loads the first price component of a trail file, or the closes of an
/// empirical file, and returns its log returns.
pub fn load_returns(path: &Path, columns: &ColumnSpec) -> AppResult<(Vec<f64>, SourceMeta)> {
    if !path.exists() {
        return Err(AppError::data(path, "no such file"));
    }
    if is_trail_file(path)? {
        let file = read_trail_csv(path)?;
        let t = file.trail;
        let pair = t.meta.strategies;
        let meta = SourceMeta {
            kind: "trail".into(),
            path: path.display().to_string(),
            label: file.meta.get("config_hash").cloned().unwrap_or_default(),
            n_prices: t.len(),
            seed: t.meta.seed,
            run_index: t.meta.run_index,
            config_hash: file.meta.get("config_hash").cloned(),
            a: pair.map(|p| p.a()),
            b: pair.map(|p| p.b()),
            first_date: None,
            last_date: None,
            ingest: None,
        };
        return Ok((t.returns, meta));
    }
    let s = ingest_csv(path, columns)?;
    let returns = stats::log_returns(&s.closes)?;
    let meta = SourceMeta {
        kind: "empirical".into(),
        path: path.display().to_string(),
        label: s.label.clone(),
        n_prices: s.closes.len(),
        seed: None,
        run_index: None,
        config_hash: None,
        a: None,
        b: None,
        first_date: s.dates.first().map(|d| d.to_string()),
        last_date: s.dates.last().map(|d| d.to_string()),
        ingest: Some(s.report),
    };
    Ok((returns, meta))
}

/// Shrinks `acf_max_tau` to a tenth of the series and drops analyses the
/// series is too short for. Returns the notes describing what changed.
pub fn fit_options_to_length(
    options: &mut AnalysisOptions,
    n: usize,
    explicit_tau: bool,
) -> AppResult<Vec<String>> {
    let mut notes = Vec::new();
    if options.analyses.acf && options.acf_max_tau > n.div_ceil(10) {
        if explicit_tau {
            return Err(AppError::Usage(format!(
                "--max-tau {} needs at least {} returns, series has {n}",
                options.acf_max_tau,
                options.acf_max_tau * 10 - 9
            )));
        }
        options.acf_max_tau = n.div_ceil(10);
        if n < 10 {
            options.analyses.acf = false;
            notes.push(format!("acf skipped: {n} returns"));
        } else {
            notes.push(format!("acf_max_tau reduced to {}", options.acf_max_tau));
        }
    }
    if options.analyses.scaling && multiscaling::dyadic_lags(n).len() < 2 {
        options.analyses.scaling = false;
        notes.push(format!("scaling skipped: {n} returns"));
    }
    Ok(notes)
}

pub struct Analysis {
    pub metrics: RunMetrics,
    pub spectrum: Option<SingularitySpectrum>,
    pub facts: StylizedFacts,
}

pub fn analyze_series(returns: &[f64], options: &AnalysisOptions) -> AppResult<Analysis> {
    let metrics = analyze_returns(returns, options)?;
    let spectrum = match &metrics.scaling {
        Some(s) => Some(legendre_transform(&s.qs, &s.zeta)?),
        None => None,
    };
    let facts = StylizedFacts::from_metrics(&metrics);
    Ok(Analysis {
        metrics,
        spectrum,
        facts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingBrief {
    pub lag_grid: Vec<usize>,
    pub spread: f64,
    pub min_fit_r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSummary {
    pub format_version: u32,
    pub kind: String,
    pub tool: String,
    pub source: SourceMeta,
    pub options: AnalysisOptions,
    pub notes: Vec<String>,
    pub n_returns: usize,
    pub facts: StylizedFacts,
    pub acf_fits: Vec<PowerLawFit>,
    pub shape: Option<ShapeClassification>,
    pub histogram_outside: Option<(u64, u64)>,
    pub scaling: Option<ScalingBrief>,
    pub spectrum_points: Option<usize>,
    pub spectrum_dropped: Option<usize>,
}

#[derive(Serialize)]
struct FullReport<'a> {
    summary: &'a AnalysisSummary,
    metrics: &'a RunMetrics,
    spectrum: &'a Option<SingularitySpectrum>,
}

pub fn summarize(
    analysis: &Analysis,
    source: SourceMeta,
    options: &AnalysisOptions,
    notes: Vec<String>,
    n_returns: usize,
) -> AnalysisSummary {
    let m = &analysis.metrics;
    AnalysisSummary {
        format_version: FORMAT_VERSION,
        kind: "analysis".into(),
        tool: TOOL.into(),
        source,
        options: options.clone(),
        notes,
        n_returns,
        facts: analysis.facts.clone(),
        acf_fits: m.acf.as_ref().map(|a| a.fits.clone()).unwrap_or_default(),
        shape: m.distribution.as_ref().and_then(|d| d.shape),
        histogram_outside: m.distribution.as_ref().map(|d| (d.below, d.above)),
        scaling: m.scaling.as_ref().map(|s| ScalingBrief {
            lag_grid: s.lag_grid.clone(),
            spread: s.spread,
            min_fit_r2: s.fit_r2.iter().copied().fold(f64::INFINITY, f64::min),
        }),
        spectrum_points: analysis.spectrum.as_ref().map(|s| s.alphas.len()),
        spectrum_dropped: analysis.spectrum.as_ref().map(|s| s.dropped),
    }
}

/// Writes `acf.csv`, `scaling.csv`, `spectrum.csv`, `hist.csv` and
/// `summary.json` (CSV format) or `report.json` and `summary.json` (JSON).
pub fn write_analysis(
    dir: &Path,
    analysis: &Analysis,
    summary: &AnalysisSummary,
    format: Format,
    plots: bool,
) -> AppResult<()> {
    std::fs::create_dir_all(dir).at(dir)?;
    let m = &analysis.metrics;
    match format {
        Format::Csv => {
            if let Some(acf) = &m.acf {
                write_acf_csv(&dir.join("acf.csv"), acf)?;
            }
            if let Some(s) = &m.scaling {
                write_scaling_csv(&dir.join("scaling.csv"), s)?;
            }
            if let Some(s) = &analysis.spectrum {
                write_spectrum_csv(&dir.join("spectrum.csv"), s)?;
            }
            if let Some(h) = &m.distribution {
                write_hist_csv(&dir.join("hist.csv"), h)?;
            }
        }
        Format::Json => write_json(
            &dir.join("report.json"),
            &FullReport {
                summary,
                metrics: m,
                spectrum: &analysis.spectrum,
            },
        )?,
    }
    write_json(&dir.join("summary.json"), summary)?;
    if plots {
        let label = summary.source.label.as_str();
        if let Some(acf) = &m.acf {
            emit_plot_data(dir, "acf_decay", &plot::acf_plot(label, acf))?;
        }
        if let Some(s) = &m.scaling {
            emit_plot_data(
                dir,
                "multiscaling",
                &plot::multiscaling_plot(&[(label, &s.qs, &s.hq)], None),
            )?;
        }
        if let Some(h) = &m.distribution {
            emit_plot_data(dir, "log_density", &plot::log_density_plot(&[(label, h)]))?;
        }
    }
    Ok(())
}
