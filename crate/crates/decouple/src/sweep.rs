//! Parallel ensemble driver and the sweep output tree.
//!
//! Runs of a cell are evaluated on a rayon pool, collected in run order and
//! folded serially, so results do not depend on the thread count.

use std::path::{Path, PathBuf};
use std::time::Duration;

use decouple_core::ensemble::{
    analyze_run, summarize_cell, AcfSummary, CellFlags, CellSummary, DistributionSummary,
    Provenance, RunFailure, RunReport, ScalingSummary, StylizedFacts, SweepSpec, WealthSummary,
};
use decouple_core::multiscaling::{
    calibrate, control_report, ControlCalibration, ControlGenerator, ScalingReport,
};
use decouple_core::stats::{PowerLawFit, ShapeClassification};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult, IoContext};
use crate::plot::{self, emit_plot_data};
use crate::report::{
    write_acf_band_csv, write_acf_mean_csv, write_hist_csv, write_json, write_scaling_mean_csv,
};
use crate::trail::{FORMAT_VERSION, TOOL};

pub fn pool(threads: usize) -> AppResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| AppError::Usage(format!("cannot start {threads} worker threads: {e}")))
}

pub fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Same result as `decouple_core::ensemble::run_sweep`, on `threads` workers.
pub fn run_sweep_parallel(spec: &SweepSpec, threads: usize) -> AppResult<Vec<CellSummary>> {
    spec.validate()?;
    let pool = pool(threads)?;
    let mut cells = Vec::new();
    for (a, b) in spec.cells() {
        let reports: Vec<RunReport> = pool.install(|| {
            (0..spec.runs_per_cell as u64)
                .into_par_iter()
                .map(|r| analyze_run(spec, a, b, r))
                .collect()
        });
        cells.push(summarize_cell(spec, a, b, &reports)?);
    }
    Ok(cells)
}

/// Control calibration with seeds spread over `threads` workers.
pub fn control_calibration_parallel(
    generator: ControlGenerator,
    length: usize,
    n_seeds: usize,
    master_seed: u64,
    threads: usize,
) -> AppResult<ControlCalibration> {
    let pool = pool(threads)?;
    let reports: Vec<ScalingReport> = pool.install(|| {
        (0..n_seeds as u64)
            .into_par_iter()
            .map(|r| control_report(generator, length, master_seed, r))
            .collect::<Result<_, _>>()
    })?;
    Ok(calibrate(generator, length, master_seed, &reports)?)
}

pub fn cell_dir_name(a: f64, b: f64) -> String {
    format!("{a}_{b}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcfBrief {
    pub alphas: Vec<u32>,
    pub gamma_mean: Vec<Option<f64>>,
    pub gamma_stderr: Vec<Option<f64>>,
    pub gamma_count: Vec<u64>,
    pub gamma_rejected: Vec<u64>,
    pub fit_range: (usize, usize),
    pub mean_curve_fits: Vec<PowerLawFit>,
}

impl From<&AcfSummary> for AcfBrief {
    fn from(a: &AcfSummary) -> Self {
        Self {
            alphas: a.alphas.clone(),
            gamma_mean: a.gamma_mean.clone(),
            gamma_stderr: a.gamma_stderr.clone(),
            gamma_count: a.gamma_count.clone(),
            gamma_rejected: a.gamma_rejected.clone(),
            fit_range: a.fit_range,
            mean_curve_fits: a.mean_curve_fits.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionBrief {
    pub kurtosis_mean: f64,
    pub kurtosis_stderr: f64,
    pub kurtosis_count: u64,
    pub shape_statistic_mean: f64,
    pub shape_statistic_stderr: f64,
    /// Class of the pooled histogram.
    pub pooled_shape: Option<ShapeClassification>,
    pub pooled_samples: Option<u64>,
    pub pooled_outside: Option<(u64, u64)>,
}

impl From<&DistributionSummary> for DistributionBrief {
    fn from(d: &DistributionSummary) -> Self {
        Self {
            kurtosis_mean: d.kurtosis_mean,
            kurtosis_stderr: d.kurtosis_stderr,
            kurtosis_count: d.kurtosis_count,
            shape_statistic_mean: d.shape_statistic_mean,
            shape_statistic_stderr: d.shape_statistic_stderr,
            pooled_shape: d.pooled.as_ref().and_then(|p| p.shape),
            pooled_samples: d.pooled.as_ref().map(|p| p.n_samples),
            pooled_outside: d.pooled.as_ref().map(|p| (p.below, p.above)),
        }
    }
}

/// `summary.json` of one cell; curves live in the CSVs beside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub format_version: u32,
    pub kind: String,
    pub tool: String,
    pub a: f64,
    pub b: f64,
    pub runs: u64,
    pub completed: u64,
    pub degenerate: u64,
    pub failed: u64,
    pub failure_rate: f64,
    pub flags: CellFlags,
    pub failures: Vec<RunFailure>,
    pub degenerate_runs: Vec<RunFailure>,
    pub facts: StylizedFacts,
    pub acf: Option<AcfBrief>,
    pub distribution: Option<DistributionBrief>,
    pub scaling: Option<ScalingSummary>,
    pub wealth: WealthSummary,
    pub provenance: Provenance,
}

impl From<&CellSummary> for CellReport {
    fn from(c: &CellSummary) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            kind: "cell".into(),
            tool: TOOL.into(),
            a: c.a,
            b: c.b,
            runs: c.runs,
            completed: c.completed,
            degenerate: c.degenerate,
            failed: c.failed,
            failure_rate: c.failure_rate,
            flags: c.flags,
            failures: c.failures.clone(),
            degenerate_runs: c.degenerate_runs.clone(),
            facts: StylizedFacts::from_cell(c),
            acf: c.acf.as_ref().map(AcfBrief::from),
            distribution: c.distribution.as_ref().map(DistributionBrief::from),
            scaling: c.scaling.clone(),
            wealth: c.wealth.clone(),
            provenance: c.provenance.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestCell {
    pub a: f64,
    pub b: f64,
    pub dir: String,
    pub flags: CellFlags,
    pub failed: u64,
    pub degenerate: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub kind: String,
    pub tool: String,
    pub code_version: String,
    pub master_seed: u64,
    pub spec_hash: String,
    pub spec_canonical: String,
    pub spec: SweepSpec,
    pub cells: Vec<ManifestCell>,
}

/// Writes `<out>/manifest.json` and `<out>/<a>_<b>/…` per cell. Wall time,
/// when given, goes to a separate `timing.json` so that everything else is
/// reproducible byte for byte.
pub fn write_sweep(
    out: &Path,
    spec: &SweepSpec,
    cells: &[CellSummary],
    timing: Option<Duration>,
    plots: bool,
) -> AppResult<Vec<PathBuf>> {
    std::fs::create_dir_all(out).at(out)?;
    let mut dirs = Vec::new();
    let mut listed = Vec::new();
    for c in cells {
        let name = cell_dir_name(c.a, c.b);
        let dir = out.join(&name);
        std::fs::create_dir_all(&dir).at(&dir)?;
        write_json(&dir.join("summary.json"), &CellReport::from(c))?;
        if let Some(acf) = &c.acf {
            write_acf_mean_csv(&dir.join("acf.csv"), acf)?;
            write_acf_band_csv(&dir.join("acf_band.csv"), acf)?;
        }
        if let Some(s) = &c.scaling {
            write_scaling_mean_csv(&dir.join("scaling.csv"), s)?;
        }
        if let Some(pooled) = c.distribution.as_ref().and_then(|d| d.pooled.as_ref()) {
            write_hist_csv(&dir.join("hist.csv"), pooled)?;
        }
        if plots {
            let label = format!("([{}],({}))", c.a, c.b);
            if let Some(acf) = &c.acf {
                emit_plot_data(&dir, "acf_decay", &plot::acf_ensemble_plot(&label, acf))?;
            }
            if let Some(s) = &c.scaling {
                emit_plot_data(
                    &dir,
                    "multiscaling",
                    &plot::multiscaling_plot(&[(&label, &s.qs, &s.hq_mean)], None),
                )?;
            }
            if let Some(pooled) = c.distribution.as_ref().and_then(|d| d.pooled.as_ref()) {
                emit_plot_data(
                    &dir,
                    "log_density",
                    &plot::log_density_plot(&[(&label, pooled)]),
                )?;
            }
        }
        listed.push(ManifestCell {
            a: c.a,
            b: c.b,
            dir: name,
            flags: c.flags,
            failed: c.failed,
            degenerate: c.degenerate,
        });
        dirs.push(dir);
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        kind: "sweep".into(),
        tool: TOOL.into(),
        code_version: decouple_core::ensemble::CODE_VERSION.into(),
        master_seed: spec.master_seed,
        spec_hash: spec.spec_hash(),
        spec_canonical: spec.canonical(),
        spec: spec.clone(),
        cells: listed,
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    if let Some(t) = timing {
        write_json(
            &out.join("timing.json"),
            &serde_json::json!({ "wall_seconds": t.as_secs_f64() }),
        )?;
    }
    Ok(dirs)
}

pub fn read_cell_report(dir: &Path) -> AppResult<CellReport> {
    let path = dir.join("summary.json");
    let text = std::fs::read_to_string(&path).at(&path)?;
    let report: CellReport =
        serde_json::from_str(&text).map_err(|e| AppError::data(&path, e.to_string()))?;
    if report.kind != "cell" {
        return Err(AppError::data(&path, "not a sweep cell summary"));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use decouple_core::ensemble::{run_sweep, Analyses, AnalysisOptions};

    fn spec() -> SweepSpec {
        SweepSpec {
            a_grid: vec![0.45],
            b_grid: vec![0.3, 0.6],
            runs_per_cell: 5,
            trail_length: 1000,
            master_seed: 3,
            options: AnalysisOptions {
                analyses: Analyses::ALL,
                acf_max_tau: 50,
                acf_fit_range: (2, 40),
                ..AnalysisOptions::default()
            },
            ..SweepSpec::default()
        }
    }

    #[test]
    fn parallel_matches_serial() {
        let s = spec();
        assert_eq!(run_sweep(&s).unwrap(), run_sweep_parallel(&s, 4).unwrap());
    }

    #[test]
    fn cell_report_round_trips() {
        let s = spec();
        let cells = run_sweep_parallel(&s, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let dirs = write_sweep(dir.path(), &s, &cells, None, true).unwrap();
        assert!(dirs[0].ends_with("0.45_0.3"));
        let back = read_cell_report(&dirs[1]).unwrap();
        assert_eq!(back, CellReport::from(&cells[1]));
        for f in [
            "acf.csv",
            "acf_band.csv",
            "scaling.csv",
            "hist.csv",
            "acf_decay.plot.json",
        ] {
            assert!(dirs[0].join(f).exists(), "{f}");
        }
        assert!(dir.path().join("manifest.json").exists());
        assert!(!dir.path().join("timing.json").exists());
    }

    #[test]
    fn parallel_controls_match_serial() {
        let serial = decouple_core::multiscaling::control_calibration(
            ControlGenerator::GaussianWalk,
            2000,
            6,
            9,
        )
        .unwrap();
        let par =
            control_calibration_parallel(ControlGenerator::GaussianWalk, 2000, 6, 9, 3).unwrap();
        assert_eq!(serial, par);
    }
}
