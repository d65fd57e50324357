use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use decouple_core::ensemble::{convergence_study, AnalysisOptions, ConvergenceSpec, StylizedFacts};
use decouple_core::model::simulate_trail;
use decouple_core::multiscaling::{ControlCalibration, ControlGenerator};
use serde::Serialize;

use crate::analysis::{
    analyze_series, fit_options_to_length, load_returns, summarize, write_analysis, Format,
    SourceMeta,
};
use crate::config::{sweep_spec_from, KeyValues, SimulationKeys};
use crate::error::{AppError, AppResult, IoContext, EXIT_OK, EXIT_USAGE};
use crate::ingest::ColumnSpec;
use crate::plot::{self, emit_plot_data, Series};
use crate::report::{fmt, read_numeric_csv, write_json};
use crate::sweep::{
    control_calibration_parallel, default_threads, read_cell_report, run_sweep_parallel,
    write_sweep,
};
use crate::trail::{write_trail_csv, FORMAT_VERSION, TOOL};

#[derive(Debug, Parser)]
#[command(
    name = "decouple",
    version,
    about = "Coupled slow/fast price dynamics: simulation, ensembles and stylized facts"
)]
pub struct Cli {
    /// Master seed; overrides the seed in a config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// `key = value` config file (simulation keys for `simulate`, sweep keys for `sweep`).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "decouple-out")]
    pub out_dir: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one trail and write prices and returns.
    Simulate(SimulateArgs),
    /// Analyse a trail or an empirical close-price CSV.
    Analyze(AnalyzeArgs),
    /// Run an ensemble sweep described by `--config`.
    Sweep(SweepArgs),
    /// Put a sweep cell next to an empirical series.
    Compare(CompareArgs),
    /// Calibrate the multiscaling estimator on monofractal controls.
    Controls(ControlsArgs),
    /// Exponential convergence in the convergent regime.
    Converge(ConvergeArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub rb0: Option<f64>,
    #[arg(long)]
    pub length: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub epsilon_floor: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ColumnArgs {
    #[arg(long, default_value = "date")]
    pub date_column: String,
    #[arg(long, default_value = "close")]
    pub close_column: String,
    /// `chrono` format string, e.g. `%m/%d/%Y`; ISO-8601 when absent.
    #[arg(long)]
    pub date_format: Option<String>,
}

impl ColumnArgs {
    fn spec(&self) -> ColumnSpec {
        ColumnSpec {
            date: self.date_column.clone(),
            close: self.close_column.clone(),
            date_format: self.date_format.clone(),
        }
    }
}

#[derive(Debug, Args)]
pub struct EstimatorArgs {
    /// Largest ACF lag; defaults to min(500, n/10).
    #[arg(long)]
    pub max_tau: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub fit_lo: usize,
    #[arg(long, default_value_t = 200)]
    pub fit_hi: usize,
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
    /// Also write plot data files.
    #[arg(long)]
    pub plots: bool,
}

impl EstimatorArgs {
    fn options(&self) -> AnalysisOptions {
        let mut o = AnalysisOptions::default();
        if let Some(t) = self.max_tau {
            o.acf_max_tau = t;
        }
        o.acf_fit_range = (self.fit_lo, self.fit_hi);
        o.hist_bins = self.bins;
        o
    }
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub columns: ColumnArgs,
    #[command(flatten)]
    pub estimators: EstimatorArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Worker threads; output does not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Write wall time to `timing.json`.
    #[arg(long)]
    pub timing: bool,
    #[arg(long)]
    pub plots: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// A sweep cell directory, e.g. `sweep/0.4_0.44`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub empirical: PathBuf,
    /// `controls.json` whose Gaussian band is overlaid on h_q.
    #[arg(long)]
    pub controls: Option<PathBuf>,
    #[command(flatten)]
    pub columns: ColumnArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GeneratorChoice {
    Gaussian,
    Multiplicative,
    Both,
}

#[derive(Debug, Args)]
pub struct ControlsArgs {
    #[arg(long, value_enum, default_value_t = GeneratorChoice::Both)]
    pub generator: GeneratorChoice,
    #[arg(long, default_value_t = 20_000)]
    pub length: usize,
    #[arg(long, default_value_t = 200)]
    pub seeds: usize,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ConvergeArgs {
    #[arg(long, default_value_t = 0.5)]
    pub a: f64,
    #[arg(long, default_value_t = 0.45)]
    pub b: f64,
    #[arg(long, default_value_t = 0.5)]
    pub rb0: f64,
    #[arg(long, default_value_t = 5000)]
    pub length: usize,
    #[arg(long, default_value_t = 32)]
    pub seeds: usize,
    #[arg(long, default_value_t = 100)]
    pub fit_start: usize,
    #[arg(long, default_value_t = 100_000)]
    pub entropy_samples: usize,
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn dispatch(cli: &Cli) -> AppResult<()> {
    match &cli.command {
        Command::Simulate(a) => simulate(cli, a),
        Command::Analyze(a) => analyze(cli, a),
        Command::Sweep(a) => sweep(cli, a),
        Command::Compare(a) => compare(cli, a),
        Command::Controls(a) => controls(cli, a),
        Command::Converge(a) => converge(cli, a),
    }
}

fn simulate(cli: &Cli, args: &SimulateArgs) -> AppResult<()> {
    let file = match &cli.config {
        Some(p) => SimulationKeys::from_kv(KeyValues::load(p)?)?,
        None => SimulationKeys::default(),
    };
    let cfg = file
        .overlay(SimulationKeys {
            a: args.a,
            b: args.b,
            rb0: args.rb0,
            length: args.length,
            burn_in: args.burn_in,
            seed: cli.seed,
            epsilon_floor: args.epsilon_floor,
        })
        .build()?;
    let trail = simulate_trail(&cfg)?;
    std::fs::create_dir_all(&cli.out_dir).at(&cli.out_dir)?;
    match cli.format {
        Format::Csv => write_trail_csv(&cli.out_dir.join("trail.csv"), &trail, &cfg),
        Format::Json => write_json(
            &cli.out_dir.join("trail.json"),
            &serde_json::json!({
                "format_version": FORMAT_VERSION,
                "kind": "trail",
                "tool": TOOL,
                "config": cfg,
                "config_hash": cfg.config_hash(),
                "trail": trail,
            }),
        ),
    }
}

fn analyze(cli: &Cli, args: &AnalyzeArgs) -> AppResult<()> {
    let (returns, source) = load_returns(&args.input, &args.columns.spec())?;
    let mut options = args.estimators.options();
    let notes = fit_options_to_length(
        &mut options,
        returns.len(),
        args.estimators.max_tau.is_some(),
    )?;
    let analysis = analyze_series(&returns, &options)?;
    let summary = summarize(&analysis, source, &options, notes, returns.len());
    write_analysis(
        &cli.out_dir,
        &analysis,
        &summary,
        cli.format,
        args.estimators.plots,
    )
}

fn sweep(cli: &Cli, args: &SweepArgs) -> AppResult<()> {
    let Some(path) = &cli.config else {
        return Err(AppError::Usage("sweep needs --config <sweep file>".into()));
    };
    let mut spec = sweep_spec_from(KeyValues::load(path)?)?;
    if let Some(s) = cli.seed {
        spec.master_seed = s;
    }
    let threads = args.threads.unwrap_or_else(default_threads);
    let start = Instant::now();
    let cells = run_sweep_parallel(&spec, threads)?;
    let elapsed = args.timing.then(|| start.elapsed());
    write_sweep(&cli.out_dir, &spec, &cells, elapsed, args.plots)?;
    for c in &cells {
        if c.flags.high_failure_rate {
            eprintln!(
                "warning: cell ({}, {}) failed {} of {} runs",
                c.a, c.b, c.failed, c.runs
            );
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct CompareRow {
    property: &'static str,
    model: Option<f64>,
    empirical: Option<f64>,
}

#[derive(Serialize)]
struct CompareSide<'a> {
    source: String,
    facts: &'a StylizedFacts,
}

#[derive(Serialize)]
struct CompareReport<'a> {
    format_version: u32,
    kind: &'static str,
    tool: &'static str,
    model: CompareSide<'a>,
    model_provenance: &'a decouple_core::ensemble::Provenance,
    empirical: CompareSide<'a>,
    empirical_source: &'a SourceMeta,
    rows: Vec<CompareRow>,
}

fn fact_rows(m: &StylizedFacts, e: &StylizedFacts) -> Vec<CompareRow> {
    let gamma = |f: &StylizedFacts, a: u32| {
        f.alphas
            .iter()
            .position(|&x| x == a)
            .and_then(|i| f.gamma[i])
    };
    let mut rows = vec![
        CompareRow {
            property: "excess_kurtosis",
            model: m.excess_kurtosis,
            empirical: e.excess_kurtosis,
        },
        CompareRow {
            property: "shape_statistic",
            model: m.shape.map(|s| s.statistic),
            empirical: e.shape.map(|s| s.statistic),
        },
        CompareRow {
            property: "mean_c2_tau_1_100",
            model: m.mean_c2_short,
            empirical: e.mean_c2_short,
        },
        CompareRow {
            property: "hq_spread",
            model: m.hq_spread,
            empirical: e.hq_spread,
        },
    ];
    for (a, name) in [(1, "gamma_1"), (2, "gamma_2"), (3, "gamma_3")] {
        rows.push(CompareRow {
            property: name,
            model: gamma(m, a),
            empirical: gamma(e, a),
        });
    }
    rows
}

fn read_controls(path: &Path) -> AppResult<Vec<ControlCalibration>> {
    let text = std::fs::read_to_string(path).at(path)?;
    let v: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| AppError::data(path, e.to_string()))?;
    serde_json::from_value(v["calibrations"].clone())
        .map_err(|e| AppError::data(path, e.to_string()))
}

/// `tau,c1,c2,c3` curves from a model cell's `acf.csv`.
fn model_acf_series(dir: &Path, label: &str) -> AppResult<Vec<Series>> {
    let path = dir.join("acf.csv");
    if !path.exists() {
        return Ok(Vec::new());
    }
    let (headers, rows) = read_numeric_csv(&path)?;
    Ok((1..headers.len())
        .map(|k| Series {
            label: format!("{label} <{}>", headers[k].to_uppercase()),
            x: rows.iter().skip(1).filter_map(|r| r[0]).collect(),
            y: rows
                .iter()
                .skip(1)
                .map(|r| r[k].filter(|&v| v > 0.0))
                .collect(),
            band: None,
        })
        .collect())
}

fn model_density_series(dir: &Path, label: &str) -> AppResult<Option<Series>> {
    let path = dir.join("hist.csv");
    if !path.exists() {
        return Ok(None);
    }
    let (_, rows) = read_numeric_csv(&path)?;
    Ok(Some(Series {
        label: label.to_string(),
        x: rows
            .iter()
            .map(|r| 0.5 * (r[0].unwrap_or(0.0) + r[1].unwrap_or(0.0)))
            .collect(),
        y: rows.iter().map(|r| r[3]).collect(),
        band: None,
    }))
}

fn compare(cli: &Cli, args: &CompareArgs) -> AppResult<()> {
    let model = read_cell_report(&args.model)?;
    let (returns, source) = load_returns(&args.empirical, &args.columns.spec())?;
    let mut options = AnalysisOptions::default();
    let notes = fit_options_to_length(&mut options, returns.len(), false)?;
    let analysis = analyze_series(&returns, &options)?;
    let empirical_facts = analysis.facts.clone();
    let model_label = format!("model ([{}],({}))", model.a, model.b);
    let empirical_label = source.label.clone();

    std::fs::create_dir_all(&cli.out_dir).at(&cli.out_dir)?;
    let report = CompareReport {
        format_version: FORMAT_VERSION,
        kind: "compare",
        tool: TOOL,
        model: CompareSide {
            source: args.model.display().to_string(),
            facts: &model.facts,
        },
        model_provenance: &model.provenance,
        empirical: CompareSide {
            source: args.empirical.display().to_string(),
            facts: &empirical_facts,
        },
        empirical_source: &source,
        rows: fact_rows(&model.facts, &empirical_facts),
    };
    write_json(&cli.out_dir.join("compare.json"), &report)?;
    let summary = summarize(&analysis, source.clone(), &options, notes, returns.len());
    write_analysis(
        &cli.out_dir.join("empirical"),
        &analysis,
        &summary,
        cli.format,
        false,
    )?;

    let mut acf_series = model_acf_series(&args.model, &model_label)?;
    if let Some(acf) = &analysis.metrics.acf {
        acf_series.extend(plot::acf_plot_series(
            &empirical_label,
            &acf.alphas,
            &acf.taus,
            &acf.values,
        ));
    }
    emit_plot_data(
        &cli.out_dir,
        "compare_acf",
        &plot::acf_figure(acf_series, Vec::new()),
    )?;

    let control = match &args.controls {
        Some(p) => read_controls(p)?
            .into_iter()
            .find(|c| c.generator == ControlGenerator::GaussianWalk),
        None => None,
    };
    let mut curves: Vec<(&str, &[f64], &[f64])> = Vec::new();
    if !model.facts.hq.is_empty() {
        curves.push((&model_label, &model.facts.qs, &model.facts.hq));
    }
    if !empirical_facts.hq.is_empty() {
        curves.push((&empirical_label, &empirical_facts.qs, &empirical_facts.hq));
    }
    emit_plot_data(
        &cli.out_dir,
        "compare_multiscaling",
        &plot::multiscaling_plot(&curves, control.as_ref()),
    )?;

    let mut density = match &analysis.metrics.distribution {
        Some(h) => plot::log_density_plot(&[(&empirical_label, h)]),
        None => plot::log_density_plot(&[]),
    };
    if let Some(s) = model_density_series(&args.model, &model_label)? {
        density.series.insert(0, s);
    }
    emit_plot_data(&cli.out_dir, "compare_log_density", &density)?;
    Ok(())
}

#[derive(Serialize)]
struct ControlsReport<'a> {
    format_version: u32,
    kind: &'static str,
    tool: &'static str,
    master_seed: u64,
    calibrations: &'a [ControlCalibration],
}

fn controls(cli: &Cli, args: &ControlsArgs) -> AppResult<()> {
    let generators: &[ControlGenerator] = match args.generator {
        GeneratorChoice::Gaussian => &[ControlGenerator::GaussianWalk],
        GeneratorChoice::Multiplicative => &[ControlGenerator::MultiplicativeWalk],
        GeneratorChoice::Both => &[
            ControlGenerator::GaussianWalk,
            ControlGenerator::MultiplicativeWalk,
        ],
    };
    let seed = cli.seed.unwrap_or(0);
    let threads = args.threads.unwrap_or_else(default_threads);
    let calibrations = generators
        .iter()
        .map(|&g| control_calibration_parallel(g, args.length, args.seeds, seed, threads))
        .collect::<AppResult<Vec<_>>>()?;
    std::fs::create_dir_all(&cli.out_dir).at(&cli.out_dir)?;
    write_json(
        &cli.out_dir.join("controls.json"),
        &ControlsReport {
            format_version: FORMAT_VERSION,
            kind: "controls",
            tool: TOOL,
            master_seed: seed,
            calibrations: &calibrations,
        },
    )?;
    let mut band = String::from("generator,q,hq_low,hq_median,hq_high\n");
    for c in &calibrations {
        for i in 0..c.qs.len() {
            band.push_str(&format!(
                "{:?},{},{},{},{}\n",
                c.generator,
                fmt(c.qs[i]),
                fmt(c.hq_low[i]),
                fmt(c.hq_median[i]),
                fmt(c.hq_high[i])
            ));
        }
    }
    let path = cli.out_dir.join("control_band.csv");
    std::fs::write(&path, band).at(&path)?;
    for c in &calibrations {
        let stem = match c.generator {
            ControlGenerator::GaussianWalk => "controls_gaussian",
            ControlGenerator::MultiplicativeWalk => "controls_multiplicative",
        };
        emit_plot_data(&cli.out_dir, stem, &plot::multiscaling_plot(&[], Some(c)))?;
        println!(
            "{:?}: length {}, {} seeds, spread median {:.4}, 95th percentile {:.4}",
            c.generator,
            c.length,
            c.spreads.len(),
            c.spread_median,
            c.spread_p95
        );
    }
    Ok(())
}

fn converge(cli: &Cli, args: &ConvergeArgs) -> AppResult<()> {
    let spec = ConvergenceSpec {
        a: args.a,
        b: args.b,
        rb0: args.rb0,
        length: args.length,
        seeds: args.seeds,
        master_seed: cli.seed.unwrap_or(0),
        fit_start: args.fit_start,
        entropy_samples: args.entropy_samples,
    };
    let record = convergence_study(&spec)?;
    std::fs::create_dir_all(&cli.out_dir).at(&cli.out_dir)?;
    write_json(
        &cli.out_dir.join("convergence.json"),
        &serde_json::json!({
            "format_version": FORMAT_VERSION,
            "kind": "convergence",
            "tool": TOOL,
            "record": record,
        }),
    )?;
    if !record.mean_curve.is_empty() {
        emit_plot_data(
            &cli.out_dir,
            "convergence",
            &plot::convergence_plot(&record),
        )?;
    }
    if let (Some(slope), Some(p)) = (record.mean_slope, record.predicted) {
        println!(
            "mean slope {slope:.6} +/- {:.6}; predicted {:.6} +/- {:.6}; z = {:.2}",
            record.slope_stderr.unwrap_or(0.0),
            p.mean,
            p.stderr,
            record.z_score.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
