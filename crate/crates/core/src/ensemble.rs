//! Parameter sweeps over `(a, b)` with many-seed replication.
//!
//! Run `r` of every cell draws from the substreams of `(master_seed, r)`, so
//! cells share their random inputs and differ only in parameters. Per-run
//! reports are folded into [`CellAccumulator`]s in run order; the fold is the
//! only place where order matters, which keeps parallel drivers bitwise
//! reproducible as long as they fold in the same order.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    self, constant_growth_rate, entropy_growth_rate, simulate_run, EntropyEstimate,
    SimulationConfig, StrategyPair, ValueProcess,
};
use crate::multiscaling::{self, ScalingReport};
use crate::stats::{
    self, acf_powers, fit_power_law, linear_fit, AcfReport, DistributionReport, FitStatus,
    LinearFit, Moments, PowerLawFit, ShapeClassifier,
};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Cells with more failed runs than this fraction are flagged.
pub const FAILURE_FLAG_RATE: f64 = 0.01;
/// Failure messages kept per cell; the count is always complete.
pub const MAX_RECORDED_FAILURES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Analyses {
    pub acf: bool,
    pub scaling: bool,
    pub distribution: bool,
    /// Log-wealth decay slope of the fast component.
    pub convergence: bool,
}

impl Analyses {
    pub const ALL: Analyses = Analyses {
        acf: true,
        scaling: true,
        distribution: true,
        convergence: true,
    };
    pub const NONE: Analyses = Analyses {
        acf: false,
        scaling: false,
        distribution: false,
        convergence: false,
    };

    pub fn from_names<'a>(names: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut out = Self::NONE;
        for name in names {
            match name.trim() {
                "acf" => out.acf = true,
                "scaling" => out.scaling = true,
                "distribution" => out.distribution = true,
                "convergence" => out.convergence = true,
                "" => {}
                other => return Err(Error::Config(format!(
                    "unknown analysis '{other}' (expected acf, scaling, distribution, convergence)"
                ))),
            }
        }
        Ok(out)
    }

    pub fn names(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if self.acf {
            v.push("acf");
        }
        if self.scaling {
            v.push("scaling");
        }
        if self.distribution {
            v.push("distribution");
        }
        if self.convergence {
            v.push("convergence");
        }
        v
    }
}

/// Estimator settings shared by sweeps and single-series analysis.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct AnalysisOptions {
    pub analyses: Analyses,
    pub acf_max_tau: usize,
    pub acf_fit_range: (usize, usize),
    pub hist_bins: usize,
    pub hist_half_width: f64,
    pub classifier: ShapeClassifier,
    pub qs: Vec<f64>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            analyses: Analyses {
                acf: true,
                scaling: true,
                distribution: true,
                convergence: false,
            },
            acf_max_tau: 500,
            acf_fit_range: stats::DEFAULT_FIT_RANGE,
            hist_bins: stats::DEFAULT_BINS,
            hist_half_width: stats::DEFAULT_HALF_WIDTH,
            classifier: ShapeClassifier::default(),
            qs: multiscaling::default_qs(),
        }
    }
}

impl AnalysisOptions {
    /// Checks the options against a series of `n` returns.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.analyses.acf && self.acf_max_tau > n.div_ceil(10) {
            return Err(Error::Config(format!(
                "acf_max_tau = {} needs at least {} returns, trail gives {n}",
                self.acf_max_tau,
                self.acf_max_tau * 10 - 9
            )));
        }
        if self.acf_fit_range.0 == 0 || self.acf_fit_range.0 >= self.acf_fit_range.1 {
            return Err(Error::Config(
                "acf fit range must satisfy 0 < lo < hi".into(),
            ));
        }
        if self.analyses.scaling && multiscaling::dyadic_lags(n).len() < 2 {
            return Err(Error::Config(format!(
                "scaling needs at least 8 returns, trail gives {n}"
            )));
        }
        if self.hist_bins < 20 || !(self.hist_half_width > 0.0) {
            return Err(Error::Config(
                "histogram needs >= 20 bins and a positive half-width".into(),
            ));
        }
        Ok(())
    }
}

/// A grid of `(a, b)` cells, each simulated `runs_per_cell` times.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SweepSpec {
    pub a_grid: Vec<f64>,
    pub b_grid: Vec<f64>,
    pub runs_per_cell: usize,
    pub trail_length: usize,
    pub burn_in: usize,
    pub rb0: f64,
    pub master_seed: u64,
    pub value_process: ValueProcess,
    pub options: AnalysisOptions,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            a_grid: vec![0.45],
            b_grid: vec![0.45],
            runs_per_cell: 1000,
            trail_length: SimulationConfig::DEFAULT_LENGTH,
            burn_in: SimulationConfig::DEFAULT_BURN_IN,
            rb0: SimulationConfig::DEFAULT_RB0,
            master_seed: 0,
            value_process: ValueProcess::UniformSimplex,
            options: AnalysisOptions::default(),
        }
    }
}

impl SweepSpec {
    /// Cells in `a`-major order.
    pub fn cells(&self) -> Vec<(f64, f64)> {
        self.a_grid
            .iter()
            .flat_map(|&a| self.b_grid.iter().map(move |&b| (a, b)))
            .collect()
    }

    /// `a ∈ (0, ½]`, `b ∈ [0, 1]`; the closed ends are admitted only so that
    /// they can be run and flagged as convergent.
    pub fn validate(&self) -> Result<()> {
        if self.a_grid.is_empty() || self.b_grid.is_empty() {
            return Err(Error::Config("empty parameter grid".into()));
        }
        for &a in &self.a_grid {
            if !(a > 0.0 && a <= 0.5) {
                return Err(Error::Config(format!("a = {a} outside (0, 1/2]")));
            }
        }
        for &b in &self.b_grid {
            if !(0.0..=1.0).contains(&b) {
                return Err(Error::Config(format!("b = {b} outside [0, 1]")));
            }
        }
        if self.runs_per_cell == 0 {
            return Err(Error::Config("runs_per_cell must be at least 1".into()));
        }
        self.cell_config(self.a_grid[0], self.b_grid[0])?
            .validate()?;
        self.options.validate(self.trail_length.saturating_sub(1))
    }

    pub fn cell_config(&self, a: f64, b: f64) -> Result<SimulationConfig> {
        let pair = StrategyPair::unrestricted(a, b)?;
        let mut cfg = SimulationConfig::new(pair, self.master_seed)
            .with_length(self.trail_length)
            .with_burn_in(self.burn_in)
            .with_rb0(self.rb0);
        cfg.value_process = self.value_process;
        Ok(cfg)
    }

    /// Stable text form; its hash identifies the sweep.
    pub fn canonical(&self) -> String {
        let grid = |g: &[f64]| {
            g.iter()
                .map(|v| format!("{v:?}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        let o = &self.options;
        format!(
            "a_grid={};b_grid={};runs={};length={};burn_in={};rb0={:?};seed={};value={:?};\
             analyses={};max_tau={};fit={}-{};bins={};half_width={:?};classifier={:?}/{:?}/{:?};qs={}",
            grid(&self.a_grid),
            grid(&self.b_grid),
            self.runs_per_cell,
            self.trail_length,
            self.burn_in,
            self.rb0,
            self.master_seed,
            self.value_process,
            o.analyses.names().join("+"),
            o.acf_max_tau,
            o.acf_fit_range.0,
            o.acf_fit_range.1,
            o.hist_bins,
            o.hist_half_width,
            o.classifier.inner,
            o.classifier.outer,
            o.classifier.dead_band,
            grid(&o.qs),
        )
    }

    pub fn spec_hash(&self) -> String {
        model::short_hash(self.canonical().as_bytes())
    }
}

/// Everything computed from one trail.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct RunMetrics {
    pub acf: Option<AcfReport>,
    pub distribution: Option<DistributionReport>,
    pub scaling: Option<ScalingReport>,
    /// Slope of `ln rᵇₜ` against `t` while `rᵇ > 0`.
    pub wealth_decay: Option<LinearFit>,
    pub final_rb: Option<f64>,
    pub extinct_at: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
#[allow(clippy::large_enum_variant)]
pub enum RunOutcome {
    Completed(RunMetrics),
    /// Returns too small to standardise.
    Degenerate(String),
    /// A numerical error; tallied, never resampled.
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct RunReport {
    pub run_index: u64,
    pub outcome: RunOutcome,
}

/// Runs the requested estimators on a return series.
pub fn analyze_returns(returns: &[f64], options: &AnalysisOptions) -> Result<RunMetrics> {
    stats::check_returns(returns)?;
    let an = options.analyses;
    let acf = if an.acf {
        let z = stats::standardize(returns)?;
        Some(acf_powers(
            &z,
            &stats::DEFAULT_ALPHAS,
            options.acf_max_tau,
            options.acf_fit_range,
        )?)
    } else {
        None
    };
    let distribution = if an.distribution {
        Some(stats::return_histogram_with(
            returns,
            options.hist_bins,
            options.hist_half_width,
            &options.classifier,
        )?)
    } else {
        None
    };
    let scaling = if an.scaling {
        Some(multiscaling::zeta_spectrum(
            returns,
            &options.qs,
            &multiscaling::dyadic_lags(returns.len()),
        )?)
    } else {
        None
    };
    Ok(RunMetrics {
        acf,
        distribution,
        scaling,
        wealth_decay: None,
        final_rb: None,
        extinct_at: None,
    })
}

/// Least-squares slope of `ln rᵇₜ` up to extinction.
pub fn wealth_decay_fit(fast_wealth: &[f64]) -> Option<LinearFit> {
    let (t, y): (Vec<f64>, Vec<f64>) = fast_wealth
        .iter()
        .take_while(|&&w| w > 0.0)
        .enumerate()
        .map(|(t, &w)| (t as f64, libm::log(w)))
        .unzip();
    if t.len() < 10 {
        return None;
    }
    linear_fit(&t, &y)
}

/// Simulates and analyses run `run_index` of cell `(a, b)`.
pub fn analyze_run(spec: &SweepSpec, a: f64, b: f64, run_index: u64) -> RunReport {
    let outcome = match run_metrics(spec, a, b, run_index) {
        Ok(m) => RunOutcome::Completed(m),
        Err(Error::Degenerate(msg)) => RunOutcome::Degenerate(msg),
        Err(e) => RunOutcome::Failed(e.to_string()),
    };
    RunReport { run_index, outcome }
}

fn run_metrics(spec: &SweepSpec, a: f64, b: f64, run_index: u64) -> Result<RunMetrics> {
    let cfg = spec.cell_config(a, b)?;
    let trail = simulate_run(&cfg, run_index)?;
    let mut m = analyze_returns(&trail.returns, &spec.options)?;
    if spec.options.analyses.convergence {
        m.wealth_decay = wealth_decay_fit(&trail.fast_wealth);
    }
    m.final_rb = trail.fast_wealth.last().copied();
    m.extinct_at = trail.diagnostics.extinct_at;
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct RunFailure {
    pub run_index: u64,
    pub reason: String,
}

/// Mergeable per-cell aggregation state.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct CellAccumulator {
    pub a: f64,
    pub b: f64,
    pub runs: u64,
    pub completed: u64,
    pub degenerate: u64,
    pub failed: u64,
    pub failures: Vec<RunFailure>,
    pub degenerate_runs: Vec<RunFailure>,
    pub alphas: Vec<u32>,
    pub taus: Vec<usize>,
    pub fit_range: (usize, usize),
    /// `[alpha][tau]` over runs where the lag is defined.
    pub acf: Vec<Vec<Moments>>,
    pub gamma: Vec<Moments>,
    /// Runs whose fit was unreliable or failed, per alpha.
    pub gamma_rejected: Vec<u64>,
    pub kurtosis: Moments,
    pub bin_edges: Vec<f64>,
    pub hist_counts: Vec<u64>,
    pub hist_outside: (u64, u64),
    pub shape_statistic: Moments,
    pub qs: Vec<f64>,
    pub zeta: Vec<Moments>,
    pub hq: Vec<Moments>,
    pub spread: Moments,
    pub wealth_decay: Moments,
    pub final_rb: Moments,
    pub extinct: u64,
}

impl CellAccumulator {
    pub fn new(a: f64, b: f64) -> Self {
        Self {
            a,
            b,
            runs: 0,
            completed: 0,
            degenerate: 0,
            failed: 0,
            failures: Vec::new(),
            degenerate_runs: Vec::new(),
            alphas: Vec::new(),
            taus: Vec::new(),
            fit_range: (0, 0),
            acf: Vec::new(),
            gamma: Vec::new(),
            gamma_rejected: Vec::new(),
            kurtosis: Moments::new(),
            bin_edges: Vec::new(),
            hist_counts: Vec::new(),
            hist_outside: (0, 0),
            shape_statistic: Moments::new(),
            qs: Vec::new(),
            zeta: Vec::new(),
            hq: Vec::new(),
            spread: Moments::new(),
            wealth_decay: Moments::new(),
            final_rb: Moments::new(),
            extinct: 0,
        }
    }

    pub fn push(&mut self, report: &RunReport) {
        self.runs += 1;
        let m = match &report.outcome {
            RunOutcome::Completed(m) => m,
            RunOutcome::Degenerate(reason) => {
                self.degenerate += 1;
                record(&mut self.degenerate_runs, report.run_index, reason);
                return;
            }
            RunOutcome::Failed(reason) => {
                self.failed += 1;
                record(&mut self.failures, report.run_index, reason);
                return;
            }
        };
        self.completed += 1;
        if let Some(acf) = &m.acf {
            if self.acf.is_empty() {
                self.alphas = acf.alphas.clone();
                self.taus = acf.taus.clone();
                self.fit_range = acf.fit_range;
                self.acf = vec![vec![Moments::new(); acf.taus.len()]; acf.alphas.len()];
                self.gamma = vec![Moments::new(); acf.alphas.len()];
                self.gamma_rejected = vec![0; acf.alphas.len()];
            }
            for (i, curve) in acf.values.iter().enumerate() {
                for (acc, v) in self.acf[i].iter_mut().zip(curve) {
                    if let Some(v) = v {
                        acc.push(*v);
                    }
                }
                match (acf.fits[i].status, acf.fits[i].gamma) {
                    (FitStatus::Ok, Some(g)) => self.gamma[i].push(g),
                    _ => self.gamma_rejected[i] += 1,
                }
            }
        }
        if let Some(d) = &m.distribution {
            if self.hist_counts.is_empty() {
                self.bin_edges = d.bin_edges.clone();
                self.hist_counts = vec![0; d.counts.len()];
            }
            self.kurtosis.push(d.excess_kurtosis);
            for (acc, c) in self.hist_counts.iter_mut().zip(&d.counts) {
                *acc += c;
            }
            self.hist_outside.0 += d.below;
            self.hist_outside.1 += d.above;
            if let Some(s) = d.shape {
                self.shape_statistic.push(s.statistic);
            }
        }
        if let Some(s) = &m.scaling {
            if self.zeta.is_empty() {
                self.qs = s.qs.clone();
                self.zeta = vec![Moments::new(); s.qs.len()];
                self.hq = vec![Moments::new(); s.qs.len()];
            }
            for i in 0..s.qs.len() {
                self.zeta[i].push(s.zeta[i]);
                self.hq[i].push(s.hq[i]);
            }
            self.spread.push(s.spread);
        }
        if let Some(w) = &m.wealth_decay {
            self.wealth_decay.push(w.slope);
        }
        if let Some(rb) = m.final_rb {
            self.final_rb.push(rb);
        }
        if m.extinct_at.is_some() {
            self.extinct += 1;
        }
    }

    /// Combines two partial accumulators of the same cell.
    pub fn merge(&mut self, other: &CellAccumulator) {
        self.runs += other.runs;
        self.completed += other.completed;
        self.degenerate += other.degenerate;
        self.failed += other.failed;
        for f in &other.failures {
            record(&mut self.failures, f.run_index, &f.reason);
        }
        for f in &other.degenerate_runs {
            record(&mut self.degenerate_runs, f.run_index, &f.reason);
        }
        if self.acf.is_empty() {
            self.alphas = other.alphas.clone();
            self.taus = other.taus.clone();
            self.fit_range = other.fit_range;
            self.acf = other.acf.clone();
            self.gamma = other.gamma.clone();
            self.gamma_rejected = other.gamma_rejected.clone();
        } else if !other.acf.is_empty() {
            for (mine, theirs) in self.acf.iter_mut().zip(&other.acf) {
                for (m, t) in mine.iter_mut().zip(theirs) {
                    m.merge(t);
                }
            }
            for (m, t) in self.gamma.iter_mut().zip(&other.gamma) {
                m.merge(t);
            }
            for (m, t) in self.gamma_rejected.iter_mut().zip(&other.gamma_rejected) {
                *m += t;
            }
        }
        self.kurtosis.merge(&other.kurtosis);
        if self.hist_counts.is_empty() {
            self.bin_edges = other.bin_edges.clone();
            self.hist_counts = other.hist_counts.clone();
        } else {
            for (m, t) in self.hist_counts.iter_mut().zip(&other.hist_counts) {
                *m += t;
            }
        }
        self.hist_outside.0 += other.hist_outside.0;
        self.hist_outside.1 += other.hist_outside.1;
        self.shape_statistic.merge(&other.shape_statistic);
        if self.zeta.is_empty() {
            self.qs = other.qs.clone();
            self.zeta = other.zeta.clone();
            self.hq = other.hq.clone();
        } else {
            for (m, t) in self.zeta.iter_mut().zip(&other.zeta) {
                m.merge(t);
            }
            for (m, t) in self.hq.iter_mut().zip(&other.hq) {
                m.merge(t);
            }
        }
        self.spread.merge(&other.spread);
        self.wealth_decay.merge(&other.wealth_decay);
        self.final_rb.merge(&other.final_rb);
        self.extinct += other.extinct;
    }

    pub fn finish(&self, provenance: Provenance, classifier: &ShapeClassifier) -> CellSummary {
        let convergent = self.a == 0.5 || self.b == 0.0;
        let failure_rate = if self.runs == 0 {
            0.0
        } else {
            self.failed as f64 / self.runs as f64
        };
        let acf = (!self.acf.is_empty()).then(|| self.acf_summary());
        let distribution = (!self.hist_counts.is_empty()).then(|| DistributionSummary {
            kurtosis_mean: self.kurtosis.mean(),
            kurtosis_stderr: self.kurtosis.stderr(),
            kurtosis_count: self.kurtosis.count,
            shape_statistic_mean: self.shape_statistic.mean(),
            shape_statistic_stderr: self.shape_statistic.stderr(),
            pooled: DistributionReport::from_counts(
                self.bin_edges.clone(),
                self.hist_counts.clone(),
                self.hist_outside,
                self.kurtosis.mean(),
                classifier,
            )
            .ok(),
        });
        let scaling = (!self.zeta.is_empty()).then(|| ScalingSummary {
            qs: self.qs.clone(),
            zeta_mean: self.zeta.iter().map(Moments::mean).collect(),
            zeta_stderr: self.zeta.iter().map(Moments::stderr).collect(),
            hq_mean: self.hq.iter().map(Moments::mean).collect(),
            hq_stderr: self.hq.iter().map(Moments::stderr).collect(),
            spread_mean: self.spread.mean(),
            spread_stderr: self.spread.stderr(),
            count: self.spread.count,
        });
        let wealth = WealthSummary {
            decay_slope_mean: (self.wealth_decay.count > 0).then(|| self.wealth_decay.mean()),
            decay_slope_stderr: (self.wealth_decay.count > 0).then(|| self.wealth_decay.stderr()),
            final_rb_mean: (self.final_rb.count > 0).then(|| self.final_rb.mean()),
            extinct_runs: self.extinct,
        };
        CellSummary {
            a: self.a,
            b: self.b,
            runs: self.runs,
            completed: self.completed,
            degenerate: self.degenerate,
            failed: self.failed,
            failure_rate,
            flags: CellFlags {
                convergent,
                high_failure_rate: failure_rate > FAILURE_FLAG_RATE,
            },
            failures: self.failures.clone(),
            degenerate_runs: self.degenerate_runs.clone(),
            acf,
            distribution,
            scaling,
            wealth,
            provenance,
        }
    }

    fn acf_summary(&self) -> AcfSummary {
        let column = |f: fn(&Moments) -> f64| -> Vec<Vec<Option<f64>>> {
            self.acf
                .iter()
                .map(|row| row.iter().map(|m| (m.count > 0).then(|| f(m))).collect())
                .collect()
        };
        // Rounding in the running mean may step past ±1.
        let mean: Vec<Vec<Option<f64>>> = column(Moments::mean)
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|v| v.map(|c| c.clamp(-1.0, 1.0)))
                    .collect()
            })
            .collect();
        let tau_f: Vec<f64> = self.taus.iter().map(|&t| t as f64).collect();
        let range = (self.fit_range.0 as f64, self.fit_range.1 as f64);
        let mean_curve_fits = mean
            .iter()
            .map(|c| fit_power_law(&tau_f, c, range))
            .collect();
        AcfSummary {
            alphas: self.alphas.clone(),
            taus: self.taus.clone(),
            mean,
            variance: column(Moments::variance),
            std_dev: column(Moments::std_dev),
            counts: self
                .acf
                .iter()
                .map(|row| row.iter().map(|m| m.count).collect())
                .collect(),
            gamma_mean: self
                .gamma
                .iter()
                .map(|m| (m.count > 0).then(|| m.mean()))
                .collect(),
            gamma_stderr: self
                .gamma
                .iter()
                .map(|m| (m.count > 0).then(|| m.stderr()))
                .collect(),
            gamma_count: self.gamma.iter().map(|m| m.count).collect(),
            gamma_rejected: self.gamma_rejected.clone(),
            fit_range: self.fit_range,
            mean_curve_fits,
        }
    }
}

fn record(list: &mut Vec<RunFailure>, run_index: u64, reason: &str) {
    if list.len() < MAX_RECORDED_FAILURES {
        list.push(RunFailure {
            run_index,
            reason: reason.to_string(),
        });
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Provenance {
    pub master_seed: u64,
    pub config_hash: String,
    pub spec_hash: String,
    pub code_version: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct CellFlags {
    /// `a = ½` or `b = 0`: prices converge and stylised facts are absent.
    pub convergent: bool,
    pub high_failure_rate: bool,
}

/// Ensemble aggregates of `C_α(τ)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct AcfSummary {
    pub alphas: Vec<u32>,
    pub taus: Vec<usize>,
    /// `⟨C_α(τ)⟩`, indexed `[alpha][tau]`.
    pub mean: Vec<Vec<Option<f64>>>,
    pub variance: Vec<Vec<Option<f64>>>,
    pub std_dev: Vec<Vec<Option<f64>>>,
    pub counts: Vec<Vec<u64>>,
    /// Mean of per-run exponents over runs with a reliable fit.
    pub gamma_mean: Vec<Option<f64>>,
    pub gamma_stderr: Vec<Option<f64>>,
    pub gamma_count: Vec<u64>,
    pub gamma_rejected: Vec<u64>,
    pub fit_range: (usize, usize),
    /// Power-law fits of the mean curves.
    pub mean_curve_fits: Vec<PowerLawFit>,
}

impl AcfSummary {
    fn index(&self, alpha: u32) -> Option<usize> {
        self.alphas.iter().position(|&a| a == alpha)
    }

    pub fn mean_curve(&self, alpha: u32) -> Option<&[Option<f64>]> {
        Some(&self.mean[self.index(alpha)?])
    }

    /// Mean of `⟨C_α(τ)⟩` over `τ ∈ [lo, hi]`.
    pub fn mean_over(&self, alpha: u32, lo: usize, hi: usize) -> Option<f64> {
        stats::mean_defined(self.mean_curve(alpha)?, lo, hi)
    }

    pub fn gamma(&self, alpha: u32) -> Option<(f64, f64)> {
        let i = self.index(alpha)?;
        Some((self.gamma_mean[i]?, self.gamma_stderr[i]?))
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct DistributionSummary {
    pub kurtosis_mean: f64,
    pub kurtosis_stderr: f64,
    pub kurtosis_count: u64,
    /// Per-run shape statistics, averaged.
    pub shape_statistic_mean: f64,
    pub shape_statistic_stderr: f64,
    /// Histogram of all runs' standardised returns; its shape is the
    /// ensemble shape class.
    pub pooled: Option<DistributionReport>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ScalingSummary {
    pub qs: Vec<f64>,
    pub zeta_mean: Vec<f64>,
    pub zeta_stderr: Vec<f64>,
    pub hq_mean: Vec<f64>,
    pub hq_stderr: Vec<f64>,
    pub spread_mean: f64,
    pub spread_stderr: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct WealthSummary {
    pub decay_slope_mean: Option<f64>,
    pub decay_slope_stderr: Option<f64>,
    pub final_rb_mean: Option<f64>,
    /// Runs in which `rᵇ` underflowed to zero.
    pub extinct_runs: u64,
}

/// Per-cell ensemble aggregates with provenance.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct CellSummary {
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
    pub acf: Option<AcfSummary>,
    pub distribution: Option<DistributionSummary>,
    pub scaling: Option<ScalingSummary>,
    pub wealth: WealthSummary,
    pub provenance: Provenance,
}

pub type EnsembleSummary = CellSummary;

pub fn provenance(spec: &SweepSpec, a: f64, b: f64) -> Result<Provenance> {
    Ok(Provenance {
        master_seed: spec.master_seed,
        config_hash: spec.cell_config(a, b)?.config_hash(),
        spec_hash: spec.spec_hash(),
        code_version: CODE_VERSION.to_string(),
    })
}

/// Folds run reports (in the given order) into a cell summary.
pub fn summarize_cell<'r>(
    spec: &SweepSpec,
    a: f64,
    b: f64,
    reports: impl IntoIterator<Item = &'r RunReport>,
) -> Result<CellSummary> {
    let mut acc = CellAccumulator::new(a, b);
    for r in reports {
        acc.push(r);
    }
    Ok(acc.finish(provenance(spec, a, b)?, &spec.options.classifier))
}

/// Serial sweep; cells in [`SweepSpec::cells`] order, runs in index order.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<CellSummary>> {
    spec.validate()?;
    spec.cells()
        .into_iter()
        .map(|(a, b)| {
            let reports: Vec<RunReport> = (0..spec.runs_per_cell as u64)
                .map(|r| analyze_run(spec, a, b, r))
                .collect();
            summarize_cell(spec, a, b, &reports)
        })
        .collect()
}

/// The headline numbers of one series or one ensemble cell, in a layout
/// shared by model and empirical data.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct StylizedFacts {
    /// Runs aggregated; 1 for a single series.
    pub runs: u64,
    pub excess_kurtosis: Option<f64>,
    pub excess_kurtosis_stderr: Option<f64>,
    pub shape: Option<stats::ShapeClassification>,
    pub alphas: Vec<u32>,
    pub gamma: Vec<Option<f64>>,
    pub gamma_stderr: Vec<Option<f64>>,
    /// Mean of `C₂(τ)` over `τ ∈ [1, 100]`.
    pub mean_c2_short: Option<f64>,
    pub qs: Vec<f64>,
    pub hq: Vec<f64>,
    pub hq_spread: Option<f64>,
}

pub const SHORT_LAGS: (usize, usize) = (1, 100);

impl StylizedFacts {
    pub fn from_metrics(m: &RunMetrics) -> Self {
        let (alphas, gamma, mean_c2_short) = match &m.acf {
            Some(acf) => (
                acf.alphas.clone(),
                acf.fits.iter().map(|f| f.gamma).collect(),
                acf.mean_over(2, SHORT_LAGS.0, SHORT_LAGS.1),
            ),
            None => (Vec::new(), Vec::new(), None),
        };
        let n = gamma.len();
        Self {
            runs: 1,
            excess_kurtosis: m.distribution.as_ref().map(|d| d.excess_kurtosis),
            excess_kurtosis_stderr: None,
            shape: m.distribution.as_ref().and_then(|d| d.shape),
            alphas,
            gamma,
            gamma_stderr: vec![None; n],
            mean_c2_short,
            qs: m.scaling.as_ref().map(|s| s.qs.clone()).unwrap_or_default(),
            hq: m.scaling.as_ref().map(|s| s.hq.clone()).unwrap_or_default(),
            hq_spread: m.scaling.as_ref().map(|s| s.spread),
        }
    }

    pub fn from_cell(c: &CellSummary) -> Self {
        let d = c.distribution.as_ref();
        Self {
            runs: c.completed,
            excess_kurtosis: d.map(|d| d.kurtosis_mean),
            excess_kurtosis_stderr: d.map(|d| d.kurtosis_stderr),
            shape: d.and_then(|d| d.pooled.as_ref()).and_then(|p| p.shape),
            alphas: c.acf.as_ref().map(|a| a.alphas.clone()).unwrap_or_default(),
            gamma: c
                .acf
                .as_ref()
                .map(|a| a.gamma_mean.clone())
                .unwrap_or_default(),
            gamma_stderr: c
                .acf
                .as_ref()
                .map(|a| a.gamma_stderr.clone())
                .unwrap_or_default(),
            mean_c2_short: c
                .acf
                .as_ref()
                .and_then(|a| a.mean_over(2, SHORT_LAGS.0, SHORT_LAGS.1)),
            qs: c.scaling.as_ref().map(|s| s.qs.clone()).unwrap_or_default(),
            hq: c
                .scaling
                .as_ref()
                .map(|s| s.hq_mean.clone())
                .unwrap_or_default(),
            hq_spread: c.scaling.as_ref().map(|s| s.spread_mean),
        }
    }
}

/// Fit of `ln γ₂` against `b` across cells at one `a`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct KurtosisFit {
    pub a: Option<f64>,
    /// Cells used, ascending in `b`.
    pub bs: Vec<f64>,
    pub kurtosis: Vec<f64>,
    /// Cells dropped for non-positive mean kurtosis.
    pub excluded: usize,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub slope_stderr: f64,
    pub spearman: Option<f64>,
    /// Slope not distinguishable from zero (or negative).
    pub no_crossover: bool,
}

pub const MIN_KURTOSIS_CELLS: usize = 4;

/// `ln γ₂ = intercept + slope·b` over cells with positive mean kurtosis.
pub fn fit_kurtosis_curve(bs: &[f64], kurtosis: &[f64]) -> Result<KurtosisFit> {
    if bs.len() != kurtosis.len() {
        return Err(Error::Config(
            "b values and kurtosis values differ in length".into(),
        ));
    }
    if bs.len() < MIN_KURTOSIS_CELLS {
        return Err(Error::InsufficientData {
            what: "b-cells",
            required: MIN_KURTOSIS_CELLS,
            got: bs.len(),
        });
    }
    let mut pairs: Vec<(f64, f64)> = bs.iter().copied().zip(kurtosis.iter().copied()).collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let kept: Vec<(f64, f64)> = pairs.iter().copied().filter(|p| p.1 > 0.0).collect();
    let excluded = pairs.len() - kept.len();
    if kept.len() < 3 {
        return Err(Error::InsufficientData {
            what: "b-cells with positive kurtosis",
            required: 3,
            got: kept.len(),
        });
    }
    let (bs, ks): (Vec<f64>, Vec<f64>) = kept.into_iter().unzip();
    let ln: Vec<f64> = ks.iter().map(|&k| libm::log(k)).collect();
    let fit =
        linear_fit(&bs, &ln).ok_or_else(|| Error::Degenerate("b values are all equal".into()))?;
    Ok(KurtosisFit {
        a: None,
        spearman: stats::spearman(&bs, &ks),
        no_crossover: fit.slope <= 0.0 || fit.slope.abs() <= 2.0 * fit.slope_stderr,
        bs,
        kurtosis: ks,
        excluded,
        slope: fit.slope,
        intercept: fit.intercept,
        r2: fit.r2,
        slope_stderr: fit.slope_stderr,
    })
}

/// [`fit_kurtosis_curve`] over the cell means of a sweep at fixed `a`.
pub fn kurtosis_vs_b(cells: &[CellSummary]) -> Result<KurtosisFit> {
    let Some(first) = cells.first() else {
        return Err(Error::InsufficientData {
            what: "b-cells",
            required: MIN_KURTOSIS_CELLS,
            got: 0,
        });
    };
    if cells.iter().any(|c| c.a != first.a) {
        return Err(Error::Config(
            "kurtosis_vs_b needs cells at a single value of a".into(),
        ));
    }
    let mut bs = Vec::new();
    let mut ks = Vec::new();
    for c in cells {
        let d = c.distribution.as_ref().ok_or_else(|| {
            Error::Config(format!(
                "cell ({}, {}) has no distribution analysis",
                c.a, c.b
            ))
        })?;
        if d.kurtosis_count > 0 {
            bs.push(c.b);
            ks.push(d.kurtosis_mean);
        }
    }
    let mut fit = fit_kurtosis_curve(&bs, &ks)?;
    fit.a = Some(first.a);
    Ok(fit)
}

/// Largest `b` treated as "fast strategy switched off" by the convergence
/// study.
pub const CONVERGENT_B: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ConvergenceSpec {
    pub a: f64,
    pub b: f64,
    pub rb0: f64,
    pub length: usize,
    pub seeds: usize,
    pub master_seed: u64,
    /// First step of the regression window.
    pub fit_start: usize,
    pub entropy_samples: usize,
}

impl Default for ConvergenceSpec {
    fn default() -> Self {
        Self {
            a: 0.5,
            b: 0.45,
            rb0: 0.5,
            length: 5000,
            seeds: 32,
            master_seed: 0,
            fit_start: 100,
            entropy_samples: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum DecayObservable {
    /// `ln rᵇₜ`; used when `a = ½` and `b > 0`.
    FastWealth,
    /// `ln |S¹ₜ − ½|`; used when `b ≈ 0`.
    PriceDeviation,
    /// `a = ½`, `b = 0`: the price sits at `(½, ½)` from the start.
    FixedPoint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct DecayFit {
    pub run_index: u64,
    pub fit: LinearFit,
    /// Slope standard error for a random walk with drift,
    /// `sd(increments)·√(6 / (5n))`; the OLS value ignores the walk's
    /// serial dependence.
    pub walk_stderr: f64,
    /// `[start, end)` in steps.
    pub window: (usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct DecayRecord {
    pub spec: ConvergenceSpec,
    pub observable: DecayObservable,
    pub fits: Vec<DecayFit>,
    pub mean_slope: Option<f64>,
    /// Across-seed standard error, or the walk error for a single seed.
    pub slope_stderr: Option<f64>,
    /// Mean of the per-seed log observable over the common window.
    pub mean_curve: Vec<(usize, f64)>,
    pub mean_curve_fit: Option<LinearFit>,
    pub predicted: Option<EntropyEstimate>,
    /// `(mean_slope − predicted) / √(se² + se_mc²)`.
    pub z_score: Option<f64>,
    /// `max |S¹ₜ − ½|` over all seeds and steps.
    pub max_deviation: f64,
}

/// Exponential convergence of prices or wealth in the convergent regime.
pub fn convergence_study(spec: &ConvergenceSpec) -> Result<DecayRecord> {
    let pair = StrategyPair::unrestricted(spec.a, spec.b)?;
    let observable = if spec.a == 0.5 && spec.b == 0.0 {
        DecayObservable::FixedPoint
    } else if spec.a == 0.5 {
        DecayObservable::FastWealth
    } else if spec.b <= CONVERGENT_B {
        DecayObservable::PriceDeviation
    } else {
        return Err(Error::Config(format!(
            "(a, b) = ({}, {}) is not in the convergent regime; use a = 0.5 or b <= {CONVERGENT_B:e}",
            spec.a, spec.b
        )));
    };
    if spec.seeds == 0 {
        return Err(Error::Config(
            "convergence study needs at least one seed".into(),
        ));
    }
    if spec.fit_start + 10 > spec.length {
        return Err(Error::InsufficientData {
            what: "trail length beyond fit_start",
            required: spec.fit_start + 10,
            got: spec.length,
        });
    }
    let cfg = SimulationConfig::new(pair, spec.master_seed)
        .with_length(spec.length)
        .with_rb0(spec.rb0);
    // Below this the fast strategy's own fluctuation masks the decay.
    let deviation_floor = 10.0 * (0.5 * spec.b).max(1e-16);

    let mut fits = Vec::with_capacity(spec.seeds);
    let mut curves: Vec<Vec<f64>> = Vec::with_capacity(spec.seeds);
    let mut max_deviation = 0.0f64;
    for run in 0..spec.seeds as u64 {
        let trail = simulate_run(&cfg, run)?;
        let s1 = trail.prices.first_component();
        max_deviation = s1
            .iter()
            .fold(max_deviation, |m, &s| m.max((s - 0.5).abs()));
        let series: Vec<f64> = match observable {
            DecayObservable::FixedPoint => continue,
            DecayObservable::FastWealth => {
                trail.fast_wealth.iter().map(|&w| libm::log(w)).collect()
            }
            DecayObservable::PriceDeviation => s1
                .iter()
                .map(|&s| {
                    let dev = (s - 0.5).abs();
                    if dev < deviation_floor {
                        f64::NEG_INFINITY
                    } else {
                        libm::log(dev)
                    }
                })
                .collect(),
        };
        let end = series
            .iter()
            .position(|v| !v.is_finite())
            .unwrap_or(series.len());
        if end < spec.fit_start + 10 {
            return Err(Error::InsufficientData {
                what: "decaying window (observable hit its floor early)",
                required: spec.fit_start + 10,
                got: end,
            });
        }
        let window = &series[spec.fit_start..end];
        let t: Vec<f64> = (spec.fit_start..end).map(|t| t as f64).collect();
        let fit = linear_fit(&t, window).expect("window has distinct times");
        let increments: Vec<f64> = window.windows(2).map(|w| w[1] - w[0]).collect();
        let n = window.len() as f64;
        let walk_stderr = Moments::from_slice(&increments).std_dev() * libm::sqrt(6.0 / (5.0 * n));
        fits.push(DecayFit {
            run_index: run,
            fit,
            walk_stderr,
            window: (spec.fit_start, end),
        });
        curves.push(series[..end].to_vec());
    }

    if observable == DecayObservable::FixedPoint {
        return Ok(DecayRecord {
            spec: spec.clone(),
            observable,
            fits,
            mean_slope: None,
            slope_stderr: None,
            mean_curve: Vec::new(),
            mean_curve_fit: None,
            predicted: None,
            z_score: None,
            max_deviation,
        });
    }

    let slopes = Moments::from_slice(&fits.iter().map(|f| f.fit.slope).collect::<Vec<_>>());
    let slope_stderr = if fits.len() >= 2 {
        slopes.stderr()
    } else {
        fits[0].walk_stderr
    };
    let common_end = curves.iter().map(Vec::len).min().unwrap_or(0);
    let mean_curve: Vec<(usize, f64)> = (spec.fit_start..common_end)
        .map(|t| {
            let m = curves.iter().map(|c| c[t]).sum::<f64>() / curves.len() as f64;
            (t, m)
        })
        .collect();
    let (mt, my): (Vec<f64>, Vec<f64>) = mean_curve.iter().map(|&(t, y)| (t as f64, y)).unzip();
    let mean_curve_fit = linear_fit(&mt, &my);

    let predicted = match observable {
        DecayObservable::FastWealth => entropy_growth_rate(
            pair.slow(),
            spec.b,
            cfg.value_process,
            spec.entropy_samples,
            spec.master_seed,
        )?,
        _ => constant_growth_rate(
            pair.fast(0.0),
            pair.slow(),
            cfg.value_process,
            spec.entropy_samples,
            spec.master_seed,
        )?,
    };
    let combined = libm::sqrt(slope_stderr * slope_stderr + predicted.stderr * predicted.stderr);
    let z_score = (combined > 0.0).then(|| (slopes.mean() - predicted.mean) / combined);
    Ok(DecayRecord {
        spec: spec.clone(),
        observable,
        fits,
        mean_slope: Some(slopes.mean()),
        slope_stderr: Some(slope_stderr),
        mean_curve,
        mean_curve_fit,
        predicted: Some(predicted),
        z_score,
        max_deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small_spec() -> SweepSpec {
        SweepSpec {
            a_grid: vec![0.45],
            b_grid: vec![0.45, 0.65],
            runs_per_cell: 6,
            trail_length: 2000,
            master_seed: 11,
            options: AnalysisOptions {
                analyses: Analyses::ALL,
                acf_max_tau: 100,
                acf_fit_range: (5, 80),
                ..AnalysisOptions::default()
            },
            ..SweepSpec::default()
        }
    }

    #[test]
    fn single_run_aggregate_equals_run() {
        let spec = small_spec();
        let report = analyze_run(&spec, 0.45, 0.45, 3);
        let RunOutcome::Completed(m) = &report.outcome else {
            panic!("run did not complete: {:?}", report.outcome);
        };
        let s = summarize_cell(&spec, 0.45, 0.45, [&report]).unwrap();
        let acf = s.acf.unwrap();
        let run_acf = m.acf.as_ref().unwrap();
        assert_eq!(acf.mean, run_acf.values);
        for (i, fit) in run_acf.fits.iter().enumerate() {
            if fit.status == FitStatus::Ok {
                assert_eq!(acf.gamma_mean[i], fit.gamma);
            }
        }
        let d = s.distribution.unwrap();
        let run_d = m.distribution.as_ref().unwrap();
        assert_eq!(d.kurtosis_mean, run_d.excess_kurtosis);
        let pooled = d.pooled.unwrap();
        assert_eq!(pooled.counts, run_d.counts);
        assert_eq!(pooled.shape, run_d.shape);
        let sc = s.scaling.unwrap();
        assert_eq!(sc.zeta_mean, m.scaling.as_ref().unwrap().zeta);
        assert_eq!(sc.spread_mean, m.scaling.as_ref().unwrap().spread);
    }

    #[test]
    fn single_run_facts_match_cell_facts() {
        let spec = small_spec();
        let report = analyze_run(&spec, 0.45, 0.65, 1);
        let RunOutcome::Completed(m) = &report.outcome else {
            panic!("run did not complete");
        };
        let cell = summarize_cell(&spec, 0.45, 0.65, [&report]).unwrap();
        let (run, ens) = (
            StylizedFacts::from_metrics(m),
            StylizedFacts::from_cell(&cell),
        );
        assert_eq!(run.excess_kurtosis, ens.excess_kurtosis);
        assert_eq!(run.shape, ens.shape);
        assert_eq!(run.mean_c2_short, ens.mean_c2_short);
        assert_eq!(run.hq, ens.hq);
    }

    #[test]
    fn half_ensembles_merge_to_full() {
        let spec = small_spec();
        let reports: Vec<RunReport> = (0..6).map(|r| analyze_run(&spec, 0.45, 0.65, r)).collect();
        let mut full = CellAccumulator::new(0.45, 0.65);
        reports.iter().for_each(|r| full.push(r));
        let mut left = CellAccumulator::new(0.45, 0.65);
        let mut right = CellAccumulator::new(0.45, 0.65);
        reports[..2].iter().for_each(|r| left.push(r));
        reports[2..].iter().for_each(|r| right.push(r));
        left.merge(&right);

        assert_eq!(left.runs, full.runs);
        assert_eq!(left.hist_counts, full.hist_counts);
        let close = |x: &Moments, y: &Moments| {
            assert_eq!(x.count, y.count);
            assert_abs_diff_eq!(x.mean, y.mean, epsilon = 1e-14 * (1.0 + y.mean.abs()));
            assert_abs_diff_eq!(
                x.variance(),
                y.variance(),
                epsilon = 1e-12 * (1.0 + y.variance())
            );
        };
        for (l, f) in left.acf.iter().flatten().zip(full.acf.iter().flatten()) {
            close(l, f);
        }
        for (l, f) in left.zeta.iter().zip(&full.zeta) {
            close(l, f);
        }
        close(&left.kurtosis, &full.kurtosis);
        close(&left.spread, &full.spread);
        close(&left.wealth_decay, &full.wealth_decay);
    }

    #[test]
    fn mean_curves_stay_in_bounds() {
        let cells = run_sweep(&small_spec()).unwrap();
        assert_eq!(cells.len(), 2);
        for c in &cells {
            let acf = c.acf.as_ref().unwrap();
            for v in acf.mean.iter().flatten().flatten() {
                assert!(v.abs() <= 1.0);
            }
            assert_eq!(acf.mean[0][0], Some(1.0));
            assert!(!c.flags.convergent);
            assert_eq!(c.runs, 6);
        }
    }

    #[test]
    fn convergent_cells_are_flagged() {
        let spec = SweepSpec {
            a_grid: vec![0.5],
            b_grid: vec![0.0, 0.3],
            runs_per_cell: 2,
            trail_length: 1000,
            options: AnalysisOptions {
                acf_max_tau: 50,
                ..AnalysisOptions::default()
            },
            ..SweepSpec::default()
        };
        let cells = run_sweep(&spec).unwrap();
        assert!(cells.iter().all(|c| c.flags.convergent));
        // a = ½, b = 0: constant price, every run degenerate.
        assert_eq!(cells[0].degenerate, 2);
        assert_eq!(cells[0].completed, 0);
    }

    #[test]
    fn failures_are_tallied_and_flagged() {
        let mut acc = CellAccumulator::new(0.4, 0.5);
        for r in 0..99 {
            acc.push(&RunReport {
                run_index: r,
                outcome: RunOutcome::Degenerate("flat".into()),
            });
        }
        acc.push(&RunReport {
            run_index: 99,
            outcome: RunOutcome::Failed("singular".into()),
        });
        let s = acc.finish(
            provenance(&SweepSpec::default(), 0.4, 0.5).unwrap(),
            &ShapeClassifier::default(),
        );
        assert_eq!(s.failed, 1);
        assert!(!s.flags.high_failure_rate);
        acc.push(&RunReport {
            run_index: 100,
            outcome: RunOutcome::Failed("singular".into()),
        });
        let s = acc.finish(
            provenance(&SweepSpec::default(), 0.4, 0.5).unwrap(),
            &ShapeClassifier::default(),
        );
        assert!(s.flags.high_failure_rate);
        assert_eq!(s.failures.len(), 2);
        assert_eq!(s.degenerate_runs.len(), MAX_RECORDED_FAILURES);
    }

    #[test]
    fn sweep_validation() {
        let mut spec = small_spec();
        spec.a_grid = vec![0.6];
        assert!(spec.validate().is_err());
        let mut spec = small_spec();
        spec.runs_per_cell = 0;
        assert!(spec.validate().is_err());
        let mut spec = small_spec();
        spec.options.acf_max_tau = 500;
        assert!(spec.validate().is_err());
        assert!(Analyses::from_names(["acf", "bogus"]).is_err());
        assert_eq!(
            Analyses::from_names(["acf", "scaling", "distribution", "convergence"]).unwrap(),
            Analyses::ALL
        );
    }

    #[test]
    fn spec_hash_tracks_content() {
        let a = small_spec();
        let mut b = small_spec();
        assert_eq!(a.spec_hash(), b.spec_hash());
        b.master_seed += 1;
        assert_ne!(a.spec_hash(), b.spec_hash());
    }

    #[test]
    fn planted_exponential_kurtosis() {
        let bs: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
        let ks: Vec<f64> = bs.iter().map(|&b| 2.0 * libm::exp(b)).collect();
        let fit = fit_kurtosis_curve(&bs, &ks).unwrap();
        assert_abs_diff_eq!(fit.slope, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.intercept, libm::log(2.0), epsilon = 1e-12);
        assert_abs_diff_eq!(fit.r2, 1.0, epsilon = 1e-12);
        assert_eq!(fit.spearman, Some(1.0));
        assert!(!fit.no_crossover);
    }

    #[test]
    fn constant_kurtosis_flags_no_crossover() {
        let bs = [0.1, 0.2, 0.3, 0.4, 0.5];
        let fit = fit_kurtosis_curve(&bs, &[1.5; 5]).unwrap();
        assert_abs_diff_eq!(fit.slope, 0.0, epsilon = 1e-12);
        assert!(fit.no_crossover);
    }

    #[test]
    fn non_positive_kurtosis_is_excluded() {
        let bs = [0.1, 0.2, 0.3, 0.4, 0.5];
        let fit = fit_kurtosis_curve(&bs, &[-0.5, 0.0, 1.0, 2.0, 4.0]).unwrap();
        assert_eq!(fit.excluded, 2);
        assert_eq!(fit.bs, vec![0.3, 0.4, 0.5]);
        assert!(fit_kurtosis_curve(&bs[..3], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn wealth_convergence_matches_entropy() {
        let rec = convergence_study(&ConvergenceSpec {
            seeds: 8,
            master_seed: 5,
            entropy_samples: 20_000,
            ..ConvergenceSpec::default()
        })
        .unwrap();
        assert_eq!(rec.observable, DecayObservable::FastWealth);
        let slope = rec.mean_slope.unwrap();
        assert!(slope < 0.0);
        assert!(rec.z_score.unwrap().abs() < 4.0, "z = {:?}", rec.z_score);
    }

    #[test]
    fn vanishing_fluctuation_converges_to_half() {
        let rec = convergence_study(&ConvergenceSpec {
            a: 0.4,
            b: 1e-9,
            rb0: 0.4,
            seeds: 64,
            master_seed: 2,
            entropy_samples: 20_000,
            ..ConvergenceSpec::default()
        })
        .unwrap();
        assert_eq!(rec.observable, DecayObservable::PriceDeviation);
        let first = rec.mean_curve.first().unwrap().1;
        let last = rec.mean_curve.last().unwrap().1;
        assert!(last < first - 3.0, "{first} -> {last}");
        assert!(
            rec.mean_curve_fit.unwrap().r2 >= 0.98,
            "{:?}",
            rec.mean_curve_fit
        );
        assert!(rec.z_score.unwrap().abs() < 4.0, "z = {:?}", rec.z_score);
    }

    #[test]
    fn fixed_point_stays_at_half() {
        let rec = convergence_study(&ConvergenceSpec {
            a: 0.5,
            b: 0.0,
            seeds: 2,
            length: 500,
            ..ConvergenceSpec::default()
        })
        .unwrap();
        assert_eq!(rec.observable, DecayObservable::FixedPoint);
        assert_eq!(rec.max_deviation, 0.0);
    }

    #[test]
    fn non_convergent_configuration_is_rejected() {
        let err = convergence_study(&ConvergenceSpec {
            a: 0.4,
            b: 0.5,
            ..ConvergenceSpec::default()
        })
        .unwrap_err();
        assert!(matches!(err, Error::Config(msg) if msg.contains("convergent regime")));
    }
}
