//! Flat `key = value` configuration files.
//!
//! One entry per line, `#` starts a comment, blank lines are ignored, keys
//! may not repeat and unknown keys are rejected. Lists are comma separated
//! (`0.25, 0.45, 0.65`) or inclusive ranges `start..end:step`
//! (`0.1..0.9:0.1`).
//!
//! Simulation keys: `a`, `b`, `rb0`, `length`, `burn_in`, `seed`,
//! `epsilon_floor`.
//!
//! Sweep keys: `a_grid`, `b_grid`, `runs_per_cell`, `trail_length`,
//! `burn_in`, `rb0`, `master_seed` (alias `seed`), `analyses`,
//! `acf_max_tau`, `acf_fit_lo`, `acf_fit_hi`, `hist_bins`,
//! `hist_half_width`, `allow_convergent`.

use std::collections::BTreeMap;
use std::path::Path;

use decouple_core::ensemble::{Analyses, SweepSpec};
use decouple_core::model::{SimulationConfig, StrategyPair};

use crate::error::{AppError, AppResult, IoContext};

#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    entries: BTreeMap<String, (String, usize)>,
    origin: String,
}

impl KeyValues {
    pub fn parse(text: &str, origin: &str) -> AppResult<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(AppError::Usage(format!(
                    "{origin}:{line_no}: expected `key = value`, got `{line}`"
                )));
            };
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(AppError::Usage(format!("{origin}:{line_no}: empty key")));
            }
            if let Some((_, first)) =
                entries.insert(key.clone(), (value.trim().to_string(), line_no))
            {
                return Err(AppError::Usage(format!(
                    "{origin}:{line_no}: `{key}` already set on line {first}"
                )));
            }
        }
        Ok(Self {
            entries,
            origin: origin.to_string(),
        })
    }

    pub fn load(path: &Path) -> AppResult<Self> {
        let text = std::fs::read_to_string(path).at(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.entries.remove(key)
    }

    fn bad(&self, line: usize, key: &str, value: &str, what: &str) -> AppError {
        AppError::Usage(format!(
            "{}:{line}: `{key} = {value}` is not {what}",
            self.origin
        ))
    }

    pub fn f64(&mut self, key: &str) -> AppResult<Option<f64>> {
        match self.take(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse()
                .map(Some)
                .map_err(|_| self.bad(line, key, &v, "a number")),
        }
    }

    pub fn u64(&mut self, key: &str) -> AppResult<Option<u64>> {
        match self.take(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse()
                .map(Some)
                .map_err(|_| self.bad(line, key, &v, "a non-negative integer")),
        }
    }

    pub fn usize(&mut self, key: &str) -> AppResult<Option<usize>> {
        Ok(self.u64(key)?.map(|v| v as usize))
    }

    pub fn bool(&mut self, key: &str) -> AppResult<Option<bool>> {
        match self.take(key) {
            None => Ok(None),
            Some((v, line)) => match v.as_str() {
                "true" | "yes" | "1" => Ok(Some(true)),
                "false" | "no" | "0" => Ok(Some(false)),
                _ => Err(self.bad(line, key, &v, "a boolean")),
            },
        }
    }

    pub fn list(&mut self, key: &str) -> AppResult<Option<Vec<f64>>> {
        match self.take(key) {
            None => Ok(None),
            Some((v, line)) => parse_list(&v)
                .map(Some)
                .map_err(|what| self.bad(line, key, &v, &what)),
        }
    }

    pub fn words(&mut self, key: &str) -> Option<Vec<String>> {
        self.take(key)
            .map(|(v, _)| v.split(',').map(|w| w.trim().to_string()).collect())
    }

    /// Errors if any key was not consumed.
    pub fn finish(self) -> AppResult<()> {
        match self.entries.iter().next() {
            None => Ok(()),
            Some((key, (_, line))) => Err(AppError::Usage(format!(
                "{}:{line}: unknown key `{key}`",
                self.origin
            ))),
        }
    }
}

/// Comma list or inclusive `start..end:step` range.
///
/// Range points are rounded to the decimals written in `start` and `step`,
/// so `0.1..0.9:0.1` yields `0.3`, not `0.30000000000000004`.
pub fn parse_list(text: &str) -> Result<Vec<f64>, String> {
    if let Some((start, rest)) = text.split_once("..") {
        let (end, step) = rest
            .split_once(':')
            .ok_or_else(|| "a range `start..end:step`".to_string())?;
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| "a range of numbers".to_string())
        };
        let (lo, hi, dx) = (num(start)?, num(end)?, num(step)?);
        if !(dx > 0.0) || hi < lo {
            return Err("a range with positive step and end >= start".into());
        }
        let decimals = decimals(start).max(decimals(step));
        let n = ((hi - lo) / dx + 1e-9).floor() as usize;
        return (0..=n)
            .map(|i| {
                let v = lo + i as f64 * dx;
                format!("{v:.decimals$}")
                    .parse::<f64>()
                    .map_err(|_| "a range of numbers".to_string())
            })
            .collect();
    }
    let values: Result<Vec<f64>, _> = text
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<f64>())
        .collect();
    match values {
        Ok(v) if !v.is_empty() => Ok(v),
        _ => Err("a comma-separated list of numbers".into()),
    }
}

fn decimals(s: &str) -> usize {
    s.trim()
        .split_once('.')
        .map(|(_, frac)| frac.len())
        .unwrap_or(0)
}

/// Simulation settings from a file, before command-line overrides.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimulationKeys {
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub rb0: Option<f64>,
    pub length: Option<usize>,
    pub burn_in: Option<usize>,
    pub seed: Option<u64>,
    pub epsilon_floor: Option<f64>,
}

impl SimulationKeys {
    pub fn from_kv(mut kv: KeyValues) -> AppResult<Self> {
        let keys = Self {
            a: kv.f64("a")?,
            b: kv.f64("b")?,
            rb0: kv.f64("rb0")?,
            length: kv.usize("length")?,
            burn_in: kv.usize("burn_in")?,
            seed: kv.u64("seed")?,
            epsilon_floor: kv.f64("epsilon_floor")?,
        };
        kv.finish()?;
        Ok(keys)
    }

    /// Fields set in `over` win.
    pub fn overlay(self, over: SimulationKeys) -> Self {
        Self {
            a: over.a.or(self.a),
            b: over.b.or(self.b),
            rb0: over.rb0.or(self.rb0),
            length: over.length.or(self.length),
            burn_in: over.burn_in.or(self.burn_in),
            seed: over.seed.or(self.seed),
            epsilon_floor: over.epsilon_floor.or(self.epsilon_floor),
        }
    }

    /// Builds a validated configuration; `a` and `b` must lie in the
    /// production ranges.
    pub fn build(&self) -> AppResult<SimulationConfig> {
        let (Some(a), Some(b)) = (self.a, self.b) else {
            return Err(AppError::Usage("both `a` and `b` are required".into()));
        };
        let pair = StrategyPair::new(a, b)?;
        let mut cfg = SimulationConfig::new(pair, self.seed.unwrap_or(0));
        if let Some(v) = self.rb0 {
            cfg = cfg.with_rb0(v);
        }
        if let Some(v) = self.length {
            cfg = cfg.with_length(v);
        }
        if let Some(v) = self.burn_in {
            cfg = cfg.with_burn_in(v);
        }
        if let Some(v) = self.epsilon_floor {
            cfg.epsilon_floor = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses a sweep file. Grids must lie in `(0, ½) × (0, 1]` unless
/// `allow_convergent = true`, which admits `a = ½` and `b = 0`.
pub fn sweep_spec_from(mut kv: KeyValues) -> AppResult<SweepSpec> {
    let mut spec = SweepSpec::default();
    if let Some(v) = kv.list("a_grid")? {
        spec.a_grid = v;
    }
    if let Some(v) = kv.list("b_grid")? {
        spec.b_grid = v;
    }
    if let Some(v) = kv.usize("runs_per_cell")? {
        spec.runs_per_cell = v;
    }
    if let Some(v) = kv.usize("trail_length")? {
        spec.trail_length = v;
    }
    if let Some(v) = kv.usize("burn_in")? {
        spec.burn_in = v;
    }
    if let Some(v) = kv.f64("rb0")? {
        spec.rb0 = v;
    }
    let seed = kv.u64("master_seed")?;
    let alias = kv.u64("seed")?;
    if seed.is_some() && alias.is_some() {
        return Err(AppError::Usage(
            "set only one of `master_seed` and `seed`".into(),
        ));
    }
    if let Some(v) = seed.or(alias) {
        spec.master_seed = v;
    }
    if let Some(words) = kv.words("analyses") {
        spec.options.analyses = Analyses::from_names(words.iter().map(String::as_str))?;
    }
    if let Some(v) = kv.usize("acf_max_tau")? {
        spec.options.acf_max_tau = v;
    }
    if let Some(v) = kv.usize("acf_fit_lo")? {
        spec.options.acf_fit_range.0 = v;
    }
    if let Some(v) = kv.usize("acf_fit_hi")? {
        spec.options.acf_fit_range.1 = v;
    }
    if let Some(v) = kv.usize("hist_bins")? {
        spec.options.hist_bins = v;
    }
    if let Some(v) = kv.f64("hist_half_width")? {
        spec.options.hist_half_width = v;
    }
    let allow_convergent = kv.bool("allow_convergent")?.unwrap_or(false);
    kv.finish()?;
    if !allow_convergent {
        for &(a, b) in &spec.cells() {
            StrategyPair::new(a, b)?;
        }
    }
    spec.validate()?;
    Ok(spec)
}
