//! Simulated trails as CSV with `# key=value` metadata lines.
//!
//! ```text
//! # format_version=1
//! # kind=trail
//! # seed=7
//! ...
//! t,s1,s2,rb,log_return
//! 0,0.4712…,0.5287…,0.5,
//! 1,…
//! ```
//!
//! Numbers use the shortest representation that parses back to the same
//! `f64`, so a trail read back reproduces the in-memory one bit for bit.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use decouple_core::model::{
    Prices, SimulationConfig, StrategyPair, Trail, TrailDiagnostics, TrailMeta, TrailSource,
};
use decouple_core::stats;

use crate::error::{AppError, AppResult, IoContext};
use crate::report::fmt;

pub const FORMAT_VERSION: u32 = 1;
pub const TOOL: &str = concat!("decouple ", env!("CARGO_PKG_VERSION"));

pub fn write_trail_csv(path: &Path, trail: &Trail, cfg: &SimulationConfig) -> AppResult<()> {
    let Prices::Simplex(prices) = &trail.prices else {
        return Err(AppError::Usage(
            "only simulated trails can be written as trail CSV".into(),
        ));
    };
    let mut out = BufWriter::new(File::create(path).at(path)?);
    let d = &trail.diagnostics;
    let meta = [
        ("format_version", FORMAT_VERSION.to_string()),
        ("kind", "trail".into()),
        ("tool", TOOL.into()),
        ("seed", cfg.seed.to_string()),
        ("run_index", trail.meta.run_index.unwrap_or(0).to_string()),
        ("config_hash", cfg.config_hash()),
        ("a", fmt(cfg.strategies.a())),
        ("b", fmt(cfg.strategies.b())),
        ("rb0", fmt(cfg.rb0)),
        ("length", cfg.trail_length.to_string()),
        ("burn_in", cfg.burn_in.to_string()),
        ("epsilon_floor", fmt(cfg.epsilon_floor)),
        ("max_simplex_error", fmt(d.max_simplex_error)),
        ("max_closure_error", fmt(d.max_closure_error)),
        (
            "extinct_at",
            d.extinct_at.map(|t| t.to_string()).unwrap_or_default(),
        ),
    ];
    for (k, v) in meta {
        writeln!(out, "# {k}={v}").at(path)?;
    }
    writeln!(out, "t,s1,s2,rb,log_return").at(path)?;
    for (t, s) in prices.iter().enumerate() {
        let r = if t == 0 {
            String::new()
        } else {
            fmt(trail.returns[t - 1])
        };
        writeln!(
            out,
            "{t},{},{},{},{r}",
            fmt(s[0]),
            fmt(s[1]),
            fmt(trail.fast_wealth[t])
        )
        .at(path)?;
    }
    out.flush().at(path)
}

/// Leading `# key=value` lines of a file.
pub fn read_metadata(path: &Path) -> AppResult<BTreeMap<String, String>> {
    let reader = BufReader::new(File::open(path).at(path)?);
    let mut meta = BTreeMap::new();
    for line in reader.lines() {
        let line = line.at(path)?;
        let Some(rest) = line.strip_prefix('#') else {
            break;
        };
        if let Some((k, v)) = rest.trim().split_once('=') {
            meta.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    Ok(meta)
}

pub fn is_trail_file(path: &Path) -> AppResult<bool> {
    Ok(read_metadata(path)?.get("kind").map(String::as_str) == Some("trail"))
}

pub struct TrailFile {
    pub meta: BTreeMap<String, String>,
    pub trail: Trail,
}

pub fn read_trail_csv(path: &Path) -> AppResult<TrailFile> {
    let meta = read_metadata(path)?;
    match meta.get("format_version").map(String::as_str) {
        Some("1") => {}
        other => {
            return Err(AppError::data(
                path,
                format!("unsupported trail format_version {other:?}"),
            ))
        }
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| AppError::data(path, e.to_string()))?;
    let mut prices = Vec::new();
    let mut wealth = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let field = |k: usize| -> AppResult<f64> {
            record
                .get(k)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| AppError::data(path, format!("row {}: bad column {k}", i + 2)))
        };
        prices.push([field(1)?, field(2)?]);
        wealth.push(field(3)?);
    }
    let s1: Vec<f64> = prices.iter().map(|s| s[0]).collect();
    let returns = stats::log_returns(&s1)?;
    let num = |k: &str| meta.get(k).and_then(|v| v.parse::<f64>().ok());
    let int = |k: &str| meta.get(k).and_then(|v| v.parse::<u64>().ok());
    let strategies = match (num("a"), num("b")) {
        (Some(a), Some(b)) => Some(StrategyPair::unrestricted(a, b)?),
        _ => None,
    };
    let trail = Trail {
        returns,
        fast_wealth: wealth,
        meta: TrailMeta {
            source: TrailSource::Simulated,
            seed: int("seed"),
            run_index: int("run_index"),
            origin: meta.get("config_hash").cloned().unwrap_or_default(),
            length: prices.len(),
            burn_in: int("burn_in").unwrap_or(0) as usize,
            strategies,
        },
        diagnostics: TrailDiagnostics {
            max_simplex_error: num("max_simplex_error").unwrap_or(0.0),
            max_closure_error: num("max_closure_error").unwrap_or(0.0),
            extinct_at: int("extinct_at").map(|t| t as usize),
        },
        prices: Prices::Simplex(prices),
    };
    Ok(TrailFile { meta, trail })
}

#[cfg(test)]
mod tests {
    use super::*;
    use decouple_core::model::simulate_trail;

    #[test]
    fn round_trip_is_bitwise() {
        let cfg = SimulationConfig::new(StrategyPair::new(0.4, 0.45).unwrap(), 7).with_length(500);
        let trail = simulate_trail(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trail.csv");
        write_trail_csv(&path, &trail, &cfg).unwrap();
        assert!(is_trail_file(&path).unwrap());
        let back = read_trail_csv(&path).unwrap();
        assert_eq!(back.trail.prices, trail.prices);
        assert_eq!(back.trail.returns, trail.returns);
        assert_eq!(back.trail.fast_wealth, trail.fast_wealth);
        assert_eq!(back.meta["config_hash"], cfg.config_hash());
        assert_eq!(back.trail.meta.seed, Some(7));
    }
}
