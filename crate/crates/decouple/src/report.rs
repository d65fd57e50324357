//! CSV and JSON report files.
//!
//! Report CSVs start with their fixed header; provenance lives in the
//! accompanying `summary.json`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use decouple_core::ensemble::{AcfSummary, ScalingSummary};
use decouple_core::multiscaling::{ScalingReport, SingularitySpectrum};
use decouple_core::stats::{AcfReport, DistributionReport};
use serde::Serialize;

use crate::error::{AppResult, IoContext};

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt(v: f64) -> String {
    format!("{v:?}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

fn write_lines(path: &Path, header: &str, rows: impl IntoIterator<Item = String>) -> AppResult<()> {
    let mut out = BufWriter::new(File::create(path).at(path)?);
    writeln!(out, "{header}").at(path)?;
    for row in rows {
        writeln!(out, "{row}").at(path)?;
    }
    out.flush().at(path)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> AppResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).at(path)
}

fn acf_header(alphas: &[u32]) -> String {
    let mut h = String::from("tau");
    for a in alphas {
        h.push_str(&format!(",c{a}"));
    }
    h
}

/// `tau,c1,c2,c3`; empty cells where a lag is undefined.
pub fn write_acf_csv(path: &Path, acf: &AcfReport) -> AppResult<()> {
    write_curves(path, &acf.alphas, &acf.taus, &acf.values)
}

/// Ensemble means in the single-series layout.
pub fn write_acf_mean_csv(path: &Path, acf: &AcfSummary) -> AppResult<()> {
    write_curves(path, &acf.alphas, &acf.taus, &acf.mean)
}

fn write_curves(
    path: &Path,
    alphas: &[u32],
    taus: &[usize],
    values: &[Vec<Option<f64>>],
) -> AppResult<()> {
    let rows = taus.iter().enumerate().map(|(i, tau)| {
        let mut row = tau.to_string();
        for curve in values {
            row.push(',');
            row.push_str(&fmt_opt(curve[i]));
        }
        row
    });
    write_lines(path, &acf_header(alphas), rows)
}

/// `tau,alpha,mean,variance,std_dev,count`.
pub fn write_acf_band_csv(path: &Path, acf: &AcfSummary) -> AppResult<()> {
    let mut rows = Vec::new();
    for (k, alpha) in acf.alphas.iter().enumerate() {
        for (i, tau) in acf.taus.iter().enumerate() {
            rows.push(format!(
                "{tau},{alpha},{},{},{},{}",
                fmt_opt(acf.mean[k][i]),
                fmt_opt(acf.variance[k][i]),
                fmt_opt(acf.std_dev[k][i]),
                acf.counts[k][i]
            ));
        }
    }
    write_lines(path, "tau,alpha,mean,variance,std_dev,count", rows)
}

/// `q,zeta,hq,r2`.
pub fn write_scaling_csv(path: &Path, s: &ScalingReport) -> AppResult<()> {
    let rows = (0..s.qs.len()).map(|i| {
        format!(
            "{},{},{},{}",
            fmt(s.qs[i]),
            fmt(s.zeta[i]),
            fmt(s.hq[i]),
            fmt(s.fit_r2[i])
        )
    });
    write_lines(path, "q,zeta,hq,r2", rows)
}

/// `q,zeta,zeta_stderr,hq,hq_stderr`.
pub fn write_scaling_mean_csv(path: &Path, s: &ScalingSummary) -> AppResult<()> {
    let rows = (0..s.qs.len()).map(|i| {
        format!(
            "{},{},{},{},{}",
            fmt(s.qs[i]),
            fmt(s.zeta_mean[i]),
            fmt(s.zeta_stderr[i]),
            fmt(s.hq_mean[i]),
            fmt(s.hq_stderr[i])
        )
    });
    write_lines(path, "q,zeta,zeta_stderr,hq,hq_stderr", rows)
}

/// `alpha,D`.
pub fn write_spectrum_csv(path: &Path, s: &SingularitySpectrum) -> AppResult<()> {
    let rows = s
        .alphas
        .iter()
        .zip(&s.d_of_alpha)
        .map(|(a, d)| format!("{},{}", fmt(*a), fmt(*d)));
    write_lines(path, "alpha,D", rows)
}

/// `bin_left,bin_right,count,log_density`.
pub fn write_hist_csv(path: &Path, h: &DistributionReport) -> AppResult<()> {
    let rows = (0..h.counts.len()).map(|i| {
        format!(
            "{},{},{},{}",
            fmt(h.bin_edges[i]),
            fmt(h.bin_edges[i + 1]),
            h.counts[i],
            fmt_opt(h.log_density[i])
        )
    });
    write_lines(path, "bin_left,bin_right,count,log_density", rows)
}

/// Header names and rows; empty or non-numeric cells are `None`.
pub type NumericTable = (Vec<String>, Vec<Vec<Option<f64>>>);

/// Reads a CSV written by this module.
pub fn read_numeric_csv(path: &Path) -> AppResult<NumericTable> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| crate::error::AppError::data(path, e.to_string()))?;
    let headers = reader.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        rows.push(record?.iter().map(|v| v.parse().ok()).collect());
    }
    Ok((headers, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shortest_round_trip_formatting() {
        for v in [0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.5] {
            assert_eq!(fmt(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
        assert_eq!(fmt(0.5), "0.5");
        assert_eq!(fmt_opt(None), "");
    }
}
