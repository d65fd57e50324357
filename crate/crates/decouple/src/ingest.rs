//! Daily close series from CSV files.

use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};

/// More unparseable rows than this fraction is a hard error.
pub const UNPARSEABLE_LIMIT: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSpec {
    pub date: String,
    pub close: String,
    /// `chrono` format string; ISO-8601 dates when absent.
    pub date_format: Option<String>,
}

impl Default for ColumnSpec {
    fn default() -> Self {
        Self {
            date: "date".into(),
            close: "close".into(),
            date_format: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub path: String,
    pub rows: usize,
    pub accepted: usize,
    pub missing_close: usize,
    pub non_positive_close: usize,
    pub unparseable: usize,
    /// The file was not in ascending date order.
    pub resorted: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalSeries {
    /// Strictly increasing.
    pub dates: Vec<NaiveDate>,
    /// Positive.
    pub closes: Vec<f64>,
    pub label: String,
    pub report: IngestReport,
}

fn parse_date(text: &str, format: Option<&str>) -> Option<NaiveDate> {
    let text = text.trim();
    match format {
        Some(f) => NaiveDate::parse_from_str(text, f).ok(),
        None => NaiveDate::parse_from_str(text, "%Y-%m-%d")
            .ok()
            .or_else(|| {
                // ISO date-time: keep the date part.
                text.get(..10)
                    .filter(|_| text.as_bytes().get(10) == Some(&b'T'))
                    .and_then(|d| NaiveDate::parse_from_str(d, "%Y-%m-%d").ok())
            }),
    }
}

/// Reads date/close columns, drops rows with missing or non-positive
/// closes, and sorts ascending. Lines starting with `#` are ignored.
pub fn ingest_csv(path: &Path, columns: &ColumnSpec) -> AppResult<EmpiricalSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| AppError::data(path, e.to_string()))?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let (Some(di), Some(ci)) = (find(&columns.date), find(&columns.close)) else {
        return Err(AppError::data(
            path,
            format!(
                "header must name columns `{}` and `{}`; found {:?}",
                columns.date,
                columns.close,
                headers.iter().collect::<Vec<_>>()
            ),
        ));
    };

    let mut report = IngestReport {
        path: path.display().to_string(),
        ..Default::default()
    };
    let mut rows: Vec<(NaiveDate, f64)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        report.rows += 1;
        let line = i + 2;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                report.unparseable += 1;
                report.warnings.push(format!("row {line}: {e}"));
                continue;
            }
        };
        let Some(date) = record
            .get(di)
            .and_then(|d| parse_date(d, columns.date_format.as_deref()))
        else {
            report.unparseable += 1;
            report
                .warnings
                .push(format!("row {line}: unparseable date"));
            continue;
        };
        let close = record.get(ci).unwrap_or("");
        if close.is_empty() || close.eq_ignore_ascii_case("null") || close == "." {
            report.missing_close += 1;
            continue;
        }
        match close.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => rows.push((date, v)),
            Ok(_) => report.non_positive_close += 1,
            Err(_) => {
                report.unparseable += 1;
                report
                    .warnings
                    .push(format!("row {line}: unparseable close `{close}`"));
            }
        }
    }
    if report.rows > 0 && report.unparseable as f64 > UNPARSEABLE_LIMIT * report.rows as f64 {
        return Err(AppError::data(
            path,
            format!(
                "{} of {} rows unparseable (limit {}%); first: {}",
                report.unparseable,
                report.rows,
                UNPARSEABLE_LIMIT * 100.0,
                report.warnings.first().map(String::as_str).unwrap_or("")
            ),
        ));
    }
    if report.missing_close + report.non_positive_close > 0 {
        report.warnings.push(format!(
            "rejected {} rows with missing and {} with non-positive closes",
            report.missing_close, report.non_positive_close
        ));
    }
    if rows.windows(2).any(|w| w[1].0 < w[0].0) {
        rows.sort_by_key(|r| r.0);
        report.resorted = true;
        report
            .warnings
            .push("dates were not ascending; re-sorted".into());
    }
    if let Some(w) = rows.windows(2).find(|w| w[1].0 == w[0].0) {
        return Err(AppError::data(path, format!("duplicate date {}", w[0].0)));
    }
    if rows.len() < 2 {
        return Err(AppError::data(
            path,
            format!("{} usable rows; at least 2 needed for a return", rows.len()),
        ));
    }
    report.accepted = rows.len();
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let (dates, closes) = rows.into_iter().unzip();
    Ok(EmpiricalSeries {
        dates,
        closes,
        label,
        report,
    })
}
