//! Result tables, dataset statistics and run manifests.

use std::fmt::Write as _;

use mealrec_core::numeric::fixed;
use mealrec_core::{CategoryStats, ExperimentSpec, ResultRow};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ReportFormat {
    Csv,
    Table,
    Json,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ReportError {
    #[error("no result rows to report")]
    EmptyRows,
}

const KEY_COLUMNS: [&str; 3] = ["config", "horizon", "algorithm"];

fn cells(row: &ResultRow) -> Vec<String> {
    let mut out = vec![
        row.config.clone(),
        row.horizon.to_string(),
        row.algorithm.to_string(),
    ];
    out.extend(row.values().iter().map(|&v| fixed(v, 3)));
    out
}

fn header() -> Vec<&'static str> {
    KEY_COLUMNS
        .iter()
        .chain(ResultRow::COLUMNS.iter())
        .copied()
        .collect()
}

/// Render rows in the given format. Rows are emitted in the order given;
/// numeric columns use 3 decimals with halves rounded up (csv and table),
/// json keeps full precision.
pub fn emit_report(rows: &[ResultRow], format: ReportFormat) -> Result<String, ReportError> {
    if rows.is_empty() {
        return Err(ReportError::EmptyRows);
    }
    Ok(match format {
        ReportFormat::Csv => {
            let mut out = header().join(",");
            out.push('\n');
            for row in rows {
                out.push_str(&cells(row).join(","));
                out.push('\n');
            }
            out
        }
        ReportFormat::Table => {
            let head: Vec<String> = header().into_iter().map(String::from).collect();
            let body: Vec<Vec<String>> = rows.iter().map(cells).collect();
            aligned(&head, &body, KEY_COLUMNS.len())
        }
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(rows).expect("rows serialize");
            s.push('\n');
            s
        }
    })
}

pub fn parse_json_report(text: &str) -> serde_json::Result<Vec<ResultRow>> {
    serde_json::from_str(text)
}

/// Left-align the first `text_columns` columns, right-align the rest.
fn aligned(head: &[String], body: &[Vec<String>], text_columns: usize) -> String {
    let mut widths: Vec<usize> = head.iter().map(|h| h.chars().count()).collect();
    for row in body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    for row in std::iter::once(head).chain(body.iter().map(Vec::as_slice)) {
        let mut line = String::new();
        for (i, (cell, w)) in row.iter().zip(&widths).enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            if i < text_columns {
                let _ = write!(line, "{cell:<w$}");
            } else {
                let _ = write!(line, "{cell:>w$}");
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum StatsFormat {
    Table,
    Json,
}

#[derive(Serialize)]
struct StatsDoc<'a> {
    category: &'a str,
    count: usize,
    flag_pct: serde_json::Map<String, serde_json::Value>,
}

/// Category table with one percentage column per flag and the item count.
pub fn emit_stats(stats: &[CategoryStats], format: StatsFormat) -> String {
    match format {
        StatsFormat::Json => {
            let docs: Vec<StatsDoc> = stats
                .iter()
                .map(|s| StatsDoc {
                    category: &s.category,
                    count: s.count,
                    flag_pct: s
                        .flag_pct
                        .iter()
                        .map(|(k, v)| (k.clone(), serde_json::json!(v)))
                        .collect(),
                })
                .collect();
            let mut s = serde_json::to_string_pretty(&docs).expect("stats serialize");
            s.push('\n');
            s
        }
        StatsFormat::Table => {
            let mut head = vec!["category".to_string()];
            if let Some(first) = stats.first() {
                head.extend(first.flag_pct.iter().map(|(k, _)| format!("{k} %")));
            }
            head.push("count".into());
            let body: Vec<Vec<String>> = stats
                .iter()
                .map(|s| {
                    let mut row = vec![s.category.clone()];
                    row.extend(s.flag_pct.iter().map(|&(_, v)| fixed(v, 2)));
                    row.push(s.count.to_string());
                    row
                })
                .collect();
            aligned(&head, &body, 1)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    /// File path, or `<fixture>` for the bundled data.
    pub source: String,
    pub recipes: usize,
    pub sha256: String,
}

/// Everything needed to rerun a simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub dataset: DatasetInfo,
    pub spec: ExperimentSpec,
    pub rows: usize,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(dataset: DatasetInfo, spec: ExperimentSpec, rows: usize, outputs: Vec<String>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            dataset,
            spec,
            rows,
            outputs,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::Digest;
    sha2::Sha256::digest(bytes)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use mealrec_core::RecommenderKind;

    fn row(uc: f64) -> ResultRow {
        ResultRow {
            config: "c1".into(),
            horizon: 1,
            algorithm: RecommenderKind::Bandit,
            uc,
            dm: 0.89,
            mc: 0.993,
            uc_dm_mc: 0.919,
            uc_dm: 0.883,
            uc_mc: 0.934,
            dm_mc: 0.942,
        }
    }

    #[test]
    fn csv_rounds_half_up() {
        let csv = emit_report(&[row(0.8895)], ReportFormat::Csv).unwrap();
        assert_eq!(
            csv,
            "config,horizon,algorithm,uc,dm,mc,uc_dm_mc,uc_dm,uc_mc,dm_mc\n\
             c1,1,bandit,0.890,0.890,0.993,0.919,0.883,0.934,0.942\n"
        );
    }

    #[test]
    fn table_is_aligned() {
        let t = emit_report(&[row(0.5), row(1.0)], ReportFormat::Table).unwrap();
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("config  horizon  algorithm"));
        assert!(lines[1].ends_with("0.942"));
        assert_eq!(lines[1].len(), lines[2].len());
    }

    #[test]
    fn empty_rows_are_an_error() {
        assert_eq!(emit_report(&[], ReportFormat::Csv), Err(ReportError::EmptyRows));
    }

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
