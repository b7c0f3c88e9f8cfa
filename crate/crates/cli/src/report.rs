//! Canonical result files.
//!
//! `rows.csv` carries the deterministic per-run columns and is byte-identical
//! across reruns of the same config; wall-clock timings go to `timing.csv`
//! (volatile by nature) and the per-cell aggregates to `summary.json`.
//! Numbers are rounded to six significant digits before formatting.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::experiment::{ResultRow, SummaryRow, SweepRow};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no rows to emit")]
    Empty,
    #[error("failed to write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Rounds to `digits` significant digits; the CSV/JSON number format.
pub fn round_sig(x: f64, digits: i32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let magnitude = x.abs().log10().floor() as i32;
    let factor = 10f64.powi(digits - 1 - magnitude);
    (x * factor).round() / factor
}

/// Fixed-precision rendering used in every emitted file.
pub fn fmt_num(x: f64) -> String {
    format!("{}", round_sig(x, 6))
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

#[derive(Debug, Clone)]
pub struct ReportFiles {
    pub rows_csv: PathBuf,
    pub timing_csv: PathBuf,
    pub summary_json: PathBuf,
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), ReportError> {
    fs::write(path, contents).map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Recomputes the per-(instance, scenario, method) aggregates from rows;
/// skipped rows are excluded. Also the reference the emitted summary is
/// checked against in tests.
pub fn compute_summary(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, String, String)> = rows
        .iter()
        .map(|r| (r.instance_id.clone(), r.scenario_tag.clone(), r.method.clone()))
        .collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|(instance_id, scenario_tag, method)| {
            let group: Vec<&ResultRow> = rows
                .iter()
                .filter(|r| {
                    r.is_ok()
                        && r.instance_id == instance_id
                        && r.scenario_tag == scenario_tag
                        && r.method == method
                })
                .collect();
            let gaps: Vec<f64> = group.iter().filter_map(|r| r.gap_to_best_pct).collect();
            let n = group.len();
            SummaryRow {
                instance_id,
                scenario_tag,
                method,
                replications: n,
                gap_a_pct: if gaps.is_empty() {
                    0.0
                } else {
                    gaps.iter().sum::<f64>() / gaps.len() as f64
                },
                gap_w_pct: gaps.iter().copied().fold(0.0, f64::max),
                cpu_mean_s: if n == 0 {
                    0.0
                } else {
                    group.iter().map(|r| r.wall_time_s).sum::<f64>() / n as f64
                },
            }
        })
        .collect()
}

/// Writes `rows.csv` (deterministic columns), `timing.csv` (wall times), and
/// `summary.json`. Refuses empty input; creates the directory if needed.
pub fn emit_report(
    rows: &[ResultRow],
    summary: &[SummaryRow],
    dir: &Path,
) -> Result<ReportFiles, ReportError> {
    if rows.is_empty() {
        return Err(ReportError::Empty);
    }
    fs::create_dir_all(dir).map_err(|source| ReportError::Io {
        path: dir.display().to_string(),
        source,
    })?;

    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record([
        "instance_id",
        "replication",
        "method",
        "scenario_tag",
        "status",
        "solver_objective",
        "exact_value",
        "gap_to_best_pct",
        "eval_samples",
    ])?;
    for row in rows {
        writer.write_record([
            row.instance_id.as_str(),
            &row.replication.to_string(),
            row.method.as_str(),
            row.scenario_tag.as_str(),
            row.status.as_str(),
            &fmt_opt(row.solver_objective),
            &fmt_opt(row.exact_value),
            &fmt_opt(row.gap_to_best_pct),
            &row.eval_samples.to_string(),
        ])?;
    }
    let rows_csv = dir.join("rows.csv");
    write_file(&rows_csv, &writer.into_inner().expect("in-memory writer"))?;

    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["instance_id", "replication", "method", "scenario_tag", "wall_time_s"])?;
    for row in rows {
        writer.write_record([
            row.instance_id.as_str(),
            &row.replication.to_string(),
            row.method.as_str(),
            row.scenario_tag.as_str(),
            &fmt_num(row.wall_time_s),
        ])?;
    }
    let timing_csv = dir.join("timing.csv");
    write_file(&timing_csv, &writer.into_inner().expect("in-memory writer"))?;

    let rounded: Vec<serde_json::Value> = summary
        .iter()
        .map(|s| {
            serde_json::json!({
                "instance_id": s.instance_id,
                "scenario_tag": s.scenario_tag,
                "method": s.method,
                "replications": s.replications,
                "gap_a_pct": round_sig(s.gap_a_pct, 6),
                "gap_w_pct": round_sig(s.gap_w_pct, 6),
                "cpu_mean_s": round_sig(s.cpu_mean_s, 6),
            })
        })
        .collect();
    let summary_json = dir.join("summary.json");
    write_file(
        &summary_json,
        serde_json::to_string_pretty(&rounded)?.as_bytes(),
    )?;

    Ok(ReportFiles {
        rows_csv,
        timing_csv,
        summary_json,
    })
}

/// Writes the plot-ready `sweep.csv`.
pub fn emit_sweep(rows: &[SweepRow], dir: &Path) -> Result<PathBuf, ReportError> {
    if rows.is_empty() {
        return Err(ReportError::Empty);
    }
    fs::create_dir_all(dir).map_err(|source| ReportError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record([
        "axis",
        "axis_value",
        "method",
        "replications",
        "mean_objective",
        "ci95_objective",
        "mean_cpu_s",
        "ci95_cpu_s",
        "cpu_ratio_pct",
    ])?;
    for row in rows {
        writer.write_record([
            row.axis.as_str(),
            &fmt_num(row.axis_value),
            row.method.as_str(),
            &row.replications.to_string(),
            &fmt_num(row.mean_objective),
            &fmt_num(row.ci95_objective),
            &fmt_num(row.mean_cpu_s),
            &fmt_num(row.ci95_cpu_s),
            &fmt_opt(row.cpu_ratio_pct),
        ])?;
    }
    let path = dir.join("sweep.csv");
    write_file(&path, &writer.into_inner().expect("in-memory writer"))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_keeps_six_significant_digits() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(0.123456789), "0.123457");
        assert_eq!(fmt_num(123456.789), "123457");
        assert_eq!(fmt_num(-0.0001234564), "-0.000123456");
        assert_eq!(fmt_num(1.98), "1.98");
    }

    fn row(method: &str, value: Option<f64>, gap: Option<f64>, status: &str) -> ResultRow {
        ResultRow {
            instance_id: "D1-S1".into(),
            replication: 0,
            method: method.into(),
            scenario_tag: "nominal".into(),
            status: status.into(),
            solver_objective: value,
            exact_value: value,
            gap_to_best_pct: gap,
            eval_samples: 0,
            wall_time_s: 0.25,
        }
    }

    #[test]
    fn empty_rows_are_rejected_and_no_file_created() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("results");
        assert!(matches!(emit_report(&[], &[], &out), Err(ReportError::Empty)));
        assert!(!out.exists());
    }

    #[test]
    fn skipped_rows_do_not_contaminate_summaries() {
        let rows = vec![
            row("dap", Some(1.0), Some(50.0), "ok"),
            row("dap", None, None, "skipped:no_distances"),
            row("surrogate", Some(2.0), Some(0.0), "ok"),
        ];
        let summary = compute_summary(&rows);
        let dap = summary.iter().find(|s| s.method == "dap").unwrap();
        assert_eq!(dap.replications, 1);
        assert_eq!(dap.gap_a_pct, 50.0);
        assert_eq!(dap.gap_w_pct, 50.0);
    }

    #[test]
    fn unicode_instance_ids_survive_the_round_trip() {
        let mut rows = vec![row("dap", Some(1.0), Some(0.0), "ok")];
        rows[0].instance_id = "грузовик-Ω".into();
        let summary = compute_summary(&rows);
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&rows, &summary, dir.path()).unwrap();
        let text = std::fs::read_to_string(files.rows_csv).unwrap();
        assert!(text.contains("грузовик-Ω"));
    }
}
