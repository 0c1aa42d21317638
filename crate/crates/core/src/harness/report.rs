//! Report files for a strategy matrix.
//!
//! Everything under the output directory except `logs/` depends only on the
//! inputs and seeds, so reruns produce byte-identical files. Wall-clock
//! timings and per-update traces go to `logs/`.
//!
//! | file                        | content                                   |
//! |-----------------------------|-------------------------------------------|
//! | `summary.json`              | one row per cell plus every run           |
//! | `summary.csv`               | the same rows, flat                       |
//! | `series/<variant>_<backend>.csv` | `t,net_return` for feasible cells    |
//! | `logs/timings.csv`          | solver and preparation seconds per run    |
//! | `logs/traces.jsonl`         | block-update records of block strategies  |

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::matrix::{CellReport, MatrixReport, StrategyVariant};
use super::metrics::StepViolation;
use crate::dpo::ObjectiveTerms;
use crate::error::Result;

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub run: usize,
    pub seed: u64,
    pub feasible: bool,
    pub energy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total_net_return: Option<f64>,
    pub assignment: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CellSummary {
    pub variant: String,
    pub backend: String,
    /// `feasible`, `infeasible` or `error`.
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selected_run: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<StepViolation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sharpe: Option<f64>,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub zero_risk: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total_net_return: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub net_returns: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective_terms: Option<ObjectiveTerms>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inter_block_zeroed_fraction: Option<f64>,
    pub runs: Vec<RunSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub instance: String,
    pub n: usize,
    pub cells: Vec<CellSummary>,
}

fn summarize_cell(cell: &CellReport) -> CellSummary {
    let runs = cell
        .runs
        .iter()
        .map(|r| RunSummary {
            run: r.run,
            seed: r.seed,
            feasible: r.feasible(),
            energy: r.energy,
            total_net_return: r.total_net_return(),
            assignment: r.assignment.to_string(),
        })
        .collect();
    let selected = cell.selected_run();
    let performance = selected.and_then(|r| r.evaluation.performance.as_ref());
    let status = match (&cell.error, selected) {
        (Some(_), _) | (None, None) => "error",
        (None, Some(r)) if r.feasible() => "feasible",
        _ => "infeasible",
    };
    CellSummary {
        variant: cell.variant.to_string(),
        backend: cell.backend.clone(),
        status,
        error: cell.error.clone(),
        selected_run: cell.selected,
        energy: selected.map(|r| r.energy),
        violations: selected
            .map(|r| r.evaluation.feasibility.violations.clone())
            .unwrap_or_default(),
        sharpe: performance.and_then(|p| p.sharpe.value),
        zero_risk: performance.is_some_and(|p| p.sharpe.zero_risk),
        total_net_return: performance.map(|p| p.total_net_return),
        net_returns: performance.map(|p| p.net_returns.clone()),
        objective_terms: performance.map(|p| p.objective_terms),
        inter_block_zeroed_fraction: selected
            .and_then(|r| r.loss.as_ref())
            .and_then(|l| l.inter_zeroed_fraction()),
        runs,
    }
}

pub fn summarize(report: &MatrixReport) -> Summary {
    Summary {
        instance: report.instance.clone(),
        n: report.n,
        cells: report.cells.iter().map(summarize_cell).collect(),
    }
}

fn series_name(variant: StrategyVariant, backend: &str) -> String {
    let backend: String = backend
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '-' })
        .collect();
    format!("{variant}_{}.csv", backend.trim_matches('-'))
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes the report files into `dir` and returns their paths.
pub fn emit_report(report: &MatrixReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir.join("series"))?;
    fs::create_dir_all(dir.join("logs"))?;
    let summary = summarize(report);
    let mut written = Vec::new();

    let path = dir.join("summary.json");
    let mut out = BufWriter::new(File::create(&path)?);
    serde_json::to_writer_pretty(&mut out, &summary)?;
    out.write_all(b"\n")?;
    out.flush()?;
    written.push(path);

    let path = dir.join("summary.csv");
    let mut csv = csv::Writer::from_path(&path)?;
    csv.write_record([
        "variant",
        "backend",
        "status",
        "selected_run",
        "energy",
        "sharpe",
        "total_net_return",
        "violated_steps",
    ])?;
    for c in &summary.cells {
        csv.write_record([
            c.variant.clone(),
            c.backend.clone(),
            c.status.to_string(),
            c.selected_run.map(|r| r.to_string()).unwrap_or_default(),
            opt(c.energy),
            opt(c.sharpe),
            opt(c.total_net_return),
            c.violations.len().to_string(),
        ])?;
    }
    csv.flush()?;
    written.push(path);

    for (cell, s) in report.cells.iter().zip(&summary.cells) {
        if let Some(series) = &s.net_returns {
            let path = dir.join("series").join(series_name(cell.variant, &cell.backend));
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(["t", "net_return"])?;
            for (t, v) in series.iter().enumerate() {
                w.write_record([t.to_string(), v.to_string()])?;
            }
            w.flush()?;
            written.push(path);
        }
    }

    let path = dir.join("logs").join("timings.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["variant", "backend", "run", "solve_seconds", "prep_seconds"])?;
    for cell in &report.cells {
        for r in &cell.runs {
            w.write_record([
                cell.variant.to_string(),
                cell.backend.clone(),
                r.run.to_string(),
                r.solve_seconds.to_string(),
                r.prep_seconds.to_string(),
            ])?;
        }
    }
    w.flush()?;
    written.push(path);

    let path = dir.join("logs").join("traces.jsonl");
    let mut w = BufWriter::new(File::create(&path)?);
    for cell in &report.cells {
        for r in &cell.runs {
            for record in r.trace.iter().flatten() {
                let line = serde_json::json!({
                    "variant": cell.variant.to_string(),
                    "backend": cell.backend,
                    "run": r.run,
                    "record": record,
                });
                serde_json::to_writer(&mut w, &line)?;
                w.write_all(b"\n")?;
            }
        }
    }
    w.flush()?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::matrix::{CellReport, RunRecord};
    use crate::harness::metrics::{EvaluationReport, Feasibility};
    use crate::qubo::Assignment;

    fn report(feasible: bool) -> MatrixReport {
        let violations = if feasible {
            vec![]
        } else {
            vec![StepViolation { t: 0, total: 0, budget: 1 }]
        };
        let performance = feasible.then(|| crate::harness::metrics::Performance {
            net_returns: vec![0.1, 0.2],
            total_net_return: 0.3,
            sharpe: crate::harness::metrics::Sharpe {
                value: Some(1.5),
                zero_risk: false,
            },
            objective_terms: ObjectiveTerms {
                expected_return: 0.4,
                risk: 0.1,
                transaction: 0.1,
                budget_penalty: 0.0,
                objective: 0.2,
            },
        });
        MatrixReport {
            instance: "toy".into(),
            n: 2,
            cells: vec![CellReport {
                variant: StrategyVariant::BLOCK_FP,
                backend: "sa".into(),
                runs: vec![RunRecord {
                    run: 0,
                    seed: 7,
                    assignment: Assignment::zeros(2),
                    energy: -0.2,
                    evaluation: EvaluationReport {
                        feasibility: Feasibility {
                            feasible,
                            violations,
                        },
                        performance,
                    },
                    solve_seconds: 0.01,
                    prep_seconds: 0.0,
                    loss: None,
                    trace: None,
                }],
                selected: Some(0),
                error: None,
            }],
        }
    }

    #[test]
    fn feasible_cell_writes_series() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&report(true), dir.path()).unwrap();
        assert!(files.iter().any(|p| p.ends_with("series/Block-FP_sa.csv")));
        let csv = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.lines().nth(1).unwrap().contains("feasible"));
    }

    #[test]
    fn infeasible_cell_has_no_metrics() {
        let dir = tempfile::tempdir().unwrap();
        emit_report(&report(false), dir.path()).unwrap();
        assert_eq!(fs::read_dir(dir.path().join("series")).unwrap().count(), 0);
        let json = fs::read_to_string(dir.path().join("summary.json")).unwrap();
        assert!(json.contains("\"infeasible\""));
        assert!(!json.contains("sharpe") && !json.contains("net_return"));
    }

    #[test]
    fn summary_excludes_timings() {
        let dir = tempfile::tempdir().unwrap();
        emit_report(&report(true), dir.path()).unwrap();
        let json = fs::read_to_string(dir.path().join("summary.json")).unwrap();
        assert!(!json.contains("seconds"));
    }
}
