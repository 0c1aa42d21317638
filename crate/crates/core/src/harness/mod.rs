//! The four-way strategy matrix (Global/Block × FP/INT8), solution
//! evaluation and report files.

mod matrix;
mod metrics;
mod report;

pub use matrix::{
    planted_instance, run_matrix, CellReport, Decomposition, Instance, MatrixConfig, MatrixReport,
    PlantedParams, Precision, RunRecord, StrategyVariant,
};
pub use metrics::{
    check_feasibility, evaluate, net_mean_return, sharpe_ratio, EvaluationReport, Feasibility,
    Performance, Sharpe, StepViolation,
};
pub use report::{emit_report, summarize, CellSummary, RunSummary, Summary};
