use serde::{Deserialize, Serialize};

use crate::dpo::{objective_terms, DpoConfig, ObjectiveTerms, PortfolioAllocation, RiskMatrix};
use crate::error::{Error, Result};
use crate::market::ReturnPanel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepViolation {
    pub t: usize,
    pub total: u64,
    pub budget: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feasibility {
    pub feasible: bool,
    pub violations: Vec<StepViolation>,
}

/// Feasible iff every step invests exactly `budget` units.
pub fn check_feasibility(alloc: &PortfolioAllocation, budget: u64) -> Feasibility {
    let violations: Vec<_> = alloc
        .step_totals()
        .into_iter()
        .enumerate()
        .filter(|&(_, total)| total != budget)
        .map(|(t, total)| StepViolation { t, total, budget })
        .collect();
    Feasibility {
        feasible: violations.is_empty(),
        violations,
    }
}

fn check_dims(alloc: &PortfolioAllocation, panel: &ReturnPanel) -> Result<()> {
    if alloc.n_t() != panel.n_t() || alloc.n_a() != panel.n_a() {
        return Err(Error::DimensionMismatch {
            expected: panel.n_t() * panel.n_a(),
            actual: alloc.weights.len(),
        });
    }
    Ok(())
}

/// `F^net_t = Σ_a ω_{t,a}μ_{t,a} − νλ Σ_a (ω_{t,a} − ω_{t−1,a})²`, with the
/// initial buy-in charged to `t = 0`.
pub fn net_mean_return(
    alloc: &PortfolioAllocation,
    panel: &ReturnPanel,
    config: &DpoConfig,
) -> Result<Vec<f64>> {
    check_dims(alloc, panel)?;
    let friction = config.nu * config.lambda;
    Ok((0..alloc.n_t())
        .map(|t| {
            let mut f = 0.0;
            let mut c = 0.0;
            for a in 0..alloc.n_a() {
                let w = alloc.weights[[t, a]] as f64;
                f += w * panel.interval_returns[[t, a]];
                let d = w - alloc.previous(t, a) as f64;
                c += d * d;
            }
            f - friction * c
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sharpe {
    /// `F/√R`; absent when the portfolio carries no risk.
    pub value: Option<f64>,
    pub zero_risk: bool,
}

pub fn sharpe_ratio(
    alloc: &PortfolioAllocation,
    panel: &ReturnPanel,
    risks: &[RiskMatrix],
    config: &DpoConfig,
) -> Result<Sharpe> {
    let terms = objective_terms(config, panel, risks, alloc)?;
    Ok(sharpe_from_terms(&terms))
}

fn sharpe_from_terms(terms: &ObjectiveTerms) -> Sharpe {
    if terms.risk > 0.0 {
        Sharpe {
            value: Some(terms.expected_return / terms.risk.sqrt()),
            zero_risk: false,
        }
    } else {
        Sharpe {
            value: None,
            zero_risk: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Performance {
    pub net_returns: Vec<f64>,
    pub total_net_return: f64,
    pub sharpe: Sharpe,
    pub objective_terms: ObjectiveTerms,
}

/// Feasibility first; performance only exists for feasible allocations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub feasibility: Feasibility,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub performance: Option<Performance>,
}

pub fn evaluate(
    alloc: &PortfolioAllocation,
    panel: &ReturnPanel,
    risks: &[RiskMatrix],
    config: &DpoConfig,
) -> Result<EvaluationReport> {
    check_dims(alloc, panel)?;
    let feasibility = check_feasibility(alloc, config.budget);
    let performance = if feasibility.feasible {
        let terms = objective_terms(config, panel, risks, alloc)?;
        let net_returns = net_mean_return(alloc, panel, config)?;
        Some(Performance {
            total_net_return: net_returns.iter().sum(),
            net_returns,
            sharpe: sharpe_from_terms(&terms),
            objective_terms: terms,
        })
    } else {
        None
    };
    Ok(EvaluationReport {
        feasibility,
        performance,
    })
}
