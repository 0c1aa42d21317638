//! Dynamic portfolio model: risk estimators, the objective
//! `O(Ω) = F − R − C − B`, and its binary encoding as a time-blocked QUBO.
//!
//! Weights are integers `ω_{t,a} = Σ_r 2^r x_{t,a,r}` with variable index
//! `(t·N_a + a)·N_r + r`, so each rebalancing time owns a contiguous block of
//! `N_a·N_r` variables. The QUBO is `−O` exactly, offset included.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{ReturnPanel, TrimRule};
use crate::qubo::{Assignment, BlockPartition, Qubo};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RiskModel {
    #[default]
    Covariance,
    /// Downside co-movement below `benchmark`.
    Semicovariance {
        #[serde(default)]
        benchmark: f64,
    },
    /// Linear shrinkage toward `(tr Σ/N_a)·I`. `intensity` overrides the
    /// estimated δ when set.
    Shrinkage {
        #[serde(default)]
        intensity: Option<f64>,
    },
}

impl RiskModel {
    pub fn label(&self) -> &'static str {
        match self {
            RiskModel::Covariance => "covariance",
            RiskModel::Semicovariance { .. } => "semicovariance",
            RiskModel::Shrinkage { .. } => "shrinkage",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShrinkageDiagnostics {
    pub delta: f64,
    pub alpha_hat: f64,
    pub beta_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskMatrix {
    pub matrix: Array2<f64>,
    pub shrinkage: Option<ShrinkageDiagnostics>,
}

fn interval_view(panel: &ReturnPanel, t: usize) -> Result<ndarray::ArrayView2<'_, f64>> {
    if panel.dt < 2 {
        return Err(Error::InvalidConfig(format!(
            "risk estimation needs at least 2 daily returns per interval, dt = {}",
            panel.dt
        )));
    }
    if t >= panel.n_t() {
        return Err(Error::DimensionMismatch {
            expected: panel.n_t(),
            actual: t,
        });
    }
    Ok(panel.daily_returns.slice(ndarray::s![panel.interval_days(t), ..]))
}

/// Sample covariance of interval `t` with the `1/(dt−1)` normalization.
pub fn covariance_risk(panel: &ReturnPanel, t: usize) -> Result<RiskMatrix> {
    let days = interval_view(panel, t)?;
    let dt = panel.dt as f64;
    let means = days.sum_axis(ndarray::Axis(0)) / dt;
    let centered = &days - &means;
    let matrix = centered.t().dot(&centered) / (dt - 1.0);
    Ok(RiskMatrix {
        matrix,
        shrinkage: None,
    })
}

/// `(1/(dt−1))·Σ_s min(μ_{s,a} − B, 0)·min(μ_{s,b} − B, 0)`, no centering.
pub fn semicovariance_risk(panel: &ReturnPanel, t: usize, benchmark: f64) -> Result<RiskMatrix> {
    if !benchmark.is_finite() {
        return Err(Error::InvalidConfig("semicovariance benchmark must be finite".into()));
    }
    let days = interval_view(panel, t)?;
    let clipped = days.mapv(|v| (v - benchmark).min(0.0));
    let matrix = clipped.t().dot(&clipped) / (panel.dt as f64 - 1.0);
    Ok(RiskMatrix {
        matrix,
        shrinkage: None,
    })
}

/// `(1−δ)·Σ + δ·(tr Σ/N_a)·I` with `δ = clip(β̂/α̂, 0, 1)`,
/// `α̂ = ‖Σ − F‖²_F` and `β̂ = min(α̂, dt⁻²·Σ_s ‖y_s y_sᵀ − Σ‖²_F)` over the
/// centered daily vectors `y_s`. When `α̂ = 0`, δ is 0.
pub fn shrinkage_risk(panel: &ReturnPanel, t: usize, intensity: Option<f64>) -> Result<RiskMatrix> {
    let days = interval_view(panel, t)?;
    let cov = covariance_risk(panel, t)?.matrix;
    let n_a = panel.n_a();
    let dt = panel.dt as f64;
    let target_scale = if n_a == 0 { 0.0 } else { cov.diag().sum() / n_a as f64 };
    let target = Array2::<f64>::eye(n_a) * target_scale;
    let alpha_hat = (&cov - &target).mapv(|v| v * v).sum();

    let means = days.sum_axis(ndarray::Axis(0)) / dt;
    let mut noise = 0.0;
    for row in days.rows() {
        let y = &row - &means;
        for a in 0..n_a {
            for b in 0..n_a {
                let d = y[a] * y[b] - cov[[a, b]];
                noise += d * d;
            }
        }
    }
    let beta_hat = (noise / (dt * dt)).min(alpha_hat);
    let delta = match intensity {
        Some(d) if (0.0..=1.0).contains(&d) => d,
        Some(d) => {
            return Err(Error::InvalidConfig(format!("shrinkage intensity {d} outside [0, 1]")));
        }
        None if alpha_hat == 0.0 => 0.0,
        None => (beta_hat / alpha_hat).clamp(0.0, 1.0),
    };
    let matrix = &cov * (1.0 - delta) + &target * delta;
    Ok(RiskMatrix {
        matrix,
        shrinkage: Some(ShrinkageDiagnostics {
            delta,
            alpha_hat,
            beta_hat,
        }),
    })
}

pub fn risk_matrix(panel: &ReturnPanel, t: usize, model: RiskModel) -> Result<RiskMatrix> {
    match model {
        RiskModel::Covariance => covariance_risk(panel, t),
        RiskModel::Semicovariance { benchmark } => semicovariance_risk(panel, t, benchmark),
        RiskModel::Shrinkage { intensity } => shrinkage_risk(panel, t, intensity),
    }
}

/// One risk matrix per rebalancing time.
pub fn risk_matrices(panel: &ReturnPanel, model: RiskModel) -> Result<Vec<RiskMatrix>> {
    (0..panel.n_t()).map(|t| risk_matrix(panel, t, model)).collect()
}

/// Model hyperparameters. `rho = None` resolves to `2·max|μ|` from the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DpoConfig {
    pub n_t: usize,
    pub n_a: usize,
    pub n_r: usize,
    pub budget: u64,
    pub nu: f64,
    pub lambda: f64,
    pub rho: Option<f64>,
    pub gamma: f64,
    pub dt: usize,
    pub risk: RiskModel,
    pub trim: TrimRule,
}

impl Default for DpoConfig {
    fn default() -> Self {
        Self::size(ProblemSize::S)
    }
}

/// Named instance sizes: 2, 6 and 22 rebalancing times over 6 assets at 4 bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProblemSize {
    S,
    M,
    L,
}

impl std::str::FromStr for ProblemSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "S" => Ok(ProblemSize::S),
            "M" => Ok(ProblemSize::M),
            "L" => Ok(ProblemSize::L),
            other => Err(Error::InvalidConfig(format!("unknown size '{other}' (S, M or L)"))),
        }
    }
}

impl DpoConfig {
    pub fn size(size: ProblemSize) -> Self {
        let n_t = match size {
            ProblemSize::S => 2,
            ProblemSize::M => 6,
            ProblemSize::L => 22,
        };
        Self {
            n_t,
            n_a: 6,
            n_r: 4,
            budget: 15,
            nu: 0.01,
            lambda: 1.0,
            rho: None,
            gamma: 1.0,
            dt: 24,
            risk: RiskModel::Covariance,
            trim: TrimRule::DropTrailing,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: DpoConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn n_vars(&self) -> usize {
        self.n_t * self.n_a * self.n_r
    }

    pub fn block_size(&self) -> usize {
        self.n_a * self.n_r
    }

    pub fn max_weight(&self) -> u64 {
        (1u64 << self.n_r) - 1
    }

    pub fn var_index(&self, t: usize, a: usize, r: usize) -> usize {
        (t * self.n_a + a) * self.n_r + r
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_t == 0 || self.n_a == 0 || self.n_r == 0 {
            return Err(Error::InvalidConfig("n_t, n_a and n_r must all be at least 1".into()));
        }
        if self.n_r > 32 {
            return Err(Error::InvalidConfig(format!("n_r = {} is too many bits", self.n_r)));
        }
        for (name, v) in [("nu", self.nu), ("lambda", self.lambda), ("gamma", self.gamma)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be non-negative, got {v}")));
            }
        }
        if let Some(rho) = self.rho {
            if !(rho >= 0.0 && rho.is_finite()) {
                return Err(Error::InvalidConfig(format!("rho must be non-negative, got {rho}")));
            }
        }
        let capacity = self.n_a as u64 * self.max_weight();
        if self.budget > capacity {
            return Err(Error::InvalidConfig(format!(
                "budget {} exceeds representable capacity {capacity}",
                self.budget
            )));
        }
        Ok(())
    }

    /// Budget penalty weight, defaulting to twice the largest absolute interval return.
    pub fn resolved_rho(&self, panel: &ReturnPanel) -> f64 {
        self.rho.unwrap_or_else(|| {
            2.0 * panel
                .interval_returns
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()))
        })
    }

    fn check_panel(&self, panel: &ReturnPanel, risks: &[RiskMatrix]) -> Result<()> {
        if panel.n_t() != self.n_t {
            return Err(Error::DimensionMismatch {
                expected: self.n_t,
                actual: panel.n_t(),
            });
        }
        if panel.n_a() != self.n_a {
            return Err(Error::DimensionMismatch {
                expected: self.n_a,
                actual: panel.n_a(),
            });
        }
        if risks.len() != self.n_t {
            return Err(Error::DimensionMismatch {
                expected: self.n_t,
                actual: risks.len(),
            });
        }
        for r in risks {
            if r.matrix.dim() != (self.n_a, self.n_a) {
                return Err(Error::DimensionMismatch {
                    expected: self.n_a,
                    actual: r.matrix.nrows(),
                });
            }
        }
        Ok(())
    }
}

/// Integer holdings, `N_t × N_a`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortfolioAllocation {
    pub weights: Array2<u64>,
}

impl PortfolioAllocation {
    pub fn n_t(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_a(&self) -> usize {
        self.weights.ncols()
    }

    /// `ω_{t−1,a}` with the uninvested start `ω_{−1,a} = 0`.
    pub fn previous(&self, t: usize, a: usize) -> u64 {
        if t == 0 {
            0
        } else {
            self.weights[[t - 1, a]]
        }
    }

    pub fn step_totals(&self) -> Vec<u64> {
        self.weights.rows().into_iter().map(|r| r.sum()).collect()
    }
}

/// `ω_{t,a} = Σ_r 2^r x_{t,a,r}`.
pub fn decode(x: &Assignment, config: &DpoConfig) -> Result<PortfolioAllocation> {
    if x.len() != config.n_vars() {
        return Err(Error::DimensionMismatch {
            expected: config.n_vars(),
            actual: x.len(),
        });
    }
    let mut weights = Array2::zeros((config.n_t, config.n_a));
    for t in 0..config.n_t {
        for a in 0..config.n_a {
            weights[[t, a]] = (0..config.n_r)
                .map(|r| (x.get(config.var_index(t, a, r)) as u64) << r)
                .sum();
        }
    }
    Ok(PortfolioAllocation { weights })
}

/// Inverse of [`decode`]; fails when a weight does not fit in `n_r` bits.
pub fn encode_allocation(alloc: &PortfolioAllocation, config: &DpoConfig) -> Result<Assignment> {
    if alloc.weights.dim() != (config.n_t, config.n_a) {
        return Err(Error::DimensionMismatch {
            expected: config.n_t * config.n_a,
            actual: alloc.weights.len(),
        });
    }
    let mut bits = vec![0u8; config.n_vars()];
    for ((t, a), &w) in alloc.weights.indexed_iter() {
        if w > config.max_weight() {
            return Err(Error::InvalidConfig(format!(
                "weight {w} at ({t}, {a}) exceeds {} bits",
                config.n_r
            )));
        }
        for r in 0..config.n_r {
            bits[config.var_index(t, a, r)] = ((w >> r) & 1) as u8;
        }
    }
    Assignment::new(bits)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveTerms {
    /// Expected return `F`.
    pub expected_return: f64,
    /// `R = (γ/2) Σ_t ω_tᵀ Σ_t ω_t`.
    pub risk: f64,
    /// Quadratic transaction surrogate `C`.
    pub transaction: f64,
    /// Budget penalty `B`.
    pub budget_penalty: f64,
    /// `F − R − C − B`.
    pub objective: f64,
}

pub fn objective_terms(
    config: &DpoConfig,
    panel: &ReturnPanel,
    risks: &[RiskMatrix],
    alloc: &PortfolioAllocation,
) -> Result<ObjectiveTerms> {
    config.check_panel(panel, risks)?;
    if alloc.weights.dim() != (config.n_t, config.n_a) {
        return Err(Error::DimensionMismatch {
            expected: config.n_t * config.n_a,
            actual: alloc.weights.len(),
        });
    }
    let rho = config.resolved_rho(panel);
    let k = config.budget as f64;
    let (mut f, mut r, mut c, mut b) = (0.0, 0.0, 0.0, 0.0);
    for t in 0..config.n_t {
        let w: Array1<f64> = alloc.weights.row(t).mapv(|v| v as f64);
        f += w.dot(&panel.interval_returns.row(t));
        r += w.dot(&risks[t].matrix.dot(&w));
        for a in 0..config.n_a {
            let d = w[a] - alloc.previous(t, a) as f64;
            c += d * d;
        }
        let dev = w.sum() - k;
        b += dev * dev;
    }
    let risk = 0.5 * config.gamma * r;
    let transaction = config.nu * config.lambda * c;
    let budget_penalty = rho * b;
    Ok(ObjectiveTerms {
        expected_return: f,
        risk,
        transaction,
        budget_penalty,
        objective: f - risk - transaction - budget_penalty,
    })
}

/// Accumulates `xᵀQx` terms with the symmetric split convention.
struct QuboBuilder {
    coeffs: Array2<f64>,
    offset: f64,
}

impl QuboBuilder {
    fn new(n: usize) -> Self {
        Self {
            coeffs: Array2::zeros((n, n)),
            offset: 0.0,
        }
    }

    /// Adds `w·x_i·x_j` (with `x_i² = x_i` on the diagonal).
    fn add(&mut self, i: usize, j: usize, w: f64) {
        if i == j {
            self.coeffs[[i, i]] += w;
        } else {
            self.coeffs[[i, j]] += 0.5 * w;
            self.coeffs[[j, i]] += 0.5 * w;
        }
    }
}

/// Per-time weights applied to the objective before encoding; all ones for
/// the plain model. Term `C_t` (linking `t−1` and `t`) takes the weight of `t`.
pub fn encode_qubo(config: &DpoConfig, panel: &ReturnPanel, risks: &[RiskMatrix]) -> Result<Qubo> {
    encode_weighted_qubo(config, panel, risks, &vec![1.0; config.n_t])
}

/// Encodes `−Σ_t w_t·O_t(Ω)`, where `O_t` collects the time-`t` parts of the
/// objective. With unit weights the energy equals `−O(decode(x))` exactly.
pub fn encode_weighted_qubo(
    config: &DpoConfig,
    panel: &ReturnPanel,
    risks: &[RiskMatrix],
    step_weights: &[f64],
) -> Result<Qubo> {
    config.validate()?;
    config.check_panel(panel, risks)?;
    if step_weights.len() != config.n_t {
        return Err(Error::DimensionMismatch {
            expected: config.n_t,
            actual: step_weights.len(),
        });
    }
    let n = config.n_vars();
    let (n_a, n_r) = (config.n_a, config.n_r);
    let rho = config.resolved_rho(panel);
    let k = config.budget as f64;
    let friction = config.nu * config.lambda;
    let bit = |r: usize| (1u64 << r) as f64;
    let mut qb = QuboBuilder::new(n);

    for t in 0..config.n_t {
        let wt = step_weights[t];
        let sigma = &risks[t].matrix;
        for a in 0..n_a {
            for r in 0..n_r {
                let i = config.var_index(t, a, r);
                // -F and the linear part of the budget penalty
                qb.add(i, i, wt * bit(r) * (-panel.interval_returns[[t, a]] - 2.0 * rho * k));
            }
            for b in 0..n_a {
                // R, the budget square, and the ω_t² part of C
                let mut pair = 0.5 * config.gamma * sigma[[a, b]] + rho;
                if a == b {
                    pair += friction;
                }
                for r in 0..n_r {
                    for s in 0..n_r {
                        let (i, j) = (config.var_index(t, a, r), config.var_index(t, b, s));
                        qb.add(i, j, wt * pair * bit(r) * bit(s));
                    }
                }
            }
            if t > 0 {
                // ω_{t−1}² and the cross term −2·ω_{t−1}·ω_t of C_t
                for r in 0..n_r {
                    for s in 0..n_r {
                        let prev_r = config.var_index(t - 1, a, r);
                        let prev_s = config.var_index(t - 1, a, s);
                        let cur_s = config.var_index(t, a, s);
                        qb.add(prev_r, prev_s, wt * friction * bit(r) * bit(s));
                        qb.add(prev_r, cur_s, -2.0 * wt * friction * bit(r) * bit(s));
                    }
                }
            }
        }
        qb.offset += wt * rho * k * k;
    }
    let partition = BlockPartition::uniform(config.n_t, config.block_size())?;
    Qubo::new(qb.coeffs, qb.offset)?.with_partition(partition)
}
