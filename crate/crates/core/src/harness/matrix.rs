use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::metrics::{evaluate, EvaluationReport};
use crate::backends::{backend_from_name, Backend, BackendSettings, SolveRequest};
use crate::bcd::{bcd_solve, BcdConfig, TraceRecord};
use crate::dpo::{
    decode, encode_qubo, encode_weighted_qubo, risk_matrices, DpoConfig, PortfolioAllocation,
    RiskMatrix,
};
use crate::error::{Error, Result};
use crate::market::{compute_returns, generate_synthetic, PriceSeries, ReturnPanel, SyntheticParams};
use crate::precision::LossReport;
use crate::qubo::{Assignment, Qubo};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Decomposition {
    Global,
    Block,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Precision {
    #[serde(rename = "FP")]
    Fp,
    #[serde(rename = "INT8")]
    Int8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StrategyVariant {
    pub decomposition: Decomposition,
    pub precision: Precision,
}

impl StrategyVariant {
    pub const GLOBAL_FP: Self = Self::new(Decomposition::Global, Precision::Fp);
    pub const GLOBAL_INT8: Self = Self::new(Decomposition::Global, Precision::Int8);
    pub const BLOCK_FP: Self = Self::new(Decomposition::Block, Precision::Fp);
    pub const BLOCK_INT8: Self = Self::new(Decomposition::Block, Precision::Int8);

    pub const fn new(decomposition: Decomposition, precision: Precision) -> Self {
        Self {
            decomposition,
            precision,
        }
    }

    pub fn all() -> [StrategyVariant; 4] {
        [Self::GLOBAL_FP, Self::GLOBAL_INT8, Self::BLOCK_FP, Self::BLOCK_INT8]
    }
}

impl fmt::Display for StrategyVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = match self.decomposition {
            Decomposition::Global => "Global",
            Decomposition::Block => "Block",
        };
        let p = match self.precision {
            Precision::Fp => "FP",
            Precision::Int8 => "INT8",
        };
        write!(f, "{d}-{p}")
    }
}

impl FromStr for StrategyVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let (d, p) = lower
            .split_once(['-', '_', '/'])
            .ok_or_else(|| Error::InvalidConfig(format!("bad strategy '{s}'")))?;
        let decomposition = match d {
            "global" => Decomposition::Global,
            "block" => Decomposition::Block,
            _ => return Err(Error::InvalidConfig(format!("bad decomposition in '{s}'"))),
        };
        let precision = match p {
            "fp" => Precision::Fp,
            "int8" => Precision::Int8,
            _ => return Err(Error::InvalidConfig(format!("bad precision in '{s}'"))),
        };
        Ok(Self::new(decomposition, precision))
    }
}

/// A fully built problem: data, risk matrices and the QUBO that is solved.
#[derive(Debug, Clone)]
pub struct Instance {
    pub name: String,
    pub config: DpoConfig,
    pub panel: ReturnPanel,
    pub risks: Vec<RiskMatrix>,
    pub qubo: Qubo,
}

impl Instance {
    pub fn from_panel(name: impl Into<String>, config: DpoConfig, panel: ReturnPanel) -> Result<Self> {
        config.validate()?;
        let risks = risk_matrices(&panel, config.risk)?;
        let qubo = encode_qubo(&config, &panel, &risks)?;
        Ok(Self {
            name: name.into(),
            config,
            panel,
            risks,
            qubo,
        })
    }

    pub fn from_series(name: impl Into<String>, config: DpoConfig, series: &[PriceSeries]) -> Result<Self> {
        if series.len() != config.n_a {
            return Err(Error::DimensionMismatch {
                expected: config.n_a,
                actual: series.len(),
            });
        }
        let panel = compute_returns(series, config.n_t, config.dt, config.trim)?;
        Self::from_panel(name, config, panel)
    }

    pub fn decode(&self, x: &Assignment) -> Result<PortfolioAllocation> {
        decode(x, &self.config)
    }

    pub fn evaluate(&self, x: &Assignment) -> Result<EvaluationReport> {
        evaluate(&self.decode(x)?, &self.panel, &self.risks, &self.config)
    }
}

/// Weight of the first rebalancing time; later times are scaled down to `weak_weight`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedParams {
    pub seed: u64,
    pub weak_weight: f64,
    pub config: DpoConfig,
}

impl PlantedParams {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            weak_weight: 1e-4,
            config: DpoConfig {
                n_t: 3,
                n_a: 3,
                n_r: 2,
                budget: 3,
                rho: Some(1.0),
                dt: 5,
                ..DpoConfig::default()
            },
        }
    }
}

/// A DPO instance whose later time steps are scaled down by `weak_weight`.
///
/// The objective at time 0 dominates the coefficient range, so one global
/// 8-bit scale rounds every coupling between time steps, and every coefficient
/// of the weak steps, to zero. Each time-step subproblem on its own still has
/// a well-resolved budget structure.
pub fn planted_instance(params: &PlantedParams) -> Result<Instance> {
    let cfg = params.config.clone();
    cfg.validate()?;
    let synth = SyntheticParams {
        seed: params.seed,
        days: cfg.n_t * cfg.dt + 1,
        drift: vec![0.0005; cfg.n_a],
        volatility: vec![0.015; cfg.n_a],
        ..SyntheticParams::fixture()
    };
    let series = generate_synthetic(&synth)?;
    let panel = compute_returns(&series, cfg.n_t, cfg.dt, cfg.trim)?;
    let risks = risk_matrices(&panel, cfg.risk)?;
    let mut weights = vec![params.weak_weight; cfg.n_t];
    weights[0] = 1.0;
    let qubo = encode_weighted_qubo(&cfg, &panel, &risks, &weights)?;
    Ok(Instance {
        name: format!("planted-{}", params.seed),
        config: cfg,
        panel,
        risks,
        qubo,
    })
}

#[derive(Debug, Clone)]
pub struct MatrixConfig {
    /// Independent runs per cell.
    pub runs: usize,
    pub seed: u64,
    /// `J`, `I` and init policy for block strategies; its seed is replaced per run.
    pub bcd: BcdConfig,
    pub backends: BackendSettings,
}

impl Default for MatrixConfig {
    fn default() -> Self {
        Self {
            runs: 3,
            seed: 0,
            bcd: BcdConfig::default(),
            backends: BackendSettings::default(),
        }
    }
}

const RUN_SEED_STRIDE: u64 = 1 << 32;

impl MatrixConfig {
    pub fn run_seed(&self, run: usize) -> u64 {
        self.seed.wrapping_add((run as u64).wrapping_mul(RUN_SEED_STRIDE))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    pub assignment: Assignment,
    /// Full-precision energy under the instance QUBO.
    pub energy: f64,
    pub evaluation: EvaluationReport,
    /// Solver wall time only.
    pub solve_seconds: f64,
    /// Coefficient tuning and quantization time, when applicable.
    pub prep_seconds: f64,
    pub loss: Option<LossReport>,
    pub trace: Option<Vec<TraceRecord>>,
}

impl RunRecord {
    pub fn feasible(&self) -> bool {
        self.evaluation.feasibility.feasible
    }

    pub fn total_net_return(&self) -> Option<f64> {
        self.evaluation.performance.as_ref().map(|p| p.total_net_return)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CellReport {
    pub variant: StrategyVariant,
    pub backend: String,
    pub runs: Vec<RunRecord>,
    /// Highest total net return among feasible runs, or the lowest-energy run
    /// when none is feasible.
    pub selected: Option<usize>,
    pub error: Option<String>,
}

impl CellReport {
    pub fn selected_run(&self) -> Option<&RunRecord> {
        self.selected.map(|i| &self.runs[i])
    }

    pub fn feasible(&self) -> bool {
        self.selected_run().is_some_and(RunRecord::feasible)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MatrixReport {
    pub instance: String,
    pub n: usize,
    pub cells: Vec<CellReport>,
}

impl MatrixReport {
    pub fn cell(&self, variant: StrategyVariant, backend: &str) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.variant == variant && c.backend == backend)
    }
}

fn cell_backend(name: &str, variant: StrategyVariant, settings: &BackendSettings) -> Result<Box<dyn Backend>> {
    let base = backend_from_name(name, settings)?;
    match (variant.precision, base.is_quantized()) {
        (Precision::Fp, true) => Err(Error::InvalidConfig(format!(
            "quantized backend '{name}' cannot run a full-precision strategy"
        ))),
        (Precision::Int8, false) => backend_from_name(&format!("int8({name})"), settings),
        _ => Ok(base),
    }
}

fn run_once(
    instance: &Instance,
    backend: &dyn Backend,
    variant: StrategyVariant,
    cfg: &MatrixConfig,
    run: usize,
) -> Result<RunRecord> {
    let seed = cfg.run_seed(run);
    let (assignment, solve_seconds, prep_seconds, loss, trace) = match variant.decomposition {
        Decomposition::Global => {
            let r = backend.solve(&SolveRequest::new(&instance.qubo, seed))?;
            let (prep, loss) = match r.quantization {
                Some(q) => (q.prep_seconds, Some(q.loss)),
                None => (0.0, None),
            };
            (r.assignment, r.wall_time, prep, loss, None)
        }
        Decomposition::Block => {
            let bcd = BcdConfig {
                seed,
                ..cfg.bcd.clone()
            };
            let out = bcd_solve(&instance.qubo, backend, &bcd)?;
            (out.assignment, out.solve_seconds, 0.0, None, Some(out.trace))
        }
    };
    Ok(RunRecord {
        run,
        seed,
        energy: instance.qubo.energy(&assignment)?,
        evaluation: instance.evaluate(&assignment)?,
        assignment,
        solve_seconds,
        prep_seconds,
        loss,
        trace,
    })
}

fn select(runs: &[RunRecord]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in runs.iter().enumerate() {
        if let Some(v) = r.total_net_return() {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
    }
    if let Some((i, _)) = best {
        return Some(i);
    }
    runs.iter()
        .enumerate()
        .min_by(|a, b| a.1.energy.total_cmp(&b.1.energy))
        .map(|(i, _)| i)
}

/// Runs every `variant × backend` cell. Cell failures are recorded and the
/// matrix carries on.
pub fn run_matrix(
    instance: &Instance,
    backends: &[String],
    variants: &[StrategyVariant],
    cfg: &MatrixConfig,
) -> Result<MatrixReport> {
    if cfg.runs == 0 {
        return Err(Error::InvalidConfig("runs must be at least 1".into()));
    }
    cfg.bcd.validate()?;
    let mut cells = Vec::with_capacity(variants.len() * backends.len());
    for &variant in variants {
        for name in backends {
            let mut cell = CellReport {
                variant,
                backend: name.clone(),
                runs: Vec::new(),
                selected: None,
                error: None,
            };
            let outcome = cell_backend(name, variant, &cfg.backends).and_then(|backend| {
                (0..cfg.runs)
                    .map(|run| run_once(instance, backend.as_ref(), variant, cfg, run))
                    .collect::<Result<Vec<_>>>()
            });
            match outcome {
                Ok(runs) => {
                    cell.selected = select(&runs);
                    cell.runs = runs;
                }
                Err(e) => cell.error = Some(e.to_string()),
            }
            cells.push(cell);
        }
    }
    Ok(MatrixReport {
        instance: instance.name.clone(),
        n: instance.qubo.n(),
        cells,
    })
}
