use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dpo_bcd::harness::{emit_report, run_matrix, Decomposition, Instance, MatrixConfig, Precision, StrategyVariant};
use dpo_bcd::market::{generate_synthetic, write_prices, SyntheticParams};
use dpo_bcd::model_io::{read_model, write_qubo};
use dpo_bcd::{
    backend_from_name, bcd_solve, fixture_series, load_prices, Assignment, BackendSettings,
    BcdConfig, DpoConfig, PriceSeries, ProblemSize, RiskModel, SolveRequest, TrimRule,
};
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "dpo-bcd", version, about = "Dynamic portfolio optimization by block coordinate descent")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic price file.
    Synth(SynthArgs),
    /// Build the QUBO model from prices and write it to a model file.
    Build(BuildArgs),
    /// Solve a model file with one backend and strategy.
    Solve(SolveArgs),
    /// Evaluate a solution against price data.
    Evaluate(EvaluateArgs),
    /// Run the Global/Block × FP/INT8 strategy matrix and write reports.
    Matrix(MatrixArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    /// Seed of the price walk; the bundled fixture uses 20230101.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    days: Option<usize>,
    /// Skip the constant cash column.
    #[arg(long)]
    no_cash: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum RiskKind {
    Covariance,
    Semicovariance,
    Shrinkage,
}

#[derive(Clone, Copy, ValueEnum)]
enum Trim {
    Trailing,
    Leading,
}

#[derive(Args)]
struct ModelArgs {
    /// Price file; the bundled synthetic fixture is used when absent.
    #[arg(long)]
    prices: Option<PathBuf>,
    /// TOML file with model settings; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named size preset (S, M or L).
    #[arg(long)]
    size: Option<ProblemSize>,
    #[arg(long)]
    n_t: Option<usize>,
    #[arg(long)]
    n_r: Option<usize>,
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    dt: Option<usize>,
    #[arg(long, value_enum)]
    risk: Option<RiskKind>,
    /// Semicovariance benchmark return.
    #[arg(long)]
    benchmark: Option<f64>,
    /// Fixed shrinkage intensity in [0, 1].
    #[arg(long)]
    shrinkage: Option<f64>,
    /// Which end of a long price history to drop.
    #[arg(long, value_enum)]
    trim: Option<Trim>,
}

impl ModelArgs {
    fn series(&self) -> Result<Vec<PriceSeries>> {
        match &self.prices {
            Some(path) => {
                let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
                Ok(load_prices(BufReader::new(f))?)
            }
            None => Ok(fixture_series()),
        }
    }

    fn config(&self, n_a: usize) -> Result<DpoConfig> {
        let mut cfg = match (&self.config, self.size) {
            (Some(path), _) => DpoConfig::from_file(path)?,
            (None, Some(size)) => DpoConfig::size(size),
            (None, None) => DpoConfig::default(),
        };
        if self.config.is_some() {
            if let Some(size) = self.size {
                cfg.n_t = DpoConfig::size(size).n_t;
            }
        }
        cfg.n_a = n_a;
        macro_rules! set {
            ($($field:ident),*) => {$(if let Some(v) = self.$field { cfg.$field = v; })*};
        }
        set!(n_t, n_r, budget, nu, lambda, gamma, dt);
        if self.rho.is_some() {
            cfg.rho = self.rho;
        }
        if let Some(kind) = self.risk {
            cfg.risk = match kind {
                RiskKind::Covariance => RiskModel::Covariance,
                RiskKind::Semicovariance => RiskModel::Semicovariance {
                    benchmark: self.benchmark.unwrap_or(0.0),
                },
                RiskKind::Shrinkage => RiskModel::Shrinkage {
                    intensity: self.shrinkage,
                },
            };
        }
        if let Some(trim) = self.trim {
            cfg.trim = match trim {
                Trim::Trailing => TrimRule::DropTrailing,
                Trim::Leading => TrimRule::DropLeading,
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn instance(&self) -> Result<Instance> {
        let series = self.series()?;
        let cfg = self.config(series.len())?;
        let name = match &self.prices {
            Some(p) => p.display().to_string(),
            None => "synthetic-fixture".into(),
        };
        Ok(Instance::from_series(name, cfg, &series)?)
    }
}

#[derive(Args)]
struct BuildArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BcdArgs {
    /// Global iterations of block coordinate descent.
    #[arg(long, default_value_t = 3)]
    iters: usize,
    /// Solver runs per block update.
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    /// Stop once a full sweep changes nothing.
    #[arg(long)]
    early_stop: bool,
}

impl BcdArgs {
    fn config(&self, seed: u64) -> BcdConfig {
        BcdConfig {
            global_iters: self.iters,
            repeats_per_block: self.repeats,
            seed,
            early_stop: self.early_stop,
            ..BcdConfig::default()
        }
    }
}

fn settings(seed: u64) -> BackendSettings {
    let mut s = BackendSettings::default();
    s.tuning.seed = seed;
    s
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    model: PathBuf,
    /// exhaustive, sa, tabu
    #[arg(long, default_value = "sa")]
    backend: String,
    /// Global-FP, Global-INT8, Block-FP or Block-INT8
    #[arg(long, default_value = "Block-FP")]
    strategy: StrategyVariant,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    bcd: BcdArgs,
    #[arg(long)]
    out: PathBuf,
    /// Also write the block-update trace as JSON lines.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
struct SolutionFile {
    strategy: String,
    backend: String,
    seed: u64,
    assignment: Assignment,
    energy: f64,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    solution: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    /// Report path; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MatrixArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Comma-separated backend names.
    #[arg(long, value_delimiter = ',', default_value = "sa,tabu")]
    backends: Vec<String>,
    /// Comma-separated strategies; all four by default.
    #[arg(long, value_delimiter = ',')]
    strategies: Vec<StrategyVariant>,
    #[arg(long, default_value_t = 3)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    bcd: BcdArgs,
    #[arg(long)]
    out: PathBuf,
}

fn backend_for(name: &str, strategy: StrategyVariant, seed: u64) -> Result<Box<dyn dpo_bcd::Backend>> {
    let s = settings(seed);
    let backend = match strategy.precision {
        Precision::Fp => backend_from_name(name, &s)?,
        Precision::Int8 => backend_from_name(&format!("int8({name})"), &s)?,
    };
    Ok(backend)
}

fn synth(args: SynthArgs) -> Result<()> {
    let mut series = if args.seed.is_none() && args.days.is_none() && !args.no_cash {
        fixture_series()
    } else {
        let defaults = SyntheticParams::fixture();
        let params = SyntheticParams {
            seed: args.seed.unwrap_or(defaults.seed),
            days: args.days.unwrap_or(defaults.days),
            ..defaults
        };
        generate_synthetic(&params)?
    };
    if !args.no_cash && series.last().is_some_and(|s| s.asset_id != "cash") {
        let dates = series[0].dates.clone();
        series.push(dpo_bcd::market::cash_series("cash", &dates));
    }
    write_prices(create(&args.out)?, &series)?;
    eprintln!("wrote {} series x {} days to {}", series.len(), series[0].len(), args.out.display());
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn build(args: BuildArgs) -> Result<()> {
    let inst = args.model.instance()?;
    let mut out = create(&args.out)?;
    write_qubo(&inst.qubo, &mut out)?;
    out.flush()?;
    eprintln!("wrote {}-variable model to {}", inst.qubo.n(), args.out.display());
    Ok(())
}

fn solve(args: SolveArgs) -> Result<()> {
    let f = File::open(&args.model).with_context(|| format!("opening {}", args.model.display()))?;
    let q = read_model(BufReader::new(f))?.into_qubo()?;
    let backend = backend_for(&args.backend, args.strategy, args.seed)?;
    let assignment = match args.strategy.decomposition {
        Decomposition::Global => backend.solve(&SolveRequest::new(&q, args.seed))?.assignment,
        Decomposition::Block => {
            let out = bcd_solve(&q, backend.as_ref(), &args.bcd.config(args.seed))?;
            if let Some(path) = &args.trace {
                let mut w = create(path)?;
                dpo_bcd::bcd::write_trace_jsonl(&out.trace, &mut w)?;
                w.flush()?;
            }
            out.assignment
        }
    };
    let solution = SolutionFile {
        strategy: args.strategy.to_string(),
        backend: backend.id(),
        seed: args.seed,
        energy: q.energy(&assignment)?,
        assignment,
    };
    let mut out = create(&args.out)?;
    serde_json::to_writer_pretty(&mut out, &solution)?;
    out.write_all(b"\n")?;
    out.flush()?;
    eprintln!("energy {}", solution.energy);
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let f = File::open(&args.solution).with_context(|| format!("opening {}", args.solution.display()))?;
    let solution: SolutionFile = serde_json::from_reader(BufReader::new(f))?;
    let inst = args.model.instance()?;
    if solution.assignment.len() != inst.qubo.n() {
        bail!(
            "solution has {} variables but the model has {}",
            solution.assignment.len(),
            inst.qubo.n()
        );
    }
    let report = inst.evaluate(&solution.assignment)?;
    let text = serde_json::to_string_pretty(&report)?;
    match &args.out {
        Some(path) => {
            let mut w = create(path)?;
            writeln!(w, "{text}")?;
            w.flush()?;
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn matrix(args: MatrixArgs) -> Result<()> {
    let inst = args.model.instance()?;
    let variants = if args.strategies.is_empty() {
        StrategyVariant::all().to_vec()
    } else {
        args.strategies.clone()
    };
    let cfg = MatrixConfig {
        runs: args.runs,
        seed: args.seed,
        bcd: args.bcd.config(args.seed),
        backends: settings(args.seed),
    };
    let report = run_matrix(&inst, &args.backends, &variants, &cfg)?;
    emit_report(&report, &args.out)?;
    for cell in &report.cells {
        let status = match (&cell.error, cell.feasible()) {
            (Some(e), _) => format!("error: {e}"),
            (None, true) => "feasible".into(),
            (None, false) => "infeasible".into(),
        };
        eprintln!("{:<12} {:<16} {status}", cell.variant.to_string(), cell.backend);
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Synth(a) => synth(a),
        Command::Build(a) => build(a),
        Command::Solve(a) => solve(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Matrix(a) => matrix(a),
    }
}
