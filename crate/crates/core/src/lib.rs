//! Dynamic portfolio optimization as a time-blocked QUBO, solved globally or by
//! block coordinate descent, with an emulated signed 8-bit coefficient path.
//!
//! ```
//! use dpo_bcd::{bcd_solve, encode_qubo, fixture_series, risk_matrices, compute_returns};
//! use dpo_bcd::{BcdConfig, DpoConfig, Exhaustive};
//!
//! let config = DpoConfig { n_t: 2, n_a: 6, n_r: 1, budget: 3, ..DpoConfig::default() };
//! let panel = compute_returns(&fixture_series(), config.n_t, config.dt, config.trim).unwrap();
//! let risks = risk_matrices(&panel, config.risk).unwrap();
//! let q = encode_qubo(&config, &panel, &risks).unwrap();
//! let out = bcd_solve(&q, &Exhaustive::default(), &BcdConfig::default()).unwrap();
//! assert!(out.energy <= out.initial_energy);
//! ```

pub mod backends;
pub mod bcd;
pub mod dpo;
pub mod error;
pub mod harness;
pub mod market;
pub mod model_io;
pub mod precision;
pub mod qubo;

pub use backends::{
    backend_from_name, Backend, BackendSettings, Exhaustive, Int8Adapter, SimulatedAnnealing,
    SolveRequest, SolveResult, TabuSearch,
};
pub use bcd::{bcd_solve, extract_subproblem, solve_block, write_back, BcdConfig, BcdOutcome, InitPolicy};
pub use dpo::{
    decode, encode_qubo, objective_terms, risk_matrices, DpoConfig, ObjectiveTerms,
    PortfolioAllocation, ProblemSize, RiskMatrix, RiskModel,
};
pub use error::{Error, Result};
pub use market::{compute_returns, fixture_series, load_prices, PriceSeries, ReturnPanel, TrimRule};
pub use precision::{quantize_int8, reduce_dynamic_range, QuantizedIsing, TuningConfig};
pub use qubo::{Assignment, BlockPartition, IsingModel, Qubo};
