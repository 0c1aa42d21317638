//! Block coordinate descent over a partitioned QUBO.
//!
//! For block `i` with the other blocks frozen, the energy as a function of the
//! block vector `y` is, up to a constant, `yᵀQ̂_i y` with
//! `Q̂_i = Q_ii + diag(h_i)` and `h_i = 2·Σ_{k≠i} Q_ik x_k`. On a
//! block-tridiagonal model only the two neighbouring blocks contribute.
//!
//! One global iteration sweeps the blocks in ascending order. Each block is
//! solved `I` times with consecutive seeds and the candidate with the lowest
//! full-precision local energy is kept, but only if it beats the incumbent.
//! The recorded energy trace is therefore non-increasing for any backend.
//!
//! Worst-case work with an exact block solver is `O(J·m·I·2^{n/m})` against
//! `O(2^n)` for the undecomposed problem.

use std::io::Write;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backends::{Backend, SolveRequest};
use crate::error::{Error, Result};
use crate::qubo::{Assignment, Qubo};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitPolicy {
    AllZeros,
    Random { seed: u64 },
    Provided { assignment: Assignment },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcdConfig {
    /// `J`, the number of full sweeps.
    pub global_iters: usize,
    /// `I`, solver runs per block update.
    pub repeats_per_block: usize,
    pub seed: u64,
    pub init: InitPolicy,
    /// Stop after a sweep in which no block changed.
    pub early_stop: bool,
}

impl Default for BcdConfig {
    fn default() -> Self {
        Self {
            global_iters: 3,
            repeats_per_block: 3,
            seed: 0,
            init: InitPolicy::AllZeros,
            early_stop: false,
        }
    }
}

impl BcdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.global_iters == 0 || self.repeats_per_block == 0 {
            return Err(Error::InvalidConfig(
                "global_iters and repeats_per_block must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Seed of run 0 for the update of `block` in `iteration`.
    pub fn block_seed(&self, iteration: usize, block: usize, blocks: usize) -> u64 {
        let call = (iteration * blocks + block) as u64;
        self.seed
            .wrapping_add(call.wrapping_mul(self.repeats_per_block as u64))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subproblem {
    pub block_index: usize,
    pub range: std::ops::Range<usize>,
    pub q_hat: Array2<f64>,
    pub h: Array1<f64>,
    /// Incumbent bits of the block itself.
    pub current: Assignment,
    pub previous: Option<Assignment>,
    pub next: Option<Assignment>,
}

impl Subproblem {
    pub fn n(&self) -> usize {
        self.range.len()
    }

    /// `yᵀQ̂_i y`.
    pub fn local_energy(&self, y: &Assignment) -> Result<f64> {
        if y.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                actual: y.len(),
            });
        }
        let bits = y.bits();
        let mut e = 0.0;
        for i in 0..bits.len() {
            if bits[i] == 0 {
                continue;
            }
            for j in 0..bits.len() {
                if bits[j] == 1 {
                    e += self.q_hat[[i, j]];
                }
            }
        }
        Ok(e)
    }

    pub fn to_qubo(&self) -> Result<Qubo> {
        Qubo::new(self.q_hat.clone(), 0.0)
    }
}

pub fn extract_subproblem(q: &Qubo, x: &Assignment, i: usize) -> Result<Subproblem> {
    let partition = q.partition().ok_or(Error::MissingPartition)?;
    let range = partition.block(i).ok_or(Error::BlockOutOfRange {
        index: i,
        blocks: partition.len(),
    })?;
    if x.len() != q.n() {
        return Err(Error::DimensionMismatch {
            expected: q.n(),
            actual: x.len(),
        });
    }
    let c = q.coeffs();
    let bits = x.bits();
    let size = range.len();
    let mut h = Array1::zeros(size);
    for (local, row) in range.clone().enumerate() {
        let mut acc = 0.0;
        for (k, &b) in bits.iter().enumerate() {
            if b == 1 && !range.contains(&k) {
                acc += c[[row, k]];
            }
        }
        h[local] = 2.0 * acc;
    }
    let mut q_hat = c
        .slice(ndarray::s![range.clone(), range.clone()])
        .to_owned();
    for k in 0..size {
        q_hat[[k, k]] += h[k];
    }
    let neighbour = |j: Option<usize>| {
        j.and_then(|j| partition.block(j)).map(|r| x.slice(r))
    };
    Ok(Subproblem {
        block_index: i,
        current: x.slice(range.clone()),
        previous: neighbour(i.checked_sub(1)),
        next: neighbour(Some(i + 1)),
        range,
        q_hat,
        h,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockSolution {
    pub assignment: Assignment,
    pub local_energy: f64,
    /// Run index of the kept candidate.
    pub run: usize,
    pub seed: u64,
    /// Local energy of every run, in run order.
    pub candidates: Vec<f64>,
    /// Summed solver time over all runs.
    pub wall_time: f64,
}

/// Runs the backend `I` times with seeds `base_seed + run` and keeps the
/// candidate with the lowest full-precision local energy, earliest run on ties.
pub fn solve_block(
    sub: &Subproblem,
    backend: &dyn Backend,
    cfg: &BcdConfig,
    base_seed: u64,
) -> Result<BlockSolution> {
    cfg.validate()?;
    let model = sub.to_qubo()?;
    let mut best: Option<BlockSolution> = None;
    let mut candidates = Vec::with_capacity(cfg.repeats_per_block);
    let mut wall_time = 0.0;
    for run in 0..cfg.repeats_per_block {
        let seed = base_seed.wrapping_add(run as u64);
        let result = backend.solve(&SolveRequest::new(&model, seed))?;
        if result.assignment.len() != sub.n() {
            return Err(Error::DimensionMismatch {
                expected: sub.n(),
                actual: result.assignment.len(),
            });
        }
        wall_time += result.wall_time;
        let e = sub.local_energy(&result.assignment)?;
        candidates.push(e);
        if best.as_ref().is_none_or(|b| e < b.local_energy) {
            best = Some(BlockSolution {
                assignment: result.assignment,
                local_energy: e,
                run,
                seed,
                candidates: Vec::new(),
                wall_time: 0.0,
            });
        }
    }
    let mut best = best.expect("at least one run");
    best.candidates = candidates;
    best.wall_time = wall_time;
    Ok(best)
}

/// Replaces the bits of block `i` with `block`.
pub fn write_back(q: &Qubo, x: &Assignment, i: usize, block: &Assignment) -> Result<Assignment> {
    let partition = q.partition().ok_or(Error::MissingPartition)?;
    let range = partition.block(i).ok_or(Error::BlockOutOfRange {
        index: i,
        blocks: partition.len(),
    })?;
    if block.len() != range.len() {
        return Err(Error::DimensionMismatch {
            expected: range.len(),
            actual: block.len(),
        });
    }
    if x.len() != q.n() {
        return Err(Error::DimensionMismatch {
            expected: q.n(),
            actual: x.len(),
        });
    }
    let mut out = x.clone();
    for (k, &b) in range.zip(block.bits()) {
        out.set(k, b == 1);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub block: usize,
    pub energy_before: f64,
    pub energy_after: f64,
    pub accepted: bool,
    pub wall_time: f64,
    pub backend_id: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BcdOutcome {
    pub assignment: Assignment,
    pub energy: f64,
    pub initial_energy: f64,
    pub trace: Vec<TraceRecord>,
    pub iterations: usize,
    /// Summed solver time over every block run.
    pub solve_seconds: f64,
}

/// A failed run together with everything recorded before the failure.
#[derive(Debug, thiserror::Error)]
#[error("{error}")]
pub struct BcdError {
    pub error: Error,
    pub trace: Vec<TraceRecord>,
}

impl From<Error> for BcdError {
    fn from(error: Error) -> Self {
        Self {
            error,
            trace: Vec::new(),
        }
    }
}

impl From<BcdError> for Error {
    fn from(e: BcdError) -> Self {
        e.error
    }
}

fn initial_assignment(q: &Qubo, init: &InitPolicy) -> Result<Assignment> {
    match init {
        InitPolicy::AllZeros => Ok(Assignment::zeros(q.n())),
        InitPolicy::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            Assignment::new((0..q.n()).map(|_| rng.random_range(0..2u8)).collect())
        }
        InitPolicy::Provided { assignment } => {
            if assignment.len() != q.n() {
                return Err(Error::DimensionMismatch {
                    expected: q.n(),
                    actual: assignment.len(),
                });
            }
            Ok(assignment.clone())
        }
    }
}

pub fn bcd_solve(q: &Qubo, backend: &dyn Backend, cfg: &BcdConfig) -> Result<BcdOutcome, BcdError> {
    cfg.validate()?;
    let blocks = q.partition().ok_or(Error::MissingPartition)?.len();
    let mut x = initial_assignment(q, &cfg.init)?;
    let initial_energy = q.energy(&x)?;
    let mut energy = initial_energy;
    let mut trace = Vec::with_capacity(cfg.global_iters * blocks);
    let mut solve_seconds = 0.0;
    let backend_id = backend.id();
    let mut iterations = 0;

    for iteration in 0..cfg.global_iters {
        iterations += 1;
        let mut changed = false;
        for block in 0..blocks {
            let seed = cfg.block_seed(iteration, block, blocks);
            let step = extract_subproblem(q, &x, block).and_then(|sub| {
                let incumbent = sub.local_energy(&sub.current)?;
                let solution = solve_block(&sub, backend, cfg, seed)?;
                Ok((incumbent, solution))
            });
            let (incumbent, solution) = match step {
                Ok(s) => s,
                Err(source) => {
                    return Err(BcdError {
                        error: Error::BlockSolve {
                            iteration,
                            block,
                            source: Box::new(source),
                        },
                        trace,
                    })
                }
            };
            solve_seconds += solution.wall_time;
            // ties keep the incumbent so a minimizer is a fixed point
            let accepted = solution.local_energy < incumbent;
            let before = energy;
            if accepted {
                x = write_back(q, &x, block, &solution.assignment)?;
                energy = q.energy(&x)?;
                changed = true;
            }
            trace.push(TraceRecord {
                iteration,
                block,
                energy_before: before,
                energy_after: energy,
                accepted,
                wall_time: solution.wall_time,
                backend_id: backend_id.clone(),
                seed,
            });
        }
        if cfg.early_stop && !changed {
            break;
        }
    }
    Ok(BcdOutcome {
        assignment: x,
        energy,
        initial_energy,
        trace,
        iterations,
        solve_seconds,
    })
}

/// One JSON object per line.
pub fn write_trace_jsonl<W: Write>(trace: &[TraceRecord], mut out: W) -> Result<()> {
    for record in trace {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{Exhaustive, SimulatedAnnealing};
    use crate::qubo::BlockPartition;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_tridiagonal(rng: &mut ChaCha8Rng, blocks: usize, size: usize) -> Qubo {
        let n = blocks * size;
        let mut m = Array2::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                if j / size <= i / size + 1 {
                    let v: f64 = rng.random_range(-1.0..1.0);
                    m[[i, j]] = v;
                    m[[j, i]] = v;
                }
            }
        }
        Qubo::new(m, rng.random_range(-1.0..1.0))
            .unwrap()
            .with_partition(BlockPartition::uniform(blocks, size).unwrap())
            .unwrap()
    }

    #[test]
    fn zero_context_keeps_diagonal_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = random_tridiagonal(&mut rng, 3, 2);
        let sub = extract_subproblem(&q, &Assignment::zeros(6), 1).unwrap();
        assert_eq!(sub.h, Array1::<f64>::zeros(2));
        assert_eq!(sub.q_hat, q.coeffs().slice(ndarray::s![2..4, 2..4]));
        assert!(sub.previous.is_some() && sub.next.is_some());
    }

    #[test]
    fn single_block_is_whole_problem() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = random_tridiagonal(&mut rng, 1, 4);
        let x = Assignment::from_code(11, 4);
        let sub = extract_subproblem(&q, &x, 0).unwrap();
        assert_eq!(&sub.q_hat, q.coeffs());
        assert!(sub.previous.is_none() && sub.next.is_none());
    }

    #[test]
    fn extraction_errors() {
        let q = Qubo::zeros(4);
        assert!(matches!(
            extract_subproblem(&q, &Assignment::zeros(4), 0),
            Err(Error::MissingPartition)
        ));
        let q = q.with_partition(BlockPartition::uniform(2, 2).unwrap()).unwrap();
        assert!(matches!(
            extract_subproblem(&q, &Assignment::zeros(4), 2),
            Err(Error::BlockOutOfRange { .. })
        ));
    }

    #[test]
    fn local_delta_matches_global_delta() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = random_tridiagonal(&mut rng, 3, 4);
        let x = Assignment::from_code(rng.random_range(0..1u64 << 12), 12);
        let base = q.energy(&x).unwrap();
        for i in 0..3 {
            let sub = extract_subproblem(&q, &x, i).unwrap();
            let e0 = sub.local_energy(&sub.current).unwrap();
            for code in 0..16 {
                let y = Assignment::from_code(code, 4);
                let full = q.energy(&write_back(&q, &x, i, &y).unwrap()).unwrap();
                let local = sub.local_energy(&y).unwrap() - e0;
                assert!(((full - base) - local).abs() <= 1e-10 * (1.0 + base.abs()));
            }
        }
    }

    #[test]
    fn diagonal_sign_rule() {
        let q = Qubo::new(Array2::from_diag(&array![-1.0, 2.0]), 0.0)
            .unwrap()
            .with_partition(BlockPartition::uniform(1, 2).unwrap())
            .unwrap();
        let sub = extract_subproblem(&q, &Assignment::zeros(2), 0).unwrap();
        let cfg = BcdConfig {
            repeats_per_block: 1,
            ..BcdConfig::default()
        };
        let s = solve_block(&sub, &Exhaustive::default(), &cfg, 0).unwrap();
        assert_eq!(s.assignment.bits(), &[1, 0]);
    }

    #[test]
    fn kept_candidate_is_min_of_runs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let q = random_tridiagonal(&mut rng, 1, 10);
        let sub = extract_subproblem(&q, &Assignment::zeros(10), 0).unwrap();
        let sa = SimulatedAnnealing {
            sweeps: 2,
            ..Default::default()
        };
        let s = solve_block(&sub, &sa, &BcdConfig::default(), 9).unwrap();
        assert_eq!(s.candidates.len(), 3);
        assert!(s.candidates.iter().all(|&e| s.local_energy <= e));
        assert_eq!(s.seed, 9 + s.run as u64);
    }

    #[test]
    fn write_back_frame() {
        let q = Qubo::zeros(6)
            .with_partition(BlockPartition::uniform(3, 2).unwrap())
            .unwrap();
        let x = Assignment::from_code(0b101101, 6);
        assert_eq!(write_back(&q, &x, 1, &x.slice(2..4)).unwrap(), x);
        let y = write_back(&q, &x, 2, &Assignment::new(vec![0, 0]).unwrap()).unwrap();
        let differing = (0..6).filter(|&k| x.get(k) != y.get(k)).count();
        assert_eq!(differing, 1);
        assert!(write_back(&q, &x, 0, &Assignment::zeros(3)).is_err());
    }

    #[test]
    fn separable_problem_in_one_sweep() {
        let q = Qubo::new(Array2::from_diag(&array![-1.0, 0.5, -0.2, 3.0, -4.0, 0.0]), 0.0)
            .unwrap()
            .with_partition(BlockPartition::uniform(3, 2).unwrap())
            .unwrap();
        let cfg = BcdConfig {
            global_iters: 1,
            ..BcdConfig::default()
        };
        let out = bcd_solve(&q, &Exhaustive::default(), &cfg).unwrap();
        assert_eq!(out.assignment.bits(), &[1, 0, 1, 0, 1, 0]);
        assert_eq!(out.trace.len(), 3);
    }

    #[test]
    fn global_minimizer_is_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q = random_tridiagonal(&mut rng, 3, 3);
        let (best, e) = Exhaustive::default().minimize(&q).unwrap();
        let cfg = BcdConfig {
            init: InitPolicy::Provided {
                assignment: best.clone(),
            },
            ..BcdConfig::default()
        };
        let out = bcd_solve(&q, &Exhaustive::default(), &cfg).unwrap();
        assert_eq!(out.assignment, best);
        assert!(out.trace.iter().all(|r| r.energy_after == out.initial_energy));
        assert!((out.energy - e).abs() < 1e-12);
    }

    #[test]
    fn early_stop_after_quiet_sweep() {
        let q = Qubo::new(Array2::from_diag(&array![-1.0, 1.0, -1.0, 1.0]), 0.0)
            .unwrap()
            .with_partition(BlockPartition::uniform(2, 2).unwrap())
            .unwrap();
        let cfg = BcdConfig {
            global_iters: 5,
            early_stop: true,
            ..BcdConfig::default()
        };
        let out = bcd_solve(&q, &Exhaustive::default(), &cfg).unwrap();
        assert_eq!(out.iterations, 2);
    }

    #[test]
    fn failure_carries_partial_trace() {
        let q = Qubo::new(Array2::from_diag(&array![-1.0, 1.0, -1.0, 1.0, 2.0]), 0.0)
            .unwrap()
            .with_partition(BlockPartition::new(vec![0..2, 2..5]).unwrap())
            .unwrap();
        let err = bcd_solve(&q, &Exhaustive { cap: 2 }, &BcdConfig::default()).unwrap_err();
        assert_eq!(err.trace.len(), 1);
        assert!(matches!(err.error, Error::BlockSolve { block: 1, iteration: 0, .. }));
    }

    #[test]
    fn trace_jsonl_lines() {
        let q = Qubo::new(Array2::from_diag(&array![-1.0, 1.0]), 0.0)
            .unwrap()
            .with_partition(BlockPartition::uniform(2, 1).unwrap())
            .unwrap();
        let out = bcd_solve(&q, &Exhaustive::default(), &BcdConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_trace_jsonl(&out.trace, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 6);
        let first: TraceRecord = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(first, out.trace[0]);
    }

    proptest! {
        #[test]
        fn trace_is_monotone(seed in any::<u64>(), blocks in 2usize..4, size in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = random_tridiagonal(&mut rng, blocks, size);
            let sa = SimulatedAnnealing { sweeps: 3, ..Default::default() };
            let cfg = BcdConfig { init: InitPolicy::Random { seed }, ..BcdConfig::default() };
            let out = bcd_solve(&q, &sa, &cfg).unwrap();
            let mut prev = out.initial_energy;
            for r in &out.trace {
                prop_assert!(r.energy_after <= r.energy_before + 1e-12);
                prop_assert_eq!(r.energy_before, prev);
                prev = r.energy_after;
            }
        }
    }
}
