//! Coefficient conditioning for devices that only accept signed 8-bit Ising
//! coefficients.
//!
//! The pipeline is: measure the dynamic range of the coefficient set, shrink
//! individual linear fields toward zero while the range strictly improves and
//! a ground state survives, then scale by `127/α` and round-and-clip to
//! `[−128, 127]`.
//!
//! Dynamic range is `log2(max D / min D)` where `D` holds the nonzero absolute
//! differences between distinct coefficient values. Linear and quadratic
//! coefficients are pooled, and zero-valued couplings take part as values.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::backends::{all_energies, Exhaustive, TabuSearch};
use crate::error::{Error, Result};
use crate::qubo::{Assignment, BlockPartition, IsingModel, Qubo};

/// Which model entry a coefficient came from. Quadratic refs have `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoefRef {
    Linear(usize),
    Quadratic(usize, usize),
}

/// Every linear and upper-triangle quadratic coefficient of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    values: Vec<f64>,
    refs: Vec<CoefRef>,
}

impl CoefficientSet {
    pub fn from_ising(model: &IsingModel) -> Self {
        let n = model.n();
        let mut values = Vec::with_capacity(n + n * n.saturating_sub(1) / 2);
        let mut refs = Vec::with_capacity(values.capacity());
        for (i, &h) in model.linear().iter().enumerate() {
            values.push(h);
            refs.push(CoefRef::Linear(i));
        }
        let j = model.quadratic();
        for a in 0..n {
            for b in a + 1..n {
                values.push(j[[a, b]]);
                refs.push(CoefRef::Quadratic(a, b));
            }
        }
        Self { values, refs }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn refs(&self) -> &[CoefRef] {
        &self.refs
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicRange {
    pub bits: f64,
    pub max_diff: f64,
    pub min_diff: f64,
    /// Fewer than two distinct values; `bits` is reported as 0.
    pub degenerate: bool,
}

impl DynamicRange {
    const DEGENERATE: DynamicRange = DynamicRange {
        bits: 0.0,
        max_diff: 0.0,
        min_diff: 0.0,
        degenerate: true,
    };
}

/// Dynamic range over the distinct values of `values`.
pub fn dynamic_range(values: &[f64]) -> DynamicRange {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    range_of_sorted_distinct(sorted.iter().copied())
}

fn range_of_sorted_distinct(values: impl Iterator<Item = f64>) -> DynamicRange {
    let mut first = None;
    let mut prev: Option<f64> = None;
    let mut min_gap = f64::INFINITY;
    for v in values {
        if let Some(p) = prev {
            if v == p {
                continue;
            }
            min_gap = min_gap.min(v - p);
        } else {
            first = Some(v);
        }
        prev = Some(v);
    }
    match (first, prev) {
        (Some(lo), Some(hi)) if hi > lo => DynamicRange {
            bits: ((hi - lo) / min_gap).log2(),
            max_diff: hi - lo,
            min_diff: min_gap,
            degenerate: false,
        },
        _ => DynamicRange::DEGENERATE,
    }
}

/// Dynamic range with the quadratic part held fixed; only the linear fields
/// change during tuning, so the quadratic values are sorted once.
struct RangeEvaluator {
    quadratic_sorted: Vec<f64>,
}

impl RangeEvaluator {
    fn new(model: &IsingModel) -> Self {
        let n = model.n();
        let j = model.quadratic();
        let mut q = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for a in 0..n {
            for b in a + 1..n {
                q.push(j[[a, b]]);
            }
        }
        q.sort_by(f64::total_cmp);
        q.dedup();
        Self { quadratic_sorted: q }
    }

    fn sorted_union(&self, linear: &[f64]) -> Vec<f64> {
        let mut lin = linear.to_vec();
        lin.sort_by(f64::total_cmp);
        let mut out = Vec::with_capacity(lin.len() + self.quadratic_sorted.len());
        let (mut a, mut b) = (0, 0);
        let quad = &self.quadratic_sorted;
        while a < lin.len() || b < quad.len() {
            let take_lin = b >= quad.len() || (a < lin.len() && lin[a] <= quad[b]);
            let v = if take_lin {
                a += 1;
                lin[a - 1]
            } else {
                b += 1;
                quad[b - 1]
            };
            if out.last() != Some(&v) {
                out.push(v);
            }
        }
        out
    }

    fn eval(&self, linear: &[f64]) -> DynamicRange {
        range_of_sorted_distinct(self.sorted_union(linear).into_iter())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveKind {
    /// Shrinks an entry at the edge of the value range.
    ShrinkExtreme,
    /// Pulls an entry of the tightest gap away from its partner.
    WidenGap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningStep {
    pub coefficient: CoefRef,
    pub kind: MoveKind,
    pub from: f64,
    pub to: f64,
    pub dr_before: f64,
    pub dr_after: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TuningConfig {
    /// Maximum number of accepted steps.
    pub budget: usize,
    /// Ground-state checks are exhaustive up to this many spins.
    pub exhaustive_limit: usize,
    /// Tabu restarts for the sampled check above `exhaustive_limit`.
    pub restarts: usize,
    /// Tabu moves per restart, as a multiple of `n`.
    pub moves_per_spin: u64,
    pub seed: u64,
    /// Energy tolerance relative to the coefficient mass.
    pub tolerance: f64,
}

impl Default for TuningConfig {
    fn default() -> Self {
        Self {
            budget: 100,
            exhaustive_limit: 12,
            restarts: 4,
            moves_per_spin: 20,
            seed: 0x5eed,
            tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TunedModel {
    pub model: IsingModel,
    pub steps: Vec<TuningStep>,
    /// Ground state (or best known state above the exhaustive limit) of the
    /// input that every accepted step keeps optimal.
    pub reference: Assignment,
}

/// Single-entry tuning of the linear fields.
///
/// Each candidate moves one field toward zero without crossing it. A step is
/// accepted only if the dynamic range strictly drops and the reference ground
/// state `z*` of the input stays a ground state:
///
/// * if the field opposes `z*` (`h_k·z*_k > 0`) shrinking it lowers `E(z*)` by
///   the full amount and no other state by more, so `z*` stays optimal;
/// * otherwise optimality is re-checked, exhaustively for up to
///   `exhaustive_limit` spins and by tabu restarts above that.
pub fn reduce_dynamic_range(model: &IsingModel, cfg: &TuningConfig) -> Result<TunedModel> {
    let n = model.n();
    let mut current = model.clone();
    let evaluator = RangeEvaluator::new(model);
    let tol = cfg.tolerance * (model.linear().iter().map(|v| v.abs()).sum::<f64>()
        + model.quadratic().iter().map(|v| v.abs()).sum::<f64>() * 0.5
        + 1.0);
    let checker = GroundStateCheck::new(n, cfg, tol);
    let reference = checker.reference(model)?;
    let ref_spins = reference.to_spins();
    let mut steps = Vec::new();

    while steps.len() < cfg.budget {
        let linear: Vec<f64> = current.linear().to_vec();
        let dr = evaluator.eval(&linear);
        if dr.degenerate {
            break;
        }
        let mut accepted = None;
        'search: for (k, kind, target) in candidate_moves(&evaluator, &linear) {
            let from = linear[k];
            let mut trial = linear.clone();
            trial[k] = target;
            let after = evaluator.eval(&trial);
            if !(after.bits < dr.bits) {
                continue;
            }
            let opposes = from * ref_spins[k] as f64 > 0.0;
            let mut tuned = current.clone();
            tuned.linear_mut()[k] = target;
            if !opposes && !checker.still_optimal(&tuned, &reference)? {
                continue;
            }
            accepted = Some((
                tuned,
                TuningStep {
                    coefficient: CoefRef::Linear(k),
                    kind,
                    from,
                    to: target,
                    dr_before: dr.bits,
                    dr_after: after.bits,
                },
            ));
            break 'search;
        }
        match accepted {
            Some((tuned, step)) => {
                current = tuned;
                steps.push(step);
            }
            None => break,
        }
    }
    Ok(TunedModel {
        model: current,
        steps,
        reference,
    })
}

/// Candidate `(index, kind, new value)` moves in a fixed order: extremes
/// first, then tightest-gap members; each at the full and half distance.
fn candidate_moves(evaluator: &RangeEvaluator, linear: &[f64]) -> Vec<(usize, MoveKind, f64)> {
    let union = evaluator.sorted_union(linear);
    let mut out = Vec::new();
    if union.len() < 2 {
        return out;
    }
    let (lo, hi) = (union[0], union[union.len() - 1]);
    let toward_zero = |v: f64, amount: f64| {
        if amount >= v.abs() {
            0.0
        } else {
            v - v.signum() * amount
        }
    };

    for (k, &v) in linear.iter().enumerate() {
        if v == 0.0 || (v != lo && v != hi) {
            continue;
        }
        let next_mag = union
            .iter()
            .map(|u| u.abs())
            .filter(|&m| m < v.abs())
            .fold(0.0, f64::max);
        let full = v.abs() - next_mag;
        for amount in [full, full * 0.5] {
            if amount > 0.0 {
                out.push((k, MoveKind::ShrinkExtreme, toward_zero(v, amount)));
            }
        }
    }

    let mut gaps: Vec<f64> = union.windows(2).map(|w| w[1] - w[0]).collect();
    let tightest = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    gaps.sort_by(f64::total_cmp);
    gaps.dedup();
    let Some(&second) = gaps.get(1) else {
        return out;
    };
    let widen = second - tightest;
    for w in union.windows(2) {
        if w[1] - w[0] != tightest {
            continue;
        }
        // lower member moves down only when positive, upper moves up only when negative
        for (value, ok) in [(w[0], w[0] > 0.0), (w[1], w[1] < 0.0)] {
            if !ok {
                continue;
            }
            for (k, &v) in linear.iter().enumerate() {
                if v == value {
                    for amount in [widen, widen * 0.5] {
                        out.push((k, MoveKind::WidenGap, toward_zero(v, amount)));
                    }
                }
            }
        }
    }
    out
}

struct GroundStateCheck<'a> {
    n: usize,
    cfg: &'a TuningConfig,
    tol: f64,
}

impl<'a> GroundStateCheck<'a> {
    fn new(n: usize, cfg: &'a TuningConfig, tol: f64) -> Self {
        Self { n, cfg, tol }
    }

    fn exhaustive(&self) -> bool {
        self.n <= self.cfg.exhaustive_limit
    }

    fn reference(&self, model: &IsingModel) -> Result<Assignment> {
        let q = model.to_qubo();
        if self.exhaustive() {
            let cap = self.cfg.exhaustive_limit.max(self.n);
            return Ok(Exhaustive { cap }.minimize(&q)?.0);
        }
        let mut best: Option<(Vec<u8>, f64)> = None;
        for r in 0..self.cfg.restarts.max(1) {
            let found = self.tabu_run(&q, r as u64)?;
            if best.as_ref().is_none_or(|b| found.1 < b.1) {
                best = Some(found);
            }
        }
        Assignment::new(best.map(|b| b.0).unwrap_or_default())
    }

    fn tabu_run(&self, q: &Qubo, restart: u64) -> Result<(Vec<u8>, f64)> {
        let moves = self.cfg.moves_per_spin.max(1) * self.n as u64;
        TabuSearch::default().run(q, self.cfg.seed.wrapping_add(restart), moves)
    }

    fn still_optimal(&self, model: &IsingModel, reference: &Assignment) -> Result<bool> {
        let q = model.to_qubo();
        let e_ref = q.energy(reference)?;
        if self.exhaustive() {
            let min = all_energies(&q)?.into_iter().fold(f64::INFINITY, f64::min);
            return Ok(e_ref <= min + self.tol);
        }
        for r in 0..self.cfg.restarts.max(1) {
            let (_, e) = self.tabu_run(&q, r as u64)?;
            if e < e_ref - self.tol {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Ising model with signed 8-bit coefficients and the scale that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedIsing {
    pub linear: Vec<i8>,
    /// Symmetric, zero diagonal.
    pub quadratic: Array2<i8>,
    /// Integer units per model unit, `127/α`.
    pub scale: f64,
    /// Source model was all zero; `scale` is then 1 by convention.
    pub degenerate: bool,
    pub provenance: Vec<TuningStep>,
}

impl QuantizedIsing {
    pub fn n(&self) -> usize {
        self.linear.len()
    }

    /// Integer energy `Σ h̃ z + Σ_{i<j} J̃ z z`.
    pub fn energy(&self, spins: &[i8]) -> Result<i64> {
        let n = self.n();
        if spins.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: spins.len(),
            });
        }
        let mut e = 0i64;
        for i in 0..n {
            let zi = spins[i] as i64;
            if zi != 1 && zi != -1 {
                return Err(Error::NotSpin {
                    index: i,
                    value: spins[i],
                });
            }
            e += self.linear[i] as i64 * zi;
            for j in i + 1..n {
                e += self.quadratic[[i, j]] as i64 * zi * spins[j] as i64;
            }
        }
        Ok(e)
    }

    pub fn to_ising(&self) -> IsingModel {
        let linear = self.linear.iter().map(|&v| v as f64).collect();
        let quadratic = self.quadratic.mapv(|v| v as f64);
        IsingModel::new(linear, quadratic, 0.0).expect("quantized model is well formed")
    }

    /// Binary form of the integer model; all coefficients stay integer.
    pub fn to_qubo(&self) -> Qubo {
        self.to_ising().to_qubo()
    }
}

fn quantize_value(x: f64, alpha: f64) -> i8 {
    (x / alpha * 127.0).round().clamp(-128.0, 127.0) as i8
}

/// `clip(round(127/α · X), −128, 127)` applied uniformly to all coefficients,
/// with `α = max |X|`. Offsets are dropped.
pub fn quantize_int8(model: &IsingModel) -> Result<QuantizedIsing> {
    let n = model.n();
    let linear = model.linear();
    let quad = model.quadratic();
    if linear.iter().chain(quad.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Ising coefficients".into()));
    }
    let alpha = linear
        .iter()
        .chain(quad.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if alpha == 0.0 {
        return Ok(QuantizedIsing {
            linear: vec![0; n],
            quadratic: Array2::zeros((n, n)),
            scale: 1.0,
            degenerate: true,
            provenance: Vec::new(),
        });
    }
    Ok(QuantizedIsing {
        linear: linear.iter().map(|&v| quantize_value(v, alpha)).collect(),
        quadratic: quad.mapv(|v| quantize_value(v, alpha)),
        scale: 127.0 / alpha,
        degenerate: false,
        provenance: Vec::new(),
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    /// Nonzero source coefficients that quantized to zero.
    pub zeroed: usize,
    /// Zeroed linear fields and same-block couplings.
    pub zeroed_intra: usize,
    /// Zeroed couplings between different blocks.
    pub zeroed_inter: usize,
    pub nonzero_intra: usize,
    pub nonzero_inter: usize,
    /// `max |q/scale − x| / |x|` over nonzero source coefficients.
    pub max_relative_error: f64,
}

impl LossReport {
    /// Fraction of nonzero inter-block couplings that were lost.
    pub fn inter_zeroed_fraction(&self) -> Option<f64> {
        (self.nonzero_inter > 0).then(|| self.zeroed_inter as f64 / self.nonzero_inter as f64)
    }
}

/// Counts coefficients lost to quantization. Without a partition every
/// coefficient counts as intra-block.
pub fn quantization_loss_report(
    model: &IsingModel,
    quantized: &QuantizedIsing,
    partition: Option<&BlockPartition>,
) -> Result<LossReport> {
    let n = model.n();
    if quantized.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: quantized.n(),
        });
    }
    let labels = partition.map(|p| p.labels());
    if let Some(l) = &labels {
        if l.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: l.len(),
            });
        }
    }
    let mut report = LossReport::default();
    let tally = |x: f64, q: i8, inter: bool, report: &mut LossReport| {
        if x == 0.0 {
            return;
        }
        if inter {
            report.nonzero_inter += 1;
        } else {
            report.nonzero_intra += 1;
        }
        if q == 0 {
            report.zeroed += 1;
            if inter {
                report.zeroed_inter += 1;
            } else {
                report.zeroed_intra += 1;
            }
        }
        let rel = ((q as f64 / quantized.scale) - x).abs() / x.abs();
        report.max_relative_error = report.max_relative_error.max(rel);
    };
    for i in 0..n {
        tally(model.linear()[i], quantized.linear[i], false, &mut report);
        for j in i + 1..n {
            let inter = labels.as_ref().is_some_and(|l| l[i] != l[j]);
            tally(model.quadratic()[[i, j]], quantized.quadratic[[i, j]], inter, &mut report);
        }
    }
    Ok(report)
}
