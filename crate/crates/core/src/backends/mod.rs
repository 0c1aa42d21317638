//! Solver backends behind a common [`Backend`] interface.
//!
//! Every backend is a deterministic function of `(model, seed, effort)`.
//! Effort is always a count, never a wall-clock budget:
//!
//! | backend      | effort unit                          | default      |
//! |--------------|--------------------------------------|--------------|
//! | `exhaustive` | ignored (must be positive if given)  | -            |
//! | `sa`         | Metropolis sweeps of `n` flips each  | 200          |
//! | `tabu`       | single-flip moves                    | `100·n`      |
//!
//! `int8(<name>)` wraps any of them in [`Int8Adapter`], which emulates a
//! device that only accepts signed 8-bit Ising coefficients.

mod anneal;
mod exhaustive;
mod int8;
mod tabu;

use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::precision::{LossReport, QuantizedIsing, TuningConfig};
use crate::qubo::{Assignment, Qubo};

pub use anneal::SimulatedAnnealing;
pub use exhaustive::{all_energies, Exhaustive, DEFAULT_EXHAUSTIVE_CAP};
pub use int8::Int8Adapter;
pub use tabu::TabuSearch;

pub struct SolveRequest<'a> {
    pub model: &'a Qubo,
    pub seed: u64,
    pub effort: Option<u64>,
}

impl<'a> SolveRequest<'a> {
    pub fn new(model: &'a Qubo, seed: u64) -> Self {
        Self {
            model,
            seed,
            effort: None,
        }
    }

    pub fn with_effort(mut self, effort: u64) -> Self {
        self.effort = Some(effort);
        self
    }

    pub(crate) fn checked_effort(&self, backend: &str) -> Result<Option<u64>> {
        match self.effort {
            Some(0) => Err(Error::backend(backend, "effort must be positive")),
            e => Ok(e),
        }
    }
}

/// What the device-side model looked like for a quantized solve.
#[derive(Debug, Clone, Serialize)]
pub struct QuantizationSummary {
    pub model: QuantizedIsing,
    pub loss: LossReport,
    pub tuning_steps: usize,
    pub prep_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub assignment: Assignment,
    /// Energy under the model the solver actually saw: the submitted QUBO for
    /// plain backends, the integer model for quantized ones.
    pub reported_energy: f64,
    /// Solver time only.
    pub wall_time: f64,
    pub backend_id: String,
    pub quantization: Option<QuantizationSummary>,
}

pub trait Backend: Send + Sync {
    fn id(&self) -> String;

    fn solve(&self, request: &SolveRequest<'_>) -> Result<SolveResult>;

    /// True when the backend only sees integer coefficients.
    fn is_quantized(&self) -> bool {
        false
    }
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn id(&self) -> String {
        (**self).id()
    }

    fn solve(&self, request: &SolveRequest<'_>) -> Result<SolveResult> {
        (**self).solve(request)
    }

    fn is_quantized(&self) -> bool {
        (**self).is_quantized()
    }
}

/// Knobs shared by backends built from names.
#[derive(Debug, Clone, Default)]
pub struct BackendSettings {
    pub exhaustive_cap: Option<usize>,
    pub sa: SimulatedAnnealing,
    pub tabu: TabuSearch,
    pub tuning: TuningConfig,
}

/// Builds `exhaustive | sa | tabu`, optionally wrapped as `int8(<name>)`.
pub fn backend_from_name(name: &str, settings: &BackendSettings) -> Result<Box<dyn Backend>> {
    let name = name.trim();
    if let Some(inner) = name.strip_prefix("int8(").and_then(|s| s.strip_suffix(')')) {
        let inner = backend_from_name(inner, settings)?;
        if inner.is_quantized() {
            return Err(Error::InvalidConfig("nested int8 adapters".into()));
        }
        return Ok(Box::new(Int8Adapter::new(inner, settings.tuning.clone())));
    }
    match name {
        "exhaustive" => Ok(Box::new(Exhaustive {
            cap: settings.exhaustive_cap.unwrap_or(DEFAULT_EXHAUSTIVE_CAP),
        })),
        "sa" => Ok(Box::new(settings.sa.clone())),
        "tabu" => Ok(Box::new(settings.tabu.clone())),
        other => Err(Error::InvalidConfig(format!(
            "unknown backend '{other}' (expected exhaustive, sa, tabu or int8(<name>))"
        ))),
    }
}

/// Incremental single-flip state for a symmetric QUBO.
///
/// `field[i] = Σ_{j≠i} Q_ij x_j`, so flipping bit `k` changes the energy by
/// `(1 − 2x_k)(Q_kk + 2·field[k])`.
pub(crate) struct FlipState<'a> {
    q: &'a [f64],
    n: usize,
    pub x: Vec<u8>,
    field: Vec<f64>,
    pub energy: f64,
}

impl<'a> FlipState<'a> {
    pub fn new(q: &'a [f64], n: usize, offset: f64, x: Vec<u8>) -> Self {
        let mut field = vec![0.0; n];
        let mut energy = offset;
        for i in 0..n {
            let row = &q[i * n..(i + 1) * n];
            let mut f = 0.0;
            for (j, &xj) in x.iter().enumerate() {
                if j != i && xj == 1 {
                    f += row[j];
                }
            }
            field[i] = f;
            if x[i] == 1 {
                energy += row[i] + f;
            }
        }
        Self {
            q,
            n,
            x,
            field,
            energy,
        }
    }

    #[inline]
    pub fn delta(&self, k: usize) -> f64 {
        let sign = 1.0 - 2.0 * self.x[k] as f64;
        sign * (self.q[k * self.n + k] + 2.0 * self.field[k])
    }

    #[inline]
    pub fn flip(&mut self, k: usize, delta: f64) {
        let step = if self.x[k] == 1 { -1.0 } else { 1.0 };
        self.x[k] ^= 1;
        self.energy += delta;
        let row = &self.q[k * self.n..(k + 1) * self.n];
        for (j, f) in self.field.iter_mut().enumerate() {
            if j != k {
                *f += step * row[j];
            }
        }
    }
}

/// Row-major contiguous copy of the coefficients.
pub(crate) fn dense_rows(q: &Qubo) -> Vec<f64> {
    q.coeffs().iter().copied().collect()
}

pub(crate) fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let start = Instant::now();
    let out = f()?;
    Ok((out, start.elapsed().as_secs_f64()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn names_resolve() {
        let s = BackendSettings::default();
        assert_eq!(backend_from_name("sa", &s).unwrap().id(), "sa");
        assert_eq!(backend_from_name("tabu", &s).unwrap().id(), "tabu");
        assert_eq!(backend_from_name("exhaustive", &s).unwrap().id(), "exhaustive");
        let wrapped = backend_from_name("int8(tabu)", &s).unwrap();
        assert_eq!(wrapped.id(), "int8(tabu)");
        assert!(wrapped.is_quantized());
        assert!(backend_from_name("int8(int8(sa))", &s).is_err());
        assert!(backend_from_name("cim", &s).is_err());
    }

    #[test]
    fn zero_effort_rejected() {
        let q = Qubo::zeros(3);
        let s = BackendSettings::default();
        for name in ["sa", "tabu", "exhaustive"] {
            let b = backend_from_name(name, &s).unwrap();
            assert!(b.solve(&SolveRequest::new(&q, 0).with_effort(0)).is_err());
        }
    }

    #[test]
    fn flip_state_tracks_energy() {
        let mut m = Array2::zeros((3, 3));
        m[[0, 0]] = -1.0;
        m[[1, 1]] = 2.0;
        m[[0, 2]] = 0.5;
        m[[2, 0]] = 0.5;
        m[[2, 2]] = -0.25;
        let q = Qubo::new(m, 1.0).unwrap();
        let rows = dense_rows(&q);
        let mut st = FlipState::new(&rows, 3, 1.0, vec![0, 0, 0]);
        for k in [0, 2, 1, 0, 2] {
            let d = st.delta(k);
            st.flip(k, d);
            let exact = q.energy(&Assignment::new(st.x.clone()).unwrap()).unwrap();
            assert!((st.energy - exact).abs() < 1e-12);
        }
    }
}
