use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{dense_rows, timed, Backend, FlipState, SolveRequest, SolveResult};
use crate::error::{Error, Result};
use crate::qubo::Assignment;

/// Single-flip Metropolis annealing with a geometric schedule `T_k = T₀·r^k`.
///
/// One sweep visits every variable once in index order; the temperature is
/// lowered after each sweep. The best assignment seen is returned.
#[derive(Debug, Clone)]
pub struct SimulatedAnnealing {
    /// Defaults to `max|Q_ij|·n`.
    pub initial_temperature: Option<f64>,
    pub cooling: f64,
    /// Default sweep count when the request carries no effort.
    pub sweeps: u64,
}

impl Default for SimulatedAnnealing {
    fn default() -> Self {
        Self {
            initial_temperature: None,
            cooling: 0.97,
            sweeps: 200,
        }
    }
}

impl Backend for SimulatedAnnealing {
    fn id(&self) -> String {
        "sa".into()
    }

    fn solve(&self, request: &SolveRequest<'_>) -> Result<SolveResult> {
        let sweeps = request.checked_effort("sa")?.unwrap_or(self.sweeps);
        if !(self.cooling > 0.0 && self.cooling <= 1.0) {
            return Err(Error::backend("sa", format!("cooling factor {} not in (0, 1]", self.cooling)));
        }
        let q = request.model;
        let n = q.n();
        let t0 = self
            .initial_temperature
            .unwrap_or_else(|| q.max_abs() * n as f64);
        if !(t0 >= 0.0 && t0.is_finite()) {
            return Err(Error::backend("sa", format!("invalid initial temperature {t0}")));
        }
        let ((bits, best), wall_time) = timed(|| {
            let rows = dense_rows(q);
            let mut rng = ChaCha8Rng::seed_from_u64(request.seed);
            let init: Vec<u8> = (0..n).map(|_| rng.random_range(0..2u8)).collect();
            let mut state = FlipState::new(&rows, n, q.offset(), init);
            let mut best = (state.x.clone(), state.energy);
            let mut temperature = t0;
            for _ in 0..sweeps {
                for k in 0..n {
                    let d = state.delta(k);
                    let accept = d <= 0.0
                        || (temperature > 0.0 && rng.random::<f64>() < (-d / temperature).exp());
                    if accept {
                        state.flip(k, d);
                        if state.energy < best.1 {
                            best = (state.x.clone(), state.energy);
                        }
                    }
                }
                temperature *= self.cooling;
            }
            Ok(best)
        })?;
        let assignment = Assignment::new(bits)?;
        let reported_energy = q.energy(&assignment)?;
        debug_assert!((reported_energy - best).abs() <= 1e-6 * best.abs().max(1.0));
        Ok(SolveResult {
            assignment,
            reported_energy,
            wall_time,
            backend_id: self.id(),
            quantization: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubo::Qubo;
    use ndarray::{array, Array2};

    #[test]
    fn deterministic_given_seed() {
        let mut m = Array2::zeros((6, 6));
        for i in 0..6 {
            for j in 0..6 {
                m[[i, j]] = ((i * 7 + j * 3) % 5) as f64 - 2.0;
            }
        }
        let q = Qubo::symmetrized(m, 0.0).unwrap();
        let sa = SimulatedAnnealing::default();
        let a = sa.solve(&SolveRequest::new(&q, 42)).unwrap();
        let b = sa.solve(&SolveRequest::new(&q, 42)).unwrap();
        assert_eq!(a.assignment, b.assignment);
        assert_eq!(a.reported_energy, b.reported_energy);
    }

    #[test]
    fn separable_problem_solved() {
        let q = Qubo::new(Array2::from_diag(&array![-1.0, 2.0, -3.0, 0.5]), 0.0).unwrap();
        let r = SimulatedAnnealing::default().solve(&SolveRequest::new(&q, 1)).unwrap();
        assert_eq!(r.assignment.bits(), &[1, 0, 1, 0]);
    }

    #[test]
    fn invalid_schedule_rejected() {
        let q = Qubo::zeros(2);
        let sa = SimulatedAnnealing {
            cooling: 1.5,
            ..Default::default()
        };
        assert!(sa.solve(&SolveRequest::new(&q, 0)).is_err());
        let sa = SimulatedAnnealing {
            initial_temperature: Some(-1.0),
            ..Default::default()
        };
        assert!(sa.solve(&SolveRequest::new(&q, 0)).is_err());
    }
}
