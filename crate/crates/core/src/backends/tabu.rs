use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{dense_rows, timed, Backend, FlipState, SolveRequest, SolveResult};
use crate::error::{Error, Result};
use crate::qubo::{Assignment, Qubo};

/// Steepest-descent single-flip tabu search with best-energy aspiration.
///
/// Starts from a seeded random assignment. A flipped variable stays tabu for
/// `tenure` moves (capped at `n − 1` so some move is always free); a tabu move
/// is still allowed when it reaches a new best energy. Ties between equally
/// good moves go to the lowest index.
#[derive(Debug, Clone, Default)]
pub struct TabuSearch {
    /// Defaults to `max(7, n/10)`.
    pub tenure: Option<usize>,
    /// Defaults to `100·n` when the request carries no effort.
    pub iterations: Option<u64>,
}

impl TabuSearch {
    pub(crate) fn run(&self, q: &Qubo, seed: u64, iterations: u64) -> Result<(Vec<u8>, f64)> {
        let n = q.n();
        let tenure = match self.tenure {
            Some(0) => return Err(Error::backend("tabu", "tenure must be at least 1")),
            Some(t) => t,
            None => (n / 10).max(7),
        };
        let tenure = tenure.min(n.saturating_sub(1)) as u64;
        let rows = dense_rows(q);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let init: Vec<u8> = (0..n).map(|_| rng.random_range(0..2u8)).collect();
        let mut state = FlipState::new(&rows, n, q.offset(), init);
        let mut best = (state.x.clone(), state.energy);
        if n == 0 {
            return Ok(best);
        }
        let mut tabu_until = vec![0u64; n];
        for it in 1..=iterations {
            let mut pick: Option<(usize, f64)> = None;
            let mut fallback: Option<(usize, f64)> = None;
            for k in 0..n {
                let d = state.delta(k);
                if fallback.is_none_or(|(_, fd)| d < fd) {
                    fallback = Some((k, d));
                }
                let free = tabu_until[k] < it;
                let aspirates = state.energy + d < best.1;
                if (free || aspirates) && pick.is_none_or(|(_, pd)| d < pd) {
                    pick = Some((k, d));
                }
            }
            let Some((k, d)) = pick.or(fallback) else { break };
            state.flip(k, d);
            tabu_until[k] = it + tenure;
            if state.energy < best.1 {
                best = (state.x.clone(), state.energy);
            }
        }
        Ok(best)
    }
}

impl Backend for TabuSearch {
    fn id(&self) -> String {
        "tabu".into()
    }

    fn solve(&self, request: &SolveRequest<'_>) -> Result<SolveResult> {
        let q = request.model;
        let iterations = request
            .checked_effort("tabu")?
            .or(self.iterations)
            .unwrap_or(100 * q.n() as u64);
        let ((bits, _), wall_time) = timed(|| self.run(q, request.seed, iterations))?;
        let assignment = Assignment::new(bits)?;
        let reported_energy = q.energy(&assignment)?;
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
    use ndarray::{array, Array2};

    #[test]
    fn separable_reaches_optimum_within_n_moves() {
        let q = Qubo::new(Array2::from_diag(&array![-1.0, 2.0, -3.0, 0.5, -0.1]), 0.0).unwrap();
        let r = TabuSearch::default()
            .solve(&SolveRequest::new(&q, 3).with_effort(5))
            .unwrap();
        assert_eq!(r.assignment.bits(), &[1, 0, 1, 0, 1]);
    }

    #[test]
    fn reruns_identical() {
        let q = Qubo::symmetrized(
            array![[1.0, -2.0, 0.5], [0.0, -1.0, 3.0], [0.7, 0.0, -0.2]],
            0.0,
        )
        .unwrap();
        let t = TabuSearch::default();
        let a = t.solve(&SolveRequest::new(&q, 8)).unwrap();
        let b = t.solve(&SolveRequest::new(&q, 8)).unwrap();
        assert_eq!(a.assignment, b.assignment);
    }

    #[test]
    fn zero_tenure_rejected() {
        let q = Qubo::zeros(3);
        let t = TabuSearch {
            tenure: Some(0),
            iterations: None,
        };
        assert!(t.solve(&SolveRequest::new(&q, 0)).is_err());
    }
}
