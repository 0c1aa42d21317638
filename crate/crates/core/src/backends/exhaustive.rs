use super::{dense_rows, timed, Backend, FlipState, SolveRequest, SolveResult};
use crate::error::{Error, Result};
use crate::qubo::{Assignment, Qubo};

pub const DEFAULT_EXHAUSTIVE_CAP: usize = 24;

/// Exact minimizer by Gray-code enumeration with incremental energy updates.
///
/// Ties (within `1e-12` of the coefficient mass) go to the assignment with the
/// lowest integer code, bit `i` having weight `2^i`.
#[derive(Debug, Clone)]
pub struct Exhaustive {
    pub cap: usize,
}

impl Default for Exhaustive {
    fn default() -> Self {
        Self {
            cap: DEFAULT_EXHAUSTIVE_CAP,
        }
    }
}

impl Exhaustive {
    pub fn minimize(&self, q: &Qubo) -> Result<(Assignment, f64)> {
        let n = q.n();
        if n > self.cap || n >= 64 {
            return Err(Error::TooLarge { n, cap: self.cap });
        }
        let rows = dense_rows(q);
        let tol = tie_tolerance(q);
        let mut state = FlipState::new(&rows, n, q.offset(), vec![0; n]);
        let (mut best_code, mut best) = (0u64, state.energy);
        for step in 1u64..(1u64 << n) {
            let k = step.trailing_zeros() as usize;
            let d = state.delta(k);
            state.flip(k, d);
            let code = step ^ (step >> 1);
            let e = state.energy;
            if e < best - tol || (e <= best + tol && code < best_code) {
                best = best.min(e);
                best_code = code;
            }
        }
        let x = Assignment::from_code(best_code, n);
        let energy = q.energy(&x)?;
        Ok((x, energy))
    }
}

impl Backend for Exhaustive {
    fn id(&self) -> String {
        "exhaustive".into()
    }

    fn solve(&self, request: &SolveRequest<'_>) -> Result<SolveResult> {
        request.checked_effort("exhaustive")?;
        let ((assignment, energy), wall_time) = timed(|| self.minimize(request.model))?;
        Ok(SolveResult {
            assignment,
            reported_energy: energy,
            wall_time,
            backend_id: self.id(),
            quantization: None,
        })
    }
}

pub(crate) fn tie_tolerance(q: &Qubo) -> f64 {
    let mass: f64 = q.coeffs().iter().map(|v| v.abs()).sum();
    1e-12 * (mass + q.offset().abs()).max(1.0)
}

/// Energy of every assignment, indexed by code. Intended for small models.
pub fn all_energies(q: &Qubo) -> Result<Vec<f64>> {
    let n = q.n();
    if n > 26 {
        return Err(Error::TooLarge { n, cap: 26 });
    }
    let rows = dense_rows(q);
    let mut state = FlipState::new(&rows, n, q.offset(), vec![0; n]);
    let mut out = vec![0.0; 1usize << n];
    out[0] = state.energy;
    for step in 1u64..(1u64 << n) {
        let k = step.trailing_zeros() as usize;
        let d = state.delta(k);
        state.flip(k, d);
        out[(step ^ (step >> 1)) as usize] = state.energy;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_qubo(n: usize, rng: &mut ChaCha8Rng) -> Qubo {
        let mut m = Array2::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                let v: f64 = rng.random_range(-1.0..1.0);
                m[[i, j]] = v;
                m[[j, i]] = v;
            }
        }
        Qubo::new(m, 0.0).unwrap()
    }

    #[test]
    fn diagonal_sign_rule() {
        let q = Qubo::new(Array2::from_diag(&array![-1.0, 2.0, -3.0]), 0.0).unwrap();
        let r = Exhaustive::default().solve(&SolveRequest::new(&q, 0)).unwrap();
        assert_eq!(r.assignment.bits(), &[1, 0, 1]);
        assert_eq!(r.reported_energy, -4.0);
    }

    #[test]
    fn zero_model_ties_to_all_zeros() {
        let q = Qubo::zeros(5);
        let (x, e) = Exhaustive::default().minimize(&q).unwrap();
        assert_eq!(x, Assignment::zeros(5));
        assert_eq!(e, 0.0);
    }

    #[test]
    fn tie_prefers_lowest_code() {
        // x0 and x1 both give -1; code 0b01 < 0b10
        let q = Qubo::new(Array2::from_diag(&array![-1.0, -1.0]) + array![[0.0, 0.5], [0.5, 0.0]], 0.0).unwrap();
        let (x, e) = Exhaustive::default().minimize(&q).unwrap();
        assert_eq!(e, -1.0);
        assert_eq!(x.bits(), &[1, 0]);
    }

    #[test]
    fn dominates_random_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let q = random_qubo(12, &mut rng);
        let (_, best) = Exhaustive::default().minimize(&q).unwrap();
        for _ in 0..1000 {
            let x = Assignment::from_code(rng.random_range(0..4096), 12);
            assert!(best <= q.energy(&x).unwrap() + 1e-12);
        }
    }

    #[test]
    fn over_cap_rejected() {
        let q = Qubo::zeros(6);
        assert!(matches!(
            Exhaustive { cap: 5 }.minimize(&q),
            Err(Error::TooLarge { n: 6, cap: 5 })
        ));
    }

    #[test]
    fn all_energies_match_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q = random_qubo(7, &mut rng);
        let table = all_energies(&q).unwrap();
        for (code, e) in table.iter().enumerate() {
            let direct = q.energy(&Assignment::from_code(code as u64, 7)).unwrap();
            assert!((e - direct).abs() < 1e-12);
        }
    }
}
