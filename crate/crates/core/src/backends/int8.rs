use std::time::Instant;

use super::{Backend, QuantizationSummary, SolveRequest, SolveResult};
use crate::error::Result;
use crate::precision::{quantization_loss_report, quantize_int8, reduce_dynamic_range, TuningConfig};

/// Runs the inner backend on a signed 8-bit version of the submitted model.
///
/// QUBO → Ising, dynamic-range tuning, `int8` quantization, then the integer
/// Ising model is handed back to the inner solver in binary form. The returned
/// energy is in integer units of that model; callers that need the original
/// objective re-score the assignment themselves.
pub struct Int8Adapter {
    inner: Box<dyn Backend>,
    tuning: TuningConfig,
}

impl Int8Adapter {
    pub fn new(inner: Box<dyn Backend>, tuning: TuningConfig) -> Self {
        Self { inner, tuning }
    }
}

impl Backend for Int8Adapter {
    fn id(&self) -> String {
        format!("int8({})", self.inner.id())
    }

    fn is_quantized(&self) -> bool {
        true
    }

    fn solve(&self, request: &SolveRequest<'_>) -> Result<SolveResult> {
        let prep = Instant::now();
        let ising = request.model.to_ising();
        let tuned = reduce_dynamic_range(&ising, &self.tuning)?;
        let mut quantized = quantize_int8(&tuned.model)?;
        quantized.provenance = tuned.steps;
        let loss = quantization_loss_report(&tuned.model, &quantized, request.model.partition())?;
        let device_model = quantized.to_qubo();
        let prep_seconds = prep.elapsed().as_secs_f64();

        let inner = self.inner.solve(&SolveRequest {
            model: &device_model,
            seed: request.seed,
            effort: request.effort,
        })?;
        Ok(SolveResult {
            assignment: inner.assignment,
            reported_energy: inner.reported_energy,
            wall_time: inner.wall_time,
            backend_id: self.id(),
            quantization: Some(QuantizationSummary {
                tuning_steps: quantized.provenance.len(),
                model: quantized,
                loss,
                prep_seconds,
            }),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::Exhaustive;
    use crate::qubo::{Assignment, Qubo};
    use ndarray::Array2;

    #[test]
    fn zero_model_returns_tie_choice() {
        let q = Qubo::zeros(4);
        let a = Int8Adapter::new(Box::new(Exhaustive::default()), TuningConfig::default());
        let r = a.solve(&SolveRequest::new(&q, 0)).unwrap();
        assert_eq!(r.assignment, Assignment::zeros(4));
        let summary = r.quantization.unwrap();
        assert!(summary.model.degenerate);
        assert_eq!(r.reported_energy, 0.0);
    }

    #[test]
    fn reported_energy_is_integer_model_energy() {
        let mut m = Array2::zeros((3, 3));
        m[[0, 0]] = -2.3;
        m[[1, 1]] = 0.7;
        m[[0, 1]] = 0.4;
        m[[1, 0]] = 0.4;
        m[[2, 2]] = -0.01;
        let q = Qubo::new(m, 0.0).unwrap();
        let a = Int8Adapter::new(Box::new(Exhaustive::default()), TuningConfig::default());
        let r = a.solve(&SolveRequest::new(&q, 0)).unwrap();
        let s = r.quantization.unwrap();
        let e = s.model.energy(&r.assignment.to_spins()).unwrap() as f64;
        let e_qubo = s.model.to_qubo().energy(&r.assignment).unwrap();
        assert_eq!(e, e_qubo);
        assert!((r.reported_energy - e_qubo).abs() < 1e-9);
    }
}
