//! Shared inputs for the solver benchmarks.

use dpo_bcd::harness::Instance;
use dpo_bcd::{fixture_series, DpoConfig, ProblemSize};

/// The fixture instance at one of the named sizes.
pub fn fixture_instance(size: ProblemSize) -> Instance {
    Instance::from_series(format!("{size:?}"), DpoConfig::size(size), &fixture_series())
        .expect("fixture covers every named size")
}
