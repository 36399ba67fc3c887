//! Shared inputs for the benchmarks.

use co2watch_core::rng;
use co2watch_core::scenario::simulate_ar1;

/// AR(1) sample with the default null-model parameters.
pub fn null_series(len: usize) -> Vec<f64> {
    simulate_ar1(0.35, 0.72, len, &mut rng::stream(7, 0)).unwrap()
}
