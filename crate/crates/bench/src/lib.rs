//! Shared fixtures for the benchmarks; all measurement lives in `benches/`.

use mumle::{replicate_rng, sample, DataSet, Family, ParameterPoint};

/// One deterministic dataset per (family, size), grouped where needed.
pub fn fixture(family: Family, n: usize) -> DataSet {
    let params = if family.is_grouped() {
        ParameterPoint::new(vec![0.0; n], 1.0)
    } else {
        ParameterPoint::scalar(1.0, 1.0)
    };
    let m = family.is_grouped().then_some(2);
    let mut rng = replicate_rng(2024, n as u64);
    sample(family, &params, n, m, &mut rng).expect("fixture parameters are admissible")
}
