//! Shared fixtures for the solver benchmarks.

use leanexp::{GaussianPrior, NoiseModel, ProductionHandle, ProgramSpec};

/// A pessimistic prior with noisy tests, where `x*` is large.
pub fn lean_program() -> ProductionHandle {
    ProductionHandle::linear(GaussianPrior::new(-0.5, 1.0).unwrap(), NoiseModel::new(20.0).unwrap())
}

pub fn gaussian() -> (GaussianPrior, NoiseModel) {
    (GaussianPrior::new(-0.5, 1.0).unwrap(), NoiseModel::new(10.0).unwrap())
}

pub fn programs(count: usize) -> Vec<ProgramSpec> {
    (0..count)
        .map(|i| ProgramSpec {
            name: format!("p{i}"),
            prior: GaussianPrior::new(-0.2 - 0.1 * i as f64, 0.5 + 0.25 * i as f64).unwrap().into(),
            sigma: 5.0,
            ideas: 20,
            pool: 0,
            weight: 1.0,
        })
        .collect()
}
