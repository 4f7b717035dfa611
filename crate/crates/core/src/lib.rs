//! Return-maximizing design of A/B test portfolios under an empirical-Bayes
//! prior on treatment effects.
//!
//! The building block is the production function `f(n)`: the expected
//! return from testing one idea with `n` units and shipping it when the
//! posterior says so. Everything else (how many ideas to test, how to split
//! pools and idea budgets between programs, what p-value threshold to use)
//! is derived from it.
//!
//! ```
//! use leanexp::{find_x_star, metaproduction_closed, GaussianPrior, NoiseModel, ProductionHandle};
//!
//! let f = ProductionHandle::linear(GaussianPrior::new(-1.0, 1.0)?, NoiseModel::new(10.0)?);
//! let analysis = find_x_star(&f, 1e9)?;
//! let plan = metaproduction_closed(1_000.0, 1e5, &analysis, &f)?;
//! assert!(plan.i_star < 1_000.0);
//! # Ok::<(), leanexp::Error>(())
//! ```

pub mod allocation;
pub mod decisions;
pub mod error;
pub mod exclusive;
pub mod io;
pub mod montecarlo;
pub mod normal;
pub mod optimize;
pub mod portfolio;
pub mod priors;
pub mod production;
pub mod quadrature;

pub use allocation::{
    metaproduction_closed, metaproduction_direct, regret_per_idea_limit, solve_dp, solve_dp_multiplicity,
    solve_dp_with, solve_pooled_concave, AllocationProblem, DpOptions, DpSolution, MetaproductionResult,
    PooledProgram, PooledSolution, Regime, UnitPool,
};
pub use decisions::{
    implied_b_for_alpha, implied_cost_for_alpha, minimax_constant, minimax_risk, minimax_rule,
    optimal_threshold_gaussian_linear, optimal_threshold_generic, pass_probability, DecisionThreshold,
};
pub use error::{Error, Result};
pub use exclusive::{
    exclusive_curve_mc, exclusive_value_approx, exclusive_value_mc, exclusive_value_quadrature, optimize_i0,
    ExclusiveMethod, ExclusiveResult, I0Scan,
};
pub use montecarlo::Estimate;
pub use portfolio::{
    metaproduction_curve, solve_sequential, solve_sequential_table, solve_shared_allocation, solve_shared_ideas,
    ProgramSpec, Schedule, SharedAllocation, SharedIdeas,
};
pub use priors::{
    expected_positive_part, fit_gaussian_mle, mle_variance_equal_allocation, posterior_expected_utility,
    posterior_expected_utility_with, posterior_moments_gaussian,
    DiscretePrior, ExperimentRecord, FitWarning, GaussianPrior, NoiseModel, Prior, PriorFit, Utility,
};
pub use production::{
    find_x_star, production_gaussian_linear, production_generic, production_monte_carlo, production_pvalue_rule,
    production_under_rule, CostModel, DecisionRule, FnProduction, Production, ProductionAnalysis,
    ProductionHandle, ProductionValue, Saturation, TabulatedProduction, TestingCost, DEFAULT_PVALUE_Z,
};
