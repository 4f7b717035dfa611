//! Splitting a unit pool across ideas: exact dynamic programs, the
//! metaproduction function and its closed form, and a greedy solver for the
//! multi-pool problem with exclusions.

mod dp;
mod metaproduction;
mod pooled;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dp::{solve_dp, solve_dp_multiplicity, solve_dp_with, DpOptions, DpSolution, DEFAULT_MEMORY_BUDGET};
pub use metaproduction::{
    metaproduction_closed, metaproduction_direct, regret_per_idea_limit, MetaproductionResult, Regime,
};
pub use pooled::{solve_pooled_concave, PooledProgram, PooledSolution, RoundedTest, UnitPool};

/// `I` ideas competing for `N` units handed out in blocks of `c0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationProblem {
    ideas: u64,
    pool: u64,
    granularity: u64,
}

impl AllocationProblem {
    pub fn new(ideas: u64, pool: u64, granularity: u64) -> Result<Self> {
        if ideas == 0 {
            return Err(Error::invalid("ideas", "at least one idea is required"));
        }
        if pool == 0 {
            return Err(Error::invalid("pool", "at least one unit is required"));
        }
        if granularity == 0 || granularity > pool {
            return Err(Error::invalid(
                "granularity",
                format!("cohort size must lie in 1..={pool}, got {granularity}"),
            ));
        }
        Ok(Self { ideas, pool, granularity })
    }

    pub fn ideas(&self) -> u64 {
        self.ideas
    }

    pub fn pool(&self) -> u64 {
        self.pool
    }

    pub fn granularity(&self) -> u64 {
        self.granularity
    }

    /// Number of whole blocks in the pool.
    pub fn blocks(&self) -> u64 {
        self.pool / self.granularity
    }
}
