use serde::Serialize;

use super::AllocationProblem;
use crate::error::{Error, Result};
use crate::production::Production;

/// Default ceiling on the backtracking table: 2 GiB.
pub const DEFAULT_MEMORY_BUDGET: u64 = 2 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DpOptions {
    /// Bytes allowed for the choice table.
    pub memory_budget: u64,
}

impl Default for DpOptions {
    fn default() -> Self {
        Self {
            memory_budget: DEFAULT_MEMORY_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DpSolution {
    pub value: f64,
    /// Units per idea, multiples of the cohort size, one entry per idea.
    pub allocation: Vec<u64>,
    pub tests_run: usize,
    /// `F(I, b·c0)` for `b = 0..=budget/c0`: the best value using exactly
    /// `b` blocks.
    pub frontier: Vec<f64>,
    pub granularity: u64,
}

/// Exact optimum of `Σ f(nᵢ)` with `Σ nᵢ = ⌊N/c0⌋·c0`, each `nᵢ` a multiple
/// of `c0`. Ties go to the smaller allocation for the idea being decided.
pub fn solve_dp<P: Production + ?Sized>(problem: &AllocationProblem, f: &P) -> Result<DpSolution> {
    solve_dp_with(problem, f, DpOptions::default())
}

pub fn solve_dp_with<P: Production + ?Sized>(
    problem: &AllocationProblem,
    f: &P,
    options: DpOptions,
) -> Result<DpSolution> {
    run(problem, f, 1, options)
}

/// Optimum when each unit may join up to `k` tests: `Σ nᵢ = k·N` with
/// `nᵢ ≤ N`.
pub fn solve_dp_multiplicity<P: Production + ?Sized>(
    problem: &AllocationProblem,
    f: &P,
    k: u64,
) -> Result<DpSolution> {
    if k == 0 {
        return Err(Error::invalid("k", "enrollment multiplicity must be at least 1"));
    }
    if problem.ideas() < k {
        return Err(Error::Infeasible(format!(
            "{} ideas capped at N units each cannot absorb {k}·N units",
            problem.ideas()
        )));
    }
    run(problem, f, k, DpOptions::default())
}

fn table_bytes(ideas: u64, pool: u64, c0: u64, k: u64) -> u64 {
    let m = pool / c0;
    let rows = ideas.min(k.saturating_mul(m));
    let cols = k.saturating_mul(m).saturating_add(1);
    rows.saturating_mul(cols).saturating_mul(4)
}

fn suggest_granularity(ideas: u64, pool: u64, c0: u64, k: u64, budget: u64) -> u64 {
    let mut hi = c0.max(1);
    while hi < pool && table_bytes(ideas, pool, hi, k) > budget {
        hi = hi.saturating_mul(2).min(pool);
    }
    let mut lo = c0;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if table_bytes(ideas, pool, mid, k) <= budget {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    hi
}

fn run<P: Production + ?Sized>(problem: &AllocationProblem, f: &P, k: u64, options: DpOptions) -> Result<DpSolution> {
    let c0 = problem.granularity();
    let m = problem.blocks();
    let required = table_bytes(problem.ideas(), problem.pool(), c0, k);
    if required > options.memory_budget || k.saturating_mul(m) >= u32::MAX as u64 {
        return Err(Error::MemoryBudget {
            required,
            budget: options.memory_budget,
            suggested_c0: suggest_granularity(problem.ideas(), problem.pool(), c0, k, options.memory_budget),
        });
    }
    let m = m as usize;
    let total = k as usize * m;
    // At most one positive test per block, so extra ideas only add zeros.
    let rows = (problem.ideas() as usize).min(total.max(1));

    let mut fv = Vec::with_capacity(m + 1);
    fv.push(0.0);
    for j in 1..=m {
        let n = (j as u64 * c0) as f64;
        let v = f.value(n)?;
        if !v.is_finite() {
            return Err(Error::Numerical(format!("production value at n = {n} is {v}")));
        }
        fv.push(v);
    }

    let cols = total + 1;
    let mut choice = vec![0u32; rows * cols];
    let mut prev = vec![f64::NEG_INFINITY; cols];
    prev[0] = 0.0;
    let mut cur = vec![f64::NEG_INFINITY; cols];
    for i in 0..rows {
        let row = &mut choice[i * cols..(i + 1) * cols];
        for b in 0..cols {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for j in 0..=b.min(m) {
                let cand = prev[b - j] + fv[j];
                if cand > best {
                    best = cand;
                    arg = j;
                }
            }
            cur[b] = best;
            row[b] = arg as u32;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let value = prev[total];
    if value == f64::NEG_INFINITY {
        return Err(Error::Infeasible(format!("no allocation of {total} blocks across {rows} ideas")));
    }

    let mut allocation = vec![0u64; problem.ideas() as usize];
    let mut b = total;
    for i in (0..rows).rev() {
        let j = choice[i * cols + b] as usize;
        allocation[i] = j as u64 * c0;
        b -= j;
    }
    debug_assert_eq!(b, 0);
    let tests_run = allocation.iter().filter(|&&n| n > 0).count();
    Ok(DpSolution {
        value,
        allocation,
        tests_run,
        frontier: prev,
        granularity: c0,
    })
}
