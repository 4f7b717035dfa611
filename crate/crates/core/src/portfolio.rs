//! Several experimentation programs, and experimentation over time.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocation::{solve_dp, AllocationProblem};
use crate::error::{Error, Result};
use crate::priors::{NoiseModel, Prior};
use crate::production::{Production, ProductionHandle};

fn default_weight() -> f64 {
    1.0
}

/// One experimentation program: its effect distribution, noise, idea count
/// and (where it has one) its own unit pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProgramSpec {
    pub name: String,
    pub prior: Prior,
    pub sigma: f64,
    pub ideas: u64,
    #[serde(default)]
    pub pool: u64,
    #[serde(default = "default_weight")]
    pub weight: f64,
}

impl ProgramSpec {
    pub fn validate(&self) -> Result<()> {
        NoiseModel::new(self.sigma).map_err(|e| self.wrap(e))?;
        if !(self.weight.is_finite() && self.weight > 0.0) {
            return Err(self.wrap(Error::invalid("weight", format!("must be finite and > 0, got {}", self.weight))));
        }
        Ok(())
    }

    /// Linear-utility, cost-free production function of the program.
    pub fn production(&self) -> Result<ProductionHandle> {
        self.validate()?;
        Ok(ProductionHandle::linear(
            self.prior.clone(),
            NoiseModel::new(self.sigma).map_err(|e| self.wrap(e))?,
        ))
    }

    fn wrap(&self, e: Error) -> Error {
        Error::Program {
            program: self.name.clone(),
            source: Box::new(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SharedAllocation {
    /// Units given to each program.
    pub pools: Vec<u64>,
    /// Unweighted value `F_p(N_p)` of each program.
    pub program_values: Vec<f64>,
    /// `Σ weight_p·F_p(N_p)`.
    pub value: f64,
}

/// Splits a common pool of `N` units between programs, each of which then
/// solves its own allocation problem on the same block grid. Ties go to the
/// smaller share for the later program.
pub fn solve_shared_allocation(programs: &[ProgramSpec], pool: u64, block: u64) -> Result<SharedAllocation> {
    let problem_for = |ideas: u64| AllocationProblem::new(ideas.max(1), pool, block);
    problem_for(1)?;
    let m = (pool / block) as usize;
    let frontiers: Vec<Vec<f64>> = programs
        .par_iter()
        .map(|p| -> Result<Vec<f64>> {
            let f = p.production()?;
            if p.ideas == 0 {
                let mut v = vec![f64::NEG_INFINITY; m + 1];
                v[0] = 0.0;
                return Ok(v);
            }
            Ok(solve_dp(&problem_for(p.ideas)?, &f).map_err(|e| p.wrap(e))?.frontier)
        })
        .collect::<Result<_>>()?;
    let weighted: Vec<Vec<f64>> = programs
        .iter()
        .zip(&frontiers)
        .map(|(p, fr)| fr.iter().map(|v| p.weight * v).collect())
        .collect();
    let (value, blocks) = outer_dp(&weighted, m)?;
    let value = value.ok_or_else(|| Error::Infeasible("no program can absorb the pool".into()))?;
    let program_values = blocks.iter().zip(&frontiers).map(|(&b, fr)| fr[b]).collect();
    Ok(SharedAllocation {
        pools: blocks.iter().map(|&b| b as u64 * block).collect(),
        program_values,
        value,
    })
}

/// `M(a, b) = max_j M(a−1, b−j) + values[a][j]` with the total pinned at
/// `budget`; returns the optimum and the per-program choices.
fn outer_dp(values: &[Vec<f64>], budget: usize) -> Result<(Option<f64>, Vec<usize>)> {
    let p = values.len();
    let mut prev = vec![f64::NEG_INFINITY; budget + 1];
    prev[0] = 0.0;
    let mut choice = vec![vec![0usize; budget + 1]; p];
    for (a, row) in values.iter().enumerate() {
        let mut cur = vec![f64::NEG_INFINITY; budget + 1];
        for b in 0..=budget {
            for j in 0..=b.min(row.len() - 1) {
                let cand = prev[b - j] + row[j];
                if cand > cur[b] {
                    cur[b] = cand;
                    choice[a][b] = j;
                }
            }
        }
        prev = cur;
    }
    let value = prev[budget];
    if value == f64::NEG_INFINITY {
        return Ok((None, vec![0; p]));
    }
    let mut picks = vec![0; p];
    let mut b = budget;
    for a in (0..p).rev() {
        picks[a] = choice[a][b];
        b -= picks[a];
    }
    Ok((Some(value), picks))
}

/// `F(j, N)` for `j = 0..=ideas`: the best value of testing at most `j`
/// ideas with equal splits of `N` units. Ties go to fewer tests.
pub fn metaproduction_curve<P: Production + ?Sized>(ideas: u64, pool: u64, f: &P) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(ideas as usize + 1);
    out.push(0.0);
    let mut best = f64::NEG_INFINITY;
    for i in 1..=ideas {
        if pool / i > 0 || i == 1 {
            best = best.max(i as f64 * f.value((pool / i) as f64)?);
        }
        out.push(best);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SharedIdeas {
    pub ideas: Vec<u64>,
    pub program_values: Vec<f64>,
    pub value: f64,
}

/// Divides a budget of `I` new ideas between programs with fixed pools,
/// maximizing `Σ weight_p·F_p(I_p, N_p)` subject to `Σ I_p ≤ I`.
pub fn solve_shared_ideas(programs: &[ProgramSpec], ideas: u64) -> Result<SharedIdeas> {
    let curves: Vec<Vec<f64>> = programs
        .par_iter()
        .map(|p| -> Result<Vec<f64>> {
            let f = p.production()?;
            metaproduction_curve(ideas, p.pool, &f).map_err(|e| p.wrap(e))
        })
        .collect::<Result<_>>()?;
    let weighted: Vec<Vec<f64>> = programs
        .iter()
        .zip(&curves)
        .map(|(p, c)| c.iter().map(|v| p.weight * v).collect())
        .collect();
    // Slack: solve for every total r ≤ I and keep the smallest best r.
    let budget = ideas as usize;
    let mut best: Option<(f64, Vec<usize>)> = None;
    for r in 0..=budget {
        if let (Some(v), picks) = outer_dp(&weighted, r)? {
            if best.as_ref().is_none_or(|(b, _)| v > *b) {
                best = Some((v, picks));
            }
        }
    }
    let (value, picks) = best.expect("r = 0 is always feasible");
    Ok(SharedIdeas {
        ideas: picks.iter().map(|&j| j as u64).collect(),
        program_values: picks.iter().zip(&curves).map(|(&j, c)| c[j]).collect(),
        value,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Schedule {
    /// Ideas tested in each period.
    pub ideas_per_period: Vec<u64>,
    /// Unweighted `F(I_t, N)` per period.
    pub period_values: Vec<f64>,
    pub weights: Vec<f64>,
    /// `Σ w_t·F(I_t, N)`.
    pub value: f64,
}

/// Spreads `I` ideas over `T` periods of `N` units each, maximizing
/// `Σ w_t·F(I_t, N)` with `Σ I_t ≤ I`.
pub fn solve_sequential(program: &ProgramSpec, pool: u64, ideas: u64, weights: &[f64]) -> Result<Schedule> {
    if pool == 0 {
        return Err(Error::invalid("pool", "at least one unit per period is required"));
    }
    let f = program.production()?;
    let values = metaproduction_curve(ideas, pool, &f).map_err(|e| program.wrap(e))?;
    solve_sequential_table(&values, weights)
}

/// Sequential schedule for a tabulated `F(j)`, `j = 0..=I`. Ties go to
/// fewer ideas in the earlier period.
pub fn solve_sequential_table(values: &[f64], weights: &[f64]) -> Result<Schedule> {
    if weights.is_empty() {
        return Err(Error::invalid("weights", "at least one period is required"));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::invalid("weights", format!("must be finite and > 0, got {w}")));
    }
    if values.first() != Some(&0.0) {
        return Err(Error::invalid("values", "F(0) must be present and equal to 0"));
    }
    let ideas = values.len() - 1;
    let periods = weights.len();
    // next[r] = M(t+1, r)
    let mut next = vec![0.0; ideas + 1];
    let mut choice = vec![vec![0usize; ideas + 1]; periods];
    for t in (0..periods).rev() {
        let mut cur = vec![f64::NEG_INFINITY; ideas + 1];
        for r in 0..=ideas {
            for j in 0..=r {
                let cand = weights[t] * values[j] + next[r - j];
                if cand > cur[r] {
                    cur[r] = cand;
                    choice[t][r] = j;
                }
            }
        }
        next = cur;
    }
    let value = next[ideas];
    let mut r = ideas;
    let mut per = Vec::with_capacity(periods);
    for row in &choice {
        let j = row[r];
        per.push(j as u64);
        r -= j;
    }
    Ok(Schedule {
        period_values: per.iter().map(|&j| values[j as usize]).collect(),
        ideas_per_period: per,
        weights: weights.to_vec(),
        value,
    })
}
