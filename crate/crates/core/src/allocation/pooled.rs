//! Several programs drawing on several unit pools, some of which are
//! excluded per program.
//!
//! Each pool `k` holds `N_k` units that may each join up to `c_k` tests; a
//! single test takes at most `N_k` units from pool `k`. The feasible test
//! sizes form a flow polytope (pools → tests), so with every test started at
//! its concavity threshold the separable objective is concave and greedy
//! block-by-block ascent is exact: each step gives one more block to the
//! reachable test with the largest marginal gain, moving earlier assignments
//! between pools along an augmenting path when needed.

use std::collections::VecDeque;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::production::Production;

pub struct PooledProgram<'a> {
    pub production: &'a dyn Production,
    pub ideas: usize,
    /// Allocation above which `f` is concave; every test starts here.
    pub x_hat: f64,
    /// Indices of pools this program may not draw from.
    pub excluded: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct UnitPool {
    pub size: u64,
    /// How many tests a unit of this pool may join.
    pub enrollment_cap: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RoundedTest {
    pub program: usize,
    pub test: usize,
    pub units: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PooledSolution {
    pub value: f64,
    /// `units[p][i][k]`: units from pool `k` in test `i` of program `p`.
    pub units: Vec<Vec<Vec<u64>>>,
    /// Test sizes, `totals[p][i]`.
    pub totals: Vec<Vec<u64>>,
    /// Tests that ended below their concavity threshold and were dropped.
    pub rounded_down: Vec<RoundedTest>,
}

struct Network {
    /// Per-pool capacity in blocks.
    pool_cap: Vec<u64>,
    /// Per-test, per-pool cap in blocks.
    edge_cap: Vec<u64>,
    pool_used: Vec<u64>,
    /// `flow[t][k]`
    flow: Vec<Vec<u64>>,
    allowed: Vec<Vec<bool>>,
}

#[derive(Clone, Copy)]
enum Via {
    Source,
    Test(usize),
}

impl Network {
    /// Tests whose size can grow by one block, with BFS parents for the
    /// augmenting path. `test_parent[t]` is the pool feeding test `t`.
    fn reachable(&self) -> (Vec<Option<usize>>, Vec<Option<Via>>) {
        let tests = self.flow.len();
        let pools = self.pool_cap.len();
        let mut test_parent = vec![None; tests];
        let mut pool_parent: Vec<Option<Via>> = vec![None; pools];
        let mut queue = VecDeque::new();
        for k in 0..pools {
            if self.pool_used[k] < self.pool_cap[k] {
                pool_parent[k] = Some(Via::Source);
                queue.push_back(k);
            }
        }
        while let Some(k) = queue.pop_front() {
            for t in 0..tests {
                if test_parent[t].is_some() || !self.allowed[t][k] || self.flow[t][k] >= self.edge_cap[k] {
                    continue;
                }
                test_parent[t] = Some(k);
                // Shift some of t's existing units to k, freeing room elsewhere.
                for k2 in 0..pools {
                    if pool_parent[k2].is_none() && self.flow[t][k2] > 0 {
                        pool_parent[k2] = Some(Via::Test(t));
                        queue.push_back(k2);
                    }
                }
            }
        }
        (test_parent, pool_parent)
    }

    fn augment(&mut self, target: usize, test_parent: &[Option<usize>], pool_parent: &[Option<Via>]) {
        let mut t = target;
        let mut k = test_parent[t].expect("target is reachable");
        loop {
            self.flow[t][k] += 1;
            match pool_parent[k].expect("pool on path") {
                Via::Source => {
                    self.pool_used[k] += 1;
                    return;
                }
                Via::Test(prev_t) => {
                    self.flow[prev_t][k] -= 1;
                    t = prev_t;
                    k = test_parent[t].expect("test on path");
                }
            }
        }
    }

    fn total(&self, t: usize) -> u64 {
        self.flow[t].iter().sum()
    }
}

/// Greedy block ascent for the multi-pool allocation problem. Every test of
/// a program with at least one usable pool starts at `⌈x̂_p / block⌉` blocks.
pub fn solve_pooled_concave(programs: &[PooledProgram<'_>], pools: &[UnitPool], block: u64) -> Result<PooledSolution> {
    if block == 0 {
        return Err(Error::invalid("block", "must be at least 1"));
    }
    for (p, prog) in programs.iter().enumerate() {
        if !(prog.x_hat.is_finite() && prog.x_hat >= 0.0) {
            return Err(Error::invalid("x_hat", format!("program {p}: must be finite and ≥ 0, got {}", prog.x_hat)));
        }
        if let Some(&k) = prog.excluded.iter().find(|&&k| k >= pools.len()) {
            return Err(Error::invalid("excluded", format!("program {p}: pool {k} does not exist")));
        }
    }
    let pool_cap: Vec<u64> = pools
        .iter()
        .map(|q| ((q.size as u128 * q.enrollment_cap as u128) / block as u128).min(u64::MAX as u128) as u64)
        .collect();
    let edge_cap: Vec<u64> = pools.iter().map(|q| q.size / block).collect();

    let mut owner = Vec::new();
    let mut allowed = Vec::new();
    for (p, prog) in programs.iter().enumerate() {
        let mask: Vec<bool> = (0..pools.len()).map(|k| !prog.excluded.contains(&k) && edge_cap[k] > 0).collect();
        for i in 0..prog.ideas {
            owner.push((p, i));
            allowed.push(mask.clone());
        }
    }
    let tests = owner.len();
    let mut net = Network {
        pool_cap,
        edge_cap,
        pool_used: vec![0; pools.len()],
        flow: vec![vec![0; pools.len()]; tests],
        allowed,
    };

    let mut cache: Vec<Vec<f64>> = vec![vec![0.0]; programs.len()];
    let mut value_at = |p: usize, b: u64| -> Result<f64> {
        let c = &mut cache[p];
        while c.len() as u64 <= b {
            let n = c.len() as u64 * block;
            let v = programs[p].production.value(n as f64)?;
            if !v.is_finite() {
                return Err(Error::Numerical(format!("program {p}: production value at n = {n} is {v}")));
            }
            c.push(v);
        }
        Ok(c[b as usize])
    };

    for t in 0..tests {
        let (p, i) = owner[t];
        if !net.allowed[t].iter().any(|&a| a) {
            continue;
        }
        let seed = (programs[p].x_hat / block as f64).ceil() as u64;
        for _ in 0..seed {
            let (tp, pp) = net.reachable();
            if tp[t].is_none() {
                let binding: Vec<String> = (0..pools.len())
                    .filter(|&k| net.allowed[t][k])
                    .map(|k| format!("pool {k} ({}/{} blocks used)", net.pool_used[k], net.pool_cap[k]))
                    .collect();
                return Err(Error::Infeasible(format!(
                    "cannot start test {i} of program {p} at {seed} blocks; binding pools: {}",
                    binding.join(", ")
                )));
            }
            net.augment(t, &tp, &pp);
        }
    }

    let mut sizes: Vec<u64> = (0..tests).map(|t| net.total(t)).collect();
    loop {
        let (tp, pp) = net.reachable();
        let mut best: Option<(f64, usize)> = None;
        for t in 0..tests {
            if tp[t].is_none() {
                continue;
            }
            let p = owner[t].0;
            let gain = value_at(p, sizes[t] + 1)? - value_at(p, sizes[t])?;
            if gain > 0.0 && best.is_none_or(|(g, _)| gain > g) {
                best = Some((gain, t));
            }
        }
        let Some((_, t)) = best else { break };
        net.augment(t, &tp, &pp);
        sizes[t] += 1;
    }

    let mut rounded_down = Vec::new();
    for t in 0..tests {
        let (p, i) = owner[t];
        let units = sizes[t] * block;
        if units > 0 && (units as f64) < programs[p].x_hat {
            rounded_down.push(RoundedTest { program: p, test: i, units });
            for k in 0..pools.len() {
                net.pool_used[k] -= net.flow[t][k];
                net.flow[t][k] = 0;
            }
            sizes[t] = 0;
        }
    }

    let mut units: Vec<Vec<Vec<u64>>> = programs.iter().map(|prog| Vec::with_capacity(prog.ideas)).collect();
    let mut totals: Vec<Vec<u64>> = programs.iter().map(|prog| Vec::with_capacity(prog.ideas)).collect();
    let mut value = 0.0;
    for t in 0..tests {
        let p = owner[t].0;
        value += value_at(p, sizes[t])?;
        units[p].push(net.flow[t].iter().map(|&b| b * block).collect());
        totals[p].push(sizes[t] * block);
    }
    Ok(PooledSolution {
        value,
        units,
        totals,
        rounded_down,
    })
}
