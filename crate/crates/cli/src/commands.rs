//! The ten planning subcommands.

use std::path::Path;

use leanexp::allocation::DEFAULT_MEMORY_BUDGET;
use leanexp::{
    exclusive_curve_mc, exclusive_value_approx, exclusive_value_quadrature, find_x_star, fit_gaussian_mle,
    implied_b_for_alpha, implied_cost_for_alpha, metaproduction_closed, metaproduction_curve, metaproduction_direct,
    minimax_constant, minimax_risk, optimal_threshold_generic, optimize_i0, production_monte_carlo,
    production_pvalue_rule, production_under_rule, solve_dp_multiplicity, solve_dp_with, solve_pooled_concave,
    solve_sequential, solve_shared_allocation, solve_shared_ideas, AllocationProblem, DecisionRule, DpOptions,
    ExclusiveMethod, ExclusiveResult, FitWarning, NoiseModel, PooledProgram, Prior, Production, ProductionAnalysis,
    ProgramSpec, Regime, Saturation, UnitPool,
};
use serde::{Deserialize, Serialize};

use crate::output::{Cell, Output, Table};
use crate::spec::{self, field, gaussian, handle, noise, Loaded};
use crate::CliError;

pub type Ran = (Output, String, Option<u64>);

pub fn run(name: &str, path: &Path, seed: Option<u64>) -> Result<Ran, CliError> {
    match name {
        "fit-prior" => with(path, seed, fit_prior),
        "production-curve" => with(path, seed, production_curve),
        "allocate" => with(path, seed, allocate),
        "thresholds" => with(path, seed, thresholds),
        "cost-analysis" => with(path, seed, cost_analysis),
        "multi-program" => with(path, seed, multi_program),
        "share-ideas" => with(path, seed, share_ideas),
        "sequential" => with(path, seed, sequential),
        "exclusive" => with(path, seed, exclusive),
        "minimax" => with(path, seed, minimax),
        other => unreachable!("unknown subcommand {other}"),
    }
}

/// Loads the spec, then runs `body` with the effective seed.
pub fn with<T, F>(path: &Path, seed: Option<u64>, body: F) -> Result<Ran, CliError>
where
    T: serde::de::DeserializeOwned,
    F: FnOnce(&Loaded<T>, u64) -> Result<Output, CliError>,
{
    let loaded = spec::load::<T>(path)?;
    let effective = seed.or(loaded.seed).unwrap_or(0);
    let out = body(&loaded, effective)?;
    Ok((out, loaded.sha256.clone(), loaded.seed))
}

/// Decorrelates per-point seeds derived from one run seed.
pub fn point_seed(seed: u64, k: u64) -> u64 {
    let mut z = seed ^ k.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// `f` under the p-value rule, linear utility, no costs.
pub struct PValueProduction {
    pub prior: Prior,
    pub noise: NoiseModel,
    pub z: f64,
}

impl Production for PValueProduction {
    fn value(&self, n: f64) -> leanexp::Result<f64> {
        if n == 0.0 {
            return Ok(0.0);
        }
        production_pvalue_rule(&self.prior, self.noise, n, self.z)
    }
}

// fit-prior

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitPriorReport {
    pub records: usize,
    pub mu: f64,
    pub tau: f64,
    pub tau2: f64,
    pub log_likelihood: f64,
    pub se_mu: f64,
    pub se_tau2: f64,
    /// Null when `τ̂ = 0`.
    pub se_tau: Option<f64>,
    pub warnings: Vec<FitWarning>,
}

fn fit_prior(l: &Loaded<spec::FitPriorSpec>, _seed: u64) -> Result<Output, CliError> {
    let s = &l.spec;
    let nm = noise(s.sigma)?;
    let records = match (&s.records, &s.records_path) {
        (Some(r), None) => r.clone(),
        (None, Some(p)) => {
            let full = l.dir.join(p);
            let file = std::fs::File::open(&full)
                .map_err(|e| CliError::Spec(format!("`records_path`: cannot open {}: {e}", full.display())))?;
            let is_json = full.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
            let parsed = if is_json {
                leanexp::io::read_records_json(file)
            } else {
                leanexp::io::read_records_csv(file)
            };
            parsed.map_err(|e| CliError::Spec(format!("`records_path`: {e}")))?
        }
        _ => return Err(CliError::Spec("give exactly one of `records` and `records_path`".into())),
    };
    let fit = fit_gaussian_mle(&records, nm).map_err(|e| field("records", e))?;
    let report = FitPriorReport {
        records: records.len(),
        mu: fit.mu,
        tau: fit.tau(),
        tau2: fit.tau2,
        log_likelihood: fit.log_likelihood,
        se_mu: fit.se_mu,
        se_tau2: fit.se_tau2,
        se_tau: finite(fit.se_tau),
        warnings: fit.warnings.clone(),
    };
    let mut t = Table::new("fit_prior", &["parameter", "estimate", "stderr"]);
    t.push(vec!["mu".into(), fit.mu.into(), fit.se_mu.into()]);
    t.push(vec!["tau2".into(), fit.tau2.into(), fit.se_tau2.into()]);
    t.push(vec!["tau".into(), fit.tau().into(), fit.se_tau.into()]);
    Ok(Output::new(&report, vec![t]))
}

// production-curve

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisReport {
    pub x_hat: f64,
    pub x_star: f64,
    pub f_at_x_star: f64,
    pub ratio_at_x_star: f64,
    pub x_star_tolerance: f64,
    pub x_hat_tolerance: f64,
    pub x_star_at_boundary: bool,
}

impl From<ProductionAnalysis> for AnalysisReport {
    fn from(a: ProductionAnalysis) -> Self {
        Self {
            x_hat: a.x_hat,
            x_star: a.x_star,
            f_at_x_star: a.f_at_x_star,
            ratio_at_x_star: a.ratio_at_x_star,
            x_star_tolerance: a.x_star_tolerance,
            x_hat_tolerance: a.x_hat_tolerance,
            x_star_at_boundary: a.x_star_at_boundary,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvePoint {
    pub n: u64,
    pub f_optimal: f64,
    pub f_pvalue: f64,
    pub f_minimax: f64,
    pub saturation: Option<Saturation>,
    pub f_mc: Option<f64>,
    pub f_mc_stderr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductionCurveReport {
    pub pvalue_z: f64,
    pub points: Vec<CurvePoint>,
    pub analysis: Option<AnalysisReport>,
    /// Why `analysis` is missing.
    pub analysis_error: Option<String>,
}

fn saturation_cell(s: Option<Saturation>) -> Cell {
    match s {
        None => Cell::Text(String::new()),
        Some(Saturation::NeverShip) => "never_ship".into(),
        Some(Saturation::AlwaysShip) => "always_ship".into(),
    }
}

fn production_curve(l: &Loaded<spec::ProductionCurveSpec>, seed: u64) -> Result<Output, CliError> {
    let s = &l.spec;
    let h = handle(&s.prior, s.sigma, s.utility, s.cost)?;
    let grid = s.n_grid.integers("n_grid", 1)?;
    if !s.pvalue_z.is_finite() {
        return Err(CliError::Spec(format!("`pvalue_z` must be finite, got {}", s.pvalue_z)));
    }
    let mut points = Vec::with_capacity(grid.len());
    for (k, &n) in grid.iter().enumerate() {
        let x = n as f64;
        let opt = h.evaluate(x)?;
        let pv = production_under_rule(&h, x, DecisionRule::PValue { z: s.pvalue_z })?;
        let mm = production_under_rule(&h, x, DecisionRule::Minimax)?;
        let (f_mc, f_mc_stderr) = if s.monte_carlo_samples > 0 {
            let est = production_monte_carlo(&h, x, DecisionRule::Optimal, s.monte_carlo_samples, point_seed(seed, k as u64))
                .map_err(|e| field("monte_carlo_samples", e))?;
            (Some(est.estimate), Some(est.stderr))
        } else {
            (None, None)
        };
        points.push(CurvePoint {
            n,
            f_optimal: opt.value,
            f_pvalue: pv,
            f_minimax: mm,
            saturation: opt.saturation,
            f_mc,
            f_mc_stderr,
        });
    }
    let (analysis, analysis_error) = match find_x_star(&h, s.x_star_bracket) {
        Ok(a) => (Some(a.into()), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let mut t = Table::new(
        "production_curve",
        &["n", "f_optimal", "f_pvalue", "f_minimax", "saturation", "f_mc", "f_mc_stderr"],
    );
    for p in &points {
        t.push(vec![
            p.n.into(),
            p.f_optimal.into(),
            p.f_pvalue.into(),
            p.f_minimax.into(),
            saturation_cell(p.saturation),
            p.f_mc.into(),
            p.f_mc_stderr.into(),
        ]);
    }
    let report = ProductionCurveReport {
        pvalue_z: s.pvalue_z,
        points,
        analysis,
        analysis_error,
    };
    Ok(Output::new(&report, vec![t]))
}

// allocate

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Run {
    pub units: u64,
    pub count: u64,
}

pub fn run_length(alloc: &[u64]) -> Vec<Run> {
    let mut out: Vec<Run> = Vec::new();
    for &u in alloc {
        match out.last_mut() {
            Some(r) if r.units == u => r.count += 1,
            _ => out.push(Run { units: u, count: 1 }),
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EqualSplit {
    pub value: f64,
    pub tests: u64,
    pub units_per_test: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClosedForm {
    pub value: f64,
    pub i_star: f64,
    pub regime: Regime,
    pub x_star: f64,
    pub x_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocateReport {
    pub value: f64,
    /// Units per idea in idea order, run-length encoded.
    pub allocation: Vec<Run>,
    pub tests_run: usize,
    pub granularity: u64,
    pub multiplicity: u64,
    /// Best equal split of the pool over `i ≤ I` tests (single enrollment only).
    pub equal_split: Option<EqualSplit>,
    pub closed_form: Option<ClosedForm>,
    pub closed_form_error: Option<String>,
}

fn allocate(l: &Loaded<spec::AllocateSpec>, _seed: u64) -> Result<Output, CliError> {
    let s = &l.spec;
    let h = handle(&s.prior, s.sigma, s.utility, s.costs)?;
    let problem = AllocationProblem::new(s.ideas, s.pool, s.granularity).map_err(|e| field("I/N/c0", e))?;
    let sol = if s.multiplicity == 1 {
        let options = DpOptions {
            memory_budget: s.memory_budget_bytes.unwrap_or(DEFAULT_MEMORY_BUDGET),
        };
        solve_dp_with(&problem, &h, options).map_err(|e| field("c0", e))?
    } else {
        solve_dp_multiplicity(&problem, &h, s.multiplicity).map_err(|e| field("k", e))?
    };
    let (equal_split, closed_form, closed_form_error) = if s.multiplicity == 1 {
        let (value, tests) = metaproduction_direct(s.ideas, s.pool, &h)?;
        let eq = EqualSplit {
            value,
            tests,
            units_per_test: s.pool / tests.max(1),
        };
        let closed = find_x_star(&h, s.x_star_bracket).and_then(|a| {
            metaproduction_closed(s.ideas as f64, s.pool as f64, &a, &h).map(|m| ClosedForm {
                value: m.value,
                i_star: m.i_star,
                regime: m.regime,
                x_star: a.x_star,
                x_hat: a.x_hat,
            })
        });
        match closed {
            Ok(c) => (Some(eq), Some(c), None),
            Err(e) => (Some(eq), None, Some(e.to_string())),
        }
    } else {
        (None, None, None)
    };
    let mut tables = Vec::new();
    let mut t = Table::new("allocation", &["idea", "units"]);
    for (i, &u) in sol.allocation.iter().enumerate() {
        t.push(vec![i.into(), u.into()]);
    }
    tables.push(t);
    if s.frontier_csv {
        let mut t = Table::new("frontier", &["units", "value"]);
        for (b, &v) in sol.frontier.iter().enumerate() {
            t.push(vec![(b as u64 * sol.granularity).into(), v.into()]);
        }
        tables.push(t);
    }
    let report = AllocateReport {
        value: sol.value,
        allocation: run_length(&sol.allocation),
        tests_run: sol.tests_run,
        granularity: sol.granularity,
        multiplicity: s.multiplicity,
        equal_split,
        closed_form,
        closed_form_error,
    };
    Ok(Output::new(&report, tables))
}

// thresholds

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdRow {
    pub n: u64,
    /// Null when saturated.
    pub cutoff: Option<f64>,
    pub t_stat: Option<f64>,
    pub alpha: f64,
    pub pass_prob: f64,
    pub saturation: Option<Saturation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdsReport {
    pub rows: Vec<ThresholdRow>,
}

pub fn threshold_rows(
    prior: &Prior,
    nm: NoiseModel,
    utility: &leanexp::Utility,
    cost: f64,
    grid: &[u64],
) -> Result<Vec<ThresholdRow>, CliError> {
    grid.iter()
        .map(|&n| {
            let x = n as f64;
            let t = optimal_threshold_generic(prior, nm, x, utility, cost)?;
            Ok(ThresholdRow {
                n,
                cutoff: finite(t.cutoff_delta_hat),
                t_stat: finite(t.t_statistic),
                alpha: t.one_sided_alpha,
                pass_prob: prior.marginal_tail(nm, x, t.cutoff_delta_hat),
                saturation: t.saturation,
            })
        })
        .collect()
}

fn thresholds(l: &Loaded<spec::ThresholdsSpec>, _seed: u64) -> Result<Output, CliError> {
    let s = &l.spec;
    let nm = noise(s.sigma)?;
    let utility = s.utility.build()?;
    let cost = s.cost.build()?;
    let grid = s.n_grid.integers("n_grid", 1)?;
    let rows = threshold_rows(&s.prior, nm, &utility, cost.implementation(), &grid)?;
    let mut t = Table::new("thresholds", &["n", "cutoff", "t_stat", "alpha", "pass_prob", "saturation"]);
    for r in &rows {
        t.push(vec![
            r.n.into(),
            r.cutoff.into(),
            r.t_stat.into(),
            r.alpha.into(),
            r.pass_prob.into(),
            saturation_cell(r.saturation),
        ]);
    }
    Ok(Output::new(&ThresholdsReport { rows }, vec![t]))
}

// cost-analysis

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostRow {
    pub n: u64,
    pub target_alpha: f64,
    pub implied_cost: f64,
    /// Null when no loss aversion in `[0, 10⁶]` reaches the level.
    pub implied_b: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostAnalysisReport {
    pub prior_mean: f64,
    pub rows: Vec<CostRow>,
}

fn cost_analysis(l: &Loaded<spec::CostAnalysisSpec>, _seed: u64) -> Result<Output, CliError> {
    let s = &l.spec;
    let g = gaussian(&s.prior, "cost-analysis")?;
    let nm = noise(s.sigma)?;
    let grid = s.n_grid.integers("n_grid", 1)?;
    if s.target_alpha.is_empty() {
        return Err(CliError::Spec("`target_alpha` must list at least one level".into()));
    }
    let mut rows = Vec::new();
    for &n in &grid {
        for &a in &s.target_alpha {
            let implied_cost = implied_cost_for_alpha(&g, nm, n as f64, a).map_err(|e| field("target_alpha", e))?;
            let (implied_b, note) = match implied_b_for_alpha(&g, nm, n as f64, a) {
                Ok(b) => (Some(b), None),
                Err(e @ leanexp::Error::Unattainable { .. }) => (None, Some(e.to_string())),
                Err(e) => return Err(field("target_alpha", e)),
            };
            rows.push(CostRow {
                n,
                target_alpha: a,
                implied_cost,
                implied_b,
                note,
            });
        }
    }
    let mut t = Table::new("cost_analysis", &["n", "target_alpha", "implied_cost", "implied_b"]);
    for r in &rows {
        t.push(vec![r.n.into(), r.target_alpha.into(), r.implied_cost.into(), r.implied_b.into()]);
    }
    let report = CostAnalysisReport {
        prior_mean: g.mu(),
        rows,
    };
    Ok(Output::new(&report, vec![t]))
}

// multi-program

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProgramRow {
    pub program: String,
    pub units: u64,
    pub value: f64,
    pub weight: f64,
    pub weighted_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PooledTest {
    pub program: String,
    pub test: usize,
    /// Units drawn from each pool, in pool order.
    pub units: Vec<u64>,
    pub total: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum MultiProgramReport {
    SharedPool {
        pool: u64,
        block: u64,
        value: f64,
        programs: Vec<ProgramRow>,
    },
    UnitPools {
        block: u64,
        value: f64,
        tests: Vec<PooledTest>,
    },
}

fn validate_programs(programs: &[ProgramSpec]) -> Result<(), CliError> {
    if programs.is_empty() {
        return Err(CliError::Spec("`programs` must list at least one program".into()));
    }
    for (i, p) in programs.iter().enumerate() {
        if programs[..i].iter().any(|q| q.name == p.name) {
            return Err(CliError::Spec(format!("`programs`: duplicate name `{}`", p.name)));
        }
        p.validate().map_err(|e| field("programs", e))?;
    }
    Ok(())
}

fn multi_program(l: &Loaded<spec::MultiProgramSpec>, _seed: u64) -> Result<Output, CliError> {
    let s = &l.spec;
    validate_programs(&s.programs)?;
    if let Some(name) = s.excluded_pools.keys().find(|k| !s.programs.iter().any(|p| &p.name == *k)) {
        return Err(CliError::Spec(format!("`excluded_pools`: no program named `{name}`")));
    }
    match (&s.unit_pools, s.pool) {
        (Some(pools), None) => {
            let handles = s
                .programs
                .iter()
                .map(|p| p.production())
                .collect::<leanexp::Result<Vec<_>>>()
                .map_err(|e| field("programs", e))?;
            let mut progs = Vec::with_capacity(handles.len());
            for (p, h) in s.programs.iter().zip(&handles) {
                let a = find_x_star(h, s.x_star_bracket)?;
                progs.push(PooledProgram {
                    production: h,
                    ideas: p.ideas as usize,
                    x_hat: a.x_hat,
                    excluded: s.excluded_pools.get(&p.name).cloned().unwrap_or_default(),
                });
            }
            let pools: Vec<UnitPool> = pools
                .iter()
                .map(|p| UnitPool {
                    size: p.size,
                    enrollment_cap: p.enrollment_cap,
                })
                .collect();
            let sol = solve_pooled_concave(&progs, &pools, s.block).map_err(|e| field("unit_pools", e))?;
            let mut tests = Vec::new();
            let mut t = Table::new("multi_program_tests", &["program", "test", "pool", "units"]);
            for (p, prog) in s.programs.iter().enumerate() {
                for (i, per_pool) in sol.units[p].iter().enumerate() {
                    for (k, &u) in per_pool.iter().enumerate() {
                        t.push(vec![prog.name.as_str().into(), i.into(), k.into(), u.into()]);
                    }
                    tests.push(PooledTest {
                        program: prog.name.clone(),
                        test: i,
                        units: per_pool.clone(),
                        total: sol.totals[p][i],
                    });
                }
            }
            let report = MultiProgramReport::UnitPools {
                block: s.block,
                value: sol.value,
                tests,
            };
            Ok(Output::new(&report, vec![t]))
        }
        (None, Some(pool)) => {
            if !s.excluded_pools.is_empty() {
                return Err(CliError::Spec("`excluded_pools` needs `unit_pools`".into()));
            }
            let sol = solve_shared_allocation(&s.programs, pool, s.block).map_err(|e| field("programs", e))?;
            let programs: Vec<ProgramRow> = s
                .programs
                .iter()
                .enumerate()
                .map(|(i, p)| ProgramRow {
                    program: p.name.clone(),
                    units: sol.pools[i],
                    value: sol.program_values[i],
                    weight: p.weight,
                    weighted_value: p.weight * sol.program_values[i],
                })
                .collect();
            let mut tables = vec![program_table("multi_program", &programs)];
            let mut surface = Table::new("multi_program_curves", &["program", "units", "value"]);
            for p in &s.programs {
                let h = p.production().map_err(|e| field("programs", e))?;
                let ideas = p.ideas.max(1);
                for b in 0..=pool / s.block {
                    let units = b * s.block;
                    let v = if units == 0 {
                        0.0
                    } else {
                        metaproduction_direct(ideas, units, &h)?.0
                    };
                    surface.push(vec![p.name.as_str().into(), units.into(), v.into()]);
                }
            }
            tables.push(surface);
            let report = MultiProgramReport::SharedPool {
                pool,
                block: s.block,
                value: sol.value,
                programs,
            };
            Ok(Output::new(&report, tables))
        }
        _ => Err(CliError::Spec("give exactly one of `pool` and `unit_pools`".into())),
    }
}

fn program_table(name: &str, rows: &[ProgramRow]) -> Table {
    let mut t = Table::new(name, &["program", "units", "value", "weight", "weighted_value"]);
    for r in rows {
        t.push(vec![
            r.program.as_str().into(),
            r.units.into(),
            r.value.into(),
            r.weight.into(),
            r.weighted_value.into(),
        ]);
    }
    t
}

// share-ideas

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdeaShareRow {
    pub program: String,
    pub ideas: u64,
    pub value: f64,
    pub weight: f64,
    pub weighted_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShareIdeasReport {
    pub ideas: u64,
    pub value: f64,
    pub programs: Vec<IdeaShareRow>,
}

fn share_ideas(l: &Loaded<spec::ShareIdeasSpec>, _seed: u64) -> Result<Output, CliError> {
    let s = &l.spec;
    validate_programs(&s.programs)?;
    let sol = solve_shared_ideas(&s.programs, s.ideas).map_err(|e| field("programs", e))?;
    let programs: Vec<IdeaShareRow> = s
        .programs
        .iter()
        .enumerate()
        .map(|(i, p)| IdeaShareRow {
            program: p.name.clone(),
            ideas: sol.ideas[i],
            value: sol.program_values[i],
            weight: p.weight,
            weighted_value: p.weight * sol.program_values[i],
        })
        .collect();
    let mut t = Table::new("share_ideas", &["program", "ideas", "value", "weight", "weighted_value"]);
    for r in &programs {
        t.push(vec![
            r.program.as_str().into(),
            r.ideas.into(),
            r.value.into(),
            r.weight.into(),
            r.weighted_value.into(),
        ]);
    }
    let mut surface = Table::new("share_ideas_curves", &["program", "ideas", "value"]);
    for p in &s.programs {
        let h = p.production().map_err(|e| field("programs", e))?;
        for (j, v) in metaproduction_curve(s.ideas, p.pool, &h)?.into_iter().enumerate() {
            surface.push(vec![p.name.as_str().into(), j.into(), v.into()]);
        }
    }
    let report = ShareIdeasReport {
        ideas: s.ideas,
        value: sol.value,
        programs,
    };
    Ok(Output::new(&report, vec![t, surface]))
}

// sequential

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodRow {
    pub period: usize,
    pub weight: f64,
    pub ideas: u64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequentialReport {
    pub value: f64,
    pub periods: Vec<PeriodRow>,
}

pub fn single_program(prior: &Prior, sigma: f64, ideas: u64, pool: u64) -> ProgramSpec {
    ProgramSpec {
        name: "program".into(),
        prior: prior.clone(),
        sigma,
        ideas,
        pool,
        weight: 1.0,
    }
}

fn sequential(l: &Loaded<spec::SequentialSpec>, _seed: u64) -> Result<Output, CliError> {
    let s = &l.spec;
    noise(s.sigma)?;
    let program = single_program(&s.prior, s.sigma, s.ideas, s.pool);
    let sched = solve_sequential(&program, s.pool, s.ideas, &s.weights).map_err(|e| field("weights/pool", e))?;
    let periods: Vec<PeriodRow> = (0..sched.weights.len())
        .map(|t| PeriodRow {
            period: t + 1,
            weight: sched.weights[t],
            ideas: sched.ideas_per_period[t],
            value: sched.period_values[t],
        })
        .collect();
    let mut t = Table::new("sequential", &["period", "weight", "ideas", "value"]);
    for r in &periods {
        t.push(vec![r.period.into(), r.weight.into(), r.ideas.into(), r.value.into()]);
    }
    let h = program.production().map_err(|e| field("prior", e))?;
    let mut curve = Table::new("sequential_curve", &["ideas", "value"]);
    for (j, v) in metaproduction_curve(s.ideas, s.pool, &h)?.into_iter().enumerate() {
        curve.push(vec![j.into(), v.into()]);
    }
    let report = SequentialReport {
        value: sched.value,
        periods,
    };
    Ok(Output::new(&report, vec![t, curve]))
}

// exclusive

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExclusiveRow {
    pub i0: u64,
    pub value: f64,
    pub stderr: f64,
    pub method: ExclusiveMethod,
    pub fluctuation: Option<f64>,
    pub validity_flag: Option<bool>,
}

impl From<ExclusiveResult> for ExclusiveRow {
    fn from(r: ExclusiveResult) -> Self {
        Self {
            i0: r.i0,
            value: r.value,
            stderr: r.stderr,
            method: r.method,
            fluctuation: r.fluctuation,
            validity_flag: r.approximation_valid,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExclusiveReport {
    pub best: ExclusiveRow,
    pub curve: Vec<ExclusiveRow>,
}

pub fn method_name(m: ExclusiveMethod) -> &'static str {
    match m {
        ExclusiveMethod::MonteCarlo => "monte_carlo",
        ExclusiveMethod::Approx => "approx",
        ExclusiveMethod::ApproxShrinkage => "approx_shrinkage",
        ExclusiveMethod::Quadrature => "quadrature",
    }
}

pub fn exclusive_points(
    prior: &leanexp::GaussianPrior,
    nm: NoiseModel,
    pool: u64,
    grid: &[u64],
    method: ExclusiveMethod,
    samples: usize,
    seed: u64,
) -> leanexp::Result<Vec<ExclusiveResult>> {
    match method {
        ExclusiveMethod::MonteCarlo => exclusive_curve_mc(prior, nm, pool, grid, samples, seed),
        ExclusiveMethod::Quadrature => grid.iter().map(|&i| exclusive_value_quadrature(prior, nm, pool, i)).collect(),
        ExclusiveMethod::Approx | ExclusiveMethod::ApproxShrinkage => grid
            .iter()
            .map(|&i| exclusive_value_approx(prior, nm, pool, i, method == ExclusiveMethod::ApproxShrinkage))
            .collect(),
    }
}

fn exclusive(l: &Loaded<spec::ExclusiveSpec>, seed: u64) -> Result<Output, CliError> {
    let s = &l.spec;
    let g = gaussian(&s.prior, "exclusive")?;
    let nm = noise(s.sigma)?;
    let (best, curve) = match &s.i0 {
        None => {
            let scan = optimize_i0(&g, nm, s.pool, s.ideas, s.method, s.samples, seed).map_err(|e| field("ideas/pool", e))?;
            (scan.best, scan.curve)
        }
        Some(list) => {
            let mut grid = list.clone();
            grid.sort_unstable();
            grid.dedup();
            if grid.is_empty() {
                return Err(CliError::Spec("`i0` must list at least one value".into()));
            }
            if let Some(&i) = grid.iter().find(|&&i| i > s.ideas) {
                return Err(CliError::Spec(format!("`i0`: {i} exceeds `ideas` = {}", s.ideas)));
            }
            let curve = exclusive_points(&g, nm, s.pool, &grid, s.method, s.samples, seed).map_err(|e| field("i0", e))?;
            let mut best = curve[0];
            for r in &curve[1..] {
                if r.value > best.value {
                    best = *r;
                }
            }
            (best, curve)
        }
    };
    let mut t = Table::new(
        "exclusive",
        &["I0", "value", "stderr", "method", "validity_flag", "fluctuation"],
    );
    for r in &curve {
        t.push(vec![
            r.i0.into(),
            r.value.into(),
            r.stderr.into(),
            method_name(r.method).into(),
            r.approximation_valid.into(),
            r.fluctuation.into(),
        ]);
    }
    let report = ExclusiveReport {
        best: best.into(),
        curve: curve.into_iter().map(Into::into).collect(),
    };
    Ok(Output::new(&report, vec![t]))
}

// minimax

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskRow {
    pub allocation: Vec<u64>,
    pub risk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinimaxReport {
    pub constant: f64,
    pub nu_star: f64,
    pub risks: Vec<RiskRow>,
    pub equal_split: Option<RiskRow>,
}

fn minimax(l: &Loaded<spec::MinimaxSpec>, _seed: u64) -> Result<Output, CliError> {
    let s = &l.spec;
    let nm = noise(s.sigma)?;
    let (constant, nu_star) = minimax_constant();
    let mut risks = Vec::new();
    for (i, a) in s.allocations.iter().enumerate() {
        let risk = minimax_risk(a, nm).map_err(|e| field(&format!("allocations[{i}]"), e))?;
        risks.push(RiskRow {
            allocation: a.clone(),
            risk,
        });
    }
    let equal_split = match (s.pool, s.ideas) {
        (Some(pool), Some(ideas)) => {
            if ideas == 0 || pool < ideas {
                return Err(CliError::Spec(format!("need 1 ≤ `ideas` ≤ `pool`, got ideas={ideas}, pool={pool}")));
            }
            let a = vec![pool / ideas; ideas as usize];
            let risk = minimax_risk(&a, nm)?;
            Some(RiskRow { allocation: a, risk })
        }
        (None, None) => None,
        _ => return Err(CliError::Spec("`pool` and `ideas` go together".into())),
    };
    let mut t = Table::new("minimax", &["label", "tests", "total_units", "risk"]);
    t.push(vec!["constant".into(), Cell::Missing, Cell::Missing, constant.into()]);
    for (i, r) in risks.iter().enumerate() {
        t.push(vec![
            format!("allocation_{i}").into(),
            r.allocation.len().into(),
            r.allocation.iter().sum::<u64>().into(),
            r.risk.into(),
        ]);
    }
    if let Some(r) = &equal_split {
        t.push(vec![
            "equal_split".into(),
            r.allocation.len().into(),
            r.allocation.iter().sum::<u64>().into(),
            r.risk.into(),
        ]);
    }
    let report = MinimaxReport {
        constant,
        nu_star,
        risks,
        equal_split,
    };
    Ok(Output::new(&report, vec![t]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn round_trip<T: Serialize + serde::de::DeserializeOwned + PartialEq + std::fmt::Debug>(v: &T) {
        let text = serde_json::to_string(v).unwrap();
        let back: T = serde_json::from_str(&text).unwrap();
        assert_eq!(&back, v);
    }

    #[test]
    fn reports_round_trip() {
        round_trip(&AllocateReport {
            value: 0.25,
            allocation: run_length(&[4, 4, 4, 0]),
            tests_run: 3,
            granularity: 1,
            multiplicity: 1,
            equal_split: Some(EqualSplit {
                value: 0.25,
                tests: 3,
                units_per_test: 4,
            }),
            closed_form: Some(ClosedForm {
                value: 0.3,
                i_star: 2.5,
                regime: Regime::Interior,
                x_star: 4.8,
                x_hat: 2.0,
            }),
            closed_form_error: None,
        });
        round_trip(&ThresholdsReport {
            rows: vec![ThresholdRow {
                n: 10,
                cutoff: None,
                t_stat: None,
                alpha: 0.0,
                pass_prob: 0.0,
                saturation: Some(Saturation::NeverShip),
            }],
        });
        round_trip(&MultiProgramReport::UnitPools {
            block: 2,
            value: 1.0,
            tests: vec![PooledTest {
                program: "a".into(),
                test: 0,
                units: vec![2, 0],
                total: 2,
            }],
        });
        round_trip(&ExclusiveReport {
            best: ExclusiveRow {
                i0: 3,
                value: 0.1,
                stderr: 0.0,
                method: ExclusiveMethod::Approx,
                fluctuation: Some(0.2),
                validity_flag: Some(false),
            },
            curve: vec![],
        });
        round_trip(&FitPriorReport {
            records: 2,
            mu: -0.1,
            tau: 0.0,
            tau2: 0.0,
            log_likelihood: -3.0,
            se_mu: 0.1,
            se_tau2: 0.2,
            se_tau: None,
            warnings: vec![FitWarning::DegenerateDispersion],
        });
    }

    #[test]
    fn run_length_groups_neighbours() {
        assert_eq!(
            run_length(&[3, 3, 2, 3]),
            vec![
                Run { units: 3, count: 2 },
                Run { units: 2, count: 1 },
                Run { units: 3, count: 1 }
            ]
        );
        assert!(run_length(&[]).is_empty());
    }

    #[test]
    fn point_seeds_differ() {
        let s: std::collections::BTreeSet<u64> = (0..1000).map(|k| point_seed(7, k)).collect();
        assert_eq!(s.len(), 1000);
        assert_ne!(point_seed(0, 1), point_seed(1, 0));
    }
}
