//! Plot-ready CSV bundles, one family per figure type.

use std::path::Path;

use leanexp::normal;
use leanexp::{
    find_x_star, metaproduction_closed, metaproduction_curve, metaproduction_direct,
    optimal_threshold_gaussian_linear, optimal_threshold_generic, solve_sequential_table, ExclusiveMethod,
    GaussianPrior, Prior, ProgramSpec, Regime, Utility,
};
use serde::{Deserialize, Serialize};

use crate::commands::{exclusive_points, method_name, point_seed, threshold_rows, with, PValueProduction, Ran};
use crate::output::{Output, Table};
use crate::spec::{
    default_bracket, default_method, default_samples, default_z, field, gaussian, handle, noise, CostSpec, GridSpec,
    Loaded, UtilitySpec,
};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Family {
    #[value(name = "prior-densities")]
    PriorDensities,
    #[value(name = "test-passing")]
    TestPassing,
    #[value(name = "value-of-testing")]
    ValueOfTesting,
    #[value(name = "p005-priors")]
    P005Priors,
    #[value(name = "p005-comparison")]
    P005Comparison,
    #[value(name = "metaproduction-heatmap")]
    MetaproductionHeatmap,
    #[value(name = "cost-thresholds")]
    CostThresholds,
    #[value(name = "program-curves")]
    ProgramCurves,
    #[value(name = "exclusive-curve")]
    ExclusiveCurve,
    #[value(name = "sequential-heatmap")]
    SequentialHeatmap,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::PriorDensities => "prior-densities",
            Family::TestPassing => "test-passing",
            Family::ValueOfTesting => "value-of-testing",
            Family::P005Priors => "p005-priors",
            Family::P005Comparison => "p005-comparison",
            Family::MetaproductionHeatmap => "metaproduction-heatmap",
            Family::CostThresholds => "cost-thresholds",
            Family::ProgramCurves => "program-curves",
            Family::ExclusiveCurve => "exclusive-curve",
            Family::SequentialHeatmap => "sequential-heatmap",
        }
    }
}

pub fn run(family: Family, path: &Path, seed: Option<u64>) -> Result<Ran, CliError> {
    match family {
        Family::PriorDensities => with(path, seed, prior_densities),
        Family::TestPassing => with(path, seed, test_passing),
        Family::ValueOfTesting => with(path, seed, value_of_testing),
        Family::P005Priors => with(path, seed, p005_priors),
        Family::P005Comparison => with(path, seed, p005_comparison),
        Family::MetaproductionHeatmap => with(path, seed, metaproduction_heatmap),
        Family::CostThresholds => with(path, seed, cost_thresholds),
        Family::ProgramCurves => with(path, seed, program_curves),
        Family::ExclusiveCurve => with(path, seed, exclusive_curve),
        Family::SequentialHeatmap => with(path, seed, sequential_heatmap),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSummary {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: usize,
}

/// JSON side of a figure run: which tables were produced plus a few
/// family-specific scalars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FigureReport {
    pub family: String,
    pub tables: Vec<TableSummary>,
    pub summary: serde_json::Value,
}

fn finish(family: Family, tables: Vec<Table>, summary: serde_json::Value) -> Output {
    let report = FigureReport {
        family: family.name().into(),
        tables: tables
            .iter()
            .map(|t| TableSummary {
                name: t.name.clone(),
                columns: t.columns.iter().map(|c| c.to_string()).collect(),
                rows: t.rows.len(),
            })
            .collect(),
        summary,
    };
    Output::new(&report, tables)
}

/// Evenly spaced points on `[from, to]`.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearGrid {
    pub from: f64,
    pub to: f64,
    pub points: usize,
}

impl LinearGrid {
    fn values(&self, name: &str) -> Result<Vec<f64>, CliError> {
        if !(self.from.is_finite() && self.to.is_finite() && self.to > self.from && self.points >= 2) {
            return Err(CliError::Spec(format!("`{name}`: need finite from < to and points ≥ 2")));
        }
        let step = (self.to - self.from) / (self.points - 1) as f64;
        Ok((0..self.points).map(|i| self.from + step * i as f64).collect())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedPrior {
    pub name: String,
    pub prior: Prior,
}

fn gaussian_density(g: &GaussianPrior, x: f64) -> f64 {
    normal::pdf((x - g.mu()) / g.tau()) / g.tau()
}

// prior-densities

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorDensitiesSpec {
    pub programs: Vec<NamedPrior>,
    pub x: LinearGrid,
}

fn prior_densities(l: &Loaded<PriorDensitiesSpec>, _seed: u64) -> Result<Output, CliError> {
    let s = &l.spec;
    let xs = s.x.values("x")?;
    let mut t = Table::new("prior_densities", &["program", "kind", "x", "value"]);
    let mut moments = Vec::new();
    for p in &s.programs {
        match &p.prior {
            Prior::Gaussian(g) => {
                for &x in &xs {
                    t.push(vec![p.name.as_str().into(), "density".into(), x.into(), gaussian_density(g, x).into()]);
                }
            }
            Prior::Discrete(d) => {
                for &(v, w) in d.atoms() {
                    t.push(vec![p.name.as_str().into(), "point_mass".into(), v.into(), w.into()]);
                }
            }
        }
        moments.push(serde_json::json!({"program": p.name, "mean": p.prior.mean(), "sd": p.prior.sd()}));
    }
    Ok(finish(Family::PriorDensities, vec![t], serde_json::json!({ "programs": moments })))
}

// test-passing

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestPassingSpec {
    pub prior: Prior,
    pub sigma: f64,
    pub n_grid: GridSpec,
    #[serde(default)]
    pub utility: UtilitySpec,
    #[serde(default)]
    pub cost: CostSpec,
}

fn test_passing(l: &Loaded<TestPassingSpec>, _seed: u64) -> Result<Output, CliError> {
    let s = &l.spec;
    let nm = noise(s.sigma)?;
    let grid = s.n_grid.integers("n_grid", 1)?;
    let rows = threshold_rows(&s.prior, nm, &s.utility.build()?, s.cost.build()?.implementation(), &grid)?;
    let mut t = Table::new("test_passing", &["n", "alpha", "pass_prob", "sqrt_n", "cutoff", "t_stat"]);
    for r in &rows {
        t.push(vec![
            r.n.into(),
            r.alpha.into(),
            r.pass_prob.into(),
            (r.n as f64).sqrt().into(),
            r.cutoff.into(),
            r.t_stat.into(),
        ]);
    }
    // Large-n limit of the pass probability for a Gaussian prior.
    let limit = s.prior.as_gaussian().map(|g| normal::cdf(g.mu() / g.tau()));
    Ok(finish(Family::TestPassing, vec![t], serde_json::json!({ "pass_prob_limit": limit })))
}

// value-of-testing

fn zero_cost() -> Vec<f64> {
    vec![0.0]
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValueOfTestingSpec {
    pub prior: Prior,
    pub sigma: f64,
    pub pool: u64,
    pub ideas_grid: GridSpec,
    #[serde(default = "zero_cost")]
    pub per_test_costs: Vec<f64>,
}

fn value_of_testing(l: &Loaded<ValueOfTestingSpec>, _seed: u64) -> Result<Output, CliError> {
    let s = &l.spec;
    if s.pool == 0 {
        return Err(CliError::Spec("`pool` must be at least 1".into()));
    }
    let grid = s.ideas_grid.integers("ideas_grid", 1)?;
    let max_i = *grid.last().expect("grid is non-empty");
    let mut curve = Table::new("value_of_testing", &["i", "per_test_cost", "value"]);
    let mut best = Table::new("value_of_testing_optimum", &["per_test_cost", "best_i", "best_value"]);
    let mut optima = Vec::new();
    for &c in &s.per_test_costs {
        let cost = CostSpec {
            implementation: 0.0,
            per_test: c,
        };
        let h = handle(&s.prior, s.sigma, UtilitySpec::Linear, cost)?;
        for &i in &grid {
            let units = s.pool / i;
            let v = if units == 0 { 0.0 } else { i as f64 * h.value_at(units)? };
            curve.push(vec![i.into(), c.into(), v.into()]);
        }
        let (v, i) = metaproduction_direct(max_i, s.pool, &h)?;
        best.push(vec![c.into(), i.into(), v.into()]);
        optima.push(serde_json::json!({"per_test_cost": c, "best_i": i, "best_value": v}));
    }
    Ok(finish(Family::ValueOfTesting, vec![curve, best], serde_json::json!({ "optima": optima })))
}

trait ValueAt {
    fn value_at(&self, n: u64) -> leanexp::Result<f64>;
}

impl ValueAt for leanexp::ProductionHandle {
    fn value_at(&self, n: u64) -> leanexp::Result<f64> {
        Ok(self.evaluate(n as f64)?.value)
    }
}

// p005-priors

fn default_alpha() -> f64 {
    0.05
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct P005PriorsSpec {
    pub sigma: f64,
    pub n: f64,
    pub taus: Vec<f64>,
    /// One-sided level the priors should make optimal.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub reference: Option<Prior>,
    pub x: LinearGrid,
}

fn p005_priors(l: &Loaded<P005PriorsSpec>, _seed: u64) -> Result<Output, CliError> {
    let s = &l.spec;
    let nm = noise(s.sigma)?;
    if !(s.n >= 1.0 && s.n.is_finite()) {
        return Err(CliError::Spec(format!("`n` must be at least 1, got {}", s.n)));
    }
    if !(s.alpha > 0.0 && s.alpha < 1.0) {
        return Err(CliError::Spec(format!("`alpha` must lie in (0, 1), got {}", s.alpha)));
    }
    let xs = s.x.values("x")?;
    let z = normal::inv_cdf(1.0 - s.alpha);
    let mut t = Table::new("p005_priors", &["label", "tau", "mu", "x", "density"]);
    let mut priors = Vec::new();
    if let Some(r) = &s.reference {
        let g = gaussian(r, "p005-priors reference")?;
        for &x in &xs {
            t.push(vec!["reference".into(), g.tau().into(), g.mu().into(), x.into(), gaussian_density(&g, x).into()]);
        }
    }
    for (k, &tau) in s.taus.iter().enumerate() {
        let mu = -z * tau * tau * s.n.sqrt() / s.sigma;
        let g = GaussianPrior::new(mu, tau).map_err(|e| field("taus", e))?;
        let check = optimal_threshold_gaussian_linear(&g, nm, s.n)?.one_sided_alpha;
        for &x in &xs {
            t.push(vec![format!("prior_{k}").into(), tau.into(), mu.into(), x.into(), gaussian_density(&g, x).into()]);
        }
        priors.push(serde_json::json!({"label": format!("prior_{k}"), "tau": tau, "mu": mu, "optimal_alpha": check}));
    }
    Ok(finish(Family::P005Priors, vec![t], serde_json::json!({ "priors": priors })))
}

// p005-comparison

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct P005ComparisonSpec {
    pub prior: Prior,
    pub sigma: f64,
    pub n_grid: GridSpec,
    pub ideas_grid: GridSpec,
    pub pool_grid: GridSpec,
    #[serde(default = "default_z")]
    pub pvalue_z: f64,
}

fn lost(optimal: f64, other: f64) -> f64 {
    if optimal > 0.0 {
        1.0 - other / optimal
    } else {
        f64::NAN
    }
}

fn p005_comparison(l: &Loaded<P005ComparisonSpec>, _seed: u64) -> Result<Output, CliError> {
    let s = &l.spec;
    let nm = noise(s.sigma)?;
    if !s.pvalue_z.is_finite() {
        return Err(CliError::Spec(format!("`pvalue_z` must be finite, got {}", s.pvalue_z)));
    }
    let h = handle(&s.prior, s.sigma, UtilitySpec::Linear, CostSpec::default())?;
    let pv = PValueProduction {
        prior: s.prior.clone(),
        noise: nm,
        z: s.pvalue_z,
    };
    let mut prod = Table::new("p005_production", &["n", "f_optimal", "f_pvalue", "lost_fraction"]);
    for n in s.n_grid.integers("n_grid", 1)? {
        let a = h.value_at(n)?;
        let b = leanexp::Production::value(&pv, n as f64)?;
        prod.push(vec![n.into(), a.into(), b.into(), lost(a, b).into()]);
    }
    let ideas = s.ideas_grid.integers("ideas_grid", 1)?;
    let pools = s.pool_grid.integers("pool_grid", 1)?;
    let mut meta = Table::new("p005_metaproduction", &["I", "N", "F_optimal", "F_pvalue", "lost_fraction"]);
    let mut worst: f64 = 0.0;
    for &i in &ideas {
        for &n in &pools {
            let (a, _) = metaproduction_direct(i, n, &h)?;
            let (b, _) = metaproduction_direct(i, n, &pv)?;
            let f = lost(a, b);
            if f.is_finite() {
                worst = worst.max(f);
            }
            meta.push(vec![i.into(), n.into(), a.into(), b.into(), f.into()]);
        }
    }
    Ok(finish(
        Family::P005Comparison,
        vec![prod, meta],
        serde_json::json!({ "pvalue_z": s.pvalue_z, "max_lost_fraction": worst }),
    ))
}

// metaproduction-heatmap

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetaproductionHeatmapSpec {
    pub prior: Prior,
    pub sigma: f64,
    #[serde(default)]
    pub utility: UtilitySpec,
    #[serde(default)]
    pub cost: CostSpec,
    pub ideas_grid: GridSpec,
    pub pool_grid: GridSpec,
    #[serde(default = "default_bracket")]
    pub x_star_bracket: f64,
}

fn regime_name(r: Regime) -> &'static str {
    match r {
        Regime::GoBig => "go_big",
        Regime::Interior => "interior",
        Regime::Lean => "lean",
    }
}

fn metaproduction_heatmap(l: &Loaded<MetaproductionHeatmapSpec>, _seed: u64) -> Result<Output, CliError> {
    let s = &l.spec;
    let h = handle(&s.prior, s.sigma, s.utility, s.cost)?;
    let a = find_x_star(&h, s.x_star_bracket)?;
    let ideas = s.ideas_grid.reals("ideas_grid")?;
    let pools = s.pool_grid.reals("pool_grid")?;
    let mut t = Table::new("metaproduction_heatmap", &["I", "N", "F", "i_star", "regime"]);
    for &i in &ideas {
        for &n in &pools {
            let m = metaproduction_closed(i, n, &a, &h).map_err(|e| field("ideas_grid/pool_grid", e))?;
            t.push(vec![i.into(), n.into(), m.value.into(), m.i_star.into(), regime_name(m.regime).into()]);
        }
    }
    let summary = serde_json::json!({ "x_star": a.x_star, "x_hat": a.x_hat, "ratio_at_x_star": a.ratio_at_x_star });
    Ok(finish(Family::MetaproductionHeatmap, vec![t], summary))
}

// cost-thresholds

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostThresholdsSpec {
    pub prior: Prior,
    pub sigma: f64,
    pub n: f64,
    /// Implementation costs for the linear-utility sweep.
    pub costs: GridSpec,
    /// Loss-aversion coefficients for the zero-cost sweep.
    pub b_values: GridSpec,
}

fn cost_thresholds(l: &Loaded<CostThresholdsSpec>, _seed: u64) -> Result<Output, CliError> {
    let s = &l.spec;
    let nm = noise(s.sigma)?;
    let scale = s.prior.mean().abs();
    let mut ct = Table::new("cost_thresholds", &["cost", "cost_over_abs_mu", "cutoff", "alpha"]);
    for c in s.costs.reals("costs")? {
        let t = optimal_threshold_generic(&s.prior, nm, s.n, &Utility::Linear, c).map_err(|e| field("n", e))?;
        let ratio = if scale > 0.0 { c / scale } else { f64::NAN };
        ct.push(vec![c.into(), ratio.into(), t.cutoff_delta_hat.into(), t.one_sided_alpha.into()]);
    }
    let mut rt = Table::new("risk_aversion_thresholds", &["b", "cutoff", "alpha"]);
    for b in s.b_values.reals("b_values")? {
        let u = Utility::loss_averse(b).map_err(|e| field("b_values", e))?;
        let t = optimal_threshold_generic(&s.prior, nm, s.n, &u, 0.0).map_err(|e| field("n", e))?;
        rt.push(vec![b.into(), t.cutoff_delta_hat.into(), t.one_sided_alpha.into()]);
    }
    Ok(finish(Family::CostThresholds, vec![ct, rt], serde_json::json!({ "abs_prior_mean": scale })))
}

// program-curves

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProgramCurvesSpec {
    pub programs: Vec<ProgramSpec>,
    /// Pool sizes for `F_p(N)` at each program's own idea count.
    pub pool_grid: GridSpec,
    /// Idea counts for `F_p(I)` at each program's own pool.
    pub ideas_grid: GridSpec,
}

fn program_curves(l: &Loaded<ProgramCurvesSpec>, _seed: u64) -> Result<Output, CliError> {
    let s = &l.spec;
    if s.programs.is_empty() {
        return Err(CliError::Spec("`programs` must list at least one program".into()));
    }
    let pools = s.pool_grid.integers("pool_grid", 1)?;
    let ideas = s.ideas_grid.integers("ideas_grid", 1)?;
    let mut by_pool = Table::new("program_pool_curves", &["program", "N", "F"]);
    let mut by_ideas = Table::new("program_idea_curves", &["program", "I", "F"]);
    for p in &s.programs {
        let h = p.production().map_err(|e| field("programs", e))?;
        for &n in &pools {
            let v = if p.ideas == 0 { 0.0 } else { metaproduction_direct(p.ideas, n, &h)?.0 };
            by_pool.push(vec![p.name.as_str().into(), n.into(), v.into()]);
        }
        let max_i = *ideas.last().expect("grid is non-empty");
        let curve = metaproduction_curve(max_i, p.pool, &h)?;
        for &i in &ideas {
            by_ideas.push(vec![p.name.as_str().into(), i.into(), curve[i as usize].into()]);
        }
    }
    Ok(finish(Family::ProgramCurves, vec![by_pool, by_ideas], serde_json::Value::Null))
}

// exclusive-curve

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExclusiveCurveSpec {
    pub prior: Prior,
    pub sigma: f64,
    pub pools: Vec<u64>,
    pub i0_grid: GridSpec,
    #[serde(default = "default_method")]
    pub method: ExclusiveMethod,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn exclusive_curve(l: &Loaded<ExclusiveCurveSpec>, seed: u64) -> Result<Output, CliError> {
    let s = &l.spec;
    let g = gaussian(&s.prior, "exclusive-curve")?;
    let nm = noise(s.sigma)?;
    let approx = matches!(s.method, ExclusiveMethod::Approx | ExclusiveMethod::ApproxShrinkage);
    let grid = s.i0_grid.integers("i0_grid", if approx { 2 } else { 1 })?;
    let mut t = Table::new("exclusive_curve", &["N", "I0", "value", "stderr", "method"]);
    let mut best = Table::new("exclusive_curve_optimum", &["N", "best_I0", "best_value"]);
    for (k, &pool) in s.pools.iter().enumerate() {
        let sub: Vec<u64> = grid.iter().copied().filter(|&i| i <= pool).collect();
        if sub.is_empty() {
            return Err(CliError::Spec(format!("`i0_grid` has no value ≤ pool {pool}")));
        }
        let pts = exclusive_points(&g, nm, pool, &sub, s.method, s.samples, point_seed(seed, k as u64))
            .map_err(|e| field("pools/i0_grid", e))?;
        let mut top = pts[0];
        for r in &pts {
            t.push(vec![pool.into(), r.i0.into(), r.value.into(), r.stderr.into(), method_name(r.method).into()]);
            if r.value > top.value {
                top = *r;
            }
        }
        best.push(vec![pool.into(), top.i0.into(), top.value.into()]);
    }
    Ok(finish(Family::ExclusiveCurve, vec![t, best], serde_json::json!({ "method": s.method })))
}

// sequential-heatmap

#[derive(Debug, Clone, Copy, Default, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    /// `w_t = T − t + 1`.
    #[default]
    Decreasing,
    Uniform,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequentialHeatmapSpec {
    pub prior: Prior,
    pub sigma: f64,
    pub pool: u64,
    pub ideas_grid: GridSpec,
    pub periods_grid: GridSpec,
    #[serde(default)]
    pub weights: WeightScheme,
}

fn sequential_heatmap(l: &Loaded<SequentialHeatmapSpec>, _seed: u64) -> Result<Output, CliError> {
    let s = &l.spec;
    if s.pool == 0 {
        return Err(CliError::Spec("`pool` must be at least 1".into()));
    }
    let h = handle(&s.prior, s.sigma, UtilitySpec::Linear, CostSpec::default())?;
    let ideas = s.ideas_grid.integers("ideas_grid", 0)?;
    let periods = s.periods_grid.integers("periods_grid", 1)?;
    let curve = metaproduction_curve(*ideas.last().expect("grid is non-empty"), s.pool, &h)?;
    let mut heat = Table::new("sequential_heatmap", &["I", "T", "value"]);
    let mut sched = Table::new("sequential_schedules", &["I", "T", "period", "weight", "ideas"]);
    for &i in &ideas {
        for &t in &periods {
            let weights: Vec<f64> = (1..=t)
                .map(|p| match s.weights {
                    WeightScheme::Decreasing => (t - p + 1) as f64,
                    WeightScheme::Uniform => 1.0,
                })
                .collect();
            let plan = solve_sequential_table(&curve[..=i as usize], &weights)?;
            heat.push(vec![i.into(), t.into(), plan.value.into()]);
            for (p, (&w, &j)) in weights.iter().zip(&plan.ideas_per_period).enumerate() {
                sched.push(vec![i.into(), t.into(), (p + 1).into(), w.into(), j.into()]);
            }
        }
    }
    Ok(finish(Family::SequentialHeatmap, vec![heat, sched], serde_json::json!({ "weights": s.weights })))
}
