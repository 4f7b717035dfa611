//! Production functions: the expected return `f(n)` from testing one typical
//! idea with `n` units and shipping it under a given decision rule.
//!
//! Under the optimal rule, `f(n) = E[(E[u(Δ) | Δ̂; n] − s)⁺] − t(n)`. The
//! generic evaluator finds the ship cutoff `c(n)` on `Δ̂` first and then
//! integrates `E[u(Δ) | Δ̂] − s` over the marginal tail `Δ̂ ≥ c(n)`, which
//! removes the kink of the positive part from the integrand. Gaussian priors
//! with linear utility also have a closed form, used as the fast path.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::decisions::{ship_cutoff, Cutoff};
use crate::error::{check_finite, Error, Result};
use crate::montecarlo::{chunked_mean, Estimate};
use crate::normal;
use crate::optimize::bisect_predicate;
use crate::priors::{posterior_expected_utility_with, GaussianPrior, NoiseModel, Prior, Utility};
use crate::quadrature::{integrate, DEFAULT_HERMITE_ORDER};

/// Anything that can be evaluated as a production function of the
/// allocation size.
pub trait Production {
    /// `f(n)`; implementations return `0` at `n = 0`.
    fn value(&self, n: f64) -> Result<f64>;

    /// `(sign, ln|f(n)|)`. Overridden where `f` underflows long before it
    /// reaches zero, so that ratios like `f(x)/x` stay comparable.
    fn signed_ln_value(&self, n: f64) -> Result<(f64, f64)> {
        let v = self.value(n)?;
        Ok((v.signum() * (v != 0.0) as i32 as f64, v.abs().ln()))
    }
}

impl<P: Production + ?Sized> Production for &P {
    fn value(&self, n: f64) -> Result<f64> {
        (**self).value(n)
    }
    fn signed_ln_value(&self, n: f64) -> Result<(f64, f64)> {
        (**self).signed_ln_value(n)
    }
}

/// Production function given as a table over integer allocations.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedProduction {
    values: Vec<f64>,
}

impl TabulatedProduction {
    /// `values[n]` is `f(n)`; `values[0]` must be 0.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        match values.first() {
            Some(&v) if v == 0.0 => {}
            _ => return Err(Error::invalid("table", "f(0) must be present and equal to 0")),
        }
        for &v in &values {
            check_finite("table value", v)?;
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl Production for TabulatedProduction {
    fn value(&self, n: f64) -> Result<f64> {
        if n.fract() != 0.0 || n < 0.0 {
            return Err(Error::invalid("n", format!("tabulated production needs an integer allocation, got {n}")));
        }
        self.values.get(n as usize).copied().ok_or_else(|| {
            Error::invalid("n", format!("allocation {n} is beyond the table of length {}", self.values.len()))
        })
    }
}

/// Production function backed by a closure.
pub struct FnProduction<F>(pub F);

impl<F: Fn(f64) -> f64> Production for FnProduction<F> {
    fn value(&self, n: f64) -> Result<f64> {
        if n == 0.0 {
            return Ok(0.0);
        }
        let v = (self.0)(n);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Numerical(format!("production value at n = {n} is {v}")))
        }
    }
}

pub type CostFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Per-test cost of running an experiment with `n` units.
#[derive(Clone, Default)]
pub enum TestingCost {
    #[default]
    Zero,
    /// A flat cost for any test with at least one unit.
    FixedPerTest(f64),
    Custom(CostFn),
}

impl fmt::Debug for TestingCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestingCost::Zero => f.write_str("Zero"),
            TestingCost::FixedPerTest(c) => f.debug_tuple("FixedPerTest").field(c).finish(),
            TestingCost::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl TestingCost {
    pub fn at(&self, n: f64) -> f64 {
        if n == 0.0 {
            return 0.0;
        }
        match self {
            TestingCost::Zero => 0.0,
            TestingCost::FixedPerTest(c) => *c,
            TestingCost::Custom(func) => func(n),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, TestingCost::Zero) || matches!(self, TestingCost::FixedPerTest(c) if *c == 0.0)
    }
}

/// Implementation cost `s` charged when an idea ships, plus the testing cost.
#[derive(Debug, Clone, Default)]
pub struct CostModel {
    implementation: f64,
    testing: TestingCost,
}

impl CostModel {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn new(implementation: f64, testing: TestingCost) -> Result<Self> {
        if !(implementation.is_finite() && implementation >= 0.0) {
            return Err(Error::invalid("implementation_cost", format!("must be finite and ≥ 0, got {implementation}")));
        }
        match &testing {
            TestingCost::Zero => {}
            TestingCost::FixedPerTest(c) => {
                if !(c.is_finite() && *c >= 0.0) {
                    return Err(Error::invalid("testing_cost", format!("must be finite and ≥ 0, got {c}")));
                }
            }
            TestingCost::Custom(func) => {
                if func(0.0) != 0.0 {
                    return Err(Error::invalid("testing_cost", "t(0) must be 0"));
                }
                // 0, then powers of two up to 2^40.
                let mut prev = 0.0;
                for k in 0..=40 {
                    let n = (1u64 << k) as f64;
                    let t = func(n);
                    if !(t.is_finite() && t >= 0.0) {
                        return Err(Error::invalid("testing_cost", format!("t({n}) = {t} is not a finite non-negative cost")));
                    }
                    if t < prev {
                        return Err(Error::invalid("testing_cost", format!("decreases to {t} at n = {n}")));
                    }
                    prev = t;
                }
            }
        }
        Ok(Self { implementation, testing })
    }

    pub fn implementation(&self) -> f64 {
        self.implementation
    }

    pub fn testing(&self) -> &TestingCost {
        &self.testing
    }
}

/// Why a production value sits at a boundary of the decision space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Saturation {
    /// No plausible observation justifies shipping.
    NeverShip,
    /// Every plausible observation justifies shipping.
    AlwaysShip,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductionValue {
    pub value: f64,
    pub saturation: Option<Saturation>,
}

/// A prior, noise scale, utility and cost model, evaluable as `f(n)`.
#[derive(Debug, Clone)]
pub struct ProductionHandle {
    prior: Prior,
    noise: NoiseModel,
    utility: Utility,
    cost: CostModel,
    quad_order: usize,
}

impl ProductionHandle {
    pub fn new(prior: impl Into<Prior>, noise: NoiseModel, utility: Utility, cost: CostModel) -> Self {
        Self {
            prior: prior.into(),
            noise,
            utility,
            cost,
            quad_order: DEFAULT_HERMITE_ORDER,
        }
    }

    /// Linear utility, no costs.
    pub fn linear(prior: impl Into<Prior>, noise: NoiseModel) -> Self {
        Self::new(prior, noise, Utility::Linear, CostModel::zero())
    }

    pub fn with_quad_order(mut self, order: usize) -> Self {
        self.quad_order = order;
        self
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn noise(&self) -> NoiseModel {
        self.noise
    }

    pub fn utility(&self) -> &Utility {
        &self.utility
    }

    pub fn cost(&self) -> &CostModel {
        &self.cost
    }

    pub fn quad_order(&self) -> usize {
        self.quad_order
    }

    fn closed_form_prior(&self) -> Option<&GaussianPrior> {
        match (&self.prior, &self.utility) {
            (Prior::Gaussian(g), Utility::Linear) => Some(g),
            _ => None,
        }
    }

    /// `f(n)` with its saturation flag, using the closed form when the prior
    /// is Gaussian and the utility linear.
    pub fn evaluate(&self, n: f64) -> Result<ProductionValue> {
        validate_n(n)?;
        if n == 0.0 {
            return Ok(ProductionValue { value: 0.0, saturation: None });
        }
        match self.closed_form_prior() {
            Some(g) => {
                let s = self.cost.implementation;
                let (mean, sd) = posterior_mean_law(g, self.noise, n);
                let value = normal::expected_positive_part(mean - s, sd) - self.cost.testing.at(n);
                Ok(ProductionValue {
                    value,
                    saturation: gaussian_saturation(g, self.noise, n, s),
                })
            }
            None => production_generic(self, n, self.quad_order),
        }
    }
}

impl Production for ProductionHandle {
    fn value(&self, n: f64) -> Result<f64> {
        Ok(self.evaluate(n)?.value)
    }

    fn signed_ln_value(&self, n: f64) -> Result<(f64, f64)> {
        if let Some(g) = self.closed_form_prior() {
            if self.cost.testing.is_zero() && n > 0.0 {
                let (mean, sd) = posterior_mean_law(g, self.noise, n);
                return Ok((1.0, normal::ln_expected_positive_part(mean - self.cost.implementation, sd)));
            }
        }
        let v = self.value(n)?;
        Ok((v.signum() * (v != 0.0) as i32 as f64, v.abs().ln()))
    }
}

fn validate_n(n: f64) -> Result<()> {
    if n.is_finite() && n >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid("n", format!("allocation must be finite and ≥ 0, got {n}")))
    }
}

/// Marginal law of the posterior mean `E[Δ | Δ̂]` under a Gaussian prior:
/// `N(μ, τ⁴ / (τ² + σ²/n))`.
fn posterior_mean_law(g: &GaussianPrior, noise: NoiseModel, n: f64) -> (f64, f64) {
    let v = g.variance() + noise.variance_at(n);
    (g.mu(), g.variance() / v.sqrt())
}

fn gaussian_saturation(g: &GaussianPrior, noise: NoiseModel, n: f64, s: f64) -> Option<Saturation> {
    let e2 = noise.variance_at(n);
    let v = g.variance() + e2;
    let cutoff = (s * v - g.mu() * e2) / g.variance();
    let z = (cutoff - g.mu()) / v.sqrt();
    if z > CUTOFF_BRACKET_SDS {
        Some(Saturation::NeverShip)
    } else if z < -CUTOFF_BRACKET_SDS {
        Some(Saturation::AlwaysShip)
    } else {
        None
    }
}

pub(crate) const CUTOFF_BRACKET_SDS: f64 = 12.0;

/// Production function of a Gaussian prior under linear utility and no
/// costs, in closed form:
/// `f(n) = (τ²/√v)·φ((μ/τ²)√v) + μ·Φ((μ/τ²)√v)` with `v = τ² + σ²/n`.
pub fn production_gaussian_linear(prior: &GaussianPrior, noise: NoiseModel, n: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    let t2 = prior.variance();
    let v = t2 + noise.variance_at(n);
    let root_v = v.sqrt();
    let a = prior.mu() / t2 * root_v;
    // (τ²/√v)·[φ(a) + aΦ(a)] is the same expression without cancellation.
    t2 / root_v * normal::psi(a)
}

/// `E[(u(Δ) − s)·1{Δ̂ ≥ cutoff}]` for a finite cutoff, without testing cost.
fn tail_value(handle: &ProductionHandle, n: f64, cutoff: f64, quad_order: usize) -> Result<f64> {
    let s = handle.cost.implementation;
    let noise = handle.noise;
    match &handle.prior {
        Prior::Discrete(d) => {
            let se = noise.se_at(n);
            Ok(d
                .atoms()
                .iter()
                .map(|&(v, w)| w * (handle.utility.eval(v) - s) * normal::sf((cutoff - v) / se))
                .sum())
        }
        Prior::Gaussian(g) => {
            let sd = (g.variance() + noise.variance_at(n)).sqrt();
            let z_lo = (cutoff - g.mu()) / sd;
            let z_hi = z_lo.max(0.0) + CUTOFF_BRACKET_SDS;
            let prior = &handle.prior;
            let utility = &handle.utility;
            integrate(
                |z| {
                    let x = g.mu() + sd * z;
                    let peu = posterior_expected_utility_with(prior, noise, n, x, utility, quad_order)?;
                    Ok((peu - s) * normal::pdf(z))
                },
                z_lo,
                z_hi,
                0.0,
                1e-12,
            )
        }
    }
}

fn unconditional_value(handle: &ProductionHandle) -> Result<f64> {
    let s = handle.cost.implementation;
    let mean_u = match &handle.prior {
        Prior::Gaussian(g) => handle.utility.gaussian_expectation(g.mu(), g.tau(), handle.quad_order)?,
        Prior::Discrete(d) => d.atoms().iter().map(|&(v, w)| w * handle.utility.eval(v)).sum(),
    };
    Ok(mean_u - s)
}

/// Generic production function by cutoff search and tail quadrature.
///
/// Works for any prior, utility and cost model. Discrete priors are summed
/// exactly once the cutoff is known; Gaussian priors are integrated with an
/// adaptive Gauss–Kronrod rule over the standardized marginal of `Δ̂`.
pub fn production_generic(handle: &ProductionHandle, n: f64, quad_order: usize) -> Result<ProductionValue> {
    validate_n(n)?;
    if n == 0.0 {
        return Ok(ProductionValue { value: 0.0, saturation: None });
    }
    let t = handle.cost.testing.at(n);
    let cutoff = ship_cutoff(
        &handle.prior,
        handle.noise,
        n,
        &handle.utility,
        handle.cost.implementation,
        quad_order,
    )?;
    let (gross, saturation) = match cutoff {
        Cutoff::At(c) => (tail_value(handle, n, c, quad_order)?, None),
        Cutoff::NeverShip => (0.0, Some(Saturation::NeverShip)),
        Cutoff::AlwaysShip => (unconditional_value(handle)?, Some(Saturation::AlwaysShip)),
    };
    let value = gross - t;
    if !value.is_finite() {
        return Err(Error::Numerical(format!("production value at n = {n} is {value}")));
    }
    Ok(ProductionValue { value, saturation })
}

/// Ship/no-ship rule applied to an observed effect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionRule {
    /// Ship iff the posterior expected utility covers the implementation cost.
    Optimal,
    /// Ship iff `Δ̂ ≥ z·σ/√n`.
    PValue { z: f64 },
    /// Ship iff `Δ̂ ≥ 0`.
    Minimax,
}

/// Default `z` for the conventional-significance comparison rule.
pub const DEFAULT_PVALUE_Z: f64 = 1.96;

impl DecisionRule {
    fn cutoff(&self, handle: &ProductionHandle, n: f64) -> Result<Cutoff> {
        Ok(match *self {
            DecisionRule::Optimal => ship_cutoff(
                &handle.prior,
                handle.noise,
                n,
                &handle.utility,
                handle.cost.implementation,
                handle.quad_order,
            )?,
            DecisionRule::PValue { z } => {
                let c = z * handle.noise.se_at(n);
                if c == f64::INFINITY {
                    Cutoff::NeverShip
                } else if c == f64::NEG_INFINITY {
                    Cutoff::AlwaysShip
                } else {
                    Cutoff::At(c)
                }
            }
            DecisionRule::Minimax => Cutoff::At(0.0),
        })
    }
}

/// Expected return per idea when decisions follow `rule`, net of costs.
pub fn production_under_rule(handle: &ProductionHandle, n: f64, rule: DecisionRule) -> Result<f64> {
    validate_n(n)?;
    if n == 0.0 {
        return Ok(0.0);
    }
    if rule == DecisionRule::Optimal {
        return Ok(handle.evaluate(n)?.value);
    }
    let gross = match rule.cutoff(handle, n)? {
        Cutoff::At(c) => tail_value(handle, n, c, handle.quad_order)?,
        Cutoff::NeverShip => 0.0,
        Cutoff::AlwaysShip => unconditional_value(handle)?,
    };
    Ok(gross - handle.cost.testing.at(n))
}

/// `E[Δ·1{Δ̂ ≥ zσ/√n}]`: expected return per idea when shipping on a
/// one-sided z-test, with linear utility and no costs.
pub fn production_pvalue_rule(prior: &Prior, noise: NoiseModel, n: f64, z: f64) -> Result<f64> {
    if !(n >= 1.0) {
        return Err(Error::invalid("n", format!("must be at least 1, got {n}")));
    }
    if z == f64::INFINITY {
        return Ok(0.0);
    }
    let cutoff = z * noise.se_at(n);
    Ok(match prior {
        Prior::Gaussian(g) => {
            let sm = (g.variance() + noise.variance_at(n)).sqrt();
            let k = (cutoff - g.mu()) / sm;
            g.mu() * normal::sf(k) + g.variance() / sm * normal::pdf(k)
        }
        Prior::Discrete(d) => {
            let se = noise.se_at(n);
            d.atoms().iter().map(|&(v, w)| w * v * normal::sf((cutoff - v) / se)).sum()
        }
    })
}

fn draw_effect(prior: &Prior, rng: &mut ChaCha8Rng) -> f64 {
    match prior {
        Prior::Gaussian(g) => g.mu() + g.tau() * rng.sample::<f64, _>(StandardNormal),
        Prior::Discrete(d) => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for &(v, w) in d.atoms() {
                acc += w;
                if u < acc {
                    return v;
                }
            }
            d.atoms().last().expect("non-empty prior").0
        }
    }
}

/// Monte Carlo estimate of the production function under `rule`.
///
/// Simulates `Δ ~ G`, `Δ̂ ~ N(Δ, σ²/n)`, applies the rule and averages the
/// realized `u(Δ) − s`, then subtracts `t(n)`. Deterministic for a seed.
pub fn production_monte_carlo(
    handle: &ProductionHandle,
    n: f64,
    rule: DecisionRule,
    samples: usize,
    seed: u64,
) -> Result<Estimate> {
    if samples < 1000 {
        return Err(Error::invalid("samples", format!("at least 1000 required, got {samples}")));
    }
    if !(n >= 1.0 && n.is_finite()) {
        return Err(Error::invalid("n", format!("must be at least 1, got {n}")));
    }
    let (lo, hi) = match rule.cutoff(handle, n)? {
        Cutoff::At(c) => (c, f64::INFINITY),
        Cutoff::NeverShip => (f64::INFINITY, f64::INFINITY),
        Cutoff::AlwaysShip => (f64::NEG_INFINITY, f64::INFINITY),
    };
    let se = handle.noise.se_at(n);
    let s = handle.cost.implementation;
    let prior = &handle.prior;
    let utility = &handle.utility;
    let est = chunked_mean(samples, seed, |rng| {
        let delta = draw_effect(prior, rng);
        let obs = delta + se * rng.sample::<f64, _>(StandardNormal);
        if obs >= lo && obs <= hi {
            utility.eval(delta) - s
        } else {
            0.0
        }
    });
    Ok(Estimate {
        estimate: est.estimate - handle.cost.testing.at(n),
        ..est
    })
}

/// Structural points of a production function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProductionAnalysis {
    /// Inflection point: `f` is convex below and concave above.
    pub x_hat: f64,
    /// Global maximizer of `f(x)/x`.
    pub x_star: f64,
    pub f_at_x_star: f64,
    pub ratio_at_x_star: f64,
    /// Relative width of the final golden-section bracket around `x_star`.
    pub x_star_tolerance: f64,
    /// Relative width of the final bisection bracket around `x_hat`
    /// (absolute when `x_hat` is 0).
    pub x_hat_tolerance: f64,
    /// `x_star` sits at the lower end of the search range.
    pub x_star_at_boundary: bool,
}

pub const X_STAR_LOWER: f64 = 1.0;

/// Ordering key for `f(x)/x` that survives underflow of `f`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
struct RatioKey(f64, f64);

fn ratio_key<P: Production + ?Sized>(f: &P, x: f64) -> Result<RatioKey> {
    let (sign, ln_abs) = f.signed_ln_value(x)?;
    let ln_ratio = ln_abs - x.ln();
    Ok(match sign {
        s if s > 0.0 => RatioKey(1.0, ln_ratio),
        s if s < 0.0 => RatioKey(-1.0, -ln_ratio),
        _ => RatioKey(0.0, 0.0),
    })
}

fn second_difference<P: Production + ?Sized>(f: &P, x: f64) -> Result<f64> {
    let h = (x / 1e3).max(1.0);
    Ok((f.value(x + h)? - 2.0 * f.value(x)? + f.value(x - h)?) / (h * h))
}

/// Locates `x*` (maximizer of `f(x)/x` on `[1, bracket_hi]`) by golden
/// section in `ln x`, and the inflection `x̂` by bisection on the sign of a
/// central second difference.
pub fn find_x_star<P: Production + ?Sized>(f: &P, bracket_hi: f64) -> Result<ProductionAnalysis> {
    if !(bracket_hi > X_STAR_LOWER && bracket_hi.is_finite()) {
        return Err(Error::invalid("bracket_hi", format!("must exceed {X_STAR_LOWER}, got {bracket_hi}")));
    }
    let lo = X_STAR_LOWER.ln();
    let hi = bracket_hi.ln();
    let best = golden_section_max_by(|lx| ratio_key(f, lx.exp()), lo, hi, 1e-6)?;
    if best.0 == hi {
        let probe = bracket_hi / (1.0 + 1e-3);
        return Err(Error::BeyondBracket {
            lo_probe: probe,
            hi: bracket_hi,
            g_lo: f.value(probe)? / probe,
            g_hi: f.value(bracket_hi)? / bracket_hi,
        });
    }
    let x_star = best.0.exp();
    let at_boundary = best.0 == lo;
    let f_star = f.value(x_star)?;

    let concave = |x: f64| -> Result<bool> { Ok(second_difference(f, x)? < 0.0) };
    let floor = 2.0;
    let (x_hat, x_hat_tol) = if concave(floor)? {
        (0.0, floor)
    } else {
        // Concavity at x* is expected; otherwise climb until it shows up.
        let mut upper = x_star.max(floor);
        while !concave(upper)? {
            if upper >= bracket_hi {
                break;
            }
            upper = (upper * 2.0).min(bracket_hi);
        }
        if !concave(upper)? {
            (bracket_hi, f64::INFINITY)
        } else {
            let (a, b) = bisect_predicate(
                |lx| concave(lx.exp()),
                floor.ln(),
                upper.ln(),
                |a, b| b - a <= 1e-6,
                200,
            )?;
            ((0.5 * (a + b)).exp(), b - a)
        }
    };
    Ok(ProductionAnalysis {
        x_hat,
        x_star,
        f_at_x_star: f_star,
        ratio_at_x_star: f_star / x_star,
        x_star_tolerance: best.1,
        x_hat_tolerance: x_hat_tol,
        x_star_at_boundary: at_boundary,
    })
}

/// Golden-section search on an ordered key; returns `(x, bracket width)`.
fn golden_section_max_by(
    mut key: impl FnMut(f64) -> Result<RatioKey>,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    let mut cache: Vec<(f64, RatioKey)> = Vec::new();
    let mut eval = |x: f64| -> Result<RatioKey> {
        if let Some((_, k)) = cache.iter().find(|(p, _)| *p == x) {
            return Ok(*k);
        }
        let k = key(x)?;
        cache.push((x, k));
        Ok(k)
    };
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    const INV_PHI2: f64 = 0.381_966_011_250_105_1;
    let (mut a, mut b) = (lo, hi);
    let mut c = a + INV_PHI2 * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut kc = eval(c)?;
    let mut kd = eval(d)?;
    while b - a > tol {
        if kc >= kd {
            b = d;
            d = c;
            kd = kc;
            c = a + INV_PHI2 * (b - a);
            kc = eval(c)?;
        } else {
            a = c;
            c = d;
            kc = kd;
            d = a + INV_PHI * (b - a);
            kd = eval(d)?;
        }
    }
    let (mut x, mut k) = if kc >= kd { (c, kc) } else { (d, kd) };
    if a == lo {
        let kl = eval(lo)?;
        if kl >= k {
            x = lo;
            k = kl;
        }
    }
    if b == hi {
        let kh = eval(hi)?;
        if kh > k {
            x = hi;
        }
    }
    Ok((x, b - a))
}
