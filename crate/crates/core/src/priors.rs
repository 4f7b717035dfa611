//! Treatment-effect priors, the Gaussian observation model, posteriors and
//! prior fitting from past experiments.
//!
//! An idea's true effect `Δ` is drawn from a prior `G`; a test with `n` units
//! observes `Δ̂ ~ N(Δ, σ²/n)`. Everything downstream (production functions,
//! thresholds, allocations) is built from the posterior of `Δ` given `Δ̂`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_positive, Error, Result};
use crate::normal;
use crate::optimize::golden_section_max;
use crate::quadrature::{GaussHermite, DEFAULT_HERMITE_ORDER};

/// Gaussian treatment-effect prior `N(μ, τ²)` in metric units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GaussianPriorRepr")]
pub struct GaussianPrior {
    mu: f64,
    tau: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GaussianPriorRepr {
    mu: f64,
    tau: f64,
}

impl TryFrom<GaussianPriorRepr> for GaussianPrior {
    type Error = Error;
    fn try_from(r: GaussianPriorRepr) -> Result<Self> {
        GaussianPrior::new(r.mu, r.tau)
    }
}

impl GaussianPrior {
    pub fn new(mu: f64, tau: f64) -> Result<Self> {
        check_finite("mu", mu)?;
        check_positive("tau", tau)?;
        Ok(Self { mu, tau })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn variance(&self) -> f64 {
        self.tau * self.tau
    }

    /// Set when the prior mean is positive. Mature programs are expected to
    /// have `E[Δ] ≤ 0`; the solvers stay valid either way.
    pub fn violates_nonpositive_mean(&self) -> bool {
        self.mu > 0.0
    }
}

/// Finite-support prior with strictly positive weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DiscretePriorRepr")]
pub struct DiscretePrior {
    atoms: Vec<(f64, f64)>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DiscretePriorRepr {
    atoms: Vec<(f64, f64)>,
}

impl TryFrom<DiscretePriorRepr> for DiscretePrior {
    type Error = Error;
    fn try_from(r: DiscretePriorRepr) -> Result<Self> {
        DiscretePrior::new(r.atoms)
    }
}

impl DiscretePrior {
    /// Atoms as `(value, weight)` pairs; weights must already sum to 1.
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::invalid("atoms", "at least one atom is required"));
        }
        let mut total = 0.0;
        for &(v, w) in &atoms {
            check_finite("atom value", v)?;
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::invalid("atom weight", format!("must be positive, got {w}")));
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("atoms", format!("weights sum to {total}, expected 1")));
        }
        Ok(Self { atoms })
    }

    /// Builds a prior from unnormalized positive weights.
    pub fn normalized(atoms: Vec<(f64, f64)>) -> Result<Self> {
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::invalid("atoms", "weights must have a positive finite sum"));
        }
        Self::new(atoms.into_iter().map(|(v, w)| (v, w / total)).collect())
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }
}

/// Treatment-effect distribution `G`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prior {
    Gaussian(GaussianPrior),
    Discrete(DiscretePrior),
}

impl From<GaussianPrior> for Prior {
    fn from(p: GaussianPrior) -> Self {
        Prior::Gaussian(p)
    }
}

impl From<DiscretePrior> for Prior {
    fn from(p: DiscretePrior) -> Self {
        Prior::Discrete(p)
    }
}

impl Prior {
    pub fn mean(&self) -> f64 {
        match self {
            Prior::Gaussian(g) => g.mu,
            Prior::Discrete(d) => d.atoms.iter().map(|(v, w)| v * w).sum(),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            Prior::Gaussian(g) => g.variance(),
            Prior::Discrete(d) => {
                let m = self.mean();
                d.atoms.iter().map(|(v, w)| w * (v - m).powi(2)).sum()
            }
        }
    }

    pub fn sd(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn as_gaussian(&self) -> Option<&GaussianPrior> {
        match self {
            Prior::Gaussian(g) => Some(g),
            Prior::Discrete(_) => None,
        }
    }

    /// Marginal mean and standard deviation of `Δ̂` at allocation `n`.
    pub fn marginal_moments(&self, noise: NoiseModel, n: f64) -> (f64, f64) {
        (self.mean(), (self.variance() + noise.variance_at(n)).sqrt())
    }

    /// `P(Δ̂ ≥ cutoff)` under the marginal law of `Δ̂`.
    pub fn marginal_tail(&self, noise: NoiseModel, n: f64, cutoff: f64) -> f64 {
        if cutoff == f64::NEG_INFINITY {
            return 1.0;
        }
        if cutoff == f64::INFINITY {
            return 0.0;
        }
        let se = noise.se_at(n);
        match self {
            Prior::Gaussian(g) => {
                let sd = (g.variance() + se * se).sqrt();
                normal::sf((cutoff - g.mu) / sd)
            }
            Prior::Discrete(d) => d
                .atoms
                .iter()
                .map(|(v, w)| w * normal::sf((cutoff - v) / se))
                .sum(),
        }
    }
}

/// Unit-level noise scale `σ` of the return metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NoiseModel {
    sigma: f64,
}

impl NoiseModel {
    pub fn new(sigma: f64) -> Result<Self> {
        check_positive("sigma", sigma)?;
        Ok(Self { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Sampling variance `σ²/n` of an effect estimate from `n` units.
    pub fn variance_at(&self, n: f64) -> f64 {
        self.sigma * self.sigma / n
    }

    pub fn se_at(&self, n: f64) -> f64 {
        self.sigma / n.sqrt()
    }
}

/// One past experiment: observed effect and allocation size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RecordRepr")]
pub struct ExperimentRecord {
    delta_hat: f64,
    n: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordRepr {
    delta_hat: f64,
    n: u64,
}

impl TryFrom<RecordRepr> for ExperimentRecord {
    type Error = Error;
    fn try_from(r: RecordRepr) -> Result<Self> {
        ExperimentRecord::new(r.delta_hat, r.n)
    }
}

impl ExperimentRecord {
    pub fn new(delta_hat: f64, n: u64) -> Result<Self> {
        check_finite("delta_hat", delta_hat)?;
        if n == 0 {
            return Err(Error::invalid("n", "allocation size must be at least 1"));
        }
        Ok(Self { delta_hat, n })
    }

    pub fn delta_hat(&self) -> f64 {
        self.delta_hat
    }

    pub fn n(&self) -> u64 {
        self.n
    }
}

/// An increasing utility function of a realized return.
pub type UtilityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Utility applied to the return of a shipped idea.
#[derive(Clone)]
pub enum Utility {
    Linear,
    /// `u(x) = x + b·x·1{x < 0}`: losses weigh `1 + b` times as much as gains.
    LossAverse { b: f64 },
    Custom(UtilityFn),
}

impl fmt::Debug for Utility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Utility::Linear => f.write_str("Linear"),
            Utility::LossAverse { b } => f.debug_struct("LossAverse").field("b", b).finish(),
            Utility::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

const MONOTONE_GRID: usize = 256;

impl Utility {
    pub fn loss_averse(b: f64) -> Result<Self> {
        if !(b.is_finite() && b >= 0.0) {
            return Err(Error::invalid("b", format!("must be finite and non-negative, got {b}")));
        }
        Ok(if b == 0.0 {
            Utility::Linear
        } else {
            Utility::LossAverse { b }
        })
    }

    /// Wraps a user utility after checking it is increasing on a 256-point
    /// grid over `[lo, hi]`.
    pub fn custom_on(func: UtilityFn, lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid("utility grid", format!("[{lo}, {hi}] is not a proper range")));
        }
        let step = (hi - lo) / (MONOTONE_GRID - 1) as f64;
        let mut prev = func(lo);
        for k in 1..MONOTONE_GRID {
            let x = lo + step * k as f64;
            let y = func(x);
            if !y.is_finite() || !prev.is_finite() {
                return Err(Error::invalid("utility", format!("non-finite value near x = {x}")));
            }
            if y <= prev {
                return Err(Error::invalid(
                    "utility",
                    format!("not increasing: u({}) = {prev} ≥ u({x}) = {y}", x - step),
                ));
            }
            prev = y;
        }
        Ok(Utility::Custom(func))
    }

    /// Checks monotonicity over the prior mean ± 8 prior standard deviations.
    pub fn custom_for_prior(func: UtilityFn, prior: &Prior) -> Result<Self> {
        let m = prior.mean();
        let sd = prior.sd().max(1e-12 * (1.0 + m.abs())).max(f64::MIN_POSITIVE);
        let spread = if prior.sd() > 0.0 { 8.0 * sd } else { 1.0 + m.abs() };
        Self::custom_on(func, m - spread, m + spread)
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Utility::Linear => x,
            Utility::LossAverse { b } => {
                if x < 0.0 {
                    x * (1.0 + b)
                } else {
                    x
                }
            }
            Utility::Custom(func) => func(x),
        }
    }

    /// `E[u(X)]` for `X ~ N(mean, sd²)`, using a closed form where one exists.
    pub fn gaussian_expectation(&self, mean: f64, sd: f64, quad_order: usize) -> Result<f64> {
        match self {
            Utility::Linear => Ok(mean),
            Utility::LossAverse { b } => Ok(loss_averse_gaussian_expectation(mean, sd, *b)),
            Utility::Custom(func) => {
                if sd == 0.0 {
                    return Ok(func(mean));
                }
                let rule = GaussHermite::cached(quad_order)?;
                Ok(rule.expect(mean, sd, |x| func(x)))
            }
        }
    }
}

/// `E[X + b·X·1{X<0}]` for `X ~ N(m, s²)`: `m(1 + bΦ(−m/s)) − b·s·φ(m/s)`.
pub fn loss_averse_gaussian_expectation(m: f64, s: f64, b: f64) -> f64 {
    if s == 0.0 {
        return if m < 0.0 { m * (1.0 + b) } else { m };
    }
    m * (1.0 + b * normal::cdf(-m / s)) - b * s * normal::pdf(m / s)
}

/// Posterior mean and variance of `Δ` given `Δ̂` under a Gaussian prior.
pub fn posterior_moments_gaussian(
    prior: &GaussianPrior,
    noise: NoiseModel,
    n: f64,
    delta_hat: f64,
) -> (f64, f64) {
    let t2 = prior.variance();
    let e2 = noise.variance_at(n);
    let total = t2 + e2;
    let m = delta_hat * (t2 / total) + prior.mu * (e2 / total);
    let s2 = t2 * e2 / total;
    (m, s2)
}

/// `E[u(Δ) | Δ̂ = delta_hat]` with the default quadrature order.
pub fn posterior_expected_utility(
    prior: &Prior,
    noise: NoiseModel,
    n: f64,
    delta_hat: f64,
    utility: &Utility,
) -> Result<f64> {
    posterior_expected_utility_with(prior, noise, n, delta_hat, utility, DEFAULT_HERMITE_ORDER)
}

/// `E[u(Δ) | Δ̂ = delta_hat]` with an explicit Gauss–Hermite order.
pub fn posterior_expected_utility_with(
    prior: &Prior,
    noise: NoiseModel,
    n: f64,
    delta_hat: f64,
    utility: &Utility,
    quad_order: usize,
) -> Result<f64> {
    if !(n > 0.0) {
        return Err(Error::invalid("n", format!("posterior requires n ≥ 1, got {n}")));
    }
    let value = match prior {
        Prior::Gaussian(g) => {
            let (m, s2) = posterior_moments_gaussian(g, noise, n, delta_hat);
            utility.gaussian_expectation(m, s2.sqrt(), quad_order)?
        }
        Prior::Discrete(d) => discrete_posterior_expectation(d, noise, n, delta_hat, |v| utility.eval(v)),
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Numerical(format!(
            "posterior expected utility is {value} at delta_hat = {delta_hat}, n = {n}, prior = {prior:?}, utility = {utility:?}"
        )))
    }
}

/// Likelihood-weighted atom average, stabilized in log space.
fn discrete_posterior_expectation(
    prior: &DiscretePrior,
    noise: NoiseModel,
    n: f64,
    delta_hat: f64,
    g: impl Fn(f64) -> f64,
) -> f64 {
    let se = noise.se_at(n);
    let logw: Vec<f64> = prior
        .atoms
        .iter()
        .map(|(v, w)| w.ln() - 0.5 * ((delta_hat - v) / se).powi(2))
        .collect();
    let top = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut num = 0.0;
    let mut den = 0.0;
    for ((v, _), lw) in prior.atoms.iter().zip(&logw) {
        let w = (lw - top).exp();
        num += w * g(*v);
        den += w;
    }
    num / den
}

/// `E_G[Δ⁺]`, the per-idea value of a perfectly informed decision.
pub fn expected_positive_part(prior: &Prior) -> f64 {
    match prior {
        Prior::Gaussian(g) => normal::expected_positive_part(g.mu, g.tau),
        Prior::Discrete(d) => d.atoms.iter().map(|(v, w)| w * v.max(0.0)).sum(),
    }
}

/// Non-fatal conditions met while fitting a prior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitWarning {
    /// The dispersion estimate sits at `τ² = 0`.
    DegenerateDispersion,
    /// The optimum hit the upper end of the search bracket, which was widened.
    BracketWidened,
    /// The fitted mean is positive.
    PositiveMean,
}

/// Maximum-likelihood Gaussian prior with asymptotic standard errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriorFit {
    pub mu: f64,
    pub tau2: f64,
    pub log_likelihood: f64,
    /// Standard error of `μ̂` from the expected Fisher information.
    pub se_mu: f64,
    /// Standard error of `τ̂²`.
    pub se_tau2: f64,
    /// Standard error of `τ̂ = sqrt(τ̂²)` by the delta method; infinite at `τ̂ = 0`.
    pub se_tau: f64,
    pub warnings: Vec<FitWarning>,
}

impl PriorFit {
    pub fn tau(&self) -> f64 {
        self.tau2.sqrt()
    }

    /// The fitted prior; fails when the dispersion estimate is degenerate.
    pub fn prior(&self) -> Result<GaussianPrior> {
        GaussianPrior::new(self.mu, self.tau())
    }
}

fn profile(records: &[ExperimentRecord], noise: NoiseModel, tau2: f64) -> (f64, f64) {
    let mut sw = 0.0;
    let mut swx = 0.0;
    for r in records {
        let w = 1.0 / (tau2 + noise.variance_at(r.n as f64));
        sw += w;
        swx += w * r.delta_hat;
    }
    let mu = swx / sw;
    let mut ll = 0.0;
    for r in records {
        let v = tau2 + noise.variance_at(r.n as f64);
        ll += -0.5 * (v.ln() + (r.delta_hat - mu).powi(2) / v);
    }
    ll -= records.len() as f64 * normal::LN_SQRT_2PI;
    (mu, ll)
}

/// Fits `N(μ, τ²)` to heteroskedastic past results by maximum likelihood
/// over the marginal model `Δ̂ᵢ ~ N(μ, τ² + σ²/nᵢ)`.
///
/// `μ` is profiled out as the precision-weighted mean, and the profile
/// likelihood is maximized over `τ² ∈ [0, var(Δ̂)]` by golden section.
pub fn fit_gaussian_mle(records: &[ExperimentRecord], noise: NoiseModel) -> Result<PriorFit> {
    if records.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "fitting a prior needs at least 2 records, got {}",
            records.len()
        )));
    }
    // A canonical order makes every floating sum, and so the fit, independent
    // of how the records were listed.
    let mut sorted = records.to_vec();
    sorted.sort_by(|a, b| a.n.cmp(&b.n).then(a.delta_hat.total_cmp(&b.delta_hat)));
    let records = &sorted[..];
    let k = records.len() as f64;
    let mean = records.iter().map(|r| r.delta_hat).sum::<f64>() / k;
    let sample_var = records.iter().map(|r| (r.delta_hat - mean).powi(2)).sum::<f64>() / k;

    let mut warnings = Vec::new();
    let mut upper = sample_var;
    let tau2 = loop {
        if upper <= 0.0 {
            break 0.0;
        }
        let best = golden_section_max(
            |t2| Ok(profile(records, noise, t2).1),
            0.0,
            upper,
            |x| 1e-8 * x.max(1e-8 * upper),
            10_000,
        )?;
        if best.x == upper && upper < sample_var * 1e12 {
            if !warnings.contains(&FitWarning::BracketWidened) {
                warnings.push(FitWarning::BracketWidened);
            }
            upper *= 10.0;
            continue;
        }
        break best.x;
    };
    let (mu, log_likelihood) = profile(records, noise, tau2);
    if tau2 == 0.0 {
        warnings.push(FitWarning::DegenerateDispersion);
    }
    if mu > 0.0 {
        warnings.push(FitWarning::PositiveMean);
    }

    let (mut info_mu, mut info_tau2) = (0.0, 0.0);
    for r in records {
        let v = tau2 + noise.variance_at(r.n as f64);
        info_mu += 1.0 / v;
        info_tau2 += 0.5 / (v * v);
    }
    let se_mu = (1.0 / info_mu).sqrt();
    let se_tau2 = (1.0 / info_tau2).sqrt();
    let se_tau = if tau2 > 0.0 {
        se_tau2 / (2.0 * tau2.sqrt())
    } else {
        f64::INFINITY
    };
    Ok(PriorFit {
        mu,
        tau2,
        log_likelihood,
        se_mu,
        se_tau2,
        se_tau,
        warnings,
    })
}

/// Sampling variances of the MLE `(μ̂, τ̂²)` when `N` units are split equally
/// across `I0` tests.
pub fn mle_variance_equal_allocation(
    tests: u64,
    pool: u64,
    noise: NoiseModel,
    tau: f64,
) -> Result<(f64, f64)> {
    if tests < 2 {
        return Err(Error::invalid("I0", format!("must be at least 2, got {tests}")));
    }
    if pool == 0 {
        return Err(Error::invalid("N", "pool must be at least 1"));
    }
    check_positive("tau", tau)?;
    let i0 = tests as f64;
    let marginal = tau * tau + noise.sigma * noise.sigma * i0 / pool as f64;
    Ok((marginal / i0, marginal * marginal / (i0 - 1.0)))
}
