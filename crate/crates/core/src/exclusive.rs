//! Mutually exclusive ideas: test `I₀` candidates with `N/I₀` units each and
//! ship at most the one with the best posterior mean.
//!
//! With a Gaussian prior the posterior means are i.i.d.
//! `N(μ, κ²)` with `κ = τ²/√v`, `v = τ² + σ²I₀/N`, so the value
//! `E[(max_i E[Δ_i | Δ̂_i])⁺]` is a one-dimensional integral against the
//! density of the largest of `I₀` standard normals.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::montecarlo::common_random_means;
use crate::normal;
use crate::priors::{GaussianPrior, NoiseModel};
use crate::quadrature::integrate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusiveMethod {
    MonteCarlo,
    /// Extreme-value location `μ + √(2 log I₀ / v)`.
    Approx,
    /// Extreme-value location of the posterior means,
    /// `μ + τ²·√(2 log I₀ / v)`.
    ApproxShrinkage,
    /// Numerical integral against the density of the maximum.
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExclusiveResult {
    pub i0: u64,
    pub value: f64,
    /// Zero for deterministic methods.
    pub stderr: f64,
    pub method: ExclusiveMethod,
    /// Spread of the maximum around its location (approximations only).
    pub fluctuation: Option<f64>,
    /// False when the approximate location is below three fluctuation
    /// scales, where the approximation is unreliable.
    pub approximation_valid: Option<bool>,
}

fn check_i0(pool: u64, i0: u64) -> Result<()> {
    if i0 == 0 {
        return Err(Error::invalid("I0", "at least one idea must be tested"));
    }
    if i0 > pool {
        return Err(Error::Infeasible(format!("{i0} tests cannot each get a unit from a pool of {pool}")));
    }
    Ok(())
}

fn total_variance(prior: &GaussianPrior, noise: NoiseModel, pool: u64, i0: u64) -> f64 {
    prior.variance() + noise.variance_at(pool as f64 / i0 as f64)
}

/// Monte Carlo estimate for one `I₀`.
pub fn exclusive_value_mc(
    prior: &GaussianPrior,
    noise: NoiseModel,
    pool: u64,
    i0: u64,
    samples: usize,
    seed: u64,
) -> Result<ExclusiveResult> {
    Ok(exclusive_curve_mc(prior, noise, pool, &[i0], samples, seed)?[0])
}

/// Monte Carlo estimates for several `I₀` from the same draws: sample `s`
/// uses the same effects and noise for every entry of `grid`.
pub fn exclusive_curve_mc(
    prior: &GaussianPrior,
    noise: NoiseModel,
    pool: u64,
    grid: &[u64],
    samples: usize,
    seed: u64,
) -> Result<Vec<ExclusiveResult>> {
    if samples < 1000 {
        return Err(Error::invalid("samples", format!("at least 1000 required, got {samples}")));
    }
    for &i0 in grid {
        check_i0(pool, i0)?;
    }
    let widest = grid.iter().copied().max().unwrap_or(0) as usize;
    // Posterior mean minus μ is (τ²/v)(τZ + se·ε) with se² = σ²I₀/N.
    let coeffs: Vec<(usize, f64, f64)> = grid
        .iter()
        .map(|&i0| {
            let v = total_variance(prior, noise, pool, i0);
            let w = prior.variance() / v;
            (i0 as usize, w * prior.tau(), w * noise.se_at(pool as f64 / i0 as f64))
        })
        .collect();
    let mu = prior.mu();
    let estimates = common_random_means(samples, seed, grid.len(), |rng, out| {
        let draws: Vec<(f64, f64)> = (0..widest)
            .map(|_| (rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        for (slot, &(i0, a, b)) in out.iter_mut().zip(&coeffs) {
            let best = draws[..i0]
                .iter()
                .map(|&(z, e)| a * z + b * e)
                .fold(f64::NEG_INFINITY, f64::max);
            *slot = (mu + best).max(0.0);
        }
    });
    Ok(grid
        .iter()
        .zip(estimates)
        .map(|(&i0, e)| ExclusiveResult {
            i0,
            value: e.estimate,
            stderr: e.stderr,
            method: ExclusiveMethod::MonteCarlo,
            fluctuation: None,
            approximation_valid: None,
        })
        .collect())
}

/// `E[(μ + κ·max(Z₁..Z_{I₀}))⁺]` by adaptive quadrature.
pub fn exclusive_value_quadrature(prior: &GaussianPrior, noise: NoiseModel, pool: u64, i0: u64) -> Result<ExclusiveResult> {
    check_i0(pool, i0)?;
    let v = total_variance(prior, noise, pool, i0);
    let kappa = prior.variance() / v.sqrt();
    let mu = prior.mu();
    let k = i0 as f64;
    let ln_density = move |z: f64| -> f64 {
        let ln_cdf = if z > 0.0 { (-normal::sf(z)).ln_1p() } else { normal::cdf(z).ln() };
        k.ln() + normal::ln_pdf(z) + (k - 1.0) * ln_cdf
    };
    let lo = (-mu / kappa).max(-12.0);
    let hi = lo.max(0.0) + 14.0;
    let value = integrate(|z| Ok((mu + kappa * z).max(0.0) * ln_density(z).exp()), lo, hi, 0.0, 1e-12)?;
    Ok(ExclusiveResult {
        i0,
        value,
        stderr: 0.0,
        method: ExclusiveMethod::Quadrature,
        fluctuation: None,
        approximation_valid: None,
    })
}

/// Extreme-value approximation, either as printed (`shrinkage = false`) or
/// with the posterior shrinkage factor `τ²` applied to the spread term.
pub fn exclusive_value_approx(
    prior: &GaussianPrior,
    noise: NoiseModel,
    pool: u64,
    i0: u64,
    shrinkage: bool,
) -> Result<ExclusiveResult> {
    if i0 < 2 {
        return Err(Error::invalid("I0", format!("the approximation needs at least 2 tests, got {i0}")));
    }
    check_i0(pool, i0)?;
    let v = total_variance(prior, noise, pool, i0);
    let log_i = (i0 as f64).ln();
    let scale = if shrinkage { prior.variance() } else { 1.0 };
    let value = prior.mu() + scale * (2.0 * log_i / v).sqrt();
    let fluctuation = scale / (2.0 * v * log_i).sqrt();
    Ok(ExclusiveResult {
        i0,
        value,
        stderr: 0.0,
        method: if shrinkage {
            ExclusiveMethod::ApproxShrinkage
        } else {
            ExclusiveMethod::Approx
        },
        fluctuation: Some(fluctuation),
        approximation_valid: Some(value >= 3.0 * fluctuation),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct I0Scan {
    pub best: ExclusiveResult,
    /// Every evaluated point, sorted by `I₀`.
    pub curve: Vec<ExclusiveResult>,
}

/// Log-spaced integers in `[lo, hi]`, at most `points` of them.
fn log_grid(lo: u64, hi: u64, points: usize) -> Vec<u64> {
    if hi <= lo {
        return vec![lo];
    }
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let mut out: Vec<u64> = (0..points)
        .map(|k| (a + (b - a) * k as f64 / (points - 1) as f64).exp().round() as u64)
        .map(|x| x.clamp(lo, hi))
        .collect();
    out.dedup();
    out
}

const SCAN_POINTS: usize = 64;

/// Chooses how many of `I` ideas to test. Scans a log grid of at most 64
/// values of `I₀`, then refines between the neighbours of the best point.
/// Monte Carlo scans share random numbers across `I₀`; ties go to the
/// smaller `I₀`.
pub fn optimize_i0(
    prior: &GaussianPrior,
    noise: NoiseModel,
    pool: u64,
    ideas: u64,
    method: ExclusiveMethod,
    samples: usize,
    seed: u64,
) -> Result<I0Scan> {
    if ideas == 0 {
        return Err(Error::invalid("I", "at least one idea is required"));
    }
    let approx = matches!(method, ExclusiveMethod::Approx | ExclusiveMethod::ApproxShrinkage);
    let lo = if approx { 2 } else { 1 };
    let hi = ideas.min(pool);
    if hi < lo {
        return Err(Error::invalid("I", format!("the approximation needs at least 2 testable ideas, got {hi}")));
    }
    let evaluate = |grid: &[u64]| -> Result<Vec<ExclusiveResult>> {
        match method {
            ExclusiveMethod::MonteCarlo => exclusive_curve_mc(prior, noise, pool, grid, samples, seed),
            ExclusiveMethod::Quadrature => grid
                .iter()
                .map(|&i| exclusive_value_quadrature(prior, noise, pool, i))
                .collect(),
            ExclusiveMethod::Approx | ExclusiveMethod::ApproxShrinkage => grid
                .iter()
                .map(|&i| exclusive_value_approx(prior, noise, pool, i, method == ExclusiveMethod::ApproxShrinkage))
                .collect(),
        }
    };
    let coarse = log_grid(lo, hi, SCAN_POINTS);
    let mut curve = evaluate(&coarse)?;
    let arg = argmax(&curve);
    let left = if arg == 0 { coarse[0] } else { coarse[arg - 1] };
    let right = coarse.get(arg + 1).copied().unwrap_or(coarse[arg]);
    let fine: Vec<u64> = if right - left <= SCAN_POINTS as u64 {
        (left..=right).collect()
    } else {
        log_grid(left, right, SCAN_POINTS)
    };
    let fine: Vec<u64> = fine.into_iter().filter(|i| !coarse.contains(i)).collect();
    if !fine.is_empty() {
        curve.extend(evaluate(&fine)?);
        curve.sort_by_key(|r| r.i0);
    }
    let best = curve[argmax(&curve)];
    Ok(I0Scan { best, curve })
}

fn argmax(curve: &[ExclusiveResult]) -> usize {
    let mut best = 0;
    for (k, r) in curve.iter().enumerate() {
        if r.value > curve[best].value {
            best = k;
        }
    }
    best
}
