use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::priors::{expected_positive_part, Prior};
use crate::production::{Production, ProductionAnalysis};

/// Which branch of the metaproduction closed form applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `x* ≥ N`: one test gets the whole pool.
    GoBig,
    /// `N/I ≤ x* < N`: run `N/x*` tests of size `x*`.
    Interior,
    /// `x* < N/I`: test every idea with an equal split.
    Lean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetaproductionResult {
    pub value: f64,
    /// Optimal number of tests; fractional in the interior regime.
    pub i_star: f64,
    pub regime: Regime,
}

/// `max_{1 ≤ i ≤ I} i·f(⌊N/i⌋)` by direct search; ties go to the smaller `i`.
pub fn metaproduction_direct<P: Production + ?Sized>(ideas: u64, pool: u64, f: &P) -> Result<(f64, u64)> {
    if ideas == 0 {
        return Err(Error::invalid("ideas", "at least one idea is required"));
    }
    let mut best = (f64::NEG_INFINITY, 0);
    for i in 1..=ideas {
        let v = i as f64 * f.value((pool / i) as f64)?;
        if v > best.0 {
            best = (v, i);
        }
        // Every further candidate tests with zero units.
        if pool / i == 0 {
            break;
        }
    }
    Ok(best)
}

fn check_analysis<P: Production + ?Sized>(analysis: &ProductionAnalysis, f: &P) -> Result<()> {
    let actual = f.value(analysis.x_star)?;
    let expected = analysis.f_at_x_star;
    if (actual - expected).abs() > 1e-9 * expected.abs().max(1e-300) {
        return Err(Error::AnalysisMismatch { expected, actual });
    }
    Ok(())
}

/// Closed-form metaproduction value for real `I` and `N` given the
/// production analysis of `f`.
///
/// `I < 1` yields zero with `i* = 0`, labelled lean.
pub fn metaproduction_closed<P: Production + ?Sized>(
    ideas: f64,
    pool: f64,
    analysis: &ProductionAnalysis,
    f: &P,
) -> Result<MetaproductionResult> {
    if !(ideas.is_finite() && ideas >= 0.0) {
        return Err(Error::invalid("ideas", format!("must be finite and ≥ 0, got {ideas}")));
    }
    if !(pool.is_finite() && pool > 0.0) {
        return Err(Error::invalid("pool", format!("must be finite and > 0, got {pool}")));
    }
    check_analysis(analysis, f)?;
    if ideas < 1.0 {
        return Ok(MetaproductionResult {
            value: 0.0,
            i_star: 0.0,
            regime: Regime::Lean,
        });
    }
    let x = analysis.x_star;
    Ok(if x >= pool {
        MetaproductionResult {
            value: f.value(pool)?,
            i_star: 1.0,
            regime: Regime::GoBig,
        }
    } else if x >= pool / ideas {
        MetaproductionResult {
            value: pool * analysis.f_at_x_star / x,
            i_star: pool / x,
            regime: Regime::Interior,
        }
    } else {
        MetaproductionResult {
            value: ideas * f.value(pool / ideas)?,
            i_star: ideas,
            regime: Regime::Lean,
        }
    })
}

/// Limit of the per-idea regret `(I·E[Δ⁺] − F(I, κI))/I` as `I → ∞` with
/// `κ` units per idea.
pub fn regret_per_idea_limit<P: Production + ?Sized>(
    kappa: f64,
    prior: &Prior,
    analysis: &ProductionAnalysis,
    f: &P,
) -> Result<f64> {
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(Error::invalid("kappa", format!("must be finite and > 0, got {kappa}")));
    }
    check_analysis(analysis, f)?;
    let full = expected_positive_part(prior);
    Ok(if kappa <= analysis.x_star {
        full - kappa * analysis.ratio_at_x_star
    } else {
        full - f.value(kappa)?
    })
}
