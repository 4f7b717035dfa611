//! Ship thresholds, their p-value equivalents and the minimax rule.

use std::sync::OnceLock;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{check_finite, Error, Result};
use crate::normal;
use crate::optimize::{bisect_predicate, golden_section_max};
use crate::priors::{posterior_expected_utility_with, GaussianPrior, NoiseModel, Prior, Utility};
use crate::production::{Saturation, CUTOFF_BRACKET_SDS};
use crate::quadrature::DEFAULT_HERMITE_ORDER;

/// Where the ship decision switches on the observed effect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cutoff {
    /// Ship iff `Δ̂ ≥` this value.
    At(f64),
    NeverShip,
    AlwaysShip,
}

/// Finds the cutoff `c` with `E[u(Δ) | Δ̂ = c] = cost`, bracketing over the
/// marginal mean of `Δ̂` ± 12 marginal standard deviations and bisecting to
/// machine precision.
pub fn ship_cutoff(
    prior: &Prior,
    noise: NoiseModel,
    n: f64,
    utility: &Utility,
    cost: f64,
    quad_order: usize,
) -> Result<Cutoff> {
    check_finite("cost", cost)?;
    let (m, sd) = prior.marginal_moments(noise, n);
    let lo = m - CUTOFF_BRACKET_SDS * sd;
    let hi = m + CUTOFF_BRACKET_SDS * sd;
    let gap = |x: f64| -> Result<f64> {
        Ok(posterior_expected_utility_with(prior, noise, n, x, utility, quad_order)? - cost)
    };
    if gap(lo)? >= 0.0 {
        return Ok(Cutoff::AlwaysShip);
    }
    if gap(hi)? < 0.0 {
        return Ok(Cutoff::NeverShip);
    }
    let (a, b) = bisect_predicate(
        |x| Ok(gap(x)? >= 0.0),
        lo,
        hi,
        |a, b| b - a <= f64::EPSILON * a.abs().max(b.abs()),
        200,
    )?;
    Ok(Cutoff::At(0.5 * (a + b)))
}

/// A ship rule `Δ̂ ≥ cutoff` expressed three ways: on the effect scale, as a
/// t-statistic `cutoff·√n/σ`, and as a one-sided level `α = 1 − Φ(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionThreshold {
    pub cutoff_delta_hat: f64,
    pub t_statistic: f64,
    pub one_sided_alpha: f64,
    pub saturation: Option<Saturation>,
}

impl DecisionThreshold {
    pub fn from_cutoff(cutoff: f64, noise: NoiseModel, n: f64) -> Self {
        let t = cutoff / noise.se_at(n);
        Self {
            cutoff_delta_hat: cutoff,
            t_statistic: t,
            one_sided_alpha: normal::sf(t),
            saturation: None,
        }
    }

    pub fn from_t(t: f64, noise: NoiseModel, n: f64) -> Self {
        Self {
            cutoff_delta_hat: t * noise.se_at(n),
            t_statistic: t,
            one_sided_alpha: normal::sf(t),
            saturation: None,
        }
    }

    pub fn from_alpha(alpha: f64, noise: NoiseModel, n: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::invalid("alpha", format!("must lie in [0, 1], got {alpha}")));
        }
        if alpha == 0.0 {
            return Ok(Self::saturated(Saturation::NeverShip));
        }
        if alpha == 1.0 {
            return Ok(Self::saturated(Saturation::AlwaysShip));
        }
        let t = -normal::inv_cdf(alpha);
        Ok(Self {
            cutoff_delta_hat: t * noise.se_at(n),
            t_statistic: t,
            one_sided_alpha: alpha,
            saturation: None,
        })
    }

    pub fn saturated(kind: Saturation) -> Self {
        match kind {
            Saturation::NeverShip => Self {
                cutoff_delta_hat: f64::INFINITY,
                t_statistic: f64::INFINITY,
                one_sided_alpha: 0.0,
                saturation: Some(kind),
            },
            Saturation::AlwaysShip => Self {
                cutoff_delta_hat: f64::NEG_INFINITY,
                t_statistic: f64::NEG_INFINITY,
                one_sided_alpha: 1.0,
                saturation: Some(kind),
            },
        }
    }

    fn from_search(cutoff: Cutoff, noise: NoiseModel, n: f64) -> Self {
        match cutoff {
            Cutoff::At(c) => Self::from_cutoff(c, noise, n),
            Cutoff::NeverShip => Self::saturated(Saturation::NeverShip),
            Cutoff::AlwaysShip => Self::saturated(Saturation::AlwaysShip),
        }
    }

    /// Whether an observed effect clears the threshold.
    pub fn ships(&self, delta_hat: f64) -> bool {
        delta_hat >= self.cutoff_delta_hat
    }
}

impl Serialize for DecisionThreshold {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let finite = |x: f64| x.is_finite().then_some(x);
        let mut st = serializer.serialize_struct("DecisionThreshold", 4)?;
        st.serialize_field("cutoff_delta_hat", &finite(self.cutoff_delta_hat))?;
        st.serialize_field("t_statistic", &finite(self.t_statistic))?;
        st.serialize_field("one_sided_alpha", &self.one_sided_alpha)?;
        st.serialize_field("saturation", &self.saturation)?;
        st.end()
    }
}

fn check_n(n: f64) -> Result<()> {
    if n >= 1.0 && n.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("n", format!("must be at least 1, got {n}")))
    }
}

/// Optimal threshold for a Gaussian prior and linear utility with no cost:
/// ship iff `Δ̂ ≥ −μσ²/(nτ²)`.
pub fn optimal_threshold_gaussian_linear(prior: &GaussianPrior, noise: NoiseModel, n: f64) -> Result<DecisionThreshold> {
    check_n(n)?;
    let t = -prior.mu() * noise.sigma() / (prior.variance() * n.sqrt());
    let cutoff = -prior.mu() * noise.variance_at(n) / prior.variance();
    Ok(DecisionThreshold {
        cutoff_delta_hat: cutoff,
        t_statistic: t,
        one_sided_alpha: normal::sf(t),
        saturation: None,
    })
}

/// Optimal threshold for any prior, utility and implementation cost `s`.
pub fn optimal_threshold_generic(
    prior: &Prior,
    noise: NoiseModel,
    n: f64,
    utility: &Utility,
    cost: f64,
) -> Result<DecisionThreshold> {
    check_n(n)?;
    let cutoff = ship_cutoff(prior, noise, n, utility, cost, DEFAULT_HERMITE_ORDER)?;
    Ok(DecisionThreshold::from_search(cutoff, noise, n))
}

/// Probability that a test passes the optimal linear-utility threshold:
/// `Φ((μ/τ²)·√(τ² + σ²/n))`.
pub fn pass_probability(prior: &GaussianPrior, noise: NoiseModel, n: f64) -> Result<f64> {
    check_n(n)?;
    let v = prior.variance() + noise.variance_at(n);
    Ok(normal::cdf(prior.mu() / prior.variance() * v.sqrt()))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("target_alpha", format!("must lie in (0, 1), got {alpha}")))
    }
}

/// Implementation cost `s` under which the optimal linear-utility rule has
/// one-sided level `target_alpha`.
pub fn implied_cost_for_alpha(prior: &GaussianPrior, noise: NoiseModel, n: f64, target_alpha: f64) -> Result<f64> {
    check_n(n)?;
    check_alpha(target_alpha)?;
    let cutoff = -normal::inv_cdf(target_alpha) * noise.se_at(n);
    let t2 = prior.variance();
    let e2 = noise.variance_at(n);
    Ok(cutoff * (t2 / (t2 + e2)) + prior.mu() * (e2 / (t2 + e2)))
}

pub const IMPLIED_B_MAX: f64 = 1e6;

/// Loss-aversion coefficient `b` whose optimal rule has one-sided level
/// `target_alpha`. Stricter levels than the `b = 0` rule are attainable up to
/// `b = 10⁶`.
pub fn implied_b_for_alpha(prior: &GaussianPrior, noise: NoiseModel, n: f64, target_alpha: f64) -> Result<f64> {
    check_n(n)?;
    check_alpha(target_alpha)?;
    let p = Prior::Gaussian(*prior);
    let alpha_at = |b: f64| -> Result<f64> {
        let u = Utility::loss_averse(b)?;
        Ok(optimal_threshold_generic(&p, noise, n, &u, 0.0)?.one_sided_alpha)
    };
    let alpha0 = alpha_at(0.0)?;
    if target_alpha == alpha0 {
        return Ok(0.0);
    }
    let unattainable = |lo: f64| Error::Unattainable {
        target: target_alpha,
        lo,
        hi: alpha0,
    };
    if target_alpha > alpha0 {
        return Err(unattainable(alpha_at(IMPLIED_B_MAX)?));
    }
    let mut b_hi = 1.0;
    while alpha_at(b_hi)? > target_alpha {
        if b_hi >= IMPLIED_B_MAX {
            return Err(unattainable(alpha_at(IMPLIED_B_MAX)?));
        }
        b_hi = (b_hi * 2.0).min(IMPLIED_B_MAX);
    }
    let (a, b) = bisect_predicate(
        |b| Ok(alpha_at(b)? <= target_alpha),
        0.0,
        b_hi,
        |a, b| b - a <= 1e-10 * b,
        400,
    )?;
    Ok(0.5 * (a + b))
}

/// Minimax ship rule: ship iff `Δ̂ ≥ 0`.
pub fn minimax_rule(delta_hat: f64) -> bool {
    delta_hat >= 0.0
}

/// `(C, ν*)` with `C = max_{ν>0} ν(1 − Φ(ν))`.
pub fn minimax_constant() -> (f64, f64) {
    static CONSTANT: OnceLock<(f64, f64)> = OnceLock::new();
    *CONSTANT.get_or_init(|| {
        let m = golden_section_max(|v| Ok(v * normal::sf(v)), 0.0, 5.0, |_| 1e-10, 500)
            .expect("objective is total");
        (m.value, m.x)
    })
}

/// Worst-case regret of the minimax rule, `Σ C·σ/√nᵢ`.
pub fn minimax_risk(allocations: &[u64], noise: NoiseModel) -> Result<f64> {
    let (c, _) = minimax_constant();
    let mut total = 0.0;
    for (index, &n) in allocations.iter().enumerate() {
        if n == 0 {
            return Err(Error::InfiniteRisk { index });
        }
        total += c * noise.se_at(n as f64);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::priors::DiscretePrior;

    fn gp(mu: f64, tau: f64) -> GaussianPrior {
        GaussianPrior::new(mu, tau).unwrap()
    }

    fn nm(s: f64) -> NoiseModel {
        NoiseModel::new(s).unwrap()
    }

    #[test]
    fn closed_form_examples() {
        let t = optimal_threshold_gaussian_linear(&gp(0.0, 1.0), nm(1.0), 5.0).unwrap();
        assert_eq!(t.one_sided_alpha, 0.5);
        let t = optimal_threshold_gaussian_linear(&gp(-1.0, 1.0), nm(1.0), 1.0).unwrap();
        assert_eq!(t.cutoff_delta_hat, 1.0);
        assert_eq!(t.t_statistic, 1.0);
        assert!((t.one_sided_alpha - 0.158_655_253_931_457_05).abs() < 1e-15);
        let mut prev = 0.0;
        for n in [1.0, 10.0, 100.0, 1e4, 1e6] {
            let a = optimal_threshold_gaussian_linear(&gp(-0.3, 1.0), nm(2.0), n).unwrap().one_sided_alpha;
            assert!(a > prev && a < 0.5);
            prev = a;
        }
    }

    #[test]
    fn generic_matches_closed_form() {
        for (mu, tau, sigma, n) in [(-1.0, 1.0, 1.0, 1.0), (-0.2, 0.5, 3.0, 40.0), (0.4, 2.0, 10.0, 1e5)] {
            let g = gp(mu, tau);
            let a = optimal_threshold_gaussian_linear(&g, nm(sigma), n).unwrap();
            let b = optimal_threshold_generic(&g.into(), nm(sigma), n, &Utility::Linear, 0.0).unwrap();
            assert!((a.cutoff_delta_hat - b.cutoff_delta_hat).abs() < 1e-8);
        }
    }

    #[test]
    fn symmetric_discrete_prior() {
        let p = Prior::Discrete(DiscretePrior::new(vec![(-1.0, 0.5), (1.0, 0.5)]).unwrap());
        for n in [1.0, 7.0, 300.0] {
            let t = optimal_threshold_generic(&p, nm(1.0), n, &Utility::Linear, 0.0).unwrap();
            assert!(t.cutoff_delta_hat.abs() < 1e-12);
            assert!((t.one_sided_alpha - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_averse_root_matches_posterior_closed_form() {
        let g = gp(-0.2, 0.6);
        let (sigma, n, b) = (2.0, 50.0, 3.0);
        let t = optimal_threshold_generic(&g.into(), nm(sigma), n, &Utility::loss_averse(b).unwrap(), 0.0).unwrap();
        // Independent route: solve m(1 + bΦ(−m/s)) − bsφ(m/s) = 0 for the
        // posterior mean m, then invert the shrinkage map.
        let t2 = g.variance();
        let e2 = sigma * sigma / n;
        let s = (t2 * e2 / (t2 + e2)).sqrt();
        let h = |m: f64| m * (1.0 + b * normal::cdf(-m / s)) - b * s * normal::pdf(m / s);
        let (mut lo, mut hi) = (-10.0, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if h(mid) >= 0.0 {
                hi = mid
            } else {
                lo = mid
            }
        }
        let m = 0.5 * (lo + hi);
        let c = (m - g.mu() * e2 / (t2 + e2)) * (t2 + e2) / t2;
        assert!((t.cutoff_delta_hat - c).abs() < 1e-8);
    }

    #[test]
    fn saturated_thresholds() {
        let g: Prior = gp(-0.1, 0.1).into();
        let t = optimal_threshold_generic(&g, nm(1.0), 1.0, &Utility::Linear, 50.0).unwrap();
        assert_eq!(t.saturation, Some(Saturation::NeverShip));
        assert_eq!(t.one_sided_alpha, 0.0);
        let t = optimal_threshold_generic(&g, nm(1.0), 1.0, &Utility::Linear, -50.0).unwrap();
        assert_eq!(t.saturation, Some(Saturation::AlwaysShip));
        assert_eq!(t.one_sided_alpha, 1.0);
        let json = serde_json::to_string(&t).unwrap();
        assert!(json.contains("\"cutoff_delta_hat\":null"));
    }

    #[test]
    fn threshold_round_trips() {
        let noise = nm(3.0);
        for alpha in [1e-6, 0.01, 0.05, 0.3, 0.5, 0.9] {
            let t = DecisionThreshold::from_alpha(alpha, noise, 17.0).unwrap();
            let back = DecisionThreshold::from_cutoff(t.cutoff_delta_hat, noise, 17.0);
            assert!((back.one_sided_alpha - alpha).abs() < 1e-12 * alpha.max(1e-3));
            let via_t = DecisionThreshold::from_t(t.t_statistic, noise, 17.0);
            assert!((via_t.cutoff_delta_hat - t.cutoff_delta_hat).abs() < 1e-12);
        }
        assert!(DecisionThreshold::from_alpha(1.5, noise, 1.0).is_err());
    }

    #[test]
    fn pass_probability_examples() {
        assert_eq!(pass_probability(&gp(0.0, 1.0), nm(1.0), 3.0).unwrap(), 0.5);
        let p = pass_probability(&gp(-1.0, 1.0), nm(1.0), 1.0).unwrap();
        assert!((p - normal::cdf(-2f64.sqrt())).abs() < 1e-15);
        assert!((p - 0.078_649_603_525_1).abs() < 1e-10);
        let limit = pass_probability(&gp(-0.5, 2.0), nm(1.0), 1e12).unwrap();
        assert!((limit - normal::cdf(-0.25)).abs() < 1e-9);
    }

    #[test]
    fn implied_cost_round_trip() {
        let g = gp(-0.3, 0.8);
        let noise = nm(2.0);
        let n = 25.0;
        let a0 = optimal_threshold_gaussian_linear(&g, noise, n).unwrap().one_sided_alpha;
        assert!(implied_cost_for_alpha(&g, noise, n, a0).unwrap().abs() < 1e-12);
        let mut prev = f64::NEG_INFINITY;
        for alpha in [0.2, 0.1, 0.05, 0.01, 0.001] {
            let s = implied_cost_for_alpha(&g, noise, n, alpha).unwrap();
            assert!(s > prev);
            prev = s;
            let t = optimal_threshold_generic(&g.into(), noise, n, &Utility::Linear, s).unwrap();
            assert!((t.one_sided_alpha - alpha).abs() < 1e-9);
        }
    }

    #[test]
    fn implied_b_round_trip_and_monotone() {
        let g = gp(-0.3, 0.8);
        let noise = nm(2.0);
        let n = 25.0;
        let a0 = optimal_threshold_gaussian_linear(&g, noise, n).unwrap().one_sided_alpha;
        assert_eq!(implied_b_for_alpha(&g, noise, n, a0).unwrap(), 0.0);
        let mut prev = 0.0;
        for alpha in [0.2, 0.1, 0.05, 0.02] {
            assert!(alpha < a0);
            let b = implied_b_for_alpha(&g, noise, n, alpha).unwrap();
            assert!(b > prev);
            prev = b;
            let u = Utility::loss_averse(b).unwrap();
            let t = optimal_threshold_generic(&g.into(), noise, n, &u, 0.0).unwrap();
            assert!((t.one_sided_alpha - alpha).abs() < 1e-6);
        }
        assert!(matches!(implied_b_for_alpha(&g, noise, n, 0.45), Err(Error::Unattainable { .. })));
    }

    #[test]
    fn minimax_rule_examples() {
        assert!(minimax_rule(0.0));
        assert!(!minimax_rule(-1e-12));
        assert!(minimax_rule(3.5));
    }

    #[test]
    fn minimax_constant_matches_grid_scan() {
        let mut best = (0.0, 0.0);
        let mut v = 1e-5;
        while v <= 5.0 {
            let g = v * normal::sf(v);
            if g > best.0 {
                best = (g, v);
            }
            v += 1e-5;
        }
        let (c, nu) = minimax_constant();
        assert!(c >= best.0 && c - best.0 < 1e-10);
        assert!((nu - best.1).abs() < 2e-5);
        assert!((c - 0.169_971_2).abs() < 1e-7);
    }

    #[test]
    fn minimax_risk_examples() {
        let noise = nm(1.0);
        let r1 = minimax_risk(&[1], noise).unwrap();
        let r4 = minimax_risk(&[4], noise).unwrap();
        assert!((r4 - r1 / 2.0).abs() < 1e-15);
        assert!(matches!(minimax_risk(&[3, 0], noise), Err(Error::InfiniteRisk { index: 1 })));
        let equal = minimax_risk(&[3, 3, 3], noise).unwrap();
        for a in 1..=7u64 {
            for b in 1..=(8 - a) {
                let c = 9 - a - b;
                if (a, b, c) != (3, 3, 3) {
                    assert!(minimax_risk(&[a, b, c], noise).unwrap() > equal);
                }
            }
        }
    }
}
