use std::sync::Arc;

use leanexp::normal;
use leanexp::*;
use proptest::prelude::*;

fn gaussian() -> impl Strategy<Value = GaussianPrior> {
    (-2.0..1.0f64, 0.1..3.0f64).prop_map(|(m, t)| GaussianPrior::new(m, t).unwrap())
}

fn negative_gaussian() -> impl Strategy<Value = GaussianPrior> {
    (-2.0..-0.01f64, 0.1..3.0f64).prop_map(|(m, t)| GaussianPrior::new(m, t).unwrap())
}

fn discrete() -> impl Strategy<Value = DiscretePrior> {
    prop::collection::vec((-3.0..2.0f64, 0.05..1.0f64), 1..6).prop_map(|a| DiscretePrior::normalized(a).unwrap())
}

fn prior() -> impl Strategy<Value = Prior> {
    prop_oneof![gaussian().prop_map(Prior::from), discrete().prop_map(Prior::from)]
}

fn noise() -> impl Strategy<Value = NoiseModel> {
    (0.1..20.0f64).prop_map(|s| NoiseModel::new(s).unwrap())
}

fn allocation() -> impl Strategy<Value = f64> {
    (0.0..7.0f64).prop_map(|e| 10f64.powf(e).round().max(1.0))
}

fn utility_for(prior: &Prior, kind: u8, param: f64) -> Utility {
    match kind % 4 {
        0 => Utility::Linear,
        1 => Utility::loss_averse(param * 5.0).unwrap(),
        2 => Utility::custom_for_prior(Arc::new(move |x: f64| x + param * x.tanh()), prior).unwrap(),
        _ => {
            let g = 0.2 + param;
            Utility::custom_for_prior(Arc::new(move |x: f64| (1.0 - (-g * x).exp()) / g), prior).unwrap()
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn posterior_expectation_is_monotone(
        p in prior(), s in noise(), n in allocation(), kind in 0u8..4, param in 0.0..1.0f64,
        a in -3.0..3.0f64, b in -3.0..3.0f64,
    ) {
        let u = utility_for(&p, kind, param);
        let (m, sd) = p.marginal_moments(s, n);
        let (x1, x2) = if a <= b { (m + a * sd, m + b * sd) } else { (m + b * sd, m + a * sd) };
        let e1 = posterior_expected_utility(&p, s, n, x1, &u).unwrap();
        let e2 = posterior_expected_utility(&p, s, n, x2, &u).unwrap();
        prop_assert!(e1 <= e2 + 1e-9, "{e1} > {e2}");
    }

    #[test]
    fn hermite_route_matches_conjugate_closed_form(
        g in gaussian(), s in noise(), n in allocation(), z in -4.0..4.0f64,
    ) {
        let p: Prior = g.into();
        let (m, sd) = p.marginal_moments(s, n);
        let x = m + z * sd;
        let closed = posterior_expected_utility(&p, s, n, x, &Utility::Linear).unwrap();
        let custom = Utility::custom_for_prior(Arc::new(|x: f64| x), &p).unwrap();
        let quad = posterior_expected_utility(&p, s, n, x, &custom).unwrap();
        prop_assert!((quad - closed).abs() <= 1e-8 * (1.0 + closed.abs()));
    }

    #[test]
    fn prior_fit_ignores_record_order(
        recs in prop::collection::vec((-2.0..2.0f64, 1u64..10_000), 2..40), rot in 0usize..40,
    ) {
        let records: Vec<ExperimentRecord> = recs.iter().map(|&(d, n)| ExperimentRecord::new(d, n).unwrap()).collect();
        let mut shuffled = records.clone();
        shuffled.reverse();
        let k = rot % shuffled.len();
        shuffled.rotate_left(k);
        let noise = NoiseModel::new(1.0).unwrap();
        let a = fit_gaussian_mle(&records, noise).unwrap();
        let b = fit_gaussian_mle(&shuffled, noise).unwrap();
        prop_assert_eq!(a.mu, b.mu);
        prop_assert_eq!(a.tau2, b.tau2);
        prop_assert_eq!(a.se_mu, b.se_mu);
    }

    #[test]
    fn full_information_bounds(p in prior()) {
        prop_assert!(expected_positive_part(&p) >= p.mean().max(0.0) - 1e-15);
    }

    #[test]
    fn production_increases_with_data(g in gaussian(), s in noise(), n in allocation(), cost in 0.0..1.0f64) {
        let h = ProductionHandle::new(g, s, Utility::Linear, CostModel::new(cost, TestingCost::Zero).unwrap());
        let a = h.value(n).unwrap();
        let b = h.value(n * 2.0).unwrap();
        prop_assert!(b >= a - 1e-12 * a.abs());
        prop_assert!(b <= expected_positive_part(&g.into()) + cost + 1e-12);
    }

    #[test]
    fn optimal_rule_beats_significance_rule(p in prior(), s in noise(), n in allocation(), z in -1.0..4.0f64) {
        let h = ProductionHandle::linear(p.clone(), s);
        let opt = production_generic(&h, n, 64).unwrap().value;
        let pv = production_pvalue_rule(&p, s, n, z).unwrap();
        prop_assert!(opt >= pv - 1e-8, "{opt} < {pv}");
    }

    #[test]
    fn x_star_dominates_sampled_ratios(g in negative_gaussian(), s in 0.5..20.0f64) {
        let h = ProductionHandle::linear(g, NoiseModel::new(s).unwrap());
        let a = find_x_star(&h, 1e10).unwrap();
        prop_assert!(a.x_star >= a.x_hat);
        for k in 0..40 {
            let x = 10f64.powf(k as f64 * 0.25);
            prop_assert!(a.ratio_at_x_star >= h.value(x).unwrap() / x * (1.0 - 1e-9));
        }
    }

    #[test]
    fn threshold_representations_agree(c in -5.0..5.0f64, s in noise(), n in allocation()) {
        let t = DecisionThreshold::from_cutoff(c, s, n);
        let back = DecisionThreshold::from_t(t.t_statistic, s, n);
        prop_assert!((back.cutoff_delta_hat - c).abs() <= 1e-12 * (1.0 + c.abs()));
        prop_assert!((0.0..=1.0).contains(&t.one_sided_alpha));
        // Above 0.5, α carries too few digits of 1 − α to pin down t.
        if t.one_sided_alpha > 1e-300 && t.one_sided_alpha <= 0.5 {
            let again = DecisionThreshold::from_alpha(t.one_sided_alpha, s, n).unwrap();
            prop_assert!((again.t_statistic - t.t_statistic).abs() <= 1e-12 * (1.0 + t.t_statistic.abs()));
        }
    }

    #[test]
    fn optimal_alpha_rises_with_n(g in negative_gaussian(), s in noise(), n in 1.0..1e6f64) {
        let a = optimal_threshold_gaussian_linear(&g, s, n.round()).unwrap().one_sided_alpha;
        let b = optimal_threshold_gaussian_linear(&g, s, n.round() * 2.0).unwrap().one_sided_alpha;
        prop_assert!(a >= 0.0 && a < 0.5);
        prop_assert!(b >= a);
    }

    #[test]
    fn minimax_risk_is_symmetric_and_decreasing(mut ns in prop::collection::vec(1u64..1000, 1..8), pick in 0usize..8) {
        let noise = NoiseModel::new(1.0).unwrap();
        let r = minimax_risk(&ns, noise).unwrap();
        let mut rev = ns.clone();
        rev.reverse();
        prop_assert!((minimax_risk(&rev, noise).unwrap() - r).abs() <= 1e-12 * r);
        let k = pick % ns.len();
        ns[k] += 1;
        prop_assert!(minimax_risk(&ns, noise).unwrap() < r);
    }

    #[test]
    fn dp_value_monotone(g in gaussian(), s in noise(), ideas in 1u64..6, pool in 1u64..40) {
        let h = ProductionHandle::linear(g, s);
        let base = solve_dp(&AllocationProblem::new(ideas, pool, 1).unwrap(), &h).unwrap().value;
        let more_units = solve_dp(&AllocationProblem::new(ideas, pool + 1, 1).unwrap(), &h).unwrap().value;
        let more_ideas = solve_dp(&AllocationProblem::new(ideas + 1, pool, 1).unwrap(), &h).unwrap().value;
        prop_assert!(more_units >= base - 1e-12);
        prop_assert!(more_ideas >= base - 1e-12);
    }

    #[test]
    fn metaproduction_shape(g in negative_gaussian(), s in 1.0..20.0f64) {
        let h = ProductionHandle::linear(g, NoiseModel::new(s).unwrap());
        let a = find_x_star(&h, 1e10).unwrap();
        let pool = 50.0 * a.x_star;
        let mut prev = f64::NEG_INFINITY;
        for i in 1..=120 {
            let v = metaproduction_closed(i as f64, pool, &a, &h).unwrap().value;
            prop_assert!(v >= prev - 1e-12 * v.abs());
            if i as f64 >= pool / a.x_star {
                prop_assert!((v - pool * a.ratio_at_x_star).abs() <= 1e-12 * v.abs());
            }
            prev = v;
        }
        let mut prev = f64::NEG_INFINITY;
        for k in 0..60 {
            let n = a.x_star * 10f64.powf(-2.0 + k as f64 * 0.1);
            let v = metaproduction_closed(10.0, n, &a, &h).unwrap().value;
            prop_assert!(v >= prev - 1e-12 * v.abs());
            prev = v;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn shared_allocation_beats_random_splits(
        m1 in -1.0..0.0f64, m2 in -1.0..0.0f64, i1 in 1u64..4, i2 in 1u64..4, split in 0u64..=30,
    ) {
        let programs = [
            ProgramSpec { name: "a".into(), prior: GaussianPrior::new(m1, 1.0).unwrap().into(), sigma: 2.0, ideas: i1, pool: 0, weight: 1.0 },
            ProgramSpec { name: "b".into(), prior: GaussianPrior::new(m2, 1.0).unwrap().into(), sigma: 2.0, ideas: i2, pool: 0, weight: 1.0 },
        ];
        let s = solve_shared_allocation(&programs, 30, 1).unwrap();
        let f = |p: &ProgramSpec, n: u64| -> f64 {
            if n == 0 { return 0.0 }
            solve_dp(&AllocationProblem::new(p.ideas, n, 1).unwrap(), &p.production().unwrap()).unwrap().value
        };
        let hand = f(&programs[0], split) + f(&programs[1], 30 - split);
        prop_assert!(s.value >= hand - 1e-12);
        let bigger = solve_shared_allocation(&programs, 31, 1).unwrap();
        prop_assert!(bigger.value >= s.value - 1e-12);
    }

    #[test]
    fn weights_scale_the_optimum(m1 in -1.0..0.0f64, m2 in -1.0..0.0f64, lambda in 0.1..10.0f64, ideas in 0u64..12) {
        let mk = |w: f64| vec![
            ProgramSpec { name: "a".into(), prior: GaussianPrior::new(m1, 1.0).unwrap().into(), sigma: 3.0, ideas: 0, pool: 400, weight: w },
            ProgramSpec { name: "b".into(), prior: GaussianPrior::new(m2, 1.0).unwrap().into(), sigma: 3.0, ideas: 0, pool: 900, weight: 2.0 * w },
        ];
        let base = solve_shared_ideas(&mk(1.0), ideas).unwrap();
        let scaled = solve_shared_ideas(&mk(lambda), ideas).unwrap();
        prop_assert!((scaled.value - lambda * base.value).abs() <= 1e-9 * (1.0 + scaled.value.abs()));
        let reval: f64 = scaled.program_values.iter().zip([lambda, 2.0 * lambda]).map(|(v, w)| v * w).sum();
        prop_assert!((reval - scaled.value).abs() <= 1e-9 * (1.0 + reval.abs()));
        let more = solve_shared_ideas(&mk(1.0), ideas + 1).unwrap();
        prop_assert!(more.value >= base.value - 1e-12);
        let with_idle = {
            let mut v = mk(1.0);
            v.push(ProgramSpec { name: "idle".into(), prior: GaussianPrior::new(0.0, 1.0).unwrap().into(), sigma: 3.0, ideas: 0, pool: 0, weight: 1.0 });
            solve_shared_ideas(&v, ideas).unwrap()
        };
        prop_assert_eq!(with_idle.value, base.value);
    }

    #[test]
    fn sequential_monotone_in_horizon_and_ideas(mu in -1.0..0.0f64, ideas in 0u64..30, periods in 1usize..5) {
        let p = ProgramSpec { name: "p".into(), prior: GaussianPrior::new(mu, 1.0).unwrap().into(), sigma: 5.0, ideas: 0, pool: 0, weight: 1.0 };
        let w: Vec<f64> = (0..periods).map(|t| (periods - t) as f64).collect();
        let s = solve_sequential(&p, 2_000, ideas, &w).unwrap();
        prop_assert!(s.ideas_per_period.iter().sum::<u64>() <= ideas);
        let mut longer = w.clone();
        longer.push(0.5);
        prop_assert!(solve_sequential(&p, 2_000, ideas, &longer).unwrap().value >= s.value - 1e-12);
        prop_assert!(solve_sequential(&p, 2_000, ideas + 1, &w).unwrap().value >= s.value - 1e-12);
        prop_assert!(solve_sequential(&p, 2_500, ideas, &w).unwrap().value >= s.value - 1e-12);
    }

    #[test]
    fn exclusive_value_is_non_negative(mu in -2.0..0.5f64, i0 in 1u64..50) {
        let g = GaussianPrior::new(mu, 1.0).unwrap();
        let v = exclusive_value_quadrature(&g, NoiseModel::new(2.0).unwrap(), 100, i0).unwrap();
        prop_assert!(v.value >= 0.0);
    }
}

#[test]
fn comparative_statics() {
    let noise = NoiseModel::new(3.0).unwrap();
    for n in [10.0, 1e3, 1e5] {
        let mut prev = f64::NEG_INFINITY;
        for mu in [-2.0, -1.0, -0.5, -0.1] {
            let v = production_gaussian_linear(&GaussianPrior::new(mu, 1.0).unwrap(), noise, n);
            assert!(v > prev);
            prev = v;
        }
        let mut prev = f64::NEG_INFINITY;
        for tau in [0.5, 1.0, 2.0, 4.0] {
            let v = production_gaussian_linear(&GaussianPrior::new(-0.5, tau).unwrap(), noise, n);
            assert!(v > prev);
            prev = v;
        }
    }
}

#[test]
fn monte_carlo_scans_are_reproducible() {
    let g = GaussianPrior::new(0.0, 1.0).unwrap();
    let s = NoiseModel::new(10.0).unwrap();
    let a = optimize_i0(&g, s, 10_000, 200, ExclusiveMethod::MonteCarlo, 4_000, 5).unwrap();
    let b = optimize_i0(&g, s, 10_000, 200, ExclusiveMethod::MonteCarlo, 4_000, 5).unwrap();
    assert_eq!(a, b);
}

#[test]
fn expected_positive_part_matches_closed_form() {
    let p: Prior = GaussianPrior::new(0.0, 1.0).unwrap().into();
    assert!((expected_positive_part(&p) - normal::FRAC_1_SQRT_2PI).abs() < 1e-15);
}
