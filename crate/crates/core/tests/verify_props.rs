use cmbp::engine::McConfig;
use cmbp::limit::gamma_marginal;
use cmbp::model::presets::{self, Preset};
use cmbp::model::Model;
use cmbp::verify::{ks_against_marginal, ks_test, lindeberg_diagnostic, marginal_convergence, relative_frequency_check};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma};

fn promiscuous() -> Model {
    let p = Preset::defaults().into_iter().find(|p| p.name() == "two_sex_promiscuous").unwrap();
    Model::new(p.build().unwrap()).unwrap()
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn ks_statistic_ignores_monotone_maps(seed in any::<u64>(), n in 1usize..300) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<f64> = (0..n).map(|_| Exp1.sample(&mut rng)).collect();
        let exp_cdf = |x: f64| if x <= 0.0 { 0.0 } else { 1.0 - (-x).exp() };
        let direct = ks_test(&xs, exp_cdf).unwrap();
        // y = ln x, with cdf F(e^y)
        let logs: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
        let mapped = ks_test(&logs, |y| exp_cdf(y.exp())).unwrap();
        prop_assert!((direct.statistic - mapped.statistic).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&direct.p_value));
    }
}

#[test]
fn exact_exponential_draws_are_accepted() {
    let exp_cdf = |x: f64| if x <= 0.0 { 0.0 } else { 1.0 - (-x).exp() };
    let mut low = 0;
    for seed in 0..1000 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<f64> = (0..10_000).map(|_| Exp1.sample(&mut rng)).collect();
        if ks_test(&xs, exp_cdf).unwrap().p_value <= 0.001 {
            low += 1;
        }
    }
    assert!(low <= 1, "{low} of 1000 seeds fell to p ≤ 0.001");
}

#[test]
fn uniform_draws_are_rejected_as_exponential() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let xs: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
    let r = ks_test(&xs, |x| if x <= 0.0 { 0.0 } else { 1.0 - (-x).exp() }).unwrap();
    assert!(r.p_value < 1e-6);
}

#[test]
fn gamma_samples_reject_at_nominal_rate() {
    // shape 2, rate 1: the promiscuous preset's limit law at t = 1
    let target = gamma_marginal(2.0, 2.0, 1.0).unwrap();
    let law = Gamma::new(2.0, 1.0).unwrap();
    let level = 0.01;
    let rejections = (0..500)
        .filter(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let xs: Vec<f64> = (0..2000).map(|_| law.sample(&mut rng)).collect();
            ks_against_marginal(&xs, &target).unwrap().p_value <= level
        })
        .count();
    assert!(rejections as f64 <= 2.0 * level * 500.0, "{rejections} rejections out of 500");
}

#[test]
fn distance_shrinks_with_scale() {
    let m = promiscuous();
    let stat = |n, seed| {
        marginal_convergence(&m, n, 1.0, &McConfig::new(0, 1000, seed))
            .unwrap()
            .ks
            .unwrap()
            .statistic
    };
    let coarse = median((0..20).map(|s| stat(10, s)).collect());
    let fine = median((0..20).map(|s| stat(500, s)).collect());
    println!("median KS distance: n = 10 {coarse:.4}, n = 500 {fine:.4}");
    assert!(coarse > fine);
}

#[test]
fn lindeberg_sum_shrinks_with_scale() {
    let m = promiscuous();
    let at = |n, seed| lindeberg_diagnostic(&m, n, 1.0, 0.2, &McConfig::new(0, 200, seed)).unwrap();
    let small = median((0..10).map(|s| at(50, s)).collect());
    let large = median((0..10).map(|s| at(200, s)).collect());
    println!("median Lindeberg sum: n = 50 {small:.5}, n = 200 {large:.5}");
    assert!(large < small);
    assert_eq!(at(50, 0).min(lindeberg_diagnostic(&m, 50, 1.0, 1e12, &McConfig::new(0, 50, 0)).unwrap()), 0.0);
}

#[test]
fn promiscuous_types_balance() {
    let m = promiscuous();
    let r = relative_frequency_check(&m, 500, 1.0, &McConfig::new(0, 500, 3), 0, 1, 0.2).unwrap();
    assert!((r.target - 1.0).abs() < 1e-12);
    assert!(r.ratio_within >= 0.9, "{r:?}");
    assert!((r.share_target - 0.5).abs() < 1e-12);
}

#[test]
fn selffert_share_follows_offspring_means() {
    let m = Model::new(presets::two_sex_selffert_poisson(0.3, 0.7, 2.5, 2.5)).unwrap();
    let r = relative_frequency_check(&m, 300, 1.0, &McConfig::new(0, 300, 4), 0, 1, 0.05).unwrap();
    assert!((r.share_target - 0.3).abs() < 1e-12);
    assert!((r.mean_share - 0.3).abs() < 0.02);
}

#[test]
fn empty_generations_count_as_zero() {
    // rare immigration lets the population hit zero early on
    let m = Model::new(presets::two_sex_selffert_poisson(0.3, 0.7, 0.05, 0.05)).unwrap();
    let r = relative_frequency_check(&m, 4, 1.0, &McConfig::new(0, 2000, 6), 0, 1, 0.05).unwrap();
    assert!(r.nonextinct < r.completed, "no empty generation was produced");
    assert!(r.mean_ratio.is_finite() && r.mean_share.is_finite());
    assert!(r.ratio_within.is_finite() && r.share_within.is_finite());
}
