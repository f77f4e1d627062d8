use nalgebra::DMatrix;
use proptest::prelude::*;

use fcpd::covariance::lag_cov;
use fcpd::critval::kolmogorov_quantile;
use fcpd::cusum::{
    argmax_partial_sum, cusum_stat, cusum_stat_aligned, cusum_stat_operator_form, CusumConfig,
    Estimator,
};
use fcpd::datagen::{
    brownian_paths, figure2_trend, inject_change, scenario, scenario_trend, ScenarioId, BM_GRID,
};
use fcpd::hilbert::{BasisDescriptor, FunctionalSample};
use fcpd::oracle::{drift_sup, drift_sup_location};
use fcpd::spectral::eig_sym;
use fcpd::study::{component_table, ComponentLabel};

fn sample_strategy() -> impl Strategy<Value = FunctionalSample> {
    (10usize..40, 1usize..6).prop_flat_map(|(n, p)| {
        prop::collection::vec(-5.0f64..5.0, n * p).prop_map(move |v| {
            FunctionalSample::new(
                DMatrix::from_row_slice(n, p, &v),
                BasisDescriptor::fourier(p).unwrap(),
            )
            .unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn statistic_is_scale_invariant(sample in sample_strategy(), c in 0.01f64..100.0) {
        let cfg = CusumConfig::new(1);
        let a = cusum_stat(&sample, &cfg).unwrap().statistic;
        let b = cusum_stat(&sample.scaled(c).unwrap(), &cfg).unwrap().statistic;
        if !a.is_infinite() && !b.is_infinite() {
            let (a, b) = (a.value(), b.value());
            prop_assert!((a - b).abs() <= 1e-8 * (1.0 + a));
        }
    }

    #[test]
    fn routes_agree(sample in sample_strategy(), d in 1usize..4, bartlett in any::<bool>()) {
        let d = d.min(sample.p());
        let est = if bartlett { Estimator::Bartlett } else { Estimator::Cov0 };
        let cfg = CusumConfig::new(d).estimator(est);
        let a = cusum_stat(&sample, &cfg).unwrap();
        let b = cusum_stat_operator_form(&sample, &cfg).unwrap();
        prop_assert_eq!(a.statistic.is_infinite(), b.statistic.is_infinite());
        if !a.statistic.is_infinite() {
            let (x, y) = (a.statistic.value(), b.statistic.value());
            prop_assert!((x - y).abs() <= 1e-10 * (1.0 + x));
        }
    }

    #[test]
    fn result_invariants(sample in sample_strategy(), aligned in any::<bool>()) {
        let r = cusum_stat(&sample, &CusumConfig::new(1).aligned(aligned)).unwrap();
        prop_assert!(r.k_hat >= 1 && r.k_hat < sample.n());
        if !r.statistic.is_infinite() {
            prop_assert_eq!(r.trace.len(), sample.n() - 1);
            let max = r.trace.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(r.statistic.value(), max);
            prop_assert_eq!(r.trace[r.k_hat - 1], max);
        }
    }

    #[test]
    fn max_partial_sum_ignores_constant_shift(sample in sample_strategy(), shift in -10.0f64..10.0) {
        let curve = nalgebra::DVector::from_element(sample.p(), shift);
        let (k1, u1) = argmax_partial_sum(&sample).unwrap();
        let (k2, u2) = argmax_partial_sum(&sample.shifted(&curve).unwrap()).unwrap();
        prop_assert!((u1.norm() - u2.norm()).abs() < 1e-9);
        if (u1 - &u2).norm() < 1e-9 { prop_assert_eq!(k1, k2); }
    }
}

#[test]
fn change_location_under_mid_sample_step() {
    let hits = (0..100u64)
        .filter(|seed| {
            let sample = scenario(ScenarioId::B, 500, 9000 + seed).unwrap();
            let (k, _) = argmax_partial_sum(&sample).unwrap();
            (0.4..=0.6).contains(&(k as f64 / 500.0))
        })
        .count();
    assert!(hits >= 90, "{hits}/100");
}

#[test]
fn alignment_vanishes_under_null() {
    let cfg = CusumConfig::new(1);
    let close = (0..200u64)
        .filter(|seed| {
            let sample = scenario(ScenarioId::A, 500, 500 + seed).unwrap();
            let t = cusum_stat(&sample, &cfg).unwrap().statistic.value();
            let ta = cusum_stat_aligned(&sample, &cfg).unwrap().statistic.value();
            (t - ta).abs() <= 0.2
        })
        .count();
    assert!(close >= 190, "{close}/200");
}

#[test]
fn aligned_statistic_detects_high_order_change() {
    let crit = kolmogorov_quantile(0.10).unwrap();
    let cfg = CusumConfig::new(1);
    let (mut standard, mut aligned) = (0, 0);
    for seed in 0..200u64 {
        let sample = scenario(ScenarioId::C, 200, 3000 + seed).unwrap();
        standard += cusum_stat(&sample, &cfg).unwrap().statistic.exceeds(crit) as usize;
        aligned += cusum_stat_aligned(&sample, &cfg)
            .unwrap()
            .statistic
            .exceeds(crit) as usize;
    }
    assert!(aligned >= 190, "aligned {aligned}/200");
    assert!(standard <= 60, "standard {standard}/200");
}

#[test]
fn aligned_component_moves_toward_change() {
    let trend = figure2_trend().unwrap();
    let delta = trend.components()[0].delta.clone();
    let cfg = CusumConfig::new(1);
    let closer = (0..100u64)
        .filter(|seed| {
            let noise = brownian_paths(200, BM_GRID, 4000 + seed).unwrap();
            let sample = inject_change(&noise, &trend).unwrap();
            let table = component_table(&sample, 1, &cfg, Some(&delta)).unwrap();
            let v1 = &table.get(ComponentLabel::Index(1)).unwrap().coeffs;
            let va = &table.get(ComponentLabel::Aligned).unwrap().coeffs;
            va.dot(&delta).abs() > v1.dot(&delta).abs()
        })
        .count();
    assert!(closer >= 90, "{closer}/100");
}

#[test]
fn aligned_component_stays_near_first_component_under_null() {
    let cfg = CusumConfig::new(1);
    let near = (0..100u64)
        .filter(|seed| {
            let sample = scenario(ScenarioId::A, 200, 6000 + seed).unwrap();
            let table = component_table(&sample, 1, &cfg, None).unwrap();
            let v1 = &table.get(ComponentLabel::Index(1)).unwrap().coeffs;
            let va = &table.get(ComponentLabel::Aligned).unwrap().coeffs;
            va.dot(v1).abs() >= 0.95
        })
        .count();
    assert!(near >= 90, "{near}/100");
}

#[test]
fn largest_partial_sum_approaches_drift_supremum() {
    let trend = scenario_trend(ScenarioId::F).unwrap();
    let target = drift_sup(&trend);
    let sample = scenario(ScenarioId::F, 5000, 21).unwrap();
    let (k, u) = argmax_partial_sum(&sample).unwrap();
    assert!(
        (u.norm() - target).abs() <= 0.1 * target,
        "{} vs {target}",
        u.norm()
    );
    let (_, at) = drift_sup_location(&trend);
    assert!((k as f64 / 5000.0 - at).abs() < 0.1);
}

#[test]
fn leading_eigenvalue_of_brownian_noise() {
    let sample = brownian_paths(5000, BM_GRID, 8).unwrap();
    let c0 = lag_cov(&sample, 0).unwrap();
    let e = eig_sym(&c0).unwrap();
    // leading empirical eigenvalue near the population value 0.402 of the
    // projected Brownian covariance
    assert!((e.values[0] - 0.402).abs() < 0.05, "{}", e.values[0]);
}
