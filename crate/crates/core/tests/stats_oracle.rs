use capnet::profiles::{filter_profiles, generate_synthetic_profiles, GeneratorConfig, Phase};
use capnet::stats::{
    classify_correlation, correlation_matrix, ks_distance_uniform, pearson, permutation_test, CorrelationMatrix,
    CorrelationStrength, SquareTable,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Textbook two-pass formula.
fn two_pass(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

#[test]
fn pearson_matches_two_pass_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let n = rng.random_range(2..200);
        let x = normal_vec(&mut rng, n);
        let y: Vec<f64> = x.iter().map(|v| v * rng.random_range(-1.0..1.0) + rng.sample::<f64, _>(StandardNormal)).collect();
        let r = pearson(&x, &y).unwrap();
        assert!((r - two_pass(&x, &y)).abs() < 1e-12);
    }
}

#[test]
fn perfect_correlation_hits_the_floor() {
    let x: Vec<f64> = (0..476).map(|i| (i % 7) as f64).collect();
    let res = permutation_test(&x, &x, 10_000, 3).unwrap();
    assert_eq!(res.exceedances, 0);
    assert_eq!(res.p_value, 1.0 / 10_001.0);
}

#[test]
fn null_p_values_are_roughly_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let ps: Vec<f64> = (0..200)
        .map(|trial| {
            let x = normal_vec(&mut rng, 476);
            let y = normal_vec(&mut rng, 476);
            permutation_test(&x, &y, 999, trial).unwrap().p_value
        })
        .collect();
    let d = ks_distance_uniform(&ps);
    assert!(d < 0.15, "KS distance {d}");
}

#[test]
fn dependent_pair_is_significant() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = normal_vec(&mut rng, 476);
    let y: Vec<f64> = x.iter().map(|v| 0.6 * v + 0.8 * rng.sample::<f64, _>(StandardNormal)).collect();
    let res = permutation_test(&x, &y, 10_000, 1).unwrap();
    assert!(res.p_value <= 0.0002, "{res:?}");
}

#[test]
fn ks_distance_examples() {
    assert!((ks_distance_uniform(&[0.5]) - 0.5).abs() < 1e-12);
    let grid: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
    assert!((ks_distance_uniform(&grid) - 0.005).abs() < 1e-12);
}

#[test]
fn matrix_on_generated_data_matches_pairwise_oracle() {
    let config = GeneratorConfig { count: 120, ..GeneratorConfig::default() };
    let data = generate_synthetic_profiles(&config, 2).unwrap().with_phase(Phase::PreRehab);
    let ids = config.ids[..6].to_vec();
    let complete = filter_profiles(&data, &ids, 0.0);
    assert!(complete.len() > 100);
    let m = correlation_matrix(&complete, &ids).unwrap();
    assert!(m.table.is_symmetric());
    let rows = complete.profiles();
    for a in &ids {
        for b in &ids {
            let x: Vec<f64> = rows.iter().map(|p| p.get(a).unwrap().value() as f64).collect();
            let y: Vec<f64> = rows.iter().map(|p| p.get(b).unwrap().value() as f64).collect();
            let got = m.get(a, b).unwrap();
            assert!((got - two_pass(&x, &y)).abs() < 1e-12, "{a} {b}");
        }
    }
}

#[test]
fn reference_fixture_round_trips() {
    let m = CorrelationMatrix::reference();
    let text = m.table.to_csv_string();
    let again = SquareTable::read_csv(text.as_bytes()).unwrap();
    assert_eq!(again, m.table);
}

proptest! {
    #[test]
    fn pearson_is_bounded_and_symmetric(
        xs in prop::collection::vec(-100.0f64..100.0, 3..60),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ys: Vec<f64> = xs.iter().map(|_| rng.random_range(-5.0..5.0)).collect();
        prop_assume!(xs.iter().any(|v| *v != xs[0]));
        let r = pearson(&xs, &ys).unwrap();
        prop_assert!((-1.0..=1.0).contains(&r));
        prop_assert_eq!(r, pearson(&ys, &xs).unwrap());
        let scaled: Vec<f64> = xs.iter().map(|v| 3.0 * v + 1.0).collect();
        prop_assert!((pearson(&scaled, &ys).unwrap() - r).abs() < 1e-9);
    }

    #[test]
    fn classification_boundaries(r in -1.0f64..=1.0) {
        let want = if r.abs() >= 0.8 {
            CorrelationStrength::Strong
        } else if r.abs() >= 0.4 {
            CorrelationStrength::Moderate
        } else {
            CorrelationStrength::Weak
        };
        prop_assert_eq!(classify_correlation(r), want);
    }

    #[test]
    fn p_values_lie_in_range(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = normal_vec(&mut rng, 30);
        let y = normal_vec(&mut rng, 30);
        let res = permutation_test(&x, &y, 99, seed).unwrap();
        prop_assert!(res.p_value >= 1.0 / 100.0 && res.p_value <= 1.0);
        prop_assert_eq!(res, permutation_test(&x, &y, 99, seed).unwrap());
    }
}
