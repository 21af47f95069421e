use edprof::metrics::{ed_from_entropy, mean_std};
use edprof::{
    ed, ed_sequence, entropy, entropy_to_perplexity, kl_from_uniform, logit_ed,
    softmax_with_temperature, zipf_ed, EdAccumulator, LogitVector, ProbDist, StdConvention,
    ZipfParams,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Frozen by direct float64 summation of `k^-1` and `p ln p` over `k = 1..150000`.
const ZIPF_ALPHA1_V150000: f64 = 0.3116964153914115;

fn random_dist(rng: &mut ChaCha8Rng, v: usize) -> Vec<f64> {
    let sparse = rng.random_bool(0.3);
    let mut w: Vec<f64> = (0..v)
        .map(|_| {
            if sparse && rng.random_bool(0.5) {
                0.0
            } else {
                -rng.random::<f64>().ln()
            }
        })
        .collect();
    if w.iter().all(|x| *x == 0.0) {
        w[0] = 1.0;
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

#[test]
fn reference_distributions() {
    for v in [2usize, 4, 1000, 152_064] {
        let u = ProbDist::<f64>::uniform(v).unwrap();
        assert!(ed(&u).abs() < 1e-12, "uniform V={v}");
        let one = ProbDist::<f64>::one_hot(v, v / 2).unwrap();
        assert!((ed(&one) - 1.0).abs() < 1e-9, "one-hot V={v}");
    }
    let half = ProbDist::new(vec![0.5f64, 0.5, 0.0, 0.0]).unwrap();
    assert!((ed(&half) - 0.5).abs() < 1e-12);
    let half32 = ProbDist::new(vec![0.5f32, 0.5, 0.0, 0.0]).unwrap();
    assert!((ed(&half32) - 0.5).abs() < 1e-12);
}

#[test]
fn ed_equals_normalized_kl_on_random_distributions() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for v in [4usize, 1000, 152_064] {
        let ln_v = (v as f64).ln();
        for _ in 0..1000 {
            let p = ProbDist::new(random_dist(&mut rng, v)).unwrap();
            let lhs = ed(&p);
            let rhs = kl_from_uniform(&p) / ln_v;
            assert!((lhs - rhs).abs() < 1e-10, "V={v}: {lhs} vs {rhs}");
        }
    }
}

#[test]
fn ed_decreases_strictly_in_temperature() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let grid = [0.25, 0.5, 1.0, 2.0, 4.0];
    for _ in 0..1000 {
        let v = rng.random_range(2..2000);
        let sigma = rng.random_range(0.1..3.0);
        let normal = Normal::new(0.0, sigma).unwrap();
        let mut z: Vec<f64> = (0..v).map(|_| normal.sample(&mut rng)).collect();
        if z.iter().all(|x| *x == z[0]) {
            z[0] += 1.0;
        }
        let logits = LogitVector::new(z.clone()).unwrap();
        let eds: Vec<f64> = grid.iter().map(|&t| logit_ed(&logits, t).unwrap()).collect();
        for w in eds.windows(2) {
            assert!(w[0] > w[1], "not strictly decreasing: {eds:?}");
        }
        let c = rng.random_range(-100.0..100.0);
        let shifted = LogitVector::new(z.iter().map(|x| x + c).collect()).unwrap();
        for &t in &grid {
            let a = logit_ed(&logits, t).unwrap();
            let b = logit_ed(&shifted, t).unwrap();
            assert!((a - b).abs() < 1e-12, "shift by {c} at T={t}: {a} vs {b}");
        }
    }
}

#[test]
fn logit_path_matches_probability_path() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let v = rng.random_range(2..500);
        let z: Vec<f64> = (0..v).map(|_| rng.random_range(-8.0..8.0)).collect();
        let logits = LogitVector::new(z).unwrap();
        for t in [0.7, 1.0, 1.3] {
            let p = softmax_with_temperature(&logits, t).unwrap();
            assert!((ed(&p) - logit_ed(&logits, t).unwrap()).abs() < 1e-12);
        }
    }
}

fn naive_zipf_ed(alpha: f64, v: usize) -> f64 {
    let mut z = 0.0;
    for k in 1..=v {
        z += (k as f64).powf(-alpha);
    }
    let mut h = 0.0;
    for k in 1..=v {
        let p = (k as f64).powf(-alpha) / z;
        h -= p * p.ln();
    }
    1.0 - h / (v as f64).ln()
}

#[test]
fn zipf_baseline() {
    for v in [2usize, 1000, 150_000] {
        assert_eq!(zipf_ed(ZipfParams::new(0.0, v).unwrap()), 0.0);
    }
    for alpha in [0.5, 1.0, 1.5] {
        for v in [1_000usize, 100_000] {
            let closed = zipf_ed(ZipfParams::new(alpha, v).unwrap());
            let naive = naive_zipf_ed(alpha, v);
            assert!((closed - naive).abs() < 1e-10, "alpha={alpha} V={v}");
        }
    }
    let got = zipf_ed(ZipfParams::new(1.0, 150_000).unwrap());
    assert!((got - ZIPF_ALPHA1_V150000).abs() < 1e-10, "{got}");
    // further frozen values from the same oracle
    let frozen = [
        (0.5, 1000, 0.034740809595836475),
        (1.0, 1000, 0.24852418424159606),
        (1.5, 100_000, 0.7244855449810715),
        (50.0, 100, 0.9999999999999931),
    ];
    for (alpha, v, want) in frozen {
        assert!((zipf_ed(ZipfParams::new(alpha, v).unwrap()) - want).abs() < 1e-10);
    }
}

#[test]
fn zipf_monotone_in_alpha() {
    let grid: Vec<f64> = (0..=30).map(|i| i as f64 * 0.1).collect();
    let eds: Vec<f64> = grid
        .iter()
        .map(|&a| zipf_ed(ZipfParams::new(a, 50_000).unwrap()))
        .collect();
    for w in eds.windows(2) {
        assert!(w[1] > w[0]);
    }
    assert!(ZipfParams::new(-0.1, 10).is_err());
    assert!(ZipfParams::new(1.0, 1).is_err());
}

#[test]
fn perplexity_relation() {
    for v in [2usize, 50, 152_064] {
        let h = entropy(&ProbDist::<f64>::uniform(v).unwrap());
        assert!((entropy_to_perplexity(h).unwrap() - v as f64).abs() < 1e-6 * v as f64);
    }
    assert_eq!(entropy_to_perplexity(0.0).unwrap(), 1.0);
    assert!(entropy_to_perplexity(-1.0).is_err());
}

#[test]
fn streaming_accumulator_matches_batch() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let dists: Vec<ProbDist<f64>> = (0..64)
        .map(|_| ProbDist::new(random_dist(&mut rng, 50)).unwrap())
        .collect();
    let batch = ed_sequence(&dists, StdConvention::Sample).unwrap();
    let mut acc = EdAccumulator::new();
    for (d, e) in dists.iter().zip(&batch.per_position_ed) {
        acc.push(*e, entropy(d));
    }
    assert!((acc.mean().unwrap() - batch.ed_mean).abs() < 1e-12);
    assert!((acc.std(StdConvention::Sample).unwrap() - batch.ed_std).abs() < 1e-12);
    let pop = mean_std(&batch.per_position_ed, StdConvention::Population).1;
    assert!((acc.std(StdConvention::Population).unwrap() - pop).abs() < 1e-12);
    // Durbin–Watson of the centred series
    let m = batch.ed_mean;
    let c: Vec<f64> = batch.per_position_ed.iter().map(|x| x - m).collect();
    let dw = c.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>()
        / c.iter().map(|x| x * x).sum::<f64>();
    assert!((acc.durbin_watson().unwrap() - dw).abs() < 1e-9);
}

fn dist_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, 2..300).prop_filter_map("zero mass", |w| {
        let t: f64 = w.iter().sum();
        (t > 0.0).then(|| w.iter().map(|x| x / t).collect())
    })
}

proptest! {
    #[test]
    fn ed_in_unit_interval_and_permutation_invariant(p in dist_strategy()) {
        let d = ProbDist::new(p.clone()).unwrap();
        let e = ed(&d);
        prop_assert!((0.0..=1.0).contains(&e));
        let mut rev = p.clone();
        rev.reverse();
        prop_assert!((ed(&ProbDist::new(rev).unwrap()) - e).abs() < 1e-12);
        prop_assert!((ed_from_entropy(entropy(&d), p.len()) - e).abs() < 1e-15);
    }

    #[test]
    fn f32_and_f64_agree(p in dist_strategy()) {
        let narrow: Vec<f32> = p.iter().map(|&x| x as f32).collect();
        let s: f64 = narrow.iter().map(|&x| f64::from(x)).sum();
        prop_assume!((s - 1.0).abs() <= 1e-6);
        let e32 = ed(&ProbDist::new(narrow).unwrap());
        let e64 = ed(&ProbDist::new(p).unwrap());
        prop_assert!((e32 - e64).abs() < 1e-5);
    }

    #[test]
    fn logit_ed_in_unit_interval(z in prop::collection::vec(-50.0f64..50.0, 2..200), t in 0.05f64..20.0) {
        let e = logit_ed(&LogitVector::new(z).unwrap(), t).unwrap();
        prop_assert!((0.0..=1.0).contains(&e));
    }
}

#[test]
fn invalid_inputs_are_typed_errors() {
    use edprof::MetricsError;
    assert!(matches!(ProbDist::new(vec![1.0f64]), Err(MetricsError::VocabTooSmall(1))));
    assert!(matches!(ProbDist::new(vec![0.6f64, 0.6]), Err(MetricsError::NotNormalized { .. })));
    assert!(matches!(ProbDist::new(vec![1.5f64, -0.5]), Err(MetricsError::NegativeMass { .. })));
    assert!(matches!(LogitVector::new(vec![0.0f64, f64::NAN]), Err(MetricsError::NonFinite { .. })));
    let z = LogitVector::new(vec![0.0f64, 1.0]).unwrap();
    assert!(matches!(logit_ed(&z, 0.0), Err(MetricsError::InvalidTemperature(_))));
    assert!(matches!(
        ed_sequence::<f64>(&[], StdConvention::Sample),
        Err(MetricsError::EmptySequence)
    ));
}
