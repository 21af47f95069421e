//! Planted-effect recovery for every battery analysis.

use edprof::battery::{
    f1_nonzero, f2_domains, f3_size_effect, f4_temperature, f5_autocorrelation, f5_series,
    f6_intrinsic_fraction, f7_multilingual, f8_drift, neutral_gradient, profile_matrix,
    run_battery, BatteryConfig, Outcome, PartitionScheme, ProfileGranularity, Sectioned,
};
use edprof::summary::summarize_for_row;
use edprof::synth::{plan, plant_summaries, write_generation, Regime, SummaryPlant, SynthConfig};
use edprof::{Architecture, GenerationSummary, Language, PromptCategory, StdConvention};

use PromptCategory::*;

fn only<T: Clone>(s: &Sectioned<T>) -> T {
    let parts = s.result().expect("section ran");
    assert_eq!(parts.len(), 1, "expected a single partition");
    parts[0].outcome.result().expect("partition ran").clone()
}

#[test]
fn f1_planted_nonzero_mean() {
    let s = plant_summaries(&[SummaryPlant::new("m", Code, 0.3, 0.05, 100)], 0.0, 1);
    let t = only(&f1_nonzero(&s, PartitionScheme::Model));
    assert!(t.p_value.unwrap() < 1e-6);
    // t = x̄ / (s/√n) with planted moments is about 60
    assert!(t.statistic > 40.0);

    let zeros = plant_summaries(&[SummaryPlant::new("m", Code, 0.0, 0.0, 10)], 0.0, 1);
    let parts = f1_nonzero(&zeros, PartitionScheme::Model);
    let reason = parts.result().unwrap()[0].outcome.skip_reason().unwrap().to_string();
    assert!(reason.contains("degenerate"), "{reason}");
    let single = plant_summaries(&[SummaryPlant::new("m", Code, 0.3, 0.1, 1)], 0.0, 1);
    assert!(f1_nonzero(&single, PartitionScheme::Model).result().unwrap()[0]
        .outcome
        .skip_reason()
        .is_some());
}

#[test]
fn f2_planted_domain_shift() {
    let cells = |code_shift: f64| {
        [Wikipedia, News, Fiction, Code]
            .into_iter()
            .map(|c| {
                let m = if c == Code { 0.34 + code_shift } else { 0.34 };
                SummaryPlant::new("m", c, m, 0.005, 50)
            })
            .collect::<Vec<_>>()
    };
    let shifted = only(&f2_domains(&plant_summaries(&cells(0.02), 0.0, 3), 0.05));
    assert!(shifted.kruskal_wallis.p_value.unwrap() < 1e-6);
    assert_eq!(shifted.ranking[0].label, "code");
    assert!(shifted
        .tukey
        .iter()
        .filter(|p| p.a == "code" || p.b == "code")
        .all(|p| p.significant));

    let flat = only(&f2_domains(&plant_summaries(&cells(0.0), 0.0, 4), 0.05));
    assert!(flat.kruskal_wallis.p_value.unwrap() > 0.05);

    let one = plant_summaries(&[SummaryPlant::new("m", Code, 0.3, 0.01, 9)], 0.0, 1);
    assert_eq!(
        f2_domains(&one, 0.05).result().unwrap()[0].outcome.skip_reason(),
        Some("fewer than two domains")
    );
}

fn size_plants(b: f64, noise_seed: u64) -> Vec<GenerationSummary> {
    let params: [f64; 8] = [1.0e9, 3.0e9, 7.0e9, 8.0e9, 1.4e10, 2.7e10, 3.2e10, 7.0e10];
    let plants: Vec<SummaryPlant> = params
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mean = 0.1 + b * p.ln();
            SummaryPlant::new(&format!("model{i}"), Wikipedia, mean, 0.01, 30)
                .architecture(Architecture::Transformer, *p as u64)
        })
        .collect();
    plant_summaries(&plants, 0.0, noise_seed)
}

#[test]
fn f3_size_regression() {
    let b = 0.01;
    let r = f3_size_effect(&size_plants(b, 5)).result().unwrap().clone();
    let se = r.fit.slope_se(0).unwrap();
    assert!((r.fit.slope(0) - b).abs() <= 2.0 * se, "slope {} se {se}", r.fit.slope(0));
    let flat = f3_size_effect(&size_plants(0.0, 6)).result().unwrap().clone();
    assert!(flat.fit.slope_p(0).unwrap() > 0.05);

    // two models: fit with no residual degrees of freedom, flagged
    let two: Vec<GenerationSummary> = size_plants(b, 7)
        .into_iter()
        .filter(|s| s.row.model_name == "model0" || s.row.model_name == "model7")
        .collect();
    let fit = f3_size_effect(&two).result().unwrap().fit.clone();
    assert_eq!(fit.df_resid, 0);
    assert!(!fit.notes.is_empty());
    // SSM models never enter
    let mut ssm = two.clone();
    ssm.iter_mut().for_each(|s| s.row.architecture = Architecture::Ssm);
    assert!(f3_size_effect(&ssm).skip_reason().is_some());
}

fn temperature_plants(regime: Regime, n: usize, seed: u64) -> Vec<GenerationSummary> {
    let plants: Vec<SummaryPlant> = [0.7, 1.0, 1.3]
        .iter()
        .map(|&t| SummaryPlant::new("m", Fiction, regime.level(t), 0.01, n).temperature(t))
        .collect();
    plant_summaries(&plants, 0.0, seed)
}

#[test]
fn f4_planted_regimes() {
    let ssm = only(&f4_temperature(&temperature_plants(Regime::SsmLike, 100, 8), 0.05));
    assert!(ssm.pearson_levels.as_ref().unwrap().statistic < -0.98);
    assert!(ssm.pearson_rows.as_ref().unwrap().statistic < -0.9);
    assert!(ssm.all_pairs_significant());
    assert!(ssm.anova.as_ref().unwrap().p_value.unwrap() < 1e-10);
    for (level, want) in ssm.levels.iter().zip([0.796, 0.618, 0.440]) {
        assert!((level.mean - want).abs() < 0.01);
    }

    let flat = only(&f4_temperature(&temperature_plants(Regime::TransformerLike, 100, 9), 0.05));
    assert!(flat.pearson_rows.as_ref().unwrap().statistic.abs() < 0.1);
    assert!(flat.anova.as_ref().unwrap().p_value.unwrap() > 0.05);
    assert!(!flat.any_pair_significant());
}

fn dw_of_synth(ar: f64, length: u32) -> f64 {
    let mut cfg = SynthConfig::new(Regime::TransformerLike);
    cfg.ar_coefficient = ar;
    cfg.length = length;
    cfg.vocab_size = 32;
    cfg.temperatures = vec![1.0];
    cfg.generations_per_temperature = 40;
    cfg.position_sd = Some(0.05);
    let summaries: Vec<GenerationSummary> = plan(&cfg)
        .unwrap()
        .iter()
        .map(|p| {
            let (bytes, _) = write_generation(&cfg, p, Vec::new()).unwrap();
            summarize_for_row(&bytes[..], &p.row, StdConvention::Sample).unwrap()
        })
        .collect();
    only(&f5_autocorrelation(&summaries)).mean
}

#[test]
fn f5_autocorrelation_oracles() {
    // DW ≈ 2(1 − φ)
    let white = dw_of_synth(0.0, 400);
    assert!((white - 2.0).abs() < 0.1, "white {white}");
    let ar = dw_of_synth(0.5, 400);
    assert!((ar - 1.0).abs() < 0.1, "ar {ar}");
    assert!(f5_series(&[0.3]).is_err());
    assert!((f5_series(&[0.2, 0.4, 0.2, 0.4]).unwrap().statistic - 3.0).abs() < 1e-12);
}

#[test]
fn f6_intrinsic_fraction_fixtures() {
    let fixture = |neutral: f64, semantic: f64| {
        let mut plants = Vec::new();
        for c in PromptCategory::NEUTRAL {
            plants.push(SummaryPlant::new("m", c, neutral, 0.0, 3));
        }
        for c in PromptCategory::SEMANTIC {
            plants.push(SummaryPlant::new("m", c, semantic, 0.0, 3));
        }
        only(&f6_intrinsic_fraction(&plant_summaries(&plants, 0.0, 0))).fraction
    };
    assert!((fixture(0.300, 0.341) - 0.880).abs() <= 0.001);
    assert!((fixture(0.620, 0.670) - 0.925).abs() <= 0.001);
    assert_eq!(fixture(0.5, 0.5), 1.0);

    // unweighted: an over-sampled category does not dominate
    let plants = vec![
        SummaryPlant::new("m", Empty, 0.2, 0.0, 100),
        SummaryPlant::new("m", RandomAscii, 0.4, 0.0, 1),
        SummaryPlant::new("m", Code, 0.3, 0.0, 5),
    ];
    let f = only(&f6_intrinsic_fraction(&plant_summaries(&plants, 0.0, 0)));
    assert!((f.neutral_mean - 0.3).abs() < 1e-12);
}

pub const TABLE10: [(Language, f64); 5] = [
    (Language::En, 0.329),
    (Language::Ja, 0.388),
    (Language::Zh, 0.395),
    (Language::Pl, 0.401),
    (Language::Ar, 0.408),
];

fn language_plants(sd: f64, n: usize, flat: bool, seed: u64) -> Vec<GenerationSummary> {
    let plants: Vec<SummaryPlant> = TABLE10
        .iter()
        .map(|&(l, m)| SummaryPlant::new("m", Wikipedia, if flat { 0.35 } else { m }, sd, n).language(l))
        .collect();
    plant_summaries(&plants, 0.0, seed)
}

#[test]
fn f7_planted_language_gradient() {
    let r = only(&f7_multilingual(&language_plants(0.01, 160, false, 10), Language::En, 0.01));
    assert_eq!(r.order(), ["EN", "JA", "ZH", "PL", "AR"]);
    assert_eq!(r.mann_whitney.len(), 10);
    assert!(r.mann_whitney.iter().all(|p| p.result.p_value.unwrap() < 0.01));
    assert!(r.kruskal_wallis.p_value.unwrap() < 1e-20);

    // at the wider spread the gradient and its ordering still stand
    let wide = only(&f7_multilingual(&language_plants(0.02, 160, false, 11), Language::En, 0.01));
    assert!(wide.kruskal_wallis.p_value.unwrap() < 1e-20);
    assert_eq!(wide.order()[0], "EN");
    for (l, d) in &wide.cohens_d_vs_baseline {
        assert!(d.unwrap() > 2.0, "{l}: {d:?}");
    }

    let same = only(&f7_multilingual(&language_plants(0.02, 160, true, 12), Language::En, 0.01));
    assert!(same.kruskal_wallis.p_value.unwrap() > 0.05);

    let single = plant_summaries(&[SummaryPlant::new("m", Wikipedia, 0.3, 0.01, 10)], 0.0, 0);
    assert!(f7_multilingual(&single, Language::En, 0.01).result().unwrap()[0]
        .outcome
        .skip_reason()
        .is_some());
}

#[test]
fn f8_planted_drift() {
    let slope = 1.5e-5;
    let drift = |d: f64, seed: u64| {
        let plants = [
            SummaryPlant::new("m", News, 0.33, 0.01, 2500).temperature(0.7),
            SummaryPlant::new("m", News, 0.33, 0.01, 2500).temperature(1.3),
        ];
        only(&f8_drift(&plant_summaries(&plants, d, seed)))
    };
    let r = drift(slope, 13);
    assert_eq!(r.predictors, ["generation_index", "temperature"]);
    let se = r.fit.slope_se(0).unwrap();
    assert!((r.fit.slope(0) - slope).abs() <= 2.0 * se);
    let none = drift(0.0, 14);
    assert!(none.fit.slope_p(0).unwrap() > 0.05);
}

fn neutral_plants(means: [(PromptCategory, f64); 5], sd: f64) -> Vec<GenerationSummary> {
    let plants: Vec<SummaryPlant> = means
        .iter()
        .map(|&(c, m)| SummaryPlant::new("m", c, m, sd, 100))
        .collect();
    plant_summaries(&plants, 0.0, 15)
}

#[test]
fn neutral_gradient_orderings() {
    let transformer = [
        (RandomAscii, 0.268),
        (NonsenseSyllables, 0.286),
        (ExplicitRandomness, 0.308),
        (NeutralStub, 0.312),
        (Empty, 0.314),
    ];
    let g = only(&neutral_gradient(&neutral_plants(transformer, 0.002), 0.05));
    assert_eq!(
        g.order(),
        ["random_ascii", "nonsense_syllables", "explicit_randomness", "neutral_stub", "empty"]
    );
    let t = g.random_vs_empty.as_ref().unwrap();
    assert!(t.statistic < 0.0 && t.p_value.unwrap() < 1e-6);

    let mamba = [
        (RandomAscii, 0.540),
        (NonsenseSyllables, 0.535),
        (ExplicitRandomness, 0.665),
        (NeutralStub, 0.659),
        (Empty, 0.704),
    ];
    let g = only(&neutral_gradient(&neutral_plants(mamba, 0.002), 0.05));
    assert_eq!(g.order().last(), Some(&"empty"));
    assert_eq!(
        g.order(),
        ["nonsense_syllables", "random_ascii", "neutral_stub", "explicit_randomness", "empty"]
    );

    let equal = [(RandomAscii, 0.3), (NonsenseSyllables, 0.3), (ExplicitRandomness, 0.3), (NeutralStub, 0.3), (Empty, 0.3)];
    let g = only(&neutral_gradient(&neutral_plants(equal, 0.01), 0.05));
    assert!(g.tukey.iter().all(|p| !p.significant));
}

#[test]
fn domain_profiles_from_summaries() {
    let gemma = [(Code, 0.356), (News, 0.342), (Fiction, 0.339), (Wikipedia, 0.337)];
    let qwen = [(Code, 0.360), (News, 0.327), (Fiction, 0.336), (Wikipedia, 0.329)];
    let mut plants = Vec::new();
    for (c, m) in gemma {
        plants.push(SummaryPlant::new("gemma", c, m, 0.0, 2));
    }
    for (c, m) in qwen {
        plants.push(SummaryPlant::new("qwen", c, m, 0.0, 2));
    }
    let s = plant_summaries(&plants, 0.0, 0);
    let m = profile_matrix(&s, ProfileGranularity::Domain, Some(Architecture::Transformer))
        .result()
        .unwrap()
        .clone();
    assert_eq!(m.models, ["gemma", "qwen"]);
    assert!((m.rho[0][1].unwrap() - 0.4).abs() < 1e-12);
    assert_eq!(m.off_diagonal_range(), Some((m.rho[0][1].unwrap(), m.rho[0][1].unwrap())));
    assert!(profile_matrix(&s, ProfileGranularity::Domain, Some(Architecture::Ssm))
        .skip_reason()
        .is_some());
}

#[test]
fn battery_is_deterministic_and_skips_unrequested() {
    let mut s = temperature_plants(Regime::SsmLike, 20, 16);
    s.extend(language_plants(0.01, 20, false, 17));
    let cfg = BatteryConfig::default();
    let a = serde_json::to_string(&run_battery(&s, &cfg)).unwrap();
    let b = serde_json::to_string(&run_battery(&s, &cfg)).unwrap();
    assert_eq!(a, b);

    let only_f4 = cfg.with_analyses(vec!["f4".parse().unwrap()]).unwrap();
    let r = run_battery(&s, &only_f4);
    assert!(matches!(r.f4_temperature, Outcome::Ran { .. }));
    assert_eq!(r.f1_nonzero.skip_reason(), Some("not requested"));
    assert_eq!(r.input_count, s.len());
}
