//! `report`: flattens `battery.json` (and optionally `multilingual.json` and
//! `summaries.jsonl`) into CSV tables and plot-data series.
//!
//! Two shared schemas cover most sections:
//!
//! - `<section>_groups.csv`: `partition,group,n,mean`
//! - `<section>_tests.csv`: `partition,test,a,b,estimate,std_error,statistic,df,p_value,significant,note`
//!
//! In the tests schema `estimate` holds the effect size, mean difference or
//! regression slope, `df` joins multiple degrees of freedom with `;`, and a
//! skipped partition is one row with an empty `test` and the reason in `note`.
//! Empty cells mean "not applicable".
//!
//! Section-specific tables:
//!
//! | file | columns |
//! |------|---------|
//! | `f3_size_points.csv` | `model,param_count,ln_param_count,mean_ed` |
//! | `f5_autocorrelation.csv` | `partition,n,mean,median,min,max,positive_band,no_band,negative_band` |
//! | `f6_intrinsic_fraction.csv` | `partition,neutral_mean,semantic_mean,fraction,neutral_categories,semantic_categories` |
//! | `neutral_gradient_table.csv` | `category` then one mean column per partition |
//! | `domain_profile.csv` | `model` then one ρ column per model |
//! | `languages.csv` | `model,language,n,mean_ed,fertility,vocab_allocation,unique_tokens_per_generation,cohens_d_vs_baseline,residualized_cohens_d` |
//! | `skipped.csv` | `section,reason` for sections that did not run |
//!
//! Plot data, written only when summaries are given:
//!
//! | file | columns |
//! |------|---------|
//! | `plot_temperature.csv` | `model,architecture,temperature,n,mean_ed,sd_ed` |
//! | `plot_category.csv` | `model,category,language,n,mean_ed,sd_ed` |
//! | `plot_drift.csv` | `model,generation_index,temperature,ed_mean` |
//! | `plot_position_dw.csv` | `model,generation_index,durbin_watson` |

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use edprof::battery::{
    BatteryReport, DriftFit, LabeledPair, Outcome, Partitioned, Sectioned,
};
use edprof::stats::{RegressionFit, TestResult};
use edprof::GenerationSummary;

use super::battery::ModelLanguages;
use super::{ensure_dir, read_summaries};
use crate::CliError;

#[derive(Debug, Clone)]
pub struct ReportOptions {
    pub battery: PathBuf,
    /// Defaults to `multilingual.json` beside the battery file when present.
    pub multilingual: Option<PathBuf>,
    pub summaries: Option<PathBuf>,
    pub out: PathBuf,
}

struct Table {
    name: &'static str,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &'static str, header: &[&str]) -> Self {
        Table {
            name,
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join(self.name);
        let csv_err = |e: csv::Error| CliError::Io {
            path: path.clone(),
            source: e.into(),
        };
        let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
        w.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.flush().map_err(CliError::io(&path))?;
        Ok(path)
    }
}

/// Shortest round-trip form, switching to exponent notation for tiny p-values.
fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

const GROUP_COLS: [&str; 4] = ["partition", "group", "n", "mean"];
const TEST_COLS: [&str; 11] = [
    "partition", "test", "a", "b", "estimate", "std_error", "statistic", "df", "p_value",
    "significant", "note",
];

#[derive(Default)]
struct TestRow<'a> {
    partition: &'a str,
    test: &'a str,
    a: &'a str,
    b: &'a str,
    estimate: Option<f64>,
    std_error: Option<f64>,
    statistic: Option<f64>,
    df: &'a [f64],
    p_value: Option<f64>,
    significant: Option<bool>,
    note: String,
}

impl TestRow<'_> {
    fn cells(self) -> Vec<String> {
        vec![
            self.partition.to_string(),
            self.test.to_string(),
            self.a.to_string(),
            self.b.to_string(),
            opt(self.estimate),
            opt(self.std_error),
            opt(self.statistic),
            self.df.iter().map(|d| num(*d)).collect::<Vec<_>>().join(";"),
            opt(self.p_value),
            self.significant.map(|s| s.to_string()).unwrap_or_default(),
            self.note,
        ]
    }
}

fn test_row<'a>(partition: &'a str, t: &'a TestResult) -> TestRow<'a> {
    TestRow {
        partition,
        test: &t.test_name,
        estimate: t.effect_size,
        statistic: Some(t.statistic),
        df: &t.df,
        p_value: t.p_value,
        note: t.method_notes.join("; "),
        ..TestRow::default()
    }
}

fn push_test(table: &mut Table, partition: &str, t: &TestResult) {
    table.push(test_row(partition, t).cells());
}

fn push_pairs(table: &mut Table, partition: &str, pairs: &[LabeledPair]) {
    for p in pairs {
        table.push(
            TestRow {
                a: &p.a,
                b: &p.b,
                estimate: Some(p.mean_difference),
                significant: Some(p.significant),
                ..test_row(partition, &p.result)
            }
            .cells(),
        );
    }
}

fn push_fit(table: &mut Table, partition: &str, predictors: &[String], fit: &RegressionFit) {
    for (j, name) in predictors.iter().enumerate() {
        let test = format!("ols slope on {name}");
        table.push(
            TestRow {
                partition,
                test: &test,
                estimate: Some(fit.slope(j)),
                std_error: fit.slope_se(j),
                df: &[fit.df_resid as f64],
                p_value: fit.slope_p(j),
                note: fit.notes.join("; "),
                ..TestRow::default()
            }
            .cells(),
        );
    }
}

fn push_skip(table: &mut Table, partition: &str, reason: &str) {
    table.push(
        TestRow {
            partition,
            note: reason.to_string(),
            ..TestRow::default()
        }
        .cells(),
    );
}

fn push_group(table: &mut Table, partition: &str, group: &str, n: usize, mean: f64) {
    table.push(vec![partition.into(), group.into(), n.to_string(), num(mean)]);
}

/// Partitions of a section that ran.
fn ran<T>(section: &Sectioned<T>) -> impl Iterator<Item = (&str, &T)> {
    section
        .result()
        .into_iter()
        .flatten()
        .filter_map(|p| Some((p.partition.as_str(), p.outcome.result()?)))
}

/// Visits every partition of a section, recording skipped ones in `tests`.
fn each<T>(
    section: &Sectioned<T>,
    tests: &mut Table,
    mut f: impl FnMut(&str, &T, &mut Table),
) {
    if let Outcome::Ran { result } = section {
        for Partitioned { partition, outcome, .. } in result {
            match outcome {
                Outcome::Ran { result } => f(partition, result, tests),
                Outcome::Skipped { reason } => push_skip(tests, partition, reason),
            }
        }
    }
}

fn battery_tables(r: &BatteryReport) -> Vec<Table> {
    let mut out = Vec::new();

    let mut skipped = Table::new("skipped.csv", &["section", "reason"]);
    let sections: [(&str, Option<&str>); 10] = [
        ("f1_nonzero", r.f1_nonzero.skip_reason()),
        ("f2_domains", r.f2_domains.skip_reason()),
        ("f3_size_effect", r.f3_size_effect.skip_reason()),
        ("f4_temperature", r.f4_temperature.skip_reason()),
        ("f5_autocorrelation", r.f5_autocorrelation.skip_reason()),
        ("f6_intrinsic_fraction", r.f6_intrinsic_fraction.skip_reason()),
        ("f7_multilingual", r.f7_multilingual.skip_reason()),
        ("f8_drift", r.f8_drift.skip_reason()),
        ("neutral_gradient", r.neutral_gradient.skip_reason()),
        ("domain_profiles", r.domain_profiles.skip_reason()),
    ];
    for (name, reason) in sections {
        if let Some(reason) = reason {
            skipped.push(vec![name.into(), reason.into()]);
        }
    }
    out.push(skipped);

    let mut t = Table::new("f1_nonzero_tests.csv", &TEST_COLS);
    each(&r.f1_nonzero, &mut t, |p, res, t| push_test(t, p, res));
    out.push(t);

    let mut g = Table::new("f2_domains_groups.csv", &GROUP_COLS);
    let mut t = Table::new("f2_domains_tests.csv", &TEST_COLS);
    each(&r.f2_domains, &mut t, |p, res, t| {
        for m in &res.ranking {
            push_group(&mut g, p, &m.label, m.n, m.mean);
        }
        push_test(t, p, &res.kruskal_wallis);
        push_pairs(t, p, &res.tukey);
    });
    out.extend([g, t]);

    let mut points = Table::new("f3_size_points.csv", &["model", "param_count", "ln_param_count", "mean_ed"]);
    let mut t = Table::new("f3_size_tests.csv", &TEST_COLS);
    if let Some(res) = r.f3_size_effect.result() {
        for m in &res.points {
            points.push(vec![
                m.model.clone(),
                m.param_count.to_string(),
                num((m.param_count as f64).ln()),
                num(m.mean_ed),
            ]);
        }
        push_fit(&mut t, "transformer", &["ln_param_count".into()], &res.fit);
    }
    out.extend([points, t]);

    let mut g = Table::new("f4_temperature_groups.csv", &GROUP_COLS);
    let mut t = Table::new("f4_temperature_tests.csv", &TEST_COLS);
    each(&r.f4_temperature, &mut t, |p, res, t| {
        for l in &res.levels {
            push_group(&mut g, p, &format!("T={}", l.temperature), l.n, l.mean);
        }
        for (label, test) in [("anova", &res.anova), ("pearson_rows", &res.pearson_rows), ("pearson_levels", &res.pearson_levels)] {
            if let Some(test) = test {
                t.push(TestRow { a: label, ..test_row(p, test) }.cells());
            }
        }
        push_pairs(t, p, &res.tukey);
    });
    out.extend([g, t]);

    let mut dw = Table::new(
        "f5_autocorrelation.csv",
        &["partition", "n", "mean", "median", "min", "max", "positive_band", "no_band", "negative_band"],
    );
    for (p, d) in ran(&r.f5_autocorrelation) {
        dw.push(vec![
            p.into(),
            d.n.to_string(),
            num(d.mean),
            num(d.median),
            num(d.min),
            num(d.max),
            d.positive_band.to_string(),
            d.no_band.to_string(),
            d.negative_band.to_string(),
        ]);
    }
    out.push(dw);

    let mut fr = Table::new(
        "f6_intrinsic_fraction.csv",
        &["partition", "neutral_mean", "semantic_mean", "fraction", "neutral_categories", "semantic_categories"],
    );
    for (p, f) in ran(&r.f6_intrinsic_fraction) {
        fr.push(vec![
            p.into(),
            num(f.neutral_mean),
            num(f.semantic_mean),
            num(f.fraction),
            f.neutral_categories.to_string(),
            f.semantic_categories.to_string(),
        ]);
    }
    out.push(fr);

    let mut g = Table::new("f7_multilingual_groups.csv", &GROUP_COLS);
    let mut t = Table::new("f7_multilingual_tests.csv", &TEST_COLS);
    let baseline = r.config.baseline_language.code();
    each(&r.f7_multilingual, &mut t, |p, res, t| {
        for m in &res.languages {
            push_group(&mut g, p, &m.label, m.n, m.mean);
        }
        push_test(t, p, &res.kruskal_wallis);
        push_pairs(t, p, &res.mann_whitney);
        for (lang, d) in &res.cohens_d_vs_baseline {
            t.push(
                TestRow {
                    partition: p,
                    test: "cohens_d",
                    a: baseline,
                    b: lang,
                    estimate: *d,
                    ..TestRow::default()
                }
                .cells(),
            );
        }
    });
    out.extend([g, t]);

    let mut t = Table::new("f8_drift_tests.csv", &TEST_COLS);
    each(&r.f8_drift, &mut t, |p, DriftFit { predictors, fit }, t| {
        push_fit(t, p, predictors, fit)
    });
    out.push(t);

    let mut g = Table::new("neutral_gradient_groups.csv", &GROUP_COLS);
    let mut t = Table::new("neutral_gradient_tests.csv", &TEST_COLS);
    let mut wide: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    let mut columns = Vec::new();
    each(&r.neutral_gradient, &mut t, |p, res, t| {
        columns.push(p.to_string());
        for m in &res.categories {
            push_group(&mut g, p, &m.label, m.n, m.mean);
            wide.entry(m.label.clone()).or_default().insert(p.to_string(), m.mean);
        }
        if let Some(test) = &res.random_vs_empty {
            t.push(TestRow { a: "random_ascii", b: "empty", ..test_row(p, test) }.cells());
        }
        push_pairs(t, p, &res.tukey);
    });
    let mut header = vec!["category".to_string()];
    header.extend(columns.iter().cloned());
    let mut table = Table { name: "neutral_gradient_table.csv", header, rows: Vec::new() };
    for category in edprof::PromptCategory::NEUTRAL {
        if let Some(by_part) = wide.get(category.as_str()) {
            let mut row = vec![category.as_str().to_string()];
            row.extend(columns.iter().map(|c| opt(by_part.get(c).copied())));
            table.push(row);
        }
    }
    out.extend([g, t, table]);

    let mut header = vec!["model".to_string()];
    let mut matrix_rows = Vec::new();
    if let Some(m) = r.domain_profiles.result() {
        header.extend(m.models.iter().cloned());
        for (model, row) in m.models.iter().zip(&m.rho) {
            let mut cells = vec![model.clone()];
            cells.extend(row.iter().map(|x| opt(*x)));
            matrix_rows.push(cells);
        }
    }
    out.push(Table { name: "domain_profile.csv", header, rows: matrix_rows });
    out
}

fn language_table(ml: &[ModelLanguages]) -> Table {
    let mut t = Table::new(
        "languages.csv",
        &[
            "model", "language", "n", "mean_ed", "fertility", "vocab_allocation",
            "unique_tokens_per_generation", "cohens_d_vs_baseline", "residualized_cohens_d",
        ],
    );
    for m in ml {
        for l in &m.languages {
            t.push(vec![
                m.model.clone(),
                l.language.code().into(),
                l.n.to_string(),
                num(l.mean_ed),
                opt(l.fertility),
                l.vocab_allocation.map(|v| v.to_string()).unwrap_or_default(),
                num(l.unique_tokens_per_generation),
                opt(l.cohens_d_vs_baseline),
                opt(l.residualized_cohens_d),
            ]);
        }
    }
    t
}

fn mean_sd(xs: &[f64]) -> (f64, Option<f64>) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let sd = (xs.len() > 1).then(|| (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (m, sd)
}

fn plot_tables(s: &[GenerationSummary]) -> Vec<Table> {
    let mut temp: BTreeMap<(String, String, u64), Vec<f64>> = BTreeMap::new();
    let mut cat: BTreeMap<(String, String, String), Vec<f64>> = BTreeMap::new();
    let mut ordered: Vec<&GenerationSummary> = s.iter().collect();
    ordered.sort_by(|a, b| {
        (&a.row.model_name, a.row.generation_index).cmp(&(&b.row.model_name, b.row.generation_index))
    });
    let mut drift = Table::new("plot_drift.csv", &["model", "generation_index", "temperature", "ed_mean"]);
    let mut dw = Table::new("plot_position_dw.csv", &["model", "generation_index", "durbin_watson"]);
    for g in ordered {
        let r = &g.row;
        let arch = serde_json::to_value(r.architecture).expect("enum serializes");
        temp.entry((r.model_name.clone(), arch.as_str().unwrap_or_default().to_string(), r.temperature.to_bits()))
            .or_default()
            .push(g.ed_mean);
        cat.entry((r.model_name.clone(), r.prompt_category.as_str().into(), r.language.code().into()))
            .or_default()
            .push(g.ed_mean);
        drift.push(vec![r.model_name.clone(), r.generation_index.to_string(), num(r.temperature), num(g.ed_mean)]);
        if let Some(d) = g.durbin_watson {
            dw.push(vec![r.model_name.clone(), r.generation_index.to_string(), num(d)]);
        }
    }
    let mut t = Table::new("plot_temperature.csv", &["model", "architecture", "temperature", "n", "mean_ed", "sd_ed"]);
    for ((model, arch, bits), xs) in &temp {
        let (m, sd) = mean_sd(xs);
        t.push(vec![model.clone(), arch.clone(), num(f64::from_bits(*bits)), xs.len().to_string(), num(m), opt(sd)]);
    }
    let mut c = Table::new("plot_category.csv", &["model", "category", "language", "n", "mean_ed", "sd_ed"]);
    for ((model, category, lang), xs) in &cat {
        let (m, sd) = mean_sd(xs);
        c.push(vec![model.clone(), category.clone(), lang.clone(), xs.len().to_string(), num(m), opt(sd)]);
    }
    vec![t, c, drift, dw]
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let file = File::open(path).map_err(CliError::io(path))?;
    serde_json::from_reader(BufReader::new(file))
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

/// Writes every table and returns their paths in write order.
pub fn cmd_report(opts: &ReportOptions) -> Result<Vec<PathBuf>, CliError> {
    let report: BatteryReport = read_json(&opts.battery)?;
    let mut tables = battery_tables(&report);
    let beside = opts.battery.with_file_name("multilingual.json");
    let ml_path = match &opts.multilingual {
        Some(p) => Some(p.clone()),
        None => beside.exists().then_some(beside),
    };
    if let Some(p) = ml_path {
        let ml: Vec<ModelLanguages> = read_json(&p)?;
        tables.push(language_table(&ml));
    }
    if let Some(p) = &opts.summaries {
        tables.extend(plot_tables(&read_summaries(p)?));
    }
    ensure_dir(&opts.out)?;
    tables.iter().map(|t| t.write(&opts.out)).collect()
}
