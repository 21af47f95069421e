//! Argument parsing and flag/config merging.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use edprof::battery::{Analysis, BatteryConfig, PartitionScheme, ProfileGranularity};
use edprof::stream::ValueWidth;
use edprof::synth::{Regime, SynthConfig};
use edprof::{Architecture, Language, StdConvention};

use crate::commands::battery::{cmd_battery, BatteryOptions};
use crate::commands::prompts::{cmd_prompts, ModelInfo, PromptsOptions};
use crate::commands::report::{cmd_report, ReportOptions};
use crate::commands::summarize::{cmd_summarize, SummarizeOptions};
use crate::commands::synth::{cmd_synth, SynthOptions};
use crate::commands::zipf::{cmd_zipf, parse_grid};
use crate::config::RunConfig;
use crate::error::exit;
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "edprof", version, about = "Entropic deviation profiling of next-token distributions")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Expand the prompt suite into manifest rows for a capture run.
    Prompts(PromptsArgs),
    /// Summarize every stream listed in a manifest.
    Summarize(SummarizeArgs),
    /// Run the falsification battery over summaries.
    Battery(BatteryArgs),
    /// Write synthetic streams with planted ED trajectories.
    Synth(SynthArgs),
    /// Tabulate the Zipf baseline.
    Zipf(ZipfArgs),
    /// Flatten battery output into CSV tables and plot data.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct PromptsArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Root of `<category>/<LANG>/*.txt`; defaults to `./corpus`.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Skip the semantic categories.
    #[arg(long)]
    pub neutral_only: bool,
    #[arg(long, value_delimiter = ',')]
    pub languages: Option<Vec<Language>>,
    #[arg(long, value_delimiter = ',')]
    pub temperatures: Option<Vec<f64>>,
    #[arg(long)]
    pub seeds_per_cell: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Character budget for neutral prompts.
    #[arg(long)]
    pub length_budget: Option<usize>,
    /// Leading characters kept from each corpus file.
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub architecture: Option<Architecture>,
    #[arg(long)]
    pub param_count: Option<u64>,
    #[arg(long)]
    pub vocab_size: Option<u32>,
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; 0 uses one per core.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Divide by n instead of n − 1 for within-sequence spread.
    #[arg(long)]
    pub population_std: bool,
}

#[derive(Debug, Args)]
pub struct BatteryArgs {
    /// Defaults to `<out>/summaries.jsonl`.
    #[arg(long)]
    pub summaries: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated subset of f1..f8, neutral_gradient, domain_profile.
    #[arg(long, value_delimiter = ',')]
    pub analyses: Option<Vec<Analysis>>,
    #[arg(long)]
    pub partition: Option<PartitionScheme>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub baseline: Option<Language>,
    #[arg(long)]
    pub profile_granularity: Option<ProfileGranularity>,
    /// Vocabulary file for script allocation.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub regime: Option<Regime>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub temperatures: Option<Vec<f64>>,
    #[arg(long)]
    pub generations_per_temperature: Option<u32>,
    #[arg(long)]
    pub length: Option<u32>,
    #[arg(long)]
    pub vocab_size: Option<u32>,
    /// Within-sequence standard deviation of per-position ED.
    #[arg(long)]
    pub position_sd: Option<f64>,
    /// Spread of generation means around the planted level.
    #[arg(long)]
    pub generation_sd: Option<f64>,
    /// AR(1) coefficient of the per-position trajectory.
    #[arg(long)]
    pub ar: Option<f64>,
    /// Added to the planted mean per generation index.
    #[arg(long)]
    pub drift: Option<f64>,
    #[arg(long)]
    pub binary64: bool,
}

#[derive(Debug, Args)]
pub struct ZipfArgs {
    #[arg(long, value_delimiter = ',')]
    pub alpha: Vec<f64>,
    /// Inclusive `start:stop:step` grid, added to `--alpha`.
    #[arg(long)]
    pub alpha_grid: Option<String>,
    #[arg(long = "vocab", value_delimiter = ',', default_value = "150000")]
    pub vocab_sizes: Vec<usize>,
    /// Also write `zipf.csv` into this directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Defaults to `battery.json` in the configured output directory.
    #[arg(long)]
    pub battery: Option<PathBuf>,
    #[arg(long)]
    pub multilingual: Option<PathBuf>,
    #[arg(long)]
    pub summaries: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn required<T>(flag: Option<T>, config: Option<T>, name: &str) -> Result<T, CliError> {
    flag.or(config)
        .ok_or_else(|| CliError::Usage(format!("missing --{name} (flag or config)")))
}

pub fn prompts_options(a: PromptsArgs, c: &RunConfig) -> Result<PromptsOptions, CliError> {
    let p = &c.prompts;
    let corpus = if a.neutral_only {
        None
    } else {
        Some(a.corpus.or(p.corpus.clone()).unwrap_or_else(|| PathBuf::from("corpus")))
    };
    Ok(PromptsOptions {
        out: required(a.out, c.out.clone(), "out")?,
        corpus,
        languages: a.languages.or(p.languages.clone()).unwrap_or(vec![Language::En]),
        temperatures: a.temperatures.or(p.temperatures.clone()).unwrap_or(vec![0.7, 1.0, 1.3]),
        seeds_per_cell: a.seeds_per_cell.or(p.seeds_per_cell).unwrap_or(10),
        seed: a.seed.or(c.seed).unwrap_or(0),
        length_budget: a.length_budget.or(p.length_budget).unwrap_or(64),
        window: a.window.or(p.window).unwrap_or(512),
        model: ModelInfo {
            name: required(a.model, p.model_name.clone(), "model")?,
            architecture: a.architecture.or(p.architecture).unwrap_or(Architecture::Transformer),
            param_count: required(a.param_count, p.param_count, "param-count")?,
            vocab_size: required(a.vocab_size, p.vocab_size, "vocab-size")?,
        },
    })
}

pub fn summarize_options(a: SummarizeArgs, c: &RunConfig) -> Result<SummarizeOptions, CliError> {
    let population = a.population_std || c.summarize.population_std.unwrap_or(false);
    Ok(SummarizeOptions {
        manifest: required(a.manifest, c.manifest.clone(), "manifest")?,
        out: required(a.out, c.out.clone(), "out")?,
        jobs: a.jobs.or(c.jobs).unwrap_or(0),
        std_convention: if population {
            StdConvention::Population
        } else {
            StdConvention::Sample
        },
    })
}

pub fn battery_options(a: BatteryArgs, c: &RunConfig) -> Result<BatteryOptions, CliError> {
    let b = &c.battery;
    let out = required(a.out, c.out.clone(), "out")?;
    let mut config = BatteryConfig::default();
    if let Some(list) = a.analyses.or(b.analyses.clone()) {
        config = config
            .with_analyses(list)
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    config.partition = a.partition.or(b.partition).unwrap_or_default();
    config.alpha = a.alpha.or(b.alpha).unwrap_or(config.alpha);
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        return Err(CliError::Usage(format!("alpha {} must lie in (0, 1)", config.alpha)));
    }
    config.baseline_language = a.baseline.or(b.baseline_language).unwrap_or(config.baseline_language);
    config.profile_granularity = a.profile_granularity.or(b.profile_granularity).unwrap_or_default();
    Ok(BatteryOptions {
        summaries: a.summaries.unwrap_or_else(|| out.join("summaries.jsonl")),
        out,
        config,
        vocab: a.vocab.or(b.vocab.clone()),
    })
}

pub fn synth_options(a: SynthArgs, c: &RunConfig) -> Result<SynthOptions, CliError> {
    let mut config = match (&c.synth, a.regime) {
        (Some(s), Some(r)) => SynthConfig { regime: r, ..s.clone() },
        (Some(s), None) => s.clone(),
        (None, Some(r)) => SynthConfig::new(r),
        (None, None) => return Err(CliError::Usage("missing --regime (flag or config)".into())),
    };
    if let Some(m) = a.model {
        config.model_name = m;
    }
    macro_rules! set {
        ($($flag:ident => $field:ident),*) => { $(if let Some(v) = a.$flag { config.$field = v; })* };
    }
    set!(temperatures => temperatures, generations_per_temperature => generations_per_temperature,
         length => length, vocab_size => vocab_size, generation_sd => generation_sd,
         ar => ar_coefficient, drift => drift_per_generation);
    if let Some(v) = a.position_sd {
        config.position_sd = Some(v);
    }
    if let Some(s) = a.seed.or(c.seed) {
        config.seed = s;
    }
    if a.binary64 {
        config.value_width = ValueWidth::Binary64;
    }
    Ok(SynthOptions {
        config,
        out: required(a.out, c.out.clone(), "out")?,
        jobs: a.jobs.or(c.jobs).unwrap_or(0),
    })
}

pub fn report_options(a: ReportArgs, c: &RunConfig) -> Result<ReportOptions, CliError> {
    let base = c.out.clone();
    let battery = match (a.battery, &base) {
        (Some(p), _) => p,
        (None, Some(dir)) => dir.join("battery.json"),
        (None, None) => return Err(CliError::Usage("missing --battery (flag or config out)".into())),
    };
    let out = a
        .out
        .or_else(|| base.as_ref().map(|d| d.join("report")))
        .unwrap_or_else(|| battery.parent().unwrap_or(Path::new(".")).join("report"));
    Ok(ReportOptions {
        battery,
        multilingual: a.multilingual,
        summaries: a.summaries,
        out,
    })
}

/// Runs one parsed invocation, printing progress to stdout and warnings to
/// stderr.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Prompts(a) => {
            let opts = prompts_options(a, &config)?;
            let suite = cmd_prompts(&opts)?;
            println!(
                "wrote {} manifest rows for {} prompts to {}",
                suite.manifest.rows.len(),
                suite.prompts.len(),
                opts.out.display()
            );
        }
        Command::Summarize(a) => {
            let opts = summarize_options(a, &config)?;
            let report = cmd_summarize(&opts)?;
            println!(
                "summarized {} streams into {}",
                report.summaries.len(),
                report.summaries_path.display()
            );
            report.check()?;
        }
        Command::Battery(a) => {
            let opts = battery_options(a, &config)?;
            let out = cmd_battery(&opts)?;
            for w in &out.report.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "battery over {} summaries written to {}",
                out.report.input_count,
                opts.out.join("battery.json").display()
            );
        }
        Command::Synth(a) => {
            let opts = synth_options(a, &config)?;
            let r = cmd_synth(&opts)?;
            println!(
                "wrote {} synthetic streams ({} bytes); manifest at {}",
                r.generations,
                r.bytes,
                r.manifest_path.display()
            );
        }
        Command::Zipf(a) => {
            let mut alphas = a.alpha;
            if let Some(g) = &a.alpha_grid {
                alphas.extend(parse_grid(g).map_err(CliError::Usage)?);
            }
            let rows = cmd_zipf(&alphas, &a.vocab_sizes)?;
            println!("alpha\tvocab_size\ted");
            for r in &rows {
                println!("{}\t{}\t{}", r.alpha, r.vocab_size, r.ed);
            }
            if let Some(dir) = a.out {
                crate::commands::ensure_dir(&dir)?;
                let path = dir.join("zipf.csv");
                let err = |e: csv::Error| CliError::Io { path: path.clone(), source: e.into() };
                let mut w = csv::Writer::from_path(&path).map_err(err)?;
                for r in &rows {
                    w.serialize(r).map_err(err)?;
                }
                w.flush().map_err(CliError::io(&path))?;
            }
        }
        Command::Report(a) => {
            let opts = report_options(a, &config)?;
            let files = cmd_report(&opts)?;
            println!("wrote {} tables to {}", files.len(), opts.out.display());
        }
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run_from<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::USAGE } else { exit::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => exit::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
