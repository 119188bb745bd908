use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kws_core::audio::Partition;
use kws_core::harness::{self, resolve_keywords, ExperimentConfig, SweepParam, SweepSpec};
use kws_core::KwsError;
use serde_json::json;

/// Keyword spotting with MFCC features and a Tsetlin Machine.
#[derive(Parser)]
#[command(name = "kws-tm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract MFCCs, fit the quantile encoder and write the feature cache.
    Prepare(Overrides),
    /// Train a Tsetlin Machine on the prepared cache.
    Train(Overrides),
    /// Evaluate a saved model on one split.
    Eval {
        #[command(flatten)]
        overrides: Overrides,
        /// Model file; defaults to <output-dir>/model.json.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Run prepare/train/eval for each value of one parameter.
    Sweep {
        #[command(flatten)]
        overrides: Overrides,
        /// window_length_s, window_step_s, n_bins, keywords, clauses_per_class, T or s.
        #[arg(long)]
        param: Option<String>,
        /// Comma-separated values. For keywords use counts, presets or `a+b+c` lists.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<String>>,
        /// Run sweep points concurrently.
        #[arg(long)]
        parallel: bool,
    },
    /// Per-feature mean and variance of the raw training features.
    FeatureStats(Overrides),
    /// Check that the machine learns XOR to 100% training accuracy.
    XorSelftest {
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 200)]
        epochs: usize,
    },
    /// Write a small synthetic corpus for trying the pipeline without real recordings.
    SynthCorpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "baseline4")]
        keywords: String,
        #[arg(long, default_value_t = 100)]
        per_class: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

/// Config file plus per-field overrides. Flags win over the file.
#[derive(Args)]
struct Overrides {
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus_root: Option<PathBuf>,
    /// Preset (baseline3, baseline4, similar4, nine) or comma-separated keywords.
    #[arg(long)]
    keywords: Option<String>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    window_length_s: Option<f64>,
    #[arg(long)]
    window_step_s: Option<f64>,
    #[arg(long)]
    fft_size: Option<usize>,
    #[arg(long)]
    n_filters: Option<usize>,
    #[arg(long)]
    n_ceps: Option<usize>,
    #[arg(long)]
    pre_emphasis: Option<f64>,
    #[arg(long)]
    n_bins: Option<usize>,
    #[arg(long)]
    clauses_per_class: Option<usize>,
    /// Vote threshold T.
    #[arg(long)]
    threshold: Option<u32>,
    /// Specificity s.
    #[arg(long)]
    s_param: Option<f64>,
    /// States per automaton action, N.
    #[arg(long)]
    states_per_action: Option<u16>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

impl Overrides {
    fn resolve(&self) -> Result<ExperimentConfig, KwsError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($field:ident => $target:expr) => {
                if let Some(v) = self.$field.clone() {
                    $target = v;
                }
            };
        }
        set!(corpus_root => cfg.corpus_root);
        set!(output_dir => cfg.output_dir);
        if let Some(k) = &self.keywords {
            cfg.keywords = resolve_keywords(k);
        }
        if self.cache_dir.is_some() {
            cfg.cache_dir = self.cache_dir.clone();
        }
        set!(window_length_s => cfg.mfcc.window_length_s);
        set!(window_step_s => cfg.mfcc.window_step_s);
        set!(n_filters => cfg.mfcc.n_filters);
        set!(n_ceps => cfg.mfcc.n_ceps);
        set!(pre_emphasis => cfg.mfcc.pre_emphasis);
        match self.fft_size {
            Some(n) => cfg.mfcc.fft_size = n,
            None => cfg.mfcc = cfg.mfcc.with_fitting_fft(),
        }
        set!(n_bins => cfg.n_bins);
        set!(clauses_per_class => cfg.hyperparams.clauses_per_class);
        set!(threshold => cfg.hyperparams.threshold);
        set!(s_param => cfg.hyperparams.s);
        set!(states_per_action => cfg.hyperparams.states_per_action);
        set!(epochs => cfg.hyperparams.epochs);
        set!(seed => cfg.hyperparams.seed);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_json<T: serde::Serialize>(value: &T) {
    let text = serde_json::to_string_pretty(value).expect("serializable output");
    // a closed pipe (e.g. `| head`) is not an error worth reporting
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn run(command: Command) -> Result<ExitCode, KwsError> {
    match command {
        Command::Prepare(o) => {
            let summary = harness::cmd_prepare(&o.resolve()?)?;
            print_json(&summary);
        }
        Command::Train(o) => {
            let m = harness::cmd_train(&o.resolve()?)?;
            print_json(&json!({
                "train_acc": m.train_acc,
                "test_acc": m.test_acc,
                "val_acc": m.val_acc,
                "overfit_gap": m.overfit_gap,
                "feature_count": m.feature_count,
                "total_booleans": m.total_booleans,
                "op_counters": m.op_counters,
                "wall_time_s": m.wall_time_s,
            }));
        }
        Command::Eval {
            overrides,
            model,
            split,
        } => {
            let cfg = overrides.resolve()?;
            let split: Partition = split.parse()?;
            let model = model.unwrap_or_else(|| harness::model_path(&cfg));
            print_json(&harness::cmd_eval(&cfg, &model, split)?);
        }
        Command::Sweep {
            overrides,
            param,
            values,
            parallel,
        } => {
            let mut cfg = overrides.resolve()?;
            if let (Some(p), Some(v)) = (param, values) {
                cfg.sweep = Some(SweepSpec {
                    parameter: p.parse::<SweepParam>()?,
                    values: v,
                });
            }
            cfg.parallel |= parallel;
            let rows = harness::cmd_sweep(&cfg)?;
            print_json(&rows);
        }
        Command::FeatureStats(o) => {
            let stats = harness::cmd_feature_stats(&o.resolve()?)?;
            let zero = stats.iter().filter(|s| s.zero_variance).count();
            print_json(&json!({ "features": stats.len(), "zero_variance": zero }));
        }
        Command::XorSelftest { seeds, epochs } => {
            let mut all_passed = true;
            let mut reports = Vec::new();
            for seed in seeds {
                let (report, _) = harness::xor_selftest(seed, epochs)?;
                all_passed &= report.passed();
                reports.push(report);
            }
            print_json(&reports);
            if !all_passed {
                return Ok(ExitCode::from(3));
            }
        }
        Command::SynthCorpus {
            out,
            keywords,
            per_class,
            seed,
        } => {
            let keywords = resolve_keywords(&keywords);
            harness::synth::write_synthetic_corpus(&out, &keywords, per_class, seed)?;
            print_json(&json!({ "corpus_root": out, "keywords": keywords, "per_class": per_class }));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
