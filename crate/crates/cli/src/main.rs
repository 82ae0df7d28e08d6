mod config;
mod decode;
mod error;
mod output;
mod pca;
mod probe;
mod report;
mod tools;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use repdecode::corpusgen::{MaskConfig, SplitSizes, Task, DEFAULT_MASK_RATE};

use config::{AnalysisConfig, FileConfig, Overrides};
use error::CliResult;

#[derive(Parser)]
#[command(name = "repdecode", version, about = "Brain decoding and representation analysis pipeline")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel jobs.
    #[arg(long, global = true, env = "REPDECODE_WORKERS")]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Compress brain images with PCA.
    Pca {
        /// Brain matrices to compress; without any, every brain entry of the manifest.
        #[arg(long = "brain")]
        brains: Vec<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        components: Option<usize>,
    },
    /// Ridge-decode every model snapshot from every subject.
    Decode {
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Comma-separated ridge strengths, ascending.
        #[arg(long, value_delimiter = ',')]
        beta_grid: Option<Vec<f64>>,
        /// Outer cross-validation folds.
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        inner_folds: Option<usize>,
    },
    /// Representational similarity heatmap across tasks.
    Rsa {
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Train and score structural probes on token representations.
    Probe {
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Treebank files aligned with the token representations.
        #[arg(long, required = true)]
        conllu: Vec<PathBuf>,
        #[arg(long)]
        rank: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        test_fraction: Option<f64>,
    },
    /// Generate a fine-tuning dataset from a raw corpus.
    Corpus {
        /// Text corpus: one tokenized sentence per line (optionally a tab and
        /// its tags), a blank line between paragraphs, two between documents.
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_parser = parse_task)]
        task: Task,
        #[arg(long, default_value_t = 1_000_000)]
        train: usize,
        #[arg(long, default_value_t = 100_000)]
        dev: usize,
        #[arg(long, default_value_t = 100_000)]
        test: usize,
        #[arg(long, default_value_t = DEFAULT_MASK_RATE)]
        mask_rate: f64,
        /// Replace every selected token with the mask token.
        #[arg(long)]
        mask_only: bool,
    },
    /// Paired t-tests of final snapshots against the baseline task.
    Report {
        /// Directory holding decode results; defaults to --out.
        #[arg(long)]
        results: Option<PathBuf>,
        #[arg(long)]
        baseline: Option<String>,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Word-vector sentence averages for a sentence file.
    Embed {
        #[arg(long)]
        vectors: PathBuf,
        /// One sentence per line.
        #[arg(long)]
        sentences: PathBuf,
        #[arg(long)]
        lowercase: bool,
        #[arg(long, default_value = "word-vectors")]
        name: String,
    },
}

fn parse_task(s: &str) -> Result<Task, String> {
    s.parse().map_err(|e: repdecode::Error| e.to_string())
}

fn run(cli: Cli) -> CliResult<()> {
    let file = match &cli.common.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let mut flags = Overrides {
        out: cli.common.out,
        seed: cli.common.seed,
        workers: cli.common.workers,
        ..Overrides::default()
    };
    match &cli.command {
        Command::Pca { manifest, components, .. } => {
            flags.manifest = manifest.clone();
            flags.components = *components;
        }
        Command::Decode { manifest, beta_grid, folds, inner_folds } => {
            flags.manifest = manifest.clone();
            flags.beta_grid = beta_grid.clone();
            flags.folds = *folds;
            flags.inner_folds = *inner_folds;
        }
        Command::Rsa { manifest } => flags.manifest = manifest.clone(),
        Command::Probe { manifest, rank, epochs, test_fraction, .. } => {
            flags.manifest = manifest.clone();
            flags.probe_rank = *rank;
            flags.probe_epochs = *epochs;
            flags.probe_test_fraction = *test_fraction;
        }
        Command::Report { alpha, .. } => flags.alpha = *alpha,
        Command::Corpus { .. } | Command::Embed { .. } => {}
    }
    let cfg = AnalysisConfig::resolve(file, flags)?;

    match cli.command {
        Command::Pca { brains, .. } => {
            for c in pca::run(&brains, &cfg)? {
                println!("{}\t{}\tretained {:.4}", c.stem, c.path.display(), c.retained_variance);
            }
        }
        Command::Decode { .. } => {
            let out = decode::run(&cfg)?;
            println!(
                "{} results written to {}",
                out.records.len(),
                cfg.out.join(decode::RESULTS_FILE).display()
            );
        }
        Command::Rsa { .. } => {
            let map = tools::rsa(&cfg)?;
            println!("{} tasks written to {}", map.tasks.len(), cfg.out.display());
        }
        Command::Probe { conllu, .. } => {
            for r in probe::run(&conllu, &cfg)? {
                println!("{}\trun {}\tstep {}\tUAS {:.4}", r.task, r.run, r.step, r.uas);
            }
        }
        Command::Corpus { corpus, task, train, dev, test, mask_rate, mask_only } => {
            let mask = if mask_only {
                MaskConfig::mask_only(mask_rate)
            } else {
                MaskConfig {
                    rate: mask_rate,
                    ..MaskConfig::default()
                }
            };
            let sizes = SplitSizes { train, dev, test };
            tools::corpus(&corpus, task, sizes, &mask, &cfg)?;
            println!("dataset written to {}", cfg.out.display());
        }
        Command::Report { results, baseline, .. } => {
            let dir = results.unwrap_or_else(|| cfg.out.clone());
            let report = report::run(&dir, baseline.as_deref(), &cfg)?;
            for c in &report.comparisons {
                println!(
                    "{}\t{}\tt = {:.3}\tp = {:.3e}{}",
                    c.comparison,
                    c.metric,
                    c.t,
                    c.p,
                    if c.significant { "\t*" } else { "" }
                );
            }
        }
        Command::Embed { vectors, sentences, lowercase, name } => {
            let path = tools::embed(&vectors, &sentences, lowercase, &name, &cfg)?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
