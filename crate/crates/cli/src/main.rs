//! `lanlan`: the question-mining pipeline as a set of resumable stages that
//! share a workspace directory.

mod config;
mod stages;
mod workspace;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lanlan_core::textprep::{normalize, Mode};
use lanlan_core::Exec;

use config::LoadedConfig;
use workspace::{CliError, CliResult, StageRun, Workspace};

#[derive(Parser)]
#[command(name = "lanlan", version, about = "Classify Q&A questions and model their growth")]
struct Cli {
    /// Pipeline configuration (JSON).
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Workspace directory; overrides the config's `workspace`.
    #[arg(long, short, global = true, env = "LANLAN_WORKSPACE")]
    workspace: Option<PathBuf>,
    /// Run data-parallel steps on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    /// Repeat for more log output.
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SeedArg {
    /// Falls back to the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RequiredSeed {
    #[arg(long)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Read the dump or question TSV and the annotations into questions.tsv.
    Ingest {
        #[arg(long)]
        dump: Option<PathBuf>,
        #[arg(long)]
        questions: Option<PathBuf>,
        #[arg(long)]
        annotations: Option<PathBuf>,
    },
    /// Write the training-mode token corpus, or normalize `--text` to stdout.
    Normalize {
        #[arg(long)]
        text: Option<String>,
        #[arg(long, default_value = "training")]
        mode: String,
    },
    /// Count word co-occurrences over the corpus.
    Cooccur {
        #[arg(long)]
        window: Option<usize>,
    },
    /// Train word embeddings on the co-occurrence counts.
    TrainEmbeddings {
        #[command(flatten)]
        seed: RequiredSeed,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Average word vectors per question; also writes keyword counts.
    Featurize,
    /// Train one classifier on the labeled questions.
    TrainClassifier {
        #[command(flatten)]
        seed: RequiredSeed,
        /// Restrict training to one program.
        #[arg(long)]
        program: Option<String>,
    },
    /// Stratified k-fold cross-validation per program.
    CrossValidate {
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        folds: Option<usize>,
    },
    /// Train on some programs and test on another.
    Transfer {
        #[command(flatten)]
        seed: SeedArg,
        /// Defaults to the last configured program.
        #[arg(long)]
        test: Option<String>,
        /// Defaults to every other program.
        #[arg(long)]
        train: Vec<String>,
    },
    /// Score every featurized question with the trained classifier.
    Predict {
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Keyword-matching and keyword-count baselines.
    Baseline {
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        folds: Option<usize>,
    },
    /// Per-feature regressions of problem and support counts on package features.
    Associate {
        #[arg(long)]
        packages: Option<PathBuf>,
    },
    /// Exhaustive best-subset search over package features.
    Subsets {
        #[arg(long)]
        packages: Option<PathBuf>,
        #[arg(long, short)]
        k: Option<usize>,
        /// Ranked subsets to report.
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// Build cumulative series and fit the growth model.
    FitGrowth {
        #[command(flatten)]
        seed: RequiredSeed,
    },
    /// Fit on a prefix of each series and compare with the final count.
    Forecast {
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        fraction: Option<f64>,
    },
    /// Compare fitted parameters between problem reports and support requests.
    CompareGrowth {
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Collect the summary tables into one document.
    Report,
}

/// Everything a stage needs besides its own arguments.
pub(crate) struct Ctx {
    pub cfg: LoadedConfig,
    pub ws: Workspace,
    pub exec: Exec,
}

impl Ctx {
    pub fn stage(&self, name: &'static str, seed: Option<u64>, settings: serde_json::Value) -> StageRun<'_> {
        StageRun::new(&self.ws, name, &self.cfg.hash_view(), seed, settings)
    }

    /// A flag value, else the configured path resolved against the config file.
    pub fn input_path(&self, flag: &Option<PathBuf>, configured: &Option<PathBuf>) -> Option<PathBuf> {
        flag.clone().or_else(|| configured.as_ref().map(|p| self.cfg.resolve(p)))
    }

    pub(crate) fn seed(&self, stage: &str, flag: &SeedArg) -> CliResult<u64> {
        flag.seed
            .or(self.cfg.config.seed)
            .ok_or_else(|| CliError::Input(format!("{stage}: a seed is required (--seed or `seed` in the config)")))
    }
}

fn run(cli: Cli) -> CliResult<()> {
    if let Command::Normalize { text: Some(text), mode } = &cli.command {
        let mode: Mode = mode.parse().map_err(|e| CliError::Input(format!("normalize: {e}")))?;
        println!("{}", normalize(text, mode).join());
        return Ok(());
    }
    let cfg = LoadedConfig::load(cli.config.as_deref())?;
    let root = match (&cli.workspace, &cfg.config.workspace) {
        (Some(w), _) => w.clone(),
        (None, Some(w)) => cfg.resolve(w),
        (None, None) => {
            return Err(CliError::Input(
                "no workspace: pass --workspace, set LANLAN_WORKSPACE or `workspace` in the config".into(),
            ))
        }
    };
    let ctx = Ctx {
        ws: Workspace::open(root)?,
        cfg,
        exec: if cli.sequential { Exec::Sequential } else { Exec::Parallel },
    };
    match cli.command {
        Command::Ingest { dump, questions, annotations } => stages::text::ingest(&ctx, dump, questions, annotations),
        Command::Normalize { mode, .. } => stages::text::normalize(&ctx, &mode),
        Command::Cooccur { window } => stages::text::cooccur(&ctx, window),
        Command::TrainEmbeddings { seed, epochs } => stages::text::train_embeddings(&ctx, seed.seed, epochs),
        Command::Featurize => stages::text::featurize(&ctx),
        Command::TrainClassifier { seed, program } => stages::classify::train(&ctx, seed.seed, program),
        Command::CrossValidate { seed, folds } => {
            let seed = ctx.seed("cross-validate", &seed)?;
            stages::classify::cross_validate(&ctx, seed, folds)
        }
        Command::Transfer { seed, test, train } => {
            let seed = ctx.seed("transfer", &seed)?;
            stages::classify::transfer(&ctx, seed, test, train)
        }
        Command::Predict { model } => stages::classify::predict(&ctx, model),
        Command::Baseline { seed, folds } => {
            let seed = ctx.seed("baseline", &seed)?;
            stages::classify::baseline(&ctx, seed, folds)
        }
        Command::Associate { packages } => stages::packages::associate(&ctx, packages),
        Command::Subsets { packages, k, top } => stages::packages::subsets(&ctx, packages, k, top),
        Command::FitGrowth { seed } => stages::growth::fit(&ctx, seed.seed),
        Command::Forecast { seed, fraction } => {
            let seed = ctx.seed("forecast", &seed)?;
            stages::growth::forecast(&ctx, seed, fraction)
        }
        Command::CompareGrowth { reference } => stages::growth::compare(&ctx, reference),
        Command::Report => stages::report::report(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lanlan: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
