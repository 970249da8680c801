use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

mod commands;
mod io;

use io::Failure;

#[derive(Parser, Debug)]
#[command(
    name = "policywatch",
    version,
    about = "Detect market-policy violations in app-store comments",
    propagate_version = true
)]
pub struct Cli {
    /// Pipeline configuration file (TOML). Flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Language tag of the corpus being processed.
    #[arg(long, global = true)]
    pub lang: Option<String>,

    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Validate a raw comment file and write it normalized, with ids filled in.
    Ingest(IngestArgs),
    /// Learn topics from the policy documents.
    TrainBtm(TrainArgs),
    /// Assign a behavior to every topic.
    LabelTopics(LabelArgs),
    /// Propose behavior candidates for comments above the probability threshold.
    Propose(ProposeArgs),
    /// Load candidates into the triage store and serve the review API.
    TriageServe(TriageArgs),
    /// Generate semantic rules from labeled comments.
    ExtractRules(ExtractArgs),
    /// Classify comments with a rule set.
    Match(MatchArgs),
    /// Aggregate matches into per-app scores, rating breakdown and reaction times.
    Report(ReportArgs),
    /// Score predictions against gold labels.
    Evaluate(EvaluateArgs),
    /// Run the whole pipeline on the bundled synthetic corpus.
    Demo(DemoArgs),
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    /// Raw comments (JSONL).
    #[arg(long)]
    pub comments: Option<PathBuf>,
    /// App records (JSONL) to check against the comments.
    #[arg(long)]
    pub apps: Option<PathBuf>,
    /// Normalized output; defaults to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fail when any line is rejected.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub policies: Option<PathBuf>,
    /// Model output file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Number of topics; defaults to the number of policy documents.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct LabelArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub policies: Option<PathBuf>,
    /// Labeling output (JSON).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ProposeArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub labeling: Option<PathBuf>,
    #[arg(long)]
    pub comments: Option<PathBuf>,
    /// Candidate output (JSONL).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Args, Debug)]
pub struct TriageArgs {
    /// Store directory holding decisions.log and snapshot.json.
    #[arg(long)]
    pub dir: Option<PathBuf>,
    /// Candidates to enqueue (JSONL). Already queued ones are skipped.
    #[arg(long)]
    pub candidates: Option<PathBuf>,
    /// Comments the candidates refer to (JSONL).
    #[arg(long)]
    pub comments: Option<PathBuf>,
    /// Decisions to apply before serving (JSONL of {item_id, verdict, segments?, reviewer?}).
    #[arg(long)]
    pub apply: Option<PathBuf>,
    /// Stop after enqueueing and applying instead of serving.
    #[arg(long)]
    pub enqueue_only: bool,
    #[arg(long)]
    pub port: Option<u16>,
    /// Pin all timestamps (RFC 3339) for reproducible logs.
    #[arg(long)]
    pub fixed_time: Option<String>,
}

#[derive(Args, Debug)]
pub struct ExtractArgs {
    /// Labeled corpus (JSON) as written by the triage export.
    #[arg(long)]
    pub labeled: Option<PathBuf>,
    /// Read the labeled corpus straight from a triage store directory.
    #[arg(long, conflicts_with = "labeled")]
    pub store: Option<PathBuf>,
    /// Policy documents, used for behaviors without labeled comments.
    #[arg(long)]
    pub policies: Option<PathBuf>,
    /// Skip the policy fallback.
    #[arg(long, conflicts_with = "policies")]
    pub no_policies: bool,
    /// Rule output (JSONL).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-behavior keyword sets and rule counts (JSON).
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[arg(long)]
    pub max_distance: Option<u32>,
    #[arg(long)]
    pub min_f1: Option<f64>,
}

#[derive(Args, Debug)]
pub struct MatchArgs {
    /// Rule file (JSONL).
    #[arg(long, conflicts_with = "bundled_rules")]
    pub rules: Option<PathBuf>,
    /// Use the rules shipped with the tool.
    #[arg(long)]
    pub bundled_rules: bool,
    #[arg(long)]
    pub comments: Option<PathBuf>,
    /// Matches output (JSONL).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[arg(long)]
    pub matches: Option<PathBuf>,
    #[arg(long)]
    pub comments: Option<PathBuf>,
    /// App records with removal dates (JSONL); optional.
    #[arg(long)]
    pub apps: Option<PathBuf>,
    /// Report output (JSON).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the rating breakdown as CSV.
    #[arg(long)]
    pub ratings_csv: Option<PathBuf>,
    /// Leave comments with empty text out of the rating breakdown.
    #[arg(long)]
    pub exclude_blank: bool,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Matches file (JSONL) with the predicted labels.
    #[arg(long)]
    pub predictions: PathBuf,
    /// Gold labels (JSONL of {comment_id, behavior}).
    #[arg(long)]
    pub gold: PathBuf,
    /// Evaluation table (CSV); defaults to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DemoArgs {
    #[arg(long, default_value_t = 11)]
    pub seed: u64,
    /// Comments generated per behavior.
    #[arg(long, default_value_t = 50)]
    pub per_behavior: usize,
    /// Neutral comments generated.
    #[arg(long, default_value_t = 50)]
    pub neutral: usize,
    /// Directory for the generated artifacts.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    init_logging(cli.verbose);
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}
