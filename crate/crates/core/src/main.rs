use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use narrecall::pipeline::{self, BackendKind, Command, PipelineConfig};

#[derive(Parser)]
#[command(name = "narrecall", version, about = "Event segmentation and recall scoring pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Backend for both LLM and embedding calls.
    #[arg(long, global = true, value_enum)]
    backend: Option<Backend>,
    /// LLM temperature; repeat to give several.
    #[arg(long = "temperature", global = true)]
    temperatures: Vec<f64>,
    /// LLM instances per narrative and temperature.
    #[arg(long, global = true)]
    instances: Option<usize>,
    /// Token window for matching boundaries and peaks.
    #[arg(long, global = true)]
    tolerance: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Http,
    Mock,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Write a synthetic corpus under {out}/synthetic.
    Simulate,
    /// Segment narratives and recall transcripts with the LLM backend.
    Segment,
    /// Validate and copy human annotations and ratings.
    IngestHuman,
    /// Boundary counts, agreement, shared/distinct, consistency, normative boundaries.
    AnalyzeSeg,
    /// Embed narrative and recall events.
    Embed,
    /// Intersubject agreement and event recall scores.
    ScoreRecall,
    /// Split-half consistency and regression against human gist scores.
    Validate,
    /// SVG figures and a Markdown digest.
    Report,
    /// Every step in order.
    All,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Simulate => Command::Simulate,
            Cmd::Segment => Command::Segment,
            Cmd::IngestHuman => Command::IngestHuman,
            Cmd::AnalyzeSeg => Command::AnalyzeSeg,
            Cmd::Embed => Command::Embed,
            Cmd::ScoreRecall => Command::ScoreRecall,
            Cmd::Validate => Command::Validate,
            Cmd::Report => Command::Report,
            Cmd::All => Command::All,
        }
    }
}

fn config(cli: &Cli) -> anyhow::Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(b) = cli.backend {
        let kind = match b {
            Backend::Http => BackendKind::Http,
            Backend::Mock => BackendKind::Mock,
        };
        cfg.llm.backend = kind;
        cfg.embedding.backend = kind;
    }
    if !cli.temperatures.is_empty() {
        cfg.llm.temperatures = cli.temperatures.clone();
        if !cfg.llm.temperatures.contains(&cfg.segmentation.normative_temperature) {
            cfg.segmentation.normative_temperature = cfg.llm.temperatures[0];
        }
    }
    if let Some(n) = cli.instances {
        cfg.llm.n_instances = n;
    }
    if let Some(k) = cli.tolerance {
        cfg.segmentation.tolerance = k;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = config(&cli).and_then(|cfg| pipeline::run(cli.command.into(), &cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
