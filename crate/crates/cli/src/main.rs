use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use credcore::classifier::Mode;
use credcore::pipeline::{self, Command, PipelineConfig, Workspace, DEMO_OVERRIDES};
use credcore::Error;

#[derive(Parser, Debug)]
#[command(name = "credi", version, about = "Credibility detection and susceptibility analysis")]
struct Cli {
    /// Work directory holding all artifacts.
    #[arg(long, global = true, default_value = "work")]
    dir: PathBuf,
    /// Config file with `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one config key; may be repeated.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Generate a synthetic raw corpus with topic assignments.
    Synth,
    /// Clean raw JSONL files into the work directory.
    Ingest {
        #[arg(long)]
        submissions: Option<PathBuf>,
        #[arg(long)]
        comments: Option<PathBuf>,
        #[arg(long)]
        sources: Option<PathBuf>,
    },
    /// Embed every submission and comment with the deterministic synthetic provider.
    EmbedSynth,
    /// Mine similar submission pairs.
    Pair,
    /// Train the residual adapter and write adapted embeddings.
    TrainAdapter,
    /// Pick the most similar verified anchor for every submission.
    Anchors,
    TrainClassifier {
        #[arg(long, default_value = "siamese")]
        mode: Mode,
    },
    /// Evaluate a trained head on the test split.
    Eval {
        #[arg(long, default_value = "siamese")]
        mode: Mode,
    },
    /// Build the post-to-post graph.
    BuildP2p,
    TrainGcn,
    /// node2vec embeddings plus a dense head.
    Node2vec,
    /// Topic by subreddit susceptibility report.
    Susceptibility {
        #[arg(long)]
        topics: Option<PathBuf>,
    },
    /// Run every step on synthetic data.
    Demo,
    /// Finite-difference gradient checks.
    GradCheck,
}

impl Cmd {
    fn into_command(self) -> Command {
        match self {
            Cmd::Synth => Command::Synth,
            Cmd::Ingest {
                submissions,
                comments,
                sources,
            } => Command::Ingest {
                submissions,
                comments,
                sources,
            },
            Cmd::EmbedSynth => Command::EmbedSynth,
            Cmd::Pair => Command::Pair,
            Cmd::TrainAdapter => Command::TrainAdapter,
            Cmd::Anchors => Command::Anchors,
            Cmd::TrainClassifier { mode } => Command::TrainClassifier { mode },
            Cmd::Eval { mode } => Command::Eval { mode },
            Cmd::BuildP2p => Command::BuildP2p,
            Cmd::TrainGcn => Command::TrainGcn,
            Cmd::Node2vec => Command::Node2vec,
            Cmd::Susceptibility { topics } => Command::Susceptibility { topics },
            Cmd::Demo => Command::Demo,
            Cmd::GradCheck => Command::GradCheck,
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 3,
        Error::Numeric(_) => 4,
        _ => 2,
    }
}

fn build_config(cli: &Cli, command: &Command) -> Result<PipelineConfig, Error> {
    let mut cfg = PipelineConfig::default();
    if *command == Command::Demo {
        for (k, v) in DEMO_OVERRIDES {
            cfg.set(k, v)?;
        }
    }
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    for kv in &cli.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let mut cli = Cli::parse();
    let command = std::mem::replace(&mut cli.command, Cmd::Synth).into_command();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    let result = build_config(&cli, &command).and_then(|cfg| {
        eprintln!("config:");
        for (k, v) in cfg.entries() {
            eprintln!("  {k} = {v}");
        }
        pipeline::run(&Workspace::new(&cli.dir), &cfg, &command)
    });
    match result {
        Ok(out) => {
            println!("{}", serde_json::to_string_pretty(&out.summary).expect("summary serializes"));
            eprintln!("manifest {} ({} ms)", out.manifest.digest(), out.manifest.wall_time_ms);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
