mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use imop_core::ImopError;
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "imop", version, about = "Learn multiobjective decision problems from observed decisions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: Global,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the seed in the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = "IMOP_OUT_DIR", default_value = "imop-out")]
    pub out: PathBuf,
    /// Worker threads, 0 for one per core. Never changes results.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Solve weighted-sum problems of a fixture at given weights.
    Forward,
    /// Estimate parameters for one (N, K) cell.
    Estimate,
    /// Test whether an estimate is identifiable.
    TestIdent,
    /// Run an estimation campaign over an N × K grid.
    Replicate,
    /// Write a single-level big-M model in LP format.
    ExportModel,
    /// Two-segment example: sample mean against the learned objectives.
    IntroDemo,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Forward => "forward",
            Command::Estimate => "estimate",
            Command::TestIdent => "test-ident",
            Command::Replicate => "replicate",
            Command::ExportModel => "export-model",
            Command::IntroDemo => "intro-demo",
        }
    }
}

/// 1 for anything the user can fix in the input, 2 for numerical failures.
fn exit_status(e: &ImopError) -> u8 {
    match e {
        ImopError::Infeasible | ImopError::Unbounded | ImopError::Solver(_) | ImopError::Diverged(_) => 2,
        _ => 1,
    }
}

fn error_kind(e: &ImopError) -> &'static str {
    match e {
        ImopError::InvalidModel(_) => "invalid-model",
        ImopError::InvalidParams(_) => "invalid-params",
        ImopError::InvalidArgument(_) => "invalid-argument",
        ImopError::Infeasible => "infeasible",
        ImopError::Unbounded => "unbounded",
        ImopError::Solver(_) => "solver",
        ImopError::Diverged(_) => "diverged",
        ImopError::Parse { .. } => "parse",
        ImopError::Io(_) => "io",
        ImopError::Json(_) => "json",
        ImopError::Csv(_) => "csv",
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.global.threads).build_global() {
        log::warn!("thread pool already configured: {e}");
    }

    let g = &cli.global;
    let result = match cli.command {
        Command::Forward => commands::forward(g),
        Command::Estimate => commands::estimate(g, true),
        Command::Replicate => commands::estimate(g, false),
        Command::TestIdent => commands::test_ident(g),
        Command::ExportModel => commands::export_model(g),
        Command::IntroDemo => commands::intro_demo(g),
    };
    match result {
        Ok(mut value) => {
            value["status"] = json!("ok");
            value["command"] = json!(cli.command.name());
            println!("{value}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let diag = json!({
                "status": "error",
                "command": cli.command.name(),
                "kind": error_kind(&e),
                "message": e.to_string(),
            });
            eprintln!("{diag}");
            ExitCode::from(exit_status(&e))
        }
    }
}
