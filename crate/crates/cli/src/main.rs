//! `pf`: validate, personalize, review, compile and run personalized
//! conversational agents.
//!
//! Exit codes: 0 success, 1 validation errors, 2 usage or I/O errors,
//! 3 adapter failures. No output file is written unless the command
//! succeeds.

mod chat;
mod commands;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "pf",
    version,
    about = "Personalized conversational agent pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
enum Format {
    #[default]
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check every model in a workspace directory.
    Validate {
        workspace: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Rewrite the agent's predefined responses for one mapping.
    Personalize {
        workspace: PathBuf,
        /// Mapping id.
        #[arg(long = "map")]
        map: String,
        /// Use the deterministic offline rewriter.
        #[arg(long)]
        mock: bool,
        /// Output directory (defaults to the workspace).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare a base agent with a personalized one.
    Diff {
        base: PathBuf,
        adapted: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Compile a personalized agent bundle (.pab) for one mapping.
    Generate {
        workspace: PathBuf,
        #[arg(long = "map")]
        map: String,
        /// Use offline adapters when personalization has to run.
        #[arg(long)]
        mock: bool,
        /// Re-run personalization even if an adapted agent file exists.
        #[arg(long)]
        fresh: bool,
        /// Output directory (defaults to the workspace).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve bundles over HTTP.
    Run {
        bundles: Vec<PathBuf>,
        /// Use the deterministic offline generator.
        #[arg(long)]
        mock: bool,
        /// Listen address (overrides PF_BIND_ADDR).
        #[arg(long)]
        bind: Option<SocketAddr>,
        /// Publish replies immediately instead of after their typing delay.
        #[arg(long)]
        no_typing_delay: bool,
    },
    /// Talk to a bundle in the terminal.
    Chat {
        bundle: PathBuf,
        #[arg(long)]
        mock: bool,
    },
}

/// An error together with the exit code it maps to.
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub const EXIT_INVALID: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_ADAPTER: u8 = 3;

impl Failure {
    pub fn invalid(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: EXIT_INVALID,
            error: error.into(),
        }
    }

    pub fn usage(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: EXIT_USAGE,
            error: error.into(),
        }
    }

    pub fn adapter(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: EXIT_ADAPTER,
            error: error.into(),
        }
    }
}

fn init_logging() {
    use tracing_subscriber::EnvFilter;
    let filter = EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info"));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging();
    let outcome = match cli.command {
        Command::Validate { workspace, format } => commands::validate(&workspace, format),
        Command::Personalize {
            workspace,
            map,
            mock,
            out,
        } => commands::personalize(&workspace, &map, mock, out.as_deref()),
        Command::Diff {
            base,
            adapted,
            format,
        } => commands::diff(&base, &adapted, format),
        Command::Generate {
            workspace,
            map,
            mock,
            fresh,
            out,
        } => commands::generate(&workspace, &map, mock, fresh, out.as_deref()),
        Command::Run {
            bundles,
            mock,
            bind,
            no_typing_delay,
        } => commands::run(&bundles, mock, bind, no_typing_delay),
        Command::Chat { bundle, mock } => chat::chat(&bundle, mock),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {:#}", failure.error);
            ExitCode::from(failure.code)
        }
    }
}
