//! `ptss`: check rule formats, derive transitions, compare processes and
//! evaluate formulas for a probabilistic transition system specification.

mod commands;

use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ptss_core::bisim::Kind;
use ptss_core::derive::DEFAULT_FUEL;
use serde_json::json;

use commands::{CliError, Outcome};

#[derive(Debug, Parser)]
#[command(name = "ptss", version, about = "Workbench for probabilistic transition system specifications")]
struct Cli {
    /// Output style: human-readable text or one JSON document.
    #[arg(long, global = true, value_enum, default_value_t = Output::Text)]
    output: Output,

    /// Maximum number of explored terms per derivation.
    #[arg(long, global = true, default_value_t = DEFAULT_FUEL, value_parser = parse_fuel)]
    fuel: usize,

    /// Accept rules with colliding binders so that `check` can report them.
    #[arg(long, global = true)]
    lenient: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Output {
    Text,
    Machine,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check every rule against one format or all of them.
    Check {
        spec: PathBuf,
        /// ntmufxtheta, convex, abstracted, obliterated or all.
        #[arg(long, default_value = "all")]
        format: String,
    },
    /// List the certain transitions reachable from a term.
    Derive {
        spec: PathBuf,
        /// A closed state term or the name of a `def`.
        #[arg(long)]
        term: String,
        /// Fail with exit code 1 when some transition stays unknown.
        #[arg(long)]
        require_complete: bool,
    },
    /// Decide whether two terms are related.
    Bisim {
        spec: PathBuf,
        #[arg(long, value_parser = parse_kind)]
        rel: Kind,
        left: String,
        right: String,
        /// Print a distinguishing formula when the terms are not related.
        #[arg(long)]
        explain: bool,
    },
    /// Evaluate a formula at a term.
    Mc {
        spec: PathBuf,
        #[arg(long)]
        term: String,
        #[arg(long)]
        formula: String,
        /// Require the formula to lie in this logic (b, c, a or o).
        #[arg(long, value_parser = parse_kind)]
        logic: Option<Kind>,
    },
    /// Print a formula that separates two terms.
    Distinguish {
        spec: PathBuf,
        #[arg(long, value_parser = parse_kind)]
        rel: Kind,
        left: String,
        right: String,
    },
    /// Search for contexts that break congruence of a relation.
    Probe {
        spec: PathBuf,
        #[arg(long, value_parser = parse_kind)]
        rel: Kind,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_fuel(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("fuel must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_kind(s: &str) -> Result<Kind, String> {
    s.parse()
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Check { .. } => "check",
            Command::Derive { .. } => "derive",
            Command::Bisim { .. } => "bisim",
            Command::Mc { .. } => "mc",
            Command::Distinguish { .. } => "distinguish",
            Command::Probe { .. } => "probe",
        }
    }
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let env = commands::Env {
        fuel: cli.fuel,
        lenient: cli.lenient,
    };
    match &cli.command {
        Command::Check { spec, format } => commands::check(&env, spec, format),
        Command::Derive {
            spec,
            term,
            require_complete,
        } => commands::derive(&env, spec, term, *require_complete),
        Command::Bisim {
            spec,
            rel,
            left,
            right,
            explain,
        } => commands::bisim(&env, spec, *rel, left, right, *explain),
        Command::Mc {
            spec,
            term,
            formula,
            logic,
        } => commands::mc(&env, spec, term, formula, *logic),
        Command::Distinguish { spec, rel, left, right } => commands::distinguish(&env, spec, *rel, left, right),
        Command::Probe {
            spec,
            rel,
            trials,
            seed,
        } => commands::probe(&env, spec, *rel, *trials, *seed),
    }
}

/// ANSI colouring is opt-in through `PTSS_COLOR`.
fn color_enabled() -> bool {
    std::env::var("PTSS_COLOR").is_ok_and(|v| matches!(v.to_ascii_lowercase().as_str(), "1" | "true" | "on" | "always" | "yes"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = cli.command.name();
    let (code, text, mut doc) = match run(&cli) {
        Ok(outcome) => (outcome.code, outcome.render(color_enabled()), outcome.doc),
        Err(e) => (2, format!("error: {e}"), json!({ "error": e.to_string() })),
    };
    // Write errors (a closed pipe, say) must not turn a verdict into a panic.
    let _ = match cli.output {
        Output::Text if text.is_empty() => Ok(()),
        Output::Text if code == 2 => writeln!(io::stderr(), "{text}"),
        Output::Text => writeln!(io::stdout(), "{text}"),
        Output::Machine => {
            doc["command"] = json!(command);
            doc["exit_code"] = json!(code);
            let rendered = serde_json::to_string_pretty(&doc).expect("JSON values serialize");
            writeln!(io::stdout(), "{rendered}")
        }
    };
    ExitCode::from(code)
}
