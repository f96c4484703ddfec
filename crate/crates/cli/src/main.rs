//! `ltlmine`: check, mine, decode, evaluate and generate LTL specifications
//! over symbolic lasso traces.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Exit codes.
pub const EXIT_HOLDS: u8 = 0;
pub const EXIT_VIOLATED: u8 = 1;
pub const EXIT_TIMEOUT: u8 = 2;
pub const EXIT_NO_FORMULA: u8 = 3;
pub const EXIT_USAGE: u8 = 64;
pub const EXIT_DATA: u8 = 65;
pub const EXIT_SOFTWARE: u8 = 70;
pub const EXIT_IO: u8 = 74;

#[derive(Parser, Debug)]
#[command(name = "ltlmine", version, about = "LTL specification mining over symbolic lasso traces")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Number of propositions (a, b, ...).
    #[arg(long, global = true, default_value_t = 5)]
    pub alphabet: u8,
    /// Per-check timeout in seconds.
    #[arg(long, global = true, default_value_t = 30.0)]
    pub timeout_secs: f64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check whether every word of a trace satisfies a formula.
    Check {
        trace: String,
        formula: String,
        /// Ask whether some represented word satisfies the formula instead.
        #[arg(long)]
        existential: bool,
    },
    /// Enumerate the formulae a trace satisfies.
    Mine {
        trace: String,
        #[arg(long, default_value_t = 3)]
        max_ops: usize,
        /// Traces to discriminate against (one per line, or a dataset
        /// file); prints only the most distinctive formula.
        #[arg(long)]
        others: Option<PathBuf>,
        /// Keep syntactic duplicates.
        #[arg(long)]
        no_elimination: bool,
    },
    /// Generate formulae for traces with beam search.
    Decode(commands::DecodeArgs),
    /// Score predictions against a dataset.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long, default_value_t = 1000)]
        distinct_limit: usize,
        /// Per-pair records plus a summary, as JSON lines.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Distinctiveness against trace and formula lengths, as CSV.
        #[arg(long)]
        scatter: Option<PathBuf>,
    },
    /// Generate a dataset of (trace, formula) pairs.
    Gen(commands::GenArgs),
    /// Serve a built-in scorer over the line protocol on stdin/stdout.
    Peer {
        #[arg(long, default_value = "uniform")]
        scorer: String,
        #[arg(long, hide = true)]
        die_after: Option<usize>,
    },
    /// Time mining against n-gram decoding on the same traces.
    Compare(commands::CompareArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    if let Some(w) = cli.global.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    let g = &cli.global;
    let result = match cli.command {
        Command::Check { trace, formula, existential } => commands::check(g, &trace, &formula, existential),
        Command::Mine { trace, max_ops, others, no_elimination } => {
            commands::mine(g, &trace, max_ops, others.as_deref(), no_elimination)
        }
        Command::Decode(args) => commands::decode(g, &args),
        Command::Eval { dataset, predictions, distinct_limit, report, scatter } => {
            commands::eval(g, &dataset, &predictions, distinct_limit, report.as_deref(), scatter.as_deref())
        }
        Command::Gen(args) => commands::gen(g, &args),
        Command::Peer { scorer, die_after } => commands::peer(g, &scorer, die_after),
        Command::Compare(args) => commands::compare(g, &args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
