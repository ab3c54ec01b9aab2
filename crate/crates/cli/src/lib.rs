//! Command-line front end: reads situation files, builds (or loads cached)
//! games, and emits reports.
//!
//! Exit codes: 0 success, 1 input error, 2 allocation outside the core,
//! 3 size guard exceeded, 4 rule not applicable to the situation.

pub mod cache;
pub mod commands;
pub mod report;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

pub use report::{Format, ReportDocument};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 1;
pub const EXIT_NOT_IN_CORE: u8 = 2;
pub const EXIT_GUARD: u8 = 3;
pub const EXIT_MISMATCH: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "chaincore", version, about = "Profit sharing in multi-retailer, multi-supplier chains")]
pub struct Cli {
    /// Directory holding cached characteristic functions.
    #[arg(long, global = true, default_value = cache::DEFAULT_DIR)]
    pub cache_dir: PathBuf,
    /// Always rebuild, and do not write the cache.
    #[arg(long, global = true)]
    pub no_cache: bool,
    /// Grid points per axis in the first solver pass.
    #[arg(long, global = true)]
    pub resolution: Option<usize>,
    /// Number of shrinking grid passes.
    #[arg(long, global = true)]
    pub rounds: Option<usize>,
    /// Largest number of order variables in one coalition problem.
    #[arg(long, global = true)]
    pub max_dims: Option<usize>,
    #[arg(long, global = true, value_enum, default_value = "json")]
    pub format: Format,
    /// Write the report here instead of standard output.
    #[arg(short, long, global = true)]
    pub out: Option<PathBuf>,
    /// Include wall-clock timings (makes reports nondeterministic).
    #[arg(long, global = true)]
    pub timings: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Coalition values v(R, S) and their optimal orders.
    Value {
        situation: PathBuf,
        /// Restrict to one pair, e.g. "R=1,2;S=1" (player ids).
        #[arg(long)]
        coalition: Option<String>,
    },
    /// Compute an allocation and check it against the core.
    Allocate {
        situation: PathBuf,
        #[arg(value_enum)]
        rule: RuleArg,
        /// Also check the five characterizing axioms.
        #[arg(long)]
        axioms: bool,
    },
    /// Check a rule's allocation, or payoffs from a file, against the core.
    CoreCheck {
        situation: PathBuf,
        /// A rule name (altruistic, sc, sc-star) or a file of n + m payoffs.
        source: String,
        /// Also compute the largest core payoff of this supplier (id).
        #[arg(long)]
        supplier_max: Option<String>,
    },
    /// Everything: v-table, structure checks, every applicable rule with
    /// core and axiom checks.
    Report { situation: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    Altruistic,
    Sc,
    ScStar,
}

/// An error together with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Self {
            code,
            error: error.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

impl From<chaincore::Error> for Failure {
    fn from(e: chaincore::Error) -> Self {
        let code = match e {
            chaincore::Error::Capacity(_) => EXIT_GUARD,
            chaincore::Error::RequiresUnbounded(_) => EXIT_MISMATCH,
            _ => EXIT_INPUT,
        };
        Self::new(code, e)
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast::<chaincore::Error>() {
            Ok(core) => core.into(),
            Err(e) => Self::new(EXIT_INPUT, e),
        }
    }
}

/// Parses `args`, runs the command, prints diagnostics, and returns the exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match commands::execute(&cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {f}");
            f.code
        }
    }
}
