use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use dyadic_cli::commands::{
    self, CheckTarget, CliError, EvalTarget, Options, Outcome, GATE_FAILURE,
};
use dyadic_cli::instance::Instance;
use dyadic_cli::{run_suite_to, suite_report, write_gate_csv};
use dyadic_core::conditions::{TestVariant, WeakReading};
use dyadic_core::suite::SuiteSizes;

#[derive(Parser)]
#[command(
    name = "dyadic",
    version,
    about = "Dyadic two-weight operators: evaluators, checks and randomized suites"
)]
struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct InstanceArgs {
    /// Instance file (JSON).
    #[arg(long)]
    instance: PathBuf,
    /// Seed for randomized searches; overrides the instance seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the result table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Use exact rational arithmetic where supported.
    #[arg(long)]
    exact: bool,
    /// Treat leaves as indivisible point masses when allocating.
    #[arg(long)]
    atomic_mode: bool,
    /// Test vector for family cubes in the second condition.
    #[arg(long, value_enum, default_value_t = Variant::Indicator)]
    variant: Variant,
    /// Reading of the second weak-type condition.
    #[arg(long, value_enum, default_value_t = Reading::Printed)]
    reading: Reading,
    /// Name of the instance family to use.
    #[arg(long)]
    family: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one quantity on an instance.
    Eval {
        #[arg(value_enum)]
        what: EvalWhat,
        #[command(flatten)]
        args: InstanceArgs,
    },
    /// Run a named check on an instance; exits 4 if a hard invariant fails.
    Check {
        #[arg(value_enum)]
        what: CheckWhat,
        #[command(flatten)]
        args: InstanceArgs,
    },
    /// Run the randomized acceptance suite.
    Suite {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Instances per gate (default: the standard sizes).
        #[arg(long)]
        sizes: Option<usize>,
        /// Directory for summary.json, bands.csv and wolff.csv.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the per-gate table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalWhat {
    Norm,
    #[value(name = "T")]
    T,
    #[value(name = "Tstar")]
    Tstar,
    Mixed,
    Weak,
    Wolff,
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckWhat {
    /// Operator norm against the allocation condition.
    #[value(name = "thm12")]
    Equivalence,
    /// Family conditions bounded by the operator norm.
    #[value(name = "thm11")]
    Necessity,
    Sparse,
    Carleson,
    Dor,
    /// Extremal dual sequence for the A1/A2 duality.
    #[value(name = "lemma45")]
    DualWitness,
    /// Allocation values at s = q and s = inf.
    #[value(name = "lemma47")]
    Endpoints,
    Weak,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    /// T applied to the indicator of the family cube.
    Indicator,
    /// The operator localized to the family cube.
    Localized,
}

#[derive(Clone, Copy, ValueEnum)]
enum Reading {
    Printed,
    Alternate,
}

impl From<EvalWhat> for EvalTarget {
    fn from(w: EvalWhat) -> Self {
        match w {
            EvalWhat::Norm => EvalTarget::Norm,
            EvalWhat::T => EvalTarget::T,
            EvalWhat::Tstar => EvalTarget::Tstar,
            EvalWhat::Mixed => EvalTarget::Mixed,
            EvalWhat::Weak => EvalTarget::Weak,
            EvalWhat::Wolff => EvalTarget::Wolff,
        }
    }
}

impl From<CheckWhat> for CheckTarget {
    fn from(w: CheckWhat) -> Self {
        match w {
            CheckWhat::Equivalence => CheckTarget::Equivalence,
            CheckWhat::Necessity => CheckTarget::Necessity,
            CheckWhat::Sparse => CheckTarget::Sparse,
            CheckWhat::Carleson => CheckTarget::Carleson,
            CheckWhat::Dor => CheckTarget::Dor,
            CheckWhat::DualWitness => CheckTarget::DualWitness,
            CheckWhat::Endpoints => CheckTarget::Endpoints,
            CheckWhat::Weak => CheckTarget::Weak,
        }
    }
}

impl InstanceArgs {
    fn options(&self) -> Options {
        Options {
            seed: self.seed,
            exact: self.exact,
            atomic: self.atomic_mode,
            variant: match self.variant {
                Variant::Indicator => TestVariant::Indicator,
                Variant::Localized => TestVariant::Localized,
            },
            reading: match self.reading {
                Reading::Printed => WeakReading::Printed,
                Reading::Alternate => WeakReading::Alternate,
            },
            family: self.family.clone(),
        }
    }
}

fn finish(outcome: Outcome, csv: Option<&PathBuf>) -> Result<u8, CliError> {
    outcome
        .print(&mut std::io::stdout().lock())
        .map_err(|e| CliError::Output(e.to_string()))?;
    if let (Some(path), Some(table)) = (csv, &outcome.table) {
        table.write_csv(path)?;
    }
    Ok(outcome.exit_code())
}

fn run(command: Command) -> Result<u8, CliError> {
    match command {
        Command::Eval { what, args } => {
            let inst = Instance::load(&args.instance)?;
            let outcome = commands::eval(&inst, what.into(), &args.options())?;
            finish(outcome, args.csv.as_ref())
        }
        Command::Check { what, args } => {
            let inst = Instance::load(&args.instance)?;
            let outcome = commands::check(&inst, what.into(), &args.options())?;
            finish(outcome, args.csv.as_ref())
        }
        Command::Suite {
            seed,
            sizes,
            out,
            csv,
        } => {
            let sizes = sizes.map(SuiteSizes::uniform).unwrap_or_default();
            let (summary, _) = run_suite_to(seed, &sizes, out.as_deref())?;
            if let Some(path) = &csv {
                write_gate_csv(path, &summary)?;
            }
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(suite_report(&summary).as_bytes())
                .map_err(|e| CliError::Output(e.to_string()))?;
            Ok(if summary.passed { 0 } else { GATE_FAILURE })
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
    {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(2);
        }
    };
    match pool.install(|| run(cli.command)) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
