use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser)]
#[command(name = "mortl", version, about = "Time-limited H2-optimal model order reduction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    TlBt,
    TlTsia,
    TlH2opt,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    TlBt,
    TlTsia,
}

#[derive(Subcommand)]
enum Command {
    /// Reduce a model and write the reduced matrices plus a JSON report.
    Reduce {
        /// JSON manifest of the full model.
        #[arg(long)]
        model: PathBuf,
        /// Horizon; defaults to the manifest's `tau`.
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        order: usize,
        #[arg(long, value_enum)]
        method: MethodArg,
        /// Initializer for tl-h2opt.
        #[arg(long, value_enum)]
        init: Option<InitArg>,
        /// JSON file with `optimizer` and `tsia` settings.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Optimize from an initializer over a range of orders and print a CSV.
    Sweep {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long, default_value_t = 2)]
        r_min: usize,
        #[arg(long)]
        r_max: usize,
        #[arg(long, default_value_t = 1)]
        step: usize,
        #[arg(long, value_enum, default_value = "tl-bt")]
        init: InitArg,
        #[arg(long)]
        config: Option<PathBuf>,
        /// CSV destination; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write 0 in the seconds column so output is reproducible.
        #[arg(long)]
        no_timing: bool,
        /// Run orders one after another.
        #[arg(long)]
        sequential: bool,
    },
    /// Check optimality, interpolation identities and the output bound.
    Verify {
        #[arg(long)]
        model: PathBuf,
        /// JSON manifest of the reduced model.
        #[arg(long)]
        reduced: PathBuf,
        #[arg(long)]
        tau: Option<f64>,
        /// Relative gradient tolerance for the optimality check.
        #[arg(long, default_value_t = 1e-8)]
        grad_tol: f64,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        /// Seed for the random inputs; `MORTL_SEED` is used if omitted.
        #[arg(long)]
        seed: Option<u64>,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Print time-limited norms and optionally write the Gramians.
    Gramians {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        tau: Option<f64>,
        /// Directory for `P_tau.mtx` and `Q_tau.mtx`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a random stable-ish test model.
    Generate {
        #[arg(long)]
        states: usize,
        #[arg(long, default_value_t = 1)]
        inputs: usize,
        #[arg(long, default_value_t = 1)]
        outputs: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long, default_value = "model")]
        name: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
