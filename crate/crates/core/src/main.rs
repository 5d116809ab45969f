use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kplane::cli::{
    emit_report, family_by_name, load_scenario, run_scenario, ReportFormat, Scenario, THREADS_ENV,
};
use kplane::manifold::Family;

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "kplane", version, about = "Verify k-plane transform identities for Fourier extension operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every check of a scenario file and report the results.
    Verify {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
        format: ReportFormat,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Gauss–Legendre nodes per panel.
        #[arg(long)]
        quad_order: Option<usize>,
        /// Half-width R of the plane truncation box.
        #[arg(long)]
        trunc_radius: Option<f64>,
        /// Grid points per parameter axis for transversality checks.
        #[arg(long)]
        grid_res: Option<usize>,
    },
    /// List the built-in manifold families.
    ListFamilies,
    /// Print a runnable scenario for a family.
    EmitExample { family: String },
}

fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got `{value}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| format!("cannot configure {threads} threads: {e}"))
}

fn verify(
    path: PathBuf,
    format: ReportFormat,
    out: Option<PathBuf>,
    order: Option<usize>,
    radius: Option<f64>,
    grid_res: Option<usize>,
) -> u8 {
    let mut scenario = match load_scenario(&path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    scenario.apply_overrides(order, radius, grid_res);
    let report = match run_scenario(&scenario) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    if let Err(e) = emit_report(&report, format, out.as_deref()) {
        eprintln!("error: cannot write report: {e}");
        return EXIT_INTERNAL;
    }
    if report.overall_pass {
        0
    } else {
        EXIT_FAIL
    }
}

fn dispatch(cli: Cli) -> u8 {
    match cli.command {
        Command::Verify { scenario, format, out, quad_order, trunc_radius, grid_res } => {
            verify(scenario, format, out, quad_order, trunc_radius, grid_res)
        }
        Command::ListFamilies => {
            for family in Family::BUILT_IN {
                println!("{:<12} {}", family.as_str(), family.description());
            }
            0
        }
        Command::EmitExample { family } => match family_by_name(&family).and_then(Scenario::example) {
            Some(s) => {
                println!("{}", s.to_canonical_json());
                0
            }
            None => {
                let names: Vec<&str> = Family::BUILT_IN.iter().map(Family::as_str).collect();
                eprintln!("error: unknown family `{family}`; expected one of {}", names.join(", "));
                EXIT_USAGE
            }
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_USAGE);
    }
    match catch_unwind(AssertUnwindSafe(|| dispatch(cli))) {
        Ok(code) => ExitCode::from(code),
        Err(_) => {
            eprintln!("error: internal failure");
            ExitCode::from(EXIT_INTERNAL)
        }
    }
}
