use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use nonlocal_lwr::harness::{
    inspect_kernel, riemann_table, run_sweep, scenario_from_text, write_outputs, EpsilonOutcome, DEFAULT_RIEMANN_PAIRS,
};
use nonlocal_lwr::oracles::run_oracle_suite;
use nonlocal_lwr::{Error, Grid, Kernel};

const EXIT_FAILURE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_VIOLATION: u8 = 3;

#[derive(Parser)]
#[command(name = "nlwr", version, about = "Nonlocal LWR solvers, diagnostics and ε-sweeps")]
struct Cli {
    /// Worker threads for concurrent ε runs (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the ε-sweep described by a scenario file or a previous manifest.
    Run(RunArgs),
    /// Print exact Greenshields Riemann solutions as CSV.
    RiemannTable(TableArgs),
    /// Kernel utilities.
    Kernels {
        #[command(subcommand)]
        command: KernelCommand,
    },
    /// Run the randomized property oracles.
    OracleSuite {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the report to this file.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Output directory (default: `out/<scenario name>`).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Exit with status 3 when any inequality bound is exceeded.
    #[arg(long)]
    strict_inequalities: bool,
}

#[derive(Args)]
struct TableArgs {
    #[arg(long, default_value_t = 0.5)]
    t: f64,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    x_min: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    x_max: f64,
    #[arg(long, default_value_t = 200)]
    n_cells: usize,
    /// Riemann pair `u_left,u_right`; repeatable.
    #[arg(long = "pair", value_parser = parse_pair)]
    pairs: Vec<(f64, f64)>,
    /// Write to a file instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum KernelCommand {
    /// Print the cell weights of a kernel.
    Inspect {
        /// Kernel name or path to a two-column table.
        spec: String,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        dx: f64,
    },
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (l, r) = s.split_once(',').ok_or("expected u_left,u_right")?;
    let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v}: {e}"));
    Ok((parse(l)?, parse(r)?))
}

fn emit(text: &str, output: Option<&Path>) -> anyhow::Result<()> {
    match output {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(args: RunArgs) -> anyhow::Result<u8> {
    let text = fs::read_to_string(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    let scenario = match scenario_from_text(&text) {
        Ok(s) => s,
        Err(e @ Error::Validation(_)) => {
            eprintln!("{e}");
            return Ok(EXIT_VALIDATION);
        }
        Err(e) => return Err(e.into()),
    };
    let out_dir = args.out_dir.unwrap_or_else(|| Path::new("out").join(&scenario.name));
    let result = run_sweep(&scenario)?;
    for run in &result.runs {
        match run {
            EpsilonOutcome::Ok(r) => println!(
                "eps={:<8} err_w={:.6e} err_u={:.6e} steps={}",
                r.epsilon, r.err_w, r.err_u, r.n_steps
            ),
            EpsilonOutcome::Failed { epsilon, error } => println!("eps={epsilon:<8} FAILED {error}"),
        }
    }
    for f in result.fits.iter().filter_map(|f| f.fit.as_ref().map(|fit| (&f.quantity, fit))) {
        println!("fit {:<22} exponent={:.4}", f.0, f.1.fitted_exponent);
    }
    let files = write_outputs(&out_dir, &scenario, &result)?;
    println!("wrote {} files to {}", files.len(), out_dir.display());
    if result.all_failed() {
        eprintln!("every ε run failed");
        return Ok(EXIT_FAILURE);
    }
    let violations: Vec<_> = result.violations().collect();
    for v in &violations {
        eprintln!(
            "violation eps={} {} value={:e} bound={}",
            v.epsilon,
            v.quantity,
            v.value,
            v.bound.map_or("-".into(), |b| format!("{b:e}"))
        );
    }
    if args.strict_inequalities && !violations.is_empty() {
        return Ok(EXIT_VIOLATION);
    }
    Ok(0)
}

fn table(args: TableArgs) -> anyhow::Result<u8> {
    let grid = Grid::new(args.x_min, args.x_max, args.n_cells)?;
    let pairs = if args.pairs.is_empty() { DEFAULT_RIEMANN_PAIRS.to_vec() } else { args.pairs };
    emit(&riemann_table(&pairs, grid, args.t)?, args.output.as_deref())?;
    Ok(0)
}

fn main_inner() -> anyhow::Result<u8> {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Run(args) => run(args),
        Command::RiemannTable(args) => table(args),
        Command::Kernels {
            command: KernelCommand::Inspect { spec, epsilon, dx },
        } => {
            let kernel = Kernel::from_spec(&spec)?;
            print!("{}", inspect_kernel(&kernel, epsilon, dx)?);
            Ok(0)
        }
        Command::OracleSuite { seed, output } => {
            let report = run_oracle_suite(seed)?;
            let text = report.render();
            print!("{text}");
            if let Some(p) = output {
                emit(&text, Some(&p))?;
            }
            Ok(if report.passed() { 0 } else { EXIT_VIOLATION })
        }
    }
}

fn main() -> ExitCode {
    match main_inner() {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
