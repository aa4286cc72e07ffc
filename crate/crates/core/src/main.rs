use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sparsebench::harness::{self, GridConfig, RunContext};

#[derive(Parser)]
#[command(name = "sparsebench", version, about = "Sparse linear regression benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Expand the grid, run every experiment and write the results CSV.
    Run {
        /// TOML grid config; omitted keys fall back to the full grid.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "results.csv")]
        out: PathBuf,
        /// Worker threads (defaults to the number of CPUs).
        #[arg(long, env = "SPARSEBENCH_JOBS")]
        jobs: Option<usize>,
        /// Axis filters, e.g. `p=20,model=lasso|ridge`.
        #[arg(long)]
        subset: Option<String>,
    },
    /// Aggregate a results CSV into the summary tables.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "reports")]
        out_dir: PathBuf,
    },
    /// Run the laptop-sized oracle and property checks.
    Validate,
}

fn run(cli: Cli) -> sparsebench::Result<bool> {
    match cli.command {
        Command::Run {
            config,
            out,
            jobs,
            subset,
        } => {
            let config = match config {
                Some(path) => GridConfig::from_file(&path)?,
                None => GridConfig::default(),
            };
            let mut specs = harness::expand_grid(&config)?;
            if let Some(expr) = subset {
                specs = harness::apply_subset(specs, &harness::parse_subset(&expr)?)?;
            }
            let ctx = RunContext::from_config(&config)?;
            let jobs = jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, usize::from));
            log::info!("running {} experiments on {jobs} workers", specs.len());
            let rows = harness::run_grid(&specs, &ctx, jobs)?;
            harness::persist(&rows, &out)?;
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            println!("wrote {} rows to {} ({failed} failed)", rows.len(), out.display());
            Ok(true)
        }
        Command::Report { input, out_dir } => {
            let rows = harness::load(&input)?;
            for path in harness::write_reports(&rows, &out_dir)? {
                println!("{}", path.display());
            }
            Ok(true)
        }
        Command::Validate => {
            let mut all = true;
            for check in sparsebench::validate::run_all() {
                let status = if check.passed { "PASS" } else { "FAIL" };
                println!("{status} {}: {}", check.name, check.detail);
                all &= check.passed;
            }
            Ok(all)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
