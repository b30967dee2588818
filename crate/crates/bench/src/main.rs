use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use conex_bench::config::{parse_config, ExperimentConfig};
use conex_bench::runner::{prepare, render_csv, run_cell_with_checkpoints, run_experiment};

#[derive(Parser)]
#[command(
    name = "conex-bench",
    about = "Benchmark harness for constrained first-order solvers",
    long_about = "Runs the conex solvers over configured benchmark problems.\n\
        Config defaults: seed = 0, checkpoints = 8, deterministic regime,\n\
        strongly-convex schedule, b = 1. See the README for the config grammar."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output CSV path; overrides the config's `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace the configured seed list by 0..N-1.
    #[arg(long)]
    seeds: Option<usize>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Record wall times in the CSV (breaks byte-level reproducibility).
    #[arg(long, default_value_t = false)]
    timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single (budget, seed) cell and print a summary.
    Solve(RunArgs),
    /// Run the configured sweep and emit CSV.
    Bench(RunArgs),
    /// Run the acceptance suite; exits nonzero on any failure.
    Accept {
        /// Only run criteria whose name contains this substring (or a
        /// criterion number).
        #[arg(long, default_value = "")]
        filter: String,
    },
}

fn load(args: &RunArgs) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = parse_config(&args.config).context("parsing config")?;
    if let Some(n) = args.seeds {
        if n == 0 {
            bail!("--seeds must be positive");
        }
        cfg.seeds = (0..n as u64).collect();
    }
    if let Some(out) = &args.out {
        cfg.out = Some(out.clone());
    }
    Ok(cfg)
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Solve(args) => {
            let cfg = load(&args)?;
            let budget = *cfg
                .budgets
                .first()
                .context("config needs at least one budget for solve")?;
            let seed = cfg.seeds[0];
            let exp = prepare(&cfg)?;
            let (row, checkpoints) =
                run_cell_with_checkpoints(&exp, budget, seed, true, cfg.checkpoints);
            println!("problem    : {}", row.problem);
            println!("solver     : {}", cfg.solver.as_str());
            println!("regime     : {}", row.regime);
            println!("budget     : {}", row.budget);
            println!("seed       : {}", row.seed);
            if let Some(gap) = row.gap {
                println!("gap        : {gap:.6e}");
            }
            if let Some(infeas) = row.infeas {
                println!("infeas     : {infeas:.6e}");
            }
            if let Some(w) = row.dist_w {
                println!("W(x*, x_T) : {w:.6e}");
            }
            if let Some(c) = row.kkt_compl {
                println!("kkt compl  : {c:.6e}");
            }
            if let Some(s) = row.kkt_stat {
                println!("kkt stat   : {s:.6e}");
            }
            println!("wall time  : {:.3}s", row.wall_time_s);
            if !checkpoints.is_empty() {
                println!("checkpoints (iteration, objective, infeasibility of the average):");
                for c in &checkpoints {
                    println!(
                        "  t={:>8}  psi0={:+.6e}  infeas={:.6e}",
                        c.iteration, c.psi0_avg, c.infeas_avg
                    );
                }
            }
            if let Some(err) = row.error {
                bail!("solver error: {err}");
            }
        }
        Command::Bench(args) => {
            let cfg = load(&args)?;
            let rows = run_experiment(&cfg, args.jobs, args.timing)?;
            if rows.is_empty() {
                eprintln!("warning: empty budget list, no rows emitted");
            }
            let csv = render_csv(&rows);
            match &cfg.out {
                Some(path) => {
                    std::fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?;
                    eprintln!("wrote {} rows to {}", rows.len(), path.display());
                }
                None => print!("{csv}"),
            }
        }
        Command::Accept { filter } => {
            let bin = std::env::current_exe().ok();
            let results = conex_bench::acceptance::run_acceptance(&filter, bin.as_deref());
            let failed = results.iter().filter(|r| !r.pass).count();
            println!(
                "{} criteria run, {} passed, {} failed",
                results.len(),
                results.len() - failed,
                failed
            );
            if failed > 0 {
                std::process::exit(1);
            }
        }
    }
    Ok(())
}
