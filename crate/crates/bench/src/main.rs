use std::path::PathBuf;
use std::process::ExitCode;

use biam_bench::report::{summarize, write_csv};
use biam_bench::{
    planner_matrix, run_suite, sigma_sweep, sweep_report, BenchError, MetricPolicy, MetricStore, ObstacleScript,
    PlannerId, RunOptions, SuiteConfig,
};
use biam_core::{BudgetMode, Scenario};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bench", about = "Seeded benchmark runs over the planner matrix")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run every cell of a suite document and write one CSV row per run.
    Run {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Force the virtual clock even if the suite asks for wall time.
        #[arg(long)]
        deterministic: bool,
        /// Ignore cached metric sidecars and rebuild them.
        #[arg(long)]
        rebuild_metrics: bool,
        /// Fail instead of building a metric that has no sidecar.
        #[arg(long, conflicts_with = "rebuild_metrics")]
        cached_metrics_only: bool,
        #[arg(long, default_value = "metric-cache")]
        metrics_dir: PathBuf,
    },
    /// Print the twenty planner rows.
    Matrix,
    /// Pass rate of a bidirectional planner across connection distances.
    Sigma {
        #[arg(long)]
        scenario: Scenario,
        #[arg(long)]
        planner: PlannerId,
        #[arg(long, value_delimiter = ',', default_value = "10,20,30,40,50,60")]
        sigmas: Vec<f64>,
        #[arg(long, default_value_t = 25)]
        repetitions: u64,
        /// Drop a disc on the agent's path at this tick; 0 disables it.
        #[arg(long, default_value_t = ObstacleScript::default().at_tick)]
        obstacle_tick: u64,
        #[arg(long)]
        wall_clock: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), BenchError> {
    match cli.cmd {
        Cmd::Matrix => {
            println!("{:<14} {:<16} {:<10} {:>5} {:>6} {:>7} {:>7}", "id", "name", "metric", "bi", "rewire", "t_root", "n_max");
            for p in planner_matrix() {
                let c = p.config(Scenario::Maze);
                println!(
                    "{:<14} {:<16} {:<10} {:>5} {:>6} {:>7} {:>7}",
                    p.to_string(),
                    p.display_name(),
                    c.metric_kind.name(),
                    c.bidirectional,
                    c.new_rewiring,
                    c.t_root,
                    c.n_max
                );
            }
        }
        Cmd::Run {
            suite,
            out,
            deterministic,
            rebuild_metrics,
            cached_metrics_only,
            metrics_dir,
        } => {
            let text = std::fs::read_to_string(&suite).map_err(|e| BenchError::Io(suite.clone(), e))?;
            let mut cfg = SuiteConfig::parse(&text)?;
            if deterministic && !cfg.budget_mode.is_deterministic() {
                cfg.budget_mode = BudgetMode::deterministic();
            }
            // fail on an unwritable path before spending time on runs
            std::fs::write(&out, "").map_err(|e| BenchError::Io(out.clone(), e))?;
            let store = MetricStore::new(MetricPolicy {
                cache_dir: Some(metrics_dir),
                rebuild: rebuild_metrics,
                cached_only: cached_metrics_only,
            });
            let rows = run_suite(&cfg, &store)?;
            write_csv(&out, &rows)?;
            let summary = summarize(&rows);
            let side = out.with_extension("summary.csv");
            std::fs::write(&side, summary.comparisons_csv()).map_err(|e| BenchError::Io(side.clone(), e))?;
            print!("{}", summary.to_text());
            eprintln!("{} runs written to {}; comparisons in {}", rows.len(), out.display(), side.display());
        }
        Cmd::Sigma {
            scenario,
            planner,
            sigmas,
            repetitions,
            obstacle_tick,
            wall_clock,
            out,
        } => {
            let store = MetricStore::new(MetricPolicy::default());
            let opts = RunOptions {
                budget_mode: if wall_clock { BudgetMode::WallClock } else { BudgetMode::deterministic() },
                obstacle: (obstacle_tick > 0).then(|| ObstacleScript {
                    at_tick: obstacle_tick,
                    ..ObstacleScript::default()
                }),
                ..RunOptions::default()
            };
            let seeds: Vec<u64> = (0..repetitions).collect();
            let rows = sigma_sweep(&store, scenario, planner, &sigmas, &seeds, &opts)?;
            if let Some(out) = out {
                write_csv(&out, &rows)?;
            }
            println!("{:>6} {:>5} {:>8} {:>12} {:>7} {:>9}", "sigma", "runs", "arrived", "audit_failed", "passed", "pass_rate");
            for p in sweep_report(&rows) {
                println!(
                    "{:>6} {:>5} {:>8} {:>12} {:>7} {:>9.2}",
                    p.sigma,
                    p.runs,
                    p.arrived,
                    p.audit_failed,
                    p.passed,
                    p.pass_rate()
                );
            }
        }
    }
    Ok(())
}
