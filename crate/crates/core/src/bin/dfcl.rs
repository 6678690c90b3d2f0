//! Command-line front end: single runs, comparisons and the reference experiment.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 numerical divergence.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dfcl::harness::config::{EstimatorKind, ScenarioConfig};
use dfcl::harness::export::{run_csv, summary_csv, write_file};
use dfcl::harness::plot::{comparison_svg, run_svg};
use dfcl::harness::{compare, run_scenario, Comparison};
use dfcl::Error;

#[derive(Parser)]
#[command(
    name = "dfcl",
    version,
    about = "Directional-forgetting concurrent-learning adaptive control"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write its trajectory as CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// CSV output path; defaults to `simulation.csv` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// SVG output path; defaults to `simulation.plot` from the config.
        #[arg(long)]
        plot: Option<PathBuf>,
        /// Evaluate the stability diagnostics and add them to the CSV.
        #[arg(long)]
        diagnostics: bool,
    },
    /// Run several scenarios that differ only in the estimator.
    Compare {
        #[arg(long, num_args = 1.., required = true)]
        configs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reference experiment: DF-CL against both baselines on the unstable plant.
    PaperFig1 {
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            if err.is_divergence() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn execute(command: Command) -> dfcl::Result<()> {
    match command {
        Command::Run {
            config,
            out,
            plot,
            diagnostics,
        } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            cfg.simulation.diagnostics |= diagnostics;
            let out = out.or_else(|| cfg.simulation.csv.clone()).ok_or_else(|| {
                Error::Config("no CSV output: pass --out or set simulation.csv".into())
            })?;
            let plot = plot.or_else(|| cfg.simulation.plot.clone());
            let run = run_scenario(&cfg)?;
            write_file(&out, &run_csv(&run)?)?;
            if let Some(plot) = plot {
                write_file(&plot, &run_svg(&run))?;
            }
            println!(
                "{}: k_e = {}, final |e| = {:.3e}, final |theta_tilde| = {:.3e}, clamped steps = {}",
                cfg.estimator.kind.name(),
                fmt_opt(run.k_e),
                run.final_state.e.abs(),
                run.final_state.theta_tilde_norm,
                run.clamp_count
            );
            if let Some(d) = &run.diagnostics {
                let r = &d.report;
                println!(
                    "diagnostics: max contraction residual = {:.3e}, max |W| after k_e = {:.3e} (bound {:.3e})",
                    r.max_contraction_residual, r.max_w_omega_after_ke, r.w_bound_asymptotic
                );
            }
            Ok(())
        }
        Command::Compare { configs, out } => {
            let scenarios = configs
                .iter()
                .map(|p| ScenarioConfig::load(p))
                .collect::<dfcl::Result<Vec<_>>>()?;
            let cmp = compare(&scenarios, None)?;
            write_comparison(&cmp, &out, "comparison.svg")
        }
        Command::PaperFig1 { out } => {
            let scenarios: Vec<ScenarioConfig> = [
                EstimatorKind::DfCl,
                EstimatorKind::StackManager,
                EstimatorKind::CondNumber,
            ]
            .into_iter()
            .map(|kind| {
                let mut cfg = ScenarioConfig::reference_experiment().with_estimator(kind);
                cfg.simulation.diagnostics = kind == EstimatorKind::DfCl;
                cfg
            })
            .collect();
            let cmp = compare(&scenarios, None)?;
            write_comparison(&cmp, &out, "fig1.svg")
        }
    }
}

fn write_comparison(cmp: &Comparison, dir: &Path, svg_name: &str) -> dfcl::Result<()> {
    for (run, row_label) in cmp.runs.iter().zip(run_labels(cmp)) {
        write_file(&dir.join(format!("{row_label}.csv")), &run_csv(run)?)?;
    }
    write_file(&dir.join("summary.csv"), &summary_csv(cmp))?;
    write_file(&dir.join(svg_name), &comparison_svg(cmp))?;
    print!("method");
    for w in &cmp.windows {
        print!("\trmse[{},{})", w.start, w.end);
    }
    println!("\tmax|e|\tk_e");
    for row in &cmp.rows {
        print!("{}", row.label);
        for v in &row.rmse {
            print!("\t{v:.4e}");
        }
        println!("\t{:.4e}\t{}", row.max_abs_e, fmt_opt(row.k_e));
    }
    Ok(())
}

/// File stems for each run, numbered when the same estimator appears twice.
fn run_labels(cmp: &Comparison) -> Vec<String> {
    let names: Vec<&str> = cmp
        .runs
        .iter()
        .map(|r| r.config.estimator.kind.name())
        .collect();
    names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            if names.iter().filter(|n| *n == name).count() > 1 {
                format!(
                    "{name}-{}",
                    names[..i].iter().filter(|n| *n == name).count() + 1
                )
            } else {
                (*name).to_string()
            }
        })
        .collect()
}

fn fmt_opt(v: Option<usize>) -> String {
    v.map_or_else(|| "none".to_string(), |k| k.to_string())
}
