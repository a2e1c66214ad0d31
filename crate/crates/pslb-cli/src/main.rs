//! `pslb`: command-line front end for the identification simulator.
//!
//! Three subcommands: `run` executes an experiment grid described by a JSON
//! configuration or a built-in profile, `bounds` prints the closed-form
//! tuning and hardness quantities of an instance, and `plot-data` rebuilds
//! plot series files from a finished results directory.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use pslb_core::harness::{self, ExperimentConfig, InstanceSource, PlotKind};
use pslb_core::{bounds, Instance};

#[derive(Parser)]
#[command(
    name = "pslb",
    version,
    about = "Simulator for ε-best-arm identification in piecewise-stationary linear bandits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment grid and write results.
    Run(RunArgs),
    /// Print tuning constants and hardness quantities for an instance.
    Bounds(BoundsArgs),
    /// Rebuild plot series files from a results directory.
    PlotData(PlotArgs),
}

#[derive(Args)]
#[command(group(
    clap::ArgGroup::new("source").required(true).args(["config", "profile"])
))]
struct RunArgs {
    /// Experiment configuration file (JSON).
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Built-in configuration preset.
    #[arg(long, value_parser = ["paper-scaled"])]
    profile: Option<String>,
    /// Override the configuration's base seed.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Directory for results.csv, summary.csv, config.json and logs/.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, value_name = "M", default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct BoundsArgs {
    /// Instance file (JSON).
    #[arg(long, value_name = "FILE")]
    instance: PathBuf,
    /// Accuracy of the identification target.
    #[arg(long, value_name = "E")]
    eps: f64,
    /// Confidence level.
    #[arg(long, value_name = "D")]
    delta: f64,
    /// Detection cadence.
    #[arg(long, value_name = "G")]
    gamma: u64,
}

#[derive(Args)]
struct PlotArgs {
    /// Results directory written by `pslb run --out`.
    #[arg(long = "in", value_name = "DIR")]
    input: PathBuf,
    /// Series flavor: complexity_vs_eps or context_samples_vs_invgap.
    #[arg(long, value_name = "KIND")]
    kind: String,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => run(args),
        Command::Bounds(args) => print_bounds(args),
        Command::PlotData(args) => plot_data(args),
    }
}

fn load_config(path: &PathBuf) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading configuration {}", path.display()))?;
    let config = serde_json::from_str(&text)
        .with_context(|| format!("parsing configuration {}", path.display()))?;
    Ok(config)
}

fn run(args: RunArgs) -> Result<()> {
    let mut config = match (&args.config, &args.profile) {
        (Some(path), None) => load_config(path)?,
        (None, Some(_)) => harness::paper_scaled_profile(),
        _ => unreachable!("clap enforces exactly one source"),
    };
    if let Some(seed) = args.seed {
        config.base_seed = seed;
    }
    let output = harness::run_experiment(&config, args.out.as_deref(), args.jobs)?;
    for warning in &output.warnings {
        eprintln!("warning: {warning}");
    }
    println!(
        "{:<12} {:>10} {:>7} {:>8} {:>5} {:>14} {:>14} {:>12}",
        "algorithm", "eps", "trials", "correct", "caps", "mean_tau", "std_tau", "mean_l_tau"
    );
    for row in harness::summarize(&output.records) {
        println!(
            "{:<12} {:>10.4} {:>7} {:>8} {:>5} {:>14.1} {:>14.1} {:>12.1}",
            row.algorithm.name(),
            row.eps,
            row.trials,
            row.correct,
            row.cap_hits,
            row.mean_tau,
            row.std_tau,
            row.mean_l_tau
        );
    }
    if let Some(dir) = &args.out {
        println!("results written to {}", dir.display());
    }
    Ok(())
}

fn load_instance(path: &Path) -> Result<Instance> {
    let source = InstanceSource::File {
        file: path.to_path_buf(),
    };
    let instance = source.resolve()?;
    instance.validate()?;
    Ok(instance)
}

fn print_bounds(args: BoundsArgs) -> Result<()> {
    let instance = load_instance(&args.instance)?;
    let report = bounds::hardness_terms(&instance, args.eps, args.delta, args.gamma)?;
    let pair = |arg: Option<(usize, usize)>| match arg {
        Some((a, b)) => format!("achieved by arms ({a}, {b})"),
        None => "no valid arm pair".to_string(),
    };
    println!(
        "instance: {} arms, {} contexts, dimension {}, segments in [{}, {}]",
        instance.num_arms(),
        instance.num_contexts(),
        instance.dim(),
        instance.lmin,
        instance.lmax
    );
    println!(
        "targets:  eps = {}, delta = {}, gamma = {}\n",
        args.eps, args.delta, args.gamma
    );
    let rows: Vec<(&str, String, String)> = vec![
        (
            "tau_star",
            format!("{:.6e}", report.tau_star),
            "naive-rule time budget".into(),
        ),
        (
            "delta_fae",
            format!("{:.6e}", report.delta_fae),
            "false-alarm budget per detection test".into(),
        ),
        (
            "window",
            report.window.to_string(),
            "detection window w".into(),
        ),
        (
            "b_threshold",
            format!("{:.6e}", report.b_threshold),
            format!(
                "detection threshold ({})",
                if bounds::assumption_feasible(report.b_threshold, report.delta_c) {
                    "2b <= context separation: changes are detectable"
                } else {
                    "2b exceeds the context separation: changes may be missed"
                }
            ),
        ),
        (
            "t_v",
            format!("{:.6e}", report.t_v),
            format!("vector-estimation term, {}", pair(report.t_v_arg)),
        ),
        (
            "t_d",
            format!("{:.6e}", report.t_d),
            format!("distribution-estimation term, {}", pair(report.t_d_arg)),
        ),
        (
            "t_r",
            format!("{:.6e}", report.t_r),
            format!("residual term, {}", pair(report.t_r_arg)),
        ),
        (
            "h_de",
            format!("{:.6e}", report.h_de),
            format!("distribution hardness, {}", pair(report.h_de_arg)),
        ),
        (
            "h_bar",
            format!("{:.6e}", report.h_bar),
            format!("weighted-gap hardness, {}", pair(report.h_bar_arg)),
        ),
        (
            "ps_bound",
            format!("{:.6e}", report.ps_bound),
            format!(
                "change-aware complexity bound, {}",
                pair(report.ps_bound_arg)
            ),
        ),
        (
            "t_v_n",
            format!("{:.6e}", report.t_v_n),
            "stationary-style vector term".into(),
        ),
        (
            "t_d_n",
            format!("{:.6e}", report.t_d_n),
            "stationary-style distribution term".into(),
        ),
        (
            "overall",
            format!("{:.6e}", report.overall),
            "combined-runner complexity bound".into(),
        ),
        (
            "delta_min",
            format!("{:.6e}", report.delta_min),
            "smallest mean gap to the best arm".into(),
        ),
        (
            "delta_c",
            format!("{:.6e}", report.delta_c),
            "smallest best-arm separation between contexts".into(),
        ),
        (
            "best_arm",
            report.best_arm.to_string(),
            format!("eps-best set {:?}", report.eps_best),
        ),
    ];
    for (key, value, note) in &rows {
        println!("{key:<12} = {value:<16} {note}");
    }
    match report.n_c {
        Some((value, arm)) => println!(
            "{:<12} = {:<16.6} context-count lower bound, tight alternative arm {}",
            "n_c", value, arm
        ),
        None => println!(
            "{:<12} = {:<16} context-count lower bound needs delta < 1/4",
            "n_c", "undefined"
        ),
    }
    Ok(())
}

fn plot_data(args: PlotArgs) -> Result<()> {
    let kind: PlotKind = match args.kind.parse() {
        Ok(kind) => kind,
        Err(message) => bail!("{message}"),
    };
    let (config, records) = harness::load_results(&args.input)?;
    let instance = config.instance.resolve()?;
    let written = harness::emit_plot_data(&records, &instance, kind, &args.input)?;
    for path in &written {
        println!("{}", path.display());
    }
    let missing: Vec<&str> = config
        .algorithms
        .iter()
        .filter(|a| !records.iter().any(|r| r.algorithm == **a))
        .map(|a| a.name())
        .collect();
    if !missing.is_empty() {
        eprintln!(
            "warning: no rows for configured algorithms: {}",
            missing.join(", ")
        );
    }
    Ok(())
}
