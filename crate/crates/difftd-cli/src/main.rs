use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use difftd::env::{
    build_gridworld, manhattan_epsilon_greedy_policy, uniform_random_policy, GridworldSpec,
};
use difftd::mdp::{exact_solve, induced_dynamics, Policy, TabularMdp};
use difftd::stability::analyze;
use difftd_cli::config::ExperimentConfig;
use difftd_cli::experiment::{
    aggregate_rows, read_aggregate_csv, read_raw_csv, run_experiment_to_dir, write_aggregate_csv,
};
use difftd_cli::plot::render_svg;

/// Average-reward differential TD laboratory.
#[derive(Parser)]
#[command(name = "difftd", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an MDP+policy exactly: gain, centered bias, stationary
    /// distribution.
    Solve(SolveArgs),
    /// Run the spectral stability analysis for one (MDP, policies, eta, n).
    Analyze(AnalyzeArgs),
    /// Run a seeded experiment sweep from a config file or preset.
    Run(RunArgs),
    /// Aggregate a raw sweep CSV into mean ± stderr series.
    Aggregate(AggregateArgs),
    /// Render an aggregate CSV as an SVG plot.
    Plot(PlotArgs),
    /// Environment utilities.
    #[command(subcommand)]
    Env(EnvCommand),
}

#[derive(Args)]
struct SolveArgs {
    /// MDP specification file (JSON).
    #[arg(long)]
    mdp: PathBuf,
    /// Policy file (JSON).
    #[arg(long)]
    policy: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    mdp: PathBuf,
    /// Target policy file.
    #[arg(long)]
    target: PathBuf,
    /// Behavior policy file.
    #[arg(long)]
    behavior: PathBuf,
    #[arg(long)]
    eta: f64,
    #[arg(long)]
    n: usize,
    /// Write the report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Also write the spectrum of A as CSV (re, im).
    #[arg(long)]
    spectrum_csv: Option<PathBuf>,
    /// Extra comma-separated eta values to sweep, charting min Re λ(A).
    #[arg(long, value_delimiter = ',')]
    sweep_eta: Vec<f64>,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in preset.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Override the number of seeds.
    #[arg(long)]
    seeds: Option<u64>,
    /// Override the number of environment steps per run.
    #[arg(long)]
    steps: Option<u64>,
    /// Base seed; per-run seeds are derived from it.
    #[arg(long, default_value_t = 0)]
    base_seed: u64,
    /// Output directory for raw.csv, aggregate.csv, plot.svg.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Fig1,
    Fig2,
}

#[derive(Args)]
struct AggregateArgs {
    /// Raw sweep CSV.
    #[arg(long)]
    raw: PathBuf,
    /// Output aggregate CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    /// Aggregate CSV.
    #[arg(long)]
    aggregate: PathBuf,
    /// Output SVG path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum EnvCommand {
    /// Write the gridworld MDP specification file.
    Dump(EnvDumpArgs),
    /// Write a policy file for the gridworld.
    Policy(EnvPolicyArgs),
}

#[derive(Args)]
struct EnvDumpArgs {
    #[arg(long, default_value_t = 5)]
    width: usize,
    #[arg(long, default_value_t = 5)]
    height: usize,
    #[arg(long, default_value_t = 1.0)]
    goal_reward: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EnvPolicyArgs {
    #[arg(long, default_value_t = 5)]
    width: usize,
    #[arg(long, default_value_t = 5)]
    height: usize,
    #[arg(long, value_enum)]
    kind: PolicyKind,
    /// Exploration rate for epsilon-greedy.
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyKind {
    Uniform,
    EpsilonGreedy,
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Solve(args) => solve(args),
        Command::Analyze(args) => analyze_command(args),
        Command::Run(args) => run(args),
        Command::Aggregate(args) => aggregate(args),
        Command::Plot(args) => plot(args),
        Command::Env(EnvCommand::Dump(args)) => env_dump(args),
        Command::Env(EnvCommand::Policy(args)) => env_policy(args),
    }
}

fn solve(args: SolveArgs) -> anyhow::Result<()> {
    let mdp = TabularMdp::load(&args.mdp).context("loading MDP")?;
    let policy = Policy::load(&args.policy).context("loading policy")?;
    let chain = induced_dynamics(&mdp, &policy)?;
    let solution = exact_solve(&chain)?;
    println!("gain: {}", solution.gain);
    println!("state,bias,stationary");
    for s in 0..mdp.num_states() {
        println!("{s},{},{}", solution.bias[s], solution.stationary[s]);
    }
    Ok(())
}

fn analyze_command(args: AnalyzeArgs) -> anyhow::Result<()> {
    let mdp = TabularMdp::load(&args.mdp).context("loading MDP")?;
    let target = Policy::load(&args.target).context("loading target policy")?;
    let behavior = Policy::load(&args.behavior).context("loading behavior policy")?;
    let report = analyze(&mdp, &target, &behavior, args.eta, args.n)?;

    let mut text = report.to_string();
    if !args.sweep_eta.is_empty() {
        text.push_str("  eta sweep (eta, min Re eig A, empirically stable):\n");
        for &eta in &args.sweep_eta {
            let swept = analyze(&mdp, &target, &behavior, eta, args.n)?;
            text.push_str(&format!(
                "    {eta},{:.6e},{}\n",
                swept.min_real_part,
                if swept.strictly_positive_stable { "yes" } else { "no" }
            ));
        }
    }
    match &args.report {
        Some(path) => std::fs::write(path, &text).context("writing report")?,
        None => print!("{text}"),
    }
    if let Some(path) = &args.spectrum_csv {
        let mut csv = String::from("re,im\n");
        for z in &report.spectrum {
            csv.push_str(&format!("{},{}\n", z.re, z.im));
        }
        std::fs::write(path, csv).context("writing spectrum CSV")?;
    }
    Ok(())
}

fn run(args: RunArgs) -> anyhow::Result<()> {
    let mut config = match (&args.config, args.preset) {
        (Some(path), None) => ExperimentConfig::load(path).context("loading config")?,
        (None, Some(Preset::Fig1)) => ExperimentConfig::preset("fig1")?,
        (None, Some(Preset::Fig2)) => ExperimentConfig::preset("fig2")?,
        (None, None) => bail!("pass --config PATH or --preset fig1|fig2"),
        (Some(_), Some(_)) => unreachable!("clap enforces the conflict"),
    };
    if let Some(seeds) = args.seeds {
        config.seeds = seeds;
    }
    if let Some(steps) = args.steps {
        config.steps = steps;
    }
    let output = run_experiment_to_dir(&config, args.base_seed, &args.out)?;
    eprintln!(
        "wrote {} raw rows across {} series to {}",
        output.raw.len(),
        output.summary.series.len(),
        args.out.display()
    );
    Ok(())
}

fn aggregate(args: AggregateArgs) -> anyhow::Result<()> {
    let rows = read_raw_csv(&std::fs::read_to_string(&args.raw).context("reading raw CSV")?)?;
    let summary = aggregate_rows(&rows)?;
    let mut out = Vec::new();
    write_aggregate_csv(&summary, &mut out)?;
    std::fs::write(&args.out, out).context("writing aggregate CSV")?;
    Ok(())
}

fn plot(args: PlotArgs) -> anyhow::Result<()> {
    let summary =
        read_aggregate_csv(&std::fs::read_to_string(&args.aggregate).context("reading aggregate")?)?;
    std::fs::write(&args.out, render_svg(&summary)?).context("writing SVG")?;
    Ok(())
}

fn env_dump(args: EnvDumpArgs) -> anyhow::Result<()> {
    let mut spec = GridworldSpec::new(args.width, args.height);
    spec.goal_reward = args.goal_reward;
    let mdp = build_gridworld(&spec)?;
    mdp.store(&args.out)?;
    Ok(())
}

fn env_policy(args: EnvPolicyArgs) -> anyhow::Result<()> {
    let spec = GridworldSpec::new(args.width, args.height);
    let mdp = build_gridworld(&spec)?;
    let policy = match args.kind {
        PolicyKind::Uniform => uniform_random_policy(&mdp),
        PolicyKind::EpsilonGreedy => manhattan_epsilon_greedy_policy(&spec, args.epsilon)?,
    };
    policy.store(&args.out)?;
    Ok(())
}
