//! `cwoful` — run, check, and probe corrupted linear-bandit experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use cwoful::config::{ExperimentConfig, PolicyKindSpec};
use cwoful::environment::lower_bound_instance_pair;
use cwoful::harness::{run_lower_bound_pair, DEFAULT_SNAPSHOT_INTERVAL};
use cwoful::output::write_lower_bound_csv;
use cwoful::policy::{default_alpha, default_lambda, BetaMode, PolicyConfig};
use cwoful::runner::{execute, RunOptions, OUTPUT_ROOT_ENV};

#[derive(Parser)]
#[command(
    name = "cwoful",
    version,
    about = "Corruption-robust linear contextual bandit simulations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output root directory (default: config, then $CWOFUL_OUT, then ./cwoful-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed override: a comma list "1,2,3" or a range "start:count".
    #[arg(long, global = true)]
    seeds: Option<String>,

    /// Worker threads for parallel episodes (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Rounds between dense diagnostic snapshots.
    #[arg(long = "snapshot-interval", global = true)]
    snapshot_interval: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Execute all (policy × seed × grid) episodes of a config and write
    /// per-round logs, aggregates, and metadata.
    Run { config: PathBuf },
    /// Run a config in memory and verify the concentration / potential /
    /// corruption-term inequalities; exits nonzero if a hard check fails.
    Check { config: PathBuf },
    /// Paired lower-bound experiment: one policy against the uncorrupted and
    /// the budget-flip instance with shared seeds.
    Lowerbound {
        /// Context dimension (at least 2).
        #[arg(long = "d")]
        d: usize,
        /// Regret-budget surrogate; the flip budget is 4·budget/(d−1).
        #[arg(long = "budget")]
        budget: f64,
        /// Policy kind: cw-oful | oful | enlarged-beta-oful | greedy.
        #[arg(long = "policy")]
        policy: String,
        /// Horizon.
        #[arg(long = "K")]
        horizon: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("warning: could not set --jobs: {e}");
        }
    }
    match dispatch(&cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            let config_error = err
                .downcast_ref::<cwoful::Error>()
                .is_some_and(|e| matches!(e, cwoful::Error::Config(_)));
            if config_error {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn dispatch(cli: &Cli) -> anyhow::Result<ExitCode> {
    let seeds = cli.seeds.as_deref().map(parse_seeds).transpose()?;
    match &cli.command {
        Command::Run { config } => cmd_run(config, cli, seeds),
        Command::Check { config } => cmd_check(config, cli, seeds),
        Command::Lowerbound {
            d,
            budget,
            policy,
            horizon,
        } => cmd_lowerbound(*d, *budget, policy, *horizon, cli, seeds),
    }
}

fn load_config(path: &PathBuf) -> anyhow::Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    Ok(ExperimentConfig::from_toml_str(&text)?)
}

fn parse_seeds(spec: &str) -> anyhow::Result<Vec<u64>> {
    let spec = spec.trim();
    if let Some((start, count)) = spec.split_once(':') {
        let start: u64 = start.trim().parse().context("--seeds range start")?;
        let count: u64 = count.trim().parse().context("--seeds range count")?;
        if count == 0 {
            bail!("--seeds range count must be at least 1");
        }
        return Ok((0..count).map(|i| start + i).collect());
    }
    let seeds: Vec<u64> = spec
        .split(',')
        .map(|s| s.trim().parse::<u64>())
        .collect::<Result<_, _>>()
        .context("--seeds expects a comma list or start:count")?;
    if seeds.is_empty() {
        bail!("--seeds must name at least one seed");
    }
    Ok(seeds)
}

fn cmd_run(path: &PathBuf, cli: &Cli, seeds: Option<Vec<u64>>) -> anyhow::Result<ExitCode> {
    let config = load_config(path)?;
    let options = RunOptions {
        output_root: cli.out.clone(),
        seeds,
        snapshot_interval: cli.snapshot_interval,
        write_files: true,
    };
    let outcome = execute(&config, &options)?;
    for o in &outcome.outcomes {
        println!(
            "[{}/{}] beta = {:.4}, final regret mean = {:.4}, std = {:.4} over {} seeds; realized C mean = {:.4}",
            o.cell,
            o.policy,
            o.beta,
            o.aggregate.final_mean(),
            o.aggregate.std.last().copied().unwrap_or(0.0),
            o.aggregate.num_seeds,
            o.mean_realized_corruption,
        );
        if o.beta_below_one {
            eprintln!(
                "warning: [{}/{}] beta = {:.4} < 1; per-round clipping arguments assume beta >= 1",
                o.cell, o.policy, o.beta
            );
        }
    }
    if let Some(scaling) = &outcome.scaling {
        if let Some(s) = scaling.slope_regret_vs_horizon {
            println!("scaling: log-log slope of regret vs K (C = 0) = {s:.4}");
        }
        if let Some(s) = scaling.slope_regret_vs_corruption {
            println!("scaling: linear slope of regret vs C = {s:.4}");
        }
    }
    if let Some(dir) = &outcome.out_dir {
        println!("wrote {}", dir.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_check(path: &PathBuf, cli: &Cli, seeds: Option<Vec<u64>>) -> anyhow::Result<ExitCode> {
    let config = load_config(path)?;
    let options = RunOptions {
        output_root: cli.out.clone(),
        seeds,
        snapshot_interval: cli.snapshot_interval,
        write_files: false,
    };
    let outcome = execute(&config, &options)?;
    let mut all_hard_ok = true;
    for o in &outcome.outcomes {
        let n = o.diagnostics.len();
        let potential = o
            .diagnostics
            .iter()
            .map(|d| d.potential_margin)
            .fold(f64::INFINITY, f64::min);
        let corruption = o
            .diagnostics
            .iter()
            .filter_map(|d| d.corruption_margin)
            .fold(f64::INFINITY, f64::min);
        let regularization = o
            .diagnostics
            .iter()
            .map(|d| d.regularization_margin)
            .fold(f64::INFINITY, f64::min);
        let confidence = o
            .diagnostics
            .iter()
            .filter(|d| d.confidence_violated)
            .count();
        let self_norm = o
            .diagnostics
            .iter()
            .filter(|d| d.self_normalized_violated)
            .count();
        let hard_ok = o.all_hard_checks_ok();
        all_hard_ok &= hard_ok;

        println!(
            "[{}/{}] potential inequality: min margin = {:.6e} ({})",
            o.cell,
            o.policy,
            potential,
            pass(potential >= -cwoful::diagnostics::POTENTIAL_SLACK)
        );
        if corruption.is_finite() {
            println!(
                "[{}/{}] corruption-term bound: min margin = {:.6e} ({})",
                o.cell,
                o.policy,
                corruption,
                pass(corruption >= -cwoful::diagnostics::CORRUPTION_SLACK)
            );
        } else {
            println!(
                "[{}/{}] corruption-term bound: vacuous (uncapped weights) (PASS)",
                o.cell, o.policy
            );
        }
        println!(
            "[{}/{}] regularization bound: min margin = {:.6e} ({})",
            o.cell,
            o.policy,
            regularization,
            pass(regularization >= -cwoful::diagnostics::REGULARIZATION_SLACK)
        );
        println!(
            "[{}/{}] confidence violations: {confidence}/{n} seeds (delta = {})",
            o.cell, o.policy, o.delta
        );
        println!(
            "[{}/{}] self-normalized violations: {self_norm}/{n} seeds (delta = {})",
            o.cell, o.policy, o.delta
        );
    }
    println!("check: {}", pass(all_hard_ok));
    Ok(if all_hard_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn cmd_lowerbound(
    d: usize,
    budget: f64,
    policy: &str,
    horizon: usize,
    cli: &Cli,
    seeds: Option<Vec<u64>>,
) -> anyhow::Result<ExitCode> {
    let kind = PolicyKindSpec::parse(policy)?;
    let pair = lower_bound_instance_pair(d, budget)?;
    let bounds = pair.a0.bounds();
    let lambda = default_lambda(bounds);
    let flip_budget = 4.0 * budget / (d as f64 - 1.0);
    // CW-style policies know the attack budget; the baselines run their
    // uncorrupted parameterization.
    let known_c = match kind {
        PolicyKindSpec::CwOful | PolicyKindSpec::EnlargedBetaOful => flip_budget,
        PolicyKindSpec::Oful | PolicyKindSpec::Greedy => 0.0,
    };
    let policy_config = PolicyConfig {
        kind: kind.to_kind(),
        lambda,
        alpha: default_alpha(bounds, d, lambda, known_c),
        beta_mode: BetaMode::KnownC(known_c),
        delta: 0.05,
        horizon,
        bounds,
    }
    .normalized()?;

    let seeds = seeds.unwrap_or_else(|| vec![0]);
    let snapshot_interval = cli.snapshot_interval.unwrap_or(DEFAULT_SNAPSHOT_INTERVAL);

    let theta_fmt = |v: &nalgebra::DVector<f64>| {
        let coords: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
        format!("({})", coords.join(", "))
    };
    println!(
        "lower-bound pair: d = {d}, K = {horizon}, budget_param = {budget}, flip budget = {flip_budget}"
    );
    println!("theta0 = {}", theta_fmt(pair.a0.theta_star()));
    println!("theta1 = {}", theta_fmt(pair.a1.theta_star()));
    println!(
        "policy {} with beta = {:.4}, lambda = {:.4}",
        policy,
        policy_config.confidence_radius(d)?,
        lambda
    );

    let mut reports = Vec::new();
    let mut all_prefix_ok = true;
    for &seed in &seeds {
        let report = run_lower_bound_pair(&pair, &policy_config, horizon, seed, snapshot_interval)?;
        all_prefix_ok &= report.prefix_identical_through_decline;
        let divergence = report
            .first_action_divergence
            .map(|k| k.to_string())
            .unwrap_or_else(|| "none".into());
        print!(
            "seed {seed}: regret A0 = {:.4}, regret A1 = {:.4}, realized C = {:.4}, action divergence = {divergence}, prefix {}",
            report.a0.final_regret(),
            report.a1.final_regret(),
            report.a1.report.c_realized,
            pass(report.prefix_identical_through_decline),
        );
        match report.regret_floor {
            Some(floor) => println!(
                "; budget never exhausted, regret floor (K - 16*budget/(d-1))/8 = {:.4}: {}",
                floor,
                pass(report.a1.final_regret() >= floor)
            ),
            None => println!("; flip budget exhausted, regret floor not applicable"),
        }
        reports.push(report);
    }

    let out_root = cli.out.clone().unwrap_or_else(|| {
        std::env::var(OUTPUT_ROOT_ENV)
            .ok()
            .filter(|s| !s.is_empty())
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("cwoful-out"))
    });
    std::fs::create_dir_all(&out_root)?;
    let file = out_root.join(format!("lowerbound_{policy}_d{d}_K{horizon}.csv"));
    write_lower_bound_csv(&file, &reports)?;
    println!("wrote {}", file.display());
    println!("indistinguishability: {}", pass(all_prefix_ok));
    Ok(if all_prefix_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}
