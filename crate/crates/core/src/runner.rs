//! Experiment execution: expand a config into cells, run every
//! (cell × policy × seed) episode, write logs, and reduce to aggregates.
//!
//! Episodes run in parallel; each output file is owned by exactly one worker,
//! and cross-seed reductions sort by seed, so reruns of the same config are
//! byte-identical regardless of scheduling.

use std::fs;
use std::path::{Path, PathBuf};

use crate::config::{ExperimentConfig, ResolvedCell, ResolvedPolicy};
use crate::diagnostics::{diagnostic_lemma_checks, DiagnosticReport};
use crate::error::Result;
use crate::harness::{
    aggregate, run_seeds, scaling_table, RegretAggregate, ScalingCell, ScalingTable,
};
use crate::output::{
    write_aggregate_csv, write_metadata, write_rounds_csv, write_scaling_csv, DerivedPolicy,
};

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "CWOFUL_OUT";
/// Marker file present while a run directory is being written.
pub const INCOMPLETE_MARKER: &str = ".incomplete";

/// Execution overrides coming from the command line (or an embedding).
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides the config's output root.
    pub output_root: Option<PathBuf>,
    /// Overrides the config's seed set.
    pub seeds: Option<Vec<u64>>,
    /// Overrides the config's snapshot interval.
    pub snapshot_interval: Option<usize>,
    /// Write per-round logs, aggregates, and metadata to disk.
    pub write_files: bool,
}

/// Slim per-seed diagnostic digest.
#[derive(Debug, Clone, Copy)]
pub struct DiagnosticSummary {
    pub seed: u64,
    pub hard_ok: bool,
    pub potential_margin: f64,
    /// None when the α-bound is vacuous (uncapped weights).
    pub corruption_margin: Option<f64>,
    pub regularization_margin: f64,
    pub self_normalized_violated: bool,
    pub confidence_violated: bool,
    pub bonus_replay_max_diff: f64,
}

impl DiagnosticSummary {
    fn from_report(report: &DiagnosticReport) -> Self {
        Self {
            seed: report.seed,
            hard_ok: report.hard_checks_ok(),
            potential_margin: report.potential_rhs - report.potential_lhs,
            corruption_margin: report.corruption_term_worst.map(|c| c.margin()),
            regularization_margin: report
                .regularization_worst
                .map(|c| c.margin())
                .unwrap_or(f64::INFINITY),
            self_normalized_violated: report.self_normalized_violated,
            confidence_violated: report.confidence_violated,
            bonus_replay_max_diff: report.bonus_replay_max_diff,
        }
    }
}

/// Everything measured for one (cell, policy) pair.
#[derive(Debug, Clone)]
pub struct PolicyCellOutcome {
    pub cell: String,
    pub policy: String,
    pub dim: usize,
    pub horizon: usize,
    pub corruption_budget: f64,
    pub lambda: f64,
    pub alpha: Option<f64>,
    pub beta: f64,
    pub delta: f64,
    pub beta_below_one: bool,
    pub aggregate: RegretAggregate,
    pub diagnostics: Vec<DiagnosticSummary>,
    pub mean_realized_corruption: f64,
    /// mean regret / (d²/Δ + d·C) on fixed decision sets with a defined gap.
    pub instance_bound_ratio: Option<f64>,
}

impl PolicyCellOutcome {
    pub fn confidence_violation_rate(&self) -> f64 {
        let flags: Vec<bool> = self
            .diagnostics
            .iter()
            .map(|d| d.confidence_violated)
            .collect();
        crate::diagnostics::violation_rate(&flags)
    }

    pub fn all_hard_checks_ok(&self) -> bool {
        self.diagnostics.iter().all(|d| d.hard_ok)
    }
}

/// Output of a full experiment execution.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    /// Run directory, when files were written.
    pub out_dir: Option<PathBuf>,
    pub outcomes: Vec<PolicyCellOutcome>,
    /// Present when the run spans more than one grid corner.
    pub scaling: Option<ScalingTable>,
}

/// Resolve the output root: explicit override, then the config, then
/// `$CWOFUL_OUT`, then `./cwoful-out`.
pub fn output_root(config: &ExperimentConfig, options: &RunOptions) -> PathBuf {
    if let Some(root) = &options.output_root {
        return root.clone();
    }
    if let Some(dir) = &config.experiment.output_dir {
        return PathBuf::from(dir);
    }
    if let Ok(env_root) = std::env::var(OUTPUT_ROOT_ENV) {
        if !env_root.is_empty() {
            return PathBuf::from(env_root);
        }
    }
    PathBuf::from("cwoful-out")
}

fn derived_policies(cells: &[ResolvedCell]) -> Result<Vec<DerivedPolicy>> {
    let mut derived = Vec::new();
    for cell in cells {
        for ResolvedPolicy { name, config } in &cell.policies {
            let beta = config.confidence_radius(cell.dim)?;
            derived.push(DerivedPolicy {
                cell: cell.label.clone(),
                policy: name.clone(),
                kind: config.kind.as_str().to_string(),
                lambda: config.lambda,
                alpha: config.effective_alpha().value(),
                beta,
                delta: config.delta,
                horizon: config.horizon,
                beta_below_one: beta < 1.0,
            });
        }
    }
    Ok(derived)
}

/// Run the whole experiment described by `config`.
pub fn execute(config: &ExperimentConfig, options: &RunOptions) -> Result<ExperimentOutcome> {
    let cells = config.resolve()?;
    let seeds = config.seeds(options.seeds.as_deref())?;
    let snapshot_interval = options
        .snapshot_interval
        .unwrap_or(config.experiment.snapshot_interval);
    let derived = derived_policies(&cells)?;

    let out_dir = if options.write_files {
        let dir = output_root(config, options).join(&config.experiment.name);
        fs::create_dir_all(&dir)?;
        fs::write(dir.join(INCOMPLETE_MARKER), b"run in progress\n")?;
        write_metadata(&dir.join("metadata.toml"), config, &derived)?;
        Some(dir)
    } else {
        None
    };

    let mut outcomes = Vec::new();
    for cell in &cells {
        let gap = cell.instance.minimal_gap().ok().flatten();
        for ResolvedPolicy { name, config: policy_config } in &cell.policies {
            let per_seed = run_seeds(
                &cell.instance,
                &cell.adversary,
                policy_config,
                cell.horizon,
                &seeds,
                snapshot_interval,
                |episode| {
                    if let Some(dir) = &out_dir {
                        let file = dir.join(format!(
                            "rounds_{}_{}_s{}.csv",
                            name, cell.label, episode.seed
                        ));
                        write_rounds_csv(&file, &episode.records)?;
                    }
                    let report =
                        diagnostic_lemma_checks(&episode, &cell.instance, policy_config.delta)?;
                    Ok((
                        episode.curve.clone(),
                        DiagnosticSummary::from_report(&report),
                        episode.report.c_realized,
                    ))
                },
            )?;

            let curves: Vec<_> = per_seed.iter().map(|(c, _, _)| c.clone()).collect();
            let diagnostics: Vec<_> = per_seed.iter().map(|(_, d, _)| *d).collect();
            let mean_realized_corruption =
                per_seed.iter().map(|(_, _, c)| *c).sum::<f64>() / per_seed.len() as f64;
            let agg = aggregate(&curves)?;
            if let Some(dir) = &out_dir {
                write_aggregate_csv(&dir.join(format!("agg_{}_{}.csv", name, cell.label)), &agg)?;
            }
            let beta = policy_config.confidence_radius(cell.dim)?;
            let instance_bound_ratio = gap.map(|delta| {
                let d = cell.dim as f64;
                agg.final_mean() / (d * d / delta + d * mean_realized_corruption)
            });
            outcomes.push(PolicyCellOutcome {
                cell: cell.label.clone(),
                policy: name.clone(),
                dim: cell.dim,
                horizon: cell.horizon,
                corruption_budget: cell.corruption_budget,
                lambda: policy_config.lambda,
                alpha: policy_config.effective_alpha().value(),
                beta,
                delta: policy_config.delta,
                beta_below_one: beta < 1.0,
                aggregate: agg,
                diagnostics,
                mean_realized_corruption,
                instance_bound_ratio,
            });
        }
    }

    let scaling = if outcomes.len() > 1 {
        let table = scaling_table(
            outcomes
                .iter()
                .map(|o| ScalingCell {
                    dim: o.dim,
                    horizon: o.horizon,
                    corruption_budget: o.corruption_budget,
                    policy: o.policy.clone(),
                    mean_final_regret: o.aggregate.final_mean(),
                    instance_bound_ratio: o.instance_bound_ratio,
                })
                .collect(),
        );
        if let Some(dir) = &out_dir {
            write_scaling_csv(&dir.join("scaling.csv"), &table)?;
        }
        Some(table)
    } else {
        None
    };

    if let Some(dir) = &out_dir {
        remove_marker(dir)?;
    }

    Ok(ExperimentOutcome {
        out_dir,
        outcomes,
        scaling,
    })
}

fn remove_marker(dir: &Path) -> Result<()> {
    let marker = dir.join(INCOMPLETE_MARKER);
    if marker.exists() {
        fs::remove_file(marker)?;
    }
    Ok(())
}
