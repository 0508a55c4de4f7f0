//! Episode orchestration, regret accounting, and multi-seed aggregation.
//!
//! One episode wires a policy, an instance, and an adversary together for K
//! rounds: generate round → select action → sample clean reward → corrupt →
//! compute weight → fold into the ridge state. Pseudo-regret is always
//! charged against the clean optimum of the realized decision set; corruption
//! only ever enters through the observation channel.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::adversary::{AdversaryState, CorruptionReport};
use crate::environment::{BanditInstance, InstancePair};
use crate::error::{Error, Result};
use crate::policy::{Alpha, PolicyConfig, PolicyState};
use crate::rng::RunStreams;

/// Rounds between dense covariance snapshots.
pub const DEFAULT_SNAPSHOT_INTERVAL: usize = 50;

/// Everything observed and decided in one round.
#[derive(Debug, Clone, Copy)]
pub struct RoundRecord {
    /// 1-based round index.
    pub k: usize,
    pub action_index: usize,
    pub weight: f64,
    /// ‖x_k‖ in the pre-update inverse-covariance norm.
    pub bonus: f64,
    pub clean_reward: f64,
    pub c_k: f64,
    /// clean_reward + c_k, what the policy trains on.
    pub observed_reward: f64,
    /// Clean optimum minus the clean value of the chosen action.
    pub instant_regret: f64,
    pub cum_regret: f64,
    /// ‖θ_k − θ*‖_{Σ_k} against the pre-update state.
    pub est_error: f64,
    /// est_error ≤ β.
    pub confidence_ok: bool,
}

/// Dense state captured every `snapshot_interval` rounds for lemma checks.
#[derive(Debug, Clone)]
pub struct DesignSnapshot {
    /// Updates folded in when the snapshot was taken.
    pub completed_rounds: usize,
    pub cov: DMatrix<f64>,
    pub logdet: f64,
    /// Σᵢ wᵢ·cᵢ·xᵢ up to this round.
    pub corruption_vec: DVector<f64>,
    /// Σᵢ |cᵢ| up to this round.
    pub abs_corruption: f64,
    /// Σᵢ wᵢ·ηᵢ·xᵢ up to this round.
    pub noise_vec: DVector<f64>,
}

/// Per-seed regret curve plus the running diagnostic traces.
#[derive(Debug, Clone)]
pub struct RegretCurve {
    pub seed: u64,
    /// Nondecreasing cumulative pseudo-regret, one entry per round.
    pub cumulative_regret: Vec<f64>,
    /// Running Σ|cᵢ|.
    pub corruption_abs: Vec<f64>,
    /// Running Σ min(1, wᵢ·bonusᵢ²).
    pub potential_sum: Vec<f64>,
    /// Rounds where ‖θ_k − θ*‖_{Σ_k} exceeded β.
    pub confidence_violations: usize,
}

/// Full output of one episode.
#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub seed: u64,
    pub records: Vec<RoundRecord>,
    pub curve: RegretCurve,
    pub snapshots: Vec<DesignSnapshot>,
    /// Chosen action vectors, for trajectory replay.
    pub actions: Vec<DVector<f64>>,
    /// Realized stochastic noise per round.
    pub noises: Vec<f64>,
    /// θ_k used at each round (pre-update).
    pub theta_trace: Vec<DVector<f64>>,
    pub final_theta: DVector<f64>,
    pub final_logdet: f64,
    pub report: CorruptionReport,
    pub first_declined_round: Option<usize>,
    pub dim: usize,
    pub lambda: f64,
    pub beta: f64,
    pub alpha: Alpha,
}

impl EpisodeResult {
    pub fn final_regret(&self) -> f64 {
        self.curve.cumulative_regret.last().copied().unwrap_or(0.0)
    }
}

/// Run one episode of `horizon` rounds. The adversary state is consumed; the
/// policy is built fresh from its config.
pub fn run_episode(
    instance: &BanditInstance,
    mut adversary: AdversaryState,
    policy_config: &PolicyConfig,
    horizon: usize,
    seed: u64,
    snapshot_interval: usize,
) -> Result<EpisodeResult> {
    if horizon == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    if snapshot_interval == 0 {
        return Err(Error::Config("snapshot_interval must be at least 1".into()));
    }
    let dim = instance.dim();
    let mut policy = PolicyState::new(policy_config, dim)?;
    let mut streams = RunStreams::new(seed);
    let theta_star = instance.theta_star();

    let mut records = Vec::with_capacity(horizon);
    let mut actions = Vec::with_capacity(horizon);
    let mut noises = Vec::with_capacity(horizon);
    let mut theta_trace = Vec::with_capacity(horizon);
    let mut snapshots = Vec::new();
    let mut cumulative_regret = Vec::with_capacity(horizon);
    let mut corruption_abs = Vec::with_capacity(horizon);
    let mut potential_sum = Vec::with_capacity(horizon);

    let mut cum_regret = 0.0;
    let mut abs_corruption = 0.0;
    let mut potential = 0.0;
    let mut confidence_violations = 0;
    let mut corruption_vec = DVector::zeros(dim);
    let mut noise_vec = DVector::zeros(dim);

    for k in 1..=horizon {
        let ctx = instance.generate_round(k, &mut streams.environment)?;
        let choice = policy.select_action(&ctx.decision_set)?;
        let est_error = policy.design().estimation_error_norm(theta_star)?;
        let confidence_ok = est_error <= policy.beta();
        if !confidence_ok {
            confidence_violations += 1;
        }

        let x = ctx.decision_set[choice.index].clone();
        let sample = instance.sample_reward(&x, &mut streams.environment);
        let corrupted = adversary.corrupt(&ctx, &x, sample.clean_reward);
        let weight = policy.compute_weight(&x)?;

        theta_trace.push(policy.design().theta_hat().clone());
        policy.observe(&x, corrupted.corrupted_reward, weight)?;

        let instant_regret = ctx.optimal_value - instance.clean_value(&x);
        debug_assert!(instant_regret >= -1e-12, "negative regret {instant_regret}");
        cum_regret += instant_regret;
        abs_corruption += corrupted.c_k.abs();
        potential += (weight * choice.bonus * choice.bonus).min(1.0);
        corruption_vec.axpy(weight * corrupted.c_k, &x, 1.0);
        noise_vec.axpy(weight * sample.noise, &x, 1.0);

        records.push(RoundRecord {
            k,
            action_index: choice.index,
            weight,
            bonus: choice.bonus,
            clean_reward: sample.clean_reward,
            c_k: corrupted.c_k,
            observed_reward: corrupted.corrupted_reward,
            instant_regret,
            cum_regret,
            est_error,
            confidence_ok,
        });
        cumulative_regret.push(cum_regret);
        corruption_abs.push(abs_corruption);
        potential_sum.push(potential);
        actions.push(x);
        noises.push(sample.noise);

        if k % snapshot_interval == 0 || k == horizon {
            snapshots.push(DesignSnapshot {
                completed_rounds: k,
                cov: policy.design().cov().clone(),
                logdet: policy.design().logdet(),
                corruption_vec: corruption_vec.clone(),
                abs_corruption,
                noise_vec: noise_vec.clone(),
            });
        }
    }

    Ok(EpisodeResult {
        seed,
        records,
        curve: RegretCurve {
            seed,
            cumulative_regret,
            corruption_abs,
            potential_sum,
            confidence_violations,
        },
        snapshots,
        actions,
        noises,
        theta_trace,
        final_theta: policy.design().theta_hat().clone(),
        final_logdet: policy.design().logdet(),
        report: adversary.corruption_report(),
        first_declined_round: adversary.first_declined_round(),
        dim,
        lambda: policy.design().lambda(),
        beta: policy.beta(),
        alpha: policy.alpha(),
    })
}

/// Run one episode per seed in parallel and map each result in the worker;
/// output order follows the seed slice.
pub fn run_seeds<T, F>(
    instance: &BanditInstance,
    adversary_template: &AdversaryState,
    policy_config: &PolicyConfig,
    horizon: usize,
    seeds: &[u64],
    snapshot_interval: usize,
    map: F,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(EpisodeResult) -> Result<T> + Sync,
{
    seeds
        .par_iter()
        .map(|&seed| {
            let episode = run_episode(
                instance,
                adversary_template.clone(),
                policy_config,
                horizon,
                seed,
                snapshot_interval,
            )?;
            map(episode)
        })
        .collect()
}

/// Mean/std/min/max envelopes over per-seed curves.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretAggregate {
    pub horizon: usize,
    pub num_seeds: usize,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl RegretAggregate {
    pub fn final_mean(&self) -> f64 {
        self.mean.last().copied().unwrap_or(0.0)
    }
}

/// Reduce per-seed curves to envelopes. Inputs are sorted by seed first, so
/// the reduction is deterministic regardless of arrival order. Standard
/// deviation uses the population convention.
pub fn aggregate(curves: &[RegretCurve]) -> Result<RegretAggregate> {
    let Some(first) = curves.first() else {
        return Err(Error::Config("aggregate needs at least one curve".into()));
    };
    let horizon = first.cumulative_regret.len();
    if curves.iter().any(|c| c.cumulative_regret.len() != horizon) {
        return Err(Error::Config(
            "aggregate needs curves with identical horizons".into(),
        ));
    }
    let mut ordered: Vec<&RegretCurve> = curves.iter().collect();
    ordered.sort_by_key(|c| c.seed);

    let n = ordered.len() as f64;
    let mut mean = vec![0.0; horizon];
    let mut std = vec![0.0; horizon];
    let mut min = vec![f64::INFINITY; horizon];
    let mut max = vec![f64::NEG_INFINITY; horizon];
    for curve in &ordered {
        for (k, &v) in curve.cumulative_regret.iter().enumerate() {
            mean[k] += v;
            min[k] = min[k].min(v);
            max[k] = max[k].max(v);
        }
    }
    for v in &mut mean {
        *v /= n;
    }
    for curve in &ordered {
        for (k, &v) in curve.cumulative_regret.iter().enumerate() {
            let d = v - mean[k];
            std[k] += d * d;
        }
    }
    for v in &mut std {
        *v = (*v / n).sqrt();
    }
    Ok(RegretAggregate {
        horizon,
        num_seeds: ordered.len(),
        mean,
        std,
        min,
        max,
    })
}

/// One cell of a scaling study: mean final regret at a (d, K, C) corner.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingCell {
    pub dim: usize,
    pub horizon: usize,
    pub corruption_budget: f64,
    pub policy: String,
    pub mean_final_regret: f64,
    /// regret / (d²/Δ + d·C) when the instance has a known minimal gap.
    pub instance_bound_ratio: Option<f64>,
}

/// Scaling cells plus the fitted growth laws.
#[derive(Debug, Clone)]
pub struct ScalingTable {
    pub cells: Vec<ScalingCell>,
    /// Log-log slope of regret vs K over uncorrupted cells (per policy and
    /// dim group with ≥ 2 horizons; pooled mean of group slopes).
    pub slope_regret_vs_horizon: Option<f64>,
    /// Linear slope of regret vs C at fixed (policy, d, K).
    pub slope_regret_vs_corruption: Option<f64>,
}

/// Assemble a scaling table, fitting growth slopes where the grid allows.
pub fn scaling_table(cells: Vec<ScalingCell>) -> ScalingTable {
    let mut horizon_slopes = Vec::new();
    let mut corruption_slopes = Vec::new();

    let mut groups: Vec<(&str, usize)> = cells
        .iter()
        .map(|c| (c.policy.as_str(), c.dim))
        .collect();
    groups.sort();
    groups.dedup();

    for (policy, dim) in groups {
        let uncorrupted: Vec<(f64, f64)> = cells
            .iter()
            .filter(|c| {
                c.policy == policy
                    && c.dim == dim
                    && c.corruption_budget == 0.0
                    && c.mean_final_regret > 0.0
            })
            .map(|c| (c.horizon as f64, c.mean_final_regret))
            .collect();
        if let Some(slope) = log_log_slope(&uncorrupted) {
            horizon_slopes.push(slope);
        }

        let mut horizons: Vec<usize> = cells
            .iter()
            .filter(|c| c.policy == policy && c.dim == dim)
            .map(|c| c.horizon)
            .collect();
        horizons.sort_unstable();
        horizons.dedup();
        for k in horizons {
            let by_c: Vec<(f64, f64)> = cells
                .iter()
                .filter(|c| c.policy == policy && c.dim == dim && c.horizon == k)
                .map(|c| (c.corruption_budget, c.mean_final_regret))
                .collect();
            if let Some(slope) = linear_slope(&by_c) {
                corruption_slopes.push(slope);
            }
        }
    }

    ScalingTable {
        cells,
        slope_regret_vs_horizon: mean_of(&horizon_slopes),
        slope_regret_vs_corruption: mean_of(&corruption_slopes),
    }
}

fn mean_of(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Least-squares slope of ln y against ln x; needs ≥ 2 distinct x.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    linear_slope(&logs)
}

/// Least-squares slope of y against x; needs ≥ 2 distinct x.
pub fn linear_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|(x, _)| x).sum::<f64>() / n;
    let my = points.iter().map(|(_, y)| y).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

/// Outcome of one seed of the paired lower-bound experiment.
#[derive(Debug, Clone)]
pub struct PairedRunReport {
    pub seed: u64,
    pub a0: EpisodeResult,
    pub a1: EpisodeResult,
    /// First 1-based round whose actions differ across the pair.
    pub first_action_divergence: Option<usize>,
    /// First 1-based round whose observed rewards differ across the pair.
    pub first_observation_divergence: Option<usize>,
    /// Actions identical through the round of the first budget-declined flip
    /// (through the whole run when the budget never runs out).
    pub prefix_identical_through_decline: bool,
    /// (K − 16·budget_param/(d−1))/8: the regret floor on the corrupted
    /// instance when the flip budget was never exhausted.
    pub regret_floor: Option<f64>,
}

/// Run the same policy and seed against (a0, no adversary) and
/// (a1, budget-flip adversary) and compare the traces.
pub fn run_lower_bound_pair(
    pair: &InstancePair,
    policy_config: &PolicyConfig,
    horizon: usize,
    seed: u64,
    snapshot_interval: usize,
) -> Result<PairedRunReport> {
    let d = pair.a0.dim();
    let flip = crate::adversary::lower_bound_flip_adversary(pair.budget_param, d)?;
    let flip_budget = flip.budget();
    let a0 = run_episode(
        &pair.a0,
        AdversaryState::none(),
        policy_config,
        horizon,
        seed,
        snapshot_interval,
    )?;
    let a1 = run_episode(&pair.a1, flip, policy_config, horizon, seed, snapshot_interval)?;

    let first_action_divergence = a0
        .records
        .iter()
        .zip(a1.records.iter())
        .find(|(r0, r1)| r0.action_index != r1.action_index)
        .map(|(r0, _)| r0.k);
    let first_observation_divergence = a0
        .records
        .iter()
        .zip(a1.records.iter())
        .find(|(r0, r1)| r0.observed_reward != r1.observed_reward)
        .map(|(r0, _)| r0.k);

    let prefix_identical_through_decline = match a1.first_declined_round {
        None => first_action_divergence.is_none(),
        Some(declined) => first_action_divergence.map_or(true, |k| k > declined),
    };
    let regret_floor = (a1.first_declined_round.is_none())
        .then(|| (horizon as f64 - 4.0 * flip_budget) / 8.0);

    Ok(PairedRunReport {
        seed,
        a0,
        a1,
        first_action_divergence,
        first_observation_divergence,
        prefix_identical_through_decline,
        regret_floor,
    })
}
