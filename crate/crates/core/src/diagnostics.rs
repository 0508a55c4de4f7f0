//! Numerical verification of the concentration and potential inequalities.
//!
//! Every check recomputes its quantities from the recorded trajectory with
//! dense factorizations, independent of the incremental engine that produced
//! the run:
//!
//! - potential: Σ_k min(1, w_k·bonus_k²) ≤ 2·(log det Σ_K − d·log λ), a hard
//!   per-run inequality;
//! - corruption term: ‖Σᵢ wᵢcᵢxᵢ‖_{Σ⁻¹} ≤ α·Σᵢ|cᵢ| at every snapshot, hard
//!   whenever α is finite;
//! - regularization term: λ‖θ*‖_{Σ⁻¹} ≤ √λ·S at every snapshot, hard;
//! - self-normalized noise: ‖Σᵢ wᵢηᵢxᵢ‖²_{Σ⁻¹} ≤ 2R²·log(√(det Σ/det λI)/δ),
//!   holding with probability 1−δ, so only its cross-seed violation rate is
//!   meaningful;
//! - confidence event: ‖θ_k − θ*‖_{Σ_k} ≤ β per round, likewise a 1−δ event.

use nalgebra::{Cholesky, DMatrix};

use crate::environment::BanditInstance;
use crate::error::{Error, Result};
use crate::harness::EpisodeResult;
use crate::policy::Alpha;

/// Numerical slack on the hard potential inequality.
pub const POTENTIAL_SLACK: f64 = 1e-6;
/// Numerical slack on the hard corruption-term inequality.
pub const CORRUPTION_SLACK: f64 = 1e-9;
/// Numerical slack on the hard regularization inequality.
pub const REGULARIZATION_SLACK: f64 = 1e-9;

/// A measured value against its bound at one snapshot.
#[derive(Debug, Clone, Copy)]
pub struct BoundCheck {
    /// Completed rounds when the snapshot was taken.
    pub round: usize,
    pub measured: f64,
    pub bound: f64,
}

impl BoundCheck {
    pub fn margin(&self) -> f64 {
        self.bound - self.measured
    }
}

/// Per-run report of all lemma checks.
#[derive(Debug, Clone)]
pub struct DiagnosticReport {
    pub seed: u64,
    /// Σ_k min(1, w_k·bonus_k²), bonuses replayed densely.
    pub potential_lhs: f64,
    /// 2·(log det Σ_K − d·log λ) from a dense factorization of the rebuilt
    /// final design matrix.
    pub potential_rhs: f64,
    pub potential_ok: bool,
    /// Largest |replayed − recorded| exploration bonus over the run.
    pub bonus_replay_max_diff: f64,
    /// Snapshot with the smallest corruption-term margin; `None` when α is
    /// uncapped (the bound is vacuous) or nothing was corrupted.
    pub corruption_term_worst: Option<BoundCheck>,
    pub corruption_ok: bool,
    /// Snapshot with the smallest regularization margin.
    pub regularization_worst: Option<BoundCheck>,
    pub regularization_ok: bool,
    /// Any snapshot violating the self-normalized noise bound.
    pub self_normalized_violated: bool,
    /// Any round with ‖θ_k − θ*‖_{Σ_k} > β.
    pub confidence_violated: bool,
}

impl DiagnosticReport {
    /// All hard per-run inequalities hold.
    pub fn hard_checks_ok(&self) -> bool {
        self.potential_ok && self.corruption_ok && self.regularization_ok
    }
}

/// Verify the lemma inequalities on one finished episode.
///
/// `delta` is the policy's confidence parameter (it enters the
/// self-normalized bound).
pub fn diagnostic_lemma_checks(
    episode: &EpisodeResult,
    instance: &BanditInstance,
    delta: f64,
) -> Result<DiagnosticReport> {
    if !(0.0..1.0).contains(&delta) || delta == 0.0 {
        return Err(Error::Config(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    let d = episode.dim;
    let lambda = episode.lambda;
    let theta_star = instance.theta_star();
    let bounds = instance.bounds();

    // Replay the trajectory with dense per-round factorizations.
    let mut design = DMatrix::<f64>::identity(d, d) * lambda;
    let mut potential_lhs = 0.0;
    let mut bonus_replay_max_diff: f64 = 0.0;
    for (record, x) in episode.records.iter().zip(episode.actions.iter()) {
        let chol = cholesky(&design)?;
        let bonus = x.dot(&chol.solve(x)).max(0.0).sqrt();
        bonus_replay_max_diff = bonus_replay_max_diff.max((bonus - record.bonus).abs());
        potential_lhs += (record.weight * bonus * bonus).min(1.0);
        design += record.weight * x * x.transpose();
    }
    let final_chol = cholesky(&design)?;
    let logdet_final = logdet(&final_chol);
    let potential_rhs = 2.0 * (logdet_final - d as f64 * lambda.ln());
    let potential_ok = potential_lhs <= potential_rhs + POTENTIAL_SLACK;

    // Snapshot-based bounds.
    let mut corruption_term_worst: Option<BoundCheck> = None;
    let mut regularization_worst: Option<BoundCheck> = None;
    let mut self_normalized_violated = false;
    for snap in &episode.snapshots {
        let chol = cholesky(&snap.cov)?;
        let snap_logdet = logdet(&chol);

        if let Alpha::Value(alpha) = episode.alpha {
            let v = &snap.corruption_vec;
            let measured = v.dot(&chol.solve(v)).max(0.0).sqrt();
            let check = BoundCheck {
                round: snap.completed_rounds,
                measured,
                bound: alpha * snap.abs_corruption,
            };
            if corruption_term_worst.map_or(true, |w| check.margin() < w.margin()) {
                corruption_term_worst = Some(check);
            }
        }

        let reg_measured = lambda * theta_star.dot(&chol.solve(theta_star)).max(0.0).sqrt();
        let reg_check = BoundCheck {
            round: snap.completed_rounds,
            measured: reg_measured,
            bound: lambda.sqrt() * bounds.param_norm,
        };
        if regularization_worst.map_or(true, |w| reg_check.margin() < w.margin()) {
            regularization_worst = Some(reg_check);
        }

        let m = &snap.noise_vec;
        let noise_lhs = m.dot(&chol.solve(m)).max(0.0);
        let r = bounds.noise_scale;
        let noise_rhs =
            r * r * (snap_logdet - d as f64 * lambda.ln() + 2.0 * (1.0 / delta).ln());
        if noise_lhs > noise_rhs {
            self_normalized_violated = true;
        }
    }

    let corruption_ok = corruption_term_worst
        .map_or(true, |w| w.measured <= w.bound + CORRUPTION_SLACK);
    let regularization_ok = regularization_worst
        .map_or(true, |w| w.measured <= w.bound + REGULARIZATION_SLACK);
    let confidence_violated = episode.curve.confidence_violations > 0;

    Ok(DiagnosticReport {
        seed: episode.seed,
        potential_lhs,
        potential_rhs,
        potential_ok,
        bonus_replay_max_diff,
        corruption_term_worst,
        corruption_ok,
        regularization_worst,
        regularization_ok,
        self_normalized_violated,
        confidence_violated,
    })
}

/// Fraction of set flags, e.g. the cross-seed confidence-violation rate.
pub fn violation_rate(flags: &[bool]) -> f64 {
    if flags.is_empty() {
        return 0.0;
    }
    flags.iter().filter(|f| **f).count() as f64 / flags.len() as f64
}

fn cholesky(m: &DMatrix<f64>) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    m.clone()
        .cholesky()
        .ok_or(Error::Numerical("design matrix lost positive definiteness"))
}

fn logdet(chol: &Cholesky<f64, nalgebra::Dyn>) -> f64 {
    2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>()
}
