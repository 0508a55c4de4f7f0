//! Reward-corruption strategies and budget accounting.
//!
//! The primary adversary model is post-action: the corruption c_k is chosen
//! after seeing the agent's action, and the corruption level is
//! C = Σ_k |c_k|. A pre-action per-arm table is also supported purely for
//! C′ = Σ_k max_{x∈𝒟_k} |c_{k,x}| accounting experiments; C ≤ C′ always.
//!
//! Budget enforcement is corrupt-fully-or-not-at-all: a round is corrupted
//! only when the whole charge fits inside the remaining budget, so the ledger
//! never overspends and indistinguishability arguments stay clean.

use nalgebra::DVector;

use crate::environment::RoundContext;
use crate::error::{Error, Result};

/// Optimality tolerance used by the suppression trigger.
const OPTIMAL_TOLERANCE: f64 = 1e-12;

/// How corruption is chosen each round.
#[derive(Debug, Clone)]
pub enum CorruptionStrategy {
    /// Never corrupts.
    None,
    /// Whenever the arm at `target_index` of the round's decision set is
    /// chosen, replace the observed reward with `flip_to` (charging
    /// |flip_to − clean| against the budget).
    BudgetedTargetFlip {
        target_index: usize,
        flip_to: f64,
        /// Nominal per-round charge; equals the realized charge on
        /// noiseless instances.
        per_round_magnitude: f64,
    },
    /// Subtract `shift` from the reward whenever the chosen action is optimal
    /// for the round (judged against the true parameter).
    OptimalActionSuppression { shift: f64, theta_star: DVector<f64> },
    /// Corruption is delegated to the environment's bounded misspecification
    /// term; this strategy itself never touches the reward.
    Misspecification,
    /// Pre-action adversary: a fixed per-arm corruption table committed
    /// before the action is revealed. The chosen arm's entry is applied and
    /// charged to C; the table maximum is charged to C′.
    PreActionWorstCase { per_arm: Vec<f64> },
}

/// Outcome of corrupting one round.
#[derive(Debug, Clone, Copy)]
pub struct Corrupted {
    pub corrupted_reward: f64,
    pub c_k: f64,
}

/// End-of-run corruption totals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorruptionReport {
    /// C = Σ |c_k| over the run.
    pub c_realized: f64,
    /// C′ = Σ max_{x∈𝒟_k} |c_{k,x}|; equals C for post-action strategies.
    pub c_prime_realized: f64,
    /// Rounds with c_k ≠ 0.
    pub rounds_corrupted: usize,
}

/// Mutable adversary ledger for a single run.
#[derive(Debug, Clone)]
pub struct AdversaryState {
    strategy: CorruptionStrategy,
    budget: f64,
    spent: f64,
    spent_prime: f64,
    rounds_corrupted: usize,
    budget_exhausted: bool,
    first_declined_round: Option<usize>,
}

impl AdversaryState {
    pub fn new(strategy: CorruptionStrategy, budget: f64) -> Result<Self> {
        if budget.is_nan() || budget < 0.0 {
            return Err(Error::Config(format!(
                "adversary budget must be nonnegative, got {budget}"
            )));
        }
        match &strategy {
            CorruptionStrategy::BudgetedTargetFlip {
                flip_to,
                per_round_magnitude,
                ..
            } => {
                if !flip_to.is_finite() {
                    return Err(Error::NonFinite("flip_to"));
                }
                if !per_round_magnitude.is_finite() || *per_round_magnitude < 0.0 {
                    return Err(Error::Config(format!(
                        "per_round_magnitude must be nonnegative, got {per_round_magnitude}"
                    )));
                }
            }
            CorruptionStrategy::OptimalActionSuppression { shift, .. } => {
                if !shift.is_finite() || *shift <= 0.0 {
                    return Err(Error::Config(format!(
                        "suppression shift must be positive, got {shift}"
                    )));
                }
            }
            CorruptionStrategy::PreActionWorstCase { per_arm } => {
                if per_arm.iter().any(|c| !c.is_finite()) {
                    return Err(Error::NonFinite("per-arm corruption table"));
                }
            }
            CorruptionStrategy::None | CorruptionStrategy::Misspecification => {}
        }
        Ok(Self {
            strategy,
            budget,
            spent: 0.0,
            spent_prime: 0.0,
            rounds_corrupted: 0,
            budget_exhausted: false,
            first_declined_round: None,
        })
    }

    /// Inert adversary.
    pub fn none() -> Self {
        Self::new(CorruptionStrategy::None, 0.0).expect("inert adversary")
    }

    pub fn strategy(&self) -> &CorruptionStrategy {
        &self.strategy
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn spent(&self) -> f64 {
        self.spent
    }

    /// True once a triggered corruption was declined for budget reasons.
    pub fn budget_exhausted(&self) -> bool {
        self.budget_exhausted
    }

    /// Round index of the first budget-declined corruption, if any.
    pub fn first_declined_round(&self) -> Option<usize> {
        self.first_declined_round
    }

    /// Corrupt the observed reward of one round (post-action). Over-budget
    /// attempts yield c_k = 0 and set the exhausted flag.
    pub fn corrupt(
        &mut self,
        round: &RoundContext,
        chosen: &DVector<f64>,
        clean_reward: f64,
    ) -> Corrupted {
        // (desired c_k, charge to C′ for this round)
        let desired: Option<(f64, f64)> = match &self.strategy {
            CorruptionStrategy::None | CorruptionStrategy::Misspecification => None,
            CorruptionStrategy::BudgetedTargetFlip {
                target_index,
                flip_to,
                ..
            } => match round.decision_set.get(*target_index) {
                Some(target) if target == chosen => {
                    let c = flip_to - clean_reward;
                    (c != 0.0).then_some((c, c.abs()))
                }
                _ => None,
            },
            CorruptionStrategy::OptimalActionSuppression { shift, theta_star } => {
                let value = theta_star.dot(chosen);
                (value >= round.optimal_value - OPTIMAL_TOLERANCE).then_some((-shift, *shift))
            }
            CorruptionStrategy::PreActionWorstCase { per_arm } => {
                let idx = round.decision_set.iter().position(|arm| arm == chosen);
                let c = idx.and_then(|i| per_arm.get(i)).copied().unwrap_or(0.0);
                let worst = round
                    .decision_set
                    .iter()
                    .enumerate()
                    .map(|(i, _)| per_arm.get(i).copied().unwrap_or(0.0).abs())
                    .fold(0.0, f64::max);
                (c != 0.0 || worst != 0.0).then_some((c, worst))
            }
        };

        let Some((c, prime_charge)) = desired else {
            return Corrupted {
                corrupted_reward: clean_reward,
                c_k: 0.0,
            };
        };

        // Exact comparison: commit only when the full charge fits.
        if self.spent + c.abs() > self.budget {
            self.budget_exhausted = true;
            self.first_declined_round.get_or_insert(round.round_index);
            return Corrupted {
                corrupted_reward: clean_reward,
                c_k: 0.0,
            };
        }

        self.spent += c.abs();
        self.spent_prime += prime_charge;
        if c != 0.0 {
            self.rounds_corrupted += 1;
        }
        Corrupted {
            corrupted_reward: clean_reward + c,
            c_k: c,
        }
    }

    /// Totals accumulated so far; C_realized ≤ C′_realized always.
    pub fn corruption_report(&self) -> CorruptionReport {
        CorruptionReport {
            c_realized: self.spent,
            c_prime_realized: self.spent_prime,
            rounds_corrupted: self.rounds_corrupted,
        }
    }
}

/// The budget-capped reward-flip attack paired with
/// [`crate::environment::lower_bound_instance_pair`]: flip arm 2's observed
/// reward to 1/8 (a −1/4 corruption on the second instance) until the total
/// budget 4·budget_param/(d−1) would be exceeded.
pub fn lower_bound_flip_adversary(budget_param: f64, d: usize) -> Result<AdversaryState> {
    if d < 2 {
        return Err(Error::Config(format!(
            "flip adversary needs dimension at least 2, got {d}"
        )));
    }
    if !budget_param.is_finite() || budget_param < 0.0 {
        return Err(Error::Config(format!(
            "budget_param must be nonnegative, got {budget_param}"
        )));
    }
    AdversaryState::new(
        CorruptionStrategy::BudgetedTargetFlip {
            target_index: 1,
            flip_to: 0.125,
            per_round_magnitude: 0.25,
        },
        4.0 * budget_param / (d as f64 - 1.0),
    )
}
