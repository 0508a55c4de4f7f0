//! Bandit instances: ground-truth parameter, decision sets, reward sampling.
//!
//! An instance bundles the unknown parameter θ*, the per-round decision-set
//! generator, the noise law, and the problem bounds (L, S, R). Rewards follow
//! the linear model ⟨θ*, x⟩ plus an optional bounded deterministic
//! misspecification term plus stochastic noise. Regret accounting always uses
//! the clean linear values.

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng;

/// Gaps smaller than this count as "arm is optimal" in gap computations.
const GAP_TOLERANCE: f64 = 1e-12;

/// Problem bounds: ‖x‖₂ ≤ L for every action, ‖θ*‖₂ ≤ S, noise is
/// R-sub-Gaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    /// L — largest allowed action norm.
    pub action_norm: f64,
    /// S — largest allowed parameter norm.
    pub param_norm: f64,
    /// R — sub-Gaussian scale of the reward noise.
    pub noise_scale: f64,
}

impl Bounds {
    pub(crate) fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("bounds.action_norm", self.action_norm),
            ("bounds.param_norm", self.param_norm),
            ("bounds.noise_scale", self.noise_scale),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Config(format!(
                    "{name} must be a positive finite real, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// How the per-round decision set 𝒟_k is produced.
#[derive(Debug, Clone, PartialEq)]
pub enum DecisionSetSpec {
    /// The same finite arm list every round.
    FixedFinite(Vec<DVector<f64>>),
    /// `num_arms` fresh directions drawn uniformly on the sphere of radius L
    /// each round.
    FreshSphereSample { num_arms: usize },
    /// The d standard basis vectors, fixed across rounds.
    BasisArms,
}

/// Reward noise law. The scale comes from [`Bounds::noise_scale`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseSpec {
    /// N(0, R²).
    Gaussian,
    /// Uniform on [−R, R]; R-sub-Gaussian by Hoeffding's lemma.
    UniformBounded,
    /// Deterministic rewards.
    Zero,
}

/// One realized round: the decision set and its clean optimum.
#[derive(Debug, Clone)]
pub struct RoundContext {
    /// 1-based round index k.
    pub round_index: usize,
    pub decision_set: Vec<DVector<f64>>,
    /// max_{x ∈ 𝒟_k} ⟨θ*, x⟩, scanned with first-index tie-breaking.
    pub optimal_value: f64,
}

/// Reward observation before any adversarial corruption.
#[derive(Debug, Clone, Copy)]
pub struct RewardSample {
    /// ⟨θ*, x⟩ + misspecification + noise.
    pub clean_reward: f64,
    /// The stochastic noise component alone.
    pub noise: f64,
}

/// A fully specified bandit environment. Immutable after construction.
#[derive(Debug, Clone)]
pub struct BanditInstance {
    theta_star: DVector<f64>,
    bounds: Bounds,
    decision_set_spec: DecisionSetSpec,
    noise_spec: NoiseSpec,
    misspec_epsilon: f64,
    // Fixed unit vector seeding the deterministic misspecification term.
    misspec_direction: DVector<f64>,
}

impl BanditInstance {
    /// Validates norms and bounds; `instance_seed` only fixes the
    /// misspecification direction.
    pub fn new(
        theta_star: DVector<f64>,
        bounds: Bounds,
        decision_set_spec: DecisionSetSpec,
        noise_spec: NoiseSpec,
        misspec_epsilon: f64,
        instance_seed: u64,
    ) -> Result<Self> {
        bounds.validate()?;
        let dim = theta_star.len();
        if dim == 0 {
            return Err(Error::Config("instance dimension must be at least 1".into()));
        }
        if theta_star.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("theta_star"));
        }
        if theta_star.norm() > bounds.param_norm + 1e-12 {
            return Err(Error::Config(format!(
                "theta_star norm {} exceeds bounds.param_norm {}",
                theta_star.norm(),
                bounds.param_norm
            )));
        }
        if !misspec_epsilon.is_finite() || misspec_epsilon < 0.0 {
            return Err(Error::Config(format!(
                "misspec_epsilon must be nonnegative, got {misspec_epsilon}"
            )));
        }
        match &decision_set_spec {
            DecisionSetSpec::FixedFinite(arms) => {
                if arms.is_empty() {
                    return Err(Error::Config("fixed decision set must be non-empty".into()));
                }
                for arm in arms {
                    if arm.len() != dim {
                        return Err(Error::DimensionMismatch {
                            expected: dim,
                            got: arm.len(),
                        });
                    }
                    if arm.iter().any(|v| !v.is_finite()) {
                        return Err(Error::NonFinite("decision-set arm"));
                    }
                    if arm.norm() > bounds.action_norm + 1e-12 {
                        return Err(Error::Config(format!(
                            "arm norm {} exceeds bounds.action_norm {}",
                            arm.norm(),
                            bounds.action_norm
                        )));
                    }
                }
            }
            DecisionSetSpec::FreshSphereSample { num_arms } => {
                if *num_arms == 0 {
                    return Err(Error::Config("num_arms must be at least 1".into()));
                }
            }
            DecisionSetSpec::BasisArms => {
                if bounds.action_norm < 1.0 - 1e-12 {
                    return Err(Error::Config(
                        "basis arms have norm 1; bounds.action_norm must be at least 1".into(),
                    ));
                }
            }
        }
        let misspec_direction = unit_direction(dim, instance_seed);
        Ok(Self {
            theta_star,
            bounds,
            decision_set_spec,
            noise_spec,
            misspec_epsilon,
            misspec_direction,
        })
    }

    pub fn dim(&self) -> usize {
        self.theta_star.len()
    }

    pub fn theta_star(&self) -> &DVector<f64> {
        &self.theta_star
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn decision_set_spec(&self) -> &DecisionSetSpec {
        &self.decision_set_spec
    }

    pub fn noise_spec(&self) -> NoiseSpec {
        self.noise_spec
    }

    pub fn misspec_epsilon(&self) -> f64 {
        self.misspec_epsilon
    }

    /// Clean linear value ⟨θ*, x⟩ of an action (no misspecification, no noise).
    pub fn clean_value(&self, x: &DVector<f64>) -> f64 {
        self.theta_star.dot(x)
    }

    /// Realize round k's decision set and its clean optimum.
    ///
    /// Fixed specs return the same set every round and do not consume
    /// randomness; sphere sampling consumes the same number of draws per
    /// round regardless of the caller's decisions.
    pub fn generate_round(&self, k: usize, rng: &mut ChaCha8Rng) -> Result<RoundContext> {
        if k == 0 {
            return Err(Error::Config("round index is 1-based".into()));
        }
        let decision_set = match &self.decision_set_spec {
            DecisionSetSpec::FixedFinite(arms) => arms.clone(),
            DecisionSetSpec::BasisArms => basis_arms(self.dim()),
            DecisionSetSpec::FreshSphereSample { num_arms } => (0..*num_arms)
                .map(|_| sphere_point(self.dim(), self.bounds.action_norm, rng))
                .collect(),
        };
        let optimal_value = scan_optimum(&self.theta_star, &decision_set);
        Ok(RoundContext {
            round_index: k,
            decision_set,
            optimal_value,
        })
    }

    /// Draw the clean (pre-corruption) reward of a chosen action.
    pub fn sample_reward(&self, x: &DVector<f64>, rng: &mut ChaCha8Rng) -> RewardSample {
        let noise = match self.noise_spec {
            NoiseSpec::Gaussian => Normal::new(0.0, self.bounds.noise_scale)
                .expect("validated noise scale")
                .sample(rng),
            NoiseSpec::UniformBounded => {
                let r = self.bounds.noise_scale;
                rng.random_range(-r..=r)
            }
            NoiseSpec::Zero => 0.0,
        };
        RewardSample {
            clean_reward: self.theta_star.dot(x) + self.misspecification(x) + noise,
            noise,
        }
    }

    /// Deterministic reward perturbation, bounded by ε and not representable
    /// as a linear function of x.
    pub fn misspecification(&self, x: &DVector<f64>) -> f64 {
        if self.misspec_epsilon == 0.0 {
            return 0.0;
        }
        let phase = 1e3 * self.misspec_direction.dot(x);
        self.misspec_epsilon * phase.sin().signum()
    }

    /// Minimal sub-optimality gap Δ over the fixed decision set: the smallest
    /// nonzero gap to the optimum. `None` when every arm is optimal; an error
    /// for per-round random decision sets.
    pub fn minimal_gap(&self) -> Result<Option<f64>> {
        let arms = match &self.decision_set_spec {
            DecisionSetSpec::FixedFinite(arms) => arms.clone(),
            DecisionSetSpec::BasisArms => basis_arms(self.dim()),
            DecisionSetSpec::FreshSphereSample { .. } => {
                return Err(Error::UnsupportedDecisionSet("minimal_gap"))
            }
        };
        let optimal = scan_optimum(&self.theta_star, &arms);
        let gap = arms
            .iter()
            .map(|arm| optimal - self.theta_star.dot(arm))
            .filter(|g| *g > GAP_TOLERANCE)
            .fold(f64::INFINITY, f64::min);
        Ok(if gap.is_finite() { Some(gap) } else { None })
    }
}

/// The paired instances behind the budget-flip lower-bound experiment.
///
/// Both use basis arms and zero noise. `a0` has θ* = (1/4, 1/8, …, 1/8);
/// `a1` raises the second coordinate to 3/8 so arm 2 becomes optimal. Pair
/// with [`crate::adversary::lower_bound_flip_adversary`] built from the same
/// `budget_param` so the flip makes the two runs indistinguishable while the
/// corruption budget lasts.
#[derive(Debug, Clone)]
pub struct InstancePair {
    pub a0: BanditInstance,
    pub a1: BanditInstance,
    /// Regret-budget surrogate the flip adversary's budget derives from.
    pub budget_param: f64,
}

/// Build the two-instance lower-bound construction in dimension d ≥ 2.
///
/// The bounds are fixed: L = 1, S = ‖θ*₁‖₂ = √(d+11)/8, and a nominal
/// R = 1/4 (the instances are noiseless; R only enters hyperparameter
/// formulas of policies run against the pair).
pub fn lower_bound_instance_pair(d: usize, budget_param: f64) -> Result<InstancePair> {
    if d < 2 {
        return Err(Error::Config(format!(
            "lower-bound pair needs dimension at least 2, got {d}"
        )));
    }
    if !budget_param.is_finite() || budget_param < 0.0 {
        return Err(Error::Config(format!(
            "budget_param must be nonnegative, got {budget_param}"
        )));
    }
    let mut theta0 = DVector::from_element(d, 0.125);
    theta0[0] = 0.25;
    let mut theta1 = theta0.clone();
    theta1[1] = 0.375;
    let bounds = Bounds {
        action_norm: 1.0,
        param_norm: ((d + 11) as f64).sqrt() / 8.0,
        noise_scale: 0.25,
    };
    let mk = |theta: DVector<f64>| {
        BanditInstance::new(
            theta,
            bounds,
            DecisionSetSpec::BasisArms,
            NoiseSpec::Zero,
            0.0,
            0,
        )
    };
    Ok(InstancePair {
        a0: mk(theta0)?,
        a1: mk(theta1)?,
        budget_param,
    })
}

fn basis_arms(dim: usize) -> Vec<DVector<f64>> {
    (0..dim)
        .map(|i| {
            let mut e = DVector::zeros(dim);
            e[i] = 1.0;
            e
        })
        .collect()
}

fn scan_optimum(theta: &DVector<f64>, arms: &[DVector<f64>]) -> f64 {
    // First index wins ties.
    let mut best = f64::NEG_INFINITY;
    for arm in arms {
        let v = theta.dot(arm);
        if v > best {
            best = v;
        }
    }
    best
}

fn sphere_point(dim: usize, radius: f64, rng: &mut ChaCha8Rng) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(dim, |_, _| -> f64 {
            rand_distr::StandardNormal.sample(rng)
        });
        let norm = v.norm();
        if norm > 1e-12 {
            return v * (radius / norm);
        }
    }
}

/// Deterministic unit vector derived from a seed, e.g. for ground-truth
/// parameters of seeded experiments.
pub fn seeded_unit_vector(dim: usize, seed: u64) -> DVector<f64> {
    unit_direction(dim, seed)
}

fn unit_direction(dim: usize, seed: u64) -> DVector<f64> {
    let mut rng = rng::stream(seed, 7);
    sphere_point(dim, 1.0, &mut rng)
}
