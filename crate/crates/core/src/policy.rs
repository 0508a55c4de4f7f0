//! Decision-making policies: CW-OFUL and its baselines.
//!
//! All policies share the optimism template of OFUL
//! (Abbasi-Yadkori et al., 2011): maintain a ridge estimate θ̂ and pick
//!
//! ```text
//! x_k = argmax_{x ∈ 𝒟_k} θ̂ᵀx + β·‖x‖_{Σ⁻¹}
//! ```
//!
//! CW-OFUL feeds each chosen action into a *weighted* ridge regression with
//! weight w_k = min{1, α/‖x_k‖_{Σ_k⁻¹}}, the truncated inverse of the
//! exploration bonus, so that observations made under low confidence — the
//! ones an adversary can poison most cheaply — carry little weight. With
//! α uncapped every weight is 1 and CW-OFUL degenerates to plain OFUL.
//!
//! The confidence radius β is computed once per run from
//! (K, d, δ, L, S, R) and held constant:
//!
//! - known corruption level C:   β = R√(d·log((1+KL²/λ)/δ)) + αC + √λ·S
//! - assumed corruption level C̄: β = 2R√(d·log((1+KL²/λ)/δ)) + 2√λ·S
//! - enlarged-β OFUL baseline:   β = R√(d·log((1+KL²/λ)/δ)) + √λ·S + C·L/√λ
//!
//! The recommended hyperparameters are λ = R²/S² and α = (R√d + √λ·S)/C
//! (α uncapped when C = 0).

use nalgebra::DVector;

use crate::environment::Bounds;
use crate::error::{Error, Result};
use crate::linalg::WeightedDesignState;

/// Which algorithm drives action selection and weighting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    /// Confidence-weighted OFUL.
    CwOful,
    /// Plain OFUL: all weights 1, β from the C = 0 formula.
    Oful,
    /// OFUL with β inflated by the crude corruption allowance C·L/√λ.
    EnlargedBetaOful,
    /// Pure exploitation: β = 0 during selection.
    Greedy,
}

impl PolicyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyKind::CwOful => "cw-oful",
            PolicyKind::Oful => "oful",
            PolicyKind::EnlargedBetaOful => "enlarged-beta-oful",
            PolicyKind::Greedy => "greedy",
        }
    }
}

/// Threshold parameter α of the weight rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Alpha {
    Value(f64),
    /// w_k = 1 for every action (the C → 0 limit).
    Uncapped,
}

impl Alpha {
    pub fn is_uncapped(&self) -> bool {
        matches!(self, Alpha::Uncapped)
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Alpha::Value(a) => Some(*a),
            Alpha::Uncapped => None,
        }
    }
}

/// How the confidence radius β is derived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaMode {
    /// The true corruption level C is known to the agent.
    KnownC(f64),
    /// Only an a-priori estimate C̄ is available.
    UnknownC(f64),
    /// Use this β verbatim.
    Fixed(f64),
}

/// Fully resolved policy hyperparameters for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    pub lambda: f64,
    pub alpha: Alpha,
    pub beta_mode: BetaMode,
    pub delta: f64,
    /// Horizon K entering the β formula.
    pub horizon: usize,
    pub bounds: Bounds,
}

impl PolicyConfig {
    /// Validate ranges and apply the C = 0 ⇒ α uncapped normalization.
    pub fn normalized(mut self) -> Result<Self> {
        if !self.delta.is_finite() || self.delta <= 0.0 || self.delta >= 1.0 {
            return Err(Error::Config(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if !self.lambda.is_finite() || self.lambda <= 0.0 {
            return Err(Error::Config(format!(
                "lambda must be a positive finite real, got {}",
                self.lambda
            )));
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        self.bounds.validate()?;
        if let Alpha::Value(a) = self.alpha {
            if !a.is_finite() || a <= 0.0 {
                return Err(Error::Config(format!(
                    "alpha must be positive or uncapped, got {a}"
                )));
            }
        }
        match self.beta_mode {
            BetaMode::KnownC(c) => {
                if !c.is_finite() || c < 0.0 {
                    return Err(Error::Config(format!(
                        "known corruption level must be nonnegative, got {c}"
                    )));
                }
                if c == 0.0 {
                    // The C → 0 limit of α = (R√d + √λS)/C.
                    self.alpha = Alpha::Uncapped;
                } else if self.kind == PolicyKind::CwOful && self.alpha.is_uncapped() {
                    return Err(Error::Config(
                        "alpha must be finite when the known corruption level is positive".into(),
                    ));
                }
            }
            BetaMode::UnknownC(c_bar) => {
                if !c_bar.is_finite() || c_bar <= 0.0 {
                    return Err(Error::Config(format!(
                        "estimated corruption level must be positive, got {c_bar}"
                    )));
                }
            }
            BetaMode::Fixed(beta) => {
                if !beta.is_finite() || beta <= 0.0 {
                    return Err(Error::Config(format!(
                        "fixed beta must be positive, got {beta}"
                    )));
                }
            }
        }
        Ok(self)
    }

    /// The α actually used by the weight rule: only CW-OFUL caps weights.
    pub fn effective_alpha(&self) -> Alpha {
        match self.kind {
            PolicyKind::CwOful => self.alpha,
            _ => Alpha::Uncapped,
        }
    }

    /// Confidence radius β for context dimension `d`.
    pub fn confidence_radius(&self, d: usize) -> Result<f64> {
        let Bounds {
            action_norm: l,
            param_norm: s,
            noise_scale: r,
        } = self.bounds;
        let lambda = self.lambda;
        let log_arg = (1.0 + self.horizon as f64 * l * l / lambda) / self.delta;
        debug_assert!(log_arg > 0.0);
        if log_arg <= 0.0 {
            return Err(Error::Numerical("confidence radius log argument"));
        }
        let base = r * (d as f64 * log_arg.ln()).sqrt();
        let beta = match (self.kind, self.beta_mode) {
            (_, BetaMode::Fixed(beta)) => beta,
            (PolicyKind::EnlargedBetaOful, BetaMode::KnownC(c)) => {
                base + lambda.sqrt() * s + c * l / lambda.sqrt()
            }
            (PolicyKind::EnlargedBetaOful, _) => {
                return Err(Error::Config(
                    "enlarged-beta-oful requires a known corruption level or a fixed beta".into(),
                ))
            }
            (_, BetaMode::KnownC(c)) => {
                let corruption_term = match self.alpha {
                    _ if c == 0.0 => 0.0,
                    Alpha::Value(a) => a * c,
                    Alpha::Uncapped => {
                        return Err(Error::Config(
                            "alpha must be finite when the known corruption level is positive"
                                .into(),
                        ))
                    }
                };
                base + corruption_term + lambda.sqrt() * s
            }
            (_, BetaMode::UnknownC(_)) => 2.0 * base + 2.0 * lambda.sqrt() * s,
        };
        if !beta.is_finite() {
            return Err(Error::Numerical("confidence radius"));
        }
        Ok(beta)
    }
}

/// Recommended regularization λ = R²/S².
pub fn default_lambda(bounds: Bounds) -> f64 {
    let r = bounds.noise_scale;
    let s = bounds.param_norm;
    r * r / (s * s)
}

/// Recommended threshold α = (R√d + √λ·S)/C; uncapped when C = 0.
pub fn default_alpha(bounds: Bounds, d: usize, lambda: f64, c: f64) -> Alpha {
    if c == 0.0 {
        Alpha::Uncapped
    } else {
        Alpha::Value((bounds.noise_scale * (d as f64).sqrt() + lambda.sqrt() * bounds.param_norm) / c)
    }
}

/// An ε-misspecified reward model is a corrupted model at level C = K·ε.
pub fn misspec_corruption_level(epsilon: f64, horizon: usize) -> f64 {
    horizon as f64 * epsilon
}

/// The crude-allowance baseline: plain OFUL whose β is inflated by C·L/√λ,
/// the bound obtained without confidence weighting.
pub fn enlarged_beta_baseline(config: &PolicyConfig, d: usize) -> Result<PolicyConfig> {
    let BetaMode::KnownC(_) = config.beta_mode else {
        return Err(Error::Config(
            "the enlarged-beta baseline requires a known corruption level".into(),
        ));
    };
    let template = PolicyConfig {
        kind: PolicyKind::EnlargedBetaOful,
        alpha: Alpha::Uncapped,
        ..config.clone()
    }
    .normalized()?;
    let beta = template.confidence_radius(d)?;
    PolicyConfig {
        kind: PolicyKind::Oful,
        alpha: Alpha::Uncapped,
        beta_mode: BetaMode::Fixed(beta),
        ..config.clone()
    }
    .normalized()
}

/// The chosen arm with its score and exploration bonus.
#[derive(Debug, Clone, Copy)]
pub struct ActionChoice {
    pub index: usize,
    pub ucb_value: f64,
    pub bonus: f64,
}

/// Per-run mutable policy state.
#[derive(Debug, Clone)]
pub struct PolicyState {
    kind: PolicyKind,
    alpha: Alpha,
    beta: f64,
    design: WeightedDesignState,
    weight_history: Vec<f64>,
}

impl PolicyState {
    pub fn new(config: &PolicyConfig, dim: usize) -> Result<Self> {
        let config = config.clone().normalized()?;
        let beta = config.confidence_radius(dim)?;
        Ok(Self {
            kind: config.kind,
            alpha: config.effective_alpha(),
            beta,
            design: WeightedDesignState::new(dim, config.lambda)?,
            weight_history: Vec::new(),
        })
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn alpha(&self) -> Alpha {
        self.alpha
    }

    /// Constant confidence radius for this run.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn design(&self) -> &WeightedDesignState {
        &self.design
    }

    pub fn weight_history(&self) -> &[f64] {
        &self.weight_history
    }

    /// Optimistic argmax over the decision set; ties go to the lowest index.
    /// Greedy drops the bonus from the score but still reports it.
    pub fn select_action(&self, decision_set: &[DVector<f64>]) -> Result<ActionChoice> {
        if decision_set.is_empty() {
            return Err(Error::EmptyDecisionSet);
        }
        let beta = if self.kind == PolicyKind::Greedy {
            0.0
        } else {
            self.beta
        };
        let mut best: Option<ActionChoice> = None;
        for (index, x) in decision_set.iter().enumerate() {
            let bonus = self.design.mahalanobis_bonus(x)?;
            let ucb_value = self.design.theta_hat().dot(x) + beta * bonus;
            if best.map_or(true, |b| ucb_value > b.ucb_value) {
                best = Some(ActionChoice {
                    index,
                    ucb_value,
                    bonus,
                });
            }
        }
        Ok(best.expect("non-empty decision set"))
    }

    /// w = min{1, α/‖x‖_{Σ⁻¹}} against the pre-update matrix; a zero bonus
    /// (zero action) takes the uncapped limit w = 1.
    pub fn compute_weight(&self, chosen: &DVector<f64>) -> Result<f64> {
        let bonus = self.design.mahalanobis_bonus(chosen)?;
        Ok(match self.alpha {
            Alpha::Uncapped => 1.0,
            Alpha::Value(_) if bonus == 0.0 => 1.0,
            Alpha::Value(a) => (a / bonus).min(1.0),
        })
    }

    /// Fold the weighted observation into the ridge state.
    pub fn observe(&mut self, chosen: &DVector<f64>, observed_reward: f64, w: f64) -> Result<()> {
        self.design.rank_one_update(chosen, observed_reward, w)?;
        self.weight_history.push(w);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_bounds() -> Bounds {
        Bounds {
            action_norm: 1.0,
            param_norm: 1.0,
            noise_scale: 1.0,
        }
    }

    fn config(kind: PolicyKind, alpha: Alpha, beta_mode: BetaMode) -> PolicyConfig {
        PolicyConfig {
            kind,
            lambda: 1.0,
            alpha,
            beta_mode,
            delta: 0.01,
            horizon: 1000,
            bounds: unit_bounds(),
        }
    }

    fn e(i: usize, d: usize) -> DVector<f64> {
        let mut v = DVector::zeros(d);
        v[i] = 1.0;
        v
    }

    #[test]
    fn known_c_radius_matches_closed_form() {
        // R=1, S=1, λ=1, L=1, d=4, K=1000, δ=0.01, C=10, α=(√4+1)/10 = 0.3:
        // β = √(4·log(1001/0.01)) + 3 + 1, evaluated independently at high
        // precision.
        let cfg = config(
            PolicyKind::CwOful,
            Alpha::Value(0.3),
            BetaMode::KnownC(10.0),
        )
        .normalized()
        .unwrap();
        let beta = cfg.confidence_radius(4).unwrap();
        assert!((beta - 10.786434989095029).abs() <= 1e-12, "beta={beta}");
    }

    #[test]
    fn known_c_zero_drops_the_corruption_term() {
        let cfg = config(PolicyKind::CwOful, Alpha::Value(0.3), BetaMode::KnownC(0.0))
            .normalized()
            .unwrap();
        // C = 0 forces uncapped α.
        assert!(cfg.alpha.is_uncapped());
        let beta = cfg.confidence_radius(4).unwrap();
        assert!((beta - (10.786434989095029 - 3.0)).abs() <= 1e-12);

        let oful = config(PolicyKind::Oful, Alpha::Uncapped, BetaMode::KnownC(0.0))
            .normalized()
            .unwrap();
        assert_eq!(oful.confidence_radius(4).unwrap(), beta);
    }

    #[test]
    fn unknown_c_radius_matches_closed_form() {
        // R=1, S=1, λ=1, L=1, d=4, K=1000, δ=0.01:
        // β = 2√(4·log((1+K)/δ)) + 2, independently evaluated.
        let cfg = config(
            PolicyKind::CwOful,
            Alpha::Value(0.1),
            BetaMode::UnknownC(31.0),
        )
        .normalized()
        .unwrap();
        let beta = cfg.confidence_radius(4).unwrap();
        assert!((beta - 15.572869978190058).abs() <= 1e-12, "beta={beta}");
    }

    #[test]
    fn validation_names_the_offending_field() {
        let bad = config(PolicyKind::CwOful, Alpha::Uncapped, BetaMode::KnownC(0.0));
        let err = PolicyConfig { delta: 1.5, ..bad }.normalized().unwrap_err();
        assert!(err.to_string().contains("delta"), "{err}");

        let err = config(PolicyKind::CwOful, Alpha::Uncapped, BetaMode::KnownC(3.0))
            .normalized()
            .unwrap_err();
        assert!(err.to_string().contains("alpha"), "{err}");
    }

    #[test]
    fn default_hyperparameters_follow_the_recommended_choice() {
        let bounds = Bounds {
            action_norm: 1.0,
            param_norm: 2.0,
            noise_scale: 0.5,
        };
        let lambda = default_lambda(bounds);
        assert!((lambda - 0.0625).abs() < 1e-15);
        match default_alpha(bounds, 4, lambda, 10.0) {
            Alpha::Value(a) => {
                assert!((a - (0.5 * 2.0 + 0.25 * 2.0) / 10.0).abs() < 1e-15)
            }
            Alpha::Uncapped => panic!("expected finite alpha"),
        }
        assert!(default_alpha(bounds, 4, lambda, 0.0).is_uncapped());
        assert_eq!(misspec_corruption_level(0.1, 1000), 100.0);
    }

    #[test]
    fn greedy_on_exact_estimate_picks_the_best_arm() {
        let cfg = config(PolicyKind::Greedy, Alpha::Uncapped, BetaMode::KnownC(0.0));
        let mut st = PolicyState::new(&cfg, 2).unwrap();
        // Teach it θ̂ along e₁.
        st.observe(&e(0, 2), 1.0, 1.0).unwrap();
        let arms = [e(0, 2), e(1, 2)];
        let choice = st.select_action(&arms).unwrap();
        assert_eq!(choice.index, 0);
        assert!((choice.ucb_value - 0.5).abs() < 1e-15);
    }

    #[test]
    fn exact_tie_goes_to_the_first_index() {
        let cfg = config(PolicyKind::CwOful, Alpha::Uncapped, BetaMode::Fixed(1.0));
        let st = PolicyState::new(&cfg, 2).unwrap();
        let arms = [e(0, 2), e(1, 2)];
        let choice = st.select_action(&arms).unwrap();
        assert_eq!(choice.index, 0);
        assert!((choice.ucb_value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bonus_can_beat_a_better_mean() {
        // θ̂ = (0.2, 0), Σ = diag(10, 1), β = 1:
        //   UCB(e₁) = 0.2 + √(1/10) ≈ 0.516,  UCB(e₂) = 0 + 1 = 1.
        let cfg = config(PolicyKind::CwOful, Alpha::Uncapped, BetaMode::Fixed(1.0));
        let mut st = PolicyState::new(&cfg, 2).unwrap();
        for _ in 0..9 {
            st.observe(&e(0, 2), 2.0 / 9.0, 1.0).unwrap();
        }
        assert!((st.design().theta_hat()[0] - 0.2).abs() < 1e-12);
        let arms = [e(0, 2), e(1, 2)];
        let choice = st.select_action(&arms).unwrap();
        assert_eq!(choice.index, 1);
        assert!((choice.ucb_value - 1.0).abs() < 1e-12);
        let ucb0 = st.design().theta_hat()[0] + st.design().mahalanobis_bonus(&e(0, 2)).unwrap();
        assert!((ucb0 - 0.5162277660168379).abs() < 1e-12);
    }

    #[test]
    fn empty_decision_set_is_rejected() {
        let cfg = config(PolicyKind::CwOful, Alpha::Uncapped, BetaMode::Fixed(1.0));
        let st = PolicyState::new(&cfg, 2).unwrap();
        assert!(matches!(
            st.select_action(&[]),
            Err(Error::EmptyDecisionSet)
        ));
    }

    #[test]
    fn weight_rule_examples() {
        // Uncapped ⇒ w = 1 (the OFUL degeneration).
        let cfg = config(PolicyKind::CwOful, Alpha::Uncapped, BetaMode::KnownC(0.0));
        let st = PolicyState::new(&cfg, 2).unwrap();
        assert_eq!(st.compute_weight(&e(0, 2)).unwrap(), 1.0);

        // α = 0.1, bonus = 0.5 ⇒ w = 0.2. Build Σ = diag(4, 1) so that the
        // bonus of e₁ is 1/2.
        let cfg = config(
            PolicyKind::CwOful,
            Alpha::Value(0.1),
            BetaMode::Fixed(1.0),
        );
        let mut st = PolicyState::new(&cfg, 2).unwrap();
        for _ in 0..3 {
            st.observe(&e(0, 2), 0.0, 1.0).unwrap();
        }
        let bonus = st.design().mahalanobis_bonus(&e(0, 2)).unwrap();
        assert!((bonus - 0.5).abs() < 1e-12);
        assert!((st.compute_weight(&e(0, 2)).unwrap() - 0.2).abs() < 1e-12);

        // Zero action ⇒ bonus 0 ⇒ w = 1.
        assert_eq!(st.compute_weight(&DVector::zeros(2)).unwrap(), 1.0);
    }

    #[test]
    fn observing_a_zero_action_leaves_the_estimate_unchanged() {
        let cfg = config(PolicyKind::CwOful, Alpha::Uncapped, BetaMode::Fixed(1.0));
        let mut st = PolicyState::new(&cfg, 2).unwrap();
        st.observe(&e(0, 2), 1.0, 1.0).unwrap();
        let before = st.design().theta_hat().clone();
        st.observe(&DVector::zeros(2), 5.0, 1.0).unwrap();
        assert_eq!(st.design().theta_hat(), &before);
        assert_eq!(st.weight_history(), &[1.0, 1.0]);
    }

    #[test]
    fn observe_matches_the_normal_equations() {
        let cfg = config(
            PolicyKind::CwOful,
            Alpha::Value(0.4),
            BetaMode::Fixed(2.0),
        );
        let mut st = PolicyState::new(&cfg, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut updates = Vec::new();
        for _ in 0..30 {
            let x = DVector::from_fn(3, |_, _| rng.random_range(-0.5..0.5));
            let r = rng.random_range(-1.0..1.0);
            let w = st.compute_weight(&x).unwrap();
            st.observe(&x, r, w).unwrap();
            updates.push((x, r, w));
        }
        let mut a = DMatrix::identity(3, 3);
        let mut b = DVector::zeros(3);
        for (x, r, w) in &updates {
            a += *w * x * x.transpose();
            b += *w * *r * x;
        }
        let oracle = a.lu().solve(&b).unwrap();
        assert!((st.design().theta_hat() - oracle).amax() <= 1e-10);
    }

    #[test]
    fn enlarged_beta_adds_the_crude_allowance() {
        let base = config(PolicyKind::Oful, Alpha::Uncapped, BetaMode::KnownC(0.0))
            .normalized()
            .unwrap();
        let plain_beta = base.confidence_radius(4).unwrap();

        let zero = enlarged_beta_baseline(&base, 4).unwrap();
        assert_eq!(zero.kind, PolicyKind::Oful);
        match zero.beta_mode {
            BetaMode::Fixed(beta) => assert!((beta - plain_beta).abs() < 1e-12),
            _ => panic!("expected fixed beta"),
        }

        let with_c = config(PolicyKind::Oful, Alpha::Uncapped, BetaMode::KnownC(10.0));
        let inflated = enlarged_beta_baseline(&with_c, 4).unwrap();
        match inflated.beta_mode {
            // C·L/√λ = 10 with L = λ = 1.
            BetaMode::Fixed(beta) => assert!((beta - (plain_beta + 10.0)).abs() < 1e-12),
            _ => panic!("expected fixed beta"),
        }
        assert!(inflated.effective_alpha().is_uncapped());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn weights_stay_in_unit_interval_and_saturate_below_alpha(
            seed in any::<u64>(),
            alpha in 0.01f64..3.0,
            count in 1usize..80,
        ) {
            let lambda = 0.8;
            let cfg = PolicyConfig {
                kind: PolicyKind::CwOful,
                lambda,
                alpha: Alpha::Value(alpha),
                beta_mode: BetaMode::Fixed(1.0),
                delta: 0.05,
                horizon: 100,
                bounds: unit_bounds(),
            };
            let mut st = PolicyState::new(&cfg, 3).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..count {
                let mut x = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
                if x.norm() > 1.0 {
                    x /= x.norm();
                }
                let bonus = st.design().mahalanobis_bonus(&x).unwrap();
                let w = st.compute_weight(&x).unwrap();
                prop_assert!(w > 0.0 && w <= 1.0);
                prop_assert!(w * bonus <= alpha + 1e-12);
                if alpha >= 1.0 / lambda.sqrt() {
                    // α ≥ L/√λ dominates every legal bonus.
                    prop_assert_eq!(w, 1.0);
                }
                st.observe(&x, rng.random_range(-1.0..1.0), w).unwrap();
            }
        }
    }
}
