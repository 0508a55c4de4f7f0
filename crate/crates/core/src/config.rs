//! Experiment configuration: TOML schema, validation, and resolution into
//! runnable cells.
//!
//! A config names one instance, one adversary, and a list of policies, plus
//! the horizon and seed set. An optional `[grid]` section sweeps horizons,
//! corruption budgets, and dimensions; every grid cell re-derives the
//! per-cell hyperparameters (λ, α, β) so that `"auto"` values follow the
//! recommended formulas at each corner.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::adversary::{AdversaryState, CorruptionStrategy};
use crate::environment::{
    seeded_unit_vector, BanditInstance, Bounds, DecisionSetSpec, NoiseSpec,
};
use crate::error::{Error, Result};
use crate::harness::DEFAULT_SNAPSHOT_INTERVAL;
use crate::policy::{
    default_alpha, default_lambda, Alpha, BetaMode, PolicyConfig, PolicyKind,
};

/// Top-level experiment description (the TOML document).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub instance: InstanceSection,
    #[serde(default)]
    pub adversary: AdversarySection,
    #[serde(rename = "policy")]
    pub policies: Vec<PolicySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    /// Name of the run; becomes the output subdirectory.
    pub name: String,
    /// Horizon K (also the K inside β formulas).
    pub horizon: usize,
    /// Explicit seed list; mutually exclusive with `seed0`/`num_seeds`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed0: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_seeds: Option<usize>,
    #[serde(default = "default_snapshot_interval")]
    pub snapshot_interval: usize,
    /// Output root; falls back to $CWOFUL_OUT, then ./cwoful-out.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

fn default_snapshot_interval() -> usize {
    DEFAULT_SNAPSHOT_INTERVAL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSection {
    pub dim: usize,
    /// Explicit coordinates, or "seeded-unit" for a deterministic unit
    /// vector of norm `bounds.param_norm` derived from `instance_seed`.
    pub theta_star: ThetaSpec,
    pub decision_set: DecisionSetSection,
    pub noise: NoiseKind,
    /// Misspecification level ε ≥ 0.
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub instance_seed: u64,
    pub bounds: BoundsSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThetaSpec {
    Explicit(Vec<f64>),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DecisionSetSection {
    Basis,
    FreshSphere { num_arms: usize },
    Fixed { arms: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    Gaussian,
    Uniform,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    pub action_norm: f64,
    pub param_norm: f64,
    pub noise_scale: f64,
}

impl From<BoundsSection> for Bounds {
    fn from(b: BoundsSection) -> Self {
        Bounds {
            action_norm: b.action_norm,
            param_norm: b.param_norm,
            noise_scale: b.noise_scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AdversarySection {
    /// No corruption.
    None,
    /// Budget-capped flip of one target arm's observed reward.
    Flip {
        target_index: usize,
        flip_to: f64,
        magnitude: f64,
        budget: f64,
    },
    /// Subtract `shift` whenever the chosen action is optimal for the round.
    Suppress { shift: f64, budget: f64 },
    /// Pre-action per-arm corruption table (C′ accounting experiments).
    PreActionTable {
        table: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        budget: Option<f64>,
    },
    /// Corruption delegated to the instance's misspecification term.
    Misspec,
}

impl Default for AdversarySection {
    fn default() -> Self {
        AdversarySection::None
    }
}

impl AdversarySection {
    fn base_budget(&self) -> f64 {
        match self {
            AdversarySection::None => 0.0,
            AdversarySection::Flip { budget, .. } => *budget,
            AdversarySection::Suppress { budget, .. } => *budget,
            AdversarySection::PreActionTable { budget, .. } => budget.unwrap_or(f64::INFINITY),
            AdversarySection::Misspec => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    /// Defaults to the kind string; must be unique within the config.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub kind: PolicyKindSpec,
    pub beta: BetaSpec,
    #[serde(default = "AlphaSpec::auto")]
    pub alpha: AlphaSpec,
    #[serde(default = "LambdaSpec::auto")]
    pub lambda: LambdaSpec,
    pub delta: f64,
}

impl PolicySection {
    pub fn display_name(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| self.kind.to_kind().as_str().to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKindSpec {
    CwOful,
    Oful,
    EnlargedBetaOful,
    Greedy,
}

impl PolicyKindSpec {
    pub fn to_kind(self) -> PolicyKind {
        match self {
            PolicyKindSpec::CwOful => PolicyKind::CwOful,
            PolicyKindSpec::Oful => PolicyKind::Oful,
            PolicyKindSpec::EnlargedBetaOful => PolicyKind::EnlargedBetaOful,
            PolicyKindSpec::Greedy => PolicyKind::Greedy,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "cw-oful" => Ok(PolicyKindSpec::CwOful),
            "oful" => Ok(PolicyKindSpec::Oful),
            "enlarged-beta-oful" => Ok(PolicyKindSpec::EnlargedBetaOful),
            "greedy" => Ok(PolicyKindSpec::Greedy),
            other => Err(Error::Config(format!(
                "unknown policy kind '{other}' (expected cw-oful, oful, enlarged-beta-oful or greedy)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BetaSpec {
    /// β from the known-C formula. `c` may be the literal level or
    /// "adversary-budget" to track the (grid-resolved) attack budget.
    KnownC { c: LevelSpec },
    /// β from the agnostic formula with estimate C̄; "sqrt-horizon" puts
    /// C̄ = √K.
    UnknownC { c_bar: LevelSpec },
    /// Use this β verbatim.
    Fixed { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LevelSpec {
    Value(f64),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaSpec {
    Value(f64),
    Named(String),
}

impl AlphaSpec {
    fn auto() -> Self {
        AlphaSpec::Named("auto".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaSpec {
    Value(f64),
    Named(String),
}

impl LambdaSpec {
    fn auto() -> Self {
        LambdaSpec::Named("auto".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizons: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corruption_levels: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<usize>>,
}

/// One runnable grid corner: instance, adversary template, resolved policies.
#[derive(Debug, Clone)]
pub struct ResolvedCell {
    pub label: String,
    pub dim: usize,
    pub horizon: usize,
    pub corruption_budget: f64,
    pub instance: BanditInstance,
    pub adversary: AdversaryState,
    pub policies: Vec<ResolvedPolicy>,
}

#[derive(Debug, Clone)]
pub struct ResolvedPolicy {
    pub name: String,
    pub config: PolicyConfig,
}

impl ExperimentConfig {
    /// Parse a TOML document; parse failures carry line/column positions.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Structural validation; grid corners are checked again at resolution.
    pub fn validate(&self) -> Result<()> {
        let exp = &self.experiment;
        if exp.name.is_empty()
            || !exp
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
        {
            return Err(Error::Config(format!(
                "experiment.name must be non-empty and use only [A-Za-z0-9_-], got '{}'",
                exp.name
            )));
        }
        if exp.horizon == 0 {
            return Err(Error::Config("experiment.horizon must be at least 1".into()));
        }
        if exp.snapshot_interval == 0 {
            return Err(Error::Config(
                "experiment.snapshot_interval must be at least 1".into(),
            ));
        }
        match (&exp.seeds, exp.seed0, exp.num_seeds) {
            (Some(list), None, None) => {
                if list.is_empty() {
                    return Err(Error::Config("experiment.seeds must be non-empty".into()));
                }
            }
            (None, Some(_), Some(n)) => {
                if n == 0 {
                    return Err(Error::Config(
                        "experiment.num_seeds must be at least 1".into(),
                    ));
                }
            }
            _ => {
                return Err(Error::Config(
                    "specify either experiment.seeds or both experiment.seed0 and experiment.num_seeds"
                        .into(),
                ))
            }
        }

        if self.instance.dim == 0 {
            return Err(Error::Config("instance.dim must be at least 1".into()));
        }
        if let ThetaSpec::Named(name) = &self.instance.theta_star {
            if name != "seeded-unit" {
                return Err(Error::Config(format!(
                    "instance.theta_star must be a coordinate list or \"seeded-unit\", got '{name}'"
                )));
            }
        }

        if self.policies.is_empty() {
            return Err(Error::Config("at least one [[policy]] is required".into()));
        }
        let mut names: Vec<String> = self.policies.iter().map(|p| p.display_name()).collect();
        names.sort();
        for pair in names.windows(2) {
            if pair[0] == pair[1] {
                return Err(Error::Config(format!(
                    "duplicate policy name '{}'",
                    pair[0]
                )));
            }
        }
        for policy in &self.policies {
            let name = policy.display_name();
            if name.is_empty()
                || !name
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
            {
                return Err(Error::Config(format!(
                    "policy.name must use only [A-Za-z0-9_-], got '{name}'"
                )));
            }
            if !(policy.delta > 0.0 && policy.delta < 1.0) {
                return Err(Error::Config(format!(
                    "policy.delta must lie in (0, 1), got {}",
                    policy.delta
                )));
            }
            match &policy.alpha {
                AlphaSpec::Named(n) if n == "auto" || n == "uncapped" => {}
                AlphaSpec::Named(n) => {
                    return Err(Error::Config(format!(
                        "policy.alpha must be a number, \"auto\" or \"uncapped\", got '{n}'"
                    )))
                }
                AlphaSpec::Value(v) if *v > 0.0 && v.is_finite() => {}
                AlphaSpec::Value(v) => {
                    return Err(Error::Config(format!(
                        "policy.alpha must be positive, got {v}"
                    )))
                }
            }
            match &policy.lambda {
                LambdaSpec::Named(n) if n == "auto" => {}
                LambdaSpec::Named(n) => {
                    return Err(Error::Config(format!(
                        "policy.lambda must be a number or \"auto\", got '{n}'"
                    )))
                }
                LambdaSpec::Value(v) if *v > 0.0 && v.is_finite() => {}
                LambdaSpec::Value(v) => {
                    return Err(Error::Config(format!(
                        "policy.lambda must be positive, got {v}"
                    )))
                }
            }
            match &policy.beta {
                BetaSpec::KnownC { c: LevelSpec::Named(n) } if n != "adversary-budget" => {
                    return Err(Error::Config(format!(
                        "policy.beta.c must be a number or \"adversary-budget\", got '{n}'"
                    )))
                }
                BetaSpec::UnknownC { c_bar: LevelSpec::Named(n) } if n != "sqrt-horizon" => {
                    return Err(Error::Config(format!(
                        "policy.beta.c_bar must be a number or \"sqrt-horizon\", got '{n}'"
                    )))
                }
                _ => {}
            }
        }

        if let Some(grid) = &self.grid {
            if grid.dims.as_deref().is_some_and(|d| d.len() > 1) {
                if matches!(self.instance.theta_star, ThetaSpec::Explicit(_)) {
                    return Err(Error::Config(
                        "grid.dims needs instance.theta_star = \"seeded-unit\"".into(),
                    ));
                }
                if matches!(self.instance.decision_set, DecisionSetSection::Fixed { .. }) {
                    return Err(Error::Config(
                        "grid.dims cannot be combined with a fixed decision set".into(),
                    ));
                }
            }
            if grid
                .corruption_levels
                .as_deref()
                .is_some_and(|cs| cs.iter().any(|c| *c > 0.0))
                && matches!(
                    self.adversary,
                    AdversarySection::None | AdversarySection::Misspec | AdversarySection::PreActionTable { .. }
                )
            {
                return Err(Error::Config(
                    "grid.corruption_levels needs a budget-capped adversary (flip or suppress)"
                        .into(),
                ));
            }
            for k in grid.horizons.iter().flatten() {
                if *k == 0 {
                    return Err(Error::Config("grid.horizons entries must be at least 1".into()));
                }
            }
            for d in grid.dims.iter().flatten() {
                if *d == 0 {
                    return Err(Error::Config("grid.dims entries must be at least 1".into()));
                }
            }
        }
        Ok(())
    }

    /// The seed list, after applying an optional override.
    pub fn seeds(&self, override_seeds: Option<&[u64]>) -> Result<Vec<u64>> {
        if let Some(seeds) = override_seeds {
            if seeds.is_empty() {
                return Err(Error::Config("seed override must be non-empty".into()));
            }
            return Ok(seeds.to_vec());
        }
        let exp = &self.experiment;
        if let Some(list) = &exp.seeds {
            return Ok(list.clone());
        }
        let (seed0, n) = (exp.seed0.unwrap_or(0), exp.num_seeds.unwrap_or(0));
        Ok((0..n as u64).map(|i| seed0 + i).collect())
    }

    /// Expand the grid into runnable cells with per-cell hyperparameters.
    pub fn resolve(&self) -> Result<Vec<ResolvedCell>> {
        self.validate()?;
        let dims = self
            .grid
            .as_ref()
            .and_then(|g| g.dims.clone())
            .unwrap_or_else(|| vec![self.instance.dim]);
        let horizons = self
            .grid
            .as_ref()
            .and_then(|g| g.horizons.clone())
            .unwrap_or_else(|| vec![self.experiment.horizon]);
        let budgets = self
            .grid
            .as_ref()
            .and_then(|g| g.corruption_levels.clone())
            .unwrap_or_else(|| vec![self.adversary.base_budget()]);

        let mut cells = Vec::new();
        for &dim in &dims {
            let instance = self.build_instance(dim)?;
            for &horizon in &horizons {
                for &budget in &budgets {
                    cells.push(self.build_cell(&instance, dim, horizon, budget)?);
                }
            }
        }
        Ok(cells)
    }

    fn build_instance(&self, dim: usize) -> Result<BanditInstance> {
        let section = &self.instance;
        let theta = match &section.theta_star {
            ThetaSpec::Explicit(values) => {
                if values.len() != dim {
                    return Err(Error::Config(format!(
                        "instance.theta_star has {} coordinates but instance.dim is {dim}",
                        values.len()
                    )));
                }
                DVector::from_column_slice(values)
            }
            ThetaSpec::Named(_) => {
                seeded_unit_vector(dim, section.instance_seed) * section.bounds.param_norm
            }
        };
        let decision_set = match &section.decision_set {
            DecisionSetSection::Basis => DecisionSetSpec::BasisArms,
            DecisionSetSection::FreshSphere { num_arms } => DecisionSetSpec::FreshSphereSample {
                num_arms: *num_arms,
            },
            DecisionSetSection::Fixed { arms } => DecisionSetSpec::FixedFinite(
                arms.iter().map(|a| DVector::from_column_slice(a)).collect(),
            ),
        };
        let noise = match section.noise {
            NoiseKind::Gaussian => NoiseSpec::Gaussian,
            NoiseKind::Uniform => NoiseSpec::UniformBounded,
            NoiseKind::Zero => NoiseSpec::Zero,
        };
        BanditInstance::new(
            theta,
            section.bounds.into(),
            decision_set,
            noise,
            section.epsilon,
            section.instance_seed,
        )
    }

    fn build_adversary(&self, instance: &BanditInstance, budget: f64) -> Result<AdversaryState> {
        match &self.adversary {
            AdversarySection::None => Ok(AdversaryState::none()),
            AdversarySection::Flip {
                target_index,
                flip_to,
                magnitude,
                ..
            } => AdversaryState::new(
                CorruptionStrategy::BudgetedTargetFlip {
                    target_index: *target_index,
                    flip_to: *flip_to,
                    per_round_magnitude: *magnitude,
                },
                budget,
            ),
            AdversarySection::Suppress { shift, .. } => AdversaryState::new(
                CorruptionStrategy::OptimalActionSuppression {
                    shift: *shift,
                    theta_star: instance.theta_star().clone(),
                },
                budget,
            ),
            AdversarySection::PreActionTable { table, .. } => AdversaryState::new(
                CorruptionStrategy::PreActionWorstCase {
                    per_arm: table.clone(),
                },
                budget,
            ),
            AdversarySection::Misspec => {
                if instance.misspec_epsilon() <= 0.0 {
                    return Err(Error::Config(
                        "adversary.strategy = \"misspec\" requires instance.epsilon > 0".into(),
                    ));
                }
                AdversaryState::new(CorruptionStrategy::Misspecification, budget)
            }
        }
    }

    fn build_cell(
        &self,
        instance: &BanditInstance,
        dim: usize,
        horizon: usize,
        budget: f64,
    ) -> Result<ResolvedCell> {
        let adversary = self.build_adversary(instance, budget)?;
        let bounds = instance.bounds();
        let mut policies = Vec::new();
        for section in &self.policies {
            let lambda = match &section.lambda {
                LambdaSpec::Value(v) => *v,
                LambdaSpec::Named(_) => default_lambda(bounds),
            };
            let beta_mode = match &section.beta {
                BetaSpec::KnownC { c } => BetaMode::KnownC(match c {
                    LevelSpec::Value(v) => *v,
                    LevelSpec::Named(_) => {
                        if !budget.is_finite() {
                            return Err(Error::Config(
                                "beta.c = \"adversary-budget\" needs a finite adversary budget"
                                    .into(),
                            ));
                        }
                        budget
                    }
                }),
                BetaSpec::UnknownC { c_bar } => BetaMode::UnknownC(match c_bar {
                    LevelSpec::Value(v) => *v,
                    LevelSpec::Named(_) => (horizon as f64).sqrt(),
                }),
                BetaSpec::Fixed { value } => BetaMode::Fixed(*value),
            };
            let alpha = match &section.alpha {
                AlphaSpec::Value(v) => Alpha::Value(*v),
                AlphaSpec::Named(name) if name == "uncapped" => Alpha::Uncapped,
                AlphaSpec::Named(_) => match beta_mode {
                    BetaMode::KnownC(c) => default_alpha(bounds, dim, lambda, c),
                    BetaMode::UnknownC(c_bar) => default_alpha(bounds, dim, lambda, c_bar),
                    BetaMode::Fixed(_) => {
                        return Err(Error::Config(format!(
                            "policy '{}': alpha = \"auto\" needs a known-c or unknown-c beta mode",
                            section.display_name()
                        )))
                    }
                },
            };
            let config = PolicyConfig {
                kind: section.kind.to_kind(),
                lambda,
                alpha,
                beta_mode,
                delta: section.delta,
                horizon,
                bounds,
            }
            .normalized()?;
            policies.push(ResolvedPolicy {
                name: section.display_name(),
                config,
            });
        }
        Ok(ResolvedCell {
            label: format!("d{dim}_K{horizon}_C{}", format_level(budget)),
            dim,
            horizon,
            corruption_budget: budget,
            instance: instance.clone(),
            adversary,
            policies,
        })
    }
}

fn format_level(c: f64) -> String {
    if c.is_infinite() {
        "inf".to_string()
    } else {
        format!("{c}")
    }
}
