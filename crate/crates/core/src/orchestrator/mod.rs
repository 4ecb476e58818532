//! Epoch loop, ablation modes, evaluation and reporting.
//!
//! A run alternates three stages per epoch: relation extraction into the
//! causal graph, interventional verification of hypothesized edges, and a
//! block of PPO rollout/update cycles with goal conditioning and shaped
//! rewards. Which stages run is decided by [`Mode`].

mod evaluate;
mod report;
mod run;
mod score;

use std::hash::{Hash, Hasher};
use std::path::PathBuf;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{AgentError, TrainerConfig};
use crate::extraction::{ExtractorConfig, RemoteConfig};
use crate::goals::{ShapingConfig, DEFAULT_GOAL_HORIZON};
use crate::gridworld::{EnvConfig, GridError};
use crate::intervention::InterventionConfig;

pub use evaluate::{evaluate, AchievementRate, AchievementStats};
pub use report::{read_run, report, windowed_scores, ReportFiles, RunLog, WindowScore};
pub use run::{
    replay_rewards, train, EpisodeRecord, EpochReport, GoalEvent, MetricsRow, RunSummary, Runner, StepReward,
    StepTrace,
};
pub use score::{score, ScoreError};

/// Scalar used for the policy during training runs.
pub type Real = f32;

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("invalid run config: {0}")]
    InvalidConfig(String),
    #[error("i/o error on {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("missing logs: {0}")]
    MissingLogs(String),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Score(#[from] ScoreError),
}

impl OrchestratorError {
    pub(crate) fn io(path: impl Into<PathBuf>, e: impl std::fmt::Display) -> Self {
        OrchestratorError::Io {
            path: path.into(),
            message: e.to_string(),
        }
    }

    /// Stable snake_case tag for machine-readable error output.
    pub fn kind(&self) -> &'static str {
        match self {
            OrchestratorError::InvalidConfig(_) => "invalid_config",
            OrchestratorError::Io { .. } => "io",
            OrchestratorError::MissingLogs(_) => "missing_logs",
            OrchestratorError::Agent(_) => "agent",
            OrchestratorError::Grid(_) => "environment",
            OrchestratorError::Score(_) => "score",
        }
    }
}

/// Which stages of the loop are enabled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Full,
    /// No extraction; the graph stays empty.
    NoLearning,
    /// Extraction without verification.
    NoAdapting,
    /// Plain PPO: no graph, goals or shaping.
    RlOnly,
}

impl Mode {
    pub fn extracts(self) -> bool {
        matches!(self, Mode::Full | Mode::NoAdapting)
    }

    pub fn adapts(self) -> bool {
        matches!(self, Mode::Full | Mode::NoLearning)
    }

    pub fn uses_goals(self) -> bool {
        self != Mode::RlOnly
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Full => "full",
            Mode::NoLearning => "no_learning",
            Mode::NoAdapting => "no_adapting",
            Mode::RlOnly => "rl_only",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExtractorChoice {
    Scripted(ExtractorConfig),
    Remote(RemoteConfig),
}

impl Default for ExtractorChoice {
    fn default() -> Self {
        ExtractorChoice::Scripted(ExtractorConfig::default())
    }
}

/// How intervention trials walk to the cause.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NavigatorChoice {
    /// The frozen training policy, conditioned on reaching the cause.
    #[default]
    Policy,
    /// Shortest-path walker with full map access.
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Label used by reports, e.g. to pick the baseline run.
    pub name: String,
    pub mode: Mode,
    /// Environment steps across all epochs.
    pub total_steps: u64,
    /// Optional hard cap on epochs; the step budget applies either way.
    pub max_epochs: Option<usize>,
    pub cycles_per_epoch: usize,
    /// Edges verified per adapting stage.
    pub adapt_budget: usize,
    pub goal_horizon: u32,
    pub env: EnvConfig,
    pub trainer: TrainerConfig,
    pub shaping: ShapingConfig,
    pub extractor: ExtractorChoice,
    pub intervention: InterventionConfig,
    pub navigator: NavigatorChoice,
    pub seed: u64,
    /// Greedy evaluation episodes after training; 0 skips evaluation.
    pub eval_episodes: usize,
    /// Equal step windows for the windowed score table.
    pub score_windows: usize,
    /// Write one JSON line per environment step.
    pub step_traces: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            name: "full".into(),
            mode: Mode::Full,
            total_steps: 200_000,
            max_epochs: None,
            cycles_per_epoch: 10,
            adapt_budget: 8,
            goal_horizon: DEFAULT_GOAL_HORIZON,
            env: EnvConfig::default(),
            trainer: TrainerConfig::default(),
            shaping: ShapingConfig::default(),
            extractor: ExtractorChoice::default(),
            intervention: InterventionConfig::default(),
            navigator: NavigatorChoice::default(),
            seed: 0,
            eval_episodes: 100,
            score_windows: 6,
            step_traces: true,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), OrchestratorError> {
        let bad = |m: &str| Err(OrchestratorError::InvalidConfig(m.into()));
        self.env.validate()?;
        self.trainer.validate()?;
        if self.total_steps == 0 {
            return bad("total_steps must be positive");
        }
        if self.cycles_per_epoch == 0 {
            return bad("cycles_per_epoch must be positive");
        }
        if self.score_windows == 0 {
            return bad("score_windows must be positive");
        }
        if self.goal_horizon == 0 {
            return bad("goal_horizon must be positive");
        }
        if !(self.shaping.lambda.is_finite() && self.shaping.lambda >= 0.0) {
            return bad("shaping lambda must be finite and non-negative");
        }
        if let ExtractorChoice::Scripted(c) = &self.extractor {
            c.validate()
                .map_err(|e| OrchestratorError::InvalidConfig(e.to_string()))?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, OrchestratorError> {
        let c: RunConfig =
            serde_json::from_str(text).map_err(|e| OrchestratorError::InvalidConfig(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// Shaping strength actually applied; zero when goals are off.
    pub fn effective_lambda(&self, step: u64) -> f64 {
        if self.mode.uses_goals() {
            self.shaping.lambda_at(step)
        } else {
            0.0
        }
    }
}

/// Independent seed for a named purpose, derived from the run seed.
pub fn derive_seed(seed: u64, purpose: &str) -> u64 {
    let mut h = FnvHasher::default();
    seed.hash(&mut h);
    purpose.hash(&mut h);
    h.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_flags() {
        assert!(Mode::Full.extracts() && Mode::Full.adapts() && Mode::Full.uses_goals());
        assert!(!Mode::NoLearning.extracts() && Mode::NoLearning.adapts());
        assert!(Mode::NoAdapting.extracts() && !Mode::NoAdapting.adapts());
        assert!(!Mode::RlOnly.extracts() && !Mode::RlOnly.adapts() && !Mode::RlOnly.uses_goals());
    }

    #[test]
    fn config_json_defaults_and_tags() {
        let c = RunConfig::from_json(
            r#"{"mode": "rl_only", "total_steps": 500, "extractor": {"kind": "scripted", "p_false": 0.1}}"#,
        )
        .unwrap();
        assert_eq!(c.mode, Mode::RlOnly);
        assert_eq!(c.cycles_per_epoch, 10);
        match &c.extractor {
            ExtractorChoice::Scripted(e) => assert_eq!(e.p_false, 0.1),
            other => panic!("{other:?}"),
        }
        assert_eq!(c.effective_lambda(0), 0.0);
        let back = RunConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_unknown_fields_and_bad_values() {
        assert!(RunConfig::from_json(r#"{"modes": "full"}"#).is_err());
        assert!(RunConfig::from_json(r#"{"total_steps": 0}"#).is_err());
        assert!(RunConfig::from_json(r#"{"shaping": {"lambda": -1}}"#).is_err());
    }

    #[test]
    fn derived_seeds_differ_by_purpose() {
        assert_ne!(derive_seed(1, "env"), derive_seed(1, "act"));
        assert_ne!(derive_seed(1, "env"), derive_seed(2, "env"));
        assert_eq!(derive_seed(7, "env"), derive_seed(7, "env"));
    }
}
