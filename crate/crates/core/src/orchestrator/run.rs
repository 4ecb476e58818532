use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::report::{windowed_scores, WindowScore};
use super::{derive_seed, evaluate, AchievementStats, ExtractorChoice, Mode, NavigatorChoice, OrchestratorError, Real, RunConfig};
use crate::agent::{
    act, encode, state_value, ActMode, ActScratch, AgentError, CausalContext, Checkpoint, FeatureLayout,
    PolicyParameters, RngState, RolloutBuffer, Trainer, UpdateMetrics,
};
use crate::extraction::{Extractor, PromptTemplate, RemoteExtractor, ScriptedExtractor};
use crate::goals::{embed, plan_subgoal, shaped_reward, Goal, PlannerState, DEFAULT_EMBED_DIM};
use crate::gridworld::{
    render_text, Achievement, AchievementSet, Action, EnvConfig, GridWorld, Observation, RuleTable, ValidEnv,
};
use crate::intervention::{
    adapt_epoch, resolve_conflicts, write_records, InterventionConfig, InterventionRecord, Navigator, OracleNavigator,
    PolicyNavigator,
};
use crate::scm::{CausalGraph, GraphFile, Provenance, StatusCounts, VarId};

/// One environment step as written to `traces.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub step: u64,
    pub episode: u64,
    pub tick: u32,
    pub action: Action,
    pub reward: f64,
    pub shaped: f64,
    pub goal: Option<String>,
    pub unlocked: Vec<Achievement>,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalEvent {
    pub tick: u32,
    pub goal: String,
    pub satisfied: bool,
}

/// One finished training episode, a row of `episodes.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: u64,
    pub seed: u64,
    pub start_step: u64,
    pub end_step: u64,
    pub length: u32,
    pub env_return: f64,
    pub shaped_return: f64,
    pub died: bool,
    /// Achievement names separated by `;`.
    pub achievements: String,
}

impl EpisodeRecord {
    pub fn unlocked(&self) -> AchievementSet {
        self.achievements
            .split(';')
            .filter_map(Achievement::from_name)
            .collect()
    }
}

/// One PPO update, a row of `metrics.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub step: u64,
    pub epoch: usize,
    pub update: usize,
    pub episodes: u64,
    /// Mean environment return of episodes finished since the previous update.
    pub recent_return: Option<f64>,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub grad_norm: f64,
    pub lambda: f64,
    pub skipped: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub step_start: u64,
    pub step_end: u64,
    pub relations_added: usize,
    pub relations_rejected: usize,
    pub stage_errors: Vec<String>,
    pub edges: StatusCounts,
    pub interventions: Vec<InterventionRecord>,
    pub updates: usize,
    pub metrics: UpdateMetrics,
    pub episodes: usize,
    pub mean_return: Option<f64>,
    /// Score over the episodes that ended during this epoch.
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub mode: Mode,
    pub seed: u64,
    pub steps: u64,
    pub epochs: usize,
    pub episodes: u64,
    pub updates: usize,
    pub skipped_updates: usize,
    /// Score over training episodes ending in the last step window.
    pub final_score: Option<f64>,
    pub windows: Vec<WindowScore>,
    /// First training step at which each achievement was unlocked.
    pub unlock_times: BTreeMap<String, u64>,
    pub edges: StatusCounts,
    pub params_fingerprint: u64,
    pub evaluation: Option<AchievementStats>,
}

/// Rewards of one step, before and after shaping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReward {
    pub env: f64,
    pub shaped: f64,
}

/// `r_env + lambda * cos(goal, observation)` on the rendered observation.
pub(crate) fn shape(r_env: f64, lambda: f64, goal_embedding: &[f64], obs: &Observation) -> f64 {
    if lambda == 0.0 {
        return r_env;
    }
    let o: Vec<f64> = embed(&render_text(obs), DEFAULT_EMBED_DIM);
    shaped_reward(r_env, lambda, goal_embedding, &o)
}

/// Keeps the current sub-goal and decides when to re-plan.
#[derive(Debug, Clone)]
pub(crate) struct GoalTracker {
    horizon: u32,
    current: Option<Goal>,
    since: u32,
    pub embedding: Vec<f64>,
    pub events: Vec<GoalEvent>,
}

impl GoalTracker {
    pub fn new(horizon: u32) -> Self {
        Self {
            horizon,
            current: None,
            since: 0,
            embedding: Vec::new(),
            events: Vec::new(),
        }
    }

    pub fn current(&self) -> Option<&Goal> {
        self.current.as_ref()
    }

    pub fn reset(&mut self) {
        self.current = None;
        self.events.clear();
    }

    /// Re-plans when there is no goal, the goal is reached, something was
    /// just unlocked, or the goal has timed out.
    #[allow(clippy::too_many_arguments)]
    pub fn refresh(
        &mut self,
        extractor: &dyn Extractor,
        prompt: &PromptTemplate,
        graph: &CausalGraph,
        obs: &Observation,
        targets: AchievementSet,
        tick: u32,
        just_unlocked: &[Achievement],
    ) {
        let state = PlannerState::from_observation(obs, targets);
        if let Some(goal) = &self.current {
            let reached = state.reached(goal) || just_unlocked.iter().any(|a| a.target_variable() == goal.target);
            let stale = reached || !just_unlocked.is_empty() || tick.saturating_sub(self.since) >= self.horizon;
            if !stale {
                return;
            }
            if let Some(last) = self.events.last_mut() {
                last.satisfied = reached;
            }
        }
        let mut goal = extractor
            .generate_goal(graph, &state, prompt)
            .map(|c| c.goal)
            .unwrap_or_else(|e| {
                log::warn!("goal proposal failed, using planner: {e}");
                plan_subgoal(graph, &state)
            });
        goal.horizon = self.horizon;
        self.embedding = embed(&goal.text, DEFAULT_EMBED_DIM);
        self.events.push(GoalEvent {
            tick,
            goal: goal.text.clone(),
            satisfied: false,
        });
        self.current = Some(goal);
        self.since = tick;
    }
}

pub(crate) fn make_extractor(config: &RunConfig) -> Result<Box<dyn Extractor>, OrchestratorError> {
    let bad = |e: crate::extraction::ExtractionError| OrchestratorError::InvalidConfig(e.to_string());
    Ok(match &config.extractor {
        ExtractorChoice::Scripted(c) => {
            let mut c = c.clone();
            c.noise_seed ^= derive_seed(config.seed, "extractor");
            Box::new(ScriptedExtractor::new(c).map_err(bad)?)
        }
        ExtractorChoice::Remote(c) => Box::new(RemoteExtractor::http(c.clone()).map_err(bad)?),
    })
}

/// Replays a fixed action sequence through the run's goal and shaping logic
/// on a fixed graph, returning the env and shaped reward of every step.
/// Episodes that end are reset with the run's episode seeds.
pub fn replay_rewards(config: &RunConfig, graph: &CausalGraph, actions: &[Action]) -> Result<Vec<StepReward>, OrchestratorError> {
    config.validate()?;
    let extractor = make_extractor(config)?;
    let prompt = PromptTemplate::goal_default();
    let targets: AchievementSet = config.env.achievements.iter().copied().collect();
    let env_base = derive_seed(config.seed, "env");
    let mut episode = 0u64;
    let mut env = GridWorld::new(config.env.clone(), env_base)?;
    let mut obs = env.observe();
    let mut goals = GoalTracker::new(config.goal_horizon);
    let mut last: Vec<Achievement> = Vec::new();
    let mut out = Vec::with_capacity(actions.len());
    for (step, &a) in actions.iter().enumerate() {
        if config.mode.uses_goals() {
            goals.refresh(extractor.as_ref(), &prompt, graph, &obs, targets, env.tick(), &last);
        }
        let t = env.step(a)?;
        let lambda = config.effective_lambda(step as u64);
        out.push(StepReward {
            env: t.reward,
            shaped: shape(t.reward, lambda, &goals.embedding, &t.observation),
        });
        if t.done {
            episode += 1;
            obs = env.reset(env_base.wrapping_add(episode));
            goals.reset();
            last.clear();
        } else {
            obs = t.observation;
            last = t.unlocked;
        }
    }
    Ok(out)
}

struct EpisodeAcc {
    index: u64,
    seed: u64,
    start_step: u64,
    env_return: f64,
    shaped_return: f64,
    unlocked: AchievementSet,
}

struct Logs {
    dir: PathBuf,
    metrics: csv::Writer<File>,
    episodes: csv::Writer<File>,
    traces: Option<BufWriter<File>>,
    goals: BufWriter<File>,
    interventions: BufWriter<File>,
    epochs: BufWriter<File>,
}

impl Logs {
    fn create(dir: &Path, config: &RunConfig) -> Result<Self, OrchestratorError> {
        std::fs::create_dir_all(dir).map_err(|e| OrchestratorError::io(dir, e))?;
        let open = |name: &str| {
            let p = dir.join(name);
            File::create(&p).map_err(|e| OrchestratorError::io(&p, e))
        };
        let cfg = serde_json::to_string_pretty(config).expect("config serializes");
        std::fs::write(dir.join("config.json"), cfg + "\n").map_err(|e| OrchestratorError::io(dir.join("config.json"), e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            metrics: csv::Writer::from_writer(open("metrics.csv")?),
            episodes: csv::Writer::from_writer(open("episodes.csv")?),
            traces: if config.step_traces {
                Some(BufWriter::new(open("traces.jsonl")?))
            } else {
                None
            },
            goals: BufWriter::new(open("goals.jsonl")?),
            interventions: BufWriter::new(open("interventions.jsonl")?),
            epochs: BufWriter::new(open("epochs.jsonl")?),
        })
    }

    fn err(&self, name: &str, e: impl std::fmt::Display) -> OrchestratorError {
        OrchestratorError::io(self.dir.join(name), e)
    }

    fn flush(&mut self) -> Result<(), OrchestratorError> {
        self.metrics.flush().map_err(|e| self.err("metrics.csv", e))?;
        self.episodes.flush().map_err(|e| self.err("episodes.csv", e))?;
        if let Some(t) = &mut self.traces {
            t.flush().map_err(|e| OrchestratorError::io(self.dir.join("traces.jsonl"), e))?;
        }
        self.goals.flush().map_err(|e| self.err("goals.jsonl", e))?;
        self.interventions
            .flush()
            .map_err(|e| self.err("interventions.jsonl", e))?;
        self.epochs.flush().map_err(|e| self.err("epochs.jsonl", e))
    }
}

fn json_line<W: Write, S: Serialize>(w: &mut W, value: &S) -> std::io::Result<()> {
    serde_json::to_writer(&mut *w, value)?;
    w.write_all(b"\n")
}

/// The scheduled adapting stage followed by tests of deferred relations.
fn adapt_with_conflicts<N, F>(
    graph: &CausalGraph,
    deferred: &[(VarId, VarId, Provenance)],
    base: &EnvConfig,
    make_navigator: F,
    budget: usize,
    config: &InterventionConfig,
    epoch: usize,
) -> (CausalGraph, Vec<InterventionRecord>, Vec<(VarId, VarId, Provenance)>)
where
    N: Navigator,
    F: Fn(&ValidEnv, u64) -> N,
{
    let (g, mut records) = adapt_epoch(graph, base, &make_navigator, budget, config, epoch);
    let (g, more, pending) = resolve_conflicts(&g, deferred, base, &make_navigator, budget, config, epoch);
    records.extend(more);
    (g, records, pending)
}

/// Full state of one training run.
pub struct Runner {
    config: RunConfig,
    extractor: Box<dyn Extractor>,
    goal_prompt: PromptTemplate,
    targets: AchievementSet,
    graph: CausalGraph,
    /// Extracted relations rejected for closing a cycle, kept for testing.
    deferred: Vec<(VarId, VarId, Provenance)>,
    context: CausalContext,
    layout: FeatureLayout,
    params: PolicyParameters<Real>,
    trainer: Trainer<Real>,
    rng: ChaCha8Rng,
    env: GridWorld,
    obs: Observation,
    env_seed_base: u64,
    step: u64,
    epoch: usize,
    updates: usize,
    skipped_updates: usize,
    episode: EpisodeAcc,
    goals: GoalTracker,
    last_unlocked: Vec<Achievement>,
    features_ready: bool,
    buffer: RolloutBuffer<Real>,
    features: Vec<Real>,
    scratch: ActScratch<Real>,
    unlock_times: BTreeMap<Achievement, u64>,
    episodes: Vec<EpisodeRecord>,
    reports: Vec<EpochReport>,
    recent_returns: Vec<f64>,
    logs: Option<Logs>,
}

impl Runner {
    /// Sets up a run; with `out` set, logs are written under that directory.
    pub fn new(config: RunConfig, out: Option<&Path>) -> Result<Self, OrchestratorError> {
        config.validate()?;
        let extractor = make_extractor(&config)?;
        let layout = FeatureLayout::new(config.env.view_width, config.env.view_height);
        let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "init"));
        let params = PolicyParameters::new(layout.len(), config.trainer.hidden, &mut init_rng);
        let trainer = Trainer::new(config.trainer.clone(), &params, derive_seed(config.seed, "ppo"))?;
        let env_seed_base = derive_seed(config.seed, "env");
        let env = GridWorld::new(config.env.clone(), env_seed_base)?;
        let obs = env.observe();
        let logs = out.map(|d| Logs::create(d, &config)).transpose()?;
        Ok(Self {
            extractor,
            goal_prompt: PromptTemplate::goal_default(),
            targets: config.env.achievements.iter().copied().collect(),
            graph: RuleTable::standard().empty_graph(),
            deferred: Vec::new(),
            context: CausalContext::empty(),
            buffer: RolloutBuffer::new(layout.len(), config.trainer.rollout_len),
            layout,
            params,
            trainer,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "act")),
            env,
            obs,
            env_seed_base,
            step: 0,
            epoch: 0,
            updates: 0,
            skipped_updates: 0,
            episode: EpisodeAcc {
                index: 0,
                seed: env_seed_base,
                start_step: 0,
                env_return: 0.0,
                shaped_return: 0.0,
                unlocked: AchievementSet::default(),
            },
            goals: GoalTracker::new(config.goal_horizon),
            last_unlocked: Vec::new(),
            features_ready: false,
            features: Vec::new(),
            scratch: ActScratch::default(),
            unlock_times: BTreeMap::new(),
            episodes: Vec::new(),
            reports: Vec::new(),
            recent_returns: Vec::new(),
            logs,
            config,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn graph(&self) -> &CausalGraph {
        &self.graph
    }

    pub fn params(&self) -> &PolicyParameters<Real> {
        &self.params
    }

    pub fn env(&self) -> &GridWorld {
        &self.env
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn episodes(&self) -> &[EpisodeRecord] {
        &self.episodes
    }

    pub fn reports(&self) -> &[EpochReport] {
        &self.reports
    }

    pub fn unlock_times(&self) -> &BTreeMap<Achievement, u64> {
        &self.unlock_times
    }

    pub fn is_finished(&self) -> bool {
        self.step >= self.config.total_steps || self.config.max_epochs.is_some_and(|m| self.epoch >= m)
    }

    /// Replaces the causal graph, e.g. to start from a saved one.
    pub fn set_graph(&mut self, graph: CausalGraph) {
        self.graph = graph;
        self.refresh_context();
    }

    fn refresh_context(&mut self) {
        self.context = if self.config.mode.uses_goals() {
            CausalContext::from_graph(&self.graph)
        } else {
            CausalContext::empty()
        };
        self.features_ready = false;
    }

    /// Learning stage: one extraction call on the latest observation.
    pub fn learning_stage(&mut self, report: &mut EpochReport) {
        let text = render_text(&self.obs);
        let vocab = self.graph.vocabulary();
        match self.extractor.extract_relations(&text, &vocab) {
            Ok(ex) => match ex.relations.apply(&self.graph) {
                Ok((g, cyclic)) => {
                    report.relations_added = g.edge_count() - self.graph.edge_count();
                    report.relations_rejected = ex.rejected + cyclic.len();
                    for r in cyclic {
                        if let (Ok(c), Ok(e)) = (g.id_of(&r.cause), g.id_of(&r.effect)) {
                            if !self.deferred.iter().any(|&(a, b, _)| (a, b) == (c, e)) {
                                self.deferred.push((c, e, r.source));
                            }
                        }
                    }
                    self.graph = g;
                }
                Err(e) => report.stage_errors.push(format!("learning: {e}")),
            },
            Err(e) => {
                log::warn!("extraction skipped: {e}");
                report.stage_errors.push(format!("learning: {e}"));
            }
        }
    }

    /// Adapting stage: verifies up to the budget of hypothesized edges in
    /// private sandboxes with a frozen copy of the policy.
    pub fn adapting_stage(&mut self, report: &mut EpochReport) {
        let cfg = &self.config;
        let mut icfg = cfg.intervention.clone();
        icfg.seed ^= derive_seed(cfg.seed, "intervention");
        let deferred = &self.deferred;
        let (graph, records, pending) = match cfg.navigator {
            NavigatorChoice::Oracle => adapt_with_conflicts(
                &self.graph,
                deferred,
                &cfg.env,
                |_: &ValidEnv, _| OracleNavigator,
                cfg.adapt_budget,
                &icfg,
                self.epoch,
            ),
            NavigatorChoice::Policy => {
                let params = &self.params;
                let layout = self.layout;
                let context = &self.context;
                let table = RuleTable::standard();
                adapt_with_conflicts(
                    &self.graph,
                    deferred,
                    &cfg.env,
                    |sb: &ValidEnv, seed| {
                        let goal = table
                            .variable_id(sb.cause)
                            .map(Goal::for_variable)
                            .unwrap_or_else(Goal::explore);
                        PolicyNavigator::new(params, layout, goal, context.clone(), seed)
                    },
                    cfg.adapt_budget,
                    &icfg,
                    self.epoch,
                )
            }
        };
        self.deferred = pending;
        self.graph = graph;
        report.interventions = records;
    }

    /// Goal refresh and feature encoding for the current observation.
    fn prepare(&mut self) {
        if self.features_ready {
            return;
        }
        if self.config.mode.uses_goals() {
            self.goals.refresh(
                self.extractor.as_ref(),
                &self.goal_prompt,
                &self.graph,
                &self.obs,
                self.targets,
                self.env.tick(),
                &self.last_unlocked,
            );
            self.last_unlocked.clear();
        }
        let goal = if self.config.mode.uses_goals() {
            self.goals.current()
        } else {
            None
        };
        encode(&self.layout, &self.obs, goal, &self.context, &mut self.features);
        self.features_ready = true;
    }

    fn env_step(&mut self) -> Result<(), OrchestratorError> {
        self.prepare();
        let out = act(&self.params, &self.features, ActMode::Sample, &mut self.rng, &mut self.scratch)?;
        let t = self.env.step(out.action)?;
        let lambda = self.config.effective_lambda(self.step);
        let shaped = shape(t.reward, lambda, &self.goals.embedding, &t.observation);
        let goal = self.goals.current().filter(|_| self.config.mode.uses_goals());
        self.buffer.push(
            &self.features,
            out.action.index(),
            out.log_prob,
            shaped as Real,
            out.value,
            t.done,
            goal.map_or(Goal::count() - 1, |g| g.id),
        );
        self.features_ready = false;
        self.step += 1;
        if let Some(logs) = &mut self.logs {
            if let Some(w) = &mut logs.traces {
                let rec = StepTrace {
                    step: self.step,
                    episode: self.episode.index,
                    tick: self.env.tick(),
                    action: out.action,
                    reward: t.reward,
                    shaped,
                    goal: goal.map(|g| g.text.clone()),
                    unlocked: t.unlocked.clone(),
                    done: t.done,
                };
                json_line(w, &rec).map_err(|e| OrchestratorError::io(logs.dir.join("traces.jsonl"), e))?;
            }
        }
        self.episode.env_return += t.reward;
        self.episode.shaped_return += shaped;
        for &a in &t.unlocked {
            self.episode.unlocked.insert(a);
            self.unlock_times.entry(a).or_insert(self.step);
        }
        if t.done {
            self.finish_episode()?;
        } else {
            self.obs = t.observation;
            self.last_unlocked = t.unlocked;
        }
        Ok(())
    }

    fn finish_episode(&mut self) -> Result<(), OrchestratorError> {
        let ep = &self.episode;
        let rec = EpisodeRecord {
            episode: ep.index,
            seed: ep.seed,
            start_step: ep.start_step,
            end_step: self.step,
            length: self.env.tick(),
            env_return: ep.env_return,
            shaped_return: ep.shaped_return,
            died: self.env.state().agent.vitals.health == 0,
            achievements: ep.unlocked.iter().map(|a| a.name()).collect::<Vec<_>>().join(";"),
        };
        if let Some(logs) = &mut self.logs {
            logs.episodes
                .serialize(&rec)
                .map_err(|e| OrchestratorError::io(logs.dir.join("episodes.csv"), e))?;
            let goals = serde_json::json!({"episode": rec.episode, "goals": self.goals.events});
            json_line(&mut logs.goals, &goals).map_err(|e| OrchestratorError::io(logs.dir.join("goals.jsonl"), e))?;
        }
        self.recent_returns.push(rec.env_return);
        self.episodes.push(rec);
        let index = self.episode.index + 1;
        let seed = self.env_seed_base.wrapping_add(index);
        self.obs = self.env.reset(seed);
        self.episode = EpisodeAcc {
            index,
            seed,
            start_step: self.step,
            env_return: 0.0,
            shaped_return: 0.0,
            unlocked: AchievementSet::default(),
        };
        self.goals.reset();
        self.last_unlocked.clear();
        self.features_ready = false;
        Ok(())
    }

    fn update(&mut self) -> Result<Option<UpdateMetrics>, OrchestratorError> {
        let last_done = self.buffer.dones.last().copied().unwrap_or(true);
        let bootstrap = if last_done {
            0.0
        } else {
            self.prepare();
            state_value(&self.params, &self.features, &mut self.scratch)
        };
        let result = self.trainer.update(&self.params, &self.buffer, bootstrap);
        self.buffer.clear();
        self.updates += 1;
        let (metrics, skipped) = match result {
            Ok((p, m)) => {
                self.params = p;
                (m, false)
            }
            Err(AgentError::NonFiniteLoss) => {
                log::warn!("update {} skipped: non-finite loss", self.updates);
                self.skipped_updates += 1;
                (UpdateMetrics::default(), true)
            }
            Err(e) => return Err(e.into()),
        };
        let recent = std::mem::take(&mut self.recent_returns);
        let row = MetricsRow {
            step: self.step,
            epoch: self.epoch,
            update: self.updates,
            episodes: self.episodes.len() as u64,
            recent_return: (!recent.is_empty()).then(|| recent.iter().sum::<f64>() / recent.len() as f64),
            policy_loss: metrics.policy_loss,
            value_loss: metrics.value_loss,
            entropy: metrics.entropy,
            clip_fraction: metrics.clip_fraction,
            grad_norm: metrics.grad_norm,
            lambda: self.config.effective_lambda(self.step),
            skipped,
        };
        if let Some(logs) = &mut self.logs {
            logs.metrics
                .serialize(&row)
                .map_err(|e| OrchestratorError::io(logs.dir.join("metrics.csv"), e))?;
        }
        Ok((!skipped).then_some(metrics))
    }

    /// Collects one rollout (shorter at the end of the budget) and updates.
    pub fn cycle(&mut self) -> Result<Option<UpdateMetrics>, OrchestratorError> {
        while self.buffer.len() < self.config.trainer.rollout_len && self.step < self.config.total_steps {
            self.env_step()?;
        }
        if self.buffer.is_empty() {
            return Ok(None);
        }
        self.update()
    }

    /// One learning, adapting and acting round.
    pub fn run_epoch(&mut self) -> Result<EpochReport, OrchestratorError> {
        let mut report = EpochReport {
            epoch: self.epoch,
            step_start: self.step,
            step_end: self.step,
            ..Default::default()
        };
        if self.config.mode.extracts() {
            self.learning_stage(&mut report);
        }
        if self.config.mode.adapts() {
            self.adapting_stage(&mut report);
        }
        self.refresh_context();
        let first_episode = self.episodes.len();
        let mut sum = UpdateMetrics::default();
        for _ in 0..self.config.cycles_per_epoch {
            if self.step >= self.config.total_steps {
                break;
            }
            if let Some(m) = self.cycle()? {
                sum.policy_loss += m.policy_loss;
                sum.value_loss += m.value_loss;
                sum.entropy += m.entropy;
                sum.clip_fraction += m.clip_fraction;
                sum.grad_norm += m.grad_norm;
                report.updates += 1;
            }
        }
        if report.updates > 0 {
            let k = report.updates as f64;
            sum.policy_loss /= k;
            sum.value_loss /= k;
            sum.entropy /= k;
            sum.clip_fraction /= k;
            sum.grad_norm /= k;
        }
        report.metrics = sum;
        let eps = &self.episodes[first_episode..];
        report.episodes = eps.len();
        if !eps.is_empty() {
            report.mean_return = Some(eps.iter().map(|e| e.env_return).sum::<f64>() / eps.len() as f64);
            report.score = super::report::episode_score(eps, &self.config.env.achievements);
        }
        report.step_end = self.step;
        report.edges = self.graph.status_counts();
        if let Some(logs) = &mut self.logs {
            write_records(&mut logs.interventions, &report.interventions)
                .map_err(|e| OrchestratorError::io(logs.dir.join("interventions.jsonl"), e))?;
            json_line(&mut logs.epochs, &report).map_err(|e| OrchestratorError::io(logs.dir.join("epochs.jsonl"), e))?;
            logs.flush()?;
        }
        self.epoch += 1;
        self.reports.push(report.clone());
        Ok(report)
    }

    pub fn checkpoint(&self) -> Checkpoint<Real> {
        Checkpoint {
            step: self.step,
            params: self.params.clone(),
            adam: self.trainer.adam.clone(),
            trainer: self.config.trainer.clone(),
            rng: RngState::capture(&self.rng),
            extra: serde_json::json!({
                "config": self.config,
                "graph": GraphFile::from(&self.graph),
                "trainer_rng": RngState::capture(&self.trainer.rng),
                "epoch": self.epoch,
            }),
        }
    }

    /// Evaluates, writes the final artifacts and returns the summary.
    pub fn finish(mut self) -> Result<RunSummary, OrchestratorError> {
        let names: BTreeMap<String, u64> = self
            .unlock_times
            .iter()
            .map(|(a, &s)| (a.name().to_string(), s))
            .collect();
        let evaluation = if self.config.eval_episodes > 0 {
            let conditioning = self.config.mode.uses_goals().then_some(&self.graph);
            Some(evaluate(
                &self.params,
                &self.config.env,
                self.config.eval_episodes,
                derive_seed(self.config.seed, "eval"),
                conditioning,
                &self.unlock_times,
            )?)
        } else {
            None
        };
        let windows = windowed_scores(
            &self.episodes,
            self.config.total_steps,
            self.config.score_windows,
            &self.config.env.achievements,
        );
        let summary = RunSummary {
            name: self.config.name.clone(),
            mode: self.config.mode,
            seed: self.config.seed,
            steps: self.step,
            epochs: self.epoch,
            episodes: self.episodes.len() as u64,
            updates: self.updates,
            skipped_updates: self.skipped_updates,
            final_score: windows.last().and_then(|w| w.score),
            windows,
            unlock_times: names,
            edges: self.graph.status_counts(),
            params_fingerprint: self.params.fingerprint(),
            evaluation,
        };
        if let Some(logs) = &mut self.logs {
            logs.flush()?;
            let dir = logs.dir.clone();
            let write = |name: &str, text: String| {
                let p = dir.join(name);
                std::fs::write(&p, text).map_err(|e| OrchestratorError::io(&p, e))
            };
            write("graph.json", self.graph.to_json() + "\n")?;
            write("checkpoint.json", self.checkpoint().to_text())?;
            write(
                "summary.json",
                serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n",
            )?;
        }
        Ok(summary)
    }
}

/// Runs a whole training job; logs go to `out` if given.
pub fn train(config: RunConfig, out: Option<&Path>) -> Result<RunSummary, OrchestratorError> {
    let mut runner = Runner::new(config, out)?;
    while !runner.is_finished() {
        let r = runner.run_epoch()?;
        log::info!(
            "epoch {} steps {}..{} edges h{}/v{}/r{} episodes {} score {:?}",
            r.epoch,
            r.step_start,
            r.step_end,
            r.edges.hypothesized,
            r.edges.verified,
            r.edges.refuted,
            r.episodes,
            r.score
        );
    }
    runner.finish()
}

#[cfg(test)]
#[allow(clippy::field_reassign_with_default)]
mod tests {
    use super::*;

    fn tiny(mode: Mode) -> RunConfig {
        let mut c = RunConfig::default();
        c.mode = mode;
        c.total_steps = 600;
        c.cycles_per_epoch = 2;
        c.trainer.rollout_len = 128;
        c.trainer.minibatch = 64;
        c.trainer.epochs = 2;
        c.trainer.hidden = 16;
        c.env.horizon = 150;
        c.eval_episodes = 2;
        c.intervention.trials = 4;
        c.intervention.min_trials = 2;
        c.intervention.max_steps = 20;
        c.adapt_budget = 2;
        c
    }

    #[test]
    fn budget_is_respected() {
        let s = train(tiny(Mode::Full), None).unwrap();
        assert_eq!(s.steps, 600);
        assert_eq!(s.epochs, 3);
        assert!(s.episodes >= 3);
    }

    #[test]
    fn mode_flags_hold_during_a_run() {
        let mut r = Runner::new(tiny(Mode::NoAdapting), None).unwrap();
        while !r.is_finished() {
            r.run_epoch().unwrap();
        }
        assert!(r.reports().iter().all(|e| e.interventions.is_empty()));
        assert!(r.graph().edge_count() > 0);

        let mut r = Runner::new(tiny(Mode::NoLearning), None).unwrap();
        r.run_epoch().unwrap();
        assert_eq!(r.graph().edge_count(), 0);

        let mut r = Runner::new(tiny(Mode::RlOnly), None).unwrap();
        r.run_epoch().unwrap();
        assert_eq!(r.graph().edge_count(), 0);
        assert!(r.goals.events.is_empty());
    }

    #[test]
    fn same_config_same_reports() {
        let run = || {
            let mut r = Runner::new(tiny(Mode::Full), None).unwrap();
            while !r.is_finished() {
                r.run_epoch().unwrap();
            }
            (r.reports().to_vec(), r.params().fingerprint())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn zero_lambda_replay_equals_env_rewards() {
        let mut c = tiny(Mode::Full);
        c.shaping.lambda = 0.0;
        let actions: Vec<Action> = (0..400).map(|i| Action::ALL[(i * 7 + i / 3) % Action::COUNT]).collect();
        let graph = RuleTable::standard().empty_graph();
        for r in replay_rewards(&c, &graph, &actions).unwrap() {
            assert_eq!(r.env.to_bits(), r.shaped.to_bits());
        }
    }
}
