//! Chat-completion client for a remote language model.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::template::{ChatMessage, PromptTemplate};
use super::{graph_lines, parse_relation_lines, Extraction, ExtractionError, Extractor, GoalChoice};
use crate::goals::{plan_subgoal, planning_statuses, Goal, PlannerState};
use crate::gridworld::RuleTable;
use crate::scm::{CausalGraph, Provenance};

pub const API_KEY_ENV: &str = "CAUSAL_LLM_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemoteConfig {
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    pub timeout_secs: u64,
    /// Total time allowed for one call including retries.
    pub budget_secs: u64,
    /// Wait after each failed attempt; its length is the attempt count.
    pub backoff_ms: Vec<u64>,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            base_url: "http://localhost:8000/v1".into(),
            model: "default".into(),
            temperature: 0.0,
            timeout_secs: 30,
            budget_secs: 120,
            backoff_ms: vec![1000, 2000, 4000],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

/// Sends one chat request and returns the reply text.
pub trait ChatTransport: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, String>;
}

/// Blocking HTTP transport speaking the common chat-completions shape.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    url: String,
    api_key: Option<String>,
}

impl HttpTransport {
    pub fn new(config: &RemoteConfig) -> Result<Self, ExtractionError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| ExtractionError::RemoteUnavailable(e.to_string()))?;
        Ok(Self {
            client,
            url: format!("{}/chat/completions", config.base_url.trim_end_matches('/')),
            api_key: std::env::var(API_KEY_ENV).ok(),
        })
    }
}

impl ChatTransport for HttpTransport {
    fn complete(&self, request: &ChatRequest) -> Result<String, String> {
        let mut req = self.client.post(&self.url).json(request);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let body: serde_json::Value = req
            .send()
            .and_then(|r| r.error_for_status())
            .and_then(|r| r.json())
            .map_err(|e| e.to_string())?;
        body["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| "reply has no choices[0].message.content".to_string())
    }
}

pub struct RemoteExtractor {
    config: RemoteConfig,
    transport: Box<dyn ChatTransport>,
    relations_prompt: PromptTemplate,
}

impl RemoteExtractor {
    pub fn new(config: RemoteConfig, transport: Box<dyn ChatTransport>, relations_prompt: PromptTemplate) -> Self {
        Self {
            config,
            transport,
            relations_prompt,
        }
    }

    pub fn http(config: RemoteConfig) -> Result<Self, ExtractionError> {
        let transport = HttpTransport::new(&config)?;
        Ok(Self::new(config, Box::new(transport), PromptTemplate::relations_default()))
    }

    fn call(&self, messages: Vec<ChatMessage>) -> Result<String, ExtractionError> {
        let request = ChatRequest {
            model: self.config.model.clone(),
            messages,
            temperature: self.config.temperature,
        };
        let start = Instant::now();
        let budget = Duration::from_secs(self.config.budget_secs);
        let mut last = String::from("no attempts configured");
        for (i, &wait) in self.config.backoff_ms.iter().enumerate() {
            match self.transport.complete(&request) {
                Ok(reply) => return Ok(reply),
                Err(e) => {
                    log::warn!("remote attempt {} failed: {e}", i + 1);
                    last = e;
                }
            }
            let wait = Duration::from_millis(wait);
            let is_last = i + 1 == self.config.backoff_ms.len();
            if is_last || start.elapsed() + wait > budget {
                break;
            }
            std::thread::sleep(wait);
        }
        Err(ExtractionError::RemoteUnavailable(last))
    }
}

impl Extractor for RemoteExtractor {
    fn extract_relations(&self, observation_text: &str, vocabulary: &[String]) -> Result<Extraction, ExtractionError> {
        if vocabulary.is_empty() {
            return Err(ExtractionError::EmptyVocabulary);
        }
        let vocab = vocabulary.join(", ");
        let messages = self.relations_prompt.render(&[
            ("observation", observation_text),
            ("graph", "(none)"),
            ("vocabulary", &vocab),
        ]);
        let reply = self.call(messages)?;
        let (relations, rejected) = parse_relation_lines(&reply, vocabulary, Provenance::RemoteModel);
        if rejected > 0 {
            log::debug!("discarded {rejected} unparseable reply lines");
        }
        Ok(Extraction { relations, rejected })
    }

    fn generate_goal(
        &self,
        graph: &CausalGraph,
        state: &PlannerState,
        prompt: &PromptTemplate,
    ) -> Result<GoalChoice, ExtractionError> {
        let table = RuleTable::standard();
        let goals: Vec<&str> = table
            .variables()
            .iter()
            .map(|v| v.goal_phrase)
            .chain([crate::goals::EXPLORE])
            .collect();
        let unlocked: Vec<&str> = state.unlocked.iter().map(|a| a.name()).collect();
        let inventory: Vec<String> = state
            .inventory
            .held()
            .map(|(item, n)| format!("{}: {n}", item.name()))
            .collect();
        let graph_text = graph_lines(graph, planning_statuses(graph));
        let or_none = |v: String| if v.is_empty() { "none".to_string() } else { v };
        let messages = prompt.render(&[
            ("graph", &graph_text),
            ("goals", &goals.join(", ")),
            ("unlocked", &or_none(unlocked.join(", "))),
            ("inventory", &or_none(inventory.join(", "))),
        ]);
        let reply = self.call(messages)?;
        let first = reply.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
        match Goal::from_text(first.trim_end_matches('.')) {
            Some(goal) => Ok(GoalChoice {
                goal,
                fell_back: false,
            }),
            None => Ok(GoalChoice {
                goal: plan_subgoal(graph, state),
                fell_back: true,
            }),
        }
    }
}
