//! Plain-text prompt templates with `### section` headers.

use serde::{Deserialize, Serialize};

use super::ExtractionError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: &str, content: impl Into<String>) -> Self {
        Self {
            role: role.to_string(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: String,
    pub system: String,
    /// Few-shot pairs of (input text, expected answer).
    pub examples: Vec<(String, String)>,
    pub grammar: String,
    pub user: String,
}

impl PromptTemplate {
    pub fn relations_default() -> Self {
        Self::parse(include_str!("../../prompts/relations.txt")).expect("bundled template parses")
    }

    pub fn goal_default() -> Self {
        Self::parse(include_str!("../../prompts/goal.txt")).expect("bundled template parses")
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ExtractionError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExtractionError::Template(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Sections: `id`, `system`, `grammar`, `user` once each, and any number
    /// of `example` / `answer` pairs.
    pub fn parse(text: &str) -> Result<Self, ExtractionError> {
        let mut sections: Vec<(String, String)> = Vec::new();
        for line in text.lines() {
            if let Some(name) = line.strip_prefix("### ") {
                sections.push((name.trim().to_string(), String::new()));
            } else if let Some((_, body)) = sections.last_mut() {
                body.push_str(line);
                body.push('\n');
            } else if !line.trim().is_empty() {
                return Err(ExtractionError::Template("text before the first section".into()));
            }
        }
        let mut t = PromptTemplate {
            id: String::new(),
            system: String::new(),
            examples: Vec::new(),
            grammar: String::new(),
            user: String::new(),
        };
        let mut pending: Option<String> = None;
        for (name, body) in sections {
            let body = body.trim_end().to_string();
            match name.as_str() {
                "id" => t.id = body.trim().to_string(),
                "system" => t.system = body,
                "grammar" => t.grammar = body,
                "user" => t.user = body,
                "example" => {
                    if pending.replace(body).is_some() {
                        return Err(ExtractionError::Template("example without answer".into()));
                    }
                }
                "answer" => {
                    let input = pending
                        .take()
                        .ok_or_else(|| ExtractionError::Template("answer without example".into()))?;
                    t.examples.push((input, body));
                }
                other => {
                    return Err(ExtractionError::Template(format!("unknown section `{other}`")))
                }
            }
        }
        if pending.is_some() {
            return Err(ExtractionError::Template("example without answer".into()));
        }
        if t.id.is_empty() || t.user.is_empty() {
            return Err(ExtractionError::Template("missing `id` or `user` section".into()));
        }
        Ok(t)
    }

    /// Substitutes `{key}` placeholders and lays the template out as chat messages.
    pub fn render(&self, vars: &[(&str, &str)]) -> Vec<ChatMessage> {
        let fill = |s: &str| {
            vars.iter()
                .fold(s.to_string(), |acc, (k, v)| acc.replace(&format!("{{{k}}}"), v))
        };
        let mut system = fill(&self.system);
        if !self.grammar.is_empty() {
            system.push_str("\n\n");
            system.push_str(&self.grammar);
        }
        let mut out = vec![ChatMessage::new("system", system)];
        for (input, answer) in &self.examples {
            out.push(ChatMessage::new("user", input.clone()));
            out.push(ChatMessage::new("assistant", answer.clone()));
        }
        out.push(ChatMessage::new("user", fill(&self.user)));
        out
    }
}
