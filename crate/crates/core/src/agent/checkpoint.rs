//! Versioned checkpoint files: a header line followed by one JSON document.

use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::policy::PolicyParameters;
use super::ppo::{Adam, TrainerConfig};
use super::AgentError;
use crate::scalar::Scalar;

pub const CHECKPOINT_HEADER: &str = "causal-checkpoint v1";

/// Position of a ChaCha stream, enough to resume it exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    /// Decimal, since JSON numbers cannot carry 128 bits.
    pub word_pos: String,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        Self {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    pub fn restore(&self) -> Result<ChaCha8Rng, AgentError> {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        let pos: u128 = self
            .word_pos
            .parse()
            .map_err(|_| AgentError::Checkpoint("bad rng word position".into()))?;
        rng.set_word_pos(pos);
        Ok(rng)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: DeserializeOwned"))]
pub struct Checkpoint<T> {
    pub step: u64,
    pub params: PolicyParameters<T>,
    pub adam: Adam<T>,
    pub trainer: TrainerConfig,
    pub rng: RngState,
    /// Caller-defined context, e.g. the run config and graph.
    pub extra: serde_json::Value,
}

impl<T: Scalar + Serialize + DeserializeOwned> Checkpoint<T> {
    pub fn to_text(&self) -> String {
        let body = serde_json::to_string(self).expect("checkpoint serializes");
        format!("{CHECKPOINT_HEADER}\n{body}\n")
    }

    pub fn from_text(text: &str) -> Result<Self, AgentError> {
        let (header, body) = text
            .split_once('\n')
            .ok_or_else(|| AgentError::Checkpoint("missing header".into()))?;
        if header.trim() != CHECKPOINT_HEADER {
            return Err(AgentError::Checkpoint(format!("unsupported header `{}`", header.trim())));
        }
        serde_json::from_str(body).map_err(|e| AgentError::Checkpoint(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), AgentError> {
        std::fs::write(path, self.to_text()).map_err(|e| AgentError::Checkpoint(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, AgentError> {
        let text = std::fs::read_to_string(path).map_err(|e| AgentError::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_text(&text)
    }
}
