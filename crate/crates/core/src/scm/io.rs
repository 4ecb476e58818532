//! JSON interchange format for causal graphs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CausalEdge, CausalGraph, CausalVariable, EdgeStatus, Evidence, Provenance, ScmError};

/// On-disk layout: `{"variables": [...], "edges": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub variables: Vec<CausalVariable>,
    pub edges: Vec<EdgeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub src: usize,
    pub dst: usize,
    pub status: EdgeStatus,
    pub positive_trials: u64,
    pub negative_trials: u64,
    pub source: Provenance,
}

impl From<&CausalGraph> for GraphFile {
    fn from(g: &CausalGraph) -> Self {
        GraphFile {
            variables: g.variables().to_vec(),
            edges: g
                .edges()
                .map(|e| EdgeRecord {
                    src: e.src,
                    dst: e.dst,
                    status: e.status,
                    positive_trials: e.evidence.positive_trials,
                    negative_trials: e.evidence.negative_trials,
                    source: e.source,
                })
                .collect(),
        }
    }
}

impl TryFrom<GraphFile> for CausalGraph {
    type Error = ScmError;

    fn try_from(file: GraphFile) -> Result<Self, Self::Error> {
        let mut g = CausalGraph::new(file.variables)?;
        for r in file.edges {
            g.insert_raw(CausalEdge {
                src: r.src,
                dst: r.dst,
                status: r.status,
                evidence: Evidence::new(r.positive_trials, r.negative_trials),
                source: r.source,
            })?;
        }
        Ok(g)
    }
}

impl CausalGraph {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&GraphFile::from(self)).expect("graph serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ScmError> {
        let file: GraphFile =
            serde_json::from_str(text).map_err(|e| ScmError::Format(e.to_string()))?;
        file.try_into()
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }

    pub fn load(path: &Path) -> Result<Self, ScmError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScmError::Format(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}
