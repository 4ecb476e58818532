//! Structural causal model store.
//!
//! A [`CausalGraph`] holds the environment's variables and a set of directed
//! edges, each carrying a lifecycle status (hypothesized, verified, refuted),
//! accumulated trial evidence and provenance. Mutating operations take `&self`
//! and return a new graph, so snapshots can be shared freely between workers.
//!
//! The subgraph of hypothesized and verified edges is kept acyclic. Refuted
//! edges are retained so that re-proposals of the same relation are ignored,
//! but they never appear in the causal matrix or in default reachability.

mod io;
mod matrix;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::GraphFile;
pub use matrix::CausalMatrix;

pub type VarId = usize;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScmError {
    #[error("unknown variable id {0}")]
    UnknownVariable(VarId),
    #[error("unknown variable name `{0}`")]
    UnknownName(String),
    #[error("self-loop on variable {0}")]
    SelfLoop(VarId),
    #[error("edge {src} -> {dst} would create a cycle")]
    CycleCreated { src: VarId, dst: VarId },
    #[error("no edge {src} -> {dst}")]
    UnknownEdge { src: VarId, dst: VarId },
    #[error("invalid variable table: {0}")]
    InvalidVariables(String),
    #[error("matrix is {got}x{got}, expected {expected}x{expected}")]
    MatrixShape { expected: usize, got: usize },
    #[error("graph file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariableKind {
    Resource,
    Material,
    Tool,
    Entity,
    PlayerStat,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CausalVariable {
    pub id: VarId,
    pub name: String,
    pub kind: VariableKind,
}

impl CausalVariable {
    pub fn new(id: VarId, name: impl Into<String>, kind: VariableKind) -> Self {
        Self {
            id,
            name: name.into(),
            kind,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeStatus {
    Hypothesized,
    Verified,
    Refuted,
}

impl EdgeStatus {
    /// Hypothesized and verified edges take part in planning and the matrix.
    pub fn is_active(self) -> bool {
        !matches!(self, EdgeStatus::Refuted)
    }
}

/// Where a relation came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Oracle,
    RemoteModel,
    Manual,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Evidence {
    pub positive_trials: u64,
    pub negative_trials: u64,
}

impl Evidence {
    pub fn new(positive_trials: u64, negative_trials: u64) -> Self {
        Self {
            positive_trials,
            negative_trials,
        }
    }

    pub fn total(&self) -> u64 {
        self.positive_trials + self.negative_trials
    }

    fn accumulate(self, delta: Evidence) -> Evidence {
        Evidence {
            positive_trials: self.positive_trials.saturating_add(delta.positive_trials),
            negative_trials: self.negative_trials.saturating_add(delta.negative_trials),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CausalEdge {
    pub src: VarId,
    pub dst: VarId,
    pub status: EdgeStatus,
    pub evidence: Evidence,
    pub source: Provenance,
}

/// A set of edge statuses used to filter traversals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StatusSet(u8);

impl StatusSet {
    pub const NONE: StatusSet = StatusSet(0);
    pub const HYPOTHESIZED: StatusSet = StatusSet(1);
    pub const VERIFIED: StatusSet = StatusSet(2);
    pub const REFUTED: StatusSet = StatusSet(4);
    /// Hypothesized or verified.
    pub const ACTIVE: StatusSet = StatusSet(1 | 2);
    pub const ALL: StatusSet = StatusSet(7);

    pub fn of(statuses: &[EdgeStatus]) -> Self {
        statuses
            .iter()
            .fold(StatusSet::NONE, |acc, s| acc.with(*s))
    }

    pub fn with(self, status: EdgeStatus) -> Self {
        StatusSet(self.0 | Self::bit(status))
    }

    pub fn contains(self, status: EdgeStatus) -> bool {
        self.0 & Self::bit(status) != 0
    }

    fn bit(status: EdgeStatus) -> u8 {
        match status {
            EdgeStatus::Hypothesized => 1,
            EdgeStatus::Verified => 2,
            EdgeStatus::Refuted => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Ancestors,
    Descendants,
}

/// Counts of edges by lifecycle status.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusCounts {
    pub hypothesized: usize,
    pub verified: usize,
    pub refuted: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CausalGraph {
    variables: Vec<CausalVariable>,
    edges: BTreeMap<(VarId, VarId), CausalEdge>,
}

impl CausalGraph {
    /// Builds an edgeless graph. Ids must be `0..n` in order; names unique and non-empty.
    pub fn new(variables: Vec<CausalVariable>) -> Result<Self, ScmError> {
        let mut names = BTreeSet::new();
        for (i, v) in variables.iter().enumerate() {
            if v.id != i {
                return Err(ScmError::InvalidVariables(format!(
                    "variable `{}` has id {} at position {}",
                    v.name, v.id, i
                )));
            }
            if v.name.is_empty() {
                return Err(ScmError::InvalidVariables(format!("variable {i} has an empty name")));
            }
            if !names.insert(v.name.as_str()) {
                return Err(ScmError::InvalidVariables(format!("duplicate name `{}`", v.name)));
            }
        }
        Ok(Self {
            variables,
            edges: BTreeMap::new(),
        })
    }

    pub fn variables(&self) -> &[CausalVariable] {
        &self.variables
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn variable(&self, id: VarId) -> Result<&CausalVariable, ScmError> {
        self.variables.get(id).ok_or(ScmError::UnknownVariable(id))
    }

    pub fn id_of(&self, name: &str) -> Result<VarId, ScmError> {
        self.variables
            .iter()
            .find(|v| v.name == name)
            .map(|v| v.id)
            .ok_or_else(|| ScmError::UnknownName(name.to_string()))
    }

    pub fn name_of(&self, id: VarId) -> &str {
        &self.variables[id].name
    }

    pub fn vocabulary(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.name.clone()).collect()
    }

    /// Edges in `(src, dst)` order.
    pub fn edges(&self) -> impl Iterator<Item = &CausalEdge> {
        self.edges.values()
    }

    pub fn edge(&self, src: VarId, dst: VarId) -> Option<&CausalEdge> {
        self.edges.get(&(src, dst))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges_with(&self, statuses: StatusSet) -> impl Iterator<Item = &CausalEdge> {
        self.edges.values().filter(move |e| statuses.contains(e.status))
    }

    pub fn status_counts(&self) -> StatusCounts {
        let mut c = StatusCounts::default();
        for e in self.edges.values() {
            match e.status {
                EdgeStatus::Hypothesized => c.hypothesized += 1,
                EdgeStatus::Verified => c.verified += 1,
                EdgeStatus::Refuted => c.refuted += 1,
            }
        }
        c
    }

    fn check_var(&self, id: VarId) -> Result<(), ScmError> {
        if id < self.variables.len() {
            Ok(())
        } else {
            Err(ScmError::UnknownVariable(id))
        }
    }

    /// Adds `src -> dst` as hypothesized. Re-adding an existing edge never
    /// changes its status, so repeats are no-ops.
    pub fn add_relation(
        &self,
        src: VarId,
        dst: VarId,
        source: Provenance,
    ) -> Result<CausalGraph, ScmError> {
        self.check_var(src)?;
        self.check_var(dst)?;
        if src == dst {
            return Err(ScmError::SelfLoop(src));
        }
        if self.edges.contains_key(&(src, dst)) {
            return Ok(self.clone());
        }
        if self.reaches(dst, src, StatusSet::ACTIVE) {
            return Err(ScmError::CycleCreated { src, dst });
        }
        let mut next = self.clone();
        next.edges.insert(
            (src, dst),
            CausalEdge {
                src,
                dst,
                status: EdgeStatus::Hypothesized,
                evidence: Evidence::default(),
                source,
            },
        );
        Ok(next)
    }

    /// Replaces the status of an existing edge and accumulates evidence.
    ///
    /// Reviving a refuted edge is rejected if it would close a cycle.
    pub fn set_status(
        &self,
        src: VarId,
        dst: VarId,
        status: EdgeStatus,
        evidence_delta: Evidence,
    ) -> Result<CausalGraph, ScmError> {
        let edge = self
            .edges
            .get(&(src, dst))
            .ok_or(ScmError::UnknownEdge { src, dst })?;
        if !edge.status.is_active() && status.is_active() && self.reaches(dst, src, StatusSet::ACTIVE) {
            return Err(ScmError::CycleCreated { src, dst });
        }
        let mut next = self.clone();
        let e = next.edges.get_mut(&(src, dst)).expect("checked above");
        e.status = status;
        e.evidence = e.evidence.accumulate(evidence_delta);
        Ok(next)
    }

    /// Graph surgery for `do(v)`: every edge into `v` is removed.
    pub fn do_surgery(&self, v: VarId) -> Result<CausalGraph, ScmError> {
        self.check_var(v)?;
        let mut next = self.clone();
        next.edges.retain(|&(_, dst), _| dst != v);
        Ok(next)
    }

    pub fn parents(&self, v: VarId, statuses: StatusSet) -> Vec<VarId> {
        self.edges_with(statuses)
            .filter(|e| e.dst == v)
            .map(|e| e.src)
            .collect()
    }

    pub fn children(&self, v: VarId, statuses: StatusSet) -> Vec<VarId> {
        self.edges_with(statuses)
            .filter(|e| e.src == v)
            .map(|e| e.dst)
            .collect()
    }

    /// Transitive closure from `v`, excluding `v` itself.
    pub fn reachability(
        &self,
        v: VarId,
        direction: Direction,
        statuses: StatusSet,
    ) -> Result<BTreeSet<VarId>, ScmError> {
        self.check_var(v)?;
        let adjacency = self.adjacency(direction, statuses);
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([v]);
        while let Some(u) = queue.pop_front() {
            for &w in &adjacency[u] {
                if w != v && seen.insert(w) {
                    queue.push_back(w);
                }
            }
        }
        Ok(seen)
    }

    fn adjacency(&self, direction: Direction, statuses: StatusSet) -> Vec<Vec<VarId>> {
        let mut adj = vec![Vec::new(); self.variables.len()];
        for e in self.edges_with(statuses) {
            match direction {
                Direction::Descendants => adj[e.src].push(e.dst),
                Direction::Ancestors => adj[e.dst].push(e.src),
            }
        }
        adj
    }

    fn reaches(&self, from: VarId, to: VarId, statuses: StatusSet) -> bool {
        if from == to {
            return true;
        }
        let adj = self.adjacency(Direction::Descendants, statuses);
        let mut seen = vec![false; self.variables.len()];
        let mut stack = vec![from];
        while let Some(u) = stack.pop() {
            for &w in &adj[u] {
                if w == to {
                    return true;
                }
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        false
    }

    /// Kahn's algorithm over the filtered edges; ties broken by lowest id.
    /// Returns `None` if the filtered subgraph has a cycle (only possible
    /// for filters that include refuted edges).
    pub fn topological_order(&self, statuses: StatusSet) -> Option<Vec<VarId>> {
        let n = self.variables.len();
        let mut indegree = vec![0usize; n];
        let adj = self.adjacency(Direction::Descendants, statuses);
        for targets in &adj {
            for &w in targets {
                indegree[w] += 1;
            }
        }
        let mut ready: BTreeSet<VarId> = (0..n).filter(|&v| indegree[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(u) = ready.pop_first() {
            order.push(u);
            for &w in &adj[u] {
                indegree[w] -= 1;
                if indegree[w] == 0 {
                    ready.insert(w);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Position of each variable in the active topological order.
    pub fn topological_rank(&self) -> Vec<usize> {
        let order = self
            .topological_order(StatusSet::ACTIVE)
            .expect("active subgraph is acyclic");
        let mut rank = vec![0; order.len()];
        for (i, v) in order.into_iter().enumerate() {
            rank[v] = i;
        }
        rank
    }

    pub fn to_matrix(&self) -> CausalMatrix {
        let mut m = CausalMatrix::zeros(self.variables.len());
        for e in self.edges_with(StatusSet::ACTIVE) {
            m.set(e.src, e.dst, true);
        }
        m
    }

    /// Rebuilds a graph from a matrix; every 1-cell becomes a hypothesized edge.
    pub fn from_matrix(
        variables: Vec<CausalVariable>,
        matrix: &CausalMatrix,
        source: Provenance,
    ) -> Result<CausalGraph, ScmError> {
        let mut g = CausalGraph::new(variables)?;
        if matrix.n() != g.len() {
            return Err(ScmError::MatrixShape {
                expected: g.len(),
                got: matrix.n(),
            });
        }
        for (i, j) in matrix.ones() {
            g = g.add_relation(i, j, source)?;
        }
        Ok(g)
    }

    /// Restores an edge verbatim; used when loading files.
    fn insert_raw(&mut self, edge: CausalEdge) -> Result<(), ScmError> {
        self.check_var(edge.src)?;
        self.check_var(edge.dst)?;
        if edge.src == edge.dst {
            return Err(ScmError::SelfLoop(edge.src));
        }
        if self.edges.contains_key(&(edge.src, edge.dst)) {
            return Err(ScmError::Format(format!(
                "duplicate edge {} -> {}",
                edge.src, edge.dst
            )));
        }
        if edge.status.is_active() && self.reaches(edge.dst, edge.src, StatusSet::ACTIVE) {
            return Err(ScmError::CycleCreated {
                src: edge.src,
                dst: edge.dst,
            });
        }
        self.edges.insert((edge.src, edge.dst), edge);
        Ok(())
    }
}
