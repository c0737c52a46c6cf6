//! Belief-change operators over explanation knowledge bases: remainders and
//! kernels of the conflict graph, partial meet, kernel, screened,
//! credibility-limited and selective revision, consolidation, rule weakening,
//! and the S1/S2/S3 scenario presets.

mod graph;
mod operators;
mod scenario;
mod weaken;

use serde::{Deserialize, Serialize};

pub use graph::{greedy_vertex_cover, min_vertex_cover, ConflictGraph};
pub use operators::{
    consolidate, credibility_limited_revise, expansion, kernel_revise, kernels, partial_meet_revise,
    remainders, screened_revise, selective_revise,
};
pub use scenario::{scenario_revise, KdUpdate, Scenario, ScenarioConfig};
pub use weaken::{coverage, has_empty_body, is_vacuous, shrink, weaken, Coverage, WeakeningStrategy};

use crate::error::{Error, Result};
use crate::kb::{ClassifierTable, ExplanationKB, KBMetrics};
use crate::language::Rule;
use crate::semantics::{ConflictWitness, Reasoner, ScopeKind};

/// Upper bound on enumerated remainders.
pub const REMAINDER_CAP: usize = 10_000;
/// Default bound on vertices handed to the exact vertex cover.
pub const EXACT_COVER_LIMIT: usize = 24;

/// What an operator needs besides the KB and the input: the classifier table
/// (for τ-based priorities, metrics, and Dataset scope) and the scope.
#[derive(Debug, Clone, Copy)]
pub struct RevisionEnv<'a> {
    pub table: &'a ClassifierTable,
    pub scope: ScopeKind,
}

impl<'a> RevisionEnv<'a> {
    pub fn new(table: &'a ClassifierTable, scope: ScopeKind) -> Self {
        RevisionEnv { table, scope }
    }

    pub fn reasoner(&self) -> Reasoner<'a> {
        Reasoner { schema: self.table.schema(), scope: self.scope.bind(self.table) }
    }

    fn check(&self, kb: &ExplanationKB) -> Result<()> {
        if kb.schema() != self.table.schema() {
            return Err(Error::SchemaMismatch("knowledge base and classifier table".into()));
        }
        Ok(())
    }
}

/// Total order on rules deciding which to keep first.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorityOrder {
    /// K_d before K_e, then higher τ (vacuous counts as 1), then id.
    #[default]
    DataFirst,
    /// Listed ids first, in list order; the rest as in `DataFirst`.
    Explicit { ranking: Vec<String> },
}

/// How partial meet picks among remainders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SelectionPolicy {
    /// Intersection of all remainders.
    FullMeet,
    /// Intersection of the remainders of maximum size.
    MaxCardinality,
    /// The single remainder that is lexicographically best in the order.
    PriorityLexicographic { order: PriorityOrder },
}

impl Default for SelectionPolicy {
    fn default() -> Self {
        SelectionPolicy::PriorityLexicographic { order: PriorityOrder::DataFirst }
    }
}

/// How kernel revision and consolidation cut conflicts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IncisionPolicy {
    /// Minimum-size cover, ties broken by `DataFirst` priority; errors above
    /// `limit` vertices.
    MinVertexCoverExact { limit: usize },
    /// K_e before K_d, then highest degree, then lowest priority; pruned to a
    /// minimal cover.
    GreedyDegree { order: PriorityOrder },
}

impl Default for IncisionPolicy {
    fn default() -> Self {
        IncisionPolicy::MinVertexCoverExact { limit: EXACT_COVER_LIMIT }
    }
}

/// Rules shielded from removal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProtectedSet {
    Nothing,
    Kd,
    All,
    Ids { ids: Vec<String> },
}

impl ProtectedSet {
    pub fn contains(&self, kb: &ExplanationKB, id: &str) -> bool {
        match self {
            ProtectedSet::Nothing => false,
            ProtectedSet::Kd => kb.is_kd(id),
            ProtectedSet::All => kb.contains_id(id),
            ProtectedSet::Ids { ids } => ids.iter().any(|i| i == id),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CredibilityTest {
    ConsistentWithKd,
    TauCoherent { threshold: f64 },
    AlwaysCredible,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WeakenedRule {
    pub old: String,
    pub new: Rule,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trace {
    pub operator: String,
    pub input: Option<Rule>,
    /// The rule actually incorporated (the input or a weakening of it).
    pub effective_input: Option<Rule>,
    pub removed: Vec<String>,
    pub weakened: Vec<WeakenedRule>,
    pub accepted: bool,
    /// Share of the input's coverage that the effective input keeps.
    pub input_coverage: Option<Coverage>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RevisionOutcome {
    pub kb_after: ExplanationKB,
    pub trace: Trace,
    pub conflicts_found: Vec<ConflictWitness>,
    pub metrics_after: KBMetrics,
}

/// A revision operator with its configuration, replayable on other inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "operator", rename_all = "snake_case")]
pub enum Operator {
    Expansion,
    PartialMeet { selection: SelectionPolicy },
    Kernel { incision: IncisionPolicy },
    Screened { protected: ProtectedSet, selection: SelectionPolicy },
    CredibilityLimited { test: CredibilityTest, selection: SelectionPolicy },
    Selective { strategy: WeakeningStrategy, protected: ProtectedSet },
    Scenario { config: ScenarioConfig },
}

impl Operator {
    pub fn revise(&self, env: RevisionEnv<'_>, kb: &ExplanationKB, r: &Rule) -> Result<RevisionOutcome> {
        match self {
            Operator::Expansion => expansion(env, kb, r),
            Operator::PartialMeet { selection } => partial_meet_revise(env, kb, r, selection),
            Operator::Kernel { incision } => kernel_revise(env, kb, r, incision),
            Operator::Screened { protected, selection } => screened_revise(env, kb, r, protected, selection),
            Operator::CredibilityLimited { test, selection } => {
                credibility_limited_revise(env, kb, r, *test, selection)
            }
            Operator::Selective { strategy, protected } => selective_revise(env, kb, r, *strategy, protected),
            Operator::Scenario { config } => scenario_revise(env.table, kb, r, config),
        }
    }

    /// The scope the operator actually reasons in: scenario configurations
    /// carry their own, the others use the environment's.
    pub fn scope(&self, env_scope: ScopeKind) -> ScopeKind {
        match self {
            Operator::Scenario { config } => config.scope,
            _ => env_scope,
        }
    }

    /// Whether the operator always incorporates its input.
    pub fn is_prioritized(&self) -> bool {
        match self {
            Operator::Expansion | Operator::PartialMeet { .. } | Operator::Kernel { .. } => true,
            Operator::Scenario { config } => config.scenario == Scenario::S1,
            _ => false,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Operator::Expansion => "expansion".into(),
            Operator::PartialMeet { .. } => "partial_meet".into(),
            Operator::Kernel { .. } => "kernel".into(),
            Operator::Screened { .. } => "screened".into(),
            Operator::CredibilityLimited { .. } => "credibility_limited".into(),
            Operator::Selective { .. } => "selective".into(),
            Operator::Scenario { config } => config.label(),
        }
    }
}
