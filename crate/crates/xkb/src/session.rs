//! Session state and the propose/commit cycle, independent of transport.
//!
//! A [`SessionState`] is immutable; a commit produces the next one. Pending
//! proposals live next to it (see [`crate::server`]) and are never persisted.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use xkb_core::kb::{load_table, metrics, validate, ClassifierTable, ExplanationKB, Fraction, KBMetrics};
use xkb_core::language::{parse_document, parse_rule_fresh, render_schema, Rule, Schema};
use xkb_core::postulates::{check_all, Instance, PostulateVerdict};
use xkb_core::revision::{scenario_revise, Operator, RevisionOutcome, Scenario, ScenarioConfig, Trace};
use xkb_core::semantics::{tau_coherence, CoherenceValue, ConflictWitness, Reasoner, ScopeKind};

use crate::error::ApiError;

#[derive(Debug, Clone, Deserialize)]
pub struct CreateSession {
    /// Optional when `kb_text` starts with its own schema block; must match it
    /// when both are given.
    #[serde(default)]
    pub schema: Option<Schema>,
    pub table_csv: String,
    pub kb_text: String,
    #[serde(default)]
    pub scope: ScopeKind,
    /// Scenario used by feedback requests that do not name one.
    #[serde(default)]
    pub default_scenario: Option<Scenario>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
pub struct FeedbackOptions {
    /// Only the scenario preset, without its variants.
    pub preset_only: bool,
    /// Second input for the paired postulates (uniformity).
    pub paired: Option<String>,
    /// Explicit configuration; replaces the preset and its variants.
    pub config: Option<ScenarioConfig>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct FeedbackRequest {
    pub text: String,
    #[serde(default)]
    pub scenario: Option<Scenario>,
    #[serde(default)]
    pub options: FeedbackOptions,
}

/// One committed revision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub seq: usize,
    pub timestamp: u64,
    pub proposal_id: String,
    pub outcome_id: String,
    /// The feedback rule as `id: body => head`.
    pub feedback: String,
    pub scenario: String,
    pub config: ScenarioConfig,
    pub accepted: bool,
    pub metrics_after: KBMetrics,
    pub kb_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakenedPair {
    pub old: Rule,
    pub new: Rule,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diff {
    pub added: Vec<Rule>,
    pub removed: Vec<Rule>,
    pub weakened: Vec<WeakenedPair>,
}

impl Diff {
    pub fn between(before: &ExplanationKB, after: &ExplanationKB, trace: &Trace) -> Diff {
        let old_ids: BTreeSet<&str> = trace.weakened.iter().map(|w| w.old.as_str()).collect();
        let new_ids: BTreeSet<&str> = trace.weakened.iter().map(|w| w.new.id.as_str()).collect();
        let removed = before
            .rules()
            .filter(|r| !old_ids.contains(r.id.as_str()))
            .filter(|r| after.get(&r.id).is_none_or(|a| a.key() != r.key()))
            .cloned()
            .collect();
        let added = after
            .rules()
            .filter(|r| !new_ids.contains(r.id.as_str()))
            .filter(|r| before.get(&r.id).is_none_or(|b| b.key() != r.key()))
            .cloned()
            .collect();
        let weakened = trace
            .weakened
            .iter()
            .filter_map(|w| Some(WeakenedPair { old: before.get(&w.old)?.clone(), new: w.new.clone() }))
            .collect();
        Diff { added, removed, weakened }
    }

    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty() && self.weakened.is_empty()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Candidate {
    pub outcome_id: String,
    pub label: String,
    pub config: ScenarioConfig,
    pub accepted: bool,
    /// Whether the resulting KB is consistent in session scope, which a
    /// commit requires.
    pub committable: bool,
    pub trace: Trace,
    pub diff: Diff,
    pub conflicts_found: Vec<ConflictWitness>,
    pub metrics: KBMetrics,
    pub postulates: Vec<PostulateVerdict>,
    pub kb_text: String,
    #[serde(skip)]
    pub kb_after: ExplanationKB,
}

#[derive(Debug, Clone, Serialize)]
pub struct Proposal {
    pub proposal_id: String,
    pub input: Rule,
    /// History length of the state the candidates were computed from.
    pub base_seq: usize,
    pub candidates: Vec<Candidate>,
    pub committed: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RuleView {
    pub id: String,
    pub origin: xkb_core::language::Origin,
    pub part: &'static str,
    pub text: String,
    pub tau: CoherenceValue,
}

#[derive(Debug, Clone, Serialize)]
pub struct SessionView {
    pub session_id: String,
    pub created_at: u64,
    pub scope: ScopeKind,
    pub default_scenario: Scenario,
    pub schema: Schema,
    pub kb_text: String,
    pub rules: Vec<RuleView>,
    pub conflicts: Vec<ConflictWitness>,
    pub metrics: KBMetrics,
    pub warnings: Vec<String>,
    pub history_len: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub created_at: u64,
    pub scope: ScopeKind,
    pub history_len: usize,
    pub kb_text: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct DriftPoint {
    pub seq: usize,
    pub drift: Fraction,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HistoryView {
    pub session_id: String,
    pub initial_drift: Fraction,
    pub entries: Vec<HistoryEntry>,
    /// Drift after each commit, aligned with `entries`.
    pub drift_series: Vec<DriftPoint>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RuleCheck {
    pub id: String,
    pub text: String,
    pub canonical: String,
    pub body_satisfiable: bool,
    pub tau: CoherenceValue,
    /// Rules of the current KB the input conflicts with.
    pub conflicts: Vec<ConflictWitness>,
    pub self_conflict: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionState {
    pub id: String,
    pub created_at: u64,
    pub scope: ScopeKind,
    pub default_scenario: Scenario,
    pub table: ClassifierTable,
    pub original: ExplanationKB,
    pub kb: ExplanationKB,
    pub history: Vec<HistoryEntry>,
}

impl SessionState {
    /// Builds a session from a table and a KB document. A KB without `data`
    /// rules gets K_d derived from the table. The KB must be consistent in the
    /// session scope.
    pub fn create(req: CreateSession, id: String, now: u64) -> Result<SessionState, ApiError> {
        let text = match &req.schema {
            Some(schema) if !starts_with_schema(&req.kb_text) => format!("{}{}", render_schema(schema), req.kb_text),
            _ => req.kb_text.clone(),
        };
        let doc = parse_document(&text)?;
        if let Some(schema) = &req.schema {
            if *schema != doc.schema {
                return Err(ApiError::bad_request("schema does not match the schema block of kb_text"));
            }
        }
        let table = load_table(req.table_csv.as_bytes(), &doc.schema)?;
        let has_kd = doc.rules.iter().any(|r| r.origin == xkb_core::language::Origin::Data);
        let kb = if has_kd {
            ExplanationKB::from_document(doc)?
        } else {
            ExplanationKB::from_table(&table, doc.rules)?
        };
        let report = Reasoner::new(kb.schema(), req.scope.bind(&table))?.check_consistency(&kb.all_rules())?;
        if !report.consistent {
            let pairs: Vec<String> = report
                .edges
                .iter()
                .map(|e| format!("{}/{}", e.rule_a, e.rule_b))
                .chain(report.self_loops.iter().map(|s| s.rule.clone()))
                .collect();
            return Err(ApiError::Unprocessable(format!(
                "knowledge base is inconsistent in {} scope: {}",
                scope_name(req.scope),
                pairs.join(", ")
            )));
        }
        Ok(SessionState {
            id,
            created_at: now,
            scope: req.scope,
            default_scenario: req.default_scenario.unwrap_or(Scenario::S1),
            table,
            original: kb.clone(),
            kb,
            history: Vec::new(),
        })
    }

    pub fn schema(&self) -> &Schema {
        self.kb.schema()
    }

    pub fn reasoner(&self) -> Reasoner<'_> {
        Reasoner::new(self.kb.schema(), self.scope.bind(&self.table)).expect("session schema matches its table")
    }

    pub fn metrics(&self) -> Result<KBMetrics, ApiError> {
        Ok(metrics(&self.kb, &self.table, self.scope.bind(&self.table))?)
    }

    pub fn summary(&self) -> SessionSummary {
        SessionSummary {
            session_id: self.id.clone(),
            created_at: self.created_at,
            scope: self.scope,
            history_len: self.history.len(),
            kb_text: self.kb.render(),
        }
    }

    pub fn view(&self) -> Result<SessionView, ApiError> {
        let metrics = self.metrics()?;
        let report = validate(&self.kb, &self.table, self.scope.bind(&self.table))?;
        let rules = self
            .kb
            .rules()
            .map(|r| RuleView {
                id: r.id.clone(),
                origin: r.origin,
                part: if self.kb.is_kd(&r.id) { "kd" } else { "ke" },
                text: r.text(),
                tau: metrics.per_rule_tau[&r.id],
            })
            .collect();
        Ok(SessionView {
            session_id: self.id.clone(),
            created_at: self.created_at,
            scope: self.scope,
            default_scenario: self.default_scenario,
            schema: self.schema().clone(),
            kb_text: self.kb.render(),
            rules,
            conflicts: report.kb_consistency.edges,
            metrics,
            warnings: report.warnings,
            history_len: self.history.len(),
        })
    }

    fn parse_input(&self, text: &str) -> Result<Rule, ApiError> {
        Ok(parse_rule_fresh(self.schema(), text, |id| self.kb.contains_id(id))?)
    }

    /// Parses a feedback rule and previews its conflicts with the current KB.
    pub fn validate_rule(&self, text: &str) -> Result<RuleCheck, ApiError> {
        let rule = self.parse_input(text)?;
        let reasoner = self.reasoner();
        let compiled = reasoner.compile(&rule)?;
        let self_conflict = reasoner.self_conflict_point(&compiled).is_some();
        let mut conflicts = Vec::new();
        for k in self.kb.rules() {
            if let Some(w) = reasoner.conflict(&rule, k)? {
                conflicts.push(w);
            }
        }
        Ok(RuleCheck {
            id: rule.id.clone(),
            text: rule.text(),
            canonical: rule.key().to_string(),
            body_satisfiable: reasoner.is_satisfiable(&rule.body)?,
            tau: tau_coherence(&rule, &self.table)?,
            conflicts,
            self_conflict,
        })
    }

    /// Computes the candidates for a feedback rule without touching the state.
    pub fn propose(
        &self,
        req: &FeedbackRequest,
        mut fresh_id: impl FnMut() -> String,
    ) -> Result<Proposal, ApiError> {
        let input = self.parse_input(&req.text)?;
        let paired = match &req.options.paired {
            Some(text) => Some(self.parse_input(text)?),
            None => None,
        };
        let configs = match &req.options.config {
            Some(config) => {
                if config.scope != self.scope {
                    return Err(ApiError::Unprocessable(format!(
                        "configuration scope {} differs from the session scope {}",
                        scope_name(config.scope),
                        scope_name(self.scope)
                    )));
                }
                vec![config.clone()]
            }
            None => {
                let scenario = req.scenario.unwrap_or(self.default_scenario);
                if req.options.preset_only {
                    vec![ScenarioConfig::preset(scenario, self.scope)]
                } else {
                    ScenarioConfig::variants(scenario, self.scope)
                }
            }
        };
        let reasoner = self.reasoner();
        let mut candidates = Vec::with_capacity(configs.len());
        for config in configs {
            let outcome = scenario_revise(&self.table, &self.kb, &input, &config)?;
            let operator = Operator::Scenario { config: config.clone() };
            let postulates = check_all(Instance {
                table: &self.table,
                scope: self.scope,
                kb: &self.kb,
                input: &input,
                outcome: &outcome,
                operator: &operator,
                paired: paired.as_ref(),
            })?;
            let committable = reasoner.is_consistent(&outcome.kb_after.all_rules())?;
            candidates.push(candidate(&self.kb, fresh_id(), config, outcome, postulates, committable));
        }
        Ok(Proposal {
            proposal_id: fresh_id(),
            input,
            base_seq: self.history.len(),
            candidates,
            committed: None,
        })
    }

    /// The state after committing `outcome_id` of `proposal`.
    pub fn commit(&self, proposal: &Proposal, outcome_id: &str, now: u64) -> Result<SessionState, ApiError> {
        if let Some(done) = &proposal.committed {
            return Err(ApiError::Conflict(format!(
                "proposal {} was already committed (outcome {done})",
                proposal.proposal_id
            )));
        }
        if proposal.base_seq != self.history.len() {
            return Err(ApiError::Conflict(format!(
                "proposal {} is stale: computed at history length {}, now {}",
                proposal.proposal_id,
                proposal.base_seq,
                self.history.len()
            )));
        }
        let cand = proposal
            .candidates
            .iter()
            .find(|c| c.outcome_id == outcome_id)
            .ok_or_else(|| ApiError::NotFound(format!("no outcome {outcome_id} in proposal {}", proposal.proposal_id)))?;
        if !cand.committable {
            return Err(ApiError::Unprocessable(format!(
                "outcome {outcome_id} leaves the knowledge base inconsistent in {} scope",
                scope_name(self.scope)
            )));
        }
        let entry = HistoryEntry {
            seq: self.history.len() + 1,
            timestamp: now,
            proposal_id: proposal.proposal_id.clone(),
            outcome_id: cand.outcome_id.clone(),
            feedback: format!("{}: {}", proposal.input.id, proposal.input.text()),
            scenario: cand.label.clone(),
            config: cand.config.clone(),
            accepted: cand.accepted,
            metrics_after: cand.metrics.clone(),
            kb_text: cand.kb_text.clone(),
        };
        let mut next = self.clone();
        next.kb = cand.kb_after.clone();
        next.history.push(entry);
        Ok(next)
    }

    pub fn history_view(&self) -> Result<HistoryView, ApiError> {
        let initial = metrics(&self.original, &self.table, self.scope.bind(&self.table))?;
        Ok(HistoryView {
            session_id: self.id.clone(),
            initial_drift: initial.drift,
            entries: self.history.clone(),
            drift_series: self
                .history
                .iter()
                .map(|e| DriftPoint { seq: e.seq, drift: e.metrics_after.drift, value: e.metrics_after.drift.value() })
                .collect(),
        })
    }

    /// Replays every committed entry from the original KB and checks that the
    /// stored KB text and metrics are reproduced exactly.
    pub fn replay(&self) -> Result<ExplanationKB, String> {
        let mut kb = self.original.clone();
        for e in &self.history {
            let rule = xkb_core::language::parse_rule(kb.schema(), &e.feedback)
                .map_err(|err| format!("entry {}: {err}", e.seq))?;
            let out = scenario_revise(&self.table, &kb, &rule, &e.config).map_err(|err| format!("entry {}: {err}", e.seq))?;
            if out.kb_after.render() != e.kb_text {
                return Err(format!("entry {}: replayed KB differs from the recorded one", e.seq));
            }
            if out.metrics_after != e.metrics_after {
                return Err(format!("entry {}: replayed metrics differ from the recorded ones", e.seq));
            }
            kb = out.kb_after;
        }
        if kb.render() != self.kb.render() {
            return Err("replayed KB differs from the current KB".into());
        }
        Ok(kb)
    }
}

fn candidate(
    before: &ExplanationKB,
    outcome_id: String,
    config: ScenarioConfig,
    outcome: RevisionOutcome,
    postulates: Vec<PostulateVerdict>,
    committable: bool,
) -> Candidate {
    Candidate {
        outcome_id,
        label: config.label(),
        accepted: outcome.trace.accepted,
        committable,
        diff: Diff::between(before, &outcome.kb_after, &outcome.trace),
        kb_text: outcome.kb_after.render(),
        trace: outcome.trace,
        conflicts_found: outcome.conflicts_found,
        metrics: outcome.metrics_after,
        postulates,
        kb_after: outcome.kb_after,
        config,
    }
}

fn starts_with_schema(text: &str) -> bool {
    text.lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with("//"))
        .is_some_and(|l| l.starts_with("schema"))
}

pub fn scope_name(scope: ScopeKind) -> &'static str {
    match scope {
        ScopeKind::Full => "full",
        ScopeKind::Dataset => "dataset",
    }
}
