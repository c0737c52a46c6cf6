//! Rationality postulates for revising explanation knowledge bases, decided
//! per revision instance, plus exhaustive oracles and a randomized
//! conformance matrix.

pub mod generate;
pub mod matrix;
pub mod oracle;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kb::{ClassifierTable, ExplanationKB};
use crate::language::{Formula, Rule, RuleKey};
use crate::revision::{Operator, RevisionEnv, RevisionOutcome};
use crate::semantics::{CompiledRule, Reasoner, ScopeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PostulateId {
    Success,
    RelativeSuccess,
    WeakSuccess,
    ProxySuccess,
    WeakProxySuccess,
    Inclusion,
    WeakInclusion,
    InclusionS1,
    InclusionS2,
    InclusionS3,
    Consistency,
    ConsistencyPreservation,
    Relevance,
    CoreRetainment,
    Uniformity,
    NonWorsening,
}

impl PostulateId {
    pub const ALL: [PostulateId; 16] = [
        PostulateId::Success,
        PostulateId::RelativeSuccess,
        PostulateId::WeakSuccess,
        PostulateId::ProxySuccess,
        PostulateId::WeakProxySuccess,
        PostulateId::Inclusion,
        PostulateId::WeakInclusion,
        PostulateId::InclusionS1,
        PostulateId::InclusionS2,
        PostulateId::InclusionS3,
        PostulateId::Consistency,
        PostulateId::ConsistencyPreservation,
        PostulateId::Relevance,
        PostulateId::CoreRetainment,
        PostulateId::Uniformity,
        PostulateId::NonWorsening,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PostulateId::Success => "success",
            PostulateId::RelativeSuccess => "relative_success",
            PostulateId::WeakSuccess => "weak_success",
            PostulateId::ProxySuccess => "proxy_success",
            PostulateId::WeakProxySuccess => "weak_proxy_success",
            PostulateId::Inclusion => "inclusion",
            PostulateId::WeakInclusion => "weak_inclusion",
            PostulateId::InclusionS1 => "inclusion_s1",
            PostulateId::InclusionS2 => "inclusion_s2",
            PostulateId::InclusionS3 => "inclusion_s3",
            PostulateId::Consistency => "consistency",
            PostulateId::ConsistencyPreservation => "consistency_preservation",
            PostulateId::Relevance => "relevance",
            PostulateId::CoreRetainment => "core_retainment",
            PostulateId::Uniformity => "uniformity",
            PostulateId::NonWorsening => "non_worsening",
        }
    }

    /// Whether the postulate needs a second input to be decided.
    pub fn is_paired(self) -> bool {
        self == PostulateId::Uniformity
    }
}

impl fmt::Display for PostulateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PostulateId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        PostulateId::ALL
            .into_iter()
            .find(|p| p.name() == norm)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown postulate {s}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Holds,
    Fails,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// A rule not covered at a point.
    Point { rule: String, point: Vec<String> },
    /// A pair of rules in conflict; `rule_a == rule_b` for a self-conflict.
    Conflict { rule_a: String, rule_b: String, point: Vec<String> },
    /// Rules (by id) responsible for the failure.
    Rules { ids: Vec<String>, detail: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

impl Verdict {
    pub fn holds() -> Self {
        Verdict { status: Status::Holds, witness: None }
    }

    pub fn not_applicable() -> Self {
        Verdict { status: Status::NotApplicable, witness: None }
    }

    pub fn fails(witness: Witness) -> Self {
        Verdict { status: Status::Fails, witness: Some(witness) }
    }

    fn rules(ids: impl IntoIterator<Item = String>, detail: impl Into<String>) -> Self {
        Verdict::fails(Witness::Rules { ids: ids.into_iter().collect(), detail: detail.into() })
    }
}

/// A revision of `kb` by `input` with `operator`, yielding `outcome`.
/// `paired` is the second input used by uniformity.
#[derive(Clone, Copy)]
pub struct Instance<'a> {
    pub table: &'a ClassifierTable,
    pub scope: ScopeKind,
    pub kb: &'a ExplanationKB,
    pub input: &'a Rule,
    pub outcome: &'a RevisionOutcome,
    pub operator: &'a Operator,
    pub paired: Option<&'a Rule>,
}

impl<'a> Instance<'a> {
    fn env(&self) -> RevisionEnv<'a> {
        RevisionEnv::new(self.table, self.operator.scope(self.scope))
    }

    /// Revises `kb` by another input with the same operator.
    pub fn replay(&self, r: &Rule) -> Result<RevisionOutcome> {
        self.operator.revise(self.env(), self.kb, r)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PostulateVerdict {
    pub postulate: PostulateId,
    #[serde(flatten)]
    pub verdict: Verdict,
}

/// The rejection proxy: a rule with the input's head and an empty body.
/// Every rule enforces it and it conflicts with nothing.
pub fn rejection_proxy(r: &Rule) -> Rule {
    Rule { body: Formula::False, ..r.clone() }
}

fn keys<'r>(rules: impl IntoIterator<Item = &'r Rule>) -> BTreeSet<RuleKey> {
    rules.into_iter().map(Rule::key).collect()
}

/// Precomputed views of an instance shared by the individual checks.
struct Checker<'a> {
    inst: Instance<'a>,
    reasoner: Reasoner<'a>,
    k: Vec<Rule>,
    result: Vec<Rule>,
    k_keys: BTreeSet<RuleKey>,
    result_keys: BTreeSet<RuleKey>,
    input_key: RuleKey,
}

impl<'a> Checker<'a> {
    fn new(inst: Instance<'a>) -> Result<Self> {
        let scope = inst.operator.scope(inst.scope).bind(inst.table);
        let reasoner = Reasoner::new(inst.kb.schema(), scope)?;
        let k = inst.kb.all_rules();
        let result = inst.outcome.kb_after.all_rules();
        Ok(Checker {
            k_keys: keys(&k),
            result_keys: keys(&result),
            input_key: inst.input.key(),
            inst,
            reasoner,
            k,
            result,
        })
    }

    fn enforcement(&self, enforcing: &[Rule], enforced: &[Rule]) -> Result<Verdict> {
        let rep = self.reasoner.enforces(enforcing, enforced)?;
        Ok(match rep.counterexample {
            None => Verdict::holds(),
            Some(c) => Verdict::fails(Witness::Point { rule: c.rule, point: c.point }),
        })
    }

    fn consistency(&self, rules: &[Rule]) -> Result<Verdict> {
        let rep = self.reasoner.check_consistency(rules)?;
        if let Some(s) = rep.self_loops.first() {
            return Ok(Verdict::fails(Witness::Conflict {
                rule_a: s.rule.clone(),
                rule_b: s.rule.clone(),
                point: s.point.clone(),
            }));
        }
        Ok(match rep.edges.first() {
            None => Verdict::holds(),
            Some(e) => Verdict::fails(Witness::Conflict {
                rule_a: e.rule_a.clone(),
                rule_b: e.rule_b.clone(),
                point: e.point.clone(),
            }),
        })
    }

    fn k_with_input(&self) -> Vec<Rule> {
        let mut v = self.k.clone();
        v.push(self.inst.input.clone());
        v
    }

    fn without_keys(rules: &[Rule], drop: &BTreeSet<RuleKey>) -> Vec<Rule> {
        rules.iter().filter(|q| !drop.contains(&q.key())).cloned().collect()
    }

    /// Result rules that are neither in K nor the input.
    fn extras(&self) -> Vec<String> {
        self.result
            .iter()
            .filter(|q| q.key() != self.input_key && !self.k_keys.contains(&q.key()))
            .map(|q| q.id.clone())
            .collect()
    }

    /// One rule of K per key that is missing from the result.
    fn removed(&self) -> Vec<&Rule> {
        let mut seen = BTreeSet::new();
        self.k
            .iter()
            .filter(|q| !self.result_keys.contains(&q.key()) && seen.insert(q.key()))
            .collect()
    }

    fn proxy(&self) -> Rule {
        self.inst
            .outcome
            .trace
            .effective_input
            .clone()
            .unwrap_or_else(|| rejection_proxy(self.inst.input))
    }

    fn proxy_success(&self, require_weaker: bool) -> Result<Verdict> {
        let proxy = self.proxy();
        if require_weaker {
            let v = self.enforcement(std::slice::from_ref(self.inst.input), std::slice::from_ref(&proxy))?;
            if v.status == Status::Fails {
                return Ok(v);
            }
        }
        let v = self.enforcement(&self.result, std::slice::from_ref(&proxy))?;
        if v.status == Status::Fails {
            return Ok(v);
        }
        let replay = self.inst.replay(&proxy)?;
        let replay_keys = keys(&replay.kb_after.all_rules());
        if replay_keys != self.result_keys {
            let diff = replay_keys.symmetric_difference(&self.result_keys).map(|k| k.to_string());
            return Ok(Verdict::rules(diff, format!("revising by the proxy {} gives a different result", proxy.text())));
        }
        Ok(Verdict::holds())
    }

    fn compiled(&self, rules: &[Rule]) -> Result<Vec<CompiledRule>> {
        self.reasoner.compile_all(rules)
    }

    fn relevance(&self, core: bool) -> Result<Verdict> {
        let removed = self.removed();
        if removed.is_empty() {
            return Ok(Verdict::holds());
        }
        if !core {
            let extras = self.extras();
            if !extras.is_empty() {
                return Ok(Verdict::rules(extras, "result is not a subset of K ∪ {r}"));
            }
        }
        let base = self.k_with_input();
        let base_c = self.compiled(&base)?;
        let result_c = self.compiled(&self.result)?;
        let result_consistent = self.reasoner.is_consistent_compiled(&result_c);
        for q in removed {
            let qc = self.reasoner.compile(q)?;
            if self.reasoner.self_conflict_point(&qc).is_some() && (core || result_consistent) {
                continue;
            }
            let found = base_c.iter().any(|b| {
                self.reasoner.self_conflict_point(b).is_none()
                    && self.reasoner.conflict_point(b, &qc).is_some()
                    && (core
                        || (result_consistent && result_c.iter().all(|x| self.reasoner.conflict_point(b, x).is_none())))
            });
            if !found {
                let detail = if core {
                    "removed without conflicting any rule of K ∪ {r}"
                } else {
                    "removed although no consistent extension of the result clashes with it"
                };
                return Ok(Verdict::rules([q.id.clone()], detail));
            }
        }
        Ok(Verdict::holds())
    }

    fn uniformity(&self) -> Result<Verdict> {
        let Some(r2) = self.inst.paired else {
            return Ok(Verdict::not_applicable());
        };
        if !uniformity_antecedent(&self.reasoner, &self.k, self.inst.input, r2)? {
            return Ok(Verdict::not_applicable());
        }
        let other = self.inst.replay(r2)?;
        let other_keys = keys(&other.kb_after.all_rules());
        let a: BTreeSet<_> = self.k_keys.intersection(&self.result_keys).cloned().collect();
        let b: BTreeSet<_> = self.k_keys.intersection(&other_keys).cloned().collect();
        if a == b {
            return Ok(Verdict::holds());
        }
        let diff = a.symmetric_difference(&b).map(|k| k.to_string());
        Ok(Verdict::rules(diff, format!("K ∩ result differs when revising by {}", r2.text())))
    }

    fn conflict_count(&self, rules: &[Rule]) -> Result<usize> {
        let rep = self.reasoner.check_consistency(rules)?;
        Ok(rep.edges.len() + rep.self_loops.len())
    }

    fn check(&self, p: PostulateId) -> Result<Verdict> {
        let r = std::slice::from_ref(self.inst.input);
        match p {
            PostulateId::Success => self.enforcement(&self.result, r),
            PostulateId::RelativeSuccess => {
                if self.result_keys.contains(&self.input_key) || self.result_keys == self.k_keys {
                    Ok(Verdict::holds())
                } else {
                    Ok(Verdict::rules(self.extras(), "input absent and K changed"))
                }
            }
            PostulateId::WeakSuccess => {
                if self.reasoner.is_consistent(&self.k_with_input())? {
                    self.enforcement(&self.result, r)
                } else {
                    Ok(Verdict::not_applicable())
                }
            }
            PostulateId::ProxySuccess => self.proxy_success(true),
            PostulateId::WeakProxySuccess => self.proxy_success(false),
            PostulateId::Inclusion => {
                let extras = self.extras();
                Ok(if extras.is_empty() { Verdict::holds() } else { Verdict::rules(extras, "not in K ∪ {r}") })
            }
            PostulateId::WeakInclusion => {
                if self.result_keys.contains(&self.input_key) {
                    self.check(PostulateId::Inclusion)
                } else {
                    Ok(Verdict::not_applicable())
                }
            }
            PostulateId::InclusionS1 => {
                let drop = BTreeSet::from([self.input_key.clone()]);
                self.enforcement(&self.k, &Self::without_keys(&self.result, &drop))
            }
            PostulateId::InclusionS2 => self.enforcement(&self.k_with_input(), &self.result),
            PostulateId::InclusionS3 => self.enforcement(r, &Self::without_keys(&self.result, &self.k_keys)),
            PostulateId::Consistency => self.consistency(&self.result),
            PostulateId::ConsistencyPreservation => {
                if self.reasoner.is_consistent(&self.k)? {
                    self.consistency(&self.result)
                } else {
                    Ok(Verdict::not_applicable())
                }
            }
            PostulateId::Relevance => self.relevance(false),
            PostulateId::CoreRetainment => self.relevance(true),
            PostulateId::Uniformity => self.uniformity(),
            PostulateId::NonWorsening => {
                let (before, after) = (self.conflict_count(&self.k)?, self.conflict_count(&self.result)?);
                Ok(if after <= before {
                    Verdict::holds()
                } else {
                    Verdict::rules(Vec::new(), format!("conflict edges rose from {before} to {after}"))
                })
            }
        }
    }
}

/// Decides one postulate on an instance.
pub fn check_postulate(p: PostulateId, inst: Instance<'_>) -> Result<Verdict> {
    Checker::new(inst)?.check(p)
}

/// Decides every postulate on an instance, in [`PostulateId::ALL`] order.
pub fn check_all(inst: Instance<'_>) -> Result<Vec<PostulateVerdict>> {
    let c = Checker::new(inst)?;
    PostulateId::ALL
        .into_iter()
        .map(|p| Ok(PostulateVerdict { postulate: p, verdict: c.check(p)? }))
        .collect()
}

/// Fast form of the uniformity antecedent: every subset of `k` clashes with
/// `r` exactly when it clashes with `r2`. With pairwise conflicts this holds
/// iff both inputs agree on self-consistency and conflict with the same
/// self-consistent rules of `k`.
pub fn uniformity_antecedent(reasoner: &Reasoner<'_>, k: &[Rule], r: &Rule, r2: &Rule) -> Result<bool> {
    let kc = reasoner.compile_all(k)?;
    let (a, b) = (reasoner.compile(r)?, reasoner.compile(r2)?);
    let (la, lb) = (reasoner.self_conflict_point(&a).is_some(), reasoner.self_conflict_point(&b).is_some());
    if la != lb {
        return Ok(false);
    }
    if la {
        return Ok(true);
    }
    Ok(kc.iter().filter(|q| reasoner.self_conflict_point(q).is_none()).all(|q| {
        reasoner.conflict_point(q, &a).is_some() == reasoner.conflict_point(q, &b).is_some()
    }))
}
