//! The three feedback settings as configured operators: S1 (feedback takes
//! priority), S2 (balanced, K_d protected), S3 (sceptical, K_M protected).

use serde::{Deserialize, Serialize};

use super::operators::{
    finish, incise, protected_plan, reject, selective_revise, Plan, Work,
};
use super::weaken::{shrink, weaken, WeakeningStrategy};
use super::{IncisionPolicy, ProtectedSet, RevisionEnv, RevisionOutcome, SelectionPolicy};
use crate::error::{Error, Result};
use crate::kb::{ClassifierTable, ExplanationKB};
use crate::language::Rule;
use crate::semantics::ScopeKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    S1,
    S2,
    S3,
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s1" => Ok(Scenario::S1),
            "s2" => Ok(Scenario::S2),
            "s3" => Ok(Scenario::S3),
            other => Err(Error::InvalidConfig(format!("unknown scenario {other} (use s1, s2 or s3)"))),
        }
    }
}

/// What happens to K_d instance rules that conflict with the feedback.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KdUpdate {
    #[default]
    ReplaceInstance,
    /// Refuse feedback that would remove K_d rules.
    Forbid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    /// Rules shielded from the revision; `None` uses the scenario default
    /// (S1 nothing, S2 K_d, S3 everything).
    pub protected: Option<ProtectedSet>,
    pub scope: ScopeKind,
    pub selection: SelectionPolicy,
    pub incision: IncisionPolicy,
    /// How the feedback rule itself may be weakened (S2, S3).
    pub weakening: WeakeningStrategy,
    /// How conflicting K_e rules are weakened instead of removed (S1, S2).
    /// `None` removes them.
    pub weaken_existing: Option<WeakeningStrategy>,
    pub kd_update: KdUpdate,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig::preset(Scenario::S1, ScopeKind::Full)
    }
}

impl ScenarioConfig {
    pub fn preset(scenario: Scenario, scope: ScopeKind) -> Self {
        ScenarioConfig {
            scenario,
            protected: None,
            scope,
            selection: SelectionPolicy::default(),
            incision: IncisionPolicy::default(),
            weakening: match scenario {
                Scenario::S3 => WeakeningStrategy::RejectOnly,
                _ => WeakeningStrategy::BodyRestriction,
            },
            weaken_existing: None,
            kd_update: KdUpdate::ReplaceInstance,
        }
    }

    /// The preset followed by its distinct weakening variants.
    pub fn variants(scenario: Scenario, scope: ScopeKind) -> Vec<ScenarioConfig> {
        let base = ScenarioConfig::preset(scenario, scope);
        let mut out = vec![base.clone()];
        match scenario {
            Scenario::S1 | Scenario::S2 => out.push(ScenarioConfig {
                weaken_existing: Some(WeakeningStrategy::BodyRestriction),
                ..base
            }),
            Scenario::S3 => {
                for s in [WeakeningStrategy::BodyRestriction, WeakeningStrategy::HeadExpansion] {
                    out.push(ScenarioConfig { weakening: s, ..base.clone() });
                }
            }
        }
        out
    }

    pub fn protected_set(&self) -> ProtectedSet {
        self.protected.clone().unwrap_or(match self.scenario {
            Scenario::S1 => ProtectedSet::Nothing,
            Scenario::S2 => ProtectedSet::Kd,
            Scenario::S3 => ProtectedSet::All,
        })
    }

    /// Short name such as `s1`, `s1+weaken_existing` or `s3+head_expansion`.
    pub fn label(&self) -> String {
        let mut label = match self.scenario {
            Scenario::S1 => "s1",
            Scenario::S2 => "s2",
            Scenario::S3 => "s3",
        }
        .to_string();
        if self.weaken_existing.is_some() {
            label.push_str("+weaken_existing");
        }
        let default_input = ScenarioConfig::preset(self.scenario, self.scope).weakening;
        if self.scenario != Scenario::S1 && self.weakening != default_input {
            label.push('+');
            label.push_str(match self.weakening {
                WeakeningStrategy::BodyRestriction => "body_restriction",
                WeakeningStrategy::HeadExpansion => "head_expansion",
                WeakeningStrategy::RejectOnly => "reject_only",
            });
        }
        label
    }
}

/// Revises `kb` by `r` in the configured setting.
pub fn scenario_revise(
    table: &ClassifierTable,
    kb: &ExplanationKB,
    r: &Rule,
    config: &ScenarioConfig,
) -> Result<RevisionOutcome> {
    let env = RevisionEnv::new(table, config.scope);
    let protected = config.protected_set();
    let mut out = match config.scenario {
        Scenario::S1 => s1(env, kb, r, config, &protected)?,
        Scenario::S2 => s2(env, kb, r, config, &protected)?,
        Scenario::S3 => {
            if let Some(q) = kb.rules().find(|q| !protected.contains(kb, &q.id)) {
                return Err(Error::InvalidConfig(format!(
                    "S3 protects the whole knowledge base, but {} is unprotected",
                    q.id
                )));
            }
            selective_revise(env, kb, r, config.weakening, &protected)?
        }
    };
    out.trace.operator = config.label();
    Ok(out)
}

/// Feedback first: kernel revision. Conflicting K_d instance rules are
/// replaced by the feedback; conflicting K_e rules are removed, or weakened
/// when `weaken_existing` is set.
fn s1(env: RevisionEnv<'_>, kb: &ExplanationKB, r: &Rule, config: &ScenarioConfig, protected: &ProtectedSet) -> Result<RevisionOutcome> {
    let w = Work::prepare(env, kb, Some(r))?;
    let input = w.input().clone();
    let n = w.n();
    let kd_hit: Vec<usize> = (0..n).filter(|&i| w.is_kd(i) && w.conflicts_input(i)).collect();
    if config.kd_update == KdUpdate::Forbid && !kd_hit.is_empty() {
        return Err(Error::KdUpdateForbidden(kd_hit.iter().map(|&i| w.k[i].id.clone()).collect()));
    }
    let p = w.protected(protected);
    let mut forced: Vec<usize> = (0..n).filter(|&i| w.graph.is_self_loop(i) || w.conflicts_input(i)).collect();
    if let Some(&i) = forced.iter().find(|i| p.contains(i)) {
        return Err(Error::InvalidConfig(format!("S1 feedback conflicts with protected rule {}", w.k[i].id)));
    }
    // Rules in conflict with a protected rule must go as well.
    for &q in &p {
        for u in w.graph.neighbors(q).filter(|&u| u < n) {
            if p.contains(&u) {
                return Err(Error::InvalidConfig(format!(
                    "protected rules {} and {} conflict",
                    w.k[q].id, w.k[u].id
                )));
            }
            if !forced.contains(&u) {
                forced.push(u);
            }
        }
    }
    let rest: Vec<usize> = (0..n).filter(|i| !forced.contains(i)).collect();
    let mut cut = incise(&w, &w.graph.induced_edges(&rest), &config.incision)?;
    cut.extend(forced);
    cut.sort_unstable();

    let mut plan = Plan::remove(n, cut.iter().copied()).with_effective(input.clone());
    if input.is_instance(kb.schema()) {
        for &i in &kd_hit {
            plan.notes.push(format!("instance rule {} replaced by {}", w.k[i].id, input.id));
        }
    }
    if let Some(strategy) = config.weaken_existing {
        let reasoner = w.reasoner();
        let mut placed: Vec<Rule> = Vec::new();
        for &i in &cut {
            if w.is_kd(i) || w.graph.is_self_loop(i) || !w.conflicts_input(i) {
                continue;
            }
            let q = &w.k[i];
            let mut blockers = vec![input.clone()];
            blockers.extend(w.graph.neighbors(i).filter(|u| *u < n && !cut.contains(u)).map(|u| w.k[u].clone()));
            for other in &placed {
                if reasoner.conflict(q, other)?.is_some() {
                    blockers.push(other.clone());
                }
            }
            if let Some(q2) = weaken(q, &blockers, strategy, kb.schema())? {
                placed.push(q2.clone());
                plan.weakened.push((i, q2));
            }
        }
    }
    finish(&w, Some(&input), plan, "s1")
}

/// Balanced: K_d is protected. Feedback that clashes with K_d is weakened
/// against everything it conflicts with and nothing is removed; otherwise it
/// is added and the conflicting unprotected rules are dropped (or weakened,
/// when `weaken_existing` is set and that loses less coverage than weakening
/// the feedback).
fn s2(env: RevisionEnv<'_>, kb: &ExplanationKB, r: &Rule, config: &ScenarioConfig, protected: &ProtectedSet) -> Result<RevisionOutcome> {
    let w = Work::prepare(env, kb, Some(r))?;
    let input = w.input().clone();
    let n = w.n();
    let p = w.protected(protected);
    let blockers: Vec<usize> = (0..n).filter(|&i| w.conflicts_input(i)).collect();
    let rules_of = |idx: &[usize]| idx.iter().map(|&i| w.k[i].clone()).collect::<Vec<_>>();

    if blockers.iter().any(|i| p.contains(i)) {
        return match weaken(&input, &rules_of(&blockers), config.weakening, kb.schema())? {
            Some(r2) => {
                let mut w2 = Work::prepare(env, kb, Some(&r2))?;
                w2.notes = w.notes.clone();
                let mut out = finish(&w2, Some(&input), Plan::remove(n, []).with_effective(r2), "s2")?;
                out.conflicts_found = w.conflicts();
                Ok(out)
            }
            None => reject(&w, &input, "s2", "feedback conflicts with protected rules and cannot be weakened".into()),
        };
    }

    let Some(strategy) = config.weaken_existing.filter(|_| !blockers.is_empty()) else {
        return finish(&w, Some(&input), protected_plan(&w, &p, &config.selection)?, "s2");
    };

    let input_option = match weaken(&input, &rules_of(&blockers), config.weakening, kb.schema())? {
        Some(r2) => Some((shrink(&input, &r2, env.table)?, r2)),
        None => None,
    };
    let mut existing_option = Some(((0u64, 0u128), Vec::new()));
    for &i in &blockers {
        let Some((cost, list)) = existing_option.as_mut() else { break };
        match weaken(&w.k[i], std::slice::from_ref(&input), strategy, kb.schema())? {
            Some(q2) => {
                let (d, u) = shrink(&w.k[i], &q2, env.table)?;
                *cost = (cost.0 + d, cost.1 + u);
                list.push((i, q2));
            }
            None => existing_option = None,
        }
    }
    match (input_option, existing_option) {
        (Some((ci, r2)), Some((ce, _))) if ci <= ce => weaken_input_branch(&w, env, kb, &input, r2, &p, config),
        (Some((_, r2)), None) => weaken_input_branch(&w, env, kb, &input, r2, &p, config),
        (_, Some((_, list))) => {
            let mut plan = protected_plan(&w, &p, &config.selection)?;
            let reasoner = w.reasoner();
            let mut kept: Vec<Rule> = (0..n).filter(|&i| plan.keep[i]).map(|i| w.k[i].clone()).collect();
            kept.push(input.clone());
            for (i, q2) in list {
                let mut clash = false;
                for other in &kept {
                    if reasoner.conflict(&q2, other)?.is_some() {
                        clash = true;
                        break;
                    }
                }
                if !clash {
                    kept.push(q2.clone());
                    plan.weakened.push((i, q2));
                }
            }
            finish(&w, Some(&input), plan, "s2")
        }
        (None, None) => finish(&w, Some(&input), protected_plan(&w, &p, &config.selection)?, "s2"),
    }
}

fn weaken_input_branch(
    w: &Work<'_>,
    env: RevisionEnv<'_>,
    kb: &ExplanationKB,
    input: &Rule,
    r2: Rule,
    p: &[usize],
    config: &ScenarioConfig,
) -> Result<RevisionOutcome> {
    let mut w2 = Work::prepare(env, kb, Some(&r2))?;
    w2.notes = w.notes.clone();
    let mut out = finish(&w2, Some(input), protected_plan(&w2, p, &config.selection)?, "s2")?;
    out.conflicts_found = w.conflicts();
    Ok(out)
}
