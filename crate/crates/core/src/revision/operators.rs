use std::collections::{BTreeSet, HashSet};

use super::graph::{greedy_vertex_cover, min_vertex_cover, ConflictGraph};
use super::weaken::{coverage, has_empty_body, weaken, WeakeningStrategy};
use super::{
    CredibilityTest, IncisionPolicy, PriorityOrder, ProtectedSet, RevisionEnv, RevisionOutcome,
    SelectionPolicy, Trace, WeakenedRule, REMAINDER_CAP,
};
use crate::error::{Error, Result};
use crate::kb::{metrics, ExplanationKB};
use crate::language::{fresh_id, Formula, Origin, Rule};
use crate::semantics::{tau_coherence, ConflictWitness, Reasoner};

/// K (K_d then K_e) and optionally the input, with their conflict graph. The
/// input, when present, is the last vertex.
pub(crate) struct Work<'a> {
    pub env: RevisionEnv<'a>,
    pub kb: &'a ExplanationKB,
    pub k: Vec<Rule>,
    pub r: Option<Rule>,
    pub graph: ConflictGraph,
    pub notes: Vec<String>,
}

impl<'a> Work<'a> {
    /// Builds the graph of K ∪ {r}. An input whose id is taken in K is
    /// renamed; an input that conflicts with itself is an error.
    pub fn prepare(env: RevisionEnv<'a>, kb: &'a ExplanationKB, r: Option<&Rule>) -> Result<Self> {
        env.check(kb)?;
        let mut notes = Vec::new();
        let r = match r {
            Some(r) => {
                r.check_schema(kb.schema())?;
                let mut r = r.clone();
                if kb.contains_id(&r.id) {
                    let id = fresh_id("fb", |id| kb.contains_id(id));
                    notes.push(format!("input id {} is taken; renamed to {id}", r.id));
                    r.id = id;
                }
                Some(r)
            }
            None => None,
        };
        let k = kb.all_rules();
        let mut all = k.clone();
        all.extend(r.clone());
        let reasoner = env.reasoner();
        let graph = ConflictGraph::build(&reasoner, &all)?;
        if let Some(input) = &r {
            if graph.is_self_loop(k.len()) {
                return Err(Error::InputSelfInconsistent(input.id.clone()));
            }
        }
        Ok(Work { env, kb, k, r, graph, notes })
    }

    pub fn n(&self) -> usize {
        self.k.len()
    }

    pub fn input(&self) -> &Rule {
        self.r.as_ref().expect("work prepared with an input")
    }

    pub fn reasoner(&self) -> Reasoner<'a> {
        self.env.reasoner()
    }

    pub fn is_kd(&self, i: usize) -> bool {
        i < self.kb.kd().len()
    }

    pub fn conflicts_input(&self, i: usize) -> bool {
        self.graph.adjacent(i, self.n())
    }

    pub fn protected(&self, protected: &ProtectedSet) -> Vec<usize> {
        (0..self.n()).filter(|&i| protected.contains(self.kb, &self.k[i].id)).collect()
    }

    /// Indices of K, most protected first.
    pub fn priority(&self, order: &PriorityOrder) -> Result<Vec<usize>> {
        let mut taus = Vec::with_capacity(self.n());
        for r in &self.k {
            taus.push(tau_coherence(r, self.env.table)?.value().unwrap_or(1.0));
        }
        let mut idx: Vec<usize> = (0..self.n()).collect();
        let default_key = |i: &usize| (!self.is_kd(*i), std::cmp::Reverse(OrdF64(taus[*i])), self.k[*i].id.clone());
        match order {
            PriorityOrder::DataFirst => idx.sort_by_key(default_key),
            PriorityOrder::Explicit { ranking } => idx.sort_by_key(|i| {
                let pos = ranking.iter().position(|id| *id == self.k[*i].id).unwrap_or(usize::MAX);
                (pos, default_key(i))
            }),
        }
        Ok(idx)
    }

    pub fn conflicts(&self) -> Vec<ConflictWitness> {
        self.graph.edges.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// What an operator decided, before it is turned into a KB.
pub(crate) struct Plan {
    pub keep: Vec<bool>,
    pub weakened: Vec<(usize, Rule)>,
    pub effective: Option<Rule>,
    pub notes: Vec<String>,
}

impl Plan {
    pub fn keep_only(n: usize, kept: impl IntoIterator<Item = usize>) -> Self {
        let mut keep = vec![false; n];
        kept.into_iter().for_each(|i| keep[i] = true);
        Plan { keep, weakened: Vec::new(), effective: None, notes: Vec::new() }
    }

    pub fn remove(n: usize, removed: impl IntoIterator<Item = usize>) -> Self {
        let mut keep = vec![true; n];
        removed.into_iter().for_each(|i| keep[i] = false);
        Plan { keep, weakened: Vec::new(), effective: None, notes: Vec::new() }
    }

    pub fn with_effective(mut self, r: Rule) -> Self {
        self.effective = Some(r);
        self
    }
}

/// Turns a plan into an outcome. `input` is the rule reported in the trace.
pub(crate) fn finish(w: &Work<'_>, input: Option<&Rule>, plan: Plan, operator: &str) -> Result<RevisionOutcome> {
    let schema = w.kb.schema();
    let kd_len = w.kb.kd().len();
    let mut taken: HashSet<String> = w.k.iter().map(|r| r.id.clone()).collect();
    taken.extend(w.r.iter().map(|r| r.id.clone()));
    if let Some(i) = input {
        taken.insert(i.id.clone());
    }
    let (mut kd, mut ke, mut derived_from_kd) = (Vec::new(), Vec::new(), Vec::new());
    let mut weakened = Vec::new();
    let mut removed = Vec::new();
    for (i, rule) in w.k.iter().enumerate() {
        if plan.keep[i] {
            if i < kd_len { kd.push(rule.clone()) } else { ke.push(rule.clone()) }
        } else if let Some((_, new)) = plan.weakened.iter().find(|(j, _)| *j == i) {
            let id = fresh_id(&format!("{}_w", rule.id), |id| taken.contains(id));
            taken.insert(id.clone());
            let new = new.clone().with_id(id).with_origin(Origin::Derived);
            weakened.push(WeakenedRule { old: rule.id.clone(), new: new.clone() });
            if i < kd_len { derived_from_kd.push(new) } else { ke.push(new) }
        } else {
            removed.push(rule.id.clone());
        }
    }
    ke.splice(0..0, derived_from_kd);
    let mut notes = w.notes.clone();
    notes.extend(plan.notes);
    let mut effective = plan.effective;
    if let Some(e) = &mut effective {
        let key = e.key();
        if let Some(dup) = kd.iter().chain(&ke).find(|q| q.key() == key) {
            notes.push(format!("input already present as {}", dup.id));
            *e = dup.clone();
        } else if e.is_instance(schema) {
            e.origin = Origin::Data;
            kd.push(e.clone());
        } else {
            if e.origin == Origin::Data {
                e.origin = Origin::Feedback;
            }
            ke.push(e.clone());
        }
    }
    let kb_after = ExplanationKB::new(schema.clone(), kd, ke)?;
    let input_coverage = match input {
        Some(r) => {
            let kept = effective.clone().unwrap_or_else(|| Rule { body: Formula::False, ..r.clone() });
            Some(coverage(r, &kept, w.env.table)?)
        }
        None => None,
    };
    let metrics_after = metrics(&kb_after, w.env.table, w.env.scope.bind(w.env.table))?;
    Ok(RevisionOutcome {
        kb_after,
        trace: Trace {
            operator: operator.to_string(),
            input: input.cloned(),
            accepted: effective.is_some(),
            effective_input: effective,
            removed,
            weakened,
            input_coverage,
            notes,
        },
        conflicts_found: w.conflicts(),
        metrics_after,
    })
}

/// The input is not incorporated and K is returned verbatim.
pub(crate) fn reject(w: &Work<'_>, input: &Rule, operator: &str, note: String) -> Result<RevisionOutcome> {
    let mut out = finish(w, Some(input), Plan::remove(w.n(), []), operator)?;
    out.kb_after = w.kb.clone();
    out.trace.notes.push(note);
    Ok(out)
}

/// Picks the kept subset of `allowed` (all compatible with `fixed`).
pub(crate) fn select(w: &Work<'_>, allowed: &[usize], fixed: &[usize], selection: &SelectionPolicy) -> Result<Vec<usize>> {
    let intersect = |sets: Vec<&Vec<usize>>| -> Vec<usize> {
        let mut it = sets.into_iter();
        let first: BTreeSet<usize> = it.next().map(|s| s.iter().copied().collect()).unwrap_or_default();
        it.fold(first, |acc, s| acc.intersection(&s.iter().copied().collect()).copied().collect())
            .into_iter()
            .collect()
    };
    Ok(match selection {
        SelectionPolicy::FullMeet => {
            let sets = w.graph.maximal_independent_sets(allowed, REMAINDER_CAP)?;
            intersect(sets.iter().collect())
        }
        SelectionPolicy::MaxCardinality => {
            let sets = w.graph.maximal_independent_sets(allowed, REMAINDER_CAP)?;
            let max = sets.iter().map(Vec::len).max().unwrap_or(0);
            intersect(sets.iter().filter(|s| s.len() == max).collect())
        }
        SelectionPolicy::PriorityLexicographic { order } => {
            let order: Vec<usize> = w.priority(order)?.into_iter().filter(|i| allowed.contains(i)).collect();
            w.graph.greedy_independent(fixed, &order)
        }
    })
}

/// Cuts every edge in `edges` according to the incision policy.
pub(crate) fn incise(w: &Work<'_>, edges: &[(usize, usize)], incision: &IncisionPolicy) -> Result<Vec<usize>> {
    match incision {
        IncisionPolicy::MinVertexCoverExact { limit } => {
            let mut order = w.priority(&PriorityOrder::DataFirst)?;
            order.reverse();
            min_vertex_cover(edges, &order, *limit)
        }
        IncisionPolicy::GreedyDegree { order } => {
            let mut order = w.priority(order)?;
            order.reverse();
            Ok(greedy_vertex_cover(edges, &order, |v| u8::from(w.is_kd(v))))
        }
    }
}

fn rule_set_kb(reasoner: &Reasoner<'_>, k: &[Rule]) -> Result<ExplanationKB> {
    ExplanationKB::new(reasoner.schema.clone(), Vec::new(), k.to_vec())
}

fn graph_work<'a>(reasoner: &Reasoner<'a>, kb: &'a ExplanationKB, r: &Rule) -> Result<(Vec<Rule>, ConflictGraph)> {
    let mut all = kb.all_rules();
    let k = all.clone();
    all.push(r.clone());
    Ok((k, ConflictGraph::build(reasoner, &all)?))
}

/// All maximal subsets of `k` consistent with `r`, as id lists. Empty when `r`
/// conflicts with itself.
pub fn remainders(reasoner: &Reasoner<'_>, k: &[Rule], r: &Rule, cap: usize) -> Result<Vec<Vec<String>>> {
    let kb = rule_set_kb(reasoner, k)?;
    let (k, graph) = graph_work(reasoner, &kb, r)?;
    let n = k.len();
    if graph.is_self_loop(n) {
        return Ok(Vec::new());
    }
    let allowed: Vec<usize> = (0..n).filter(|&i| !graph.is_self_loop(i) && !graph.adjacent(i, n)).collect();
    let sets = graph.maximal_independent_sets(&allowed, cap)?;
    Ok(sets.into_iter().map(|s| s.into_iter().map(|i| k[i].id.clone()).collect()).collect())
}

/// All minimal subsets of `k` inconsistent with `r`, as id lists: rules in
/// conflict with `r` or with themselves, and conflicting pairs of other rules.
pub fn kernels(reasoner: &Reasoner<'_>, k: &[Rule], r: &Rule) -> Result<Vec<Vec<String>>> {
    let kb = rule_set_kb(reasoner, k)?;
    let (k, graph) = graph_work(reasoner, &kb, r)?;
    let n = k.len();
    if graph.is_self_loop(n) {
        return Ok(vec![Vec::new()]);
    }
    let single: Vec<bool> = (0..n).map(|i| graph.is_self_loop(i) || graph.adjacent(i, n)).collect();
    let mut out: Vec<Vec<usize>> = (0..n).filter(|&i| single[i]).map(|i| vec![i]).collect();
    let rest: Vec<usize> = (0..n).filter(|&i| !single[i]).collect();
    out.extend(graph.induced_edges(&rest).into_iter().map(|(a, b)| vec![a, b]));
    out.sort();
    Ok(out.into_iter().map(|s| s.into_iter().map(|i| k[i].id.clone()).collect()).collect())
}

/// K ∪ {r}, whatever the conflicts.
pub fn expansion(env: RevisionEnv<'_>, kb: &ExplanationKB, r: &Rule) -> Result<RevisionOutcome> {
    let w = Work::prepare(env, kb, Some(r))?;
    let plan = Plan::remove(w.n(), []).with_effective(w.input().clone());
    finish(&w, Some(w.input()), plan, "expansion")
}

fn partial_meet_core(w: &Work<'_>, selection: &SelectionPolicy, operator: &str) -> Result<RevisionOutcome> {
    let n = w.n();
    let allowed: Vec<usize> = (0..n).filter(|&i| !w.graph.is_self_loop(i) && !w.conflicts_input(i)).collect();
    let kept = select(w, &allowed, &[n], selection)?;
    let plan = Plan::keep_only(n, kept).with_effective(w.input().clone());
    finish(w, Some(w.input()), plan, operator)
}

/// (⋂ γ(K ⊥ r)) ∪ {r}.
pub fn partial_meet_revise(
    env: RevisionEnv<'_>,
    kb: &ExplanationKB,
    r: &Rule,
    selection: &SelectionPolicy,
) -> Result<RevisionOutcome> {
    let w = Work::prepare(env, kb, Some(r))?;
    partial_meet_core(&w, selection, "partial_meet")
}

/// Rules that must go for `r` to fit (conflicting with it or with
/// themselves), plus an incision of the remaining pairwise conflicts.
pub(crate) fn kernel_cut(w: &Work<'_>, incision: &IncisionPolicy) -> Result<Vec<usize>> {
    let n = w.n();
    let forced: Vec<usize> = (0..n).filter(|&i| w.graph.is_self_loop(i) || w.conflicts_input(i)).collect();
    let rest: Vec<usize> = (0..n).filter(|i| !forced.contains(i)).collect();
    let mut cut = incise(w, &w.graph.induced_edges(&rest), incision)?;
    cut.extend(forced);
    cut.sort_unstable();
    Ok(cut)
}

/// (K ∪ {r}) ∖ σ(K ⊥⊥ r).
pub fn kernel_revise(env: RevisionEnv<'_>, kb: &ExplanationKB, r: &Rule, incision: &IncisionPolicy) -> Result<RevisionOutcome> {
    let w = Work::prepare(env, kb, Some(r))?;
    let cut = kernel_cut(&w, incision)?;
    let plan = Plan::remove(w.n(), cut).with_effective(w.input().clone());
    finish(&w, Some(w.input()), plan, "kernel")
}

/// Restores consistency of K by removing an incision of its conflicts.
pub fn consolidate(env: RevisionEnv<'_>, kb: &ExplanationKB, incision: &IncisionPolicy) -> Result<RevisionOutcome> {
    let w = Work::prepare(env, kb, None)?;
    let n = w.n();
    let forced: Vec<usize> = (0..n).filter(|&i| w.graph.is_self_loop(i)).collect();
    let rest: Vec<usize> = (0..n).filter(|i| !forced.contains(i)).collect();
    let mut cut = incise(&w, &w.graph.induced_edges(&rest), incision)?;
    cut.extend(forced);
    finish(&w, None, Plan::remove(n, cut), "consolidate")
}

/// Keeps every protected rule and the input, plus the selected compatible
/// unprotected rules.
pub(crate) fn protected_plan(w: &Work<'_>, protected: &[usize], selection: &SelectionPolicy) -> Result<Plan> {
    let n = w.n();
    let mut fixed = protected.to_vec();
    fixed.push(n);
    let allowed: Vec<usize> = (0..n)
        .filter(|i| {
            !protected.contains(i)
                && !w.graph.is_self_loop(*i)
                && fixed.iter().all(|&f| !w.graph.adjacent(f, *i))
        })
        .collect();
    let mut kept = select(w, &allowed, &fixed, selection)?;
    kept.extend_from_slice(protected);
    Ok(Plan::keep_only(n, kept).with_effective(w.input().clone()))
}

pub(crate) fn protected_core(
    w: &Work<'_>,
    input: &Rule,
    protected: &[usize],
    selection: &SelectionPolicy,
    operator: &str,
) -> Result<RevisionOutcome> {
    finish(w, Some(input), protected_plan(w, protected, selection)?, operator)
}

pub(crate) fn empty_body_note() -> String {
    "input body is unsatisfiable; nothing to incorporate".into()
}

/// Screened revision: rejects `r` when it clashes with the protected rules,
/// otherwise revises only the unprotected part.
pub fn screened_revise(
    env: RevisionEnv<'_>,
    kb: &ExplanationKB,
    r: &Rule,
    protected: &ProtectedSet,
    selection: &SelectionPolicy,
) -> Result<RevisionOutcome> {
    let w = Work::prepare(env, kb, Some(r))?;
    let input = w.input().clone();
    if has_empty_body(&input, kb.schema())? {
        return reject(&w, &input, "screened", empty_body_note());
    }
    let p = w.protected(protected);
    let mut fixed = p.clone();
    fixed.push(w.n());
    if !w.graph.is_independent(&fixed) {
        return reject(&w, &input, "screened", "input is inconsistent with the protected rules".into());
    }
    protected_core(&w, &input, &p, selection, "screened")
}

/// Rejects inputs failing the credibility test, otherwise partial meet.
pub fn credibility_limited_revise(
    env: RevisionEnv<'_>,
    kb: &ExplanationKB,
    r: &Rule,
    test: CredibilityTest,
    selection: &SelectionPolicy,
) -> Result<RevisionOutcome> {
    let w = Work::prepare(env, kb, Some(r))?;
    let input = w.input().clone();
    let op = "credibility_limited";
    if has_empty_body(&input, kb.schema())? {
        return reject(&w, &input, op, empty_body_note());
    }
    let credible = match test {
        CredibilityTest::ConsistentWithKd => {
            let mut s: Vec<usize> = (0..kb.kd().len()).collect();
            s.push(w.n());
            w.graph.is_independent(&s)
        }
        CredibilityTest::TauCoherent { threshold } => tau_coherence(&input, env.table)?.meets(threshold),
        CredibilityTest::AlwaysCredible => true,
    };
    if !credible {
        return reject(&w, &input, op, "input failed the credibility test".into());
    }
    partial_meet_core(&w, selection, op)
}

/// Selective revision: weakens the input against the protected rules it
/// conflicts with, then incorporates the weakened rule, dropping only
/// unprotected rules.
pub fn selective_revise(
    env: RevisionEnv<'_>,
    kb: &ExplanationKB,
    r: &Rule,
    strategy: WeakeningStrategy,
    protected: &ProtectedSet,
) -> Result<RevisionOutcome> {
    let w = Work::prepare(env, kb, Some(r))?;
    let input = w.input().clone();
    let op = "selective";
    if has_empty_body(&input, kb.schema())? {
        return reject(&w, &input, op, empty_body_note());
    }
    let p = w.protected(protected);
    let blockers: Vec<Rule> = p.iter().filter(|&&i| w.conflicts_input(i)).map(|&i| w.k[i].clone()).collect();
    let Some(r2) = weaken(&input, &blockers, strategy, kb.schema())? else {
        let ids: Vec<&str> = blockers.iter().map(|b| b.id.as_str()).collect();
        return reject(&w, &input, op, format!("no acceptable weakening against {}", ids.join(", ")));
    };
    let selection = SelectionPolicy::default();
    if r2 == input {
        return protected_core(&w, &input, &p, &selection, op);
    }
    let mut w2 = Work::prepare(env, kb, Some(&r2))?;
    w2.notes = w.notes.clone();
    let mut out = protected_core(&w2, &input, &p, &selection, op)?;
    out.conflicts_found = w.conflicts();
    Ok(out)
}
