//! Weakening a rule so that it stops conflicting with a set of blockers.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::kb::{ClassifierTable, Fraction};
use crate::language::{Formula, Rule, Schema};
use crate::semantics::{class_extent, Literal, Node, Reasoner};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeakeningStrategy {
    /// `body ∧ ¬(b1 ∨ ... ∨ bk) ⇒ head`: drop the points the blockers cover.
    BodyRestriction,
    /// `body ⇒ head ∨ h1 ∨ ... ∨ hk`: admit the blockers' classes.
    HeadExpansion,
    /// Never weaken; a blocked rule is rejected.
    RejectOnly,
}

/// A rule carries no information when its body is unsatisfiable over V or
/// its head denotes every class.
pub fn is_vacuous(rule: &Rule, schema: &Schema) -> Result<bool> {
    if class_extent(&rule.head, schema)?.is_full() {
        return Ok(true);
    }
    Ok(!Reasoner::full(schema).is_satisfiable(&rule.body)?)
}

/// Whether the body is unsatisfiable over V.
pub fn has_empty_body(rule: &Rule, schema: &Schema) -> Result<bool> {
    Ok(!Reasoner::full(schema).is_satisfiable(&rule.body)?)
}

/// Weakens `r` against `blockers`. With no blockers `r` is returned as is.
/// Otherwise returns `None` for [`WeakeningStrategy::RejectOnly`], for a
/// vacuous result, or when the result would still conflict with a blocker.
/// The returned rule keeps the id and origin of `r`.
pub fn weaken(r: &Rule, blockers: &[Rule], strategy: WeakeningStrategy, schema: &Schema) -> Result<Option<Rule>> {
    if blockers.is_empty() {
        return Ok(Some(r.clone()));
    }
    let candidate = match strategy {
        WeakeningStrategy::RejectOnly => return Ok(None),
        WeakeningStrategy::BodyRestriction => {
            let covered = Formula::or(blockers.iter().map(|b| b.body.clone()));
            Rule { body: Formula::and([r.body.clone(), Formula::not(covered)]), ..r.clone() }
        }
        WeakeningStrategy::HeadExpansion => {
            let head = Formula::or(std::iter::once(r.head.clone()).chain(blockers.iter().map(|b| b.head.clone())));
            Rule { head, ..r.clone() }
        }
    };
    if is_vacuous(&candidate, schema)? {
        return Ok(None);
    }
    let full = Reasoner::full(schema);
    let c = full.compile(&candidate)?;
    for b in blockers {
        if full.conflict_point(&c, &full.compile(b)?).is_some() {
            return Ok(None);
        }
    }
    Ok(Some(candidate))
}

/// How much of the original rule's coverage a replacement keeps, on the
/// table and on the full universe.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coverage {
    pub dataset_kept: Fraction,
    pub universe_kept: f64,
}

fn body_counts(before: &Rule, after: &Rule, table: &ClassifierTable) -> Result<(u64, u64, u128, u128)> {
    let schema = table.schema();
    let (b, a) = (Node::compile(&before.body, schema)?, Node::compile(&after.body, schema)?);
    let ds = Reasoner::dataset(table);
    let full = Reasoner::full(schema);
    Ok((
        ds.count(&[Literal::pos(&b)]) as u64,
        ds.count(&[Literal::pos(&a)]) as u64,
        full.count(&[Literal::pos(&b)]),
        full.count(&[Literal::pos(&a)]),
    ))
}

pub fn coverage(before: &Rule, after: &Rule, table: &ClassifierTable) -> Result<Coverage> {
    let (db, da, ub, ua) = body_counts(before, after, table)?;
    Ok(Coverage {
        dataset_kept: Fraction { num: da, den: db },
        universe_kept: if ub == 0 { 1.0 } else { ua as f64 / ub as f64 },
    })
}

/// Points lost by replacing `before` with `after`: (table rows, universe points).
pub fn shrink(before: &Rule, after: &Rule, table: &ClassifierTable) -> Result<(u64, u128)> {
    let (db, da, ub, ua) = body_counts(before, after, table)?;
    Ok((db.saturating_sub(da), ub.saturating_sub(ua)))
}
