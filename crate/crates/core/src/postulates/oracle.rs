//! Exhaustive oracles. They evaluate formulas point by point and enumerate
//! subsets directly, sharing nothing with the solver or the conflict graph,
//! and exist to cross-check the fast paths.

use crate::error::{Error, Result};
use crate::kb::ClassifierTable;
use crate::language::{ClassFormula, Formula, Rule, Schema};
use crate::semantics::{eval, DataPoint, ScopeKind};

/// Largest rule set handed to a subset oracle.
pub const SUBSET_LIMIT: usize = 12;
/// Largest universe enumerated point by point.
pub const UNIVERSE_LIMIT: u64 = 729;

/// Points of the scope: every point of V (bounded by [`UNIVERSE_LIMIT`]), or
/// the table rows.
pub fn points(schema: &Schema, scope: ScopeKind, table: Option<&ClassifierTable>) -> Result<Vec<DataPoint>> {
    match scope {
        ScopeKind::Dataset => {
            let table = table.ok_or_else(|| Error::OracleLimit("dataset scope needs a table".into()))?;
            Ok(table.iter().map(|(p, _)| p.clone()).collect())
        }
        ScopeKind::Full => {
            let size = schema.universe_size();
            if size > UNIVERSE_LIMIT {
                return Err(Error::OracleLimit(format!("universe of {size} points exceeds {UNIVERSE_LIMIT}")));
            }
            let dims: Vec<u32> = (0..schema.feature_count()).map(|f| schema.domain_size(f) as u32).collect();
            let mut cur = vec![0u32; dims.len()];
            let mut out = Vec::with_capacity(size as usize);
            loop {
                out.push(DataPoint(cur.clone()));
                let mut f = dims.len();
                loop {
                    if f == 0 {
                        return Ok(out);
                    }
                    f -= 1;
                    cur[f] += 1;
                    if cur[f] < dims[f] {
                        break;
                    }
                    cur[f] = 0;
                }
            }
        }
    }
}

/// Membership of each class in the extent of `head`.
pub fn head_classes(head: &ClassFormula, schema: &Schema) -> Vec<bool> {
    fn holds(f: &ClassFormula, c: &str) -> bool {
        match f {
            Formula::True => true,
            Formula::False => false,
            Formula::Atom(a) => a.0 == c,
            Formula::Not(x) => !holds(x, c),
            Formula::And(xs) => xs.iter().all(|x| holds(x, c)),
            Formula::Or(xs) => xs.iter().any(|x| holds(x, c)),
        }
    }
    schema.classes().iter().map(|c| holds(head, c)).collect()
}

/// A pair of rules (possibly the same rule twice) firing together at `point`
/// with disjoint heads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Def3Violation {
    pub rule_a: String,
    pub rule_b: String,
    pub point: DataPoint,
}

/// Body truth of every rule at every point, and head extents, evaluated once.
pub struct Def3Table {
    points: Vec<DataPoint>,
    fires: Vec<Vec<bool>>,
    heads: Vec<Vec<bool>>,
    ids: Vec<String>,
}

impl Def3Table {
    pub fn new(schema: &Schema, points: Vec<DataPoint>, rules: &[Rule]) -> Result<Self> {
        let mut fires = Vec::with_capacity(points.len());
        for p in &points {
            let row = rules.iter().map(|r| eval(&r.body, schema, p)).collect::<Result<Vec<_>>>()?;
            fires.push(row);
        }
        Ok(Def3Table {
            points,
            fires,
            heads: rules.iter().map(|r| head_classes(&r.head, schema)).collect(),
            ids: rules.iter().map(|r| r.id.clone()).collect(),
        })
    }

    fn disjoint(&self, i: usize, j: usize) -> bool {
        !self.heads[i].iter().zip(&self.heads[j]).any(|(a, b)| *a && *b)
    }

    /// The first violation of the consistency definition among the rules
    /// whose indices are in `members`.
    pub fn violation(&self, members: &[usize]) -> Option<Def3Violation> {
        for (p, row) in self.points.iter().zip(&self.fires) {
            let firing: Vec<usize> = members.iter().copied().filter(|&i| row[i]).collect();
            for (a, &i) in firing.iter().enumerate() {
                for &j in &firing[a..] {
                    if self.disjoint(i, j) {
                        return Some(Def3Violation {
                            rule_a: self.ids[i].clone(),
                            rule_b: self.ids[j].clone(),
                            point: p.clone(),
                        });
                    }
                }
            }
        }
        None
    }

    pub fn consistent(&self, members: &[usize]) -> bool {
        self.violation(members).is_none()
    }
}

/// Checks the consistency definition directly over the points of the scope.
pub fn def3(schema: &Schema, scope: ScopeKind, table: Option<&ClassifierTable>, rules: &[Rule]) -> Result<Option<Def3Violation>> {
    let t = Def3Table::new(schema, points(schema, scope, table)?, rules)?;
    Ok(t.violation(&(0..rules.len()).collect::<Vec<_>>()))
}

fn check_size(k: &[Rule]) -> Result<()> {
    if k.len() > SUBSET_LIMIT {
        return Err(Error::OracleLimit(format!("{} rules exceed the subset limit of {SUBSET_LIMIT}", k.len())));
    }
    Ok(())
}

fn members(mask: u32, n: usize) -> Vec<usize> {
    (0..n).filter(|i| mask >> i & 1 == 1).collect()
}

fn id_sets(k: &[Rule], masks: Vec<u32>) -> Vec<Vec<String>> {
    let mut out: Vec<Vec<String>> = masks
        .into_iter()
        .map(|m| {
            let mut ids: Vec<String> = members(m, k.len()).into_iter().map(|i| k[i].id.clone()).collect();
            ids.sort();
            ids
        })
        .collect();
    out.sort();
    out
}

/// Table over `k` followed by `extra` rules.
fn table_with(schema: &Schema, scope: ScopeKind, table: Option<&ClassifierTable>, k: &[Rule], extra: &[&Rule]) -> Result<Def3Table> {
    let mut all = k.to_vec();
    all.extend(extra.iter().map(|r| (*r).clone()));
    Def3Table::new(schema, points(schema, scope, table)?, &all)
}

fn with_extra(mask: u32, n: usize, extra: usize) -> Vec<usize> {
    let mut m = members(mask, n);
    m.push(n + extra);
    m
}

/// Maximal subsets of `k` whose union with `r` is consistent, as sorted id
/// lists.
pub fn remainders(schema: &Schema, scope: ScopeKind, table: Option<&ClassifierTable>, k: &[Rule], r: &Rule) -> Result<Vec<Vec<String>>> {
    check_size(k)?;
    let n = k.len();
    let t = table_with(schema, scope, table, k, &[r])?;
    let ok: Vec<u32> = (0u32..1 << n).filter(|&m| t.consistent(&with_extra(m, n, 0))).collect();
    let maximal = ok.iter().copied().filter(|&m| !ok.iter().any(|&o| o != m && o & m == m)).collect();
    Ok(id_sets(k, maximal))
}

/// Minimal subsets of `k` whose union with `r` is inconsistent.
pub fn kernels(schema: &Schema, scope: ScopeKind, table: Option<&ClassifierTable>, k: &[Rule], r: &Rule) -> Result<Vec<Vec<String>>> {
    check_size(k)?;
    let n = k.len();
    let t = table_with(schema, scope, table, k, &[r])?;
    let bad: Vec<u32> = (0u32..1 << n).filter(|&m| !t.consistent(&with_extra(m, n, 0))).collect();
    let minimal = bad.iter().copied().filter(|&m| !bad.iter().any(|&o| o != m && o & m == o)).collect();
    Ok(id_sets(k, minimal))
}

/// Whether every subset of `k` is inconsistent with `r` exactly when it is
/// inconsistent with `r2`.
pub fn uniformity_antecedent(
    schema: &Schema,
    scope: ScopeKind,
    table: Option<&ClassifierTable>,
    k: &[Rule],
    r: &Rule,
    r2: &Rule,
) -> Result<bool> {
    check_size(k)?;
    let n = k.len();
    let t = table_with(schema, scope, table, k, &[r, r2])?;
    Ok((0u32..1 << n).all(|m| t.consistent(&with_extra(m, n, 0)) == t.consistent(&with_extra(m, n, 1))))
}

/// Searches for R with `result ⊆ R ⊆ K ∪ {r}`, R consistent and R ∪ {removed}
/// inconsistent. Rules are matched by id; `result` must be a subset of
/// `K ∪ {r}`.
pub fn relevance_witness(
    schema: &Schema,
    scope: ScopeKind,
    table: Option<&ClassifierTable>,
    k: &[Rule],
    r: &Rule,
    result: &[String],
    removed: &Rule,
) -> Result<Option<Vec<String>>> {
    check_size(k)?;
    let mut base = k.to_vec();
    base.push(r.clone());
    let n = base.len();
    let t = table_with(schema, scope, table, &base, &[removed])?;
    let fixed: u32 = base
        .iter()
        .enumerate()
        .filter(|(_, q)| result.contains(&q.id))
        .fold(0, |m, (i, _)| m | 1 << i);
    for m in (0u32..1 << n).filter(|m| m & fixed == fixed) {
        if t.consistent(&members(m, n)) && !t.consistent(&with_extra(m, n, 0)) {
            return Ok(Some(id_sets(&base, vec![m]).remove(0)));
        }
    }
    Ok(None)
}

/// Searches for R ⊆ K ∪ {r} with R consistent and R ∪ {removed} inconsistent.
pub fn core_retainment_witness(
    schema: &Schema,
    scope: ScopeKind,
    table: Option<&ClassifierTable>,
    k: &[Rule],
    r: &Rule,
    removed: &Rule,
) -> Result<Option<Vec<String>>> {
    relevance_witness(schema, scope, table, k, r, &[], removed)
}
