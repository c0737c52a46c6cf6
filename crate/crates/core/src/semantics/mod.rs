//! Interpretation of formulas and rules over the full universe V or over the
//! known data points D, plus the decision procedures built on it: conflicts,
//! consistency, enforcement, coherence and completeness.

mod compiled;
mod point;
mod solver;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

pub use compiled::{class_extent, Node};
pub use point::{ClassSet, DataPoint};
pub use solver::Literal;

use crate::error::{Error, Result};
use crate::kb::ClassifierTable;
use crate::language::{FeatureFormula, Formula, Rule, Schema};

/// Largest grid of mentioned features an explicit extent may enumerate.
pub const GRID_LIMIT: u128 = 1 << 20;

/// Which points a formula ranges over.
#[derive(Debug, Clone, Copy)]
pub enum Scope<'a> {
    FullUniverse,
    Dataset(&'a ClassifierTable),
}

/// Serializable name of a [`Scope`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScopeKind {
    #[default]
    Full,
    Dataset,
}

impl ScopeKind {
    pub fn bind(self, table: &ClassifierTable) -> Scope<'_> {
        match self {
            ScopeKind::Full => Scope::FullUniverse,
            ScopeKind::Dataset => Scope::Dataset(table),
        }
    }
}

impl std::str::FromStr for ScopeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(ScopeKind::Full),
            "dataset" => Ok(ScopeKind::Dataset),
            other => Err(Error::InvalidConfig(format!("unknown scope {other} (use full or dataset)"))),
        }
    }
}

impl Scope<'_> {
    pub fn kind(&self) -> ScopeKind {
        match self {
            Scope::FullUniverse => ScopeKind::Full,
            Scope::Dataset(_) => ScopeKind::Dataset,
        }
    }
}

/// A rule with its body compiled and its head reduced to a class set.
#[derive(Debug, Clone)]
pub struct CompiledRule {
    pub id: String,
    pub body: Node,
    pub head: ClassSet,
}

/// A point covered by both bodies of two rules whose heads are disjoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConflictWitness {
    pub rule_a: String,
    pub rule_b: String,
    pub point: Vec<String>,
    pub heads_a: Vec<String>,
    pub heads_b: Vec<String>,
}

/// A rule whose body is satisfiable while its head denotes no class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SelfConflict {
    pub rule: String,
    pub point: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConsistencyReport {
    pub consistent: bool,
    pub edges: Vec<ConflictWitness>,
    pub self_loops: Vec<SelfConflict>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    pub rule: String,
    pub point: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EnforcementReport {
    pub holds: bool,
    pub counterexample: Option<Counterexample>,
}

/// τ of a rule against the classifier: vacuous when no known point satisfies
/// the body, otherwise the fraction of covered points labelled inside the head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoherenceValue {
    Vacuous,
    Ratio { num: u64, den: u64 },
}

impl CoherenceValue {
    pub fn is_coherent(&self) -> bool {
        self.meets(1.0)
    }

    pub fn meets(&self, tau: f64) -> bool {
        match *self {
            CoherenceValue::Vacuous => true,
            CoherenceValue::Ratio { num, den } => num as f64 >= tau * den as f64,
        }
    }

    pub fn value(&self) -> Option<f64> {
        match *self {
            CoherenceValue::Vacuous => None,
            CoherenceValue::Ratio { num, den } => Some(num as f64 / den as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CompletenessReport {
    pub complete: bool,
    pub missing: Vec<Vec<String>>,
    pub extras: Vec<String>,
}

/// Extent of a feature formula within a scope.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Extent {
    Dataset(Vec<DataPoint>),
    /// Satisfying cells of the grid of mentioned `features`; each cell stands
    /// for `multiplier` points of V (the product of unmentioned domains).
    Full { features: Vec<usize>, cells: Vec<Vec<u32>>, multiplier: u128 },
}

impl Extent {
    pub fn size(&self) -> u128 {
        match self {
            Extent::Dataset(points) => points.len() as u128,
            Extent::Full { cells, multiplier, .. } => cells.len() as u128 * multiplier,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.size() == 0
    }

    pub fn contains(&self, point: &DataPoint) -> bool {
        match self {
            Extent::Dataset(points) => points.contains(point),
            Extent::Full { features, cells, .. } => {
                let key: Vec<u32> = features.iter().map(|&f| point.0[f]).collect();
                cells.contains(&key)
            }
        }
    }
}

/// Evaluates a formula at a point by walking the syntax tree and resolving
/// names directly.
pub fn eval(formula: &FeatureFormula, schema: &Schema, point: &DataPoint) -> Result<bool> {
    point.check(schema)?;
    Ok(match formula {
        Formula::True => true,
        Formula::False => false,
        Formula::Atom(a) => {
            let f = schema
                .feature_index(&a.feature)
                .ok_or_else(|| Error::UnknownFeature(a.feature.clone()))?;
            schema.value_name(f, point.0[f]) == a.value
        }
        Formula::Not(x) => !eval(x, schema, point)?,
        Formula::And(xs) => {
            for x in xs {
                if !eval(x, schema, point)? {
                    return Ok(false);
                }
            }
            true
        }
        Formula::Or(xs) => {
            for x in xs {
                if eval(x, schema, point)? {
                    return Ok(true);
                }
            }
            false
        }
    })
}

/// Satisfiability over the full universe, with a witness point.
pub fn satisfiable(formula: &FeatureFormula, schema: &Schema) -> Result<Option<DataPoint>> {
    let node = Node::compile(formula, schema)?;
    Ok(solver::find_model(schema, &[Literal::pos(&node)]).map(DataPoint))
}

/// τ-coherence of a rule with the classifier table.
pub fn tau_coherence(rule: &Rule, table: &ClassifierTable) -> Result<CoherenceValue> {
    let schema = table.schema();
    let body = Node::compile(&rule.body, schema)?;
    let head = class_extent(&rule.head, schema)?;
    let (mut num, mut den) = (0u64, 0u64);
    for (p, c) in table.iter() {
        if body.eval(&p.0) {
            den += 1;
            if head.contains(c) {
                num += 1;
            }
        }
    }
    Ok(if den == 0 { CoherenceValue::Vacuous } else { CoherenceValue::Ratio { num, den } })
}

/// The point and class an instance rule denotes.
pub fn instance_point(rule: &Rule, schema: &Schema) -> Option<(DataPoint, u32)> {
    if !rule.is_instance(schema) {
        return None;
    }
    let mut values = vec![0u32; schema.feature_count()];
    for a in rule.body.atoms() {
        let f = schema.feature_index(&a.feature)?;
        values[f] = schema.value_index(f, &a.value)?;
    }
    let Formula::Atom(c) = &rule.head else { return None };
    Some((DataPoint(values), schema.class_index(&c.0)?))
}

/// Completeness of a rule set for the classifier table. Rules are deduplicated
/// by canonical form before the cardinality comparison.
pub fn check_complete(rules: &[Rule], table: &ClassifierTable) -> CompletenessReport {
    let schema = table.schema();
    let mut keys = HashSet::new();
    let mut matched = HashSet::new();
    let mut extras = Vec::new();
    for r in rules {
        if !keys.insert(r.key()) {
            continue;
        }
        match instance_point(r, schema) {
            Some((p, c)) if table.class_of(&p) == Some(c) => {
                matched.insert(p);
            }
            _ => extras.push(r.id.clone()),
        }
    }
    let missing: Vec<Vec<String>> = table
        .iter()
        .filter(|(p, _)| !matched.contains(*p))
        .map(|(p, _)| p.value_strings(schema))
        .collect();
    CompletenessReport {
        complete: missing.is_empty() && extras.is_empty() && keys.len() == table.len(),
        missing,
        extras,
    }
}

/// Decision procedures bound to a schema and a scope.
#[derive(Debug, Clone, Copy)]
pub struct Reasoner<'a> {
    pub schema: &'a Schema,
    pub scope: Scope<'a>,
}

impl<'a> Reasoner<'a> {
    pub fn new(schema: &'a Schema, scope: Scope<'a>) -> Result<Self> {
        if let Scope::Dataset(t) = scope {
            if t.schema() != schema {
                return Err(Error::SchemaMismatch("rules and classifier table".into()));
            }
        }
        Ok(Reasoner { schema, scope })
    }

    pub fn full(schema: &'a Schema) -> Self {
        Reasoner { schema, scope: Scope::FullUniverse }
    }

    pub fn dataset(table: &'a ClassifierTable) -> Self {
        Reasoner { schema: table.schema(), scope: Scope::Dataset(table) }
    }

    pub fn compile(&self, rule: &Rule) -> Result<CompiledRule> {
        Ok(CompiledRule {
            id: rule.id.clone(),
            body: Node::compile(&rule.body, self.schema)?,
            head: class_extent(&rule.head, self.schema)?,
        })
    }

    pub fn compile_all(&self, rules: &[Rule]) -> Result<Vec<CompiledRule>> {
        rules.iter().map(|r| self.compile(r)).collect()
    }

    /// A point of the scope satisfying every literal.
    pub fn find(&self, lits: &[Literal<'_>]) -> Option<DataPoint> {
        match self.scope {
            Scope::FullUniverse => solver::find_model(self.schema, lits).map(DataPoint),
            Scope::Dataset(t) => t
                .iter()
                .map(|(p, _)| p)
                .find(|p| lits.iter().all(|l| l.node.eval(&p.0) == l.positive))
                .cloned(),
        }
    }

    /// Number of points of the scope satisfying every literal.
    pub fn count(&self, lits: &[Literal<'_>]) -> u128 {
        match self.scope {
            Scope::FullUniverse => solver::count_models(self.schema, lits),
            Scope::Dataset(t) => t
                .iter()
                .filter(|(p, _)| lits.iter().all(|l| l.node.eval(&p.0) == l.positive))
                .count() as u128,
        }
    }

    pub fn is_satisfiable(&self, formula: &FeatureFormula) -> Result<bool> {
        let node = Node::compile(formula, self.schema)?;
        Ok(self.find(&[Literal::pos(&node)]).is_some())
    }

    pub fn extent(&self, formula: &FeatureFormula) -> Result<Extent> {
        let node = Node::compile(formula, self.schema)?;
        let lits = [Literal::pos(&node)];
        match self.scope {
            Scope::Dataset(t) => Ok(Extent::Dataset(
                t.iter().map(|(p, _)| p).filter(|p| node.eval(&p.0)).cloned().collect(),
            )),
            Scope::FullUniverse => {
                let features = solver::mentioned(self.schema, &lits);
                let mut cells: u128 = 1;
                for &f in &features {
                    cells = cells.saturating_mul(self.schema.domain_size(f) as u128);
                }
                if cells > GRID_LIMIT {
                    return Err(Error::GridTooLarge {
                        features: features
                            .iter()
                            .map(|&f| self.schema.features()[f].name.clone())
                            .collect(),
                        cells,
                    });
                }
                let multiplier = (0..self.schema.feature_count())
                    .filter(|f| !features.contains(f))
                    .map(|f| self.schema.domain_size(f) as u128)
                    .product();
                let cells = solver::enumerate_grid(self.schema, &lits, &features);
                Ok(Extent::Full { features, cells, multiplier })
            }
        }
    }

    /// Witness point for a conflict between two compiled rules.
    pub fn conflict_point(&self, a: &CompiledRule, b: &CompiledRule) -> Option<DataPoint> {
        if !a.head.is_disjoint(&b.head) {
            return None;
        }
        self.find(&[Literal::pos(&a.body), Literal::pos(&b.body)])
    }

    /// Witness point when a rule conflicts with itself (empty head).
    pub fn self_conflict_point(&self, r: &CompiledRule) -> Option<DataPoint> {
        if !r.head.is_empty() {
            return None;
        }
        self.find(&[Literal::pos(&r.body)])
    }

    pub fn witness(&self, a: &CompiledRule, b: &CompiledRule, point: &DataPoint) -> ConflictWitness {
        ConflictWitness {
            rule_a: a.id.clone(),
            rule_b: b.id.clone(),
            point: point.value_strings(self.schema),
            heads_a: a.head.names(self.schema),
            heads_b: b.head.names(self.schema),
        }
    }

    pub fn conflict(&self, a: &Rule, b: &Rule) -> Result<Option<ConflictWitness>> {
        let (ca, cb) = (self.compile(a)?, self.compile(b)?);
        Ok(self.conflict_point(&ca, &cb).map(|p| self.witness(&ca, &cb, &p)))
    }

    pub fn check_consistency(&self, rules: &[Rule]) -> Result<ConsistencyReport> {
        Ok(self.consistency_compiled(&self.compile_all(rules)?))
    }

    pub fn consistency_compiled(&self, rules: &[CompiledRule]) -> ConsistencyReport {
        let mut edges = Vec::new();
        let mut self_loops = Vec::new();
        for (i, a) in rules.iter().enumerate() {
            if let Some(p) = self.self_conflict_point(a) {
                self_loops.push(SelfConflict { rule: a.id.clone(), point: p.value_strings(self.schema) });
            }
            for b in &rules[i + 1..] {
                if let Some(p) = self.conflict_point(a, b) {
                    edges.push(self.witness(a, b, &p));
                }
            }
        }
        ConsistencyReport { consistent: edges.is_empty() && self_loops.is_empty(), edges, self_loops }
    }

    pub fn is_consistent_compiled(&self, rules: &[CompiledRule]) -> bool {
        rules.iter().enumerate().all(|(i, a)| {
            self.self_conflict_point(a).is_none()
                && rules[i + 1..].iter().all(|b| self.conflict_point(a, b).is_none())
        })
    }

    pub fn is_consistent(&self, rules: &[Rule]) -> Result<bool> {
        Ok(self.is_consistent_compiled(&self.compile_all(rules)?))
    }

    /// Whether `enforcing` ⊒ `enforced`.
    pub fn enforces(&self, enforcing: &[Rule], enforced: &[Rule]) -> Result<EnforcementReport> {
        Ok(self.enforces_compiled(&self.compile_all(enforcing)?, &self.compile_all(enforced)?))
    }

    pub fn enforces_compiled(&self, enforcing: &[CompiledRule], enforced: &[CompiledRule]) -> EnforcementReport {
        for rj in enforced {
            let mut lits = vec![Literal::pos(&rj.body)];
            lits.extend(
                enforcing
                    .iter()
                    .filter(|ri| ri.head.is_subset(&rj.head))
                    .map(|ri| Literal::neg(&ri.body)),
            );
            if let Some(p) = self.find(&lits) {
                return EnforcementReport {
                    holds: false,
                    counterexample: Some(Counterexample {
                        rule: rj.id.clone(),
                        point: p.value_strings(self.schema),
                    }),
                };
            }
        }
        EnforcementReport { holds: true, counterexample: None }
    }
}
