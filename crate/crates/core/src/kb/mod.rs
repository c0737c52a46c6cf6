//! Classifier tables, explanation knowledge bases K_M = K_d ∪ K_e, and the
//! checks and metrics computed over them.

mod table;

use std::collections::HashSet;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

pub use table::{load_table, ClassifierTable};

use crate::error::{Error, Result};
use crate::language::{
    render_document, ClassAtom, Document, FeatureAtom, Formula, Origin, Rule, Schema,
};
use crate::semantics::{
    check_complete, class_extent, tau_coherence, CoherenceValue, CompletenessReport,
    ConsistencyReport, Node, Reasoner, Scope,
};

/// One instance rule per table row, with ids `d0001`, `d0002`, ...
pub fn derive_kd(table: &ClassifierTable) -> Vec<Rule> {
    let schema = table.schema();
    table
        .iter()
        .enumerate()
        .map(|(i, (p, c))| {
            let body = Formula::and(
                p.values(schema)
                    .into_iter()
                    .zip(schema.features())
                    .map(|(v, f)| Formula::atom(FeatureAtom::new(&f.name, v))),
            );
            let head = Formula::atom(ClassAtom(schema.class_name(c).to_string()));
            Rule::new(format!("d{:04}", i + 1), body, head, Origin::Data)
        })
        .collect()
}

/// An explanation knowledge base: instance rules K_d and explanation rules K_e.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExplanationKB {
    schema: Schema,
    kd: Vec<Rule>,
    ke: Vec<Rule>,
}

impl ExplanationKB {
    /// Checks that every rule fits the schema, every K_d rule is an instance
    /// rule, and ids are unique across both parts. K_d rules are tagged
    /// `data`; K_e rules tagged `data` are retagged `explanation`.
    pub fn new(schema: Schema, kd: Vec<Rule>, ke: Vec<Rule>) -> Result<Self> {
        let mut ids = HashSet::new();
        let kd: Vec<Rule> = kd.into_iter().map(|r| r.with_origin(Origin::Data)).collect();
        let ke: Vec<Rule> = ke
            .into_iter()
            .map(|r| if r.origin == Origin::Data { r.with_origin(Origin::Explanation) } else { r })
            .collect();
        for r in kd.iter().chain(&ke) {
            r.check_schema(&schema)?;
            if !ids.insert(r.id.clone()) {
                return Err(Error::DuplicateRuleId(r.id.clone()));
            }
        }
        for r in &kd {
            if let Some(reason) = r.instance_violation(&schema) {
                return Err(Error::NotInstanceRule { id: r.id.clone(), reason });
            }
        }
        Ok(ExplanationKB { schema, kd, ke })
    }

    /// Splits a document by origin: `data` statements form K_d.
    pub fn from_document(doc: Document) -> Result<Self> {
        let (kd, ke) = doc.rules.into_iter().partition(|r| r.origin == Origin::Data);
        ExplanationKB::new(doc.schema, kd, ke)
    }

    /// A KB whose K_d is derived from the table.
    pub fn from_table(table: &ClassifierTable, ke: Vec<Rule>) -> Result<Self> {
        ExplanationKB::new(table.schema().clone(), derive_kd(table), ke)
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn kd(&self) -> &[Rule] {
        &self.kd
    }

    pub fn ke(&self) -> &[Rule] {
        &self.ke
    }

    pub fn len(&self) -> usize {
        self.kd.len() + self.ke.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// K_d followed by K_e.
    pub fn rules(&self) -> impl Iterator<Item = &Rule> {
        self.kd.iter().chain(&self.ke)
    }

    pub fn all_rules(&self) -> Vec<Rule> {
        self.rules().cloned().collect()
    }

    pub fn get(&self, id: &str) -> Option<&Rule> {
        self.rules().find(|r| r.id == id)
    }

    pub fn contains_id(&self, id: &str) -> bool {
        self.get(id).is_some()
    }

    pub fn is_kd(&self, id: &str) -> bool {
        self.kd.iter().any(|r| r.id == id)
    }

    pub fn to_document(&self) -> Document {
        Document { schema: self.schema.clone(), rules: self.all_rules() }
    }

    pub fn render(&self) -> String {
        render_document(&self.schema, &self.all_rules())
    }
}

/// A ratio kept exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fraction {
    pub num: u64,
    pub den: u64,
}

impl Fraction {
    /// The ratio as a float; an empty denominator reads as zero.
    pub fn value(&self) -> f64 {
        if self.den == 0 {
            0.0
        } else {
            self.num as f64 / self.den as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KBMetrics {
    /// Conflicting pairs plus self-conflicting rules.
    pub conflict_edge_count: usize,
    pub per_rule_tau: IndexMap<String, CoherenceValue>,
    pub drift: Fraction,
    /// Smallest τ over K_e, vacuous rules counting as 1. `None` for empty K_e.
    pub ke_min_tau: Option<f64>,
}

/// Structural and logical checks of a KB against a classifier table. Logical
/// defects are recorded here rather than returned as errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub kd_completeness: CompletenessReport,
    pub kd_coherent: bool,
    pub kd_incoherent: Vec<String>,
    pub self_inconsistent: Vec<String>,
    pub kd_consistency: ConsistencyReport,
    pub kb_consistency: ConsistencyReport,
    pub ke_tau: IndexMap<String, CoherenceValue>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.warnings.is_empty()
    }
}

fn check_table(kb: &ExplanationKB, table: &ClassifierTable) -> Result<()> {
    if kb.schema() != table.schema() {
        return Err(Error::SchemaMismatch("knowledge base and classifier table".into()));
    }
    Ok(())
}

pub fn validate(kb: &ExplanationKB, table: &ClassifierTable, scope: Scope<'_>) -> Result<ValidationReport> {
    check_table(kb, table)?;
    let reasoner = Reasoner::new(kb.schema(), scope)?;
    let mut warnings = Vec::new();

    let kd_completeness = check_complete(kb.kd(), table);
    if !kd_completeness.complete {
        warnings.push(format!(
            "K_d is not complete for the table ({} missing points, {} extra rules)",
            kd_completeness.missing.len(),
            kd_completeness.extras.len()
        ));
    }
    let mut kd_incoherent = Vec::new();
    for r in kb.kd() {
        if !tau_coherence(r, table)?.is_coherent() {
            kd_incoherent.push(r.id.clone());
        }
    }
    if !kd_incoherent.is_empty() {
        warnings.push(format!("K_d rules incoherent with the table: {}", kd_incoherent.join(", ")));
    }

    let all = kb.all_rules();
    let kb_consistency = reasoner.check_consistency(&all)?;
    let self_inconsistent: Vec<String> = kb_consistency.self_loops.iter().map(|s| s.rule.clone()).collect();
    for id in &self_inconsistent {
        warnings.push(format!("rule {id} has a satisfiable body and an empty head"));
    }
    let kd_consistency = reasoner.check_consistency(kb.kd())?;
    if !kd_consistency.consistent {
        warnings.push("K_d is inconsistent".into());
    }
    if !kb_consistency.consistent {
        warnings.push(format!(
            "K_d ∪ K_e is inconsistent ({} conflicting pairs)",
            kb_consistency.edges.len()
        ));
    }

    let mut ke_tau = IndexMap::new();
    for r in kb.ke() {
        let tau = tau_coherence(r, table)?;
        if let CoherenceValue::Ratio { num, den } = tau {
            if num < den {
                warnings.push(format!("rule {} is incoherent with the table (τ = {num}/{den})", r.id));
            }
        }
        ke_tau.insert(r.id.clone(), tau);
    }

    Ok(ValidationReport {
        kd_coherent: kd_incoherent.is_empty(),
        kd_completeness,
        kd_incoherent,
        self_inconsistent,
        kd_consistency,
        kb_consistency,
        ke_tau,
        warnings,
    })
}

/// Coherence drift: share of table points where some rule covering the point
/// excludes the table's label.
pub fn drift(rules: &[Rule], table: &ClassifierTable) -> Result<Fraction> {
    let schema = table.schema();
    let compiled: Vec<(Node, _)> = rules
        .iter()
        .map(|r| Ok((Node::compile(&r.body, schema)?, class_extent(&r.head, schema)?)))
        .collect::<Result<_>>()?;
    let num = table
        .iter()
        .filter(|(p, c)| compiled.iter().any(|(b, h)| b.eval(&p.0) && !h.contains(*c)))
        .count() as u64;
    Ok(Fraction { num, den: table.len() as u64 })
}

pub fn metrics(kb: &ExplanationKB, table: &ClassifierTable, scope: Scope<'_>) -> Result<KBMetrics> {
    check_table(kb, table)?;
    let reasoner = Reasoner::new(kb.schema(), scope)?;
    let all = kb.all_rules();
    let report = reasoner.check_consistency(&all)?;
    let mut per_rule_tau = IndexMap::new();
    for r in &all {
        per_rule_tau.insert(r.id.clone(), tau_coherence(r, table)?);
    }
    let ke_min_tau = kb
        .ke()
        .iter()
        .map(|r| per_rule_tau[&r.id].value().unwrap_or(1.0))
        .reduce(f64::min);
    Ok(KBMetrics {
        conflict_edge_count: report.edges.len() + report.self_loops.len(),
        per_rule_tau,
        drift: drift(&all, table)?,
        ke_min_tau,
    })
}
