#![allow(dead_code)]

use std::path::PathBuf;

use xkb_core::kb::{load_table, ClassifierTable, ExplanationKB};
use xkb_core::language::{parse_document, parse_rule, ClassFormula, Document, Formula, Rule, Schema};
use xkb_core::semantics::{eval, DataPoint};

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

pub fn read(name: &str) -> String {
    std::fs::read_to_string(data_path(name)).unwrap()
}

pub fn doc(name: &str) -> Document {
    parse_document(&read(name)).unwrap()
}

pub struct Example {
    pub schema: Schema,
    pub table: ClassifierTable,
    pub kb: ExplanationKB,
}

impl Example {
    pub fn load() -> Self {
        let kb = ExplanationKB::from_document(doc("example.xkb")).unwrap();
        let schema = kb.schema().clone();
        let table = load_table(read("example.csv").as_bytes(), &schema).unwrap();
        Example { schema, table, kb }
    }

    pub fn rule(&self, id: &str) -> Rule {
        if let Some(r) = self.kb.get(id) {
            return r.clone();
        }
        let text = match id {
            "rz" => "rz: f1=1 => c1",
            "rp" => "rp: f1=0 & f2=0 & f3=1 => c3",
            "rq" => "rq: f1=1 & f2=1 & f3=1 => c2",
            "rr" => "rr: f1=1 & f2=1 => !c1",
            other => panic!("no example rule {other}"),
        };
        parse_rule(&self.schema, text).unwrap()
    }

    pub fn rules(&self, ids: &[&str]) -> Vec<Rule> {
        ids.iter().map(|id| self.rule(id)).collect()
    }

    /// Table rows x1..x6 in file order.
    pub fn x(&self, i: usize) -> DataPoint {
        self.table.iter().nth(i - 1).unwrap().0.clone()
    }

    pub fn point(&self, values: &[&str]) -> DataPoint {
        DataPoint::from_values(&self.schema, values).unwrap()
    }
}

/// Every point of the universe, first feature varying slowest.
pub fn universe(schema: &Schema) -> Vec<DataPoint> {
    let mut out = vec![Vec::new()];
    for f in 0..schema.feature_count() {
        let d = schema.domain_size(f) as u32;
        out = out
            .into_iter()
            .flat_map(|p: Vec<u32>| {
                (0..d).map(move |v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    out.into_iter().map(DataPoint).collect()
}

/// Classes satisfying a head, by direct evaluation of the formula.
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

/// Points of the universe (or of the table rows) where two rules fire with
/// disjoint heads. `a == b` gives the self-conflict points.
pub fn brute_conflicts(schema: &Schema, points: &[DataPoint], a: &Rule, b: &Rule) -> Vec<DataPoint> {
    let (ha, hb) = (head_classes(&a.head, schema), head_classes(&b.head, schema));
    if ha.iter().zip(&hb).any(|(x, y)| *x && *y) {
        return Vec::new();
    }
    points
        .iter()
        .filter(|x| eval(&a.body, schema, x).unwrap() && eval(&b.body, schema, x).unwrap())
        .cloned()
        .collect()
}

pub fn brute_consistent(schema: &Schema, rules: &[Rule]) -> bool {
    let points = universe(schema);
    rules
        .iter()
        .enumerate()
        .all(|(i, a)| rules[i..].iter().all(|b| brute_conflicts(schema, &points, a, b).is_empty()))
}

fn subsets(k: &[Rule]) -> Vec<Vec<Rule>> {
    (0u32..1 << k.len())
        .map(|m| k.iter().enumerate().filter(|(i, _)| m >> i & 1 == 1).map(|(_, r)| r.clone()).collect())
        .collect()
}

fn id_sets(sets: Vec<Vec<Rule>>) -> Vec<Vec<String>> {
    let mut out: Vec<Vec<String>> = sets
        .into_iter()
        .map(|s| {
            let mut ids: Vec<String> = s.into_iter().map(|r| r.id).collect();
            ids.sort();
            ids
        })
        .collect();
    out.sort();
    out
}

fn with(s: &[Rule], r: &Rule) -> Vec<Rule> {
    let mut v = s.to_vec();
    v.push(r.clone());
    v
}

fn is_subset(a: &[Rule], b: &[Rule]) -> bool {
    a.iter().all(|x| b.iter().any(|y| y.id == x.id))
}

/// Maximal subsets of `k` consistent with `r`, by enumeration.
pub fn brute_remainders(schema: &Schema, k: &[Rule], r: &Rule) -> Vec<Vec<String>> {
    let ok: Vec<Vec<Rule>> = subsets(k).into_iter().filter(|s| brute_consistent(schema, &with(s, r))).collect();
    let maximal = ok
        .iter()
        .filter(|s| !ok.iter().any(|t| t.len() > s.len() && is_subset(s, t)))
        .cloned()
        .collect();
    id_sets(maximal)
}

/// Minimal subsets of `k` inconsistent with `r`, by enumeration.
pub fn brute_kernels(schema: &Schema, k: &[Rule], r: &Rule) -> Vec<Vec<String>> {
    let bad: Vec<Vec<Rule>> = subsets(k).into_iter().filter(|s| !brute_consistent(schema, &with(s, r))).collect();
    let minimal = bad
        .iter()
        .filter(|s| !bad.iter().any(|t| t.len() < s.len() && is_subset(t, s)))
        .cloned()
        .collect();
    id_sets(minimal)
}

pub fn sorted(mut v: Vec<Vec<String>>) -> Vec<Vec<String>> {
    v.iter_mut().for_each(|s| s.sort());
    v.sort();
    v
}

pub fn ids(rules: &[Rule]) -> Vec<String> {
    let mut v: Vec<String> = rules.iter().map(|r| r.id.clone()).collect();
    v.sort();
    v
}
