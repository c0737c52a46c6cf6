//! Seeded random revision instances: a small schema, a classifier table, a
//! knowledge base whose K_d is derived from the table, an input rule and a
//! second input for paired postulates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::kb::{ClassifierTable, ExplanationKB};
use crate::language::{ClassAtom, ClassFormula, FeatureAtom, FeatureFormula, Feature, Formula, Origin, Rule, Schema};
use crate::semantics::{DataPoint, Reasoner, ScopeKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub min_features: usize,
    pub max_features: usize,
    pub max_domain: usize,
    pub max_classes: usize,
    pub max_rows: usize,
    pub max_ke: usize,
    /// Probability that a generated K_e rule has an unsatisfiable head.
    pub self_conflict_rate: f64,
    /// Resample the input until it is consistent with K. Ignored when K itself
    /// is inconsistent.
    pub consistent_inputs: bool,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            min_features: 2,
            max_features: 3,
            max_domain: 3,
            max_classes: 3,
            max_rows: 12,
            max_ke: 5,
            self_conflict_rate: 0.05,
            consistent_inputs: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trial {
    pub seed: u64,
    pub schema: Schema,
    pub table: ClassifierTable,
    pub kb: ExplanationKB,
    pub input: Rule,
    pub paired: Rule,
}

/// Derives the seed of trial `index` from a base seed (splitmix64 step).
pub fn trial_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Random formulas and rules over a fixed schema.
pub struct RuleGen<'s> {
    pub schema: &'s Schema,
    pub rng: ChaCha8Rng,
}

impl<'s> RuleGen<'s> {
    pub fn new(schema: &'s Schema, seed: u64) -> Self {
        RuleGen { schema, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn atom(&mut self) -> FeatureFormula {
        let f = self.rng.random_range(0..self.schema.feature_count());
        let v = self.rng.random_range(0..self.schema.domain_size(f)) as u32;
        Formula::atom(FeatureAtom::new(&self.schema.features()[f].name, self.schema.value_name(f, v)))
    }

    pub fn body(&mut self, depth: u32) -> FeatureFormula {
        let roll = self.rng.random_range(0..10);
        if depth == 0 || roll < 3 {
            let a = self.atom();
            return if self.rng.random_bool(0.2) { Formula::not(a) } else { a };
        }
        let n = self.rng.random_range(2..=3);
        let parts: Vec<FeatureFormula> = (0..n).map(|_| self.body(depth - 1)).collect();
        match roll {
            3..=6 => Formula::and(parts),
            7..=8 => Formula::or(parts),
            _ => Formula::not(Formula::and(parts)),
        }
    }

    fn class(&mut self) -> ClassFormula {
        let c = self.rng.random_range(0..self.schema.class_count()) as u32;
        Formula::atom(ClassAtom(self.schema.class_name(c).to_string()))
    }

    /// A head with a non-empty class extent.
    pub fn head(&mut self) -> ClassFormula {
        match self.rng.random_range(0..20) {
            0..=11 => self.class(),
            12..=15 => Formula::not(self.class()),
            16..=18 => Formula::or([self.class(), self.class()]),
            _ => Formula::True,
        }
    }

    /// A head with an empty class extent.
    pub fn empty_head(&mut self) -> ClassFormula {
        let c = self.class();
        Formula::and([c.clone(), Formula::not(c)])
    }

    pub fn point(&mut self) -> DataPoint {
        DataPoint((0..self.schema.feature_count()).map(|f| self.rng.random_range(0..self.schema.domain_size(f)) as u32).collect())
    }

    fn point_body(&self, p: &DataPoint, keep: &[bool]) -> FeatureFormula {
        Formula::and(p.0.iter().enumerate().filter(|(f, _)| keep[*f]).map(|(f, &v)| {
            Formula::atom(FeatureAtom::new(&self.schema.features()[f].name, self.schema.value_name(f, v)))
        }))
    }

    /// A rule generalizing a table row: some of its feature values imply its
    /// class.
    pub fn generalization(&mut self, table: &ClassifierTable, id: &str) -> Rule {
        let rows: Vec<(DataPoint, u32)> = table.iter().map(|(p, c)| (p.clone(), c)).collect();
        let (p, c) = rows[self.rng.random_range(0..rows.len())].clone();
        let n = self.schema.feature_count();
        let mut keep: Vec<bool> = (0..n).map(|_| self.rng.random_bool(0.5)).collect();
        keep[self.rng.random_range(0..n)] = true;
        let head = Formula::atom(ClassAtom(self.schema.class_name(c).to_string()));
        Rule::new(id, self.point_body(&p, &keep), head, Origin::Explanation)
    }

    /// An instance rule for a random point.
    pub fn instance(&mut self, id: &str) -> Rule {
        let p = self.point();
        let body = self.point_body(&p, &vec![true; self.schema.feature_count()]);
        Rule::new(id, body, self.class(), Origin::Feedback)
    }

    /// A rule related to `r`: a semantically equal rewrite, a narrowing, a
    /// head change or an unrelated rule.
    pub fn related(&mut self, r: &Rule, id: &str) -> Rule {
        match self.rng.random_range(0..4) {
            0 => {
                let a = self.atom();
                let body = Formula::and([r.body.clone(), Formula::or([a.clone(), Formula::not(a)])]);
                Rule::new(id, body, r.head.clone(), Origin::Feedback)
            }
            1 => {
                let a = self.atom();
                Rule::new(id, Formula::and([r.body.clone(), a]), r.head.clone(), Origin::Feedback)
            }
            2 => Rule::new(id, r.body.clone(), self.head(), Origin::Feedback),
            _ => self.rule(id, Origin::Feedback),
        }
    }

    pub fn rule(&mut self, id: &str, origin: Origin) -> Rule {
        let body = self.body(2);
        Rule::new(id, body, self.head(), origin)
    }
}

fn schema(rng: &mut ChaCha8Rng, cfg: &GeneratorConfig) -> Result<Schema> {
    let nf = rng.random_range(cfg.min_features.max(2)..=cfg.max_features.max(cfg.min_features.max(2)));
    let features = (1..=nf)
        .map(|i| Feature {
            name: format!("f{i}"),
            domain: (0..rng.random_range(2..=cfg.max_domain.max(2))).map(|v| v.to_string()).collect(),
        })
        .collect();
    let classes = (1..=rng.random_range(2..=cfg.max_classes.max(2))).map(|i| format!("c{i}")).collect();
    Schema::new(features, classes)
}

/// Builds the instance for one trial seed.
pub fn trial(seed: u64, cfg: &GeneratorConfig) -> Result<Trial> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schema = schema(&mut rng, cfg)?;
    let mut g = RuleGen::new(&schema, rng.random());

    let mut table = ClassifierTable::new(schema.clone());
    let universe = schema.universe_size() as usize;
    let rows = g.rng.random_range(1..=cfg.max_rows.min(universe).max(1));
    while table.len() < rows {
        let p = g.point();
        if table.class_of(&p).is_none() {
            let c = g.rng.random_range(0..schema.class_count()) as u32;
            table.insert(p, c)?;
        }
    }

    let n_ke = g.rng.random_range(0..=cfg.max_ke);
    let mut ke = Vec::with_capacity(n_ke);
    for i in 1..=n_ke {
        let id = format!("e{i}");
        let mut rule = if g.rng.random_bool(0.5) { g.generalization(&table, &id) } else { g.rule(&id, Origin::Explanation) };
        if g.rng.random_bool(cfg.self_conflict_rate) {
            rule.head = g.empty_head();
        }
        ke.push(rule);
    }
    let kb = ExplanationKB::from_table(&table, ke)?;

    let mut input = random_input(&mut g, &table, "fb");
    if cfg.consistent_inputs {
        let reasoner = Reasoner::full(&schema);
        let mut k = kb.all_rules();
        let base_ok = reasoner.is_consistent(&k)?;
        k.push(input.clone());
        let mut tries = 0;
        while base_ok && !reasoner.is_consistent(&k)? {
            tries += 1;
            input = if tries < 50 { random_input(&mut g, &table, "fb") } else { Rule { body: Formula::False, ..input } };
            *k.last_mut().unwrap() = input.clone();
        }
    }
    let paired = g.related(&input, "fb2");
    Ok(Trial { seed, schema, table, kb, input, paired })
}

fn random_input(g: &mut RuleGen<'_>, table: &ClassifierTable, id: &str) -> Rule {
    let mut r = match g.rng.random_range(0..10) {
        0..=4 => g.rule(id, Origin::Feedback),
        5..=6 => g.instance(id),
        _ => g.generalization(table, id),
    };
    // Flip the class of generalizations so they disagree with the data.
    if r.origin == Origin::Explanation {
        r.origin = Origin::Feedback;
        if g.rng.random_bool(0.7) {
            r.head = Formula::not(r.head);
        }
    }
    r
}

/// Scope-aware convenience: whether the input of a trial clashes with K.
pub fn input_conflicts(trial: &Trial, scope: ScopeKind) -> Result<bool> {
    let reasoner = Reasoner::new(&trial.schema, scope.bind(&trial.table))?;
    let mut k = trial.kb.all_rules();
    k.push(trial.input.clone());
    Ok(!reasoner.is_consistent(&k)?)
}
