use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::formula::{ClassFormula, FeatureFormula, Formula};
use super::schema::Schema;
use crate::error::{Error, Result};

/// Where a rule came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    /// An instance rule recording a known classification (member of K_d).
    Data,
    /// An explanation extracted from the classifier (member of K_e).
    Explanation,
    /// User feedback.
    Feedback,
    /// Produced by weakening another rule.
    Derived,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub id: String,
    pub body: FeatureFormula,
    pub head: ClassFormula,
    pub origin: Origin,
}

/// Identity of a rule for set membership: the canonical rendering of body and
/// head, ignoring id and origin.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RuleKey(String);

impl RuleKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RuleKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Rule {
    pub fn new(id: impl Into<String>, body: FeatureFormula, head: ClassFormula, origin: Origin) -> Self {
        Rule { id: id.into(), body, head, origin }
    }

    pub fn canonicalize(&self) -> Rule {
        Rule {
            id: self.id.clone(),
            body: self.body.canonical(),
            head: self.head.canonical(),
            origin: self.origin,
        }
    }

    pub fn key(&self) -> RuleKey {
        RuleKey(format!("{} => {}", self.body.canonical(), self.head.canonical()))
    }

    pub fn same_rule(&self, other: &Rule) -> bool {
        self.key() == other.key()
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Rule {
        self.id = id.into();
        self
    }

    pub fn with_origin(mut self, origin: Origin) -> Rule {
        self.origin = origin;
        self
    }

    /// `body => head`, without id or terminator.
    pub fn text(&self) -> String {
        format!("{} => {}", self.body, self.head)
    }

    /// Checks that every atom names a declared feature, value or class.
    pub fn check_schema(&self, schema: &Schema) -> Result<()> {
        for atom in self.body.atoms() {
            let f = schema
                .feature_index(&atom.feature)
                .ok_or_else(|| Error::UnknownFeature(atom.feature.clone()))?;
            if schema.value_index(f, &atom.value).is_none() {
                return Err(Error::UnknownValue {
                    feature: atom.feature.clone(),
                    value: atom.value.clone(),
                });
            }
        }
        for atom in self.head.atoms() {
            if schema.class_index(&atom.0).is_none() {
                return Err(Error::UnknownClass(atom.0.clone()));
            }
        }
        Ok(())
    }

    /// The instance predicate: the body is a conjunction of atoms naming every
    /// feature exactly once and the head is a single positive class atom.
    /// Returns the reason when the rule fails it.
    pub fn instance_violation(&self, schema: &Schema) -> Option<String> {
        let atoms: Vec<_> = match &self.body {
            Formula::And(xs) => {
                let mut atoms = Vec::with_capacity(xs.len());
                for x in xs {
                    match x {
                        Formula::Atom(a) => atoms.push(a),
                        _ => return Some("body is not a conjunction of feature atoms".into()),
                    }
                }
                atoms
            }
            Formula::Atom(a) => vec![a],
            _ => return Some("body is not a conjunction of feature atoms".into()),
        };
        let mut seen = vec![false; schema.feature_count()];
        for a in &atoms {
            let Some(i) = schema.feature_index(&a.feature) else {
                return Some(format!("unknown feature {}", a.feature));
            };
            if seen[i] {
                return Some(format!("feature {} repeated", a.feature));
            }
            seen[i] = true;
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Some(format!("feature {} missing", schema.features()[i].name));
        }
        if !matches!(self.head, Formula::Atom(_)) {
            return Some("head is not a single positive class atom".into());
        }
        None
    }

    pub fn is_instance(&self, schema: &Schema) -> bool {
        self.instance_violation(schema).is_none()
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} => {}", self.id, self.body, self.head)
    }
}

#[derive(Serialize, Deserialize)]
struct RuleRepr {
    id: String,
    origin: Origin,
    text: String,
}

impl Serialize for Rule {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RuleRepr { id: self.id.clone(), origin: self.origin, text: self.text() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Rule {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = RuleRepr::deserialize(d)?;
        let (body, head) =
            super::parser::parse_rule_text(&repr.text).map_err(serde::de::Error::custom)?;
        Ok(Rule { id: repr.id, body, head, origin: repr.origin })
    }
}
