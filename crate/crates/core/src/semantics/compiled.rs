//! Formulas resolved against a schema: atoms become (feature index, value
//! index) pairs, class formulas become class sets.

use super::point::ClassSet;
use crate::error::{Error, Result};
use crate::language::{ClassFormula, FeatureFormula, Formula, Schema};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    True,
    False,
    Atom { feature: usize, value: u32 },
    Not(Box<Node>),
    And(Vec<Node>),
    Or(Vec<Node>),
}

impl Node {
    pub fn compile(formula: &FeatureFormula, schema: &Schema) -> Result<Node> {
        Ok(match formula {
            Formula::True => Node::True,
            Formula::False => Node::False,
            Formula::Atom(a) => {
                let feature = schema
                    .feature_index(&a.feature)
                    .ok_or_else(|| Error::UnknownFeature(a.feature.clone()))?;
                let value = schema.value_index(feature, &a.value).ok_or_else(|| {
                    Error::UnknownValue { feature: a.feature.clone(), value: a.value.clone() }
                })?;
                Node::Atom { feature, value }
            }
            Formula::Not(x) => Node::Not(Box::new(Node::compile(x, schema)?)),
            Formula::And(xs) => {
                Node::And(xs.iter().map(|x| Node::compile(x, schema)).collect::<Result<_>>()?)
            }
            Formula::Or(xs) => {
                Node::Or(xs.iter().map(|x| Node::compile(x, schema)).collect::<Result<_>>()?)
            }
        })
    }

    /// Three-valued evaluation under a partial assignment. `None` means the
    /// value depends on features not yet assigned.
    pub fn eval3(&self, assign: &[Option<u32>]) -> Option<bool> {
        match self {
            Node::True => Some(true),
            Node::False => Some(false),
            Node::Atom { feature, value } => assign[*feature].map(|v| v == *value),
            Node::Not(x) => x.eval3(assign).map(|b| !b),
            Node::And(xs) => {
                let mut unknown = false;
                for x in xs {
                    match x.eval3(assign) {
                        Some(false) => return Some(false),
                        None => unknown = true,
                        Some(true) => {}
                    }
                }
                if unknown {
                    None
                } else {
                    Some(true)
                }
            }
            Node::Or(xs) => {
                let mut unknown = false;
                for x in xs {
                    match x.eval3(assign) {
                        Some(true) => return Some(true),
                        None => unknown = true,
                        Some(false) => {}
                    }
                }
                if unknown {
                    None
                } else {
                    Some(false)
                }
            }
        }
    }

    pub fn eval(&self, point: &[u32]) -> bool {
        match self {
            Node::True => true,
            Node::False => false,
            Node::Atom { feature, value } => point[*feature] == *value,
            Node::Not(x) => !x.eval(point),
            Node::And(xs) => xs.iter().all(|x| x.eval(point)),
            Node::Or(xs) => xs.iter().any(|x| x.eval(point)),
        }
    }

    /// Marks every feature index the formula mentions.
    pub fn mark_features(&self, seen: &mut [bool]) {
        match self {
            Node::Atom { feature, .. } => seen[*feature] = true,
            Node::Not(x) => x.mark_features(seen),
            Node::And(xs) | Node::Or(xs) => xs.iter().for_each(|x| x.mark_features(seen)),
            Node::True | Node::False => {}
        }
    }
}

/// Set semantics of a class formula over the schema's classes.
pub fn class_extent(formula: &ClassFormula, schema: &Schema) -> Result<ClassSet> {
    let n = schema.class_count();
    Ok(match formula {
        Formula::True => ClassSet::full(n),
        Formula::False => ClassSet::empty(n),
        Formula::Atom(c) => {
            let i = schema.class_index(&c.0).ok_or_else(|| Error::UnknownClass(c.0.clone()))?;
            ClassSet::singleton(n, i)
        }
        Formula::Not(x) => class_extent(x, schema)?.complement(),
        Formula::And(xs) => {
            let mut acc = ClassSet::full(n);
            for x in xs {
                acc = acc.intersection(&class_extent(x, schema)?);
            }
            acc
        }
        Formula::Or(xs) => {
            let mut acc = ClassSet::empty(n);
            for x in xs {
                acc = acc.union(&class_extent(x, schema)?);
            }
            acc
        }
    })
}
