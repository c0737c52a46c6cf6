use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// A feature with its finite, ordered domain of value literals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    pub domain: Vec<String>,
}

#[derive(Deserialize)]
struct RawSchema {
    features: Vec<Feature>,
    classes: Vec<String>,
}

/// The feature alphabet (with domains) and the class alphabet.
///
/// Construct through [`Schema::new`]; every invariant (unique names, domains of
/// at least two distinct values, at least two classes, universe size below
/// 2^63) is checked there, so any `Schema` value in hand is valid.
#[derive(Clone, Serialize, Deserialize)]
#[serde(try_from = "RawSchema")]
pub struct Schema {
    features: Vec<Feature>,
    classes: Vec<String>,
    #[serde(skip)]
    feature_index: HashMap<String, usize>,
    #[serde(skip)]
    value_index: Vec<HashMap<String, u32>>,
    #[serde(skip)]
    class_index: HashMap<String, u32>,
}

impl TryFrom<RawSchema> for Schema {
    type Error = Error;

    fn try_from(raw: RawSchema) -> Result<Self, Error> {
        Schema::new(raw.features, raw.classes)
    }
}

impl Schema {
    pub fn new(features: Vec<Feature>, classes: Vec<String>) -> Result<Self, Error> {
        if features.len() < 2 {
            return Err(Error::InvalidSchema("at least two features are required".into()));
        }
        if classes.len() < 2 {
            return Err(Error::InvalidSchema("at least two classes are required".into()));
        }
        let mut feature_index = HashMap::new();
        let mut value_index = Vec::with_capacity(features.len());
        let mut universe: u64 = 1;
        for (i, f) in features.iter().enumerate() {
            if feature_index.insert(f.name.clone(), i).is_some() {
                return Err(Error::InvalidSchema(format!("duplicate feature {}", f.name)));
            }
            if f.domain.len() < 2 {
                return Err(Error::InvalidSchema(format!(
                    "feature {} needs a domain of at least two values",
                    f.name
                )));
            }
            let mut values = HashMap::new();
            for (j, v) in f.domain.iter().enumerate() {
                if values.insert(v.clone(), j as u32).is_some() {
                    return Err(Error::InvalidSchema(format!(
                        "duplicate value {v} in domain of {}",
                        f.name
                    )));
                }
            }
            value_index.push(values);
            universe = universe
                .checked_mul(f.domain.len() as u64)
                .filter(|n| *n <= 1u64 << 63)
                .ok_or_else(|| Error::InvalidSchema("universe size exceeds 2^63".into()))?;
        }
        let mut class_index = HashMap::new();
        for (i, c) in classes.iter().enumerate() {
            if class_index.insert(c.clone(), i as u32).is_some() {
                return Err(Error::InvalidSchema(format!("duplicate class {c}")));
            }
        }
        Ok(Schema {
            features,
            classes,
            feature_index,
            value_index,
            class_index,
        })
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn feature_count(&self) -> usize {
        self.features.len()
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_index.get(name).copied()
    }

    pub fn value_index(&self, feature: usize, value: &str) -> Option<u32> {
        self.value_index.get(feature)?.get(value).copied()
    }

    pub fn class_index(&self, name: &str) -> Option<u32> {
        self.class_index.get(name).copied()
    }

    pub fn domain_size(&self, feature: usize) -> usize {
        self.features[feature].domain.len()
    }

    pub fn value_name(&self, feature: usize, value: u32) -> &str {
        &self.features[feature].domain[value as usize]
    }

    pub fn class_name(&self, class: u32) -> &str {
        &self.classes[class as usize]
    }

    /// Number of points in the full universe, the product of all domain sizes.
    pub fn universe_size(&self) -> u64 {
        self.features.iter().map(|f| f.domain.len() as u64).product()
    }
}

impl PartialEq for Schema {
    fn eq(&self, other: &Self) -> bool {
        self.features == other.features && self.classes == other.classes
    }
}

impl Eq for Schema {}

impl fmt::Debug for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Schema")
            .field("features", &self.features)
            .field("classes", &self.classes)
            .finish()
    }
}
