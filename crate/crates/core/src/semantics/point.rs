use std::fmt;

use fixedbitset::FixedBitSet;

use crate::error::{Error, Result};
use crate::language::Schema;

/// A total assignment, stored as one domain index per schema feature.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DataPoint(pub Vec<u32>);

impl DataPoint {
    /// Builds a point from value literals given in schema feature order.
    pub fn from_values<S: AsRef<str>>(schema: &Schema, values: &[S]) -> Result<Self> {
        if values.len() != schema.feature_count() {
            return Err(Error::SchemaMismatch(format!(
                "point has {} values, schema has {} features",
                values.len(),
                schema.feature_count()
            )));
        }
        values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                schema.value_index(i, v.as_ref()).ok_or_else(|| Error::UnknownValue {
                    feature: schema.features()[i].name.clone(),
                    value: v.as_ref().to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(DataPoint)
    }

    pub fn values<'s>(&self, schema: &'s Schema) -> Vec<&'s str> {
        self.0.iter().enumerate().map(|(i, &v)| schema.value_name(i, v)).collect()
    }

    pub fn value_strings(&self, schema: &Schema) -> Vec<String> {
        self.values(schema).into_iter().map(str::to_string).collect()
    }

    pub fn check(&self, schema: &Schema) -> Result<()> {
        if self.0.len() != schema.feature_count()
            || self.0.iter().enumerate().any(|(i, &v)| v as usize >= schema.domain_size(i))
        {
            return Err(Error::SchemaMismatch("data point does not fit the schema".into()));
        }
        Ok(())
    }

    /// `(v1,v2,...)` using the schema's value literals.
    pub fn render(&self, schema: &Schema) -> String {
        format!("({})", self.values(schema).join(","))
    }
}

/// A subset of the schema's classes.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ClassSet(FixedBitSet);

impl ClassSet {
    pub fn empty(n: usize) -> Self {
        ClassSet(FixedBitSet::with_capacity(n))
    }

    pub fn full(n: usize) -> Self {
        let mut b = FixedBitSet::with_capacity(n);
        b.insert_range(..);
        ClassSet(b)
    }

    pub fn singleton(n: usize, class: u32) -> Self {
        let mut s = ClassSet::empty(n);
        s.0.insert(class as usize);
        s
    }

    pub fn len(&self) -> usize {
        self.0.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_clear()
    }

    pub fn is_full(&self) -> bool {
        self.0.count_ones(..) == self.0.len()
    }

    pub fn contains(&self, class: u32) -> bool {
        self.0.contains(class as usize)
    }

    pub fn is_subset(&self, other: &ClassSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn is_disjoint(&self, other: &ClassSet) -> bool {
        self.0.is_disjoint(&other.0)
    }

    pub fn intersection(&self, other: &ClassSet) -> ClassSet {
        let mut b = self.0.clone();
        b.intersect_with(&other.0);
        ClassSet(b)
    }

    pub fn union(&self, other: &ClassSet) -> ClassSet {
        let mut b = self.0.clone();
        b.union_with(&other.0);
        ClassSet(b)
    }

    pub fn complement(&self) -> ClassSet {
        let mut b = self.0.clone();
        b.toggle_range(..);
        ClassSet(b)
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.0.ones().map(|i| i as u32)
    }

    pub fn names(&self, schema: &Schema) -> Vec<String> {
        self.iter().map(|c| schema.class_name(c).to_string()).collect()
    }
}

impl fmt::Debug for ClassSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}
