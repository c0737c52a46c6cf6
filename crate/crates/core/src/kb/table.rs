use std::io::Read;

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::language::Schema;
use crate::semantics::DataPoint;

/// The known data points D and the classifier's label M(x) for each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassifierTable {
    schema: Schema,
    rows: IndexMap<DataPoint, u32>,
}

impl ClassifierTable {
    pub fn new(schema: Schema) -> Self {
        ClassifierTable { schema, rows: IndexMap::new() }
    }

    /// Adds a row. Repeating a row with the same class is a no-op; repeating
    /// a point with a different class is an error.
    pub fn insert(&mut self, point: DataPoint, class: u32) -> Result<()> {
        point.check(&self.schema)?;
        if class as usize >= self.schema.class_count() {
            return Err(Error::Table(format!("class index {class} out of range")));
        }
        match self.rows.get(&point) {
            Some(&c) if c != class => Err(Error::Table(format!(
                "point {} labelled both {} and {}",
                point.render(&self.schema),
                self.schema.class_name(c),
                self.schema.class_name(class)
            ))),
            Some(_) => Ok(()),
            None => {
                self.rows.insert(point, class);
                Ok(())
            }
        }
    }

    /// Adds a row given as value and class literals.
    pub fn insert_named<S: AsRef<str>>(&mut self, values: &[S], class: &str) -> Result<()> {
        let point = DataPoint::from_values(&self.schema, values)?;
        let c = self
            .schema
            .class_index(class)
            .ok_or_else(|| Error::UnknownClass(class.to_string()))?;
        self.insert(point, c)
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn class_of(&self, point: &DataPoint) -> Option<u32> {
        self.rows.get(point).copied()
    }

    /// Rows in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&DataPoint, u32)> {
        self.rows.iter().map(|(p, &c)| (p, c))
    }

    /// CSV with the schema's feature names plus a final `class` column.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<&str> = self.schema.features().iter().map(|f| f.name.as_str()).collect();
        header.push("class");
        w.write_record(&header).expect("write to memory");
        for (p, c) in self.iter() {
            let mut rec = p.values(&self.schema);
            rec.push(self.schema.class_name(c));
            w.write_record(&rec).expect("write to memory");
        }
        String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv output is utf-8")
    }
}

/// Reads a classifier table from CSV. The header must list the schema's
/// features in order followed by `class`; values are taken verbatim.
pub fn load_table<R: Read>(reader: R, schema: &Schema) -> Result<ClassifierTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::Table(e.to_string()))?.clone();
    let mut expected: Vec<&str> = schema.features().iter().map(|f| f.name.as_str()).collect();
    expected.push("class");
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Table(format!(
            "header mismatch: expected `{}`, found `{}`",
            expected.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut table = ClassifierTable::new(schema.clone());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Table(e.to_string()))?;
        let line = i + 2;
        let fields: Vec<&str> = rec.iter().collect();
        let (class, values) = fields.split_last().expect("record length checked by csv reader");
        table
            .insert_named(values, class)
            .map_err(|e| Error::Table(format!("row {line}: {e}")))?;
    }
    Ok(table)
}
