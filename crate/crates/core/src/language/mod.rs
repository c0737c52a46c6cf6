//! Rule DSL: schema, formula and rule syntax trees, canonical form, parsing
//! and rendering.

mod formula;
mod parser;
mod rule;
mod schema;

use std::fmt::Write;

pub use formula::{
    is_bare_value, render_value, Atom, ClassAtom, ClassFormula, FeatureAtom, FeatureFormula,
    Formula,
};
pub use parser::{fresh_id, parse_document, parse_rule, parse_rule_fresh, parse_rule_text};
pub use rule::{Origin, Rule, RuleKey};
pub use schema::{Feature, Schema};

/// A parsed `.xkb` file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub schema: Schema,
    pub rules: Vec<Rule>,
}

impl Document {
    pub fn canonicalize(&self) -> Document {
        Document {
            schema: self.schema.clone(),
            rules: self.rules.iter().map(Rule::canonicalize).collect(),
        }
    }

    pub fn render(&self) -> String {
        render_document(&self.schema, &self.rules)
    }
}

/// Renders the schema block.
pub fn render_schema(schema: &Schema) -> String {
    let mut out = String::from("schema {\n");
    for f in schema.features() {
        let values: Vec<String> = f.domain.iter().map(|v| render_value(v)).collect();
        let _ = writeln!(out, "  feature {}: {{{}}};", f.name, values.join(", "));
    }
    let _ = writeln!(out, "  classes {{{}}};", schema.classes().join(", "));
    out.push_str("}\n");
    out
}

/// One statement line. Data-origin rules are written as `data`, everything
/// else as `rule`.
pub fn render_rule(rule: &Rule) -> String {
    let kw = if rule.origin == Origin::Data { "data" } else { "rule" };
    format!("{kw} {rule};")
}

pub fn render_document(schema: &Schema, rules: &[Rule]) -> String {
    let mut out = render_schema(schema);
    for r in rules {
        out.push_str(&render_rule(r));
        out.push('\n');
    }
    out
}
