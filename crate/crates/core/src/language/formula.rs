//! Formula trees shared by rule bodies (feature atoms) and heads (class atoms).

use std::fmt;

/// Atom types that can appear at the leaves of a [`Formula`].
pub trait Atom: Clone + Eq + fmt::Debug + fmt::Display {}

/// `feature=value`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureAtom {
    pub feature: String,
    pub value: String,
}

impl FeatureAtom {
    pub fn new(feature: impl Into<String>, value: impl Into<String>) -> Self {
        FeatureAtom { feature: feature.into(), value: value.into() }
    }
}

impl fmt::Display for FeatureAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.feature, render_value(&self.value))
    }
}

impl Atom for FeatureAtom {}

/// A class label.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassAtom(pub String);

impl fmt::Display for ClassAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Atom for ClassAtom {}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula<A> {
    True,
    False,
    Atom(A),
    Not(Box<Formula<A>>),
    And(Vec<Formula<A>>),
    Or(Vec<Formula<A>>),
}

pub type FeatureFormula = Formula<FeatureAtom>;
pub type ClassFormula = Formula<ClassAtom>;

impl<A: Atom> Formula<A> {
    pub fn atom(a: A) -> Self {
        Formula::Atom(a)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(inner: Formula<A>) -> Self {
        Formula::Not(Box::new(inner))
    }

    /// Conjunction with nested conjunctions flattened. Zero operands give
    /// `true`, one operand is returned as is.
    pub fn and(parts: impl IntoIterator<Item = Formula<A>>) -> Self {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Formula::And(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Formula::True,
            1 => out.pop().unwrap(),
            _ => Formula::And(out),
        }
    }

    /// Disjunction with nested disjunctions flattened. Zero operands give
    /// `false`, one operand is returned as is.
    pub fn or(parts: impl IntoIterator<Item = Formula<A>>) -> Self {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Formula::Or(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Formula::False,
            1 => out.pop().unwrap(),
            _ => Formula::Or(out),
        }
    }

    /// Visits every atom in the tree, left to right.
    pub fn atoms(&self) -> Vec<&A> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a A>) {
        match self {
            Formula::Atom(a) => out.push(a),
            Formula::Not(inner) => inner.collect_atoms(out),
            Formula::And(xs) | Formula::Or(xs) => xs.iter().for_each(|x| x.collect_atoms(out)),
            Formula::True | Formula::False => {}
        }
    }

    /// Negation normal form, flattened, operands sorted by their rendering and
    /// deduplicated. Purely syntactic: `a & !a` stays as it is.
    pub fn canonical(&self) -> Self {
        self.canon(true)
    }

    fn canon(&self, positive: bool) -> Self {
        match (self, positive) {
            (Formula::True, true) | (Formula::False, false) => Formula::True,
            (Formula::True, false) | (Formula::False, true) => Formula::False,
            (Formula::Atom(a), true) => Formula::Atom(a.clone()),
            (Formula::Atom(a), false) => Formula::not(Formula::Atom(a.clone())),
            (Formula::Not(inner), p) => inner.canon(!p),
            (Formula::And(xs), true) | (Formula::Or(xs), false) => {
                sorted_junction(xs.iter().map(|x| x.canon(positive)).collect(), true)
            }
            (Formula::Or(xs), true) | (Formula::And(xs), false) => {
                sorted_junction(xs.iter().map(|x| x.canon(positive)).collect(), false)
            }
        }
    }

    /// True when no `And` sits directly under an `And` (same for `Or`) and
    /// every junction has at least two operands.
    pub fn is_flat(&self) -> bool {
        match self {
            Formula::True | Formula::False | Formula::Atom(_) => true,
            Formula::Not(inner) => inner.is_flat(),
            Formula::And(xs) => {
                xs.len() >= 2 && xs.iter().all(|x| !matches!(x, Formula::And(_)) && x.is_flat())
            }
            Formula::Or(xs) => {
                xs.len() >= 2 && xs.iter().all(|x| !matches!(x, Formula::Or(_)) && x.is_flat())
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Formula::Or(_) => 0,
            Formula::And(_) => 1,
            _ => 2,
        }
    }
}

fn sorted_junction<A: Atom>(parts: Vec<Formula<A>>, conjunction: bool) -> Formula<A> {
    let flat = if conjunction { Formula::and(parts) } else { Formula::or(parts) };
    let xs = match (&flat, conjunction) {
        (Formula::And(xs), true) | (Formula::Or(xs), false) => xs,
        _ => return flat,
    };
    let mut keyed: Vec<(String, Formula<A>)> =
        xs.iter().map(|x| (x.to_string(), x.clone())).collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    keyed.dedup_by(|a, b| a.0 == b.0);
    let items = keyed.into_iter().map(|(_, f)| f);
    if conjunction {
        Formula::and(items)
    } else {
        Formula::or(items)
    }
}

impl<A: Atom> fmt::Display for Formula<A> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => f.write_str("true"),
            Formula::False => f.write_str("false"),
            Formula::Atom(a) => write!(f, "{a}"),
            Formula::Not(inner) => {
                if inner.precedence() < 2 {
                    write!(f, "!({inner})")
                } else {
                    write!(f, "!{inner}")
                }
            }
            Formula::And(xs) if xs.is_empty() => f.write_str("true"),
            Formula::Or(xs) if xs.is_empty() => f.write_str("false"),
            Formula::And(xs) => join(f, xs, " & ", 1),
            Formula::Or(xs) => join(f, xs, " | ", 0),
        }
    }
}

fn join<A: Atom>(f: &mut fmt::Formatter<'_>, xs: &[Formula<A>], sep: &str, level: u8) -> fmt::Result {
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            f.write_str(sep)?;
        }
        // Operands of equal precedence are parenthesized too, so that an
        // unflattened tree still renders unambiguously.
        if x.precedence() <= level {
            write!(f, "({x})")?;
        } else {
            write!(f, "{x}")?;
        }
    }
    Ok(())
}

/// Whether a value can be written without quotes.
pub fn is_bare_value(v: &str) -> bool {
    let mut chars = v.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphanumeric() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-'))
}

pub fn render_value(v: &str) -> String {
    if is_bare_value(v) {
        v.to_string()
    } else {
        let mut out = String::with_capacity(v.len() + 2);
        out.push('"');
        for c in v.chars() {
            match c {
                '"' => out.push_str("\\\""),
                '\\' => out.push_str("\\\\"),
                '\n' => out.push_str("\\n"),
                '\t' => out.push_str("\\t"),
                c => out.push(c),
            }
        }
        out.push('"');
        out
    }
}
