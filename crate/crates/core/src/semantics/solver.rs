//! Backtracking search over the features a query mentions. A query is a
//! conjunction of formulas, each taken positively or negated.

use super::compiled::Node;
use crate::language::Schema;

#[derive(Debug, Clone, Copy)]
pub struct Literal<'a> {
    pub node: &'a Node,
    pub positive: bool,
}

impl<'a> Literal<'a> {
    pub fn pos(node: &'a Node) -> Self {
        Literal { node, positive: true }
    }

    pub fn neg(node: &'a Node) -> Self {
        Literal { node, positive: false }
    }
}

fn status(lits: &[Literal<'_>], assign: &[Option<u32>]) -> Option<bool> {
    let mut unknown = false;
    for l in lits {
        match l.node.eval3(assign) {
            Some(b) if b != l.positive => return Some(false),
            None => unknown = true,
            Some(_) => {}
        }
    }
    if unknown {
        None
    } else {
        Some(true)
    }
}

pub fn mentioned(schema: &Schema, lits: &[Literal<'_>]) -> Vec<usize> {
    let mut seen = vec![false; schema.feature_count()];
    for l in lits {
        l.node.mark_features(&mut seen);
    }
    (0..seen.len()).filter(|&i| seen[i]).collect()
}

struct Search<'q, 'a> {
    schema: &'q Schema,
    lits: &'q [Literal<'a>],
    order: Vec<usize>,
    assign: Vec<Option<u32>>,
}

impl Search<'_, '_> {
    /// Calls `on_true` at every node where the query is already decided true;
    /// the callback returns `true` to stop the search.
    fn run(&mut self, depth: usize, on_true: &mut dyn FnMut(&[Option<u32>]) -> bool) -> bool {
        match status(self.lits, &self.assign) {
            Some(false) => return false,
            Some(true) => return on_true(&self.assign),
            None => {}
        }
        let Some(&f) = self.order.get(depth) else {
            return false;
        };
        for v in 0..self.schema.domain_size(f) as u32 {
            self.assign[f] = Some(v);
            if self.run(depth + 1, on_true) {
                self.assign[f] = None;
                return true;
            }
        }
        self.assign[f] = None;
        false
    }
}

fn search<'q, 'a>(schema: &'q Schema, lits: &'q [Literal<'a>]) -> Search<'q, 'a> {
    Search {
        schema,
        lits,
        order: mentioned(schema, lits),
        assign: vec![None; schema.feature_count()],
    }
}

/// A full point satisfying every literal, unassigned features set to their
/// first domain value.
pub fn find_model(schema: &Schema, lits: &[Literal<'_>]) -> Option<Vec<u32>> {
    let mut found = None;
    search(schema, lits).run(0, &mut |a| {
        found = Some(a.iter().map(|v| v.unwrap_or(0)).collect());
        true
    });
    found
}

/// Number of points of the full universe satisfying every literal.
pub fn count_models(schema: &Schema, lits: &[Literal<'_>]) -> u128 {
    let mut total: u128 = 0;
    search(schema, lits).run(0, &mut |a| {
        total += a
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_none())
            .map(|(i, _)| schema.domain_size(i) as u128)
            .product::<u128>();
        false
    });
    total
}

/// Every satisfying assignment of the `features` grid (which must include all
/// mentioned features), in lexicographic order.
pub fn enumerate_grid(schema: &Schema, lits: &[Literal<'_>], features: &[usize]) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cell = vec![0u32; features.len()];
    let mut point = vec![0u32; schema.feature_count()];
    loop {
        for (k, &f) in features.iter().enumerate() {
            point[f] = cell[k];
        }
        if lits.iter().all(|l| l.node.eval(&point) == l.positive) {
            out.push(cell.clone());
        }
        // odometer increment, last feature fastest
        let mut k = features.len();
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            cell[k] += 1;
            if (cell[k] as usize) < schema.domain_size(features[k]) {
                break;
            }
            cell[k] = 0;
        }
    }
}
