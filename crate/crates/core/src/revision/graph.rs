//! The conflict graph of a rule set and the graph algorithms behind
//! remainders, kernels and incisions.

use fixedbitset::FixedBitSet;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::language::Rule;
use crate::semantics::{CompiledRule, ConflictWitness, Reasoner, SelfConflict};

/// Vertices are rules; an edge joins two rules that conflict; a self-loop
/// marks a rule with a satisfiable body and an empty head.
#[derive(Debug, Clone, Serialize)]
pub struct ConflictGraph {
    pub vertices: Vec<String>,
    pub edges: Vec<ConflictWitness>,
    pub self_loops: Vec<SelfConflict>,
    #[serde(skip)]
    adj: Vec<FixedBitSet>,
    #[serde(skip)]
    looped: FixedBitSet,
}

impl ConflictGraph {
    pub fn build(reasoner: &Reasoner<'_>, rules: &[Rule]) -> Result<Self> {
        Ok(Self::from_compiled(reasoner, &reasoner.compile_all(rules)?))
    }

    pub fn from_compiled(reasoner: &Reasoner<'_>, rules: &[CompiledRule]) -> Self {
        let n = rules.len();
        let mut adj = vec![FixedBitSet::with_capacity(n); n];
        let mut looped = FixedBitSet::with_capacity(n);
        let mut edges = Vec::new();
        let mut self_loops = Vec::new();
        for i in 0..n {
            if let Some(p) = reasoner.self_conflict_point(&rules[i]) {
                looped.insert(i);
                self_loops.push(SelfConflict {
                    rule: rules[i].id.clone(),
                    point: p.value_strings(reasoner.schema),
                });
            }
            for j in i + 1..n {
                if let Some(p) = reasoner.conflict_point(&rules[i], &rules[j]) {
                    adj[i].insert(j);
                    adj[j].insert(i);
                    edges.push(reasoner.witness(&rules[i], &rules[j], &p));
                }
            }
        }
        ConflictGraph {
            vertices: rules.iter().map(|r| r.id.clone()).collect(),
            edges,
            self_loops,
            adj,
            looped,
        }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        self.adj[i].contains(j)
    }

    pub fn is_self_loop(&self, i: usize) -> bool {
        self.looped.contains(i)
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[i].ones()
    }

    /// Conflicting pairs plus self-loops.
    pub fn conflict_count(&self) -> usize {
        self.edges.len() + self.self_loops.len()
    }

    /// Whether the vertex set is free of edges and self-loops.
    pub fn is_independent(&self, set: &[usize]) -> bool {
        set.iter().enumerate().all(|(k, &i)| {
            !self.is_self_loop(i) && set[k + 1..].iter().all(|&j| !self.adjacent(i, j))
        })
    }

    /// All maximal independent sets of the subgraph induced by `allowed`, each
    /// sorted, the list sorted. Errors once more than `cap` sets are found.
    pub fn maximal_independent_sets(&self, allowed: &[usize], cap: usize) -> Result<Vec<Vec<usize>>> {
        let n = self.len();
        let mut allowed_set = FixedBitSet::with_capacity(n);
        allowed.iter().for_each(|&i| allowed_set.insert(i));
        // Independent sets of G are cliques of its complement.
        let non_adj: Vec<FixedBitSet> = (0..n)
            .map(|v| {
                let mut s = allowed_set.clone();
                s.difference_with(&self.adj[v]);
                s.set(v, false);
                s
            })
            .collect();
        let mut out = Vec::new();
        let mut r = Vec::new();
        bron_kerbosch(&non_adj, &mut r, allowed_set, FixedBitSet::with_capacity(n), &mut out, cap)?;
        for s in &mut out {
            s.sort_unstable();
        }
        out.sort();
        Ok(out)
    }

    /// Greedy independent set: walk `order` and keep each vertex compatible
    /// with `fixed` and everything kept so far.
    pub fn greedy_independent(&self, fixed: &[usize], order: &[usize]) -> Vec<usize> {
        let mut kept: Vec<usize> = Vec::new();
        for &v in order {
            if self.is_self_loop(v) || fixed.iter().chain(&kept).any(|&u| self.adjacent(u, v)) {
                continue;
            }
            kept.push(v);
        }
        kept
    }

    /// Edges among `vertices` (each pair once).
    pub fn induced_edges(&self, vertices: &[usize]) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (k, &i) in vertices.iter().enumerate() {
            for &j in &vertices[k + 1..] {
                if self.adjacent(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

fn bron_kerbosch(
    non_adj: &[FixedBitSet],
    r: &mut Vec<usize>,
    mut p: FixedBitSet,
    mut x: FixedBitSet,
    out: &mut Vec<Vec<usize>>,
    cap: usize,
) -> Result<()> {
    if p.is_clear() && x.is_clear() {
        if out.len() == cap {
            return Err(Error::CapExceeded { what: "remainder enumeration".into(), limit: cap, found: cap + 1 });
        }
        out.push(r.clone());
        return Ok(());
    }
    let pivot = p
        .ones()
        .chain(x.ones())
        .max_by_key(|&u| p.intersection(&non_adj[u]).count())
        .expect("p or x is non-empty");
    let candidates: Vec<usize> = p.difference(&non_adj[pivot]).collect();
    for v in candidates {
        r.push(v);
        let mut np = p.clone();
        np.intersect_with(&non_adj[v]);
        let mut nx = x.clone();
        nx.intersect_with(&non_adj[v]);
        bron_kerbosch(non_adj, r, np, nx, out, cap)?;
        r.pop();
        p.set(v, false);
        x.insert(v);
    }
    Ok(())
}

/// Exact minimum vertex cover of `edges`. Vertices are tried in the given
/// `order` (least protected first), so among covers of minimum size the
/// lexicographically first one in that order is returned.
pub fn min_vertex_cover(edges: &[(usize, usize)], order: &[usize], limit: usize) -> Result<Vec<usize>> {
    let verts: Vec<usize> = order
        .iter()
        .copied()
        .filter(|v| edges.iter().any(|&(a, b)| a == *v || b == *v))
        .collect();
    let limit = limit.min(63);
    if verts.len() > limit {
        return Err(Error::CapExceeded {
            what: "exact vertex cover vertices".into(),
            limit,
            found: verts.len(),
        });
    }
    if edges.is_empty() {
        return Ok(Vec::new());
    }
    let pos = |v: usize| verts.iter().position(|&u| u == v).expect("edge endpoint listed");
    let masks: Vec<(u64, u64)> = edges.iter().map(|&(a, b)| (1 << pos(a), 1 << pos(b))).collect();
    let covers = |m: u64| masks.iter().all(|&(a, b)| m & (a | b) != 0);
    for k in 1..=verts.len() {
        let mut comb: Vec<usize> = (0..k).collect();
        loop {
            let m = comb.iter().fold(0u64, |m, &i| m | 1 << i);
            if covers(m) {
                return Ok(comb.iter().map(|&i| verts[i]).collect());
            }
            // next combination in lexicographic order
            let mut i = k;
            loop {
                if i == 0 {
                    break;
                }
                i -= 1;
                if comb[i] < verts.len() - k + i {
                    break;
                }
            }
            if comb[i] >= verts.len() - k + i {
                break;
            }
            comb[i] += 1;
            for j in i + 1..k {
                comb[j] = comb[j - 1] + 1;
            }
        }
    }
    unreachable!("the full vertex set is a cover")
}

/// Greedy vertex cover: repeatedly take the vertex with the smallest `tier`,
/// then the highest remaining degree, then earliest in `order`; finally drop
/// any chosen vertex whose edges are all covered by others, trying the most
/// protected (latest in `order`) first.
pub fn greedy_vertex_cover(edges: &[(usize, usize)], order: &[usize], tier: impl Fn(usize) -> u8) -> Vec<usize> {
    let rank = |v: usize| order.iter().position(|&u| u == v).unwrap_or(usize::MAX);
    let mut remaining: Vec<(usize, usize)> = edges.to_vec();
    let mut cover = Vec::new();
    while !remaining.is_empty() {
        let mut cands: Vec<usize> = remaining.iter().flat_map(|&(a, b)| [a, b]).collect();
        cands.sort_unstable();
        cands.dedup();
        let degree = |v: usize| remaining.iter().filter(|&&(a, b)| a == v || b == v).count();
        let v = *cands
            .iter()
            .min_by_key(|&&v| (tier(v), std::cmp::Reverse(degree(v)), rank(v)))
            .expect("remaining edges have endpoints");
        cover.push(v);
        remaining.retain(|&(a, b)| a != v && b != v);
    }
    let mut by_protection = cover.clone();
    by_protection.sort_by_key(|&v| std::cmp::Reverse(rank(v)));
    for v in by_protection {
        let redundant = edges
            .iter()
            .filter(|&&(a, b)| a == v || b == v)
            .all(|&(a, b)| {
                let other = if a == v { b } else { a };
                cover.contains(&other)
            });
        if redundant {
            cover.retain(|&u| u != v);
        }
    }
    cover
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_cover_prefers_earlier_vertices() {
        // path 0-1-2: {1} is the unique minimum cover
        assert_eq!(min_vertex_cover(&[(0, 1), (1, 2)], &[0, 1, 2], 24).unwrap(), vec![1]);
        // single edge, order decides
        assert_eq!(min_vertex_cover(&[(3, 5)], &[5, 3], 24).unwrap(), vec![5]);
        assert_eq!(min_vertex_cover(&[(3, 5)], &[3, 5], 24).unwrap(), vec![3]);
        // triangle needs two
        let c = min_vertex_cover(&[(0, 1), (1, 2), (0, 2)], &[0, 1, 2], 24).unwrap();
        assert_eq!(c, vec![0, 1]);
        assert!(min_vertex_cover(&[(0, 1)], &[0, 1], 1).is_err());
    }

    #[test]
    fn greedy_cover_is_minimal() {
        // star centred on 0 plus a pendant edge
        let edges = [(0, 1), (0, 2), (0, 3), (3, 4)];
        let c = greedy_vertex_cover(&edges, &[0, 1, 2, 3, 4], |_| 0);
        assert_eq!(c, vec![0, 3]);
        // tier forces the leaves first, pruning keeps the result minimal
        let c = greedy_vertex_cover(&[(0, 1)], &[0, 1], |v| if v == 0 { 1 } else { 0 });
        assert_eq!(c, vec![1]);
    }
}
