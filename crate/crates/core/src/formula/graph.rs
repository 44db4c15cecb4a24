use std::collections::VecDeque;

use super::Formula;

/// A variable-clause incidence. The edge id is `clause * k + position`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub clause: usize,
    pub var: usize,
    pub negated: bool,
}

/// Bipartite variable/clause graph of a formula.
///
/// Edges are numbered clause-major, so the edges of clause `a` are the
/// contiguous range `a*k .. (a+1)*k`. Variable adjacency lists hold edge ids
/// in increasing order.
#[derive(Clone, Debug)]
pub struct FactorGraph {
    num_vars: usize,
    k: usize,
    edges: Vec<Edge>,
    var_edges: Vec<Vec<usize>>,
}

impl FactorGraph {
    pub fn new(f: &Formula) -> Self {
        let k = f.k();
        let mut edges = Vec::with_capacity(k * f.num_clauses());
        let mut var_edges = vec![Vec::new(); f.num_vars()];
        for (a, c) in f.clauses().iter().enumerate() {
            for l in c.literals() {
                var_edges[l.var].push(edges.len());
                edges.push(Edge {
                    clause: a,
                    var: l.var,
                    negated: l.negated,
                });
            }
        }
        FactorGraph {
            num_vars: f.num_vars(),
            k,
            edges,
            var_edges,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_clauses(&self) -> usize {
        self.edges.len().checked_div(self.k).unwrap_or(0)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> Edge {
        self.edges[e]
    }

    /// Edge ids of clause `a`.
    pub fn clause_edges(&self, a: usize) -> std::ops::Range<usize> {
        a * self.k..(a + 1) * self.k
    }

    /// Edge ids incident to variable `i`.
    pub fn var_edges(&self, i: usize) -> &[usize] {
        &self.var_edges[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.var_edges[i].len()
    }

    /// `(clause, negated)` pairs for variable `i`.
    pub fn var_to_clauses(&self, i: usize) -> Vec<(usize, bool)> {
        self.var_edges[i]
            .iter()
            .map(|&e| (self.edges[e].clause, self.edges[e].negated))
            .collect()
    }

    /// `(variable, negated)` pairs for clause `a`.
    pub fn clause_to_vars(&self, a: usize) -> Vec<(usize, bool)> {
        self.clause_edges(a)
            .map(|e| (self.edges[e].var, self.edges[e].negated))
            .collect()
    }

    /// Hop distances from variable `src` to every variable, where two
    /// variables sharing a clause are at distance one. Unreachable variables
    /// get `usize::MAX`.
    pub fn distances_from(&self, src: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.num_vars];
        let mut clause_seen = vec![false; self.num_clauses()];
        let mut queue = VecDeque::new();
        dist[src] = 0;
        queue.push_back(src);
        while let Some(i) = queue.pop_front() {
            for &e in &self.var_edges[i] {
                let a = self.edges[e].clause;
                if clause_seen[a] {
                    continue;
                }
                clause_seen[a] = true;
                for e2 in self.clause_edges(a) {
                    let j = self.edges[e2].var;
                    if dist[j] == usize::MAX {
                        dist[j] = dist[i] + 1;
                        queue.push_back(j);
                    }
                }
            }
        }
        dist
    }

    /// Largest finite variable-to-variable distance, i.e. the maximum over
    /// connected components of their diameters. 0 when there are no clauses.
    pub fn diameter(&self) -> usize {
        (0..self.num_vars)
            .filter(|&i| !self.var_edges[i].is_empty())
            .map(|i| {
                self.distances_from(i)
                    .into_iter()
                    .filter(|&d| d != usize::MAX)
                    .max()
                    .unwrap_or(0)
            })
            .max()
            .unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{Clause, Literal};

    fn formula(n: usize, k: usize, clauses: &[&[i64]]) -> Formula {
        let clauses = clauses
            .iter()
            .map(|c| {
                Clause::new(
                    c.iter()
                        .map(|&l| Literal::new(l.unsigned_abs() as usize - 1, l < 0))
                        .collect(),
                )
                .unwrap()
            })
            .collect();
        Formula::new(n, k, clauses).unwrap()
    }

    #[test]
    fn empty_formula_has_isolated_nodes() {
        let g = Formula::empty(5, 3).factor_graph();
        assert_eq!(g.num_vars(), 5);
        assert_eq!(g.num_clauses(), 0);
        assert!((0..5).all(|i| g.degree(i) == 0));
        assert_eq!(g.diameter(), 0);
    }

    #[test]
    fn single_clause_adjacency() {
        let g = formula(2, 2, &[&[1, -2]]).factor_graph();
        assert_eq!(g.var_to_clauses(0), vec![(0, false)]);
        assert_eq!(g.var_to_clauses(1), vec![(0, true)]);
        assert_eq!(g.clause_to_vars(0), vec![(0, false), (1, true)]);
    }

    #[test]
    fn adjacency_is_mirrored_and_degrees_sum() {
        let f = Formula::generate_random(30, 20, 3, 5).unwrap();
        let g = f.factor_graph();
        let total: usize = (0..30).map(|i| g.degree(i)).sum();
        assert_eq!(total, 60);
        for i in 0..30 {
            for (a, neg) in g.var_to_clauses(i) {
                assert!(g.clause_to_vars(a).contains(&(i, neg)));
            }
        }
        for a in 0..20 {
            for (i, neg) in g.clause_to_vars(a) {
                assert!(g.var_to_clauses(i).contains(&(a, neg)));
            }
        }
    }

    #[test]
    fn path_diameter() {
        let g = formula(3, 2, &[&[1, 2], &[2, 3]]).factor_graph();
        assert_eq!(g.diameter(), 2);
    }

    #[test]
    fn disconnected_takes_max_component() {
        let g = formula(7, 2, &[&[1, 2], &[3, 4], &[4, 5], &[5, 6]]).factor_graph();
        assert_eq!(g.diameter(), 3);
    }

    /// All-pairs shortest paths on the variable graph by Floyd-Warshall.
    fn floyd_diameter(f: &Formula) -> usize {
        let n = f.num_vars();
        let inf = usize::MAX / 4;
        let mut d = vec![vec![inf; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = 0;
        }
        for c in f.clauses() {
            for a in c.literals() {
                for b in c.literals() {
                    if a.var != b.var {
                        d[a.var][b.var] = 1;
                    }
                }
            }
        }
        for m in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let via = d[i][m] + d[m][j];
                    if via < d[i][j] {
                        d[i][j] = via;
                    }
                }
            }
        }
        d.iter()
            .flatten()
            .copied()
            .filter(|&x| x < inf)
            .max()
            .unwrap_or(0)
    }

    #[test]
    fn diameter_matches_all_pairs_oracle() {
        let f = Formula::generate_random(50, 30, 3, 9).unwrap();
        assert_eq!(f.factor_graph().diameter(), floyd_diameter(&f));
        for seed in 0..20 {
            let f = Formula::generate_random(25, 8 + seed as usize, 3, seed).unwrap();
            assert_eq!(f.factor_graph().diameter(), floyd_diameter(&f));
        }
    }

    #[test]
    fn diameter_invariant_under_clause_reordering() {
        let f = Formula::generate_random(40, 25, 3, 17).unwrap();
        let mut order: Vec<usize> = (0..25).collect();
        order.reverse();
        order.swap(3, 11);
        let g = f.with_clause_order(&order);
        assert_eq!(f.factor_graph().diameter(), g.factor_graph().diameter());
    }
}
