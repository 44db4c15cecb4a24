//! k-SAT formulas: the random ensemble, energies and factor graphs.

mod dimacs;
mod graph;

pub use dimacs::{
    parse_dimacs, parse_dimacs_with_meta, write_dimacs, write_dimacs_with_comments, GenerationMeta,
};
pub use graph::{Edge, FactorGraph};

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Rng64};

/// A variable (0-based) together with its sign in a clause.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub var: usize,
    pub negated: bool,
}

impl Literal {
    pub fn new(var: usize, negated: bool) -> Self {
        Literal { var, negated }
    }

    pub fn pos(var: usize) -> Self {
        Literal::new(var, false)
    }

    pub fn neg(var: usize) -> Self {
        Literal::new(var, true)
    }

    /// Whether setting the variable to `value` makes this literal true.
    #[inline]
    pub fn satisfied_by(self, value: bool) -> bool {
        value != self.negated
    }
}

/// A disjunction of literals over pairwise distinct variables.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Clause {
    literals: Vec<Literal>,
}

impl Clause {
    pub fn new(literals: Vec<Literal>) -> Result<Self> {
        for (i, a) in literals.iter().enumerate() {
            if literals[..i].iter().any(|b| b.var == a.var) {
                return Err(Error::UnsupportedFormula(format!(
                    "variable {} appears twice in one clause",
                    a.var + 1
                )));
            }
        }
        Ok(Clause { literals })
    }

    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    pub fn width(&self) -> usize {
        self.literals.len()
    }

    pub fn is_satisfied(&self, x: &Assignment) -> bool {
        self.literals
            .iter()
            .any(|l| l.satisfied_by(x.values[l.var]))
    }
}

/// A k-SAT formula over `num_vars` variables.
///
/// `k == 0` is only allowed for a formula without clauses whose width is
/// unknown (for instance an empty DIMACS file without a generation comment).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Formula {
    num_vars: usize,
    k: usize,
    clauses: Vec<Clause>,
}

impl Formula {
    pub fn new(num_vars: usize, k: usize, clauses: Vec<Clause>) -> Result<Self> {
        for (a, c) in clauses.iter().enumerate() {
            if c.width() != k {
                return Err(Error::UnsupportedFormula(format!(
                    "clause {} has width {} but the formula has width {k}",
                    a + 1,
                    c.width()
                )));
            }
            if let Some(l) = c.literals().iter().find(|l| l.var >= num_vars) {
                return Err(Error::UnsupportedFormula(format!(
                    "clause {} references variable {} but there are only {num_vars}",
                    a + 1,
                    l.var + 1
                )));
            }
        }
        if k == 0 && !clauses.is_empty() {
            return Err(Error::UnsupportedFormula(
                "clauses must be non-empty".into(),
            ));
        }
        Ok(Formula {
            num_vars,
            k,
            clauses,
        })
    }

    pub fn empty(num_vars: usize, k: usize) -> Self {
        Formula {
            num_vars,
            k,
            clauses: Vec::new(),
        }
    }

    /// Draws `m` clauses i.i.d. uniformly from the `2^k C(n, k)` possible
    /// k-clauses. Repeated clauses are allowed; repeated variables inside a
    /// clause are not.
    pub fn generate_random(n: usize, m: usize, k: usize, seed: u64) -> Result<Self> {
        Self::generate_with(n, m, k, &mut rng::from_seed(seed))
    }

    pub fn generate_with(n: usize, m: usize, k: usize, rng: &mut Rng64) -> Result<Self> {
        if k < 2 {
            return Err(Error::params(format!("k must be at least 2 (got {k})")));
        }
        if n < k {
            return Err(Error::params(format!("n < k (n = {n}, k = {k})")));
        }
        let clauses = (0..m)
            .map(|_| {
                let literals = index::sample(rng, n, k)
                    .into_iter()
                    .map(|var| Literal::new(var, rng.random::<bool>()))
                    .collect();
                Clause { literals }
            })
            .collect();
        Ok(Formula {
            num_vars: n,
            k,
            clauses,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    /// Clause density `M / N` (0 for a formula without variables).
    pub fn alpha(&self) -> f64 {
        if self.num_vars == 0 {
            0.0
        } else {
            self.clauses.len() as f64 / self.num_vars as f64
        }
    }

    /// Number of clauses violated by `x`.
    pub fn energy(&self, x: &Assignment) -> Result<usize> {
        if x.len() != self.num_vars {
            return Err(Error::InvalidAssignment {
                expected: self.num_vars,
                got: x.len(),
            });
        }
        Ok(self.clauses.iter().filter(|c| !c.is_satisfied(x)).count())
    }

    pub fn factor_graph(&self) -> FactorGraph {
        FactorGraph::new(self)
    }

    /// The same formula with the clause list permuted.
    pub fn with_clause_order(&self, order: &[usize]) -> Formula {
        Formula {
            num_vars: self.num_vars,
            k: self.k,
            clauses: order.iter().map(|&a| self.clauses[a].clone()).collect(),
        }
    }

    /// The formula obtained by flipping every literal of the given variables.
    pub fn flip_vars(&self, vars: &[usize]) -> Formula {
        let mut flip = vec![false; self.num_vars];
        for &v in vars {
            flip[v] = true;
        }
        let clauses = self
            .clauses
            .iter()
            .map(|c| Clause {
                literals: c
                    .literals
                    .iter()
                    .map(|l| Literal::new(l.var, l.negated ^ flip[l.var]))
                    .collect(),
            })
            .collect();
        Formula {
            num_vars: self.num_vars,
            k: self.k,
            clauses,
        }
    }
}

/// A full truth assignment.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Assignment {
    values: Vec<bool>,
}

impl Assignment {
    pub fn new(values: Vec<bool>) -> Self {
        Assignment { values }
    }

    /// Variable `i` takes bit `i` of `bits`.
    pub fn from_bits(bits: u64, n: usize) -> Self {
        Assignment {
            values: (0..n).map(|i| bits >> i & 1 == 1).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    pub fn get(&self, i: usize) -> bool {
        self.values[i]
    }
}

impl From<Vec<bool>> for Assignment {
    fn from(values: Vec<bool>) -> Self {
        Assignment::new(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn or2(a: Literal, b: Literal) -> Formula {
        Formula::new(2, 2, vec![Clause::new(vec![a, b]).unwrap()]).unwrap()
    }

    #[test]
    fn empty_generation() {
        let f = Formula::generate_random(4, 0, 2, 7).unwrap();
        assert_eq!(f.num_clauses(), 0);
        assert_eq!(f.num_vars(), 4);
    }

    #[test]
    fn generated_clauses_have_distinct_vars() {
        let f = Formula::generate_random(20, 6, 3, 1).unwrap();
        assert_eq!(f.num_clauses(), 6);
        for c in f.clauses() {
            assert_eq!(c.width(), 3);
            let mut vars: Vec<_> = c.literals().iter().map(|l| l.var).collect();
            vars.sort();
            vars.dedup();
            assert_eq!(vars.len(), 3);
        }
    }

    #[test]
    fn no_repeated_variable_over_many_clauses() {
        let f = Formula::generate_random(6, 40_000, 3, 99).unwrap();
        assert_eq!(f.num_clauses() * 3, 120_000);
        for c in f.clauses() {
            let l = c.literals();
            assert!(l[0].var != l[1].var && l[0].var != l[2].var && l[1].var != l[2].var);
        }
    }

    #[test]
    fn sign_frequency_is_balanced() {
        let f = Formula::generate_random(10, 10_000, 3, 3).unwrap();
        let neg = f
            .clauses()
            .iter()
            .flat_map(|c| c.literals())
            .filter(|l| l.negated)
            .count();
        let freq = neg as f64 / 30_000.0;
        assert!((freq - 0.5).abs() <= 0.02, "negation frequency {freq}");
    }

    #[test]
    fn generation_is_deterministic() {
        let a = Formula::generate_random(50, 30, 4, 123).unwrap();
        let b = Formula::generate_random(50, 30, 4, 123).unwrap();
        let c = Formula::generate_random(50, 30, 4, 124).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn generation_rejects_bad_parameters() {
        assert!(matches!(
            Formula::generate_random(2, 1, 3, 0),
            Err(Error::InvalidParameters(_))
        ));
        assert!(Formula::generate_random(5, 1, 1, 0).is_err());
    }

    #[test]
    fn energy_of_two_clause() {
        let f = or2(Literal::pos(0), Literal::pos(1));
        assert_eq!(f.energy(&vec![false, false].into()).unwrap(), 1);
        assert_eq!(f.energy(&vec![true, false].into()).unwrap(), 0);
        assert!(matches!(
            f.energy(&vec![true].into()),
            Err(Error::InvalidAssignment {
                expected: 2,
                got: 1
            })
        ));
    }

    #[test]
    fn energy_all_ones_counts_fully_negated_clauses() {
        let f = Formula::generate_random(12, 5, 3, 2).unwrap();
        let ones = Assignment::new(vec![true; 12]);
        let expected = f
            .clauses()
            .iter()
            .filter(|c| c.literals().iter().all(|l| l.negated))
            .count();
        assert_eq!(f.energy(&ones).unwrap(), expected);
    }

    #[test]
    fn energy_is_m_minus_satisfied_exhaustively() {
        for seed in 0..4 {
            let f = Formula::generate_random(12, 15, 3, seed).unwrap();
            for bits in 0..1u64 << 12 {
                let x = Assignment::from_bits(bits, 12);
                let sat = f.clauses().iter().filter(|c| c.is_satisfied(&x)).count();
                assert_eq!(f.energy(&x).unwrap(), f.num_clauses() - sat);
            }
        }
    }

    #[test]
    fn clause_rejects_repeated_variable() {
        assert!(Clause::new(vec![Literal::pos(1), Literal::neg(1)]).is_err());
    }

    #[test]
    fn formula_rejects_mixed_width_and_out_of_range() {
        let c2 = Clause::new(vec![Literal::pos(0), Literal::pos(1)]).unwrap();
        let c3 = Clause::new(vec![Literal::pos(0), Literal::pos(1), Literal::pos(2)]).unwrap();
        assert!(Formula::new(3, 2, vec![c2.clone(), c3]).is_err());
        assert!(Formula::new(1, 2, vec![c2]).is_err());
    }
}
