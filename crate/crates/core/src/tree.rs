//! The random tree ensemble and correlation decay on it.
//!
//! A tree is grown breadth-first from a root variable: each variable at
//! generation `< r` receives `Poisson(kα)` clauses, each clause brings `k − 1`
//! fresh child variables, and every literal sign is a fair coin. Variables at
//! generation `r` form the boundary.
//!
//! Interval propagation bounds the message `u_{a→root}` over every boundary
//! condition at once: boundary fields range over `[−∞, +∞]`, and since the
//! clause kernel is decreasing in each argument the interval endpoints
//! propagate separately. The width of the root interval, `Δ`, measures how
//! much the boundary can move the root.
//!
//! Depth convention: `Δ^(d)` is the root interval width on a tree whose root
//! has exactly one clause and whose boundary is generation `d + 1`. Hence
//! `Δ^(0) = β/2` always, and `Δ^(d) = 0` for `d ≥ 1` when `α = 0`.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bp::clause_kernel_f;
use crate::error::{Error, Result};
use crate::formula::{Clause, Formula, Literal};
use crate::rng::{substream, Rng64};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarNode {
    pub generation: usize,
    /// Child clauses, i.e. clauses in which this variable is the parent.
    pub clauses: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClauseNode {
    pub parent: usize,
    pub parent_negated: bool,
    /// `k − 1` child variables with their literal signs.
    pub children: Vec<(usize, bool)>,
}

/// How many clauses the root receives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RootDegree {
    Poisson,
    One,
}

/// Tree formula stored as index-linked arenas in breadth-first order; the
/// root is variable 0. Children always have larger indices than parents.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeFormula {
    k: usize,
    depth: usize,
    vars: Vec<VarNode>,
    clauses: Vec<ClauseNode>,
}

impl TreeFormula {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn vars(&self) -> &[VarNode] {
        &self.vars
    }

    pub fn clauses(&self) -> &[ClauseNode] {
        &self.clauses
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn root_degree(&self) -> usize {
        self.vars[0].clauses.len()
    }

    /// Number of variables at generation `≤ boundary`.
    pub fn num_vars_within(&self, boundary: usize) -> usize {
        self.vars.partition_point(|v| v.generation <= boundary)
    }

    /// Number of clauses whose parent sits at generation `< boundary`.
    pub fn num_clauses_within(&self, boundary: usize) -> usize {
        self.clauses
            .partition_point(|c| self.vars[c.parent].generation < boundary)
    }

    /// The whole tree as a [`Formula`], with variable `i` of the formula
    /// being arena variable `i`.
    pub fn to_formula(&self) -> Formula {
        self.truncated_formula(self.depth)
    }

    /// The tree cut at generation `boundary` as a [`Formula`].
    pub fn truncated_formula(&self, boundary: usize) -> Formula {
        let clauses = self.clauses[..self.num_clauses_within(boundary)]
            .iter()
            .map(|c| {
                let mut lits = vec![Literal::new(c.parent, c.parent_negated)];
                lits.extend(c.children.iter().map(|&(v, neg)| Literal::new(v, neg)));
                Clause::new(lits).expect("tree variables are distinct")
            })
            .collect();
        Formula::new(self.num_vars_within(boundary), self.k, clauses)
            .expect("tree clauses are well formed")
    }

    /// Variables at generation exactly `boundary`.
    pub fn boundary_vars(&self, boundary: usize) -> Vec<usize> {
        (0..self.vars.len())
            .filter(|&i| self.vars[i].generation == boundary)
            .collect()
    }
}

fn poisson(rng: &mut Rng64, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean)
        .expect("finite positive mean")
        .sample(rng) as usize
}

fn check_tree_params(k: usize, alpha: f64) -> Result<()> {
    if k < 2 {
        return Err(Error::params(format!("k must be at least 2 (got {k})")));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::params(format!(
            "alpha must be finite and >= 0 (got {alpha})"
        )));
    }
    Ok(())
}

pub fn sample_tree(
    k: usize,
    alpha: f64,
    r: usize,
    root: RootDegree,
    seed: u64,
) -> Result<TreeFormula> {
    sample_tree_with(k, alpha, r, root, &mut crate::rng::from_seed(seed))
}

pub fn sample_tree_with(
    k: usize,
    alpha: f64,
    r: usize,
    root: RootDegree,
    rng: &mut Rng64,
) -> Result<TreeFormula> {
    check_tree_params(k, alpha)?;
    let mean = k as f64 * alpha;
    let mut t = TreeFormula {
        k,
        depth: r,
        vars: vec![VarNode {
            generation: 0,
            clauses: Vec::new(),
        }],
        clauses: Vec::new(),
    };
    let mut next = 0;
    while next < t.vars.len() {
        let generation = t.vars[next].generation;
        if generation < r {
            let degree = match (next, root) {
                (0, RootDegree::One) => 1,
                _ => poisson(rng, mean),
            };
            for _ in 0..degree {
                let a = t.clauses.len();
                let parent_negated = rng.random::<bool>();
                let children = (0..k - 1)
                    .map(|_| {
                        let v = t.vars.len();
                        t.vars.push(VarNode {
                            generation: generation + 1,
                            clauses: Vec::new(),
                        });
                        (v, rng.random::<bool>())
                    })
                    .collect();
                t.clauses.push(ClauseNode {
                    parent: next,
                    parent_negated,
                    children,
                });
                t.vars[next].clauses.push(a);
            }
        }
        next += 1;
    }
    Ok(t)
}

/// Range `[lo, hi]` of a clause-to-variable message over boundary conditions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MessageInterval {
    pub lo: f64,
    pub hi: f64,
}

impl MessageInterval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Interval of `u_{a→parent(a)}` for every clause whose parent lies at
/// generation `< boundary`, indexed by clause id; later entries are unused.
pub fn clause_intervals(
    t: &TreeFormula,
    beta: f64,
    boundary: usize,
) -> Result<Vec<MessageInterval>> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::Unsupported(format!(
            "interval propagation needs a finite beta >= 0 (got {beta})"
        )));
    }
    let boundary = boundary.min(t.depth);
    let live = t.num_clauses_within(boundary);
    let mut out = vec![MessageInterval { lo: 0.0, hi: 0.0 }; t.clauses.len()];
    let mut lo_args = Vec::with_capacity(t.k - 1);
    let mut hi_args = Vec::with_capacity(t.k - 1);
    for a in (0..live).rev() {
        lo_args.clear();
        hi_args.clear();
        for &(j, neg_in_a) in &t.clauses[a].children {
            if t.vars[j].generation >= boundary {
                lo_args.push(f64::NEG_INFINITY);
                hi_args.push(f64::INFINITY);
                continue;
            }
            let (mut h_lo, mut h_hi) = (0.0, 0.0);
            for &b in &t.vars[j].clauses {
                let iv = out[b];
                if t.clauses[b].parent_negated == neg_in_a {
                    h_lo += iv.lo;
                    h_hi += iv.hi;
                } else {
                    h_lo -= iv.hi;
                    h_hi -= iv.lo;
                }
            }
            lo_args.push(h_lo);
            hi_args.push(h_hi);
        }
        out[a] = MessageInterval {
            lo: clause_kernel_f(&hi_args, beta),
            hi: clause_kernel_f(&lo_args, beta),
        };
    }
    Ok(out)
}

/// Intervals of `u_{a→root}` for each clause at the root, boundary at the
/// tree's depth.
pub fn propagate_intervals(t: &TreeFormula, beta: f64) -> Result<Vec<MessageInterval>> {
    let all = clause_intervals(t, beta, t.depth)?;
    Ok(t.vars[0].clauses.iter().map(|&a| all[a]).collect())
}

/// Range of the root field `H` (in the `x_root = 1` orientation) over
/// boundary conditions.
pub fn root_field_interval(t: &TreeFormula, beta: f64) -> Result<MessageInterval> {
    let all = clause_intervals(t, beta, t.depth)?;
    let mut field = MessageInterval { lo: 0.0, hi: 0.0 };
    for &a in &t.vars[0].clauses {
        let iv = all[a];
        if t.clauses[a].parent_negated {
            field.lo -= iv.hi;
            field.hi -= iv.lo;
        } else {
            field.lo += iv.lo;
            field.hi += iv.hi;
        }
    }
    Ok(field)
}

/// Monte-Carlo estimate of `E tanh Δ^(d)` at one depth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayStats {
    pub depth: usize,
    pub samples: usize,
    pub mean_tanh_delta: f64,
    pub stderr: f64,
}

/// `E tanh Δ^(d)` for `d = 0…r`. Each sample draws one root-degree-one tree
/// with boundary `r + 1` and reads off every shallower depth by truncation.
/// Sample `s` uses its own random stream, so the result does not depend on
/// the number of worker threads.
pub fn decay_experiment(
    k: usize,
    alpha: f64,
    beta: f64,
    r: usize,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<DecayStats>> {
    check_tree_params(k, alpha)?;
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::Unsupported(format!(
            "decay experiment needs a finite beta >= 0 (got {beta})"
        )));
    }
    if n_samples == 0 {
        return Err(Error::params("n_samples must be positive"));
    }
    let per_sample: Vec<Vec<f64>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|s| {
            let mut rng = substream(seed, s);
            let t = sample_tree_with(k, alpha, r + 1, RootDegree::One, &mut rng)?;
            (0..=r)
                .map(|d| {
                    let iv = clause_intervals(&t, beta, d + 1)?;
                    Ok(iv[0].width().tanh())
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let n = n_samples as f64;
    Ok((0..=r)
        .map(|d| {
            let (s1, s2) = per_sample
                .iter()
                .fold((0.0, 0.0), |(s1, s2), v| (s1 + v[d], s2 + v[d] * v[d]));
            let mean = s1 / n;
            let var = if n_samples > 1 {
                ((s2 - n * mean * mean) / (n - 1.0)).max(0.0)
            } else {
                0.0
            };
            DecayStats {
                depth: d,
                samples: n_samples,
                mean_tanh_delta: mean,
                stderr: (var / n).sqrt(),
            }
        })
        .collect())
}

/// `κ(α) = k(k−1)α (1 − ¼e^{−kα/2}) (1 − ½e^{−kα/2})^{k−2}`.
pub fn kappa(k: usize, alpha: f64) -> f64 {
    let e = (-(k as f64) * alpha / 2.0).exp();
    let k_f = k as f64;
    k_f * (k_f - 1.0) * alpha * (1.0 - 0.25 * e) * (1.0 - 0.5 * e).powi(k as i32 - 2)
}

/// Smallest positive root of `κ(α) = 1`, to about `1e-12`.
pub fn alpha_star(k: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::params(format!("k must be at least 2 (got {k})")));
    }
    let step = 1e-4 / k as f64;
    let mut lo = 0.0;
    let mut hi = step;
    while kappa(k, hi) < 1.0 {
        lo = hi;
        hi += step;
        if hi > 10.0 {
            return Err(Error::params(format!(
                "no root of kappa = 1 below 10 for k = {k}"
            )));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo < 1e-13 {
            break;
        }
        if kappa(k, mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `ρ_0 = 1`, `ρ_{d+1} = (1 − e^{−kαρ_d/2})^{k−1}`, for `d = 0…r`.
pub fn rho_recursion(k: usize, alpha: f64, r: usize) -> Result<Vec<f64>> {
    check_tree_params(k, alpha)?;
    let mut rho = Vec::with_capacity(r + 1);
    rho.push(1.0);
    for d in 0..r {
        let next = (1.0 - (-(k as f64) * alpha * rho[d] / 2.0).exp()).powi(k as i32 - 1);
        rho.push(next);
    }
    Ok(rho)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoThresholdOptions {
    /// `ρ_r → 0` is decided by `ρ_depth < tol`.
    pub depth: usize,
    pub tol: f64,
    /// Bisection stops once the bracket is narrower than this.
    pub precision: f64,
}

impl Default for RhoThresholdOptions {
    fn default() -> Self {
        RhoThresholdOptions {
            depth: 200,
            tol: 1e-8,
            precision: 1e-6,
        }
    }
}

/// One evaluation of the decay predicate during the bisection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoProbe {
    pub alpha: f64,
    pub rho_final: f64,
    pub decays: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoThreshold {
    pub k: usize,
    /// Largest probed `α` at which `ρ` decays.
    pub lo: f64,
    /// Smallest probed `α` at which it does not.
    pub hi: f64,
    pub estimate: f64,
    pub trace: Vec<RhoProbe>,
}

impl RhoThreshold {
    /// True when, sorted by `α`, every decaying probe precedes every
    /// non-decaying one.
    pub fn trace_is_monotone(&self) -> bool {
        let mut probes = self.trace.clone();
        probes.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
        probes.windows(2).all(|w| w[0].decays || !w[1].decays)
    }
}

/// Bisection on `α` of the predicate "`ρ_r` vanishes".
pub fn rho_threshold(k: usize, opts: &RhoThresholdOptions) -> Result<RhoThreshold> {
    if k < 2 {
        return Err(Error::params(format!("k must be at least 2 (got {k})")));
    }
    if !(opts.tol > 0.0 && opts.precision > 0.0) {
        return Err(Error::params("tol and precision must be positive"));
    }
    let mut trace = Vec::new();
    let mut probe = |alpha: f64| -> Result<bool> {
        let rho_final = *rho_recursion(k, alpha, opts.depth)?
            .last()
            .expect("non-empty");
        let decays = rho_final < opts.tol;
        trace.push(RhoProbe {
            alpha,
            rho_final,
            decays,
        });
        Ok(decays)
    };
    let mut lo = 0.0;
    let mut hi = 1.0;
    while probe(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::params(format!(
                "rho never fails to decay for k = {k}"
            )));
        }
    }
    while hi - lo > opts.precision {
        let mid = 0.5 * (lo + hi);
        if probe(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(RhoThreshold {
        k,
        lo,
        hi,
        estimate: 0.5 * (lo + hi),
        trace,
    })
}
