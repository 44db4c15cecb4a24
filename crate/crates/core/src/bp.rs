//! Belief propagation on the factor graph of a k-SAT formula at a fixed,
//! finite inverse temperature.
//!
//! Messages are half log-likelihood ratios, always oriented so that a positive
//! value favours the variable *satisfying* the clause on the other end of the
//! edge:
//!
//! ```text
//! h_{i→a} = Σ_{b ∈ ∂₊i(a)} u_{b→i} − Σ_{b ∈ ∂₋i(a)} u_{b→i}
//! u_{a→i} = f({h_{j→a} : j ∈ ∂a \ i})
//! ```
//!
//! where `∂₊i(a)` (`∂₋i(a)`) are the other clauses in which `i` appears with
//! the same (opposite) sign as in `a`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formula::FactorGraph;
use crate::numeric::{ln_half_one_minus_tanh, ln_one_minus_exp, log_add_exp};

/// Natural log of `∏ (1 − tanh xᵢ)/2`.
#[inline]
fn ln_prod_half_one_minus_tanh<I: IntoIterator<Item = f64>>(args: I) -> f64 {
    args.into_iter().map(ln_half_one_minus_tanh).sum()
}

/// `ln(1 − (1 − e^{−β}) P)` given `ln P`, evaluated as
/// `ln((1 − P) + e^{−β} P)` so that no cancellation occurs.
#[inline]
fn ln_clause_normalizer(ln_p: f64, beta: f64) -> f64 {
    log_add_exp(ln_one_minus_exp(ln_p), ln_p - beta)
}

/// The clause kernel
///
/// ```text
/// f(x₁, …, x_m) = −½ ln{1 − (1 − e^{−β}) ∏ (1 − tanh xᵢ)/2}
/// ```
///
/// with `m = k − 1` arguments for a k-clause. Arguments may be `±∞` (a
/// conditioned variable). The result lies in `[0, β/2]` and is
/// non-increasing in every argument.
pub fn clause_kernel_f(args: &[f64], beta: f64) -> f64 {
    kernel_iter(args.iter().copied(), beta)
}

#[inline]
fn kernel_iter<I: IntoIterator<Item = f64>>(args: I, beta: f64) -> f64 {
    if beta == 0.0 {
        return 0.0;
    }
    let ln_p = ln_prod_half_one_minus_tanh(args);
    (-0.5 * ln_clause_normalizer(ln_p, beta)).clamp(0.0, 0.5 * beta)
}

/// BP probability that a clause is violated, given the k incoming cavity
/// fields (each in the "satisfies the clause" orientation):
///
/// ```text
/// g(x₁, …, x_k) = e^{−β} Q / (1 − (1 − e^{−β}) Q),   Q = ∏ (1 − tanh xᵢ)/2
/// ```
pub fn clause_violation_g(args: &[f64], beta: f64) -> f64 {
    if beta == 0.0 {
        return args
            .iter()
            .map(|&x| 1.0 / (1.0 + (2.0 * x).exp()))
            .product();
    }
    let ln_q = ln_prod_half_one_minus_tanh(args.iter().copied());
    if ln_q == f64::NEG_INFINITY {
        return 0.0;
    }
    (ln_q - beta - ln_clause_normalizer(ln_q, beta))
        .exp()
        .clamp(0.0, 1.0)
}

/// How the variable-to-clause messages are initialised.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum MessageInit {
    /// `h⁽⁰⁾ = 0` on every edge.
    Zero,
    /// `h⁽⁰⁾ = c` on every edge.
    Constant(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BPParams {
    pub beta: f64,
    pub t_max: usize,
    pub init: MessageInit,
}

impl BPParams {
    pub fn new(beta: f64, t_max: usize) -> Result<Self> {
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::params(format!(
                "beta must be finite and non-negative (got {beta})"
            )));
        }
        Ok(BPParams {
            beta,
            t_max,
            init: MessageInit::Zero,
        })
    }

    /// Zero initialisation, iterated for the diameter of the graph.
    pub fn for_graph(g: &FactorGraph, beta: f64) -> Result<Self> {
        Self::new(beta, g.diameter())
    }
}

/// Messages on every edge, indexed by the factor-graph edge id.
///
/// `h[e]` is the variable-to-clause message and `u[e]` the clause-to-variable
/// message on edge `e`, with `u = f(h)` holding at the same iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MessageSet {
    pub h: Vec<f64>,
    pub u: Vec<f64>,
}

impl MessageSet {
    pub fn initial(g: &FactorGraph, p: &BPParams) -> Self {
        let h0 = match p.init {
            MessageInit::Zero => 0.0,
            MessageInit::Constant(c) => c,
        };
        let h = vec![h0; g.num_edges()];
        let u = clause_updates(g, &h, p.beta);
        MessageSet { h, u }
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }
}

/// New clause-to-variable messages computed from the given `h`.
fn clause_updates(g: &FactorGraph, h: &[f64], beta: f64) -> Vec<f64> {
    let mut u = vec![0.0; h.len()];
    for a in 0..g.num_clauses() {
        let edges = g.clause_edges(a);
        for e in edges.clone() {
            u[e] = kernel_iter(edges.clone().filter(|&e2| e2 != e).map(|e2| h[e2]), beta);
        }
    }
    u
}

/// Cavity field `h_{i→a}` on edge `e` from the current `u` messages.
#[inline]
fn cavity_field(g: &FactorGraph, u: &[f64], e: usize) -> f64 {
    let edge = g.edge(e);
    g.var_edges(edge.var)
        .iter()
        .filter(|&&e2| e2 != e)
        .map(|&e2| {
            if g.edge(e2).negated == edge.negated {
                u[e2]
            } else {
                -u[e2]
            }
        })
        .sum()
}

/// One synchronous iteration: `h⁽ᵗ⁺¹⁾` from `u⁽ᵗ⁾`, then `u⁽ᵗ⁺¹⁾ = f(h⁽ᵗ⁺¹⁾)`.
pub fn bp_step(g: &FactorGraph, msgs: &MessageSet, p: &BPParams) -> MessageSet {
    let h: Vec<f64> = (0..g.num_edges())
        .map(|e| cavity_field(g, &msgs.u, e))
        .collect();
    let u = clause_updates(g, &h, p.beta);
    MessageSet { h, u }
}

/// `p.t_max` synchronous steps from the initial messages.
pub fn run_bp(g: &FactorGraph, p: &BPParams) -> MessageSet {
    run_bp_from(g, MessageSet::initial(g, p), p)
}

/// Like [`run_bp`] but starting from the given messages.
pub fn run_bp_from(g: &FactorGraph, start: MessageSet, p: &BPParams) -> MessageSet {
    let mut msgs = start;
    for _ in 0..p.t_max {
        msgs = bp_step(g, &msgs, p);
    }
    msgs
}

/// BP estimate of `⟨E_a⟩`, the probability that clause `a` is violated.
pub fn clause_energy_bp(g: &FactorGraph, a: usize, msgs: &MessageSet, p: &BPParams) -> f64 {
    let args: Vec<f64> = g.clause_edges(a).map(|e| msgs.h[e]).collect();
    clause_violation_g(&args, p.beta)
}

/// BP estimate of `⟨E⟩ = Σ_a ⟨E_a⟩`.
pub fn total_energy_bp(g: &FactorGraph, msgs: &MessageSet, p: &BPParams) -> f64 {
    (0..g.num_clauses())
        .map(|a| clause_energy_bp(g, a, msgs, p))
        .sum()
}

/// Total field on variable `i` in the `x_i = 1` orientation:
/// `Σ_{a: i direct} u_{a→i} − Σ_{a: i negated} u_{a→i}`.
pub fn total_field(g: &FactorGraph, i: usize, msgs: &MessageSet) -> f64 {
    g.var_edges(i)
        .iter()
        .map(|&e| {
            if g.edge(e).negated {
                -msgs.u[e]
            } else {
                msgs.u[e]
            }
        })
        .sum()
}

/// BP belief `P(x_i = 1) = e^H / (e^H + e^{−H})`.
pub fn marginal_bp(g: &FactorGraph, i: usize, msgs: &MessageSet) -> f64 {
    let field = total_field(g, i, msgs);
    1.0 / (1.0 + (-2.0 * field).exp())
}
