//! Exhaustive ground truth over all `2^N` assignments.
//!
//! A single pass produces the histogram of energies, from which `Z(β)`,
//! `⟨E⟩`, `⟨E²⟩` and `Ξ(ζ)` follow at any `β` without re-enumerating.
//! Local quantities (marginals, clause violation probabilities) are
//! accumulated per energy level as integer counts and only weighted at the
//! end, so the same pass serves every `β` including `β = ∞`.
//!
//! `β = ∞` is represented by `f64::INFINITY` and means "uniform over the
//! satisfying assignments".

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formula::Formula;
use crate::numeric::log_sum_exp;

/// Largest `N` accepted for enumeration.
pub const MAX_EXACT_VARS: usize = 26;

/// Below this many assignments the enumeration runs on the calling thread.
const PARALLEL_THRESHOLD_BITS: u32 = 14;
const CHUNK_BITS: u32 = 8;

#[derive(Clone, Copy, Debug)]
struct ClauseMask {
    mask: u64,
    /// Bits set where the literal is negated: the clause is violated iff
    /// `x & mask == viol`.
    viol: u64,
}

fn clause_masks(f: &Formula) -> Vec<ClauseMask> {
    f.clauses()
        .iter()
        .map(|c| {
            let mut cm = ClauseMask { mask: 0, viol: 0 };
            for l in c.literals() {
                cm.mask |= 1 << l.var;
                if l.negated {
                    cm.viol |= 1 << l.var;
                }
            }
            cm
        })
        .collect()
}

#[inline]
fn energy_of(masks: &[ClauseMask], x: u64) -> usize {
    masks.iter().filter(|c| x & c.mask == c.viol).count()
}

fn check_cap(f: &Formula) -> Result<()> {
    if f.num_vars() > MAX_EXACT_VARS {
        return Err(Error::InstanceTooLarge {
            n: f.num_vars(),
            cap: MAX_EXACT_VARS,
        });
    }
    Ok(())
}

/// Visits every `x` with `x & fixed_mask == fixed_vals` over `n` bits.
/// The free bits are split into chunks handled in parallel; per-chunk states
/// are merged in chunk order.
fn fold_assignments<T, I, V, M>(
    n: usize,
    fixed_mask: u64,
    fixed_vals: u64,
    init: I,
    visit: V,
    merge: M,
) -> T
where
    T: Send,
    I: Fn() -> T + Sync,
    V: Fn(&mut T, u64) + Sync,
    M: Fn(T, T) -> T,
{
    let all = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let free = all & !fixed_mask;
    let free_bits = free.count_ones();

    let run = |state: &mut T, base: u64, lo: u64| {
        let mut s = 0u64;
        loop {
            visit(state, base | s);
            if s == lo {
                break;
            }
            s = s.wrapping_sub(lo) & lo;
        }
    };

    if free_bits < PARALLEL_THRESHOLD_BITS {
        let mut state = init();
        run(&mut state, fixed_vals, free);
        return state;
    }

    // The highest CHUNK_BITS free bits select the chunk.
    let mut hi_bits = Vec::with_capacity(CHUNK_BITS as usize);
    let mut rest = free;
    while hi_bits.len() < CHUNK_BITS as usize {
        let top = 63 - rest.leading_zeros();
        hi_bits.push(1u64 << top);
        rest &= !(1u64 << top);
    }
    let lo = rest;
    let states: Vec<T> = (0..1u64 << CHUNK_BITS)
        .into_par_iter()
        .map(|c| {
            let base = hi_bits
                .iter()
                .enumerate()
                .filter(|(j, _)| c >> j & 1 == 1)
                .fold(fixed_vals, |acc, (_, &bit)| acc | bit);
            let mut state = init();
            run(&mut state, base, lo);
            state
        })
        .collect();
    states.into_iter().reduce(merge).unwrap_or_else(init)
}

fn add_counts(mut a: Vec<u64>, b: Vec<u64>) -> Vec<u64> {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

/// A partial assignment used as a conditioning event.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialAssignment {
    entries: Vec<(usize, bool)>,
}

impl PartialAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, var: usize, value: bool) -> Self {
        self.set(var, value);
        self
    }

    pub fn set(&mut self, var: usize, value: bool) {
        match self.entries.iter_mut().find(|(v, _)| *v == var) {
            Some(e) => e.1 = value,
            None => self.entries.push((var, value)),
        }
    }

    pub fn get(&self, var: usize) -> Option<bool> {
        self.entries.iter().find(|(v, _)| *v == var).map(|e| e.1)
    }

    pub fn entries(&self) -> &[(usize, bool)] {
        &self.entries
    }

    fn masks(&self, n: usize) -> Result<(u64, u64)> {
        let (mut mask, mut vals) = (0u64, 0u64);
        for &(v, b) in &self.entries {
            if v >= n {
                return Err(Error::params(format!(
                    "condition on variable {v} but the formula has {n}"
                )));
            }
            mask |= 1 << v;
            if b {
                vals |= 1 << v;
            }
        }
        Ok((mask, vals))
    }
}

/// Number of assignments at each energy level `0..=M`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnergyHistogram {
    num_vars: usize,
    counts: Vec<u64>,
}

impl EnergyHistogram {
    pub fn compute(f: &Formula) -> Result<Self> {
        check_cap(f)?;
        let masks = clause_masks(f);
        let m = f.num_clauses();
        let counts = fold_assignments(
            f.num_vars(),
            0,
            0,
            || vec![0u64; m + 1],
            |h, x| h[energy_of(&masks, x)] += 1,
            add_counts,
        );
        Ok(EnergyHistogram {
            num_vars: f.num_vars(),
            counts,
        })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    fn min_level(&self) -> Option<usize> {
        self.counts.iter().position(|&c| c > 0)
    }

    /// `ln Σ_e count[e] e^{−βe}`; at `β = ∞` the log of the number of
    /// satisfying assignments (`−∞` if there are none).
    pub fn log_z(&self, beta: f64) -> f64 {
        if beta.is_infinite() {
            return (self.counts[0] as f64).ln();
        }
        let terms: Vec<f64> = self
            .counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(e, &c)| (c as f64).ln() - beta * e as f64)
            .collect();
        log_sum_exp(&terms)
    }

    /// Gibbs probabilities of each energy level. At `β = ∞` all the mass
    /// sits on the lowest occupied level (the `β → ∞` limit).
    pub fn level_probabilities(&self, beta: f64) -> Vec<f64> {
        let mut p = vec![0.0; self.counts.len()];
        let Some(e_min) = self.min_level() else {
            return p;
        };
        if beta.is_infinite() {
            p[e_min] = 1.0;
            return p;
        }
        let mut total = 0.0;
        for (e, &c) in self.counts.iter().enumerate().skip(e_min) {
            let w = c as f64 * (-beta * (e - e_min) as f64).exp();
            p[e] = w;
            total += w;
        }
        p.iter_mut().for_each(|w| *w /= total);
        p
    }

    /// `(⟨E⟩, ⟨E²⟩)` under `μ_β`.
    pub fn moments(&self, beta: f64) -> (f64, f64) {
        let p = self.level_probabilities(beta);
        p.iter().enumerate().fold((0.0, 0.0), |(m1, m2), (e, &w)| {
            let e = e as f64;
            (m1 + w * e, m2 + w * e * e)
        })
    }

    /// `Ξ(ζ) = #{x : E(x) ≤ ζ}`.
    pub fn xi(&self, zeta: usize) -> u64 {
        self.counts.iter().take(zeta.saturating_add(1)).sum()
    }

    /// `#{x : E(x) < ζ}` for real `ζ`.
    pub fn xi_strict(&self, zeta: f64) -> u64 {
        self.counts
            .iter()
            .enumerate()
            .filter(|(e, _)| (*e as f64) < zeta)
            .map(|(_, &c)| c)
            .sum()
    }

    /// `ln ⟨e^{−ΔE}⟩_β`, a single telescoping factor `ln Z(β+Δ)/Z(β)`.
    pub fn log_mean_exp_neg(&self, beta: f64, delta: f64) -> f64 {
        let p = self.level_probabilities(beta);
        let terms: Vec<f64> = p
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(e, &w)| w.ln() - delta * e as f64)
            .collect();
        log_sum_exp(&terms)
    }

    pub fn summary(&self, beta: f64) -> ExactSummary {
        let (mean, second) = self.moments(beta);
        ExactSummary {
            beta,
            log_z: self.log_z(beta),
            energy_mean: mean,
            energy_second_moment: second,
            energy_histogram: self.counts.clone(),
        }
    }
}

/// `N ln 2 + Σ_{i=0}^{n−1} ln⟨e^{−ΔE}⟩_{β_i}` with `β_i = iβ/n`, evaluated
/// with exact Gibbs measures. Equals `ln Z(β)` identically.
pub fn telescoped_log_z(hist: &EnergyHistogram, beta: f64, n_steps: usize) -> f64 {
    let base = hist.num_vars as f64 * std::f64::consts::LN_2;
    if n_steps == 0 {
        return base;
    }
    let delta = beta / n_steps as f64;
    base + (0..n_steps)
        .map(|i| hist.log_mean_exp_neg(i as f64 * delta, delta))
        .sum::<f64>()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactSummary {
    pub beta: f64,
    pub log_z: f64,
    pub energy_mean: f64,
    pub energy_second_moment: f64,
    pub energy_histogram: Vec<u64>,
}

pub fn enumerate(f: &Formula, beta: f64) -> Result<ExactSummary> {
    check_beta(beta)?;
    Ok(EnergyHistogram::compute(f)?.summary(beta))
}

/// `Ξ(ζ, F)`: assignments violating at most `ζ` clauses.
pub fn xi_count(f: &Formula, zeta: usize) -> Result<u64> {
    Ok(EnergyHistogram::compute(f)?.xi(zeta))
}

/// Assignments violating strictly fewer than `ζ` clauses.
pub fn xi_count_strict(f: &Formula, zeta: f64) -> Result<u64> {
    Ok(EnergyHistogram::compute(f)?.xi_strict(zeta))
}

fn check_beta(beta: f64) -> Result<()> {
    if beta.is_nan() || beta < 0.0 {
        return Err(Error::params(format!("beta must be >= 0 (got {beta})")));
    }
    Ok(())
}

/// `Σ_e num[e] e^{−βe} / Σ_e den[e] e^{−βe}`; at `β = ∞` only level 0
/// counts. `None` when the denominator vanishes.
fn level_ratio(num: &[u64], den: &[u64], beta: f64) -> Option<f64> {
    if beta.is_infinite() {
        return (den[0] > 0).then(|| num[0] as f64 / den[0] as f64);
    }
    let e_min = den.iter().position(|&c| c > 0)?;
    let (mut n, mut d) = (0.0, 0.0);
    for e in e_min..den.len() {
        let w = (-beta * (e - e_min) as f64).exp();
        n += num[e] as f64 * w;
        d += den[e] as f64 * w;
    }
    Some(n / d)
}

/// Exact single-variable marginals and clause violation probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalExpectations {
    /// `P(x_i = 1)` for every variable.
    pub marginals: Vec<f64>,
    /// `⟨E_a⟩` for every clause.
    pub clause_energies: Vec<f64>,
}

/// Per-energy-level counts of `x_i = 1` and of each clause being violated,
/// gathered in one enumeration and reweighted for any `β`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalCounts {
    levels: usize,
    total: Vec<u64>,
    var_true: Vec<u64>,
    clause_viol: Vec<u64>,
}

impl LocalCounts {
    fn new(n: usize, m: usize) -> Self {
        let levels = m + 1;
        LocalCounts {
            levels,
            total: vec![0; levels],
            var_true: vec![0; n * levels],
            clause_viol: vec![0; m * levels],
        }
    }

    fn merge(self, other: Self) -> Self {
        LocalCounts {
            levels: self.levels,
            total: add_counts(self.total, other.total),
            var_true: add_counts(self.var_true, other.var_true),
            clause_viol: add_counts(self.clause_viol, other.clause_viol),
        }
    }

    /// Enumerates the assignments consistent with `condition`.
    pub fn compute(f: &Formula, condition: Option<&PartialAssignment>) -> Result<Self> {
        check_cap(f)?;
        let (n, m) = (f.num_vars(), f.num_clauses());
        let (fixed_mask, fixed_vals) = match condition {
            Some(c) => c.masks(n)?,
            None => (0, 0),
        };
        let masks = clause_masks(f);
        Ok(fold_assignments(
            n,
            fixed_mask,
            fixed_vals,
            || LocalCounts::new(n, m),
            |st, x| {
                let levels = st.levels;
                let e = energy_of(&masks, x);
                st.total[e] += 1;
                let mut bits = x;
                while bits != 0 {
                    let i = bits.trailing_zeros() as usize;
                    st.var_true[i * levels + e] += 1;
                    bits &= bits - 1;
                }
                for (a, c) in masks.iter().enumerate() {
                    if x & c.mask == c.viol {
                        st.clause_viol[a * levels + e] += 1;
                    }
                }
            },
            LocalCounts::merge,
        ))
    }

    /// Weights the counts by `e^{−βE}`. Fails with
    /// [`Error::UndefinedConditional`] when no counted assignment has
    /// positive weight.
    pub fn expectations(&self, beta: f64) -> Result<LocalExpectations> {
        check_beta(beta)?;
        let levels = self.levels;
        let ratio =
            |num: &[u64]| level_ratio(num, &self.total, beta).ok_or(Error::UndefinedConditional);
        let n = self.var_true.len() / levels;
        let m = self.clause_viol.len() / levels;
        let marginals = (0..n)
            .map(|i| ratio(&self.var_true[i * levels..(i + 1) * levels]))
            .collect::<Result<Vec<_>>>()?;
        let clause_energies = (0..m)
            .map(|a| ratio(&self.clause_viol[a * levels..(a + 1) * levels]))
            .collect::<Result<Vec<_>>>()?;
        Ok(LocalExpectations {
            marginals,
            clause_energies,
        })
    }
}

/// Marginals and clause energies under `μ_β` conditioned on `condition`.
pub fn local_expectations(
    f: &Formula,
    beta: f64,
    condition: Option<&PartialAssignment>,
) -> Result<LocalExpectations> {
    check_beta(beta)?;
    LocalCounts::compute(f, condition)?.expectations(beta)
}

/// Exact `P(x_i = 1 | condition)` under `μ_β`.
pub fn marginal_exact(
    f: &Formula,
    beta: f64,
    i: usize,
    condition: Option<&PartialAssignment>,
) -> Result<f64> {
    if i >= f.num_vars() {
        return Err(Error::params(format!("variable {i} out of range")));
    }
    Ok(local_expectations(f, beta, condition)?.marginals[i])
}

/// Exact `⟨E_a⟩` under `μ_β`.
pub fn clause_energy_exact(f: &Formula, beta: f64, a: usize) -> Result<f64> {
    if a >= f.num_clauses() {
        return Err(Error::params(format!("clause {a} out of range")));
    }
    Ok(local_expectations(f, beta, None)?.clause_energies[a])
}
