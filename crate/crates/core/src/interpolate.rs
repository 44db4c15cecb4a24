//! The interpolation estimate
//!
//! ```text
//! Φ(β, F) = N ln 2 − Σ_{i=0}^{n−1} Δ · ⟨E⟩_BP(β_i),   β_i = iΔ,  Δ = β/n,
//! ```
//!
//! a Riemann sum of `d ln Z / dβ = −⟨E⟩_β` with the Gibbs energy replaced
//! by its belief-propagation estimate at each grid point.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bp::{run_bp, run_bp_from, total_energy_bp, BPParams, MessageSet};
use crate::error::{Error, Result};
use crate::formula::Formula;

/// Default `A` in `β = A ln(1/ε)`.
pub const DEFAULT_XI_SCALE: f64 = 2.0;
/// Default total-error target per variable of the adaptive step rule.
pub const DEFAULT_TAU: f64 = 0.01;
/// Floor on the number of steps chosen by the adaptive rule.
pub const MIN_ADAPTIVE_STEPS: usize = 64;

/// How the number of grid steps was chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// `n = N²`.
    Paper,
    /// `n = max(⌈β²α²N/τ⌉, 64)`.
    Adaptive { tau: f64 },
    /// Caller-supplied `n`.
    Override,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpolationPlan {
    pub beta_target: f64,
    pub n_steps: usize,
    pub rule: StepRule,
}

impl InterpolationPlan {
    pub fn delta(&self) -> f64 {
        if self.n_steps == 0 {
            0.0
        } else {
            self.beta_target / self.n_steps as f64
        }
    }

    /// `β_0 … β_n`, with `β_0 = 0` and `β_n = beta_target` exactly.
    pub fn betas(&self) -> Vec<f64> {
        let n = self.n_steps;
        (0..=n)
            .map(|i| {
                if i == n {
                    self.beta_target
                } else {
                    i as f64 * self.delta()
                }
            })
            .collect()
    }

    /// True when the step count differs from the `n = N²` rule.
    pub fn is_deviation(&self) -> bool {
        self.rule != StepRule::Paper
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !beta.is_finite() || beta < 0.0 {
        return Err(Error::params(format!(
            "beta must be finite and non-negative (got {beta})"
        )));
    }
    Ok(())
}

fn finish_plan(beta: f64, n_steps: usize, rule: StepRule) -> InterpolationPlan {
    if beta == 0.0 {
        return InterpolationPlan {
            beta_target: 0.0,
            n_steps: 0,
            rule,
        };
    }
    InterpolationPlan {
        beta_target: beta,
        n_steps,
        rule,
    }
}

/// `n = N²` steps, or `override_steps` if given.
pub fn make_plan(
    beta: f64,
    n_vars: usize,
    override_steps: Option<usize>,
) -> Result<InterpolationPlan> {
    check_beta(beta)?;
    let plan = match override_steps {
        Some(0) if beta > 0.0 => return Err(Error::params("n_steps must be positive")),
        Some(n) => finish_plan(beta, n, StepRule::Override),
        None => finish_plan(beta, n_vars * n_vars, StepRule::Paper),
    };
    if beta > 0.0 && plan.n_steps == 0 {
        return Err(Error::params(
            "a formula with no variables needs an explicit step count",
        ));
    }
    Ok(plan)
}

/// `n = max(⌈β²α²N/τ⌉, 64)`, targeting a discretisation error of about `τN`.
pub fn make_adaptive_plan(
    beta: f64,
    n_vars: usize,
    alpha: f64,
    tau: f64,
) -> Result<InterpolationPlan> {
    check_beta(beta)?;
    if !(tau > 0.0 && tau.is_finite()) || !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::params(format!(
            "adaptive rule needs tau > 0 and alpha >= 0 (got tau={tau}, alpha={alpha})"
        )));
    }
    let n = (beta * beta * alpha * alpha * n_vars as f64 / tau).ceil() as usize;
    Ok(finish_plan(
        beta,
        n.max(MIN_ADAPTIVE_STEPS),
        StepRule::Adaptive { tau },
    ))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimateOptions {
    /// BP iterations per grid point; the factor-graph diameter when `None`.
    pub t_max: Option<usize>,
    /// Start each grid point from the previous point's messages.
    pub warm_start: bool,
    /// Keep `⟨E⟩_BP(β_i)` for every grid point in the result.
    pub keep_per_step: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiResult {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub beta: f64,
    pub n_steps: usize,
    pub step_rule: StepRule,
    pub phi: f64,
    /// `N ln 2`.
    pub log2_term: f64,
    /// `Σ_i Δ ⟨E⟩_BP(β_i)`.
    pub energy_integral: f64,
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_step_energies: Option<Vec<f64>>,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl PhiResult {
    /// `N ln 2 − Δ Σ_{i<j} ⟨E⟩_i` for `j = 0…n`; `None` unless per-step
    /// energies were kept.
    pub fn partial_estimates(&self) -> Option<Vec<f64>> {
        let energies = self.per_step_energies.as_ref()?;
        let delta = if self.n_steps == 0 {
            0.0
        } else {
            self.beta / self.n_steps as f64
        };
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(energies.len() + 1);
        out.push(self.log2_term);
        for e in energies {
            acc += delta * e;
            out.push(self.log2_term - acc);
        }
        Some(out)
    }
}

pub fn estimate_phi(f: &Formula, plan: &InterpolationPlan) -> Result<PhiResult> {
    estimate_phi_with(f, plan, &EstimateOptions::default())
}

pub fn estimate_phi_with(
    f: &Formula,
    plan: &InterpolationPlan,
    opts: &EstimateOptions,
) -> Result<PhiResult> {
    check_beta(plan.beta_target)?;
    let start = Instant::now();
    let n = f.num_vars();
    if plan.beta_target > (n as f64).sqrt() {
        log::warn!(
            "beta = {} exceeds sqrt(N) = {:.3}; the estimate is not expected to be accurate there",
            plan.beta_target,
            (n as f64).sqrt()
        );
    }
    let g = f.factor_graph();
    let t_max = opts.t_max.unwrap_or_else(|| g.diameter());
    let delta = plan.delta();
    let betas = plan.betas();
    let grid = &betas[..plan.n_steps];

    let energies: Vec<f64> = if g.num_clauses() == 0 {
        vec![0.0; grid.len()]
    } else if opts.warm_start {
        let mut prev: Option<MessageSet> = None;
        let mut out = Vec::with_capacity(grid.len());
        for &b in grid {
            let p = BPParams::new(b, t_max)?;
            let msgs = match prev.take() {
                Some(m) => run_bp_from(&g, m, &p),
                None => run_bp(&g, &p),
            };
            out.push(total_energy_bp(&g, &msgs, &p));
            prev = Some(msgs);
        }
        out
    } else {
        grid.par_iter()
            .map(|&b| {
                let p = BPParams::new(b, t_max)?;
                Ok(total_energy_bp(&g, &run_bp(&g, &p), &p))
            })
            .collect::<Result<Vec<f64>>>()?
    };

    let log2_term = n as f64 * std::f64::consts::LN_2;
    let energy_integral = delta * energies.iter().sum::<f64>();
    Ok(PhiResult {
        n,
        m: f.num_clauses(),
        k: f.k(),
        beta: plan.beta_target,
        n_steps: plan.n_steps,
        step_rule: plan.rule,
        phi: log2_term - energy_integral,
        log2_term,
        energy_integral,
        seed: None,
        per_step_energies: opts.keep_per_step.then_some(energies),
        wall_time: start.elapsed(),
    })
}

/// `β = A ln(1/ε)`.
pub fn xi_beta(epsilon: f64, scale: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::params(format!(
            "epsilon must lie in (0, 1) (got {epsilon})"
        )));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::params(format!(
            "scale must be positive (got {scale})"
        )));
    }
    Ok(scale * (1.0 / epsilon).ln())
}

/// Estimate of `ln Ξ(Nε, F)` with the default scale and step rule.
pub fn estimate_xi(f: &Formula, epsilon: f64) -> Result<f64> {
    let beta = xi_beta(epsilon, DEFAULT_XI_SCALE)?;
    Ok(estimate_phi(f, &make_plan(beta, f.num_vars(), None)?)?.phi)
}

/// `Φ(A ln(1/ε), F)` on a caller-chosen plan rule.
pub fn estimate_xi_with(
    f: &Formula,
    epsilon: f64,
    scale: f64,
    override_steps: Option<usize>,
    opts: &EstimateOptions,
) -> Result<PhiResult> {
    let beta = xi_beta(epsilon, scale)?;
    estimate_phi_with(f, &make_plan(beta, f.num_vars(), override_steps)?, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::EnergyHistogram;
    use crate::formula::{Clause, Literal};

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn plan_examples() {
        let p = make_plan(2.0, 10, None).unwrap();
        assert_eq!(p.n_steps, 100);
        assert!((p.delta() - 0.02).abs() < 1e-15);
        assert!(!p.is_deviation());
        let b = p.betas();
        assert_eq!(b.len(), 101);
        assert_eq!(b[0], 0.0);
        assert_eq!(b[100], 2.0);
        assert!(b.windows(2).all(|w| w[0] < w[1]));

        let p = make_plan(0.0, 10, None).unwrap();
        assert_eq!(p.n_steps, 0);
        assert_eq!(p.betas(), vec![0.0]);

        let p = make_plan(1.0, 100, Some(500)).unwrap();
        assert!((p.delta() - 0.002).abs() < 1e-15);
        assert!(p.is_deviation());

        assert!(make_plan(-1.0, 10, None).is_err());
        assert!(make_plan(f64::NAN, 10, None).is_err());
    }

    #[test]
    fn adaptive_plan() {
        let p = make_adaptive_plan(2.0, 1000, 0.5, 0.125).unwrap();
        assert_eq!(p.n_steps, 8000);
        assert_eq!(make_adaptive_plan(0.1, 10, 0.1, 0.01).unwrap().n_steps, 64);
        assert!(make_adaptive_plan(1.0, 10, 0.1, 0.0).is_err());
    }

    #[test]
    fn degenerate_plan_gives_n_log_two() {
        let f = Formula::generate_random(10, 4, 3, 1).unwrap();
        let r = estimate_phi(&f, &make_plan(0.0, 10, None).unwrap()).unwrap();
        assert_eq!(r.phi, 10.0 * LN2);
    }

    #[test]
    fn empty_formula_exact() {
        let f = Formula::empty(9, 3);
        for beta in [0.5, 4.0] {
            let r = estimate_phi(&f, &make_plan(beta, 9, None).unwrap()).unwrap();
            assert_eq!(r.phi, 9.0 * LN2);
        }
        assert_eq!(estimate_xi(&f, 0.2).unwrap(), 9.0 * LN2);
    }

    #[test]
    fn single_clause() {
        let n = 5;
        let f = Formula::new(
            n,
            2,
            vec![Clause::new(vec![Literal::pos(0), Literal::pos(1)]).unwrap()],
        )
        .unwrap();
        let beta: f64 = 3.0;
        let r = estimate_phi(&f, &make_plan(beta, n, Some(2000)).unwrap()).unwrap();
        let exact = (3.0 + (-beta).exp()).ln() + (n - 2) as f64 * LN2;
        assert!((r.phi - exact).abs() < 0.02, "{} vs {exact}", r.phi);
    }

    #[test]
    fn random_formula_relative_error() {
        let f = Formula::generate_random(20, 4, 3, 11).unwrap();
        let r = estimate_phi(&f, &make_plan(2.0, 20, None).unwrap()).unwrap();
        let exact = EnergyHistogram::compute(&f).unwrap().log_z(2.0);
        assert!(
            ((r.phi - exact) / exact).abs() <= 0.05,
            "{} vs {exact}",
            r.phi
        );
    }

    #[test]
    fn xi_estimate_within_loose_band() {
        let n = 18;
        let f = Formula::generate_random(n, (0.2 * n as f64).round() as usize, 3, 4).unwrap();
        let eps = 0.1;
        let est = estimate_xi(&f, eps).unwrap();
        let zeta = (n as f64 * eps).ceil() as usize;
        let exact = (EnergyHistogram::compute(&f).unwrap().xi(zeta) as f64).ln();
        assert!((est - exact).abs() <= n as f64 * 0.5);
        assert!((xi_beta((-1.0f64).exp(), 2.0).unwrap() - 2.0).abs() < 1e-15);
        assert!(xi_beta(0.0, 2.0).is_err());
        assert!(xi_beta(1.0, 2.0).is_err());
    }

    #[test]
    fn partial_sums_are_non_increasing() {
        let f = Formula::generate_random(40, 12, 3, 2).unwrap();
        let opts = EstimateOptions {
            keep_per_step: true,
            ..Default::default()
        };
        let r = estimate_phi_with(&f, &make_plan(3.0, 40, Some(300)).unwrap(), &opts).unwrap();
        let partial = r.partial_estimates().unwrap();
        assert!(partial.windows(2).all(|w| w[1] <= w[0]));
        assert!((partial.last().unwrap() - r.phi).abs() < 1e-9);
        let energies = r.per_step_energies.as_ref().unwrap();
        let recomputed = r.log2_term - r.beta / r.n_steps as f64 * energies.iter().sum::<f64>();
        assert_eq!(recomputed, r.phi);
    }

    #[test]
    fn refinement_is_stable() {
        let n = 30;
        let f = Formula::generate_random(n, 6, 3, 5).unwrap();
        let beta = 2.0;
        let a = estimate_phi(&f, &make_plan(beta, n, Some(100)).unwrap())
            .unwrap()
            .phi;
        let b = estimate_phi(&f, &make_plan(beta, n, Some(200)).unwrap())
            .unwrap()
            .phi;
        let alpha = f.alpha();
        assert!((a - b).abs() <= beta * beta * (alpha * n as f64).powi(2) / 100.0);
    }

    #[test]
    fn deterministic_and_warm_start_close() {
        let f = Formula::generate_random(30, 10, 3, 8).unwrap();
        let plan = make_plan(1.5, 30, Some(200)).unwrap();
        let a = estimate_phi(&f, &plan).unwrap();
        let b = estimate_phi(&f, &plan).unwrap();
        assert_eq!(a.phi, b.phi);
        let warm = EstimateOptions {
            warm_start: true,
            ..Default::default()
        };
        let c = estimate_phi_with(&f, &plan, &warm).unwrap();
        assert!((a.phi - c.phi).abs() < 1e-6);
    }
}
