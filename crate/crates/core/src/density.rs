//! Population dynamics for the distributional fixed point and the limiting
//! free energy.
//!
//! Distributions are represented by populations of `P` particles. The two
//! operators are
//!
//! - `S1`: `u = f(h₁, …, h_{k−1})` with the `hᵢ` drawn with replacement from
//!   the input population;
//! - `S2`: `h = Σ_{a ≤ ℓ⁺} u_a − Σ_{b ≤ ℓ⁻} u_b` with `ℓ± ~ Poisson(kα/2)`
//!   and the `u` drawn with replacement.
//!
//! Each step fills its output in blocks of [`BLOCK`] particles, block `b`
//! drawing from stream `b` of a per-step seed, so every result is a function
//! of the seed alone.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bp::{clause_kernel_f, clause_violation_g};
use crate::error::{Error, Result};
use crate::numeric::{log_add_exp, softplus};
use crate::rng::{mix, substream, Rng64, BLOCK};

/// Smallest accepted population.
pub const MIN_POP_SIZE: usize = 1000;

const LN2: f64 = std::f64::consts::LN_2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Population {
    values: Vec<f64>,
}

impl Population {
    pub fn new(values: Vec<f64>) -> Self {
        Population { values }
    }

    pub fn point_mass(c: f64, size: usize) -> Self {
        Population {
            values: vec![c; size],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    fn draw(&self, rng: &mut Rng64) -> f64 {
        self.values[rng.random_range(0..self.values.len())]
    }

    /// Raw moments `E x^j` for `j = 1…4`.
    pub fn moments(&self) -> [f64; 4] {
        let n = self.values.len() as f64;
        let mut m = [0.0; 4];
        for &x in &self.values {
            let x2 = x * x;
            m[0] += x;
            m[1] += x2;
            m[2] += x2 * x;
            m[3] += x2 * x2;
        }
        m.map(|s| s / n)
    }

    pub fn mean(&self) -> f64 {
        self.moments()[0]
    }

    pub fn variance(&self) -> f64 {
        let [m1, m2, ..] = self.moments();
        m2 - m1 * m1
    }
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_statistic(a: &Population, b: &Population) -> f64 {
    let mut x = a.values.clone();
    let mut y = b.values.clone();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (na, nb) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// 95% critical value of the two-sample KS statistic for equal sizes `p`.
pub fn ks_critical(p: usize) -> f64 {
    1.36 * (2.0 / p as f64).sqrt()
}

/// Fills `p` values block by block; block `b` draws from `substream(seed, b)`.
fn generate<F>(p: usize, seed: u64, sample: F) -> Vec<f64>
where
    F: Fn(&mut Rng64, &mut Vec<f64>) -> f64 + Sync,
{
    let mut out = vec![0.0; p];
    out.par_chunks_mut(BLOCK)
        .enumerate()
        .for_each(|(b, chunk)| {
            let mut rng = substream(seed, b as u64);
            let mut scratch = Vec::new();
            for x in chunk {
                *x = sample(&mut rng, &mut scratch);
            }
        });
    out
}

fn poisson(rng: &mut Rng64, dist: Option<&Poisson<f64>>) -> usize {
    dist.map_or(0, |d| d.sample(rng) as usize)
}

fn half_degree_law(k: usize, alpha: f64) -> Option<Poisson<f64>> {
    let mean = k as f64 * alpha / 2.0;
    (mean > 0.0).then(|| Poisson::new(mean).expect("finite positive mean"))
}

/// `S1`: a fresh population of the same size.
pub fn s1_step(mu: &Population, k: usize, beta: f64, seed: u64) -> Population {
    Population::new(generate(mu.len(), seed, |rng, args| {
        args.clear();
        args.extend((0..k - 1).map(|_| mu.draw(rng)));
        clause_kernel_f(args, beta)
    }))
}

/// `S2`: a fresh population of the same size.
pub fn s2_step(nu: &Population, k: usize, alpha: f64, seed: u64) -> Population {
    let law = half_degree_law(k, alpha);
    Population::new(generate(nu.len(), seed, |rng, _| {
        let plus = poisson(rng, law.as_ref());
        let minus = poisson(rng, law.as_ref());
        let mut h = 0.0;
        for _ in 0..plus {
            h += nu.draw(rng);
        }
        for _ in 0..minus {
            h -= nu.draw(rng);
        }
        h
    }))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeParams {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub pop_size: usize,
    pub max_iters: usize,
    /// Bound on the change of the first four moments between iterations.
    pub tol: f64,
    pub seed: u64,
}

impl DeParams {
    pub fn new(k: usize, alpha: f64, beta: f64, seed: u64) -> Self {
        DeParams {
            k,
            alpha,
            beta,
            pop_size: 100_000,
            max_iters: 200,
            tol: 1e-3,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::params(format!(
                "k must be at least 2 (got {})",
                self.k
            )));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::params(format!(
                "alpha must be finite and >= 0 (got {})",
                self.alpha
            )));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::params(format!(
                "density evolution needs a finite beta >= 0 (got {})",
                self.beta
            )));
        }
        if self.pop_size < MIN_POP_SIZE {
            return Err(Error::params(format!(
                "pop_size must be at least {MIN_POP_SIZE} (got {})",
                self.pop_size
            )));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::params("tol must be positive"));
        }
        Ok(())
    }
}

/// Distance between successive `μ` iterates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub iteration: usize,
    pub moment_diff: f64,
    pub ks: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPointResult {
    pub mu_star: Population,
    /// `S2(μ*)`.
    pub nu_star: Population,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<ConvergenceRecord>,
}

fn moment_diff(a: &Population, b: &Population) -> f64 {
    let (ma, mb) = (a.moments(), b.moments());
    (0..4).map(|j| (ma[j] - mb[j]).abs()).fold(0.0, f64::max)
}

fn step_seed(seed: u64, salt: usize) -> u64 {
    mix(seed, salt as u64)
}

fn iterate(p: &DeParams, stop_on_convergence: bool, iters: usize) -> FixedPointResult {
    let mut mu = Population::point_mass(0.0, p.pop_size);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut t = 0;
    while t < iters {
        t += 1;
        let nu = s2_step(&mu, p.k, p.alpha, step_seed(p.seed, 2 * t));
        let next = s1_step(&nu, p.k, p.beta, step_seed(p.seed, 2 * t + 1));
        let rec = ConvergenceRecord {
            iteration: t,
            moment_diff: moment_diff(&next, &mu),
            ks: ks_statistic(&next, &mu),
        };
        converged = rec.moment_diff < p.tol && rec.ks < ks_critical(p.pop_size);
        trace.push(rec);
        mu = next;
        if converged && stop_on_convergence {
            break;
        }
    }
    let nu_star = s2_step(&mu, p.k, p.alpha, step_seed(p.seed, 2 * t + 2));
    FixedPointResult {
        mu_star: mu,
        nu_star,
        iterations: t,
        converged,
        trace,
    }
}

/// Iterates `μ ← S1(S2(μ))` from the point mass at 0 until the first four
/// moments move by less than `tol` and the KS statistic between successive
/// iterates is below its 95% critical value, or `max_iters` is reached.
pub fn fixed_point(p: &DeParams) -> Result<FixedPointResult> {
    p.validate()?;
    if let Ok(a) = crate::tree::alpha_star(p.k) {
        if p.alpha >= a {
            log::warn!(
                "alpha = {} is not below alpha_star({}) = {a:.6}; the fixed point need not be unique",
                p.alpha,
                p.k
            );
        }
    }
    Ok(iterate(p, true, p.max_iters))
}

/// Exactly `iters` iterations of the same stochastic map as [`fixed_point`].
pub fn fixed_point_iterations(p: &DeParams, iters: usize) -> Result<FixedPointResult> {
    p.validate()?;
    Ok(iterate(p, false, iters))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiEstimate {
    pub phi: f64,
    pub stderr: f64,
    /// Means of the edge, clause and variable terms.
    pub terms: [f64; 3],
}

fn ln_one_plus_tanh(u: f64) -> f64 {
    LN2 - softplus(-2.0 * u)
}

fn ln_one_minus_tanh(u: f64) -> f64 {
    LN2 - softplus(2.0 * u)
}

/// Per-sample `[edge, clause, variable]` terms of `φ(β)`.
fn phi_samples(
    fp: &FixedPointResult,
    k: usize,
    alpha: f64,
    beta: f64,
    n: usize,
    seed: u64,
) -> Vec<[f64; 3]> {
    let law = half_degree_law(k, alpha);
    let (mu, nu) = (&fp.mu_star, &fp.nu_star);
    let ka = k as f64 * alpha;
    let mut out = vec![[0.0; 3]; n];
    out.par_chunks_mut(BLOCK)
        .enumerate()
        .for_each(|(b, chunk)| {
            let mut rng = substream(seed, b as u64);
            let mut hs = Vec::with_capacity(k);
            for s in chunk {
                let (h, u) = (nu.draw(&mut rng), mu.draw(&mut rng));
                let edge = -ka * (h.tanh() * u.tanh()).ln_1p();

                hs.clear();
                hs.extend((0..k).map(|_| nu.draw(&mut rng)));
                let clause = -2.0 * alpha * clause_kernel_f(&hs, beta);

                let plus = poisson(&mut rng, law.as_ref());
                let minus = poisson(&mut rng, law.as_ref());
                let (mut a, mut c) = (0.0, 0.0);
                for _ in 0..plus {
                    let u = mu.draw(&mut rng);
                    a += ln_one_plus_tanh(u);
                    c += ln_one_minus_tanh(u);
                }
                for _ in 0..minus {
                    let u = mu.draw(&mut rng);
                    a += ln_one_minus_tanh(u);
                    c += ln_one_plus_tanh(u);
                }
                *s = [edge, clause, log_add_exp(a, c)];
            }
        });
    out
}

/// Welford mean and standard error; exact for constant samples.
fn mean_stderr(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
    for x in xs {
        n += 1.0;
        let d = x - mean;
        mean += d / n;
        m2 += d * (x - mean);
    }
    if n < 2.0 {
        return (mean, 0.0);
    }
    (mean, (m2 / (n - 1.0) / n).sqrt())
}

/// Monte-Carlo evaluation of
///
/// ```text
/// φ(β) = −kα E ln(1 + tanh h tanh u)
///        + α E ln{1 − 2^{−k}(1 − e^{−β}) ∏_{i≤k} (1 − tanh hᵢ)}
///        + E ln{∏(1 + tanh u⁺)∏(1 − tanh u⁻) + ∏(1 − tanh u⁺)∏(1 + tanh u⁻)}
/// ```
///
/// with `h ~ ν*`, `u ~ μ*` and `ℓ± ~ Poisson(kα/2)`.
pub fn phi_beta(
    fp: &FixedPointResult,
    k: usize,
    alpha: f64,
    beta: f64,
    n_eval: usize,
    seed: u64,
) -> Result<PhiEstimate> {
    if n_eval == 0 {
        return Err(Error::params("n_eval must be positive"));
    }
    let samples = phi_samples(fp, k, alpha, beta, n_eval, seed);
    let (phi, stderr) = mean_stderr(samples.iter().map(|s| s[0] + s[1] + s[2]));
    let terms = [0, 1, 2].map(|j| mean_stderr(samples.iter().map(move |s| s[j])).0);
    Ok(PhiEstimate { phi, stderr, terms })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivativeCheck {
    pub finite_difference: f64,
    pub fd_stderr: f64,
    /// `−α E g(h₁, …, h_k)`, `hᵢ ~ ν*` at `β`.
    pub minus_alpha_eg: f64,
    pub eg_stderr: f64,
    /// Iterations of the fixed point at `β`, reused at `β ± dβ`.
    pub iterations: usize,
    pub converged: bool,
}

impl DerivativeCheck {
    pub fn combined_stderr(&self) -> f64 {
        self.fd_stderr.hypot(self.eg_stderr)
    }

    /// `|FD − (−α E g)| ≤ 3σ + slack`.
    pub fn agrees(&self, slack: f64) -> bool {
        (self.finite_difference - self.minus_alpha_eg).abs() <= 3.0 * self.combined_stderr() + slack
    }
}

/// Compares a central difference of `φ` with `−α E g`. The populations at
/// `β ± dβ` reuse the seeds and iteration count of the fixed point at `β`,
/// and the two `φ` evaluations share their draws, so the difference is
/// estimated from paired samples. Below `β = dβ` a forward difference is
/// used.
pub fn phi_derivative_check(p: &DeParams, dbeta: f64, n_eval: usize) -> Result<DerivativeCheck> {
    if !(dbeta > 0.0 && dbeta.is_finite()) {
        return Err(Error::params(format!(
            "dbeta must be positive (got {dbeta})"
        )));
    }
    if n_eval < 2 {
        return Err(Error::params("n_eval must be at least 2"));
    }
    let fp = fixed_point(p)?;
    let eval_seed = mix(p.seed, u64::MAX);

    let (b_lo, b_hi) = if p.beta >= dbeta {
        (p.beta - dbeta, p.beta + dbeta)
    } else {
        (p.beta, p.beta + dbeta)
    };
    let at = |beta: f64| -> Result<Vec<[f64; 3]>> {
        let fp_b = if beta == p.beta {
            fp.clone()
        } else {
            fixed_point_iterations(&DeParams { beta, ..*p }, fp.iterations)?
        };
        Ok(phi_samples(&fp_b, p.k, p.alpha, beta, n_eval, eval_seed))
    };
    let (lo, hi) = (at(b_lo)?, at(b_hi)?);
    let width = b_hi - b_lo;
    let (fd, fd_stderr) = mean_stderr(
        lo.iter()
            .zip(&hi)
            .map(|(l, h)| (h.iter().sum::<f64>() - l.iter().sum::<f64>()) / width),
    );

    let nu = &fp.nu_star;
    let g = generate(n_eval, mix(eval_seed, 1), |rng, hs| {
        hs.clear();
        hs.extend((0..p.k).map(|_| nu.draw(rng)));
        clause_violation_g(hs, p.beta)
    });
    let (eg, eg_stderr) = mean_stderr(g.iter().copied());
    Ok(DerivativeCheck {
        finite_difference: fd,
        fd_stderr,
        minus_alpha_eg: -p.alpha * eg,
        eg_stderr: p.alpha * eg_stderr,
        iterations: fp.iterations,
        converged: fp.converged,
    })
}
