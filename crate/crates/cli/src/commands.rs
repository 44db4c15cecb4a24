use std::fs;
use std::path::Path;

use ksat_core::density::{self, DeParams};
use ksat_core::exact::EnergyHistogram;
use ksat_core::formula::{parse_dimacs_with_meta, write_dimacs_with_comments, GenerationMeta};
use ksat_core::interpolate::{self, EstimateOptions};
use ksat_core::tree::{self, RhoThresholdOptions};
use ksat_core::{Error, Formula, Result};
use serde_json::{json, Value};

use crate::args::*;
use crate::output::{emit, float, to_csv, to_json_compact, to_json_pretty};

pub fn run(cmd: &Command) -> Result<()> {
    let config = serde_json::to_value(cmd).map_err(|e| Error::Io(e.into()))?;
    match cmd {
        Command::Gen(a) => gen(a, &config),
        Command::Phi(a) => phi(a, &config),
        Command::Xi(a) => xi(a, &config),
        Command::Exact(a) => exact(a, &config),
        Command::TreeDecay(a) => tree_decay(a, &config),
        Command::AlphaStar(a) => alpha_star(a, &config),
        Command::RhoThreshold(a) => rho_threshold(a, &config),
        Command::De(a) => de(a, &config),
        Command::PhiDerivativeCheck(a) => phi_derivative_check(a, &config),
    }
}

fn params(msg: impl Into<String>) -> Error {
    Error::InvalidParameters(msg.into())
}

fn finite(beta: Beta) -> Result<f64> {
    if beta.0.is_finite() {
        Ok(beta.0)
    } else {
        Err(params(
            "--beta inf is only supported by `exact` and `rho-threshold`",
        ))
    }
}

fn read_cnf(path: &Path) -> Result<(Formula, Option<GenerationMeta>)> {
    let text = fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    parse_dimacs_with_meta(&text)
}

fn emit_json(mut body: Value, config: &Value, out: Option<&Path>) -> Result<()> {
    body["config"] = config.clone();
    emit(&to_json_pretty(&body)?, out)?;
    Ok(())
}

fn gen(a: &GenArgs, config: &Value) -> Result<()> {
    let (m, alpha) = match (a.m, a.alpha) {
        (Some(m), _) => (m, if a.n == 0 { 0.0 } else { m as f64 / a.n as f64 }),
        (None, Some(alpha)) => {
            if !(alpha >= 0.0 && alpha.is_finite()) {
                return Err(params(format!(
                    "alpha must be finite and >= 0 (got {alpha})"
                )));
            }
            ((alpha * a.n as f64).round() as usize, alpha)
        }
        (None, None) => return Err(params("one of --alpha or --m is required")),
    };
    let f = Formula::generate_random(a.n, m, a.k, a.seed)?;
    let meta = GenerationMeta {
        k: a.k,
        alpha,
        seed: a.seed,
    };
    let comments = vec![
        meta.comment(),
        format!("config {}", to_json_compact(config)?),
    ];
    emit(&write_dimacs_with_comments(&f, &comments), a.out.as_deref())?;
    Ok(())
}

fn phi(a: &PhiArgs, config: &Value) -> Result<()> {
    let beta = finite(a.beta)?;
    let (f, meta) = read_cnf(&a.cnf)?;
    let plan = if a.adaptive {
        interpolate::make_adaptive_plan(beta, f.num_vars(), f.alpha(), a.tau)?
    } else {
        interpolate::make_plan(beta, f.num_vars(), a.steps)?
    };
    let opts = EstimateOptions {
        t_max: a.t_max,
        warm_start: a.warm_start,
        keep_per_step: a.per_step,
    };
    let mut r = interpolate::estimate_phi_with(&f, &plan, &opts)?;
    r.seed = meta.map(|m| m.seed).or(a.seed);
    let body = serde_json::to_value(&r).map_err(|e| Error::Io(e.into()))?;
    emit_json(body, config, a.out.as_deref())
}

fn xi(a: &XiArgs, config: &Value) -> Result<()> {
    let (f, meta) = read_cnf(&a.cnf)?;
    let opts = EstimateOptions {
        t_max: a.t_max,
        ..Default::default()
    };
    let mut r = interpolate::estimate_xi_with(&f, a.epsilon, a.scale, a.steps, &opts)?;
    r.seed = meta.map(|m| m.seed).or(a.seed);
    let zeta = (f.num_vars() as f64 * a.epsilon).ceil() as usize;
    let body = json!({
        "log_xi_estimate": r.phi,
        "zeta": zeta,
        "epsilon": a.epsilon,
        "phi": serde_json::to_value(&r).map_err(|e| Error::Io(e.into()))?,
    });
    emit_json(body, config, a.out.as_deref())
}

fn exact(a: &ExactArgs, config: &Value) -> Result<()> {
    let (f, _) = read_cnf(&a.cnf)?;
    let hist = EnergyHistogram::compute(&f)?;
    let s = hist.summary(a.beta.0);
    let mut body = json!({
        "n": f.num_vars(),
        "m": f.num_clauses(),
        "k": f.k(),
        "beta": a.beta,
        "log_z": s.log_z,
        "energy_mean": s.energy_mean,
        "energy_second_moment": s.energy_second_moment,
        "energy_histogram": s.energy_histogram,
        "satisfying_assignments": hist.counts()[0],
    });
    if let Some(z) = a.zeta {
        body["zeta"] = json!(z);
        body["xi"] = json!(hist.xi(z));
        body["xi_strict"] = json!(hist.xi_strict(z as f64));
    }
    emit_json(body, config, a.out.as_deref())
}

fn tree_decay(a: &TreeDecayArgs, config: &Value) -> Result<()> {
    let beta = finite(a.beta)?;
    let stats = tree::decay_experiment(a.k, a.alpha, beta, a.depth, a.samples, a.seed)?;
    match a.format {
        Format::Csv => {
            let rows: Vec<Vec<String>> = stats
                .iter()
                .map(|s| {
                    vec![
                        a.k.to_string(),
                        float(a.alpha),
                        float(beta),
                        s.depth.to_string(),
                        s.samples.to_string(),
                        float(s.mean_tanh_delta),
                        float(s.stderr),
                    ]
                })
                .collect();
            let header = [
                "k",
                "alpha",
                "beta",
                "depth",
                "samples",
                "mean_tanh_delta",
                "stderr",
            ];
            emit(&to_csv(config, &header, &rows)?, a.out.as_deref())?;
            Ok(())
        }
        Format::Json => {
            let body = json!({
                "k": a.k,
                "alpha": a.alpha,
                "beta": beta,
                "kappa": tree::kappa(a.k, a.alpha),
                "rows": stats,
            });
            emit_json(body, config, a.out.as_deref())
        }
    }
}

fn alpha_star(a: &AlphaStarArgs, config: &Value) -> Result<()> {
    let results =
        a.k.iter()
            .map(|&k| {
                let root = tree::alpha_star(k)?;
                Ok(json!({
                    "k": k,
                    "alpha_star": root,
                    "ratio_to_2ln_k_over_k": root * k as f64 / (2.0 * (k as f64).ln()),
                }))
            })
            .collect::<Result<Vec<_>>>()?;
    emit_json(json!({ "results": results }), config, a.out.as_deref())
}

fn rho_threshold(a: &RhoThresholdArgs, config: &Value) -> Result<()> {
    if a.beta.0.is_finite() {
        return Err(Error::Unsupported(
            "the rho recursion describes beta = inf only; pass --beta inf".into(),
        ));
    }
    let opts = RhoThresholdOptions {
        depth: a.depth,
        tol: a.tol,
        precision: a.precision,
    };
    let results = a
        .k
        .iter()
        .map(|&k| {
            let th = tree::rho_threshold(k, &opts)?;
            let mut v = json!({
                "k": k,
                "lo": th.lo,
                "hi": th.hi,
                "threshold": th.estimate,
                "ratio_to_2ln_k_over_k": th.estimate * k as f64 / (2.0 * (k as f64).ln()),
                "alpha_star": tree::alpha_star(k)?,
                "trace_monotone": th.trace_is_monotone(),
            });
            if a.trace {
                v["trace"] = serde_json::to_value(&th.trace).map_err(|e| Error::Io(e.into()))?;
            }
            Ok(v)
        })
        .collect::<Result<Vec<_>>>()?;
    emit_json(json!({ "results": results }), config, a.out.as_deref())
}

fn de_params(p: &PopulationArgs) -> Result<(DeParams, usize)> {
    let params = DeParams {
        k: p.k,
        alpha: p.alpha,
        beta: finite(p.beta)?,
        pop_size: p.pop_size,
        max_iters: p.max_iters,
        tol: p.tol,
        seed: p.seed,
    };
    Ok((params, p.eval_samples.unwrap_or(10 * p.pop_size)))
}

fn de(a: &DeArgs, config: &Value) -> Result<()> {
    let (p, n_eval) = de_params(&a.pop)?;
    let fp = density::fixed_point(&p)?;
    let phi = density::phi_beta(
        &fp,
        p.k,
        p.alpha,
        p.beta,
        n_eval,
        ksat_core::rng::mix(p.seed, u64::MAX),
    )?;
    let body = json!({
        "k": p.k,
        "alpha": p.alpha,
        "beta": p.beta,
        "pop_size": p.pop_size,
        "iters": fp.iterations,
        "converged": fp.converged,
        "phi": phi.phi,
        "phi_stderr": phi.stderr,
        "phi_terms": phi.terms,
        "mu_moments": fp.mu_star.moments(),
        "nu_moments": fp.nu_star.moments(),
        "trace": fp.trace,
    });
    emit_json(body, config, a.out.as_deref())
}

fn phi_derivative_check(a: &PhiDerivativeCheckArgs, config: &Value) -> Result<()> {
    let (p, n_eval) = de_params(&a.pop)?;
    let chk = density::phi_derivative_check(&p, a.dbeta, n_eval)?;
    let mut body = serde_json::to_value(chk).map_err(|e| Error::Io(e.into()))?;
    body["combined_stderr"] = json!(chk.combined_stderr());
    body["agrees"] = json!(chk.agrees(1e-3));
    emit_json(body, config, a.out.as_deref())
}
