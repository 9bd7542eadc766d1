use anyhow::Context;
use bbgky_core::algebra::{verify_algebra as run_algebra, CoefficientRule};
use bbgky_core::functionals::library::ObservableSpec;
use bbgky_core::rng::derive_seed;
use bbgky_core::solver::{
    dual_solution_additive, dual_solution_b, dual_solution_kary, duality_check, iteration_term, state_order_term,
    state_solution_f, within_stderr, DualRoute, DualSolutionRequest, ResultRow, SolverError, StateRoute,
    StateSolutionRequest,
};
use serde_json::json;

use crate::config::{DualMethod, RunConfig};
use crate::UsageError;

pub struct Outcome {
    pub rows: Vec<ResultRow>,
    pub report: serde_json::Value,
    pub warnings: Vec<String>,
    pub passed: bool,
}

fn usage(e: SolverError) -> anyhow::Error {
    match e {
        SolverError::Truncation { .. } | SolverError::Precondition(_) | SolverError::PointSize { .. } => {
            UsageError(e.to_string()).into()
        }
        other => other.into(),
    }
}

pub fn verify_algebra(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    if cfg.big_n_max > 6 {
        return Err(UsageError(format!("verify-algebra supports N_max <= 6, got {}", cfg.big_n_max)).into());
    }
    let rule = match cfg.corrupt_coefficient {
        Some(c) => CoefficientRule::Corrupted {
            blocks: c.blocks,
            delta: c.delta,
        },
        None => CoefficientRule::Standard,
    };
    let rep = run_algebra(cfg.big_n_max, &rule).context("running the symbolic identities")?;
    for f in rep.failures() {
        eprintln!("{f}");
    }
    let checks: Vec<_> = rep
        .checks
        .iter()
        .map(|c| json!({"identity": c.identity, "s": c.s, "n": c.n, "passed": c.passed, "detail": c.detail}))
        .collect();
    Ok(Outcome {
        rows: Vec::new(),
        report: json!({ "checks": checks }),
        warnings: Vec::new(),
        passed: rep.all_passed(),
    })
}

pub fn evolve_dual(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let b0 = cfg.observable.build(cfg.sigma, cfg.big_n_max);
    let s_max = cfg.components.iter().copied().max().unwrap_or(1);
    let points = cfg.points(s_max)?;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &s in &cfg.components {
        for &t in &cfg.times {
            let xs: Vec<_> = points.iter().map(|p| p[..s].to_vec()).collect();
            let (method, values): (&str, Vec<Result<f64, SolverError>>) = match cfg.dual_method {
                DualMethod::Partition | DualMethod::Reduced | DualMethod::Direct => {
                    let route = match cfg.dual_method {
                        DualMethod::Partition => DualRoute::Partition,
                        DualMethod::Reduced => DualRoute::Reduced,
                        _ => DualRoute::Direct,
                    };
                    let req = DualSolutionRequest {
                        s,
                        t,
                        b0: b0.clone(),
                        points: xs,
                    };
                    (route.name(), dual_solution_b(&req, route))
                }
                DualMethod::Additive => {
                    let ObservableSpec::Additive { function } = &cfg.observable else {
                        return Err(UsageError("dual_method additive needs an additive observable".into()).into());
                    };
                    let b1 = function.to_phase_fn();
                    ("additive", xs.iter().map(|x| dual_solution_additive(&b1, cfg.sigma, s, t, x)).collect())
                }
                DualMethod::Kary => {
                    let ObservableSpec::Kary { k, function } = &cfg.observable else {
                        return Err(UsageError("dual_method kary needs a k-ary observable".into()).into());
                    };
                    let bk = function.to_phase_fn();
                    ("kary", xs.iter().map(|x| dual_solution_kary(&bk, *k, cfg.sigma, s, t, x)).collect())
                }
            };
            for (id, v) in values.into_iter().enumerate() {
                let value = match v {
                    Ok(v) => v,
                    Err(e @ (SolverError::ForbiddenPoint | SolverError::PointSize { .. })) => return Err(usage(e)),
                    Err(e) => {
                        failures.push(json!({"s": s, "t": t, "point-id": id, "error": e.to_string()}));
                        f64::NAN
                    }
                };
                rows.push(ResultRow::exact(s, t, id, method, value, cfg.seed));
            }
        }
    }
    Ok(Outcome {
        rows,
        passed: failures.is_empty(),
        report: json!({ "failures": failures }),
        warnings: Vec::new(),
    })
}

pub fn evolve_state(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let f0 = cfg.state.build(cfg.sigma, cfg.big_n_max);
    let s_max = cfg.components.iter().copied().max().unwrap_or(1);
    let points = cfg.points(s_max)?;
    let route = cfg.state_route;
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    let mut failures = Vec::new();
    let mut tails = Vec::new();
    for &s in &cfg.components {
        let n_max = cfg.n_max.unwrap_or(cfg.big_n_max - s);
        for (ti, &t) in cfg.times.iter().enumerate() {
            let req = StateSolutionRequest {
                s,
                t,
                f0: f0.clone(),
                n_max,
                points: points.iter().map(|p| p[..s].to_vec()).collect(),
                n_samples: cfg.n_samples,
                seed: derive_seed(cfg.seed, "evolve-state", (s * 1000 + ti) as u64),
            };
            let rep = state_solution_f(&req, route).map_err(usage)?;
            tails.push(json!({"s": s, "t": t, "tail_bound": rep.tail_bound}));
            if let Some(w) = rep.warning {
                if !warnings.contains(&w) {
                    warnings.push(w);
                }
            }
            for (id, r) in rep.points.into_iter().enumerate() {
                match r {
                    Ok(sol) => {
                        rows.push(ResultRow::estimate(s, t, id, route.name(), &sol.total));
                        for (n, o) in sol.orders.iter().enumerate() {
                            rows.push(ResultRow::estimate(s, t, id, format!("{}-order-{n}", route.name()), o));
                        }
                    }
                    Err(e @ (SolverError::ForbiddenPoint | SolverError::PointSize { .. })) => return Err(usage(e)),
                    Err(e) => failures.push(json!({"s": s, "t": t, "point-id": id, "error": e.to_string()})),
                }
            }
        }
    }
    Ok(Outcome {
        rows,
        passed: failures.is_empty(),
        report: json!({ "tail_bounds": tails, "failures": failures }),
        warnings,
    })
}

pub fn duality(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let b0 = cfg.observable.build(cfg.sigma, cfg.big_n_max);
    let f0 = cfg.state.build(cfg.sigma, cfg.big_n_max);
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    let mut passed = true;
    for (i, &t) in cfg.times.iter().enumerate() {
        let rep = duality_check(&b0, &f0, t, cfg.n_samples, derive_seed(cfg.seed, "duality-cmd", i as u64))?;
        let ok = within_stderr(&rep.difference, cfg.tolerance_sigmas);
        passed &= ok;
        for (method, e) in [("lhs", &rep.lhs), ("rhs", &rep.rhs), ("difference", &rep.difference)] {
            rows.push(ResultRow::estimate(cfg.big_n_max, t, 0, method, e));
        }
        let mut value = serde_json::to_value(&rep)?;
        value["passed"] = json!(ok);
        reports.push(value);
    }
    Ok(Outcome {
        rows,
        passed,
        report: json!({ "tolerance_sigmas": cfg.tolerance_sigmas, "times": reports }),
        warnings: Vec::new(),
    })
}

pub fn compare_series(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let f0 = cfg.state.build(cfg.sigma, cfg.big_n_max);
    let s_max = cfg.components.iter().copied().max().unwrap_or(1);
    let points = cfg.points(s_max)?;
    let k = cfg.tolerance_sigmas;
    let mut rows = Vec::new();
    let mut cases = Vec::new();
    let mut passed = true;
    for &s in &cfg.components {
        for (ti, &t) in cfg.times.iter().enumerate() {
            for (id, p) in points.iter().enumerate() {
                let x = &p[..s];
                let seed = derive_seed(cfg.seed, "compare-series", ((s * 64 + ti) * 4096 + id) as u64);
                let reduced = state_order_term(&f0, s, 1, t, x, StateRoute::Reduced, cfg.n_samples, seed).map_err(usage)?;
                let iter = iteration_term(
                    &f0,
                    s,
                    1,
                    t,
                    x,
                    &cfg.kernel,
                    &cfg.time_quadrature,
                    cfg.kernel.n_samples,
                    derive_seed(seed, "iteration", 1),
                )
                .map_err(usage)?;
                let d = (reduced.value - iter.estimate.value).abs();
                let stat = (reduced.stderr.powi(2) + iter.estimate.stderr.powi(2)).sqrt();
                let tol = k * stat + iter.quadrature_error.value.abs() + k * iter.quadrature_error.stderr;
                let ok = d <= tol;
                passed &= ok;
                rows.push(ResultRow::estimate(s, t, id, "reduced-cumulant", &reduced));
                rows.push(ResultRow::estimate(s, t, id, "iteration", &iter.estimate));
                rows.push(ResultRow::estimate(s, t, id, "quadrature-error", &iter.quadrature_error));
                cases.push(json!({
                    "s": s, "t": t, "point-id": id,
                    "difference": d, "tolerance": tol, "passed": ok,
                }));
            }
        }
    }
    Ok(Outcome {
        rows,
        passed,
        report: json!({ "cases": cases }),
        warnings: Vec::new(),
    })
}
