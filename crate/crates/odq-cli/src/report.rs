//! Report computation for the four subcommands.

use std::path::PathBuf;

use serde::Serialize;

use odq_core::exact::{
    bl_term_ratio, find_roots_bl, find_roots_fixed_point, pollaczek_metrics, roots_metrics,
    spitzer_metrics,
};
use odq_core::hedge::{classical_approx, hedge_for, robust_approx, robust_variance_readings};
use odq_core::oracle::{markov_stationary, simulate, MarkovConfig, SimConfig};
use odq_core::{regime_instance, ArrivalModel, Method, QueueInstance, StationaryMetrics};

use crate::render;
use crate::{CliError, CompareArgs, Format, HedgeArgs, RootsArgs, TableArgs};

/// Finished report text plus routing/exit information.
pub struct Rendered {
    pub text: String,
    pub out: Option<PathBuf>,
    pub numerical_failures: bool,
}

#[derive(Serialize)]
struct SpecEcho<'a, T: Serialize> {
    command: &'static str,
    #[serde(flatten)]
    args: &'a T,
}

#[derive(Serialize)]
struct JsonReport<'a, T: Serialize, R: Serialize, D: Serialize> {
    spec: SpecEcho<'a, T>,
    results: R,
    diagnostics: D,
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| CliError::Numerical(format!("json serialization failed: {e}")))
}

fn check_positive(x: f64, what: &str) -> Result<(), CliError> {
    if !(x.is_finite() && x > 0.0) {
        return Err(CliError::Validation(format!(
            "{what} must be finite and > 0"
        )));
    }
    Ok(())
}

fn check_delta(delta: f64) -> Result<(), CliError> {
    if !(delta > 0.5 && delta < 1.0) {
        return Err(CliError::Validation(format!(
            "delta must lie in (1/2, 1), got {delta}"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------- table ---

#[derive(Serialize)]
struct TableRow {
    s: u32,
    rho: f64,
    eq_exact: f64,
    eq_classical: f64,
    eq_robust: f64,
    sd_exact: f64,
    sd_classical: f64,
    sd_robust: f64,
    status: String,
}

#[derive(Serialize)]
struct TableDiagnostics {
    crosscheck_max_mean_delta: f64,
    crosscheck_max_variance_delta: f64,
    dispersion_note: &'static str,
}

/// The published tables' dispersion normalization: their printed columns
/// square to the standard deviation, i.e. equal the fourth root of the
/// stationary variance. `compare` reports the moment-true sd instead.
fn table_dispersion(variance: f64) -> f64 {
    variance.sqrt().sqrt()
}

pub fn run_table(args: &TableArgs) -> Result<Rendered, CliError> {
    check_positive(args.beta, "beta")?;
    check_delta(args.delta)?;
    check_positive(args.tol, "tol")?;
    if args.s_list.is_empty() {
        return Err(CliError::Validation("s-list must not be empty".into()));
    }

    let mut rows = Vec::new();
    let mut max_mean_delta: f64 = 0.0;
    let mut max_var_delta: f64 = 0.0;
    let mut failures = false;
    for &s in &args.s_list {
        match table_row(s, args) {
            Ok((row, dm, dv)) => {
                max_mean_delta = max_mean_delta.max(dm);
                max_var_delta = max_var_delta.max(dv);
                rows.push(row);
            }
            Err(msg) => {
                failures = true;
                rows.push(TableRow {
                    s,
                    rho: f64::NAN,
                    eq_exact: f64::NAN,
                    eq_classical: f64::NAN,
                    eq_robust: f64::NAN,
                    sd_exact: f64::NAN,
                    sd_classical: f64::NAN,
                    sd_robust: f64::NAN,
                    status: msg,
                });
            }
        }
    }

    let diagnostics = TableDiagnostics {
        crosscheck_max_mean_delta: max_mean_delta,
        crosscheck_max_variance_delta: max_var_delta,
        dispersion_note: "sd columns follow the published tables: variance^(1/4)",
    };
    let header = [
        "s",
        "rho",
        "eq_exact",
        "eq_classical",
        "eq_robust",
        "sd_exact",
        "sd_classical",
        "sd_robust",
        "status",
    ];
    let text = match args.format {
        Format::Json => to_json(&JsonReport {
            spec: SpecEcho {
                command: "table",
                args,
            },
            results: &rows,
            diagnostics: &diagnostics,
        })?,
        Format::Csv | Format::Markdown => {
            let fmt: fn(f64) -> String = if args.format == Format::Csv {
                render::full
            } else {
                render::short
            };
            let cells: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.s.to_string(),
                        fmt(r.rho),
                        fmt(r.eq_exact),
                        fmt(r.eq_classical),
                        fmt(r.eq_robust),
                        fmt(r.sd_exact),
                        fmt(r.sd_classical),
                        fmt(r.sd_robust),
                        r.status.clone(),
                    ]
                })
                .collect();
            if args.format == Format::Csv {
                render::csv(&header, &cells)
            } else {
                render::markdown(&header, &cells)
            }
        }
    };
    Ok(Rendered {
        text,
        out: args.out.clone(),
        numerical_failures: failures,
    })
}

fn table_row(s: u32, args: &TableArgs) -> Result<(TableRow, f64, f64), String> {
    let fail = |e: odq_core::Error| format!("error: {e}");
    let (inst, _) = regime_instance(s, args.beta, args.delta).map_err(fail)?;
    let sp = spitzer_metrics(&inst, args.tol).map_err(fail)?;
    let po = pollaczek_metrics(&inst, 64).map_err(fail)?;
    let mean_delta = (sp.mean - po.mean).abs();
    let var_delta = (sp.variance.unwrap_or(f64::NAN) - po.variance.unwrap_or(f64::NAN)).abs();
    let mean_budget = sp.err.mean + po.err.mean + 1e-7 * (1.0 + sp.mean.abs());
    let var_budget = sp.err.variance + po.err.variance + 1e-6 * (1.0 + sp.variance.unwrap_or(0.0));
    if mean_delta > mean_budget || var_delta > var_budget {
        return Err(format!(
            "error: spitzer/pollaczek cross-check failed (mean delta {mean_delta:.3e}, variance delta {var_delta:.3e})"
        ));
    }
    let cl = classical_approx(&inst).map_err(fail)?;
    let ro = robust_approx(&inst).map_err(fail)?;
    Ok((
        TableRow {
            s,
            rho: inst.utilization(),
            eq_exact: sp.mean,
            eq_classical: cl.mean,
            eq_robust: ro.mean,
            sd_exact: table_dispersion(sp.variance.unwrap_or(f64::NAN)),
            sd_classical: table_dispersion(cl.variance.unwrap_or(f64::NAN)),
            sd_robust: table_dispersion(ro.variance.unwrap_or(f64::NAN)),
            status: "ok".into(),
        },
        mean_delta,
        var_delta,
    ))
}

// ---------------------------------------------------------------- hedge ---

#[derive(Serialize)]
struct HedgeRow {
    delta: f64,
    n: f64,
    beta_ratio: f64,
    sigma_ratio: f64,
}

pub fn run_hedge(args: &HedgeArgs) -> Result<Rendered, CliError> {
    check_positive(args.beta, "beta")?;
    if args.delta.is_empty() {
        return Err(CliError::Validation("delta list must not be empty".into()));
    }
    for &d in &args.delta {
        check_delta(d)?;
    }
    if args.n_min.is_nan() || args.n_min <= 1.0 {
        return Err(CliError::Validation(
            "n-min must exceed 1 (b > 0 requires n > 1)".into(),
        ));
    }
    if args.n_max.is_nan() || args.n_max <= args.n_min {
        return Err(CliError::Validation("n range must be increasing".into()));
    }
    check_positive(args.n_step, "n-step")?;

    let mut rows = Vec::new();
    for &delta in &args.delta {
        let mut i = 0u64;
        loop {
            let n = args.n_min + i as f64 * args.n_step;
            if n > args.n_max * (1.0 + 1e-12) {
                break;
            }
            let mu = n;
            let sigma2 = n.powf(2.0 * delta);
            let s = n + args.beta * n.powf(delta);
            let hp = hedge_for(mu, sigma2, s).map_err(|e| CliError::Numerical(e.to_string()))?;
            rows.push(HedgeRow {
                delta,
                n,
                beta_ratio: hp.beta_n / hp.beta,
                sigma_ratio: hp.sigma_tilde / hp.sigma_n,
            });
            i += 1;
        }
    }

    let header = ["delta", "n", "beta_ratio", "sigma_ratio"];
    let text = match args.format {
        Format::Json => to_json(&JsonReport {
            spec: SpecEcho {
                command: "hedge",
                args,
            },
            results: &rows,
            diagnostics: serde_json::json!({}),
        })?,
        Format::Csv | Format::Markdown => {
            let fmt: fn(f64) -> String = if args.format == Format::Csv {
                render::full
            } else {
                render::short
            };
            let cells: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        fmt(r.delta),
                        fmt(r.n),
                        fmt(r.beta_ratio),
                        fmt(r.sigma_ratio),
                    ]
                })
                .collect();
            if args.format == Format::Csv {
                render::csv(&header, &cells)
            } else {
                render::markdown(&header, &cells)
            }
        }
    };
    Ok(Rendered {
        text,
        out: args.out.clone(),
        numerical_failures: false,
    })
}

// -------------------------------------------------------------- compare ---

#[derive(Serialize)]
struct MethodReport {
    method: &'static str,
    status: String,
    mean: Option<f64>,
    variance: Option<f64>,
    sd: Option<f64>,
    p0: Option<f64>,
    err_mean: Option<f64>,
    err_variance: Option<f64>,
    err_p0: Option<f64>,
}

#[derive(Serialize)]
struct PairwiseDelta {
    a: &'static str,
    b: &'static str,
    mean: f64,
    p0: f64,
    variance: Option<f64>,
}

#[derive(Serialize)]
struct CompareDiagnostics {
    instance: InstanceEcho,
    saddle: Option<SaddleEcho>,
    hedge: HedgeEcho,
    bl_term_ratio: f64,
    pairwise: Vec<PairwiseDelta>,
    exact_cross_check: CrossCheck,
    robust_variance_readings: Option<ReadingsEcho>,
}

#[derive(Serialize)]
struct InstanceEcho {
    a: f64,
    b: f64,
    s: u32,
    mu: f64,
    sigma2: f64,
    rho: f64,
    hedge_beta: f64,
}

#[derive(Serialize)]
struct SaddleEcho {
    z_sp: f64,
    r0: f64,
    g_dd_sp: f64,
}

#[derive(Serialize)]
struct HedgeEcho {
    beta: f64,
    beta_n: f64,
    sigma_n: f64,
    sigma_tilde: f64,
}

#[derive(Serialize)]
struct ReadingsEcho {
    corrected: f64,
    printed_literal: f64,
}

#[derive(Serialize)]
struct CrossCheck {
    mean_tol: f64,
    p0_tol: f64,
    variance_tol: f64,
    pass: bool,
}

fn resolve_instance(
    s: u32,
    beta: Option<f64>,
    delta: Option<f64>,
    a: Option<f64>,
    b: Option<f64>,
) -> Result<QueueInstance, CliError> {
    match (beta, delta, a, b) {
        (Some(beta), Some(delta), None, None) => {
            check_positive(beta, "beta")?;
            check_delta(delta)?;
            Ok(regime_instance(s, beta, delta)?.0)
        }
        (None, None, Some(a), Some(b)) => {
            let model = ArrivalModel::new(a, b)?;
            Ok(QueueInstance::new(model, s)?)
        }
        _ => Err(CliError::Validation(
            "specify the instance as either --beta/--delta (regime) or --a/--b (raw)".into(),
        )),
    }
}

fn parse_methods(names: &[String]) -> Result<Vec<Method>, CliError> {
    let mut enabled = Vec::new();
    for name in names {
        let m = Method::ALL
            .iter()
            .find(|m| m.as_str() == name.trim().to_lowercase())
            .copied()
            .ok_or_else(|| CliError::Validation(format!("unknown method '{name}'")))?;
        if !enabled.contains(&m) {
            enabled.push(m);
        }
    }
    if enabled.is_empty() {
        return Err(CliError::Validation("no methods enabled".into()));
    }
    // Report in canonical order regardless of request order.
    Ok(Method::ALL
        .iter()
        .copied()
        .filter(|m| enabled.contains(m))
        .collect())
}

fn run_method(
    inst: &QueueInstance,
    method: Method,
    tol: f64,
    seed: u64,
) -> Result<StationaryMetrics, odq_core::Error> {
    match method {
        Method::Spitzer => spitzer_metrics(inst, tol),
        Method::Pollaczek => pollaczek_metrics(inst, 64),
        Method::Roots => {
            let set = find_roots_fixed_point(inst, (tol * 1e-3).clamp(1e-15, 1e-12), 200_000)?;
            roots_metrics(inst, &set)
        }
        Method::Markov => markov_stationary(
            inst,
            &MarkovConfig {
                truncation: None,
                tol,
            },
        ),
        Method::MonteCarlo => simulate(inst, &SimConfig::for_instance(inst, seed)),
        Method::Classical => classical_approx(inst),
        Method::Robust => robust_approx(inst),
    }
}

pub fn run_compare(args: &CompareArgs) -> Result<Rendered, CliError> {
    check_positive(args.tol, "tol")?;
    let inst = resolve_instance(args.s, args.beta, args.delta, args.a, args.b)?;
    let methods = parse_methods(&args.methods)?;

    let mut reports = Vec::new();
    let mut computed: Vec<(Method, StationaryMetrics)> = Vec::new();
    let mut failures = false;
    for &method in &methods {
        match run_method(&inst, method, args.tol, args.seed) {
            Ok(m) => {
                reports.push(MethodReport {
                    method: method.as_str(),
                    status: "ok".into(),
                    mean: Some(m.mean),
                    variance: m.variance,
                    sd: m.sd(),
                    p0: Some(m.p0),
                    err_mean: Some(m.err.mean),
                    err_variance: m.variance.map(|_| m.err.variance),
                    err_p0: Some(m.err.p0),
                });
                computed.push((method, m));
            }
            Err(e) => {
                failures = true;
                reports.push(MethodReport {
                    method: method.as_str(),
                    status: format!("error: {e}"),
                    mean: None,
                    variance: None,
                    sd: None,
                    p0: None,
                    err_mean: None,
                    err_variance: None,
                    err_p0: None,
                });
            }
        }
    }

    let mut pairwise = Vec::new();
    for i in 0..computed.len() {
        for j in i + 1..computed.len() {
            let (ma, a) = computed[i];
            let (mb, b) = computed[j];
            pairwise.push(PairwiseDelta {
                a: ma.as_str(),
                b: mb.as_str(),
                mean: (a.mean - b.mean).abs(),
                p0: (a.p0 - b.p0).abs(),
                variance: a.variance.zip(b.variance).map(|(x, y)| (x - y).abs()),
            });
        }
    }

    // Exact-engine concordance gate: spitzer/pollaczek/roots means and p0
    // within 1e-7, spitzer/pollaczek variance within 1e-6.
    let exact: Vec<&StationaryMetrics> = computed
        .iter()
        .filter(|(m, _)| matches!(m, Method::Spitzer | Method::Pollaczek | Method::Roots))
        .map(|(_, v)| v)
        .collect();
    let mut pass = true;
    for i in 0..exact.len() {
        for j in i + 1..exact.len() {
            pass &= (exact[i].mean - exact[j].mean).abs() < 1e-7;
            pass &= (exact[i].p0 - exact[j].p0).abs() < 1e-7;
            if let (Some(x), Some(y)) = (exact[i].variance, exact[j].variance) {
                pass &= (x - y).abs() < 1e-6;
            }
        }
    }

    let arrivals = inst.arrivals();
    let hp = odq_core::hedge::robust_hedge(&inst);
    let diagnostics = CompareDiagnostics {
        instance: InstanceEcho {
            a: arrivals.a(),
            b: arrivals.b(),
            s: inst.capacity(),
            mu: arrivals.mean(),
            sigma2: arrivals.variance(),
            rho: inst.utilization(),
            hedge_beta: inst.hedge_beta(),
        },
        saddle: inst.saddle_data().ok().map(|sd| SaddleEcho {
            z_sp: sd.z_sp,
            r0: sd.r0,
            g_dd_sp: sd.g_dd_sp,
        }),
        hedge: HedgeEcho {
            beta: hp.beta,
            beta_n: hp.beta_n,
            sigma_n: hp.sigma_n,
            sigma_tilde: hp.sigma_tilde,
        },
        bl_term_ratio: bl_term_ratio(&inst),
        pairwise,
        exact_cross_check: CrossCheck {
            mean_tol: 1e-7,
            p0_tol: 1e-7,
            variance_tol: 1e-6,
            pass,
        },
        robust_variance_readings: robust_variance_readings(&inst).ok().map(
            |(corrected, printed_literal)| ReadingsEcho {
                corrected,
                printed_literal,
            },
        ),
    };

    let header = [
        "method",
        "status",
        "mean",
        "variance",
        "sd",
        "p0",
        "err_mean",
        "err_variance",
        "err_p0",
    ];
    let opt = |v: Option<f64>, fmt: fn(f64) -> String| v.map(fmt).unwrap_or_else(|| "nan".into());
    let text = match args.format {
        Format::Json => to_json(&JsonReport {
            spec: SpecEcho {
                command: "compare",
                args,
            },
            results: &reports,
            diagnostics: &diagnostics,
        })?,
        Format::Csv | Format::Markdown => {
            let fmt: fn(f64) -> String = if args.format == Format::Csv {
                render::full
            } else {
                render::short
            };
            let cells: Vec<Vec<String>> = reports
                .iter()
                .map(|r| {
                    vec![
                        r.method.to_string(),
                        r.status.clone(),
                        opt(r.mean, fmt),
                        opt(r.variance, fmt),
                        opt(r.sd, fmt),
                        opt(r.p0, fmt),
                        opt(r.err_mean, fmt),
                        opt(r.err_variance, fmt),
                        opt(r.err_p0, fmt),
                    ]
                })
                .collect();
            if args.format == Format::Csv {
                render::csv(&header, &cells)
            } else {
                render::markdown(&header, &cells)
            }
        }
    };
    Ok(Rendered {
        text,
        out: args.out.clone(),
        numerical_failures: failures,
    })
}

// ---------------------------------------------------------------- roots ---

#[derive(Serialize)]
struct RootRow {
    k: u32,
    fp_re: f64,
    fp_im: f64,
    fp_residual: f64,
    fp_iterations: u32,
    bl_re: Option<f64>,
    bl_im: Option<f64>,
    bl_residual: Option<f64>,
    bl_status: &'static str,
}

pub fn run_roots(args: &RootsArgs) -> Result<Rendered, CliError> {
    check_positive(args.tol, "tol")?;
    if args.max_iter == 0 {
        return Err(CliError::Validation("max-iter must be >= 1".into()));
    }
    if args.terms == 0 {
        return Err(CliError::Validation("terms must be >= 1".into()));
    }
    let inst = resolve_instance(args.s, args.beta, args.delta, args.a, args.b)?;
    let fp = find_roots_fixed_point(&inst, args.tol, args.max_iter)?;
    let bl = match find_roots_bl(&inst, args.terms) {
        Ok(set) => Some(set),
        Err(odq_core::Error::SeriesDivergent { .. }) => None,
        Err(e) => return Err(e.into()),
    };

    let bl_status = if bl.is_some() {
        "converged"
    } else {
        "divergent"
    };
    let rows: Vec<RootRow> = (0..fp.len())
        .map(|i| RootRow {
            k: i as u32 + 1,
            fp_re: fp.roots[i].re,
            fp_im: fp.roots[i].im,
            fp_residual: fp.residuals[i],
            fp_iterations: fp.iterations[i],
            bl_re: bl.as_ref().map(|s| s.roots[i].re),
            bl_im: bl.as_ref().map(|s| s.roots[i].im),
            bl_residual: bl.as_ref().map(|s| s.residuals[i]),
            bl_status,
        })
        .collect();

    let diagnostics = serde_json::json!({
        "bl_term_ratio": bl_term_ratio(&inst),
        "bl_status": bl_status,
        "root_count": fp.len(),
    });
    let header = [
        "k",
        "fp_re",
        "fp_im",
        "fp_residual",
        "fp_iterations",
        "bl_re",
        "bl_im",
        "bl_residual",
        "bl_status",
    ];
    let opt = |v: Option<f64>, fmt: fn(f64) -> String| v.map(fmt).unwrap_or_else(|| "nan".into());
    let text = match args.format {
        Format::Json => to_json(&JsonReport {
            spec: SpecEcho {
                command: "roots",
                args,
            },
            results: &rows,
            diagnostics: &diagnostics,
        })?,
        Format::Csv | Format::Markdown => {
            let fmt: fn(f64) -> String = if args.format == Format::Csv {
                render::full
            } else {
                render::short
            };
            let cells: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.k.to_string(),
                        fmt(r.fp_re),
                        fmt(r.fp_im),
                        render::full(r.fp_residual),
                        r.fp_iterations.to_string(),
                        opt(r.bl_re, fmt),
                        opt(r.bl_im, fmt),
                        opt(r.bl_residual, render::full),
                        r.bl_status.to_string(),
                    ]
                })
                .collect();
            if args.format == Format::Csv {
                render::csv(&header, &cells)
            } else {
                render::markdown(&header, &cells)
            }
        }
    };
    Ok(Rendered {
        text,
        out: args.out.clone(),
        numerical_failures: false,
    })
}
