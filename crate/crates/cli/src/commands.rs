use std::fs;
use std::path::PathBuf;

use mongeflow::asymptotic::{
    asymptotic_residuals, boundary_residuals, equivalence_check, kg_identity_residual, ma_residual,
    maxpoint_diagnostic, nonexistence_search, SearchOptions,
};
use mongeflow::calculus::HessianConvention;
use mongeflow::geodesic::tangency_order;
use mongeflow::report::default_tolerance;
use mongeflow::transport::{
    solve_transport, submersion_check, transport_residual, vertical_departure_rate, Density,
};
use mongeflow::{Chart, NormKind, ResidualReport};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Check, ExperimentConfig};
use crate::CliError;

/// Normalized residual below which the search reports that solutions exist.
pub const SOLUTION_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Verify,
    Search,
    Tangency,
    Transport,
    Submersion,
    SurfaceInfo,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Verify => "verify",
            Command::Search => "search",
            Command::Tangency => "tangency",
            Command::Transport => "transport",
            Command::Submersion => "submersion",
            Command::SurfaceInfo => "surface-info",
        }
    }
}

impl Check {
    fn name(self) -> &'static str {
        match self {
            Check::Asymptotic => "asymptotic",
            Check::MongeAmpere => "monge_ampere",
            Check::Equivalence => "equivalence",
            Check::Boundary => "boundary",
            Check::KgIdentity => "kg_identity",
            Check::Maxpoint => "maxpoint",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub passed: bool,
    pub report_path: PathBuf,
    pub json: String,
}

#[derive(Serialize)]
struct Envelope<'a> {
    toolkit: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a ExperimentConfig,
    passed: bool,
    result: Value,
}

struct Produced {
    passed: bool,
    result: Value,
    csv: Option<(&'static str, String)>,
}

/// Runs one experiment and writes its report files.
pub fn run(cmd: Command, cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let chart = cfg.build_chart()?;
    let out = match cmd {
        Command::Verify => verify(cfg, &chart)?,
        Command::Search => search(cfg, &chart)?,
        Command::Tangency => tangency(cfg, &chart)?,
        Command::Transport => transport(cfg, &chart)?,
        Command::Submersion => submersion(cfg, &chart)?,
        Command::SurfaceInfo => surface_info(&chart),
    };
    let envelope = Envelope {
        toolkit: "mongeflow",
        version: env!("CARGO_PKG_VERSION"),
        command: cmd.name(),
        config: cfg,
        passed: out.passed,
        result: out.result,
    };
    let json = serde_json::to_string_pretty(&envelope).expect("report serializes") + "\n";
    fs::create_dir_all(&cfg.output_dir)?;
    let stem = format!("{}-{}", cfg.name, cmd.name());
    let report_path = cfg.output_dir.join(format!("{stem}.json"));
    fs::write(&report_path, &json)?;
    if let Some((suffix, text)) = out.csv {
        fs::write(cfg.output_dir.join(format!("{stem}-{suffix}.csv")), text)?;
    }
    Ok(Outcome {
        passed: out.passed,
        report_path,
        json,
    })
}

fn report_value(r: &ResidualReport) -> Value {
    serde_json::to_value(r).expect("report serializes")
}

fn verify(cfg: &ExperimentConfig, chart: &Chart) -> Result<Produced, CliError> {
    let tol = cfg.tol.unwrap_or_else(|| default_tolerance(chart));
    let field = cfg.require_field()?;
    let x = field.vector(chart)?;
    let psi = field.stream(chart)?;
    let need_psi = |c: Check| {
        psi.as_ref()
            .ok_or_else(|| CliError::Config(format!("check {} needs a stream function", c.name())))
    };
    let checks = if cfg.checks.is_empty() {
        vec![Check::Asymptotic]
    } else {
        cfg.checks.clone()
    };
    let mut report = ResidualReport::new();
    for c in checks {
        let r = match c {
            Check::Asymptotic => asymptotic_residuals(&x, tol),
            Check::MongeAmpere => {
                let ma = ma_residual(need_psi(c)?, HessianConvention::default());
                let mut r = ResidualReport::new();
                r.push(
                    "ma.sup",
                    NormKind::Sup,
                    ma.sup_norm(),
                    tol,
                    "sup |det Hess psi - (g K / 2) |grad psi|^2|, covariant Hessian with indices lowered",
                );
                r
            }
            Check::Equivalence => equivalence_check(need_psi(c)?, tol),
            Check::Boundary => boundary_residuals(&x, tol)?,
            Check::KgIdentity => kg_identity_residual(&x, tol)?,
            Check::Maxpoint => maxpoint_diagnostic(&x, tol)?,
        };
        report.extend(r.prefixed(c.name()));
    }
    Ok(Produced {
        passed: report.passed(),
        result: json!({ "tolerance": tol, "report": report_value(&report) }),
        csv: None,
    })
}

fn search(cfg: &ExperimentConfig, chart: &Chart) -> Result<Produced, CliError> {
    let seed = cfg
        .seed
        .ok_or_else(|| CliError::Config("search needs an explicit seed".into()))?;
    let d = SearchOptions::default();
    let opts = SearchOptions {
        band_limit: cfg.band_limit.unwrap_or(d.band_limit),
        restarts: cfg.restarts.unwrap_or(d.restarts),
        seed,
        margin: cfg.margin.unwrap_or(d.margin),
        max_iters: cfg.max_iters.unwrap_or(d.max_iters),
        ..d
    };
    if opts.restarts == 0 {
        return Err(CliError::Config("restarts must be positive".into()));
    }
    let r = nonexistence_search(chart, &opts)?;
    let verdict = if r.normalized_residual < SOLUTION_THRESHOLD {
        "solutions exist"
    } else {
        "no solution found"
    };
    let result = json!({
        "options": opts,
        "normalized_residual": r.normalized_residual,
        "verdict": verdict,
        "solution_threshold": SOLUTION_THRESHOLD,
        "restarts": r.restarts,
        "best_coefficients": r.best_coefficients,
        "outcomes": r.outcomes,
        "definitions": {
            "normalized_residual": "min over restarts of ||det Hess psi - (g K / 2)|grad psi|^2||_L2^2 / ||grad psi||_L2^4 for psi in the search basis",
            "residual_history": "normalized residual of the best restart at each descent iteration",
        },
    });
    Ok(Produced {
        passed: true,
        result,
        csv: Some(("history", r.history_csv())),
    })
}

fn tangency(cfg: &ExperimentConfig, chart: &Chart) -> Result<Produced, CliError> {
    let x = cfg.require_field()?.vector(chart)?;
    let fit = tangency_order(&x, cfg.t_max.unwrap_or(0.1), cfg.samples.unwrap_or(9))?;
    let mut csv = String::from("t,distance\n");
    for (t, d) in fit.t_samples.iter().zip(&fit.distances) {
        csv.push_str(&format!("{t:e},{d:e}\n"));
    }
    let result = json!({
        "fit": fit,
        "definitions": {
            "distances": "L2 distance between the Euler and Burgers flow maps issued from X0 at each time",
            "fitted_exponent": "least-squares slope of log distance against log t over the first decade above round-off",
            "taylor.relative_gap": "|d''(0)^2 - ||grad p||^2| / ||grad p||^2 with d(t) = d''(0) t^2 / 2 + O(t^3)",
        },
    });
    Ok(Produced {
        passed: true,
        result,
        csv: Some(("distances", csv)),
    })
}

fn transport_pair(cfg: &ExperimentConfig, chart: &Chart) -> Result<(Density, Density), CliError> {
    let m = Density::uniform(chart)?;
    let n = Density::cosine(chart, cfg.epsilon.unwrap_or(0.2), cfg.product.unwrap_or(false))?;
    Ok((m, n))
}

fn transport(cfg: &ExperimentConfig, chart: &Chart) -> Result<Produced, CliError> {
    let tol = cfg.tol.unwrap_or(1e-10);
    let (m, n) = transport_pair(cfg, chart)?;
    let s = solve_transport(&m, &n, tol, cfg.max_iters.unwrap_or(30))?;
    let residual = transport_residual(&s.potential, &m, &n)?.sup_norm();
    let grad = s.potential.gradient()?;
    let cost = chart.integrate(&(grad.norm_sq().samples * &m.samples));
    let min_det = s.potential.guard(1.0)?;
    let passed = residual <= tol;
    let result = json!({
        "tolerance": tol,
        "newton": s.stats(),
        "residual_sup": residual,
        "wasserstein_cost": cost,
        "min_det": min_det,
        "definitions": {
            "residual_sup": "sup |det(I + Hess u) - m(x) / n(x + grad u(x))|",
            "wasserstein_cost": "integral of |grad u|^2 m, the squared L2 Wasserstein distance",
            "min_det": "min det(I + Hess u), positive when the map is the gradient of a convex function",
        },
    });
    let csv = [
        s.potential.u.to_csv("u"),
        m.field().to_csv("m"),
        n.field().to_csv("n"),
    ]
    .concat();
    Ok(Produced {
        passed,
        result,
        csv: Some(("fields", csv)),
    })
}

fn submersion(cfg: &ExperimentConfig, chart: &Chart) -> Result<Produced, CliError> {
    let (m, n) = transport_pair(cfg, chart)?;
    let s = solve_transport(&m, &n, cfg.tol.unwrap_or(1e-10), cfg.max_iters.unwrap_or(30))?;
    let mut report = submersion_check(&s.potential, &m, cfg.times.unwrap_or(5))?.prefixed("submersion");
    if let Some(f) = &cfg.field {
        let x = f.vector(chart)?;
        report.extend(vertical_departure_rate(&x, cfg.dt.unwrap_or(1e-4))?.prefixed("departure"));
    }
    Ok(Produced {
        passed: report.passed(),
        result: json!({ "newton": s.stats(), "report": report_value(&report) }),
        csv: None,
    })
}

fn surface_info(chart: &Chart) -> Produced {
    let (interior, edge) = chart.gauss_bonnet_terms();
    let k = &chart.curvature;
    let kmin = k.iter().copied().fold(f64::INFINITY, f64::min);
    let kmax = k.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let edges: Vec<Value> = chart
        .boundary
        .iter()
        .flatten()
        .map(|b| json!({ "edge": b.which_edge, "row": b.row, "kg": b.kg[0] }))
        .collect();
    let result = json!({
        "kind": chart.kind,
        "shape": chart.shape(),
        "closed": chart.is_closed(),
        "area": chart.area(),
        "curvature": { "min": kmin, "max": kmax },
        "gauss_bonnet": { "interior": interior, "boundary": edge, "total": interior + edge },
        "boundary": edges,
        "definitions": {
            "gauss_bonnet.interior": "integral of K dV",
            "gauss_bonnet.boundary": "sum over edges of the integral of k_g ds, inward normal convention",
            "boundary.kg": "geodesic curvature of the edge (constant along it on these charts)",
        },
    });
    Produced {
        passed: true,
        result,
        csv: Some(("fields", chart.to_csv_blocks())),
    }
}
