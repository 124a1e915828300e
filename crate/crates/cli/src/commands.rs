//! One function per subcommand, each producing a [`Document`].

use bergman_core::ancillary::{a_of_n_sweep, overlap_sweep};
use bergman_core::geometry::{ChartPoint, ModelSpace};
use bergman_core::model_kernels::{closed_form_kernel, model_error_sweep, trace_identity, BergmanModel};
use bergman_core::numerics::LogReal;
use bergman_core::report::{ExperimentReport, ReportRow};
use bergman_core::torus::{build_basis, near_diagonal_grid, torus_decay_experiment, torus_trace, TorusGeometry};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::output::Document;

fn model(cfg: &RunConfig) -> Result<ModelSpace> {
    Ok(ModelSpace::new(cfg.kappa, cfg.dim, cfg.radius)?)
}

fn rng(cfg: &RunConfig) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.seed)
}

fn fit_json(r: &ExperimentReport) -> Value {
    match &r.fit {
        Some(f) => json!({ "slope": f.slope, "intercept": f.intercept, "r_squared": f.r_squared }),
        None => Value::Null,
    }
}

pub fn a_of_n(cfg: &RunConfig) -> Result<Document> {
    let m = model(cfg)?;
    let ctx = cfg.precision()?;
    let report = a_of_n_sweep(&m, &cfg.levels(), &ctx)?;
    let r2 = cfg.radius * cfg.radius;
    let rate = if cfg.kappa == 0.0 { r2 } else { (1.0 + cfg.kappa * r2).ln() / cfg.kappa };
    let summary = json!({ "fit": fit_json(&report), "predicted_slope": rate });
    Ok(Document::new(cfg, vec![report], summary))
}

/// Pairs `(z, w)` drawn uniformly from the ball of radius r/2.
pub fn model_grid(m: &ModelSpace, count: usize, rng: &mut ChaCha8Rng) -> Vec<(ChartPoint, ChartPoint)> {
    (0..count)
        .map(|_| {
            let z = m.sample_ball(rng, m.chart_radius / 2.0);
            let w = m.sample_ball(rng, m.chart_radius / 2.0);
            (z, w)
        })
        .collect()
}

/// Per N, the largest relative gap between the basis sum and the closed
/// form `P_κ(N) Ψ^N` over the grid.
pub fn closed_form_exactness(
    m: &ModelSpace,
    ns: &[u32],
    grid: &[(ChartPoint, ChartPoint)],
    cfg: &RunConfig,
) -> Result<ExperimentReport> {
    let ctx = cfg.precision()?;
    let mut report = ExperimentReport::new("closed_form_exactness", &["N"]);
    for &n in ns {
        let model = BergmanModel::new(m, n, &ctx)?;
        let mut worst: Option<(LogReal, LogReal, LogReal)> = None;
        for (z, w) in grid {
            let basis = model.basis_kernel(z, w, &ctx)?;
            if !basis.converged {
                return Err(bergman_core::Error::CutoffInsufficient(format!("basis sum at N = {n}")).into());
            }
            let closed = closed_form_kernel(m, n, z, w, ctx.mantissa_bits)?;
            let rel = basis.value.magnitude_rel_diff(&closed);
            if worst.as_ref().map_or(true, |(_, _, r)| rel.cmp_abs(r).is_gt()) {
                worst = Some((basis.value.log_magnitude, closed.log_magnitude, rel));
            }
        }
        let (b, c, rel) = worst.expect("grid is nonempty");
        report.push(ReportRow::new(vec![n as f64], &b, &c, &rel, "closed form P_κ(N) Ψ^N (relative)"));
    }
    Ok(report)
}

pub fn kernel_error(cfg: &RunConfig) -> Result<Document> {
    let ctx = cfg.precision()?;
    let mut rng = rng(cfg);
    if let Some(tau) = cfg.tau_complex() {
        let grid = near_diagonal_grid(tau, cfg.points, cfg.max_sep, &mut rng);
        let (report, fit) = torus_decay_experiment(tau, &cfg.levels(), &grid, &ctx)?;
        let predicted = TorusGeometry::new(tau, 1)?.predicted_rate();
        let summary = json!({
            "fit": { "slope": fit.slope, "intercept": fit.intercept, "r_squared": fit.r_squared },
            "predicted_slope": predicted,
        });
        return Ok(Document::new(cfg, vec![report], summary));
    }
    let m = model(cfg)?;
    let grid = model_grid(&m, cfg.points, &mut rng);
    let ns = cfg.levels();
    let sweep = model_error_sweep(&m, &ns, &grid, &ctx)?;
    let exact = closed_form_exactness(&m, &ns, &grid, cfg)?;
    let max_rel = exact.max_log_error();
    let summary = json!({
        "fit": fit_json(&sweep),
        "max_ln_closed_form_discrepancy": if max_rel.is_finite() { json!(max_rel) } else { Value::Null },
    });
    Ok(Document::new(cfg, vec![sweep, exact], summary))
}

fn trace_row(n: u32, trace: f64, reference: f64, oracle: &str) -> ReportRow {
    let prec = 64;
    ReportRow::new(
        vec![n as f64],
        &LogReal::from_f64(trace, prec),
        &LogReal::from_f64(reference, prec),
        &LogReal::from_f64(((trace - reference) / reference).abs(), prec),
        oracle,
    )
}

pub fn trace(cfg: &RunConfig) -> Result<Document> {
    let ctx = cfg.precision()?;
    let mut report = ExperimentReport::new("trace", &["N"]);
    let mut warnings = Vec::new();
    if let Some(tau) = cfg.tau_complex() {
        for n in cfg.levels() {
            let basis = build_basis(&TorusGeometry::new(tau, n)?, &ctx)?;
            report.push(trace_row(n, torus_trace(&basis)?, n as f64, "dimension N"));
        }
    } else {
        let m = model(cfg)?;
        for n in cfg.levels() {
            let t = trace_identity(&BergmanModel::new(&m, n, &ctx)?, &ctx)?;
            match t.dimension {
                Some(dim) => report.push(trace_row(n, t.trace, dim as f64, "binomial(N/κ + d, d)")),
                None => report.push(trace_row(n, t.trace, t.p_times_volume, "P_κ(N) · volume")),
            }
            if let Some(w) = t.warning {
                if !warnings.contains(&w) {
                    warnings.push(w);
                }
            }
        }
    }
    report.notes.extend(warnings);
    Ok(Document::new(cfg, vec![report], Value::Null))
}

/// `count` points on a spiral out to half the largest admissible centre.
pub fn overlap_grid(m: &ModelSpace, count: usize) -> Vec<ChartPoint> {
    let r = m.chart_radius;
    let kappa = m.kappa().abs();
    let mut reach = r / 2.0;
    if kappa > 0.0 {
        reach = reach.min(0.9 / (r * kappa));
    }
    (1..=count)
        .map(|k| {
            let rho = reach * k as f64 / count as f64;
            ChartPoint::new(vec![Complex64::from_polar(rho, 0.7 * k as f64)])
        })
        .collect()
}

pub fn overlap(cfg: &RunConfig) -> Result<Document> {
    if cfg.dim != 1 {
        return Err(CliError::Usage(format!("overlap needs --dim 1, got {}", cfg.dim)));
    }
    let m = model(cfg)?;
    let ctx = cfg.precision()?;
    let y = ChartPoint::new(vec![Complex64::new(cfg.y[0], cfg.y[1])]);
    let grid = overlap_grid(&m, cfg.points);
    let (report, bound) = overlap_sweep(&m, &cfg.levels(), &y, &grid, &ctx)?;
    let summary = json!({
        "fit": fit_json(&report),
        "gaussian_bound": { "c": bound.c, "big_c": bound.big_c, "r_squared": bound.r_squared },
    });
    Ok(Document::new(cfg, vec![report], summary))
}
