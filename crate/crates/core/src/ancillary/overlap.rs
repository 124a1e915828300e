use rug::Float;
use serde::Serialize;

use super::{a_of_n, log_weight};
use crate::error::{Error, Result};
use crate::report::{ExperimentReport, ReportRow};
use crate::geometry::{f_eval_mp, geodesic_distance, ChartPoint, KernelValue, ModelSpace};
use crate::numerics::{
    fit_log_linear, fit_log_values, integrate_1d, panels_for_rate, LogReal, PrecisionContext,
};
#[cfg(test)]
use crate::geometry::f_polarized_mp;
#[cfg(test)]
use crate::numerics::MpComplex;

#[cfg(test)]
const MAX_ANGULAR_POINTS: usize = 1 << 14;
const EXCISED_BITS: u32 = 128;

/// Overlap of the coherent state at `y` with the one at the origin.
#[derive(Clone, Debug, Serialize)]
pub struct CoherentSample {
    pub center: ChartPoint,
    pub n: u32,
    /// `a(N)^{-2} ∫_{B(0,r) ∩ B_y} ψ_y · conj(ψ_0) · e^{-N f} ρ_κ`.
    pub overlap: KernelValue,
    /// `a(N)^{-1} e^{(N/2) D(0, y)}`.
    pub closed_form: KernelValue,
    /// `|overlap - closed_form|`.
    pub discrepancy: LogReal,
    /// `a(N)`.
    pub a_n: LogReal,
}

/// `Re e^{N f̃(ζ)}` in log form.
#[cfg(test)]
fn re_exp_polarized(kappa: f64, n: f64, zeta: &MpComplex) -> Result<LogReal> {
    let f = f_polarized_mp(kappa, zeta)?;
    let prec = zeta.prec();
    let cos = Float::with_val(prec, &f.im * n).cos();
    Ok(LogReal::from_float(&cos).scale_exp(&Float::with_val(prec, &f.re * n)))
}

/// Coherent-state overlap for d = 1.
///
/// `ψ_y(z) = e^{N f̃(z ȳ)} e^{-(N/2) f(|y|²)}` is supported on the
/// translated chart `B_y = {z : |z - y| < r |1 + κ ȳ z|}`; the integral over
/// `B(0, r) ∩ B_y` is the full-ball part, equal to a(N) since `e^{N f̃(z ȳ)}`
/// is holomorphic with value 1 at the origin, minus the part of `B(0, r)`
/// outside `B_y`, integrated numerically in polar coordinates about 0.
pub fn coherent_overlap(
    m: &ModelSpace,
    n: u32,
    y: &ChartPoint,
    ctx: &PrecisionContext,
) -> Result<CoherentSample> {
    if m.dim != 1 {
        return Err(Error::Unsupported(format!(
            "coherent overlaps are implemented for d = 1, got d = {}",
            m.dim
        )));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("N must be >= 1".into()));
    }
    m.check_dim(y)?;
    let r = m.chart_radius;
    let kappa = m.kappa();
    let eta = y.norm_sqr().sqrt();
    if eta > r / 2.0 * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "coherent state centre |y| = {eta} exceeds chart_radius/2 = {}",
            r / 2.0
        )));
    }
    let a_coef = 1.0 - kappa * kappa * r * r * eta * eta;
    if !(a_coef > 0.0) {
        return Err(Error::Domain(format!(
            "translated chart at |y| = {eta} is unbounded (needs |y| < 1/(r|κ|))"
        )));
    }
    let nf = n as f64;
    let prec = ctx.mantissa_bits;
    let a = a_of_n(m, n, ctx)?;
    // Mean value property: the full-ball part equals a(N) exactly.
    let excised = excised_part(kappa, nf, eta, r, a_coef)?;

    let eta2 = Float::with_val(prec, eta * eta);
    let half_f = f_eval_mp(kappa, &eta2) * nf / 2u32;
    let prefactor = a.mul(&a).recip().scale_exp(&(-half_f.clone()));
    let overlap = prefactor.mul(&a.sub(&excised.with_prec(prec)));
    let closed = a.recip().scale_exp(&(-half_f));
    let discrepancy = prefactor.mul(&excised.with_prec(prec)).abs();
    let phase = if overlap.sign() < 0 { std::f64::consts::PI } else { 0.0 };
    Ok(CoherentSample {
        center: y.clone(),
        n,
        overlap: KernelValue::new(overlap.abs(), phase),
        closed_form: KernelValue::new(closed, 0.0),
        discrepancy,
        a_n: a,
    })
}

#[cfg(test)]
/// Angular mean `(1/M) Σ_j Re e^{N f̃(ρ η e^{2πij/M})}` in log form.
fn angular_mean(kappa: f64, n: f64, radius: &Float, m: usize) -> Result<LogReal> {
    let prec = radius.prec();
    let two_pi = Float::with_val(prec, rug::float::Constant::Pi) * 2u32;
    let mut terms = Vec::with_capacity(m);
    for j in 0..m {
        let theta = Float::with_val(prec, &two_pi * j as u32) / m as u32;
        let zeta = MpComplex::from_polar(radius, &theta);
        terms.push(re_exp_polarized(kappa, n, &zeta)?);
    }
    let sum = LogReal::sum(terms.iter(), prec);
    Ok(sum.div(&LogReal::from_f64(m as f64, prec)))
}

/// Trapezoid size resolving the angular mean at the outermost radius.
#[cfg(test)]
fn angular_points(kappa: f64, n: f64, rho_eta_max: &Float, ctx: &PrecisionContext) -> Result<usize> {
    let log_tol = ctx.log_tol();
    let mut m = 16usize;
    let mut prev = angular_mean(kappa, n, rho_eta_max, m)?;
    while m < MAX_ANGULAR_POINTS {
        m *= 2;
        let next = angular_mean(kappa, n, rho_eta_max, m)?;
        let rel = LogReal::relative_difference(&prev, &next);
        if rel.ln_abs_f64() < log_tol {
            return Ok(m);
        }
        prev = next;
    }
    Err(Error::QuadratureNotConverged {
        coarse: prev.ln_abs_f64(),
        refined: prev.ln_abs_f64(),
        discrepancy: f64::NAN,
    })
}

/// `∫_{B(0,r)} e^{N f̃(z ȳ)} e^{-N f(|z|²)} ρ_κ dA` with `|y| = η`.
#[cfg(test)]
pub(crate) fn full_ball_part(kappa: f64, n: f64, eta: f64, r: f64, ctx: &PrecisionContext) -> Result<LogReal> {
    let prec = ctx.mantissa_bits;
    let upper = r * r;
    let m = angular_points(kappa, n, &Float::with_val(prec, r * eta), ctx)?;
    let fprime = |s: f64| 1.0 / (1.0 + kappa * s);
    let rate = [0.0, upper]
        .iter()
        .map(|&s| (n * fprime(s) + 2.0 * kappa.abs() * fprime(s)).abs())
        .fold(0.0, f64::max)
        + n * eta / r;
    let c = ctx.with_panels(panels_for_rate(upper, rate, ctx));
    let radial = integrate_1d(
        |s| {
            let rho = Float::with_val(prec, s.sqrt_ref()) * eta;
            let mean = angular_mean(kappa, n, &rho, m).unwrap_or_else(|_| LogReal::zero(prec));
            mean.mul(&log_weight(kappa, 1, n, 0.0, s))
        },
        &c.zero(),
        &c.float(upper),
        &c,
    )?;
    // dA = (1/2) ds dθ and the angular mean carries the 1/(2π)
    Ok(radial.mul(&LogReal::from_float(&Float::with_val(prec, rug::float::Constant::Pi))))
}

/// `∫_{φ0}^{π} Re e^{N f̃(t e^{iφ})} dφ` from the power series
/// `e^{N f̃(ζ)} = Σ c_k ζ^k`, `c_k = c_{k-1} (N - (k-1)κ)/k`, integrated
/// term by term; requires `|κ| t < 1`.
fn arc_integral(kappa: f64, n: f64, t: &Float, phi0: &Float, prec: u32) -> LogReal {
    let tf = t.to_f64();
    // the terms peak near e^{N f(t)} while the arc integral can be as small
    // as e^{-N t}
    let guard = (2.0 * n * tf / (1.0 - (kappa * tf).abs()).max(1e-3) / std::f64::consts::LN_2).ceil() as u32;
    let work = prec + guard + 32;
    let t = Float::with_val(work, t);
    let phi0 = Float::with_val(work, phi0);
    let pi = Float::with_val(work, rug::float::Constant::Pi);
    let (sin1, cos1) = phi0.clone().sin_cos(Float::new(work));
    let two_cos = Float::with_val(work, &cos1 * 2u32);
    let mut acc = Float::with_val(work, &pi - &phi0);
    let mut abs_acc = acc.clone().abs();
    let mut coef = Float::with_val(work, 1u32);
    let (mut s_prev, mut s_cur) = (Float::new(work), sin1);
    let eps = Float::with_val(work, Float::i_exp(1, -(prec as i32 + 16)));
    let mut k = 1u32;
    loop {
        coef *= Float::with_val(work, n - (k as f64 - 1.0) * kappa) * &t;
        coef /= k;
        if coef.is_zero() {
            break;
        }
        let term = Float::with_val(work, &coef * &s_cur) / k;
        acc -= &term;
        abs_acc += Float::with_val(work, coef.abs_ref()) / k;
        let ratio = (n - k as f64 * kappa).abs() * tf / (k as f64 + 1.0);
        if ratio < 0.5 && Float::with_val(work, coef.abs_ref()) / k < Float::with_val(work, &abs_acc * &eps) {
            break;
        }
        let s_next = Float::with_val(work, &two_cos * &s_cur) - &s_prev;
        s_prev = std::mem::replace(&mut s_cur, s_next);
        k += 1;
        if k > 1_000_000 {
            break;
        }
    }
    LogReal::from_float(&Float::with_val(prec, &acc))
}

/// `∫_{B(0,r) \ B_y} e^{N f̃(z ȳ)} e^{-N f(|z|²)} ρ_κ dA`, real by the
/// reflection symmetry about the ray through y.
fn excised_part(
    kappa: f64,
    n: f64,
    eta: f64,
    r: f64,
    a_coef: f64,
) -> Result<LogReal> {
    let prec = EXCISED_BITS;
    if eta == 0.0 {
        return Ok(LogReal::zero(prec));
    }
    // Along the ray at angle φ from y, z lies outside B_y iff
    // A ρ² - 2(1+κr²) η ρ cos φ + η² - r² ≥ 0.
    let b = 1.0 + kappa * r * r;
    let disc = (b * b * eta * eta - a_coef * (eta * eta - r * r)).sqrt();
    let rho0 = (-b * eta + disc) / a_coef;
    if rho0 >= r {
        return Ok(LogReal::zero(prec));
    }
    let loose = PrecisionContext::new(prec, 20, 4, 1e-20)?;
    let span = r - rho0;
    let cos_bound = |rho: &Float| -> Float {
        let num = Float::with_val(prec, rho.square_ref()) * a_coef + eta * eta - r * r;
        let den = Float::with_val(prec, rho * (2.0 * b * eta));
        (num / den).clamp(&-1.0f64, &1.0f64)
    };
    // log-derivative in ρ of the radial weight plus that of the arc integral
    let radial = 2.0 * r / (1.0 + kappa * r * r).max(1e-3);
    let arc = eta / (1.0 - (kappa * r * eta).abs()).max(1e-3).powi(2);
    let outer_rate = n * (radial + arc) * 2.0 * span;
    let oc = loose.with_panels(panels_for_rate(1.0, outer_rate, &loose));
    let outer = integrate_1d(
        |v| {
            // ρ = ρ0 + (r - ρ0) v², dρ = 2 (r - ρ0) v dv
            let v2 = Float::with_val(prec, v.square_ref());
            let rho = v2 * span + rho0;
            let phi0 = cos_bound(&rho).acos();
            let s = Float::with_val(prec, rho.square_ref());
            let radial = log_weight(kappa, 1, n, 0.0, &s);
            let rho_eta = Float::with_val(prec, &rho * eta);
            let inner = arc_integral(kappa, n, &rho_eta, &phi0, prec);
            let jac = Float::with_val(prec, &rho * v) * (4.0 * span);
            inner.mul(&radial).mul(&LogReal::from_float(&jac))
        },
        &loose.zero(),
        &loose.float(1.0),
        &oc,
    )?;
    Ok(outer)
}

/// Fitted Gaussian envelope `ln(|overlap|·a(N)) ≤ -c·N·dist² + C`.
#[derive(Clone, Debug, Serialize)]
pub struct GaussianBound {
    pub c: f64,
    /// Smallest C making the bound hold on every sample.
    pub big_c: f64,
    pub r_squared: f64,
}

/// Fit over samples `(N·dist², ln(|overlap|·a(N)))`.
pub fn gaussian_bound_fit(points: &[(f64, f64)]) -> Result<GaussianBound> {
    let fit = fit_log_values(points)?;
    let c = fit.slope;
    let big_c = points
        .iter()
        .map(|(x, y)| y + c * x)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(GaussianBound {
        c,
        big_c,
        r_squared: fit.r_squared,
    })
}

/// Overlaps at a fixed centre `y` over an N list (rows: overlap against
/// the closed form, with a decay fit of the discrepancy), and the Gaussian
/// envelope fitted over `grid` × N.
pub fn overlap_sweep(
    m: &ModelSpace,
    ns: &[u32],
    y: &ChartPoint,
    grid: &[ChartPoint],
    ctx: &PrecisionContext,
) -> Result<(ExperimentReport, GaussianBound)> {
    if ns.is_empty() {
        return Err(Error::InvalidParameter("empty N list".into()));
    }
    let origin = ChartPoint::origin(m.dim);
    let mut report = ExperimentReport::new("overlap", &["N"]);
    let mut decay = Vec::new();
    let mut envelope = Vec::new();
    for &n in ns {
        let s = coherent_overlap(m, n, y, ctx)?;
        report.push(ReportRow::new(
            vec![n as f64],
            &s.overlap.log_magnitude,
            &s.closed_form.log_magnitude,
            &s.discrepancy,
            "a(N)^{-1} e^{(N/2) D(0, y)}",
        ));
        decay.push((n as f64, s.discrepancy));
        for p in grid {
            let g = coherent_overlap(m, n, p, ctx)?;
            let dist = geodesic_distance(m, &origin, p)?;
            let ln = g.overlap.log_magnitude.mul(&g.a_n).ln_abs_f64();
            envelope.push((n as f64 * dist * dist, ln));
        }
    }
    if decay.len() >= 3 {
        report.fit = Some(fit_log_linear(&decay)?);
    }
    let bound = gaussian_bound_fit(&envelope)?;
    report.notes.push(format!(
        "gaussian envelope: ln(|overlap| a(N)) <= -{} N dist^2 + {} (r^2 = {})",
        bound.c, bound.big_c, bound.r_squared
    ));
    Ok((report, bound))
}
