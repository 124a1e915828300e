//! The ancillary space A_N: holomorphic functions on the chart ball with
//! weight `e^{-N f_κ(|z|²)}` against the model volume element.

mod ball;
mod overlap;
mod polynomial;

use std::collections::BTreeMap;

use num_complex::Complex64;
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{f_eval_mp, ln_one_plus_kappa_t, p_poly_mp, ModelSpace, Regime};
use crate::numerics::{fit_log_linear, integrate_1d, panels_for_rate, LogReal, MpComplex, PrecisionContext};
use crate::report::{ExperimentReport, ReportRow};

pub use ball::BallRule;
pub use overlap::{coherent_overlap, gaussian_bound_fit, overlap_sweep, CoherentSample, GaussianBound};
pub use polynomial::{multi_indices, multi_indices_upto, Polynomial};

/// Integration domain for A_N inner products.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extent {
    /// The chart ball `B(0, r)`.
    Chart,
    /// The whole model chart: C^d for κ ≥ 0, the ball `|z|² < 1/|κ|` for κ < 0.
    Full,
}

/// `∫ s^p e^{-N f_κ(s)} (1 + κs)^{-(d+1)} ds` over `s = |z|²` in the extent.
pub fn radial_moment(
    m: &ModelSpace,
    n: f64,
    p: f64,
    extent: Extent,
    ctx: &PrecisionContext,
) -> Result<LogReal> {
    if !(n > 0.0) {
        return Err(Error::InvalidParameter(format!("N must be positive, got {n}")));
    }
    if !(p >= 0.0) {
        return Err(Error::InvalidParameter(format!("moment power must be >= 0, got {p}")));
    }
    let kappa = m.kappa();
    let d = m.dim as f64;
    let prec = ctx.mantissa_bits;
    match (extent, m.regime()) {
        (Extent::Full, Regime::Spherical) => {
            // u = κs/(1+κs) maps [0, ∞) onto [0, 1).
            let e = n / kappa + d - 1.0 - p;
            let scale = Float::with_val(prec, kappa).ln() * -(p + 1.0);
            Ok(beta_moment(p, e, ctx)?.scale_exp(&scale))
        }
        (Extent::Full, Regime::Hyperbolic) => {
            let k = -kappa;
            let e = n / k - d - 1.0;
            let scale = Float::with_val(prec, k).ln() * -(p + 1.0);
            Ok(beta_moment(p, e, ctx)?.scale_exp(&scale))
        }
        (Extent::Full, Regime::Flat) => {
            let span = 2.0 * (p + 1.0) - ctx.log_tol() + 40.0;
            let upper = span / n;
            let rate = n + 2.0 * p / upper;
            let c = ctx.with_panels(panels_for_rate(upper, rate, ctx));
            integrate_1d(
                |s| log_weight(kappa, m.dim, n, p, s),
                &c.zero(),
                &c.float(upper),
                &c,
            )
        }
        (Extent::Chart, _) => {
            let upper = m.chart_radius * m.chart_radius;
            let fprime = |s: f64| 1.0 / (1.0 + kappa * s);
            let drift = [0.0, upper]
                .iter()
                .map(|&s| (n * fprime(s) + (d + 1.0) * kappa.abs() * fprime(s)).abs())
                .fold(0.0, f64::max);
            let rate = drift + 2.0 * p / upper;
            let c = ctx.with_panels(panels_for_rate(upper, rate, ctx));
            integrate_1d(
                |s| log_weight(kappa, m.dim, n, p, s),
                &c.zero(),
                &c.float(upper),
                &c,
            )
        }
    }
}

/// `s^p e^{-N f(s)} (1+κs)^{-(d+1)}` in log form.
pub(crate) fn log_weight(kappa: f64, dim: usize, n: f64, p: f64, s: &Float) -> LogReal {
    let prec = s.prec();
    let mut l = -(f_eval_mp(kappa, s) * n);
    if kappa != 0.0 {
        l -= ln_one_plus_kappa_t(kappa, s) * (dim as u32 + 1);
    }
    if p != 0.0 {
        l += Float::with_val(prec, s.ln_ref()) * p;
    }
    LogReal::from_log(l)
}

/// `∫_0^1 u^p (1-u)^e du` by quadrature.
fn beta_moment(p: f64, e: f64, ctx: &PrecisionContext) -> Result<LogReal> {
    if !(e > -1.0) {
        return Err(Error::Domain(format!(
            "moment diverges at the boundary of the model (exponent {e} <= -1)"
        )));
    }
    let prec = ctx.mantissa_bits;
    let rate = p + e.abs() + 2.0;
    let c = ctx.with_panels(panels_for_rate(1.0, rate, ctx));
    integrate_1d(
        |u| {
            let mut l = Float::new(prec);
            if p != 0.0 {
                l += Float::with_val(prec, u.ln_ref()) * p;
            }
            if e != 0.0 {
                l += Float::with_val(prec, (-u.clone()).ln_1p()) * e;
            }
            LogReal::from_log(l)
        },
        &c.zero(),
        &c.float(1.0),
        &c,
    )
}

/// `ln(π^d / (d-1)!)`: A_N normalization of the radial measure `s^{d-1} ds`.
fn ln_radial_constant(dim: usize, prec: u32) -> Float {
    let pi = Float::with_val(prec, rug::float::Constant::Pi);
    let lf = Float::with_val(prec, Float::factorial(dim as u32 - 1)).ln();
    pi.ln() * dim as u32 - lf
}

/// `a(N) = ∫_{B(0,r)} e^{-N f_κ(|z|²)} ρ_κ(z) dLebesgue`.
pub fn a_of_n(m: &ModelSpace, n: u32, ctx: &PrecisionContext) -> Result<LogReal> {
    a_of_n_with(m, n, Extent::Chart, ctx)
}

pub fn a_of_n_with(
    m: &ModelSpace,
    n: u32,
    extent: Extent,
    ctx: &PrecisionContext,
) -> Result<LogReal> {
    if n == 0 {
        return Err(Error::InvalidParameter("N must be >= 1".into()));
    }
    let radial = radial_moment(m, n as f64, m.dim as f64 - 1.0, extent, ctx)?;
    Ok(radial.scale_exp(&ln_radial_constant(m.dim, ctx.mantissa_bits)))
}

/// `a(N)^{-1}` against `P_κ(N)` over an N list, with a log-linear fit of
/// the gap when at least three N are given.
pub fn a_of_n_sweep(m: &ModelSpace, ns: &[u32], ctx: &PrecisionContext) -> Result<ExperimentReport> {
    if ns.is_empty() {
        return Err(Error::InvalidParameter("empty N list".into()));
    }
    let r2 = Float::with_val(64, m.chart_radius * m.chart_radius);
    let rate = f_eval_mp(m.kappa(), &r2).to_f64();
    let mut report = ExperimentReport::new("a_of_n", &["N"]);
    let mut points = Vec::new();
    for &n in ns {
        let work = ctx.resolving(n as f64 * rate + 20.0);
        let prec = work.mantissa_bits;
        let a_inv = a_of_n(m, n, &work)?.recip();
        let p = LogReal::from_float(&p_poly_mp(m.kappa(), m.dim, &Float::with_val(prec, n)));
        let gap = a_inv.sub(&p).abs();
        report.push(ReportRow::new(vec![n as f64], &a_inv, &p, &gap, "P_κ(N)"));
        points.push((n as f64, gap));
    }
    if points.len() >= 3 {
        report.fit = Some(fit_log_linear(&points)?);
    }
    report.notes.push(format!("f_κ(r²) = {rate}"));
    Ok(report)
}

/// Monomial norms ‖z^ν‖ of A_N for |ν| ≤ max_degree.
#[derive(Clone, Debug, Serialize)]
pub struct AncillaryBasis {
    pub model: ModelSpace,
    pub n: u32,
    pub max_degree: u32,
    pub extent: Extent,
    /// ‖z^ν‖_{A_N}; only diagonal entries, distinct monomials are orthogonal.
    #[serde(serialize_with = "serialize_norms")]
    pub norms: BTreeMap<Vec<u32>, LogReal>,
}

fn serialize_norms<S: serde::Serializer>(
    norms: &BTreeMap<Vec<u32>, LogReal>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(norms.len()))?;
    for (nu, v) in norms {
        seq.serialize_element(&(nu, v.ln_abs_f64()))?;
    }
    seq.end()
}

impl AncillaryBasis {
    pub fn norm(&self, nu: &[u32]) -> Option<&LogReal> {
        self.norms.get(nu)
    }

    pub fn norm_sqr(&self, nu: &[u32]) -> Option<LogReal> {
        self.norms.get(nu).map(|v| v.mul(v))
    }

    /// `‖u‖_{A_N}` using orthogonality of monomials.
    pub fn poly_norm(&self, u: &Polynomial) -> Result<LogReal> {
        let prec = self
            .norms
            .values()
            .next()
            .map(|v| v.prec())
            .unwrap_or(64);
        let mut by_nu: BTreeMap<&[u32], Complex64> = BTreeMap::new();
        for (nu, c) in &u.terms {
            *by_nu.entry(nu.as_slice()).or_default() += c;
        }
        let mut terms = Vec::with_capacity(by_nu.len());
        for (nu, c) in by_nu {
            let n2 = self.norm_sqr(nu).ok_or_else(|| {
                Error::InvalidParameter(format!("monomial {nu:?} beyond basis degree"))
            })?;
            terms.push(n2.mul(&LogReal::from_f64(c.norm_sqr(), prec)));
        }
        Ok(LogReal::sum(terms.iter(), prec).powf(0.5))
    }
}

/// `‖z^ν‖²` from the radial moment of order `|ν| + d - 1`:
/// `π^d ν! / (|ν| + d - 1)! · M_{|ν|+d-1}`.
fn ln_angular_factor(nu: &[u32], prec: u32) -> Float {
    let dim = nu.len() as u32;
    let k: u32 = nu.iter().sum();
    let pi = Float::with_val(prec, rug::float::Constant::Pi);
    let mut l = pi.ln() * dim;
    for &v in nu {
        l += Float::with_val(prec, Float::factorial(v)).ln();
    }
    l - Float::with_val(prec, Float::factorial(k + dim - 1)).ln()
}

pub fn monomial_norms(
    m: &ModelSpace,
    n: u32,
    max_degree: u32,
    ctx: &PrecisionContext,
) -> Result<AncillaryBasis> {
    monomial_norms_with(m, n, max_degree, Extent::Chart, ctx)
}

pub fn monomial_norms_with(
    m: &ModelSpace,
    n: u32,
    max_degree: u32,
    extent: Extent,
    ctx: &PrecisionContext,
) -> Result<AncillaryBasis> {
    if n == 0 {
        return Err(Error::InvalidParameter("N must be >= 1".into()));
    }
    let prec = ctx.mantissa_bits;
    let mut norms = BTreeMap::new();
    for k in 0..=max_degree {
        let radial = radial_moment(m, n as f64, (k as usize + m.dim - 1) as f64, extent, ctx)?;
        for nu in multi_indices(m.dim, k) {
            let n2 = radial.scale_exp(&ln_angular_factor(&nu, prec));
            norms.insert(nu, n2.powf(0.5));
        }
    }
    Ok(AncillaryBasis {
        model: m.clone(),
        n,
        max_degree,
        extent,
        norms,
    })
}

/// Outcome of the reproducing-at-zero check.
#[derive(Clone, Debug, Serialize)]
pub struct ReproduceCheck {
    /// `u(0)`.
    pub lhs: Complex64,
    /// `a(N)^{-1} ⟨u, 1⟩_{A_N}`.
    pub rhs: Complex64,
    /// `|lhs - rhs|` at working precision.
    pub discrepancy: LogReal,
    /// `‖u‖_{A_N}`.
    pub u_norm: LogReal,
}

/// Compares `u(0)` with `a(N)^{-1}⟨u, 1⟩` where the inner product is a
/// full tensor quadrature over the chart ball.
pub fn reproduce_at_zero(
    m: &ModelSpace,
    n: u32,
    u: &Polynomial,
    ctx: &PrecisionContext,
) -> Result<ReproduceCheck> {
    if u.dim != m.dim {
        return Err(Error::InvalidParameter(format!(
            "polynomial in {} variables on a {}-dimensional model",
            u.dim, m.dim
        )));
    }
    let prec = ctx.mantissa_bits;
    let mut rule = BallRule::new(m, n, Extent::Chart, u.degree(), ctx)?;
    let zero = vec![0u32; m.dim];
    let mut pairing = MpComplex::zero(prec);
    for (nu, c) in &u.terms {
        let integral = rule.monomial_product(nu, &zero)?;
        pairing.fma_assign(&MpComplex::from_c64(prec, *c), &integral);
    }
    let a = rule.monomial_product(&zero, &zero)?.re;
    let rhs = pairing.scale(&Float::with_val(prec, a.recip_ref()));
    let lhs = u.constant_term();
    let diff = rhs.sub(&MpComplex::from_c64(prec, lhs));
    let basis = monomial_norms(m, n, u.degree(), ctx)?;
    Ok(ReproduceCheck {
        lhs,
        rhs: rhs.to_c64(),
        discrepancy: diff.abs_log(),
        u_norm: basis.poly_norm(u)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rug::ops::Pow;
    use std::f64::consts::PI;

    fn ctx() -> PrecisionContext {
        PrecisionContext::default()
    }

    fn rel(a: &LogReal, b: &Float) -> f64 {
        let bl = LogReal::from_float(b);
        LogReal::relative_difference(a, &bl).to_f64()
    }

    #[test]
    fn a_of_n_spherical_closed_form() {
        let m = ModelSpace::new(1.0, 1, 1.0).unwrap();
        for n in [1u32, 7, 30, 100] {
            let a = a_of_n(&m, n, &ctx()).unwrap();
            let p = 256;
            let half = Float::with_val(p, 0.5f64).pow(n + 1);
            let expect = Float::with_val(p, rug::float::Constant::Pi) / (n + 1)
                * (Float::with_val(p, 1u32) - half);
            assert!(rel(&a, &expect) < 1e-38, "N={n}");
        }
    }

    #[test]
    fn a_of_n_flat_full_and_hyperbolic() {
        let flat = ModelSpace::new(0.0, 1, 2.0).unwrap();
        for n in [3u32, 40] {
            let a = a_of_n_with(&flat, n, Extent::Full, &ctx()).unwrap();
            let expect = Float::with_val(256, rug::float::Constant::Pi) / n;
            assert!(rel(&a, &expect) < 1e-38);
        }
        let hyp = ModelSpace::new(-1.0, 1, 0.9).unwrap();
        for n in [5u32, 25] {
            let a = a_of_n(&hyp, n, &ctx()).unwrap();
            let tail = Float::with_val(256, 0.19f64).pow(n - 1);
            let expect = Float::with_val(256, rug::float::Constant::Pi) / (n - 1)
                * (Float::with_val(256, 1u32) - tail);
            // 0.19 is not exact in binary; compare at f64-level rounding of r
            assert!(rel(&a, &expect) < 1e-14, "N={n}");
        }
    }

    #[test]
    fn a_of_n_decreasing_and_positive() {
        let m = ModelSpace::new(0.3, 2, 2.0).unwrap();
        let mut prev: Option<LogReal> = None;
        for n in [2u32, 4, 8, 16] {
            let a = a_of_n(&m, n, &ctx()).unwrap();
            assert_eq!(a.sign(), 1);
            if let Some(p) = prev {
                assert!(a < p);
            }
            prev = Some(a);
        }
    }

    #[test]
    fn flat_full_norms_are_gamma_values() {
        let m = ModelSpace::new(0.0, 1, 2.0).unwrap();
        let n = 10u32;
        let b = monomial_norms_with(&m, n, 8, Extent::Full, &ctx()).unwrap();
        for k in 0..=8u32 {
            let expect = Float::with_val(256, Float::factorial(k))
                * Float::with_val(256, rug::float::Constant::Pi)
                / Float::with_val(256, n).pow(k + 1);
            assert!(rel(&b.norm_sqr(&[k]).unwrap(), &expect) < 1e-38, "k={k}");
        }
        let a = a_of_n_with(&m, n, Extent::Full, &ctx()).unwrap();
        assert!(LogReal::relative_difference(&a, &b.norm_sqr(&[0]).unwrap()).to_f64() < 1e-40);
    }

    #[test]
    fn spherical_full_norms_are_beta_values() {
        // ‖z^ν‖² = π^d ν! (N - |ν|)! / (N + d)! for κ = 1.
        let m = ModelSpace::new(1.0, 2, 2.0).unwrap();
        let n = 6u32;
        let b = monomial_norms_with(&m, n, n, Extent::Full, &ctx()).unwrap();
        for (nu, v) in &b.norms {
            let k: u32 = nu.iter().sum();
            let p = 256;
            let mut expect = Float::with_val(p, rug::float::Constant::Pi).pow(2u32);
            for &x in nu {
                expect *= Float::with_val(p, Float::factorial(x));
            }
            expect *= Float::with_val(p, Float::factorial(n - k));
            expect /= Float::with_val(p, Float::factorial(n + 2));
            assert!(rel(&v.mul(v), &expect) < 1e-38, "{nu:?}");
        }
    }

    #[test]
    fn spherical_full_beyond_degree_n_diverges() {
        let m = ModelSpace::new(1.0, 1, 2.0).unwrap();
        let err = monomial_norms_with(&m, 3, 4, Extent::Full, &ctx()).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn norms_positive_and_first_is_a() {
        let m = ModelSpace::new(-1.0, 2, 0.9).unwrap();
        let b = monomial_norms(&m, 20, 5, &ctx()).unwrap();
        assert_eq!(b.norms.len(), 21);
        assert!(b.norms.values().all(|v| v.sign() == 1));
        let a = a_of_n(&m, 20, &ctx()).unwrap();
        assert!(LogReal::relative_difference(&a, &b.norm_sqr(&[0, 0]).unwrap()).to_f64() < 1e-40);
    }

    #[test]
    fn reproduce_examples() {
        let m = ModelSpace::new(1.0, 1, 2.0).unwrap();
        let one = Polynomial::constant(1, Complex64::new(1.0, 0.0));
        let r = reproduce_at_zero(&m, 10, &one, &ctx()).unwrap();
        assert!((r.rhs - Complex64::new(1.0, 0.0)).norm() < 1e-30);
        let z1 = Polynomial::monomial(vec![1], Complex64::new(1.0, 0.0));
        let r = reproduce_at_zero(&m, 10, &z1, &ctx()).unwrap();
        assert_eq!(r.lhs, Complex64::new(0.0, 0.0));
        assert!(r.rhs.norm() < 1e-30);
    }

    #[test]
    fn reproduce_random_degree_ten() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let m = ModelSpace::new(1.0, 2, 2.0).unwrap();
        let c = ctx();
        for _ in 0..3 {
            let u = Polynomial::random(&mut rng, 2, 10);
            let r = reproduce_at_zero(&m, 30, &u, &c).unwrap();
            let bound = r.u_norm.mul(&LogReal::from_f64(10.0 * c.target_rel_tol, 256));
            assert!(r.discrepancy < bound, "{} vs {}", r.discrepancy, bound);
        }
    }

    #[test]
    fn a_of_n_gaussian_limit() {
        // a(N)^{-1} ≈ N/π on the flat chart of radius 2
        let m = ModelSpace::new(0.0, 1, 2.0).unwrap();
        let a = a_of_n(&m, 30, &ctx()).unwrap();
        assert!((a.recip().to_f64() - 30.0 / PI).abs() < 1e-12 * 30.0 / PI);
    }
}
