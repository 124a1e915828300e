//! Constant-curvature model family.
//!
//! Conventions: `f_κ(t) = ln(1 + κt)/κ` (with `f_0(t) = t`), volume element
//! `(1 + κ|z|²)^{-(d+1)}` times Lebesgue measure, and
//! `‖Ψ^N(z, w)‖_h = exp((N/2)·D_κ(z, w))`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rug::ops::Pow;
use rug::{Float, Integer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{wrap_phase, LogReal, MpComplex};

/// Precision used by the f64-facing wrappers.
const SCALAR_BITS: u32 = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Spherical,
    Flat,
    Hyperbolic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curvature {
    kappa: f64,
}

impl Curvature {
    pub fn new(kappa: f64) -> Result<Self> {
        if !kappa.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "curvature must be finite, got {kappa}"
            )));
        }
        Ok(Curvature { kappa })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn regime(&self) -> Regime {
        if self.kappa > 0.0 {
            Regime::Spherical
        } else if self.kappa < 0.0 {
            Regime::Hyperbolic
        } else {
            Regime::Flat
        }
    }

    /// Supremum of admissible `t = |z|²`: `1/|κ|` when hyperbolic.
    pub fn domain_bound(&self) -> f64 {
        if self.kappa < 0.0 {
            1.0 / -self.kappa
        } else {
            f64::INFINITY
        }
    }

    /// Radius inside which `x ↦ f_κ(|x|²)` is strongly convex.
    pub fn convexity_radius(&self) -> f64 {
        if self.kappa > 0.0 {
            1.0 / self.kappa.sqrt()
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpace {
    pub curvature: Curvature,
    pub dim: usize,
    pub chart_radius: f64,
}

impl ModelSpace {
    pub fn new(kappa: f64, dim: usize, chart_radius: f64) -> Result<Self> {
        let curvature = Curvature::new(kappa)?;
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        if !(chart_radius > 0.0) || !chart_radius.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "chart radius must be positive and finite, got {chart_radius}"
            )));
        }
        if chart_radius * chart_radius >= curvature.domain_bound() {
            return Err(Error::Domain(format!(
                "hyperbolic chart radius {chart_radius} needs r² < 1/|κ| = {}",
                curvature.domain_bound()
            )));
        }
        Ok(ModelSpace {
            curvature,
            dim,
            chart_radius,
        })
    }

    /// Model with the default chart radius for its regime.
    pub fn with_default_radius(kappa: f64, dim: usize) -> Result<Self> {
        ModelSpace::new(kappa, dim, default_radius(kappa))
    }

    pub fn kappa(&self) -> f64 {
        self.curvature.kappa
    }

    pub fn regime(&self) -> Regime {
        self.curvature.regime()
    }

    pub fn is_compact(&self) -> bool {
        self.regime() == Regime::Spherical
    }

    pub fn check_dim(&self, z: &ChartPoint) -> Result<()> {
        if z.dim() != self.dim {
            return Err(Error::InvalidParameter(format!(
                "point has dimension {}, model has {}",
                z.dim(),
                self.dim
            )));
        }
        Ok(())
    }

    /// Dimension check plus the potential's domain (`|z|² < 1/|κ|`).
    pub fn check_domain(&self, z: &ChartPoint) -> Result<()> {
        self.check_dim(z)?;
        let t = z.norm_sqr();
        if !(t < self.curvature.domain_bound()) {
            return Err(Error::Domain(format!(
                "|z|² = {t} outside the hyperbolic bound 1/|κ| = {}",
                self.curvature.domain_bound()
            )));
        }
        Ok(())
    }

    /// Domain check plus `|z| ≤ chart_radius`.
    pub fn check_chart(&self, z: &ChartPoint) -> Result<()> {
        self.check_domain(z)?;
        let r = z.norm_sqr().sqrt();
        if r > self.chart_radius * (1.0 + 1e-12) {
            return Err(Error::Domain(format!(
                "|z| = {r} exceeds chart radius {}",
                self.chart_radius
            )));
        }
        Ok(())
    }

    /// Uniform sample from the ball of the given radius in C^d.
    pub fn sample_ball<R: Rng + ?Sized>(&self, rng: &mut R, radius: f64) -> ChartPoint {
        sample_ball(rng, self.dim, radius)
    }
}

pub fn default_radius(kappa: f64) -> f64 {
    if kappa < 0.0 {
        0.9 / (-kappa).sqrt()
    } else {
        2.0
    }
}

pub fn sample_ball<R: Rng + ?Sized>(rng: &mut R, dim: usize, radius: f64) -> ChartPoint {
    let g: Vec<f64> = (0..2 * dim).map(|_| rng.sample(StandardNormal)).collect();
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    let u: f64 = rng.gen();
    let rho = radius * u.powf(1.0 / (2 * dim) as f64);
    let coords = (0..dim)
        .map(|i| Complex64::new(g[2 * i], g[2 * i + 1]) * (rho / norm))
        .collect();
    ChartPoint { coords }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub coords: Vec<Complex64>,
}

impl ChartPoint {
    pub fn new(coords: Vec<Complex64>) -> Self {
        ChartPoint { coords }
    }

    pub fn origin(dim: usize) -> Self {
        ChartPoint {
            coords: vec![Complex64::new(0.0, 0.0); dim],
        }
    }

    /// Point with real coordinates.
    pub fn real(xs: &[f64]) -> Self {
        ChartPoint {
            coords: xs.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coords.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `z · w̄ = Σ z_i conj(w_i)`.
    pub fn dot_conj(&self, w: &ChartPoint) -> Complex64 {
        self.coords
            .iter()
            .zip(&w.coords)
            .map(|(a, b)| a * b.conj())
            .sum()
    }

    pub fn to_mp(&self, prec: u32) -> Vec<MpComplex> {
        self.coords
            .iter()
            .map(|c| MpComplex::from_c64(prec, *c))
            .collect()
    }
}

/// Frame-relative two-point kernel sample: `‖·‖_h` as a LogReal and a phase.
#[derive(Clone, Debug, Serialize)]
pub struct KernelValue {
    pub log_magnitude: LogReal,
    pub phase: f64,
}

impl KernelValue {
    pub fn new(log_magnitude: LogReal, phase: f64) -> Self {
        KernelValue {
            log_magnitude,
            phase,
        }
    }

    /// `ln ‖·‖_h` as f64.
    pub fn ln_magnitude(&self) -> f64 {
        self.log_magnitude.ln_abs_f64()
    }

    pub fn magnitude_f64(&self) -> f64 {
        self.log_magnitude.to_f64()
    }

    pub fn conj(&self) -> KernelValue {
        KernelValue {
            log_magnitude: self.log_magnitude.clone(),
            phase: -self.phase,
        }
    }

    /// Product of two kernel values (tensor product of fibres).
    pub fn mul(&self, other: &KernelValue) -> KernelValue {
        let p = (self.phase + other.phase).rem_euclid(std::f64::consts::TAU);
        let phase = if p > std::f64::consts::PI {
            p - std::f64::consts::TAU
        } else {
            p
        };
        KernelValue {
            log_magnitude: self.log_magnitude.mul(&other.log_magnitude),
            phase,
        }
    }

    /// `| ‖a‖ - ‖b‖ | / max(‖a‖, ‖b‖)`.
    pub fn magnitude_rel_diff(&self, other: &KernelValue) -> LogReal {
        LogReal::relative_difference(&self.log_magnitude, &other.log_magnitude)
    }
}

/// `f_κ(t)`.
pub fn f_eval(c: &Curvature, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("f_κ needs t >= 0, got {t}")));
    }
    if !(t < c.domain_bound()) {
        return Err(Error::Domain(format!(
            "f_κ with κ = {} needs t < 1/|κ| = {}, got {t}",
            c.kappa,
            c.domain_bound()
        )));
    }
    Ok(f_eval_mp(c.kappa, &Float::with_val(SCALAR_BITS, t)).to_f64())
}

/// `f_κ(t)` without domain checks.
pub fn f_eval_mp(kappa: f64, t: &Float) -> Float {
    let prec = t.prec();
    if kappa == 0.0 {
        return t.clone();
    }
    let kt = Float::with_val(prec, t * kappa);
    kt.ln_1p() / kappa
}

/// `ln(1 + κt)`, the log of the volume-density base.
pub fn ln_one_plus_kappa_t(kappa: f64, t: &Float) -> Float {
    let prec = t.prec();
    Float::with_val(prec, t * kappa).ln_1p()
}

/// Holomorphic extension `f̃_κ(s) = Log(1 + κs)/κ` (principal branch).
pub fn f_polarized(c: &Curvature, s: Complex64) -> Result<Complex64> {
    Ok(f_polarized_mp(c.kappa, &MpComplex::from_c64(SCALAR_BITS, s))?.to_c64())
}

pub fn f_polarized_mp(kappa: f64, s: &MpComplex) -> Result<MpComplex> {
    if kappa == 0.0 {
        return Ok(s.clone());
    }
    let prec = s.prec();
    let ks = s.scale(&Float::with_val(prec, kappa));
    let one_plus_re = Float::with_val(prec, &ks.re + 1u32);
    if ks.im.is_zero() && one_plus_re <= 0 {
        return Err(Error::Domain(format!(
            "1 + κs = {} lies on the branch cut of the principal logarithm",
            one_plus_re.to_f64()
        )));
    }
    // |1 + κs|² - 1 = 2κ Re s + |κs|²
    let excess = Float::with_val(prec, &ks.re * 2u32) + ks.norm_sqr();
    let re = excess.ln_1p() / 2u32;
    let im = Float::with_val(prec, ks.im.atan2_ref(&one_plus_re));
    Ok(MpComplex::new(re / kappa, im / kappa))
}

/// `|z - w|² + κ(|z|²|w|² - |z·w̄|²)` via the Lagrange identity, so the
/// bracket is a sum of squares.
fn separation_mp(kappa: f64, z: &[MpComplex], w: &[MpComplex], prec: u32) -> Float {
    let mut diff = Float::new(prec);
    for (a, b) in z.iter().zip(w) {
        diff += a.sub(b).norm_sqr();
    }
    if kappa == 0.0 {
        return diff;
    }
    let mut wedge = Float::new(prec);
    for i in 0..z.len() {
        for j in i + 1..z.len() {
            let m = z[i].mul(&w[j]).sub(&z[j].mul(&w[i]));
            wedge += m.norm_sqr();
        }
    }
    diff + wedge * kappa
}

pub(crate) fn norm_sqr_mp(z: &[MpComplex], prec: u32) -> Float {
    let mut acc = Float::new(prec);
    for c in z {
        acc += c.norm_sqr();
    }
    acc
}

pub(crate) fn dot_conj_mp(z: &[MpComplex], w: &[MpComplex], prec: u32) -> MpComplex {
    let mut acc = MpComplex::zero(prec);
    for (a, b) in z.iter().zip(w) {
        acc.fma_assign(a, &b.conj());
    }
    acc
}

/// `D_κ(z, w) = 2 Re f̃(z·w̄) - f(|z|²) - f(|w|²)`.
pub fn psi_exponent(m: &ModelSpace, z: &ChartPoint, w: &ChartPoint) -> Result<f64> {
    Ok(psi_exponent_mp(m, z, w, SCALAR_BITS)?.to_f64())
}

/// `D_κ` at the given precision, evaluated as
/// `ln(1 - κQ/((1+κ|z|²)(1+κ|w|²)))/κ` with `Q ≥ 0` from
/// [`separation_mp`]; this is free of cancellation near the diagonal.
pub fn psi_exponent_mp(m: &ModelSpace, z: &ChartPoint, w: &ChartPoint, prec: u32) -> Result<Float> {
    m.check_domain(z)?;
    m.check_domain(w)?;
    Ok(psi_exponent_raw(m.kappa(), &z.to_mp(prec), &w.to_mp(prec), prec))
}

pub(crate) fn psi_exponent_raw(kappa: f64, z: &[MpComplex], w: &[MpComplex], prec: u32) -> Float {
    let q = separation_mp(kappa, z, w, prec);
    if kappa == 0.0 {
        return -q;
    }
    let den = (Float::with_val(prec, norm_sqr_mp(z, prec) * kappa) + 1u32)
        * (Float::with_val(prec, norm_sqr_mp(w, prec) * kappa) + 1u32);
    let u = Float::with_val(prec, &q * kappa) / den;
    (-u).ln_1p() / kappa
}

/// `Im f̃_κ(z·w̄)` (principal branch).
pub(crate) fn im_polarized_raw(kappa: f64, z: &[MpComplex], w: &[MpComplex], prec: u32) -> Float {
    let s = dot_conj_mp(z, w, prec);
    if kappa == 0.0 {
        s.im
    } else {
        let one_plus_re = Float::with_val(prec, &s.re * kappa) + 1u32;
        let kim = Float::with_val(prec, &s.im * kappa);
        Float::with_val(prec, kim.atan2_ref(&one_plus_re)) / kappa
    }
}

/// `N · Im f̃_κ(z·w̄)` reduced to (-π, π].
pub(crate) fn psi_phase_raw(kappa: f64, n: f64, z: &[MpComplex], w: &[MpComplex], prec: u32) -> f64 {
    wrap_phase(&(im_polarized_raw(kappa, z, w, prec) * n))
}

/// `Ψ^N(z, w)` as a KernelValue.
pub fn psi_value(m: &ModelSpace, n: u32, z: &ChartPoint, w: &ChartPoint) -> Result<KernelValue> {
    psi_value_mp(m, n, z, w, SCALAR_BITS)
}

pub fn psi_value_mp(
    m: &ModelSpace,
    n: u32,
    z: &ChartPoint,
    w: &ChartPoint,
    prec: u32,
) -> Result<KernelValue> {
    if n == 0 {
        return Err(Error::InvalidParameter("N must be >= 1".into()));
    }
    m.check_domain(z)?;
    m.check_domain(w)?;
    let (zm, wm) = (z.to_mp(prec), w.to_mp(prec));
    let kappa = m.kappa();
    let s = dot_conj_mp(&zm, &wm, prec);
    if kappa != 0.0 {
        let one_plus_re = Float::with_val(prec, &s.re * kappa) + 1u32;
        let on_cut = s.im.is_zero() && one_plus_re <= 0;
        if on_cut && (n as f64 / kappa).fract() != 0.0 {
            return Err(Error::Domain(format!(
                "1 + κ z·w̄ = {} is on the branch cut and N/κ = {} is not an integer",
                one_plus_re.to_f64(),
                n as f64 / kappa
            )));
        }
    }
    let d = psi_exponent_raw(kappa, &zm, &wm, prec);
    let log_mag = LogReal::from_log(d * n / 2u32);
    Ok(KernelValue {
        log_magnitude: log_mag,
        phase: psi_phase_raw(kappa, n as f64, &zm, &wm, prec),
    })
}

/// Model geodesic distance.
pub fn geodesic_distance(m: &ModelSpace, z: &ChartPoint, w: &ChartPoint) -> Result<f64> {
    m.check_domain(z)?;
    m.check_domain(w)?;
    let prec = SCALAR_BITS;
    let (zm, wm) = (z.to_mp(prec), w.to_mp(prec));
    let kappa = m.kappa();
    let q = separation_mp(kappa, &zm, &wm, prec);
    if kappa == 0.0 {
        return Ok(q.sqrt().to_f64());
    }
    let den = (Float::with_val(prec, norm_sqr_mp(&zm, prec) * kappa) + 1u32)
        * (Float::with_val(prec, norm_sqr_mp(&wm, prec) * kappa) + 1u32);
    let u = Float::with_val(prec, q * kappa.abs()) / den;
    let root = u.sqrt();
    let scale = kappa.abs().sqrt();
    let d = if kappa > 0.0 {
        root.min(&Float::with_val(prec, 1u32)).asin()
    } else {
        root.asinh()
    };
    Ok(d.to_f64() / scale)
}

/// `(1 + κ|z|²)^{-(d+1)}`.
pub fn volume_density(m: &ModelSpace, z: &ChartPoint) -> Result<f64> {
    m.check_domain(z)?;
    let t = Float::with_val(SCALAR_BITS, z.norm_sqr());
    Ok(ln_volume_density_mp(m.kappa(), m.dim, &t).exp().to_f64())
}

/// `ln ρ_κ` at `|z|² = t`.
pub fn ln_volume_density_mp(kappa: f64, dim: usize, t: &Float) -> Float {
    if kappa == 0.0 {
        return Float::new(t.prec());
    }
    -(ln_one_plus_kappa_t(kappa, t) * (dim as u32 + 1))
}

/// `P_κ(N) = π^{-d} ∏_{j=1..d} (N + jκ)`.
pub fn p_poly(c: &Curvature, d: usize, n: f64) -> f64 {
    p_poly_mp(c.kappa, d, &Float::with_val(SCALAR_BITS, n)).to_f64()
}

pub fn p_poly_mp(kappa: f64, d: usize, n: &Float) -> Float {
    let prec = n.prec();
    let mut acc = Float::with_val(prec, 1u32);
    let k = Float::with_val(prec, kappa);
    for j in 1..=d {
        acc *= Float::with_val(prec, &k * j as u32) + n;
    }
    let pi = Float::with_val(prec, rug::float::Constant::Pi);
    acc / rug::ops::Pow::pow(pi, d as u32)
}

/// `π^d P_κ(N)` for rational `κ = num/den` as an exact fraction
/// `(∏_{j=1..d} (den·N + j·num), den^d)`.
pub fn p_poly_rational(num: i64, den: u64, d: usize, n: u64) -> Result<(Integer, Integer)> {
    if den == 0 {
        return Err(Error::InvalidParameter("zero denominator".into()));
    }
    let mut top = Integer::from(1);
    for j in 1..=d as i64 {
        top *= Integer::from(den) * n + Integer::from(j) * num;
    }
    Ok((top, Integer::from(den).pow(d as u32)))
}

/// Coefficients `c_0..c_d` of `P_κ(N) = Σ c_k N^k`.
pub fn p_poly_coefficients(kappa: f64, d: usize) -> Vec<f64> {
    let mut coeffs = vec![1.0];
    for j in 1..=d {
        // multiply by (N + jκ)
        let mut next = vec![0.0; coeffs.len() + 1];
        for (i, c) in coeffs.iter().enumerate() {
            next[i] += c * j as f64 * kappa;
            next[i + 1] += c;
        }
        coeffs = next;
    }
    let scale = std::f64::consts::PI.powi(-(d as i32));
    coeffs.iter().map(|c| c * scale).collect()
}

/// Real Hessian of `x ↦ f_κ(|x|²)` on R^{2d} by central differences.
pub fn potential_hessian(m: &ModelSpace, z: &ChartPoint, h: f64) -> Result<DMatrix<f64>> {
    m.check_domain(z)?;
    let n = 2 * m.dim;
    let x0: Vec<f64> = z.coords.iter().flat_map(|c| [c.re, c.im]).collect();
    let kappa = m.kappa();
    let f = |x: &[f64]| -> f64 {
        let t: f64 = x.iter().map(|v| v * v).sum();
        if kappa == 0.0 {
            t
        } else {
            (kappa * t).ln_1p() / kappa
        }
    };
    let mut hess = DMatrix::zeros(n, n);
    let mut x = x0.clone();
    for i in 0..n {
        for j in i..n {
            let mut at = |di: f64, dj: f64| {
                x.copy_from_slice(&x0);
                x[i] += di;
                x[j] += dj;
                f(&x)
            };
            let v = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    Ok(hess)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn smallest_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{LN_2, PI};

    fn c(k: f64) -> Curvature {
        Curvature::new(k).unwrap()
    }

    fn pt(re: f64, im: f64) -> ChartPoint {
        ChartPoint::new(vec![Complex64::new(re, im)])
    }

    #[test]
    fn regimes() {
        assert_eq!(c(2.0).regime(), Regime::Spherical);
        assert_eq!(c(0.0).regime(), Regime::Flat);
        assert_eq!(c(-0.5).regime(), Regime::Hyperbolic);
        assert!(Curvature::new(f64::NAN).is_err());
    }

    #[test]
    fn f_eval_examples() {
        assert_eq!(f_eval(&c(0.0), 0.7).unwrap(), 0.7);
        assert!((f_eval(&c(1.0), 1.0).unwrap() - LN_2).abs() < 1e-16);
        assert!((f_eval(&c(-1.0), 0.5).unwrap() - LN_2).abs() < 1e-16);
        let err = f_eval(&c(-1.0), 1.0).unwrap_err();
        assert!(err.to_string().contains("1/|κ|"), "{err}");
        assert!(f_eval(&c(1.0), -0.1).is_err());
    }

    #[test]
    fn f_polarized_examples() {
        let s = Complex64::new(2.0, 3.0);
        assert_eq!(f_polarized(&c(0.0), s).unwrap(), s);
        let v = f_polarized(&c(1.0), Complex64::new(0.0, 1.0)).unwrap();
        assert!((v.re - 0.5 * LN_2).abs() < 1e-16);
        assert!((v.im - PI / 4.0).abs() < 1e-16);
        for k in [1.0, -0.7, 0.3] {
            let t = 0.4;
            let a = f_polarized(&c(k), Complex64::new(t, 0.0)).unwrap();
            assert!((a.re - f_eval(&c(k), t).unwrap()).abs() < 1e-16);
            assert_eq!(a.im, 0.0);
        }
        assert!(f_polarized(&c(1.0), Complex64::new(-1.0, 0.0)).is_err());
        assert!(f_polarized(&c(-1.0), Complex64::new(2.0, 0.0)).is_err());
    }

    #[test]
    fn f_polarized_conjugate_symmetric() {
        let s = Complex64::new(0.3, -0.8);
        let a = f_polarized(&c(0.6), s).unwrap();
        let b = f_polarized(&c(0.6), s.conj()).unwrap();
        assert!((a - b.conj()).norm() < 1e-16);
    }

    #[test]
    fn psi_exponent_examples() {
        let m = ModelSpace::new(1.0, 1, 2.0).unwrap();
        let z = pt(0.3, -0.2);
        assert_eq!(psi_exponent(&m, &z, &z).unwrap(), 0.0);
        let d = psi_exponent(&m, &ChartPoint::origin(1), &pt(1.0, 0.0)).unwrap();
        assert!((d + LN_2).abs() < 1e-16);
        let flat = ModelSpace::new(0.0, 2, 2.0).unwrap();
        let a = ChartPoint::new(vec![Complex64::new(0.1, 0.4), Complex64::new(-0.3, 0.2)]);
        let b = ChartPoint::new(vec![Complex64::new(0.5, -0.1), Complex64::new(0.2, 0.0)]);
        let direct = -(a.coords[0] - b.coords[0]).norm_sqr() - (a.coords[1] - b.coords[1]).norm_sqr();
        assert!((psi_exponent(&flat, &a, &b).unwrap() - direct).abs() < 1e-15);
    }

    #[test]
    fn psi_exponent_matches_definition() {
        for (k, dim) in [(1.0, 2), (-1.0, 2), (0.4, 1)] {
            let m = ModelSpace::with_default_radius(k, dim).unwrap();
            let z = ChartPoint::new(vec![Complex64::new(0.2, 0.1); dim]);
            let w = ChartPoint::new(vec![Complex64::new(-0.1, 0.3); dim]);
            let s = z.dot_conj(&w);
            let def = 2.0 * f_polarized(&m.curvature, s).unwrap().re
                - f_eval(&m.curvature, z.norm_sqr()).unwrap()
                - f_eval(&m.curvature, w.norm_sqr()).unwrap();
            assert!((psi_exponent(&m, &z, &w).unwrap() - def).abs() < 1e-14);
        }
    }

    #[test]
    fn psi_value_examples() {
        let flat = ModelSpace::new(0.0, 2, 2.0).unwrap();
        let v = psi_value(&flat, 4, &ChartPoint::origin(2), &ChartPoint::real(&[1.0, 0.0])).unwrap();
        assert!((v.ln_magnitude() + 2.0).abs() < 1e-15);
        assert_eq!(v.phase, 0.0);
        let m = ModelSpace::new(1.0, 1, 2.0).unwrap();
        let z = pt(0.4, 0.3);
        let diag = psi_value(&m, 17, &z, &z).unwrap();
        assert_eq!(diag.ln_magnitude(), 0.0);
        assert_eq!(diag.phase, 0.0);
        let w = pt(-0.2, 0.5);
        let a = psi_value(&m, 5, &z, &w).unwrap();
        let b = psi_value(&m, 10, &z, &w).unwrap();
        assert!((2.0 * a.ln_magnitude() - b.ln_magnitude()).abs() < 1e-14);
        let back = psi_value(&m, 5, &w, &z).unwrap();
        assert!((a.phase + back.phase).abs() < 1e-14);
        assert_eq!(a.ln_magnitude(), back.ln_magnitude());
    }

    #[test]
    fn psi_value_across_cut_integer_power() {
        let m = ModelSpace::new(1.0, 1, 2.0).unwrap();
        let v = psi_value(&m, 3, &pt(1.5, 0.0), &pt(-1.5, 0.0)).unwrap();
        // |1 + z w̄| = 1.25, (1 + 2.25) each side
        let expect = 1.5 * (1.25f64.powi(2) / 3.25f64.powi(2)).ln();
        assert!((v.ln_magnitude() - expect).abs() < 1e-14);
        assert!((v.phase.abs() - PI).abs() < 1e-14);
        let frac = ModelSpace::new(0.8, 1, 2.0).unwrap();
        assert!(psi_value(&frac, 3, &pt(1.5, 0.0), &pt(-1.5, 0.0)).is_err());
    }

    #[test]
    fn geodesic_examples() {
        let m = ModelSpace::new(1.0, 1, 2.0).unwrap();
        let d = geodesic_distance(&m, &ChartPoint::origin(1), &pt(1.0, 0.0)).unwrap();
        assert!((d - PI / 4.0).abs() < 1e-15);
        let z = pt(0.3, 0.3);
        assert_eq!(geodesic_distance(&m, &z, &z).unwrap(), 0.0);
        let flat = ModelSpace::new(0.0, 1, 2.0).unwrap();
        assert!((geodesic_distance(&flat, &pt(0.0, 1.0), &pt(1.0, 0.0)).unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn geodesic_matches_arc_length() {
        // Integrate ds = |dz| sqrt(g) along the radial segment [0, t].
        for k in [1.0, -1.0, 0.5] {
            let m = ModelSpace::with_default_radius(k, 1).unwrap();
            let t: f64 = 0.6;
            let steps = 20000;
            let h = t / steps as f64;
            let len: f64 = (0..steps)
                .map(|i| {
                    let r = (i as f64 + 0.5) * h;
                    h / (1.0 + k * r * r)
                })
                .sum();
            let d = geodesic_distance(&m, &ChartPoint::origin(1), &pt(t, 0.0)).unwrap();
            assert!((d - len).abs() < 1e-8, "κ={k}: {d} vs {len}");
        }
    }

    #[test]
    fn volume_density_examples() {
        let m = ModelSpace::new(1.0, 1, 2.0).unwrap();
        assert!((volume_density(&m, &pt(1.0, 0.0)).unwrap() - 0.25).abs() < 1e-16);
        let h = ModelSpace::new(-1.0, 1, 0.9).unwrap();
        assert!((volume_density(&h, &pt(0.5f64.sqrt(), 0.0)).unwrap() - 4.0).abs() < 1e-14);
        let flat = ModelSpace::new(0.0, 3, 2.0).unwrap();
        assert_eq!(volume_density(&flat, &ChartPoint::real(&[1.0, 0.5, 0.2])).unwrap(), 1.0);
        assert_eq!(volume_density(&m, &ChartPoint::origin(1)).unwrap(), 1.0);
    }

    #[test]
    fn p_poly_examples() {
        assert!((p_poly(&c(1.0), 1, 7.0) - 8.0 / PI).abs() < 1e-15);
        assert!((p_poly(&c(0.0), 2, 7.0) - 49.0 / (PI * PI)).abs() < 1e-14);
        let half = p_poly(&c(0.5), 1, 10.0);
        assert!((half - 10.5 / PI).abs() < 1e-15);
        assert!((half - 0.5 * p_poly(&c(1.0), 1, 20.0)).abs() < 1e-15);
    }

    #[test]
    fn p_poly_coefficients_match_evaluation() {
        let coeffs = p_poly_coefficients(0.7, 3);
        let n = 4.5f64;
        let v: f64 = coeffs.iter().enumerate().map(|(k, a)| a * n.powi(k as i32)).sum();
        assert!((v - p_poly(&c(0.7), 3, n)).abs() < 1e-13);
    }

    #[test]
    fn hyperbolic_radius_checked() {
        assert!(ModelSpace::new(-1.0, 1, 1.0).is_err());
        assert!((default_radius(-4.0) - 0.45).abs() < 1e-16);
        let m = ModelSpace::with_default_radius(-1.0, 1).unwrap();
        assert!(psi_exponent(&m, &pt(1.0, 0.0), &ChartPoint::origin(1)).is_err());
    }

    #[test]
    fn hessian_flat_is_twice_identity() {
        let m = ModelSpace::new(0.0, 2, 2.0).unwrap();
        let h = potential_hessian(&m, &ChartPoint::real(&[0.3, -0.2]), 1e-4).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let e = if i == j { 2.0 } else { 0.0 };
                assert!((h[(i, j)] - e).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn hessian_radial_eigenvalue() {
        // Radial eigenvalue 2(1 - κt)/(1 + κt)², tangential 2/(1 + κt).
        let m = ModelSpace::new(1.0, 1, 2.0).unwrap();
        let z = pt(0.5, 0.0);
        let h = potential_hessian(&m, &z, 1e-4).unwrap();
        let t = 0.25;
        assert!((h[(0, 0)] - 2.0 * (1.0 - t) / (1.0 + t) / (1.0 + t)).abs() < 1e-6);
        assert!((h[(1, 1)] - 2.0 / (1.0 + t)).abs() < 1e-6);
        let outside = potential_hessian(&m, &pt(1.5, 0.0), 1e-4).unwrap();
        assert!(smallest_eigenvalue(&outside) < 0.0);
    }

    #[test]
    fn sample_ball_inside() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let p = sample_ball(&mut rng, 2, 0.7);
            assert!(p.norm_sqr() <= 0.49 + 1e-15);
        }
    }
}
