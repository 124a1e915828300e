//! Bergman kernels of principally polarized flat tori `C/(Z + τZ)` from
//! level-N theta functions, and their comparison with the flat model.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rug::Float;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::KernelValue;
use crate::numerics::{
    fit_log_linear, integrate_1d, wrap_phase, DecayFit, LogReal, MpComplex,
    PrecisionContext,
};
use crate::report::{ExperimentReport, ReportRow};

/// Torus `C/(Z + τZ)` with the N-th power of the principal polarization.
#[derive(Clone, Debug, Serialize)]
pub struct TorusGeometry {
    pub tau: Complex64,
    pub n: u32,
    /// Levi form `π / Im τ` of the weight.
    pub levi: f64,
}

impl TorusGeometry {
    pub fn new(tau: Complex64, n: u32) -> Result<Self> {
        if !(tau.im > 0.0) || !tau.re.is_finite() {
            return Err(Error::InvalidParameter(format!("need Im τ > 0, got τ = {tau}")));
        }
        if n == 0 {
            return Err(Error::InvalidParameter("N must be >= 1".into()));
        }
        Ok(TorusGeometry {
            tau,
            n,
            levi: std::f64::consts::PI / tau.im,
        })
    }

    pub fn im_tau(&self) -> f64 {
        self.tau.im
    }

    /// Length of the shortest nonzero vector of `Z + τZ`.
    pub fn shortest_vector(&self) -> f64 {
        let bound = (2.0 / self.tau.im).ceil() as i64 + 2;
        let mut best = f64::INFINITY;
        for b in 0..=bound {
            for a in -bound * 4 - 4..=bound * 4 + 4 {
                if a == 0 && b == 0 {
                    continue;
                }
                best = best.min((Complex64::new(a as f64, 0.0) + self.tau * b as f64).norm());
            }
        }
        best
    }

    /// Heuristic decay rate `(a/2) ℓ_min²` from the nearest lattice image.
    pub fn predicted_rate(&self) -> f64 {
        self.levi / 2.0 * self.shortest_vector().powi(2)
    }

    /// `2πN / Im τ`.
    fn c(&self, prec: u32) -> Float {
        Float::with_val(prec, rug::float::Constant::Pi) * (2 * self.n) / self.tau.im
    }
}

/// Frequencies `n ≡ j (mod N)` whose theta terms at height `y` exceed
/// `e^{ln_tol}` relative to the largest term of the class.
fn frequency_range(g: &TorusGeometry, j: u32, y: f64, ln_tol: f64) -> Vec<i64> {
    let n = g.n as f64;
    let t = g.tau.im;
    let centre = -n * y / t;
    let half = (n * (-ln_tol + 10.0) / (std::f64::consts::PI * t) + n * n / 4.0).sqrt();
    let lo = (centre - half).floor() as i64;
    let hi = (centre + half).ceil() as i64;
    let nn = g.n as i64;
    let first = lo + (j as i64 - lo).rem_euclid(nn);
    (first..=hi).step_by(g.n as usize).collect()
}

/// `exp(πiτ n²/N + 2πi n (x + iy))` split as the y-dependent coefficient.
fn theta_coefficient(g: &TorusGeometry, freq: i64, y: &Float, prec: u32) -> MpComplex {
    let pi = Float::with_val(prec, rug::float::Constant::Pi);
    let nsq = Float::with_val(prec, freq) * freq;
    let t = Float::with_val(prec, g.tau.im);
    let mag = -(Float::with_val(prec, &pi * &t) * &nsq / g.n) - Float::with_val(prec, &pi * y) * (2 * freq);
    let phase = Float::with_val(prec, &pi * g.tau.re) * &nsq / g.n;
    MpComplex::from_polar(&mag.exp(), &phase)
}

/// `f_j(z) = Σ_{n ≡ j mod N} exp(πiτ n²/N + 2πi n z)`.
pub fn theta_raw(g: &TorusGeometry, j: u32, z: Complex64, ctx: &PrecisionContext) -> Result<MpComplex> {
    if j >= g.n {
        return Err(Error::InvalidParameter(format!("residue {j} out of range 0..{}", g.n)));
    }
    let prec = ctx.mantissa_bits;
    Ok(theta_mp(g, j, &MpComplex::from_c64(prec, z), ctx.log_tol()))
}

fn theta_mp(g: &TorusGeometry, j: u32, z: &MpComplex, ln_tol: f64) -> MpComplex {
    let prec = z.prec();
    let two_pi = Float::with_val(prec, rug::float::Constant::Pi) * 2u32;
    let mut acc = MpComplex::zero(prec);
    for freq in frequency_range(g, j, z.im.to_f64(), ln_tol) {
        let c = theta_coefficient(g, freq, &z.im, prec);
        let angle = Float::with_val(prec, &two_pi * &z.re) * freq;
        let unit = MpComplex::from_polar(&Float::with_val(prec, 1u32), &angle);
        acc.add_assign(&c.mul(&unit));
    }
    acc
}

/// How the Gram matrix of the raw thetas is assembled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum GramMethod {
    /// Exact x-integration in Fourier coefficient space; only diagonal
    /// entries are nonzero.
    Coefficient,
    /// `x_points`-point trapezoid in x on function values, full matrix.
    Spatial { x_points: usize },
}

/// Orthonormal basis `e_i = Σ_j C_ij f_j` of holomorphic sections.
#[derive(Clone, Debug)]
pub struct ThetaBasis {
    pub geometry: TorusGeometry,
    /// Inverse Cholesky factor of the Gram matrix (lower triangular).
    pub coefficients: Vec<Vec<MpComplex>>,
    pub gram: Vec<Vec<MpComplex>>,
    /// Half-width, in residue classes, of the theta series at heights in [0, Im τ].
    pub lattice_cutoff: u32,
    pub ctx: PrecisionContext,
}

/// Panels for y-integrands built from Gaussians `e^{-(y - y0)²/(2σ²)}` with
/// `σ² = Im τ / (4πN)`: a q-point rule on a panel of width `h` misses the
/// Gaussian by about `(β/4)^q / q!`, `β = h²/(8σ²)`.
fn y_context(g: &TorusGeometry, ctx: &PrecisionContext) -> PrecisionContext {
    let q = ctx.quad_order.max(2) as f64;
    let ln_q_fact: f64 = (2..=ctx.quad_order.max(2)).map(|k| (k as f64).ln()).sum();
    let ln_eps = ctx.log_tol() - 5.0;
    let beta = 4.0 * ((ln_eps + ln_q_fact) / q).exp();
    let sigma = (g.tau.im / (4.0 * std::f64::consts::PI * g.n as f64)).sqrt();
    let h = sigma * (8.0 * beta).sqrt();
    let panels = (1.25 * g.tau.im / h).ceil() as usize;
    ctx.with_panels(panels.max(ctx.panels))
}

pub fn build_basis(g: &TorusGeometry, ctx: &PrecisionContext) -> Result<ThetaBasis> {
    build_basis_with(g, GramMethod::Coefficient, ctx)
}

pub fn build_basis_with(g: &TorusGeometry, method: GramMethod, ctx: &PrecisionContext) -> Result<ThetaBasis> {
    let prec = ctx.mantissa_bits;
    let nn = g.n as usize;
    let ln_tol = ctx.log_tol();
    let yc = y_context(g, ctx);
    let t = g.tau.im;
    let c = g.c(prec);
    let weight_ln = |y: &Float| -> Float { -(Float::with_val(prec, y.square_ref()) * &c) };
    let mut gram = vec![vec![MpComplex::zero(prec); nn]; nn];
    match method {
        GramMethod::Coefficient => {
            for j in 0..g.n {
                let v = integrate_1d(
                    |y| {
                        let yf = y.to_f64();
                        let mut acc = Float::new(prec);
                        for freq in frequency_range(g, j, yf, ln_tol) {
                            acc += theta_coefficient(g, freq, y, prec).norm_sqr();
                        }
                        LogReal::from_float(&acc).scale_exp(&weight_ln(y))
                    },
                    &yc.zero(),
                    &yc.float(t),
                    &yc,
                )?;
                gram[j as usize][j as usize] = MpComplex::from_real(v.to_float(prec));
            }
        }
        GramMethod::Spatial { x_points } => {
            let m = x_points.max(1);
            let rule = crate::numerics::GaussLegendre::new(yc.quad_order, prec)?;
            for (y, wy) in rule.composite(&yc.zero(), &yc.float(t), yc.panels) {
                let scale = Float::with_val(prec, weight_ln(&y).exp_ref()) * &wy / m as u32;
                for xi in 0..m {
                    let x = Float::with_val(prec, xi as u32) / m as u32;
                    let z = MpComplex::new(x, y.clone());
                    let vals: Vec<MpComplex> = (0..g.n).map(|j| theta_mp(g, j, &z, ln_tol)).collect();
                    for a in 0..nn {
                        for b in 0..=a {
                            let p = vals[a].mul(&vals[b].conj()).scale(&scale);
                            gram[a][b].add_assign(&p);
                        }
                    }
                }
            }
            for a in 0..nn {
                for b in 0..a {
                    gram[b][a] = gram[a][b].conj();
                }
            }
        }
    }
    let coefficients = inverse_cholesky(&gram)?;
    let lattice_cutoff = (0..g.n)
        .map(|j| {
            let lo = frequency_range(g, j, 0.0, ln_tol);
            let hi = frequency_range(g, j, t, ln_tol);
            lo.len().max(hi.len()) as u32
        })
        .max()
        .unwrap_or(0)
        .div_ceil(2);
    Ok(ThetaBasis {
        geometry: g.clone(),
        coefficients,
        gram,
        lattice_cutoff,
        ctx: ctx.clone(),
    })
}

/// `L^{-1}` for the Hermitian Gram `G = L L^*`.
fn inverse_cholesky(g: &[Vec<MpComplex>]) -> Result<Vec<Vec<MpComplex>>> {
    let n = g.len();
    let prec = g.first().map(|r| r[0].prec()).unwrap_or(64);
    let mut l = vec![vec![MpComplex::zero(prec); n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = g[i][j].clone();
            for k in 0..j {
                s = s.sub(&l[i][k].mul(&l[j][k].conj()));
            }
            if i == j {
                if !(s.re > 0) {
                    return Err(Error::NotPositiveDefinite {
                        smallest_eigenvalue: smallest_eigenvalue_c(g),
                    });
                }
                l[i][i] = MpComplex::from_real(s.re.sqrt());
            } else {
                let inv = Float::with_val(prec, l[j][j].re.recip_ref());
                l[i][j] = s.scale(&inv);
            }
        }
    }
    // forward substitution, column by column
    let mut inv = vec![vec![MpComplex::zero(prec); n]; n];
    for col in 0..n {
        for i in col..n {
            let mut s = if i == col { MpComplex::one(prec) } else { MpComplex::zero(prec) };
            for k in col..i {
                s = s.sub(&l[i][k].mul(&inv[k][col]));
            }
            let d = Float::with_val(prec, l[i][i].re.recip_ref());
            inv[i][col] = s.scale(&d);
        }
    }
    Ok(inv)
}

fn smallest_eigenvalue_c(g: &[Vec<MpComplex>]) -> f64 {
    let n = g.len();
    let m = DMatrix::from_fn(n, n, |i, j| g[i][j].to_c64());
    m.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

impl ThetaBasis {
    /// Orthonormal section values `e_i(z)`.
    fn onb_values(&self, z: &MpComplex) -> Vec<MpComplex> {
        let ln_tol = self.ctx.log_tol();
        let prec = z.prec();
        let raw: Vec<MpComplex> = (0..self.geometry.n).map(|j| theta_mp(&self.geometry, j, z, ln_tol)).collect();
        self.coefficients
            .iter()
            .map(|row| {
                let mut acc = MpComplex::zero(prec);
                for (c, f) in row.iter().zip(&raw) {
                    if !c.is_zero() {
                        acc.fma_assign(c, f);
                    }
                }
                acc
            })
            .collect()
    }

    /// `Σ e_i(z) conj(e_i(w)) e^{-πN((Im z)² + (Im w)²)/Im τ}`.
    fn kernel_mp(&self, z: &MpComplex, w: &MpComplex) -> MpComplex {
        let prec = z.prec();
        let ez = self.onb_values(z);
        let ew = if z == w { ez.clone() } else { self.onb_values(w) };
        let mut acc = MpComplex::zero(prec);
        for (a, b) in ez.iter().zip(&ew) {
            acc.fma_assign(a, &b.conj());
        }
        let c = self.geometry.c(prec);
        let e = -(Float::with_val(prec, z.im.square_ref()) + Float::with_val(prec, w.im.square_ref())) * c / 2u32;
        acc.scale(&e.exp())
    }

    /// Largest entry of `C G C^* - I`.
    pub fn orthonormality_defect(&self) -> f64 {
        let n = self.gram.len();
        let prec = self.ctx.mantissa_bits;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let mut acc = MpComplex::zero(prec);
                for a in 0..n {
                    for b in 0..n {
                        let t = self.coefficients[i][a].mul(&self.gram[a][b]).mul(&self.coefficients[j][b].conj());
                        acc.add_assign(&t);
                    }
                }
                if i == j {
                    acc = acc.sub(&MpComplex::one(prec));
                }
                worst = worst.max(acc.abs().to_f64());
            }
        }
        worst
    }
}

pub fn torus_kernel(b: &ThetaBasis, z: Complex64, w: Complex64) -> KernelValue {
    let prec = b.ctx.mantissa_bits;
    let v = b.kernel_mp(&MpComplex::from_c64(prec, z), &MpComplex::from_c64(prec, w));
    KernelValue::new(v.abs_log(), wrap_phase(&v.arg()))
}

/// `∫_{fundamental domain} K(z, z) dA`: M-point trapezoid in x, Gauss-Legendre in y.
pub fn torus_trace(b: &ThetaBasis) -> Result<f64> {
    let g = &b.geometry;
    let ctx = &b.ctx;
    let prec = ctx.mantissa_bits;
    let ln_tol = ctx.log_tol();
    let l = -ln_tol + 10.0;
    let m = (2.0 * (2.0 * g.n as f64 * l / std::f64::consts::PI).sqrt()).ceil() as usize + 8;
    let two_pi = Float::with_val(prec, rug::float::Constant::Pi) * 2u32;
    let one = Float::with_val(prec, 1u32);
    let roots: Vec<MpComplex> = (0..m)
        .map(|k| MpComplex::from_polar(&one, &(Float::with_val(prec, &two_pi * k as u32) / m as u32)))
        .collect();
    let c = g.c(prec);
    let yc = y_context(g, ctx);
    let v = integrate_1d(
        |y| {
            let yf = y.to_f64();
            let classes: Vec<Vec<(usize, MpComplex)>> = (0..g.n)
                .map(|j| {
                    frequency_range(g, j, yf, ln_tol)
                        .into_iter()
                        .map(|f| (f.rem_euclid(m as i64) as usize, theta_coefficient(g, f, y, prec)))
                        .collect()
                })
                .collect();
            let mut acc = Float::new(prec);
            for xi in 0..m {
                let raw: Vec<MpComplex> = classes
                    .iter()
                    .map(|terms| {
                        let mut f = MpComplex::zero(prec);
                        for (r, cn) in terms {
                            f.fma_assign(cn, &roots[(r * xi) % m]);
                        }
                        f
                    })
                    .collect();
                for row in &b.coefficients {
                    let mut e = MpComplex::zero(prec);
                    for (cij, f) in row.iter().zip(&raw) {
                        if !cij.is_zero() {
                            e.fma_assign(cij, f);
                        }
                    }
                    acc += e.norm_sqr();
                }
            }
            let weight = -(Float::with_val(prec, y.square_ref()) * &c);
            LogReal::from_float(&(acc / m as u32)).scale_exp(&weight)
        },
        &yc.zero(),
        &yc.float(g.tau.im),
        &yc,
    )?;
    Ok(v.to_f64())
}

/// Lattice sum of flat kernels with automorphy factors.
#[derive(Clone, Debug, Serialize)]
pub struct PeriodizedValue {
    pub value: KernelValue,
    pub shells: u32,
    /// Magnitude of the outermost shell's contribution relative to the total.
    pub last_shell: LogReal,
}

/// `Σ_λ J(λ, z)^{-1} K_flat(z + λ, w)` with `K_flat(z, w) = (c/2π) e^{-(c/4)(z - w̄)²}`,
/// `c = 2πN/Im τ` and `J(m + nτ, z) = e^{-πiNn²τ - 2πiNnz}`, over
/// `max(|m|, |n|) ≤ shells`.
pub fn periodization_oracle(
    g: &TorusGeometry,
    z: Complex64,
    w: Complex64,
    shells: u32,
    prec: u32,
) -> Result<PeriodizedValue> {
    if shells == 0 {
        return Err(Error::InvalidParameter("need at least one shell".into()));
    }
    let pi = Float::with_val(prec, rug::float::Constant::Pi);
    let c = g.c(prec);
    let nf = g.n as f64;
    let zm = MpComplex::from_c64(prec, z);
    let wbar = MpComplex::from_c64(prec, w.conj());
    let tau = MpComplex::from_c64(prec, g.tau);
    let quarter_c = Float::with_val(prec, &c / 4u32);
    let prefactor = Float::with_val(prec, &c / &pi) / 2u32;
    let mut total = MpComplex::zero(prec);
    let mut last = MpComplex::zero(prec);
    let s = shells as i64;
    for a in -s..=s {
        for bn in -s..=s {
            let lambda = tau.scale(&Float::with_val(prec, bn)).add(&MpComplex::from_f64(prec, a as f64, 0.0));
            let diff = zm.add(&lambda).sub(&wbar);
            let flat_exp = diff.mul(&diff).scale(&Float::with_val(prec, -&quarter_c));
            // -ln J = πiNn²τ + 2πiNnz
            let jn = tau
                .scale(&Float::with_val(prec, nf * (bn * bn) as f64))
                .add(&zm.scale(&Float::with_val(prec, 2.0 * nf * bn as f64)))
                .scale(&pi);
            let j_inv = MpComplex::new(-jn.im, jn.re);
            let term = flat_exp.add(&j_inv).exp().scale(&prefactor);
            if a.abs() == s || bn.abs() == s {
                last.add_assign(&term);
            }
            total.add_assign(&term);
        }
    }
    let e = -(Float::with_val(prec, zm.im.square_ref()) + Float::with_val(prec, wbar.im.square_ref())) * &c / 2u32;
    let frame = e.exp();
    let total = total.scale(&frame);
    let last = last.scale(&frame);
    Ok(PeriodizedValue {
        value: KernelValue::new(total.abs_log(), wrap_phase(&total.arg())),
        shells,
        last_shell: last.abs_log().div(&total.abs_log()),
    })
}

/// Flat-model prediction `(Na/π) e^{-(Na/2)|z - w|²}`.
pub fn flat_prediction(g: &TorusGeometry, z: Complex64, w: Complex64, prec: u32) -> LogReal {
    let lead = Float::with_val(prec, g.n) / g.tau.im;
    let na = Float::with_val(prec, rug::float::Constant::Pi) * &lead;
    let d2 = MpComplex::from_c64(prec, z).sub(&MpComplex::from_c64(prec, w)).norm_sqr();
    LogReal::from_float(&lead).scale_exp(&(-(d2 * na / 2u32)))
}

/// Points near the diagonal: `count` pairs `(z, z + δ)` with `z` uniform in
/// the fundamental rectangle and `|δ| ≤ max_sep` in random directions.
pub fn near_diagonal_grid<R: Rng + ?Sized>(
    tau: Complex64,
    count: usize,
    max_sep: f64,
    rng: &mut R,
) -> Vec<(Complex64, Complex64)> {
    (0..count)
        .map(|i| {
            let z = Complex64::new(rng.gen::<f64>(), rng.gen::<f64>() * tau.im);
            let r = max_sep * (i + 1) as f64 / count as f64;
            let theta = rng.gen::<f64>() * std::f64::consts::TAU;
            (z, z + Complex64::from_polar(r, theta))
        })
        .collect()
}

/// Per N, `sup_grid | ‖K_N(z, w)‖ - (Na/π) e^{-(Na/2)|z-w|²} |`, fitted
/// against N.
pub fn torus_decay_experiment(
    tau: Complex64,
    ns: &[u32],
    grid: &[(Complex64, Complex64)],
    ctx: &PrecisionContext,
) -> Result<(ExperimentReport, DecayFit)> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty point grid".into()));
    }
    let probe = TorusGeometry::new(tau, 1)?;
    let ell = probe.shortest_vector();
    for (z, w) in grid {
        if (z - w).norm() > 0.4 * ell {
            return Err(Error::InvalidParameter(format!(
                "pair separation {} exceeds 0.4 ℓ_min = {}",
                (z - w).norm(),
                0.4 * ell
            )));
        }
    }
    let mut report = ExperimentReport::new("torus_decay", &["N"]);
    let mut points = Vec::new();
    for &n in ns {
        let g = TorusGeometry::new(tau, n)?;
        let work = ctx.resolving(g.predicted_rate() * n as f64 + 20.0);
        let prec = work.mantissa_bits;
        let basis = build_basis(&g, &work)?;
        let mut sup = LogReal::zero(prec);
        let mut sup_kernel = LogReal::zero(prec);
        let mut sup_pred = LogReal::zero(prec);
        for (z, w) in grid {
            let k = torus_kernel(&basis, *z, *w).log_magnitude;
            let pred = flat_prediction(&g, *z, *w, prec);
            let err = k.sub(&pred).abs();
            if err.cmp_abs(&sup).is_gt() {
                sup = err;
                sup_kernel = k;
                sup_pred = pred;
            }
        }
        report.push(ReportRow::new(vec![n as f64], &sup_kernel, &sup_pred, &sup, "flat model (Na/π)e^{-(Na/2)|z-w|²}"));
        points.push((n as f64, sup));
    }
    let fit = fit_log_linear(&points)?;
    report.fit = Some(fit.clone());
    report.notes.push(format!("predicted rate (a/2)ℓ_min² = {}", probe.predicted_rate()));
    Ok((report, fit))
}

/// Largest relative difference of `K(z, z)` between τ and τ + 1 at
/// corresponding points. For odd N the τ + 1 sections are the τ sections
/// translated by 1/2, so `z` corresponds to `z + 1/2`.
pub fn modular_diagonal_check(tau: Complex64, n: u32, points: &[Complex64], ctx: &PrecisionContext) -> Result<f64> {
    let a = build_basis(&TorusGeometry::new(tau, n)?, ctx)?;
    let b = build_basis(&TorusGeometry::new(tau + 1.0, n)?, ctx)?;
    let shift = if n % 2 == 1 { 0.5 } else { 0.0 };
    let mut worst = 0.0f64;
    for &z in points {
        let za = z + shift;
        let ka = torus_kernel(&a, za, za);
        let kb = torus_kernel(&b, z, z);
        worst = worst.max(ka.magnitude_rel_diff(&kb).to_f64());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn ctx() -> PrecisionContext {
        PrecisionContext::default()
    }

    const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

    #[test]
    fn jacobi_theta_value() {
        let g = TorusGeometry::new(I, 1).unwrap();
        let v = theta_raw(&g, 0, Complex64::new(0.0, 0.0), &ctx()).unwrap();
        assert!((v.re.to_f64() - 1.086_434_811_213_308).abs() < 1e-14);
        assert!(v.im.to_f64().abs() < 1e-40);
        assert!(theta_raw(&g, 1, Complex64::new(0.0, 0.0), &ctx()).is_err());
    }

    #[test]
    fn quasi_periodicity() {
        let tau = Complex64::new(0.3, 1.2);
        let g = TorusGeometry::new(tau, 5).unwrap();
        let c = ctx();
        let z = Complex64::new(0.375, 0.4375);
        for j in 0..5 {
            let f = theta_raw(&g, j, z, &c).unwrap();
            let f1 = theta_raw(&g, j, z + 1.0, &c).unwrap();
            assert!(f1.sub(&f).abs().to_f64() < 1e-30 * f.abs().to_f64());
            let ft = theta_raw(&g, j, z + tau, &c).unwrap();
            let pi = std::f64::consts::PI;
            let factor = (-Complex64::i() * pi * 5.0 * tau - Complex64::i() * 2.0 * pi * 5.0 * z).exp();
            let expect = f.mul(&MpComplex::from_c64(256, factor));
            assert!(ft.sub(&expect).abs().to_f64() < 1e-13 * expect.abs().to_f64());
        }
    }

    #[test]
    fn gram_diagonal_closed_form() {
        let g = TorusGeometry::new(I, 7).unwrap();
        let b = build_basis(&g, &ctx()).unwrap();
        let expect = (1.0f64 / 14.0).sqrt();
        for j in 0..7 {
            assert!((b.gram[j][j].re.to_f64() - expect).abs() < 1e-15);
        }
        assert!(b.orthonormality_defect() < 1e-39);
    }

    #[test]
    fn spatial_gram_is_diagonal() {
        let g = TorusGeometry::new(Complex64::new(0.2, 0.9), 4).unwrap();
        let c = PrecisionContext::default().with_tol(1e-30);
        let b = build_basis_with(&g, GramMethod::Spatial { x_points: 48 }, &c).unwrap();
        let d = (0.9f64 / 8.0).sqrt();
        for i in 0..4 {
            for j in 0..4 {
                let v = b.gram[i][j].abs().to_f64();
                if i == j {
                    assert!((v - d).abs() < 1e-25);
                } else {
                    assert!(v < 1e-25, "{i},{j}: {v}");
                }
            }
        }
        assert!(b.orthonormality_defect() < 1e-28);
    }

    #[test]
    fn trace_is_n() {
        for n in [1u32, 6] {
            let g = TorusGeometry::new(Complex64::new(0.1, 1.3), n).unwrap();
            let b = build_basis(&g, &ctx()).unwrap();
            let t = torus_trace(&b).unwrap();
            assert!((t - n as f64).abs() < 1e-12 * n as f64, "{t}");
        }
    }

    #[test]
    fn diagonal_density_near_flat_and_invariant() {
        // K(z, z) ≈ N/Im τ up to the first lattice image, and is invariant
        // under translation by Λ/N.
        let g = TorusGeometry::new(I, 6).unwrap();
        let b = build_basis(&g, &ctx()).unwrap();
        for z in [Complex64::new(0.125, 0.25), Complex64::new(0.75, 0.875)] {
            let k = torus_kernel(&b, z, z);
            assert!((k.magnitude_f64() - 6.0).abs() < 4.4 * 6.0 * (-3.0 * std::f64::consts::PI).exp());
            for shift in [Complex64::new(1.0 / 6.0, 0.0), Complex64::new(0.0, 1.0 / 6.0)] {
                let ks = torus_kernel(&b, z + shift, z + shift);
                assert!(k.magnitude_rel_diff(&ks).to_f64() < 1e-15);
            }
        }
    }

    #[test]
    fn matches_periodization() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let g = TorusGeometry::new(I, 8).unwrap();
        let b = build_basis(&g, &ctx()).unwrap();
        for _ in 0..5 {
            let z = Complex64::new(rng.gen(), rng.gen());
            let w = Complex64::new(rng.gen(), rng.gen());
            let k = torus_kernel(&b, z, w);
            let p = periodization_oracle(&g, z, w, 6, 256).unwrap();
            let rel = k.magnitude_rel_diff(&p.value).to_f64();
            assert!(rel < 1e-20, "{} vs {} ({rel})", k.magnitude_f64(), p.value.magnitude_f64());
            let dphase = (k.phase - p.value.phase).rem_euclid(std::f64::consts::TAU);
            assert!(dphase.min(std::f64::consts::TAU - dphase) < 1e-12);
        }
    }

    #[test]
    fn modular_shift() {
        let pts = [Complex64::new(0.25, 0.375), Complex64::new(0.625, 0.125)];
        for n in [4u32, 5] {
            let d = modular_diagonal_check(Complex64::new(0.125, 1.125), n, &pts, &ctx()).unwrap();
            assert!(d < 1e-30, "N={n}: {d}");
        }
    }

    #[test]
    fn shortest_vector_and_rate() {
        let g = TorusGeometry::new(I, 1).unwrap();
        assert!((g.shortest_vector() - 1.0).abs() < 1e-15);
        assert!((g.predicted_rate() - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        let h = TorusGeometry::new(Complex64::new(0.5, 0.3), 1).unwrap();
        assert!((h.shortest_vector() - (0.25f64 + 0.09).sqrt()).abs() < 1e-15);
    }
}
