//! Exact Bergman kernels of the three model spaces, as closed forms and as
//! sums over the orthogonal monomial basis.

use rug::Float;
use serde::Serialize;

use crate::ancillary::a_of_n;
use crate::error::{Error, Result};
use crate::geometry::{
    f_eval_mp, im_polarized_raw, norm_sqr_mp, p_poly_mp, psi_exponent_raw,
    psi_value_mp, ChartPoint, KernelValue, ModelSpace, Regime,
};
use crate::numerics::{
    fit_log_linear, integrate_1d, ln_gamma, panels_for_rate, wrap_phase, LogReal, MpComplex,
    PrecisionContext,
};
use crate::report::{ExperimentReport, ReportRow};

const MAX_CUTOFF: u32 = 200_000;

/// Holomorphic sections of `L^N` on a model space, represented by the
/// monomials `z^ν` with their exact norms under the weight
/// `e^{-N f_κ(|z|²)} ρ_κ` over the whole model.
#[derive(Clone, Debug, Serialize)]
pub struct BergmanModel {
    pub space: ModelSpace,
    pub n: u32,
    /// Largest total degree in the basis. Equals N/κ on the spherical model.
    pub basis_cutoff: u32,
    pub target_rel_tol: f64,
}

/// `N/κ` when it is an integer.
fn spherical_level(kappa: f64, n: u32) -> Result<u32> {
    let l = n as f64 / kappa;
    if (l - l.round()).abs() > 1e-9 * l.max(1.0) {
        return Err(Error::Unsupported(format!(
            "spherical model needs N/κ integral, got {l}"
        )));
    }
    Ok(l.round() as u32)
}

impl BergmanModel {
    /// Basis with the default cutoff: `N/κ` for the spherical model,
    /// otherwise the smallest degree whose tail bound at `|z| = |w| = r` is
    /// below `target_rel_tol` relative to the diagonal.
    pub fn new(space: &ModelSpace, n: u32, ctx: &PrecisionContext) -> Result<Self> {
        let mut model = BergmanModel {
            space: space.clone(),
            n,
            basis_cutoff: 0,
            target_rel_tol: ctx.target_rel_tol,
        };
        model.validate()?;
        model.basis_cutoff = match space.regime() {
            Regime::Spherical => spherical_level(space.kappa(), n)?,
            _ => model.default_cutoff(space.chart_radius * space.chart_radius)?,
        };
        Ok(model)
    }

    pub fn with_cutoff(space: &ModelSpace, n: u32, cutoff: u32, ctx: &PrecisionContext) -> Result<Self> {
        let model = BergmanModel {
            space: space.clone(),
            n,
            basis_cutoff: cutoff,
            target_rel_tol: ctx.target_rel_tol,
        };
        model.validate()?;
        if space.regime() == Regime::Spherical {
            let l = spherical_level(space.kappa(), n)?;
            if cutoff != l {
                return Err(Error::InvalidParameter(format!(
                    "spherical basis cutoff must be N/κ = {l}, got {cutoff}"
                )));
            }
        }
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("N must be >= 1".into()));
        }
        let kappa = self.space.kappa();
        let d = self.space.dim as f64;
        if kappa < 0.0 && self.n as f64 <= d * -kappa {
            return Err(Error::Domain(format!(
                "weight is not integrable on the ball: need N > d|κ| = {}",
                d * -kappa
            )));
        }
        Ok(())
    }

    /// Number of basis monomials, `binomial(N/κ + d, d)`; `None` when
    /// the model is non-compact.
    pub fn dimension(&self) -> Option<u64> {
        if self.space.regime() != Regime::Spherical {
            return None;
        }
        let l = spherical_level(self.space.kappa(), self.n).ok()? as u64;
        let d = self.space.dim as u64;
        let mut acc = 1u64;
        for j in 1..=d {
            acc = acc * (l + j) / j;
        }
        Some(acc)
    }

    /// `ln h_0` with `h_k = ν! / ‖z^ν‖²` for `|ν| = k`, from Gamma functions.
    fn ln_h0(&self, prec: u32) -> Float {
        let kappa = self.space.kappa();
        let d = self.space.dim as u32;
        let n = Float::with_val(prec, self.n);
        let pi = Float::with_val(prec, rug::float::Constant::Pi);
        let ln_g0 = match self.space.regime() {
            Regime::Spherical => {
                let l = Float::with_val(prec, &n / kappa);
                let lk = Float::with_val(prec, kappa).ln();
                -(lk * d) + ln_gamma(&Float::with_val(prec, &l + 1u32))
                    - ln_gamma(&Float::with_val(prec, &l + (d + 1)))
            }
            Regime::Hyperbolic => {
                let a = -kappa;
                let l = Float::with_val(prec, &n / a);
                let la = Float::with_val(prec, a).ln();
                -(la * d) + ln_gamma(&Float::with_val(prec, &l - d))
                    - ln_gamma(&Float::with_val(prec, &l))
            }
            Regime::Flat => -(n.ln() * d),
        };
        -(pi.ln() * d) - ln_g0
    }

    /// `h_{k+1} / h_k`.
    fn h_ratio(&self, k: u32) -> f64 {
        let kappa = self.space.kappa();
        let n = self.n as f64;
        match self.space.regime() {
            Regime::Spherical => kappa * (n / kappa - k as f64),
            Regime::Hyperbolic => -kappa * (n / -kappa + k as f64),
            Regime::Flat => n,
        }
    }

    fn h_ratio_mp(&self, k: u32, prec: u32) -> Float {
        let kappa = self.space.kappa();
        let n = Float::with_val(prec, self.n);
        match self.space.regime() {
            Regime::Spherical => n - Float::with_val(prec, kappa * k as f64),
            Regime::Hyperbolic => n + Float::with_val(prec, -kappa * k as f64),
            Regime::Flat => n,
        }
    }

    /// `‖z^ν‖²` in A_N over the whole model.
    pub fn monomial_norm_sqr(&self, nu: &[u32], prec: u32) -> Result<LogReal> {
        if nu.len() != self.space.dim {
            return Err(Error::InvalidParameter("multi-index dimension mismatch".into()));
        }
        let k: u32 = nu.iter().sum();
        if k > self.basis_cutoff {
            return Err(Error::InvalidParameter(format!(
                "degree {k} beyond basis cutoff {}",
                self.basis_cutoff
            )));
        }
        let mut ln_h = self.ln_h0(prec);
        for j in 0..k {
            ln_h += self.h_ratio_mp(j, prec).ln();
        }
        let mut ln_fact = Float::new(prec);
        for &v in nu {
            ln_fact += ln_gamma(&Float::with_val(prec, v + 1));
        }
        Ok(LogReal::from_log(ln_fact - ln_h))
    }

    fn default_cutoff(&self, rr: f64) -> Result<u32> {
        let ln_r = rr.ln();
        let ln_tol = self.target_rel_tol.ln();
        let mut ln_b = self.ln_h0(64).to_f64();
        let mut ln_total = ln_b;
        for k in 0..MAX_CUTOFF {
            let ln_next = ln_b + ln_r - ((k + 1) as f64).ln() + self.h_ratio(k).ln();
            let q = (ln_next - ln_b).exp();
            if q < 1.0 {
                let tail = ln_next - (1.0 - q).ln();
                if tail < ln_tol + ln_total - 5.0 {
                    return Ok(k);
                }
            }
            ln_b = ln_next;
            ln_total = log_add(ln_total, ln_b);
        }
        Err(Error::CutoffInsufficient(format!(
            "no cutoff below {MAX_CUTOFF} reaches tolerance {}",
            self.target_rel_tol
        )))
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        hi
    } else {
        hi + (lo - hi).exp().ln_1p()
    }
}

/// Basis-sum kernel value with convergence metadata.
#[derive(Clone, Debug, Serialize)]
pub struct BasisKernelSample {
    pub value: KernelValue,
    /// Highest degree summed.
    pub degrees: u32,
    /// Bound on the omitted tail relative to the computed magnitude.
    pub tail_bound: LogReal,
    pub converged: bool,
    pub bits: u32,
}

struct RawSum {
    value: MpComplex,
    ln_abs_terms: f64,
    degrees: u32,
    ln_tail: f64,
    converged: bool,
}

impl BergmanModel {
    /// `Σ_{|ν| ≤ k} z^ν w̄^ν / ‖z^ν‖²`, accumulated degree by degree with
    /// the per-degree sums `Σ_{|ν|=k} ∏ (z_i w̄_i)^{ν_i} / ν_i!` built by
    /// convolution across coordinates.
    fn raw_sum(&self, z: &[MpComplex], w: &[MpComplex], prec: u32, ln_tol: f64) -> RawSum {
        let d = self.space.dim;
        let t: Vec<MpComplex> = z.iter().zip(w).map(|(a, b)| a.mul(&b.conj()).with_prec(prec)).collect();
        let ln_r = (norm_sqr_mp(z, prec).to_f64() * norm_sqr_mp(w, prec).to_f64()).sqrt().ln();
        let compact = self.space.regime() == Regime::Spherical;

        let mut q: Vec<Vec<MpComplex>> = vec![Vec::new(); d];
        let mut layers: Vec<Vec<MpComplex>> = vec![Vec::new(); d];
        let mut h = Float::with_val(prec, self.ln_h0(prec).exp_ref());
        let mut ln_b = h.to_f64().ln();
        let mut ln_terms = f64::NEG_INFINITY;
        let mut sum = MpComplex::zero(prec);
        let mut k = 0u32;
        loop {
            for i in 0..d {
                let next = if k == 0 {
                    MpComplex::one(prec)
                } else {
                    q[i][k as usize - 1].mul(&t[i]).scale(&Float::with_val(prec, k).recip())
                };
                q[i].push(next);
            }
            let mut e = q[0][k as usize].clone();
            layers[0].push(e.clone());
            for i in 1..d {
                let mut acc = MpComplex::zero(prec);
                for j in 0..=k as usize {
                    acc.fma_assign(&layers[i - 1][j], &q[i][k as usize - j]);
                }
                layers[i].push(acc.clone());
                e = acc;
            }
            sum.add_assign(&e.scale(&h));
            ln_terms = log_add(ln_terms, ln_b);
            if ln_r == f64::NEG_INFINITY || (compact && k >= self.basis_cutoff) {
                return RawSum {
                    value: sum,
                    ln_abs_terms: ln_terms,
                    degrees: k,
                    ln_tail: f64::NEG_INFINITY,
                    converged: true,
                };
            }
            let ln_next = ln_b + ln_r - ((k + 1) as f64).ln() + self.h_ratio(k).ln();
            let ratio = (ln_next - ln_b).exp();
            let ln_tail = if ratio < 1.0 {
                ln_next - (1.0 - ratio).ln()
            } else {
                f64::INFINITY
            };
            let ln_sum = sum.abs_log().ln_abs_f64();
            if ln_tail < ln_tol + ln_sum || k >= self.basis_cutoff {
                return RawSum {
                    value: sum,
                    ln_abs_terms: ln_terms,
                    degrees: k,
                    ln_tail: ln_tail - ln_sum,
                    converged: ln_tail < ln_tol + ln_sum,
                };
            }
            h *= self.h_ratio_mp(k, prec);
            ln_b = ln_next;
            k += 1;
        }
    }

    /// Frame-relative kernel `S(z, w) e^{-(N/2)(f(|z|²) + f(|w|²))}` as a
    /// complex number, with guard bits raised until cancellation in the
    /// sum is covered.
    fn basis_value_mp(
        &self,
        z: &[MpComplex],
        w: &[MpComplex],
        ctx: &PrecisionContext,
    ) -> (MpComplex, RawSum, u32) {
        let ln_tol = ctx.log_tol();
        let target_bits = (-ln_tol / std::f64::consts::LN_2).ceil() as u32 + 16;
        let mut prec = ctx.mantissa_bits.max(target_bits) + 32;
        let mut raw;
        loop {
            raw = self.raw_sum(z, w, prec, ln_tol);
            let ln_abs = raw.value.abs_log().ln_abs_f64();
            let loss = ((raw.ln_abs_terms - ln_abs) / std::f64::consts::LN_2).max(0.0);
            let needed = target_bits + loss.ceil() as u32 + 16;
            if prec >= needed || !loss.is_finite() {
                break;
            }
            prec = needed + 32;
        }
        let kappa = self.space.kappa();
        let n = self.n;
        let fz = f_eval_mp(kappa, &norm_sqr_mp(z, prec));
        let fw = f_eval_mp(kappa, &norm_sqr_mp(w, prec));
        let scale = (-(fz + fw) * n / 2u32).exp();
        (raw.value.scale(&scale), raw, prec)
    }

    /// `Σ_ν e_ν(z) conj(e_ν(w))` in the frame `e^{-(N/2) f}`.
    pub fn basis_kernel(&self, z: &ChartPoint, w: &ChartPoint, ctx: &PrecisionContext) -> Result<BasisKernelSample> {
        self.space.check_domain(z)?;
        self.space.check_domain(w)?;
        let prec = ctx.mantissa_bits;
        let (v, raw, bits) = self.basis_value_mp(&z.to_mp(prec), &w.to_mp(prec), ctx);
        Ok(BasisKernelSample {
            value: kernel_value(&v),
            degrees: raw.degrees,
            tail_bound: LogReal::from_log(Float::with_val(64, raw.ln_tail)),
            converged: raw.converged,
            bits,
        })
    }
}

fn kernel_value(v: &MpComplex) -> KernelValue {
    KernelValue::new(v.abs_log(), wrap_phase(&v.arg()))
}

/// `P_κ(N) Ψ^N(z, w)`.
pub fn closed_form_kernel(m: &ModelSpace, n: u32, z: &ChartPoint, w: &ChartPoint, prec: u32) -> Result<KernelValue> {
    let psi = psi_value_mp(m, n, z, w, prec)?;
    let p = p_poly_mp(m.kappa(), m.dim, &Float::with_val(prec, n));
    if p <= 0 {
        return Err(Error::Domain(format!("P_κ(N) = {} is not positive", p.to_f64())));
    }
    Ok(KernelValue::new(psi.log_magnitude.mul(&LogReal::from_float(&p)), psi.phase))
}

/// `Ψ^N(z, w)` in the frame `e^{-(N/2) f}` as a complex number.
fn psi_complex(kappa: f64, n: u32, z: &[MpComplex], w: &[MpComplex], prec: u32) -> MpComplex {
    let d = psi_exponent_raw(kappa, z, w, prec);
    let mag = (d * n / 2u32).exp();
    let phase = im_polarized_raw(kappa, z, w, prec) * n;
    MpComplex::from_polar(&mag, &phase)
}

/// Trace of the Bergman projector against the model volume.
#[derive(Clone, Debug, Serialize)]
pub struct TraceIdentity {
    /// `∫ K(z, z) ρ_κ dLebesgue`, over the whole model when compact and over
    /// the chart ball otherwise.
    pub trace: f64,
    /// `binomial(N/κ + d, d)` on the spherical model.
    pub dimension: Option<u64>,
    /// Volume of the integration domain.
    pub volume: f64,
    /// `P_κ(N) · volume`.
    pub p_times_volume: f64,
    pub compact: bool,
    pub warning: Option<String>,
}

pub fn trace_identity(model: &BergmanModel, ctx: &PrecisionContext) -> Result<TraceIdentity> {
    let m = &model.space;
    let kappa = m.kappa();
    let d = m.dim;
    let prec = ctx.mantissa_bits;
    let pi = Float::with_val(prec, rug::float::Constant::Pi);
    let ln_const = Float::with_val(prec, pi.ln_ref()) * d as u32 - ln_gamma(&Float::with_val(prec, d));
    let radial_point = |s: &Float| -> Vec<MpComplex> {
        let mut z = vec![MpComplex::zero(prec); d];
        z[0] = MpComplex::from_real(Float::with_val(prec, s.sqrt_ref()));
        z
    };
    let diag = |s: &Float| -> LogReal {
        let z = radial_point(s);
        let (v, _, _) = model.basis_value_mp(&z, &z, ctx);
        LogReal::from_float(&v.re)
    };
    let p = p_poly_mp(kappa, d, &Float::with_val(prec, model.n));
    if m.regime() == Regime::Spherical {
        // u = κs/(1+κs); the integrand is a polynomial of degree N/κ + d - 1 in u.
        let l = spherical_level(kappa, model.n)? as usize;
        let order = ctx.quad_order.max((l + d) / 2 + 2);
        let c = PrecisionContext { quad_order: order, ..ctx.clone() };
        let trace = integrate_1d(
            |u| {
                let one_minus = Float::with_val(prec, 1u32 - u);
                let s = Float::with_val(prec, u / &one_minus) / kappa;
                let jac = Float::with_val(prec, one_minus.square_ref()).recip() / kappa;
                let rho = Float::with_val(prec, rug::ops::Pow::pow(&one_minus, d as u32 + 1));
                let sd = Float::with_val(prec, rug::ops::Pow::pow(&s, d as u32 - 1));
                diag(&s).mul(&LogReal::from_float(&(jac * rho * sd)))
            },
            &c.zero(),
            &c.float(1.0),
            &c,
        )?
        .scale_exp(&ln_const);
        let volume = Float::with_val(prec, rug::ops::Pow::pow(&pi, d as u32))
            / Float::with_val(prec, Float::factorial(d as u32))
            / Float::with_val(prec, kappa.powi(d as i32));
        return Ok(TraceIdentity {
            trace: trace.to_f64(),
            dimension: model.dimension(),
            volume: volume.to_f64(),
            p_times_volume: Float::with_val(prec, &p * &volume).to_f64(),
            compact: true,
            warning: None,
        });
    }
    let upper = m.chart_radius * m.chart_radius;
    let n = model.n as f64;
    let rate = n + (d as f64 + 1.0) * kappa.abs() / (1.0 - kappa.abs() * upper).max(1e-3) + d as f64;
    let c = ctx.with_panels(panels_for_rate(upper, rate, ctx));
    let weight = |s: &Float| -> Float {
        let mut l = Float::with_val(prec, s.ln_ref()) * (d as u32 - 1);
        if kappa != 0.0 {
            l -= crate::geometry::ln_one_plus_kappa_t(kappa, s) * (d as u32 + 1);
        }
        l.exp()
    };
    let trace = integrate_1d(
        |s| diag(s).mul(&LogReal::from_float(&weight(s))),
        &c.zero(),
        &c.float(upper),
        &c,
    )?
    .scale_exp(&ln_const);
    let volume = integrate_1d(|s| LogReal::from_float(&weight(s)), &c.zero(), &c.float(upper), &c)?
        .scale_exp(&ln_const);
    Ok(TraceIdentity {
        trace: trace.to_f64(),
        dimension: None,
        volume: volume.to_f64(),
        p_times_volume: volume.mul(&LogReal::from_float(&p)).to_f64(),
        compact: false,
        warning: Some("non-compact model: trace and volume over the chart ball only".into()),
    })
}

/// `sup_grid ‖S_N(z, w) - a(N)^{-1} Ψ^N(z, w)‖_h` per N, with the
/// reference column `|a(N)^{-1} - P_κ(N)| · sup_grid e^{(N/2) D}`.
pub fn model_error_sweep(
    m: &ModelSpace,
    ns: &[u32],
    grid: &[(ChartPoint, ChartPoint)],
    ctx: &PrecisionContext,
) -> Result<ExperimentReport> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty point grid".into()));
    }
    for (z, w) in grid {
        m.check_domain(z)?;
        m.check_domain(w)?;
    }
    let kappa = m.kappa();
    let r2 = Float::with_val(64, m.chart_radius * m.chart_radius);
    let mut report = ExperimentReport::new("model_error_sweep", &["N"]);
    let mut points = Vec::new();
    for &n in ns {
        let work = ctx.resolving(n as f64 * f_eval_mp(kappa, &r2).to_f64() + 20.0);
        let prec = work.mantissa_bits;
        let model = BergmanModel::new(m, n, &work)?;
        let a_inv = a_of_n(m, n, &work)?.recip();
        let p = LogReal::from_float(&p_poly_mp(kappa, m.dim, &Float::with_val(prec, n)));
        let gap = a_inv.sub(&p).abs();
        let a_inv_f = a_inv.to_float(prec);
        let mut sup = LogReal::zero(prec);
        let mut sup_psi = LogReal::zero(prec);
        for (z, w) in grid {
            let (zm, wm) = (z.to_mp(prec), w.to_mp(prec));
            let (basis, raw, _) = model.basis_value_mp(&zm, &wm, &work);
            if !raw.converged {
                return Err(Error::CutoffInsufficient(format!(
                    "basis sum at N = {n} stopped at degree {} with relative tail e^{:.1}",
                    raw.degrees, raw.ln_tail
                )));
            }
            let psi = psi_complex(kappa, n, &zm, &wm, basis.prec());
            let approx = psi.scale(&a_inv_f);
            let err = basis.sub(&approx).abs_log();
            if err.cmp_abs(&sup).is_gt() {
                sup = err;
            }
            let pm = psi.abs_log();
            if pm.cmp_abs(&sup_psi).is_gt() {
                sup_psi = pm;
            }
        }
        let reference = gap.mul(&sup_psi);
        report.push(ReportRow::new(vec![n as f64], &sup, &reference, &sup, "a(N) gap times sup Ψ"));
        points.push((n as f64, sup));
    }
    if points.len() >= 3 {
        report.fit = fit_log_linear(&points).ok();
    }
    Ok(report)
}
