use rug::Float;
use serde::Serialize;

use super::{LogReal, PrecisionContext};
use crate::error::{Error, Result};

/// Gauss-Legendre rule on [-1, 1] at a fixed working precision.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    order: usize,
    nodes: Vec<Float>,
    weights: Vec<Float>,
}

const MAX_NEWTON_STEPS: usize = 64;

/// Returns (P_n(x), P_{n-1}(x)).
fn legendre_pair(n: usize, x: &Float) -> (Float, Float) {
    let prec = x.prec();
    let mut p_prev = Float::with_val(prec, 1);
    let mut p = x.clone();
    for k in 1..n {
        // (k+1) P_{k+1} = (2k+1) x P_k - k P_{k-1}
        let mut next = Float::with_val(prec, x * &p);
        next *= (2 * k + 1) as u32;
        next -= Float::with_val(prec, &p_prev * k as u32);
        next /= (k + 1) as u32;
        p_prev = std::mem::replace(&mut p, next);
    }
    (p, p_prev)
}

/// P_n'(x) = n (x P_n - P_{n-1}) / (x^2 - 1).
fn legendre_derivative(n: usize, x: &Float, p: &Float, pm: &Float) -> Float {
    let prec = x.prec();
    let x2m1 = Float::with_val(prec, x.square_ref()) - 1u32;
    let mut d = Float::with_val(prec, x * p) - pm;
    d *= n as u32;
    d / x2m1
}

fn legendre_pair_f64(n: usize, x: f64) -> (f64, f64) {
    let (mut p_prev, mut p) = (1.0, x);
    for k in 1..n {
        let next = ((2 * k + 1) as f64 * x * p - k as f64 * p_prev) / (k + 1) as f64;
        p_prev = p;
        p = next;
    }
    (p, p_prev)
}

impl GaussLegendre {
    pub fn new(order: usize, bits: u32) -> Result<Self> {
        if order < 2 {
            return Err(Error::InvalidParameter(format!(
                "Gauss-Legendre order must be >= 2, got {order}"
            )));
        }
        let prec = bits + 16;
        let n = order;
        let half = n.div_ceil(2);
        let mut pos_nodes = Vec::with_capacity(half);
        let mut pos_weights = Vec::with_capacity(half);
        let tol = Float::with_val(prec, Float::i_exp(1, -(bits as i32) + 2));
        for i in 0..half {
            // Descending roots: x_i ≈ cos(π (i + 3/4) / (n + 1/2)).
            let mut x0 = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..20 {
                let (p, pm) = legendre_pair_f64(n, x0);
                let dp = n as f64 * (x0 * p - pm) / (x0 * x0 - 1.0);
                let dx = p / dp;
                x0 -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let mut x = Float::with_val(prec, x0);
            if n % 2 == 1 && i == half - 1 {
                x = Float::new(prec);
            }
            let mut converged = false;
            for _ in 0..MAX_NEWTON_STEPS {
                let (p, pm) = legendre_pair(n, &x);
                let dp = legendre_derivative(n, &x, &p, &pm);
                let dx = Float::with_val(prec, &p / &dp);
                x -= &dx;
                if dx.abs() <= tol {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::NewtonNonConvergence { order: n, index: i });
            }
            let (p, pm) = legendre_pair(n, &x);
            let dp = legendre_derivative(n, &x, &p, &pm);
            // w = 2 / ((1 - x^2) P_n'(x)^2)
            let one_m_x2 = Float::with_val(prec, 1u32) - Float::with_val(prec, x.square_ref());
            let w = Float::with_val(prec, 2u32) / (one_m_x2 * Float::with_val(prec, dp.square_ref()));
            pos_nodes.push(Float::with_val(bits, &x));
            pos_weights.push(Float::with_val(bits, &w));
        }
        // Assemble ascending nodes on [-1, 1].
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for i in 0..half {
            if n % 2 == 1 && i == half - 1 {
                continue;
            }
            nodes.push(-pos_nodes[i].clone());
            weights.push(pos_weights[i].clone());
        }
        for i in (0..half).rev() {
            nodes.push(pos_nodes[i].clone());
            weights.push(pos_weights[i].clone());
        }
        Ok(GaussLegendre {
            order: n,
            nodes,
            weights,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn prec(&self) -> u32 {
        self.nodes[0].prec()
    }

    pub fn reference_nodes(&self) -> &[Float] {
        &self.nodes
    }

    pub fn reference_weights(&self) -> &[Float] {
        &self.weights
    }

    /// Nodes and weights mapped affinely to [a, b].
    pub fn on_interval(&self, a: &Float, b: &Float) -> Vec<(Float, Float)> {
        let prec = self.prec();
        let half = Float::with_val(prec, b - a) / 2u32;
        let mid = Float::with_val(prec, a + b) / 2u32;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| {
                let node = Float::with_val(prec, x * &half) + &mid;
                let weight = Float::with_val(prec, w * &half);
                (node, weight)
            })
            .collect()
    }

    /// Composite rule: `panels` equal panels on [a, b].
    pub fn composite(&self, a: &Float, b: &Float, panels: usize) -> Vec<(Float, Float)> {
        let prec = self.prec();
        let width = Float::with_val(prec, b - a) / panels as u32;
        let mut out = Vec::with_capacity(panels * self.order);
        for k in 0..panels {
            let lo = Float::with_val(prec, &width * k as u32) + a;
            let hi = if k + 1 == panels {
                Float::with_val(prec, b)
            } else {
                Float::with_val(prec, &width * (k + 1) as u32) + a
            };
            out.extend(self.on_interval(&lo, &hi));
        }
        out
    }
}

/// `order`-point Gauss-Legendre nodes and weights on [a, b].
pub fn gauss_legendre(order: usize, a: f64, b: f64, bits: u32) -> Result<Vec<(Float, Float)>> {
    if !(a < b) {
        return Err(Error::InvalidParameter(format!(
            "gauss_legendre needs a < b, got [{a}, {b}]"
        )));
    }
    let rule = GaussLegendre::new(order, bits)?;
    Ok(rule.on_interval(&Float::with_val(bits, a), &Float::with_val(bits, b)))
}

/// Result of a self-checked composite quadrature.
#[derive(Clone, Debug, Serialize)]
pub struct QuadratureEstimate {
    /// Value from the refined (doubled-panel) rule.
    pub value: LogReal,
    /// Value from the base rule.
    pub coarse: LogReal,
    /// |refined - coarse| relative to the integral of |f|.
    pub discrepancy: LogReal,
}

/// Sum of `w_i f(x_i)` where `f` is given in log form, plus the L1 mass.
fn weighted_sum<F>(f: &F, nodes: &[(Float, Float)], prec: u32) -> (LogReal, LogReal)
where
    F: Fn(&Float) -> LogReal,
{
    let values: Vec<LogReal> = nodes.iter().map(|(x, _)| f(x)).collect();
    let max = values
        .iter()
        .filter(|v| !v.is_zero())
        .map(|v| v.log_abs().clone())
        .reduce(|a, b| if a >= b { a } else { b });
    let Some(max) = max else {
        return (LogReal::zero(prec), LogReal::zero(prec));
    };
    let work = prec + 32;
    let mut acc = Float::new(work);
    let mut mass = Float::new(work);
    for (v, (_, w)) in values.iter().zip(nodes) {
        if v.is_zero() {
            continue;
        }
        let term = Float::with_val(work, v.log_abs() - &max).exp() * w;
        mass += Float::with_val(work, term.abs_ref());
        if v.sign() > 0 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    (
        LogReal::from_float(&acc).scale_exp(&max),
        LogReal::from_float(&mass).scale_exp(&max),
    )
}

/// Composite Gauss-Legendre integral of `f` over [a, b] with a doubling
/// self-check. The refined value is returned; the check fails when the base
/// and refined rules disagree by more than `target_rel_tol` relative to the
/// integral of |f|.
pub fn integrate_1d_checked<F>(
    f: F,
    a: &Float,
    b: &Float,
    ctx: &PrecisionContext,
) -> Result<QuadratureEstimate>
where
    F: Fn(&Float) -> LogReal,
{
    let prec = ctx.mantissa_bits;
    if a == b {
        let z = LogReal::zero(prec);
        return Ok(QuadratureEstimate {
            value: z.clone(),
            coarse: z.clone(),
            discrepancy: z,
        });
    }
    if a > b {
        return Err(Error::InvalidParameter(format!(
            "integration interval reversed: [{}, {}]",
            a.to_f64(),
            b.to_f64()
        )));
    }
    let rule = GaussLegendre::new(ctx.quad_order, prec)?;
    let (coarse, _) = weighted_sum(&f, &rule.composite(a, b, ctx.panels), prec);
    let (fine, mass) = weighted_sum(&f, &rule.composite(a, b, 2 * ctx.panels), prec);
    let discrepancy = if mass.is_zero() {
        LogReal::zero(prec)
    } else {
        fine.sub(&coarse).abs().div(&mass)
    };
    if discrepancy.ln_abs_f64() > ctx.log_tol() {
        return Err(Error::QuadratureNotConverged {
            coarse: coarse.ln_abs_f64(),
            refined: fine.ln_abs_f64(),
            discrepancy: discrepancy.to_f64(),
        });
    }
    Ok(QuadratureEstimate {
        value: fine,
        coarse,
        discrepancy,
    })
}

pub fn integrate_1d<F>(f: F, a: &Float, b: &Float, ctx: &PrecisionContext) -> Result<LogReal>
where
    F: Fn(&Float) -> LogReal,
{
    integrate_1d_checked(f, a, b, ctx).map(|q| q.value)
}

/// Panel count for a composite rule of the context's order on an integrand
/// whose log-derivative is bounded by `rate` over an interval of length
/// `length`. Based on the Chebyshev decay of `exp(-a x)` on [-1, 1]: a
/// degree-`k` fit reaches `ε` once `a ≤ (2k/e)·ε^{1/k}`.
pub fn panels_for_rate(length: f64, rate: f64, ctx: &PrecisionContext) -> usize {
    let k = 2.0 * ctx.quad_order as f64;
    let log_eps = ctx.log_tol() - 10.0;
    let a = 2.0 * k / std::f64::consts::E * (log_eps / k).exp();
    let needed = (length * rate / a).ceil();
    if needed.is_finite() && needed > ctx.panels as f64 {
        (needed as usize).min(1 << 20)
    } else {
        ctx.panels
    }
}

/// Nodes `k/m` and weights `1/m` of the m-point trapezoid rule on the
/// periodic interval [0, 1).
pub fn periodic_trapezoid(m: usize, bits: u32) -> Vec<(Float, Float)> {
    let w = Float::with_val(bits, 1u32) / m as u32;
    (0..m)
        .map(|k| (Float::with_val(bits, k as u32) / m as u32, w.clone()))
        .collect()
}
