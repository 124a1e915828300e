//! Tensor products of kernels: `S^{M₁×M₂}((z₁,z₂),(w₁,w₂)) = S^{M₁}(z₁,w₁) ⊗ S^{M₂}(z₂,w₂)`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{p_poly_coefficients, ChartPoint, KernelValue};
use crate::model_kernels::{trace_identity, BergmanModel};
use crate::numerics::PrecisionContext;
use crate::torus::{torus_kernel, torus_trace, ThetaBasis};

/// Trace of one factor's Bergman projector.
#[derive(Clone, Debug, Serialize)]
pub struct FactorTrace {
    pub trace: f64,
    /// Dimension of the section space, when finite.
    pub dimension: Option<u64>,
    pub compact: bool,
}

/// Leading coefficients `a_k` of the diagonal `Σ_k a_k N^{d-k}`, stored as
/// `π^{-pi_power} · coeffs` with `coeffs[k]` the coefficient of `N^{d-k}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoefficientSequence {
    pub pi_power: u32,
    pub coeffs: Vec<f64>,
}

impl CoefficientSequence {
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// Cauchy product; the sequence of the product of the two polynomials.
    pub fn convolve(&self, other: &CoefficientSequence) -> CoefficientSequence {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        CoefficientSequence {
            pi_power: self.pi_power + other.pi_power,
            coeffs: out,
        }
    }

    pub fn eval(&self, n: f64) -> f64 {
        self.coeffs.iter().fold(0.0, |acc, c| acc * n + c) * std::f64::consts::PI.powi(-(self.pi_power as i32))
    }
}

/// Anything that evaluates a frame-relative Bergman kernel at level N.
pub trait KernelEvaluator: Send + Sync {
    fn n(&self) -> u32;
    /// Complex dimension.
    fn dim(&self) -> usize;
    /// `‖K(z, w)‖_h` and phase; `z`, `w` have `dim()` coordinates.
    fn evaluate(&self, z: &[Complex64], w: &[Complex64]) -> Result<KernelValue>;
    fn is_compact(&self) -> bool;
    fn trace(&self) -> Result<FactorTrace>;
    /// `None` when the diagonal is not a polynomial in N.
    fn coefficients(&self) -> Option<CoefficientSequence>;
}

pub struct ModelFactor {
    pub model: BergmanModel,
    pub ctx: PrecisionContext,
}

impl ModelFactor {
    pub fn new(model: BergmanModel, ctx: &PrecisionContext) -> Self {
        ModelFactor { model, ctx: ctx.clone() }
    }
}

impl KernelEvaluator for ModelFactor {
    fn n(&self) -> u32 {
        self.model.n
    }

    fn dim(&self) -> usize {
        self.model.space.dim
    }

    fn evaluate(&self, z: &[Complex64], w: &[Complex64]) -> Result<KernelValue> {
        let s = self
            .model
            .basis_kernel(&ChartPoint::new(z.to_vec()), &ChartPoint::new(w.to_vec()), &self.ctx)?;
        if !s.converged {
            return Err(Error::CutoffInsufficient(format!(
                "basis sum stopped at degree {} with tail bound {:e}",
                s.degrees,
                s.tail_bound.to_f64()
            )));
        }
        Ok(s.value)
    }

    fn is_compact(&self) -> bool {
        self.model.space.is_compact()
    }

    fn trace(&self) -> Result<FactorTrace> {
        let t = trace_identity(&self.model, &self.ctx)?;
        Ok(FactorTrace {
            trace: t.trace,
            dimension: t.dimension,
            compact: t.compact,
        })
    }

    fn coefficients(&self) -> Option<CoefficientSequence> {
        let d = self.model.space.dim;
        let scale = std::f64::consts::PI.powi(d as i32);
        let mut coeffs: Vec<f64> = p_poly_coefficients(self.model.space.kappa(), d)
            .iter()
            .map(|c| c * scale)
            .collect();
        coeffs.reverse();
        Some(CoefficientSequence {
            pi_power: d as u32,
            coeffs,
        })
    }
}

pub struct TorusFactor {
    pub basis: ThetaBasis,
}

impl KernelEvaluator for TorusFactor {
    fn n(&self) -> u32 {
        self.basis.geometry.n
    }

    fn dim(&self) -> usize {
        1
    }

    fn evaluate(&self, z: &[Complex64], w: &[Complex64]) -> Result<KernelValue> {
        Ok(torus_kernel(&self.basis, z[0], w[0]))
    }

    fn is_compact(&self) -> bool {
        true
    }

    fn trace(&self) -> Result<FactorTrace> {
        Ok(FactorTrace {
            trace: torus_trace(&self.basis)?,
            dimension: Some(self.basis.geometry.n as u64),
            compact: true,
        })
    }

    /// The diagonal is `N / Im τ` only up to lattice corrections.
    fn coefficients(&self) -> Option<CoefficientSequence> {
        None
    }
}

pub struct ProductKernel {
    pub factors: Vec<Box<dyn KernelEvaluator>>,
    pub total_dim: usize,
}

pub fn product_kernel(factors: Vec<Box<dyn KernelEvaluator>>) -> Result<ProductKernel> {
    let Some(first) = factors.first() else {
        return Err(Error::InvalidParameter("product needs at least one factor".into()));
    };
    let n = first.n();
    if factors.iter().any(|f| f.n() != n) {
        return Err(Error::MismatchedN(factors.iter().map(|f| f.n()).collect()));
    }
    let total_dim = factors.iter().map(|f| f.dim()).sum();
    Ok(ProductKernel { factors, total_dim })
}

impl ProductKernel {
    fn split<'a>(&self, z: &'a [Complex64]) -> Result<Vec<&'a [Complex64]>> {
        if z.len() != self.total_dim {
            return Err(Error::InvalidParameter(format!(
                "point has {} coordinates, product has dimension {}",
                z.len(),
                self.total_dim
            )));
        }
        let mut out = Vec::with_capacity(self.factors.len());
        let mut at = 0;
        for f in &self.factors {
            out.push(&z[at..at + f.dim()]);
            at += f.dim();
        }
        Ok(out)
    }

    /// Per-factor values at the split points.
    pub fn factor_values(&self, z: &[Complex64], w: &[Complex64]) -> Result<Vec<KernelValue>> {
        let zs = self.split(z)?;
        let ws = self.split(w)?;
        self.factors
            .iter()
            .zip(zs.iter().zip(&ws))
            .map(|(f, (a, b))| f.evaluate(a, b))
            .collect()
    }
}

impl KernelEvaluator for ProductKernel {
    fn n(&self) -> u32 {
        self.factors[0].n()
    }

    fn dim(&self) -> usize {
        self.total_dim
    }

    fn evaluate(&self, z: &[Complex64], w: &[Complex64]) -> Result<KernelValue> {
        let values = self.factor_values(z, w)?;
        let mut it = values.into_iter();
        let first = it.next().expect("nonempty product");
        Ok(it.fold(first, |acc, v| acc.mul(&v)))
    }

    fn is_compact(&self) -> bool {
        self.factors.iter().all(|f| f.is_compact())
    }

    fn trace(&self) -> Result<FactorTrace> {
        let t = product_trace(self)?;
        Ok(FactorTrace {
            trace: t.trace,
            dimension: t.dimension,
            compact: t.warning.is_none(),
        })
    }

    fn coefficients(&self) -> Option<CoefficientSequence> {
        let mut it = self.factors.iter().map(|f| f.coefficients());
        let first = it.next()??;
        it.try_fold(first, |acc, c| Some(acc.convolve(&c?)))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ProductTrace {
    pub trace: f64,
    pub dimension: Option<u64>,
    pub factor_traces: Vec<FactorTrace>,
    pub warning: Option<String>,
}

/// The integrand `K(x, x)` of a product factorizes, so the trace over the
/// product domain is the product of the factor traces.
pub fn product_trace(p: &ProductKernel) -> Result<ProductTrace> {
    let factor_traces = p.factors.iter().map(|f| f.trace()).collect::<Result<Vec<_>>>()?;
    let trace = factor_traces.iter().map(|t| t.trace).product();
    let dimension = factor_traces
        .iter()
        .map(|t| t.dimension)
        .try_fold(1u64, |acc, d| d.map(|d| acc * d));
    let warning = if factor_traces.iter().all(|t| t.compact) {
        None
    } else {
        Some("non-compact factor: its trace covers the chart ball only".into())
    };
    Ok(ProductTrace {
        trace,
        dimension,
        factor_traces,
        warning,
    })
}
