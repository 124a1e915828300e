use std::collections::BTreeMap;

use rug::Float;

use super::{radial_moment, Extent};
use crate::error::{Error, Result};
use crate::geometry::ModelSpace;
use crate::numerics::{GaussLegendre, LogReal, MpComplex, PrecisionContext};

/// Tensor quadrature for A_N inner products of monomials over the chart
/// ball (or the full model).
///
/// Coordinates: `z_i = sqrt(s·x_i)·e^{iθ_i}` with `s = |z|²`, `x` on the
/// standard simplex, so that `dLebesgue = 2^{-d} s^{d-1} ds dσ(x) dθ`.
/// The `θ_i` use an `M`-point trapezoid rule, `x` a collapsed
/// Gauss-Legendre product rule and `s` the radial moment quadrature.
pub struct BallRule {
    model: ModelSpace,
    n: u32,
    extent: Extent,
    ctx: PrecisionContext,
    angular_points: u32,
    simplex: Vec<(Vec<Float>, Float)>,
    radial: BTreeMap<u32, LogReal>,
}

impl BallRule {
    /// Rule exact in the angular and simplex directions for monomials of
    /// degree ≤ max_degree in each slot.
    pub fn new(
        m: &ModelSpace,
        n: u32,
        extent: Extent,
        max_degree: u32,
        ctx: &PrecisionContext,
    ) -> Result<Self> {
        if m.dim > 3 {
            return Err(Error::Unsupported(format!(
                "ball quadrature implemented for d <= 3, got {}",
                m.dim
            )));
        }
        let order = (max_degree as usize + m.dim + 2).max(2);
        Ok(BallRule {
            model: m.clone(),
            n,
            extent,
            ctx: ctx.clone(),
            angular_points: 2 * max_degree + 1,
            simplex: simplex_rule(m.dim, order, ctx.mantissa_bits)?,
            radial: BTreeMap::new(),
        })
    }

    pub fn angular_points(&self) -> u32 {
        self.angular_points
    }

    /// `∫ z^α · conj(z^β) · e^{-N f(|z|²)} ρ_κ dLebesgue`.
    pub fn monomial_product(&mut self, alpha: &[u32], beta: &[u32]) -> Result<MpComplex> {
        let d = self.model.dim;
        if alpha.len() != d || beta.len() != d {
            return Err(Error::InvalidParameter("multi-index dimension mismatch".into()));
        }
        let prec = self.ctx.mantissa_bits;
        // Trapezoid rule for ∫_0^{2π} e^{ikθ} dθ: 2π when M | k, else 0.
        for (&a, &b) in alpha.iter().zip(beta) {
            if (a as i64 - b as i64) % self.angular_points as i64 != 0 {
                return Ok(MpComplex::zero(prec));
            }
        }
        let twice_p: u32 = alpha.iter().chain(beta).sum::<u32>() + 2 * (d as u32 - 1);
        if twice_p % 2 != 0 {
            return Err(Error::Unsupported("half-integer radial moment".into()));
        }
        let radial = match self.radial.get(&twice_p) {
            Some(v) => v.clone(),
            None => {
                let v = radial_moment(
                    &self.model,
                    self.n as f64,
                    twice_p as f64 / 2.0,
                    self.extent,
                    &self.ctx,
                )?;
                self.radial.insert(twice_p, v.clone());
                v
            }
        };
        let mut simplex = Float::new(prec);
        for (x, w) in &self.simplex {
            let mut term = w.clone();
            for (i, xi) in x.iter().enumerate() {
                let e = alpha[i] + beta[i];
                if e > 0 {
                    // e is even here
                    term *= Float::with_val(prec, rug::ops::Pow::pow(xi, e / 2));
                }
            }
            simplex += term;
        }
        // (2π)^d · 2^{-d} = π^d
        let pi = Float::with_val(prec, rug::float::Constant::Pi);
        let value = radial.to_float(prec) * simplex * Float::with_val(prec, rug::ops::Pow::pow(&pi, d as u32));
        Ok(MpComplex::from_real(value))
    }
}

/// Product Gauss-Legendre rule on the (d-1)-simplex `{x ≥ 0, Σx = 1}`
/// through the collapsed map `x_i = t_i ∏_{j<i}(1-t_j)`; nodes carry all d
/// barycentric coordinates.
fn simplex_rule(dim: usize, order: usize, prec: u32) -> Result<Vec<(Vec<Float>, Float)>> {
    if dim == 1 {
        return Ok(vec![(vec![Float::with_val(prec, 1u32)], Float::with_val(prec, 1u32))]);
    }
    let gl = GaussLegendre::new(order, prec)?;
    let unit = gl.on_interval(&Float::new(prec), &Float::with_val(prec, 1u32));
    let mut out = Vec::new();
    let mut idx = vec![0usize; dim - 1];
    loop {
        let mut x = Vec::with_capacity(dim);
        let mut rest = Float::with_val(prec, 1u32);
        let mut weight = Float::with_val(prec, 1u32);
        for &i in &idx {
            let (t, w) = &unit[i];
            x.push(Float::with_val(prec, &rest * t));
            // ∂x_i/∂t_i = ∏_{j<i}(1 - t_j)
            weight *= w;
            weight *= &rest;
            rest *= Float::with_val(prec, 1u32) - t;
        }
        x.push(rest);
        out.push((x, weight));
        // advance the odometer
        let mut k = 0;
        loop {
            if k == idx.len() {
                return Ok(out);
            }
            idx[k] += 1;
            if idx[k] < unit.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_dirichlet_integrals() {
        // ∫_Δ ∏ x_i^{a_i} dσ = ∏ a_i! / (|a| + d - 1)!
        for (dim, a) in [(2usize, vec![3u32, 1]), (3, vec![2, 0, 1]), (3, vec![0, 0, 0])] {
            let rule = simplex_rule(dim, 8, 128).unwrap();
            let mut acc = Float::new(128);
            for (x, w) in &rule {
                let mut t = w.clone();
                for (xi, &e) in x.iter().zip(&a) {
                    t *= Float::with_val(128, rug::ops::Pow::pow(xi, e));
                }
                acc += t;
            }
            let k: u32 = a.iter().sum();
            let mut expect = Float::with_val(128, 1u32);
            for &e in &a {
                expect *= Float::with_val(128, Float::factorial(e));
            }
            expect /= Float::with_val(128, Float::factorial(k + dim as u32 - 1));
            let err = Float::with_val(128, &acc - &expect).abs() / &expect;
            assert!(err < 1e-35, "dim={dim} a={a:?}: {err}");
        }
    }

    #[test]
    fn gram_of_low_monomials_is_diagonal_positive() {
        let m = ModelSpace::new(1.0, 1, 2.0).unwrap();
        let mut rule = BallRule::new(&m, 12, Extent::Chart, 2, &PrecisionContext::default()).unwrap();
        for i in 0..3u32 {
            for j in 0..3u32 {
                let g = rule.monomial_product(&[i], &[j]).unwrap();
                if i == j {
                    assert!(g.re > 0 && g.im.is_zero());
                } else {
                    assert!(g.is_zero());
                }
            }
        }
    }
}
