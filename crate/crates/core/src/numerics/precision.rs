use rug::float::Constant;
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_RESOLVING_ORDER: usize = 96;

/// Working precision and quadrature resolution threaded through every
/// numerical operation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionContext {
    pub mantissa_bits: u32,
    /// Gauss-Legendre points per panel.
    pub quad_order: usize,
    pub panels: usize,
    pub target_rel_tol: f64,
}

impl Default for PrecisionContext {
    fn default() -> Self {
        PrecisionContext {
            mantissa_bits: 256,
            quad_order: 32,
            panels: 8,
            target_rel_tol: 1e-40,
        }
    }
}

impl PrecisionContext {
    pub fn new(
        mantissa_bits: u32,
        quad_order: usize,
        panels: usize,
        target_rel_tol: f64,
    ) -> Result<Self> {
        let ctx = PrecisionContext {
            mantissa_bits,
            quad_order,
            panels,
            target_rel_tol,
        };
        ctx.validate()?;
        Ok(ctx)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mantissa_bits < 53 {
            return Err(Error::InvalidParameter(format!(
                "mantissa_bits must be >= 53, got {}",
                self.mantissa_bits
            )));
        }
        if self.quad_order < 2 {
            return Err(Error::InvalidParameter(format!(
                "quad_order must be >= 2, got {}",
                self.quad_order
            )));
        }
        if self.panels < 1 {
            return Err(Error::InvalidParameter("panels must be >= 1".into()));
        }
        if !(self.target_rel_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "target_rel_tol must be positive, got {}",
                self.target_rel_tol
            )));
        }
        Ok(())
    }

    pub fn with_bits(&self, bits: u32) -> Self {
        PrecisionContext {
            mantissa_bits: bits,
            ..self.clone()
        }
    }

    pub fn with_tol(&self, tol: f64) -> Self {
        PrecisionContext {
            target_rel_tol: tol,
            ..self.clone()
        }
    }

    pub fn with_panels(&self, panels: usize) -> Self {
        PrecisionContext {
            panels,
            ..self.clone()
        }
    }

    /// Context able to resolve differences of relative size `e^{-nats}`:
    /// adds enough bits to carry that dynamic range on top of the current
    /// precision and tightens the tolerance below it.
    pub fn resolving(&self, nats: f64) -> Self {
        let nats = nats.max(0.0);
        let extra = (nats / std::f64::consts::LN_2).ceil() as u32;
        let bits = self.mantissa_bits.max(extra + 128);
        let tol = self.target_rel_tol.min((-nats - 25.0 * std::f64::consts::LN_10).exp());
        let tol = if tol > 0.0 { tol } else { f64::MIN_POSITIVE };
        // Higher order is cheaper than more panels at tight tolerances.
        let order = self
            .quad_order
            .max(((-tol.ln()) / 6.0).ceil() as usize)
            .min(MAX_RESOLVING_ORDER);
        PrecisionContext {
            mantissa_bits: bits,
            target_rel_tol: tol,
            quad_order: order,
            ..self.clone()
        }
    }

    /// Smallest relative spacing of the working precision.
    pub fn epsilon(&self) -> f64 {
        2f64.powi(-(self.mantissa_bits.min(1000) as i32))
    }

    /// ln of the relative tolerance; usable even when the tolerance
    /// underflows an f64.
    pub fn log_tol(&self) -> f64 {
        self.target_rel_tol.ln()
    }

    pub fn float(&self, v: f64) -> Float {
        Float::with_val(self.mantissa_bits, v)
    }

    pub fn zero(&self) -> Float {
        Float::new(self.mantissa_bits)
    }

    pub fn pi(&self) -> Float {
        Float::with_val(self.mantissa_bits, Constant::Pi)
    }
}
