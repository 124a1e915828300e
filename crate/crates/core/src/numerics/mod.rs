//! Extended-precision scalars, log-domain reals, Gauss-Legendre quadrature
//! and log-linear decay fits.

mod complex;
mod fit;
mod logreal;
mod precision;
mod quadrature;

pub use complex::MpComplex;
pub use fit::{fit_log_linear, fit_log_values, DecayFit};
pub use logreal::LogReal;
pub use precision::PrecisionContext;
pub use quadrature::{
    gauss_legendre, integrate_1d, integrate_1d_checked, panels_for_rate, periodic_trapezoid,
    GaussLegendre,
    QuadratureEstimate,
};

use rug::Float;

/// Reduce an angle to (-π, π].
pub fn wrap_phase(theta: &Float) -> f64 {
    let prec = theta.prec().max(64);
    let two_pi = Float::with_val(prec, rug::float::Constant::Pi) * 2u32;
    let mut r = Float::with_val(prec, theta % &two_pi);
    let pi = Float::with_val(prec, rug::float::Constant::Pi);
    if r > pi {
        r -= &two_pi;
    } else if r <= -pi {
        r += &two_pi;
    }
    r.to_f64()
}

/// `ln Γ(x)` for x > 0.
pub fn ln_gamma(x: &Float) -> Float {
    Float::with_val(x.prec(), x.ln_gamma_ref())
}
