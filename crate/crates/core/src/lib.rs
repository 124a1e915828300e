//! Bergman kernels on the constant-curvature Kähler models (projective
//! space, complex Euclidean space, hyperbolic ball), flat tori and their
//! products, compared against the closed-form approximation
//! `S_N(x, y) ≈ Ψ^N(x, y) · P_κ(N)`.
//!
//! All exponentially small quantities are carried as [`numerics::LogReal`]
//! in MPFR precision chosen through [`numerics::PrecisionContext`].

pub mod ancillary;
pub mod error;
pub mod geometry;
pub mod model_kernels;
pub mod numerics;
pub mod products;
pub mod report;
pub mod torus;

pub use error::{Error, Result};
