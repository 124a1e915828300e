//! Randomized invariant suites run at a fixed seed.

use std::f64::consts::TAU;

use bergman_core::geometry::{
    potential_hessian, psi_exponent_mp, smallest_eigenvalue, ChartPoint, ModelSpace,
};
use bergman_core::model_kernels::BergmanModel;
use bergman_core::numerics::PrecisionContext;
use bergman_core::torus::{build_basis, periodization_oracle, torus_kernel, ThetaBasis, TorusGeometry};
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed, TestCaseError, TestError, TestRunner};
use serde::Serialize;

use crate::error::Result;

pub const CASES: u32 = 10_000;

#[derive(Clone, Debug, Serialize)]
pub struct SuiteOutcome {
    pub name: String,
    pub cases: u32,
    pub passed: bool,
    /// Minimal failing input and reason, when failed.
    pub failure: Option<String>,
}

fn runner(seed: u64) -> TestRunner {
    let config = Config {
        cases: CASES,
        rng_seed: RngSeed::Fixed(seed),
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new(config)
}

fn outcome<T: std::fmt::Debug>(name: &str, r: std::result::Result<(), TestError<T>>) -> SuiteOutcome {
    let failure = match r {
        Ok(()) => None,
        Err(TestError::Fail(why, input)) => Some(format!("{why} at {input:?}")),
        Err(TestError::Abort(why)) => Some(format!("aborted: {why}")),
    };
    SuiteOutcome {
        name: name.to_string(),
        cases: CASES,
        passed: failure.is_none(),
        failure,
    }
}

/// `(κ, d)` over the three regimes in dimensions 1 and 2.
const MODELS: [(f64, usize); 6] = [(1.0, 1), (1.0, 2), (0.0, 1), (0.0, 2), (-1.0, 1), (-1.0, 2)];

fn spaces() -> Vec<ModelSpace> {
    MODELS
        .iter()
        .map(|&(k, d)| ModelSpace::with_default_radius(k, d).expect("default models are valid"))
        .collect()
}

/// Point of `C^d` with `|z| ≤ radius`, from raw draws in `[0,1) × [0,2π)`.
fn to_point(raw: &[(f64, f64)], radius: f64) -> ChartPoint {
    let coords: Vec<Complex64> = raw.iter().map(|&(t, a)| Complex64::from_polar(t, a)).collect();
    let norm = coords.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let scale = if norm > 1.0 { radius / norm } else { radius };
    ChartPoint::new(coords.iter().map(|c| c * scale).collect())
}

fn raw_coords() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0..1.0f64, 0.0..TAU), 2)
}

fn phase_gap(a: f64, b: f64) -> f64 {
    let s = (a - b).rem_euclid(TAU);
    s.min(TAU - s)
}

/// `D(z, w) ≤ 0`, vanishing only on the diagonal.
pub fn psi_negativity(seed: u64) -> Result<SuiteOutcome> {
    const BITS: u32 = 256;
    let models = spaces();
    let floor = 2f64.powi(-(BITS as i32) + 8);
    let strategy = (0..models.len(), raw_coords(), raw_coords(), prop::bool::weighted(0.05));
    let r = runner(seed).run(&strategy, |(i, a, b, same)| {
        let m = &models[i];
        let z = to_point(&a[..m.dim], m.chart_radius * 0.99);
        let w = if same { z.clone() } else { to_point(&b[..m.dim], m.chart_radius * 0.99) };
        let d = psi_exponent_mp(m, &z, &w, BITS).map_err(|e| TestCaseError::fail(e.to_string()))?.to_f64();
        prop_assert!(d <= floor, "D = {d:e} > 0");
        let sep: f64 = z.coords.iter().zip(&w.coords).map(|(x, y)| (x - y).norm_sqr()).sum();
        if same {
            prop_assert!(d.abs() <= floor, "D(z, z) = {d:e}");
        } else if sep > 1e-60 {
            prop_assert!(d < 0.0, "D = {d:e} at separation² {sep:e}");
        }
        Ok(())
    });
    Ok(outcome("psi_exponent negativity", r))
}

/// Smallest eigenvalue of the real Hessian of `x ↦ f_κ(|x|²)` is positive
/// on the part of the chart inside the convexity radius.
pub fn hessian_positive(seed: u64) -> Result<SuiteOutcome> {
    let models = spaces();
    let strategy = (0..models.len(), raw_coords());
    let r = runner(seed).run(&strategy, |(i, a)| {
        let m = &models[i];
        let reach = m.chart_radius.min(m.curvature.convexity_radius());
        let z = to_point(&a[..m.dim], reach * 0.95);
        let h = potential_hessian(m, &z, 1e-4).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let lambda = smallest_eigenvalue(&h);
        prop_assert!(lambda > 0.0, "smallest eigenvalue {lambda:e}");
        Ok(())
    });
    Ok(outcome("Hessian positive definite", r))
}

/// `S_N(z, w) = conj S_N(w, z)` for the basis kernels of prebuilt models.
pub fn hermitian_symmetry(seed: u64) -> Result<SuiteOutcome> {
    let ctx = PrecisionContext::new(192, 24, 8, 1e-30)?;
    let models: Vec<BergmanModel> = spaces()
        .iter()
        .zip([7u32, 5, 6, 4, 8, 5])
        .map(|(m, n)| BergmanModel::new(m, n, &ctx))
        .collect::<bergman_core::Result<_>>()?;
    let strategy = (0..models.len(), raw_coords(), raw_coords());
    let r = runner(seed).run(&strategy, |(i, a, b)| {
        let model = &models[i];
        let m = &model.space;
        let z = to_point(&a[..m.dim], m.chart_radius * 0.5);
        let w = to_point(&b[..m.dim], m.chart_radius * 0.5);
        let fail = |e: bergman_core::Error| TestCaseError::fail(e.to_string());
        let zw = model.basis_kernel(&z, &w, &ctx).map_err(fail)?.value;
        let wz = model.basis_kernel(&w, &z, &ctx).map_err(fail)?.value;
        let rel = zw.magnitude_rel_diff(&wz).to_f64();
        prop_assert!(rel < 1e-25, "magnitudes differ by {rel:e}");
        let gap = phase_gap(zw.phase, -wz.phase);
        prop_assert!(gap < 1e-12, "phases not opposite: {} vs {}", zw.phase, wz.phase);
        Ok(())
    });
    Ok(outcome("Hermitian symmetry", r))
}

/// Theta-basis kernel against the lattice periodization of the flat kernel.
pub fn torus_method_independence(seed: u64) -> Result<SuiteOutcome> {
    const BITS: u32 = 192;
    let ctx = PrecisionContext::new(BITS, 24, 8, 1e-30)?;
    let cases = [
        (Complex64::new(0.0, 1.0), 3u32),
        (Complex64::new(0.3, 1.2), 5),
        (Complex64::new(-0.2, 0.9), 4),
    ];
    let bases: Vec<ThetaBasis> = cases
        .iter()
        .map(|&(tau, n)| TorusGeometry::new(tau, n).and_then(|g| build_basis(&g, &ctx)))
        .collect::<bergman_core::Result<_>>()?;
    let unit = 0.0..1.0f64;
    let strategy = (0..bases.len(), (unit.clone(), unit.clone()), (unit.clone(), unit));
    let r = runner(seed).run(&strategy, |(i, (zx, zy), (wx, wy))| {
        let b = &bases[i];
        let g = &b.geometry;
        let z = Complex64::new(zx, zy * g.im_tau());
        let w = Complex64::new(wx, wy * g.im_tau());
        let k = torus_kernel(b, z, w);
        let p = periodization_oracle(g, z, w, 4, BITS).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let rel = k.magnitude_rel_diff(&p.value).to_f64();
        prop_assert!(rel < 1e-25, "magnitude differs by {rel:e}");
        let gap = phase_gap(k.phase, p.value.phase);
        prop_assert!(gap < 1e-12, "phase differs by {gap:e}");
        Ok(())
    });
    Ok(outcome("torus method independence", r))
}

pub fn run_all(seed: u64) -> Result<Vec<SuiteOutcome>> {
    Ok(vec![
        psi_negativity(seed)?,
        hessian_positive(seed)?,
        hermitian_symmetry(seed)?,
        torus_method_independence(seed)?,
    ])
}
