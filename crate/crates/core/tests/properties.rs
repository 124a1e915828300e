use std::sync::OnceLock;

use bergman_core::geometry::{
    f_polarized, geodesic_distance, p_poly_mp, psi_exponent, ChartPoint, Curvature, ModelSpace,
};
use bergman_core::numerics::{GaussLegendre, LogReal};
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};
use rug::ops::Pow;
use rug::Float;

fn config() -> Config {
    Config {
        cases: 10_000,
        rng_seed: RngSeed::Fixed(0x5eed),
        failure_persistence: None,
        ..Config::default()
    }
}

const BITS: u32 = 192;

fn rules() -> &'static Vec<GaussLegendre> {
    static RULES: OnceLock<Vec<GaussLegendre>> = OnceLock::new();
    RULES.get_or_init(|| (2..=12).map(|q| GaussLegendre::new(q, BITS).unwrap()).collect())
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn nonzero() -> impl Strategy<Value = f64> {
    prop_oneof![1e-300..1e300f64, -1e300..-1e-300f64]
}

fn point(dim: usize, radius: f64) -> impl Strategy<Value = ChartPoint> {
    prop::collection::vec((0.0..1.0f64, 0.0..std::f64::consts::TAU), dim).prop_map(move |v| {
        let coords: Vec<Complex64> = v.iter().map(|&(t, a)| Complex64::from_polar(t, a)).collect();
        let norm = coords.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt().max(1.0);
        ChartPoint::new(coords.iter().map(|c| c * (radius / norm)).collect())
    })
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn logreal_round_trip_and_products(a in nonzero(), b in nonzero()) {
        let la = LogReal::from_f64(a, BITS);
        let lb = LogReal::from_f64(b, BITS);
        prop_assert!(close(la.to_f64(), a, 1e-15));
        let p = la.mul(&lb);
        prop_assert_eq!(p.sign() as f64, (a * b).signum());
        prop_assert!((p.ln_abs_f64() - (a.abs().ln() + b.abs().ln())).abs() < 1e-12);
        let q = la.div(&lb);
        prop_assert!((q.ln_abs_f64() - (a.abs().ln() - b.abs().ln())).abs() < 1e-12);
    }

    #[test]
    fn logreal_sums(a in -1e6..1e6f64, b in -1e6..1e6f64) {
        let la = LogReal::from_f64(a, BITS);
        let lb = LogReal::from_f64(b, BITS);
        let s = la.add(&lb).to_float(BITS);
        let exact = Float::with_val(BITS, a) + b;
        let err = Float::with_val(BITS, &s - &exact).abs().to_f64();
        prop_assert!(err <= 1e-45 * (a.abs() + b.abs()).max(1e-300));
        prop_assert!(la.sub(&la).is_zero());
        prop_assert_eq!(la.cmp_abs(&lb), a.abs().partial_cmp(&b.abs()).unwrap());
        let via_sum = LogReal::sum([&la, &lb], BITS).to_float(BITS);
        let err = Float::with_val(BITS, &via_sum - &exact).abs().to_f64();
        prop_assert!(err <= 1e-45 * (a.abs() + b.abs()).max(1e-300));
    }

    #[test]
    fn gauss_legendre_exact_for_low_degree(
        q in 2usize..=12,
        coeffs in prop::collection::vec(-10.0..10.0f64, 24),
        a in -3.0..3.0f64,
        len in 0.01..4.0f64,
    ) {
        let rule = &rules()[q - 2];
        let deg = 2 * q - 1;
        let c = &coeffs[..=deg];
        let b = a + len;
        let (fa, fb) = (Float::with_val(BITS, a), Float::with_val(BITS, b));
        let mut quad = Float::new(BITS);
        for (x, w) in rule.on_interval(&fa, &fb) {
            let mut p = Float::new(BITS);
            for cf in c.iter().rev() {
                p *= &x;
                p += *cf;
            }
            quad += p * w;
        }
        let anti = |x: &Float| {
            let mut acc = Float::new(BITS);
            for (k, cf) in c.iter().enumerate().rev() {
                acc += Float::with_val(BITS, *cf) / (k as u32 + 1);
                acc *= x;
            }
            acc
        };
        let exact = anti(&fb) - anti(&fa);
        let scale = c.iter().map(|v| v.abs()).sum::<f64>() * 7f64.powi(deg as i32 + 1);
        let err = Float::with_val(BITS, &quad - &exact).abs().to_f64();
        prop_assert!(err <= 1e-50 * scale, "q={} err={}", q, err);
    }

    #[test]
    fn p_curvature_scaling(k in 1u32..=5, d in 1usize..=4, n in 1u32..=500) {
        // P_{1/k}(N) = k^{-d} P_1(kN); κ = 1/k is rounded to binary for k = 3, 5.
        let lhs = p_poly_mp(1.0 / k as f64, d, &Float::with_val(256, n));
        let rhs = p_poly_mp(1.0, d, &Float::with_val(256, k * n)) / Float::with_val(256, k).pow(d as u32);
        let rel = Float::with_val(256, &lhs - &rhs).abs() / &rhs;
        let tol = if k.is_power_of_two() { 1e-70 } else { 1e-16 };
        prop_assert!(rel.to_f64() < tol, "k={} d={} N={} rel={}", k, d, n, rel.to_f64());
    }

    #[test]
    fn polarization_conjugate_symmetric(kappa in -1.0..1.0f64, re in -0.4..0.4f64, im in -0.4..0.4f64) {
        let c = Curvature::new(kappa).unwrap();
        let s = Complex64::new(re, im);
        let a = f_polarized(&c, s).unwrap();
        let b = f_polarized(&c, s.conj()).unwrap();
        prop_assert!((a - b.conj()).norm() <= 1e-15 * a.norm().max(1e-300));
    }

    #[test]
    fn geodesic_symmetric_and_psi_related(
        kappa in prop_oneof![Just(1.0), Just(0.0), Just(-1.0), -2.0..2.0f64],
        z in point(2, 0.4),
        w in point(2, 0.4),
    ) {
        let m = ModelSpace::new(kappa, 2, 0.5 / kappa.abs().max(1.0).sqrt()).unwrap();
        let z = ChartPoint::new(z.coords.iter().map(|c| c * m.chart_radius / 0.4).collect());
        let w = ChartPoint::new(w.coords.iter().map(|c| c * m.chart_radius / 0.4).collect());
        let dzw = geodesic_distance(&m, &z, &w).unwrap();
        let dwz = geodesic_distance(&m, &w, &z).unwrap();
        prop_assert!((dzw - dwz).abs() <= 1e-12 * dzw.max(1e-12));
        let pzw = psi_exponent(&m, &z, &w).unwrap();
        let pwz = psi_exponent(&m, &w, &z).unwrap();
        prop_assert!((pzw - pwz).abs() <= 1e-12 * pzw.abs().max(1e-12));
    }
}
