use bergman_core::ancillary::{gaussian_bound_fit, Polynomial};
use bergman_core::geometry::{geodesic_distance, p_poly, ChartPoint, Curvature, ModelSpace};
use bergman_core::model_kernels::BergmanModel;
use bergman_core::numerics::{gauss_legendre, PrecisionContext};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ctx() -> PrecisionContext {
    PrecisionContext::default()
}

fn kernel_complex(model: &BergmanModel, z: Complex64, w: Complex64) -> Complex64 {
    let k = model
        .basis_kernel(&ChartPoint::new(vec![z]), &ChartPoint::new(vec![w]), &ctx())
        .unwrap()
        .value;
    Complex64::from_polar(k.magnitude_f64(), k.phase)
}

/// On CP¹, `∫ K(z, ζ) u(ζ) e^{-N f(|ζ|²)} ρ dA(ζ) = u(z)` for deg u ≤ N.
#[test]
fn spherical_projector_reproduces_sections() {
    let n = 6u32;
    let m = ModelSpace::new(1.0, 1, 2.0).unwrap();
    let model = BergmanModel::new(&m, n, &ctx()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    // t = s/(1+s) makes the radial integrand a polynomial of degree N in t.
    let radial = gauss_legendre(n as usize / 2 + 2, 0.0, 1.0, 128).unwrap();
    let angles = 2 * n as usize + 2;
    let f = |s: f64| (1.0 + s).ln();
    for _ in 0..5 {
        let deg = rng.gen_range(0..=n);
        let u = Polynomial::random(&mut rng, 1, deg);
        let z = Complex64::from_polar(rng.gen_range(0.0..1.5), rng.gen_range(0.0..6.28));
        let mut acc = Complex64::new(0.0, 0.0);
        for (t, wt) in &radial {
            let (t, wt) = (t.to_f64(), wt.to_f64());
            let s = t / (1.0 - t);
            let jac = 1.0 / ((1.0 - t) * (1.0 - t));
            for k in 0..angles {
                let theta = std::f64::consts::TAU * k as f64 / angles as f64;
                let zeta = Complex64::from_polar(s.sqrt(), theta);
                // frame value times e^{(N/2) f(|z|²)} e^{-(N/2) f(|ζ|²)}
                let kz = kernel_complex(&model, z, zeta)
                    * ((n as f64 / 2.0) * (f(z.norm_sqr()) - f(s))).exp();
                let rho = (1.0 + s).powi(-2);
                // dA = (1/2) ds dθ
                acc += kz * u.eval(&[zeta]) * rho * jac * wt * 0.5 * std::f64::consts::TAU / angles as f64;
            }
        }
        let expect = u.eval(&[z]);
        assert!((acc - expect).norm() < 1e-10 * expect.norm().max(1.0), "{acc} vs {expect}");
    }
}

#[test]
fn diagonal_positive() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for kappa in [1.0, 0.0, -1.0] {
        let m = ModelSpace::with_default_radius(kappa, 2).unwrap();
        let model = BergmanModel::new(&m, 10, &ctx()).unwrap();
        for _ in 0..20 {
            let z = m.sample_ball(&mut rng, m.chart_radius);
            let k = model.basis_kernel(&z, &z, &ctx()).unwrap();
            assert_eq!(k.value.log_magnitude.sign(), 1);
        }
    }
}

#[test]
fn off_diagonal_gaussian_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for kappa in [1.0, 0.0, -1.0] {
        let m = ModelSpace::with_default_radius(kappa, 1).unwrap();
        let c = Curvature::new(kappa).unwrap();
        let mut points = Vec::new();
        for n in [10u32, 20, 40] {
            let model = BergmanModel::new(&m, n, &ctx()).unwrap();
            for _ in 0..15 {
                let z = m.sample_ball(&mut rng, m.chart_radius * 0.7);
                let w = m.sample_ball(&mut rng, m.chart_radius * 0.7);
                let dist = geodesic_distance(&m, &z, &w).unwrap();
                let k = model.basis_kernel(&z, &w, &ctx()).unwrap();
                let ln_p = p_poly(&c, 1, n as f64).ln();
                points.push((n as f64 * dist * dist, k.value.ln_magnitude() - ln_p));
            }
        }
        let fit = gaussian_bound_fit(&points).unwrap();
        assert!(fit.c > 0.0, "κ={kappa}: c = {}", fit.c);
        for (x, y) in &points {
            assert!(*y <= -fit.c * x + fit.big_c + 1e-12);
        }
    }
}
