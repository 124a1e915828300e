use bergman_core::geometry::f_eval_mp;
use bergman_core::numerics::{integrate_1d_checked, LogReal, PrecisionContext};

#[test]
fn refinement_is_monotone() {
    for (kappa, n) in [(1.0, 20.0f64), (0.0, 40.0), (-1.0, 15.0)] {
        let mut prev = f64::INFINITY;
        for panels in [1usize, 2, 4, 8] {
            let c = PrecisionContext { panels, quad_order: 8, target_rel_tol: 1.0, ..PrecisionContext::default() };
            let q = integrate_1d_checked(
                |s| LogReal::from_log(-(f_eval_mp(kappa, s) * n)),
                &c.zero(),
                &c.float(0.8),
                &c,
            )
            .unwrap();
            let d = q.discrepancy.ln_abs_f64();
            let floor = -(c.mantissa_bits as f64 - 8.0) * std::f64::consts::LN_2;
            assert!(d <= prev || d < floor, "κ={kappa} panels={panels}: {d} > {prev}");
            prev = d;
        }
    }
}
