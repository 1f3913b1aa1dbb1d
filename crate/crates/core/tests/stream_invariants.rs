mod common;

use std::f64::consts::{FRAC_PI_2, PI};

use proptest::prelude::*;
use qres::fock::{parity, quadrature};
use qres::linalg::{hermiticity_defect, max_abs, trace};
use qres::observables::quad_stats;
use qres::stream::{embed, lift, perturbative_steady, phi_map, reduced_steady, stream_kraus, stream_step, ReducedDynamics};
use qres::{DensityMatrix64, ReducedStreamState64};

#[test]
fn simulation_approaches_formula_as_theta_shrinks() {
    let phi = 0.2;
    let formula = perturbative_steady(phi, 0.0).unwrap().delta_xpi2;
    let mut gaps = Vec::new();
    let mut x0_ratio = Vec::new();
    for theta in [PI / 20.0, PI / 40.0, PI / 80.0] {
        let fp = reduced_steady(phi, theta, 40, 1e-10, 400_000).unwrap();
        assert!(fp.converged);
        let s = quad_stats(&fp.state.density()).unwrap();
        gaps.push((s.delta_at(FRAC_PI_2) - formula).abs());
        x0_ratio.push(s.mean_x0 / perturbative_steady(phi, theta).unwrap().x0_mean);
    }
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
    // ⟨X_0⟩ is linear in θ up to O(θ³)
    assert!((x0_ratio[1] - 1.0).abs() < 0.03 && (x0_ratio[2] - 1.0).abs() < 0.03, "{x0_ratio:?}");
}

#[test]
fn ground_stream_without_entanglement_stays_dark() {
    let n_max = 15;
    let dynamics = ReducedDynamics::new(0.0, PI / 10.0, n_max).unwrap();
    let mut r = ReducedStreamState64::ground(n_max);
    for _ in 0..200 {
        r = dynamics.step(&r);
    }
    assert!(max_abs(&(&r.rho_d - DensityMatrix64::vacuum(n_max + 1).matrix())) < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    /// `P X_φ P = −X_φ`: parity conjugation flips means and keeps spreads.
    #[test]
    fn parity_flips_quadrature_means(seed in any::<u64>(), phi in 0.0..PI) {
        let mut rng = common::rng(seed);
        let n_max = 18;
        let rho = common::random_low_density(&mut rng, n_max + 1, 12);
        let p = parity::<f64>(n_max);
        let x = quadrature(phi, n_max).unwrap();
        prop_assert!(max_abs(&(&p * &x * &p + &x)) < 1e-14);
        let flipped = rho.conjugate(&p);
        let (a, b) = (quad_stats(&rho).unwrap(), quad_stats(&flipped).unwrap());
        prop_assert!((a.mean_at(phi) + b.mean_at(phi)).abs() < 1e-12);
        prop_assert!((a.delta_at(phi) - b.delta_at(phi)).abs() < 1e-12);
    }

    /// Φ preserves the trace of states that stay clear of the truncation edge.
    #[test]
    fn phi_preserves_trace(seed in any::<u64>(), theta in 0.01..0.5f64) {
        let mut rng = common::rng(seed);
        let rho = common::random_low_density(&mut rng, 31, 10);
        let out = phi_map(rho.matrix(), theta).unwrap();
        prop_assert!((trace(&out).re - 1.0).abs() < 1e-12);
        prop_assert!(hermiticity_defect(&out) < 1e-14);
    }

    /// Joint steps keep the parity symmetry, so lifting never fails.
    #[test]
    fn joint_steps_keep_symmetry(seed in any::<u64>(), phi in -0.7..0.7f64, theta in 0.05..0.4f64) {
        let mut rng = common::rng(seed);
        let n_max = 20;
        let rho_d = common::random_low_density(&mut rng, n_max + 1, 8).into_matrix();
        let o = common::random_low_density(&mut rng, n_max + 1, 8).into_matrix();
        let r = ReducedStreamState64 { rho_d, rho_o: o * qres::scalar::cplx(0.5, 0.0) };
        let map = stream_kraus(phi, theta, n_max).unwrap();
        let mut s = embed(&r);
        for _ in 0..5 {
            s = stream_step(&s, &map).unwrap();
            prop_assert!(lift(&s).is_ok());
        }
        let dynamics = ReducedDynamics::new(phi, theta, n_max).unwrap();
        let mut direct = r;
        for _ in 0..5 {
            direct = dynamics.step(&direct);
        }
        let lifted = lift(&s).unwrap();
        prop_assert!(max_abs(&(&lifted.rho_d - &direct.rho_d)) < 1e-10);
        prop_assert!(max_abs(&(&lifted.rho_o - &direct.rho_o)) < 1e-10);
    }
}
