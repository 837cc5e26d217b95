mod common;

use common::bessel_k_integral_scaled;
use kernel_lsq::specfun::{bessel_k, bessel_k_dz, bessel_k_scaled, bessel_k_scaled_run, gamma};
use proptest::prelude::*;

fn log_grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
}

#[test]
fn bessel_k_matches_integral_representation() {
    for nu in [0.0, 0.5, 1.0, 2.0, 3.0, 5.0] {
        let mut worst: f64 = 0.0;
        for z in log_grid(1e-6, 50.0, 200) {
            let oracle = bessel_k_integral_scaled(nu, z);
            let got = bessel_k_scaled(nu, z).unwrap();
            worst = worst.max(((got - oracle) / oracle).abs());
        }
        assert!(worst <= 1e-12, "nu = {nu}: worst relative error {worst:.3e}");
    }
}

#[test]
fn unscaled_values_follow_from_scaled() {
    for z in [1e-3, 0.7, 4.0, 30.0] {
        let a = bessel_k(2.0, z).unwrap();
        let b = bessel_k_scaled(2.0, z).unwrap() * (-z).exp();
        assert!(((a - b) / b).abs() < 1e-14);
    }
}

#[test]
fn recurrence_identity() {
    for nu in [1.0, 1.25, 2.5, 7.0, 20.0] {
        for z in log_grid(1e-3, 60.0, 50) {
            let km = bessel_k_scaled(nu - 1.0, z).unwrap();
            let k = bessel_k_scaled(nu, z).unwrap();
            let kp = bessel_k_scaled(nu + 1.0, z).unwrap();
            let res = (kp - km - 2.0 * nu / z * k).abs() / kp;
            assert!(res <= 1e-10, "nu = {nu}, z = {z}: residual {res:.3e}");
        }
    }
}

#[test]
fn run_agrees_with_pointwise_orders() {
    let mut out = [0.0; 6];
    bessel_k_scaled_run(1.5, 2.3, &mut out).unwrap();
    for (i, v) in out.iter().enumerate() {
        let direct = bessel_k_scaled(1.5 + i as f64, 2.3).unwrap();
        assert!(((v - direct) / direct).abs() < 1e-13);
    }
}

#[test]
fn derivative_matches_central_difference() {
    for nu in [0.0, 0.5, 2.0, 4.5] {
        for z in [0.3, 1.0, 5.0] {
            let h = 1e-5 * z;
            let fd = (bessel_k(nu, z + h).unwrap() - bessel_k(nu, z - h).unwrap()) / (2.0 * h);
            let d = bessel_k_dz(nu, z).unwrap();
            assert!(((fd - d) / d).abs() < 1e-8, "nu = {nu}, z = {z}");
        }
    }
}

#[test]
fn gamma_reference_points() {
    assert!((gamma(0.5).unwrap() - std::f64::consts::PI.sqrt()).abs() < 1e-14);
    assert!((gamma(5.0).unwrap() - 24.0).abs() < 1e-12);
    assert!((gamma(3.5).unwrap() - 3.323_350_970_447_842_6).abs() < 1e-13);
}

proptest! {
    #[test]
    fn bessel_k_is_positive_and_decreasing_in_z(nu in 0.0f64..10.0, z in 1e-3f64..40.0) {
        let k1 = bessel_k_scaled(nu, z).unwrap() * (-z).exp();
        let k2 = bessel_k_scaled(nu, z * 1.01).unwrap() * (-z * 1.01).exp();
        prop_assert!(k1 > 0.0);
        prop_assert!(k2 < k1);
    }

    #[test]
    fn bessel_k_is_increasing_in_order(nu in 0.0f64..10.0, z in 1e-3f64..40.0) {
        prop_assert!(bessel_k_scaled(nu + 0.5, z).unwrap() > bessel_k_scaled(nu, z).unwrap());
    }
}
