//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use kernel_lsq::kernel::{apply_operator, KernelSpec};
use kernel_lsq::linalg::Matrix;
use kernel_lsq::problem::EllipticOperator;
use kernel_lsq::quadrature::QuadratureRule;

/// `K_nu(z) = int_0^inf exp(-z cosh t) cosh(nu t) dt` by the trapezoid rule
/// with step halving. Scaled by `exp(z)` to stay in range.
pub fn bessel_k_integral_scaled(nu: f64, z: f64) -> f64 {
    // integrand exp(-z (cosh t - 1)) cosh(nu t) is negligible once the exponent passes 745
    let t_max = {
        let mut t = 1.0_f64;
        while z * (t.cosh() - 1.0) - nu * t < 745.0 {
            t += 0.5;
        }
        t
    };
    let f = |t: f64| (-z * (t.cosh() - 1.0) + nu * t).exp() * 0.5 * (1.0 + (-2.0 * nu * t).exp());
    let mut n = 64usize;
    let mut prev = f64::NAN;
    loop {
        let h = t_max / n as f64;
        let mut s = 0.5 * f(0.0);
        for k in 1..=n {
            s += f(k as f64 * h);
        }
        let est = s * h;
        if (est - prev).abs() <= 1e-15 * est.abs() || n >= 1 << 22 {
            return est;
        }
        prev = est;
        n *= 2;
    }
}

/// Central-difference gradient of `f` at `x`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[i] += h;
            m[i] -= h;
            (f(&p) - f(&m)) / (2.0 * h)
        })
        .collect()
}

/// Gaussian elimination with partial pivoting on a dense copy.
pub fn gauss_solve(a: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = a.n();
    let mut m: Vec<Vec<f64>> = (0..n).map(|i| a.row(i).to_vec()).collect();
    let mut rhs = b.to_vec();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs())).unwrap();
        m.swap(k, p);
        rhs.swap(k, p);
        for i in k + 1..n {
            let f = m[i][k] / m[k][k];
            for j in k..n {
                m[i][j] -= f * m[k][j];
            }
            rhs[i] -= f * rhs[k];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| m[i][j] * x[j]).sum();
        x[i] = (rhs[i] - s) / m[i][i];
    }
    x
}

/// All eigenvalues of a symmetric positive definite matrix by power iteration
/// with Hotelling deflation, descending.
pub fn deflation_eigenvalues(a: &Matrix, tol: f64) -> Vec<f64> {
    let n = a.n();
    let mut m: Vec<f64> = a.as_slice().to_vec();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7 + k * 3) % 11) as f64 / 10.0).collect();
        let mut lambda = 0.0;
        for _ in 0..200_000 {
            let y: Vec<f64> = (0..n).map(|i| (0..n).map(|j| m[i * n + j] * x[j]).sum()).collect();
            let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            let next: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
            x = y.iter().map(|v| v / ny).collect();
            let done = (next - lambda).abs() <= tol * next.abs();
            lambda = next;
            if done {
                break;
            }
        }
        // one Rayleigh refinement with the converged vector
        let y: Vec<f64> = (0..n).map(|i| (0..n).map(|j| m[i * n + j] * x[j]).sum()).collect();
        let lambda: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        out.push(lambda);
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] -= lambda * x[i] * x[j];
            }
        }
    }
    out
}

/// `int (L phi_i)(L phi_j) + w int phi_i phi_j` by a plain double loop with
/// the untabulated kernel.
pub fn brute_force_entry(
    spec: &KernelSpec,
    op: &EllipticOperator,
    xi: &[f64],
    xj: &[f64],
    weight: f64,
    q_in: &QuadratureRule,
    q_bd: &QuadratureRule,
) -> f64 {
    let mut interior = 0.0;
    for (x, w) in q_in.nodes.iter().zip(&q_in.weights) {
        interior += w * apply_operator(op, spec, xi, x).unwrap() * apply_operator(op, spec, xj, x).unwrap();
    }
    let mut boundary = 0.0;
    for (x, w) in q_bd.nodes.iter().zip(&q_bd.weights) {
        boundary += w * kernel_lsq::kernel::kernel_eval(spec, xi, x) * kernel_lsq::kernel::kernel_eval(spec, xj, x);
    }
    interior + weight * boundary
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
