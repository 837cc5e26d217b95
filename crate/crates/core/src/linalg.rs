//! Dense symmetric positive definite linear algebra: blocked Cholesky,
//! cyclic Jacobi eigenvalues and spectral condition numbers.

use crate::error::{Error, Result};

/// Dense row-major square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Dimension(format!("{} entries cannot form a {n}x{n} matrix", data.len())));
        }
        Ok(Self { n, data })
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, d) in diag.iter().enumerate() {
            m.data[i * diag.len() + i] = *d;
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        self.data.chunks_exact(self.n).map(|row| dot(row, x)).collect()
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `max |A_ij - A_ji| / max |A_ij|`.
    pub fn relative_asymmetry(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0_f64;
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    /// Copies the lower triangle onto the upper triangle.
    pub fn mirror_lower(&mut self) {
        let n = self.n;
        for i in 0..n {
            for j in 0..i {
                self.data[j * n + i] = self.data[i * n + j];
            }
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four accumulators so the loop vectorizes
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// `c[m x n] += alpha * a[m x k] * b[n x k]^T` on strided row-major views.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm_nt(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    lda: usize,
    b: &[f64],
    ldb: usize,
    c: &mut [f64],
    ldc: usize,
) {
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    assert!(a.len() >= (m - 1) * lda + k);
    assert!(b.len() >= (n - 1) * ldb + k);
    assert!(c.len() >= (m - 1) * ldc + n);
    // SAFETY: the asserts above bound every index the kernel touches, and `c`
    // is borrowed mutably so it cannot alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            lda as isize,
            1,
            b.as_ptr(),
            1,
            ldb as isize,
            1.0,
            c.as_mut_ptr(),
            ldc as isize,
            1,
        );
    }
}

const BLOCK: usize = 96;

/// Lower-triangular Cholesky factor `A = L L^T`.
#[derive(Clone, Debug)]
pub struct SpdFactorization {
    n: usize,
    /// Row-major; entries above the diagonal are zero.
    lower: Vec<f64>,
}

impl SpdFactorization {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn l(&self, i: usize, j: usize) -> f64 {
        self.lower[i * self.n + j]
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut y = self.forward(b);
        self.backward_in_place(&mut y);
        y
    }

    /// Solves `L y = b`.
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let row = &self.lower[i * n..i * n + i];
            y[i] = (y[i] - dot(row, &y[..i])) / self.lower[i * n + i];
        }
        y
    }

    /// Solves `L^T x = y` in place.
    pub fn backward_in_place(&self, y: &mut [f64]) {
        let n = self.n;
        for i in (0..n).rev() {
            y[i] /= self.lower[i * n + i];
            let yi = y[i];
            let row = &self.lower[i * n..i * n + i];
            for (yj, lij) in y[..i].iter_mut().zip(row) {
                *yj -= lij * yi;
            }
        }
    }

    /// `log det A = 2 sum log L_ii`.
    pub fn log_det(&self) -> f64 {
        (0..self.n).map(|i| self.lower[i * self.n + i].ln()).sum::<f64>() * 2.0
    }

    /// `(max L_ii / min L_ii)^2`, a lower bound on the spectral condition number.
    pub fn pivot_ratio(&self) -> f64 {
        let (lo, hi) = (0..self.n).fold((f64::INFINITY, 0.0_f64), |(lo, hi), i| {
            let d = self.lower[i * self.n + i];
            (lo.min(d), hi.max(d))
        });
        (hi / lo).powi(2)
    }

    /// `L L^T` as a dense matrix.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.n;
        let mut m = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let v = dot(&self.lower[i * n..i * n + j + 1], &self.lower[j * n..j * n + j + 1]);
                m.set(i, j, v);
                m.set(j, i, v);
            }
        }
        m
    }
}

fn check_symmetric(a: &Matrix) -> Result<()> {
    let asym = a.relative_asymmetry();
    if asym > 1e-12 {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

/// Blocked right-looking Cholesky factorization of a symmetric matrix.
/// Only the lower triangle of `a` is read.
pub fn cholesky(a: &Matrix) -> Result<SpdFactorization> {
    check_symmetric(a)?;
    let n = a.n;
    let mut l = a.data.clone();
    for k0 in (0..n).step_by(BLOCK) {
        let kb = BLOCK.min(n - k0);
        // diagonal block, unblocked
        for j in k0..k0 + kb {
            let rj = j * n;
            let s = dot(&l[rj + k0..rj + j], &l[rj + k0..rj + j]);
            let pivot = l[rj + j] - s;
            if !(pivot > 0.0) {
                return Err(Error::NotPositiveDefinite { index: j, pivot });
            }
            let d = pivot.sqrt();
            l[rj + j] = d;
            for i in (j + 1)..(k0 + kb) {
                let ri = i * n;
                let s = dot(&l[ri + k0..ri + j], &l[rj + k0..rj + j]);
                l[ri + j] = (l[ri + j] - s) / d;
            }
        }
        // panel below the diagonal block: rows solve against L_kk^T
        for i in (k0 + kb)..n {
            let ri = i * n;
            for j in k0..k0 + kb {
                let rj = j * n;
                let s = dot(&l[ri + k0..ri + j], &l[rj + k0..rj + j]);
                l[ri + j] = (l[ri + j] - s) / l[rj + j];
            }
        }
        // trailing update of the lower triangle, one row block at a time
        let t0 = k0 + kb;
        let mut i0 = t0;
        while i0 < n {
            let ib = BLOCK.min(n - i0);
            let cols = i0 + ib - t0;
            let (head, tail) = l.split_at_mut(i0 * n);
            // panel rows for the columns being updated live in `head` (rows t0..i0)
            // and in `tail` (rows i0..i0+ib); copy the needed slab to avoid aliasing
            let mut panel_cols = vec![0.0; cols * kb];
            for (r, dst) in panel_cols.chunks_exact_mut(kb).enumerate() {
                let row = t0 + r;
                let src = if row < i0 { &head[row * n + k0..row * n + k0 + kb] } else { &tail[(row - i0) * n + k0..(row - i0) * n + k0 + kb] };
                dst.copy_from_slice(src);
            }
            let panel_rows = &panel_cols[(i0 - t0) * kb..];
            let panel_rows = panel_rows.to_vec();
            gemm_nt(ib, kb, cols, -1.0, &panel_rows, kb, &panel_cols, kb, &mut tail[t0..], n);
            i0 += ib;
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            l[i * n + j] = 0.0;
        }
    }
    Ok(SpdFactorization { n, lower: l })
}

/// Result of [`cholesky_solve`].
#[derive(Clone, Debug)]
pub struct SpdSolution {
    pub x: Vec<f64>,
    /// `||A x - b|| / ||b||`.
    pub relative_residual: f64,
    pub warning: Option<String>,
}

/// Pivot-ratio bound above which a solve is flagged as ill-conditioned.
pub const SOLVE_COND_LIMIT: f64 = 1e10;

/// Solves `A x = b` for symmetric positive definite `A`.
pub fn cholesky_solve(a: &Matrix, b: &[f64]) -> Result<SpdSolution> {
    if b.len() != a.n {
        return Err(Error::Dimension(format!("rhs has length {}, matrix is {}x{}", b.len(), a.n, a.n)));
    }
    let f = cholesky(a)?;
    let x = f.solve(b);
    let ax = a.matvec(&x);
    let r: Vec<f64> = ax.iter().zip(b).map(|(p, q)| p - q).collect();
    let bn = norm2(b);
    let relative_residual = if bn == 0.0 { norm2(&r) } else { norm2(&r) / bn };
    let ratio = f.pivot_ratio();
    let warning = if ratio > SOLVE_COND_LIMIT || relative_residual > 1e-10 {
        Some(format!(
            "ill-conditioned system: pivot ratio {ratio:.3e}, relative residual {relative_residual:.3e}"
        ))
    } else {
        None
    };
    Ok(SpdSolution { x, relative_residual, warning })
}

/// All eigenvalues of a small symmetric matrix (row-major `n x n`), ascending,
/// by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(a: &[f64], n: usize) -> Result<Vec<f64>> {
    let m = Matrix::from_row_major(n, a.to_vec())?;
    check_symmetric(&m)?;
    let mut eig = jacobi(m, 1e-12)?;
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// Cyclic Jacobi; stops when the off-diagonal Frobenius norm is at most
/// `tol * ||A||_F`. Returns the (unsorted) diagonal.
fn jacobi(mut m: Matrix, tol: f64) -> Result<Vec<f64>> {
    let n = m.n;
    let fro = m.frobenius();
    if n <= 1 || fro == 0.0 {
        return Ok((0..n).map(|i| m.get(i, i)).collect());
    }
    let target = tol * fro;
    let a = &mut m.data;
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += 2.0 * a[i * n + j] * a[i * n + j];
            }
        }
        if off.sqrt() <= target {
            return Ok((0..n).map(|i| a[i * n + i]).collect());
        }
        // entries below target / n cannot keep the off-diagonal norm above target
        let skip = target / n as f64;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() < skip {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta == 0.0 { 1.0 } else { theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt()) };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // rows p and q
                for k in 0..n {
                    let akp = a[p * n + k];
                    let akq = a[q * n + k];
                    a[p * n + k] = c * akp - s * akq;
                    a[q * n + k] = s * akp + c * akq;
                }
                // columns p and q
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
            }
        }
    }
    Err(Error::NoConvergence("Jacobi eigenvalue sweeps".into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpectrumMethod {
    Dense,
    Iterative,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectrumEstimate {
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub cond: f64,
    pub method: SpectrumMethod,
    /// False if an iterative estimate hit its iteration cap.
    pub converged: bool,
}

/// Largest size handled by the dense eigensolver.
pub const DENSE_EIGEN_LIMIT: usize = 1500;

/// `cond_2(A) = lambda_max / lambda_min`.
pub fn condition_number(a: &Matrix) -> Result<SpectrumEstimate> {
    check_symmetric(a)?;
    let factor = cholesky(a)?;
    if a.n <= DENSE_EIGEN_LIMIT {
        let eig = jacobi(a.clone(), 1e-12)?;
        let lambda_max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lambda_min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        return Ok(SpectrumEstimate {
            lambda_max,
            lambda_min,
            cond: lambda_max / lambda_min,
            method: SpectrumMethod::Dense,
            converged: true,
        });
    }
    let (lambda_max, ok_max) = power_iteration(a.n, |x| a.matvec(x), 1e-8, 10_000);
    let (inv, ok_min) = power_iteration(a.n, |x| factor.solve(x), 1e-8, 10_000);
    let lambda_min = 1.0 / inv;
    Ok(SpectrumEstimate {
        lambda_max,
        lambda_min,
        cond: lambda_max / lambda_min,
        method: SpectrumMethod::Iterative,
        converged: ok_max && ok_min,
    })
}

/// Dominant eigenvalue of a symmetric positive operator by power iteration
/// with Rayleigh quotients. Returns the estimate and a convergence flag.
fn power_iteration(n: usize, apply: impl Fn(&[f64]) -> Vec<f64>, tol: f64, max_iter: usize) -> (f64, bool) {
    // deterministic start with no special alignment to the lattice ordering
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i as f64) * 0.618_033_988_75).fract()).collect();
    let nx = norm2(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let y = apply(&x);
        let next = dot(&x, &y);
        let ny = norm2(&y);
        if ny == 0.0 {
            return (0.0, true);
        }
        x = y.into_iter().map(|v| v / ny).collect();
        if (next - lambda).abs() <= tol * next.abs() {
            return (next, true);
        }
        lambda = next;
    }
    (lambda, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spd(n: usize, seed: u64) -> Matrix {
        // A = M^T M + I with a simple LCG fill
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let m: Vec<f64> = (0..n * n).map(|_| next()).collect();
        let mut a = Matrix::identity(n);
        for i in 0..n {
            for j in 0..n {
                let mut v = 0.0;
                for k in 0..n {
                    v += m[k * n + i] * m[k * n + j];
                }
                a.data[i * n + j] += v;
            }
        }
        a
    }

    #[test]
    fn trivial_solves() {
        let s = cholesky_solve(&Matrix::identity(3), &[1.0, -2.0, 3.0]).unwrap();
        assert_eq!(s.x, vec![1.0, -2.0, 3.0]);
        let s = cholesky_solve(&Matrix::from_diagonal(&[2.0, 8.0]), &[2.0, 16.0]).unwrap();
        assert_relative_eq!(s.x[0], 1.0);
        assert_relative_eq!(s.x[1], 2.0);
        assert!(s.warning.is_none());
    }

    #[test]
    fn blocked_factor_reconstructs() {
        for &n in &[1, 5, 95, 96, 97, 250] {
            let a = spd(n, n as u64);
            let f = cholesky(&a).unwrap();
            let mut diff = f.reconstruct();
            diff.data.iter_mut().zip(&a.data).for_each(|(d, a)| *d -= a);
            assert!(diff.frobenius() <= 1e-12 * a.frobenius(), "n = {n}");
        }
    }

    #[test]
    fn failure_modes_are_distinct() {
        let asym = Matrix::from_row_major(2, vec![1.0, 0.5, 0.0, 1.0]).unwrap();
        assert!(matches!(cholesky_solve(&asym, &[1.0, 1.0]), Err(Error::NotSymmetric(_))));
        let indefinite = Matrix::from_row_major(2, vec![1.0, 2.0, 2.0, 1.0]).unwrap();
        assert!(matches!(cholesky_solve(&indefinite, &[1.0, 1.0]), Err(Error::NotPositiveDefinite { index: 1, .. })));
    }

    #[test]
    fn condition_of_simple_matrices() {
        let e = condition_number(&Matrix::identity(4)).unwrap();
        assert_relative_eq!(e.cond, 1.0, max_relative = 1e-14);
        let e = condition_number(&Matrix::from_diagonal(&[1.0, 4.0])).unwrap();
        assert_relative_eq!(e.lambda_min, 1.0);
        assert_relative_eq!(e.lambda_max, 4.0);
        assert_relative_eq!(e.cond, 4.0);
        assert_eq!(e.method, SpectrumMethod::Dense);
        let e = condition_number(&Matrix::from_diagonal(&[3.0])).unwrap();
        assert_eq!(e.cond, 1.0);
    }

    #[test]
    fn jacobi_trace_and_determinant() {
        let a = spd(30, 7);
        let eig = jacobi_eigenvalues(&a.data, 30).unwrap();
        let sum: f64 = eig.iter().sum();
        assert_relative_eq!(sum, a.trace(), max_relative = 1e-10);
        let log_prod: f64 = eig.iter().map(|v| v.ln()).sum();
        let f = cholesky(&a).unwrap();
        assert_relative_eq!(log_prod.exp(), f.log_det().exp(), max_relative = 1e-8);
    }

    #[test]
    fn iterative_estimate_agrees_with_dense() {
        let a = spd(60, 3);
        let dense = condition_number(&a).unwrap();
        let f = cholesky(&a).unwrap();
        let (lmax, ok1) = power_iteration(60, |x| a.matvec(x), 1e-12, 100_000);
        let (inv, ok2) = power_iteration(60, |x| f.solve(x), 1e-12, 100_000);
        assert!(ok1 && ok2);
        assert_relative_eq!(lmax, dense.lambda_max, max_relative = 1e-6);
        assert_relative_eq!(1.0 / inv, dense.lambda_min, max_relative = 1e-6);
    }
}
