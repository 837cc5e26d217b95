//! Second-order elliptic operators and manufactured Dirichlet problems.
//!
//! An operator has the non-divergence form
//! `L u = -sum_ij a_ij D_i D_j u + sum_i b_i D_i u + c u`.

use std::borrow::Cow;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::linalg;

/// Coefficients of `L` at one point. `a` is row-major `d x d`.
#[derive(Clone, Debug, PartialEq)]
pub struct Coefficients {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: f64,
}

impl Coefficients {
    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn trace_a(&self) -> f64 {
        let d = self.dim();
        (0..d).map(|i| self.a[i * d + i]).sum()
    }

    /// `v^T a v`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        let d = self.dim();
        let mut s = 0.0;
        for i in 0..d {
            let row = &self.a[i * d..(i + 1) * d];
            let mut t = 0.0;
            for j in 0..d {
                t += row[j] * v[j];
            }
            s += v[i] * t;
        }
        s
    }

    pub fn dot_b(&self, v: &[f64]) -> f64 {
        self.b.iter().zip(v).map(|(b, v)| b * v).sum()
    }

    /// Applies `L` to a function whose value, gradient and row-major Hessian at
    /// the point are given.
    pub fn apply(&self, value: f64, grad: &[f64], hess: &[f64]) -> f64 {
        let second: f64 = self.a.iter().zip(hess).map(|(a, h)| a * h).sum();
        -second + self.dot_b(grad) + self.c * value
    }

    fn asymmetry(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0_f64;
        for i in 0..d {
            for j in 0..i {
                worst = worst.max((self.a[i * d + j] - self.a[j * d + i]).abs());
            }
        }
        worst
    }
}

type CoefficientFn = dyn Fn(&[f64]) -> Coefficients + Send + Sync;

#[derive(Clone)]
enum Field {
    Constant(Coefficients),
    Variable(Arc<CoefficientFn>),
}

/// A linear second-order operator with (possibly variable) coefficients.
#[derive(Clone)]
pub struct EllipticOperator {
    dim: usize,
    field: Field,
}

impl fmt::Debug for EllipticOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.field {
            Field::Constant(c) => f.debug_struct("EllipticOperator").field("constant", c).finish(),
            Field::Variable(_) => f.debug_struct("EllipticOperator").field("dim", &self.dim).finish_non_exhaustive(),
        }
    }
}

impl EllipticOperator {
    pub fn constant(a: Vec<f64>, b: Vec<f64>, c: f64) -> Result<Self> {
        let dim = b.len();
        if dim == 0 || a.len() != dim * dim {
            return Err(Error::Dimension(format!("a must be {dim}x{dim}, got {} entries", a.len())));
        }
        let coeffs = Coefficients { a, b, c };
        if coeffs.asymmetry() > 0.0 {
            return Err(Error::NotSymmetric(coeffs.asymmetry()));
        }
        Ok(Self { dim, field: Field::Constant(coeffs) })
    }

    /// Variable coefficients. Symmetry of `a` is checked at every call of
    /// [`EllipticOperator::coefficients_at`] in debug builds and by
    /// [`EllipticOperator::check_ellipticity`].
    pub fn variable(dim: usize, field: impl Fn(&[f64]) -> Coefficients + Send + Sync + 'static) -> Self {
        Self { dim, field: Field::Variable(Arc::new(field)) }
    }

    /// `c u` (a = 0, b = 0).
    pub fn scaled_identity(dim: usize, c: f64) -> Self {
        Self::constant(vec![0.0; dim * dim], vec![0.0; dim], c).expect("well-formed coefficients")
    }

    /// `-Laplace u`.
    pub fn negative_laplacian(dim: usize) -> Self {
        let mut a = vec![0.0; dim * dim];
        for i in 0..dim {
            a[i * dim + i] = 1.0;
        }
        Self::constant(a, vec![0.0; dim], 0.0).expect("well-formed coefficients")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.field, Field::Constant(_))
    }

    pub fn coefficients_at(&self, x: &[f64]) -> Cow<'_, Coefficients> {
        match &self.field {
            Field::Constant(c) => Cow::Borrowed(c),
            Field::Variable(f) => {
                let c = f(x);
                debug_assert_eq!(c.asymmetry(), 0.0, "a(x) must be symmetric");
                Cow::Owned(c)
            }
        }
    }

    /// Applies `L` at `x` to a function with the given value, gradient and Hessian.
    pub fn apply(&self, x: &[f64], value: f64, grad: &[f64], hess: &[f64]) -> f64 {
        self.coefficients_at(x).apply(value, grad, hess)
    }

    /// Spot-checks symmetry and uniform ellipticity of `a` at `samples`
    /// deterministic points of the domain. Returns the smallest eigenvalue seen.
    pub fn check_ellipticity(&self, domain: &dyn Domain, floor: f64, samples: usize) -> Result<f64> {
        let mut lowest = f64::INFINITY;
        for x in domain.sample_points(samples) {
            let c = self.coefficients_at(&x);
            if c.asymmetry() > 0.0 {
                return Err(Error::NotSymmetric(c.asymmetry()));
            }
            let eig = linalg::jacobi_eigenvalues(&c.a, self.dim)?;
            let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
            lowest = lowest.min(min);
        }
        if lowest < floor {
            return Err(Error::Domain(format!(
                "operator is not uniformly elliptic: smallest eigenvalue of a(x) is {lowest:.3e} < {floor:.3e}"
            )));
        }
        Ok(lowest)
    }
}

/// `L u = -Laplace u + du/dx1 + du/dx2 + u` on the plane.
pub fn benchmark_operator() -> EllipticOperator {
    EllipticOperator::constant(vec![1.0, 0.0, 0.0, 1.0], vec![1.0, 1.0], 1.0).expect("well-formed coefficients")
}

/// A smooth function with analytic value, gradient and Hessian.
pub trait ExactSolution: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], out: &mut [f64]);
    /// Row-major `d x d`.
    fn hessian(&self, x: &[f64], out: &mut [f64]);
}

/// `u(x) = ||x||^kappa`.
#[derive(Clone, Copy, Debug)]
pub struct RadialPower {
    pub kappa: f64,
    pub dim: usize,
}

impl ExactSolution for RadialPower {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        norm(x).powf(self.kappa)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let r = norm(x);
        let s = if r == 0.0 { 0.0 } else { self.kappa * r.powf(self.kappa - 2.0) };
        for (o, xi) in out.iter_mut().zip(x) {
            *o = s * xi;
        }
    }

    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let k = self.kappa;
        let r = norm(x);
        out.iter_mut().for_each(|v| *v = 0.0);
        if r == 0.0 {
            if k == 2.0 {
                for i in 0..d {
                    out[i * d + i] = 2.0;
                }
            }
            return;
        }
        let diag = k * r.powf(k - 2.0);
        let outer = k * (k - 2.0) * r.powf(k - 4.0);
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = outer * x[i] * x[j];
            }
            out[i * d + i] += diag;
        }
    }
}

/// `u(x) = sum_i w_i u_i(x)`.
pub struct Combination {
    pub terms: Vec<(f64, Arc<dyn ExactSolution>)>,
}

impl ExactSolution for Combination {
    fn dim(&self) -> usize {
        self.terms.first().map_or(0, |t| t.1.dim())
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(w, u)| w * u.value(x)).sum()
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let mut tmp = vec![0.0; out.len()];
        out.iter_mut().for_each(|v| *v = 0.0);
        for (w, u) in &self.terms {
            u.gradient(x, &mut tmp);
            out.iter_mut().zip(&tmp).for_each(|(o, t)| *o += w * t);
        }
    }

    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let mut tmp = vec![0.0; out.len()];
        out.iter_mut().for_each(|v| *v = 0.0);
        for (w, u) in &self.terms {
            u.hessian(x, &mut tmp);
            out.iter_mut().zip(&tmp).for_each(|(o, t)| *o += w * t);
        }
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Dirichlet problem `L u = f` in the domain, `u = g` on its boundary, built
/// from a known solution so errors can be measured exactly.
#[derive(Clone)]
pub struct ManufacturedProblem {
    op: EllipticOperator,
    solution: Arc<dyn ExactSolution>,
    /// Exponent of the radial power family, if that is what this is.
    pub kappa: Option<f64>,
    /// `u in H^k` for every `k` strictly below this bound (`None` if smooth).
    pub sobolev_bound: Option<f64>,
}

impl fmt::Debug for ManufacturedProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ManufacturedProblem")
            .field("op", &self.op)
            .field("kappa", &self.kappa)
            .field("sobolev_bound", &self.sobolev_bound)
            .finish_non_exhaustive()
    }
}

impl ManufacturedProblem {
    pub fn new(op: EllipticOperator, solution: Arc<dyn ExactSolution>) -> Result<Self> {
        if op.dim() != solution.dim() {
            return Err(Error::Dimension(format!(
                "operator acts in dimension {}, solution lives in dimension {}",
                op.dim(),
                solution.dim()
            )));
        }
        Ok(Self { op, solution, kappa: None, sobolev_bound: None })
    }

    pub fn operator(&self) -> &EllipticOperator {
        &self.op
    }

    pub fn solution(&self) -> &Arc<dyn ExactSolution> {
        &self.solution
    }

    pub fn u(&self, x: &[f64]) -> f64 {
        self.solution.value(x)
    }

    /// Forcing `f = L u`.
    pub fn f(&self, x: &[f64]) -> f64 {
        let d = self.op.dim();
        let mut grad = vec![0.0; d];
        let mut hess = vec![0.0; d * d];
        self.solution.gradient(x, &mut grad);
        self.solution.hessian(x, &mut hess);
        self.op.apply(x, self.solution.value(x), &grad, &hess)
    }

    /// Dirichlet data: the trace of `u`.
    pub fn g(&self, x: &[f64]) -> f64 {
        self.solution.value(x)
    }
}

/// `u = ||x||^kappa` with the given operator; requires `kappa >= 2`.
pub fn radial_power_solution(kappa: f64, op: EllipticOperator) -> Result<ManufacturedProblem> {
    if !(kappa >= 2.0) {
        return Err(Error::Domain(format!("radial power solution needs kappa >= 2, got {kappa}")));
    }
    let dim = op.dim();
    let mut p = ManufacturedProblem::new(op, Arc::new(RadialPower { kappa, dim }))?;
    p.kappa = Some(kappa);
    p.sobolev_bound = Some(kappa + dim as f64 / 2.0);
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DiskDomain;
    use approx::assert_relative_eq;

    struct Affine;
    impl ExactSolution for Affine {
        fn dim(&self) -> usize {
            2
        }
        fn value(&self, x: &[f64]) -> f64 {
            x[0]
        }
        fn gradient(&self, _: &[f64], out: &mut [f64]) {
            out.copy_from_slice(&[1.0, 0.0]);
        }
        fn hessian(&self, _: &[f64], out: &mut [f64]) {
            out.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    #[test]
    fn benchmark_operator_on_simple_functions() {
        let op = benchmark_operator();
        assert_eq!(op.apply(&[0.3, -0.2], 1.0, &[0.0, 0.0], &[0.0; 4]), 1.0);
        let p = ManufacturedProblem::new(op.clone(), Arc::new(Affine)).unwrap();
        for x in [[0.1, 0.2], [-0.5, 0.4]] {
            assert_relative_eq!(p.f(&x), 1.0 + x[0], max_relative = 1e-15);
        }
        let p = radial_power_solution(4.0, op).unwrap();
        for x in [[0.1, 0.2], [-0.5, 0.4], [0.7, -0.1]] {
            let r2 = x[0] * x[0] + x[1] * x[1];
            let f = -16.0 * r2 + 4.0 * r2 * (x[0] + x[1]) + r2 * r2;
            assert_relative_eq!(p.f(&x), f, max_relative = 1e-13);
        }
    }

    #[test]
    fn radial_power_kappa_two() {
        let p = radial_power_solution(2.0, benchmark_operator()).unwrap();
        for x in [[0.0, 0.0], [0.3, 0.4], [-0.2, 0.9]] {
            let r2 = x[0] * x[0] + x[1] * x[1];
            assert_relative_eq!(p.f(&x), -4.0 + 2.0 * (x[0] + x[1]) + r2, max_relative = 1e-14);
        }
    }

    #[test]
    fn radial_power_metadata_and_trace() {
        let p = radial_power_solution(4.0, benchmark_operator()).unwrap();
        assert_eq!(p.sobolev_bound, Some(5.0));
        for k in 0..16 {
            let t = k as f64 * 0.4;
            assert_relative_eq!(p.g(&[t.cos(), t.sin()]), 1.0, max_relative = 1e-14);
        }
        assert!(radial_power_solution(1.5, benchmark_operator()).is_err());
    }

    #[test]
    fn ellipticity_check() {
        let disk = DiskDomain::unit();
        let lo = benchmark_operator().check_ellipticity(&disk, 0.5, 100).unwrap();
        assert_relative_eq!(lo, 1.0, max_relative = 1e-12);
        let degenerate = EllipticOperator::variable(2, |x| Coefficients {
            a: vec![1.0, 0.0, 0.0, x[0]],
            b: vec![0.0, 0.0],
            c: 0.0,
        });
        assert!(degenerate.check_ellipticity(&disk, 1e-3, 100).is_err());
        assert!(EllipticOperator::constant(vec![1.0, 0.5, 0.0, 1.0], vec![0.0, 0.0], 0.0).is_err());
    }
}
