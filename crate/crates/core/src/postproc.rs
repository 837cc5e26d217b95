//! Discrete solutions, error norms and convergence orders.

use std::sync::Arc;

use crate::assembly::{Difference, LsqSystem, OperatorImage, TrialBasis};
use crate::error::{Error, Result};
use crate::geometry::{DiskDomain, NodeSet, PointSet};
use crate::kernel::{apply_with, KernelSpec};
use crate::linalg::{cholesky, Matrix};
use crate::problem::{EllipticOperator, ManufacturedProblem};

/// Lattice step of the interior evaluation set (about 7.5e3 points in the unit disk).
pub const EVAL_SPACING: f64 = 0.0204;
/// Equispaced boundary evaluation points.
pub const EVAL_BOUNDARY_POINTS: usize = 1000;

/// `u^h = sum_j c_j Phi(. - x_j)` together with the operator used to form its image.
#[derive(Clone, Debug)]
pub struct DiscreteSolution {
    pub coefficients: Vec<f64>,
    basis: Arc<TrialBasis>,
    op: EllipticOperator,
}

impl DiscreteSolution {
    pub fn new(basis: Arc<TrialBasis>, op: EllipticOperator, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != basis.len() {
            return Err(Error::Dimension(format!(
                "{} coefficients for {} basis functions",
                coefficients.len(),
                basis.len()
            )));
        }
        if op.dim() != basis.spec().dim() {
            return Err(Error::Dimension("operator and kernel dimensions differ".into()));
        }
        Ok(Self { coefficients, basis, op })
    }

    /// Solution of an assembled system.
    pub fn from_system(system: &LsqSystem, coefficients: Vec<f64>) -> Result<Self> {
        Self::new(Arc::clone(system.basis()), system.operator().clone(), coefficients)
    }

    pub fn basis(&self) -> &Arc<TrialBasis> {
        &self.basis
    }

    pub fn evaluate(&self, points: &PointSet) -> Vec<f64> {
        self.basis.combine_values(&self.coefficients, points.iter())
    }

    pub fn evaluate_image(&self, points: &PointSet) -> Vec<f64> {
        self.basis.combine_images(&self.op, &self.coefficients, points.iter())
    }
}

impl OperatorImage for DiscreteSolution {
    fn value(&self, x: &[f64]) -> f64 {
        self.basis.combine_values(&self.coefficients, std::iter::once(x))[0]
    }

    fn image(&self, x: &[f64]) -> f64 {
        let coeffs = self.op.coefficients_at(x);
        let mut scratch = vec![0.0; x.len()];
        let profile = self.basis.profile();
        self.basis
            .nodes()
            .points()
            .iter()
            .zip(&self.coefficients)
            .map(|(c, w)| w * apply_with(profile, &coeffs, c, x, &mut scratch))
            .sum()
    }

    fn values(&self, points: &mut dyn Iterator<Item = &[f64]>) -> Vec<f64> {
        self.basis.combine_values(&self.coefficients, points)
    }

    fn images(&self, points: &mut dyn Iterator<Item = &[f64]>) -> Vec<f64> {
        self.basis.combine_images(&self.op, &self.coefficients, points)
    }
}

/// Point sets on which RMS errors are measured.
#[derive(Clone, Debug)]
pub struct EvaluationSets {
    pub interior: PointSet,
    pub boundary: PointSet,
}

impl EvaluationSets {
    pub fn new(interior: PointSet, boundary: PointSet) -> Result<Self> {
        if interior.is_empty() || boundary.is_empty() {
            return Err(Error::Domain("evaluation sets must be nonempty".into()));
        }
        Ok(Self { interior, boundary })
    }

    /// Lattice of step [`EVAL_SPACING`] and [`EVAL_BOUNDARY_POINTS`] boundary points.
    pub fn standard(domain: &DiskDomain) -> Self {
        let scale = domain.radius;
        Self {
            interior: domain.lattice(EVAL_SPACING * scale),
            boundary: domain.boundary_points(EVAL_BOUNDARY_POINTS),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorReport {
    /// RMS of `u* - u^h` over the interior evaluation set.
    pub l2_rms: f64,
    /// RMS of `u* - u^h` over the boundary evaluation set.
    pub bdry_l2: f64,
    /// `||L(u* - u^h)||` on the domain, by quadrature.
    pub residual_l2: f64,
    /// `||u* - u^h||` on the boundary, by the same boundary rule as assembly.
    pub bdry_l2_quadrature: f64,
    /// `|||u* - u^h|||`.
    pub energy: f64,
    pub h: f64,
    pub n: usize,
    pub cond: Option<f64>,
}

fn rms(a: &[f64], b: &[f64]) -> f64 {
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (s / a.len() as f64).sqrt()
}

/// Errors of `sol` against the manufactured truth.
pub fn error_report(
    sol: &DiscreteSolution,
    problem: &ManufacturedProblem,
    eval: &EvaluationSets,
    system: &LsqSystem,
) -> ErrorReport {
    let exact_in: Vec<f64> = eval.interior.iter().map(|x| problem.u(x)).collect();
    let exact_bd: Vec<f64> = eval.boundary.iter().map(|x| problem.u(x)).collect();
    let l2_rms = rms(&exact_in, &sol.evaluate(&eval.interior));
    let bdry_l2 = rms(&exact_bd, &sol.evaluate(&eval.boundary));

    let err = Difference(problem, sol);
    let q_in = system.interior_rule();
    let q_bd = system.boundary_rule();
    let le = err.images(&mut q_in.nodes.iter());
    let residual_sq: f64 = q_in.weights.iter().zip(&le).map(|(w, v)| w * v * v).sum();
    let be = err.values(&mut q_bd.nodes.iter());
    let bdry_sq: f64 = q_bd.weights.iter().zip(&be).map(|(w, v)| w * v * v).sum();
    let energy = (residual_sq + system.boundary_weight * bdry_sq).sqrt();
    ErrorReport {
        l2_rms,
        bdry_l2,
        residual_l2: residual_sq.sqrt(),
        bdry_l2_quadrature: bdry_sq.sqrt(),
        energy,
        h: system.h(),
        n: sol.coefficients.len(),
        cond: None,
    }
}

/// `p = log(e1/e2) / log(h1/h2)`.
pub fn convergence_order(e1: f64, e2: f64, h1: f64, h2: f64) -> Result<f64> {
    if !(e1 > 0.0 && e2 > 0.0 && h1 > 0.0 && h2 > 0.0) {
        return Err(Error::Domain(format!(
            "convergence order needs positive inputs, got e = ({e1}, {e2}), h = ({h1}, {h2})"
        )));
    }
    if h1 == h2 {
        return Err(Error::Domain("convergence order needs distinct h".into()));
    }
    Ok((e1 / e2).ln() / (h1 / h2).ln())
}

/// Kernel interpolant of `target` on `nodes`: solves `B c = target(X)` with
/// `B_kj = Phi(x_k - x_j)`.
pub fn interpolate(
    spec: KernelSpec,
    nodes: NodeSet,
    op: EllipticOperator,
    target: impl Fn(&[f64]) -> f64,
) -> Result<DiscreteSolution> {
    let basis = Arc::new(TrialBasis::new(spec, nodes)?);
    let n = basis.len();
    let pts = basis.nodes().points();
    let mut b = Matrix::zeros(n);
    let mut row = vec![0.0; n];
    for i in 0..n {
        basis.values_at(pts.point(i), &mut row);
        for j in 0..=i {
            b.set(i, j, row[j]);
        }
    }
    b.mirror_lower();
    let rhs: Vec<f64> = pts.iter().map(&target).collect();
    let c = cholesky(&b)?.solve(&rhs);
    DiscreteSolution::new(basis, op, c)
}
