//! Discrete least-squares system `A c = b` with
//!
//! ```text
//! A_ij = (L phi_i, L phi_j)_Omega + h^{-3} (phi_i, phi_j)_dOmega
//! b_i  = (L phi_i, f)_Omega       + h^{-3} (phi_i, g)_dOmega
//! ```
//!
//! evaluated with fixed interior and boundary quadrature rules. Basis values
//! are generated in chunks of quadrature points, scaled by the square roots of
//! the weights, and accumulated into the lower triangle of `A` with a
//! rank-`chunk` product; the upper triangle is a bitwise mirror.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{DiskDomain, NodeSet, PointSet};
use crate::kernel::{apply_with, KernelSpec, TabulatedProfile};
use crate::linalg::{dot, gemm_nt, Matrix};
use crate::problem::{Coefficients, EllipticOperator, ManufacturedProblem};
use crate::quadrature::{QuadratureResolution, QuadratureRule};

/// Quadrature points per chunk.
const CHUNK: usize = 256;
/// Row block for the triangular rank-k update.
const ROW_BLOCK: usize = 256;

/// Default exponent `s` in the boundary weight `h^{-s}`.
pub const DEFAULT_WEIGHT_EXPONENT: f64 = 3.0;

/// Shifted kernels `Phi(. - x_j)` over a node set.
#[derive(Clone, Debug)]
pub struct TrialBasis {
    spec: KernelSpec,
    nodes: NodeSet,
    profile: TabulatedProfile,
}

impl TrialBasis {
    pub fn new(spec: KernelSpec, nodes: NodeSet) -> Result<Self> {
        if nodes.points().dim() != spec.dim() {
            return Err(Error::Dimension(format!(
                "nodes live in dimension {}, kernel in dimension {}",
                nodes.points().dim(),
                spec.dim()
            )));
        }
        // large enough for any pair of points in a disk of radius 1.5
        let profile = TabulatedProfile::new(spec, 3.0)?;
        Ok(Self { spec, nodes, profile })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn nodes(&self) -> &NodeSet {
        &self.nodes
    }

    pub fn profile(&self) -> &TabulatedProfile {
        &self.profile
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `out[j] = phi_j(x)`.
    pub fn values_at(&self, x: &[f64], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(self.nodes.points().iter()) {
            let r = c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            *o = self.profile.phi(r);
        }
    }

    /// `out[j] = (L phi_j)(x)` for coefficients of `L` at `x`.
    pub fn images_at(&self, coeffs: &Coefficients, x: &[f64], out: &mut [f64]) {
        let mut scratch = vec![0.0; self.spec.dim()];
        for (o, c) in out.iter_mut().zip(self.nodes.points().iter()) {
            *o = apply_with(&self.profile, coeffs, c, x, &mut scratch);
        }
    }

    /// `sum_j c_j phi_j(x)` at each point.
    pub fn combine_values<'a>(&self, coeffs: &[f64], points: impl Iterator<Item = &'a [f64]>) -> Vec<f64> {
        let mut row = vec![0.0; self.len()];
        points
            .map(|x| {
                self.values_at(x, &mut row);
                dot(&row, coeffs)
            })
            .collect()
    }

    /// `sum_j c_j (L phi_j)(x)` at each point.
    pub fn combine_images<'a>(
        &self,
        op: &EllipticOperator,
        coeffs: &[f64],
        points: impl Iterator<Item = &'a [f64]>,
    ) -> Vec<f64> {
        let mut row = vec![0.0; self.len()];
        points
            .map(|x| {
                self.images_at(&op.coefficients_at(x), x, &mut row);
                dot(&row, coeffs)
            })
            .collect()
    }
}

/// A function that can be evaluated together with its image under `L`.
pub trait OperatorImage {
    fn value(&self, x: &[f64]) -> f64;
    fn image(&self, x: &[f64]) -> f64;

    /// Values at many points; override for batched evaluation.
    fn values(&self, points: &mut dyn Iterator<Item = &[f64]>) -> Vec<f64> {
        points.map(|x| self.value(x)).collect()
    }

    /// Images at many points; override for batched evaluation.
    fn images(&self, points: &mut dyn Iterator<Item = &[f64]>) -> Vec<f64> {
        points.map(|x| self.image(x)).collect()
    }
}

impl OperatorImage for ManufacturedProblem {
    fn value(&self, x: &[f64]) -> f64 {
        self.u(x)
    }

    fn image(&self, x: &[f64]) -> f64 {
        self.f(x)
    }
}

/// The zero function.
pub struct Zero;

impl OperatorImage for Zero {
    fn value(&self, _: &[f64]) -> f64 {
        0.0
    }

    fn image(&self, _: &[f64]) -> f64 {
        0.0
    }
}

/// `u - v`.
pub struct Difference<'a>(pub &'a dyn OperatorImage, pub &'a dyn OperatorImage);

impl OperatorImage for Difference<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        self.0.value(x) - self.1.value(x)
    }

    fn image(&self, x: &[f64]) -> f64 {
        self.0.image(x) - self.1.image(x)
    }

    fn values(&self, points: &mut dyn Iterator<Item = &[f64]>) -> Vec<f64> {
        let pts: Vec<&[f64]> = points.collect();
        let a = self.0.values(&mut pts.iter().copied());
        let b = self.1.values(&mut pts.iter().copied());
        a.iter().zip(&b).map(|(a, b)| a - b).collect()
    }

    fn images(&self, points: &mut dyn Iterator<Item = &[f64]>) -> Vec<f64> {
        let pts: Vec<&[f64]> = points.collect();
        let a = self.0.images(&mut pts.iter().copied());
        let b = self.1.images(&mut pts.iter().copied());
        a.iter().zip(&b).map(|(a, b)| a - b).collect()
    }
}

/// The assembled system together with everything needed to reproduce its
/// inner products.
#[derive(Clone)]
pub struct LsqSystem {
    pub matrix: Matrix,
    /// `h^{-s}` with `h` the measured fill distance.
    pub boundary_weight: f64,
    pub weight_exponent: f64,
    basis: Arc<TrialBasis>,
    op: EllipticOperator,
    interior: QuadratureRule,
    boundary: QuadratureRule,
}

impl std::fmt::Debug for LsqSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LsqSystem")
            .field("n", &self.matrix.n())
            .field("boundary_weight", &self.boundary_weight)
            .field("interior_points", &self.interior.len())
            .field("boundary_points", &self.boundary.len())
            .finish()
    }
}

/// Interior and boundary parts of `A` kept apart.
#[derive(Clone, Debug)]
pub struct SystemTerms {
    /// `(L phi_i, L phi_j)_Omega`
    pub interior: Matrix,
    /// `(phi_i, phi_j)_dOmega`, unweighted.
    pub boundary: Matrix,
}

fn check_inputs(basis: &TrialBasis, op: &EllipticOperator, q_in: &QuadratureRule, q_bd: &QuadratureRule) -> Result<()> {
    if basis.spec().derivative_order() < 2 {
        return Err(Error::Domain(format!(
            "kernel with tau = {} has no classical second derivatives in dimension {}",
            basis.spec().tau(),
            basis.spec().dim()
        )));
    }
    let d = basis.spec().dim();
    if op.dim() != d || q_in.nodes.dim() != d || q_bd.nodes.dim() != d {
        return Err(Error::Dimension("operator, quadrature and kernel dimensions differ".into()));
    }
    Ok(())
}

/// Streams `sqrt(w_q) * row_j(x_q)` tables over chunks of a rule and hands
/// each `N x chunk` table (row-major) to `sink`. Rows are `L phi_j` when an
/// operator is given and `phi_j` otherwise.
fn stream_chunks(
    profile: &TabulatedProfile,
    centers: &PointSet,
    rule: &QuadratureRule,
    scale: f64,
    op: Option<&EllipticOperator>,
    mut sink: impl FnMut(&[f64], usize, std::ops::Range<usize>),
) {
    let n = centers.len();
    let q = rule.len();
    let mut table = vec![0.0; n * CHUNK];
    let mut scratch = vec![0.0; centers.dim()];
    let mut q0 = 0;
    while q0 < q {
        let width = CHUNK.min(q - q0);
        for k in 0..width {
            let x = rule.nodes.point(q0 + k);
            let sw = (scale * rule.weights[q0 + k]).sqrt();
            match op {
                Some(op) => {
                    let coeffs = op.coefficients_at(x);
                    for (j, c) in centers.iter().enumerate() {
                        table[j * width + k] = sw * apply_with(profile, &coeffs, c, x, &mut scratch);
                    }
                }
                None => {
                    for (j, c) in centers.iter().enumerate() {
                        let r = c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                        table[j * width + k] = sw * profile.phi(r);
                    }
                }
            }
        }
        sink(&table[..n * width], width, q0..q0 + width);
        q0 += width;
    }
}

/// `acc[lower] += T T^T` for a row-major `n x width` table.
fn accumulate_lower(acc: &mut Matrix, table: &[f64], width: usize) {
    let n = acc.n();
    let data = acc.as_mut_slice();
    let mut i0 = 0;
    while i0 < n {
        let ib = ROW_BLOCK.min(n - i0);
        let cols = i0 + ib;
        gemm_nt(ib, width, cols, 1.0, &table[i0 * width..], width, table, width, &mut data[i0 * n..], n);
        i0 += ib;
    }
}

fn gram(basis: &TrialBasis, rule: &QuadratureRule, scale: f64, op: Option<&EllipticOperator>, acc: &mut Matrix) {
    stream_chunks(&basis.profile, basis.nodes.points(), rule, scale, op, |table, width, _| {
        accumulate_lower(acc, table, width)
    });
}

/// Assembles `A` with boundary weight `h^{-3}`.
pub fn assemble_matrix(
    spec: KernelSpec,
    nodes: NodeSet,
    op: &EllipticOperator,
    q_in: &QuadratureRule,
    q_bd: &QuadratureRule,
) -> Result<LsqSystem> {
    assemble_matrix_weighted(spec, nodes, op, q_in, q_bd, DEFAULT_WEIGHT_EXPONENT)
}

/// Assembles `A` with boundary weight `h^{-weight_exponent}`.
pub fn assemble_matrix_weighted(
    spec: KernelSpec,
    nodes: NodeSet,
    op: &EllipticOperator,
    q_in: &QuadratureRule,
    q_bd: &QuadratureRule,
    weight_exponent: f64,
) -> Result<LsqSystem> {
    assemble_basis(Arc::new(TrialBasis::new(spec, nodes)?), op, q_in, q_bd, weight_exponent)
}

/// Assembles `A` for an existing basis.
pub fn assemble_basis(
    basis: Arc<TrialBasis>,
    op: &EllipticOperator,
    q_in: &QuadratureRule,
    q_bd: &QuadratureRule,
    weight_exponent: f64,
) -> Result<LsqSystem> {
    check_inputs(&basis, op, q_in, q_bd)?;
    let weight = basis.nodes().h_fill.powf(-weight_exponent);
    let mut matrix = Matrix::zeros(basis.len());
    gram(&basis, q_in, 1.0, Some(op), &mut matrix);
    gram(&basis, q_bd, weight, None, &mut matrix);
    matrix.mirror_lower();
    Ok(LsqSystem {
        matrix,
        boundary_weight: weight,
        weight_exponent,
        basis,
        op: op.clone(),
        interior: q_in.clone(),
        boundary: q_bd.clone(),
    })
}

/// Entries `A_ij`, `i, j in sample`, with boundary weight `weight` and the given rules.
pub fn sampled_entries(
    basis: &TrialBasis,
    op: &EllipticOperator,
    weight: f64,
    sample: &[usize],
    q_in: &QuadratureRule,
    q_bd: &QuadratureRule,
) -> Matrix {
    let mut centers = PointSet::new(basis.spec().dim(), Vec::new()).expect("empty point set");
    for &i in sample {
        centers.push(basis.nodes().points().point(i));
    }
    let mut acc = Matrix::zeros(sample.len());
    stream_chunks(&basis.profile, &centers, q_in, 1.0, Some(op), |t, w, _| accumulate_lower(&mut acc, t, w));
    stream_chunks(&basis.profile, &centers, q_bd, weight, None, |t, w, _| accumulate_lower(&mut acc, t, w));
    acc.mirror_lower();
    acc
}

/// Largest `|B_ij - A_ij| / sqrt(A_ii A_jj)` between two sampled matrices.
pub fn entry_drift(coarse: &Matrix, fine: &Matrix) -> f64 {
    let m = coarse.n();
    let mut worst = 0.0_f64;
    for i in 0..m {
        for j in 0..m {
            let scale = (coarse.get(i, i) * coarse.get(j, j)).sqrt();
            worst = worst.max((fine.get(i, j) - coarse.get(i, j)).abs() / scale);
        }
    }
    worst
}

/// `count` indices spread evenly over `0..n`.
pub fn spread_sample(n: usize, count: usize) -> Vec<usize> {
    if n <= count {
        return (0..n).collect();
    }
    let mut v: Vec<usize> = (0..count).map(|i| i * (n - 1) / (count - 1)).collect();
    v.dedup();
    v
}

/// Outcome of [`select_resolution`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResolutionChoice {
    pub resolution: QuadratureResolution,
    /// Drift of sampled entries when this resolution is doubled.
    pub drift: f64,
    pub converged: bool,
}

/// Doubles `start` until doubling it again moves sampled entries of `A` by at
/// most `tol` (relative to the diagonal), or `max_doublings` is reached.
pub fn select_resolution(
    basis: &TrialBasis,
    op: &EllipticOperator,
    domain: &DiskDomain,
    weight: f64,
    start: QuadratureResolution,
    tol: f64,
    max_doublings: usize,
) -> Result<ResolutionChoice> {
    let sample = spread_sample(basis.len(), 24);
    let mut res = start;
    let (qi, qb) = res.rules(domain)?;
    let mut current = sampled_entries(basis, op, weight, &sample, &qi, &qb);
    let mut doublings = 0;
    loop {
        let next = res.doubled();
        let (qi, qb) = next.rules(domain)?;
        let fine = sampled_entries(basis, op, weight, &sample, &qi, &qb);
        let drift = entry_drift(&current, &fine);
        if drift <= tol || doublings >= max_doublings || next == res {
            return Ok(ResolutionChoice { resolution: res, drift, converged: drift <= tol });
        }
        res = next;
        current = fine;
        doublings += 1;
    }
}

/// Interior and (unweighted) boundary Gram matrices, each mirrored.
pub fn assemble_terms(
    spec: KernelSpec,
    nodes: NodeSet,
    op: &EllipticOperator,
    q_in: &QuadratureRule,
    q_bd: &QuadratureRule,
) -> Result<SystemTerms> {
    let basis = TrialBasis::new(spec, nodes)?;
    check_inputs(&basis, op, q_in, q_bd)?;
    let mut interior = Matrix::zeros(basis.len());
    gram(&basis, q_in, 1.0, Some(op), &mut interior);
    interior.mirror_lower();
    let mut boundary = Matrix::zeros(basis.len());
    gram(&basis, q_bd, 1.0, None, &mut boundary);
    boundary.mirror_lower();
    Ok(SystemTerms { interior, boundary })
}

impl LsqSystem {
    pub fn basis(&self) -> &Arc<TrialBasis> {
        &self.basis
    }

    pub fn operator(&self) -> &EllipticOperator {
        &self.op
    }

    pub fn interior_rule(&self) -> &QuadratureRule {
        &self.interior
    }

    pub fn boundary_rule(&self) -> &QuadratureRule {
        &self.boundary
    }

    pub fn h(&self) -> f64 {
        self.basis.nodes().h_fill
    }

    pub fn len(&self) -> usize {
        self.matrix.n()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.n() == 0
    }

    /// `b_i = (L phi_i, f) + w (phi_i, g)`.
    pub fn assemble_rhs(&self, problem: &ManufacturedProblem) -> Vec<f64> {
        self.assemble_rhs_with(|x| problem.f(x), |x| problem.g(x))
    }

    pub fn assemble_rhs_with(&self, f: impl Fn(&[f64]) -> f64, g: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        let n = self.len();
        let mut b = vec![0.0; n];
        let mut add = |rule: &QuadratureRule, scale: f64, op: Option<&EllipticOperator>, data: &dyn Fn(&[f64]) -> f64| {
            stream_chunks(&self.basis.profile, self.basis.nodes.points(), rule, scale, op, |table, width, range| {
                // table already carries sqrt(scale * w); multiply by the other half
                let rhs: Vec<f64> = range
                    .map(|q| (scale * rule.weights[q]).sqrt() * data(rule.nodes.point(q)))
                    .collect();
                for (j, bj) in b.iter_mut().enumerate() {
                    *bj += dot(&table[j * width..(j + 1) * width], &rhs);
                }
            });
        };
        add(&self.interior, 1.0, Some(&self.op), &f);
        add(&self.boundary, self.boundary_weight, None, &g);
        b
    }

    /// `Q^h(u, v) = (L u, L v)_Omega + w (u, v)_dOmega` with this system's rules.
    pub fn energy_product(&self, u: &dyn OperatorImage, v: &dyn OperatorImage) -> f64 {
        let lu = u.images(&mut self.interior.nodes.iter());
        let lv = v.images(&mut self.interior.nodes.iter());
        let interior: f64 = self.interior.weights.iter().zip(lu.iter().zip(&lv)).map(|(w, (a, b))| w * a * b).sum();
        let bu = u.values(&mut self.boundary.nodes.iter());
        let bv = v.values(&mut self.boundary.nodes.iter());
        let boundary: f64 = self.boundary.weights.iter().zip(bu.iter().zip(&bv)).map(|(w, (a, b))| w * a * b).sum();
        interior + self.boundary_weight * boundary
    }

    /// `|||u||| = sqrt(Q^h(u, u))`.
    pub fn energy_norm(&self, u: &dyn OperatorImage) -> f64 {
        self.energy_product(u, u).max(0.0).sqrt()
    }

    /// Drift of the entries `A_ij`, `i, j in sample`, when recomputed with other rules.
    pub fn quadrature_drift(&self, sample: &[usize], q_in: &QuadratureRule, q_bd: &QuadratureRule) -> f64 {
        let fine = sampled_entries(&self.basis, &self.op, self.boundary_weight, sample, q_in, q_bd);
        let mut coarse = Matrix::zeros(sample.len());
        for (a, &i) in sample.iter().enumerate() {
            for (b, &j) in sample.iter().enumerate() {
                coarse.set(a, b, self.matrix.get(i, j));
            }
        }
        entry_drift(&coarse, &fine)
    }

    /// Writes `A` row-major, one row per line, 17 significant digits.
    pub fn write_matrix<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        let n = self.len();
        writeln!(w, "# {n} {n}")?;
        for i in 0..n {
            let row: Vec<String> = self.matrix.row(i).iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

/// Writes a vector one entry per line, 17 significant digits.
pub fn write_vector<W: std::io::Write>(mut w: W, v: &[f64]) -> Result<()> {
    writeln!(w, "# {}", v.len())?;
    for x in v {
        writeln!(w, "{x:.16e}")?;
    }
    Ok(())
}

/// Reads the format written by [`LsqSystem::write_matrix`].
pub fn read_matrix<R: std::io::BufRead>(r: R) -> Result<Matrix> {
    let mut data = Vec::new();
    let mut n = None;
    for line in r.lines() {
        let line = line?;
        let line = line.trim();
        if let Some(rest) = line.strip_prefix('#') {
            let dims: Vec<usize> = rest.split_whitespace().filter_map(|t| t.parse().ok()).collect();
            n = dims.first().copied();
            continue;
        }
        if line.is_empty() {
            continue;
        }
        for tok in line.split_whitespace() {
            data.push(tok.parse::<f64>().map_err(|e| Error::Parse(format!("matrix entry {tok:?}: {e}")))?);
        }
    }
    let n = n.unwrap_or_else(|| (data.len() as f64).sqrt().round() as usize);
    Matrix::from_row_major(n, data)
}

/// Reads the format written by [`write_vector`].
pub fn read_vector<R: std::io::BufRead>(r: R) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(line.parse::<f64>().map_err(|e| Error::Parse(format!("vector entry {line:?}: {e}")))?);
    }
    Ok(out)
}
