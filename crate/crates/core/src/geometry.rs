//! Computational domain and trial node sets.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// A bounded domain described by an indicator and a boundary parametrization.
pub trait Domain {
    fn dim(&self) -> usize;
    /// Strict interior test.
    fn contains(&self, x: &[f64]) -> bool;
    /// `samples` deterministic points covering the closed domain.
    fn sample_points(&self, samples: usize) -> Vec<Vec<f64>>;
    fn diameter(&self) -> f64;
}

/// Disk `{ x : ||x - center|| < radius }` in the plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiskDomain {
    pub radius: f64,
    pub center: [f64; 2],
}

impl DiskDomain {
    pub fn new(radius: f64, center: [f64; 2]) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Domain(format!("disk radius must be positive, got {radius}")));
        }
        Ok(Self { radius, center })
    }

    pub fn unit() -> Self {
        Self { radius: 1.0, center: [0.0, 0.0] }
    }

    /// `theta -> center + radius (cos theta, sin theta)`; arclength `radius dtheta`.
    pub fn boundary_point(&self, theta: f64) -> [f64; 2] {
        [self.center[0] + self.radius * theta.cos(), self.center[1] + self.radius * theta.sin()]
    }

    pub fn area(&self) -> f64 {
        PI * self.radius * self.radius
    }

    pub fn perimeter(&self) -> f64 {
        2.0 * PI * self.radius
    }

    /// `count` equispaced boundary points starting at angle 0.
    pub fn boundary_points(&self, count: usize) -> PointSet {
        let mut coords = Vec::with_capacity(2 * count);
        for k in 0..count {
            let p = self.boundary_point(2.0 * PI * k as f64 / count as f64);
            coords.extend_from_slice(&p);
        }
        PointSet { dim: 2, coords }
    }

    /// Square lattice of step `spacing` through the center, clipped to the
    /// open disk, ordered lexicographically by `(x2, x1)`.
    pub fn lattice(&self, spacing: f64) -> PointSet {
        let m = (self.radius / spacing).floor() as i64 + 1;
        let mut coords = Vec::new();
        for j in -m..=m {
            for i in -m..=m {
                let dx = i as f64 * spacing;
                let dy = j as f64 * spacing;
                if dx * dx + dy * dy < self.radius * self.radius {
                    coords.push(self.center[0] + dx);
                    coords.push(self.center[1] + dy);
                }
            }
        }
        PointSet { dim: 2, coords }
    }
}

impl Domain for DiskDomain {
    fn dim(&self) -> usize {
        2
    }

    fn contains(&self, x: &[f64]) -> bool {
        let dx = x[0] - self.center[0];
        let dy = x[1] - self.center[1];
        dx * dx + dy * dy < self.radius * self.radius
    }

    fn sample_points(&self, samples: usize) -> Vec<Vec<f64>> {
        // golden-angle spiral, area-uniform, includes near-boundary points
        let golden = PI * (3.0 - 5f64.sqrt());
        (0..samples)
            .map(|k| {
                let r = self.radius * ((k as f64 + 0.5) / samples as f64).sqrt();
                let t = golden * k as f64;
                vec![self.center[0] + r * t.cos(), self.center[1] + r * t.sin()]
            })
            .collect()
    }

    fn diameter(&self) -> f64 {
        2.0 * self.radius
    }
}

/// An ordered list of points in `R^dim`, stored flat.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || !coords.len().is_multiple_of(dim) {
            return Err(Error::Dimension(format!("{} coordinates do not form points of dimension {dim}", coords.len())));
        }
        Ok(Self { dim, coords })
    }

    pub fn from_points(points: &[[f64; 2]]) -> Self {
        Self { dim: 2, coords: points.iter().flatten().copied().collect() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn push(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.dim);
        self.coords.extend_from_slice(p);
    }
}

/// Trial centers with their fill distance, separation radius and mesh ratio.
#[derive(Clone, Debug)]
pub struct NodeSet {
    points: PointSet,
    pub h_fill: f64,
    pub q_sep: f64,
    pub mesh_ratio: f64,
}

/// Default candidate-grid resolution for fill-distance estimates.
pub const FILL_RESOLUTION: usize = 256;

impl NodeSet {
    /// Validates that every point lies strictly inside `domain` and that the
    /// points are pairwise distinct, then measures `h` and `q`.
    pub fn new(points: PointSet, domain: &DiskDomain) -> Result<Self> {
        Self::with_resolution(points, domain, FILL_RESOLUTION)
    }

    pub fn with_resolution(points: PointSet, domain: &DiskDomain, resolution: usize) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Domain("node set is empty".into()));
        }
        if let Some(p) = points.iter().find(|p| !domain.contains(p)) {
            return Err(Error::Domain(format!("node {p:?} is not strictly inside the domain")));
        }
        let h_fill = fill_distance(&points, domain, resolution)?;
        let q_sep = if points.len() >= 2 {
            let q = separation_radius(&points)?;
            if q == 0.0 {
                return Err(Error::Domain("node set contains duplicate points".into()));
            }
            q
        } else {
            // a single node: half the largest distance that still separates it
            h_fill
        };
        Ok(Self { points, h_fill, q_sep, mesh_ratio: h_fill / q_sep })
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// CSV with header `x1,x2`, one point per line, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let names: Vec<String> = (1..=self.points.dim()).map(|k| format!("x{k}")).collect();
        writeln!(w, "{}", names.join(","))?;
        for p in self.points.iter() {
            let cols: Vec<String> = p.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(w, "{}", cols.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R, domain: &DiskDomain) -> Result<Self> {
        let mut coords = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with('x') {
                continue;
            }
            let vals: Vec<&str> = line.split(',').collect();
            if vals.len() != 2 {
                return Err(Error::Parse(format!("line {}: expected 2 columns, got {}", lineno + 1, vals.len())));
            }
            for v in vals {
                coords.push(
                    v.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?,
                );
            }
        }
        Self::new(PointSet::new(2, coords)?, domain)
    }
}

/// All lattice points of step `spacing` strictly inside the disk.
pub fn regular_disk_nodes(domain: &DiskDomain, spacing: f64) -> Result<NodeSet> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::Domain(format!("lattice spacing must be positive, got {spacing}")));
    }
    let points = domain.lattice(spacing);
    if points.is_empty() {
        return Err(Error::Domain(format!("no lattice points of spacing {spacing} inside the disk")));
    }
    NodeSet::new(points, domain)
}

/// Half the smallest pairwise distance. Exact `O(N^2)` scan.
pub fn separation_radius(points: &PointSet) -> Result<f64> {
    let n = points.len();
    if n < 2 {
        return Err(Error::Domain("separation radius needs at least two points".into()));
    }
    let mut best = f64::INFINITY;
    for i in 0..n {
        let p = points.point(i);
        for j in (i + 1)..n {
            let q = points.point(j);
            let d2: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
            best = best.min(d2);
        }
    }
    Ok(0.5 * best.sqrt())
}

/// Estimates `sup_{x in domain} min_j ||x - x_j||` over a polar candidate
/// grid of roughly `resolution^2` points covering the closed disk.
pub fn fill_distance(points: &PointSet, domain: &DiskDomain, resolution: usize) -> Result<f64> {
    if resolution < 64 {
        return Err(Error::Domain(format!("fill-distance resolution must be >= 64, got {resolution}")));
    }
    if points.is_empty() {
        return Err(Error::Domain("fill distance of an empty set".into()));
    }
    let buckets = Buckets::new(points, domain);
    let mut worst = 0.0_f64;
    let rings = resolution / 2;
    for i in 0..=rings {
        let r = domain.radius * i as f64 / rings as f64;
        // keep the arc step on every ring close to the radial step
        let m = ((2.0 * PI * i as f64).ceil() as usize).max(1);
        for k in 0..m {
            let t = 2.0 * PI * k as f64 / m as f64;
            let x = [domain.center[0] + r * t.cos(), domain.center[1] + r * t.sin()];
            worst = worst.max(buckets.nearest(&x));
        }
    }
    Ok(worst)
}

/// Uniform bucket grid for nearest-neighbour queries in the plane.
struct Buckets<'a> {
    points: &'a PointSet,
    origin: [f64; 2],
    cell: f64,
    cols: usize,
    rows: usize,
    cells: Vec<Vec<u32>>,
}

impl<'a> Buckets<'a> {
    fn new(points: &'a PointSet, domain: &DiskDomain) -> Self {
        let side = 2.0 * domain.radius;
        let per = ((points.len() as f64).sqrt().ceil() as usize).max(1);
        let cell = side / per as f64;
        let origin = [domain.center[0] - domain.radius, domain.center[1] - domain.radius];
        let mut cells = vec![Vec::new(); per * per];
        for (idx, p) in points.iter().enumerate() {
            let (c, r) = Self::locate(origin, cell, per, per, p);
            cells[r * per + c].push(idx as u32);
        }
        Self { points, origin, cell, cols: per, rows: per, cells }
    }

    fn locate(origin: [f64; 2], cell: f64, cols: usize, rows: usize, p: &[f64]) -> (usize, usize) {
        let c = (((p[0] - origin[0]) / cell).floor().max(0.0) as usize).min(cols - 1);
        let r = (((p[1] - origin[1]) / cell).floor().max(0.0) as usize).min(rows - 1);
        (c, r)
    }

    fn nearest(&self, x: &[f64; 2]) -> f64 {
        let (c0, r0) = Self::locate(self.origin, self.cell, self.cols, self.rows, x);
        let mut best = f64::INFINITY;
        let mut ring = 0usize;
        loop {
            let lo_c = c0.saturating_sub(ring);
            let hi_c = (c0 + ring).min(self.cols - 1);
            let lo_r = r0.saturating_sub(ring);
            let hi_r = (r0 + ring).min(self.rows - 1);
            for r in lo_r..=hi_r {
                for c in lo_c..=hi_c {
                    let on_ring = r == lo_r || r == hi_r || c == lo_c || c == hi_c;
                    if ring > 0 && !on_ring {
                        continue;
                    }
                    for &idx in &self.cells[r * self.cols + c] {
                        let p = self.points.point(idx as usize);
                        let d = (p[0] - x[0]).hypot(p[1] - x[1]);
                        best = best.min(d);
                    }
                }
            }
            // every unvisited cell is at least `ring * cell` away
            let covered = lo_c == 0 && lo_r == 0 && hi_c == self.cols - 1 && hi_r == self.rows - 1;
            if best <= ring as f64 * self.cell || covered {
                return best;
            }
            ring += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn coarse_lattices() {
        let d = DiskDomain::unit();
        let n = regular_disk_nodes(&d, 0.9).unwrap();
        let pts: Vec<Vec<f64>> = n.points().iter().map(|p| p.to_vec()).collect();
        assert_eq!(pts, vec![vec![0.0, -0.9], vec![-0.9, 0.0], vec![0.0, 0.0], vec![0.9, 0.0], vec![0.0, 0.9]]);
        let n = regular_disk_nodes(&d, 2.0).unwrap();
        assert_eq!(n.len(), 1);
        assert_eq!(n.points().point(0), &[0.0, 0.0]);
        // boundary lattice points are excluded
        let n = regular_disk_nodes(&d, 0.5).unwrap();
        assert!(n.points().iter().all(|p| p[0].hypot(p[1]) < 1.0));
        assert!(!n.points().iter().any(|p| p == [1.0, 0.0]));
    }

    #[test]
    fn separation_examples() {
        let p = PointSet::from_points(&[[0.0, 0.0], [0.5, 0.0]]);
        assert_eq!(separation_radius(&p).unwrap(), 0.25);
        let p = PointSet::from_points(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]);
        assert_eq!(separation_radius(&p).unwrap(), 0.5);
        assert!(separation_radius(&PointSet::from_points(&[[0.0, 0.0]])).is_err());
    }

    #[test]
    fn single_center_fill_distance() {
        let d = DiskDomain::unit();
        let p = PointSet::from_points(&[[0.0, 0.0]]);
        let h = fill_distance(&p, &d, 128).unwrap();
        assert!((h - 1.0).abs() <= 1.0 / 128.0);
        assert!(fill_distance(&p, &d, 32).is_err());
    }

    #[test]
    fn adding_points_never_increases_fill() {
        let d = DiskDomain::unit();
        let mut p = PointSet::from_points(&[[0.0, 0.0], [0.5, 0.1]]);
        let h1 = fill_distance(&p, &d, 128).unwrap();
        p.push(&[-0.6, -0.3]);
        let h2 = fill_distance(&p, &d, 128).unwrap();
        assert!(h2 <= h1);
    }

    #[test]
    fn lattice_measures() {
        let d = DiskDomain::unit();
        for &s in &[0.25, 0.125, 0.0625] {
            let n = regular_disk_nodes(&d, s).unwrap();
            assert_relative_eq!(n.q_sep, s / 2.0, max_relative = 1e-12);
            assert!(n.q_sep <= n.h_fill);
        }
    }

    #[test]
    fn duplicate_and_exterior_points_rejected() {
        let d = DiskDomain::unit();
        assert!(NodeSet::new(PointSet::from_points(&[[0.1, 0.1], [0.1, 0.1]]), &d).is_err());
        assert!(NodeSet::new(PointSet::from_points(&[[1.0, 0.0]]), &d).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let d = DiskDomain::unit();
        let n = regular_disk_nodes(&d, 0.3).unwrap();
        let mut buf = Vec::new();
        n.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("x1,x2\n"));
        let back = NodeSet::read_csv(&buf[..], &d).unwrap();
        assert_eq!(back.points(), n.points());
    }
}
