//! Gauss–Legendre rules and the disk/circle rules built from them.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{DiskDomain, PointSet};

#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub nodes: PointSet,
    pub weights: Vec<f64>,
    /// Total measure the weights should sum to.
    pub measure: f64,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(x)).sum()
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// `n`-point Gauss–Legendre rule on `[-1, 1]`, exact to degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> Result<QuadratureRule> {
    if !(1..=512).contains(&n) {
        return Err(Error::Domain(format!("Gauss-Legendre order must be in 1..=512, got {n}")));
    }
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut converged = false;
        let mut dp = 0.0;
        for _ in 0..100 {
            // three-term recurrence for P_n(z) and P_{n-1}(z)
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() <= 1e-15 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NoConvergence(format!("Newton iteration for Gauss-Legendre node {i} of {n}")));
        }
        // recompute the derivative at the converged node for the weight
        let mut p0 = 1.0;
        let mut p1 = 0.0;
        for j in 0..n {
            let p2 = p1;
            p1 = p0;
            p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
        }
        if z * z != 1.0 {
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
        }
        let weight = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = weight;
        w[n - 1 - i] = weight;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    Ok(QuadratureRule { nodes: PointSet::new(1, x)?, weights: w, measure: 2.0 })
}

/// Gauss–Legendre in radius (with Jacobian `r`) times the periodic trapezoid
/// rule in angle.
pub fn disk_rule(domain: &DiskDomain, n_r: usize, n_theta: usize) -> Result<QuadratureRule> {
    if n_r < 2 || n_theta < 4 {
        return Err(Error::Domain(format!("disk rule needs n_r >= 2 and n_theta >= 4, got {n_r}, {n_theta}")));
    }
    let gl = gauss_legendre(n_r)?;
    let big_r = domain.radius;
    let dtheta = 2.0 * PI / n_theta as f64;
    let mut coords = Vec::with_capacity(2 * n_r * n_theta);
    let mut weights = Vec::with_capacity(n_r * n_theta);
    for (t, wt) in gl.nodes.iter().zip(&gl.weights) {
        let r = 0.5 * big_r * (t[0] + 1.0);
        let wr = 0.5 * big_r * wt * r;
        for k in 0..n_theta {
            // half-step offset keeps successive rings from lining up
            let theta = (k as f64 + 0.5) * dtheta;
            coords.push(domain.center[0] + r * theta.cos());
            coords.push(domain.center[1] + r * theta.sin());
            weights.push(wr * dtheta);
        }
    }
    Ok(QuadratureRule { nodes: PointSet::new(2, coords)?, weights, measure: domain.area() })
}

/// `n_b` equispaced boundary points with equal weights `2 pi R / n_b`.
pub fn circle_rule(domain: &DiskDomain, n_b: usize) -> Result<QuadratureRule> {
    if n_b < 8 {
        return Err(Error::Domain(format!("circle rule needs n_b >= 8, got {n_b}")));
    }
    let nodes = domain.boundary_points(n_b);
    let w = domain.perimeter() / n_b as f64;
    Ok(QuadratureRule { nodes, weights: vec![w; n_b], measure: domain.perimeter() })
}

/// Quadrature resolution for one solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuadratureResolution {
    pub n_r: usize,
    pub n_theta: usize,
    pub n_b: usize,
}

impl QuadratureResolution {
    /// `n_r = max(40, 4 ceil(1/spacing))` scaled by `scale`, `n_theta = 2 n_r`,
    /// `n_b = 4 n_r`.
    pub fn for_spacing(spacing: f64, scale: f64) -> Self {
        let base = (4.0 * (1.0 / spacing).ceil()).max(40.0);
        let n_r = ((base * scale).ceil() as usize).clamp(2, 512);
        Self { n_r, n_theta: 2 * n_r, n_b: 4 * n_r }
    }

    pub fn doubled(&self) -> Self {
        Self { n_r: (2 * self.n_r).min(512), n_theta: 2 * self.n_theta, n_b: 2 * self.n_b }
    }

    pub fn rules(&self, domain: &DiskDomain) -> Result<(QuadratureRule, QuadratureRule)> {
        Ok((disk_rule(domain, self.n_r, self.n_theta)?, circle_rule(domain, self.n_b)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn two_point_rule() {
        let q = gauss_legendre(2).unwrap();
        assert_abs_diff_eq!(q.nodes.point(0)[0], -1.0 / 3f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(q.nodes.point(1)[0], 1.0 / 3f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(q.weights[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(q.weights[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn exactness() {
        let q = gauss_legendre(3).unwrap();
        assert_abs_diff_eq!(q.integrate(|x| x[0].powi(4)), 0.4, epsilon = 1e-14);
        let q = gauss_legendre(20).unwrap();
        let e = std::f64::consts::E;
        assert_abs_diff_eq!(q.integrate(|x| x[0].exp()), e - 1.0 / e, epsilon = 1e-14);
        for n in [1, 7, 64, 257, 512] {
            let q = gauss_legendre(n).unwrap();
            assert!(q.weights.iter().all(|&w| w > 0.0));
            assert_abs_diff_eq!(q.weight_sum(), 2.0, epsilon = 1e-12);
        }
        assert!(gauss_legendre(0).is_err());
        assert!(gauss_legendre(513).is_err());
    }

    #[test]
    fn disk_and_circle_moments() {
        let d = DiskDomain::unit();
        let q = disk_rule(&d, 40, 80).unwrap();
        assert_abs_diff_eq!(q.integrate(|_| 1.0), PI, epsilon = 1e-12 * PI);
        assert_abs_diff_eq!(q.integrate(|x| x[0] * x[0] + x[1] * x[1]), PI / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q.integrate(|x| x[0]), 0.0, epsilon = 1e-12);
        let c = circle_rule(&d, 64).unwrap();
        assert_abs_diff_eq!(c.integrate(|_| 1.0), 2.0 * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(c.integrate(|x| x[0] * x[0]), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(c.integrate(|x| x[0]), 0.0, epsilon = 1e-13);
        assert!(disk_rule(&d, 1, 8).is_err());
        assert!(circle_rule(&d, 7).is_err());
    }

    #[test]
    fn default_resolution() {
        let r = QuadratureResolution::for_spacing(0.25, 1.0);
        assert_eq!(r, QuadratureResolution { n_r: 40, n_theta: 80, n_b: 160 });
        let r = QuadratureResolution::for_spacing(0.025, 1.0);
        assert_eq!(r.n_r, 160);
    }
}
