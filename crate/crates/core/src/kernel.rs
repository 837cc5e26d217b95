//! Whittle–Matérn–Sobolev kernel `Phi(x) = (eps ||x||)^nu K_nu(eps ||x||)` with
//! `nu = tau - d/2`, and its derivatives up to order two.
//!
//! Writing `psi_m(z) = z^m K_m(z)` and `z = eps r`, the identity
//! `d/dz psi_m(z) = -z psi_{m-1}(z)` gives
//!
//! ```text
//! phi(r)              = psi_nu(z)
//! phi'(r) / r         = -eps^2 psi_{nu-1}(z)
//! phi''(r) - phi'(r)/r = eps^2 z^nu K_{nu-2}(z)
//! ```
//!
//! so the gradient is `(phi'/r) v` and the Hessian is
//! `(phi'/r) I + (phi'' - phi'/r) v v^T / r^2` for `v = x - y`. None of these
//! forms divide by `r`, so they are evaluated directly down to the origin.

use crate::error::{Error, Result};
use crate::problem::{Coefficients, EllipticOperator, ExactSolution};
use crate::specfun::{self, bessel_k_scaled, bessel_k_scaled_run};

/// Below this `eps r` the truncated small-argument expansion is used.
const SERIES_THRESHOLD: f64 = 1e-6;

/// Guard added to smoothness thresholds.
const SMOOTHNESS_GUARD: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelSpec {
    tau: f64,
    epsilon: f64,
    dim: usize,
}

impl KernelSpec {
    /// Requires `tau > d/2` and `epsilon > 0`.
    pub fn new(tau: f64, epsilon: f64, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("dimension must be positive".into()));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Domain(format!("shape parameter must be positive, got {epsilon}")));
        }
        let half = dim as f64 / 2.0;
        if !(tau > half && tau - half <= specfun::MAX_ORDER) {
            return Err(Error::Domain(format!("smoothness tau must exceed d/2 = {half}, got {tau}")));
        }
        Ok(Self { tau, epsilon, dim })
    }

    /// As [`KernelSpec::new`] but also requires classical second derivatives,
    /// `tau >= d/2 + 1 + 1e-9`.
    pub fn for_second_order(tau: f64, epsilon: f64, dim: usize) -> Result<Self> {
        let spec = Self::new(tau, epsilon, dim)?;
        if spec.nu() < 1.0 + SMOOTHNESS_GUARD {
            return Err(Error::Domain(format!(
                "second derivatives of the kernel need tau > d/2 + 1 = {}, got {tau}",
                dim as f64 / 2.0 + 1.0
            )));
        }
        Ok(spec)
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Bessel order `tau - d/2`.
    pub fn nu(&self) -> f64 {
        self.tau - self.dim as f64 / 2.0
    }

    /// Highest order of classical derivatives available (0, 1 or 2).
    pub fn derivative_order(&self) -> usize {
        let nu = self.nu();
        if nu > 1.0 + SMOOTHNESS_GUARD / 2.0 {
            2
        } else if nu > 0.5 {
            1
        } else {
            0
        }
    }

    pub fn profile(&self) -> RadialProfile {
        RadialProfile::new(*self)
    }
}

/// Radial quantities at one distance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialTerms {
    /// `phi(r)`
    pub phi: f64,
    /// `phi'(r) / r`, finite at `r = 0`.
    pub dphi_over_r: f64,
    /// `phi''(r) - phi'(r) / r`, zero at `r = 0`.
    pub curvature: f64,
}

/// The radial profile `phi` of a kernel with cached origin limits.
#[derive(Clone, Copy, Debug)]
pub struct RadialProfile {
    spec: KernelSpec,
    nu: f64,
    phi0: f64,
    dphi_over_r0: f64,
}

/// `lim_{z -> 0} z^m K_m(z) = 2^{m-1} Gamma(m)` for `m > 0`.
fn psi_limit(m: f64) -> f64 {
    2f64.powf(m - 1.0) * specfun::gamma(m).expect("positive order")
}

impl RadialProfile {
    pub fn new(spec: KernelSpec) -> Self {
        let nu = spec.nu();
        let phi0 = psi_limit(nu);
        let eps2 = spec.epsilon * spec.epsilon;
        let dphi_over_r0 = if nu > 1.0 { -eps2 * psi_limit(nu - 1.0) } else { f64::NEG_INFINITY };
        Self { spec, nu, phi0, dphi_over_r0 }
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    /// `phi(0) = 2^{nu-1} Gamma(nu)`.
    pub fn phi0(&self) -> f64 {
        self.phi0
    }

    /// `phi''(0)`, which equals `lim phi'(r)/r`.
    pub fn d2phi0(&self) -> f64 {
        self.dphi_over_r0
    }

    pub fn phi(&self, r: f64) -> f64 {
        let z = self.spec.epsilon * r;
        if z == 0.0 {
            return self.phi0;
        }
        if z < SERIES_THRESHOLD && self.nu > 1.0 {
            return self.phi0 * (1.0 - z * z / (4.0 * (self.nu - 1.0)));
        }
        let k = bessel_k_scaled(self.nu, z).expect("argument in range");
        specfun::power_times(self.nu, z, k)
    }

    pub fn dphi(&self, r: f64) -> f64 {
        self.terms(r).dphi_over_r * r
    }

    pub fn d2phi(&self, r: f64) -> f64 {
        let t = self.terms(r);
        t.curvature + t.dphi_over_r
    }

    /// All radial terms at distance `r`. Needs `nu > 1`.
    pub fn terms(&self, r: f64) -> RadialTerms {
        debug_assert!(self.nu > 1.0);
        let eps = self.spec.epsilon;
        let eps2 = eps * eps;
        let z = eps * r;
        if z == 0.0 {
            return RadialTerms { phi: self.phi0, dphi_over_r: self.dphi_over_r0, curvature: 0.0 };
        }
        let nu = self.nu;
        let lower = nu - 2.0;
        // scaled e^z K_{nu-2}, e^z K_{nu-1}, e^z K_nu
        let mut k = [0.0; 3];
        if lower >= 0.0 {
            bessel_k_scaled_run(lower, z, &mut k).expect("argument in range");
        } else {
            k[0] = bessel_k_scaled(-lower, z).expect("argument in range");
            bessel_k_scaled_run(nu - 1.0, z, &mut k[1..]).expect("argument in range");
        }
        // base = z^nu e^{-z}
        let base = (nu * z.ln() - z).exp();
        let curvature = eps2 * base * k[0];
        if z < SERIES_THRESHOLD {
            let phi = self.phi0 * (1.0 - z * z / (4.0 * (nu - 1.0)));
            let dphi_over_r = if nu > 2.0 {
                self.dphi_over_r0 * (1.0 - z * z / (4.0 * (nu - 2.0)))
            } else {
                -eps2 * base / z * k[1]
            };
            return RadialTerms { phi, dphi_over_r, curvature };
        }
        RadialTerms { phi: base * k[2], dphi_over_r: -eps2 * base / z * k[1], curvature }
    }
}

/// Start of the tabulated range in `z = eps r`.
const TABLE_Z_MIN: f64 = 2.0;
const TABLE_PANEL: f64 = 0.125;
const TABLE_DEGREE: usize = 10;

/// Monomial coefficients of `sum_k c_k T_k(t)`.
fn chebyshev_to_monomial(cheb: &[f64; TABLE_DEGREE]) -> [f64; TABLE_DEGREE] {
    let mut out = [0.0; TABLE_DEGREE];
    // t_prev = T_{k-1}, t_cur = T_k as monomial coefficient arrays
    let mut t_prev = [0.0; TABLE_DEGREE];
    let mut t_cur = [0.0; TABLE_DEGREE];
    t_prev[0] = 1.0;
    t_cur[1] = 1.0;
    for i in 0..TABLE_DEGREE {
        out[i] += cheb[0] * t_prev[i] + cheb[1] * t_cur[i];
    }
    for ck in cheb.iter().skip(2) {
        let mut next = [0.0; TABLE_DEGREE];
        for i in 0..TABLE_DEGREE {
            next[i] = -t_prev[i] + if i > 0 { 2.0 * t_cur[i - 1] } else { 0.0 };
        }
        for i in 0..TABLE_DEGREE {
            out[i] += ck * next[i];
        }
        t_prev = t_cur;
        t_cur = next;
    }
    out
}

/// [`RadialProfile`] with the radial terms for `eps r >= 2` replaced by
/// piecewise Chebyshev interpolants of the exact values. Below that (and
/// beyond the tabulated range) it defers to the exact evaluator.
#[derive(Clone, Debug)]
pub struct TabulatedProfile {
    exact: RadialProfile,
    z_max: f64,
    /// Per panel: local monomial coefficients (in `t` on `[-1, 1]`) of `psi_nu`, `psi_{nu-1}` and
    /// `z^nu K_{nu-2}`.
    panels: Vec<[[f64; TABLE_DEGREE]; 3]>,
}

impl TabulatedProfile {
    /// Tabulates distances up to `r_max`.
    pub fn new(spec: KernelSpec, r_max: f64) -> Result<Self> {
        require_order(&spec, 2)?;
        let exact = spec.profile();
        let z_top = spec.epsilon * r_max;
        let count = if z_top > TABLE_Z_MIN { ((z_top - TABLE_Z_MIN) / TABLE_PANEL).ceil() as usize } else { 0 };
        let z_max = TABLE_Z_MIN + count as f64 * TABLE_PANEL;
        let eps2 = spec.epsilon * spec.epsilon;
        let n = TABLE_DEGREE;
        let mut panels = Vec::with_capacity(count);
        for p in 0..count {
            let a = TABLE_Z_MIN + p as f64 * TABLE_PANEL;
            let mid = a + 0.5 * TABLE_PANEL;
            let half = 0.5 * TABLE_PANEL;
            let mut samples = [[0.0; TABLE_DEGREE]; 3];
            for j in 0..n {
                let theta = std::f64::consts::PI * (j as f64 + 0.5) / n as f64;
                let z = mid + half * theta.cos();
                let t = exact.terms(z / spec.epsilon);
                samples[0][j] = t.phi;
                samples[1][j] = -t.dphi_over_r / eps2;
                samples[2][j] = t.curvature / eps2;
            }
            let mut coeffs = [[0.0; TABLE_DEGREE]; 3];
            for f in 0..3 {
                let mut cheb = [0.0; TABLE_DEGREE];
                for (k, ck) in cheb.iter_mut().enumerate() {
                    let mut s = 0.0;
                    for j in 0..n {
                        let theta = std::f64::consts::PI * (j as f64 + 0.5) / n as f64;
                        s += samples[f][j] * (k as f64 * theta).cos();
                    }
                    *ck = 2.0 * s / n as f64;
                }
                cheb[0] *= 0.5;
                coeffs[f] = chebyshev_to_monomial(&cheb);
            }
            panels.push(coeffs);
        }
        Ok(Self { exact, z_max, panels })
    }

    pub fn exact(&self) -> &RadialProfile {
        &self.exact
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.exact.spec
    }

    #[inline]
    pub fn terms(&self, r: f64) -> RadialTerms {
        let eps = self.exact.spec.epsilon;
        let z = eps * r;
        if !(TABLE_Z_MIN..self.z_max).contains(&z) {
            return self.exact.terms(r);
        }
        let rel = (z - TABLE_Z_MIN) / TABLE_PANEL;
        let p = (rel as usize).min(self.panels.len() - 1);
        let t = 2.0 * (rel - p as f64) - 1.0;
        let c = &self.panels[p];
        let mut v = [c[0][TABLE_DEGREE - 1], c[1][TABLE_DEGREE - 1], c[2][TABLE_DEGREE - 1]];
        for k in (0..TABLE_DEGREE - 1).rev() {
            for f in 0..3 {
                v[f] = v[f] * t + c[f][k];
            }
        }
        let eps2 = eps * eps;
        RadialTerms { phi: v[0], dphi_over_r: -eps2 * v[1], curvature: eps2 * v[2] }
    }

    /// `phi(r)`.
    #[inline]
    pub fn phi(&self, r: f64) -> f64 {
        let z = self.exact.spec.epsilon * r;
        if (TABLE_Z_MIN..self.z_max).contains(&z) {
            self.terms(r).phi
        } else {
            self.exact.phi(r)
        }
    }
}

fn offset(x: &[f64], y: &[f64], out: &mut [f64]) -> f64 {
    let mut r2 = 0.0;
    for ((o, a), b) in out.iter_mut().zip(x).zip(y) {
        *o = a - b;
        r2 += *o * *o;
    }
    r2.sqrt()
}

fn require_order(spec: &KernelSpec, order: usize) -> Result<()> {
    if spec.derivative_order() < order {
        return Err(Error::Domain(format!(
            "kernel with tau = {} in d = {} has no classical derivatives of order {order}",
            spec.tau, spec.dim
        )));
    }
    Ok(())
}

/// Anything that yields [`RadialTerms`] at a distance.
pub trait Radial {
    fn radial_terms(&self, r: f64) -> RadialTerms;
}

impl Radial for RadialProfile {
    #[inline]
    fn radial_terms(&self, r: f64) -> RadialTerms {
        self.terms(r)
    }
}

impl Radial for TabulatedProfile {
    #[inline]
    fn radial_terms(&self, r: f64) -> RadialTerms {
        self.terms(r)
    }
}

/// `Phi(x - y)`.
pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> f64 {
    let r = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    spec.profile().phi(r)
}

/// Gradient in `x` of `Phi(x - y)`.
pub fn kernel_grad(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    require_order(spec, 1)?;
    let mut v = vec![0.0; spec.dim];
    let r = offset(x, y, &mut v);
    if r == 0.0 {
        return Ok(vec![0.0; spec.dim]);
    }
    let eps = spec.epsilon;
    let z = eps * r;
    let nu = spec.nu();
    // phi'(r)/r = -eps^2 z^{nu-1} K_{nu-1}(z); K of negative order is K of |order|
    let k = bessel_k_scaled((nu - 1.0).abs(), z)?;
    let g = -eps * eps * specfun::power_times(nu - 1.0, z, k);
    Ok(v.into_iter().map(|vi| g * vi).collect())
}

/// Row-major Hessian in `x` of `Phi(x - y)`.
pub fn kernel_hess(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    require_order(spec, 2)?;
    let d = spec.dim;
    let mut v = vec![0.0; d];
    let r = offset(x, y, &mut v);
    let t = spec.profile().terms(r);
    let mut h = vec![0.0; d * d];
    let w = if r == 0.0 { 0.0 } else { t.curvature / (r * r) };
    for i in 0..d {
        for j in 0..d {
            h[i * d + j] = w * (v[i] * v[j]);
        }
        h[i * d + i] += t.dphi_over_r;
    }
    Ok(h)
}

/// `(L Phi(. - center))(x)` for known coefficients at `x`.
///
/// Uses `sum a_ij H_ij = (phi'/r) tr(a) + (phi'' - phi'/r) v^T a v / r^2`.
#[inline]
pub fn apply_with<P: Radial>(profile: &P, coeffs: &Coefficients, center: &[f64], x: &[f64], scratch: &mut [f64]) -> f64 {
    let r = offset(x, center, scratch);
    let t = profile.radial_terms(r);
    let mut second = t.dphi_over_r * coeffs.trace_a();
    if r > 0.0 {
        second += t.curvature * coeffs.quad_form(scratch) / (r * r);
    }
    -second + t.dphi_over_r * coeffs.dot_b(scratch) + coeffs.c * t.phi
}

/// `(L Phi(. - center))(x)`.
pub fn apply_operator(op: &EllipticOperator, spec: &KernelSpec, center: &[f64], x: &[f64]) -> Result<f64> {
    require_order(spec, 2)?;
    if op.dim() != spec.dim {
        return Err(Error::Dimension(format!("operator dimension {} != kernel dimension {}", op.dim(), spec.dim)));
    }
    let coeffs = op.coefficients_at(x);
    let mut scratch = vec![0.0; spec.dim];
    Ok(apply_with(&spec.profile(), &coeffs, center, x, &mut scratch))
}

/// The shifted kernel `Phi(. - center)` as a function with analytic
/// derivatives, used as a trial-space manufactured solution.
#[derive(Clone, Debug)]
pub struct ShiftedKernel {
    spec: KernelSpec,
    profile: RadialProfile,
    center: Vec<f64>,
}

impl ShiftedKernel {
    pub fn new(spec: KernelSpec, center: Vec<f64>) -> Result<Self> {
        require_order(&spec, 2)?;
        if center.len() != spec.dim {
            return Err(Error::Dimension("center dimension".into()));
        }
        Ok(Self { profile: spec.profile(), spec, center })
    }
}

impl ExactSolution for ShiftedKernel {
    fn dim(&self) -> usize {
        self.spec.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        let r = crate::problem::norm(&x.iter().zip(&self.center).map(|(a, b)| a - b).collect::<Vec<_>>());
        self.profile.phi(r)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let r = offset(x, &self.center, out);
        let g = self.profile.terms(r).dphi_over_r;
        out.iter_mut().for_each(|v| *v *= g);
    }

    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&kernel_hess(&self.spec, x, &self.center).expect("checked at construction"));
    }
}
