//! Modified Bessel function of the second kind, `K_nu(z)`, for real order
//! `nu >= 0` and real argument `z > 0`.
//!
//! Orders are split as `nu = mu + n` with `|mu| <= 1/2`. The pair
//! `K_mu, K_{mu+1}` comes from Temme's ascending series when `z <= 2` and from
//! Steed's continued fraction (CF2) otherwise; the remaining orders follow by
//! upward recurrence, which is stable for `K`.
//!
//! Everything is computed in exponentially scaled form `e^z K_nu(z)` and
//! unscaled at the end, so results underflow to zero cleanly past `z ~ 705`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Taylor coefficients of `1 / Gamma(1 + x)` about `x = 0`.
const RGAMMA1P: [f64; 31] = [
    1.0,
    0.577_215_664_901_532_860_6,
    -0.655_878_071_520_253_881_1,
    -0.042_002_635_034_095_235_53,
    0.166_538_611_382_291_489_5,
    -0.042_197_734_555_544_336_75,
    -0.009_621_971_527_876_973_562,
    0.007_218_943_246_663_099_542,
    -0.001_165_167_591_859_065_112,
    -0.000_215_241_674_114_950_972_8,
    0.000_128_050_282_388_116_186_2,
    -0.000_020_134_854_780_788_238_66,
    -0.000_001_250_493_482_142_670_657,
    0.000_001_133_027_231_981_695_882,
    -2.056_338_416_977_607_103e-7,
    6.116_095_104_481_415_818e-9,
    5.002_007_644_469_222_930e-9,
    -1.181_274_570_487_020_145e-9,
    1.043_426_711_691_100_510e-10,
    7.782_263_439_905_071_254e-12,
    -3.696_805_618_642_205_708e-12,
    5.100_370_287_454_475_979e-13,
    -2.058_326_053_566_506_783e-14,
    -5.348_122_539_423_017_982e-15,
    1.226_778_628_238_260_790e-15,
    -1.181_259_301_697_458_770e-16,
    1.186_692_254_751_600_333e-18,
    1.412_380_655_318_031_782e-18,
    -2.298_745_684_435_370_207e-19,
    1.714_406_321_927_337_433e-20,
    1.337_351_730_493_693_115e-22,
];

/// Largest supported order.
pub const MAX_ORDER: f64 = 64.0;

/// Order of a modified Bessel function, `nu >= 0`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct BesselOrder(f64);

impl BesselOrder {
    pub fn new(nu: f64) -> Result<Self> {
        if !(nu.is_finite() && (0.0..=MAX_ORDER).contains(&nu)) {
            return Err(Error::Domain(format!("Bessel order must lie in [0, {MAX_ORDER}], got {nu}")));
        }
        Ok(Self(nu))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// `1 / Gamma(1 + x)` for `|x| <= 1/2`, and the two Temme auxiliaries
/// `gam1 = (1/Gamma(1-x) - 1/Gamma(1+x)) / (2x)` and
/// `gam2 = (1/Gamma(1-x) + 1/Gamma(1+x)) / 2`.
fn temme_gammas(x: f64) -> (f64, f64, f64, f64) {
    let x2 = x * x;
    let mut even = 0.0;
    let mut odd = 0.0;
    // Horner over x^2 for the even and odd halves separately.
    for k in (0..RGAMMA1P.len()).rev() {
        if k % 2 == 0 {
            even = even * x2 + RGAMMA1P[k];
        }
    }
    for k in (1..RGAMMA1P.len()).rev() {
        if k % 2 == 1 {
            odd = odd * x2 + RGAMMA1P[k];
        }
    }
    // 1/Gamma(1+x) = even + x*odd, 1/Gamma(1-x) = even - x*odd
    let rg_plus = even + x * odd;
    let rg_minus = even - x * odd;
    (rg_plus, rg_minus, -odd, even)
}

/// Gamma function for positive real argument.
pub fn gamma(x: f64) -> Result<f64> {
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::Domain(format!("gamma requires x > 0, got {x}")));
    }
    if x > 171.0 {
        return Err(Error::Overflow(format!("gamma({x}) overflows")));
    }
    let n = x.round();
    let mu = x - n; // x = 1 + mu + (n - 1)
    let (rg_plus, _, _, _) = temme_gammas(mu);
    let mut g = 1.0 / rg_plus; // Gamma(1 + mu)
    if n >= 1.0 {
        let mut t = 1.0 + mu;
        while t < x - 0.5 {
            g *= t;
            t += 1.0;
        }
    } else {
        // n == 0: x = mu in (0, 1/2], Gamma(mu) = Gamma(1+mu)/mu
        g /= mu;
    }
    Ok(g)
}

/// Scaled pair `(e^z K_mu(z), e^z K_{mu+1}(z))` for `|mu| <= 1/2`, `z > 0`.
fn scaled_pair(mu: f64, z: f64) -> (f64, f64) {
    if z <= 2.0 {
        temme_series(mu, z)
    } else {
        steed_cf2(mu, z)
    }
}

fn temme_series(mu: f64, z: f64) -> (f64, f64) {
    let half = 0.5 * z;
    let d = -half.ln();
    let e = mu * d;
    let pimu = PI * mu;
    let fact = if pimu.abs() < f64::EPSILON { 1.0 } else { pimu / pimu.sin() };
    let fact2 = if e.abs() < f64::EPSILON { 1.0 } else { e.sinh() / e };
    let (rg_plus, rg_minus, gam1, gam2) = temme_gammas(mu);
    let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
    let mut sum = ff;
    let ee = e.exp();
    let mut p = 0.5 * ee / rg_plus;
    let mut q = 0.5 / (ee * rg_minus);
    let mut c = 1.0;
    let dd = half * half;
    let mut sum1 = p;
    let mu2 = mu * mu;
    for i in 1..500 {
        let fi = i as f64;
        ff = (fi * ff + p + q) / (fi * fi - mu2);
        c *= dd / fi;
        p /= fi - mu;
        q /= fi + mu;
        let del = c * ff;
        sum += del;
        sum1 += c * (p - fi * ff);
        if del.abs() < sum.abs() * f64::EPSILON * 0.5 {
            break;
        }
    }
    let scale = z.exp();
    (sum * scale, sum1 * (2.0 / z) * scale)
}

fn steed_cf2(mu: f64, z: f64) -> (f64, f64) {
    let mu2 = mu * mu;
    let mut b = 2.0 * (1.0 + z);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut h = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25 - mu2;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..10_000 {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < f64::EPSILON * 0.5 {
            break;
        }
    }
    h *= a1;
    let k_mu = (PI / (2.0 * z)).sqrt() / s;
    let k_mu1 = k_mu * (mu + z + 0.5 - h) / z;
    (k_mu, k_mu1)
}

fn check_args(nu: f64, z: f64) -> Result<()> {
    BesselOrder::new(nu)?;
    if !(z > 0.0) || z.is_nan() {
        return Err(Error::Domain(format!("K_nu(z) requires z > 0, got z = {z}")));
    }
    Ok(())
}

/// Fills `out[k] = e^z K_{nu0 + k}(z)` for `k = 0..out.len()`.
///
/// `nu0 >= 0`. Returns an overflow error if any requested value is infinite.
pub fn bessel_k_scaled_run(nu0: f64, z: f64, out: &mut [f64]) -> Result<()> {
    check_args(nu0, z)?;
    if out.is_empty() {
        return Ok(());
    }
    let n = (nu0 + 0.5).floor();
    let mu = nu0 - n;
    let (mut k_prev, mut k_cur) = scaled_pair(mu, z);
    // k_prev = K_mu, k_cur = K_{mu+1}
    let steps = n as usize;
    // advance so that k_prev = K_{nu0}
    let mut order = mu + 1.0;
    for _ in 0..steps {
        let next = k_prev + 2.0 * order / z * k_cur;
        k_prev = k_cur;
        k_cur = next;
        order += 1.0;
    }
    out[0] = k_prev;
    if out.len() > 1 {
        out[1] = k_cur;
    }
    let mut order = nu0 + 1.0;
    for k in 2..out.len() {
        out[k] = out[k - 2] + 2.0 * order / z * out[k - 1];
        order += 1.0;
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Overflow(format!("K_{nu0}({z}) exceeds the floating-point range")));
    }
    Ok(())
}

/// `e^z K_nu(z)`.
pub fn bessel_k_scaled(nu: f64, z: f64) -> Result<f64> {
    let mut out = [0.0];
    bessel_k_scaled_run(nu, z, &mut out)?;
    Ok(out[0])
}

/// `K_nu(z)` for `nu >= 0`, `z > 0`.
pub fn bessel_k(nu: f64, z: f64) -> Result<f64> {
    let scaled = bessel_k_scaled(nu, z)?;
    Ok(unscale(scaled, z))
}

fn unscale(scaled: f64, z: f64) -> f64 {
    // split the exponential so the product does not underflow early
    if z > 600.0 {
        scaled * (-0.5 * z).exp() * (-0.5 * z).exp()
    } else {
        scaled * (-z).exp()
    }
}

/// `dK_nu/dz = -(K_{nu-1}(z) + K_{nu+1}(z)) / 2`.
pub fn bessel_k_dz(nu: f64, z: f64) -> Result<f64> {
    check_args(nu, z)?;
    let lower = (nu - 1.0).abs();
    let k_lower = bessel_k_scaled(lower, z)?;
    let k_upper = bessel_k_scaled(nu + 1.0, z)?;
    Ok(-0.5 * unscale(k_lower + k_upper, z))
}

/// `z^mu K_mu(z)` evaluated from a scaled Bessel value `e^z K_{|mu|}(z)`.
pub(crate) fn power_times(mu: f64, z: f64, scaled_k: f64) -> f64 {
    (mu * z.ln() - z).exp() * scaled_k
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn half_integer_closed_forms() {
        for &z in &[1e-3, 0.1, 0.5, 1.0, 1.9, 2.0, 2.1, 5.0, 17.0, 60.0] {
            let k12 = (PI / (2.0 * z)).sqrt() * (-z).exp();
            assert_relative_eq!(bessel_k(0.5, z).unwrap(), k12, max_relative = 1e-13);
            let k32 = k12 * (1.0 + 1.0 / z);
            assert_relative_eq!(bessel_k(1.5, z).unwrap(), k32, max_relative = 1e-13);
        }
        assert_relative_eq!(bessel_k(0.5, 1.0).unwrap(), 0.461_068_504_447_895, max_relative = 1e-14);
    }

    #[test]
    fn reference_values() {
        assert_relative_eq!(bessel_k(0.0, 1.0).unwrap(), 0.421_024_438_240_708_3, max_relative = 1e-14);
        assert_relative_eq!(bessel_k(1.0, 1.0).unwrap(), 0.601_907_230_197_234_6, max_relative = 1e-14);
        assert!(bessel_k(2.0, 2.0).unwrap() < bessel_k(2.0, 1.0).unwrap());
    }

    #[test]
    fn derivative_identity_and_sign() {
        let k1 = bessel_k(1.0, 1.0).unwrap();
        assert_relative_eq!(bessel_k_dz(0.0, 1.0).unwrap(), -k1, max_relative = 1e-14);
        let h = 1e-6;
        let fd = (bessel_k(2.0, 1.5 + h).unwrap() - bessel_k(2.0, 1.5 - h).unwrap()) / (2.0 * h);
        assert_relative_eq!(bessel_k_dz(2.0, 1.5).unwrap(), fd, max_relative = 1e-7);
        for &nu in &[0.0, 0.3, 1.0, 2.5, 7.0] {
            for &z in &[1e-4, 0.7, 3.0, 40.0] {
                assert!(bessel_k_dz(nu, z).unwrap() < 0.0);
            }
        }
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(bessel_k(1.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(bessel_k(1.0, -1.0), Err(Error::Domain(_))));
        assert!(matches!(bessel_k(-0.5, 1.0), Err(Error::Domain(_))));
        assert!(matches!(bessel_k(1.0, f64::NAN), Err(Error::Domain(_))));
        assert!(matches!(bessel_k(10.0, 1e-300), Err(Error::Overflow(_))));
    }

    #[test]
    fn large_argument_underflows_to_zero() {
        let v = bessel_k(3.0, 800.0).unwrap();
        assert_eq!(v, 0.0);
        let v = bessel_k(0.0, 700.0).unwrap();
        assert!(v > 0.0 && v < 1e-300);
    }

    #[test]
    fn gamma_values() {
        assert_relative_eq!(gamma(1.0).unwrap(), 1.0, max_relative = 1e-15);
        assert_relative_eq!(gamma(5.0).unwrap(), 24.0, max_relative = 1e-14);
        assert_relative_eq!(gamma(0.5).unwrap(), PI.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(gamma(2.5).unwrap(), 0.75 * PI.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(gamma(0.1).unwrap(), 9.513_507_698_668_732, max_relative = 1e-14);
    }

    #[test]
    fn run_matches_single_orders() {
        let mut out = [0.0; 5];
        bessel_k_scaled_run(0.3, 1.7, &mut out).unwrap();
        for (k, v) in out.iter().enumerate() {
            assert_relative_eq!(*v, bessel_k_scaled(0.3 + k as f64, 1.7).unwrap(), max_relative = 1e-14);
        }
    }
}
