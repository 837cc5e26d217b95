//! Modified Bessel functions of the second kind, scaled and unscaled.

use kernel_lsq::specfun::{bessel_k, bessel_k_scaled, bessel_k_scaled_run};

fn main() -> kernel_lsq::Result<()> {
    println!("{:>6} {:>10} {:>24} {:>24}", "nu", "z", "K_nu(z)", "e^z K_nu(z)");
    for nu in [0.0, 0.5, 1.5, 3.0] {
        for z in [1e-3, 0.5, 2.0, 20.0] {
            println!("{nu:>6} {z:>10} {:>24.16e} {:>24.16e}", bessel_k(nu, z)?, bessel_k_scaled(nu, z)?);
        }
    }
    // K_{3/2}(1) = sqrt(pi/2) e^{-1} (1 + 1)
    let closed = (std::f64::consts::PI / 2.0).sqrt() * (-1.0f64).exp() * 2.0;
    println!("K_1.5(1) = {:.16e}, closed form {closed:.16e}", bessel_k(1.5, 1.0)?);

    let mut run = [0.0; 4];
    bessel_k_scaled_run(0.25, 3.0, &mut run)?;
    println!("e^3 K_(0.25 + i)(3), i = 0..3: {run:?}");
    Ok(())
}
