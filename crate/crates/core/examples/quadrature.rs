//! Gauss–Legendre, disk and circle rules.

use std::f64::consts::PI;

use kernel_lsq::geometry::DiskDomain;
use kernel_lsq::quadrature::{circle_rule, disk_rule, gauss_legendre, QuadratureResolution};

fn main() -> kernel_lsq::Result<()> {
    let gl = gauss_legendre(20)?;
    let e = std::f64::consts::E;
    println!("int_-1^1 e^x: {:.16} (exact {:.16})", gl.integrate(|x| x[0].exp()), e - 1.0 / e);

    let d = DiskDomain::unit();
    let res = QuadratureResolution::for_spacing(0.25, 1.0);
    println!("default resolution at spacing 0.25: {res:?}");
    let (q, c) = res.rules(&d)?;
    println!("disk: area {:.16} (pi), int |x|^2 {:.16} (pi/2)", q.weight_sum(), q.integrate(|x| x[0] * x[0] + x[1] * x[1]));
    println!("circle: length {:.16} (2 pi), int x1^2 {:.16} (pi)", c.weight_sum(), c.integrate(|x| x[0] * x[0]));
    let fine = disk_rule(&d, 200, 400)?;
    let g = |x: &[f64]| (x[0] * x[1]).cos();
    println!("int cos(x1 x2): {:.16} at 40x80, {:.16} at 200x400", q.integrate(g), fine.integrate(g));
    println!("8-point circle rule length / pi = {:.16}", circle_rule(&d, 8)?.weight_sum() / PI);
    Ok(())
}
