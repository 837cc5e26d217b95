//! Matérn kernel values, gradients, Hessians and operator images.

use kernel_lsq::kernel::{apply_operator, kernel_eval, kernel_grad, kernel_hess, KernelSpec};
use kernel_lsq::problem::benchmark_operator;

fn main() -> kernel_lsq::Result<()> {
    let op = benchmark_operator();
    let (x, y) = ([0.3, -0.1], [0.1, 0.05]);
    for tau in [3.0, 4.0, 5.0] {
        let spec = KernelSpec::for_second_order(tau, 10.0, 2)?;
        println!("tau = {tau}, nu = {}", spec.nu());
        println!("  Phi(0)      = {:.10e}", spec.profile().phi0());
        println!("  Phi(x - y)  = {:.10e}", kernel_eval(&spec, &x, &y));
        println!("  grad        = {:?}", kernel_grad(&spec, &x, &y)?);
        println!("  Hessian     = {:?}", kernel_hess(&spec, &x, &y)?);
        println!("  L Phi(x - y) = {:.10e}", apply_operator(&op, &spec, &y, &x)?);
    }
    Ok(())
}
