//! Kernel interpolation of a smooth target and its observed rate.

use std::f64::consts::PI;

use kernel_lsq::geometry::{regular_disk_nodes, DiskDomain};
use kernel_lsq::kernel::KernelSpec;
use kernel_lsq::postproc::{convergence_order, interpolate, EvaluationSets};
use kernel_lsq::problem::benchmark_operator;

fn main() -> kernel_lsq::Result<()> {
    let d = DiskDomain::unit();
    let spec = KernelSpec::new(4.0, 10.0, 2)?;
    let target = |x: &[f64]| (PI * x[0]).sin() * (PI * x[1]).sin();
    let eval = EvaluationSets::standard(&d);
    let exact: Vec<f64> = eval.interior.iter().map(target).collect();
    let mut prev: Option<(f64, f64)> = None;
    for k in [1u32, 2, 4, 6] {
        let nodes = regular_disk_nodes(&d, 0.25 / k as f64)?;
        let h = nodes.h_fill;
        let n = nodes.len();
        let got = interpolate(spec, nodes, benchmark_operator(), target)?.evaluate(&eval.interior);
        let rms = (exact.iter().zip(&got).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / exact.len() as f64).sqrt();
        let order = prev.map(|(h0, e0)| convergence_order(e0, rms, h0, h)).transpose()?;
        println!("h/{k:<2} N {n:>5} h_fill {h:.4e} rms {rms:.4e} order {}", order.map_or("-".into(), |p| format!("{p:.3}")));
        prev = Some((h, rms));
    }
    Ok(())
}
