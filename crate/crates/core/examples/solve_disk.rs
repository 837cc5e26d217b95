//! One weighted least-squares solve for `u = |x|^4` on the unit disk.

use kernel_lsq::study::{run_solve, sci, StudyConfig};

fn main() -> kernel_lsq::Result<()> {
    let mut cfg = StudyConfig::default();
    cfg.set("tau", "5")?;
    cfg.set("levels", "4")?;
    let row = run_solve(&cfg)?;
    println!("tau {} spacing {} N {} h_fill {}", row.tau, row.spacing, row.n, sci(row.h_fill));
    if let Some(q) = row.quadrature {
        println!("quadrature n_r {} drift {}", q.resolution.n_r, sci(q.drift));
    }
    if let Some(e) = row.report {
        println!("L2 {}  bdry {}  residual {}  energy {}", sci(e.l2_rms), sci(e.bdry_l2), sci(e.residual_l2), sci(e.energy));
    }
    println!("relative residual {:?}, warnings {:?}", row.relative_residual, row.warnings);
    Ok(())
}
