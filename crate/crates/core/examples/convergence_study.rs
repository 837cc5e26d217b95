//! Errors and orders for tau = 4, 5 over four levels.

use kernel_lsq::study::{run_convergence_study, StudyConfig};

fn main() -> kernel_lsq::Result<()> {
    let cfg = StudyConfig::parse("tau = 4, 5\nlevels = 1, 2, 4, 6\ncond = false\n")?;
    let report = run_convergence_study(&cfg, &mut |r| eprintln!("tau {} level {} done", r.tau, r.divisor))?;
    print!("{}", report.text());
    print!("{}", report.csv());
    Ok(())
}
