//! Condition numbers of the normal matrix for tau = 3 and a fitted growth rate.

use kernel_lsq::study::{run_cond_study, StudyConfig};

fn main() -> kernel_lsq::Result<()> {
    let cfg = StudyConfig::parse("tau = 3\nlevels = 1, 2, 4, 6\nquad_max_doublings = 0\n")?;
    let report = run_cond_study(&cfg, &mut |r| eprintln!("level {} done", r.divisor))?;
    print!("{}", report.text());
    if let Some(slope) = report.cond_slope(3.0) {
        println!("log cond vs log h slope: {slope:.3}");
    }
    Ok(())
}
