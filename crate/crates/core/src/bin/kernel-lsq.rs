use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kernel_lsq::study::{run_cond_study, run_convergence_study, run_solve, selftest, sci, LevelOutcome, StudyConfig};
use kernel_lsq::Result;

#[derive(Parser)]
#[command(name = "kernel-lsq", version, about = "Weighted least-squares kernel solver for elliptic Dirichlet problems on the unit disk")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve once at the first tau and the first level.
    Solve(Overrides),
    /// Error norms and convergence orders over all tau and levels.
    Study(Overrides),
    /// Condition numbers over all tau and levels.
    Cond(Overrides),
    /// Quick oracle-backed checks.
    Selftest,
}

#[derive(Args)]
struct Overrides {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for study.csv, study.txt and meta.txt.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated smoothness indices.
    #[arg(long)]
    tau: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    kappa: Option<String>,
    #[arg(long)]
    base_spacing: Option<String>,
    /// Comma-separated divisors k of the base spacing.
    #[arg(long)]
    levels: Option<String>,
    #[arg(long)]
    weight_exp: Option<String>,
    /// Write A and b for every level into the output directory.
    #[arg(long)]
    dump_system: bool,
    #[arg(long)]
    quad_scale: Option<String>,
}

impl Overrides {
    fn config(&self) -> Result<StudyConfig> {
        let mut cfg = match &self.config {
            Some(path) => StudyConfig::from_file(path)?,
            None => StudyConfig::default(),
        };
        let pairs = [
            ("tau", &self.tau),
            ("epsilon", &self.epsilon),
            ("kappa", &self.kappa),
            ("base_spacing", &self.base_spacing),
            ("levels", &self.levels),
            ("weight_exp", &self.weight_exp),
            ("quad_scale", &self.quad_scale),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        if let Some(out) = &self.out {
            cfg.out = Some(out.clone());
        }
        if self.dump_system {
            cfg.dump_system = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn progress(row: &LevelOutcome) {
    eprintln!(
        "tau {} level {}: N = {}, {:.1} s{}",
        row.tau,
        row.divisor,
        row.n,
        row.wall.as_secs_f64(),
        if row.warned() { format!(" [{}]", row.warnings.join("; ")) } else { String::new() }
    );
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Solve(o) => {
            let cfg = o.config()?;
            let row = run_solve(&cfg)?;
            progress(&row);
            if let Some(e) = row.report {
                println!("h_fill      {}", sci(e.h));
                println!("N           {}", e.n);
                println!("l2_rms      {}", sci(e.l2_rms));
                println!("bdry_l2     {}", sci(e.bdry_l2));
                println!("residual_l2 {}", sci(e.residual_l2));
                println!("energy      {}", sci(e.energy));
                if let Some(c) = e.cond {
                    println!("cond        {}", sci(c));
                }
            }
            Ok(!row.warned())
        }
        Command::Study(o) => {
            let report = run_convergence_study(&o.config()?, &mut progress)?;
            print!("{}", report.text());
            Ok(true)
        }
        Command::Cond(o) => {
            let report = run_cond_study(&o.config()?, &mut progress)?;
            print!("{}", report.text());
            Ok(true)
        }
        Command::Selftest => {
            let checks = selftest();
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(checks.iter().all(|c| c.passed))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
