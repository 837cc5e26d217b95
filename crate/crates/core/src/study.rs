//! Configuration-driven solves and refinement studies.
//!
//! A study runs the full pipeline (nodes, quadrature, assembly, Cholesky
//! solve, error norms, condition number) for every `(tau, level)` pair and
//! writes `study.csv`, `study.txt` and `meta.txt`.
//!
//! Config files hold one `key = value` per line; `#` starts a comment.
//!
//! | key            | meaning                                   | default                 |
//! |----------------|-------------------------------------------|-------------------------|
//! | `tau`          | comma-separated smoothness indices        | `3,4,5,6`               |
//! | `epsilon`      | kernel shape parameter                    | `10`                    |
//! | `kappa`        | exponent of `u = \|x\|^kappa`             | `4`                     |
//! | `base_spacing` | lattice spacing of level 1                | `0.25`                  |
//! | `levels`       | strictly increasing divisors `k`          | `1,2,4,6,8,10,12,14`    |
//! | `weight_exp`   | exponent `s` of the boundary weight `h^-s`| `3`                     |
//! | `quad_scale`   | multiplier of the default quadrature size | `1`                     |
//! | `quad_tol`     | accepted drift of `A` under doubling      | `1e-10`                 |
//! | `quad_max_doublings` | cap on automatic doublings          | `2`                     |
//! | `q`            | regularity index (metadata)               | `0`                     |
//! | `seed`         | seed for randomized fixtures              | `0`                     |
//! | `cond`         | compute condition numbers                 | `true`                  |
//! | `dump_system`  | write `A`/`b` for every level             | `false`                 |
//! | `out`          | output directory                          | none                    |

use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::assembly::{
    assemble_basis, assemble_matrix_weighted, select_resolution, write_vector, LsqSystem, ResolutionChoice, TrialBasis,
    DEFAULT_WEIGHT_EXPONENT,
};
use crate::error::{Error, Result};
use crate::geometry::{regular_disk_nodes, DiskDomain};
use crate::kernel::{KernelSpec, ShiftedKernel};
use crate::linalg::{cholesky, condition_number, norm2, SpectrumEstimate};
use crate::postproc::{convergence_order, error_report, DiscreteSolution, ErrorReport, EvaluationSets};
use crate::problem::{benchmark_operator, radial_power_solution, ManufacturedProblem};
use crate::quadrature::QuadratureResolution;

/// Levels whose condition number exceeds this are flagged.
pub const COND_WARN: f64 = 1e13;

/// Exact CSV header of `study.csv`.
pub const CSV_HEADER: &str = "tau,level,h_label,h_fill,N,l2_rms,l2_order,bdry_l2,bdry_order,residual_l2,residual_order,energy,energy_order,cond,cond_order,warn";

#[derive(Clone, Debug, PartialEq)]
pub struct StudyConfig {
    pub taus: Vec<f64>,
    pub epsilon: f64,
    pub kappa: f64,
    pub base_spacing: f64,
    pub divisors: Vec<u32>,
    pub weight_exponent: f64,
    pub quad_scale: f64,
    pub quad_tol: f64,
    pub quad_max_doublings: usize,
    pub q: u32,
    pub seed: u64,
    pub compute_cond: bool,
    pub dump_system: bool,
    pub out: Option<PathBuf>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            taus: vec![3.0, 4.0, 5.0, 6.0],
            epsilon: 10.0,
            kappa: 4.0,
            base_spacing: 0.25,
            divisors: vec![1, 2, 4, 6, 8, 10, 12, 14],
            weight_exponent: DEFAULT_WEIGHT_EXPONENT,
            quad_scale: 1.0,
            quad_tol: 1e-10,
            quad_max_doublings: 2,
            q: 0,
            seed: 0,
            compute_cond: true,
            dump_system: false,
            out: None,
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse().map_err(|_| Error::Config(format!("{key}: expected a number, got {v:?}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(|t| t.trim())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {t:?}"))))
        .collect()
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got {v:?}"))),
    }
}

impl StudyConfig {
    /// Parses `key = value` lines on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Sets one key, as in a config file.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "tau" => self.taus = parse_list(key, value)?,
            "epsilon" => self.epsilon = parse_f64(key, value)?,
            "kappa" => self.kappa = parse_f64(key, value)?,
            "base_spacing" => self.base_spacing = parse_f64(key, value)?,
            "levels" => self.divisors = parse_list(key, value)?,
            "weight_exp" => self.weight_exponent = parse_f64(key, value)?,
            "quad_scale" => self.quad_scale = parse_f64(key, value)?,
            "quad_tol" => self.quad_tol = parse_f64(key, value)?,
            "quad_max_doublings" => {
                self.quad_max_doublings =
                    value.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))?
            }
            "q" => self.q = value.parse().map_err(|_| Error::Config(format!("q: cannot parse {value:?}")))?,
            "seed" => self.seed = value.parse().map_err(|_| Error::Config(format!("seed: cannot parse {value:?}")))?,
            "cond" => self.compute_cond = parse_bool(key, value)?,
            "dump_system" => self.dump_system = parse_bool(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let d = 2.0;
        if self.taus.is_empty() {
            return Err(Error::Config("tau list is empty".into()));
        }
        for &tau in &self.taus {
            if !(tau > d / 2.0 + 1.0) {
                return Err(Error::Config(format!(
                    "tau = {tau} is too small: second derivatives of the kernel exist classically only for tau > {}",
                    d / 2.0 + 1.0
                )));
            }
            if tau < self.q as f64 + 2.0 {
                return Err(Error::Config(format!("tau = {tau} must be at least q + 2 = {}", self.q + 2)));
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.kappa >= 2.0) {
            return Err(Error::Config(format!("kappa must be at least 2, got {}", self.kappa)));
        }
        if !(self.base_spacing > 0.0 && self.base_spacing.is_finite()) {
            return Err(Error::Config(format!("base_spacing must be positive, got {}", self.base_spacing)));
        }
        if self.divisors.is_empty() || self.divisors[0] == 0 || self.divisors.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!(
                "levels must be strictly increasing positive integers, got {:?}",
                self.divisors
            )));
        }
        if !(self.quad_scale > 0.0 && self.quad_scale.is_finite()) {
            return Err(Error::Config(format!("quad_scale must be positive, got {}", self.quad_scale)));
        }
        if !(self.quad_tol > 0.0) {
            return Err(Error::Config(format!("quad_tol must be positive, got {}", self.quad_tol)));
        }
        if !self.weight_exponent.is_finite() {
            return Err(Error::Config("weight_exp must be finite".into()));
        }
        Ok(())
    }

    pub fn spacing(&self, divisor: u32) -> f64 {
        self.base_spacing / divisor as f64
    }

    /// `key = value` lines that reproduce this config.
    pub fn to_text(&self) -> String {
        let join = |v: Vec<String>| v.join(",");
        let mut s = String::new();
        let _ = writeln!(s, "tau = {}", join(self.taus.iter().map(|t| t.to_string()).collect()));
        let _ = writeln!(s, "epsilon = {}", self.epsilon);
        let _ = writeln!(s, "kappa = {}", self.kappa);
        let _ = writeln!(s, "base_spacing = {}", self.base_spacing);
        let _ = writeln!(s, "levels = {}", join(self.divisors.iter().map(|k| k.to_string()).collect()));
        let _ = writeln!(s, "weight_exp = {}", self.weight_exponent);
        let _ = writeln!(s, "quad_scale = {}", self.quad_scale);
        let _ = writeln!(s, "quad_tol = {:e}", self.quad_tol);
        let _ = writeln!(s, "quad_max_doublings = {}", self.quad_max_doublings);
        let _ = writeln!(s, "q = {}", self.q);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "cond = {}", self.compute_cond);
        let _ = writeln!(s, "dump_system = {}", self.dump_system);
        s
    }
}

/// What to compute at each level.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LevelTasks {
    pub errors: bool,
    pub cond: bool,
}

/// Everything measured at one `(tau, level)`.
#[derive(Clone, Debug)]
pub struct LevelOutcome {
    pub tau: f64,
    pub divisor: u32,
    pub spacing: f64,
    pub h_fill: f64,
    pub n: usize,
    pub report: Option<ErrorReport>,
    pub spectrum: Option<SpectrumEstimate>,
    /// `||A c - b|| / ||b||`, if the solve went through.
    pub relative_residual: Option<f64>,
    /// `(max L_ii / min L_ii)^2` from the Cholesky factor.
    pub pivot_ratio: Option<f64>,
    pub warnings: Vec<String>,
    /// Quadrature actually used and the drift of `A` when it is doubled.
    pub quadrature: Option<ResolutionChoice>,
    pub wall: Duration,
    pub solution: Option<DiscreteSolution>,
    pub system: Option<Arc<LsqSystem>>,
}

impl LevelOutcome {
    /// Flagged as ill-conditioned or failed.
    pub fn warned(&self) -> bool {
        !self.warnings.is_empty()
    }
}

/// Runs the full pipeline for one level.
pub fn run_level(
    config: &StudyConfig,
    tau: f64,
    divisor: u32,
    problem: &ManufacturedProblem,
    tasks: LevelTasks,
) -> Result<LevelOutcome> {
    let start = Instant::now();
    let domain = DiskDomain::unit();
    let spacing = config.spacing(divisor);
    let wrap = |e: Error| Error::Level { level: divisor as usize, source: Box::new(e) };
    let spec = KernelSpec::for_second_order(tau, config.epsilon, 2).map_err(wrap)?;
    let nodes = regular_disk_nodes(&domain, spacing).map_err(wrap)?;
    let basis = Arc::new(TrialBasis::new(spec, nodes).map_err(wrap)?);
    let weight = basis.nodes().h_fill.powf(-config.weight_exponent);
    let choice = select_resolution(
        &basis,
        problem.operator(),
        &domain,
        weight,
        QuadratureResolution::for_spacing(spacing, config.quad_scale),
        config.quad_tol,
        config.quad_max_doublings,
    )
    .map_err(wrap)?;
    let (q_in, q_bd) = choice.resolution.rules(&domain).map_err(wrap)?;
    let system = assemble_basis(basis, problem.operator(), &q_in, &q_bd, config.weight_exponent).map_err(wrap)?;
    let b = system.assemble_rhs(problem);
    let mut outcome = LevelOutcome {
        tau,
        divisor,
        spacing,
        h_fill: system.h(),
        n: system.len(),
        report: None,
        spectrum: None,
        relative_residual: None,
        pivot_ratio: None,
        warnings: Vec::new(),
        quadrature: Some(choice),
        wall: Duration::ZERO,
        solution: None,
        system: None,
    };
    if config.dump_system {
        if let Some(dir) = &config.out {
            fs::create_dir_all(dir)?;
            let stem = format!("tau{tau}_k{divisor}");
            system.write_matrix(BufWriter::new(fs::File::create(dir.join(format!("A_{stem}.mat")))?))?;
            write_vector(BufWriter::new(fs::File::create(dir.join(format!("b_{stem}.vec")))?), &b)?;
        }
    }
    match cholesky(&system.matrix) {
        Ok(factor) => {
            let c = factor.solve(&b);
            let ax = system.matrix.matvec(&c);
            let r: Vec<f64> = ax.iter().zip(&b).map(|(p, q)| p - q).collect();
            let rel = norm2(&r) / norm2(&b).max(f64::MIN_POSITIVE);
            let ratio = factor.pivot_ratio();
            outcome.relative_residual = Some(rel);
            outcome.pivot_ratio = Some(ratio);
            if ratio > COND_WARN {
                outcome.warnings.push(format!("pivot ratio {ratio:.3e} exceeds {COND_WARN:.0e}"));
            }
            let sol = DiscreteSolution::from_system(&system, c).map_err(wrap)?;
            if tasks.errors {
                let eval = EvaluationSets::standard(&domain);
                outcome.report = Some(error_report(&sol, problem, &eval, &system));
            }
            outcome.solution = Some(sol);
        }
        Err(e @ Error::NotPositiveDefinite { .. }) => {
            outcome.warnings.push(format!("Cholesky failed: {e}"));
        }
        Err(e) => return Err(wrap(e)),
    }
    if tasks.cond && outcome.solution.is_some() {
        match condition_number(&system.matrix) {
            Ok(s) => {
                if s.cond > COND_WARN && outcome.pivot_ratio.map_or(true, |p| p <= COND_WARN) {
                    outcome.warnings.push(format!("condition number {:.3e} exceeds {COND_WARN:.0e}", s.cond));
                }
                if !s.converged {
                    outcome.warnings.push("condition estimate hit its iteration cap".into());
                }
                outcome.spectrum = Some(s);
            }
            Err(e) => outcome.warnings.push(format!("condition estimate failed: {e}")),
        }
    }
    if let Some(r) = outcome.report.as_mut() {
        r.cond = outcome.spectrum.map(|s| s.cond);
    }
    outcome.system = Some(Arc::new(system));
    outcome.wall = start.elapsed();
    Ok(outcome)
}

/// Single solve at the first `tau` and first level of `config`.
pub fn run_solve(config: &StudyConfig) -> Result<LevelOutcome> {
    config.validate()?;
    let problem = radial_power_solution(config.kappa, benchmark_operator())?;
    run_level(config, config.taus[0], config.divisors[0], &problem, LevelTasks { errors: true, cond: config.compute_cond })
}

/// Manufactured problem whose truth is the trial function centred at `center`.
pub fn trial_space_problem(spec: KernelSpec, center: Vec<f64>) -> Result<ManufacturedProblem> {
    ManufacturedProblem::new(benchmark_operator(), Arc::new(ShiftedKernel::new(spec, center)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StudyKind {
    Convergence,
    Condition,
}

/// Two-level orders of one row against the previous row of its block.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RowOrders {
    pub l2: Option<f64>,
    pub bdry: Option<f64>,
    pub residual: Option<f64>,
    pub energy: Option<f64>,
    pub cond: Option<f64>,
}

/// Theoretical orders for a `tau` block; `None` outside the theory's range.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TheoryOrders {
    pub l2: f64,
    pub bdry: f64,
    pub residual: f64,
    pub energy: f64,
}

/// Targets `k - t` with `k` the Sobolev index of the solution, for
/// `t = 0, 1/2, 2, 2`; only when the kernel is at least as smooth as `u`.
pub fn theory_orders(tau: f64, kappa: f64, dim: usize) -> Option<TheoryOrders> {
    let k = kappa + dim as f64 / 2.0;
    (tau >= k).then_some(TheoryOrders { l2: k, bdry: k - 0.5, residual: k - 2.0, energy: k - 2.0 })
}

#[derive(Clone, Debug)]
pub struct StudyReport {
    pub kind: StudyKind,
    pub config: StudyConfig,
    pub rows: Vec<LevelOutcome>,
}

fn pair_order(a: Option<f64>, b: Option<f64>, h1: f64, h2: f64) -> Option<f64> {
    convergence_order(a?, b?, h1, h2).ok()
}

impl StudyReport {
    /// Orders of row `i` against row `i - 1` when both belong to the same `tau`.
    pub fn orders(&self, i: usize) -> RowOrders {
        if i == 0 || self.rows[i - 1].tau != self.rows[i].tau {
            return RowOrders::default();
        }
        let (p, r) = (&self.rows[i - 1], &self.rows[i]);
        let f = |g: fn(&ErrorReport) -> f64| {
            pair_order(p.report.as_ref().map(g), r.report.as_ref().map(g), p.h_fill, r.h_fill)
        };
        RowOrders {
            l2: f(|e| e.l2_rms),
            bdry: f(|e| e.bdry_l2),
            residual: f(|e| e.residual_l2),
            energy: f(|e| e.energy),
            cond: pair_order(p.spectrum.map(|s| s.cond), r.spectrum.map(|s| s.cond), p.h_fill, r.h_fill),
        }
    }

    pub fn block(&self, tau: f64) -> impl Iterator<Item = (usize, &LevelOutcome)> {
        self.rows.iter().enumerate().filter(move |(_, r)| r.tau == tau)
    }

    /// Orders between the two finest rows of a block that carry no warning.
    pub fn finest_clean_orders(&self, tau: f64) -> Option<(u32, u32, RowOrders)> {
        let clean: Vec<&LevelOutcome> =
            self.block(tau).map(|(_, r)| r).filter(|r| !r.warned() && r.solution.is_some()).collect();
        if clean.len() < 2 {
            return None;
        }
        let (p, r) = (clean[clean.len() - 2], clean[clean.len() - 1]);
        let f = |g: fn(&ErrorReport) -> f64| {
            pair_order(p.report.as_ref().map(g), r.report.as_ref().map(g), p.h_fill, r.h_fill)
        };
        Some((
            p.divisor,
            r.divisor,
            RowOrders {
                l2: f(|e| e.l2_rms),
                bdry: f(|e| e.bdry_l2),
                residual: f(|e| e.residual_l2),
                energy: f(|e| e.energy),
                cond: pair_order(p.spectrum.map(|s| s.cond), r.spectrum.map(|s| s.cond), p.h_fill, r.h_fill),
            },
        ))
    }

    /// Least-squares slope of `log cond` against `log h` over the non-warned
    /// rows of a block with a condition number.
    pub fn cond_slope(&self, tau: f64) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .block(tau)
            .filter_map(|(_, r)| r.spectrum.filter(|_| !r.warned()).map(|s| (r.h_fill.ln(), s.cond.ln())))
            .collect();
        log_log_slope(&pts)
    }

    pub fn csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for (i, r) in self.rows.iter().enumerate() {
            let o = self.orders(i);
            let e = r.report.as_ref();
            let cols = [
                fmt_g(r.tau),
                r.divisor.to_string(),
                sci(r.spacing),
                sci(r.h_fill),
                r.n.to_string(),
                opt_sci(e.map(|e| e.l2_rms)),
                opt_ord(o.l2),
                opt_sci(e.map(|e| e.bdry_l2)),
                opt_ord(o.bdry),
                opt_sci(e.map(|e| e.residual_l2)),
                opt_ord(o.residual),
                opt_sci(e.map(|e| e.energy)),
                opt_ord(o.energy),
                opt_sci(r.spectrum.map(|s| s.cond)),
                opt_ord(o.cond),
                (r.warned() as u8).to_string(),
            ];
            s.push_str(&cols.join(","));
            s.push('\n');
        }
        s
    }

    /// Aligned text tables shaped like the published error and condition tables.
    pub fn text(&self) -> String {
        let mut s = String::new();
        let mut taus: Vec<f64> = self.rows.iter().map(|r| r.tau).collect();
        taus.dedup();
        for tau in taus {
            let _ = writeln!(s, "tau = {}", fmt_g(tau));
            match self.kind {
                StudyKind::Convergence => {
                    let _ = writeln!(
                        s,
                        "{:>8} {:>6} {:>12} {:>8} {:>12} {:>8} {:>12} {:>8} {:>12} {:>8} {:>12} {}",
                        "h", "N", "L2", "order", "bdry", "order", "L e", "order", "energy", "order", "cond", "warn"
                    );
                }
                StudyKind::Condition => {
                    let _ = writeln!(s, "{:>8} {:>6} {:>12} {:>8} {}", "h", "N", "cond", "order", "warn");
                }
            }
            for (i, r) in self.block(tau) {
                let o = self.orders(i);
                let e = r.report.as_ref();
                let label = if r.divisor == 1 { fmt_g(self.config.base_spacing) } else { format!("h/{}", r.divisor) };
                let warn = if r.warned() { "*" } else { "" };
                match self.kind {
                    StudyKind::Convergence => {
                        let _ = writeln!(
                            s,
                            "{:>8} {:>6} {:>12} {:>8} {:>12} {:>8} {:>12} {:>8} {:>12} {:>8} {:>12} {}",
                            label,
                            r.n,
                            or_dash(e.map(|e| sci(e.l2_rms))),
                            or_dash(o.l2.map(ord)),
                            or_dash(e.map(|e| sci(e.bdry_l2))),
                            or_dash(o.bdry.map(ord)),
                            or_dash(e.map(|e| sci(e.residual_l2))),
                            or_dash(o.residual.map(ord)),
                            or_dash(e.map(|e| sci(e.energy))),
                            or_dash(o.energy.map(ord)),
                            or_dash(r.spectrum.map(|s| sci(s.cond))),
                            warn
                        );
                    }
                    StudyKind::Condition => {
                        let _ = writeln!(
                            s,
                            "{:>8} {:>6} {:>12} {:>8} {}",
                            label,
                            r.n,
                            or_dash(r.spectrum.map(|s| sci(s.cond))),
                            or_dash(o.cond.map(ord)),
                            warn
                        );
                    }
                }
            }
            match self.kind {
                StudyKind::Convergence => {
                    if let Some((k1, k2, o)) = self.finest_clean_orders(tau) {
                        let _ = writeln!(
                            s,
                            "finest clean pair h/{k1}, h/{k2}: L2 {}  bdry {}  L e {}  energy {}",
                            or_dash(o.l2.map(ord)),
                            or_dash(o.bdry.map(ord)),
                            or_dash(o.residual.map(ord)),
                            or_dash(o.energy.map(ord))
                        );
                    }
                    match theory_orders(tau, self.config.kappa, 2) {
                        Some(t) => {
                            let _ = writeln!(
                                s,
                                "theory: L2 {}  bdry {}  L e {}  energy {}",
                                fmt_g(t.l2),
                                fmt_g(t.bdry),
                                fmt_g(t.residual),
                                fmt_g(t.energy)
                            );
                        }
                        None => {
                            let _ = writeln!(s, "theory: not covered (tau below the Sobolev index of u)");
                        }
                    }
                }
                StudyKind::Condition => {
                    if let Some(p) = self.cond_slope(tau) {
                        let _ = writeln!(s, "fitted slope of log cond vs log h: {}  (theory {})", ord(p), fmt_g(-4.0 * tau));
                    }
                }
            }
            s.push('\n');
        }
        s
    }

    /// Config echo, version and per-level timings and warnings.
    pub fn meta(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# kernel-lsq {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "# study = {:?}", self.kind);
        s.push_str(&self.config.to_text());
        for r in &self.rows {
            let quad = r.quadrature.map_or(String::new(), |q| {
                format!(
                    " quadrature {}x{}+{} drift {}{}",
                    q.resolution.n_r,
                    q.resolution.n_theta,
                    q.resolution.n_b,
                    sci(q.drift),
                    if q.converged { "" } else { " (above tolerance)" }
                )
            });
            let _ = writeln!(
                s,
                "# tau {} level {}: N {}{quad} wall {:.3} s{}",
                fmt_g(r.tau),
                r.divisor,
                r.n,
                r.wall.as_secs_f64(),
                if r.warnings.is_empty() { String::new() } else { format!("; {}", r.warnings.join("; ")) }
            );
        }
        s
    }

    /// Writes `study.csv`, `study.txt` and `meta.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("study.csv"), self.csv())?;
        fs::write(dir.join("study.txt"), self.text())?;
        fs::write(dir.join("meta.txt"), self.meta())?;
        Ok(())
    }
}

/// Least-squares slope of `y` against `x`.
pub fn log_log_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn run_study(config: &StudyConfig, kind: StudyKind, progress: &mut dyn FnMut(&LevelOutcome)) -> Result<StudyReport> {
    config.validate()?;
    let problem = radial_power_solution(config.kappa, benchmark_operator())?;
    let tasks = match kind {
        StudyKind::Convergence => LevelTasks { errors: true, cond: config.compute_cond },
        StudyKind::Condition => LevelTasks { errors: false, cond: true },
    };
    let mut rows = Vec::new();
    for &tau in &config.taus {
        for &k in &config.divisors {
            let mut row = run_level(config, tau, k, &problem, tasks)?;
            // keep the report light; solutions and systems are only needed per level
            row.system = None;
            progress(&row);
            rows.push(row);
        }
    }
    let report = StudyReport { kind, config: config.clone(), rows };
    if let Some(dir) = &config.out {
        report.write(dir)?;
    }
    Ok(report)
}

/// Error norms and orders for every `(tau, level)`.
pub fn run_convergence_study(config: &StudyConfig, progress: &mut dyn FnMut(&LevelOutcome)) -> Result<StudyReport> {
    run_study(config, StudyKind::Convergence, progress)
}

/// Condition numbers and orders for every `(tau, level)`.
pub fn run_cond_study(config: &StudyConfig, progress: &mut dyn FnMut(&LevelOutcome)) -> Result<StudyReport> {
    run_study(config, StudyKind::Condition, progress)
}

/// Scientific notation with 6 significant digits and a two-digit exponent.
pub fn sci(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let s = format!("{x:.5e}");
    let (mant, exp) = s.split_once('e').expect("exponent present");
    let e: i32 = exp.parse().expect("integer exponent");
    format!("{mant}e{}{:02}", if e < 0 { '-' } else { '+' }, e.abs())
}

fn ord(x: f64) -> String {
    format!("{x:.4}")
}

fn fmt_g(x: f64) -> String {
    format!("{x}")
}

fn opt_sci(x: Option<f64>) -> String {
    x.map(sci).unwrap_or_default()
}

fn opt_ord(x: Option<f64>) -> String {
    x.map(ord).unwrap_or_default()
}

fn or_dash(x: Option<String>) -> String {
    x.unwrap_or_else(|| "-".into())
}

/// One line of the self test.
#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Quick oracle-backed checks of the main building blocks.
pub fn selftest() -> Vec<Check> {
    use crate::specfun::bessel_k;
    let mut out = Vec::new();
    let mut push = |name, passed, detail: String| out.push(Check { name, passed, detail });

    // K_{1/2}(z) = sqrt(pi / (2 z)) e^{-z}
    let worst = [0.01, 0.5, 1.0, 3.0, 10.0, 40.0]
        .iter()
        .map(|&z: &f64| {
            let exact = (std::f64::consts::PI / (2.0 * z)).sqrt() * (-z).exp();
            ((bessel_k(0.5, z).unwrap_or(f64::NAN) - exact) / exact).abs()
        })
        .fold(0.0, f64::max);
    push("bessel half-integer closed form", worst <= 1e-13, format!("max rel err {worst:.2e}"));

    let p = convergence_order(6.0793e-02, 1.0943e-02, 0.25 / 6.0, 0.25 / 8.0).unwrap_or(f64::NAN);
    push("convergence order arithmetic", (p - 5.9607).abs() < 5e-5, format!("order {p:.4}"));

    let result = (|| -> Result<f64> {
        let spec = KernelSpec::new(4.0, 10.0, 2)?;
        let domain = DiskDomain::unit();
        let nodes = regular_disk_nodes(&domain, 0.5)?;
        let j = nodes.len() / 2;
        let problem = trial_space_problem(spec, nodes.points().point(j).to_vec())?;
        let (qi, qb) = QuadratureResolution::for_spacing(0.5, 1.0).rules(&domain)?;
        let sys = assemble_matrix_weighted(spec, nodes, problem.operator(), &qi, &qb, DEFAULT_WEIGHT_EXPONENT)?;
        let c = cholesky(&sys.matrix)?.solve(&sys.assemble_rhs(&problem));
        Ok(c.iter().enumerate().map(|(i, v)| (v - if i == j { 1.0 } else { 0.0 }).abs()).fold(0.0, f64::max))
    })();
    match result {
        Ok(err) => push("trial-space exactness", err <= 1e-7, format!("max coefficient error {err:.2e}")),
        Err(e) => push("trial-space exactness", false, e.to_string()),
    }
    out
}
