//! Configuration-driven front end: runs a study and writes CSV artifacts.

mod config;

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use config::{OrbitalKind, RunConfig};

use crate::conv::ConvolutionPlan;
use crate::error::Error;
use crate::extension::{extend, harmonicity_residual, sup_bound_check, ResolutionPolicy};
use crate::grid::{EvalWindow, GridSpec, LaplacianMethod, NormKind, ScalarField};
use crate::hf::{self, HfFields, MolecularSystem, OrbitalSet};
use crate::kernels::{sample, AnalyticFunction};
use crate::scf::{self, ScfResult};
use crate::transform::{self, ResidualReport};

/// Overrides the configured output directory when `--out` is absent.
pub const OUT_ENV: &str = "CONVOLVE_HF_OUT";

const WINDOW: EvalWindow = EvalWindow::Interior(0.8);
const RANDOM_POINTS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Scf,
    ExtendSweep,
    Residuals,
    Expand,
    Verify,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitCode {
    Success = 0,
    Config = 1,
    NonConvergence = 2,
    Invariant = 3,
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub grid_n: Option<usize>,
    pub quiet: bool,
}

#[derive(Debug)]
pub struct Failure {
    pub code: ExitCode,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Invariant(_) => ExitCode::Invariant,
            _ => ExitCode::Config,
        };
        Failure { code, message: e.to_string() }
    }
}

fn fail(code: ExitCode, message: impl Into<String>) -> Failure {
    Failure { code, message: message.into() }
}

type Outcome = std::result::Result<(), Failure>;

/// Loads the config, applies flag overrides and runs `command`.
pub fn run(command: Command, config_path: &Path, opts: &RunOptions) -> ExitCode {
    let result = load(config_path, opts).and_then(|(cfg, out)| {
        std::fs::create_dir_all(&out)
            .map_err(|e| fail(ExitCode::Config, format!("cannot create {}: {e}", out.display())))?;
        let ctx = Context { cfg, out, quiet: opts.quiet };
        match command {
            Command::Scf => ctx.scf(),
            Command::ExtendSweep => ctx.extend_sweep(),
            Command::Residuals => ctx.residuals(),
            Command::Expand => ctx.expand(),
            Command::Verify => ctx.verify(),
        }
    });
    match result {
        Ok(()) => ExitCode::Success,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn load(path: &Path, opts: &RunOptions) -> std::result::Result<(RunConfig, PathBuf), Failure> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(n) = opts.grid_n {
        cfg.grid_n = n;
    }
    cfg.validate()?;
    let out = opts
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| cfg.output_dir.clone());
    Ok((cfg, out))
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> std::result::Result<Vec<u8>, Failure> {
    let io = |e: csv::Error| fail(ExitCode::Config, format!("csv: {e}"));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    w.into_inner().map_err(|e| fail(ExitCode::Config, format!("csv: {e}")))
}

/// Writes to a hidden temporary file in `dir`, then renames it into place.
fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Outcome {
    let tmp = dir.join(format!(".{name}.tmp"));
    let target = dir.join(name);
    std::fs::write(&tmp, bytes)
        .and_then(|_| std::fs::rename(&tmp, &target))
        .map_err(|e| fail(ExitCode::Config, format!("cannot write {}: {e}", target.display())))
}

struct Prepared {
    grid: GridSpec,
    plan: ConvolutionPlan,
    system: MolecularSystem,
    orbitals: OrbitalSet,
    fields: HfFields,
}

struct Context {
    cfg: RunConfig,
    out: PathBuf,
    quiet: bool,
}

impl Context {
    fn write_csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Outcome {
        write_atomic(&self.out, name, &csv_bytes(header, rows)?)
    }

    fn say(&self, line: &str) {
        if !self.quiet {
            println!("{line}");
        }
    }

    fn solve(&self) -> std::result::Result<ScfResult, Failure> {
        let grid = self.cfg.grid()?;
        Ok(scf::solve(&self.cfg.system()?, &grid, &self.cfg.scf)?)
    }

    fn random_orbital(&self, grid: &GridSpec, centre: [f64; 3]) -> ScalarField {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.orbital_seed);
        let lobes: Vec<([f64; 3], f64, f64)> = (0..4)
            .map(|_| {
                let c = [0, 1, 2].map(|k| centre[k] + rng.random_range(-1.0..1.0));
                (c, rng.random_range(0.3..1.5), rng.random_range(-1.0..1.0))
            })
            .collect();
        let f = ScalarField::from_real_fn(*grid, |x| {
            lobes
                .iter()
                .map(|(c, a, w)| {
                    let r2: f64 = (0..3).map(|k| (x[k] - c[k]).powi(2)).sum();
                    w * (-a * r2).exp()
                })
                .sum()
        });
        hf::normalize(&f)
    }

    /// Orbital and fields selected by `orbital.kind`.
    fn prepare(&self) -> std::result::Result<Prepared, Failure> {
        let cfg = &self.cfg;
        let grid = cfg.grid()?;
        let plan = ConvolutionPlan::new(grid);
        let system = cfg.system()?;
        let centre = system.charge_barycentre();
        let eps = vec![cfg.orbital_epsilon];
        let orbitals = match cfg.orbital_kind {
            OrbitalKind::Scf => {
                let r = self.solve()?;
                if !r.converged {
                    return Err(fail(
                        ExitCode::NonConvergence,
                        format!("SCF did not converge in {} iterations", r.iterations),
                    ));
                }
                r.orbitals
            }
            OrbitalKind::Slater1s => {
                let f = sample(&AnalyticFunction::slater_1s(system.nuclei()[0].position)?, &grid)?;
                OrbitalSet::new(vec![hf::normalize(&f)], eps)?
            }
            OrbitalKind::Gaussian => OrbitalSet::new(vec![hf::gaussian_orbital(&grid, cfg.orbital_alpha, centre)], eps)?,
            OrbitalKind::Random => OrbitalSet::new(vec![self.random_orbital(&grid, centre)], eps)?,
            OrbitalKind::Zero => OrbitalSet::unchecked(vec![ScalarField::zeros(grid)], eps)?,
        };
        let fields = if cfg.electron_terms {
            HfFields::build(&system, &orbitals, &plan)?
        } else {
            HfFields::nuclear_only(&system, &grid, orbitals.len())?
        };
        Ok(Prepared { grid, plan, system, orbitals, fields })
    }

    fn scf(&self) -> Outcome {
        let r = self.solve()?;
        let grid = self.cfg.grid()?;
        let history: Vec<Vec<String>> = r
            .history
            .iter()
            .map(|s| vec![s.iteration.to_string(), num(s.energy), num(s.orbital_change), num(s.epsilon)])
            .collect();
        self.write_csv("scf_history.csv", &["iteration", "energy", "orbital_change", "epsilon"], &history)?;

        let n = grid.n();
        let psi = &r.orbitals.orbitals()[0];
        let mut plane = Vec::with_capacity(n * n);
        for ix in 0..n {
            for iy in 0..n {
                let v = psi.values()[grid.index(ix, iy, n / 2)].re;
                plane.push(vec![num(grid.coord(ix)), num(grid.coord(iy)), num(v)]);
            }
        }
        self.write_csv("orbital_z0.csv", &["x", "y", "value"], &plane)?;

        let system = self.cfg.system()?;
        let points = hf::random_points(&grid, RANDOM_POINTS, self.cfg.orbital_seed);
        let bounds = hf::check_theorem1_bounds(&r.orbitals, &system, &r.fields, &points)?;
        let e = &r.energies;
        let mut s = String::new();
        let _ = writeln!(s, "converged = {}", r.converged);
        let _ = writeln!(s, "iterations = {}", r.iterations);
        let _ = writeln!(s, "kinetic = {:e}", e.kinetic);
        let _ = writeln!(s, "nuclear_attraction = {:e}", e.nuclear_attraction);
        let _ = writeln!(s, "hartree = {:e}", e.hartree);
        let _ = writeln!(s, "exchange = {:e}", e.exchange);
        let _ = writeln!(s, "nuclear_repulsion = {:e}", e.nuclear_repulsion);
        let _ = writeln!(s, "potential = {:e}", e.potential);
        let _ = writeln!(s, "total_energy = {:e}", e.total);
        let _ = writeln!(s, "orbital_energy = {:e}", r.orbitals.energies()[0]);
        let _ = writeln!(s, "virial_ratio = {:e}", e.virial_ratio);
        let _ = writeln!(s, "fock_residual = {:e}", r.fock_residual);
        let _ = writeln!(s, "orbital_sup = {:e}", r.orbitals.max_sup());
        let _ = writeln!(s, "bound_preconditions_met = {}", bounds.preconditions_met);
        let _ = writeln!(s, "max_weighted_l2 = {:e}", bounds.max_weighted_l2);
        let _ = writeln!(s, "weighted_l2_bound = {:e}", bounds.weighted_l2_bound);
        let _ = writeln!(s, "weighted_l2_passed = {}", bounds.weighted_l2_passed);
        let _ = writeln!(s, "max_exchange_sup = {:e}", bounds.max_exchange_sup);
        let _ = writeln!(s, "exchange_bound = {:e}", bounds.exchange_bound);
        let _ = writeln!(s, "exchange_passed = {}", bounds.exchange_passed);
        write_atomic(&self.out, "summary.txt", s.as_bytes())?;
        self.say(&s);

        if r.converged {
            Ok(())
        } else {
            Err(fail(ExitCode::NonConvergence, format!("SCF did not converge in {} iterations", r.iterations)))
        }
    }

    fn extend_sweep(&self) -> Outcome {
        let p = self.prepare()?;
        let base = &p.orbitals.orbitals()[0];
        let limit = 2.0 * p.grid.spacing();
        let mut rows = Vec::new();
        for t in self.cfg.heights() {
            let d = 0.1 * t;
            let ext = extend(base, &[t - d, t, t + d], &p.plan, ResolutionPolicy::Allow)?;
            let u = ext.slice(1);
            let diff = u - base;
            let sup = u.norm(NormKind::Sup);
            let bound = 4.0 / (PI * t);
            let defect = harmonicity_residual(&ext, 1, LaplacianMethod::FiniteDifference, WINDOW)?;
            let mut flags = Vec::new();
            // the height stencil reaches down to t - d
            if t - d < limit {
                flags.push("unresolved");
            }
            if sup > bound {
                log::warn!("sup norm {sup} exceeds 4/(pi t) = {bound} at t = {t}");
                flags.push("decay_bound_exceeded");
            }
            let status = if flags.is_empty() { "ok".to_string() } else { flags.join(";") };
            rows.push(vec![
                num(t),
                num(diff.norm(NormKind::L2)),
                num(diff.norm(NormKind::Sup)),
                num(sup),
                num(bound),
                num(defect),
                status,
            ]);
        }
        self.write_csv(
            "extension_sweep.csv",
            &["t", "l2_distance", "sup_distance", "sup_norm", "paper_bound_4_over_pi_t", "harmonicity_defect", "status"],
            &rows,
        )
    }

    fn residuals(&self) -> Outcome {
        let p = self.prepare()?;
        let (o, f, plan) = (&p.orbitals, &p.fields, &p.plan);
        let method = LaplacianMethod::Spectral;
        let limit = 2.0 * p.grid.spacing();
        let w = AnalyticFunction::gaussian(self.cfg.window_alpha, [0.0; 3])?;
        let mut rows = Vec::new();

        let eps = o.energies()[0];
        let mask = p.system.regular_mask(&p.grid, method);
        let mut terms = hf::strong_terms(0, o.orbitals(), eps, f, method)?;
        for t in terms.iter_mut() {
            hf::apply_mask(t, &mask);
        }
        let strong = hf::residual_strong(0, o, f, &p.system, method)?;
        let strong_report = transform::report(
            "strong",
            &[("laplacian", &terms[0]), ("potential", &terms[1]), ("exchange", &terms[2])],
            &strong,
            WINDOW,
        );
        rows.push(report_row(&strong_report, "", "ok", None));

        for t in self.cfg.heights() {
            if t < limit {
                rows.push(unresolved_row("thm4", t));
                continue;
            }
            let r = transform::residual_theorem4(0, o, f, t, plan, WINDOW)?;
            rows.push(report_row(&r.report, &num(t), "ok", None));
        }
        let r5 = transform::residual_theorem5(0, o, f, &w, plan, WINDOW)?;
        rows.push(report_row(&r5.report, &num(self.cfg.window_alpha), "ok", None));
        let lit = transform::literal_theorem5(0, o, f, &w, plan, WINDOW)?;
        rows.push(report_row(&lit.report, &num(self.cfg.window_alpha), "ok", None));

        for t in self.cfg.heights() {
            if t < limit {
                rows.push(unresolved_row("thm4_vs_strong_crosscheck", t));
                continue;
            }
            let c = transform::crosscheck_theorem4(0, o, f, t, plan, method, WINDOW)?;
            rows.push(cross_row("thm4_vs_strong_crosscheck", &num(t), &c));
        }
        let c5 = transform::crosscheck_theorem5(0, o, f, &w, plan, method, WINDOW)?;
        rows.push(cross_row("thm5_vs_strong_crosscheck", &num(self.cfg.window_alpha), &c5));

        self.write_csv("residuals.csv", &RESIDUAL_HEADER, &rows)
    }

    fn expand(&self) -> Outcome {
        let p = self.prepare()?;
        let limit = 2.0 * p.grid.spacing();
        let t = self
            .cfg
            .heights()
            .into_iter()
            .find(|&t| t >= limit)
            .ok_or_else(|| fail(ExitCode::Config, format!("poisson.t_values: no height at or above 2h = {limit}")))?;
        let w = AnalyticFunction::gaussian(self.cfg.window_alpha, [0.0; 3])?;
        let basis = transform::even_tempered_basis(self.cfg.basis_alpha0, self.cfg.basis_beta, self.cfg.basis_count)?;
        let orders: Vec<usize> = (1..=self.cfg.basis_count).collect();
        let state = transform::project_orbitals(&p.orbitals, &p.system, &basis, &orders, &p.plan)?;
        let r6 = transform::residual_theorem6(&state, 0, t, &orders, &p.plan, WINDOW)?;
        let r7 = transform::residual_theorem7(&state, 0, &w, &orders, &p.plan, WINDOW)?;
        let mut rows = Vec::new();
        for (k, &n) in orders.iter().enumerate() {
            rows.push(vec![
                n.to_string(),
                num(state.fit_error(n, 0)?),
                num(r6[k].total_sup),
                num(r6[k].total_l2),
                num(r7[k].total_sup),
                num(r7[k].total_l2),
                num(state.k_bound()),
            ]);
        }
        self.write_csv(
            "expansion_ladder.csv",
            &["n", "fit_error_l2", "thm6_sup", "thm6_l2", "thm7_sup", "thm7_l2", "K_bound"],
            &rows,
        )
    }

    fn verify(&self) -> Outcome {
        let p = self.prepare()?;
        let mut checks: Vec<Check> = Vec::new();

        let sup = p.orbitals.max_sup();
        checks.push(Check::at_most("orbital_sup_norm", "Theorem 4(b) precondition", sup, 1.0));

        let points = hf::random_points(&p.grid, RANDOM_POINTS, self.cfg.orbital_seed);
        let b = hf::check_theorem1_bounds(&p.orbitals, &p.system, &p.fields, &points)?;
        checks.push(Check::at_most("exchange_field_sup", "exchange field bound 2 sqrt(pi) + 1", b.max_exchange_sup, b.exchange_bound));
        checks.push(Check::at_most("weighted_l2", "Theorem 1 bound 4 pi + 1", b.max_weighted_l2, b.weighted_l2_bound));

        let f = hf::gaussian_orbital(&p.grid, 0.5, [0.0; 3]);
        let g = hf::gaussian_orbital(&p.grid, 1.0, [0.5, 0.0, 0.0]);
        let defect = transform::theorem2_symmetry_defect(&f, &g, &p.plan)?;
        checks.push(Check::at_most("laplacian_symmetry", "Theorem 2", defect, 1e-6));

        let ext = extend(&p.orbitals.orbitals()[0], &self.cfg.heights(), &p.plan, ResolutionPolicy::Allow)?;
        let rep = sup_bound_check(&ext);
        for r in &rep.rows {
            checks.push(Check::at_most(&format!("extension_sup_t={}", num(r.t)), "Theorem 4(b)", r.sup, r.decay_bound));
            checks.push(Check::at_most(&format!("extension_unit_t={}", num(r.t)), "maximum principle", r.sup, r.unit_bound));
        }

        let rows: Vec<Vec<String>> = checks
            .iter()
            .map(|c| {
                vec![
                    c.name.clone(),
                    c.reference.to_string(),
                    num(c.value),
                    num(c.bound),
                    if c.pass { "pass" } else { "fail" }.to_string(),
                ]
            })
            .collect();
        self.write_csv("verify.csv", &["check", "reference", "value", "bound", "result"], &rows)?;
        for c in &checks {
            self.say(&format!(
                "{:<4}  {:<26} {:>14.6e} <= {:<14.6e} {}",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.bound,
                c.reference
            ));
        }
        let failed: Vec<String> =
            checks.iter().filter(|c| !c.pass).map(|c| format!("{} ({} = {:e} > {:e})", c.reference, c.name, c.value, c.bound)).collect();
        if failed.is_empty() {
            Ok(())
        } else {
            Err(fail(ExitCode::Invariant, format!("invariant violated: {}", failed.join("; "))))
        }
    }
}

struct Check {
    name: String,
    reference: &'static str,
    value: f64,
    bound: f64,
    pass: bool,
}

impl Check {
    fn at_most(name: &str, reference: &'static str, value: f64, bound: f64) -> Self {
        Check { name: name.to_string(), reference, value, bound, pass: value <= bound }
    }
}

const RESIDUAL_HEADER: [&str; 15] = [
    "pipeline",
    "parameter",
    "status",
    "term1_l2",
    "term1_sup",
    "term2_l2",
    "term2_sup",
    "term3_l2",
    "term3_sup",
    "term4_l2",
    "term4_sup",
    "total_l2",
    "total_sup",
    "relative",
    "ratio",
];

fn report_row(r: &ResidualReport, parameter: &str, status: &str, ratio: Option<f64>) -> Vec<String> {
    let mut row = vec![r.label.to_string(), parameter.to_string(), status.to_string()];
    for k in 0..4 {
        match r.terms.get(k) {
            Some(t) => row.extend([num(t.l2), num(t.sup)]),
            None => row.extend([String::new(), String::new()]),
        }
    }
    row.extend([num(r.total_l2), num(r.total_sup), num(r.relative), ratio.map(num).unwrap_or_default()]);
    row
}

fn cross_row(label: &str, parameter: &str, c: &transform::CrossCheck) -> Vec<String> {
    let mut row = vec![label.to_string(), parameter.to_string(), "ok".to_string()];
    row.extend([num(c.transformed_l2), String::new(), num(c.smoothed_l2), String::new()]);
    row.extend(std::iter::repeat_n(String::new(), 4));
    row.extend([num(c.difference_l2), String::new(), num(c.relative_to_terms), num(c.ratio)]);
    row
}

fn unresolved_row(label: &str, t: f64) -> Vec<String> {
    let mut row = vec![label.to_string(), num(t), "unresolved".to_string()];
    row.extend(std::iter::repeat_n(String::new(), RESIDUAL_HEADER.len() - 3));
    row
}
