//! Self-consistent field iteration for closed-shell systems with one
//! doubly occupied orbital.

use crate::conv::ConvolutionPlan;
use crate::error::{Error, Result};
use crate::fft::Fft3;
use crate::grid::{spectral_wavenumbers_sq, GridSpec, LaplacianMethod, NormKind, ScalarField, C64};
use crate::hf::{self, energies, Energies, HfFields, MolecularSystem, OrbitalSet};
use crate::par;

/// Shift of the kinetic preconditioner `(-½∇² + c)⁻¹`.
const PRECOND_SHIFT: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Eigensolver {
    /// Kinetic-preconditioned steps `ψ ← ψ - τ (-½∇² + 1)⁻¹ (Fψ - εψ)`, renormalised.
    ImaginaryTime,
    /// Shifted inverse iteration, solved by preconditioned conjugate gradients.
    InverseIteration,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScfConfig {
    pub max_iterations: usize,
    /// Weight of the new Coulomb fields in linear mixing.
    pub mixing: f64,
    pub energy_tolerance: f64,
    pub orbital_tolerance: f64,
    pub eigensolver: Eigensolver,
    pub time_step: f64,
    /// Eigensolver steps per field update.
    pub inner_steps: usize,
}

impl Default for ScfConfig {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            mixing: 0.7,
            energy_tolerance: 1e-6,
            orbital_tolerance: 1e-4,
            eigensolver: Eigensolver::ImaginaryTime,
            time_step: 0.9,
            inner_steps: 3,
        }
    }
}

impl ScfConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if !(self.mixing > 0.0 && self.mixing <= 1.0) {
            return bad("mixing must lie in (0, 1]");
        }
        if !(self.energy_tolerance > 0.0 && self.orbital_tolerance > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.time_step.is_finite() && self.time_step > 0.0) {
            return bad("time step must be positive");
        }
        if self.inner_steps == 0 {
            return bad("inner steps must be at least 1");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScfStep {
    pub iteration: usize,
    pub energy: f64,
    pub orbital_change: f64,
    pub epsilon: f64,
}

#[derive(Clone, Debug)]
pub struct ScfResult {
    pub orbitals: OrbitalSet,
    pub fields: HfFields,
    pub energies: Energies,
    pub iterations: usize,
    pub history: Vec<ScfStep>,
    pub converged: bool,
    /// `‖Fψ - εψ‖₂ / ‖Fψ‖₂` outside the nuclear margins.
    pub fock_residual: f64,
}

/// `-½∇²ψ - ½pψ + ½qψ - Σ_c s_ac ψ_c`, with `psi` standing in for orbital
/// `a` in the exchange sum so the operator is linear in `psi`.
pub fn apply_fock(psi: &ScalarField, a: usize, orbitals: &[ScalarField], fields: &HfFields) -> Result<ScalarField> {
    fields.check(orbitals)?;
    psi.grid().check_same(orbitals[0].grid())?;
    let mut out = psi.laplacian(LaplacianMethod::Spectral).scale(C64::new(-0.5, 0.0));
    let (p, q) = (fields.p().values(), fields.q().values());
    let pv = psi.values();
    par::for_each_indexed(out.values_mut(), |i, v| *v += (q[i] - p[i]) * 0.5 * pv[i]);
    for (c, psi_c) in orbitals.iter().enumerate() {
        let src = if c == a { psi } else { psi_c };
        out.axpy(C64::new(-1.0, 0.0), &(fields.s(a, c) * src))?;
    }
    Ok(out)
}

fn rayleigh(psi: &ScalarField, f_psi: &ScalarField) -> Result<f64> {
    Ok(psi.inner(f_psi)?.re / psi.inner(psi)?.re)
}

struct Preconditioner {
    fft: Fft3,
    grid: GridSpec,
    k2: Vec<f64>,
}

impl Preconditioner {
    fn new(grid: GridSpec) -> Self {
        Self { fft: Fft3::new(grid.n()), grid, k2: spectral_wavenumbers_sq(&grid) }
    }

    // (-½∇² + c)⁻¹ r
    fn apply(&self, r: &ScalarField) -> ScalarField {
        let n = self.grid.n();
        let g = self.grid;
        let mut s = self.fft.forward_embedded(r.values(), n);
        let k2 = &self.k2;
        let norm = (n * n * n) as f64;
        par::for_each_indexed(&mut s, |idx, v| {
            let [a, b, c] = g.indices(idx);
            *v /= (0.5 * (k2[a] + k2[b] + k2[c]) + PRECOND_SHIFT) * norm;
        });
        ScalarField::from_values_unchecked(g, self.fft.inverse_cropped(s, n))
    }
}

fn imaginary_time(psi: &ScalarField, fields: &HfFields, cfg: &ScfConfig, pre: &Preconditioner) -> Result<ScalarField> {
    let mut psi = psi.clone();
    for _ in 0..cfg.inner_steps {
        let f = apply_fock(&psi, 0, std::slice::from_ref(&psi), fields)?;
        let eps = rayleigh(&psi, &f)?;
        let mut r = f;
        r.axpy(C64::new(-eps, 0.0), &psi)?;
        psi.axpy(C64::new(-cfg.time_step, 0.0), &pre.apply(&r))?;
        psi = hf::normalize(&psi);
    }
    Ok(psi)
}

// solve (F - σ) x = b by preconditioned CG; F - σ must be positive definite
fn shifted_solve(b: &ScalarField, sigma: f64, fields: &HfFields, pre: &Preconditioner) -> Result<ScalarField> {
    let op = |x: &ScalarField| -> Result<ScalarField> {
        let mut y = apply_fock(x, 0, std::slice::from_ref(x), fields)?;
        y.axpy(C64::new(-sigma, 0.0), x)?;
        Ok(y)
    };
    let mut x = pre.apply(b);
    let mut r = b - &op(&x)?;
    let mut z = pre.apply(&r);
    let mut p = z.clone();
    let mut rz = r.inner(&z)?.re;
    let b_norm = b.norm(NormKind::L2);
    for _ in 0..500 {
        if r.norm(NormKind::L2) <= 1e-9 * b_norm {
            break;
        }
        let ap = op(&p)?;
        let alpha = rz / p.inner(&ap)?.re;
        x.axpy(C64::new(alpha, 0.0), &p)?;
        r.axpy(C64::new(-alpha, 0.0), &ap)?;
        z = pre.apply(&r);
        let rz_new = r.inner(&z)?.re;
        let beta = rz_new / rz;
        rz = rz_new;
        let mut next = z.clone();
        next.axpy(C64::new(beta, 0.0), &p)?;
        p = next;
    }
    Ok(x)
}

fn inverse_iteration(psi: &ScalarField, fields: &HfFields, cfg: &ScfConfig, pre: &Preconditioner) -> Result<ScalarField> {
    let mut psi = psi.clone();
    for _ in 0..cfg.inner_steps {
        let f = apply_fock(&psi, 0, std::slice::from_ref(&psi), fields)?;
        let eps = rayleigh(&psi, &f)?;
        let sigma = eps - 0.5 - 0.1 * eps.abs();
        psi = hf::normalize(&shifted_solve(&psi, sigma, fields, pre)?);
    }
    Ok(psi)
}

fn mix(old: &[ScalarField], new: &[ScalarField], w: f64) -> Vec<ScalarField> {
    old.iter()
        .zip(new)
        .map(|(o, n)| {
            let mut m = o.scale(C64::new(1.0 - w, 0.0));
            m.axpy(C64::new(w, 0.0), n).expect("same grid");
            m
        })
        .collect()
}

/// Lowest closed-shell solution for a system with one orbital pair.
pub fn solve(system: &MolecularSystem, grid: &GridSpec, config: &ScfConfig) -> Result<ScfResult> {
    config.validate()?;
    if system.pair_count() != 1 {
        return Err(Error::Unsupported(format!(
            "SCF supports one orbital pair, system has {}",
            system.pair_count()
        )));
    }
    system.check_grid(grid)?;
    let plan = ConvolutionPlan::new(*grid);
    let pre = Preconditioner::new(*grid);
    let mut psi = hf::gaussian_orbital(grid, 1.0, system.charge_barycentre());
    let mut mixed: Option<Vec<ScalarField>> = None;
    let mut history = Vec::new();
    let mut last_change = 0.0;
    let mut prev_energy: Option<f64> = None;
    let mut iterations = 0;
    let mut converged = false;
    let nuclear = HfFields::nuclear_only(system, grid, 1)?;
    loop {
        let s = hf::build_s(0, 0, std::slice::from_ref(&psi), &plan)?;
        let fresh = nuclear.with_exchange_fields(vec![s])?;
        let f_psi = apply_fock(&psi, 0, std::slice::from_ref(&psi), &fresh)?;
        let eps = rayleigh(&psi, &f_psi)?;
        let set = OrbitalSet::unchecked(vec![psi.clone()], vec![eps])?;
        let e = energies(&set, system, &fresh)?;
        history.push(ScfStep { iteration: iterations, energy: e.total, orbital_change: last_change, epsilon: eps });
        log::info!("scf iteration {iterations}: E = {:.8} eps = {:.8} dpsi = {:.3e}", e.total, eps, last_change);
        if let Some(pe) = prev_energy {
            if (e.total - pe).abs() < config.energy_tolerance && last_change < config.orbital_tolerance {
                converged = true;
            }
        }
        if converged || iterations >= config.max_iterations {
            let mut res = f_psi.clone();
            res.axpy(C64::new(-eps, 0.0), &psi)?;
            let mask = system.regular_mask(grid, LaplacianMethod::Spectral);
            let mut fm = f_psi;
            hf::apply_mask(&mut res, &mask);
            hf::apply_mask(&mut fm, &mask);
            let fock_residual = res.norm(NormKind::L2) / fm.norm(NormKind::L2);
            let orbitals = OrbitalSet::new(vec![psi], vec![eps])?;
            return Ok(ScfResult {
                orbitals,
                fields: fresh,
                energies: e,
                iterations,
                history,
                converged,
                fock_residual,
            });
        }
        prev_energy = Some(e.total);
        let s_fields = match mixed.take() {
            None => fresh.exchange_fields().to_vec(),
            Some(old) => mix(&old, fresh.exchange_fields(), config.mixing),
        };
        let frozen = nuclear.with_exchange_fields(s_fields.clone())?;
        mixed = Some(s_fields);
        let mut next = match config.eigensolver {
            Eigensolver::ImaginaryTime => imaginary_time(&psi, &frozen, config, &pre)?,
            Eigensolver::InverseIteration => inverse_iteration(&psi, &frozen, config, &pre)?,
        };
        let overlap = psi.inner(&next)?;
        if overlap.norm() > 0.0 {
            next = next.scale(overlap.conj() / overlap.norm());
        }
        last_change = (&next - &psi).norm(NormKind::L2);
        psi = next;
        iterations += 1;
    }
}
