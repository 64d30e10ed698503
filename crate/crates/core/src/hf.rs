//! Closed-shell Hartree-Fock data model: nuclei, orbitals, the Coulomb
//! fields built from them, the strong residual and energy diagnostics.

use std::f64::consts::PI;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conv::ConvolutionPlan;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, LaplacianMethod, ScalarField, C64};
use crate::kernels::{sample, AnalyticFunction};
use crate::par;
use crate::quadrature;

/// Bound on `sup |s_ac|` for normalised orbitals with `|ψ| <= 1`.
pub const EXCHANGE_SUP_BOUND: f64 = 4.544907701811032; // 2√π + 1
/// Bound on `∫ |ψ(s)|² / |s - η|² ds` for normalised orbitals with `|ψ| <= 1`.
pub const WEIGHTED_L2_BOUND: f64 = 13.566370614359172; // 4π + 1

const ORTHONORMAL_TOL: f64 = 1e-6;
const SUP_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Nucleus {
    pub charge: f64,
    pub position: [f64; 3],
}

/// Radius of the excluded neighbourhood around each nucleus.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Margin {
    /// Multiple of the grid spacing.
    Cells(f64),
    /// Fixed length in bohr.
    Length(f64),
}

impl Margin {
    pub fn radius(&self, h: f64) -> f64 {
        match *self {
            Margin::Cells(c) => c * h,
            Margin::Length(r) => r,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MolecularSystem {
    nuclei: Vec<Nucleus>,
    pair_count: usize,
    margin: Margin,
}

impl MolecularSystem {
    pub fn new(nuclei: Vec<Nucleus>, pair_count: usize) -> Result<Self> {
        if nuclei.is_empty() {
            return Err(Error::InvalidParameter("at least one nucleus required".into()));
        }
        for (i, n) in nuclei.iter().enumerate() {
            if !(n.charge.is_finite() && n.charge > 0.0) {
                return Err(Error::InvalidParameter(format!("nucleus {i}: charge must be positive")));
            }
            if !n.position.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidParameter(format!("nucleus {i}: position must be finite")));
            }
            if nuclei[..i].iter().any(|m| m.position == n.position) {
                return Err(Error::InvalidParameter(format!("nucleus {i}: duplicate position")));
            }
        }
        if pair_count == 0 {
            return Err(Error::InvalidParameter("pair count must be at least 1".into()));
        }
        Ok(Self { nuclei, pair_count, margin: Margin::Cells(2.0) })
    }

    pub fn helium() -> Self {
        Self::new(vec![Nucleus { charge: 2.0, position: [0.0; 3] }], 1).expect("valid system")
    }

    pub fn hydrogen_atom() -> Self {
        Self::new(vec![Nucleus { charge: 1.0, position: [0.0; 3] }], 1).expect("valid system")
    }

    /// H₂ with the bond along the first axis.
    pub fn hydrogen_molecule(bond: f64) -> Result<Self> {
        let half = 0.5 * bond;
        Self::new(
            vec![
                Nucleus { charge: 1.0, position: [half, 0.0, 0.0] },
                Nucleus { charge: 1.0, position: [-half, 0.0, 0.0] },
            ],
            1,
        )
    }

    pub fn with_margin(mut self, margin: Margin) -> Result<Self> {
        let v = match margin {
            Margin::Cells(c) => c,
            Margin::Length(r) => r,
        };
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::InvalidParameter(format!("margin must be nonnegative, got {v}")));
        }
        self.margin = margin;
        Ok(self)
    }

    pub fn nuclei(&self) -> &[Nucleus] {
        &self.nuclei
    }

    pub fn pair_count(&self) -> usize {
        self.pair_count
    }

    pub fn margin(&self) -> Margin {
        self.margin
    }

    pub fn total_charge(&self) -> f64 {
        self.nuclei.iter().map(|n| n.charge).sum()
    }

    pub fn charge_barycentre(&self) -> [f64; 3] {
        let q = self.total_charge();
        let mut c = [0.0; 3];
        for n in &self.nuclei {
            for (ck, xk) in c.iter_mut().zip(n.position) {
                *ck += n.charge * xk / q;
            }
        }
        c
    }

    pub fn nuclear_repulsion(&self) -> f64 {
        let mut e = 0.0;
        for (i, a) in self.nuclei.iter().enumerate() {
            for b in &self.nuclei[i + 1..] {
                let d = (0..3).map(|k| (a.position[k] - b.position[k]).powi(2)).sum::<f64>().sqrt();
                e += a.charge * b.charge / d;
            }
        }
        e
    }

    pub fn check_grid(&self, grid: &GridSpec) -> Result<()> {
        for (i, n) in self.nuclei.iter().enumerate() {
            if !grid.contains(n.position) {
                return Err(Error::InvalidParameter(format!("nucleus {i} lies outside the grid box")));
            }
        }
        Ok(())
    }

    /// Nodes kept by residual norms: outside the margin of every nucleus and,
    /// for the stencil Laplacian, off the outermost node layer.
    pub fn regular_mask(&self, grid: &GridSpec, method: LaplacianMethod) -> Vec<bool> {
        let r = self.margin.radius(grid.spacing());
        let r2 = r * r;
        let n = grid.n();
        (0..grid.len())
            .map(|idx| {
                if method == LaplacianMethod::FiniteDifference && grid.indices(idx).iter().any(|&c| c == 0 || c == n - 1) {
                    return false;
                }
                let x = grid.point(idx);
                self.nuclei.iter().all(|nu| {
                    let d2: f64 = (0..3).map(|k| (x[k] - nu.position[k]).powi(2)).sum();
                    d2 > r2
                })
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrbitalSet {
    orbitals: Vec<ScalarField>,
    energies: Vec<f64>,
}

impl OrbitalSet {
    /// Validated set: orthonormal within 1e-6.
    pub fn new(orbitals: Vec<ScalarField>, energies: Vec<f64>) -> Result<Self> {
        let set = Self::unchecked(orbitals, energies)?;
        let err = set.orthonormality_error();
        if err > ORTHONORMAL_TOL {
            return Err(Error::Invariant(format!("orbitals not orthonormal (max deviation {err:.3e})")));
        }
        if !set.is_sup_bounded() {
            log::warn!("orbital sup norm {:.4} exceeds 1", set.max_sup());
        }
        Ok(set)
    }

    /// Shape checks only; for residual studies on arbitrary fields.
    pub fn unchecked(orbitals: Vec<ScalarField>, energies: Vec<f64>) -> Result<Self> {
        if orbitals.is_empty() || orbitals.len() != energies.len() {
            return Err(Error::InvalidParameter(format!(
                "{} orbitals with {} energies",
                orbitals.len(),
                energies.len()
            )));
        }
        let g = *orbitals[0].grid();
        for o in &orbitals[1..] {
            g.check_same(o.grid())?;
        }
        if energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidParameter("orbital energies must be finite".into()));
        }
        Ok(Self { orbitals, energies })
    }

    pub fn orbitals(&self) -> &[ScalarField] {
        &self.orbitals
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn len(&self) -> usize {
        self.orbitals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orbitals.is_empty()
    }

    pub fn grid(&self) -> &GridSpec {
        self.orbitals[0].grid()
    }

    pub fn orthonormality_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for (a, fa) in self.orbitals.iter().enumerate() {
            for (b, fb) in self.orbitals.iter().enumerate() {
                let ip = fa.inner(fb).expect("same grid");
                let want = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((ip - want).norm());
            }
        }
        worst
    }

    pub fn max_sup(&self) -> f64 {
        self.orbitals.iter().map(|o| o.norm(crate::grid::NormKind::Sup)).fold(0.0, f64::max)
    }

    /// Whether every orbital satisfies `|ψ| <= 1` (within 1e-6).
    pub fn is_sup_bounded(&self) -> bool {
        self.max_sup() <= 1.0 + SUP_TOL
    }
}

/// `2 Σ Z_c / |x - ξ_c|` with cell means at the nuclear nodes.
pub fn build_p(system: &MolecularSystem, grid: &GridSpec) -> Result<ScalarField> {
    system.check_grid(grid)?;
    let mut p = ScalarField::zeros(*grid);
    for n in system.nuclei() {
        let h = sample(&AnalyticFunction::ShiftedCoulomb { center: n.position }, grid)?;
        p.axpy(C64::new(2.0 * n.charge, 0.0), &h)?;
    }
    Ok(p)
}

/// `s_ac = (conj(ψ_c) ψ_a) ∗ (1/|s|)`.
pub fn build_s(a: usize, c: usize, orbitals: &[ScalarField], plan: &ConvolutionPlan) -> Result<ScalarField> {
    let n = orbitals.len();
    if a >= n || c >= n {
        return Err(Error::InvalidParameter(format!("orbital index ({a}, {c}) out of range for {n} orbitals")));
    }
    let density = orbitals[c].zip_with(&orbitals[a], |x, y| x.conj() * y)?;
    plan.coulomb_convolve(&density)
}

#[derive(Clone, Debug, PartialEq)]
pub struct HfFields {
    p: ScalarField,
    q: ScalarField,
    s: Vec<ScalarField>,
    n: usize,
}

impl HfFields {
    pub fn build(system: &MolecularSystem, orbitals: &OrbitalSet, plan: &ConvolutionPlan) -> Result<Self> {
        Self::from_orbitals(system, orbitals.orbitals(), plan)
    }

    /// Fields from arbitrary (not necessarily orthonormal) orbital fields.
    pub fn from_orbitals(system: &MolecularSystem, orbitals: &[ScalarField], plan: &ConvolutionPlan) -> Result<Self> {
        let grid = *plan.grid();
        let p = build_p(system, &grid)?;
        let n = orbitals.len();
        let mut s = Vec::with_capacity(n * n);
        for a in 0..n {
            for c in 0..n {
                s.push(build_s(a, c, orbitals, plan)?);
            }
        }
        let q = assemble_q(&s, n, grid);
        Ok(Self { p, q, s, n })
    }

    /// Nuclear field only; `q` and every `s` are zero.
    pub fn nuclear_only(system: &MolecularSystem, grid: &GridSpec, pair_count: usize) -> Result<Self> {
        let p = build_p(system, grid)?;
        let z = ScalarField::zeros(*grid);
        Ok(Self { p, q: z.clone(), s: vec![z; pair_count * pair_count], n: pair_count })
    }

    /// Replace the electron-electron fields (used for density mixing).
    pub fn with_exchange_fields(&self, s: Vec<ScalarField>) -> Result<Self> {
        if s.len() != self.n * self.n {
            return Err(Error::InvalidParameter("wrong number of exchange fields".into()));
        }
        let q = assemble_q(&s, self.n, *self.p.grid());
        Ok(Self { p: self.p.clone(), q, s, n: self.n })
    }

    pub fn p(&self) -> &ScalarField {
        &self.p
    }

    pub fn q(&self) -> &ScalarField {
        &self.q
    }

    pub fn s(&self, a: usize, c: usize) -> &ScalarField {
        &self.s[a * self.n + c]
    }

    pub fn exchange_fields(&self) -> &[ScalarField] {
        &self.s
    }

    pub fn pair_count(&self) -> usize {
        self.n
    }

    pub fn max_exchange_sup(&self) -> f64 {
        self.s.iter().map(|f| f.norm(crate::grid::NormKind::Sup)).fold(0.0, f64::max)
    }

    pub(crate) fn check(&self, orbitals: &[ScalarField]) -> Result<()> {
        if orbitals.len() != self.n {
            return Err(Error::InvalidParameter(format!(
                "fields built for {} orbitals, got {}",
                self.n,
                orbitals.len()
            )));
        }
        self.p.grid().check_same(orbitals[0].grid())
    }
}

fn assemble_q(s: &[ScalarField], n: usize, grid: GridSpec) -> ScalarField {
    let mut q = ScalarField::zeros(grid);
    for c in 0..n {
        q.axpy(C64::new(4.0, 0.0), &s[c * n + c]).expect("same grid");
    }
    q
}

/// `(p - q + 2ε) ψ_a` and `2 Σ_c s_ac ψ_c` for orbital `a`.
pub(crate) fn source_terms(
    a: usize,
    orbitals: &[ScalarField],
    epsilon: f64,
    fields: &HfFields,
) -> Result<[ScalarField; 2]> {
    fields.check(orbitals)?;
    if a >= orbitals.len() {
        return Err(Error::InvalidParameter(format!("orbital index {a} out of range")));
    }
    let psi = &orbitals[a];
    let (p, q) = (fields.p().values(), fields.q().values());
    let mut pot = psi.clone();
    par::for_each_indexed(pot.values_mut(), |i, v| *v *= p[i] - q[i] + 2.0 * epsilon);
    let mut exch = ScalarField::zeros(*psi.grid());
    for (c, psi_c) in orbitals.iter().enumerate() {
        let prod = fields.s(a, c) * psi_c;
        exch.axpy(C64::new(2.0, 0.0), &prod)?;
    }
    Ok([pot, exch])
}

/// The three terms of the strong equation for orbital `a`:
/// `∇²ψ_a`, `(p - q + 2ε_a) ψ_a` and `2 Σ_c s_ac ψ_c`.
pub fn strong_terms(
    a: usize,
    orbitals: &[ScalarField],
    epsilon: f64,
    fields: &HfFields,
    method: LaplacianMethod,
) -> Result<[ScalarField; 3]> {
    let [pot, exch] = source_terms(a, orbitals, epsilon, fields)?;
    Ok([orbitals[a].laplacian(method), pot, exch])
}

/// Left side of the strong equation for orbital `a`, without masking.
pub fn strong_residual_field(
    a: usize,
    orbitals: &OrbitalSet,
    fields: &HfFields,
    method: LaplacianMethod,
) -> Result<ScalarField> {
    let eps = *orbitals.energies().get(a).ok_or_else(|| Error::InvalidParameter(format!("orbital index {a} out of range")))?;
    let [l, p, e] = strong_terms(a, orbitals.orbitals(), eps, fields, method)?;
    Ok(&(&l + &p) + &e)
}

/// Strong residual, zeroed outside the regular set of `system`.
pub fn residual_strong(
    a: usize,
    orbitals: &OrbitalSet,
    fields: &HfFields,
    system: &MolecularSystem,
    method: LaplacianMethod,
) -> Result<ScalarField> {
    let mut r = strong_residual_field(a, orbitals, fields, method)?;
    apply_mask(&mut r, &system.regular_mask(orbitals.grid(), method));
    Ok(r)
}

pub(crate) fn apply_mask(f: &mut ScalarField, mask: &[bool]) {
    par::for_each_indexed(f.values_mut(), |i, v| {
        if !mask[i] {
            *v = C64::default();
        }
    });
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Energies {
    pub kinetic: f64,
    pub nuclear_attraction: f64,
    pub hartree: f64,
    /// Exchange magnitude, entering the potential with a minus sign.
    pub exchange: f64,
    pub nuclear_repulsion: f64,
    pub potential: f64,
    pub total: f64,
    pub virial_ratio: f64,
}

/// Closed-shell energies with occupancy 2. `fields` must come from `orbitals`.
pub fn energies(orbitals: &OrbitalSet, system: &MolecularSystem, fields: &HfFields) -> Result<Energies> {
    let err = orbitals.orthonormality_error();
    if err > ORTHONORMAL_TOL {
        return Err(Error::Invariant(format!("orbitals not orthonormal (max deviation {err:.3e})")));
    }
    let psi = orbitals.orbitals();
    fields.check(psi)?;
    let mut kinetic = 0.0;
    let mut nuclear_attraction = 0.0;
    let mut hartree = 0.0;
    let mut exchange = 0.0;
    for (a, pa) in psi.iter().enumerate() {
        kinetic -= pa.inner(&pa.laplacian(LaplacianMethod::Spectral))?.re;
        nuclear_attraction -= pa.inner(&(fields.p() * pa))?.re;
        hartree += 0.5 * pa.inner(&(fields.q() * pa))?.re;
        for (c, pc) in psi.iter().enumerate() {
            exchange += pa.inner(&(fields.s(a, c) * pc))?.re;
        }
    }
    let nuclear_repulsion = system.nuclear_repulsion();
    let potential = nuclear_attraction + hartree - exchange + nuclear_repulsion;
    Ok(Energies {
        kinetic,
        nuclear_attraction,
        hartree,
        exchange,
        nuclear_repulsion,
        potential,
        total: kinetic + potential,
        virial_ratio: potential.abs() / (2.0 * kinetic),
    })
}

/// `∫ |ψ(s)|² / |s - η|² ds`, with cell means of the weight on the nodes
/// within four cells of `η`.
pub fn weighted_l2(psi: &ScalarField, eta: [f64; 3]) -> f64 {
    const NEAR: usize = 4;
    let g = *psi.grid();
    let h = g.spacing();
    let near = g.nearest_node(eta);
    let v = psi.values();
    par::sum_range(g.len(), |idx| {
        let m2 = v[idx].norm_sqr();
        if m2 == 0.0 {
            return 0.0;
        }
        let ijk = g.indices(idx);
        let x = g.point(idx);
        let off = [x[0] - eta[0], x[1] - eta[1], x[2] - eta[2]];
        let close = (0..3).all(|k| ijk[k].abs_diff(near[k]) <= NEAR);
        let w = if close {
            quadrature::cell_average_inverse_power(off, h, 2.0)
        } else {
            1.0 / (off[0] * off[0] + off[1] * off[1] + off[2] * off[2])
        };
        m2 * w
    }) * g.cell_volume()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Theorem1Report {
    pub points: Vec<[f64; 3]>,
    pub max_weighted_l2: f64,
    pub weighted_l2_bound: f64,
    pub max_exchange_sup: f64,
    pub exchange_bound: f64,
    /// Preconditions of the bounds: normalised and `|ψ| <= 1`.
    pub preconditions_met: bool,
    pub weighted_l2_passed: bool,
    pub exchange_passed: bool,
}

impl Theorem1Report {
    pub fn passed(&self) -> bool {
        self.weighted_l2_passed && self.exchange_passed
    }
}

/// `count` deterministic points uniformly inside the inner 80% of the box.
pub fn random_points(grid: &GridSpec, count: usize, seed: u64) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = 0.8 * grid.extent();
    (0..count).map(|_| [0, 1, 2].map(|_| rng.random_range(-l..l))).collect()
}

/// Checks the weighted L2 bound at the nuclei and `extra_points`, and the
/// sup bound on every exchange field.
pub fn check_theorem1_bounds(
    orbitals: &OrbitalSet,
    system: &MolecularSystem,
    fields: &HfFields,
    extra_points: &[[f64; 3]],
) -> Result<Theorem1Report> {
    fields.check(orbitals.orbitals())?;
    let mut points: Vec<[f64; 3]> = system.nuclei().iter().map(|n| n.position).collect();
    points.extend_from_slice(extra_points);
    let mut max_weighted_l2 = 0.0f64;
    for psi in orbitals.orbitals() {
        for &eta in &points {
            max_weighted_l2 = max_weighted_l2.max(weighted_l2(psi, eta));
        }
    }
    let max_exchange_sup = fields.max_exchange_sup();
    Ok(Theorem1Report {
        points,
        max_weighted_l2,
        weighted_l2_bound: WEIGHTED_L2_BOUND,
        max_exchange_sup,
        exchange_bound: EXCHANGE_SUP_BOUND,
        preconditions_met: orbitals.is_sup_bounded() && orbitals.orthonormality_error() <= ORTHONORMAL_TOL,
        weighted_l2_passed: max_weighted_l2 <= WEIGHTED_L2_BOUND,
        exchange_passed: max_exchange_sup <= EXCHANGE_SUP_BOUND,
    })
}

/// Normalised Gaussian `(2α/π)^{3/4} exp(-α|x - c|²)` sampled on `grid` and
/// renormalised on the grid.
pub fn gaussian_orbital(grid: &GridSpec, alpha: f64, center: [f64; 3]) -> ScalarField {
    let f = ScalarField::from_real_fn(*grid, |x| {
        let r2: f64 = (0..3).map(|k| (x[k] - center[k]).powi(2)).sum();
        (2.0 * alpha / PI).powf(0.75) * (-alpha * r2).exp()
    });
    normalize(&f)
}

/// `f / ‖f‖₂`, or `f` itself when it is zero.
pub fn normalize(f: &ScalarField) -> ScalarField {
    let n = f.norm(crate::grid::NormKind::L2);
    if n == 0.0 {
        f.clone()
    } else {
        f.scale(C64::new(1.0 / n, 0.0))
    }
}
