//! Convolution-transformed forms of the strong equation and the truncated
//! basis expansions fed through them.
//!
//! With `S = ∇²ψ_a + (p - q + 2ε_a)ψ_a + 2 Σ_c s_ac ψ_c` the Poisson form is
//! `ψ_a ∗ ∂²P_t - [(p - q + 2ε_a)ψ_a] ∗ P_t - 2 Σ_c [s_ac ψ_c] ∗ P_t = -(S ∗ P_t)`
//! and the window form is
//! `ψ_a ∗ ∇²w + [(p - q + 2ε_a)ψ_a] ∗ w + 2 Σ_c [s_ac ψ_c] ∗ w = S ∗ w`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::conv::ConvolutionPlan;
use crate::error::{Error, Result};
use crate::grid::{EvalWindow, GridSpec, LaplacianMethod, NormKind, ScalarField, C64};
use crate::hf::{self, HfFields, MolecularSystem, OrbitalSet};
use crate::kernels::{sample, AnalyticFunction};

const MAX_CONDITION: f64 = 1e12;

#[derive(Clone, Debug, PartialEq)]
pub struct TermNorm {
    pub name: &'static str,
    pub l2: f64,
    pub sup: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResidualReport {
    pub label: &'static str,
    pub t: Option<f64>,
    pub window_alpha: Option<f64>,
    pub order: Option<usize>,
    pub terms: Vec<TermNorm>,
    pub total_l2: f64,
    pub total_sup: f64,
    /// `total_l2` over the largest term L2 norm (0 when every term vanishes).
    pub relative: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Residual {
    pub field: ScalarField,
    pub report: ResidualReport,
}

pub(crate) fn report(label: &'static str, terms: &[(&'static str, &ScalarField)], total: &ScalarField, window: EvalWindow) -> ResidualReport {
    let terms: Vec<TermNorm> = terms
        .iter()
        .map(|(name, f)| TermNorm { name, l2: f.norm_in(NormKind::L2, window), sup: f.norm_in(NormKind::Sup, window) })
        .collect();
    let total_l2 = total.norm_in(NormKind::L2, window);
    let scale = terms.iter().map(|t| t.l2).fold(0.0, f64::max);
    ResidualReport {
        label,
        t: None,
        window_alpha: None,
        order: None,
        terms,
        total_l2,
        total_sup: total.norm_in(NormKind::Sup, window),
        relative: if scale > 0.0 { total_l2 / scale } else { 0.0 },
    }
}

fn sum3(a: &ScalarField, b: &ScalarField, c: &ScalarField) -> ScalarField {
    &(a + b) + c
}

fn check_resolved(t: f64, grid: &GridSpec) -> Result<()> {
    let limit = 2.0 * grid.spacing();
    if t < limit {
        Err(Error::UnderResolved { t, limit })
    } else {
        Ok(())
    }
}

fn window_kernels(w: &AnalyticFunction) -> Result<(AnalyticFunction, f64)> {
    w.validate()?;
    match (w, w.laplacian()) {
        (AnalyticFunction::Gaussian { alpha, .. }, Some(lap)) => Ok((lap, *alpha)),
        _ => Err(Error::UnsupportedKernel(format!("window must be a Gaussian, got {w:?}"))),
    }
}

#[allow(clippy::too_many_arguments)]
fn poisson_form(
    label: &'static str,
    a: usize,
    orbitals: &[ScalarField],
    epsilon: f64,
    fields: &HfFields,
    t: f64,
    plan: &ConvolutionPlan,
    window: EvalWindow,
) -> Result<Residual> {
    check_resolved(t, plan.grid())?;
    let [pot, exch] = hf::source_terms(a, orbitals, epsilon, fields)?;
    let p = AnalyticFunction::poisson(t)?;
    let d2 = AnalyticFunction::poisson_dt2(t)?;
    let t1 = plan.convolve_with_kernel(&orbitals[a], &d2)?;
    let t2 = plan.convolve_with_kernel(&pot, &p)?.scale(C64::new(-1.0, 0.0));
    let t3 = plan.convolve_with_kernel(&exch, &p)?.scale(C64::new(-1.0, 0.0));
    let total = sum3(&t1, &t2, &t3);
    let mut rep = report(label, &[("kinetic", &t1), ("potential", &t2), ("exchange", &t3)], &total, window);
    rep.t = Some(t);
    Ok(Residual { field: total, report: rep })
}

#[allow(clippy::too_many_arguments)]
fn window_form(
    label: &'static str,
    a: usize,
    orbitals: &[ScalarField],
    epsilon: f64,
    fields: &HfFields,
    w: &AnalyticFunction,
    plan: &ConvolutionPlan,
    window: EvalWindow,
) -> Result<Residual> {
    let (lap_w, alpha) = window_kernels(w)?;
    let [pot, exch] = hf::source_terms(a, orbitals, epsilon, fields)?;
    let t1 = plan.convolve_with_kernel(&orbitals[a], &lap_w)?;
    let t2 = plan.convolve_with_kernel(&pot, w)?;
    let t3 = plan.convolve_with_kernel(&exch, w)?;
    let total = sum3(&t1, &t2, &t3);
    let mut rep = report(label, &[("kinetic", &t1), ("potential", &t2), ("exchange", &t3)], &total, window);
    rep.window_alpha = Some(alpha);
    Ok(Residual { field: total, report: rep })
}

fn energy(orbitals: &OrbitalSet, a: usize) -> Result<f64> {
    orbitals
        .energies()
        .get(a)
        .copied()
        .ok_or_else(|| Error::InvalidParameter(format!("orbital index {a} out of range")))
}

/// `‖(∇²f) ∗ g - f ∗ (∇²g)‖∞ / ‖(∇²f) ∗ g‖∞` with the spectral Laplacian.
pub fn theorem2_symmetry_defect(f: &ScalarField, g: &ScalarField, plan: &ConvolutionPlan) -> Result<f64> {
    f.grid().check_same(g.grid())?;
    let lf = f.laplacian(LaplacianMethod::Spectral);
    let lg = g.laplacian(LaplacianMethod::Spectral);
    let left = plan.convolve(&lf, g)?;
    let right = plan.convolve(f, &lg)?;
    let num = (&left - &right).norm(NormKind::Sup);
    let den = left.norm(NormKind::Sup);
    Ok(if num == 0.0 { 0.0 } else { num / den })
}

/// Poisson-transformed residual of orbital `a` at height `t >= 2h`.
pub fn residual_theorem4(
    a: usize,
    orbitals: &OrbitalSet,
    fields: &HfFields,
    t: f64,
    plan: &ConvolutionPlan,
    window: EvalWindow,
) -> Result<Residual> {
    poisson_form("thm4", a, orbitals.orbitals(), energy(orbitals, a)?, fields, t, plan, window)
}

/// Window residual of orbital `a` for a Gaussian window `w`.
pub fn residual_theorem5(
    a: usize,
    orbitals: &OrbitalSet,
    fields: &HfFields,
    w: &AnalyticFunction,
    plan: &ConvolutionPlan,
    window: EvalWindow,
) -> Result<Residual> {
    window_form("thm5", a, orbitals.orbitals(), energy(orbitals, a)?, fields, w, plan, window)
}

/// The window expression exactly as printed:
/// `ψ_a ∗ ∇²w - (p ψ_a) ∗ w + q ∗ w - 2ε_a ψ_a ∗ w`. Logged, never asserted.
pub fn literal_theorem5(
    a: usize,
    orbitals: &OrbitalSet,
    fields: &HfFields,
    w: &AnalyticFunction,
    plan: &ConvolutionPlan,
    window: EvalWindow,
) -> Result<Residual> {
    let (lap_w, alpha) = window_kernels(w)?;
    let eps = energy(orbitals, a)?;
    let psi = &orbitals.orbitals()[a];
    fields.check(orbitals.orbitals())?;
    let t1 = plan.convolve_with_kernel(psi, &lap_w)?;
    let t2 = plan.convolve_with_kernel(&(fields.p() * psi), w)?.scale(C64::new(-1.0, 0.0));
    let t3 = plan.convolve_with_kernel(fields.q(), w)?;
    let t4 = plan.convolve_with_kernel(psi, w)?.scale(C64::new(-2.0 * eps, 0.0));
    let total = &sum3(&t1, &t2, &t3) + &t4;
    let mut rep = report(
        "thm5_literal",
        &[("kinetic", &t1), ("nuclear", &t2), ("hartree", &t3), ("energy", &t4)],
        &total,
        window,
    );
    rep.window_alpha = Some(alpha);
    Ok(Residual { field: total, report: rep })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrossCheck {
    /// Norm of the transformed residual.
    pub transformed_l2: f64,
    /// Norm of the smoothed strong residual.
    pub smoothed_l2: f64,
    pub difference_l2: f64,
    /// Difference over the largest term norm of the transformed residual.
    pub relative_to_terms: f64,
    /// Difference over the transformed residual norm.
    pub relative_to_total: f64,
    /// `smoothed_l2 / transformed_l2`.
    pub ratio: f64,
}

fn cross(transformed: &Residual, smoothed: &ScalarField, window: EvalWindow) -> CrossCheck {
    let transformed_l2 = transformed.report.total_l2;
    let smoothed_l2 = smoothed.norm_in(NormKind::L2, window);
    let difference_l2 = (&transformed.field - smoothed).norm_in(NormKind::L2, window);
    let scale = transformed.report.terms.iter().map(|t| t.l2).fold(0.0, f64::max);
    let div = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a / b };
    CrossCheck {
        transformed_l2,
        smoothed_l2,
        difference_l2,
        relative_to_terms: div(difference_l2, scale),
        relative_to_total: div(difference_l2, transformed_l2),
        ratio: if smoothed_l2 == transformed_l2 { 1.0 } else { smoothed_l2 / transformed_l2 },
    }
}

/// Compares the Poisson form with `-(S ∗ P_t)`, `S` the unmasked strong residual.
pub fn crosscheck_theorem4(
    a: usize,
    orbitals: &OrbitalSet,
    fields: &HfFields,
    t: f64,
    plan: &ConvolutionPlan,
    method: LaplacianMethod,
    window: EvalWindow,
) -> Result<CrossCheck> {
    let r4 = residual_theorem4(a, orbitals, fields, t, plan, window)?;
    let s = hf::strong_residual_field(a, orbitals, fields, method)?;
    let smoothed = plan.convolve_with_kernel(&s, &AnalyticFunction::poisson(t)?)?.scale(C64::new(-1.0, 0.0));
    Ok(cross(&r4, &smoothed, window))
}

/// Compares the window form with `S ∗ w`.
pub fn crosscheck_theorem5(
    a: usize,
    orbitals: &OrbitalSet,
    fields: &HfFields,
    w: &AnalyticFunction,
    plan: &ConvolutionPlan,
    method: LaplacianMethod,
    window: EvalWindow,
) -> Result<CrossCheck> {
    let r5 = residual_theorem5(a, orbitals, fields, w, plan, window)?;
    let s = hf::strong_residual_field(a, orbitals, fields, method)?;
    let smoothed = plan.convolve_with_kernel(&s, w)?;
    Ok(cross(&r5, &smoothed, window))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionState {
    basis: Vec<AnalyticFunction>,
    orders: Vec<usize>,
    /// `[order][orbital][ν]`
    coefficients: Vec<Vec<Vec<C64>>>,
    /// `[order][orbital]`
    truncations: Vec<Vec<ScalarField>>,
    /// p, q_n and r_n per order
    fields: Vec<HfFields>,
    fit_errors: Vec<Vec<f64>>,
    energies: Vec<f64>,
    k_bound: f64,
    gram_condition: f64,
}

impl ExpansionState {
    pub fn basis(&self) -> &[AnalyticFunction] {
        &self.basis
    }

    pub fn orders(&self) -> &[usize] {
        &self.orders
    }

    fn slot(&self, n: usize) -> Result<usize> {
        self.orders.iter().position(|&o| o == n).ok_or(Error::MissingOrder(n))
    }

    pub fn coefficients(&self, n: usize, a: usize) -> Result<&[C64]> {
        Ok(&self.coefficients[self.slot(n)?][a])
    }

    pub fn truncation(&self, n: usize, a: usize) -> Result<&ScalarField> {
        Ok(&self.truncations[self.slot(n)?][a])
    }

    pub fn fields(&self, n: usize) -> Result<&HfFields> {
        Ok(&self.fields[self.slot(n)?])
    }

    /// `‖T_{n,a} - ψ_a‖₂`
    pub fn fit_error(&self, n: usize, a: usize) -> Result<f64> {
        Ok(self.fit_errors[self.slot(n)?][a])
    }

    pub fn k_bound(&self) -> f64 {
        self.k_bound
    }

    pub fn gram_condition(&self) -> f64 {
        self.gram_condition
    }
}

/// The even-tempered basis `α_k = α₀ β^k`, `k < count`.
pub fn even_tempered_basis(alpha0: f64, beta: f64, count: usize) -> Result<Vec<AnalyticFunction>> {
    if count == 0 {
        return Err(Error::InvalidParameter("basis must have at least one member".into()));
    }
    (0..count).map(|k| crate::kernels::basis_function(k, alpha0, beta)).collect()
}

/// Least-squares projection of every orbital onto the leading `n` basis
/// functions for each requested order `n`, with the Coulomb fields of the
/// truncations.
pub fn project_orbitals(
    orbitals: &OrbitalSet,
    system: &MolecularSystem,
    basis: &[AnalyticFunction],
    orders: &[usize],
    plan: &ConvolutionPlan,
) -> Result<ExpansionState> {
    let grid = *orbitals.grid();
    plan.grid().check_same(&grid)?;
    let mut orders = orders.to_vec();
    orders.sort_unstable();
    orders.dedup();
    if orders.is_empty() || orders[0] == 0 || *orders.last().unwrap() > basis.len() {
        return Err(Error::InvalidParameter(format!(
            "orders must lie in 1..={}, got {orders:?}",
            basis.len()
        )));
    }
    let nb = *orders.last().unwrap();
    let phi = basis[..nb].iter().map(|b| sample(b, &grid)).collect::<Result<Vec<_>>>()?;
    let mut gram = DMatrix::<f64>::zeros(nb, nb);
    for i in 0..nb {
        for j in 0..=i {
            let v = phi[i].inner(&phi[j])?.re;
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    let eig = SymmetricEigen::new(gram.clone()).eigenvalues;
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &e| (l.min(e), h.max(e)));
    let gram_condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if gram_condition > MAX_CONDITION {
        return Err(Error::IllConditioned(gram_condition));
    }
    let psi = orbitals.orbitals();
    let rhs: Vec<Vec<C64>> = psi
        .iter()
        .map(|p| phi.iter().map(|f| f.inner(p)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;

    let mut coefficients = Vec::new();
    let mut truncations = Vec::new();
    let mut fields = Vec::new();
    let mut fit_errors = Vec::new();
    for &n in &orders {
        let chol = gram
            .view((0, 0), (n, n))
            .into_owned()
            .cholesky()
            .ok_or(Error::IllConditioned(gram_condition))?;
        let mut per_order = Vec::new();
        let mut t_fields = Vec::new();
        let mut errs = Vec::new();
        for (a, r) in rhs.iter().enumerate() {
            let re = chol.solve(&DVector::from_iterator(n, r[..n].iter().map(|v| v.re)));
            let im = chol.solve(&DVector::from_iterator(n, r[..n].iter().map(|v| v.im)));
            let b: Vec<C64> = (0..n).map(|k| C64::new(re[k], im[k])).collect();
            let mut t = ScalarField::zeros(grid);
            for (k, coef) in b.iter().enumerate() {
                t.axpy(*coef, &phi[k])?;
            }
            errs.push((&t - &psi[a]).norm(NormKind::L2));
            per_order.push(b);
            t_fields.push(t);
        }
        fields.push(HfFields::from_orbitals(system, &t_fields, plan)?);
        coefficients.push(per_order);
        truncations.push(t_fields);
        fit_errors.push(errs);
    }
    let k_bound = (0..psi.len())
        .map(|a| psi[a].norm(NormKind::L2) + fit_errors.iter().map(|e| e[a]).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    Ok(ExpansionState {
        basis: basis[..nb].to_vec(),
        orders,
        coefficients,
        truncations,
        fields,
        fit_errors,
        energies: orbitals.energies().to_vec(),
        k_bound,
        gram_condition,
    })
}

/// Poisson-form residuals of the truncations `T_{n,a}` for each `n` in `orders`.
pub fn residual_theorem6(
    state: &ExpansionState,
    a: usize,
    t: f64,
    orders: &[usize],
    plan: &ConvolutionPlan,
    window: EvalWindow,
) -> Result<Vec<ResidualReport>> {
    let eps = *state.energies.get(a).ok_or_else(|| Error::InvalidParameter(format!("orbital index {a} out of range")))?;
    orders
        .iter()
        .map(|&n| {
            let k = state.slot(n)?;
            let mut r = poisson_form("thm6", a, &state.truncations[k], eps, &state.fields[k], t, plan, window)?.report;
            r.order = Some(n);
            Ok(r)
        })
        .collect()
}

/// Window-form residuals of the truncations for each `n` in `orders`.
pub fn residual_theorem7(
    state: &ExpansionState,
    a: usize,
    w: &AnalyticFunction,
    orders: &[usize],
    plan: &ConvolutionPlan,
    window: EvalWindow,
) -> Result<Vec<ResidualReport>> {
    let eps = *state.energies.get(a).ok_or_else(|| Error::InvalidParameter(format!("orbital index {a} out of range")))?;
    orders
        .iter()
        .map(|&n| {
            let k = state.slot(n)?;
            let mut r = window_form("thm7", a, &state.truncations[k], eps, &state.fields[k], w, plan, window)?.report;
            r.order = Some(n);
            Ok(r)
        })
        .collect()
}
