//! Poisson extensions `u_t = f ∗ P_t` into the upper half-space.

use std::f64::consts::PI;

use crate::conv::ConvolutionPlan;
use crate::error::{Error, Result};
use crate::grid::{EvalWindow, LaplacianMethod, NormKind, ScalarField, C64};
use crate::kernels::AnalyticFunction;

/// What `extend` does with heights below `2h`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResolutionPolicy {
    Reject,
    /// Compute with cell-averaged kernel weights and flag the slice.
    Allow,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicExtension {
    base: ScalarField,
    heights: Vec<f64>,
    slices: Vec<ScalarField>,
    unresolved: Vec<bool>,
}

impl HarmonicExtension {
    pub fn base(&self) -> &ScalarField {
        &self.base
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn slices(&self) -> &[ScalarField] {
        &self.slices
    }

    pub fn slice(&self, i: usize) -> &ScalarField {
        &self.slices[i]
    }

    pub fn is_unresolved(&self, i: usize) -> bool {
        self.unresolved[i]
    }
}

/// Slices `f ∗ P_t` for strictly increasing positive `heights`.
pub fn extend(
    f: &ScalarField,
    heights: &[f64],
    plan: &ConvolutionPlan,
    policy: ResolutionPolicy,
) -> Result<HarmonicExtension> {
    if heights.is_empty() {
        return Err(Error::InvalidParameter("no heights given".into()));
    }
    if heights.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::InvalidParameter("heights must be positive".into()));
    }
    if heights.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("heights must be strictly increasing".into()));
    }
    let limit = 2.0 * plan.grid().spacing();
    let mut unresolved = Vec::with_capacity(heights.len());
    for &t in heights {
        let low = t < limit;
        if low && policy == ResolutionPolicy::Reject {
            return Err(Error::UnderResolved { t, limit });
        }
        unresolved.push(low);
    }
    let slices = heights
        .iter()
        .map(|&t| plan.convolve_with_kernel(f, &AnalyticFunction::poisson(t)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(HarmonicExtension { base: f.clone(), heights: heights.to_vec(), slices, unresolved })
}

/// `‖∇²u_t + ∂²u/∂t²‖ / ‖∇²u_t‖` at height index `i`, with the height
/// derivative taken from the neighbouring slices.
pub fn harmonicity_residual(
    ext: &HarmonicExtension,
    i: usize,
    method: LaplacianMethod,
    window: EvalWindow,
) -> Result<f64> {
    let t = ext.heights();
    if i == 0 || i + 1 >= t.len() {
        return Err(Error::InvalidParameter(format!("height index {i} has no neighbours on both sides")));
    }
    let (d0, d1) = (t[i] - t[i - 1], t[i + 1] - t[i]);
    if (d1 - d0).abs() > 1e-9 * d0.max(d1) {
        return Err(Error::InvalidParameter(format!("non-uniform height spacing ({d0} vs {d1})")));
    }
    let lap = ext.slices[i].laplacian(method);
    let inv = 1.0 / (d0 * d0);
    let (lo, mid, hi) = (ext.slices[i - 1].values(), ext.slices[i].values(), ext.slices[i + 1].values());
    let mut defect = lap.clone();
    for (k, v) in defect.values_mut().iter_mut().enumerate() {
        *v += (hi[k] - mid[k] * 2.0 + lo[k]) * inv;
    }
    let num = defect.norm_in(NormKind::L2, window);
    let den = lap.norm_in(NormKind::L2, window);
    Ok(if num == 0.0 {
        0.0
    } else if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    })
}

/// `(t, ‖u_t - f‖)` ordered by decreasing `t`.
pub fn boundary_convergence(ext: &HarmonicExtension, kind: NormKind) -> Vec<(f64, f64)> {
    let mut rows: Vec<(f64, f64)> = ext
        .heights
        .iter()
        .zip(&ext.slices)
        .map(|(&t, s)| (t, (s - &ext.base).norm(kind)))
        .collect();
    rows.reverse();
    rows
}

/// Linear extrapolation to `t = 0` from the two smallest heights.
pub fn richardson_base_estimate(ext: &HarmonicExtension) -> Result<ScalarField> {
    if ext.heights.len() < 2 {
        return Err(Error::InvalidParameter("need at least two heights".into()));
    }
    let (t1, t2) = (ext.heights[0], ext.heights[1]);
    let mut out = ext.slices[0].scale(C64::new(t2 / (t2 - t1), 0.0));
    out.axpy(C64::new(-t1 / (t2 - t1), 0.0), &ext.slices[1])?;
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SupBoundRow {
    pub t: f64,
    pub sup: f64,
    /// `4 / (π t)`
    pub decay_bound: f64,
    /// `‖base‖∞ + 1e-9`
    pub unit_bound: f64,
    pub decay_ok: bool,
    pub unit_ok: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SupBoundReport {
    pub base_sup: f64,
    /// `‖base‖∞ <= 1`, the assumption behind the 4/(π t) bound.
    pub precondition_met: bool,
    pub rows: Vec<SupBoundRow>,
    pub worst_decay_margin: f64,
    pub worst_unit_margin: f64,
}

impl SupBoundReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.decay_ok && r.unit_ok)
    }
}

pub fn sup_bound_check(ext: &HarmonicExtension) -> SupBoundReport {
    let base_sup = ext.base.norm(NormKind::Sup);
    let rows: Vec<SupBoundRow> = ext
        .heights
        .iter()
        .zip(&ext.slices)
        .map(|(&t, s)| {
            let sup = s.norm(NormKind::Sup);
            let decay_bound = 4.0 / (PI * t);
            let unit_bound = base_sup + 1e-9;
            SupBoundRow { t, sup, decay_bound, unit_bound, decay_ok: sup <= decay_bound, unit_ok: sup <= unit_bound }
        })
        .collect();
    let worst_decay_margin = rows.iter().map(|r| r.decay_bound - r.sup).fold(f64::INFINITY, f64::min);
    let worst_unit_margin = rows.iter().map(|r| r.unit_bound - r.sup).fold(f64::INFINITY, f64::min);
    for r in rows.iter().filter(|r| !r.decay_ok) {
        log::warn!("sup bound 4/(pi t) violated at t = {}: {} > {}", r.t, r.sup, r.decay_bound);
    }
    SupBoundReport { base_sup, precondition_met: base_sup <= 1.0, rows, worst_decay_margin, worst_unit_margin }
}
