//! Uniform cubic grids and sampled complex fields.
//!
//! Node `(ix, iy, iz)` sits at `(-L + ix h, -L + iy h, -L + iz h)` with
//! `h = 2L / N`, so the origin is node `(N/2, N/2, N/2)`. Values are stored
//! row-major with `iz` fastest: `index = (ix * N + iy) * N + iz`.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::Fft3;
use crate::par;

pub type C64 = Complex64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    n: usize,
    extent: f64,
}

impl GridSpec {
    /// `n` points per axis (even, at least 8) on the cube `[-extent, extent]³`.
    pub fn new(n: usize, extent: f64) -> Result<Self> {
        if n < 8 || !n.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!("points per axis must be even and >= 8, got {n}")));
        }
        if !(extent.is_finite() && extent > 0.0) {
            return Err(Error::InvalidGrid(format!("extent must be positive and finite, got {extent}")));
        }
        Ok(Self { n, extent })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.extent / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(3)
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.extent + i as f64 * self.spacing()
    }

    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * self.n + iy) * self.n + iz
    }

    pub fn indices(&self, idx: usize) -> [usize; 3] {
        let n = self.n;
        [idx / (n * n), (idx / n) % n, idx % n]
    }

    pub fn point(&self, idx: usize) -> [f64; 3] {
        let [i, j, k] = self.indices(idx);
        [self.coord(i), self.coord(j), self.coord(k)]
    }

    /// Whether `x` lies in the closed box.
    pub fn contains(&self, x: [f64; 3]) -> bool {
        x.iter().all(|c| c.abs() <= self.extent)
    }

    /// Node nearest to `x` (clamped to the grid).
    pub fn nearest_node(&self, x: [f64; 3]) -> [usize; 3] {
        let h = self.spacing();
        x.map(|c| (((c + self.extent) / h).round().max(0.0) as usize).min(self.n - 1))
    }

    pub(crate) fn in_window(&self, idx: usize, window: EvalWindow) -> bool {
        match window {
            EvalWindow::Full => true,
            EvalWindow::Interior(frac) => {
                let lim = frac * self.extent + 1e-12 * self.extent;
                self.point(idx).iter().all(|c| c.abs() <= lim)
            }
        }
    }

    pub(crate) fn check_same(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "N={} L={} vs N={} L={}",
                self.n, self.extent, other.n, other.extent
            )))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormKind {
    L1,
    L2,
    Sup,
}

impl NormKind {
    /// Parse `1`, `2` or `inf`.
    pub fn from_p(p: &str) -> Result<Self> {
        match p.trim() {
            "1" => Ok(Self::L1),
            "2" => Ok(Self::L2),
            "inf" | "∞" | "sup" => Ok(Self::Sup),
            other => Err(Error::InvalidParameter(format!("unsupported norm p = {other}"))),
        }
    }
}

/// Set of nodes a norm is taken over. `Interior(f)` keeps nodes with every
/// coordinate inside `[-f L, f L]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EvalWindow {
    Full,
    Interior(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LaplacianMethod {
    /// 7-point stencil, zero outside the box.
    FiniteDifference,
    /// Multiplication by `-4π²|ω|²` on the periodic box.
    Spectral,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<C64>,
}

impl ScalarField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, values: vec![C64::default(); grid.len()] }
    }

    pub fn from_values(grid: GridSpec, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Invariant("non-finite field value".into()));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_values_unchecked(grid: GridSpec, values: Vec<C64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn from_fn<F>(grid: GridSpec, f: F) -> Self
    where
        F: Fn([f64; 3]) -> C64 + Sync + Send,
    {
        let mut values = vec![C64::default(); grid.len()];
        par::for_each_indexed(&mut values, |i, v| *v = f(grid.point(i)));
        Self { grid, values }
    }

    pub fn from_real_fn<F>(grid: GridSpec, f: F) -> Self
    where
        F: Fn([f64; 3]) -> f64 + Sync + Send,
    {
        Self::from_fn(grid, |x| C64::new(f(x), 0.0))
    }

    pub fn constant(grid: GridSpec, c: C64) -> Self {
        Self { grid, values: vec![c; grid.len()] }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn get(&self, ix: usize, iy: usize, iz: usize) -> C64 {
        self.values[self.grid.index(ix, iy, iz)]
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.re == 0.0 && v.im == 0.0)
    }

    /// Midpoint rule `Σ f h³`.
    pub fn integrate(&self) -> C64 {
        let v = &self.values;
        let re = par::sum_range(v.len(), |i| v[i].re);
        let im = par::sum_range(v.len(), |i| v[i].im);
        C64::new(re, im) * self.grid.cell_volume()
    }

    pub fn norm(&self, kind: NormKind) -> f64 {
        self.norm_in(kind, EvalWindow::Full)
    }

    /// Discrete norm restricted to `window`.
    pub fn norm_in(&self, kind: NormKind, window: EvalWindow) -> f64 {
        let v = &self.values;
        let g = self.grid;
        let keep = |i: usize| window == EvalWindow::Full || g.in_window(i, window);
        let dv = g.cell_volume();
        match kind {
            NormKind::L1 => par::sum_range(v.len(), |i| if keep(i) { v[i].norm() } else { 0.0 }) * dv,
            NormKind::L2 => (par::sum_range(v.len(), |i| if keep(i) { v[i].norm_sqr() } else { 0.0 }) * dv).sqrt(),
            NormKind::Sup => par::max_range(v.len(), |i| if keep(i) { v[i].norm() } else { 0.0 }),
        }
    }

    /// `⟨self, other⟩ = Σ conj(self) other h³`.
    pub fn inner(&self, other: &ScalarField) -> Result<C64> {
        self.grid.check_same(&other.grid)?;
        let (a, b) = (&self.values, &other.values);
        let re = par::sum_range(a.len(), |i| (a[i].conj() * b[i]).re);
        let im = par::sum_range(a.len(), |i| (a[i].conj() * b[i]).im);
        Ok(C64::new(re, im) * self.grid.cell_volume())
    }

    pub fn map<F>(&self, f: F) -> ScalarField
    where
        F: Fn(C64) -> C64 + Sync + Send,
    {
        let mut out = self.values.clone();
        par::for_each_indexed(&mut out, |_, v| *v = f(*v));
        Self { grid: self.grid, values: out }
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_with<F>(&self, other: &ScalarField, f: F) -> Result<ScalarField>
    where
        F: Fn(C64, C64) -> C64 + Sync + Send,
    {
        self.grid.check_same(&other.grid)?;
        let b = &other.values;
        let mut out = self.values.clone();
        par::for_each_indexed(&mut out, |i, v| *v = f(*v, b[i]));
        Ok(Self { grid: self.grid, values: out })
    }

    pub fn scale(&self, c: C64) -> ScalarField {
        self.map(|v| v * c)
    }

    pub fn conj(&self) -> ScalarField {
        self.map(|v| v.conj())
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: C64, other: &ScalarField) -> Result<()> {
        self.grid.check_same(&other.grid)?;
        let b = &other.values;
        par::for_each_indexed(&mut self.values, |i, v| *v += c * b[i]);
        Ok(())
    }

    /// Fraction of the squared L2 mass in the outer 10% shell of the box.
    pub fn support_fraction(&self) -> f64 {
        let g = self.grid;
        let v = &self.values;
        let total = par::sum_range(v.len(), |i| v[i].norm_sqr());
        if total == 0.0 {
            return 0.0;
        }
        let outer = par::sum_range(v.len(), |i| if g.in_window(i, EvalWindow::Interior(0.9)) { 0.0 } else { v[i].norm_sqr() });
        outer / total
    }

    pub fn laplacian(&self, method: LaplacianMethod) -> ScalarField {
        match method {
            LaplacianMethod::FiniteDifference => self.laplacian_fd(),
            LaplacianMethod::Spectral => self.laplacian_spectral(),
        }
    }

    fn laplacian_fd(&self) -> ScalarField {
        let g = self.grid;
        let n = g.n();
        let ih2 = 1.0 / (g.spacing() * g.spacing());
        let v = &self.values;
        let at = |i: isize, j: isize, k: isize| -> C64 {
            let r = 0..n as isize;
            if r.contains(&i) && r.contains(&j) && r.contains(&k) {
                v[g.index(i as usize, j as usize, k as usize)]
            } else {
                C64::default()
            }
        };
        let mut out = vec![C64::default(); g.len()];
        par::for_each_indexed(&mut out, |idx, o| {
            let [i, j, k] = g.indices(idx).map(|c| c as isize);
            let s = at(i + 1, j, k) + at(i - 1, j, k) + at(i, j + 1, k) + at(i, j - 1, k) + at(i, j, k + 1) + at(i, j, k - 1);
            *o = (s - v[idx] * 6.0) * ih2;
        });
        Self { grid: g, values: out }
    }

    fn laplacian_spectral(&self) -> ScalarField {
        let g = self.grid;
        let frac = self.support_fraction();
        if frac > 0.01 {
            log::warn!("spectral Laplacian: {:.2}% of L2 mass lies in the outer 10% shell", 100.0 * frac);
        }
        let n = g.n();
        let fft = Fft3::new(n);
        let mut spec = fft.forward_embedded(&self.values, n);
        let k2 = spectral_wavenumbers_sq(&g);
        par::for_each_indexed(&mut spec, |idx, v| {
            let [a, b, c] = g.indices(idx);
            *v *= -(k2[a] + k2[b] + k2[c]) / (n * n * n) as f64;
        });
        Self { grid: g, values: fft.inverse_cropped(spec, n) }
    }
}

/// `(2π ω_k)²` for the DFT index `k` on one axis.
pub(crate) fn spectral_wavenumbers_sq(g: &GridSpec) -> Vec<f64> {
    let n = g.n() as isize;
    let len = 2.0 * g.extent();
    (0..n)
        .map(|k| {
            let kk = if k < n / 2 { k } else { k - n };
            let w = 2.0 * PI * kk as f64 / len;
            w * w
        })
        .collect()
}

impl Add for &ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: &ScalarField) -> ScalarField {
        self.zip_with(rhs, |a, b| a + b).expect("grid mismatch in field addition")
    }
}

impl Sub for &ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: &ScalarField) -> ScalarField {
        self.zip_with(rhs, |a, b| a - b).expect("grid mismatch in field subtraction")
    }
}

/// Pointwise product.
impl Mul for &ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: &ScalarField) -> ScalarField {
        self.zip_with(rhs, |a, b| a * b).expect("grid mismatch in field product")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss_density(alpha: f64) -> impl Fn([f64; 3]) -> f64 {
        move |x| (alpha / PI).powf(1.5) * (-alpha * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp()
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(6, 1.0).is_err());
        assert!(GridSpec::new(9, 1.0).is_err());
        assert!(GridSpec::new(8, 0.0).is_err());
        let g = GridSpec::new(8, 1.0).unwrap();
        assert_eq!(g.spacing(), 0.25);
        assert_eq!(g.point(g.index(4, 4, 4)), [0.0; 3]);
    }

    #[test]
    fn unit_mass_gaussian() {
        let g = GridSpec::new(64, 8.0).unwrap();
        let f = ScalarField::from_real_fn(g, gauss_density(1.0));
        assert!((f.integrate().re - 1.0).abs() < 1e-6);
        assert!((f.norm(NormKind::L1) - 1.0).abs() < 1e-6);
        assert_eq!(ScalarField::zeros(g).integrate(), C64::default());
    }

    #[test]
    fn constant_field_volume_and_sup() {
        let g = GridSpec::new(16, 1.0).unwrap();
        let f = ScalarField::constant(g, C64::new(1.0, 0.0));
        assert!((f.integrate().re - 8.0).abs() < 8e-6);
        let c = ScalarField::constant(g, C64::new(-3.0, 4.0));
        assert!((c.norm(NormKind::Sup) - 5.0).abs() < 1e-15);
    }

    #[test]
    fn constant_has_zero_interior_stencil_laplacian() {
        let g = GridSpec::new(16, 1.0).unwrap();
        let lap = ScalarField::constant(g, C64::new(2.5, 0.0)).laplacian(LaplacianMethod::FiniteDifference);
        for idx in 0..g.len() {
            let ijk = g.indices(idx);
            if ijk.iter().all(|&c| c > 0 && c < 15) {
                assert!(lap.values()[idx].norm() < 1e-9);
            }
        }
    }

    #[test]
    fn gaussian_laplacian_spectral_and_stencil() {
        let exact = |x: [f64; 3]| {
            let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
            (4.0 * r2 - 6.0) * (-r2).exp()
        };
        let mut errs = Vec::new();
        for n in [32, 64] {
            let g = GridSpec::new(n, 6.0).unwrap();
            let f = ScalarField::from_real_fn(g, |x| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp());
            let want = ScalarField::from_real_fn(g, exact);
            let spec = f.laplacian(LaplacianMethod::Spectral);
            let rel = (&spec - &want).norm(NormKind::L2) / want.norm(NormKind::L2);
            assert!(rel < 1e-3, "spectral {rel}");
            let fd = f.laplacian(LaplacianMethod::FiniteDifference);
            errs.push((&fd - &want).norm(NormKind::L2) / want.norm(NormKind::L2));
        }
        let ratio = errs[0] / errs[1];
        assert!((3.5..=4.5).contains(&ratio), "stencil ratio {ratio}");
    }

    #[test]
    fn plane_wave_is_spectral_eigenfunction() {
        let g = GridSpec::new(16, 3.0).unwrap();
        let l = g.extent();
        // period 2L/2 = L fits the periodic box
        let f = ScalarField::from_real_fn(g, |x| (2.0 * PI * x[0] / l).sin());
        let lap = f.laplacian(LaplacianMethod::Spectral);
        let k2 = (2.0 * PI / l).powi(2);
        let want = f.scale(C64::new(-k2, 0.0));
        assert!((&lap - &want).norm(NormKind::Sup) < 1e-9);
    }

    #[test]
    fn inner_and_norm_agree() {
        let g = GridSpec::new(16, 2.0).unwrap();
        let f = ScalarField::from_fn(g, |x| C64::new(x[0].sin(), x[1] * x[2]));
        let n2 = f.norm(NormKind::L2).powi(2);
        let ip = f.inner(&f).unwrap().re;
        assert!((n2 - ip).abs() <= 1e-12 * ip);
        let z = ScalarField::zeros(g);
        assert_eq!(f.inner(&z).unwrap(), C64::default());
    }

    #[test]
    fn mismatched_grids_rejected() {
        let a = ScalarField::zeros(GridSpec::new(8, 1.0).unwrap());
        let b = ScalarField::zeros(GridSpec::new(8, 2.0).unwrap());
        assert!(matches!(a.inner(&b), Err(Error::GridMismatch(_))));
    }
}
