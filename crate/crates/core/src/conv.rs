//! Free-space convolution by zero padding to twice the grid size.
//!
//! A kernel entry for lattice offset `d ∈ [-(N-1), N-1]³` is stored at
//! `d mod 2N`, so the cropped low corner of the circular product is the
//! linear convolution sampled on the original nodes.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::fft::Fft3;
use crate::grid::{GridSpec, ScalarField, C64};
use crate::kernels::AnalyticFunction;
use crate::par;

type Spectrum = Arc<Vec<C64>>;

#[derive(Debug)]
pub struct ConvolutionPlan {
    grid: GridSpec,
    fft: Fft3,
    cache: Mutex<HashMap<Vec<u64>, Spectrum>>,
}

impl ConvolutionPlan {
    pub fn new(grid: GridSpec) -> Self {
        Self { grid, fft: Fft3::new(2 * grid.n()), cache: Mutex::new(HashMap::new()) }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn padded_size(&self) -> usize {
        self.fft.n()
    }

    pub fn cached_kernels(&self) -> usize {
        self.cache.lock().expect("kernel cache poisoned").len()
    }

    pub fn clear_cache(&self) {
        self.cache.lock().expect("kernel cache poisoned").clear();
    }

    fn check(&self, f: &ScalarField) -> Result<()> {
        self.grid.check_same(f.grid())
    }

    // build a padded kernel array from a per-offset function
    fn padded_kernel<F: Fn([i64; 3]) -> C64 + Sync + Send>(&self, k: F) -> Vec<C64> {
        let n = self.grid.n() as i64;
        let m = 2 * n;
        let wrap = |j: i64| if j < n { j } else { j - m };
        let mut arr = vec![C64::default(); (m * m * m) as usize];
        par::for_each_chunk_mut(&mut arr, (m * m) as usize, |a, slab| {
            let da = wrap(a as i64);
            if da == -n {
                return;
            }
            for b in 0..m {
                let db = wrap(b);
                if db == -n {
                    continue;
                }
                for c in 0..m {
                    let dc = wrap(c);
                    if dc == -n {
                        continue;
                    }
                    slab[(b * m + c) as usize] = k([da, db, dc]);
                }
            }
        });
        arr
    }

    fn spectrum_of(&self, kernel: Vec<C64>) -> Vec<C64> {
        self.fft.forward_embedded(&kernel, self.fft.n())
    }

    /// Cached spectrum of an analytic kernel on this plan's padded grid.
    pub fn kernel_spectrum(&self, k: &AnalyticFunction) -> Result<Spectrum> {
        k.validate()?;
        if !k.is_convolution_kernel() {
            return Err(Error::UnsupportedKernel(format!("{k:?}")));
        }
        let h = self.grid.spacing();
        if let AnalyticFunction::Poisson(p) | AnalyticFunction::PoissonDt2(p) = k {
            if p.t() < 2.0 * h {
                log::warn!("Poisson kernel under-resolved: t = {} < 2h = {}; using cell-averaged weights", p.t(), 2.0 * h);
            }
        }
        let key = k.cache_key();
        if let Some(s) = self.cache.lock().expect("kernel cache poisoned").get(&key) {
            return Ok(s.clone());
        }
        let arr = self.padded_kernel(|d| C64::new(k.kernel_value(d, h), 0.0));
        let spec = Arc::new(self.spectrum_of(arr));
        self.cache.lock().expect("kernel cache poisoned").insert(key, spec.clone());
        Ok(spec)
    }

    fn apply(&self, f: &ScalarField, spec: &[C64]) -> ScalarField {
        let n = self.grid.n();
        let mut fs = self.fft.forward_embedded(f.values(), n);
        let m = self.fft.n();
        let scale = self.grid.cell_volume() / (m * m * m) as f64;
        par::for_each_indexed(&mut fs, |i, v| *v *= spec[i] * scale);
        ScalarField::from_values_unchecked(self.grid, self.fft.inverse_cropped(fs, n))
    }

    /// `(f ∗ g)(x_m) = h³ Σ_i f(s_i) g(x_m - s_i)` with `g` read off its own grid.
    pub fn convolve(&self, f: &ScalarField, g: &ScalarField) -> Result<ScalarField> {
        self.check(f)?;
        self.check(g)?;
        let half = (self.grid.n() / 2) as i64;
        let n = self.grid.n() as i64;
        let gv = g.values();
        let grid = self.grid;
        let kernel = self.padded_kernel(|d| {
            let idx = d.map(|v| v + half);
            if idx.iter().all(|&v| (0..n).contains(&v)) {
                gv[grid.index(idx[0] as usize, idx[1] as usize, idx[2] as usize)]
            } else {
                C64::default()
            }
        });
        let spec = self.spectrum_of(kernel);
        Ok(self.apply(f, &spec))
    }

    pub fn convolve_with_kernel(&self, f: &ScalarField, k: &AnalyticFunction) -> Result<ScalarField> {
        self.check(f)?;
        let spec = self.kernel_spectrum(k)?;
        Ok(self.apply(f, &spec))
    }

    /// `f ∗ (1/|s|)` with the cell-mean weight at the coincident node.
    pub fn coulomb_convolve(&self, f: &ScalarField) -> Result<ScalarField> {
        self.convolve_with_kernel(f, &AnalyticFunction::Coulomb)
    }
}
