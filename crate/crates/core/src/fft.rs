//! Cubic 3-D FFTs assembled from 1-D line transforms.
//!
//! Arrays are row-major `(a, b, c)` with `c` fastest. The embedded/cropped
//! variants skip lines that are known to be zero on input or discarded on
//! output, which is what makes zero-padded convolution cheap.

use std::collections::HashMap;
use std::sync::{Arc, LazyLock, Mutex};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::par;

type C64 = Complex64;

type PlanCache = Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>;

static PLANS: LazyLock<PlanCache> = LazyLock::new(|| Mutex::new(HashMap::new()));

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut plans = PLANS.lock().expect("fft plan cache poisoned");
    plans
        .entry((n, inverse))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if inverse {
                planner.plan_fft_inverse(n)
            } else {
                planner.plan_fft_forward(n)
            }
        })
        .clone()
}

#[derive(Clone)]
pub(crate) struct Fft3 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft3").field("n", &self.n).finish()
    }
}

// transform every column of an n x n row-major block (along the row index)
fn transform_columns(block: &mut [C64], n: usize, fft: &dyn Fft<f64>, tmp: &mut [C64], scratch: &mut [C64]) {
    for r in 0..n {
        for c in 0..n {
            tmp[c * n + r] = block[r * n + c];
        }
    }
    fft.process_with_scratch(tmp, scratch);
    for r in 0..n {
        for c in 0..n {
            block[r * n + c] = tmp[c * n + r];
        }
    }
}

impl Fft3 {
    pub(crate) fn new(n: usize) -> Self {
        Self { n, fwd: plan(n, false), inv: plan(n, true) }
    }

    pub(crate) fn n(&self) -> usize {
        self.n
    }

    fn scratch(&self, fft: &dyn Fft<f64>) -> Vec<C64> {
        vec![C64::default(); fft.get_inplace_scratch_len()]
    }

    /// Transform along axis `a`, keeping only the first `rows_out` output planes.
    fn axis0(&self, buf: Vec<C64>, fft: &Arc<dyn Fft<f64>>, rows_out: usize) -> Vec<C64> {
        let n = self.n;
        let blocks: Vec<Vec<C64>> = par::map_range(n, |b| {
            let mut blk = vec![C64::default(); n * n];
            for a in 0..n {
                blk[a * n..(a + 1) * n].copy_from_slice(&buf[(a * n + b) * n..(a * n + b + 1) * n]);
            }
            let mut tmp = vec![C64::default(); n * n];
            let mut scratch = self.scratch(&**fft);
            transform_columns(&mut blk, n, &**fft, &mut tmp, &mut scratch);
            blk.truncate(rows_out * n);
            blk
        });
        drop(buf);
        let mut out = vec![C64::default(); rows_out * n * n];
        par::for_each_chunk_mut(&mut out, n * n, |a, slab| {
            for (b, blk) in blocks.iter().enumerate() {
                slab[b * n..(b + 1) * n].copy_from_slice(&blk[a * n..(a + 1) * n]);
            }
        });
        out
    }

    /// Forward transform of an `m³` block embedded at the low corner of an
    /// `n³` zero array. `m == n` is a plain full transform.
    pub(crate) fn forward_embedded(&self, src: &[C64], m: usize) -> Vec<C64> {
        let n = self.n;
        assert!(m <= n && src.len() == m * m * m);
        let mut buf = vec![C64::default(); n * n * n];
        let fwd = &self.fwd;
        par::for_each_chunk_mut(&mut buf, n * n, |a, slab| {
            if a >= m {
                return;
            }
            for b in 0..m {
                slab[b * n..b * n + m].copy_from_slice(&src[(a * m + b) * m..(a * m + b + 1) * m]);
            }
            let mut scratch = self.scratch(&**fwd);
            fwd.process_with_scratch(&mut slab[..m * n], &mut scratch);
            let mut tmp = vec![C64::default(); n * n];
            transform_columns(slab, n, &**fwd, &mut tmp, &mut scratch);
        });
        self.axis0(buf, fwd, n)
    }

    /// Unnormalised inverse transform, returning only the low-corner `m³` block.
    pub(crate) fn inverse_cropped(&self, spec: Vec<C64>, m: usize) -> Vec<C64> {
        let n = self.n;
        assert!(m <= n && spec.len() == n * n * n);
        let inv = &self.inv;
        let mut red = self.axis0(spec, inv, m);
        par::for_each_chunk_mut(&mut red, n * n, |_, slab| {
            let mut scratch = self.scratch(&**inv);
            let mut tmp = vec![C64::default(); n * n];
            transform_columns(slab, n, &**inv, &mut tmp, &mut scratch);
            inv.process_with_scratch(&mut slab[..m * n], &mut scratch);
        });
        let mut out = vec![C64::default(); m * m * m];
        par::for_each_chunk_mut(&mut out, m * m, |a, oslab| {
            for b in 0..m {
                let row = &red[(a * n + b) * n..(a * n + b) * n + m];
                oslab[b * m..(b + 1) * m].copy_from_slice(row);
            }
        });
        out
    }
}
