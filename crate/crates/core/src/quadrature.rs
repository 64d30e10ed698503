//! Integrals of radial functions over a single grid cell.
//!
//! For a radial function `f(|p - x|)` about an apex `x`, the field
//! `F(p) = (p - x) G(|p - x|)` with `G(ρ) = ∫₀¹ λ² f(λρ) dλ` has divergence `f`,
//! so the cell integral becomes a sum of smooth face integrals of
//! `((p - x)·n) G(ρ)`. This holds for any apex, inside the cell or not.

use std::f64::consts::PI;
use std::num::NonZeroUsize;
use std::sync::LazyLock;

use gauss_quad::legendre::GaussLegendre;

static GL16: LazyLock<Vec<(f64, f64)>> = LazyLock::new(|| {
    GaussLegendre::new(NonZeroUsize::new(16).unwrap())
        .as_node_weight_pairs()
        .to_vec()
});

/// Integral over the cube of side `h` centred at `offset` (relative to the
/// apex) of the radial function whose radial factor is `g(ρ) = ∫₀¹ λ² f(λρ) dλ`.
pub(crate) fn cell_integral<G: Fn(f64) -> f64>(offset: [f64; 3], h: f64, g: G) -> f64 {
    let half = 0.5 * h;
    let mut total = 0.0;
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        for side in [-1.0, 1.0] {
            let dist = offset[axis] + side * half;
            // signed normal distance; a face in the apex plane contributes nothing
            let signed = side * dist;
            if signed == 0.0 {
                continue;
            }
            // subdivide when the apex is close to the face plane
            let pieces = ((h / dist.abs()).ceil() as usize).clamp(1, 64);
            let sub = h / pieces as f64;
            let mut face = 0.0;
            for pu in 0..pieces {
                for pv in 0..pieces {
                    let cu = offset[u] - half + (pu as f64 + 0.5) * sub;
                    let cv = offset[v] - half + (pv as f64 + 0.5) * sub;
                    for &(xu, wu) in GL16.iter() {
                        for &(xv, wv) in GL16.iter() {
                            let a = cu + 0.5 * sub * xu;
                            let b = cv + 0.5 * sub * xv;
                            let rho = (dist * dist + a * a + b * b).sqrt();
                            face += wu * wv * g(rho);
                        }
                    }
                }
            }
            total += signed * face * 0.25 * sub * sub;
        }
    }
    total
}

/// Mean of `|s|^-p` (p < 3) over the cube of side `h` centred at `offset`.
pub(crate) fn cell_average_inverse_power(offset: [f64; 3], h: f64, p: f64) -> f64 {
    cell_integral(offset, h, |rho| rho.powf(-p) / (3.0 - p)) / h.powi(3)
}

/// Mean of the Poisson kernel `P_t` over the cube of side `h` centred at `offset`.
pub(crate) fn cell_average_poisson(offset: [f64; 3], h: f64, t: f64) -> f64 {
    let radial = |rho: f64| {
        let z = rho / t;
        let bracket_over_z3 = if z < 1e-2 {
            let z2 = z * z;
            2.0 / 3.0 - 0.8 * z2 + 6.0 / 7.0 * z2 * z2
        } else {
            (z.atan() - z / (1.0 + z * z)) / (z * z * z)
        };
        bracket_over_z3 / (2.0 * PI * PI * t * t * t)
    };
    cell_integral(offset, h, radial) / h.powi(3)
}

/// Mean of `∂²P_t/∂t²` over the cube of side `h` centred at `offset`.
pub(crate) fn cell_average_poisson_dt2(offset: [f64; 3], h: f64, t: f64) -> f64 {
    cell_integral(offset, h, |rho| 4.0 * t / (PI * PI * (t * t + rho * rho).powi(3))) / h.powi(3)
}
