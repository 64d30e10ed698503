//! Closed-form kernels and test functions.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField, C64};
use crate::quadrature;

/// Mean of `1/|s|` over the unit cube centred at the origin.
pub const CELL_MEAN_INV_R: f64 = 2.380077363979554;
/// Mean of `1/|s|²` over the unit cube centred at the origin.
pub const CELL_MEAN_INV_R2: f64 = 7.674124222439199;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoissonKernelParams {
    t: f64,
}

impl PoissonKernelParams {
    pub fn new(t: f64) -> Result<Self> {
        if t.is_finite() && t > 0.0 {
            Ok(Self { t })
        } else {
            Err(Error::InvalidParameter(format!("Poisson height must be positive, got {t}")))
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum AnalyticFunction {
    /// `1/|x|`
    Coulomb,
    /// `1/|x - center|`
    ShiftedCoulomb { center: [f64; 3] },
    Poisson(PoissonKernelParams),
    /// Second derivative of the Poisson kernel in the height.
    PoissonDt2(PoissonKernelParams),
    /// `mass (α/π)^{3/2} exp(-α|x - center|²)`
    Gaussian { alpha: f64, center: [f64; 3], mass: f64 },
    /// Laplacian of the matching `Gaussian`.
    GaussianLaplacian { alpha: f64, center: [f64; 3], mass: f64 },
    /// `π^{-1/2} exp(-|x - center|)`
    Slater1s { center: [f64; 3] },
    /// `(2α/π)^{3/4} exp(-α|x|²)`, unit L2 norm.
    BasisGaussian { alpha: f64 },
}

fn dist2(x: [f64; 3], c: [f64; 3]) -> f64 {
    (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2) + (x[2] - c[2]).powi(2)
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
    }
}

fn check_point(name: &str, c: [f64; 3]) -> Result<()> {
    if c.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be finite")))
    }
}

pub fn eval_poisson(x: [f64; 3], t: f64) -> Result<f64> {
    PoissonKernelParams::new(t)?;
    Ok(poisson(dist2(x, [0.0; 3]), t))
}

pub fn eval_poisson_dt2(x: [f64; 3], t: f64) -> Result<f64> {
    PoissonKernelParams::new(t)?;
    Ok(poisson_dt2(dist2(x, [0.0; 3]), t))
}

pub fn eval_coulomb(x: [f64; 3], center: [f64; 3]) -> Result<f64> {
    let r2 = dist2(x, center);
    if r2 == 0.0 {
        return Err(Error::InvalidParameter("Coulomb kernel evaluated at its singular point".into()));
    }
    Ok(1.0 / r2.sqrt())
}

fn poisson(r2: f64, t: f64) -> f64 {
    t / (PI * PI * (t * t + r2).powi(2))
}

fn poisson_dt2(r2: f64, t: f64) -> f64 {
    let s = t * t + r2;
    (-12.0 * t / s.powi(3) + 24.0 * t.powi(3) / s.powi(4)) / (PI * PI)
}

fn poisson_dt4(r2: f64, t: f64) -> f64 {
    let s = t * t + r2;
    120.0 * t * (r2 - 3.0 * t * t) * (3.0 * r2 - t * t) / (PI * PI * s.powi(6))
}

impl AnalyticFunction {
    pub fn poisson(t: f64) -> Result<Self> {
        Ok(Self::Poisson(PoissonKernelParams::new(t)?))
    }

    pub fn poisson_dt2(t: f64) -> Result<Self> {
        Ok(Self::PoissonDt2(PoissonKernelParams::new(t)?))
    }

    /// Unit-mass Gaussian density.
    pub fn gaussian(alpha: f64, center: [f64; 3]) -> Result<Self> {
        let f = Self::Gaussian { alpha, center, mass: 1.0 };
        f.validate()?;
        Ok(f)
    }

    pub fn slater_1s(center: [f64; 3]) -> Result<Self> {
        let f = Self::Slater1s { center };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Coulomb => Ok(()),
            Self::ShiftedCoulomb { center } | Self::Slater1s { center } => check_point("center", *center),
            Self::Poisson(p) | Self::PoissonDt2(p) => check_positive("t", p.t),
            Self::Gaussian { alpha, center, mass } | Self::GaussianLaplacian { alpha, center, mass } => {
                check_positive("alpha", *alpha)?;
                check_point("center", *center)?;
                if mass.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter("Gaussian mass must be finite".into()))
                }
            }
            Self::BasisGaussian { alpha } => check_positive("alpha", *alpha),
        }
    }

    /// Point value. Coulomb kinds fail at their singular point.
    pub fn eval(&self, x: [f64; 3]) -> Result<f64> {
        self.validate()?;
        Ok(match self {
            Self::Coulomb => eval_coulomb(x, [0.0; 3])?,
            Self::ShiftedCoulomb { center } => eval_coulomb(x, *center)?,
            _ => self.eval_regular(x),
        })
    }

    // value for the non-singular kinds
    fn eval_regular(&self, x: [f64; 3]) -> f64 {
        match self {
            Self::Coulomb => 1.0 / dist2(x, [0.0; 3]).sqrt(),
            Self::ShiftedCoulomb { center } => 1.0 / dist2(x, *center).sqrt(),
            Self::Poisson(p) => poisson(dist2(x, [0.0; 3]), p.t),
            Self::PoissonDt2(p) => poisson_dt2(dist2(x, [0.0; 3]), p.t),
            Self::Gaussian { alpha, center, mass } => {
                mass * (alpha / PI).powf(1.5) * (-alpha * dist2(x, *center)).exp()
            }
            Self::GaussianLaplacian { alpha, center, mass } => {
                let r2 = dist2(x, *center);
                mass * (alpha / PI).powf(1.5) * (4.0 * alpha * alpha * r2 - 6.0 * alpha) * (-alpha * r2).exp()
            }
            Self::Slater1s { center } => (-dist2(x, *center).sqrt()).exp() / PI.sqrt(),
            Self::BasisGaussian { alpha } => (2.0 * alpha / PI).powf(0.75) * (-alpha * dist2(x, [0.0; 3])).exp(),
        }
    }

    /// Exact Laplacian where a closed form exists.
    pub fn laplacian(&self) -> Option<AnalyticFunction> {
        match self {
            Self::Gaussian { alpha, center, mass } => {
                Some(Self::GaussianLaplacian { alpha: *alpha, center: *center, mass: *mass })
            }
            _ => None,
        }
    }

    pub(crate) fn cache_key(&self) -> Vec<u64> {
        let b = |v: f64| v.to_bits();
        match self {
            Self::Coulomb => vec![0],
            Self::ShiftedCoulomb { center } => vec![1, b(center[0]), b(center[1]), b(center[2])],
            Self::Poisson(p) => vec![2, b(p.t)],
            Self::PoissonDt2(p) => vec![3, b(p.t)],
            Self::Gaussian { alpha, center, mass } => vec![4, b(*alpha), b(center[0]), b(center[1]), b(center[2]), b(*mass)],
            Self::GaussianLaplacian { alpha, center, mass } => {
                vec![5, b(*alpha), b(center[0]), b(center[1]), b(center[2]), b(*mass)]
            }
            Self::Slater1s { center } => vec![6, b(center[0]), b(center[1]), b(center[2])],
            Self::BasisGaussian { alpha } => vec![7, b(*alpha)],
        }
    }

    /// Value used for the kernel entry at lattice offset `d` (in cells).
    /// Coulomb uses the cell mean at the origin; Poisson kinds below `2h`
    /// use cell means throughout.
    pub(crate) fn kernel_value(&self, d: [i64; 3], h: f64) -> f64 {
        const NEAR: i64 = 6;
        let x = d.map(|v| v as f64 * h);
        let r2 = dist2(x, [0.0; 3]);
        let near = d.iter().all(|v| v.abs() <= NEAR);
        match self {
            Self::Coulomb if d == [0, 0, 0] => CELL_MEAN_INV_R / h,
            Self::Poisson(p) if p.t < 2.0 * h => {
                if near {
                    quadrature::cell_average_poisson(x, h, p.t)
                } else {
                    poisson(r2, p.t) - h * h / 24.0 * poisson_dt2(r2, p.t)
                }
            }
            Self::PoissonDt2(p) if p.t < 2.0 * h => {
                if near {
                    quadrature::cell_average_poisson_dt2(x, h, p.t)
                } else {
                    poisson_dt2(r2, p.t) - h * h / 24.0 * poisson_dt4(r2, p.t)
                }
            }
            _ => self.eval_regular(x),
        }
    }

    pub(crate) fn is_convolution_kernel(&self) -> bool {
        matches!(
            self,
            Self::Coulomb | Self::Poisson(_) | Self::PoissonDt2(_) | Self::Gaussian { .. } | Self::GaussianLaplacian { .. }
        )
    }
}

/// Samples `f` at the grid nodes. For Coulomb kinds the node nearest the
/// singular point takes the mean of the kernel over its cell.
pub fn sample(f: &AnalyticFunction, grid: &GridSpec) -> Result<ScalarField> {
    f.validate()?;
    let mut field = ScalarField::from_real_fn(*grid, |x| f.eval_regular(x));
    let center = match f {
        AnalyticFunction::Coulomb => Some([0.0; 3]),
        AnalyticFunction::ShiftedCoulomb { center } => Some(*center),
        _ => None,
    };
    if let Some(c) = center {
        let [i, j, k] = grid.nearest_node(c);
        let idx = grid.index(i, j, k);
        let node = grid.point(idx);
        let h = grid.spacing();
        let offset = [node[0] - c[0], node[1] - c[1], node[2] - c[2]];
        let v = if offset == [0.0; 3] {
            CELL_MEAN_INV_R / h
        } else {
            quadrature::cell_average_inverse_power(offset, h, 1.0)
        };
        field.values_mut()[idx] = C64::new(v, 0.0);
    }
    Ok(field)
}

/// Even-tempered basis member `k`: unit-norm Gaussian with exponent `α₀ β^k`.
pub fn basis_function(k: usize, alpha0: f64, beta: f64) -> Result<AnalyticFunction> {
    check_positive("alpha0", alpha0)?;
    if !(beta.is_finite() && beta > 1.0) {
        return Err(Error::InvalidParameter(format!("beta must exceed 1, got {beta}")));
    }
    Ok(AnalyticFunction::BasisGaussian { alpha: alpha0 * beta.powi(k as i32) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::NormKind;

    #[test]
    fn poisson_point_values() {
        assert!((eval_poisson([0.0; 3], 1.0).unwrap() - 0.1013212).abs() < 1e-7);
        assert!((eval_poisson([1.0, 0.0, 0.0], 1.0).unwrap() - 0.0253303).abs() < 1e-7);
        assert!(eval_poisson([0.0; 3], 0.0).is_err());
        assert!(eval_poisson_dt2([0.0; 3], -1.0).is_err());
        assert!((eval_poisson_dt2([0.0; 3], 1.0).unwrap() - 1.2158542).abs() < 1e-7);
    }

    #[test]
    fn poisson_dilation() {
        let x = [0.3, -1.2, 0.7];
        for t in [0.2, 1.0, 3.5] {
            let lhs = eval_poisson(x, t).unwrap();
            let rhs = t.powi(-3) * eval_poisson(x.map(|v| v / t), 1.0).unwrap();
            assert!((lhs - rhs).abs() < 1e-14 * lhs.max(1e-300));
        }
    }

    #[test]
    fn dt4_matches_finite_difference_of_dt2() {
        let (r2, t, d) = (0.7f64, 0.6, 1e-3);
        let fd = (poisson_dt2(r2, t + d) - 2.0 * poisson_dt2(r2, t) + poisson_dt2(r2, t - d)) / (d * d);
        assert!((fd - poisson_dt4(r2, t)).abs() < 1e-4 * poisson_dt4(r2, t).abs().max(1.0));
    }

    #[test]
    fn coulomb_values() {
        assert_eq!(eval_coulomb([2.0, 0.0, 0.0], [0.0; 3]).unwrap(), 0.5);
        assert!((eval_coulomb([1.0, 1.0, 1.0], [0.0; 3]).unwrap() - 0.57735).abs() < 1e-5);
        assert!(eval_coulomb([1.0; 3], [1.0; 3]).is_err());
        let c = [0.5, -0.25, 1.0];
        let x = [2.0, 1.0, -1.0];
        let shifted = eval_coulomb(x, c).unwrap();
        let plain = eval_coulomb([x[0] - c[0], x[1] - c[1], x[2] - c[2]], [0.0; 3]).unwrap();
        assert_eq!(shifted, plain);
    }

    #[test]
    fn sampling() {
        let g = GridSpec::new(64, 8.0).unwrap();
        let gauss = sample(&AnalyticFunction::gaussian(4.0, [0.0; 3]).unwrap(), &g).unwrap();
        assert!((gauss.integrate().re - 1.0).abs() < 1e-6);
        let s = sample(&AnalyticFunction::slater_1s([0.0; 3]).unwrap(), &g).unwrap();
        assert!((s.get(32, 32, 32).re - PI.powf(-0.5)).abs() < 1e-15);
        let p = sample(&AnalyticFunction::poisson(1.0).unwrap(), &g).unwrap();
        assert!((p.norm(NormKind::Sup) - 1.0 / (PI * PI)).abs() < 1e-15);
        let c = sample(&AnalyticFunction::Coulomb, &g).unwrap();
        assert!((c.get(32, 32, 32).re - CELL_MEAN_INV_R / g.spacing()).abs() < 1e-12);
    }

    #[test]
    fn basis_members() {
        let f = basis_function(0, 0.3, 2.0).unwrap();
        assert_eq!(f, AnalyticFunction::BasisGaussian { alpha: 0.3 });
        assert!(basis_function(1, 0.3, 1.0).is_err());
        assert!(basis_function(1, -0.3, 2.0).is_err());
    }
}
