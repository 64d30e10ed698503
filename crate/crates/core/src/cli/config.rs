//! `key = value` run configuration.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::hf::{Margin, MolecularSystem, Nucleus};
use crate::scf::{Eigensolver, ScfConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrbitalKind {
    Scf,
    Slater1s,
    Gaussian,
    Random,
    Zero,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub grid_n: usize,
    pub grid_extent: f64,
    pub nuclei: Vec<Nucleus>,
    pub pairs: usize,
    pub scf: ScfConfig,
    pub t_values: Vec<f64>,
    pub window_alpha: f64,
    pub basis_alpha0: f64,
    pub basis_beta: f64,
    pub basis_count: usize,
    pub masking_radius_cells: f64,
    pub output_dir: PathBuf,
    pub orbital_kind: OrbitalKind,
    pub orbital_alpha: f64,
    pub orbital_epsilon: f64,
    pub orbital_seed: u64,
    pub electron_terms: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid_n: 64,
            grid_extent: 10.0,
            nuclei: vec![Nucleus { charge: 2.0, position: [0.0; 3] }],
            pairs: 1,
            scf: ScfConfig::default(),
            t_values: vec![0.5, 1.0, 2.0],
            window_alpha: 1.0,
            basis_alpha0: 0.1,
            basis_beta: 3.0,
            basis_count: 8,
            masking_radius_cells: 2.0,
            output_dir: PathBuf::from("out"),
            orbital_kind: OrbitalKind::Scf,
            orbital_alpha: 0.5,
            orbital_epsilon: -0.5,
            orbital_seed: 1,
            electron_terms: true,
        }
    }
}

fn err(key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{key}: {msg}"))
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| err(key, format!("cannot parse '{v}'")))
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(err(key, format!("must be positive, got {v}")))
    }
}

fn nuclei(key: &str, v: &str) -> Result<Vec<Nucleus>> {
    v.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|item| {
            let parts: Vec<&str> = item.split(',').map(str::trim).collect();
            if parts.len() != 4 {
                return Err(err(key, format!("expected Z,x,y,z but got '{}'", item.trim())));
            }
            let vals = parts.iter().map(|p| num::<f64>(key, p)).collect::<Result<Vec<_>>>()?;
            if !vals.iter().all(|x| x.is_finite()) {
                return Err(err(key, format!("non-finite value in '{}'", item.trim())));
            }
            Ok(Nucleus { charge: vals[0], position: [vals[1], vals[2], vals[3]] })
        })
        .collect()
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let (key, v) = (key.trim(), value.trim());
            match key {
                "grid.n" => c.grid_n = num(key, v)?,
                "grid.extent" => c.grid_extent = num(key, v)?,
                "system.nuclei" => c.nuclei = nuclei(key, v)?,
                "system.pairs" => c.pairs = num(key, v)?,
                "scf.max_iter" => c.scf.max_iterations = num(key, v)?,
                "scf.mixing" => c.scf.mixing = num(key, v)?,
                "scf.tol_energy" => c.scf.energy_tolerance = num(key, v)?,
                "scf.tol_orbital" => c.scf.orbital_tolerance = num(key, v)?,
                "scf.eigensolver" => {
                    c.scf.eigensolver = match v {
                        "imaginary_time" => Eigensolver::ImaginaryTime,
                        "inverse_iteration" => Eigensolver::InverseIteration,
                        _ => return Err(err(key, format!("unknown eigensolver '{v}'"))),
                    }
                }
                "scf.time_step" => c.scf.time_step = num(key, v)?,
                "poisson.t_values" => {
                    c.t_values = v
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|s| num(key, s))
                        .collect::<Result<_>>()?
                }
                "window.alpha" => c.window_alpha = num(key, v)?,
                "basis.alpha0" => c.basis_alpha0 = num(key, v)?,
                "basis.beta" => c.basis_beta = num(key, v)?,
                "basis.count" => c.basis_count = num(key, v)?,
                "masking.radius_cells" => c.masking_radius_cells = num(key, v)?,
                "output.dir" => c.output_dir = PathBuf::from(v),
                "orbital.kind" => {
                    c.orbital_kind = match v {
                        "scf" => OrbitalKind::Scf,
                        "slater_1s" => OrbitalKind::Slater1s,
                        "gaussian" => OrbitalKind::Gaussian,
                        "random" => OrbitalKind::Random,
                        "zero" => OrbitalKind::Zero,
                        _ => return Err(err(key, format!("unknown orbital kind '{v}'"))),
                    }
                }
                "orbital.alpha" => c.orbital_alpha = num(key, v)?,
                "orbital.epsilon" => c.orbital_epsilon = num(key, v)?,
                "orbital.seed" => c.orbital_seed = num(key, v)?,
                "fields.electron_terms" => {
                    c.electron_terms = match v {
                        "on" | "true" => true,
                        "off" | "false" => false,
                        _ => return Err(err(key, format!("expected on or off, got '{v}'"))),
                    }
                }
                _ => return Err(Error::Config(format!("unknown key '{key}' on line {}", lineno + 1))),
            }
        }
        Ok(c)
    }

    /// Checks every value against the library preconditions.
    pub fn validate(&self) -> Result<()> {
        self.grid().map_err(|e| err("grid.n", e))?;
        self.system().map_err(|e| err("system.nuclei", e))?;
        if self.pairs != 1 {
            return Err(err("system.pairs", "only one orbital pair is supported"));
        }
        self.scf.validate().map_err(|e| err("scf", e))?;
        if self.t_values.is_empty() {
            return Err(err("poisson.t_values", "at least one height required"));
        }
        for &t in &self.t_values {
            positive("poisson.t_values", t)?;
        }
        positive("window.alpha", self.window_alpha)?;
        positive("basis.alpha0", self.basis_alpha0)?;
        if !(self.basis_beta.is_finite() && self.basis_beta > 1.0) {
            return Err(err("basis.beta", format!("must exceed 1, got {}", self.basis_beta)));
        }
        if self.basis_count == 0 {
            return Err(err("basis.count", "must be at least 1"));
        }
        if !(self.masking_radius_cells.is_finite() && self.masking_radius_cells >= 0.0) {
            return Err(err("masking.radius_cells", "must be nonnegative"));
        }
        positive("orbital.alpha", self.orbital_alpha)?;
        if !self.orbital_epsilon.is_finite() {
            return Err(err("orbital.epsilon", "must be finite"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid_n, self.grid_extent)
    }

    pub fn system(&self) -> Result<MolecularSystem> {
        let s = MolecularSystem::new(self.nuclei.clone(), self.pairs)?
            .with_margin(Margin::Cells(self.masking_radius_cells))?;
        s.check_grid(&self.grid()?)?;
        Ok(s)
    }

    /// Heights sorted ascending without duplicates.
    pub fn heights(&self) -> Vec<f64> {
        let mut t = self.t_values.clone();
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_and_comments() {
        let c = RunConfig::parse(
            "# helium\ngrid.n = 32\ngrid.extent = 8 # half width\nsystem.nuclei = 1,0.7,0,0; 1,-0.7,0,0\npoisson.t_values = 0.5, 1.0\nscf.eigensolver = inverse_iteration\n",
        )
        .unwrap();
        assert_eq!(c.grid_n, 32);
        assert_eq!(c.nuclei.len(), 2);
        assert_eq!(c.nuclei[1].position, [-0.7, 0.0, 0.0]);
        assert_eq!(c.t_values, vec![0.5, 1.0]);
        assert_eq!(c.scf.eigensolver, Eigensolver::InverseIteration);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn rejects_bad_input_naming_the_key() {
        let e = RunConfig::parse("system.nuclei = 2,0,0\n").unwrap_err().to_string();
        assert!(e.contains("system.nuclei"), "{e}");
        let e = RunConfig::parse("bogus.key = 1\n").unwrap_err().to_string();
        assert!(e.contains("bogus.key"));
        let e = RunConfig::parse("grid.n = ten\n").unwrap_err().to_string();
        assert!(e.contains("grid.n"));
        let c = RunConfig::parse("basis.beta = 1\n").unwrap();
        assert!(c.validate().unwrap_err().to_string().contains("basis.beta"));
        let c = RunConfig::parse("poisson.t_values = \n").unwrap();
        assert!(c.validate().is_err());
        let c = RunConfig::parse("grid.n = 7\n").unwrap();
        assert!(c.validate().is_err());
    }
}
