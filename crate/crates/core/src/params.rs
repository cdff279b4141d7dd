use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Physical constants and Lagrange multipliers of the model.
///
/// `xi` weights the Fisher-information term of the ensemble Hamiltonian and
/// fixes Planck's constant through `hbar = sqrt(8 xi)`. `eta` sets the units
/// of time through the fluctuation multiplier `alpha_n = m_n / (eta dt)`.
/// `betas` are the multipliers of the gauge constraint, one per particle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub eta: f64,
    pub xi: f64,
    pub masses: Vec<f64>,
    pub betas: Vec<f64>,
    pub c: f64,
    pub dt: f64,
}

impl ModelParams {
    pub fn new(eta: f64, xi: f64, masses: Vec<f64>, betas: Vec<f64>, c: f64, dt: f64) -> Result<Self> {
        let p = Self {
            eta,
            xi,
            masses,
            betas,
            c,
            dt,
        };
        p.validate()?;
        Ok(p)
    }

    /// Single particle of mass `m`, no gauge coupling, `eta = hbar`.
    pub fn single(hbar: f64, mass: f64, dt: f64) -> Result<Self> {
        Self::new(hbar, hbar * hbar / 8.0, vec![mass], vec![0.0], 1.0, dt)
    }

    pub fn with_hbar(mut self, hbar: f64) -> Self {
        self.xi = hbar * hbar / 8.0;
        self
    }

    pub fn with_betas(mut self, betas: Vec<f64>) -> Self {
        self.betas = betas;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return bad(format!("eta = {} must be positive", self.eta));
        }
        if !(self.xi.is_finite() && self.xi >= 0.0) {
            return bad(format!("xi = {} must be non-negative", self.xi));
        }
        if self.masses.is_empty() {
            return bad("at least one particle mass is required".into());
        }
        if let Some(m) = self.masses.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
            return bad(format!("mass {m} must be positive"));
        }
        if self.betas.len() != self.masses.len() {
            return bad(format!(
                "{} betas for {} particles",
                self.betas.len(),
                self.masses.len()
            ));
        }
        if self.betas.iter().any(|b| !b.is_finite()) || !self.c.is_finite() {
            return bad("betas and c must be finite".into());
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt = {} must be positive", self.dt));
        }
        Ok(())
    }

    pub fn hbar(&self) -> f64 {
        (8.0 * self.xi).sqrt()
    }

    pub fn particles(&self) -> usize {
        self.masses.len()
    }

    pub fn mass(&self, particle: usize) -> f64 {
        self.masses[particle]
    }

    pub fn beta(&self, particle: usize) -> f64 {
        self.betas[particle]
    }

    /// Mass of the particle owning configuration axis `axis`.
    pub fn mass_of_axis(&self, grid: &Grid, axis: usize) -> f64 {
        self.masses[grid.particle_of_axis(axis)]
    }

    pub fn beta_of_axis(&self, grid: &Grid, axis: usize) -> f64 {
        self.betas[grid.particle_of_axis(axis)]
    }

    /// The gauge coupling `eta beta_n / hbar` that multiplies the vector
    /// potential in the covariant derivative.
    pub fn coupling_ratio(&self, particle: usize) -> f64 {
        self.eta * self.betas[particle] / self.hbar()
    }

    /// Checks that the parameters cover every particle of the grid.
    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        if grid.particle_count() != self.particles() {
            return Err(Error::InvalidParams(format!(
                "grid holds {} particle(s) but {} masses were given",
                grid.particle_count(),
                self.particles()
            )));
        }
        Ok(())
    }
}
