//! The closed-form maximum-entropy transition kernel.
//!
//! A short step from `x` is Gaussian: mean `b(x) dt`, covariance
//! `(η dt / m_n) δ^{AB}`. The drift is `b = (η/m_n)[∂(S + β_n φ_n) − β_n A]`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::calculus::{diff_axis, interpolate_vector};
use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::gauge::GaugeInput;
use crate::grid::Grid;
use crate::params::ModelParams;

/// Moments of one kernel step at a given position.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KernelSpec {
    /// `b^A dt` per axis.
    pub mean: Vec<f64>,
    /// `η dt / m_n` per axis.
    pub covariance: Vec<f64>,
    pub dt: f64,
}

/// `α_n = m_n / (η dt)`.
pub fn multiplier_alpha(params: &ModelParams, particle: usize) -> Result<f64> {
    if !(params.dt > 0.0) {
        return Err(Error::InvalidParams(format!("dt = {} must be positive", params.dt)));
    }
    let m = *params
        .masses
        .get(particle)
        .ok_or_else(|| Error::InvalidParams(format!("no particle {particle}")))?;
    if !(m > 0.0) {
        return Err(Error::InvalidParams(format!("mass {m} must be positive")));
    }
    Ok(m / (params.eta * params.dt))
}

/// Drift velocity on the grid points from the entropy and gauge potentials.
pub fn entropic_drift(
    s: &ScalarField,
    gauge: Option<&GaugeInput>,
    params: &ModelParams,
) -> Result<VectorField> {
    let grid = s.grid();
    params.check_grid(grid)?;
    let dims = grid.dims();
    let corrected = match gauge {
        Some(g) => {
            if g.grid() != grid {
                return Err(Error::GridMismatch);
            }
            Some(g.corrected_derivative())
        }
        None => None,
    };
    let mut values = vec![0.0; grid.len() * dims];
    for axis in 0..dims {
        let ds = diff_axis(grid, s.values(), axis);
        let scale = params.eta / params.mass_of_axis(grid, axis);
        let beta = params.beta_of_axis(grid, axis);
        for p in 0..grid.len() {
            let gauge_term = corrected
                .as_ref()
                .map_or(0.0, |c| beta * c.component(p, axis));
            values[p * dims + axis] = scale * (ds[p] + gauge_term);
        }
    }
    VectorField::new(grid.clone(), values)
}

/// Gaussian step kernel with a drift field sampled on the grid.
#[derive(Clone, Debug)]
pub struct TransitionKernel {
    drift: VectorField,
    variance: Vec<f64>,
    dt: f64,
}

impl TransitionKernel {
    pub fn new(drift: VectorField, params: &ModelParams) -> Result<Self> {
        params.validate()?;
        let grid = drift.grid();
        params.check_grid(grid)?;
        let variance = (0..grid.dims())
            .map(|a| params.eta * params.dt / params.mass_of_axis(grid, a))
            .collect();
        Ok(Self {
            drift,
            variance,
            dt: params.dt,
        })
    }

    pub fn from_entropy(
        s: &ScalarField,
        gauge: Option<&GaugeInput>,
        params: &ModelParams,
    ) -> Result<Self> {
        Self::new(entropic_drift(s, gauge, params)?, params)
    }

    pub fn grid(&self) -> &Grid {
        self.drift.grid()
    }

    pub fn drift_field(&self) -> &VectorField {
        &self.drift
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn variance(&self) -> &[f64] {
        &self.variance
    }

    /// Drift at an off-grid position by multilinear interpolation.
    pub fn drift_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        interpolate_vector(&self.drift, x)
    }

    pub fn spec_at(&self, x: &[f64]) -> Result<KernelSpec> {
        let b = self.drift_at(x)?;
        Ok(KernelSpec {
            mean: b.iter().map(|v| v * self.dt).collect(),
            covariance: self.variance.clone(),
            dt: self.dt,
        })
    }

    /// One step `x + b dt + Δw`, wrapped on periodic axes. Positions past an
    /// open boundary are returned as is; callers decide how to clamp.
    pub fn sample_step<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        let b = self.drift_at(x)?;
        let grid = self.grid();
        let mut out = Vec::with_capacity(x.len());
        for axis in 0..grid.dims() {
            let z: f64 = rng.sample(StandardNormal);
            let mut xa = x[axis] + b[axis] * self.dt + self.variance[axis].sqrt() * z;
            if grid.periodic(axis) {
                let lo = grid.origin(axis);
                xa = lo + (xa - lo).rem_euclid(grid.extent(axis));
            }
            out.push(xa);
        }
        Ok(out)
    }

    /// Log of the normalized Gaussian density of landing at `x_new`.
    ///
    /// Displacements along periodic axes use the minimum image.
    pub fn log_density(&self, x_new: &[f64], x: &[f64]) -> Result<f64> {
        let grid = self.grid();
        if x_new.len() != grid.dims() {
            return Err(Error::LengthMismatch {
                what: "position",
                expected: grid.dims(),
                got: x_new.len(),
            });
        }
        let b = self.drift_at(x)?;
        let mut logp = 0.0;
        for axis in 0..grid.dims() {
            let mut dx = x_new[axis] - x[axis];
            if grid.periodic(axis) {
                let l = grid.extent(axis);
                dx -= l * (dx / l).round();
            }
            let var = self.variance[axis];
            let r = dx - b[axis] * self.dt;
            logp += -0.5 * r * r / var - 0.5 * (2.0 * std::f64::consts::PI * var).ln();
        }
        Ok(logp)
    }
}

pub fn drift_velocity(
    s: &ScalarField,
    gauge: Option<&GaugeInput>,
    params: &ModelParams,
    x: &[f64],
) -> Result<Vec<f64>> {
    TransitionKernel::from_entropy(s, gauge, params)?.drift_at(x)
}

pub fn sample_step<R: Rng + ?Sized>(
    x: &[f64],
    s: &ScalarField,
    gauge: Option<&GaugeInput>,
    params: &ModelParams,
    rng: &mut R,
) -> Result<Vec<f64>> {
    TransitionKernel::from_entropy(s, gauge, params)?.sample_step(x, rng)
}

pub fn kernel_log_density(
    x_new: &[f64],
    x: &[f64],
    s: &ScalarField,
    gauge: Option<&GaugeInput>,
    params: &ModelParams,
) -> Result<f64> {
    TransitionKernel::from_entropy(s, gauge, params)?.log_density(x_new, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauge::AngleField;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn line() -> Grid {
        Grid::line(41, -2.0, 2.0).unwrap()
    }

    #[test]
    fn alpha_values() {
        let p = |m: f64, eta: f64, dt: f64| ModelParams::new(eta, 0.1, vec![m], vec![0.0], 1.0, dt).unwrap();
        assert_eq!(multiplier_alpha(&p(1.0, 1.0, 1.0), 0).unwrap(), 1.0);
        assert_eq!(multiplier_alpha(&p(2.0, 1.0, 0.5), 0).unwrap(), 4.0);
        assert!((multiplier_alpha(&p(1.0, 2.0, 0.1), 0).unwrap() - 5.0).abs() < 1e-12);
        let mut bad = p(1.0, 1.0, 1.0);
        bad.dt = 0.0;
        assert!(multiplier_alpha(&bad, 0).is_err());
    }

    #[test]
    fn drift_examples() {
        let grid = line();
        let params = ModelParams::single(1.0, 1.0, 0.01).unwrap();
        let flat = ScalarField::constant(&grid, 0.3);
        assert_eq!(drift_velocity(&flat, None, &params, &[0.1]).unwrap(), vec![0.0]);

        let s = ScalarField::from_fn(&grid, |x| 3.0 * x[0]).unwrap();
        let b = drift_velocity(&s, None, &params, &[0.37]).unwrap();
        assert!((b[0] - 3.0).abs() < 1e-12);

        let gauged = params.clone().with_betas(vec![1.0]);
        let g = GaugeInput::new(
            vec![AngleField::zero(&grid)],
            VectorField::uniform(&grid, &[0.7]).unwrap(),
        )
        .unwrap();
        let b = drift_velocity(&flat, Some(&g), &gauged, &[0.0]).unwrap();
        assert!((b[0] + 0.7).abs() < 1e-12);
    }

    #[test]
    fn outside_grid_is_rejected() {
        let params = ModelParams::single(1.0, 1.0, 0.01).unwrap();
        let s = ScalarField::zeros(&line());
        assert!(drift_velocity(&s, None, &params, &[5.0]).is_err());
    }

    #[test]
    fn log_density_peak_and_symmetry() {
        let grid = line();
        let params = ModelParams::new(1.5, 0.1, vec![2.0], vec![0.0], 1.0, 0.04).unwrap();
        let s = ScalarField::from_fn(&grid, |x| 0.5 * x[0]).unwrap();
        let k = TransitionKernel::from_entropy(&s, None, &params).unwrap();
        let x = [0.2];
        let mean = x[0] + k.drift_at(&x).unwrap()[0] * params.dt;
        let var = 1.5 * 0.04 / 2.0;
        let peak = k.log_density(&[mean], &x).unwrap();
        assert!((peak + 0.5 * (2.0 * std::f64::consts::PI * var).ln()).abs() < 1e-12);
        let up = k.log_density(&[mean + 0.13], &x).unwrap();
        let down = k.log_density(&[mean - 0.13], &x).unwrap();
        assert!((up - down).abs() < 1e-12);
    }

    #[test]
    fn density_integrates_to_one() {
        let grid = Grid::ring(64, 0.0, 4.0).unwrap();
        let params = ModelParams::single(1.0, 1.0, 0.02).unwrap();
        let s = ScalarField::from_fn(&grid, |x| (x[0] * std::f64::consts::PI / 2.0).sin()).unwrap();
        let k = TransitionKernel::from_entropy(&s, None, &params).unwrap();
        let x = [1.0];
        let n = 20_000;
        let (lo, hi) = (-1.0, 3.0);
        let h = (hi - lo) / n as f64;
        let total: f64 = (0..n)
            .map(|i| k.log_density(&[lo + (i as f64 + 0.5) * h], &x).unwrap().exp() * h)
            .sum();
        assert!((total - 1.0).abs() < 1e-4, "{total}");
    }

    #[test]
    fn sampling_is_reproducible() {
        let grid = Grid::ring(32, 0.0, 1.0).unwrap();
        let params = ModelParams::single(1.0, 1.0, 0.001).unwrap();
        let k = TransitionKernel::new(VectorField::zeros(&grid), &params).unwrap();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            (0..5).map(|_| k.sample_step(&[0.5], &mut rng).unwrap()[0]).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}
