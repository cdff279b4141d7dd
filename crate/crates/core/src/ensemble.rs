//! Walker ensembles driven by the max-entropy kernel.
//!
//! RNG split rule: the initial draw uses `ChaCha8Rng::seed_from_u64(seed)`
//! on stream 0; walker `i` owns the same seed on stream `i + 1`. Each walker
//! consumes its own stream in a fixed order, so trajectories do not depend
//! on how the work is scheduled across threads.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::calculus::{diff_axis, integrate_raw};
use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::gauge::GaugeInput;
use crate::grid::Grid;
use crate::hamiltonian::{add_osmotic, current_velocity, CoupledFields};
use crate::params::ModelParams;
use crate::phase::PhaseRecord;

/// Initial densities must integrate to one within this tolerance.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct EnsembleState {
    dims: usize,
    positions: Vec<f64>,
    time: f64,
    master_seed: u64,
    step: u64,
    rngs: Vec<ChaCha8Rng>,
    clamped: u64,
}

impl EnsembleState {
    /// Builds a state from explicit positions (walker-major).
    pub fn from_positions(grid: &Grid, positions: Vec<f64>, seed: u64) -> Result<Self> {
        let dims = grid.dims();
        if positions.is_empty() || !positions.len().is_multiple_of(dims) {
            return Err(Error::LengthMismatch {
                what: "walker positions",
                expected: dims,
                got: positions.len(),
            });
        }
        let mut wrapped = Vec::with_capacity(positions.len());
        for x in positions.chunks(dims) {
            wrapped.extend(grid.wrap_position(x)?);
        }
        let n = wrapped.len() / dims;
        Ok(Self {
            dims,
            positions: wrapped,
            time: 0.0,
            master_seed: seed,
            step: 0,
            rngs: walker_streams(seed, n),
            clamped: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len() / self.dims
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn position(&self, walker: usize) -> &[f64] {
        &self.positions[walker * self.dims..(walker + 1) * self.dims]
    }

    /// Coordinates of every walker along one axis.
    pub fn axis_samples(&self, axis: usize) -> Vec<f64> {
        self.positions.iter().skip(axis).step_by(self.dims).copied().collect()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    /// Walker-steps that left an open axis and were clamped to the boundary.
    pub fn clamped(&self) -> u64 {
        self.clamped
    }

    /// Appends `step,walker,x0[,x1]` rows for the current positions.
    pub fn write_trajectory_rows<W: Write>(&self, mut out: W) -> Result<()> {
        for (i, x) in self.positions.chunks(self.dims).enumerate() {
            write!(out, "{},{}", self.step, i)?;
            for v in x {
                write!(out, ",{v:.17e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn trajectory_header(&self) -> String {
        let mut h = String::from("step,walker");
        for a in 0..self.dims {
            h.push_str(&format!(",x{a}"));
        }
        h
    }
}

fn walker_streams(seed: u64, n: usize) -> Vec<ChaCha8Rng> {
    (0..n)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            rng
        })
        .collect()
}

/// Draws `n_walkers` i.i.d. positions from `rho0`: inverse CDF over cells
/// on one-dimensional grids, rejection sampling on two-dimensional ones,
/// then a uniform offset inside the chosen cell.
pub fn init_ensemble(rho0: &ScalarField, n_walkers: usize, seed: u64) -> Result<EnsembleState> {
    let grid = rho0.grid();
    let values = rho0.values();
    if let Some((index, &value)) = values.iter().enumerate().find(|(_, &v)| v < 0.0) {
        return Err(Error::NegativeDensity { index, value });
    }
    let total = integrate_raw(grid, values);
    if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::Unnormalized {
            total,
            tolerance: NORMALIZATION_TOLERANCE,
        });
    }
    if n_walkers == 0 {
        return Err(Error::InvalidParams("an ensemble needs at least one walker".into()));
    }
    let dims = grid.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells = Vec::with_capacity(n_walkers);
    if dims == 1 {
        let mut cdf = Vec::with_capacity(values.len());
        let mut acc = 0.0;
        for v in values {
            acc += v;
            cdf.push(acc);
        }
        for _ in 0..n_walkers {
            let u = rng.random::<f64>() * acc;
            let p = cdf.partition_point(|&c| c <= u).min(values.len() - 1);
            cells.push(p);
        }
    } else {
        let peak = rho0.max();
        while cells.len() < n_walkers {
            let p = rng.random_range(0..values.len());
            if rng.random::<f64>() * peak < values[p] {
                cells.push(p);
            }
        }
    }
    let mut positions = Vec::with_capacity(n_walkers * dims);
    for p in cells {
        for axis in 0..dims {
            let lo = grid.origin(axis);
            let h = grid.spacing(axis);
            let mut x = grid.coordinate(axis, grid.index_along(p, axis)) + (rng.random::<f64>() - 0.5) * h;
            if grid.periodic(axis) {
                x = lo + (x - lo).rem_euclid(grid.extent(axis));
            } else {
                x = x.clamp(lo, lo + grid.extent(axis));
            }
            positions.push(x);
        }
    }
    EnsembleState::from_positions(grid, positions, seed)
}

/// Walker drift from the field variables and the number of cells whose
/// density fell below the floor (those get no osmotic term).
#[derive(Clone, Debug)]
pub struct FieldDrift {
    pub drift: VectorField,
    pub floored_cells: usize,
}

/// `b = m⁻¹(∂Φ − Ā) + (η/2m) ∂ρ/ρ`.
pub fn drift_from_fields(
    rho: &ScalarField,
    phase: &PhaseRecord,
    gauge: Option<&GaugeInput>,
    params: &ModelParams,
) -> Result<FieldDrift> {
    let grid = rho.grid();
    let v = current_velocity(rho, phase, gauge, params)?;
    let mut u = v.values().to_vec();
    let floored_cells = add_osmotic(grid, rho.values(), params, &mut u);
    Ok(FieldDrift {
        drift: VectorField::new(grid.clone(), u)?,
        floored_cells,
    })
}

/// Supplies the drift for each walker step.
pub trait DriftSource {
    fn grid(&self) -> &Grid;

    /// Drift field for the step that starts at the current time.
    fn current_drift(&self) -> Result<VectorField>;

    /// Moves the source forward by `dt` after the walkers have stepped.
    fn advance(&mut self, dt: f64) -> Result<()>;
}

/// A time-independent drift field.
#[derive(Clone, Debug)]
pub struct StaticDrift(pub VectorField);

impl DriftSource for StaticDrift {
    fn grid(&self) -> &Grid {
        self.0.grid()
    }

    fn current_drift(&self) -> Result<VectorField> {
        Ok(self.0.clone())
    }

    fn advance(&mut self, _dt: f64) -> Result<()> {
        Ok(())
    }
}

impl DriftSource for CoupledFields {
    fn grid(&self) -> &Grid {
        CoupledFields::grid(self)
    }

    fn current_drift(&self) -> Result<VectorField> {
        Ok(self.walker_drift())
    }

    fn advance(&mut self, dt: f64) -> Result<()> {
        self.step(dt)
    }
}

/// Interpolation cell along one axis: lower index, upper index, fraction.
#[inline]
fn locate(grid: &Grid, axis: usize, x: f64) -> (usize, usize, f64) {
    let n = grid.points_on(axis);
    let s = (x - grid.origin(axis)) / grid.spacing(axis);
    if grid.periodic(axis) {
        let fl = s.floor();
        let i0 = (fl as isize).rem_euclid(n as isize) as usize;
        (i0, (i0 + 1) % n, s - fl)
    } else {
        let i0 = (s.floor().max(0.0) as usize).min(n - 2);
        (i0, i0 + 1, (s - i0 as f64).clamp(0.0, 1.0))
    }
}

#[inline]
fn drift_at(grid: &Grid, drift: &[f64], x: &[f64], out: &mut [f64; 2]) {
    let dims = grid.dims();
    if dims == 1 {
        let (i0, i1, t) = locate(grid, 0, x[0]);
        out[0] = (1.0 - t) * drift[i0] + t * drift[i1];
        return;
    }
    let (a0, a1, s) = locate(grid, 0, x[0]);
    let (b0, b1, t) = locate(grid, 1, x[1]);
    let n1 = grid.points_on(1);
    let corners = [
        (a0 * n1 + b0, (1.0 - s) * (1.0 - t)),
        (a0 * n1 + b1, (1.0 - s) * t),
        (a1 * n1 + b0, s * (1.0 - t)),
        (a1 * n1 + b1, s * t),
    ];
    *out = [0.0, 0.0];
    for (p, w) in corners {
        out[0] += w * drift[2 * p];
        out[1] += w * drift[2 * p + 1];
    }
}

/// Advances every walker by `n_steps` kernel steps of length `params.dt`,
/// querying `source` for the drift before each step. Walkers crossing an
/// open boundary are clamped onto it and counted.
pub fn evolve_ensemble<D: DriftSource + ?Sized>(
    state: &mut EnsembleState,
    source: &mut D,
    params: &ModelParams,
    n_steps: u64,
) -> Result<()> {
    let grid = source.grid().clone();
    params.validate()?;
    params.check_grid(&grid)?;
    if grid.dims() != state.dims {
        return Err(Error::GridMismatch);
    }
    let dims = state.dims;
    let dt = params.dt;
    let sigma: Vec<f64> = (0..dims)
        .map(|a| (params.eta * dt / params.mass_of_axis(&grid, a)).sqrt())
        .collect();
    let lo: Vec<f64> = grid.origins().to_vec();
    let span: Vec<f64> = (0..dims).map(|a| grid.extent(a)).collect();
    for _ in 0..n_steps {
        let drift = source.current_drift()?;
        if drift.grid() != &grid {
            return Err(Error::GridMismatch);
        }
        let b = drift.values();
        let clamped: u64 = state
            .positions
            .par_chunks_mut(dims)
            .zip(state.rngs.par_iter_mut())
            .map(|(x, rng)| {
                let mut v = [0.0; 2];
                drift_at(&grid, b, x, &mut v);
                let mut hits = 0;
                for a in 0..dims {
                    let z: f64 = rng.sample(StandardNormal);
                    let mut xa = x[a] + v[a] * dt + sigma[a] * z;
                    if grid.periodic(a) {
                        xa = lo[a] + (xa - lo[a]).rem_euclid(span[a]);
                    } else if xa < lo[a] || xa > lo[a] + span[a] {
                        xa = xa.clamp(lo[a], lo[a] + span[a]);
                        hits = 1;
                    }
                    x[a] = xa;
                }
                hits
            })
            .sum();
        state.clamped += clamped;
        source.advance(dt)?;
        state.step += 1;
        state.time += dt;
    }
    Ok(())
}

/// Normalized histogram: each walker counts toward its nearest grid point.
pub fn estimate_density(state: &EnsembleState, grid: &Grid) -> Result<ScalarField> {
    if grid.dims() != state.dims {
        return Err(Error::GridMismatch);
    }
    let mut counts = vec![0.0; grid.len()];
    for x in state.positions.chunks(state.dims) {
        let x = grid.wrap_position(x)?;
        counts[grid.nearest_point(&x)] += 1.0;
    }
    let scale = 1.0 / (state.len() as f64 * grid.cell_volume());
    ScalarField::new(grid.clone(), counts.into_iter().map(|c| c * scale).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DensityDistance {
    pub l1: f64,
    pub linf: f64,
}

pub fn compare_densities(r1: &ScalarField, r2: &ScalarField) -> Result<DensityDistance> {
    if r1.grid() != r2.grid() {
        return Err(Error::GridMismatch);
    }
    let diff: Vec<f64> = r1
        .values()
        .iter()
        .zip(r2.values())
        .map(|(a, b)| (a - b).abs())
        .collect();
    Ok(DensityDistance {
        l1: integrate_raw(r1.grid(), &diff),
        linf: diff.iter().cloned().fold(0.0, f64::max),
    })
}

/// Mean squared displacement per axis between two states of one ensemble,
/// using the minimum image on periodic axes.
pub fn mean_square_displacement(grid: &Grid, start: &EnsembleState, end: &EnsembleState) -> Result<Vec<f64>> {
    if start.len() != end.len() || start.dims != end.dims {
        return Err(Error::LengthMismatch {
            what: "ensemble",
            expected: start.len(),
            got: end.len(),
        });
    }
    let dims = start.dims;
    let mut msd = vec![0.0; dims];
    for (x0, x1) in start.positions.chunks(dims).zip(end.positions.chunks(dims)) {
        for a in 0..dims {
            let mut d = x1[a] - x0[a];
            if grid.periodic(a) {
                let l = grid.extent(a);
                d -= l * (d / l).round();
            }
            msd[a] += d * d;
        }
    }
    Ok(msd.into_iter().map(|s| s / start.len() as f64).collect())
}

/// Osmotic velocity `(η/2m) ∂ρ/ρ` alone, without the floor.
pub fn osmotic_velocity(rho: &ScalarField, params: &ModelParams) -> Result<VectorField> {
    let grid = rho.grid();
    params.check_grid(grid)?;
    let dims = grid.dims();
    let mut u = vec![0.0; grid.len() * dims];
    for axis in 0..dims {
        let d = diff_axis(grid, rho.values(), axis);
        let c = 0.5 * params.eta / params.mass_of_axis(grid, axis);
        for p in 0..grid.len() {
            u[p * dims + axis] = c * d[p] / rho.values()[p];
        }
    }
    VectorField::new(grid.clone(), u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn params() -> ModelParams {
        ModelParams::single(1.0, 1.0, 1e-3).unwrap()
    }

    #[test]
    fn delta_density_puts_every_walker_in_its_cell() {
        let grid = Grid::line(32, 0.0, 31.0).unwrap();
        let mut v = vec![0.0; 32];
        v[11] = 1.0;
        let rho = ScalarField::new(grid.clone(), v).unwrap();
        let state = init_ensemble(&rho, 1000, 7).unwrap();
        assert!(state.positions().iter().all(|&x| grid.nearest_point(&[x]) == 11));
        let est = estimate_density(&state, &grid).unwrap();
        assert_eq!(est.values()[11], 1.0);
    }

    #[test]
    fn rejects_bad_densities() {
        let grid = Grid::ring(16, 0.0, 1.0).unwrap();
        let mut v = vec![1.0; 16];
        v[3] = -0.1;
        let rho = ScalarField::new(grid.clone(), v).unwrap();
        assert!(matches!(init_ensemble(&rho, 10, 1), Err(Error::NegativeDensity { index: 3, .. })));
        let half = ScalarField::constant(&grid, 0.5);
        assert!(matches!(init_ensemble(&half, 10, 1), Err(Error::Unnormalized { .. })));
    }

    #[test]
    fn histogram_integrates_to_one() {
        let grid = Grid::ring(64, 0.0, 2.0 * PI).unwrap();
        let rho = ScalarField::constant(&grid, 1.0 / (2.0 * PI));
        let state = init_ensemble(&rho, 5000, 3).unwrap();
        let est = estimate_density(&state, &grid).unwrap();
        assert!((crate::calculus::integrate(&est).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn compare_examples() {
        let grid = Grid::line(16, 0.0, 15.0).unwrap();
        let mut a = vec![0.0; 16];
        let mut b = vec![0.0; 16];
        a[2] = 1.0;
        b[9] = 1.0;
        let a = ScalarField::new(grid.clone(), a).unwrap();
        let b = ScalarField::new(grid, b).unwrap();
        assert_eq!(compare_densities(&a, &a).unwrap(), DensityDistance { l1: 0.0, linf: 0.0 });
        assert_eq!(compare_densities(&a, &b).unwrap().l1, 2.0);
    }

    #[test]
    fn plane_wave_drift_is_uniform() {
        let grid = Grid::ring(64, 0.0, 2.0 * PI).unwrap();
        let rho = ScalarField::constant(&grid, 1.0 / (2.0 * PI));
        let phase = PhaseRecord::with_windings(ScalarField::zeros(&grid), vec![3], 1.0).unwrap();
        let d = drift_from_fields(&rho, &phase, None, &params()).unwrap();
        assert!(d.drift.values().iter().all(|&b| (b - 3.0).abs() < 1e-12));
        assert_eq!(d.floored_cells, 0);
    }

    #[test]
    fn evolution_is_deterministic() {
        let grid = Grid::ring(32, 0.0, 1.0).unwrap();
        let rho = ScalarField::constant(&grid, 1.0);
        let drift = StaticDrift(VectorField::uniform(&grid, &[0.3]).unwrap());
        let run = || {
            let mut s = init_ensemble(&rho, 200, 99).unwrap();
            evolve_ensemble(&mut s, &mut drift.clone(), &params(), 25).unwrap();
            s.positions().to_vec()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn open_boundary_clamps_and_counts() {
        let grid = Grid::line(16, 0.0, 1.0).unwrap();
        let mut state = EnsembleState::from_positions(&grid, vec![1.0; 100], 5).unwrap();
        let mut drift = StaticDrift(VectorField::uniform(&grid, &[50.0]).unwrap());
        evolve_ensemble(&mut state, &mut drift, &params(), 3).unwrap();
        assert!(state.positions().iter().all(|&x| x <= 1.0));
        assert!(state.clamped() > 0);
        assert_eq!(state.step(), 3);
    }

    #[test]
    fn trajectory_rows() {
        let grid = Grid::ring(16, 0.0, 1.0).unwrap();
        let state = EnsembleState::from_positions(&grid, vec![0.25, 0.5], 5).unwrap();
        let mut buf = Vec::new();
        state.write_trajectory_rows(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("0,0,2.5"));
        assert_eq!(state.trajectory_header(), "step,walker,x0");
    }
}
