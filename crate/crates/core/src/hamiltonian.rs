//! Coupled evolution of `(ρ, Φ)` by Hamilton's equations.
//!
//! The discrete ensemble Hamiltonian is
//!
//! ```text
//! H = Σ_p dV [ ½ ρ Σ_a (D_aΦ − Ā_a)² / m_a + ρ V + Σ_a ħ² (D_aρ)² / (8 m_a ρ) ]
//! ```
//!
//! with `D_a` the central difference. The right-hand sides below are the
//! exact partial derivatives of this sum divided by the cell volume, so on
//! periodic grids the semi-discrete system is canonical and conserves `H`
//! up to the time-integration error. The quantum term of the Hamilton-Jacobi
//! equation comes out as `(ħ²/8m)[g² + 2 D g]` with `g = Dρ/ρ`, which is the
//! discrete form of `(ħ²/2m) ∂²√ρ / √ρ`.

use serde::Serialize;

use crate::calculus::{diff_axis, diff_axis_into, integrate_raw};
use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::gauge::GaugeInput;
use crate::grid::Grid;
use crate::params::ModelParams;
use crate::phase::PhaseRecord;

/// Cells with `ρ < DENSITY_FLOOR * max ρ` contribute no quantum or osmotic term.
pub const DENSITY_FLOOR: f64 = 1e-12;

/// `dt ≤ STABILITY_CONSTANT · h² m / ħ` for the explicit RK4 step.
pub const STABILITY_CONSTANT: f64 = 1.0;

/// Safety factor applied to the stability bound for reference runs.
pub const SAFETY_FACTOR: f64 = 0.5;

/// A single RK4 step may not grow `max |ρ|` by more than this factor.
pub const BLOWUP_FACTOR: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HamiltonianBreakdown {
    pub kinetic: f64,
    pub potential: f64,
    pub quantum: f64,
    pub total: f64,
    /// `∫ρ`, reported so callers can flag unnormalized input.
    pub norm: f64,
}

/// The quantum term of `∂_tΦ` and the number of floored cells.
#[derive(Clone, Debug)]
pub struct QuantumPotential {
    /// `(ħ²/2m) ∂²√ρ/√ρ`, the sign with which it enters `∂_tΦ`.
    pub field: ScalarField,
    pub floored_cells: usize,
}

/// Largest stable time step: diffusive `C h² m / ħ` and advective
/// `h / |v|_max`, whichever is smaller. Infinite when neither applies.
pub fn stability_bound(grid: &Grid, params: &ModelParams, max_speed: f64) -> f64 {
    let hbar = params.hbar();
    let mut bound = f64::INFINITY;
    for axis in 0..grid.dims() {
        let h = grid.spacing(axis);
        let m = params.mass_of_axis(grid, axis);
        if hbar > 0.0 {
            bound = bound.min(STABILITY_CONSTANT * h * h * m / hbar);
        }
        if max_speed > 0.0 {
            bound = bound.min(h / max_speed);
        }
    }
    bound
}

/// Precomputed pieces of the field equations that do not change in time.
#[derive(Clone, Debug)]
pub(crate) struct FieldOperator {
    grid: Grid,
    inv_mass: Vec<f64>,
    bar_a: Vec<f64>,
    slopes: Vec<f64>,
    potential: Vec<f64>,
    hbar: f64,
}

struct Scratch {
    u: Vec<f64>,
    flux: Vec<f64>,
    d: Vec<f64>,
    g: Vec<f64>,
}

impl Scratch {
    fn new(n: usize, dims: usize) -> Self {
        Self {
            u: vec![0.0; n * dims],
            flux: vec![0.0; n],
            d: vec![0.0; n],
            g: vec![0.0; n],
        }
    }
}

impl FieldOperator {
    pub(crate) fn new(
        grid: &Grid,
        phase: &PhaseRecord,
        gauge: Option<&GaugeInput>,
        potential: Option<&ScalarField>,
        params: &ModelParams,
    ) -> Result<Self> {
        params.check_grid(grid)?;
        if phase.grid() != grid {
            return Err(Error::GridMismatch);
        }
        let bar_a = match gauge {
            Some(g) if g.grid() != grid => return Err(Error::GridMismatch),
            Some(g) => g.bar_a(params),
            None => vec![0.0; grid.len() * grid.dims()],
        };
        let potential = match potential {
            Some(v) if v.grid() != grid => return Err(Error::GridMismatch),
            Some(v) => v.values().to_vec(),
            None => vec![0.0; grid.len()],
        };
        Ok(Self {
            inv_mass: (0..grid.dims())
                .map(|a| 1.0 / params.mass_of_axis(grid, a))
                .collect(),
            slopes: (0..grid.dims()).map(|a| phase.winding_slope(a)).collect(),
            bar_a,
            potential,
            hbar: params.hbar(),
            grid: grid.clone(),
        })
    }

    fn dims(&self) -> usize {
        self.grid.dims()
    }

    /// `(D_aΦ + slope_a − Ā_a) / m_a`, point-major.
    fn velocity_into(&self, base: &[f64], u: &mut [f64], d: &mut [f64]) {
        let dims = self.dims();
        for axis in 0..dims {
            diff_axis_into(&self.grid, base, axis, d);
            for p in 0..base.len() {
                let i = p * dims + axis;
                u[i] = (d[p] + self.slopes[axis] - self.bar_a[i]) * self.inv_mass[axis];
            }
        }
    }

    fn floor(rho: &[f64]) -> f64 {
        DENSITY_FLOOR * rho.iter().cloned().fold(0.0, f64::max)
    }

    /// Adds `(ħ²/8m)(g² + 2Dg)` summed over axes into `out`; returns the
    /// number of floored cells.
    fn add_quantum(&self, rho: &[f64], out: &mut [f64], s: &mut Scratch) -> usize {
        let eps = Self::floor(rho);
        let floored = rho.iter().filter(|&&r| r < eps).count();
        if self.hbar == 0.0 {
            return floored;
        }
        for axis in 0..self.dims() {
            let c = self.hbar * self.hbar * self.inv_mass[axis] / 8.0;
            diff_axis_into(&self.grid, rho, axis, &mut s.d);
            for p in 0..rho.len() {
                s.g[p] = if rho[p] >= eps && rho[p] > 0.0 { s.d[p] / rho[p] } else { 0.0 };
            }
            diff_axis_into(&self.grid, &s.g, axis, &mut s.d);
            for p in 0..rho.len() {
                out[p] += c * (s.g[p] * s.g[p] + 2.0 * s.d[p]);
            }
        }
        floored
    }

    fn rhs(&self, rho: &[f64], base: &[f64], d_rho: &mut [f64], d_phi: &mut [f64], s: &mut Scratch) {
        let dims = self.dims();
        let n = rho.len();
        self.velocity_into(base, &mut s.u, &mut s.d);
        d_rho.iter_mut().for_each(|v| *v = 0.0);
        for axis in 0..dims {
            for p in 0..n {
                s.flux[p] = rho[p] * s.u[p * dims + axis];
            }
            diff_axis_into(&self.grid, &s.flux, axis, &mut s.d);
            for p in 0..n {
                d_rho[p] -= s.d[p];
            }
        }
        for p in 0..n {
            let mut kin = 0.0;
            for axis in 0..dims {
                let u = s.u[p * dims + axis];
                kin += u * u / self.inv_mass[axis];
            }
            d_phi[p] = -0.5 * kin - self.potential[p];
        }
        self.add_quantum(rho, d_phi, s);
    }

    fn hamiltonian(&self, rho: &[f64], base: &[f64]) -> HamiltonianBreakdown {
        let dims = self.dims();
        let n = rho.len();
        let mut u = vec![0.0; n * dims];
        let mut d = vec![0.0; n];
        self.velocity_into(base, &mut u, &mut d);
        let mut kin = vec![0.0; n];
        let mut pot = vec![0.0; n];
        let mut qua = vec![0.0; n];
        let eps = Self::floor(rho);
        for p in 0..n {
            let mut k = 0.0;
            for axis in 0..dims {
                let ua = u[p * dims + axis];
                k += ua * ua / self.inv_mass[axis];
            }
            kin[p] = 0.5 * rho[p] * k;
            pot[p] = rho[p] * self.potential[p];
        }
        if self.hbar > 0.0 {
            for axis in 0..dims {
                let c = self.hbar * self.hbar * self.inv_mass[axis] / 8.0;
                diff_axis_into(&self.grid, rho, axis, &mut d);
                for p in 0..n {
                    if rho[p] >= eps && rho[p] > 0.0 {
                        qua[p] += c * d[p] * d[p] / rho[p];
                    }
                }
            }
        }
        let kinetic = integrate_raw(&self.grid, &kin);
        let potential = integrate_raw(&self.grid, &pot);
        let quantum = integrate_raw(&self.grid, &qua);
        HamiltonianBreakdown {
            kinetic,
            potential,
            quantum,
            total: kinetic + potential + quantum,
            norm: integrate_raw(&self.grid, rho),
        }
    }

    fn max_speed(&self, base: &[f64]) -> f64 {
        let mut u = vec![0.0; base.len() * self.dims()];
        let mut d = vec![0.0; base.len()];
        self.velocity_into(base, &mut u, &mut d);
        u.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Gauge-invariant current velocity `v^A = m^{AB}(∂_BΦ − Ā_B)`.
pub fn current_velocity(
    rho: &ScalarField,
    phase: &PhaseRecord,
    gauge: Option<&GaugeInput>,
    params: &ModelParams,
) -> Result<VectorField> {
    let op = FieldOperator::new(rho.grid(), phase, gauge, None, params)?;
    let mut u = vec![0.0; rho.grid().len() * rho.grid().dims()];
    let mut d = vec![0.0; rho.grid().len()];
    op.velocity_into(phase.base().values(), &mut u, &mut d);
    VectorField::new(rho.grid().clone(), u)
}

/// `∂_tρ = −∂_A(ρ v^A)`.
pub fn fokker_planck_rhs(
    rho: &ScalarField,
    phase: &PhaseRecord,
    gauge: Option<&GaugeInput>,
    params: &ModelParams,
) -> Result<ScalarField> {
    let (d_rho, _) = both_rhs(rho, phase, gauge, None, params)?;
    Ok(d_rho)
}

/// The quantum term of the Hamilton-Jacobi equation.
pub fn quantum_potential(rho: &ScalarField, params: &ModelParams) -> Result<QuantumPotential> {
    let grid = rho.grid();
    let phase = PhaseRecord::zero(grid, params.hbar());
    let op = FieldOperator::new(grid, &phase, None, None, params)?;
    let mut out = vec![0.0; grid.len()];
    let mut s = Scratch::new(grid.len(), grid.dims());
    let floored_cells = op.add_quantum(rho.values(), &mut out, &mut s);
    Ok(QuantumPotential {
        field: ScalarField::new(grid.clone(), out)?,
        floored_cells,
    })
}

/// `∂_tΦ = −½ m^{AB}(∂_AΦ − Ā_A)(∂_BΦ − Ā_B) − V + (ħ²/2) m^{AB} ∂_A∂_B√ρ / √ρ`.
pub fn hamilton_jacobi_rhs(
    rho: &ScalarField,
    phase: &PhaseRecord,
    gauge: Option<&GaugeInput>,
    potential: Option<&ScalarField>,
    params: &ModelParams,
) -> Result<ScalarField> {
    let (_, d_phi) = both_rhs(rho, phase, gauge, potential, params)?;
    Ok(d_phi)
}

fn both_rhs(
    rho: &ScalarField,
    phase: &PhaseRecord,
    gauge: Option<&GaugeInput>,
    potential: Option<&ScalarField>,
    params: &ModelParams,
) -> Result<(ScalarField, ScalarField)> {
    let grid = rho.grid();
    let op = FieldOperator::new(grid, phase, gauge, potential, params)?;
    let n = grid.len();
    let mut d_rho = vec![0.0; n];
    let mut d_phi = vec![0.0; n];
    let mut s = Scratch::new(n, grid.dims());
    op.rhs(rho.values(), phase.base().values(), &mut d_rho, &mut d_phi, &mut s);
    Ok((
        ScalarField::new(grid.clone(), d_rho)?,
        ScalarField::new(grid.clone(), d_phi)?,
    ))
}

pub fn ensemble_hamiltonian(
    rho: &ScalarField,
    phase: &PhaseRecord,
    gauge: Option<&GaugeInput>,
    potential: Option<&ScalarField>,
    params: &ModelParams,
) -> Result<HamiltonianBreakdown> {
    let op = FieldOperator::new(rho.grid(), phase, gauge, potential, params)?;
    Ok(op.hamiltonian(rho.values(), phase.base().values()))
}

/// One RK4 step of the coupled system. Windings are topological and pass
/// through unchanged.
pub fn step_coupled(
    rho: &ScalarField,
    phase: &PhaseRecord,
    gauge: Option<&GaugeInput>,
    potential: Option<&ScalarField>,
    params: &ModelParams,
    dt: f64,
) -> Result<(ScalarField, PhaseRecord)> {
    let mut fields = CoupledFields::new(rho.clone(), phase.clone(), gauge, potential, params)?;
    fields.step(dt)?;
    Ok((fields.rho(), fields.phase()))
}

/// `(ρ, Φ)` state with a reusable operator, for repeated RK4 steps.
#[derive(Clone, Debug)]
pub struct CoupledFields {
    op: FieldOperator,
    params: ModelParams,
    phase: PhaseRecord,
    rho: Vec<f64>,
    base: Vec<f64>,
    time: f64,
    steps: u64,
}

impl CoupledFields {
    pub fn new(
        rho: ScalarField,
        phase: PhaseRecord,
        gauge: Option<&GaugeInput>,
        potential: Option<&ScalarField>,
        params: &ModelParams,
    ) -> Result<Self> {
        if rho.grid() != phase.grid() {
            return Err(Error::GridMismatch);
        }
        if let Some((index, &value)) = rho.values().iter().enumerate().find(|(_, &v)| v < 0.0) {
            return Err(Error::NegativeDensity { index, value });
        }
        let op = FieldOperator::new(rho.grid(), &phase, gauge, potential, params)?;
        Ok(Self {
            op,
            params: params.clone(),
            base: phase.base().values().to_vec(),
            rho: rho.into_values(),
            phase,
            time: 0.0,
            steps: 0,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.op.grid
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn rho(&self) -> ScalarField {
        ScalarField::new(self.op.grid.clone(), self.rho.clone()).expect("finite density")
    }

    pub fn rho_values(&self) -> &[f64] {
        &self.rho
    }

    pub fn phase(&self) -> PhaseRecord {
        self.phase
            .with_base(ScalarField::new(self.op.grid.clone(), self.base.clone()).expect("finite phase"))
            .expect("same grid")
    }

    pub fn hamiltonian(&self) -> HamiltonianBreakdown {
        self.op.hamiltonian(&self.rho, &self.base)
    }

    pub fn stability_bound(&self) -> f64 {
        stability_bound(&self.op.grid, &self.params, self.op.max_speed(&self.base))
    }

    pub fn step(&mut self, dt: f64) -> Result<()> {
        let bound = self.stability_bound();
        if !(dt > 0.0) || dt > bound {
            return Err(Error::Unstable { dt, bound });
        }
        let n = self.rho.len();
        let mut s = Scratch::new(n, self.op.dims());
        let mut k_rho = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let mut k_phi = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let mut r = vec![0.0; n];
        let mut b = vec![0.0; n];
        let weights = [0.0, 0.5, 0.5, 1.0];
        for stage in 0..4 {
            if stage == 0 {
                r.copy_from_slice(&self.rho);
                b.copy_from_slice(&self.base);
            } else {
                let w = weights[stage] * dt;
                for p in 0..n {
                    r[p] = self.rho[p] + w * k_rho[stage - 1][p];
                    b[p] = self.base[p] + w * k_phi[stage - 1][p];
                }
            }
            let (kr, kp) = (&mut k_rho[stage], &mut k_phi[stage]);
            self.op.rhs(&r, &b, kr, kp, &mut s);
        }
        let before = self.rho.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        for p in 0..n {
            self.rho[p] += dt / 6.0 * (k_rho[0][p] + 2.0 * k_rho[1][p] + 2.0 * k_rho[2][p] + k_rho[3][p]);
            self.base[p] += dt / 6.0 * (k_phi[0][p] + 2.0 * k_phi[1][p] + 2.0 * k_phi[2][p] + k_phi[3][p]);
        }
        self.steps += 1;
        self.time += dt;
        let after = self.rho.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        if let Some(p) = (0..n).find(|&p| !(self.rho[p].is_finite() && self.base[p].is_finite())) {
            return Err(Error::Blowup {
                step: self.steps,
                detail: format!("non-finite field at point {p}"),
            });
        }
        if after > BLOWUP_FACTOR * before {
            return Err(Error::Blowup {
                step: self.steps,
                detail: format!("max density grew from {before:e} to {after:e}"),
            });
        }
        Ok(())
    }

    /// Walker drift `v + (η/2m) ∂ρ/ρ` for the current fields.
    pub fn walker_drift(&self) -> VectorField {
        let grid = &self.op.grid;
        let dims = grid.dims();
        let n = self.rho.len();
        let mut u = vec![0.0; n * dims];
        let mut d = vec![0.0; n];
        self.op.velocity_into(&self.base, &mut u, &mut d);
        add_osmotic(grid, &self.rho, &self.params, &mut u);
        VectorField::new(grid.clone(), u).expect("finite drift")
    }
}

/// Adds `(η/2m) ∂ρ/ρ` to a point-major velocity buffer. Returns the number
/// of floored cells, which receive no osmotic term.
pub(crate) fn add_osmotic(grid: &Grid, rho: &[f64], params: &ModelParams, u: &mut [f64]) -> usize {
    let dims = grid.dims();
    let eps = FieldOperator::floor(rho);
    for axis in 0..dims {
        let d = diff_axis(grid, rho, axis);
        let c = 0.5 * params.eta / params.mass_of_axis(grid, axis);
        for p in 0..rho.len() {
            if rho[p] >= eps && rho[p] > 0.0 {
                u[p * dims + axis] += c * d[p] / rho[p];
            }
        }
    }
    rho.iter().filter(|&&r| r < eps).count()
}
