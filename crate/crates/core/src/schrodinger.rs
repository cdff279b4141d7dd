//! Gauge-covariant Schrödinger reference dynamics and the Madelung maps.
//!
//! The covariant derivative `∂ − i(ηβ_n/ħ)A` is discretized with link
//! phases: the hop from `x` to `x + h e_a` picks up `exp(−iκ ∫A dl)` with
//! `κ = ηβ_n/ħ`. Time stepping is Crank-Nicolson, one tridiagonal (cyclic on
//! periodic axes) solve per grid line. Two-dimensional grids use the
//! symmetric product of per-axis Cayley factors, each of which is unitary.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{ComplexField, ScalarField};
use crate::gauge::GaugeInput;
use crate::grid::Grid;
use crate::params::ModelParams;
use crate::phase::PhaseRecord;

/// `|Ψ|² ≥ NODE_FLOOR · max |Ψ|²` is required along unwrapping paths.
pub const NODE_FLOOR: f64 = 1e-10;

/// Relative residual above which a linear solve is reported as failed.
pub const SOLVER_TOLERANCE: f64 = 1e-9;

/// Link phases of the lattice covariant derivative.
#[derive(Clone, Debug)]
pub struct CovariantStencil {
    grid: Grid,
    /// `ηβ_n/ħ` for the particle owning each axis.
    coupling: Vec<f64>,
    /// `exp(−iκ_a ∫_p^{p+e_a} A)`, point-major.
    hops: Vec<Complex64>,
}

impl CovariantStencil {
    pub fn new(grid: &Grid, gauge: Option<&GaugeInput>, params: &ModelParams) -> Result<Self> {
        params.check_grid(grid)?;
        let dims = grid.dims();
        let hbar = params.hbar();
        if !(hbar > 0.0) {
            return Err(Error::InvalidParams("the Schrodinger reference needs hbar > 0".into()));
        }
        let coupling: Vec<f64> = (0..dims)
            .map(|a| params.eta * params.beta_of_axis(grid, a) / hbar)
            .collect();
        let hops = match gauge {
            Some(g) if g.grid() != grid => return Err(Error::GridMismatch),
            Some(g) => g
                .links()
                .iter()
                .enumerate()
                .map(|(i, &l)| Complex64::from_polar(1.0, -coupling[i % dims] * l))
                .collect(),
            None => vec![Complex64::new(1.0, 0.0); grid.len() * dims],
        };
        Ok(Self {
            grid: grid.clone(),
            coupling,
            hops,
        })
    }

    pub fn coupling(&self) -> &[f64] {
        &self.coupling
    }

    pub fn hop(&self, p: usize, axis: usize) -> Complex64 {
        self.hops[p * self.grid.dims() + axis]
    }

    /// Covariant second difference along one axis; zero outside open ends.
    fn second_difference(&self, psi: &[Complex64], axis: usize, out: &mut [Complex64]) {
        let inv_h2 = 1.0 / (self.grid.spacing(axis) * self.grid.spacing(axis));
        for (p, o) in out.iter_mut().enumerate() {
            let mut acc = -2.0 * psi[p];
            if let Some(q) = self.grid.neighbor(p, axis, 1) {
                acc += self.hop(p, axis) * psi[q];
            }
            if let Some(q) = self.grid.neighbor(p, axis, -1) {
                acc += self.hop(q, axis).conj() * psi[q];
            }
            *o += acc * inv_h2;
        }
    }
}

/// Sum over the axes of `particle` of the covariant second difference.
pub fn covariant_laplacian(
    psi: &ComplexField,
    gauge: Option<&GaugeInput>,
    params: &ModelParams,
    particle: usize,
) -> Result<ComplexField> {
    let grid = psi.grid();
    let stencil = CovariantStencil::new(grid, gauge, params)?;
    if particle >= grid.particle_count() {
        return Err(Error::InvalidParams(format!("no particle {particle}")));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); grid.len()];
    for axis in grid.axes_of_particle(particle) {
        stencil.second_difference(psi.values(), axis, &mut out);
    }
    ComplexField::new(grid.clone(), out)
}

/// Crank-Nicolson propagator for a fixed gauge, potential and time step.
#[derive(Clone, Debug)]
pub struct SchrodingerPropagator {
    stencil: CovariantStencil,
    potential: Vec<f64>,
    kinetic: Vec<f64>,
    hbar: f64,
    dt: f64,
}

impl SchrodingerPropagator {
    pub fn new(
        grid: &Grid,
        gauge: Option<&GaugeInput>,
        potential: Option<&ScalarField>,
        params: &ModelParams,
        dt: f64,
    ) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidParams(format!("dt = {dt} must be positive")));
        }
        let stencil = CovariantStencil::new(grid, gauge, params)?;
        let potential = match potential {
            Some(v) if v.grid() != grid => return Err(Error::GridMismatch),
            Some(v) => v.values().to_vec(),
            None => vec![0.0; grid.len()],
        };
        let hbar = params.hbar();
        let kinetic = (0..grid.dims())
            .map(|a| {
                let h = grid.spacing(a);
                hbar * hbar / (2.0 * params.mass_of_axis(grid, a) * h * h)
            })
            .collect();
        Ok(Self {
            stencil,
            potential,
            kinetic,
            hbar,
            dt,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.stencil.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// `HΨ = Σ_n −(ħ²/2m_n) D_n² Ψ + VΨ`.
    pub fn apply_hamiltonian(&self, psi: &ComplexField) -> Result<ComplexField> {
        let grid = self.grid();
        if psi.grid() != grid {
            return Err(Error::GridMismatch);
        }
        let mut out: Vec<Complex64> = psi
            .values()
            .iter()
            .zip(&self.potential)
            .map(|(z, v)| z * v)
            .collect();
        let mut lap = vec![Complex64::new(0.0, 0.0); grid.len()];
        for axis in 0..grid.dims() {
            lap.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            self.stencil.second_difference(psi.values(), axis, &mut lap);
            let h2 = grid.spacing(axis) * grid.spacing(axis);
            for (o, l) in out.iter_mut().zip(&lap) {
                *o -= l * self.kinetic[axis] * h2;
            }
        }
        ComplexField::new(grid.clone(), out)
    }

    pub fn step(&self, psi: &ComplexField) -> Result<ComplexField> {
        if psi.grid() != self.grid() {
            return Err(Error::GridMismatch);
        }
        let mut values = psi.values().to_vec();
        self.step_in_place(&mut values)?;
        ComplexField::new(self.grid().clone(), values)
    }

    pub fn step_in_place(&self, psi: &mut [Complex64]) -> Result<()> {
        match self.grid().dims() {
            1 => self.cayley_axis(psi, 0, self.dt),
            _ => {
                self.cayley_axis(psi, 0, 0.5 * self.dt)?;
                self.cayley_axis(psi, 1, self.dt)?;
                self.cayley_axis(psi, 0, 0.5 * self.dt)
            }
        }
    }

    /// Solves `(1 + iτH_a/2ħ) ψ' = (1 − iτH_a/2ħ) ψ` on every line along
    /// `axis`, where `H_a` carries the kinetic term of that axis and an equal
    /// share of the potential.
    fn cayley_axis(&self, psi: &mut [Complex64], axis: usize, tau: f64) -> Result<()> {
        let grid = self.grid().clone();
        let n = grid.points_on(axis);
        let stride = grid.stride(axis);
        let share = 1.0 / grid.dims() as f64;
        let periodic = grid.periodic(axis);
        let c = self.kinetic[axis];
        let z = Complex64::new(0.0, 0.5 * tau / self.hbar);

        let mut diag_h = vec![0.0; n];
        let mut upper_h = vec![Complex64::new(0.0, 0.0); n];
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let mut rhs = vec![Complex64::new(0.0, 0.0); n];
        let mut lower = vec![Complex64::new(0.0, 0.0); n];
        let mut diag = vec![Complex64::new(0.0, 0.0); n];
        let mut upper = vec![Complex64::new(0.0, 0.0); n];

        for start in (0..grid.len()).filter(|&p| grid.index_along(p, axis) == 0) {
            for j in 0..n {
                let p = start + j * stride;
                line[j] = psi[p];
                diag_h[j] = 2.0 * c + share * self.potential[p];
                // H[j][j+1]; H[j+1][j] is its conjugate.
                upper_h[j] = -c * self.stencil.hop(p, axis);
            }
            // (H ψ)_j with Dirichlet or cyclic closure.
            for j in 0..n {
                let mut h = diag_h[j] * line[j];
                if j + 1 < n {
                    h += upper_h[j] * line[j + 1];
                } else if periodic {
                    h += upper_h[n - 1] * line[0];
                }
                if j > 0 {
                    h += upper_h[j - 1].conj() * line[j - 1];
                } else if periodic {
                    h += upper_h[n - 1].conj() * line[n - 1];
                }
                rhs[j] = line[j] - z * h;
                diag[j] = 1.0 + z * diag_h[j];
                upper[j] = z * upper_h[j];
                lower[j] = if j > 0 { z * upper_h[j - 1].conj() } else { z * upper_h[n - 1].conj() };
            }
            let (corner_top, corner_bottom) = if periodic {
                (lower[0], upper[n - 1])
            } else {
                (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0))
            };
            let x = if periodic {
                solve_cyclic(&lower, &diag, &upper, corner_top, corner_bottom, &rhs)
            } else {
                solve_tridiagonal(&lower, &diag, &upper, &rhs)
            };
            let residual = cyclic_residual(&lower, &diag, &upper, corner_top, corner_bottom, &x, &rhs);
            if !(residual <= SOLVER_TOLERANCE) {
                return Err(Error::SolverResidual {
                    residual,
                    tolerance: SOLVER_TOLERANCE,
                });
            }
            for (j, v) in x.into_iter().enumerate() {
                psi[start + j * stride] = v;
            }
        }
        Ok(())
    }
}

/// Thomas algorithm. `lower[0]` and `upper[n-1]` are ignored.
fn solve_tridiagonal(
    lower: &[Complex64],
    diag: &[Complex64],
    upper: &[Complex64],
    rhs: &[Complex64],
) -> Vec<Complex64> {
    let n = diag.len();
    let mut c = vec![Complex64::new(0.0, 0.0); n];
    let mut d = vec![Complex64::new(0.0, 0.0); n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for j in 1..n {
        let m = diag[j] - lower[j] * c[j - 1];
        c[j] = if j + 1 < n { upper[j] / m } else { Complex64::new(0.0, 0.0) };
        d[j] = (rhs[j] - lower[j] * d[j - 1]) / m;
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    x[n - 1] = d[n - 1];
    for j in (0..n - 1).rev() {
        x[j] = d[j] - c[j] * x[j + 1];
    }
    x
}

/// Cyclic tridiagonal solve by Sherman-Morrison. `top` is `A[0][n-1]`,
/// `bottom` is `A[n-1][0]`.
fn solve_cyclic(
    lower: &[Complex64],
    diag: &[Complex64],
    upper: &[Complex64],
    top: Complex64,
    bottom: Complex64,
    rhs: &[Complex64],
) -> Vec<Complex64> {
    let n = diag.len();
    let gamma = -diag[0];
    let mut bb = diag.to_vec();
    bb[0] = diag[0] - gamma;
    bb[n - 1] = diag[n - 1] - bottom * top / gamma;
    let x = solve_tridiagonal(lower, &bb, upper, rhs);
    let mut u = vec![Complex64::new(0.0, 0.0); n];
    u[0] = gamma;
    u[n - 1] = bottom;
    let z = solve_tridiagonal(lower, &bb, upper, &u);
    let fact = (x[0] + top * x[n - 1] / gamma) / (1.0 + z[0] + top * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect()
}

fn cyclic_residual(
    lower: &[Complex64],
    diag: &[Complex64],
    upper: &[Complex64],
    top: Complex64,
    bottom: Complex64,
    x: &[Complex64],
    rhs: &[Complex64],
) -> f64 {
    let n = diag.len();
    let scale = rhs.iter().fold(0.0, |m: f64, z| m.max(z.norm())).max(f64::MIN_POSITIVE);
    let mut worst: f64 = 0.0;
    for j in 0..n {
        let mut ax = diag[j] * x[j];
        if j > 0 {
            ax += lower[j] * x[j - 1];
        }
        if j + 1 < n {
            ax += upper[j] * x[j + 1];
        }
        if j == 0 {
            ax += top * x[n - 1];
        }
        if j == n - 1 {
            ax += bottom * x[0];
        }
        let r = (ax - rhs[j]).norm();
        worst = worst.max(if r.is_finite() { r } else { f64::INFINITY });
    }
    worst / scale
}

/// One Crank-Nicolson step of the gauge-covariant Schrödinger equation.
pub fn schrodinger_step(
    psi: &ComplexField,
    gauge: Option<&GaugeInput>,
    potential: Option<&ScalarField>,
    params: &ModelParams,
    dt: f64,
) -> Result<ComplexField> {
    SchrodingerPropagator::new(psi.grid(), gauge, potential, params, dt)?.step(psi)
}

/// `Ψ = √ρ exp(iΦ/ħ)`, with the winding ramp of `Φ` measured from the grid
/// origin. The result is single-valued only when every loop increment of
/// `Φ` is a multiple of `2πħ`; otherwise the seam at the origin carries the
/// mismatch.
pub fn madelung_compose(rho: &ScalarField, phase: &PhaseRecord, params: &ModelParams) -> Result<ComplexField> {
    if rho.grid() != phase.grid() {
        return Err(Error::GridMismatch);
    }
    let hbar = params.hbar();
    if !(hbar > 0.0) {
        return Err(Error::InvalidParams("composing a wave function needs hbar > 0".into()));
    }
    if let Some((index, &value)) = rho.values().iter().enumerate().find(|(_, &v)| v < 0.0) {
        return Err(Error::NegativeDensity { index, value });
    }
    let values = (0..rho.grid().len())
        .map(|p| Complex64::from_polar(rho.values()[p].sqrt(), phase.value_at(p) / hbar))
        .collect();
    ComplexField::new(rho.grid().clone(), values)
}

fn principal_step(from: Complex64, to: Complex64) -> f64 {
    (to * from.conj()).arg()
}

/// `ρ = |Ψ|²` and the phase `ħ arg Ψ`, unwrapped from the grid origin.
///
/// The sweep runs along axis 0 through the origin, then along axis 1 from
/// each point of that column. Windings are read off the principal cycles
/// through the origin and removed from the base as uniform ramps.
pub fn madelung_decompose(psi: &ComplexField, params: &ModelParams) -> Result<(ScalarField, PhaseRecord)> {
    let grid = psi.grid();
    let hbar = params.hbar();
    if !(hbar > 0.0) {
        return Err(Error::InvalidParams("decomposing a wave function needs hbar > 0".into()));
    }
    let values = psi.values();
    let rho: Vec<f64> = values.iter().map(|z| z.norm_sqr()).collect();
    let floor = NODE_FLOOR * rho.iter().cloned().fold(0.0, f64::max);
    if let Some(index) = rho.iter().position(|&r| !(r >= floor && r > 0.0)) {
        return Err(Error::Node {
            index,
            density: rho[index],
        });
    }

    let dims = grid.dims();
    let mut unwrapped = vec![0.0; grid.len()];
    unwrapped[0] = values[0].arg();
    let n0 = grid.points_on(0);
    let s0 = grid.stride(0);
    for i in 1..n0 {
        let (p, q) = ((i - 1) * s0, i * s0);
        unwrapped[q] = unwrapped[p] + principal_step(values[p], values[q]);
    }
    if dims == 2 {
        let n1 = grid.points_on(1);
        for i in 0..n0 {
            for j in 1..n1 {
                let p = i * s0 + j - 1;
                unwrapped[p + 1] = unwrapped[p] + principal_step(values[p], values[p + 1]);
            }
        }
    }

    let mut windings = vec![0i64; dims];
    for (axis, w) in windings.iter_mut().enumerate() {
        if !grid.periodic(axis) {
            continue;
        }
        let stride = grid.stride(axis);
        let n = grid.points_on(axis);
        let total: f64 = (0..n)
            .map(|i| principal_step(values[i * stride], values[((i + 1) % n) * stride]))
            .sum();
        *w = (total / (2.0 * PI)).round() as i64;
    }
    let phase_probe = PhaseRecord::with_windings(ScalarField::zeros(grid), windings.clone(), hbar)?;
    let base: Vec<f64> = (0..grid.len())
        .map(|p| hbar * unwrapped[p] - phase_probe.value_at(p))
        .collect();
    let phase = PhaseRecord::with_windings(ScalarField::new(grid.clone(), base)?, windings, hbar)?;
    Ok((ScalarField::new(grid.clone(), rho)?, phase))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauge::AngleField;
    use crate::field::VectorField;

    fn params() -> ModelParams {
        ModelParams::single(1.0, 1.0, 0.01).unwrap()
    }

    fn ring() -> Grid {
        Grid::ring(64, 0.0, 2.0 * PI).unwrap()
    }

    #[test]
    fn tridiagonal_solvers_satisfy_system() {
        let n = 12;
        let lower: Vec<Complex64> = (0..n).map(|j| Complex64::new(-0.3, 0.1 * j as f64)).collect();
        let upper: Vec<Complex64> = (0..n).map(|j| Complex64::new(0.2, -0.05 * j as f64)).collect();
        let diag: Vec<Complex64> = (0..n).map(|j| Complex64::new(2.0, 1.0 + j as f64 * 0.1)).collect();
        let rhs: Vec<Complex64> = (0..n).map(|j| Complex64::new((j as f64).sin(), 1.0)).collect();
        let zero = Complex64::new(0.0, 0.0);
        let x = solve_tridiagonal(&lower, &diag, &upper, &rhs);
        assert!(cyclic_residual(&lower, &diag, &upper, zero, zero, &x, &rhs) < 1e-14);
        let (top, bottom) = (Complex64::new(0.4, 0.2), Complex64::new(-0.1, 0.3));
        let x = solve_cyclic(&lower, &diag, &upper, top, bottom, &rhs);
        assert!(cyclic_residual(&lower, &diag, &upper, top, bottom, &x, &rhs) < 1e-13);
    }

    #[test]
    fn zero_potential_reduces_to_plain_laplacian() {
        let grid = ring();
        let psi = ComplexField::from_fn(&grid, |x| Complex64::new(x[0].sin(), (2.0 * x[0]).cos())).unwrap();
        let cov = covariant_laplacian(&psi, Some(&GaugeInput::none(&grid)), &params(), 0).unwrap();
        let plain = covariant_laplacian(&psi, None, &params(), 0).unwrap();
        assert_eq!(cov, plain);
        let h = grid.spacing(0);
        let v = psi.values();
        for p in 0..64 {
            let expected = (v[(p + 1) % 64] - 2.0 * v[p] + v[(p + 63) % 64]) / (h * h);
            assert!((plain.values()[p] - expected).norm() < 1e-10);
        }
    }

    #[test]
    fn pure_gauge_wave_is_annihilated() {
        // κ A L = 2π · 3 makes e^{iκAx} single-valued on the ring.
        let grid = ring();
        let p = params().with_betas(vec![1.0]);
        let a = 3.0;
        let gauge = GaugeInput::new(
            vec![AngleField::zero(&grid)],
            VectorField::uniform(&grid, &[a]).unwrap(),
        )
        .unwrap();
        let psi = ComplexField::from_fn(&grid, |x| Complex64::from_polar(1.0, a * x[0])).unwrap();
        let lap = covariant_laplacian(&psi, Some(&gauge), &p, 0).unwrap();
        assert!(lap.values().iter().all(|z| z.norm() < 1e-10));
    }

    #[test]
    fn compose_decompose_round_trip() {
        let grid = ring();
        let rho = ScalarField::from_fn(&grid, |x| (1.0 + 0.5 * x[0].cos()) / (2.0 * PI)).unwrap();
        let base = ScalarField::from_fn(&grid, |x| 0.4 * (2.0 * x[0]).sin()).unwrap();
        let phase = PhaseRecord::with_windings(base, vec![-2], 1.0).unwrap();
        let psi = madelung_compose(&rho, &phase, &params()).unwrap();
        let (rho2, phase2) = madelung_decompose(&psi, &params()).unwrap();
        assert_eq!(phase2.windings(), &[-2]);
        let shift = phase2.base().values()[0] - phase.base().values()[0];
        assert!((shift / (2.0 * PI) - (shift / (2.0 * PI)).round()).abs() < 1e-12);
        for p in 0..grid.len() {
            assert!((rho2.values()[p] - rho.values()[p]).abs() < 1e-12);
            assert!((phase2.base().values()[p] - shift - phase.base().values()[p]).abs() < 1e-12);
        }
    }

    #[test]
    fn decompose_examples() {
        let grid = ring();
        let one = ComplexField::from_fn(&grid, |_| Complex64::new(1.0, 0.0)).unwrap();
        let (rho, phase) = madelung_decompose(&one, &params()).unwrap();
        assert!(rho.values().iter().all(|&r| r == 1.0));
        assert_eq!(phase.windings(), &[0]);
        assert!(phase.base().values().iter().all(|&b| b == 0.0));

        let two = ComplexField::from_fn(&grid, |x| Complex64::from_polar(1.0, 2.0 * x[0])).unwrap();
        assert_eq!(madelung_decompose(&two, &params()).unwrap().1.windings(), &[2]);

        let mut v = two.values().to_vec();
        v[17] = Complex64::new(0.0, 0.0);
        let noded = ComplexField::new(grid, v).unwrap();
        assert!(matches!(
            madelung_decompose(&noded, &params()),
            Err(Error::Node { index: 17, .. })
        ));
    }

    #[test]
    fn step_is_unitary_on_line_and_torus() {
        let line = Grid::line(64, -8.0, 8.0).unwrap();
        let psi = ComplexField::from_fn(&line, |x| Complex64::from_polar((-x[0] * x[0]).exp(), x[0])).unwrap();
        let out = schrodinger_step(&psi, None, None, &params(), 0.05).unwrap();
        assert!((out.norm_sqr() - psi.norm_sqr()).abs() < 1e-12);

        let torus = Grid::torus([16, 16], [0.0, 0.0], [2.0 * PI, 2.0 * PI]).unwrap();
        let psi = ComplexField::from_fn(&torus, |x| {
            Complex64::from_polar(1.0 + 0.3 * x[1].cos(), x[0] + 0.2 * x[1].sin())
        })
        .unwrap();
        let v = ScalarField::from_fn(&torus, |x| x[0].cos()).unwrap();
        let out = schrodinger_step(&psi, None, Some(&v), &params(), 0.05).unwrap();
        assert!((out.norm_sqr() - psi.norm_sqr()).abs() < 1e-11);
    }
}
