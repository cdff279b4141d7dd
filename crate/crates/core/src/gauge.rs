//! Angle fields, the connection `A`, and local gauge transformations.
//!
//! The connection is stored twice: as point samples `A_a(x)`, used by the
//! hydrodynamic equations through `∂φ − A`, and as link integrals
//! `∫_x^{x+h e_a} A dl`, used by the lattice covariant derivative. A gauge
//! transformation updates the samples with the discrete gradient of `χ` and
//! the links with the exact difference `χ(x + h e_a) − χ(x)`, which keeps
//! both representations exactly covariant.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::calculus::diff_axis;
use crate::error::{Error, Result};
use crate::field::{ComplexField, ScalarField, VectorField};
use crate::grid::Grid;
use crate::params::ModelParams;
use crate::phase::PhaseRecord;

/// An angle-valued field: single-valued base plus integer windings.
#[derive(Clone, Debug, PartialEq)]
pub struct AngleField {
    base: ScalarField,
    windings: Vec<i64>,
}

impl AngleField {
    pub fn new(base: ScalarField, windings: Vec<i64>) -> Result<Self> {
        let grid = base.grid();
        if windings.len() != grid.dims() {
            return Err(Error::LengthMismatch {
                what: "angle windings",
                expected: grid.dims(),
                got: windings.len(),
            });
        }
        if (0..grid.dims()).any(|a| windings[a] != 0 && !grid.periodic(a)) {
            return Err(Error::InvalidParams("open axes cannot carry angle winding".into()));
        }
        Ok(Self { base, windings })
    }

    pub fn zero(grid: &Grid) -> Self {
        Self {
            base: ScalarField::zeros(grid),
            windings: vec![0; grid.dims()],
        }
    }

    /// `φ = 2π ν x / L` along each periodic axis.
    pub fn winding(grid: &Grid, windings: Vec<i64>) -> Result<Self> {
        Self::new(ScalarField::zeros(grid), windings)
    }

    pub fn base(&self) -> &ScalarField {
        &self.base
    }

    pub fn windings(&self) -> &[i64] {
        &self.windings
    }

    pub fn slope(&self, axis: usize) -> f64 {
        let grid = self.base.grid();
        if grid.periodic(axis) {
            2.0 * PI * self.windings[axis] as f64 / grid.extent(axis)
        } else {
            0.0
        }
    }

    pub fn gradient(&self) -> VectorField {
        let grid = self.base.grid();
        let dims = grid.dims();
        let mut values = vec![0.0; grid.len() * dims];
        for axis in 0..dims {
            let s = self.slope(axis);
            for (p, d) in diff_axis(grid, self.base.values(), axis).into_iter().enumerate() {
                values[p * dims + axis] = d + s;
            }
        }
        VectorField::new(grid.clone(), values).expect("finite angle gradient")
    }

    /// The angle at a grid point, continued from the origin.
    pub fn value_at(&self, p: usize) -> f64 {
        let grid = self.base.grid();
        let mut v = self.base.values()[p];
        for axis in 0..grid.dims() {
            v += self.slope(axis) * grid.index_along(p, axis) as f64 * grid.spacing(axis);
        }
        v
    }

    fn shifted(&self, chi: &ScalarField) -> Result<Self> {
        Ok(Self {
            base: self.base.zip_with(chi, |a, b| a + b)?,
            windings: self.windings.clone(),
        })
    }
}

/// Gauge potentials seen by the particles: one angle field per particle
/// (lifted onto configuration space) and the connection per axis.
#[derive(Clone, Debug, PartialEq)]
pub struct GaugeInput {
    phi: Vec<AngleField>,
    a: VectorField,
    links: Vec<f64>,
}

impl GaugeInput {
    pub fn new(phi: Vec<AngleField>, a: VectorField) -> Result<Self> {
        let links = trapezoid_links(&a);
        Self::with_links(phi, a, links)
    }

    /// Uses caller-supplied link integrals instead of the trapezoid rule.
    pub fn with_links(phi: Vec<AngleField>, a: VectorField, links: Vec<f64>) -> Result<Self> {
        let grid = a.grid();
        if phi.len() != grid.particle_count() {
            return Err(Error::LengthMismatch {
                what: "angle fields",
                expected: grid.particle_count(),
                got: phi.len(),
            });
        }
        if phi.iter().any(|f| f.base.grid() != grid) {
            return Err(Error::GridMismatch);
        }
        if links.len() != grid.len() * grid.dims() {
            return Err(Error::LengthMismatch {
                what: "links",
                expected: grid.len() * grid.dims(),
                got: links.len(),
            });
        }
        if let Some(index) = links.iter().position(|l| !l.is_finite()) {
            return Err(Error::NonFinite { what: "links", index });
        }
        Ok(Self { phi, a, links })
    }

    pub fn none(grid: &Grid) -> Self {
        Self {
            phi: (0..grid.particle_count()).map(|_| AngleField::zero(grid)).collect(),
            a: VectorField::zeros(grid),
            links: vec![0.0; grid.len() * grid.dims()],
        }
    }

    /// Constant connection, zero angle field.
    pub fn constant_potential(grid: &Grid, a: &[f64]) -> Result<Self> {
        let phi = (0..grid.particle_count()).map(|_| AngleField::zero(grid)).collect();
        Self::new(phi, VectorField::uniform(grid, a)?)
    }

    pub fn grid(&self) -> &Grid {
        self.a.grid()
    }

    pub fn phi(&self) -> &[AngleField] {
        &self.phi
    }

    pub fn potential(&self) -> &VectorField {
        &self.a
    }

    /// `∫ A dl` from point `p` to its neighbour along `axis`.
    pub fn link(&self, p: usize, axis: usize) -> f64 {
        self.links[p * self.grid().dims() + axis]
    }

    pub fn links(&self) -> &[f64] {
        &self.links
    }

    /// `∂_a φ_n − A_a` for the particle `n` owning each axis.
    pub fn corrected_derivative(&self) -> VectorField {
        let grid = self.grid();
        let dims = grid.dims();
        let grads: Vec<VectorField> = self.phi.iter().map(|f| f.gradient()).collect();
        let mut values = vec![0.0; grid.len() * dims];
        for p in 0..grid.len() {
            for axis in 0..dims {
                let n = grid.particle_of_axis(axis);
                values[p * dims + axis] = grads[n].component(p, axis) - self.a.component(p, axis);
            }
        }
        VectorField::new(grid.clone(), values).expect("finite gauge fields")
    }

    /// Configuration-space connection `Ā_A = η β_n A_a(x_n)`, point-major.
    pub fn bar_a(&self, params: &ModelParams) -> Vec<f64> {
        let grid = self.grid();
        let dims = grid.dims();
        let mut out = self.a.values().to_vec();
        for (i, v) in out.iter_mut().enumerate() {
            *v *= params.eta * params.beta_of_axis(grid, i % dims);
        }
        out
    }

    /// `φ̄ = Σ_n β_n φ_n` at a grid point, continued from the origin.
    pub fn phi_bar_at(&self, params: &ModelParams, p: usize) -> f64 {
        self.phi
            .iter()
            .enumerate()
            .map(|(n, f)| params.beta(n) * f.value_at(p))
            .sum()
    }
}

fn trapezoid_links(a: &VectorField) -> Vec<f64> {
    let grid = a.grid();
    let dims = grid.dims();
    let mut links = vec![0.0; grid.len() * dims];
    for p in 0..grid.len() {
        for axis in 0..dims {
            let here = a.component(p, axis);
            let h = grid.spacing(axis);
            links[p * dims + axis] = match grid.neighbor(p, axis, 1) {
                Some(q) => 0.5 * h * (here + a.component(q, axis)),
                None => h * here,
            };
        }
    }
    links
}

/// Fields after a local gauge transformation.
#[derive(Clone, Debug)]
pub struct GaugeTransformed {
    pub gauge: GaugeInput,
    pub phase: Option<PhaseRecord>,
    pub psi: Option<ComplexField>,
}

/// Applies `φ_n → φ_n + χ_n`, `A → A + ∂χ`, `Φ → Φ + η Σ β_n χ_n` and
/// `Ψ → Ψ exp(i η Σ β_n χ_n / ħ)`.
///
/// `chi` holds one field per particle, lifted onto configuration space; for
/// the one-particle-per-axis layout `chi[n]` must depend on `x_n` only.
pub fn gauge_transform(
    gauge: &GaugeInput,
    chi: &[ScalarField],
    phase: Option<&PhaseRecord>,
    psi: Option<&ComplexField>,
    params: &ModelParams,
) -> Result<GaugeTransformed> {
    let grid = gauge.grid();
    if chi.len() != grid.particle_count() {
        return Err(Error::LengthMismatch {
            what: "gauge functions",
            expected: grid.particle_count(),
            got: chi.len(),
        });
    }
    if chi.iter().any(|c| c.grid() != grid) {
        return Err(Error::GridMismatch);
    }
    params.check_grid(grid)?;

    let dims = grid.dims();
    let phi = gauge
        .phi
        .iter()
        .zip(chi)
        .map(|(f, c)| f.shifted(c))
        .collect::<Result<Vec<_>>>()?;

    let mut a = gauge.a.values().to_vec();
    let mut links = gauge.links.clone();
    for axis in 0..dims {
        let c = &chi[grid.particle_of_axis(axis)];
        let dchi = diff_axis(grid, c.values(), axis);
        for p in 0..grid.len() {
            a[p * dims + axis] += dchi[p];
            let next = match grid.neighbor(p, axis, 1) {
                Some(q) => c.values()[q],
                // Links leaving an open boundary are never used by the
                // stencils; keep them consistent with a frozen χ.
                None => c.values()[p],
            };
            links[p * dims + axis] += next - c.values()[p];
        }
    }
    let gauge_out = GaugeInput::with_links(phi, VectorField::new(grid.clone(), a)?, links)?;

    let shift: Vec<f64> = (0..grid.len())
        .map(|p| {
            chi.iter()
                .enumerate()
                .map(|(n, c)| params.eta * params.beta(n) * c.values()[p])
                .sum()
        })
        .collect();

    let phase_out = phase
        .map(|ph| {
            if ph.grid() != grid {
                return Err(Error::GridMismatch);
            }
            let base = ph
                .base()
                .values()
                .iter()
                .zip(&shift)
                .map(|(b, s)| b + s)
                .collect();
            ph.with_base(ScalarField::new(grid.clone(), base)?)
        })
        .transpose()?;

    let psi_out = psi
        .map(|w| {
            if w.grid() != grid {
                return Err(Error::GridMismatch);
            }
            let hbar = params.hbar();
            if hbar == 0.0 {
                return Err(Error::InvalidParams(
                    "wave-function gauge transform needs hbar > 0".into(),
                ));
            }
            let values = w
                .values()
                .iter()
                .zip(&shift)
                .map(|(z, s)| z * Complex64::from_polar(1.0, s / hbar))
                .collect();
            ComplexField::new(grid.clone(), values)
        })
        .transpose()?;

    Ok(GaugeTransformed {
        gauge: gauge_out,
        phase: phase_out,
        psi: psi_out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams {
        ModelParams::single(1.0, 1.0, 0.01).unwrap().with_betas(vec![0.7])
    }

    fn smooth_chi(grid: &Grid) -> ScalarField {
        let l = grid.extent(0);
        ScalarField::from_fn(grid, |x| {
            0.4 * (2.0 * PI * x[0] / l).sin() + 0.1 * (6.0 * PI * x[0] / l).cos()
        })
        .unwrap()
    }

    #[test]
    fn zero_chi_is_identity() {
        let grid = Grid::ring(32, 0.0, 2.0).unwrap();
        let g = GaugeInput::new(
            vec![AngleField::winding(&grid, vec![1]).unwrap()],
            VectorField::uniform(&grid, &[0.3]).unwrap(),
        )
        .unwrap();
        let phase = PhaseRecord::zero(&grid, 1.0);
        let psi = ComplexField::from_fn(&grid, |x| Complex64::new(x[0].cos(), 1.0)).unwrap();
        let t = gauge_transform(
            &g,
            &[ScalarField::zeros(&grid)],
            Some(&phase),
            Some(&psi),
            &params(),
        )
        .unwrap();
        assert_eq!(t.gauge, g);
        assert_eq!(t.phase.unwrap(), phase);
        assert_eq!(t.psi.unwrap(), psi);
    }

    #[test]
    fn corrected_derivative_is_invariant() {
        let grid = Grid::ring(64, 0.0, 3.0).unwrap();
        let a = VectorField::from_fn(&grid, |x| vec![0.2 + 0.1 * x[0].sin()]).unwrap();
        let g = GaugeInput::new(vec![AngleField::winding(&grid, vec![2]).unwrap()], a).unwrap();
        let t = gauge_transform(&g, &[smooth_chi(&grid)], None, None, &params()).unwrap();
        let before = g.corrected_derivative();
        let after = t.gauge.corrected_derivative();
        for (x, y) in before.values().iter().zip(after.values()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn links_shift_by_exact_differences() {
        let grid = Grid::ring(16, 0.0, 1.0).unwrap();
        let g = GaugeInput::none(&grid);
        let chi = smooth_chi(&grid);
        let t = gauge_transform(&g, std::slice::from_ref(&chi), None, None, &params()).unwrap();
        for p in 0..16 {
            let q = (p + 1) % 16;
            let expected = chi.values()[q] - chi.values()[p];
            assert!((t.gauge.link(p, 0) - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn chi_count_must_match_particles() {
        let grid = Grid::ring(16, 0.0, 1.0).unwrap();
        let g = GaugeInput::none(&grid);
        assert!(gauge_transform(&g, &[], None, None, &params()).is_err());
    }
}
