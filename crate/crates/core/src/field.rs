use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Grid;

fn check_finite(what: &'static str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { what, index }),
        None => Ok(()),
    }
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::LengthMismatch {
            what,
            expected,
            got,
        });
    }
    Ok(())
}

/// Real value per grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        check_len("scalar field", grid.len(), values.len())?;
        check_finite("scalar field", &values)?;
        Ok(Self { grid, values })
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        Self {
            values: vec![value; grid.len()],
            grid: grid.clone(),
        }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Samples `f` at every grid point's coordinates.
    pub fn from_fn(grid: &Grid, mut f: impl FnMut(&[f64]) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|p| f(&grid.coords(p))).collect();
        Self::new(grid.clone(), values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::new(self.grid.clone(), values)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Divides by the Riemann-sum integral so the field integrates to one.
    pub fn normalized(&self) -> Result<Self> {
        let total: f64 = self.values.iter().sum::<f64>() * self.grid.cell_volume();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::Unnormalized {
                total,
                tolerance: 0.0,
            });
        }
        self.map(|v| v / total)
    }
}

/// One real component per axis at each grid point, stored point-major.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: Grid,
    values: Vec<f64>,
}

impl VectorField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        check_len("vector field", grid.len() * grid.dims(), values.len())?;
        check_finite("vector field", &values)?;
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self {
            values: vec![0.0; grid.len() * grid.dims()],
            grid: grid.clone(),
        }
    }

    /// Same vector at every point.
    pub fn uniform(grid: &Grid, components: &[f64]) -> Result<Self> {
        check_len("uniform vector", grid.dims(), components.len())?;
        let values = (0..grid.len()).flat_map(|_| components.iter().cloned()).collect();
        Self::new(grid.clone(), values)
    }

    pub fn from_fn(grid: &Grid, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Result<Self> {
        let dims = grid.dims();
        let mut values = Vec::with_capacity(grid.len() * dims);
        for p in 0..grid.len() {
            let v = f(&grid.coords(p));
            check_len("vector sample", dims, v.len())?;
            values.extend(v);
        }
        Self::new(grid.clone(), values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, point: usize) -> &[f64] {
        let d = self.grid.dims();
        &self.values[point * d..(point + 1) * d]
    }

    pub fn component(&self, point: usize, axis: usize) -> f64 {
        self.values[point * self.grid.dims() + axis]
    }

    /// Copies out one axis as a scalar field.
    pub fn axis(&self, axis: usize) -> ScalarField {
        let d = self.grid.dims();
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().skip(axis).step_by(d).cloned().collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Complex value per grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    grid: Grid,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        check_len("complex field", grid.len(), values.len())?;
        if let Some(index) = values
            .iter()
            .position(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(Error::NonFinite {
                what: "complex field",
                index,
            });
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: &Grid, mut f: impl FnMut(&[f64]) -> Complex64) -> Result<Self> {
        let values = (0..grid.len()).map(|p| f(&grid.coords(p))).collect();
        Self::new(grid.clone(), values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// `∫|ψ|² dx` as a Riemann sum.
    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn density(&self) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|z| z.norm_sqr()).collect(),
        }
    }

    pub fn scale(&self, a: Complex64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|z| z * a).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &ComplexField) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_and_wrong_length() {
        let g = Grid::ring(8, 0.0, 1.0).unwrap();
        let mut v = vec![0.0; 8];
        v[3] = f64::NAN;
        assert!(matches!(
            ScalarField::new(g.clone(), v),
            Err(Error::NonFinite { index: 3, .. })
        ));
        assert!(ScalarField::new(g.clone(), vec![0.0; 7]).is_err());
        assert!(VectorField::new(g, vec![0.0; 9]).is_err());
    }

    #[test]
    fn vector_axis_extracts_component() {
        let g = Grid::torus([8, 8], [0.0, 0.0], [1.0, 1.0]).unwrap();
        let v = VectorField::uniform(&g, &[1.0, -2.0]).unwrap();
        assert!(v.axis(1).values().iter().all(|&c| c == -2.0));
        assert_eq!(v.component(5, 0), 1.0);
    }

    #[test]
    fn complex_norm_is_riemann_sum() {
        let g = Grid::ring(16, 0.0, 2.0).unwrap();
        let psi = ComplexField::from_fn(&g, |_| Complex64::new(0.6, 0.8)).unwrap();
        assert!((psi.norm_sqr() - 2.0).abs() < 1e-14);
    }
}
