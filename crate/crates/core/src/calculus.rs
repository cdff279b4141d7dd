//! Discrete differential operators on uniform grids.
//!
//! Interior points use second-order central differences. Periodic axes wrap;
//! open axes fall back to second-order one-sided stencils at the two ends.

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::Grid;

/// Derivative of `values` along `axis` at every grid point.
pub(crate) fn diff_axis(grid: &Grid, values: &[f64], axis: usize) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    diff_axis_into(grid, values, axis, &mut out);
    out
}

pub(crate) fn diff_axis_into(grid: &Grid, values: &[f64], axis: usize, out: &mut [f64]) {
    let n = grid.points_on(axis);
    let stride = grid.stride(axis);
    let inv2h = 0.5 / grid.spacing(axis);
    let periodic = grid.periodic(axis);
    for (p, o) in out.iter_mut().enumerate() {
        let i = (p / stride) % n;
        let base = p - i * stride;
        let at = |j: usize| values[base + j * stride];
        *o = if i > 0 && i + 1 < n {
            (at(i + 1) - at(i - 1)) * inv2h
        } else if periodic {
            let next = (i + 1) % n;
            let prev = (i + n - 1) % n;
            (at(next) - at(prev)) * inv2h
        } else if i == 0 {
            (-3.0 * at(0) + 4.0 * at(1) - at(2)) * inv2h
        } else {
            (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) * inv2h
        };
    }
}

fn ensure_finite(what: &'static str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { what, index }),
        None => Ok(()),
    }
}

pub fn gradient(f: &ScalarField) -> Result<VectorField> {
    ensure_finite("gradient input", f.values())?;
    let grid = f.grid();
    let dims = grid.dims();
    let mut values = vec![0.0; grid.len() * dims];
    for axis in 0..dims {
        let d = diff_axis(grid, f.values(), axis);
        for (p, dp) in d.into_iter().enumerate() {
            values[p * dims + axis] = dp;
        }
    }
    VectorField::new(grid.clone(), values)
}

pub fn divergence(v: &VectorField) -> Result<ScalarField> {
    ensure_finite("divergence input", v.values())?;
    let grid = v.grid();
    let mut total = vec![0.0; grid.len()];
    for axis in 0..grid.dims() {
        let comp = v.axis(axis);
        let d = diff_axis(grid, comp.values(), axis);
        for (t, dp) in total.iter_mut().zip(d) {
            *t += dp;
        }
    }
    ScalarField::new(grid.clone(), total)
}

/// Riemann sum times the cell volume.
pub fn integrate(f: &ScalarField) -> Result<f64> {
    ensure_finite("integrand", f.values())?;
    Ok(f.values().iter().sum::<f64>() * f.grid().cell_volume())
}

pub(crate) fn integrate_raw(grid: &Grid, values: &[f64]) -> f64 {
    values.iter().sum::<f64>() * grid.cell_volume()
}

/// Corner indices and weights for multilinear interpolation at `x`.
///
/// `x` must already be wrapped into the grid domain.
pub(crate) fn stencil(grid: &Grid, x: &[f64]) -> Vec<(usize, f64)> {
    let dims = grid.dims();
    let mut lower = Vec::with_capacity(dims);
    let mut upper = Vec::with_capacity(dims);
    let mut frac = Vec::with_capacity(dims);
    for (a, &xa) in x.iter().enumerate().take(dims) {
        let n = grid.points_on(a);
        let s = (xa - grid.origin(a)) / grid.spacing(a);
        let (i0, t) = if grid.periodic(a) {
            let fl = s.floor();
            let i0 = (fl as isize).rem_euclid(n as isize) as usize;
            (i0, s - fl)
        } else {
            let i0 = (s.floor().max(0.0) as usize).min(n - 2);
            (i0, (s - i0 as f64).clamp(0.0, 1.0))
        };
        lower.push(i0);
        upper.push(if grid.periodic(a) { (i0 + 1) % n } else { i0 + 1 });
        frac.push(t);
    }
    let mut out = Vec::with_capacity(1 << dims);
    let mut idx = vec![0usize; dims];
    for corner in 0..(1usize << dims) {
        let mut w = 1.0;
        for a in 0..dims {
            if corner >> a & 1 == 1 {
                idx[a] = upper[a];
                w *= frac[a];
            } else {
                idx[a] = lower[a];
                w *= 1.0 - frac[a];
            }
        }
        out.push((grid.flat_index(&idx), w));
    }
    out
}

/// Multilinear interpolation of a scalar field at an off-grid position.
pub fn interpolate(f: &ScalarField, x: &[f64]) -> Result<f64> {
    let x = f.grid().wrap_position(x)?;
    Ok(stencil(f.grid(), &x)
        .into_iter()
        .map(|(p, w)| w * f.values()[p])
        .sum())
}

/// Multilinear interpolation of every component of a vector field.
pub fn interpolate_vector(v: &VectorField, x: &[f64]) -> Result<Vec<f64>> {
    let grid = v.grid();
    let x = grid.wrap_position(x)?;
    let mut out = vec![0.0; grid.dims()];
    for (p, w) in stencil(grid, &x) {
        for (o, c) in out.iter_mut().zip(v.at(p)) {
            *o += w * c;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ring(n: usize, l: f64) -> Grid {
        Grid::ring(n, 0.0, l).unwrap()
    }

    #[test]
    fn gradient_of_constant_is_exactly_zero() {
        for grid in [
            ring(32, 3.0),
            Grid::line(20, -1.0, 2.0).unwrap(),
            Grid::plane([9, 11], [0.0, 0.0], [1.0, 2.0]).unwrap(),
        ] {
            let f = ScalarField::constant(&grid, 2.75);
            assert!(gradient(&f).unwrap().values().iter().all(|&g| g == 0.0));
        }
    }

    #[test]
    fn linear_field_is_exact_including_boundaries() {
        let grid = Grid::line(33, -2.0, 2.0).unwrap();
        let f = ScalarField::from_fn(&grid, |x| 3.0 * x[0]).unwrap();
        let g = gradient(&f).unwrap();
        for p in 0..grid.len() {
            assert!((g.component(p, 0) - 3.0).abs() < 1e-12);
        }
        let v = VectorField::from_fn(&grid, |x| vec![x[0]]).unwrap();
        let d = divergence(&v).unwrap();
        assert!(d.values().iter().all(|&x| (x - 1.0).abs() < 1e-12));
    }

    fn sin_errors(n: usize) -> (f64, f64) {
        let l = 2.5;
        let k = 2.0 * PI / l;
        let grid = ring(n, l);
        let f = ScalarField::from_fn(&grid, |x| (k * x[0]).sin()).unwrap();
        let g = gradient(&f).unwrap();
        let lap = divergence(&g).unwrap();
        let mut eg: f64 = 0.0;
        let mut el: f64 = 0.0;
        for p in 0..grid.len() {
            let x = grid.coords(p)[0];
            eg = eg.max((g.component(p, 0) - k * (k * x).cos()).abs());
            el = el.max((lap.values()[p] + k * k * (k * x).sin()).abs());
        }
        (eg, el)
    }

    #[test]
    fn sine_on_ring_converges_at_second_order() {
        let (g1, l1) = sin_errors(32);
        let (g2, l2) = sin_errors(64);
        assert!(g1 < 0.1 && l1 < 0.5, "{g1} {l1}");
        assert!(g1 / g2 >= 3.5, "gradient ratio {}", g1 / g2);
        assert!(l1 / l2 >= 3.5, "laplacian ratio {}", l1 / l2);
    }

    #[test]
    fn integrate_constant_and_zero() {
        let grid = ring(40, 7.0);
        let one = ScalarField::constant(&grid, 1.0);
        assert!((integrate(&one).unwrap() - 7.0).abs() < 1e-12);
        assert_eq!(integrate(&ScalarField::zeros(&grid)).unwrap(), 0.0);
    }

    #[test]
    fn normal_density_integrates_to_one() {
        let grid = Grid::line(801, -10.0, 10.0).unwrap();
        let f = ScalarField::from_fn(&grid, |x| {
            (-0.5 * x[0] * x[0]).exp() / (2.0 * PI).sqrt()
        })
        .unwrap();
        assert!((integrate(&f).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn periodic_divergence_sums_to_zero() {
        let grid = Grid::torus([16, 12], [0.0, 0.0], [1.0, 2.0]).unwrap();
        let v = VectorField::from_fn(&grid, |x| {
            vec![(3.0 * x[0] + x[1]).sin() * 5.0, (x[0] * x[1]).cos()]
        })
        .unwrap();
        let d = divergence(&v).unwrap();
        assert!(integrate(&d).unwrap().abs() < 1e-12 * 5.0);
    }

    #[test]
    fn gradient_rejects_non_finite() {
        // Fields reject non-finite values on construction, so the check in
        // `gradient` is reached only through internal callers.
        assert!(ensure_finite("x", &[1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn interpolation_is_exact_for_linear_fields() {
        let grid = Grid::plane([9, 9], [0.0, 0.0], [2.0, 2.0]).unwrap();
        let f = ScalarField::from_fn(&grid, |x| 1.0 + 2.0 * x[0] - x[1]).unwrap();
        let v = interpolate(&f, &[0.33, 1.71]).unwrap();
        assert!((v - (1.0 + 0.66 - 1.71)).abs() < 1e-12);
        assert!(interpolate(&f, &[2.5, 0.0]).is_err());
    }

    #[test]
    fn interpolation_wraps_on_ring() {
        let grid = ring(10, 1.0);
        let f = ScalarField::from_fn(&grid, |x| x[0]).unwrap();
        // Between the last point (0.9) and the wrapped first point (0.0).
        let v = interpolate(&f, &[0.95]).unwrap();
        assert!((v - 0.45).abs() < 1e-12);
        let v2 = interpolate(&f, &[1.95]).unwrap();
        assert!((v - v2).abs() < 1e-12);
    }
}
