use std::f64::consts::PI;

use crate::calculus::diff_axis;
use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::Grid;

/// A possibly multi-valued phase `Φ` in action units.
///
/// The field is stored as a single-valued `base` plus, for every periodic
/// axis, an integer winding and the action carried by one unit of winding.
/// Going once around a periodic axis `a` increases `Φ` by
/// `2π · action_per_turn[a] · windings[a]`, spread uniformly along the axis.
///
/// Plain wave-function windings use `action_per_turn = ħ`. A phase inherited
/// from an angle field `φ` through the gauge constraint carries
/// `action_per_turn = η β_n`, which is not a multiple of `ħ` in general.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseRecord {
    base: ScalarField,
    windings: Vec<i64>,
    action_per_turn: Vec<f64>,
    hbar: f64,
}

impl PhaseRecord {
    pub fn new(
        base: ScalarField,
        windings: Vec<i64>,
        action_per_turn: Vec<f64>,
        hbar: f64,
    ) -> Result<Self> {
        let grid = base.grid();
        let dims = grid.dims();
        if windings.len() != dims || action_per_turn.len() != dims {
            return Err(Error::LengthMismatch {
                what: "phase windings",
                expected: dims,
                got: windings.len().min(action_per_turn.len()),
            });
        }
        for axis in 0..dims {
            if windings[axis] != 0 && !grid.periodic(axis) {
                return Err(Error::InvalidParams(format!(
                    "axis {axis} is open and cannot carry winding {}",
                    windings[axis]
                )));
            }
        }
        if !hbar.is_finite() || hbar < 0.0 || action_per_turn.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidParams("phase action scales must be finite".into()));
        }
        Ok(Self {
            base,
            windings,
            action_per_turn,
            hbar,
        })
    }

    /// Single-valued phase with no winding.
    pub fn single_valued(base: ScalarField, hbar: f64) -> Self {
        let dims = base.grid().dims();
        Self {
            base,
            windings: vec![0; dims],
            action_per_turn: vec![hbar; dims],
            hbar,
        }
    }

    pub fn zero(grid: &Grid, hbar: f64) -> Self {
        Self::single_valued(ScalarField::zeros(grid), hbar)
    }

    /// Wave-function style windings: one turn carries `2πħ` of phase.
    pub fn with_windings(base: ScalarField, windings: Vec<i64>, hbar: f64) -> Result<Self> {
        let dims = base.grid().dims();
        Self::new(base, windings, vec![hbar; dims], hbar)
    }

    pub fn grid(&self) -> &Grid {
        self.base.grid()
    }

    pub fn base(&self) -> &ScalarField {
        &self.base
    }

    pub fn windings(&self) -> &[i64] {
        &self.windings
    }

    pub fn action_per_turn(&self) -> &[f64] {
        &self.action_per_turn
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// Replaces the single-valued part, keeping the topology.
    pub fn with_base(&self, base: ScalarField) -> Result<Self> {
        if base.grid() != self.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            base,
            ..self.clone()
        })
    }

    /// Phase gained per unit length along `axis` from the winding.
    pub fn winding_slope(&self, axis: usize) -> f64 {
        let grid = self.grid();
        if !grid.periodic(axis) || self.windings[axis] == 0 {
            return 0.0;
        }
        2.0 * PI * self.action_per_turn[axis] * self.windings[axis] as f64 / grid.extent(axis)
    }

    /// Total change of `Φ` once around periodic axis `axis`.
    pub fn loop_increment(&self, axis: usize) -> f64 {
        2.0 * PI * self.action_per_turn[axis] * self.windings[axis] as f64
    }

    /// `loop_increment / (2πħ)`; an integer exactly when `e^{iΦ/ħ}` closes.
    pub fn turns_in_hbar(&self, axis: usize) -> f64 {
        self.action_per_turn[axis] * self.windings[axis] as f64 / self.hbar
    }

    pub fn is_single_valued(&self, tolerance: f64) -> bool {
        (0..self.windings.len()).all(|a| {
            let t = self.turns_in_hbar(a);
            (t - t.round()).abs() <= tolerance
        })
    }

    /// Continuous value of the phase at grid point `p`, with the winding
    /// ramp measured from the grid origin.
    pub fn value_at(&self, p: usize) -> f64 {
        let grid = self.grid();
        let mut v = self.base.values()[p];
        for axis in 0..grid.dims() {
            let s = self.winding_slope(axis);
            if s != 0.0 {
                v += s * grid.index_along(p, axis) as f64 * grid.spacing(axis);
            }
        }
        v
    }

    /// Gradient of the multi-valued phase: discrete gradient of the base
    /// plus the uniform winding slope on periodic axes.
    pub fn gradient(&self) -> VectorField {
        let grid = self.grid();
        let dims = grid.dims();
        let mut values = vec![0.0; grid.len() * dims];
        for axis in 0..dims {
            let slope = self.winding_slope(axis);
            let d = diff_axis(grid, self.base.values(), axis);
            for (p, dp) in d.into_iter().enumerate() {
                values[p * dims + axis] = dp + slope;
            }
        }
        VectorField::new(grid.clone(), values).expect("gradient of finite phase is finite")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn winding_gradient_is_uniform() {
        let grid = Grid::ring(32, 0.0, 4.0).unwrap();
        let phase = PhaseRecord::with_windings(ScalarField::zeros(&grid), vec![3], 0.5).unwrap();
        let g = phase.gradient();
        let expected = 2.0 * PI * 0.5 * 3.0 / 4.0;
        assert!(g.values().iter().all(|&v| (v - expected).abs() < 1e-14));
        assert!((phase.loop_increment(0) - 3.0 * PI).abs() < 1e-14);
        assert!(phase.is_single_valued(1e-12));
    }

    #[test]
    fn open_axes_cannot_wind() {
        let grid = Grid::line(16, 0.0, 1.0).unwrap();
        assert!(PhaseRecord::with_windings(ScalarField::zeros(&grid), vec![1], 1.0).is_err());
    }

    #[test]
    fn fractional_action_is_multivalued() {
        let grid = Grid::ring(16, 0.0, 1.0).unwrap();
        let phase =
            PhaseRecord::new(ScalarField::zeros(&grid), vec![1], vec![0.5], 1.0).unwrap();
        assert!((phase.turns_in_hbar(0) - 0.5).abs() < 1e-15);
        assert!(!phase.is_single_valued(1e-9));
    }
}
