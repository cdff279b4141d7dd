use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest number of points allowed along any axis.
pub const MIN_POINTS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Line,
    Ring,
    Plane,
    Torus,
}

impl Topology {
    pub fn dims(self) -> usize {
        match self {
            Topology::Line | Topology::Ring => 1,
            Topology::Plane | Topology::Torus => 2,
        }
    }

    pub fn periodic(self) -> bool {
        matches!(self, Topology::Ring | Topology::Torus)
    }
}

/// How configuration-space axes map onto particles.
///
/// `Single` is one particle moving in one or two dimensions. `OnePerAxis`
/// is one particle per axis, each moving on a line or ring, so a 2D grid
/// holds two particles in 1D.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParticleLayout {
    #[default]
    Single,
    OnePerAxis,
}

/// A uniform grid over configuration space.
///
/// Points sit at `origin + i * spacing` for `i in 0..points`. On periodic
/// axes the period is `points * spacing`; on open axes the grid spans
/// `(points - 1) * spacing`. Flat indices are row-major: the last axis
/// varies fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    topology: Topology,
    points: Vec<usize>,
    spacing: Vec<f64>,
    origin: Vec<f64>,
    #[serde(default)]
    layout: ParticleLayout,
}

impl Grid {
    pub fn new(
        topology: Topology,
        points: Vec<usize>,
        origin: Vec<f64>,
        spacing: Vec<f64>,
        layout: ParticleLayout,
    ) -> Result<Self> {
        let dims = topology.dims();
        if points.len() != dims || origin.len() != dims || spacing.len() != dims {
            return Err(Error::InvalidGrid(format!(
                "{topology:?} needs {dims} axes, got points={} origin={} spacing={}",
                points.len(),
                origin.len(),
                spacing.len()
            )));
        }
        for axis in 0..dims {
            if points[axis] < MIN_POINTS {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis} has {} points, need at least {MIN_POINTS}",
                    points[axis]
                )));
            }
            if !(spacing[axis].is_finite() && spacing[axis] > 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis} spacing {} must be positive",
                    spacing[axis]
                )));
            }
            if !origin[axis].is_finite() {
                return Err(Error::InvalidGrid(format!("axis {axis} origin is not finite")));
            }
        }
        Ok(Self {
            topology,
            points,
            spacing,
            origin,
            layout,
        })
    }

    /// Open interval `[lo, hi]` sampled at `n` points including both ends.
    pub fn line(n: usize, lo: f64, hi: f64) -> Result<Self> {
        if n < 2 || !(hi > lo) {
            return Err(Error::InvalidGrid(format!("line [{lo}, {hi}] with {n} points")));
        }
        let h = (hi - lo) / (n - 1) as f64;
        Self::new(Topology::Line, vec![n], vec![lo], vec![h], ParticleLayout::Single)
    }

    /// Ring of the given circumference starting at `origin`.
    pub fn ring(n: usize, origin: f64, circumference: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGrid("ring with zero points".into()));
        }
        let h = circumference / n as f64;
        Self::new(Topology::Ring, vec![n], vec![origin], vec![h], ParticleLayout::Single)
    }

    pub fn plane(n: [usize; 2], lo: [f64; 2], hi: [f64; 2]) -> Result<Self> {
        let mut spacing = Vec::with_capacity(2);
        for axis in 0..2 {
            if n[axis] < 2 || !(hi[axis] > lo[axis]) {
                return Err(Error::InvalidGrid(format!("plane axis {axis} is degenerate")));
            }
            spacing.push((hi[axis] - lo[axis]) / (n[axis] - 1) as f64);
        }
        Self::new(
            Topology::Plane,
            n.to_vec(),
            lo.to_vec(),
            spacing,
            ParticleLayout::Single,
        )
    }

    pub fn torus(n: [usize; 2], origin: [f64; 2], period: [f64; 2]) -> Result<Self> {
        if n[0] == 0 || n[1] == 0 {
            return Err(Error::InvalidGrid("torus with zero points".into()));
        }
        let spacing = vec![period[0] / n[0] as f64, period[1] / n[1] as f64];
        Self::new(
            Topology::Torus,
            n.to_vec(),
            origin.to_vec(),
            spacing,
            ParticleLayout::Single,
        )
    }

    pub fn with_layout(mut self, layout: ParticleLayout) -> Self {
        self.layout = layout;
        self
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn layout(&self) -> ParticleLayout {
        self.layout
    }

    pub fn dims(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn points_on(&self, axis: usize) -> usize {
        self.points[axis]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.spacing[axis]
    }

    pub fn spacings(&self) -> &[f64] {
        &self.spacing
    }

    pub fn origin(&self, axis: usize) -> f64 {
        self.origin[axis]
    }

    pub fn origins(&self) -> &[f64] {
        &self.origin
    }

    pub fn periodic(&self, _axis: usize) -> bool {
        self.topology.periodic()
    }

    /// Period on periodic axes, span between first and last point otherwise.
    pub fn extent(&self, axis: usize) -> f64 {
        let n = self.points[axis] as f64;
        if self.periodic(axis) {
            n * self.spacing[axis]
        } else {
            (n - 1.0) * self.spacing[axis]
        }
    }

    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn particle_count(&self) -> usize {
        match self.layout {
            ParticleLayout::Single => 1,
            ParticleLayout::OnePerAxis => self.dims(),
        }
    }

    pub fn particle_of_axis(&self, axis: usize) -> usize {
        match self.layout {
            ParticleLayout::Single => 0,
            ParticleLayout::OnePerAxis => axis,
        }
    }

    pub fn axes_of_particle(&self, particle: usize) -> Vec<usize> {
        (0..self.dims())
            .filter(|&a| self.particle_of_axis(a) == particle)
            .collect()
    }

    /// Distance in flat index between neighbours along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.points[axis + 1..].iter().product()
    }

    pub fn index_along(&self, flat: usize, axis: usize) -> usize {
        (flat / self.stride(axis)) % self.points[axis]
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        (0..self.dims()).map(|a| self.index_along(flat, a)).collect()
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .enumerate()
            .fold(0, |acc, (a, &i)| acc * self.points[a] + i)
    }

    pub fn coordinate(&self, axis: usize, i: usize) -> f64 {
        self.origin[axis] + i as f64 * self.spacing[axis]
    }

    pub fn coords(&self, flat: usize) -> Vec<f64> {
        (0..self.dims())
            .map(|a| self.coordinate(a, self.index_along(flat, a)))
            .collect()
    }

    /// Neighbour one step along `axis` in direction `dir` (±1), wrapping on
    /// periodic axes and returning `None` past an open boundary.
    pub fn neighbor(&self, flat: usize, axis: usize, dir: isize) -> Option<usize> {
        let n = self.points[axis] as isize;
        let i = self.index_along(flat, axis) as isize;
        let mut j = i + dir;
        if j < 0 || j >= n {
            if !self.periodic(axis) {
                return None;
            }
            j = j.rem_euclid(n);
        }
        let stride = self.stride(axis) as isize;
        Some((flat as isize + (j - i) * stride) as usize)
    }

    /// Wraps periodic coordinates into the fundamental domain and rejects
    /// positions beyond the ends of open axes.
    pub fn wrap_position(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dims() {
            return Err(Error::LengthMismatch {
                what: "position",
                expected: self.dims(),
                got: x.len(),
            });
        }
        let mut out = x.to_vec();
        for (axis, xa) in out.iter_mut().enumerate() {
            if !xa.is_finite() {
                return Err(Error::OutsideGrid { position: x.to_vec() });
            }
            let lo = self.origin[axis];
            let span = self.extent(axis);
            if self.periodic(axis) {
                *xa = lo + (*xa - lo).rem_euclid(span);
            } else {
                let tol = 1e-12 * self.spacing[axis];
                if *xa < lo - tol || *xa > lo + span + tol {
                    return Err(Error::OutsideGrid { position: x.to_vec() });
                }
                *xa = xa.clamp(lo, lo + span);
            }
        }
        Ok(out)
    }

    /// Flat index of the grid point nearest to `x` (x already wrapped).
    pub fn nearest_point(&self, x: &[f64]) -> usize {
        let idx: Vec<usize> = (0..self.dims())
            .map(|a| {
                let n = self.points[a];
                let r = ((x[a] - self.origin[a]) / self.spacing[a]).round() as isize;
                if self.periodic(a) {
                    r.rem_euclid(n as isize) as usize
                } else {
                    r.clamp(0, n as isize - 1) as usize
                }
            })
            .collect();
        self.flat_index(&idx)
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self == other
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_too_few_points() {
        assert!(Grid::ring(4, 0.0, 1.0).is_err());
        assert!(Grid::line(7, 0.0, 1.0).is_err());
        assert!(Grid::line(8, 0.0, 1.0).is_ok());
    }

    #[test]
    fn rejects_bad_spacing() {
        let g = Grid::new(
            Topology::Line,
            vec![16],
            vec![0.0],
            vec![0.0],
            ParticleLayout::Single,
        );
        assert!(g.is_err());
    }

    #[test]
    fn flat_and_multi_index_agree() {
        let g = Grid::torus([8, 12], [0.0, 0.0], [1.0, 1.0]).unwrap();
        for flat in 0..g.len() {
            assert_eq!(g.flat_index(&g.multi_index(flat)), flat);
        }
        assert_eq!(g.stride(0), 12);
        assert_eq!(g.stride(1), 1);
    }

    #[test]
    fn neighbors_wrap_only_when_periodic() {
        let ring = Grid::ring(8, 0.0, 1.0).unwrap();
        assert_eq!(ring.neighbor(7, 0, 1), Some(0));
        assert_eq!(ring.neighbor(0, 0, -1), Some(7));
        let line = Grid::line(8, 0.0, 1.0).unwrap();
        assert_eq!(line.neighbor(7, 0, 1), None);
        assert_eq!(line.neighbor(3, 0, 1), Some(4));
    }

    #[test]
    fn wrap_position_handles_periodic_and_open_axes() {
        let ring = Grid::ring(10, 0.0, 2.0).unwrap();
        let w = ring.wrap_position(&[2.5]).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-15);
        let line = Grid::line(10, 0.0, 1.0).unwrap();
        assert!(line.wrap_position(&[1.5]).is_err());
        assert!(line.wrap_position(&[f64::NAN]).is_err());
    }

    #[test]
    fn extent_depends_on_periodicity() {
        let ring = Grid::ring(16, 0.0, 4.0).unwrap();
        assert_eq!(ring.extent(0), 4.0);
        let line = Grid::line(17, 0.0, 4.0).unwrap();
        assert_eq!(line.extent(0), 4.0);
        assert_eq!(line.spacing(0), 0.25);
    }
}
