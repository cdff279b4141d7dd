//! Field snapshots on disk.
//!
//! A snapshot `name` is two files: `name.json`, a header describing the
//! grid and the columns, and `name.csv` with one row per grid point:
//! `index, x0[, x1], value columns...`. Complex fields store `re, im`.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::calculus::integrate_raw;
use crate::error::{Error, Result};
use crate::field::{ComplexField, ScalarField, VectorField};
use crate::grid::{Grid, ParticleLayout, Topology};
use crate::phase::PhaseRecord;

pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub topology: Topology,
    pub points: Vec<usize>,
    pub spacing: Vec<f64>,
    pub origin: Vec<f64>,
    pub extent: Vec<f64>,
    pub periodic: Vec<bool>,
    pub layout: ParticleLayout,
}

impl GridHeader {
    pub fn of(grid: &Grid) -> Self {
        Self {
            topology: grid.topology(),
            points: grid.points().to_vec(),
            spacing: grid.spacings().to_vec(),
            origin: grid.origins().to_vec(),
            extent: (0..grid.dims()).map(|a| grid.extent(a)).collect(),
            periodic: (0..grid.dims()).map(|a| grid.periodic(a)).collect(),
            layout: grid.layout(),
        }
    }

    pub fn to_grid(&self) -> Result<Grid> {
        Grid::new(
            self.topology,
            self.points.clone(),
            self.origin.clone(),
            self.spacing.clone(),
            self.layout,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Scalar,
    Vector,
    Complex,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub version: u32,
    pub name: String,
    pub kind: FieldKind,
    pub time: f64,
    pub step: u64,
    pub grid: GridHeader,
    pub columns: Vec<String>,
    /// Present for phase snapshots.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub windings: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action_per_turn: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub header: SnapshotHeader,
    pub grid: Grid,
    /// Value columns, point-major.
    pub values: Vec<f64>,
}

fn coordinate_columns(grid: &Grid) -> Vec<String> {
    let mut c = vec!["index".to_string()];
    c.extend((0..grid.dims()).map(|a| format!("x{a}")));
    c
}

impl Snapshot {
    fn build(name: &str, kind: FieldKind, grid: &Grid, value_columns: Vec<String>, values: Vec<f64>, time: f64, step: u64) -> Self {
        let mut columns = coordinate_columns(grid);
        columns.extend(value_columns);
        Self {
            header: SnapshotHeader {
                version: SNAPSHOT_VERSION,
                name: name.to_string(),
                kind,
                time,
                step,
                grid: GridHeader::of(grid),
                columns,
                windings: None,
                action_per_turn: None,
            },
            grid: grid.clone(),
            values,
        }
    }

    pub fn scalar(name: &str, field: &ScalarField, time: f64, step: u64) -> Self {
        Self::build(name, FieldKind::Scalar, field.grid(), vec!["value".into()], field.values().to_vec(), time, step)
    }

    pub fn vector(name: &str, field: &VectorField, time: f64, step: u64) -> Self {
        let cols = (0..field.grid().dims()).map(|a| format!("v{a}")).collect();
        Self::build(name, FieldKind::Vector, field.grid(), cols, field.values().to_vec(), time, step)
    }

    pub fn complex(name: &str, field: &ComplexField, time: f64, step: u64) -> Self {
        let values = field.values().iter().flat_map(|z| [z.re, z.im]).collect();
        Self::build(name, FieldKind::Complex, field.grid(), vec!["re".into(), "im".into()], values, time, step)
    }

    /// The base of a phase, with its topology in the header.
    pub fn phase(name: &str, phase: &PhaseRecord, time: f64, step: u64) -> Self {
        let mut s = Self::scalar(name, phase.base(), time, step);
        s.header.windings = Some(phase.windings().to_vec());
        s.header.action_per_turn = Some(phase.action_per_turn().to_vec());
        s
    }

    pub fn width(&self) -> usize {
        match self.header.kind {
            FieldKind::Scalar => 1,
            FieldKind::Vector => self.grid.dims(),
            FieldKind::Complex => 2,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.columns.join(",");
        out.push('\n');
        let w = self.width();
        for p in 0..self.grid.len() {
            out.push_str(&p.to_string());
            for x in self.grid.coords(p) {
                out.push(',');
                out.push_str(&x.to_string());
            }
            for v in &self.values[p * w..(p + 1) * w] {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }

    /// Writes `dir/name.json` and `dir/name.csv`; returns the CSV path.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let json = dir.join(format!("{}.json", self.header.name));
        let csv = dir.join(format!("{}.csv", self.header.name));
        fs::write(&json, serde_json::to_string_pretty(&self.header)? + "\n")?;
        fs::write(&csv, self.to_csv())?;
        Ok(csv)
    }

    /// Reads a snapshot given either of its two files or their common stem.
    pub fn read(path: &Path) -> Result<Self> {
        let json = path.with_extension("json");
        let csv = path.with_extension("csv");
        let header: SnapshotHeader = serde_json::from_str(&fs::read_to_string(&json)?)?;
        if header.version != SNAPSHOT_VERSION {
            return Err(Error::Snapshot(format!("unsupported version {}", header.version)));
        }
        let grid = header.grid.to_grid()?;
        let text = fs::read_to_string(&csv)?;
        let mut lines = text.lines();
        let head = lines.next().ok_or_else(|| Error::Snapshot("empty CSV".into()))?;
        if head.split(',').map(str::trim).ne(header.columns.iter().map(String::as_str)) {
            return Err(Error::Snapshot(format!("CSV columns `{head}` disagree with the header")));
        }
        let skip = 1 + grid.dims();
        let width = header.columns.len() - skip;
        let mut values = Vec::with_capacity(grid.len() * width);
        let mut rows = 0;
        for (k, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != header.columns.len() {
                return Err(Error::Snapshot(format!("row {k} has {} cells", cells.len())));
            }
            if cells[0].trim().parse::<usize>().ok() != Some(k) {
                return Err(Error::Snapshot(format!("row {k} has index `{}`", cells[0])));
            }
            for c in &cells[skip..] {
                let v: f64 = c
                    .trim()
                    .parse()
                    .map_err(|_| Error::Snapshot(format!("row {k}: `{c}` is not a number")))?;
                values.push(v);
            }
            rows += 1;
        }
        if rows != grid.len() {
            return Err(Error::Snapshot(format!("{rows} rows for a grid of {} points", grid.len())));
        }
        Ok(Self { header, grid, values })
    }

    pub fn to_scalar(&self) -> Result<ScalarField> {
        match self.header.kind {
            FieldKind::Scalar => ScalarField::new(self.grid.clone(), self.values.clone()),
            _ => Err(Error::Snapshot("not a scalar snapshot".into())),
        }
    }

    pub fn to_complex(&self) -> Result<ComplexField> {
        match self.header.kind {
            FieldKind::Complex => ComplexField::new(
                self.grid.clone(),
                self.values.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect(),
            ),
            _ => Err(Error::Snapshot("not a complex snapshot".into())),
        }
    }

    /// Pointwise magnitude used for comparisons: the value, the vector norm,
    /// or the complex modulus.
    fn pointwise(&self, p: usize) -> Vec<f64> {
        let w = self.width();
        self.values[p * w..(p + 1) * w].to_vec()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SnapshotDiff {
    /// `∫ |a − b|`, with `|·|` the Euclidean norm of the value columns.
    pub l1: f64,
    pub linf: f64,
    pub points: usize,
}

/// Distance between two snapshots of the same kind on the same grid.
/// Scalar snapshots of different kinds compare `|Ψ|²` against a density
/// when one side is complex and the other scalar.
pub fn compare_snapshots(a: &Snapshot, b: &Snapshot) -> Result<SnapshotDiff> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch);
    }
    let density = |s: &Snapshot, p: usize| -> Vec<f64> {
        match s.header.kind {
            FieldKind::Complex => {
                let v = s.pointwise(p);
                vec![v[0] * v[0] + v[1] * v[1]]
            }
            _ => s.pointwise(p),
        }
    };
    let mixed = a.header.kind != b.header.kind;
    if mixed && !matches!((a.header.kind, b.header.kind), (FieldKind::Scalar, FieldKind::Complex) | (FieldKind::Complex, FieldKind::Scalar)) {
        return Err(Error::Snapshot("cannot compare a vector snapshot with another kind".into()));
    }
    let diff: Vec<f64> = (0..a.grid.len())
        .map(|p| {
            let (u, v) = if mixed { (density(a, p), density(b, p)) } else { (a.pointwise(p), b.pointwise(p)) };
            u.iter().zip(&v).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
        })
        .collect();
    Ok(SnapshotDiff {
        l1: integrate_raw(&a.grid, &diff),
        linf: diff.iter().cloned().fold(0.0, f64::max),
        points: a.grid.len(),
    })
}
