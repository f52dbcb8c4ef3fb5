//! Periodic uniform grids and grid functions with the discrete norms used by
//! every estimate in the crate.
//!
//! The torus of side `L` is identified with `[-L/2, L/2]^d`. Values are cell
//! averages stored in row-major order (axis 0 slowest).

use std::fmt;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Periodic uniform grid in one or two dimensions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    dim: usize,
    n: usize,
    length: f64,
    spacing: f64,
}

impl Grid {
    pub fn new(dim: usize, n: usize, length: f64) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::Grid(format!("dimension must be 1 or 2, got {dim}")));
        }
        if n < 8 {
            return Err(Error::Grid(format!("need at least 8 cells per axis, got {n}")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::Grid(format!("length must be positive, got {length}")));
        }
        Ok(Self { dim, n, length, spacing: length / n as f64 })
    }

    /// One-dimensional grid on `[-length/2, length/2]`.
    pub fn line(n: usize, length: f64) -> Result<Self> {
        Self::new(1, n, length)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells_per_axis(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Total number of cells, `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Cell volume `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    /// Coordinate of the center of cell `i` along one axis.
    pub fn center(&self, i: usize) -> f64 {
        -0.5 * self.length + (i as f64 + 0.5) * self.spacing
    }

    /// Multi-index of a flat cell index.
    pub fn unravel(&self, idx: usize) -> [usize; 2] {
        match self.dim {
            1 => [idx, 0],
            _ => [idx / self.n, idx % self.n],
        }
    }

    pub fn ravel(&self, multi: [usize; 2]) -> usize {
        match self.dim {
            1 => multi[0],
            _ => multi[0] * self.n + multi[1],
        }
    }

    /// Cell-center coordinates of a flat index (unused axes are zero).
    pub fn position(&self, idx: usize) -> [f64; 2] {
        let m = self.unravel(idx);
        match self.dim {
            1 => [self.center(m[0]), 0.0],
            _ => [self.center(m[0]), self.center(m[1])],
        }
    }

    /// Flat index of the periodic neighbour `offset` cells away along `axis`.
    #[inline]
    pub fn neighbor(&self, idx: usize, axis: usize, offset: isize) -> usize {
        let n = self.n as isize;
        match (self.dim, axis) {
            (1, _) => (idx as isize + offset).rem_euclid(n) as usize,
            (_, 0) => {
                let (i, j) = (idx / self.n, idx % self.n);
                ((i as isize + offset).rem_euclid(n) as usize) * self.n + j
            }
            _ => {
                let (i, j) = (idx / self.n, idx % self.n);
                i * self.n + (j as isize + offset).rem_euclid(n) as usize
            }
        }
    }

    /// Signed wrapped displacement index in `[-n/2, n/2)` for an axis index.
    pub fn wrapped(&self, i: usize) -> isize {
        let n = self.n as isize;
        let i = i as isize;
        if i < (n + 1) / 2 {
            i
        } else {
            i - n
        }
    }

    pub(crate) fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::Shape(format!("grid mismatch: {self} vs {other}")))
        }
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "dim={} n={} L={}", self.dim, self.n, self.length)
    }
}

/// Compensated (Neumaier) summation.
pub(crate) fn neumaier_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for x in iter {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Scalar grid function with cell-average semantics.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape(format!(
                "expected {} values for {grid}, got {}",
                grid.len(),
                values.len()
            )));
        }
        let field = Self { grid, values };
        field.ensure_finite()?;
        Ok(field)
    }

    /// Builds a field without the finiteness check. Used for blowup witnesses.
    pub(crate) fn new_unchecked(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self { grid, values: vec![c; grid.len()] }
    }

    /// Point samples of `f` at cell centers.
    pub fn from_point_samples(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(grid.position(i))).collect();
        Self::new(grid, values)
    }

    /// Cell averages of `f`, integrated with a three-point Gauss rule per axis.
    pub fn from_cell_averages(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        const NODES: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
        const WEIGHTS: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];
        let half = 0.5 * grid.spacing();
        let values = (0..grid.len())
            .map(|idx| {
                let c = grid.position(idx);
                match grid.dim() {
                    1 => NODES
                        .iter()
                        .zip(WEIGHTS)
                        .map(|(&s, w)| w * f([c[0] + half * s, 0.0]))
                        .sum(),
                    _ => {
                        let mut acc = 0.0;
                        for (&s, ws) in NODES.iter().zip(WEIGHTS) {
                            for (&r, wr) in NODES.iter().zip(WEIGHTS) {
                                acc += ws * wr * f([c[0] + half * s, c[1] + half * r]);
                            }
                        }
                        acc
                    }
                }
            })
            .collect();
        Self::new(grid, values)
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

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn ensure_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(i) => Err(Error::InvalidField(format!(
                "non-finite value {} at cell {i}",
                self.values[i]
            ))),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// `a * self + b * other`.
    pub fn lincomb(&self, a: f64, other: &Field, b: f64) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        let values =
            self.values.iter().zip(&other.values).map(|(&x, &y)| a * x + b * y).collect();
        Ok(Self { grid: self.grid, values })
    }

    /// Cyclic translation by `offset` cells along `axis`.
    pub fn shifted(&self, axis: usize, offset: isize) -> Self {
        let mut values = vec![0.0; self.values.len()];
        for (idx, v) in values.iter_mut().enumerate() {
            *v = self.values[self.grid.neighbor(idx, axis, -offset)];
        }
        Self { grid: self.grid, values }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest absolute value outside the centered box of half-width
    /// `fraction * L / 2`. Used to check that compactly supported data has
    /// not reached the periodic padding.
    pub fn support_leak(&self, fraction: f64) -> f64 {
        let half = 0.5 * fraction * self.grid.length();
        (0..self.grid.len())
            .filter(|&i| {
                let p = self.grid.position(i);
                p[..self.grid.dim()].iter().any(|x| x.abs() > half)
            })
            .map(|i| self.values[i].abs())
            .fold(0.0, f64::max)
    }
}

/// Vector-valued grid function with one component per axis.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: Grid,
    components: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn new(grid: Grid, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.len() != grid.dim() {
            return Err(Error::Shape(format!(
                "expected {} components, got {}",
                grid.dim(),
                components.len()
            )));
        }
        for (a, c) in components.iter().enumerate() {
            if c.len() != grid.len() {
                return Err(Error::Shape(format!(
                    "component {a} has {} values, expected {}",
                    c.len(),
                    grid.len()
                )));
            }
            if let Some(i) = c.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidField(format!(
                    "non-finite value in component {a} at cell {i}"
                )));
            }
        }
        Ok(Self { grid, components })
    }

    pub(crate) fn new_unchecked(grid: Grid, components: Vec<Vec<f64>>) -> Self {
        Self { grid, components }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { grid, components: vec![vec![0.0; grid.len()]; grid.dim()] }
    }

    /// The same value in every cell.
    pub fn constant(grid: Grid, value: &[f64]) -> Result<Self> {
        if value.len() != grid.dim() {
            return Err(Error::Shape("constant vector has wrong dimension".into()));
        }
        Ok(Self { grid, components: value.iter().map(|&c| vec![c; grid.len()]).collect() })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn component(&self, axis: usize) -> &[f64] {
        &self.components[axis]
    }

    /// Euclidean length of the vector in cell `idx`.
    pub fn magnitude_at(&self, idx: usize) -> f64 {
        self.components.iter().map(|c| c[idx] * c[idx]).sum::<f64>().sqrt()
    }

    /// Largest Euclidean length over all cells.
    pub fn linf(&self) -> f64 {
        (0..self.grid.len()).map(|i| self.magnitude_at(i)).fold(0.0, f64::max)
    }

    /// `h^d Σ |v|` with the Euclidean norm per cell.
    pub fn l1(&self) -> f64 {
        self.grid.cell_volume() * neumaier_sum((0..self.grid.len()).map(|i| self.magnitude_at(i)))
    }

    pub fn shifted(&self, axis: usize, offset: isize) -> Self {
        let components = self
            .components
            .iter()
            .map(|c| {
                Field::new_unchecked(self.grid, c.clone()).shifted(axis, offset).into_values()
            })
            .collect();
        Self { grid: self.grid, components }
    }
}

/// `h^d Σ values`.
pub fn mass(f: &Field) -> Result<f64> {
    f.ensure_finite()?;
    Ok(f.grid.cell_volume() * neumaier_sum(f.values.iter().copied()))
}

/// `h^d Σ |values|`.
pub fn norm_l1(f: &Field) -> Result<f64> {
    f.ensure_finite()?;
    Ok(f.grid.cell_volume() * neumaier_sum(f.values.iter().map(|v| v.abs())))
}

/// `max |values|`.
pub fn norm_linf(f: &Field) -> Result<f64> {
    f.ensure_finite()?;
    Ok(f.values.iter().fold(0.0, |m, v| m.max(v.abs())))
}

/// `h^d Σ |f - g|`.
pub fn distance_l1(f: &Field, g: &Field) -> Result<f64> {
    f.grid.ensure_same(&g.grid)?;
    f.ensure_finite()?;
    g.ensure_finite()?;
    Ok(f.grid.cell_volume()
        * neumaier_sum(f.values.iter().zip(&g.values).map(|(a, b)| (a - b).abs())))
}

/// Anisotropic discrete total variation:
/// `Σ_axes h^{d-1} Σ_cells |u(i + e_a) - u(i)|` with periodic wrap.
pub fn total_variation(f: &Field) -> Result<f64> {
    f.ensure_finite()?;
    Ok(tv_of_values(&f.grid, &f.values))
}

pub(crate) fn tv_of_values(grid: &Grid, values: &[f64]) -> f64 {
    let face = grid.spacing().powi(grid.dim() as i32 - 1);
    let mut total = 0.0;
    for axis in 0..grid.dim() {
        let s = neumaier_sum(
            (0..grid.len()).map(|i| (values[grid.neighbor(i, axis, 1)] - values[i]).abs()),
        );
        total += face * s;
    }
    total
}

/// Second-order central periodic gradient.
pub fn gradient(f: &Field) -> Result<VectorField> {
    f.ensure_finite()?;
    let g = &f.grid;
    let inv = 0.5 / g.spacing();
    let components = (0..g.dim())
        .map(|axis| {
            (0..g.len())
                .map(|i| (f.values[g.neighbor(i, axis, 1)] - f.values[g.neighbor(i, axis, -1)]) * inv)
                .collect()
        })
        .collect();
    Ok(VectorField { grid: *g, components })
}

/// Second-order central periodic divergence.
pub fn divergence(v: &VectorField) -> Result<Field> {
    let g = &v.grid;
    for c in &v.components {
        if c.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidField("non-finite vector field".into()));
        }
    }
    let inv = 0.5 / g.spacing();
    let values = (0..g.len())
        .map(|i| {
            (0..g.dim())
                .map(|a| {
                    let c = &v.components[a];
                    (c[g.neighbor(i, a, 1)] - c[g.neighbor(i, a, -1)]) * inv
                })
                .sum()
        })
        .collect();
    Ok(Field { grid: *g, values })
}

const SNAPSHOT_MAGIC: &str = "NLCLAW-FIELD v1";

/// Encodes values on `grid` in the snapshot format: one header line followed by
/// little-endian `f64` values in row-major order.
pub fn encode_snapshot(grid: &Grid, values: &[f64]) -> Vec<u8> {
    let header = format!(
        "{SNAPSHOT_MAGIC} dim={} n={} L={}\n",
        grid.dim(),
        grid.cells_per_axis(),
        grid.length()
    );
    let mut out = Vec::with_capacity(header.len() + 8 * values.len());
    out.extend_from_slice(header.as_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Decodes a snapshot into its grid and raw payload. The payload may hold a
/// whole number of fields (one per vector component).
pub fn decode_snapshot(bytes: &[u8]) -> Result<(Grid, Vec<f64>)> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Format("missing header line".into()))?;
    let header = std::str::from_utf8(&bytes[..nl])
        .map_err(|_| Error::Format("header is not utf-8".into()))?;
    let rest = header
        .strip_prefix(SNAPSHOT_MAGIC)
        .ok_or_else(|| Error::Format(format!("bad magic in header {header:?}")))?;
    let (mut dim, mut n, mut len) = (None, None, None);
    for tok in rest.split_whitespace() {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("malformed header token {tok:?}")))?;
        let bad = || Error::Format(format!("bad value in header token {tok:?}"));
        match k {
            "dim" => dim = Some(v.parse::<usize>().map_err(|_| bad())?),
            "n" => n = Some(v.parse::<usize>().map_err(|_| bad())?),
            "L" => len = Some(v.parse::<f64>().map_err(|_| bad())?),
            _ => return Err(Error::Format(format!("unknown header key {k:?}"))),
        }
    }
    let missing = |k: &str| Error::Format(format!("header missing {k}"));
    let grid = Grid::new(dim.ok_or_else(|| missing("dim"))?, n.ok_or_else(|| missing("n"))?, len.ok_or_else(|| missing("L"))?)?;
    let payload = &bytes[nl + 1..];
    if payload.len() % 8 != 0 || payload.is_empty() || (payload.len() / 8) % grid.len() != 0 {
        return Err(Error::Format(format!(
            "payload of {} bytes does not hold whole fields on {grid}",
            payload.len()
        )));
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((grid, values))
}

pub fn write_snapshot(path: &Path, field: &Field) -> Result<()> {
    let bytes = encode_snapshot(&field.grid, &field.values);
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&bytes))
        .map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

pub fn read_snapshot(path: &Path) -> Result<Field> {
    let (grid, values) = read_snapshot_raw(path)?;
    if values.len() != grid.len() {
        return Err(Error::Format(format!("{} holds more than one field", path.display())));
    }
    Field::new(grid, values)
}

pub fn read_snapshot_raw(path: &Path) -> Result<(Grid, Vec<f64>)> {
    let bytes =
        std::fs::read(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    decode_snapshot(&bytes)
}
