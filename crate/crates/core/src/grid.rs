//! Uniform structured grids on `[-1,1]` and `[-1,1]²`.
//!
//! Nodes are stored in a flat row-major array: in 2D the node `(i, j)` with
//! `x_i = -1 + i·h`, `y_j = -1 + j·h` lives at `j·(N+1) + i`, so `x` varies
//! fastest. Interior nodes have all multi-index components in `1..N`, every
//! other node is a boundary node.

use std::io::{BufRead, Write};
use std::ops::Deref;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Spatial point; the second coordinate is zero on 1D grids.
pub type Point<T> = [T; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Interior,
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid<T> {
    dim: usize,
    n: usize,
    h: T,
}

/// Neighbor indices of an interior node, ordered left, right, down, up.
#[derive(Debug, Clone, Copy)]
pub struct Stencil {
    idx: [usize; 4],
    len: usize,
}

impl Deref for Stencil {
    type Target = [usize];

    fn deref(&self) -> &[usize] {
        &self.idx[..self.len]
    }
}

impl<T: Real> UniformGrid<T> {
    pub fn new(dim: usize, n_per_side: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::ProblemDefinition(format!(
                "grid dimension must be 1 or 2, got {dim}"
            )));
        }
        if n_per_side < 2 {
            return Err(Error::ProblemDefinition(format!(
                "need N >= 2 subdivisions per side, got {n_per_side}"
            )));
        }
        Ok(Self {
            dim,
            n: n_per_side,
            h: T::lit(2.0) / T::of_usize(n_per_side),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_per_side(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> T {
        self.h
    }

    /// Nodes per side, `N + 1`.
    pub fn side(&self) -> usize {
        self.n + 1
    }

    pub fn node_count(&self) -> usize {
        self.side().pow(self.dim as u32)
    }

    pub fn interior_count(&self) -> usize {
        (self.n - 1).pow(self.dim as u32)
    }

    /// Stencil width `K = 2·dim`.
    pub fn neighbor_count(&self) -> usize {
        2 * self.dim
    }

    /// Coordinate of index `i` along one axis, `-1 + i·h`; the last node
    /// is pinned to exactly `1`.
    pub fn coordinate(&self, i: usize) -> T {
        if i == self.n {
            T::one()
        } else {
            -T::one() + T::of_usize(i) * self.h
        }
    }

    pub fn flat_index(&self, alpha: &[usize]) -> Result<usize> {
        if alpha.len() != self.dim {
            return Err(Error::Validation(format!(
                "multi-index {alpha:?} has {} components on a {}D grid",
                alpha.len(),
                self.dim
            )));
        }
        for &a in alpha {
            if a > self.n {
                return Err(Error::IndexOutOfRange {
                    what: "node",
                    index: a,
                    limit: self.n,
                });
            }
        }
        Ok(match alpha {
            [i] => *i,
            [i, j] => j * self.side() + i,
            _ => unreachable!(),
        })
    }

    /// `(i, j)` for a flat index; `j` is zero in 1D.
    pub fn multi_index(&self, flat: usize) -> [usize; 2] {
        match self.dim {
            1 => [flat, 0],
            _ => [flat % self.side(), flat / self.side()],
        }
    }

    /// Multi-index with exactly `dim` components.
    pub fn node_label(&self, flat: usize) -> Vec<usize> {
        let [i, j] = self.multi_index(flat);
        if self.dim == 1 {
            vec![i]
        } else {
            vec![i, j]
        }
    }

    pub fn point(&self, flat: usize) -> Point<T> {
        let [i, j] = self.multi_index(flat);
        match self.dim {
            1 => [self.coordinate(i), T::zero()],
            _ => [self.coordinate(i), self.coordinate(j)],
        }
    }

    pub fn classify(&self, alpha: &[usize]) -> Result<NodeKind> {
        let flat = self.flat_index(alpha)?;
        Ok(self.kind(flat))
    }

    pub fn kind(&self, flat: usize) -> NodeKind {
        if self.is_interior(flat) {
            NodeKind::Interior
        } else {
            NodeKind::Boundary
        }
    }

    pub fn is_interior(&self, flat: usize) -> bool {
        let inner = |a: usize| a >= 1 && a < self.n;
        let [i, j] = self.multi_index(flat);
        match self.dim {
            1 => inner(i),
            _ => inner(i) && inner(j),
        }
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.node_count()).filter(move |&k| self.is_interior(k))
    }

    pub fn boundary_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.node_count()).filter(move |&k| !self.is_interior(k))
    }

    /// Neighbors of an interior node. Callers must pass an interior index.
    #[inline]
    pub fn stencil(&self, flat: usize) -> Stencil {
        debug_assert!(self.is_interior(flat));
        match self.dim {
            1 => Stencil {
                idx: [flat - 1, flat + 1, 0, 0],
                len: 2,
            },
            _ => {
                let s = self.side();
                Stencil {
                    idx: [flat - 1, flat + 1, flat - s, flat + s],
                    len: 4,
                }
            }
        }
    }

    pub fn checked_stencil(&self, flat: usize) -> Result<Stencil> {
        if flat >= self.node_count() {
            return Err(Error::IndexOutOfRange {
                what: "node",
                index: flat,
                limit: self.node_count() - 1,
            });
        }
        if !self.is_interior(flat) {
            return Err(Error::NotInterior {
                node: self.node_label(flat),
            });
        }
        Ok(self.stencil(flat))
    }

    /// Sum of `values` over the stencil of an interior node.
    #[inline]
    pub fn neighbor_sum(&self, values: &[T], flat: usize) -> T {
        let st = self.stencil(flat);
        let mut acc = T::zero();
        for &k in st.iter() {
            acc = acc + values[k];
        }
        acc
    }

    /// Discrete Laplacian `L_h` of `values` at an interior node.
    #[inline]
    pub fn laplacian_at(&self, values: &[T], flat: usize) -> T {
        let k = T::of_usize(self.neighbor_count());
        (self.neighbor_sum(values, flat) - k * values[flat]) / (self.h * self.h)
    }

    /// Mean over the stencil of an interior node.
    #[inline]
    pub fn neighbor_average_at(&self, values: &[T], flat: usize) -> T {
        self.neighbor_sum(values, flat) / T::of_usize(self.neighbor_count())
    }

    /// Index of `self`'s node `flat` on a grid refined by `factor`.
    pub fn refined_index(&self, flat: usize, fine: &UniformGrid<T>, factor: usize) -> usize {
        let [i, j] = self.multi_index(flat);
        match self.dim {
            1 => i * factor,
            _ => (j * factor) * fine.side() + i * factor,
        }
    }
}

/// One real value per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction<T> {
    grid: UniformGrid<T>,
    values: Vec<T>,
}

impl<T: Real> GridFunction<T> {
    pub fn zeros(grid: UniformGrid<T>) -> Self {
        Self {
            values: vec![T::zero(); grid.node_count()],
            grid,
        }
    }

    pub fn from_fn(grid: UniformGrid<T>, mut f: impl FnMut(Point<T>) -> T) -> Self {
        let values = (0..grid.node_count()).map(|k| f(grid.point(k))).collect();
        Self { grid, values }
    }

    pub fn from_values(grid: UniformGrid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::Validation(format!(
                "grid function needs {} values, got {}",
                grid.node_count(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &UniformGrid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn get(&self, alpha: &[usize]) -> Result<T> {
        Ok(self.values[self.grid.flat_index(alpha)?])
    }

    pub fn laplacian(&self, alpha: &[usize]) -> Result<T> {
        let flat = self.grid.flat_index(alpha)?;
        self.grid.checked_stencil(flat)?;
        Ok(self.grid.laplacian_at(&self.values, flat))
    }

    pub fn neighbor_average(&self, alpha: &[usize]) -> Result<T> {
        let flat = self.grid.flat_index(alpha)?;
        self.grid.checked_stencil(flat)?;
        Ok(self.grid.neighbor_average_at(&self.values, flat))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        if self.grid != other.grid {
            return Err(Error::Validation("grid functions live on different grids".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs())))
    }

    /// Node-wise combination of two grid functions on the same grid.
    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| f(*v)).collect(),
        }
    }

    /// Samples this function at the nodes of a coarser nested grid.
    pub fn restrict_to(&self, coarse: &UniformGrid<T>) -> Result<Self> {
        let (nf, nc) = (self.grid.n_per_side(), coarse.n_per_side());
        if coarse.dim() != self.grid.dim() || nc > nf || nf % nc != 0 {
            return Err(Error::Validation(format!(
                "grid with N={nc} is not nested in grid with N={nf}"
            )));
        }
        let factor = nf / nc;
        let values = (0..coarse.node_count())
            .map(|k| self.values[coarse.refined_index(k, &self.grid, factor)])
            .collect();
        Ok(Self {
            grid: *coarse,
            values,
        })
    }

    /// CSV with header `x[,y],value`, row-major, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let two_d = self.grid.dim() == 2;
        writeln!(out, "{}", if two_d { "x,y,value" } else { "x,value" })?;
        for (k, v) in self.values.iter().enumerate() {
            let [x, y] = self.grid.point(k);
            if two_d {
                writeln!(out, "{:.16e},{:.16e},{:.16e}", x.as_f64(), y.as_f64(), v.as_f64())?;
            } else {
                writeln!(out, "{:.16e},{:.16e}", x.as_f64(), v.as_f64())?;
            }
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is ascii")
    }

    /// Reads a field written by [`GridFunction::write_csv`]; the grid is
    /// inferred from the header and the row count.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty csv".into()))??;
        let dim = match header.trim() {
            "x,value" => 1,
            "x,y,value" => 2,
            other => return Err(Error::Parse(format!("unexpected csv header {other:?}"))),
        };
        let mut values = Vec::new();
        for (row, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let last = line
                .rsplit(',')
                .next()
                .ok_or_else(|| Error::Parse(format!("row {row}: no value column")))?;
            let v: f64 = last
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("row {row}: {e}")))?;
            values.push(T::lit(v));
        }
        let side = match dim {
            1 => values.len(),
            _ => (values.len() as f64).sqrt().round() as usize,
        };
        if side < 3 || side.pow(dim as u32) != values.len() {
            return Err(Error::Parse(format!(
                "{} rows do not form a {dim}D grid",
                values.len()
            )));
        }
        let grid = UniformGrid::new(dim, side - 1)?;
        Self::from_values(grid, values)
    }
}
