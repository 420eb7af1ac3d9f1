use crate::error::{Error, Result};

use super::grid::{DomainGrid, Grid, PeriodicGrid};

/// Nodal values on a grid. Entries are always finite.
#[derive(Clone, Debug, PartialEq)]
pub struct Field<G: Grid> {
    grid: G,
    values: Vec<f64>,
}

/// Field on the square domain.
pub type ScalarField = Field<DomainGrid>;
/// Field on the periodic unit cell.
pub type CellField = Field<PeriodicGrid>;

impl<G: Grid> Field<G> {
    pub fn zeros(grid: G) -> Self {
        Self {
            values: vec![0.0; grid.node_count()],
            grid,
        }
    }

    pub fn from_values(grid: G, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::Consistency(format!(
                "field has {} values for {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Consistency(format!("non-finite value at node {k}")));
        }
        Ok(Self { grid, values })
    }

    /// Skips the finiteness scan; callers guarantee it.
    pub(crate) fn from_values_unchecked(grid: G, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.node_count());
        Self { grid, values }
    }

    pub fn grid(&self) -> &G {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

impl ScalarField {
    pub fn from_fn(grid: DomainGrid, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let np = grid.nodes_per_side();
        let mut values = Vec::with_capacity(grid.node_count());
        for j in 0..np {
            for i in 0..np {
                values.push(f(grid.coord(i, j)));
            }
        }
        Self::from_values(grid, values)
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    /// Bilinear interpolation; points outside the square are clamped to it.
    pub fn interpolate(&self, x: [f64; 2]) -> f64 {
        let g = &self.grid;
        let n = g.n();
        let h = g.h();
        let locate = |t: f64| {
            let s = ((t + g.half_extent()) / h).clamp(0.0, n as f64);
            let k = (s.floor() as usize).min(n - 1);
            (k, s - k as f64)
        };
        let (i, fx) = locate(x[0]);
        let (j, fy) = locate(x[1]);
        let v00 = self.at(i, j);
        let v10 = self.at(i + 1, j);
        let v01 = self.at(i, j + 1);
        let v11 = self.at(i + 1, j + 1);
        (1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) + fy * ((1.0 - fx) * v01 + fx * v11)
    }

    /// Centered differences inside, one-sided at the domain edge.
    pub fn gradient(&self) -> [ScalarField; 2] {
        let g = self.grid;
        let np = g.nodes_per_side();
        let h = g.h();
        let mut dx = vec![0.0; g.node_count()];
        let mut dy = vec![0.0; g.node_count()];
        for j in 0..np {
            for i in 0..np {
                let k = g.index(i, j);
                dx[k] = match i {
                    0 => (self.at(1, j) - self.at(0, j)) / h,
                    _ if i == np - 1 => (self.at(i, j) - self.at(i - 1, j)) / h,
                    _ => (self.at(i + 1, j) - self.at(i - 1, j)) / (2.0 * h),
                };
                dy[k] = match j {
                    0 => (self.at(i, 1) - self.at(i, 0)) / h,
                    _ if j == np - 1 => (self.at(i, j) - self.at(i, j - 1)) / h,
                    _ => (self.at(i, j + 1) - self.at(i, j - 1)) / (2.0 * h),
                };
            }
        }
        [
            Self::from_values_unchecked(g, dx),
            Self::from_values_unchecked(g, dy),
        ]
    }

    /// Second differences `[d11, d22, d12]`; edge nodes copy their inward
    /// neighbour.
    pub fn hessian(&self) -> [ScalarField; 3] {
        let g = self.grid;
        let np = g.nodes_per_side();
        let h2 = g.h() * g.h();
        let mut out = [
            vec![0.0; g.node_count()],
            vec![0.0; g.node_count()],
            vec![0.0; g.node_count()],
        ];
        for j in 0..np {
            for i in 0..np {
                let (ic, jc) = (i.clamp(1, np - 2), j.clamp(1, np - 2));
                let c = self.at(ic, jc);
                let k = g.index(i, j);
                out[0][k] = (self.at(ic + 1, jc) - 2.0 * c + self.at(ic - 1, jc)) / h2;
                out[1][k] = (self.at(ic, jc + 1) - 2.0 * c + self.at(ic, jc - 1)) / h2;
                out[2][k] = (self.at(ic + 1, jc + 1) - self.at(ic + 1, jc - 1)
                    - self.at(ic - 1, jc + 1)
                    + self.at(ic - 1, jc - 1))
                    / (4.0 * h2);
            }
        }
        out.map(|v| Self::from_values_unchecked(g, v))
    }
}

impl CellField {
    pub fn from_fn(grid: PeriodicGrid, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let n = grid.n();
        let mut values = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                values.push(f(grid.coord(i, j)));
            }
        }
        Self::from_values(grid, values)
    }

    #[inline]
    pub fn at(&self, i: isize, j: isize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    /// Periodic bilinear interpolation at an arbitrary point of the plane.
    pub fn interpolate(&self, y: [f64; 2]) -> f64 {
        let n = self.grid.n() as f64;
        let sx = y[0].rem_euclid(1.0) * n;
        let sy = y[1].rem_euclid(1.0) * n;
        let (i, j) = (sx.floor(), sy.floor());
        let (fx, fy) = (sx - i, sy - j);
        let (i, j) = (i as isize, j as isize);
        let v00 = self.at(i, j);
        let v10 = self.at(i + 1, j);
        let v01 = self.at(i, j + 1);
        let v11 = self.at(i + 1, j + 1);
        (1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) + fy * ((1.0 - fx) * v01 + fx * v11)
    }

    /// Periodic centered differences.
    pub fn gradient(&self) -> [CellField; 2] {
        let g = self.grid;
        let n = g.n() as isize;
        let inv = 1.0 / (2.0 * g.h());
        let mut dx = Vec::with_capacity(g.node_count());
        let mut dy = Vec::with_capacity(g.node_count());
        for j in 0..n {
            for i in 0..n {
                dx.push((self.at(i + 1, j) - self.at(i - 1, j)) * inv);
                dy.push((self.at(i, j + 1) - self.at(i, j - 1)) * inv);
            }
        }
        [
            Self::from_values_unchecked(g, dx),
            Self::from_values_unchecked(g, dy),
        ]
    }
}
