use serde::Serialize;

use crate::error::{Error, Result};

/// Anything that owns a fixed set of nodes.
pub trait Grid: Copy + PartialEq + std::fmt::Debug {
    fn node_count(&self) -> usize;
}

/// Uniform periodic grid on the unit cell `[0,1)^2`. Node `(i, j)` sits at
/// `(i h, j h)` and indices wrap modulo `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PeriodicGrid {
    n: usize,
}

impl PeriodicGrid {
    pub const DIM: usize = 2;

    pub fn new(n: usize) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::Config(format!(
                "periodic grid needs a power of two n >= 8, got {n}"
            )));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    #[inline]
    pub fn index(&self, i: isize, j: isize) -> usize {
        let n = self.n as isize;
        (j.rem_euclid(n) * n + i.rem_euclid(n)) as usize
    }

    #[inline]
    pub fn coord(&self, i: usize, j: usize) -> [f64; 2] {
        [i as f64 * self.h(), j as f64 * self.h()]
    }
}

impl Grid for PeriodicGrid {
    fn node_count(&self) -> usize {
        self.n * self.n
    }
}

/// Uniform vertex grid on the square `[-L, L]^2` with `n` cells per side
/// (so `n + 1` nodes per side). Node `(i, j)` sits at `(-L + i h, -L + j h)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DomainGrid {
    half_extent: f64,
    n: usize,
}

impl DomainGrid {
    pub fn new(half_extent: f64, n: usize) -> Result<Self> {
        if !(half_extent.is_finite() && half_extent > 0.0) {
            return Err(Error::Config(format!(
                "half-extent must be positive, got {half_extent}"
            )));
        }
        if n < 2 {
            return Err(Error::Config(format!("domain grid needs n >= 2, got {n}")));
        }
        Ok(Self { half_extent, n })
    }

    /// Smallest grid on `[-L, L]^2` with `h <= eps / cells_per_period` and `n`
    /// a multiple of `multiple` (keeps multigrid coarsening deep).
    pub fn resolving(half_extent: f64, eps: f64, cells_per_period: usize, multiple: usize) -> Result<Self> {
        let min_n = (2.0 * half_extent * cells_per_period as f64 / eps * (1.0 - 1e-12)).ceil() as usize;
        let m = multiple.max(1);
        Self::new(half_extent, min_n.div_ceil(m) * m)
    }

    pub fn half_extent(&self) -> f64 {
        self.half_extent
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nodes_per_side(&self) -> usize {
        self.n + 1
    }

    pub fn h(&self) -> f64 {
        2.0 * self.half_extent / self.n as f64
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * (self.n + 1) + i
    }

    #[inline]
    pub fn coord(&self, i: usize, j: usize) -> [f64; 2] {
        let h = self.h();
        [
            -self.half_extent + i as f64 * h,
            -self.half_extent + j as f64 * h,
        ]
    }

    #[inline]
    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.n || j == self.n
    }

    /// Closed ball `B_r(0)` lies inside the domain.
    pub fn contains_ball(&self, r: f64) -> bool {
        r <= self.half_extent * (1.0 + 1e-12)
    }

    pub fn require_ball(&self, r: f64) -> Result<()> {
        if self.contains_ball(r) {
            Ok(())
        } else {
            Err(Error::Geometry(format!(
                "ball of radius {r} exceeds the domain [-{L}, {L}]^2",
                L = self.half_extent
            )))
        }
    }

    /// Node index range `[lo, hi]` (per axis) whose dual cells can meet `B_r`.
    pub(crate) fn node_range(&self, r: f64) -> (usize, usize) {
        let h = self.h();
        let lo = ((self.half_extent - r) / h - 1.0).floor().max(0.0) as usize;
        let hi = (((self.half_extent + r) / h + 1.0).ceil() as usize).min(self.n);
        (lo, hi)
    }
}

impl Grid for DomainGrid {
    fn node_count(&self) -> usize {
        (self.n + 1) * (self.n + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodic_indices_wrap() {
        let g = PeriodicGrid::new(8).unwrap();
        assert_eq!(g.index(-1, 0), 7);
        assert_eq!(g.index(8, 9), g.index(0, 1));
        assert!(PeriodicGrid::new(12).is_err());
        assert!(PeriodicGrid::new(4).is_err());
    }

    #[test]
    fn domain_geometry() {
        let g = DomainGrid::new(3.2, 512).unwrap();
        assert!((g.h() - 0.0125).abs() < 1e-15);
        assert_eq!(g.coord(256, 256), [0.0, 0.0]);
        assert!(g.contains_ball(3.2));
        assert!(!g.contains_ball(3.3));
    }

    #[test]
    fn resolving_grid_meets_rule() {
        for &eps in &[0.125, 0.0625, 0.03125, 0.015625] {
            let g = DomainGrid::resolving(3.0, eps, 8, 64).unwrap();
            assert!(g.h() <= eps / 8.0 * (1.0 + 1e-12));
            assert_eq!(g.n() % 64, 0);
        }
        assert_eq!(DomainGrid::resolving(3.0, 0.125, 8, 64).unwrap().n(), 384);
    }
}
