//! Uniform Cartesian grid over the reference box B = [-hw, hw]^dim.

use super::SolverError;
use crate::geometry::Vec3;

#[derive(Debug, Clone)]
pub struct Grid {
    pub dim: usize,
    /// Cells per axis; n[2] = 1 in 2D.
    pub n: [usize; 3],
    pub h: f64,
    pub half_width: f64,
}

impl Grid {
    pub fn new(dim: usize, cells_per_axis: usize, half_width: f64) -> Result<Self, SolverError> {
        if dim != 2 && dim != 3 {
            return Err(SolverError::BadConfig(format!("dim must be 2 or 3, got {dim}")));
        }
        if cells_per_axis < 16 {
            return Err(SolverError::BadConfig(format!(
                "cells per axis must be at least 16, got {cells_per_axis}"
            )));
        }
        if !(half_width > 0.0) {
            return Err(SolverError::BadConfig(format!(
                "box half-width must be positive, got {half_width}"
            )));
        }
        let mut n = [cells_per_axis; 3];
        if dim == 2 {
            n[2] = 1;
        }
        Ok(Self { dim, n, h: 2.0 * half_width / cells_per_axis as f64, half_width })
    }

    #[inline]
    pub fn cells(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    #[inline]
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    /// Face area in one flux direction.
    #[inline]
    pub fn face_area(&self) -> f64 {
        self.h.powi(self.dim as i32 - 1)
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.n[1] + j) * self.n[0] + i
    }

    #[inline]
    pub fn unflatten(&self, c: usize) -> (usize, usize, usize) {
        let i = c % self.n[0];
        let j = (c / self.n[0]) % self.n[1];
        let k = c / (self.n[0] * self.n[1]);
        (i, j, k)
    }

    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        match axis {
            0 => 1,
            1 => self.n[0],
            _ => self.n[0] * self.n[1],
        }
    }

    #[inline]
    pub fn cell_center(&self, c: usize) -> Vec3 {
        let (i, j, k) = self.unflatten(c);
        let o = -self.half_width + 0.5 * self.h;
        [
            o + i as f64 * self.h,
            o + j as f64 * self.h,
            if self.dim == 3 { o + k as f64 * self.h } else { 0.0 },
        ]
    }

    /// Index pair for a centered difference along `axis`, one-sided at walls.
    /// Returns (low cell, high cell, span in units of h).
    #[inline]
    pub fn neighbor_pair(&self, i: usize, j: usize, k: usize, axis: usize) -> (usize, usize, f64) {
        let pos = [i, j, k][axis];
        let c = self.idx(i, j, k);
        let s = self.stride(axis);
        if pos == 0 {
            (c, c + s, 1.0)
        } else if pos == self.n[axis] - 1 {
            (c - s, c, 1.0)
        } else {
            (c - s, c + s, 2.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_grids_and_bad_dims() {
        assert!(Grid::new(2, 8, 1.0).is_err());
        assert!(Grid::new(4, 32, 1.0).is_err());
        assert!(Grid::new(2, 32, -1.0).is_err());
    }

    #[test]
    fn indexing_round_trip() {
        let g = Grid::new(3, 16, 2.0).unwrap();
        for c in [0, 1, 17, 4095, 2048] {
            let (i, j, k) = g.unflatten(c);
            assert_eq!(g.idx(i, j, k), c);
        }
        assert_eq!(g.cells(), 16 * 16 * 16);
        let center = g.cell_center(g.idx(8, 8, 8));
        assert!(center[0].abs() < g.h);
    }
}
