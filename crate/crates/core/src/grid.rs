//! Periodic grid on the flat torus `[-1,1]^N`, `N ∈ {2,3}`.

use crate::error::{CoreError, Result};
use crate::scalar::{r, Real};
use serde::{Deserialize, Serialize};

pub const MAX_DIM: usize = 3;

/// Uniform collocation grid on the torus, identical resolution per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodicGrid {
    dim: usize,
    resolution: usize,
}

impl PeriodicGrid {
    pub fn new(dim: usize, resolution: usize) -> Result<Self> {
        if dim < 2 || dim > MAX_DIM {
            return Err(CoreError::InvalidInput(format!(
                "dimension must be 2 or 3, got {dim}"
            )));
        }
        if resolution < 8 || !resolution.is_power_of_two() {
            return Err(CoreError::InvalidInput(format!(
                "resolution must be a power of two >= 8, got {resolution}"
            )));
        }
        Ok(Self { dim, resolution })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Number of collocation nodes.
    #[inline]
    pub fn len(&self) -> usize {
        self.resolution.pow(self.dim as u32)
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Axis sizes padded to `MAX_DIM` (trailing axes have extent 1).
    #[inline]
    pub fn sizes(&self) -> [usize; MAX_DIM] {
        let mut s = [1usize; MAX_DIM];
        for item in s.iter_mut().take(self.dim) {
            *item = self.resolution;
        }
        s
    }

    /// Grid spacing per axis (period is 2).
    pub fn spacing<R: Real>(&self) -> R {
        r::<R>(2.0) / R::from_usize(self.resolution).unwrap()
    }

    /// Volume of one cell.
    pub fn cell_volume<R: Real>(&self) -> R {
        self.spacing::<R>().powi(self.dim as i32)
    }

    /// Total volume `|Ω| = 2^N`.
    pub fn volume<R: Real>(&self) -> R {
        r::<R>(2.0).powi(self.dim as i32)
    }

    /// Row-major linear index from per-axis indices.
    #[inline]
    pub fn index(&self, coords: [usize; MAX_DIM]) -> usize {
        let n = self.resolution;
        match self.dim {
            2 => coords[0] * n + coords[1],
            _ => (coords[0] * n + coords[1]) * n + coords[2],
        }
    }

    /// Per-axis indices from row-major linear index.
    #[inline]
    pub fn coords(&self, mut idx: usize) -> [usize; MAX_DIM] {
        let n = self.resolution;
        let mut c = [0usize; MAX_DIM];
        if self.dim == 3 {
            c[2] = idx % n;
            idx /= n;
        }
        c[1] = idx % n;
        c[0] = idx / n;
        c
    }

    /// Physical coordinate of a node on axis `axis`.
    #[inline]
    pub fn coordinate<R: Real>(&self, index_on_axis: usize) -> R {
        -R::one() + self.spacing::<R>() * R::from_usize(index_on_axis).unwrap()
    }

    /// Node position, padded with zeros beyond `dim`.
    pub fn node<R: Real>(&self, idx: usize) -> [R; MAX_DIM] {
        let c = self.coords(idx);
        let mut x = [R::zero(); MAX_DIM];
        for a in 0..self.dim {
            x[a] = self.coordinate(c[a]);
        }
        x
    }

    /// Signed integer frequency for a DFT bin on one axis, in `[-n/2, n/2)`.
    #[inline]
    pub fn signed_freq(&self, bin: usize) -> i64 {
        let n = self.resolution as i64;
        let k = bin as i64;
        if k <= n / 2 {
            if k == n / 2 {
                -(n / 2)
            } else {
                k
            }
        } else {
            k - n
        }
    }

    pub fn check_same(&self, other: &PeriodicGrid) -> Result<()> {
        if self != other {
            return Err(CoreError::GridMismatch(format!(
                "{}^{} vs {}^{}",
                self.resolution, self.dim, other.resolution, other.dim
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_dimensions() {
        assert!(PeriodicGrid::new(1, 16).is_err());
        assert!(PeriodicGrid::new(4, 16).is_err());
        assert!(PeriodicGrid::new(2, 12).is_err());
        assert!(PeriodicGrid::new(2, 4).is_err());
    }

    #[test]
    fn cell_volume_matches_definition() {
        let g = PeriodicGrid::new(2, 16).unwrap();
        let dv: f64 = g.cell_volume();
        assert!((dv - (2.0f64 / 16.0).powi(2)).abs() < 1e-15);
        let g3 = PeriodicGrid::new(3, 8).unwrap();
        let dv3: f64 = g3.cell_volume();
        assert!((dv3 - 0.25f64.powi(3)).abs() < 1e-15);
    }

    #[test]
    fn index_roundtrip() {
        let g = PeriodicGrid::new(3, 8).unwrap();
        for idx in [0usize, 1, 7, 8, 63, 100, 511] {
            assert_eq!(g.index(g.coords(idx)), idx);
        }
    }

    #[test]
    fn signed_frequencies() {
        let g = PeriodicGrid::new(2, 8).unwrap();
        let freqs: Vec<i64> = (0..8).map(|b| g.signed_freq(b)).collect();
        assert_eq!(freqs, vec![0, 1, 2, 3, -4, -3, -2, -1]);
    }
}
