use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cubic periodic box `[-L, L)^dim` sampled with `n` points per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    /// Half-width `L` of the box.
    pub extent: f64,
    /// Points per axis.
    pub points: usize,
}

impl GridSpec {
    pub fn new(dim: usize, extent: f64, points: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidParameter(format!("grid dimension {dim} not in 1..=3")));
        }
        if !(extent.is_finite() && extent > 0.0) {
            return Err(Error::InvalidParameter(format!("grid extent {extent} must be positive")));
        }
        if points < 8 || !points.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "grid points {points} must be a power of two >= 8"
            )));
        }
        Ok(GridSpec { dim, extent, points })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.extent / self.points as f64
    }

    /// `h^dim`, the quadrature weight.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of node `i` along any axis.
    pub fn coord(&self, i: usize) -> f64 {
        -self.extent + i as f64 * self.spacing()
    }

    pub fn axis_coords(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.coord(i)).collect()
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.points as i64;
        let dk = std::f64::consts::PI / self.extent;
        (0..n).map(|i| if i < n / 2 { i } else { i - n } as f64 * dk).collect()
    }

    /// Multi-index of flat index `idx` (row-major, last axis fastest).
    pub fn unravel(&self, mut idx: usize) -> [usize; 3] {
        let mut out = [0usize; 3];
        for axis in (0..self.dim).rev() {
            out[axis] = idx % self.points;
            idx /= self.points;
        }
        out
    }

    pub fn ravel(&self, multi: &[usize]) -> usize {
        multi[..self.dim].iter().fold(0, |acc, &i| acc * self.points + i)
    }

    /// Physical position of flat index `idx`.
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let m = self.unravel(idx);
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = self.coord(m[a]);
        }
        x
    }

    /// Wrap a displacement into `[-L, L)`.
    pub fn wrap(&self, d: f64) -> f64 {
        let period = 2.0 * self.extent;
        let mut w = (d + self.extent).rem_euclid(period) - self.extent;
        if w >= self.extent {
            w -= period;
        }
        w
    }

    /// Same box, refined or coarsened sampling.
    pub fn with_points(&self, points: usize) -> Result<Self> {
        GridSpec::new(self.dim, self.extent, points)
    }

    pub fn same_as(&self, other: &GridSpec) -> bool {
        self.dim == other.dim && self.points == other.points && self.extent == other.extent
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::new(2, 1.0, 12).is_err());
        assert!(GridSpec::new(2, 1.0, 4).is_err());
        assert!(GridSpec::new(4, 1.0, 16).is_err());
        assert!(GridSpec::new(1, 0.0, 16).is_err());
    }

    #[test]
    fn ravel_roundtrip() {
        let g = GridSpec::new(3, 2.0, 8).unwrap();
        for idx in [0, 7, 8, 63, 64, 511] {
            assert_eq!(g.ravel(&g.unravel(idx)), idx);
        }
        assert_eq!(g.position(0), [-2.0, -2.0, -2.0]);
    }

    #[test]
    fn wrap_into_box() {
        let g = GridSpec::new(1, 1.0, 8).unwrap();
        assert_eq!(g.wrap(0.5), 0.5);
        assert!((g.wrap(1.5) + 0.5).abs() < 1e-15);
        assert!((g.wrap(-1.5) - 0.5).abs() < 1e-15);
        assert_eq!(g.wrap(1.0), -1.0);
    }
}
