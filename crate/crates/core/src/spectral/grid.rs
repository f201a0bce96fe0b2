use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Doubly periodic box `[-π·scale_x, π·scale_x) × [-π·scale_y, π·scale_y)`
/// sampled on `nx × ny` equispaced points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    nx: usize,
    ny: usize,
    scale_x: f64,
    scale_y: f64,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, scale_x: f64, scale_y: f64) -> Result<Self> {
        for (name, n) in [("nx", nx), ("ny", ny)] {
            if n < 8 || !n.is_power_of_two() {
                return Err(Error::InvalidGrid(format!(
                    "{name} = {n} must be a power of two >= 8"
                )));
            }
        }
        for (name, s) in [("scale_x", scale_x), ("scale_y", scale_y)] {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::InvalidGrid(format!("{name} = {s} must be positive")));
            }
        }
        Ok(Self {
            nx,
            ny,
            scale_x,
            scale_y,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn scale_x(&self) -> f64 {
        self.scale_x
    }

    pub fn scale_y(&self) -> f64 {
        self.scale_y
    }

    /// Number of stored `kx` columns, `nx/2 + 1`.
    pub fn nkx(&self) -> usize {
        self.nx / 2 + 1
    }

    pub fn real_len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn spectral_len(&self) -> usize {
        self.nkx() * self.ny
    }

    pub fn dx(&self) -> f64 {
        2.0 * PI * self.scale_x / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        2.0 * PI * self.scale_y / self.ny as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    pub fn x0(&self) -> f64 {
        -PI * self.scale_x
    }

    pub fn y0(&self) -> f64 {
        -PI * self.scale_y
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x0() + 2.0 * PI * self.scale_x * j as f64 / self.nx as f64
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y0() + 2.0 * PI * self.scale_y * j as f64 / self.ny as f64
    }

    /// Grid row holding `y = 0`.
    pub fn y_axis_row(&self) -> usize {
        self.ny / 2
    }

    /// Wavenumber of stored column `ix` (`0 ..= nx/2`).
    pub fn kx(&self, ix: usize) -> f64 {
        ix as f64 / self.scale_x
    }

    /// Signed mode index of row `iy` in FFT ordering; the Nyquist row maps to `-ny/2`.
    pub fn ky_mode(&self, iy: usize) -> i64 {
        if iy < self.ny / 2 {
            iy as i64
        } else {
            iy as i64 - self.ny as i64
        }
    }

    pub fn ky(&self, iy: usize) -> f64 {
        self.ky_mode(iy) as f64 / self.scale_y
    }

    pub fn kx_table(&self) -> Vec<f64> {
        (0..self.nkx()).map(|i| self.kx(i)).collect()
    }

    pub fn ky_table(&self) -> Vec<f64> {
        (0..self.ny).map(|i| self.ky(i)).collect()
    }

    /// Smallest nonzero `|kx|`.
    pub fn min_kx(&self) -> f64 {
        1.0 / self.scale_x
    }

    pub fn x_nyquist_column(&self) -> usize {
        self.nx / 2
    }

    pub fn y_nyquist_row(&self) -> usize {
        self.ny / 2
    }

    /// Row index mirroring `iy` under `ky -> -ky`.
    pub fn mirror_row(&self, iy: usize) -> usize {
        (self.ny - iy) % self.ny
    }

    /// Same box with every sample count divided by `factor`.
    pub fn coarsened(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !factor.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "scale factor {factor} must be a power of two"
            )));
        }
        Self::new(self.nx / factor, self.ny / factor, self.scale_x, self.scale_y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(Grid2D::new(4, 16, 1.0, 1.0).is_err());
        assert!(Grid2D::new(24, 16, 1.0, 1.0).is_err());
        assert!(Grid2D::new(16, 16, 0.0, 1.0).is_err());
        assert!(Grid2D::new(16, 16, 1.0, f64::NAN).is_err());
        assert!(Grid2D::new(8, 8, 1.0, 1.0).is_ok());
    }

    #[test]
    fn wavenumber_tables() {
        let g = Grid2D::new(8, 8, 2.0, 0.5).unwrap();
        assert_eq!(g.kx_table(), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(
            g.ky_table(),
            vec![0.0, 2.0, 4.0, 6.0, -8.0, -6.0, -4.0, -2.0]
        );
        assert_eq!(g.kx(0), 0.0);
        assert_eq!(g.mirror_row(1), 7);
        assert_eq!(g.mirror_row(0), 0);
        assert_eq!(g.mirror_row(4), 4);
    }

    #[test]
    fn sample_points() {
        let g = Grid2D::new(16, 8, 1.0, 3.0).unwrap();
        assert!((g.x(0) + PI).abs() < 1e-15);
        assert!((g.x(8)).abs() < 1e-15);
        assert_eq!(g.y(g.y_axis_row()), 0.0);
        assert!((g.dx() * 16.0 - 2.0 * PI).abs() < 1e-14);
    }
}
