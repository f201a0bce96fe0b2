use num_complex::Complex64;

use super::Grid2D;
use crate::error::{Error, Result};

/// Physical samples, row-major with `y` outer and `x` inner.
#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    grid: Grid2D,
    values: Vec<f64>,
}

impl RealField {
    /// Wraps samples, rejecting wrong lengths and non-finite values.
    pub fn new(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.real_len() {
            return Err(Error::GridMismatch);
        }
        let field = Self { grid, values };
        field.check_finite()?;
        Ok(field)
    }

    /// Same as [`RealField::new`] without the finiteness scan.
    pub(crate) fn from_raw(grid: Grid2D, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.real_len());
        Self { grid, values }
    }

    pub fn zeros(grid: Grid2D) -> Self {
        Self::from_raw(grid, vec![0.0; grid.real_len()])
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.real_len());
        for iy in 0..grid.ny() {
            let y = grid.y(iy);
            for ix in 0..grid.nx() {
                values.push(f(grid.x(ix), y));
            }
        }
        Self::from_raw(grid, values)
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.grid.nx() + ix]
    }

    pub fn row(&self, iy: usize) -> &[f64] {
        let nx = self.grid.nx();
        &self.values[iy * nx..(iy + 1) * nx]
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(Error::InvalidField { index }),
            None => Ok(()),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Riemann-sum approximation of `∫ f dx dy`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    /// Riemann-sum approximation of `∫ f² dx dy`.
    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_area()
    }

    /// Largest `|f(x, y) - f(x, -y)|`, relative to `max |f|`.
    pub fn y_parity_defect(&self) -> f64 {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let mut defect: f64 = 0.0;
        for iy in 1..ny {
            let mirror = ny - iy;
            for ix in 0..nx {
                defect = defect.max((self.at(ix, iy) - self.at(ix, mirror)).abs());
            }
        }
        defect / scale
    }
}

/// Half-spectrum Fourier coefficients of a real field (`kx`-major layout).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: Grid2D,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(grid: Grid2D, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.spectral_len() {
            return Err(Error::GridMismatch);
        }
        Ok(Self { grid, coeffs })
    }

    pub(crate) fn from_raw(grid: Grid2D, coeffs: Vec<Complex64>) -> Self {
        debug_assert_eq!(coeffs.len(), grid.spectral_len());
        Self { grid, coeffs }
    }

    pub fn zeros(grid: Grid2D) -> Self {
        Self::from_raw(grid, vec![Complex64::new(0.0, 0.0); grid.spectral_len()])
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        ix * self.grid.ny() + iy
    }

    pub fn get(&self, ix: usize, iy: usize) -> Complex64 {
        self.coeffs[self.index(ix, iy)]
    }

    pub fn set(&mut self, ix: usize, iy: usize, value: Complex64) {
        let i = self.index(ix, iy);
        self.coeffs[i] = value;
    }

    /// Coefficients on the `kx = 0` line.
    pub fn kx_zero_line(&self) -> &[Complex64] {
        &self.coeffs[..self.grid.ny()]
    }

    /// Zeroes the `kx = 0` line, i.e. removes the x-mean of every `y` slice.
    pub fn project_zero_x_mean(&mut self) {
        let ny = self.grid.ny();
        self.coeffs[..ny].fill(Complex64::new(0.0, 0.0));
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.norm_sqr())).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Largest violation of `F(kx, -ky) = conj F(kx, ky)` on the self-conjugate
    /// columns `kx = 0` and `kx = nx/2`, relative to `max |F|`.
    pub fn hermitian_defect(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let ny = self.grid.ny();
        let mut defect: f64 = 0.0;
        for ix in [0, self.grid.x_nyquist_column()] {
            for iy in 0..ny {
                let a = self.get(ix, iy);
                let b = self.get(ix, self.grid.mirror_row(iy)).conj();
                defect = defect.max((a - b).norm());
            }
        }
        defect / scale
    }

    /// Weight of column `ix` when expanding the half spectrum to the full one.
    #[inline]
    pub(crate) fn column_weight(&self, ix: usize) -> f64 {
        if ix == 0 || ix == self.grid.x_nyquist_column() {
            1.0
        } else {
            2.0
        }
    }

    /// `∫ f² dx dy` of the represented real field, by Parseval.
    pub fn norm_sq(&self) -> f64 {
        let ny = self.grid.ny();
        let sum: f64 = self
            .coeffs
            .chunks_exact(ny)
            .enumerate()
            .map(|(ix, col)| self.column_weight(ix) * col.iter().map(|c| c.norm_sqr()).sum::<f64>())
            .sum();
        sum * self.grid.cell_area() / self.grid.real_len() as f64
    }

    /// `∫ f² dx dy` after multiplying mode `(kx, ky)` by `weight(kx, ky)`
    /// (a real, non-negative symbol such as `kx²`).
    pub fn weighted_norm_sq(&self, weight: impl Fn(f64, f64) -> f64) -> f64 {
        let ny = self.grid.ny();
        let ky: Vec<f64> = self.grid.ky_table();
        let sum: f64 = self
            .coeffs
            .chunks_exact(ny)
            .enumerate()
            .map(|(ix, col)| {
                let kx = self.grid.kx(ix);
                self.column_weight(ix)
                    * col
                        .iter()
                        .zip(&ky)
                        .map(|(c, &k)| weight(kx, k) * c.norm_sqr())
                        .sum::<f64>()
            })
            .sum();
        sum * self.grid.cell_area() / self.grid.real_len() as f64
    }

    /// `∫ f g dx dy` for the real fields represented by `self` and `other`.
    pub fn inner(&self, other: &SpectralField) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let ny = self.grid.ny();
        let sum: f64 = self
            .coeffs
            .chunks_exact(ny)
            .zip(other.coeffs.chunks_exact(ny))
            .enumerate()
            .map(|(ix, (a, b))| {
                self.column_weight(ix)
                    * a.iter().zip(b).map(|(p, q)| (p * q.conj()).re).sum::<f64>()
            })
            .sum();
        Ok(sum * self.grid.cell_area() / self.grid.real_len() as f64)
    }

    /// Multiplies every mode by `symbol(ix, iy)`.
    pub fn map_modes(&self, symbol: impl Fn(usize, usize) -> Complex64) -> SpectralField {
        let ny = self.grid.ny();
        let mut out = self.coeffs.clone();
        for (ix, col) in out.chunks_exact_mut(ny).enumerate() {
            for (iy, c) in col.iter_mut().enumerate() {
                *c *= symbol(ix, iy);
            }
        }
        SpectralField::from_raw(self.grid, out)
    }

    pub fn scale(&mut self, s: f64) {
        for c in &mut self.coeffs {
            *c *= s;
        }
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &SpectralField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b * s;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_samples() {
        let g = Grid2D::new(8, 8, 1.0, 1.0).unwrap();
        let mut v = vec![0.0; 64];
        v[17] = f64::NAN;
        assert_eq!(RealField::new(g, v), Err(Error::InvalidField { index: 17 }));
        assert_eq!(RealField::new(g, vec![0.0; 63]), Err(Error::GridMismatch));
    }

    #[test]
    fn parity_defect_detects_odd_part() {
        let g = Grid2D::new(16, 16, 1.0, 1.0).unwrap();
        let even = RealField::from_fn(g, |x, y| x.sin() * y.cos());
        assert!(even.y_parity_defect() < 1e-15);
        let odd = RealField::from_fn(g, |x, y| x.cos() * y.sin());
        assert!(odd.y_parity_defect() > 0.5);
    }
}
