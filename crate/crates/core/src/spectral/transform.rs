use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

use super::{Grid2D, RealField, SpectralField};
use crate::error::{Error, Result};

/// Relative Hermitian defect tolerated by [`Fft2d::inverse`].
pub const ASYMMETRY_TOLERANCE: f64 = 1e-9;

/// Planned 2D real-to-complex transform pair for one grid.
///
/// Rows are transformed with a real FFT along `x`, then the `nx/2 + 1`
/// resulting columns with a complex FFT along `y`. Work is split by rows
/// and columns only, so results do not depend on the rayon thread count.
#[derive(Clone)]
pub struct Fft2d {
    grid: Grid2D,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    col_forward: Arc<dyn Fft<f64>>,
    col_inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Fft2d {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fft2d").field("grid", &self.grid).finish()
    }
}

impl Fft2d {
    pub fn new(grid: Grid2D) -> Self {
        let mut real_planner = RealFftPlanner::<f64>::new();
        let mut planner = FftPlanner::<f64>::new();
        Self {
            grid,
            r2c: real_planner.plan_fft_forward(grid.nx()),
            c2r: real_planner.plan_fft_inverse(grid.nx()),
            col_forward: planner.plan_fft_forward(grid.ny()),
            col_inverse: planner.plan_fft_inverse(grid.ny()),
        }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    /// Discrete Fourier coefficients of `f`. Errors on non-finite samples.
    pub fn forward(&self, f: &RealField) -> Result<SpectralField> {
        if f.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        f.check_finite()?;
        Ok(self.forward_values(f.values()))
    }

    /// Forward transform of raw row-major samples; no finiteness check.
    pub fn forward_values(&self, values: &[f64]) -> SpectralField {
        self.forward_values_with(values, |_, _| {})
    }

    /// [`Self::forward_values`] with `post(ix, column)` applied to every
    /// `kx` column right after its transform.
    pub fn forward_values_with(
        &self,
        values: &[f64],
        post: impl Fn(usize, &mut [Complex64]) + Sync,
    ) -> SpectralField {
        let (nx, ny, nh) = (self.grid.nx(), self.grid.ny(), self.grid.nkx());
        assert_eq!(values.len(), nx * ny);
        let mut rows = vec![Complex64::new(0.0, 0.0); nh * ny];
        rows.par_chunks_mut(nh)
            .zip(values.par_chunks(nx))
            .for_each_init(
                || (vec![0.0; nx], self.r2c.make_scratch_vec()),
                |(buf, scratch), (out, row)| {
                    buf.copy_from_slice(row);
                    self.r2c
                        .process_with_scratch(buf, out, scratch)
                        .expect("buffer sizes match the plan");
                },
            );
        let mut cols = transpose(&rows, ny, nh);
        drop(rows);
        let scratch_len = self.col_forward.get_inplace_scratch_len();
        cols.par_chunks_mut(ny).enumerate().for_each_init(
            || vec![Complex64::new(0.0, 0.0); scratch_len],
            |scratch, (ix, col)| {
                self.col_forward.process_with_scratch(col, scratch);
                post(ix, col);
            },
        );
        SpectralField::from_raw(self.grid, cols)
    }

    /// Inverse transform; rejects spectra that are not Hermitian on the
    /// self-conjugate columns beyond [`ASYMMETRY_TOLERANCE`].
    pub fn inverse(&self, spectrum: &SpectralField) -> Result<RealField> {
        if spectrum.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let defect = spectrum.hermitian_defect();
        if defect > ASYMMETRY_TOLERANCE {
            return Err(Error::Asymmetry {
                defect,
                tolerance: ASYMMETRY_TOLERANCE,
            });
        }
        Ok(self.inverse_trusted(spectrum))
    }

    /// Inverse transform without the symmetry check. Any anti-Hermitian part
    /// on the self-conjugate columns is discarded.
    pub fn inverse_trusted(&self, spectrum: &SpectralField) -> RealField {
        let values = self.inverse_coeffs(spectrum.coeffs().to_vec());
        RealField::from_raw(self.grid, values)
    }

    /// [`Self::inverse_trusted`] reusing the storage of `spectrum`.
    pub fn inverse_owned(&self, spectrum: SpectralField) -> RealField {
        assert_eq!(spectrum.grid(), &self.grid);
        RealField::from_raw(self.grid, self.inverse_coeffs(spectrum.into_coeffs()))
    }

    /// Inverse transform consuming a coefficient buffer in the half-spectrum layout.
    pub fn inverse_coeffs(&self, cols: Vec<Complex64>) -> Vec<f64> {
        self.inverse_coeffs_with(cols, |_, _| {})
    }

    /// [`Self::inverse_coeffs`] with `pre(ix, column)` applied to every `kx`
    /// column before its transform.
    pub fn inverse_coeffs_with(
        &self,
        mut cols: Vec<Complex64>,
        pre: impl Fn(usize, &mut [Complex64]) + Sync,
    ) -> Vec<f64> {
        let (nx, ny, nh) = (self.grid.nx(), self.grid.ny(), self.grid.nkx());
        assert_eq!(cols.len(), nh * ny);
        let scratch_len = self.col_inverse.get_inplace_scratch_len();
        cols.par_chunks_mut(ny).enumerate().for_each_init(
            || vec![Complex64::new(0.0, 0.0); scratch_len],
            |scratch, (ix, col)| {
                pre(ix, col);
                self.col_inverse.process_with_scratch(col, scratch);
            },
        );
        let mut rows = transpose(&cols, nh, ny);
        drop(cols);
        let norm = 1.0 / (nx * ny) as f64;
        let mut values = vec![0.0; nx * ny];
        values
            .par_chunks_mut(nx)
            .zip(rows.par_chunks_mut(nh))
            .for_each_init(
                || self.c2r.make_scratch_vec(),
                |scratch, (out, row)| {
                    row[0].im = 0.0;
                    row[nh - 1].im = 0.0;
                    self.c2r
                        .process_with_scratch(row, out, scratch)
                        .expect("buffer sizes match the plan");
                    for v in out.iter_mut() {
                        *v *= norm;
                    }
                },
            );
        values
    }
}

/// Transpose of a `rows × cols` row-major matrix.
fn transpose<T: Copy>(src: &[T], rows: usize, cols: usize) -> Vec<T> {
    debug_assert_eq!(src.len(), rows * cols);
    let mut dst = Vec::with_capacity(rows * cols);
    for c in 0..cols {
        dst.extend(src[c..].iter().step_by(cols).take(rows));
    }
    dst
}
