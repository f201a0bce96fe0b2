//! Periodic grids, real-to-complex transforms and Fourier multipliers.
//!
//! Spectra are stored as the non-redundant half of the discrete Fourier
//! transform of a real field: `nx/2 + 1` columns in `kx` (all non-negative)
//! by `ny` rows in `ky` (standard FFT ordering). The storage is `kx`-major,
//! so every `kx = const` line is a contiguous block of `ny` coefficients.
//! The forward transform is unnormalized and the inverse carries the factor
//! `1/(nx·ny)`.

mod field;
mod grid;
mod ops;
mod transform;

pub use field::{RealField, SpectralField};
pub use grid::Grid2D;
pub use ops::{
    antiderivative_x, dealias_two_thirds, default_regularization, derivative_x, derivative_y,
    evaluate_at, multiply_ikx, PointEvaluator,
};
pub use transform::Fft2d;
pub(crate) use ops::{ikx_column, scale_column};
