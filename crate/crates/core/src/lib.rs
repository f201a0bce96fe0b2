//! Fourier spectral solvers for the generalized Kadomtsev-Petviashvili
//! equations
//!
//! ```text
//! u_t + u^n u_x + u_xxx + λ ∂x⁻¹ u_yy = 0,    λ = -1 (gKP I), +1 (gKP II)
//! ```
//!
//! on a doubly periodic box, together with the tooling used to study
//! finite-time blow-up of their solutions:
//!
//! * [`spectral`]: grids, real-to-complex transforms, spectral derivatives
//! * [`etd`]: fourth-order exponential time differencing with contour
//!   evaluated φ-function weights
//! * [`gkp`]: direct integration in the antiderivative (`w`) formulation
//! * [`rescaled`]: dynamically rescaled integration with an adaptive scale
//!   factor `L(τ)`
//! * [`diagnostics`]: conserved quantities, norms, minimum tracking and
//!   resolution indicators
//! * [`fit`]: Nelder-Mead fitting of norm divergence rates and regime
//!   classification

pub mod diagnostics;
pub mod error;
pub mod etd;
pub mod fit;
pub mod gkp;
pub mod rescaled;
pub mod spectral;

pub use diagnostics::{DiagnosticsRecord, Monitor, NormId, NormTrace};
pub use error::{Error, Result};
pub use etd::{ContourConfig, DiagonalOperator, EtdCoefficients, NonlinearTerm};
pub use fit::{FitResult, RatePrediction, Regime, SimplexConfig, Verdict};
pub use gkp::{
    DirectSolver, Exponent, GkpParams, InitialData, Lambda, Observer, RunOutcome, SolverState,
    Termination,
};
pub use rescaled::{
    ClosureMode, RescaleClosure, RescaledOutcome, RescaledParams, RescaledSolver, RescaledState,
    RescaledTermination,
};
pub use spectral::{Fft2d, Grid2D, RealField, SpectralField};

pub use num_complex::Complex64;
