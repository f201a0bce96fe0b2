//! Shared fixtures for the benchmarks.

use gkp_core::{Exponent, GkpParams, Grid2D, Lambda};

/// Supercritical gKP I on an `n × n` box of half-width 5, sized like the
/// blow-up runs.
pub fn blow_up_params(n: usize) -> GkpParams {
    let grid = Grid2D::new(n, n, 5.0, 5.0).expect("power-of-two grid");
    let exponent = Exponent::new(2, 1).expect("integer exponent");
    GkpParams::with_steps(exponent, Lambda::KpI, grid, 1000, 0.01).expect("valid parameters")
}

/// Samples of `exp(C) (t* - t)^c` on `[0, t_last]`.
pub fn power_law_trace(points: usize, offset: f64, exponent: f64, t_star: f64) -> (Vec<f64>, Vec<f64>) {
    let t_last = 0.999 * t_star;
    let times: Vec<f64> = (0..points).map(|i| t_last * i as f64 / (points - 1) as f64).collect();
    let values = times.iter().map(|t| (offset + exponent * (t_star - t).ln()).exp()).collect();
    (times, values)
}
