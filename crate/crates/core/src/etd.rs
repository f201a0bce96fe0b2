//! Fourth-order exponential time differencing (Cox-Matthews ETDRK4) for
//! semilinear systems `u_t = L u + N(u, t)` with a diagonal linear part.
//!
//! The step weights are combinations of the φ-functions
//! `φ_i(z) = 1/(i-1)! ∫₀¹ e^{(1-s)z} s^{i-1} ds`, whose closed forms lose all
//! accuracy to cancellation as `z → 0`. For `|hL| <= 1` every weight is
//! therefore evaluated as the mean of its closed form over a circle of
//! points around `hL` in the complex plane; larger arguments use the closed
//! forms directly.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{Grid2D, SpectralField};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Arguments with modulus above this use the closed forms.
pub const CLOSED_FORM_THRESHOLD: f64 = 1.0;

/// Quadrature circle used for small arguments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourConfig {
    pub points: usize,
    pub radius: f64,
}

impl Default for ContourConfig {
    fn default() -> Self {
        Self {
            points: 32,
            radius: 1.0,
        }
    }
}

impl ContourConfig {
    pub fn validate(&self) -> Result<()> {
        if self.points < 16 || self.points % 2 != 0 {
            return Err(Error::param(
                "contour points",
                format!("{} must be even and >= 16", self.points),
            ));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::param("contour radius", format!("{}", self.radius)));
        }
        Ok(())
    }

    /// Offsets `r·e^{iθ_j}` with `θ_j = 2π(j + 1/2)/M`. The half-step offset
    /// keeps every node off the real and imaginary axes, so for purely
    /// imaginary centers no node comes closer than `r·sin(π/M)` to the origin.
    fn nodes(&self) -> Vec<Complex64> {
        let m = self.points as f64;
        (0..self.points)
            .map(|j| Complex64::from_polar(self.radius, 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / m))
            .collect()
    }
}

fn phi_closed(z: Complex64, i: u32) -> Complex64 {
    let ez = z.exp();
    match i {
        1 => (ez - 1.0) / z,
        2 => (ez - 1.0 - z) / (z * z),
        _ => (ez - 1.0 - z - z * z * 0.5) / (z * z * z),
    }
}

fn contour_mean(nodes: &[Complex64], center: Complex64, f: impl Fn(Complex64) -> Complex64) -> Complex64 {
    let sum: Complex64 = nodes.iter().map(|&w| f(center + w)).sum();
    sum / nodes.len() as f64
}

/// `φ_i(z)` for `i ∈ {1, 2, 3}`, cancellation-safe near the origin.
pub fn phi(z: Complex64, i: u32) -> Result<Complex64> {
    phi_with(z, i, &ContourConfig::default())
}

pub fn phi_with(z: Complex64, i: u32, contour: &ContourConfig) -> Result<Complex64> {
    if !(1..=3).contains(&i) {
        return Err(Error::param("phi index", format!("{i} not in 1..=3")));
    }
    contour.validate()?;
    if z.norm() > CLOSED_FORM_THRESHOLD {
        return Ok(phi_closed(z, i));
    }
    let value = contour_mean(&contour.nodes(), z, |w| phi_closed(w, i));
    Ok(real_if_real_argument(z, value))
}

fn real_if_real_argument(z: Complex64, value: Complex64) -> Complex64 {
    if z.im == 0.0 {
        Complex64::new(value.re, 0.0)
    } else {
        value
    }
}

/// Diagonal linear operator: one complex symbol per stored mode.
///
/// Modes flagged inactive are frozen at zero by the integrator; the gKP
/// solvers use this for lines whose coefficients are identically zero by
/// construction but whose symbol would overflow `exp(hL)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalOperator {
    grid: Grid2D,
    symbol: Vec<Complex64>,
    active: Vec<bool>,
}

impl DiagonalOperator {
    pub fn new(grid: Grid2D, symbol: Vec<Complex64>) -> Result<Self> {
        let active = vec![true; symbol.len()];
        Self::with_active(grid, symbol, active)
    }

    pub fn with_active(grid: Grid2D, symbol: Vec<Complex64>, active: Vec<bool>) -> Result<Self> {
        if symbol.len() != grid.spectral_len() || active.len() != symbol.len() {
            return Err(Error::GridMismatch);
        }
        if let Some(index) = symbol.iter().position(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::InvalidField { index });
        }
        Ok(Self {
            grid,
            symbol,
            active,
        })
    }

    pub fn zero(grid: Grid2D) -> Self {
        Self::new(grid, vec![ZERO; grid.spectral_len()]).expect("zero symbol is finite")
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn symbol(&self) -> &[Complex64] {
        &self.symbol
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }
}

/// Per-mode ETDRK4 weights for a fixed step `h`.
///
/// With `z = hL`: `e = e^z`, `e2 = e^{z/2}`, `q = h(e^{z/2} - 1)/z`, and
/// ```text
/// f1 = h [-4 - z + e^z (4 - 3z + z²)] / z³
/// f2 = 2h [2 + z + e^z (z - 2)] / z³
/// f3 = h [-4 - 3z - z² + e^z (4 - z)] / z³
/// ```
/// so that as `z → 0` the update reduces to classical RK4:
/// `q → h/2`, `f1, f3 → h/6`, `f2 → h/3` (applied to each middle stage).
#[derive(Debug, Clone, PartialEq)]
pub struct EtdCoefficients {
    pub h: f64,
    grid: Grid2D,
    pub e: Vec<Complex64>,
    pub e2: Vec<Complex64>,
    pub q: Vec<Complex64>,
    pub f1: Vec<Complex64>,
    pub f2: Vec<Complex64>,
    pub f3: Vec<Complex64>,
}

impl EtdCoefficients {
    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ModeWeights {
    e: Complex64,
    e2: Complex64,
    q: Complex64,
    f1: Complex64,
    f2: Complex64,
    f3: Complex64,
}

/// Step-free weights (everything divided by `h`) as closed forms in `z`.
fn closed_weights(z: Complex64) -> [Complex64; 4] {
    let ez = z.exp();
    let z2 = z * z;
    let z3 = z2 * z;
    let q = ((z * 0.5).exp() - 1.0) / z;
    let f1 = (-4.0 - z + ez * (4.0 - 3.0 * z + z2)) / z3;
    let f2 = 2.0 * (2.0 + z + ez * (z - 2.0)) / z3;
    let f3 = (-4.0 - 3.0 * z - z2 + ez * (4.0 - z)) / z3;
    [q, f1, f2, f3]
}

pub(crate) fn mode_weights(z: Complex64, h: f64, nodes: &[Complex64]) -> ModeWeights {
    let [q, f1, f2, f3] = if z.norm() > CLOSED_FORM_THRESHOLD {
        closed_weights(z)
    } else {
        let mut acc = [ZERO; 4];
        for &w in nodes {
            let v = closed_weights(z + w);
            for (a, b) in acc.iter_mut().zip(v) {
                *a += b;
            }
        }
        let m = nodes.len() as f64;
        acc.map(|a| real_if_real_argument(z, a / m))
    };
    ModeWeights {
        e: z.exp(),
        e2: (z * 0.5).exp(),
        q: q * h,
        f1: f1 * h,
        f2: f2 * h,
        f3: f3 * h,
    }
}

/// Precomputes the ETDRK4 weights of `op` for step `h`.
pub fn contour_coefficients(
    op: &DiagonalOperator,
    h: f64,
    contour: &ContourConfig,
) -> Result<EtdCoefficients> {
    contour.validate()?;
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::param("h", format!("{h} must be positive")));
    }
    let nodes = contour.nodes();
    let weights: Vec<Option<ModeWeights>> = op
        .symbol
        .par_iter()
        .zip(op.active.par_iter())
        .map(|(&l, &active)| active.then(|| mode_weights(l * h, h, &nodes)))
        .collect();
    let pick = |f: fn(&ModeWeights) -> Complex64| -> Vec<Complex64> {
        weights.iter().map(|w| w.as_ref().map_or(ZERO, f)).collect()
    };
    Ok(EtdCoefficients {
        h,
        grid: op.grid,
        e: pick(|w| w.e),
        e2: pick(|w| w.e2),
        q: pick(|w| w.q),
        f1: pick(|w| w.f1),
        f2: pick(|w| w.f2),
        f3: pick(|w| w.f3),
    })
}

/// Nonlinear part `N(u, t)` of a semilinear system, evaluated in spectral space.
pub trait NonlinearTerm {
    fn evaluate(&mut self, state: &SpectralField, t: f64) -> Result<SpectralField>;
}

impl<F> NonlinearTerm for F
where
    F: FnMut(&SpectralField, f64) -> Result<SpectralField>,
{
    fn evaluate(&mut self, state: &SpectralField, t: f64) -> Result<SpectralField> {
        self(state, t)
    }
}

fn checked(field: SpectralField, step: usize) -> Result<SpectralField> {
    if field.is_finite() {
        Ok(field)
    } else {
        Err(Error::Diverged { step })
    }
}

fn eval(
    nl: &mut dyn NonlinearTerm,
    state: &SpectralField,
    t: f64,
    step: usize,
) -> Result<SpectralField> {
    match nl.evaluate(state, t) {
        Ok(f) => checked(f, step),
        Err(Error::InvalidField { .. }) => Err(Error::Diverged { step }),
        Err(e) => Err(e),
    }
}

/// One ETDRK4 step from `(state, t)`; `step` only labels divergence errors.
pub fn etdrk4_step(
    state: &SpectralField,
    t: f64,
    coeffs: &EtdCoefficients,
    nl: &mut dyn NonlinearTerm,
    step: usize,
) -> Result<SpectralField> {
    let nu = eval(nl, state, t, step)?;
    etdrk4_step_primed(state, nu, t, coeffs, nl, step)
}

/// [`etdrk4_step`] with `N(state, t)` already evaluated as `nu`.
pub fn etdrk4_step_primed(
    state: &SpectralField,
    nu: SpectralField,
    t: f64,
    coeffs: &EtdCoefficients,
    nl: &mut dyn NonlinearTerm,
    step: usize,
) -> Result<SpectralField> {
    if state.grid() != &coeffs.grid || nu.grid() != &coeffs.grid {
        return Err(Error::GridMismatch);
    }
    let nu = checked(nu, step)?;
    let h = coeffs.h;
    let g = *state.grid();
    let u = state.coeffs();
    let len = u.len();

    let (e, e2, q) = (&coeffs.e[..len], &coeffs.e2[..len], &coeffs.q[..len]);
    let nu_c = nu.coeffs();

    let a: Vec<Complex64> = (0..len).map(|i| e2[i] * u[i] + q[i] * nu_c[i]).collect();
    let a = SpectralField::from_raw(g, a);
    let na = eval(nl, &a, t + 0.5 * h, step)?;
    let na_c = na.coeffs();

    let b: Vec<Complex64> = (0..len).map(|i| e2[i] * u[i] + q[i] * na_c[i]).collect();
    let b = SpectralField::from_raw(g, b);
    let nb = eval(nl, &b, t + 0.5 * h, step)?;
    let nb_c = nb.coeffs();

    let a_c = a.coeffs();
    let c: Vec<Complex64> = (0..len)
        .map(|i| e2[i] * a_c[i] + q[i] * (2.0 * nb_c[i] - nu_c[i]))
        .collect();
    let c = SpectralField::from_raw(g, c);
    let nc = eval(nl, &c, t + h, step)?;
    let nc_c = nc.coeffs();

    let (f1, f2, f3) = (&coeffs.f1[..len], &coeffs.f2[..len], &coeffs.f3[..len]);
    let next: Vec<Complex64> = (0..len)
        .map(|i| e[i] * u[i] + f1[i] * nu_c[i] + f2[i] * (na_c[i] + nb_c[i]) + f3[i] * nc_c[i])
        .collect();
    checked(SpectralField::from_raw(g, next), step)
}

/// A zero nonlinearity, for purely linear evolution.
pub fn zero_nonlinearity(state: &SpectralField, _t: f64) -> Result<SpectralField> {
    Ok(SpectralField::zeros(*state.grid()))
}
