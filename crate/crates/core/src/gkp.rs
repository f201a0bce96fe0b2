//! Direct integration of the gKP equation in the w-formulation.
//!
//! The evolved variable is `ŵ` with `û = i kx ŵ`, so `u` is an exact
//! x-derivative at every step.

use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{gaussian_initial, DiagnosticsRecord, Monitor};
use crate::error::{Error, Result};
use crate::etd::{contour_coefficients, etdrk4_step_primed, ContourConfig, DiagonalOperator, EtdCoefficients, NonlinearTerm};
use crate::spectral::{default_regularization, ikx_column, scale_column, Fft2d, Grid2D, RealField, SpectralField};

/// A positive rational `num/den` with odd denominator, in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Exponent {
    num: u32,
    den: u32,
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl Exponent {
    pub fn new(num: u32, den: u32) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::UnsupportedExponent {
                num: num as i64,
                den: den as i64,
            });
        }
        let g = gcd(num, den);
        let (num, den) = (num / g, den / g);
        if den % 2 == 0 {
            return Err(Error::UnsupportedExponent {
                num: num as i64,
                den: den as i64,
            });
        }
        Ok(Self { num, den })
    }

    pub fn num(&self) -> u32 {
        self.num
    }

    pub fn den(&self) -> u32 {
        self.den
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `self + k`.
    pub fn plus(&self, k: u32) -> Exponent {
        Exponent {
            num: self.num + k * self.den,
            den: self.den,
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

/// Sign of the transverse term: gKP I has `λ = -1`, gKP II has `λ = +1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Lambda {
    KpI,
    KpII,
}

impl Lambda {
    pub fn from_sign(sign: i32) -> Result<Self> {
        match sign {
            -1 => Ok(Lambda::KpI),
            1 => Ok(Lambda::KpII),
            _ => Err(Error::param("lambda", format!("{sign} is not +1 or -1"))),
        }
    }

    pub fn sign(&self) -> f64 {
        match self {
            Lambda::KpI => -1.0,
            Lambda::KpII => 1.0,
        }
    }
}

/// `x^k` by repeated squaring.
#[inline(always)]
fn ipow(mut x: f64, mut k: u32) -> f64 {
    let mut acc = 1.0;
    while k > 0 {
        if k & 1 == 1 {
            acc *= x;
        }
        x *= x;
        k >>= 1;
    }
    acc
}

/// Cube root by three Halley steps from a bit-level estimate; agrees with
/// `f64::cbrt` to a few ulp and is about twice as fast.
#[inline]
pub fn cbrt_fast(x: f64) -> f64 {
    let ax = x.abs();
    if !(ax > 1e-290 && ax < 1e290) {
        return x.cbrt();
    }
    let mut t = f64::from_bits(ax.to_bits() / 3 + 0x2A9F_7893_782D_A1CE);
    for _ in 0..3 {
        let t3 = t * t * t;
        t *= (t3 + 2.0 * ax) / (2.0 * t3 + ax);
    }
    t.copysign(x)
}

/// Real branch `sign(v)^num · |v|^(num/den)` for odd `den`, evaluated as
/// `v^(num div den) · v^{1/den}^(num mod den)`.
#[inline]
pub fn real_power_values(v: f64, r: Exponent) -> f64 {
    let (whole, frac) = (r.num / r.den, r.num % r.den);
    if frac == 0 {
        return ipow(v, whole);
    }
    let root = if r.den == 3 {
        cbrt_fast(v)
    } else {
        v.abs().powf(1.0 / r.den as f64).copysign(v)
    };
    ipow(v, whole) * ipow(root, frac)
}

/// Pointwise real-branch power; the denominator of `den` must be odd.
pub fn real_power(u: &RealField, num: u32, den: u32) -> Result<RealField> {
    let r = Exponent::new(num, den)?;
    Ok(real_power_field(u, r))
}

pub(crate) fn real_power_field(u: &RealField, r: Exponent) -> RealField {
    let values = match (r.num / r.den, r.num % r.den == 0) {
        (1, true) => map_values(u.values(), |v| v),
        (2, true) => map_values(u.values(), |v| v * v),
        (3, true) => map_values(u.values(), |v| v * v * v),
        (4, true) => map_values(u.values(), |v| ipow(v, 4)),
        (5, true) => map_values(u.values(), |v| ipow(v, 5)),
        (2, false) if r.den == 3 && r.num % 3 == 1 => {
            map_values(u.values(), |v| v * v * cbrt_fast(v))
        }
        _ => map_values(u.values(), |v| real_power_values(v, r)),
    };
    RealField::from_raw(*u.grid(), values)
}

/// Pointwise map, parallel only when more than one worker is available.
fn map_values(values: &[f64], f: impl Fn(f64) -> f64 + Sync) -> Vec<f64> {
    if rayon::current_num_threads() > 1 {
        values.par_iter().with_min_len(1 << 14).map(|&v| f(v)).collect()
    } else {
        values.iter().map(|&v| f(v)).collect()
    }
}

/// `w` from `û` on the zero-x-mean subspace: `-i/kx` off the `kx = 0` line,
/// zero on that line and on the x-Nyquist column.
pub fn w_from_u_hat(u_hat: &SpectralField) -> SpectralField {
    let g = *u_hat.grid();
    let nyq = g.x_nyquist_column();
    let zero = Complex64::new(0.0, 0.0);
    let symbols: Vec<Complex64> = (0..g.nkx())
        .map(|ix| {
            if ix == 0 || ix == nyq {
                zero
            } else {
                Complex64::new(0.0, -1.0 / g.kx(ix))
            }
        })
        .collect();
    u_hat.map_modes(|ix, _| symbols[ix])
}

/// `i kx³ - iλ ky²/(kx + iδ)`; the `kx = 0` line and x-Nyquist column are inactive.
pub fn linear_symbol(grid: Grid2D, lambda: Lambda, delta: f64) -> Result<DiagonalOperator> {
    let ny = grid.ny();
    let nyq = grid.x_nyquist_column();
    let mut symbol = Vec::with_capacity(grid.spectral_len());
    let mut active = Vec::with_capacity(grid.spectral_len());
    let lam = lambda.sign();
    let i = Complex64::new(0.0, 1.0);
    for ix in 0..grid.nkx() {
        let kx = grid.kx(ix);
        for iy in 0..ny {
            let ky = grid.ky(iy);
            symbol.push(i * kx.powi(3) - i * lam * ky * ky / Complex64::new(kx, delta));
            active.push(ix != 0 && ix != nyq);
        }
    }
    DiagonalOperator::with_active(grid, symbol, active)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GkpParams {
    pub exponent: Exponent,
    pub lambda: Lambda,
    pub grid: Grid2D,
    pub h: f64,
    pub t_end: f64,
    /// Stop once the relative energy drift exceeds this.
    pub delta_stop: f64,
    /// Optional stop on relative mass drift.
    pub mass_stop: Option<f64>,
    pub regularization: f64,
    pub contour: ContourConfig,
    pub dealias: bool,
    pub refine_minimum: bool,
}

impl GkpParams {
    pub fn new(exponent: Exponent, lambda: Lambda, grid: Grid2D, h: f64, t_end: f64) -> Result<Self> {
        let p = Self {
            exponent,
            lambda,
            grid,
            h,
            t_end,
            delta_stop: 1e-3,
            mass_stop: None,
            regularization: default_regularization(&grid),
            contour: ContourConfig::default(),
            dealias: false,
            refine_minimum: false,
        };
        p.validate()?;
        Ok(p)
    }

    /// Step chosen so that `n_steps` steps reach `t_end`.
    pub fn with_steps(exponent: Exponent, lambda: Lambda, grid: Grid2D, n_steps: usize, t_end: f64) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::param("n_steps", "must be at least 1"));
        }
        Self::new(exponent, lambda, grid, t_end / n_steps as f64, t_end)
    }

    pub fn validate(&self) -> Result<()> {
        if self.exponent.value() < 1.0 {
            return Err(Error::param("n", format!("{} is below 1", self.exponent)));
        }
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(Error::param("h", format!("{} must be positive", self.h)));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::param("t_end", format!("{} must be positive", self.t_end)));
        }
        if !(self.delta_stop > 0.0) {
            return Err(Error::param("delta_stop", "must be positive"));
        }
        if let Some(m) = self.mass_stop {
            if !(m > 0.0) {
                return Err(Error::param("mass_stop", "must be positive"));
            }
        }
        if !(self.regularization.is_finite() && self.regularization > 0.0) {
            return Err(Error::param("regularization", "must be positive"));
        }
        self.contour.validate()
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.h).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    /// `β ∂xx exp(-(x² + y²))`.
    Gaussian { beta: f64 },
    /// Arbitrary samples of `u`; must have zero x-mean.
    Field(RealField),
}

/// Relative size of the `kx = 0` line accepted for externally supplied data.
pub const X_MEAN_TOLERANCE: f64 = 1e-8;

impl InitialData {
    pub fn sample(&self, grid: Grid2D) -> Result<RealField> {
        match self {
            InitialData::Gaussian { beta } => {
                if !beta.is_finite() {
                    return Err(Error::param("beta", "must be finite"));
                }
                Ok(gaussian_initial(grid, *beta))
            }
            InitialData::Field(f) => {
                if f.grid() != &grid {
                    return Err(Error::GridMismatch);
                }
                f.check_finite()?;
                Ok(f.clone())
            }
        }
    }
}

/// Solver state: the real field `u` together with its spectrum, `ŵ` and
/// `u^{n+1}`.
///
/// `u` is the primary representation; everything else is derived from it,
/// so a state rebuilt from stored samples of `u` is bitwise identical.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    u: RealField,
    u_hat: SpectralField,
    w_hat: SpectralField,
    power: RealField,
    pub t: f64,
    pub step_index: usize,
}

impl SolverState {
    pub fn from_real(fft: &Fft2d, u: RealField, n: Exponent, t: f64, step_index: usize) -> Result<Self> {
        let u_hat = fft.forward(&u)?;
        let w_hat = w_from_u_hat(&u_hat);
        let power = real_power_field(&u, n.plus(1));
        Ok(Self {
            u,
            u_hat,
            w_hat,
            power,
            t,
            step_index,
        })
    }

    pub fn u(&self) -> &RealField {
        &self.u
    }

    pub fn u_hat(&self) -> &SpectralField {
        &self.u_hat
    }

    pub fn w_hat(&self) -> &SpectralField {
        &self.w_hat
    }

    /// `u^{n+1}` on the real branch.
    pub fn power(&self) -> &RealField {
        &self.power
    }

    pub fn into_u(self) -> RealField {
        self.u
    }
}

/// The w-equation nonlinearity `-(u^{n+1})^/(n+1)` with `u = I(i kx ŵ)`.
pub struct GkpNonlinearity<'a> {
    fft: &'a Fft2d,
    power: Exponent,
    dealias: bool,
}

impl<'a> GkpNonlinearity<'a> {
    pub fn new(fft: &'a Fft2d, n: Exponent, dealias: bool) -> Self {
        Self {
            fft,
            power: n.plus(1),
            dealias,
        }
    }

    /// `-(u^{n+1})^/(n+1)` for real samples `u`.
    pub fn from_real(&self, u: &RealField) -> Result<SpectralField> {
        u.check_finite()?;
        Ok(self.from_power(&real_power_field(u, self.power)))
    }

    /// Same as [`Self::from_real`] with `u^{n+1}` precomputed.
    pub fn from_power(&self, p: &RealField) -> SpectralField {
        let g = *self.fft.grid();
        let (s, dealias) = (-1.0 / self.power.value(), self.dealias);
        self.fft
            .forward_values_with(p.values(), |ix, col| scale_column(&g, ix, col, s, dealias))
    }
}

impl NonlinearTerm for GkpNonlinearity<'_> {
    fn evaluate(&mut self, w_hat: &SpectralField, _t: f64) -> Result<SpectralField> {
        let g = *w_hat.grid();
        let u = self
            .fft
            .inverse_coeffs_with(w_hat.coeffs().to_vec(), |ix, col| ikx_column(&g, ix, col));
        self.from_real(&RealField::from_raw(g, u))
    }
}

pub fn nonlinear_w(fft: &Fft2d, w_hat: &SpectralField, params: &GkpParams) -> Result<SpectralField> {
    GkpNonlinearity::new(fft, params.exponent, params.dealias).evaluate(w_hat, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "reason")]
pub enum Termination {
    Completed,
    DeltaExceeded,
    MassExceeded,
    Diverged { step: usize },
}

impl Termination {
    pub fn exit_code(&self) -> i32 {
        match self {
            Termination::Completed => 0,
            Termination::DeltaExceeded | Termination::MassExceeded => 2,
            Termination::Diverged { .. } => 3,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Termination::Completed => "completed",
            Termination::DeltaExceeded => "delta_exceeded",
            Termination::MassExceeded => "mass_exceeded",
            Termination::Diverged { .. } => "diverged",
        }
    }
}

/// Receives one record per step, on the solver thread.
pub trait Observer {
    fn observe(&mut self, record: &DiagnosticsRecord, state: &SolverState);
}

impl Observer for Vec<DiagnosticsRecord> {
    fn observe(&mut self, record: &DiagnosticsRecord, _: &SolverState) {
        self.push(*record);
    }
}

impl Observer for () {
    fn observe(&mut self, _: &DiagnosticsRecord, _: &SolverState) {}
}

impl<F: FnMut(&DiagnosticsRecord, &SolverState)> Observer for F {
    fn observe(&mut self, record: &DiagnosticsRecord, state: &SolverState) {
        self(record, state)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub state: SolverState,
    pub termination: Termination,
    pub last: DiagnosticsRecord,
    pub mass0: f64,
    pub energy0: f64,
}

/// Transforms and ETD weights for one parameter set.
pub struct DirectSolver {
    params: GkpParams,
    fft: Fft2d,
    coeffs: EtdCoefficients,
}

impl DirectSolver {
    pub fn new(params: GkpParams) -> Result<Self> {
        params.validate()?;
        let op = linear_symbol(params.grid, params.lambda, params.regularization)?;
        let coeffs = contour_coefficients(&op, params.h, &params.contour)?;
        Ok(Self {
            fft: Fft2d::new(params.grid),
            params,
            coeffs,
        })
    }

    pub fn params(&self) -> &GkpParams {
        &self.params
    }

    pub fn fft(&self) -> &Fft2d {
        &self.fft
    }

    pub fn initial_state(&self, initial: &InitialData) -> Result<SolverState> {
        let u = initial.sample(self.params.grid)?;
        let state = SolverState::from_real(&self.fft, u, self.params.exponent, 0.0, 0)?;
        if matches!(initial, InitialData::Gaussian { .. }) {
            return Ok(state);
        }
        let line = state.u_hat.kx_zero_line().iter().fold(0.0f64, |m, c| m.max(c.norm()));
        let scale = state.u_hat.max_abs();
        if line > X_MEAN_TOLERANCE * scale {
            return Err(Error::Domain(format!(
                "initial data has nonzero x-mean ({:.3e} relative)",
                line / scale
            )));
        }
        Ok(state)
    }

    /// State rebuilt from stored samples at time `t`.
    pub fn state_at(&self, u: RealField, t: f64) -> Result<SolverState> {
        let step = (t / self.params.h).round() as usize;
        SolverState::from_real(&self.fft, u, self.params.exponent, step as f64 * self.params.h, step)
    }

    pub fn monitor(&self, reference: &SolverState) -> Monitor {
        Monitor::new(
            self.params.exponent,
            self.params.lambda,
            self.params.refine_minimum,
            &reference.u,
            &reference.u_hat,
            &reference.w_hat,
        )
    }

    /// One step; `Err(Diverged)` if any stage or the result is not finite.
    pub fn step(&self, state: &SolverState) -> Result<SolverState> {
        let next_index = state.step_index + 1;
        let mut nl = GkpNonlinearity::new(&self.fft, self.params.exponent, self.params.dealias);
        let nu = nl.from_power(&state.power);
        let w = etdrk4_step_primed(&state.w_hat, nu, state.t, &self.coeffs, &mut nl, next_index)?;
        let g = self.params.grid;
        let u = self.fft.inverse_coeffs_with(w.into_coeffs(), |ix, col| ikx_column(&g, ix, col));
        let u = RealField::new(self.params.grid, u).map_err(|_| Error::Diverged { step: next_index })?;
        let t = next_index as f64 * self.params.h;
        SolverState::from_real(&self.fft, u, self.params.exponent, t, next_index)
    }

    /// Runs from `state` to `t_end` or a stop condition; the record of
    /// `state` itself is emitted first when `emit_start` is set.
    pub fn run_from(
        &self,
        mut state: SolverState,
        monitor: &Monitor,
        observer: &mut dyn Observer,
        emit_start: bool,
    ) -> Result<RunOutcome> {
        let p = &self.params;
        let n_steps = p.n_steps();
        let mut last = monitor.record_state(&state);
        if emit_start {
            observer.observe(&last, &state);
        }
        let mut termination = Termination::Completed;
        while state.step_index < n_steps {
            let next = match self.step(&state) {
                Ok(s) => s,
                Err(Error::Diverged { step }) => {
                    termination = Termination::Diverged { step };
                    break;
                }
                Err(e) => return Err(e),
            };
            state = next;
            last = monitor.record_state(&state);
            observer.observe(&last, &state);
            if !last.delta_energy.is_finite() || !last.delta_mass.is_finite() {
                termination = Termination::Diverged { step: state.step_index };
                break;
            }
            if last.delta_energy > p.delta_stop {
                termination = Termination::DeltaExceeded;
                break;
            }
            if p.mass_stop.is_some_and(|m| last.delta_mass > m) {
                termination = Termination::MassExceeded;
                break;
            }
        }
        Ok(RunOutcome {
            state,
            termination,
            last,
            mass0: monitor.mass0,
            energy0: monitor.energy0,
        })
    }
}

/// Integrates from `initial` at `t = 0`, emitting a record at every step
/// (including the initial one).
pub fn run_direct(params: &GkpParams, initial: &InitialData, observer: &mut dyn Observer) -> Result<RunOutcome> {
    let solver = DirectSolver::new(params.clone())?;
    let state = solver.initial_state(initial)?;
    let monitor = solver.monitor(&state);
    solver.run_from(state, &monitor, observer, true)
}
