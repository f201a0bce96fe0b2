//! Dynamically rescaled gKP in `(ξ, η, τ)`:
//!
//! ```text
//! ξ = (x - x_m)/L,  η = (y - y_m)/L²,  dτ/dt = 1/L³,  U = L^{2/n} u
//! U_τ = a(2/n U + ξU_ξ + 2ηU_η) + v_ξU_ξ + v_ηU_η - UⁿU_ξ - U_ξξξ - λ∂ξ⁻¹U_ηη
//! ```
//!
//! with `a = (ln L)_τ` chosen so that `‖U_η‖₂` stays fixed.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{energy_from, mass, norms_from, resolution_indicator, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::etd::{contour_coefficients, etdrk4_step_primed, ContourConfig, EtdCoefficients, NonlinearTerm};
use crate::gkp::{linear_symbol, real_power_field, real_power_values, w_from_u_hat, Exponent, Lambda};
use crate::spectral::{
    dealias_two_thirds, default_regularization, derivative_x, derivative_y, multiply_ikx, Fft2d,
    Grid2D, PointEvaluator, RealField, SpectralField,
};

/// Largest relative y-parity defect accepted by the a-only closure.
pub const PARITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosureMode {
    /// `a ≡ 0`, `v ≡ 0`: plain gKP in the rescaled variables.
    Frozen,
    /// `a` from the fixed `‖U_η‖₂`, `v ≡ 0`.
    AOnly,
    /// `a` as above and `v` pinning the minimum at the origin.
    Full,
}

impl ClosureMode {
    pub fn name(&self) -> &'static str {
        match self {
            ClosureMode::Frozen => "frozen",
            ClosureMode::AOnly => "a_only",
            ClosureMode::Full => "full",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [ClosureMode::Frozen, ClosureMode::AOnly, ClosureMode::Full]
            .into_iter()
            .find(|m| m.name() == s)
    }
}

/// Closure mode with the reference `‖U_η‖₂²` captured at `τ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RescaleClosure {
    pub mode: ClosureMode,
    pub ref_norm_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescaledParams {
    pub exponent: Exponent,
    pub lambda: Lambda,
    pub grid: Grid2D,
    /// Step in `τ`.
    pub h: f64,
    pub tau_end: f64,
    pub closure: ClosureMode,
    /// Stop once the relative drift of the physical mass exceeds this.
    pub mass_stop: f64,
    pub regularization: f64,
    pub contour: ContourConfig,
    pub dealias: bool,
    pub refine_minimum: bool,
}

impl RescaledParams {
    pub fn with_steps(
        exponent: Exponent,
        lambda: Lambda,
        grid: Grid2D,
        n_steps: usize,
        tau_end: f64,
    ) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::param("n_steps", "must be at least 1"));
        }
        let p = Self {
            exponent,
            lambda,
            grid,
            h: tau_end / n_steps as f64,
            tau_end,
            closure: ClosureMode::AOnly,
            mass_stop: 0.1,
            regularization: default_regularization(&grid),
            contour: ContourConfig::default(),
            dealias: false,
            refine_minimum: false,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.exponent.value() < 1.0 {
            return Err(Error::param("n", format!("{} is below 1", self.exponent)));
        }
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(Error::param("h", "must be positive"));
        }
        if !(self.tau_end.is_finite() && self.tau_end > 0.0) {
            return Err(Error::param("tau_end", "must be positive"));
        }
        if !(self.mass_stop > 0.0) {
            return Err(Error::param("mass_stop", "must be positive"));
        }
        self.contour.validate()
    }

    pub fn n_steps(&self) -> usize {
        (self.tau_end / self.h).round() as usize
    }
}

/// Sampled histories, one entry per accepted state.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RescaledHistory {
    pub tau: Vec<f64>,
    pub a: Vec<f64>,
    pub l: Vec<f64>,
    pub t_phys: Vec<f64>,
    pub x_m: Vec<f64>,
    pub y_m: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RescaledState {
    u: RealField,
    u_hat: SpectralField,
    w_hat: SpectralField,
    /// `(U^{n+1})^`, filled in once the closure has been evaluated.
    p_hat: Option<SpectralField>,
    pub tau: f64,
    pub step_index: usize,
    pub ln_l: f64,
    pub t_phys: f64,
    pub x_m: f64,
    pub y_m: f64,
    /// Closure values at this state.
    pub a: f64,
    pub v: (f64, f64),
    pub history: RescaledHistory,
}

impl RescaledState {
    pub fn u(&self) -> &RealField {
        &self.u
    }

    pub fn u_hat(&self) -> &SpectralField {
        &self.u_hat
    }

    pub fn w_hat(&self) -> &SpectralField {
        &self.w_hat
    }

    pub fn scale(&self) -> f64 {
        self.ln_l.exp()
    }

    /// Assembles a state from the fields `U` at scale `l`, for post-processing.
    pub fn from_parts(fft: &Fft2d, u: RealField, l: f64, x_m: f64, y_m: f64) -> Result<Self> {
        if !(l > 0.0) {
            return Err(Error::param("L", "must be positive"));
        }
        let u_hat = fft.forward(&u)?;
        let w_hat = w_from_u_hat(&u_hat);
        Ok(Self {
            u,
            u_hat,
            w_hat,
            p_hat: None,
            tau: 0.0,
            step_index: 0,
            ln_l: l.ln(),
            t_phys: 0.0,
            x_m,
            y_m,
            a: 0.0,
            v: (0.0, 0.0),
            history: RescaledHistory::default(),
        })
    }

    fn push_history(&mut self) {
        let l = self.scale();
        let h = &mut self.history;
        h.tau.push(self.tau);
        h.a.push(self.a);
        h.l.push(l);
        h.t_phys.push(self.t_phys);
        h.x_m.push(self.x_m);
        h.y_m.push(self.y_m);
    }
}

/// `∫ U^{n+1} U_ηηξ` by Parseval, given `P̂ = (U^{n+1})^`.
fn transport_integral(p_hat: &SpectralField, u_hat: &SpectralField) -> f64 {
    let g = *u_hat.grid();
    // (i ky)² (i kx) = -i kx ky²
    let d = u_hat.map_modes(|ix, iy| {
        let (kx, ky) = (g.kx(ix), g.ky(iy));
        if ix == g.x_nyquist_column() {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, -kx * ky * ky)
        }
    });
    p_hat.inner(&d).expect("same grid")
}

fn a_factor(n: Exponent, ref_norm_sq: f64) -> f64 {
    let n = n.value();
    2.0 * n / ((4.0 + n) * (n + 1.0) * ref_norm_sq)
}

/// `a = 2n/((4+n)(n+1)‖U_η‖²) ∫ U^{n+1} U_ηηξ`, with `‖U_η‖²` given as `ref_norm_sq`.
pub fn compute_a(fft: &Fft2d, u_hat: &SpectralField, n: Exponent, ref_norm_sq: f64) -> Result<f64> {
    if !(ref_norm_sq > 0.0) {
        return Err(Error::param("ref_norm", "must be positive"));
    }
    let u = fft.inverse(u_hat)?;
    let p_hat = fft.forward(&real_power_field(&u, n.plus(1)))?;
    Ok(a_factor(n, ref_norm_sq) * transport_integral(&p_hat, u_hat))
}

/// Solves the 2×2 minimum-pinning system.
pub fn solve_v(hessian: [[f64; 2]; 2], rhs: [f64; 2]) -> Result<(f64, f64)> {
    let [[a, b], [c, d]] = hessian;
    let det = a * d - b * c;
    let norm_sq = a * a + b * b + c * c + d * d;
    if !(det.abs() > 1e-12 * norm_sq) {
        return Err(Error::DegenerateMinimum {
            det,
            norm: norm_sq.sqrt(),
        });
    }
    Ok(((d * rhs[0] - b * rhs[1]) / det, (a * rhs[1] - c * rhs[0]) / det))
}

/// Velocities `(v_ξ, v_η)` that keep `U_ξ = U_η = 0` at the origin.
pub fn compute_v(u_hat: &SpectralField, n: Exponent, lambda: Lambda) -> Result<(f64, f64)> {
    let at0 = |f: &SpectralField| PointEvaluator::new(f).at(0.0, 0.0);
    let dxy = |f: &SpectralField, ox: u32, oy: u32| -> Result<f64> {
        let mut g = f.clone();
        if ox > 0 {
            g = derivative_x(&g, ox)?;
        }
        if oy > 0 {
            g = derivative_y(&g, oy)?;
        }
        Ok(at0(&g))
    };
    let u0 = at0(u_hat);
    let un = real_power_values(u0, n);
    let (uxx, uxy, uyy) = (dxy(u_hat, 2, 0)?, dxy(u_hat, 1, 1)?, dxy(u_hat, 0, 2)?);
    let uxxxx = dxy(u_hat, 4, 0)?;
    let uxxxy = dxy(u_hat, 3, 1)?;
    let w_yyy = dxy(&w_from_u_hat(u_hat), 0, 3)?;
    let lam = lambda.sign();
    solve_v(
        [[uxx, uxy], [uxy, uyy]],
        [un * uxx + uxxxx + lam * uyy, un * uxy + uxxxy + lam * w_yyy],
    )
}

/// `2/n U + ξU_ξ + 2ηU_η` in real space, on the periodic grid coordinates.
pub fn scaling_term(u: &RealField, u_xi: &RealField, u_eta: &RealField, n: Exponent) -> RealField {
    let g = *u.grid();
    let c = 2.0 / n.value();
    let nx = g.nx();
    let mut out = vec![0.0; g.real_len()];
    out.par_chunks_mut(nx).enumerate().for_each(|(iy, row)| {
        let eta = g.y(iy);
        for (ix, o) in row.iter_mut().enumerate() {
            let i = iy * nx + ix;
            *o = c * u.values()[i] + g.x(ix) * u_xi.values()[i] + 2.0 * eta * u_eta.values()[i];
        }
    });
    RealField::from_raw(g, out)
}

struct Stage {
    u: RealField,
    u_hat: SpectralField,
    p_hat: SpectralField,
}

fn stage(fft: &Fft2d, w_hat: &SpectralField, n: Exponent) -> Result<Stage> {
    let u_hat = multiply_ikx(w_hat);
    let u = fft.inverse_trusted(&u_hat);
    u.check_finite()?;
    let p_hat = fft.forward_values(real_power_field(&u, n.plus(1)).values());
    Ok(Stage { u, u_hat, p_hat })
}

fn rhs_from_stage(fft: &Fft2d, s: &Stage, a: f64, v: (f64, f64), n: Exponent, dealias: bool) -> Result<SpectralField> {
    let mut out = s.p_hat.clone();
    out.scale(-1.0 / n.plus(1).value());
    if a != 0.0 || v != (0.0, 0.0) {
        let u_xi = fft.inverse_owned(derivative_x(&s.u_hat, 1)?);
        let u_eta = fft.inverse_owned(derivative_y(&s.u_hat, 1)?);
        let mut src = scaling_term(&s.u, &u_xi, &u_eta, n);
        src.values_mut()
            .par_iter_mut()
            .zip(u_xi.values().par_iter().zip(u_eta.values()))
            .for_each(|(o, (ux, uy))| *o = a * *o + v.0 * ux + v.1 * uy);
        let s_hat = fft.forward_values(src.values());
        out.axpy(1.0, &w_from_u_hat(&s_hat))?;
    }
    if dealias {
        dealias_two_thirds(&mut out);
    }
    Ok(out)
}

/// Non-exponentiated part of `Ŵ_τ` for given closure values.
pub fn rescaled_rhs(
    fft: &Fft2d,
    w_hat: &SpectralField,
    a: f64,
    v: (f64, f64),
    params: &RescaledParams,
) -> Result<SpectralField> {
    let s = stage(fft, w_hat, params.exponent)?;
    rhs_from_stage(fft, &s, a, v, params.exponent, params.dealias)
}

/// Nonlinear term for the rescaled ETD step; `a` and `v` are recomputed
/// from every stage state.
pub struct RescaledNonlinearity<'a> {
    fft: &'a Fft2d,
    n: Exponent,
    lambda: Lambda,
    closure: RescaleClosure,
    dealias: bool,
}

impl<'a> RescaledNonlinearity<'a> {
    pub fn new(fft: &'a Fft2d, params: &RescaledParams, closure: RescaleClosure) -> Self {
        Self {
            fft,
            n: params.exponent,
            lambda: params.lambda,
            closure,
            dealias: params.dealias,
        }
    }

    fn closure_values(&self, s: &Stage) -> Result<(f64, (f64, f64))> {
        let a = match self.closure.mode {
            ClosureMode::Frozen => 0.0,
            _ => a_factor(self.n, self.closure.ref_norm_sq) * transport_integral(&s.p_hat, &s.u_hat),
        };
        let v = match self.closure.mode {
            ClosureMode::Full => compute_v(&s.u_hat, self.n, self.lambda)?,
            _ => (0.0, 0.0),
        };
        Ok((a, v))
    }
}

impl NonlinearTerm for RescaledNonlinearity<'_> {
    fn evaluate(&mut self, w_hat: &SpectralField, _t: f64) -> Result<SpectralField> {
        let s = stage(self.fft, w_hat, self.n)?;
        let (a, v) = self.closure_values(&s)?;
        rhs_from_stage(self.fft, &s, a, v, self.n, self.dealias)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "reason")]
pub enum RescaledTermination {
    Completed,
    MassExceeded,
    Diverged { step: usize },
}

impl RescaledTermination {
    pub fn name(&self) -> &'static str {
        match self {
            RescaledTermination::Completed => "completed",
            RescaledTermination::MassExceeded => "mass_exceeded",
            RescaledTermination::Diverged { .. } => "diverged",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RescaledOutcome {
    pub state: RescaledState,
    pub termination: RescaledTermination,
    pub closure: RescaleClosure,
    pub records: Vec<DiagnosticsRecord>,
}

/// Physical diagnostics of a rescaled state, relative to `(mass0, energy0)`.
fn physical_record(
    st: &RescaledState,
    n: Exponent,
    lambda: Lambda,
    refine: bool,
    reference: Option<(f64, f64)>,
) -> DiagnosticsRecord {
    let l = st.scale();
    let nv = n.value();
    let m = l.powf((3.0 - 4.0 / nv) / 2.0) * mass(&st.u_hat);
    let e = l.powf(1.0 - 4.0 / nv) * energy_from(&st.u, &st.u_hat, &st.w_hat, n, lambda);
    let (m0, e0) = reference.unwrap_or((m, e));
    let drift = |v: f64, r: f64| if r == 0.0 { v.abs() } else { (v / r - 1.0).abs() };
    let norms = norms_from(&st.u, &st.u_hat, refine);
    let amp = l.powf(-2.0 / nv);
    let (tail_x, tail_y) = resolution_indicator(&st.u_hat);
    DiagnosticsRecord {
        time: st.t_phys,
        mass: m,
        energy: e,
        delta_mass: drift(m, m0),
        delta_energy: drift(e, e0),
        linf_u: amp * norms.linf_u,
        l2_uy: l.powf(-(1.0 + 4.0 / nv) / 2.0) * norms.l2_uy,
        l2_ux: l.powf((1.0 - 4.0 / nv) / 2.0) * norms.l2_ux,
        u_min: amp * norms.u_min,
        x_min: st.x_m + l * norms.x_min,
        y_min: st.y_m + l * l * norms.y_min,
        tail_x,
        tail_y,
    }
}

pub struct RescaledSolver {
    params: RescaledParams,
    fft: Fft2d,
    coeffs: EtdCoefficients,
}

impl RescaledSolver {
    pub fn new(params: RescaledParams) -> Result<Self> {
        params.validate()?;
        let op = linear_symbol(params.grid, params.lambda, params.regularization)?;
        let coeffs = contour_coefficients(&op, params.h, &params.contour)?;
        Ok(Self {
            fft: Fft2d::new(params.grid),
            params,
            coeffs,
        })
    }

    pub fn fft(&self) -> &Fft2d {
        &self.fft
    }

    pub fn params(&self) -> &RescaledParams {
        &self.params
    }

    /// Canonical state at `τ = 0`, `L = 1`, and its closure.
    pub fn initial_state(&self, u0: RealField) -> Result<(RescaledState, RescaleClosure)> {
        if u0.grid() != &self.params.grid {
            return Err(Error::GridMismatch);
        }
        if self.params.closure == ClosureMode::AOnly {
            let defect = u0.y_parity_defect();
            if defect > PARITY_TOLERANCE {
                return Err(Error::Asymmetry {
                    defect,
                    tolerance: PARITY_TOLERANCE,
                });
            }
        }
        let mut st = RescaledState::from_parts(&self.fft, u0, 1.0, 0.0, 0.0)?;
        let ref_norm_sq = st.u_hat.weighted_norm_sq(|_, ky| ky * ky);
        if self.params.closure != ClosureMode::Frozen && !(ref_norm_sq > 0.0) {
            return Err(Error::param("initial data", "‖U_η‖ must be nonzero"));
        }
        let closure = RescaleClosure {
            mode: self.params.closure,
            ref_norm_sq,
        };
        self.refresh_closure(&mut st, &closure)?;
        st.push_history();
        Ok((st, closure))
    }

    fn refresh_closure(&self, st: &mut RescaledState, closure: &RescaleClosure) -> Result<()> {
        let nl = RescaledNonlinearity::new(&self.fft, &self.params, *closure);
        let p_hat = self
            .fft
            .forward_values(real_power_field(&st.u, self.params.exponent.plus(1)).values());
        let s = Stage {
            u: st.u.clone(),
            u_hat: st.u_hat.clone(),
            p_hat,
        };
        let (a, v) = nl.closure_values(&s)?;
        st.a = a;
        st.v = v;
        st.p_hat = Some(s.p_hat);
        Ok(())
    }

    /// One step in `τ` with trapezoidal updates of `ln L`, `t` and `(x_m, y_m)`.
    pub fn step(&self, st: &RescaledState, closure: &RescaleClosure) -> Result<RescaledState> {
        let k = st.step_index + 1;
        let h = self.params.h;
        let p = &self.params;
        let mut nl = RescaledNonlinearity::new(&self.fft, p, *closure);
        let p_hat = match &st.p_hat {
            Some(p_hat) => p_hat.clone(),
            None => self.fft.forward_values(real_power_field(&st.u, p.exponent.plus(1)).values()),
        };
        let first = Stage {
            u: st.u.clone(),
            u_hat: st.u_hat.clone(),
            p_hat,
        };
        let nu = rhs_from_stage(&self.fft, &first, st.a, st.v, p.exponent, p.dealias)?;
        let w = etdrk4_step_primed(&st.w_hat, nu, st.tau, &self.coeffs, &mut nl, k)?;
        let u = self.fft.inverse_coeffs(multiply_ikx(&w).into_coeffs());
        let u = RealField::new(p.grid, u).map_err(|_| Error::Diverged { step: k })?;
        let u_hat = self.fft.forward(&u)?;
        let w_hat = w_from_u_hat(&u_hat);
        let mut next = RescaledState {
            u,
            u_hat,
            w_hat,
            p_hat: None,
            tau: k as f64 * h,
            step_index: k,
            ln_l: st.ln_l,
            t_phys: st.t_phys,
            x_m: st.x_m,
            y_m: st.y_m,
            a: 0.0,
            v: (0.0, 0.0),
            history: RescaledHistory::default(),
        };
        self.refresh_closure(&mut next, closure).map_err(|e| match e {
            Error::InvalidField { .. } => Error::Diverged { step: k },
            e => e,
        })?;
        let l0 = st.scale();
        next.ln_l = st.ln_l + 0.5 * h * (st.a + next.a);
        let l1 = next.scale();
        next.t_phys = st.t_phys + 0.5 * h * (l0.powi(3) + l1.powi(3));
        next.x_m = st.x_m + 0.5 * h * (l0 * st.v.0 + l1 * next.v.0);
        next.y_m = st.y_m + 0.5 * h * (l0 * l0 * st.v.1 + l1 * l1 * next.v.1);
        if !(next.ln_l.is_finite() && next.t_phys.is_finite()) {
            return Err(Error::Diverged { step: k });
        }
        Ok(next)
    }

    /// Integrates until `τ_end`, the mass-drift stop, or divergence.
    pub fn run(&self, u0: RealField) -> Result<RescaledOutcome> {
        let p = &self.params;
        let (mut st, closure) = self.initial_state(u0)?;
        let first = physical_record(&st, p.exponent, p.lambda, p.refine_minimum, None);
        let reference = Some((first.mass, first.energy));
        let mut records = vec![first];
        let mut termination = RescaledTermination::Completed;
        while st.step_index < p.n_steps() {
            let mut next = match self.step(&st, &closure) {
                Ok(s) => s,
                Err(Error::Diverged { step }) => {
                    termination = RescaledTermination::Diverged { step };
                    break;
                }
                Err(e) => return Err(e),
            };
            next.history = std::mem::take(&mut st.history);
            st = next;
            st.push_history();
            let rec = physical_record(&st, p.exponent, p.lambda, p.refine_minimum, reference);
            records.push(rec);
            if !rec.delta_mass.is_finite() {
                termination = RescaledTermination::Diverged { step: st.step_index };
                break;
            }
            if rec.delta_mass > p.mass_stop {
                termination = RescaledTermination::MassExceeded;
                break;
            }
        }
        Ok(RescaledOutcome {
            state: st,
            termination,
            closure,
            records,
        })
    }
}

pub fn run_rescaled(params: &RescaledParams, u0: RealField) -> Result<RescaledOutcome> {
    RescaledSolver::new(params.clone())?.run(u0)
}

/// `x = x_m + L ξ`, `y = y_m + L² η`, `u = L^{-2/n} U`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoordinateMap {
    pub l: f64,
    pub x_m: f64,
    pub y_m: f64,
    pub amplitude: f64,
}

impl CoordinateMap {
    pub fn physical(&self, xi: f64, eta: f64) -> (f64, f64) {
        (self.x_m + self.l * xi, self.y_m + self.l * self.l * eta)
    }
}

/// Physical field on the stretched grid `(L·L_ξ, L²·L_η)`; grid coordinates
/// are measured from `(x_m, y_m)`.
pub fn rescale_back(state: &RescaledState, n: Exponent) -> Result<(RealField, CoordinateMap)> {
    let l = state.scale();
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::param("L", "must be positive"));
    }
    let g = *state.u.grid();
    let grid = Grid2D::new(g.nx(), g.ny(), g.scale_x() * l, g.scale_y() * l * l)?;
    let amplitude = l.powf(-2.0 / n.value());
    let values = state.u.values().iter().map(|v| amplitude * v).collect();
    let map = CoordinateMap {
        l,
        x_m: state.x_m,
        y_m: state.y_m,
        amplitude,
    };
    Ok((RealField::new(grid, values)?, map))
}

/// `(x, u)` along the grid row `y = 0`.
pub fn axis_slice(field: &RealField) -> Vec<(f64, f64)> {
    let g = *field.grid();
    field
        .row(g.y_axis_row())
        .iter()
        .enumerate()
        .map(|(ix, &u)| (g.x(ix), u))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::gaussian_initial;
    use crate::gkp::{DirectSolver, GkpNonlinearity, GkpParams, InitialData};

    fn n(p: u32, q: u32) -> Exponent {
        Exponent::new(p, q).unwrap()
    }

    #[test]
    fn zero_field_gives_zero_a() {
        let g = Grid2D::new(32, 32, 2.0, 2.0).unwrap();
        let fft = Fft2d::new(g);
        assert_eq!(compute_a(&fft, &SpectralField::zeros(g), n(2, 1), 3.0).unwrap(), 0.0);
    }

    /// `U = f1(ξ)g1(η) + f2(ξ)g2(η)`; a single separable term integrates to zero.
    #[test]
    fn transport_integral_matches_quadrature() {
        let g = Grid2D::new(64, 64, 1.5, 1.5).unwrap();
        let fft = Fft2d::new(g);
        let nn = n(2, 1);
        let f1 = |x: f64| -2.0 * x * (-x * x).exp();
        let f1p = |x: f64| (4.0 * x * x - 2.0) * (-x * x).exp();
        let f2 = |x: f64| 0.3 * (4.0 * x * x - 2.0) * (-x * x).exp();
        let f2p = |x: f64| 0.3 * (12.0 * x - 8.0 * x.powi(3)) * (-x * x).exp();
        let g1 = |y: f64| (-y * y).exp();
        let g1pp = |y: f64| (4.0 * y * y - 2.0) * (-y * y).exp();
        let g2 = |y: f64| (-2.0 * y * y).exp();
        let g2pp = |y: f64| (16.0 * y * y - 4.0) * (-2.0 * y * y).exp();
        let ref_sq = 2.5;
        let check = |two_terms: bool| {
            let c = if two_terms { 1.0 } else { 0.0 };
            let u = RealField::from_fn(g, |x, y| f1(x) * g1(y) + c * f2(x) * g2(y));
            let spectral = compute_a(&fft, &fft.forward(&u).unwrap(), nn, ref_sq).unwrap();
            let mut quad = 0.0;
            for iy in 0..g.ny() {
                for ix in 0..g.nx() {
                    let (x, y) = (g.x(ix), g.y(iy));
                    quad += u.at(ix, iy).powi(3) * (f1p(x) * g1pp(y) + c * f2p(x) * g2pp(y));
                }
            }
            let quad = a_factor(nn, ref_sq) * quad * g.cell_area();
            assert!((spectral - quad).abs() < 1e-8, "{spectral} {quad}");
            quad
        };
        assert!(check(false).abs() < 1e-8);
        assert!(check(true).abs() > 1e-3);
    }

    #[test]
    fn v_system_solutions() {
        assert_eq!(solve_v([[2.0, 0.0], [0.0, 3.0]], [0.0, 0.0]).unwrap(), (0.0, 0.0));
        assert!(matches!(
            solve_v([[1.0, 2.0], [2.0, 4.0]], [1.0, 1.0]),
            Err(Error::DegenerateMinimum { .. })
        ));
    }

    /// `U = Σ A cos(kξ + lη)` has closed-form derivatives at the origin.
    #[test]
    fn v_matches_hand_solved_system() {
        let g = Grid2D::new(32, 32, 1.0, 1.0).unwrap();
        let fft = Fft2d::new(g);
        let modes = [(-1.0, 1.0, 0.0), (-0.5, 1.0, 1.0), (-0.3, 2.0, -1.0)];
        let u = RealField::from_fn(g, |x, y| modes.iter().map(|(a, k, l)| a * (k * x + l * y).cos()).sum());
        let u_hat = fft.forward(&u).unwrap();
        let s = |f: &dyn Fn(f64, f64) -> f64| -> f64 { modes.iter().map(|&(a, k, l)| a * f(k, l)).sum() };
        let u0 = s(&|_, _| 1.0);
        let uxx = s(&|k, _| -k * k);
        let uxy = s(&|k, l| -k * l);
        let uyy = s(&|_, l| -l * l);
        let uxxxx = s(&|k, _| k.powi(4));
        let uxxxy = s(&|k, l| k.powi(3) * l);
        let wyyy = s(&|k, l| -l.powi(3) / k);
        let nn = n(2, 1);
        let lam = -1.0;
        let rhs0 = u0 * u0 * uxx + uxxxx + lam * uyy;
        let rhs1 = u0 * u0 * uxy + uxxxy + lam * wyyy;
        let det = uxx * uyy - uxy * uxy;
        let want = ((uyy * rhs0 - uxy * rhs1) / det, (uxx * rhs1 - uxy * rhs0) / det);
        let got = compute_v(&u_hat, nn, Lambda::KpI).unwrap();
        assert!((got.0 - want.0).abs() < 1e-10 && (got.1 - want.1).abs() < 1e-10, "{got:?} {want:?}");
    }

    #[test]
    fn y_even_data_has_no_eta_velocity() {
        let g = Grid2D::new(64, 64, 2.0, 2.0).unwrap();
        let fft = Fft2d::new(g);
        let u_hat = fft.forward(&gaussian_initial(g, 2.0)).unwrap();
        let (_, v_eta) = compute_v(&u_hat, n(4, 3), Lambda::KpI).unwrap();
        assert!(v_eta.abs() < 1e-12, "{v_eta}");
    }

    fn params(g: Grid2D, nn: Exponent, steps: usize, tau: f64) -> RescaledParams {
        RescaledParams::with_steps(nn, Lambda::KpI, g, steps, tau).unwrap()
    }

    #[test]
    fn rhs_reduces_to_direct_nonlinearity() {
        let g = Grid2D::new(64, 64, 3.0, 3.0).unwrap();
        let fft = Fft2d::new(g);
        let nn = n(4, 3);
        let w = w_from_u_hat(&fft.forward(&gaussian_initial(g, 3.0)).unwrap());
        let a = rescaled_rhs(&fft, &w, 0.0, (0.0, 0.0), &params(g, nn, 1, 0.1)).unwrap();
        let b = GkpNonlinearity::new(&fft, nn, false).evaluate(&w, 0.0).unwrap();
        let scale = b.max_abs();
        for (x, y) in a.coeffs().iter().zip(b.coeffs()) {
            assert!((x - y).norm() < 1e-13 * scale);
        }
    }

    #[test]
    fn gaussian_scaling_term() {
        let g = Grid2D::new(128, 128, 2.0, 2.0).unwrap();
        let fft = Fft2d::new(g);
        let nn = n(2, 1);
        let bump = |x: f64, y: f64| (-x * x - y * y).exp();
        let u = RealField::from_fn(g, bump);
        let u_hat = fft.forward(&u).unwrap();
        let ux = fft.inverse(&derivative_x(&u_hat, 1).unwrap()).unwrap();
        let uy = fft.inverse(&derivative_y(&u_hat, 1).unwrap()).unwrap();
        let s = scaling_term(&u, &ux, &uy, nn);
        let exact = RealField::from_fn(g, |x, y| (1.0 - 2.0 * x * x - 4.0 * y * y) * bump(x, y));
        for (a, b) in s.values().iter().zip(exact.values()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn rhs_preserves_y_parity() {
        let g = Grid2D::new(64, 64, 3.0, 2.0).unwrap();
        let fft = Fft2d::new(g);
        let w = w_from_u_hat(&fft.forward(&gaussian_initial(g, 3.0)).unwrap());
        let out = rescaled_rhs(&fft, &w, 0.7, (0.2, 0.0), &params(g, n(2, 1), 1, 0.1)).unwrap();
        let f = fft.inverse(&out).unwrap();
        assert!(f.y_parity_defect() < 1e-12);
    }

    #[test]
    fn frozen_closure_equals_direct_run() {
        let g = Grid2D::new(64, 64, 3.0, 3.0).unwrap();
        let nn = n(2, 1);
        let mut rp = params(g, nn, 10, 0.01);
        rp.closure = ClosureMode::Frozen;
        let r = run_rescaled(&rp, gaussian_initial(g, 1.0)).unwrap();
        let dp = GkpParams::with_steps(nn, Lambda::KpI, g, 10, 0.01).unwrap();
        let solver = DirectSolver::new(dp).unwrap();
        let mut s = solver.initial_state(&InitialData::Gaussian { beta: 1.0 }).unwrap();
        for _ in 0..10 {
            s = solver.step(&s).unwrap();
        }
        let scale = s.u().max_abs();
        for (a, b) in r.state.u().values().iter().zip(s.u().values()) {
            assert!((a - b).abs() < 1e-12 * scale);
        }
        assert_eq!(r.state.scale(), 1.0);
        assert!((r.state.t_phys - 0.01).abs() < 1e-15);
    }

    #[test]
    fn a_only_run_keeps_u_eta_fixed() {
        let g = Grid2D::new(128, 128, 3.0, 3.0).unwrap();
        let nn = n(2, 1);
        let r = run_rescaled(&params(g, nn, 100, 0.02), gaussian_initial(g, 3.0)).unwrap();
        assert_eq!(r.termination, RescaledTermination::Completed);
        let now = r.state.u_hat().weighted_norm_sq(|_, ky| ky * ky);
        assert!((now / r.closure.ref_norm_sq - 1.0).abs() < 1e-2);
        let h = &r.state.history;
        assert_eq!(h.tau.len(), 101);
        // d ln L / dτ from the trace equals a to trapezoid accuracy
        for k in 1..h.tau.len() {
            let slope = (h.l[k].ln() - h.l[k - 1].ln()) / (h.tau[k] - h.tau[k - 1]);
            assert!((slope - 0.5 * (h.a[k] + h.a[k - 1])).abs() < 1e-9);
        }
        assert!(h.t_phys.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn a_only_rejects_asymmetric_data() {
        let g = Grid2D::new(32, 32, 2.0, 2.0).unwrap();
        let u = RealField::from_fn(g, |x, y| -2.0 * x * (-x * x - (y - 0.3).powi(2)).exp());
        assert!(matches!(
            run_rescaled(&params(g, n(2, 1), 1, 0.1), u),
            Err(Error::Asymmetry { .. })
        ));
    }

    #[test]
    fn rescale_back_identities() {
        let g = Grid2D::new(64, 64, 2.0, 2.0).unwrap();
        let fft = Fft2d::new(g);
        let u = gaussian_initial(g, 2.0);
        let st = RescaledState::from_parts(&fft, u.clone(), 1.0, 0.0, 0.0).unwrap();
        let (back, _) = rescale_back(&st, n(2, 1)).unwrap();
        assert_eq!(back, u);

        for (l, nn) in [(0.37, n(4, 3)), (0.5, n(2, 1)), (1.7, n(4, 1))] {
            let st = RescaledState::from_parts(&fft, u.clone(), l, 0.0, 0.0).unwrap();
            let (back, map) = rescale_back(&st, nn).unwrap();
            let nv = nn.value();
            let phys_hat = Fft2d::new(*back.grid()).forward(&back).unwrap();
            let m2 = phys_hat.norm_sq();
            assert!((m2 / (l.powf(3.0 - 4.0 / nv) * st.u_hat().norm_sq()) - 1.0).abs() < 1e-12);
            let uy2 = phys_hat.weighted_norm_sq(|_, ky| ky * ky);
            let want = l.powf(-(1.0 + 4.0 / nv)) * st.u_hat().weighted_norm_sq(|_, ky| ky * ky);
            assert!((uy2 / want - 1.0).abs() < 1e-12);
            assert_eq!(map.physical(1.0, 1.0), (l, l * l));
        }
        let slice = axis_slice(&u);
        assert_eq!(slice.len(), 64);
        assert_eq!(slice[32].0, 0.0);
        assert_eq!(slice[32].1, -4.0);
    }
}
