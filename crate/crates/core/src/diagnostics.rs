//! Conserved quantities, norms and resolution indicators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gkp::{real_power_values, w_from_u_hat, Exponent, Lambda, SolverState};
use crate::spectral::{Fft2d, Grid2D, RealField, SpectralField};

/// Frozen CSV header for diagnostics output.
pub const CSV_HEADER: &str =
    "time,mass,energy,delta_mass,delta_energy,linf_u,l2_uy,l2_ux,u_min,x_min,y_min,tail_x,tail_y";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub time: f64,
    pub mass: f64,
    pub energy: f64,
    pub delta_mass: f64,
    pub delta_energy: f64,
    pub linf_u: f64,
    pub l2_uy: f64,
    pub l2_ux: f64,
    pub u_min: f64,
    pub x_min: f64,
    pub y_min: f64,
    pub tail_x: f64,
    pub tail_y: f64,
}

impl DiagnosticsRecord {
    /// One CSV line in [`CSV_HEADER`] order, round-trippable `f64` formatting.
    pub fn csv_line(&self) -> String {
        [
            self.time,
            self.mass,
            self.energy,
            self.delta_mass,
            self.delta_energy,
            self.linf_u,
            self.l2_uy,
            self.l2_ux,
            self.u_min,
            self.x_min,
            self.y_min,
            self.tail_x,
            self.tail_y,
        ]
        .iter()
        .map(|v| format!("{v:e}"))
        .collect::<Vec<_>>()
        .join(",")
    }

    pub fn norm(&self, id: NormId) -> f64 {
        match id {
            NormId::LinfU => self.linf_u,
            NormId::L2Uy => self.l2_uy,
            NormId::L2UySquared => self.l2_uy * self.l2_uy,
            NormId::XMin => self.x_min,
        }
    }
}

/// Which recorded quantity a trace or fit refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormId {
    LinfU,
    L2Uy,
    L2UySquared,
    XMin,
}

impl NormId {
    pub fn name(&self) -> &'static str {
        match self {
            NormId::LinfU => "linf_u",
            NormId::L2Uy => "l2_uy",
            NormId::L2UySquared => "l2_uy_squared",
            NormId::XMin => "x_min",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [NormId::LinfU, NormId::L2Uy, NormId::L2UySquared, NormId::XMin]
            .into_iter()
            .find(|id| id.name() == s)
    }
}

/// Time series of one quantity with strictly increasing times.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NormTrace {
    pub name: String,
    times: Vec<f64>,
    values: Vec<f64>,
}

impl NormTrace {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn from_pairs(name: impl Into<String>, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Domain("times and values differ in length".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("trace times must be strictly increasing".into()));
        }
        Ok(Self {
            name: name.into(),
            times,
            values,
        })
    }

    pub fn from_records(records: &[DiagnosticsRecord], id: NormId) -> Result<Self> {
        Self::from_pairs(
            id.name(),
            records.iter().map(|r| r.time).collect(),
            records.iter().map(|r| r.norm(id)).collect(),
        )
    }

    pub fn push(&mut self, time: f64, value: f64) -> Result<()> {
        if let Some(&last) = self.times.last() {
            if !(time > last) {
                return Err(Error::Domain(format!("time {time} does not follow {last}")));
            }
        }
        self.times.push(time);
        self.values.push(value);
        Ok(())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// The last `k` samples.
    pub fn tail(&self, k: usize) -> (&[f64], &[f64]) {
        let start = self.len().saturating_sub(k);
        (&self.times[start..], &self.values[start..])
    }
}

/// `‖u‖₂` by Parseval.
pub fn mass(u_hat: &SpectralField) -> f64 {
    u_hat.norm_sq().sqrt()
}

/// Energy of a zero-x-mean field; the `kx = 0` line is ignored.
pub fn energy(fft: &Fft2d, u_hat: &SpectralField, n: Exponent, lambda: Lambda) -> Result<f64> {
    let u = fft.inverse(u_hat)?;
    Ok(energy_from(&u, u_hat, &w_from_u_hat(u_hat), n, lambda))
}

/// Energy from a precomputed real field, its spectrum and its x-antiderivative.
///
/// `∫ ½u_x² − u^{n+2}/((n+1)(n+2)) − (λ/2)(∂x⁻¹u_y)²`
pub fn energy_from(
    u: &RealField,
    u_hat: &SpectralField,
    w_hat: &SpectralField,
    n: Exponent,
    lambda: Lambda,
) -> f64 {
    let power = n.plus(2);
    let potential: f64 = u.values().iter().map(|&v| real_power_values(v, power)).sum::<f64>()
        * u.grid().cell_area();
    combine_energy(u_hat, w_hat, potential, n, lambda)
}

/// [`energy_from`] with `u^{n+1}` precomputed.
pub fn energy_with_power(
    u: &RealField,
    power: &RealField,
    u_hat: &SpectralField,
    w_hat: &SpectralField,
    n: Exponent,
    lambda: Lambda,
) -> f64 {
    let potential: f64 = u.values().iter().zip(power.values()).map(|(a, b)| a * b).sum::<f64>()
        * u.grid().cell_area();
    combine_energy(u_hat, w_hat, potential, n, lambda)
}

fn combine_energy(u_hat: &SpectralField, w_hat: &SpectralField, potential: f64, n: Exponent, lambda: Lambda) -> f64 {
    let kinetic = 0.5 * u_hat.weighted_norm_sq(|kx, _| kx * kx);
    let transverse = w_hat.weighted_norm_sq(|_, ky| ky * ky);
    let nv = n.value();
    kinetic - potential / ((nv + 1.0) * (nv + 2.0)) - 0.5 * lambda.sign() * transverse
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub linf_u: f64,
    pub l2_uy: f64,
    pub l2_ux: f64,
    pub u_min: f64,
    pub x_min: f64,
    pub y_min: f64,
}

pub fn norms(fft: &Fft2d, u_hat: &SpectralField, refine: bool) -> Result<Norms> {
    let u = fft.inverse(u_hat)?;
    Ok(norms_from(&u, u_hat, refine))
}

pub fn norms_from(u: &RealField, u_hat: &SpectralField, refine: bool) -> Norms {
    let (linf_u, u_min, (x_min, y_min)) = extrema(u, refine);
    Norms {
        linf_u,
        l2_uy: u_hat.weighted_norm_sq(|_, ky| ky * ky).sqrt(),
        l2_ux: u_hat.weighted_norm_sq(|kx, _| kx * kx).sqrt(),
        u_min,
        x_min,
        y_min,
    }
}

/// `(max |u|, min u, location of min u)`.
fn extrema(u: &RealField, refine: bool) -> (f64, f64, (f64, f64)) {
    let g = *u.grid();
    let mut linf: f64 = 0.0;
    let mut best = (f64::INFINITY, 0usize);
    for (i, &v) in u.values().iter().enumerate() {
        linf = linf.max(v.abs());
        if v < best.0 {
            best = (v, i);
        }
    }
    let (ix, iy) = (best.1 % g.nx(), best.1 / g.nx());
    let mut x = g.x(ix);
    let mut y = g.y(iy);
    if refine {
        let (nx, ny) = (g.nx(), g.ny());
        let parabola = |fm: f64, f0: f64, fp: f64| {
            let curv = fm - 2.0 * f0 + fp;
            if curv > 0.0 {
                (0.5 * (fm - fp) / curv).clamp(-0.5, 0.5)
            } else {
                0.0
            }
        };
        let f0 = u.at(ix, iy);
        x += g.dx() * parabola(u.at((ix + nx - 1) % nx, iy), f0, u.at((ix + 1) % nx, iy));
        y += g.dy() * parabola(u.at(ix, (iy + ny - 1) % ny), f0, u.at(ix, (iy + 1) % ny));
    }
    (linf, best.0, (x, y))
}

/// Largest coefficient modulus over the top third of wavenumbers in each
/// direction, relative to the largest modulus overall.
pub fn resolution_indicator(u_hat: &SpectralField) -> (f64, f64) {
    let g = *u_hat.grid();
    let ny = g.ny();
    let x_cut = (g.nx() / 2) as f64 * 2.0 / 3.0;
    let y_cut = (ny / 2) as f64 * 2.0 / 3.0;
    let (mut global, mut tail_x, mut tail_y) = (0.0f64, 0.0f64, 0.0f64);
    for (ix, col) in u_hat.coeffs().chunks_exact(ny).enumerate() {
        let in_x = ix as f64 > x_cut;
        for (iy, c) in col.iter().enumerate() {
            let m = c.norm_sqr();
            global = global.max(m);
            if in_x {
                tail_x = tail_x.max(m);
            }
            if g.ky_mode(iy).unsigned_abs() as f64 > y_cut {
                tail_y = tail_y.max(m);
            }
        }
    }
    if global == 0.0 {
        (0.0, 0.0)
    } else {
        ((tail_x / global).sqrt(), (tail_y / global).sqrt())
    }
}

fn relative_drift(value: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        value.abs()
    } else {
        (value / reference - 1.0).abs()
    }
}

/// Turns solver states into [`DiagnosticsRecord`]s relative to fixed
/// reference mass and energy.
#[derive(Debug, Clone)]
pub struct Monitor {
    pub n: Exponent,
    pub lambda: Lambda,
    pub refine_minimum: bool,
    pub mass0: f64,
    pub energy0: f64,
}

impl Monitor {
    /// Reference values are taken from `(u, u_hat, w_hat)`.
    pub fn new(
        n: Exponent,
        lambda: Lambda,
        refine_minimum: bool,
        u: &RealField,
        u_hat: &SpectralField,
        w_hat: &SpectralField,
    ) -> Self {
        Self {
            n,
            lambda,
            refine_minimum,
            mass0: mass(u_hat),
            energy0: energy_from(u, u_hat, w_hat, n, lambda),
        }
    }

    pub fn with_references(n: Exponent, lambda: Lambda, refine_minimum: bool, mass0: f64, energy0: f64) -> Self {
        Self {
            n,
            lambda,
            refine_minimum,
            mass0,
            energy0,
        }
    }

    pub fn record(
        &self,
        time: f64,
        u: &RealField,
        u_hat: &SpectralField,
        w_hat: &SpectralField,
    ) -> DiagnosticsRecord {
        let e = energy_from(u, u_hat, w_hat, self.n, self.lambda);
        self.assemble(time, e, u, u_hat)
    }

    pub fn record_state(&self, state: &SolverState) -> DiagnosticsRecord {
        let e = energy_with_power(state.u(), state.power(), state.u_hat(), state.w_hat(), self.n, self.lambda);
        self.assemble(state.t, e, state.u(), state.u_hat())
    }

    fn assemble(&self, time: f64, e: f64, u: &RealField, u_hat: &SpectralField) -> DiagnosticsRecord {
        let m = mass(u_hat);
        let norms = norms_from(u, u_hat, self.refine_minimum);
        let (tail_x, tail_y) = resolution_indicator(u_hat);
        DiagnosticsRecord {
            time,
            mass: m,
            energy: e,
            delta_mass: relative_drift(m, self.mass0),
            delta_energy: relative_drift(e, self.energy0),
            linf_u: norms.linf_u,
            l2_uy: norms.l2_uy,
            l2_ux: norms.l2_ux,
            u_min: norms.u_min,
            x_min: norms.x_min,
            y_min: norms.y_min,
            tail_x,
            tail_y,
        }
    }
}

/// `β ∂xx exp(-(x² + y²))` sampled on `grid`.
pub fn gaussian_initial(grid: Grid2D, beta: f64) -> RealField {
    RealField::from_fn(grid, |x, y| beta * (4.0 * x * x - 2.0) * (-(x * x) - y * y).exp())
}
