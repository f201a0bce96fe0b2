//! Blow-up time and rate estimation from norm traces.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{NormId, NormTrace};
use crate::error::{Error, Result};
use crate::gkp::Exponent;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplexConfig {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    pub max_iter: usize,
    pub x_tol: f64,
    pub f_tol: f64,
}

impl Default for SimplexConfig {
    fn default() -> Self {
        Self {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            max_iter: 100_000,
            x_tol: 1e-9,
            f_tol: 1e-9,
        }
    }
}

impl SimplexConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.reflection > 0.0
            && self.expansion > 1.0
            && self.expansion > self.reflection
            && self.contraction > 0.0
            && self.contraction < 1.0
            && self.shrink > 0.0
            && self.shrink < 1.0
            && self.x_tol > 0.0
            && self.f_tol > 0.0
            && self.max_iter > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::param("simplex", "coefficients out of range"))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Nelder–Mead minimization from `x0` with initial edge lengths `steps`.
///
/// Stops when the spread of function values and the simplex diameter (max
/// norm) both fall below the tolerances.
pub fn nelder_mead(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    steps: &[f64],
    cfg: &SimplexConfig,
) -> Result<SimplexResult> {
    cfg.validate()?;
    let d = x0.len();
    if d == 0 || steps.len() != d {
        return Err(Error::param("x0", "dimension mismatch"));
    }
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..d {
        let mut x = x0.to_vec();
        x[i] += steps[i];
        let fx = f(&x);
        simplex.push((x, fx));
    }
    let order = |s: &mut Vec<(Vec<f64>, f64)>| {
        s.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Greater))
    };
    let along = |c: &[f64], x: &[f64], t: f64| -> Vec<f64> {
        c.iter().zip(x).map(|(ci, xi)| ci + t * (xi - ci)).collect()
    };
    order(&mut simplex);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iter {
        let best = &simplex[0];
        let f_spread = simplex.iter().map(|s| (s.1 - best.1).abs()).fold(0.0, f64::max);
        let x_spread = simplex
            .iter()
            .flat_map(|s| s.0.iter().zip(&best.0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if f_spread <= cfg.f_tol && x_spread <= cfg.x_tol {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; d];
        for (x, _) in &simplex[..d] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / d as f64;
            }
        }
        let worst = simplex[d].clone();
        let xr = along(&centroid, &worst.0, -cfg.reflection);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = along(&centroid, &worst.0, -cfg.reflection * cfg.expansion);
            let fe = f(&xe);
            simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let xc = along(&centroid, &worst.0, -cfg.reflection * cfg.contraction);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = along(&centroid, &worst.0, cfg.contraction);
                let fc = f(&xc);
                (xc, fc)
            };
            if fc < fr.min(worst.1) {
                simplex[d] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for s in simplex.iter_mut().skip(1) {
                    s.0 = along(&x_best, &s.0, cfg.shrink);
                    s.1 = f(&s.0);
                }
            }
        }
        order(&mut simplex);
    }
    let (x, fx) = simplex.swap_remove(0);
    Ok(SimplexResult {
        x,
        fx,
        iterations,
        converged,
    })
}

/// Fit of `ln v ≈ C + c ln(t* − t)` over the trailing `k_last` samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    #[serde(rename = "C")]
    pub offset: f64,
    #[serde(rename = "c")]
    pub exponent: f64,
    pub t_star: f64,
    pub residual: f64,
    pub k_last: usize,
    pub norm_id: NormId,
    pub converged: bool,
    pub iterations: usize,
}

/// Smallest admissible gap between `t*` and the last fitted time.
fn t_star_margin(t_last: f64) -> f64 {
    1e-12 * t_last.abs().max(1.0)
}

const PENALTY: f64 = 1e12;

fn log_window(trace: &NormTrace, k_last: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if k_last < 10 {
        return Err(Error::param("k_last", format!("{k_last} is below 10")));
    }
    if trace.len() < k_last {
        return Err(Error::param(
            "k_last",
            format!("{k_last} exceeds the trace length {}", trace.len()),
        ));
    }
    let (t, v) = trace.tail(k_last);
    if let Some(bad) = v.iter().find(|&&v| !(v > 0.0)) {
        return Err(Error::Domain(format!("trace value {bad} is not positive")));
    }
    Ok((t.to_vec(), v.iter().map(|v| v.ln()).collect()))
}

/// Closed-form least squares `y ≈ a x + b`; returns `(a, b, residual)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let a = sxy / sxx;
    let b = my - a * mx;
    let r = x.iter().zip(y).map(|(xi, yi)| (yi - a * xi - b).powi(2)).sum();
    (a, b, r)
}

fn log_power_objective(t: &[f64], ln_v: &[f64], p: &[f64]) -> f64 {
    let (c0, c, ts) = (p[0], p[1], p[2]);
    let t_last = *t.last().expect("non-empty window");
    let floor = t_last + t_star_margin(t_last);
    if !(ts > floor) {
        return PENALTY * (1.0 + (floor - ts));
    }
    t.iter()
        .zip(ln_v)
        .map(|(ti, yi)| (yi - c0 - c * (ts - ti).ln()).powi(2))
        .sum()
}

/// Starting point: for a log-spaced set of trial `t*` the remaining two
/// parameters are linear; the best trial wins.
pub fn initial_guess(trace: &NormTrace, k_last: usize) -> Result<(f64, f64, f64)> {
    let (t, y) = log_window(trace, k_last)?;
    let t_last = t[t.len() - 1];
    let span = (t_last - t[0]).max(t_star_margin(t_last));
    let mut best = (f64::INFINITY, (0.0, 0.0, 0.0));
    for j in 0..=160 {
        let gap = span * 10f64.powf(-6.0 + 8.0 * j as f64 / 160.0);
        let ts = t_last + gap;
        let x: Vec<f64> = t.iter().map(|ti| (ts - ti).ln()).collect();
        let (c, c0, r) = linear_fit(&x, &y);
        if r < best.0 {
            best = (r, (c0, c, ts));
        }
    }
    Ok(best.1)
}

/// Nelder–Mead fit of `ln v = C + c ln(t* − t)` on the trailing `k_last`
/// points; `guess` defaults to [`initial_guess`].
pub fn fit_log_power(
    trace: &NormTrace,
    norm_id: NormId,
    k_last: usize,
    guess: Option<(f64, f64, f64)>,
    cfg: &SimplexConfig,
) -> Result<FitResult> {
    let (t, y) = log_window(trace, k_last)?;
    let t_last = t[t.len() - 1];
    let (c0, c, ts) = match guess {
        Some(g) => g,
        None => initial_guess(trace, k_last)?,
    };
    if !(ts > t_last) {
        return Err(Error::param("t_star", format!("guess {ts} is not after {t_last}")));
    }
    let step = |v: f64| if v != 0.0 { 0.05 * v } else { 0.00025 };
    let steps = [step(c0), step(c), 0.05 * (ts - t_last)];
    let res = nelder_mead(|p| log_power_objective(&t, &y, p), &[c0, c, ts], &steps, cfg)?;
    Ok(FitResult {
        offset: res.x[0],
        exponent: res.x[1],
        t_star: res.x[2],
        residual: res.fx,
        k_last,
        norm_id,
        converged: res.converged,
        iterations: res.iterations,
    })
}

/// `ln x_m = α₁ ln(t* − t) + α₂` for fixed `t*`; returns `(α₁, α₂)`.
pub fn fit_xmin(trace: &NormTrace, t_star: f64, k_last: usize) -> Result<(f64, f64)> {
    if k_last < 2 || trace.len() < k_last {
        return Err(Error::param("k_last", format!("{k_last} does not fit the trace")));
    }
    let (t, v) = trace.tail(k_last);
    if v.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::Domain("x_min changes sign or vanishes in the window".into()));
    }
    if !(t_star > t[t.len() - 1]) {
        return Err(Error::param("t_star", "must follow the last time"));
    }
    let x: Vec<f64> = t.iter().map(|ti| (t_star - ti).ln()).collect();
    let y: Vec<f64> = v.iter().map(|v| v.ln()).collect();
    let (a1, a2, _) = linear_fit(&x, &y);
    Ok((a1, a2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    AlgebraicCritical,
    ExponentialSupercritical,
}

/// Predicted exponents of `‖u‖∞` and `‖u_y‖₂` against `(t* − t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePrediction {
    pub n: Exponent,
    pub regime: Regime,
    pub linf_exp: f64,
    /// Exponent of the unsquared `‖u_y‖₂`.
    pub l2uy_exp: f64,
    pub gamma1: Option<f64>,
    /// Sign of `a∞` in the supercritical regime.
    pub kappa_sign: Option<i8>,
}

impl RatePrediction {
    pub fn exponent_for(&self, id: NormId) -> Option<f64> {
        match id {
            NormId::LinfU => Some(self.linf_exp),
            NormId::L2Uy => Some(self.l2uy_exp),
            NormId::L2UySquared => Some(2.0 * self.l2uy_exp),
            NormId::XMin => None,
        }
    }
}

/// Exponents from `L ∝ (t* − t)^{1/(3 + 1/γ₁)}` at `n = 4/3` and
/// `L ∝ (t* − t)^{1/3}` above it.
pub fn predict_rates(n: Exponent, gamma1: Option<f64>) -> Result<RatePrediction> {
    let critical = Exponent::new(4, 3).expect("valid");
    let (p, q) = (n.num() as u64, n.den() as u64);
    // compare p/q with 4/3 exactly
    match (3 * p).cmp(&(4 * q)) {
        std::cmp::Ordering::Less => Err(Error::NoBlowUpPredicted(n.value())),
        std::cmp::Ordering::Equal => {
            let g = gamma1.unwrap_or(-1.0);
            let denom = 3.0 + 1.0 / g;
            if !(g < -1.0 / 3.0) {
                return Err(Error::param("gamma1", format!("{g} must be below -1/3")));
            }
            Ok(RatePrediction {
                n: critical,
                regime: Regime::AlgebraicCritical,
                linf_exp: -2.0 / (critical.value() * denom),
                l2uy_exp: -2.0 / denom,
                gamma1: Some(g),
                kappa_sign: None,
            })
        }
        std::cmp::Ordering::Greater => {
            let nv = n.value();
            Ok(RatePrediction {
                n,
                regime: Regime::ExponentialSupercritical,
                linf_exp: -2.0 / (3.0 * nv),
                l2uy_exp: -(1.0 + 4.0 / nv) / 6.0,
                gamma1: None,
                kappa_sign: Some(-1),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    MatchesAlgebraic,
    MatchesExponential,
    Inconclusive,
}

pub fn classify(fit: &FitResult, pred: &RatePrediction, tol: f64) -> Verdict {
    match pred.exponent_for(fit.norm_id) {
        Some(c) if (fit.exponent - c).abs() <= tol => match pred.regime {
            Regime::AlgebraicCritical => Verdict::MatchesAlgebraic,
            Regime::ExponentialSupercritical => Verdict::MatchesExponential,
        },
        _ => Verdict::Inconclusive,
    }
}

/// Relative disagreement of two blow-up time estimates.
pub fn t_star_consistency(a: &FitResult, b: &FitResult) -> f64 {
    (a.t_star - b.t_star).abs() / a.t_star.abs().max(b.t_star.abs())
}
