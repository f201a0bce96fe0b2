//! Acceptance suite. Every test prints one `criterion N: PASS|FAIL` line to
//! stderr (past the test harness capture) before asserting.
//!
//! The blow-up reproductions run scaled presets and take minutes each; their
//! output directories are left under `target/tmp/acceptance`.

use std::io::Write;
use std::time::Instant;

use gkp_cli::runner::{read_diagnostics, DIAGNOSTICS_FILE};
use gkp_cli::{resolve, run, RunOptions, RunReport};
use gkp_core::diagnostics::{energy, gaussian_initial, mass};
use gkp_core::etd::{contour_coefficients, etdrk4_step, zero_nonlinearity};
use gkp_core::fit::{fit_log_power, SimplexConfig};
use gkp_core::gkp::{linear_symbol, run_direct};
use gkp_core::spectral::default_regularization;
use gkp_core::{
    Complex64, ContourConfig, DiagnosticsRecord, DiagonalOperator, Exponent, Fft2d, GkpParams,
    Grid2D, InitialData, Lambda, NormId, NormTrace, RealField, SpectralField,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(criterion: u32, pass: bool, detail: &str) {
    let line = format!(
        "criterion {criterion:>2}: {} {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {criterion} failed: {detail}");
}

fn run_preset(name: &str, scale_factor: usize, sets: &[&str]) -> (RunReport, Vec<DiagnosticsRecord>) {
    let sets: Vec<String> = sets.iter().map(|s| s.to_string()).collect();
    let (cfg, raw, preset) = resolve(Some(name), None, &sets, scale_factor).unwrap();
    // kept after the run so a failing criterion can be inspected
    let dir = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(format!("{name}-sf{scale_factor}"));
    let _ = std::fs::remove_dir_all(&dir);
    let opts = RunOptions {
        output_dir: Some(dir.clone()),
        preset: Some(name.to_string()),
        expect: preset.map(|p| p.expect.clone()),
        config_text: Some(raw.render()),
        ..Default::default()
    };
    let report = run(&cfg, &opts).unwrap();
    let records = read_diagnostics(&dir.join(DIAGNOSTICS_FILE)).unwrap();
    (report, records)
}

/// Largest relative rise of `norm` over the records with `time >= after`.
fn worst_rise(records: &[DiagnosticsRecord], after: f64, norm: NormId) -> f64 {
    let v: Vec<f64> = records.iter().filter(|r| r.time >= after).map(|r| r.norm(norm)).collect();
    v.windows(2).map(|w| (w[1] - w[0]) / w[0]).fold(f64::NEG_INFINITY, f64::max)
}

fn fitted(report: &RunReport, norm: &str) -> (f64, f64) {
    let entry = report.fits.iter().find(|f| f.norm == norm).expect("fit requested");
    let fit = entry.fit.as_ref().unwrap_or_else(|| panic!("{norm} fit failed: {:?}", entry.error));
    (fit.exponent, fit.t_star)
}

fn max_diff(a: &RealField, b: &RealField) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

const C1_STEPS: [usize; 3] = [20, 40, 80];
const C1_T_END: f64 = 0.02;
const C1_RATIO: (f64, f64) = (12.0, 20.0);
const C1_SECONDS: f64 = 60.0;

#[test]
fn criterion_01_etdrk4_order() {
    let started = Instant::now();
    let (cfg, _, _) = resolve(Some("gkp1-n2-beta1"), None, &[], 4).unwrap();
    let base = cfg.gkp_params().unwrap();
    assert_eq!((base.grid.nx(), base.grid.ny()), (256, 256));
    let solve = |steps: usize| {
        let mut p = GkpParams::with_steps(base.exponent, base.lambda, base.grid, steps, C1_T_END).unwrap();
        p.regularization = base.regularization;
        let out = run_direct(&p, &InitialData::Gaussian { beta: cfg.beta }, &mut ()).unwrap();
        out.state.into_u()
    };
    let [a, b, c] = C1_STEPS.map(solve);
    let ratio = max_diff(&a, &b) / max_diff(&b, &c);
    let seconds = started.elapsed().as_secs_f64();
    verdict(
        1,
        (C1_RATIO.0..=C1_RATIO.1).contains(&ratio) && seconds < C1_SECONDS,
        &format!("self-convergence ratio {ratio:.3} in [12, 20], {seconds:.1} s"),
    );
}

const C2_SAMPLES: usize = 10_000;
const C2_TOLERANCE: f64 = 1e-11;

/// `Σ_{k<40} z^k / (k + i)!`.
fn phi_series(z: Complex64, i: u32) -> Complex64 {
    let mut term = Complex64::new(1.0 / (1..=i).map(f64::from).product::<f64>(), 0.0);
    let mut sum = term;
    for k in 1..40u32 {
        term = term * z / f64::from(k + i);
        sum += term;
    }
    sum
}

#[test]
fn criterion_02_phi_functions_against_series() {
    let grid = Grid2D::new(256, 128, 1.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut symbol = vec![Complex64::new(0.0, 0.0); grid.spectral_len()];
    assert!(symbol.len() >= C2_SAMPLES);
    for s in symbol.iter_mut().take(C2_SAMPLES) {
        let magnitude = 10f64.powf(rng.gen_range(-8.0..=0.0));
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        *s = Complex64::new(0.0, sign * magnitude);
    }
    let h = 1.0;
    let op = DiagonalOperator::new(grid, symbol.clone()).unwrap();
    let c = contour_coefficients(&op, h, &ContourConfig::default()).unwrap();
    let rel = |got: Complex64, want: Complex64| (got - want).norm() / want.norm();
    let mut worst = 0.0f64;
    for (i, &z) in symbol.iter().enumerate().take(C2_SAMPLES) {
        let z = z * h;
        let (p1, p2, p3) = (phi_series(z, 1), phi_series(z, 2), phi_series(z, 3));
        let want = [
            (c.e[i], z.exp()),
            (c.e2[i], (0.5 * z).exp()),
            (c.q[i], 0.5 * h * phi_series(0.5 * z, 1)),
            (c.f1[i], h * (p1 - 3.0 * p2 + 4.0 * p3)),
            (c.f2[i], h * 2.0 * (p2 - 2.0 * p3)),
            (c.f3[i], h * (-p2 + 4.0 * p3)),
        ];
        for (got, want) in want {
            worst = worst.max(rel(got, want));
        }
    }
    verdict(
        2,
        worst < C2_TOLERANCE,
        &format!("max relative error {worst:.2e} < 1e-11 over {C2_SAMPLES} samples"),
    );
}

const C3_STEPS: usize = 1000;
const C3_TOLERANCE: f64 = 1e-12;

#[test]
fn criterion_03_linear_exactness() {
    let grid = Grid2D::new(64, 64, 5.0, 5.0).unwrap();
    let fft = Fft2d::new(grid);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noise = RealField::new(grid, (0..grid.real_len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
    let mut u0 = fft.forward(&noise).unwrap();
    u0.project_zero_x_mean();
    assert!(u0.hermitian_defect() < 1e-14);

    let op = linear_symbol(grid, Lambda::KpI, default_regularization(&grid)).unwrap();
    let h = 1e-3;
    let coeffs = contour_coefficients(&op, h, &ContourConfig::default()).unwrap();
    let mut zero = zero_nonlinearity;
    let mut u = u0.clone();
    for step in 0..C3_STEPS {
        u = etdrk4_step(&u, step as f64 * h, &coeffs, &mut zero, step).unwrap();
    }
    // the regularized symbol has a tiny real part, so the exact amplitude is
    // |exp(L T)| |û₀| rather than |û₀|
    let t_end = C3_STEPS as f64 * h;
    let scale = u0.max_abs();
    let drift = u0
        .coeffs()
        .iter()
        .zip(u.coeffs())
        .zip(op.symbol().iter().zip(op.active()))
        .filter(|(_, (_, &active))| active)
        .map(|((a, b), (l, _))| (a.norm() * (l.re * t_end).exp() - b.norm()).abs() / scale)
        .fold(0.0, f64::max);
    verdict(
        3,
        drift < C3_TOLERANCE,
        &format!("per-mode amplitude drift {drift:.2e} < 1e-12 after {C3_STEPS} steps"),
    );
}

const C4_ENERGY: f64 = 1e-4;
const C4_AFTER: f64 = 0.1;
/// Relative rise tolerated between consecutive samples; the sup norm is read
/// off grid values, so a peak travelling between nodes can wobble slightly.
const C4_RISE: f64 = 1e-6;

#[test]
fn criterion_04_conservation_smooth_regime() {
    let (report, records) = run_preset("gkp1-n43-beta1", 2, &[]);
    assert_eq!((report.nx, report.ny, report.steps), (512, 512, 500));
    let last = records.last().unwrap();
    let rise_inf = worst_rise(&records, C4_AFTER, NormId::LinfU);
    let rise_uy = worst_rise(&records, C4_AFTER, NormId::L2Uy);
    let pass = report.termination == "completed"
        && (last.time - 0.5).abs() < 1e-12
        && last.delta_energy < C4_ENERGY
        && rise_inf <= C4_RISE
        && rise_uy <= C4_RISE;
    verdict(
        4,
        pass,
        &format!(
            "{} at t = {}, delta_energy {:.2e} < 1e-4, worst rise after t = 0.1: linf {rise_inf:.1e}, l2_uy {rise_uy:.1e}",
            report.termination, last.time, last.delta_energy
        ),
    );
}

const C5_WINDOW: (f64, f64) = (0.024, 0.028);
const C5_EXPONENT: (f64, f64) = (-0.50, -0.28);
const C5_T_STAR: f64 = 0.0258;
const C5_T_STAR_REL: f64 = 0.05;

#[test]
fn criterion_05_supercritical_blow_up() {
    let (report, _) = run_preset("gkp1-n2-beta6", 4, &[]);
    assert_eq!((report.nx, report.ny), (512, 2048));
    let (c, t_star) = fitted(&report, "linf_u");
    let pass = report.termination == "delta_exceeded"
        && (C5_WINDOW.0..=C5_WINDOW.1).contains(&report.final_time)
        && (C5_EXPONENT.0..=C5_EXPONENT.1).contains(&c)
        && ((t_star - C5_T_STAR) / C5_T_STAR).abs() <= C5_T_STAR_REL;
    verdict(
        5,
        pass,
        &format!(
            "{} at t = {:.6} in [0.024, 0.028], linf exponent {c:.4} in [-0.50, -0.28], t* = {t_star:.5} within 5% of 0.0258",
            report.termination, report.final_time
        ),
    );
}

const C6_WINDOW: (f64, f64) = (0.070, 0.080);
const C6_EXPONENT: (f64, f64) = (-0.85, -0.60);

#[test]
fn criterion_06_critical_blow_up() {
    let (report, _) = run_preset("gkp1-n43-beta12", 4, &[]);
    let (c, t_star) = fitted(&report, "linf_u");
    let pass = report.termination == "delta_exceeded"
        && (C6_WINDOW.0..=C6_WINDOW.1).contains(&report.final_time)
        && (C6_EXPONENT.0..=C6_EXPONENT.1).contains(&c);
    verdict(
        6,
        pass,
        &format!(
            "{} at t = {:.5} in [0.070, 0.080], linf exponent {c:.4} in [-0.85, -0.60] (t* = {t_star:.5})",
            report.termination, report.final_time
        ),
    );
}

/// Share of the run treated as the initial transient.
const C7_TRANSIENT: f64 = 0.2;
const C7_RISE: f64 = 1e-6;
const C7_EXPONENT_BAND: f64 = 0.1;

#[test]
fn criterion_07_gkp2_thresholds() {
    let mut notes = Vec::new();
    let mut pass = true;
    for name in ["gkp2-n43-beta6", "gkp2-n2-beta6"] {
        let (report, records) = run_preset(name, 2, &[]);
        let rise = worst_rise(&records, C7_TRANSIENT * report.t_end, NormId::LinfU);
        pass &= report.termination == "completed" && rise <= C7_RISE;
        notes.push(format!("{name}: {}, worst linf rise {rise:.1e}", report.termination));
    }
    for (name, paper) in [("gkp2-n3-beta6", -0.1721), ("gkp2-n4-beta3", -0.1623)] {
        let (report, _) = run_preset(name, 4, &[]);
        let (c, _) = fitted(&report, "linf_u");
        pass &= report.termination == "delta_exceeded" && c < 0.0 && (c - paper).abs() <= C7_EXPONENT_BAND;
        notes.push(format!("{name}: {} at t = {:.4e}, linf exponent {c:.4} vs {paper}", report.termination, report.final_time));
    }
    verdict(7, pass, &notes.join("; "));
}

const C8_DISCREPANCY: f64 = 0.05;

#[test]
fn criterion_08_rescaled_direct_crosscheck() {
    let (report, _) = run_preset("crosscheck-n43", 2, &[]);
    let x = report.crosscheck.as_ref().expect("crosscheck section");
    verdict(
        8,
        x.discrepancy < C8_DISCREPANCY && x.points > 0,
        &format!(
            "relative sup discrepancy {:.3e} < 0.05 on |x| <= {} at t = {:.5} (tau = {:.4}, L = {:.4})",
            x.discrepancy, x.core_half_width, x.t_phys, x.tau_end, x.scale
        ),
    );
}

const C9_TRIPLES: usize = 100;
const C9_POINTS: usize = 400;
const C9_EXACT: f64 = 1e-5;
const C9_NOISE: f64 = 0.01;
const C9_NOISY_EXPONENT: f64 = 0.05;

/// Uniformly sampled trace of `exp(C) (t* − t)^c` ending `gap·t*` before `t*`.
fn synthetic(rng: &mut ChaCha8Rng, noise: f64) -> ((f64, f64, f64), NormTrace) {
    let big_c = rng.gen_range(-2.0..2.0);
    let c = rng.gen_range(-3.0..-0.1);
    let t_star = rng.gen_range(0.01..1.0);
    let t_last = t_star * (1.0 - 10f64.powf(rng.gen_range(-4.0..-2.0)));
    let times: Vec<f64> = (0..C9_POINTS).map(|i| t_last * i as f64 / (C9_POINTS - 1) as f64).collect();
    let values = times
        .iter()
        .map(|t| (big_c + c * (t_star - t).ln()).exp() * (1.0 + noise * rng.gen_range(-1.0..=1.0)))
        .collect();
    ((big_c, c, t_star), NormTrace::from_pairs("synthetic", times, values).unwrap())
}

#[test]
fn criterion_09_fit_engine_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cfg = SimplexConfig {
        x_tol: 1e-12,
        f_tol: 1e-14,
        ..Default::default()
    };
    let mut worst = 0.0f64;
    for _ in 0..C9_TRIPLES {
        let ((big_c, c, t_star), trace) = synthetic(&mut rng, 0.0);
        let fit = fit_log_power(&trace, NormId::LinfU, C9_POINTS, None, &cfg).unwrap();
        let err = (fit.offset - big_c)
            .abs()
            .max((fit.exponent - c).abs())
            .max((fit.t_star - t_star).abs() / t_star);
        worst = worst.max(err);
    }
    let mut worst_noisy = 0.0f64;
    for _ in 0..C9_TRIPLES {
        let ((_, c, _), trace) = synthetic(&mut rng, C9_NOISE);
        let fit = fit_log_power(&trace, NormId::LinfU, C9_POINTS, None, &cfg).unwrap();
        worst_noisy = worst_noisy.max((fit.exponent - c).abs());
    }
    verdict(
        9,
        worst < C9_EXACT && worst_noisy <= C9_NOISY_EXPONENT,
        &format!("noiseless worst error {worst:.2e} < 1e-5; with 1% noise worst |dc| {worst_noisy:.3} <= 0.05"),
    );
}

const C10_S: f64 = 2.0;
const C10_T_END: f64 = 0.01;
const C10_STEPS: usize = 100;
const C10_TOLERANCE: f64 = 1e-6;

/// `v(x, y, t) = s^{2/n} u(s x, s² y, s³ t)` on the correspondingly shrunken box.
#[test]
fn criterion_10_scaling_covariance() {
    let n = Exponent::new(2, 1).unwrap();
    let g = Grid2D::new(256, 256, 8.0, 8.0).unwrap();
    let gs = Grid2D::new(256, 256, 8.0 / C10_S, 8.0 / (C10_S * C10_S)).unwrap();
    // the default regularization is proportional to the smallest kx, so it
    // scales with the box
    let params = |grid: Grid2D, t_end: f64| GkpParams::with_steps(n, Lambda::KpI, grid, C10_STEPS, t_end).unwrap();
    let amp = C10_S.powf(2.0 / n.value());
    let u0 = gaussian_initial(g, 1.0);
    let v0 = RealField::new(gs, u0.values().iter().map(|u| amp * u).collect()).unwrap();
    let a = run_direct(&params(g, C10_T_END), &InitialData::Field(u0), &mut ()).unwrap();
    let b = run_direct(&params(gs, C10_T_END / C10_S.powi(3)), &InitialData::Field(v0), &mut ()).unwrap();
    let scaled = RealField::new(gs, a.state.u().values().iter().map(|u| amp * u).collect()).unwrap();
    let err = max_diff(&scaled, b.state.u()) / b.state.u().max_abs();
    verdict(
        10,
        err < C10_TOLERANCE,
        &format!("s = 2 covariance relative error {err:.2e} < 1e-6 at t = {C10_T_END}"),
    );
}

const C11_MASS: f64 = 1e-10;

#[test]
fn criterion_11_mass_and_energy_signs() {
    let g = Grid2D::new(256, 256, 5.0, 5.0).unwrap();
    let fft = Fft2d::new(g);
    let u_hat = |beta: f64| -> SpectralField { fft.forward(&gaussian_initial(g, beta)).unwrap() };
    let mut mass_err = 0.0f64;
    for beta in [1.0, 3.0, 6.0, 7.0, 12.0] {
        let want = beta * (1.5 * std::f64::consts::PI).sqrt();
        mass_err = mass_err.max((mass(&u_hat(beta)) - want).abs() / want);
    }
    let n43 = Exponent::new(4, 3).unwrap();
    let n2 = Exponent::new(2, 1).unwrap();
    // (equation, n, beta, energy positive)
    let table = [
        (Lambda::KpI, n43, 1.0, true),
        (Lambda::KpI, n43, 7.0, true),
        (Lambda::KpI, n43, 12.0, false),
        (Lambda::KpI, n2, 1.0, true),
        (Lambda::KpI, n2, 3.0, true),
        (Lambda::KpI, n2, 6.0, false),
        (Lambda::KpII, n2, 6.0, false),
    ];
    let mut wrong = Vec::new();
    for (lambda, n, beta, positive) in table {
        let e = energy(&fft, &u_hat(beta), n, lambda).unwrap();
        if (e > 0.0) != positive {
            wrong.push(format!("{lambda:?} n = {n} beta = {beta}: E = {e:.4}"));
        }
    }
    verdict(
        11,
        mass_err < C11_MASS && wrong.is_empty(),
        &format!(
            "mass relative error {mass_err:.1e} < 1e-10; {} of {} energy signs match{}",
            table.len() - wrong.len(),
            table.len(),
            if wrong.is_empty() { String::new() } else { format!(" ({})", wrong.join(", ")) }
        ),
    );
}
