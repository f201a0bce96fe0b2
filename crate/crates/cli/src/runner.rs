//! Executes a [`RunConfig`] and writes its outputs.
//!
//! An output directory receives `config.ini` (the effective configuration),
//! `diagnostics.csv`, `slice_*.csv` files with the `y = 0` row, `*.gkps`
//! snapshots and `report.json`. Diagnostics are appended from the solver
//! loop, so a failed run keeps everything written up to the failure.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use gkp_core::diagnostics::CSV_HEADER;
use gkp_core::fit::{classify, fit_log_power, predict_rates};
use gkp_core::rescaled::{axis_slice, rescale_back};
use gkp_core::spectral::PointEvaluator;
use gkp_core::{
    DiagnosticsRecord, DirectSolver, FitResult, InitialData, NormTrace, RealField,
    RescaledOutcome, RescaledSolver, RescaledTermination, SolverState, Verdict,
};
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, RunConfig, SolverKind};
use crate::presets::{Expectation, ReportedFit};
use crate::snapshot::{Snapshot, SnapshotError};

pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const REPORT_FILE: &str = "report.json";
pub const FINAL_SNAPSHOT: &str = "final.gkps";
pub const FINAL_SLICE: &str = "slice_final.csv";

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solver(#[from] gkp_core::Error),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error("{context}: {source}")]
    Io { context: String, source: io::Error },
    #[error("resume: {0}")]
    Resume(String),
}

impl RunError {
    /// Process exit status for a run that could not produce a report.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Solver(gkp_core::Error::Diverged { .. }) => 3,
            _ => 1,
        }
    }
}

fn io_err(context: impl Into<String>) -> impl FnOnce(io::Error) -> RunError {
    let context = context.into();
    move |source| RunError::Io { context, source }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides `output.directory`.
    pub output_dir: Option<PathBuf>,
    /// Continue a direct run from this snapshot.
    pub resume: Option<PathBuf>,
    pub preset: Option<String>,
    pub expect: Option<Expectation>,
    /// Effective configuration text written next to the outputs.
    pub config_text: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitEntry {
    pub norm: String,
    pub k_last: usize,
    #[serde(flatten)]
    pub fit: Option<FitResult>,
    pub error: Option<String>,
    pub predicted_exponent: Option<f64>,
    pub verdict: Option<Verdict>,
    pub reported: Option<ReportedFit>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CrosscheckReport {
    pub tau_end: f64,
    pub t_phys: f64,
    pub scale: f64,
    pub rescaled_termination: String,
    pub direct_termination: String,
    pub core_half_width: f64,
    pub points: usize,
    /// `max |u_direct − u_rescaled| / max |u_direct|` on `|x| ≤ core_half_width`.
    pub discrepancy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub preset: Option<String>,
    pub solver: &'static str,
    pub scale_factor: usize,
    pub nx: usize,
    pub ny: usize,
    pub scale_x: f64,
    pub scale_y: f64,
    pub n: String,
    pub lambda: f64,
    pub beta: f64,
    pub h: f64,
    pub t_end: f64,
    pub termination: String,
    pub exit_code: i32,
    pub final_time: f64,
    pub steps: usize,
    pub delta_energy: f64,
    pub delta_mass: f64,
    pub max_delta_energy: f64,
    pub max_delta_mass: f64,
    pub records: usize,
    pub resumed_from: Option<String>,
    pub threads: usize,
    pub deterministic: bool,
    pub fits: Vec<FitEntry>,
    pub crosscheck: Option<CrosscheckReport>,
    pub expected: Option<Expectation>,
    pub output_dir: Option<String>,
}

/// Runs `cfg` on a pool with the configured thread count.
pub fn run(cfg: &RunConfig, opts: &RunOptions) -> Result<RunReport, RunError> {
    let threads = cfg.threads.unwrap_or_else(rayon::current_num_threads);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| RunError::Resume(e.to_string()))?;
    pool.install(|| run_here(cfg, opts, threads))
}

fn run_here(cfg: &RunConfig, opts: &RunOptions, threads: usize) -> Result<RunReport, RunError> {
    let dir = opts.output_dir.clone().or_else(|| cfg.output_dir.clone());
    if let Some(d) = &dir {
        fs::create_dir_all(d).map_err(io_err(format!("create {}", d.display())))?;
        if let Some(text) = &opts.config_text {
            fs::write(d.join("config.ini"), text).map_err(io_err("write config.ini"))?;
        }
    }
    if opts.resume.is_some() && cfg.kind != SolverKind::Direct {
        return Err(RunError::Resume("only direct runs can be resumed".into()));
    }
    let mut report = match cfg.kind {
        SolverKind::Direct => direct(cfg, dir.as_deref(), opts.resume.as_deref())?,
        SolverKind::Rescaled => rescaled(cfg, dir.as_deref())?,
        SolverKind::Crosscheck => crosscheck(cfg, dir.as_deref())?,
    };
    report.preset = opts.preset.clone();
    if let Some(e) = &opts.expect {
        for f in &mut report.fits {
            f.reported = e.fits.iter().find(|r| r.norm == f.norm).copied();
        }
    }
    report.expected = opts.expect.clone();
    report.threads = threads;
    report.output_dir = dir.as_ref().map(|d| d.display().to_string());
    if let Some(d) = &dir {
        write_fit_report(d, &report.fits)?;
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        fs::write(d.join(REPORT_FILE), json + "\n").map_err(io_err("write report"))?;
    }
    Ok(report)
}

fn base_report(cfg: &RunConfig) -> RunReport {
    RunReport {
        preset: None,
        solver: cfg.kind.name(),
        scale_factor: cfg.scale_factor,
        nx: cfg.nx,
        ny: cfg.ny,
        scale_x: cfg.scale_x,
        scale_y: cfg.scale_y,
        n: cfg.exponent.to_string(),
        lambda: cfg.lambda.sign(),
        beta: cfg.beta,
        h: cfg.h(),
        t_end: cfg.t_end,
        termination: String::new(),
        exit_code: 0,
        final_time: 0.0,
        steps: 0,
        delta_energy: 0.0,
        delta_mass: 0.0,
        max_delta_energy: 0.0,
        max_delta_mass: 0.0,
        records: 0,
        resumed_from: None,
        threads: 1,
        deterministic: cfg.deterministic,
        fits: Vec::new(),
        crosscheck: None,
        expected: None,
        output_dir: None,
    }
}

fn initial_data(cfg: &RunConfig) -> Result<InitialData, RunError> {
    match &cfg.snapshot {
        None => Ok(InitialData::Gaussian { beta: cfg.beta }),
        Some(path) => {
            let snap = Snapshot::read(path)?;
            if snap.u.grid() != &cfg.grid()? {
                return Err(RunError::Resume(format!(
                    "initial snapshot {} does not match the configured grid",
                    path.display()
                )));
            }
            Ok(InitialData::Field(snap.u))
        }
    }
}

/// Streams records to `diagnostics.csv` at the configured stride and writes
/// periodic snapshots.
struct Sink<'a> {
    cfg: &'a RunConfig,
    dir: Option<&'a Path>,
    csv: Option<BufWriter<File>>,
    last_written: Option<f64>,
    records: Vec<DiagnosticsRecord>,
    error: Option<RunError>,
}

impl<'a> Sink<'a> {
    fn open(cfg: &'a RunConfig, dir: Option<&'a Path>, file: &str, append: bool) -> Result<Self, RunError> {
        let csv = match dir {
            None => None,
            Some(d) => {
                let path = d.join(file);
                let fresh = !append || !path.exists();
                let f = OpenOptions::new()
                    .create(true)
                    .write(true)
                    .append(!fresh)
                    .truncate(fresh)
                    .open(&path)
                    .map_err(io_err(format!("open {}", path.display())))?;
                let mut w = BufWriter::new(f);
                if fresh {
                    writeln!(w, "{CSV_HEADER}").map_err(io_err("write diagnostics"))?;
                }
                Some(w)
            }
        };
        Ok(Self {
            cfg,
            dir,
            csv,
            last_written: None,
            records: Vec::new(),
            error: None,
        })
    }

    fn write(&mut self, r: &DiagnosticsRecord) {
        self.last_written = Some(r.time);
        if let Some(w) = &mut self.csv {
            if let Err(e) = writeln!(w, "{}", r.csv_line()) {
                self.error.get_or_insert(RunError::Io {
                    context: "write diagnostics".into(),
                    source: e,
                });
            }
        }
    }

    fn observe(&mut self, r: &DiagnosticsRecord, state: &SolverState) {
        self.records.push(*r);
        if state.step_index % self.cfg.diag_stride == 0 {
            self.write(r);
        }
        let stride = self.cfg.snapshot_stride;
        if stride > 0 && state.step_index > 0 && state.step_index % stride == 0 {
            if let Some(d) = self.dir {
                let res = write_direct_outputs(self.cfg, d, state, &format!("{:07}", state.step_index));
                if let Err(e) = res {
                    self.error.get_or_insert(e);
                }
            }
        }
    }

    /// Writes the final record if the stride skipped it and flushes.
    fn finish(mut self, last: &DiagnosticsRecord) -> Result<Vec<DiagnosticsRecord>, RunError> {
        if self.last_written != Some(last.time) {
            self.write(last);
        }
        if let Some(w) = &mut self.csv {
            w.flush().map_err(io_err("flush diagnostics"))?;
        }
        match self.error {
            Some(e) => Err(e),
            None => Ok(self.records),
        }
    }
}

fn write_slice(path: &Path, points: &[(f64, f64)]) -> Result<(), RunError> {
    let f = File::create(path).map_err(io_err(format!("create {}", path.display())))?;
    let mut w = BufWriter::new(f);
    let mut body = || -> io::Result<()> {
        writeln!(w, "x,u")?;
        for (x, u) in points {
            writeln!(w, "{x:e},{u:e}")?;
        }
        w.flush()
    };
    body().map_err(io_err(format!("write {}", path.display())))
}

fn write_direct_outputs(cfg: &RunConfig, dir: &Path, state: &SolverState, tag: &str) -> Result<(), RunError> {
    let snap = Snapshot {
        u: state.u().clone(),
        t: state.t,
        l: 1.0,
        exponent: cfg.exponent,
        lambda: cfg.lambda,
    };
    let name = if tag == "final" { FINAL_SNAPSHOT.to_string() } else { format!("snapshot_{tag}.gkps") };
    snap.write(&dir.join(name))?;
    if cfg.slices {
        write_slice(&dir.join(format!("slice_{tag}.csv")), &axis_slice(state.u()))?;
    }
    Ok(())
}

fn drift_maxima(records: &[DiagnosticsRecord]) -> (f64, f64) {
    records.iter().fold((0.0f64, 0.0f64), |(e, m), r| (e.max(r.delta_energy), m.max(r.delta_mass)))
}

fn direct(cfg: &RunConfig, dir: Option<&Path>, resume: Option<&Path>) -> Result<RunReport, RunError> {
    let solver = DirectSolver::new(cfg.gkp_params()?)?;
    let reference = solver.initial_state(&initial_data(cfg)?)?;
    let monitor = solver.monitor(&reference);
    let (start, emit_start) = match resume {
        None => (reference, true),
        Some(path) => {
            let snap = Snapshot::read(path)?;
            if snap.u.grid() != &solver.params().grid || snap.exponent != cfg.exponent || snap.lambda != cfg.lambda {
                return Err(RunError::Resume(format!(
                    "{} was written by a different configuration",
                    path.display()
                )));
            }
            (solver.state_at(snap.u, snap.t)?, false)
        }
    };
    let mut sink = Sink::open(cfg, dir, DIAGNOSTICS_FILE, resume.is_some())?;
    let outcome = solver.run_from(
        start,
        &monitor,
        &mut |r: &DiagnosticsRecord, s: &SolverState| sink.observe(r, s),
        emit_start,
    )?;
    let records = sink.finish(&outcome.last)?;
    if let Some(d) = dir {
        write_direct_outputs(cfg, d, &outcome.state, "final")?;
    }

    let mut report = base_report(cfg);
    report.termination = outcome.termination.name().to_string();
    report.exit_code = outcome.termination.exit_code();
    report.final_time = outcome.state.t;
    report.steps = outcome.state.step_index;
    report.delta_energy = outcome.last.delta_energy;
    report.delta_mass = outcome.last.delta_mass;
    report.records = records.len();
    report.resumed_from = resume.map(|p| p.display().to_string());

    // The fit sees the whole trajectory, including what a resumed run
    // inherited from the diagnostics file.
    let history = match (dir, resume) {
        (Some(d), Some(_)) => read_diagnostics(&d.join(DIAGNOSTICS_FILE))?,
        _ => records,
    };
    (report.max_delta_energy, report.max_delta_mass) = drift_maxima(&history);
    report.fits = fits(cfg, &history);
    Ok(report)
}

fn write_fit_report(dir: &Path, fits: &[FitEntry]) -> Result<(), RunError> {
    if fits.is_empty() {
        return Ok(());
    }
    let json = serde_json::to_string_pretty(fits).expect("fits serialize");
    fs::write(dir.join("fit.json"), json + "\n").map_err(io_err("write fit.json"))
}

/// Fits of the configured recipe; failures are reported per norm.
pub fn fits(cfg: &RunConfig, records: &[DiagnosticsRecord]) -> Vec<FitEntry> {
    let Some(recipe) = &cfg.fit else {
        return Vec::new();
    };
    let prediction = predict_rates(cfg.exponent, recipe.gamma1).ok();
    recipe
        .norms
        .iter()
        .map(|&id| {
            let predicted_exponent = prediction.and_then(|p| p.exponent_for(id));
            let result = NormTrace::from_records(records, id)
                .and_then(|t| fit_log_power(&t, id, recipe.k_last, None, &cfg.simplex()));
            match result {
                Ok(fit) => FitEntry {
                    norm: id.name().to_string(),
                    k_last: recipe.k_last,
                    verdict: prediction.map(|p| classify(&fit, &p, recipe.tolerance)),
                    fit: Some(fit),
                    error: None,
                    predicted_exponent,
                    reported: None,
                },
                Err(e) => FitEntry {
                    norm: id.name().to_string(),
                    k_last: recipe.k_last,
                    fit: None,
                    error: Some(e.to_string()),
                    predicted_exponent,
                    verdict: None,
                    reported: None,
                },
            }
        })
        .collect()
}

/// Reads a diagnostics file back. Where a resumed run restarted earlier in
/// time, the later rows replace the earlier ones.
pub fn read_diagnostics(path: &Path) -> Result<Vec<DiagnosticsRecord>, RunError> {
    let f = File::open(path).map_err(io_err(format!("open {}", path.display())))?;
    let mut out: Vec<DiagnosticsRecord> = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_err("read diagnostics"))?;
        if i == 0 {
            if line != CSV_HEADER {
                return Err(RunError::Resume(format!("{} has an unexpected header", path.display())));
            }
            continue;
        }
        let v: Vec<f64> = line
            .split(',')
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| RunError::Resume(format!("{} line {}: {e}", path.display(), i + 1)))?;
        if v.len() != 13 {
            return Err(RunError::Resume(format!("{} line {}: expected 13 columns", path.display(), i + 1)));
        }
        let r = DiagnosticsRecord {
            time: v[0],
            mass: v[1],
            energy: v[2],
            delta_mass: v[3],
            delta_energy: v[4],
            linf_u: v[5],
            l2_uy: v[6],
            l2_ux: v[7],
            u_min: v[8],
            x_min: v[9],
            y_min: v[10],
            tail_x: v[11],
            tail_y: v[12],
        };
        while out.last().is_some_and(|p| p.time >= r.time) {
            out.pop();
        }
        out.push(r);
    }
    Ok(out)
}

fn rescaled_termination(t: RescaledTermination) -> (String, i32) {
    let code = match t {
        RescaledTermination::Completed => 0,
        RescaledTermination::MassExceeded => 2,
        RescaledTermination::Diverged { .. } => 3,
    };
    (t.name().to_string(), code)
}

fn run_rescaled_leg(cfg: &RunConfig, dir: Option<&Path>, file: &str) -> Result<RescaledOutcome, RunError> {
    let params = cfg.rescaled_params()?;
    let u0 = initial_data(cfg)?.sample(params.grid)?;
    let outcome = RescaledSolver::new(params)?.run(u0)?;
    if let Some(d) = dir {
        let path = d.join(file);
        let mut body = String::with_capacity(128 * (outcome.records.len() + 1));
        body.push_str(CSV_HEADER);
        body.push('\n');
        for (i, r) in outcome.records.iter().enumerate() {
            if i % cfg.diag_stride == 0 || i + 1 == outcome.records.len() {
                body.push_str(&r.csv_line());
                body.push('\n');
            }
        }
        fs::write(&path, body).map_err(io_err(format!("write {}", path.display())))?;
        let st = &outcome.state;
        Snapshot {
            u: st.u().clone(),
            t: st.tau,
            l: st.scale(),
            exponent: cfg.exponent,
            lambda: cfg.lambda,
        }
        .write(&d.join(format!("{}.gkps", file.trim_end_matches(".csv"))))?;
    }
    Ok(outcome)
}

/// The rescaled solution mapped back to physical coordinates along `y = y_m`.
fn rescaled_slice(cfg: &RunConfig, outcome: &RescaledOutcome) -> Result<Vec<(f64, f64)>, RunError> {
    let (field, map) = rescale_back(&outcome.state, cfg.exponent)?;
    Ok(axis_slice(&field).into_iter().map(|(x, u)| (map.x_m + x, u)).collect())
}

fn rescaled(cfg: &RunConfig, dir: Option<&Path>) -> Result<RunReport, RunError> {
    let outcome = run_rescaled_leg(cfg, dir, DIAGNOSTICS_FILE)?;
    if let (Some(d), true) = (dir, cfg.slices) {
        write_slice(&d.join(FINAL_SLICE), &rescaled_slice(cfg, &outcome)?)?;
    }
    let mut report = base_report(cfg);
    let (name, code) = rescaled_termination(outcome.termination);
    report.termination = name;
    report.exit_code = code;
    report.final_time = outcome.state.tau;
    report.steps = outcome.state.step_index;
    if let Some(last) = outcome.records.last() {
        report.delta_energy = last.delta_energy;
        report.delta_mass = last.delta_mass;
    }
    report.records = outcome.records.len();
    (report.max_delta_energy, report.max_delta_mass) = drift_maxima(&outcome.records);
    Ok(report)
}

fn crosscheck(cfg: &RunConfig, dir: Option<&Path>) -> Result<RunReport, RunError> {
    let c = cfg.crosscheck.clone().ok_or(ConfigError::Missing("crosscheck".into()))?;
    let resc = run_rescaled_leg(cfg, dir, "diagnostics_rescaled.csv")?;
    let t_phys = resc.state.t_phys;
    let (r_name, r_code) = rescaled_termination(resc.termination);
    if r_code == 3 {
        return Err(RunError::Solver(gkp_core::Error::Diverged { step: resc.state.step_index }));
    }

    let params = cfg.crosscheck_params(t_phys)?;
    let solver = DirectSolver::new(params)?;
    let start = solver.initial_state(&InitialData::Gaussian { beta: cfg.beta })?;
    let monitor = solver.monitor(&start);
    let mut direct_cfg = cfg.clone();
    direct_cfg.kind = SolverKind::Direct;
    direct_cfg.snapshot_stride = 0;
    let mut sink = Sink::open(&direct_cfg, dir, DIAGNOSTICS_FILE, false)?;
    let out = solver.run_from(
        start,
        &monitor,
        &mut |r: &DiagnosticsRecord, s: &SolverState| sink.observe(r, s),
        true,
    )?;
    let records = sink.finish(&out.last)?;

    let direct_slice = axis_slice(out.state.u());
    let resc_slice = rescaled_slice(cfg, &resc)?;
    let discrepancy = core_discrepancy(&resc, cfg, out.state.u(), c.core_half_width);
    if let Some(d) = dir {
        write_slice(&d.join("slice_direct.csv"), &direct_slice)?;
        write_slice(&d.join("slice_rescaled.csv"), &resc_slice)?;
        write_direct_outputs(&direct_cfg, d, &out.state, "final")?;
    }

    let mut report = base_report(cfg);
    report.termination = out.termination.name().to_string();
    report.exit_code = out.termination.exit_code();
    report.final_time = out.state.t;
    report.steps = out.state.step_index;
    report.delta_energy = out.last.delta_energy;
    report.delta_mass = out.last.delta_mass;
    report.records = records.len();
    (report.max_delta_energy, report.max_delta_mass) = drift_maxima(&records);
    report.crosscheck = Some(CrosscheckReport {
        tau_end: resc.state.tau,
        t_phys,
        scale: resc.state.scale(),
        rescaled_termination: r_name,
        direct_termination: out.termination.name().to_string(),
        core_half_width: c.core_half_width,
        points: discrepancy.1,
        discrepancy: discrepancy.0,
    });
    Ok(report)
}

/// Relative sup difference between the direct field and the spectrally
/// interpolated rescaled solution at the direct grid points of `y = 0`,
/// `|x| ≤ half_width`; also returns the number of points compared.
pub fn core_discrepancy(resc: &RescaledOutcome, cfg: &RunConfig, direct: &RealField, half_width: f64) -> (f64, usize) {
    let st = &resc.state;
    let l = st.scale();
    let amplitude = l.powf(-2.0 / cfg.exponent.value());
    let eval = PointEvaluator::new(st.u_hat());
    let g = *direct.grid();
    let row = direct.row(g.y_axis_row());
    let y = g.y(g.y_axis_row());
    let (mut diff, mut scale, mut count) = (0.0f64, 0.0f64, 0);
    for (ix, &ud) in row.iter().enumerate() {
        let x = g.x(ix);
        if x.abs() > half_width {
            continue;
        }
        let ur = amplitude * eval.at((x - st.x_m) / l, (y - st.y_m) / (l * l));
        diff = diff.max((ud - ur).abs());
        scale = scale.max(ud.abs());
        count += 1;
    }
    (if scale > 0.0 { diff / scale } else { diff }, count)
}
