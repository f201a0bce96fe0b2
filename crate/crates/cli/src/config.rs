//! Flat `key = value` configuration grouped under `[section]` headers.
//!
//! Keys are addressed as `section.key`. Blank lines and lines starting with
//! `#` or `;` are ignored. Every key must be known; later sources (a config
//! file over a preset, `--set` over both) replace earlier values.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use gkp_core::fit::SimplexConfig;
use gkp_core::{
    ClosureMode, ContourConfig, Exponent, GkpParams, Grid2D, Lambda, NormId, RescaledParams,
};
use thiserror::Error;

const KEYS: &[&str] = &[
    "equation.p",
    "equation.q",
    "equation.lambda",
    "grid.nx",
    "grid.ny",
    "grid.scale_x",
    "grid.scale_y",
    "time.t_end",
    "time.h",
    "time.n_steps",
    "initial.beta",
    "initial.snapshot",
    "solver.kind",
    "solver.closure",
    "solver.delta_stop",
    "solver.mass_stop",
    "crosscheck.scale_x",
    "crosscheck.scale_y",
    "crosscheck.h",
    "crosscheck.core_half_width",
    "output.directory",
    "output.diag_stride",
    "output.snapshot_stride",
    "output.slices",
    "numerics.regularization",
    "numerics.contour_points",
    "numerics.contour_radius",
    "numerics.dealias",
    "numerics.refine_minimum",
    "numerics.deterministic",
    "numerics.threads",
    "fit.norms",
    "fit.k_last",
    "fit.tolerance",
    "fit.gamma1",
];

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{}: {message}", at(*.line))]
    Syntax { line: Option<usize>, message: String },
    #[error("{}: unknown key `{key}`", at(*.line))]
    UnknownKey { line: Option<usize>, key: String },
    #[error("{}: `{key}`: {message}", at(*.line))]
    Invalid {
        line: Option<usize>,
        key: String,
        message: String,
    },
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("{0}")]
    Conflict(String),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

fn at(line: Option<usize>) -> String {
    match line {
        Some(l) => format!("line {l}"),
        None => "override".to_string(),
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    line: Option<usize>,
}

/// Unvalidated key/value pairs in source order of precedence.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, Entry>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = Some(i + 1);
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') || s.starts_with(';') {
                continue;
            }
            if let Some(rest) = s.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                    line,
                    message: format!("unterminated section header `{s}`"),
                })?;
                section = Some(name.trim().to_string());
                continue;
            }
            let (k, v) = s.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                message: format!("expected `key = value`, found `{s}`"),
            })?;
            let key = match &section {
                Some(sec) => format!("{sec}.{}", k.trim()),
                None => k.trim().to_string(),
            };
            check_key(&key, line)?;
            let entry = Entry {
                value: v.trim().to_string(),
                line,
            };
            if entries.insert(key.clone(), entry).is_some() {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("`{key}` given twice"),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    /// Entries of `other` replace those of `self`. Supplying one of `time.h`
    /// and `time.n_steps` drops the other, so a file may switch stepping mode
    /// relative to a preset.
    pub fn merge(&mut self, other: RawConfig) {
        if other.entries.contains_key("time.h") {
            self.entries.remove("time.n_steps");
        }
        if other.entries.contains_key("time.n_steps") {
            self.entries.remove("time.h");
        }
        self.entries.extend(other.entries);
    }

    /// Applies one `section.key=value` override.
    pub fn set(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (k, v) = assignment.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: None,
            message: format!("expected `section.key=value`, found `{assignment}`"),
        })?;
        let key = k.trim().to_string();
        check_key(&key, None)?;
        let mut one = RawConfig::default();
        one.entries.insert(
            key,
            Entry {
                value: v.trim().to_string(),
                line: None,
            },
        );
        self.merge(one);
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    fn typed<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => e.value.parse().map(Some).map_err(|err: T::Err| ConfigError::Invalid {
                line: e.line,
                key: key.to_string(),
                message: format!("`{}`: {err}", e.value),
            }),
        }
    }

    fn required<T: FromStr>(&self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.typed(key)?.ok_or_else(|| ConfigError::Missing(key.to_string()))
    }

    fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        Ok(self.typed(key)?.unwrap_or(default))
    }

    fn invalid(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::Invalid {
            line: self.entries.get(key).and_then(|e| e.line),
            key: key.to_string(),
            message: message.into(),
        }
    }

    /// The entries as config text, one section per block.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut current = "";
        for (key, e) in &self.entries {
            let (sec, k) = key.split_once('.').unwrap_or(("", key));
            if sec != current {
                if !out.is_empty() {
                    out.push('\n');
                }
                out.push_str(&format!("[{sec}]\n"));
                current = sec;
            }
            out.push_str(&format!("{k} = {}\n", e.value));
        }
        out
    }
}

fn check_key(key: &str, line: Option<usize>) -> Result<(), ConfigError> {
    if KEYS.contains(&key) {
        Ok(())
    } else {
        Err(ConfigError::UnknownKey {
            line,
            key: key.to_string(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stepping {
    Steps(usize),
    Step(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Direct,
    Rescaled,
    /// Rescaled run to its mass stop, then a direct run to the same
    /// physical time.
    Crosscheck,
}

impl SolverKind {
    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::Direct => "direct",
            SolverKind::Rescaled => "rescaled",
            SolverKind::Crosscheck => "crosscheck",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrosscheckConfig {
    pub scale_x: f64,
    pub scale_y: f64,
    pub h: f64,
    /// Half width of the `|x|` window in which the slices are compared.
    pub core_half_width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitRecipe {
    pub norms: Vec<NormId>,
    pub k_last: usize,
    pub tolerance: f64,
    pub gamma1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub exponent: Exponent,
    pub lambda: Lambda,
    pub nx: usize,
    pub ny: usize,
    pub scale_x: f64,
    pub scale_y: f64,
    pub t_end: f64,
    pub stepping: Stepping,
    pub beta: f64,
    pub snapshot: Option<PathBuf>,
    pub kind: SolverKind,
    pub closure: ClosureMode,
    pub delta_stop: f64,
    pub mass_stop: Option<f64>,
    pub crosscheck: Option<CrosscheckConfig>,
    pub output_dir: Option<PathBuf>,
    pub diag_stride: usize,
    pub snapshot_stride: usize,
    pub slices: bool,
    pub regularization: Option<f64>,
    pub contour: ContourConfig,
    pub dealias: bool,
    pub refine_minimum: bool,
    pub deterministic: bool,
    pub threads: Option<usize>,
    pub fit: Option<FitRecipe>,
    /// Factor already divided out of the grid and step counts.
    pub scale_factor: usize,
}

impl RunConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, ConfigError> {
        let p: u32 = raw.required("equation.p")?;
        let q: u32 = raw.or("equation.q", 1)?;
        let exponent = Exponent::new(p, q).map_err(|e| raw.invalid("equation.q", e.to_string()))?;
        let sign: i32 = raw.required("equation.lambda")?;
        let lambda = Lambda::from_sign(sign).map_err(|_| raw.invalid("equation.lambda", "must be -1 or 1"))?;

        let stepping = match (raw.typed::<f64>("time.h")?, raw.typed::<usize>("time.n_steps")?) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::Conflict(
                    "`time.h` and `time.n_steps` are mutually exclusive".into(),
                ))
            }
            (Some(h), None) => Stepping::Step(h),
            (None, Some(n)) => Stepping::Steps(n),
            (None, None) => return Err(ConfigError::Missing("time.h or time.n_steps".into())),
        };

        let kind = match raw.get("solver.kind").unwrap_or("direct") {
            "direct" => SolverKind::Direct,
            "rescaled" => SolverKind::Rescaled,
            "crosscheck" => SolverKind::Crosscheck,
            other => return Err(raw.invalid("solver.kind", format!("`{other}` is not direct, rescaled or crosscheck"))),
        };
        let closure = match raw.get("solver.closure") {
            None => ClosureMode::AOnly,
            Some(s) => ClosureMode::parse(s).ok_or_else(|| raw.invalid("solver.closure", "expected frozen, a_only or full"))?,
        };
        let default_mass_stop = match kind {
            SolverKind::Direct => None,
            _ => Some(0.1),
        };
        let crosscheck = if kind == SolverKind::Crosscheck {
            Some(CrosscheckConfig {
                scale_x: raw.required("crosscheck.scale_x")?,
                scale_y: raw.required("crosscheck.scale_y")?,
                h: raw.required("crosscheck.h")?,
                core_half_width: raw.or("crosscheck.core_half_width", 2.0)?,
            })
        } else {
            None
        };

        let fit = match raw.get("fit.norms") {
            None => None,
            Some(list) => {
                let norms = list
                    .split(',')
                    .map(|s| NormId::parse(s.trim()).ok_or_else(|| raw.invalid("fit.norms", format!("unknown norm `{}`", s.trim()))))
                    .collect::<Result<Vec<_>, _>>()?;
                Some(FitRecipe {
                    norms,
                    k_last: raw.required("fit.k_last")?,
                    tolerance: raw.or("fit.tolerance", 0.1)?,
                    gamma1: raw.typed("fit.gamma1")?,
                })
            }
        };

        let cfg = Self {
            exponent,
            lambda,
            nx: raw.required("grid.nx")?,
            ny: raw.required("grid.ny")?,
            scale_x: raw.required("grid.scale_x")?,
            scale_y: raw.required("grid.scale_y")?,
            t_end: raw.required("time.t_end")?,
            stepping,
            beta: raw.or("initial.beta", 1.0)?,
            snapshot: raw.get("initial.snapshot").map(PathBuf::from),
            kind,
            closure,
            delta_stop: raw.or("solver.delta_stop", 1e-3)?,
            mass_stop: raw.typed("solver.mass_stop")?.or(default_mass_stop),
            crosscheck,
            output_dir: raw.get("output.directory").map(PathBuf::from),
            diag_stride: raw.or("output.diag_stride", 1)?,
            snapshot_stride: raw.or("output.snapshot_stride", 0)?,
            slices: raw.or("output.slices", true)?,
            regularization: raw.typed("numerics.regularization")?,
            contour: ContourConfig {
                points: raw.or("numerics.contour_points", ContourConfig::default().points)?,
                radius: raw.or("numerics.contour_radius", ContourConfig::default().radius)?,
            },
            dealias: raw.or("numerics.dealias", false)?,
            refine_minimum: raw.or("numerics.refine_minimum", false)?,
            deterministic: raw.or("numerics.deterministic", false)?,
            threads: raw.typed("numerics.threads")?,
            fit,
            scale_factor: 1,
        };
        cfg.validate(raw)?;
        Ok(cfg)
    }

    fn validate(&self, raw: &RawConfig) -> Result<(), ConfigError> {
        if self.diag_stride == 0 {
            return Err(raw.invalid("output.diag_stride", "must be at least 1"));
        }
        if let Some(f) = &self.fit {
            if f.k_last < 4 {
                return Err(raw.invalid("fit.k_last", "must be at least 4"));
            }
        }
        if self.threads == Some(0) {
            return Err(raw.invalid("numerics.threads", "must be at least 1"));
        }
        Grid2D::new(self.nx, self.ny, self.scale_x, self.scale_y).map_err(|e| raw.invalid("grid", e.to_string()))?;
        Ok(())
    }

    /// Divides the grid sizes, step counts and fit window by `f`.
    pub fn apply_scale_factor(&mut self, f: usize) -> Result<(), ConfigError> {
        let bad = |what: &str| ConfigError::Conflict(format!("scale factor {f} does not divide {what}"));
        if f == 0 {
            return Err(ConfigError::Conflict("scale factor must be at least 1".into()));
        }
        if self.nx % f != 0 || self.ny % f != 0 {
            return Err(bad("the grid size"));
        }
        self.nx /= f;
        self.ny /= f;
        self.stepping = match self.stepping {
            Stepping::Steps(n) if n % f == 0 => Stepping::Steps(n / f),
            Stepping::Steps(_) => return Err(bad("time.n_steps")),
            Stepping::Step(h) => Stepping::Step(h * f as f64),
        };
        if let Some(c) = &mut self.crosscheck {
            c.h *= f as f64;
        }
        if let Some(fit) = &mut self.fit {
            fit.k_last = (fit.k_last / f).max(10);
        }
        self.snapshot_stride /= f;
        self.scale_factor *= f;
        Ok(())
    }

    pub fn grid(&self) -> gkp_core::Result<Grid2D> {
        Grid2D::new(self.nx, self.ny, self.scale_x, self.scale_y)
    }

    pub fn h(&self) -> f64 {
        match self.stepping {
            Stepping::Step(h) => h,
            Stepping::Steps(n) => self.t_end / n as f64,
        }
    }

    pub fn gkp_params(&self) -> gkp_core::Result<GkpParams> {
        let grid = self.grid()?;
        let mut p = GkpParams::new(self.exponent, self.lambda, grid, self.h(), self.t_end)?;
        p.delta_stop = self.delta_stop;
        p.mass_stop = self.mass_stop;
        if let Some(r) = self.regularization {
            p.regularization = r;
        }
        p.contour = self.contour;
        p.dealias = self.dealias;
        p.refine_minimum = self.refine_minimum;
        p.validate()?;
        Ok(p)
    }

    /// Parameters of the direct leg of a crosscheck, ending at `t_end`.
    pub fn crosscheck_params(&self, t_end: f64) -> gkp_core::Result<GkpParams> {
        let c = self
            .crosscheck
            .as_ref()
            .ok_or_else(|| gkp_core::Error::InvalidParameter {
                name: "crosscheck",
                reason: "section missing".into(),
            })?;
        let grid = Grid2D::new(self.nx, self.ny, c.scale_x, c.scale_y)?;
        let n_steps = ((t_end / c.h).ceil() as usize).max(1);
        let mut p = GkpParams::with_steps(self.exponent, self.lambda, grid, n_steps, t_end)?;
        p.delta_stop = self.delta_stop;
        if let Some(r) = self.regularization {
            p.regularization = r;
        }
        p.contour = self.contour;
        p.dealias = self.dealias;
        p.refine_minimum = self.refine_minimum;
        Ok(p)
    }

    pub fn rescaled_params(&self) -> gkp_core::Result<RescaledParams> {
        let grid = self.grid()?;
        let mut p = RescaledParams::with_steps(self.exponent, self.lambda, grid, 1, self.t_end)?;
        p.h = self.h();
        p.closure = self.closure;
        p.mass_stop = self.mass_stop.unwrap_or(0.1);
        if let Some(r) = self.regularization {
            p.regularization = r;
        }
        p.contour = self.contour;
        p.dealias = self.dealias;
        p.refine_minimum = self.refine_minimum;
        p.validate()?;
        Ok(p)
    }

    pub fn simplex(&self) -> SimplexConfig {
        SimplexConfig::default()
    }
}
