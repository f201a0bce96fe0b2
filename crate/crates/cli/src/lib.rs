//! Command-line front end for the `gkp-core` solvers: configuration files,
//! the preset registry, snapshots and run outputs.

pub mod config;
pub mod presets;
pub mod runner;
pub mod snapshot;

pub use config::{ConfigError, RawConfig, RunConfig, SolverKind, Stepping};
pub use presets::{Expectation, Preset, ReportedFit, PRESETS};
pub use runner::{run, RunError, RunOptions, RunReport};
pub use snapshot::{Snapshot, SnapshotError};

/// Merges a preset, a config file and `--set` overrides (in that order of
/// increasing precedence), validates the result and applies the scale factor.
pub fn resolve(
    preset: Option<&str>,
    config: Option<&std::path::Path>,
    sets: &[String],
    scale_factor: usize,
) -> Result<(RunConfig, RawConfig, Option<&'static Preset>), ConfigError> {
    let found = preset.map(presets::find).transpose()?;
    let mut raw = found.map(|p| p.raw()).unwrap_or_default();
    if let Some(path) = config {
        raw.merge(RawConfig::load(path)?);
    }
    for s in sets {
        raw.set(s)?;
    }
    let mut cfg = RunConfig::from_raw(&raw)?;
    cfg.apply_scale_factor(scale_factor)?;
    Ok((cfg, raw, found))
}
