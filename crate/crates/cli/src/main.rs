use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use gkp_cli::{presets, resolve, run, RunOptions};

/// Spectral solvers for the generalized KP equations.
#[derive(Parser, Debug)]
#[command(name = "gkp", version)]
struct Args {
    /// Named experiment; see --list-presets.
    #[arg(long)]
    preset: Option<String>,
    /// Config file; its keys override the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. --set initial.beta=6 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Reproducible results independent of scheduling.
    #[arg(long)]
    deterministic: bool,
    /// Continue a direct run from a snapshot.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Divide nx, ny and the step count by this factor.
    #[arg(long, default_value_t = 1)]
    scale_factor: usize,
    #[arg(long)]
    list_presets: bool,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if args.list_presets {
        for p in presets::PRESETS {
            println!("{:<18} {}", p.name, p.expect.source);
        }
        return ExitCode::SUCCESS;
    }
    if args.preset.is_none() && args.config.is_none() {
        eprintln!("gkp: one of --preset or --config is required");
        return ExitCode::from(1);
    }

    let mut sets = args.sets.clone();
    if let Some(n) = args.threads {
        sets.push(format!("numerics.threads={n}"));
    }
    if args.deterministic {
        sets.push("numerics.deterministic=true".into());
    }
    let (cfg, raw, preset) = match resolve(args.preset.as_deref(), args.config.as_deref(), &sets, args.scale_factor) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("gkp: {e}");
            return ExitCode::from(1);
        }
    };
    let mut text = raw.render();
    if cfg.scale_factor > 1 {
        text = format!("# run with --scale-factor {}\n{text}", cfg.scale_factor);
    }
    let opts = RunOptions {
        output_dir: args.output_dir,
        resume: args.resume,
        preset: preset.map(|p| p.name.to_string()),
        expect: preset.map(|p| p.expect.clone()),
        config_text: Some(text),
    };
    match run(&cfg, &opts) {
        Ok(report) => {
            println!(
                "{}: {} at t = {} after {} steps (energy drift {:.3e})",
                report.preset.as_deref().unwrap_or(report.solver),
                report.termination,
                report.final_time,
                report.steps,
                report.delta_energy
            );
            for f in &report.fits {
                match &f.fit {
                    Some(r) => println!(
                        "  fit {}: C = {:.4}, c = {:.4}, t* = {:.6}",
                        f.norm, r.offset, r.exponent, r.t_star
                    ),
                    None => println!("  fit {}: {}", f.norm, f.error.as_deref().unwrap_or("failed")),
                }
            }
            if let Some(c) = &report.crosscheck {
                println!("  crosscheck: t = {:.6}, core discrepancy {:.3e}", c.t_phys, c.discrepancy);
            }
            ExitCode::from(report.exit_code as u8)
        }
        Err(e) => {
            eprintln!("gkp: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
