//! Command dispatch: scenario execution with file outputs, diagnostics over
//! existing traces, and single-key parameter sweeps.

use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use crate::analysis::diagnostics;
use crate::config::{apply_override, parse_config, preset};
use crate::sim::{run_scenario, ScenarioConfig, SimError, SimulationTrace};
use crate::trace_io::{
    read_trace_csv, render_diagnostics, write_diagnostics, write_plot_script, write_trace_csv,
};

#[derive(Debug, Parser)]
#[command(
    name = "smlc",
    about = "Sliding-mode learning control simulator",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario; writes trace.csv and diagnostics.txt into --out.
    Run(RunArgs),
    /// Re-run the diagnostics over an existing trace.csv and print them.
    Verify {
        /// Path to a trace.csv produced by `run`.
        #[arg(long)]
        trace: PathBuf,
    },
    /// Run a config once per value of a single varied key.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Built-in preset: scenario1 (vehicle following) or scenario2
    /// (second-order regulation under noise).
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Scenario config file (key = value lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the sampling time, s.
    #[arg(long)]
    ts: Option<f64>,
    /// Override the horizon, s.
    #[arg(long)]
    horizon: Option<f64>,
    /// Output directory (created if absent).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also emit plot.gp, a gnuplot script over the trace columns.
    #[arg(long)]
    emit_plots: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Base scenario config file.
    #[arg(long)]
    config: PathBuf,
    /// KEY=v1,v2,... one run per value, applied on top of the config.
    #[arg(long)]
    vary: String,
    /// Output directory; each run writes to a KEY-VALUE subdirectory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

/// What a `run` invocation resolved to, echoed before execution.
#[derive(Debug)]
struct RunManifest {
    scenario: String,
    config_path: Option<PathBuf>,
    out_dir: PathBuf,
    seed_override: Option<u64>,
    timestamp_unix: u64,
}

impl std::fmt::Display for RunManifest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "run {} (config: {}, out: {}, seed override: {}, at unix {})",
            self.scenario,
            self.config_path
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_else(|| "builtin".into()),
            self.out_dir.display(),
            self.seed_override
                .map(|s| s.to_string())
                .unwrap_or_else(|| "none".into()),
            self.timestamp_unix,
        )
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => run_command(args),
        Command::Verify { trace } => verify_command(&trace),
        Command::Sweep(args) => sweep_command(args),
    }
}

fn load_config(
    preset_name: Option<&str>,
    config_path: Option<&PathBuf>,
) -> Result<(String, ScenarioConfig)> {
    match (preset_name, config_path) {
        (Some(name), None) => {
            let cfg = preset(name).with_context(|| {
                format!("unknown preset '{name}' (available: scenario1, scenario2)")
            })?;
            Ok((name.to_string(), cfg))
        }
        (None, Some(path)) => {
            let cfg = parse_config(path).with_context(|| format!("parsing {}", path.display()))?;
            Ok((path.display().to_string(), cfg))
        }
        _ => bail!("provide exactly one of --preset or --config"),
    }
}

fn apply_run_overrides(mut cfg: ScenarioConfig, args: &RunArgs) -> Result<ScenarioConfig> {
    if let Some(seed) = args.seed {
        cfg = apply_override(cfg, "seed", &seed.to_string())?;
    }
    if let Some(ts) = args.ts {
        cfg = apply_override(cfg, "dt", &ts.to_string())?;
    }
    if let Some(horizon) = args.horizon {
        cfg = apply_override(cfg, "horizon", &horizon.to_string())?;
    }
    Ok(cfg)
}

fn write_outputs(out_dir: &PathBuf, trace: &SimulationTrace, emit_plots: bool) -> Result<()> {
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    write_trace_csv(&out_dir.join("trace.csv"), trace)?;
    let report = diagnostics(trace)?;
    write_diagnostics(&out_dir.join("diagnostics.txt"), &report)?;
    if emit_plots {
        write_plot_script(&out_dir.join("plot.gp"), trace, "trace.csv")?;
    }
    Ok(())
}

fn run_command(args: RunArgs) -> Result<()> {
    let (scenario, cfg) = load_config(args.preset.as_deref(), args.config.as_ref())?;
    let cfg = apply_run_overrides(cfg, &args)?;
    let manifest = RunManifest {
        scenario,
        config_path: args.config.clone(),
        out_dir: args.out.clone(),
        seed_override: args.seed,
        timestamp_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    println!("{manifest}");

    match run_scenario(&cfg) {
        Ok(trace) => {
            write_outputs(&args.out, &trace, args.emit_plots)?;
            let last = trace.records.last().expect("non-empty trace");
            println!(
                "done: {} records, final |e| = {:.3e}, k* = {:.4}, alpha* = {:.4}",
                trace.records.len(),
                last.e.abs(),
                last.k,
                last.alpha
            );
            Ok(())
        }
        Err(SimError::Divergence { step, t, partial }) => {
            std::fs::create_dir_all(&args.out)
                .with_context(|| format!("creating {}", args.out.display()))?;
            write_trace_csv(&args.out.join("trace.csv"), &partial)?;
            bail!(
                "state diverged at step {step} (t = {t}); partial trace written to {}",
                args.out.join("trace.csv").display()
            );
        }
        Err(e) => Err(e.into()),
    }
}

fn verify_command(trace_path: &std::path::Path) -> Result<()> {
    let trace =
        read_trace_csv(trace_path).with_context(|| format!("reading {}", trace_path.display()))?;
    let report = diagnostics(&trace)?;
    print!("{}", render_diagnostics(&report));
    Ok(())
}

fn sweep_command(args: SweepArgs) -> Result<()> {
    let base =
        parse_config(&args.config).with_context(|| format!("parsing {}", args.config.display()))?;
    let Some((key, values)) = args.vary.split_once('=') else {
        bail!("--vary expects KEY=v1,v2,..., got '{}'", args.vary);
    };
    let values: Vec<&str> = values.split(',').map(str::trim).collect();
    if values.is_empty() {
        bail!("--vary needs at least one value");
    }

    // independent runs, fanned out across threads
    let results: Vec<(String, Result<()>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = values
            .iter()
            .map(|value| {
                let cfg = base.clone();
                let out = args.out.join(format!("{key}-{value}"));
                let value = value.to_string();
                let key = key.to_string();
                scope.spawn(move || {
                    let label = format!("{key} = {value}");
                    let run = || -> Result<()> {
                        let cfg = apply_override(cfg, &key, &value)?;
                        let trace = match run_scenario(&cfg) {
                            Ok(trace) => trace,
                            Err(SimError::Divergence { step, t, .. }) => {
                                bail!("diverged at step {step} (t = {t})")
                            }
                            Err(e) => return Err(e.into()),
                        };
                        write_outputs(&out, &trace, false)
                    };
                    (label, run())
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep thread panicked"))
            .collect()
    });

    let mut failed = 0usize;
    for (label, result) in &results {
        match result {
            Ok(()) => println!("ok   {label}"),
            Err(e) => {
                failed += 1;
                println!("fail {label}: {e:#}");
            }
        }
    }
    if failed > 0 {
        bail!("{failed} of {} sweep runs failed", results.len());
    }
    Ok(())
}
