//! Trace and diagnostics serialization.
//!
//! `trace.csv` opens with a comment block of `# key = value` lines holding
//! the full scenario config (round-trippable through the config parser),
//! then the fixed column header, then one row per sampling instant. Floats
//! use the shortest representation that parses back to the same value, so
//! a written trace rereads bit-exactly.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::analysis::DiagnosticsReport;
use crate::config::{config_to_lines, parse_config_str, ConfigError};
use crate::controller::smoothed_sign;
use crate::plants::plant_by_name;
use crate::sim::{SimulationTrace, StepRecord};

#[derive(Debug, Error)]
pub enum TraceIoError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("trace header: {0}")]
    Config(#[from] ConfigError),
    #[error("trace row {line}: {message}")]
    Row { line: usize, message: String },
    #[error(transparent)]
    Plant(#[from] crate::plants::PlantError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TraceIoError + '_ {
    move |source| TraceIoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Fixed CSV column header for a plant with `state_dim` states.
pub fn csv_header(state_dim: usize) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=state_dim).map(|i| format!("x{i}")));
    cols.extend((1..=state_dim).map(|i| format!("m{i}")));
    for name in [
        "xd",
        "e",
        "edot",
        "eddot",
        "s",
        "u_c",
        "u_n",
        "u",
        "k",
        "alpha",
        "q",
        "clamp_flags",
        "deadzone",
    ] {
        cols.push(name.to_string());
    }
    cols.join(",")
}

/// Render the full CSV text for a trace.
pub fn trace_to_csv(trace: &SimulationTrace) -> String {
    let dim = trace.config.x0.len();
    let mut out = String::new();
    for line in config_to_lines(&trace.config).lines() {
        let _ = writeln!(out, "# {line}");
    }
    let _ = writeln!(out, "{}", csv_header(dim));
    for r in &trace.records {
        let _ = write!(out, "{}", r.t);
        for v in &r.state {
            let _ = write!(out, ",{v}");
        }
        for v in &r.measured {
            let _ = write!(out, ",{v}");
        }
        let _ = writeln!(
            out,
            ",{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.xd,
            r.e,
            r.e_dot,
            r.e_ddot,
            r.s,
            r.u_c,
            r.u_n,
            r.u,
            r.k,
            r.alpha,
            r.q,
            r.clamp_flags,
            u8::from(r.dead_zone),
        );
    }
    out
}

pub fn write_trace_csv(path: &Path, trace: &SimulationTrace) -> Result<(), TraceIoError> {
    let mut file = std::fs::File::create(path).map_err(io_err(path))?;
    file.write_all(trace_to_csv(trace).as_bytes())
        .map_err(io_err(path))?;
    Ok(())
}

/// Read a trace back from CSV. Quantities the CSV does not carry are
/// recomputed from the embedded config where possible (plant drift,
/// disturbance, reference derivative, smoothed sign); the normalized-distance
/// series used by the premise identity check is not reconstructible and
/// comes back empty.
pub fn read_trace_csv(path: &Path) -> Result<SimulationTrace, TraceIoError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let header: String = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .map(|l| l.trim_start_matches('#').trim())
        .fold(String::new(), |mut acc, l| {
            acc.push_str(l);
            acc.push('\n');
            acc
        });
    let config = parse_config_str(&header)?;
    let plant = plant_by_name(&config.plant_name, config.headway)?;
    let dim = plant.state_dim();
    let expected_cols = 1 + 2 * dim + 13;

    let mut records = Vec::new();
    let mut saw_header = false;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !saw_header {
            // column header line
            saw_header = true;
            if line != csv_header(dim) {
                return Err(TraceIoError::Row {
                    line: line_no,
                    message: format!("unexpected column header '{line}'"),
                });
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != expected_cols {
            return Err(TraceIoError::Row {
                line: line_no,
                message: format!("expected {expected_cols} columns, got {}", fields.len()),
            });
        }
        let num = |i: usize| -> Result<f64, TraceIoError> {
            fields[i].parse::<f64>().map_err(|e| TraceIoError::Row {
                line: line_no,
                message: format!("column {}: {e}", i + 1),
            })
        };
        let t = num(0)?;
        let state: Vec<f64> = (0..dim).map(|j| num(1 + j)).collect::<Result<_, _>>()?;
        let measured: Vec<f64> = (0..dim)
            .map(|j| num(1 + dim + j))
            .collect::<Result<_, _>>()?;
        let base = 1 + 2 * dim;
        let clamp_flags = fields[base + 11]
            .parse::<u16>()
            .map_err(|e| TraceIoError::Row {
                line: line_no,
                message: format!("clamp_flags: {e}"),
            })?;
        let dead_zone = fields[base + 12].trim() == "1";
        let s = num(base + 4)?;
        let r = plant.reference(t)?;
        records.push(StepRecord {
            t,
            f_x: plant.drift(&state),
            d: if config.disturbance_on {
                plant.disturbance(t)
            } else {
                0.0
            },
            xd: num(base)?,
            xd_nth: r.nth(plant.order()),
            e: num(base + 1)?,
            e_dot: num(base + 2)?,
            e_ddot: num(base + 3)?,
            s,
            sgn_s: smoothed_sign(s, config.smlc.chi),
            u_c: num(base + 5)?,
            u_n: num(base + 6)?,
            u: num(base + 7)?,
            k: num(base + 8)?,
            alpha: num(base + 9)?,
            q: num(base + 10)?,
            state,
            measured,
            n_lower_1: Vec::new(),
            n_upper_1: Vec::new(),
            n_lower_2: Vec::new(),
            n_upper_2: Vec::new(),
            norm_residual_lower: 0.0,
            norm_residual_upper: 0.0,
            clamp_flags,
            dead_zone,
        });
    }
    Ok(SimulationTrace {
        config,
        records,
        noise_std: Vec::new(),
    })
}

/// Render the diagnostics report as `key: value` lines. Per-step series are
/// summarized (first/final/max); identity checks that could not run state why.
pub fn render_diagnostics(report: &DiagnosticsReport) -> String {
    let mut out = String::new();
    let b = &report.bounds;
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k}: {v}");
    };
    kv("k_star", b.k_star.to_string());
    kv("alpha_star", b.alpha_star.to_string());
    kv("bound_u", b.b_u.to_string());
    kv("bound_udot", b.b_udot.to_string());
    kv("bound_b", b.b.to_string());
    let e_max = b.e_series.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    kv("e_term_abs_max", e_max.to_string());
    kv(
        "rate_alpha_star_gt_bound_udot",
        report.rate_alpha_star_gt_b_udot.to_string(),
    );
    kv("rate_k_kstar_gt_s", report.rate_kkstar_gt_s.to_string());
    kv("rate_kstar_gt_2b", report.rate_kstar_gt_2b.to_string());

    for (name, check) in [
        ("lyapunov_learning", &report.lyapunov_learning),
        ("lyapunov_overall", &report.lyapunov_overall),
    ] {
        kv(&format!("{name}_eligible"), check.eligible.to_string());
        kv(
            &format!("{name}_decrease_fraction"),
            check.decrease_fraction.to_string(),
        );
        kv(&format!("{name}_v_first"), check.v_first.to_string());
        kv(&format!("{name}_v_final"), check.v_final.to_string());
        kv(&format!("{name}_v_max"), check.v_max.to_string());
    }

    match &report.output_rate {
        Ok(stats) => {
            kv("output_rate_eligible", stats.eligible.to_string());
            kv("output_rate_excluded", stats.excluded.to_string());
            kv(
                "output_rate_median_rel_err",
                stats.median_rel_err.to_string(),
            );
            kv("output_rate_mean_rel_err", stats.mean_rel_err.to_string());
            kv("output_rate_pass_fraction", stats.pass_fraction.to_string());
        }
        Err(eligible) => {
            kv(
                "output_rate_status",
                format!("insufficient data ({eligible} eligible samples)"),
            );
        }
    }

    match &report.premise {
        Some(Ok(premise)) => {
            let names = ["lower1", "upper1", "lower2", "upper2"];
            for (name, stats) in names.iter().zip(&premise.per_family) {
                kv(
                    &format!("premise_{name}_eligible"),
                    stats.eligible.to_string(),
                );
                kv(
                    &format!("premise_{name}_median_rel_err"),
                    stats.median_rel_err.to_string(),
                );
            }
            let worst = premise
                .per_member
                .iter()
                .map(|s| s.median_rel_err)
                .fold(0.0f64, f64::max);
            kv("premise_worst_member_median_rel_err", worst.to_string());
        }
        Some(Err(eligible)) => {
            kv(
                "premise_status",
                format!("insufficient data ({eligible} eligible samples)"),
            );
        }
        None => {
            kv(
                "premise_status",
                "unavailable (trace carries no normalized-distance series)".into(),
            );
        }
    }

    let m = &report.metrics;
    kv(
        "steady_state_mean_abs_e",
        m.steady_state_mean_abs_e.to_string(),
    );
    kv("max_abs_e", m.max_abs_e.to_string());
    kv(
        "uc_decay_time",
        m.uc_decay_time
            .map(|t| t.to_string())
            .unwrap_or_else(|| "never".into()),
    );
    out
}

pub fn write_diagnostics(path: &Path, report: &DiagnosticsReport) -> Result<(), TraceIoError> {
    std::fs::write(path, render_diagnostics(report)).map_err(io_err(path))
}

/// Emit a gnuplot script that plots the main trace quantities from the CSV.
/// The script is written, never executed.
pub fn write_plot_script(
    path: &Path,
    trace: &SimulationTrace,
    csv_name: &str,
) -> Result<(), TraceIoError> {
    let dim = trace.config.x0.len();
    let col = |name: &str| -> usize {
        // 1-based gnuplot column index in the fixed header
        let header = csv_header(dim);
        header.split(',').position(|c| c == name).unwrap() + 1
    };
    let script = format!(
        "set datafile separator \",\"\n\
         set terminal pngcairo size 1200,1600\n\
         set output \"trace.png\"\n\
         set multiplot layout 5,1\n\
         set key outside\n\
         plot \"{csv}\" using 1:{x1} with lines title \"x1\", \"{csv}\" using 1:{xd} with lines title \"x_d\"\n\
         plot \"{csv}\" using 1:{e} with lines title \"e\"\n\
         plot \"{csv}\" using 1:{uc} with lines title \"u_c\", \"{csv}\" using 1:{un} with lines title \"u_n\", \"{csv}\" using 1:{u} with lines title \"u\"\n\
         plot \"{csv}\" using 1:{k} with lines title \"k\", \"{csv}\" using 1:{alpha} with lines title \"alpha\", \"{csv}\" using 1:{q} with lines title \"q\"\n\
         plot \"{csv}\" using 1:{s} with lines title \"s\"\n\
         unset multiplot\n",
        csv = csv_name,
        x1 = col("x1"),
        xd = col("xd"),
        e = col("e"),
        uc = col("u_c"),
        un = col("u_n"),
        u = col("u"),
        k = col("k"),
        alpha = col("alpha"),
        q = col("q"),
        s = col("s"),
    );
    std::fs::write(path, script).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::preset;
    use crate::sim::{run_scenario, ScenarioConfig};

    #[test]
    fn header_is_pinned() {
        assert_eq!(
            csv_header(2),
            "t,x1,x2,m1,m2,xd,e,edot,eddot,s,u_c,u_n,u,k,alpha,q,clamp_flags,deadzone"
        );
        assert_eq!(
            csv_header(3),
            "t,x1,x2,x3,m1,m2,m3,xd,e,edot,eddot,s,u_c,u_n,u,k,alpha,q,clamp_flags,deadzone"
        );
    }

    #[test]
    fn csv_round_trips_config_and_columns() {
        let cfg = ScenarioConfig {
            horizon: 0.5,
            ..preset("scenario2").unwrap()
        };
        let trace = run_scenario(&cfg).unwrap();
        let dir = std::env::temp_dir().join(format!("smlc-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("trace.csv");
        write_trace_csv(&path, &trace).unwrap();
        let back = read_trace_csv(&path).unwrap();
        assert_eq!(back.config, trace.config);
        assert_eq!(back.records.len(), trace.records.len());
        for (a, b) in trace.records.iter().zip(&back.records) {
            assert_eq!(a.t.to_bits(), b.t.to_bits());
            assert_eq!(a.state, b.state);
            assert_eq!(a.measured, b.measured);
            assert_eq!(a.s.to_bits(), b.s.to_bits());
            assert_eq!(a.u.to_bits(), b.u.to_bits());
            assert_eq!(a.k.to_bits(), b.k.to_bits());
            assert_eq!(a.alpha.to_bits(), b.alpha.to_bits());
            assert_eq!(a.q.to_bits(), b.q.to_bits());
            assert_eq!(a.clamp_flags, b.clamp_flags);
            assert_eq!(a.dead_zone, b.dead_zone);
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn diagnostics_render_mentions_key_fields() {
        let cfg = ScenarioConfig {
            horizon: 2.0,
            snr_db: None,
            ..preset("scenario2").unwrap()
        };
        let trace = run_scenario(&cfg).unwrap();
        let report = crate::analysis::diagnostics(&trace).unwrap();
        let text = render_diagnostics(&report);
        for key in [
            "k_star:",
            "alpha_star:",
            "bound_b:",
            "lyapunov_learning_decrease_fraction:",
            "lyapunov_overall_decrease_fraction:",
            "steady_state_mean_abs_e:",
            "uc_decay_time:",
        ] {
            assert!(text.contains(key), "missing {key} in:\n{text}");
        }
    }
}
