//! Post-hoc numerical verification over simulation traces: Lyapunov series,
//! the two learning-law rate identities, empirical boundedness estimates,
//! and scalar performance metrics.
//!
//! Everything here is a pure function of the trace; re-running analysis on
//! the same trace is bit-identical.

use thiserror::Error;

use crate::controller::clamp_flags;
use crate::plants::{plant_by_name, PlantError};
use crate::sim::SimulationTrace;

/// Relative-error denominators are floored here to keep near-zero targets
/// from dominating the statistics.
pub const REL_ERR_FLOOR: f64 = 1e-9;

/// Identity-check tolerance for the network output rate (`2 alpha sgn(s)`).
pub const OUTPUT_RATE_TOL: f64 = 0.05;

/// Identity-check tolerance for the premise normalized-distance rate.
pub const PREMISE_TOL: f64 = 0.01;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("insufficient eligible samples for identity check: {eligible} (need >= 10)")]
    InsufficientData { eligible: usize },
    #[error(transparent)]
    Plant(#[from] PlantError),
}

/// Empirical bounds backing the boundedness assumptions.
#[derive(Debug, Clone)]
pub struct StabilityBounds {
    /// Largest |u| over the trace.
    pub b_u: f64,
    /// Largest finite-difference |u_dot| over the trace.
    pub b_udot: f64,
    /// Largest per-sample sum |xd_nth| + |f(x)| + |d| + g|u_n| + |E|.
    pub b: f64,
    /// Per-step E = s_dot - e^(n), finite-differenced (central in the interior).
    pub e_series: Vec<f64>,
    /// Final controller gain.
    pub k_star: f64,
    /// Final learning rate.
    pub alpha_star: f64,
}

/// Relative-error statistics of one identity check.
#[derive(Debug, Clone, Copy)]
pub struct IdentityStats {
    pub eligible: usize,
    pub excluded: usize,
    pub median_rel_err: f64,
    pub mean_rel_err: f64,
    /// Fraction of eligible samples with relative error below the tolerance.
    pub pass_fraction: f64,
}

/// Premise identity stats pooled per membership family and per member.
/// Family order: lower input-1, upper input-1, lower input-2, upper input-2.
#[derive(Debug, Clone)]
pub struct PremiseIdentity {
    pub per_family: [IdentityStats; 4],
    /// Family-major: all members of family 0, then family 1, ...
    pub per_member: Vec<IdentityStats>,
}

/// Finite-difference decrease check of a Lyapunov series.
#[derive(Debug, Clone, Copy)]
pub struct LyapunovCheck {
    pub eligible: usize,
    /// Fraction of eligible steps with V decreasing; 1.0 when none are
    /// eligible (vacuous).
    pub decrease_fraction: f64,
    pub v_first: f64,
    pub v_final: f64,
    pub v_max: f64,
}

/// Scalar performance summary.
#[derive(Debug, Clone, Copy)]
pub struct PerformanceMetrics {
    /// Mean |e| over the trailing window.
    pub steady_state_mean_abs_e: f64,
    /// Largest |e| over the whole trace.
    pub max_abs_e: f64,
    /// Earliest time after which |u_c| stays below 5% of the trailing-window
    /// mean |u|; `None` if it never does within the trace.
    pub uc_decay_time: Option<f64>,
}

/// Aggregate report over one trace.
#[derive(Debug, Clone)]
pub struct DiagnosticsReport {
    pub bounds: StabilityBounds,
    /// 1.0 iff the final learning rate exceeds the empirical |u_dot| bound.
    pub rate_alpha_star_gt_b_udot: f64,
    /// Fraction of samples with k * k_star > |s|.
    pub rate_kkstar_gt_s: f64,
    /// 1.0 iff the final gain exceeds twice the empirical bound B.
    pub rate_kstar_gt_2b: f64,
    pub lyapunov_learning: LyapunovCheck,
    pub lyapunov_overall: LyapunovCheck,
    pub output_rate: Result<IdentityStats, usize>,
    /// Premise identity; absent when the trace carries no normalized-distance
    /// series (e.g. reconstructed from CSV).
    pub premise: Option<Result<PremiseIdentity, usize>>,
    pub metrics: PerformanceMetrics,
}

/// Lyapunov candidate of the learning loop:
/// `V = u_c^2/(2 k*) + (k*)^2/(2 gamma_alpha) (alpha/(k*)^2 - alpha*)^2`.
pub fn lyapunov_learning(
    trace: &SimulationTrace,
    k_star: f64,
    alpha_star: f64,
    gamma_alpha: f64,
) -> Vec<f64> {
    trace
        .records
        .iter()
        .map(|r| {
            let mismatch = r.alpha / (k_star * k_star) - alpha_star;
            r.u_c * r.u_c / (2.0 * k_star)
                + k_star * k_star / (2.0 * gamma_alpha) * mismatch * mismatch
        })
        .collect()
}

/// Lyapunov candidate of the overall loop:
/// `V = s^2/2 + g/(2 gamma_k) (k - k*)^2`.
pub fn lyapunov_overall(trace: &SimulationTrace, k_star: f64, g: f64, gamma_k: f64) -> Vec<f64> {
    trace
        .records
        .iter()
        .map(|r| r.s * r.s / 2.0 + g / (2.0 * gamma_k) * (r.k - k_star) * (r.k - k_star))
        .collect()
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

fn stats_from_errors(mut errors: Vec<f64>, excluded: usize, tol: f64) -> IdentityStats {
    let eligible = errors.len();
    let below = errors.iter().filter(|e| **e < tol).count();
    let mean = errors.iter().sum::<f64>() / eligible.max(1) as f64;
    IdentityStats {
        eligible,
        excluded,
        median_rel_err: median(&mut errors),
        mean_rel_err: mean,
        pass_fraction: if eligible == 0 {
            0.0
        } else {
            below as f64 / eligible as f64
        },
    }
}

/// Check the network-output rate identity `du_n/dt = 2 alpha sgn(s)` by
/// forward differences, over steps where no adaptation clamp and no dead-zone
/// fired.
pub fn check_output_rate_identity(
    trace: &SimulationTrace,
    tol: f64,
) -> Result<IdentityStats, AnalysisError> {
    let dt = trace.config.dt;
    let mut errors = Vec::new();
    let mut excluded = 0usize;
    for pair in trace.records.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let blocked = a.clamp_flags & (clamp_flags::ANY_CLAMP | clamp_flags::STARTUP) != 0
            || b.clamp_flags & clamp_flags::STARTUP != 0
            || a.dead_zone;
        if blocked {
            excluded += 1;
            continue;
        }
        let target = 2.0 * a.alpha * a.sgn_s;
        let rate = (b.u_n - a.u_n) / dt;
        errors.push((rate - target).abs() / target.abs().max(REL_ERR_FLOOR));
    }
    if errors.len() < 10 {
        return Err(AnalysisError::InsufficientData {
            eligible: errors.len(),
        });
    }
    Ok(stats_from_errors(errors, excluded, tol))
}

fn family_series(rec: &crate::sim::StepRecord, family: usize) -> &[f64] {
    match family {
        0 => &rec.n_lower_1,
        1 => &rec.n_upper_1,
        2 => &rec.n_lower_2,
        _ => &rec.n_upper_2,
    }
}

/// Check the premise rate identity `N * dN/dt = alpha sgn(s)` for every
/// membership (all four center/width law families on both inputs), by
/// forward differences over steps where that family ran unclamped.
pub fn check_premise_identity(
    trace: &SimulationTrace,
    tol: f64,
) -> Result<PremiseIdentity, AnalysisError> {
    let dt = trace.config.dt;
    let members = trace
        .records
        .first()
        .map(|r| r.n_lower_1.len())
        .unwrap_or(0);
    let mut per_member = Vec::with_capacity(4 * members);
    let mut per_family = Vec::with_capacity(4);

    for family in 0..4usize {
        let mut family_errors = Vec::new();
        let mut family_excluded = 0usize;
        for member in 0..members {
            let mut errors = Vec::new();
            let mut excluded = 0usize;
            for pair in trace.records.windows(2) {
                let (a, b) = (&pair[0], &pair[1]);
                let blocked = a.clamp_flags
                    & (clamp_flags::SIGMA_DEN_FAMILY[family]
                        | clamp_flags::SIGMA_LIMIT
                        | clamp_flags::STARTUP)
                    != 0
                    || b.clamp_flags & clamp_flags::STARTUP != 0;
                let target = a.alpha * a.sgn_s;
                if blocked || target == 0.0 {
                    excluded += 1;
                    continue;
                }
                let n0 = family_series(a, family)[member];
                let n1 = family_series(b, family)[member];
                let rate = n0 * (n1 - n0) / dt;
                errors.push((rate - target).abs() / target.abs().max(REL_ERR_FLOOR));
            }
            family_errors.extend_from_slice(&errors);
            family_excluded += excluded;
            per_member.push(stats_from_errors(errors, excluded, tol));
        }
        if family_errors.len() < 10 {
            return Err(AnalysisError::InsufficientData {
                eligible: family_errors.len(),
            });
        }
        per_family.push(stats_from_errors(family_errors, family_excluded, tol));
    }

    Ok(PremiseIdentity {
        per_family: [per_family[0], per_family[1], per_family[2], per_family[3]],
        per_member,
    })
}

fn central_diff(series: &[f64], dt: f64) -> Vec<f64> {
    let n = series.len();
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|i| {
            if i == 0 {
                (series[1] - series[0]) / dt
            } else if i == n - 1 {
                (series[n - 1] - series[n - 2]) / dt
            } else {
                (series[i + 1] - series[i - 1]) / (2.0 * dt)
            }
        })
        .collect()
}

/// Empirical bounds over the trace: running maxima of |u|, |u_dot|, and the
/// per-sample boundedness sum, plus the end-of-run gain and learning rate.
pub fn estimate_bounds(trace: &SimulationTrace) -> Result<StabilityBounds, AnalysisError> {
    let plant = plant_by_name(&trace.config.plant_name, trace.config.headway)?;
    let g = plant.control_gain();
    let dt = trace.config.dt;
    let order = trace.config.smlc.order;

    let u: Vec<f64> = trace.records.iter().map(|r| r.u).collect();
    let s: Vec<f64> = trace.records.iter().map(|r| r.s).collect();
    let b_u = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let b_udot = u
        .windows(2)
        .fold(0.0f64, |m, w| m.max(((w[1] - w[0]) / dt).abs()));

    // E = s_dot - e^(n); the n-th error derivative comes from differencing
    // the highest recorded derivative series.
    let s_dot = central_diff(&s, dt);
    let prev_deriv: Vec<f64> = match order {
        2 => trace.records.iter().map(|r| r.e_dot).collect(),
        _ => trace.records.iter().map(|r| r.e_ddot).collect(),
    };
    let e_nth = central_diff(&prev_deriv, dt);
    let e_series: Vec<f64> = s_dot.iter().zip(&e_nth).map(|(sd, en)| sd - en).collect();

    let b = trace
        .records
        .iter()
        .zip(&e_series)
        .fold(0.0f64, |m, (r, e)| {
            m.max(r.xd_nth.abs() + r.f_x.abs() + r.d.abs() + g * r.u_n.abs() + e.abs())
        });

    let last = trace.records.last();
    Ok(StabilityBounds {
        b_u,
        b_udot,
        b,
        e_series,
        k_star: last.map(|r| r.k).unwrap_or(0.0),
        alpha_star: last.map(|r| r.alpha).unwrap_or(0.0),
    })
}

/// Scalar performance metrics. `window_fraction` sets the trailing window
/// for the steady-state error and the decay-time reference level.
pub fn performance_metrics(trace: &SimulationTrace, window_fraction: f64) -> PerformanceMetrics {
    assert!(window_fraction > 0.0 && window_fraction < 1.0);
    let n = trace.records.len();
    if n == 0 {
        return PerformanceMetrics {
            steady_state_mean_abs_e: 0.0,
            max_abs_e: 0.0,
            uc_decay_time: Some(0.0),
        };
    }
    let t_end = trace.records[n - 1].t;
    let window_start = t_end * (1.0 - window_fraction);
    let window: Vec<&crate::sim::StepRecord> = trace
        .records
        .iter()
        .filter(|r| r.t >= window_start)
        .collect();

    let steady_state_mean_abs_e =
        window.iter().map(|r| r.e.abs()).sum::<f64>() / window.len() as f64;
    let max_abs_e = trace.records.iter().fold(0.0f64, |m, r| m.max(r.e.abs()));

    let mean_abs_u = window.iter().map(|r| r.u.abs()).sum::<f64>() / window.len() as f64;
    let level = 0.05 * mean_abs_u;
    // earliest time after which |u_c| stays at or below the level
    let mut decay_idx: Option<usize> = Some(0);
    for (i, r) in trace.records.iter().enumerate().rev() {
        if r.u_c.abs() > level {
            decay_idx = if i + 1 < n { Some(i + 1) } else { None };
            break;
        }
    }
    PerformanceMetrics {
        steady_state_mean_abs_e,
        max_abs_e,
        uc_decay_time: decay_idx.map(|i| trace.records[i].t),
    }
}

fn lyapunov_check<F>(v: &[f64], eligible_at: F) -> LyapunovCheck
where
    F: Fn(usize) -> bool,
{
    let mut eligible = 0usize;
    let mut decreasing = 0usize;
    for i in 0..v.len().saturating_sub(1) {
        if eligible_at(i) {
            eligible += 1;
            if v[i + 1] < v[i] {
                decreasing += 1;
            }
        }
    }
    LyapunovCheck {
        eligible,
        decrease_fraction: if eligible == 0 {
            1.0
        } else {
            decreasing as f64 / eligible as f64
        },
        v_first: v.first().copied().unwrap_or(0.0),
        v_final: v.last().copied().unwrap_or(0.0),
        v_max: v.iter().fold(0.0f64, |m, x| m.max(*x)),
    }
}

/// Full diagnostics over one trace.
pub fn diagnostics(trace: &SimulationTrace) -> Result<DiagnosticsReport, AnalysisError> {
    let bounds = estimate_bounds(trace)?;
    let plant = plant_by_name(&trace.config.plant_name, trace.config.headway)?;
    let g = plant.control_gain();
    let cfg = &trace.config;
    let epsilon = cfg.smlc.epsilon;
    let n = trace.records.len();

    let v_learning = lyapunov_learning(
        trace,
        bounds.k_star,
        bounds.alpha_star,
        cfg.smlc.gamma_alpha,
    );
    let v_overall = lyapunov_overall(trace, bounds.k_star, g, cfg.smlc.gamma_k);

    let k_star = bounds.k_star;
    let gain_condition = k_star > 2.0 * bounds.b;
    let rate_condition = bounds.alpha_star > bounds.b_udot;
    let records = &trace.records;
    let startup_end = n / 10;

    // Decrease checks are conditional claims: a sample is eligible only when
    // the respective theorem's estimated hypotheses hold there.
    let learning_check = lyapunov_check(&v_learning, |i| {
        rate_condition
            && i >= startup_end
            && records[i].s.abs() > 10.0 * epsilon
            && records[i].k * k_star > records[i].s.abs()
    });
    let overall_check = lyapunov_check(&v_overall, |i| {
        gain_condition
            && records[i].s.abs() > 10.0 * epsilon
            && records[i].k * k_star > records[i].s.abs()
    });

    let kkstar_count = records.iter().filter(|r| r.k * k_star > r.s.abs()).count();

    let output_rate = match check_output_rate_identity(trace, OUTPUT_RATE_TOL) {
        Ok(stats) => Ok(stats),
        Err(AnalysisError::InsufficientData { eligible }) => Err(eligible),
        Err(e) => return Err(e),
    };
    let has_premise_series = records
        .first()
        .map(|r| !r.n_lower_1.is_empty())
        .unwrap_or(false);
    let premise = if has_premise_series {
        Some(match check_premise_identity(trace, PREMISE_TOL) {
            Ok(p) => Ok(p),
            Err(AnalysisError::InsufficientData { eligible }) => Err(eligible),
            Err(e) => return Err(e),
        })
    } else {
        None
    };

    Ok(DiagnosticsReport {
        rate_alpha_star_gt_b_udot: if bounds.alpha_star > bounds.b_udot {
            1.0
        } else {
            0.0
        },
        rate_kkstar_gt_s: if n == 0 {
            0.0
        } else {
            kkstar_count as f64 / n as f64
        },
        rate_kstar_gt_2b: if gain_condition { 1.0 } else { 0.0 },
        lyapunov_learning: learning_check,
        lyapunov_overall: overall_check,
        output_rate,
        premise,
        metrics: performance_metrics(trace, 0.25),
        bounds,
    })
}
