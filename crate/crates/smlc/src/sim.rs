//! Fixed-step closed-loop simulation: plant integration under zero-order-hold
//! control, seeded measurement noise, error-derivative estimation, and full
//! trace capture.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::controller::{clamp_flags, control_step, ControllerState, ErrorSignals, SmlcConfig};
use crate::fuzzy::{FuzzyError, MfBank};
use crate::plants::{plant_by_name, Plant, PlantError};

/// Memberships per input; the rule grid is the square of this.
pub const MFS_PER_INPUT: usize = 3;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("state diverged (non-finite) at step {step}, t = {t}")]
    Divergence {
        step: usize,
        t: f64,
        partial: Box<SimulationTrace>,
    },
    #[error("invalid scenario config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Fuzzy(#[from] FuzzyError),
    #[error(transparent)]
    Plant(#[from] PlantError),
}

/// Everything one closed-loop run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub plant_name: String,
    pub dt: f64,
    pub horizon: f64,
    pub x0: Vec<f64>,
    pub smlc: SmlcConfig,
    pub k0: f64,
    pub alpha0: f64,
    pub q0: f64,
    /// Scale of the symmetric initial membership layout.
    pub input_range: f64,
    /// Measurement signal-to-noise ratio in dB; `None` disables noise.
    pub snr_db: Option<f64>,
    pub seed: u64,
    pub disturbance_on: bool,
    /// Time headway for the vehicle plant, s.
    pub headway: f64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.dt > 0.0) {
            return Err(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.horizon >= 0.0) {
            return Err(format!(
                "horizon must be non-negative, got {}",
                self.horizon
            ));
        }
        if !(self.k0 > 0.0) {
            return Err(format!("k0 must be positive, got {}", self.k0));
        }
        if !(self.alpha0 > 0.0) {
            return Err(format!("alpha0 must be positive, got {}", self.alpha0));
        }
        if !(self.input_range > 0.0) {
            return Err(format!(
                "input_range must be positive, got {}",
                self.input_range
            ));
        }
        if let Some(db) = self.snr_db {
            if !db.is_finite() {
                return Err(format!("snr_db must be finite, got {db}"));
            }
        }
        if !(self.headway >= 0.0) {
            return Err(format!(
                "headway must be non-negative, got {}",
                self.headway
            ));
        }
        self.smlc.validate()
    }

    /// Number of records a run produces: one per sampling instant, inclusive.
    pub fn record_count(&self) -> usize {
        (self.horizon / self.dt).round() as usize + 1
    }
}

/// One sampling instant of a run. Control quantities are the values emitted
/// at this instant (adapted parameters pre-update); the control `u` is held
/// over `[t, t + dt)`.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub t: f64,
    pub state: Vec<f64>,
    pub measured: Vec<f64>,
    pub xd: f64,
    /// n-th reference derivative at `t` (n = system order), for diagnostics.
    pub xd_nth: f64,
    pub e: f64,
    pub e_dot: f64,
    pub e_ddot: f64,
    pub s: f64,
    pub sgn_s: f64,
    pub u_c: f64,
    pub u_n: f64,
    pub u: f64,
    pub k: f64,
    pub alpha: f64,
    pub q: f64,
    /// Plant drift `f(x)` at the true state, for diagnostics.
    pub f_x: f64,
    /// Disturbance applied at the start of the hold interval.
    pub d: f64,
    pub n_lower_1: Vec<f64>,
    pub n_upper_1: Vec<f64>,
    pub n_lower_2: Vec<f64>,
    pub n_upper_2: Vec<f64>,
    pub norm_residual_lower: f64,
    pub norm_residual_upper: f64,
    pub clamp_flags: u16,
    pub dead_zone: bool,
}

/// Full record of one closed-loop run.
#[derive(Debug, Clone)]
pub struct SimulationTrace {
    pub config: ScenarioConfig,
    pub records: Vec<StepRecord>,
    /// Per-component measurement-noise standard deviation; empty if noise off.
    pub noise_std: Vec<f64>,
}

/// Classical fourth-order Runge-Kutta step with zero-order-hold control and
/// the disturbance sampled at the substep times.
pub fn integrate_step(
    plant: &dyn Plant,
    x: &[f64],
    u: f64,
    d: &dyn Fn(f64) -> f64,
    t: f64,
    dt: f64,
) -> Vec<f64> {
    let half = 0.5 * dt;
    let k1 = plant.derivative(t, x, u, d(t));
    let x2: Vec<f64> = x.iter().zip(&k1).map(|(xi, ki)| xi + half * ki).collect();
    let k2 = plant.derivative(t + half, &x2, u, d(t + half));
    let x3: Vec<f64> = x.iter().zip(&k2).map(|(xi, ki)| xi + half * ki).collect();
    let k3 = plant.derivative(t + half, &x3, u, d(t + half));
    let x4: Vec<f64> = x.iter().zip(&k3).map(|(xi, ki)| xi + dt * ki).collect();
    let k4 = plant.derivative(t + dt, &x4, u, d(t + dt));
    x.iter()
        .enumerate()
        .map(|(i, xi)| xi + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Add zero-mean Gaussian measurement noise with per-component standard
/// deviation `signal_rms * 10^(-snr_db/20)`. One draw per component keeps the
/// stream alignment independent of the RMS values.
pub fn add_noise<R: Rng>(x: &[f64], snr_db: f64, signal_rms: &[f64], rng: &mut R) -> Vec<f64> {
    let scale = 10f64.powf(-snr_db / 20.0);
    x.iter()
        .zip(signal_rms)
        .map(|(xi, rms)| {
            let z: f64 = rng.sample(StandardNormal);
            xi + rms * scale * z
        })
        .collect()
}

/// First-order smoothing span, in samples, for the curvature fed to the
/// sliding surface. Third-order surfaces difference a signal that carries the
/// previous sample's control through the headway term; unsmoothed, that
/// closes a one-step loop through `k*sgn(s)` with gain above one.
pub const SURFACE_CURVATURE_FILTER_STEPS: f64 = 15.0;

/// Error signals for one step: `e` and `e_dot` come from the measured state,
/// `e_ddot` from a backward difference of `e_dot` (zero on the first step).
pub fn estimate_error_derivatives(
    e: f64,
    e_dot: f64,
    prev_e_dot: Option<f64>,
    dt: f64,
) -> ErrorSignals {
    let e_ddot = match prev_e_dot {
        Some(prev) => (e_dot - prev) / dt,
        None => 0.0,
    };
    ErrorSignals::from_parts(e, e_dot, e_ddot)
}

/// Stateful error-derivative estimator for a run: backward-differenced
/// curvature for the adaptation laws plus its smoothed counterpart for the
/// surface.
#[derive(Debug, Clone, Default)]
pub struct ErrorDerivativeEstimator {
    prev_e_dot: Option<f64>,
    smoothed_curvature: f64,
}

impl ErrorDerivativeEstimator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn step(&mut self, e: f64, e_dot: f64, dt: f64) -> ErrorSignals {
        let err = estimate_error_derivatives(e, e_dot, self.prev_e_dot, dt);
        self.prev_e_dot = Some(e_dot);
        self.smoothed_curvature +=
            (err.e_ddot() - self.smoothed_curvature) / SURFACE_CURVATURE_FILTER_STEPS;
        err.with_surface_curvature(self.smoothed_curvature)
    }
}

fn rms_per_component(trace: &SimulationTrace) -> Vec<f64> {
    let dim = trace.config.x0.len();
    let n = trace.records.len() as f64;
    (0..dim)
        .map(|j| {
            let sum_sq: f64 = trace.records.iter().map(|r| r.state[j] * r.state[j]).sum();
            (sum_sq / n).sqrt()
        })
        .collect()
}

/// Run one scenario. With noise enabled, a noise-free pilot run of the same
/// scenario first establishes the per-component signal RMS that defines the
/// requested SNR; the pilot shares every other setting. Deterministic for a
/// fixed config and seed.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<SimulationTrace, SimError> {
    cfg.validate().map_err(SimError::InvalidConfig)?;
    let plant = plant_by_name(&cfg.plant_name, cfg.headway)?;
    if cfg.x0.len() != plant.state_dim() {
        return Err(SimError::InvalidConfig(format!(
            "x0 has {} entries but plant '{}' has {} states",
            cfg.x0.len(),
            plant.name(),
            plant.state_dim()
        )));
    }
    if cfg.smlc.order != plant.order() {
        return Err(SimError::InvalidConfig(format!(
            "configured order {} does not match plant order {}",
            cfg.smlc.order,
            plant.order()
        )));
    }

    let noise: Option<(f64, Vec<f64>)> = match cfg.snr_db {
        Some(db) => {
            let pilot = simulate(cfg, plant.as_ref(), None)?;
            Some((db, rms_per_component(&pilot)))
        }
        None => None,
    };

    simulate(
        cfg,
        plant.as_ref(),
        noise.as_ref().map(|(db, rms)| (*db, rms.as_slice())),
    )
}

fn simulate(
    cfg: &ScenarioConfig,
    plant: &dyn Plant,
    noise: Option<(f64, &[f64])>,
) -> Result<SimulationTrace, SimError> {
    let steps = (cfg.horizon / cfg.dt).round() as usize;
    let order = plant.order();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let bank = MfBank::symmetric(cfg.input_range, MFS_PER_INPUT);
    let mut controller = ControllerState::new(bank, cfg.k0, cfg.alpha0, cfg.q0);

    let noise_std: Vec<f64> = match noise {
        Some((db, rms)) => {
            let scale = 10f64.powf(-db / 20.0);
            rms.iter().map(|r| r * scale).collect()
        }
        None => Vec::new(),
    };
    let mut trace = SimulationTrace {
        config: cfg.clone(),
        records: Vec::with_capacity(steps + 1),
        noise_std,
    };

    let mut state = cfg.x0.clone();
    let mut estimator = ErrorDerivativeEstimator::new();

    for i in 0..=steps {
        let t = i as f64 * cfg.dt;

        let measured = match noise {
            Some((db, rms)) => add_noise(&state, db, rms, &mut rng),
            None => state.clone(),
        };

        let r = plant.reference(t)?;
        let (e, e_dot) = plant.tracking_error(&r, &measured);
        let err = estimator.step(e, e_dot, cfg.dt);

        let out = control_step(&mut controller, &err, &cfg.smlc, cfg.dt)?;
        let mut flags = out.clamp_flags;
        if (i as u32) < order - 1 {
            flags |= clamp_flags::STARTUP;
        }

        let d_now = if cfg.disturbance_on {
            plant.disturbance(t)
        } else {
            0.0
        };
        trace.records.push(StepRecord {
            t,
            state: state.clone(),
            measured,
            xd: r.xd,
            xd_nth: r.nth(order),
            e,
            e_dot,
            e_ddot: err.e_ddot(),
            s: out.s,
            sgn_s: out.sgn_s,
            u_c: out.u_c,
            u_n: out.u_n,
            u: out.u,
            k: out.k,
            alpha: out.alpha,
            q: out.q,
            f_x: plant.drift(&state),
            d: d_now,
            n_lower_1: out.n_lower_1,
            n_upper_1: out.n_upper_1,
            n_lower_2: out.n_lower_2,
            n_upper_2: out.n_upper_2,
            norm_residual_lower: out.norm_residual_lower,
            norm_residual_upper: out.norm_residual_upper,
            clamp_flags: flags,
            dead_zone: out.dead_zone,
        });

        if i < steps {
            let d_fn = |tt: f64| {
                if cfg.disturbance_on {
                    plant.disturbance(tt)
                } else {
                    0.0
                }
            };
            state = integrate_step(plant, &state, out.u, &d_fn, t, cfg.dt);
            if state.iter().any(|v| !v.is_finite()) {
                return Err(SimError::Divergence {
                    step: i + 1,
                    t: (i + 1) as f64 * cfg.dt,
                    partial: Box::new(trace),
                });
            }
        }
    }

    Ok(trace)
}
