//! Simulation plants: longitudinal vehicle dynamics under a time-headway
//! spacing policy, and a second-order nonlinear benchmark system.
//!
//! Both plants expose the canonical-form pieces the diagnostics need
//! (`x_n_dot = f(x) + g*u + d`): the drift `f(x)` and the control
//! coefficient `g`. The controller itself never consults them.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PlantError {
    #[error("reference trajectory undefined for t = {0}; requires t >= 0")]
    NegativeTime(f64),
    #[error("unknown plant '{0}' (registered: acc, numeric2)")]
    UnknownPlant(String),
}

/// Longitudinal vehicle parameters. The time headway `h` is not fixed by the
/// scenario definition; the default of 0.5 s is a configurable guess.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccParams {
    /// Vehicle mass, kg.
    pub m: f64,
    /// Aerodynamic drag coefficient.
    pub k_a: f64,
    /// Engine time-lag, s.
    pub tau: f64,
    /// Desired time headway, s.
    pub h: f64,
}

impl Default for AccParams {
    fn default() -> Self {
        AccParams {
            m: 9.0,
            k_a: 0.26,
            tau: 0.1,
            h: 0.5,
        }
    }
}

/// Reference position and its first three time derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RefSignal {
    pub xd: f64,
    pub xd_dot: f64,
    pub xd_ddot: f64,
    pub xd_dddot: f64,
}

impl RefSignal {
    /// n-th derivative of the reference, n in 0..=3.
    pub fn nth(&self, n: u32) -> f64 {
        match n {
            0 => self.xd,
            1 => self.xd_dot,
            2 => self.xd_ddot,
            3 => self.xd_dddot,
            _ => 0.0,
        }
    }
}

/// Vehicle state derivative for state `[position, velocity, acceleration]`,
/// throttle input `u` and additive disturbance `d`.
pub fn acc_dynamics(x: &[f64; 3], u: f64, d: f64, p: &AccParams) -> [f64; 3] {
    let ka_m = p.k_a / p.m;
    [
        x[1],
        x[2],
        -2.0 * ka_m * x[1] * x[2] - (x[2] + ka_m * x[1] * x[1]) / p.tau + u / (p.m * p.tau) + d,
    ]
}

/// Relative spacing error under the time-headway policy:
/// `e = x_d - position - h * velocity`.
pub fn spacing_error(x_d: f64, x: &[f64; 3], h: f64) -> f64 {
    x_d - x[0] - h * x[1]
}

/// Piecewise ramp reference: unit-rate ramp, a quadratic blend doubling the
/// rate over 20 s <= t < 40 s, then a constant rate-2 ramp. C0 everywhere,
/// C1 except at the two breakpoints where the acceleration jumps.
pub fn reference(t: f64) -> Result<RefSignal, PlantError> {
    if t < 0.0 {
        return Err(PlantError::NegativeTime(t));
    }
    let r = if t < 20.0 {
        RefSignal {
            xd: t,
            xd_dot: 1.0,
            xd_ddot: 0.0,
            xd_dddot: 0.0,
        }
    } else if t < 40.0 {
        let dt = t - 20.0;
        RefSignal {
            xd: t + 0.025 * dt * dt,
            xd_dot: 1.0 + 0.05 * dt,
            xd_ddot: 0.05,
            xd_dddot: 0.0,
        }
    } else {
        let d20 = t - 20.0;
        let d40 = t - 40.0;
        RefSignal {
            xd: t + 0.025 * d20 * d20 - 0.025 * d40 * d40,
            xd_dot: 2.0,
            xd_ddot: 0.0,
            xd_dddot: 0.0,
        }
    };
    Ok(r)
}

/// External disturbance on the vehicle dynamics: `d = 1 + 0.25 sin t`.
pub fn disturbance(t: f64) -> f64 {
    1.0 + 0.25 * t.sin()
}

/// Second-order benchmark: `x1_dot = x2`, `x2_dot = -2 x1 - x2 + exp(x1) + u`.
pub fn numeric_plant(x: &[f64; 2], u: f64) -> [f64; 2] {
    [x[1], -2.0 * x[0] - x[1] + x[0].exp() + u]
}

/// A plant the closed-loop simulator can drive. Implementations are pure.
pub trait Plant {
    fn name(&self) -> &'static str;
    fn state_dim(&self) -> usize;
    /// System order `n`; the sliding surface has order `n - 1`.
    fn order(&self) -> u32;
    /// Control coefficient `g` in the canonical form (diagnostics only).
    fn control_gain(&self) -> f64;
    /// State derivative at time `t` under control `u` and disturbance `d`.
    fn derivative(&self, t: f64, x: &[f64], u: f64, d: f64) -> Vec<f64>;
    /// Drift `f(x)` in the canonical form (diagnostics only).
    fn drift(&self, x: &[f64]) -> f64;
    /// Reference signal at time `t`.
    fn reference(&self, t: f64) -> Result<RefSignal, PlantError>;
    /// Raw disturbance signal at time `t` (before the scenario on/off switch).
    fn disturbance(&self, t: f64) -> f64;
    /// `(e, e_dot)` from the reference and the measured state, using only
    /// definitional relations between successive state components.
    fn tracking_error(&self, r: &RefSignal, x: &[f64]) -> (f64, f64);
}

/// Adaptive-cruise-control vehicle following an exogenous position reference.
#[derive(Debug, Clone)]
pub struct AccPlant {
    pub params: AccParams,
}

impl Plant for AccPlant {
    fn name(&self) -> &'static str {
        "acc"
    }

    fn state_dim(&self) -> usize {
        3
    }

    fn order(&self) -> u32 {
        3
    }

    fn control_gain(&self) -> f64 {
        1.0 / (self.params.m * self.params.tau)
    }

    fn derivative(&self, _t: f64, x: &[f64], u: f64, d: f64) -> Vec<f64> {
        acc_dynamics(&[x[0], x[1], x[2]], u, d, &self.params).to_vec()
    }

    fn drift(&self, x: &[f64]) -> f64 {
        let ka_m = self.params.k_a / self.params.m;
        -2.0 * ka_m * x[1] * x[2] - (x[2] + ka_m * x[1] * x[1]) / self.params.tau
    }

    fn reference(&self, t: f64) -> Result<RefSignal, PlantError> {
        reference(t)
    }

    fn disturbance(&self, t: f64) -> f64 {
        disturbance(t)
    }

    fn tracking_error(&self, r: &RefSignal, x: &[f64]) -> (f64, f64) {
        let h = self.params.h;
        let e = spacing_error(r.xd, &[x[0], x[1], x[2]], h);
        let e_dot = r.xd_dot - x[1] - h * x[2];
        (e, e_dot)
    }
}

/// Second-order nonlinear system regulated to the origin.
#[derive(Debug, Clone)]
pub struct NumericPlant;

impl Plant for NumericPlant {
    fn name(&self) -> &'static str {
        "numeric2"
    }

    fn state_dim(&self) -> usize {
        2
    }

    fn order(&self) -> u32 {
        2
    }

    fn control_gain(&self) -> f64 {
        1.0
    }

    fn derivative(&self, _t: f64, x: &[f64], u: f64, d: f64) -> Vec<f64> {
        let dx = numeric_plant(&[x[0], x[1]], u);
        vec![dx[0], dx[1] + d]
    }

    fn drift(&self, x: &[f64]) -> f64 {
        -2.0 * x[0] - x[1] + x[0].exp()
    }

    fn reference(&self, t: f64) -> Result<RefSignal, PlantError> {
        if t < 0.0 {
            Err(PlantError::NegativeTime(t))
        } else {
            Ok(RefSignal::default())
        }
    }

    fn disturbance(&self, _t: f64) -> f64 {
        0.0
    }

    fn tracking_error(&self, r: &RefSignal, x: &[f64]) -> (f64, f64) {
        (r.xd - x[0], r.xd_dot - x[1])
    }
}

/// Look a plant up by its registered name.
pub fn plant_by_name(name: &str, headway: f64) -> Result<Box<dyn Plant>, PlantError> {
    match name {
        "acc" => Ok(Box::new(AccPlant {
            params: AccParams {
                h: headway,
                ..AccParams::default()
            },
        })),
        "numeric2" => Ok(Box::new(NumericPlant)),
        other => Err(PlantError::UnknownPlant(other.to_string())),
    }
}
