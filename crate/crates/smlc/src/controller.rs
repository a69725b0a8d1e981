//! The control law `u = u_c + u_n`, the sliding surface, and the online
//! sliding-mode adaptation of every controller parameter.
//!
//! One `control_step` emits the control from the current parameters and then
//! advances them all by one forward-Euler step: membership centers and widths,
//! rule consequents, the mixing weight `q`, the controller gain `k`, and the
//! learning rate `alpha`. Every right-hand side is evaluated at the pre-update
//! values, so the emitted control is causal and a step is reproducible from
//! the recorded state alone.
//!
//! Singularity handling:
//! - denominators below `denom_clamp` in magnitude are replaced by
//!   `denom_clamp` carrying the original sign (exact zero maps to the
//!   positive clamp);
//! - sigmas are kept inside `[SIGMA_FLOOR, SIGMA_CEILING]` after each step.
//!   The continuous width law cannot cross zero but the Euler step can, and
//!   it escapes to infinity in finite time once a normalized distance
//!   `(input - center)/sigma` approaches zero with the surface sign held;
//!   the two limits keep the state finite. Steps where any of this fired are
//!   flagged so diagnostics can exclude them.

use crate::fuzzy::{t2_output, ConsequentSet, FiringStrengths, FuzzyError, MfBank};

/// Lower bound applied to every membership sigma after an update step.
pub const SIGMA_FLOOR: f64 = 1e-6;

/// Upper bound applied to every membership sigma after an update step.
pub const SIGMA_CEILING: f64 = 1e6;

/// Bit assignments for the per-step clamp bitmask.
pub mod clamp_flags {
    /// Width-law denominator clamped, lower input-1 family.
    pub const SIGMA_DEN_LOWER_1: u16 = 1 << 0;
    /// Width-law denominator clamped, upper input-1 family.
    pub const SIGMA_DEN_UPPER_1: u16 = 1 << 1;
    /// Width-law denominator clamped, lower input-2 family.
    pub const SIGMA_DEN_LOWER_2: u16 = 1 << 2;
    /// Width-law denominator clamped, upper input-2 family.
    pub const SIGMA_DEN_UPPER_2: u16 = 1 << 3;
    /// Consequent-law squared-norm denominator clamped.
    pub const CONSEQUENT_NORM: u16 = 1 << 4;
    /// q-law scalar denominator clamped.
    pub const Q_DENOMINATOR: u16 = 1 << 5;
    /// Some sigma hit the floor or ceiling limit.
    pub const SIGMA_LIMIT: u16 = 1 << 6;
    /// Startup step: error derivatives incomplete (zero-padded).
    pub const STARTUP: u16 = 1 << 7;

    /// Every bit that marks an adaptation-law clamp (excludes STARTUP).
    pub const ANY_CLAMP: u16 = SIGMA_DEN_LOWER_1
        | SIGMA_DEN_UPPER_1
        | SIGMA_DEN_LOWER_2
        | SIGMA_DEN_UPPER_2
        | CONSEQUENT_NORM
        | Q_DENOMINATOR
        | SIGMA_LIMIT;

    /// Bits per membership family, indexed lower-1, upper-1, lower-2, upper-2.
    pub const SIGMA_DEN_FAMILY: [u16; 4] = [
        SIGMA_DEN_LOWER_1,
        SIGMA_DEN_UPPER_1,
        SIGMA_DEN_LOWER_2,
        SIGMA_DEN_UPPER_2,
    ];
}

/// Static controller configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SmlcConfig {
    /// Slope of the sliding surface, strictly positive.
    pub lambda: f64,
    /// Order of the system under control; the surface has order `order - 1`.
    pub order: u32,
    /// Adaptation coefficient for the controller gain.
    pub gamma_k: f64,
    /// Adaptation coefficient for the learning rate.
    pub gamma_alpha: f64,
    /// Width of the smoothed sign function `s / (|s| + chi)`.
    pub chi: f64,
    /// Dead-zone half-width: `k` and `alpha` freeze while `|s| < epsilon`.
    pub epsilon: f64,
    /// Magnitude floor for adaptation-law denominators.
    pub denom_clamp: f64,
}

impl SmlcConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.order < 2 {
            return Err(format!(
                "system order must be at least 2, got {}",
                self.order
            ));
        }
        for (name, v) in [
            ("lambda", self.lambda),
            ("gamma_k", self.gamma_k),
            ("gamma_alpha", self.gamma_alpha),
            ("chi", self.chi),
            ("epsilon", self.epsilon),
            ("denom_clamp", self.denom_clamp),
        ] {
            if !(v > 0.0) {
                return Err(format!("{name} must be strictly positive, got {v}"));
            }
        }
        Ok(())
    }
}

/// Tracking error and its time derivatives `[e, e_dot, e_ddot, ...]`.
///
/// Always carries at least three entries: the premise update laws consume
/// `e_ddot` even for second-order plants, where the sliding surface itself
/// only uses the first two.
///
/// A separately smoothed curvature may be attached for the surface. Surfaces
/// of order three and above difference a signal that carries the control
/// from the previous sample (through the headway term of the vehicle error),
/// and feeding that raw difference back through `k*sgn(s)` is a one-step
/// loop with gain `k*h*g/chi`, unstable for any practical gain. The
/// adaptation laws keep the raw difference: their center laws must track the
/// input's actual rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSignals {
    derivs: Vec<f64>,
    surface_e_ddot: Option<f64>,
}

impl ErrorSignals {
    pub fn new(derivs: Vec<f64>) -> Self {
        assert!(derivs.len() >= 3, "error signals need e, e_dot and e_ddot");
        ErrorSignals {
            derivs,
            surface_e_ddot: None,
        }
    }

    pub fn from_parts(e: f64, e_dot: f64, e_ddot: f64) -> Self {
        ErrorSignals {
            derivs: vec![e, e_dot, e_ddot],
            surface_e_ddot: None,
        }
    }

    /// Attach a smoothed curvature for the sliding surface; the raw value
    /// stays in place for the adaptation laws.
    pub fn with_surface_curvature(mut self, value: f64) -> Self {
        self.surface_e_ddot = Some(value);
        self
    }

    pub fn e(&self) -> f64 {
        self.derivs[0]
    }

    pub fn e_dot(&self) -> f64 {
        self.derivs[1]
    }

    /// Raw second error derivative, as consumed by the adaptation laws.
    pub fn e_ddot(&self) -> f64 {
        self.derivs[2]
    }

    /// Second error derivative as consumed by the sliding surface.
    pub fn surface_e_ddot(&self) -> f64 {
        self.surface_e_ddot.unwrap_or(self.derivs[2])
    }

    pub fn derivs(&self) -> &[f64] {
        &self.derivs
    }
}

/// The full adapted parameter set of the controller.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    pub bank: MfBank,
    pub cons: ConsequentSet,
    /// Conventional-term gain, positive and non-decreasing over a run.
    pub k: f64,
    /// Learning rate of the adaptation laws, positive and non-decreasing.
    pub alpha: f64,
}

impl ControllerState {
    /// Fresh controller: zero consequents, so the network output starts at
    /// zero and the conventional term alone acts on the first step.
    pub fn new(bank: MfBank, k0: f64, alpha0: f64, q0: f64) -> Self {
        assert!(k0 > 0.0, "controller gain must start positive");
        assert!(alpha0 > 0.0, "learning rate must start positive");
        let rules = bank.rule_count();
        ControllerState {
            bank,
            cons: ConsequentSet {
                f: vec![0.0; rules],
                q: q0,
            },
            k: k0,
            alpha: alpha0,
        }
    }
}

/// Everything a single control step emits, with the adapted parameters that
/// produced the control (pre-update values) and diagnostic extras.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub s: f64,
    /// Smoothed sign of `s` actually used by the laws this step.
    pub sgn_s: f64,
    pub u: f64,
    pub u_c: f64,
    pub u_n: f64,
    pub k: f64,
    pub alpha: f64,
    pub q: f64,
    pub clamp_flags: u16,
    pub dead_zone: bool,
    /// Normalized distances `(input - center)/sigma` per family, pre-update.
    pub n_lower_1: Vec<f64>,
    pub n_upper_1: Vec<f64>,
    pub n_lower_2: Vec<f64>,
    pub n_upper_2: Vec<f64>,
    /// `|sum(normalized) - 1|` for the lower and upper firing strengths.
    pub norm_residual_lower: f64,
    pub norm_residual_upper: f64,
}

fn binomial(n: u32, k: u32) -> f64 {
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Sliding surface `s = (d/dt + lambda)^(order-1) e`, expanded binomially over
/// the error derivatives. The curvature term uses the surface-designated
/// estimate when one is attached.
pub fn sliding_surface(err: &ErrorSignals, lambda: f64, order: u32) -> f64 {
    let n = order - 1;
    let derivs = err.derivs();
    assert!(
        derivs.len() >= order as usize,
        "error signals shorter than system order"
    );
    let mut s = 0.0;
    for m in 0..=n {
        let d = if m == 2 {
            err.surface_e_ddot()
        } else {
            derivs[m as usize]
        };
        s += binomial(n, m) * lambda.powi((n - m) as i32) * d;
    }
    s
}

/// Chattering-free sign: `s / (|s| + chi)`, odd and strictly inside (-1, 1).
pub fn smoothed_sign(s: f64, chi: f64) -> f64 {
    s / (s.abs() + chi)
}

/// Conventional control term `u_c = k * sgn(s)` with the smoothed sign.
pub fn conventional_control(k: f64, s: f64, chi: f64) -> f64 {
    k * smoothed_sign(s, chi)
}

/// Gain adaptation `k_dot = gamma_k |s| / 2`, frozen inside the dead-zone.
pub fn update_gain(k: f64, s: f64, gamma_k: f64, epsilon: f64, dt: f64) -> f64 {
    if s.abs() < epsilon {
        k
    } else {
        k + dt * gamma_k * s.abs() / 2.0
    }
}

/// Learning-rate adaptation `alpha_dot = gamma_alpha |s|`, frozen inside the
/// dead-zone.
pub fn update_learning_rate(alpha: f64, s: f64, gamma_alpha: f64, epsilon: f64, dt: f64) -> f64 {
    if s.abs() < epsilon {
        alpha
    } else {
        alpha + dt * gamma_alpha * s.abs()
    }
}

/// Sign-preserving magnitude floor: values inside `(-floor, floor)` map to
/// `+-floor` matching their sign, exact zero to `+floor`. Returns the clamped
/// value and whether clamping occurred.
pub fn clamp_denominator(x: f64, floor: f64) -> (f64, bool) {
    if x.abs() >= floor {
        (x, false)
    } else if x < 0.0 {
        (-floor, true)
    } else {
        (floor, true)
    }
}

fn limit_sigma(sigma: f64) -> (f64, bool) {
    if sigma < SIGMA_FLOOR {
        (SIGMA_FLOOR, true)
    } else if sigma > SIGMA_CEILING {
        (SIGMA_CEILING, true)
    } else {
        (sigma, false)
    }
}

// One center/width pair stepped forward. `x` and `x_dot` are the membership's
// input and its rate (e, e_dot for input 1; e_dot, e_ddot for input 2).
fn step_premise_pair(
    center: f64,
    sigma: f64,
    x: f64,
    x_dot: f64,
    alpha: f64,
    sgn_s: f64,
    denom_clamp: f64,
    dt: f64,
) -> (f64, f64, bool, bool) {
    let center_next = center + dt * (x_dot + (x - center) * alpha * sgn_s);
    let (den, den_clamped) = clamp_denominator(x - center, denom_clamp);
    let ratio = sigma / den;
    let sigma_next = sigma + dt * (-sigma * (1.0 + ratio * ratio) * alpha * sgn_s);
    let (sigma_next, limited) = limit_sigma(sigma_next);
    (center_next, sigma_next, den_clamped, limited)
}

/// Advance every membership center and width one Euler step. All right-hand
/// sides use the pre-update bank. Returns the new bank and the clamp bits.
pub fn update_premise(
    state: &ControllerState,
    err: &ErrorSignals,
    s: f64,
    cfg: &SmlcConfig,
    dt: f64,
) -> (MfBank, u16) {
    let sgn_s = smoothed_sign(s, cfg.chi);
    let alpha = state.alpha;
    let mut flags = 0u16;
    let mut bank = state.bank.clone();

    for mf in &mut bank.input1 {
        let (c, sg, clamped, limited) = step_premise_pair(
            mf.lower_center,
            mf.lower_sigma,
            err.e(),
            err.e_dot(),
            alpha,
            sgn_s,
            cfg.denom_clamp,
            dt,
        );
        mf.lower_center = c;
        mf.lower_sigma = sg;
        if clamped {
            flags |= clamp_flags::SIGMA_DEN_LOWER_1;
        }
        if limited {
            flags |= clamp_flags::SIGMA_LIMIT;
        }
        let (c, sg, clamped, limited) = step_premise_pair(
            mf.upper_center,
            mf.upper_sigma,
            err.e(),
            err.e_dot(),
            alpha,
            sgn_s,
            cfg.denom_clamp,
            dt,
        );
        mf.upper_center = c;
        mf.upper_sigma = sg;
        if clamped {
            flags |= clamp_flags::SIGMA_DEN_UPPER_1;
        }
        if limited {
            flags |= clamp_flags::SIGMA_LIMIT;
        }
    }
    for mf in &mut bank.input2 {
        let (c, sg, clamped, limited) = step_premise_pair(
            mf.lower_center,
            mf.lower_sigma,
            err.e_dot(),
            err.e_ddot(),
            alpha,
            sgn_s,
            cfg.denom_clamp,
            dt,
        );
        mf.lower_center = c;
        mf.lower_sigma = sg;
        if clamped {
            flags |= clamp_flags::SIGMA_DEN_LOWER_2;
        }
        if limited {
            flags |= clamp_flags::SIGMA_LIMIT;
        }
        let (c, sg, clamped, limited) = step_premise_pair(
            mf.upper_center,
            mf.upper_sigma,
            err.e_dot(),
            err.e_ddot(),
            alpha,
            sgn_s,
            cfg.denom_clamp,
            dt,
        );
        mf.upper_center = c;
        mf.upper_sigma = sg;
        if clamped {
            flags |= clamp_flags::SIGMA_DEN_UPPER_2;
        }
        if limited {
            flags |= clamp_flags::SIGMA_LIMIT;
        }
    }
    (bank, flags)
}

/// Advance the rule consequents one Euler step:
/// `f_dot = combo / ||combo||^2 * alpha * sgn(s)` where
/// `combo = q*W_lower + (1-q)*W_upper` over the normalized firing strengths.
/// Returns the new consequents and whether the squared norm was clamped.
pub fn update_consequents(
    state: &ControllerState,
    fs: &FiringStrengths,
    s: f64,
    cfg: &SmlcConfig,
    dt: f64,
) -> (Vec<f64>, bool) {
    let sgn_s = smoothed_sign(s, cfg.chi);
    let q = state.cons.q;
    let combo: Vec<f64> = fs
        .lower_normalized
        .iter()
        .zip(&fs.upper_normalized)
        .map(|(lo, up)| q * lo + (1.0 - q) * up)
        .collect();
    let norm_sq: f64 = combo.iter().map(|c| c * c).sum();
    let (den, clamped) = clamp_denominator(norm_sq, cfg.denom_clamp);
    let f_next = state
        .cons
        .f
        .iter()
        .zip(&combo)
        .map(|(f, c)| f + dt * (c / den * state.alpha * sgn_s))
        .collect();
    (f_next, clamped)
}

/// Advance the mixing weight one Euler step:
/// `q_dot = alpha * sgn(s) / (F . (W_lower - W_upper))` with the scalar
/// denominator magnitude-clamped. `q` is intentionally not confined to
/// [0, 1]. Returns the new value and whether the denominator was clamped.
pub fn update_q(
    state: &ControllerState,
    fs: &FiringStrengths,
    s: f64,
    cfg: &SmlcConfig,
    dt: f64,
) -> (f64, bool) {
    let sgn_s = smoothed_sign(s, cfg.chi);
    let dot: f64 = state
        .cons
        .f
        .iter()
        .zip(fs.lower_normalized.iter().zip(&fs.upper_normalized))
        .map(|(f, (lo, up))| f * (lo - up))
        .sum();
    let (den, clamped) = clamp_denominator(dot, cfg.denom_clamp);
    (state.cons.q + dt * (state.alpha * sgn_s / den), clamped)
}

fn n_values(mfs: &[crate::fuzzy::Type2MembershipFunction], x: f64) -> (Vec<f64>, Vec<f64>) {
    let lower = mfs
        .iter()
        .map(|m| (x - m.lower_center) / m.lower_sigma)
        .collect();
    let upper = mfs
        .iter()
        .map(|m| (x - m.upper_center) / m.upper_sigma)
        .collect();
    (lower, upper)
}

/// One full controller step: emit `u = u_c + u_n` from the current
/// parameters, then adapt them all for the next step.
pub fn control_step(
    state: &mut ControllerState,
    err: &ErrorSignals,
    cfg: &SmlcConfig,
    dt: f64,
) -> Result<StepOutput, FuzzyError> {
    let s = sliding_surface(err, cfg.lambda, cfg.order);
    let sgn_s = smoothed_sign(s, cfg.chi);
    let fs = FiringStrengths::compute(err.e(), err.e_dot(), &state.bank)?;

    let u_n = t2_output(&fs, &state.cons);
    let u_c = state.k * sgn_s;
    let u = u_c + u_n;

    let (n_lower_1, n_upper_1) = n_values(&state.bank.input1, err.e());
    let (n_lower_2, n_upper_2) = n_values(&state.bank.input2, err.e_dot());
    let norm_residual_lower = (fs.lower_normalized.iter().sum::<f64>() - 1.0).abs();
    let norm_residual_upper = (fs.upper_normalized.iter().sum::<f64>() - 1.0).abs();

    let emitted_k = state.k;
    let emitted_alpha = state.alpha;
    let emitted_q = state.cons.q;

    // All updates read the pre-update state, then commit together.
    let (bank_next, mut flags) = update_premise(state, err, s, cfg, dt);
    let (f_next, f_clamped) = update_consequents(state, &fs, s, cfg, dt);
    let (q_next, q_clamped) = update_q(state, &fs, s, cfg, dt);
    let k_next = update_gain(state.k, s, cfg.gamma_k, cfg.epsilon, dt);
    let alpha_next = update_learning_rate(state.alpha, s, cfg.gamma_alpha, cfg.epsilon, dt);

    if f_clamped {
        flags |= clamp_flags::CONSEQUENT_NORM;
    }
    if q_clamped {
        flags |= clamp_flags::Q_DENOMINATOR;
    }

    state.bank = bank_next;
    state.cons.f = f_next;
    state.cons.q = q_next;
    state.k = k_next;
    state.alpha = alpha_next;

    Ok(StepOutput {
        s,
        sgn_s,
        u,
        u_c,
        u_n,
        k: emitted_k,
        alpha: emitted_alpha,
        q: emitted_q,
        clamp_flags: flags,
        dead_zone: s.abs() < cfg.epsilon,
        n_lower_1,
        n_upper_1,
        n_lower_2,
        n_upper_2,
        norm_residual_lower,
        norm_residual_upper,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fuzzy::Type2MembershipFunction;

    fn test_cfg(lambda: f64, order: u32) -> SmlcConfig {
        SmlcConfig {
            lambda,
            order,
            gamma_k: 0.1,
            gamma_alpha: 0.1,
            chi: 0.05,
            epsilon: 0.001,
            denom_clamp: 0.001,
        }
    }

    #[test]
    fn surface_third_order_unit_slope() {
        // with lambda = 1 and order 3 the surface is e_ddot + 2 e_dot + e
        let err = ErrorSignals::from_parts(0.3, -0.7, 1.1);
        let s = sliding_surface(&err, 1.0, 3);
        assert!((s - (1.1 + 2.0 * (-0.7) + 0.3)).abs() < 1e-15);
    }

    #[test]
    fn surface_second_order() {
        let err = ErrorSignals::from_parts(1.0, 0.0, 0.0);
        assert_eq!(sliding_surface(&err, 2.0, 2), 2.0);
    }

    #[test]
    fn surface_zero_error() {
        let err = ErrorSignals::from_parts(0.0, 0.0, 0.0);
        assert_eq!(sliding_surface(&err, 3.7, 3), 0.0);
    }

    #[test]
    fn surface_matches_hand_expanded_binomial() {
        // (d/dt + lambda)^(n-1) e expanded by hand for n = 2 and n = 3,
        // across pseudo-random coefficient tuples.
        let mut x = 0.123_f64;
        let mut next = move || {
            x = (x * 997.0 + 0.173).fract();
            4.0 * x - 2.0
        };
        for _ in 0..100 {
            let (lambda, e, ed, edd) = (next().abs() + 0.01, next(), next(), next());
            let err = ErrorSignals::from_parts(e, ed, edd);
            let hand2 = ed + lambda * e;
            let hand3 = edd + 2.0 * lambda * ed + lambda * lambda * e;
            assert!((sliding_surface(&err, lambda, 2) - hand2).abs() < 1e-12);
            assert!((sliding_surface(&err, lambda, 3) - hand3).abs() < 1e-12);
        }
    }

    #[test]
    fn smoothed_sign_examples() {
        assert_eq!(smoothed_sign(0.0, 0.05), 0.0);
        assert!((smoothed_sign(0.05, 0.05) - 0.5).abs() < 1e-15);
        assert!((smoothed_sign(-0.05, 0.05) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn smoothed_sign_bounded_and_sign_matching() {
        for s in [-1e9, -3.0, -1e-9, 1e-9, 0.2, 7.0, 1e12] {
            let v = smoothed_sign(s, 0.05);
            assert!(v.abs() < 1.0);
            assert_eq!(v.signum(), s.signum());
        }
    }

    #[test]
    fn conventional_control_examples() {
        assert_eq!(conventional_control(1.0, 0.0, 0.05), 0.0);
        assert!((conventional_control(2.0, 0.05, 0.05) - 1.0).abs() < 1e-15);
        for s in [-10.0, -0.1, 0.3, 5.0] {
            assert!(conventional_control(2.0, s, 0.05).abs() < 2.0);
        }
    }

    #[test]
    fn gain_update_dead_zone_and_hand_value() {
        assert_eq!(update_gain(1.0, 0.0005, 0.1, 0.001, 0.01), 1.0);
        assert_eq!(update_gain(1.0, 0.0, 0.1, 0.001, 0.01), 1.0);
        let k = update_gain(1.0, 2.0, 0.1, 0.001, 0.01);
        assert!((k - 1.001).abs() < 1e-15);
        for s in [-5.0, -0.002, 0.0, 0.002, 5.0] {
            assert!(update_gain(1.0, s, 0.1, 0.001, 0.01) >= 1.0);
        }
    }

    #[test]
    fn learning_rate_update_dead_zone_and_hand_value() {
        let a = update_learning_rate(3.0, 0.5, 0.1, 0.001, 0.01);
        assert!((a - 3.0005).abs() < 1e-15);
        assert_eq!(update_learning_rate(3.0, 0.0005, 0.1, 0.001, 0.01), 3.0);
        for s in [-5.0, 0.0, 5.0] {
            assert!(update_learning_rate(3.0, s, 0.1, 0.001, 0.01) >= 3.0);
        }
    }

    #[test]
    fn denominator_clamp_preserves_sign() {
        assert_eq!(clamp_denominator(0.5, 0.001), (0.5, false));
        assert_eq!(clamp_denominator(-0.5, 0.001), (-0.5, false));
        assert_eq!(clamp_denominator(0.0004, 0.001), (0.001, true));
        assert_eq!(clamp_denominator(-0.0004, 0.001), (-0.001, true));
        assert_eq!(clamp_denominator(0.0, 0.001), (0.001, true));
    }

    fn singleton_state(c: f64, sigma: f64, k: f64, alpha: f64, q: f64) -> ControllerState {
        let mf = Type2MembershipFunction {
            lower_center: c,
            upper_center: c,
            lower_sigma: sigma,
            upper_sigma: sigma,
        };
        let bank = MfBank {
            input1: vec![mf],
            input2: vec![mf],
        };
        ControllerState::new(bank, k, alpha, q)
    }

    #[test]
    fn premise_center_hand_value() {
        // center law: c' = c + dt*(e_dot + (e - c)*alpha*sgn)
        // with e=1, c=0.5, e_dot=0.2, alpha=1, sgn(s)=1 -> 0.507
        let mut state = singleton_state(0.5, 1.0, 1.0, 1.0, 0.5);
        state.bank.input1[0].lower_center = 0.5;
        let err = ErrorSignals::from_parts(1.0, 0.2, 0.0);
        // force sgn = 1 exactly via a huge surface value against chi
        let cfg = SmlcConfig {
            chi: 1e-300,
            ..test_cfg(1.0, 2)
        };
        let s = 1.0;
        let (bank, _) = update_premise(&state, &err, s, &cfg, 0.01);
        assert!((bank.input1[0].lower_center - 0.507).abs() < 1e-12);
    }

    #[test]
    fn premise_sigma_hand_value() {
        // width law: sigma' = sigma + dt*(-sigma*(1 + (sigma/(e-c))^2)*alpha*sgn)
        // with sigma=1, e-c=1, alpha=1, sgn=1 -> 0.98
        let mut state = singleton_state(0.0, 1.0, 1.0, 1.0, 0.5);
        state.bank.input1[0].lower_center = 0.0;
        let err = ErrorSignals::from_parts(1.0, 0.0, 0.0);
        let cfg = SmlcConfig {
            chi: 1e-300,
            ..test_cfg(1.0, 2)
        };
        let (bank, flags) = update_premise(&state, &err, 1.0, &cfg, 0.01);
        assert!((bank.input1[0].lower_sigma - 0.98).abs() < 1e-12);
        assert_eq!(flags & clamp_flags::SIGMA_DEN_LOWER_1, 0);
    }

    #[test]
    fn premise_on_center_clamps_denominator_and_center_law_reduces() {
        // e exactly on the center: the center term vanishes (c' = c + dt*e_dot)
        // and the width law runs on the clamped denominator.
        let state = singleton_state(1.0, 1.0, 1.0, 1.0, 0.5);
        let err = ErrorSignals::from_parts(1.0, 0.25, 0.0);
        let cfg = test_cfg(1.0, 2);
        let (bank, flags) = update_premise(&state, &err, 1.0, &cfg, 0.01);
        assert!((bank.input1[0].lower_center - 1.0025).abs() < 1e-15);
        assert_ne!(flags & clamp_flags::SIGMA_DEN_LOWER_1, 0);
        assert_ne!(flags & clamp_flags::SIGMA_DEN_UPPER_1, 0);
    }

    #[test]
    fn premise_sigma_floor_engages() {
        // large alpha with positive sign drives the Euler step below zero
        let state = singleton_state(0.0, 1.0, 1.0, 1000.0, 0.5);
        let err = ErrorSignals::from_parts(1.0, 0.0, 0.0);
        let cfg = SmlcConfig {
            chi: 1e-300,
            ..test_cfg(1.0, 2)
        };
        let (bank, flags) = update_premise(&state, &err, 1.0, &cfg, 0.01);
        assert_eq!(bank.input1[0].lower_sigma, SIGMA_FLOOR);
        assert_ne!(flags & clamp_flags::SIGMA_LIMIT, 0);
    }

    fn uniform_fs(k: usize) -> FiringStrengths {
        FiringStrengths {
            lower: vec![1.0; k],
            upper: vec![1.0; k],
            lower_normalized: vec![1.0 / k as f64; k],
            upper_normalized: vec![1.0 / k as f64; k],
        }
    }

    #[test]
    fn consequents_uniform_strengths_hand_value() {
        // q=1 and nine uniform strengths: each f_dot = alpha*sgn exactly
        let mut state = singleton_state(0.0, 1.0, 1.0, 2.0, 1.0);
        state.cons.f = vec![0.0; 9];
        let fs = uniform_fs(9);
        let cfg = SmlcConfig {
            chi: 1e-300,
            ..test_cfg(1.0, 2)
        };
        let (f, clamped) = update_consequents(&state, &fs, 1.0, &cfg, 0.01);
        assert!(!clamped);
        for v in f {
            assert!((v - 0.01 * 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn consequents_frozen_at_zero_surface() {
        let mut state = singleton_state(0.0, 1.0, 1.0, 2.0, 0.5);
        state.cons.f = vec![0.7; 9];
        let fs = uniform_fs(9);
        let (f, _) = update_consequents(&state, &fs, 0.0, &test_cfg(1.0, 2), 0.01);
        assert_eq!(f, vec![0.7; 9]);
    }

    #[test]
    fn consequents_weighted_rate_identity() {
        // sum(combo_i * f_dot_i) = alpha*sgn exactly when unclamped: the
        // update direction is the combo vector over its own squared norm.
        let mut state = singleton_state(0.0, 1.0, 1.0, 1.7, 0.3);
        state.cons.f = vec![0.1, -0.4, 0.2, 0.0, 0.9, -0.3, 0.5, 0.05, -0.15];
        let lower_n = vec![0.30, 0.05, 0.10, 0.15, 0.02, 0.08, 0.12, 0.08, 0.10];
        let upper_n = vec![0.10, 0.10, 0.20, 0.05, 0.15, 0.10, 0.10, 0.10, 0.10];
        let fs = FiringStrengths {
            lower: lower_n.clone(),
            upper: upper_n.clone(),
            lower_normalized: lower_n.clone(),
            upper_normalized: upper_n.clone(),
        };
        let cfg = test_cfg(1.0, 2);
        let dt = 0.01;
        let s = 0.8;
        let (f_next, clamped) = update_consequents(&state, &fs, s, &cfg, dt);
        assert!(!clamped);
        let q = state.cons.q;
        let rate: f64 = f_next
            .iter()
            .zip(&state.cons.f)
            .zip(lower_n.iter().zip(&upper_n))
            .map(|((fn_, f0), (lo, up))| (q * lo + (1.0 - q) * up) * (fn_ - f0) / dt)
            .sum();
        let expect = state.alpha * smoothed_sign(s, cfg.chi);
        assert!((rate - expect).abs() < 1e-12);
    }

    #[test]
    fn q_update_clamps_on_identical_strength_vectors() {
        let mut state = singleton_state(0.0, 1.0, 1.0, 1.0, 0.5);
        state.cons.f = vec![1.0; 9];
        let fs = uniform_fs(9);
        let cfg = SmlcConfig {
            chi: 1e-300,
            ..test_cfg(1.0, 2)
        };
        let (q, clamped) = update_q(&state, &fs, 1.0, &cfg, 0.01);
        assert!(clamped);
        // denominator forced to +0.001: q_dot = alpha/0.001
        assert!((q - (0.5 + 0.01 * 1.0 / 0.001)).abs() < 1e-9);
    }

    #[test]
    fn q_update_hand_value() {
        // F=[1,2], W_lower-W_upper=[0.25,-0.25] -> denominator -0.25,
        // q_dot = -4, q' = q - 0.04
        let mf = Type2MembershipFunction {
            lower_center: 0.0,
            upper_center: 0.0,
            lower_sigma: 1.0,
            upper_sigma: 1.0,
        };
        let bank = MfBank {
            input1: vec![mf, mf],
            input2: vec![mf],
        };
        let mut state = ControllerState::new(bank, 1.0, 1.0, 0.5);
        state.cons.f = vec![1.0, 2.0];
        let fs = FiringStrengths {
            lower: vec![0.5, 0.5],
            upper: vec![0.25, 0.75],
            lower_normalized: vec![0.5, 0.5],
            upper_normalized: vec![0.25, 0.75],
        };
        let cfg = SmlcConfig {
            chi: 1e-300,
            ..test_cfg(1.0, 2)
        };
        let (q, clamped) = update_q(&state, &fs, 1.0, &cfg, 0.01);
        assert!(!clamped);
        assert!((q - 0.46).abs() < 1e-12);
    }

    #[test]
    fn q_frozen_at_zero_surface() {
        let mut state = singleton_state(0.0, 1.0, 1.0, 1.0, 0.5);
        state.cons.f = vec![1.0; 9];
        let fs = uniform_fs(9);
        let (q, _) = update_q(&state, &fs, 0.0, &test_cfg(1.0, 2), 0.01);
        assert_eq!(q, 0.5);
    }

    #[test]
    fn control_step_zero_network_zero_surface() {
        let bank = MfBank::symmetric(1.0, 3);
        let mut state = ControllerState::new(bank, 1.0, 1.0, 0.5);
        let err = ErrorSignals::from_parts(0.0, 0.0, 0.0);
        let out = control_step(&mut state, &err, &test_cfg(1.0, 3), 0.01).unwrap();
        assert_eq!(out.u, 0.0);
        assert_eq!(out.u_c, 0.0);
        assert_eq!(out.u_n, 0.0);
        assert!(out.dead_zone);
    }

    #[test]
    fn control_step_gain_and_rate_increase_outside_dead_zone() {
        let bank = MfBank::symmetric(1.0, 3);
        let mut state = ControllerState::new(bank, 1.0, 3.0, 0.5);
        let err = ErrorSignals::from_parts(0.4, 0.1, 0.0);
        let (k0, a0) = (state.k, state.alpha);
        let out = control_step(&mut state, &err, &test_cfg(1.0, 3), 0.01).unwrap();
        assert!(!out.dead_zone);
        assert!(state.k > k0);
        assert!(state.alpha > a0);
    }

    #[test]
    fn control_step_normalization_residuals_tiny() {
        let bank = MfBank::symmetric(1.0, 3);
        let mut state = ControllerState::new(bank, 1.0, 3.0, 0.5);
        let err = ErrorSignals::from_parts(0.9, -0.4, 0.2);
        let out = control_step(&mut state, &err, &test_cfg(1.0, 3), 0.01).unwrap();
        assert!(out.norm_residual_lower < 1e-12);
        assert!(out.norm_residual_upper < 1e-12);
    }
}
