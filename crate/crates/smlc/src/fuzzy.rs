//! Interval type-2 TSK inference: Gaussian memberships, rule firing
//! strengths, normalization, and the q-weighted control output.
//!
//! Rules form the full grid over the two inputs (error, error rate).
//! All rule-indexed vectors share row-major ordering: input-1 index outer,
//! input-2 index inner.

use thiserror::Error;

/// Raw firing-strength sums at or below this are treated as numerically zero.
/// Gaussians are strictly positive analytically but underflow in f64 once the
/// inputs sit far outside every membership's support.
pub const FIRING_UNDERFLOW_FLOOR: f64 = 1e-300;

#[derive(Debug, Error, PartialEq)]
pub enum FuzzyError {
    #[error("membership sigma must be positive, got {0}")]
    InvalidSigma(f64),
    #[error("firing strengths underflowed (sum {0:e}); inputs far outside membership support")]
    DegenerateFiring(f64),
}

/// Paired lower/upper Gaussian membership for one input dimension.
///
/// The lower and upper parameters are independent: the update laws evolve
/// them separately and never enforce a containment ordering between them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Type2MembershipFunction {
    pub lower_center: f64,
    pub upper_center: f64,
    pub lower_sigma: f64,
    pub upper_sigma: f64,
}

/// Membership banks for the two controller inputs. Sizes are fixed for the
/// lifetime of a run; the rule count is `input1.len() * input2.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct MfBank {
    pub input1: Vec<Type2MembershipFunction>,
    pub input2: Vec<Type2MembershipFunction>,
}

impl MfBank {
    /// Symmetric initial layout: centers evenly spaced over `[-range, range]`
    /// with identical lower/upper centers, lower sigma at half the center
    /// spacing and upper sigma at the full spacing.
    pub fn symmetric(range: f64, per_input: usize) -> Self {
        assert!(
            per_input >= 2,
            "symmetric layout needs at least two memberships"
        );
        assert!(range > 0.0, "input range must be positive");
        let spacing = 2.0 * range / (per_input - 1) as f64;
        let mfs: Vec<Type2MembershipFunction> = (0..per_input)
            .map(|i| {
                let c = -range + spacing * i as f64;
                Type2MembershipFunction {
                    lower_center: c,
                    upper_center: c,
                    lower_sigma: 0.5 * spacing,
                    upper_sigma: spacing,
                }
            })
            .collect();
        MfBank {
            input1: mfs.clone(),
            input2: mfs,
        }
    }

    pub fn rule_count(&self) -> usize {
        self.input1.len() * self.input2.len()
    }
}

/// Crisp rule consequents `f` (row-major) and the mixing weight `q` that
/// blends the lower- and upper-normalized consequent sums.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsequentSet {
    pub f: Vec<f64>,
    pub q: f64,
}

/// Raw and normalized rule firing strengths for one inference call.
#[derive(Debug, Clone)]
pub struct FiringStrengths {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub lower_normalized: Vec<f64>,
    pub upper_normalized: Vec<f64>,
}

impl FiringStrengths {
    /// Evaluate raw firing strengths at `(e, e_dot)` and normalize both bounds.
    pub fn compute(e: f64, e_dot: f64, bank: &MfBank) -> Result<Self, FuzzyError> {
        let (lower, upper) = raw_firing_strengths(e, e_dot, bank)?;
        let lower_normalized = normalize(&lower)?;
        let upper_normalized = normalize(&upper)?;
        Ok(FiringStrengths {
            lower,
            upper,
            lower_normalized,
            upper_normalized,
        })
    }
}

/// Gaussian membership `exp(-((x - center)/sigma)^2)`; equals 1 iff `x == center`.
pub fn eval_gaussian(x: f64, center: f64, sigma: f64) -> Result<f64, FuzzyError> {
    if sigma <= 0.0 {
        return Err(FuzzyError::InvalidSigma(sigma));
    }
    let z = (x - center) / sigma;
    Ok((-z * z).exp())
}

/// Raw rule firing strengths: the product of the two input memberships,
/// separately for the lower and upper bounds. Row-major over the rule grid.
pub fn raw_firing_strengths(
    e: f64,
    e_dot: f64,
    bank: &MfBank,
) -> Result<(Vec<f64>, Vec<f64>), FuzzyError> {
    let k = bank.rule_count();
    let mut lower = Vec::with_capacity(k);
    let mut upper = Vec::with_capacity(k);
    for mf1 in &bank.input1 {
        let lo1 = eval_gaussian(e, mf1.lower_center, mf1.lower_sigma)?;
        let up1 = eval_gaussian(e, mf1.upper_center, mf1.upper_sigma)?;
        for mf2 in &bank.input2 {
            let lo2 = eval_gaussian(e_dot, mf2.lower_center, mf2.lower_sigma)?;
            let up2 = eval_gaussian(e_dot, mf2.upper_center, mf2.upper_sigma)?;
            lower.push(lo1 * lo2);
            upper.push(up1 * up2);
        }
    }
    Ok((lower, upper))
}

/// Divide each entry by the vector sum so the result sums to one.
pub fn normalize(raw: &[f64]) -> Result<Vec<f64>, FuzzyError> {
    let sum: f64 = raw.iter().sum();
    if !(sum > FIRING_UNDERFLOW_FLOOR) {
        return Err(FuzzyError::DegenerateFiring(sum));
    }
    Ok(raw.iter().map(|w| w / sum).collect())
}

/// Network output: `q`-weighted blend of the lower- and upper-normalized
/// consequent sums. With all consequents equal the output collapses to that
/// value for any `q`.
pub fn t2_output(fs: &FiringStrengths, cons: &ConsequentSet) -> f64 {
    let lower_sum: f64 = cons
        .f
        .iter()
        .zip(&fs.lower_normalized)
        .map(|(f, w)| f * w)
        .sum();
    let upper_sum: f64 = cons
        .f
        .iter()
        .zip(&fs.upper_normalized)
        .map(|(f, w)| f * w)
        .sum();
    cons.q * lower_sum + (1.0 - cons.q) * upper_sum
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mf(c: f64, sigma: f64) -> Type2MembershipFunction {
        Type2MembershipFunction {
            lower_center: c,
            upper_center: c,
            lower_sigma: sigma,
            upper_sigma: sigma,
        }
    }

    #[test]
    fn gaussian_peaks_at_center() {
        assert_eq!(eval_gaussian(2.0, 2.0, 0.7).unwrap(), 1.0);
    }

    #[test]
    fn gaussian_one_sigma_off_center() {
        let v = eval_gaussian(1.7, 1.0, 0.7).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert!((v - 0.367879441171).abs() < 1e-12);
    }

    #[test]
    fn gaussian_two_sigma_off_center() {
        let v = eval_gaussian(2.4, 1.0, 0.7).unwrap();
        assert!((v - (-4.0f64).exp()).abs() < 1e-15);
        assert!((v - 0.018315638889).abs() < 1e-12);
    }

    #[test]
    fn gaussian_rejects_nonpositive_sigma() {
        assert_eq!(
            eval_gaussian(0.0, 0.0, 0.0),
            Err(FuzzyError::InvalidSigma(0.0))
        );
        assert!(eval_gaussian(0.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn firing_peaks_when_both_inputs_on_centers() {
        let bank = MfBank {
            input1: vec![mf(-1.0, 0.5), mf(0.3, 0.5)],
            input2: vec![mf(0.8, 0.4)],
        };
        let (lower, _) = raw_firing_strengths(0.3, 0.8, &bank).unwrap();
        // rule (i=1, j=0) has both memberships at their centers
        assert_eq!(lower[1], 1.0);
    }

    #[test]
    fn firing_degenerate_single_rule_bank() {
        let bank = MfBank {
            input1: vec![mf(0.0, 1.0)],
            input2: vec![mf(0.0, 1.0)],
        };
        let (lower, upper) = raw_firing_strengths(0.5, -0.2, &bank).unwrap();
        let expected =
            eval_gaussian(0.5, 0.0, 1.0).unwrap() * eval_gaussian(-0.2, 0.0, 1.0).unwrap();
        assert_eq!(lower, vec![expected]);
        assert_eq!(upper, vec![expected]);
    }

    #[test]
    fn firing_hand_value() {
        // e = 0.5 against N(0, 1), e_dot = 0 on-center: exp(-0.25) * 1
        let bank = MfBank {
            input1: vec![mf(0.0, 1.0)],
            input2: vec![mf(0.0, 1.0)],
        };
        let (lower, _) = raw_firing_strengths(0.5, 0.0, &bank).unwrap();
        assert!((lower[0] - 0.778800783071).abs() < 1e-12);
    }

    #[test]
    fn normalize_equal_entries() {
        let out = normalize(&[2.0; 9]).unwrap();
        for w in out {
            assert!((w - 1.0 / 9.0).abs() < 1e-15);
        }
    }

    #[test]
    fn normalize_hand_value() {
        let out = normalize(&[1.0, 3.0]).unwrap();
        assert_eq!(out, vec![0.25, 0.75]);
    }

    #[test]
    fn normalize_underflow_is_degenerate() {
        let err = normalize(&[0.0, 0.0]).unwrap_err();
        assert!(matches!(err, FuzzyError::DegenerateFiring(_)));
    }

    fn fs_from(lower_n: Vec<f64>, upper_n: Vec<f64>) -> FiringStrengths {
        FiringStrengths {
            lower: lower_n.clone(),
            upper: upper_n.clone(),
            lower_normalized: lower_n,
            upper_normalized: upper_n,
        }
    }

    #[test]
    fn output_collapses_for_constant_consequents() {
        let fs = fs_from(vec![0.1, 0.2, 0.7], vec![0.5, 0.25, 0.25]);
        for q in [-0.5, 0.0, 0.3, 1.0, 2.0] {
            let cons = ConsequentSet { f: vec![5.0; 3], q };
            assert!((t2_output(&fs, &cons) - 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn output_q_one_uses_lower_sum_only() {
        let fs = fs_from(vec![0.25, 0.75], vec![0.5, 0.5]);
        let cons = ConsequentSet {
            f: vec![2.0, 4.0],
            q: 1.0,
        };
        assert_eq!(t2_output(&fs, &cons), 0.25 * 2.0 + 0.75 * 4.0);
    }

    #[test]
    fn output_hand_value() {
        let fs = fs_from(vec![0.5, 0.5], vec![0.25, 0.75]);
        let cons = ConsequentSet {
            f: vec![1.0, 2.0],
            q: 0.5,
        };
        assert!((t2_output(&fs, &cons) - 1.625).abs() < 1e-15);
    }

    #[test]
    fn normalized_strengths_sum_to_one_for_symmetric_bank() {
        let bank = MfBank::symmetric(1.0, 3);
        let fs = FiringStrengths::compute(0.37, -0.81, &bank).unwrap();
        let sl: f64 = fs.lower_normalized.iter().sum();
        let su: f64 = fs.upper_normalized.iter().sum();
        assert!((sl - 1.0).abs() < 1e-12);
        assert!((su - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_layout_matches_documented_shape() {
        let bank = MfBank::symmetric(2.0, 3);
        let centers: Vec<f64> = bank.input1.iter().map(|m| m.lower_center).collect();
        assert_eq!(centers, vec![-2.0, 0.0, 2.0]);
        assert_eq!(bank.input1[0].lower_sigma, 1.0);
        assert_eq!(bank.input1[0].upper_sigma, 2.0);
        assert_eq!(bank.rule_count(), 9);
    }
}
