//! Discretization coefficient sequences for the Riesz fractional derivative.
//!
//! Three second-order schemes are supported, all producing a sequence
//! s_0, s_1, s_2, ... for a fractional order gamma in (1,2) such that the
//! derivative stencil at grid point i is -(1/h^gamma) * sum_k s_{|i-k|} u_k.
//! Every sequence satisfies the same four structural properties (checked by
//! [`validate_properties`]):
//!
//! 1. decay: |s_k| (1+k)^{1+gamma} stays bounded,
//! 2. signs: s_0 > 0 and s_k <= 0 for k >= 1,
//! 3. weighted partial sums (m+1)^gamma (s_0 + 2 sum_{k<m} s_k) stay
//!    positive and bounded away from zero,
//! 4. the tail is non-decreasing: s_k <= s_{k+1} for k >= 1.
//!
//! These properties are what make the generated Toeplitz matrices positive
//! definite and the tau preconditioner provably effective.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::transforms::ToeplitzSymbol;

/// Which finite-difference scheme generates the coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Fractional centered difference: s_0 = Gamma(g+1)/Gamma(g/2+1)^2 with
    /// the one-term recurrence s_{k+1} = (1 - (g+1)/(g/2+k+1)) s_k.
    CenteredDifference,
    /// Shifted Grunwald-Letterman weights symmetrized for the Riesz form.
    ShiftedGrunwald,
    /// Weighted finite difference built from cubic-spline interpolation.
    CubicSpline,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [
        Scheme::CenteredDifference,
        Scheme::ShiftedGrunwald,
        Scheme::CubicSpline,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::CenteredDifference => "centered-difference",
            Scheme::ShiftedGrunwald => "shifted-grunwald",
            Scheme::CubicSpline => "cubic-spline",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "centered-difference" | "centered" => Ok(Scheme::CenteredDifference),
            "shifted-grunwald" | "grunwald" => Ok(Scheme::ShiftedGrunwald),
            "cubic-spline" | "spline" => Ok(Scheme::CubicSpline),
            other => Err(Error::domain(format!("unknown scheme `{other}`"))),
        }
    }
}

/// A prefix s_0..s_{K-1} of the coefficient sequence for one scheme and one
/// fractional order. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSequence {
    scheme: Scheme,
    gamma: f64,
    values: Vec<f64>,
}

impl CoefficientSequence {
    /// Wraps raw values. Used by tests to build counterexample sequences; the
    /// scheme constructors are the normal entry points.
    pub fn from_values(scheme: Scheme, gamma: f64, values: Vec<f64>) -> Result<Self> {
        check_order(gamma)?;
        if values.is_empty() {
            return Err(Error::domain("coefficient sequence must be non-empty"));
        }
        Ok(Self {
            scheme,
            gamma,
            values,
        })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// First column of the symmetric Toeplitz matrix generated by this
    /// sequence (truncated or full prefix).
    pub fn to_symbol(&self) -> ToeplitzSymbol {
        ToeplitzSymbol::new(self.values.clone()).expect("sequence is non-empty")
    }

    /// Finite-prefix proxy for the decay norm sup_k |s_k| (1+k)^{1+gamma}.
    pub fn decay_norm(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(k, s)| s.abs() * (1.0 + k as f64).powf(1.0 + self.gamma))
            .fold(0.0, f64::max)
    }
}

fn check_order(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma > 1.0 && gamma < 2.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "fractional order must lie strictly inside (1, 2), got {gamma}"
        )))
    }
}

fn check_count(count: usize) -> Result<()> {
    if count == 0 {
        Err(Error::domain("coefficient count must be at least 1"))
    } else {
        Ok(())
    }
}

// Lanczos approximation, g = 7, 9 terms. Relative error is well below 1e-13
// over the argument range used here (all arguments are O(10)).
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function for positive real arguments.
pub fn gamma_function(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::domain(format!(
            "gamma function requires a positive finite argument, got {x}"
        )));
    }
    // For x < 0.5 lift into the well-conditioned Lanczos range via
    // Gamma(x) = Gamma(x+1)/x.
    if x < 0.5 {
        return Ok(lanczos(x + 1.0) / x);
    }
    Ok(lanczos(x))
}

fn lanczos(x: f64) -> f64 {
    let z = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    (2.0 * std::f64::consts::PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * acc
}

/// Coefficients of the fractional centered-difference scheme, computed by the
/// one-term recurrence (O(count), no gamma evaluations past s_0).
pub fn centered_difference_coeffs(gamma: f64, count: usize) -> Result<CoefficientSequence> {
    check_order(gamma)?;
    check_count(count)?;
    let mut values = Vec::with_capacity(count);
    let s0 = gamma_function(gamma + 1.0)? / gamma_function(gamma / 2.0 + 1.0)?.powi(2);
    values.push(s0);
    for k in 0..count - 1 {
        let factor = 1.0 - (gamma + 1.0) / (gamma / 2.0 + k as f64 + 1.0);
        let prev = values[k];
        values.push(factor * prev);
    }
    CoefficientSequence::from_values(Scheme::CenteredDifference, gamma, values)
}

/// Coefficients of the shifted Grunwald scheme. The underlying one-sided
/// weights g_k are generated once by their recurrence and then combined.
pub fn shifted_grunwald_coeffs(gamma: f64, count: usize) -> Result<CoefficientSequence> {
    check_order(gamma)?;
    check_count(count)?;
    let q = -1.0 / (2.0 * (gamma * std::f64::consts::PI / 2.0).cos());
    debug_assert!(q > 0.0);
    // g_0..g_count
    let mut g = Vec::with_capacity(count + 1);
    g.push(-1.0f64);
    for k in 0..count {
        let factor = 1.0 - (gamma + 1.0) / (k as f64 + 1.0);
        let prev = g[k];
        g.push(factor * prev);
    }
    let mut values = Vec::with_capacity(count);
    values.push(q * 2.0 * g[1]);
    if count > 1 {
        values.push(q * (g[0] + g[2]));
    }
    for k in 2..count {
        values.push(q * g[k + 1]);
    }
    CoefficientSequence::from_values(Scheme::ShiftedGrunwald, gamma, values)
}

/// Coefficients of the cubic-spline weighted scheme.
pub fn cubic_spline_coeffs(gamma: f64, count: usize) -> Result<CoefficientSequence> {
    check_order(gamma)?;
    check_count(count)?;
    let nu = -1.0
        / (2.0 * (gamma * std::f64::consts::PI / 2.0).cos() * gamma_function(4.0 - gamma)?);
    debug_assert!(nu > 0.0);
    let e = 3.0 - gamma;
    // For k >= 3 the weight is minus the central fourth difference of x^e at
    // x = k-1. The alternating five-term form cancels catastrophically once
    // k^e dwarfs the result, so the tail is evaluated through the operator
    // expansion delta^4 = D^4 + D^6/6 + D^8/80 + (17/30240) D^10 + ...
    // applied to x^e, which is accurate wherever the direct form is not.
    let c4 = e * (e - 1.0) * (e - 2.0) * (e - 3.0);
    let c6 = c4 * (e - 4.0) * (e - 5.0);
    let c8 = c6 * (e - 6.0) * (e - 7.0);
    let c10 = c8 * (e - 8.0) * (e - 9.0);
    let p = |k: usize| -> f64 {
        match k {
            0 => -1.0,
            1 => 4.0 - 2f64.powf(e),
            2 => -3f64.powf(e) + 4.0 * 2f64.powf(e) - 6.0,
            k if k < 16 => {
                let k = k as f64;
                -(k + 1.0).powf(e) + 4.0 * k.powf(e) - 6.0 * (k - 1.0).powf(e)
                    + 4.0 * (k - 2.0).powf(e)
                    - (k - 3.0).powf(e)
            }
            k => {
                let x = k as f64 - 1.0;
                let x2 = x * x;
                -(x.powf(e - 4.0)
                    * (c4 + (c6 / 6.0 + (c8 / 80.0 + c10 * (17.0 / 30240.0) / x2) / x2) / x2))
            }
        }
    };
    let mut values = Vec::with_capacity(count);
    values.push(nu * 2.0 * p(1));
    if count > 1 {
        values.push(nu * (p(0) + p(2)));
    }
    for k in 2..count {
        values.push(nu * p(k + 1));
    }
    CoefficientSequence::from_values(Scheme::CubicSpline, gamma, values)
}

/// Dispatches to the scheme-specific constructor.
pub fn coeffs(scheme: Scheme, gamma: f64, count: usize) -> Result<CoefficientSequence> {
    match scheme {
        Scheme::CenteredDifference => centered_difference_coeffs(gamma, count),
        Scheme::ShiftedGrunwald => shifted_grunwald_coeffs(gamma, count),
        Scheme::CubicSpline => cubic_spline_coeffs(gamma, count),
    }
}

/// Outcome of one structural property check over the available prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PropertyCheck {
    pub passed: bool,
    /// Index of the first violation, if any.
    pub first_violation: Option<usize>,
}

impl PropertyCheck {
    fn pass() -> Self {
        PropertyCheck {
            passed: true,
            first_violation: None,
        }
    }

    fn fail_at(k: usize) -> Self {
        PropertyCheck {
            passed: false,
            first_violation: Some(k),
        }
    }
}

/// Per-property report for one coefficient prefix.
#[derive(Debug, Clone, Serialize)]
pub struct PropertyReport {
    /// Boundedness of |s_k| (1+k)^{1+gamma} over the prefix.
    pub decay: PropertyCheck,
    /// The realized bound sup_{k<K} |s_k| (1+k)^{1+gamma}.
    pub decay_bound: f64,
    /// s_0 > 0 and s_k <= 0 for k >= 1.
    pub signs: PropertyCheck,
    /// (m+1)^gamma (s_0 + 2 sum_{k=1}^{m-1} s_k) > 0 for every m <= K.
    pub weighted_partial_sums: PropertyCheck,
    /// Minimum of the weighted partial sums over the prefix.
    pub min_weighted_partial_sum: f64,
    /// s_k <= s_{k+1} for k >= 1.
    pub tail_monotone: PropertyCheck,
}

impl PropertyReport {
    pub fn all_passed(&self) -> bool {
        self.decay.passed
            && self.signs.passed
            && self.weighted_partial_sums.passed
            && self.tail_monotone.passed
    }
}

/// Checks the four structural properties on the available prefix and reports
/// each outcome with the first counterexample index. Never fails: a malformed
/// sequence produces a failing report, not an error.
pub fn validate_properties(seq: &CoefficientSequence) -> PropertyReport {
    let s = seq.values();
    let gamma = seq.gamma();

    let mut decay = PropertyCheck::pass();
    let mut decay_bound = 0.0f64;
    for (k, v) in s.iter().enumerate() {
        let weighted = v.abs() * (1.0 + k as f64).powf(1.0 + gamma);
        if !weighted.is_finite() {
            decay = PropertyCheck::fail_at(k);
            break;
        }
        decay_bound = decay_bound.max(weighted);
    }

    let mut signs = if s[0] > 0.0 {
        PropertyCheck::pass()
    } else {
        PropertyCheck::fail_at(0)
    };
    if signs.passed {
        if let Some(k) = (1..s.len()).find(|&k| s[k] > 0.0) {
            signs = PropertyCheck::fail_at(k);
        }
    }

    // sigma_m = s_0 + 2 sum_{k=1}^{m-1} s_k, weighted by (m+1)^gamma.
    let mut partial = PropertyCheck::pass();
    let mut min_weighted = f64::INFINITY;
    let mut sigma = s[0];
    for m in 1..=s.len() {
        let weighted = ((m + 1) as f64).powf(gamma) * sigma;
        min_weighted = min_weighted.min(weighted);
        if weighted <= 0.0 && partial.passed {
            partial = PropertyCheck::fail_at(m);
        }
        if m < s.len() {
            sigma += 2.0 * s[m];
        }
    }

    let mut tail = PropertyCheck::pass();
    if let Some(k) = (1..s.len().saturating_sub(1)).find(|&k| s[k] > s[k + 1]) {
        tail = PropertyCheck::fail_at(k);
    }

    PropertyReport {
        decay,
        decay_bound,
        signs,
        weighted_partial_sums: partial,
        min_weighted_partial_sum: min_weighted,
        tail_monotone: tail,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // Reference values computed with a 50-digit arbitrary-precision gamma
    // (mpmath), rounded to 22 significant digits.
    const GAMMA_ORACLE: [(f64, f64); 10] = [
        (0.1, 9.513_507_698_668_732),
        (0.5, 1.772_453_850_905_516),
        (1.1, 0.951_350_769_866_873_2),
        (1.5, 0.886_226_925_452_758),
        (1.75, 0.919_062_526_848_883_2),
        (1.9, 0.961_765_831_907_387_4),
        (2.5, 1.329_340_388_179_137),
        (3.7, 4.170_651_783_796_603),
        (10.0, 362880.0),
        (20.25, 2.560_401_333_284_764_8e17),
    ];

    #[test]
    fn gamma_matches_high_precision_oracle() {
        for &(x, expected) in &GAMMA_ORACLE {
            let got = gamma_function(x).unwrap();
            assert_relative_eq!(got, expected, max_relative = 1e-13);
        }
    }

    #[test]
    fn gamma_integer_values() {
        assert_relative_eq!(gamma_function(1.0).unwrap(), 1.0, max_relative = 1e-14);
        assert_relative_eq!(gamma_function(3.0).unwrap(), 2.0, max_relative = 1e-14);
        assert_relative_eq!(gamma_function(7.0).unwrap(), 720.0, max_relative = 1e-13);
    }

    #[test]
    fn gamma_rejects_bad_arguments() {
        assert!(gamma_function(0.0).is_err());
        assert!(gamma_function(-1.5).is_err());
        assert!(gamma_function(f64::NAN).is_err());
        assert!(gamma_function(f64::INFINITY).is_err());
    }

    #[test]
    fn centered_difference_leading_values() {
        // s_0 at gamma = 1.5 is Gamma(2.5)/Gamma(1.75)^2; oracle value from
        // the same 50-digit computation as above.
        let seq = centered_difference_coeffs(1.5, 2).unwrap();
        assert_relative_eq!(seq.values()[0], 1.573_787_465_354_795, max_relative = 1e-13);
        // s_1 = -gamma/(gamma+2) * s_0
        assert_relative_eq!(
            seq.values()[1],
            -(1.5 / 3.5) * seq.values()[0],
            max_relative = 1e-14
        );
    }

    #[test]
    fn centered_difference_classical_limit() {
        // As gamma -> 2 the recurrence reproduces the classical [2, -1, 0]
        // second-difference stencil; gamma = 2 itself is rejected.
        let seq = centered_difference_coeffs(2.0 - 1e-12, 3).unwrap();
        assert_relative_eq!(seq.values()[0], 2.0, max_relative = 1e-9);
        assert_relative_eq!(seq.values()[1], -1.0, max_relative = 1e-9);
        assert!(seq.values()[2].abs() < 1e-9);
        assert!(centered_difference_coeffs(2.0, 3).is_err());
        assert!(centered_difference_coeffs(1.0, 3).is_err());
    }

    #[test]
    fn centered_difference_matches_gamma_ratio_oracle() {
        // Direct per-term evaluation s_k = (-1)^k G(g+1)/(G(g/2-k+1) G(g/2+k+1))
        // requires gamma at negative arguments; the oracle extends the
        // library gamma by the reflection formula.
        fn gamma_any(x: f64) -> f64 {
            if x > 0.0 {
                gamma_function(x).unwrap()
            } else {
                std::f64::consts::PI
                    / ((std::f64::consts::PI * x).sin() * gamma_function(1.0 - x).unwrap())
            }
        }
        for &gamma in &[1.2, 1.5, 1.8] {
            let seq = centered_difference_coeffs(gamma, 51).unwrap();
            for k in 0..=50 {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                let expected = sign * gamma_any(gamma + 1.0)
                    / (gamma_any(gamma / 2.0 - k as f64 + 1.0)
                        * gamma_any(gamma / 2.0 + k as f64 + 1.0));
                assert_relative_eq!(seq.values()[k], expected, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn shifted_grunwald_leading_value() {
        // s_0 = q * 2 g_1 with g_1 = gamma, so at gamma = 1.5:
        // s_0 = 3 / (-2 cos(0.75 pi)) = 3/sqrt(2).
        let seq = shifted_grunwald_coeffs(1.5, 1).unwrap();
        assert_relative_eq!(
            seq.values()[0],
            2.121_320_343_559_642_4,
            max_relative = 1e-14
        );
        for &gamma in &[1.05, 1.4, 1.95] {
            assert!(shifted_grunwald_coeffs(gamma, 1).unwrap().values()[0] > 0.0);
        }
    }

    #[test]
    fn shifted_grunwald_partial_sums_positive() {
        // The full sum telescopes to zero, so every truncation is positive.
        let seq = shifted_grunwald_coeffs(1.5, 1000).unwrap();
        let s = seq.values();
        let partial = s[0] + 2.0 * s[1..].iter().sum::<f64>();
        assert!(partial > 0.0, "partial sum {partial} should be positive");
    }

    #[test]
    fn cubic_spline_leading_values() {
        let gamma = 1.5f64;
        let seq = cubic_spline_coeffs(gamma, 2).unwrap();
        let nu = -1.0
            / (2.0 * (gamma * std::f64::consts::PI / 2.0).cos()
                * gamma_function(4.0 - gamma).unwrap());
        let e = 3.0 - gamma;
        let expected_s1 = nu * (-3f64.powf(e) + 4.0 * 2f64.powf(e) - 7.0);
        assert_relative_eq!(seq.values()[1], expected_s1, max_relative = 1e-13);
        assert!(seq.values()[1] < 0.0);
        // s_0 = 2 nu (4 - 2^{3-gamma}) > 0 for any order in (1,2)
        for &g in &[1.1, 1.5, 1.9] {
            let s0 = cubic_spline_coeffs(g, 1).unwrap().values()[0];
            assert!(s0 > 0.0);
        }
    }

    #[test]
    fn cubic_spline_properties_hold() {
        let seq = cubic_spline_coeffs(1.7, 500).unwrap();
        let report = validate_properties(&seq);
        assert!(report.all_passed(), "{report:?}");
    }

    #[test]
    fn cubic_spline_series_agrees_with_direct_form_at_crossover() {
        // Around the series switch the direct five-term form is still
        // accurate enough to cross-validate the expansion.
        for &gamma in &[1.1, 1.5, 1.9] {
            let e = 3.0 - gamma;
            let seq = cubic_spline_coeffs(gamma, 80).unwrap();
            let nu = -1.0
                / (2.0 * (gamma * std::f64::consts::PI / 2.0).cos()
                    * gamma_function(4.0 - gamma).unwrap());
            for k in 16..60usize {
                let kk = (k + 1) as f64; // s_k uses p_{k+1}
                let direct = nu
                    * (-(kk + 1.0).powf(e) + 4.0 * kk.powf(e) - 6.0 * (kk - 1.0).powf(e)
                        + 4.0 * (kk - 2.0).powf(e)
                        - (kk - 3.0).powf(e));
                assert_relative_eq!(seq.values()[k], direct, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn validate_flags_constructed_counterexamples() {
        let bad_sign =
            CoefficientSequence::from_values(Scheme::CenteredDifference, 1.5, vec![1.0, 0.1])
                .unwrap();
        let report = validate_properties(&bad_sign);
        assert!(!report.signs.passed);
        assert_eq!(report.signs.first_violation, Some(1));

        let bad_monotone = CoefficientSequence::from_values(
            Scheme::CenteredDifference,
            1.5,
            vec![1.0, -0.3, -0.5],
        )
        .unwrap();
        let report = validate_properties(&bad_monotone);
        assert!(!report.tail_monotone.passed);
        assert_eq!(report.tail_monotone.first_violation, Some(1));
    }

    #[test]
    fn property_suite_full_prefix() {
        for scheme in Scheme::ALL {
            for &gamma in &[1.1, 1.3, 1.5, 1.7, 1.9] {
                let seq = coeffs(scheme, gamma, 4096).unwrap();
                let report = validate_properties(&seq);
                assert!(
                    report.all_passed(),
                    "{scheme} gamma={gamma}: {report:?}"
                );
            }
        }
    }

    #[test]
    fn weighted_partial_sum_infimum_proxy() {
        // The weighted partial sums must not collapse toward zero: the
        // minimum over the prefix stays above half the value at m = 64.
        for scheme in Scheme::ALL {
            for &gamma in &[1.1, 1.5, 1.9] {
                let seq = coeffs(scheme, gamma, 4096).unwrap();
                let s = seq.values();
                let weighted = |m: usize| {
                    let sigma: f64 = s[0] + 2.0 * s[1..m].iter().sum::<f64>();
                    ((m + 1) as f64).powf(gamma) * sigma
                };
                let min = (1..=4096).map(weighted).fold(f64::INFINITY, f64::min);
                assert!(min > 0.0);
                assert!(
                    min >= 0.5 * weighted(64),
                    "{scheme} gamma={gamma}: min {min} vs m=64 value {}",
                    weighted(64)
                );
            }
        }
    }

    #[test]
    fn scheme_round_trips_through_strings() {
        for scheme in Scheme::ALL {
            assert_eq!(scheme.name().parse::<Scheme>().unwrap(), scheme);
        }
        assert!("nope".parse::<Scheme>().is_err());
    }
}
