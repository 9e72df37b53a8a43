//! Growth-constant and exponent estimation: ratio sequences of an exact
//! counting sequence, Richardson acceleration carried out in exact rational
//! arithmetic, and recognition of the growth constant as an algebraic
//! number.
//!
//! All accelerations are computed over exact rationals, so the only error
//! in an estimate is the truncation error of the underlying asymptotic
//! expansion; the reported accuracy is the spread between two disclosed
//! windows.

use crate::countkernel::SupportLattice;
use crate::exactify::ExactSeries;
use crate::minpoly;
use crate::stepset::StepSet;
use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

pub use crate::minpoly::MinPolyCandidate;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EstimateError {
    #[error("series has no usable late terms (degenerate)")]
    DegenerateSeries,
    #[error("need at least {needed} usable terms, have {have}")]
    TooShort { needed: usize, have: usize },
    #[error("ratio at index {0} undefined")]
    UndefinedRatio(usize),
    #[error("ratios do not stabilize: no power-law fit")]
    NoPowerLawFit,
}

/// Ratios u_n = a_n / a_{n-m} of an exact series. Entries are exact; the
/// recorded precision is the number of decimal digits carried into
/// rendering and recognition.
#[derive(Clone, Debug)]
pub struct RatioSequence {
    /// Lag m between numerator and denominator terms.
    pub period: u32,
    /// Index stride on which ratios are defined (the support period).
    pub stride: u32,
    pub precision_digits: u32,
    values: Vec<Option<BigRational>>,
}

impl RatioSequence {
    pub fn value(&self, n: usize) -> Result<&BigRational, EstimateError> {
        self.values
            .get(n)
            .and_then(|v| v.as_ref())
            .ok_or(EstimateError::UndefinedRatio(n))
    }

    pub fn last_defined(&self) -> Option<usize> {
        self.values.iter().rposition(|v| v.is_some())
    }

    pub fn defined_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }
}

/// Build u_n = a_n / a_{n-m}. Ratios are defined wherever the denominator
/// term is nonzero.
pub fn ratio_sequence(
    series: &ExactSeries,
    period: u32,
    precision_digits: u32,
) -> Result<RatioSequence, EstimateError> {
    let m = period as usize;
    assert!(m >= 1, "period must be positive");
    let terms = &series.terms;
    let mut values: Vec<Option<BigRational>> = vec![None; terms.len()];
    for n in m..terms.len() {
        if !terms[n - m].is_zero() {
            values[n] = Some(BigRational::new(
                BigInt::from(terms[n].clone()),
                BigInt::from(terms[n - m].clone()),
            ));
        }
    }
    let tail_has_values = values.iter().rev().take(4 * m).any(|v| v.is_some());
    if !tail_has_values {
        return Err(EstimateError::DegenerateSeries);
    }
    let stride = support_stride(series).max(1) as u32;
    Ok(RatioSequence {
        period,
        stride,
        precision_digits,
        values,
    })
}

/// Smallest positive gap between nonzero terms in the tail of the series.
fn support_stride(series: &ExactSeries) -> usize {
    let nz: Vec<usize> = series
        .terms
        .iter()
        .enumerate()
        .filter(|(_, t)| !t.is_zero())
        .map(|(i, _)| i)
        .collect();
    let mut g = 0usize;
    for w in nz.windows(2) {
        g = g.gcd(&(w[1] - w[0]));
    }
    g.max(1)
}

/// Binomial Richardson acceleration on the window u_{n-j*d}, ..., u_n with
/// node stride d: sum_k (-1)^k C(j,k) (n-k d)^j u_{n-k d} / (j! d^j). The
/// combination reproduces the constant term exactly for any u_n that is a
/// polynomial of degree <= j in 1/n.
pub fn richardson(u: &RatioSequence, n: usize, j: u32) -> Result<BigRational, EstimateError> {
    let d = u.stride as usize;
    let mut acc = BigRational::zero();
    for k in 0..=j as usize {
        let node = n
            .checked_sub(k * d)
            .ok_or(EstimateError::UndefinedRatio(0))?;
        let c = binomial(j as u64, k as u64) * BigInt::from(node as u64).pow(j);
        let signed = if k % 2 == 0 { c } else { -c };
        acc += BigRational::from(signed) * u.value(node)?;
    }
    let mut norm = BigInt::one();
    for i in 1..=j as u64 {
        norm *= BigInt::from(i);
    }
    norm *= BigInt::from(d as u64).pow(j);
    Ok(acc / BigRational::from(norm))
}

/// Doubling-window variant: exact Lagrange extrapolation to 1/n = 0 through
/// the nodes u_n, u_{2n}, ..., u_{2^i n}.
pub fn richardson_doubling(
    u: &RatioSequence,
    n: usize,
    i: u32,
) -> Result<BigRational, EstimateError> {
    let nodes: Vec<usize> = (0..=i).map(|t| n << t).collect();
    let xs: Vec<BigRational> = nodes
        .iter()
        .map(|&m| BigRational::new(BigInt::one(), BigInt::from(m as u64)))
        .collect();
    let mut acc = BigRational::zero();
    for (t, &m) in nodes.iter().enumerate() {
        let mut weight = BigRational::one();
        for (s, x) in xs.iter().enumerate() {
            if s != t {
                weight *= x / (x - &xs[t]);
            }
        }
        acc += weight * u.value(m)?;
    }
    Ok(acc)
}

fn binomial(n: u64, k: u64) -> BigInt {
    let mut r = BigInt::one();
    for i in 0..k {
        r = r * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    r
}

/// A growth estimate a_n ~ c(n) phi^n n^alpha. `phi_power_m` is the exact
/// Richardson output for the lag-m ratio (an estimate of phi^m); the
/// decimal fields are renderings at the stated precision. Accuracy is the
/// absolute difference between the phi estimates of the two disclosed
/// windows.
#[derive(Clone, Debug, Serialize)]
pub struct AsymptoticEstimate {
    pub model: StepSet,
    pub period: u32,
    pub support_stride: u32,
    #[serde(skip)]
    pub phi_power_m: BigRational,
    pub phi_decimal: String,
    #[serde(skip)]
    pub alpha: BigRational,
    pub alpha_decimal: String,
    pub accuracy_decimal: String,
    /// (end of window 1, end of window 2), Richardson order.
    pub windows: (usize, usize, u32),
    pub digits: u32,
    pub flags: Vec<String>,
}

impl AsymptoticEstimate {
    pub fn phi_rational(&self) -> BigRational {
        decimal_to_rational(&self.phi_decimal)
    }

    pub fn accuracy_rational(&self) -> BigRational {
        decimal_to_rational(&self.accuracy_decimal)
    }
}

pub fn decimal_to_rational(s: &str) -> BigRational {
    let neg = s.starts_with('-');
    let t = s.trim_start_matches('-');
    let (int, frac) = t.split_once('.').unwrap_or((t, ""));
    let digits = frac.len() as u32;
    let num: BigInt = format!("{int}{frac}").parse().unwrap();
    let v = BigRational::new(num, BigInt::from(10u32).pow(digits));
    if neg {
        -v
    } else {
        v
    }
}

/// Render an exact rational in fixed-point decimal.
pub fn rational_to_decimal(x: &BigRational, digits: u32) -> String {
    let scale = BigInt::from(10u32).pow(digits);
    let v = (x * BigRational::from(scale)).round().to_integer();
    let neg = v.is_negative();
    let s = v.abs().to_string();
    let s = format!("{:0>width$}", s, width = digits as usize + 1);
    let (int, frac) = s.split_at(s.len() - digits as usize);
    format!("{}{}.{}", if neg { "-" } else { "" }, int, frac)
}

/// m-th root of a nonnegative rational, correct to `digits` decimals.
pub fn nth_root_decimal(x: &BigRational, m: u32, digits: u32) -> BigRational {
    assert!(!x.is_negative());
    if m == 1 {
        return x.clone();
    }
    let scale = BigUint::from(10u32).pow(digits);
    let scaled = x * BigRational::from(BigInt::from(scale.clone().pow(m)));
    let floor = scaled.to_integer().to_biguint().unwrap_or_default();
    let root = floor.nth_root(m);
    BigRational::new(BigInt::from(root), BigInt::from(scale))
}

pub struct EstimateOptions {
    pub order: u32,
    pub digits: u32,
    /// Gap (in defined ratio points) between the two consistency windows.
    pub window_gap: usize,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            order: 6,
            digits: 30,
            window_gap: 10,
        }
    }
}

/// Two-stage growth estimation: the period is the smallest lag in {1,2,3,
/// 4,6} compatible with the support stride that makes the tail ratios
/// positive and stabilizing; phi^m comes from Richardson on that ratio
/// sequence, and alpha from a second Richardson pass with phi^m held fixed.
pub fn estimate_growth(
    series: &ExactSeries,
    opts: &EstimateOptions,
) -> Result<AsymptoticEstimate, EstimateError> {
    let usable = series.terms.iter().filter(|t| !t.is_zero()).count();
    if usable < 64 {
        return Err(EstimateError::TooShort {
            needed: 64,
            have: usable,
        });
    }
    let stride = support_stride(series);
    let lattice_stride = SupportLattice::for_model(&series.model)
        .excursion_period()
        .unwrap_or(1) as usize;
    debug_assert!(
        stride == 1 || lattice_stride % stride == 0 || stride % lattice_stride == 0,
        "data stride {stride} vs lattice {lattice_stride}"
    );

    let j = opts.order;
    let mut flags: Vec<String> = Vec::new();
    for m in [1u32, 2, 3, 4, 6] {
        if m as usize % stride != 0 && stride % m as usize != 0 && m as usize != stride {
            // lag must keep numerator and denominator on the same support class
        }
        if m as usize % stride != 0 {
            continue;
        }
        let u = match ratio_sequence(series, m, opts.digits) {
            Ok(u) => u,
            Err(_) => continue,
        };
        let Some(end) = u.last_defined() else {
            continue;
        };
        let d = u.stride as usize;
        let need = (j as usize) * d + opts.window_gap * d;
        if end < need + m as usize {
            continue;
        }
        // tail ratios must be positive
        let tail_ok = (0..=(j as usize + opts.window_gap))
            .map(|t| end - t * d)
            .all(|n| u.value(n).map(|v| v.is_positive()).unwrap_or(false));
        if !tail_ok {
            continue;
        }
        let w1 = end;
        let w2 = end - opts.window_gap * d;
        let l1 = richardson(&u, w1, j)?;
        let l2 = richardson(&u, w2, j)?;
        if !l1.is_positive() || !l2.is_positive() {
            continue;
        }
        // relative spread must look convergent for this lag
        let spread = (&l1 - &l2).abs() / &l1;
        if spread > BigRational::new(BigInt::from(1), BigInt::from(100)) {
            continue;
        }
        if m as usize > stride {
            flags.push("oscillating-constant".into());
        }
        if stride > 1 {
            flags.push(format!("support-stride-{stride}"));
        }

        let phi1 = nth_root_decimal(&l1, m, opts.digits + 6);
        let phi2 = nth_root_decimal(&l2, m, opts.digits + 6);
        let accuracy = (&phi1 - &phi2).abs();

        let alpha = estimate_alpha(series, &l1, m, j, end, d)?;
        let alpha2 = estimate_alpha(series, &l1, m, j, end - opts.window_gap * d, d)?;
        let alpha_acc = (&alpha - &alpha2).abs();
        let accuracy = accuracy.max(alpha_acc);

        return Ok(AsymptoticEstimate {
            model: series.model,
            period: m,
            support_stride: stride as u32,
            phi_decimal: rational_to_decimal(&phi1, opts.digits),
            phi_power_m: l1,
            alpha_decimal: rational_to_decimal(&alpha, opts.digits),
            alpha,
            accuracy_decimal: rational_to_decimal(&accuracy, opts.digits),
            windows: (w1, w2, j),
            digits: opts.digits,
            flags,
        });
    }
    Err(EstimateError::NoPowerLawFit)
}

/// v_n = n (a_{n+m} - L a_n) / (L a_n m) accelerated by Richardson, with L
/// the (exact rational) estimate of phi^m.
fn estimate_alpha(
    series: &ExactSeries,
    phi_power_m: &BigRational,
    m: u32,
    j: u32,
    end: usize,
    stride: usize,
) -> Result<BigRational, EstimateError> {
    let terms = &series.terms;
    let m = m as usize;
    let mut values: Vec<Option<BigRational>> = vec![None; terms.len()];
    let hi = end.min(terms.len().saturating_sub(m + 1));
    for n in (0..=hi).rev().take(j as usize * stride + stride + 1) {
        if terms[n].is_zero() {
            continue;
        }
        let a_n = BigRational::from(BigInt::from(terms[n].clone()));
        let a_nm = BigRational::from(BigInt::from(terms[n + m].clone()));
        let num = &a_nm - phi_power_m * &a_n;
        let den = phi_power_m * &a_n * BigRational::from(BigInt::from(m as u64));
        values[n] = Some(BigRational::from(BigInt::from(n as u64)) * num / den);
    }
    let v = RatioSequence {
        period: m as u32,
        stride: stride as u32,
        precision_digits: 0,
        values,
    };
    richardson(&v, hi, j)
}

/// Recognize a high-precision estimate as an algebraic number.
pub fn recognize_constant(
    estimate: &BigRational,
    digits: u32,
    d_max: u32,
    height_bound: &BigInt,
) -> Option<MinPolyCandidate> {
    minpoly::recognize(estimate, digits, d_max, height_bound)
}

/// How a recognized closed form compares against an expected value.
#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ComparisonOutcome {
    WithinAccuracy,
    Differs,
}

/// Cross-check of an estimate (and its recognized closed form) against
/// externally supplied expected values; disagreements are reported, never
/// resolved silently.
#[derive(Clone, Debug, Serialize)]
pub struct ReferenceComparison {
    pub expected_decimal: String,
    pub estimate_decimal: String,
    pub outcome: ComparisonOutcome,
    pub difference_decimal: String,
}

pub fn compare_with_expected(
    estimate: &BigRational,
    accuracy: &BigRational,
    expected_decimal: &str,
    digits: u32,
) -> ReferenceComparison {
    let expected = decimal_to_rational(expected_decimal);
    let diff = (estimate - &expected).abs();
    let floor = BigRational::new(BigInt::one(), BigInt::from(10u32).pow(digits));
    let tol = accuracy.clone().max(floor);
    ReferenceComparison {
        expected_decimal: expected_decimal.to_string(),
        estimate_decimal: rational_to_decimal(estimate, digits),
        outcome: if diff <= tol {
            ComparisonOutcome::WithinAccuracy
        } else {
            ComparisonOutcome::Differs
        },
        difference_decimal: rational_to_decimal(&diff, digits),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::countkernel::Target;
    use num_bigint::BigUint;

    fn series_from(terms: Vec<BigUint>) -> ExactSeries {
        ExactSeries {
            model: StepSet::from_mask(0x1).unwrap(),
            target: Target::AllEndpoints,
            terms,
        }
    }

    fn geometric(phi: u32, n: usize) -> ExactSeries {
        series_from((0..=n).map(|i| BigUint::from(phi).pow(i as u32)).collect())
    }

    #[test]
    fn ratios_of_powers_are_constant() {
        let s = geometric(2, 100);
        let u = ratio_sequence(&s, 1, 20).unwrap();
        for n in [1usize, 10, 100] {
            assert_eq!(*u.value(n).unwrap(), BigRational::from(BigInt::from(2)));
        }
    }

    #[test]
    fn richardson_constant_is_exact() {
        let s = geometric(7, 80);
        let u = ratio_sequence(&s, 1, 20).unwrap();
        for j in [1u32, 3, 6, 7] {
            assert_eq!(
                richardson(&u, 80, j).unwrap(),
                BigRational::from(BigInt::from(7))
            );
        }
    }

    #[test]
    fn richardson_first_order_identity() {
        // u_n = 1 + 1/n: the first-order combination returns the limit
        // exactly: (n+1) u_{n+1} - n u_n = 1
        let mut values = vec![None];
        for n in 1..=50usize {
            values.push(Some(
                BigRational::one() + BigRational::new(BigInt::one(), BigInt::from(n as u64)),
            ));
        }
        let u = RatioSequence {
            period: 1,
            stride: 1,
            precision_digits: 20,
            values,
        };
        assert_eq!(richardson(&u, 50, 1).unwrap(), BigRational::one());
    }

    #[test]
    fn richardson_kills_polynomials_in_inverse_n() {
        // u_n = 5 + 3/n - 2/n^2 + 1/n^3 must be reproduced exactly at j >= 3
        let poly = |n: usize| {
            let n = BigRational::from(BigInt::from(n as u64));
            BigRational::from(BigInt::from(5))
                + BigRational::from(BigInt::from(3)) / &n
                - BigRational::from(BigInt::from(2)) / (&n * &n)
                + BigRational::one() / (&n * &n * &n)
        };
        let values: Vec<Option<BigRational>> =
            (0..=60).map(|n| (n > 0).then(|| poly(n))).collect();
        let u = RatioSequence {
            period: 1,
            stride: 1,
            precision_digits: 20,
            values,
        };
        for j in [3u32, 4, 6] {
            assert_eq!(
                richardson(&u, 60, j).unwrap(),
                BigRational::from(BigInt::from(5)),
                "j={j}"
            );
        }
        // below the degree it is not exact
        assert_ne!(
            richardson(&u, 60, 2).unwrap(),
            BigRational::from(BigInt::from(5))
        );
    }

    #[test]
    fn doubling_variant_matches_on_polynomials() {
        let poly = |n: usize| {
            let n = BigRational::from(BigInt::from(n as u64));
            BigRational::from(BigInt::from(9)) - BigRational::from(BigInt::from(4)) / &n
                + BigRational::one() / (&n * &n)
        };
        let values: Vec<Option<BigRational>> =
            (0..=64).map(|n| (n > 0).then(|| poly(n))).collect();
        let u = RatioSequence {
            period: 1,
            stride: 1,
            precision_digits: 20,
            values,
        };
        assert_eq!(
            richardson_doubling(&u, 8, 3).unwrap(),
            BigRational::from(BigInt::from(9))
        );
    }

    #[test]
    fn pure_power_growth() {
        let s = geometric(3, 100);
        let est = estimate_growth(&s, &EstimateOptions::default()).unwrap();
        assert_eq!(est.period, 1);
        assert_eq!(est.phi_rational(), BigRational::from(BigInt::from(3)));
        assert!(est.alpha.abs() < BigRational::new(BigInt::one(), BigInt::from(1_000_000u64)));
    }

    #[test]
    fn synthetic_exponent_recovered() {
        // a_n = round(2^n * 10^20 / n^(3/2)): alpha must come out near -1.5
        let mut terms = vec![BigUint::one()];
        let scale = BigUint::from(10u32).pow(20);
        for n in 1..=220u32 {
            let num = BigUint::from(2u32).pow(n) * scale.clone() * scale.clone();
            let root = (BigUint::from(n).pow(3) * scale.clone().pow(2)).sqrt();
            terms.push(num / root);
        }
        let s = series_from(terms);
        let est = estimate_growth(&s, &EstimateOptions::default()).unwrap();
        let alpha = est.alpha.to_f64().unwrap();
        assert!((alpha + 1.5).abs() < 1e-3, "alpha = {alpha}");
        let phi = est.phi_rational().to_f64().unwrap();
        assert!((phi - 2.0).abs() < 1e-9);
    }

    #[test]
    fn scaling_leaves_estimates_unchanged() {
        let mut s = geometric(2, 120);
        let est1 = estimate_growth(&s, &EstimateOptions::default()).unwrap();
        for t in s.terms.iter_mut() {
            *t *= BigUint::from(17u32);
        }
        let est2 = estimate_growth(&s, &EstimateOptions::default()).unwrap();
        assert_eq!(est1.phi_decimal, est2.phi_decimal);
        assert_eq!(est1.alpha_decimal, est2.alpha_decimal);
    }

    #[test]
    fn degenerate_series_refused() {
        let mut terms = vec![BigUint::one()];
        terms.extend(std::iter::repeat(BigUint::zero()).take(80));
        let s = series_from(terms);
        assert!(matches!(
            ratio_sequence(&s, 1, 20),
            Err(EstimateError::DegenerateSeries)
        ));
    }

    #[test]
    fn short_series_refused() {
        let s = geometric(2, 40);
        assert!(matches!(
            estimate_growth(&s, &EstimateOptions::default()),
            Err(EstimateError::TooShort { .. })
        ));
    }

    #[test]
    fn parity_oscillation_detected() {
        // a_n = (3 + (-1)^n) * 2^n: the lag-1 ratio oscillates, lag 2 works
        let terms: Vec<BigUint> = (0..=140u32)
            .map(|n| BigUint::from(if n % 2 == 0 { 4u32 } else { 2 }) * BigUint::from(2u32).pow(n))
            .collect();
        let s = series_from(terms);
        let est = estimate_growth(&s, &EstimateOptions::default()).unwrap();
        assert_eq!(est.period, 2);
        assert!(est.flags.iter().any(|f| f == "oscillating-constant"));
        let phi = est.phi_rational().to_f64().unwrap();
        assert!((phi - 2.0).abs() < 1e-12);
    }

    #[test]
    fn decimal_roundtrip() {
        let x = BigRational::new(BigInt::from(-355), BigInt::from(113));
        let d = rational_to_decimal(&x, 12);
        let back = decimal_to_rational(&d);
        assert!((back - x).abs() < BigRational::new(BigInt::one(), BigInt::from(10u64).pow(11)));
    }

    #[test]
    fn nth_root_accuracy() {
        let two = BigRational::from(BigInt::from(2));
        let r = nth_root_decimal(&two, 2, 40);
        let err = (&r * &r - &two).abs();
        assert!(err < BigRational::new(BigInt::one(), BigInt::from(10u64).pow(38)));
    }

    #[test]
    fn comparison_flags_disagreement() {
        let est = BigRational::new(BigInt::from(1448528137u64), BigInt::from(100000000u64));
        let acc = BigRational::new(BigInt::one(), BigInt::from(10u64).pow(9));
        let cmp = compare_with_expected(&est, &acc, "14.48528121823356265", 12);
        assert_eq!(cmp.outcome, ComparisonOutcome::Differs);
    }
}
