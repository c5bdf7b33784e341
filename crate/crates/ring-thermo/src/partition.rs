//! Single-particle partition function `Z1` by four strategies, plus the
//! `N`-particle reduction `ln Z_N = N ln Z1`.
//!
//! The direct truncated sum is the ground truth; the other three evaluate
//! closed or series forms of the strong-field (linearized) level model.
//! Everything is carried in log space internally — the high-temperature
//! forms behave like `2/(B beta^2)` and explode as `beta -> 0` — and the
//! linear `value` is materialized from `log_value` on construction.

use crate::spectrum::{Regime, SpectrumCoefficients};
use thiserror::Error;

/// Partition evaluation strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Exact truncated summation of Boltzmann factors over `n >= 0`.
    DirectSum,
    /// Integral plus boundary-derivative corrections of the linearized
    /// relativistic levels, truncated at a chosen power of `beta`.
    EulerMaclaurin,
    /// Small-`beta` closed form of the relativistic strong-field model.
    /// Note: this form drops the `exp(-beta sqrt(C))` prefactor that the
    /// order expansion keeps, so the two differ by exactly that factor.
    HighTClosed,
    /// Exact geometric summation of the linearized non-relativistic levels.
    GeometricClosed,
}

impl Method {
    pub fn token(self) -> &'static str {
        match self {
            Method::DirectSum => "direct",
            Method::EulerMaclaurin => "em",
            Method::HighTClosed => "high-t",
            Method::GeometricClosed => "geometric",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.token())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "direct" => Ok(Method::DirectSum),
            "em" => Ok(Method::EulerMaclaurin),
            "high-t" => Ok(Method::HighTClosed),
            "geometric" => Ok(Method::GeometricClosed),
            other => Err(format!(
                "unknown method '{other}'; expected direct|em|high-t|geometric"
            )),
        }
    }
}

/// Knobs for the summation engines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummationConfig {
    pub method: Method,
    /// Direct sum stops once a term falls below this fraction of the
    /// running sum (and the terms are decreasing).
    pub tail_tolerance: f64,
    /// Hard cap on summed terms; hitting it before the tolerance is a
    /// [`PartitionError::NonConvergence`].
    pub max_terms: u64,
    /// Highest power of `beta` kept in the boundary corrections (0..=2).
    pub em_beta_order: u8,
}

impl Default for SummationConfig {
    fn default() -> Self {
        Self {
            method: Method::DirectSum,
            tail_tolerance: 1e-14,
            max_terms: 10_000_000,
            em_beta_order: 2,
        }
    }
}

impl SummationConfig {
    fn validate(&self) -> Result<(), PartitionError> {
        if !(self.tail_tolerance > 0.0 && self.tail_tolerance < 1.0) {
            return Err(PartitionError::InvalidConfig(format!(
                "tail_tolerance must lie in (0, 1) (got {})",
                self.tail_tolerance
            )));
        }
        if self.max_terms < 1 {
            return Err(PartitionError::InvalidConfig(
                "max_terms must be >= 1 (got 0)".to_string(),
            ));
        }
        if self.em_beta_order > 2 {
            return Err(PartitionError::UnsupportedOrder(self.em_beta_order));
        }
        Ok(())
    }
}

/// One `Z1` evaluation with its truncation/validity metadata.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionResult {
    /// Linear value, materialized as `exp(log_value)`; underflows to zero
    /// once `log_value` drops below roughly -745.
    pub value: f64,
    pub log_value: f64,
    pub method: Method,
    /// Terms actually summed (direct sum only).
    pub terms_used: Option<u64>,
    /// Geometric-majorant bound on the dropped tail, in the same units as
    /// `value` (direct sum only).
    pub tail_estimate: Option<f64>,
    /// Whether the strong-field preconditions held for this evaluation.
    pub validity: bool,
}

impl PartitionResult {
    fn from_log(log_value: f64, method: Method, validity: bool) -> Self {
        Self {
            value: log_value.exp(),
            log_value,
            method,
            terms_used: None,
            tail_estimate: None,
            validity,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PartitionError {
    #[error("inverse temperature must be positive and finite (got {0})")]
    InvalidBeta(f64),
    /// The term cap was reached before the tail tolerance was met. The
    /// partial sum accumulated so far is carried along for diagnostics.
    #[error("direct sum hit the cap of {max_terms} terms before reaching the tail tolerance")]
    NonConvergence {
        max_terms: u64,
        partial: PartitionResult,
    },
    /// Zero linear coefficient (flux ratio 0): every strong-field closed
    /// form degenerates, the linearized series has no decay in `n`.
    #[error("strong-field form degenerates: linear level coefficient must be > 0")]
    DegenerateField,
    #[error("boundary-correction order {0} not supported (the expansion stops at beta^2)")]
    UnsupportedOrder(u8),
    #[error("invalid summation config: {0}")]
    InvalidConfig(String),
    #[error("method expects the {expected:?} spectrum variant (got {found:?})")]
    RegimeMismatch { expected: Regime, found: Regime },
}

/// Truncated direct summation `sum_{n>=0} exp(-beta * E_n)`.
///
/// Terms are scaled by the first one so the accumulator stays O(1), summed
/// with Kahan compensation, and the loop stops once a term falls below
/// `tail_tolerance` times the running sum with the last two terms
/// decreasing. The dropped remainder is bounded by a geometric majorant
/// built from the last two term ratios.
pub fn z1_direct<F>(
    level_energy: F,
    beta: f64,
    config: &SummationConfig,
) -> Result<PartitionResult, PartitionError>
where
    F: Fn(u64) -> f64,
{
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(PartitionError::InvalidBeta(beta));
    }
    config.validate()?;

    let e0 = level_energy(0);
    let mut sum = 1.0_f64; // scaled first term
    let mut compensation = 0.0_f64;
    let mut terms: u64 = 1;
    let mut prev = 1.0_f64;
    let mut prev2 = f64::INFINITY;
    let mut tail_scaled: Option<f64> = None;

    while terms < config.max_terms {
        let term = (-beta * (level_energy(terms) - e0)).exp();
        let y = term - compensation;
        let t = sum + y;
        compensation = (t - sum) - y;
        sum = t;
        terms += 1;

        if term == 0.0 {
            tail_scaled = Some(0.0);
            break;
        }
        if term < config.tail_tolerance * sum && term < prev && prev < prev2 {
            // Majorant ratio from the last two steps, kept away from 1.
            let ratio = (term / prev).max(prev / prev2).min(1.0 - 1e-12);
            tail_scaled = Some(term * ratio / (1.0 - ratio));
            break;
        }
        prev2 = prev;
        prev = term;
    }

    let scale = (-beta * e0).exp();
    let result = PartitionResult {
        value: (-beta * e0 + sum.ln()).exp(),
        log_value: -beta * e0 + sum.ln(),
        method: Method::DirectSum,
        terms_used: Some(terms),
        tail_estimate: tail_scaled.map(|t| t * scale),
        validity: true,
    };
    match tail_scaled {
        Some(_) => Ok(result),
        None => Err(PartitionError::NonConvergence {
            max_terms: config.max_terms,
            partial: result,
        }),
    }
}

/// Closed-form value of `int_0^inf exp(-beta sqrt(B x + C)) dx`:
/// `(2/(B beta^2)) (1 + beta sqrt(C)) exp(-beta sqrt(C))`.
pub fn z1_integral(beta: f64, coeffs: &SpectrumCoefficients) -> Result<f64, PartitionError> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(PartitionError::InvalidBeta(beta));
    }
    if coeffs.variant != Regime::Relativistic {
        return Err(PartitionError::RegimeMismatch {
            expected: Regime::Relativistic,
            found: coeffs.variant,
        });
    }
    if coeffs.linear <= 0.0 || coeffs.constant <= 0.0 {
        return Err(PartitionError::DegenerateField);
    }
    let sc = coeffs.constant.sqrt();
    Ok((2.0 / (coeffs.linear * beta * beta)) * (1.0 + beta * sc) * (-beta * sc).exp())
}

fn require_relativistic(coeffs: &SpectrumCoefficients) -> Result<(f64, f64, f64), PartitionError> {
    if coeffs.variant != Regime::Relativistic {
        return Err(PartitionError::RegimeMismatch {
            expected: Regime::Relativistic,
            found: coeffs.variant,
        });
    }
    if coeffs.linear <= 0.0 || coeffs.constant <= 0.0 {
        return Err(PartitionError::DegenerateField);
    }
    Ok((coeffs.quadratic, coeffs.linear, coeffs.constant))
}

/// Boundary-corrected integral approximation of the linearized series
/// `sum_n exp(-beta sqrt(B n + C))`:
///
/// ```text
/// Z1 ~ e^{-beta sqrt(C)} [ 2/(B beta^2) (1 + beta sqrt(C))
///                          + 1/2
///                          + (B/(24 sqrt(C)) - B^3/(720 sqrt(C^5))) beta
///                          + (1/90)(A/(2C) - B^2/(8 C^2)) beta^2 ]
/// ```
///
/// truncated at `config.em_beta_order` (order 0 keeps the integral and the
/// half boundary term, order 1 adds the `beta` row, order 2 the `beta^2`
/// row). The derivative corrections are the analytic boundary derivatives
/// of the linearized integrand, not numerical ones.
pub fn z1_euler_maclaurin(
    beta: f64,
    coeffs: &SpectrumCoefficients,
    config: &SummationConfig,
) -> Result<PartitionResult, PartitionError> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(PartitionError::InvalidBeta(beta));
    }
    config.validate()?;
    let (a, b, c) = require_relativistic(coeffs)?;
    let sc = c.sqrt();

    let mut bracket = (2.0 / (b * beta * beta)) * (1.0 + beta * sc) + 0.5;
    if config.em_beta_order >= 1 {
        bracket += (b / (24.0 * sc) - b.powi(3) / (720.0 * c * c * sc)) * beta;
    }
    if config.em_beta_order >= 2 {
        bracket += (a / (2.0 * c) - b * b / (8.0 * c * c)) * beta * beta / 90.0;
    }

    let log_value = -beta * sc + bracket.ln();
    Ok(PartitionResult::from_log(
        log_value,
        Method::EulerMaclaurin,
        coeffs.strong_field(),
    ))
}

/// Log of the small-`beta` closed form `(2/(B beta^2)) (1 + beta sqrt(C))`.
pub fn z1_high_t_log(beta: f64, coeffs: &SpectrumCoefficients) -> Result<f64, PartitionError> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(PartitionError::InvalidBeta(beta));
    }
    let (_, b, c) = require_relativistic(coeffs)?;
    Ok((2.0 / (b * beta * beta)).ln() + (beta * c.sqrt()).ln_1p())
}

/// Small-`beta` closed form of the relativistic strong-field model. The
/// `exp(-beta sqrt(C))` prefactor of the order expansion is absent here by
/// construction; the two engines differ by exactly that factor.
pub fn z1_high_t(beta: f64, coeffs: &SpectrumCoefficients) -> Result<f64, PartitionError> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(PartitionError::InvalidBeta(beta));
    }
    let (_, b, c) = require_relativistic(coeffs)?;
    Ok((2.0 / (b * beta * beta)) * (1.0 + beta * c.sqrt()))
}

fn require_nonrelativistic(
    coeffs: &SpectrumCoefficients,
) -> Result<(f64, f64), PartitionError> {
    if coeffs.variant != Regime::NonRelativistic {
        return Err(PartitionError::RegimeMismatch {
            expected: Regime::NonRelativistic,
            found: coeffs.variant,
        });
    }
    if coeffs.linear <= 0.0 {
        return Err(PartitionError::DegenerateField);
    }
    Ok((coeffs.linear, coeffs.constant))
}

/// Log of the exact geometric sum of the linearized non-relativistic
/// levels: `ln Z1 = -beta C - ln(1 - exp(-beta B))`, with the `expm1`
/// rearrangement keeping small `beta * B` accurate.
pub fn z1_geometric_closed_log(
    beta: f64,
    coeffs: &SpectrumCoefficients,
) -> Result<f64, PartitionError> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(PartitionError::InvalidBeta(beta));
    }
    let (b, c) = require_nonrelativistic(coeffs)?;
    Ok(-beta * c - (-(-beta * b).exp_m1()).ln())
}

/// Exact geometric sum `exp(-beta C) / (1 - exp(-beta B))` of the
/// linearized non-relativistic levels `B n + C`.
pub fn z1_geometric_closed(
    beta: f64,
    coeffs: &SpectrumCoefficients,
) -> Result<f64, PartitionError> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(PartitionError::InvalidBeta(beta));
    }
    let (b, c) = require_nonrelativistic(coeffs)?;
    Ok((-beta * c).exp() / -(-beta * b).exp_m1())
}

/// `ln Z_N = N ln Z1` for `N` non-interacting indistinguishable fermions.
/// The published reduction carries no `1/N!` factor and no exclusion
/// statistics; this follows it verbatim. Log space keeps large `N` finite.
pub fn zn_log(z1: &PartitionResult, n_particles: u32) -> f64 {
    f64::from(n_particles) * z1.log_value
}

const EM_DERIVATIVE_WEIGHTS: [f64; 2] = [-1.0 / 12.0, 1.0 / 720.0];

/// Boundary-derivative weights of the summation formula: `-1/12` on the
/// first derivative, `+1/720` on the third. Orders beyond the second are
/// deliberately unsupported; the expansion here stops at `beta^2`.
pub fn bernoulli_weights(order: u8) -> Result<&'static [f64], PartitionError> {
    match order {
        1 => Ok(&EM_DERIVATIVE_WEIGHTS[..1]),
        2 => Ok(&EM_DERIVATIVE_WEIGHTS[..]),
        other => Err(PartitionError::UnsupportedOrder(other)),
    }
}

/// Route one evaluation to the requested engine.
///
/// Zero flux degenerates every strong-field engine, so those requests fall
/// back to the exact direct sum of the full levels with the validity flag
/// cleared; the result's `method` field records what actually ran.
pub fn z1_for_method(
    method: Method,
    beta: f64,
    coeffs: &SpectrumCoefficients,
    config: &SummationConfig,
) -> Result<PartitionResult, PartitionError> {
    if method != Method::DirectSum && coeffs.linear == 0.0 {
        let mut result = z1_direct(|n| coeffs.level(n), beta, config)?;
        result.validity = false;
        return Ok(result);
    }
    match method {
        Method::DirectSum => z1_direct(|n| coeffs.level(n), beta, config),
        Method::EulerMaclaurin => z1_euler_maclaurin(beta, coeffs, config),
        Method::HighTClosed => Ok(PartitionResult::from_log(
            z1_high_t_log(beta, coeffs)?,
            Method::HighTClosed,
            coeffs.strong_field(),
        )),
        Method::GeometricClosed => Ok(PartitionResult::from_log(
            z1_geometric_closed_log(beta, coeffs)?,
            Method::GeometricClosed,
            coeffs.strong_field(),
        )),
    }
}
