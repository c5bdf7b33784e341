//! Single-particle energy levels of the flux-threaded ring and their
//! quadratic/linear coefficient reductions.
//!
//! Every partition engine consumes the levels through
//! [`SpectrumCoefficients`], which stores the quadratic form describing one
//! regime: `sqrt(quadratic*n^2 + linear*n + constant)` relativistically,
//! `quadratic*n^2 + linear*n + constant` non-relativistically. The
//! strong-field engines drop the quadratic term.

use thiserror::Error;

/// Flux ratio below which the strong-field linearization is not trusted;
/// results produced by the linearized engines below this are flagged.
pub const STRONG_FIELD_MIN_FLUX_RATIO: f64 = 50.0;

#[derive(Debug, Error, PartialEq)]
pub enum SpectrumError {
    #[error("invalid ring parameter: {0}")]
    InvalidParameter(String),
    /// The ensemble convention admits only negatively charged fermions.
    #[error("ensemble coefficients require a negatively charged fermion (s = -1)")]
    PositiveChargeEnsemble,
}

/// Sign of the fermion charge. The flux couples through `n - s*phi`, so the
/// sign decides which direction of circulation the flux favors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChargeSign {
    Positive,
    Negative,
}

impl ChargeSign {
    /// `s` as a signed unit value.
    pub fn value(self) -> f64 {
        match self {
            ChargeSign::Positive => 1.0,
            ChargeSign::Negative => -1.0,
        }
    }
}

/// Which dispersion the quantities describe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Relativistic,
    NonRelativistic,
}

impl Regime {
    pub fn token(self) -> &'static str {
        match self {
            Regime::Relativistic => "relativistic",
            Regime::NonRelativistic => "nonrelativistic",
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.token())
    }
}

impl std::str::FromStr for Regime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "relativistic" => Ok(Regime::Relativistic),
            "nonrelativistic" => Ok(Regime::NonRelativistic),
            other => Err(format!(
                "unknown regime '{other}'; expected relativistic|nonrelativistic"
            )),
        }
    }
}

/// Coefficient fidelity for the relativistic quadratic form.
///
/// The closed forms were published with a linear coefficient missing its
/// cross-term factor 2 and with the rest mass fixed to 1 in the constant
/// term. `Paper` reproduces those printed values verbatim so the published
/// curves can be regenerated; `Derived` restores algebraic consistency with
/// the spectrum and is the default everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fidelity {
    Paper,
    #[default]
    Derived,
}

impl Fidelity {
    pub fn token(self) -> &'static str {
        match self {
            Fidelity::Paper => "paper",
            Fidelity::Derived => "derived",
        }
    }
}

impl std::fmt::Display for Fidelity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.token())
    }
}

impl std::str::FromStr for Fidelity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper" => Ok(Fidelity::Paper),
            "derived" => Ok(Fidelity::Derived),
            other => Err(format!(
                "unknown fidelity '{other}'; expected paper|derived"
            )),
        }
    }
}

/// Physical configuration of the ring and its ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingParams {
    /// Rest mass `m` (natural units).
    pub mass: f64,
    /// Ring radius `a` (inverse energy units).
    pub radius: f64,
    /// Dimensionless flux ratio `phi` (applied flux over the flux quantum).
    pub flux_ratio: f64,
    pub charge_sign: ChargeSign,
    /// Number of non-interacting fermions in the ensemble.
    pub particle_count: u32,
}

impl RingParams {
    pub fn new(
        mass: f64,
        radius: f64,
        flux_ratio: f64,
        charge_sign: ChargeSign,
        particle_count: u32,
    ) -> Result<Self, SpectrumError> {
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(SpectrumError::InvalidParameter(format!(
                "mass must be > 0 (got {mass})"
            )));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(SpectrumError::InvalidParameter(format!(
                "radius must be > 0 (got {radius})"
            )));
        }
        if !(flux_ratio >= 0.0) || !flux_ratio.is_finite() {
            return Err(SpectrumError::InvalidParameter(format!(
                "flux_ratio must be >= 0 (got {flux_ratio})"
            )));
        }
        if particle_count < 1 {
            return Err(SpectrumError::InvalidParameter(
                "particle_count must be >= 1 (got 0)".to_string(),
            ));
        }
        Ok(Self {
            mass,
            radius,
            flux_ratio,
            charge_sign,
            particle_count,
        })
    }

    /// Flux-shifted angular wavenumber `(n - s*phi)/a` of level `n`.
    fn shifted_wavenumber(&self, n: i64) -> f64 {
        (n as f64 - self.charge_sign.value() * self.flux_ratio) / self.radius
    }
}

/// Positive-branch relativistic level energy
/// `E_n = sqrt(m^2 + ((n - s*phi)/a)^2)`.
///
/// `hypot` keeps the result exact at the band minimum and never below `m`.
pub fn relativistic_energy(params: &RingParams, n: i64) -> f64 {
    params.mass.hypot(params.shifted_wavenumber(n))
}

/// `E_n - m`, evaluated as `k^2 / (E_n + m)` so the low-lying levels keep
/// full precision even when `m` dwarfs the kinetic part. Direct subtraction
/// of `relativistic_energy - m` loses everything below the rounding of the
/// square root.
pub fn relativistic_kinetic_energy(params: &RingParams, n: i64) -> f64 {
    let k = params.shifted_wavenumber(n);
    k * k / (relativistic_energy(params, n) + params.mass)
}

/// Non-relativistic level energy `eps_n = (n - s*phi)^2 / (2 m a^2)`.
pub fn nonrelativistic_energy(params: &RingParams, n: i64) -> f64 {
    let k = params.shifted_wavenumber(n);
    k * k / (2.0 * params.mass)
}

/// The quadratic-form reduction of one regime's spectrum.
///
/// Relativistic: `E_n = sqrt(quadratic*n^2 + linear*n + constant)`.
/// Non-relativistic: `eps_n = quadratic*n^2 + linear*n + constant`.
/// The strong-field engines use only `linear` and `constant`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumCoefficients {
    pub quadratic: f64,
    pub linear: f64,
    pub constant: f64,
    pub variant: Regime,
    pub fidelity: Fidelity,
    /// Flux ratio the coefficients were built from; drives validity flags.
    pub flux_ratio: f64,
}

impl SpectrumCoefficients {
    /// Full quadratic-form level energy at `n >= 0`.
    pub fn level(&self, n: u64) -> f64 {
        let n = n as f64;
        let q = self.quadratic * n * n + self.linear * n + self.constant;
        match self.variant {
            Regime::Relativistic => q.sqrt(),
            Regime::NonRelativistic => q,
        }
    }

    /// Strong-field (linearized) level energy at `n >= 0`.
    pub fn linearized_level(&self, n: u64) -> f64 {
        let n = n as f64;
        let l = self.linear * n + self.constant;
        match self.variant {
            Regime::Relativistic => l.sqrt(),
            Regime::NonRelativistic => l,
        }
    }

    /// Relative gap between the linearized and the full level at `n`;
    /// grows monotonically with `n`, which is what limits the strong-field
    /// engines to thermally small `n`.
    pub fn linearization_relative_gap(&self, n: u64) -> f64 {
        let full = self.level(n);
        (self.linearized_level(n) - full).abs() / full
    }

    /// Whether the flux is strong enough for the linearized engines.
    pub fn strong_field(&self) -> bool {
        self.flux_ratio >= STRONG_FIELD_MIN_FLUX_RATIO
    }
}

/// Relativistic quadratic-form coefficients.
///
/// `Fidelity::Paper` returns the published values
/// `(1/a^2, phi/a^2, 1 + (phi/a)^2)`; `Fidelity::Derived` returns
/// `(1/a^2, 2*phi/a^2, m^2 + (phi/a)^2)`, which reproduces
/// [`relativistic_energy`] exactly for every level.
pub fn relativistic_coefficients(
    params: &RingParams,
    fidelity: Fidelity,
) -> Result<SpectrumCoefficients, SpectrumError> {
    if params.charge_sign == ChargeSign::Positive {
        return Err(SpectrumError::PositiveChargeEnsemble);
    }
    let inv_a2 = 1.0 / (params.radius * params.radius);
    let phi = params.flux_ratio;
    let phi_over_a = phi / params.radius;
    let (linear, constant) = match fidelity {
        Fidelity::Paper => (inv_a2 * phi, 1.0 + phi_over_a * phi_over_a),
        Fidelity::Derived => (
            2.0 * phi * inv_a2,
            params.mass * params.mass + phi_over_a * phi_over_a,
        ),
    };
    Ok(SpectrumCoefficients {
        quadratic: inv_a2,
        linear,
        constant,
        variant: Regime::Relativistic,
        fidelity,
        flux_ratio: phi,
    })
}

/// Non-relativistic coefficients: linear part `phi/(m a^2)`, constant part
/// `phi^2/(2 m a^2)`. The stored quadratic part `1/(2 m a^2)` completes the
/// full parabola, so `level` reproduces [`nonrelativistic_energy`] exactly.
pub fn nonrelativistic_coefficients(
    params: &RingParams,
) -> Result<SpectrumCoefficients, SpectrumError> {
    if params.charge_sign == ChargeSign::Positive {
        return Err(SpectrumError::PositiveChargeEnsemble);
    }
    let half_inv_ma2 = 1.0 / (2.0 * params.mass * params.radius * params.radius);
    let phi = params.flux_ratio;
    Ok(SpectrumCoefficients {
        quadratic: half_inv_ma2,
        linear: 2.0 * phi * half_inv_ma2,
        constant: phi * phi * half_inv_ma2,
        variant: Regime::NonRelativistic,
        fidelity: Fidelity::Derived,
        flux_ratio: phi,
    })
}
