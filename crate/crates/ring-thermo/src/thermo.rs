//! Helmholtz free energy, mean energy, entropy and heat capacity per
//! particle, from the closed forms of each regime or from guarded
//! finite-difference derivatives of any `ln Z` the partition engines
//! provide.
//!
//! All quantities are reported per particle (entropy and heat capacity per
//! particle and per `k_B`); the particle count enters `ln Z_N` only as a
//! multiplier and cancels out of every per-particle expression.

use crate::partition::PartitionError;
use crate::spectrum::{Fidelity, Regime, SpectrumCoefficients};
use thiserror::Error;

/// How a [`ThermoPoint`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThermoSource {
    ClosedForm,
    NumericDerivative,
}

/// Thermodynamic state functions at one temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermoPoint {
    /// Temperature in energy units (`tau = k_B T`).
    pub tau: f64,
    /// Helmholtz free energy per particle.
    pub f_per_n: f64,
    /// Mean energy per particle.
    pub u_per_n: f64,
    /// Entropy per particle per `k_B`.
    pub s_per_nk: f64,
    /// Heat capacity per particle per `k_B`.
    pub cv_per_nk: f64,
    pub regime: Regime,
    pub source: ThermoSource,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThermoError {
    #[error("strong-field closed form degenerates: linear coefficient must be > 0")]
    DegenerateField,
    /// The two stencil widths disagreed beyond tolerance, or a stencil
    /// point left the domain where `ln Z` is finite.
    #[error("derivative step unusable: {detail}")]
    StepTooLarge { detail: String },
    #[error(transparent)]
    Partition(#[from] PartitionError),
}

/// Default derivative step as a fraction of `beta`.
pub const DEFAULT_STEP_FACTOR: f64 = 1e-5;

/// Maximum allowed relative disagreement between the two stencil widths.
const RICHARDSON_TOLERANCE: f64 = 1e-3;

fn check_beta(beta: f64) -> Result<(), ThermoError> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(ThermoError::Partition(PartitionError::InvalidBeta(beta)));
    }
    Ok(())
}

/// Closed-form thermodynamics of the relativistic strong-field model, all
/// four functions derived from the small-`beta` partition form
/// `(2/(B beta^2))(1 + beta sqrt(C))`:
///
/// ```text
/// F/N  = -(1/beta) ln[(2/(B beta^2))(1 + x)]        with x = beta sqrt(C)
/// U/N  = (2 + x) / (beta (1 + x))
/// S/(N k_B)  = ln[(2/(B beta^2))(1 + x)] + (2 + x)/(1 + x)
/// Cv/(N k_B) = (2 + 4x + x^2) / (1 + x)^2
/// ```
pub fn thermo_rel_closed(
    beta: f64,
    coeffs: &SpectrumCoefficients,
) -> Result<ThermoPoint, ThermoError> {
    check_beta(beta)?;
    if coeffs.variant != Regime::Relativistic {
        return Err(ThermoError::Partition(PartitionError::RegimeMismatch {
            expected: Regime::Relativistic,
            found: coeffs.variant,
        }));
    }
    if coeffs.linear <= 0.0 || coeffs.constant <= 0.0 {
        return Err(ThermoError::DegenerateField);
    }
    let x = beta * coeffs.constant.sqrt();
    let ln_z1 = (2.0 / (coeffs.linear * beta * beta)).ln() + x.ln_1p();
    Ok(ThermoPoint {
        tau: 1.0 / beta,
        f_per_n: -ln_z1 / beta,
        u_per_n: (2.0 + x) / (beta * (1.0 + x)),
        s_per_nk: ln_z1 + (2.0 + x) / (1.0 + x),
        cv_per_nk: (2.0 + 4.0 * x + x * x) / ((1.0 + x) * (1.0 + x)),
        regime: Regime::Relativistic,
        source: ThermoSource::ClosedForm,
    })
}

/// Closed-form thermodynamics of the linearized non-relativistic model,
/// derived from the geometric partition sum. With `x = beta * B`:
///
/// ```text
/// U/N = C + B/(e^x - 1)
/// S/(N k_B)  = x/(e^x - 1) - ln(1 - e^{-x})
/// Cv/(N k_B) = x^2 e^{-x} / (1 - e^{-x})^2
/// ```
///
/// The free energy depends on the requested fidelity: `Derived` uses the
/// geometric sum's own log, `-(1/beta) ln[e^{-beta C}/(1 - e^{-beta B})]`;
/// `Paper` reproduces the published expression, which carries `C` instead
/// of `B` in the denominator exponent and therefore breaks the
/// `F = U - tau S` identity unless `B = C`.
pub fn thermo_nonrel_closed(
    beta: f64,
    coeffs: &SpectrumCoefficients,
    fidelity: Fidelity,
) -> Result<ThermoPoint, ThermoError> {
    check_beta(beta)?;
    if coeffs.variant != Regime::NonRelativistic {
        return Err(ThermoError::Partition(PartitionError::RegimeMismatch {
            expected: Regime::NonRelativistic,
            found: coeffs.variant,
        }));
    }
    if coeffs.linear <= 0.0 {
        return Err(ThermoError::DegenerateField);
    }
    let (b, c) = (coeffs.linear, coeffs.constant);
    let x = beta * b;
    let decay = (-x).exp();
    let denom = -(-x).exp_m1(); // 1 - e^{-x}, accurate at small x
    let ln_z1 = match fidelity {
        Fidelity::Derived => -beta * c - denom.ln(),
        Fidelity::Paper => -beta * c - (-(-beta * c).exp_m1()).ln(),
    };
    Ok(ThermoPoint {
        tau: 1.0 / beta,
        f_per_n: -ln_z1 / beta,
        u_per_n: c + b * decay / denom,
        s_per_nk: x * decay / denom - denom.ln(),
        cv_per_nk: x * x * decay / (denom * denom),
        regime: Regime::NonRelativistic,
        source: ThermoSource::ClosedForm,
    })
}

/// Thermodynamics from finite-difference derivatives of `ln Z_N`.
///
/// `U = -d(ln Z_N)/dbeta` and `Cv = k_B beta^2 d^2(ln Z_N)/dbeta^2` via
/// five-point central stencils evaluated at widths `step` and `step/2`; the
/// two estimates must agree to 1e-3 relative or the call fails, and the
/// finer pair is returned. `F = -(1/beta) ln Z_N` and `S = k_B beta (U - F)`.
///
/// `step` defaults to `beta * 1e-5`, which is plenty for `U`; callers that
/// need `Cv` beyond ~1e-5 relative should pass a coarser step (around
/// `beta * 1e-3`) because the second difference amplifies rounding of
/// `ln Z` by `1/step^2`.
pub fn thermo_numeric<F>(
    logz_n: F,
    beta: f64,
    step: Option<f64>,
    n_particles: u32,
    regime: Regime,
) -> Result<ThermoPoint, ThermoError>
where
    F: Fn(f64) -> Result<f64, PartitionError>,
{
    check_beta(beta)?;
    let h = step.unwrap_or(beta * DEFAULT_STEP_FACTOR);
    if !(h > 0.0) || !(h < beta / 2.0) {
        return Err(ThermoError::StepTooLarge {
            detail: format!("step must satisfy 0 < step < beta/2 (beta = {beta}, step = {h})"),
        });
    }

    let eval = |x: f64| -> Result<f64, ThermoError> {
        let v = logz_n(x)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ThermoError::StepTooLarge {
                detail: format!("log-partition is not finite at beta = {x}"),
            })
        }
    };

    let f_0 = eval(beta)?;
    let f_ph2 = eval(beta + 0.5 * h)?;
    let f_mh2 = eval(beta - 0.5 * h)?;
    let f_ph = eval(beta + h)?;
    let f_mh = eval(beta - h)?;
    let f_p2h = eval(beta + 2.0 * h)?;
    let f_m2h = eval(beta - 2.0 * h)?;

    let d1_h = (f_m2h - 8.0 * f_mh + 8.0 * f_ph - f_p2h) / (12.0 * h);
    let d1_h2 = (f_mh - 8.0 * f_mh2 + 8.0 * f_ph2 - f_ph) / (6.0 * h);
    let d2_h = (-f_m2h + 16.0 * f_mh - 30.0 * f_0 + 16.0 * f_ph - f_p2h) / (12.0 * h * h);
    let d2_h2 = (-f_mh + 16.0 * f_mh2 - 30.0 * f_0 + 16.0 * f_ph2 - f_ph) / (3.0 * h * h);

    // Disagreement between the two widths signals unresolved curvature.
    // Scales couple the first- and second-derivative magnitudes so a true
    // derivative near zero (for instance a frozen-out Cv) does not trip
    // the guard on rounding noise alone.
    let d1_scale = d1_h
        .abs()
        .max(d1_h2.abs())
        .max(f_0.abs() / beta)
        .max(f64::MIN_POSITIVE);
    if (d1_h - d1_h2).abs() > RICHARDSON_TOLERANCE * d1_scale {
        return Err(ThermoError::StepTooLarge {
            detail: format!(
                "first-derivative stencils disagree: {d1_h} vs {d1_h2} at step {h}"
            ),
        });
    }
    let d2_scale = d2_h.abs().max(d2_h2.abs()).max(d1_scale / beta);
    if (d2_h - d2_h2).abs() > RICHARDSON_TOLERANCE * d2_scale {
        return Err(ThermoError::StepTooLarge {
            detail: format!(
                "second-derivative stencils disagree: {d2_h} vs {d2_h2} at step {h}"
            ),
        });
    }

    let n = f64::from(n_particles.max(1));
    let u = -d1_h2 / n;
    let f = -f_0 / (beta * n);
    Ok(ThermoPoint {
        tau: 1.0 / beta,
        f_per_n: f,
        u_per_n: u,
        s_per_nk: beta * (u - f),
        cv_per_nk: beta * beta * d2_h2 / n,
        regime,
        source: ThermoSource::NumericDerivative,
    })
}

/// Saturation value of `Cv/(N k_B)` as `beta -> 0`: 2 for the relativistic
/// closed form, 1 for the non-relativistic one.
pub fn dulong_petit_limit(regime: Regime) -> f64 {
    match regime {
        Regime::Relativistic => 2.0,
        Regime::NonRelativistic => 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::{z1_geometric_closed_log, z1_high_t_log};
    use crate::spectrum::{
        nonrelativistic_coefficients, relativistic_coefficients, ChargeSign, RingParams,
        SpectrumCoefficients,
    };
    use proptest::prelude::*;

    fn rel_coeffs(phi: f64) -> SpectrumCoefficients {
        let p = RingParams::new(1.0, 1.0, phi, ChargeSign::Negative, 1).unwrap();
        relativistic_coefficients(&p, Fidelity::Derived).unwrap()
    }

    fn nonrel_coeffs(mass: f64, phi: f64) -> SpectrumCoefficients {
        let p = RingParams::new(mass, 1.0, phi, ChargeSign::Negative, 1).unwrap();
        nonrelativistic_coefficients(&p).unwrap()
    }

    fn bare_rel(b: f64, c: f64) -> SpectrumCoefficients {
        SpectrumCoefficients {
            quadratic: 1.0,
            linear: b,
            constant: c,
            variant: Regime::Relativistic,
            fidelity: Fidelity::Derived,
            flux_ratio: 50.0,
        }
    }

    fn bare_nonrel(b: f64, c: f64) -> SpectrumCoefficients {
        SpectrumCoefficients {
            quadratic: 0.0,
            linear: b,
            constant: c,
            variant: Regime::NonRelativistic,
            fidelity: Fidelity::Derived,
            flux_ratio: 50.0,
        }
    }

    fn legendre_gap(p: &ThermoPoint) -> f64 {
        let rhs = p.u_per_n - p.tau * p.s_per_nk;
        (p.f_per_n - rhs).abs()
            / p.f_per_n
                .abs()
                .max(p.u_per_n.abs())
                .max((p.tau * p.s_per_nk).abs())
                .max(1.0)
    }

    #[test]
    fn rel_closed_mean_energy_trivial_point() {
        let p = thermo_rel_closed(1.0, &bare_rel(2.0, 1.0)).unwrap();
        assert_eq!(p.u_per_n, 1.5);
        // independent route: central difference of the log-partition
        let h = 1e-6;
        let lo = z1_high_t_log(1.0 - h, &bare_rel(2.0, 1.0)).unwrap();
        let hi = z1_high_t_log(1.0 + h, &bare_rel(2.0, 1.0)).unwrap();
        let u_fd = -(hi - lo) / (2.0 * h);
        assert!((p.u_per_n - u_fd).abs() < 1e-8);
    }

    #[test]
    fn rel_closed_legendre_identity_point() {
        let p = thermo_rel_closed(0.37, &bare_rel(100.0, 2501.0)).unwrap();
        assert!(legendre_gap(&p) < 1e-10);
    }

    #[test]
    fn rel_closed_saturates_at_two() {
        let p = thermo_rel_closed(1e-6, &rel_coeffs(50.0)).unwrap();
        assert!((p.cv_per_nk - 2.0).abs() < 1e-3);
    }

    #[test]
    fn rel_entropy_matches_beta_u_minus_f() {
        // The printed entropy expression against the Legendre route built
        // from the printed F and U.
        for beta in [1e-4, 1e-3, 1e-2, 0.37, 1.0] {
            let p = thermo_rel_closed(beta, &rel_coeffs(100.0)).unwrap();
            let s_legendre = beta * (p.u_per_n - p.f_per_n);
            assert!(
                (p.s_per_nk - s_legendre).abs() / s_legendre.abs().max(1.0) < 1e-10,
                "beta={beta}"
            );
        }
    }

    #[test]
    fn rel_closed_rejects_degenerate_field() {
        assert_eq!(
            thermo_rel_closed(1.0, &rel_coeffs(0.0)),
            Err(ThermoError::DegenerateField)
        );
    }

    #[test]
    fn nonrel_closed_mean_energy_trivial_point() {
        let coeffs = bare_nonrel(std::f64::consts::LN_2, 0.0);
        let p = thermo_nonrel_closed(1.0, &coeffs, Fidelity::Derived).unwrap();
        assert!((p.u_per_n - std::f64::consts::LN_2).abs() < 1e-14);
    }

    #[test]
    fn nonrel_closed_saturates_at_one() {
        let p = thermo_nonrel_closed(1e-6, &nonrel_coeffs(1.0, 50.0), Fidelity::Derived)
            .unwrap();
        assert!((p.cv_per_nk - 1.0).abs() < 1e-3);
    }

    #[test]
    fn nonrel_closed_freezes_out() {
        let coeffs = bare_nonrel(1.0, 3.0);
        let p = thermo_nonrel_closed(50.0, &coeffs, Fidelity::Derived).unwrap();
        assert!((p.u_per_n - coeffs.constant).abs() < 1e-12);
        assert!(p.s_per_nk.abs() < 1e-12);
        assert!(p.cv_per_nk.abs() < 1e-12);
    }

    #[test]
    fn nonrel_fidelity_controls_free_energy_identity() {
        let coeffs = nonrel_coeffs(1.0, 50.0); // B = 50, C = 1250
        let derived = thermo_nonrel_closed(0.1, &coeffs, Fidelity::Derived).unwrap();
        assert!(legendre_gap(&derived) < 1e-10);
        // The published free energy swaps B for C in the denominator
        // exponent, so the identity breaks whenever B != C.
        let paper = thermo_nonrel_closed(0.1, &coeffs, Fidelity::Paper).unwrap();
        assert!(legendre_gap(&paper) > 1e-3);
        // ... and collapses to the derived form when B == C.
        let square = bare_nonrel(7.0, 7.0);
        let a = thermo_nonrel_closed(0.3, &square, Fidelity::Derived).unwrap();
        let b = thermo_nonrel_closed(0.3, &square, Fidelity::Paper).unwrap();
        assert_eq!(a.f_per_n.to_bits(), b.f_per_n.to_bits());
    }

    #[test]
    fn numeric_single_level_has_no_fluctuations() {
        let e0 = 2.0;
        let p = thermo_numeric(
            |b| Ok(-b * e0),
            1.0,
            Some(0.01),
            1,
            Regime::Relativistic,
        )
        .unwrap();
        assert!((p.u_per_n - e0).abs() < 1e-10);
        assert!((p.f_per_n - e0).abs() < 1e-10);
        assert!(p.cv_per_nk.abs() < 1e-8);
        assert!(p.s_per_nk.abs() < 1e-8);
    }

    #[test]
    fn numeric_matches_nonrel_closed_forms() {
        // beta = 0.5 with B = 50 sits deep in freeze-out: U and F are
        // healthy while S and Cv are ~1e-9, far below what a second
        // difference of a ~6e2 log-partition can resolve relatively; those
        // two are held to 1e-6 absolutely instead.
        let coeffs = bare_nonrel(50.0, 1250.0);
        let closed = thermo_nonrel_closed(0.5, &coeffs, Fidelity::Derived).unwrap();
        let numeric = thermo_numeric(
            |b| z1_geometric_closed_log(b, &coeffs),
            0.5,
            Some(0.5 * 2e-3),
            1,
            Regime::NonRelativistic,
        )
        .unwrap();
        assert!((numeric.u_per_n / closed.u_per_n - 1.0).abs() < 1e-6);
        assert!((numeric.f_per_n / closed.f_per_n - 1.0).abs() < 1e-6);
        assert!((numeric.s_per_nk - closed.s_per_nk).abs() < 1e-6);
        assert!((numeric.cv_per_nk - closed.cv_per_nk).abs() < 1e-6);
    }

    #[test]
    fn numeric_matches_rel_closed_forms() {
        let coeffs = bare_rel(100.0, 2501.0);
        let beta = 1e-3;
        let closed = thermo_rel_closed(beta, &coeffs).unwrap();
        let numeric = thermo_numeric(
            |b| z1_high_t_log(b, &coeffs),
            beta,
            Some(beta * 1e-3),
            1,
            Regime::Relativistic,
        )
        .unwrap();
        assert!((numeric.u_per_n / closed.u_per_n - 1.0).abs() < 1e-6);
        assert!((numeric.f_per_n / closed.f_per_n - 1.0).abs() < 1e-6);
        assert!((numeric.s_per_nk / closed.s_per_nk - 1.0).abs() < 1e-6);
        assert!((numeric.cv_per_nk / closed.cv_per_nk - 1.0).abs() < 1e-6);
    }

    #[test]
    fn numeric_scales_out_particle_count() {
        let coeffs = bare_rel(100.0, 2501.0);
        let single = thermo_numeric(
            |b| z1_high_t_log(b, &coeffs),
            0.01,
            None,
            1,
            Regime::Relativistic,
        )
        .unwrap();
        let many = thermo_numeric(
            |b| z1_high_t_log(b, &coeffs).map(|l| 100.0 * l),
            0.01,
            None,
            100,
            Regime::Relativistic,
        )
        .unwrap();
        assert!((single.u_per_n / many.u_per_n - 1.0).abs() < 1e-12);
        assert!((single.f_per_n / many.f_per_n - 1.0).abs() < 1e-12);
    }

    #[test]
    fn numeric_rejects_unresolved_curvature() {
        // -2 ln(beta) at beta = 1 with a step of 0.4: the two stencil
        // widths disagree by a few percent.
        let err = thermo_numeric(
            |b| Ok(-2.0 * b.ln()),
            1.0,
            Some(0.4),
            1,
            Regime::Relativistic,
        )
        .unwrap_err();
        assert!(matches!(err, ThermoError::StepTooLarge { .. }));
    }

    #[test]
    fn numeric_rejects_bad_steps_and_domains() {
        assert!(matches!(
            thermo_numeric(|b| Ok(-b), 1.0, Some(0.6), 1, Regime::Relativistic),
            Err(ThermoError::StepTooLarge { .. })
        ));
        // ln becomes NaN once a stencil point crosses zero
        let err = thermo_numeric(
            |b| Ok((b - 0.9).ln()),
            1.0,
            Some(0.08),
            1,
            Regime::Relativistic,
        )
        .unwrap_err();
        assert!(matches!(err, ThermoError::StepTooLarge { .. }));
    }

    #[test]
    fn numeric_legendre_identity_by_construction() {
        let coeffs = bare_nonrel(0.5, 12.5);
        let p = thermo_numeric(
            |b| z1_geometric_closed_log(b, &coeffs),
            0.2,
            None,
            1,
            Regime::NonRelativistic,
        )
        .unwrap();
        assert!(legendre_gap(&p) < 1e-12);
    }

    #[test]
    fn dulong_petit_limits() {
        assert_eq!(dulong_petit_limit(Regime::Relativistic), 2.0);
        assert_eq!(dulong_petit_limit(Regime::NonRelativistic), 1.0);
    }

    proptest! {
        #[test]
        fn closed_forms_obey_legendre_identity(
            phi in 50.0f64..200.0,
            beta in 1e-4f64..10.0,
        ) {
            let rel = thermo_rel_closed(beta, &rel_coeffs(phi)).unwrap();
            prop_assert!(legendre_gap(&rel) < 1e-8);
            prop_assert!(rel.cv_per_nk >= 0.0);

            let nonrel =
                thermo_nonrel_closed(beta, &nonrel_coeffs(1.0, phi), Fidelity::Derived)
                    .unwrap();
            prop_assert!(legendre_gap(&nonrel) < 1e-8);
            prop_assert!(nonrel.cv_per_nk >= 0.0);
        }

        #[test]
        fn closed_form_energy_nonincreasing_in_beta(
            phi in 50.0f64..200.0,
            beta in 1e-4f64..1.0,
            factor in 1.05f64..4.0,
        ) {
            let c = rel_coeffs(phi);
            let u1 = thermo_rel_closed(beta, &c).unwrap().u_per_n;
            let u2 = thermo_rel_closed(beta * factor, &c).unwrap().u_per_n;
            prop_assert!(u2 <= u1);

            let nc = nonrel_coeffs(1.0, phi);
            let v1 = thermo_nonrel_closed(beta, &nc, Fidelity::Derived).unwrap().u_per_n;
            let v2 = thermo_nonrel_closed(beta * factor, &nc, Fidelity::Derived)
                .unwrap()
                .u_per_n;
            prop_assert!(v2 <= v1);
        }
    }
}
