//! Canonical-ensemble thermodynamics of a Dirac fermion confined to a
//! one-dimensional quantum ring threaded by a magnetic flux.
//!
//! The flux shifts every angular-momentum level, and with the ensemble
//! restricted to positive-energy, negatively charged states the spectrum is
//! non-degenerate. The single-particle partition function has no closed form,
//! so this crate evaluates it by several routes that cross-validate each
//! other:
//!
//! * [`partition::z1_direct`] — truncated direct summation with tail control
//!   (the ground truth);
//! * [`partition::z1_euler_maclaurin`] — boundary-corrected integral
//!   expansion of the strong-field (linearized) level model;
//! * [`partition::z1_high_t`] — the small-`beta` closed form;
//! * [`partition::z1_geometric_closed`] — exact geometric summation of the
//!   linearized non-relativistic levels.
//!
//! [`thermo`] turns any of those into Helmholtz free energy, mean energy,
//! entropy and heat capacity per particle, either through closed forms or
//! through guarded finite-difference derivatives of `ln Z`, and [`sweep`]
//! drives temperature sweeps over several flux values and emits CSV.
//!
//! Units are natural throughout: `hbar = c = k_B = 1`. Temperatures are
//! carried as `tau = k_B T`, so `beta = 1/tau`, and mass, energy and
//! temperature share one unit.

pub mod partition;
pub mod spectrum;
pub mod sweep;
pub mod thermo;

pub use partition::{
    bernoulli_weights, z1_direct, z1_euler_maclaurin, z1_for_method, z1_geometric_closed,
    z1_high_t, z1_integral, zn_log, Method, PartitionError, PartitionResult, SummationConfig,
};
pub use spectrum::{
    nonrelativistic_coefficients, nonrelativistic_energy, relativistic_coefficients,
    relativistic_energy, relativistic_kinetic_energy, ChargeSign, Fidelity, Regime, RingParams,
    SpectrumCoefficients, SpectrumError, STRONG_FIELD_MIN_FLUX_RATIO,
};
pub use sweep::{
    compare_methods, emit_csv, evaluate_point, parse_config_file, parse_config_text,
    resolve_config, run_sweep, write_csv, ComparisonTable, ConfigOverrides, GridScale, Preset,
    SweepConfig, SweepError, SweepRow, CSV_HEADER,
};
pub use thermo::{
    dulong_petit_limit, thermo_nonrel_closed, thermo_numeric, thermo_rel_closed, ThermoError,
    ThermoPoint, ThermoSource,
};
