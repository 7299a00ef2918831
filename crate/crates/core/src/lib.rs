//! Exact quantum dynamics of the time-dependent harmonic oscillator.
//!
//! The crate computes, from a frequency profile `kappa(t)` alone:
//! classical fundamental solution pairs and their symplectic composition,
//! Ermakov-Pinney envelopes and phase integrals, the exact Feynman
//! propagator (including its caustic form and Maslov branch tracking),
//! transition amplitudes and vacuum decay between oscillator eigenbases,
//! coherent/semiclassical state evolution, and infinite-mode field-theory
//! diagnostics (Bogoliubov coefficients per mode, unitary implementability
//! tests, three-factor decompositions) for Minkowski and Gowdy-type mode
//! families.

pub mod classical;
pub mod ep;
pub mod error;
pub mod field;
pub mod models;
pub mod ode;
pub mod profile;
pub mod propagator;
pub mod quad;
pub mod scenario;
pub mod semiclassical;
pub mod special;
pub mod transitions;

pub use classical::{
    branch_power, closed_form_constant, compose_pair, index_of, sample_solution,
    solve_fundamental, FundamentalPair, IndexCount,
};
pub use ep::{ep_from_fundamental, ep_residual, fundamental_from_ep, locate_s_zeros, phase_integral, EPQuadraticForm, EPSolution};
pub use error::{Error, Result};
pub use field::{
    appendix_factors, compose_blocks, factorization_obstruction, field_coherent_variances,
    field_kernel_factor, mode_bogoliubov, mode_kernel, mode_sweep, mode_vacuum_element,
    t3_constraint_check, unitarity_test, vacuum_amplitude_magnitude, AppendixFactors, ModeFamily,
    ObstructionReport, RepresentationSeq, TruncationReport, VacuumMagnitude, Verdict,
};
pub use models::{canonical_ep, canonical_ep_point, characteristic_value, closed_form_pair, mathieu_monodromy, MonodromyResult};
pub use profile::{FrequencyProfile, ProfileKind, ProfileSpec};
pub use propagator::{
    evolve_gaussian, kernel, kernel_caustic, kernel_measure_rep, kernel_shifted,
    kernel_via_factorization, pde_residual, GaussianPacket, KernelValue, Regime,
};
pub use semiclassical::{
    backward_vacuum_profile, evolve_label, expectations, lewis_eigenfunction, uncertainties,
    SemiclassicalState, UncertaintyRecord,
};
pub use transitions::{
    amplitude, amplitude_oracle, bogoliubov, lambda_matrix, taylor_coeff, vacuum_decay_coeffs,
    vacuum_persistence, AmplitudeTable, BogoliubovPair, LambdaMatrix,
};
