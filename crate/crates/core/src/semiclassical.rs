//! Coherent-like states attached to an Ermakov-Pinney envelope: eigenstates
//! of the Lewis invariant, exact label evolution, expectation values and
//! uncertainties, and the backward-evolved vacuum near singularities.
//!
//! Everything is exact: expectation trajectories coincide with the classical
//! flow, and the variances depend on the envelope alone, never on the state
//! label.

use num_complex::Complex64;

use crate::classical;
use crate::ep::{phase_integral, EPSolution};
use crate::error::Result;
use crate::profile::FrequencyProfile;
use crate::special::hermite_functions;
use crate::transitions::vacuum_decay_coeffs;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Coherent-like state: eigenvector of the envelope annihilation operator
/// at the anchor time `t0` with eigenvalue `z`.
#[derive(Clone, Copy)]
pub struct SemiclassicalState<'a> {
    pub ep: &'a EPSolution,
    pub z: Complex64,
    pub t0: f64,
}

impl<'a> SemiclassicalState<'a> {
    pub fn new(ep: &'a EPSolution, z: Complex64, t0: f64) -> Result<Self> {
        ep.profile().check_time(t0)?;
        Ok(SemiclassicalState { ep, z, t0 })
    }

    /// The classical Cauchy data at `t0` encoded by the label:
    /// `q = sqrt(2) rho Re z`, `p = sqrt(2) (rho_dot Re z + Im z / rho)`.
    pub fn cauchy_data(&self) -> Result<(f64, f64)> {
        let (rho, rho_dot) = self.ep.rho_and_dot(self.t0)?;
        let q = 2f64.sqrt() * rho * self.z.re;
        let p = 2f64.sqrt() * (rho_dot * self.z.re + self.z.im / rho);
        Ok((q, p))
    }
}

/// Variances at a single time; independent of the state label.
#[derive(Clone, Copy, Debug)]
pub struct UncertaintyRecord {
    pub t: f64,
    pub dq: f64,
    pub dp: f64,
    pub product: f64,
}

/// Eigenfunction of the Lewis invariant built from envelope values
/// `(rho, rho_dot)`:
/// `psi_n(q) = rho^{-1/2} h_n(q/rho) exp(i rho_dot q^2 / (2 rho))` where
/// `h_n` is the normalized Hermite function.
pub fn lewis_eigenfunction_at(rho: f64, rho_dot: f64, n: usize, q: f64) -> Complex64 {
    let h = hermite_functions(n, q / rho)[n];
    Complex64::from_polar(h / rho.sqrt(), 0.5 * rho_dot / rho * q * q)
}

/// [`lewis_eigenfunction_at`] with the envelope evaluated from `ep` at `t0`.
pub fn lewis_eigenfunction(ep: &EPSolution, t0: f64, n: usize, q: f64) -> Result<Complex64> {
    let (rho, rho_dot) = ep.rho_and_dot(t0)?;
    Ok(lewis_eigenfunction_at(rho, rho_dot, n, q))
}

/// Exact evolution of the coherent label: `z -> exp(-i Phi) z` with the
/// accumulated ground-level phase `exp(-i Phi / 2)`, `Phi` the envelope
/// phase integral from `t0` to `t`.
pub fn evolve_label(
    ep: &EPSolution,
    z: Complex64,
    t0: f64,
    t: f64,
) -> Result<(Complex64, Complex64)> {
    let phi = phase_integral(ep, t0, t)?;
    Ok((
        Complex64::from_polar(1.0, -phi) * z,
        Complex64::from_polar(1.0, -0.5 * phi),
    ))
}

/// Position and momentum expectation values at time `t`; exactly the
/// classical trajectory of the mapped Cauchy data.
pub fn expectations(state: &SemiclassicalState, t: f64) -> Result<(f64, f64)> {
    let (z_t, _) = evolve_label(state.ep, state.z, state.t0, t)?;
    let (rho, rho_dot) = state.ep.rho_and_dot(t)?;
    let q_mean = 2f64.sqrt() * rho * z_t.re;
    let p_mean = 2f64.sqrt() * ((Complex64::new(rho_dot, 0.0) - I / rho) * z_t).re;
    Ok((q_mean, p_mean))
}

/// `dq = rho/sqrt(2)`, `dp = |rho_dot - i/rho|/sqrt(2)`; the product is
/// `sqrt(1 + rho^2 rho_dot^2)/2 >= 1/2` with equality at critical points
/// of the envelope.
pub fn uncertainties(ep: &EPSolution, t: f64) -> Result<UncertaintyRecord> {
    let (rho, rho_dot) = ep.rho_and_dot(t)?;
    let dq = rho / 2f64.sqrt();
    let dp = Complex64::new(rho_dot, -1.0 / rho).norm() / 2f64.sqrt();
    Ok(UncertaintyRecord {
        t,
        dq,
        dp,
        product: dq * dp,
    })
}

/// One sample of the backward-evolved vacuum `U(t1, t2) phi_0`.
#[derive(Clone, Copy, Debug)]
pub struct BackwardVacuumPoint {
    pub t1: f64,
    /// `|<phi_0 | U(t1, t2) phi_0>|`
    pub persistence: f64,
    /// `sum_{n <= nmax} |<phi_{2n} | U(t1, t2) phi_0>|^2`; mass escaping this
    /// truncation signals the collapse region near the singularity.
    pub truncated_mass: f64,
}

/// Sweeps `t1` over `t1_list`, evolving the frequency-`omega` vacuum
/// backward from `t2`, and reports persistence and truncated decay mass
/// (`n = 0..=nmax` even levels).
pub fn backward_vacuum_profile(
    profile: &FrequencyProfile,
    omega: f64,
    t1_list: &[f64],
    t2: f64,
    nmax: usize,
) -> Result<Vec<BackwardVacuumPoint>> {
    profile.check_time(t2)?;
    let mut out = Vec::with_capacity(t1_list.len());
    for &t1 in t1_list {
        profile.check_time(t1)?;
        let (pair, index) = if t1 == t2 {
            (classical::FundamentalPair::identity(t2), 0)
        } else {
            let pair = classical::solve_fundamental(profile, t2, t1, 1e-11)?;
            let samples = classical::sample_solution(profile, t2, t1, false, 1e-10)?;
            (pair, classical::index_of(&samples, t2, t1)?.m)
        };
        let coeffs = vacuum_decay_coeffs(&pair, index, omega, nmax)?;
        out.push(BackwardVacuumPoint {
            t1,
            persistence: coeffs[0].norm(),
            truncated_mass: coeffs.iter().map(|c| c.norm_sqr()).sum(),
        });
    }
    Ok(out)
}
