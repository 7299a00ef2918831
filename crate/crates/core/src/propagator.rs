//! Exact propagator of the time-dependent oscillator and closed-form
//! Gaussian packet evolution.
//!
//! Away from caustics the kernel is
//! `(2 pi i)^{-1/2} s^{-1/2} exp[(i/2s)(s_dot q^2 + c q0^2 - 2 q q0)]`
//! with the branch of `s^{-1/2}` fixed by the Maslov index (zero count of
//! `s`).  At a caustic (`s = 0`) it degenerates to a rescaled delta, which
//! is never sampled pointwise here: delta kernels act on [`GaussianPacket`]
//! or stay symbolic inside [`KernelValue`].

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::classical::{branch_power, FundamentalPair};
use crate::ep::{phase_integral, EPSolution};
use crate::error::{Error, Result};
use crate::profile::FrequencyProfile;
use crate::{classical, quad};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Relative `|s|` threshold below which a pair is treated as caustic.
const CAUSTIC_EPS: f64 = 1e-10;

/// `(2 pi i)^{-1/2} = exp(-i pi/4) / sqrt(2 pi)`, principal branch.
pub fn inv_sqrt_two_pi_i() -> Complex64 {
    Complex64::from_polar(1.0 / (2.0 * PI).sqrt(), -PI / 4.0)
}

pub(crate) fn is_caustic(pair: &FundamentalPair) -> bool {
    pair.s.abs() < CAUSTIC_EPS * pair.c.abs().max(1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    Regular,
    Caustic,
}

/// Symbolic kernel record.
///
/// Regular regime: `K(q, q0) = amplitude * exp[(i/2)(quad_tt q^2
/// + quad_00 q0^2 + 2 quad_cross q q0)]`.
///
/// Caustic regime: `K(q, q0) = amplitude * exp[(i/2) quad_tt q^2]
/// * delta(q0 - delta_scale * q)`; the quadratic coefficients in `q0`
/// are unused and `amplitude` carries the branch factor `c^{-1/2}`.
#[derive(Clone, Copy, Debug)]
pub struct KernelValue {
    pub regime: Regime,
    pub t0: f64,
    pub t: f64,
    pub amplitude: Complex64,
    pub quad_tt: Complex64,
    pub quad_00: Complex64,
    pub quad_cross: Complex64,
    pub delta_scale: f64,
}

impl KernelValue {
    /// Regular-regime record built from a fundamental pair and the Maslov
    /// index of `s` on the span.
    pub fn regular(pair: &FundamentalPair, index_s: i64) -> Result<KernelValue> {
        if is_caustic(pair) {
            return Err(Error::Singular {
                t: pair.t,
                msg: format!(
                    "s({}, {}) = {:.3e} is at a caustic; use kernel_caustic",
                    pair.t, pair.t0, pair.s
                ),
            });
        }
        let amp = inv_sqrt_two_pi_i() * branch_power(pair.s, index_s, -0.5)?;
        Ok(KernelValue {
            regime: Regime::Regular,
            t0: pair.t0,
            t: pair.t,
            amplitude: amp,
            quad_tt: Complex64::new(pair.s_dot / pair.s, 0.0),
            quad_00: Complex64::new(pair.c / pair.s, 0.0),
            quad_cross: Complex64::new(-1.0 / pair.s, 0.0),
            delta_scale: 0.0,
        })
    }

    /// Caustic-regime record; `index_c` is the Maslov index of `c`.
    pub fn caustic(pair: &FundamentalPair, index_c: i64) -> Result<KernelValue> {
        if !is_caustic(pair) {
            return Err(Error::Usage(format!(
                "kernel_caustic called with s = {:.3e} away from a caustic",
                pair.s
            )));
        }
        if pair.c.abs() < 1e-10 {
            return Err(Error::Invariant(
                "c and s vanish together, violating the Wronskian".into(),
            ));
        }
        // The delta-kernel phase: the limit of the regular kernel as
        // s -> 0 carries exp(i c_dot q^2 / (2 c)), stored in quad_tt.
        let amp = branch_power(pair.c, index_c, -0.5)?;
        Ok(KernelValue {
            regime: Regime::Caustic,
            t0: pair.t0,
            t: pair.t,
            amplitude: amp,
            quad_tt: Complex64::new(pair.c_dot / pair.c, 0.0),
            quad_00: Complex64::new(0.0, 0.0),
            quad_cross: Complex64::new(0.0, 0.0),
            delta_scale: 1.0 / pair.c,
        })
    }

    /// Pointwise evaluation; only meaningful in the regular regime.
    pub fn eval(&self, q: f64, q0: f64) -> Result<Complex64> {
        match self.regime {
            Regime::Regular => {
                let phase = 0.5
                    * I
                    * (self.quad_tt * q * q
                        + self.quad_00 * q0 * q0
                        + 2.0 * self.quad_cross * q * q0);
                Ok(self.amplitude * phase.exp())
            }
            Regime::Caustic => Err(Error::Usage(
                "caustic kernel is a delta distribution; apply it to a packet".into(),
            )),
        }
    }
}

/// Pointwise propagator `K(q, t; q0, t0)` away from caustics.
pub fn kernel(pair: &FundamentalPair, index_s: i64, q: f64, q0: f64) -> Result<Complex64> {
    KernelValue::regular(pair, index_s)?.eval(q, q0)
}

/// Symbolic caustic propagator `c^{-1/2} exp(i c_dot q^2/(2c)) delta(q0 - q/c)`.
pub fn kernel_caustic(pair: &FundamentalPair, index_c: i64) -> Result<KernelValue> {
    KernelValue::caustic(pair, index_c)
}

/// Kernel of the evolution generated by `H + theta(t)`: multiplies the
/// amplitude by `exp(-i integral of theta over [t0, t])`.  Heisenberg-picture
/// observables are unchanged by this phase.
pub fn kernel_shifted(
    base: &KernelValue,
    theta: &dyn Fn(f64) -> f64,
    t0: f64,
    t: f64,
) -> Result<KernelValue> {
    let integral = quad::integrate_default(&|tau| theta(tau), t0, t)?;
    let mut out = *base;
    out.amplitude *= Complex64::from_polar(1.0, -integral);
    Ok(out)
}

fn check_measure_constraint(alpha: Complex64, beta: Complex64) -> Result<()> {
    let w = alpha * beta.conj() - beta * alpha.conj();
    if (w - I).norm() > 1e-12 {
        return Err(Error::Usage(format!(
            "measure parameters violate alpha*conj(beta) - beta*conj(alpha) = i (got {w})"
        )));
    }
    Ok(())
}

/// Rewrites the kernel with respect to the Gaussian measure attached to the
/// complex structure `(alpha, beta)`:
/// `K_ab = sqrt(2 pi) |alpha| exp(i beta q0^2/(2 alpha) - i conj(beta) q^2 /
/// (2 conj(alpha))) K`.
pub fn kernel_measure_rep(
    base: &KernelValue,
    alpha: Complex64,
    beta: Complex64,
) -> Result<KernelValue> {
    check_measure_constraint(alpha, beta)?;
    let mut out = *base;
    out.amplitude *= Complex64::new((2.0 * PI).sqrt() * alpha.norm(), 0.0);
    out.quad_00 += beta / alpha;
    out.quad_tt -= (beta / alpha).conj();
    Ok(out)
}

/// Inverse of [`kernel_measure_rep`] with the same parameters.
pub fn kernel_measure_rep_inverse(
    base: &KernelValue,
    alpha: Complex64,
    beta: Complex64,
) -> Result<KernelValue> {
    check_measure_constraint(alpha, beta)?;
    let mut out = *base;
    out.amplitude /= Complex64::new((2.0 * PI).sqrt() * alpha.norm(), 0.0);
    out.quad_00 -= beta / alpha;
    out.quad_tt += (beta / alpha).conj();
    Ok(out)
}

/// Normalizable Gaussian wavefunction
/// `psi(q) = exp(log_norm) exp(-a q^2 / 2 + b q)` with `Re(a) > 0`.
///
/// Keeping the normalization in log form makes the accumulated dynamical
/// phase exactly trackable across long evolutions.
#[derive(Clone, Copy, Debug)]
pub struct GaussianPacket {
    pub a: Complex64,
    pub b: Complex64,
    pub log_norm: Complex64,
}

impl GaussianPacket {
    /// Unit-norm oscillator ground state of frequency `omega`.
    pub fn ground_state(omega: f64) -> GaussianPacket {
        GaussianPacket {
            a: Complex64::new(omega, 0.0),
            b: Complex64::new(0.0, 0.0),
            log_norm: Complex64::new(0.25 * (omega / PI).ln(), 0.0),
        }
    }

    /// Coherent state of frequency `omega` centered at phase-space point
    /// `(q_bar, p_bar)`, unit norm, standard phase convention
    /// `exp(i p (q - q_bar/2))` on top of the displaced ground state.
    pub fn coherent(omega: f64, q_bar: f64, p_bar: f64) -> GaussianPacket {
        GaussianPacket {
            a: Complex64::new(omega, 0.0),
            b: Complex64::new(omega * q_bar, p_bar),
            log_norm: Complex64::new(
                0.25 * (omega / PI).ln() - 0.5 * omega * q_bar * q_bar,
                -0.5 * p_bar * q_bar,
            ),
        }
    }

    pub fn eval(&self, q: f64) -> Complex64 {
        (self.log_norm - 0.5 * self.a * q * q + self.b * q).exp()
    }

    /// Squared L2 norm, in closed form.
    pub fn norm_sq(&self) -> f64 {
        let ar = self.a.re;
        let br = self.b.re;
        (2.0 * self.log_norm.re + br * br / ar).exp() * (PI / ar).sqrt()
    }

    /// Inner product `<self | other>` (conjugate-linear in `self`).
    pub fn overlap(&self, other: &GaussianPacket) -> Complex64 {
        let a = self.a.conj() + other.a;
        let b = self.b.conj() + other.b;
        (self.log_norm.conj() + other.log_norm + b * b / (2.0 * a)).exp()
            * (2.0 * PI / a).sqrt()
    }
}

/// Evolves a Gaussian packet exactly through the kernel of `pair`.
///
/// `index` is the Maslov index of `s` on the span; at a caustic (where the
/// zero of `s` at the endpoint is included in the count) it coincides with
/// the index of `c`, and the delta rule `q -> q/c` applies.
pub fn evolve_gaussian(
    pair: &FundamentalPair,
    index: i64,
    packet: &GaussianPacket,
) -> Result<GaussianPacket> {
    if packet.a.re <= 0.0 {
        return Err(Error::Usage("packet is not normalizable (Re a <= 0)".into()));
    }
    if pair.t == pair.t0 {
        return Ok(*packet);
    }
    if is_caustic(pair) {
        let kv = KernelValue::caustic(pair, index)?;
        let c = pair.c;
        return Ok(GaussianPacket {
            a: packet.a / (c * c) - I * kv.quad_tt,
            b: packet.b / c,
            log_norm: packet.log_norm + kv.amplitude.ln(),
        });
    }
    let (c, s, s_dot) = (pair.c, pair.s, pair.s_dot);
    // Gaussian integral over q0: alpha = a - i c/s has Re > 0.
    let alpha = packet.a - I * c / s;
    let a_new = -I * s_dot / s + 1.0 / (s * s * alpha);
    let b_new = -I * packet.b / (s * alpha);
    let prefactor =
        Complex64::from_polar(1.0, -PI / 4.0) * branch_power(s, index, -0.5)? / alpha.sqrt();
    let log_norm = packet.log_norm + prefactor.ln() + packet.b * packet.b / (2.0 * alpha);
    Ok(GaussianPacket {
        a: a_new,
        b: b_new,
        log_norm,
    })
}

/// Propagator assembled from the three-factor form `T_rho^{-1} R_rho T_rho`
/// of the evolution: a dilation to EP coordinates, a unit-frequency rotation
/// through the EP phase, and the inverse dilation.  The delta factors of the
/// dilation kernels collapse the composition to substitutions, so the result
/// must agree with [`kernel`] for any EP solution of the same profile.
pub fn kernel_via_factorization(
    ep: &EPSolution,
    t0: f64,
    t: f64,
    q: f64,
    q0: f64,
) -> Result<Complex64> {
    let (rho0, rho0_dot) = ep.rho_and_dot(t0)?;
    let (rhot, rhot_dot) = ep.rho_and_dot(t)?;
    let phi = phase_integral(ep, t0, t)?;
    let (sin_phi, cos_phi) = phi.sin_cos();
    if sin_phi.abs() < 1e-12 {
        return Err(Error::Singular {
            t,
            msg: format!("EP phase {phi:.6} lies at a caustic of the rotation kernel"),
        });
    }
    let m = (phi / PI).floor() as i64;
    let x = q / rhot;
    let x0 = q0 / rho0;
    let k0 = inv_sqrt_two_pi_i()
        * branch_power(sin_phi, m, -0.5)?
        * (0.5 * I / sin_phi * ((x * x + x0 * x0) * cos_phi - 2.0 * x * x0)).exp();
    let dilations = (0.5 * I * (rhot_dot / rhot * q * q - rho0_dot / rho0 * q0 * q0)).exp()
        / (rho0 * rhot).sqrt();
    Ok(dilations * k0)
}

/// Max residual of `i dK/dt + (1/2) d^2K/dq^2 - (1/2) q^2 kappa(t) K` over a
/// `(q, t)` grid, via centered finite differences with steps `hq`, `ht`.
/// Validates that the closed-form kernel satisfies the evolution equation.
pub fn pde_residual(
    profile: &FrequencyProfile,
    t0: f64,
    qs: &[f64],
    ts: &[f64],
    hq: f64,
    ht: f64,
) -> Result<f64> {
    if qs.is_empty() || ts.is_empty() {
        return Err(Error::Usage("pde_residual needs a non-empty grid".into()));
    }
    let t_max = ts.iter().cloned().fold(t0, f64::max) + ht;
    let samples = classical::sample_solution(profile, t0, t_max, false, 1e-10)?;
    let q0 = 0.3; // fixed source point; any non-degenerate choice works

    let mut worst = 0.0f64;
    for &t in ts {
        let stencil = [t - ht, t, t + ht];
        let mut records = Vec::with_capacity(3);
        for &tau in &stencil {
            let pair = classical::solve_fundamental(profile, t0, tau, 1e-12)?;
            if pair.s.abs() < 10.0 * ht {
                return Err(Error::Singular {
                    t: tau,
                    msg: "finite-difference stencil touches a caustic".into(),
                });
            }
            let index = classical::index_of(&samples, t0, tau)?.m;
            records.push(KernelValue::regular(&pair, index)?);
        }
        let kappa = profile.kappa(t)?;
        for &q in qs {
            let k_m = records[0].eval(q, q0)?;
            let k_0 = records[1].eval(q, q0)?;
            let k_p = records[2].eval(q, q0)?;
            let k_qm = records[1].eval(q - hq, q0)?;
            let k_qp = records[1].eval(q + hq, q0)?;
            let dt = (k_p - k_m) / (2.0 * ht);
            let dqq = (k_qp + k_qm - 2.0 * k_0) / (hq * hq);
            let r = I * dt + 0.5 * dqq - 0.5 * q * q * kappa * k_0;
            worst = worst.max(r.norm());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::{compose_pair, solve_fundamental};
    use crate::ep::{ep_from_fundamental, locate_s_zeros, EPQuadraticForm};
    use crate::models::{canonical_ep, closed_form_pair};
    use crate::profile::FrequencyProfile;
    use std::f64::consts::FRAC_PI_2;

    fn c64(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn tiho_pair(omega: f64, t0: f64, t: f64) -> FundamentalPair {
        closed_form_pair(&FrequencyProfile::constant(omega * omega), t0, t).unwrap()
    }

    fn index_for(profile: &FrequencyProfile, t0: f64, t: f64) -> i64 {
        let samples = classical::sample_solution(profile, t0, t, false, 1e-10).unwrap();
        classical::index_of(&samples, t0, t).unwrap().m
    }

    #[test]
    fn quarter_period_kernel_is_fourier() {
        let pair = tiho_pair(1.0, 0.0, FRAC_PI_2);
        for (q, q0) in [(0.0, 0.0), (1.3, -0.4), (-2.0, 0.7)] {
            let k = kernel(&pair, 0, q, q0).unwrap();
            let expect = inv_sqrt_two_pi_i() * (-I * q * q0).exp();
            assert!((k - expect).norm() < 1e-10);
        }
    }

    #[test]
    fn free_particle_kernel() {
        let pair = closed_form_pair(&FrequencyProfile::free(), 0.0, 1.0).unwrap();
        for (q, q0) in [(0.5, 0.0), (1.0, -1.0)] {
            let k = kernel(&pair, 0, q, q0).unwrap();
            let expect = inv_sqrt_two_pi_i() * (0.5 * I * (q - q0) * (q - q0)).exp();
            assert!((k - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn matches_feynman_soriau_through_caustics() {
        // TIHO omega = 1: K must equal the unit-frequency rotation kernel
        // with the sine branch fixed by floor(t/pi).
        let profile = FrequencyProfile::constant(1.0);
        for &t in &[0.4, 1.5, 3.0, 4.4, 6.9, 9.7] {
            let pair = tiho_pair(1.0, 0.0, t);
            let m = index_for(&profile, 0.0, t);
            assert_eq!(m, (t / PI).floor() as i64);
            let k = kernel(&pair, m, 0.8, -0.3).unwrap();
            let (sn, cs) = t.sin_cos();
            let expect = inv_sqrt_two_pi_i()
                * branch_power(sn, m, -0.5).unwrap()
                * (0.5 * I / sn * ((0.64 + 0.09) * cs - 2.0 * 0.8 * (-0.3))).exp();
            assert!((k - expect).norm() < 1e-10, "t = {t}");
        }
    }

    #[test]
    fn caustic_records() {
        // Half period: c = -1, index 1 -> amplitude -i, reflection q -> -q.
        let pair = tiho_pair(1.0, 0.0, PI);
        let kv = kernel_caustic(&pair, 1).unwrap();
        assert!((kv.amplitude - c64(0.0, -1.0)).norm() < 1e-9);
        assert!((kv.delta_scale + 1.0).abs() < 1e-9);
        assert!(kv.quad_tt.norm() < 1e-9);

        // Full period: c = 1, index 2 -> amplitude -1, identity map on q.
        let pair = tiho_pair(1.0, 0.0, 2.0 * PI);
        let kv = kernel_caustic(&pair, 2).unwrap();
        assert!((kv.amplitude - c64(-1.0, 0.0)).norm() < 1e-9);
        assert!((kv.delta_scale - 1.0).abs() < 1e-9);

        // t = t0 is the identity.
        let kv = kernel_caustic(&FundamentalPair::identity(0.0), 0).unwrap();
        assert_eq!(kv.amplitude, c64(1.0, 0.0));
        assert_eq!(kv.delta_scale, 1.0);
    }

    #[test]
    fn regime_errors() {
        let at_caustic = tiho_pair(1.0, 0.0, PI);
        assert!(matches!(
            kernel(&at_caustic, 1, 0.0, 0.0),
            Err(Error::Singular { .. })
        ));
        let regular = tiho_pair(1.0, 0.0, 1.0);
        assert!(matches!(kernel_caustic(&regular, 0), Err(Error::Usage(_))));
        let kv = kernel_caustic(&at_caustic, 1).unwrap();
        assert!(kv.eval(0.0, 0.0).is_err());
    }

    #[test]
    fn shifted_kernel_phases() {
        let pair = tiho_pair(1.0, 0.0, 1.0);
        let base = KernelValue::regular(&pair, 0).unwrap();
        let same = kernel_shifted(&base, &|_| 0.0, 0.0, 1.0).unwrap();
        assert_eq!(same.amplitude, base.amplitude);

        let pair_pi = tiho_pair(1.0, 0.0, PI - 1e-7);
        let base_pi = KernelValue::regular(&pair_pi, 0).unwrap();
        let flipped = kernel_shifted(&base_pi, &|_| 1.0, 0.0, PI).unwrap();
        assert!((flipped.amplitude + base_pi.amplitude).norm() < 1e-9);

        // theta = -omega/2 removes the zero-point phase e^{-i omega dt / 2}.
        let shifted = kernel_shifted(&base, &|_| -0.5, 0.0, 1.0).unwrap();
        let ratio = shifted.amplitude / base.amplitude;
        assert!((ratio - Complex64::from_polar(1.0, 0.5)).norm() < 1e-12);
    }

    #[test]
    fn measure_rep_round_trip() {
        let alpha = c64(1.0 / 2f64.sqrt(), 0.0);
        let beta = c64(0.0, -1.0 / 2f64.sqrt());
        let pair = tiho_pair(1.0, 0.0, 1.0);
        let base = KernelValue::regular(&pair, 0).unwrap();
        let rep = kernel_measure_rep(&base, alpha, beta).unwrap();
        assert!((rep.amplitude.norm() - base.amplitude.norm() * (2.0 * PI).sqrt() / 2f64.sqrt()).abs() < 1e-12);
        let back = kernel_measure_rep_inverse(&rep, alpha, beta).unwrap();
        assert!((back.amplitude - base.amplitude).norm() < 1e-12);
        assert!((back.quad_00 - base.quad_00).norm() < 1e-12);
        assert!((back.quad_tt - base.quad_tt).norm() < 1e-12);

        // Constraint violation is rejected.
        assert!(kernel_measure_rep(&base, alpha, -beta).is_err());
    }

    #[test]
    fn ground_state_is_stationary_up_to_phase() {
        let packet = GaussianPacket::ground_state(1.0);
        assert!((packet.norm_sq() - 1.0).abs() < 1e-14);
        for &dt in &[0.3, 1.0, 2.5] {
            let pair = tiho_pair(1.0, 0.0, dt);
            let out = evolve_gaussian(&pair, 0, &packet).unwrap();
            assert!((out.a - c64(1.0, 0.0)).norm() < 1e-10);
            assert!(out.b.norm() < 1e-12);
            let phase = (out.log_norm - packet.log_norm).exp();
            assert!((phase - Complex64::from_polar(1.0, -dt / 2.0)).norm() < 1e-10);
            assert!((out.norm_sq() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn free_packet_spreading() {
        let packet = GaussianPacket::ground_state(1.0);
        let pair = closed_form_pair(&FrequencyProfile::free(), 0.0, 1.0).unwrap();
        let out = evolve_gaussian(&pair, 0, &packet).unwrap();
        // Standard free-particle width law a -> a / (1 + i a t).
        let expect = c64(1.0, 0.0) / c64(1.0, 1.0);
        assert!((out.a - expect).norm() < 1e-12);
        assert!((out.norm_sq() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn norm_preserved_through_caustics() {
        // omega = 2 on [0, 5.5]: caustics of s at pi/2, pi, 3pi/2 (three
        // crossings); evolve a squeezed, displaced packet past them.
        let profile = FrequencyProfile::constant(4.0);
        let packet = GaussianPacket {
            a: c64(0.7, 0.2),
            b: c64(0.3, -1.1),
            log_norm: c64(-0.1, 0.4),
        };
        let n0 = packet.norm_sq();
        for &t in &[1.0, 2.0, 3.3, 5.5] {
            let pair = tiho_pair(2.0, 0.0, t);
            let m = index_for(&profile, 0.0, t);
            let out = evolve_gaussian(&pair, m, &packet).unwrap();
            assert!(
                (out.norm_sq() - n0).abs() < 1e-10 * n0,
                "norm drift at t = {t}"
            );
        }
    }

    #[test]
    fn semigroup_including_phase() {
        let profile = FrequencyProfile::mathieu(2.0, 0.3);
        let packet = GaussianPacket::coherent(1.0, 0.8, -0.5);
        let p10 = solve_fundamental(&profile, 0.0, 1.3, 1e-12).unwrap();
        let p21 = solve_fundamental(&profile, 1.3, 2.6, 1e-12).unwrap();
        let direct = solve_fundamental(&profile, 0.0, 2.6, 1e-12).unwrap();

        let m10 = index_for(&profile, 0.0, 1.3);
        let m21 = index_for(&profile, 1.3, 2.6);
        let m_direct = index_for(&profile, 0.0, 2.6);

        let two_step =
            evolve_gaussian(&p21, m21, &evolve_gaussian(&p10, m10, &packet).unwrap()).unwrap();
        let one_step = evolve_gaussian(&direct, m_direct, &packet).unwrap();
        assert!((two_step.a - one_step.a).norm() < 1e-8);
        assert!((two_step.b - one_step.b).norm() < 1e-8);
        let phase_diff = (two_step.log_norm - one_step.log_norm).exp();
        assert!((phase_diff - c64(1.0, 0.0)).norm() < 1e-8);

        // The composed classical pair matches the direct one too.
        let comp = compose_pair(&p21, &p10).unwrap();
        assert!((comp.s - direct.s).abs() < 1e-9);
    }

    #[test]
    fn caustic_continuity_tiho() {
        let packet = GaussianPacket::coherent(1.0, 0.5, 0.2);
        let t_star = PI;
        let caustic_pair = tiho_pair(1.0, 0.0, t_star);
        let through = evolve_gaussian(&caustic_pair, 1, &packet).unwrap();
        for &dt in &[1e-4, -1e-4] {
            let t = t_star + dt;
            let pair = tiho_pair(1.0, 0.0, t);
            let m = if dt > 0.0 { 1 } else { 0 };
            let regular = evolve_gaussian(&pair, m, &packet).unwrap();
            // Bridge the remaining interval from the caustic point.
            let tail = tiho_pair(1.0, t_star, t);
            let m_tail = if dt > 0.0 { 0 } else { -1 };
            let via_caustic = evolve_gaussian(&tail, m_tail, &through).unwrap();
            assert!((regular.a - via_caustic.a).norm() < 1e-6, "dt = {dt}");
            assert!((regular.b - via_caustic.b).norm() < 1e-6);
            let phase = (regular.log_norm - via_caustic.log_norm).exp();
            assert!((phase - c64(1.0, 0.0)).norm() < 1e-6);
        }
    }

    #[test]
    fn caustic_continuity_mathieu() {
        // A caustic of a genuinely time-dependent profile, where c_dot at
        // the caustic does not vanish and the q^2 phase of the delta kernel
        // matters.
        let profile = FrequencyProfile::mathieu(2.0, 0.3);
        let ep = ep_from_fundamental(EPQuadraticForm::identity(), &profile, 0.0).unwrap();
        let zeros = locate_s_zeros(&ep, 0.0, (0.1, 6.0)).unwrap();
        let t_star = zeros[0];
        let caustic_pair = solve_fundamental(&profile, 0.0, t_star, 1e-12).unwrap();
        assert!(caustic_pair.s.abs() < 1e-9);
        assert!(
            caustic_pair.c_dot.abs() > 1e-3,
            "test needs a caustic with nonzero c_dot"
        );
        let packet = GaussianPacket::coherent(1.0, -0.3, 0.7);
        let through = evolve_gaussian(&caustic_pair, 1, &packet).unwrap();

        let t = t_star + 1e-4;
        let pair = solve_fundamental(&profile, 0.0, t, 1e-12).unwrap();
        let regular = evolve_gaussian(&pair, 1, &packet).unwrap();
        let tail = solve_fundamental(&profile, t_star, t, 1e-12).unwrap();
        let via_caustic = evolve_gaussian(&tail, 0, &through).unwrap();
        assert!((regular.a - via_caustic.a).norm() < 1e-6);
        assert!((regular.b - via_caustic.b).norm() < 1e-6);
        let phase = (regular.log_norm - via_caustic.log_norm).exp();
        assert!((phase - c64(1.0, 0.0)).norm() < 1e-6);
    }

    #[test]
    fn identity_pair_is_identity() {
        let packet = GaussianPacket::coherent(1.0, 1.0, -2.0);
        let out = evolve_gaussian(&FundamentalPair::identity(0.5), 0, &packet).unwrap();
        assert_eq!(out.a, packet.a);
        assert_eq!(out.b, packet.b);
        assert_eq!(out.log_norm, packet.log_norm);
    }

    #[test]
    fn factorization_is_rho_independent_and_matches_kernel() {
        let profile = FrequencyProfile::mathieu(2.0, 0.3);
        let (t0, t, q, q0) = (0.0, 2.0, 0.7, -0.4);
        let pair = solve_fundamental(&profile, t0, t, 1e-12).unwrap();
        let m = index_for(&profile, t0, t);
        let direct = kernel(&pair, m, q, q0).unwrap();

        for form in [
            EPQuadraticForm::identity(),
            EPQuadraticForm::new(1.4, 0.3, 1.0).unwrap(),
        ] {
            let ep = ep_from_fundamental(form, &profile, t0).unwrap();
            let k = kernel_via_factorization(&ep, t0, t, q, q0).unwrap();
            assert!((k - direct).norm() < 1e-8, "form {form:?}");
        }
    }

    #[test]
    fn factorization_matches_bessel_kernel() {
        let profile = FrequencyProfile::gowdy_t3(1.0);
        let (t0, t, q, q0) = (1.0, 2.0, 0.6, 0.9);
        let pair = closed_form_pair(&profile, t0, t).unwrap();
        let m = index_for(&profile, t0, t);
        let direct = kernel(&pair, m, q, q0).unwrap();
        let ep = canonical_ep(&profile).unwrap();
        let k = kernel_via_factorization(&ep, t0, t, q, q0).unwrap();
        assert!((k - direct).norm() < 1e-7);
    }

    #[test]
    fn factorization_with_unit_rho_is_feynman_soriau() {
        // kappa = 1 with the canonical EP point rho = 1: the dilations drop
        // out and the phase integral is t - t0.
        let profile = FrequencyProfile::constant(1.0);
        let ep = canonical_ep(&profile).unwrap();
        let k = kernel_via_factorization(&ep, 0.0, 1.2, 0.4, -1.0).unwrap();
        let (sn, cs) = 1.2f64.sin_cos();
        let expect = inv_sqrt_two_pi_i()
            / Complex64::new(sn, 0.0).sqrt()
            * (0.5 * I / sn * ((0.16 + 1.0) * cs - 2.0 * 0.4 * (-1.0))).exp();
        assert!((k - expect).norm() < 1e-10);
    }

    #[test]
    fn evolution_equation_residuals() {
        // The second-order time difference is the dominant truncation term
        // (the kernel phase varies fastest in t near small s), so the time
        // step is taken finer than the spatial one.
        let qs: Vec<f64> = (0..9).map(|i| -2.0 + 0.5 * i as f64).collect();
        let ts = [0.3, 0.6, 0.9, 1.2];
        let r =
            pde_residual(&FrequencyProfile::constant(1.0), 0.0, &qs, &ts, 1e-3, 1e-4).unwrap();
        assert!(r < 1e-4, "TIHO residual {r}");
        let r = pde_residual(&FrequencyProfile::free(), 0.0, &qs, &ts, 1e-3, 1e-4).unwrap();
        assert!(r < 1e-4, "free residual {r}");
        let r = pde_residual(&FrequencyProfile::mathieu(2.0, 0.3), 0.0, &qs, &ts, 1e-3, 1e-4)
            .unwrap();
        assert!(r < 1e-3, "Mathieu residual {r}");
    }

    #[test]
    fn vacuum_element_in_measure_rep() {
        // <phi0|U|phi0> computed as a Gaussian overlap must reproduce the
        // TIHO phase e^{-i omega dt / 2}.
        let packet = GaussianPacket::ground_state(1.0);
        let pair = tiho_pair(1.0, 0.0, 1.0);
        let evolved = evolve_gaussian(&pair, 0, &packet).unwrap();
        let amp = packet.overlap(&evolved);
        assert!((amp - Complex64::from_polar(1.0, -0.5)).norm() < 1e-10);
    }
}
