//! Ermakov-Pinney envelopes: positive solutions rho of
//! `rho'' + kappa(t) rho = rho^{-3}` built from fundamental pairs, and the
//! reconstruction of (c, s) from any such rho.
//!
//! The bridge in both directions is the phase integral
//! `Phi(t0 -> t) = int dtau / rho^2(tau)`: zeros of `s(., t0)` sit exactly
//! at `Phi = 0 (mod pi)` no matter which rho was chosen, which is also how
//! the propagator's caustics are located.

use crate::classical::{solve_fundamental, FundamentalPair};
use crate::error::{Error, Result};
use crate::profile::FrequencyProfile;
use crate::quad;
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

/// A positive definite quadratic form with unit determinant; the general
/// analytic Ermakov-Pinney solution over a fundamental pair is
/// `rho^2 = a11 c^2 + 2 a12 c s + a22 s^2`.
#[derive(Clone, Copy, Debug)]
pub struct EPQuadraticForm {
    a11: f64,
    a12: f64,
    a22: f64,
}

impl EPQuadraticForm {
    /// Validates positivity and rescales to det = 1; also returns the
    /// multiplicative factor that was applied to the coefficients.
    pub fn normalized(a11: f64, a12: f64, a22: f64) -> Result<(Self, f64)> {
        let det = a11 * a22 - a12 * a12;
        if !(a11 > 0.0 && det > 0.0) {
            return Err(Error::Usage(format!(
                "EP form must be positive definite: a11 = {a11}, det = {det}"
            )));
        }
        let scale = 1.0 / det.sqrt();
        Ok((
            EPQuadraticForm {
                a11: a11 * scale,
                a12: a12 * scale,
                a22: a22 * scale,
            },
            scale,
        ))
    }

    pub fn new(a11: f64, a12: f64, a22: f64) -> Result<Self> {
        Ok(Self::normalized(a11, a12, a22)?.0)
    }

    pub fn identity() -> Self {
        EPQuadraticForm {
            a11: 1.0,
            a12: 0.0,
            a22: 1.0,
        }
    }

    pub fn coefficients(&self) -> (f64, f64, f64) {
        (self.a11, self.a12, self.a22)
    }

    /// (rho, rho_dot) from pair values at one time.
    fn eval(&self, p: &FundamentalPair) -> (f64, f64) {
        let rho2 = self.a11 * p.c * p.c + 2.0 * self.a12 * p.c * p.s + self.a22 * p.s * p.s;
        let rho = rho2.sqrt();
        let d_half = self.a11 * p.c * p.c_dot
            + self.a12 * (p.c_dot * p.s + p.c * p.s_dot)
            + self.a22 * p.s * p.s_dot;
        (rho, d_half / rho)
    }
}

enum EPSource {
    Form {
        form: EPQuadraticForm,
        anchor: f64,
    },
    ClosedForm {
        label: String,
    },
}

type RhoFn = dyn Fn(f64) -> Result<(f64, f64)> + Send + Sync;

/// An Ermakov-Pinney solution: `rho(t) > 0` with its derivative, tied to a
/// frequency profile.  Phase integrals are cached per (t0, t); the cache is
/// an optimization only, never a semantic dependency, and is safe to hit
/// from multiple worker threads.
pub struct EPSolution {
    profile: FrequencyProfile,
    source: EPSource,
    rho_fn: Arc<RhoFn>,
    phase_cache: Mutex<HashMap<(u64, u64), f64>>,
}

/// Builds the EP solution `rho^2 = a11 c^2 + 2 a12 c s + a22 s^2` with the
/// pair anchored at `t0`; rho_dot comes from differentiating under the root
/// using (c_dot, s_dot), never from numerical differencing.
pub fn ep_from_fundamental(
    form: EPQuadraticForm,
    profile: &FrequencyProfile,
    t0: f64,
) -> Result<EPSolution> {
    profile.check_time(t0)?;
    let tol = 1e-11;
    let rho_profile = profile.clone();
    let rho_fn = Arc::new(move |t: f64| -> Result<(f64, f64)> {
        let pair = solve_fundamental(&rho_profile, t0, t, tol)?;
        Ok(form.eval(&pair))
    });
    Ok(EPSolution {
        profile: profile.clone(),
        source: EPSource::Form { form, anchor: t0 },
        rho_fn,
        phase_cache: Mutex::new(HashMap::new()),
    })
}

impl EPSolution {
    /// Wraps a model-supplied closed-form rho (e.g. the Bessel/Legendre
    /// envelopes of the Gowdy models).
    pub fn from_closed_form(
        profile: &FrequencyProfile,
        label: impl Into<String>,
        rho_fn: Arc<RhoFn>,
    ) -> EPSolution {
        EPSolution {
            profile: profile.clone(),
            source: EPSource::ClosedForm {
                label: label.into(),
            },
            rho_fn,
            phase_cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn profile(&self) -> &FrequencyProfile {
        &self.profile
    }

    pub fn description(&self) -> String {
        match &self.source {
            EPSource::Form { form, anchor, .. } => format!(
                "form(a11={}, a12={}, a22={}) @ t0={}",
                form.a11, form.a12, form.a22, anchor
            ),
            EPSource::ClosedForm { label } => label.clone(),
        }
    }

    pub fn rho(&self, t: f64) -> Result<f64> {
        self.profile.check_time(t)?;
        let (rho, _) = (self.rho_fn)(t)?;
        if !(rho > 0.0) {
            return Err(Error::Invariant(format!("rho({t}) = {rho} is not positive")));
        }
        Ok(rho)
    }

    pub fn rho_and_dot(&self, t: f64) -> Result<(f64, f64)> {
        self.profile.check_time(t)?;
        let (rho, dot) = (self.rho_fn)(t)?;
        if !(rho > 0.0) {
            return Err(Error::Invariant(format!("rho({t}) = {rho} is not positive")));
        }
        Ok((rho, dot))
    }
}

/// `rho'' + kappa rho - rho^{-3}` at `t`, with `rho''` from a centered
/// finite difference of the analytic `rho_dot`.
pub fn ep_residual(ep: &EPSolution, t: f64) -> Result<f64> {
    ep.profile.check_time(t)?;
    let h = 1e-6 * t.abs().max(1.0);
    let (t_minus, t_plus) = ep.profile.interval();
    if !(t - h > t_minus && t + h < t_plus) {
        return Err(Error::Usage(format!(
            "t = {t} is within one finite-difference step ({h:.1e}) of an interval endpoint"
        )));
    }
    let (rho, _) = ep.rho_and_dot(t)?;
    let (_, dot_p) = ep.rho_and_dot(t + h)?;
    let (_, dot_m) = ep.rho_and_dot(t - h)?;
    let rho_ddot = (dot_p - dot_m) / (2.0 * h);
    Ok(rho_ddot + ep.profile.kappa(t)? * rho - rho.powi(-3))
}

/// `Phi(t0 -> t) = int_{t0}^{t} dtau / rho^2(tau)` by adaptive quadrature,
/// additive in `t` and cached per endpoint pair.
pub fn phase_integral(ep: &EPSolution, t0: f64, t: f64) -> Result<f64> {
    ep.profile.check_time(t0)?;
    ep.profile.check_time(t)?;
    if t == t0 {
        return Ok(0.0);
    }
    let key = (t0.to_bits(), t.to_bits());
    if let Some(&v) = ep.phase_cache.lock().unwrap().get(&key) {
        return Ok(v);
    }
    let integrand = |tau: f64| -> f64 {
        match (ep.rho_fn)(tau) {
            Ok((rho, _)) if rho > 0.0 => 1.0 / (rho * rho),
            _ => f64::NAN,
        }
    };
    let phi = quad::integrate(&integrand, t0, t, 1e-10, 1e-13)?;
    if !phi.is_finite() {
        return Err(Error::Numeric(format!(
            "phase integral over [{t0}, {t}] did not converge"
        )));
    }
    ep.phase_cache.lock().unwrap().insert(key, phi);
    Ok(phi)
}

/// Reconstructs the fundamental pair from rho alone:
/// `c = (rho_t/rho_0) cos Phi - rho_t rhodot_0 sin Phi`,
/// `s = rho_t rho_0 sin Phi`, with the derivatives obtained by
/// differentiating these forms analytically (numerically stable even at
/// zeros of s).
pub fn fundamental_from_ep(ep: &EPSolution, t0: f64, t: f64) -> Result<FundamentalPair> {
    let (rho0, dot0) = ep.rho_and_dot(t0)?;
    let (rho_t, dot_t) = ep.rho_and_dot(t)?;
    let phi = phase_integral(ep, t0, t)?;
    let (sin_phi, cos_phi) = phi.sin_cos();
    let c = (rho_t / rho0) * cos_phi - rho_t * dot0 * sin_phi;
    let s = rho_t * rho0 * sin_phi;
    // d/dt: Phi' = 1/rho_t^2.
    let c_dot = dot_t * (cos_phi / rho0 - dot0 * sin_phi)
        - (sin_phi / rho0 + dot0 * cos_phi) / rho_t;
    let s_dot = dot_t * rho0 * sin_phi + (rho0 / rho_t) * cos_phi;
    Ok(FundamentalPair {
        t0,
        t,
        c,
        s,
        c_dot,
        s_dot,
    })
}

/// All times `z` in the window `(lo, hi]` where `s(z, t0) = 0`, i.e. where
/// `Phi(t0 -> z)` is an integer multiple of pi.  These are the caustics of
/// the quantum propagator.
pub fn locate_s_zeros(ep: &EPSolution, t0: f64, window: (f64, f64)) -> Result<Vec<f64>> {
    let (lo, hi) = window;
    if !(lo < hi) {
        return Err(Error::Usage(format!("empty window ({lo}, {hi}]")));
    }
    ep.profile.check_time(lo)?;
    ep.profile.check_time(hi)?;
    let phi_lo = phase_integral(ep, t0, lo)?;
    let phi_hi = phase_integral(ep, t0, hi)?;
    let pi = std::f64::consts::PI;
    // Integers k with phi_lo < k pi <= phi_hi (Phi is strictly increasing);
    // a zero sitting exactly on the open left edge is excluded, one on the
    // closed right edge included (both up to a relative jitter guard).
    let eps = 1e-11;
    let k_start = (phi_lo / pi + eps).floor() as i64 + 1;
    let k_end = (phi_hi / pi + eps).floor() as i64;
    let mut zeros = Vec::new();
    for k in k_start..=k_end {
        let target = k as f64 * pi;
        // Bisection on the monotone Phi.
        let (mut a, mut b) = (lo, hi);
        let (mut fa, _fb) = (phi_lo - target, phi_hi - target);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            let fm = phase_integral(ep, t0, m)? - target;
            if fa * fm <= 0.0 {
                b = m;
            } else {
                a = m;
                fa = fm;
            }
            if b - a < 1e-13 * (1.0 + m.abs()) {
                break;
            }
        }
        zeros.push(0.5 * (a + b));
    }
    Ok(zeros)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn identity_ep(profile: &FrequencyProfile, t0: f64) -> EPSolution {
        ep_from_fundamental(EPQuadraticForm::identity(), profile, t0).unwrap()
    }

    #[test]
    fn identity_form_constant_kappa_gives_unit_rho() {
        let p = FrequencyProfile::constant(1.0);
        let ep = identity_ep(&p, 0.0);
        for t in [-3.0, 0.5, 2.0, 9.0] {
            assert!((ep.rho(t).unwrap() - 1.0).abs() < 1e-9, "rho({t})");
        }
    }

    #[test]
    fn identity_form_free_particle() {
        let p = FrequencyProfile::free();
        let ep = identity_ep(&p, 0.0);
        for t in [0.0f64, 1.0, -2.5, 4.0] {
            let expect = (1.0 + t * t).sqrt();
            assert!((ep.rho(t).unwrap() - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn squeezed_form_oscillates_with_small_residual() {
        let p = FrequencyProfile::constant(1.0);
        let form = EPQuadraticForm::new(4.0, 0.0, 0.25).unwrap();
        let ep = ep_from_fundamental(form, &p, 0.0).unwrap();
        // rho^2 = 4 cos^2 + sin^2/4: period pi, extremes 1/2 and 2.
        assert!((ep.rho(0.0).unwrap() - 2.0).abs() < 1e-9);
        assert!((ep.rho(PI / 2.0).unwrap() - 0.5).abs() < 1e-9);
        let mut t = 0.1;
        while t < 10.0 {
            assert!(ep_residual(&ep, t).unwrap().abs() < 1e-8, "residual at {t}");
            t += 0.83;
        }
    }

    #[test]
    fn normalization_reports_scaling() {
        let (form, scale) = EPQuadraticForm::normalized(8.0, 0.0, 2.0).unwrap();
        assert!((scale - 0.25).abs() < 1e-15);
        let (a11, a12, a22) = form.coefficients();
        assert!((a11 * a22 - a12 * a12 - 1.0).abs() < 1e-12);
        assert!(EPQuadraticForm::new(1.0, 2.0, 1.0).is_err());
        assert!(EPQuadraticForm::new(-1.0, 0.0, -2.0).is_err());
    }

    #[test]
    fn residual_of_manual_closed_forms() {
        // rho = 1 for kappa = 1.
        let p = FrequencyProfile::constant(1.0);
        let ep = EPSolution::from_closed_form(&p, "unit", Arc::new(|_| Ok((1.0, 0.0))));
        assert!(ep_residual(&ep, 2.0).unwrap().abs() < 1e-12);

        // rho = sqrt(1 + t^2) for kappa = 0:
        // rho_dot = t/sqrt(1+t^2), and the EP equation holds exactly.
        let p = FrequencyProfile::free();
        let ep = EPSolution::from_closed_form(
            &p,
            "free",
            Arc::new(|t| {
                let r = (1.0 + t * t).sqrt();
                Ok((r, t / r))
            }),
        );
        for t in [-1.0, 0.0, 0.7, 3.0] {
            assert!(ep_residual(&ep, t).unwrap().abs() < 1e-6);
        }
    }

    #[test]
    fn residual_with_bessel_envelope() {
        // The canonical Gowdy 3-torus envelope
        // rho = sqrt(pi t (J0^2 + Y0^2)/2) at omega = 1.
        let p = FrequencyProfile::gowdy_t3(1.0);
        let ep = EPSolution::from_closed_form(
            &p,
            "bessel",
            Arc::new(|t| {
                let b = crate::special::bessel_j0y0(t)?;
                let m = b.j0 * b.j0 + b.y0 * b.y0;
                // d/dt [t m]: m + t * 2(J0 J0' + Y0 Y0') with J0' = -J1 etc.
                let md = -2.0 * (b.j0 * b.j1 + b.y0 * b.y1);
                let rho = (0.5 * PI * t * m).sqrt();
                let dot = 0.25 * PI * (m + t * md) / rho;
                Ok((rho, dot))
            }),
        );
        assert!(ep_residual(&ep, 1.0).unwrap().abs() < 1e-6);
        assert!(ep_residual(&ep, 5.0).unwrap().abs() < 1e-6);
    }

    #[test]
    fn residual_near_endpoint_is_domain_error() {
        let p = FrequencyProfile::gowdy_t3(1.0);
        let ep = identity_ep(&p, 1.0);
        assert!(matches!(ep_residual(&ep, 1e-8), Err(Error::Usage(_))));
    }

    #[test]
    fn phase_integral_antiderivatives() {
        let p = FrequencyProfile::constant(1.0);
        let ep = identity_ep(&p, 0.0);
        assert!((phase_integral(&ep, 0.0, 2.5).unwrap() - 2.5).abs() < 1e-9);
        assert!((phase_integral(&ep, 1.0, -1.0).unwrap() + 2.0).abs() < 1e-9);

        let p = FrequencyProfile::free();
        let ep = identity_ep(&p, 0.0);
        for t in [0.5, 2.0, 5.0] {
            assert!(
                (phase_integral(&ep, 0.0, t).unwrap() - t.atan()).abs() < 1e-8,
                "arctan mismatch at {t}"
            );
        }
        // Additivity.
        let a = phase_integral(&ep, 0.0, 1.0).unwrap();
        let b = phase_integral(&ep, 1.0, 4.0).unwrap();
        let c = phase_integral(&ep, 0.0, 4.0).unwrap();
        assert!((a + b - c).abs() < 1e-10);
    }

    #[test]
    fn reconstruction_recovers_cos_sin() {
        let p = FrequencyProfile::constant(1.0);
        let ep = identity_ep(&p, 0.0);
        for t in [0.3, 1.0, 4.0] {
            let pair = fundamental_from_ep(&ep, 0.0, t).unwrap();
            assert!((pair.c - t.cos()).abs() < 1e-8);
            assert!((pair.s - t.sin()).abs() < 1e-8);
            assert!((pair.c_dot + t.sin()).abs() < 1e-8);
            assert!((pair.s_dot - t.cos()).abs() < 1e-8);
        }
    }

    #[test]
    fn reconstruction_is_rho_independent() {
        let p = FrequencyProfile::constant(1.0);
        let forms = [
            EPQuadraticForm::identity(),
            EPQuadraticForm::new(4.0, 0.0, 0.25).unwrap(),
            EPQuadraticForm::new(2.0, 0.7, 1.0).unwrap(),
        ];
        let direct = solve_fundamental(&p, 0.0, 1.0, 1e-11).unwrap();
        for form in forms {
            let ep = ep_from_fundamental(form, &p, 0.0).unwrap();
            let pair = fundamental_from_ep(&ep, 0.0, 1.0).unwrap();
            assert!((pair.c - direct.c).abs() < 1e-7);
            assert!((pair.s - direct.s).abs() < 1e-7);
            assert!((pair.c_dot - direct.c_dot).abs() < 1e-7);
            assert!((pair.s_dot - direct.s_dot).abs() < 1e-7);
            // Remark-1 combination equals s_dot.
            let (rho0, _) = ep.rho_and_dot(0.0).unwrap();
            let (rho_t, dot_t) = ep.rho_and_dot(1.0).unwrap();
            let phi = phase_integral(&ep, 0.0, 1.0).unwrap();
            let combo = (rho0 / rho_t) * phi.cos() + rho0 * dot_t * phi.sin();
            assert!((combo - direct.s_dot).abs() < 1e-7);
        }
    }

    #[test]
    fn reconstruction_anchored_away_from_form_anchor() {
        // Theorem-1 reconstruction works for any (t0, t), not just the
        // anchor the form was built at.
        let p = FrequencyProfile::mathieu(1.5, 0.3);
        let ep = ep_from_fundamental(EPQuadraticForm::identity(), &p, 0.0).unwrap();
        let direct = solve_fundamental(&p, 2.0, 3.5, 1e-11).unwrap();
        let rec = fundamental_from_ep(&ep, 2.0, 3.5).unwrap();
        assert!((rec.c - direct.c).abs() < 1e-7);
        assert!((rec.s - direct.s).abs() < 1e-7);
        assert!((rec.wronskian() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn zeros_of_s_found_at_phase_multiples_of_pi() {
        let p = FrequencyProfile::constant(1.0);
        let ep = identity_ep(&p, 0.0);
        let zeros = locate_s_zeros(&ep, 0.0, (1e-9, 7.0)).unwrap();
        assert_eq!(zeros.len(), 2);
        assert!((zeros[0] - PI).abs() < 1e-9);
        assert!((zeros[1] - 2.0 * PI).abs() < 1e-9);

        // Free particle: Phi = arctan(t) < pi/2, no zeros ahead of t0.
        let p = FrequencyProfile::free();
        let ep = identity_ep(&p, 0.0);
        assert!(locate_s_zeros(&ep, 0.0, (0.1, 50.0)).unwrap().is_empty());
    }

    #[test]
    fn zeros_agree_with_sign_changes_of_ode_solution() {
        // Gowdy S model with omega' = 5: compare the phase-integral zero
        // finder against a sign scan of the ODE-computed s.
        let p = FrequencyProfile::gowdy_s_from_omega_prime(5.0).unwrap();
        let t0 = 0.4;
        let ep = ep_from_fundamental(EPQuadraticForm::identity(), &p, t0).unwrap();
        let zeros = locate_s_zeros(&ep, t0, (t0 + 1e-6, 3.0)).unwrap();
        let samples = crate::classical::sample_solution(&p, t0, 3.0, false, 1e-11).unwrap();
        let count = crate::classical::index_of(&samples, t0, 3.0).unwrap();
        assert_eq!(zeros.len() as i64, count.m);
        // Each reported zero is a sign change of the sampled s.
        for z in &zeros {
            let s_before = samples
                .iter()
                .filter(|(t, _)| *t < z - 1e-4)
                .next_back()
                .unwrap()
                .1;
            let s_after = samples.iter().find(|(t, _)| *t > z + 1e-4).unwrap().1;
            assert!(s_before * s_after < 0.0, "no sign change around {z}");
        }
    }

    #[test]
    fn zero_on_window_edges_follows_half_open_convention() {
        let p = FrequencyProfile::constant(1.0);
        let ep = identity_ep(&p, 0.0);
        // Right edge exactly at a zero: included.
        let zeros = locate_s_zeros(&ep, 0.0, (1.0, PI)).unwrap();
        assert_eq!(zeros.len(), 1);
        // Left edge exactly at a zero: excluded.
        let zeros = locate_s_zeros(&ep, 0.0, (PI, 4.0)).unwrap();
        assert!(zeros.is_empty());
    }

    #[test]
    fn concurrent_phase_queries_are_consistent() {
        let p = FrequencyProfile::constant(1.0);
        let ep = Arc::new(identity_ep(&p, 0.0));
        let mut handles = Vec::new();
        for i in 0..4 {
            let ep = Arc::clone(&ep);
            handles.push(std::thread::spawn(move || {
                let t = 1.0 + i as f64;
                phase_integral(&ep, 0.0, t).unwrap()
            }));
        }
        for (i, h) in handles.into_iter().enumerate() {
            let v = h.join().unwrap();
            assert!((v - (1.0 + i as f64)).abs() < 1e-9);
        }
    }
}
