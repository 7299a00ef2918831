//! Closed-form solutions for the built-in model families, Mathieu
//! stability analysis, and the canonical Ermakov-Pinney envelopes.
//!
//! Each family with a closed form is expressed through a basis (u1, u2) of
//! the oscillator equation with known Wronskian `W = u1 u2' - u1' u2`; the
//! anchored pair then follows from
//! `c = (u2'(t0) u1 - u1'(t0) u2)/W`, `s = (u1(t0) u2 - u2(t0) u1)/W`,
//! which builds the correct Cauchy data in by construction.

use crate::classical::FundamentalPair;
use crate::ep::EPSolution;
use crate::error::{Error, Result};
use crate::ode::{self, OdeOptions};
use crate::profile::{FrequencyProfile, ProfileKind};
use crate::special;
use num_complex::Complex64;
use std::sync::Arc;

/// Basis values (u1, u2, u1', u2') at one time.
#[derive(Clone, Copy)]
struct Basis {
    u1: f64,
    u2: f64,
    du1: f64,
    du2: f64,
}

/// sqrt(t) J0(omega t), sqrt(t) Y0(omega t); Wronskian 2/pi.
fn t3_basis(omega: f64, t: f64) -> Result<Basis> {
    let b = special::bessel_j0y0(omega * t)?;
    let rt = t.sqrt();
    Ok(Basis {
        u1: rt * b.j0,
        u2: rt * b.y0,
        du1: 0.5 * b.j0 / rt - omega * rt * b.j1,
        du2: 0.5 * b.y0 / rt - omega * rt * b.y1,
    })
}

/// sqrt(sin t) P_nu(cos t), sqrt(sin t) Q_nu(cos t) with
/// nu = (omega' - 1)/2, omega' = sqrt(1 + 4 omega^2); Wronskian -1.
fn gowdy_s_basis(omega: f64, t: f64) -> Result<Basis> {
    let omega_prime = (1.0 + 4.0 * omega * omega).sqrt();
    let nu = 0.5 * (omega_prime - 1.0);
    let (sn, cs) = t.sin_cos();
    if !(sn > 0.0) {
        return Err(Error::Usage(format!("gowdy_s basis needs t in (0, pi), got {t}")));
    }
    let l = special::legendre_pq(nu, cs)?;
    let rs = sn.sqrt();
    // d/dt [sqrt(sin t) F(cos t)] = cos t F/(2 sqrt(sin t)) - sin t^{3/2} F'(cos t).
    Ok(Basis {
        u1: rs * l.p,
        u2: rs * l.q,
        du1: 0.5 * cs * l.p / rs - sn * rs * l.dp,
        du2: 0.5 * cs * l.q / rs - sn * rs * l.dq,
    })
}

fn pair_from_basis(b0: Basis, bt: Basis, w: f64, t0: f64, t: f64) -> FundamentalPair {
    FundamentalPair {
        t0,
        t,
        c: (b0.du2 * bt.u1 - b0.du1 * bt.u2) / w,
        s: (b0.u1 * bt.u2 - b0.u2 * bt.u1) / w,
        c_dot: (b0.du2 * bt.du1 - b0.du1 * bt.du2) / w,
        s_dot: (b0.u1 * bt.du2 - b0.u2 * bt.du1) / w,
    }
}

/// Evaluates the model's closed-form fundamental pair.  Supported kinds:
/// constant (including free and tachyonic), gowdy_t3 (Bessel basis) and
/// gowdy_s (Legendre basis).  Mathieu has no closed form (ODE route only).
pub fn closed_form_pair(profile: &FrequencyProfile, t0: f64, t: f64) -> Result<FundamentalPair> {
    profile.check_time(t0)?;
    profile.check_time(t)?;
    match profile.kind() {
        ProfileKind::Constant { kappa0 } => Ok(crate::classical::closed_form_constant(
            *kappa0, t0, t,
        )),
        ProfileKind::GowdyT3 { omega } => Ok(pair_from_basis(
            t3_basis(*omega, t0)?,
            t3_basis(*omega, t)?,
            std::f64::consts::FRAC_2_PI,
            t0,
            t,
        )),
        ProfileKind::GowdyS { omega } => Ok(pair_from_basis(
            gowdy_s_basis(*omega, t0)?,
            gowdy_s_basis(*omega, t)?,
            -1.0,
            t0,
            t,
        )),
        ProfileKind::Mathieu { .. } => Err(Error::Usage(
            "mathieu profiles have no closed form; use solve_fundamental".into(),
        )),
        ProfileKind::Table { .. } => Err(Error::Usage(
            "tabulated profiles have no closed form; use solve_fundamental".into(),
        )),
    }
}

/// The canonical Ermakov-Pinney envelope value (rho, rho_dot) at `t`:
/// `rho = kappa0^{-1/4}` for constant kappa0 > 0 (so `1/sqrt|l|` for a
/// Minkowski mode), `rho = sqrt(pi t (J0^2 + Y0^2)/2)` for gowdy_t3 and
/// `rho = sqrt(sin t (pi P^2 + (4/pi) Q^2)/2)` for gowdy_s.
pub fn canonical_ep_point(profile: &FrequencyProfile, t: f64) -> Result<(f64, f64)> {
    profile.check_time(t)?;
    match profile.kind() {
        ProfileKind::Constant { kappa0 } => {
            if *kappa0 > 0.0 {
                Ok((kappa0.powf(-0.25), 0.0))
            } else {
                Err(Error::Usage(
                    "no canonical EP choice for free/tachyonic models; supply a form".into(),
                ))
            }
        }
        ProfileKind::GowdyT3 { omega } => {
            let b = t3_basis(*omega, t)?;
            let half_pi = std::f64::consts::FRAC_PI_2;
            let rho = (half_pi * (b.u1 * b.u1 + b.u2 * b.u2)).sqrt();
            let dot = half_pi * (b.u1 * b.du1 + b.u2 * b.du2) / rho;
            Ok((rho, dot))
        }
        ProfileKind::GowdyS { omega } => {
            let b = gowdy_s_basis(*omega, t)?;
            let (a, c) = (std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_2_PI);
            let rho = (a * b.u1 * b.u1 + c * b.u2 * b.u2).sqrt();
            let dot = (a * b.u1 * b.du1 + c * b.u2 * b.du2) / rho;
            Ok((rho, dot))
        }
        _ => Err(Error::Usage(
            "no canonical EP form for this profile kind; supply a quadratic form".into(),
        )),
    }
}

/// Wraps [`canonical_ep_point`] as a reusable [`EPSolution`].
pub fn canonical_ep(profile: &FrequencyProfile) -> Result<EPSolution> {
    // Probe once so unsupported kinds fail eagerly.
    let (t_minus, t_plus) = profile.interval();
    let probe = if t_minus.is_finite() && t_plus.is_finite() {
        0.5 * (t_minus + t_plus)
    } else if t_minus.is_finite() {
        t_minus + 1.0
    } else if t_plus.is_finite() {
        t_plus - 1.0
    } else {
        0.0
    };
    canonical_ep_point(profile, probe)?;
    let p = profile.clone();
    Ok(EPSolution::from_closed_form(
        profile,
        "canonical",
        Arc::new(move |t| canonical_ep_point(&p, t)),
    ))
}

/// Outcome of integrating the Mathieu system over one period pi.
#[derive(Clone, Copy, Debug)]
pub struct MonodromyResult {
    /// c(pi, 0) + s_dot(pi, 0).
    pub trace: f64,
    /// Characteristic exponent r with 2 cos(pi r) = trace (complex when
    /// |trace| > 2).
    pub exponent: Complex64,
    /// |trace| <= 2: bounded quasi-periodic solutions.
    pub stable: bool,
}

/// Monodromy of `u'' + (a - 2b cos 2t) u = 0` over the period pi.
pub fn mathieu_monodromy(a: f64, b: f64) -> Result<MonodromyResult> {
    let f = move |t: f64, y: &[f64; 4]| {
        let k = a - 2.0 * b * (2.0 * t).cos();
        [y[1], -k * y[0], y[3], -k * y[2]]
    };
    let y = ode::integrate(
        &f,
        0.0,
        std::f64::consts::PI,
        [1.0, 0.0, 0.0, 1.0],
        &OdeOptions::with_tol(1e-12),
        &mut |_| {},
    )?;
    let det = y[0] * y[3] - y[1] * y[2];
    if (det - 1.0).abs() > 1e-9 {
        return Err(Error::Invariant(format!(
            "monodromy determinant drifted to {det}"
        )));
    }
    let trace = y[0] + y[3];
    let exponent = (Complex64::new(0.5 * trace, 0.0)).acos() / std::f64::consts::PI;
    Ok(MonodromyResult {
        trace,
        exponent,
        stable: trace.abs() <= 2.0,
    })
}

/// Finds `a` in `bracket` such that the Mathieu system at (a, b) admits a
/// periodic solution with integer exponent `r`, i.e. trace = 2 cos(pi r).
pub fn characteristic_value(r: i64, b: f64, bracket: (f64, f64)) -> Result<f64> {
    let target = 2.0 * (std::f64::consts::PI * r as f64).cos();
    let g = |a: f64| -> Result<f64> { Ok(mathieu_monodromy(a, b)?.trace - target) };
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) {
        return Err(Error::Usage(format!("bad bracket ({lo}, {hi})")));
    }
    let (mut flo, fhi) = (g(lo)?, g(hi)?);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo * fhi > 0.0 {
        // At b = 0 the instability tongues have zero width: the trace only
        // touches the target (double root).  Fall back to a golden-section
        // extremum search and accept if the residual actually vanishes.
        let sign = -flo.signum();
        let inv_phi = 0.5 * (5.0f64.sqrt() - 1.0);
        let (mut a1, mut b1) = (lo, hi);
        let mut x1 = b1 - inv_phi * (b1 - a1);
        let mut x2 = a1 + inv_phi * (b1 - a1);
        let (mut f1, mut f2) = (sign * g(x1)?, sign * g(x2)?);
        for _ in 0..120 {
            if f1 < f2 {
                a1 = x1;
                x1 = x2;
                f1 = f2;
                x2 = a1 + inv_phi * (b1 - a1);
                f2 = sign * g(x2)?;
            } else {
                b1 = x2;
                x2 = x1;
                f2 = f1;
                x1 = b1 - inv_phi * (b1 - a1);
                f1 = sign * g(x1)?;
            }
            if b1 - a1 < 1e-10 * (1.0 + a1.abs()) {
                break;
            }
        }
        let best = 0.5 * (a1 + b1);
        let fb = g(best)?;
        if fb.abs() <= 1e-8 {
            return Ok(best);
        }
        if fb * flo < 0.0 {
            // The tongue is narrower than the endpoint sampling: a genuine
            // crossing hides between lo and the extremum.  Bisect there.
            return characteristic_value(r, b, (lo, best));
        }
        return Err(Error::Usage(format!(
            "no root of trace - 2cos(pi r) in [{lo}, {hi}]"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo < 1e-12 * (1.0 + mid.abs()) {
            break;
        }
        let fm = g(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if flo * fm < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    let a = 0.5 * (lo + hi);
    let res = g(a)?.abs();
    if res > 1e-8 {
        return Err(Error::Numeric(format!(
            "root polish stalled: residual {res:.3e} at a = {a}"
        )));
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::solve_fundamental;
    use crate::ep::ep_residual;
    use std::f64::consts::PI;

    fn assert_pair_close(a: &FundamentalPair, b: &FundamentalPair, tol: f64, what: &str) {
        for (x, y, name) in [
            (a.c, b.c, "c"),
            (a.s, b.s, "s"),
            (a.c_dot, b.c_dot, "c_dot"),
            (a.s_dot, b.s_dot, "s_dot"),
        ] {
            assert!(
                (x - y).abs() < tol,
                "{what}: {name} differs: {x} vs {y}"
            );
        }
    }

    #[test]
    fn t3_identity_pair_at_equal_times() {
        let p = FrequencyProfile::gowdy_t3(1.0);
        let pair = closed_form_pair(&p, 1.5, 1.5).unwrap();
        assert!((pair.c - 1.0).abs() < 1e-12);
        assert!(pair.s.abs() < 1e-12);
        assert!(pair.c_dot.abs() < 1e-10);
        assert!((pair.s_dot - 1.0).abs() < 1e-12);
    }

    #[test]
    fn t3_closed_form_matches_ode() {
        let p = FrequencyProfile::gowdy_t3(1.0);
        let exact = closed_form_pair(&p, 1.0, 2.0).unwrap();
        let num = solve_fundamental(&p, 1.0, 2.0, 1e-11).unwrap();
        assert_pair_close(&exact, &num, 1e-7, "gowdy_t3 (1,2)");
    }

    #[test]
    fn gowdy_s_closed_form_matches_ode() {
        let p = FrequencyProfile::gowdy_s_from_omega_prime(5.0).unwrap();
        let exact = closed_form_pair(&p, 1.0, 2.0).unwrap();
        let num = solve_fundamental(&p, 1.0, 2.0, 1e-11).unwrap();
        assert_pair_close(&exact, &num, 1e-6, "gowdy_s (1,2)");
    }

    #[test]
    fn closed_forms_match_ode_on_grids() {
        // >= 20 (t0, t) pairs per closed-form family.
        let cases: Vec<(FrequencyProfile, Vec<f64>)> = vec![
            (
                FrequencyProfile::constant(2.0),
                vec![-4.0, -1.5, 0.0, 1.0, 3.0],
            ),
            (
                FrequencyProfile::tachyonic(1.1),
                vec![-2.0, -0.5, 0.5, 1.5, 3.0],
            ),
            (FrequencyProfile::free(), vec![-5.0, -1.0, 0.3, 2.0, 6.0]),
            (
                FrequencyProfile::gowdy_t3(1.0),
                vec![0.4, 1.0, 2.5, 5.0, 9.0],
            ),
            (
                FrequencyProfile::gowdy_s_from_omega_prime(5.0).unwrap(),
                vec![0.4, 1.0, 1.7, 2.3, 2.9],
            ),
        ];
        for (profile, times) in &cases {
            let mut checked = 0;
            for &t0 in times {
                for &t in times {
                    if t == t0 {
                        continue;
                    }
                    let exact = closed_form_pair(profile, t0, t).unwrap();
                    let num = solve_fundamental(profile, t0, t, 1e-11).unwrap();
                    assert_pair_close(&exact, &num, 1e-6, &format!("({t0}, {t})"));
                    assert!((exact.wronskian() - 1.0).abs() < 1e-9);
                    checked += 1;
                }
            }
            assert!(checked >= 20);
        }
    }

    #[test]
    fn mathieu_has_no_closed_form() {
        let p = FrequencyProfile::mathieu(1.0, 0.1);
        assert!(matches!(
            closed_form_pair(&p, 0.0, 1.0),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn t3_approaches_tiho_at_late_times() {
        // kappa -> omega^2 as t -> infinity: the closed form approaches the
        // constant-frequency pair on [50, 60].
        let p = FrequencyProfile::gowdy_t3(1.0);
        let mut worst: f64 = 0.0;
        let mut t = 50.0;
        while t <= 60.0 {
            let g = closed_form_pair(&p, 50.0, t).unwrap();
            let tiho = crate::classical::closed_form_constant(1.0, 50.0, t);
            worst = worst
                .max((g.c - tiho.c).abs())
                .max((g.s - tiho.s).abs());
            t += 0.25;
        }
        assert!(worst < 0.02, "late-time deviation {worst}");
    }

    #[test]
    fn canonical_ep_constant() {
        let p = FrequencyProfile::constant(4.0);
        let (rho, dot) = canonical_ep_point(&p, 1.0).unwrap();
        assert!((rho - 4.0f64.powf(-0.25)).abs() < 1e-15);
        assert_eq!(dot, 0.0);
        assert!(canonical_ep_point(&FrequencyProfile::free(), 0.0).is_err());
        assert!(canonical_ep_point(&FrequencyProfile::tachyonic(1.0), 0.0).is_err());
    }

    #[test]
    fn canonical_ep_residuals() {
        let p = FrequencyProfile::gowdy_t3(1.0);
        let ep = canonical_ep(&p).unwrap();
        for t in [0.3, 1.0, 4.0, 20.0] {
            assert!(
                ep_residual(&ep, t).unwrap().abs() < 1e-6,
                "t3 residual at {t}"
            );
        }
        let p = FrequencyProfile::gowdy_s_from_omega_prime(5.0).unwrap();
        let ep = canonical_ep(&p).unwrap();
        for t in [0.3, PI / 2.0, 2.4] {
            assert!(
                ep_residual(&ep, t).unwrap().abs() < 1e-6,
                "gowdy_s residual at {t}"
            );
        }
    }

    #[test]
    fn canonical_t3_envelope_flattens_at_late_times() {
        // rho -> 1/sqrt(omega) as the model approaches a TIHO.
        let p = FrequencyProfile::gowdy_t3(2.0);
        let (rho, dot) = canonical_ep_point(&p, 200.0).unwrap();
        assert!((rho - 2.0f64.powf(-0.5)).abs() < 1e-3, "rho = {rho}");
        assert!(dot.abs() < 1e-3);
    }

    #[test]
    fn monodromy_reduces_to_tiho_at_b0() {
        for omega in [0.5f64, 1.0, 1.7] {
            let m = mathieu_monodromy(omega * omega, 0.0).unwrap();
            assert!((m.trace - 2.0 * (PI * omega).cos()).abs() < 1e-9);
            // r = omega modulo the cos branch: compare cosines instead.
            let lhs = (PI * m.exponent).cos() * 2.0;
            assert!((lhs.re - m.trace).abs() < 1e-9);
            assert!(lhs.im.abs() < 1e-9);
        }
    }

    #[test]
    fn monodromy_stability_classification() {
        // The first instability tongue spans a in (1 - b + O(b^2), 1 + b +
        // O(b^2)); just outside it solutions are bounded, inside they grow.
        let m = mathieu_monodromy(1.2, 0.1).unwrap();
        assert!(m.stable, "(1.2, 0.1) should be stable, trace {}", m.trace);
        assert!(m.exponent.im.abs() < 1e-9);
        let unstable = mathieu_monodromy(1.0, 0.1).unwrap();
        assert!(!unstable.stable, "trace {}", unstable.trace);
        assert!(unstable.exponent.im.abs() > 1e-6);
    }

    #[test]
    fn small_b_solutions_stay_near_cosine() {
        // c(t) ~ cos(sqrt(a) t) for small b.
        let p = FrequencyProfile::mathieu(4.0, 0.01);
        let mut worst: f64 = 0.0;
        let mut t = 0.05;
        while t <= PI {
            let pair = solve_fundamental(&p, 0.0, t, 1e-10).unwrap();
            worst = worst.max((pair.c - (2.0 * t).cos()).abs());
            t += 0.05;
        }
        assert!(worst < 0.02, "deviation {worst}");
    }

    #[test]
    fn characteristic_values() {
        // b = 0: trace(a) = 2 cos(pi sqrt(a)), so r = 2 gives a = 4.
        let a = characteristic_value(2, 0.0, (3.5, 4.5)).unwrap();
        // Double root at b = 0: localization accuracy is sqrt(eps)-limited.
        assert!((a - 4.0).abs() < 1e-6, "a = {a}");
        // b = 0.5, r = 1 in [0.5, 1.5]: residual must vanish.
        let a = characteristic_value(1, 0.5, (0.5, 1.5)).unwrap();
        let m = mathieu_monodromy(a, 0.5).unwrap();
        assert!((m.trace - 2.0 * PI.cos()).abs() < 1e-8);
        // Continuity towards b -> 0: the root approaches r^2.
        let a = characteristic_value(1, 1e-4, (0.9, 1.1)).unwrap();
        assert!((a - 1.0).abs() < 1e-3);
        // No sign change -> usage error.
        assert!(characteristic_value(2, 0.0, (10.0, 11.0)).is_err());
    }
}
