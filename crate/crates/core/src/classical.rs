//! Fundamental classical solutions of `u'' + kappa(t) u = 0`.
//!
//! The pair (c, s) is anchored at `t0` with Cauchy data c(t0)=1, c'(t0)=0
//! and s(t0)=0, s'(t0)=1; together with their derivatives they form the
//! symplectic 2x2 evolution matrix of the classical flow, and everything
//! quantum in this crate is an algebraic function of these four numbers.

use crate::error::{Error, Result};
use crate::ode::{self, OdeOptions};
use crate::profile::FrequencyProfile;
use num_complex::Complex64;

/// Values of the fundamental pair and its time derivatives at (t, t0).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FundamentalPair {
    pub t0: f64,
    pub t: f64,
    pub c: f64,
    pub s: f64,
    pub c_dot: f64,
    pub s_dot: f64,
}

impl FundamentalPair {
    pub fn identity(t0: f64) -> Self {
        FundamentalPair {
            t0,
            t: t0,
            c: 1.0,
            s: 0.0,
            c_dot: 0.0,
            s_dot: 1.0,
        }
    }

    /// c*s_dot - c_dot*s; equals 1 exactly for true solutions.
    pub fn wronskian(&self) -> f64 {
        self.c * self.s_dot - self.c_dot * self.s
    }

    /// The pair for the reversed ordering (t0, t), obtained from the
    /// symplectic inverse: c(t0,t) = s_dot(t,t0), s(t0,t) = -s(t,t0).
    pub fn reversed(&self) -> Self {
        FundamentalPair {
            t0: self.t,
            t: self.t0,
            c: self.s_dot,
            s: -self.s,
            c_dot: -self.c_dot,
            s_dot: self.c,
        }
    }
}

/// Integrates the defining equation twice (both Cauchy data sets at once)
/// with the adaptive Runge-Kutta scheme.
pub fn solve_fundamental(
    profile: &FrequencyProfile,
    t0: f64,
    t: f64,
    tol: f64,
) -> Result<FundamentalPair> {
    if !(tol > 0.0) {
        return Err(Error::Usage(format!("tolerance must be positive, got {tol}")));
    }
    profile.check_time(t0)?;
    profile.check_time(t)?;
    if t == t0 {
        return Ok(FundamentalPair::identity(t0));
    }
    let f = |tau: f64, y: &[f64; 4]| {
        let k = profile.kappa_unchecked(tau);
        [y[1], -k * y[0], y[3], -k * y[2]]
    };
    let mut last_t = t0;
    let y = ode::integrate(
        &f,
        t0,
        t,
        [1.0, 0.0, 0.0, 1.0],
        &OdeOptions::with_tol(tol),
        &mut |step| last_t = step.t1,
    )
    .map_err(|e| match e {
        // Failure to advance means we ran into an interval endpoint
        // (e.g. the Gowdy t -> 0 singularity).
        Error::Numeric(msg) => Error::Singular {
            t: last_t,
            msg: format!("integration stalled: {msg}"),
        },
        other => other,
    })?;
    let pair = FundamentalPair {
        t0,
        t,
        c: y[0],
        c_dot: y[1],
        s: y[2],
        s_dot: y[3],
    };
    let w_err = (pair.wronskian() - 1.0).abs();
    // The Wronskian is a difference of products; both roundoff and solver
    // drift scale with the product magnitudes (huge for hyperbolic growth).
    let w_scale = 1.0 + (pair.c * pair.s_dot).abs() + (pair.c_dot * pair.s).abs();
    if w_err > 100.0 * tol.max(1e-12) * w_scale {
        return Err(Error::Invariant(format!(
            "Wronskian drifted by {w_err:.3e} integrating ({t0}) -> ({t})"
        )));
    }
    Ok(pair)
}

/// Exact pair for constant kappa0: trigonometric for kappa0 > 0, linear at
/// kappa0 = 0, hyperbolic for kappa0 < 0; continuous across 0.
pub fn closed_form_constant(kappa0: f64, t0: f64, t: f64) -> FundamentalPair {
    let dt = t - t0;
    let (c, s, c_dot, s_dot) = if kappa0 == 0.0 {
        (1.0, dt, 0.0, 1.0)
    } else if kappa0 > 0.0 {
        let w = kappa0.sqrt();
        let (sn, cs) = (w * dt).sin_cos();
        (cs, sn / w, -w * sn, cs)
    } else {
        let w = (-kappa0).sqrt();
        let (sh, ch) = ((w * dt).sinh(), (w * dt).cosh());
        (ch, sh / w, w * sh, ch)
    };
    FundamentalPair {
        t0,
        t,
        c,
        s,
        c_dot,
        s_dot,
    }
}

/// Chains two pairs (t2 <- t1) and (t1 <- t0) into (t2 <- t0) by the 2x2
/// matrix product of the corresponding symplectic matrices.
pub fn compose_pair(p21: &FundamentalPair, p10: &FundamentalPair) -> Result<FundamentalPair> {
    let scale = 1.0 + p10.t.abs();
    if (p21.t0 - p10.t).abs() > 1e-12 * scale {
        return Err(Error::Usage(format!(
            "compose_pair: intermediate times differ ({} vs {})",
            p21.t0, p10.t
        )));
    }
    // [c s; c_dot s_dot](t2,t0) = [c s; c_dot s_dot](t2,t1) * [..](t1,t0)
    Ok(FundamentalPair {
        t0: p10.t0,
        t: p21.t,
        c: p21.c * p10.c + p21.s * p10.c_dot,
        s: p21.c * p10.s + p21.s * p10.s_dot,
        c_dot: p21.c_dot * p10.c + p21.s_dot * p10.c_dot,
        s_dot: p21.c_dot * p10.s + p21.s_dot * p10.s_dot,
    })
}

/// Result of a zero count: the index value plus the number of degenerate
/// (tangential) zeros that were counted once and flagged.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IndexCount {
    pub m: i64,
    pub degenerate_zeros: usize,
}

/// Counts zeros of a sampled scalar solution on the half-open span between
/// `t0` and `t` (the span `(t0, t]` for forward time; for `t < t0` the count
/// over `(t, t0]` is returned with a negative sign so the index is zero at
/// `t0` and monotone in `t`).
///
/// Samples must be dense enough that `u` changes sign at most once between
/// consecutive samples.  Exact zeros at a sample point and sign-definite
/// dips below `~1e-12` of the sample scale are treated as a single
/// (degenerate) zero.
pub fn index_of(samples: &[(f64, f64)], t0: f64, t: f64) -> Result<IndexCount> {
    if samples.len() < 2 {
        return Err(Error::Usage("index_of needs at least two samples".into()));
    }
    let (lo, hi, sign) = if t >= t0 { (t0, t, 1i64) } else { (t, t0, -1i64) };
    let scale = samples
        .iter()
        .fold(0.0f64, |m, &(_, u)| m.max(u.abs()))
        .max(1e-300);
    let touch_tol = 1e-12 * scale;

    // Nearest non-negligible sample values on either side of index i; used
    // to classify exact/near zeros as crossings vs tangential touches.
    let flank = |i: usize, dir: isize| -> f64 {
        let mut j = i as isize + dir;
        while j >= 0 && (j as usize) < samples.len() {
            let u = samples[j as usize].1;
            if u.abs() >= touch_tol {
                return u;
            }
            j += dir;
        }
        0.0
    };
    let in_span = |tau: f64| tau > lo && tau <= hi;

    let mut m = 0i64;
    let mut degenerate = 0usize;
    let mut i = 0usize;
    while i < samples.len() {
        let (tau, u) = samples[i];
        if u.abs() < touch_tol {
            // A zero (exact or numerically tangential) pinned at a sample;
            // consume the whole below-threshold run as one zero.
            let start = i;
            while i + 1 < samples.len() && samples[i + 1].1.abs() < touch_tol {
                i += 1;
            }
            if in_span(tau) || in_span(samples[i].0) {
                m += 1;
                let (before, after) = (flank(start, -1), flank(i, 1));
                if before * after > 0.0 {
                    degenerate += 1; // touches zero without changing sign
                }
            }
        } else if i + 1 < samples.len() {
            let (tn, un) = samples[i + 1];
            if un.abs() >= touch_tol && u.signum() != un.signum() {
                let z = tau + (tn - tau) * u / (u - un);
                if in_span(z) {
                    m += 1;
                }
            }
        }
        i += 1;
    }
    Ok(IndexCount {
        m: sign * m,
        degenerate_zeros: degenerate,
    })
}

/// Samples `s(tau, t0)` (or `c`) densely over the span between `t0` and `t`,
/// suitable as input to [`index_of`].  Step size is capped well below the
/// local half-period so no step can hide two zeros.
pub fn sample_solution(
    profile: &FrequencyProfile,
    t0: f64,
    t: f64,
    component_c: bool,
    tol: f64,
) -> Result<Vec<(f64, f64)>> {
    profile.check_time(t0)?;
    profile.check_time(t)?;
    let idx = if component_c { 0 } else { 2 };
    // Cap the step by the stiffest oscillation seen on a coarse scan.
    let mut kmax: f64 = 1.0;
    for i in 0..=64 {
        let tau = t0 + (t - t0) * i as f64 / 64.0;
        let k = profile.kappa_unchecked(tau);
        if k.is_finite() {
            kmax = kmax.max(k);
        }
    }
    let opts = OdeOptions {
        max_step: 0.5 / kmax.sqrt(),
        ..OdeOptions::with_tol(tol)
    };
    let f = |tau: f64, y: &[f64; 4]| {
        let k = profile.kappa_unchecked(tau);
        [y[1], -k * y[0], y[3], -k * y[2]]
    };
    let mut samples: Vec<(f64, f64)> = vec![(t0, if component_c { 1.0 } else { 0.0 })];
    ode::integrate(&f, t0, t, [1.0, 0.0, 0.0, 1.0], &opts, &mut |step| {
        // Subdivide each accepted step so the sampling density precondition
        // of index_of holds with a wide margin.
        for j in 1..=4 {
            let tau = step.t0 + (step.t1 - step.t0) * j as f64 / 4.0;
            samples.push((tau, step.interpolate(idx, tau)));
        }
    })?;
    if let Some(last) = samples.last_mut() {
        last.0 = t; // snap the final subsample to the exact endpoint
    }
    Ok(samples)
}

/// `u^epsilon = exp(i epsilon pi m) |u|^epsilon`: the branch of a real power
/// of an oscillating solution fixed by its zero-count index.  This is what
/// makes `s^{-1/2}` well defined across caustics.
pub fn branch_power(u_value: f64, index: i64, epsilon: f64) -> Result<Complex64> {
    if u_value == 0.0 && epsilon < 0.0 {
        return Err(Error::Singular {
            t: f64::NAN,
            msg: "branch_power of 0 with negative exponent: at a caustic, use the caustic kernel"
                .into(),
        });
    }
    let phase = epsilon * std::f64::consts::PI * index as f64;
    Ok(Complex64::from_polar(u_value.abs().powf(epsilon), phase))
}
