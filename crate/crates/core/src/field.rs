//! Infinite-mode diagnostics: per-mode Bogoliubov data for free fields on
//! Minkowski and Gowdy backgrounds, unitary-implementability tests with
//! truncation evidence, vacuum amplitude products, the per-mode kernel
//! factor, coherent-state variances, and the displacement/squeeze/rotation
//! factorization with its obstruction analysis.
//!
//! Mode labels live in Z \ {0} (Minkowski, 3-torus, tachyonic) or in the
//! positive integers (3-handle / 3-sphere); the zero mode is excluded
//! throughout.  All sweeps run in parallel over the label with the
//! reduction done afterwards in label order, so sums and products are
//! bit-stable regardless of the worker count.

use crate::classical::FundamentalPair;
use crate::ep::phase_integral;
use crate::error::{Error, Result};
use crate::models::{canonical_ep, canonical_ep_point, closed_form_pair};
use crate::profile::FrequencyProfile;
use crate::propagator::{kernel_measure_rep, KernelValue};
use crate::quad;
use num_complex::Complex64;
use rayon::prelude::*;
use std::sync::Arc;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// A family of uncoupled oscillator modes indexed by an integer label.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeFamily {
    /// kappa_l = l^2 on the real line; labels in Z \ {0}.
    Minkowski,
    /// kappa_l(t) = l^2 + 1/(4 t^2) on (0, inf); labels in Z \ {0}.
    GowdyT3,
    /// kappa_l(t) = l(l+1) + (1 + csc^2 t)/4 on (0, pi); labels l >= 1.
    GowdyS,
    /// kappa_l = -l^2 (inverted modes); labels in Z \ {0}.
    Tachyonic,
}

impl ModeFamily {
    /// True when the index set is the positive integers only.
    pub fn positive_indices_only(&self) -> bool {
        matches!(self, ModeFamily::GowdyS)
    }

    /// How many modes share each positive label (2 when the set is
    /// Z \ {0}, since kappa depends on |l| only).
    pub fn multiplicity(&self) -> f64 {
        if self.positive_indices_only() {
            1.0
        } else {
            2.0
        }
    }

    /// The labels with |l| <= l_max, in ascending order.
    pub fn indices(&self, l_max: i64) -> Vec<i64> {
        let mut out = Vec::new();
        if !self.positive_indices_only() {
            out.extend((-l_max..0).filter(|l| *l != 0));
        }
        out.extend(1..=l_max);
        out
    }

    /// Validates a mode label against the family's index set.
    pub fn check_index(&self, ell: i64) -> Result<()> {
        if ell == 0 {
            return Err(Error::Usage("the zero mode is excluded".into()));
        }
        if self.positive_indices_only() && ell < 0 {
            return Err(Error::Usage(format!(
                "this family is indexed by positive integers, got {ell}"
            )));
        }
        Ok(())
    }

    /// The one-oscillator frequency profile of mode `ell`.
    pub fn profile(&self, ell: i64) -> Result<FrequencyProfile> {
        self.check_index(ell)?;
        let l = ell.unsigned_abs() as f64;
        Ok(match self {
            ModeFamily::Minkowski => FrequencyProfile::constant(l * l),
            ModeFamily::GowdyT3 => FrequencyProfile::gowdy_t3(l),
            ModeFamily::GowdyS => FrequencyProfile::gowdy_s((l * (l + 1.0)).sqrt()),
            ModeFamily::Tachyonic => FrequencyProfile::tachyonic(l),
        })
    }

    /// kappa_l(t) with domain checks.
    pub fn kappa(&self, ell: i64, t: f64) -> Result<f64> {
        self.profile(ell)?.kappa(t)
    }

    /// Closed-form fundamental pair of mode `ell` anchored at t0.
    pub fn mode_pair(&self, ell: i64, t0: f64, t: f64) -> Result<FundamentalPair> {
        closed_form_pair(&self.profile(ell)?, t0, t)
    }
}

/// The annihilation/creation coefficient sequences (alpha_l, beta_l)
/// fixing the Fock representation.  The base choice is
/// `alpha_l = 1/sqrt(2|l|)`, `beta_l = -i sqrt(|l|/2)`; an optional real
/// phase sequence gamma_l multiplies both by exp(i gamma_l), which spans
/// the residual freedom left by the commutation relations.
#[derive(Clone)]
pub struct RepresentationSeq {
    gamma: Option<Arc<dyn Fn(i64) -> f64 + Send + Sync>>,
}

impl std::fmt::Debug for RepresentationSeq {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.gamma {
            None => write!(f, "RepresentationSeq(standard)"),
            Some(_) => write!(f, "RepresentationSeq(phased)"),
        }
    }
}

impl RepresentationSeq {
    pub fn standard() -> Self {
        RepresentationSeq { gamma: None }
    }

    /// The standard sequences rotated by a per-mode phase gamma_l.
    pub fn phased(gamma: Arc<dyn Fn(i64) -> f64 + Send + Sync>) -> Self {
        RepresentationSeq { gamma: Some(gamma) }
    }

    fn phase(&self, ell: i64) -> Complex64 {
        match &self.gamma {
            None => Complex64::new(1.0, 0.0),
            Some(g) => Complex64::from_polar(1.0, g(ell)),
        }
    }

    pub fn alpha(&self, ell: i64) -> Complex64 {
        let l = ell.unsigned_abs() as f64;
        self.phase(ell) / (2.0 * l).sqrt()
    }

    pub fn beta(&self, ell: i64) -> Complex64 {
        let l = ell.unsigned_abs() as f64;
        -I * (0.5 * l).sqrt() * self.phase(ell)
    }
}

/// The mode Bogoliubov coefficients from a fundamental pair and the
/// representation values:
/// `A = i(s_dot conj(a) b - c conj(b) a + c_dot |a|^2 - s |b|^2)`,
/// `B = i((s_dot - c) conj(a) conj(b) + c_dot conj(a)^2 - s conj(b)^2)`.
pub fn bogoliubov_from_pair(
    pair: &FundamentalPair,
    alpha: Complex64,
    beta: Complex64,
) -> (Complex64, Complex64) {
    let (ac, bc) = (alpha.conj(), beta.conj());
    let a = I
        * (pair.s_dot * ac * beta - pair.c * bc * alpha
            + pair.c_dot * alpha.norm_sqr()
            - pair.s * beta.norm_sqr());
    let b = I * ((pair.s_dot - pair.c) * ac * bc + pair.c_dot * ac * ac - pair.s * bc * bc);
    (a, b)
}

/// Per-mode Bogoliubov coefficients (A_l, B_l) for the evolution from t0
/// to t, satisfying |A_l|^2 - |B_l|^2 = 1.
pub fn mode_bogoliubov(
    family: ModeFamily,
    rep: &RepresentationSeq,
    ell: i64,
    t0: f64,
    t: f64,
) -> Result<(Complex64, Complex64)> {
    let pair = family.mode_pair(ell, t0, t)?;
    Ok(bogoliubov_from_pair(&pair, rep.alpha(ell), rep.beta(ell)))
}

/// Composition of two linear (a, a*) transformations: if X and Y act as
/// `a -> A a + B a*` under conjugation, the product U = XY acts with
/// `A = A_X A_Y + B_X conj(B_Y)`, `B = A_X B_Y + B_X conj(A_Y)`.
pub fn compose_blocks(
    outer: (Complex64, Complex64),
    inner: (Complex64, Complex64),
) -> (Complex64, Complex64) {
    (
        outer.0 * inner.0 + outer.1 * inner.1.conj(),
        outer.0 * inner.1 + outer.1 * inner.0.conj(),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Convergent,
    Divergent,
    Inconclusive,
}

/// Evidence record for a truncated mode sum: partial sums along a label
/// schedule plus a log-log tail fit `summand ~ C |l|^{-p}`.
#[derive(Clone, Debug, serde::Serialize)]
pub struct TruncationReport {
    pub l_values: Vec<i64>,
    pub partial_sums: Vec<f64>,
    /// Per-positive-label summands (|B_l|^2), 1..=max(l_values).
    pub summands: Vec<f64>,
    /// Fitted decay exponent p (infinite when every summand vanishes).
    pub fitted_decay: f64,
    /// Two-sigma band around the fitted exponent.
    pub decay_ci: (f64, f64),
    pub verdict: Verdict,
}

/// Least-squares slope of ln y on ln x with its standard error.
fn log_log_slope(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 5 {
        return None;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx < 1e-12 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let rss: f64 = pts
        .iter()
        .map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2))
        .sum();
    let se = (rss / (n - 2.0) / sxx).sqrt();
    Some((slope, se))
}

/// All summands below this are treated as exact zeros of the sequence.
const ZERO_SUM_FLOOR: f64 = 1e-20;

fn report_from_summands(
    summands: &[f64], // indexed by positive label - 1
    multiplicity: f64,
    schedule: &[i64],
) -> TruncationReport {
    let mut partial_sums = Vec::with_capacity(schedule.len());
    let mut acc = 0.0;
    let mut next = 0usize;
    for (i, v) in summands.iter().enumerate() {
        acc += multiplicity * v;
        if next < schedule.len() && (i + 1) as i64 == schedule[next] {
            partial_sums.push(acc);
            next += 1;
        }
    }
    let l_max = summands.len();
    let all_zero = summands.iter().all(|v| *v < ZERO_SUM_FLOOR);
    if all_zero {
        return TruncationReport {
            l_values: schedule.to_vec(),
            partial_sums,
            summands: summands.to_vec(),
            fitted_decay: f64::INFINITY,
            decay_ci: (f64::INFINITY, f64::INFINITY),
            verdict: Verdict::Convergent,
        };
    }
    if summands.iter().any(|v| !v.is_finite()) {
        return TruncationReport {
            l_values: schedule.to_vec(),
            partial_sums,
            summands: summands.to_vec(),
            fitted_decay: f64::NEG_INFINITY,
            decay_ci: (f64::NEG_INFINITY, f64::NEG_INFINITY),
            verdict: Verdict::Divergent,
        };
    }
    // Summands often carry an oscillatory sin^2-type modulation on top of
    // the power law; average them over geometric bins before fitting so
    // the slope estimate and its band reflect the envelope, not the
    // oscillation.
    let tail_start = (l_max / 4).max(1);
    let n_bins = 12usize;
    let ratio = (l_max as f64 / tail_start as f64).powf(1.0 / n_bins as f64);
    let mut tail: Vec<(f64, f64)> = Vec::with_capacity(n_bins);
    for k in 0..n_bins {
        let lo_edge = (tail_start as f64 * ratio.powi(k as i32)).round() as usize;
        let hi_edge = ((tail_start as f64 * ratio.powi(k as i32 + 1)).round() as usize)
            .min(l_max)
            .max(lo_edge + 1);
        let vals: Vec<f64> = (lo_edge..hi_edge).map(|l| summands[l - 1]).collect();
        if vals.is_empty() {
            continue;
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let center = (lo_edge as f64 * (hi_edge - 1) as f64).sqrt();
        tail.push((center, mean));
    }
    let (p, lo, hi) = match log_log_slope(&tail) {
        Some((slope, se)) => (-slope, -slope - 2.0 * se, -slope + 2.0 * se),
        None => {
            return TruncationReport {
                l_values: schedule.to_vec(),
                partial_sums,
                summands: summands.to_vec(),
                fitted_decay: f64::NAN,
                decay_ci: (f64::NAN, f64::NAN),
                verdict: Verdict::Inconclusive,
            }
        }
    };
    let verdict = if p > 1.0 && lo > 1.0 {
        Verdict::Convergent
    } else if hi < 1.0 {
        Verdict::Divergent
    } else {
        Verdict::Inconclusive
    };
    TruncationReport {
        l_values: schedule.to_vec(),
        partial_sums,
        summands: summands.to_vec(),
        fitted_decay: p,
        decay_ci: (lo, hi),
        verdict,
    }
}

fn check_schedule(schedule: &[i64]) -> Result<i64> {
    if schedule.is_empty() {
        return Err(Error::Usage("empty truncation schedule".into()));
    }
    if !schedule.windows(2).all(|w| w[0] < w[1]) || schedule[0] < 1 {
        return Err(Error::Usage(
            "truncation schedule must be strictly increasing positive labels".into(),
        ));
    }
    Ok(*schedule.last().unwrap())
}

/// Parallel sweep of (A_l, B_l) over positive labels 1..=l_max.
pub fn mode_sweep(
    family: ModeFamily,
    rep: &RepresentationSeq,
    t0: f64,
    t: f64,
    l_max: i64,
) -> Result<Vec<(Complex64, Complex64)>> {
    (1..=l_max)
        .into_par_iter()
        .map(|l| mode_bogoliubov(family, rep, l, t0, t))
        .collect()
}

/// Square-summability test for the off-diagonal sequence B: computes the
/// partial sums of |B_l|^2 along the schedule and fits the tail decay.
pub fn unitarity_test(
    family: ModeFamily,
    rep: &RepresentationSeq,
    t0: f64,
    t: f64,
    l_schedule: &[i64],
) -> Result<TruncationReport> {
    let l_max = check_schedule(l_schedule)?;
    let coeffs = mode_sweep(family, rep, t0, t, l_max)?;
    let summands: Vec<f64> = coeffs.iter().map(|(_, b)| b.norm_sqr()).collect();
    Ok(report_from_summands(
        &summands,
        family.multiplicity(),
        l_schedule,
    ))
}

/// Truncated vacuum-to-vacuum magnitude with a tail bound.
#[derive(Clone, Debug)]
pub struct VacuumMagnitude {
    /// prod_{|l| <= L} |A_l|^{-1/2}.
    pub value: f64,
    /// Bound on the change from extending the product past L, derived
    /// from the fitted tail decay of |B_l|^2.
    pub tail_bound: f64,
    pub report: TruncationReport,
}

/// |<vacuum | U(t, t0) vacuum>| as a truncated product over modes.
/// Refuses when the square-summability test does not certify convergence.
pub fn vacuum_amplitude_magnitude(
    family: ModeFamily,
    rep: &RepresentationSeq,
    t0: f64,
    t: f64,
    l_max: i64,
) -> Result<VacuumMagnitude> {
    if l_max < 8 {
        return Err(Error::Usage(format!(
            "vacuum product needs l_max >= 8, got {l_max}"
        )));
    }
    let schedule = [l_max / 8, l_max / 4, l_max / 2, l_max];
    let coeffs = mode_sweep(family, rep, t0, t, l_max)?;
    let summands: Vec<f64> = coeffs.iter().map(|(_, b)| b.norm_sqr()).collect();
    let report = report_from_summands(&summands, family.multiplicity(), &schedule);
    if report.verdict != Verdict::Convergent {
        return Err(Error::Usage(format!(
            "vacuum product refused: sum of |B_l|^2 not certified convergent \
             (verdict {:?}, fitted decay {:.3})",
            report.verdict, report.fitted_decay
        )));
    }
    // |A|^{-1/2} = (1 + |B|^2)^{-1/4}, so ln value = -(1/4) sum ln(1+|B|^2).
    let mult = family.multiplicity();
    let log_value: f64 = summands.iter().map(|b2| -0.25 * mult * b2.ln_1p()).sum();
    // Tail: |B_l|^2 <= C l^{-p} from the fit gives
    // sum_{l > L} |B_l|^2 <= C L^{1-p}/(p-1); ln(1+x) <= x.
    let tail_bound = if report.fitted_decay.is_infinite() {
        0.0
    } else {
        let p = report.decay_ci.0; // conservative: slowest decay in the band
        let tail_start = (l_max / 4).max(1) as usize;
        let c = (tail_start..=l_max as usize)
            .map(|l| summands[l - 1] * (l as f64).powf(p))
            .fold(0.0f64, f64::max);
        let tail_sum = mult * c * (l_max as f64).powf(1.0 - p) / (p - 1.0);
        0.25 * tail_sum
    };
    Ok(VacuumMagnitude {
        value: log_value.exp(),
        tail_bound,
        report,
    })
}

/// Monotone phase Phi_l = int rho_l^{-2} of the mode's canonical envelope,
/// plus (rho0, rho0_dot) at the anchor; drives the branch-index counts.
fn mode_phase(family: ModeFamily, ell: i64, t0: f64, t: f64) -> Result<(f64, f64, f64)> {
    let l = ell.unsigned_abs() as f64;
    match family {
        ModeFamily::Minkowski => Ok((l * (t - t0), 1.0 / l.sqrt(), 0.0)),
        ModeFamily::Tachyonic => Ok((0.0, 1.0, 0.0)),
        ModeFamily::GowdyT3 | ModeFamily::GowdyS => {
            let profile = family.profile(ell)?;
            let ep = canonical_ep(&profile)?;
            let phi = phase_integral(&ep, t0, t)?;
            let (r0, rd0) = canonical_ep_point(&profile, t0)?;
            Ok((phi, r0, rd0))
        }
    }
}

/// Branch indices (zeros of s, zeros of c) on the half-open span (t0, t],
/// t >= t0, from the envelope phase.
fn mode_indices(family: ModeFamily, ell: i64, t0: f64, t: f64) -> Result<(i64, i64)> {
    if t < t0 {
        return Err(Error::Usage(
            "mode kernel indices are defined for forward spans only".into(),
        ));
    }
    let (phi, r0, rd0) = mode_phase(family, ell, t0, t)?;
    if matches!(family, ModeFamily::Tachyonic) {
        return Ok((0, 0));
    }
    let m_s = (phi / std::f64::consts::PI).floor() as i64;
    // c vanishes where tan Phi = 1/(rho0 rho0_dot), once per pi of phase.
    let phi0 = 1.0f64.atan2(r0 * rd0); // in (0, pi)
    let m_c = if phi >= phi0 {
        ((phi - phi0) / std::f64::consts::PI).floor() as i64 + 1
    } else {
        0
    };
    Ok((m_s, m_c))
}

/// Per-mode kernel record in the Gaussian-measure representation of
/// (alpha_l, beta_l), with the counterterm phase exp(-i theta_l (t-t0))
/// already applied.  Caustic spans produce a caustic record.
pub fn mode_kernel(
    family: ModeFamily,
    rep: &RepresentationSeq,
    ell: i64,
    t0: f64,
    t: f64,
    theta_ell: f64,
) -> Result<KernelValue> {
    let pair = family.mode_pair(ell, t0, t)?;
    let (m_s, m_c) = mode_indices(family, ell, t0, t)?;
    let base = if crate::propagator::is_caustic(&pair) {
        KernelValue::caustic(&pair, m_c)?
    } else {
        KernelValue::regular(&pair, m_s)?
    };
    let mut out = kernel_measure_rep(&base, rep.alpha(ell), rep.beta(ell))?;
    out.amplitude *= Complex64::from_polar(1.0, -theta_ell * (t - t0));
    Ok(out)
}

/// Pointwise per-mode factor of the field propagator:
/// `sqrt(2 pi)|alpha_l| exp[(i/2)(beta_l q0^2/alpha_l
/// - conj(beta_l) q^2/conj(alpha_l))] K_l(q, t; q0, t0)
/// exp(-i theta_l (t - t0))`.
pub fn field_kernel_factor(
    family: ModeFamily,
    rep: &RepresentationSeq,
    ell: i64,
    t0: f64,
    t: f64,
    q: f64,
    q0: f64,
    theta_ell: f64,
) -> Result<Complex64> {
    mode_kernel(family, rep, ell, t0, t, theta_ell)?.eval(q, q0)
}

/// Per-mode vacuum matrix element <0_l | U | 0_l> including the
/// counterterm phase; with theta_l = -|l|/2 the phase cancels exactly for
/// Minkowski modes and asymptotically for Gowdy modes.
pub fn mode_vacuum_element(
    family: ModeFamily,
    ell: i64,
    t0: f64,
    t: f64,
    theta_ell: f64,
) -> Result<Complex64> {
    family.check_index(ell)?;
    let pair = family.mode_pair(ell, t0, t)?;
    let (m_s, _) = mode_indices(family, ell, t0, t)?;
    let vp = crate::transitions::vacuum_persistence(&pair, m_s, ell.unsigned_abs() as f64)?;
    Ok(vp * Complex64::from_polar(1.0, -theta_ell * (t - t0)))
}

/// Per-mode Ermakov-Pinney data (rho, rho_dot) supplied by the caller.
pub type ModeEp = dyn Fn(i64, f64) -> Result<(f64, f64)> + Send + Sync;

/// Obstruction evidence for the envelope-based factorization
/// U = T^{-1}(t) R(t, t0) T(t0): the squeeze-block summand
/// `|alpha beta (rho - 1/rho) - alpha^2 rho_dot|^2` at time t and the
/// rotation-block summand `|(alpha^2 + beta^2) sin Phi_l|^2`, per label.
#[derive(Clone, Debug, serde::Serialize)]
pub struct ObstructionReport {
    pub l_values: Vec<i64>,
    pub squeeze_terms: Vec<f64>,
    pub rotation_terms: Vec<f64>,
    /// Cumulative sums with index-set multiplicity.
    pub squeeze_partial: Vec<f64>,
    pub rotation_partial: Vec<f64>,
    /// Largest summand over the last quarter of the label range; a
    /// nonvanishing value witnesses failure of the summand -> 0 necessary
    /// condition.
    pub squeeze_tail_max: f64,
    pub rotation_tail_max: f64,
    /// |rho_L(t) sqrt(|L|) - 1| at the largest label: how close the
    /// envelope sequence is to the flat-mode scaling 1/sqrt(|l|).
    pub rho_scaled_defect: f64,
    /// |rho_L(t) - 1|: the unitarity of the squeeze block requires the
    /// envelope sequence to approach 1, not 1/sqrt(|l|).
    pub rho_unit_defect: f64,
}

/// Evaluates both factorization obstruction summands over labels 1..=L.
/// `ep_seq` overrides the canonical per-mode envelopes when given.
pub fn factorization_obstruction(
    family: ModeFamily,
    rep: &RepresentationSeq,
    ep_seq: Option<&Arc<ModeEp>>,
    t0: f64,
    t: f64,
    l_max: i64,
) -> Result<ObstructionReport> {
    if l_max < 4 {
        return Err(Error::Usage(format!("need l_max >= 4, got {l_max}")));
    }
    let eval_mode = |ell: i64| -> Result<(f64, f64, f64)> {
        let (rho_t, rho_dot_t, phi) = match ep_seq {
            Some(ep) => {
                let (r, rd) = ep(ell, t)?;
                let phi =
                    quad::integrate_default(&|tau| ep(ell, tau).map(|(r, _)| r.powi(-2)).unwrap_or(f64::NAN), t0, t)?;
                (r, rd, phi)
            }
            None => {
                let profile = family.profile(ell)?;
                let (r, rd) = canonical_ep_point(&profile, t)?;
                let phi = match family {
                    ModeFamily::Minkowski => ell.unsigned_abs() as f64 * (t - t0),
                    _ => phase_integral(&canonical_ep(&profile)?, t0, t)?,
                };
                (r, rd, phi)
            }
        };
        let (a, b) = (rep.alpha(ell), rep.beta(ell));
        let squeeze = (a * b * (rho_t - 1.0 / rho_t) - a * a * rho_dot_t).norm_sqr();
        let rotation = ((a * a + b * b) * phi.sin()).norm_sqr();
        Ok((squeeze, rotation, rho_t))
    };
    let rows: Vec<(f64, f64, f64)> = (1..=l_max)
        .into_par_iter()
        .map(eval_mode)
        .collect::<Result<_>>()?;
    let mult = family.multiplicity();
    let (mut sp, mut rp) = (Vec::with_capacity(rows.len()), Vec::with_capacity(rows.len()));
    let (mut sa, mut ra) = (0.0f64, 0.0f64);
    for (s, r, _) in &rows {
        sa += mult * s;
        ra += mult * r;
        sp.push(sa);
        rp.push(ra);
    }
    let tail_start = (rows.len() * 3 / 4).max(1) - 1;
    let tail_max = |pick: &dyn Fn(&(f64, f64, f64)) -> f64| {
        rows[tail_start..]
            .iter()
            .map(pick)
            .fold(0.0f64, f64::max)
    };
    let rho_last = rows.last().unwrap().2;
    Ok(ObstructionReport {
        l_values: (1..=l_max).collect(),
        squeeze_terms: rows.iter().map(|r| r.0).collect(),
        rotation_terms: rows.iter().map(|r| r.1).collect(),
        squeeze_partial: sp,
        rotation_partial: rp,
        squeeze_tail_max: tail_max(&|r| r.0),
        rotation_tail_max: tail_max(&|r| r.1),
        rho_scaled_defect: (rho_last * (l_max as f64).sqrt() - 1.0).abs(),
        rho_unit_defect: (rho_last - 1.0).abs(),
    })
}

/// The three per-mode blocks of the well-defined factorization
/// U = D(t, t0) R(t, t0) S(t, t0), each as (A, B) coefficients of the
/// induced (a, a*) transformation.
#[derive(Clone, Copy, Debug)]
pub struct AppendixFactors {
    pub displacement: (Complex64, Complex64),
    pub squeeze: (Complex64, Complex64),
    pub rotation: (Complex64, Complex64),
}

impl AppendixFactors {
    /// Composition of the three blocks in the product order
    /// displacement * squeeze * rotation; reproduces the direct mode
    /// Bogoliubov coefficients.
    pub fn composed(&self) -> (Complex64, Complex64) {
        compose_blocks(
            self.displacement,
            compose_blocks(self.squeeze, self.rotation),
        )
    }
}

/// Per-mode displacement/squeeze/rotation coefficients built from the
/// canonical envelope of the mode.
pub fn appendix_factors(
    family: ModeFamily,
    rep: &RepresentationSeq,
    ell: i64,
    t0: f64,
    t: f64,
) -> Result<AppendixFactors> {
    family.check_index(ell)?;
    let profile = family.profile(ell)?;
    let (r0, rd0) = canonical_ep_point(&profile, t0)?;
    let (rt, rdt) = canonical_ep_point(&profile, t)?;
    let (phi, _, _) = mode_phase(family, ell, t0, t)?;
    let (a, b) = (rep.alpha(ell), rep.beta(ell));
    let (ac, bc) = (a.conj(), b.conj());
    let a2 = a.norm_sqr();

    let delta = rdt / rt - rd0 / r0;
    let displacement = (1.0 + I * a2 * delta, I * ac * ac * delta);

    let stretch = rt / r0 - r0 / rt;
    let squeeze = (
        I * (b * ac * (r0 / rt) - a * bc * (rt / r0) + a2 * (rd0 / r0) * stretch),
        I * ac * (ac * rd0 / r0 - bc) * stretch,
    );

    let g = rd0 * rd0 + 1.0 / (r0 * r0);
    let (sin_phi, cos_phi) = phi.sin_cos();
    let rotation = (
        cos_phi + I * ((a * bc + b * ac) * rd0 * r0 - a2 * g - b.norm_sqr() * r0 * r0) * sin_phi,
        I * (2.0 * ac * bc * rd0 * r0 - ac * ac * g - bc * bc * r0 * r0) * sin_phi,
    );

    Ok(AppendixFactors {
        displacement,
        squeeze,
        rotation,
    })
}

/// Position/momentum spreads of an evolved coherent field state in mode
/// `ell`: `(|alpha A + conj(alpha) conj(B)|, |beta A + conj(beta) conj(B)|)`,
/// independent of the coherent label.
pub fn field_coherent_variances(
    family: ModeFamily,
    rep: &RepresentationSeq,
    ell: i64,
    t0: f64,
    t: f64,
) -> Result<(f64, f64)> {
    let (big_a, big_b) = mode_bogoliubov(family, rep, ell, t0, t)?;
    let (a, b) = (rep.alpha(ell), rep.beta(ell));
    Ok((
        (a * big_a + a.conj() * big_b.conj()).norm(),
        (b * big_a + b.conj() * big_b.conj()).norm(),
    ))
}

/// Residual of the 3-torus momentum constraint sum_l l |z_l|^2 over a
/// finitely supported coherent label sequence.
pub fn t3_constraint_check(z_seq: &[(i64, Complex64)]) -> f64 {
    z_seq
        .iter()
        .map(|(l, z)| *l as f64 * z.norm_sqr())
        .sum()
}
