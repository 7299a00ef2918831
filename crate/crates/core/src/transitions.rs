//! Bogoliubov coefficients, exact transition amplitudes between
//! constant-frequency oscillator eigenstates, and vacuum decay.
//!
//! The amplitude `<phi_{n2}^{w2} | U(t, t0) phi_{n1}^{w1}>` is evaluated in
//! closed form: a two-dimensional Gaussian moment of the propagator reduces
//! to the Taylor coefficient of `exp(x^t B x)` with `B` built from the
//! inverse of a complex symmetric 2x2 matrix `Lambda`.  Everything here is
//! exact up to the accuracy of the classical fundamental pair.

use num_complex::Complex64;
use std::f64::consts::{LN_2, PI};

use crate::classical::{branch_power, FundamentalPair};
use crate::error::{Error, Result};
use crate::profile::FrequencyProfile;
use crate::propagator::{is_caustic, KernelValue};
use crate::special::ln_factorial;
use crate::{classical, quad};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Bogoliubov coefficients of the evolution from `t0` to `t` with respect
/// to the annihilation/creation pair of reference frequency `omega`.
#[derive(Clone, Copy, Debug)]
pub struct BogoliubovPair {
    pub a: Complex64,
    pub b: Complex64,
    pub omega: f64,
    pub t0: f64,
    pub t: f64,
}

impl BogoliubovPair {
    /// `|A|^2 - |B|^2 - 1`; zero up to roundoff for exact classical data.
    pub fn hyperbolic_defect(&self) -> f64 {
        self.a.norm_sqr() - self.b.norm_sqr() - 1.0
    }

    /// Coefficients of the reversed evolution: `A(t0,t) = conj(A(t,t0))`,
    /// `B(t0,t) = -B(t,t0)`.
    pub fn reversed(&self) -> BogoliubovPair {
        BogoliubovPair {
            a: self.a.conj(),
            b: -self.b,
            omega: self.omega,
            t0: self.t,
            t: self.t0,
        }
    }
}

/// `A = (c + s_dot + i(c_dot/w - w s))/2`, `B = (c - s_dot + i(c_dot/w + w s))/2`.
pub fn bogoliubov(pair: &FundamentalPair, omega: f64) -> Result<BogoliubovPair> {
    if omega <= 0.0 {
        return Err(Error::Usage("reference frequency must be positive".into()));
    }
    let (c, s, cd, sd) = (pair.c, pair.s, pair.c_dot, pair.s_dot);
    Ok(BogoliubovPair {
        a: 0.5 * Complex64::new(c + sd, cd / omega - omega * s),
        b: 0.5 * Complex64::new(c - sd, cd / omega + omega * s),
        omega,
        t0: pair.t0,
        t: pair.t,
    })
}

/// The complex symmetric matrix of the Gaussian moment integral, for the
/// evolution `t1 = t0` to `t2 = t`:
/// `l11 = w1 - i c(t2,t1)/s`, `l22 = w2 - i c(t1,t2)/s`, `l12 = i/s`.
#[derive(Clone, Copy, Debug)]
pub struct LambdaMatrix {
    pub l11: Complex64,
    pub l12: Complex64,
    pub l22: Complex64,
    pub det: Complex64,
    pub omega1: f64,
    pub omega2: f64,
    pub s: f64,
}

impl LambdaMatrix {
    /// `(Lambda^{-1})_{22} = l11 / det`.
    pub fn inverse22(&self) -> Complex64 {
        self.l11 / self.det
    }
}

pub fn lambda_matrix(pair: &FundamentalPair, omega1: f64, omega2: f64) -> Result<LambdaMatrix> {
    if omega1 <= 0.0 || omega2 <= 0.0 {
        return Err(Error::Usage("frequencies must be positive".into()));
    }
    if is_caustic(pair) {
        return Err(Error::Singular {
            t: pair.t,
            msg: "Lambda matrix undefined at a caustic (s = 0); use the caustic amplitude route"
                .into(),
        });
    }
    let s = pair.s;
    let l11 = Complex64::new(omega1, -pair.c / s);
    let l22 = Complex64::new(omega2, -pair.s_dot / s);
    let l12 = Complex64::new(0.0, 1.0 / s);
    // The determinant display in terms of c_dot (Wronskian-reduced); agrees
    // with l11*l22 - l12^2 identically.
    let det = Complex64::new(
        omega1 * omega2 - pair.c_dot / s,
        -(omega1 * pair.s_dot + omega2 * pair.c) / s,
    );
    Ok(LambdaMatrix {
        l11,
        l12,
        l22,
        det,
        omega1,
        omega2,
        s,
    })
}

/// Coefficient of `x1^{n1} x2^{n2}` in `exp(x^t B x)` for symmetric `B`;
/// zero when `n1 + n2` is odd (parity).
pub fn taylor_coeff(
    b11: Complex64,
    b12: Complex64,
    b22: Complex64,
    n1: usize,
    n2: usize,
) -> Complex64 {
    if (n1 + n2) % 2 == 1 {
        return Complex64::new(0.0, 0.0);
    }
    let mut sum = Complex64::new(0.0, 0.0);
    let mut l = n1 % 2;
    while l <= n1.min(n2) {
        let j = (n1 - l) / 2;
        let k = (n2 - l) / 2;
        let ln_den = ln_factorial(j as u64) + ln_factorial(k as u64) + ln_factorial(l as u64);
        let term = b11.powu(j as u32)
            * b22.powu(k as u32)
            * (2.0 * b12).powu(l as u32)
            * (-ln_den).exp();
        sum += term;
        l += 2;
    }
    sum
}

fn quartic_root(x: f64) -> f64 {
    x.sqrt().sqrt()
}

/// Exact transition amplitude `<phi_{n2}^{w2} | U(t, t0) phi_{n1}^{w1}>`.
///
/// `index` is the Maslov index of `s` on the span (at a caustic, where the
/// endpoint zero of `s` is included in the count, it equals the index of
/// `c` and the delta-kernel route is taken).
pub fn amplitude(
    pair: &FundamentalPair,
    index: i64,
    omega1: f64,
    n1: usize,
    omega2: f64,
    n2: usize,
) -> Result<Complex64> {
    if (n1 + n2) % 2 == 1 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    if is_caustic(pair) {
        return amplitude_caustic(pair, index, omega1, n1, omega2, n2);
    }
    let lam = lambda_matrix(pair, omega1, omega2)?;
    let b11 = 2.0 * omega1 * lam.l22 / lam.det - 1.0;
    let b22 = 2.0 * omega2 * lam.l11 / lam.det - 1.0;
    let b12 = -2.0 * (omega1 * omega2).sqrt() * lam.l12 / lam.det;
    let tc = taylor_coeff(b11, b12, b22, n1, n2);
    let ln_mag = 0.5 * (ln_factorial(n1 as u64) + ln_factorial(n2 as u64))
        - 0.5 * (n1 + n2 + 1) as f64 * LN_2
        + 0.25 * (omega1 * omega2).ln();
    // (1/i)^{1/2} = exp(-i pi/4); the branch of s^{-1/2} carries the Maslov
    // content while sqrt(det) stays principal.
    let pref = ln_mag.exp() / PI * Complex64::from_polar(1.0, -PI / 4.0);
    Ok(pref * branch_power(pair.s, index, -0.5)? * tc * 2.0 * PI / lam.det.sqrt())
}

/// Caustic amplitude: the delta kernel turns the double integral into a
/// single Gaussian-Hermite overlap with a rescaled argument, evaluated in
/// closed form by the same Taylor-coefficient device.
fn amplitude_caustic(
    pair: &FundamentalPair,
    index_c: i64,
    omega1: f64,
    n1: usize,
    omega2: f64,
    n2: usize,
) -> Result<Complex64> {
    let kv = KernelValue::caustic(pair, index_c)?;
    let c = pair.c;
    let mu = omega1 / (c * c);
    let nu = omega2;
    // gamma is the total Gaussian width of the overlap integrand, including
    // the delta-kernel phase exp(i c_dot q^2 / (2c)).
    let gamma = Complex64::new(0.5 * (mu + nu), 0.0) - 0.5 * I * kv.quad_tt;
    let s_mu = omega1.sqrt() / c; // signed: the reflection q -> q/c matters
    let b11 = 2.0 * mu / gamma - 2.0;
    let b22 = 2.0 * nu / gamma - 2.0;
    let b12 = 2.0 * s_mu * nu.sqrt() / gamma;
    let tc = taylor_coeff(b11, b12, b22, n1, n2);
    let ln_mag = 0.5 * (ln_factorial(n1 as u64) + ln_factorial(n2 as u64))
        - (n1 + n2) as f64 * LN_2
        + 0.25 * (omega1 * omega2).ln();
    Ok(kv.amplitude * ln_mag.exp() * tc / gamma.sqrt())
}

/// `<phi_0^w | U(t, t0) phi_0^w> = sqrt(2w / det Lambda) e^{-i pi/4} s^{-1/2}`,
/// with the caustic limit handled through the delta kernel.
pub fn vacuum_persistence(pair: &FundamentalPair, index: i64, omega: f64) -> Result<Complex64> {
    if is_caustic(pair) {
        return amplitude_caustic(pair, index, omega, 0, omega, 0);
    }
    let lam = lambda_matrix(pair, omega, omega)?;
    Ok((2.0 * omega / lam.det).sqrt()
        * Complex64::from_polar(1.0, -PI / 4.0)
        * branch_power(pair.s, index, -0.5)?)
}

/// Principal-branch vacuum phase, valid for `t` close to `t0`:
/// `sigma = -arctan[(w s - c_dot/w) / (c + s_dot)] / 2`.
pub fn vacuum_phase_near(pair: &FundamentalPair, omega: f64) -> f64 {
    -0.5 * ((omega * pair.s - pair.c_dot / omega) / (pair.c + pair.s_dot)).atan()
}

/// Amplitudes `<phi_{2n}^w | U(t, t0) phi_0^w>` for `n = 0..=nmax`:
/// `coeff(n) = sqrt((2n)!)/(2^n n!) r^n coeff(0)` with
/// `r = 2w (Lambda^{-1})_{22} - 1 = -B(t0,t)/A(t0,t)`.
pub fn vacuum_decay_coeffs(
    pair: &FundamentalPair,
    index: i64,
    omega: f64,
    nmax: usize,
) -> Result<Vec<Complex64>> {
    let coeff0 = vacuum_persistence(pair, index, omega)?;
    let r = if is_caustic(pair) {
        // The Lambda route needs 1/s; fall back to the Bogoliubov form.
        let bg = bogoliubov(pair, omega)?;
        -bg.reversed().b / bg.reversed().a
    } else {
        2.0 * omega * lambda_matrix(pair, omega, omega)?.inverse22() - 1.0
    };
    let (r_mag, r_arg) = r.to_polar();
    let ln_r = if r_mag > 0.0 { r_mag.ln() } else { f64::NEG_INFINITY };
    let mut out = Vec::with_capacity(nmax + 1);
    out.push(coeff0);
    for n in 1..=nmax {
        let nf = n as f64;
        // log-space magnitude keeps (2n)! from overflowing for large tables
        let ln_mag = 0.5 * ln_factorial(2 * n as u64) - nf * LN_2 - ln_factorial(n as u64)
            + nf * ln_r;
        let coeff = if ln_mag == f64::NEG_INFINITY {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::from_polar(ln_mag.exp(), nf * r_arg) * coeff0
        };
        out.push(coeff);
    }
    Ok(out)
}

/// Table of amplitudes for `0 <= n1, n2 <= nmax` at fixed frequencies.
#[derive(Clone, Debug)]
pub struct AmplitudeTable {
    pub omega1: f64,
    pub omega2: f64,
    pub t0: f64,
    pub t: f64,
    pub nmax: usize,
    entries: Vec<Complex64>,
}

impl AmplitudeTable {
    pub fn build(
        pair: &FundamentalPair,
        index: i64,
        omega1: f64,
        omega2: f64,
        nmax: usize,
    ) -> Result<AmplitudeTable> {
        let mut entries = Vec::with_capacity((nmax + 1) * (nmax + 1));
        for n1 in 0..=nmax {
            for n2 in 0..=nmax {
                entries.push(amplitude(pair, index, omega1, n1, omega2, n2)?);
            }
        }
        Ok(AmplitudeTable {
            omega1,
            omega2,
            t0: pair.t0,
            t: pair.t,
            nmax,
            entries,
        })
    }

    pub fn get(&self, n1: usize, n2: usize) -> Complex64 {
        self.entries[n1 * (self.nmax + 1) + n2]
    }

    /// `sum over n2 <= cutoff of |amplitude(n1, n2)|^2`; approaches 1 from
    /// below as the cutoff grows (unitarity).
    pub fn row_sum_sq(&self, n1: usize, cutoff: usize) -> f64 {
        (0..=cutoff.min(self.nmax))
            .map(|n2| self.get(n1, n2).norm_sqr())
            .sum()
    }
}

/// Normalized eigenstate `phi_n^w(q)` of the constant-frequency oscillator.
pub fn oscillator_eigenfunction(omega: f64, n: usize, q: f64) -> f64 {
    quartic_root(omega) * crate::special::hermite_functions(n, omega.sqrt() * q)[n]
}

/// Independent validation oracle: the same amplitude by brute-force 2D
/// adaptive quadrature of `phi_{n2}(q) K(q,t;q0,t0) phi_{n1}(q0)`.
/// Limited to small `n` (Hermite growth pushes the integration box out).
#[allow(clippy::too_many_arguments)]
pub fn amplitude_oracle(
    profile: &FrequencyProfile,
    t0: f64,
    t: f64,
    omega1: f64,
    n1: usize,
    omega2: f64,
    n2: usize,
    tol: f64,
) -> Result<Complex64> {
    if n1 > 8 || n2 > 8 {
        return Err(Error::Usage(
            "amplitude_oracle supports n <= 8; use amplitude() beyond".into(),
        ));
    }
    let pair = classical::solve_fundamental(profile, t0, t, 1e-12)?;
    let samples = classical::sample_solution(profile, t0, t, false, 1e-10)?;
    let index = classical::index_of(&samples, t0, t)?.m;
    let kv = KernelValue::regular(&pair, index)?;
    let (amp, qtt, q00, qx) = (kv.amplitude, kv.quad_tt, kv.quad_00, kv.quad_cross);

    let half_box = |omega: f64, n: usize| ((2 * n + 1) as f64 / omega).sqrt() + 9.0 / omega.sqrt();
    let l1 = half_box(omega1, n1);
    let l2 = half_box(omega2, n2);

    let inner = |q: f64| -> Result<Complex64> {
        quad::integrate(
            &|q0: f64| {
                let phase = 0.5 * I * (qtt * q * q + q00 * q0 * q0 + 2.0 * qx * q * q0);
                phase.exp() * oscillator_eigenfunction(omega1, n1, q0)
            },
            -l1,
            l1,
            tol * 0.05,
            tol * 1e-4,
        )
    };
    let outer = quad::integrate(
        &|q: f64| inner(q).unwrap_or(Complex64::new(f64::NAN, f64::NAN))
            * oscillator_eigenfunction(omega2, n2, q),
        -l2,
        l2,
        tol * 0.5,
        tol * 1e-3,
    )
    .map_err(|e| Error::Numeric(format!("amplitude oracle quadrature failed: {e}")))?;
    let value = amp * outer;
    if !value.re.is_finite() || !value.im.is_finite() {
        return Err(Error::Numeric("amplitude oracle inner quadrature failed".into()));
    }
    Ok(value)
}
