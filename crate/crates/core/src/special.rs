//! In-repo special functions: Bessel J0/Y0/J1/Y1, Ferrers (on-the-cut)
//! Legendre functions of real and integer degree, and normalised Hermite
//! functions.
//!
//! Everything here is validated by defining-ODE residuals and Wronskian
//! identities in the test suite rather than against external tables, so the
//! implementations carry their own correctness evidence.

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577215664901532860606512090082;

/// Switch point between the ascending series and the Hankel asymptotic
/// expansion.  At x = 14 both sides agree to ~1e-12 absolute.
const BESSEL_SWITCH: f64 = 14.0;

/// Compensated (Kahan) accumulator, used to keep cancellation-heavy series
/// near machine accuracy.
#[derive(Default, Clone, Copy)]
struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Values of the four cylinder functions needed by the closed-form
/// oscillator solutions.
#[derive(Clone, Copy, Debug)]
pub struct Bessel {
    pub j0: f64,
    pub y0: f64,
    pub j1: f64,
    pub y1: f64,
}

/// J0, Y0, J1, Y1 at `x > 0`.
pub fn bessel_j0y0(x: f64) -> Result<Bessel> {
    if !(x > 0.0) {
        return Err(Error::Usage(format!(
            "bessel_j0y0 requires x > 0 (Y0 is singular at 0), got {x}"
        )));
    }
    if x <= BESSEL_SWITCH {
        Ok(bessel_series(x))
    } else {
        Ok(bessel_asymptotic(x))
    }
}

fn bessel_series(x: f64) -> Bessel {
    let q = 0.25 * x * x; // (x/2)^2
    let lg = (0.5 * x).ln() + EULER_GAMMA;

    // J0 = sum (-q)^k / (k!)^2, and the companion log-free part of Y0:
    // Y0 = (2/pi) [ lg*J0 + sum_{k>=1} (-1)^{k+1} H_k q^k/(k!)^2 ].
    let (mut j0, mut y0s) = (Kahan::default(), Kahan::default());
    // J1 = (x/2) sum (-q)^k / (k!(k+1)!);
    // Y1 = (2/pi) [ lg*J1 - 1/x - (x/4) sum (-1)^k (H_k + H_{k+1}) q^k/(k!(k+1)!) ].
    let (mut j1s, mut y1s) = (Kahan::default(), Kahan::default());

    let mut term0 = 1.0; // (-q)^k / (k!)^2
    let mut term1 = 1.0; // (-q)^k / (k!(k+1)!)
    let mut hk = 0.0; // H_k
    j0.add(term0);
    j1s.add(term1);
    y1s.add(term1 * (hk + 1.0)); // k = 0: H_0 + H_1 = 1
    let mut k = 1.0f64;
    loop {
        term0 *= -q / (k * k);
        term1 *= -q / (k * (k + 1.0));
        hk += 1.0 / k;
        j0.add(term0);
        y0s.add(-term0 * hk); // (-1)^{k+1} H_k q^k/(k!)^2 = -(-q)^k H_k/(k!)^2
        j1s.add(term1);
        y1s.add(term1 * (2.0 * hk + 1.0 / (k + 1.0))); // (-1)^k (H_k+H_{k+1}) q^k/...
        if term0.abs() < 1e-18 * j0.sum.abs().max(1.0) && k > 4.0 {
            break;
        }
        k += 1.0;
        if k > 200.0 {
            break;
        }
    }
    let j0v = j0.sum;
    let j1v = 0.5 * x * j1s.sum;
    let two_over_pi = std::f64::consts::FRAC_2_PI;
    let y0v = two_over_pi * (lg * j0v + y0s.sum);
    let y1v = two_over_pi * (lg * j1v - 1.0 / x - 0.25 * x * y1s.sum);
    Bessel {
        j0: j0v,
        y0: y0v,
        j1: j1v,
        y1: y1v,
    }
}

/// Hankel asymptotic expansion: J_nu = sqrt(2/(pi x)) [P cos chi - Q sin chi],
/// Y_nu = sqrt(2/(pi x)) [P sin chi + Q cos chi], chi = x - nu pi/2 - pi/4,
/// truncated at the smallest term.
fn hankel_pq(nu: f64, x: f64) -> (f64, f64) {
    let mu = 4.0 * nu * nu;
    let mut a = 1.0; // a_k, starting with a_0 = 1
    let mut p = 1.0;
    let mut q = 0.0;
    let mut prev = f64::INFINITY;
    for k in 1..60 {
        let kf = k as f64;
        a *= (mu - (2.0 * kf - 1.0).powi(2)) / (8.0 * kf);
        let term = a / x.powi(k as i32);
        if term.abs() > prev {
            break; // divergent tail reached; stop at the smallest term
        }
        prev = term.abs();
        let signed = if (k / 2) % 2 == 0 { term } else { -term };
        if k % 2 == 0 {
            p += signed;
        } else {
            q += signed;
        }
        if term.abs() < 1e-18 {
            break;
        }
    }
    (p, q)
}

fn bessel_asymptotic(x: f64) -> Bessel {
    let amp = (std::f64::consts::FRAC_2_PI / x).sqrt();
    let mk = |nu: f64| {
        let (p, q) = hankel_pq(nu, x);
        let chi = x - nu * std::f64::consts::FRAC_PI_2 - std::f64::consts::FRAC_PI_4;
        let (s, c) = chi.sin_cos();
        (amp * (p * c - q * s), amp * (p * s + q * c))
    };
    let (j0, y0) = mk(0.0);
    let (j1, y1) = mk(1.0);
    Bessel { j0, y0, j1, y1 }
}

/// Ferrers Legendre values and first derivatives at a point of (-1, 1).
#[derive(Clone, Copy, Debug)]
pub struct LegendrePQ {
    pub p: f64,
    pub q: f64,
    pub dp: f64,
    pub dq: f64,
}

/// Ferrers functions P_nu(x), Q_nu(x) of real degree `nu >= 0` on the cut,
/// with derivatives.
///
/// Integer degrees use the forward three-term recurrence (stable on the
/// cut); other degrees use the Gauss hypergeometric series for P together
/// with the reflection formula
/// `Q_nu(x) = pi/(2 sin nu pi) [cos(nu pi) P_nu(x) - P_nu(-x)]`.
pub fn legendre_pq(degree: f64, x: f64) -> Result<LegendrePQ> {
    if !(x > -1.0 && x < 1.0) {
        return Err(Error::Usage(format!(
            "legendre_pq requires -1 < x < 1, got {x}"
        )));
    }
    if !(degree >= 0.0) {
        return Err(Error::Usage(format!(
            "legendre_pq requires degree >= 0, got {degree}"
        )));
    }
    let nearest = degree.round();
    if (degree - nearest).abs() < 1e-9 {
        let table = legendre_pq_table(x, nearest as usize)?;
        return Ok(table[nearest as usize]);
    }

    let nu = degree;
    let p = ferrers_p_series(nu, x)?;
    let dp = ferrers_dp_series(nu, x)?;
    let pm = ferrers_p_series(nu, -x)?;
    let dpm = ferrers_dp_series(nu, -x)?;
    let (snp, cnp) = (nu * std::f64::consts::PI).sin_cos();
    let pref = std::f64::consts::FRAC_PI_2 / snp;
    let q = pref * (cnp * p - pm);
    // d/dx [-P_nu(-x)] = +P'_nu(-x)
    let dq = pref * (cnp * dp + dpm);
    Ok(LegendrePQ { p, q, dp, dq })
}

/// P_nu(x) = 2F1(-nu, nu+1; 1; (1-x)/2).
fn ferrers_p_series(nu: f64, x: f64) -> Result<f64> {
    let z = 0.5 * (1.0 - x);
    let mut term = 1.0;
    let mut acc = Kahan::default();
    acc.add(term);
    for k in 0..100_000 {
        let kf = k as f64;
        term *= (kf - nu) * (kf + nu + 1.0) / ((kf + 1.0) * (kf + 1.0)) * z;
        acc.add(term);
        if term.abs() < 1e-17 * acc.sum.abs().max(1e-30) {
            return Ok(acc.sum);
        }
    }
    Err(Error::Numeric(format!(
        "Legendre series did not converge (degree {nu}, x {x})"
    )))
}

/// P'_nu(x) = (nu(nu+1)/2) 2F1(1-nu, nu+2; 2; (1-x)/2).
fn ferrers_dp_series(nu: f64, x: f64) -> Result<f64> {
    let z = 0.5 * (1.0 - x);
    let mut term = 1.0;
    let mut acc = Kahan::default();
    acc.add(term);
    for k in 0..100_000 {
        let kf = k as f64;
        term *= (kf + 1.0 - nu) * (kf + nu + 2.0) / ((kf + 2.0) * (kf + 1.0)) * z;
        acc.add(term);
        if term.abs() < 1e-17 * acc.sum.abs().max(1e-30) {
            return Ok(0.5 * nu * (nu + 1.0) * acc.sum);
        }
    }
    Err(Error::Numeric(format!(
        "Legendre derivative series did not converge (degree {nu}, x {x})"
    )))
}

/// P_l, Q_l and derivatives for all integer degrees 0..=lmax at one point,
/// by the forward three-term recurrence (both kinds satisfy it, and it is
/// stable on the open cut).
pub fn legendre_pq_table(x: f64, lmax: usize) -> Result<Vec<LegendrePQ>> {
    if !(x > -1.0 && x < 1.0) {
        return Err(Error::Usage(format!(
            "legendre_pq_table requires -1 < x < 1, got {x}"
        )));
    }
    let omx2 = 1.0 - x * x;
    let q0 = 0.5 * ((1.0 + x) / (1.0 - x)).ln();
    let mut out = Vec::with_capacity(lmax + 1);
    out.push(LegendrePQ {
        p: 1.0,
        q: q0,
        dp: 0.0,
        dq: 1.0 / omx2,
    });
    if lmax == 0 {
        return Ok(out);
    }
    let (mut p_prev, mut p_cur) = (1.0, x);
    let (mut q_prev, mut q_cur) = (q0, x * q0 - 1.0);
    out.push(LegendrePQ {
        p: p_cur,
        q: q_cur,
        dp: (p_prev - x * p_cur) / omx2,
        dq: (q_prev - x * q_cur) / omx2,
    });
    for l in 1..lmax {
        let lf = l as f64;
        let p_next = ((2.0 * lf + 1.0) * x * p_cur - lf * p_prev) / (lf + 1.0);
        let q_next = ((2.0 * lf + 1.0) * x * q_cur - lf * q_prev) / (lf + 1.0);
        p_prev = p_cur;
        p_cur = p_next;
        q_prev = q_cur;
        q_cur = q_next;
        let lp1 = lf + 1.0;
        out.push(LegendrePQ {
            p: p_cur,
            q: q_cur,
            dp: lp1 * (p_prev - x * p_cur) / omx2,
            dq: lp1 * (q_prev - x * q_cur) / omx2,
        });
    }
    Ok(out)
}

/// Normalised Hermite functions `phi_n(xi) = h_n(xi) exp(-xi^2/2)` with
/// `int phi_n^2 = 1`, returned for all n = 0..=nmax.  The normalised
/// recurrence avoids factorial overflow.
pub fn hermite_functions(nmax: usize, xi: f64) -> Vec<f64> {
    let g = (-0.5 * xi * xi).exp();
    let mut out = Vec::with_capacity(nmax + 1);
    let mut h_prev = std::f64::consts::PI.powf(-0.25);
    out.push(h_prev * g);
    if nmax == 0 {
        return out;
    }
    let mut h_cur = std::f64::consts::SQRT_2 * xi * h_prev;
    out.push(h_cur * g);
    for n in 2..=nmax {
        let nf = n as f64;
        let h_next = xi * (2.0 / nf).sqrt() * h_cur - ((nf - 1.0) / nf).sqrt() * h_prev;
        h_prev = h_cur;
        h_cur = h_next;
        out.push(h_cur * g);
    }
    out
}

/// ln(n!), via a cached cumulative table for small n and the Stirling
/// series beyond it.
pub fn ln_factorial(n: u64) -> f64 {
    const TABLE: usize = 256;
    static CACHE: std::sync::OnceLock<Vec<f64>> = std::sync::OnceLock::new();
    let cache = CACHE.get_or_init(|| {
        let mut v = vec![0.0; TABLE];
        for i in 2..TABLE {
            v[i] = v[i - 1] + (i as f64).ln();
        }
        v
    });
    if (n as usize) < TABLE {
        return cache[n as usize];
    }
    let x = n as f64 + 1.0;
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + 1.0 / (12.0 * x)
        - 1.0 / (360.0 * x.powi(3))
}
