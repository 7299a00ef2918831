//! Adaptive explicit Runge-Kutta integration (Dormand-Prince 5(4)).
//!
//! The embedded 5(4) pair with FSAL property and a PI step-size controller
//! is accurate and cheap enough for every linear oscillator equation that
//! appears in this crate; default tolerances are tight (`1e-10` relative)
//! because downstream quantities (Maslov indices, Bogoliubov coefficients)
//! are sensitive to accumulated phase error.

use crate::error::{Error, Result};

/// Integration controls.
#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Hard cap on the step size (used e.g. to guarantee that no step can
    /// straddle two zeros of an oscillatory component).
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-10,
            atol: 1e-12,
            max_step: f64::INFINITY,
            max_steps: 10_000_000,
        }
    }
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        OdeOptions {
            rtol: tol,
            atol: tol * 1e-2,
            ..Default::default()
        }
    }
}

/// One accepted integration step, reported to the observer callback.
/// `y0`/`y1` are the states at the step endpoints and `f0`/`f1` the
/// derivatives there, which is enough for cubic Hermite interpolation
/// inside the step.
pub struct Step<'a, const N: usize> {
    pub t0: f64,
    pub t1: f64,
    pub y0: &'a [f64; N],
    pub y1: &'a [f64; N],
    pub f0: &'a [f64; N],
    pub f1: &'a [f64; N],
}

impl<const N: usize> Step<'_, N> {
    /// Cubic Hermite interpolant of component `i` at `t` inside the step.
    pub fn interpolate(&self, i: usize, t: f64) -> f64 {
        let h = self.t1 - self.t0;
        let s = (t - self.t0) / h;
        let (y0, y1, d0, d1) = (self.y0[i], self.y1[i], self.f0[i] * h, self.f1[i] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        y0 * (2.0 * s3 - 3.0 * s2 + 1.0)
            + d0 * (s3 - 2.0 * s2 + s)
            + y1 * (-2.0 * s3 + 3.0 * s2)
            + d1 * (s3 - s2)
    }
}

// Dormand-Prince coefficients.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// 5th-order weights coincide with the last A row (FSAL).
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `y' = f(t, y)` from `t0` to `t_end` (either direction).
///
/// `observer` is invoked once per accepted step; return the final state.
pub fn integrate<const N: usize>(
    f: &dyn Fn(f64, &[f64; N]) -> [f64; N],
    t0: f64,
    t_end: f64,
    y0: [f64; N],
    opts: &OdeOptions,
    observer: &mut dyn FnMut(&Step<N>),
) -> Result<[f64; N]> {
    if !t0.is_finite() || !t_end.is_finite() {
        return Err(Error::Usage("non-finite integration bounds".into()));
    }
    if t0 == t_end {
        return Ok(y0);
    }
    let dir = (t_end - t0).signum();
    let span = (t_end - t0).abs();
    let mut t = t0;
    let mut y = y0;
    let mut dydt = f(t, &y);

    // Initial step guess from the scale of y and y'.
    let scale = |yi: f64| opts.atol + opts.rtol * yi.abs();
    let mut h = {
        let d0: f64 = y
            .iter()
            .map(|&v| (v / scale(v)).powi(2))
            .sum::<f64>()
            .sqrt();
        let d1: f64 = dydt
            .iter()
            .zip(y.iter())
            .map(|(&dv, &v)| (dv / scale(v)).powi(2))
            .sum::<f64>()
            .sqrt();
        let h0 = if d0 > 1e-10 && d1 > 1e-10 {
            0.01 * d0 / d1
        } else {
            1e-6 * span.max(1e-6)
        };
        h0.min(span).min(opts.max_step)
    };

    let mut err_prev: f64 = 1.0;
    let mut k: [[f64; N]; 7] = [[0.0; N]; 7];
    let mut nsteps = 0usize;

    while (t_end - t) * dir > 0.0 {
        nsteps += 1;
        if nsteps > opts.max_steps {
            return Err(Error::Numeric(format!(
                "step budget exhausted at t = {t} (requested end {t_end})"
            )));
        }
        h = h.min(opts.max_step).min((t_end - t).abs()).max(1e-14 * span);
        let hs = h * dir;

        k[0] = dydt;
        for i in 1..7 {
            let mut yi = y;
            for (j, kj) in k.iter().enumerate().take(i) {
                let a = A[i][j];
                if a != 0.0 {
                    for n in 0..N {
                        yi[n] += hs * a * kj[n];
                    }
                }
            }
            k[i] = f(t + C[i] * hs, &yi);
        }

        let mut y5 = y;
        let mut err = 0.0f64;
        for n in 0..N {
            let mut acc5 = 0.0;
            let mut acc4 = 0.0;
            for i in 0..7 {
                acc5 += B5[i] * k[i][n];
                acc4 += B4[i] * k[i][n];
            }
            y5[n] += hs * acc5;
            let sc = opts.atol + opts.rtol * y[n].abs().max(y5[n].abs());
            let e = hs * (acc5 - acc4) / sc;
            err += e * e;
        }
        err = (err / N as f64).sqrt();

        let finite = err.is_finite() && y5.iter().all(|v| v.is_finite());
        if finite && err <= 1.0 {
            // Accept.
            let t_new = t + hs;
            let f_new = k[6]; // FSAL: k7 = f(t+h, y5)
            observer(&Step {
                t0: t,
                t1: t_new,
                y0: &y,
                y1: &y5,
                f0: &k[0],
                f1: &f_new,
            });
            t = t_new;
            y = y5;
            dydt = f_new;
            // PI controller.
            let fac = 0.9 * err.max(1e-10).powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0);
            h *= fac.clamp(0.2, 5.0);
            err_prev = err.max(1e-10);
        } else {
            if h <= 1e-13 * span.max(1.0) {
                return Err(Error::Numeric(format!(
                    "step size underflow at t = {t} (requested end {t_end})"
                )));
            }
            h *= if finite {
                (0.9 * err.powf(-0.2)).clamp(0.1, 0.9)
            } else {
                0.25
            };
        }
    }
    Ok(y)
}
