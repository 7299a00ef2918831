//! Frequency profiles: the single input that fixes an oscillator model.
//!
//! A profile is a continuous map `t -> kappa(t)` on an open interval
//! `I = (t_minus, t_plus)`, either one of the built-in closed-form families
//! or a tabulated grid interpolated with a monotone (Fritsch-Carlson) cubic
//! rule.  Interval endpoints are deliberately open: the interesting models
//! are singular exactly there, and extrapolating across a singularity would
//! silently produce nonsense.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Built-in model families plus tabulated data.
#[derive(Clone, Debug)]
pub enum ProfileKind {
    /// kappa(t) = kappa0 (any sign; 0 is the free particle).
    Constant { kappa0: f64 },
    /// kappa(t) = a - 2 b cos(2t).
    Mathieu { a: f64, b: f64 },
    /// kappa(t) = omega^2 + 1/(4 t^2) on (0, infinity).
    GowdyT3 { omega: f64 },
    /// kappa(t) = omega^2 + (1 + csc^2 t)/4 on (0, pi).
    GowdyS { omega: f64 },
    /// Tabulated (t, kappa) samples with monotone-cubic interpolation.
    Table {
        ts: Vec<f64>,
        kappas: Vec<f64>,
        slopes: Vec<f64>,
    },
}

#[derive(Clone, Debug)]
pub struct FrequencyProfile {
    kind: ProfileKind,
    t_minus: f64,
    t_plus: f64,
}

/// JSON wire format for profiles.
///
/// `{"kind": "constant", "kappa0": 1.0}`, `{"kind": "mathieu", "a": 1, "b": 0.1}`,
/// `{"kind": "gowdy_t3", "omega": 1.0}`, `{"kind": "gowdy_s", "omega": 2.0}`
/// (or `"omega_prime"`), `{"kind": "free"}`, `{"kind": "tachyonic", "omega": 1.0}`,
/// `{"kind": "table", "t": [...], "kappa": [...]}`.  All kinds accept an
/// optional `"interval": [t_minus, t_plus]` restriction.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    Constant {
        kappa0: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        interval: Option<[f64; 2]>,
    },
    Free {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        interval: Option<[f64; 2]>,
    },
    Tachyonic {
        omega: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        interval: Option<[f64; 2]>,
    },
    Mathieu {
        a: f64,
        b: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        interval: Option<[f64; 2]>,
    },
    GowdyT3 {
        omega: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        interval: Option<[f64; 2]>,
    },
    GowdyS {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        omega: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        omega_prime: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        interval: Option<[f64; 2]>,
    },
    Table {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        kappa: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        interval: Option<[f64; 2]>,
    },
}

impl FrequencyProfile {
    pub fn constant(kappa0: f64) -> Self {
        FrequencyProfile {
            kind: ProfileKind::Constant { kappa0 },
            t_minus: f64::NEG_INFINITY,
            t_plus: f64::INFINITY,
        }
    }

    pub fn free() -> Self {
        Self::constant(0.0)
    }

    /// kappa = -omega^2 (the inverted oscillator).
    pub fn tachyonic(omega: f64) -> Self {
        Self::constant(-omega * omega)
    }

    pub fn mathieu(a: f64, b: f64) -> Self {
        FrequencyProfile {
            kind: ProfileKind::Mathieu { a, b },
            t_minus: f64::NEG_INFINITY,
            t_plus: f64::INFINITY,
        }
    }

    pub fn gowdy_t3(omega: f64) -> Self {
        FrequencyProfile {
            kind: ProfileKind::GowdyT3 { omega },
            t_minus: 0.0,
            t_plus: f64::INFINITY,
        }
    }

    pub fn gowdy_s(omega: f64) -> Self {
        FrequencyProfile {
            kind: ProfileKind::GowdyS { omega },
            t_minus: 0.0,
            t_plus: std::f64::consts::PI,
        }
    }

    /// gowdy_s parametrized by omega' = sqrt(1 + 4 omega^2).
    pub fn gowdy_s_from_omega_prime(omega_prime: f64) -> Result<Self> {
        if omega_prime < 1.0 {
            return Err(Error::Usage(format!(
                "omega_prime must be >= 1, got {omega_prime}"
            )));
        }
        Ok(Self::gowdy_s(0.5 * (omega_prime * omega_prime - 1.0).sqrt()))
    }

    /// Builds a tabulated profile; the natural interval is the grid span.
    pub fn table(ts: Vec<f64>, kappas: Vec<f64>) -> Result<Self> {
        if ts.len() != kappas.len() || ts.len() < 2 {
            return Err(Error::Usage(
                "table profile needs >= 2 samples with matching lengths".into(),
            ));
        }
        if !ts.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Usage("table abscissae must be strictly increasing".into()));
        }
        if !kappas.iter().all(|k| k.is_finite()) {
            return Err(Error::Usage("table values must be finite".into()));
        }
        let slopes = pchip_slopes(&ts, &kappas);
        let (t_minus, t_plus) = (ts[0], *ts.last().unwrap());
        Ok(FrequencyProfile {
            kind: ProfileKind::Table { ts, kappas, slopes },
            t_minus,
            t_plus,
        })
    }

    /// Restricts the interval (must stay inside the natural one).
    pub fn with_interval(mut self, t_minus: f64, t_plus: f64) -> Result<Self> {
        if !(t_minus < t_plus) || t_minus < self.t_minus || t_plus > self.t_plus {
            return Err(Error::Usage(format!(
                "interval [{t_minus}, {t_plus}] is not inside ({}, {})",
                self.t_minus, self.t_plus
            )));
        }
        self.t_minus = t_minus;
        self.t_plus = t_plus;
        Ok(self)
    }

    pub fn from_spec(spec: &ProfileSpec) -> Result<Self> {
        let (profile, interval) = match spec {
            ProfileSpec::Constant { kappa0, interval } => (Self::constant(*kappa0), interval),
            ProfileSpec::Free { interval } => (Self::free(), interval),
            ProfileSpec::Tachyonic { omega, interval } => (Self::tachyonic(*omega), interval),
            ProfileSpec::Mathieu { a, b, interval } => (Self::mathieu(*a, *b), interval),
            ProfileSpec::GowdyT3 { omega, interval } => (Self::gowdy_t3(*omega), interval),
            ProfileSpec::GowdyS {
                omega,
                omega_prime,
                interval,
            } => {
                let p = match (omega, omega_prime) {
                    (Some(w), None) => Self::gowdy_s(*w),
                    (None, Some(wp)) => Self::gowdy_s_from_omega_prime(*wp)?,
                    _ => {
                        return Err(Error::Usage(
                            "gowdy_s takes exactly one of omega / omega_prime".into(),
                        ))
                    }
                };
                (p, interval)
            }
            ProfileSpec::Table {
                t,
                kappa,
                path,
                interval,
            } => {
                let p = match (t, kappa, path) {
                    (Some(ts), Some(ks), None) => Self::table(ts.clone(), ks.clone())?,
                    (None, None, Some(path)) => Self::table_from_csv(path)?,
                    _ => {
                        return Err(Error::Usage(
                            "table takes either inline t/kappa arrays or a path".into(),
                        ))
                    }
                };
                (p, interval)
            }
        };
        match interval {
            Some([a, b]) => profile.with_interval(*a, *b),
            None => Ok(profile),
        }
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let spec: ProfileSpec = serde_json::from_str(json)?;
        Self::from_spec(&spec)
    }

    /// Two-column CSV (t, kappa) with a mandatory header line.
    pub fn table_from_csv(path: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut ts = Vec::new();
        let mut ks = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if i == 0 {
                // Header is mandatory; reject files that start with data.
                if line.split(',').next().unwrap_or("").parse::<f64>().is_ok() {
                    return Err(Error::Usage(format!("{path}: missing CSV header line")));
                }
                continue;
            }
            let mut cols = line.split(',');
            let (a, b) = (cols.next(), cols.next());
            match (a, b) {
                (Some(a), Some(b)) => {
                    let t: f64 = a.trim().parse().map_err(|_| {
                        Error::Usage(format!("{path}:{}: bad number {a:?}", i + 1))
                    })?;
                    let k: f64 = b.trim().parse().map_err(|_| {
                        Error::Usage(format!("{path}:{}: bad number {b:?}", i + 1))
                    })?;
                    ts.push(t);
                    ks.push(k);
                }
                _ => return Err(Error::Usage(format!("{path}:{}: expected two columns", i + 1))),
            }
        }
        Self::table(ts, ks)
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.t_minus, self.t_plus)
    }

    pub fn contains(&self, t: f64) -> bool {
        t > self.t_minus && t < self.t_plus && t.is_finite()
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(Error::Usage(format!(
                "time {t} outside the open interval ({}, {})",
                self.t_minus, self.t_plus
            )))
        }
    }

    pub fn kind(&self) -> &ProfileKind {
        &self.kind
    }

    /// kappa(t) with the open-interval domain check.
    pub fn kappa(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(self.kappa_unchecked(t))
    }

    /// kappa(t) without the domain check; returns NaN outside the interval
    /// so that integrators fail loudly rather than extrapolate.
    pub fn kappa_unchecked(&self, t: f64) -> f64 {
        if !self.contains(t) {
            return f64::NAN;
        }
        match &self.kind {
            ProfileKind::Constant { kappa0 } => *kappa0,
            ProfileKind::Mathieu { a, b } => a - 2.0 * b * (2.0 * t).cos(),
            ProfileKind::GowdyT3 { omega } => omega * omega + 0.25 / (t * t),
            ProfileKind::GowdyS { omega } => {
                let s = t.sin();
                omega * omega + 0.25 * (1.0 + 1.0 / (s * s))
            }
            ProfileKind::Table { ts, kappas, slopes } => pchip_eval(ts, kappas, slopes, t),
        }
    }
}

/// Fritsch-Carlson monotone slopes for cubic Hermite interpolation.
fn pchip_slopes(ts: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = ts.len();
    let h: Vec<f64> = ts.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = ys
        .windows(2)
        .zip(&h)
        .map(|(w, &hi)| (w[1] - w[0]) / hi)
        .collect();
    let mut d = vec![0.0; n];
    if n == 2 {
        d[0] = delta[0];
        d[1] = delta[0];
        return d;
    }
    for i in 1..n - 1 {
        if delta[i - 1] * delta[i] > 0.0 {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    // One-sided three-point endpoint formula with monotonicity clamping.
    let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
        let mut g = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if g * d0 <= 0.0 {
            g = 0.0;
        } else if d0 * d1 < 0.0 && g.abs() > 3.0 * d0.abs() {
            g = 3.0 * d0;
        }
        g
    };
    d[0] = end(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

fn pchip_eval(ts: &[f64], ys: &[f64], d: &[f64], t: f64) -> f64 {
    let i = match ts.binary_search_by(|x| x.total_cmp(&t)) {
        Ok(i) => return ys[i.min(ts.len() - 1)],
        Err(i) => i.clamp(1, ts.len() - 1) - 1,
    };
    let h = ts[i + 1] - ts[i];
    let s = (t - ts[i]) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    ys[i] * (2.0 * s3 - 3.0 * s2 + 1.0)
        + d[i] * h * (s3 - 2.0 * s2 + s)
        + ys[i + 1] * (-2.0 * s3 + 3.0 * s2)
        + d[i + 1] * h * (s3 - s2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_kinds() {
        assert_eq!(FrequencyProfile::constant(2.5).kappa(3.0).unwrap(), 2.5);
        assert_eq!(FrequencyProfile::free().kappa(-7.0).unwrap(), 0.0);
        assert_eq!(FrequencyProfile::tachyonic(2.0).kappa(0.0).unwrap(), -4.0);
        let m = FrequencyProfile::mathieu(1.0, 0.25);
        assert!((m.kappa(0.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((m.kappa(std::f64::consts::FRAC_PI_2).unwrap() - 1.5).abs() < 1e-15);
        let g = FrequencyProfile::gowdy_t3(1.0);
        assert!((g.kappa(0.5).unwrap() - 2.0).abs() < 1e-15);
        let gs = FrequencyProfile::gowdy_s(1.0);
        assert!((gs.kappa(std::f64::consts::FRAC_PI_2).unwrap() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn open_endpoints_rejected() {
        let g = FrequencyProfile::gowdy_t3(1.0);
        assert!(g.kappa(0.0).is_err());
        assert!(g.kappa(-1.0).is_err());
        assert!(g.kappa(1e9).is_ok());
        let gs = FrequencyProfile::gowdy_s(1.0);
        assert!(gs.kappa(std::f64::consts::PI).is_err());
    }

    #[test]
    fn json_round_trips() {
        let p = FrequencyProfile::from_json(r#"{"kind":"mathieu","a":2.0,"b":0.3}"#).unwrap();
        assert!((p.kappa(0.0).unwrap() - 1.4).abs() < 1e-15);
        let p = FrequencyProfile::from_json(r#"{"kind":"gowdy_s","omega_prime":5.0}"#).unwrap();
        // omega = sqrt(6): kappa(pi/2) = 6 + 1/2.
        assert!((p.kappa(std::f64::consts::FRAC_PI_2).unwrap() - 6.5).abs() < 1e-12);
        assert!(FrequencyProfile::from_json(r#"{"kind":"mathieu","a":1.0}"#).is_err());
        assert!(FrequencyProfile::from_json(r#"{"kind":"constant","kappa0":1,"junk":2}"#).is_err());
    }

    #[test]
    fn interval_restriction() {
        let p = FrequencyProfile::constant(1.0)
            .with_interval(0.0, 10.0)
            .unwrap();
        assert!(p.kappa(5.0).is_ok());
        assert!(p.kappa(0.0).is_err());
        assert!(p.kappa(10.5).is_err());
        assert!(FrequencyProfile::gowdy_s(1.0).with_interval(-1.0, 1.0).is_err());
    }

    #[test]
    fn table_interpolation_is_exact_on_nodes_and_monotone() {
        let ts: Vec<f64> = (0..=20).map(|i| i as f64 * 0.5).collect();
        let ks: Vec<f64> = ts.iter().map(|&t| (t * 0.7).tanh()).collect();
        let p = FrequencyProfile::table(ts.clone(), ks.clone()).unwrap();
        for (t, k) in ts.iter().zip(&ks).skip(1).take(18) {
            assert!((p.kappa(*t).unwrap() - k).abs() < 1e-14);
        }
        // Monotone data stays monotone under PCHIP.
        let mut prev = p.kappa(0.26).unwrap();
        let mut t = 0.27;
        while t < 9.7 {
            let v = p.kappa(t).unwrap();
            assert!(v >= prev - 1e-12);
            prev = v;
            t += 0.01;
        }
    }

    #[test]
    fn table_accuracy_on_smooth_profile() {
        // Dense tabulation of the Mathieu profile should reproduce it well.
        let ts: Vec<f64> = (0..=4000).map(|i| i as f64 * 0.005).collect();
        let ks: Vec<f64> = ts.iter().map(|&t| 2.0 - 0.6 * (2.0 * t).cos()).collect();
        let p = FrequencyProfile::table(ts, ks).unwrap();
        let exact = FrequencyProfile::mathieu(2.0, 0.3);
        let mut worst: f64 = 0.0;
        let mut t = 0.101;
        while t < 19.9 {
            worst = worst.max((p.kappa(t).unwrap() - exact.kappa(t).unwrap()).abs());
            t += 0.0137;
        }
        // PCHIP limiting reduces to O(h^2) near extrema of the data.
        assert!(worst < 1e-5, "PCHIP error {worst}");
    }

    #[test]
    fn bad_tables_rejected() {
        assert!(FrequencyProfile::table(vec![0.0], vec![1.0]).is_err());
        assert!(FrequencyProfile::table(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(FrequencyProfile::table(vec![1.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(FrequencyProfile::table(vec![0.0, 1.0], vec![1.0, f64::NAN]).is_err());
    }
}
