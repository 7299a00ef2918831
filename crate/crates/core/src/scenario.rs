//! Scenario-driven front end: JSON scenario parsing, dispatch to the
//! computational modules, and deterministic CSV/JSON artifact emission.
//!
//! Every run produces one or more CSV files (fixed 17-significant-digit
//! float formatting, '.' decimal, ',' separator, mandatory header) plus a
//! `manifest.json` recording the tool version, tolerances, and the outcome
//! of the invariant self-checks.  All reductions happen in a fixed order,
//! so outputs are byte-identical regardless of the worker count.

use crate::classical::{index_of, sample_solution, solve_fundamental, FundamentalPair};
use crate::ep::{ep_from_fundamental, ep_residual, EPQuadraticForm, EPSolution};
use crate::error::{Error, Result};
use crate::field::{
    appendix_factors, factorization_obstruction, field_coherent_variances, mode_bogoliubov,
    unitarity_test, ModeFamily, RepresentationSeq,
};
use crate::models::{canonical_ep, closed_form_pair, mathieu_monodromy};
use crate::profile::{FrequencyProfile, ProfileSpec};
use crate::propagator::{kernel_via_factorization, KernelValue};
use crate::semiclassical::{expectations, uncertainties, SemiclassicalState};
use crate::transitions::{bogoliubov, AmplitudeTable};
use num_complex::Complex64;
use serde::Deserialize;
use serde_json::{json, Value};

/// 17 significant digits, locale-independent.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// One emitted artifact set: named CSV files, named JSON side-files, and
/// the manifest.
#[derive(Debug)]
pub struct RunOutput {
    pub csv: Vec<(String, String)>,
    pub json: Vec<(String, Value)>,
    pub manifest: Value,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveScenario {
    pub profile: ProfileSpec,
    pub t0: f64,
    pub times: Vec<f64>,
    /// Reference frequency for the Bogoliubov self-check.
    #[serde(default)]
    pub omega: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagateScenario {
    pub profile: ProfileSpec,
    pub t0: f64,
    pub t: f64,
    pub qs: Vec<f64>,
    pub q0s: Vec<f64>,
    /// Ermakov-Pinney quadratic forms (a11, a12, a22); two or more enable
    /// the envelope-independence cross-check.
    #[serde(default)]
    pub ep_forms: Vec<[f64; 3]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionScenario {
    pub profile: ProfileSpec,
    pub t0: f64,
    pub t: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub nmax: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemiclassicalScenario {
    pub profile: ProfileSpec,
    pub t0: f64,
    pub times: Vec<f64>,
    /// Coherent label (Re z, Im z).
    pub z: [f64; 2],
    /// Optional EP quadratic form; the canonical envelope is used when
    /// absent (falling back to the identity form).
    #[serde(default)]
    pub form: Option<[f64; 3]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldUnitarityScenario {
    pub family: String,
    pub t0: f64,
    pub t: f64,
    pub schedule: Vec<i64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldFactorizeScenario {
    pub family: String,
    pub t0: f64,
    pub t: f64,
    pub l_max: i64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldVariancesScenario {
    pub family: String,
    pub t0: f64,
    pub t: f64,
    pub l_values: Vec<i64>,
    /// Optional time sweep; emits (t, l) rows for figure data.
    #[serde(default)]
    pub sweep_t: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct FiguresScenario {
    /// Points per sweep.
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_points() -> usize {
    120
}

#[derive(Debug)]
pub enum Scenario {
    Solve(SolveScenario),
    Propagate(PropagateScenario),
    Transition(TransitionScenario),
    Semiclassical(SemiclassicalScenario),
    ModelsValidate,
    FieldUnitarity(FieldUnitarityScenario),
    FieldFactorize(FieldFactorizeScenario),
    FieldVariances(FieldVariancesScenario),
    Figures(FiguresScenario),
}

impl Scenario {
    pub fn command(&self) -> &'static str {
        match self {
            Scenario::Solve(_) => "solve",
            Scenario::Propagate(_) => "propagate",
            Scenario::Transition(_) => "transition",
            Scenario::Semiclassical(_) => "semiclassical",
            Scenario::ModelsValidate => "models_validate",
            Scenario::FieldUnitarity(_) => "field_unitarity",
            Scenario::FieldFactorize(_) => "field_factorize",
            Scenario::FieldVariances(_) => "field_variances",
            Scenario::Figures(_) => "figures",
        }
    }
}

/// Strict scenario parsing: the `command` tag selects the schema and any
/// unknown key is rejected.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let mut v: Value = serde_json::from_str(text)?;
    let obj = v
        .as_object_mut()
        .ok_or_else(|| Error::Usage("scenario must be a JSON object".into()))?;
    let cmd = obj
        .remove("command")
        .and_then(|c| c.as_str().map(str::to_owned))
        .ok_or_else(|| Error::Usage("scenario is missing the \"command\" tag".into()))?;
    Ok(match cmd.as_str() {
        "solve" => Scenario::Solve(serde_json::from_value(v)?),
        "propagate" => Scenario::Propagate(serde_json::from_value(v)?),
        "transition" => Scenario::Transition(serde_json::from_value(v)?),
        "semiclassical" => Scenario::Semiclassical(serde_json::from_value(v)?),
        "models_validate" => {
            if !v.as_object().map(|o| o.is_empty()).unwrap_or(false) {
                return Err(Error::Usage(
                    "models_validate takes no scenario fields".into(),
                ));
            }
            Scenario::ModelsValidate
        }
        "field_unitarity" => Scenario::FieldUnitarity(serde_json::from_value(v)?),
        "field_factorize" => Scenario::FieldFactorize(serde_json::from_value(v)?),
        "field_variances" => Scenario::FieldVariances(serde_json::from_value(v)?),
        "figures" => Scenario::Figures(serde_json::from_value(v)?),
        other => {
            return Err(Error::Usage(format!(
                "unknown scenario command {other:?}"
            )))
        }
    })
}

pub fn parse_family(name: &str) -> Result<ModeFamily> {
    match name {
        "minkowski" => Ok(ModeFamily::Minkowski),
        "gowdy_t3" => Ok(ModeFamily::GowdyT3),
        "gowdy_s" => Ok(ModeFamily::GowdyS),
        "tachyonic" => Ok(ModeFamily::Tachyonic),
        other => Err(Error::Usage(format!(
            "unknown mode family {other:?} (expected minkowski | gowdy_t3 | gowdy_s | tachyonic)"
        ))),
    }
}

/// Invariant-check bookkeeping for the manifest.
struct Invariants {
    entries: Vec<(String, Option<(bool, f64, f64)>)>, // name -> (pass, value, tol)
}

impl Invariants {
    fn new() -> Self {
        let mut s = Invariants {
            entries: Vec::new(),
        };
        // Every manifest carries these four slots.
        for name in [
            "wronskian",
            "hyperbolic_identity",
            "parity_zeros",
            "rho_independence",
        ] {
            s.entries.push((name.to_string(), None));
        }
        s
    }

    fn set(&mut self, name: &str, value: f64, tol: f64) {
        let rec = Some((value.abs() <= tol, value, tol));
        if let Some(e) = self.entries.iter_mut().find(|e| e.0 == name) {
            e.1 = rec;
        } else {
            self.entries.push((name.to_string(), rec));
        }
    }

    fn all_pass(&self) -> bool {
        self.entries
            .iter()
            .all(|(_, v)| v.map(|(p, _, _)| p).unwrap_or(true))
    }

    fn to_json(&self) -> Value {
        let mut map = serde_json::Map::new();
        for (name, v) in &self.entries {
            let entry = match v {
                None => json!({ "checked": false, "pass": Value::Null }),
                Some((pass, value, tol)) => json!({
                    "checked": true,
                    "pass": pass,
                    "value": value,
                    "tolerance": tol,
                }),
            };
            map.insert(name.clone(), entry);
        }
        Value::Object(map)
    }
}

fn manifest(command: &str, tol: f64, inv: &Invariants, outputs: &[&str], extra: Value) -> Value {
    let mut m = serde_json::Map::new();
    m.insert("tool".into(), json!("tdho"));
    m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    m.insert("command".into(), json!(command));
    m.insert("tolerance".into(), json!(tol));
    m.insert("invariants".into(), inv.to_json());
    m.insert("outputs".into(), json!(outputs));
    if let Value::Object(e) = extra {
        for (k, v) in e {
            m.insert(k, v);
        }
    }
    Value::Object(m)
}

fn csv(header: &str, rows: Vec<Vec<f64>>) -> String {
    let mut out = String::with_capacity(rows.len() * 64 + header.len() + 1);
    out.push_str(header);
    out.push('\n');
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| fmt_float(*v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

fn solve_pair(profile: &FrequencyProfile, t0: f64, t: f64, tol: f64) -> Result<FundamentalPair> {
    if t == t0 {
        Ok(FundamentalPair::identity(t0))
    } else {
        solve_fundamental(profile, t0, t, tol)
    }
}

/// Branch index of `s` on (t0, t] from a sampled solution.
fn pair_index(profile: &FrequencyProfile, t0: f64, t: f64, tol: f64) -> Result<i64> {
    if t == t0 {
        return Ok(0);
    }
    let samples = sample_solution(profile, t0, t, false, tol)?;
    Ok(index_of(&samples, t0, t)?.m)
}

/// Entry point used by the CLI and the test harness.
pub fn run(scenario: &Scenario, tol: f64) -> Result<RunOutput> {
    match scenario {
        Scenario::Solve(s) => run_solve(s, tol),
        Scenario::Propagate(s) => run_propagate(s, tol),
        Scenario::Transition(s) => run_transition(s, tol),
        Scenario::Semiclassical(s) => run_semiclassical(s, tol),
        Scenario::ModelsValidate => run_models_validate(tol),
        Scenario::FieldUnitarity(s) => run_field_unitarity(s, tol),
        Scenario::FieldFactorize(s) => run_field_factorize(s, tol),
        Scenario::FieldVariances(s) => run_field_variances(s, tol),
        Scenario::Figures(s) => run_figures(s, tol),
    }
}

fn run_solve(s: &SolveScenario, tol: f64) -> Result<RunOutput> {
    if s.times.is_empty() {
        return Err(Error::Usage("solve needs at least one target time".into()));
    }
    let profile = FrequencyProfile::from_spec(&s.profile)?;
    let mut rows = Vec::with_capacity(s.times.len());
    let mut w_defect = 0.0f64;
    let mut h_defect: Option<f64> = None;
    for &t in &s.times {
        let p = solve_pair(&profile, s.t0, t, tol)?;
        w_defect = w_defect.max((p.wronskian() - 1.0).abs());
        if let Some(w) = s.omega {
            let bg = bogoliubov(&p, w)?;
            let d = bg.hyperbolic_defect();
            h_defect = Some(h_defect.unwrap_or(0.0).max(d));
        }
        rows.push(vec![t, p.c, p.s, p.c_dot, p.s_dot]);
    }
    let mut inv = Invariants::new();
    inv.set("wronskian", w_defect, 1e-8);
    if let Some(d) = h_defect {
        inv.set("hyperbolic_identity", d, 1e-10);
    }
    let files = vec![("solve.csv".to_string(), csv("t,c,s,c_dot,s_dot", rows))];
    let m = manifest("solve", tol, &inv, &["solve.csv"], json!({}));
    finish(files, vec![], m, &inv)
}

fn run_propagate(s: &PropagateScenario, tol: f64) -> Result<RunOutput> {
    if s.qs.is_empty() || s.q0s.is_empty() {
        return Err(Error::Usage("propagate needs nonempty q and q0 grids".into()));
    }
    let profile = FrequencyProfile::from_spec(&s.profile)?;
    let pair = solve_pair(&profile, s.t0, s.t, tol)?;
    let index = pair_index(&profile, s.t0, s.t, tol)?;
    let kv = KernelValue::regular(&pair, index)?;
    let mut rows = Vec::with_capacity(s.qs.len() * s.q0s.len());
    for &q in &s.qs {
        for &q0 in &s.q0s {
            let k = kv.eval(q, q0)?;
            rows.push(vec![q, q0, k.re, k.im]);
        }
    }
    let mut inv = Invariants::new();
    inv.set("wronskian", (pair.wronskian() - 1.0).abs(), 1e-8);
    inv.set(
        "hyperbolic_identity",
        bogoliubov(&pair, 1.0)?.hyperbolic_defect(),
        1e-10,
    );
    if s.ep_forms.len() >= 2 {
        let mut eps = Vec::new();
        for f in &s.ep_forms {
            let form = EPQuadraticForm::new(f[0], f[1], f[2])?;
            eps.push(ep_from_fundamental(form, &profile, s.t0)?);
        }
        let mut defect = 0.0f64;
        let probes: Vec<(f64, f64)> = vec![
            (s.qs[0], s.q0s[0]),
            (s.qs[s.qs.len() / 2], s.q0s[s.q0s.len() / 2]),
            (*s.qs.last().unwrap(), *s.q0s.last().unwrap()),
        ];
        for (q, q0) in probes {
            let base = kernel_via_factorization(&eps[0], s.t0, s.t, q, q0)?;
            for ep in &eps[1..] {
                let other = kernel_via_factorization(ep, s.t0, s.t, q, q0)?;
                defect = defect.max((base - other).norm());
            }
            defect = defect.max((base - kv.eval(q, q0)?).norm());
        }
        inv.set("rho_independence", defect, 1e-8);
    }
    let files = vec![(
        "propagate.csv".to_string(),
        csv("q,q0,re_k,im_k", rows),
    )];
    let extra = json!({
        "t0": s.t0, "t": s.t, "branch_index": index,
    });
    let m = manifest("propagate", tol, &inv, &["propagate.csv"], extra);
    finish(files, vec![], m, &inv)
}

fn run_transition(s: &TransitionScenario, tol: f64) -> Result<RunOutput> {
    if !(s.omega1 > 0.0 && s.omega2 > 0.0) {
        return Err(Error::Usage("transition needs positive omega1, omega2".into()));
    }
    let profile = FrequencyProfile::from_spec(&s.profile)?;
    let pair = solve_pair(&profile, s.t0, s.t, tol)?;
    let index = pair_index(&profile, s.t0, s.t, tol)?;
    let table = AmplitudeTable::build(&pair, index, s.omega1, s.omega2, s.nmax)?;
    let mut rows = Vec::new();
    let mut max_amp = 0.0f64;
    let mut parity_defect = 0.0f64;
    for n1 in 0..=s.nmax {
        for n2 in 0..=s.nmax {
            let a = table.get(n1, n2);
            max_amp = max_amp.max(a.norm());
            if (n1 + n2) % 2 == 1 {
                parity_defect = parity_defect.max(a.norm());
            }
            rows.push(vec![n1 as f64, n2 as f64, a.re, a.im, a.norm()]);
        }
    }
    let mut inv = Invariants::new();
    inv.set("wronskian", (pair.wronskian() - 1.0).abs(), 1e-8);
    inv.set(
        "hyperbolic_identity",
        bogoliubov(&pair, s.omega1)?.hyperbolic_defect(),
        1e-10,
    );
    inv.set("parity_zeros", parity_defect / max_amp.max(1e-300), 1e-10);
    let row_sums: Vec<f64> = (0..=s.nmax.min(2))
        .map(|n1| table.row_sum_sq(n1, s.nmax))
        .collect();
    let files = vec![(
        "transition.csv".to_string(),
        csv("n1,n2,re,im,abs", rows),
    )];
    let extra = json!({ "branch_index": index, "row_sums": row_sums });
    let m = manifest("transition", tol, &inv, &["transition.csv"], extra);
    finish(files, vec![], m, &inv)
}

fn run_semiclassical(s: &SemiclassicalScenario, tol: f64) -> Result<RunOutput> {
    if s.times.is_empty() {
        return Err(Error::Usage("semiclassical needs target times".into()));
    }
    let profile = FrequencyProfile::from_spec(&s.profile)?;
    let ep: EPSolution = match s.form {
        Some(f) => ep_from_fundamental(EPQuadraticForm::new(f[0], f[1], f[2])?, &profile, s.t0)?,
        None => canonical_ep(&profile).or_else(|_| {
            ep_from_fundamental(EPQuadraticForm::identity(), &profile, s.t0)
        })?,
    };
    let z = Complex64::new(s.z[0], s.z[1]);
    let state = SemiclassicalState::new(&ep, z, s.t0)?;
    let mut rows = Vec::with_capacity(s.times.len());
    let mut res = 0.0f64;
    for &t in &s.times {
        let (q, p) = expectations(&state, t)?;
        let u = uncertainties(&ep, t)?;
        res = res.max(ep_residual(&ep, t)?.abs());
        rows.push(vec![t, q, p, u.dq, u.dp, u.product]);
    }
    let t_last = *s.times.last().unwrap();
    let pair = solve_pair(&profile, s.t0, t_last, tol)?;
    let mut inv = Invariants::new();
    inv.set("wronskian", (pair.wronskian() - 1.0).abs(), 1e-8);
    inv.set(
        "hyperbolic_identity",
        bogoliubov(&pair, 1.0)?.hyperbolic_defect(),
        1e-10,
    );
    let files = vec![(
        "semiclassical.csv".to_string(),
        csv("t,q_mean,p_mean,dq,dp,product", rows),
    )];
    let extra = json!({ "max_ep_residual": res });
    let m = manifest("semiclassical", tol, &inv, &["semiclassical.csv"], extra);
    finish(files, vec![], m, &inv)
}

fn run_models_validate(tol: f64) -> Result<RunOutput> {
    let cases: Vec<(&str, FrequencyProfile, f64, Vec<f64>)> = vec![
        (
            "constant",
            FrequencyProfile::constant(2.25),
            0.0,
            vec![0.7, 1.9, 3.6],
        ),
        ("free", FrequencyProfile::free(), 0.0, vec![0.8, 2.5]),
        (
            "tachyonic",
            FrequencyProfile::tachyonic(1.0),
            0.0,
            vec![0.6, 1.4],
        ),
        (
            "gowdy_t3",
            FrequencyProfile::gowdy_t3(2.0),
            0.5,
            vec![1.2, 2.5, 4.0],
        ),
        (
            "gowdy_s",
            FrequencyProfile::gowdy_s_from_omega_prime(5.0)?,
            0.4,
            vec![1.1, 2.2, 2.9],
        ),
    ];
    let mut rows = Vec::new();
    let mut max_defect = 0.0f64;
    let mut w_defect = 0.0f64;
    for (idx, (_, profile, t0, times)) in cases.iter().enumerate() {
        for &t in times {
            let ode = solve_fundamental(profile, *t0, t, tol)?;
            let cf = closed_form_pair(profile, *t0, t)?;
            let d = (ode.c - cf.c)
                .abs()
                .max((ode.s - cf.s).abs())
                .max((ode.c_dot - cf.c_dot).abs())
                .max((ode.s_dot - cf.s_dot).abs());
            max_defect = max_defect.max(d);
            w_defect = w_defect.max((ode.wronskian() - 1.0).abs());
            rows.push(vec![idx as f64, *t0, t, d, (cf.wronskian() - 1.0).abs()]);
        }
    }
    let mono = mathieu_monodromy(1.0, 0.1)?;
    let mut inv = Invariants::new();
    inv.set("wronskian", w_defect, 1e-8);
    inv.set("closed_form_match", max_defect, 1e-7);
    let files = vec![(
        "models_validate.csv".to_string(),
        csv("model_index,t0,t,pair_defect,wronskian_defect", rows),
    )];
    let extra = json!({
        "models": ["constant", "free", "tachyonic", "gowdy_t3", "gowdy_s"],
        "mathieu_trace_a1_b01": mono.trace,
    });
    let m = manifest("models_validate", tol, &inv, &["models_validate.csv"], extra);
    finish(files, vec![], m, &inv)
}

fn run_field_unitarity(s: &FieldUnitarityScenario, tol: f64) -> Result<RunOutput> {
    let family = parse_family(&s.family)?;
    let rep = RepresentationSeq::standard();
    let report = unitarity_test(family, &rep, s.t0, s.t, &s.schedule)?;
    let mult = family.multiplicity();
    let mut rows = Vec::with_capacity(report.summands.len());
    let mut acc = 0.0f64;
    for (i, b2) in report.summands.iter().enumerate() {
        acc += mult * b2;
        rows.push(vec![(i + 1) as f64, *b2, acc]);
    }
    let mut inv = Invariants::new();
    let l_max = *s.schedule.last().unwrap();
    let mut h_defect = 0.0f64;
    let mut w_defect = 0.0f64;
    for l in [1, (l_max / 2).max(1), l_max] {
        let (a, b) = mode_bogoliubov(family, &rep, l, s.t0, s.t)?;
        h_defect = h_defect.max((a.norm_sqr() - b.norm_sqr() - 1.0).abs());
        let p = family.mode_pair(l, s.t0, s.t)?;
        w_defect = w_defect.max((p.wronskian() - 1.0).abs());
    }
    inv.set("wronskian", w_defect, 1e-8);
    inv.set("hyperbolic_identity", h_defect, 1e-10);
    let files = vec![(
        "field_unitarity.csv".to_string(),
        csv("l,b_sq,partial_sum", rows),
    )];
    let report_json = serde_json::to_value(&report)?;
    let m = manifest(
        "field_unitarity",
        tol,
        &inv,
        &["field_unitarity.csv", "truncation_report.json"],
        json!({ "verdict": report.verdict, "fitted_decay": report.fitted_decay }),
    );
    finish(
        files,
        vec![("truncation_report.json".to_string(), report_json)],
        m,
        &inv,
    )
}

fn run_field_factorize(s: &FieldFactorizeScenario, tol: f64) -> Result<RunOutput> {
    let family = parse_family(&s.family)?;
    let rep = RepresentationSeq::standard();
    let report = factorization_obstruction(family, &rep, None, s.t0, s.t, s.l_max)?;
    let mut rows = Vec::with_capacity(report.l_values.len());
    for i in 0..report.l_values.len() {
        rows.push(vec![
            report.l_values[i] as f64,
            report.squeeze_terms[i],
            report.rotation_terms[i],
            report.squeeze_partial[i],
            report.rotation_partial[i],
        ]);
    }
    // Composition self-check on a sample of labels.
    let mut comp_defect = 0.0f64;
    let mut sample: Vec<i64> = vec![1, 2, 5, (s.l_max / 4).max(1), s.l_max.min(200)];
    sample.dedup();
    for l in sample {
        let f = appendix_factors(family, &rep, l, s.t0, s.t)?;
        let (ca, cb) = f.composed();
        let (da, db) = mode_bogoliubov(family, &rep, l, s.t0, s.t)?;
        comp_defect = comp_defect.max((ca - da).norm()).max((cb - db).norm());
    }
    let mut inv = Invariants::new();
    inv.set("factor_composition", comp_defect, 1e-8);
    let p = family.mode_pair(1, s.t0, s.t)?;
    inv.set("wronskian", (p.wronskian() - 1.0).abs(), 1e-8);
    let (a, b) = mode_bogoliubov(family, &rep, 1, s.t0, s.t)?;
    inv.set(
        "hyperbolic_identity",
        (a.norm_sqr() - b.norm_sqr() - 1.0).abs(),
        1e-10,
    );
    let files = vec![(
        "field_factorize.csv".to_string(),
        csv(
            "l,squeeze_term,rotation_term,squeeze_partial,rotation_partial",
            rows,
        ),
    )];
    let report_json = serde_json::to_value(&report)?;
    let extra = json!({
        "rho_scaled_defect": report.rho_scaled_defect,
        "rho_unit_defect": report.rho_unit_defect,
        "squeeze_tail_max": report.squeeze_tail_max,
        "rotation_tail_max": report.rotation_tail_max,
    });
    let m = manifest(
        "field_factorize",
        tol,
        &inv,
        &["field_factorize.csv", "obstruction_report.json"],
        extra,
    );
    finish(
        files,
        vec![("obstruction_report.json".to_string(), report_json)],
        m,
        &inv,
    )
}

fn run_field_variances(s: &FieldVariancesScenario, tol: f64) -> Result<RunOutput> {
    let family = parse_family(&s.family)?;
    let rep = RepresentationSeq::standard();
    if s.l_values.is_empty() {
        return Err(Error::Usage("field variances needs l_values".into()));
    }
    let times: Vec<f64> = s.sweep_t.clone().unwrap_or_else(|| vec![s.t]);
    let mut rows = Vec::new();
    let mut h_defect = 0.0f64;
    for &t in &times {
        for &l in &s.l_values {
            let (dq, dp) = field_coherent_variances(family, &rep, l, s.t0, t)?;
            let w = l.unsigned_abs() as f64;
            rows.push(vec![
                t,
                l as f64,
                dq,
                dp,
                dq * (2.0 * w).sqrt(),
                dp * (2.0 / w).sqrt(),
            ]);
            let (a, b) = mode_bogoliubov(family, &rep, l, s.t0, t)?;
            h_defect = h_defect.max((a.norm_sqr() - b.norm_sqr() - 1.0).abs());
        }
    }
    let mut inv = Invariants::new();
    inv.set("hyperbolic_identity", h_defect, 1e-10);
    let p = family.mode_pair(s.l_values[0], s.t0, *times.last().unwrap())?;
    inv.set("wronskian", (p.wronskian() - 1.0).abs(), 1e-8);
    let files = vec![(
        "field_variances.csv".to_string(),
        csv("t,l,dq,dp,dq_scaled,dp_scaled", rows),
    )];
    let m = manifest("field_variances", tol, &inv, &["field_variances.csv"], json!({}));
    finish(files, vec![], m, &inv)
}

fn run_figures(s: &FiguresScenario, tol: f64) -> Result<RunOutput> {
    let n = s.points.max(8);
    // Single-mode uncertainty sweeps under the canonical envelope.
    let sweep = |profile: &FrequencyProfile, times: &[f64]| -> Result<Vec<Vec<f64>>> {
        let ep = canonical_ep(profile)?;
        times
            .iter()
            .map(|&t| {
                let u = uncertainties(&ep, t)?;
                Ok(vec![t, u.dq, u.dp, u.product])
            })
            .collect()
    };
    // Fig. 1: 3-torus mode, omega = 1; geometric grid into the singularity.
    let t3 = FrequencyProfile::gowdy_t3(1.0);
    let times1: Vec<f64> = (0..n)
        .map(|i| 1e-4 * (50.0f64 / 1e-4).powf(i as f64 / (n - 1) as f64))
        .collect();
    let fig1 = csv("t,dq,dp,product", sweep(&t3, &times1)?);
    // Fig. 2: 3-handle/3-sphere mode with omega' = 5 on (0, pi).
    let gs = FrequencyProfile::gowdy_s_from_omega_prime(5.0)?;
    let times2: Vec<f64> = (0..n)
        .map(|i| 0.05 + (std::f64::consts::PI - 0.1) * i as f64 / (n - 1) as f64)
        .collect();
    let fig2 = csv("t,dq,dp,product", sweep(&gs, &times2)?);
    // Fig. 3: scaled field variances at growing labels (large-l limit).
    let rep = RepresentationSeq::standard();
    let mut rows3 = Vec::new();
    let times3: Vec<f64> = (0..n)
        .map(|i| 0.2 + (std::f64::consts::PI - 0.4) * i as f64 / (n - 1) as f64)
        .collect();
    for l in [5i64, 20, 100] {
        for &t in &times3 {
            let (dq, dp) = field_coherent_variances(ModeFamily::GowdyS, &rep, l, 0.2, t)?;
            let w = l as f64;
            rows3.push(vec![
                l as f64,
                t,
                dq * (2.0 * w).sqrt(),
                dp * (2.0 / w).sqrt(),
            ]);
        }
    }
    let fig3 = csv("l,t,dq_scaled,dp_scaled", rows3);
    let mut inv = Invariants::new();
    let pair = closed_form_pair(&t3, 1.0, 2.0)?;
    inv.set("wronskian", (pair.wronskian() - 1.0).abs(), 1e-8);
    let files = vec![
        ("fig1_gowdy_t3.csv".to_string(), fig1),
        ("fig2_gowdy_s.csv".to_string(), fig2),
        ("fig3_variances.csv".to_string(), fig3),
    ];
    let m = manifest(
        "figures",
        tol,
        &inv,
        &["fig1_gowdy_t3.csv", "fig2_gowdy_s.csv", "fig3_variances.csv"],
        json!({}),
    );
    finish(files, vec![], m, &inv)
}

/// Seals a run: any failed invariant check turns into an invariant error
/// (exit code 5) after the artifacts have been assembled.
fn finish(
    csv: Vec<(String, String)>,
    json_files: Vec<(String, Value)>,
    manifest: Value,
    inv: &Invariants,
) -> Result<RunOutput> {
    let out = RunOutput {
        csv,
        json: json_files,
        manifest,
    };
    if !inv.all_pass() {
        return Err(Error::Invariant(format!(
            "self-check failed; manifest: {}",
            out.manifest
        )));
    }
    Ok(out)
}

/// Writes all artifacts of a run into `dir`.
pub fn write_output(out: &RunOutput, dir: &std::path::Path) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (name, content) in &out.csv {
        let p = dir.join(name);
        std::fs::write(&p, content)?;
        written.push(p);
    }
    for (name, value) in &out.json {
        let p = dir.join(name);
        std::fs::write(&p, serde_json::to_string_pretty(value)? + "\n")?;
        written.push(p);
    }
    let p = dir.join("manifest.json");
    std::fs::write(&p, serde_json::to_string_pretty(&out.manifest)? + "\n")?;
    written.push(p);
    Ok(written)
}
