use std::fmt::Write as _;

use anyhow::Result;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use ringload::critical::{CriticalRateTable, PhaseDiagram};
use ringload::rates::ScenarioEntry;
use ringload::sim::{CensusReport, SimulationResult, Tilt};
use ringload::tables::ReproRow;
use ringload::MessageLengthModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeReport {
    pub model: MessageLengthModel,
    pub k: usize,
    pub lambda: f64,
    pub d: f64,
    pub hat_lambda: f64,
    pub theta_star: f64,
    pub l_opt: usize,
    pub min_rate: f64,
    pub scenarios: Vec<ScenarioEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalReport {
    pub model: MessageLengthModel,
    pub table: CriticalRateTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub model: MessageLengthModel,
    pub diagram: PhaseDiagram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteReport {
    pub slopes: Vec<f64>,
    /// 1-based flows of the arc problem; absent for the full ring.
    pub subset: Option<Vec<usize>>,
    pub imbalance: f64,
    pub loads: Vec<f64>,
    pub alpha: Vec<f64>,
    pub balanced: bool,
    /// Maximal balanced connected sets containing flow 1, as 1-based flows.
    pub maximal_sets: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub l_opt: usize,
    /// `J(λ, l_opt)`, the predicted value of `−ln p / n`.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub p_hat: f64,
    pub std_err: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub empirical_rate: Option<f64>,
    pub hits: usize,
    pub effective_hits: f64,
    pub trials: usize,
    pub window: f64,
    pub warmup: f64,
}

impl From<&SimulationResult> for Estimate {
    fn from(r: &SimulationResult) -> Self {
        Self {
            p_hat: r.p_hat,
            std_err: r.std_err,
            ci_low: r.ci_low,
            ci_high: r.ci_high,
            empirical_rate: r.empirical_rate,
            hits: r.hits,
            effective_hits: r.effective_hits,
            trials: r.trials,
            window: r.window,
            warmup: r.warmup,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub model: MessageLengthModel,
    pub k: usize,
    pub lambda: f64,
    pub d: f64,
    pub n: u32,
    pub seed: u64,
    pub tilt: Option<Tilt>,
    pub estimate: Estimate,
    pub prediction: Prediction,
    pub census: Option<CensusReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproduceReport {
    pub tol: f64,
    pub all_pass: bool,
    pub rows: Vec<ReproRow>,
}

/// Round `x` to 9 significant digits.
pub fn round9(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64() {
                *v = serde_json::Number::from_f64(round9(x)).map_or(Value::Null, Value::Number);
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Pretty JSON with floats at 9 significant digits.
pub fn to_json<T: Serialize>(report: &T) -> Result<String> {
    let mut v = serde_json::to_value(report)?;
    round_value(&mut v);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

/// `x` at 6 significant digits for human tables.
pub fn g6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&mag) {
        let s = format!("{x:.5e}");
        let (mantissa, exp) = s.split_once('e').expect("exponent form");
        let mantissa =
            if mantissa.contains('.') { mantissa.trim_end_matches('0').trim_end_matches('.') } else { mantissa };
        return format!("{mantissa}e{exp}");
    }
    let s = format!("{:.*}", (5 - mag).max(0) as usize, x);
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn opt6(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), g6)
}

/// Left-aligned columns separated by two spaces.
pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (i, (c, w)) in cells.iter().zip(&width).enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            s.push_str(c);
            s.extend(std::iter::repeat_n(' ', w - c.chars().count()));
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    for r in rows {
        out += &line(r.iter().map(String::as_str).collect());
    }
    out
}

pub fn analyze_table(r: &AnalyzeReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "model {}  k={}  λ={}  d={}  λ̂={}", r.model, r.k, g6(r.lambda), g6(r.d), g6(r.hat_lambda));
    let _ = writeln!(s, "θ* = {}", g6(r.theta_star));
    let rows: Vec<Vec<String>> = r
        .scenarios
        .iter()
        .map(|e| {
            let p = e.profile.as_ref();
            vec![
                e.l.to_string(),
                opt6(p.map(|p| p.theta)),
                opt6(e.rate),
                opt6(p.map(|p| p.input_slope)),
                opt6(p.map(|p| p.load_slope)),
                opt6(p.map(|p| p.duration)),
                e.note.clone().unwrap_or_default(),
            ]
        })
        .collect();
    s += &table(&["l", "theta", "J", "a", "b", "T", "note"], &rows);
    let _ = writeln!(s, "l_opt = {}  J = {}", r.l_opt, g6(r.min_rate));
    s
}

pub fn critical_table(r: &CriticalReport) -> String {
    let t = &r.table;
    let mut s = String::new();
    let _ = writeln!(s, "model {}  k={}  λ̂={}", r.model, t.k, g6(t.hat_lambda));
    let _ = writeln!(s, "lambda_lower = {}  lambda_upper = {}", g6(t.lower), g6(t.upper));
    let mut rows: Vec<Vec<String>> = t
        .star
        .iter()
        .map(|e| {
            vec![
                format!("star {},{}", t.k, e.l),
                opt6(e.crossing.map(|c| c.lambda)),
                opt6(e.crossing.map(|c| c.vartheta)),
            ]
        })
        .collect();
    rows.extend(t.pairs.iter().map(|e| {
        vec![
            format!("pair {},{}", e.l2, e.l1),
            opt6(e.crossing.map(|c| c.lambda)),
            opt6(e.crossing.map(|c| c.vartheta)),
        ]
    }));
    s += &table(&["crossing", "lambda", "vartheta"], &rows);
    s
}

pub fn critical_csv(r: &CriticalReport) -> Result<String> {
    let t = &r.table;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["kind", "a", "b", "lambda", "vartheta"])?;
    let f = |x: Option<f64>| x.map(|v| round9(v).to_string()).unwrap_or_default();
    for e in &t.star {
        w.write_record([
            "star",
            &t.k.to_string(),
            &e.l.to_string(),
            &f(e.crossing.map(|c| c.lambda)),
            &f(e.crossing.map(|c| c.vartheta)),
        ])?;
    }
    for e in &t.pairs {
        w.write_record([
            "pair",
            &e.l2.to_string(),
            &e.l1.to_string(),
            &f(e.crossing.map(|c| c.lambda)),
            &f(e.crossing.map(|c| c.vartheta)),
        ])?;
    }
    w.write_record(["lower", &t.k.to_string(), "", &f(Some(t.lower)), ""])?;
    w.write_record(["upper", &t.k.to_string(), "", &f(Some(t.upper)), ""])?;
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn phase_csv(r: &PhaseReport) -> Result<String> {
    let k = r.diagram.k;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["lambda".to_string(), "l_opt".to_string()];
    header.extend((1..=k).map(|l| format!("J_{l}")));
    w.write_record(&header)?;
    for row in &r.diagram.rows {
        let mut rec = vec![round9(row.lambda).to_string(), row.l_opt.to_string()];
        rec.extend(row.rates.iter().map(|j| j.map(|v| round9(v).to_string()).unwrap_or_default()));
        w.write_record(&rec)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn phase_table(r: &PhaseReport) -> String {
    let k = r.diagram.k;
    let mut header = vec!["lambda".to_string(), "l_opt".to_string()];
    header.extend((1..=k).map(|l| format!("J_{l}")));
    let rows: Vec<Vec<String>> = r
        .diagram
        .rows
        .iter()
        .map(|row| {
            let mut v = vec![g6(row.lambda), row.l_opt.to_string()];
            v.extend(row.rates.iter().map(|j| opt6(*j)));
            v
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    format!("model {}  k={}  d={}\n", r.model, k, g6(r.diagram.d)) + &table(&header, &rows)
}

pub fn route_table(r: &RouteReport) -> String {
    let mut s = String::new();
    let slopes: Vec<String> = r.slopes.iter().map(|a| g6(*a)).collect();
    let _ = writeln!(s, "slopes {}", slopes.join(","));
    if let Some(sub) = &r.subset {
        let flows: Vec<String> = sub.iter().map(|f| f.to_string()).collect();
        let _ = writeln!(s, "arc of flows {}", flows.join(","));
    }
    let _ = writeln!(s, "D = {}  balanced = {}", g6(r.imbalance), r.balanced);
    let rows: Vec<Vec<String>> = (0..r.loads.len().max(r.alpha.len()))
        .map(|i| {
            vec![
                (i + 1).to_string(),
                r.loads.get(i).map_or_else(String::new, |b| g6(*b)),
                r.alpha.get(i).map_or_else(String::new, |a| g6(*a)),
            ]
        })
        .collect();
    s += &table(&["index", "load", "alpha"], &rows);
    let sets: Vec<String> = r
        .maximal_sets
        .iter()
        .map(|f| format!("{{{}}}", f.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")))
        .collect();
    let _ = writeln!(s, "maximal balanced sets containing flow 1: {}", sets.join(" "));
    s
}

pub fn route_csv(r: &RouteReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["index", "load", "alpha"])?;
    for i in 0..r.loads.len().max(r.alpha.len()) {
        let b = r.loads.get(i).map(|b| round9(*b).to_string()).unwrap_or_default();
        let a = r.alpha.get(i).map(|a| round9(*a).to_string()).unwrap_or_default();
        w.write_record([(i + 1).to_string(), b, a])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn simulate_table(r: &SimulateReport) -> String {
    let e = &r.estimate;
    let mut s = String::new();
    let _ = writeln!(s, "model {}  k={}  λ={}  d={}  n={}  seed={}", r.model, r.k, g6(r.lambda), g6(r.d), r.n, r.seed);
    let tilt = match r.tilt {
        None => "none".to_string(),
        Some(Tilt::Scenario { l, theta: None }) => l.to_string(),
        Some(Tilt::Scenario { l, theta: Some(t) }) => format!("{l}:{}", g6(t)),
        Some(Tilt::Mixture { defensive }) => format!("mix:{}", g6(defensive)),
    };
    let _ = writeln!(s, "tilt {tilt}");
    let _ = writeln!(s, "p̂ = {}  SE = {}  95% CI [{}, {}]", g6(e.p_hat), g6(e.std_err), g6(e.ci_low), g6(e.ci_high));
    let _ = writeln!(s, "hits {} of {}  effective {}", e.hits, e.trials, g6(e.effective_hits));
    let _ = writeln!(
        s,
        "−ln(p̂)/n = {}  predicted J = {} (l_opt = {})",
        opt6(e.empirical_rate),
        g6(r.prediction.rate),
        r.prediction.l_opt
    );
    if let Some(c) = &r.census {
        let _ = writeln!(
            s,
            "census: {} hits (effective {}), window {}, a_min {}, eps {}",
            c.hits,
            g6(c.effective_hits),
            g6(c.window),
            g6(c.a_min),
            g6(c.eps)
        );
        let _ = writeln!(s, "only flow 1 overheated {}  all flows overheated {}", g6(c.only_first), g6(c.all_flows));
        let rows: Vec<Vec<String>> = c
            .flows
            .iter()
            .enumerate()
            .map(|(i, f)| {
                vec![(i + 1).to_string(), g6(f.overheated), g6(f.tracked), g6(f.overheated_tracked), g6(f.mean_slope)]
            })
            .collect();
        s += &table(&["flow", "overheated", "tracked", "both", "mean_slope"], &rows);
    }
    s
}

pub fn simulate_csv(r: &SimulateReport) -> Result<String> {
    let e = &r.estimate;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "p_hat",
        "std_err",
        "ci_low",
        "ci_high",
        "empirical_rate",
        "hits",
        "effective_hits",
        "trials",
        "l_opt",
        "predicted_rate",
    ])?;
    let f = |x: f64| round9(x).to_string();
    w.write_record([
        f(e.p_hat),
        f(e.std_err),
        f(e.ci_low),
        f(e.ci_high),
        e.empirical_rate.map(f).unwrap_or_default(),
        e.hits.to_string(),
        f(e.effective_hits),
        e.trials.to_string(),
        r.prediction.l_opt.to_string(),
        f(r.prediction.rate),
    ])?;
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn reproduce_table(r: &ReproduceReport) -> String {
    let rows: Vec<Vec<String>> = r
        .rows
        .iter()
        .map(|x| {
            vec![
                x.example.to_string(),
                x.label.clone(),
                g6(x.computed),
                g6(x.expected),
                g6(x.deviation),
                if x.pass { "PASS" } else { "FAIL" }.to_string(),
            ]
        })
        .collect();
    let failed = r.rows.iter().filter(|x| !x.pass).count();
    table(&["example", "quantity", "computed", "expected", "deviation", "result"], &rows)
        + &format!("{} of {} rows within {}\n", r.rows.len() - failed, r.rows.len(), g6(r.tol))
}

pub fn reproduce_csv(r: &ReproduceReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["example", "label", "computed", "expected", "deviation", "tol", "pass"])?;
    for x in &r.rows {
        w.write_record([
            x.example.to_string(),
            x.label.clone(),
            round9(x.computed).to_string(),
            round9(x.expected).to_string(),
            round9(x.deviation).to_string(),
            round9(x.tol).to_string(),
            x.pass.to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}
