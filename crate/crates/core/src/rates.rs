//! Rate values of the overheating scenarios.
//!
//! When `l < k` connected flows overheat, their work is shared by `l+1`
//! servers; the cheapest way to push those servers to a backlog `d` costs
//! `J(λ,l) = (l+1)·θ(λ,l)·d`, where `θ(λ,l)` is the positive root of
//! `(l+1)θ = lλ[φ(θ)−1]`. When all `k` flows overheat the cost is
//! `J(λ,k) = k·θ*·d` with `θ* = λ[φ(θ*)−1]`.
//!
//! Both roots are found on the secant slope `s(θ) = (φ(θ)−1)/θ`, which is
//! strictly increasing, so `(l+1)θ = lλ[φ(θ)−1]` becomes
//! `s(θ) = (l+1)/(lλ)` and has at most one positive solution.

use serde::{Deserialize, Serialize};

use crate::distributions::MessageLengthModel;
use crate::error::{Error, Result};
use crate::roots::{bisect_increasing, bracket_upward};

/// One problem instance: `k` servers, per-flow rate `λ`, delay level `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub k: usize,
    pub lambda: f64,
    pub d: f64,
    pub model: MessageLengthModel,
}

impl NetworkParams {
    pub fn new(k: usize, lambda: f64, d: f64, model: MessageLengthModel) -> Result<Self> {
        if k < 3 {
            return Err(Error::Dimension(format!("ring size must be at least 3, got {k}")));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::Domain(format!("arrival rate must be positive, got {lambda}")));
        }
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::Domain(format!("delay level must be positive, got {d}")));
        }
        model.validate()?;
        Ok(Self { k, lambda, d, model })
    }

    /// Load of one flow, `λ·E ξ`.
    pub fn load(&self) -> f64 {
        self.lambda * self.model.mean()
    }

    pub fn is_stable(&self) -> bool {
        self.lambda < self.model.hat_lambda()
    }

    pub fn require_stable(&self) -> Result<()> {
        if self.is_stable() {
            Ok(())
        } else {
            Err(Error::Stability(format!("λ = {} is not below λ̂ = {}", self.lambda, self.model.hat_lambda())))
        }
    }
}

/// Solve `s(θ) = target` for the secant slope of `model`.
fn solve_secant(model: &MessageLengthModel, target: f64, what: &str) -> Result<f64> {
    let mean = model.mean();
    if !(target > mean) {
        return Err(Error::NoRoot(format!(
            "{what}: no positive root, secant target {target} does not exceed the mean {mean}"
        )));
    }
    let cap = model.search_cap();
    let f = |th: f64| model.mgf_secant(th).unwrap_or(f64::INFINITY) - target;
    let start = (1e-8 * cap.max(1.0)).min(0.5 * cap);
    let (lo, hi) = bracket_upward(f, 0.0, start, cap)
        .ok_or_else(|| Error::NoRoot(format!("{what}: no sign change below θ = {cap}")))?;
    Ok(bisect_increasing(f, lo, hi, 0.0))
}

/// Positive root `θ(λ,l)` of `(l+1)θ = lλ[φ(θ)−1]`; exists for
/// `λ < λ̂·(l+1)/l`.
pub fn solve_theta_l(model: &MessageLengthModel, lambda: f64, l: usize) -> Result<f64> {
    model.validate()?;
    if l == 0 {
        return Err(Error::Domain("number of overheated flows must be at least 1".into()));
    }
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("arrival rate must be positive, got {lambda}")));
    }
    let target = (l as f64 + 1.0) / (l as f64 * lambda);
    solve_secant(model, target, &format!("θ(λ={lambda}, l={l})"))
}

/// Positive root `θ*` of `θ = λ[φ(θ)−1]`; exists for `λ < λ̂`.
pub fn solve_theta_star(model: &MessageLengthModel, lambda: f64) -> Result<f64> {
    model.validate()?;
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("arrival rate must be positive, got {lambda}")));
    }
    solve_secant(model, 1.0 / lambda, &format!("θ*(λ={lambda})"))
}

fn check_l(params: &NetworkParams, l: usize) -> Result<()> {
    if l == 0 || l > params.k {
        return Err(Error::Domain(format!("l must lie in 1..={}, got {l}", params.k)));
    }
    Ok(())
}

/// Tilt root for scenario `l`: `θ(λ,l)` for `l < k`, `θ*` for `l = k`.
pub fn scenario_theta(params: &NetworkParams, l: usize) -> Result<f64> {
    check_l(params, l)?;
    if l < params.k {
        solve_theta_l(&params.model, params.lambda, l)
    } else {
        solve_theta_star(&params.model, params.lambda)
    }
}

/// Number of servers that share the work of `l` connected overheated flows.
pub fn loaded_servers(k: usize, l: usize) -> usize {
    if l < k {
        l + 1
    } else {
        k
    }
}

/// `J(λ,l)`: `(l+1)θ(λ,l)d` for `l < k`, `kθ*d` for `l = k`.
pub fn rate_j(params: &NetworkParams, l: usize) -> Result<f64> {
    let theta = scenario_theta(params, l)?;
    Ok(loaded_servers(params.k, l) as f64 * theta * params.d)
}

/// Optimal overheating of `l` flows: tilt, cost, input slope, server load
/// slope and duration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverheatProfile {
    pub l: usize,
    pub theta: f64,
    pub rate: f64,
    /// Slope `a = λφ′(θ)` of each overheated input flow.
    pub input_slope: f64,
    /// Slope `b` of the load on each server fed by the overheated flows.
    pub load_slope: f64,
    /// Duration `T = d/(b−1)` of the overheating.
    pub duration: f64,
}

/// Optimal slopes and duration for scenario `l`.
///
/// The load slope is `b = λ·(l/(l+1))·φ′(θ(λ,l))` for `l < k` and
/// `b = λφ′(θ*)` for `l = k`; the duration is `T = d/(b−1)`, so that
/// `bT − T = d` holds by construction.
pub fn optimal_profile(params: &NetworkParams, l: usize) -> Result<OverheatProfile> {
    let theta = scenario_theta(params, l)?;
    let k = params.k;
    let input_slope = params.lambda * params.model.mgf_prime(theta)?;
    let share = if l < k { l as f64 / (l as f64 + 1.0) } else { 1.0 };
    let load_slope = share * input_slope;
    if !(load_slope > 1.0) {
        return Err(Error::Infeasible(format!("load slope {load_slope} does not exceed the service rate for l = {l}")));
    }
    Ok(OverheatProfile {
        l,
        theta,
        rate: loaded_servers(k, l) as f64 * theta * params.d,
        input_slope,
        load_slope,
        duration: params.d / (load_slope - 1.0),
    })
}

/// Rate of one scenario in a [`Scenario`] table; `rate` is `None` when the
/// scenario cannot be realised (no root, or load slope not above 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEntry {
    pub l: usize,
    pub rate: Option<f64>,
    pub profile: Option<OverheatProfile>,
    pub note: Option<String>,
}

/// `J(λ,l)` for every `l = 1..=k` and the minimising scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub l_opt: usize,
    pub entries: Vec<ScenarioEntry>,
}

impl Scenario {
    pub fn rate(&self, l: usize) -> Option<f64> {
        self.entries.get(l.checked_sub(1)?).and_then(|e| e.rate)
    }

    pub fn min_rate(&self) -> f64 {
        self.rate(self.l_opt).expect("l_opt is feasible")
    }
}

/// Evaluate every scenario and pick the cheapest; ties go to the smaller `l`.
pub fn scenario(params: &NetworkParams) -> Result<Scenario> {
    params.require_stable()?;
    let entries: Vec<ScenarioEntry> = (1..=params.k)
        .map(|l| match optimal_profile(params, l) {
            Ok(p) => ScenarioEntry { l, rate: Some(p.rate), profile: Some(p), note: None },
            Err(e) => ScenarioEntry { l, rate: None, profile: None, note: Some(e.to_string()) },
        })
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for e in &entries {
        if let Some(r) = e.rate {
            if best.is_none_or(|(_, b)| r < b) {
                best = Some((e.l, r));
            }
        }
    }
    let (l_opt, _) = best.ok_or_else(|| Error::Infeasible("no scenario is feasible".into()))?;
    Ok(Scenario { l_opt, entries })
}

/// A piecewise-linear input configuration: flow `i` brings work at slope
/// `slopes[i]` on `[0, duration]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub slopes: Vec<f64>,
    pub duration: f64,
}

impl Configuration {
    pub fn new(slopes: Vec<f64>, duration: f64) -> Result<Self> {
        if slopes.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::Domain("slopes must be finite and nonnegative".into()));
        }
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::Domain(format!("duration must be positive, got {duration}")));
        }
        Ok(Self { slopes, duration })
    }
}

/// Rate function of a configuration: `T·Σᵢ sup_θ{θaᵢ − λ[φ(θ)−1]}`.
pub fn configuration_rate(model: &MessageLengthModel, lambda: f64, config: &Configuration) -> Result<f64> {
    let mut total = 0.0;
    for &a in &config.slopes {
        total += model.legendre(lambda, a)?.value;
    }
    Ok(total * config.duration)
}

/// Rate of `size` flows overheated with a common slope `h` for time `T`.
pub fn balanced_set_rate(model: &MessageLengthModel, lambda: f64, h: f64, size: usize, duration: f64) -> Result<f64> {
    let l = model.legendre(lambda, h)?;
    Ok(l.value * duration * size as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp1() -> MessageLengthModel {
        MessageLengthModel::exponential(1.0).unwrap()
    }

    fn models() -> Vec<MessageLengthModel> {
        vec![exp1(), MessageLengthModel::mixture(1.0, 0.5).unwrap(), MessageLengthModel::deterministic(1.0).unwrap()]
    }

    // Plain bisection on g(θ) = lλ(φ(θ)−1) − (l+1)θ over [lo, hi]; used as
    // an oracle independent of the secant formulation.
    fn bisect_raw(m: &MessageLengthModel, lambda: f64, l: f64, servers: f64, mut lo: f64, mut hi: f64) -> f64 {
        let g = |t: f64| l * lambda * (m.mgf(t).unwrap() - 1.0) - servers * t;
        assert!(g(lo) < 0.0 && g(hi) > 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) < 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn theta_l_exponential_closed_form() {
        // θ(λ,l) = c − lλ/(l+1) for the exponential law.
        let t = solve_theta_l(&exp1(), 0.5, 1).unwrap();
        assert!((t - 0.75).abs() < 1e-14);
        let oracle = bisect_raw(&exp1(), 0.5, 1.0, 2.0, 1e-9, 0.999);
        assert!((t - oracle).abs() < 1e-12);
        for l in 1..6 {
            for lam in [0.1, 0.4, 0.9, 1.1] {
                let t = solve_theta_l(&exp1(), lam, l).unwrap();
                let want = 1.0 - l as f64 * lam / (l as f64 + 1.0);
                assert!((t - want).abs() < 1e-13, "l={l} λ={lam}");
            }
        }
        let near = solve_theta_l(&exp1(), 1.0 - 1e-9, 1).unwrap();
        assert!((near - 0.5).abs() < 1e-8);
    }

    #[test]
    fn theta_l_collapses_at_validity_boundary() {
        for m in models() {
            for l in [1usize, 2, 4] {
                let edge = m.hat_lambda() * (l as f64 + 1.0) / l as f64;
                let t = solve_theta_l(&m, edge * (1.0 - 1e-6), l).unwrap();
                assert!(t > 0.0 && t < 1e-4, "{m} l={l}: {t}");
                assert!(matches!(solve_theta_l(&m, edge * 1.01, l), Err(Error::NoRoot(_))));
            }
        }
    }

    #[test]
    fn theta_star_examples() {
        let t = solve_theta_star(&exp1(), 0.25).unwrap();
        assert!((t - 0.75).abs() < 1e-14);
        let det = MessageLengthModel::deterministic(1.0).unwrap();
        let t = solve_theta_star(&det, 0.5).unwrap();
        let oracle = bisect_raw(&det, 0.5, 1.0, 1.0, 1e-9, 10.0);
        assert!((t - oracle).abs() < 1e-12);
        assert!((t - 1.256431).abs() < 1e-6);
        for m in models() {
            let t = solve_theta_star(&m, m.hat_lambda() * (1.0 - 1e-7)).unwrap();
            assert!(t > 0.0 && t < 1e-5);
            assert!(matches!(solve_theta_star(&m, m.hat_lambda()), Err(Error::NoRoot(_))));
        }
    }

    #[test]
    fn roots_have_small_residual() {
        for m in models() {
            for i in 1..50 {
                let lam = m.hat_lambda() * i as f64 / 50.0;
                for l in 1..5 {
                    let t = solve_theta_l(&m, lam, l).unwrap();
                    let res = ((l as f64 + 1.0) * t - l as f64 * lam * m.mgf_minus_one(t).unwrap()).abs();
                    assert!(res < 1e-10 * t.max(1.0), "{m} λ={lam} l={l} res={res}");
                }
                let t = solve_theta_star(&m, lam).unwrap();
                let res = (t - lam * m.mgf_minus_one(t).unwrap()).abs();
                assert!(res < 1e-10 * t.max(1.0), "{m} λ={lam} res={res}");
            }
        }
    }

    #[test]
    fn roots_decrease_in_lambda() {
        for m in models() {
            let grid: Vec<f64> = (1..=50).map(|i| m.hat_lambda() * i as f64 / 51.0).collect();
            let star: Vec<f64> = grid.iter().map(|&x| solve_theta_star(&m, x).unwrap()).collect();
            assert!(star.windows(2).all(|w| w[1] < w[0]));
            for l in 1..4 {
                let th: Vec<f64> = grid.iter().map(|&x| solve_theta_l(&m, x, l).unwrap()).collect();
                assert!(th.windows(2).all(|w| w[1] < w[0]), "{m} l={l}");
            }
        }
    }

    #[test]
    fn rate_examples() {
        let p = NetworkParams::new(3, 0.25, 1.0, exp1()).unwrap();
        assert!((rate_j(&p, 1).unwrap() - 1.75).abs() < 1e-13);
        assert!((rate_j(&p, 3).unwrap() - 2.25).abs() < 1e-13);
        let p2 = NetworkParams { d: 2.0, ..p };
        for l in 1..=3 {
            assert!((rate_j(&p2, l).unwrap() - 2.0 * rate_j(&p, l).unwrap()).abs() < 1e-12);
        }
        assert!(rate_j(&p, 0).is_err());
        assert!(rate_j(&p, 4).is_err());
    }

    #[test]
    fn profile_examples() {
        let p = NetworkParams::new(3, 0.5, 1.0, exp1()).unwrap();
        let all = optimal_profile(&p, 3).unwrap();
        assert!((all.theta - 0.5).abs() < 1e-14);
        assert!((all.input_slope - 2.0).abs() < 1e-12);
        assert!((all.load_slope - 2.0).abs() < 1e-12);
        assert!((all.duration - 1.0).abs() < 1e-12);
        let one = optimal_profile(&p, 1).unwrap();
        assert!((one.theta - 0.75).abs() < 1e-14);
        assert!((one.input_slope - 8.0).abs() < 1e-11);
        assert!((one.load_slope - 4.0).abs() < 1e-11);
        assert!((one.duration - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn profile_invariants() {
        for m in models() {
            for k in [3usize, 5, 10] {
                for i in 1..10 {
                    let lam = m.hat_lambda() * i as f64 / 10.0;
                    let p = NetworkParams::new(k, lam, 1.7, m).unwrap();
                    for l in 1..=k {
                        let pr = optimal_profile(&p, l).unwrap();
                        let servers = loaded_servers(k, l) as f64;
                        assert!((pr.rate - servers * pr.theta * p.d).abs() < 1e-12 * pr.rate);
                        assert!((pr.load_slope * pr.duration - pr.duration - p.d).abs() < 1e-9 * p.d);
                        let share = if l < k { l as f64 / (l as f64 + 1.0) } else { 1.0 };
                        assert!((pr.load_slope - share * pr.input_slope).abs() < 1e-12 * pr.input_slope);
                    }
                }
            }
        }
    }

    #[test]
    fn scenario_examples() {
        let s = scenario(&NetworkParams::new(3, 0.4, 1.0, exp1()).unwrap()).unwrap();
        assert_eq!(s.l_opt, 1);
        let s = scenario(&NetworkParams::new(3, 0.6, 1.0, exp1()).unwrap()).unwrap();
        assert_eq!(s.l_opt, 3);
        assert!(matches!(scenario(&NetworkParams::new(3, 1.5, 1.0, exp1()).unwrap()), Err(Error::Stability(_))));
    }

    #[test]
    fn scenario_ignores_d() {
        for m in models() {
            for i in 1..20 {
                let lam = m.hat_lambda() * i as f64 / 20.0;
                let a = scenario(&NetworkParams::new(7, lam, 1.0, m).unwrap()).unwrap();
                let b = scenario(&NetworkParams::new(7, lam, 13.0, m).unwrap()).unwrap();
                assert_eq!(a.l_opt, b.l_opt);
            }
        }
    }

    #[test]
    fn collective_beats_all_but_one() {
        for m in models() {
            for k in [3usize, 5, 10] {
                for i in 1..=50 {
                    let lam = m.hat_lambda() * i as f64 / 51.0;
                    let p = NetworkParams::new(k, lam, 1.0, m).unwrap();
                    assert!(rate_j(&p, k).unwrap() < rate_j(&p, k - 1).unwrap());
                }
            }
        }
    }

    #[test]
    fn configuration_rate_examples() {
        let m = exp1();
        let a0 = 0.5 * m.mean();
        let mean_cfg = Configuration::new(vec![a0; 3], 2.0).unwrap();
        assert_eq!(configuration_rate(&m, 0.5, &mean_cfg).unwrap(), 0.0);
        let cfg = Configuration::new(vec![2.0, a0, a0], 1.0).unwrap();
        assert!((configuration_rate(&m, 0.5, &cfg).unwrap() - 0.5).abs() < 1e-12);
        let cfg3 = Configuration::new(vec![2.0, a0, a0], 3.0).unwrap();
        assert!((configuration_rate(&m, 0.5, &cfg3).unwrap() - 1.5).abs() < 1e-12);
        let low = Configuration::new(vec![0.1, a0, a0], 1.0).unwrap();
        assert!(matches!(configuration_rate(&m, 0.5, &low), Err(Error::Domain(_))));
    }

    #[test]
    fn balanced_rate_examples() {
        let m = exp1();
        assert_eq!(balanced_set_rate(&m, 0.5, 0.5, 3, 1.0).unwrap(), 0.0);
        assert!((balanced_set_rate(&m, 0.5, 2.0, 2, 1.0).unwrap() - 1.0).abs() < 1e-12);
        let single = balanced_set_rate(&m, 0.5, 2.0, 1, 1.5).unwrap();
        let cfg = Configuration::new(vec![2.0, 0.5, 0.5], 1.5).unwrap();
        assert!((single - configuration_rate(&m, 0.5, &cfg).unwrap()).abs() < 1e-12);
    }
}
