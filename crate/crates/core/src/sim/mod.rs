//! Monte Carlo estimation of the overload probability `P(ω₁ ≥ n·d)`.
//!
//! Each trial starts empty, runs nominal dynamics for a warm-up `W` and then
//! for a segment of length `n·T`, and measures the virtual wait of flow 0 at
//! the end. With importance sampling some flows run with exponentially
//! tilted rates and lengths over the last part of the segment, and every
//! trial carries the likelihood ratio that undoes the change of measure.
//!
//! A single tilt imitates one overheating scenario. Overload reached through
//! any other scenario then gets a huge weight, so at moderate `n` the
//! estimate can rest on a handful of trials. The mixture tilt draws a
//! scenario per trial (or nominal dynamics, with the defensive probability)
//! and weights by the mixture density, which keeps every weight below
//! `1/defensive`.

mod census;
mod network;

pub use census::{chebyshev_fit, CensusReport, FlowCensus, LineFit};
pub use network::{left_server, route, virtual_wait, write_event_log, EventRecord, FlowSource, Network, NetworkState};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rates::{optimal_profile, scenario, scenario_theta, NetworkParams};

/// Minimum number of conditioning events for a census.
pub const MIN_CENSUS_HITS: usize = 20;

/// Window multiples used by the mixture tilt.
pub const MIXTURE_STRETCHES: [f64; 3] = [1.0, 2.0, 4.0];

/// Change of measure applied at the end of each trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Tilt {
    /// Tilt the `l` flows of scenario `l` around flow 0 (all flows when
    /// `l = k`) with `theta`, by default the scenario's own root.
    Scenario { l: usize, theta: Option<f64> },
    /// Per trial pick nominal dynamics with probability `defensive`, else a
    /// scenario `l` uniformly among the feasible ones, then one of its arcs
    /// through flow 0 and one window stretch uniformly. A stretch `m` tilts
    /// for `m·T` with the gentler slope that reaches the same backlog.
    /// The mixture always uses the scenario profiles; `SimConfig::window`
    /// does not apply to it.
    Mixture { defensive: f64 },
}

impl Tilt {
    pub fn scenario(l: usize) -> Self {
        Tilt::Scenario { l, theta: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: NetworkParams,
    pub n: u32,
    /// Nominal warm-up length; defaults to `50/(1 − λ·E ξ)`.
    pub warmup: Option<f64>,
    pub trials: usize,
    pub seed: u64,
    pub tilt: Option<Tilt>,
    /// Scaled tilt window `T`; the tilt lasts `n·T`. Defaults to the duration
    /// of the optimal profile of the tilted scenario, or of the predicted
    /// scenario without a tilt.
    pub window: Option<f64>,
}

impl SimConfig {
    pub fn new(params: NetworkParams, n: u32, trials: usize, seed: u64) -> Self {
        Self { params, n, warmup: None, trials, seed, tilt: None, window: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    /// `ω₁` at the end of each trial, in trial order.
    pub samples: Vec<f64>,
    pub p_hat: f64,
    pub std_err: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// `−ln(p̂)/n`, absent when no trial hit.
    pub empirical_rate: Option<f64>,
    pub hits: usize,
    /// `(Σw)²/Σw²` over the hits; equals `hits` without a tilt.
    pub effective_hits: f64,
    pub trials: usize,
    /// Length of the simulated segment after warm-up, in scaled time.
    pub window: f64,
    pub warmup: f64,
}

/// Flows tilted for scenario `l`: an arc of `l` flows around flow 0.
pub fn tilted_flows(k: usize, l: usize) -> Vec<usize> {
    if l >= k {
        return (0..k).collect();
    }
    let back = (l - 1) / 2;
    (0..l).map(|j| (j + k - back) % k).collect()
}

/// Every arc of `l < k` consecutive flows containing flow 0.
fn arcs_through_zero(k: usize, l: usize) -> Vec<Vec<usize>> {
    (0..l).map(|back| (0..l).map(|j| (j + k - back) % k).collect()).collect()
}

/// One tilted measure: which flows, how hard, for how long.
#[derive(Debug, Clone)]
struct Component {
    flows: Vec<usize>,
    theta: f64,
    // scaled duration
    window: f64,
    prob: f64,
}

/// A validated run plan with every default filled in.
#[derive(Debug, Clone)]
struct Plan {
    params: NetworkParams,
    n: f64,
    warmup: f64,
    // scaled length of the segment after warm-up
    segment: f64,
    lookback: f64,
    trials: usize,
    seed: u64,
    components: Vec<Component>,
    nominal_prob: f64,
}

impl Plan {
    fn new(cfg: &SimConfig, census_window: Option<Option<f64>>) -> Result<Self> {
        let p = &cfg.params;
        p.model.validate()?;
        if p.k < 3 {
            return Err(Error::Dimension(format!("ring size must be at least 3, got {}", p.k)));
        }
        if !(p.lambda.is_finite() && p.lambda > 0.0) || !(p.d.is_finite() && p.d >= 0.0) {
            return Err(Error::Domain(format!("need λ > 0 and d ≥ 0, got λ = {}, d = {}", p.lambda, p.d)));
        }
        if cfg.n == 0 || cfg.trials == 0 {
            return Err(Error::Domain("n and trials must be positive".into()));
        }
        if cfg.tilt.is_none() || cfg.warmup.is_none() {
            p.require_stable()?;
        }
        let warmup = cfg.warmup.unwrap_or_else(|| 50.0 / (1.0 - p.load()));
        if !(warmup.is_finite() && warmup >= 0.0) {
            return Err(Error::Domain(format!("warm-up must be finite and nonnegative, got {warmup}")));
        }
        let check_window = |w: f64| {
            if w.is_finite() && w >= 0.0 {
                Ok(w)
            } else {
                Err(Error::Domain(format!("window must be finite and nonnegative, got {w}")))
            }
        };
        let profile_duration = |l: usize| -> Result<f64> {
            if p.d == 0.0 {
                Ok(0.0)
            } else {
                Ok(optimal_profile(p, l)?.duration)
            }
        };

        let (components, nominal_prob) = match cfg.tilt {
            None => (Vec::new(), 1.0),
            Some(Tilt::Scenario { l, theta }) => {
                if l == 0 || l > p.k {
                    return Err(Error::Domain(format!("tilt scenario l must lie in 1..={}, got {l}", p.k)));
                }
                let theta = match theta {
                    Some(th) => th,
                    None => scenario_theta(p, l)?,
                };
                if !(theta >= 0.0 && theta < p.model.theta_plus()) {
                    return Err(Error::Domain(format!("tilt θ = {theta} outside [0, θ₊)")));
                }
                let window = match cfg.window {
                    Some(w) => check_window(w)?,
                    None => profile_duration(l)?,
                };
                (vec![Component { flows: tilted_flows(p.k, l), theta, window, prob: 1.0 }], 0.0)
            }
            Some(Tilt::Mixture { defensive }) => {
                if !(0.0..1.0).contains(&defensive) {
                    return Err(Error::Domain(format!("defensive probability must lie in [0, 1), got {defensive}")));
                }
                // Scenarios without a root or a feasible profile are left out.
                let mut feasible = Vec::new();
                for l in 1..=p.k {
                    let Ok(profile) = optimal_profile(p, l) else { continue };
                    let arcs = if l == p.k { vec![tilted_flows(p.k, l)] } else { arcs_through_zero(p.k, l) };
                    let share = (l as f64 + 1.0) / l as f64;
                    let mut paths = Vec::new();
                    for stretch in MIXTURE_STRETCHES {
                        // same backlog d reached over a longer window at a
                        // gentler load slope
                        let load = 1.0 + (profile.load_slope - 1.0) / stretch;
                        let input = if l == p.k { load } else { load * share };
                        let theta = p.model.invert_mgf_prime(input / p.lambda)?;
                        paths.push((theta, stretch * profile.duration));
                    }
                    feasible.push((arcs, paths));
                }
                if feasible.is_empty() {
                    return Err(Error::Infeasible("no scenario admits a tilt at these parameters".into()));
                }
                let per_l = (1.0 - defensive) / feasible.len() as f64;
                let mut components = Vec::new();
                for (arcs, paths) in feasible {
                    let prob = per_l / (arcs.len() * paths.len()) as f64;
                    for flows in &arcs {
                        for &(theta, window) in &paths {
                            components.push(Component { flows: flows.clone(), theta, window, prob });
                        }
                    }
                }
                (components, defensive)
            }
        };

        let tilt_window = match (cfg.tilt, cfg.window) {
            (Some(Tilt::Mixture { .. }), _) => components.iter().map(|c| c.window).fold(0.0, f64::max),
            (_, Some(w)) => check_window(w)?,
            (None, None) => profile_duration(scenario(p)?.l_opt)?,
            (Some(_), None) => components.iter().map(|c| c.window).fold(0.0, f64::max),
        };
        let lookback = match census_window {
            None => 0.0,
            Some(Some(w)) => check_window(w)?,
            Some(None) => profile_duration(scenario(p)?.l_opt)?,
        };
        Ok(Self {
            params: *p,
            n: cfg.n as f64,
            warmup,
            segment: tilt_window.max(lookback),
            lookback,
            trials: cfg.trials,
            seed: cfg.seed,
            components,
            nominal_prob,
        })
    }

    /// Component used by trial `index`, `None` for nominal dynamics.
    fn pick(&self, index: usize) -> Option<usize> {
        match self.components.len() {
            0 => None,
            1 if self.nominal_prob == 0.0 => Some(0),
            _ => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(u64::MAX - index as u64);
                let mut u: f64 = rng.random();
                if u < self.nominal_prob {
                    return None;
                }
                u -= self.nominal_prob;
                for (i, c) in self.components.iter().enumerate() {
                    if u < c.prob {
                        return Some(i);
                    }
                    u -= c.prob;
                }
                Some(self.components.len() - 1)
            }
        }
    }

    /// Likelihood ratio `dP/dQ` of a trial whose flows brought the arrivals
    /// `arrivals[f] = [(t, length)]` with `t` measured back from the end.
    fn weight(&self, arrivals: &[Vec<(f64, f64)>]) -> Result<f64> {
        if self.components.is_empty() {
            return Ok(1.0);
        }
        let p = &self.params;
        // log of each mixture term prob·dQ_c/dP
        let mut logs = Vec::with_capacity(self.components.len() + 1);
        if self.nominal_prob > 0.0 {
            logs.push(self.nominal_prob.ln());
        }
        for c in &self.components {
            let span = self.n * c.window;
            let drift = p.lambda * p.model.mgf_minus_one(c.theta)? * span;
            let log_ratio: f64 = c
                .flows
                .iter()
                .map(|&f| {
                    let work: f64 = arrivals[f].iter().filter(|a| a.0 < span).map(|a| a.1).sum();
                    c.theta * work - drift
                })
                .sum();
            logs.push(c.prob.ln() + log_ratio);
        }
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = top + logs.iter().map(|l| (l - top).exp()).sum::<f64>().ln();
        Ok((-lse).exp())
    }
}

/// What a single trial reports.
#[derive(Debug, Clone)]
struct Trial {
    wait: f64,
    hit: bool,
    weight: f64,
    // per-flow jumps (scaled time, scaled cumulative work) in the lookback;
    // kept only for hits
    paths: Option<Vec<Vec<(f64, f64)>>>,
    log: Option<Vec<EventRecord>>,
}

fn run_trial(plan: &Plan, index: usize, keep_paths: bool, keep_log: bool) -> Result<Trial> {
    let p = &plan.params;
    let k = p.k;
    let sources =
        (0..k).map(|f| FlowSource::new(p.lambda, p.model.sampler(), plan.seed, (index * k + f) as u64)).collect();
    let mut net = Network::new(sources);
    if keep_log {
        net = net.with_log();
    }
    let end = plan.warmup + plan.n * plan.segment;
    let begin = plan.warmup;

    // arrivals in the segment, timed back from the end
    let mut arrivals: Vec<Vec<(f64, f64)>> = vec![Vec::new(); k];
    let mut record = |rec: &EventRecord| arrivals[rec.flow].push((end - rec.t, rec.length));
    net.run_until(begin, |_| {});

    let chosen = plan.pick(index).map(|i| &plan.components[i]);
    if let Some(c) = chosen {
        net.run_until(end - plan.n * c.window, &mut record);
        let rate = p.lambda * p.model.mgf(c.theta)?;
        let lengths = p.model.tilted_sampler(c.theta)?;
        for &f in &c.flows {
            net.sources[f].rate = rate;
            net.sources[f].lengths = lengths;
        }
        net.reschedule_all();
    }
    net.run_until(end, &mut record);

    let wait = net.state.virtual_wait(0);
    let hit = wait >= plan.n * p.d;
    let weight = plan.weight(&arrivals)?;
    let paths = (keep_paths && hit).then(|| {
        let span = plan.n * plan.lookback;
        arrivals
            .iter()
            .map(|arr| {
                let mut z = 0.0;
                arr.iter()
                    .filter(|a| a.0 < span)
                    .map(|&(back, len)| {
                        z += len;
                        ((span - back) / plan.n, z / plan.n)
                    })
                    .collect()
            })
            .collect()
    });
    Ok(Trial { wait, hit, weight, paths, log: net.log().map(<[_]>::to_vec) })
}

fn run_trials(plan: &Plan, keep_paths: bool) -> Result<Vec<Trial>> {
    (0..plan.trials).into_par_iter().map(|i| run_trial(plan, i, keep_paths, false)).collect()
}

fn effective_count(weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    let sq: f64 = weights.iter().map(|w| w * w).sum();
    if sq > 0.0 {
        total * total / sq
    } else {
        0.0
    }
}

fn summarise(plan: &Plan, trials: &[Trial]) -> SimulationResult {
    let n = trials.len() as f64;
    let ys: Vec<f64> = trials.iter().map(|t| if t.hit { t.weight } else { 0.0 }).collect();
    let mean = ys.iter().sum::<f64>() / n;
    let var = if trials.len() > 1 { ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    let std_err = (var / n).sqrt();
    let p_hat = mean.clamp(0.0, 1.0);
    let hit_weights: Vec<f64> = trials.iter().filter(|t| t.hit).map(|t| t.weight).collect();
    SimulationResult {
        samples: trials.iter().map(|t| t.wait).collect(),
        p_hat,
        std_err,
        ci_low: (mean - 1.96 * std_err).max(0.0),
        ci_high: (mean + 1.96 * std_err).min(1.0),
        empirical_rate: (p_hat > 0.0).then(|| -p_hat.ln() / plan.n),
        hits: hit_weights.len(),
        effective_hits: effective_count(&hit_weights),
        trials: trials.len(),
        window: plan.segment,
        warmup: plan.warmup,
    }
}

/// Estimate `P(ω₁ ≥ n·d)` for the configured network.
pub fn estimate_overload(config: &SimConfig) -> Result<SimulationResult> {
    let plan = Plan::new(config, None)?;
    let trials = run_trials(&plan, false)?;
    Ok(summarise(&plan, &trials))
}

/// Arrival log of a single trial, for inspection and reproducibility checks.
pub fn trial_event_log(config: &SimConfig, index: usize) -> Result<Vec<EventRecord>> {
    let plan = Plan::new(config, None)?;
    let trial = run_trial(&plan, index, false, true)?;
    Ok(trial.log.unwrap_or_default())
}

/// Classify the input paths over the lookback window `[−n·T, 0]` of every
/// trial that ends in overload. `window` is `T`, by default the duration of
/// the optimal profile of the predicted scenario. A flow counts as
/// overheated when its best sup-norm line has slope above `a_min`; whether
/// the path stays within `eps` of that line is reported alongside.
pub fn overheat_census(config: &SimConfig, window: Option<f64>, a_min: f64, eps: f64) -> Result<CensusReport> {
    if !(a_min >= 0.0) || !(eps > 0.0) {
        return Err(Error::Domain(format!("need a_min ≥ 0 and ε > 0, got a_min = {a_min}, ε = {eps}")));
    }
    let plan = Plan::new(config, Some(window))?;
    let predicted_l = scenario(&plan.params)?.l_opt;
    let trials = run_trials(&plan, true)?;
    let fits: Vec<(f64, Vec<LineFit>)> = trials
        .iter()
        .filter(|t| t.hit)
        .map(|t| {
            let paths = t.paths.as_ref().expect("paths kept for hits");
            (t.weight, paths.iter().map(|p| chebyshev_fit(p, plan.lookback)).collect())
        })
        .collect();
    if fits.len() < MIN_CENSUS_HITS {
        return Err(Error::InsufficientHits { hits: fits.len(), required: MIN_CENSUS_HITS });
    }
    Ok(census::summarise(&fits, plan.params.k, plan.lookback, a_min, eps, predicted_l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::MessageLengthModel;

    fn base(lambda: f64) -> SimConfig {
        let params = NetworkParams::new(3, lambda, 1.0, MessageLengthModel::exponential(1.0).unwrap()).unwrap();
        SimConfig::new(params, 2, 200, 5)
    }

    fn mean_weight(cfg: &SimConfig) -> (f64, f64) {
        let plan = Plan::new(cfg, None).unwrap();
        let w: Vec<f64> = run_trials(&plan, false).unwrap().iter().map(|t| t.weight).collect();
        let n = w.len() as f64;
        let m = w.iter().sum::<f64>() / n;
        let se = (w.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
        (m, se)
    }

    #[test]
    fn tilted_arc_contains_flow_zero() {
        assert_eq!(tilted_flows(5, 1), vec![0]);
        assert_eq!(tilted_flows(5, 2), vec![0, 1]);
        assert_eq!(tilted_flows(5, 3), vec![4, 0, 1]);
        assert_eq!(tilted_flows(4, 4), vec![0, 1, 2, 3]);
        assert_eq!(arcs_through_zero(5, 2), vec![vec![0, 1], vec![4, 0]]);
    }

    #[test]
    fn zero_threshold_is_certain() {
        let mut cfg = base(0.3);
        cfg.params.d = 0.0;
        let r = estimate_overload(&cfg).unwrap();
        assert_eq!(r.p_hat, 1.0);
        assert_eq!(r.hits, cfg.trials);
        assert_eq!(r.empirical_rate, Some(0.0));
    }

    #[test]
    fn unstable_without_tilt_is_rejected() {
        assert!(matches!(estimate_overload(&base(1.5)), Err(Error::Stability(_))));
    }

    #[test]
    fn same_seed_same_answer() {
        for tilt in [Tilt::scenario(1), Tilt::Mixture { defensive: 0.2 }] {
            let mut cfg = base(0.5);
            cfg.tilt = Some(tilt);
            let a = estimate_overload(&cfg).unwrap();
            assert_eq!(a, estimate_overload(&cfg).unwrap());
            assert_eq!(trial_event_log(&cfg, 3).unwrap(), trial_event_log(&cfg, 3).unwrap());
            cfg.seed += 1;
            assert_ne!(estimate_overload(&cfg).unwrap().samples, a.samples);
        }
    }

    #[test]
    fn likelihood_ratio_has_unit_mean() {
        for tilt in [Tilt::Scenario { l: 3, theta: Some(0.3) }, Tilt::scenario(1), Tilt::Mixture { defensive: 0.1 }] {
            let mut cfg = base(0.4);
            cfg.trials = 20_000;
            cfg.tilt = Some(tilt);
            let (m, se) = mean_weight(&cfg);
            assert!((m - 1.0).abs() < 4.0 * se + 1e-3, "{tilt:?}: {m} ± {se}");
        }
    }

    #[test]
    fn mixture_weights_are_bounded() {
        let mut cfg = base(0.3);
        cfg.trials = 2000;
        cfg.tilt = Some(Tilt::Mixture { defensive: 0.25 });
        let plan = Plan::new(&cfg, None).unwrap();
        assert_eq!(plan.components.len(), (1 + 2 + 1) * MIXTURE_STRETCHES.len());
        let total: f64 = plan.components.iter().map(|c| c.prob).sum::<f64>() + plan.nominal_prob;
        assert!((total - 1.0).abs() < 1e-12);
        for t in run_trials(&plan, false).unwrap() {
            assert!(t.weight <= 4.0 + 1e-9);
        }
    }

    #[test]
    fn census_needs_hits() {
        let mut cfg = base(0.3);
        cfg.params.d = 5.0;
        cfg.n = 10;
        cfg.trials = 50;
        assert!(matches!(overheat_census(&cfg, None, 1.0, 0.1), Err(Error::InsufficientHits { .. })));
    }
}
