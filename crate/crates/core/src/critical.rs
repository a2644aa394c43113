//! Critical input rates separating the overheating scenarios.
//!
//! Write `ϑ_l(λ) = (l+1)θ(λ,l)` for `l < k` and `ϑ*_k(λ) = kθ*(λ)`; then
//! `J(λ,l) = ϑ_l·d` and `J(λ,k) = ϑ*_k·d`, so scenario boundaries are the
//! intersections of these curves in the `(λ, ϑ)` plane:
//!
//! * `λ*ₖ,ₗ`: where `ϑ_l` meets `ϑ*_k`, i.e. the positive root of
//!   `l[φ(ϑ/(l+1))−1] = k[φ(ϑ/k)−1]`;
//! * `λ_{l₂,l₁}`: where `ϑ_{l₁}` meets `ϑ_{l₂}`.
//!
//! Both equations are solved as `r(ϑ) = 1` for the ratio of the two sides
//! written through secant slopes, which starts below 1 at `ϑ = 0` and grows
//! without bound.
//!
//! Below `λ_k` only the first flow overheats; above `λ^k` all flows do.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::MessageLengthModel;
use crate::error::{Error, Result};
use crate::rates::{scenario, NetworkParams, Scenario};
use crate::roots::{bisect_increasing, bracket_upward};

/// A curve intersection: the rate `λ` and common value `ϑ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub lambda: f64,
    pub vartheta: f64,
}

/// Solve `w₁·s(ϑ/n₁) = w₂·s(ϑ/n₂)` with `n₁ < n₂` and `w₁/w₂ < 1` at 0,
/// where `s` is the secant slope and `wᵢ = lᵢ/nᵢ`.
fn solve_crossing(model: &MessageLengthModel, w1: f64, n1: f64, w2: f64, n2: f64, what: &str) -> Result<f64> {
    // ϑ/n₁ is the larger argument, so it bounds the search domain.
    let cap = n1 * model.search_cap();
    let ratio = |v: f64| -> f64 {
        match (model.mgf_secant(v / n1), model.mgf_secant(v / n2)) {
            (Ok(a), Ok(b)) => (w1 * a) / (w2 * b) - 1.0,
            _ => f64::INFINITY,
        }
    };
    let start = 1e-6 * n1.max(1.0);
    let (lo, hi) = bracket_upward(ratio, 0.0, start, cap)
        .ok_or_else(|| Error::NoRoot(format!("{what}: curves do not cross below ϑ = {cap}")))?;
    Ok(bisect_increasing(ratio, lo, hi, 0.0))
}

/// `λ*ₖ,ₗ` and `ϑ*ₖ,ₗ` for `1 ≤ l ≤ k−2`.
///
/// For `l = k−1` both sides of the defining equation coincide up to the
/// constant factor `(k−1)/k`, so the curves never meet: the collective
/// scenario is always cheaper than `k−1` flows. That case is reported as
/// [`Error::NoRoot`].
pub fn lambda_star_kl(model: &MessageLengthModel, k: usize, l: usize) -> Result<Crossing> {
    model.validate()?;
    if k < 3 {
        return Err(Error::Dimension(format!("ring size must be at least 3, got {k}")));
    }
    if l == 0 || l >= k {
        return Err(Error::Domain(format!("l must lie in 1..{k}, got {l}")));
    }
    if l == k - 1 {
        return Err(Error::NoRoot(format!("ϑ_{l} and ϑ*_{k} never intersect: their ratio is constantly {l}/{k}")));
    }
    let (lf, kf) = (l as f64, k as f64);
    let vartheta = solve_crossing(model, lf / (lf + 1.0), lf + 1.0, 1.0, kf, &format!("λ*_{{{k},{l}}}"))?;
    let lambda = 1.0 / model.mgf_secant(vartheta / kf)?;
    Ok(Crossing { lambda, vartheta })
}

/// `λ_{l₂,l₁}` and `ϑ_{l₂,l₁}` for `1 ≤ l₁ < l₂`. The result may exceed `λ̂`
/// but stays below `λ̂(l₂+1)/l₂`.
pub fn lambda_l2l1(model: &MessageLengthModel, l2: usize, l1: usize) -> Result<Crossing> {
    model.validate()?;
    if l1 == 0 || l1 >= l2 {
        return Err(Error::Domain(format!("need 1 <= l1 < l2, got l1={l1}, l2={l2}")));
    }
    let (a, b) = (l1 as f64, l2 as f64);
    let vartheta = solve_crossing(model, a / (a + 1.0), a + 1.0, b / (b + 1.0), b + 1.0, &format!("λ_{{{l2},{l1}}}"))?;
    let lambda = (b + 1.0) / (b * model.mgf_secant(vartheta / (b + 1.0))?);
    Ok(Crossing { lambda, vartheta })
}

/// `λ_k`: below it the solitary scenario `l = 1` is the cheapest.
///
/// Computed as `min(λ*ₖ,₁, min_{2≤l≤k−1} λ_{l,1})`: the first term is
/// where the collective curve overtakes `ϑ₁`, the others where an
/// intermediate `ϑ_l` drops below `ϑ₁`.
pub fn lambda_lower(model: &MessageLengthModel, k: usize) -> Result<f64> {
    let mut lo = lambda_star_kl(model, k, 1)?.lambda;
    for l in 2..k {
        lo = lo.min(lambda_l2l1(model, l, 1)?.lambda);
    }
    Ok(lo)
}

/// `λ^k = max_l λ*ₖ,ₗ` over `l = 1..=k−2`: above it the collective scenario
/// is the cheapest.
pub fn lambda_upper(model: &MessageLengthModel, k: usize) -> Result<f64> {
    let mut hi = lambda_star_kl(model, k, 1)?.lambda;
    for l in 2..k.saturating_sub(1) {
        hi = hi.max(lambda_star_kl(model, k, l)?.lambda);
    }
    Ok(hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarEntry {
    pub l: usize,
    pub crossing: Option<Crossing>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEntry {
    pub l2: usize,
    pub l1: usize,
    pub crossing: Option<Crossing>,
}

/// All critical rates of a ring of size `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalRateTable {
    pub k: usize,
    pub hat_lambda: f64,
    pub star: Vec<StarEntry>,
    pub pairs: Vec<PairEntry>,
    pub lower: f64,
    pub upper: f64,
}

/// Build the table with `λ*ₖ,ₗ` for `l = 1..k−1`, `λ_{l,1}` for
/// `l = 2..k−1`, and any `extra_pairs` `(l₂, l₁)`.
pub fn critical_table(
    model: &MessageLengthModel,
    k: usize,
    extra_pairs: &[(usize, usize)],
) -> Result<CriticalRateTable> {
    let star = (1..k).map(|l| StarEntry { l, crossing: lambda_star_kl(model, k, l).ok() }).collect();
    let mut wanted: Vec<(usize, usize)> = (2..k).map(|l| (l, 1)).collect();
    for &p in extra_pairs {
        if !wanted.contains(&p) {
            wanted.push(p);
        }
    }
    let pairs =
        wanted.into_iter().map(|(l2, l1)| PairEntry { l2, l1, crossing: lambda_l2l1(model, l2, l1).ok() }).collect();
    Ok(CriticalRateTable {
        k,
        hat_lambda: model.hat_lambda(),
        star,
        pairs,
        lower: lambda_lower(model, k)?,
        upper: lambda_upper(model, k)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub lambda: f64,
    pub l_opt: usize,
    /// `J(λ,l)` for `l = 1..=k`; `None` marks an infeasible scenario.
    pub rates: Vec<Option<f64>>,
}

/// Scenario map over a grid of input rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagram {
    pub k: usize,
    pub d: f64,
    pub rows: Vec<PhaseRow>,
}

impl PhaseRow {
    fn from_scenario(lambda: f64, s: Scenario) -> Self {
        Self { lambda, l_opt: s.l_opt, rates: s.entries.iter().map(|e| e.rate).collect() }
    }
}

/// Evaluate the scenario at every grid point. The grid must be strictly
/// increasing and lie below `λ̂`.
pub fn phase_sweep(model: &MessageLengthModel, k: usize, d: f64, grid: &[f64]) -> Result<PhaseDiagram> {
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("λ grid must be strictly increasing".into()));
    }
    let rows = grid
        .par_iter()
        .map(|&lambda| {
            let params = NetworkParams::new(k, lambda, d, *model)?;
            Ok(PhaseRow::from_scenario(lambda, scenario(&params)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PhaseDiagram { k, d, rows })
}
