//! Load flows induced by piecewise-linear input configurations.
//!
//! Flow `i` (0-based) is served by servers `i−1` and `i` (mod `k`). A split
//! vector `α` sends the fraction `αᵢ` of flow `i` to server `i` and the rest
//! to server `i−1`, so on the full ring server `i` receives
//!
//! ```text
//! bᵢ = αᵢ·aᵢ + (1 − αᵢ₊₁)·aᵢ₊₁
//! ```
//!
//! The routing rule drives the loads toward each other; the resulting load
//! configuration minimises the total variation `D = Σ|bᵢ − bᵢ₊₁|` (around
//! the ring for the full problem, along the arc for a connected group of
//! flows). Both problems are linear programs and are solved exactly with
//! the small simplex in [`simplex`].

pub mod simplex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use simplex::{Constraint, LinearProgram, Relation};

/// Default relative tolerance separating `D = 0` from a positive minimum.
pub const BALANCE_TOL: f64 = 1e-9;

/// Optimal load slopes, the duration they apply to, and the minimum `D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadConfiguration {
    pub loads: Vec<f64>,
    pub duration: f64,
    pub imbalance: f64,
}

/// Split fractions; entry `j` belongs to the `j`-th participating flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions(pub Vec<f64>);

/// An affine function of the split fractions: `coeffs·α + constant`.
#[derive(Clone)]
struct Affine {
    coeffs: Vec<f64>,
    constant: f64,
}

impl Affine {
    fn zero(n: usize) -> Self {
        Self { coeffs: vec![0.0; n], constant: 0.0 }
    }

    /// Add `α_j·a` (to the right server) or `(1−α_j)·a` (to the left server).
    fn add_share(&mut self, j: usize, a: f64, right: bool) {
        if right {
            self.coeffs[j] += a;
        } else {
            self.constant += a;
            self.coeffs[j] -= a;
        }
    }

    fn minus(&self, other: &Affine) -> Affine {
        Affine {
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(x, y)| x - y).collect(),
            constant: self.constant - other.constant,
        }
    }

    fn eval(&self, alpha: &[f64]) -> f64 {
        self.constant + self.coeffs.iter().zip(alpha).map(|(c, a)| c * a).sum::<f64>()
    }
}

/// Minimise `Σ |servers[p] − servers[q]|` over `α ∈ [0,1]ⁿ` for the listed
/// pairs, returning the split fractions.
fn minimise_variation(servers: &[Affine], pairs: &[(usize, usize)], n_alpha: usize) -> Result<Vec<f64>> {
    // columns: α₀..α_{n−1}, then one t per pair
    let n = n_alpha + pairs.len();
    let mut objective = vec![0.0; n];
    objective[n_alpha..].iter_mut().for_each(|c| *c = 1.0);
    let mut constraints = Vec::with_capacity(n_alpha + 2 * pairs.len());
    for j in 0..n_alpha {
        let mut coeffs = vec![0.0; n];
        coeffs[j] = 1.0;
        constraints.push(Constraint { coeffs, relation: Relation::Le, rhs: 1.0 });
    }
    for (p, &(i, j)) in pairs.iter().enumerate() {
        let diff = servers[i].minus(&servers[j]);
        // t ≥ diff  and  t ≥ −diff
        for sign in [1.0, -1.0] {
            let mut coeffs = vec![0.0; n];
            coeffs[n_alpha + p] = 1.0;
            for (c, d) in coeffs[..n_alpha].iter_mut().zip(&diff.coeffs) {
                *c = -sign * d;
            }
            constraints.push(Constraint { coeffs, relation: Relation::Ge, rhs: sign * diff.constant });
        }
    }
    let sol = LinearProgram { objective, constraints }.solve()?;
    Ok(sol.x[..n_alpha].iter().map(|a| a.clamp(0.0, 1.0)).collect())
}

fn finish(
    servers: &[Affine],
    pairs: &[(usize, usize)],
    alpha: Vec<f64>,
    duration: f64,
) -> (LoadConfiguration, SplitFractions) {
    let loads: Vec<f64> = servers.iter().map(|s| s.eval(&alpha)).collect();
    let imbalance = pairs.iter().map(|&(i, j)| (loads[i] - loads[j]).abs()).sum();
    (LoadConfiguration { loads, duration, imbalance }, SplitFractions(alpha))
}

fn check_slopes(slopes: &[f64]) -> Result<()> {
    if slopes.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
        return Err(Error::Domain("slopes must be finite and nonnegative".into()));
    }
    Ok(())
}

/// Server loads of the full ring for split fractions `alpha`.
pub fn ring_loads(slopes: &[f64], alpha: &[f64]) -> Vec<f64> {
    let k = slopes.len();
    (0..k)
        .map(|i| {
            let next = (i + 1) % k;
            alpha[i] * slopes[i] + (1.0 - alpha[next]) * slopes[next]
        })
        .collect()
}

/// Server loads of an arc of `l` flows (`l + 1` servers) for `alpha`.
pub fn arc_loads(slopes: &[f64], alpha: &[f64]) -> Vec<f64> {
    let l = slopes.len();
    (0..=l)
        .map(|m| {
            let from_left = if m > 0 { alpha[m - 1] * slopes[m - 1] } else { 0.0 };
            let from_right = if m < l { (1.0 - alpha[m]) * slopes[m] } else { 0.0 };
            from_left + from_right
        })
        .collect()
}

/// Full-ring problem: minimise the cyclic variation of the server loads.
pub fn solve_ring(slopes: &[f64], duration: f64) -> Result<(LoadConfiguration, SplitFractions)> {
    let k = slopes.len();
    if k < 3 {
        return Err(Error::Dimension(format!("ring needs at least 3 flows, got {k}")));
    }
    check_slopes(slopes)?;
    let mut servers = vec![Affine::zero(k); k];
    for (i, &a) in slopes.iter().enumerate() {
        servers[i].add_share(i, a, true);
        servers[(i + k - 1) % k].add_share(i, a, false);
    }
    let pairs: Vec<(usize, usize)> = (0..k).map(|i| (i, (i + 1) % k)).collect();
    let alpha = minimise_variation(&servers, &pairs, k)?;
    Ok(finish(&servers, &pairs, alpha, duration))
}

/// Arc problem for `l` connected flows feeding `l + 1` servers; the two end
/// servers receive work from one flow only.
pub fn solve_arc(slopes: &[f64], duration: f64) -> Result<(LoadConfiguration, SplitFractions)> {
    let l = slopes.len();
    if l == 0 {
        return Err(Error::Dimension("arc must contain at least one flow".into()));
    }
    check_slopes(slopes)?;
    let mut servers = vec![Affine::zero(l); l + 1];
    for (j, &a) in slopes.iter().enumerate() {
        servers[j + 1].add_share(j, a, true);
        servers[j].add_share(j, a, false);
    }
    let pairs: Vec<(usize, usize)> = (0..l).map(|m| (m, m + 1)).collect();
    let alpha = minimise_variation(&servers, &pairs, l)?;
    Ok(finish(&servers, &pairs, alpha, duration))
}

fn balanced(imbalance: f64, slopes: &[f64], tol: f64) -> bool {
    imbalance <= tol * slopes.iter().sum::<f64>().max(1.0)
}

/// Whether a connected group of flows can share its work equally among its
/// `l + 1` servers.
pub fn is_balanced(slopes: &[f64], tol: f64) -> Result<bool> {
    let (cfg, _) = solve_arc(slopes, 1.0)?;
    Ok(balanced(cfg.imbalance, slopes, tol))
}

/// Whether the whole ring can be loaded evenly.
pub fn is_ring_balanced(slopes: &[f64], tol: f64) -> Result<bool> {
    let (cfg, _) = solve_ring(slopes, 1.0)?;
    Ok(balanced(cfg.imbalance, slopes, tol))
}

/// A connected run of flows `start, start+1, …, start+len−1` (mod `k`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowArc {
    pub start: usize,
    pub len: usize,
}

impl FlowArc {
    pub fn flows(&self, k: usize) -> Vec<usize> {
        (0..self.len).map(|j| (self.start + j) % k).collect()
    }

    fn contains_arc(&self, other: &FlowArc, k: usize) -> bool {
        let mine = self.flows(k);
        other.flows(k).iter().all(|f| mine.contains(f))
    }
}

/// Every connected flow set containing flow 0, the full ring last.
fn arcs_through_first(k: usize) -> Vec<FlowArc> {
    let mut arcs = Vec::new();
    for len in 1..k {
        for back in (0..len).rev() {
            arcs.push(FlowArc { start: (k - back) % k, len });
        }
    }
    arcs.push(FlowArc { start: 0, len: k });
    arcs
}

/// Balanced connected sets containing flow 0 that have no balanced connected
/// proper superset.
pub fn maximal_balanced_sets(slopes: &[f64], tol: f64) -> Result<Vec<FlowArc>> {
    let k = slopes.len();
    if k < 3 {
        return Err(Error::Dimension(format!("ring needs at least 3 flows, got {k}")));
    }
    check_slopes(slopes)?;
    let mut balanced_arcs = Vec::new();
    for arc in arcs_through_first(k) {
        let ok = if arc.len == k {
            is_ring_balanced(slopes, tol)?
        } else {
            let sub: Vec<f64> = arc.flows(k).iter().map(|&f| slopes[f]).collect();
            is_balanced(&sub, tol)?
        };
        if ok {
            balanced_arcs.push(arc);
        }
    }
    Ok(balanced_arcs
        .iter()
        .filter(|a| !balanced_arcs.iter().any(|b| b.len > a.len && b.contains_arc(a, k)))
        .copied()
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_slopes_balance_the_ring() {
        for k in 3..8 {
            let (cfg, _) = solve_ring(&vec![2.5; k], 1.0).unwrap();
            assert!(cfg.imbalance < 1e-12);
            assert!(cfg.loads.iter().all(|b| (b - 2.5).abs() < 1e-12));
            assert_eq!(maximal_balanced_sets(&vec![2.5; k], BALANCE_TOL).unwrap(), vec![FlowArc { start: 0, len: k }]);
        }
    }

    #[test]
    fn single_flow_splits_evenly() {
        let (cfg, alpha) = solve_arc(&[3.0], 1.0).unwrap();
        assert!(cfg.imbalance < 1e-12);
        assert!((cfg.loads[0] - 1.5).abs() < 1e-12 && (cfg.loads[1] - 1.5).abs() < 1e-12);
        assert!((alpha.0[0] - 0.5).abs() < 1e-12);
        assert!(is_balanced(&[7.0], BALANCE_TOL).unwrap());
    }

    #[test]
    fn equal_arc_has_auxiliary_load() {
        for l in 1..6 {
            let h = 3.0;
            let (cfg, _) = solve_arc(&vec![h; l], 1.0).unwrap();
            assert!(cfg.imbalance < 1e-12);
            let want = l as f64 * h / (l as f64 + 1.0);
            assert!(cfg.loads.iter().all(|b| (b - want).abs() < 1e-12), "l={l}: {:?}", cfg.loads);
        }
    }

    #[test]
    fn homogeneous_in_slopes() {
        let a = [0.7, 2.0, 0.3];
        let (base, _) = solve_ring(&a, 1.0).unwrap();
        let scaled: Vec<f64> = a.iter().map(|x| 3.5 * x).collect();
        let (s, _) = solve_ring(&scaled, 1.0).unwrap();
        assert!((s.imbalance - 3.5 * base.imbalance).abs() < 1e-10);
    }

    #[test]
    fn dimension_errors() {
        assert!(matches!(solve_ring(&[1.0, 2.0], 1.0), Err(Error::Dimension(_))));
        assert!(matches!(solve_arc(&[], 1.0), Err(Error::Dimension(_))));
        assert!(solve_ring(&[1.0, -2.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn loads_conserve_work() {
        let a = [8.0, 0.5, 0.5, 1.25];
        let (cfg, alpha) = solve_ring(&a, 1.0).unwrap();
        assert!((cfg.loads.iter().sum::<f64>() - a.iter().sum::<f64>()).abs() < 1e-12);
        assert_eq!(cfg.loads, ring_loads(&a, &alpha.0));
        let (arc, alpha) = solve_arc(&a[..3], 1.0).unwrap();
        assert_eq!(arc.loads, arc_loads(&a[..3], &alpha.0));
        assert!((arc.loads.iter().sum::<f64>() - 9.0).abs() < 1e-12);
    }

    #[test]
    fn arcs_cover_first_flow() {
        let arcs = arcs_through_first(4);
        assert_eq!(arcs.len(), 1 + 2 + 3 + 1);
        assert!(arcs.iter().all(|a| a.flows(4).contains(&0)));
    }
}
