//! Classification of input paths as overheated or not.
//!
//! Over the lookback window each flow's scaled cumulative work `z(s)` is a
//! nondecreasing step function on `[0, T]`. It is compared with lines
//! `s ↦ a·s` through the origin in the sup norm; the best such line (the
//! Chebyshev fit) gives a slope and a residual.

use serde::{Deserialize, Serialize};

/// Best sup-norm line through the origin for one flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub residual: f64,
}

/// Fit `a·s` to the step path with jumps `jumps = [(s_j, z(s_j))]` (sorted,
/// `z` cumulative) on `[0, horizon]`.
pub fn chebyshev_fit(jumps: &[(f64, f64)], horizon: f64) -> LineFit {
    // Extremes of |a·s − z(s)| occur at left and right limits of each jump
    // and at the end points.
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(2 * jumps.len() + 2);
    pts.push((0.0, 0.0));
    let mut before = 0.0;
    for &(s, z) in jumps {
        pts.push((s, before));
        pts.push((s, z));
        before = z;
    }
    pts.push((horizon, before));

    let above = |a: f64| pts.iter().map(|&(s, z)| a * s - z).fold(f64::NEG_INFINITY, f64::max);
    let below = |a: f64| pts.iter().map(|&(s, z)| z - a * s).fold(f64::NEG_INFINITY, f64::max);
    let top = pts.iter().map(|p| p.1).fold(0.0, f64::max);
    if horizon <= 0.0 {
        return LineFit { slope: 0.0, residual: top };
    }
    // above − below is nondecreasing, ≤ 0 at a = 0 and > 0 at `hi`.
    let (mut lo, mut hi) = (0.0, (2.0 * top + 1.0) / horizon);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if above(mid) < below(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let slope = 0.5 * (lo + hi);
    LineFit { slope, residual: above(slope).max(below(slope)) }
}

/// Per-flow census frequencies among conditioning events, weighted by the
/// likelihood ratios when importance sampling is on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowCensus {
    /// Best-fit slope above `a_min`.
    pub overheated: f64,
    /// Best-fit line within `ε` of the path.
    pub tracked: f64,
    /// Both of the above: the path stays in an `ε`-tube around a line of
    /// slope above `a_min`.
    pub overheated_tracked: f64,
    pub mean_slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusReport {
    pub hits: usize,
    /// `(Σw)²/Σw²` over the hits.
    pub effective_hits: f64,
    pub window: f64,
    pub a_min: f64,
    pub eps: f64,
    pub predicted_l: usize,
    pub flows: Vec<FlowCensus>,
    /// Entry `m` is the frequency of exactly `m` overheated flows.
    pub overheated_count: Vec<f64>,
    /// Frequency of "first flow overheated, all others not".
    pub only_first: f64,
    /// Frequency of "every flow overheated".
    pub all_flows: f64,
}

pub(crate) fn summarise(
    fits: &[(f64, Vec<LineFit>)],
    k: usize,
    window: f64,
    a_min: f64,
    eps: f64,
    predicted_l: usize,
) -> CensusReport {
    let total: f64 = fits.iter().map(|(w, _)| w).sum();
    let sq: f64 = fits.iter().map(|(w, _)| w * w).sum();
    let norm = if total > 0.0 { 1.0 / total } else { 0.0 };
    let mut flows = vec![FlowCensus { overheated: 0.0, tracked: 0.0, overheated_tracked: 0.0, mean_slope: 0.0 }; k];
    let mut count = vec![0.0; k + 1];
    let (mut only_first, mut all_flows) = (0.0, 0.0);
    for (w, fit) in fits {
        let p = w * norm;
        let hot: Vec<bool> = fit.iter().map(|f| f.slope > a_min).collect();
        for (fc, (f, &h)) in flows.iter_mut().zip(fit.iter().zip(&hot)) {
            let tracked = f.residual < eps;
            fc.overheated += p * h as u8 as f64;
            fc.tracked += p * tracked as u8 as f64;
            fc.overheated_tracked += p * (h && tracked) as u8 as f64;
            fc.mean_slope += p * f.slope;
        }
        let n_hot = hot.iter().filter(|h| **h).count();
        count[n_hot] += p;
        if hot[0] && n_hot == 1 {
            only_first += p;
        }
        if n_hot == k {
            all_flows += p;
        }
    }
    CensusReport {
        hits: fits.len(),
        effective_hits: if sq > 0.0 { total * total / sq } else { 0.0 },
        window,
        a_min,
        eps,
        predicted_l,
        flows,
        overheated_count: count,
        only_first,
        all_flows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Sup distance by dense sampling; an oracle for the fit residual.
    fn sup_dist(jumps: &[(f64, f64)], horizon: f64, a: f64) -> f64 {
        let n = 200_000;
        let mut best: f64 = 0.0;
        for i in 0..=n {
            let s = horizon * i as f64 / n as f64;
            let z = jumps.iter().take_while(|j| j.0 <= s).last().map_or(0.0, |j| j.1);
            best = best.max((a * s - z).abs());
        }
        best
    }

    #[test]
    fn straight_staircase_fits_its_slope() {
        let jumps: Vec<(f64, f64)> = (1..=100).map(|i| (i as f64 * 0.01, i as f64 * 0.02)).collect();
        let fit = chebyshev_fit(&jumps, 1.0);
        assert!((fit.slope - 2.0).abs() < 0.03);
        assert!(fit.residual <= 0.02);
    }

    #[test]
    fn fit_is_optimal_against_grid() {
        let jumps = [(0.1, 0.5), (0.15, 0.7), (0.6, 1.9), (0.9, 2.0)];
        let fit = chebyshev_fit(&jumps, 1.0);
        assert!((sup_dist(&jumps, 1.0, fit.slope) - fit.residual).abs() < 1e-4);
        for da in [-0.05, 0.05, -0.3, 0.3] {
            assert!(sup_dist(&jumps, 1.0, fit.slope + da) >= fit.residual - 1e-9);
        }
    }

    #[test]
    fn empty_path_has_zero_slope() {
        let fit = chebyshev_fit(&[], 2.0);
        assert!(fit.slope.abs() < 1e-12);
        assert!(fit.residual.abs() < 1e-12);
    }

    #[test]
    fn summary_counts_patterns() {
        let hot = LineFit { slope: 5.0, residual: 0.05 };
        let cold = LineFit { slope: 0.2, residual: 0.5 };
        let fits = vec![(1.0, vec![hot, cold, cold]), (3.0, vec![hot, hot, hot])];
        let r = summarise(&fits, 3, 1.0, 1.0, 0.1, 1);
        assert_eq!(r.hits, 2);
        assert!((r.only_first - 0.25).abs() < 1e-12);
        assert!((r.all_flows - 0.75).abs() < 1e-12);
        assert!((r.flows[0].overheated - 1.0).abs() < 1e-12);
        assert!((r.flows[1].overheated - 0.75).abs() < 1e-12);
        assert!((r.flows[0].overheated_tracked - 1.0).abs() < 1e-12);
        assert!((r.flows[1].tracked - 0.75).abs() < 1e-12);
        assert!((r.effective_hits - 16.0 / 10.0).abs() < 1e-12);
        assert_eq!(r.overheated_count.len(), 4);
    }
}
