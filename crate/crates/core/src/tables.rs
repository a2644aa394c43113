//! Published reference values for the three worked length models, recomputed
//! and compared.
//!
//! Example 1 is exponential lengths (closed forms), example 2 the two-phase
//! mixture and example 3 deterministic lengths. The published numbers carry
//! three decimals, hence the default tolerance.

use serde::{Deserialize, Serialize};

use crate::critical::{lambda_l2l1, lambda_lower, lambda_star_kl, lambda_upper};
use crate::distributions::MessageLengthModel;
use crate::error::{Error, Result};
use crate::rates::{scenario, NetworkParams};

pub const DEFAULT_TOL: f64 = 0.002;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproRow {
    pub example: u8,
    pub label: String,
    pub computed: f64,
    pub expected: f64,
    pub deviation: f64,
    pub tol: f64,
    pub pass: bool,
}

impl ReproRow {
    fn new(example: u8, label: impl Into<String>, computed: f64, expected: f64, tol: f64) -> Self {
        let deviation = (computed - expected).abs();
        Self { example, label: label.into(), computed, expected, deviation, tol, pass: deviation <= tol }
    }
}

fn example1(tol: f64) -> Result<Vec<ReproRow>> {
    let m = MessageLengthModel::exponential(1.0)?;
    let mut rows = Vec::new();
    for k in [3usize, 4, 5, 10] {
        let want = (k as f64 - 2.0) / (k as f64 - 1.0);
        rows.push(ReproRow::new(1, format!("lambda_lower k={k}"), lambda_lower(&m, k)?, want, tol));
        rows.push(ReproRow::new(1, format!("lambda_upper k={k}"), lambda_upper(&m, k)?, want, tol));
    }
    Ok(rows)
}

fn example2(tol: f64) -> Result<Vec<ReproRow>> {
    let m = MessageLengthModel::mixture(1.0, 0.5)?;
    Ok(vec![
        ReproRow::new(2, "hat_lambda", m.hat_lambda(), 0.75, tol),
        ReproRow::new(2, "lambda_star k=3 l=1", lambda_star_kl(&m, 3, 1)?.lambda, 0.418, tol),
    ])
}

fn example3(tol: f64) -> Result<Vec<ReproRow>> {
    let m = MessageLengthModel::deterministic(1.0)?;
    let mut rows = Vec::new();
    for (k, want) in [(3usize, 0.311), (5, 0.667), (10, 0.857), (12, 0.883)] {
        rows.push(ReproRow::new(3, format!("lambda_lower k={k}"), lambda_lower(&m, k)?, want, tol));
    }
    rows.push(ReproRow::new(3, "lambda_pair 2,1", lambda_l2l1(&m, 2, 1)?.lambda, 0.888, tol));
    for k in 13..=35 {
        rows.push(ReproRow::new(3, format!("lambda_lower k={k}"), lambda_lower(&m, k)?, 0.888, tol));
    }
    rows.push(ReproRow::new(3, "lambda_pair 3,2", lambda_l2l1(&m, 3, 2)?.lambda, 0.956, tol));
    for (k, want) in [(15usize, 0.910), (20, 0.935), (25, 0.940), (30, 0.959), (35, 0.965)] {
        rows.push(ReproRow::new(3, format!("lambda_upper k={k}"), lambda_upper(&m, k)?, want, tol));
    }
    for (k, lambda, want) in [(20usize, 0.91, 2usize), (30, 0.958, 3)] {
        let p = NetworkParams::new(k, lambda, 1.0, m)?;
        let l = scenario(&p)?.l_opt;
        rows.push(ReproRow::new(3, format!("l_opt k={k} lambda={lambda}"), l as f64, want as f64, tol));
    }
    Ok(rows)
}

/// Recompute the reference values of the selected examples (all when
/// `examples` is empty) at tolerance `tol`.
pub fn reproduce(examples: &[u8], tol: f64) -> Result<Vec<ReproRow>> {
    if !(tol >= 0.0) {
        return Err(Error::Domain(format!("tolerance must be nonnegative, got {tol}")));
    }
    if let Some(e) = examples.iter().find(|e| !(1..=3).contains(*e)) {
        return Err(Error::Domain(format!("no example {e}; choose from 1, 2, 3")));
    }
    let wanted = |e: u8| examples.is_empty() || examples.contains(&e);
    let mut rows = Vec::new();
    if wanted(1) {
        rows.extend(example1(tol)?);
    }
    if wanted(2) {
        rows.extend(example2(tol)?);
    }
    if wanted(3) {
        rows.extend(example3(tol)?);
    }
    Ok(rows)
}
