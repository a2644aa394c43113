//! Dense two-phase tableau simplex for small linear programs.
//!
//! Minimises `c·x` over `x ≥ 0` subject to rows `aᵢ·x (≤ | ≥ | =) bᵢ`.
//! Bland's rule is used throughout, so the method terminates on degenerate
//! problems; instances here have a few dozen columns at most.

use crate::error::{Error, Result};

const EPS: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Vec<f64>,
    pub objective: f64,
}

struct Tableau {
    // rows × (cols + 1); last column is the right-hand side
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    /// Minimise `cost·x` over the current basis; columns with `allowed[j]`
    /// false never enter.
    fn optimise(&mut self, cost: &[f64], allowed: &[bool]) -> Result<()> {
        let m = self.rows.len();
        for _ in 0..10_000 {
            // reduced costs: c_j − c_B·B⁻¹A_j
            let entering = (0..self.cols).filter(|&j| allowed[j]).find(|&j| {
                let z: f64 = (0..m).map(|i| cost[self.basis[i]] * self.rows[i][j]).sum();
                cost[j] - z < -EPS
            });
            let Some(c) = entering else { return Ok(()) };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                let a = self.rows[i][c];
                if a > EPS {
                    let ratio = self.rows[i][self.cols] / a;
                    let better = match leave {
                        None => true,
                        Some((li, lr)) => ratio < lr - EPS || (ratio <= lr + EPS && self.basis[i] < self.basis[li]),
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, _)) = leave else {
                return Err(Error::Infeasible("linear program is unbounded".into()));
            };
            self.pivot(r, c);
        }
        Err(Error::Infeasible("simplex iteration limit reached".into()))
    }
}

impl LinearProgram {
    pub fn solve(&self) -> Result<Solution> {
        let n = self.objective.len();
        let m = self.constraints.len();
        if self.constraints.iter().any(|c| c.coeffs.len() != n) {
            return Err(Error::Dimension("constraint width differs from objective".into()));
        }
        // Normalise to nonnegative right-hand sides.
        let rows: Vec<(Vec<f64>, Relation, f64)> = self
            .constraints
            .iter()
            .map(|c| {
                if c.rhs < 0.0 {
                    let flipped = match c.relation {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (c.coeffs.iter().map(|v| -v).collect(), flipped, -c.rhs)
                } else {
                    (c.coeffs.clone(), c.relation, c.rhs)
                }
            })
            .collect();
        let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
        let cols = n + n_slack + n_art;
        let mut t = Tableau { rows: vec![vec![0.0; cols + 1]; m], basis: vec![0; m], cols };
        let (mut s, mut a) = (n, n + n_slack);
        for (i, (coeffs, rel, rhs)) in rows.iter().enumerate() {
            t.rows[i][..n].copy_from_slice(coeffs);
            t.rows[i][cols] = *rhs;
            match rel {
                Relation::Le => {
                    t.rows[i][s] = 1.0;
                    t.basis[i] = s;
                    s += 1;
                }
                Relation::Ge => {
                    t.rows[i][s] = -1.0;
                    s += 1;
                    t.rows[i][a] = 1.0;
                    t.basis[i] = a;
                    a += 1;
                }
                Relation::Eq => {
                    t.rows[i][a] = 1.0;
                    t.basis[i] = a;
                    a += 1;
                }
            }
        }

        // Phase 1: drive the artificials to zero.
        let mut cost1 = vec![0.0; cols];
        cost1[n + n_slack..].iter_mut().for_each(|c| *c = 1.0);
        t.optimise(&cost1, &vec![true; cols])?;
        let infeas: f64 = (0..m).filter(|&i| t.basis[i] >= n + n_slack).map(|i| t.rows[i][cols]).sum();
        if infeas > 1e-9 {
            return Err(Error::Infeasible("linear program has no feasible point".into()));
        }
        // Pivot degenerate artificials out of the basis where possible.
        for i in 0..m {
            if t.basis[i] >= n + n_slack {
                if let Some(j) = (0..n + n_slack).find(|&j| t.rows[i][j].abs() > EPS) {
                    t.pivot(i, j);
                }
            }
        }

        // Phase 2 on the original objective, artificials frozen.
        let mut cost2 = vec![0.0; cols];
        cost2[..n].copy_from_slice(&self.objective);
        let allowed: Vec<bool> = (0..cols).map(|j| j < n + n_slack).collect();
        t.optimise(&cost2, &allowed)?;

        let mut x = vec![0.0; n];
        for i in 0..m {
            if t.basis[i] < n {
                x[t.basis[i]] = t.rows[i][cols].max(0.0);
            }
        }
        let objective = self.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(Solution { x, objective })
    }
}
