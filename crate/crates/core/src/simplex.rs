//! Dense two-phase tableau simplex with Bland's anti-cycling rule.
//!
//! Solves `min c.x  s.t.  A x = b, x >= 0`.

use crate::error::{Error, Result};

pub const PIVOT_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal { value: f64, x: Vec<f64> },
    Infeasible,
    Unbounded,
}

/// Equality-form linear program.
#[derive(Clone, Debug)]
pub struct StandardLp {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

struct Tableau {
    /// rows x (cols + 1); last column is the right-hand side.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn rhs(&self, r: usize) -> f64 {
        self.t[r][self.cols]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.t[row][col];
        for v in self.t[row].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[row].clone();
        for (r, line) in self.t.iter_mut().enumerate() {
            if r == row {
                continue;
            }
            let factor = line[col];
            if factor != 0.0 {
                for (v, &pv) in line.iter_mut().zip(&pivot_row) {
                    *v -= factor * pv;
                }
                line[col] = 0.0;
            }
        }
        self.basis[row] = col;
    }

    /// Minimises `cost` over the current basis, using only columns where
    /// `allowed` holds. Returns `false` when unbounded.
    fn optimise(&mut self, cost: &[f64], allowed: impl Fn(usize) -> bool) -> bool {
        loop {
            // reduced costs: c_j - c_B B^-1 A_j
            let entering = (0..self.cols).filter(|&j| allowed(j)).find(|&j| {
                let mut reduced = cost[j];
                for (r, &bj) in self.basis.iter().enumerate() {
                    reduced -= cost[bj] * self.t[r][j];
                }
                reduced < -PIVOT_TOL
            });
            let Some(col) = entering else {
                return true;
            };
            // ratio test, ties to the smallest basic index (Bland)
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.t.len() {
                let a = self.t[r][col];
                if a > PIVOT_TOL {
                    let ratio = self.rhs(r) / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - PIVOT_TOL
                                || (ratio <= lratio + PIVOT_TOL && self.basis[r] < self.basis[lr])
                            {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            let Some((row, _)) = leave else {
                return false;
            };
            self.pivot(row, col);
        }
    }
}

impl StandardLp {
    pub fn solve(&self) -> Result<LpOutcome> {
        let rows = self.a.len();
        let n = self.c.len();
        if self.b.len() != rows || self.a.iter().any(|r| r.len() != n) {
            return Err(Error::Domain("linear program dimensions are inconsistent".into()));
        }
        // phase 1: artificial per row, rows flipped so b >= 0
        let cols = n + rows;
        let mut t = Vec::with_capacity(rows);
        for (r, (row, &rhs)) in self.a.iter().zip(&self.b).enumerate() {
            let sign = if rhs < 0.0 { -1.0 } else { 1.0 };
            let mut line = vec![0.0; cols + 1];
            for (dst, &v) in line.iter_mut().zip(row) {
                *dst = sign * v;
            }
            line[n + r] = 1.0;
            line[cols] = sign * rhs;
            t.push(line);
        }
        let mut tab = Tableau {
            t,
            basis: (n..n + rows).collect(),
            cols,
        };
        let mut phase1 = vec![0.0; cols];
        phase1[n..].fill(1.0);
        tab.optimise(&phase1, |_| true);
        let infeasibility: f64 = (0..rows)
            .filter(|&r| tab.basis[r] >= n)
            .map(|r| tab.rhs(r))
            .sum();
        let scale = 1.0 + self.b.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if infeasibility > 1e-7 * scale {
            return Ok(LpOutcome::Infeasible);
        }
        // drive remaining artificials out of the basis, dropping redundant rows
        let mut r = 0;
        while r < tab.t.len() {
            if tab.basis[r] >= n {
                if let Some(col) = (0..n).find(|&j| tab.t[r][j].abs() > PIVOT_TOL) {
                    tab.pivot(r, col);
                    r += 1;
                } else {
                    tab.t.remove(r);
                    tab.basis.remove(r);
                }
            } else {
                r += 1;
            }
        }
        // phase 2 over the original columns
        let mut cost = vec![0.0; cols];
        cost[..n].copy_from_slice(&self.c);
        if !tab.optimise(&cost, |j| j < n) {
            return Ok(LpOutcome::Unbounded);
        }
        let mut x = vec![0.0; n];
        for (r, &bj) in tab.basis.iter().enumerate() {
            if bj < n {
                x[bj] = tab.rhs(r);
            }
        }
        let value = self.c.iter().zip(&x).map(|(c, x)| c * x).sum();
        Ok(LpOutcome::Optimal { value, x })
    }
}
