//! Small dense linear programs.
//!
//! A two-phase tableau simplex with Bland's rule. It is meant for the
//! transport problems that arise per state-action pair, which have a few
//! hundred variables at most, and as a reference for the faster
//! specialised solvers.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("constraint {row} has {got} coefficients, expected {expected}")]
    Dimension { row: usize, got: usize, expected: usize },
    #[error("iteration limit reached")]
    IterationLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `minimize c^T x` subject to the constraints and `x >= 0`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

const EPS: f64 = 1e-10;

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        LinearProgram {
            objective,
            constraints: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
        self
    }

    pub fn minimize(&self) -> Result<LpSolution, LpError> {
        Tableau::build(self)?.solve(self)
    }

    pub fn maximize(&self) -> Result<LpSolution, LpError> {
        let neg = LinearProgram {
            objective: self.objective.iter().map(|c| -c).collect(),
            constraints: self.constraints.clone(),
        };
        let mut sol = neg.minimize()?;
        sol.objective = -sol.objective;
        Ok(sol)
    }
}

struct Tableau {
    // rows: constraints, then the objective row; last column is the rhs
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    n: usize,
    artificial_start: usize,
    cols: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Result<Self, LpError> {
        let n = lp.num_vars();
        let m = lp.constraints.len();
        for (row, c) in lp.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(LpError::Dimension {
                    row,
                    got: c.coeffs.len(),
                    expected: n,
                });
            }
        }
        // normalise to nonnegative rhs
        let rows: Vec<(Vec<f64>, Relation, f64)> = lp
            .constraints
            .iter()
            .map(|c| {
                if c.rhs < 0.0 {
                    let rel = match c.relation {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (c.coeffs.iter().map(|v| -v).collect(), rel, -c.rhs)
                } else {
                    (c.coeffs.clone(), c.relation, c.rhs)
                }
            })
            .collect();
        let slacks = rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let artificials = rows.iter().filter(|r| r.1 != Relation::Le).count();
        let artificial_start = n + slacks;
        let cols = artificial_start + artificials;
        let mut t = vec![vec![0.0; cols + 1]; m + 1];
        let mut basis = vec![0; m];
        let (mut s, mut a) = (n, artificial_start);
        for (i, (coeffs, rel, rhs)) in rows.iter().enumerate() {
            t[i][..n].copy_from_slice(coeffs);
            t[i][cols] = *rhs;
            match rel {
                Relation::Le => {
                    t[i][s] = 1.0;
                    basis[i] = s;
                    s += 1;
                }
                Relation::Ge => {
                    t[i][s] = -1.0;
                    s += 1;
                    t[i][a] = 1.0;
                    basis[i] = a;
                    a += 1;
                }
                Relation::Eq => {
                    t[i][a] = 1.0;
                    basis[i] = a;
                    a += 1;
                }
            }
        }
        Ok(Tableau {
            t,
            basis,
            n,
            artificial_start,
            cols,
        })
    }

    fn m(&self) -> usize {
        self.basis.len()
    }

    /// Loads `cost` (over all columns) into the objective row in reduced form.
    fn set_objective(&mut self, cost: &[f64]) {
        let m = self.m();
        let cols = self.cols;
        self.t[m] = cost.to_vec();
        self.t[m].push(0.0);
        for i in 0..m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for j in 0..=cols {
                    self.t[m][j] -= cb * self.t[i][j];
                }
            }
        }
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.t[row][col];
        for v in self.t[row].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[row].clone();
        for (i, r) in self.t.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let f = r[col];
            if f != 0.0 {
                for (v, pv) in r.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        self.basis[row] = col;
    }

    fn run(&mut self, allowed: usize) -> Result<(), LpError> {
        let m = self.m();
        let limit = 50_000 + 100 * (self.cols + m);
        for _ in 0..limit {
            // Bland: smallest index with negative reduced cost
            let Some(col) = (0..allowed).find(|&j| self.t[m][j] < -EPS) else {
                return Ok(());
            };
            let mut best: Option<(usize, f64)> = None;
            for i in 0..m {
                let a = self.t[i][col];
                if a > EPS {
                    let ratio = self.t[i][self.cols] / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - EPS
                                || (ratio <= br + EPS && self.basis[i] < self.basis[bi])
                            {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((row, _)) = best else {
                return Err(LpError::Unbounded);
            };
            self.pivot(row, col);
        }
        Err(LpError::IterationLimit)
    }

    fn solve(mut self, lp: &LinearProgram) -> Result<LpSolution, LpError> {
        let m = self.m();
        if self.artificial_start < self.cols {
            let mut phase1 = vec![0.0; self.cols];
            for c in phase1.iter_mut().skip(self.artificial_start) {
                *c = 1.0;
            }
            self.set_objective(&phase1);
            self.run(self.cols)?;
            let infeas = -self.t[m][self.cols];
            let scale = 1.0 + lp.constraints.iter().map(|c| c.rhs.abs()).fold(0.0, f64::max);
            if infeas > 1e-9 * scale {
                return Err(LpError::Infeasible);
            }
            // drive remaining artificials out of the basis
            for i in 0..m {
                if self.basis[i] >= self.artificial_start {
                    if let Some(j) =
                        (0..self.artificial_start).find(|&j| self.t[i][j].abs() > EPS)
                    {
                        self.pivot(i, j);
                    }
                }
            }
        }
        let mut cost = vec![0.0; self.cols];
        cost[..self.n].copy_from_slice(&lp.objective);
        self.set_objective(&cost);
        self.run(self.artificial_start)?;
        let mut x = vec![0.0; self.n];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.n {
                x[b] = self.t[i][self.cols].max(0.0);
            }
        }
        let objective = x.iter().zip(&lp.objective).map(|(a, b)| a * b).sum();
        Ok(LpSolution { x, objective })
    }
}

/// Optimal transport cost between two discrete distributions under `cost`.
pub fn transport_cost(
    from: &[f64],
    to: &[f64],
    cost: impl Fn(usize, usize) -> f64,
) -> Result<f64, LpError> {
    let (n, m) = (from.len(), to.len());
    let mut lp = LinearProgram::new(
        (0..n)
            .flat_map(|i| (0..m).map(move |j| (i, j)))
            .map(|(i, j)| cost(i, j))
            .collect(),
    );
    for i in 0..n {
        let mut row = vec![0.0; n * m];
        row[i * m..(i + 1) * m].iter_mut().for_each(|v| *v = 1.0);
        lp.add(row, Relation::Eq, from[i]);
    }
    // the last column constraint is implied by the others
    for j in 0..m.saturating_sub(1) {
        let mut row = vec![0.0; n * m];
        for i in 0..n {
            row[i * m + j] = 1.0;
        }
        lp.add(row, Relation::Eq, to[j]);
    }
    Ok(lp.minimize()?.objective)
}
