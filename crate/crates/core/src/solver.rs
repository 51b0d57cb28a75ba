//! Product with the specification automaton and robust value iteration.
//!
//! The inner problem of every Bellman update is the transport LP
//!
//! ```text
//! min / max  sum V(q'') pi(q', q'')
//! s.t.       sum_{q''} pi(q', q'') = g(q'),  lower(q') <= g(q') <= upper(q'),
//!            sum g = 1,  sum c(q', q'') pi(q', q'') <= theta,  pi >= 0
//! ```
//!
//! [`inner_expectation`] solves it exactly through its Lagrangian dual, which
//! is a concave piecewise-linear function of the multiplier; every
//! evaluation is a sort-based interval optimization. [`inner_expectation_lp`]
//! solves the same LP with the bundled simplex and serves as a reference.
//!
//! A zero budget admits no transport at all, so the admissible set is then
//! exactly the interval set even between touching cells.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::RmdpAbstraction;
use crate::geometry::{LabelMap, Partition, StateId};
use crate::lp::{LinearProgram, LpError, Relation};
use crate::ltlf::Dfa;

/// Slack for the interval row sums.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Minimal gain for a value update to count as an improvement.
pub const IMPROVEMENT_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("interval row is infeasible: lower sum {lower}, upper sum {upper}")]
    InfeasibleRow { lower: f64, upper: f64 },
    #[error("inconsistent inner problem: {0}")]
    Shape(String),
    #[error("automaton propositions {dfa:?} differ from the labelling's {labels:?}")]
    PropositionMismatch {
        dfa: Vec<String>,
        labels: Vec<String>,
    },
    #[error("tolerance must be positive")]
    Tolerance,
    #[error("strategy does not fit the product: {0}")]
    Strategy(String),
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Adversarial nature: minimize the expectation.
    Worst,
    /// Cooperative nature: maximize the expectation.
    Best,
}

/// One inner problem: interval marginals over sources `S`, costs to the
/// destinations `D` (row-major `|S| x |D|`) and a transport budget.
#[derive(Debug, Clone, Copy)]
pub struct InnerProblem<'a> {
    pub lower: &'a [f64],
    pub upper: &'a [f64],
    pub cost: &'a [f64],
    /// Position of each source within the destinations.
    pub self_index: &'a [usize],
    pub theta: f64,
}

impl InnerProblem<'_> {
    fn sources(&self) -> usize {
        self.lower.len()
    }

    fn check(&self, values: &[f64]) -> Result<(), SolverError> {
        let s = self.sources();
        let d = values.len();
        if self.upper.len() != s || self.self_index.len() != s || self.cost.len() != s * d {
            return Err(SolverError::Shape(format!(
                "{s} sources, {d} destinations, {} costs",
                self.cost.len()
            )));
        }
        if self.self_index.iter().any(|&j| j >= d) {
            return Err(SolverError::Shape("source outside destinations".into()));
        }
        if !(self.theta >= 0.0) {
            return Err(SolverError::Shape("negative budget".into()));
        }
        let lo: f64 = self.lower.iter().sum();
        let hi: f64 = self.upper.iter().sum();
        if lo > 1.0 + FEASIBILITY_TOL || hi < 1.0 - FEASIBILITY_TOL {
            return Err(SolverError::InfeasibleRow { lower: lo, upper: hi });
        }
        Ok(())
    }
}

/// Optimal value with a witness: the nominal marginal `gamma_hat` over the
/// sources, the coupling as `(source, destination, mass)` and the realized
/// marginal `gamma` over the destinations.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerSolution {
    pub value: f64,
    pub gamma_hat: Vec<f64>,
    pub coupling: Vec<(usize, usize, f64)>,
    pub gamma: Vec<f64>,
}

impl InnerSolution {
    fn from_coupling(s: usize, d: usize, coupling: Vec<(usize, usize, f64)>, values: &[f64]) -> Self {
        let mut gamma_hat = vec![0.0; s];
        let mut gamma = vec![0.0; d];
        let mut value = 0.0;
        for &(i, j, m) in &coupling {
            gamma_hat[i] += m;
            gamma[j] += m;
            value += m * values[j];
        }
        InnerSolution {
            value,
            gamma_hat,
            coupling,
            gamma,
        }
    }

    /// Transport cost of the coupling.
    pub fn transport_cost(&self, p: &InnerProblem, d: usize) -> f64 {
        self.coupling.iter().map(|&(i, j, m)| m * p.cost[i * d + j]).sum()
    }
}

/// Greedy interval optimization: raise the lower bounds in the order of
/// `order` until the total mass is one.
fn greedy_fill(lower: &[f64], upper: &[f64], order: &[usize]) -> Vec<f64> {
    let mut g = lower.to_vec();
    let mut rem = 1.0 - lower.iter().sum::<f64>();
    for &i in order {
        if rem <= 0.0 {
            break;
        }
        let add = (upper[i] - lower[i]).min(rem).max(0.0);
        g[i] += add;
        rem -= add;
    }
    g
}

/// Expectation of `values` under the extreme distribution of an interval
/// set: the classical sort-and-fill solution of the zero-budget problem.
pub fn greedy_interval_expectation(
    lower: &[f64],
    upper: &[f64],
    values: &[f64],
    dir: Direction,
) -> Result<f64, SolverError> {
    let s = lower.len();
    if upper.len() != s || values.len() != s {
        return Err(SolverError::Shape("bounds and values differ in length".into()));
    }
    let index: Vec<usize> = (0..s).collect();
    let cost = vec![0.0; s * s];
    let p = InnerProblem {
        lower,
        upper,
        cost: &cost,
        self_index: &index,
        theta: 0.0,
    };
    Ok(inner_expectation(&p, values, dir)?.value)
}

/// A candidate minimizer of the Lagrangian: one destination per source.
#[derive(Debug, Clone)]
struct Candidate {
    gamma_hat: Vec<f64>,
    target: Vec<usize>,
    obj: f64,
    cost: f64,
}

impl Candidate {
    fn line(&self, lambda: f64) -> f64 {
        self.obj + lambda * self.cost
    }
}

/// Minimizer of `sum g(q') min_j (v_j + lambda c(q', j))` over the interval
/// set. `right` breaks ties toward cheaper transport (the right derivative
/// in `lambda`), otherwise toward costlier transport.
fn lagrangian_oracle(p: &InnerProblem, v: &[f64], lambda: f64, right: bool) -> Candidate {
    let s = p.sources();
    let d = v.len();
    let sign = if right { 1.0 } else { -1.0 };
    let mut target = vec![0; s];
    let mut w = vec![0.0; s];
    let mut slope = vec![0.0; s];
    for i in 0..s {
        let row = &p.cost[i * d..(i + 1) * d];
        let mut best = p.self_index[i];
        let mut key = (v[best] + lambda * row[best], sign * row[best]);
        for j in 0..d {
            let k = (v[j] + lambda * row[j], sign * row[j]);
            if k.0 < key.0 || (k.0 == key.0 && k.1 < key.1) {
                key = k;
                best = j;
            }
        }
        target[i] = best;
        w[i] = key.0;
        slope[i] = row[best];
    }
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&a, &b| {
        w[a].total_cmp(&w[b])
            .then((sign * slope[a]).total_cmp(&(sign * slope[b])))
            .then(a.cmp(&b))
    });
    let gamma_hat = greedy_fill(p.lower, p.upper, &order);
    let obj = (0..s).map(|i| gamma_hat[i] * v[target[i]]).sum();
    let cost = (0..s).map(|i| gamma_hat[i] * slope[i]).sum();
    Candidate {
        gamma_hat,
        target,
        obj,
        cost,
    }
}

fn candidate_solution(c: &Candidate, weight: f64, out: &mut Vec<(usize, usize, f64)>) {
    for (i, (&g, &t)) in c.gamma_hat.iter().zip(&c.target).enumerate() {
        if g * weight > 0.0 {
            out.push((i, t, g * weight));
        }
    }
}

/// Minimization through the Lagrangian dual.
fn minimize_parametric(p: &InnerProblem, v: &[f64]) -> InnerSolution {
    let s = p.sources();
    let d = v.len();
    if p.theta == 0.0 {
        let mut order: Vec<usize> = (0..s).collect();
        order.sort_by(|&a, &b| v[p.self_index[a]].total_cmp(&v[p.self_index[b]]).then(a.cmp(&b)));
        let g = greedy_fill(p.lower, p.upper, &order);
        let coupling = (0..s)
            .filter(|&i| g[i] > 0.0)
            .map(|i| (i, p.self_index[i], g[i]))
            .collect();
        return InnerSolution::from_coupling(s, d, coupling, v);
    }
    let mut coupling = Vec::new();
    let mut lo = lagrangian_oracle(p, v, 0.0, true);
    if lo.cost <= p.theta {
        candidate_solution(&lo, 1.0, &mut coupling);
        return InnerSolution::from_coupling(s, d, coupling, v);
    }
    let vmax = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let vmin = v.iter().copied().fold(f64::INFINITY, f64::min);
    let cmin = p
        .cost
        .iter()
        .copied()
        .filter(|c| *c > 0.0)
        .fold(f64::INFINITY, f64::min);
    // beyond this multiplier no positive-cost move pays off
    let lambda_max = (vmax - vmin) / cmin + 1.0;
    let mut hi = lagrangian_oracle(p, v, lambda_max, false);
    for _ in 0..200 {
        let denom = lo.cost - hi.cost;
        if denom <= 0.0 {
            break;
        }
        let lambda = (hi.obj - lo.obj) / denom;
        let right = lagrangian_oracle(p, v, lambda, true);
        let g = right.line(lambda);
        let scale = 1.0 + lo.line(lambda).abs();
        if g >= lo.line(lambda) - 1e-13 * scale {
            // both lines are tangent at lambda
            break;
        }
        if right.cost > p.theta {
            lo = right;
            continue;
        }
        let left = lagrangian_oracle(p, v, lambda, false);
        if left.cost < p.theta {
            hi = left;
        } else {
            lo = left;
            hi = right;
            break;
        }
    }
    let alpha = if lo.cost > hi.cost {
        ((p.theta - hi.cost) / (lo.cost - hi.cost)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    candidate_solution(&lo, alpha, &mut coupling);
    candidate_solution(&hi, 1.0 - alpha, &mut coupling);
    InnerSolution::from_coupling(s, d, coupling, v)
}

/// Exact optimum of the inner transport problem with a witness.
pub fn inner_expectation(
    p: &InnerProblem,
    values: &[f64],
    dir: Direction,
) -> Result<InnerSolution, SolverError> {
    p.check(values)?;
    Ok(match dir {
        Direction::Worst => minimize_parametric(p, values),
        Direction::Best => {
            let neg: Vec<f64> = values.iter().map(|v| -v).collect();
            let sol = minimize_parametric(p, &neg);
            InnerSolution::from_coupling(p.sources(), values.len(), sol.coupling, values)
        }
    })
}

pub fn inner_worst_expectation(p: &InnerProblem, values: &[f64]) -> Result<InnerSolution, SolverError> {
    inner_expectation(p, values, Direction::Worst)
}

pub fn inner_best_expectation(p: &InnerProblem, values: &[f64]) -> Result<InnerSolution, SolverError> {
    inner_expectation(p, values, Direction::Best)
}

/// The inner problem as an explicit LP over the coupling, solved by simplex.
pub fn inner_expectation_lp(
    p: &InnerProblem,
    values: &[f64],
    dir: Direction,
) -> Result<InnerSolution, SolverError> {
    p.check(values)?;
    let s = p.sources();
    let d = values.len();
    let vars: Vec<(usize, usize)> = if p.theta == 0.0 {
        (0..s).map(|i| (i, p.self_index[i])).collect()
    } else {
        (0..s).flat_map(|i| (0..d).map(move |j| (i, j))).collect()
    };
    let sign = match dir {
        Direction::Worst => 1.0,
        Direction::Best => -1.0,
    };
    let mut lp = LinearProgram::new(vars.iter().map(|&(_, j)| sign * values[j]).collect());
    for i in 0..s {
        let row: Vec<f64> = vars.iter().map(|&(a, _)| if a == i { 1.0 } else { 0.0 }).collect();
        lp.add(row.clone(), Relation::Ge, p.lower[i]);
        lp.add(row, Relation::Le, p.upper[i]);
    }
    lp.add(vec![1.0; vars.len()], Relation::Eq, 1.0);
    if p.theta > 0.0 {
        lp.add(
            vars.iter().map(|&(i, j)| p.cost[i * d + j]).collect(),
            Relation::Le,
            p.theta,
        );
    }
    let sol = lp.minimize()?;
    let coupling = vars
        .iter()
        .zip(&sol.x)
        .filter(|(_, &m)| m > 0.0)
        .map(|(&(i, j), &m)| (i, j, m))
        .collect();
    Ok(InnerSolution::from_coupling(s, d, coupling, values))
}

/// Which inner solver value iteration uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InnerMethod {
    #[default]
    Parametric,
    Simplex,
}

fn solve_inner(
    method: InnerMethod,
    p: &InnerProblem,
    values: &[f64],
    dir: Direction,
) -> Result<f64, SolverError> {
    Ok(match method {
        InnerMethod::Parametric => inner_expectation(p, values, dir)?.value,
        InnerMethod::Simplex => inner_expectation_lp(p, values, dir)?.value,
    })
}

/// Abstract row in solver-ready form.
#[derive(Debug, Clone, PartialEq)]
struct BaseRow {
    lower: Vec<f64>,
    upper: Vec<f64>,
    dests: Vec<StateId>,
    cost: Vec<f64>,
    self_index: Vec<usize>,
    theta: f64,
}

impl BaseRow {
    fn problem(&self) -> InnerProblem<'_> {
        InnerProblem {
            lower: &self.lower,
            upper: &self.upper,
            cost: &self.cost,
            self_index: &self.self_index,
            theta: self.theta,
        }
    }
}

/// Synchronous product of the abstraction with the automaton. Product
/// state `(q, z)` has index `q * |Z| + z`.
#[derive(Debug, Clone)]
pub struct ProductRmdp {
    rmdp: RmdpAbstraction,
    dfa: Dfa,
    labels: Vec<u64>,
    successor_z: Vec<usize>,
    rows: Vec<BaseRow>,
}

/// Builds the product; fails when the automaton and the labelling use
/// different proposition lists.
pub fn build_product(rmdp: RmdpAbstraction, dfa: Dfa, labels: &LabelMap) -> Result<ProductRmdp, SolverError> {
    if dfa.propositions() != labels.propositions.as_slice() {
        return Err(SolverError::PropositionMismatch {
            dfa: dfa.propositions().to_vec(),
            labels: labels.propositions.clone(),
        });
    }
    let nq = rmdp.num_states();
    if labels.cell_labels.len() + 1 != nq {
        return Err(SolverError::Shape("labelling does not match the partition".into()));
    }
    let state_labels: Vec<u64> = (0..nq).map(|q| labels.label(q)).collect();
    let successor_z = (0..dfa.num_states())
        .flat_map(|z| state_labels.iter().map(move |&l| (z, l)))
        .map(|(z, l)| dfa.next(z, l))
        .collect();
    let na = rmdp.num_actions();
    let rows = (0..nq * na)
        .into_par_iter()
        .map(|i| base_row(&rmdp, i / na, i % na))
        .collect();
    Ok(ProductRmdp {
        rmdp,
        dfa,
        labels: state_labels,
        successor_z,
        rows,
    })
}

fn base_row(rmdp: &RmdpAbstraction, q: StateId, a: usize) -> BaseRow {
    let row = rmdp.imdp.row(q, a);
    let dests = rmdp.restricted_support(q, a).to_vec();
    let entries: Vec<_> = row.entries.iter().filter(|e| e.upper > 0.0).collect();
    let theta = rmdp.theta(q, a);
    let mut cost = Vec::with_capacity(entries.len() * dests.len());
    for e in &entries {
        for &d in &dests {
            cost.push(if theta > 0.0 { rmdp.cost(e.dest, d) } else { 0.0 });
        }
    }
    BaseRow {
        lower: entries.iter().map(|e| e.lower).collect(),
        upper: entries.iter().map(|e| e.upper).collect(),
        self_index: entries
            .iter()
            .map(|e| dests.binary_search(&e.dest).expect("restricted support covers the row"))
            .collect(),
        dests,
        cost,
        theta,
    }
}

impl ProductRmdp {
    pub fn num_states(&self) -> usize {
        self.rmdp.num_states() * self.dfa.num_states()
    }

    pub fn num_actions(&self) -> usize {
        self.rmdp.num_actions()
    }

    pub fn num_dfa_states(&self) -> usize {
        self.dfa.num_states()
    }

    pub fn rmdp(&self) -> &RmdpAbstraction {
        &self.rmdp
    }

    pub fn dfa(&self) -> &Dfa {
        &self.dfa
    }

    pub fn partition(&self) -> &Partition {
        &self.rmdp.partition
    }

    pub fn index(&self, q: StateId, z: usize) -> usize {
        q * self.dfa.num_states() + z
    }

    pub fn state(&self, i: usize) -> (StateId, usize) {
        (i / self.dfa.num_states(), i % self.dfa.num_states())
    }

    pub fn label(&self, q: StateId) -> u64 {
        self.labels[q]
    }

    /// Automaton state after moving to `q2` from memory `z`.
    pub fn successor_z(&self, z: usize, q2: StateId) -> usize {
        self.successor_z[z * self.rmdp.num_states() + q2]
    }

    fn is_unsafe(&self, q: StateId) -> bool {
        q + 1 == self.rmdp.num_states()
    }

    /// Target states: a safe cell with accepting memory.
    pub fn is_accepting(&self, i: usize) -> bool {
        let (q, z) = self.state(i);
        !self.is_unsafe(q) && self.dfa.is_accepting(z)
    }

    /// Product state in which a run starting in cell `q` begins.
    pub fn initial_state(&self, q: StateId) -> usize {
        self.index(q, self.successor_z(self.dfa.initial(), q))
    }

    /// Successor product states of `(q, z)` under action `a`, in the order of
    /// the row's destinations.
    pub fn row_targets(&self, i: usize, a: usize) -> Vec<usize> {
        let (q, z) = self.state(i);
        self.rows[q * self.num_actions() + a]
            .dests
            .iter()
            .map(|&d| self.index(d, self.successor_z(z, d)))
            .collect()
    }

    /// Robust expectation of `values` after taking `a` in product state `i`.
    pub fn backup(
        &self,
        i: usize,
        a: usize,
        values: &[f64],
        dir: Direction,
        method: InnerMethod,
    ) -> Result<f64, SolverError> {
        let (q, _) = self.state(i);
        let row = &self.rows[q * self.num_actions() + a];
        let v: Vec<f64> = self.row_targets(i, a).into_iter().map(|t| values[t]).collect();
        solve_inner(method, &row.problem(), &v, dir)
    }

    fn initial_values(&self) -> Vec<f64> {
        (0..self.num_states())
            .map(|i| if self.is_accepting(i) { 1.0 } else { 0.0 })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub inner: InnerMethod,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-6,
            max_iter: 10_000,
            inner: InnerMethod::Parametric,
        }
    }
}

/// Memoryful strategy on the abstraction: one action per product state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Strategy {
    pub num_dfa_states: usize,
    pub actions: Vec<usize>,
}

impl Strategy {
    pub fn action(&self, q: StateId, z: usize) -> usize {
        self.actions[q * self.num_dfa_states + z]
    }
}

/// Outcome of one fixed-point computation.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationResult {
    pub values: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    /// Sup-norm change of every sweep.
    pub residuals: Vec<f64>,
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Pessimistic robust value iteration for maximal reachability of the
/// accepting product states, avoiding the unsafe state.
///
/// The strategy keeps, per state, the action of the last sweep in which the
/// state's value strictly improved, with ties going to the lowest action.
/// Re-choosing among tied actions in later sweeps could select an action
/// that merely loops without progress.
pub fn robust_value_iteration(
    prod: &ProductRmdp,
    opts: &SolverOptions,
) -> Result<(IterationResult, Strategy), SolverError> {
    if !(opts.tol > 0.0) {
        return Err(SolverError::Tolerance);
    }
    let n = prod.num_states();
    let na = prod.num_actions();
    let mut values = prod.initial_values();
    let mut actions = vec![0usize; n];
    let mut residuals = Vec::new();
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let updates: Vec<(f64, usize)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let (q, _) = prod.state(i);
                if prod.is_accepting(i) {
                    return Ok((1.0, actions[i]));
                }
                if prod.is_unsafe(q) {
                    return Ok((0.0, actions[i]));
                }
                let mut best = f64::NEG_INFINITY;
                let mut arg = 0;
                for a in 0..na {
                    let v = prod.backup(i, a, &values, Direction::Worst, opts.inner)?;
                    if v > best + IMPROVEMENT_TOL {
                        best = v;
                        arg = a;
                    }
                }
                let best = best.clamp(0.0, 1.0);
                let act = if best > values[i] + IMPROVEMENT_TOL { arg } else { actions[i] };
                Ok((best.max(values[i]), act))
            })
            .collect::<Result<_, SolverError>>()?;
        let next: Vec<f64> = updates.iter().map(|u| u.0).collect();
        actions = updates.iter().map(|u| u.1).collect();
        let r = sup_diff(&next, &values);
        values = next;
        residuals.push(r);
        if r < opts.tol {
            converged = true;
            break;
        }
    }
    let residual = residuals.last().copied().unwrap_or(0.0);
    Ok((
        IterationResult {
            values,
            iterations: residuals.len(),
            residual,
            converged,
            residuals,
        },
        Strategy {
            num_dfa_states: prod.num_dfa_states(),
            actions,
        },
    ))
}

/// Robust satisfaction probabilities of a fixed strategy, against (`Worst`)
/// or with (`Best`) nature.
pub fn evaluate_strategy(
    prod: &ProductRmdp,
    strategy: &Strategy,
    dir: Direction,
    opts: &SolverOptions,
) -> Result<IterationResult, SolverError> {
    if !(opts.tol > 0.0) {
        return Err(SolverError::Tolerance);
    }
    let n = prod.num_states();
    if strategy.actions.len() != n || strategy.num_dfa_states != prod.num_dfa_states() {
        return Err(SolverError::Strategy(format!(
            "{} actions for {n} product states",
            strategy.actions.len()
        )));
    }
    if let Some(&a) = strategy.actions.iter().find(|&&a| a >= prod.num_actions()) {
        return Err(SolverError::Strategy(format!("unknown action {a}")));
    }
    let mut values = prod.initial_values();
    let mut residuals = Vec::new();
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let next: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let (q, _) = prod.state(i);
                if prod.is_accepting(i) {
                    Ok(1.0)
                } else if prod.is_unsafe(q) {
                    Ok(0.0)
                } else {
                    let v = prod.backup(i, strategy.actions[i], &values, dir, opts.inner)?;
                    // iterates increase from below; keep rounding from undoing that
                    Ok(v.clamp(0.0, 1.0).max(values[i]))
                }
            })
            .collect::<Result<_, SolverError>>()?;
        let r = sup_diff(&next, &values);
        values = next;
        residuals.push(r);
        if r < opts.tol {
            converged = true;
            break;
        }
    }
    Ok(IterationResult {
        iterations: residuals.len(),
        residual: residuals.last().copied().unwrap_or(0.0),
        converged,
        residuals,
        values,
    })
}

/// Certified bounds of the synthesized strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueBounds {
    pub p_lower: Vec<f64>,
    pub p_upper: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub bounds: ValueBounds,
    pub strategy: Strategy,
    /// Optimal pessimistic values from value iteration.
    pub optimal_lower: Vec<f64>,
}

/// Synthesizes the robust strategy and evaluates its lower and upper
/// satisfaction probabilities.
pub fn solve(prod: &ProductRmdp, opts: &SolverOptions) -> Result<Solution, SolverError> {
    let (vi, strategy) = robust_value_iteration(prod, opts)?;
    let lower = evaluate_strategy(prod, &strategy, Direction::Worst, opts)?;
    let upper = evaluate_strategy(prod, &strategy, Direction::Best, opts)?;
    let p_upper: Vec<f64> = upper
        .values
        .iter()
        .zip(&lower.values)
        .map(|(u, l)| u.max(*l))
        .collect();
    Ok(Solution {
        bounds: ValueBounds {
            p_lower: lower.values,
            p_upper,
            iterations: vi.iterations + lower.iterations + upper.iterations,
            residual: vi.residual.max(lower.residual).max(upper.residual),
            converged: vi.converged && lower.converged && upper.converged,
        },
        strategy,
        optimal_lower: vi.values,
    })
}

/// Mean of `p_upper - p_lower` over the safe cells, each taken at the
/// automaton state reached by reading the cell's own label.
pub fn e_avg(prod: &ProductRmdp, bounds: &ValueBounds) -> f64 {
    let cells = prod.partition().num_cells();
    let total: f64 = (0..cells)
        .map(|q| {
            let i = prod.initial_state(q);
            bounds.p_upper[i] - bounds.p_lower[i]
        })
        .sum();
    total / cells as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateBound {
    pub q: StateId,
    pub z: usize,
    pub p_lower: f64,
    pub p_upper: f64,
    pub action: usize,
}

/// JSON form of the bounds and the strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsDoc {
    pub num_cells: usize,
    pub num_dfa_states: usize,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    pub states: Vec<StateBound>,
}

impl BoundsDoc {
    pub fn new(prod: &ProductRmdp, sol: &Solution) -> Self {
        let b = &sol.bounds;
        BoundsDoc {
            num_cells: prod.partition().num_cells(),
            num_dfa_states: prod.num_dfa_states(),
            iterations: b.iterations,
            residual: b.residual,
            converged: b.converged,
            states: (0..prod.num_states())
                .map(|i| {
                    let (q, z) = prod.state(i);
                    StateBound {
                        q,
                        z,
                        p_lower: b.p_lower[i],
                        p_upper: b.p_upper[i],
                        action: sol.strategy.actions[i],
                    }
                })
                .collect(),
        }
    }

    pub fn bounds(&self) -> ValueBounds {
        ValueBounds {
            p_lower: self.states.iter().map(|s| s.p_lower).collect(),
            p_upper: self.states.iter().map(|s| s.p_upper).collect(),
            iterations: self.iterations,
            residual: self.residual,
            converged: self.converged,
        }
    }

    pub fn strategy(&self) -> Strategy {
        Strategy {
            num_dfa_states: self.num_dfa_states,
            actions: self.states.iter().map(|s| s.action).collect(),
        }
    }

    /// Checks that the states are listed in product index order.
    pub fn validate(&self) -> Result<(), SolverError> {
        let nz = self.num_dfa_states;
        let ok = nz > 0
            && self.states.len() == (self.num_cells + 1) * nz
            && self
                .states
                .iter()
                .enumerate()
                .all(|(i, s)| s.q == i / nz && s.z == i % nz);
        if ok {
            Ok(())
        } else {
            Err(SolverError::Shape("bounds document out of order".into()))
        }
    }
}

/// Per-cell CSV `cell_index, x_center..., p_lower, p_upper, action` at the
/// automaton state reached by reading the cell's label.
pub fn write_cell_csv<W: std::io::Write>(
    writer: W,
    prod: &ProductRmdp,
    bounds: &ValueBounds,
    strategy: &Strategy,
) -> Result<(), csv::Error> {
    let p = prod.partition();
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["cell_index".to_string()];
    header.extend((0..p.dim()).map(|i| format!("x_center_{i}")));
    header.extend(["p_lower", "p_upper", "action"].map(String::from));
    w.write_record(&header)?;
    for (q, cell) in p.cells().iter().enumerate() {
        let i = prod.initial_state(q);
        let mut rec = vec![q.to_string()];
        rec.extend(cell.center().iter().map(|c| c.to_string()));
        rec.push(bounds.p_lower[i].to_string());
        rec.push(bounds.p_upper[i].to_string());
        rec.push(strategy.actions[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_dest(lower: &[f64], upper: &[f64], theta: f64, c: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<usize>, f64) {
        (
            lower.to_vec(),
            upper.to_vec(),
            vec![0.0, c, c, 0.0],
            vec![0, 1],
            theta,
        )
    }

    #[test]
    fn zero_budget_examples() {
        let (lo, hi, c, idx, th) = two_dest(&[0.2, 0.2], &[0.8, 0.8], 0.0, 1.0);
        let p = InnerProblem {
            lower: &lo,
            upper: &hi,
            cost: &c,
            self_index: &idx,
            theta: th,
        };
        let v = [1.0, 0.0];
        assert!((inner_worst_expectation(&p, &v).unwrap().value - 0.2).abs() < 1e-15);
        assert!((inner_best_expectation(&p, &v).unwrap().value - 0.8).abs() < 1e-15);
        assert!((greedy_interval_expectation(&lo, &hi, &v, Direction::Worst).unwrap() - 0.2).abs() < 1e-15);
        let lp = inner_expectation_lp(&p, &v, Direction::Worst).unwrap();
        assert!((lp.value - 0.2).abs() < 1e-12);
    }

    #[test]
    fn budget_examples() {
        let (lo, hi, c, idx, th) = two_dest(&[1.0, 0.0], &[1.0, 0.0], 0.3, 1.0);
        let p = InnerProblem {
            lower: &lo,
            upper: &hi,
            cost: &c,
            self_index: &idx,
            theta: th,
        };
        let w = inner_worst_expectation(&p, &[1.0, 0.0]).unwrap();
        assert!((w.value - 0.7).abs() < 1e-12);
        assert!((w.transport_cost(&p, 2) - 0.3).abs() < 1e-12);
        let b = inner_best_expectation(&p, &[0.0, 1.0]).unwrap();
        assert!((b.value - 0.3).abs() < 1e-12);
        for dir in [Direction::Worst, Direction::Best] {
            let v = inner_expectation(&p, &[0.4, 0.4], dir).unwrap();
            assert!((v.value - 0.4).abs() < 1e-15);
            let lp = inner_expectation_lp(&p, &[1.0, 0.0], dir).unwrap();
            let fast = inner_expectation(&p, &[1.0, 0.0], dir).unwrap();
            assert!((lp.value - fast.value).abs() < 1e-9);
        }
    }

    #[test]
    fn greedy_degenerate_cases() {
        let g = greedy_interval_expectation(&[0.3, 0.7], &[0.3, 0.7], &[2.0, 1.0], Direction::Best).unwrap();
        assert!((g - 1.3).abs() < 1e-15);
        assert_eq!(greedy_interval_expectation(&[1.0], &[1.0], &[0.25], Direction::Worst).unwrap(), 0.25);
        assert!(matches!(
            greedy_interval_expectation(&[0.0, 0.0], &[0.3, 0.3], &[1.0, 0.0], Direction::Worst),
            Err(SolverError::InfeasibleRow { .. })
        ));
    }
}
