//! Closed-loop simulation of a synthesized strategy.
//!
//! The [`Controller`] refines the abstract strategy: it locates the current
//! state on the grid and keeps the automaton state reached by the labels
//! seen so far as memory. [`monte_carlo`] estimates the satisfaction
//! probability from one cell and compares it with the certified bounds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};
use thiserror::Error;

use crate::dynamics::{step, DynamicsError, GroundTruthNoise, SystemModel};
use crate::geometry::{GeometryError, LabelMap, Partition, Rect, StateId};
use crate::ltlf::Dfa;
use crate::solver::Strategy;

pub const DEFAULT_HORIZON: usize = 200;
/// Confidence level of the binomial interval used for containment.
pub const CONFIDENCE: f64 = 0.99;

#[derive(Debug, Error)]
pub enum ValidationError {
    #[error("the state left the safe set; no action is defined")]
    TerminalUnsafe,
    #[error("controller queried before start")]
    NotStarted,
    #[error("initial state {0:?} lies outside the safe set")]
    InitialOutside(Vec<f64>),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Switching controller `x -> strategy(cell(x), z)` with automaton memory.
#[derive(Debug, Clone)]
pub struct Controller<'a> {
    partition: &'a Partition,
    labels: &'a LabelMap,
    dfa: &'a Dfa,
    strategy: &'a Strategy,
    z: Option<usize>,
    cell: StateId,
}

impl<'a> Controller<'a> {
    pub fn new(
        partition: &'a Partition,
        labels: &'a LabelMap,
        dfa: &'a Dfa,
        strategy: &'a Strategy,
    ) -> Result<Self, ValidationError> {
        if strategy.num_dfa_states != dfa.num_states()
            || strategy.actions.len() != partition.num_states() * dfa.num_states()
        {
            return Err(ValidationError::Argument(
                "strategy does not match the partition and automaton".into(),
            ));
        }
        Ok(Controller {
            partition,
            labels,
            dfa,
            strategy,
            z: None,
            cell: partition.unsafe_id(),
        })
    }

    /// Resets the memory to the automaton state after reading `L(x0)`.
    pub fn start(&mut self, x0: &[f64]) -> Result<usize, ValidationError> {
        let q = self.partition.locate(x0)?;
        if self.partition.is_unsafe(q) {
            return Err(ValidationError::InitialOutside(x0.to_vec()));
        }
        let z = self.dfa.next(self.dfa.initial(), self.labels.label(q));
        self.z = Some(z);
        self.cell = q;
        Ok(z)
    }

    /// Records the next observed state and advances the memory.
    pub fn observe(&mut self, x: &[f64]) -> Result<usize, ValidationError> {
        let z = self.z.ok_or(ValidationError::NotStarted)?;
        let q = self.partition.locate(x)?;
        let z = self.dfa.next(z, self.labels.label(q));
        self.z = Some(z);
        self.cell = q;
        Ok(z)
    }

    /// Action for the current state.
    pub fn action(&self) -> Result<usize, ValidationError> {
        let z = self.z.ok_or(ValidationError::NotStarted)?;
        if self.partition.is_unsafe(self.cell) {
            return Err(ValidationError::TerminalUnsafe);
        }
        Ok(self.strategy.action(self.cell, z))
    }

    pub fn memory(&self) -> Option<usize> {
        self.z
    }

    pub fn cell(&self) -> StateId {
        self.cell
    }

    pub fn accepting(&self) -> bool {
        self.z.is_some_and(|z| self.dfa.is_accepting(z)) && !self.partition.is_unsafe(self.cell)
    }
}

/// One closed-loop run. `states[k]` is visited at step `k`; `actions[k]`
/// is applied in `states[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub cells: Vec<StateId>,
    pub memory: Vec<usize>,
    pub actions: Vec<usize>,
    pub satisfied: bool,
    pub exited: bool,
}

impl Trajectory {
    /// Neither accepted nor exited within the horizon.
    pub fn live(&self) -> bool {
        !self.satisfied && !self.exited
    }
}

/// Simulates until acceptance, exit from the safe set, or `horizon` steps.
pub fn simulate_trajectory<R: Rng + ?Sized>(
    m: &dyn SystemModel,
    ctrl: &mut Controller,
    noise: &GroundTruthNoise,
    x0: &[f64],
    horizon: usize,
    rng: &mut R,
) -> Result<Trajectory, ValidationError> {
    if horizon == 0 {
        return Err(ValidationError::Argument("horizon must be at least 1".into()));
    }
    let z = ctrl.start(x0)?;
    let mut t = Trajectory {
        states: vec![x0.to_vec()],
        cells: vec![ctrl.cell()],
        memory: vec![z],
        actions: Vec::new(),
        satisfied: ctrl.accepting(),
        exited: false,
    };
    let mut x = x0.to_vec();
    for _ in 0..horizon {
        if t.satisfied {
            break;
        }
        let a = ctrl.action()?;
        let w = noise.sample(rng);
        x = step(m, &x, a, &w)?;
        let z = ctrl.observe(&x)?;
        t.actions.push(a);
        t.states.push(x.clone());
        t.cells.push(ctrl.cell());
        t.memory.push(z);
        if ctrl.partition.is_unsafe(ctrl.cell()) {
            t.exited = true;
            break;
        }
        t.satisfied = ctrl.accepting();
    }
    Ok(t)
}

/// Writes `k, x_0.., action, region, z` rows; the last state has no action.
pub fn write_trajectory_csv<W: std::io::Write>(writer: W, t: &Trajectory) -> Result<(), ValidationError> {
    let mut w = csv::Writer::from_writer(writer);
    let n = t.states.first().map_or(0, Vec::len);
    let mut header = vec!["k".to_string()];
    header.extend((0..n).map(|i| format!("x_{i}")));
    header.extend(["action", "region", "z"].map(String::from));
    w.write_record(&header)?;
    for k in 0..t.states.len() {
        let mut rec = vec![k.to_string()];
        rec.extend(t.states[k].iter().map(|v| v.to_string()));
        rec.push(t.actions.get(k).map_or(String::new(), |a| a.to_string()));
        rec.push(t.cells[k].to_string());
        rec.push(t.memory[k].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Two-sided exact (Clopper-Pearson) interval for a binomial proportion.
pub fn clopper_pearson(successes: usize, trials: usize, confidence: f64) -> (f64, f64) {
    assert!(trials > 0 && successes <= trials);
    let alpha = 1.0 - confidence;
    let (k, n) = (successes as f64, trials as f64);
    let lo = if successes == 0 {
        0.0
    } else {
        Beta::new(k, n - k + 1.0).unwrap().inverse_cdf(alpha / 2.0)
    };
    let hi = if successes == trials {
        1.0
    } else {
        Beta::new(k + 1.0, n - k).unwrap().inverse_cdf(1.0 - alpha / 2.0)
    };
    (lo, hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub cell: StateId,
    pub trials: usize,
    pub horizon: usize,
    pub successes: usize,
    pub empirical_rate: f64,
    /// Exact binomial interval around the empirical rate.
    pub interval: [f64; 2],
    pub certified_interval: [f64; 2],
    pub contained: bool,
    /// Runs neither accepted nor exited at the horizon.
    pub live_fraction: f64,
    /// Some run was accepted in the last tenth of the horizon, so a longer
    /// horizon would likely raise the rate.
    pub still_rising: bool,
}

/// Runs `trials` seeded simulations from uniform initial states in `cell`.
/// Trial `i` uses the seed `seed ^ i`, so results do not depend on the
/// thread count.
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo(
    m: &dyn SystemModel,
    ctrl: &Controller,
    noise: &GroundTruthNoise,
    cell: StateId,
    trials: usize,
    horizon: usize,
    seed: u64,
    certified: [f64; 2],
) -> Result<McReport, ValidationError> {
    if trials == 0 {
        return Err(ValidationError::Argument("trials must be at least 1".into()));
    }
    let rect: Rect = ctrl.partition.cell(cell)?;
    let outcomes: Vec<(bool, bool, usize)> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ i as u64);
            let x0: Vec<f64> = rect
                .lower
                .iter()
                .zip(&rect.upper)
                .map(|(&lo, &hi)| rng.random_range(lo..hi))
                .collect();
            let mut c = ctrl.clone();
            let t = simulate_trajectory(m, &mut c, noise, &x0, horizon, &mut rng)?;
            Ok((t.satisfied, t.live(), t.states.len() - 1))
        })
        .collect::<Result<_, ValidationError>>()?;
    let successes = outcomes.iter().filter(|o| o.0).count();
    let live = outcomes.iter().filter(|o| o.1).count();
    let late = horizon - horizon / 10;
    let still_rising = outcomes.iter().any(|o| o.0 && o.2 > late);
    let (lo, hi) = clopper_pearson(successes, trials, CONFIDENCE);
    Ok(McReport {
        cell,
        trials,
        horizon,
        successes,
        empirical_rate: successes as f64 / trials as f64,
        interval: [lo, hi],
        certified_interval: certified,
        contained: lo <= certified[1] && hi >= certified[0],
        live_fraction: live as f64 / trials as f64,
        still_rising,
    })
}
