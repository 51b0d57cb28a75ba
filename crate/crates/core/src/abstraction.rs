//! Interval and robust MDP abstractions of a switched system on a grid.
//!
//! [`build_imdp`] bounds the transition kernel of every cell under the
//! discrete noise center: an atom counts toward the lower bound of `q'`
//! when the whole one-step image of the cell lands in `q'`, and toward the
//! upper bound when the image meets `q'`. [`build_rmdp`] then attaches the
//! transport budget that accounts for every distribution in the ambiguity
//! ball.
//!
//! Cells are half-open (see [`Partition::locate`]), so an image that only
//! touches the open upper face of a cell does not meet it.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ambiguity::{AmbiguityBall, DiscreteDistribution};
use crate::dynamics::{DynamicsError, SystemModel};
use crate::geometry::{GeometryError, Norm, Partition, Rect, StateId};

/// Tolerance for the row-sum invariants, which are sums of atom weights.
pub const SUM_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum AbstractionError {
    #[error("partition has dimension {partition}, model state dimension is {model}")]
    StateDimension { partition: usize, model: usize },
    #[error("center atom {index} has dimension {got}, the model expects {expected}")]
    AtomDimension {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("center atom {0} lies outside the noise support")]
    AtomOutsideSupport(usize),
    #[error("invalid center distribution: {0}")]
    Center(String),
    #[error("ball center differs from the center used for the interval abstraction")]
    CenterMismatch,
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("malformed abstraction document: {0}")]
    Document(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalEntry {
    pub dest: StateId,
    pub lower: f64,
    pub upper: f64,
}

/// Sparse interval row over destinations sorted by id. Destinations not
/// listed have the interval `[0, 0]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IntervalRow {
    pub entries: Vec<IntervalEntry>,
}

impl IntervalRow {
    pub fn lower_sum(&self) -> f64 {
        self.entries.iter().map(|e| e.lower).sum()
    }

    pub fn upper_sum(&self) -> f64 {
        self.entries.iter().map(|e| e.upper).sum()
    }

    pub fn get(&self, dest: StateId) -> Option<&IntervalEntry> {
        self.entries
            .binary_search_by_key(&dest, |e| e.dest)
            .ok()
            .map(|i| &self.entries[i])
    }

    /// Destinations with a positive upper bound.
    pub fn support(&self) -> Vec<StateId> {
        self.entries.iter().filter(|e| e.upper > 0.0).map(|e| e.dest).collect()
    }
}

/// Interval MDP over the cells plus the absorbing unsafe state.
#[derive(Debug, Clone, PartialEq)]
pub struct ImdpAbstraction {
    num_states: usize,
    num_actions: usize,
    rows: Vec<IntervalRow>,
}

impl ImdpAbstraction {
    /// Assembles an abstraction from rows in `(q, a)` order, `q` major.
    pub fn from_rows(
        num_states: usize,
        num_actions: usize,
        rows: Vec<IntervalRow>,
    ) -> Result<Self, AbstractionError> {
        if num_states == 0 || num_actions == 0 || rows.len() != num_states * num_actions {
            return Err(AbstractionError::Document(format!(
                "{} rows for {num_states} states and {num_actions} actions",
                rows.len()
            )));
        }
        for row in &rows {
            if row.entries.windows(2).any(|w| w[0].dest >= w[1].dest)
                || row.entries.iter().any(|e| e.dest >= num_states)
            {
                return Err(AbstractionError::Document(
                    "row destinations must be sorted, distinct and in range".into(),
                ));
            }
        }
        Ok(ImdpAbstraction {
            num_states,
            num_actions,
            rows,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn unsafe_state(&self) -> StateId {
        self.num_states - 1
    }

    pub fn row(&self, q: StateId, a: usize) -> &IntervalRow {
        &self.rows[q * self.num_actions + a]
    }

    pub fn rows(&self) -> &[IntervalRow] {
        &self.rows
    }

    /// Mutable access for fault injection and hand-built models.
    pub fn row_mut(&mut self, q: StateId, a: usize) -> &mut IntervalRow {
        &mut self.rows[q * self.num_actions + a]
    }

    pub fn lower(&self, q: StateId, a: usize, dest: StateId) -> f64 {
        self.row(q, a).get(dest).map_or(0.0, |e| e.lower)
    }

    pub fn upper(&self, q: StateId, a: usize, dest: StateId) -> f64 {
        self.row(q, a).get(dest).map_or(0.0, |e| e.upper)
    }

    pub fn support(&self, q: StateId, a: usize) -> Vec<StateId> {
        self.row(q, a).support()
    }
}

fn check_center(
    m: &dyn SystemModel,
    center: &DiscreteDistribution,
) -> Result<(), AbstractionError> {
    center
        .validate()
        .map_err(|e| AbstractionError::Center(e.to_string()))?;
    let w = m.noise_support();
    for (i, atom) in center.atoms.iter().enumerate() {
        if atom.len() != m.noise_dim() {
            return Err(AbstractionError::AtomDimension {
                index: i,
                got: atom.len(),
                expected: m.noise_dim(),
            });
        }
        if !w.contains_point(atom) {
            return Err(AbstractionError::AtomOutsideSupport(i));
        }
    }
    Ok(())
}

fn unsafe_row(unsafe_id: StateId) -> IntervalRow {
    IntervalRow {
        entries: vec![IntervalEntry {
            dest: unsafe_id,
            lower: 1.0,
            upper: 1.0,
        }],
    }
}

fn imdp_row(
    m: &dyn SystemModel,
    p: &Partition,
    center: &DiscreteDistribution,
    cell: &Rect,
    a: usize,
) -> IntervalRow {
    let u = p.unsafe_id();
    let mut acc: BTreeMap<StateId, (f64, f64)> = BTreeMap::new();
    for (atom, &weight) in center.atoms.iter().zip(&center.weights) {
        let reach = m.reach(cell, a, &Rect::point(atom));
        for q2 in p.cells_meeting(&reach) {
            acc.entry(q2).or_default().1 += weight;
        }
        if let Some(q2) = p.cell_containing(&reach) {
            acc.entry(q2).or_default().0 += weight;
        }
        if !p.domain.contains(&reach) {
            let e = acc.entry(u).or_default();
            e.1 += weight;
            if !p.domain.intersects(&reach) {
                e.0 += weight;
            }
        }
    }
    IntervalRow {
        entries: acc
            .into_iter()
            .map(|(dest, (lo, hi))| IntervalEntry {
                dest,
                lower: lo.clamp(0.0, 1.0),
                upper: hi.clamp(0.0, 1.0),
            })
            .collect(),
    }
}

fn check_model_partition(m: &dyn SystemModel, p: &Partition) -> Result<(), AbstractionError> {
    if p.dim() != m.state_dim() {
        return Err(AbstractionError::StateDimension {
            partition: p.dim(),
            model: m.state_dim(),
        });
    }
    Ok(())
}

/// Empirical interval abstraction for the noise distribution `center`.
///
/// Rows are built in parallel; each row depends only on its own cell and
/// action, so the result does not depend on the thread count.
pub fn build_imdp(
    m: &dyn SystemModel,
    p: &Partition,
    center: &DiscreteDistribution,
) -> Result<ImdpAbstraction, AbstractionError> {
    check_model_partition(m, p)?;
    check_center(m, center)?;
    let na = m.num_actions();
    let cells = p.cells();
    let mut rows: Vec<IntervalRow> = (0..cells.len() * na)
        .into_par_iter()
        .map(|i| imdp_row(m, p, center, &cells[i / na], i % na))
        .collect();
    rows.extend((0..na).map(|_| unsafe_row(p.unsafe_id())));
    Ok(ImdpAbstraction {
        num_states: p.num_states(),
        num_actions: na,
        rows,
    })
}

/// A broken invariant of an interval abstraction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    /// An entry outside `0 <= lower <= upper <= 1`.
    Entry {
        q: StateId,
        a: usize,
        dest: StateId,
        lower: f64,
        upper: f64,
    },
    LowerSumAboveOne { q: StateId, a: usize, sum: f64 },
    UpperSumBelowOne { q: StateId, a: usize, sum: f64 },
    UnsafeNotAbsorbing { a: usize },
}

/// Checks the interval invariants, returning every violation found.
pub fn validate_interval_structure(imdp: &ImdpAbstraction) -> Vec<Violation> {
    let mut out = Vec::new();
    let u = imdp.unsafe_state();
    for q in 0..imdp.num_states() {
        for a in 0..imdp.num_actions() {
            let row = imdp.row(q, a);
            for e in &row.entries {
                let ok = e.lower >= 0.0 && e.lower <= e.upper && e.upper <= 1.0;
                if !ok {
                    out.push(Violation::Entry {
                        q,
                        a,
                        dest: e.dest,
                        lower: e.lower,
                        upper: e.upper,
                    });
                }
            }
            let lo = row.lower_sum();
            if lo > 1.0 + SUM_TOL {
                out.push(Violation::LowerSumAboveOne { q, a, sum: lo });
            }
            let hi = row.upper_sum();
            if hi < 1.0 - SUM_TOL {
                out.push(Violation::UpperSumBelowOne { q, a, sum: hi });
            }
            if q == u && *row != unsafe_row(u) {
                out.push(Violation::UnsafeNotAbsorbing { a });
            }
        }
    }
    out
}

/// Robust MDP: the interval abstraction plus, per `(q, a)`, a transport
/// budget `theta` and the set of states reachable under any noise in `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct RmdpAbstraction {
    pub imdp: ImdpAbstraction,
    pub partition: Partition,
    pub norm: Norm,
    pub s: u32,
    theta: Vec<f64>,
    restricted_support: Vec<Vec<StateId>>,
}

impl RmdpAbstraction {
    pub fn num_states(&self) -> usize {
        self.imdp.num_states()
    }

    pub fn num_actions(&self) -> usize {
        self.imdp.num_actions()
    }

    pub fn theta(&self, q: StateId, a: usize) -> f64 {
        self.theta[q * self.num_actions() + a]
    }

    pub fn restricted_support(&self, q: StateId, a: usize) -> &[StateId] {
        &self.restricted_support[q * self.num_actions() + a]
    }

    /// Transport cost between two abstract states.
    pub fn cost(&self, from: StateId, to: StateId) -> f64 {
        self.partition
            .cell_cost(from, to, self.norm, self.s)
            .expect("states come from this abstraction")
    }

    /// Rebuilds the abstraction from its parts, checking their shapes.
    pub fn from_parts(
        imdp: ImdpAbstraction,
        partition: Partition,
        norm: Norm,
        s: u32,
        theta: Vec<f64>,
        restricted_support: Vec<Vec<StateId>>,
    ) -> Result<Self, AbstractionError> {
        let rows = imdp.num_states() * imdp.num_actions();
        if imdp.num_states() != partition.num_states()
            || theta.len() != rows
            || restricted_support.len() != rows
        {
            return Err(AbstractionError::Document(
                "row counts disagree with the partition".into(),
            ));
        }
        if theta.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return Err(AbstractionError::Document("negative or non-finite budget".into()));
        }
        if s == 0 {
            return Err(AbstractionError::Document("order s must be >= 1".into()));
        }
        for (i, sup) in restricted_support.iter().enumerate() {
            let row = &imdp.rows[i];
            if sup.windows(2).any(|w| w[0] >= w[1])
                || sup.iter().any(|&q| q >= imdp.num_states())
                || row.support().iter().any(|q| sup.binary_search(q).is_err())
            {
                return Err(AbstractionError::Document(format!(
                    "restricted support of row {i} is malformed"
                )));
            }
        }
        Ok(RmdpAbstraction {
            imdp,
            partition,
            norm,
            s,
            theta,
            restricted_support,
        })
    }
}

/// Attaches transport budgets `(L_w(q, a) * radius)^s` and restricted
/// supports to an interval abstraction built from `ball`'s center.
pub fn build_rmdp(
    imdp: ImdpAbstraction,
    m: &dyn SystemModel,
    p: &Partition,
    ball: &AmbiguityBall,
) -> Result<RmdpAbstraction, AbstractionError> {
    check_model_partition(m, p)?;
    if imdp.num_states() != p.num_states() || imdp.num_actions() != m.num_actions() {
        return Err(AbstractionError::Document(
            "interval abstraction does not match the model and partition".into(),
        ));
    }
    check_center(m, &ball.center())?;
    let na = m.num_actions();
    let u = p.unsafe_id();
    let cells = p.cells();
    let w = m.noise_support();
    let per_row: Vec<(f64, Vec<StateId>)> = (0..cells.len() * na)
        .into_par_iter()
        .map(|i| {
            let (q, a) = (i / na, i % na);
            let cell = &cells[q];
            let lip = m.lipschitz(cell, a, ball.l);
            let theta = (lip * ball.radius).powi(ball.s as i32);
            let reach = m.reach(cell, a, w);
            let mut sup = p.cells_meeting(&reach);
            if !p.domain.contains(&reach) {
                sup.push(u);
            }
            // the interval row is derived from atoms in W, but keep the
            // superset property even for hand-edited rows
            for d in imdp.support(q, a) {
                if let Err(pos) = sup.binary_search(&d) {
                    sup.insert(pos, d);
                }
            }
            (theta, sup)
        })
        .collect();
    let (mut theta, mut restricted_support): (Vec<f64>, Vec<Vec<StateId>>) =
        per_row.into_iter().unzip();
    theta.extend(std::iter::repeat_n(0.0, na));
    restricted_support.extend((0..na).map(|_| vec![u]));
    Ok(RmdpAbstraction {
        imdp,
        partition: p.clone(),
        norm: ball.l,
        s: ball.s,
        theta,
        restricted_support,
    })
}

/// Hex SHA-256 of the partition's canonical JSON form.
pub fn partition_hash(p: &Partition) -> String {
    let json = serde_json::to_vec(p).expect("partition serializes");
    hex::encode(Sha256::digest(&json))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractionStats {
    pub states: usize,
    pub actions: usize,
    pub rows: usize,
    pub nonzeros: usize,
    pub average_support: f64,
    pub average_restricted_support: f64,
    pub max_theta: f64,
}

pub fn stats(rmdp: &RmdpAbstraction) -> AbstractionStats {
    let rows = rmdp.imdp.rows().len();
    let nonzeros: usize = rmdp.imdp.rows().iter().map(|r| r.support().len()).sum();
    let restricted: usize = rmdp.restricted_support.iter().map(Vec::len).sum();
    AbstractionStats {
        states: rmdp.num_states(),
        actions: rmdp.num_actions(),
        rows,
        nonzeros,
        average_support: nonzeros as f64 / rows as f64,
        average_restricted_support: restricted as f64 / rows as f64,
        max_theta: rmdp.theta.iter().copied().fold(0.0, f64::max),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractionMetadata {
    pub partition_hash: String,
    pub partition: Partition,
    pub ball: AmbiguityBall,
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowDoc {
    pub q: StateId,
    pub a: usize,
    pub theta: f64,
    pub restricted_support: Vec<StateId>,
    pub entries: Vec<IntervalEntry>,
}

/// Serialized form of an [`RmdpAbstraction`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractionDoc {
    pub metadata: AbstractionMetadata,
    pub stats: AbstractionStats,
    pub num_states: usize,
    pub num_actions: usize,
    pub rows: Vec<RowDoc>,
}

impl AbstractionDoc {
    pub fn new(
        rmdp: &RmdpAbstraction,
        ball: &AmbiguityBall,
        model: &str,
        timestamp: Option<String>,
    ) -> Self {
        let na = rmdp.num_actions();
        let rows = rmdp
            .imdp
            .rows()
            .iter()
            .enumerate()
            .map(|(i, r)| RowDoc {
                q: i / na,
                a: i % na,
                theta: rmdp.theta[i],
                restricted_support: rmdp.restricted_support[i].clone(),
                entries: r.entries.clone(),
            })
            .collect();
        AbstractionDoc {
            metadata: AbstractionMetadata {
                partition_hash: partition_hash(&rmdp.partition),
                partition: rmdp.partition.clone(),
                ball: ball.clone(),
                model: model.to_string(),
                timestamp,
            },
            stats: stats(rmdp),
            num_states: rmdp.num_states(),
            num_actions: na,
            rows,
        }
    }

    pub fn to_rmdp(&self) -> Result<RmdpAbstraction, AbstractionError> {
        let p = &self.metadata.partition;
        if partition_hash(p) != self.metadata.partition_hash {
            return Err(AbstractionError::Document("partition hash mismatch".into()));
        }
        let na = self.num_actions;
        for (i, r) in self.rows.iter().enumerate() {
            if na == 0 || r.q != i / na || r.a != i % na {
                return Err(AbstractionError::Document(format!("row {i} out of order")));
            }
        }
        let imdp = ImdpAbstraction::from_rows(
            self.num_states,
            na,
            self.rows
                .iter()
                .map(|r| IntervalRow {
                    entries: r.entries.clone(),
                })
                .collect(),
        )?;
        RmdpAbstraction::from_parts(
            imdp,
            p.clone(),
            self.metadata.ball.l,
            self.metadata.ball.s,
            self.rows.iter().map(|r| r.theta).collect(),
            self.rows.iter().map(|r| r.restricted_support.clone()).collect(),
        )
    }
}
