//! Hyperrectangular partitions of the safe set.
//!
//! The safe domain `X` is cut into a uniform axis-aligned grid. Cells are
//! indexed with the first axis varying fastest, and one extra index (one past
//! the last cell) is reserved for the unsafe complement `R^n \ X`.
//!
//! Point location uses lower-closed / upper-open cells, except on the top faces
//! of the domain, which are closed. This makes the map from states to cells a
//! total function.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Absolute tolerance used when checking that regions sit on grid lines.
pub const ALIGN_TOL: f64 = 1e-9;

/// Name of the proposition carried by the unsafe state.
pub const UNSAFE_PROP: &str = "unsafe";

/// Index of an abstract state: a safe cell or the unsafe state.
pub type StateId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("box bounds must have equal, nonzero dimension (lower {lower}, upper {upper})")]
    DimensionMismatch { lower: usize, upper: usize },
    #[error("invalid box on axis {axis}: lower {lower} > upper {upper}")]
    InvertedBounds { axis: usize, lower: f64, upper: f64 },
    #[error("non-finite bound on axis {axis}")]
    NonFinite { axis: usize },
    #[error("degenerate domain: zero width on axis {axis}")]
    DegenerateDomain { axis: usize },
    #[error("cut count must be positive on axis {axis}")]
    ZeroCuts { axis: usize },
    #[error("expected {expected} cut counts, got {got}")]
    CutsDimension { expected: usize, got: usize },
    #[error("point has dimension {got}, partition has {expected}")]
    PointDimension { expected: usize, got: usize },
    #[error("NaN coordinate on axis {axis}")]
    NanCoordinate { axis: usize },
    #[error("region '{region}' is not inside the domain")]
    RegionOutsideDomain { region: String },
    #[error("region '{region}' misaligned on axis {axis}")]
    MisalignedRegion { region: String, axis: usize },
    #[error("region name '{0}' is reserved")]
    ReservedName(String),
    #[error("unknown state id {0}")]
    UnknownState(StateId),
}

/// An axis-aligned box `[lower, upper]` in `R^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Rect {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, GeometryError> {
        let rect = Rect { lower, upper };
        rect.validate()?;
        Ok(rect)
    }

    /// Degenerate box holding a single point.
    pub fn point(x: &[f64]) -> Self {
        Rect {
            lower: x.to_vec(),
            upper: x.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.lower.len() != self.upper.len() || self.lower.is_empty() {
            return Err(GeometryError::DimensionMismatch {
                lower: self.lower.len(),
                upper: self.upper.len(),
            });
        }
        for (axis, (&lo, &hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(GeometryError::NonFinite { axis });
            }
            if lo > hi {
                return Err(GeometryError::InvertedBounds {
                    axis,
                    lower: lo,
                    upper: hi,
                });
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    /// Closed containment of a point.
    pub fn contains_point(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    /// Closed containment of another box.
    pub fn contains(&self, other: &Rect) -> bool {
        (0..self.dim()).all(|i| self.lower[i] <= other.lower[i] && other.upper[i] <= self.upper[i])
    }

    /// Closed intersection test.
    pub fn intersects(&self, other: &Rect) -> bool {
        (0..self.dim()).all(|i| self.lower[i] <= other.upper[i] && other.lower[i] <= self.upper[i])
    }

    /// Box grown by `slack` on every side.
    pub fn inflate(&self, slack: f64) -> Rect {
        Rect {
            lower: self.lower.iter().map(|v| v - slack).collect(),
            upper: self.upper.iter().map(|v| v + slack).collect(),
        }
    }

    /// Per-axis gap between two boxes (zero where they overlap).
    pub fn gap(&self, other: &Rect) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                (other.lower[i] - self.upper[i])
                    .max(self.lower[i] - other.upper[i])
                    .max(0.0)
            })
            .collect()
    }
}

/// The `l`-norm used for transport costs and Lipschitz constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Norm {
    L1,
    L2,
    Inf,
}

impl Norm {
    pub fn of(&self, v: &[f64]) -> f64 {
        match self {
            Norm::L1 => v.iter().map(|x| x.abs()).sum(),
            Norm::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            Norm::Inf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        self.of(&diff)
    }
}

impl std::fmt::Display for Norm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Norm::L1 => write!(f, "1"),
            Norm::L2 => write!(f, "2"),
            Norm::Inf => write!(f, "inf"),
        }
    }
}

impl std::str::FromStr for Norm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" | "l1" => Ok(Norm::L1),
            "2" | "l2" => Ok(Norm::L2),
            "inf" | "linf" | "infinity" => Ok(Norm::Inf),
            other => Err(format!("unsupported norm '{other}' (expected 1, 2 or inf)")),
        }
    }
}

// Serialized as the JSON number 1 or 2, or the string "inf".
impl Serialize for Norm {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Norm::L1 => s.serialize_u8(1),
            Norm::L2 => s.serialize_u8(2),
            Norm::Inf => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Norm {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(d)?;
        let text = match &value {
            serde_json::Value::Number(n) => n.to_string(),
            serde_json::Value::String(s) => s.clone(),
            _ => return Err(serde::de::Error::custom("norm must be 1, 2 or \"inf\"")),
        };
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Uniform grid over the safe domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub domain: Rect,
    pub cuts: Vec<usize>,
}

impl Partition {
    /// Builds a uniform grid with `cuts[i]` cells along axis `i`.
    pub fn build_grid(domain: Rect, cuts: Vec<usize>) -> Result<Self, GeometryError> {
        domain.validate()?;
        if cuts.len() != domain.dim() {
            return Err(GeometryError::CutsDimension {
                expected: domain.dim(),
                got: cuts.len(),
            });
        }
        for axis in 0..domain.dim() {
            if domain.width(axis) <= 0.0 {
                return Err(GeometryError::DegenerateDomain { axis });
            }
            if cuts[axis] == 0 {
                return Err(GeometryError::ZeroCuts { axis });
            }
        }
        Ok(Partition { domain, cuts })
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn num_cells(&self) -> usize {
        self.cuts.iter().product()
    }

    /// Number of abstract states: cells plus the unsafe state.
    pub fn num_states(&self) -> usize {
        self.num_cells() + 1
    }

    pub fn unsafe_id(&self) -> StateId {
        self.num_cells()
    }

    pub fn is_unsafe(&self, q: StateId) -> bool {
        q == self.unsafe_id()
    }

    /// Coordinate of grid line `i` on `axis`; the outer lines are the domain bounds exactly.
    pub fn grid_line(&self, axis: usize, i: usize) -> f64 {
        let n = self.cuts[axis];
        if i == 0 {
            self.domain.lower[axis]
        } else if i >= n {
            self.domain.upper[axis]
        } else {
            self.domain.lower[axis] + self.domain.width(axis) * (i as f64 / n as f64)
        }
    }

    pub fn cell_width(&self, axis: usize) -> f64 {
        self.domain.width(axis) / self.cuts[axis] as f64
    }

    /// Multi-index of a cell, first axis fastest.
    pub fn multi_index(&self, q: StateId) -> Vec<usize> {
        let mut rest = q;
        self.cuts
            .iter()
            .map(|&n| {
                let i = rest % n;
                rest /= n;
                i
            })
            .collect()
    }

    pub fn flat_index(&self, idx: &[usize]) -> StateId {
        let mut stride = 1;
        let mut q = 0;
        for (i, &n) in idx.iter().zip(&self.cuts) {
            q += i * stride;
            stride *= n;
        }
        q
    }

    pub fn cell(&self, q: StateId) -> Result<Rect, GeometryError> {
        if q >= self.num_cells() {
            return Err(GeometryError::UnknownState(q));
        }
        Ok(self.cell_from_index(&self.multi_index(q)))
    }

    fn cell_from_index(&self, idx: &[usize]) -> Rect {
        let lower = idx
            .iter()
            .enumerate()
            .map(|(axis, &i)| self.grid_line(axis, i))
            .collect();
        let upper = idx
            .iter()
            .enumerate()
            .map(|(axis, &i)| self.grid_line(axis, i + 1))
            .collect();
        Rect { lower, upper }
    }

    /// All safe cells in index order.
    pub fn cells(&self) -> Vec<Rect> {
        (0..self.num_cells())
            .map(|q| self.cell_from_index(&self.multi_index(q)))
            .collect()
    }

    /// Grid coordinate of `v` on `axis` under the half-open convention, or
    /// `None` when `v` lies outside the domain on that axis.
    fn axis_slot(&self, axis: usize, v: f64) -> Option<usize> {
        let lo = self.domain.lower[axis];
        let hi = self.domain.upper[axis];
        if v < lo || v > hi {
            return None;
        }
        let n = self.cuts[axis];
        if v == hi {
            return Some(n - 1);
        }
        let mut i = (((v - lo) / self.domain.width(axis)) * n as f64).floor() as usize;
        i = i.min(n - 1);
        // Reconcile with the grid lines actually used for cell bounds.
        while i > 0 && v < self.grid_line(axis, i) {
            i -= 1;
        }
        while i + 1 < n && v >= self.grid_line(axis, i + 1) {
            i += 1;
        }
        Some(i)
    }

    /// Maps a state to its cell, or to the unsafe id when outside the domain.
    pub fn locate(&self, x: &[f64]) -> Result<StateId, GeometryError> {
        if x.len() != self.dim() {
            return Err(GeometryError::PointDimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if let Some(axis) = x.iter().position(|v| v.is_nan()) {
            return Err(GeometryError::NanCoordinate { axis });
        }
        let mut idx = Vec::with_capacity(self.dim());
        for (axis, &v) in x.iter().enumerate() {
            match self.axis_slot(axis, v) {
                Some(i) => idx.push(i),
                None => return Ok(self.unsafe_id()),
            }
        }
        Ok(self.flat_index(&idx))
    }

    /// Inclusive range of grid slots on `axis` whose closed cells meet `[lo, hi]`.
    fn slot_range(&self, axis: usize, lo: f64, hi: f64) -> Option<(usize, usize)> {
        let dlo = self.domain.lower[axis];
        let dhi = self.domain.upper[axis];
        if hi < dlo || lo > dhi {
            return None;
        }
        let n = self.cuts[axis];
        let w = self.domain.width(axis);
        let mut first = (((lo.max(dlo) - dlo) / w) * n as f64).floor() as usize;
        first = first.min(n - 1);
        while first > 0 && self.grid_line(axis, first) >= lo {
            first -= 1;
        }
        while first + 1 < n && self.grid_line(axis, first + 1) < lo {
            first += 1;
        }
        let mut last = (((hi.min(dhi) - dlo) / w) * n as f64).floor() as usize;
        last = last.min(n - 1);
        while last + 1 < n && self.grid_line(axis, last + 1) <= hi {
            last += 1;
        }
        while last > first && self.grid_line(axis, last) > hi {
            last -= 1;
        }
        Some((first, last))
    }

    /// Safe cells whose closed boxes intersect `r`, in increasing index order.
    pub fn cells_intersecting(&self, r: &Rect) -> Vec<StateId> {
        let mut ranges = Vec::with_capacity(self.dim());
        for axis in 0..self.dim() {
            match self.slot_range(axis, r.lower[axis], r.upper[axis]) {
                Some(range) => ranges.push(range),
                None => return Vec::new(),
            }
        }
        self.enumerate_box(&ranges)
    }

    /// Safe cells that share a point with the closed box `r` under the
    /// half-open cell convention of [`Partition::locate`], in increasing
    /// index order. A box that only touches a cell's open upper face does
    /// not meet that cell.
    pub fn cells_meeting(&self, r: &Rect) -> Vec<StateId> {
        match self.slot_box(r) {
            Some(ranges) => self.enumerate_box(&ranges),
            None => Vec::new(),
        }
    }

    /// The cell containing all of `r` under the half-open convention, if any.
    pub fn cell_containing(&self, r: &Rect) -> Option<StateId> {
        if !self.domain.contains(r) {
            return None;
        }
        let ranges = self.slot_box(r)?;
        if ranges.iter().all(|(a, b)| a == b) {
            Some(self.flat_index(&ranges.iter().map(|r| r.0).collect::<Vec<_>>()))
        } else {
            None
        }
    }

    /// Per-axis slot ranges of the cells meeting `r` (half-open convention).
    fn slot_box(&self, r: &Rect) -> Option<Vec<(usize, usize)>> {
        (0..self.dim())
            .map(|axis| {
                let (dlo, dhi) = (self.domain.lower[axis], self.domain.upper[axis]);
                let (lo, hi) = (r.lower[axis], r.upper[axis]);
                if hi < dlo || lo > dhi {
                    return None;
                }
                Some((
                    self.axis_slot(axis, lo.max(dlo))?,
                    self.axis_slot(axis, hi.min(dhi))?,
                ))
            })
            .collect()
    }

    fn enumerate_box(&self, ranges: &[(usize, usize)]) -> Vec<StateId> {
        let total: usize = ranges.iter().map(|(a, b)| b - a + 1).product();
        let mut out = Vec::with_capacity(total);
        let mut idx: Vec<usize> = ranges.iter().map(|r| r.0).collect();
        // Odometer over the index box with the first axis as the fastest
        // digit, which yields flat indices in increasing order.
        loop {
            out.push(self.flat_index(&idx));
            let mut axis = 0;
            loop {
                if axis == self.dim() {
                    return out;
                }
                if idx[axis] < ranges[axis].1 {
                    idx[axis] += 1;
                    break;
                }
                idx[axis] = ranges[axis].0;
                axis += 1;
            }
        }
    }

    /// Transport cost `inf { ||x - x'||_l^s : x in q, x' in q' }` between abstract states.
    pub fn cell_cost(
        &self,
        q: StateId,
        q2: StateId,
        norm: Norm,
        s: u32,
    ) -> Result<f64, GeometryError> {
        let u = self.unsafe_id();
        if q > u {
            return Err(GeometryError::UnknownState(q));
        }
        if q2 > u {
            return Err(GeometryError::UnknownState(q2));
        }
        if q == q2 {
            return Ok(0.0);
        }
        if q == u || q2 == u {
            let safe = if q == u { q2 } else { q };
            let cell = self.cell(safe)?;
            return Ok(self.exit_distance(&cell).powi(s as i32));
        }
        let gap = self.cell(q)?.gap(&self.cell(q2)?);
        Ok(norm.of(&gap).powi(s as i32))
    }

    /// Distance from a box inside the domain to the domain's exterior. Any
    /// `l`-norm agrees here since the shortest exit moves along one axis.
    pub fn exit_distance(&self, cell: &Rect) -> f64 {
        (0..self.dim())
            .map(|i| {
                (cell.lower[i] - self.domain.lower[i])
                    .min(self.domain.upper[i] - cell.upper[i])
                    .max(0.0)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Whether a region's bounds sit on grid lines, reporting the first bad axis.
    fn check_alignment(&self, r: &Rect) -> Result<(), usize> {
        for axis in 0..self.dim() {
            for &v in [r.lower[axis], r.upper[axis]].iter() {
                let t = (v - self.domain.lower[axis]) / self.cell_width(axis);
                let i = t.round().max(0.0) as usize;
                if (self.grid_line(axis, i) - v).abs() > ALIGN_TOL {
                    return Err(axis);
                }
            }
        }
        Ok(())
    }

    /// Labels every cell with the regions that contain it.
    pub fn attach_labels(&self, regions: &[Region]) -> Result<LabelMap, GeometryError> {
        let mut propositions: Vec<String> = Vec::new();
        for r in regions {
            if r.name == UNSAFE_PROP {
                return Err(GeometryError::ReservedName(r.name.clone()));
            }
            r.rect.validate()?;
            if r.rect.dim() != self.dim()
                || !self.domain.inflate(ALIGN_TOL).contains(&r.rect)
            {
                return Err(GeometryError::RegionOutsideDomain {
                    region: r.name.clone(),
                });
            }
            self.check_alignment(&r.rect)
                .map_err(|axis| GeometryError::MisalignedRegion {
                    region: r.name.clone(),
                    axis,
                })?;
            if !propositions.contains(&r.name) {
                propositions.push(r.name.clone());
            }
        }
        propositions.push(UNSAFE_PROP.to_string());

        let mut cell_labels = vec![0u64; self.num_cells()];
        for r in regions {
            let p = propositions.iter().position(|n| *n == r.name).unwrap();
            let shrunk = r.rect.inflate(ALIGN_TOL);
            for q in self.cells_intersecting(&r.rect.inflate(-ALIGN_TOL)) {
                let cell = self.cell_from_index(&self.multi_index(q));
                if shrunk.contains(&cell) {
                    cell_labels[q] |= 1 << p;
                }
            }
        }
        Ok(LabelMap {
            propositions,
            regions: regions.to_vec(),
            cell_labels,
        })
    }
}

/// A named region of interest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub name: String,
    #[serde(flatten)]
    pub rect: Rect,
}

impl Region {
    pub fn new(name: impl Into<String>, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        Region {
            name: name.into(),
            rect: Rect { lower, upper },
        }
    }
}

/// Labels of the abstract states as proposition bitmasks.
///
/// Bit `i` of a label refers to `propositions[i]`; the last proposition is
/// always the unsafe one, carried only by the unsafe state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMap {
    pub propositions: Vec<String>,
    pub regions: Vec<Region>,
    pub cell_labels: Vec<u64>,
}

impl LabelMap {
    pub fn unsafe_bit(&self) -> u64 {
        1 << (self.propositions.len() - 1)
    }

    /// Label of any abstract state (the unsafe id is one past the cells).
    pub fn label(&self, q: StateId) -> u64 {
        self.cell_labels
            .get(q)
            .copied()
            .unwrap_or_else(|| self.unsafe_bit())
    }

    pub fn proposition_index(&self, name: &str) -> Option<usize> {
        self.propositions.iter().position(|p| p == name)
    }

    pub fn label_names(&self, label: u64) -> Vec<&str> {
        self.propositions
            .iter()
            .enumerate()
            .filter(|(i, _)| label & (1 << i) != 0)
            .map(|(_, p)| p.as_str())
            .collect()
    }
}

/// JSON document describing a partition and its regions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionDoc {
    pub domain: Rect,
    pub cuts: Vec<usize>,
    #[serde(default)]
    pub regions: Vec<Region>,
}

impl PartitionDoc {
    pub fn build(&self) -> Result<(Partition, LabelMap), GeometryError> {
        let p = Partition::build_grid(self.domain.clone(), self.cuts.clone())?;
        let labels = p.attach_labels(&self.regions)?;
        Ok((p, labels))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square(cuts: Vec<usize>) -> Partition {
        Partition::build_grid(Rect::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap(), cuts).unwrap()
    }

    #[test]
    fn grid_two_by_two() {
        let p = unit_square(vec![2, 2]);
        assert_eq!(p.num_cells(), 4);
        assert_eq!(p.cell(0).unwrap(), Rect::new(vec![0.0, 0.0], vec![0.5, 0.5]).unwrap());
        assert_eq!(p.unsafe_id(), 4);
    }

    #[test]
    fn grid_single_cell_is_domain() {
        let d = Rect::new(vec![0.0], vec![1.0]).unwrap();
        let p = Partition::build_grid(d.clone(), vec![1]).unwrap();
        assert_eq!(p.cells(), vec![d]);
    }

    #[test]
    fn grid_cell_heights() {
        let d = Rect::new(vec![-0.5, 0.0], vec![0.5, 2.0]).unwrap();
        let p = Partition::build_grid(d, vec![1, 4]).unwrap();
        assert_eq!(p.num_cells(), 4);
        for c in p.cells() {
            assert!((c.width(1) - 0.5).abs() < 1e-15);
            assert!((c.width(0) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn grid_rejects_bad_input() {
        let d = Rect::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(
            Partition::build_grid(d.clone(), vec![2, 0]),
            Err(GeometryError::ZeroCuts { axis: 1 })
        );
        let flat = Rect::new(vec![0.0, 0.0], vec![1.0, 0.0]).unwrap();
        assert_eq!(
            Partition::build_grid(flat, vec![2, 2]),
            Err(GeometryError::DegenerateDomain { axis: 1 })
        );
        assert!(Partition::build_grid(d, vec![2]).is_err());
    }

    #[test]
    fn locate_conventions() {
        let p = unit_square(vec![2, 2]);
        assert_eq!(p.locate(&[2.0, 2.0]).unwrap(), p.unsafe_id());
        // shared face goes to the cell whose lower corner is (0.5, 0.5)
        let q = p.locate(&[0.5, 0.5]).unwrap();
        assert_eq!(p.cell(q).unwrap().lower, vec![0.5, 0.5]);
        assert_eq!(p.locate(&[1.0, 1.0]).unwrap(), 3);
        assert_eq!(p.locate(&[0.0, 1.0]).unwrap(), 2);
        assert!(matches!(
            p.locate(&[f64::NAN, 0.1]),
            Err(GeometryError::NanCoordinate { axis: 0 })
        ));
    }

    #[test]
    fn labels_whole_domain_and_half() {
        let p = unit_square(vec![2, 2]);
        let all = p
            .attach_labels(&[Region::new("safe", vec![0.0, 0.0], vec![1.0, 1.0])])
            .unwrap();
        assert!(all.cell_labels.iter().all(|&l| l == 1));
        assert_eq!(all.label(p.unsafe_id()), 2);

        let half = p
            .attach_labels(&[Region::new("left", vec![0.0, 0.0], vec![0.5, 1.0])])
            .unwrap();
        let labelled: Vec<usize> = (0..4).filter(|&q| half.cell_labels[q] != 0).collect();
        assert_eq!(labelled, vec![0, 2]);
    }

    #[test]
    fn labels_reject_misaligned() {
        let p = unit_square(vec![2, 2]);
        let err = p
            .attach_labels(&[Region::new("bad", vec![0.0, 0.0], vec![0.3, 1.0])])
            .unwrap_err();
        assert_eq!(
            err,
            GeometryError::MisalignedRegion {
                region: "bad".into(),
                axis: 0
            }
        );
        assert_eq!(err.to_string(), "region 'bad' misaligned on axis 0");
    }

    #[test]
    fn cost_examples() {
        let p = unit_square(vec![2, 2]);
        assert_eq!(p.cell_cost(1, 1, Norm::Inf, 1).unwrap(), 0.0);
        // touching the boundary: free exit
        assert_eq!(p.cell_cost(0, p.unsafe_id(), Norm::Inf, 1).unwrap(), 0.0);
        assert!(p.cell_cost(0, 9, Norm::Inf, 1).is_err());

        let a = Rect::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let b = Rect::new(vec![2.0, 0.0], vec![4.0, 1.0]).unwrap();
        assert_eq!(Norm::Inf.of(&a.gap(&b)), 1.0);

        let wide = Partition::build_grid(Rect::new(vec![0.0, 0.0], vec![4.0, 1.0]).unwrap(), vec![4, 1])
            .unwrap();
        assert_eq!(wide.cell_cost(0, 2, Norm::Inf, 1).unwrap(), 1.0);
        assert_eq!(wide.cell_cost(0, 3, Norm::L2, 2).unwrap(), 4.0);
    }

    #[test]
    fn interior_cell_exit_cost() {
        let p = unit_square(vec![4, 4]);
        let q = p.locate(&[0.3, 0.6]).unwrap();
        assert_eq!(p.cell(q).unwrap().lower, vec![0.25, 0.5]);
        let c = p.cell_cost(q, p.unsafe_id(), Norm::Inf, 1).unwrap();
        assert!((c - 0.25).abs() < 1e-15);
        assert_eq!(c, p.cell_cost(p.unsafe_id(), q, Norm::Inf, 1).unwrap());
    }

    #[test]
    fn intersecting_cells_sorted() {
        let p = unit_square(vec![4, 4]);
        let r = Rect::new(vec![0.3, 0.3], vec![0.6, 0.4]).unwrap();
        let hits = p.cells_intersecting(&r);
        assert_eq!(hits, vec![5, 6]);
        // touching a grid line counts as intersecting (closed boxes)
        let edge = Rect::new(vec![0.5, 0.1], vec![0.5, 0.1]).unwrap();
        assert_eq!(p.cells_intersecting(&edge), vec![1, 2]);
        let outside = Rect::new(vec![1.5, 0.0], vec![2.0, 1.0]).unwrap();
        assert!(p.cells_intersecting(&outside).is_empty());
    }

    #[test]
    fn norm_json_forms() {
        assert_eq!(serde_json::to_string(&Norm::Inf).unwrap(), "\"inf\"");
        assert_eq!(serde_json::to_string(&Norm::L2).unwrap(), "2");
        let n: Norm = serde_json::from_str("1").unwrap();
        assert_eq!(n, Norm::L1);
        let n: Norm = serde_json::from_str("\"inf\"").unwrap();
        assert_eq!(n, Norm::Inf);
    }
}
