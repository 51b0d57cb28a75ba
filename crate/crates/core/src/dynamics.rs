//! Switched system models `x' = f_a(x, w)`.
//!
//! A model supplies, besides the vector fields, a sound box enclosure of the
//! image of a cell under each mode and a cell-wise Lipschitz constant in the
//! noise. Four benchmark presets are provided; custom systems implement
//! [`SystemModel`] directly.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::fmt::Debug;
use std::sync::Arc;
use thiserror::Error;

use crate::geometry::{Norm, Rect};
use crate::interval::Interval;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("unknown mode {mode} (model has {count} modes)")]
    UnknownMode { mode: usize, count: usize },
    #[error("expected a {what} of dimension {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("model '{0}' is not injective in the noise at this state")]
    NotInjective(String),
    #[error("recovered noise {0:?} lies outside the noise support")]
    NoiseOutsideSupport(Vec<f64>),
    #[error("observed successor is inconsistent with the model: {0}")]
    Inconsistent(String),
    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),
}

/// A discrete-time switched system with bounded noise.
pub trait SystemModel: Send + Sync + Debug {
    fn name(&self) -> &str;
    fn state_dim(&self) -> usize;
    fn noise_dim(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn noise_support(&self) -> &Rect;

    /// Evaluates `f_a(x, w)`; callers guarantee valid dimensions and mode.
    fn eval(&self, x: &[f64], a: usize, w: &[f64]) -> Vec<f64>;

    /// Box containing `{ f_a(x, w) : x in cell, w in noise }`.
    fn reach(&self, cell: &Rect, a: usize, noise: &Rect) -> Rect;

    /// Upper bound on the Lipschitz constant of `w -> f_a(x, w)` over the
    /// cell, with the `norm` used on both the state and the noise.
    fn lipschitz(&self, cell: &Rect, a: usize, norm: Norm) -> f64;

    /// Closed-form inverse `w` with `f_a(x, w) = x_next`, when the mode is
    /// injective in the noise at `x`.
    fn invert_noise(&self, x: &[f64], a: usize, x_next: &[f64]) -> Result<Vec<f64>, DynamicsError> {
        let _ = (x, a, x_next);
        Err(DynamicsError::NotInjective(self.name().to_string()))
    }
}

fn check_mode(m: &dyn SystemModel, a: usize) -> Result<(), DynamicsError> {
    if a >= m.num_actions() {
        return Err(DynamicsError::UnknownMode {
            mode: a,
            count: m.num_actions(),
        });
    }
    Ok(())
}

fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<(), DynamicsError> {
    if expected != got {
        return Err(DynamicsError::Dimension { what, expected, got });
    }
    Ok(())
}

/// One step of the system.
pub fn step(m: &dyn SystemModel, x: &[f64], a: usize, w: &[f64]) -> Result<Vec<f64>, DynamicsError> {
    check_mode(m, a)?;
    check_dim("state", m.state_dim(), x.len())?;
    check_dim("noise", m.noise_dim(), w.len())?;
    Ok(m.eval(x, a, w))
}

/// Box enclosure of the image of `cell` under mode `a` for a fixed noise value.
pub fn reach_over_approx(
    m: &dyn SystemModel,
    cell: &Rect,
    a: usize,
    w: &[f64],
) -> Result<Rect, DynamicsError> {
    check_mode(m, a)?;
    check_dim("cell", m.state_dim(), cell.dim())?;
    check_dim("noise", m.noise_dim(), w.len())?;
    Ok(m.reach(cell, a, &Rect::point(w)))
}

pub fn lipschitz_cell_bound(
    m: &dyn SystemModel,
    cell: &Rect,
    a: usize,
    norm: Norm,
) -> Result<f64, DynamicsError> {
    check_mode(m, a)?;
    check_dim("cell", m.state_dim(), cell.dim())?;
    Ok(m.lipschitz(cell, a, norm))
}

/// Recovers the noise that explains an observed transition, checking the
/// round trip and the support.
pub fn extract_noise(
    m: &dyn SystemModel,
    x: &[f64],
    a: usize,
    x_next: &[f64],
) -> Result<Vec<f64>, DynamicsError> {
    check_mode(m, a)?;
    check_dim("state", m.state_dim(), x.len())?;
    check_dim("successor", m.state_dim(), x_next.len())?;
    let w = m.invert_noise(x, a, x_next)?;
    if !m.noise_support().inflate(1e-9).contains_point(&w) {
        return Err(DynamicsError::NoiseOutsideSupport(w));
    }
    let back = m.eval(x, a, &w);
    let err = Norm::Inf.distance(&back, x_next);
    if err > 1e-9 * (1.0 + Norm::Inf.of(x_next)) {
        return Err(DynamicsError::Inconsistent(format!(
            "round-trip error {err:e}"
        )));
    }
    Ok(w)
}

fn intervals(r: &Rect) -> Vec<Interval> {
    r.lower
        .iter()
        .zip(&r.upper)
        .map(|(&l, &u)| Interval::new(l, u))
        .collect()
}

fn to_rect(iv: &[Interval]) -> Rect {
    Rect {
        lower: iv.iter().map(|i| i.lo).collect(),
        upper: iv.iter().map(|i| i.hi).collect(),
    }
}

/// `x' = x + shift_a + gain * w` with `w` of the state's dimension.
#[derive(Debug, Clone)]
pub struct Additive {
    name: String,
    shifts: Vec<Vec<f64>>,
    gain: f64,
    support: Rect,
}

impl Additive {
    pub fn new(
        name: impl Into<String>,
        shifts: Vec<Vec<f64>>,
        gain: f64,
        support: Rect,
    ) -> Result<Self, DynamicsError> {
        if shifts.is_empty() {
            return Err(DynamicsError::InvalidParameter("at least one mode".into()));
        }
        let n = support.dim();
        if let Some(bad) = shifts.iter().find(|s| s.len() != n) {
            return Err(DynamicsError::Dimension {
                what: "mode shift",
                expected: n,
                got: bad.len(),
            });
        }
        if !gain.is_finite() {
            return Err(DynamicsError::InvalidParameter("gain must be finite".into()));
        }
        Ok(Additive {
            name: name.into(),
            shifts,
            gain,
            support,
        })
    }

    /// Planar unicycle at constant speed: one mode per heading
    /// `2 pi a / headings`, moving `dt * speed` per step.
    pub fn unicycle_2d(p: &Unicycle2dParams) -> Result<Self, DynamicsError> {
        if p.headings == 0 {
            return Err(DynamicsError::InvalidParameter("headings must be >= 1".into()));
        }
        let shifts = (0..p.headings)
            .map(|a| {
                let th = TAU * a as f64 / p.headings as f64;
                vec![p.dt * p.speed * th.cos(), p.dt * p.speed * th.sin()]
            })
            .collect();
        Additive::new(
            "unicycle-2d",
            shifts,
            1.0,
            Rect::new(p.noise_lower.clone(), p.noise_upper.clone())
                .map_err(|e| DynamicsError::InvalidParameter(e.to_string()))?,
        )
    }
}

impl SystemModel for Additive {
    fn name(&self) -> &str {
        &self.name
    }
    fn state_dim(&self) -> usize {
        self.support.dim()
    }
    fn noise_dim(&self) -> usize {
        self.support.dim()
    }
    fn num_actions(&self) -> usize {
        self.shifts.len()
    }
    fn noise_support(&self) -> &Rect {
        &self.support
    }

    fn eval(&self, x: &[f64], a: usize, w: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.shifts[a])
            .zip(w)
            .map(|((xi, si), wi)| xi + si + self.gain * wi)
            .collect()
    }

    fn reach(&self, cell: &Rect, a: usize, noise: &Rect) -> Rect {
        // Translation of a box: the image is the box itself, so corners are exact.
        let iv: Vec<Interval> = intervals(cell)
            .into_iter()
            .zip(intervals(noise))
            .zip(&self.shifts[a])
            .map(|((xi, wi), &si)| {
                let lo = xi.lo + si + if self.gain >= 0.0 { self.gain * wi.lo } else { self.gain * wi.hi };
                let hi = xi.hi + si + if self.gain >= 0.0 { self.gain * wi.hi } else { self.gain * wi.lo };
                Interval::new(lo, hi)
            })
            .collect();
        to_rect(&iv)
    }

    fn lipschitz(&self, _cell: &Rect, _a: usize, _norm: Norm) -> f64 {
        self.gain.abs()
    }

    fn invert_noise(&self, x: &[f64], a: usize, x_next: &[f64]) -> Result<Vec<f64>, DynamicsError> {
        if self.gain == 0.0 {
            return Err(DynamicsError::NotInjective(self.name.clone()));
        }
        Ok(x.iter()
            .zip(&self.shifts[a])
            .zip(x_next)
            .map(|((xi, si), yi)| (yi - xi - si) / self.gain)
            .collect())
    }
}

/// `x'_i = c_a * x_i * w_i`: diagonal multiplicative noise.
#[derive(Debug, Clone)]
pub struct Multiplicative {
    scales: Vec<f64>,
    support: Rect,
}

impl Multiplicative {
    pub fn new(scales: Vec<f64>, support: Rect) -> Result<Self, DynamicsError> {
        if scales.is_empty() || scales.iter().any(|c| !c.is_finite()) {
            return Err(DynamicsError::InvalidParameter(
                "need at least one finite mode scale".into(),
            ));
        }
        Ok(Multiplicative { scales, support })
    }
}

impl SystemModel for Multiplicative {
    fn name(&self) -> &str {
        "multiplicative"
    }
    fn state_dim(&self) -> usize {
        self.support.dim()
    }
    fn noise_dim(&self) -> usize {
        self.support.dim()
    }
    fn num_actions(&self) -> usize {
        self.scales.len()
    }
    fn noise_support(&self) -> &Rect {
        &self.support
    }

    fn eval(&self, x: &[f64], a: usize, w: &[f64]) -> Vec<f64> {
        x.iter().zip(w).map(|(xi, wi)| self.scales[a] * xi * wi).collect()
    }

    fn reach(&self, cell: &Rect, a: usize, noise: &Rect) -> Rect {
        // Bilinear in (x_i, w_i), so each coordinate's range is attained at corners.
        let c = self.scales[a];
        let iv: Vec<Interval> = intervals(cell)
            .into_iter()
            .zip(intervals(noise))
            .map(|(xi, wi)| {
                let corners = [xi.lo * wi.lo, xi.lo * wi.hi, xi.hi * wi.lo, xi.hi * wi.hi]
                    .map(|v| c * v);
                Interval::new(
                    corners.iter().copied().fold(f64::INFINITY, f64::min),
                    corners.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                )
            })
            .collect();
        to_rect(&iv)
    }

    fn lipschitz(&self, cell: &Rect, a: usize, _norm: Norm) -> f64 {
        // diagonal Jacobian: every l-operator norm is the largest entry
        self.scales[a].abs() * Norm::Inf.of(&cell.lower).max(Norm::Inf.of(&cell.upper))
    }

    fn invert_noise(&self, x: &[f64], a: usize, x_next: &[f64]) -> Result<Vec<f64>, DynamicsError> {
        let c = self.scales[a];
        if c == 0.0 || x.iter().any(|v| *v == 0.0) {
            return Err(DynamicsError::NotInjective(self.name().into()));
        }
        Ok(x.iter().zip(x_next).map(|(xi, yi)| yi / (c * xi)).collect())
    }
}

/// Pendulum in wind, explicit Euler step of
/// `theta'' = -(g/len) sin(theta) + u_a / (m len^2) - drag * s |s| / (m len^2)`
/// with relative airspeed `s = theta_dot - w cos(theta)`.
#[derive(Debug, Clone)]
pub struct Pendulum {
    params: PendulumParams,
    support: Rect,
}

impl Pendulum {
    pub fn new(params: PendulumParams) -> Result<Self, DynamicsError> {
        if params.torques.is_empty() {
            return Err(DynamicsError::InvalidParameter("at least one torque".into()));
        }
        if !(params.dt > 0.0 && params.length > 0.0 && params.mass > 0.0 && params.drag > 0.0) {
            return Err(DynamicsError::InvalidParameter(
                "dt, length, mass and drag must be positive".into(),
            ));
        }
        let support = Rect::new(vec![params.wind_lower], vec![params.wind_upper])
            .map_err(|e| DynamicsError::InvalidParameter(e.to_string()))?;
        Ok(Pendulum { params, support })
    }

    fn inertia(&self) -> f64 {
        self.params.mass * self.params.length * self.params.length
    }

    fn drag_coeff(&self) -> f64 {
        self.params.drag / self.inertia()
    }

    /// Airspeed enclosure over a cell and a noise box.
    fn airspeed(&self, theta: Interval, omega: Interval, wind: Interval) -> Interval {
        omega - wind * theta.cos()
    }
}

impl SystemModel for Pendulum {
    fn name(&self) -> &str {
        "pendulum"
    }
    fn state_dim(&self) -> usize {
        2
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn num_actions(&self) -> usize {
        self.params.torques.len()
    }
    fn noise_support(&self) -> &Rect {
        &self.support
    }

    fn eval(&self, x: &[f64], a: usize, w: &[f64]) -> Vec<f64> {
        let p = &self.params;
        let (th, om) = (x[0], x[1]);
        let s = om - w[0] * th.cos();
        let acc = -(p.gravity / p.length) * th.sin() + p.torques[a] / self.inertia()
            - self.drag_coeff() * s * s.abs();
        vec![th + p.dt * om, om + p.dt * acc]
    }

    fn reach(&self, cell: &Rect, a: usize, noise: &Rect) -> Rect {
        let p = &self.params;
        let th = Interval::new(cell.lower[0], cell.upper[0]);
        let om = Interval::new(cell.lower[1], cell.upper[1]);
        let wind = Interval::new(noise.lower[0], noise.upper[0]);
        // theta' is affine with independent coordinates: exact corners
        let th_next = th + om.scale(p.dt);
        let s = self.airspeed(th, om, wind);
        let acc = th.sin().scale(-(p.gravity / p.length))
            + Interval::point(p.torques[a] / self.inertia())
            - s.signed_square().scale(self.drag_coeff());
        let om_next = om + acc.scale(p.dt);
        to_rect(&[th_next, om_next])
    }

    fn lipschitz(&self, cell: &Rect, _a: usize, _norm: Norm) -> f64 {
        // only omega' depends on w: |d omega'/dw| = dt * k * 2 |s| |cos theta|
        let th = Interval::new(cell.lower[0], cell.upper[0]);
        let om = Interval::new(cell.lower[1], cell.upper[1]);
        let wind = Interval::new(self.support.lower[0], self.support.upper[0]);
        let s = self.airspeed(th, om, wind);
        (self.params.dt * self.drag_coeff() * 2.0 * s.mag() * th.cos().mag()).next_up()
    }

    fn invert_noise(&self, x: &[f64], a: usize, x_next: &[f64]) -> Result<Vec<f64>, DynamicsError> {
        let p = &self.params;
        let (th, om) = (x[0], x[1]);
        let c = th.cos();
        if c.abs() < 1e-12 {
            return Err(DynamicsError::NotInjective("pendulum at horizontal angle".into()));
        }
        let th_err = (x_next[0] - (th + p.dt * om)).abs();
        if th_err > 1e-9 * (1.0 + x_next[0].abs()) {
            return Err(DynamicsError::Inconsistent(format!(
                "angle update off by {th_err:e}"
            )));
        }
        let drift = -(p.gravity / p.length) * th.sin() + p.torques[a] / self.inertia();
        // s |s| = (drift - (omega' - omega) / dt) / k
        let ss = (drift - (x_next[1] - om) / p.dt) / self.drag_coeff();
        let s = ss.signum() * ss.abs().sqrt();
        Ok(vec![(om - s) / c])
    }
}

/// Unicycle with heading state, modes over (speed, turn rate) and the noise
/// perturbing the linear speed (a friction stand-in).
#[derive(Debug, Clone)]
pub struct Unicycle3d {
    modes: Vec<(f64, f64)>,
    dt: f64,
    support: Rect,
}

impl Unicycle3d {
    pub fn new(p: &Unicycle3dParams) -> Result<Self, DynamicsError> {
        if p.speeds.is_empty() || p.turn_rates.is_empty() || !(p.dt > 0.0) {
            return Err(DynamicsError::InvalidParameter(
                "need speeds, turn rates and a positive dt".into(),
            ));
        }
        let modes = p
            .speeds
            .iter()
            .flat_map(|&v| p.turn_rates.iter().map(move |&om| (v, om)))
            .collect();
        let support = Rect::new(vec![p.noise_lower], vec![p.noise_upper])
            .map_err(|e| DynamicsError::InvalidParameter(e.to_string()))?;
        Ok(Unicycle3d {
            modes,
            dt: p.dt,
            support,
        })
    }
}

impl SystemModel for Unicycle3d {
    fn name(&self) -> &str {
        "unicycle-3d"
    }
    fn state_dim(&self) -> usize {
        3
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn num_actions(&self) -> usize {
        self.modes.len()
    }
    fn noise_support(&self) -> &Rect {
        &self.support
    }

    fn eval(&self, x: &[f64], a: usize, w: &[f64]) -> Vec<f64> {
        let (v, om) = self.modes[a];
        let speed = v + w[0];
        vec![
            x[0] + self.dt * speed * x[2].cos(),
            x[1] + self.dt * speed * x[2].sin(),
            x[2] + self.dt * om,
        ]
    }

    fn reach(&self, cell: &Rect, a: usize, noise: &Rect) -> Rect {
        let (v, om) = self.modes[a];
        let iv = intervals(cell);
        let speed = Interval::new(v + noise.lower[0], v + noise.upper[0]).scale(self.dt);
        to_rect(&[
            iv[0] + speed * iv[2].cos(),
            iv[1] + speed * iv[2].sin(),
            iv[2] + Interval::point(self.dt * om),
        ])
    }

    fn lipschitz(&self, cell: &Rect, _a: usize, norm: Norm) -> f64 {
        let th = Interval::new(cell.lower[2], cell.upper[2]);
        let (c, s) = (th.cos().mag(), th.sin().mag());
        let gain = match norm {
            Norm::L2 => 1.0,
            Norm::L1 => (c + s).min(std::f64::consts::SQRT_2),
            Norm::Inf => c.max(s),
        };
        (self.dt * gain).next_up()
    }

    fn invert_noise(&self, x: &[f64], a: usize, x_next: &[f64]) -> Result<Vec<f64>, DynamicsError> {
        let (v, _) = self.modes[a];
        let (c, s) = (x[2].cos(), x[2].sin());
        let speed = if c.abs() >= s.abs() {
            (x_next[0] - x[0]) / (self.dt * c)
        } else {
            (x_next[1] - x[1]) / (self.dt * s)
        };
        Ok(vec![speed - v])
    }
}

fn default_pendulum_torques() -> Vec<f64> {
    vec![-4.0, -2.0, 0.0, 2.0, 4.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PendulumParams {
    pub dt: f64,
    pub gravity: f64,
    pub length: f64,
    pub mass: f64,
    pub drag: f64,
    pub torques: Vec<f64>,
    pub wind_lower: f64,
    pub wind_upper: f64,
}

impl Default for PendulumParams {
    fn default() -> Self {
        PendulumParams {
            dt: 0.05,
            gravity: 9.81,
            length: 1.0,
            mass: 1.0,
            drag: 0.5,
            torques: default_pendulum_torques(),
            wind_lower: -1.0,
            wind_upper: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Unicycle2dParams {
    pub dt: f64,
    pub speed: f64,
    pub headings: usize,
    pub noise_lower: Vec<f64>,
    pub noise_upper: Vec<f64>,
}

impl Default for Unicycle2dParams {
    fn default() -> Self {
        Unicycle2dParams {
            dt: 0.1,
            speed: 1.0,
            headings: 8,
            noise_lower: vec![-0.05, -0.05],
            noise_upper: vec![0.05, 0.05],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Unicycle3dParams {
    pub dt: f64,
    pub speeds: Vec<f64>,
    pub turn_rates: Vec<f64>,
    pub noise_lower: f64,
    pub noise_upper: f64,
}

impl Default for Unicycle3dParams {
    fn default() -> Self {
        Unicycle3dParams {
            dt: 0.1,
            speeds: vec![0.5, 1.0],
            turn_rates: vec![-1.0, -0.5, 0.0, 0.5, 1.0],
            noise_lower: -0.2,
            noise_upper: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdditiveParams {
    pub shifts: Vec<Vec<f64>>,
    pub gain: f64,
    pub noise_lower: Vec<f64>,
    pub noise_upper: Vec<f64>,
}

impl Default for AdditiveParams {
    fn default() -> Self {
        AdditiveParams {
            shifts: vec![vec![-0.25], vec![0.0], vec![0.25]],
            gain: 1.0,
            noise_lower: vec![-0.2],
            noise_upper: vec![0.2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MultiplicativeParams {
    pub scales: Vec<f64>,
    pub noise_lower: Vec<f64>,
    pub noise_upper: Vec<f64>,
}

impl Default for MultiplicativeParams {
    fn default() -> Self {
        MultiplicativeParams {
            scales: vec![1.0],
            noise_lower: vec![0.5],
            noise_upper: vec![1.05],
        }
    }
}

/// Benchmark preset selection as it appears in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", content = "params", rename_all = "kebab-case")]
pub enum SystemSpec {
    Additive(#[serde(default)] AdditiveParams),
    Multiplicative(#[serde(default)] MultiplicativeParams),
    #[serde(rename = "pendulum")]
    Pendulum(#[serde(default)] PendulumParams),
    #[serde(rename = "unicycle-2d")]
    Unicycle2d(#[serde(default)] Unicycle2dParams),
    #[serde(rename = "unicycle-3d")]
    Unicycle3d(#[serde(default)] Unicycle3dParams),
}

impl SystemSpec {
    pub fn build(&self) -> Result<Arc<dyn SystemModel>, DynamicsError> {
        let rect = |lo: &Vec<f64>, hi: &Vec<f64>| {
            Rect::new(lo.clone(), hi.clone()).map_err(|e| DynamicsError::InvalidParameter(e.to_string()))
        };
        Ok(match self {
            SystemSpec::Additive(p) => Arc::new(Additive::new(
                "additive",
                p.shifts.clone(),
                p.gain,
                rect(&p.noise_lower, &p.noise_upper)?,
            )?),
            SystemSpec::Multiplicative(p) => Arc::new(Multiplicative::new(
                p.scales.clone(),
                rect(&p.noise_lower, &p.noise_upper)?,
            )?),
            SystemSpec::Pendulum(p) => Arc::new(Pendulum::new(p.clone())?),
            SystemSpec::Unicycle2d(p) => Arc::new(Additive::unicycle_2d(p)?),
            SystemSpec::Unicycle3d(p) => Arc::new(Unicycle3d::new(p)?),
        })
    }
}

/// Simulable stand-in for the unknown noise law, always supported on `W`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseLaw {
    Uniform,
    /// Independent Gaussian coordinates conditioned on `W` (by rejection).
    TruncatedGaussian { mean: Vec<f64>, std: Vec<f64> },
    FiniteMixture { components: Vec<MixtureComponent> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Ground-truth noise used for sampling data and for validation runs.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthNoise {
    law: NoiseLaw,
    support: Rect,
}

const MAX_REJECTIONS: usize = 1_000_000;

impl GroundTruthNoise {
    pub fn new(law: NoiseLaw, support: Rect) -> Result<Self, DynamicsError> {
        let d = support.dim();
        let check_gauss = |mean: &[f64], std: &[f64]| -> Result<(), DynamicsError> {
            check_dim("mean", d, mean.len())?;
            check_dim("std", d, std.len())?;
            if std.iter().any(|s| !(*s > 0.0)) {
                return Err(DynamicsError::InvalidParameter("std must be positive".into()));
            }
            Ok(())
        };
        match &law {
            NoiseLaw::Uniform => {}
            NoiseLaw::TruncatedGaussian { mean, std } => check_gauss(mean, std)?,
            NoiseLaw::FiniteMixture { components } => {
                if components.is_empty() {
                    return Err(DynamicsError::InvalidParameter("empty mixture".into()));
                }
                for c in components {
                    check_gauss(&c.mean, &c.std)?;
                    if !(c.weight > 0.0) {
                        return Err(DynamicsError::InvalidParameter(
                            "mixture weights must be positive".into(),
                        ));
                    }
                }
            }
        }
        Ok(GroundTruthNoise { law, support })
    }

    pub fn support(&self) -> &Rect {
        &self.support
    }

    pub fn law(&self) -> &NoiseLaw {
        &self.law
    }

    fn gaussian_in_support<R: Rng + ?Sized>(&self, mean: &[f64], std: &[f64], rng: &mut R) -> Vec<f64> {
        let normals: Vec<Normal<f64>> = mean
            .iter()
            .zip(std)
            .map(|(&m, &s)| Normal::new(m, s).expect("validated std"))
            .collect();
        for _ in 0..MAX_REJECTIONS {
            let w: Vec<f64> = normals.iter().map(|n| n.sample(rng)).collect();
            if self.support.contains_point(&w) {
                return w;
            }
        }
        // Negligible acceptance: fall back to the nearest point of W.
        mean.iter()
            .enumerate()
            .map(|(i, m)| m.clamp(self.support.lower[i], self.support.upper[i]))
            .collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.law {
            NoiseLaw::Uniform => (0..self.support.dim())
                .map(|i| {
                    let (lo, hi) = (self.support.lower[i], self.support.upper[i]);
                    if hi > lo {
                        rng.random_range(lo..=hi)
                    } else {
                        lo
                    }
                })
                .collect(),
            NoiseLaw::TruncatedGaussian { mean, std } => self.gaussian_in_support(mean, std, rng),
            NoiseLaw::FiniteMixture { components } => {
                let total: f64 = components.iter().map(|c| c.weight).sum();
                let mut u = rng.random::<f64>() * total;
                let mut pick = components.len() - 1;
                for (i, c) in components.iter().enumerate() {
                    if u < c.weight {
                        pick = i;
                        break;
                    }
                    u -= c.weight;
                }
                let c = &components[pick];
                self.gaussian_in_support(&c.mean, &c.std, rng)
            }
        }
    }

    pub fn sample_n<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn additive_1d(gain: f64) -> Additive {
        Additive::new(
            "additive",
            vec![vec![0.0]],
            gain,
            Rect::new(vec![-1.0], vec![1.0]).unwrap(),
        )
        .unwrap()
    }

    fn mult_1d() -> Multiplicative {
        Multiplicative::new(vec![1.0], Rect::new(vec![0.25], vec![1.5]).unwrap()).unwrap()
    }

    #[test]
    fn step_examples() {
        let m = additive_1d(1.0);
        assert_eq!(step(&m, &[0.5], 0, &[0.25]).unwrap(), vec![0.75]);
        assert!(matches!(
            step(&m, &[0.5], 3, &[0.0]),
            Err(DynamicsError::UnknownMode { mode: 3, count: 1 })
        ));

        let pend = Pendulum::new(PendulumParams::default()).unwrap();
        let zero_torque = PendulumParams::default()
            .torques
            .iter()
            .position(|t| *t == 0.0)
            .unwrap();
        assert_eq!(step(&pend, &[0.0, 0.0], zero_torque, &[0.0]).unwrap(), vec![0.0, 0.0]);

        let uni = Additive::unicycle_2d(&Unicycle2dParams::default()).unwrap();
        let next = step(&uni, &[0.3, 0.7], 0, &[0.0, 0.0]).unwrap();
        assert!((next[0] - 0.4).abs() < 1e-15);
        assert!((next[1] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn reach_examples() {
        let m = additive_1d(1.0);
        let cell = Rect::new(vec![0.0], vec![0.5]).unwrap();
        assert_eq!(
            reach_over_approx(&m, &cell, 0, &[1.0]).unwrap(),
            Rect::new(vec![1.0], vec![1.5]).unwrap()
        );
        let mm = mult_1d();
        let cell = Rect::new(vec![1.0], vec![2.0]).unwrap();
        assert_eq!(
            reach_over_approx(&mm, &cell, 0, &[0.5]).unwrap(),
            Rect::new(vec![0.5], vec![1.0]).unwrap()
        );
    }

    #[test]
    fn lipschitz_examples() {
        let cell = Rect::new(vec![1.0], vec![2.0]).unwrap();
        assert_eq!(lipschitz_cell_bound(&additive_1d(1.0), &cell, 0, Norm::Inf).unwrap(), 1.0);
        assert_eq!(lipschitz_cell_bound(&additive_1d(2.0), &cell, 0, Norm::Inf).unwrap(), 2.0);
        assert_eq!(lipschitz_cell_bound(&mult_1d(), &cell, 0, Norm::Inf).unwrap(), 2.0);
    }

    #[test]
    fn extract_examples() {
        let m = additive_1d(1.0);
        assert_eq!(extract_noise(&m, &[0.5], 0, &[0.75]).unwrap(), vec![0.25]);
        let mm = mult_1d();
        assert_eq!(extract_noise(&mm, &[2.0], 0, &[1.0]).unwrap(), vec![0.5]);
        assert!(matches!(
            extract_noise(&mm, &[0.0], 0, &[0.0]),
            Err(DynamicsError::NotInjective(_))
        ));
        assert!(matches!(
            extract_noise(&mm, &[1.0], 0, &[3.0]),
            Err(DynamicsError::NoiseOutsideSupport(_))
        ));
    }

    #[test]
    fn pendulum_round_trip() {
        let pend = Pendulum::new(PendulumParams::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let x = [rng.random_range(-1.2..1.2), rng.random_range(-2.0..2.0)];
            let w = [rng.random_range(-1.0..1.0)];
            let a = rng.random_range(0..pend.num_actions());
            let next = pend.eval(&x, a, &w);
            let back = extract_noise(&pend, &x, a, &next).unwrap();
            assert!((back[0] - w[0]).abs() < 1e-6, "{back:?} vs {w:?}");
        }
        assert!(matches!(
            extract_noise(&pend, &[0.0, 0.0], 0, &[0.5, 0.0]),
            Err(DynamicsError::Inconsistent(_))
        ));
    }

    #[test]
    fn unicycle_3d_round_trip() {
        let m = Unicycle3d::new(&Unicycle3dParams::default()).unwrap();
        assert_eq!(m.num_actions(), 10);
        let x = [0.2, -0.3, 2.0];
        let next = m.eval(&x, 7, &[-0.1]);
        let w = extract_noise(&m, &x, 7, &next).unwrap();
        assert!((w[0] + 0.1).abs() < 1e-12);
    }

    #[test]
    fn noise_stays_in_support() {
        let support = Rect::new(vec![-0.5, 0.0], vec![0.5, 0.2]).unwrap();
        let laws = [
            NoiseLaw::Uniform,
            NoiseLaw::TruncatedGaussian {
                mean: vec![0.4, 0.1],
                std: vec![0.3, 0.5],
            },
            NoiseLaw::FiniteMixture {
                components: vec![
                    MixtureComponent {
                        weight: 0.3,
                        mean: vec![-0.4, 0.0],
                        std: vec![0.1, 0.1],
                    },
                    MixtureComponent {
                        weight: 0.7,
                        mean: vec![0.3, 0.2],
                        std: vec![0.2, 0.05],
                    },
                ],
            },
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for law in laws {
            let g = GroundTruthNoise::new(law, support.clone()).unwrap();
            for w in g.sample_n(2000, &mut rng) {
                assert!(support.contains_point(&w));
            }
        }
        assert!(GroundTruthNoise::new(
            NoiseLaw::TruncatedGaussian {
                mean: vec![0.0],
                std: vec![1.0]
            },
            support
        )
        .is_err());
    }

    #[test]
    fn preset_json() {
        let spec: SystemSpec = serde_json::from_str(r#"{"preset":"pendulum","params":{}}"#).unwrap();
        assert_eq!(spec, SystemSpec::Pendulum(PendulumParams::default()));
        let spec: SystemSpec =
            serde_json::from_str(r#"{"preset":"additive","params":{"gain":2.0}}"#).unwrap();
        let m = spec.build().unwrap();
        assert_eq!(m.num_actions(), 3);
        assert_eq!(m.lipschitz(&Rect::point(&[0.0]), 0, Norm::Inf), 2.0);
    }
}
