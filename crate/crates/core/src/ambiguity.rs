//! Wasserstein ambiguity sets learned from noise samples.
//!
//! Given `N` i.i.d. samples of the noise on a bounded support `W` (with
//! `inf`-norm diameter `phi`), the ball of radius
//!
//! ```text
//! eps(N, beta) = g(N, phi, d, s, l)^(1/s) + phi * sqrt(d) * (2 ln(1/beta))^(1/(2s)) * N^(-1/(2s))
//! ```
//!
//! around the empirical distribution contains the true law with confidence
//! `1 - beta`. Here `g` bounds the expected transport cost between the true
//! law and its empirical estimate. Only the `(s = 1, l = inf)` regime ships a
//! built-in `g`; other regimes need an explicit override.
//!
//! The empirical distribution can be compressed with [`cluster`]. The
//! returned inflation bounds the Wasserstein distance between the empirical
//! and the clustered distribution, so `eps + inflation` is a valid radius
//! around the clustered center.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

use crate::geometry::{Norm, Rect};

#[derive(Debug, Error)]
pub enum AmbiguityError {
    #[error("confidence parameter beta must lie in (0, 1), got {0}")]
    InvalidBeta(f64),
    #[error("sample count must be at least 1")]
    NoSamples,
    #[error("sample {index} has dimension {got}, expected {expected}")]
    SampleDimension {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("sample {index} lies outside the noise support")]
    SampleOutsideSupport { index: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported regime s={s}, l={norm}: provide an explicit bound override")]
    UnsupportedRegime { s: u32, norm: Norm },
    #[error("cluster count k={k} must lie in 1..={n}")]
    InvalidClusterCount { k: usize, n: usize },
    #[error("k-means produced an empty cluster after {0} reseeding attempts")]
    EmptyCluster(usize),
    #[error("weights must be nonnegative and sum to 1 (sum = {0})")]
    BadWeights(f64),
    #[error("malformed sample file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Noise samples together with their declared support `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    samples: Vec<Vec<f64>>,
    support: Rect,
}

impl SampleSet {
    pub fn new(samples: Vec<Vec<f64>>, support: Rect) -> Result<Self, AmbiguityError> {
        support
            .validate()
            .map_err(|e| AmbiguityError::InvalidParameter(e.to_string()))?;
        if samples.is_empty() {
            return Err(AmbiguityError::NoSamples);
        }
        let d = support.dim();
        for (index, w) in samples.iter().enumerate() {
            if w.len() != d {
                return Err(AmbiguityError::SampleDimension {
                    index,
                    expected: d,
                    got: w.len(),
                });
            }
            if !support.contains_point(w) {
                return Err(AmbiguityError::SampleOutsideSupport { index });
            }
        }
        Ok(SampleSet { samples, support })
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn support(&self) -> &Rect {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.support.dim()
    }

    /// `inf`-norm diameter of the declared support (not of the sample cloud).
    pub fn support_diameter(&self) -> f64 {
        support_diameter(&self.support)
    }
}

pub fn support_diameter(support: &Rect) -> f64 {
    (0..support.dim())
        .map(|i| support.width(i))
        .fold(0.0, f64::max)
}

/// Finitely supported distribution on `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution {
    pub atoms: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self, AmbiguityError> {
        let dist = DiscreteDistribution { atoms, weights };
        dist.validate()?;
        Ok(dist)
    }

    pub fn validate(&self) -> Result<(), AmbiguityError> {
        if self.atoms.is_empty() {
            return Err(AmbiguityError::NoSamples);
        }
        if self.atoms.len() != self.weights.len() {
            return Err(AmbiguityError::InvalidParameter(
                "atom and weight counts differ".into(),
            ));
        }
        let sum: f64 = self.weights.iter().sum();
        if self.weights.iter().any(|w| *w < 0.0 || !w.is_finite()) || (sum - 1.0).abs() > 1e-12 {
            return Err(AmbiguityError::BadWeights(sum));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

/// Empirical distribution of the samples; equal samples are merged and their
/// weights summed. Atoms keep the order of first appearance.
pub fn empirical_distribution(ss: &SampleSet) -> DiscreteDistribution {
    let n = ss.len() as f64;
    let mut atoms: Vec<Vec<f64>> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    let mut index: std::collections::HashMap<Vec<u64>, usize> = std::collections::HashMap::new();
    for w in ss.samples() {
        let key: Vec<u64> = w.iter().map(|v| (v + 0.0).to_bits()).collect();
        match index.get(&key) {
            Some(&i) => counts[i] += 1,
            None => {
                index.insert(key, atoms.len());
                atoms.push(w.clone());
                counts.push(1);
            }
        }
    }
    let weights = counts.iter().map(|&c| c as f64 / n).collect();
    DiscreteDistribution { atoms, weights }
}

fn check_beta(beta: f64) -> Result<(), AmbiguityError> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(AmbiguityError::InvalidBeta(beta))
    }
}

/// Deviation term `phi * (2 ln(1/beta))^(1/(2s)) * N^(-1/(2s))`; the `sqrt(d)`
/// factor is applied by [`radius`].
pub fn concentration_tail(n: usize, beta: f64, phi: f64, s: u32) -> Result<f64, AmbiguityError> {
    check_beta(beta)?;
    if n == 0 {
        return Err(AmbiguityError::NoSamples);
    }
    if !(phi > 0.0) {
        return Err(AmbiguityError::InvalidParameter(format!(
            "support diameter must be positive, got {phi}"
        )));
    }
    if s == 0 {
        return Err(AmbiguityError::InvalidParameter("order s must be >= 1".into()));
    }
    let exponent = 1.0 / (2.0 * s as f64);
    Ok(phi * (2.0 * (1.0 / beta).ln()).powf(exponent) * (n as f64).powf(-exponent))
}

/// Default constant in the expected-transport bound.
pub const DEFAULT_TRANSPORT_CONSTANT: f64 = 2.0;

/// Upper bound `g` on the expected transport cost between the true law and
/// the empirical distribution of `n` samples.
///
/// Only `s = 1` with the `inf`-norm is built in:
/// `g = C * phi * sqrt(d) * r(N, d)` where `r` is `N^(-1/2)` for `d = 1`,
/// `N^(-1/2) log2(2 + N)` for `d = 2` and `N^(-1/d)` for `d >= 3`.
pub fn mean_transport_bound(
    n: usize,
    phi: f64,
    d: usize,
    s: u32,
    norm: Norm,
    constant: f64,
) -> Result<f64, AmbiguityError> {
    if n == 0 {
        return Err(AmbiguityError::NoSamples);
    }
    if d == 0 || s == 0 {
        return Err(AmbiguityError::InvalidParameter(
            "dimension and order must be >= 1".into(),
        ));
    }
    if s != 1 || norm != Norm::Inf {
        return Err(AmbiguityError::UnsupportedRegime { s, norm });
    }
    if !(constant > 0.0) || !(phi >= 0.0) {
        return Err(AmbiguityError::InvalidParameter(
            "constant must be positive and phi nonnegative".into(),
        ));
    }
    let nf = n as f64;
    let rate = match d {
        1 => nf.powf(-0.5),
        2 => nf.powf(-0.5) * (2.0 + nf).log2(),
        _ => nf.powf(-1.0 / d as f64),
    };
    Ok(constant * phi * (d as f64).sqrt() * rate)
}

/// Parameters of the ambiguity radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusParams {
    pub n: usize,
    pub beta: f64,
    pub phi: f64,
    pub d: usize,
    pub s: u32,
    pub norm: Norm,
    /// Constant `C` of the built-in expected-transport bound.
    pub constant: f64,
    /// Replaces the built-in expected-transport bound when present.
    pub g_override: Option<f64>,
}

/// Ambiguity radius `eps(N, beta)`.
pub fn radius(p: &RadiusParams) -> Result<f64, AmbiguityError> {
    let g = match p.g_override {
        Some(g) if g >= 0.0 && g.is_finite() => g,
        Some(g) => {
            return Err(AmbiguityError::InvalidParameter(format!(
                "bound override must be a finite nonnegative number, got {g}"
            )))
        }
        None => mean_transport_bound(p.n, p.phi, p.d, p.s, p.norm, p.constant)?,
    };
    let tail = concentration_tail(p.n, p.beta, p.phi, p.s)?;
    Ok(g.powf(1.0 / p.s as f64) + (p.d as f64).sqrt() * tail)
}

/// Wasserstein ball around a discrete center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguityBall {
    pub atoms: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub radius: f64,
    pub s: u32,
    pub l: Norm,
    pub beta: f64,
}

impl AmbiguityBall {
    pub fn new(
        center: DiscreteDistribution,
        radius: f64,
        s: u32,
        l: Norm,
        beta: f64,
    ) -> Result<Self, AmbiguityError> {
        center.validate()?;
        check_beta(beta)?;
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(AmbiguityError::InvalidParameter(format!(
                "radius must be finite and nonnegative, got {radius}"
            )));
        }
        if s == 0 {
            return Err(AmbiguityError::InvalidParameter("order s must be >= 1".into()));
        }
        Ok(AmbiguityBall {
            atoms: center.atoms,
            weights: center.weights,
            radius,
            s,
            l,
            beta,
        })
    }

    pub fn center(&self) -> DiscreteDistribution {
        DiscreteDistribution {
            atoms: self.atoms.clone(),
            weights: self.weights.clone(),
        }
    }
}

/// Settings for [`cluster`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterOptions {
    pub k: usize,
    pub seed: u64,
    pub norm: Norm,
    pub s: u32,
    pub max_iter: usize,
    pub tol: f64,
    pub max_reseeds: usize,
}

impl ClusterOptions {
    pub fn new(k: usize, seed: u64, norm: Norm, s: u32) -> Self {
        ClusterOptions {
            k,
            seed,
            norm,
            s,
            max_iter: 200,
            tol: 1e-10,
            max_reseeds: 10,
        }
    }
}

/// Result of compressing an empirical distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub distribution: DiscreteDistribution,
    /// Upper bound on the Wasserstein distance to the empirical distribution.
    pub inflation: f64,
    pub assignment: Vec<usize>,
}

/// Seeded k-means (k-means++ initialisation) in the chosen norm geometry.
///
/// For the 2-norm centroids are means; for the 1- and `inf`-norms they are
/// coordinate-wise medians. The inflation is the cost of the coupling that
/// sends every sample to its centroid:
/// `((1/N) sum_i ||w_i - c(i)||^s)^(1/s)`.
pub fn cluster(ss: &SampleSet, opts: &ClusterOptions) -> Result<Clustering, AmbiguityError> {
    let n = ss.len();
    if opts.k == 0 || opts.k > n {
        return Err(AmbiguityError::InvalidClusterCount { k: opts.k, n });
    }
    // with no more distinct samples than clusters the empirical
    // distribution itself is the answer; k-means would leave clusters empty
    let emp = empirical_distribution(ss);
    if emp.len() <= opts.k {
        let assignment = ss
            .samples()
            .iter()
            .map(|w| emp.atoms.iter().position(|a| a == w).expect("sample is an atom"))
            .collect();
        return Ok(Clustering {
            distribution: emp,
            inflation: 0.0,
            assignment,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _attempt in 0..=opts.max_reseeds {
        let init = kmeanspp_init(ss.samples(), opts.k, opts.norm, &mut rng);
        if let Some((centroids, assignment)) = lloyd(ss.samples(), init, opts) {
            let mut weights = vec![0.0; opts.k];
            for &c in &assignment {
                weights[c] += 1.0;
            }
            let weights: Vec<f64> = weights.iter().map(|w| w / n as f64).collect();
            let total: f64 = ss
                .samples()
                .iter()
                .zip(&assignment)
                .map(|(w, &c)| opts.norm.distance(w, &centroids[c]).powi(opts.s as i32))
                .sum();
            let inflation = (total / n as f64).powf(1.0 / opts.s as f64);
            return Ok(Clustering {
                distribution: DiscreteDistribution {
                    atoms: centroids,
                    weights,
                },
                inflation,
                assignment,
            });
        }
    }
    Err(AmbiguityError::EmptyCluster(opts.max_reseeds))
}

fn kmeanspp_init(samples: &[Vec<f64>], k: usize, norm: Norm, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = samples.len();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = samples
        .iter()
        .map(|w| norm.distance(w, &samples[chosen[0]]).powi(2))
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &v) in d2.iter().enumerate() {
                if v > 0.0 && target < v {
                    pick = i;
                    break;
                }
                target -= v;
            }
            if d2[pick] == 0.0 {
                // rounding pushed past the last positive entry
                pick = (0..n).rev().find(|&i| d2[i] > 0.0).unwrap_or(pick);
            }
            pick
        } else {
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            *free.choose(rng).unwrap_or(&0)
        };
        chosen.push(next);
        for (i, w) in samples.iter().enumerate() {
            d2[i] = d2[i].min(norm.distance(w, &samples[next]).powi(2));
        }
    }
    chosen.into_iter().map(|i| samples[i].clone()).collect()
}

fn nearest(w: &[f64], centroids: &[Vec<f64>], norm: Norm) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, x) in centroids.iter().enumerate() {
        let d = norm.distance(w, x);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let m = values.len();
    if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    }
}

/// Lloyd iterations; `None` when a cluster empties.
fn lloyd(
    samples: &[Vec<f64>],
    mut centroids: Vec<Vec<f64>>,
    opts: &ClusterOptions,
) -> Option<(Vec<Vec<f64>>, Vec<usize>)> {
    let d = samples[0].len();
    let k = centroids.len();
    let mut assignment: Vec<usize> = samples
        .iter()
        .map(|w| nearest(w, &centroids, opts.norm))
        .collect();
    for _ in 0..opts.max_iter {
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (i, &c) in assignment.iter().enumerate() {
            members[c].push(i);
        }
        if members.iter().any(|m| m.is_empty()) {
            return None;
        }
        let updated: Vec<Vec<f64>> = members
            .iter()
            .map(|m| {
                (0..d)
                    .map(|axis| match opts.norm {
                        Norm::L2 => m.iter().map(|&i| samples[i][axis]).sum::<f64>() / m.len() as f64,
                        Norm::L1 | Norm::Inf => {
                            let mut col: Vec<f64> = m.iter().map(|&i| samples[i][axis]).collect();
                            median(&mut col)
                        }
                    })
                    .collect()
            })
            .collect();
        let shift = centroids
            .iter()
            .zip(&updated)
            .map(|(a, b)| Norm::Inf.distance(a, b))
            .fold(0.0, f64::max);
        centroids = updated;
        assignment = samples
            .iter()
            .map(|w| nearest(w, &centroids, opts.norm))
            .collect();
        if shift <= opts.tol {
            break;
        }
    }
    let mut used = vec![false; k];
    for &c in &assignment {
        used[c] = true;
    }
    if used.iter().all(|u| *u) {
        Some((centroids, assignment))
    } else {
        None
    }
}

/// Reads samples from CSV: one row per sample, optional header row.
pub fn read_samples_csv<R: Read>(reader: R) -> Result<Vec<Vec<f64>>, AmbiguityError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let parsed: Result<Vec<f64>, _> = record.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if line == 0 => continue,
            Err(e) => return Err(AmbiguityError::Format(format!("row {}: {e}", line + 1))),
        }
    }
    if let Some(first) = rows.first() {
        let d = first.len();
        if let Some(bad) = rows.iter().position(|r| r.len() != d) {
            return Err(AmbiguityError::SampleDimension {
                index: bad,
                expected: d,
                got: rows[bad].len(),
            });
        }
    }
    Ok(rows)
}

pub fn write_samples_csv<W: Write>(writer: W, samples: &[Vec<f64>]) -> Result<(), AmbiguityError> {
    let mut wtr = csv::Writer::from_writer(writer);
    for s in samples {
        wtr.write_record(s.iter().map(|v| v.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads the binary sample format: `N` and `d` as little-endian `u32`,
/// followed by `N * d` little-endian `f64` values in row order.
pub fn read_samples_binary<R: Read>(mut reader: R) -> Result<Vec<Vec<f64>>, AmbiguityError> {
    let mut header = [0u8; 8];
    reader.read_exact(&mut header)?;
    let n = u32::from_le_bytes(header[0..4].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    if d == 0 {
        return Err(AmbiguityError::Format("zero noise dimension".into()));
    }
    let mut body = Vec::new();
    reader.read_to_end(&mut body)?;
    if body.len() != n * d * 8 {
        return Err(AmbiguityError::Format(format!(
            "expected {} bytes of samples, found {}",
            n * d * 8,
            body.len()
        )));
    }
    Ok(body
        .chunks_exact(8 * d)
        .map(|row| {
            row.chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect()
        })
        .collect())
}

pub fn write_samples_binary<W: Write>(mut writer: W, samples: &[Vec<f64>]) -> Result<(), AmbiguityError> {
    let d = samples.first().map_or(0, |s| s.len());
    writer.write_all(&(samples.len() as u32).to_le_bytes())?;
    writer.write_all(&(d as u32).to_le_bytes())?;
    for s in samples {
        for v in s {
            writer.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Loads samples from a `.csv` file or the binary format (any other extension).
pub fn load_samples(path: &Path) -> Result<Vec<Vec<f64>>, AmbiguityError> {
    let file = std::fs::File::open(path)?;
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        read_samples_csv(std::io::BufReader::new(file))
    } else {
        read_samples_binary(std::io::BufReader::new(file))
    }
}
