//! Small benchmark instances shared by the integration tests.

use std::sync::Arc;

use drsynth::ambiguity::{empirical_distribution, DiscreteDistribution, SampleSet};
use drsynth::dynamics::{GroundTruthNoise, NoiseLaw, SystemModel, SystemSpec};
use drsynth::geometry::{Partition, Rect};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

pub fn spec(v: serde_json::Value) -> Arc<dyn SystemModel> {
    serde_json::from_value::<SystemSpec>(v).unwrap().build().unwrap()
}

pub fn additive_1d() -> Arc<dyn SystemModel> {
    spec(json!({"preset": "additive", "params": {
        "shifts": [[-0.25], [0.0], [0.25]], "gain": 1.0,
        "noise_lower": [-0.2], "noise_upper": [0.2]
    }}))
}

pub fn multiplicative_1d() -> Arc<dyn SystemModel> {
    spec(json!({"preset": "multiplicative", "params": {
        "scales": [0.8, 1.0, 1.2], "noise_lower": [0.5], "noise_upper": [1.05]
    }}))
}

pub fn unicycle_2d() -> Arc<dyn SystemModel> {
    spec(json!({"preset": "unicycle-2d", "params": {
        "dt": 0.1, "speed": 1.0, "headings": 8,
        "noise_lower": [-0.03, -0.03], "noise_upper": [0.03, 0.03]
    }}))
}

pub fn grid(lower: &[f64], upper: &[f64], cuts: &[usize]) -> Partition {
    Partition::build_grid(Rect::new(lower.to_vec(), upper.to_vec()).unwrap(), cuts.to_vec()).unwrap()
}

pub fn gaussian(m: &dyn SystemModel, std: f64) -> GroundTruthNoise {
    let w = m.noise_support().clone();
    let mean = w.center();
    let std = (0..w.dim()).map(|i| std * w.width(i)).collect();
    GroundTruthNoise::new(NoiseLaw::TruncatedGaussian { mean, std }, w).unwrap()
}

/// `n` samples of the ground truth and their empirical distribution.
pub fn empirical(noise: &GroundTruthNoise, n: usize, seed: u64) -> (SampleSet, DiscreteDistribution) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ss = SampleSet::new(noise.sample_n(n, &mut rng), noise.support().clone()).unwrap();
    let center = empirical_distribution(&ss);
    (ss, center)
}

/// Product of the robust abstraction of `m` on `p` (radius `eps`) with the
/// automaton of `formula`.
pub fn product(
    m: &dyn SystemModel,
    p: &Partition,
    regions: &[drsynth::geometry::Region],
    formula: &str,
    center: &DiscreteDistribution,
    eps: f64,
) -> drsynth::solver::ProductRmdp {
    use drsynth::abstraction::build_rmdp;
    use drsynth::ambiguity::AmbiguityBall;
    use drsynth::geometry::Norm;

    let labels = p.attach_labels(regions).unwrap();
    let imdp = drsynth::abstraction::build_imdp(m, p, center).unwrap();
    let ball = AmbiguityBall::new(center.clone(), eps, 1, Norm::Inf, 1e-9).unwrap();
    let rmdp = build_rmdp(imdp, m, p, &ball).unwrap();
    let dfa = drsynth::ltlf::compile(formula, &labels.propositions).unwrap();
    drsynth::solver::build_product(rmdp, dfa, &labels).unwrap()
}
