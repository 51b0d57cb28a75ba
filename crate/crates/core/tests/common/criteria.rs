//! Acceptance checks, each returning a verdict plus a one-line detail.
//! Shared between the focused test files and the `acceptance` target.

use std::time::{Duration, Instant};

use drsynth::abstraction::build_imdp;
use drsynth::dynamics::SystemModel;
use drsynth::geometry::Partition;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::systems;

#[derive(Debug)]
pub struct Outcome {
    pub pass: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl Outcome {
    pub fn line(&self, name: &str) -> String {
        format!(
            "{} {name}: {} ({:.1?})",
            if self.pass { "PASS" } else { "FAIL" },
            self.detail,
            self.elapsed
        )
    }
}

fn timed(limit: Duration, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let start = Instant::now();
    let (ok, detail) = f();
    let elapsed = start.elapsed();
    let pass = ok && elapsed <= limit;
    let detail = if ok && !pass {
        format!("{detail}; over the {limit:?} limit")
    } else {
        detail
    };
    Outcome { pass, detail, elapsed }
}

/// Empirical one-step kernel from the point `x`: mass of the sample atoms
/// landing in each state.
fn point_kernel(
    m: &dyn SystemModel,
    p: &Partition,
    atoms: &[Vec<f64>],
    weights: &[f64],
    x: &[f64],
    a: usize,
) -> Vec<f64> {
    let mut k = vec![0.0; p.num_states()];
    for (w, u) in atoms.iter().zip(weights) {
        let y = m.eval(x, a, w);
        k[p.locate(&y).unwrap()] += u;
    }
    k
}

/// Counts interval violations of the point kernels for random rows and
/// random points inside the row's cell.
pub fn sandwich_violations(m: &dyn SystemModel, p: &Partition, n: usize, seed: u64) -> (usize, usize) {
    let noise = systems::gaussian(m, 0.3);
    let (_, center) = systems::empirical(&noise, n, seed);
    let imdp = build_imdp(m, p, &center).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
    let (mut checked, mut bad) = (0, 0);
    for _ in 0..50 {
        let q = rng.random_range(0..p.num_cells());
        let a = rng.random_range(0..m.num_actions());
        let cell = p.cell(q).unwrap();
        for _ in 0..20 {
            let x: Vec<f64> = (0..cell.dim())
                .map(|i| cell.lower[i] + rng.random::<f64>() * cell.width(i))
                .collect();
            let k = point_kernel(m, p, &center.atoms, &center.weights, &x, a);
            for (dest, mass) in k.iter().enumerate() {
                checked += 1;
                let (lo, hi) = (imdp.lower(q, a, dest), imdp.upper(q, a, dest));
                if *mass < lo - 1e-12 || *mass > hi + 1e-12 {
                    bad += 1;
                }
            }
        }
    }
    (checked, bad)
}

pub fn sandwich() -> Outcome {
    timed(Duration::from_secs(10), || {
        let add = systems::additive_1d();
        let mul = systems::multiplicative_1d();
        let cases = [
            ("additive", add.as_ref(), systems::grid(&[-2.0], &[2.0], &[80])),
            ("multiplicative", mul.as_ref(), systems::grid(&[-2.0], &[2.0], &[100])),
        ];
        let mut ok = true;
        let mut parts = Vec::new();
        for (i, (name, m, p)) in cases.iter().enumerate() {
            let (checked, bad) = sandwich_violations(*m, p, 200, 40 + i as u64);
            ok &= bad == 0;
            parts.push(format!("{name} {bad}/{checked} violations"));
        }
        (ok, parts.join(", "))
    })
}

pub fn inner() -> Outcome {
    use super::inner_oracle::{exhaustive_best, exhaustive_worst, random_instance, random_row};
    use drsynth::solver::{greedy_interval_expectation, inner_expectation_lp, Direction, InnerProblem};

    timed(Duration::from_secs(60), || {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut worst_zero: f64 = 0.0;
        for _ in 0..200 {
            let k = rng.random_range(1..=8);
            let (lower, upper) = random_row(&mut rng, k);
            let values: Vec<f64> = (0..k).map(|_| rng.random()).collect();
            let cost: Vec<f64> = (0..k * k).map(|i| if i % (k + 1) == 0 { 0.0 } else { rng.random() }).collect();
            let idx: Vec<usize> = (0..k).collect();
            let p = InnerProblem { lower: &lower, upper: &upper, cost: &cost, self_index: &idx, theta: 0.0 };
            for dir in [Direction::Worst, Direction::Best] {
                let greedy = greedy_interval_expectation(&lower, &upper, &values, dir).unwrap();
                let lp = inner_expectation_lp(&p, &values, dir).unwrap().value;
                worst_zero = worst_zero.max((lp - greedy).abs());
            }
        }
        let mut worst_pos: f64 = 0.0;
        let mut infeasible = 0;
        for n in 0..200 {
            let theta = rng.random_range(1..=30) as f64 / 100.0;
            let inst = random_instance(&mut rng, 2 + n % 2, theta);
            let idx = inst.self_index();
            let p = InnerProblem {
                lower: &inst.lower,
                upper: &inst.upper,
                cost: &inst.cost,
                self_index: &idx,
                theta,
            };
            for (dir, oracle) in [
                (Direction::Worst, exhaustive_worst(&inst)),
                (Direction::Best, exhaustive_best(&inst)),
            ] {
                let lp = inner_expectation_lp(&p, &inst.values, dir).unwrap().value;
                // the grid oracle is attained, so the LP can only be better
                let gap = match dir {
                    Direction::Worst => oracle - lp,
                    Direction::Best => lp - oracle,
                };
                if gap < -1e-9 {
                    infeasible += 1;
                }
                worst_pos = worst_pos.max(gap.abs());
            }
        }
        let ok = worst_zero <= 1e-9 && worst_pos <= 2e-2 && infeasible == 0;
        (
            ok,
            format!("theta=0 max diff {worst_zero:.1e}, theta>0 max diff {worst_pos:.1e}"),
        )
    })
}

pub fn ltlf() -> Outcome {
    use super::ltlf_oracle::{formulas_up_to, satisfies, traces_up_to};
    use drsynth::ltlf::to_dfa;

    timed(Duration::from_secs(120), || {
        let ap = vec!["a".to_string(), "b".to_string()];
        let formulas = formulas_up_to(6, 2);
        let traces = traces_up_to(5, 2);
        let mut bad = 0usize;
        for f in &formulas {
            let dfa = to_dfa(f, &ap).unwrap();
            for t in &traces {
                if dfa.accepts_trace(t).unwrap() != satisfies(f, t) {
                    bad += 1;
                }
            }
        }
        (
            bad == 0,
            format!("{} formulas x {} traces, {bad} disagreements", formulas.len(), traces.len()),
        )
    })
}

/// Componentwise ordering of the bounds for growing radii on the 20x20
/// unicycle, plus the mean lower bound under grid refinement. Every solve
/// runs the same fixed number of sweeps so the iterates are comparable.
pub fn monotonicity() -> Outcome {
    use super::runs;
    use drsynth::solver::SolverOptions;

    timed(Duration::from_secs(600), || {
        let mut base = runs::config("unicycle_phi1");
        base.validation.trials = 0;
        base.solver = SolverOptions {
            tol: 1e-300,
            max_iter: 400,
            ..SolverOptions::default()
        };
        let radii = [0.0, 0.005, 0.01, 0.02, 0.05, 0.1];
        let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
        let (mut lower_bad, mut upper_bad) = (0usize, 0usize);
        for eps in radii {
            let mut c = base.clone();
            c.ambiguity.epsilon_override = Some(eps);
            let dir = tempfile::tempdir().unwrap();
            runs::run(&c, dir.path());
            let b = runs::bounds(dir.path());
            let lo: Vec<f64> = b.states.iter().map(|s| s.p_lower).collect();
            let hi: Vec<f64> = b.states.iter().map(|s| s.p_upper).collect();
            if let Some((plo, phi)) = &prev {
                lower_bad += plo.iter().zip(&lo).filter(|(a, b)| a < b).count();
                upper_bad += phi.iter().zip(&hi).filter(|(a, b)| a > b).count();
            }
            prev = Some((lo, hi));
        }
        let mut means = Vec::new();
        for cuts in [10, 20] {
            let mut c = base.clone();
            c.partition.cuts = vec![cuts, cuts];
            let dir = tempfile::tempdir().unwrap();
            runs::run(&c, dir.path());
            let lo = runs::initial_lower(&c, dir.path());
            means.push(lo.iter().sum::<f64>() / lo.len() as f64);
        }
        let refine_ok = means[1] >= means[0];
        (
            lower_bad == 0 && upper_bad == 0 && refine_ok,
            format!(
                "{} radii: {lower_bad} lower and {upper_bad} upper order violations; mean lower {:.4} (10x10) -> {:.4} (20x20)",
                radii.len(),
                means[0],
                means[1]
            ),
        )
    })
}

/// Pendulum `e_avg` for growing sample sizes, clustered to 50 atoms.
pub fn trend() -> Outcome {
    use super::runs;
    use drsynth::pipeline::SampleSource;

    timed(Duration::from_secs(900), || {
        let mut base = runs::config("pendulum_phi1");
        base.validation.trials = 0;
        let mut values = Vec::new();
        for n in [100, 1_000, 10_000] {
            let mut c = base.clone();
            c.samples = SampleSource::Generate(n);
            let dir = tempfile::tempdir().unwrap();
            values.push(runs::run(&c, dir.path()).e_avg);
        }
        let ok = values.windows(2).all(|w| w[1] < w[0]);
        (
            ok,
            format!("e_avg {:.4} -> {:.4} -> {:.4}", values[0], values[1], values[2]),
        )
    })
}

/// Monte Carlo rates against the certified bounds on ten random cells.
pub fn containment() -> Outcome {
    use super::runs;
    use drsynth::pipeline::{ValidationArtifact, VALIDATION_FILE};

    timed(Duration::from_secs(600), || {
        let mut ok = true;
        let mut parts = Vec::new();
        for name in ["additive_phi1", "multiplicative_phi1", "unicycle_phi1"] {
            let mut c = runs::config(name);
            c.validation.trials = 10_000;
            c.validation.num_cells = 10;
            let dir = tempfile::tempdir().unwrap();
            runs::run(&c, dir.path());
            let v: ValidationArtifact = runs::read(dir.path(), VALIDATION_FILE);
            let inside = v.reports.iter().filter(|r| r.contained).count();
            ok &= v.all_contained && v.reports.len() == 10;
            parts.push(format!("{name} {inside}/{}", v.reports.len()));
        }
        (ok, parts.join(", "))
    })
}

/// Clustering inflation against the exact 1-Wasserstein distance.
pub fn clustering() -> Outcome {
    use drsynth::ambiguity::{cluster, empirical_distribution, ClusterOptions, SampleSet};
    use drsynth::geometry::{Norm, Rect};
    use drsynth::lp::transport_cost;

    timed(Duration::from_secs(60), || {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut worst = f64::NEG_INFINITY;
        let mut bad = 0;
        for t in 0..100 {
            let n = rng.random_range(1..=6);
            let d = rng.random_range(1..=2);
            let k = rng.random_range(1..=n);
            let norm = [Norm::Inf, Norm::L2, Norm::L1][t % 3];
            let samples: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| (rng.random_range(0..=20) as f64) / 20.0).collect())
                .collect();
            let ss = SampleSet::new(samples, Rect::new(vec![0.0; d], vec![1.0; d]).unwrap()).unwrap();
            let c = cluster(&ss, &ClusterOptions::new(k, t as u64, norm, 1)).unwrap();
            let emp = empirical_distribution(&ss);
            let (from, to) = (&emp, &c.distribution);
            let w1 = transport_cost(&from.weights, &to.weights, |i, j| {
                norm.distance(&from.atoms[i], &to.atoms[j])
            })
            .unwrap();
            worst = worst.max(w1 - c.inflation);
            if c.inflation < w1 - 1e-9 {
                bad += 1;
            }
        }
        (
            bad == 0,
            format!("100 sets, {bad} violations, max W1 - delta = {worst:.2e}"),
        )
    })
}

/// Closed-form radius values and monotonicity sweeps.
pub fn radius() -> Outcome {
    use drsynth::ambiguity::{radius, RadiusParams};
    use drsynth::geometry::Norm;

    timed(Duration::from_secs(10), || {
        let e4 = (-4.0f64).exp();
        let p = |n: usize, beta: f64, g: Option<f64>| RadiusParams {
            n,
            beta,
            phi: 1.0,
            d: 1,
            s: 1,
            norm: Norm::Inf,
            constant: 2.0,
            g_override: g,
        };
        // (2 ln(1/beta) / N)^(1/2) is exactly 1 for N = 8, beta = e^-4
        let cases = [
            (p(8, e4, Some(0.0)), 1.0),
            (p(8, e4, Some(0.25)), 1.25),
            // built-in bound 2 N^(-1/2) = 1 plus tail (8/4)^(1/2)
            (p(4, e4, None), 1.0 + 2.0f64.sqrt()),
        ];
        let mut err: f64 = 0.0;
        for (params, want) in &cases {
            err = err.max((radius(params).unwrap() - want).abs());
        }
        let by_n: Vec<f64> = (0..20).map(|i| radius(&p(10 * 2usize.pow(i), 1e-9, None)).unwrap()).collect();
        let by_beta: Vec<f64> = (0..20)
            .map(|i| radius(&p(1000, 10f64.powi(-(i as i32) - 1), None)).unwrap())
            .collect();
        let n_ok = by_n.windows(2).all(|w| w[1] < w[0]);
        let beta_ok = by_beta.windows(2).all(|w| w[1] > w[0]);
        (
            err <= 1e-12 && n_ok && beta_ok,
            format!("max example error {err:.1e}, decreasing in N: {n_ok}, increasing in 1/beta: {beta_ok}"),
        )
    })
}

/// Two complete runs of the same configuration, compared byte for byte.
pub fn determinism() -> Outcome {
    use super::runs;

    timed(Duration::from_secs(300), || {
        let mut c = runs::config("unicycle_phi2");
        c.ambiguity.cluster_k = Some(40);
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        runs::run(&c, a.path());
        runs::run(&c, b.path());
        let (sa, sb) = (runs::snapshot(a.path()), runs::snapshot(b.path()));
        let differing: Vec<&str> = sa
            .iter()
            .zip(&sb)
            .filter(|(x, y)| x != y)
            .map(|(x, _)| x.0.as_str())
            .collect();
        let ok = sa.len() == sb.len() && differing.is_empty() && sa.len() >= 8;
        (
            ok,
            format!("{} artifacts, differing: {differing:?}", sa.len()),
        )
    })
}
