//! Brute-force references for the robust inner problem.

use rand::Rng;

/// Small inner problem with sources equal to destinations. Bounds are on
/// the 0.01 grid so the nominal marginals can be enumerated exactly.
#[derive(Debug, Clone)]
pub struct Instance {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Row-major, symmetric, zero diagonal.
    pub cost: Vec<f64>,
    pub values: Vec<f64>,
    pub theta: f64,
    lo: Vec<i64>,
    hi: Vec<i64>,
}

impl Instance {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn self_index(&self) -> Vec<usize> {
        (0..self.len()).collect()
    }
}

/// Random feasible instance with `k` states, intervals of width at most
/// 0.1 and the given budget.
pub fn random_instance<R: Rng>(rng: &mut R, k: usize, theta: f64) -> Instance {
    loop {
        let lo: Vec<i64> = (0..k).map(|_| rng.random_range(0..=60)).collect();
        let hi: Vec<i64> = lo.iter().map(|&l| (l + rng.random_range(0..=10)).min(100)).collect();
        let (sl, sh): (i64, i64) = (lo.iter().sum(), hi.iter().sum());
        if sl > 100 || sh < 100 {
            continue;
        }
        let mut cost = vec![0.0; k * k];
        for i in 0..k {
            for j in i + 1..k {
                // a zero cost models touching cells
                let c = if rng.random_bool(0.25) {
                    0.0
                } else {
                    rng.random_range(1..=20) as f64 / 20.0
                };
                cost[i * k + j] = c;
                cost[j * k + i] = c;
            }
        }
        return Instance {
            lower: lo.iter().map(|&v| v as f64 / 100.0).collect(),
            upper: hi.iter().map(|&v| v as f64 / 100.0).collect(),
            cost,
            values: (0..k).map(|_| rng.random::<f64>()).collect(),
            theta,
            lo,
            hi,
        };
    }
}

/// Random feasible interval row with `k` entries around a random point of
/// the simplex.
pub fn random_row<R: Rng>(rng: &mut R, k: usize) -> (Vec<f64>, Vec<f64>) {
    let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = raw.iter().sum();
    let centre = raw.iter().map(|r| r / total);
    centre
        .map(|c| {
            let lo = (c - rng.random::<f64>() * 0.3).max(0.0);
            let hi = (c + rng.random::<f64>() * 0.3).min(1.0);
            (lo, hi)
        })
        .unzip()
}

/// Every nominal marginal on the 0.01 grid, in hundredths.
fn marginals(lo: &[i64], hi: &[i64]) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(lo.len());
    fn rec(i: usize, rem: i64, lo: &[i64], hi: &[i64], cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if i + 1 == lo.len() {
            if (lo[i]..=hi[i]).contains(&rem) {
                cur.push(rem);
                out.push(cur.clone());
                cur.pop();
            }
            return;
        }
        for g in lo[i]..=hi[i].min(rem) {
            cur.push(g);
            rec(i + 1, rem - g, lo, hi, cur, out);
            cur.pop();
        }
    }
    rec(0, 100, lo, hi, &mut cur, &mut out);
    out
}

/// Minimum expectation found by exhaustive search over grid marginals and
/// grid transport flows (at most three states).
///
/// Only moves from higher to lower values can help. With states sorted by
/// value `v0 <= v1 <= v2`, the flows `2 -> 0` and `1 -> 0` are enumerated
/// in hundredths and the flow `2 -> 1` is then as large as the remaining
/// mass and budget allow, which is optimal for the first two fixed. The
/// result is attained by a feasible coupling, so it is an upper bound on
/// the exact minimum within grid resolution of it.
pub fn exhaustive_worst(inst: &Instance) -> f64 {
    let k = inst.len();
    assert!((1..=3).contains(&k), "oracle supports at most three states");
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| inst.values[a].total_cmp(&inst.values[b]));
    let v = |r: usize| inst.values[order[r]];
    let c = |a: usize, b: usize| inst.cost[order[a] * k + order[b]];
    let mut best = f64::INFINITY;
    for g in marginals(&inst.lo, &inst.hi) {
        let gh: Vec<f64> = order.iter().map(|&i| g[i] as f64 / 100.0).collect();
        let base: f64 = (0..k).map(|r| gh[r] * v(r)).sum();
        if k == 1 {
            best = best.min(base);
            continue;
        }
        if k == 2 {
            let f = if c(1, 0) == 0.0 {
                gh[1]
            } else {
                gh[1].min(inst.theta / c(1, 0))
            };
            best = best.min(base - f * (v(1) - v(0)));
            continue;
        }
        for f20 in 0..=g[order[2]] {
            for f10 in 0..=g[order[1]] {
                let (f20, f10) = (f20 as f64 / 100.0, f10 as f64 / 100.0);
                let spent = f20 * c(2, 0) + f10 * c(1, 0);
                if spent > inst.theta + 1e-12 {
                    continue;
                }
                let room = gh[2] - f20;
                let f21 = if c(2, 1) == 0.0 {
                    room
                } else {
                    room.min((inst.theta - spent) / c(2, 1))
                };
                let val = base - f20 * (v(2) - v(0)) - f10 * (v(1) - v(0)) - f21 * (v(2) - v(1));
                best = best.min(val);
            }
        }
    }
    best
}

/// Maximum expectation: the minimum for the negated values.
pub fn exhaustive_best(inst: &Instance) -> f64 {
    let mut neg = inst.clone();
    neg.values.iter_mut().for_each(|v| *v = -*v);
    -exhaustive_worst(&neg)
}
