//! Direct recursive LTLf semantics and exhaustive formula/trace enumeration.

use drsynth::ltlf::Formula;

/// Whether the suffix of `trace` from position `i` satisfies `f`.
pub fn holds(f: &Formula, trace: &[u64], i: usize) -> bool {
    let n = trace.len();
    match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Atom(p) => (trace[i] >> p) & 1 == 1,
        Formula::Not(a) => !holds(a, trace, i),
        Formula::And(a, b) => holds(a, trace, i) && holds(b, trace, i),
        Formula::Or(a, b) => holds(a, trace, i) || holds(b, trace, i),
        Formula::Next(a) => i + 1 < n && holds(a, trace, i + 1),
        Formula::Until(a, b) => {
            (i..n).any(|j| holds(b, trace, j) && (i..j).all(|k| holds(a, trace, k)))
        }
    }
}

pub fn satisfies(f: &Formula, trace: &[u64]) -> bool {
    !trace.is_empty() && holds(f, trace, 0)
}

/// All formulas with exactly `size` nodes over `atoms` propositions built
/// from true, false, atoms, !, X, &, | and U.
pub fn formulas_of_size(size: usize, atoms: usize) -> Vec<Formula> {
    let mut table: Vec<Vec<Formula>> = vec![Vec::new()];
    for s in 1..=size {
        let mut out = Vec::new();
        if s == 1 {
            out.push(Formula::True);
            out.push(Formula::False);
            out.extend((0..atoms).map(Formula::Atom));
        } else {
            for f in &table[s - 1] {
                out.push(Formula::not(f.clone()));
                out.push(Formula::next(f.clone()));
            }
            for l in 1..s - 1 {
                let r = s - 1 - l;
                for a in &table[l] {
                    for b in &table[r] {
                        out.push(Formula::and(a.clone(), b.clone()));
                        out.push(Formula::or(a.clone(), b.clone()));
                        out.push(Formula::until(a.clone(), b.clone()));
                    }
                }
            }
        }
        table.push(out);
    }
    table.pop().unwrap()
}

pub fn formulas_up_to(size: usize, atoms: usize) -> Vec<Formula> {
    (1..=size).flat_map(|s| formulas_of_size(s, atoms)).collect()
}

/// Every nonempty trace over `atoms` propositions of length at most `len`.
pub fn traces_up_to(len: usize, atoms: usize) -> Vec<Vec<u64>> {
    let k = 1u64 << atoms;
    let mut out = Vec::new();
    let mut layer: Vec<Vec<u64>> = vec![Vec::new()];
    for _ in 0..len {
        layer = layer
            .iter()
            .flat_map(|t| {
                (0..k).map(move |s| {
                    let mut t = t.clone();
                    t.push(s);
                    t
                })
            })
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}
