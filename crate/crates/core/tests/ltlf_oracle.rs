mod common;

use common::ltlf_oracle::{formulas_up_to, satisfies, traces_up_to};
use drsynth::ltlf::{compile, to_dfa, Formula};

fn ap2() -> Vec<String> {
    vec!["a".to_string(), "b".to_string()]
}

#[test]
fn dfa_matches_semantics_exhaustively() {
    let ap = ap2();
    let formulas = formulas_up_to(6, 2);
    let traces = traces_up_to(5, 2);
    let mut mismatches = Vec::new();
    for f in &formulas {
        let dfa = to_dfa(f, &ap).unwrap();
        assert_eq!(dfa.minimize().num_states(), dfa.num_states());
        for t in &traces {
            if dfa.accepts_trace(t).unwrap() != satisfies(f, t) {
                mismatches.push(format!("{} on {t:?}", f.display(&ap)));
            }
        }
    }
    assert!(mismatches.is_empty(), "{} mismatches, first: {:?}", mismatches.len(), &mismatches[..mismatches.len().min(5)]);
}

#[test]
fn double_negation_preserved() {
    let ap = ap2();
    let traces = traces_up_to(5, 2);
    for f in formulas_up_to(4, 2) {
        let d1 = to_dfa(&f, &ap).unwrap();
        let d2 = to_dfa(&Formula::not(Formula::not(f.clone())), &ap).unwrap();
        assert_eq!(d1, d2);
        for t in &traces {
            assert_eq!(d1.accepts_trace(t).unwrap(), d2.accepts_trace(t).unwrap());
        }
    }
}

#[test]
fn automaton_is_total() {
    let d = compile("G(a -> X b) & F(a & b)", &ap2()).unwrap();
    for z in 0..d.num_states() {
        for s in 0..d.num_symbols() as u64 {
            assert!(d.step(z, s).unwrap() < d.num_states());
        }
    }
}

#[test]
fn prefix_mode_matches_prefix_semantics() {
    let ap = ap2();
    let traces = traces_up_to(4, 2);
    for f in formulas_up_to(4, 2) {
        let d = to_dfa(&f, &ap).unwrap();
        for t in &traces {
            let oracle = (1..=t.len()).any(|k| satisfies(&f, &t[..k]));
            assert_eq!(d.accepts_prefix(t).unwrap(), oracle);
        }
    }
}
