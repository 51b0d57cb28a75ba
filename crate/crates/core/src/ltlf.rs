//! LTL over finite traces: parsing and compilation to a minimal DFA.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! iff     := implies ( "<->" implies )*
//! implies := until ( "->" implies )?
//! until   := or ( "U" until )?
//! or      := and ( "|" and )*
//! and     := unary ( "&" unary )*
//! unary   := ( "!" | "X" | "F" | "G" ) unary | atom | "true" | "false" | "(" iff ")"
//! ```
//!
//! `F p` is read as `true U p` and `G p` as `!F !p`. Symbols of the automaton
//! are full valuations: bit `i` of a symbol is set when proposition `i` of
//! the declared list holds.
//!
//! Compilation puts the formula in negation normal form (which adds a weak
//! next and a release operator), expands it symbol by symbol into
//! disjunctions of next-step obligations, determinizes the resulting
//! automaton and minimizes it with Hopcroft's algorithm.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Upper bound on the number of DFA states built before giving up.
pub const MAX_DFA_STATES: usize = 1_000_000;
/// Largest supported proposition count; the alphabet has `2^n` symbols.
pub const MAX_PROPOSITIONS: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LtlfError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("undeclared atom '{name}' at byte {pos}")]
    UnknownAtom { name: String, pos: usize },
    #[error("at most {MAX_PROPOSITIONS} propositions are supported, got {0}")]
    TooManyPropositions(usize),
    #[error("duplicate proposition '{0}'")]
    DuplicateProposition(String),
    #[error("automaton exceeds {0} states")]
    TooManyStates(usize),
    #[error("traces must be nonempty")]
    EmptyTrace,
    #[error("state {0} out of range")]
    StateOutOfRange(usize),
    #[error("symbol {0:#b} out of range")]
    SymbolOutOfRange(u64),
    #[error("malformed automaton: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Atom(usize),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Next(Box<Formula>),
    Until(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn next(f: Formula) -> Formula {
        Formula::Next(Box::new(f))
    }

    pub fn until(a: Formula, b: Formula) -> Formula {
        Formula::Until(Box::new(a), Box::new(b))
    }

    pub fn eventually(f: Formula) -> Formula {
        Formula::until(Formula::True, f)
    }

    pub fn always(f: Formula) -> Formula {
        Formula::not(Formula::eventually(Formula::not(f)))
    }

    /// Number of nodes in the syntax tree.
    pub fn size(&self) -> usize {
        match self {
            Formula::True | Formula::False | Formula::Atom(_) => 1,
            Formula::Not(a) | Formula::Next(a) => 1 + a.size(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Until(a, b) => 1 + a.size() + b.size(),
        }
    }

    /// Renders the formula with the given proposition names.
    pub fn display<'a>(&'a self, ap: &'a [String]) -> impl fmt::Display + 'a {
        FormulaDisplay { f: self, ap }
    }
}

struct FormulaDisplay<'a> {
    f: &'a Formula,
    ap: &'a [String],
}

impl fmt::Display for FormulaDisplay<'_> {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sub = |f| FormulaDisplay { f, ap: self.ap };
        match self.f {
            Formula::True => write!(out, "true"),
            Formula::False => write!(out, "false"),
            Formula::Atom(i) => match self.ap.get(*i) {
                Some(name) => write!(out, "{name}"),
                None => write!(out, "p{i}"),
            },
            Formula::Not(a) => write!(out, "!({})", sub(a)),
            Formula::Next(a) => write!(out, "X({})", sub(a)),
            Formula::And(a, b) => write!(out, "({}) & ({})", sub(a), sub(b)),
            Formula::Or(a, b) => write!(out, "({}) | ({})", sub(a), sub(b)),
            Formula::Until(a, b) => write!(out, "({}) U ({})", sub(a), sub(b)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Not,
    And,
    Or,
    Implies,
    Iff,
    Next,
    Until,
    Eventually,
    Always,
    True,
    False,
    LParen,
    RParen,
    Ident(String),
    End,
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, LtlfError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            b'!' => {
                i += 1;
                Tok::Not
            }
            b'&' => {
                i += if bytes.get(i + 1) == Some(&b'&') { 2 } else { 1 };
                Tok::And
            }
            b'|' => {
                i += if bytes.get(i + 1) == Some(&b'|') { 2 } else { 1 };
                Tok::Or
            }
            b'(' => {
                i += 1;
                Tok::LParen
            }
            b')' => {
                i += 1;
                Tok::RParen
            }
            b'-' if bytes.get(i + 1) == Some(&b'>') => {
                i += 2;
                Tok::Implies
            }
            b'<' if text[i..].starts_with("<->") => {
                i += 3;
                Tok::Iff
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                match &text[start..i] {
                    "X" => Tok::Next,
                    "U" => Tok::Until,
                    "F" => Tok::Eventually,
                    "G" => Tok::Always,
                    "true" => Tok::True,
                    "false" => Tok::False,
                    word => Tok::Ident(word.to_string()),
                }
            }
            _ => {
                return Err(LtlfError::Syntax {
                    pos: i,
                    msg: format!("unexpected character '{}'", &text[i..].chars().next().unwrap()),
                })
            }
        };
        out.push((tok, start));
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    at: usize,
    ap: &'a [String],
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn iff(&mut self) -> Result<Formula, LtlfError> {
        let mut lhs = self.implies()?;
        while *self.peek() == Tok::Iff {
            self.bump();
            let rhs = self.implies()?;
            lhs = Formula::or(
                Formula::and(lhs.clone(), rhs.clone()),
                Formula::and(Formula::not(lhs), Formula::not(rhs)),
            );
        }
        Ok(lhs)
    }

    fn implies(&mut self) -> Result<Formula, LtlfError> {
        let lhs = self.until()?;
        if *self.peek() == Tok::Implies {
            self.bump();
            let rhs = self.implies()?;
            return Ok(Formula::or(Formula::not(lhs), rhs));
        }
        Ok(lhs)
    }

    fn until(&mut self) -> Result<Formula, LtlfError> {
        let lhs = self.or()?;
        if *self.peek() == Tok::Until {
            self.bump();
            let rhs = self.until()?;
            return Ok(Formula::until(lhs, rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Formula, LtlfError> {
        let mut lhs = self.and()?;
        while *self.peek() == Tok::Or {
            self.bump();
            lhs = Formula::or(lhs, self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula, LtlfError> {
        let mut lhs = self.unary()?;
        while *self.peek() == Tok::And {
            self.bump();
            lhs = Formula::and(lhs, self.unary()?);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, LtlfError> {
        let pos = self.pos();
        match self.bump() {
            Tok::Not => Ok(Formula::not(self.unary()?)),
            Tok::Next => Ok(Formula::next(self.unary()?)),
            Tok::Eventually => Ok(Formula::eventually(self.unary()?)),
            Tok::Always => Ok(Formula::always(self.unary()?)),
            Tok::True => Ok(Formula::True),
            Tok::False => Ok(Formula::False),
            Tok::LParen => {
                let inner = self.iff()?;
                if *self.peek() != Tok::RParen {
                    return Err(LtlfError::Syntax {
                        pos: self.pos(),
                        msg: "expected ')'".into(),
                    });
                }
                self.bump();
                Ok(inner)
            }
            Tok::Ident(name) => match self.ap.iter().position(|a| *a == name) {
                Some(i) => Ok(Formula::Atom(i)),
                None => Err(LtlfError::UnknownAtom { name, pos }),
            },
            Tok::End => Err(LtlfError::Syntax {
                pos,
                msg: "unexpected end of formula".into(),
            }),
            other => Err(LtlfError::Syntax {
                pos,
                msg: format!("unexpected token {other:?}"),
            }),
        }
    }
}

/// Parses `text` over the declared propositions `ap`.
pub fn parse(text: &str, ap: &[String]) -> Result<Formula, LtlfError> {
    let mut p = Parser {
        toks: tokenize(text)?,
        at: 0,
        ap,
    };
    let f = p.iff()?;
    if *p.peek() != Tok::End {
        return Err(LtlfError::Syntax {
            pos: p.pos(),
            msg: "trailing input".into(),
        });
    }
    Ok(f)
}

/// Names of the atoms occurring in `text`, in order of first occurrence.
pub fn atoms_in(text: &str) -> Result<Vec<String>, LtlfError> {
    let mut out: Vec<String> = Vec::new();
    for (t, _) in tokenize(text)? {
        if let Tok::Ident(name) = t {
            if !out.contains(&name) {
                out.push(name);
            }
        }
    }
    Ok(out)
}

type NodeId = u32;

/// Negation normal form node; children are interned ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Node {
    True,
    False,
    Lit(usize, bool),
    And(NodeId, NodeId),
    Or(NodeId, NodeId),
    Next(NodeId),
    WeakNext(NodeId),
    Until(NodeId, NodeId),
    Release(NodeId, NodeId),
}

/// An obligation on the rest of the trace: `strong` ones require another
/// symbol, weak ones also hold when the trace ends.
type Obligation = (NodeId, bool);
/// Conjunction of obligations, sorted by node id.
type Cube = Vec<Obligation>;

#[derive(Default)]
struct Builder {
    nodes: Vec<Node>,
    ids: HashMap<Node, NodeId>,
    expansions: HashMap<(NodeId, u64), Vec<Cube>>,
}

impl Builder {
    fn intern(&mut self, n: Node) -> NodeId {
        let n = match n {
            Node::And(a, b) | Node::Or(a, b) if a > b => match n {
                Node::And(..) => Node::And(b, a),
                _ => Node::Or(b, a),
            },
            other => other,
        };
        let t = self.intern_raw(Node::True);
        let f = self.intern_raw(Node::False);
        match n {
            Node::And(a, b) if a == f || b == f => return f,
            Node::And(a, b) if a == t => return b,
            Node::And(a, b) if b == t || a == b => return a,
            Node::Or(a, b) if a == t || b == t => return t,
            Node::Or(a, b) if a == f => return b,
            Node::Or(a, b) if b == f || a == b => return a,
            _ => {}
        }
        self.intern_raw(n)
    }

    fn intern_raw(&mut self, n: Node) -> NodeId {
        if let Some(&id) = self.ids.get(&n) {
            return id;
        }
        let id = self.nodes.len() as NodeId;
        self.nodes.push(n);
        self.ids.insert(n, id);
        id
    }

    fn nnf(&mut self, f: &Formula, negated: bool) -> NodeId {
        let node = match (f, negated) {
            (Formula::True, false) | (Formula::False, true) => Node::True,
            (Formula::True, true) | (Formula::False, false) => Node::False,
            (Formula::Atom(i), neg) => Node::Lit(*i, !neg),
            (Formula::Not(a), neg) => return self.nnf(a, !neg),
            (Formula::And(a, b), false) => Node::And(self.nnf(a, false), self.nnf(b, false)),
            (Formula::And(a, b), true) => Node::Or(self.nnf(a, true), self.nnf(b, true)),
            (Formula::Or(a, b), false) => Node::Or(self.nnf(a, false), self.nnf(b, false)),
            (Formula::Or(a, b), true) => Node::And(self.nnf(a, true), self.nnf(b, true)),
            (Formula::Next(a), false) => Node::Next(self.nnf(a, false)),
            (Formula::Next(a), true) => Node::WeakNext(self.nnf(a, true)),
            (Formula::Until(a, b), false) => Node::Until(self.nnf(a, false), self.nnf(b, false)),
            (Formula::Until(a, b), true) => Node::Release(self.nnf(a, true), self.nnf(b, true)),
        };
        self.intern(node)
    }

    /// Obligations for the rest of the trace after reading `sym` with `id`
    /// required at the current position, as a disjunction of cubes.
    fn expand(&mut self, id: NodeId, sym: u64) -> Vec<Cube> {
        if let Some(c) = self.expansions.get(&(id, sym)) {
            return c.clone();
        }
        let out = match self.nodes[id as usize] {
            Node::True => vec![Vec::new()],
            Node::False => Vec::new(),
            Node::Lit(i, pos) => {
                if ((sym >> i) & 1 == 1) == pos {
                    vec![Vec::new()]
                } else {
                    Vec::new()
                }
            }
            Node::And(a, b) => {
                let (x, y) = (self.expand(a, sym), self.expand(b, sym));
                conjoin(&x, &y)
            }
            Node::Or(a, b) => {
                let mut x = self.expand(a, sym);
                x.extend(self.expand(b, sym));
                simplify(x)
            }
            Node::Next(a) => vec![vec![(a, true)]],
            Node::WeakNext(a) => vec![vec![(a, false)]],
            Node::Until(a, b) => {
                let mut now = self.expand(b, sym);
                let hold = self.expand(a, sym);
                now.extend(conjoin(&hold, &[vec![(id, true)]]));
                simplify(now)
            }
            Node::Release(a, b) => {
                let mut release = self.expand(a, sym);
                release.push(vec![(id, false)]);
                let must = self.expand(b, sym);
                conjoin(&must, &release)
            }
        };
        self.expansions.insert((id, sym), out.clone());
        out
    }

    fn successor(&mut self, state: &[Cube], sym: u64) -> Vec<Cube> {
        let mut out = Vec::new();
        for cube in state {
            let mut acc: Vec<Cube> = vec![Vec::new()];
            for &(id, _) in cube {
                if acc.is_empty() {
                    break;
                }
                let e = self.expand(id, sym);
                acc = conjoin(&acc, &e);
            }
            out.extend(acc);
        }
        simplify(out)
    }
}

fn merge_cubes(a: &Cube, b: &Cube) -> Cube {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push((a[i].0, a[i].1 || b[j].1));
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

fn conjoin(x: &[Cube], y: &[Cube]) -> Vec<Cube> {
    let mut out = Vec::with_capacity(x.len() * y.len());
    for a in x {
        for b in y {
            out.push(merge_cubes(a, b));
        }
    }
    simplify(out)
}

/// Whether every obligation of `weak` is implied by `strong`.
fn implied_by(weak: &Cube, strong: &Cube) -> bool {
    let mut j = 0;
    for &(id, s) in weak {
        while j < strong.len() && strong[j].0 < id {
            j += 1;
        }
        if j == strong.len() || strong[j].0 != id || (s && !strong[j].1) {
            return false;
        }
    }
    true
}

/// Sorts, deduplicates and drops cubes implied by another cube.
fn simplify(mut cubes: Vec<Cube>) -> Vec<Cube> {
    cubes.sort();
    cubes.dedup();
    if cubes.len() < 2 {
        return cubes;
    }
    let keep: Vec<bool> = (0..cubes.len())
        .map(|i| {
            !(0..cubes.len()).any(|j| j != i && implied_by(&cubes[j], &cubes[i]))
        })
        .collect();
    cubes
        .into_iter()
        .zip(keep)
        .filter_map(|(c, k)| k.then_some(c))
        .collect()
}

/// Deterministic automaton over valuations of `ap`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dfa {
    ap: Vec<String>,
    num_states: usize,
    initial: usize,
    accepting: Vec<bool>,
    delta: Vec<usize>,
}

impl Dfa {
    /// Builds an automaton from a dense table `delta[z * 2^|ap| + symbol]`.
    pub fn from_table(
        ap: Vec<String>,
        initial: usize,
        accepting: Vec<bool>,
        delta: Vec<usize>,
    ) -> Result<Self, LtlfError> {
        if ap.len() > MAX_PROPOSITIONS {
            return Err(LtlfError::TooManyPropositions(ap.len()));
        }
        let n = accepting.len();
        let k = 1usize << ap.len();
        if n == 0 || initial >= n || delta.len() != n * k || delta.iter().any(|&z| z >= n) {
            return Err(LtlfError::Malformed(format!(
                "{n} states, {} transitions for {k} symbols",
                delta.len()
            )));
        }
        Ok(Dfa {
            ap,
            num_states: n,
            initial,
            accepting,
            delta,
        })
    }

    pub fn propositions(&self) -> &[String] {
        &self.ap
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_symbols(&self) -> usize {
        1 << self.ap.len()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn is_accepting(&self, z: usize) -> bool {
        self.accepting[z]
    }

    pub fn accepting_states(&self) -> Vec<usize> {
        (0..self.num_states).filter(|&z| self.accepting[z]).collect()
    }

    /// Transition without range checks; panics on invalid input.
    pub fn next(&self, z: usize, symbol: u64) -> usize {
        self.delta[z * self.num_symbols() + symbol as usize]
    }

    pub fn step(&self, z: usize, symbol: u64) -> Result<usize, LtlfError> {
        if z >= self.num_states {
            return Err(LtlfError::StateOutOfRange(z));
        }
        if symbol >= self.num_symbols() as u64 {
            return Err(LtlfError::SymbolOutOfRange(symbol));
        }
        Ok(self.next(z, symbol))
    }

    /// States visited while reading `trace`, excluding the initial state.
    pub fn run(&self, trace: &[u64]) -> Result<Vec<usize>, LtlfError> {
        let mut z = self.initial;
        trace
            .iter()
            .map(|&s| {
                z = self.step(z, s)?;
                Ok(z)
            })
            .collect()
    }

    /// Whether the whole (nonempty) trace satisfies the formula.
    pub fn accepts_trace(&self, trace: &[u64]) -> Result<bool, LtlfError> {
        if trace.is_empty() {
            return Err(LtlfError::EmptyTrace);
        }
        Ok(self.accepting[*self.run(trace)?.last().unwrap()])
    }

    /// Whether some nonempty prefix of the trace satisfies the formula.
    pub fn accepts_prefix(&self, trace: &[u64]) -> Result<bool, LtlfError> {
        if trace.is_empty() {
            return Err(LtlfError::EmptyTrace);
        }
        Ok(self.run(trace)?.into_iter().any(|z| self.accepting[z]))
    }

    /// Minimizes with Hopcroft's algorithm and renumbers states in
    /// breadth-first order from the initial state.
    pub fn minimize(&self) -> Dfa {
        minimize(self)
    }

    /// Graphviz rendering with one edge per state pair, labelled by the
    /// symbols that take it.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph dfa {\n  rankdir=LR;\n  init [shape=point];\n");
        for z in 0..self.num_states {
            let shape = if self.accepting[z] { "doublecircle" } else { "circle" };
            out.push_str(&format!("  {z} [shape={shape}];\n"));
        }
        out.push_str(&format!("  init -> {};\n", self.initial));
        for z in 0..self.num_states {
            let mut edges: Vec<(usize, Vec<String>)> = Vec::new();
            for sym in 0..self.num_symbols() as u64 {
                let t = self.next(z, sym);
                let label = self.symbol_name(sym);
                match edges.iter_mut().find(|(d, _)| *d == t) {
                    Some((_, l)) => l.push(label),
                    None => edges.push((t, vec![label])),
                }
            }
            for (t, labels) in edges {
                out.push_str(&format!("  {z} -> {t} [label=\"{}\"];\n", labels.join(", ")));
            }
        }
        out.push_str("}\n");
        out
    }

    /// `{a,b}` style name of a valuation.
    pub fn symbol_name(&self, sym: u64) -> String {
        let names: Vec<&str> = (0..self.ap.len())
            .filter(|i| (sym >> i) & 1 == 1)
            .map(|i| self.ap[i].as_str())
            .collect();
        format!("{{{}}}", names.join(","))
    }
}

/// JSON form: `{propositions, states, initial, accepting, delta}` with
/// `delta[z][symbol]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DfaDoc {
    pub formula: Option<String>,
    pub propositions: Vec<String>,
    pub states: usize,
    pub initial: usize,
    pub accepting: Vec<usize>,
    pub delta: Vec<Vec<usize>>,
}

impl DfaDoc {
    pub fn new(dfa: &Dfa, formula: Option<&str>) -> Self {
        let k = dfa.num_symbols();
        DfaDoc {
            formula: formula.map(str::to_string),
            propositions: dfa.ap.clone(),
            states: dfa.num_states,
            initial: dfa.initial,
            accepting: dfa.accepting_states(),
            delta: dfa.delta.chunks(k).map(<[usize]>::to_vec).collect(),
        }
    }

    pub fn to_dfa(&self) -> Result<Dfa, LtlfError> {
        let mut accepting = vec![false; self.states];
        for &z in &self.accepting {
            *accepting
                .get_mut(z)
                .ok_or(LtlfError::StateOutOfRange(z))? = true;
        }
        if self.delta.len() != self.states {
            return Err(LtlfError::Malformed("one delta row per state expected".into()));
        }
        Dfa::from_table(
            self.propositions.clone(),
            self.initial,
            accepting,
            self.delta.concat(),
        )
    }
}

/// Compiles a formula over `ap` to the minimal DFA accepting exactly the
/// nonempty traces that satisfy it.
pub fn to_dfa(f: &Formula, ap: &[String]) -> Result<Dfa, LtlfError> {
    to_dfa_limited(f, ap, MAX_DFA_STATES)
}

/// [`to_dfa`] with a custom state limit.
pub fn to_dfa_limited(f: &Formula, ap: &[String], limit: usize) -> Result<Dfa, LtlfError> {
    if ap.len() > MAX_PROPOSITIONS {
        return Err(LtlfError::TooManyPropositions(ap.len()));
    }
    for (i, a) in ap.iter().enumerate() {
        if ap[..i].contains(a) {
            return Err(LtlfError::DuplicateProposition(a.clone()));
        }
    }
    let k = 1u64 << ap.len();
    let mut b = Builder::default();
    let root = b.nnf(f, false);

    // State 0 is a fresh initial state, seen only before the first symbol.
    let start: Vec<Cube> = vec![vec![(root, true)]];
    let mut sets: Vec<Vec<Cube>> = vec![start];
    let mut index: HashMap<Vec<Cube>, usize> = HashMap::new();
    let mut delta: Vec<usize> = Vec::new();
    let mut queue = VecDeque::from([0usize]);
    while let Some(z) = queue.pop_front() {
        let state = sets[z].clone();
        for sym in 0..k {
            let next = b.successor(&state, sym);
            let id = match index.get(&next) {
                Some(&id) => id,
                None => {
                    let id = sets.len();
                    if id >= limit {
                        return Err(LtlfError::TooManyStates(limit));
                    }
                    sets.push(next.clone());
                    index.insert(next, id);
                    queue.push_back(id);
                    id
                }
            };
            delta.push(id);
        }
    }
    let mut accepting: Vec<bool> = sets
        .iter()
        .map(|s| s.iter().any(|c| c.iter().all(|&(_, strong)| !strong)))
        .collect();

    // The fresh initial state is only accepting for the empty trace, which
    // is excluded, so its flag is free; keep whichever choice minimizes to
    // fewer states.
    let mut best: Option<Dfa> = None;
    for init_accepts in [false, true] {
        accepting[0] = init_accepts;
        let d = Dfa {
            ap: ap.to_vec(),
            num_states: sets.len(),
            initial: 0,
            accepting: accepting.clone(),
            delta: delta.clone(),
        }
        .minimize();
        if best.as_ref().is_none_or(|b| d.num_states < b.num_states) {
            best = Some(d);
        }
    }
    Ok(best.unwrap())
}

/// Parses and compiles in one go.
pub fn compile(text: &str, ap: &[String]) -> Result<Dfa, LtlfError> {
    to_dfa(&parse(text, ap)?, ap)
}

fn minimize(d: &Dfa) -> Dfa {
    let k = d.num_symbols();
    // restrict to reachable states
    let mut reach = vec![usize::MAX; d.num_states];
    let mut order = vec![d.initial];
    reach[d.initial] = 0;
    let mut i = 0;
    while i < order.len() {
        let z = order[i];
        for s in 0..k {
            let t = d.delta[z * k + s];
            if reach[t] == usize::MAX {
                reach[t] = order.len();
                order.push(t);
            }
        }
        i += 1;
    }
    let n = order.len();
    let trans = |z: usize, s: usize| reach[d.delta[order[z] * k + s]];
    let acc: Vec<bool> = order.iter().map(|&z| d.accepting[z]).collect();

    // inverse transitions
    let mut inv: Vec<Vec<Vec<usize>>> = vec![vec![Vec::new(); n]; k];
    for z in 0..n {
        for (s, inv_s) in inv.iter_mut().enumerate() {
            inv_s[trans(z, s)].push(z);
        }
    }

    let mut block_of = vec![0usize; n];
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let (f, nf): (Vec<usize>, Vec<usize>) = (0..n).partition(|&z| acc[z]);
    for part in [f, nf] {
        if !part.is_empty() {
            for &z in &part {
                block_of[z] = blocks.len();
            }
            blocks.push(part);
        }
    }
    let mut work: Vec<(usize, usize)> = (0..blocks.len())
        .flat_map(|b| (0..k).map(move |s| (b, s)))
        .collect();
    let mut mark = vec![false; n];
    while let Some((a, s)) = work.pop() {
        let mut touched: Vec<usize> = Vec::new();
        let mut pre: Vec<usize> = Vec::new();
        for &t in &blocks[a] {
            for &z in &inv[s][t] {
                if !mark[z] {
                    mark[z] = true;
                    pre.push(z);
                    touched.push(block_of[z]);
                }
            }
        }
        touched.sort_unstable();
        touched.dedup();
        for y in touched {
            let (inside, outside): (Vec<usize>, Vec<usize>) =
                blocks[y].iter().partition(|&&z| mark[z]);
            if outside.is_empty() {
                continue;
            }
            // The smaller half becomes the new block. Queueing it is enough:
            // if (y, c) was pending it now stands for the larger half, and
            // otherwise the smaller half alone suffices.
            let new_id = blocks.len();
            let (keep, moved) = if inside.len() <= outside.len() {
                (outside, inside)
            } else {
                (inside, outside)
            };
            for &z in &moved {
                block_of[z] = new_id;
            }
            blocks[y] = keep;
            blocks.push(moved);
            work.extend((0..k).map(|c| (new_id, c)));
        }
        for z in pre {
            mark[z] = false;
        }
    }

    // canonical numbering: breadth-first from the initial block
    let nb = blocks.len();
    let mut canon = vec![usize::MAX; nb];
    let mut queue = vec![block_of[0]];
    canon[block_of[0]] = 0;
    let mut i = 0;
    while i < queue.len() {
        let b = queue[i];
        let z = blocks[b][0];
        for s in 0..k {
            let t = block_of[trans(z, s)];
            if canon[t] == usize::MAX {
                canon[t] = queue.len();
                queue.push(t);
            }
        }
        i += 1;
    }
    let mut delta = vec![0; nb * k];
    let mut accepting = vec![false; nb];
    for &b in &queue {
        let z = blocks[b][0];
        accepting[canon[b]] = acc[z];
        for s in 0..k {
            delta[canon[b] * k + s] = canon[block_of[trans(z, s)]];
        }
    }
    Dfa {
        ap: d.ap.clone(),
        num_states: nb,
        initial: 0,
        accepting,
        delta,
    }
}
