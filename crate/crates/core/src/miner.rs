//! Exhaustive combinatorial baseline: enumerate every formula up to an
//! operator budget, keep the ones a trace satisfies.
//!
//! Duplicates are eliminated by keeping only fixed points of
//! [`canonicalize`]. Before any automaton is built, a cheap over/under
//! approximation over the trace's step constraints settles most verdicts.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ltl::{Alphabet, Formula, Prop};
use crate::metrics::DistinctivenessScore;
use crate::semantics::{CheckOptions, CheckResult, PreparedFormula};
use crate::trace::{StepModels, SymbolicTrace};

/// Rewrite families used to drop syntactic duplicates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Elimination {
    /// `!!f` → `f`
    pub double_negation: bool,
    /// Operands of `&` ordered by their Polish string.
    pub commutativity: bool,
    /// Nested `&` flattened and rebuilt left-leaning.
    pub associativity: bool,
    /// `f & 1` → `f`, `f & f` → `f`.
    pub constant_folding: bool,
}

impl Elimination {
    pub const ALL: Elimination = Elimination {
        double_negation: true,
        commutativity: true,
        associativity: true,
        constant_folding: true,
    };
    pub const NONE: Elimination = Elimination {
        double_negation: false,
        commutativity: false,
        associativity: false,
        constant_folding: false,
    };
}

impl Default for Elimination {
    fn default() -> Self {
        Elimination::ALL
    }
}

#[derive(Debug, Clone)]
pub struct EnumerationConfig {
    pub alphabet: Alphabet,
    pub max_operators: usize,
    pub elimination: Elimination,
    pub check: CheckOptions,
}

impl EnumerationConfig {
    pub fn new(alphabet: Alphabet, max_operators: usize) -> Self {
        EnumerationConfig {
            alphabet,
            max_operators,
            elimination: Elimination::ALL,
            check: CheckOptions::default(),
        }
    }
}

/// Applies the enabled rewrite rules bottom-up. The result is a fixed point
/// and never has more operators than the input.
pub fn canonicalize(f: &Formula, rules: Elimination) -> Formula {
    match f {
        Formula::True | Formula::False | Formula::Atom(_) => f.clone(),
        Formula::Not(c) => match canonicalize(c, rules) {
            Formula::Not(inner) if rules.double_negation => *inner,
            c => Formula::not(c),
        },
        Formula::Next(c) => Formula::next(canonicalize(c, rules)),
        Formula::Until(l, r) => Formula::until(canonicalize(l, rules), canonicalize(r, rules)),
        Formula::And(l, r) => {
            let (l, r) = (canonicalize(l, rules), canonicalize(r, rules));
            let mut conjuncts = Vec::new();
            if rules.associativity {
                flatten_into(l, &mut conjuncts);
                flatten_into(r, &mut conjuncts);
            } else {
                conjuncts.push(l);
                conjuncts.push(r);
            }
            let mut keyed: Vec<(String, Formula)> =
                conjuncts.into_iter().map(|c| (c.to_polish(), c)).collect();
            if rules.constant_folding {
                keyed.retain(|(_, c)| *c != Formula::True);
                let mut seen = std::collections::HashSet::new();
                keyed.retain(|(k, _)| seen.insert(k.clone()));
            }
            if rules.commutativity {
                keyed.sort_by(|a, b| a.0.cmp(&b.0));
            }
            let mut it = keyed.into_iter().map(|(_, c)| c);
            let first = it.next().unwrap_or(Formula::True);
            if rules.associativity {
                it.fold(first, Formula::and)
            } else {
                match it.next() {
                    Some(second) => Formula::and(first, second),
                    None => first,
                }
            }
        }
    }
}

fn flatten_into(f: Formula, out: &mut Vec<Formula>) {
    match f {
        Formula::And(l, r) => {
            flatten_into(*l, out);
            flatten_into(*r, out);
        }
        f => out.push(f),
    }
}

pub fn is_canonical(f: &Formula, rules: Elimination) -> bool {
    canonicalize(f, rules) == *f
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Node {
    False,
    True,
    Atom(u8),
    Not(u32),
    And(u32, u32),
    Next(u32),
    Until(u32, u32),
}

/// All canonical formulae up to an operator budget, ordered by operator
/// count and then by Polish string (ASCII order: `! & 0 1 U X a b ...`).
///
/// Formulae are hash-consed into an arena: each one is stored once with
/// child indices pointing into earlier levels. Subterms of canonical
/// formulae are canonical, so every level is built from the previous ones
/// with a check at the root only.
#[derive(Debug, Clone)]
pub struct FormulaSpace {
    alphabet: Alphabet,
    rules: Elimination,
    nodes: Vec<Node>,
    spans: Vec<(u32, u32)>,
    text: Vec<u8>,
    level_ends: Vec<usize>,
}

impl FormulaSpace {
    pub fn new(alphabet: Alphabet, max_operators: usize, rules: Elimination) -> Self {
        let mut s = FormulaSpace {
            alphabet,
            rules,
            nodes: Vec::new(),
            spans: Vec::new(),
            text: Vec::new(),
            level_ends: Vec::new(),
        };
        s.push(Node::False, b"0");
        s.push(Node::True, b"1");
        for p in alphabet.props() {
            s.push(Node::Atom(p.0), &[p.as_char() as u8]);
        }
        s.level_ends.push(s.nodes.len());
        for k in 1..=max_operators {
            s.build_level(k);
        }
        s
    }

    pub fn from_config(cfg: &EnumerationConfig) -> Self {
        FormulaSpace::new(cfg.alphabet, cfg.max_operators, cfg.elimination)
    }

    fn push(&mut self, n: Node, text: &[u8]) {
        self.nodes.push(n);
        self.spans.push((self.text.len() as u32, text.len() as u32));
        self.text.extend_from_slice(text);
    }

    fn level(&self, k: usize) -> std::ops::Range<usize> {
        let start = if k == 0 { 0 } else { self.level_ends[k - 1] };
        start..self.level_ends[k]
    }

    fn bytes(&self, i: u32) -> &[u8] {
        let (start, len) = self.spans[i as usize];
        &self.text[start as usize..(start + len) as usize]
    }

    fn build_level(&mut self, k: usize) {
        let mut cands: Vec<(Node, u32, u32)> = Vec::new();
        let mut buf: Vec<u8> = Vec::new();
        let mut add = |buf: &mut Vec<u8>, n: Node, parts: &[&[u8]]| {
            let start = buf.len() as u32;
            for p in parts {
                buf.extend_from_slice(p);
            }
            cands.push((n, start, buf.len() as u32 - start));
        };
        for c in self.level(k - 1) {
            let c = c as u32;
            if !(self.rules.double_negation && matches!(self.nodes[c as usize], Node::Not(_))) {
                add(&mut buf, Node::Not(c), &[b"!", self.bytes(c)]);
            }
            add(&mut buf, Node::Next(c), &[b"X", self.bytes(c)]);
        }
        let mut scratch = (Vec::new(), Vec::new());
        for i in 0..k {
            for l in self.level(i) {
                for r in self.level(k - 1 - i) {
                    let (l, r) = (l as u32, r as u32);
                    if self.and_is_canonical(l, r, &mut scratch) {
                        add(&mut buf, Node::And(l, r), &[b"&", self.bytes(l), self.bytes(r)]);
                    }
                    add(&mut buf, Node::Until(l, r), &[b"U", self.bytes(l), self.bytes(r)]);
                }
            }
        }
        let slice = |&(_, s, n): &(Node, u32, u32)| &buf[s as usize..(s + n) as usize];
        cands.sort_unstable_by(|a, b| slice(a).cmp(slice(b)));
        for c in &cands {
            let text = slice(c);
            self.nodes.push(c.0);
            self.spans.push((self.text.len() as u32, text.len() as u32));
            self.text.extend_from_slice(text);
        }
        self.level_ends.push(self.nodes.len());
    }

    fn flatten(&self, i: u32, out: &mut Vec<u32>) {
        match self.nodes[i as usize] {
            Node::And(l, r) => {
                self.flatten(l, out);
                self.flatten(r, out);
            }
            _ => out.push(i),
        }
    }

    /// Whether `&lr` is a fixed point of [`canonicalize`], given that `l`
    /// and `r` are.
    fn and_is_canonical(&self, l: u32, r: u32, scratch: &mut (Vec<u32>, Vec<u32>)) -> bool {
        let rules = self.rules;
        let (orig, done) = scratch;
        orig.clear();
        if rules.associativity {
            if matches!(self.nodes[r as usize], Node::And(..)) {
                return false;
            }
            self.flatten(l, orig);
            orig.push(r);
        } else {
            orig.extend([l, r]);
        }
        done.clear();
        if rules.constant_folding {
            for &c in orig.iter() {
                if self.nodes[c as usize] != Node::True && !done.contains(&c) {
                    done.push(c);
                }
            }
        } else {
            done.extend_from_slice(orig);
        }
        if rules.commutativity {
            done.sort_by(|&a, &b| self.bytes(a).cmp(self.bytes(b)));
        }
        orig == done
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn rules(&self) -> Elimination {
        self.rules
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of formulae with at most `k` operators.
    pub fn count_up_to(&self, k: usize) -> usize {
        self.level_ends[k.min(self.level_ends.len() - 1)]
    }

    pub fn polish(&self, i: usize) -> &str {
        std::str::from_utf8(self.bytes(i as u32)).expect("ASCII")
    }

    pub fn formula(&self, i: usize) -> Formula {
        match self.nodes[i] {
            Node::False => Formula::False,
            Node::True => Formula::True,
            Node::Atom(p) => Formula::Atom(Prop(p)),
            Node::Not(c) => Formula::not(self.formula(c as usize)),
            Node::Next(c) => Formula::next(self.formula(c as usize)),
            Node::And(l, r) => Formula::and(self.formula(l as usize), self.formula(r as usize)),
            Node::Until(l, r) => Formula::until(self.formula(l as usize), self.formula(r as usize)),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Formula> + '_ {
        (0..self.len()).map(|i| self.formula(i))
    }

    /// Per-formula verdicts that can be settled without building an
    /// automaton; `None` where undecided. Holds is proven by the lower
    /// approximation, Violated by the upper one or by a sampled concrete
    /// word that falsifies the formula.
    pub fn screen(&self, t: &SymbolicTrace) -> Vec<Option<bool>> {
        let Some(steps) = Steps::new(t, self.alphabet) else {
            return vec![None; self.len()];
        };
        let mut out: Vec<Option<bool>> = self
            .propagate(&steps.shape, &steps.atoms)
            .into_iter()
            .map(|(lo, hi)| {
                if lo & 1 == 1 {
                    Some(true)
                } else if steps.all_satisfiable && hi & 1 == 0 {
                    Some(false)
                } else {
                    None
                }
            })
            .collect();
        if steps.all_satisfiable {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            for k in 0..SAMPLED_WORDS {
                let Some((shape, atoms)) = steps.sample(t, 1 + k % 3, self.alphabet, &mut rng) else {
                    break;
                };
                for (o, (v, _)) in out.iter_mut().zip(self.propagate(&shape, &atoms)) {
                    if o.is_none() && v & 1 == 0 {
                        *o = Some(false);
                    }
                }
            }
        }
        out
    }

    fn propagate(&self, shape: &Shape, atoms: &[(u64, u64)]) -> Vec<(u64, u64)> {
        let full = shape.full;
        let mut vals: Vec<(u64, u64)> = Vec::with_capacity(self.len());
        for &n in &self.nodes {
            let v = match n {
                Node::False => (0, 0),
                Node::True => (full, full),
                Node::Atom(p) => atoms[p as usize],
                Node::Not(c) => {
                    let (lo, hi) = vals[c as usize];
                    (!hi & full, !lo & full)
                }
                Node::Next(c) => {
                    let (lo, hi) = vals[c as usize];
                    (shape.next(lo), shape.next(hi))
                }
                Node::And(l, r) => {
                    let (a, b) = (vals[l as usize], vals[r as usize]);
                    (a.0 & b.0, a.1 & b.1)
                }
                Node::Until(l, r) => {
                    let (a, b) = (vals[l as usize], vals[r as usize]);
                    (shape.until(a.0, b.0), shape.until(a.1, b.1))
                }
            };
            vals.push(v);
        }
        vals
    }

    /// Verdicts for the formulae at `indices`: the screen where it decides,
    /// the automaton check elsewhere. Timeouts give `None`.
    fn verdicts(&self, t: &SymbolicTrace, indices: &[usize], opts: CheckOptions) -> Vec<Option<bool>> {
        self.resolve(t, &self.screen(t), indices, opts)
    }

    fn resolve(
        &self,
        t: &SymbolicTrace,
        screen: &[Option<bool>],
        indices: &[usize],
        opts: CheckOptions,
    ) -> Vec<Option<bool>> {
        indices
            .par_iter()
            .map(|&i| match screen[i] {
                Some(v) => Some(v),
                None => match PreparedFormula::universal(&self.formula(i)).check_universal(t, opts) {
                    CheckResult::Holds => Some(true),
                    CheckResult::Violated(_) => Some(false),
                    CheckResult::Timeout | CheckResult::InternalError(_) => None,
                },
            })
            .collect()
    }
}

/// Concrete words drawn per trace when screening.
const SAMPLED_WORDS: usize = 48;

/// Lasso positions as bits of a `u64`, bit `i` for position `i`.
struct Shape {
    n: usize,
    loop_start: usize,
    full: u64,
}

impl Shape {
    fn new(n: usize, loop_start: usize) -> Option<Shape> {
        (n <= 64).then(|| Shape { n, loop_start, full: if n == 64 { u64::MAX } else { (1u64 << n) - 1 } })
    }

    fn next(&self, m: u64) -> u64 {
        let wrap = (m >> self.loop_start) & 1;
        ((m >> 1) & ((1u64 << (self.n - 1)) - 1)) | (wrap << (self.n - 1))
    }

    fn until(&self, a: u64, b: u64) -> u64 {
        let mut r = b;
        loop {
            let next = b | (a & self.next(r));
            if next == r {
                return r;
            }
            r = next;
        }
    }
}

/// Per-proposition masks over a symbolic trace: the low mask has bits
/// where every represented suffix satisfies the atom, the high mask where
/// some suffix might. Propagated through the connectives these stay sound
/// under- and over-approximations of universal satisfaction.
struct Steps {
    shape: Shape,
    atoms: Vec<(u64, u64)>,
    models: Vec<StepModels>,
    all_satisfiable: bool,
}

impl Steps {
    fn new(t: &SymbolicTrace, alphabet: Alphabet) -> Option<Steps> {
        let shape = Shape::new(t.len(), t.prefix().len())?;
        let mut atoms = vec![(0u64, 0u64); alphabet.size() as usize];
        let mut all_satisfiable = true;
        let models: Vec<StepModels> = t.steps().map(|s| s.models()).collect();
        for (i, m) in models.iter().enumerate() {
            let empty = m.patterns.is_empty();
            all_satisfiable &= !empty;
            let forced = m.patterns.iter().fold(u32::MAX, |acc, p| acc & p) & m.mask;
            let possible = m.patterns.iter().fold(0, |acc, p| acc | p) | !m.mask;
            for (p, a) in atoms.iter_mut().enumerate() {
                let bit = 1u32 << p;
                if forced & bit != 0 || empty {
                    a.0 |= 1 << i;
                }
                if possible & bit != 0 && !empty {
                    a.1 |= 1 << i;
                }
            }
        }
        Some(Steps { shape, atoms, models, all_satisfiable })
    }

    /// A random represented word whose period unrolls the trace's period
    /// `unroll` times, as exact atom masks.
    fn sample(
        &self,
        t: &SymbolicTrace,
        unroll: usize,
        alphabet: Alphabet,
        rng: &mut ChaCha8Rng,
    ) -> Option<(Shape, Vec<(u64, u64)>)> {
        let u = t.prefix().len();
        let v = t.period().len();
        let shape = Shape::new(u + v * unroll, u)?;
        let mut atoms = vec![(0u64, 0u64); alphabet.size() as usize];
        for i in 0..shape.n {
            let m = &self.models[if i < u { i } else { u + (i - u) % v }];
            let pattern = m.patterns[rng.gen_range(0..m.patterns.len())];
            let letter = pattern | (rng.gen::<u32>() & !m.mask & alphabet.mask());
            for (p, a) in atoms.iter_mut().enumerate() {
                if letter & (1 << p) != 0 {
                    a.0 |= 1 << i;
                    a.1 |= 1 << i;
                }
            }
        }
        Some((shape, atoms))
    }
}

pub fn enumerate_formulae(cfg: &EnumerationConfig) -> FormulaSpace {
    FormulaSpace::from_config(cfg)
}

#[derive(Debug, Clone, Default)]
pub struct MineResult {
    pub formulae: Vec<Formula>,
    pub enumerated: usize,
    pub timeouts: usize,
    /// Verdicts settled by the step-constraint screen.
    pub screened: usize,
    pub enumeration_time: Duration,
    pub check_time: Duration,
}

/// Every enumerated formula that `t` universally satisfies, in enumeration
/// order. Formulae whose check times out are skipped and counted.
pub fn mine(t: &SymbolicTrace, cfg: &EnumerationConfig) -> MineResult {
    let start = Instant::now();
    let space = FormulaSpace::from_config(cfg);
    let built = start.elapsed();
    let mut res = mine_in(&space, t, cfg.check);
    res.enumeration_time = built;
    res
}

/// [`mine`] over a prebuilt space.
pub fn mine_in(space: &FormulaSpace, t: &SymbolicTrace, opts: CheckOptions) -> MineResult {
    let start = Instant::now();
    let all: Vec<usize> = (0..space.len()).collect();
    let screen = space.screen(t);
    let screened = screen.iter().filter(|v| v.is_some()).count();
    let verdicts = space.resolve(t, &screen, &all, opts);
    let mut res = MineResult { enumerated: space.len(), screened, ..Default::default() };
    for (i, v) in verdicts.into_iter().enumerate() {
        match v {
            Some(true) => res.formulae.push(space.formula(i)),
            Some(false) => {}
            None => res.timeouts += 1,
        }
    }
    res.check_time = start.elapsed();
    res
}

/// The mined formula with the highest distinctiveness against `others`.
/// Ties go to the formula enumerated first.
pub fn mine_most_distinct(
    t: &SymbolicTrace,
    others: &[SymbolicTrace],
    cfg: &EnumerationConfig,
) -> Result<(Formula, DistinctivenessScore)> {
    if others.is_empty() {
        return Err(Error::Config("distinctiveness needs at least one other trace".into()));
    }
    let space = FormulaSpace::from_config(cfg);
    let all: Vec<usize> = (0..space.len()).collect();
    let own = space.verdicts(t, &all, cfg.check);
    let candidates: Vec<usize> = all.into_iter().filter(|&i| own[i] == Some(true)).collect();
    if candidates.is_empty() {
        return Err(Error::NoSatisfyingFormula);
    }
    let mut satisfied = vec![0usize; candidates.len()];
    let mut timeouts = vec![0usize; candidates.len()];
    for o in others {
        for (k, v) in space.verdicts(o, &candidates, cfg.check).into_iter().enumerate() {
            match v {
                Some(true) => satisfied[k] += 1,
                Some(false) => {}
                None => timeouts[k] += 1,
            }
        }
    }
    let best = (0..candidates.len()).min_by_key(|&k| satisfied[k]).expect("non-empty");
    let score = DistinctivenessScore::from_counts(satisfied[best], others.len(), timeouts[best]);
    Ok((space.formula(candidates[best]), score))
}
