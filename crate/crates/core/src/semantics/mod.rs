//! Satisfaction of LTL formulae by symbolic lasso traces.
//!
//! A symbolic trace satisfies a formula when every concrete word it
//! represents does. This is decided as emptiness of the product between the
//! trace's lasso automaton and a tableau automaton for the negated formula.
//! [`eval_concrete`] evaluates a single concrete lasso directly and serves
//! as the reference semantics.

mod ndfs;
mod tableau;

use std::time::{Duration, Instant};

use crate::ltl::Formula;
use crate::trace::{PropConstraint, StepModels, SymbolicTrace};

use ndfs::{find_accepting_lasso, Abort, Budget, LassoGraph};
use tableau::{next_level, TEdge, Tableau};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
pub const DEFAULT_STATE_CAP: usize = 1_000_000;

/// A concrete ultimately periodic word `prefix · period^ω`. Each letter is
/// a bit mask over the first `width` propositions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConcreteLasso {
    pub width: u8,
    pub prefix: Vec<u32>,
    pub period: Vec<u32>,
}

impl ConcreteLasso {
    pub fn new(width: u8, prefix: Vec<u32>, period: Vec<u32>) -> Option<Self> {
        (!period.is_empty()).then_some(ConcreteLasso { width, prefix, period })
    }

    pub fn len(&self) -> usize {
        self.prefix.len() + self.period.len()
    }

    pub fn is_empty(&self) -> bool {
        self.period.is_empty()
    }

    pub fn letter(&self, i: usize) -> u32 {
        if i < self.prefix.len() {
            self.prefix[i]
        } else {
            self.period[(i - self.prefix.len()) % self.period.len()]
        }
    }

    pub fn successor(&self, i: usize) -> usize {
        if i + 1 < self.len() {
            i + 1
        } else {
            self.prefix.len()
        }
    }

    /// The same word as a symbolic trace whose steps fix every proposition.
    pub fn to_symbolic(&self) -> SymbolicTrace {
        let mask = if self.width >= 32 { u32::MAX } else { (1u32 << self.width) - 1 };
        let step = |v: u32| PropConstraint::from_literals(v & mask, !v & mask);
        SymbolicTrace::new(
            self.prefix.iter().map(|&v| step(v)).collect(),
            self.period.iter().map(|&v| step(v)).collect(),
        )
        .expect("non-empty period")
    }

    /// True when the word is one of those denoted by `t`.
    pub fn is_represented_by(&self, t: &SymbolicTrace) -> bool {
        // walk both lassos until the joint position pair repeats
        let mut seen = std::collections::HashSet::new();
        let (mut i, mut j) = (0usize, 0usize);
        while seen.insert((i, j)) {
            if !t.step(j).holds(self.letter(i)) {
                return false;
            }
            i = self.successor(i);
            j = t.successor(j);
        }
        true
    }
}

/// Truth of `f` at position 0 of the concrete lasso `w`.
pub fn eval_concrete(w: &ConcreteLasso, f: &Formula) -> bool {
    eval_positions(w, f)[0]
}

fn eval_positions(w: &ConcreteLasso, f: &Formula) -> Vec<bool> {
    let n = w.len();
    match f {
        Formula::True => vec![true; n],
        Formula::False => vec![false; n],
        Formula::Atom(p) => (0..n).map(|i| w.letter(i) & p.bit() != 0).collect(),
        Formula::Not(c) => eval_positions(w, c).into_iter().map(|b| !b).collect(),
        Formula::And(l, r) => {
            let (l, r) = (eval_positions(w, l), eval_positions(w, r));
            l.into_iter().zip(r).map(|(a, b)| a && b).collect()
        }
        Formula::Next(c) => {
            let c = eval_positions(w, c);
            (0..n).map(|i| c[w.successor(i)]).collect()
        }
        Formula::Until(l, r) => {
            let (l, r) = (eval_positions(w, l), eval_positions(w, r));
            // least fixed point of  s[i] = r[i] || (l[i] && s[succ i])
            let mut s = vec![false; n];
            loop {
                let mut changed = false;
                for i in (0..n).rev() {
                    let v = r[i] || (l[i] && s[w.successor(i)]);
                    if v != s[i] {
                        s[i] = v;
                        changed = true;
                    }
                }
                if !changed {
                    return s;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CheckResult {
    Holds,
    /// For universal checks, a represented word falsifying the formula.
    /// Existential checks carry no witness.
    Violated(Option<ConcreteLasso>),
    Timeout,
    InternalError(String),
}

impl CheckResult {
    pub fn holds(&self) -> bool {
        matches!(self, CheckResult::Holds)
    }

    pub fn violated(&self) -> bool {
        matches!(self, CheckResult::Violated(_))
    }

    /// Timeouts and internal errors are reported together.
    pub fn timed_out(&self) -> bool {
        matches!(self, CheckResult::Timeout | CheckResult::InternalError(_))
    }

    pub fn verdict_name(&self) -> &'static str {
        match self {
            CheckResult::Holds => "HOLDS",
            CheckResult::Violated(_) => "VIOLATED",
            CheckResult::Timeout | CheckResult::InternalError(_) => "TIMEOUT",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckOptions {
    pub timeout: Option<Duration>,
    pub state_cap: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { timeout: Some(DEFAULT_TIMEOUT), state_cap: DEFAULT_STATE_CAP }
    }
}

impl CheckOptions {
    pub fn with_timeout(timeout: Duration) -> Self {
        CheckOptions { timeout: Some(timeout), ..Default::default() }
    }

    fn budget(&self) -> Budget {
        Budget { deadline: self.timeout.map(|t| Instant::now() + t), state_cap: self.state_cap }
    }
}

/// A transition guarded by a propositional constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub from: usize,
    pub guard: PropConstraint,
    pub to: usize,
}

/// An explicit state-based Büchi automaton.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuchiAutomaton {
    pub state_count: usize,
    pub initial: Vec<usize>,
    pub transitions: Vec<Transition>,
    pub accepting: Vec<bool>,
}

impl BuchiAutomaton {
    pub fn accepting_states(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.state_count).filter(|&s| self.accepting[s])
    }

    /// Membership of a concrete lasso in the automaton's language.
    pub fn accepts(&self, w: &ConcreteLasso) -> bool {
        struct Run<'a> {
            aut: &'a BuchiAutomaton,
            word: &'a ConcreteLasso,
            out: Vec<Vec<usize>>,
        }
        impl LassoGraph for Run<'_> {
            type Node = (usize, usize);
            type Edge = ();
            fn initial(&mut self) -> Result<Vec<(usize, usize)>, Abort> {
                Ok(self.aut.initial.iter().map(|&q| (0, q)).collect())
            }
            fn successors(&mut self, (i, q): (usize, usize), out: &mut Vec<((), (usize, usize))>) -> Result<(), Abort> {
                let letter = self.word.letter(i);
                for &t in &self.out[q] {
                    let tr = &self.aut.transitions[t];
                    if tr.guard.holds(letter) {
                        out.push(((), (self.word.successor(i), tr.to)));
                    }
                }
                Ok(())
            }
            fn is_accepting(&self, (_, q): (usize, usize)) -> bool {
                self.aut.accepting[q]
            }
        }
        let mut out = vec![Vec::new(); self.state_count];
        for (i, t) in self.transitions.iter().enumerate() {
            out[t.from].push(i);
        }
        let mut run = Run { aut: self, word: w, out };
        let budget = Budget { deadline: None, state_cap: usize::MAX };
        find_accepting_lasso(&mut run, budget).expect("unbounded search").is_some()
    }
}

/// Büchi automaton for the models of `f`, built by tableau expansion and
/// degeneralized with a level counter.
pub fn to_buchi(f: &Formula, opts: CheckOptions) -> Result<BuchiAutomaton, crate::Error> {
    let budget = opts.budget();
    let mut tab = Tableau::new(f, false);
    let sets = tab.acceptance_sets();
    let mut ids = std::collections::HashMap::new();
    let mut order = vec![(tab.initial(), 0u32)];
    ids.insert((tab.initial(), 0u32), 0usize);
    let mut transitions = Vec::new();
    let mut next = 0;
    while next < order.len() {
        let (q, level) = order[next];
        let from = next;
        next += 1;
        let edges = tab.edges(q, &budget).map_err(abort_error)?;
        for e in edges.iter() {
            let key = (e.target, next_level(level, sets, &e.postponed));
            let to = *ids.entry(key).or_insert_with(|| {
                order.push(key);
                order.len() - 1
            });
            if order.len() > opts.state_cap {
                return Err(crate::Error::ResourceLimit(opts.state_cap));
            }
            transitions.push(Transition { from, guard: PropConstraint::from_literals(e.pos, e.neg), to });
        }
    }
    let accepting = order.iter().map(|&(_, l)| l == sets).collect();
    Ok(BuchiAutomaton { state_count: order.len(), initial: vec![0], transitions, accepting })
}

fn abort_error(a: Abort) -> crate::Error {
    match a {
        Abort::StateCap(n) => crate::Error::ResourceLimit(n),
        Abort::Timeout => crate::Error::Format("automaton construction timed out".into()),
    }
}

/// The lasso-shaped automaton of a symbolic trace: one state per position,
/// the edge out of position `i` guarded by step `i`, every state accepting.
pub fn trace_automaton(t: &SymbolicTrace) -> BuchiAutomaton {
    let n = t.len();
    BuchiAutomaton {
        state_count: n,
        initial: vec![0],
        transitions: (0..n)
            .map(|i| Transition { from: i, guard: t.step(i).clone(), to: t.successor(i) })
            .collect(),
        accepting: vec![true; n],
    }
}

/// One step of an accepting product run.
#[derive(Debug, Clone)]
pub(crate) struct ProductEdge {
    /// A letter consistent with both the trace step and the tableau guard.
    pub letter: u32,
    pub pos: u32,
    pub neg: u32,
}

struct Product<'a> {
    trace: &'a SymbolicTrace,
    models: Vec<StepModels>,
    tab: &'a mut Tableau,
    sets: u32,
    budget: Budget,
}

impl LassoGraph for Product<'_> {
    // (trace position, tableau state, level)
    type Node = (u32, u32, u32);
    type Edge = ProductEdge;

    fn initial(&mut self) -> Result<Vec<Self::Node>, Abort> {
        Ok(vec![(0, self.tab.initial(), 0)])
    }

    fn successors(&mut self, (pos, q, level): Self::Node, out: &mut Vec<(ProductEdge, Self::Node)>) -> Result<(), Abort> {
        let edges = self.tab.edges(q, &self.budget)?;
        let models = &self.models[pos as usize];
        let succ = self.trace.successor(pos as usize) as u32;
        for TEdge { pos: p, neg, target, postponed } in edges.iter() {
            if let Some(letter) = models.witness(*p, *neg) {
                let l = next_level(level, self.sets, postponed);
                out.push((ProductEdge { letter, pos: *p, neg: *neg }, (succ, *target, l)));
            }
        }
        Ok(())
    }

    fn is_accepting(&self, (_, _, level): Self::Node) -> bool {
        level == self.sets
    }
}

/// A formula compiled once and checked against many traces.
#[derive(Debug)]
pub struct PreparedFormula {
    tab: Tableau,
    width: u8,
}

pub(crate) enum Search {
    Found(ndfs::Lasso<ProductEdge>),
    Empty,
    Aborted(CheckResult),
}

impl PreparedFormula {
    /// Prepares `f` for universal checks (the tableau of `¬f`).
    pub fn universal(f: &Formula) -> Self {
        PreparedFormula { tab: Tableau::new(f, true), width: width_of(f.prop_mask()) }
    }

    /// Prepares `f` for existential checks (the tableau of `f`).
    pub fn existential(f: &Formula) -> Self {
        PreparedFormula { tab: Tableau::new(f, false), width: width_of(f.prop_mask()) }
    }

    pub(crate) fn search(&mut self, t: &SymbolicTrace, opts: CheckOptions) -> Search {
        let budget = opts.budget();
        let sets = self.tab.acceptance_sets();
        let mut product = Product {
            trace: t,
            models: t.steps().map(PropConstraint::models).collect(),
            tab: &mut self.tab,
            sets,
            budget,
        };
        match find_accepting_lasso(&mut product, budget) {
            Ok(Some(l)) => Search::Found(l),
            Ok(None) => Search::Empty,
            Err(Abort::Timeout) => Search::Aborted(CheckResult::Timeout),
            Err(Abort::StateCap(n)) => {
                Search::Aborted(CheckResult::InternalError(format!("state cap of {n} exceeded")))
            }
        }
    }

    /// Universal check; only meaningful for [`PreparedFormula::universal`].
    pub fn check_universal(&mut self, t: &SymbolicTrace, opts: CheckOptions) -> CheckResult {
        let width = self.width.max(width_of(t.prop_mask()));
        match self.search(t, opts) {
            Search::Empty => CheckResult::Holds,
            Search::Found(l) => {
                let letters = |es: &[ProductEdge]| es.iter().map(|e| e.letter).collect();
                CheckResult::Violated(ConcreteLasso::new(width, letters(&l.stem), letters(&l.cycle)))
            }
            Search::Aborted(r) => r,
        }
    }

    /// Existential check; only meaningful for [`PreparedFormula::existential`].
    pub fn check_existential(&mut self, t: &SymbolicTrace, opts: CheckOptions) -> CheckResult {
        match self.search(t, opts) {
            Search::Empty => CheckResult::Violated(None),
            Search::Found(_) => CheckResult::Holds,
            Search::Aborted(r) => r,
        }
    }

    pub fn tableau_states(&self) -> usize {
        self.tab.state_count()
    }
}

fn width_of(mask: u32) -> u8 {
    (32 - mask.leading_zeros()) as u8
}

/// Whether every word represented by `t` satisfies `f`.
pub fn check_universal(t: &SymbolicTrace, f: &Formula, opts: CheckOptions) -> CheckResult {
    PreparedFormula::universal(f).check_universal(t, opts)
}

/// Whether some word represented by `t` satisfies `f`.
pub fn check_existential(t: &SymbolicTrace, f: &Formula, opts: CheckOptions) -> CheckResult {
    PreparedFormula::existential(f).check_existential(t, opts)
}

/// Literal cubes `(pos, neg)`, one per step.
pub(crate) type Cubes = Vec<(u32, u32)>;

/// First accepting lasso of `f`'s automaton as stem and cycle cubes.
/// `None` when `f` is unsatisfiable.
pub(crate) fn satisfying_lasso(f: &Formula, opts: CheckOptions) -> Result<Option<(Cubes, Cubes)>, CheckResult> {
    let mut prepared = PreparedFormula::existential(f);
    match prepared.search(&SymbolicTrace::universal(), opts) {
        Search::Found(l) => {
            let cubes = |es: &[ProductEdge]| es.iter().map(|e| (e.pos, e.neg)).collect();
            Ok(Some((cubes(&l.stem), cubes(&l.cycle))))
        }
        Search::Empty => Ok(None),
        Search::Aborted(r) => Err(r),
    }
}
