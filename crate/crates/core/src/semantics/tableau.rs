//! Lazily expanded closure-set tableau for LTL in negation normal form.
//!
//! A state is the set of obligations that must hold from the current
//! position. Expanding a state yields edges labelled by a literal cube (the
//! constraint on the current letter) leading to the set of obligations for
//! the next position. Each edge also records which `U` subformulae it
//! postponed; an edge is in acceptance set `j` unless it postponed until
//! number `j`. The generalized condition is degeneralized with a level
//! counter by the callers.

use std::collections::HashMap;
use std::rc::Rc;

use crate::ltl::Formula;

use super::ndfs::{Abort, Budget};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Node {
    True,
    False,
    Lit(u8, bool),
    And(u32, u32),
    Or(u32, u32),
    Next(u32),
    Until(u32, u32),
    Release(u32, u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(crate) struct TEdge {
    pub pos: u32,
    pub neg: u32,
    pub target: u32,
    /// Indices of the untils postponed by this edge, sorted.
    pub postponed: Box<[u32]>,
}

#[derive(Debug)]
pub(crate) struct Tableau {
    nodes: Vec<Node>,
    intern: HashMap<Node, u32>,
    until_index: HashMap<u32, u32>,
    states: Vec<Box<[u32]>>,
    state_ids: HashMap<Box<[u32]>, u32>,
    edges: Vec<Option<Rc<[TEdge]>>>,
    initial: u32,
}

#[derive(Clone)]
struct Partial {
    pos: u32,
    neg: u32,
    todo: Vec<u32>,
    done: Vec<u32>,
    next: Vec<u32>,
    postponed: Vec<u32>,
}

impl Tableau {
    /// Tableau accepting exactly the models of `f` (or of `¬f` when
    /// `negate` is set).
    pub fn new(f: &Formula, negate: bool) -> Tableau {
        let mut t = Tableau {
            nodes: Vec::new(),
            intern: HashMap::new(),
            until_index: HashMap::new(),
            states: Vec::new(),
            state_ids: HashMap::new(),
            edges: Vec::new(),
            initial: 0,
        };
        let root = t.nnf(f, negate);
        let init: Box<[u32]> = match t.nodes[root as usize] {
            Node::True => Box::new([]),
            _ => Box::new([root]),
        };
        t.initial = t.state_id(init);
        t
    }

    pub fn initial(&self) -> u32 {
        self.initial
    }

    /// Number of generalized acceptance sets (one per `U` node).
    pub fn acceptance_sets(&self) -> u32 {
        self.until_index.len() as u32
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    fn mk(&mut self, n: Node) -> u32 {
        if let Some(&id) = self.intern.get(&n) {
            return id;
        }
        let id = self.nodes.len() as u32;
        self.nodes.push(n);
        self.intern.insert(n, id);
        if let Node::Until(..) = n {
            let k = self.until_index.len() as u32;
            self.until_index.insert(id, k);
        }
        id
    }

    fn kind(&self, id: u32) -> Node {
        self.nodes[id as usize]
    }

    fn mk_and(&mut self, a: u32, b: u32) -> u32 {
        match (self.kind(a), self.kind(b)) {
            (Node::False, _) | (_, Node::False) => self.mk(Node::False),
            (Node::True, _) => b,
            (_, Node::True) => a,
            _ if a == b => a,
            _ => self.mk(Node::And(a.min(b), a.max(b))),
        }
    }

    fn mk_or(&mut self, a: u32, b: u32) -> u32 {
        match (self.kind(a), self.kind(b)) {
            (Node::True, _) | (_, Node::True) => self.mk(Node::True),
            (Node::False, _) => b,
            (_, Node::False) => a,
            _ if a == b => a,
            _ => self.mk(Node::Or(a.min(b), a.max(b))),
        }
    }

    fn mk_next(&mut self, a: u32) -> u32 {
        match self.kind(a) {
            Node::True | Node::False => a,
            _ => self.mk(Node::Next(a)),
        }
    }

    fn mk_until(&mut self, a: u32, b: u32) -> u32 {
        match (self.kind(a), self.kind(b)) {
            (_, Node::True) | (_, Node::False) => b,
            (Node::False, _) => b,
            _ if a == b => a,
            _ => self.mk(Node::Until(a, b)),
        }
    }

    fn mk_release(&mut self, a: u32, b: u32) -> u32 {
        match (self.kind(a), self.kind(b)) {
            (_, Node::True) | (_, Node::False) => b,
            (Node::True, _) => b,
            _ if a == b => a,
            _ => self.mk(Node::Release(a, b)),
        }
    }

    fn nnf(&mut self, f: &Formula, neg: bool) -> u32 {
        match f {
            Formula::True => self.mk(if neg { Node::False } else { Node::True }),
            Formula::False => self.mk(if neg { Node::True } else { Node::False }),
            Formula::Atom(p) => self.mk(Node::Lit(p.0, !neg)),
            Formula::Not(c) => self.nnf(c, !neg),
            Formula::Next(c) => {
                let c = self.nnf(c, neg);
                self.mk_next(c)
            }
            Formula::And(l, r) => {
                let (l, r) = (self.nnf(l, neg), self.nnf(r, neg));
                if neg {
                    self.mk_or(l, r)
                } else {
                    self.mk_and(l, r)
                }
            }
            Formula::Until(l, r) => {
                let (l, r) = (self.nnf(l, neg), self.nnf(r, neg));
                if neg {
                    self.mk_release(l, r)
                } else {
                    self.mk_until(l, r)
                }
            }
        }
    }

    fn state_id(&mut self, set: Box<[u32]>) -> u32 {
        if let Some(&id) = self.state_ids.get(&set) {
            return id;
        }
        let id = self.states.len() as u32;
        self.states.push(set.clone());
        self.state_ids.insert(set, id);
        self.edges.push(None);
        id
    }

    /// Outgoing edges of `state`, expanded on first use.
    pub fn edges(&mut self, state: u32, budget: &Budget) -> Result<Rc<[TEdge]>, Abort> {
        if let Some(e) = &self.edges[state as usize] {
            return Ok(e.clone());
        }
        if self.states.len() >= budget.state_cap {
            return Err(Abort::StateCap(budget.state_cap));
        }
        let start = Partial {
            pos: 0,
            neg: 0,
            todo: self.states[state as usize].to_vec(),
            done: Vec::new(),
            next: Vec::new(),
            postponed: Vec::new(),
        };
        let mut covers = Vec::new();
        self.expand(start, &mut covers);
        let mut out: Vec<TEdge> = Vec::with_capacity(covers.len());
        for mut p in covers {
            p.next.sort_unstable();
            p.next.dedup();
            p.postponed.sort_unstable();
            p.postponed.dedup();
            let target = self.state_id(p.next.into_boxed_slice());
            let e = TEdge { pos: p.pos, neg: p.neg, target, postponed: p.postponed.into_boxed_slice() };
            if !out.contains(&e) {
                out.push(e);
            }
        }
        let rc: Rc<[TEdge]> = out.into();
        self.edges[state as usize] = Some(rc.clone());
        Ok(rc)
    }

    fn expand(&self, mut p: Partial, out: &mut Vec<Partial>) {
        while let Some(id) = p.todo.pop() {
            if p.done.contains(&id) {
                continue;
            }
            p.done.push(id);
            match self.kind(id) {
                Node::True => {}
                Node::False => return,
                Node::Lit(v, positive) => {
                    let bit = 1u32 << v;
                    if positive {
                        if p.neg & bit != 0 {
                            return;
                        }
                        p.pos |= bit;
                    } else {
                        if p.pos & bit != 0 {
                            return;
                        }
                        p.neg |= bit;
                    }
                }
                Node::And(a, b) => {
                    p.todo.push(a);
                    p.todo.push(b);
                }
                Node::Next(a) => p.next.push(a),
                Node::Or(a, b) => {
                    let mut left = p.clone();
                    left.todo.push(a);
                    self.expand(left, out);
                    p.todo.push(b);
                }
                Node::Until(a, b) => {
                    let mut now = p.clone();
                    now.todo.push(b);
                    self.expand(now, out);
                    p.todo.push(a);
                    p.next.push(id);
                    p.postponed.push(self.until_index[&id]);
                }
                Node::Release(a, b) => {
                    let mut now = p.clone();
                    now.todo.push(a);
                    now.todo.push(b);
                    self.expand(now, out);
                    p.todo.push(b);
                    p.next.push(id);
                }
            }
        }
        out.push(p);
    }
}

/// Degeneralization step: the level reached after taking an edge from
/// `level` with `sets` acceptance sets. Level `sets` is accepting.
pub(crate) fn next_level(level: u32, sets: u32, postponed: &[u32]) -> u32 {
    let mut j = if level == sets { 0 } else { level };
    while j < sets && postponed.binary_search(&j).is_err() {
        j += 1;
    }
    j
}
