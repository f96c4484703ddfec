//! Nested depth-first search for accepting lassos in implicit Büchi graphs.
//!
//! Both searches use explicit stacks. Successor lists are computed once per
//! node and shared by the outer and inner search.

use std::collections::HashMap;
use std::hash::Hash;
use std::time::Instant;

/// Why a search stopped before reaching a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Abort {
    Timeout,
    StateCap(usize),
}

pub(crate) trait LassoGraph {
    type Node: Copy + Eq + Hash;
    type Edge: Clone;

    fn initial(&mut self) -> Result<Vec<Self::Node>, Abort>;
    fn successors(&mut self, node: Self::Node, out: &mut Vec<(Self::Edge, Self::Node)>) -> Result<(), Abort>;
    fn is_accepting(&self, node: Self::Node) -> bool;
}

/// An accepting run: `stem` leads from an initial node to the loop entry,
/// `cycle` returns to it and passes an accepting node.
#[derive(Debug, Clone)]
pub(crate) struct Lasso<E> {
    pub stem: Vec<E>,
    pub cycle: Vec<E>,
}

/// Deadline polled every few hundred expansions.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Budget {
    pub deadline: Option<Instant>,
    pub state_cap: usize,
}

impl Budget {
    pub fn check_time(&self) -> Result<(), Abort> {
        match self.deadline {
            Some(d) if Instant::now() >= d => Err(Abort::Timeout),
            _ => Ok(()),
        }
    }
}

type Successors<G> = Vec<Option<Vec<(<G as LassoGraph>::Edge, u32)>>>;

struct Explored<G: LassoGraph> {
    ids: HashMap<G::Node, u32>,
    nodes: Vec<G::Node>,
    succ: Successors<G>,
    scratch: Vec<(G::Edge, G::Node)>,
    budget: Budget,
    ticks: u32,
}

impl<G: LassoGraph> Explored<G> {
    fn id(&mut self, n: G::Node) -> Result<u32, Abort> {
        if let Some(&id) = self.ids.get(&n) {
            return Ok(id);
        }
        if self.nodes.len() >= self.budget.state_cap {
            return Err(Abort::StateCap(self.budget.state_cap));
        }
        let id = self.nodes.len() as u32;
        self.ids.insert(n, id);
        self.nodes.push(n);
        self.succ.push(None);
        Ok(id)
    }

    fn expand(&mut self, g: &mut G, id: u32) -> Result<(), Abort> {
        if self.succ[id as usize].is_some() {
            return Ok(());
        }
        self.ticks += 1;
        if self.ticks.is_multiple_of(256) {
            self.budget.check_time()?;
        }
        self.scratch.clear();
        let mut scratch = std::mem::take(&mut self.scratch);
        g.successors(self.nodes[id as usize], &mut scratch)?;
        let mut list = Vec::with_capacity(scratch.len());
        for (e, n) in scratch.drain(..) {
            list.push((e, self.id(n)?));
        }
        self.scratch = scratch;
        self.succ[id as usize] = Some(list);
        Ok(())
    }

    fn succ_len(&self, id: u32) -> usize {
        self.succ[id as usize].as_ref().map_or(0, Vec::len)
    }

    fn succ_at(&self, id: u32, i: usize) -> (&G::Edge, u32) {
        let (e, n) = &self.succ[id as usize].as_ref().expect("expanded")[i];
        (e, *n)
    }
}

/// Returns an accepting lasso if the graph's language is non-empty.
pub(crate) fn find_accepting_lasso<G: LassoGraph>(
    g: &mut G,
    budget: Budget,
) -> Result<Option<Lasso<G::Edge>>, Abort> {
    budget.check_time()?;
    let mut ex: Explored<G> = Explored {
        ids: HashMap::new(),
        nodes: Vec::new(),
        succ: Vec::new(),
        scratch: Vec::new(),
        budget,
        ticks: 0,
    };
    let mut outer_seen: Vec<bool> = Vec::new();
    let mut inner_seen: Vec<bool> = Vec::new();
    let mark = |v: &mut Vec<bool>, id: u32| {
        if v.len() <= id as usize {
            v.resize(id as usize + 1, false);
        }
        v[id as usize] = true;
    };
    let seen = |v: &Vec<bool>, id: u32| v.get(id as usize).copied().unwrap_or(false);

    // (node, next successor index, edge used to enter the node)
    let mut outer: Vec<(u32, usize, Option<G::Edge>)> = Vec::new();
    let mut inner: Vec<(u32, usize, Option<G::Edge>)> = Vec::new();

    for init in g.initial()? {
        let root = ex.id(init)?;
        if seen(&outer_seen, root) {
            continue;
        }
        mark(&mut outer_seen, root);
        ex.expand(g, root)?;
        outer.push((root, 0, None));
        while let Some(top) = outer.last_mut() {
            let (node, idx) = (top.0, top.1);
            if idx < ex.succ_len(node) {
                top.1 += 1;
                let (edge, next) = ex.succ_at(node, idx);
                if !seen(&outer_seen, next) {
                    let edge = edge.clone();
                    mark(&mut outer_seen, next);
                    ex.expand(g, next)?;
                    outer.push((next, 0, Some(edge)));
                }
                continue;
            }
            // post-order: look for a cycle through an accepting seed
            if g.is_accepting(ex.nodes[node as usize]) {
                mark(&mut inner_seen, node);
                inner.clear();
                inner.push((node, 0, None));
                while let Some(itop) = inner.last_mut() {
                    let (inode, iidx) = (itop.0, itop.1);
                    if iidx >= ex.succ_len(inode) {
                        inner.pop();
                        continue;
                    }
                    itop.1 += 1;
                    let (edge, next) = ex.succ_at(inode, iidx);
                    if next == node {
                        let closing = edge.clone();
                        let stem = outer.iter().filter_map(|f| f.2.clone()).collect();
                        let mut cycle: Vec<G::Edge> = inner.iter().filter_map(|f| f.2.clone()).collect();
                        cycle.push(closing);
                        return Ok(Some(Lasso { stem, cycle }));
                    }
                    if !seen(&inner_seen, next) {
                        let edge = edge.clone();
                        mark(&mut inner_seen, next);
                        ex.expand(g, next)?;
                        inner.push((next, 0, Some(edge)));
                    }
                }
            }
            outer.pop();
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Explicit graph: adjacency list plus accepting flags.
    struct Explicit {
        adj: Vec<Vec<usize>>,
        acc: Vec<bool>,
    }

    impl LassoGraph for Explicit {
        type Node = usize;
        type Edge = (usize, usize);

        fn initial(&mut self) -> Result<Vec<usize>, Abort> {
            Ok(vec![0])
        }

        fn successors(&mut self, n: usize, out: &mut Vec<((usize, usize), usize)>) -> Result<(), Abort> {
            out.extend(self.adj[n].iter().map(|&m| ((n, m), m)));
            Ok(())
        }

        fn is_accepting(&self, n: usize) -> bool {
            self.acc[n]
        }
    }

    fn budget() -> Budget {
        Budget { deadline: None, state_cap: 1000 }
    }

    fn check_lasso(g: &Explicit, l: &Lasso<(usize, usize)>) {
        let mut at = 0;
        for &(from, to) in l.stem.iter().chain(l.cycle.iter()) {
            assert_eq!(from, at);
            assert!(g.adj[from].contains(&to));
            at = to;
        }
        let entry = l.cycle[0].0;
        assert_eq!(at, entry);
        assert!(l.cycle.iter().any(|&(n, _)| g.acc[n]));
    }

    #[test]
    fn finds_cycle_through_accepting() {
        // 0 -> 1 -> 2 -> 1, 2 accepting
        let mut g = Explicit { adj: vec![vec![1], vec![2], vec![1]], acc: vec![false, false, true] };
        let l = find_accepting_lasso(&mut g, budget()).unwrap().unwrap();
        check_lasso(&g, &l);
    }

    #[test]
    fn accepting_state_off_cycle_is_empty() {
        // 0 (accepting) -> 1 -> 1
        let mut g = Explicit { adj: vec![vec![1], vec![1]], acc: vec![true, false] };
        assert!(find_accepting_lasso(&mut g, budget()).unwrap().is_none());
    }

    #[test]
    fn shared_inner_visits_do_not_hide_cycles() {
        // 0 -> 1 (acc) -> 2 -> 3 (acc) -> 2; 1 never loops back
        let mut g = Explicit {
            adj: vec![vec![1], vec![2], vec![3], vec![2]],
            acc: vec![false, true, false, true],
        };
        let l = find_accepting_lasso(&mut g, budget()).unwrap().unwrap();
        check_lasso(&g, &l);
    }

    #[test]
    fn state_cap_aborts() {
        let n = 50;
        let mut g = Explicit {
            adj: (0..n).map(|i| vec![(i + 1) % n]).collect(),
            acc: vec![false; n],
        };
        let r = find_accepting_lasso(&mut g, Budget { deadline: None, state_cap: 10 });
        assert_eq!(r.unwrap_err(), Abort::StateCap(10));
    }
}
