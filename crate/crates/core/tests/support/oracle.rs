//! Brute-force reference semantics for small formulae and traces.
//!
//! A formula set is flattened into a DAG and evaluated on 64 concrete lasso
//! words at once, one bit per word. Universal satisfaction on a symbolic
//! trace is approximated by searching all represented lassos up to a prefix
//! extension and period bound: a falsifying word proves a violation, and
//! when the bound is large enough the absence of one proves the formula.

#![allow(dead_code)]

use std::collections::HashMap;

use ltlmine::{Alphabet, Formula, Prop, SymbolicTrace};

/// Every formula with exactly `ops` operators over the given leaves, no
/// duplicates removed.
pub fn all_formulae(leaves: &[Formula], ops: usize) -> Vec<Formula> {
    if ops == 0 {
        return leaves.to_vec();
    }
    let mut out = Vec::new();
    for c in all_formulae(leaves, ops - 1) {
        out.push(Formula::not(c.clone()));
        out.push(Formula::next(c));
    }
    for i in 0..ops {
        let left = all_formulae(leaves, i);
        let right = all_formulae(leaves, ops - 1 - i);
        for l in &left {
            for r in &right {
                out.push(Formula::and(l.clone(), r.clone()));
                out.push(Formula::until(l.clone(), r.clone()));
            }
        }
    }
    out
}

pub fn leaves(alphabet: Alphabet) -> Vec<Formula> {
    let mut v = vec![Formula::True, Formula::False];
    v.extend((0..alphabet.size()).map(|p| Formula::Atom(Prop(p))));
    v
}

#[derive(Clone, Copy)]
enum Op {
    True,
    False,
    Atom(u8),
    Not(usize),
    And(usize, usize),
    Next(usize),
    Until(usize, usize),
}

/// Hash-consed formula DAG; `roots[i]` is the node of the i-th input.
pub struct Dag {
    ops: Vec<Op>,
    pub roots: Vec<usize>,
}

impl Dag {
    pub fn new(formulae: &[Formula]) -> Dag {
        let mut ids: HashMap<Formula, usize> = HashMap::new();
        let mut ops = Vec::new();
        let roots = formulae.iter().map(|f| intern(f, &mut ids, &mut ops)).collect();
        Dag { ops, roots }
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    /// Truth values of every node at every position, `out[node * n + i]`,
    /// with bit `l` for lane `l`.
    pub fn eval(&self, lanes: &Lanes) -> Vec<u64> {
        let n = lanes.len;
        let succ = |i: usize| if i + 1 < n { i + 1 } else { lanes.loop_start };
        let mut v = vec![0u64; self.ops.len() * n];
        for (k, op) in self.ops.iter().enumerate() {
            let (head, tail) = v.split_at_mut(k * n);
            let out = &mut tail[..n];
            let at = |c: usize, i: usize| head[c * n + i];
            match *op {
                Op::True => out.fill(!0),
                Op::False => out.fill(0),
                Op::Atom(p) => out.copy_from_slice(&lanes.atoms[p as usize]),
                Op::Not(c) => (0..n).for_each(|i| out[i] = !at(c, i)),
                Op::And(a, b) => (0..n).for_each(|i| out[i] = at(a, i) & at(b, i)),
                Op::Next(c) => (0..n).for_each(|i| out[i] = at(c, succ(i))),
                Op::Until(a, b) => {
                    // least fixed point of b | (a & X r)
                    (0..n).for_each(|i| out[i] = at(b, i));
                    loop {
                        let mut changed = false;
                        for i in (0..n).rev() {
                            let nv = at(b, i) | (at(a, i) & out[succ(i)]);
                            if nv != out[i] {
                                out[i] = nv;
                                changed = true;
                            }
                        }
                        if !changed {
                            break;
                        }
                    }
                }
            }
        }
        v
    }
}

fn intern(f: &Formula, ids: &mut HashMap<Formula, usize>, ops: &mut Vec<Op>) -> usize {
    if let Some(&id) = ids.get(f) {
        return id;
    }
    let op = match f {
        Formula::True => Op::True,
        Formula::False => Op::False,
        Formula::Atom(p) => Op::Atom(p.0),
        Formula::Not(c) => Op::Not(intern(c, ids, ops)),
        Formula::Next(c) => Op::Next(intern(c, ids, ops)),
        Formula::And(l, r) => {
            let (l, r) = (intern(l, ids, ops), intern(r, ids, ops));
            Op::And(l, r)
        }
        Formula::Until(l, r) => {
            let (l, r) = (intern(l, ids, ops), intern(r, ids, ops));
            Op::Until(l, r)
        }
    };
    ops.push(op);
    ids.insert(f.clone(), ops.len() - 1);
    ops.len() - 1
}

/// Up to 64 concrete lasso words of one shape, bit-sliced.
pub struct Lanes {
    pub len: usize,
    pub loop_start: usize,
    pub count: usize,
    /// `atoms[p][i]`: lanes where proposition `p` holds at position `i`.
    pub atoms: Vec<Vec<u64>>,
}

impl Lanes {
    pub fn new(props: usize, len: usize, loop_start: usize, words: &[Vec<u32>]) -> Lanes {
        assert!(words.len() <= 64);
        let mut atoms = vec![vec![0u64; len]; props];
        for (lane, w) in words.iter().enumerate() {
            for (i, &letter) in w.iter().enumerate() {
                for (p, a) in atoms.iter_mut().enumerate() {
                    if letter & (1 << p) != 0 {
                        a[i] |= 1 << lane;
                    }
                }
            }
        }
        Lanes { len, loop_start, count: words.len(), atoms }
    }

    pub fn mask(&self) -> u64 {
        if self.count == 64 {
            !0
        } else {
            (1u64 << self.count) - 1
        }
    }
}

/// Letters (valuations over `props` propositions) allowed at each trace
/// position, by brute force over the step constraint.
pub fn allowed_letters(t: &SymbolicTrace, props: usize) -> Vec<Vec<u32>> {
    t.steps().map(|s| (0..1u32 << props).filter(|&v| s.holds(v)).collect()).collect()
}

/// Result of the bounded search for one trace: for each formula, the
/// smallest `(extension, period)` at which a falsifying word was found.
pub struct Search {
    pub witness: Vec<Option<(usize, usize)>>,
    pub words: usize,
}

/// Searches every represented lasso with prefix `|u| + k` (k ≤
/// `max_extension`) and period length in `1..=max_period`. Words whose
/// period is a whole number of trace periods only are considered, which
/// covers every represented ultimately periodic word up to that size.
pub fn bounded_search(
    dag: &Dag,
    t: &SymbolicTrace,
    props: usize,
    max_extension: usize,
    max_period: usize,
) -> Search {
    let allowed = allowed_letters(t, props);
    let u = t.prefix().len();
    let v = t.period().len();
    let class = |i: usize| if i < u { i } else { u + (i - u) % v };
    let mut witness = vec![None; dag.roots.len()];
    let mut words = 0;
    for k in 0..=max_extension {
        for p in 1..=max_period {
            if p % v != 0 || (k % v != 0 && v > 1) {
                continue;
            }
            let len = u + k + p;
            let choices: Vec<&Vec<u32>> = (0..len).map(|i| &allowed[class(i)]).collect();
            if choices.iter().any(|c| c.is_empty()) {
                continue;
            }
            let total: usize = choices.iter().map(|c| c.len()).product();
            let mut batch: Vec<Vec<u32>> = Vec::with_capacity(64);
            for idx in 0..total {
                let mut rest = idx;
                let w: Vec<u32> = choices
                    .iter()
                    .map(|c| {
                        let l = c[rest % c.len()];
                        rest /= c.len();
                        l
                    })
                    .collect();
                batch.push(w);
                if batch.len() == 64 || idx + 1 == total {
                    let lanes = Lanes::new(props, len, u + k, &batch);
                    let vals = dag.eval(&lanes);
                    let mask = lanes.mask();
                    for (fi, &root) in dag.roots.iter().enumerate() {
                        if witness[fi].is_none() && vals[root * len] & mask != mask {
                            witness[fi] = Some((k, p));
                        }
                    }
                    words += batch.len();
                    batch.clear();
                }
            }
        }
    }
    Search { witness, words }
}

/// Every symbolic trace with `|u| ≤ max_prefix` and `|v| = 1` whose steps
/// are drawn from `constraints`.
pub fn traces_over(constraints: &[&str], max_prefix: usize, alphabet: Alphabet) -> Vec<SymbolicTrace> {
    let mut out = Vec::new();
    for len in 0..=max_prefix {
        let total = constraints.len().pow(len as u32 + 1);
        for idx in 0..total {
            let mut rest = idx;
            let mut steps: Vec<&str> = Vec::new();
            for _ in 0..=len {
                steps.push(constraints[rest % constraints.len()]);
                rest /= constraints.len();
            }
            let (prefix, period) = steps.split_at(len);
            let mut text = String::new();
            for s in prefix {
                text.push_str(s);
                text.push(';');
            }
            text.push('{');
            text.push_str(period[0]);
            text.push('}');
            out.push(ltlmine::parse_trace(&text, alphabet).expect("generated trace parses"));
        }
    }
    out
}
