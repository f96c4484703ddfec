//! Symbolic lasso traces `u v^ω` and their text form `a;&ab;{b}`.

use std::fmt;

use crate::error::{ParseError, ParseErrorKind};
use crate::ltl::{Alphabet, Formula, ParseOptions, PolishParser, Prop};

/// A per-step propositional constraint (no `X`/`U`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PropConstraint(Formula);

impl PropConstraint {
    pub fn new(f: Formula) -> Option<Self> {
        f.is_propositional().then_some(PropConstraint(f))
    }

    pub fn top() -> Self {
        PropConstraint(Formula::True)
    }

    /// Conjunction of literals, ordered by proposition; `1` when empty.
    pub fn from_literals(pos: u32, neg: u32) -> Self {
        let mut acc: Option<Formula> = None;
        for i in 0..32u8 {
            let bit = 1u32 << i;
            let lit = if pos & bit != 0 {
                Formula::Atom(Prop(i))
            } else if neg & bit != 0 {
                Formula::not(Formula::Atom(Prop(i)))
            } else {
                continue;
            };
            acc = Some(match acc {
                None => lit,
                Some(prev) => Formula::and(prev, lit),
            });
        }
        PropConstraint(acc.unwrap_or(Formula::True))
    }

    pub fn formula(&self) -> &Formula {
        &self.0
    }

    pub fn into_formula(self) -> Formula {
        self.0
    }

    pub fn holds(&self, valuation: u32) -> bool {
        self.0.eval_prop(valuation)
    }

    /// Satisfying assignments restricted to the propositions the constraint
    /// mentions.
    pub fn models(&self) -> StepModels {
        let mask = self.0.prop_mask();
        let bits: Vec<u32> = (0..32).filter(|i| mask & (1 << i) != 0).map(|i| 1u32 << i).collect();
        let mut patterns = Vec::new();
        for combo in 0u64..(1u64 << bits.len()) {
            let v = bits
                .iter()
                .enumerate()
                .filter(|(j, _)| combo & (1 << j) != 0)
                .fold(0u32, |acc, (_, b)| acc | b);
            if self.0.eval_prop(v) {
                patterns.push(v);
            }
        }
        StepModels { mask, patterns }
    }
}

impl fmt::Display for PropConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Models of a step constraint over the propositions it mentions (`mask`).
#[derive(Debug, Clone)]
pub struct StepModels {
    pub mask: u32,
    pub patterns: Vec<u32>,
}

impl StepModels {
    /// A full valuation satisfying both this constraint and the literal cube
    /// `(pos, neg)`, if one exists. Unmentioned propositions follow the cube
    /// and default to false.
    pub fn witness(&self, pos: u32, neg: u32) -> Option<u32> {
        let need_pos = pos & self.mask;
        let need_neg = neg & self.mask;
        self.patterns
            .iter()
            .find(|&&p| p & need_pos == need_pos && p & need_neg == 0)
            .map(|&p| p | (pos & !self.mask))
    }
}

/// A symbolic lasso: every concrete word whose `i`-th letter satisfies the
/// `i`-th step constraint of `prefix · period^ω`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SymbolicTrace {
    prefix: Vec<PropConstraint>,
    period: Vec<PropConstraint>,
}

impl SymbolicTrace {
    /// Returns `None` when the period is empty.
    pub fn new(prefix: Vec<PropConstraint>, period: Vec<PropConstraint>) -> Option<Self> {
        (!period.is_empty()).then_some(SymbolicTrace { prefix, period })
    }

    /// The trace `{1}` denoting every word.
    pub fn universal() -> Self {
        SymbolicTrace { prefix: Vec::new(), period: vec![PropConstraint::top()] }
    }

    pub fn prefix(&self) -> &[PropConstraint] {
        &self.prefix
    }

    pub fn period(&self) -> &[PropConstraint] {
        &self.period
    }

    /// `|u| + |v|`, the number of distinct positions.
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.prefix.len() + self.period.len()
    }

    pub fn step(&self, i: usize) -> &PropConstraint {
        if i < self.prefix.len() {
            &self.prefix[i]
        } else {
            &self.period[(i - self.prefix.len()) % self.period.len()]
        }
    }

    /// Successor of a position in the lasso's finite position graph.
    pub fn successor(&self, i: usize) -> usize {
        if i + 1 < self.len() {
            i + 1
        } else {
            self.prefix.len()
        }
    }

    pub fn steps(&self) -> impl Iterator<Item = &PropConstraint> {
        self.prefix.iter().chain(self.period.iter())
    }

    pub fn prop_mask(&self) -> u32 {
        self.steps().fold(0, |m, s| m | s.formula().prop_mask())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.prefix {
            out.push_str(&s.formula().to_polish());
            out.push(';');
        }
        out.push('{');
        for (i, s) in self.period.iter().enumerate() {
            if i > 0 {
                out.push(';');
            }
            out.push_str(&s.formula().to_polish());
        }
        out.push('}');
        out
    }

    /// Length in characters of [`SymbolicTrace::to_text`].
    pub fn text_len(&self) -> usize {
        self.steps().map(|s| s.formula().node_count()).sum::<usize>() + self.len() + 1
    }
}

impl fmt::Display for SymbolicTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

pub fn print_trace(t: &SymbolicTrace) -> String {
    t.to_text()
}

pub fn parse_trace(text: &str, alphabet: Alphabet) -> Result<SymbolicTrace, ParseError> {
    parse_trace_with(text, alphabet, ParseOptions::default())
}

pub fn parse_trace_with(
    text: &str,
    alphabet: Alphabet,
    opts: ParseOptions,
) -> Result<SymbolicTrace, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let lasso = |why, at| ParseError { kind: ParseErrorKind::MalformedLasso(why), position: at };
    let open = match chars.iter().position(|&c| c == '{') {
        Some(i) => i,
        None => return Err(lasso("missing period block `{...}`", chars.len())),
    };
    if let Some(extra) = chars[open + 1..].iter().position(|&c| c == '{') {
        return Err(lasso("more than one `{`", open + 1 + extra));
    }
    let close = match chars.iter().position(|&c| c == '}') {
        Some(i) => i,
        None => return Err(lasso("missing closing `}`", chars.len())),
    };
    if close < open {
        return Err(lasso("`}` before `{`", close));
    }
    if close + 1 != chars.len() {
        return Err(lasso("period block must end the trace", close + 1));
    }
    if open > 0 && chars[open - 1] != ';' {
        return Err(lasso("prefix steps must be terminated by `;`", open));
    }
    if open + 1 == close {
        return Err(lasso("empty period", close));
    }

    let parse_steps = |start: usize, end: usize| -> Result<Vec<PropConstraint>, ParseError> {
        let mut steps = Vec::new();
        let mut s = start;
        for i in start..=end {
            if i == end || chars[i] == ';' {
                if i == s {
                    return Err(lasso("empty step", i));
                }
                let f = PolishParser::new(&chars[s..i], s, alphabet)
                    .propositional(opts.allow_disjunction)
                    .parse_complete()?;
                steps.push(PropConstraint(f));
                s = i + 1;
            }
        }
        Ok(steps)
    };
    // `open - 1` drops the trailing `;` of the prefix
    let prefix = if open == 0 { Vec::new() } else { parse_steps(0, open - 1)? };
    let period = parse_steps(open + 1, close)?;
    Ok(SymbolicTrace { prefix, period })
}
