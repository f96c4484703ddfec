//! LTL abstract syntax, Polish-notation parsing and printing.
//!
//! The grammar is the minimal one: constants `1`/`0`, atomic propositions,
//! `!` (not), `&` (and), `X` (next) and `U` (until). Formulae are written in
//! Polish (prefix) notation, so `&ab` is `a & b` and `UaXb` is `a U Xb`.

use std::fmt;

use crate::error::{ParseError, ParseErrorKind};

/// Largest supported proposition alphabet (`a`..=`z`).
pub const MAX_PROPS: u8 = 26;

/// An atomic proposition, stored as its index in the alphabet (`a` = 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Prop(pub u8);

impl Prop {
    pub fn from_char(c: char) -> Option<Prop> {
        if c.is_ascii_lowercase() {
            Some(Prop(c as u8 - b'a'))
        } else {
            None
        }
    }

    pub fn as_char(self) -> char {
        (b'a' + self.0) as char
    }

    pub fn bit(self) -> u32 {
        1 << self.0
    }
}

/// The active proposition alphabet: the first `size` lowercase letters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Alphabet {
    size: u8,
}

impl Alphabet {
    pub fn new(size: u8) -> Result<Self, crate::Error> {
        if size == 0 || size > MAX_PROPS {
            return Err(crate::Error::InvalidAlphabet(size));
        }
        Ok(Alphabet { size })
    }

    pub fn size(self) -> u8 {
        self.size
    }

    pub fn contains(self, p: Prop) -> bool {
        p.0 < self.size
    }

    pub fn props(self) -> impl Iterator<Item = Prop> {
        (0..self.size).map(Prop)
    }

    /// Bit mask with one bit per proposition of the alphabet.
    pub fn mask(self) -> u32 {
        if self.size >= 32 {
            u32::MAX
        } else {
            (1u32 << self.size) - 1
        }
    }

    /// Smallest alphabet covering every proposition in `mask`, at least `a`.
    pub fn covering(mask: u32) -> Self {
        let size = (32 - mask.leading_zeros()).max(1) as u8;
        Alphabet { size: size.min(MAX_PROPS) }
    }
}

impl Default for Alphabet {
    fn default() -> Self {
        Alphabet { size: 5 }
    }
}

/// An LTL formula.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    True,
    False,
    Atom(Prop),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Next(Box<Formula>),
    Until(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn atom(c: char) -> Formula {
        Formula::Atom(Prop::from_char(c).expect("lowercase proposition"))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(l: Formula, r: Formula) -> Formula {
        Formula::And(Box::new(l), Box::new(r))
    }

    pub fn next(f: Formula) -> Formula {
        Formula::Next(Box::new(f))
    }

    pub fn until(l: Formula, r: Formula) -> Formula {
        Formula::Until(Box::new(l), Box::new(r))
    }

    /// `¬(¬l ∧ ¬r)`; disjunction is not part of the grammar.
    pub fn or(l: Formula, r: Formula) -> Formula {
        Formula::not(Formula::and(Formula::not(l), Formula::not(r)))
    }

    /// `n` nested `X` operators around `f`.
    pub fn next_n(n: usize, mut f: Formula) -> Formula {
        for _ in 0..n {
            f = Formula::next(f);
        }
        f
    }

    pub fn node_count(&self) -> usize {
        match self {
            Formula::True | Formula::False | Formula::Atom(_) => 1,
            Formula::Not(c) | Formula::Next(c) => 1 + c.node_count(),
            Formula::And(l, r) | Formula::Until(l, r) => 1 + l.node_count() + r.node_count(),
        }
    }

    /// Number of `!`, `&`, `X` and `U` nodes. Leaves are free.
    pub fn operator_count(&self) -> usize {
        match self {
            Formula::True | Formula::False | Formula::Atom(_) => 0,
            Formula::Not(c) | Formula::Next(c) => 1 + c.operator_count(),
            Formula::And(l, r) | Formula::Until(l, r) => {
                1 + l.operator_count() + r.operator_count()
            }
        }
    }

    /// True when the formula has no `X`/`U` node.
    pub fn is_propositional(&self) -> bool {
        match self {
            Formula::True | Formula::False | Formula::Atom(_) => true,
            Formula::Not(c) => c.is_propositional(),
            Formula::And(l, r) => l.is_propositional() && r.is_propositional(),
            Formula::Next(_) | Formula::Until(_, _) => false,
        }
    }

    /// Bit mask of the propositions occurring in the formula.
    pub fn prop_mask(&self) -> u32 {
        match self {
            Formula::True | Formula::False => 0,
            Formula::Atom(p) => p.bit(),
            Formula::Not(c) | Formula::Next(c) => c.prop_mask(),
            Formula::And(l, r) | Formula::Until(l, r) => l.prop_mask() | r.prop_mask(),
        }
    }

    /// Evaluates a propositional formula under a valuation bit mask.
    ///
    /// Temporal operators are not meaningful here; `X`/`U` evaluate their
    /// argument(s) in place, which callers must rule out beforehand.
    pub fn eval_prop(&self, valuation: u32) -> bool {
        match self {
            Formula::True => true,
            Formula::False => false,
            Formula::Atom(p) => valuation & p.bit() != 0,
            Formula::Not(c) => !c.eval_prop(valuation),
            Formula::And(l, r) => l.eval_prop(valuation) && r.eval_prop(valuation),
            Formula::Next(c) => c.eval_prop(valuation),
            Formula::Until(_, r) => r.eval_prop(valuation),
        }
    }

    pub fn to_polish(&self) -> String {
        let mut out = String::with_capacity(self.node_count());
        self.write_polish(&mut out);
        out
    }

    fn write_polish(&self, out: &mut String) {
        match self {
            Formula::True => out.push('1'),
            Formula::False => out.push('0'),
            Formula::Atom(p) => out.push(p.as_char()),
            Formula::Not(c) => {
                out.push('!');
                c.write_polish(out);
            }
            Formula::Next(c) => {
                out.push('X');
                c.write_polish(out);
            }
            Formula::And(l, r) => {
                out.push('&');
                l.write_polish(out);
                r.write_polish(out);
            }
            Formula::Until(l, r) => {
                out.push('U');
                l.write_polish(out);
                r.write_polish(out);
            }
        }
    }

    pub fn print(&self, notation: Notation) -> String {
        match notation {
            Notation::Polish => self.to_polish(),
            Notation::Infix => self.to_infix(Glyphs::Ascii),
        }
    }

    /// Infix rendering. `!` and `X` bind tightest, then `U`, then `&`.
    /// Chains of `&` associate to the left; nested `U` is always
    /// parenthesized.
    pub fn to_infix(&self, glyphs: Glyphs) -> String {
        let mut out = String::new();
        self.write_infix(glyphs, &mut out);
        out
    }

    fn precedence(&self) -> u8 {
        match self {
            Formula::And(_, _) => 1,
            Formula::Until(_, _) => 2,
            _ => 3,
        }
    }

    fn write_infix(&self, g: Glyphs, out: &mut String) {
        let (not, and, next, until, t, f) = match g {
            Glyphs::Ascii => ("!", " & ", "X", " U ", "1", "0"),
            Glyphs::Unicode => ("¬", " ∧ ", "X", " U ", "⊤", "⊥"),
        };
        match self {
            Formula::True => out.push_str(t),
            Formula::False => out.push_str(f),
            Formula::Atom(p) => out.push(p.as_char()),
            Formula::Not(c) | Formula::Next(c) => {
                out.push_str(if matches!(self, Formula::Not(_)) { not } else { next });
                c.write_child(g, out, c.precedence() < 3);
            }
            Formula::And(l, r) => {
                l.write_child(g, out, false);
                out.push_str(and);
                r.write_child(g, out, r.precedence() <= 1);
            }
            Formula::Until(l, r) => {
                l.write_child(g, out, l.precedence() <= 2);
                out.push_str(until);
                r.write_child(g, out, r.precedence() <= 2);
            }
        }
    }

    fn write_child(&self, g: Glyphs, out: &mut String, parens: bool) {
        if parens {
            out.push('(');
            self.write_infix(g, out);
            out.push(')');
        } else {
            self.write_infix(g, out);
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_polish())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Notation {
    Polish,
    Infix,
}

/// Glyph set for infix output. Unicode is display-only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Glyphs {
    #[default]
    Ascii,
    Unicode,
}

/// Number of operands a formula character takes, or `None` for characters
/// outside the formula grammar.
pub fn arity_of(c: char) -> Option<usize> {
    match c {
        '1' | '0' => Some(0),
        '!' | 'X' => Some(1),
        '&' | 'U' => Some(2),
        c if c.is_ascii_lowercase() => Some(0),
        _ => None,
    }
}

/// Options shared by the formula and trace-constraint parsers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ParseOptions {
    /// Accept `|` (rewritten to `!&!x!y`). Only honored inside trace steps.
    pub allow_disjunction: bool,
}

pub(crate) struct PolishParser<'a> {
    chars: &'a [char],
    pos: usize,
    offset: usize,
    alphabet: Alphabet,
    temporal: bool,
    disjunction: bool,
}

impl<'a> PolishParser<'a> {
    pub(crate) fn new(chars: &'a [char], offset: usize, alphabet: Alphabet) -> Self {
        PolishParser { chars, pos: 0, offset, alphabet, temporal: true, disjunction: false }
    }

    pub(crate) fn propositional(mut self, disjunction: bool) -> Self {
        self.temporal = false;
        self.disjunction = disjunction;
        self
    }

    fn err(&self, kind: ParseErrorKind, at: usize) -> ParseError {
        ParseError { kind, position: self.offset + at }
    }

    /// Parses exactly one formula spanning all of `chars`.
    pub(crate) fn parse_complete(mut self) -> Result<Formula, ParseError> {
        if self.chars.is_empty() {
            return Err(self.err(ParseErrorKind::Empty, 0));
        }
        let f = self.parse()?;
        if self.pos < self.chars.len() {
            return Err(self.err(ParseErrorKind::ExcessTokens, self.pos));
        }
        Ok(f)
    }

    // Iterative so that long `X` chains cannot overflow the stack.
    fn parse(&mut self) -> Result<Formula, ParseError> {
        enum Pending {
            Not,
            Next,
            AndLeft,
            AndRight(Formula),
            UntilLeft,
            UntilRight(Formula),
            OrLeft,
            OrRight(Formula),
        }
        let mut stack: Vec<Pending> = Vec::new();
        loop {
            let Some(&c) = self.chars.get(self.pos) else {
                return Err(self.err(ParseErrorKind::PrematureEnd, self.pos));
            };
            let at = self.pos;
            self.pos += 1;
            let mut done = match c {
                '1' => Formula::True,
                '0' => Formula::False,
                '!' => {
                    stack.push(Pending::Not);
                    continue;
                }
                '&' => {
                    stack.push(Pending::AndLeft);
                    continue;
                }
                'X' if self.temporal => {
                    stack.push(Pending::Next);
                    continue;
                }
                'U' if self.temporal => {
                    stack.push(Pending::UntilLeft);
                    continue;
                }
                '|' if self.disjunction => {
                    stack.push(Pending::OrLeft);
                    continue;
                }
                c => match Prop::from_char(c) {
                    Some(p) if self.alphabet.contains(p) => Formula::Atom(p),
                    _ => return Err(self.err(ParseErrorKind::UnknownCharacter(c), at)),
                },
            };
            loop {
                match stack.pop() {
                    None => return Ok(done),
                    Some(Pending::Not) => done = Formula::not(done),
                    Some(Pending::Next) => done = Formula::next(done),
                    Some(Pending::AndLeft) => {
                        stack.push(Pending::AndRight(done));
                        break;
                    }
                    Some(Pending::UntilLeft) => {
                        stack.push(Pending::UntilRight(done));
                        break;
                    }
                    Some(Pending::OrLeft) => {
                        stack.push(Pending::OrRight(done));
                        break;
                    }
                    Some(Pending::AndRight(l)) => done = Formula::and(l, done),
                    Some(Pending::UntilRight(l)) => done = Formula::until(l, done),
                    Some(Pending::OrRight(l)) => done = Formula::or(l, done),
                }
            }
        }
    }
}

/// Parses a Polish-notation formula over `alphabet`.
pub fn parse_formula(text: &str, alphabet: Alphabet) -> Result<Formula, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    PolishParser::new(&chars, 0, alphabet).parse_complete()
}
