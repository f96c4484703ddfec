//! Token inventory for traces and formulae.
//!
//! Characters shared by both languages (propositions, constants, `!`, `&`)
//! get one id per domain. Ids are laid out as
//!
//! ```text
//! <pad> <start> | trace tokens | formula tokens | <eos>
//! ```
//!
//! so the formula domain plus EOS is a contiguous block ending at the last
//! id. Scorers emit logits over exactly that block.

use std::fmt;

use crate::error::{Error, Result};
use crate::ltl::{arity_of, Alphabet, Prop};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct TokenId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    Trace,
    Formula,
}

impl Domain {
    pub fn name(self) -> &'static str {
        match self {
            Domain::Trace => "trace",
            Domain::Formula => "formula",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Pad,
    Start,
    Eos,
    Char { domain: Domain, glyph: char, duplicated: bool },
}

const TRACE_SYMBOLS: [char; 8] = ['1', '0', '!', '&', '|', ';', '{', '}'];
const FORMULA_SYMBOLS: [char; 6] = ['1', '0', '!', '&', 'X', 'U'];

/// A sequence of token ids belonging to one domain.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TokenSeq {
    pub domain: Domain,
    pub ids: Vec<TokenId>,
}

impl TokenSeq {
    pub fn new(domain: Domain) -> Self {
        TokenSeq { domain, ids: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    alphabet: Alphabet,
    tokens: Vec<TokenKind>,
    trace_start: u32,
    formula_start: u32,
}

impl Vocabulary {
    pub fn new(alphabet: Alphabet) -> Self {
        let shared = |c: char| c.is_ascii_lowercase() || matches!(c, '1' | '0' | '!' | '&');
        let mut tokens = vec![TokenKind::Pad, TokenKind::Start];
        let trace_start = tokens.len() as u32;
        let props: Vec<char> = alphabet.props().map(Prop::as_char).collect();
        for &glyph in props.iter().chain(TRACE_SYMBOLS.iter()) {
            tokens.push(TokenKind::Char { domain: Domain::Trace, glyph, duplicated: shared(glyph) });
        }
        let formula_start = tokens.len() as u32;
        for &glyph in props.iter().chain(FORMULA_SYMBOLS.iter()) {
            tokens.push(TokenKind::Char { domain: Domain::Formula, glyph, duplicated: shared(glyph) });
        }
        tokens.push(TokenKind::Eos);
        Vocabulary { alphabet, tokens, trace_start, formula_start }
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn kind(&self, id: TokenId) -> Option<TokenKind> {
        self.tokens.get(id.0 as usize).copied()
    }

    pub fn pad(&self) -> TokenId {
        TokenId(0)
    }

    pub fn start(&self) -> TokenId {
        TokenId(1)
    }

    pub fn eos(&self) -> TokenId {
        TokenId(self.tokens.len() as u32 - 1)
    }

    /// Size of the formula output block, EOS included.
    pub fn formula_size(&self) -> usize {
        self.tokens.len() - self.formula_start as usize
    }

    /// Position of a formula token (or EOS) within the formula output block.
    pub fn formula_index(&self, id: TokenId) -> Option<usize> {
        (id.0 >= self.formula_start && (id.0 as usize) < self.tokens.len())
            .then(|| (id.0 - self.formula_start) as usize)
    }

    pub fn formula_token(&self, index: usize) -> Option<TokenId> {
        (index < self.formula_size()).then(|| TokenId(self.formula_start + index as u32))
    }

    pub fn eos_index(&self) -> usize {
        self.formula_size() - 1
    }

    pub fn id_of(&self, c: char, domain: Domain) -> Option<TokenId> {
        let (start, end) = match domain {
            Domain::Trace => (self.trace_start, self.formula_start),
            Domain::Formula => (self.formula_start, self.tokens.len() as u32 - 1),
        };
        (start..end).map(TokenId).find(|&id| {
            matches!(self.tokens[id.0 as usize], TokenKind::Char { glyph, .. } if glyph == c)
        })
    }

    pub fn glyph(&self, id: TokenId) -> Option<char> {
        match self.kind(id)? {
            TokenKind::Char { glyph, .. } => Some(glyph),
            _ => None,
        }
    }

    pub fn tokenize(&self, text: &str, domain: Domain) -> Result<TokenSeq> {
        let ids = text
            .chars()
            .map(|c| self.id_of(c, domain).ok_or(Error::UnknownToken(c, domain.name())))
            .collect::<Result<Vec<_>>>()?;
        Ok(TokenSeq { domain, ids })
    }

    /// Inverse of [`Vocabulary::tokenize`]. Special tokens are rendered by
    /// name (`<eos>` etc.).
    pub fn detokenize(&self, seq: &TokenSeq) -> Result<String> {
        let mut out = String::new();
        for &id in &seq.ids {
            match self.kind(id).ok_or(Error::InvalidTokenId(id.0))? {
                TokenKind::Char { glyph, .. } => out.push(glyph),
                other => out.push_str(special_name(other)),
            }
        }
        Ok(out)
    }

    /// Operands consumed by a formula token: 0 for leaves, 1 for `!`/`X`,
    /// 2 for `&`/`U`.
    pub fn operand_count(&self, id: TokenId) -> Result<usize> {
        match self.kind(id) {
            Some(TokenKind::Char { domain: Domain::Formula, glyph, .. }) => {
                Ok(arity_of(glyph).expect("formula glyph"))
            }
            _ => Err(Error::NotAFormulaToken(id.0)),
        }
    }

    /// One line per token: `<id> <domain> <glyph-or-special-name>`.
    pub fn manifest(&self) -> String {
        let mut out = String::new();
        for (i, kind) in self.tokens.iter().enumerate() {
            let (domain, name) = match *kind {
                TokenKind::Char { domain, glyph, .. } => (domain.name(), glyph.to_string()),
                other => ("special", special_name(other).to_string()),
            };
            out.push_str(&format!("{i} {domain} {name}\n"));
        }
        out
    }
}

impl Default for Vocabulary {
    fn default() -> Self {
        Vocabulary::new(Alphabet::default())
    }
}

fn special_name(kind: TokenKind) -> &'static str {
    match kind {
        TokenKind::Pad => "<pad>",
        TokenKind::Start => "<start>",
        TokenKind::Eos => "<eos>",
        TokenKind::Char { .. } => unreachable!(),
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout() {
        let v = Vocabulary::default();
        // pad, start, 5 + 8 trace, 5 + 6 formula, eos
        assert_eq!(v.len(), 2 + 13 + 11 + 1);
        assert_eq!(v.formula_size(), 12);
        assert_eq!(v.kind(v.eos()), Some(TokenKind::Eos));
        assert_eq!(v.formula_index(v.eos()), Some(v.eos_index()));
        assert_eq!(v.formula_token(0), v.id_of('a', Domain::Formula));
    }

    #[test]
    fn shared_characters_are_duplicated() {
        let v = Vocabulary::default();
        for c in ['a', 'e', '1', '0', '!', '&'] {
            let t = v.id_of(c, Domain::Trace).unwrap();
            let f = v.id_of(c, Domain::Formula).unwrap();
            assert_ne!(t, f);
            assert!(matches!(v.kind(t), Some(TokenKind::Char { duplicated: true, .. })));
        }
        assert!(v.id_of('X', Domain::Trace).is_none());
        assert!(v.id_of(';', Domain::Formula).is_none());
        assert!(matches!(
            v.kind(v.id_of(';', Domain::Trace).unwrap()),
            Some(TokenKind::Char { duplicated: false, .. })
        ));
    }

    #[test]
    fn tokenize_examples() {
        let v = Vocabulary::default();
        let f = v.tokenize("&ab", Domain::Formula).unwrap();
        assert_eq!(f.len(), 3);
        assert!(f.ids.iter().all(|&id| v.formula_index(id).is_some()));
        assert_eq!(v.tokenize("a;{b}", Domain::Trace).unwrap().len(), 5);
        assert_ne!(v.tokenize("a", Domain::Trace).unwrap(), v.tokenize("a", Domain::Formula).unwrap());
        assert!(matches!(v.tokenize("a;", Domain::Formula), Err(Error::UnknownToken(';', "formula"))));
        assert_eq!(v.detokenize(&v.tokenize("UaXb", Domain::Formula).unwrap()).unwrap(), "UaXb");
    }

    #[test]
    fn operand_counts() {
        let v = Vocabulary::default();
        let id = |c| v.id_of(c, Domain::Formula).unwrap();
        assert_eq!(v.operand_count(id('&')).unwrap(), 2);
        assert_eq!(v.operand_count(id('U')).unwrap(), 2);
        assert_eq!(v.operand_count(id('X')).unwrap(), 1);
        assert_eq!(v.operand_count(id('!')).unwrap(), 1);
        assert_eq!(v.operand_count(id('a')).unwrap(), 0);
        assert_eq!(v.operand_count(id('1')).unwrap(), 0);
        assert!(matches!(v.operand_count(v.eos()), Err(Error::NotAFormulaToken(_))));
        let semi = v.id_of(';', Domain::Trace).unwrap();
        assert!(v.operand_count(semi).is_err());
    }

    #[test]
    fn manifest_lines() {
        let v = Vocabulary::default();
        let m = v.manifest();
        let lines: Vec<&str> = m.lines().collect();
        assert_eq!(lines.len(), v.len());
        assert_eq!(lines[0], "0 special <pad>");
        assert_eq!(lines[2], "2 trace a");
        assert_eq!(*lines.last().unwrap(), "26 special <eos>");
    }
}
