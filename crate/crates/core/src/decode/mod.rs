//! Syntax-enforcing beam search over pluggable next-token scorers.
//!
//! A scorer returns one logit per formula-block token (EOS last). The
//! enforcement mask tracks how many subformulae are still expected: while
//! any are, EOS is illegal; once none are, only EOS is legal.

mod ngram;
mod remote;

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ltl::{parse_formula, Formula};
use crate::trace::SymbolicTrace;
use crate::vocab::{Domain, TokenId, TokenSeq, Vocabulary};

pub use ngram::NgramScorer;
pub use remote::{serve, RemoteScorer, PROTOCOL_VERSION};

pub const DEFAULT_BEAM: usize = 3;
pub const DEFAULT_MAX_TOKENS: usize = 100;

/// Source of next-token logits over the formula block of a vocabulary.
pub trait Scorer {
    /// Length of the returned logit vectors.
    fn formula_vocab_size(&self) -> usize;

    /// Logits for the token following `prefix`, given the trace.
    fn next_logits(&mut self, trace: &TokenSeq, prefix: &TokenSeq) -> Result<Vec<f64>>;
}

impl<S: Scorer + ?Sized> Scorer for &mut S {
    fn formula_vocab_size(&self) -> usize {
        (**self).formula_vocab_size()
    }

    fn next_logits(&mut self, trace: &TokenSeq, prefix: &TokenSeq) -> Result<Vec<f64>> {
        (**self).next_logits(trace, prefix)
    }
}

impl<S: Scorer + ?Sized> Scorer for Box<S> {
    fn formula_vocab_size(&self) -> usize {
        (**self).formula_vocab_size()
    }

    fn next_logits(&mut self, trace: &TokenSeq, prefix: &TokenSeq) -> Result<Vec<f64>> {
        (**self).next_logits(trace, prefix)
    }
}

/// Equal logits for every token.
#[derive(Debug, Clone, Copy)]
pub struct UniformScorer {
    size: usize,
}

impl UniformScorer {
    pub fn new(vocab: &Vocabulary) -> Self {
        UniformScorer { size: vocab.formula_size() }
    }
}

impl Scorer for UniformScorer {
    fn formula_vocab_size(&self) -> usize {
        self.size
    }

    fn next_logits(&mut self, _: &TokenSeq, _: &TokenSeq) -> Result<Vec<f64>> {
        Ok(vec![0.0; self.size])
    }
}

/// Subformulae still expected after `prefix`. Fails with
/// `TokenAfterComplete(i)` when token `i` follows a complete formula.
pub fn expected_statements(vocab: &Vocabulary, prefix: &[TokenId]) -> Result<usize> {
    let mut expected: usize = 1;
    for (i, &id) in prefix.iter().enumerate() {
        if expected == 0 {
            return Err(Error::TokenAfterComplete(i));
        }
        expected = expected + vocab.operand_count(id)? - 1;
    }
    Ok(expected)
}

fn apply_mask(logits: &mut [f64], eos: usize, expected: usize) {
    if expected == 0 {
        for (i, l) in logits.iter_mut().enumerate() {
            if i != eos {
                *l = f64::NEG_INFINITY;
            }
        }
    } else {
        logits[eos] = f64::NEG_INFINITY;
    }
}

/// The syntax mask applied to `logits` for the token after `prefix`.
pub fn enforce(vocab: &Vocabulary, prefix: &[TokenId], logits: &[f64]) -> Result<Vec<f64>> {
    if logits.len() != vocab.formula_size() {
        return Err(Error::VectorLengthMismatch { expected: vocab.formula_size(), got: logits.len() });
    }
    let expected = expected_statements(vocab, prefix)?;
    let mut out = logits.to_vec();
    apply_mask(&mut out, vocab.eos_index(), expected);
    Ok(out)
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return vec![f64::NEG_INFINITY; logits.len()];
    }
    let sum: f64 = logits.iter().map(|l| (l - max).exp()).sum();
    let lse = max + sum.ln();
    logits.iter().map(|l| l - lse).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeConfig {
    pub beam_size: usize,
    /// Formula tokens allowed before EOS.
    pub max_tokens: usize,
    pub enforce_syntax: bool,
    /// Seeds the tie-break between equally scored candidates.
    pub seed: u64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig { beam_size: DEFAULT_BEAM, max_tokens: DEFAULT_MAX_TOKENS, enforce_syntax: true, seed: 0 }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.beam_size == 0 || self.max_tokens == 0 {
            return Err(Error::Config("beam size and max tokens must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DecodeStatus {
    Valid,
    /// The finished sequence does not parse.
    Invalid,
    /// The token budget ran out before any beam finished.
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutput {
    /// Formula tokens, without EOS.
    pub tokens: Vec<TokenId>,
    pub text: String,
    pub formula: Option<Formula>,
    pub log_prob: f64,
    pub status: DecodeStatus,
    /// Scores of all finished beams, best first.
    pub finished_scores: Vec<f64>,
}

impl DecodeOutput {
    pub fn is_valid(&self) -> bool {
        self.status == DecodeStatus::Valid
    }

    /// The formula, or the raw text prefixed with `INVALID `.
    pub fn to_line(&self) -> String {
        match &self.formula {
            Some(f) => f.to_polish(),
            None => format!("INVALID {}", self.text),
        }
    }
}

#[derive(Debug, Clone)]
struct Hyp {
    tokens: Vec<TokenId>,
    score: f64,
    expected: usize,
}

struct Candidate {
    parent: usize,
    index: usize,
    score: f64,
    tie: u64,
}

fn by_score(a: &Candidate, b: &Candidate) -> Ordering {
    b.score.total_cmp(&a.score).then(a.tie.cmp(&b.tie))
}

/// Length-bounded beam search with summed log-probabilities.
pub fn beam_decode<S: Scorer + ?Sized>(
    scorer: &mut S,
    vocab: &Vocabulary,
    trace: &SymbolicTrace,
    cfg: &DecodeConfig,
) -> Result<DecodeOutput> {
    cfg.validate()?;
    let size = vocab.formula_size();
    if scorer.formula_vocab_size() != size {
        return Err(Error::VectorLengthMismatch { expected: size, got: scorer.formula_vocab_size() });
    }
    let eos = vocab.eos_index();
    let trace_seq = vocab.tokenize(&trace.to_text(), Domain::Trace)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut live = vec![Hyp { tokens: Vec::new(), score: 0.0, expected: 1 }];
    let mut finished: Vec<Hyp> = Vec::new();
    let mut stalled: Vec<Hyp> = Vec::new();

    while !live.is_empty() {
        let mut candidates = Vec::new();
        for (parent, h) in live.iter().enumerate() {
            let prefix = TokenSeq { domain: Domain::Formula, ids: h.tokens.clone() };
            let mut logits = scorer.next_logits(&trace_seq, &prefix)?;
            if logits.len() != size {
                return Err(Error::VectorLengthMismatch { expected: size, got: logits.len() });
            }
            if cfg.enforce_syntax {
                apply_mask(&mut logits, eos, h.expected);
            }
            let lp = log_softmax(&logits);
            let at_budget = h.tokens.len() >= cfg.max_tokens;
            let mut any = false;
            for (index, &l) in lp.iter().enumerate() {
                if l == f64::NEG_INFINITY || l.is_nan() || (at_budget && index != eos) {
                    continue;
                }
                any = true;
                candidates.push(Candidate { parent, index, score: h.score + l, tie: rng.gen() });
            }
            if !any {
                stalled.push(h.clone());
            }
        }
        candidates.sort_by(by_score);
        candidates.truncate(cfg.beam_size);

        let mut next = Vec::new();
        for c in candidates {
            let h = &live[c.parent];
            if c.index == eos {
                finished.push(Hyp { tokens: h.tokens.clone(), score: c.score, expected: h.expected });
                continue;
            }
            let id = vocab.formula_token(c.index).expect("index below formula size");
            let expected = match vocab.operand_count(id) {
                Ok(n) => (h.expected + n).saturating_sub(1),
                Err(_) => h.expected,
            };
            let mut tokens = h.tokens.clone();
            tokens.push(id);
            next.push(Hyp { tokens, score: c.score, expected });
        }
        live = next;

        // Scores never increase, so a finished beam at least as good as
        // every live one cannot be overtaken.
        let best_done = finished.iter().map(|h| h.score).fold(f64::NEG_INFINITY, f64::max);
        let best_live = live.iter().map(|h| h.score).fold(f64::NEG_INFINITY, f64::max);
        if !finished.is_empty() && best_done >= best_live {
            break;
        }
    }

    finished.sort_by(|a, b| b.score.total_cmp(&a.score));
    let finished_scores: Vec<f64> = finished.iter().map(|h| h.score).collect();
    let Some(best) = finished.into_iter().next() else {
        stalled.sort_by(|a, b| b.score.total_cmp(&a.score));
        let raw = stalled.into_iter().next().unwrap_or(Hyp { tokens: Vec::new(), score: f64::NEG_INFINITY, expected: 1 });
        let text = detokenize(vocab, &raw.tokens);
        return Ok(DecodeOutput {
            tokens: raw.tokens,
            text,
            formula: None,
            log_prob: raw.score,
            status: DecodeStatus::BudgetExhausted,
            finished_scores,
        });
    };
    let text = detokenize(vocab, &best.tokens);
    let formula = parse_formula(&text, vocab.alphabet()).ok();
    let status = if formula.is_some() { DecodeStatus::Valid } else { DecodeStatus::Invalid };
    Ok(DecodeOutput { tokens: best.tokens, text, formula, log_prob: best.score, status, finished_scores })
}

fn detokenize(vocab: &Vocabulary, ids: &[TokenId]) -> String {
    ids.iter().filter_map(|&id| vocab.glyph(id)).collect()
}
