use std::collections::HashMap;

use crate::dataset::DatasetPair;
use crate::error::{Error, Result};
use crate::vocab::{Domain, TokenId, TokenSeq, Vocabulary};

use super::Scorer;

/// Add-one smoothed n-gram model over `trace ‖ formula ‖ EOS` id streams.
/// Only formula positions (and the final EOS) are counted as targets.
#[derive(Debug, Clone)]
pub struct NgramScorer {
    n: usize,
    vocab: Vocabulary,
    counts: HashMap<Vec<TokenId>, (Vec<u32>, u32)>,
}

impl NgramScorer {
    pub fn train(pairs: &[DatasetPair], n: usize, vocab: &Vocabulary) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("n-gram order must be at least 1".into()));
        }
        if pairs.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let size = vocab.formula_size();
        let mut counts: HashMap<Vec<TokenId>, (Vec<u32>, u32)> = HashMap::new();
        for p in pairs {
            let trace = vocab.tokenize(&p.trace.to_text(), Domain::Trace)?;
            let formula = vocab.tokenize(&p.formula.to_polish(), Domain::Formula)?;
            let mut stream = trace.ids;
            let first = stream.len();
            stream.extend(formula.ids);
            stream.push(vocab.eos());
            for i in first..stream.len() {
                let ctx = context(vocab, &stream[..i], n);
                let target = vocab.formula_index(stream[i]).expect("formula token");
                let entry = counts.entry(ctx).or_insert_with(|| (vec![0; size], 0));
                entry.0[target] += 1;
                entry.1 += 1;
            }
        }
        Ok(NgramScorer { n, vocab: vocab.clone(), counts })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    /// Smoothed log-probabilities of the next formula token.
    pub fn logits(&self, trace: &TokenSeq, prefix: &TokenSeq) -> Vec<f64> {
        let size = self.vocab.formula_size();
        let mut history = trace.ids.clone();
        history.extend_from_slice(&prefix.ids);
        let ctx = context(&self.vocab, &history, self.n);
        match self.counts.get(&ctx) {
            Some((c, total)) => {
                let denom = (*total as f64 + size as f64).ln();
                c.iter().map(|&k| (k as f64 + 1.0).ln() - denom).collect()
            }
            None => vec![-(size as f64).ln(); size],
        }
    }
}

/// The last `n - 1` ids of `history`, left-padded with PAD.
fn context(vocab: &Vocabulary, history: &[TokenId], n: usize) -> Vec<TokenId> {
    let k = n - 1;
    let mut ctx = vec![vocab.pad(); k.saturating_sub(history.len())];
    ctx.extend_from_slice(&history[history.len().saturating_sub(k)..]);
    ctx
}

impl Scorer for NgramScorer {
    fn formula_vocab_size(&self) -> usize {
        self.vocab.formula_size()
    }

    fn next_logits(&mut self, trace: &TokenSeq, prefix: &TokenSeq) -> Result<Vec<f64>> {
        Ok(self.logits(trace, prefix))
    }
}
