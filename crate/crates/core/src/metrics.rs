//! Outcome categories and the distinctiveness metric.
//!
//! Distinctiveness of a correct formula against a batch of other traces is
//! `1 - satisfied / others`: 1.0 when it fits none of the other traces,
//! 0.0 when it fits all of them (as a tautology does).

use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::DatasetPair;
use crate::error::{Error, Result};
use crate::ltl::{parse_formula, Alphabet, Formula};
use crate::semantics::{CheckOptions, CheckResult, PreparedFormula};
use crate::trace::SymbolicTrace;
use crate::vocab::{Domain, Vocabulary};

pub const DEFAULT_DISTINCTIVENESS_LIMIT: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum OutcomeCategory {
    /// Semantically correct, not token-identical to the ground truth.
    Correct,
    /// Token-identical to the ground truth. Counted under Correct as well.
    Exact,
    Incorrect,
    Invalid,
    /// Check timed out or hit an internal error.
    Timeout,
}

impl OutcomeCategory {
    pub fn is_correct(self) -> bool {
        matches!(self, OutcomeCategory::Correct | OutcomeCategory::Exact)
    }
}

pub fn categorize(
    prediction: &str,
    ground_truth: &str,
    trace: &SymbolicTrace,
    alphabet: Alphabet,
    opts: CheckOptions,
) -> OutcomeCategory {
    let Ok(f) = parse_formula(prediction, alphabet) else {
        return OutcomeCategory::Invalid;
    };
    let vocab = Vocabulary::new(alphabet);
    let tokens = |s: &str| vocab.tokenize(s, Domain::Formula).ok();
    if tokens(prediction).is_some() && tokens(prediction) == tokens(ground_truth) {
        return OutcomeCategory::Exact;
    }
    match PreparedFormula::universal(&f).check_universal(trace, opts) {
        CheckResult::Holds => OutcomeCategory::Correct,
        CheckResult::Violated(_) => OutcomeCategory::Incorrect,
        CheckResult::Timeout | CheckResult::InternalError(_) => OutcomeCategory::Timeout,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistinctivenessScore {
    pub value: f64,
    pub satisfied_other_count: usize,
    pub other_count: usize,
    /// Pairs whose check timed out; counted as not satisfied.
    pub timeout_pairs: usize,
}

impl DistinctivenessScore {
    pub fn from_counts(satisfied: usize, others: usize, timeouts: usize) -> Self {
        DistinctivenessScore {
            value: 1.0 - satisfied as f64 / others as f64,
            satisfied_other_count: satisfied,
            other_count: others,
            timeout_pairs: timeouts,
        }
    }
}

/// Distinctiveness of `f` on `own` against `others` (which must not
/// contain `own`'s slot). Fails when `f` does not hold on `own`.
pub fn distinctiveness(
    f: &Formula,
    own: &SymbolicTrace,
    others: &[SymbolicTrace],
    opts: CheckOptions,
) -> Result<DistinctivenessScore> {
    if others.is_empty() {
        return Err(Error::Config("distinctiveness needs at least one other trace".into()));
    }
    let mut prepared = PreparedFormula::universal(f);
    if !prepared.check_universal(own, opts).holds() {
        return Err(Error::NotCorrectForOwnTrace);
    }
    Ok(distinctiveness_prepared(&mut prepared, others, opts))
}

pub(crate) fn distinctiveness_prepared(
    prepared: &mut PreparedFormula,
    others: &[SymbolicTrace],
    opts: CheckOptions,
) -> DistinctivenessScore {
    let (mut satisfied, mut timeouts) = (0, 0);
    for o in others {
        match prepared.check_universal(o, opts) {
            CheckResult::Holds => satisfied += 1,
            CheckResult::Violated(_) => {}
            CheckResult::Timeout | CheckResult::InternalError(_) => timeouts += 1,
        }
    }
    DistinctivenessScore::from_counts(satisfied, others.len(), timeouts)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistinctivenessSummary {
    pub count: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub perfect: usize,
    pub timeout_pairs: usize,
}

impl DistinctivenessSummary {
    pub fn from_scores(scores: &[DistinctivenessScore]) -> Option<Self> {
        if scores.is_empty() {
            return None;
        }
        let mut values: Vec<f64> = scores.iter().map(|s| s.value).collect();
        values.sort_by(f64::total_cmp);
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(DistinctivenessSummary {
            count: values.len(),
            mean,
            std: var.sqrt(),
            q1: nearest_rank(&values, 25),
            q2: nearest_rank(&values, 50),
            q3: nearest_rank(&values, 75),
            perfect: values.iter().filter(|&&v| v == 1.0).count(),
            timeout_pairs: scores.iter().map(|s| s.timeout_pairs).sum(),
        })
    }
}

/// Nearest-rank percentile of sorted, non-empty data.
pub fn nearest_rank(sorted: &[f64], percent: usize) -> f64 {
    let rank = (percent * sorted.len()).div_ceil(100).max(1);
    sorted[rank - 1]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairRecord {
    pub index: usize,
    pub category: OutcomeCategory,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distinctiveness: Option<DistinctivenessScore>,
    /// `|u| + |v|`
    pub trace_length: usize,
    pub trace_tokens: usize,
    pub formula_tokens: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CategoryCounts {
    /// Includes exact matches.
    pub correct: usize,
    pub exact: usize,
    pub incorrect: usize,
    pub invalid: usize,
    pub timeout: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub total: usize,
    pub counts: CategoryCounts,
    pub distinctiveness: Option<DistinctivenessSummary>,
    #[serde(skip)]
    pub pairs: Vec<PairRecord>,
}

#[derive(Debug, Clone, Copy)]
pub struct ReportConfig {
    pub alphabet: Alphabet,
    pub check: CheckOptions,
    /// At most this many leading pairs form the distinctiveness batch;
    /// zero disables the metric.
    pub distinctiveness_limit: usize,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            alphabet: Alphabet::default(),
            check: CheckOptions::default(),
            distinctiveness_limit: DEFAULT_DISTINCTIVENESS_LIMIT,
        }
    }
}

pub fn batch_report(pairs: &[DatasetPair], predictions: &[String], cfg: &ReportConfig) -> Result<EvalReport> {
    if pairs.len() != predictions.len() {
        return Err(Error::LengthMismatch { pairs: pairs.len(), predictions: predictions.len() });
    }
    let mut records: Vec<PairRecord> = pairs
        .par_iter()
        .zip(predictions.par_iter())
        .enumerate()
        .map(|(index, (pair, pred))| PairRecord {
            index,
            category: categorize(pred, &pair.formula.to_polish(), &pair.trace, cfg.alphabet, cfg.check),
            distinctiveness: None,
            trace_length: pair.trace.len(),
            trace_tokens: pair.trace.text_len(),
            formula_tokens: pred.chars().count(),
        })
        .collect();

    let batch = cfg.distinctiveness_limit.min(pairs.len());
    if batch >= 2 {
        let traces: Vec<SymbolicTrace> = pairs[..batch].iter().map(|p| p.trace.clone()).collect();
        let scores: Vec<Option<DistinctivenessScore>> = (0..batch)
            .into_par_iter()
            .map(|i| {
                if !records[i].category.is_correct() {
                    return None;
                }
                let f = parse_formula(&predictions[i], cfg.alphabet).ok()?;
                let others: Vec<SymbolicTrace> = traces
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, t)| t.clone())
                    .collect();
                Some(distinctiveness_prepared(&mut PreparedFormula::universal(&f), &others, cfg.check))
            })
            .collect();
        for (r, s) in records.iter_mut().zip(scores) {
            r.distinctiveness = s;
        }
    }

    let mut counts = CategoryCounts::default();
    for r in &records {
        match r.category {
            OutcomeCategory::Exact => {
                counts.exact += 1;
                counts.correct += 1;
            }
            OutcomeCategory::Correct => counts.correct += 1,
            OutcomeCategory::Incorrect => counts.incorrect += 1,
            OutcomeCategory::Invalid => counts.invalid += 1,
            OutcomeCategory::Timeout => counts.timeout += 1,
        }
    }
    let scores: Vec<DistinctivenessScore> = records.iter().filter_map(|r| r.distinctiveness).collect();
    Ok(EvalReport {
        total: records.len(),
        counts,
        distinctiveness: DistinctivenessSummary::from_scores(&scores),
        pairs: records,
    })
}

impl EvalReport {
    pub fn percent(&self, count: usize) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            100.0 * count as f64 / self.total as f64
        }
    }

    /// One JSON record per pair, then a summary record.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.pairs {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        serde_json::to_writer(&mut w, &serde_json::json!({ "summary": self }))?;
        w.write_all(b"\n")?;
        Ok(())
    }

    pub fn table(&self) -> String {
        let c = &self.counts;
        let mut out = String::new();
        let _ = writeln!(out, "{:<10} {:>8} {:>8}", "category", "count", "%");
        for (name, n) in [
            ("Correct", c.correct),
            ("Exact", c.exact),
            ("Incorrect", c.incorrect),
            ("Invalid", c.invalid),
            ("Timeout", c.timeout),
        ] {
            let _ = writeln!(out, "{:<10} {:>8} {:>8.2}", name, n, self.percent(n));
        }
        let _ = writeln!(out, "{:<10} {:>8}", "Total", self.total);
        if let Some(d) = &self.distinctiveness {
            let _ = writeln!(
                out,
                "distinctiveness over {} formulae: avg {:.3} ± {:.3}, Q1 {:.3}, Q2 {:.3}, Q3 {:.3}, perfect {}, timed-out pairs {}",
                d.count, d.mean, d.std, d.q1, d.q2, d.q3, d.perfect, d.timeout_pairs
            );
        }
        out
    }

    /// Distinctiveness against trace length, trace tokens and formula tokens.
    pub fn scatter_csv(&self) -> String {
        let mut out = String::from("index,distinctiveness,trace_length,trace_tokens,formula_tokens\n");
        for r in &self.pairs {
            if let Some(d) = r.distinctiveness {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    r.index, d.value, r.trace_length, r.trace_tokens, r.formula_tokens
                );
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::parse_trace;

    fn t(s: &str) -> SymbolicTrace {
        parse_trace(s, Alphabet::default()).unwrap()
    }

    fn f(s: &str) -> Formula {
        parse_formula(s, Alphabet::default()).unwrap()
    }

    fn cat(pred: &str, truth: &str, trace: &str) -> OutcomeCategory {
        categorize(pred, truth, &t(trace), Alphabet::default(), CheckOptions::default())
    }

    #[test]
    fn categories() {
        assert_eq!(cat("&UaeXXd", "&UaeXXd", "&a!e;e;d;{1}"), OutcomeCategory::Exact);
        assert_eq!(cat("&UaeXXd", "&XXdUae", "&a!e;e;d;{1}"), OutcomeCategory::Correct);
        assert_eq!(cat("Ua", "a", "a;{1}"), OutcomeCategory::Invalid);
        assert_eq!(cat("XXb", "U1c", "a;&a!b;{c}"), OutcomeCategory::Incorrect);
        let tight = CheckOptions { timeout: Some(std::time::Duration::ZERO), ..Default::default() };
        assert_eq!(categorize("U1c", "c", &t("{c}"), Alphabet::default(), tight), OutcomeCategory::Timeout);
    }

    #[test]
    fn distinctiveness_anchors() {
        let others = [t("{a}"), t("{!a}"), t("b;{1}")];
        let d = distinctiveness(&Formula::True, &t("{1}"), &others, CheckOptions::default()).unwrap();
        assert_eq!(d.value, 0.0);
        assert_eq!(d.satisfied_other_count, 3);
        let d = distinctiveness(&f("&cXc"), &t("c;{c}"), &others, CheckOptions::default()).unwrap();
        assert_eq!(d.value, 1.0);
        let d = distinctiveness(&f("a"), &t("{a}"), &[t("a;{1}"), t("{b}")], CheckOptions::default()).unwrap();
        assert_eq!(d.value, 0.5);
        assert!(matches!(
            distinctiveness(&f("a"), &t("{b}"), &others, CheckOptions::default()),
            Err(Error::NotCorrectForOwnTrace)
        ));
    }

    #[test]
    fn quartiles_nearest_rank() {
        let v = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(nearest_rank(&v, 25), 0.1);
        assert_eq!(nearest_rank(&v, 50), 0.2);
        assert_eq!(nearest_rank(&v, 75), 0.3);
        assert_eq!(nearest_rank(&[0.7], 25), 0.7);
        let s: Vec<_> = [1.0, 0.5, 0.0].iter().map(|&v| DistinctivenessScore { value: v, satisfied_other_count: 0, other_count: 1, timeout_pairs: 0 }).collect();
        let sum = DistinctivenessSummary::from_scores(&s).unwrap();
        assert_eq!((sum.q1, sum.q2, sum.q3, sum.perfect), (0.0, 0.5, 1.0, 1));
        assert!((sum.mean - 0.5).abs() < 1e-12);
    }

    #[test]
    fn report_length_mismatch() {
        let pairs = vec![DatasetPair { trace: t("{a}"), formula: f("a") }];
        let r = batch_report(&pairs, &[], &ReportConfig::default());
        assert!(matches!(r, Err(Error::LengthMismatch { pairs: 1, predictions: 0 })));
    }
}
