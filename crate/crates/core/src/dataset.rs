//! Random (trace, formula) pairs: generation, filtering, persistence and
//! splitting.
//!
//! Formulae are sampled with a node count uniform in a range and operators
//! drawn by weight. The trace for a formula is the first accepting lasso
//! the nested DFS finds in its automaton, with the edge guards used as step
//! constraints. Pair `i` of a corpus is drawn from its own ChaCha stream, so
//! output does not depend on the worker count.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ltl::{parse_formula, Alphabet, Formula, Prop};
use crate::semantics::{check_universal, satisfying_lasso, CheckOptions, CheckResult};
use crate::trace::{parse_trace, PropConstraint, SymbolicTrace};

pub const DEFAULT_MAX_TRACE_CHARS: usize = 35;

/// Attempts per pair before generation gives up.
const MAX_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetPair {
    pub trace: SymbolicTrace,
    pub formula: Formula,
}

impl DatasetPair {
    pub fn is_consistent(&self, opts: CheckOptions) -> bool {
        check_universal(&self.trace, &self.formula, opts).holds()
    }

    pub fn to_line(&self) -> String {
        format!("{}\t{}", self.trace.to_text(), self.formula.to_polish())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpWeights {
    pub not: f64,
    pub and: f64,
    pub next: f64,
    pub until: f64,
    /// Weight of each of `1` and `0` relative to a weight of 1 per
    /// proposition when a leaf is drawn.
    pub constant: f64,
}

impl Default for OpWeights {
    fn default() -> Self {
        OpWeights { not: 1.0, and: 1.0, next: 1.0, until: 1.0, constant: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub alphabet_size: u8,
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub weights: OpWeights,
    pub max_trace_chars: usize,
    pub seed: u64,
    #[serde(skip)]
    pub check: CheckOptions,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            alphabet_size: Alphabet::default().size(),
            min_nodes: 2,
            max_nodes: 12,
            weights: OpWeights::default(),
            max_trace_chars: DEFAULT_MAX_TRACE_CHARS,
            seed: 0,
            check: CheckOptions::default(),
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<Alphabet> {
        let alphabet = Alphabet::new(self.alphabet_size)?;
        if self.max_trace_chars < 3 {
            return Err(Error::Config("max trace length must be at least 3".into()));
        }
        if self.min_nodes == 0 || self.min_nodes > self.max_nodes {
            return Err(Error::Config(format!("bad node range {}..={}", self.min_nodes, self.max_nodes)));
        }
        let w = &self.weights;
        let all = [w.not, w.and, w.next, w.until, w.constant];
        if all.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::Config("weights must be finite and non-negative".into()));
        }
        let unary = w.not + w.next;
        let binary = w.and + w.until;
        if self.max_nodes > 1 && unary + binary == 0.0 {
            return Err(Error::Config("all operator weights are zero".into()));
        }
        if self.min_nodes == 2 && self.max_nodes == 2 && unary == 0.0 {
            return Err(Error::Config("two-node formulae need a unary operator".into()));
        }
        Ok(alphabet)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rejected {
    Unsatisfiable,
    TooLong(usize),
    /// Automaton search hit the time or state limit.
    Aborted(String),
    /// The extracted trace failed re-verification.
    Verification,
}

/// Samples a formula with exactly `nodes` nodes. Falls back to a leaf
/// when no operator fits.
pub fn random_formula<R: Rng>(rng: &mut R, nodes: usize, alphabet: Alphabet, w: &OpWeights) -> Formula {
    let leaf = |rng: &mut R| {
        let props = alphabet.size() as f64;
        let x = rng.gen::<f64>() * (props + 2.0 * w.constant);
        if x < props {
            Formula::Atom(Prop((x as u8).min(alphabet.size() - 1)))
        } else if x < props + w.constant {
            Formula::True
        } else {
            Formula::False
        }
    };
    if nodes <= 1 {
        return leaf(rng);
    }
    let binary_ok = nodes >= 3;
    let mut ops = vec![(0u8, w.not), (2, w.next)];
    if binary_ok {
        ops.push((1, w.and));
        ops.push((3, w.until));
    }
    let total: f64 = ops.iter().map(|o| o.1).sum();
    if total == 0.0 {
        return leaf(rng);
    }
    let mut x = rng.gen::<f64>() * total;
    let mut op = ops.last().unwrap().0;
    for &(o, wt) in &ops {
        if x < wt {
            op = o;
            break;
        }
        x -= wt;
    }
    match op {
        0 => Formula::not(random_formula(rng, nodes - 1, alphabet, w)),
        2 => Formula::next(random_formula(rng, nodes - 1, alphabet, w)),
        _ => {
            let left = rng.gen_range(1..=nodes - 2);
            let l = random_formula(rng, left, alphabet, w);
            let r = random_formula(rng, nodes - 1 - left, alphabet, w);
            if op == 1 {
                Formula::and(l, r)
            } else {
                Formula::until(l, r)
            }
        }
    }
}

/// Builds the pair for a given formula, or says why there is none.
pub fn pair_for_formula(f: Formula, max_trace_chars: usize, opts: CheckOptions) -> Result<DatasetPair, Rejected> {
    let (stem, cycle) = match satisfying_lasso(&f, opts) {
        Ok(Some(l)) => l,
        Ok(None) => return Err(Rejected::Unsatisfiable),
        Err(r) => return Err(Rejected::Aborted(r.verdict_name().to_string())),
    };
    let steps = |cubes: Vec<(u32, u32)>| -> Vec<PropConstraint> {
        cubes.into_iter().map(|(p, n)| PropConstraint::from_literals(p, n)).collect()
    };
    let trace = SymbolicTrace::new(steps(stem), steps(cycle)).ok_or(Rejected::Verification)?;
    let len = trace.text_len();
    if len > max_trace_chars {
        return Err(Rejected::TooLong(len));
    }
    match check_universal(&trace, &f, opts) {
        CheckResult::Holds => Ok(DatasetPair { trace, formula: f }),
        CheckResult::Violated(_) => Err(Rejected::Verification),
        other => Err(Rejected::Aborted(other.verdict_name().to_string())),
    }
}

pub fn generate_pair<R: Rng>(rng: &mut R, cfg: &GenConfig) -> Result<DatasetPair, Rejected> {
    let alphabet = Alphabet::new(cfg.alphabet_size).map_err(|e| Rejected::Aborted(e.to_string()))?;
    let nodes = rng.gen_range(cfg.min_nodes..=cfg.max_nodes);
    let f = random_formula(rng, nodes, alphabet, &cfg.weights);
    pair_for_formula(f, cfg.max_trace_chars, cfg.check)
}

fn rng_for(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Pair number `index` of the corpus defined by `cfg`.
pub fn generate_indexed(cfg: &GenConfig, index: usize) -> Result<DatasetPair> {
    let mut rng = rng_for(cfg.seed, index);
    for _ in 0..MAX_ATTEMPTS {
        if let Ok(p) = generate_pair(&mut rng, cfg) {
            return Ok(p);
        }
    }
    Err(Error::Config(format!("no pair accepted after {MAX_ATTEMPTS} attempts")))
}

/// `count` pairs, deterministic in `cfg` (including the seed).
pub fn generate(cfg: &GenConfig, count: usize) -> Result<Vec<DatasetPair>> {
    cfg.validate()?;
    (0..count).into_par_iter().map(|i| generate_indexed(cfg, i)).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct FilterStats {
    pub retained: usize,
    pub dropped: usize,
}

pub fn filter_by_trace_length(pairs: Vec<DatasetPair>, max_chars: usize) -> (Vec<DatasetPair>, FilterStats) {
    let total = pairs.len();
    let kept: Vec<_> = pairs.into_iter().filter(|p| p.trace.text_len() <= max_chars).collect();
    let stats = FilterStats { retained: kept.len(), dropped: total - kept.len() };
    (kept, stats)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FileFormat {
    #[default]
    Tsv,
    Jsonl,
}

impl FileFormat {
    pub fn for_path(path: &Path) -> FileFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => FileFormat::Jsonl,
            _ => FileFormat::Tsv,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Record {
    trace: String,
    formula: String,
}

pub fn write_pairs<W: Write>(pairs: &[DatasetPair], format: FileFormat, mut w: W) -> Result<()> {
    for p in pairs {
        match format {
            FileFormat::Tsv => writeln!(w, "{}", p.to_line())?,
            FileFormat::Jsonl => {
                let r = Record { trace: p.trace.to_text(), formula: p.formula.to_polish() };
                serde_json::to_writer(&mut w, &r)?;
                w.write_all(b"\n")?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `pairs`; the format follows the extension (`.jsonl` or TSV).
pub fn save(pairs: &[DatasetPair], path: &Path) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    write_pairs(pairs, FileFormat::for_path(path), file)
}

#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    pub alphabet: Alphabet,
    pub validate: bool,
    pub check: CheckOptions,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions { alphabet: Alphabet::default(), validate: true, check: CheckOptions::default() }
    }
}

pub fn parse_line(line: &str, format: FileFormat, opts: &LoadOptions) -> Result<DatasetPair> {
    let (trace, formula) = match format {
        FileFormat::Tsv => {
            let mut parts = line.split('\t');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(t), Some(f), None) => (t.to_string(), f.to_string()),
                _ => return Err(Error::Format("expected exactly one TAB".into())),
            }
        }
        FileFormat::Jsonl => {
            let r: Record = serde_json::from_str(line)?;
            (r.trace, r.formula)
        }
    };
    let pair = DatasetPair {
        trace: parse_trace(&trace, opts.alphabet)?,
        formula: parse_formula(&formula, opts.alphabet)?,
    };
    if opts.validate && !pair.is_consistent(opts.check) {
        return Err(Error::InvariantViolation);
    }
    Ok(pair)
}

/// Reads pairs; errors carry 1-based line numbers. Blank lines are skipped.
pub fn read_pairs<R: BufRead>(r: R, format: FileFormat, opts: &LoadOptions) -> Result<Vec<DatasetPair>> {
    let lines: Vec<String> = r.lines().collect::<std::io::Result<_>>()?;
    lines
        .par_iter()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| parse_line(l, format, opts).map_err(|e| e.at_line(i + 1)))
        .collect()
}

pub fn load(path: &Path, opts: &LoadOptions) -> Result<Vec<DatasetPair>> {
    let file = BufReader::new(File::open(path)?);
    read_pairs(file, FileFormat::for_path(path), opts)
}

/// Seeded shuffle then contiguous train/validation/test cut.
pub fn split(
    mut pairs: Vec<DatasetPair>,
    ratios: [f64; 3],
    seed: u64,
) -> Result<(Vec<DatasetPair>, Vec<DatasetPair>, Vec<DatasetPair>)> {
    if ratios.iter().any(|r| !(r.is_finite() && *r > 0.0)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split ratios {ratios:?} must be positive and sum to 1")));
    }
    pairs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = pairs.len();
    let train = ((ratios[0] * n as f64).round() as usize).min(n);
    let val = ((ratios[1] * n as f64).round() as usize).min(n - train);
    let test = pairs.split_off(train + val);
    let val_part = pairs.split_off(train);
    Ok((pairs, val_part, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(s: &str) -> Formula {
        parse_formula(s, Alphabet::default()).unwrap()
    }

    #[test]
    fn unsatisfiable_rejected() {
        let r = pair_for_formula(f("0"), 35, CheckOptions::default());
        assert_eq!(r, Err(Rejected::Unsatisfiable));
        let r = pair_for_formula(f("&a!a"), 35, CheckOptions::default());
        assert_eq!(r, Err(Rejected::Unsatisfiable));
    }

    #[test]
    fn atom_pair_starts_with_atom() {
        let p = pair_for_formula(f("a"), 35, CheckOptions::default()).unwrap();
        let first = p.trace.step(0);
        for v in 0..32u32 {
            if first.holds(v) {
                assert!(v & 1 == 1);
            }
        }
    }

    #[test]
    fn too_long_rejected() {
        let r = pair_for_formula(f("XXXXXXXXXXa"), 10, CheckOptions::default());
        assert!(matches!(r, Err(Rejected::TooLong(n)) if n > 10));
    }

    #[test]
    fn random_formula_has_requested_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = OpWeights::default();
        for n in 1..20 {
            for _ in 0..20 {
                assert_eq!(random_formula(&mut rng, n, Alphabet::default(), &w).node_count(), n);
            }
        }
    }

    #[test]
    fn example_line_loads() {
        let pairs = read_pairs("a;&a!b;{c}\t&X!bUac\n".as_bytes(), FileFormat::Tsv, &LoadOptions::default()).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].formula, f("&X!bUac"));
        assert_eq!(pairs[0].trace.to_text(), "a;&a!b;{c}");
        // b holds at step 1 and c never does, so this line only loads unchecked
        let line = "a;&ab;{b}\t&X!bUac\n".as_bytes();
        assert!(read_pairs(line, FileFormat::Tsv, &LoadOptions::default()).is_err());
        let no_check = LoadOptions { validate: false, ..Default::default() };
        let pairs = read_pairs(line, FileFormat::Tsv, &no_check).unwrap();
        assert_eq!(pairs[0].trace.to_text(), "a;&ab;{b}");
    }

    #[test]
    fn load_errors_carry_line_numbers() {
        let text = "{a}\ta\n{a}\tU\n";
        let e = read_pairs(text.as_bytes(), FileFormat::Tsv, &LoadOptions::default()).unwrap_err();
        assert!(matches!(e, Error::Line { line: 2, .. }), "{e:?}");
        let e = read_pairs("{a}\tb\n".as_bytes(), FileFormat::Tsv, &LoadOptions::default()).unwrap_err();
        assert!(matches!(e, Error::Line { line: 1, ref source } if matches!(**source, Error::InvariantViolation)));
        let no_check = LoadOptions { validate: false, ..Default::default() };
        assert!(read_pairs("{a}\tb\n".as_bytes(), FileFormat::Tsv, &no_check).is_ok());
        let e = read_pairs("{a}\ta\tb\n".as_bytes(), FileFormat::Tsv, &no_check).unwrap_err();
        assert!(matches!(e, Error::Line { line: 1, .. }));
    }

    #[test]
    fn split_is_seeded() {
        let cfg = GenConfig { seed: 9, ..Default::default() };
        let pairs = generate(&cfg, 20).unwrap();
        let a = split(pairs.clone(), [0.8, 0.1, 0.1], 1).unwrap();
        let b = split(pairs.clone(), [0.8, 0.1, 0.1], 1).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.0.len(), a.1.len(), a.2.len()), (16, 2, 2));
        assert!(split(pairs, [0.5, 0.5, 0.5], 1).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(GenConfig { max_trace_chars: 2, ..Default::default() }.validate().is_err());
        assert!(GenConfig { min_nodes: 5, max_nodes: 4, ..Default::default() }.validate().is_err());
        assert!(GenConfig { alphabet_size: 0, ..Default::default() }.validate().is_err());
        assert!(GenConfig::default().validate().is_ok());
    }
}
