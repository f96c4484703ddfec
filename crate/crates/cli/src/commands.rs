use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use clap::Args;
use rayon::prelude::*;

use ltlmine::dataset::{self, GenConfig, LoadOptions};
use ltlmine::decode::{beam_decode, serve, DecodeConfig, DecodeOutput, NgramScorer, RemoteScorer, Scorer, UniformScorer};
use ltlmine::metrics::{batch_report, ReportConfig};
use ltlmine::miner::{mine_in, mine_most_distinct, Elimination, EnumerationConfig, FormulaSpace};
use ltlmine::semantics::DEFAULT_STATE_CAP;
use ltlmine::{
    check_existential, check_universal, parse_formula, parse_trace, Alphabet, CheckOptions, CheckResult, Error,
    SymbolicTrace, TokenSeq, Vocabulary,
};

use crate::{Global, EXIT_DATA, EXIT_HOLDS, EXIT_IO, EXIT_NO_FORMULA, EXIT_SOFTWARE, EXIT_TIMEOUT, EXIT_USAGE, EXIT_VIOLATED};

pub const STATE_CAP_VAR: &str = "LTLMINE_STATE_CAP";

/// A bad flag value or combination.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if let Some(err) = cause.downcast_ref::<Error>() {
            return match err {
                Error::NoSatisfyingFormula => EXIT_NO_FORMULA,
                Error::Config(_) | Error::InvalidAlphabet(_) => EXIT_USAGE,
                Error::Io(_) => EXIT_IO,
                Error::Parse(_)
                | Error::Line { .. }
                | Error::UnknownToken(..)
                | Error::LengthMismatch { .. }
                | Error::InvariantViolation
                | Error::Format(_)
                | Error::Json(_) => EXIT_DATA,
                _ => EXIT_SOFTWARE,
            };
        }
        if cause.is::<io::Error>() {
            return EXIT_IO;
        }
    }
    EXIT_SOFTWARE
}

impl Global {
    fn alphabet(&self) -> Result<Alphabet> {
        Alphabet::new(self.alphabet).map_err(|e| usage(e.to_string()))
    }

    fn check_options(&self) -> Result<CheckOptions> {
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return Err(usage("--timeout-secs must be positive"));
        }
        let state_cap = match std::env::var(STATE_CAP_VAR) {
            Ok(v) => v.trim().parse().map_err(|_| usage(format!("{STATE_CAP_VAR} must be a positive integer")))?,
            Err(_) => DEFAULT_STATE_CAP,
        };
        Ok(CheckOptions { timeout: Some(Duration::from_secs_f64(self.timeout_secs)), state_cap })
    }
}

fn read_trace(text: &str, alphabet: Alphabet) -> Result<SymbolicTrace> {
    parse_trace(text, alphabet).map_err(Error::from).context("trace")
}

pub fn check(g: &Global, trace: &str, formula: &str, existential: bool) -> Result<u8> {
    let alphabet = g.alphabet()?;
    let t = read_trace(trace, alphabet)?;
    let f = parse_formula(formula, alphabet).map_err(Error::from).context("formula")?;
    let opts = g.check_options()?;
    let verdict = if existential { check_existential(&t, &f, opts) } else { check_universal(&t, &f, opts) };
    match verdict {
        CheckResult::Holds => {
            println!("HOLDS");
            Ok(EXIT_HOLDS)
        }
        CheckResult::Violated(w) => {
            match w {
                Some(w) => println!("VIOLATED {}", w.to_symbolic()),
                None => println!("VIOLATED"),
            }
            Ok(EXIT_VIOLATED)
        }
        CheckResult::Timeout => {
            println!("TIMEOUT");
            Ok(EXIT_TIMEOUT)
        }
        CheckResult::InternalError(msg) => {
            eprintln!("# {msg}");
            println!("TIMEOUT");
            Ok(EXIT_TIMEOUT)
        }
    }
}

/// Traces from a file holding either one trace per line or dataset lines.
fn read_traces(path: &Path, alphabet: Alphabet) -> Result<Vec<SymbolicTrace>> {
    let file = BufReader::new(File::open(path).with_context(|| path.display().to_string())?);
    let mut out = Vec::new();
    for (i, line) in file.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let text = if line.starts_with('{') && line.contains("\"trace\"") {
            let v: serde_json::Value = serde_json::from_str(&line).map_err(Error::from).context(format!("line {}", i + 1))?;
            v.get("trace").and_then(|t| t.as_str()).unwrap_or_default().to_string()
        } else {
            line.split('\t').next().unwrap_or_default().to_string()
        };
        let t = parse_trace(&text, alphabet).map_err(|e| Error::Line { line: i + 1, source: Box::new(e.into()) })?;
        out.push(t);
    }
    Ok(out)
}

pub fn mine(g: &Global, trace: &str, max_ops: usize, others: Option<&Path>, no_elimination: bool) -> Result<u8> {
    let alphabet = g.alphabet()?;
    let t = read_trace(trace, alphabet)?;
    let mut cfg = EnumerationConfig::new(alphabet, max_ops);
    cfg.check = g.check_options()?;
    if no_elimination {
        cfg.elimination = Elimination::NONE;
    }
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    if let Some(path) = others {
        let others = read_traces(path, alphabet)?;
        let start = Instant::now();
        let (f, score) = mine_most_distinct(&t, &others, &cfg)?;
        writeln!(out, "{}\t{}", f.to_polish(), score.value)?;
        out.flush()?;
        eprintln!(
            "# satisfies {} of {} other traces ({} timed out); {:.3}s",
            score.satisfied_other_count,
            score.other_count,
            score.timeout_pairs,
            start.elapsed().as_secs_f64()
        );
        return Ok(EXIT_HOLDS);
    }
    let start = Instant::now();
    let space = FormulaSpace::from_config(&cfg);
    let built = start.elapsed();
    let res = mine_in(&space, &t, cfg.check);
    for f in &res.formulae {
        writeln!(out, "{}", f.to_polish())?;
    }
    out.flush()?;
    eprintln!(
        "# {} of {} formulae hold, {} timed out; enumeration {:.3}s, check {:.3}s",
        res.formulae.len(),
        res.enumerated,
        res.timeouts,
        built.as_secs_f64(),
        res.check_time.as_secs_f64()
    );
    if res.formulae.is_empty() {
        return Err(Error::NoSatisfyingFormula.into());
    }
    Ok(EXIT_HOLDS)
}

#[derive(Args, Debug)]
pub struct DecodeArgs {
    /// A single trace to decode.
    #[arg(long, conflicts_with = "dataset", required_unless_present = "dataset")]
    trace: Option<String>,
    /// Decode the trace of every line of a dataset file.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// `uniform`, `ngram:<n>:<training file>` or `remote:<command>`.
    #[arg(long, default_value = "uniform")]
    scorer: String,
    #[arg(long, default_value_t = 3)]
    beam: usize,
    #[arg(long, default_value_t = 100)]
    max_tokens: usize,
    #[arg(long)]
    no_enforce: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file (default: stdout).
    #[arg(long, short)]
    output: Option<PathBuf>,
}

enum ScorerSpec {
    Uniform,
    Ngram(usize, PathBuf),
    Remote(String),
}

impl ScorerSpec {
    fn parse(spec: &str) -> Result<ScorerSpec> {
        if spec == "uniform" {
            return Ok(ScorerSpec::Uniform);
        }
        if let Some(rest) = spec.strip_prefix("ngram:") {
            let (n, path) = rest.split_once(':').ok_or_else(|| usage("expected ngram:<n>:<training file>"))?;
            let n: usize = n.parse().map_err(|_| usage(format!("bad n-gram order {n:?}")))?;
            return Ok(ScorerSpec::Ngram(n, PathBuf::from(path)));
        }
        if let Some(cmd) = spec.strip_prefix("remote:") {
            return Ok(ScorerSpec::Remote(cmd.to_string()));
        }
        Err(usage(format!("unknown scorer {spec:?}")))
    }
}

fn train_ngram(n: usize, path: &Path, alphabet: Alphabet, check: CheckOptions) -> Result<NgramScorer> {
    let opts = LoadOptions { alphabet, validate: false, check };
    let pairs = dataset::load(path, &opts).with_context(|| path.display().to_string())?;
    Ok(NgramScorer::train(&pairs, n, &Vocabulary::new(alphabet))?)
}

/// Shares one trained model between decode workers.
struct Shared<'a>(&'a NgramScorer);

impl Scorer for Shared<'_> {
    fn formula_vocab_size(&self) -> usize {
        self.0.formula_vocab_size()
    }

    fn next_logits(&mut self, trace: &TokenSeq, prefix: &TokenSeq) -> ltlmine::Result<Vec<f64>> {
        Ok(self.0.logits(trace, prefix))
    }
}

fn decode_config(args: &DecodeArgs) -> Result<DecodeConfig> {
    let cfg = DecodeConfig {
        beam_size: args.beam,
        max_tokens: args.max_tokens,
        enforce_syntax: !args.no_enforce,
        seed: args.seed,
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn decode_all(
    spec: &ScorerSpec,
    traces: &[SymbolicTrace],
    alphabet: Alphabet,
    cfg: &DecodeConfig,
    check: CheckOptions,
) -> Result<Vec<DecodeOutput>> {
    let vocab = Vocabulary::new(alphabet);
    let per_trace = |i: usize| DecodeConfig { seed: cfg.seed.wrapping_add(i as u64), ..*cfg };
    let outputs = match spec {
        ScorerSpec::Uniform => traces
            .par_iter()
            .enumerate()
            .map(|(i, t)| beam_decode(&mut UniformScorer::new(&vocab), &vocab, t, &per_trace(i)))
            .collect::<ltlmine::Result<Vec<_>>>()?,
        ScorerSpec::Ngram(n, path) => {
            let model = train_ngram(*n, path, alphabet, check)?;
            traces
                .par_iter()
                .enumerate()
                .map(|(i, t)| beam_decode(&mut Shared(&model), &vocab, t, &per_trace(i)))
                .collect::<ltlmine::Result<Vec<_>>>()?
        }
        ScorerSpec::Remote(cmd) => {
            let mut remote = RemoteScorer::spawn(cmd, &vocab).context("starting scorer peer")?;
            traces
                .iter()
                .enumerate()
                .map(|(i, t)| beam_decode(&mut remote, &vocab, t, &per_trace(i)))
                .collect::<ltlmine::Result<Vec<_>>>()?
        }
    };
    Ok(outputs)
}

fn output_writer(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| p.display().to_string())?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

pub fn decode(g: &Global, args: &DecodeArgs) -> Result<u8> {
    let alphabet = g.alphabet()?;
    let cfg = decode_config(args)?;
    let spec = ScorerSpec::parse(&args.scorer)?;
    let traces = match (&args.trace, &args.dataset) {
        (Some(t), _) => vec![read_trace(t, alphabet)?],
        (None, Some(p)) => read_traces(p, alphabet)?,
        (None, None) => return Err(usage("give --trace or --dataset")),
    };
    let outputs = decode_all(&spec, &traces, alphabet, &cfg, g.check_options()?)?;
    let mut out = output_writer(args.output.as_deref())?;
    for o in &outputs {
        writeln!(out, "{}", o.to_line())?;
    }
    out.flush()?;
    let invalid = outputs.iter().filter(|o| !o.is_valid()).count();
    eprintln!("# decoded {} traces, {} invalid", outputs.len(), invalid);
    Ok(EXIT_HOLDS)
}

pub fn eval(
    g: &Global,
    dataset_path: &Path,
    predictions: &Path,
    distinct_limit: usize,
    report: Option<&Path>,
    scatter: Option<&Path>,
) -> Result<u8> {
    let alphabet = g.alphabet()?;
    let check = g.check_options()?;
    let opts = LoadOptions { alphabet, validate: true, check };
    let pairs = dataset::load(dataset_path, &opts).with_context(|| dataset_path.display().to_string())?;
    let text = fs::read_to_string(predictions).with_context(|| predictions.display().to_string())?;
    let preds: Vec<String> = text.lines().map(str::to_string).collect();
    let cfg = ReportConfig { alphabet, check, distinctiveness_limit: distinct_limit };
    let r = batch_report(&pairs, &preds, &cfg)?;
    print!("{}", r.table());
    if let Some(p) = report {
        r.write_jsonl(BufWriter::new(File::create(p).with_context(|| p.display().to_string())?))?;
    }
    if let Some(p) = scatter {
        fs::write(p, r.scatter_csv()).with_context(|| p.display().to_string())?;
    }
    Ok(EXIT_HOLDS)
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long, default_value_t = 1000)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = dataset::DEFAULT_MAX_TRACE_CHARS)]
    max_trace_chars: usize,
    #[arg(long, default_value_t = GenConfig::default().min_nodes)]
    min_nodes: usize,
    #[arg(long, default_value_t = GenConfig::default().max_nodes)]
    max_nodes: usize,
    /// Also write train/validation/test files cut by these ratios,
    /// e.g. `0.8,0.1,0.1`.
    #[arg(long)]
    split: Option<String>,
    /// Output file; `.jsonl` selects JSON lines, anything else TSV.
    #[arg(long, short)]
    output: PathBuf,
}

fn split_path(path: &Path, part: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset");
    let name = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}.{part}.{ext}"),
        None => format!("{stem}.{part}"),
    };
    path.with_file_name(name)
}

pub fn gen(g: &Global, args: &GenArgs) -> Result<u8> {
    let cfg = GenConfig {
        alphabet_size: g.alphabet,
        min_nodes: args.min_nodes,
        max_nodes: args.max_nodes,
        max_trace_chars: args.max_trace_chars,
        seed: args.seed,
        check: g.check_options()?,
        ..GenConfig::default()
    };
    cfg.validate()?;
    let pairs = dataset::generate(&cfg, args.count)?;
    let (pairs, stats) = dataset::filter_by_trace_length(pairs, args.max_trace_chars);
    eprintln!("# {} pairs retained, {} dropped", stats.retained, stats.dropped);
    dataset::save(&pairs, &args.output).with_context(|| args.output.display().to_string())?;
    if let Some(ratios) = &args.split {
        let r: Vec<f64> = ratios
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| usage(format!("bad --split {ratios:?}")))?;
        let r: [f64; 3] = r.try_into().map_err(|_| usage("--split takes three ratios"))?;
        let (train, val, test) = dataset::split(pairs, r, args.seed)?;
        for (part, data) in [("train", &train), ("val", &val), ("test", &test)] {
            dataset::save(data, &split_path(&args.output, part))?;
        }
    }
    Ok(EXIT_HOLDS)
}

pub fn peer(g: &Global, spec: &str, die_after: Option<usize>) -> Result<u8> {
    let alphabet = g.alphabet()?;
    let vocab = Vocabulary::new(alphabet);
    let stdin = io::stdin();
    let stdout = io::stdout();
    match ScorerSpec::parse(spec)? {
        ScorerSpec::Uniform => serve(&mut UniformScorer::new(&vocab), &vocab, stdin.lock(), stdout.lock(), die_after)?,
        ScorerSpec::Ngram(n, path) => {
            let mut model = train_ngram(n, &path, alphabet, g.check_options()?)?;
            serve(&mut model, &vocab, stdin.lock(), stdout.lock(), die_after)?
        }
        ScorerSpec::Remote(_) => return Err(usage("a peer cannot serve a remote scorer")),
    }
    Ok(EXIT_HOLDS)
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// Dataset (or one trace per line) whose traces are mined and decoded.
    #[arg(long)]
    traces: PathBuf,
    /// Training dataset for the n-gram scorer.
    #[arg(long)]
    train: PathBuf,
    #[arg(long, default_value_t = 3)]
    ngram_order: usize,
    #[arg(long, default_value_t = 4)]
    max_ops: usize,
    /// Use only the first this many traces.
    #[arg(long, default_value_t = 100)]
    limit: usize,
    #[arg(long, default_value_t = 3)]
    beam: usize,
    #[arg(long, default_value_t = 100)]
    max_tokens: usize,
    #[arg(long, short)]
    output: PathBuf,
}

pub fn compare(g: &Global, args: &CompareArgs) -> Result<u8> {
    let alphabet = g.alphabet()?;
    let check = g.check_options()?;
    let mut traces = read_traces(&args.traces, alphabet)?;
    traces.truncate(args.limit);
    let cfg = DecodeConfig { beam_size: args.beam, max_tokens: args.max_tokens, ..DecodeConfig::default() };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let vocab = Vocabulary::new(alphabet);

    let start = Instant::now();
    let model = train_ngram(args.ngram_order, &args.train, alphabet, check)?;
    let train_time = start.elapsed();
    let start = Instant::now();
    let mut ecfg = EnumerationConfig::new(alphabet, args.max_ops);
    ecfg.check = check;
    let space = FormulaSpace::from_config(&ecfg);
    let enum_time = start.elapsed();

    let mut out = BufWriter::new(File::create(&args.output).with_context(|| args.output.display().to_string())?);
    writeln!(out, "index\ttrace\tmine_seconds\tmined\tmine_timeouts\tdecode_seconds\tdecoded\tdecode_holds")?;
    let (mut mine_total, mut decode_total) = (Duration::ZERO, Duration::ZERO);
    let (mut decoded, mut holds) = (0usize, 0usize);
    for (i, t) in traces.iter().enumerate() {
        let m = mine_in(&space, t, check);
        let start = Instant::now();
        let d = beam_decode(&mut Shared(&model), &vocab, t, &DecodeConfig { seed: i as u64, ..cfg })?;
        let dt = start.elapsed();
        let ok = d.formula.as_ref().is_some_and(|f| check_universal(t, f, check).holds());
        mine_total += m.check_time;
        decode_total += dt;
        decoded += 1;
        holds += usize::from(ok);
        writeln!(
            out,
            "{i}\t{t}\t{:.6}\t{}\t{}\t{:.6}\t{}\t{ok}",
            m.check_time.as_secs_f64(),
            m.formulae.len(),
            m.timeouts,
            dt.as_secs_f64(),
            d.to_line(),
        )?;
    }
    let ratio = if decode_total.is_zero() { f64::INFINITY } else { mine_total.as_secs_f64() / decode_total.as_secs_f64() };
    writeln!(out, "# traces {}", traces.len())?;
    writeln!(out, "# decoded {decoded}")?;
    writeln!(out, "# decoded formulae holding {holds}")?;
    writeln!(out, "# enumeration seconds {:.6} (max ops {})", enum_time.as_secs_f64(), args.max_ops)?;
    writeln!(out, "# mining check seconds {:.6}", mine_total.as_secs_f64())?;
    writeln!(out, "# ngram training seconds {:.6}", train_time.as_secs_f64())?;
    writeln!(out, "# decode seconds {:.6}", decode_total.as_secs_f64())?;
    writeln!(out, "# mining / decode time ratio {ratio:.2}")?;
    out.flush()?;
    eprintln!("# compared {} traces; mining/decode time ratio {ratio:.2}", traces.len());
    Ok(EXIT_HOLDS)
}
