//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use ltlmine::dataset::{self, GenConfig, LoadOptions};
use ltlmine::decode::{beam_decode, DecodeConfig, DecodeStatus, UniformScorer};
use ltlmine::metrics::{batch_report, distinctiveness, ReportConfig};
use ltlmine::{
    check_universal, eval_concrete, parse_formula, parse_trace, Alphabet, CheckOptions, CheckResult, Formula,
    SymbolicTrace, Vocabulary,
};
use rayon::prelude::*;
use support::oracle::{all_formulae, bounded_search, leaves, traces_over, Dag};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn ltlmine(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ltlmine")).args(args).output().expect("run ltlmine")
}

fn trace(s: &str) -> SymbolicTrace {
    parse_trace(s, Alphabet::default()).unwrap()
}

fn formula(s: &str) -> Formula {
    parse_formula(s, Alphabet::default()).unwrap()
}

fn worked_example() -> Outcome {
    let t = trace("a;&a!b;{c}");
    let start = Instant::now();
    for (f, holds) in [("U1c", true), ("&X!bUac", true), ("XXb", false)] {
        let r = check_universal(&t, &formula(f), CheckOptions::default());
        ensure(r.holds() == holds && (holds || r.violated()), format!("{f}: {}", r.verdict_name()))?;
    }
    let dt = start.elapsed();
    ensure(dt < Duration::from_secs(1), format!("took {dt:?}"))?;
    Ok(format!("3 verdicts in {dt:.2?}"))
}

fn qualitative() -> Outcome {
    let mut slowest = Duration::ZERO;
    let rows = support::fixtures::qualitative();
    for (t, f, holds) in &rows {
        let start = Instant::now();
        let r = check_universal(&trace(t), &formula(f), CheckOptions::default());
        let dt = start.elapsed();
        slowest = slowest.max(dt);
        ensure(r.holds() == *holds && (*holds || r.violated()), format!("{t} {f}: {}", r.verdict_name()))?;
        ensure(dt < Duration::from_secs(30), format!("{t} {f}: took {dt:?}"))?;
    }
    Ok(format!("{} fixtures, slowest {slowest:.2?}", rows.len()))
}

fn oracle_equivalence() -> Outcome {
    let ab = Alphabet::new(2).unwrap();
    let formulae: Vec<Formula> = (0..=3).flat_map(|k| all_formulae(&leaves(ab), k)).collect();
    let dag = Dag::new(&formulae);
    let traces = traces_over(&["1", "a", "!a", "b", "&ab"], 2, ab);
    let (max_ext, max_period) = (3, 3);
    let per_trace: Vec<(usize, usize, usize, Vec<String>)> = traces
        .par_iter()
        .map(|t| {
            let search = bounded_search(&dag, t, 2, max_ext, max_period);
            let mut bad = Vec::new();
            let (mut k_used, mut p_used) = (0, 0);
            for (f, w) in formulae.iter().zip(&search.witness) {
                if let Some((k, p)) = w {
                    k_used = k_used.max(*k);
                    p_used = p_used.max(*p);
                }
                match check_universal(t, f, CheckOptions::default()) {
                    CheckResult::Holds if w.is_none() => {}
                    CheckResult::Violated(Some(cex))
                        if w.is_some() && cex.is_represented_by(t) && !eval_concrete(&cex, f) => {}
                    r => bad.push(format!("{t} {f}: checker {} oracle {w:?}", r.verdict_name())),
                }
            }
            (search.words, k_used, p_used, bad)
        })
        .collect();
    let words: usize = per_trace.iter().map(|r| r.0).sum();
    let k_used = per_trace.iter().map(|r| r.1).max().unwrap_or(0);
    let p_used = per_trace.iter().map(|r| r.2).max().unwrap_or(0);
    let bad: Vec<&String> = per_trace.iter().flat_map(|r| &r.3).collect();
    let pairs = formulae.len() * traces.len();
    ensure(bad.is_empty(), format!("{} of {pairs} disagree, e.g. {}", bad.len(), bad.first().map_or("", |s| s)))?;
    Ok(format!(
        "{pairs} pairs ({} formulae x {} traces) agree; {words} words searched; \
         largest witness needed extension {k_used} of {max_ext}, period {p_used} of {max_period}",
        formulae.len(),
        traces.len()
    ))
}

fn enforcement_fuzz() -> Outcome {
    let a = Alphabet::default();
    let vocab = Vocabulary::new(a);
    let pool = dataset::generate(&GenConfig { seed: 11, ..GenConfig::default() }, 100).map_err(|e| e.to_string())?;
    let run = |enforce: bool| -> Result<usize, String> {
        (0..10_000u64)
            .into_par_iter()
            .map(|i| {
                let cfg = DecodeConfig {
                    beam_size: 1 + (i % 4) as usize,
                    max_tokens: 200,
                    enforce_syntax: enforce,
                    seed: i,
                };
                let t = &pool[i as usize % pool.len()].trace;
                let out = beam_decode(&mut UniformScorer::new(&vocab), &vocab, t, &cfg).map_err(|e| e.to_string())?;
                let parsed = out.status == DecodeStatus::Valid && parse_formula(&out.text, a).is_ok();
                Ok(usize::from(!parsed))
            })
            .sum()
    };
    let on = run(true)?;
    let off = run(false)?;
    ensure(on == 0, format!("{on} parse failures with enforcement"))?;
    ensure(off > 0, "no invalid outputs without enforcement")?;
    Ok(format!("10000 rollouts: 0 failures enforced, {off} invalid unenforced"))
}

fn distinctiveness_anchors() -> Outcome {
    let opts = CheckOptions::default();
    let others: Vec<SymbolicTrace> = ["!a;{1}", "b;{!b}", "{&!ab}", "1;a;{c}"].iter().map(|s| trace(s)).collect();
    let own = trace("&ab;{1}");
    let constant = distinctiveness(&Formula::True, &own, &others, opts).map_err(|e| e.to_string())?;
    ensure(constant.value == 0.0, format!("constant scored {}", constant.value))?;
    let sharp = distinctiveness(&formula("&ab"), &own, &others, opts).map_err(|e| e.to_string())?;
    ensure(sharp.value == 1.0, format!("isolating formula scored {}", sharp.value))?;

    let pairs = dataset::generate(&GenConfig::default(), 1000).map_err(|e| e.to_string())?;
    let cfg = ReportConfig::default();
    let ones = vec!["1".to_string(); pairs.len()];
    let r = batch_report(&pairs, &ones, &cfg).map_err(|e| e.to_string())?;
    let d = r.distinctiveness.ok_or("no distinctiveness for constant predictor")?;
    ensure(d.mean == 0.0 && d.q3 == 0.0, format!("constant batch mean {}", d.mean))?;
    let truths: Vec<String> = pairs.iter().map(|p| p.formula.to_polish()).collect();
    let r = batch_report(&pairs, &truths, &cfg).map_err(|e| e.to_string())?;
    let d = r.distinctiveness.ok_or("no distinctiveness for ground truth")?;
    ensure((0.5..=1.0).contains(&d.mean), format!("ground-truth mean {:.3}", d.mean))?;
    Ok(format!("constant 0.0, isolating 1.0, ground truth {:.3} +- {:.3} over {}", d.mean, d.std, d.count))
}

fn miner() -> Outcome {
    let t = "&a!b;{1}";
    let run = || ltlmine(&["mine", t, "--max-ops", "3"]);
    let (x, y) = (run(), run());
    ensure(x.status.success(), format!("mine exited {:?}", x.status))?;
    ensure(x.stdout == y.stdout, "two runs differ")?;
    let text = String::from_utf8(x.stdout).map_err(|e| e.to_string())?;
    let tr = trace(t);
    let lines: Vec<&str> = text.lines().collect();
    let failed = lines
        .par_iter()
        .filter(|f| !check_universal(&tr, &formula(f), CheckOptions::default()).holds())
        .count();
    ensure(failed == 0, format!("{failed} mined formulae do not hold"))?;
    let z = ltlmine(&["mine", "{1}", "--max-ops", "0"]);
    let leaves: Vec<String> = String::from_utf8_lossy(&z.stdout).lines().map(str::to_string).collect();
    ensure(leaves.iter().any(|l| l == "1"), "\"1\" missing at max-ops 0")?;
    ensure(!leaves.iter().any(|l| l == "0"), "\"0\" emitted at max-ops 0")?;
    Ok(format!("{} formulae re-checked, runs identical, leaves {leaves:?}", lines.len()))
}

fn dataset_integrity(dir: &Path) -> Outcome {
    let gen = |name: &str| -> Result<Vec<u8>, String> {
        let p = dir.join(name);
        let o = ltlmine(&["gen", "--count", "1000", "--seed", "7", "-o", p.to_str().unwrap()]);
        ensure(o.status.success(), format!("gen exited {:?}", o.status))?;
        std::fs::read(&p).map_err(|e| e.to_string())
    };
    let (x, y) = (gen("a.tsv")?, gen("b.tsv")?);
    ensure(x == y, "regeneration differs")?;
    let pairs = dataset::load(&dir.join("a.tsv"), &LoadOptions::default()).map_err(|e| e.to_string())?;
    ensure(pairs.len() == 1000, format!("{} pairs", pairs.len()))?;
    let longest = pairs.iter().map(|p| p.trace.to_text().chars().count()).max().unwrap_or(0);
    ensure(longest <= 35, format!("trace of {longest} characters"))?;
    let bad = pairs
        .par_iter()
        .filter(|p| !check_universal(&p.trace, &p.formula, CheckOptions::default()).holds())
        .count();
    ensure(bad == 0, format!("{bad} pairs fail re-verification"))?;
    Ok(format!("1000 pairs verified, longest trace {longest} chars, regeneration identical"))
}

fn timing_report(dir: &Path) -> Outcome {
    let path = |n: &str| dir.join(n).to_str().unwrap().to_string();
    for (name, count, seed) in [("train.tsv", "2000", "21"), ("traces.tsv", "100", "22")] {
        let o = ltlmine(&["gen", "--count", count, "--seed", seed, "-o", &path(name)]);
        ensure(o.status.success(), format!("gen exited {:?}", o.status))?;
    }
    let start = Instant::now();
    let o = ltlmine(&[
        "compare",
        "--traces",
        &path("traces.tsv"),
        "--train",
        &path("train.tsv"),
        "--max-ops",
        "4",
        "-o",
        &path("compare.tsv"),
    ]);
    ensure(o.status.success(), format!("compare exited {:?}: {}", o.status, String::from_utf8_lossy(&o.stderr)))?;
    let report = std::fs::read_to_string(path("compare.tsv")).map_err(|e| e.to_string())?;
    let rows = report.lines().skip(1).filter(|l| !l.starts_with('#')).count();
    ensure(rows == 100, format!("{rows} rows"))?;
    ensure(report.lines().any(|l| l == "# decoded 100"), "decode count is not 100")?;
    let ratio = report.lines().find(|l| l.starts_with("# mining / decode")).unwrap_or("");
    Ok(format!("100 traces in {:.1?}; {ratio}", start.elapsed()))
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let criteria: Vec<Criterion> = vec![
        ("worked example", Box::new(worked_example)),
        ("qualitative fixtures", Box::new(qualitative)),
        ("oracle equivalence", Box::new(oracle_equivalence)),
        ("enforcement fuzz", Box::new(enforcement_fuzz)),
        ("distinctiveness anchors", Box::new(distinctiveness_anchors)),
        ("miner soundness and determinism", Box::new(miner)),
        ("dataset integrity", Box::new(|| dataset_integrity(dir.path()))),
        ("mining vs decoding timing", Box::new(|| timing_report(dir.path()))),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let r = std::panic::catch_unwind(std::panic::AssertUnwindSafe(run))
            .unwrap_or_else(|_| Err("panicked".to_string()));
        let secs = start.elapsed().as_secs_f64();
        match r {
            Ok(msg) => println!("criterion {}: PASS  {name} ({secs:.1}s): {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {}: FAIL  {name} ({secs:.1}s): {msg}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
