//! Batch driver for the inference pipeline. Each `cmd_*` function reads its
//! inputs, runs one stage and writes its artifacts under the configured
//! output directory with fixed file names, JSON next to every text report.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use ptspec::analysis::{closure, extract_graph, program_points_to, SpecRuleSet};
use ptspec::codegen::{fsa_to_fragments, CodeFragmentSpec};
use ptspec::evalbench::{
    corpus_dir, ground_truth, known_false_negatives, metric_rpt, render_metrics, spec_prf, truth_automaton,
    GroundTruth, KnownFalseNegative, Metrics,
};
use ptspec::interpreter::DEFAULT_FUEL;
use ptspec::ir::{library_interface, parse_program, AllocSiteId, Interface, Program, VarId};
use ptspec::learner::{learn, phase_seed, sample, LearnerConfig, MergeRecord, Sampler};
use ptspec::oracle::{DynamicOracle, OracleConfig, Verdict};
use ptspec::pathspec::{AutomatonJson, PathSpec, SpecAutomaton};
use ptspec::synth::Strategy;

/// Phase numbers used to derive per-phase seeds.
pub const SAMPLING_PHASE: u64 = 0;
pub const LEARNING_PHASE: u64 = 1;

/// Tunable parameters shared by the commands.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub budget: usize,
    pub sampler: Sampler,
    pub alpha: f64,
    /// Longest specification, in variables, the learner checks.
    pub n_max: usize,
    /// Function-hop bound of the ground truth.
    pub k: usize,
    pub strategy: Strategy,
    pub seed: u64,
    pub fuel: u64,
    pub merge_query_cap: usize,
    /// Upper bound on worker threads; `None` uses every core.
    pub jobs: Option<usize>,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let l = LearnerConfig::default();
        RunConfig {
            budget: l.budget,
            sampler: Sampler::Mcts,
            alpha: l.alpha,
            n_max: l.n_max,
            k: 4,
            strategy: Strategy::Instantiate,
            seed: l.seed,
            fuel: DEFAULT_FUEL,
            merge_query_cap: l.merge_query_cap,
            jobs: None,
            out: PathBuf::from("out"),
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| anyhow::anyhow!("bad value '{value}' for {key}: {e}"))
}

impl RunConfig {
    /// Sets one parameter by name, as spelled in config files.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "budget" => self.budget = parse_value(key, value)?,
            "sampler" => self.sampler = parse_value(key, value)?,
            "alpha" => self.alpha = parse_value(key, value)?,
            "n" | "n_max" => self.n_max = parse_value(key, value)?,
            "k" => self.k = parse_value(key, value)?,
            "strategy" => self.strategy = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "fuel" => self.fuel = parse_value(key, value)?,
            "merge_query_cap" => self.merge_query_cap = parse_value(key, value)?,
            "jobs" => self.jobs = Some(parse_value(key, value)?),
            "out" => self.out = PathBuf::from(value),
            other => bail!("unknown configuration key '{other}'"),
        }
        Ok(())
    }

    /// Applies a flat `key = value` file; `#` starts a comment.
    pub fn apply_file_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) =
                line.split_once('=').with_context(|| format!("line {}: expected key = value", n + 1))?;
            self.set(key.trim(), value.trim()).with_context(|| format!("line {}", n + 1))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        self.apply_file_text(&text).with_context(|| format!("in {}", path.display()))
    }

    fn learner(&self, phase: u64) -> LearnerConfig {
        LearnerConfig {
            budget: self.budget,
            alpha: self.alpha,
            n_max: self.n_max,
            seed: phase_seed(self.seed, phase),
            merge_query_cap: self.merge_query_cap,
        }
    }

    pub fn oracle(&self, lib: &Program) -> DynamicOracle {
        DynamicOracle::new(lib, OracleConfig { strategy: self.strategy, fuel: self.fuel })
    }

    /// Runs `f` on a thread pool bounded by `jobs`.
    pub fn run<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(j) = self.jobs {
            b = b.num_threads(j.max(1));
        }
        Ok(b.build()?.install(f))
    }
}

/// Raised when sampling finds no positive example.
#[derive(Debug, thiserror::Error)]
#[error("no specifications inferred")]
pub struct NoSpecifications;

/// Parses a program from one or more files, concatenated in order.
pub fn load_program(paths: &[PathBuf]) -> Result<Program> {
    let mut text = String::new();
    for p in paths {
        text.push_str(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?);
        text.push('\n');
    }
    parse_program(&text).with_context(|| {
        let names: Vec<String> = paths.iter().map(|p| p.display().to_string()).collect();
        format!("parsing {}", names.join(" + "))
    })
}

/// The library part of a program file.
pub fn load_library(path: &Path) -> Result<Program> {
    Ok(load_program(&[path.to_path_buf()])?.library_only())
}

/// Paths of a corpus benchmark's library and client.
pub fn bench_paths(name: &str) -> (PathBuf, PathBuf) {
    let dir = corpus_dir().join(name);
    (dir.join("library.ir"), dir.join("client.ir"))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn json<T: serde::Serialize + ?Sized>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

/// Client points-to pairs in `var ↪ site` form, one per line.
pub fn render_points_to(pt: &BTreeSet<(VarId, AllocSiteId)>) -> String {
    pt.iter().map(|(v, o)| format!("{v} ↪ {o}\n")).collect()
}

#[derive(Clone, Debug)]
pub struct AnalyzeReport {
    pub points_to: BTreeSet<(VarId, AllocSiteId)>,
    pub edges: usize,
}

/// Analyses a client against library code (an implementation or generated
/// fragments). Writes `closure.txt`, `points_to.txt` and `points_to.json`.
pub fn cmd_analyze(program: &Program, out: &Path) -> Result<AnalyzeReport> {
    let c = closure(&extract_graph(program, true), &SpecRuleSet::empty());
    let points_to = program_points_to(program, &c);
    write(out, "closure.txt", &c.dump())?;
    write(out, "points_to.txt", &render_points_to(&points_to))?;
    let rows: Vec<(String, String)> = points_to.iter().map(|(v, o)| (v.to_string(), o.to_string())).collect();
    write(out, "points_to.json", &json(&rows)?)?;
    Ok(AnalyzeReport { points_to, edges: c.len() })
}

#[derive(Clone, Debug)]
pub struct InferReport {
    pub positives: BTreeSet<PathSpec>,
    pub automaton: SpecAutomaton,
    pub trace: Vec<MergeRecord>,
    pub fragments: CodeFragmentSpec,
    pub automaton_json: String,
    pub fragments_text: String,
    pub oracle_queries: usize,
}

/// Both learning phases and code generation. Writes `positives.txt`,
/// `automaton.json`, `fragments.ir`, `merge_trace.json` and
/// `oracle_log.jsonl`. Fails with [`NoSpecifications`] when sampling finds
/// no positive example.
pub fn cmd_infer(lib: &Program, cfg: &RunConfig) -> Result<InferReport> {
    let iface = library_interface(lib);
    let oracle = cfg.oracle(lib);
    let (positives, learned) = cfg.run(|| {
        let positives = sample(cfg.sampler, &iface, &oracle, &cfg.learner(SAMPLING_PHASE));
        let learned = (!positives.is_empty()).then(|| learn(&iface, &positives, &oracle, &cfg.learner(LEARNING_PHASE)));
        (positives, learned)
    })?;
    oracle.write_log(&{
        std::fs::create_dir_all(&cfg.out)?;
        cfg.out.join("oracle_log.jsonl")
    })?;
    let Some(learned) = learned else {
        write(&cfg.out, "positives.txt", "")?;
        return Err(NoSpecifications.into());
    };
    let fragments = fsa_to_fragments(lib, &learned.automaton)?;
    let automaton_json = json(&learned.automaton.to_json(&iface))?;
    let fragments_text = fragments.render();
    let listing: String = positives.iter().map(|s| s.display(&iface) + "\n").collect();
    write(&cfg.out, "positives.txt", &listing)?;
    write(&cfg.out, "automaton.json", &automaton_json)?;
    write(&cfg.out, "fragments.ir", &fragments_text)?;
    write(&cfg.out, "merge_trace.json", &json(&learned.trace)?)?;
    Ok(InferReport {
        positives,
        automaton: learned.automaton,
        trace: learned.trace,
        fragments,
        automaton_json,
        fragments_text,
        oracle_queries: oracle.distinct_queries(),
    })
}

/// Synthesizes and runs the unit test for one specification. Writes
/// `test.ir` and `verdict.json`.
pub fn cmd_synth(lib: &Program, spec: &str, cfg: &RunConfig) -> Result<(String, Verdict)> {
    let iface = library_interface(lib);
    let s = PathSpec::parse(&iface, spec)?;
    let oracle = cfg.oracle(lib);
    let test = oracle.synthesizer().synthesize(&s, cfg.strategy)?;
    let text = test.render();
    let verdict = oracle.judge(&s);
    write(&cfg.out, "test.ir", &text)?;
    write(&cfg.out, "verdict.json", &json(&verdict)?)?;
    Ok((text, verdict))
}

/// Reads an automaton written by `infer`.
pub fn load_automaton(iface: &Interface, path: &Path) -> Result<SpecAutomaton> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let j: AutomatonJson = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(SpecAutomaton::from_json(iface, &j)?)
}

/// Automaton for a list of specifications, one per line.
pub fn automaton_of_specs(iface: &Interface, text: &str) -> Result<SpecAutomaton> {
    let specs = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with("//"))
        .map(|l| PathSpec::parse(iface, l))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SpecAutomaton::prefix_tree(iface.visible.clone(), specs.iter()))
}

/// Code fragments for an automaton. Writes `fragments.ir`.
pub fn cmd_gen_fragments(lib: &Program, a: &SpecAutomaton, out: &Path) -> Result<CodeFragmentSpec> {
    let f = fsa_to_fragments(lib, a)?;
    write(out, "fragments.ir", &f.render())?;
    Ok(f)
}

/// Ground truth and the known false negatives of the configured oracle.
/// Writes `ground_truth.txt`, `ground_truth.json` and
/// `known_false_negatives.{txt,json}`.
pub fn cmd_ground_truth(lib: &Program, cfg: &RunConfig) -> Result<(GroundTruth, Vec<KnownFalseNegative>)> {
    let iface = library_interface(lib);
    let oracle = cfg.oracle(lib);
    let (truth, fns) = cfg.run(|| {
        let truth = ground_truth(lib, cfg.k);
        let fns = known_false_negatives(&truth, &oracle);
        (truth, fns)
    })?;
    let listing: String = truth.specs.iter().map(|s| s.display(&iface) + "\n").collect();
    write(&cfg.out, "ground_truth.txt", &listing)?;
    let names: Vec<String> = truth.specs.iter().map(|s| s.display(&iface)).collect();
    write(&cfg.out, "ground_truth.json", &json(&serde_json::json!({ "bound": truth.bound, "specs": names }))?)?;
    write(&cfg.out, "known_false_negatives.txt", &render_false_negatives(&fns))?;
    write(&cfg.out, "known_false_negatives.json", &json(&fns)?)?;
    Ok((truth, fns))
}

/// One line per known false negative: the specification and the oracle's
/// reason for rejecting it.
pub fn render_false_negatives(fns: &[KnownFalseNegative]) -> String {
    let width = fns.iter().map(|f| f.spec.len()).max().unwrap_or(0);
    let mut out = String::new();
    for f in fns {
        let tag = if f.self_alias { " [self-alias]" } else { "" };
        let _ = writeln!(out, "{:<width$}  {}{}", f.spec, f.reason, tag);
    }
    out
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct EvalReport {
    pub metrics: Metrics,
    /// Points-to ratio against the ground truth for each client.
    pub rpt: Vec<(String, Option<f64>)>,
    pub false_negatives: Vec<KnownFalseNegative>,
    pub truth_size: usize,
}

/// Scores an inferred automaton against the ground truth, leaving the known
/// false negatives out of recall, and computes the points-to ratio on each
/// client. Writes the ground-truth files plus `metrics.{txt,json}`.
pub fn cmd_eval(lib: &Program, inferred: &SpecAutomaton, clients: &[(String, Program)], cfg: &RunConfig) -> Result<EvalReport> {
    let iface = library_interface(lib);
    let (truth, fns) = cmd_ground_truth(lib, cfg)?;
    let excluded: BTreeSet<PathSpec> = fns
        .iter()
        .map(|f| PathSpec::parse(&iface, &f.spec))
        .collect::<Result<_, _>>()?;
    let metrics = cfg.run(|| spec_prf(lib, inferred, &truth, &excluded))??;
    let reference = truth_automaton(lib, &truth);
    let rpt: Vec<(String, Option<f64>)> =
        clients.iter().map(|(name, c)| (name.clone(), metric_rpt(c, inferred, &reference))).collect();
    let mut text = render_metrics(&metrics);
    for (name, r) in &rpt {
        let value = r.map_or("undefined".to_string(), |r| format!("{r:.4}"));
        let _ = writeln!(text, "points-to ratio on {name}: {value}");
    }
    let _ = writeln!(text, "{} known false negatives excluded from recall", fns.len());
    let report = EvalReport { metrics, rpt, false_negatives: fns, truth_size: truth.specs.len() };
    write(&cfg.out, "metrics.txt", &text)?;
    write(&cfg.out, "metrics.json", &json(&report)?)?;
    Ok(report)
}

/// Specifications of the inferred language up to `max_len` variables, one
/// per line.
pub fn render_language(iface: &Interface, a: &SpecAutomaton, max_len: usize) -> String {
    a.enumerate(max_len).iter().map(|s| s.display(iface) + "\n").collect()
}
