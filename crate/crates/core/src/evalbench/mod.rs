//! Evaluation against static ground truth: the benchmark corpus, the set
//! of precise specifications implied by a library implementation, and the
//! precision, recall and points-to ratio metrics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{closure, extract_graph, resolve_rules, SpecRuleSet, Vertex};
use crate::codegen::{automaton_points_to, fragments_in_layout, CodegenError};
use crate::ir::{library_interface, parse_program, AllocSiteId, FuncId, IrError, Program, Stmt, VarId};
use crate::oracle::DynamicOracle;
use crate::pathspec::{all_specs, to_rule, PathSpec, SpecAutomaton, SpecError, SpecRule};
use crate::synth::{Strategy, Synthesizer};

/// Environment variable naming the corpus directory.
pub const CORPUS_ENV: &str = "PTSPEC_CORPUS";

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Ir { path: PathBuf, source: IrError },
    #[error("{path}: {source}")]
    Spec { path: PathBuf, source: SpecError },
    #[error(transparent)]
    Codegen(#[from] CodegenError),
}

/// One corpus entry: a library, a client using it and the specifications
/// a reader would write down for it.
#[derive(Clone, Debug)]
pub struct Benchmark {
    pub name: String,
    pub library: Program,
    /// Client functions together with the library.
    pub client: Program,
    pub expected: Vec<PathSpec>,
}

fn read(path: &Path) -> Result<String, EvalError> {
    std::fs::read_to_string(path).map_err(|source| EvalError::Io { path: path.to_path_buf(), source })
}

/// Loads `library.ir`, `client.ir` and `expected.specs` from `dir`.
pub fn load_benchmark(dir: &Path) -> Result<Benchmark, EvalError> {
    let lib_path = dir.join("library.ir");
    let lib_src = read(&lib_path)?;
    let library = parse_program(&lib_src).map_err(|source| EvalError::Ir { path: lib_path, source })?;
    let client_path = dir.join("client.ir");
    let client_src = read(&client_path)?;
    let client = parse_program(&format!("{lib_src}\n{client_src}"))
        .map_err(|source| EvalError::Ir { path: client_path, source })?;
    let spec_path = dir.join("expected.specs");
    let iface = library_interface(&library);
    let expected = read(&spec_path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with("//"))
        .map(|l| PathSpec::parse(&iface, l))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|source| EvalError::Spec { path: spec_path, source })?;
    let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(Benchmark { name, library, client, expected })
}

/// Every benchmark in the subdirectories of `dir`, sorted by name.
pub fn load_corpus(dir: &Path) -> Result<Vec<Benchmark>, EvalError> {
    let entries = std::fs::read_dir(dir).map_err(|source| EvalError::Io { path: dir.to_path_buf(), source })?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("library.ir").is_file())
        .collect();
    dirs.sort();
    dirs.iter().map(|d| load_benchmark(d)).collect()
}

/// The corpus directory: the environment variable if set, else `bench`.
pub fn corpus_dir() -> PathBuf {
    std::env::var_os(CORPUS_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("bench"))
}

/// All corpus libraries as one program.
pub fn merged_library(corpus: &[Benchmark]) -> Result<Program, IrError> {
    corpus.iter().try_fold(Program::default(), |acc, b| acc.merge(&b.library))
}

/// Specifications implied by a library implementation, up to a number of
/// function hops.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct GroundTruth {
    pub specs: BTreeSet<PathSpec>,
    pub bound: usize,
}

impl GroundTruth {
    pub fn contains(&self, s: &PathSpec) -> bool {
        self.specs.contains(s)
    }
}

/// Static membership test: the conclusion of `s` holds in the points-to
/// closure of its synthesized test run against the real library bodies.
/// The null-initialized test is tried first; the instantiated one covers
/// specifications that rely on state a constructor sets up. Specifications
/// that cannot be synthesized are not members.
pub fn is_ground_truth(synth: &Synthesizer, s: &PathSpec) -> bool {
    let Ok(rule) = to_rule(s) else { return false };
    let (a, nt, b) = &rule.conclusion;
    let v = |x| Vertex::Var(synth.iface.var_id(x));
    [Strategy::Null, Strategy::Instantiate].into_iter().any(|strategy| {
        let Ok(test) = synth.synthesize_unchecked(s, strategy) else { return false };
        let c = closure(&extract_graph(&test.program(&synth.lib), true), &SpecRuleSet::empty());
        c.contains(&v(a), *nt, &v(b))
    })
}

/// Does the analysis derive the conclusion of `s` on its own null-initialized
/// test from `rules` alone, without library bodies?
pub fn derivable_from(synth: &Synthesizer, rules: &[SpecRule], s: &PathSpec) -> bool {
    let Ok(rule) = to_rule(s) else { return false };
    let Ok(test) = synth.synthesize_unchecked(s, Strategy::Null) else { return false };
    let c = closure(&extract_graph(&test.program(&synth.lib), false), &resolve_rules(&synth.iface, rules));
    let (a, nt, b) = &rule.conclusion;
    let v = |x| Vertex::Var(synth.iface.var_id(x));
    c.contains(&v(a), *nt, &v(b))
}

/// A subset of `specs` from which the analysis derives the rest: walking
/// from fewest hops up, a specification is kept only when the ones kept
/// before it do not already derive its conclusion on its own test.
/// Compositions such as two uses of a getter-setter pair chained together
/// drop out.
pub fn irredundant(lib: &Program, specs: &BTreeSet<PathSpec>) -> BTreeSet<PathSpec> {
    let synth = Synthesizer::new(lib);
    let mut order: Vec<&PathSpec> = specs.iter().collect();
    order.sort_by_key(|s| s.hops());
    let mut kept = BTreeSet::new();
    let mut rules = Vec::new();
    for s in order {
        if !derivable_from(&synth, &rules, s) {
            rules.push(to_rule(s).expect("ground truth is well-formed"));
            kept.insert(s.clone());
        }
    }
    kept
}

/// Ground truth with at most `k` hops, checked in parallel.
pub fn ground_truth(lib: &Program, k: usize) -> GroundTruth {
    let synth = Synthesizer::new(lib);
    let candidates = all_specs(&synth.iface, k);
    let specs = candidates.into_par_iter().filter(|s| is_ground_truth(&synth, s)).collect();
    GroundTruth { specs, bound: k }
}

/// A precise specification the dynamic oracle rejects.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct KnownFalseNegative {
    pub spec: String,
    pub reason: String,
    /// The conclusion relates a variable to itself, so it holds in the
    /// analysis for any program but no single test run can show it.
    pub self_alias: bool,
}

/// Ground-truth specifications the oracle rejects, with the oracle's
/// reason. These are the cases where testing cannot confirm precision,
/// such as a store that a later store in the same call overwrites.
pub fn known_false_negatives(truth: &GroundTruth, oracle: &DynamicOracle) -> Vec<KnownFalseNegative> {
    truth
        .specs
        .iter()
        .filter_map(|s| {
            let v = oracle.judge(s);
            let self_alias = s.z(0) == s.w(s.hops() - 1);
            (!v.accepted).then_some(KnownFalseNegative { spec: v.spec, reason: v.reason, self_alias })
        })
        .collect()
}

/// Statement-level comparison for one function.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct FunctionScore {
    pub function: String,
    pub truth: usize,
    pub inferred: usize,
    pub common: usize,
    /// Fraction of the truth statements that were inferred.
    pub recall: f64,
    /// Fraction of the inferred statements that are in the truth.
    pub precision: f64,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub functions: Vec<FunctionScore>,
    /// Inferred specifications, and the irredundant truth recall is measured
    /// against.
    pub inferred_specs: usize,
    pub truth_specs: usize,
}

/// Fraction of `truth` missing from `inferred`, and fraction of `inferred`
/// absent from `truth`. Empty sides count as zero.
pub fn fractional_errors<T: Ord>(truth: &BTreeSet<T>, inferred: &BTreeSet<T>) -> (f64, f64) {
    let common = truth.intersection(inferred).count() as f64;
    let missing = if truth.is_empty() { 0.0 } else { 1.0 - common / truth.len() as f64 };
    let extra = if inferred.is_empty() { 0.0 } else { 1.0 - common / inferred.len() as f64 };
    (missing, extra)
}

fn accepting_for(layout: &SpecAutomaton, specs: &BTreeSet<PathSpec>) -> SpecAutomaton {
    let mut a = layout.clone();
    a.accepting.clear();
    for s in specs {
        let word = layout.syms(&s.seq).expect("specification over the layout alphabet");
        let mut q = layout.start;
        for sym in word {
            q = *layout.delta[&q][&sym].iter().next().expect("layout is a prefix tree");
        }
        a.accepting.insert(q);
    }
    a
}

fn statements(lib: &Program, a: &SpecAutomaton, layout: &SpecAutomaton) -> Result<BTreeMap<FuncId, BTreeSet<String>>, EvalError> {
    let frags = fragments_in_layout(lib, a, layout)?;
    Ok(frags
        .program
        .functions
        .iter()
        .map(|f| {
            let body = f.body.iter().filter(|s| !matches!(s, Stmt::Return { .. })).map(|s| format!("{s:?}")).collect();
            (f.id.clone(), body)
        })
        .collect())
}

/// Compares the code fragments of the inferred language (up to the truth's
/// bound) with those of the ground truth, per function, counting partially
/// matched functions fractionally. Precision is measured against the whole
/// truth. Recall is measured against its irredundant part, after removing
/// the `excluded` specifications, since anything else follows from it.
pub fn spec_prf(
    lib: &Program,
    inferred: &SpecAutomaton,
    truth: &GroundTruth,
    excluded: &BTreeSet<PathSpec>,
) -> Result<Metrics, EvalError> {
    let max_len = 2 * truth.bound;
    let inferred_specs: BTreeSet<PathSpec> = inferred.enumerate(max_len).into_iter().collect();
    let kept: BTreeSet<PathSpec> = truth.specs.difference(excluded).cloned().collect();
    let recall_truth = irredundant(lib, &kept);
    let iface = library_interface(lib);
    let union: BTreeSet<&PathSpec> = inferred_specs.iter().chain(truth.specs.iter()).collect();
    let layout = SpecAutomaton::prefix_tree(iface.visible.clone(), union);
    let inf = statements(lib, &accepting_for(&layout, &inferred_specs), &layout)?;
    let full = statements(lib, &accepting_for(&layout, &truth.specs), &layout)?;
    let rec = statements(lib, &accepting_for(&layout, &recall_truth), &layout)?;
    let mut functions = Vec::new();
    let (mut rsum, mut rn, mut psum, mut pn) = (0.0, 0, 0.0, 0);
    for f in lib.library_functions().filter(|f| !f.is_ctor) {
        let empty = BTreeSet::new();
        let i = inf.get(&f.id).unwrap_or(&empty);
        let t = rec.get(&f.id).unwrap_or(&empty);
        let tf = full.get(&f.id).unwrap_or(&empty);
        let (missing, _) = fractional_errors(t, i);
        let (_, extra) = fractional_errors(tf, i);
        if !t.is_empty() {
            rsum += 1.0 - missing;
            rn += 1;
        }
        if !i.is_empty() {
            psum += 1.0 - extra;
            pn += 1;
        }
        functions.push(FunctionScore {
            function: f.id.to_string(),
            truth: t.len(),
            inferred: i.len(),
            common: t.intersection(i).count(),
            recall: 1.0 - missing,
            precision: 1.0 - extra,
        });
    }
    Ok(Metrics {
        precision: if pn == 0 { 1.0 } else { psum / pn as f64 },
        recall: if rn == 0 { 1.0 } else { rsum / rn as f64 },
        functions,
        inferred_specs: inferred_specs.len(),
        truth_specs: recall_truth.len(),
    })
}

/// Client points-to edges derived under the language of `a` but not
/// without any specification.
pub fn nontrivial_points_to(client: &Program, a: &SpecAutomaton) -> BTreeSet<(VarId, AllocSiteId)> {
    let empty = SpecAutomaton::empty(a.alphabet.clone());
    let base = automaton_points_to(client, &empty);
    automaton_points_to(client, a).difference(&base).cloned().collect()
}

/// Ratio of nontrivial client points-to edges under `s` to those under
/// `reference`; `None` when the reference derives none.
pub fn metric_rpt(client: &Program, s: &SpecAutomaton, reference: &SpecAutomaton) -> Option<f64> {
    let denom = nontrivial_points_to(client, reference).len();
    (denom > 0).then(|| nontrivial_points_to(client, s).len() as f64 / denom as f64)
}

/// The prefix tree of a ground truth, as an automaton.
pub fn truth_automaton(lib: &Program, truth: &GroundTruth) -> SpecAutomaton {
    SpecAutomaton::prefix_tree(library_interface(lib).visible, truth.specs.iter())
}

/// Aligned-column text rendering of the per-function scores.
pub fn render_metrics(m: &Metrics) -> String {
    let width = m.functions.iter().map(|f| f.function.len()).max().unwrap_or(8).max(8);
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$}  {:>5}  {:>8}  {:>6}  {:>6}  {:>9}", "function", "truth", "inferred", "common", "recall", "precision");
    for f in &m.functions {
        let _ = writeln!(
            out,
            "{:<width$}  {:>5}  {:>8}  {:>6}  {:>6.3}  {:>9.3}",
            f.function, f.truth, f.inferred, f.common, f.recall, f.precision
        );
    }
    let _ = writeln!(out, "precision {:.4}  recall {:.4}  ({} inferred specs, {} truth specs)", m.precision, m.recall, m.inferred_specs, m.truth_specs);
    out
}
