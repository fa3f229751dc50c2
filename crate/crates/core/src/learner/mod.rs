//! Specification inference in two phases. Sampling draws candidate
//! specifications one variable at a time and keeps those the oracle
//! accepts. Generalization starts from the prefix tree of the positives and
//! greedily merges states, keeping a merge only when every short string it
//! adds passes the oracle.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ir::{Interface, VisibleVar};
use crate::oracle::SpecOracle;
use crate::pathspec::{
    find_ill_formed_in, next_choices, Choice, DiffEnumerator, MergedView, PathSpec, SpecAutomaton, WfChecker, WfProfile,
};

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    Random,
    Mcts,
}

impl fmt::Display for Sampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sampler::Random => "random",
            Sampler::Mcts => "mcts",
        })
    }
}

impl FromStr for Sampler {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "random" => Ok(Sampler::Random),
            "mcts" => Ok(Sampler::Mcts),
            _ => Err(format!("unknown sampler '{s}' (expected random or mcts)")),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct LearnerConfig {
    /// Number of candidates drawn during sampling.
    pub budget: usize,
    /// Learning rate of the search-tree update.
    pub alpha: f64,
    /// Longest specification, in variables, that sampling produces and
    /// that merge checks query.
    pub n_max: usize,
    pub seed: u64,
    /// Oracle queries allowed for a single merge check. A merge that would
    /// need more is rejected.
    pub merge_query_cap: usize,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig { budget: 10_000, alpha: 0.5, n_max: 8, seed: 0, merge_query_cap: 2_000 }
    }
}

/// Draws one candidate by a uniform walk over legal next variables. `None`
/// when the walk exceeds `n_max` variables before terminating.
fn random_walk(iface: &Interface, n_max: usize, rng: &mut impl Rng) -> Option<Vec<VisibleVar>> {
    let mut seq = Vec::new();
    loop {
        let choices = next_choices(iface, &seq);
        if choices.is_empty() {
            return None;
        }
        match &choices[rng.gen_range(0..choices.len())] {
            Choice::Terminate => return Some(seq),
            Choice::Var(v) => {
                if seq.len() == n_max {
                    return None;
                }
                seq.push(v.clone());
            }
        }
    }
}

/// Phase one with uniform choices. Returns the accepted candidates.
pub fn sample_random(
    iface: &Interface,
    oracle: &(impl SpecOracle + ?Sized),
    cfg: &LearnerConfig,
) -> BTreeSet<PathSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = BTreeSet::new();
    if !has_returns(iface) {
        return out;
    }
    for _ in 0..cfg.budget {
        let Some(seq) = random_walk(iface, cfg.n_max, &mut rng) else { continue };
        let s = PathSpec::new(seq);
        if oracle.check(&s) {
            out.insert(s);
        }
    }
    out
}

/// Without a return value no specification is well-formed, and a walk
/// would never terminate.
fn has_returns(iface: &Interface) -> bool {
    iface.visible.iter().any(VisibleVar::is_return)
}

/// Search tree for phase one: a score per prefix and legal next choice,
/// sampled through a softmax.
#[derive(Clone, Debug)]
pub struct MctsTree {
    pub alpha: f64,
    /// Scores indexed like `next_choices` of the prefix.
    nodes: HashMap<Vec<VisibleVar>, Vec<f64>>,
}

impl MctsTree {
    pub fn new(alpha: f64) -> Self {
        MctsTree { alpha, nodes: HashMap::new() }
    }

    fn node(&mut self, iface: &Interface, prefix: &[VisibleVar]) -> &mut Vec<f64> {
        self.nodes
            .entry(prefix.to_vec())
            .or_insert_with(|| vec![0.0; next_choices(iface, prefix).len()])
    }

    /// The score of `choice` after `prefix`; zero for unvisited nodes.
    pub fn score(&self, iface: &Interface, prefix: &[VisibleVar], choice: &Choice) -> f64 {
        let Some(q) = self.nodes.get(prefix) else { return 0.0 };
        next_choices(iface, prefix).iter().position(|c| c == choice).map_or(0.0, |i| q[i])
    }

    /// Sampling distribution over `next_choices(prefix)`.
    pub fn probabilities(&self, iface: &Interface, prefix: &[VisibleVar]) -> Vec<f64> {
        let n = next_choices(iface, prefix).len();
        let q = self.nodes.get(prefix).cloned().unwrap_or_else(|| vec![0.0; n]);
        let e: Vec<f64> = q.iter().map(|x| x.exp()).collect();
        let z: f64 = e.iter().sum();
        e.into_iter().map(|x| x / z).collect()
    }

    /// Draws a candidate; the flag tells whether it terminated within
    /// `n_max` variables.
    pub fn sample(&mut self, iface: &Interface, n_max: usize, rng: &mut impl Rng) -> (Vec<VisibleVar>, bool) {
        let mut seq = Vec::new();
        loop {
            let choices = next_choices(iface, &seq);
            if choices.is_empty() {
                return (seq, false);
            }
            let q = self.node(iface, &seq);
            let dist = WeightedIndex::new(q.iter().map(|x| x.exp())).expect("scores are finite");
            match &choices[dist.sample(rng)] {
                Choice::Terminate => return (seq, true),
                Choice::Var(v) => {
                    if seq.len() == n_max {
                        return (seq, false);
                    }
                    seq.push(v.clone());
                }
            }
        }
    }

    /// Moves every score along the path towards `outcome`. The final
    /// termination choice is included when the walk terminated.
    pub fn update(&mut self, iface: &Interface, path: &[VisibleVar], terminated: bool, outcome: f64) {
        let alpha = self.alpha;
        for i in 0..=path.len() {
            let choice = match path.get(i) {
                Some(v) => Choice::Var(v.clone()),
                None if terminated => Choice::Terminate,
                None => break,
            };
            let idx = next_choices(iface, &path[..i]).iter().position(|c| *c == choice).expect("path follows legal choices");
            let q = &mut self.node(iface, &path[..i])[idx];
            *q = (1.0 - alpha) * *q + alpha * outcome;
        }
    }
}

/// Phase one guided by the search tree. Returns the accepted candidates.
pub fn sample_mcts(iface: &Interface, oracle: &(impl SpecOracle + ?Sized), cfg: &LearnerConfig) -> BTreeSet<PathSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut tree = MctsTree::new(cfg.alpha);
    let mut out = BTreeSet::new();
    if !has_returns(iface) {
        return out;
    }
    for _ in 0..cfg.budget {
        let (seq, terminated) = tree.sample(iface, cfg.n_max, &mut rng);
        let accepted = terminated && {
            let s = PathSpec::new(seq.clone());
            let ok = oracle.check(&s);
            if ok {
                out.insert(s);
            }
            ok
        };
        tree.update(iface, &seq, terminated, if accepted { 1.0 } else { 0.0 });
    }
    out
}

pub fn sample(sampler: Sampler, iface: &Interface, oracle: &(impl SpecOracle + ?Sized), cfg: &LearnerConfig) -> BTreeSet<PathSpec> {
    match sampler {
        Sampler::Random => sample_random(iface, oracle, cfg),
        Sampler::Mcts => sample_mcts(iface, oracle, cfg),
    }
}

/// Prefix tree acceptor of the positives, numbered breadth-first.
pub fn build_pta(iface: &Interface, positives: &BTreeSet<PathSpec>) -> SpecAutomaton {
    SpecAutomaton::prefix_tree(iface.visible.clone(), positives.iter())
}

/// Why a candidate merge was kept or dropped.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum MergeVerdict {
    Accepted,
    /// The merge adds a string that is not a specification.
    IllFormed,
    /// The oracle rejected an added string.
    Refuted { spec: String },
    /// More added strings than the per-merge query cap.
    TooManyQueries,
}

/// One line of the merge trace, in PTA state numbers.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct MergeRecord {
    pub q: u32,
    pub p: u32,
    /// Added strings sent to the oracle.
    pub checked: usize,
    pub verdict: MergeVerdict,
}

#[derive(Clone, Debug)]
pub struct Learned {
    pub automaton: SpecAutomaton,
    pub trace: Vec<MergeRecord>,
}

/// Phase two: greedy state merging checked by the oracle. States are
/// visited once in breadth-first order of the prefix tree; each is merged
/// into the first already-processed state whose merge adds only
/// well-formed strings that the oracle accepts up to `n_max` variables.
pub fn learn(
    iface: &Interface,
    positives: &BTreeSet<PathSpec>,
    oracle: &(impl SpecOracle + ?Sized),
    cfg: &LearnerConfig,
) -> Learned {
    let mut a = build_pta(iface, positives);
    let wf = WfChecker::new(&a.alphabet);
    let start = a.start;
    let order: Vec<u32> = a.states().filter(|&q| q != start).collect();
    let mut processed: Vec<u32> = vec![a.start];
    let mut trace = Vec::new();
    let mut profile = WfProfile::new(&a, &wf);
    for &q in &order {
        let mut merged_into = None;
        for &p in &processed {
            if profile.as_ref().is_some_and(|pr| !pr.compatible(q, p)) {
                trace.push(MergeRecord { q, p, checked: 0, verdict: MergeVerdict::IllFormed });
                continue;
            }
            let view = MergedView { base: &a, q, p };
            if find_ill_formed_in(&view, &wf).is_some() {
                trace.push(MergeRecord { q, p, checked: 0, verdict: MergeVerdict::IllFormed });
                continue;
            }
            let (checked, verdict) = check_merge(&view, &a, &wf, oracle, cfg);
            let ok = verdict == MergeVerdict::Accepted;
            trace.push(MergeRecord { q, p, checked, verdict });
            if ok {
                merged_into = Some(p);
                break;
            }
        }
        match merged_into {
            Some(p) => {
                a = a.merge(q, p);
                profile = WfProfile::new(&a, &wf);
            }
            None => processed.push(q),
        }
    }
    Learned { automaton: a.trim().canonical(), trace }
}

/// Queries the strings a merge adds, shortest first, stopping at the first
/// rejection.
fn check_merge(
    view: &MergedView<'_>,
    base: &SpecAutomaton,
    wf: &WfChecker,
    oracle: &(impl SpecOracle + ?Sized),
    cfg: &LearnerConfig,
) -> (usize, MergeVerdict) {
    let mut e = DiffEnumerator::new(view, base, wf);
    let mut checked = 0;
    for len in 1..=cfg.n_max {
        let remaining = cfg.merge_query_cap - checked;
        let (words, truncated) = e.layer(len, remaining);
        if truncated {
            return (checked, MergeVerdict::TooManyQueries);
        }
        for w in words {
            checked += 1;
            let s = PathSpec::new(base.vars(&w));
            if !oracle.check(&s) {
                return (checked, MergeVerdict::Refuted { spec: s.to_string() });
            }
        }
    }
    (checked, MergeVerdict::Accepted)
}

/// Independent seed for one phase of a run, derived from the run's seed,
/// so that a phase can be rerun alone with the same randomness.
pub fn phase_seed(master: u64, phase: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(phase);
    rng.gen()
}

/// Both phases in sequence.
pub fn infer(
    iface: &Interface,
    oracle: &(impl SpecOracle + ?Sized),
    sampler: Sampler,
    cfg: &LearnerConfig,
) -> (BTreeSet<PathSpec>, Learned) {
    let positives = sample(sampler, iface, oracle, cfg);
    let learned = learn(iface, &positives, oracle, cfg);
    (positives, learned)
}

#[cfg(test)]
mod tests;
