//! The noisy precision oracle: a candidate specification is accepted when
//! its synthesized unit test passes against the library implementation.
//! An accept implies precision only up to the usual testing caveats, while
//! a reject can be wrong (the test may simply fail to exhibit the flow).

use std::collections::{BTreeSet, HashMap};
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::analysis::{closure, extract_graph, Nonterminal, SpecRuleSet, Vertex};
use crate::interpreter::{run_unit_test, Outcome, Value, DEFAULT_FUEL};
use crate::ir::{Program, VarId, VisibleVar};
use crate::pathspec::PathSpec;
use crate::synth::{canonical_edge, canonical_premise, Strategy, Synthesizer, UnitTest};

/// Anything that can judge a candidate specification.
pub trait SpecOracle: Sync {
    fn check(&self, s: &PathSpec) -> bool;
}

impl<F: Fn(&PathSpec) -> bool + Sync> SpecOracle for F {
    fn check(&self, s: &PathSpec) -> bool {
        self(s)
    }
}

#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct OracleConfig {
    pub strategy: Strategy,
    pub fuel: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { strategy: Strategy::Instantiate, fuel: DEFAULT_FUEL }
    }
}

/// One line of the verdict log.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct Verdict {
    pub spec: String,
    pub accepted: bool,
    pub strategy: Strategy,
    /// Whether the test exhibits exactly the premise; only computed for
    /// accepted specifications. A `false` here flags an accept that the
    /// instantiation strategy cannot vouch for.
    pub witness: Option<bool>,
    /// Why the candidate was rejected, or empty.
    pub reason: String,
}

/// Executes synthesized tests against a library, memoizing verdicts.
pub struct DynamicOracle {
    synth: Synthesizer,
    cfg: OracleConfig,
    cache: Mutex<HashMap<PathSpec, bool>>,
    log: Mutex<Vec<Verdict>>,
}

impl DynamicOracle {
    pub fn new(lib: &Program, cfg: OracleConfig) -> Self {
        DynamicOracle {
            synth: Synthesizer::new(lib),
            cfg,
            cache: Mutex::new(HashMap::new()),
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn synthesizer(&self) -> &Synthesizer {
        &self.synth
    }

    pub fn config(&self) -> OracleConfig {
        self.cfg
    }

    /// Number of distinct specifications judged so far.
    pub fn distinct_queries(&self) -> usize {
        self.cache.lock().expect("oracle cache poisoned").len()
    }

    /// Verdicts in query order.
    pub fn verdicts(&self) -> Vec<Verdict> {
        self.log.lock().expect("oracle log poisoned").clone()
    }

    /// Writes the verdict log as JSON lines.
    pub fn write_log(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for v in self.verdicts() {
            serde_json::to_writer(&mut f, &v)?;
            f.write_all(b"\n")?;
        }
        f.flush()
    }

    /// Judges `s` without consulting the cache.
    pub fn judge(&self, s: &PathSpec) -> Verdict {
        let spec = s.display(&self.synth.iface);
        let reject = |reason: String| Verdict {
            spec: spec.clone(),
            accepted: false,
            strategy: self.cfg.strategy,
            witness: None,
            reason,
        };
        let test = match self.synth.synthesize(s, self.cfg.strategy) {
            Ok(t) => t,
            Err(e) => return reject(e.to_string()),
        };
        let r = run_unit_test(&test, &self.synth.lib, self.cfg.fuel);
        match (&r.outcome, r.compared) {
            (Outcome::Returned(Value::Bool(true)), Some((Value::Ref(_), _))) => Verdict {
                spec: spec.clone(),
                accepted: true,
                strategy: self.cfg.strategy,
                witness: Some(witness_condition(&test, &self.synth.lib)),
                reason: String::new(),
            },
            (Outcome::Returned(Value::Bool(true)), _) => reject("both sides of the comparison are null".into()),
            (Outcome::Returned(_), _) => reject("the comparison is false".into()),
            (Outcome::NullDeref { func, index }, _) => reject(format!("null dereference in {func} at statement {index}")),
            (Outcome::OutOfFuel, _) => reject("out of fuel".into()),
            (Outcome::UndefinedCall(f), _) => reject(format!("call to undefined function {f}")),
        }
    }
}

impl SpecOracle for DynamicOracle {
    fn check(&self, s: &PathSpec) -> bool {
        if let Some(&v) = self.cache.lock().expect("oracle cache poisoned").get(s) {
            return v;
        }
        let v = self.judge(s);
        let accepted = v.accepted;
        let mut cache = self.cache.lock().expect("oracle cache poisoned");
        // Another thread may have judged the same spec meanwhile; verdicts
        // are deterministic, so the first write stands.
        if cache.insert(s.clone(), accepted).is_none() {
            self.log.lock().expect("oracle log poisoned").push(v);
        }
        accepted
    }
}

/// Convenience wrapper: synthesize, run, compare.
pub fn check(s: &PathSpec, lib: &Program, cfg: OracleConfig) -> bool {
    DynamicOracle::new(lib, cfg).check(s)
}

/// Does the test, analysed without library bodies, exhibit exactly the
/// premise of its specification among visible variables? Self-loops are
/// ignored on both sides and backward edges are folded into forward ones.
pub fn witness_condition(t: &UnitTest, lib: &Program) -> bool {
    canonical_premise(&t.spec).is_ok_and(|want| want == exhibited_edges(t, lib))
}

/// Canonical visible-variable edges of the test's closure.
pub fn exhibited_edges(t: &UnitTest, lib: &Program) -> BTreeSet<(VisibleVar, Nonterminal, VisibleVar)> {
    let p = t.program(lib);
    let iface = crate::ir::library_interface(lib);
    let visible: HashMap<VarId, VisibleVar> = iface.visible.iter().map(|v| (iface.var_id(v), v.clone())).collect();
    let c = closure(&extract_graph(&p, false), &SpecRuleSet::empty());
    let mut out = BTreeSet::new();
    for (a, nt, b) in c.edges() {
        let (Vertex::Var(a), Vertex::Var(b)) = (&a, &b) else { continue };
        let (Some(va), Some(vb)) = (visible.get(a), visible.get(b)) else { continue };
        if va == vb {
            continue;
        }
        if let Some(e) = canonical_edge(va, nt, vb) {
            out.insert(e);
        }
    }
    out
}

#[cfg(test)]
mod tests;
