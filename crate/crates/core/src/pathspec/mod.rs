//! Path specifications: sequences `z1 w1 z2 w2 ... zk wk` of visible
//! variables, each read as a rule
//!
//! ```text
//! w1 A1 z2, ..., w(k-1) A(k-1) zk  =>  z1 C wk
//! ```
//!
//! where `A` is Alias, Transfer or TransferBar depending on whether the two
//! variables are parameters or returns, and the conclusion `C` is Transfer
//! when `z1` is a parameter and Alias when it is a return.

mod automaton;
mod nfa;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use automaton::{AutomatonJson, SpecAutomaton, Sym};
pub use nfa::{diff_strings, find_ill_formed_in, DiffEnumerator, MergedView, Nfa, Wf, WfChecker, WfProfile};

use crate::analysis::Nonterminal;
use crate::ir::{Interface, VisibleVar};

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct PathSpec {
    pub seq: Vec<VisibleVar>,
}

impl PathSpec {
    pub fn new(seq: Vec<VisibleVar>) -> Self {
        PathSpec { seq }
    }

    /// Number of `(z, w)` pairs.
    pub fn hops(&self) -> usize {
        self.seq.len() / 2
    }

    pub fn z(&self, i: usize) -> &VisibleVar {
        &self.seq[2 * i]
    }

    pub fn w(&self, i: usize) -> &VisibleVar {
        &self.seq[2 * i + 1]
    }

    pub fn is_well_formed(&self) -> bool {
        well_formed(&self.seq)
    }

    pub fn display(&self, iface: &Interface) -> String {
        self.seq.iter().map(|v| iface.name(v)).collect::<Vec<_>>().join(" ")
    }

    /// Parses whitespace-separated display names such as
    /// `ob_set this_set this_get r_get`.
    pub fn parse(iface: &Interface, text: &str) -> Result<PathSpec, SpecError> {
        let seq = text
            .split_whitespace()
            .map(|t| iface.resolve(t).ok_or_else(|| SpecError::UnknownVariable(t.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PathSpec { seq })
    }
}

impl fmt::Display for PathSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.seq.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join(" "))
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("ill-formed path specification: {0}")]
    IllFormed(String),
    #[error("unknown visible variable '{0}'")]
    UnknownVariable(String),
    #[error("malformed automaton: {0}")]
    Automaton(String),
}

/// Checks the structural constraints: even non-zero length, each pair in one
/// function, a return at the end and never two returns across a boundary.
pub fn well_formed(seq: &[VisibleVar]) -> bool {
    check(seq).is_ok()
}

fn check(seq: &[VisibleVar]) -> Result<(), String> {
    if seq.is_empty() || seq.len() % 2 != 0 {
        return Err(format!("length {} is not a positive even number", seq.len()));
    }
    if !seq[seq.len() - 1].is_return() {
        return Err("the last variable must be a return value".into());
    }
    valid_prefix_msg(seq)
}

fn valid_prefix_msg(seq: &[VisibleVar]) -> Result<(), String> {
    for (i, v) in seq.iter().enumerate() {
        if i % 2 == 1 && v.func != seq[i - 1].func {
            return Err(format!("{} and {} belong to different functions", seq[i - 1], v));
        }
        if i % 2 == 0 && i > 0 && v.is_return() && seq[i - 1].is_return() {
            return Err(format!("{} and {} are both return values", seq[i - 1], v));
        }
    }
    Ok(())
}

/// True if `prefix` can be extended to a well-formed specification.
pub fn valid_prefix(prefix: &[VisibleVar]) -> bool {
    valid_prefix_msg(prefix).is_ok()
}

/// Interface-level rule: premise edges and a conclusion edge over visible
/// variables.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct SpecRule {
    pub premise: Vec<(VisibleVar, Nonterminal, VisibleVar)>,
    pub conclusion: (VisibleVar, Nonterminal, VisibleVar),
}

/// The relation a boundary pair `(w, z)` must satisfy.
pub fn boundary_relation(w: &VisibleVar, z: &VisibleVar) -> Option<Nonterminal> {
    match (w.is_return(), z.is_return()) {
        (false, false) => Some(Nonterminal::Alias),
        (true, false) => Some(Nonterminal::Transfer),
        (false, true) => Some(Nonterminal::TransferBar),
        (true, true) => None,
    }
}

pub fn to_rule(s: &PathSpec) -> Result<SpecRule, SpecError> {
    check(&s.seq).map_err(SpecError::IllFormed)?;
    let k = s.hops();
    let premise = (0..k - 1)
        .map(|i| {
            let (w, z) = (s.w(i), s.z(i + 1));
            (w.clone(), boundary_relation(w, z).expect("checked above"), z.clone())
        })
        .collect();
    let z1 = s.z(0);
    let nt = if z1.is_return() { Nonterminal::Alias } else { Nonterminal::Transfer };
    Ok(SpecRule { premise, conclusion: (z1.clone(), nt, s.w(k - 1).clone()) })
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Choice {
    Var(VisibleVar),
    Terminate,
}

/// Legal next symbols after a valid prefix, in interface order, with
/// termination last when the prefix is already a complete specification.
pub fn next_choices(iface: &Interface, prefix: &[VisibleVar]) -> Vec<Choice> {
    let mut out = Vec::new();
    if prefix.len() % 2 == 1 {
        let z = &prefix[prefix.len() - 1];
        for i in iface.vars_of(&z.func) {
            out.push(Choice::Var(iface.visible[i].clone()));
        }
        return out;
    }
    let after_return = prefix.last().is_some_and(|w| w.is_return());
    for v in &iface.visible {
        if !(after_return && v.is_return()) {
            out.push(Choice::Var(v.clone()));
        }
    }
    if after_return {
        out.push(Choice::Terminate);
    }
    out
}

/// Every well-formed specification with at most `max_hops` pairs, in
/// length-then-interface order.
pub fn all_specs(iface: &Interface, max_hops: usize) -> Vec<PathSpec> {
    let mut layer: Vec<Vec<VisibleVar>> = vec![vec![]];
    let mut out = Vec::new();
    for _ in 0..max_hops {
        let mut next = Vec::new();
        for prefix in &layer {
            for c in next_choices(iface, prefix) {
                let Choice::Var(z) = c else { continue };
                let mut p1 = prefix.clone();
                p1.push(z);
                for c2 in next_choices(iface, &p1) {
                    let Choice::Var(w) = c2 else { continue };
                    let mut p2 = p1.clone();
                    p2.push(w);
                    next.push(p2);
                }
            }
        }
        out.extend(next.iter().filter(|p| well_formed(p)).cloned().map(PathSpec::new));
        layer = next;
    }
    out
}

#[cfg(test)]
mod tests;
