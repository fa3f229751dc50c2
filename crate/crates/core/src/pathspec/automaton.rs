use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::nfa::{find_ill_formed_in, WfChecker};
use super::{well_formed, PathSpec, SpecError};
use crate::ir::{Interface, VisibleVar};

/// Index into an automaton's alphabet.
pub type Sym = u16;

/// Nondeterministic automaton over visible variables. The alphabet is the
/// interface's visible variables in declaration order.
#[derive(Clone, PartialEq, Debug)]
pub struct SpecAutomaton {
    pub alphabet: Vec<VisibleVar>,
    pub start: u32,
    pub accepting: BTreeSet<u32>,
    /// Every state has an entry, possibly empty.
    pub delta: BTreeMap<u32, BTreeMap<Sym, BTreeSet<u32>>>,
}

/// Serialized form, with symbols written as interface display names.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct AutomatonJson {
    pub alphabet: Vec<String>,
    pub states: Vec<u32>,
    pub start: u32,
    pub accepting: Vec<u32>,
    pub transitions: Vec<(u32, String, u32)>,
}

impl SpecAutomaton {
    /// A one-state automaton accepting nothing.
    pub fn empty(alphabet: Vec<VisibleVar>) -> Self {
        let mut delta = BTreeMap::new();
        delta.insert(0, BTreeMap::new());
        SpecAutomaton { alphabet, start: 0, accepting: BTreeSet::new(), delta }
    }

    pub fn for_interface(iface: &Interface) -> Self {
        Self::empty(iface.visible.clone())
    }

    pub fn sym(&self, v: &VisibleVar) -> Option<Sym> {
        self.alphabet.iter().position(|a| a == v).map(|i| i as Sym)
    }

    pub fn syms(&self, seq: &[VisibleVar]) -> Option<Vec<Sym>> {
        seq.iter().map(|v| self.sym(v)).collect()
    }

    pub fn vars(&self, word: &[Sym]) -> Vec<VisibleVar> {
        word.iter().map(|&s| self.alphabet[s as usize].clone()).collect()
    }

    pub fn states(&self) -> impl Iterator<Item = u32> + '_ {
        self.delta.keys().copied()
    }

    pub fn num_states(&self) -> usize {
        self.delta.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.delta.values().flat_map(|m| m.values()).map(|s| s.len()).sum()
    }

    pub fn add_state(&mut self) -> u32 {
        let id = self.delta.keys().next_back().map_or(0, |m| m + 1);
        self.delta.insert(id, BTreeMap::new());
        id
    }

    pub fn add_transition(&mut self, p: u32, s: Sym, q: u32) {
        self.delta.entry(q).or_default();
        self.delta.entry(p).or_default().entry(s).or_default().insert(q);
    }

    /// All transitions as `(from, symbol, to)`, sorted.
    pub fn transitions(&self) -> Vec<(u32, Sym, u32)> {
        let mut out = Vec::new();
        for (&p, m) in &self.delta {
            for (&s, qs) in m {
                for &q in qs {
                    out.push((p, s, q));
                }
            }
        }
        out
    }

    pub fn has_incoming(&self, q: u32) -> bool {
        self.delta.values().any(|m| m.values().any(|qs| qs.contains(&q)))
    }

    pub fn has_outgoing(&self, q: u32) -> bool {
        self.delta.get(&q).is_some_and(|m| m.values().any(|qs| !qs.is_empty()))
    }

    pub fn step(&self, states: &BTreeSet<u32>, s: Sym) -> BTreeSet<u32> {
        let mut out = BTreeSet::new();
        for q in states {
            if let Some(qs) = self.delta.get(q).and_then(|m| m.get(&s)) {
                out.extend(qs.iter().copied());
            }
        }
        out
    }

    pub fn accepts_word(&self, word: &[Sym]) -> bool {
        let mut cur: BTreeSet<u32> = [self.start].into_iter().collect();
        for &s in word {
            cur = self.step(&cur, s);
            if cur.is_empty() {
                return false;
            }
        }
        cur.iter().any(|q| self.accepting.contains(q))
    }

    pub fn accepts(&self, seq: &[VisibleVar]) -> bool {
        match self.syms(seq) {
            Some(w) => self.accepts_word(&w),
            None => false,
        }
    }

    /// Prefix tree acceptor for a finite set of specifications.
    pub fn prefix_tree<'a>(alphabet: Vec<VisibleVar>, specs: impl IntoIterator<Item = &'a PathSpec>) -> Self {
        let mut a = Self::empty(alphabet);
        let mut children: HashMap<(u32, Sym), u32> = HashMap::new();
        let mut sorted: Vec<&PathSpec> = specs.into_iter().collect();
        sorted.sort();
        sorted.dedup();
        // Insert breadth-first so state numbers follow the trie's BFS order.
        let words: Vec<Vec<Sym>> = sorted
            .iter()
            .map(|s| a.syms(&s.seq).expect("specification outside the alphabet"))
            .collect();
        let max_len = words.iter().map(|w| w.len()).max().unwrap_or(0);
        let mut at: Vec<u32> = vec![a.start; words.len()];
        for depth in 0..max_len {
            let mut order: Vec<usize> = (0..words.len()).filter(|&i| words[i].len() > depth).collect();
            order.sort_by_key(|&i| (at[i], words[i][depth]));
            for i in order {
                let s = words[i][depth];
                let key = (at[i], s);
                let next = match children.get(&key) {
                    Some(&q) => q,
                    None => {
                        let q = a.add_state();
                        a.add_transition(at[i], s, q);
                        children.insert(key, q);
                        q
                    }
                };
                at[i] = next;
            }
        }
        a.accepting.extend(at.iter().copied());
        a
    }

    fn reachable(&self) -> BTreeSet<u32> {
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([self.start]);
        seen.insert(self.start);
        while let Some(p) = queue.pop_front() {
            for qs in self.delta.get(&p).into_iter().flat_map(|m| m.values()) {
                for &q in qs {
                    if seen.insert(q) {
                        queue.push_back(q);
                    }
                }
            }
        }
        seen
    }

    /// Minimum number of symbols from each state to acceptance.
    pub fn distance_to_accept(&self) -> HashMap<u32, usize> {
        let mut rev: HashMap<u32, Vec<u32>> = HashMap::new();
        for (p, _, q) in self.transitions() {
            rev.entry(q).or_default().push(p);
        }
        let mut dist: HashMap<u32, usize> = HashMap::new();
        let mut queue = VecDeque::new();
        for &f in &self.accepting {
            dist.insert(f, 0);
            queue.push_back(f);
        }
        while let Some(q) = queue.pop_front() {
            let d = dist[&q];
            for &p in rev.get(&q).map(|v| v.as_slice()).unwrap_or(&[]) {
                if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(p) {
                    e.insert(d + 1);
                    queue.push_back(p);
                }
            }
        }
        dist
    }

    /// Drops states that are unreachable or cannot reach acceptance (the
    /// start state is always kept).
    pub fn trim(&self) -> SpecAutomaton {
        let reach = self.reachable();
        let co = self.distance_to_accept();
        let keep = |q: &u32| *q == self.start || (reach.contains(q) && co.contains_key(q));
        let mut out = SpecAutomaton::empty(self.alphabet.clone());
        out.delta.clear();
        out.start = self.start;
        for q in self.states().filter(keep) {
            out.delta.insert(q, BTreeMap::new());
        }
        for (p, s, q) in self.transitions() {
            if keep(&p) && keep(&q) && reach.contains(&p) {
                out.add_transition(p, s, q);
            }
        }
        out.accepting = self.accepting.iter().copied().filter(|q| out.delta.contains_key(q)).collect();
        out
    }

    /// Renumbers states in breadth-first order from the start state,
    /// following symbols in alphabet order. Unreachable states are dropped.
    pub fn canonical(&self) -> SpecAutomaton {
        let mut map: BTreeMap<u32, u32> = BTreeMap::new();
        let mut queue = VecDeque::from([self.start]);
        map.insert(self.start, 0);
        while let Some(p) = queue.pop_front() {
            for qs in self.delta.get(&p).into_iter().flat_map(|m| m.values()) {
                for &q in qs {
                    if !map.contains_key(&q) {
                        let id = map.len() as u32;
                        map.insert(q, id);
                        queue.push_back(q);
                    }
                }
            }
        }
        let mut out = SpecAutomaton::empty(self.alphabet.clone());
        out.delta.clear();
        for &id in map.values() {
            out.delta.insert(id, BTreeMap::new());
        }
        for (p, s, q) in self.transitions() {
            if let (Some(&a), Some(&b)) = (map.get(&p), map.get(&q)) {
                out.add_transition(a, s, b);
            }
        }
        out.accepting = self.accepting.iter().filter_map(|q| map.get(q).copied()).collect();
        out
    }

    /// Shortest accepted ill-formed word, if any, found by exploring the
    /// product with a deterministic well-formedness checker. Unlike bounded
    /// enumeration this covers words of every length.
    pub fn find_ill_formed(&self) -> Option<Vec<Sym>> {
        find_ill_formed_in(self, &WfChecker::new(&self.alphabet))
    }

    /// The automaton with state `q` folded into `p`: transitions into and
    /// out of `q` are moved to `p`, `p` accepts if `q` did, and `q` is
    /// removed.
    pub fn merge(&self, q: u32, p: u32) -> SpecAutomaton {
        assert!(q != p && q != self.start, "cannot fold the start state or a state into itself");
        let mut out = SpecAutomaton::empty(self.alphabet.clone());
        out.delta.clear();
        out.start = self.start;
        for s in self.states().filter(|&s| s != q) {
            out.delta.insert(s, BTreeMap::new());
        }
        let map = |s: u32| if s == q { p } else { s };
        for (a, sym, b) in self.transitions() {
            out.add_transition(map(a), sym, map(b));
        }
        out.accepting = self.accepting.iter().map(|&s| map(s)).collect();
        out
    }

    /// Accepted well-formed words of length at most `max_len`, shortest
    /// first, then in alphabet order.
    pub fn enumerate_words(&self, max_len: usize) -> Vec<Vec<Sym>> {
        let dist = self.distance_to_accept();
        let mut out = Vec::new();
        let start: BTreeSet<u32> = [self.start].into_iter().collect();
        let mut layer: Vec<(Vec<Sym>, BTreeSet<u32>)> = vec![(vec![], start)];
        for len in 1..=max_len {
            let mut next = Vec::new();
            for (word, states) in &layer {
                let mut syms: BTreeSet<Sym> = BTreeSet::new();
                for q in states {
                    if let Some(m) = self.delta.get(q) {
                        syms.extend(m.keys().copied());
                    }
                }
                for s in syms {
                    let to = self.step(states, s);
                    let remaining = max_len - len;
                    if !to.iter().any(|q| dist.get(q).is_some_and(|&d| d <= remaining)) {
                        continue;
                    }
                    let mut w = word.clone();
                    w.push(s);
                    if !super::valid_prefix(&self.vars(&w)) {
                        continue;
                    }
                    if to.iter().any(|q| self.accepting.contains(q)) && well_formed(&self.vars(&w)) {
                        out.push(w.clone());
                    }
                    next.push((w, to));
                }
            }
            layer = next;
        }
        out
    }

    /// Accepted well-formed specifications with at most `max_len` symbols.
    pub fn enumerate(&self, max_len: usize) -> Vec<PathSpec> {
        self.enumerate_words(max_len).iter().map(|w| PathSpec::new(self.vars(w))).collect()
    }

    pub fn to_json(&self, iface: &Interface) -> AutomatonJson {
        AutomatonJson {
            alphabet: self.alphabet.iter().map(|v| iface.name(v)).collect(),
            states: self.states().collect(),
            start: self.start,
            accepting: self.accepting.iter().copied().collect(),
            transitions: self
                .transitions()
                .into_iter()
                .map(|(p, s, q)| (p, iface.name(&self.alphabet[s as usize]), q))
                .collect(),
        }
    }

    pub fn from_json(iface: &Interface, j: &AutomatonJson) -> Result<SpecAutomaton, SpecError> {
        let alphabet = j
            .alphabet
            .iter()
            .map(|n| iface.resolve(n).ok_or_else(|| SpecError::UnknownVariable(n.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        let mut a = SpecAutomaton::empty(alphabet);
        a.delta.clear();
        for &q in &j.states {
            a.delta.insert(q, BTreeMap::new());
        }
        if !a.delta.contains_key(&j.start) {
            return Err(SpecError::Automaton(format!("start state {} is not declared", j.start)));
        }
        a.start = j.start;
        for (p, name, q) in &j.transitions {
            if !a.delta.contains_key(p) || !a.delta.contains_key(q) {
                return Err(SpecError::Automaton(format!("transition {p} -> {q} uses an undeclared state")));
            }
            let v = iface.resolve(name).ok_or_else(|| SpecError::UnknownVariable(name.clone()))?;
            let s = a.sym(&v).ok_or_else(|| SpecError::UnknownVariable(name.clone()))?;
            a.add_transition(*p, s, *q);
        }
        for &q in &j.accepting {
            if !a.delta.contains_key(&q) {
                return Err(SpecError::Automaton(format!("accepting state {q} is not declared")));
            }
            a.accepting.insert(q);
        }
        Ok(a)
    }
}
