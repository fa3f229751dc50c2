//! Automaton algorithms shared by the learner: a read-only view of a
//! candidate merge, the product with the well-formedness checker, and
//! enumeration of the words a merge adds.

use std::collections::{BTreeMap, HashMap, VecDeque};

use super::automaton::{SpecAutomaton, Sym};
use crate::ir::VisibleVar;

/// Read access to a nondeterministic automaton.
pub trait Nfa {
    fn start(&self) -> u32;
    fn is_accepting(&self, q: u32) -> bool;
    /// Appends `(symbol, target)` for every transition leaving `q`.
    fn edges(&self, q: u32, out: &mut Vec<(Sym, u32)>);
}

impl Nfa for SpecAutomaton {
    fn start(&self) -> u32 {
        self.start
    }

    fn is_accepting(&self, q: u32) -> bool {
        self.accepting.contains(&q)
    }

    fn edges(&self, q: u32, out: &mut Vec<(Sym, u32)>) {
        if let Some(m) = self.delta.get(&q) {
            for (&s, qs) in m {
                out.extend(qs.iter().map(|&t| (s, t)));
            }
        }
    }
}

/// `base` with `q` folded into `p`, without copying it.
pub struct MergedView<'a> {
    pub base: &'a SpecAutomaton,
    pub q: u32,
    pub p: u32,
}

impl MergedView<'_> {
    fn map(&self, s: u32) -> u32 {
        if s == self.q {
            self.p
        } else {
            s
        }
    }
}

impl Nfa for MergedView<'_> {
    fn start(&self) -> u32 {
        self.map(self.base.start)
    }

    fn is_accepting(&self, s: u32) -> bool {
        self.base.accepting.contains(&s) || (s == self.p && self.base.accepting.contains(&self.q))
    }

    fn edges(&self, s: u32, out: &mut Vec<(Sym, u32)>) {
        let from = out.len();
        self.base.edges(s, out);
        if s == self.p {
            self.base.edges(self.q, out);
        }
        for e in &mut out[from..] {
            e.1 = self.map(e.1);
        }
    }
}

/// States of the deterministic well-formedness checker.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Wf {
    Start,
    AfterParam,
    AfterReturn,
    Dead,
    /// Inside a pair; holds the function index of `z`.
    Open(u16),
}

impl Wf {
    /// Dense index, used for bit sets.
    pub fn index(self) -> usize {
        match self {
            Wf::Start => 0,
            Wf::AfterParam => 1,
            Wf::AfterReturn => 2,
            Wf::Dead => 3,
            Wf::Open(f) => 4 + f as usize,
        }
    }
}

/// Deterministic automaton for well-formed specifications: pairs stay in
/// one function, two returns never meet across a boundary, and a complete
/// word ends right after a return.
pub struct WfChecker {
    func: Vec<u16>,
    is_return: Vec<bool>,
    nfuncs: usize,
}

impl WfChecker {
    pub fn new(alphabet: &[VisibleVar]) -> Self {
        let mut funcs: Vec<&crate::ir::FuncId> = Vec::new();
        let func = alphabet
            .iter()
            .map(|v| match funcs.iter().position(|f| **f == v.func) {
                Some(i) => i as u16,
                None => {
                    funcs.push(&v.func);
                    (funcs.len() - 1) as u16
                }
            })
            .collect();
        WfChecker { func, is_return: alphabet.iter().map(|v| v.is_return()).collect(), nfuncs: funcs.len() }
    }

    pub fn num_states(&self) -> usize {
        4 + self.nfuncs
    }

    pub fn step(&self, st: Wf, s: Sym) -> Wf {
        let f = self.func[s as usize];
        let ret = self.is_return[s as usize];
        match st {
            Wf::Dead => Wf::Dead,
            Wf::Start | Wf::AfterParam => Wf::Open(f),
            Wf::AfterReturn if ret => Wf::Dead,
            Wf::AfterReturn => Wf::Open(f),
            Wf::Open(g) if g == f && ret => Wf::AfterReturn,
            Wf::Open(g) if g == f => Wf::AfterParam,
            Wf::Open(_) => Wf::Dead,
        }
    }

    fn all(&self) -> impl Iterator<Item = Wf> {
        [Wf::Start, Wf::AfterParam, Wf::AfterReturn, Wf::Dead]
            .into_iter()
            .chain((0..self.nfuncs as u16).map(Wf::Open))
    }
}

/// Shortest accepted word that is not well-formed, by breadth-first search
/// of the product with the checker.
pub fn find_ill_formed_in<N: Nfa>(n: &N, wf: &WfChecker) -> Option<Vec<Sym>> {
    let init = (n.start(), Wf::Start);
    let mut parent: HashMap<(u32, Wf), Option<((u32, Wf), Sym)>> = HashMap::new();
    parent.insert(init, None);
    let mut queue = VecDeque::from([init]);
    let mut edges = Vec::new();
    while let Some(node @ (q, st)) = queue.pop_front() {
        if n.is_accepting(q) && st != Wf::AfterReturn {
            let mut word = Vec::new();
            let mut cur = node;
            while let Some(Some((prev, s))) = parent.get(&cur) {
                word.push(*s);
                cur = *prev;
            }
            word.reverse();
            return Some(word);
        }
        edges.clear();
        n.edges(q, &mut edges);
        for &(s, q2) in &edges {
            let next = (q2, wf.step(st, s));
            if let std::collections::hash_map::Entry::Vacant(e) = parent.entry(next) {
                e.insert(Some((node, s)));
                queue.push_back(next);
            }
        }
    }
    None
}

/// Per state: the checker states it is reached in, and the checker states
/// from which some continuation ends in an ill-formed accepted word.
/// Folding `q` into `p` is only possible when neither state is reached in
/// a checker state that is bad for the other.
pub struct WfProfile {
    reach: HashMap<u32, u128>,
    bad: HashMap<u32, u128>,
}

impl WfProfile {
    /// `None` when the checker has too many states for the bit sets.
    pub fn new(a: &SpecAutomaton, wf: &WfChecker) -> Option<Self> {
        if wf.num_states() > 128 {
            return None;
        }
        let bit = |w: Wf| 1u128 << w.index();
        let mut reach: HashMap<u32, u128> = HashMap::new();
        let mut queue = VecDeque::from([(a.start, Wf::Start)]);
        *reach.entry(a.start).or_default() |= bit(Wf::Start);
        let transitions = a.transitions();
        let mut out_edges: BTreeMap<u32, Vec<(Sym, u32)>> = BTreeMap::new();
        for &(p, s, q) in &transitions {
            out_edges.entry(p).or_default().push((s, q));
        }
        while let Some((q, st)) = queue.pop_front() {
            for &(s, q2) in out_edges.get(&q).map(|v| v.as_slice()).unwrap_or(&[]) {
                let st2 = wf.step(st, s);
                let m = reach.entry(q2).or_default();
                if *m & bit(st2) == 0 {
                    *m |= bit(st2);
                    queue.push_back((q2, st2));
                }
            }
        }
        // Backward search from ill-formed acceptances over the full product.
        let mut rev: HashMap<(u32, Wf), Vec<(u32, Wf)>> = HashMap::new();
        for &(p, s, q) in &transitions {
            for w in wf.all() {
                rev.entry((q, wf.step(w, s))).or_default().push((p, w));
            }
        }
        let mut bad: HashMap<u32, u128> = HashMap::new();
        let mut queue = VecDeque::new();
        for &f in &a.accepting {
            for w in wf.all().filter(|&w| w != Wf::AfterReturn) {
                *bad.entry(f).or_default() |= bit(w);
                queue.push_back((f, w));
            }
        }
        while let Some(node) = queue.pop_front() {
            for &(p, w) in rev.get(&node).map(|v| v.as_slice()).unwrap_or(&[]) {
                let m = bad.entry(p).or_default();
                if *m & bit(w) == 0 {
                    *m |= bit(w);
                    queue.push_back((p, w));
                }
            }
        }
        Some(WfProfile { reach, bad })
    }

    /// False when folding `q` into `p` certainly adds an ill-formed word.
    pub fn compatible(&self, q: u32, p: u32) -> bool {
        let get = |m: &HashMap<u32, u128>, s: u32| m.get(&s).copied().unwrap_or(0);
        get(&self.reach, q) & get(&self.bad, p) == 0 && get(&self.reach, p) & get(&self.bad, q) == 0
    }
}

/// Enumerates, one length at a time, the well-formed words accepted by
/// `added` but not by `base`. A memo of which state-set pairs can still
/// produce such a word keeps the search proportional to its output.
pub struct DiffEnumerator<'a, A: Nfa, B: Nfa> {
    added: &'a A,
    base: &'a B,
    wf: &'a WfChecker,
    memo: HashMap<(Vec<u32>, Vec<u32>, Wf, usize), bool>,
    buf: Vec<(Sym, u32)>,
}

impl<'a, A: Nfa, B: Nfa> DiffEnumerator<'a, A, B> {
    pub fn new(added: &'a A, base: &'a B, wf: &'a WfChecker) -> Self {
        DiffEnumerator { added, base, wf, memo: HashMap::new(), buf: Vec::new() }
    }

    fn succ<N: Nfa>(n: &N, set: &[u32], buf: &mut Vec<(Sym, u32)>) -> BTreeMap<Sym, Vec<u32>> {
        buf.clear();
        for &q in set {
            n.edges(q, buf);
        }
        let mut out: BTreeMap<Sym, Vec<u32>> = BTreeMap::new();
        for &(s, t) in buf.iter() {
            out.entry(s).or_default().push(t);
        }
        for v in out.values_mut() {
            v.sort_unstable();
            v.dedup();
        }
        out
    }

    fn is_diff(&self, a: &[u32], b: &[u32], w: Wf) -> bool {
        w == Wf::AfterReturn
            && a.iter().any(|&q| self.added.is_accepting(q))
            && !b.iter().any(|&q| self.base.is_accepting(q))
    }

    /// Can `(a, b, w)` still produce a difference word with exactly `r`
    /// more symbols?
    fn possible(&mut self, a: &[u32], b: &[u32], w: Wf, r: usize) -> bool {
        if w == Wf::Dead || a.is_empty() {
            return false;
        }
        if r == 0 {
            return self.is_diff(a, b, w);
        }
        let key = (a.to_vec(), b.to_vec(), w, r);
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }
        let sa = Self::succ(self.added, a, &mut self.buf);
        let sb = Self::succ(self.base, b, &mut self.buf);
        let mut found = false;
        for (s, ta) in &sa {
            let tb = sb.get(s).map(|v| v.as_slice()).unwrap_or(&[]);
            if self.possible(ta, tb, self.wf.step(w, *s), r - 1) {
                found = true;
                break;
            }
        }
        self.memo.insert(key, found);
        found
    }

    /// Difference words of exactly `len` symbols, in alphabet order, up to
    /// `limit` of them. The flag is set when the limit cut the list short.
    pub fn layer(&mut self, len: usize, limit: usize) -> (Vec<Vec<Sym>>, bool) {
        let mut out = Vec::new();
        let a = vec![self.added.start()];
        let b = vec![self.base.start()];
        let mut word = Vec::new();
        let truncated = !self.walk(&a, &b, Wf::Start, len, &mut word, &mut out, limit);
        (out, truncated)
    }

    /// Returns false when the limit was hit.
    #[allow(clippy::too_many_arguments)]
    fn walk(
        &mut self,
        a: &[u32],
        b: &[u32],
        w: Wf,
        r: usize,
        word: &mut Vec<Sym>,
        out: &mut Vec<Vec<Sym>>,
        limit: usize,
    ) -> bool {
        if !self.possible(a, b, w, r) {
            return true;
        }
        if r == 0 {
            if out.len() >= limit {
                return false;
            }
            out.push(word.clone());
            return true;
        }
        let sa = Self::succ(self.added, a, &mut self.buf);
        let sb = Self::succ(self.base, b, &mut self.buf);
        for (s, ta) in &sa {
            let tb = sb.get(s).map(|v| v.as_slice()).unwrap_or(&[]);
            word.push(*s);
            let ok = self.walk(ta, tb, self.wf.step(w, *s), r - 1, word, out, limit);
            word.pop();
            if !ok {
                return false;
            }
        }
        true
    }
}

/// Well-formed words of at most `max_len` symbols accepted by `merged` and
/// not by `original`, shortest first.
pub fn diff_strings(merged: &SpecAutomaton, original: &SpecAutomaton, max_len: usize) -> Vec<Vec<Sym>> {
    let wf = WfChecker::new(&merged.alphabet);
    let mut e = DiffEnumerator::new(merged, original, &wf);
    (1..=max_len).flat_map(|l| e.layer(l, usize::MAX).0).collect()
}
