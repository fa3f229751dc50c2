//! Worklist CFL-reachability over the points-to grammar.
//!
//! The grammar is binarized with intermediate symbols so each production
//! joins exactly two edges:
//!
//! ```text
//! Transfer    -> Transfer Assign | Transfer Y | Transfer Transfer
//! SA[f]       -> Store[f] Alias            Y    -> SA[f] Load[f]
//! TransferBar -> AssignBar TransferBar | YBar TransferBar | TransferBar TransferBar
//! LA[f]       -> LoadBar[f] Alias          YBar -> LA[f] StoreBar[f]
//! A1 -> TransferBar NewBar   A2 -> A1 New   Alias -> A2 Transfer
//! A3 -> TransferBar Alias    Alias -> A3 Transfer
//! FlowsTo -> New Transfer
//! ```
//!
//! plus `Transfer -> eps` and `TransferBar -> eps` on every vertex. The
//! `Transfer Transfer`, `TransferBar TransferBar` and `TransferBar Alias
//! Transfer` productions add nothing for plain programs (both sides are
//! already closed under them) but let edges introduced by specification
//! rules compose with program edges.

use std::collections::{BinaryHeap, HashMap, HashSet, VecDeque};
use std::cmp::Reverse;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::graph::{BaseLabel, PTGraph, Vertex};
use crate::ir::{AllocSiteId, FieldId, VarId};

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub enum Nonterminal {
    Transfer,
    TransferBar,
    Alias,
    FlowsTo,
}

impl Nonterminal {
    /// The nonterminal of the reversed edge, when the grammar defines one.
    pub fn reversed(self) -> Option<Nonterminal> {
        match self {
            Nonterminal::Transfer => Some(Nonterminal::TransferBar),
            Nonterminal::TransferBar => Some(Nonterminal::Transfer),
            Nonterminal::Alias => Some(Nonterminal::Alias),
            Nonterminal::FlowsTo => None,
        }
    }

    fn kind(self) -> K {
        match self {
            Nonterminal::Transfer => K::Transfer,
            Nonterminal::TransferBar => K::TransferBar,
            Nonterminal::Alias => K::Alias,
            Nonterminal::FlowsTo => K::FlowsTo,
        }
    }
}

impl fmt::Display for Nonterminal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

pub type NtEdge = (Vertex, Nonterminal, Vertex);

/// A specification rule over concrete vertices: once every premise edge is
/// derived, the conclusion (and its reversed twin) is added.
#[derive(Clone, PartialEq, Debug)]
pub struct ResolvedRule {
    pub premise: Vec<NtEdge>,
    pub conclusion: NtEdge,
}

#[derive(Clone, PartialEq, Debug, Default)]
pub struct SpecRuleSet {
    pub rules: Vec<ResolvedRule>,
}

impl SpecRuleSet {
    pub fn empty() -> Self {
        SpecRuleSet::default()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
#[repr(u8)]
enum K {
    Assign,
    AssignBar,
    New,
    NewBar,
    Store,
    StoreBar,
    Load,
    LoadBar,
    Transfer,
    TransferBar,
    Alias,
    FlowsTo,
    SA,
    Y,
    LA,
    YBar,
    A1,
    A2,
    A3,
}

const NK: usize = 19;
const ALL_K: [K; NK] = [
    K::Assign,
    K::AssignBar,
    K::New,
    K::NewBar,
    K::Store,
    K::StoreBar,
    K::Load,
    K::LoadBar,
    K::Transfer,
    K::TransferBar,
    K::Alias,
    K::FlowsTo,
    K::SA,
    K::Y,
    K::LA,
    K::YBar,
    K::A1,
    K::A2,
    K::A3,
];

impl K {
    fn public(self) -> Option<Nonterminal> {
        match self {
            K::Transfer => Some(Nonterminal::Transfer),
            K::TransferBar => Some(Nonterminal::TransferBar),
            K::Alias => Some(Nonterminal::Alias),
            K::FlowsTo => Some(Nonterminal::FlowsTo),
            _ => None,
        }
    }
}

#[derive(Clone, Copy)]
enum Mode {
    Plain,
    /// Result carries the field of the left edge.
    TakeLeft,
    /// Both edges carry a field and they must agree; result carries none.
    Match,
}

#[derive(Clone, Copy)]
struct Prod {
    lhs: K,
    left: K,
    right: K,
    mode: Mode,
}

const fn p(lhs: K, left: K, right: K, mode: Mode) -> Prod {
    Prod { lhs, left, right, mode }
}

const PRODS: [Prod; 16] = [
    p(K::Transfer, K::Transfer, K::Assign, Mode::Plain),
    p(K::Transfer, K::Transfer, K::Y, Mode::Plain),
    p(K::Transfer, K::Transfer, K::Transfer, Mode::Plain),
    p(K::SA, K::Store, K::Alias, Mode::TakeLeft),
    p(K::Y, K::SA, K::Load, Mode::Match),
    p(K::TransferBar, K::AssignBar, K::TransferBar, Mode::Plain),
    p(K::TransferBar, K::YBar, K::TransferBar, Mode::Plain),
    p(K::TransferBar, K::TransferBar, K::TransferBar, Mode::Plain),
    p(K::LA, K::LoadBar, K::Alias, Mode::TakeLeft),
    p(K::YBar, K::LA, K::StoreBar, Mode::Match),
    p(K::A1, K::TransferBar, K::NewBar, Mode::Plain),
    p(K::A2, K::A1, K::New, Mode::Plain),
    p(K::Alias, K::A2, K::Transfer, Mode::Plain),
    p(K::A3, K::TransferBar, K::Alias, Mode::Plain),
    p(K::Alias, K::A3, K::Transfer, Mode::Plain),
    p(K::FlowsTo, K::New, K::Transfer, Mode::Plain),
];

const NF: u32 = 0x7fff;

fn pack(u: u32, k: K, f: u32, v: u32) -> u64 {
    ((u as u64) << 42) | ((v as u64) << 20) | ((k as u64) << 15) | f as u64
}

fn unpack(key: u64) -> (u32, K, u32, u32) {
    let u = (key >> 42) as u32;
    let v = ((key >> 20) & 0x3f_ffff) as u32;
    let k = ALL_K[((key >> 15) & 0x1f) as usize];
    let f = (key & 0x7fff) as u32;
    (u, k, f, v)
}

/// Why an edge is in the closure.
#[derive(Clone, Debug, PartialEq)]
pub enum Derivation {
    Terminal,
    Epsilon,
    Production { rule: usize, left: u64, right: u64 },
    SpecRule(usize),
}

/// Interned graph shared by the FIFO and min-length solvers.
struct Interned {
    vertices: Vec<Vertex>,
    index: HashMap<Vertex, u32>,
    fields: Vec<FieldId>,
    field_index: HashMap<FieldId, u32>,
    terminals: Vec<(u32, K, u32, u32)>,
}

impl Interned {
    fn new(g: &PTGraph) -> Self {
        let mut s = Interned {
            vertices: vec![],
            index: HashMap::new(),
            fields: vec![],
            field_index: HashMap::new(),
            terminals: vec![],
        };
        for v in &g.vertices {
            s.vertex(v);
        }
        for (a, l, b) in &g.edges {
            let (k, f) = match (&l.base, l.bar) {
                (BaseLabel::Assign, false) => (K::Assign, NF),
                (BaseLabel::Assign, true) => (K::AssignBar, NF),
                (BaseLabel::New, false) => (K::New, NF),
                (BaseLabel::New, true) => (K::NewBar, NF),
                (BaseLabel::Store(x), false) => (K::Store, s.field(x)),
                (BaseLabel::Store(x), true) => (K::StoreBar, s.field(x)),
                (BaseLabel::Load(x), false) => (K::Load, s.field(x)),
                (BaseLabel::Load(x), true) => (K::LoadBar, s.field(x)),
            };
            let (ia, ib) = (s.vertex(a), s.vertex(b));
            s.terminals.push((ia, k, f, ib));
        }
        s
    }

    fn vertex(&mut self, v: &Vertex) -> u32 {
        if let Some(&i) = self.index.get(v) {
            return i;
        }
        let i = self.vertices.len() as u32;
        assert!(i < 0x3f_ffff, "too many vertices");
        self.vertices.push(v.clone());
        self.index.insert(v.clone(), i);
        i
    }

    fn field(&mut self, f: &FieldId) -> u32 {
        if let Some(&i) = self.field_index.get(f) {
            return i;
        }
        let i = self.fields.len() as u32;
        assert!(i < NF, "too many fields");
        self.fields.push(f.clone());
        self.field_index.insert(f.clone(), i);
        i
    }
}

struct Engine {
    n: usize,
    set: HashSet<u64>,
    out: Vec<Vec<(u32, u32)>>,
    inn: Vec<Vec<(u32, u32)>>,
    work: VecDeque<u64>,
    why: Option<HashMap<u64, Derivation>>,
}

impl Engine {
    fn slot(&self, v: u32, k: K) -> usize {
        v as usize * NK + k as usize
    }

    fn add(&mut self, u: u32, k: K, f: u32, v: u32, why: impl FnOnce() -> Derivation) {
        let key = pack(u, k, f, v);
        if self.set.insert(key) {
            let (so, si) = (self.slot(u, k), self.slot(v, k));
            self.out[so].push((f, v));
            self.inn[si].push((f, u));
            self.work.push_back(key);
            if let Some(w) = self.why.as_mut() {
                w.insert(key, why());
            }
        }
    }

    fn contains(&self, u: u32, k: K, v: u32) -> bool {
        self.set.contains(&pack(u, k, NF, v))
    }
}

fn combine(mode: Mode, f1: u32, f2: u32) -> Option<u32> {
    match mode {
        Mode::Plain => Some(NF),
        Mode::TakeLeft => Some(f1),
        Mode::Match => (f1 == f2).then_some(NF),
    }
}

/// Result of a closure computation: the derived nonterminal edges.
#[derive(Clone, Debug)]
pub struct ClosureResult {
    vertices: Vec<Vertex>,
    index: HashMap<Vertex, u32>,
    edges: HashSet<(u32, Nonterminal, u32)>,
    why: Option<HashMap<u64, Derivation>>,
    fields: Vec<FieldId>,
}

impl ClosureResult {
    /// Builds a result from an explicit edge set (used by reference solvers).
    pub fn from_edges(edges: impl IntoIterator<Item = NtEdge>) -> Self {
        let mut r = ClosureResult {
            vertices: vec![],
            index: HashMap::new(),
            edges: HashSet::new(),
            why: None,
            fields: vec![],
        };
        for (a, nt, b) in edges {
            let ia = r.intern(a);
            let ib = r.intern(b);
            r.edges.insert((ia, nt, ib));
        }
        r
    }

    fn intern(&mut self, v: Vertex) -> u32 {
        if let Some(&i) = self.index.get(&v) {
            return i;
        }
        let i = self.vertices.len() as u32;
        self.vertices.push(v.clone());
        self.index.insert(v, i);
        i
    }

    pub fn contains(&self, a: &Vertex, nt: Nonterminal, b: &Vertex) -> bool {
        match (self.index.get(a), self.index.get(b)) {
            (Some(&x), Some(&y)) => self.edges.contains(&(x, nt, y)),
            _ => false,
        }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// All derived edges in sorted order.
    pub fn edges(&self) -> Vec<NtEdge> {
        let mut v: Vec<NtEdge> = self
            .edges
            .iter()
            .map(|&(a, nt, b)| (self.vertices[a as usize].clone(), nt, self.vertices[b as usize].clone()))
            .collect();
        v.sort();
        v
    }

    pub fn edge_set(&self) -> std::collections::BTreeSet<NtEdge> {
        self.edges().into_iter().collect()
    }

    /// Sorted textual dump, one edge per line.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for (a, nt, b) in self.edges() {
            s.push_str(&format!("{a} {nt} {b}\n"));
        }
        s
    }

    /// Derivation tree of an edge, if provenance was recorded.
    pub fn explain(&self, a: &Vertex, nt: Nonterminal, b: &Vertex) -> Option<Vec<String>> {
        let why = self.why.as_ref()?;
        let key = pack(*self.index.get(a)?, nt.kind(), NF, *self.index.get(b)?);
        let mut lines = Vec::new();
        self.explain_rec(why, key, 0, &mut lines, &mut HashSet::new());
        Some(lines)
    }

    fn explain_rec(
        &self,
        why: &HashMap<u64, Derivation>,
        key: u64,
        depth: usize,
        lines: &mut Vec<String>,
        seen: &mut HashSet<u64>,
    ) {
        let (u, k, f, v) = unpack(key);
        let field = if f == NF { String::new() } else { format!("[{}]", self.fields[f as usize]) };
        let label = format!(
            "{}{} {:?}{} {}",
            "  ".repeat(depth),
            self.vertices[u as usize],
            k,
            field,
            self.vertices[v as usize]
        );
        if !seen.insert(key) {
            lines.push(format!("{label} (see above)"));
            return;
        }
        match why.get(&key) {
            Some(Derivation::Production { left, right, .. }) => {
                lines.push(label);
                self.explain_rec(why, *left, depth + 1, lines, seen);
                self.explain_rec(why, *right, depth + 1, lines, seen);
            }
            Some(Derivation::SpecRule(i)) => lines.push(format!("{label} by specification rule {i}")),
            Some(Derivation::Epsilon) => lines.push(format!("{label} (empty path)")),
            _ => lines.push(label),
        }
    }
}

/// Points-to pairs read off FlowsTo edges: variable ↪ allocation site.
pub fn points_to(c: &ClosureResult) -> std::collections::BTreeSet<(VarId, AllocSiteId)> {
    let mut out = std::collections::BTreeSet::new();
    for &(a, nt, b) in &c.edges {
        if nt != Nonterminal::FlowsTo {
            continue;
        }
        if let (Vertex::Site(o), Vertex::Var(x)) = (&c.vertices[a as usize], &c.vertices[b as usize]) {
            out.insert((x.clone(), o.clone()));
        }
    }
    out
}

pub fn closure(g: &PTGraph, specs: &SpecRuleSet) -> ClosureResult {
    run_closure(g, specs, false)
}

/// Like [`closure`], but records a derivation for every edge.
pub fn closure_with_provenance(g: &PTGraph, specs: &SpecRuleSet) -> ClosureResult {
    run_closure(g, specs, true)
}

fn run_closure(g: &PTGraph, specs: &SpecRuleSet, provenance: bool) -> ClosureResult {
    let mut it = Interned::new(g);
    let rules: Vec<(Vec<(u32, K, u32)>, (u32, K, u32))> = specs
        .rules
        .iter()
        .map(|r| {
            let prem = r
                .premise
                .iter()
                .map(|(a, nt, b)| (it.vertex(a), nt.kind(), it.vertex(b)))
                .collect();
            let (a, nt, b) = &r.conclusion;
            (prem, (it.vertex(a), nt.kind(), it.vertex(b)))
        })
        .collect();
    let n = it.vertices.len();
    let mut e = Engine {
        n,
        set: HashSet::new(),
        out: vec![Vec::new(); n * NK],
        inn: vec![Vec::new(); n * NK],
        work: VecDeque::new(),
        why: provenance.then(HashMap::new),
    };
    let mut watch: HashMap<u64, Vec<usize>> = HashMap::new();
    for (i, (prem, _)) in rules.iter().enumerate() {
        for &(a, k, b) in prem {
            watch.entry(pack(a, k, NF, b)).or_default().push(i);
        }
    }
    let mut fired = vec![false; rules.len()];

    for v in 0..e.n as u32 {
        e.add(v, K::Transfer, NF, v, || Derivation::Epsilon);
        e.add(v, K::TransferBar, NF, v, || Derivation::Epsilon);
    }
    for &(a, k, f, b) in &it.terminals {
        e.add(a, k, f, b, || Derivation::Terminal);
    }
    let fire = |e: &mut Engine, i: usize, fired: &mut Vec<bool>| {
        fired[i] = true;
        let (a, k, b) = rules[i].1;
        e.add(a, k, NF, b, || Derivation::SpecRule(i));
        let rev = match k {
            K::Transfer => K::TransferBar,
            K::TransferBar => K::Transfer,
            other => other,
        };
        if k != K::FlowsTo {
            e.add(b, rev, NF, a, || Derivation::SpecRule(i));
        }
    };
    for i in 0..rules.len() {
        if rules[i].0.is_empty() {
            fire(&mut e, i, &mut fired);
        }
    }

    while let Some(key) = e.work.pop_front() {
        let (u, k, f, v) = unpack(key);
        for (pi, pr) in PRODS.iter().enumerate() {
            if pr.left == k {
                let s = e.slot(v, pr.right);
                let mut j = 0;
                while j < e.out[s].len() {
                    let (f2, w) = e.out[s][j];
                    j += 1;
                    if let Some(fr) = combine(pr.mode, f, f2) {
                        let right = pack(v, pr.right, f2, w);
                        e.add(u, pr.lhs, fr, w, || Derivation::Production { rule: pi, left: key, right });
                    }
                }
            }
            if pr.right == k {
                let s = e.slot(u, pr.left);
                let mut j = 0;
                while j < e.inn[s].len() {
                    let (f1, w) = e.inn[s][j];
                    j += 1;
                    if let Some(fr) = combine(pr.mode, f1, f) {
                        let left = pack(w, pr.left, f1, u);
                        e.add(w, pr.lhs, fr, v, || Derivation::Production { rule: pi, left, right: key });
                    }
                }
            }
        }
        if let Some(list) = watch.get(&key) {
            for &i in list {
                if !fired[i] && rules[i].0.iter().all(|&(a, k, b)| e.contains(a, k, b)) {
                    fire(&mut e, i, &mut fired);
                }
            }
        }
    }

    let edges = e
        .set
        .iter()
        .filter_map(|&key| {
            let (u, k, _, v) = unpack(key);
            k.public().map(|nt| (u, nt, v))
        })
        .collect();
    ClosureResult { vertices: it.vertices, index: it.index, edges, why: e.why, fields: it.fields }
}

/// Shortest witness length of every derivable edge (Knuth's generalisation
/// of Dijkstra to grammars). Terminals count 1, empty paths 0.
pub fn min_witness_lengths(g: &PTGraph) -> HashMap<NtEdge, usize> {
    let it = Interned::new(g);
    let n = it.vertices.len();
    let mut best: HashMap<u64, usize> = HashMap::new();
    let mut done: HashSet<u64> = HashSet::new();
    let mut out: Vec<Vec<(u32, u32, usize)>> = vec![Vec::new(); n * NK];
    let mut inn: Vec<Vec<(u32, u32, usize)>> = vec![Vec::new(); n * NK];
    let mut heap = BinaryHeap::new();
    let offer = |heap: &mut BinaryHeap<Reverse<(usize, u64)>>, best: &mut HashMap<u64, usize>, key, d| {
        let cur = best.entry(key).or_insert(usize::MAX);
        if d < *cur {
            *cur = d;
            heap.push(Reverse((d, key)));
        }
    };
    for v in 0..n as u32 {
        offer(&mut heap, &mut best, pack(v, K::Transfer, NF, v), 0);
        offer(&mut heap, &mut best, pack(v, K::TransferBar, NF, v), 0);
    }
    for &(a, k, f, b) in &it.terminals {
        offer(&mut heap, &mut best, pack(a, k, f, b), 1);
    }
    while let Some(Reverse((d, key))) = heap.pop() {
        if !done.insert(key) {
            continue;
        }
        let (u, k, f, v) = unpack(key);
        out[u as usize * NK + k as usize].push((f, v, d));
        inn[v as usize * NK + k as usize].push((f, u, d));
        for pr in PRODS.iter() {
            if pr.left == k {
                for &(f2, w, d2) in &out[v as usize * NK + pr.right as usize] {
                    if let Some(fr) = combine(pr.mode, f, f2) {
                        offer(&mut heap, &mut best, pack(u, pr.lhs, fr, w), d + d2);
                    }
                }
            }
            if pr.right == k {
                for &(f1, w, d1) in &inn[u as usize * NK + pr.left as usize] {
                    if let Some(fr) = combine(pr.mode, f1, f) {
                        offer(&mut heap, &mut best, pack(w, pr.lhs, fr, v), d1 + d);
                    }
                }
            }
        }
    }
    let mut res = HashMap::new();
    for key in done {
        let (u, k, _, v) = unpack(key);
        if let Some(nt) = k.public() {
            res.insert((it.vertices[u as usize].clone(), nt, it.vertices[v as usize].clone()), best[&key]);
        }
    }
    res
}
