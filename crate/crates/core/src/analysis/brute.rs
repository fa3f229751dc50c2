//! Reference solvers that decide derivability straight from the original
//! (unbinarized) grammar:
//!
//! ```text
//! Transfer    -> eps | Transfer Assign | Transfer Store[f] Alias Load[f]
//! TransferBar -> eps | AssignBar TransferBar | LoadBar[f] Alias StoreBar[f] TransferBar
//! Alias       -> TransferBar NewBar New Transfer
//! FlowsTo     -> New Transfer
//! ```
//!
//! They only consider walks up to a fixed length, so they agree with the
//! worklist solver on edges whose shortest witness fits in the bound.

use std::collections::{BTreeSet, HashMap};

use super::closure::{ClosureResult, NtEdge, Nonterminal};
use super::graph::{BaseLabel, EdgeLabel, PTGraph, Vertex};

struct Dense {
    n: usize,
    verts: Vec<Vertex>,
    /// Outgoing terminal edges per vertex.
    adj: Vec<Vec<(EdgeLabel, usize)>>,
}

impl Dense {
    fn new(g: &PTGraph) -> Self {
        let verts: Vec<Vertex> = g.vertices.iter().cloned().collect();
        let idx: HashMap<&Vertex, usize> = verts.iter().enumerate().map(|(i, v)| (v, i)).collect();
        let mut adj = vec![Vec::new(); verts.len()];
        for (a, l, b) in &g.edges {
            adj[idx[a]].push((l.clone(), idx[b]));
        }
        Dense { n: verts.len(), verts, adj }
    }
}

/// `layers[l][u * n + v]`: derivable by a walk of exactly `l` terminals.
struct Layers {
    t: Vec<Vec<bool>>,
    tb: Vec<Vec<bool>>,
    al: Vec<Vec<bool>>,
    ft: Vec<Vec<bool>>,
}

fn is(l: &EdgeLabel, base: &BaseLabel, bar: bool) -> bool {
    l.bar == bar && &l.base == base
}

/// Graph-CYK over walk lengths: computes, for every length up to
/// `max_len`, which vertex pairs are joined by a walk of exactly that length
/// whose label derives each nonterminal.
pub fn brute_force_closure(g: &PTGraph, max_len: usize) -> ClosureResult {
    let d = Dense::new(g);
    let n = d.n;
    let mut ly = Layers { t: vec![], tb: vec![], al: vec![], ft: vec![] };
    for l in 0..=max_len {
        let mut t = vec![false; n * n];
        let mut tb = vec![false; n * n];
        let mut al = vec![false; n * n];
        let mut ft = vec![false; n * n];
        if l == 0 {
            for v in 0..n {
                t[v * n + v] = true;
                tb[v * n + v] = true;
            }
        }
        // Transfer -> Transfer Assign: the Assign edge ends the walk.
        if l >= 1 {
            for u in 0..n {
                for a in 0..n {
                    if !ly.t[l - 1][u * n + a] {
                        continue;
                    }
                    for (lab, v) in &d.adj[a] {
                        if is(lab, &BaseLabel::Assign, false) {
                            t[u * n + v] = true;
                        }
                    }
                }
            }
            // TransferBar -> AssignBar TransferBar
            for u in 0..n {
                for (lab, a) in &d.adj[u] {
                    if !is(lab, &BaseLabel::Assign, true) {
                        continue;
                    }
                    for v in 0..n {
                        if ly.tb[l - 1][a * n + v] {
                            tb[u * n + v] = true;
                        }
                    }
                }
            }
            // FlowsTo -> New Transfer
            for u in 0..n {
                for (lab, a) in &d.adj[u] {
                    if !is(lab, &BaseLabel::New, false) {
                        continue;
                    }
                    for v in 0..n {
                        if ly.t[l - 1][a * n + v] {
                            ft[u * n + v] = true;
                        }
                    }
                }
            }
        }
        if l >= 2 {
            // Transfer -> Transfer Store[f] Alias Load[f], with
            // |Transfer| = l1 and |Alias| = l - 2 - l1.
            for l1 in 0..=l - 2 {
                let l2 = l - 2 - l1;
                for u in 0..n {
                    for a in 0..n {
                        if !ly.t[l1][u * n + a] {
                            continue;
                        }
                        for (s, b) in &d.adj[a] {
                            let BaseLabel::Store(f) = &s.base else { continue };
                            if s.bar {
                                continue;
                            }
                            for c in 0..n {
                                if !ly.al[l2][b * n + c] {
                                    continue;
                                }
                                for (ld, v) in &d.adj[c] {
                                    if !ld.bar && ld.base == BaseLabel::Load(f.clone()) {
                                        t[u * n + v] = true;
                                    }
                                }
                            }
                        }
                    }
                }
                // TransferBar -> LoadBar[f] Alias StoreBar[f] TransferBar, with
                // |Alias| = l1 and |TransferBar| = l - 2 - l1.
                for u in 0..n {
                    for (ld, a) in &d.adj[u] {
                        let BaseLabel::Load(f) = &ld.base else { continue };
                        if !ld.bar {
                            continue;
                        }
                        for b in 0..n {
                            if !ly.al[l1][a * n + b] {
                                continue;
                            }
                            for (s, c) in &d.adj[b] {
                                if !(s.bar && s.base == BaseLabel::Store(f.clone())) {
                                    continue;
                                }
                                for v in 0..n {
                                    if ly.tb[l2][c * n + v] {
                                        tb[u * n + v] = true;
                                    }
                                }
                            }
                        }
                    }
                }
                // Alias -> TransferBar NewBar New Transfer
                for u in 0..n {
                    for a in 0..n {
                        if !ly.tb[l1][u * n + a] {
                            continue;
                        }
                        for (nb, o) in &d.adj[a] {
                            if !is(nb, &BaseLabel::New, true) {
                                continue;
                            }
                            for (nw, b) in &d.adj[*o] {
                                if !is(nw, &BaseLabel::New, false) {
                                    continue;
                                }
                                for v in 0..n {
                                    if ly.t[l2][b * n + v] {
                                        al[u * n + v] = true;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        ly.t.push(t);
        ly.tb.push(tb);
        ly.al.push(al);
        ly.ft.push(ft);
    }
    let mut edges = BTreeSet::new();
    for (layer, nt) in [
        (&ly.t, Nonterminal::Transfer),
        (&ly.tb, Nonterminal::TransferBar),
        (&ly.al, Nonterminal::Alias),
        (&ly.ft, Nonterminal::FlowsTo),
    ] {
        for m in layer {
            for u in 0..n {
                for v in 0..n {
                    if m[u * n + v] {
                        edges.insert((d.verts[u].clone(), nt, d.verts[v].clone()));
                    }
                }
            }
        }
    }
    ClosureResult::from_edges(edges)
}

/// Literal definition: enumerate every walk of at most `max_len` edges and
/// parse its label string. Exponential; only for tiny graphs.
pub fn brute_force_by_paths(g: &PTGraph, max_len: usize) -> BTreeSet<NtEdge> {
    let d = Dense::new(g);
    let mut out = BTreeSet::new();
    let mut labels: Vec<EdgeLabel> = Vec::new();
    for start in 0..d.n {
        out.insert((d.verts[start].clone(), Nonterminal::Transfer, d.verts[start].clone()));
        out.insert((d.verts[start].clone(), Nonterminal::TransferBar, d.verts[start].clone()));
        walk(&d, start, start, max_len, &mut labels, &mut out);
    }
    out
}

fn walk(
    d: &Dense,
    start: usize,
    at: usize,
    budget: usize,
    labels: &mut Vec<EdgeLabel>,
    out: &mut BTreeSet<NtEdge>,
) {
    if budget == 0 {
        return;
    }
    for (l, next) in &d.adj[at] {
        labels.push(l.clone());
        let mut p = Parse { w: labels, memo: HashMap::new() };
        let len = labels.len();
        for nt in [Nonterminal::Transfer, Nonterminal::TransferBar, Nonterminal::Alias, Nonterminal::FlowsTo] {
            if p.derives(nt, 0, len) {
                out.insert((d.verts[start].clone(), nt, d.verts[*next].clone()));
            }
        }
        walk(d, start, *next, budget - 1, labels, out);
        labels.pop();
    }
}

struct Parse<'a> {
    w: &'a [EdgeLabel],
    memo: HashMap<(Nonterminal, usize, usize), bool>,
}

impl Parse<'_> {
    /// Does `w[i..j]` derive `nt`?
    fn derives(&mut self, nt: Nonterminal, i: usize, j: usize) -> bool {
        if let Some(&r) = self.memo.get(&(nt, i, j)) {
            return r;
        }
        let w = self.w;
        let r = match nt {
            Nonterminal::Transfer => {
                i == j
                    || (is(&w[j - 1], &BaseLabel::Assign, false) && self.derives(nt, i, j - 1))
                    || match &w[j - 1].base {
                        BaseLabel::Load(f) if !w[j - 1].bar && j >= i + 2 => (i..=j - 2).any(|k| {
                            !w[k].bar
                                && w[k].base == BaseLabel::Store(f.clone())
                                && self.derives(Nonterminal::Transfer, i, k)
                                && self.derives(Nonterminal::Alias, k + 1, j - 1)
                        }),
                        _ => false,
                    }
            }
            Nonterminal::TransferBar => {
                i == j
                    || (is(&w[i], &BaseLabel::Assign, true) && self.derives(nt, i + 1, j))
                    || match &w[i].base {
                        BaseLabel::Load(f) if w[i].bar && j >= i + 2 => (i + 1..j).any(|k| {
                            w[k].bar
                                && w[k].base == BaseLabel::Store(f.clone())
                                && self.derives(Nonterminal::Alias, i + 1, k)
                                && self.derives(Nonterminal::TransferBar, k + 1, j)
                        }),
                        _ => false,
                    }
            }
            Nonterminal::Alias => (i..j.saturating_sub(1)).any(|k| {
                is(&w[k], &BaseLabel::New, true)
                    && is(&w[k + 1], &BaseLabel::New, false)
                    && self.derives(Nonterminal::TransferBar, i, k)
                    && self.derives(Nonterminal::Transfer, k + 2, j)
            }),
            Nonterminal::FlowsTo => {
                j > i && is(&w[i], &BaseLabel::New, false) && self.derives(Nonterminal::Transfer, i + 1, j)
            }
        };
        self.memo.insert((nt, i, j), r);
        r
    }
}
