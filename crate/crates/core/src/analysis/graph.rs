use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ir::{AllocSiteId, FieldId, FunctionDef, Program, Stmt, Ty, VarId};

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub enum Vertex {
    Var(VarId),
    Site(AllocSiteId),
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Vertex::Var(v) => write!(f, "{v}"),
            Vertex::Site(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub enum BaseLabel {
    Assign,
    New,
    Store(FieldId),
    Load(FieldId),
}

/// A terminal label of the points-to grammar; `bar` marks the reversed copy.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct EdgeLabel {
    pub base: BaseLabel,
    pub bar: bool,
}

impl EdgeLabel {
    pub fn fwd(base: BaseLabel) -> Self {
        EdgeLabel { base, bar: false }
    }

    pub fn reversed(&self) -> Self {
        EdgeLabel { base: self.base.clone(), bar: !self.bar }
    }
}

impl fmt::Display for EdgeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bar = if self.bar { "Bar" } else { "" };
        match &self.base {
            BaseLabel::Assign => write!(f, "Assign{bar}"),
            BaseLabel::New => write!(f, "New{bar}"),
            BaseLabel::Store(x) => write!(f, "Store{bar}[{x}]"),
            BaseLabel::Load(x) => write!(f, "Load{bar}[{x}]"),
        }
    }
}

pub type Edge = (Vertex, EdgeLabel, Vertex);

/// Labelled graph over variables and allocation sites. Every forward edge
/// has its reversed twin.
#[derive(Clone, PartialEq, Debug, Default, Serialize, Deserialize)]
pub struct PTGraph {
    pub vertices: BTreeSet<Vertex>,
    pub edges: BTreeSet<Edge>,
}

impl PTGraph {
    /// Adds a forward edge and its reversed twin.
    pub fn add(&mut self, from: Vertex, base: BaseLabel, to: Vertex) {
        let l = EdgeLabel::fwd(base);
        self.vertices.insert(from.clone());
        self.vertices.insert(to.clone());
        self.edges.insert((to.clone(), l.reversed(), from.clone()));
        self.edges.insert((from, l, to));
    }

    pub fn forward_edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(|e| !e.1.bar)
    }

    pub fn union(&mut self, other: &PTGraph) {
        self.vertices.extend(other.vertices.iter().cloned());
        self.edges.extend(other.edges.iter().cloned());
    }
}

fn is_ref_slot(f: &FunctionDef, name: &str) -> bool {
    !matches!(f.declared_type(name), Some(Ty::Prim(_)))
}

/// Builds the points-to graph of a program. Library bodies are skipped when
/// `include_library_bodies` is false, leaving only the client's edges into
/// and out of library parameters and returns.
pub fn extract_graph(p: &Program, include_library_bodies: bool) -> PTGraph {
    let mut g = PTGraph::default();
    for f in &p.functions {
        if f.is_library && !include_library_bodies {
            continue;
        }
        let v = |n: &str| Vertex::Var(f.var(n));
        for s in &f.body {
            match s {
                Stmt::Assign { dst, src } => g.add(v(src), BaseLabel::Assign, v(dst)),
                Stmt::Alloc { dst, site, .. } => {
                    g.add(Vertex::Site(site.clone()), BaseLabel::New, v(dst))
                }
                Stmt::Store { base, field, src } => {
                    g.add(v(src), BaseLabel::Store(field.clone()), v(base))
                }
                Stmt::Load { dst, base, field } => {
                    g.add(v(base), BaseLabel::Load(field.clone()), v(dst))
                }
                Stmt::Call { dst, func, args } => {
                    let Some(callee) = p.function(func) else { continue };
                    for (a, prm) in args.iter().zip(&callee.params) {
                        if prm.ty.is_ref() {
                            g.add(v(a), BaseLabel::Assign, Vertex::Var(callee.var(&prm.name)));
                        }
                    }
                    if let (Some(d), Some(r)) = (dst, &callee.ret) {
                        if r.ty.is_ref() {
                            g.add(Vertex::Var(callee.var(&r.name)), BaseLabel::Assign, v(d));
                        }
                    }
                }
                Stmt::Return { src } => {
                    if let Some(r) = &f.ret {
                        if r.name != *src && r.ty.is_ref() && is_ref_slot(f, src) {
                            g.add(v(src), BaseLabel::Assign, v(&r.name));
                        }
                    }
                }
                Stmt::PrimInit { .. } | Stmt::ReturnSame { .. } => {}
            }
        }
    }
    g
}
