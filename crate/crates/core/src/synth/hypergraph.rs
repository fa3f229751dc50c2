//! Constructor hypergraph: vertices are types, and each constructor is a
//! hyperedge from the constructed type to the ordered list of its argument
//! types. A hyperpath rooted at a type is a tree of constructor calls that
//! builds a value of that type.

use std::collections::BTreeMap;

use crate::ir::{FuncId, PrimType, Program, Ty, TypeId, OBJECT};

#[derive(Clone, PartialEq, Debug)]
pub struct CtorEdge {
    pub head: Ty,
    /// `None` for the implicit empty constructor of types that declare
    /// none, and for primitive defaults.
    pub ctor: Option<FuncId>,
    /// Argument types, excluding the receiver.
    pub body: Vec<Ty>,
}

#[derive(Clone, Debug)]
pub struct ConstructorHypergraph {
    pub vertices: Vec<Ty>,
    pub edges: Vec<CtorEdge>,
}

/// A constructor-call tree: the edge used at the root and one subtree per
/// argument.
#[derive(Clone, PartialEq, Debug)]
pub struct CtorTree {
    pub edge: CtorEdge,
    pub args: Vec<CtorTree>,
}

impl CtorTree {
    pub fn size(&self) -> usize {
        1 + self.args.iter().map(CtorTree::size).sum::<usize>()
    }
}

impl ConstructorHypergraph {
    pub fn build(lib: &Program) -> Self {
        let mut vertices = Vec::new();
        let mut edges = Vec::new();
        for p in [PrimType::Int, PrimType::Bool, PrimType::Char] {
            vertices.push(Ty::Prim(p));
            edges.push(CtorEdge { head: Ty::Prim(p), ctor: None, body: vec![] });
        }
        vertices.push(Ty::object());
        edges.push(CtorEdge { head: Ty::object(), ctor: None, body: vec![] });
        for t in &lib.types {
            if t.id.as_str() == OBJECT {
                continue;
            }
            let head = Ty::Ref(t.id.clone());
            vertices.push(head.clone());
            if t.ctors.is_empty() {
                edges.push(CtorEdge { head, ctor: None, body: vec![] });
                continue;
            }
            for c in &t.ctors {
                let f = lib.function(c).expect("declared constructor exists");
                let body = f.params.iter().skip(1).map(|p| p.ty.clone()).collect();
                edges.push(CtorEdge { head: head.clone(), ctor: Some(c.clone()), body });
            }
        }
        ConstructorHypergraph { vertices, edges }
    }

    /// Minimum hyperpath weight of every reachable vertex, with unit edge
    /// weights. Unreachable vertices are absent.
    pub fn costs(&self) -> BTreeMap<Ty, usize> {
        let mut cost: BTreeMap<Ty, usize> = BTreeMap::new();
        // Each pass can only lower costs, and costs are bounded below, so
        // this terminates after at most |edges| + 1 passes.
        loop {
            let mut changed = false;
            for e in &self.edges {
                let Some(c) = self.edge_cost(e, &cost) else { continue };
                if cost.get(&e.head).is_none_or(|&old| c < old) {
                    cost.insert(e.head.clone(), c);
                    changed = true;
                }
            }
            if !changed {
                return cost;
            }
        }
    }

    fn edge_cost(&self, e: &CtorEdge, cost: &BTreeMap<Ty, usize>) -> Option<usize> {
        e.body.iter().try_fold(1usize, |acc, t| cost.get(t).map(|c| acc + c))
    }

    /// The shortest hyperpath rooted at `ty`, ties broken by constructor
    /// declaration order. `None` when `ty` is unreachable.
    pub fn shortest_tree(&self, ty: &Ty) -> Option<CtorTree> {
        let cost = self.costs();
        self.tree_with(ty, &cost)
    }

    fn tree_with(&self, ty: &Ty, cost: &BTreeMap<Ty, usize>) -> Option<CtorTree> {
        let best = *cost.get(ty)?;
        let edge = self
            .edges
            .iter()
            .find(|e| &e.head == ty && self.edge_cost(e, cost) == Some(best))
            .expect("a minimal edge exists for every reachable vertex");
        // Every argument strictly costs less than the root, so the recursion
        // terminates.
        let args = edge.body.iter().map(|t| self.tree_with(t, cost)).collect::<Option<Vec<_>>>()?;
        Some(CtorTree { edge: edge.clone(), args })
    }

    /// The constructor with the fewest arguments, ties broken by
    /// declaration order.
    pub fn fewest_args(&self, ty: &TypeId) -> Option<&CtorEdge> {
        let head = Ty::Ref(ty.clone());
        self.edges.iter().filter(|e| e.head == head).min_by_key(|e| e.body.len())
    }
}
