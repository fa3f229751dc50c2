//! Unit-test synthesis for candidate path specifications.
//!
//! A candidate `z1 w1 ... zk wk` becomes a client function that calls
//! `m1 .. mk`, wires arguments and results together so that the premise
//! edges hold, initializes whatever is left and finally compares the
//! variable bound to `z1` with the one bound to `wk`. The pipeline is
//! [`build_skeleton`], [`fill_holes`], [`init_vars`] and [`schedule`].

mod hypergraph;

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use hypergraph::{ConstructorHypergraph, CtorEdge, CtorTree};

use crate::analysis::Nonterminal;
use crate::ir::{
    lower_first, print_function, upper_first, AllocSiteId, FuncId, FunctionDef, Interface, Literal,
    Program, Stmt, Ty, TypeId, VisibleVar,
};
use crate::pathspec::{boundary_relation, to_rule, PathSpec, SpecError};

/// How variables that are not constrained by the specification are
/// initialized.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Unconstrained references are `null`; constructors get `null`
    /// reference arguments.
    Null,
    /// Unconstrained references are built with the cheapest constructor
    /// tree.
    Instantiate,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Null => "null",
            Strategy::Instantiate => "instantiate",
        })
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "null" => Ok(Strategy::Null),
            "instantiate" => Ok(Strategy::Instantiate),
            other => Err(format!("unknown strategy '{other}' (expected null or instantiate)")),
        }
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum SynthError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("function {0} is not part of the library interface")]
    UnknownFunction(FuncId),
    #[error("holes {0} must alias but have different types")]
    TypeMismatch(String),
    #[error("no test can exhibit exactly the premise: {0}")]
    Unwitnessable(String),
    #[error("the comparison would not be attributable to the conclusion: {0}")]
    Unattributable(String),
}

/// A reference slot of one call in the skeleton.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Hole {
    pub call: usize,
    pub var: VisibleVar,
}

/// One argument position of a skeleton call.
#[derive(Clone, PartialEq, Debug)]
pub enum Slot {
    /// Index into [`Skeleton::holes`].
    Hole(usize),
    /// A primitive argument, filled with a default literal.
    Prim(Ty),
}

#[derive(Clone, PartialEq, Debug)]
pub struct SkeletonCall {
    pub func: FuncId,
    pub args: Vec<Slot>,
    /// Hole for a reference return value.
    pub ret: Option<usize>,
}

#[derive(Clone, PartialEq, Debug)]
pub struct Skeleton {
    pub calls: Vec<SkeletonCall>,
    /// Holes in call order; within a call, parameters precede the return.
    pub holes: Vec<Hole>,
}

impl Skeleton {
    pub fn hole_of(&self, call: usize, var: &VisibleVar) -> usize {
        self.holes
            .iter()
            .position(|h| h.call == call && &h.var == var)
            .expect("specification variables have holes")
    }
}

/// One call per function occurrence in `s`, every reference slot a hole.
pub fn build_skeleton(iface: &Interface, s: &PathSpec) -> Result<Skeleton, SynthError> {
    if !s.is_well_formed() {
        return Err(to_rule(s).expect_err("ill-formed").into());
    }
    let mut calls = Vec::new();
    let mut holes = Vec::new();
    for i in 0..s.hops() {
        let f = &s.z(i).func;
        let sig = iface.sig(f).ok_or_else(|| SynthError::UnknownFunction(f.clone()))?;
        let mut args = Vec::new();
        for (j, p) in sig.params.iter().enumerate() {
            if p.ty.is_ref() {
                holes.push(Hole { call: i, var: VisibleVar::param(f.as_str(), j) });
                args.push(Slot::Hole(holes.len() - 1));
            } else {
                args.push(Slot::Prim(p.ty.clone()));
            }
        }
        let ret = match &sig.ret {
            Some(r) if r.ty.is_ref() => {
                holes.push(Hole { call: i, var: VisibleVar::ret(f.as_str()) });
                Some(holes.len() - 1)
            }
            _ => None,
        };
        calls.push(SkeletonCall { func: f.clone(), args, ret });
    }
    Ok(Skeleton { calls, holes })
}

/// An alias class of holes, bound to one test variable.
#[derive(Clone, PartialEq, Debug)]
pub struct Component {
    pub holes: Vec<usize>,
    pub name: String,
    pub ty: TypeId,
}

impl Component {
    fn returns<'a>(&'a self, sk: &'a Skeleton) -> impl Iterator<Item = &'a VisibleVar> + 'a {
        self.holes.iter().map(|&h| &sk.holes[h].var).filter(|v| v.is_return())
    }

    fn params<'a>(&'a self, sk: &'a Skeleton) -> impl Iterator<Item = &'a VisibleVar> + 'a {
        self.holes.iter().map(|&h| &sk.holes[h].var).filter(|v| !v.is_return())
    }

    pub fn has_return(&self, sk: &Skeleton) -> bool {
        self.returns(sk).next().is_some()
    }
}

#[derive(Clone, PartialEq, Debug)]
pub struct Filled {
    pub skeleton: Skeleton,
    /// Component index of every hole.
    pub comp_of: Vec<usize>,
    /// Components ordered by their first hole.
    pub components: Vec<Component>,
    /// Component of `z1` and of `wk`.
    pub input: usize,
    pub output: usize,
}

impl Filled {
    pub fn var_of(&self, hole: usize) -> &str {
        &self.components[self.comp_of[hole]].name
    }
}

/// Partitions the holes into must-alias classes: the two holes of every
/// boundary pair `(wi, zi+1)` are joined, and an internal self-loop
/// `p -> p` already names a single hole. Each class gets a fresh variable.
pub fn fill_holes(iface: &Interface, sk: Skeleton, s: &PathSpec) -> Result<Filled, SynthError> {
    let n = sk.holes.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while parent[r] != r {
            r = parent[r];
        }
        let mut y = x;
        while parent[y] != r {
            let next = parent[y];
            parent[y] = r;
            y = next;
        }
        r
    }
    for i in 0..s.hops().saturating_sub(1) {
        let a = sk.hole_of(i, s.w(i));
        let b = sk.hole_of(i + 1, s.z(i + 1));
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        // Keep the smaller index as the root so roots are first holes.
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut comp_of = vec![usize::MAX; n];
    let mut components: Vec<Component> = Vec::new();
    for h in 0..n {
        let r = find(&mut parent, h);
        if comp_of[r] == usize::MAX {
            let ty = iface.ref_type(&sk.holes[h].var);
            components.push(Component { holes: vec![], name: String::new(), ty });
            comp_of[r] = components.len() - 1;
        }
        comp_of[h] = comp_of[r];
        components[comp_of[h]].holes.push(h);
    }
    for c in &components {
        let bad: Vec<String> = c
            .holes
            .iter()
            .filter(|&&h| iface.ref_type(&sk.holes[h].var) != c.ty)
            .map(|&h| iface.name(&sk.holes[h].var))
            .collect();
        if !bad.is_empty() {
            let all: Vec<String> = c.holes.iter().map(|&h| iface.name(&sk.holes[h].var)).collect();
            return Err(SynthError::TypeMismatch(all.join(", ")));
        }
    }
    let k = s.hops();
    let input = comp_of[sk.hole_of(0, s.z(0))];
    let output = comp_of[sk.hole_of(k - 1, s.w(k - 1))];
    let mut used = BTreeSet::new();
    for (ci, c) in components.iter_mut().enumerate() {
        let base = if ci == output {
            "out".to_string()
        } else if ci == input && !s.z(0).is_return() {
            "in".to_string()
        } else if let Some(&h) = c.holes.iter().find(|&&h| sk.holes[h].var.is_return()) {
            format!("{}{}", lower_first(c.ty.as_str()), upper_first(sk.holes[h].var.func.short()))
        } else {
            lower_first(c.ty.as_str())
        };
        c.name = fresh(&mut used, &base);
    }
    Ok(Filled { skeleton: sk, comp_of, components, input, output })
}

const RESERVED: &[&str] = &[
    "library", "type", "field", "ctor", "fn", "entry", "return", "new", "null", "true", "false", "int",
    "bool", "char",
];

fn fresh(used: &mut BTreeSet<String>, base: &str) -> String {
    let base = if RESERVED.contains(&base) { format!("{base}0") } else { base.to_string() };
    let mut name = base.clone();
    let mut i = 2;
    while used.contains(&name) {
        name = format!("{base}{i}");
        i += 1;
    }
    used.insert(name.clone());
    name
}

/// Does the component need a fresh object of its own? Classes with a
/// return hole are defined by a call. Classes of parameters that must
/// alias, and the class compared at the end, are always allocated; other
/// parameters depend on the strategy.
fn must_allocate(f: &Filled, ci: usize) -> bool {
    let c = &f.components[ci];
    !c.has_return(&f.skeleton) && (c.holes.len() > 1 || ci == f.input)
}

/// Initialization statements for every component that is not defined by a
/// call, plus primitive arguments. Returns the statements and the
/// variable name chosen for each primitive slot, in call order.
pub fn init_vars(
    lib: &Program,
    f: &Filled,
    strategy: Strategy,
    hg: &ConstructorHypergraph,
) -> (Vec<Stmt>, Vec<Vec<Option<String>>>) {
    let mut used: BTreeSet<String> = f.components.iter().map(|c| c.name.clone()).collect();
    let mut out = Vec::new();
    let mut init = Init { lib, hg, used: &mut used, out: &mut out };
    // The compared input comes first, then the rest in component order.
    let order = std::iter::once(f.input).chain((0..f.components.len()).filter(|&c| c != f.input));
    for ci in order {
        let c = &f.components[ci];
        if c.has_return(&f.skeleton) {
            continue;
        }
        let ty = Ty::Ref(c.ty.clone());
        match strategy {
            Strategy::Null if must_allocate(f, ci) => init.with_null_args(&c.name, &c.ty),
            Strategy::Null => init.null(&c.name),
            Strategy::Instantiate => match hg.shortest_tree(&ty) {
                Some(t) => init.tree(&c.name, &t),
                None if must_allocate(f, ci) => init.with_null_args(&c.name, &c.ty),
                None => init.null(&c.name),
            },
        }
    }
    let mut prims = Vec::new();
    for call in &f.skeleton.calls {
        let sig = lib.function(&call.func).expect("interface functions exist");
        let mut names = Vec::new();
        for (slot, p) in call.args.iter().zip(&sig.params) {
            match slot {
                Slot::Prim(Ty::Prim(pt)) => {
                    let v = fresh(init.used, &p.name);
                    init.out.push(Stmt::PrimInit { dst: v.clone(), lit: pt.default_literal() });
                    names.push(Some(v));
                }
                _ => names.push(None),
            }
        }
        prims.push(names);
    }
    (out, prims)
}

struct Init<'a> {
    lib: &'a Program,
    hg: &'a ConstructorHypergraph,
    used: &'a mut BTreeSet<String>,
    out: &'a mut Vec<Stmt>,
}

impl Init<'_> {
    fn null(&mut self, var: &str) {
        self.out.push(Stmt::PrimInit { dst: var.to_string(), lit: Literal::Null });
    }

    fn alloc(&mut self, var: &str, ty: &TypeId) {
        self.out.push(Stmt::Alloc {
            dst: var.to_string(),
            ty: ty.clone(),
            site: AllocSiteId::new(format!("o_{var}")),
        });
    }

    fn ctor_params(&self, ctor: &FuncId) -> Vec<String> {
        let f = self.lib.function(ctor).expect("constructor exists");
        f.params.iter().skip(1).map(|p| p.name.clone()).collect()
    }

    /// `var = new T; T.ctor(var, defaults...)` with the fewest-argument
    /// constructor, passing `null` for references.
    fn with_null_args(&mut self, var: &str, ty: &TypeId) {
        self.alloc(var, ty);
        let Some(edge) = self.hg.fewest_args(ty).cloned() else { return };
        let Some(ctor) = edge.ctor else { return };
        let mut args = vec![var.to_string()];
        for (t, pname) in edge.body.iter().zip(self.ctor_params(&ctor)) {
            let a = fresh(self.used, &format!("{var}{}", upper_first(&pname)));
            let lit = match t {
                Ty::Prim(p) => p.default_literal(),
                Ty::Ref(_) => Literal::Null,
            };
            self.out.push(Stmt::PrimInit { dst: a.clone(), lit });
            args.push(a);
        }
        self.out.push(Stmt::Call { dst: None, func: ctor, args });
    }

    /// Emits the constructor-call tree bottom-up, binding the root to `var`.
    fn tree(&mut self, var: &str, t: &CtorTree) {
        match &t.edge.head {
            Ty::Prim(p) => self.out.push(Stmt::PrimInit { dst: var.to_string(), lit: p.default_literal() }),
            Ty::Ref(ty) => {
                let mut args = vec![var.to_string()];
                if let Some(ctor) = &t.edge.ctor {
                    for (sub, pname) in t.args.iter().zip(self.ctor_params(ctor)) {
                        let a = fresh(self.used, &format!("{var}{}", upper_first(&pname)));
                        self.tree(&a, sub);
                        args.push(a);
                    }
                }
                self.alloc(var, ty);
                if let Some(ctor) = &t.edge.ctor {
                    self.out.push(Stmt::Call { dst: None, func: ctor.clone(), args });
                }
            }
        }
    }
}

/// A synthesized potential witness.
#[derive(Clone, PartialEq, Debug)]
pub struct UnitTest {
    /// Initialization, scheduled calls and the final comparison.
    pub stmts: Vec<Stmt>,
    /// Variables compared by identity in the last statement.
    pub result_pair: (String, String),
    pub spec: PathSpec,
    pub strategy: Strategy,
    /// Spec indices of the calls in execution order.
    pub order: Vec<usize>,
}

/// Name of the synthesized test function.
pub const TEST_FUNCTION: &str = "test";

impl UnitTest {
    pub fn to_function(&self) -> FunctionDef {
        FunctionDef {
            id: FuncId::new(TEST_FUNCTION),
            params: vec![],
            ret: None,
            body: self.stmts.clone(),
            is_library: false,
            is_ctor: false,
        }
    }

    /// The library extended with the test as its only client function.
    pub fn program(&self, lib: &Program) -> Program {
        let mut p = lib.library_only();
        p.functions.push(self.to_function());
        p.entry = Some(FuncId::new(TEST_FUNCTION));
        p
    }

    pub fn render(&self) -> String {
        print_function(&self.to_function(), "")
    }
}

/// Orders the calls: a call whose result feeds another call's argument
/// goes first (hard constraint), otherwise specification order wins.
pub fn schedule(f: &Filled, init: Vec<Stmt>, prims: &[Vec<Option<String>>], s: &PathSpec, strategy: Strategy) -> UnitTest {
    let k = s.hops();
    let mut succ = vec![Vec::new(); k];
    let mut indeg = vec![0usize; k];
    for i in 0..k.saturating_sub(1) {
        let edge = match boundary_relation(s.w(i), s.z(i + 1)) {
            Some(Nonterminal::Transfer) => Some((i, i + 1)),
            Some(Nonterminal::TransferBar) => Some((i + 1, i)),
            _ => None,
        };
        if let Some((a, b)) = edge {
            succ[a].push(b);
            indeg[b] += 1;
        }
    }
    let mut ready: BinaryHeap<Reverse<usize>> = (0..k).filter(|&i| indeg[i] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(k);
    while let Some(Reverse(i)) = ready.pop() {
        order.push(i);
        for &j in &succ[i] {
            indeg[j] -= 1;
            if indeg[j] == 0 {
                ready.push(Reverse(j));
            }
        }
    }
    assert_eq!(order.len(), k, "hard constraints only link neighbours, so they are acyclic");
    let mut stmts = init;
    for &i in &order {
        let call = &f.skeleton.calls[i];
        let args = call
            .args
            .iter()
            .enumerate()
            .map(|(j, slot)| match slot {
                Slot::Hole(h) => f.var_of(*h).to_string(),
                Slot::Prim(_) => prims[i][j].clone().expect("primitive slots are initialized"),
            })
            .collect();
        let dst = call.ret.map(|h| f.var_of(h).to_string());
        stmts.push(Stmt::Call { dst, func: call.func.clone(), args });
    }
    let lhs = f.components[f.input].name.clone();
    let rhs = f.components[f.output].name.clone();
    stmts.push(Stmt::ReturnSame { lhs: lhs.clone(), rhs: rhs.clone() });
    UnitTest { stmts, result_pair: (lhs, rhs), spec: s.clone(), strategy, order }
}

/// A visible-variable edge in canonical form: `TransferBar(a, b)` is stored
/// as `Transfer(b, a)` and Alias endpoints are ordered.
pub type VisibleEdge = (VisibleVar, Nonterminal, VisibleVar);

pub fn canonical_edge(a: &VisibleVar, nt: Nonterminal, b: &VisibleVar) -> Option<VisibleEdge> {
    match nt {
        Nonterminal::Transfer => Some((a.clone(), nt, b.clone())),
        Nonterminal::TransferBar => Some((b.clone(), Nonterminal::Transfer, a.clone())),
        Nonterminal::Alias if a <= b => Some((a.clone(), nt, b.clone())),
        Nonterminal::Alias => Some((b.clone(), nt, a.clone())),
        Nonterminal::FlowsTo => None,
    }
}

/// Canonical premise of `s`, without self-loops.
pub fn canonical_premise(s: &PathSpec) -> Result<BTreeSet<VisibleEdge>, SpecError> {
    let rule = to_rule(s)?;
    Ok(rule
        .premise
        .iter()
        .filter(|(a, _, b)| a != b)
        .filter_map(|(a, nt, b)| canonical_edge(a, *nt, b))
        .collect())
}

/// The visible edges a test built from `f` exhibits when library bodies
/// are left out: results flow into every parameter of their class, and the
/// parameters of an allocated class alias each other. Self-loops are
/// dropped.
pub fn predicted_edges(f: &Filled) -> BTreeSet<VisibleEdge> {
    let sk = &f.skeleton;
    let mut out = BTreeSet::new();
    for (ci, c) in f.components.iter().enumerate() {
        let rets: BTreeSet<&VisibleVar> = c.returns(sk).collect();
        let params: BTreeSet<&VisibleVar> = c.params(sk).collect();
        for r in &rets {
            for p in &params {
                out.insert(((*r).clone(), Nonterminal::Transfer, (*p).clone()));
            }
        }
        if must_allocate(f, ci) {
            for a in &params {
                for b in &params {
                    if a < b {
                        out.insert(((*a).clone(), Nonterminal::Alias, (*b).clone()));
                    }
                }
            }
        }
    }
    out
}

/// Synthesizes potential witnesses for one library.
#[derive(Clone, Debug)]
pub struct Synthesizer {
    pub lib: Program,
    pub iface: Interface,
    pub hg: ConstructorHypergraph,
}

impl Synthesizer {
    pub fn new(lib: &Program) -> Self {
        let lib = lib.library_only();
        let iface = crate::ir::library_interface(&lib);
        let hg = ConstructorHypergraph::build(&lib);
        Synthesizer { lib, iface, hg }
    }

    /// Runs the pipeline after checking that the test exhibits exactly the
    /// premise and that its final comparison speaks about the conclusion's
    /// endpoints.
    pub fn synthesize(&self, s: &PathSpec, strategy: Strategy) -> Result<UnitTest, SynthError> {
        let f = self.fill(s)?;
        self.check_premise(&f, s)?;
        self.check_attribution(&f, s)?;
        Ok(self.finish(&f, s, strategy))
    }

    /// Runs the pipeline with only the type check, for static use where
    /// the test merely has to establish the premise.
    pub fn synthesize_unchecked(&self, s: &PathSpec, strategy: Strategy) -> Result<UnitTest, SynthError> {
        let f = self.fill(s)?;
        Ok(self.finish(&f, s, strategy))
    }

    pub fn fill(&self, s: &PathSpec) -> Result<Filled, SynthError> {
        let sk = build_skeleton(&self.iface, s)?;
        fill_holes(&self.iface, sk, s)
    }

    fn finish(&self, f: &Filled, s: &PathSpec, strategy: Strategy) -> UnitTest {
        let (init, prims) = init_vars(&self.lib, f, strategy, &self.hg);
        schedule(f, init, &prims, s, strategy)
    }

    fn check_premise(&self, f: &Filled, s: &PathSpec) -> Result<(), SynthError> {
        let want = canonical_premise(s)?;
        let got = predicted_edges(f);
        if want == got {
            return Ok(());
        }
        let show = |e: &VisibleEdge| format!("{} {:?} {}", self.iface.name(&e.0), e.1, self.iface.name(&e.2));
        let extra: Vec<String> = got.difference(&want).map(show).collect();
        let missing: Vec<String> = want.difference(&got).map(show).collect();
        Err(SynthError::Unwitnessable(format!(
            "extra [{}], missing [{}]",
            extra.join("; "),
            missing.join("; ")
        )))
    }

    fn check_attribution(&self, f: &Filled, s: &PathSpec) -> Result<(), SynthError> {
        let sk = &f.skeleton;
        let z1 = s.z(0);
        let wk = s.w(s.hops() - 1);
        let input = &f.components[f.input];
        let output = &f.components[f.output];
        let name = |v: &VisibleVar| self.iface.name(v);
        if z1.is_return() {
            if let Some(r) = input.returns(sk).find(|r| *r != z1) {
                return Err(SynthError::Unattributable(format!("{} also defines the compared value", name(r))));
            }
        } else {
            if let Some(r) = input.returns(sk).next() {
                return Err(SynthError::Unattributable(format!("{} redefines the input", name(r))));
            }
            if let Some(p) = input.params(sk).find(|p| *p != z1) {
                return Err(SynthError::Unattributable(format!("the input is also passed as {}", name(p))));
            }
        }
        if let Some(r) = output.returns(sk).find(|r| *r != wk) {
            return Err(SynthError::Unattributable(format!("{} also defines the output", name(r))));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
