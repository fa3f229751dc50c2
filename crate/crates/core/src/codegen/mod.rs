//! Turns path specifications back into code. Each between-pair automaton
//! state becomes a ghost field; each pair of transitions `p -z-> q -w-> r`
//! adds statements to the function of `z` and `w` that move the tracked
//! value from the field of `p` (or from `z` itself at the start) into the
//! field of `r` (or into `w` at the end). The generated library can replace
//! the original one under a plain points-to analysis.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::analysis::{closure, extract_graph, program_points_to, Nonterminal, ResolvedRule, SpecRuleSet, Vertex};
use crate::ir::{
    library_interface, print_program, validate, AllocSiteId, FieldDecl, FieldId, FuncId, Interface, IrError, Program,
    Stmt, TypeId, VarId, VisibleVar,
};
use crate::pathspec::{boundary_relation, to_rule, PathSpec, SpecAutomaton, SpecError, Sym};

/// Prefix reserved for generated fields; user programs cannot declare
/// fields with it unless they are marked as ghosts.
pub const GHOST_PREFIX: &str = "__g";

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum CodegenError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("automaton is not well-formed: {0}")]
    IllFormed(String),
    #[error("library has no function {0}")]
    UnknownFunction(FuncId),
    #[error("generated fragments are invalid: {0}")]
    Invalid(#[from] IrError),
}

/// A drop-in library: the original types with ghost fields added, and every
/// library function with a generated body.
#[derive(Clone, PartialEq, Debug)]
pub struct CodeFragmentSpec {
    pub program: Program,
    pub ghost_fields: BTreeSet<FieldId>,
}

impl CodeFragmentSpec {
    pub fn render(&self) -> String {
        print_program(&self.program)
    }

    /// Generated statements of `f`, without the implicit final return.
    pub fn body(&self, f: &str) -> &[Stmt] {
        let Some(f) = self.program.function_by_name(f) else { return &[] };
        match f.body.split_last() {
            Some((Stmt::Return { .. }, rest)) => rest,
            _ => &f.body,
        }
    }

    /// `client` with its library replaced by the fragments.
    pub fn with_client(&self, client: &Program) -> Program {
        let mut p = self.program.clone();
        p.functions.extend(client.client_functions().cloned());
        p.entry = client.entry.clone();
        p
    }
}

fn ghost(n: usize) -> FieldId {
    FieldId::new(format!("{GHOST_PREFIX}{n}"))
}

/// Where the tracked value is at the start of a pair.
enum Source {
    Var(String),
    Field(String, FieldId),
}

/// Accumulates generated statements per function.
struct Builder<'a> {
    lib: &'a Program,
    iface: Interface,
    bodies: BTreeMap<FuncId, Vec<Stmt>>,
    /// Ghost fields used by each function's owner type.
    fields: BTreeMap<TypeId, BTreeSet<usize>>,
}

impl<'a> Builder<'a> {
    fn new(lib: &'a Program) -> Self {
        Builder { lib, iface: library_interface(lib), bodies: BTreeMap::new(), fields: BTreeMap::new() }
    }

    fn emit(&mut self, f: &FuncId, s: Stmt) {
        let body = self.bodies.entry(f.clone()).or_default();
        if !body.contains(&s) {
            body.push(s);
        }
    }

    fn uses_field(&mut self, f: &FuncId, n: usize) {
        let owner = TypeId::new(f.owner().unwrap_or(crate::ir::OBJECT));
        self.fields.entry(owner).or_default().insert(n);
    }

    fn name(&self, v: &VisibleVar) -> String {
        self.iface.var_name(v).to_string()
    }

    fn alloc(&mut self, f: &FuncId, dst: &str, ty: TypeId) {
        let site = AllocSiteId::new(format!("~{f}.{dst}"));
        self.emit(f, Stmt::Alloc { dst: dst.to_string(), ty, site });
    }

    /// Statements that make the tracked value available for the pair
    /// starting with `z`. `from` is the field of the state before `z`, or
    /// `None` at the start of a specification; `mid` names the state after
    /// `z`.
    fn source(&mut self, z: &VisibleVar, from: Option<usize>, mid: usize) -> Source {
        let f = &z.func;
        let zn = self.name(z);
        match (from, z.is_return()) {
            (None, false) => Source::Var(zn),
            (None, true) => {
                let a = format!("__a{mid}");
                self.alloc(f, &a, self.iface.ref_type(z));
                self.emit(f, Stmt::Assign { dst: zn, src: a.clone() });
                Source::Var(a)
            }
            (Some(p), false) => {
                self.uses_field(f, p);
                Source::Field(zn, ghost(p))
            }
            (Some(p), true) => {
                let c = format!("__c{mid}");
                self.alloc(f, &c, self.iface.ref_type(z));
                self.emit(f, Stmt::Assign { dst: zn, src: c.clone() });
                self.uses_field(f, p);
                Source::Field(c, ghost(p))
            }
        }
    }

    fn materialize(&mut self, f: &FuncId, src: &Source, mid: usize) -> String {
        match src {
            Source::Var(v) => v.clone(),
            Source::Field(base, field) => {
                let t = format!("__t{mid}");
                self.emit(f, Stmt::Load { dst: t.clone(), base: base.clone(), field: field.clone() });
                t
            }
        }
    }

    /// Statements that hand the tracked value to `w`: into `w` itself at the
    /// end of a specification (`to == None`), or into the ghost field of the
    /// state after `w`.
    fn sink(&mut self, w: &VisibleVar, src: &Source, mid: usize, to: Option<usize>) -> Result<(), CodegenError> {
        let f = &w.func;
        let wn = self.name(w);
        match (to, w.is_return()) {
            (None, false) => return Err(CodegenError::IllFormed(format!("accepted word ends in parameter {w}"))),
            (None, true) => match src {
                Source::Var(v) => self.emit(f, Stmt::Assign { dst: wn, src: v.clone() }),
                Source::Field(base, field) => {
                    self.emit(f, Stmt::Load { dst: wn, base: base.clone(), field: field.clone() })
                }
            },
            (Some(r), false) => {
                let v = self.materialize(f, src, mid);
                self.uses_field(f, r);
                self.emit(f, Stmt::Store { base: wn, field: ghost(r), src: v });
            }
            (Some(r), true) => {
                let v = self.materialize(f, src, mid);
                let d = format!("__d{r}");
                self.alloc(f, &d, self.iface.ref_type(w));
                self.emit(f, Stmt::Assign { dst: wn, src: d.clone() });
                self.uses_field(f, r);
                self.emit(f, Stmt::Store { base: d, field: ghost(r), src: v });
            }
        }
        Ok(())
    }

    fn finish(self) -> Result<CodeFragmentSpec, CodegenError> {
        let mut program = self.lib.library_only();
        let mut ghost_fields = BTreeSet::new();
        for t in &mut program.types {
            for &n in self.fields.get(&t.id).into_iter().flatten() {
                let id = ghost(n);
                ghost_fields.insert(id.clone());
                t.fields.push(FieldDecl { id, ghost: true });
            }
        }
        for f in &mut program.functions {
            f.body = self.bodies.get(&f.id).cloned().unwrap_or_default();
            if let Some(r) = &f.ret {
                f.body.push(Stmt::Return { src: r.name.clone() });
            }
        }
        validate(&program)?;
        Ok(CodeFragmentSpec { program, ghost_fields })
    }
}

/// Breadth-first ordinals of the states of `a`, split into states between
/// pairs (even depth) and states inside a pair (odd depth). Fails when a
/// state is reachable at both parities.
fn ordinals(a: &SpecAutomaton) -> Result<Layout, CodegenError> {
    let mut parity: BTreeMap<u32, bool> = BTreeMap::new();
    let mut between = BTreeMap::new();
    let mut inside = BTreeMap::new();
    parity.insert(a.start, false);
    between.insert(a.start, 0);
    let mut queue = VecDeque::from([a.start]);
    while let Some(p) = queue.pop_front() {
        let odd = !parity[&p];
        for qs in a.delta.get(&p).into_iter().flat_map(|m| m.values()) {
            for &q in qs {
                match parity.get(&q) {
                    Some(&par) if par != odd => {
                        return Err(CodegenError::IllFormed(format!("state {q} is reached at both parities")))
                    }
                    Some(_) => {}
                    None => {
                        parity.insert(q, odd);
                        if odd {
                            inside.insert(q, inside.len() + 1);
                        } else {
                            between.insert(q, between.len());
                        }
                        queue.push_back(q);
                    }
                }
            }
        }
    }
    Ok((between, inside))
}

/// Code fragments equivalent to the language of `a`.
pub fn fsa_to_fragments(lib: &Program, a: &SpecAutomaton) -> Result<CodeFragmentSpec, CodegenError> {
    let a = a.trim();
    let layout = ordinals(&a)?;
    generate(lib, &a, &layout)
}

/// Like [`fsa_to_fragments`], but with fields and temporaries named after
/// the states of `layout`, which must contain every state and transition
/// of `a` under the same numbering. Fragments of two sub-automata of one
/// layout then share statements exactly where they share behaviour.
pub fn fragments_in_layout(
    lib: &Program,
    a: &SpecAutomaton,
    layout: &SpecAutomaton,
) -> Result<CodeFragmentSpec, CodegenError> {
    let ords = ordinals(layout)?;
    let a = a.trim();
    if let Some(q) = a.states().find(|q| !ords.0.contains_key(q) && !ords.1.contains_key(q)) {
        return Err(CodegenError::IllFormed(format!("state {q} is missing from the layout")));
    }
    generate(lib, &a, &ords)
}

type Layout = (BTreeMap<u32, usize>, BTreeMap<u32, usize>);

fn generate(lib: &Program, a: &SpecAutomaton, (between, inside): &Layout) -> Result<CodeFragmentSpec, CodegenError> {
    let mut b = Builder::new(lib);
    let has_in: BTreeSet<u32> = a.transitions().iter().map(|t| t.2).collect();
    let mut order: Vec<u32> = a.states().filter(|s| between.contains_key(s)).collect();
    order.sort_by_key(|s| between[s]);
    for p in order {
        for (z, q) in out_edges(a, p, inside) {
            let zv = a.alphabet[z as usize].clone();
            if b.lib.function(&zv.func).is_none() {
                return Err(CodegenError::UnknownFunction(zv.func.clone()));
            }
            let mid = inside[&q];
            let mut sources = Vec::new();
            if p == a.start {
                sources.push(None);
            }
            if has_in.contains(&p) {
                sources.push(Some(between[&p]));
            }
            for (w, r) in out_edges(a, q, between) {
                let wv = &a.alphabet[w as usize];
                if wv.func != zv.func {
                    return Err(CodegenError::IllFormed(format!("{zv} and {wv} belong to different functions")));
                }
                let mut sinks = Vec::new();
                if a.accepting.contains(&r) {
                    sinks.push(None);
                }
                if a.has_outgoing(r) {
                    sinks.push(Some(between[&r]));
                }
                for &from in &sources {
                    for &to in &sinks {
                        let src = b.source(&zv, from, mid);
                        b.sink(wv, &src, mid, to)?;
                    }
                }
            }
        }
    }
    b.finish()
}

/// Transitions out of `p` in alphabet order, then by target ordinal.
fn out_edges(a: &SpecAutomaton, p: u32, ord: &BTreeMap<u32, usize>) -> Vec<(Sym, u32)> {
    let mut out = Vec::new();
    for (&s, qs) in a.delta.get(&p).into_iter().flatten() {
        let mut qs: Vec<u32> = qs.iter().copied().collect();
        qs.sort_by_key(|q| ord.get(q).copied().unwrap_or(usize::MAX));
        out.extend(qs.into_iter().map(|q| (s, q)));
    }
    out
}

/// Code fragments for one specification. A chain of parameter-to-parameter
/// aliases starting at a parameter is translated directly; anything else
/// goes through the automaton accepting just `s`.
pub fn single_spec_to_fragments(lib: &Program, s: &PathSpec) -> Result<CodeFragmentSpec, CodegenError> {
    to_rule(s)?;
    let k = s.hops();
    let all_alias = s.seq[..s.seq.len() - 1].iter().all(|v| !v.is_return());
    if !all_alias {
        let a = SpecAutomaton::prefix_tree(library_interface(lib).visible, [s]);
        return fsa_to_fragments(lib, &a);
    }
    let mut b = Builder::new(lib);
    for i in 0..k {
        let (z, w) = (s.z(i), s.w(i));
        if b.lib.function(&z.func).is_none() {
            return Err(CodegenError::UnknownFunction(z.func.clone()));
        }
        let src = b.source(z, (i > 0).then_some(i), i + 1);
        b.sink(w, &src, i + 1, (i + 1 < k).then_some(i + 1))?;
    }
    b.finish()
}

/// Points-to relation of `client` with its library replaced by `frags`,
/// restricted to client variables and client allocation sites.
pub fn fragments_points_to(client: &Program, frags: &CodeFragmentSpec) -> BTreeSet<(VarId, AllocSiteId)> {
    let p = frags.with_client(client);
    let c = closure(&extract_graph(&p, true), &SpecRuleSet::empty());
    program_points_to(&p, &c)
}

/// Points-to relation of `client` with library bodies replaced by the rules
/// of the given specifications.
pub fn rules_points_to(client: &Program, specs: &[PathSpec]) -> Result<BTreeSet<(VarId, AllocSiteId)>, CodegenError> {
    let iface = library_interface(client);
    let rules = specs.iter().map(to_rule).collect::<Result<Vec<_>, _>>()?;
    let c = closure(&extract_graph(client, false), &crate::analysis::resolve_rules(&iface, &rules));
    Ok(program_points_to(client, &c))
}

/// Points-to relation of `client` under the rules of every specification in
/// the (possibly infinite) language of `a`. Conclusions are found by
/// walking the automaton along edges already derived, which covers
/// specifications of any length; the closure is recomputed until no new
/// conclusion appears.
pub fn automaton_points_to(client: &Program, a: &SpecAutomaton) -> BTreeSet<(VarId, AllocSiteId)> {
    let iface = library_interface(client);
    let g = extract_graph(client, false);
    let var = |v: &VisibleVar| Vertex::Var(iface.var_id(v));
    let mut facts = SpecRuleSet::empty();
    let mut known: BTreeSet<(Vertex, Nonterminal, Vertex)> = BTreeSet::new();
    loop {
        let c = closure(&g, &facts);
        let mut fresh = Vec::new();
        // Nodes: (first variable, state after a pair, last variable).
        let mut seen: BTreeSet<(Sym, u32, Sym)> = BTreeSet::new();
        let mut stack: Vec<(Sym, u32, Sym)> = Vec::new();
        for (z, q) in pairs_from(a, a.start) {
            for (w, r) in pairs_from(a, q) {
                if seen.insert((z, r, w)) {
                    stack.push((z, r, w));
                }
            }
        }
        while let Some((z1, r, w)) = stack.pop() {
            let (zv, wv) = (&a.alphabet[z1 as usize], &a.alphabet[w as usize]);
            if a.accepting.contains(&r) && wv.is_return() {
                let nt = if zv.is_return() { Nonterminal::Alias } else { Nonterminal::Transfer };
                let e = (var(zv), nt, var(wv));
                if !c.contains(&e.0, e.1, &e.2) && known.insert(e.clone()) {
                    fresh.push(e);
                }
            }
            for (z, q) in pairs_from(a, r) {
                let Some(rel) = boundary_relation(wv, &a.alphabet[z as usize]) else { continue };
                if !c.contains(&var(wv), rel, &var(&a.alphabet[z as usize])) {
                    continue;
                }
                for (w2, r2) in pairs_from(a, q) {
                    if seen.insert((z1, r2, w2)) {
                        stack.push((z1, r2, w2));
                    }
                }
            }
        }
        if fresh.is_empty() {
            return program_points_to(client, &c);
        }
        facts.rules.extend(fresh.into_iter().map(|conclusion| ResolvedRule { premise: vec![], conclusion }));
    }
}

fn pairs_from(a: &SpecAutomaton, p: u32) -> Vec<(Sym, u32)> {
    a.delta
        .get(&p)
        .into_iter()
        .flat_map(|m| m.iter().flat_map(|(&s, qs)| qs.iter().map(move |&q| (s, q))))
        .collect()
}

#[cfg(test)]
mod tests;
