//! Flow-insensitive, field-sensitive Andersen-style points-to analysis
//! phrased as CFL reachability, optionally extended with path
//! specification rules standing in for library code.

mod brute;
mod closure;
mod graph;

pub use brute::{brute_force_by_paths, brute_force_closure};
pub use closure::{
    closure, closure_with_provenance, min_witness_lengths, points_to, ClosureResult, Derivation,
    NtEdge, Nonterminal, ResolvedRule, SpecRuleSet,
};
pub use graph::{extract_graph, BaseLabel, Edge, EdgeLabel, PTGraph, Vertex};

use std::collections::BTreeSet;

use crate::ir::{AllocSiteId, Interface, Program, VarId};
use crate::pathspec::SpecRule;

/// Resolves interface-level rules to vertices of the analysed program.
pub fn resolve_rules(iface: &Interface, rules: &[SpecRule]) -> SpecRuleSet {
    let v = |x: &crate::ir::VisibleVar| Vertex::Var(iface.var_id(x));
    SpecRuleSet {
        rules: rules
            .iter()
            .map(|r| ResolvedRule {
                premise: r.premise.iter().map(|(a, nt, b)| (v(a), *nt, v(b))).collect(),
                conclusion: (v(&r.conclusion.0), r.conclusion.1, v(&r.conclusion.2)),
            })
            .collect(),
    }
}

/// Points-to pairs of client variables to client allocation sites: the
/// relation reported to users, with library internals and fragment ghosts
/// filtered out.
pub fn program_points_to(p: &Program, c: &ClosureResult) -> BTreeSet<(VarId, AllocSiteId)> {
    let client_funcs: BTreeSet<_> = p.client_functions().map(|f| f.id.clone()).collect();
    let client_sites: BTreeSet<AllocSiteId> = p
        .client_functions()
        .flat_map(|f| f.body.iter())
        .filter_map(|s| match s {
            crate::ir::Stmt::Alloc { site, .. } => Some(site.clone()),
            _ => None,
        })
        .collect();
    points_to(c)
        .into_iter()
        .filter(|(v, o)| client_funcs.contains(&v.func) && client_sites.contains(o) && !o.is_fragment())
        .collect()
}
