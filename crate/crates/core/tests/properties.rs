//! Property tests over random points-to graphs and the benchmark corpus.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::OnceLock;

use proptest::prelude::*;
use proptest::strategy::Strategy as PropStrategy;
use ptspec::analysis::{
    brute_force_closure, closure, extract_graph, min_witness_lengths, program_points_to, BaseLabel, NtEdge,
    Nonterminal, PTGraph, ResolvedRule, SpecRuleSet, Vertex,
};
use ptspec::codegen::rules_points_to;
use ptspec::evalbench::{ground_truth, load_corpus, metric_rpt, Benchmark};
use ptspec::interpreter::DEFAULT_FUEL;
use ptspec::ir::{library_interface, parse_program, print_program, AllocSiteId, FieldId, Program, Stmt, VarId};
use ptspec::oracle::{witness_condition, DynamicOracle, OracleConfig, SpecOracle};
use ptspec::pathspec::{all_specs, to_rule, PathSpec, SpecAutomaton};
use ptspec::synth::{Strategy, Synthesizer};

fn corpus() -> &'static [Benchmark] {
    static CORPUS: OnceLock<Vec<Benchmark>> = OnceLock::new();
    CORPUS.get_or_init(|| load_corpus(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../bench")).unwrap())
}

/// Specifications within three hops accepted by the null-strategy oracle,
/// per benchmark.
fn null_accepts() -> &'static [Vec<PathSpec>] {
    static ACCEPTS: OnceLock<Vec<Vec<PathSpec>>> = OnceLock::new();
    ACCEPTS.get_or_init(|| {
        corpus()
            .iter()
            .map(|b| {
                let o = DynamicOracle::new(&b.library, OracleConfig { strategy: Strategy::Null, fuel: DEFAULT_FUEL });
                all_specs(&library_interface(&b.library), 3).into_iter().filter(|s| o.check(s)).collect()
            })
            .collect()
    })
}

/// An edge of a random graph: kind, endpoints and field, as indices.
type RawEdge = (u8, usize, usize, usize);

fn build_graph(n_vars: usize, n_sites: usize, raw: &[RawEdge]) -> PTGraph {
    let var = |i: usize| Vertex::Var(VarId::new("m", format!("v{}", i % n_vars)));
    let site = |i: usize| Vertex::Site(AllocSiteId::new(format!("o{}", i % n_sites)));
    let field = |i: usize| FieldId::new(if i % 2 == 0 { "f" } else { "g" });
    let mut g = PTGraph::default();
    for &(kind, x, y, f) in raw {
        match kind % 4 {
            0 => g.add(site(y), BaseLabel::New, var(x)),
            1 => g.add(var(x), BaseLabel::Assign, var(y)),
            2 => g.add(var(x), BaseLabel::Store(field(f)), var(y)),
            _ => g.add(var(x), BaseLabel::Load(field(f)), var(y)),
        }
    }
    g
}

/// Graphs with at most eight vertices and twenty edges.
fn graphs() -> impl PropStrategy<Value = PTGraph> {
    (1usize..=6, 1usize..=2, prop::collection::vec((any::<u8>(), 0usize..8, 0usize..8, 0usize..2), 1..=20))
        .prop_map(|(v, s, raw)| build_graph(v, s, &raw))
}

fn vertices(g: &PTGraph) -> BTreeSet<Vertex> {
    g.forward_edges().flat_map(|e| [e.0.clone(), e.2.clone()]).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn closure_agrees_with_bounded_derivations(g in graphs()) {
        let lens = min_witness_lengths(&g);
        let short: BTreeSet<NtEdge> = lens.iter().filter(|(_, &l)| l <= 12).map(|(e, _)| e.clone()).collect();
        prop_assert_eq!(short, brute_force_closure(&g, 12).edge_set());
        let all: BTreeSet<NtEdge> = lens.into_keys().collect();
        prop_assert_eq!(all, closure(&g, &SpecRuleSet::empty()).edge_set());
    }

    #[test]
    fn aliases_are_symmetric_and_transfer_is_reflexive(g in graphs()) {
        let c = closure(&g, &SpecRuleSet::empty());
        for (a, nt, b) in c.edges() {
            if nt == Nonterminal::Alias {
                prop_assert!(c.contains(&b, Nonterminal::Alias, &a));
            }
        }
        for v in vertices(&g) {
            prop_assert!(c.contains(&v, Nonterminal::Transfer, &v), "{:?}", v);
        }
    }

    #[test]
    fn extra_rules_only_add_edges(g in graphs(), picks in prop::collection::vec((0usize..64, 0usize..64, any::<bool>()), 0..4)) {
        let vs: Vec<Vertex> = vertices(&g).into_iter().filter(|v| matches!(v, Vertex::Var(_))).collect();
        prop_assume!(!vs.is_empty());
        let rules = SpecRuleSet {
            rules: picks
                .iter()
                .map(|&(a, b, alias)| ResolvedRule {
                    premise: vec![],
                    conclusion: (
                        vs[a % vs.len()].clone(),
                        if alias { Nonterminal::Alias } else { Nonterminal::Transfer },
                        vs[b % vs.len()].clone(),
                    ),
                })
                .collect(),
        };
        let base = closure(&g, &SpecRuleSet::empty()).edge_set();
        let extended = closure(&g, &rules).edge_set();
        prop_assert!(base.is_subset(&extended));
    }

    #[test]
    fn closure_is_idempotent(g in graphs()) {
        let c = closure(&g, &SpecRuleSet::empty());
        let facts = SpecRuleSet {
            rules: c
                .edges()
                .into_iter()
                .filter(|(_, nt, _)| matches!(nt, Nonterminal::Transfer | Nonterminal::Alias))
                .map(|conclusion| ResolvedRule { premise: vec![], conclusion })
                .collect(),
        };
        prop_assert_eq!(closure(&g, &facts).edge_set(), c.edge_set());
    }

    #[test]
    fn null_tests_witness_their_premise(b in 0usize..7, pick in any::<prop::sample::Index>()) {
        let bench = &corpus()[b % corpus().len()];
        let synth = Synthesizer::new(&bench.library);
        let specs = all_specs(&synth.iface, 3);
        let s = pick.get(&specs);
        if let Ok(t) = synth.synthesize(s, Strategy::Null) {
            prop_assert!(witness_condition(&t, &synth.lib), "{}", s.display(&synth.iface));
            // The emitted test is a valid program: every variable is
            // defined before use.
            let printed = print_program(&t.program(&synth.lib));
            prop_assert!(parse_program(&printed).is_ok(), "{}", printed);
        }
    }

    #[test]
    fn unions_of_accepted_specs_stay_precise(b in 0usize..7, picks in prop::collection::vec(any::<prop::sample::Index>(), 1..6)) {
        let i = b % corpus().len();
        let (bench, accepted) = (&corpus()[i], &null_accepts()[i]);
        prop_assume!(!accepted.is_empty());
        let chosen: Vec<PathSpec> = picks.iter().map(|p| p.get(accepted).clone()).collect();
        let implementation =
            program_points_to(&bench.client, &closure(&extract_graph(&bench.client, true), &SpecRuleSet::empty()));
        let from_specs = rules_points_to(&bench.client, &chosen).unwrap();
        prop_assert!(from_specs.is_subset(&implementation), "{}", bench.name);
    }

    #[test]
    fn identical_automata_have_unit_points_to_ratio(b in 0usize..7, picks in prop::collection::vec(any::<prop::sample::Index>(), 1..8)) {
        let bench = &corpus()[b % corpus().len()];
        let truth: Vec<PathSpec> = ground_truth(&bench.library, 2).specs.into_iter().collect();
        prop_assume!(!truth.is_empty());
        let chosen: Vec<PathSpec> = picks.iter().map(|p| p.get(&truth).clone()).collect();
        let a = SpecAutomaton::prefix_tree(library_interface(&bench.library).visible, chosen.iter());
        if let Some(r) = metric_rpt(&bench.client, &a, &a) {
            prop_assert_eq!(r, 1.0);
        }
    }
}

#[test]
fn printing_then_parsing_is_the_identity_on_corpus_programs() {
    for b in corpus() {
        for p in [&b.library, &b.client] {
            let text = print_program(p);
            assert_eq!(&parse_program(&text).unwrap(), p, "{}:\n{text}", b.name);
        }
    }
}

#[test]
fn every_statement_kind_occurs_in_the_corpus() {
    let mut kinds = BTreeSet::new();
    for b in corpus() {
        for f in &b.client.functions {
            for s in &f.body {
                kinds.insert(match s {
                    Stmt::Assign { .. } => "assign",
                    Stmt::Alloc { .. } => "alloc",
                    Stmt::Store { .. } => "store",
                    Stmt::Load { .. } => "load",
                    Stmt::Call { .. } => "call",
                    Stmt::Return { .. } => "return",
                    Stmt::PrimInit { .. } => "literal",
                    Stmt::ReturnSame { .. } => "identity",
                });
            }
        }
    }
    assert_eq!(kinds.len(), 8, "{kinds:?}");
}

#[test]
fn interfaces_depend_only_on_signatures() {
    for b in corpus() {
        let mut hollow: Program = b.library.clone();
        for f in &mut hollow.functions {
            f.body.retain(|s| matches!(s, Stmt::Return { .. }));
        }
        let describe = |p: &Program| {
            let i = library_interface(p);
            let names: Vec<String> = i.visible.iter().map(|v| i.var_name(v).to_string()).collect();
            format!("{:?} {:?} {names:?}", i.functions, i.visible)
        };
        assert_eq!(describe(&hollow), describe(&b.library), "{}", b.name);
    }
}

#[test]
fn distinct_specs_give_distinct_rules() {
    for b in corpus() {
        let iface = library_interface(&b.library);
        let mut seen: BTreeMap<String, String> = BTreeMap::new();
        for s in all_specs(&iface, 3) {
            let rule = format!("{:?}", to_rule(&s).unwrap());
            if let Some(prev) = seen.insert(rule, s.display(&iface)) {
                panic!("{}: {prev} and {} share a rule", b.name, s.display(&iface));
            }
        }
    }
}

#[test]
fn oracle_verdicts_are_reproducible() {
    for b in corpus() {
        let cfg = OracleConfig { strategy: Strategy::Instantiate, fuel: DEFAULT_FUEL };
        let (first, second) = (DynamicOracle::new(&b.library, cfg), DynamicOracle::new(&b.library, cfg));
        for s in all_specs(&library_interface(&b.library), 2) {
            assert_eq!(first.judge(&s), second.judge(&s), "{}", b.name);
        }
    }
}
