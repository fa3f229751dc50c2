use std::collections::BTreeSet;

use proptest::prelude::*;

use super::*;
use crate::interpreter::DEFAULT_FUEL;
use crate::ir::{library_interface, parse_program};
use crate::oracle::{DynamicOracle, OracleConfig};
use crate::pathspec::{diff_strings, Sym};
use crate::synth::Strategy;
use proptest::strategy::Strategy as PropStrategy;

const BOX: &str = "library Box {
  field f;
  fn set(this, ob) {
    this.f = ob;
  }
  fn get(this) -> r {
    r = this.f;
  }
  fn clone(this) -> r: Box {
    b = new Box;
    t = this.f;
    b.f = t;
    r = b;
  }
}
";

const BOX_NO_CLONE: &str = "library Box {
  field f;
  fn set(this, ob) {
    this.f = ob;
  }
  fn get(this) -> r {
    r = this.f;
  }
}
";

const VOID: &str = "library Sink {
  field f;
  fn put(this, ob) {
    this.f = ob;
  }
}
";

fn iface(src: &str) -> Interface {
    library_interface(&parse_program(src).unwrap())
}

fn spec(i: &Interface, text: &str) -> PathSpec {
    PathSpec::parse(i, text).unwrap()
}

fn null_oracle(src: &str) -> DynamicOracle {
    DynamicOracle::new(&parse_program(src).unwrap(), OracleConfig { strategy: Strategy::Null, fuel: DEFAULT_FUEL })
}

fn cfg(budget: usize, seed: u64) -> LearnerConfig {
    LearnerConfig { budget, seed, ..LearnerConfig::default() }
}

/// `ob_set this_set (this_clone r_clone)^k this_get r_get` for every `k`
/// that fits in `max_len` variables, built directly.
fn clone_loop_language(i: &Interface, max_len: usize) -> BTreeSet<PathSpec> {
    (0..)
        .map(|k| {
            let mut t = String::from("ob_set this_set");
            for _ in 0..k {
                t.push_str(" this_clone r_clone");
            }
            t.push_str(" this_get r_get");
            spec(i, &t)
        })
        .take_while(|s| s.seq.len() <= max_len)
        .collect()
}

fn chain_positives(i: &Interface) -> BTreeSet<PathSpec> {
    [spec(i, "ob_set this_set this_clone r_clone this_get r_get")].into_iter().collect()
}

#[test]
fn pta_shapes() {
    let i = iface(BOX);
    assert_eq!(build_pta(&i, &chain_positives(&i)).num_states(), 7);
    let single: BTreeSet<_> = [spec(&i, "ob_set this_set this_get r_get")].into_iter().collect();
    let a = build_pta(&i, &single);
    assert_eq!(a.num_states(), 5);
    assert_eq!(a.accepting.len(), 1);
    let shared: BTreeSet<_> =
        [spec(&i, "ob_set this_set this_get r_get"), spec(&i, "ob_set this_set this_clone r_clone")].into_iter().collect();
    assert!(build_pta(&i, &shared).num_states() < 1 + 4 + 4);
}

#[test]
fn merging_after_clone_into_receiver_state_makes_a_loop() {
    let i = iface(BOX);
    let pta = build_pta(&i, &chain_positives(&i));
    let looped = pta.merge(4, 2);
    let got: BTreeSet<_> = looped.enumerate(12).into_iter().collect();
    assert_eq!(got, clone_loop_language(&i, 12));
    // The added strings are the unrollings other than the one observed.
    let added: BTreeSet<Vec<Sym>> = diff_strings(&looped, &pta, 8).into_iter().collect();
    let want: BTreeSet<Vec<Sym>> = clone_loop_language(&i, 8)
        .iter()
        .filter(|s| s.seq.len() != 6)
        .map(|s| pta.syms(&s.seq).unwrap())
        .collect();
    assert_eq!(added, want);
    assert!(diff_strings(&pta, &pta, 8).is_empty());
}

#[test]
fn merging_an_accepting_leaf_moves_acceptance() {
    let i = iface(BOX);
    let pta = build_pta(&i, &[spec(&i, "ob_set this_set this_get r_get")].into_iter().collect());
    let m = pta.merge(4, 1);
    assert!(m.accepting.contains(&1));
    assert!(!m.accepting.contains(&4));
}

#[test]
fn learn_generalizes_clone_chain() {
    let i = iface(BOX);
    let o = null_oracle(BOX);
    let l = learn(&i, &chain_positives(&i), &o, &cfg(0, 0));
    let got: BTreeSet<_> = l.automaton.enumerate(12).into_iter().collect();
    assert_eq!(got, clone_loop_language(&i, 12));
    assert!(l.trace.iter().any(|r| (r.q, r.p) == (4, 2) && r.verdict == MergeVerdict::Accepted));
}

#[test]
fn learn_without_clone_keeps_the_chain() {
    let i = iface(BOX_NO_CLONE);
    let o = null_oracle(BOX_NO_CLONE);
    let pos: BTreeSet<_> = [spec(&i, "ob_set this_set this_get r_get")].into_iter().collect();
    let l = learn(&i, &pos, &o, &cfg(0, 0));
    let got: BTreeSet<_> = l.automaton.enumerate(12).into_iter().collect();
    assert_eq!(got, pos);
    assert_eq!(l.automaton.num_states(), 5);
}

#[test]
fn learn_single_hop_spec_is_unchanged() {
    let i = iface(BOX);
    let o = null_oracle(BOX);
    let pos: BTreeSet<_> = [spec(&i, "this_clone r_clone")].into_iter().collect();
    let l = learn(&i, &pos, &o, &cfg(0, 0));
    assert_eq!(l.automaton.num_states(), 3);
    assert_eq!(l.automaton.enumerate(12), pos.into_iter().collect::<Vec<_>>());
}

#[test]
fn rejected_merges_are_traced() {
    let i = iface(BOX);
    let o = null_oracle(BOX);
    let l = learn(&i, &chain_positives(&i), &o, &cfg(0, 0));
    assert!(l.trace.iter().any(|r| r.verdict == MergeVerdict::IllFormed));
    assert!(l.trace.iter().all(|r| r.q != 0));
}

#[test]
fn zero_budget_and_void_library_give_nothing() {
    let i = iface(BOX);
    let o = null_oracle(BOX);
    assert!(sample_random(&i, &o, &cfg(0, 1)).is_empty());
    assert!(sample_mcts(&i, &o, &cfg(0, 1)).is_empty());
    let v = iface(VOID);
    let ov = null_oracle(VOID);
    assert!(sample_random(&v, &ov, &cfg(100, 1)).is_empty());
    assert!(sample_mcts(&v, &ov, &cfg(100, 1)).is_empty());
}

#[test]
fn random_sampling_finds_the_box_spec() {
    let i = iface(BOX);
    let o = null_oracle(BOX);
    let pos = sample_random(&i, &o, &cfg(10_000, 7));
    assert!(pos.contains(&spec(&i, "ob_set this_set this_get r_get")));
    assert!(pos.iter().all(|s| s.is_well_formed() && s.seq.len() <= 8));
}

#[test]
fn phase_seeds_differ_and_repeat() {
    assert_eq!(phase_seed(7, 0), phase_seed(7, 0));
    assert_ne!(phase_seed(7, 0), phase_seed(7, 1));
    assert_ne!(phase_seed(7, 0), phase_seed(8, 0));
}

#[test]
fn fresh_tree_is_uniform() {
    let i = iface(BOX);
    let t = MctsTree::new(0.5);
    let p = t.probabilities(&i, &[]);
    assert_eq!(p.len(), i.visible.len());
    for x in p {
        assert!((x - 1.0 / i.visible.len() as f64).abs() < 1e-12);
    }
}

#[test]
fn one_accept_moves_root_score_to_alpha() {
    let i = iface(BOX);
    let mut t = MctsTree::new(0.5);
    let s = spec(&i, "ob_set this_set this_get r_get");
    t.update(&i, &s.seq, true, 1.0);
    let ob = Choice::Var(i.resolve("ob_set").unwrap());
    assert_eq!(t.score(&i, &[], &ob), 0.5);
    assert_eq!(t.score(&i, &s.seq, &Choice::Terminate), 0.5);
    let other = Choice::Var(i.resolve("this_get").unwrap());
    assert_eq!(t.score(&i, &[], &other), 0.0);
}

#[test]
fn sampling_is_deterministic_per_seed() {
    let i = iface(BOX);
    let a = sample_mcts(&i, &null_oracle(BOX), &cfg(2_000, 3));
    let b = sample_mcts(&i, &null_oracle(BOX), &cfg(2_000, 3));
    assert_eq!(a, b);
    let la = learn(&i, &a, &null_oracle(BOX), &cfg(0, 3));
    let lb = learn(&i, &b, &null_oracle(BOX), &cfg(0, 3));
    assert_eq!(la.automaton, lb.automaton);
}

#[test]
fn learned_language_contains_positives_and_passes_oracle() {
    let i = iface(BOX);
    let o = null_oracle(BOX);
    let c = cfg(3_000, 11);
    let pos = sample_mcts(&i, &o, &c);
    let l = learn(&i, &pos, &o, &c);
    for s in &pos {
        assert!(l.automaton.accepts(&s.seq), "{s}");
    }
    for s in l.automaton.enumerate(c.n_max) {
        assert!(o.check(&s), "{s}");
    }
}

/// Small automata over the Box alphabet, as transition lists.
fn small_automaton() -> impl PropStrategy<Value = SpecAutomaton> {
    let n_sym = iface(BOX).visible.len() as Sym;
    (2u32..=3)
        .prop_flat_map(move |n| {
            (
                Just(n),
                prop::collection::vec((0..n, 0..n_sym, 0..n), 0..10),
                prop::collection::btree_set(0..n, 0..=n as usize),
            )
        })
        .prop_map(|(n, ts, acc)| {
            let mut a = SpecAutomaton::for_interface(&iface(BOX));
            for _ in 1..n {
                a.add_state();
            }
            for (p, s, q) in ts {
                a.add_transition(p, s, q);
            }
            a.accepting = acc;
            a
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn diff_equals_bounded_set_difference(a in small_automaton(), b in small_automaton()) {
        // Use the union so that `b`'s language is contained in the first.
        let mut u = a.clone();
        let off = u.num_states() as u32;
        for q in b.states().skip(1) {
            while u.num_states() as u32 <= q + off {
                u.add_state();
            }
        }
        let start = u.start;
        let map = |q: u32| if q == b.start { start } else { q + off };
        for (p, s, q) in b.transitions() {
            u.add_transition(map(p), s, map(q));
        }
        for &f in &b.accepting {
            u.accepting.insert(map(f));
        }
        let n = 6;
        let got: BTreeSet<Vec<Sym>> = diff_strings(&u, &b, n).into_iter().collect();
        let lu: BTreeSet<Vec<Sym>> = u.enumerate_words(n).into_iter().collect();
        let lb: BTreeSet<Vec<Sym>> = b.enumerate_words(n).into_iter().collect();
        let want: BTreeSet<Vec<Sym>> = lu.difference(&lb).cloned().collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn merges_only_add_strings(a in small_automaton(), q in 1u32..3, p in 0u32..3) {
        prop_assume!(q != p && (q as usize) < a.num_states() && (p as usize) < a.num_states());
        let m = a.merge(q, p);
        let before: BTreeSet<_> = a.enumerate_words(6).into_iter().collect();
        let after: BTreeSet<_> = m.enumerate_words(6).into_iter().collect();
        prop_assert!(before.is_subset(&after));
    }
}
