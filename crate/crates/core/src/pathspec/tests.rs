use super::*;
use crate::ir::{library_interface, parse_program};

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

fn iface() -> Interface {
    library_interface(&parse_program(BOX).unwrap())
}

fn spec(text: &str) -> PathSpec {
    PathSpec::parse(&iface(), text).unwrap()
}

#[test]
fn box_spec_rule() {
    let i = iface();
    let r = to_rule(&spec("ob_set this_set this_get r_get")).unwrap();
    assert_eq!(
        r.premise,
        vec![(i.resolve("this_set").unwrap(), Nonterminal::Alias, i.resolve("this_get").unwrap())]
    );
    assert_eq!(
        r.conclusion,
        (i.resolve("ob_set").unwrap(), Nonterminal::Transfer, i.resolve("r_get").unwrap())
    );
}

#[test]
fn clone_spec_rule_has_transfer_premise() {
    let i = iface();
    let r = to_rule(&spec("ob_set this_set this_clone r_clone this_get r_get")).unwrap();
    assert_eq!(r.premise.len(), 2);
    assert_eq!(
        r.premise[1],
        (i.resolve("r_clone").unwrap(), Nonterminal::Transfer, i.resolve("this_get").unwrap())
    );
}

#[test]
fn identity_spec_has_empty_premise() {
    let r = to_rule(&spec("this_clone r_clone")).unwrap();
    assert!(r.premise.is_empty());
    let r = to_rule(&spec("r_clone r_clone")).unwrap();
    assert_eq!(r.conclusion.1, Nonterminal::Alias);
}

#[test]
fn ill_formed_specs_are_rejected() {
    assert!(matches!(to_rule(&spec("ob_set this_set")), Err(SpecError::IllFormed(_))));
    assert!(matches!(to_rule(&spec("ob_set r_get")), Err(SpecError::IllFormed(_))));
    assert!(matches!(to_rule(&spec("this_get r_get r_clone r_clone")), Err(SpecError::IllFormed(_))));
    assert!(matches!(to_rule(&spec("ob_set this_set this_get")), Err(SpecError::IllFormed(_))));
}

#[test]
fn choices_after_a_return() {
    let i = iface();
    let prefix = spec("this_get r_get").seq;
    let c = next_choices(&i, &prefix);
    assert_eq!(c.last(), Some(&Choice::Terminate));
    assert!(c.iter().all(|x| match x {
        Choice::Var(v) => !v.is_return(),
        Choice::Terminate => true,
    }));
    let mid = next_choices(&i, &spec("ob_set").seq);
    assert_eq!(mid.len(), 2);
}

#[test]
fn all_specs_are_well_formed_and_counted() {
    let i = iface();
    let one = all_specs(&i, 1);
    // Every (z, w) pair inside a function ending in a return.
    assert_eq!(one.len(), 4);
    assert!(all_specs(&i, 3).iter().all(|s| s.is_well_formed()));
}

#[test]
fn prefix_tree_accepts_exactly_its_inputs() {
    let i = iface();
    let specs = vec![spec("ob_set this_set this_get r_get"), spec("this_clone r_clone")];
    let a = SpecAutomaton::prefix_tree(i.visible.clone(), &specs);
    assert!(a.accepts(&specs[0].seq));
    assert!(a.accepts(&specs[1].seq));
    assert!(!a.accepts(&spec("ob_set this_set").seq));
    assert_eq!(a.enumerate(8), {
        let mut v = specs.clone();
        v.sort_by_key(|s| s.seq.len());
        v
    });
    assert_eq!(a.find_ill_formed(), None);
}

#[test]
fn ill_formed_loop_is_found() {
    let i = iface();
    let mut a = SpecAutomaton::prefix_tree(i.visible.clone(), &[spec("ob_set this_set this_get r_get")]);
    // ob_set looping on the start state accepts odd-length words.
    let ob = a.sym(&i.resolve("ob_set").unwrap()).unwrap();
    a.add_transition(0, ob, 0);
    let w = a.find_ill_formed().unwrap();
    assert!(!well_formed(&a.vars(&w)));
}

#[test]
fn json_round_trip() {
    let i = iface();
    let a = SpecAutomaton::prefix_tree(i.visible.clone(), &[spec("ob_set this_set this_get r_get")]);
    let j = a.to_json(&i);
    let text = serde_json::to_string(&j).unwrap();
    let back: AutomatonJson = serde_json::from_str(&text).unwrap();
    assert_eq!(SpecAutomaton::from_json(&i, &back).unwrap(), a);
}

fn words(a: &SpecAutomaton, texts: &[&str]) -> Vec<Vec<Sym>> {
    texts.iter().map(|t| a.syms(&spec(t).seq).unwrap()).collect()
}

#[test]
fn diff_of_loop_merge_is_the_pumped_words() {
    let i = iface();
    let pos = [spec("ob_set this_set this_get r_get"), spec("ob_set this_set this_clone r_clone this_get r_get")];
    let pta = SpecAutomaton::prefix_tree(i.visible.clone(), pos.iter());
    // State 2 is after `ob_set this_set`, state 6 after one clone hop.
    let a = pta.merge(6, 2);
    let d = diff_strings(&a, &pta, 8);
    assert_eq!(d, words(&pta, &["ob_set this_set this_clone r_clone this_clone r_clone this_get r_get"]));
    assert!(a.find_ill_formed().is_none());
}

#[test]
fn merged_view_matches_materialized_merge() {
    let i = iface();
    let pos = [spec("ob_set this_set this_get r_get"), spec("ob_set this_set this_clone r_clone this_get r_get")];
    let pta = SpecAutomaton::prefix_tree(i.visible.clone(), pos.iter());
    let wf = WfChecker::new(&pta.alphabet);
    for q in 1..pta.num_states() as u32 {
        for p in 0..q {
            let m = pta.merge(q, p);
            let view = MergedView { base: &pta, q, p };
            assert_eq!(find_ill_formed_in(&view, &wf), m.find_ill_formed(), "merge {q} into {p}");
            let mut e = DiffEnumerator::new(&view, &pta, &wf);
            let from_view: Vec<_> = (1..=8).flat_map(|l| e.layer(l, usize::MAX).0).collect();
            assert_eq!(from_view, diff_strings(&m, &pta, 8), "merge {q} into {p}");
        }
    }
}

#[test]
fn profile_never_rejects_a_well_formed_merge() {
    let i = iface();
    let pos = [
        spec("ob_set this_set this_get r_get"),
        spec("ob_set this_set this_clone r_clone this_get r_get"),
        spec("this_clone r_clone"),
    ];
    let pta = SpecAutomaton::prefix_tree(i.visible.clone(), pos.iter());
    let wf = WfChecker::new(&pta.alphabet);
    let prof = WfProfile::new(&pta, &wf).unwrap();
    for q in 1..pta.num_states() as u32 {
        for p in 0..q {
            if pta.merge(q, p).find_ill_formed().is_none() {
                assert!(prof.compatible(q, p), "merge {q} into {p}");
            }
        }
    }
}

#[test]
fn ill_formed_detects_empty_and_odd_words() {
    let i = iface();
    let mut a = SpecAutomaton::for_interface(&i);
    a.accepting.insert(0);
    assert_eq!(a.find_ill_formed(), Some(vec![]));
    let mut b = SpecAutomaton::for_interface(&i);
    let q = b.add_state();
    b.add_transition(0, b.sym(&i.resolve("ob_set").unwrap()).unwrap(), q);
    b.accepting.insert(q);
    assert_eq!(b.find_ill_formed().map(|w| w.len()), Some(1));
}
