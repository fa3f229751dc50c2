use std::collections::BTreeSet;

use proptest::prelude::*;

use super::*;
use crate::ir::parse_program;
use crate::pathspec::all_specs;

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
  fn id(this, p) -> r {
    r = p;
  }
}
";

const CLIENT: &str = "fn main() {
  in = new Object;
  other = new Object;
  box = new Box;
  Box.set(box, in);
  copy = Box.clone(box);
  out = Box.get(copy);
  same = Box.get(box);
  echo = Box.id(box, other);
  spare = new Box;
  Box.set(spare, echo);
  back = Box.get(spare);
}
";

fn lib() -> Program {
    parse_program(BOX).unwrap()
}

fn client() -> Program {
    parse_program(&format!("{BOX}\n{CLIENT}")).unwrap()
}

fn iface() -> Interface {
    library_interface(&lib())
}

fn spec(text: &str) -> PathSpec {
    PathSpec::parse(&iface(), text).unwrap()
}

fn stmts(src: &str) -> Vec<Stmt> {
    let p = parse_program(&format!("library Box {{\n  field f;\n  field __g1; // ghost\n  field __g2; // ghost\n  fn m(this, ob, p) -> r {{\n{src}\n  }}\n}}")).unwrap();
    let mut body = p.functions[0].body.clone();
    body.pop();
    body
}

fn loop_automaton() -> SpecAutomaton {
    let i = iface();
    let mut a = SpecAutomaton::for_interface(&i);
    let s = |n: &str| a.sym(&i.resolve(n).unwrap()).unwrap();
    let (ob, this_set, this_clone, r_clone, this_get, r_get) =
        (s("ob_set"), s("this_set"), s("this_clone"), s("r_clone"), s("this_get"), s("r_get"));
    let q: Vec<u32> = (0..5).map(|_| a.add_state()).collect();
    a.add_transition(0, ob, q[0]);
    a.add_transition(q[0], this_set, q[1]);
    a.add_transition(q[1], this_clone, q[2]);
    a.add_transition(q[2], r_clone, q[1]);
    a.add_transition(q[1], this_get, q[3]);
    a.add_transition(q[3], r_get, q[4]);
    a.accepting.insert(q[4]);
    a
}

#[test]
fn box_spec_stores_and_loads_one_ghost_field() {
    let f = single_spec_to_fragments(&lib(), &spec("ob_set this_set this_get r_get")).unwrap();
    assert_eq!(f.body("Box.set"), stmts("this.__g1 = ob;").as_slice());
    assert_eq!(f.body("Box.get"), stmts("r = this.__g1;").as_slice());
    assert!(f.body("Box.clone").is_empty());
    assert_eq!(f.ghost_fields, [FieldId::new("__g1")].into_iter().collect());
}

#[test]
fn identity_spec_is_a_copy() {
    let f = single_spec_to_fragments(&lib(), &spec("p_id r_id")).unwrap();
    assert_eq!(f.body("Box.id"), stmts("r = p;").as_slice());
    assert!(f.ghost_fields.is_empty());
    let a = SpecAutomaton::prefix_tree(iface().visible, [&spec("p_id r_id")]);
    assert_eq!(fsa_to_fragments(&lib(), &a).unwrap(), f);
}

#[test]
fn direct_translation_matches_chain_automaton() {
    for text in ["ob_set this_set this_get r_get", "ob_set this_set this_id this_id this_get r_get"] {
        let s = spec(text);
        let direct = single_spec_to_fragments(&lib(), &s).unwrap();
        let chain = fsa_to_fragments(&lib(), &SpecAutomaton::prefix_tree(iface().visible, [&s])).unwrap();
        assert_eq!(direct, chain, "{text}");
    }
}

#[test]
fn clone_loop_copies_the_field() {
    let f = fsa_to_fragments(&lib(), &loop_automaton()).unwrap();
    assert_eq!(f.body("Box.set"), stmts("this.__g1 = ob;").as_slice());
    assert_eq!(f.body("Box.get"), stmts("r = this.__g1;").as_slice());
    let clone: Vec<String> = f.body("Box.clone").iter().map(|s| format!("{s:?}")).collect();
    assert_eq!(clone.len(), 4, "{clone:?}");
    let body = f.body("Box.clone");
    assert!(body.contains(&Stmt::Load { dst: "__t3".into(), base: "this".into(), field: FieldId::new("__g1") }));
    assert!(body.contains(&Stmt::Store { base: "__d1".into(), field: FieldId::new("__g1"), src: "__t3".into() }));
    assert!(body.contains(&Stmt::Assign { dst: "r".into(), src: "__d1".into() }));
}

#[test]
fn unrolled_union_uses_a_field_per_depth() {
    let specs = [
        spec("ob_set this_set this_get r_get"),
        spec("ob_set this_set this_clone r_clone this_get r_get"),
        spec("ob_set this_set this_clone r_clone this_clone r_clone this_get r_get"),
    ];
    let f = fsa_to_fragments(&lib(), &SpecAutomaton::prefix_tree(iface().visible, specs.iter())).unwrap();
    let stores: BTreeSet<&FieldId> = f
        .body("Box.clone")
        .iter()
        .filter_map(|s| match s {
            Stmt::Store { field, .. } => Some(field),
            _ => None,
        })
        .collect();
    assert_eq!(stores.len(), 2);
    let loads = f.body("Box.get").iter().filter(|s| matches!(s, Stmt::Load { .. })).count();
    assert_eq!(loads, 3);
    assert_eq!(f.ghost_fields.len(), 3);
}

#[test]
fn fragments_are_valid_and_fresh() {
    let f = fsa_to_fragments(&lib(), &loop_automaton()).unwrap();
    let text = f.render();
    assert!(text.contains("// ghost"));
    let reparsed = parse_program(&text).unwrap();
    assert_eq!(reparsed, f.program);
    let l = lib();
    let original: BTreeSet<&FieldId> = l.fields().collect();
    for g in &f.ghost_fields {
        assert!(!original.contains(g));
        assert!(g.as_str().starts_with(GHOST_PREFIX));
    }
    for s in f.program.sites() {
        assert!(s.is_fragment(), "{s}");
    }
}

#[test]
fn user_fields_cannot_take_the_ghost_prefix() {
    assert!(parse_program("library B {\n  field __g1;\n  fn m(this) { }\n}").is_err());
}

#[test]
fn ill_formed_automaton_is_reported() {
    let i = iface();
    let mut a = SpecAutomaton::for_interface(&i);
    let q1 = a.add_state();
    let q2 = a.add_state();
    a.add_transition(0, a.sym(&i.resolve("ob_set").unwrap()).unwrap(), q1);
    a.add_transition(q1, a.sym(&i.resolve("this_set").unwrap()).unwrap(), q2);
    a.accepting.insert(q2);
    assert!(matches!(fsa_to_fragments(&lib(), &a), Err(CodegenError::IllFormed(_))));
}

#[test]
fn loop_fragments_match_rules_on_client() {
    let a = loop_automaton();
    let frags = fsa_to_fragments(&lib(), &a).unwrap();
    let via_frags = fragments_points_to(&client(), &frags);
    let via_rules = rules_points_to(&client(), &a.enumerate(12)).unwrap();
    assert_eq!(via_frags, via_rules);
    assert_eq!(automaton_points_to(&client(), &a), via_rules);
    let out = VarId::new("main", "out");
    assert!(via_frags.contains(&(out, AllocSiteId::new("o_in"))));
}

#[test]
fn empty_language_gives_no_library_flow() {
    let a = SpecAutomaton::for_interface(&iface());
    let frags = fsa_to_fragments(&lib(), &a).unwrap();
    let pt = fragments_points_to(&client(), &frags);
    assert!(!pt.iter().any(|(v, _)| v.name == "out"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fragments_agree_with_rules(picks in prop::collection::btree_set(0usize..400, 1..5)) {
        let all = all_specs(&iface(), 3);
        let chosen: Vec<PathSpec> = picks.into_iter().map(|i| all[i % all.len()].clone()).collect();
        let a = SpecAutomaton::prefix_tree(iface().visible, chosen.iter());
        let frags = fsa_to_fragments(&lib(), &a).unwrap();
        let via_frags = fragments_points_to(&client(), &frags);
        let via_rules = rules_points_to(&client(), &chosen).unwrap();
        prop_assert_eq!(&via_frags, &via_rules, "{:?}", chosen.iter().map(|s| s.display(&iface())).collect::<Vec<_>>());
    }
}
