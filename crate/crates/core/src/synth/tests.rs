use super::*;
use crate::ir::parse_program;

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
  fn id(this, ob) -> r {
    r = ob;
  }
}
";

fn synth() -> Synthesizer {
    Synthesizer::new(&parse_program(BOX).unwrap())
}

fn spec(sy: &Synthesizer, text: &str) -> PathSpec {
    PathSpec::parse(&sy.iface, text).unwrap()
}

fn lines(t: &UnitTest) -> Vec<String> {
    t.render().lines().map(|l| l.trim().to_string()).collect()
}

#[test]
fn skeleton_has_one_call_per_pair() {
    let sy = synth();
    let sk = build_skeleton(&sy.iface, &spec(&sy, "ob_set this_set this_get r_get")).unwrap();
    assert_eq!(sk.calls.len(), 2);
    assert_eq!(sk.holes.len(), 4);
    let sk = build_skeleton(&sy.iface, &spec(&sy, "ob_set this_set this_clone r_clone this_get r_get")).unwrap();
    let funcs: Vec<&str> = sk.calls.iter().map(|c| c.func.short()).collect();
    assert_eq!(funcs, ["set", "clone", "get"]);
    let sk = build_skeleton(&sy.iface, &spec(&sy, "ob_id r_id")).unwrap();
    assert_eq!(sk.calls.len(), 1);
}

#[test]
fn ill_formed_specs_have_no_skeleton() {
    let sy = synth();
    let s = spec(&sy, "ob_set this_set");
    assert!(matches!(build_skeleton(&sy.iface, &s), Err(SynthError::Spec(_))));
}

#[test]
fn clone_spec_partitions_match_the_worked_example() {
    let sy = synth();
    let s = spec(&sy, "ob_set this_set this_clone r_clone this_get r_get");
    let f = sy.fill(&s).unwrap();
    let mut parts: Vec<(String, Vec<String>)> = f
        .components
        .iter()
        .map(|c| (c.name.clone(), c.holes.iter().map(|&h| sy.iface.name(&f.skeleton.holes[h].var)).collect()))
        .collect();
    parts.sort();
    assert_eq!(
        parts,
        vec![
            ("box".to_string(), vec!["this_set".to_string(), "this_clone".to_string()]),
            ("boxClone".to_string(), vec!["r_clone".to_string(), "this_get".to_string()]),
            ("in".to_string(), vec!["ob_set".to_string()]),
            ("out".to_string(), vec!["r_get".to_string()]),
        ]
    );
}

#[test]
fn self_loop_shares_one_receiver() {
    let sy = synth();
    let s = spec(&sy, "ob_set this_set this_clone this_clone this_get r_get");
    let f = sy.fill(&s).unwrap();
    let recv = f.comp_of[f.skeleton.hole_of(0, &VisibleVar::param("Box.set", 0))];
    assert_eq!(f.comp_of[f.skeleton.hole_of(1, &VisibleVar::param("Box.clone", 0))], recv);
    assert_eq!(f.comp_of[f.skeleton.hole_of(2, &VisibleVar::param("Box.get", 0))], recv);
    assert_eq!(f.components.len(), 4);
}

#[test]
fn single_pair_gives_singleton_classes() {
    let sy = synth();
    let f = sy.fill(&spec(&sy, "this_get r_get")).unwrap();
    assert_eq!(f.components.len(), 2);
    assert!(f.components.iter().all(|c| c.holes.len() == 1));
}

#[test]
fn box_spec_test_matches_the_worked_example() {
    let sy = synth();
    let t = sy.synthesize(&spec(&sy, "ob_set this_set this_get r_get"), Strategy::Null).unwrap();
    assert_eq!(
        lines(&t),
        [
            "fn test() {",
            "in = new Object;",
            "box = new Box;",
            "Box.set(box, in);",
            "out = Box.get(box);",
            "return in == out;",
            "}",
        ]
    );
    assert_eq!(t.result_pair, ("in".to_string(), "out".to_string()));
}

#[test]
fn clone_spec_schedules_set_before_clone() {
    let sy = synth();
    let t = sy.synthesize(&spec(&sy, "ob_set this_set this_clone r_clone this_get r_get"), Strategy::Null).unwrap();
    assert_eq!(t.order, [0, 1, 2]);
    assert_eq!(
        lines(&t)[3..6],
        ["Box.set(box, in);", "boxClone = Box.clone(box);", "out = Box.get(boxClone);"]
    );
}

#[test]
fn backward_transfer_forces_the_later_call_first() {
    let sy = synth();
    let s = spec(&sy, "ob_set this_set this_get r_get");
    let t = sy.synthesize_unchecked(&s, Strategy::Null).unwrap();
    assert_eq!(t.order, [0, 1]);
    // this_get <- r_clone: clone must run before get although it comes second.
    let s = spec(&sy, "this_get this_get r_clone r_clone");
    let t = sy.synthesize_unchecked(&s, Strategy::Null).unwrap();
    assert_eq!(t.order, [1, 0]);
}

#[test]
fn identity_pair_with_null_receiver() {
    let sy = synth();
    let t = sy.synthesize(&spec(&sy, "ob_id r_id"), Strategy::Null).unwrap();
    assert_eq!(t.stmts.len(), 4);
    assert_eq!(t.stmts[1], Stmt::PrimInit { dst: "box".into(), lit: Literal::Null });
}

#[test]
fn constructor_with_argument_is_instantiated_recursively() {
    let lib = parse_program(
        "library Box {\n  field f;\n  ctor init(this, val) {\n    this.f = val;\n  }\n  fn get(this) -> r {\n    r = this.f;\n  }\n}\n",
    )
    .unwrap();
    let hg = ConstructorHypergraph::build(&lib);
    let t = hg.shortest_tree(&Ty::Ref(TypeId::new("Box"))).unwrap();
    assert_eq!(t.edge.ctor, Some(FuncId::new("Box.init")));
    assert_eq!(t.args.len(), 1);
    assert_eq!(t.args[0].edge.head, Ty::object());
    assert_eq!(t.size(), 2);
    let sy = Synthesizer::new(&lib);
    let s = PathSpec::parse(&sy.iface, "this_get r_get").unwrap();
    let test = sy.synthesize(&s, Strategy::Instantiate).unwrap();
    let text = lines(&test);
    assert!(text.contains(&"inVal = new Object;".to_string()), "{text:?}");
    assert!(text.contains(&"Box.init(in, inVal);".to_string()), "{text:?}");
}

#[test]
fn self_recursive_constructor_is_unreachable() {
    let lib = parse_program(
        "library T {\n  ctor init(this, other: T) {\n  }\n  fn get(this) -> r {\n  }\n}\n",
    )
    .unwrap();
    let hg = ConstructorHypergraph::build(&lib);
    assert!(hg.shortest_tree(&Ty::Ref(TypeId::new("T"))).is_none());
    assert!(!hg.costs().contains_key(&Ty::Ref(TypeId::new("T"))));
    // The null fallback still allocates the compared receiver.
    let sy = Synthesizer::new(&lib);
    let s = PathSpec::parse(&sy.iface, "this_get r_get").unwrap();
    let test = sy.synthesize(&s, Strategy::Instantiate).unwrap();
    assert!(lines(&test).contains(&"T.init(in, inOther);".to_string()));
}

#[test]
fn primitive_index_defaults_to_zero() {
    let lib = parse_program(
        "library List {\n  field elems;\n  fn add(this, ob) {\n    this.elems = ob;\n  }\n  fn get(this, index: int) -> r {\n    r = this.elems;\n  }\n}\n",
    )
    .unwrap();
    let sy = Synthesizer::new(&lib);
    let s = PathSpec::parse(&sy.iface, "ob_add this_add this_get r_get").unwrap();
    let t = sy.synthesize(&s, Strategy::Null).unwrap();
    let text = lines(&t);
    assert!(text.contains(&"index = 0;".to_string()));
    assert!(text.contains(&"out = List.get(list, index);".to_string()));
}

#[test]
fn mismatched_types_are_rejected() {
    let sy = synth();
    // r_get is an Object but this_clone expects a Box.
    let s = spec(&sy, "ob_set this_set this_get r_get this_clone r_clone");
    assert!(matches!(sy.fill(&s), Err(SynthError::TypeMismatch(_))));
}

#[test]
fn chained_self_loop_is_unwitnessable() {
    let sy = synth();
    let s = spec(&sy, "ob_set this_set this_clone this_clone this_get r_get");
    assert!(matches!(sy.synthesize(&s, Strategy::Null), Err(SynthError::Unwitnessable(_))));
    assert!(sy.synthesize_unchecked(&s, Strategy::Null).is_ok());
}

#[test]
fn input_used_twice_is_unattributable() {
    let sy = synth();
    // The compared receiver is also passed to get, so equality says nothing
    // about this_clone alone.
    let s = spec(&sy, "this_clone this_clone this_get r_get");
    assert!(matches!(sy.synthesize(&s, Strategy::Null), Err(SynthError::Unattributable(_))));
}

#[test]
fn predicted_edges_equal_the_premise_for_the_box_family() {
    let sy = synth();
    for text in [
        "ob_set this_set this_get r_get",
        "ob_set this_set this_clone r_clone this_get r_get",
        "ob_set this_set this_clone r_clone this_clone r_clone this_get r_get",
    ] {
        let s = spec(&sy, text);
        let f = sy.fill(&s).unwrap();
        assert_eq!(predicted_edges(&f), canonical_premise(&s).unwrap(), "{text}");
    }
}

#[test]
fn strategy_names_round_trip() {
    for s in [Strategy::Null, Strategy::Instantiate] {
        assert_eq!(s.to_string().parse::<Strategy>().unwrap(), s);
    }
    assert!("eager".parse::<Strategy>().is_err());
}
