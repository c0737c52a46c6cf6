mod common;

use common::Example;
use xkb_core::language::{parse_rule_text, ClassAtom, Formula};
use xkb_core::semantics::{
    check_complete, class_extent, eval, satisfiable, tau_coherence, CoherenceValue, Extent,
    Reasoner, Scope,
};

#[test]
fn pointwise_eval() {
    let p = Example::load();
    let (f1, _) = parse_rule_text("f1=1 => c1").unwrap();
    assert!(eval(&f1, &p.schema, &p.x(1)).unwrap());
    assert!(eval(&Formula::True, &p.schema, &p.x(3)).unwrap());
    assert!(eval(&Formula::not(f1), &p.schema, &p.x(2)).unwrap());
}

#[test]
fn dataset_and_full_extents() {
    let p = Example::load();
    let ds = Reasoner::dataset(&p.table);
    let (b, _) = parse_rule_text("f1=1 & f3=0 => c1").unwrap();
    assert_eq!(ds.extent(&b).unwrap(), Extent::Dataset(vec![p.x(1), p.x(5)]));
    assert!(ds.extent(&Formula::False).unwrap().is_empty());

    let full = Reasoner::full(&p.schema);
    let (b, _) = parse_rule_text("f2=1 | f3=1 => c1").unwrap();
    let e = full.extent(&b).unwrap();
    assert_eq!(e.size(), 6);
    assert!(!e.contains(&p.point(&["0", "0", "0"])));
    assert!(!e.contains(&p.point(&["1", "0", "0"])));
    assert!(e.contains(&p.point(&["0", "0", "1"])));
}

#[test]
fn class_extents() {
    let p = Example::load();
    let c = |s: &str| Formula::atom(ClassAtom(s.into()));
    assert_eq!(class_extent(&Formula::not(c("c1")), &p.schema).unwrap().names(&p.schema), ["c2", "c3"]);
    assert!(class_extent(&Formula::True, &p.schema).unwrap().is_full());
    assert!(class_extent(&Formula::and([c("c1"), c("c2")]), &p.schema).unwrap().is_empty());
}

#[test]
fn satisfiability() {
    let p = Example::load();
    let (rr, rx) = (p.rule("rr"), p.rule("rx"));
    let w = satisfiable(&Formula::and([rr.body.clone(), rx.body.clone()]), &p.schema).unwrap().unwrap();
    assert_eq!(&w.values(&p.schema)[..2], ["1", "1"]);
    let (f, _) = parse_rule_text("f1=1 & !f1=1 => c1").unwrap();
    assert!(satisfiable(&f, &p.schema).unwrap().is_none());
    let covers = Formula::or(p.rules(&["r1", "r4", "rx"]).into_iter().map(|r| r.body));
    let q = Formula::and([rr.body, Formula::not(covers)]);
    assert!(satisfiable(&q, &p.schema).unwrap().is_none());
}

#[test]
fn conflicts() {
    let p = Example::load();
    let full = Reasoner::full(&p.schema);
    let w = full.conflict(&p.rule("rz"), &p.rule("r3")).unwrap().unwrap();
    assert_eq!(w.point, ["1", "0", "1"]);
    assert!(full.conflict(&p.rule("rx"), &p.rule("ry")).unwrap().is_none());
    assert!(Reasoner::dataset(&p.table).conflict(&p.rule("rx"), &p.rule("ry")).unwrap().is_none());
    let w = full.conflict(&p.rule("rp"), &p.rule("ry")).unwrap().unwrap();
    assert_eq!(w.point, ["0", "0", "1"]);
    let w2 = full.conflict(&p.rule("ry"), &p.rule("rp")).unwrap().unwrap();
    assert_eq!(w2.point, w.point);
}

#[test]
fn consistency() {
    let p = Example::load();
    let full = Reasoner::full(&p.schema);
    assert!(full.check_consistency(&p.kb.all_rules()).unwrap().consistent);
    let rep = full.check_consistency(&p.rules(&["rz", "r5"])).unwrap();
    assert!(!rep.consistent);
    assert_eq!(rep.edges.len(), 1);
    assert!(full.check_consistency(&p.rules(&["rq"])).unwrap().consistent);
    let (b, _) = parse_rule_text("f1=1 => c1").unwrap();
    let empty_head = xkb_core::language::Rule::new("e", b, Formula::False, xkb_core::language::Origin::Feedback);
    let rep = full.check_consistency(&[empty_head]).unwrap();
    assert_eq!(rep.self_loops.len(), 1);
}

#[test]
fn enforcement() {
    let p = Example::load();
    let ds = Reasoner::dataset(&p.table);
    assert!(ds.enforces(&p.rules(&["rx"]), &p.rules(&["r1"])).unwrap().holds);
    let rep = ds.enforces(&p.rules(&["rx"]), &p.rules(&["r1", "ry"])).unwrap();
    let ce = rep.counterexample.unwrap();
    assert_eq!(ce.rule, "ry");
    let xs: Vec<Vec<String>> = [2, 3, 6].iter().map(|&i| p.x(i).value_strings(&p.schema)).collect();
    assert!(xs.contains(&ce.point));
    let l = p.rules(&["r2", "r3", "r6", "rx"]);
    let k = p.rules(&["r1", "ry"]);
    assert!(ds.enforces(&l, &k).unwrap().holds);
    let rep = Reasoner::full(&p.schema).enforces(&l, &k).unwrap();
    assert_eq!(rep.counterexample.unwrap().point, ["0", "0", "1"]);
}

#[test]
fn coherence() {
    let p = Example::load();
    assert_eq!(tau_coherence(&p.rule("ry"), &p.table).unwrap(), CoherenceValue::Ratio { num: 5, den: 5 });
    let rz = tau_coherence(&p.rule("rz"), &p.table).unwrap();
    assert_eq!(rz, CoherenceValue::Ratio { num: 2, den: 4 });
    assert!(!rz.is_coherent());
    let (b, h) = parse_rule_text("f1=0 & f2=0 & f3=0 => c1").unwrap();
    let r = xkb_core::language::Rule::new("v", b, h, xkb_core::language::Origin::Explanation);
    assert_eq!(tau_coherence(&r, &p.table).unwrap(), CoherenceValue::Vacuous);
}

#[test]
fn completeness() {
    let p = Example::load();
    assert!(check_complete(p.kb.kd(), &p.table).complete);
    let rep = check_complete(&p.kb.kd()[..5], &p.table);
    assert!(!rep.complete);
    assert_eq!(rep.missing, vec![p.x(6).value_strings(&p.schema)]);
    let mut with_rx = p.kb.kd().to_vec();
    with_rx.push(p.rule("rx"));
    let rep = check_complete(&with_rx, &p.table);
    assert_eq!(rep.extras, ["rx"]);
    assert!(!rep.complete);
}

#[test]
fn grid_limit() {
    use xkb_core::language::{Feature, Schema};
    let values: Vec<String> = (0..64).map(|i| i.to_string()).collect();
    let features = (0..4).map(|i| Feature { name: format!("g{i}"), domain: values.clone() }).collect();
    let schema = Schema::new(features, vec!["a".into(), "b".into()]).unwrap();
    let (b, _) = parse_rule_text("g0=1 | g1=1 | g2=1 | g3=1 => a").unwrap();
    let err = Reasoner { schema: &schema, scope: Scope::FullUniverse }.extent(&b).unwrap_err();
    assert!(err.to_string().contains("g0, g1, g2, g3"), "{err}");
}
