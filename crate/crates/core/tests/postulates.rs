mod common;

use common::Example;
use xkb_core::language::parse_rule;
use xkb_core::postulates::matrix::{preset_expectations, run_matrix, run_trial, MatrixConfig};
use xkb_core::postulates::{check_all, check_postulate, oracle, Instance, PostulateId, Status};
use xkb_core::revision::{Operator, RevisionEnv, RevisionOutcome, Scenario, ScenarioConfig};
use xkb_core::semantics::{Reasoner, ScopeKind};

fn scenario(s: Scenario) -> Operator {
    Operator::Scenario { config: ScenarioConfig::preset(s, ScopeKind::Full) }
}

fn status(p: &Example, op: &Operator, input: &str, post: PostulateId) -> Status {
    let r = p.rule(input);
    let out: RevisionOutcome = op.revise(RevisionEnv::new(&p.table, ScopeKind::Full), &p.kb, &r).unwrap();
    let inst = Instance {
        table: &p.table,
        scope: ScopeKind::Full,
        kb: &p.kb,
        input: &r,
        outcome: &out,
        operator: op,
        paired: None,
    };
    check_postulate(post, inst).unwrap().status
}

#[test]
fn verdicts_on_worked_examples() {
    let p = Example::load();
    let s1 = scenario(Scenario::S1);
    let s3 = scenario(Scenario::S3);
    assert_eq!(status(&p, &s1, "rq", PostulateId::Success), Status::Holds);
    assert_eq!(status(&p, &s1, "rq", PostulateId::Relevance), Status::Holds);
    assert_eq!(status(&p, &s3, "rr", PostulateId::Success), Status::Fails);
    assert_eq!(status(&p, &s3, "rr", PostulateId::RelativeSuccess), Status::Holds);
    assert_eq!(status(&p, &s3, "rr", PostulateId::WeakSuccess), Status::NotApplicable);
    assert_eq!(status(&p, &s3, "rr", PostulateId::WeakProxySuccess), Status::Holds);

    let s1w = Operator::Scenario {
        config: ScenarioConfig::variants(Scenario::S1, ScopeKind::Full).remove(1),
    };
    assert_eq!(status(&p, &s1w, "rq", PostulateId::InclusionS1), Status::Holds);
    // Weakening rx keeps a rule outside K ∪ {rq}.
    assert_eq!(status(&p, &s1w, "rq", PostulateId::Inclusion), Status::Fails);
    assert_eq!(status(&p, &s1w, "rq", PostulateId::CoreRetainment), Status::Holds);
}

#[test]
fn failures_carry_witnesses() {
    let p = Example::load();
    let op = scenario(Scenario::S3);
    let r = p.rule("rr");
    let out = op.revise(RevisionEnv::new(&p.table, ScopeKind::Full), &p.kb, &r).unwrap();
    let verdicts = check_all(Instance {
        table: &p.table,
        scope: ScopeKind::Full,
        kb: &p.kb,
        input: &r,
        outcome: &out,
        operator: &op,
        paired: Some(&p.rule("rq")),
    })
    .unwrap();
    assert_eq!(verdicts.len(), 16);
    for v in &verdicts {
        assert_eq!(v.verdict.status == Status::Fails, v.verdict.witness.is_some(), "{}", v.postulate);
    }
}

#[test]
fn oracle_examples() {
    let p = Example::load();
    let k = p.kb.all_rules();
    let rq = p.rule("rq");
    let full = Reasoner::full(&p.schema);
    let fast = xkb_core::revision::remainders(&full, &k, &rq, 100).unwrap();
    assert_eq!(common::sorted(fast), oracle::remainders(&p.schema, ScopeKind::Full, None, &k, &rq).unwrap());

    let v = oracle::def3(&p.schema, ScopeKind::Full, None, &p.rules(&["rz", "r3"])).unwrap().unwrap();
    assert_eq!(v.point, p.x(3));

    // With head c3 the rule also clashes with ry at (1,1,1), so it differs
    // from rq; with head !c1 it clashes with exactly r4 and rx, as rq does.
    for (text, same) in [("q: f1=1 & f2=1 & f3=1 => c3", false), ("q: f1=1 & f2=1 & f3=1 => !c1", true)] {
        let q = parse_rule(&p.schema, text).unwrap();
        assert_eq!(oracle::uniformity_antecedent(&p.schema, ScopeKind::Full, None, &k, &rq, &q).unwrap(), same);
        assert_eq!(xkb_core::postulates::uniformity_antecedent(&full, &k, &rq, &q).unwrap(), same);
    }
    let rp = p.rule("rp");
    assert!(!oracle::uniformity_antecedent(&p.schema, ScopeKind::Full, None, &k, &rq, &rp).unwrap());
}

#[test]
fn relevance_fast_path_matches_subset_search() {
    let generator = Default::default();
    let mut checked = 0;
    for op in [scenario(Scenario::S1), scenario(Scenario::S2)] {
        for i in 0..150u64 {
            let run = run_trial(&op, 7_000 + i, &generator, ScopeKind::Full).unwrap();
            let t = &run.trial;
            let k = t.kb.all_rules();
            if k.len() > oracle::SUBSET_LIMIT {
                continue;
            }
            let result: Vec<String> = run.outcome.kb_after.all_rules().iter().map(|r| r.id.clone()).collect();
            let after_keys: Vec<_> = run.outcome.kb_after.all_rules().iter().map(|r| r.key()).collect();
            let inside = run.outcome.kb_after.all_rules().iter().all(|q| {
                q.key() == t.input.key() || k.iter().any(|x| x.key() == q.key())
            });
            let fast = |p: PostulateId| run.verdicts.iter().find(|v| v.postulate == p).unwrap().verdict.status;
            let mut rel = Status::Holds;
            let mut core = Status::Holds;
            for q in k.iter().filter(|q| !after_keys.contains(&q.key())) {
                let o = |w: &[String]| {
                    oracle::relevance_witness(&t.schema, ScopeKind::Full, None, &k, &t.input, w, q).unwrap()
                };
                let ids_in_result: Vec<String> = result
                    .iter()
                    .filter(|id| k.iter().any(|x| &x.id == *id) || **id == t.input.id)
                    .cloned()
                    .collect();
                if !inside || o(&ids_in_result).is_none() {
                    rel = Status::Fails;
                }
                if oracle::core_retainment_witness(&t.schema, ScopeKind::Full, None, &k, &t.input, q).unwrap().is_none() {
                    core = Status::Fails;
                }
                checked += 1;
            }
            assert_eq!(fast(PostulateId::Relevance), rel, "seed {}", t.seed);
            assert_eq!(fast(PostulateId::CoreRetainment), core, "seed {}", t.seed);
        }
    }
    assert!(checked > 50, "only {checked} removals exercised");
}

#[test]
fn preset_matrix_smoke() {
    let m = run_matrix(&MatrixConfig::presets(ScopeKind::Full, 11, 120));
    println!("{}", m.render());
    assert_eq!(m.unexpected(&preset_expectations()), Vec::<String>::new());
}
