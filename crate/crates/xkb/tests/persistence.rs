mod common;

use axum::http::StatusCode;
use common::*;
use serde_json::json;
use xkb::server::{router, AppState};
use xkb::session::{FeedbackRequest, SessionState};
use xkb::store::{Store, StoreError};
use xkb_core::postulates::generate::{trial, trial_seed, GeneratorConfig};
use xkb_core::revision::Scenario;
use xkb_core::semantics::ScopeKind;

#[tokio::test]
async fn restart_restores_sessions_and_history() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(AppState::with_store(Store::open(dir.path()).unwrap()).unwrap());
    let id = create(&app, example_session()).await;
    let other = create(&app, example_session()).await;
    let (_, p) = send(
        &app,
        "POST",
        &format!("/api/sessions/{id}/feedback"),
        Some(json!({"text": "rq: f1=1 & f2=1 & f3=1 => c2", "options": {"preset_only": true}})),
    )
    .await;
    let commit = json!({"proposal_id": p["proposal_id"], "outcome_id": p["candidates"][0]["outcome_id"]});
    let (status, _) = send(&app, "POST", &format!("/api/sessions/{id}/commit"), Some(commit)).await;
    assert_eq!(status, StatusCode::OK);

    let (_, list) = send(&app, "GET", "/api/sessions", None).await;
    let (_, state) = send(&app, "GET", &format!("/api/sessions/{id}"), None).await;
    let (_, hist) = send(&app, "GET", &format!("/api/sessions/{id}/history"), None).await;
    drop(app);

    let app = router(AppState::with_store(Store::open(dir.path()).unwrap()).unwrap());
    assert_eq!(send(&app, "GET", "/api/sessions", None).await.1, list);
    assert_eq!(list.as_array().unwrap().len(), 2);
    assert_eq!(send(&app, "GET", &format!("/api/sessions/{id}"), None).await.1, state);
    assert_eq!(send(&app, "GET", &format!("/api/sessions/{id}/history"), None).await.1, hist);
    assert_eq!(send(&app, "GET", &format!("/api/sessions/{other}/history"), None).await.1["entries"], json!([]));

    // Proposals are not persisted.
    let commit = json!({"proposal_id": p["proposal_id"], "outcome_id": p["candidates"][0]["outcome_id"]});
    let (status, _) = send(&app, "POST", &format!("/api/sessions/{id}/commit"), Some(commit)).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let log = std::fs::read_to_string(dir.path().join("history.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 1);
    assert!(log.contains(&id));
}

#[test]
fn corrupted_snapshot_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    let path = dir.path().join("sessions").join("broken.json");
    std::fs::write(&path, "{\"version\": 1, \"id\": ").unwrap();
    let err = store.load_all().unwrap_err();
    assert!(matches!(err, StoreError::Corrupt { .. }));
    assert!(err.to_string().contains("broken.json"), "{err}");
}

#[test]
fn tampered_kb_text_is_detected() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    let s = example_state("s1");
    store.save(&s).unwrap();
    let path = dir.path().join("sessions").join("s1.json");
    let text = std::fs::read_to_string(&path).unwrap().replace("rule ry: f2=1 | f3=1 => !c3;", "rule ry: f2=1 => !c3;");
    std::fs::write(&path, text).unwrap();
    let err = store.load_all().unwrap_err();
    assert!(err.to_string().contains("s1.json"), "{err}");
}

#[test]
fn corrupted_history_log_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    std::fs::write(dir.path().join("history.jsonl"), "not json\n").unwrap();
    let err = store.load_all().unwrap_err();
    assert!(err.to_string().contains("history.jsonl"), "{err}");
}

fn example_state(id: &str) -> SessionState {
    let req = serde_json::from_value(example_session()).unwrap();
    SessionState::create(req, id.into(), 1).unwrap()
}

#[test]
fn replay_reproduces_committed_history() {
    let mut s = example_state("p");
    let mut n = 0;
    let mut ids = || {
        n += 1;
        format!("id{n}")
    };
    for (text, scenario) in [
        ("rq: f1=1 & f2=1 & f3=1 => c2", Scenario::S1),
        ("rp: f1=0 & f2=0 & f3=1 => c3", Scenario::S2),
        ("f1=0 => !c3", Scenario::S3),
    ] {
        let req = FeedbackRequest { text: text.into(), scenario: Some(scenario), options: Default::default() };
        let p = s.propose(&req, &mut ids).unwrap();
        let last = p.candidates.last().unwrap().outcome_id.clone();
        s = s.commit(&p, &last, 2).unwrap();
    }
    assert_eq!(s.history.len(), 3);
    let replayed = s.replay().unwrap();
    assert_eq!(replayed.render(), s.kb.render());
    assert!(s.reasoner().is_consistent(&s.kb.all_rules()).unwrap());
}

/// Random sessions with a few commits each survive a save/load cycle with
/// identical state and canonical KB text.
#[test]
fn random_sessions_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    let cfg = GeneratorConfig::default();
    let mut saved = Vec::new();
    let mut n = 0u64;
    let mut next_id = || {
        n += 1;
        format!("o{n}")
    };
    for i in 0..100u64 {
        let t = trial(trial_seed(77, i), &cfg).unwrap();
        let scope = if i % 2 == 0 { ScopeKind::Full } else { ScopeKind::Dataset };
        let mut s = SessionState {
            id: format!("sess{i:03}"),
            created_at: i,
            scope,
            default_scenario: Scenario::S2,
            table: t.table.clone(),
            original: t.kb.clone(),
            kb: t.kb.clone(),
            history: Vec::new(),
        };
        for (k, input) in [&t.input, &t.paired].into_iter().enumerate() {
            let scenario = [Scenario::S1, Scenario::S2, Scenario::S3][(i as usize + k) % 3];
            let text = format!("{}: {}", input.id, input.text());
            let req = FeedbackRequest { text, scenario: Some(scenario), options: Default::default() };
            let Ok(p) = s.propose(&req, &mut next_id) else { continue };
            if let Some(c) = p.candidates.iter().find(|c| c.committable) {
                s = s.commit(&p, &c.outcome_id.clone(), 10 + i).unwrap();
            }
        }
        store.save(&s).unwrap();
        for e in &s.history {
            store.append_history(&s.id, e).unwrap();
        }
        saved.push(s);
    }
    assert!(saved.iter().filter(|s| !s.history.is_empty()).count() > 30);
    let loaded = store.load_all().unwrap();
    assert_eq!(loaded.len(), saved.len());
    for (a, b) in saved.iter().zip(&loaded) {
        assert_eq!(a.kb.render(), b.kb.render(), "{}", a.id);
        assert_eq!(a, b, "{}", a.id);
        assert_eq!(b.replay().unwrap().render(), b.kb.render(), "{}", a.id);
    }
}
