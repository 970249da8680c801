use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use chrono::{TimeZone, Utc};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use policywatch::corpus::{BehaviorId, Comment};
use policywatch::labeler::CandidateLabel;
use policywatch::triage::{read_log, Clock, TriageStore};
use policywatch_triage::{router, shared};

fn comment(id: &str, text: &str) -> Comment {
    Comment {
        id: id.into(),
        app_id: "com.a".into(),
        market: "Xiaomi".into(),
        lang: "en".into(),
        rating: 1,
        text: text.into(),
        posted_at: None,
    }
}

fn cand(id: &str, behavior: &str) -> CandidateLabel {
    CandidateLabel {
        comment_id: id.into(),
        behavior: BehaviorId::new(behavior),
        probability: 0.8,
    }
}

fn seeded(store: TriageStore) -> TriageStore {
    let mut store = store.with_clock(Clock::Fixed(Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap()));
    let comments = [
        comment("c1", "it is a virus"),
        comment("c2", "too many popup ads"),
        comment("c3", "cannot uninstall it. the ads pop up all the time."),
    ];
    let cands = [cand("c1", "virus"), cand("c2", "ad_disruption"), cand("c3", "fail_to_uninstall")];
    store.enqueue(&cands, &comments).unwrap();
    store
}

fn app() -> Router {
    router(shared(seeded(TriageStore::in_memory())))
}

async fn send(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

#[tokio::test]
async fn lists_pending_candidates_with_limit() {
    let app = app();
    let (status, body) = send(&app, "GET", "/candidates?status=pending&limit=2", None).await;
    assert_eq!(status, StatusCode::OK);
    let items = body.as_array().unwrap();
    assert_eq!(items.len(), 2);
    assert_eq!(items[0]["item_id"], 1);
    assert_eq!(items[0]["status"], "pending");
    assert_eq!(items[0]["comment_text"], "it is a virus");
}

#[tokio::test]
async fn confirm_then_conflict() {
    let app = app();
    let (status, item) = send(&app, "POST", "/decisions", Some(json!({"item_id": 1, "verdict": "confirm"}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(item["status"], "confirmed");
    let (status, err) = send(&app, "POST", "/decisions", Some(json!({"item_id": 1, "verdict": "reject"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert!(err["error"].as_str().unwrap().contains("item 1"));
    let (_, pending) = send(&app, "GET", "/candidates?status=pending", None).await;
    assert_eq!(pending.as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn unknown_item_and_bad_bodies() {
    let app = app();
    let (status, _) = send(&app, "POST", "/decisions", Some(json!({"item_id": 99, "verdict": "confirm"}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = send(&app, "POST", "/decisions", Some(json!({"item_id": 1, "verdict": "maybe"}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = send(&app, "POST", "/decisions", Some(json!({"item_id": 1, "verdict": "split"}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = send(&app, "GET", "/candidates?status=unknown", None).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = send(&app, "GET", "/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn split_feeds_export_and_progress() {
    let app = app();
    let split = json!({
        "item_id": 3,
        "verdict": "split",
        "reviewer": "r1",
        "segments": [
            {"text": "cannot uninstall it.", "behavior": "fail_to_uninstall"},
            {"text": "the ads pop up all the time.", "behavior": "ad_disruption"}
        ]
    });
    let (status, item) = send(&app, "POST", "/decisions", Some(split)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(item["segments"][1]["offset"], 21);
    send(&app, "POST", "/decisions", Some(json!({"item_id": 1, "verdict": "confirm"}))).await;
    send(&app, "POST", "/decisions", Some(json!({"item_id": 2, "verdict": "reject"}))).await;

    let (_, progress) = send(&app, "GET", "/progress", None).await;
    assert_eq!(progress["by_status"]["confirmed"], 1);
    assert_eq!(progress["by_status"]["rejected"], 1);
    assert_eq!(progress["by_status"]["split"], 1);

    let (status, export) = send(&app, "GET", "/export?lang=en", None).await;
    assert_eq!(status, StatusCode::OK);
    let behaviors = export["behaviors"].as_object().unwrap();
    assert_eq!(behaviors["virus"][0]["id"], "c1");
    assert_eq!(behaviors["ad_disruption"][0]["id"], "c3#1");
    assert_eq!(behaviors["ad_disruption"].as_array().unwrap().len(), 1);
    assert_eq!(behaviors["fail_to_uninstall"][0]["text"], "cannot uninstall it.");
}

#[tokio::test]
async fn segments_that_do_not_tile_are_rejected() {
    let app = app();
    let bad = json!({
        "item_id": 3,
        "verdict": "split",
        "segments": [{"text": "something else entirely", "behavior": "virus"}]
    });
    let (status, _) = send(&app, "POST", "/decisions", Some(bad)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (_, pending) = send(&app, "GET", "/candidates?status=pending", None).await;
    assert_eq!(pending.as_array().unwrap().len(), 3);
}

#[tokio::test]
async fn decisions_are_persisted_to_the_log() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(shared(seeded(TriageStore::open(dir.path()).unwrap())));
    send(&app, "POST", "/decisions", Some(json!({"item_id": 2, "verdict": "confirm"}))).await;
    let events = read_log(dir.path().join("decisions.log")).unwrap();
    assert_eq!(events.len(), 4);
    let reopened = TriageStore::open(dir.path()).unwrap();
    assert_eq!(reopened.get(2).unwrap().status.as_str(), "confirmed");
}
