use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method as HttpMethod, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;
use xcal_core::io::Bundle;
use xcal_core::model::JudgmentRecord;
use xcal_core::simulator::{simulate, SimConfig};
use xcal_service::{router, Store};

fn small_bundle(seed: u64) -> Bundle {
    let config = SimConfig {
        n_language_pairs: 2,
        n_items: 12,
        n_reference_items: 4,
        n_calibration_items: 6,
        n_evaluators_per_pair: 2,
        seed,
        ..SimConfig::default()
    };
    simulate(&config).unwrap().to_bundle()
}

fn definition(bundle: &Bundle, tokens: bool) -> Value {
    let mut evaluators = serde_json::to_value(&bundle.manifest.evaluators).unwrap();
    if tokens {
        for e in evaluators.as_array_mut().unwrap() {
            let id = e["id"].as_str().unwrap().to_string();
            e["token"] = json!(format!("tok-{id}"));
        }
    }
    json!({
        "protocol": bundle.manifest.protocol,
        "seed": bundle.manifest.seed,
        "evaluators": evaluators,
        "items": bundle.items,
        "automatic_scores": bundle.manifest.automatic_scores,
    })
}

struct Reply {
    status: StatusCode,
    body: String,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_str(&self.body).unwrap_or_else(|e| panic!("{e}: {}", self.body))
    }
}

async fn call(
    app: &Router,
    method: HttpMethod,
    uri: &str,
    token: Option<&str>,
    body: Option<Value>,
) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(t) = token {
        req = req.header("authorization", format!("Bearer {t}"));
    }
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    Reply {
        status,
        body: String::from_utf8(bytes.to_vec()).unwrap(),
    }
}

async fn create(app: &Router, def: Value) -> String {
    let r = call(app, HttpMethod::POST, "/campaigns", None, Some(def)).await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", r.body);
    r.json()["campaign_id"].as_str().unwrap().to_string()
}

fn records_for(bundle: &Bundle, evaluator: &str) -> Vec<JudgmentRecord> {
    bundle
        .judgments
        .iter()
        .filter(|j| j.evaluator == evaluator)
        .cloned()
        .collect()
}

fn app(dir: &std::path::Path) -> Router {
    router(Arc::new(Store::open(dir).unwrap()))
}

/// Strings that would reveal where an item came from.
const FORBIDDEN: [&str; 7] = [
    "MT1",
    "HT0",
    "consensus",
    "provenance",
    "calibration",
    "system_id",
    "human_reference",
];

fn assert_blind(body: &str) {
    for word in FORBIDDEN {
        assert!(!body.contains(word), "{word:?} leaked in {body}");
    }
}

#[tokio::test]
async fn collect_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let bundle = small_bundle(1);
    let id = create(&app, definition(&bundle, false)).await;

    for e in &bundle.manifest.evaluators {
        let records = records_for(&bundle, &e.id);
        let n = records.len();
        let r = call(
            &app,
            HttpMethod::POST,
            &format!("/campaigns/{id}/judgments"),
            None,
            Some(json!(records)),
        )
        .await;
        assert_eq!(r.status, StatusCode::OK, "{}", r.body);
        assert_eq!(r.json()["accepted"], json!(n));
        assert_eq!(r.json()["errors"], json!([]));
    }

    let r = call(
        &app,
        HttpMethod::GET,
        &format!("/campaigns/{id}/report?method=raw,cs_ht"),
        None,
        None,
    )
    .await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.body);
    let report = r.json();
    let methods: Vec<&str> = report["methods"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["method"].as_str().unwrap())
        .collect();
    assert_eq!(methods, ["raw", "cs_ht"]);
    let affine = &report["methods"][1]["functions"][0];
    assert!(
        affine["alpha"].is_number() && affine["beta"].is_number(),
        "{affine}"
    );

    let text = call(
        &app,
        HttpMethod::GET,
        &format!("/campaigns/{id}/report?format=text"),
        None,
        None,
    )
    .await;
    assert!(
        text.body.contains("== Ranked MT scores =="),
        "{}",
        text.body
    );
}

#[tokio::test]
async fn task_is_deterministic_and_blind() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let bundle = small_bundle(2);
    let id = create(&app, definition(&bundle, true)).await;
    for e in &bundle.manifest.evaluators {
        let uri = format!("/campaigns/{id}/task?evaluator={}", e.id);
        let token = format!("tok-{}", e.id);
        let a = call(&app, HttpMethod::GET, &uri, Some(&token), None).await;
        let b = call(&app, HttpMethod::GET, &uri, Some(&token), None).await;
        assert_eq!(a.status, StatusCode::OK, "{}", a.body);
        assert_eq!(a.body, b.body);
        assert_blind(&a.body);
        let task = a.json();
        for item in task["items"].as_array().unwrap() {
            let keys: Vec<&String> = item.as_object().unwrap().keys().collect();
            assert_eq!(
                keys,
                [
                    "item_id",
                    "left_text",
                    "orientation_swapped",
                    "position",
                    "right_text"
                ]
            );
        }

        let mut records = records_for(&bundle, &e.id);
        records[0].score = Some(9);
        let r = call(
            &app,
            HttpMethod::POST,
            &format!("/campaigns/{id}/judgments"),
            Some(&token),
            Some(json!(records)),
        )
        .await;
        assert_blind(&r.body);
    }
    let rubric = call(&app, HttpMethod::GET, "/rubric?protocol=xsts", None, None).await;
    assert_eq!(rubric.status, StatusCode::OK);
    assert_blind(&rubric.body);
}

#[tokio::test]
async fn invalid_records_do_not_block_valid_ones() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let bundle = small_bundle(3);
    let id = create(&app, definition(&bundle, false)).await;
    let mut records = records_for(&bundle, &bundle.manifest.evaluators[0].id)[..3].to_vec();
    records[1].score = Some(7);
    let r = call(
        &app,
        HttpMethod::POST,
        &format!("/campaigns/{id}/judgments"),
        None,
        Some(json!(records)),
    )
    .await;
    let out = r.json();
    assert_eq!(out["accepted"], json!(2));
    assert_eq!(out["errors"].as_array().unwrap().len(), 1);
    assert_eq!(out["errors"][0]["index"], json!(1));
}

#[tokio::test]
async fn tokens_are_enforced() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let bundle = small_bundle(4);
    let id = create(&app, definition(&bundle, true)).await;
    let e0 = &bundle.manifest.evaluators[0].id;
    let e1 = &bundle.manifest.evaluators[1].id;
    let uri = format!("/campaigns/{id}/task?evaluator={e0}");

    assert_eq!(
        call(&app, HttpMethod::GET, &uri, None, None).await.status,
        StatusCode::UNAUTHORIZED
    );
    let wrong = format!("tok-{e1}");
    assert_eq!(
        call(&app, HttpMethod::GET, &uri, Some(&wrong), None)
            .await
            .status,
        StatusCode::UNAUTHORIZED
    );

    // A record for another evaluator is rejected individually.
    let mut records = records_for(&bundle, e0)[..2].to_vec();
    records.push(records_for(&bundle, e1)[0].clone());
    let r = call(
        &app,
        HttpMethod::POST,
        &format!("/campaigns/{id}/judgments"),
        Some(&format!("tok-{e0}")),
        Some(json!(records)),
    )
    .await;
    assert_eq!(r.json()["accepted"], json!(2));
    assert_eq!(r.json()["errors"][0]["index"], json!(2));

    let r = call(
        &app,
        HttpMethod::POST,
        &format!("/campaigns/{id}/judgments"),
        None,
        Some(json!(records)),
    )
    .await;
    assert_eq!(r.json()["accepted"], json!(0));
}

#[tokio::test]
async fn error_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let bundle = small_bundle(5);

    let r = call(
        &app,
        HttpMethod::GET,
        "/campaigns/nope/task?evaluator=x",
        None,
        None,
    )
    .await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    assert_eq!(r.json()["error"], json!("unknown_campaign"));

    let id = create(&app, definition(&bundle, false)).await;
    let again = create(&app, definition(&bundle, false)).await;
    assert_ne!(id, again);

    let r = call(
        &app,
        HttpMethod::GET,
        &format!("/campaigns/{id}/task?evaluator=ghost"),
        None,
        None,
    )
    .await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    assert_eq!(r.json()["error"], json!("unknown_evaluator"));

    let r = call(
        &app,
        HttpMethod::GET,
        &format!("/campaigns/{id}/report"),
        None,
        None,
    )
    .await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(r.json()["error"], json!("insufficient_data"));

    let r = call(
        &app,
        HttpMethod::GET,
        &format!("/campaigns/{id}/report?method=zscore"),
        None,
        None,
    )
    .await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);

    let mut dup = definition(&bundle, false);
    let first = dup["items"][0].clone();
    dup["items"].as_array_mut().unwrap().push(first);
    let r = call(&app, HttpMethod::POST, "/campaigns", None, Some(dup)).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(
        r.json()["violations"][0]["violation"],
        json!("duplicate_id")
    );

    let r = call(
        &app,
        HttpMethod::POST,
        &format!("/campaigns/{id}/close"),
        None,
        None,
    )
    .await;
    assert_eq!(r.status, StatusCode::OK);
    let records = records_for(&bundle, &bundle.manifest.evaluators[0].id);
    let r = call(
        &app,
        HttpMethod::POST,
        &format!("/campaigns/{id}/judgments"),
        None,
        Some(json!(records)),
    )
    .await;
    assert_eq!(r.status, StatusCode::CONFLICT);
    assert_eq!(r.json()["error"], json!("campaign_closed"));
    let r = call(
        &app,
        HttpMethod::POST,
        &format!("/campaigns/{id}/open"),
        None,
        None,
    )
    .await;
    assert_eq!(r.status, StatusCode::CONFLICT);

    let mut draft = definition(&bundle, false);
    draft["draft"] = json!(true);
    let d = create(&app, draft).await;
    let r = call(
        &app,
        HttpMethod::POST,
        &format!("/campaigns/{d}/judgments"),
        None,
        Some(json!(records)),
    )
    .await;
    assert_eq!(r.json()["error"], json!("not_collecting"));
    call(
        &app,
        HttpMethod::POST,
        &format!("/campaigns/{d}/open"),
        None,
        None,
    )
    .await;
    let r = call(
        &app,
        HttpMethod::POST,
        &format!("/campaigns/{d}/judgments"),
        None,
        Some(json!(records)),
    )
    .await;
    assert_eq!(r.status, StatusCode::OK);
}

#[tokio::test]
async fn latest_submission_wins() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let bundle = small_bundle(6);
    let id = create(&app, definition(&bundle, false)).await;
    let mut record = bundle.judgments[0].clone();
    for score in [1, 4, 2] {
        record.score = Some(score);
        call(
            &app,
            HttpMethod::POST,
            &format!("/campaigns/{id}/judgments"),
            None,
            Some(json!([record])),
        )
        .await;
    }
    let r = call(
        &app,
        HttpMethod::GET,
        &format!("/campaigns/{id}/export/judgments.jsonl"),
        None,
        None,
    )
    .await;
    let lines: Vec<Value> = r
        .body
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 1);
    assert_eq!(lines[0]["score"], json!(2));
}

#[tokio::test]
async fn log_replays_after_crash() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = small_bundle(7);
    let id;
    let before;
    {
        let app = app(dir.path());
        id = create(&app, definition(&bundle, false)).await;
        for e in &bundle.manifest.evaluators {
            let records = records_for(&bundle, &e.id);
            call(
                &app,
                HttpMethod::POST,
                &format!("/campaigns/{id}/judgments"),
                None,
                Some(json!(records)),
            )
            .await;
        }
        before = call(
            &app,
            HttpMethod::GET,
            &format!("/campaigns/{id}/export/judgments.jsonl"),
            None,
            None,
        )
        .await
        .body;
    }

    // A batch cut off mid-write.
    let log = dir.path().join(&id).join("events.jsonl");
    let committed = std::fs::metadata(&log).unwrap().len();
    let extra = json!({"event": "judgments", "records": [bundle.judgments[0]]}).to_string();
    let mut text = std::fs::read_to_string(&log).unwrap();
    text.push_str(&extra[..extra.len() / 2]);
    std::fs::write(&log, text).unwrap();

    let app = app(dir.path());
    let after = call(
        &app,
        HttpMethod::GET,
        &format!("/campaigns/{id}/export/judgments.jsonl"),
        None,
        None,
    )
    .await
    .body;
    assert_eq!(before, after);
    assert_eq!(std::fs::metadata(&log).unwrap().len(), committed);

    // Later appends land on a clean line.
    let mut record = bundle.judgments[0].clone();
    record.score = Some(if record.score == Some(1) { 2 } else { 1 });
    let r = call(
        &app,
        HttpMethod::POST,
        &format!("/campaigns/{id}/judgments"),
        None,
        Some(json!([record])),
    )
    .await;
    assert_eq!(r.json()["accepted"], json!(1));
    let app = crate::app(dir.path());
    let reread = call(
        &app,
        HttpMethod::GET,
        &format!("/campaigns/{id}/export/judgments.jsonl"),
        None,
        None,
    )
    .await
    .body;
    assert_ne!(reread, before);
}

#[tokio::test]
async fn export_round_trips_without_tokens() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let bundle = small_bundle(8);
    let id = create(&app, definition(&bundle, true)).await;
    let r = call(
        &app,
        HttpMethod::GET,
        &format!("/campaigns/{id}/export/campaign.json"),
        None,
        None,
    )
    .await;
    assert!(!r.body.contains("tok-"));
    assert_eq!(r.json()["campaign_id"], json!(id));
    let items = call(
        &app,
        HttpMethod::GET,
        &format!("/campaigns/{id}/export/items.jsonl"),
        None,
        None,
    )
    .await;
    assert_eq!(items.body.lines().count(), bundle.items.len());
    let r = call(
        &app,
        HttpMethod::GET,
        &format!("/campaigns/{id}/export/secrets.txt"),
        None,
        None,
    )
    .await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
}
