use std::sync::Arc;

use abcd::design::utility;
use abcd_service::{router, AppState, Store};
use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

const OBS: [[f64; 2]; 5] = [[-1.2, -1.6], [-0.3, -0.7], [0.1, 0.4], [0.8, 1.2], [1.5, 1.9]];

fn body(d: usize, rows: &[[f64; 2]]) -> Value {
    json!({"d": d, "observations": rows, "design": {"mc_samples": 8, "bo_budget": 4}})
}

async fn call(app: &Arc<AppState>, method: &str, uri: &str, body: Option<Value>, key: Option<&str>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(k) = key {
        req = req.header("Idempotency-Key", k);
    }
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = router(app.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, v)
}

async fn create(app: &Arc<AppState>) -> String {
    let (st, v) = call(app, "POST", "/v1/sessions", Some(body(2, &OBS)), None).await;
    assert_eq!(st, StatusCode::CREATED, "{v}");
    v["id"].as_str().unwrap().to_string()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[tokio::test]
async fn health_reports_version() {
    let (st, v) = call(&AppState::ephemeral(), "GET", "/v1/healthz", None, None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
}

#[tokio::test]
async fn create_returns_normalized_posterior() {
    let app = AppState::ephemeral();
    let (st, v) = call(&app, "POST", "/v1/sessions", Some(body(2, &OBS)), None).await;
    assert_eq!(st, StatusCode::CREATED);
    let p = floats(&v["state"]["posterior"]);
    assert_eq!(p.len(), 3);
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert_eq!(v["revision"], 0);
}

#[tokio::test]
async fn too_few_samples_cite_n_min() {
    let (st, v) = call(&AppState::ephemeral(), "POST", "/v1/sessions", Some(body(2, &OBS[..2])), None).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"]["field"], "observations");
    assert!(v["error"]["message"].as_str().unwrap().contains('5'), "{v}");
}

#[tokio::test]
async fn malformed_body_names_the_field() {
    let (st, v) = call(&AppState::ephemeral(), "POST", "/v1/sessions", Some(json!({"observations": []})), None).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"]["field"], "d");
    assert_eq!(v["error"]["code"], "invalid_body");
}

#[tokio::test]
async fn idempotency_key_reuses_the_session() {
    let app = AppState::ephemeral();
    let (s1, a) = call(&app, "POST", "/v1/sessions", Some(body(2, &OBS)), Some("k-1")).await;
    let (s2, b) = call(&app, "POST", "/v1/sessions", Some(body(2, &OBS)), Some("k-1")).await;
    assert_eq!((s1, s2), (StatusCode::CREATED, StatusCode::OK));
    assert_eq!(a["id"], b["id"]);
    assert_eq!(app.session_count(), 1);
}

#[tokio::test]
async fn unknown_session_is_404() {
    let app = AppState::ephemeral();
    for (m, path) in [("GET", "/v1/sessions/nope"), ("POST", "/v1/sessions/nope/recommend")] {
        let (st, v) = call(&app, m, path, None, None).await;
        assert_eq!(st, StatusCode::NOT_FOUND);
        assert_eq!(v["error"]["code"], "not_found");
    }
}

#[tokio::test]
async fn recommend_covers_both_targets_and_stays_in_domain() {
    let app = AppState::ephemeral();
    let id = create(&app).await;
    let (st, r) = call(&app, "POST", &format!("/v1/sessions/{id}/recommend"), None, None).await;
    assert_eq!(st, StatusCode::OK, "{r}");
    let targets: std::collections::BTreeSet<u64> = r["diagnostics"].as_array().unwrap().iter().map(|e| e["target"].as_u64().unwrap()).collect();
    assert_eq!(targets.len(), 2);
    let (j, x) = (r["target"].as_u64().unwrap() as usize, r["value"].as_f64().unwrap());
    let col: Vec<f64> = OBS.iter().map(|o| o[j]).collect();
    let (lo, hi) = col.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let w = hi - lo;
    assert!(x >= lo - w / 2.0 && x <= hi + w / 2.0);
    assert_eq!(r["revision"], 0);
    let (_, s) = call(&app, "GET", &format!("/v1/sessions/{id}"), None, None).await;
    assert_eq!(s["pending"]["value"], r["value"]);
}

#[tokio::test]
async fn degenerate_posterior_reports_converged() {
    let app = AppState::ephemeral();
    let mut b = body(2, &OBS);
    b["prior"] = json!({"kind": "explicit", "table": [
        {"graph": {"d": 2, "edges": []}, "p": 0.0},
        {"graph": {"d": 2, "edges": [[1, 0]]}, "p": 0.0},
        {"graph": {"d": 2, "edges": [[0, 1]]}, "p": 1.0}]});
    let (st, v) = call(&app, "POST", "/v1/sessions", Some(b), None).await;
    assert_eq!(st, StatusCode::CREATED, "{v}");
    let id = v["id"].as_str().unwrap();
    let (_, r) = call(&app, "POST", &format!("/v1/sessions/{id}/recommend"), None, None).await;
    assert_eq!(r["eig"].as_f64().unwrap(), 0.0);
    assert_eq!(r["advisory"], "belief converged");
    assert_eq!(r["converged"], true);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn concurrent_recommend_is_rejected() {
    let app = AppState::ephemeral();
    let mut b = body(2, &OBS);
    b["design"] = json!({"mc_samples": 400, "bo_budget": 12});
    let (_, v) = call(&app, "POST", "/v1/sessions", Some(b), None).await;
    let uri = format!("/v1/sessions/{}/recommend", v["id"].as_str().unwrap());
    let (a, b) = tokio::join!(call(&app, "POST", &uri, None, None), call(&app, "POST", &uri, None, None));
    let mut codes = [a.0, b.0];
    codes.sort();
    assert_eq!(codes, [StatusCode::OK, StatusCode::CONFLICT]);
    let busy = if a.0 == StatusCode::CONFLICT { a.1 } else { b.1 };
    assert_eq!(busy["error"]["code"], "recommendation_running");
}

#[tokio::test]
async fn observe_validates_clamp_and_bumps_revision() {
    let app = AppState::ephemeral();
    let id = create(&app).await;
    let uri = format!("/v1/sessions/{id}/observe");
    let bad = json!({"intervention": {"target": 0, "value": 0.25}, "values": [0.5, 1.0]});
    let (st, v) = call(&app, "POST", &uri, Some(bad), None).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
    let msg = v["error"]["message"].as_str().unwrap();
    assert!(msg.contains("0.25") && msg.contains("0.5"), "{msg}");
    assert_eq!(v["error"]["field"], "values");
    let (st, _) = call(&app, "POST", &uri, Some(json!({"intervention": null, "values": [1.0, "x"]})), None).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);

    for (k, (x, y)) in [(0.3, 0.8), (-1.0, -1.5)].into_iter().enumerate() {
        let ok = json!({"intervention": {"target": 0, "value": x}, "values": [x, y]});
        let (st, v) = call(&app, "POST", &uri, Some(ok), None).await;
        assert_eq!(st, StatusCode::OK, "{v}");
        assert_eq!(v["revision"], k as u64 + 1);
        let p = floats(&v["posterior"]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    let (_, s) = call(&app, "GET", &format!("/v1/sessions/{id}"), None, None).await;
    assert_eq!(s["history"].as_array().unwrap().len(), 2);
    assert_eq!(s["entropy_history"].as_array().unwrap().len(), 3);
    let logs: Vec<f64> = floats(&s["posterior"]).iter().map(|p| p.ln()).collect();
    assert!((s["entropy"].as_f64().unwrap() + utility(&logs).unwrap()).abs() < 1e-12);
    assert_eq!(s["graphs"].as_array().unwrap().len(), 3);
}

#[tokio::test]
async fn curves_need_a_single_parent() {
    let app = AppState::ephemeral();
    let id = create(&app).await;
    let (st, c) = call(&app, "GET", &format!("/v1/sessions/{id}/curve?graph=2&node=1&lo=-2&hi=2"), None, None).await;
    assert_eq!(st, StatusCode::OK, "{c}");
    assert_eq!(c["grid"].as_array().unwrap().len(), 200);
    assert_eq!(c["grid"][0].as_f64().unwrap(), -2.0);
    let (st, v) = call(&app, "GET", &format!("/v1/sessions/{id}/curve?graph=0&node=1"), None, None).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"]["field"], "node");

    let rows: Vec<[f64; 3]> = (0..6).map(|i| { let x = i as f64 * 0.4 - 1.0; [x, x * x, x + 0.5 * x * x] }).collect();
    let (_, v) = call(&app, "POST", "/v1/sessions", Some(json!({"d": 3, "observations": rows})), None).await;
    let id3 = v["id"].as_str().unwrap();
    let (g, node) = v["state"]["graphs"].as_array().unwrap().iter().find_map(|g| {
        let edges = g["graph"]["edges"].as_array().unwrap();
        (0..3u64).find(|&n| edges.iter().filter(|e| e[1] == n).count() == 2).map(|n| (g["index"].as_u64().unwrap(), n))
    }).unwrap();
    let (st, _) = call(&app, "GET", &format!("/v1/sessions/{id3}/curve?graph={g}&node={node}"), None, None).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
    let (st, _) = call(&app, "GET", &format!("/v1/sessions/{id3}/curve?graph=99999&node=0"), None, None).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn sessions_do_not_interfere() {
    let steps = [(0usize, 0.4, 1.1), (1, -0.5, -0.2), (0, 1.2, 1.9)];
    let obs = |j: usize, x: f64, other: f64| {
        let mut v = [other, other];
        v[j] = x;
        json!({"intervention": {"target": j, "value": x}, "values": v})
    };
    let serial = AppState::ephemeral();
    let s = create(&serial).await;
    let mut expect = vec![];
    for &(j, x, o) in &steps {
        expect.push(call(&serial, "POST", &format!("/v1/sessions/{s}/observe"), Some(obs(j, x, o)), None).await.1["posterior"].clone());
    }
    let app = AppState::ephemeral();
    let (a, b) = (create(&app).await, create(&app).await);
    for (k, &(j, x, o)) in steps.iter().enumerate() {
        let ra = call(&app, "POST", &format!("/v1/sessions/{a}/observe"), Some(obs(j, x, o)), None).await.1;
        let rb = call(&app, "POST", &format!("/v1/sessions/{b}/observe"), Some(obs(1 - j, o, x)), None).await.1;
        assert_eq!(ra["posterior"], expect[k]);
        assert_eq!(rb["revision"], k as u64 + 1);
    }
}

#[tokio::test]
async fn sessions_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    let app = AppState::restore(Store::open(dir.path()).unwrap()).unwrap();
    let (_, v) = call(&app, "POST", "/v1/sessions", Some(body(2, &OBS)), Some("again")).await;
    let id = v["id"].as_str().unwrap().to_string();
    call(&app, "POST", &format!("/v1/sessions/{id}/recommend"), None, None).await;
    let (st, _) = call(&app, "POST", &format!("/v1/sessions/{id}/observe"), Some(json!({"intervention": {"target": 1, "value": 0.2}, "values": [0.9, 0.2]})), None).await;
    assert_eq!(st, StatusCode::OK);
    call(&app, "POST", &format!("/v1/sessions/{id}/recommend"), None, None).await;
    let (_, before) = call(&app, "GET", &format!("/v1/sessions/{id}"), None, None).await;
    drop(app);

    let app = AppState::restore(Store::open(dir.path()).unwrap()).unwrap();
    let (st, after) = call(&app, "GET", &format!("/v1/sessions/{id}"), None, None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(before, after);
    let (st, again) = call(&app, "POST", "/v1/sessions", Some(body(2, &OBS)), Some("again")).await;
    assert_eq!((st, again["id"].as_str().unwrap()), (StatusCode::OK, id.as_str()));
}

#[test]
fn unwritable_state_dir_fails_at_open() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain-file");
    std::fs::write(&file, "x").unwrap();
    assert!(Store::open(file.join("state")).is_err());
}
