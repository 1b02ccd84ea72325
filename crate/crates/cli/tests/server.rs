mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use common::fixture;
use dgvse::applications::{MapExport, RankedResult};
use dgvse::DistanceKind;
use dgvse_cli::payloads::{Health, TagList, VarianceTable};
use dgvse_cli::server::router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app() -> Router {
    router(Arc::new(fixture(DistanceKind::Wasserstein2Sq).state))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<&str>) -> (StatusCode, Vec<u8>) {
    let request = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

async fn error_field(app: &Router, uri: &str, body: &str) -> (StatusCode, Value) {
    let (status, bytes) = call(app, "POST", uri, Some(body)).await;
    let v: Value = serde_json::from_slice(&bytes).unwrap();
    assert!(v["error"]["message"].as_str().is_some_and(|m| !m.is_empty()), "{v}");
    (status, v["error"]["field"].clone())
}

#[tokio::test]
async fn health_reports_counts() {
    let app = app();
    let (status, bytes) = call(&app, "GET", "/health", None).await;
    assert_eq!(status, StatusCode::OK);
    let h: Health = serde_json::from_slice(&bytes).unwrap();
    assert_eq!((h.status.as_str(), h.items, h.tags), ("ok", 48, 6));
    let raw: Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(raw, json!({"status": "ok", "items": 48, "tags": 6}));
}

#[tokio::test]
async fn tags_and_variance_agree() {
    let app = app();
    let (_, bytes) = call(&app, "GET", "/tags", None).await;
    let tags: TagList = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(tags.tags.len(), 6);
    assert!(tags.tags.iter().enumerate().all(|(i, t)| t.id == i));

    let (status, bytes) = call(&app, "GET", "/variance", None).await;
    assert_eq!(status, StatusCode::OK);
    let table: VarianceTable = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(table.rows.len(), 6);
    assert_eq!(table.total, table.rows.iter().map(|r| r.count).sum::<usize>());
    assert_eq!(table.total, tags.tags.iter().map(|t| t.count).sum::<usize>());
    assert!(table.rows.windows(2).all(|w| w[0].variance >= w[1].variance));
    assert_eq!(table.rows.iter().map(|r| r.rank).collect::<Vec<_>>(), [1, 2, 3, 4, 5, 6]);
}

#[tokio::test]
async fn map_uses_pca_and_rejects_other_projectors() {
    let app = app();
    for uri in ["/map", "/map?projector=pca"] {
        let (status, bytes) = call(&app, "GET", uri, None).await;
        assert_eq!(status, StatusCode::OK);
        let map: MapExport = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(map.points.len(), 6);
    }
    let (status, bytes) = call(&app, "GET", "/map?projector=tsne", None).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let v: Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(v["error"]["field"], "projector");
}

#[tokio::test]
async fn retrieve_returns_ranked_results() {
    let app = app();
    let body = r#"{"base":{"item":"c00-0001"},"remove":["specific-00"],"add":["specific-01"],"k":5}"#;
    let (status, bytes) = call(&app, "POST", "/retrieve", Some(body)).await;
    assert_eq!(status, StatusCode::OK);
    let r: RankedResult = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(r.results.len(), 5);
    assert!(r.results.windows(2).all(|w| w[0].score >= w[1].score));
    let keys: Vec<String> = serde_json::from_slice::<Value>(&bytes).unwrap().as_object().unwrap().keys().cloned().collect();
    assert_eq!(keys, ["degenerate", "results"]);

    let body = r#"{"base":{"item":"c02-0003"},"k":1}"#;
    let (_, bytes) = call(&app, "POST", "/retrieve", Some(body)).await;
    let r: RankedResult = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(r.results[0].id, "c02-0003");
    assert_eq!(r.results[0].score, 0.0);
}

#[tokio::test]
async fn invalid_queries_are_422_with_a_field() {
    let app = app();
    let cases = [
        (r#"{"base":{"tags":["generic-00"]},"remove":["specific-00"],"add":["specific-00"],"k":3}"#, "add"),
        (r#"{"base":{"tags":["nope"]},"k":3}"#, "base.tags"),
        (r#"{"base":{"item":"missing"},"k":3}"#, "base.item"),
        (r#"{"base":{"item":"c00-0000"},"remove":["zzz"],"k":3}"#, "remove"),
        (r#"{"base":{"item":"c00-0000"},"add":["zzz"],"k":3}"#, "add"),
        (r#"{"base":{"item":"c00-0000"},"k":0}"#, "k"),
        (r#"{"base":{},"k":3}"#, "base"),
        (r#"{"base":{"item":"c00-0000"}}"#, "k"),
        (r#"{"base":{"item":"c00-0000"},"k":3,"extra":1}"#, "extra"),
    ];
    for (body, field) in cases {
        let (status, f) = error_field(&app, "/retrieve", body).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
        assert_eq!(f, field, "{body}");
    }
}

#[tokio::test]
async fn malformed_json_is_400() {
    let app = app();
    for body in ["{", "not json", ""] {
        let (status, bytes) = call(&app, "POST", "/retrieve", Some(body)).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body:?}");
        let v: Value = serde_json::from_slice(&bytes).unwrap();
        assert!(v["error"]["field"].is_null());
    }
}

#[tokio::test]
async fn reorder_ranks_tagged_items() {
    let app = app();
    let (status, bytes) = call(&app, "POST", "/reorder", Some(r#"{"tag":"specific-02"}"#)).await;
    assert_eq!(status, StatusCode::OK);
    let r: RankedResult = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(r.results.len(), 12);
    assert!(r.results.iter().all(|s| s.id.starts_with("c02")));

    let body = r#"{"tag":"specific-02","subset":["c00-0000","c02-0000"],"k":1}"#;
    let (_, bytes) = call(&app, "POST", "/reorder", Some(body)).await;
    let r: RankedResult = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(r.results.len(), 1);

    for (body, field) in [
        (r#"{"tag":"nope"}"#, "tag"),
        (r#"{"tag":"specific-02","subset":["ghost"]}"#, "subset"),
        (r#"{"tag":"specific-02","subset":[]}"#, "subset"),
        (r#"{"tag":"specific-02","subset":["c00-0000","c00-0000"]}"#, "subset"),
        (r#"{"tag":"specific-02","k":0}"#, "k"),
    ] {
        let (status, f) = error_field(&app, "/reorder", body).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
        assert_eq!(f, field, "{body}");
    }
}

#[tokio::test]
async fn responses_do_not_depend_on_request_order() {
    let app = app();
    let requests = [
        ("POST", "/retrieve", Some(r#"{"base":{"tags":["generic-01","specific-03"]},"remove":["generic-01"],"k":4}"#)),
        ("POST", "/reorder", Some(r#"{"tag":"generic-00","k":5}"#)),
        ("GET", "/variance", None),
        ("GET", "/map", None),
        ("POST", "/retrieve", Some(r#"{"base":{"item":"c01-0004"},"add":["generic-00"],"k":6,"mode":"refuse"}"#)),
    ];
    let mut first = Vec::new();
    for (m, u, b) in requests {
        first.push(call(&app, m, u, b).await);
    }
    let mut second = Vec::new();
    for (m, u, b) in requests.iter().rev() {
        second.push(call(&app, m, u, *b).await);
    }
    second.reverse();
    assert_eq!(first, second);
}

#[tokio::test]
async fn unknown_routes_and_methods() {
    let app = app();
    assert_eq!(call(&app, "GET", "/nowhere", None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "GET", "/retrieve", None).await.0, StatusCode::METHOD_NOT_ALLOWED);
}
