use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use emx_cli::config::{AppConfig, ProviderMode};
use emx_cli::server::{router, AppState};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn demo() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../demo")
}

/// A scratch project holding a copy of the demo sources.
fn project() -> (tempfile::TempDir, axum::Router) {
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("src");
    std::fs::create_dir(&src).unwrap();
    for f in ["JvmClassWriter.java", "TextStats.java"] {
        std::fs::copy(demo().join("src").join(f), src.join(f)).unwrap();
    }
    let cfg = AppConfig { mode: ProviderMode::Replay, fixture_dir: Some(demo().join("fixtures")), ..AppConfig::default() };
    let app = router(Arc::new(AppState::new(&cfg, tmp.path()).unwrap()));
    (tmp, app)
}

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<String>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(Body::from).unwrap_or_else(Body::empty))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()));
    (status, value)
}

async fn post(app: &axum::Router, uri: &str, body: Value) -> (StatusCode, Value) {
    call(app, "POST", uri, Some(body.to_string())).await
}

async fn suggest_fig1(app: &axum::Router) -> Value {
    let (status, session) =
        post(app, "/suggest", json!({"path": "src/JvmClassWriter.java", "method_locator": "writeJvmClass"})).await;
    assert_eq!(status, StatusCode::OK, "{session}");
    session
}

#[tokio::test]
async fn health() {
    let (_tmp, app) = project();
    assert_eq!(call(&app, "GET", "/health", None).await, (StatusCode::OK, Value::String("ok".into())));
}

#[tokio::test]
async fn suggest_then_apply_first_group() {
    let (tmp, app) = project();
    let session = suggest_fig1(&app).await;
    let names: Vec<_> = session["groups"].as_array().unwrap().iter().map(|g| g["representative_name"].clone()).collect();
    assert_eq!(names, [json!("writeMethods"), json!("writeFields"), json!("writeInterfaces")]);
    assert_eq!(session["groups"][0]["canonical_range"], json!({"start": 85, "end": 90}));
    assert_eq!(session["groups"][0]["signature"], "private void writeMethods(JvmClass jvmClass, ClassWriter cw)");

    let id = session["id"].as_str().unwrap();
    let (status, again) = call(&app, "GET", &format!("/session/{id}"), None).await;
    assert_eq!((status, &again), (StatusCode::OK, &session));

    let (status, applied) = post(&app, "/apply", json!({"session_id": id, "group": 0})).await;
    assert_eq!(status, StatusCode::OK, "{applied}");
    assert!(applied["diff"].as_str().unwrap().contains("+        writeMethods(jvmClass, cw);"));
    let on_disk = std::fs::read_to_string(tmp.path().join("src/JvmClassWriter.java")).unwrap();
    assert_eq!(applied["new_text"].as_str().unwrap(), on_disk);

    // the same session is now stale
    let (status, body) = post(&app, "/apply", json!({"session_id": id, "group": 1})).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"], "stale_unit");
}

#[tokio::test]
async fn dry_run_apply_writes_nothing() {
    let (tmp, app) = project();
    let path = tmp.path().join("src/JvmClassWriter.java");
    let before = std::fs::read_to_string(&path).unwrap();
    let session = suggest_fig1(&app).await;
    let (status, applied) = post(&app, "/apply", json!({"session_id": session["id"], "group": 2, "write": false})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(applied["written"], false);
    assert!(applied["new_text"].as_str().unwrap().contains("private String[] writeInterfaces(JvmClass jvmClass)"));
    assert_eq!(std::fs::read_to_string(&path).unwrap(), before);
}

#[tokio::test]
async fn edited_file_is_stale() {
    let (tmp, app) = project();
    let session = suggest_fig1(&app).await;
    let path = tmp.path().join("src/JvmClassWriter.java");
    let mut text = std::fs::read_to_string(&path).unwrap();
    text.push_str("// touched\n");
    std::fs::write(&path, &text).unwrap();
    let (status, body) = post(&app, "/apply", json!({"session_id": session["id"], "group": 0})).await;
    assert_eq!(status, StatusCode::CONFLICT, "{body}");
    assert_eq!(std::fs::read_to_string(&path).unwrap(), text);
}

#[tokio::test]
async fn error_statuses() {
    let (_tmp, app) = project();
    let unknown = "/session/00000000-0000-4000-8000-000000000000";
    assert_eq!(call(&app, "GET", unknown, None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "GET", "/session/not-a-uuid", None).await.0, StatusCode::NOT_FOUND);
    let (status, body) = post(&app, "/apply", json!({"session_id": "00000000-0000-4000-8000-000000000000", "group": 0})).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::NOT_FOUND, Some("unknown_session")));

    assert_eq!(call(&app, "POST", "/suggest", Some("{not json".into())).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(post(&app, "/suggest", json!({"path": 3})).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(post(&app, "/apply", json!({"group": 0})).await.0, StatusCode::BAD_REQUEST);

    let session = suggest_fig1(&app).await;
    let (status, body) = post(&app, "/apply", json!({"session_id": session["id"], "group": 3})).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("invalid_range")));

    let (status, body) = post(&app, "/suggest", json!({"path": "src/Missing.java", "method_locator": "x"})).await;
    assert_eq!(status, StatusCode::NOT_FOUND, "{body}");
}

#[tokio::test]
async fn suggest_by_line_and_empty_result() {
    let (_tmp, app) = project();
    let (status, session) = post(&app, "/suggest", json!({"path": "src/TextStats.java", "method_locator": 39})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(session["method"], "clamp");
    assert_eq!(session["groups"], json!([]));
    assert_eq!(session["trail"].as_array().unwrap().len(), 4);
}

#[tokio::test]
async fn source_is_confined_to_root() {
    let (tmp, app) = project();
    let (status, body) = call(&app, "GET", "/source?path=src/TextStats.java", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["text"].as_str().unwrap(), std::fs::read_to_string(tmp.path().join("src/TextStats.java")).unwrap());

    let outside = tmp.path().parent().unwrap().join("emx-outside.java");
    std::fs::write(&outside, "class X {}").unwrap();
    for uri in ["/source?path=../emx-outside.java".to_owned(), format!("/source?path={}", outside.display())] {
        assert_eq!(call(&app, "GET", &uri, None).await.0, StatusCode::FORBIDDEN, "{uri}");
    }
    let (status, _) =
        post(&app, "/suggest", json!({"path": "../emx-outside.java", "method_locator": "x"})).await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    std::fs::remove_file(outside).unwrap();
    assert_eq!(call(&app, "GET", "/source", None).await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn concurrent_suggests() {
    let (_tmp, app) = project();
    let runs = (0..4).map(|_| {
        let app = app.clone();
        tokio::spawn(async move { suggest_fig1(&app).await })
    });
    let mut ids = std::collections::HashSet::new();
    for r in runs {
        let s = r.await.unwrap();
        assert_eq!(s["groups"].as_array().unwrap().len(), 3);
        ids.insert(s["id"].as_str().unwrap().to_owned());
    }
    assert_eq!(ids.len(), 4);
}
