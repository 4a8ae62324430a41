use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

use pstnet::ingest::{IngestConfig, PowerClient};
use pstnet::net::Dims;
use pstnet::service::{router, AppState, FLIGHT_LEVELS_M};
use pstnet::PstnetModel;

fn state() -> Arc<AppState> {
    let client = PowerClient::new(IngestConfig::offline()).unwrap();
    Arc::new(AppState::new(PstnetModel::init(Dims::default(), 7), Vec::new(), client))
}

async fn call(st: &Arc<AppState>, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = router(st.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

async fn get(st: &Arc<AppState>, uri: &str) -> (StatusCode, Value) {
    let (s, b) = call(st, Request::get(uri).body(Body::empty()).unwrap()).await;
    (s, serde_json::from_slice(&b).unwrap())
}

async fn post(st: &Arc<AppState>, body: &str) -> (StatusCode, Vec<u8>) {
    let req = Request::post("/api/trajectory")
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    call(st, req).await
}

fn frames(bytes: &[u8]) -> Vec<Value> {
    std::str::from_utf8(bytes).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[tokio::test]
async fn health_carries_the_envelope() {
    let st = state();
    let (s, v) = get(&st, "/api/health").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["status"], "ok");
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["model_checksum"], st.model_checksum());
    assert_eq!(v["flight_levels_m"].as_array().unwrap().len(), FLIGHT_LEVELS_M.len());
}

#[tokio::test]
async fn estimate_returns_a_nonnegative_tke_and_gate() {
    let st = state();
    let (s, v) = get(&st, "/api/estimate?lat=51.5&lon=0&level=3").await;
    assert_eq!(s, StatusCode::OK, "{v}");
    let k = v["k"].as_f64().unwrap();
    assert!(k.is_finite() && k >= 0.0);
    assert!(k >= v["k_mo"].as_f64().unwrap());
    let alpha: Vec<f64> = v["alpha"].as_array().unwrap().iter().map(|a| a.as_f64().unwrap()).collect();
    assert_eq!(alpha.len(), 4);
    assert!((alpha.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert_eq!(v["source"], "fixture");
    assert_eq!(v["altitude_m"], 4_000.0);
    assert!(v["regime"].is_string());
}

#[tokio::test]
async fn estimate_rejects_bad_input() {
    let st = state();
    for uri in [
        "/api/estimate?lat=91&lon=0&level=0",
        "/api/estimate?lat=0&lon=0&level=8",
        "/api/estimate?lat=abc&lon=0&level=0",
        "/api/estimate?lon=0&level=0",
    ] {
        let (s, v) = get(&st, uri).await;
        assert_eq!(s, StatusCode::BAD_REQUEST, "{uri}");
        assert!(v["error"].is_string());
        assert_eq!(v["model_checksum"], st.model_checksum());
    }
}

#[tokio::test]
async fn global_grid_is_row_major_north_to_south_and_cached() {
    let st = state();
    let (s, v) = get(&st, "/api/grid?level=2&res=2").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!((v["rows"].as_u64(), v["cols"].as_u64()), (Some(90), Some(180)));
    let values = v["values"].as_array().unwrap();
    assert_eq!(values.len(), 90 * 180);
    assert!(values.iter().all(|x| x.as_f64().is_some_and(|k| k.is_finite() && k >= 0.0)));
    assert_eq!(v["cached"], false);

    // the first row is the northernmost band
    let (_, north) = get(&st, "/api/estimate?lat=89&lon=-179&level=2").await;
    assert!((values[0].as_f64().unwrap() - north["k"].as_f64().unwrap()).abs() < 1e-12);

    let (_, again) = get(&st, "/api/grid?level=2&res=2").await;
    assert_eq!(again["cached"], true);
    assert_eq!(again["values"], v["values"]);
}

#[tokio::test]
async fn grid_validates_level_and_bbox() {
    let st = state();
    for uri in ["/api/grid?level=8", "/api/grid?level=1&bbox=10,0,0,10", "/api/grid?level=1&res=0", "/api/grid?res=1"] {
        let (s, _) = get(&st, uri).await;
        assert_eq!(s, StatusCode::BAD_REQUEST, "{uri}");
    }
    let (s, v) = get(&st, "/api/grid?level=1&bbox=0,0,10,4&res=1").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!((v["rows"].as_u64(), v["cols"].as_u64()), (Some(4), Some(10)));
}

#[tokio::test]
async fn trajectory_streams_start_samples_and_summary() {
    let st = state();
    let (s, body) = post(&st, r#"{"vehicle":"M4.5","category":"B","seed":3,"estimator":"dryden","decimate":50}"#).await;
    assert_eq!(s, StatusCode::OK);
    let f = frames(&body);
    assert_eq!(f[0]["type"], "start");
    assert_eq!(f[0]["schema"], 1);
    assert_eq!(f[0]["model_checksum"], st.model_checksum());
    assert!(f.len() > 3);
    assert!(f[1..f.len() - 1].iter().all(|x| x["type"] == "sample"));
    let last = f.last().unwrap();
    assert_eq!(last["type"], "summary", "{last}");
    assert!(last["miss_m"].as_f64().unwrap() >= 0.0);
    let t: Vec<f64> = f[1..f.len() - 1].iter().map(|x| x["t_s"].as_f64().unwrap()).collect();
    assert!(t.windows(2).all(|w| w[1] > w[0]));
}

#[tokio::test]
async fn trajectory_is_reproducible_for_a_seed() {
    let st = state();
    let req = r#"{"vehicle":"M2.8","category":"A","seed":11,"estimator":"pstnet"}"#;
    let (_, a) = post(&st, req).await;
    let (_, b) = post(&st, req).await;
    assert_eq!(a, b);
}

#[tokio::test]
async fn trajectory_rejects_unknown_names() {
    let st = state();
    for body in [
        r#"{"vehicle":"M9.9","category":"A","seed":1,"estimator":"dryden"}"#,
        r#"{"vehicle":"M2.8","category":"Z","seed":1,"estimator":"dryden"}"#,
        r#"{"vehicle":"M2.8","category":"A","seed":1,"estimator":"oracle"}"#,
        r#"{"vehicle":"M2.8"}"#,
    ] {
        let (s, _) = post(&st, body).await;
        assert_eq!(s, StatusCode::BAD_REQUEST, "{body}");
    }
}

#[tokio::test]
async fn trajectory_refuses_when_workers_are_busy() {
    let client = PowerClient::new(IngestConfig::offline()).unwrap();
    let st = Arc::new(AppState::new(PstnetModel::init(Dims::default(), 7), Vec::new(), client).with_workers(0));
    let (s, b) = post(&st, r#"{"vehicle":"M2.8","category":"A","seed":1,"estimator":"dryden"}"#).await;
    assert_eq!(s, StatusCode::TOO_MANY_REQUESTS);
    let v: Value = serde_json::from_slice(&b).unwrap();
    assert_eq!(v["kind"], "busy");
}

#[tokio::test]
async fn swapping_the_model_changes_the_checksum() {
    let st = state();
    let before = st.model_checksum();
    st.swap_model(PstnetModel::init(Dims::default(), 8));
    let (_, v) = get(&st, "/api/health").await;
    assert_ne!(v["model_checksum"], before);
    assert_eq!(v["model_checksum"], st.model_checksum());
}

#[tokio::test]
async fn estimators_share_the_gust_field_but_not_the_trace() {
    let st = state();
    let (_, a) = post(&st, r#"{"vehicle":"M8.0","category":"C","seed":21,"estimator":"dryden","decimate":10}"#).await;
    let (_, b) = post(&st, r#"{"vehicle":"M8.0","category":"C","seed":21,"estimator":"pstnet","decimate":10}"#).await;
    let (fa, fb) = (frames(&a), frames(&b));
    let samples = |f: &[Value]| f.iter().filter(|x| x["type"] == "sample").cloned().collect::<Vec<_>>();
    let (sa, sb) = (samples(&fa), samples(&fb));
    let n = sa.len().min(sb.len());
    assert!(n > 10);
    for i in 0..n {
        assert_eq!(sa[i]["t_s"], sb[i]["t_s"]);
        assert_eq!(sa[i]["gust"], sb[i]["gust"], "gust differs at sample {i}");
    }
    assert_eq!(sa[0]["pos"], sb[0]["pos"]);
    assert_ne!(sa, sb);
    assert_ne!(sa[0]["k_est"], sb[0]["k_est"]);
}

#[tokio::test]
async fn fixture_estimates_are_deterministic() {
    let st = state();
    let (_, a) = get(&st, "/api/estimate?lat=70&lon=-150&level=5").await;
    let (_, b) = get(&st, "/api/estimate?lat=70&lon=-150&level=5").await;
    assert_eq!(a, b);
}
