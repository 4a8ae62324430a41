//! HTTP API over the model, the weather ingest and the simulator. Every JSON
//! body carries `version` and `model_checksum`; trajectories stream as
//! newline-delimited JSON frames.

use std::collections::HashMap;
use std::convert::Infallible;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::{mpsc, Semaphore};

use crate::atmos::{argmax, Regime};
use crate::estimators::{builtin, EstimatorRef};
use crate::ingest::{IngestError, PowerClient, Source, WeatherQuery, NATIVE_RESOLUTION_DEG};
use crate::net::PstnetModel;
use crate::sim::{run::simulate_traced, Category, Scenario, ScenarioPresets, SimConfig, VehicleClass, CEP_THRESHOLD_M};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Version of the trajectory frame schema.
pub const FRAME_SCHEMA: u32 = 1;
/// The eight selectable flight levels (m).
pub const FLIGHT_LEVELS_M: [f64; 8] = [500.0, 1_000.0, 2_000.0, 4_000.0, 6_000.0, 9_000.0, 12_000.0, 16_000.0];
pub const TRAJECTORY_WORKERS: usize = 4;
/// Live grids are fetched point by point at one request per second.
pub const MAX_LIVE_GRID_CELLS: usize = 400;
pub const DEFAULT_DECIMATE: usize = 20;

struct Loaded {
    model: Arc<PstnetModel>,
    checksum: String,
}

pub struct AppState {
    loaded: RwLock<Arc<Loaded>>,
    extra: Vec<EstimatorRef>,
    ingest: Arc<PowerClient>,
    presets: ScenarioPresets,
    sim: SimConfig,
    workers: Arc<Semaphore>,
    grid_cache: Mutex<HashMap<String, (Instant, Arc<Value>)>>,
    grid_ttl: Duration,
}

impl AppState {
    /// `extra` holds additional trajectory estimators (trained baselines);
    /// `pstnet` and the physics-only estimators are always available.
    pub fn new(model: PstnetModel, extra: Vec<EstimatorRef>, ingest: PowerClient) -> Self {
        let grid_ttl = Duration::from_secs(ingest.config().ttl_s);
        Self {
            loaded: RwLock::new(Arc::new(Self::wrap(model))),
            extra,
            ingest: Arc::new(ingest),
            presets: ScenarioPresets::shipped().clone(),
            sim: SimConfig::default(),
            workers: Arc::new(Semaphore::new(TRAJECTORY_WORKERS)),
            grid_cache: Mutex::new(HashMap::new()),
            grid_ttl,
        }
    }

    pub fn with_workers(mut self, n: usize) -> Self {
        self.workers = Arc::new(Semaphore::new(n));
        self
    }

    fn wrap(model: PstnetModel) -> Loaded {
        Loaded { checksum: format!("{:08x}", model.checksum()), model: Arc::new(model) }
    }

    fn current(&self) -> Arc<Loaded> {
        self.loaded.read().expect("model lock").clone()
    }

    /// Replaces the served model; in-flight requests keep the old one.
    pub fn swap_model(&self, model: PstnetModel) {
        *self.loaded.write().expect("model lock") = Arc::new(Self::wrap(model));
    }

    pub fn model_checksum(&self) -> String {
        self.current().checksum.clone()
    }

    fn estimator(&self, name: &str, loaded: &Loaded) -> Option<EstimatorRef> {
        if name == "pstnet" {
            return Some(loaded.model.clone());
        }
        builtin(name).or_else(|| self.extra.iter().find(|e| e.name() == name).cloned())
    }

    fn estimator_names(&self) -> Vec<String> {
        let mut v = vec!["pstnet".to_string()];
        v.extend(self.extra.iter().map(|e| e.name().to_string()));
        v.extend(["dryden", "truth", "none"].map(String::from));
        v
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/estimate", get(estimate))
        .route("/api/grid", get(grid))
        .route("/api/trajectory", post(trajectory))
        .with_state(state)
}

pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await
}

fn envelope(checksum: &str, mut body: Value) -> Value {
    body["version"] = json!(VERSION);
    body["model_checksum"] = json!(checksum);
    body
}

struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
    checksum: String,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = envelope(&self.checksum, json!({"error": self.message, "kind": self.kind}));
        (self.status, Json(body)).into_response()
    }
}

fn bad_request(checksum: &str, message: impl Into<String>) -> ApiError {
    ApiError { status: StatusCode::BAD_REQUEST, kind: "bad_request", message: message.into(), checksum: checksum.into() }
}

fn ingest_failure(checksum: &str, e: &crate::Error) -> ApiError {
    match e {
        crate::Error::Ingest(IngestError::InvalidQuery(m)) => bad_request(checksum, m.clone()),
        crate::Error::Ingest(i) => ApiError {
            status: StatusCode::BAD_GATEWAY,
            kind: match i {
                IngestError::Transport { .. } => "transport",
                IngestError::Parse { .. } => "parse",
                IngestError::Partial { .. } => "partial",
                _ => "ingest",
            },
            message: i.to_string(),
            checksum: checksum.into(),
        },
        other => ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            kind: "internal",
            message: other.to_string(),
            checksum: checksum.into(),
        },
    }
}

fn internal(checksum: &str, message: impl Into<String>) -> ApiError {
    ApiError { status: StatusCode::INTERNAL_SERVER_ERROR, kind: "internal", message: message.into(), checksum: checksum.into() }
}

fn param<T: std::str::FromStr>(q: &HashMap<String, String>, key: &str, checksum: &str) -> Result<Option<T>, ApiError> {
    q.get(key)
        .map(|v| v.trim().parse::<T>().map_err(|_| bad_request(checksum, format!("invalid '{key}': {v}"))))
        .transpose()
}

fn level_altitude(level: Option<usize>, checksum: &str) -> Result<(usize, f64), ApiError> {
    let level = level.ok_or_else(|| bad_request(checksum, "missing 'level'"))?;
    FLIGHT_LEVELS_M
        .get(level)
        .map(|&h| (level, h))
        .ok_or_else(|| bad_request(checksum, format!("level {level} outside 0..={}", FLIGHT_LEVELS_M.len() - 1)))
}

async fn health(State(st): State<Arc<AppState>>) -> Json<Value> {
    let loaded = st.current();
    Json(envelope(
        &loaded.checksum,
        json!({
            "status": "ok",
            "offline": st.ingest.is_offline(),
            "flight_levels_m": FLIGHT_LEVELS_M,
            "estimators": st.estimator_names(),
            "params": loaded.model.param_audit().total,
        }),
    ))
}

async fn estimate(State(st): State<Arc<AppState>>, Query(q): Query<HashMap<String, String>>) -> Result<Json<Value>, ApiError> {
    let loaded = st.current();
    let cs = loaded.checksum.clone();
    let lat: f64 = param(&q, "lat", &cs)?.ok_or_else(|| bad_request(&cs, "missing 'lat'"))?;
    let lon: f64 = param(&q, "lon", &cs)?.ok_or_else(|| bad_request(&cs, "missing 'lon'"))?;
    let (level, altitude) = level_altitude(param(&q, "level", &cs)?, &cs)?;
    let ingest = st.ingest.clone();
    let fetched = tokio::task::spawn_blocking(move || ingest.column(lat, lon, &[altitude]))
        .await
        .map_err(|e| internal(&cs, e.to_string()))?;
    let (resp, column) = fetched.map_err(|e| ingest_failure(&cs, &e))?;
    let state = column[0];
    let (k, diag) = loaded.model.forward(&state).map_err(|e| internal(&cs, e.to_string()))?;
    let regime = Regime::from_index(argmax(&diag.alpha)).expect("four experts");
    Ok(Json(envelope(
        &cs,
        json!({
            "lat": lat,
            "lon": lon,
            "level": level,
            "altitude_m": altitude,
            "k": k,
            "k_mo": diag.k_mo,
            "alpha": diag.alpha,
            "regime": regime.name(),
            "source": resp.source.to_string(),
            "state": {
                "temperature_k": state.temperature_k,
                "pressure_pa": state.pressure_pa,
                "wind10_mps": state.wind10_mps,
                "lapse_k_per_m": state.lapse_k_per_m,
            },
        }),
    )))
}

/// Cell centres of a bounding box `[min_lon, min_lat, max_lon, max_lat]`,
/// rows north to south, columns west to east.
pub fn grid_cells(bbox: [f64; 4], res: f64) -> (usize, usize, Vec<(f64, f64)>) {
    let cols = ((bbox[2] - bbox[0]) / res).round().max(1.0) as usize;
    let rows = ((bbox[3] - bbox[1]) / res).round().max(1.0) as usize;
    let mut cells = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let lat = bbox[3] - (r as f64 + 0.5) * res;
        for c in 0..cols {
            cells.push((lat, bbox[0] + (c as f64 + 0.5) * res));
        }
    }
    (rows, cols, cells)
}

/// Model estimates at `altitude` for each cell centre. Offline points are
/// evaluated in parallel; live points go through the client's pacing.
pub fn grid_values(
    model: &PstnetModel,
    ingest: &PowerClient,
    altitude: f64,
    cells: &[(f64, f64)],
) -> crate::Result<(Vec<f64>, Option<Source>)> {
    let point = |&(lat, lon): &(f64, f64)| -> crate::Result<(f64, Source)> {
        let (resp, col) = ingest.column(lat, lon, &[altitude])?;
        Ok((model.predict(&col[0]), resp.source))
    };
    let out: Vec<(f64, Source)> = if ingest.is_offline() {
        cells.par_iter().map(point).collect::<crate::Result<_>>()?
    } else {
        cells.iter().map(point).collect::<crate::Result<_>>()?
    };
    let source = out.first().map(|o| o.1);
    Ok((out.into_iter().map(|o| o.0).collect(), source))
}

fn parse_bbox(s: Option<&String>, cs: &str) -> Result<[f64; 4], ApiError> {
    let Some(s) = s.filter(|s| !s.trim().is_empty() && s.trim() != "global") else {
        return Ok([-180.0, -90.0, 180.0, 90.0]);
    };
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad_request(cs, format!("invalid bbox '{s}'")))?;
    let ok = v.len() == 4
        && (-180.0..=180.0).contains(&v[0])
        && (-180.0..=180.0).contains(&v[2])
        && (-90.0..=90.0).contains(&v[1])
        && (-90.0..=90.0).contains(&v[3])
        && v[0] < v[2]
        && v[1] < v[3];
    if !ok {
        return Err(bad_request(cs, "bbox must be min_lon,min_lat,max_lon,max_lat within range"));
    }
    Ok([v[0], v[1], v[2], v[3]])
}

async fn grid(State(st): State<Arc<AppState>>, Query(q): Query<HashMap<String, String>>) -> Result<Json<Value>, ApiError> {
    let loaded = st.current();
    let cs = loaded.checksum.clone();
    let (level, altitude) = level_altitude(param(&q, "level", &cs)?, &cs)?;
    let res: f64 = param(&q, "res", &cs)?.unwrap_or(2.0);
    if !(res > 0.0 && res <= 90.0) {
        return Err(bad_request(&cs, "res must lie in (0, 90] degrees"));
    }
    let offline = st.ingest.is_offline();
    if !offline && res < NATIVE_RESOLUTION_DEG {
        return Err(bad_request(&cs, format!("res {res} finer than the native {NATIVE_RESOLUTION_DEG} degree grid")));
    }
    let bbox = parse_bbox(q.get("bbox"), &cs)?;
    let (rows, cols, cells) = grid_cells(bbox, res);
    if !offline && cells.len() > MAX_LIVE_GRID_CELLS {
        return Err(bad_request(&cs, format!("{} cells exceed the live limit of {MAX_LIVE_GRID_CELLS}", cells.len())));
    }
    let epoch = WeatherQuery::DEFAULT_DATE;
    let key = format!("{level}|{bbox:?}|{res}|{epoch}|{cs}");
    if let Some((at, v)) = st.grid_cache.lock().expect("grid cache").get(&key) {
        if at.elapsed() < st.grid_ttl {
            let mut body = (**v).clone();
            body["cached"] = json!(true);
            return Ok(Json(body));
        }
    }
    let ingest = st.ingest.clone();
    let model = loaded.model.clone();
    let computed = tokio::task::spawn_blocking(move || grid_values(&model, &ingest, altitude, &cells))
        .await
        .map_err(|e| internal(&cs, e.to_string()))?;
    let (values, source) = computed.map_err(|e| ingest_failure(&cs, &e))?;
    let source = source.map(|s| s.to_string()).unwrap_or_default();
    let body = envelope(
        &cs,
        json!({
            "level": level,
            "altitude_m": altitude,
            "res": res,
            "bbox": bbox,
            "rows": rows,
            "cols": cols,
            "values": values,
            "source": source,
            "data_epoch": epoch.to_string(),
            "cached": false,
        }),
    );
    st.grid_cache.lock().expect("grid cache").insert(key, (Instant::now(), Arc::new(body.clone())));
    Ok(Json(body))
}

#[derive(Debug, Clone, Deserialize)]
pub struct TrajectoryRequest {
    /// Preset name or Mach number: "M2.8", "4.5", "hypersonic-glide".
    pub vehicle: String,
    pub category: String,
    pub seed: u64,
    pub estimator: String,
    #[serde(default)]
    pub variant: usize,
    #[serde(default)]
    pub decimate: Option<usize>,
}

fn frame(v: Value) -> String {
    let mut s = v.to_string();
    s.push('\n');
    s
}

async fn trajectory(State(st): State<Arc<AppState>>, Json(body): Json<Value>) -> Result<Response, ApiError> {
    let loaded = st.current();
    let cs = loaded.checksum.clone();
    let req: TrajectoryRequest =
        serde_json::from_value(body).map_err(|e| bad_request(&cs, format!("invalid trajectory request: {e}")))?;
    let vehicle = VehicleClass::by_name(&req.vehicle)
        .ok_or_else(|| bad_request(&cs, format!("unknown vehicle '{}' (expected M2.8, M4.5 or M8.0)", req.vehicle)))?;
    let category: Category = req.category.parse().map_err(|e: crate::Error| bad_request(&cs, e.to_string()))?;
    let est = st
        .estimator(&req.estimator, &loaded)
        .ok_or_else(|| bad_request(&cs, format!("unknown estimator '{}'", req.estimator)))?;
    let scenario = Scenario::build(&st.presets, category, &vehicle, req.variant, req.seed)
        .map_err(|e| bad_request(&cs, e.to_string()))?;
    let permit = st.workers.clone().try_acquire_owned().map_err(|_| ApiError {
        status: StatusCode::TOO_MANY_REQUESTS,
        kind: "busy",
        message: format!("all {TRAJECTORY_WORKERS} trajectory workers are busy"),
        checksum: cs.clone(),
    })?;
    let decimate = req.decimate.unwrap_or(DEFAULT_DECIMATE).max(1);
    let sim = st.sim;
    let (tx, rx) = mpsc::channel::<String>(256);
    tokio::task::spawn_blocking(move || {
        let _permit = permit;
        let start = envelope(
            &cs,
            json!({
                "type": "start",
                "schema": FRAME_SCHEMA,
                "scenario": scenario.id,
                "estimator": est.name(),
                "seed": scenario.seed,
                "target": scenario.target,
                "cep_threshold_m": CEP_THRESHOLD_M,
            }),
        );
        if tx.blocking_send(frame(start)).is_err() {
            return;
        }
        let outcome = scenario.gust_field(&sim).and_then(|field| {
            simulate_traced(&scenario, &field, est.as_ref(), &sim, decimate, &mut |s| {
                let _ = tx.blocking_send(frame(json!({
                    "type": "sample",
                    "t_s": s.t_s,
                    "pos": s.pos,
                    "nav_pos": s.nav_pos,
                    "gust": s.gust,
                    "k_est": s.k_est,
                })));
            })
        });
        let last = match outcome {
            Ok(o) if o.aborted.is_none() => json!({
                "type": "summary",
                "miss_m": o.miss_m,
                "cep_hit": o.cep_hit,
                "flight_time_s": o.flight_time_s,
            }),
            Ok(o) => json!({"type": "error", "message": o.aborted, "miss_m": o.miss_m, "t_s": o.flight_time_s}),
            Err(e) => json!({"type": "error", "message": e.to_string()}),
        };
        let _ = tx.blocking_send(frame(last));
    });
    let stream = futures::stream::unfold(rx, |mut rx| async move { rx.recv().await.map(|f| (Ok::<_, Infallible>(f), rx)) });
    Ok(Response::builder()
        .status(StatusCode::OK)
        .header(header::CONTENT_TYPE, "application/x-ndjson")
        .body(Body::from_stream(stream))
        .expect("valid response"))
}
