//! Local HTTP API for the interactive workflow: upload an image, preview
//! threshold overlays, calibrate from two picked points, then measure.
//!
//! Everything lives under `/api/v1`; errors are JSON `{code, message}`.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, FromRequest, Multipart, Path, Request, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use leafmetric_core::{
    dpi_from_reference, measure, render_overlay, segment, BackgroundPolarity, Calibration,
    CalibrationError, CropRect, HueRange, PipelineParams, ReferenceMeasurement,
    RgbImage, Selection,
};
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::json;
use tower_http::services::ServeDir;

use crate::batch::OVERLAY_TINT;
use crate::codec::{decode_image, encode_png, DecodeError};
use crate::config::DEFAULT_MIN_AREA;
use crate::report::{measure_error_code, warnings, MetricsRecord};

pub const DEFAULT_IDLE_TIMEOUT: Duration = Duration::from_secs(30 * 60);
pub const DEFAULT_THRESHOLD: u8 = 128;
/// Boundary of the `multipart/mixed` preview response.
pub const PREVIEW_BOUNDARY: &str = "leafmetric-preview-boundary";
const MAX_UPLOAD_BYTES: usize = 512 * 1024 * 1024;

// ---------------------------------------------------------------- errors

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl ToString) -> Self {
        ApiError { status, code, message: message.to_string() }
    }

    fn invalid(message: impl ToString) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "InvalidParameter", message)
    }

    fn not_found(id: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "SessionNotFound", format!("no session `{id}`"))
    }

    fn internal(message: impl ToString) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "code": self.code, "message": self.message }))).into_response()
    }
}

impl From<DecodeError> for ApiError {
    fn from(e: DecodeError) -> Self {
        let status = match e {
            DecodeError::UnsupportedFormat(_) => StatusCode::UNSUPPORTED_MEDIA_TYPE,
            DecodeError::CorruptFile(_) | DecodeError::ZeroDimension => StatusCode::BAD_REQUEST,
        };
        ApiError::new(status, e.code(), e)
    }
}

impl From<CalibrationError> for ApiError {
    fn from(e: CalibrationError) -> Self {
        let code = match e {
            CalibrationError::DegenerateReference => "DegenerateReference",
            CalibrationError::NonPositiveLength(_) => "NonPositiveLength",
            CalibrationError::InvalidDpi(_) => "InvalidDpi",
        };
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, code, e)
    }
}

impl From<leafmetric_core::MeasureError> for ApiError {
    fn from(e: leafmetric_core::MeasureError) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, measure_error_code(&e), e)
    }
}

/// Empty bodies read as `{}`; syntax errors are 400, type and range errors 422.
fn parse_json<T: for<'de> Deserialize<'de>>(body: &[u8]) -> Result<T, ApiError> {
    let body = if body.iter().all(u8::is_ascii_whitespace) { b"{}".as_slice() } else { body };
    serde_json::from_slice(body).map_err(|e| match e.classify() {
        serde_json::error::Category::Data => ApiError::invalid(e),
        _ => ApiError::new(StatusCode::BAD_REQUEST, "MalformedJson", e),
    })
}

// ---------------------------------------------------------------- sessions

#[derive(Debug, Clone, PartialEq)]
struct SessionParams {
    crop: Option<CropRect>,
    polarity: BackgroundPolarity,
    threshold: u8,
    hue: Option<HueRange>,
    min_area: usize,
    calibration: Option<Calibration>,
}

impl Default for SessionParams {
    fn default() -> Self {
        SessionParams {
            crop: None,
            polarity: BackgroundPolarity::White,
            threshold: DEFAULT_THRESHOLD,
            hue: None,
            min_area: DEFAULT_MIN_AREA,
            calibration: None,
        }
    }
}

impl SessionParams {
    fn pipeline(&self) -> PipelineParams {
        let selection = match self.hue {
            Some(range) => Selection::Hue(range),
            None => Selection::Threshold { threshold: self.threshold, polarity: self.polarity },
        };
        PipelineParams { crop: self.crop, selection, min_area: self.min_area }
    }
}

struct Session {
    image: Arc<RgbImage>,
    params: tokio::sync::RwLock<SessionParams>,
    last_access: Mutex<Instant>,
}

pub struct SessionStore {
    sessions: RwLock<HashMap<String, Arc<Session>>>,
    idle_timeout: Duration,
}

impl SessionStore {
    pub fn new(idle_timeout: Duration) -> Self {
        SessionStore { sessions: RwLock::new(HashMap::new()), idle_timeout }
    }

    fn insert(&self, image: RgbImage) -> String {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let session = Session {
            image: Arc::new(image),
            params: tokio::sync::RwLock::new(SessionParams::default()),
            last_access: Mutex::new(Instant::now()),
        };
        self.sessions.write().unwrap().insert(id.clone(), Arc::new(session));
        id
    }

    fn get(&self, id: &str) -> Result<Arc<Session>, ApiError> {
        let session = self.sessions.read().unwrap().get(id).cloned().ok_or_else(|| ApiError::not_found(id))?;
        *session.last_access.lock().unwrap() = Instant::now();
        Ok(session)
    }

    fn remove(&self, id: &str) -> bool {
        self.sessions.write().unwrap().remove(id).is_some()
    }

    pub fn len(&self) -> usize {
        self.sessions.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Drops sessions idle for longer than the timeout as of `now`; returns
    /// how many went.
    pub fn evict_idle(&self, now: Instant) -> usize {
        let mut sessions = self.sessions.write().unwrap();
        let before = sessions.len();
        sessions.retain(|_, s| now.saturating_duration_since(*s.last_access.lock().unwrap()) <= self.idle_timeout);
        before - sessions.len()
    }
}

// ---------------------------------------------------------------- bodies

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum CropBody {
    Array([usize; 4]),
    Object { x: usize, y: usize, w: usize, h: usize },
}

impl From<CropBody> for CropRect {
    fn from(c: CropBody) -> Self {
        match c {
            CropBody::Array([x, y, w, h]) | CropBody::Object { x, y, w, h } => CropRect::new(x, y, w, h),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HueBody {
    lo: f64,
    hi: f64,
    min_saturation: Option<f64>,
    min_value: Option<f64>,
}

impl HueBody {
    fn range(&self) -> Result<HueRange, ApiError> {
        let range = match (self.min_saturation, self.min_value) {
            (None, None) => HueRange::with_default_gates(self.lo, self.hi),
            (s, v) => HueRange::new(
                self.lo,
                self.hi,
                s.unwrap_or(leafmetric_core::segmentation::DEFAULT_MIN_SATURATION),
                v.unwrap_or(leafmetric_core::segmentation::DEFAULT_MIN_VALUE),
            ),
        };
        range.map_err(ApiError::invalid)
    }
}

/// Tells an absent key (`None`) apart from an explicit `null` (`Some(None)`).
fn explicit<'de, D: Deserializer<'de>, T: Deserialize<'de>>(d: D) -> Result<Option<Option<T>>, D::Error> {
    Option::deserialize(d).map(Some)
}

/// Absent fields keep the session's current value; `crop: null` and
/// `hue: null` clear them.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PreviewBody {
    #[serde(default, deserialize_with = "explicit")]
    crop: Option<Option<CropBody>>,
    polarity: Option<String>,
    threshold: Option<i64>,
    min_area: Option<i64>,
    #[serde(default, deserialize_with = "explicit")]
    hue: Option<Option<HueBody>>,
    #[serde(default)]
    persist: bool,
}

impl PreviewBody {
    fn apply(self, current: &SessionParams) -> Result<SessionParams, ApiError> {
        let mut next = current.clone();
        if let Some(crop) = self.crop {
            next.crop = crop.map(CropRect::from);
        }
        if let Some(p) = &self.polarity {
            next.polarity = p.parse().map_err(|_| ApiError::invalid(format!("polarity `{p}` is not white or black")))?;
        }
        if let Some(t) = self.threshold {
            next.threshold = u8::try_from(t).map_err(|_| ApiError::invalid(format!("threshold {t} is outside 0..=255")))?;
        }
        if let Some(a) = self.min_area {
            next.min_area = usize::try_from(a).map_err(|_| ApiError::invalid(format!("min_area {a} is negative")))?;
        }
        match self.hue {
            Some(Some(h)) => next.hue = Some(h.range()?),
            Some(None) => next.hue = None,
            // Choosing a threshold or polarity switches back to grayscale selection.
            None if self.threshold.is_some() || self.polarity.is_some() => next.hue = None,
            None => {}
        }
        Ok(next)
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum PointBody {
    Array([f64; 2]),
    Object { x: f64, y: f64 },
}

impl From<PointBody> for (f64, f64) {
    fn from(p: PointBody) -> Self {
        match p {
            PointBody::Array([x, y]) | PointBody::Object { x, y } => (x, y),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CalibrationBody {
    p1: Option<PointBody>,
    p2: Option<PointBody>,
    real_length_mm: Option<f64>,
    dpi: Option<f64>,
}

impl CalibrationBody {
    fn calibration(self) -> Result<Calibration, ApiError> {
        match self {
            CalibrationBody { p1: None, p2: None, real_length_mm: None, dpi: Some(dpi) } => {
                Ok(Calibration::declared(dpi)?)
            }
            CalibrationBody { p1: Some(p1), p2: Some(p2), real_length_mm: Some(mm), dpi: None } => {
                Ok(dpi_from_reference(&ReferenceMeasurement::new(p1.into(), p2.into(), mm))?)
            }
            _ => Err(ApiError::invalid("expected either {p1, p2, real_length_mm} or {dpi}")),
        }
    }
}

#[derive(Debug, Serialize)]
struct CalibrationResponse {
    dpi: f64,
    source: &'static str,
}

impl From<Calibration> for CalibrationResponse {
    fn from(c: Calibration) -> Self {
        CalibrationResponse { dpi: c.dpi(), source: c.source().as_str() }
    }
}

#[derive(Debug, Serialize)]
struct MeasureResponse {
    #[serde(flatten)]
    metrics: MetricsRecord,
    component_areas: Vec<usize>,
    warnings: Vec<String>,
    dpi: f64,
    calibration_source: &'static str,
}

// ---------------------------------------------------------------- handlers

type AppState = Arc<SessionStore>;

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(ApiError::internal)
}

/// Accepts a `multipart/form-data` upload (field `image` or `file`, else the
/// first field) or the raw image bytes as the body.
async fn upload_bytes(req: Request) -> Result<Bytes, ApiError> {
    let is_multipart = req
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("multipart/form-data"));
    if !is_multipart {
        return Bytes::from_request(req, &())
            .await
            .map_err(|e| ApiError::new(e.status(), "BadRequest", e.body_text()));
    }
    let bad = |e: axum::extract::multipart::MultipartError| ApiError::new(e.status(), "BadRequest", e.body_text());
    let mut multipart = Multipart::from_request(req, &())
        .await
        .map_err(|e| ApiError::new(e.status(), "BadRequest", e.body_text()))?;
    let mut first = None;
    while let Some(field) = multipart.next_field().await.map_err(bad)? {
        let named = matches!(field.name(), Some("image" | "file"));
        let data = field.bytes().await.map_err(bad)?;
        if named {
            return Ok(data);
        }
        first.get_or_insert(data);
    }
    first.ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "BadRequest", "multipart upload has no fields"))
}

async fn create_session(State(store): State<AppState>, req: Request) -> Result<Response, ApiError> {
    let bytes = upload_bytes(req).await?;
    let image = blocking(move || decode_image(&bytes)).await??;
    let (width, height) = (image.width(), image.height());
    let id = store.insert(image);
    tracing::info!(%id, width, height, "session created");
    Ok((StatusCode::CREATED, Json(json!({ "id": id, "width": width, "height": height }))).into_response())
}

async fn get_image(State(store): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let image = store.get(&id)?.image.clone();
    let png = blocking(move || encode_png(&image)).await?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

fn preview_response(png: Vec<u8>, counts: serde_json::Value) -> Response {
    let mut body = Vec::with_capacity(png.len() + 512);
    body.extend_from_slice(
        format!(
            "--{PREVIEW_BOUNDARY}\r\nContent-Type: image/png\r\nContent-Disposition: inline; name=\"overlay\"; filename=\"overlay.png\"\r\n\r\n"
        )
        .as_bytes(),
    );
    body.extend_from_slice(&png);
    body.extend_from_slice(
        format!("\r\n--{PREVIEW_BOUNDARY}\r\nContent-Type: application/json\r\nContent-Disposition: inline; name=\"counts\"\r\n\r\n")
            .as_bytes(),
    );
    body.extend_from_slice(counts.to_string().as_bytes());
    body.extend_from_slice(format!("\r\n--{PREVIEW_BOUNDARY}--\r\n").as_bytes());
    let content_type = format!("multipart/mixed; boundary={PREVIEW_BOUNDARY}");
    let mut res = body.into_response();
    let headers = res.headers_mut();
    headers.insert(header::CONTENT_TYPE, HeaderValue::from_str(&content_type).unwrap());
    headers.insert(header::CACHE_CONTROL, HeaderValue::from_static("no-store"));
    res
}

async fn run_preview(image: Arc<RgbImage>, params: &SessionParams) -> Result<(Vec<u8>, serde_json::Value), ApiError> {
    let pipeline = params.pipeline();
    blocking(move || {
        let seg = segment(&image, &pipeline)?;
        let overlay = render_overlay(&seg.image, &seg.mask, OVERLAY_TINT).map_err(ApiError::internal)?;
        let counts = json!({
            "area_px": seg.area_px(),
            "component_count": seg.component_count(),
            "component_areas": seg.component_areas,
            "width": seg.image.width(),
            "height": seg.image.height(),
        });
        Ok((encode_png(&overlay), counts))
    })
    .await?
}

async fn preview(State(store): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let session = store.get(&id)?;
    let body: PreviewBody = parse_json(&body)?;
    let persist = body.persist;
    let (png, counts) = if persist {
        // Writers hold the lock for the whole run so a failing preview never
        // leaves half-applied settings behind.
        let mut current = session.params.write().await;
        let next = body.apply(&current)?;
        let out = run_preview(session.image.clone(), &next).await?;
        *current = next;
        out
    } else {
        let current = session.params.read().await;
        let next = body.apply(&current)?;
        run_preview(session.image.clone(), &next).await?
    };
    Ok(preview_response(png, counts))
}

async fn calibrate(State(store): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let session = store.get(&id)?;
    let cal = parse_json::<CalibrationBody>(&body)?.calibration()?;
    session.params.write().await.calibration = Some(cal);
    Ok(Json(CalibrationResponse::from(cal)).into_response())
}

async fn measure_session(State(store): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let session = store.get(&id)?;
    let params = session.params.read().await.clone();
    let cal = params.calibration.ok_or_else(|| {
        ApiError::new(StatusCode::CONFLICT, "CalibrationMissing", "set a dpi or a reference before measuring")
    })?;
    let image = session.image.clone();
    let pipeline = params.pipeline();
    let m = blocking(move || measure(&image, &pipeline, &cal)).await??;
    Ok(Json(MeasureResponse {
        metrics: MetricsRecord::from(&m.metrics),
        warnings: warnings(&m.metrics),
        component_areas: m.segmented.component_areas,
        dpi: cal.dpi(),
        calibration_source: cal.source().as_str(),
    })
    .into_response())
}

async fn delete_session(State(store): State<AppState>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    if store.remove(&id) {
        Ok(StatusCode::NO_CONTENT)
    } else {
        Err(ApiError::not_found(&id))
    }
}

pub fn router(store: AppState, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", axum::routing::delete(delete_session))
        .route("/sessions/{id}/image", get(get_image))
        .route("/sessions/{id}/preview", post(preview))
        .route("/sessions/{id}/calibration", post(calibrate))
        .route("/sessions/{id}/measure", post(measure_session))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .with_state(store);
    let app = Router::new().nest("/api/v1", api);
    match static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    }
}

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub bind: SocketAddr,
    pub static_dir: Option<PathBuf>,
    pub idle_timeout: Duration,
}

impl Default for ServeOptions {
    fn default() -> Self {
        ServeOptions {
            bind: SocketAddr::from(([127, 0, 0, 1], 8080)),
            static_dir: None,
            idle_timeout: DEFAULT_IDLE_TIMEOUT,
        }
    }
}

pub async fn serve(opts: ServeOptions) -> anyhow::Result<()> {
    let store = Arc::new(SessionStore::new(opts.idle_timeout));
    let sweeper = store.clone();
    let every = (opts.idle_timeout / 4).clamp(Duration::from_secs(1), Duration::from_secs(60));
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(every);
        loop {
            tick.tick().await;
            let n = sweeper.evict_idle(Instant::now());
            if n > 0 {
                tracing::info!(evicted = n, "idle sessions dropped");
            }
        }
    });
    let listener = tokio::net::TcpListener::bind(opts.bind).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(store, opts.static_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
