//! HTTP and WebSocket front end for the orchestrator.

use crate::acts::ModalityEvent;
use crate::affect::AffectCue;
use crate::bus::{FragmentParams, ResumePoint, Topic, TopicFilter};
use crate::orchestrator::{ErrorClass, Orchestrator, OrchestratorError, RatingRequest, SessionConfig};
use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;
use tokio::sync::mpsc;

/// Environment variables that override config-file keys.
pub const ENV_OVERRIDES: [(&str, &str); 6] = [
    ("CONFLICTSIM_BIND", "bind"),
    ("CONFLICTSIM_LOG_DIR", "logDir"),
    ("CONFLICTSIM_CATALOG", "catalogPath"),
    ("CONFLICTSIM_NORMS", "normSetPath"),
    ("CONFLICTSIM_SPEECH_ACTS", "ruleSetPath"),
    ("CONFLICTSIM_TAGS", "tagTablePath"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct ServerConfig {
    pub bind: String,
    pub log_dir: Option<PathBuf>,
    /// Defaults for sessions that do not name their own data files.
    pub catalog_path: Option<PathBuf>,
    pub norm_set_path: Option<PathBuf>,
    pub rule_set_path: Option<PathBuf>,
    pub tag_table_path: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            bind: "127.0.0.1:8080".into(),
            log_dir: None,
            catalog_path: None,
            norm_set_path: None,
            rule_set_path: None,
            tag_table_path: None,
        }
    }
}

impl ServerConfig {
    /// Reads a TOML config file (if given), then applies environment overrides.
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", p.display()))?;
                toml::from_str(&text).map_err(|e| anyhow::anyhow!("invalid config {}: {e}", p.display()))?
            }
            None => ServerConfig::default(),
        };
        config.apply_env(std::env::vars());
        Ok(config)
    }

    pub fn apply_env(&mut self, vars: impl IntoIterator<Item = (String, String)>) {
        for (key, value) in vars {
            match key.as_str() {
                "CONFLICTSIM_BIND" => self.bind = value,
                "CONFLICTSIM_LOG_DIR" => self.log_dir = Some(value.into()),
                "CONFLICTSIM_CATALOG" => self.catalog_path = Some(value.into()),
                "CONFLICTSIM_NORMS" => self.norm_set_path = Some(value.into()),
                "CONFLICTSIM_SPEECH_ACTS" => self.rule_set_path = Some(value.into()),
                "CONFLICTSIM_TAGS" => self.tag_table_path = Some(value.into()),
                _ => {}
            }
        }
    }

    fn fill_defaults(&self, config: &mut SessionConfig) {
        fn or(slot: &mut Option<PathBuf>, default: &Option<PathBuf>) {
            if slot.is_none() {
                slot.clone_from(default);
            }
        }
        or(&mut config.catalog_path, &self.catalog_path);
        or(&mut config.norm_set_path, &self.norm_set_path);
        or(&mut config.rule_set_path, &self.rule_set_path);
        or(&mut config.tag_table_path, &self.tag_table_path);
    }
}

#[derive(Clone)]
struct AppState {
    orchestrator: Arc<Orchestrator>,
    config: Arc<ServerConfig>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
        }
    }
}

impl From<OrchestratorError> for ApiError {
    fn from(err: OrchestratorError) -> Self {
        let status = match err.class() {
            ErrorClass::NotFound => StatusCode::NOT_FOUND,
            ErrorClass::Invalid => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorClass::Conflict => StatusCode::CONFLICT,
            ErrorClass::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError {
            status,
            message: err.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_body<T: DeserializeOwned + Default>(body: &Bytes) -> ApiResult<T> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

fn parse_required<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

/// Runs a blocking orchestrator call off the async executor; publishing may
/// block on a slow subscriber.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, OrchestratorError> + Send + 'static,
) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: e.to_string(),
        })?
        .map_err(ApiError::from)
}

pub fn router(orchestrator: Arc<Orchestrator>, config: ServerConfig) -> Router {
    let state = AppState {
        orchestrator,
        config: Arc::new(config),
    };
    Router::new()
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/rating", post(post_rating))
        .route("/sessions/{id}/cue", post(post_cue))
        .route("/sessions/{id}/modality", post(post_modality))
        .route("/sessions/{id}/end", post(end_session))
        .route("/sessions/{id}/fragments", get(get_fragments))
        .route("/sessions/{id}/log", get(get_log))
        .route("/sessions/{id}/stream", get(stream))
        .with_state(state)
}

async fn create_session(State(st): State<AppState>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let mut config: SessionConfig = parse_body(&body)?;
    st.config.fill_defaults(&mut config);
    let orchestrator = st.orchestrator.clone();
    let snapshot = blocking(move || orchestrator.create_session(config)).await?;
    Ok((StatusCode::CREATED, Json(snapshot)))
}

async fn list_sessions(State(st): State<AppState>) -> impl IntoResponse {
    Json(serde_json::json!({ "sessions": st.orchestrator.session_ids() }))
}

async fn get_session(State(st): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(st.orchestrator.snapshot(&id)?))
}

async fn post_rating(
    State(st): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let req: RatingRequest = parse_required(&body)?;
    let o = st.orchestrator.clone();
    Ok(Json(blocking(move || o.submit_rating_request(&id, req)).await?))
}

async fn post_cue(
    State(st): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let cue: AffectCue = parse_required(&body)?;
    let o = st.orchestrator.clone();
    Ok(Json(blocking(move || o.submit_cue(&id, cue)).await?))
}

async fn post_modality(
    State(st): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let event: ModalityEvent = parse_required(&body)?;
    let o = st.orchestrator.clone();
    Ok(Json(blocking(move || o.submit_modality(&id, event)).await?))
}

async fn end_session(State(st): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<impl IntoResponse> {
    let o = st.orchestrator.clone();
    Ok(Json(blocking(move || o.end_session(&id)).await?))
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct FragmentQuery {
    pleasure_max: Option<f64>,
    arousal_min: Option<f64>,
    min_dur: Option<u64>,
}

async fn get_fragments(
    State(st): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<FragmentQuery>,
) -> ApiResult<impl IntoResponse> {
    let defaults = FragmentParams::default();
    let params = FragmentParams {
        pleasure_max: q.pleasure_max.unwrap_or(defaults.pleasure_max),
        arousal_min: q.arousal_min.unwrap_or(defaults.arousal_min),
        min_duration_ms: q.min_dur.unwrap_or(defaults.min_duration_ms),
    };
    Ok(Json(st.orchestrator.fragments(&id, &params)?))
}

async fn get_log(State(st): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<impl IntoResponse> {
    let log = st.orchestrator.log(&id)?;
    Ok((
        [
            (header::CONTENT_TYPE, "application/x-ndjson".to_string()),
            (
                header::CONTENT_DISPOSITION,
                format!("attachment; filename=\"{id}.ndjson\""),
            ),
        ],
        log.to_ndjson(),
    ))
}

/// `from=beginning` (default) replays the log first, `from=live` skips it,
/// and `afterTopic` + `afterSeq` resume after a known event.
#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "camelCase")]
struct StreamQuery {
    from: Option<String>,
    after_topic: Option<String>,
    after_seq: Option<u64>,
    /// Comma-separated topic names.
    topics: Option<String>,
}

impl StreamQuery {
    fn resolve(&self) -> ApiResult<(TopicFilter, Option<ResumePoint>)> {
        let filter = match &self.topics {
            None => TopicFilter::All,
            Some(list) => TopicFilter::Only(
                list.split(',')
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<Topic>().map_err(|e| ApiError::bad_request(e.to_string())))
                    .collect::<ApiResult<_>>()?,
            ),
        };
        let resume = match (&self.after_topic, self.after_seq, self.from.as_deref()) {
            (Some(topic), Some(seq), _) => Some(ResumePoint::After {
                topic: topic
                    .parse()
                    .map_err(|e: crate::bus::BusError| ApiError::bad_request(e.to_string()))?,
                seq,
            }),
            (Some(_), None, _) | (None, Some(_), _) => {
                return Err(ApiError::bad_request("afterTopic and afterSeq go together"))
            }
            (None, None, None | Some("beginning")) => Some(ResumePoint::Beginning),
            (None, None, Some("live")) => None,
            (None, None, Some(other)) => return Err(ApiError::bad_request(format!("unknown from={other}"))),
        };
        Ok((filter, resume))
    }
}

async fn stream(
    State(st): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<StreamQuery>,
    ws: WebSocketUpgrade,
) -> ApiResult<Response> {
    let (filter, resume) = q.resolve()?;
    let subscription = st.orchestrator.subscribe(&id, filter, resume)?;
    Ok(ws.on_upgrade(move |socket| pump(socket, subscription)))
}

/// Bridges a blocking bus subscription onto the socket. Each frame is one
/// log line.
async fn pump(mut socket: WebSocket, mut subscription: crate::bus::Subscription) {
    let (tx, mut rx) = mpsc::channel::<String>(64);
    let reader = tokio::task::spawn_blocking(move || loop {
        match subscription.recv_timeout(Duration::from_millis(200)) {
            Ok(event) => {
                if tx.blocking_send(event.to_line()).is_err() {
                    break;
                }
            }
            Err(std::sync::mpsc::RecvTimeoutError::Timeout) => {
                if tx.is_closed() {
                    break;
                }
            }
            Err(std::sync::mpsc::RecvTimeoutError::Disconnected) => break,
        }
    });
    loop {
        tokio::select! {
            line = rx.recv() => match line {
                Some(line) => {
                    if socket.send(Message::Text(line.into())).await.is_err() {
                        break;
                    }
                }
                None => {
                    let _ = socket.send(Message::Close(None)).await;
                    break;
                }
            },
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {}
            },
        }
    }
    drop(rx);
    let _ = reader.await;
}

/// Binds and serves until ctrl-c.
pub async fn serve(config: ServerConfig) -> anyhow::Result<()> {
    let mut orchestrator = Orchestrator::new();
    if let Some(dir) = &config.log_dir {
        std::fs::create_dir_all(dir)?;
        orchestrator = orchestrator.with_log_dir(dir);
    }
    let listener = tokio::net::TcpListener::bind(&config.bind).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    let app = router(Arc::new(orchestrator), config);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn env_overrides_config_file_keys() {
        let mut config: ServerConfig = toml::from_str("bind = \"0.0.0.0:9000\"\nlogDir = \"/tmp/a\"").unwrap();
        config.apply_env([
            ("CONFLICTSIM_LOG_DIR".to_string(), "/tmp/b".to_string()),
            ("UNRELATED".to_string(), "x".to_string()),
        ]);
        assert_eq!(config.bind, "0.0.0.0:9000");
        assert_eq!(config.log_dir, Some(PathBuf::from("/tmp/b")));
    }

    #[test]
    fn stream_query_resolution() {
        let q = StreamQuery::default();
        assert_eq!(q.resolve().unwrap(), (TopicFilter::All, Some(ResumePoint::Beginning)));
        let q = StreamQuery {
            after_topic: Some("wizard.rating".into()),
            after_seq: Some(3),
            topics: Some("wizard.rating,student.command".into()),
            ..Default::default()
        };
        let (filter, resume) = q.resolve().unwrap();
        assert_eq!(
            filter,
            TopicFilter::Only(vec![Topic::WizardRating, Topic::StudentCommand])
        );
        assert_eq!(
            resume,
            Some(ResumePoint::After {
                topic: Topic::WizardRating,
                seq: 3
            })
        );
        let q = StreamQuery {
            after_seq: Some(3),
            ..Default::default()
        };
        assert!(q.resolve().is_err());
    }
}
