//! REST routes and the inbound webhook.

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use baitmail_core::archive::{
    compute_all_metrics, compute_metrics, cross_instance_report, CrossInstanceOptions, CrossInstanceReport,
    MetricsOptions, MetricsReport,
};
use baitmail_core::clock::Clock;
use baitmail_core::gateway::{parse_inbound, InboundPayload};
use baitmail_core::ingestion::{IngestionError, Review, ReviewDecision, TargetState};
use baitmail_core::orchestrator::{
    Conversation, ConversationId, ConversationState, DebriefOutcome, MessageDirection, OrchestratorError, Persona,
    StopReason,
};
use baitmail_core::EmailAddress;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::engine::{EngineGone, Instance};

#[derive(Clone)]
pub struct AppState {
    pub instances: Arc<Vec<Instance>>,
    pub clock: Arc<dyn Clock>,
    /// Bearer token required on `/api/*` when set.
    pub token: Option<String>,
}

impl AppState {
    pub fn new(instances: Vec<Instance>, clock: Arc<dyn Clock>) -> Self {
        AppState {
            instances: Arc::new(instances),
            clock,
            token: None,
        }
    }

    fn instance(&self, name: Option<&str>) -> Result<&Instance, ApiError> {
        match name {
            None => self.instances.first().ok_or_else(|| ApiError::unavailable("no instances configured")),
            Some(n) => self
                .instances
                .iter()
                .find(|i| i.name() == n)
                .ok_or_else(|| ApiError::not_found(format!("unknown instance `{n}`"))),
        }
    }

    /// The instance serving the recipient's domain, else the first one.
    fn instance_for(&self, to: &EmailAddress) -> Option<&Instance> {
        self.instances
            .iter()
            .find(|i| i.domain().eq_ignore_ascii_case(to.domain()))
            .or_else(|| self.instances.first())
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    fn unavailable(message: impl Into<String>) -> Self {
        Self::new(StatusCode::SERVICE_UNAVAILABLE, "unavailable", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"error": self.code, "message": self.message}))).into_response()
    }
}

impl From<EngineGone> for ApiError {
    fn from(e: EngineGone) -> Self {
        ApiError::unavailable(e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::new(e.status(), "bad_request", e.body_text())
    }
}

impl From<OrchestratorError> for ApiError {
    fn from(e: OrchestratorError) -> Self {
        let message = e.to_string();
        match e {
            OrchestratorError::UnknownConversation(_) => ApiError::not_found(message),
            OrchestratorError::AlreadyStopped(_) => ApiError::new(StatusCode::CONFLICT, "already_stopped", message),
            OrchestratorError::Ingestion(IngestionError::UnknownTarget(_)) => ApiError::not_found(message),
            OrchestratorError::Ingestion(IngestionError::IllegalTransition { .. }) => {
                ApiError::new(StatusCode::CONFLICT, "illegal_transition", message)
            }
            _ => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message),
        }
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn parse_time_param(raw: Option<&str>, field: &str) -> Result<Option<DateTime<Utc>>, ApiError> {
    raw.map(|s| {
        DateTime::parse_from_rfc3339(s)
            .map(|t| t.with_timezone(&Utc))
            .map_err(|e| ApiError::bad_request(format!("`{field}` is not an RFC 3339 timestamp: {e}")))
    })
    .transpose()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolicitationView {
    pub source_id: String,
    pub subject: String,
    pub body_text: String,
    pub reported_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TargetView {
    pub address: EmailAddress,
    pub state: TargetState,
    pub reports: usize,
    pub review: Option<Review>,
    pub history: Vec<TargetState>,
    pub solicitation: Option<SolicitationView>,
}

#[derive(Debug, Default, Deserialize)]
pub struct TargetQuery {
    pub state: Option<String>,
    pub instance: Option<String>,
}

async fn list_targets(State(app): State<AppState>, Query(q): Query<TargetQuery>) -> ApiResult<Vec<TargetView>> {
    let wanted = q
        .state
        .as_deref()
        .filter(|s| !s.is_empty())
        .map(str::parse::<TargetState>)
        .transpose()
        .map_err(ApiError::bad_request)?;
    let instance = app.instance(q.instance.as_deref())?;
    let views = instance
        .call(move |o, _| {
            let registry = o.targets();
            registry
                .targets()
                .filter(|t| wanted.is_none_or(|w| t.state == w))
                .map(|t| TargetView {
                    address: t.address.clone(),
                    state: t.state,
                    reports: t.reports.len(),
                    review: t.review.clone(),
                    history: t.history.clone(),
                    solicitation: registry.first_report_of(&t.address).map(|r| SolicitationView {
                        source_id: r.source_id.clone(),
                        subject: r.subject.clone(),
                        body_text: r.body_text.clone(),
                        reported_at: r.reported_at,
                    }),
                })
                .collect::<Vec<_>>()
        })
        .await?;
    Ok(Json(views))
}

#[derive(Debug, Deserialize)]
pub struct ReviewBody {
    pub decision: ReviewDecision,
    #[serde(default)]
    pub note: String,
    #[serde(default)]
    pub reviewer: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
pub struct InstanceQuery {
    pub instance: Option<String>,
}

async fn review_target(
    State(app): State<AppState>,
    Path(address): Path<String>,
    Query(q): Query<InstanceQuery>,
    body: Result<Json<ReviewBody>, JsonRejection>,
) -> ApiResult<TargetView> {
    let Json(body) = body?;
    let address = EmailAddress::parse(&address).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let instance = app.instance(q.instance.as_deref())?;
    let view = instance
        .call(move |o, now| {
            let reviewer = body.reviewer.as_deref().unwrap_or("operator");
            let target = o.review_target(&address, body.decision, reviewer, &body.note, now)?;
            let solicitation = o.targets().first_report_of(&target.address).map(|r| SolicitationView {
                source_id: r.source_id.clone(),
                subject: r.subject.clone(),
                body_text: r.body_text.clone(),
                reported_at: r.reported_at,
            });
            Ok::<_, OrchestratorError>(TargetView {
                address: target.address,
                state: target.state,
                reports: target.reports.len(),
                review: target.review,
                history: target.history,
                solicitation,
            })
        })
        .await??;
    Ok(Json(view))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConversationSummary {
    pub id: String,
    pub target: EmailAddress,
    pub strategy: String,
    pub state: String,
    pub stop_reason: Option<StopReason>,
    pub persona: Persona,
    pub created_at: DateTime<Utc>,
    pub inbound: usize,
    pub outbound: usize,
    pub last_activity: Option<DateTime<Utc>>,
    pub awaiting_reply: bool,
}

fn stop_reason(state: ConversationState) -> Option<StopReason> {
    match state {
        ConversationState::Stopped(r) => Some(r),
        _ => None,
    }
}

fn summarize(c: &Conversation) -> ConversationSummary {
    ConversationSummary {
        id: c.id.to_string(),
        target: c.target_address.clone(),
        strategy: c.strategy.clone(),
        state: c.state.label().to_owned(),
        stop_reason: stop_reason(c.state),
        persona: c.persona.clone(),
        created_at: c.created_at,
        inbound: c.count(MessageDirection::Inbound),
        outbound: c.count(MessageDirection::Outbound),
        last_activity: c.last_timestamp(),
        awaiting_reply: c.has_unanswered_inbound(),
    }
}

#[derive(Debug, Default, Deserialize)]
pub struct ConversationQuery {
    pub state: Option<String>,
    pub strategy: Option<String>,
    pub instance: Option<String>,
}

async fn list_conversations(
    State(app): State<AppState>,
    Query(q): Query<ConversationQuery>,
) -> ApiResult<Vec<ConversationSummary>> {
    let state = q.state.filter(|s| !s.is_empty()).map(|s| s.to_ascii_lowercase());
    if let Some(s) = &state {
        if !["initialized", "baited", "engaged", "stopped"].contains(&s.as_str()) {
            return Err(ApiError::bad_request(format!("unknown conversation state `{s}`")));
        }
    }
    let strategy = q.strategy.filter(|s| !s.is_empty());
    let instance = app.instance(q.instance.as_deref())?;
    let list = instance
        .call(move |o, _| {
            o.conversations()
                .filter(|c| state.as_deref().is_none_or(|s| c.state.label() == s))
                .filter(|c| strategy.as_deref().is_none_or(|s| c.strategy == s))
                .map(summarize)
                .collect::<Vec<_>>()
        })
        .await?;
    Ok(Json(list))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConversationDetail {
    #[serde(flatten)]
    pub summary: ConversationSummary,
    pub conversation: Conversation,
}

fn parse_id(raw: &str) -> Result<ConversationId, ApiError> {
    raw.parse()
        .map_err(|_| ApiError::bad_request(format!("`{raw}` is not a conversation id")))
}

async fn get_conversation(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<InstanceQuery>,
) -> ApiResult<ConversationDetail> {
    let id = parse_id(&id)?;
    let instance = app.instance(q.instance.as_deref())?;
    let detail = instance
        .call(move |o, _| {
            o.conversation(id).map(|c| ConversationDetail {
                summary: summarize(c),
                conversation: c.clone(),
            })
        })
        .await?
        .ok_or_else(|| ApiError::not_found(format!("unknown conversation {id}")))?;
    Ok(Json(detail))
}

#[derive(Debug, Deserialize)]
pub struct StopBody {
    #[serde(default)]
    pub reason: Option<String>,
    #[serde(default)]
    pub debrief: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StopResponse {
    pub conversation: ConversationSummary,
    pub debrief: DebriefOutcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

pub const DEBRIEF_REFUSED: &str =
    "DebriefRefused: the conversation has no unanswered inbound message, so it was stopped without a debrief";

async fn stop_conversation(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<InstanceQuery>,
    body: Result<Json<StopBody>, JsonRejection>,
) -> ApiResult<StopResponse> {
    let Json(body) = body?;
    let id = parse_id(&id)?;
    let reason = match body.reason.as_deref() {
        None => StopReason::OperatorStop,
        Some(raw) => match StopReason::parse(raw) {
            Some(r @ (StopReason::OperatorStop | StopReason::ExperimentEnd)) => r,
            _ => return Err(ApiError::bad_request(format!("stop reason `{raw}` is not accepted here"))),
        },
    };
    let instance = app.instance(q.instance.as_deref())?;
    let outcome = instance
        .call(move |o, now| o.stop_conversation(id, reason, body.debrief, now))
        .await??;
    Ok(Json(StopResponse {
        conversation: summarize(&outcome.conversation),
        debrief: outcome.debrief,
        warning: (outcome.debrief == DebriefOutcome::Refused).then(|| DEBRIEF_REFUSED.to_owned()),
    }))
}

#[derive(Debug, Default, Deserialize)]
pub struct MetricsQuery {
    pub strategy: Option<String>,
    pub end: Option<String>,
    #[serde(default)]
    pub include_invalid: bool,
    pub instance: Option<String>,
}

impl MetricsQuery {
    fn options(&self) -> Result<MetricsOptions, ApiError> {
        Ok(MetricsOptions {
            window_end: parse_time_param(self.end.as_deref(), "end")?,
            include_invalid_replies: self.include_invalid,
            ..MetricsOptions::default()
        })
    }
}

async fn metrics(State(app): State<AppState>, Query(q): Query<MetricsQuery>) -> ApiResult<MetricsReport> {
    let opts = q.options()?;
    let instance = app.instance(q.instance.as_deref())?;
    let archive = instance.call(|o, _| o.archive()).await?;
    let strategy = q.strategy.as_deref().filter(|s| !s.is_empty());
    Ok(Json(compute_metrics(&archive, strategy, &opts)))
}

async fn metrics_by_strategy(
    State(app): State<AppState>,
    Query(q): Query<MetricsQuery>,
) -> ApiResult<BTreeMap<String, MetricsReport>> {
    let opts = q.options()?;
    let instance = app.instance(q.instance.as_deref())?;
    let archive = instance.call(|o, _| o.archive()).await?;
    Ok(Json(compute_all_metrics(&archive, &opts)))
}

#[derive(Debug, Default, Deserialize)]
pub struct CrossQuery {
    pub end: Option<String>,
    pub total: Option<usize>,
    pub still_interested_days: Option<i64>,
}

async fn cross_instance(State(app): State<AppState>, Query(q): Query<CrossQuery>) -> ApiResult<CrossInstanceReport> {
    let [a, b] = match app.instances.as_slice() {
        [a, b, ..] => [a, b],
        _ => {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "single_instance",
                "the cross-instance report needs two running instances",
            ))
        }
    };
    let end = parse_time_param(q.end.as_deref(), "end")?.unwrap_or_else(|| app.clock.now());
    let mut opts = CrossInstanceOptions::new(end);
    opts.total_involved = q.total;
    if let Some(days) = q.still_interested_days {
        opts.still_interested_secs = days * 86_400;
    }
    let archive_a = a.call(|o, _| o.archive()).await?;
    let archive_b = b.call(|o, _| o.archive()).await?;
    let report = cross_instance_report(&archive_a, &archive_b, &opts)
        .map_err(|e| ApiError::new(StatusCode::CONFLICT, "metrics", e.to_string()))?;
    Ok(Json(report))
}

async fn inbound(
    State(app): State<AppState>,
    payload: Result<Json<InboundPayload>, JsonRejection>,
) -> Result<(StatusCode, Json<serde_json::Value>), ApiError> {
    let Json(payload) = payload?;
    let email = parse_inbound(&payload, app.clock.now()).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let instance = app
        .instance_for(&email.to)
        .ok_or_else(|| ApiError::unavailable("no instances configured"))?;
    let key = email.message_key.clone();
    let warning = email.parse_warning.clone();
    let name = instance.name().to_owned();
    instance.enqueue(move |o, _| match o.admit_inbound(email) {
        Ok(decision) => log::info!("{name}: inbound {decision:?}"),
        Err(e) => log::error!("{name}: inbound failed: {e}"),
    })?;
    Ok((
        StatusCode::ACCEPTED,
        Json(json!({"status": "queued", "instance": instance.name(), "message_key": key, "warning": warning})),
    ))
}

async fn require_token(State(app): State<AppState>, request: Request, next: Next) -> Response {
    if let Some(token) = &app.token {
        let presented = request
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if presented != Some(token.as_str()) {
            return ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or wrong bearer token")
                .into_response();
        }
    }
    next.run(request).await
}

async fn access_log(request: Request, next: Next) -> Response {
    let method = request.method().clone();
    let uri = request.uri().clone();
    let response = next.run(request).await;
    log::info!("{method} {uri} -> {}", response.status().as_u16());
    response
}

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/targets", get(list_targets))
        .route("/targets/{address}/review", post(review_target))
        .route("/conversations", get(list_conversations))
        .route("/conversations/{id}", get(get_conversation))
        .route("/conversations/{id}/stop", post(stop_conversation))
        .route("/metrics", get(metrics))
        .route("/metrics/strategies", get(metrics_by_strategy))
        .route("/reports/cross-instance", get(cross_instance))
        .route_layer(middleware::from_fn_with_state(state.clone(), require_token));
    Router::new()
        .nest("/api", api)
        .route("/inbound", post(inbound))
        .layer(middleware::from_fn(access_log))
        .with_state(state)
}
