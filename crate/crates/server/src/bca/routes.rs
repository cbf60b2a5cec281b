use std::sync::Arc;

use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use bioauth_core::normalize::ThresholdPolicy;
use serde::Deserialize;
use tracing::error;

use super::{BcaError, BcaService};
use crate::api::{AuthOutcome, AuthRequest, EnrollRequest, ErrorBody, FieldErrorBody};
use crate::bearer;

impl IntoResponse for BcaError {
    fn into_response(self) -> Response {
        let status = match &self {
            BcaError::Validation(_) | BcaError::PolicyInvalid(_) => StatusCode::BAD_REQUEST,
            BcaError::Conflict(_) => StatusCode::CONFLICT,
            BcaError::UnknownUser(_) => StatusCode::NOT_FOUND,
            BcaError::Ledger(_) | BcaError::Store(_) => {
                error!(error = %self, "internal failure");
                StatusCode::INTERNAL_SERVER_ERROR
            }
        };
        let fields = match &self {
            BcaError::PolicyInvalid(errs) => errs.iter().map(FieldErrorBody::from).collect(),
            _ => Vec::new(),
        };
        let body = ErrorBody {
            error: self.to_string(),
            fields,
        };
        (status, Json(body)).into_response()
    }
}

type Svc = State<Arc<BcaService>>;

pub fn router(svc: Arc<BcaService>) -> Router {
    let admin = Router::new()
        .route("/admin/policy", get(get_policy).put(put_policy))
        .route("/admin/users", get(list_users))
        .route("/admin/users/{id}", delete(delete_user))
        .route("/admin/analytics", get(analytics))
        .route("/admin/model", get(model))
        .route_layer(middleware::from_fn_with_state(svc.clone(), require_admin));
    Router::new()
        .route("/enroll", post(enroll))
        .route("/authenticate", post(authenticate))
        .route("/confidence/{user_id}", get(confidence))
        .route("/chain", get(chain))
        .route("/chain/head", get(chain_head))
        .merge(admin)
        .with_state(svc)
}

async fn require_admin(State(svc): Svc, req: Request, next: Next) -> Response {
    match bearer(req.headers()) {
        Some(s) if s == svc.config().admin_secret => next.run(req).await,
        _ => (
            StatusCode::UNAUTHORIZED,
            Json(ErrorBody {
                error: "admin credential required".into(),
                fields: Vec::new(),
            }),
        )
            .into_response(),
    }
}

async fn enroll(
    State(svc): Svc,
    Json(req): Json<EnrollRequest>,
) -> Result<impl IntoResponse, BcaError> {
    let resp = tokio::task::spawn_blocking(move || svc.enroll(req))
        .await
        .expect("enroll task panicked")?;
    Ok((StatusCode::CREATED, Json(resp)))
}

async fn authenticate(State(svc): Svc, Json(req): Json<AuthRequest>) -> Result<Response, BcaError> {
    let outcome = tokio::task::spawn_blocking(move || svc.authenticate(&req))
        .await
        .expect("authenticate task panicked")?;
    Ok(match outcome {
        AuthOutcome::Granted(g) => (StatusCode::OK, Json(g)).into_response(),
        AuthOutcome::Denied(d) => (StatusCode::FORBIDDEN, Json(d)).into_response(),
    })
}

#[derive(Debug, Deserialize)]
struct ConfidenceQuery {
    limit: Option<usize>,
}

async fn confidence(
    State(svc): Svc,
    Path(user_id): Path<String>,
    Query(q): Query<ConfidenceQuery>,
) -> Result<impl IntoResponse, BcaError> {
    Ok(Json(svc.get_confidence(&user_id, q.limit)?))
}

async fn chain(State(svc): Svc) -> impl IntoResponse {
    (
        [(header::CONTENT_TYPE, "application/octet-stream")],
        svc.chain_bytes(),
    )
}

async fn chain_head(State(svc): Svc) -> impl IntoResponse {
    Json(svc.chain_head())
}

async fn get_policy(State(svc): Svc) -> impl IntoResponse {
    Json((*svc.policy()).clone())
}

async fn put_policy(
    State(svc): Svc,
    headers: HeaderMap,
    Json(policy): Json<ThresholdPolicy>,
) -> Result<impl IntoResponse, BcaError> {
    let admin = headers
        .get("x-admin-id")
        .and_then(|v| v.to_str().ok())
        .unwrap_or("admin");
    Ok(Json(svc.set_policy(policy, admin)?))
}

async fn list_users(State(svc): Svc) -> impl IntoResponse {
    Json(svc.list_users())
}

async fn delete_user(
    State(svc): Svc,
    Path(id): Path<String>,
) -> Result<impl IntoResponse, BcaError> {
    svc.delete_user(&id)?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Debug, Deserialize)]
struct AnalyticsQuery {
    user: String,
    format: Option<String>,
}

async fn analytics(State(svc): Svc, Query(q): Query<AnalyticsQuery>) -> Result<Response, BcaError> {
    let rec = svc.analytics(&q.user)?;
    match q.format.as_deref() {
        None | Some("json") => Ok(Json(rec).into_response()),
        Some("csv") => {
            Ok(([(header::CONTENT_TYPE, "text/csv")], rec.history_csv()).into_response())
        }
        Some(other) => Err(BcaError::Validation(format!("unknown format {other:?}"))),
    }
}

async fn model(State(svc): Svc) -> impl IntoResponse {
    Json(svc.model_export())
}
