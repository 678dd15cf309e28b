//! HTTP routes.

use std::str::FromStr;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use xcal_core::calibmath::Method;
use xcal_core::model::JudgmentRecord;
use xcal_core::pipeline::Level;
use xcal_core::protocols::{rubric, Protocol};
use xcal_core::report::{render, ReportFormat, ReportOptions};

use crate::error::ServiceError;
use crate::store::{CampaignDefinition, Status, Store};

pub fn router(store: Arc<Store>) -> Router {
    Router::new()
        .route("/campaigns", post(create_campaign))
        .route("/campaigns/{id}/task", get(get_task))
        .route("/campaigns/{id}/judgments", post(submit_judgments))
        .route("/campaigns/{id}/open", post(open_campaign))
        .route("/campaigns/{id}/close", post(close_campaign))
        .route("/campaigns/{id}/report", get(get_report))
        .route("/campaigns/{id}/export/{file}", get(export))
        .route("/rubric", get(get_rubric))
        .with_state(store)
}

fn bearer(headers: &HeaderMap) -> Result<Option<&str>, ServiceError> {
    let Some(value) = headers.get(header::AUTHORIZATION) else {
        return Ok(None);
    };
    value
        .to_str()
        .ok()
        .and_then(|v| v.strip_prefix("Bearer "))
        .map(|t| Some(t.trim()))
        .ok_or(ServiceError::Unauthorized)
}

fn parse<T: FromStr>(name: &str, value: Option<&str>) -> Result<Option<T>, ServiceError>
where
    T::Err: std::fmt::Display,
{
    value
        .map(|v| {
            v.parse()
                .map_err(|e| ServiceError::BadRequest(format!("{name}: {e}")))
        })
        .transpose()
}

async fn create_campaign(
    State(store): State<Arc<Store>>,
    body: Result<Json<CampaignDefinition>, axum::extract::rejection::JsonRejection>,
) -> Result<Response, ServiceError> {
    let Json(def) = body.map_err(|e| ServiceError::BadRequest(e.body_text()))?;
    let id = store.create(def)?;
    Ok((StatusCode::CREATED, Json(json!({ "campaign_id": id }))).into_response())
}

#[derive(Deserialize)]
struct TaskQuery {
    evaluator: String,
}

async fn get_task(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    Query(q): Query<TaskQuery>,
    headers: HeaderMap,
) -> Result<Response, ServiceError> {
    let task = store.task(&id, &q.evaluator, bearer(&headers)?)?;
    Ok(Json(task).into_response())
}

async fn submit_judgments(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Result<Json<Vec<JudgmentRecord>>, axum::extract::rejection::JsonRejection>,
) -> Result<Response, ServiceError> {
    let Json(records) = body.map_err(|e| ServiceError::BadRequest(e.body_text()))?;
    let outcome = store.submit(&id, bearer(&headers)?, records).await?;
    Ok(Json(outcome).into_response())
}

async fn open_campaign(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
) -> Result<Response, ServiceError> {
    let status = store.set_status(&id, Status::Collecting).await?;
    Ok(Json(json!({ "status": status })).into_response())
}

async fn close_campaign(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
) -> Result<Response, ServiceError> {
    let status = store.set_status(&id, Status::Closed).await?;
    Ok(Json(json!({ "status": status })).into_response())
}

#[derive(Deserialize, Default)]
struct ReportQuery {
    method: Option<String>,
    format: Option<String>,
    level: Option<String>,
    ht_target: Option<f64>,
    order: Option<String>,
    resamples: Option<usize>,
    seed: Option<u64>,
}

impl ReportQuery {
    fn options(&self) -> Result<(ReportOptions, ReportFormat), ServiceError> {
        let mut options = ReportOptions::default();
        if let Some(methods) = &self.method {
            options.methods = methods
                .split(',')
                .map(|m| parse::<Method>("method", Some(m.trim())).map(Option::unwrap))
                .collect::<Result<_, _>>()?;
        }
        if let Some(level) = parse::<Level>("level", self.level.as_deref())? {
            options.level = level;
        }
        if let Some(t) = self.ht_target {
            options.ht_target = t;
        }
        if let Some(order) = &self.order {
            options.order = order.split(',').map(|s| s.trim().to_string()).collect();
        }
        if let Some(r) = self.resamples {
            options.resamples = r;
        }
        if let Some(s) = self.seed {
            options.seed = s;
        }
        let format =
            parse::<ReportFormat>("format", self.format.as_deref())?.unwrap_or(ReportFormat::Json);
        Ok((options, format))
    }
}

async fn get_report(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    Query(q): Query<ReportQuery>,
) -> Result<Response, ServiceError> {
    let (options, format) = q.options()?;
    // Reports read a snapshot and run on the blocking pool, so ingestion
    // never waits on them.
    let text = tokio::task::spawn_blocking(move || {
        store
            .report(&id, &options)
            .map(|report| render(&report, format))
    })
    .await
    .map_err(|e| ServiceError::Corrupt(format!("report task failed: {e}")))??;
    let content_type = match format {
        ReportFormat::Json => "application/json",
        ReportFormat::Text => "text/plain; charset=utf-8",
    };
    Ok(([(header::CONTENT_TYPE, content_type)], text).into_response())
}

async fn export(
    State(store): State<Arc<Store>>,
    Path((id, file)): Path<(String, String)>,
) -> Result<Response, ServiceError> {
    let text = store.export(&id, &file)?;
    let content_type = if file.ends_with(".jsonl") {
        "application/x-ndjson"
    } else {
        "application/json"
    };
    Ok(([(header::CONTENT_TYPE, content_type)], text).into_response())
}

#[derive(Deserialize)]
struct RubricQuery {
    protocol: String,
}

async fn get_rubric(Query(q): Query<RubricQuery>) -> Result<Response, ServiceError> {
    let protocol = parse::<Protocol>("protocol", Some(&q.protocol))?.expect("present");
    let entries = rubric(protocol).map_err(|e| ServiceError::BadRequest(e.to_string()))?;
    Ok(Json(json!({ "protocol": protocol, "levels": entries })).into_response())
}
