use std::collections::BTreeMap;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::NaiveDate;
use foodwise_core::aggregate::{cached_daily, cached_monthly, store_observation};
use foodwise_core::domain::{normalize_email, validate_scores};
use foodwise_core::gamify::{badge_earner_counts, community_averages, evaluate_badges, within_window};
use foodwise_core::ingest::parse_tray_batch;
use foodwise_core::store::collections;
use foodwise_core::{BadgeState, FoodCategory, MealRecord, RecordId, StoreError, User, UserId, YearMonth};
use serde::Deserialize;

use crate::api::*;
use crate::auth::{create_session, AdminUser, AuthUser};
use crate::error::ApiError;
use crate::state::AppState;

pub const ACCEPTED_PHOTO_TYPES: [&str; 5] = ["image/jpeg", "image/png", "image/webp", "image/heic", "image/heif"];

/// Multipart overhead allowed on top of the photo limit.
const FORM_OVERHEAD: usize = 64 * 1024;

pub fn router(state: AppState) -> Router {
    let body_limit = state.config.storage.max_photo_bytes + FORM_OVERHEAD;
    Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .route("/api/register", post(register))
        .route("/api/login", post(login))
        .route("/api/records", post(submit_record).get(list_records))
        .route("/api/media/{key}", get(media))
        .route("/api/overview", get(overview))
        .route("/api/badges", get(badges))
        .route("/api/dashboard/daily", get(dashboard_daily))
        .route("/api/dashboard/monthly", get(dashboard_monthly))
        .route("/api/dashboard/tips", get(tips))
        .route("/api/admin/trays", post(ingest_trays))
        .route("/api/admin/aggregate", post(trigger_aggregate))
        .layer(DefaultBodyLimit::max(body_limit))
        .with_state(state)
}

fn json_body<T: serde::de::DeserializeOwned>(bytes: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::BadRequest(format!("invalid JSON body: {e}")))
}

async fn register(State(state): State<AppState>, body: Bytes) -> Result<(StatusCode, Json<RegisterResponse>), ApiError> {
    let req: RegisterRequest = json_body(&body)?;
    let email = normalize_email(&req.email);
    if !email.contains('@') || email.len() < 3 {
        return Err(ApiError::BadRequest("a valid email address is required".into()));
    }
    let min_len = state.config.auth.min_password_len;
    if req.password.chars().count() < min_len {
        return Err(ApiError::WeakPassword(min_len));
    }
    let hasher = state.hasher.clone();
    let password = req.password;
    let password_hash = tokio::task::spawn_blocking(move || hasher.hash(&password))
        .await
        .map_err(|e| ApiError::StorageUnavailable(e.to_string()))?;

    let user = User {
        user_id: UserId::random(),
        email: email.clone(),
        display_name: req.display_name.trim().to_string(),
        password_hash,
        registered_at: state.clock.now(),
    };
    match state.store.insert_document(collections::USERS_BY_EMAIL, &email, &user.user_id) {
        Err(StoreError::AlreadyExists(_)) => return Err(ApiError::EmailTaken),
        other => other?,
    };
    state.store.put_document(collections::USERS, &user.user_id.to_string(), &user)?;
    tracing::info!(user_id = %user.user_id, "registered");
    Ok((StatusCode::CREATED, Json(RegisterResponse { user_id: user.user_id })))
}

async fn login(State(state): State<AppState>, body: Bytes) -> Result<Json<LoginResponse>, ApiError> {
    let req: LoginRequest = json_body(&body)?;
    let email = normalize_email(&req.email);
    let user = match state.store.find_document::<UserId>(collections::USERS_BY_EMAIL, &email)? {
        Some(id) => state.store.find_document::<User>(collections::USERS, &id.to_string())?,
        None => None,
    };
    let hasher = state.hasher.clone();
    let password = req.password;
    let stored = user.as_ref().map(|u| u.password_hash.clone());
    let ok = tokio::task::spawn_blocking(move || match stored {
        Some(phc) => hasher.verify(&password, &phc),
        None => {
            hasher.burn(&password);
            false
        }
    })
    .await
    .map_err(|e| ApiError::StorageUnavailable(e.to_string()))?;

    match user {
        Some(user) if ok => {
            let (token, session) = create_session(&state, user.user_id)?;
            Ok(Json(LoginResponse { token, expires_at: session.expires_at }))
        }
        _ => Err(ApiError::InvalidCredentials),
    }
}

struct Upload {
    bytes: Vec<u8>,
    content_type: String,
}

async fn read_submission(mut multipart: Multipart, limit: usize) -> Result<(BTreeMap<FoodCategory, i64>, Upload), ApiError> {
    let mut scores = BTreeMap::new();
    let mut photo: Option<Upload> = None;
    let multipart_err = |e: axum::extract::multipart::MultipartError| {
        if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
            ApiError::PhotoTooLarge { limit }
        } else {
            ApiError::BadRequest(e.body_text())
        }
    };
    while let Some(mut field) = multipart.next_field().await.map_err(multipart_err)? {
        let name = field.name().unwrap_or_default().to_string();
        if name == "photo" {
            let content_type = field.content_type().unwrap_or("application/octet-stream").to_ascii_lowercase();
            let mut bytes = Vec::new();
            while let Some(chunk) = field.chunk().await.map_err(multipart_err)? {
                if bytes.len() + chunk.len() > limit {
                    return Err(ApiError::PhotoTooLarge { limit });
                }
                bytes.extend_from_slice(&chunk);
            }
            photo = Some(Upload { bytes, content_type });
        } else if let Ok(category) = name.parse::<FoodCategory>() {
            let text = field.text().await.map_err(multipart_err)?;
            let value = text
                .trim()
                .parse::<i64>()
                .map_err(|_| ApiError::BadRequest(format!("score for {category} must be an integer, got {text:?}")))?;
            scores.insert(category, value);
        }
    }
    let photo = photo.ok_or_else(|| ApiError::BadRequest("a photo file field named \"photo\" is required".into()))?;
    Ok((scores, photo))
}

async fn submit_record(
    State(state): State<AppState>,
    auth: AuthUser,
    multipart: Multipart,
) -> Result<(StatusCode, Json<SubmitRecordResponse>), ApiError> {
    let limit = state.config.storage.max_photo_bytes;
    let (raw_scores, photo) = read_submission(multipart, limit).await?;
    let scores = validate_scores(&raw_scores)?;
    if !ACCEPTED_PHOTO_TYPES.contains(&photo.content_type.as_str()) {
        return Err(ApiError::UnsupportedMediaType(photo.content_type));
    }
    if photo.bytes.is_empty() {
        return Err(ApiError::BadRequest("photo is empty".into()));
    }

    let user_id = auth.id();
    let lock = state.user_lock(user_id);
    let _guard = lock.lock().await;

    let blob = state.store.put_blob(&photo.bytes, &photo.content_type)?;
    state.store.put_document(collections::MEDIA_ACL, &format!("{}/{user_id}", blob.key), &user_id)?;

    let campaign = &state.config.campaign;
    let record = MealRecord::new(RecordId::random(), user_id, state.clock.now(), campaign.timezone, scores, blob.key);
    state.store.put_record(&record)?;

    let before: BadgeState = state.store.find_document(collections::BADGES, &user_id.to_string())?.unwrap_or_default();
    let after = refresh_badges(&state, user_id, &before)?;

    Ok((
        StatusCode::CREATED,
        Json(SubmitRecordResponse {
            record_id: record.record_id,
            record: RecordView::from(&record),
            newly_earned: after.newly_earned(&before),
            badge_state: after,
            counted_for_badges: campaign.contains(record.local_date),
        }),
    ))
}

/// Re-evaluates from the user's in-window records and persists the merged state.
/// Callers hold the user's lock.
fn refresh_badges(state: &AppState, user_id: UserId, before: &BadgeState) -> Result<BadgeState, ApiError> {
    let campaign = &state.config.campaign;
    let records = within_window(&state.store.user_records(user_id)?, campaign.start_date, campaign.end_date);
    let as_of = campaign.evaluation_date(state.today());
    let after = evaluate_badges(&records, &campaign.badge_rules, as_of).merged_with(before);
    state.store.put_document(collections::BADGES, &user_id.to_string(), &after)?;
    Ok(after)
}

#[derive(Debug, Deserialize)]
struct RangeQuery {
    from: Option<String>,
    to: Option<String>,
}

fn parse_date(s: &str) -> Result<NaiveDate, ApiError> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|_| ApiError::BadDate(s.to_string()))
}

async fn list_records(
    State(state): State<AppState>,
    auth: AuthUser,
    Query(q): Query<RangeQuery>,
) -> Result<Json<Vec<RecordView>>, ApiError> {
    let from = q.from.as_deref().map(parse_date).transpose()?.unwrap_or(NaiveDate::MIN);
    let to = q.to.as_deref().map(parse_date).transpose()?.unwrap_or(NaiveDate::MAX);
    let records = state.store.query_records(auth.id(), from, to)?;
    Ok(Json(records.iter().map(RecordView::from).collect()))
}

async fn media(State(state): State<AppState>, auth: AuthUser, Path(key): Path<String>) -> Result<Response, ApiError> {
    let not_found = || ApiError::NotFound(format!("media {key}"));
    let owned = state
        .store
        .find_document::<UserId>(collections::MEDIA_ACL, &format!("{key}/{}", auth.id()))?
        .is_some();
    if !owned {
        return Err(not_found());
    }
    let (meta, bytes) = state.store.get_blob(&key).map_err(|_| not_found())?;
    Ok(([(header::CONTENT_TYPE, meta.content_type)], bytes.to_vec()).into_response())
}

async fn overview(State(state): State<AppState>, auth: AuthUser) -> Result<Json<OverviewPayload>, ApiError> {
    let mut mine = state.store.user_records(auth.id())?;
    let all = state.store.all_records()?;
    let badge_state = state.store.find_document(collections::BADGES, &auth.id().to_string())?.unwrap_or_default();
    mine.sort_by(|a, b| b.submitted_at.cmp(&a.submitted_at).then(b.record_id.cmp(&a.record_id)));
    Ok(Json(OverviewPayload {
        user: community_averages(&mine),
        community: community_averages(&all),
        badge_state,
        recent_records: mine.iter().take(state.config.server.recent_records).map(RecordView::from).collect(),
    }))
}

async fn badges(State(state): State<AppState>, auth: AuthUser) -> Result<Json<BadgesPayload>, ApiError> {
    let badge_state = state.store.find_document(collections::BADGES, &auth.id().to_string())?.unwrap_or_default();
    let everyone: Vec<BadgeState> = state.store.scan(collections::BADGES, "")?.into_iter().map(|(_, s)| s).collect();
    Ok(Json(BadgesPayload {
        badge_state,
        earner_counts: badge_earner_counts(&everyone),
        rules: state.config.campaign.badge_rules,
    }))
}

#[derive(Debug, Deserialize)]
struct DateQuery {
    date: Option<String>,
}

async fn dashboard_daily(State(state): State<AppState>, Query(q): Query<DateQuery>) -> Result<Response, ApiError> {
    let raw = q.date.ok_or_else(|| ApiError::BadDate(String::new()))?;
    let date = parse_date(&raw)?;
    let daily = cached_daily(&state.store, date)?.ok_or_else(|| ApiError::NotComputed(format!("no aggregate computed for {date}")))?;
    Ok(Json(daily).into_response())
}

#[derive(Debug, Deserialize)]
struct MonthQuery {
    month: Option<String>,
}

async fn dashboard_monthly(State(state): State<AppState>, Query(q): Query<MonthQuery>) -> Result<Response, ApiError> {
    let raw = q.month.ok_or_else(|| ApiError::BadDate(String::new()))?;
    let month: YearMonth = raw.parse().map_err(|_| ApiError::BadDate(raw.clone()))?;
    let monthly = cached_monthly(&state.store, month)?.ok_or_else(|| ApiError::NotComputed(format!("no aggregate computed for {month}")))?;
    Ok(Json(monthly).into_response())
}

async fn tips(State(state): State<AppState>) -> Json<TipsPayload> {
    Json(TipsPayload { tips: state.config.campaign.tips.clone() })
}

async fn ingest_trays(State(state): State<AppState>, _admin: AdminUser, body: Bytes) -> Result<Json<IngestResponse>, ApiError> {
    let parsed = parse_tray_batch(&body, state.config.campaign.timezone).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let mut accepted = 0;
    let mut rejected = Vec::new();
    for (index, item) in parsed.into_iter().enumerate() {
        let outcome = item.map_err(|e| e.to_string()).and_then(|obs| match store_observation(&state.store, &obs) {
            Ok(()) => Ok(()),
            Err(StoreError::AlreadyExists(_)) => Err(format!("duplicate tray {} on {}", obs.tray_id, obs.local_date)),
            Err(e) => Err(e.to_string()),
        });
        match outcome {
            Ok(()) => accepted += 1,
            Err(error) => rejected.push(RejectedTray { index, error }),
        }
    }
    Ok(Json(IngestResponse { accepted, rejected }))
}

async fn trigger_aggregate(State(state): State<AppState>, _admin: AdminUser, body: Bytes) -> Result<Response, ApiError> {
    let req: AggregateRequest = json_body(&body)?;
    let daily = run_job(&state, req.date).await?;
    Ok(Json(daily).into_response())
}

/// Runs the daily job off the async runtime.
pub async fn run_job(state: &AppState, date: NaiveDate) -> Result<foodwise_core::DailyAggregate, ApiError> {
    let job = state.job.clone();
    let now = state.clock.now();
    tokio::task::spawn_blocking(move || job.run(date, now))
        .await
        .map_err(|e| ApiError::StorageUnavailable(e.to_string()))?
        .map_err(ApiError::from)
}
