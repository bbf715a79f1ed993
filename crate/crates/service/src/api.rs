//! Request and response bodies of the HTTP API.

use chrono::{DateTime, NaiveDate, Utc};
use foodwise_core::gamify::CompletionAverages;
use foodwise_core::{BadgeCounts, BadgeKind, BadgeRuleConfig, BadgeState, CompletionScores, MealRecord, RecordId, UserId};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegisterRequest {
    pub email: String,
    pub display_name: String,
    pub password: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegisterResponse {
    pub user_id: UserId,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoginRequest {
    pub email: String,
    pub password: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoginResponse {
    pub token: String,
    pub expires_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordView {
    pub record_id: RecordId,
    pub local_date: NaiveDate,
    pub submitted_at: DateTime<Utc>,
    pub scores: CompletionScores,
    pub overall: f64,
    pub photo_url: String,
}

impl From<&MealRecord> for RecordView {
    fn from(r: &MealRecord) -> Self {
        Self {
            record_id: r.record_id,
            local_date: r.local_date,
            submitted_at: r.submitted_at,
            scores: r.scores,
            overall: r.overall,
            photo_url: media_url(&r.photo_ref),
        }
    }
}

pub fn media_url(key: &str) -> String {
    format!("/api/media/{key}")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubmitRecordResponse {
    pub record_id: RecordId,
    pub record: RecordView,
    pub badge_state: BadgeState,
    /// Badges this submission earned, for the celebration screen.
    pub newly_earned: Vec<BadgeKind>,
    /// False when the record's date is outside the campaign window.
    pub counted_for_badges: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OverviewPayload {
    pub user: CompletionAverages,
    pub community: CompletionAverages,
    pub badge_state: BadgeState,
    pub recent_records: Vec<RecordView>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BadgesPayload {
    pub badge_state: BadgeState,
    pub earner_counts: BadgeCounts,
    pub rules: BadgeRuleConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TipsPayload {
    pub tips: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedTray {
    pub index: usize,
    pub error: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestResponse {
    pub accepted: usize,
    pub rejected: Vec<RejectedTray>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateRequest {
    pub date: NaiveDate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}
