//! Desk-scale campaign simulation. Registers a synthetic population, submits meal records
//! through the HTTP API day by day, feeds synthetic trays and runs the daily aggregation.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{Context, Result};
use axum::http::StatusCode;
use chrono::{DateTime, Duration, NaiveDate, NaiveTime, TimeZone, Utc};
use chrono_tz::Tz;
use foodwise_core::aggregate::largest_remainder_f64;
use foodwise_core::config::{AppConfig, AuthConfig, CampaignConfig, SchedulerConfig, StorageConfig};
use foodwise_core::ingest::{generate_synthetic_day, to_batch_json};
use foodwise_core::{BadgeCounts, BadgeRuleConfig, BadgeState, DailyAggregate, LinearModel, Store, SyntheticProfile};
use foodwise_service::api::{BadgesPayload, IngestResponse, LoginResponse, RecordView, RegisterResponse, SubmitRecordResponse};
use foodwise_service::{router, AppState, ManualClock};
use futures::stream::{self, StreamExt, TryStreamExt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::client::InProcessClient;

const ADMIN_EMAIL: &str = "operator@simulation.invalid";
const PHOTO_TYPE: &str = "image/jpeg";
/// Stream id mixed into the seed for the tray feed so it is independent of the user plan.
const TRAY_STREAM: u64 = 0x7472_6179;

#[derive(Debug, Error)]
#[error("bad simulation spec: {0}")]
pub struct BadSpec(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BehaviorMix {
    /// Users who meet every badge threshold within the campaign.
    pub dedicated: f64,
    pub casual: f64,
}

impl Default for BehaviorMix {
    fn default() -> Self {
        Self { dedicated: 0.2, casual: 0.8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSpec {
    pub seed: u64,
    pub n_users: u32,
    pub total_actions: u32,
    pub mix: BehaviorMix,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    pub timezone: Tz,
    pub badge_rules: BadgeRuleConfig,
    /// Requests in flight at once.
    pub concurrency: usize,
    /// Argon2 memory cost for the simulated accounts, kept low so registration stays fast.
    pub password_memory_kib: u32,
    pub trays: SyntheticProfile,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        let campaign = CampaignConfig::default();
        Self {
            seed: 2023,
            n_users: 220,
            total_actions: 811,
            mix: BehaviorMix::default(),
            start_date: campaign.start_date,
            end_date: campaign.end_date,
            timezone: campaign.timezone,
            badge_rules: campaign.badge_rules,
            concurrency: 8,
            password_memory_kib: 1024,
            trays: SyntheticProfile::default(),
        }
    }
}

impl SimulationSpec {
    pub fn from_toml(text: &str) -> Result<Self, BadSpec> {
        let spec: SimulationSpec = toml::from_str(text).map_err(|e| BadSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn days(&self) -> Vec<NaiveDate> {
        self.start_date.iter_days().take_while(|d| *d <= self.end_date).collect()
    }

    /// Records a dedicated user submits: enough for every badge.
    pub fn dedicated_actions(&self) -> u32 {
        let r = &self.badge_rules;
        r.quantity_records.max(r.quality_min_records).max(r.persistence_days).max(1)
    }

    /// (dedicated, casual) head counts, apportioned by largest remainder.
    pub fn head_counts(&self) -> (u32, u32) {
        let seats = largest_remainder_f64(&[self.mix.dedicated, self.mix.casual], self.n_users).unwrap_or_else(|| vec![0, self.n_users]);
        (seats[0], seats[1])
    }

    pub fn validate(&self) -> Result<(), BadSpec> {
        let bad = |m: String| Err(BadSpec(m));
        let BehaviorMix { dedicated, casual } = self.mix;
        if ![dedicated, casual].iter().all(|f| f.is_finite() && (0.0..=1.0).contains(f)) || (dedicated + casual - 1.0).abs() > 1e-9 {
            return bad(format!("mix fractions must lie in [0, 1] and sum to 1, got {dedicated} + {casual}"));
        }
        if self.n_users == 0 || self.total_actions == 0 {
            return bad("n_users and total_actions must be positive".into());
        }
        if self.end_date < self.start_date {
            return bad(format!("end_date {} precedes start_date {}", self.end_date, self.start_date));
        }
        if self.concurrency == 0 {
            return bad("concurrency must be at least 1".into());
        }
        self.badge_rules.validate().map_err(BadSpec)?;
        self.trays.validate().map_err(|e| BadSpec(e.to_string()))?;
        let (n_dedicated, _) = self.head_counts();
        if n_dedicated > 0 {
            let window = self.days().len() as u32;
            if window < self.badge_rules.persistence_days {
                return bad(format!("campaign has {window} days, fewer than the {} needed for persistence", self.badge_rules.persistence_days));
            }
            let needed = u64::from(n_dedicated) * u64::from(self.dedicated_actions());
            if needed > u64::from(self.total_actions) {
                return bad(format!("{n_dedicated} dedicated users need {needed} actions but total_actions is {}", self.total_actions));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedAction {
    pub date: NaiveDate,
    pub scores: [u8; 3],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserPlan {
    pub index: u32,
    pub dedicated: bool,
    /// Date order; same-day actions are submitted in list order.
    pub actions: Vec<PlannedAction>,
}

fn score_around(rng: &mut ChaCha8Rng, base: i32, spread: i32) -> u8 {
    (base + rng.random_range(-spread..=spread)).clamp(0, 100) as u8
}

/// Deterministic per-user submission plan.
pub fn plan(spec: &SimulationSpec) -> Result<Vec<UserPlan>, BadSpec> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let days = spec.days();
    let (n_dedicated, n_casual) = spec.head_counts();
    let need = spec.dedicated_actions();
    let persistence = spec.badge_rules.persistence_days.max(1) as usize;
    let high = (spec.badge_rules.quality_min_avg.ceil() as i32).clamp(0, 100);

    let mut plans = Vec::with_capacity(spec.n_users as usize);
    for index in 0..n_dedicated {
        let first = rng.random_range(0..=days.len() - persistence);
        let actions = (0..need as usize)
            .map(|j| PlannedAction {
                date: days[first + j % persistence],
                scores: [0; 3].map(|_| rng.random_range(high..=100) as u8),
            })
            .collect();
        plans.push(UserPlan { index, dedicated: true, actions });
    }

    let mut remaining = spec.total_actions - n_dedicated * need;
    let casual: Vec<usize> = (0..n_casual as usize).map(|i| n_dedicated as usize + i).collect();
    let mut counts = vec![0u32; n_casual as usize];
    if remaining >= n_casual {
        counts.iter_mut().for_each(|c| *c = 1);
        remaining -= n_casual;
    }
    let leftover_to_dedicated = n_casual == 0;
    let mut dedicated_extra = vec![0u32; n_dedicated as usize];
    for _ in 0..remaining {
        if leftover_to_dedicated {
            dedicated_extra[rng.random_range(0..n_dedicated as usize)] += 1;
        } else {
            counts[rng.random_range(0..n_casual as usize)] += 1;
        }
    }
    for (plan, extra) in plans.iter_mut().zip(dedicated_extra) {
        for _ in 0..extra {
            let date = days[rng.random_range(0..days.len())];
            plan.actions.push(PlannedAction { date, scores: [0; 3].map(|_| rng.random_range(high..=100) as u8) });
        }
    }
    for (slot, count) in casual.into_iter().zip(counts) {
        let base = rng.random_range(30..=100);
        let actions = (0..count)
            .map(|_| PlannedAction { date: days[rng.random_range(0..days.len())], scores: [0; 3].map(|_| score_around(&mut rng, base, 10)) })
            .collect();
        plans.push(UserPlan { index: slot as u32, dedicated: false, actions });
    }
    for p in &mut plans {
        p.actions.sort_by_key(|a| a.date);
    }
    Ok(plans)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayReport {
    pub date: NaiveDate,
    pub records: u64,
    pub trays: u64,
    pub total_waste_g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub seed: u64,
    pub users: u64,
    pub records: u64,
    pub days: Vec<DayReport>,
    pub badge_earners: BadgeCounts,
    pub reward_eligible: u64,
    pub runtime_ms: u64,
}

impl SimulationReport {
    /// Everything except the wall-clock runtime, for determinism comparisons.
    pub fn deterministic_part(&self) -> SimulationReport {
        SimulationReport { runtime_ms: 0, ..self.clone() }
    }
}

pub struct SimulationOutcome {
    pub report: SimulationReport,
    pub plans: Vec<UserPlan>,
    /// Final badge state per user, in plan order.
    pub states: Vec<BadgeState>,
}

fn local_instant(tz: Tz, date: NaiveDate, time: NaiveTime) -> DateTime<Utc> {
    match tz.from_local_datetime(&date.and_time(time)).earliest() {
        Some(t) => t.with_timezone(&Utc),
        None => Utc.from_utc_datetime(&date.and_time(time)),
    }
}

fn photo_bytes(user: u32, day: NaiveDate, k: usize) -> Vec<u8> {
    let mut bytes = vec![0xff, 0xd8, 0xff, 0xe0];
    bytes.extend_from_slice(format!("sim {user} {day} {k}").as_bytes());
    bytes
}

fn email(index: u32) -> String {
    format!("user{index:04}@simulation.invalid")
}

fn password(index: u32) -> String {
    format!("sim-password-{index:04}")
}

pub async fn run(spec: &SimulationSpec) -> Result<SimulationOutcome> {
    let started = Instant::now();
    let plans = plan(spec)?;
    let tz = spec.timezone;

    let config = AppConfig {
        campaign: CampaignConfig {
            prereg_start: spec.start_date - Duration::days(7),
            start_date: spec.start_date,
            end_date: spec.end_date,
            timezone: tz,
            badge_rules: spec.badge_rules,
            ..CampaignConfig::default()
        },
        storage: StorageConfig { data_dir: None, ..StorageConfig::default() },
        scheduler: SchedulerConfig { enabled: false, ..SchedulerConfig::default() },
        auth: AuthConfig {
            admin_emails: vec![ADMIN_EMAIL.into()],
            password_memory_kib: spec.password_memory_kib,
            password_iterations: 1,
            // one login per account has to last the whole run
            session_ttl_hours: (spec.days().len() as i64 + 3) * 24,
            ..AuthConfig::default()
        },
        ..AppConfig::default()
    };

    let clock = Arc::new(ManualClock::new(local_instant(tz, spec.start_date - Duration::days(1), NaiveTime::MIN)));
    let state = AppState::with_clock(config, Store::in_memory(), LinearModel::from_coefficients(0.1, 0.0), clock.clone());
    let client = InProcessClient::new(router(state));

    let accounts: Vec<(u32, String, String)> = plans
        .iter()
        .map(|p| (p.index, email(p.index), password(p.index)))
        .chain(std::iter::once((u32::MAX, ADMIN_EMAIL.to_string(), "operator-password".to_string())))
        .collect();
    let tokens: BTreeMap<u32, String> = stream::iter(accounts)
        .map(|(index, email, password)| {
            let client = client.clone();
            async move {
                let _: RegisterResponse = client
                    .post_json("/api/register", None, &json!({"email": email, "display_name": email, "password": password}), StatusCode::CREATED)
                    .await?;
                let login: LoginResponse =
                    client.post_json("/api/login", None, &json!({"email": email, "password": password}), StatusCode::OK).await?;
                anyhow::Ok((index, login.token))
            }
        })
        .buffer_unordered(spec.concurrency)
        .try_collect()
        .await?;
    let admin = tokens[&u32::MAX].clone();

    let mut days = Vec::new();
    for date in spec.days() {
        // k-th submission of the day for every user goes out in round k
        let mut rounds: Vec<Vec<(u32, PlannedAction)>> = Vec::new();
        for p in &plans {
            for (k, a) in p.actions.iter().filter(|a| a.date == date).enumerate() {
                if rounds.len() <= k {
                    rounds.push(Vec::new());
                }
                rounds[k].push((p.index, *a));
            }
        }
        for (k, round) in rounds.iter().enumerate() {
            clock.set(local_instant(tz, date, NaiveTime::from_hms_opt(11, 0, 0).expect("valid")) + Duration::seconds(30 * k as i64));
            stream::iter(round)
                .map(|(index, action)| {
                    let client = client.clone();
                    let token = tokens[index].clone();
                    async move {
                        let _: SubmitRecordResponse =
                            client.submit_record(&token, action.scores, &photo_bytes(*index, date, k), PHOTO_TYPE).await?;
                        anyhow::Ok(())
                    }
                })
                .buffer_unordered(spec.concurrency)
                .try_collect::<Vec<()>>()
                .await
                .with_context(|| format!("submissions on {date}"))?;
        }

        let trays = generate_synthetic_day(spec.seed ^ TRAY_STREAM, date, &SyntheticProfile { timezone: tz, ..spec.trays.clone() })?;
        let ingest: IngestResponse = client.post_raw("/api/admin/trays", &admin, to_batch_json(&trays).into_bytes()).await?;
        anyhow::ensure!(ingest.rejected.is_empty(), "synthetic trays rejected on {date}: {:?}", ingest.rejected);

        clock.set(local_instant(tz, date + Duration::days(1), NaiveTime::from_hms_opt(0, 10, 0).expect("valid")));
        let daily: DailyAggregate = client.post_json("/api/admin/aggregate", Some(&admin), &json!({"date": date}), StatusCode::OK).await?;
        days.push(DayReport { date, records: 0, trays: daily.total_trays, total_waste_g: daily.total_waste_g });
    }

    // read everything back through the API
    let per_user: Vec<(Vec<RecordView>, BadgesPayload)> = stream::iter(&plans)
        .map(|p| {
            let client = client.clone();
            let token = tokens[&p.index].clone();
            async move {
                let records: Vec<RecordView> = client.get("/api/records", Some(&token)).await?;
                let badges: BadgesPayload = client.get("/api/badges", Some(&token)).await?;
                anyhow::Ok((records, badges))
            }
        })
        .buffered(spec.concurrency)
        .try_collect()
        .await?;

    let mut per_day: BTreeMap<NaiveDate, u64> = BTreeMap::new();
    for (records, _) in &per_user {
        for r in records {
            *per_day.entry(r.local_date).or_default() += 1;
        }
    }
    for d in &mut days {
        d.records = per_day.get(&d.date).copied().unwrap_or(0);
    }
    let admin_badges: BadgesPayload = client.get("/api/badges", Some(&admin)).await?;
    let states: Vec<BadgeState> = per_user.iter().map(|(_, b)| b.badge_state).collect();

    let report = SimulationReport {
        seed: spec.seed,
        users: plans.len() as u64,
        records: per_user.iter().map(|(r, _)| r.len() as u64).sum(),
        days,
        badge_earners: admin_badges.earner_counts,
        reward_eligible: states.iter().filter(|s| s.reward_eligible).count() as u64,
        runtime_ms: started.elapsed().as_millis() as u64,
    };
    Ok(SimulationOutcome { report, plans, states })
}
