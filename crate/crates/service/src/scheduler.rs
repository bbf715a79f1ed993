//! Daily aggregation schedule: once a day at the configured local time, aggregate the
//! previous local day.

use chrono::{DateTime, Duration, NaiveDate, NaiveTime, TimeZone, Utc};
use chrono_tz::Tz;

use crate::routes::run_job;
use crate::state::AppState;

/// The first instant strictly after `now` at which the local clock reads `run_at`.
pub fn next_run_after(now: DateTime<Utc>, run_at: NaiveTime, tz: Tz) -> DateTime<Utc> {
    let mut day = now.with_timezone(&tz).date_naive();
    loop {
        let candidate = match tz.from_local_datetime(&day.and_time(run_at)) {
            chrono::LocalResult::Single(t) | chrono::LocalResult::Ambiguous(t, _) => Some(t.with_timezone(&Utc)),
            // Skipped by a DST jump; run an hour later that day.
            chrono::LocalResult::None => tz
                .from_local_datetime(&(day.and_time(run_at) + Duration::hours(1)))
                .earliest()
                .map(|t| t.with_timezone(&Utc)),
        };
        if let Some(t) = candidate.filter(|t| *t > now) {
            return t;
        }
        day = day.succ_opt().expect("date within range");
    }
}

/// The local date a run at `at` aggregates.
pub fn target_date(at: DateTime<Utc>, tz: Tz) -> NaiveDate {
    let local = at.with_timezone(&tz).date_naive();
    local.pred_opt().unwrap_or(local)
}

/// Loops forever; spawn it on the runtime.
pub async fn run(state: AppState) {
    let cfg = &state.config;
    let tz = cfg.campaign.timezone;
    loop {
        let now = state.clock.now();
        let next = next_run_after(now, cfg.scheduler.run_at, tz);
        let wait = (next - now).to_std().unwrap_or_default();
        tracing::info!(next_run = %next, "scheduler sleeping");
        tokio::time::sleep(wait).await;
        let date = target_date(next, tz);
        match run_job(&state, date).await {
            Ok(d) => tracing::info!(%date, trays = d.total_trays, "scheduled aggregation done"),
            Err(e) => tracing::error!(%date, error = %e, "scheduled aggregation failed"),
        }
    }
}
