//! Badge engine: attempt, persistence, quantity and quality badges, reward eligibility,
//! streaks and community averages.

use std::collections::BTreeSet;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::domain::{FoodCategory, MealRecord, PerCategory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BadgeKind {
    Attempt,
    Persistence,
    Quantity,
    Quality,
}

impl BadgeKind {
    pub const ALL: [BadgeKind; 4] = [BadgeKind::Attempt, BadgeKind::Persistence, BadgeKind::Quantity, BadgeKind::Quality];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BadgeRuleConfig {
    /// Consecutive local dates with at least one record.
    pub persistence_days: u32,
    pub quantity_records: u32,
    /// Minimum mean overall completion, percent.
    pub quality_min_avg: f64,
    pub quality_min_records: u32,
}

impl Default for BadgeRuleConfig {
    fn default() -> Self {
        Self { persistence_days: 5, quantity_records: 10, quality_min_avg: 90.0, quality_min_records: 5 }
    }
}

impl BadgeRuleConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.persistence_days == 0 || self.quantity_records == 0 || self.quality_min_records == 0 {
            return Err("badge thresholds must be at least 1".into());
        }
        if !(self.quality_min_avg > 0.0 && self.quality_min_avg <= 100.0) {
            return Err("quality_min_avg must be within (0, 100]".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BadgeStatus {
    pub earned: bool,
    pub earned_at: Option<DateTime<Utc>>,
    /// In `[0, 1]`. Persistence tracks the live streak, so it can sit below 1 on an
    /// earned badge; the others are 1 once earned.
    pub progress: f64,
}

impl BadgeStatus {
    fn from_rule(earned_at: Option<DateTime<Utc>>, progress: f64) -> Self {
        Self { earned: earned_at.is_some(), earned_at, progress: progress.clamp(0.0, 1.0) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BadgeState {
    pub attempt: BadgeStatus,
    pub persistence: BadgeStatus,
    pub quantity: BadgeStatus,
    pub quality: BadgeStatus,
    pub reward_eligible: bool,
}

impl BadgeState {
    pub fn get(&self, kind: BadgeKind) -> &BadgeStatus {
        match kind {
            BadgeKind::Attempt => &self.attempt,
            BadgeKind::Persistence => &self.persistence,
            BadgeKind::Quantity => &self.quantity,
            BadgeKind::Quality => &self.quality,
        }
    }

    fn get_mut(&mut self, kind: BadgeKind) -> &mut BadgeStatus {
        match kind {
            BadgeKind::Attempt => &mut self.attempt,
            BadgeKind::Persistence => &mut self.persistence,
            BadgeKind::Quantity => &mut self.quantity,
            BadgeKind::Quality => &mut self.quality,
        }
    }

    pub fn all_earned(&self) -> bool {
        BadgeKind::ALL.iter().all(|&k| self.get(k).earned)
    }

    /// Badges already earned in `previous` stay earned with their original timestamp.
    pub fn merged_with(mut self, previous: &BadgeState) -> BadgeState {
        for kind in BadgeKind::ALL {
            let prev = previous.get(kind);
            if prev.earned {
                let cur = self.get_mut(kind);
                let earned_at = match (prev.earned_at, cur.earned_at) {
                    (Some(a), Some(b)) => Some(a.min(b)),
                    (a, b) => a.or(b),
                };
                let progress = if kind == BadgeKind::Persistence { cur.progress } else { 1.0 };
                *cur = BadgeStatus { earned: true, earned_at, progress };
            }
        }
        self.reward_eligible = self.all_earned();
        self
    }

    /// Kinds earned here but not in `before`.
    pub fn newly_earned(&self, before: &BadgeState) -> Vec<BadgeKind> {
        BadgeKind::ALL
            .into_iter()
            .filter(|&k| self.get(k).earned && !before.get(k).earned)
            .collect()
    }
}

/// Length of the consecutive-day run ending at the latest date `<= as_of`.
pub fn current_streak(dates: &BTreeSet<NaiveDate>, as_of: NaiveDate) -> u32 {
    let mut iter = dates.range(..=as_of).rev();
    let Some(&latest) = iter.next() else {
        return 0;
    };
    let mut run = 1;
    let mut expect = latest.pred_opt();
    for &d in iter {
        if Some(d) != expect {
            break;
        }
        run += 1;
        expect = d.pred_opt();
    }
    run
}

/// Longest consecutive-day run anywhere in `dates`.
pub fn best_streak(dates: &BTreeSet<NaiveDate>) -> u32 {
    let mut best = 0;
    let mut run = 0;
    let mut prev: Option<NaiveDate> = None;
    for &d in dates {
        run = if prev.and_then(|p| p.succ_opt()) == Some(d) { run + 1 } else { 1 };
        best = best.max(run);
        prev = Some(d);
    }
    best
}

/// Evaluates all four badges over one user's records with `local_date <= as_of`.
///
/// `earned_at` is the submission time of the record whose arrival first satisfied the
/// rule, replaying records in submission order.
pub fn evaluate_badges(records: &[MealRecord], rules: &BadgeRuleConfig, as_of: NaiveDate) -> BadgeState {
    let mut ordered: Vec<&MealRecord> = records.iter().filter(|r| r.local_date <= as_of).collect();
    ordered.sort_by(|a, b| a.submitted_at.cmp(&b.submitted_at).then(a.record_id.cmp(&b.record_id)));

    let quality_points_needed = rules.quality_min_avg * 3.0;
    let mut dates = BTreeSet::new();
    let mut best_run = 0u32;
    let mut points: u64 = 0;
    let (mut attempt_at, mut persistence_at, mut quantity_at, mut quality_at) = (None, None, None, None);

    for (i, r) in ordered.iter().enumerate() {
        let count = i as u64 + 1;
        points += r.scores.values().to_array().iter().map(|&s| u64::from(s)).sum::<u64>();
        if dates.insert(r.local_date) {
            best_run = best_run.max(run_through(&dates, r.local_date));
        }
        attempt_at = attempt_at.or(Some(r.submitted_at));
        if persistence_at.is_none() && best_run >= rules.persistence_days {
            persistence_at = Some(r.submitted_at);
        }
        if quantity_at.is_none() && count >= u64::from(rules.quantity_records) {
            quantity_at = Some(r.submitted_at);
        }
        if quality_at.is_none()
            && count >= u64::from(rules.quality_min_records)
            && points as f64 >= quality_points_needed * count as f64
        {
            quality_at = Some(r.submitted_at);
        }
    }

    let count = ordered.len() as u64;
    let n = count as f64;
    // Quality reflects the full record set; a later drop in the mean un-earns it here,
    // and persisted state (see `merged_with`) keeps it.
    let quality_holds = count >= u64::from(rules.quality_min_records) && points as f64 >= quality_points_needed * n;
    let quality_progress = if count == 0 {
        0.0
    } else {
        let mean = points as f64 / (3.0 * n);
        (n / f64::from(rules.quality_min_records)) * (mean / rules.quality_min_avg).min(1.0)
    };

    let mut state = BadgeState {
        attempt: BadgeStatus::from_rule(attempt_at, n.min(1.0)),
        persistence: BadgeStatus::from_rule(
            persistence_at,
            f64::from(current_streak(&dates, as_of)) / f64::from(rules.persistence_days),
        ),
        quantity: BadgeStatus::from_rule(quantity_at, n / f64::from(rules.quantity_records)),
        quality: BadgeStatus::from_rule(quality_at.filter(|_| quality_holds), quality_progress),
        reward_eligible: false,
    };
    state.reward_eligible = state.all_earned();
    state
}

fn run_through(dates: &BTreeSet<NaiveDate>, day: NaiveDate) -> u32 {
    let mut run = 1;
    let mut d = day;
    while let Some(p) = d.pred_opt().filter(|p| dates.contains(p)) {
        run += 1;
        d = p;
    }
    let mut d = day;
    while let Some(s) = d.succ_opt().filter(|s| dates.contains(s)) {
        run += 1;
        d = s;
    }
    run
}

/// Evaluates many users at once; one entry per input stream, same order.
pub fn evaluate_population(streams: &[Vec<MealRecord>], rules: &BadgeRuleConfig, as_of: NaiveDate) -> Vec<BadgeState> {
    crate::par::map(streams, |s| evaluate_badges(s, rules, as_of))
}

pub fn evaluate_population_sequential(streams: &[Vec<MealRecord>], rules: &BadgeRuleConfig, as_of: NaiveDate) -> Vec<BadgeState> {
    crate::par::map_sequential(streams, |s| evaluate_badges(s, rules, as_of))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BadgeCounts {
    pub attempt: u64,
    pub persistence: u64,
    pub quantity: u64,
    pub quality: u64,
}

impl BadgeCounts {
    pub fn get(&self, kind: BadgeKind) -> u64 {
        match kind {
            BadgeKind::Attempt => self.attempt,
            BadgeKind::Persistence => self.persistence,
            BadgeKind::Quantity => self.quantity,
            BadgeKind::Quality => self.quality,
        }
    }
}

pub fn badge_earner_counts<'a>(states: impl IntoIterator<Item = &'a BadgeState>) -> BadgeCounts {
    states.into_iter().fold(BadgeCounts::default(), |mut acc, s| {
        acc.attempt += u64::from(s.attempt.earned);
        acc.persistence += u64::from(s.persistence.earned);
        acc.quantity += u64::from(s.quantity.earned);
        acc.quality += u64::from(s.quality.earned);
        acc
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompletionAverages {
    pub categories: PerCategory<f64>,
    pub overall: f64,
    pub records: u64,
    /// Set when there were no records; every mean is then reported as 0.
    pub no_data: bool,
}

/// Unweighted per-category means over `records`.
pub fn community_averages(records: &[MealRecord]) -> CompletionAverages {
    if records.is_empty() {
        return CompletionAverages { categories: PerCategory::splat(0.0), overall: 0.0, records: 0, no_data: true };
    }
    let n = records.len() as f64;
    let mean_of = |c: FoodCategory| crate::par::sum_f64(records, |r| f64::from(r.scores.get(c))) / n;
    let categories = PerCategory::new(mean_of(FoodCategory::Rice), mean_of(FoodCategory::Meat), mean_of(FoodCategory::Vegetables));
    let overall = crate::par::sum_f64(records, |r| r.overall) / n;
    CompletionAverages { categories, overall, records: records.len() as u64, no_data: false }
}

/// Records whose local date falls inside `[start, end]`.
pub fn within_window(records: &[MealRecord], start: NaiveDate, end: NaiveDate) -> Vec<MealRecord> {
    records.iter().filter(|r| (start..=end).contains(&r.local_date)).cloned().collect()
}
