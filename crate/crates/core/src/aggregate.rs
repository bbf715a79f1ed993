//! Dashboard aggregation: per-tray severity, the 100-bowl allocation, the type ring and
//! the per-day severity bars, plus the cached daily job that produces them.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Datelike, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::domain::{FoodCategory, PerCategory};
use crate::error::{AggregateError, StoreError};
use crate::estimator::{predict, LinearModel};
use crate::ingest::TrayObservation;
use crate::store::{collections, Store};

pub const BOWLS: u32 = 100;

/// Ordered `Light < Medium < Severe`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeverityLevel {
    Light,
    Medium,
    Severe,
}

impl SeverityLevel {
    /// Display and tie-break order: most severe first.
    pub const DESCENDING: [SeverityLevel; 3] = [SeverityLevel::Severe, SeverityLevel::Medium, SeverityLevel::Light];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeverityThresholds {
    pub medium_min_g: f64,
    pub severe_min_g: f64,
}

impl Default for SeverityThresholds {
    fn default() -> Self {
        Self { medium_min_g: 50.0, severe_min_g: 150.0 }
    }
}

impl SeverityThresholds {
    pub fn new(medium_min_g: f64, severe_min_g: f64) -> Option<Self> {
        (medium_min_g > 0.0 && medium_min_g < severe_min_g && severe_min_g.is_finite())
            .then_some(Self { medium_min_g, severe_min_g })
    }

    pub fn is_valid(&self) -> bool {
        Self::new(self.medium_min_g, self.severe_min_g).is_some()
    }
}

pub fn classify_severity(waste_g: f64, t: &SeverityThresholds) -> SeverityLevel {
    if waste_g >= t.severe_min_g {
        SeverityLevel::Severe
    } else if waste_g >= t.medium_min_g {
        SeverityLevel::Medium
    } else {
        SeverityLevel::Light
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SeverityCounts {
    pub severe: u64,
    pub medium: u64,
    pub light: u64,
}

impl SeverityCounts {
    pub fn new(severe: u64, medium: u64, light: u64) -> Self {
        Self { severe, medium, light }
    }

    pub fn get(&self, level: SeverityLevel) -> u64 {
        match level {
            SeverityLevel::Severe => self.severe,
            SeverityLevel::Medium => self.medium,
            SeverityLevel::Light => self.light,
        }
    }

    pub fn bump(&mut self, level: SeverityLevel) {
        match level {
            SeverityLevel::Severe => self.severe += 1,
            SeverityLevel::Medium => self.medium += 1,
            SeverityLevel::Light => self.light += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.severe + self.medium + self.light
    }
}

/// Largest-remainder split of `seats` proportional to integer `weights`, computed in
/// exact integer arithmetic. Equal remainders go to the lower index first.
///
/// Returns all zeros when the weights sum to zero.
pub fn largest_remainder(weights: &[u64], seats: u32) -> Vec<u32> {
    let total: u128 = weights.iter().map(|&w| u128::from(w)).sum();
    if total == 0 {
        return vec![0; weights.len()];
    }
    let seats_w = u128::from(seats);
    let mut out: Vec<u32> = Vec::with_capacity(weights.len());
    let mut remainders: Vec<(u128, usize)> = Vec::with_capacity(weights.len());
    for (i, &w) in weights.iter().enumerate() {
        let scaled = u128::from(w) * seats_w;
        out.push((scaled / total) as u32);
        remainders.push((scaled % total, i));
    }
    let assigned: u32 = out.iter().sum();
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in remainders.iter().take((seats - assigned) as usize) {
        out[i] += 1;
    }
    out
}

/// Largest-remainder split for real-valued weights. Equal remainders go to the lower
/// index first. `None` when every weight is zero.
pub fn largest_remainder_f64(weights: &[f64], seats: u32) -> Option<Vec<u32>> {
    let total: f64 = weights.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return None;
    }
    let quotas: Vec<f64> = weights.iter().map(|w| w / total * f64::from(seats)).collect();
    let mut out: Vec<u32> = quotas.iter().map(|q| q.floor() as u32).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let assigned: u32 = out.iter().sum();
    if assigned <= seats {
        for &i in order.iter().take((seats - assigned) as usize) {
            out[i] += 1;
        }
    } else {
        // Rounding pushed a quota just over an integer; take back from the smallest remainders.
        let mut excess = assigned - seats;
        for &i in order.iter().rev() {
            if excess == 0 {
                break;
            }
            if out[i] > 0 {
                out[i] -= 1;
                excess -= 1;
            }
        }
    }
    Some(out)
}

/// 100 cells, severe first, then medium, then light.
pub fn allocate_bowls(counts: &SeverityCounts) -> Vec<SeverityLevel> {
    if counts.total() == 0 {
        return Vec::new();
    }
    let weights = SeverityLevel::DESCENDING.map(|l| counts.get(l));
    let seats = largest_remainder(&weights, BOWLS);
    SeverityLevel::DESCENDING
        .iter()
        .zip(seats)
        .flat_map(|(&level, n)| std::iter::repeat_n(level, n as usize))
        .collect()
}

/// Integer percentages summing to 100, ties going to rice, then meat, then vegetables.
pub fn integer_percent(values: &PerCategory<f64>) -> Result<PerCategory<u32>, AggregateError> {
    largest_remainder_f64(&values.to_array(), 100)
        .map(|v| PerCategory::new(v[0], v[1], v[2]))
        .ok_or(AggregateError::AllZero)
}

fn integer_percent_exact(values: &PerCategory<u64>) -> PerCategory<u32> {
    let v = largest_remainder(&values.to_array(), 100);
    PerCategory::new(v[0], v[1], v[2])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyAggregate {
    pub date: NaiveDate,
    pub total_trays: u64,
    pub severity_counts: SeverityCounts,
    pub bowls: Vec<SeverityLevel>,
    pub type_percent: PerCategory<u32>,
    pub total_waste_g: f64,
    pub computed_at: DateTime<Utc>,
}

impl DailyAggregate {
    /// Equality ignoring `computed_at`.
    pub fn same_content(&self, other: &Self) -> bool {
        Self { computed_at: other.computed_at, ..self.clone() } == *other
    }
}

pub fn daily_aggregate(
    date: NaiveDate,
    observations: &[TrayObservation],
    model: &LinearModel,
    thresholds: &SeverityThresholds,
    computed_at: DateTime<Utc>,
) -> DailyAggregate {
    let waste: Vec<f64> = crate::par::map(observations, |t| predict(model, t.total_area_px()));
    daily_from_waste(date, observations, &waste, thresholds, computed_at)
}

/// Same result as [`daily_aggregate`], always on the calling thread.
pub fn daily_aggregate_sequential(
    date: NaiveDate,
    observations: &[TrayObservation],
    model: &LinearModel,
    thresholds: &SeverityThresholds,
    computed_at: DateTime<Utc>,
) -> DailyAggregate {
    let waste: Vec<f64> = crate::par::map_sequential(observations, |t| predict(model, t.total_area_px()));
    daily_from_waste(date, observations, &waste, thresholds, computed_at)
}

fn daily_from_waste(
    date: NaiveDate,
    observations: &[TrayObservation],
    waste: &[f64],
    thresholds: &SeverityThresholds,
    computed_at: DateTime<Utc>,
) -> DailyAggregate {
    let mut counts = SeverityCounts::default();
    let mut areas = PerCategory::<u64>::default();
    for (t, &w) in observations.iter().zip(waste) {
        counts.bump(classify_severity(w, thresholds));
        for c in FoodCategory::ALL {
            *areas.get_mut(c) += t.areas_px.get(c);
        }
    }
    DailyAggregate {
        date,
        total_trays: observations.len() as u64,
        severity_counts: counts,
        bowls: allocate_bowls(&counts),
        type_percent: integer_percent_exact(&areas),
        total_waste_g: crate::par::sum_f64_sequential(waste, |w| *w),
        computed_at,
    }
}

/// A calendar month, rendered `YYYY-MM`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn of(date: NaiveDate) -> Self {
        Self { year: date.year(), month: date.month() }
    }

    pub fn first_day(&self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.year, self.month, 1).expect("valid month")
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (y, m) = s.split_once('-').ok_or_else(|| format!("expected YYYY-MM, got {s:?}"))?;
        let year: i32 = y.parse().map_err(|_| format!("bad year in {s:?}"))?;
        let month: u32 = m.parse().map_err(|_| format!("bad month in {s:?}"))?;
        if y.len() != 4 || m.len() != 2 || NaiveDate::from_ymd_opt(year, month, 1).is_none() {
            return Err(format!("expected YYYY-MM, got {s:?}"));
        }
        Ok(Self { year, month })
    }
}

impl Serialize for YearMonth {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for YearMonth {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonthlyEntry {
    pub date: NaiveDate,
    pub severity_counts: SeverityCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlyAggregate {
    /// `None` only for an aggregate built from no dailies.
    pub month: Option<YearMonth>,
    pub days: Vec<MonthlyEntry>,
    pub computed_at: DateTime<Utc>,
}

impl MonthlyAggregate {
    pub fn same_content(&self, other: &Self) -> bool {
        self.month == other.month && self.days == other.days
    }
}

/// One entry per daily aggregate, ordered by date.
pub fn monthly_aggregate(dailies: &[DailyAggregate], computed_at: DateTime<Utc>) -> Result<MonthlyAggregate, AggregateError> {
    let month = dailies.first().map(|d| YearMonth::of(d.date));
    if dailies.iter().any(|d| Some(YearMonth::of(d.date)) != month) {
        return Err(AggregateError::MixedMonths);
    }
    let mut days: Vec<MonthlyEntry> = dailies
        .iter()
        .map(|d| MonthlyEntry { date: d.date, severity_counts: d.severity_counts })
        .collect();
    days.sort_by_key(|e| e.date);
    Ok(MonthlyAggregate { month, days, computed_at })
}

pub fn observation_key(obs: &TrayObservation) -> String {
    format!("{}/{}", obs.local_date, obs.tray_id)
}

/// Appends an observation; a second tray with the same id on the same date is refused.
pub fn store_observation(store: &Store, obs: &TrayObservation) -> Result<(), StoreError> {
    store.insert_document(collections::OBSERVATIONS, &observation_key(obs), obs).map(|_| ())
}

pub fn load_observations(store: &Store, date: NaiveDate) -> Result<Vec<TrayObservation>, StoreError> {
    Ok(store
        .scan::<TrayObservation>(collections::OBSERVATIONS, &format!("{date}/"))?
        .into_iter()
        .map(|(_, o)| o)
        .collect())
}

pub fn cached_daily(store: &Store, date: NaiveDate) -> Result<Option<DailyAggregate>, StoreError> {
    store.find_document(collections::DAILY, &date.to_string())
}

pub fn cached_monthly(store: &Store, month: YearMonth) -> Result<Option<MonthlyAggregate>, StoreError> {
    store.find_document(collections::MONTHLY, &month.to_string())
}

/// Recomputes and caches dashboard aggregates. Runs for the same date are serialized.
pub struct DailyJob {
    store: Store,
    model: LinearModel,
    thresholds: SeverityThresholds,
    date_locks: Mutex<HashMap<NaiveDate, Arc<Mutex<()>>>>,
    month_lock: Mutex<()>,
}

impl DailyJob {
    pub fn new(store: Store, model: LinearModel, thresholds: SeverityThresholds) -> Self {
        Self { store, model, thresholds, date_locks: Mutex::new(HashMap::new()), month_lock: Mutex::new(()) }
    }

    pub fn model(&self) -> &LinearModel {
        &self.model
    }

    fn date_lock(&self, date: NaiveDate) -> Arc<Mutex<()>> {
        let mut locks = self.date_locks.lock().unwrap_or_else(|e| e.into_inner());
        locks.entry(date).or_default().clone()
    }

    /// Loads the date's observations, upserts its daily aggregate and refreshes the
    /// month's aggregate. Rerunning on unchanged input stores identical content.
    pub fn run(&self, date: NaiveDate, now: DateTime<Utc>) -> Result<DailyAggregate, AggregateError> {
        let lock = self.date_lock(date);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());

        let mut observations = load_observations(&self.store, date)?;
        observations.sort_by(|a, b| a.tray_id.cmp(&b.tray_id));
        let daily = daily_aggregate(date, &observations, &self.model, &self.thresholds, now);
        self.store.put_document(collections::DAILY, &date.to_string(), &daily)?;
        self.refresh_month(YearMonth::of(date), now)?;
        tracing::info!(%date, trays = daily.total_trays, "daily aggregate stored");
        Ok(daily)
    }

    pub fn refresh_month(&self, month: YearMonth, now: DateTime<Utc>) -> Result<MonthlyAggregate, AggregateError> {
        let _guard = self.month_lock.lock().unwrap_or_else(|e| e.into_inner());
        let dailies: Vec<DailyAggregate> = self
            .store
            .scan::<DailyAggregate>(collections::DAILY, &format!("{month}-"))?
            .into_iter()
            .map(|(_, d)| d)
            .collect();
        let mut monthly = monthly_aggregate(&dailies, now)?;
        monthly.month = Some(month);
        self.store.put_document(collections::MONTHLY, &month.to_string(), &monthly)?;
        Ok(monthly)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t() -> SeverityThresholds {
        SeverityThresholds::default()
    }

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn now() -> DateTime<Utc> {
        "2023-03-21T00:10:00Z".parse().unwrap()
    }

    fn tray(id: &str, day: NaiveDate, areas: [u64; 3]) -> TrayObservation {
        TrayObservation {
            tray_id: id.into(),
            observed_at: day.and_hms_opt(4, 0, 0).unwrap().and_utc(),
            local_date: day,
            areas_px: PerCategory::from_array(areas),
        }
    }

    fn level_counts(bowls: &[SeverityLevel]) -> [usize; 3] {
        SeverityLevel::DESCENDING.map(|l| bowls.iter().filter(|&&b| b == l).count())
    }

    #[test]
    fn severity_boundaries() {
        assert_eq!(classify_severity(0.0, &t()), SeverityLevel::Light);
        assert_eq!(classify_severity(50.0, &t()), SeverityLevel::Medium);
        assert_eq!(classify_severity(149.999, &t()), SeverityLevel::Medium);
        assert_eq!(classify_severity(150.0, &t()), SeverityLevel::Severe);
    }

    #[test]
    fn thresholds_validation() {
        assert!(SeverityThresholds::new(50.0, 150.0).is_some());
        assert!(SeverityThresholds::new(0.0, 150.0).is_none());
        assert!(SeverityThresholds::new(150.0, 150.0).is_none());
    }

    #[test]
    fn bowls_single_level() {
        let b = allocate_bowls(&SeverityCounts::new(0, 0, 42));
        assert_eq!(b.len(), 100);
        assert!(b.iter().all(|&l| l == SeverityLevel::Light));
    }

    #[test]
    fn bowls_three_way_tie_goes_to_severe() {
        let b = allocate_bowls(&SeverityCounts::new(1, 1, 1));
        assert_eq!(level_counts(&b), [34, 33, 33]);
        assert_eq!(b[0], SeverityLevel::Severe);
        assert_eq!(b[99], SeverityLevel::Light);
    }

    #[test]
    fn bowls_exact_quarters() {
        assert_eq!(level_counts(&allocate_bowls(&SeverityCounts::new(1, 0, 3))), [25, 0, 75]);
    }

    #[test]
    fn bowls_empty_day() {
        assert!(allocate_bowls(&SeverityCounts::default()).is_empty());
    }

    #[test]
    fn percents() {
        let p = |r, m, v| integer_percent(&PerCategory::new(r, m, v));
        assert_eq!(p(1000.0, 0.0, 0.0).unwrap(), PerCategory::new(100, 0, 0));
        assert_eq!(p(1.0, 1.0, 1.0).unwrap(), PerCategory::new(34, 33, 33));
        assert_eq!(p(0.0, 0.0, 0.0), Err(AggregateError::AllZero));
        assert_eq!(p(2.0, 1.0, 1.0).unwrap(), PerCategory::new(50, 25, 25));
    }

    #[test]
    fn empty_day_aggregate() {
        let a = daily_aggregate(date(2023, 3, 20), &[], &LinearModel::from_coefficients(0.1, 0.0), &t(), now());
        assert_eq!(a.total_trays, 0);
        assert!(a.bowls.is_empty());
        assert_eq!(a.type_percent, PerCategory::new(0, 0, 0));
        assert_eq!(a.total_waste_g, 0.0);
    }

    #[test]
    fn three_trays_one_per_level() {
        let day = date(2023, 3, 20);
        let model = LinearModel::from_coefficients(0.1, 0.0);
        // 400 px → 40 g, 1000 px → 100 g, 2000 px → 200 g
        let trays = [tray("a", day, [400, 0, 0]), tray("b", day, [500, 500, 0]), tray("c", day, [1000, 500, 500])];
        let a = daily_aggregate(day, &trays, &model, &t(), now());
        assert_eq!(a.severity_counts, SeverityCounts::new(1, 1, 1));
        assert_eq!(level_counts(&a.bowls), [34, 33, 33]);
        assert!((a.total_waste_g - 340.0).abs() < 1e-9);
        // areas 1900/1000/500 → quotas 55.88, 29.41, 14.71 → floors 98, +1 rice, +1 vegetables
        assert_eq!(a.type_percent, PerCategory::new(56, 29, 15));
    }

    #[test]
    fn single_tray_type_ring() {
        let day = date(2023, 3, 20);
        let a = daily_aggregate(day, &[tray("a", day, [1000, 0, 0])], &LinearModel::from_coefficients(0.1, 0.0), &t(), now());
        assert_eq!(a.type_percent, PerCategory::new(100, 0, 0));
    }

    #[test]
    fn clean_trays_have_zero_ring() {
        let day = date(2023, 3, 20);
        let a = daily_aggregate(day, &[tray("a", day, [0, 0, 0])], &LinearModel::from_coefficients(0.1, 0.0), &t(), now());
        assert_eq!(a.total_trays, 1);
        assert_eq!(a.bowls.len(), 100);
        assert_eq!(a.type_percent, PerCategory::new(0, 0, 0));
    }

    fn daily_with(day: NaiveDate, counts: SeverityCounts) -> DailyAggregate {
        DailyAggregate {
            date: day,
            total_trays: counts.total(),
            severity_counts: counts,
            bowls: allocate_bowls(&counts),
            type_percent: PerCategory::default(),
            total_waste_g: 0.0,
            computed_at: now(),
        }
    }

    #[test]
    fn monthly_pass_through() {
        let m = monthly_aggregate(&[], now()).unwrap();
        assert!(m.days.is_empty());
        let d1 = daily_with(date(2023, 3, 21), SeverityCounts::new(0, 0, 5));
        let d0 = daily_with(date(2023, 3, 20), SeverityCounts::new(1, 1, 1));
        let m = monthly_aggregate(&[d1, d0], now()).unwrap();
        assert_eq!(m.month, Some(YearMonth { year: 2023, month: 3 }));
        assert_eq!(m.days.len(), 2);
        assert_eq!(m.days[0].severity_counts, SeverityCounts::new(1, 1, 1));
        assert_eq!(m.days[1].severity_counts, SeverityCounts::new(0, 0, 5));
    }

    #[test]
    fn monthly_rejects_mixed() {
        let a = daily_with(date(2023, 3, 31), SeverityCounts::new(0, 0, 1));
        let b = daily_with(date(2023, 4, 1), SeverityCounts::new(0, 0, 1));
        assert_eq!(monthly_aggregate(&[a, b], now()), Err(AggregateError::MixedMonths));
    }

    #[test]
    fn year_month_parsing() {
        assert_eq!("2023-04".parse::<YearMonth>().unwrap().to_string(), "2023-04");
        assert!("2023-13".parse::<YearMonth>().is_err());
        assert!("2023-4".parse::<YearMonth>().is_err());
        assert!("march".parse::<YearMonth>().is_err());
    }

    #[test]
    fn job_is_idempotent_and_tracks_new_trays() {
        let store = Store::in_memory();
        let day = date(2023, 3, 20);
        for (i, areas) in [[400, 0, 0], [500, 500, 0], [1000, 500, 500]].into_iter().enumerate() {
            store_observation(&store, &tray(&format!("t{i}"), day, areas)).unwrap();
        }
        let job = DailyJob::new(store.clone(), LinearModel::from_coefficients(0.1, 0.0), t());
        let first = job.run(day, now()).unwrap();
        let second = job.run(day, now() + chrono::Duration::hours(1)).unwrap();
        assert!(first.same_content(&second));
        assert_ne!(first.computed_at, second.computed_at);
        assert!(cached_daily(&store, day).unwrap().unwrap().same_content(&first));

        let empty_day = job.run(date(2023, 3, 22), now()).unwrap();
        assert_eq!(empty_day.total_trays, 0);

        store_observation(&store, &tray("t9", day, [10, 0, 0])).unwrap();
        let third = job.run(day, now()).unwrap();
        assert_eq!(third.total_trays, first.total_trays + 1);

        let monthly = cached_monthly(&store, YearMonth::of(day)).unwrap().unwrap();
        assert_eq!(monthly.days.len(), 2);
        assert_eq!(monthly.days[0].severity_counts, third.severity_counts);
    }

    #[test]
    fn duplicate_tray_same_date_rejected() {
        let store = Store::in_memory();
        let day = date(2023, 3, 20);
        store_observation(&store, &tray("dup", day, [1, 0, 0])).unwrap();
        assert!(matches!(store_observation(&store, &tray("dup", day, [2, 0, 0])), Err(StoreError::AlreadyExists(_))));
        store_observation(&store, &tray("dup", date(2023, 3, 21), [2, 0, 0])).unwrap();
    }

    proptest::proptest! {
        #[test]
        fn bowls_always_fill_and_stay_within_one(s in 0u64..500, m in 0u64..500, l in 0u64..500) {
            let c = SeverityCounts::new(s, m, l);
            proptest::prop_assume!(c.total() > 0);
            let b = allocate_bowls(&c);
            proptest::prop_assert_eq!(b.len(), 100);
            for (i, level) in SeverityLevel::DESCENDING.iter().enumerate() {
                let exact = c.get(*level) as f64 / c.total() as f64 * 100.0;
                proptest::prop_assert!((level_counts(&b)[i] as f64 - exact).abs() < 1.0);
            }
            proptest::prop_assert!(b.windows(2).all(|w| w[0] >= w[1]));
        }

        #[test]
        fn percent_sums_to_100(v in proptest::array::uniform3(0.0f64..1e9)) {
            proptest::prop_assume!(v.iter().any(|x| *x > 0.0));
            let p = integer_percent(&PerCategory::from_array(v)).unwrap();
            proptest::prop_assert_eq!(p.rice + p.meat + p.vegetables, 100);
        }

        #[test]
        fn severity_is_monotone(a in 0.0f64..1_000.0, b in 0.0f64..1_000.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            proptest::prop_assert!(classify_severity(lo, &t()) <= classify_severity(hi, &t()));
        }

        #[test]
        fn parallel_and_sequential_agree(areas in proptest::collection::vec(proptest::array::uniform3(0u64..5_000), 0..60)) {
            let day = date(2023, 3, 20);
            let trays: Vec<_> = areas.iter().enumerate().map(|(i, a)| tray(&i.to_string(), day, *a)).collect();
            let model = LinearModel::from_coefficients(0.07, -3.0);
            let a = daily_aggregate(day, &trays, &model, &t(), now());
            let b = daily_aggregate_sequential(day, &trays, &model, &t(), now());
            proptest::prop_assert_eq!(a.severity_counts.total(), a.total_trays);
            proptest::prop_assert_eq!(a, b);
        }
    }
}
