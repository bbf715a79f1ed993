//! Tray observations: the JSON handoff from the return-station camera pipeline, plus a
//! seeded generator that stands in for the camera when no footage is available.

use chrono::{DateTime, Datelike, NaiveDate, NaiveTime, SecondsFormat, TimeZone, Utc};
use chrono_tz::Tz;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::domain::{local_date, FoodCategory, PerCategory};
use crate::error::IngestError;

/// One tray at the return station with the leftover pixel area of each category.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrayObservation {
    pub tray_id: String,
    pub observed_at: DateTime<Utc>,
    pub local_date: NaiveDate,
    pub areas_px: PerCategory<u64>,
}

impl TrayObservation {
    pub fn total_area_px(&self) -> u64 {
        self.areas_px.rice + self.areas_px.meat + self.areas_px.vegetables
    }

    /// The wire form: `{"tray_id", "timestamp", "areas_px": {"rice", "meat", "vegetables"}}`.
    pub fn to_wire(&self) -> Value {
        serde_json::json!({
            "tray_id": self.tray_id,
            "timestamp": self.observed_at.to_rfc3339_opts(SecondsFormat::AutoSi, true),
            "areas_px": {
                "rice": self.areas_px.rice,
                "meat": self.areas_px.meat,
                "vegetables": self.areas_px.vegetables,
            }
        })
    }
}

/// Serializes observations as a batch document (a JSON array of wire objects).
pub fn to_batch_json(observations: &[TrayObservation]) -> String {
    let arr: Vec<Value> = observations.iter().map(TrayObservation::to_wire).collect();
    serde_json::to_string_pretty(&Value::Array(arr)).expect("json values always serialize")
}

pub fn parse_tray_observation(bytes: &[u8], tz: Tz) -> Result<TrayObservation, IngestError> {
    let value: Value = serde_json::from_slice(bytes).map_err(|e| IngestError::MalformedDocument(e.to_string()))?;
    tray_from_value(&value, tz)
}

/// Parses a batch document. A non-array top level fails as a whole; individual bad
/// elements are reported in place.
pub fn parse_tray_batch(bytes: &[u8], tz: Tz) -> Result<Vec<Result<TrayObservation, IngestError>>, IngestError> {
    let value: Value = serde_json::from_slice(bytes).map_err(|e| IngestError::MalformedDocument(e.to_string()))?;
    match value {
        Value::Array(items) => Ok(items.iter().map(|v| tray_from_value(v, tz)).collect()),
        _ => Err(IngestError::MalformedDocument("expected a JSON array of tray observations".into())),
    }
}

pub fn tray_from_value(value: &Value, tz: Tz) -> Result<TrayObservation, IngestError> {
    let obj = value
        .as_object()
        .ok_or_else(|| IngestError::MalformedDocument("expected a JSON object".into()))?;

    let tray_id = match obj.get("tray_id") {
        None | Some(Value::Null) => return Err(IngestError::MissingField("tray_id".into())),
        Some(Value::String(s)) if !s.is_empty() => s.clone(),
        Some(_) => return Err(IngestError::MalformedDocument("tray_id must be a non-empty string".into())),
    };

    let observed_at = match obj.get("timestamp") {
        None | Some(Value::Null) => return Err(IngestError::MissingField("timestamp".into())),
        Some(Value::String(s)) => DateTime::parse_from_rfc3339(s)
            .map_err(|e| IngestError::MalformedDocument(format!("timestamp {s:?}: {e}")))?
            .with_timezone(&Utc),
        Some(_) => return Err(IngestError::MalformedDocument("timestamp must be an RFC 3339 string".into())),
    };

    let areas = match obj.get("areas_px") {
        None | Some(Value::Null) => return Err(IngestError::MissingField("areas_px".into())),
        Some(Value::Object(m)) => m,
        Some(_) => return Err(IngestError::MalformedDocument("areas_px must be an object".into())),
    };
    let mut areas_px = PerCategory::<u64>::default();
    for category in FoodCategory::ALL {
        let field = match areas.get(category.as_str()) {
            None | Some(Value::Null) => return Err(IngestError::MissingField(format!("areas_px.{category}"))),
            Some(v) => v,
        };
        let area = if let Some(u) = field.as_u64() {
            u
        } else if field.as_i64().is_some_and(|i| i < 0) || field.as_f64().is_some_and(|f| f < 0.0) {
            return Err(IngestError::NegativeArea(category));
        } else {
            return Err(IngestError::MalformedDocument(format!("areas_px.{category} must be an integer")));
        };
        *areas_px.get_mut(category) = area;
    }

    Ok(TrayObservation { tray_id, observed_at, local_date: local_date(observed_at, tz), areas_px })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaDistribution {
    pub mean_px: f64,
    pub stddev_px: f64,
}

/// Parameters of the synthetic return-station feed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticProfile {
    pub trays_per_day: u32,
    pub rice: AreaDistribution,
    pub meat: AreaDistribution,
    pub vegetables: AreaDistribution,
    pub clean_tray_probability: f64,
    /// Zone used to place trays within the local serving window.
    #[serde(default = "default_tz")]
    pub timezone: Tz,
    /// Local serving window, `[open_hour, close_hour)`.
    #[serde(default = "default_window")]
    pub serving_hours: (u32, u32),
}

fn default_tz() -> Tz {
    chrono_tz::Asia::Hong_Kong
}

fn default_window() -> (u32, u32) {
    (11, 14)
}

impl Default for SyntheticProfile {
    fn default() -> Self {
        Self {
            trays_per_day: 400,
            rice: AreaDistribution { mean_px: 700.0, stddev_px: 500.0 },
            meat: AreaDistribution { mean_px: 250.0, stddev_px: 200.0 },
            vegetables: AreaDistribution { mean_px: 400.0, stddev_px: 300.0 },
            clean_tray_probability: 0.3,
            timezone: default_tz(),
            serving_hours: default_window(),
        }
    }
}

impl SyntheticProfile {
    pub fn distribution(&self, category: FoodCategory) -> AreaDistribution {
        match category {
            FoodCategory::Rice => self.rice,
            FoodCategory::Meat => self.meat,
            FoodCategory::Vegetables => self.vegetables,
        }
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        for category in FoodCategory::ALL {
            let d = self.distribution(category);
            if !(d.mean_px.is_finite() && d.mean_px >= 0.0) {
                return Err(IngestError::InvalidProfile(format!("{category}.mean_px must be >= 0")));
            }
            if !(d.stddev_px.is_finite() && d.stddev_px >= 0.0) {
                return Err(IngestError::InvalidProfile(format!("{category}.stddev_px must be >= 0")));
            }
        }
        if !(0.0..=1.0).contains(&self.clean_tray_probability) {
            return Err(IngestError::InvalidProfile("clean_tray_probability must be within [0, 1]".into()));
        }
        let (open, close) = self.serving_hours;
        if open >= close || close > 24 {
            return Err(IngestError::InvalidProfile("serving_hours must satisfy open < close <= 24".into()));
        }
        Ok(())
    }
}

/// splitmix64 finalizer; spreads (seed, day) pairs across the ChaCha seed space.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn day_rng(seed: u64, date: NaiveDate) -> ChaCha8Rng {
    let day = date.num_days_from_ce() as u64;
    ChaCha8Rng::seed_from_u64(mix(mix(seed) ^ day))
}

/// Deterministic synthetic trays for one local date, ordered by observation time.
pub fn generate_synthetic_day(seed: u64, date: NaiveDate, profile: &SyntheticProfile) -> Result<Vec<TrayObservation>, IngestError> {
    profile.validate()?;
    let mut rng = day_rng(seed, date);
    let tz = profile.timezone;

    let normals: Vec<Normal<f64>> = FoodCategory::ALL
        .iter()
        .map(|&c| {
            let d = profile.distribution(c);
            Normal::new(d.mean_px, d.stddev_px).expect("validated: finite mean, non-negative stddev")
        })
        .collect();

    let (open, close) = profile.serving_hours;
    let window_secs = (close - open) * 3600;
    let open_at = NaiveTime::from_hms_opt(open, 0, 0).expect("hour < 24");
    let local_open = date.and_time(open_at);
    let open_utc = match tz.from_local_datetime(&local_open) {
        chrono::LocalResult::Single(t) | chrono::LocalResult::Ambiguous(t, _) => t.with_timezone(&Utc),
        chrono::LocalResult::None => Utc.from_utc_datetime(&local_open),
    };

    let mut trays: Vec<(u32, PerCategory<u64>)> = (0..profile.trays_per_day)
        .map(|_| {
            let offset = rng.random_range(0..window_secs);
            let clean = rng.random_bool(profile.clean_tray_probability);
            let mut areas = PerCategory::<u64>::default();
            for (i, category) in FoodCategory::ALL.into_iter().enumerate() {
                let sample = normals[i].sample(&mut rng);
                if !clean {
                    *areas.get_mut(category) = sample.max(0.0).round() as u64;
                }
            }
            (offset, areas)
        })
        .collect();
    trays.sort_by_key(|t| t.0);

    Ok(trays
        .into_iter()
        .enumerate()
        .map(|(i, (offset, areas_px))| {
            let observed_at = open_utc + chrono::Duration::seconds(i64::from(offset));
            TrayObservation {
                tray_id: format!("{date}-{i:05}"),
                observed_at,
                local_date: local_date(observed_at, tz),
                areas_px,
            }
        })
        .collect())
}

/// Generates every day in `[from, to]`, fanning out across days when the `parallel`
/// feature is enabled.
pub fn generate_synthetic_range(
    seed: u64,
    from: NaiveDate,
    to: NaiveDate,
    profile: &SyntheticProfile,
) -> Result<Vec<(NaiveDate, Vec<TrayObservation>)>, IngestError> {
    let days: Vec<NaiveDate> = from.iter_days().take_while(|d| *d <= to).collect();
    crate::par::map(&days, |&d| generate_synthetic_day(seed, d, profile).map(|v| (d, v)))
        .into_iter()
        .collect()
}
