//! Shared value types: food categories, completion scores, meal records and users.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, Utc};
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::error::ValidationError;

/// The three kinds of leftovers tracked on every tray and every meal record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FoodCategory {
    Rice,
    Meat,
    Vegetables,
}

impl FoodCategory {
    /// Fixed order used for iteration, serialization and tie-breaks.
    pub const ALL: [FoodCategory; 3] = [FoodCategory::Rice, FoodCategory::Meat, FoodCategory::Vegetables];

    pub fn as_str(self) -> &'static str {
        match self {
            FoodCategory::Rice => "rice",
            FoodCategory::Meat => "meat",
            FoodCategory::Vegetables => "vegetables",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for FoodCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FoodCategory {
    type Err = ValidationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rice" => Ok(FoodCategory::Rice),
            "meat" => Ok(FoodCategory::Meat),
            "vegetables" => Ok(FoodCategory::Vegetables),
            other => Err(ValidationError::UnknownCategory(other.to_string())),
        }
    }
}

/// A value for each food category. Serializes as `{"rice": .., "meat": .., "vegetables": ..}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct PerCategory<T> {
    pub rice: T,
    pub meat: T,
    pub vegetables: T,
}

impl<T: Copy> PerCategory<T> {
    pub fn new(rice: T, meat: T, vegetables: T) -> Self {
        Self { rice, meat, vegetables }
    }

    pub fn splat(value: T) -> Self {
        Self::new(value, value, value)
    }

    pub fn get(&self, category: FoodCategory) -> T {
        match category {
            FoodCategory::Rice => self.rice,
            FoodCategory::Meat => self.meat,
            FoodCategory::Vegetables => self.vegetables,
        }
    }

    pub fn get_mut(&mut self, category: FoodCategory) -> &mut T {
        match category {
            FoodCategory::Rice => &mut self.rice,
            FoodCategory::Meat => &mut self.meat,
            FoodCategory::Vegetables => &mut self.vegetables,
        }
    }

    pub fn map<U: Copy>(self, mut f: impl FnMut(T) -> U) -> PerCategory<U> {
        PerCategory::new(f(self.rice), f(self.meat), f(self.vegetables))
    }

    pub fn to_array(self) -> [T; 3] {
        [self.rice, self.meat, self.vegetables]
    }

    pub fn from_array(values: [T; 3]) -> Self {
        Self::new(values[0], values[1], values[2])
    }

    pub fn iter(&self) -> impl Iterator<Item = (FoodCategory, T)> + '_ {
        FoodCategory::ALL.into_iter().map(move |c| (c, self.get(c)))
    }
}

/// Self-reported completion percentages, each in `0..=100`.
///
/// Only constructed through [`validate_scores`] or [`CompletionScores::new`], so every
/// value in circulation is in range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct CompletionScores(PerCategory<u8>);

impl CompletionScores {
    pub const MAX: i64 = 100;

    pub fn new(rice: i64, meat: i64, vegetables: i64) -> Result<Self, ValidationError> {
        let mut raw = BTreeMap::new();
        raw.insert(FoodCategory::Rice, rice);
        raw.insert(FoodCategory::Meat, meat);
        raw.insert(FoodCategory::Vegetables, vegetables);
        validate_scores(&raw)
    }

    pub fn get(&self, category: FoodCategory) -> u8 {
        self.0.get(category)
    }

    pub fn values(&self) -> PerCategory<u8> {
        self.0
    }

    pub fn overall(&self) -> f64 {
        overall_completion(self)
    }
}

impl<'de> Deserialize<'de> for CompletionScores {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = PerCategory::<i64>::deserialize(deserializer)?;
        CompletionScores::new(raw.rice, raw.meat, raw.vegetables).map_err(serde::de::Error::custom)
    }
}

/// Checks that all three categories are present and each score lies in `0..=100`.
pub fn validate_scores(raw: &BTreeMap<FoodCategory, i64>) -> Result<CompletionScores, ValidationError> {
    let mut out = PerCategory::<u8>::default();
    for category in FoodCategory::ALL {
        let value = *raw.get(&category).ok_or(ValidationError::MissingCategory(category))?;
        if !(0..=CompletionScores::MAX).contains(&value) {
            return Err(ValidationError::OutOfRange { category, value });
        }
        *out.get_mut(category) = value as u8;
    }
    Ok(CompletionScores(out))
}

/// Equal-weight mean of the three category scores.
pub fn overall_completion(scores: &CompletionScores) -> f64 {
    let v = scores.values();
    (f64::from(v.rice) + f64::from(v.meat) + f64::from(v.vegetables)) / 3.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserId(pub Uuid);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RecordId(pub Uuid);

macro_rules! id_impls {
    ($name:ident) => {
        impl $name {
            pub fn random() -> Self {
                Self(Uuid::new_v4())
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                fmt::Display::fmt(&self.0, f)
            }
        }

        impl FromStr for $name {
            type Err = uuid::Error;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                Uuid::parse_str(s).map(Self)
            }
        }
    };
}

id_impls!(UserId);
id_impls!(RecordId);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct User {
    pub user_id: UserId,
    /// Lowercased, trimmed.
    pub email: String,
    pub display_name: String,
    /// PHC-format salted hash; the clear-text password is never stored.
    pub password_hash: String,
    pub registered_at: DateTime<Utc>,
}

pub fn normalize_email(email: &str) -> String {
    email.trim().to_lowercase()
}

/// One food-saving action: a finished-meal photo plus completion scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MealRecord {
    pub record_id: RecordId,
    pub user_id: UserId,
    pub submitted_at: DateTime<Utc>,
    pub local_date: NaiveDate,
    pub scores: CompletionScores,
    pub photo_ref: String,
    pub overall: f64,
}

impl MealRecord {
    pub fn new(
        record_id: RecordId,
        user_id: UserId,
        submitted_at: DateTime<Utc>,
        tz: Tz,
        scores: CompletionScores,
        photo_ref: impl Into<String>,
    ) -> Self {
        Self {
            record_id,
            user_id,
            submitted_at,
            local_date: local_date(submitted_at, tz),
            overall: scores.overall(),
            scores,
            photo_ref: photo_ref.into(),
        }
    }
}

/// Calendar date of `at` in the campaign timezone.
pub fn local_date(at: DateTime<Utc>, tz: Tz) -> NaiveDate {
    at.with_timezone(&tz).date_naive()
}
