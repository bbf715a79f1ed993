//! Core of the FoodWise food-waste service.
//!
//! * [`domain`]: categories, completion scores, users and meal records
//! * [`ingest`]: the tray-observation JSON contract and the synthetic feed
//! * [`estimator`]: pixel area → grams regression
//! * [`aggregate`]: severity, bowl allocation, daily/monthly dashboard payloads
//! * [`gamify`]: badges, streaks and community averages
//! * [`store`]: document and blob persistence
//!
//! Batch paths (population badge evaluation, multi-day generation, per-tray
//! prediction) run on rayon when the `parallel` feature is enabled.

pub mod aggregate;
pub mod config;
pub mod domain;
pub mod error;
pub mod estimator;
pub mod gamify;
pub mod ingest;
pub mod par;
pub mod store;

pub use aggregate::{DailyAggregate, DailyJob, MonthlyAggregate, SeverityLevel, SeverityThresholds, YearMonth};
pub use config::{AppConfig, CampaignConfig};
pub use domain::{CompletionScores, FoodCategory, MealRecord, PerCategory, RecordId, User, UserId};
pub use error::{AggregateError, ConfigError, EstimatorError, IngestError, StoreError, ValidationError};
pub use estimator::{LinearModel, WeightSample};
pub use gamify::{BadgeCounts, BadgeKind, BadgeRuleConfig, BadgeState, BadgeStatus};
pub use ingest::{SyntheticProfile, TrayObservation};
pub use store::{BlobRef, Store};
