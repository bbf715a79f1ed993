//! TOML configuration for the campaign and the service around it.

use std::path::{Path, PathBuf};

use chrono::{NaiveDate, NaiveTime};
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};

use crate::aggregate::SeverityThresholds;
use crate::error::ConfigError;
use crate::estimator::{self, LinearModel};
use crate::gamify::BadgeRuleConfig;
use crate::store::DEFAULT_MAX_BLOB_BYTES;

pub const DEFAULT_TIPS: [&str; 4] = [
    "Consider your appetite before ordering.",
    "Choose the \"less rice\" option.",
    "Kindly ask the staff to give you less food.",
    "Bring a lunch box to pack excess food.",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CampaignConfig {
    pub prereg_start: NaiveDate,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    pub timezone: Tz,
    pub tips: Vec<String>,
    pub badge_rules: BadgeRuleConfig,
    pub severity_thresholds: SeverityThresholds,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        let d = |m, day| NaiveDate::from_ymd_opt(2023, m, day).expect("valid date");
        Self {
            prereg_start: d(3, 13),
            start_date: d(3, 20),
            end_date: d(4, 3),
            timezone: chrono_tz::Asia::Hong_Kong,
            tips: DEFAULT_TIPS.iter().map(|s| s.to_string()).collect(),
            badge_rules: BadgeRuleConfig::default(),
            severity_thresholds: SeverityThresholds::default(),
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.prereg_start <= self.start_date && self.start_date < self.end_date) {
            return Err(ConfigError::Invalid("campaign dates must satisfy prereg_start <= start_date < end_date".into()));
        }
        if self.tips.is_empty() {
            return Err(ConfigError::Invalid("campaign.tips must not be empty".into()));
        }
        self.badge_rules.validate().map_err(ConfigError::Invalid)?;
        if !self.severity_thresholds.is_valid() {
            return Err(ConfigError::Invalid("severity thresholds must satisfy 0 < medium_min_g < severe_min_g".into()));
        }
        Ok(())
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        (self.start_date..=self.end_date).contains(&date)
    }

    /// Date badges are evaluated at: `today`, capped at the campaign's last day.
    pub fn evaluation_date(&self, today: NaiveDate) -> NaiveDate {
        today.min(self.end_date)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StorageConfig {
    /// `None` keeps everything in memory.
    pub data_dir: Option<PathBuf>,
    pub max_photo_bytes: usize,
}

impl Default for StorageConfig {
    fn default() -> Self {
        Self { data_dir: Some(PathBuf::from("./foodwise-data")), max_photo_bytes: DEFAULT_MAX_BLOB_BYTES }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorConfig {
    /// CSV with header `area_px,weight_g`; fitted at startup when set.
    pub calibration_csv: Option<PathBuf>,
    pub slope: f64,
    pub intercept: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self { calibration_csv: None, slope: 0.1, intercept: 0.0 }
    }
}

impl EstimatorConfig {
    /// Relative calibration paths resolve against `base_dir`.
    pub fn load_model(&self, base_dir: &Path) -> Result<LinearModel, ConfigError> {
        let Some(csv_path) = &self.calibration_csv else {
            return Ok(LinearModel::from_coefficients(self.slope, self.intercept));
        };
        let path = base_dir.join(csv_path);
        let file = std::fs::File::open(&path).map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
        let samples = estimator::read_samples_csv(file).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        estimator::fit(&samples).map_err(|e| ConfigError::Invalid(format!("calibration {}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchedulerConfig {
    pub enabled: bool,
    /// Local campaign time at which the previous day is aggregated.
    pub run_at: NaiveTime,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self { enabled: true, run_at: NaiveTime::from_hms_opt(0, 10, 0).expect("valid time") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuthConfig {
    pub session_ttl_hours: i64,
    pub admin_emails: Vec<String>,
    /// Argon2id memory cost in KiB.
    pub password_memory_kib: u32,
    pub password_iterations: u32,
    pub min_password_len: usize,
}

impl Default for AuthConfig {
    fn default() -> Self {
        Self {
            session_ttl_hours: 24 * 7,
            admin_emails: Vec::new(),
            password_memory_kib: 19 * 1024,
            password_iterations: 2,
            min_password_len: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServerConfig {
    pub port: u16,
    pub recent_records: usize,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self { port: 8080, recent_records: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppConfig {
    #[serde(default)]
    pub campaign: CampaignConfig,
    #[serde(default)]
    pub storage: StorageConfig,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub scheduler: SchedulerConfig,
    #[serde(default)]
    pub auth: AuthConfig,
    #[serde(default)]
    pub server: ServerConfig,
}

pub const ENV_PORT: &str = "FOODWISE_PORT";
pub const ENV_DATA_DIR: &str = "FOODWISE_DATA_DIR";

impl AppConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: AppConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.campaign.validate()?;
        if self.storage.max_photo_bytes == 0 {
            return Err(ConfigError::Invalid("storage.max_photo_bytes must be positive".into()));
        }
        if self.auth.session_ttl_hours <= 0 {
            return Err(ConfigError::Invalid("auth.session_ttl_hours must be positive".into()));
        }
        Ok(())
    }

    /// Applies `FOODWISE_PORT` and `FOODWISE_DATA_DIR` from the given lookup.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(port) = lookup(ENV_PORT) {
            self.server.port = port
                .parse()
                .map_err(|_| ConfigError::Invalid(format!("{ENV_PORT}={port:?} is not a port number")))?;
        }
        if let Some(dir) = lookup(ENV_DATA_DIR) {
            self.storage.data_dir = Some(PathBuf::from(dir));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_campaign_calendar() {
        let c = CampaignConfig::default();
        c.validate().unwrap();
        assert_eq!(c.start_date.to_string(), "2023-03-20");
        assert_eq!(c.end_date.to_string(), "2023-04-03");
        assert_eq!(c.tips.len(), 4);
        assert_eq!(c.end_date.signed_duration_since(c.start_date).num_days() + 1, 15);
    }

    #[test]
    fn parses_full_file() {
        let text = r#"
            [campaign]
            prereg_start = "2023-03-13"
            start_date = "2023-03-20"
            end_date = "2023-04-03"
            timezone = "Asia/Hong_Kong"
            tips = ["a", "b"]

            [campaign.badge_rules]
            persistence_days = 3

            [campaign.severity_thresholds]
            medium_min_g = 40.0
            severe_min_g = 120.0

            [storage]
            max_photo_bytes = 1000

            [scheduler]
            run_at = "01:30:00"

            [auth]
            admin_emails = ["ops@example.org"]
        "#;
        let cfg = AppConfig::from_toml(text).unwrap();
        assert_eq!(cfg.campaign.badge_rules.persistence_days, 3);
        assert_eq!(cfg.campaign.badge_rules.quantity_records, 10);
        assert_eq!(cfg.campaign.severity_thresholds.severe_min_g, 120.0);
        assert_eq!(cfg.storage.max_photo_bytes, 1000);
        assert_eq!(cfg.scheduler.run_at, NaiveTime::from_hms_opt(1, 30, 0).unwrap());
        assert_eq!(cfg.campaign.tips, ["a", "b"]);
    }

    #[test]
    fn rejects_bad_values() {
        let bad_dates = "[campaign]\nprereg_start=\"2023-03-21\"\nstart_date=\"2023-03-20\"\nend_date=\"2023-04-03\"\ntimezone=\"UTC\"\ntips=[\"x\"]\n";
        assert!(matches!(AppConfig::from_toml(bad_dates), Err(ConfigError::Invalid(_))));
        let no_tips = "[campaign]\nprereg_start=\"2023-03-13\"\nstart_date=\"2023-03-20\"\nend_date=\"2023-04-03\"\ntimezone=\"UTC\"\ntips=[]\n";
        assert!(matches!(AppConfig::from_toml(no_tips), Err(ConfigError::Invalid(_))));
        assert!(matches!(AppConfig::from_toml("[campaign]\ntimezone=\"Mars/Base\""), Err(ConfigError::Parse(_))));
        assert!(matches!(AppConfig::from_toml("bogus = 1"), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn env_overrides() {
        let mut cfg = AppConfig::default();
        cfg.apply_env(|k| match k {
            ENV_PORT => Some("9999".into()),
            ENV_DATA_DIR => Some("/tmp/fw".into()),
            _ => None,
        })
        .unwrap();
        assert_eq!(cfg.server.port, 9999);
        assert_eq!(cfg.storage.data_dir, Some(PathBuf::from("/tmp/fw")));
        assert!(cfg.apply_env(|k| (k == ENV_PORT).then(|| "nope".into())).is_err());
    }

    #[test]
    fn evaluation_date_caps_at_end() {
        let c = CampaignConfig::default();
        let late = NaiveDate::from_ymd_opt(2023, 5, 1).unwrap();
        assert_eq!(c.evaluation_date(late), c.end_date);
        assert!(c.contains(c.start_date) && c.contains(c.end_date));
        assert!(!c.contains(c.prereg_start));
    }

    #[test]
    fn model_from_csv() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("cal.csv"), "area_px,weight_g\n0,1\n10,21\n").unwrap();
        let est = EstimatorConfig { calibration_csv: Some("cal.csv".into()), ..Default::default() };
        let m = est.load_model(dir.path()).unwrap();
        assert!((m.slope - 2.0).abs() < 1e-12 && (m.intercept - 1.0).abs() < 1e-12);
        let missing = EstimatorConfig { calibration_csv: Some("nope.csv".into()), ..Default::default() };
        assert!(missing.load_model(dir.path()).is_err());
    }
}
