use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use chrono::NaiveDate;
use foodwise_core::config::AppConfig;
use foodwise_core::domain::{local_date, normalize_email};
use foodwise_core::{DailyJob, LinearModel, Store, UserId};

use crate::auth::PasswordHasher;
use crate::clock::{Clock, SystemClock};

/// Shared handler state. Cloning is cheap.
#[derive(Clone)]
pub struct AppState {
    pub store: Store,
    pub config: Arc<AppConfig>,
    pub job: Arc<DailyJob>,
    pub clock: Arc<dyn Clock>,
    pub hasher: PasswordHasher,
    user_locks: Arc<Mutex<HashMap<UserId, Arc<tokio::sync::Mutex<()>>>>>,
    admins: Arc<Vec<String>>,
}

impl AppState {
    pub fn new(config: AppConfig, store: Store, model: LinearModel) -> Self {
        Self::with_clock(config, store, model, Arc::new(SystemClock))
    }

    pub fn with_clock(config: AppConfig, store: Store, model: LinearModel, clock: Arc<dyn Clock>) -> Self {
        let job = Arc::new(DailyJob::new(store.clone(), model, config.campaign.severity_thresholds));
        let hasher = PasswordHasher::new(&config.auth);
        let admins = config.auth.admin_emails.iter().map(|e| normalize_email(e)).collect();
        Self {
            store,
            config: Arc::new(config),
            job,
            clock,
            hasher,
            user_locks: Arc::default(),
            admins: Arc::new(admins),
        }
    }

    pub fn is_admin(&self, email: &str) -> bool {
        self.admins.iter().any(|a| a == email)
    }

    pub fn today(&self) -> NaiveDate {
        local_date(self.clock.now(), self.config.campaign.timezone)
    }

    /// Per-user critical section around record submission and badge updates.
    pub fn user_lock(&self, user: UserId) -> Arc<tokio::sync::Mutex<()>> {
        let mut locks = self.user_locks.lock().unwrap_or_else(|e| e.into_inner());
        locks.entry(user).or_default().clone()
    }
}
