//! Password hashing, server-side sessions and the request extractors that enforce them.

use std::sync::Arc;

use argon2::password_hash::{PasswordHash, PasswordHasher as _, PasswordVerifier, SaltString};
use argon2::{Algorithm, Argon2, Params, Version};
use axum::extract::FromRequestParts;
use axum::http::request::Parts;
use axum::http::header::AUTHORIZATION;
use chrono::{DateTime, Duration, Utc};
use foodwise_core::config::AuthConfig;
use foodwise_core::store::collections;
use foodwise_core::{User, UserId};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::state::AppState;

/// Argon2id with configurable cost.
#[derive(Clone)]
pub struct PasswordHasher {
    argon: Argon2<'static>,
    /// Verified against when the email is unknown so both failure paths cost the same.
    dummy_hash: Arc<str>,
}

impl PasswordHasher {
    pub fn new(cfg: &AuthConfig) -> Self {
        let params = Params::new(cfg.password_memory_kib.max(Params::MIN_M_COST), cfg.password_iterations.max(1), 1, None)
            .expect("argon2 params within bounds");
        let argon = Argon2::new(Algorithm::Argon2id, Version::V0x13, params);
        let salt = random_salt();
        let dummy_hash = argon
            .hash_password(b"dummy password for timing equalization", &salt)
            .expect("argon2 hashing with valid params")
            .to_string()
            .into();
        Self { argon, dummy_hash }
    }

    pub fn hash(&self, password: &str) -> String {
        let salt = random_salt();
        self.argon
            .hash_password(password.as_bytes(), &salt)
            .expect("argon2 hashing with valid params")
            .to_string()
    }

    pub fn verify(&self, password: &str, phc: &str) -> bool {
        PasswordHash::new(phc).is_ok_and(|h| self.argon.verify_password(password.as_bytes(), &h).is_ok())
    }

    pub fn burn(&self, password: &str) {
        let _ = self.verify(password, &self.dummy_hash);
    }
}

fn random_salt() -> SaltString {
    let mut bytes = [0u8; 16];
    rand::rng().fill_bytes(&mut bytes);
    SaltString::encode_b64(&bytes).expect("16-byte salt is within bounds")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Session {
    pub user_id: UserId,
    pub expires_at: DateTime<Utc>,
}

/// 128 random bits, hex-encoded.
pub fn new_token() -> String {
    let mut bytes = [0u8; 16];
    rand::rng().fill_bytes(&mut bytes);
    hex::encode(bytes)
}

pub fn create_session(state: &AppState, user_id: UserId) -> Result<(String, Session), ApiError> {
    let token = new_token();
    let session = Session { user_id, expires_at: state.clock.now() + Duration::hours(state.config.auth.session_ttl_hours) };
    state.store.insert_document(collections::SESSIONS, &token, &session)?;
    Ok((token, session))
}

fn bearer(parts: &Parts) -> Option<&str> {
    let value = parts.headers.get(AUTHORIZATION)?.to_str().ok()?;
    let (scheme, token) = value.split_once(' ')?;
    scheme.eq_ignore_ascii_case("bearer").then(|| token.trim()).filter(|t| !t.is_empty())
}

/// The authenticated caller.
#[derive(Debug, Clone)]
pub struct AuthUser {
    pub user: User,
}

impl AuthUser {
    pub fn id(&self) -> UserId {
        self.user.user_id
    }
}

impl FromRequestParts<AppState> for AuthUser {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, Self::Rejection> {
        let token = bearer(parts).ok_or(ApiError::Unauthorized)?;
        let session: Session = state.store.find_document(collections::SESSIONS, token)?.ok_or(ApiError::Unauthorized)?;
        if session.expires_at <= state.clock.now() {
            state.store.delete_document(collections::SESSIONS, token)?;
            return Err(ApiError::Unauthorized);
        }
        let user = state.store.find_document::<User>(collections::USERS, &session.user_id.to_string())?.ok_or(ApiError::Unauthorized)?;
        Ok(AuthUser { user })
    }
}

/// An authenticated caller whose email is listed in `auth.admin_emails`.
#[derive(Debug, Clone)]
pub struct AdminUser(pub AuthUser);

impl FromRequestParts<AppState> for AdminUser {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, Self::Rejection> {
        let user = AuthUser::from_request_parts(parts, state).await?;
        if state.is_admin(&user.user.email) {
            Ok(AdminUser(user))
        } else {
            Err(ApiError::Forbidden)
        }
    }
}
