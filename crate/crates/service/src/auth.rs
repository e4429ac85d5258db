//! Static bearer tokens mapped to forum users.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use coursemate_core::forum::{CohortId, Role, UserId};

#[derive(Debug, thiserror::Error)]
pub enum TokenError {
    #[error("cannot read token file: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid token file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("token file: {0}")]
    Invalid(String),
}

/// One entry of the token file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenEntry {
    pub token: String,
    pub user_id: UserId,
    pub display_name: String,
    pub role: Role,
    pub cohort_id: CohortId,
}

#[derive(Debug, Clone, Default)]
pub struct TokenTable {
    entries: Vec<TokenEntry>,
    by_token: HashMap<String, UserId>,
}

impl TokenTable {
    pub fn new(entries: Vec<TokenEntry>) -> Result<Self, TokenError> {
        let mut by_token = HashMap::new();
        let mut users = HashMap::new();
        for e in &entries {
            if e.token.trim().is_empty() {
                return Err(TokenError::Invalid(format!("empty token for {}", e.user_id)));
            }
            if e.role == Role::Ai {
                return Err(TokenError::Invalid(format!("{} cannot use the AI role", e.user_id)));
            }
            if by_token.insert(e.token.clone(), e.user_id.clone()).is_some() {
                return Err(TokenError::Invalid(format!("token for {} is reused", e.user_id)));
            }
            if let Some(prev) = users.insert(e.user_id.clone(), e) {
                if prev != e && (prev.role != e.role || prev.cohort_id != e.cohort_id) {
                    return Err(TokenError::Invalid(format!("conflicting entries for {}", e.user_id)));
                }
            }
        }
        Ok(TokenTable { entries, by_token })
    }

    pub fn load(path: &Path) -> Result<Self, TokenError> {
        let entries: Vec<TokenEntry> = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        TokenTable::new(entries)
    }

    pub fn user_for(&self, token: &str) -> Option<&UserId> {
        self.by_token.get(token)
    }

    pub fn entries(&self) -> &[TokenEntry] {
        &self.entries
    }
}
