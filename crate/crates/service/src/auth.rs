// Copyright (c) The Clearway Contributors
// SPDX-License-Identifier: Apache-2.0

//! Static bearer tokens.
//!
//! The token file is a JSON object keyed by token:
//!
//! ```json
//! { "s3cret": { "identity": "alice@example.com", "role": "reviewer" } }
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use axum::http::HeaderMap;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Developer,
    Reviewer,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Developer => "developer",
            Self::Reviewer => "reviewer",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Session {
    pub identity: String,
    pub role: Role,
}

#[derive(Clone, Default, PartialEq, Eq)]
pub struct Tokens(BTreeMap<String, Session>);

// Keeps tokens out of logs.
impl fmt::Debug for Tokens {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tokens").field("count", &self.0.len()).finish()
    }
}

impl Tokens {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, token: impl Into<String>, identity: impl Into<String>, role: Role) -> Self {
        self.0.insert(
            token.into(),
            Session {
                identity: identity.into(),
                role,
            },
        );
        self
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, String> {
        let map: BTreeMap<String, Session> = serde_json::from_slice(bytes).map_err(|e| e.to_string())?;
        if let Some((_, s)) = map.iter().find(|(t, s)| t.is_empty() || s.identity.trim().is_empty()) {
            return Err(format!("empty token or identity (identity `{}`)", s.identity));
        }
        Ok(Self(map))
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let bytes = std::fs::read(path).map_err(|e| format!("cannot read token file {}: {e}", path.display()))?;
        Self::from_json(&bytes).map_err(|e| format!("token file {}: {e}", path.display()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn authenticate(&self, headers: &HeaderMap) -> Option<&Session> {
        let value = headers.get(axum::http::header::AUTHORIZATION)?.to_str().ok()?;
        let (scheme, token) = value.split_once(' ')?;
        if !scheme.eq_ignore_ascii_case("bearer") {
            return None;
        }
        self.0.get(token.trim())
    }
}
