// Copyright (c) The Clearway Contributors
// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid coordinates `{0}`: expected <ecosystem>/<name>[@<version>]")]
pub struct CoordinatesError(pub String);

/// Where a component lives in some naming context: a package registry,
/// a distribution, or `generic`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Coordinates {
    pub ecosystem: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,
}

impl Coordinates {
    pub fn new(ecosystem: impl Into<String>, name: impl Into<String>) -> Self {
        Self {
            ecosystem: ecosystem.into(),
            name: name.into(),
            version: None,
        }
    }

    pub fn versioned(ecosystem: impl Into<String>, name: impl Into<String>, version: impl Into<String>) -> Self {
        Self {
            ecosystem: ecosystem.into(),
            name: name.into(),
            version: Some(version.into()),
        }
    }

    pub fn is_valid(&self) -> bool {
        !self.ecosystem.trim().is_empty()
            && !self.name.trim().is_empty()
            && self.version.as_deref().is_none_or(|v| !v.trim().is_empty())
    }

    /// The version-less part, which identifies a component rather than a release.
    pub fn unversioned(&self) -> Self {
        Self::new(self.ecosystem.clone(), self.name.clone())
    }

    /// `ecosystem/name/version`, the key used by knowledge-base fixtures.
    pub fn path_key(&self) -> String {
        format!(
            "{}/{}/{}",
            self.ecosystem,
            self.name,
            self.version.as_deref().unwrap_or("")
        )
    }
}

impl fmt::Display for Coordinates {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.ecosystem, self.name)?;
        if let Some(v) = &self.version {
            write!(f, "@{v}")?;
        }
        Ok(())
    }
}

impl FromStr for Coordinates {
    type Err = CoordinatesError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || CoordinatesError(s.to_string());
        let (ecosystem, rest) = s.split_once('/').ok_or_else(err)?;
        // A leading '@' belongs to the name (npm scopes).
        let (name, version) = match rest[1.min(rest.len())..].rfind('@') {
            Some(i) => (&rest[..i + 1], Some(rest[i + 2..].to_string())),
            None => (rest, None),
        };
        let coords = Coordinates {
            ecosystem: ecosystem.to_string(),
            name: name.to_string(),
            version,
        };
        coords.is_valid().then_some(coords).ok_or_else(err)
    }
}
