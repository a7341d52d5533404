// Copyright (c) The Clearway Contributors
// SPDX-License-Identifier: Apache-2.0

//! The optional TOML configuration file. Command-line flags and
//! `CLEARWAY_*` environment variables take precedence over it.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clearway_core::scanner::Corpus;
use clearway_enrichment::EnrichmentConfig;
use clearway_service::ServiceConfig;
use serde::Deserialize;

use crate::inputs::LockfileArg;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    /// Directory of `<LICENSE-ID>.txt` files used instead of the bundled corpus.
    pub corpus_dir: Option<PathBuf>,
    /// Contact line printed in the written source offer.
    pub contact: Option<String>,
    pub enrichment: Option<EnrichmentConfig>,
    pub service: Option<ServiceConfig>,
    /// Products the service can evaluate, in addition to `--manifest`.
    pub products: Vec<ProductEntry>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductEntry {
    pub id: String,
    pub manifest: PathBuf,
    #[serde(default)]
    pub lockfiles: Vec<String>,
    pub sbom_in: Option<PathBuf>,
}

impl ProductEntry {
    pub fn lockfile_args(&self) -> Result<Vec<LockfileArg>> {
        self.lockfiles
            .iter()
            .map(|l| l.parse().map_err(anyhow::Error::msg))
            .collect::<Result<_>>()
            .with_context(|| format!("product `{}`", self.id))
    }
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("config {}", path.display()))
    }
}

pub fn load_corpus(dir: Option<&Path>) -> Result<Corpus> {
    match dir {
        None => Ok(Corpus::bundled()),
        Some(d) => Corpus::load_dir(d).with_context(|| format!("license corpus {}", d.display())),
    }
}
