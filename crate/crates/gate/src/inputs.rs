// Copyright (c) The Clearway Contributors
// SPDX-License-Identifier: Apache-2.0

//! Loading and validating everything a gate run reads.

use std::fmt;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clearway_core::ingest::{
    import_spdx, parse_lockfile, DependencyGraph, ProductManifest, SpdxImport, LOCKFILE_FORMATS,
};
use clearway_core::inventory::{replay, Store};
use clearway_core::policy::{load_policy, PolicyDocument};

/// `--lockfile <format>:<path>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LockfileArg {
    pub format: String,
    pub path: PathBuf,
}

impl FromStr for LockfileArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (format, path) = s
            .split_once(':')
            .ok_or_else(|| format!("expected <format>:<path>, got `{s}`"))?;
        if !LOCKFILE_FORMATS.contains(&format) {
            return Err(format!(
                "unknown lockfile format `{format}` (known: {})",
                LOCKFILE_FORMATS.join(", ")
            ));
        }
        if path.is_empty() {
            return Err(format!("missing path in `{s}`"));
        }
        Ok(Self {
            format: format.to_string(),
            path: PathBuf::from(path),
        })
    }
}

impl fmt::Display for LockfileArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.format, self.path.display())
    }
}

/// Collects missing inputs so a run reports all of them at once, before
/// any work starts.
#[derive(Debug, Default)]
pub struct PathCheck {
    problems: Vec<String>,
}

impl PathCheck {
    pub fn file(&mut self, flag: &str, path: Option<&Path>) -> &mut Self {
        match path {
            None => self.problems.push(format!("{flag} is required")),
            Some(p) => self.existing_file(flag, p),
        }
        self
    }

    pub fn optional_file(&mut self, flag: &str, path: Option<&Path>) -> &mut Self {
        if let Some(p) = path {
            self.existing_file(flag, p);
        }
        self
    }

    pub fn optional_dir(&mut self, flag: &str, path: Option<&Path>) -> &mut Self {
        if let Some(p) = path {
            if !p.is_dir() {
                self.problems
                    .push(format!("{flag}: {} is not a directory", p.display()));
            }
        }
        self
    }

    /// The file may be missing, but its directory must exist.
    pub fn creatable(&mut self, flag: &str, path: Option<&Path>) -> &mut Self {
        match path {
            None => self.problems.push(format!("{flag} is required")),
            Some(p) if p.is_dir() => self.problems.push(format!("{flag}: {} is a directory", p.display())),
            Some(p) => {
                let parent = p
                    .parent()
                    .filter(|d| !d.as_os_str().is_empty())
                    .unwrap_or(Path::new("."));
                if !parent.is_dir() {
                    self.problems
                        .push(format!("{flag}: directory {} does not exist", parent.display()));
                }
            }
        }
        self
    }

    /// An output directory that exists or can be created.
    pub fn out_dir(&mut self, path: Option<&Path>) -> &mut Self {
        if let Some(p) = path {
            if p.exists() && !p.is_dir() {
                self.problems
                    .push(format!("--out-dir: {} exists and is not a directory", p.display()));
            }
        }
        self
    }

    pub fn lockfiles(&mut self, lockfiles: &[LockfileArg]) -> &mut Self {
        for l in lockfiles {
            self.existing_file("--lockfile", &l.path);
        }
        self
    }

    fn existing_file(&mut self, flag: &str, path: &Path) {
        if !path.is_file() {
            self.problems
                .push(format!("{flag}: {} does not exist or is not a file", path.display()));
        }
    }

    pub fn finish(&mut self) -> Result<()> {
        if self.problems.is_empty() {
            return Ok(());
        }
        bail!("invalid configuration:\n  {}", self.problems.join("\n  "))
    }
}

pub fn read_manifest(path: &Path) -> Result<ProductManifest> {
    let bytes = fs::read(path).with_context(|| format!("reading manifest {}", path.display()))?;
    ProductManifest::from_json(&bytes).with_context(|| format!("manifest {}", path.display()))
}

pub fn read_policy(path: &Path) -> Result<PolicyDocument> {
    let bytes = fs::read(path).with_context(|| format!("reading policy {}", path.display()))?;
    load_policy(&bytes).with_context(|| format!("policy {}", path.display()))
}

/// Replays the journal without opening it for writing.
pub fn read_store(path: &Path) -> Result<Store> {
    let file = File::open(path).with_context(|| format!("opening journal {}", path.display()))?;
    replay(BufReader::new(file)).with_context(|| format!("journal {}", path.display()))
}

/// The product's dependency graph, merged from every lockfile and SBOM,
/// with the manifest's root dependencies attached.
#[derive(Debug, Clone)]
pub struct ProductInputs {
    pub manifest: ProductManifest,
    pub graph: DependencyGraph,
    pub sbom: Option<SpdxImport>,
    pub warnings: Vec<String>,
}

pub fn load_product(manifest: &Path, lockfiles: &[LockfileArg], sbom_in: Option<&Path>) -> Result<ProductInputs> {
    let manifest = read_manifest(manifest)?;
    if lockfiles.is_empty() && sbom_in.is_none() && manifest.root_dependencies.is_empty() {
        bail!("no dependency information: pass --lockfile, --sbom-in or list root_dependencies in the manifest");
    }
    let mut graph = DependencyGraph::new();
    let mut warnings = Vec::new();
    for l in lockfiles {
        let bytes = fs::read(&l.path).with_context(|| format!("reading lockfile {}", l.path.display()))?;
        let g = parse_lockfile(&l.format, &bytes).with_context(|| format!("lockfile {l}"))?;
        graph.merge(g);
    }
    let sbom = match sbom_in {
        None => None,
        Some(path) => {
            let bytes = fs::read(path).with_context(|| format!("reading SBOM {}", path.display()))?;
            let import = import_spdx(&bytes).with_context(|| format!("SBOM {}", path.display()))?;
            warnings.extend(import.warnings.iter().map(|w| format!("{}: {w}", path.display())));
            graph.merge(import.to_graph());
            Some(import)
        }
    };
    manifest.apply_roots(&mut graph);
    Ok(ProductInputs {
        manifest,
        graph,
        sbom,
        warnings,
    })
}
