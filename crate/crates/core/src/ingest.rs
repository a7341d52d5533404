// Copyright (c) The Clearway Contributors
// SPDX-License-Identifier: Apache-2.0

//! Dependency graphs from lockfiles, product manifests and SPDX documents.
//!
//! Every lockfile adapter turns `(format, bytes)` into a [`NeutralLockfile`],
//! which is then checked and converted into a [`DependencyGraph`]. Edges from
//! the product root are `direct`; all other edges are `transitive`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, CONTROLS};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::coords::Coordinates;
use crate::expr::{canonicalize_case, parse_expression, LicenseExpression};
use crate::policy::Channel;

pub const NEUTRAL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IngestError {
    #[error("unknown lockfile format `{0}`")]
    UnknownFormat(String),
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> IngestError {
    IngestError::Schema {
        path: path.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Build,
    #[default]
    Runtime,
    Test,
}

impl Scope {
    pub const ALL: [Scope; 3] = [Scope::Build, Scope::Runtime, Scope::Test];
}

/// Scopes that take part in compliance evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScopeFilter(pub BTreeSet<Scope>);

impl ScopeFilter {
    pub fn all() -> Self {
        Self(Scope::ALL.into_iter().collect())
    }

    pub fn only(scopes: &[Scope]) -> Self {
        Self(scopes.iter().copied().collect())
    }

    pub fn includes(&self, scope: Scope) -> bool {
        self.0.contains(&scope)
    }
}

/// Build and runtime dependencies; test-only dependencies are not shipped.
impl Default for ScopeFilter {
    fn default() -> Self {
        Self::only(&[Scope::Build, Scope::Runtime])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Direct,
    Transitive,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    /// `None` is the product root.
    pub from: Option<Coordinates>,
    pub to: Coordinates,
    pub kind: EdgeKind,
    pub scope: Scope,
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.from {
            Some(from) => write!(f, "{from} -> {}", self.to),
            None => write!(f, "<product> -> {}", self.to),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyGraph {
    nodes: BTreeSet<Coordinates>,
    edges: BTreeSet<Edge>,
}

impl DependencyGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn nodes(&self) -> &BTreeSet<Coordinates> {
        &self.nodes
    }

    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains(&self, coords: &Coordinates) -> bool {
        self.nodes.contains(coords)
    }

    pub fn add_node(&mut self, coords: Coordinates) {
        self.nodes.insert(coords);
    }

    /// Adds an edge; both ends must already be nodes and self-edges are refused.
    pub fn add_edge(&mut self, from: Option<&Coordinates>, to: &Coordinates, scope: Scope) -> Result<(), String> {
        if !self.nodes.contains(to) {
            return Err(format!("edge target {to} is not a node"));
        }
        if let Some(from) = from {
            if !self.nodes.contains(from) {
                return Err(format!("edge source {from} is not a node"));
            }
            if from == to {
                return Err(format!("self-edge on {to}"));
            }
        }
        self.edges.insert(Edge {
            from: from.cloned(),
            to: to.clone(),
            kind: if from.is_some() {
                EdgeKind::Transitive
            } else {
                EdgeKind::Direct
            },
            scope,
        });
        Ok(())
    }

    pub fn merge(&mut self, other: DependencyGraph) {
        self.nodes.extend(other.nodes);
        self.edges.extend(other.edges);
    }

    /// Targets of edges from the product root.
    pub fn roots(&self) -> BTreeSet<&Coordinates> {
        self.edges.iter().filter(|e| e.from.is_none()).map(|e| &e.to).collect()
    }

    /// Everything reachable from the product root through `scopes`.
    pub fn product_closure(&self, scopes: &ScopeFilter) -> BTreeSet<Coordinates> {
        let roots: Vec<Coordinates> = self
            .edges
            .iter()
            .filter(|e| e.from.is_none() && scopes.includes(e.scope))
            .map(|e| e.to.clone())
            .collect();
        resolve_transitive(self, &roots, scopes)
    }

    /// Keeps only `keep` nodes and edges between them (plus root edges into them).
    pub fn restricted_to(&self, keep: &BTreeSet<Coordinates>, scopes: &ScopeFilter) -> Self {
        Self {
            nodes: self.nodes.intersection(keep).cloned().collect(),
            edges: self
                .edges
                .iter()
                .filter(|e| scopes.includes(e.scope))
                .filter(|e| keep.contains(&e.to))
                .filter(|e| e.from.as_ref().is_none_or(|f| keep.contains(f)))
                .cloned()
                .collect(),
        }
    }
}

/// Nodes reachable from `roots` following edges whose scope is in `scopes`.
/// Roots are always part of the result; cycles are fine.
pub fn resolve_transitive(
    graph: &DependencyGraph,
    roots: &[Coordinates],
    scopes: &ScopeFilter,
) -> BTreeSet<Coordinates> {
    let mut adjacency: BTreeMap<&Coordinates, Vec<&Coordinates>> = BTreeMap::new();
    for edge in &graph.edges {
        if let (Some(from), true) = (&edge.from, scopes.includes(edge.scope)) {
            adjacency.entry(from).or_default().push(&edge.to);
        }
    }
    let mut seen: BTreeSet<Coordinates> = roots.iter().cloned().collect();
    let mut queue: VecDeque<&Coordinates> = roots.iter().collect();
    while let Some(node) = queue.pop_front() {
        for next in adjacency.get(node).into_iter().flatten() {
            if seen.insert((*next).clone()) {
                queue.push_back(next);
            }
        }
    }
    seen
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductManifest {
    pub product_name: String,
    pub product_version: String,
    pub channel: Channel,
    #[serde(default)]
    pub root_dependencies: Vec<Coordinates>,
}

impl ProductManifest {
    pub fn from_json(bytes: &[u8]) -> Result<Self, IngestError> {
        let de = &mut serde_json::Deserializer::from_slice(bytes);
        let manifest: Self =
            serde_path_to_error::deserialize(de).map_err(|e| schema(e.path().to_string(), e.inner().to_string()))?;
        if manifest.product_name.trim().is_empty() {
            return Err(schema("product_name", "must not be empty"));
        }
        if manifest.product_version.trim().is_empty() {
            return Err(schema("product_version", "must not be empty"));
        }
        for (i, c) in manifest.root_dependencies.iter().enumerate() {
            if !c.is_valid() || c.version.is_none() {
                return Err(schema(
                    format!("root_dependencies[{i}]"),
                    "needs ecosystem, name and version",
                ));
            }
        }
        Ok(manifest)
    }

    /// Adds the manifest's declared roots to `graph` as direct dependencies.
    pub fn apply_roots(&self, graph: &mut DependencyGraph) {
        for root in &self.root_dependencies {
            graph.add_node(root.clone());
            graph
                .add_edge(None, root, Scope::Runtime)
                .expect("root edge to a present node");
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeutralPackage {
    pub ecosystem: String,
    pub name: String,
    pub version: String,
    #[serde(default)]
    pub deps: Vec<usize>,
    #[serde(default)]
    pub scope: Scope,
}

impl NeutralPackage {
    pub fn coords(&self) -> Coordinates {
        Coordinates::versioned(self.ecosystem.clone(), self.name.clone(), self.version.clone())
    }
}

/// The ecosystem-independent lockfile every adapter produces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeutralLockfile {
    #[serde(default = "neutral_version")]
    pub schema_version: u32,
    pub roots: Vec<Coordinates>,
    pub packages: Vec<NeutralPackage>,
}

fn neutral_version() -> u32 {
    NEUTRAL_SCHEMA_VERSION
}

impl NeutralLockfile {
    pub fn into_graph(self) -> Result<DependencyGraph, IngestError> {
        if self.schema_version != NEUTRAL_SCHEMA_VERSION {
            return Err(schema(
                "schema_version",
                format!("unsupported version {}", self.schema_version),
            ));
        }
        let mut graph = DependencyGraph::new();
        let coords: Vec<Coordinates> = self.packages.iter().map(NeutralPackage::coords).collect();
        for (i, c) in coords.iter().enumerate() {
            if !c.is_valid() {
                return Err(schema(
                    format!("packages[{i}]"),
                    "ecosystem, name and version are required",
                ));
            }
            graph.add_node(c.clone());
        }
        for (i, package) in self.packages.iter().enumerate() {
            for (j, &dep) in package.deps.iter().enumerate() {
                let path = format!("packages[{i}].deps[{j}]");
                let target = coords
                    .get(dep)
                    .ok_or_else(|| schema(&path, format!("index {dep} out of range")))?;
                graph
                    .add_edge(Some(&coords[i]), target, self.packages[dep].scope)
                    .map_err(|m| schema(&path, m))?;
            }
        }
        for (i, root) in self.roots.iter().enumerate() {
            let idx = coords
                .iter()
                .position(|c| c == root)
                .ok_or_else(|| schema(format!("roots[{i}]"), format!("{root} is not a listed package")))?;
            graph
                .add_edge(None, root, self.packages[idx].scope)
                .map_err(|m| schema(format!("roots[{i}]"), m))?;
        }
        Ok(graph)
    }
}

/// Converts one lockfile format into the neutral structure.
pub trait LockfileAdapter {
    fn format(&self) -> &'static str;
    fn to_neutral(&self, bytes: &[u8]) -> Result<NeutralLockfile, IngestError>;
}

pub struct NeutralAdapter;

impl LockfileAdapter for NeutralAdapter {
    fn format(&self) -> &'static str {
        "neutral"
    }

    fn to_neutral(&self, bytes: &[u8]) -> Result<NeutralLockfile, IngestError> {
        let de = &mut serde_json::Deserializer::from_slice(bytes);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            schema(if path == "." { "$".into() } else { path }, e.inner().to_string())
        })
    }
}

/// `Cargo.lock` (versions 1 through 4). Packages without a `source` are
/// workspace members: they form the product, and their dependencies become
/// the roots. Cargo.lock does not record dev or build kinds, so every edge
/// is `runtime`.
pub struct CargoLockAdapter;

#[derive(Deserialize)]
struct CargoLock {
    #[serde(default, rename = "package")]
    packages: Vec<CargoPackage>,
}

#[derive(Deserialize)]
struct CargoPackage {
    name: String,
    version: String,
    source: Option<String>,
    #[serde(default)]
    dependencies: Vec<String>,
}

impl LockfileAdapter for CargoLockAdapter {
    fn format(&self) -> &'static str {
        "cargo"
    }

    fn to_neutral(&self, bytes: &[u8]) -> Result<NeutralLockfile, IngestError> {
        let text = std::str::from_utf8(bytes).map_err(|e| schema("$", e.to_string()))?;
        let lock: CargoLock = toml::from_str(text).map_err(|e| schema("$", e.to_string()))?;

        let resolve = |spec: &str, path: &str| -> Result<usize, IngestError> {
            let mut parts = spec.split_whitespace();
            let name = parts.next().unwrap_or_default();
            let version = parts.next();
            let source = parts.next().map(|s| s.trim_start_matches('(').trim_end_matches(')'));
            let matches: Vec<usize> = lock
                .packages
                .iter()
                .enumerate()
                .filter(|(_, p)| p.name == name)
                .filter(|(_, p)| version.is_none_or(|v| p.version == v))
                .filter(|(_, p)| source.is_none_or(|s| p.source.as_deref() == Some(s)))
                .map(|(i, _)| i)
                .collect();
            match matches.as_slice() {
                [one] => Ok(*one),
                [] => Err(schema(path, format!("dependency `{spec}` not found"))),
                _ => Err(schema(path, format!("dependency `{spec}` is ambiguous"))),
            }
        };

        let is_member = |i: usize| lock.packages[i].source.is_none();
        // Neutral indices only cover non-member packages.
        let mut index = BTreeMap::new();
        let mut packages = Vec::new();
        for (i, p) in lock.packages.iter().enumerate() {
            if !is_member(i) {
                index.insert(i, packages.len());
                packages.push(NeutralPackage {
                    ecosystem: "cargo".into(),
                    name: p.name.clone(),
                    version: p.version.clone(),
                    deps: Vec::new(),
                    scope: Scope::Runtime,
                });
            }
        }
        let mut roots = BTreeSet::new();
        for (i, p) in lock.packages.iter().enumerate() {
            for (j, spec) in p.dependencies.iter().enumerate() {
                let target = resolve(spec, &format!("package[{i}].dependencies[{j}]"))?;
                if is_member(target) {
                    continue;
                }
                if is_member(i) {
                    roots.insert(index[&target]);
                } else {
                    packages[index[&i]].deps.push(index[&target]);
                }
            }
        }
        Ok(NeutralLockfile {
            schema_version: NEUTRAL_SCHEMA_VERSION,
            roots: roots.into_iter().map(|i| packages[i].coords()).collect(),
            packages,
        })
    }
}

pub fn adapter_for(format: &str) -> Result<Box<dyn LockfileAdapter>, IngestError> {
    match format {
        "neutral" => Ok(Box::new(NeutralAdapter)),
        "cargo" | "cargo-lock" => Ok(Box::new(CargoLockAdapter)),
        other => Err(IngestError::UnknownFormat(other.to_string())),
    }
}

pub const LOCKFILE_FORMATS: &[&str] = &["neutral", "cargo"];

pub fn parse_lockfile(format: &str, bytes: &[u8]) -> Result<DependencyGraph, IngestError> {
    adapter_for(format)?.to_neutral(bytes)?.into_graph()
}

const PURL_ENCODE: &AsciiSet = &CONTROLS
    .add(b' ')
    .add(b'"')
    .add(b'#')
    .add(b'%')
    .add(b'/')
    .add(b':')
    .add(b'?')
    .add(b'@')
    .add(b'<')
    .add(b'>');

/// `pkg:<ecosystem>/<name>@<version>` with the name kept in one segment.
pub fn purl_for(coords: &Coordinates) -> String {
    let mut purl = format!(
        "pkg:{}/{}",
        coords.ecosystem,
        utf8_percent_encode(&coords.name, PURL_ENCODE)
    );
    if let Some(v) = &coords.version {
        purl.push('@');
        purl.push_str(&utf8_percent_encode(v, PURL_ENCODE).to_string());
    }
    purl
}

/// Ecosystem (the purl type) plus the decoded name and version.
pub fn parse_purl(purl: &str) -> Option<(String, String, Option<String>)> {
    let rest = purl.strip_prefix("pkg:")?;
    let rest = rest.split(['?', '#']).next()?;
    let (ecosystem, path) = rest.split_once('/')?;
    let (path, version) = match path.rsplit_once('@') {
        Some((p, v)) => (p, Some(percent_decode_str(v).decode_utf8().ok()?.into_owned())),
        None => (path, None),
    };
    let segments: Vec<String> = path
        .split('/')
        .filter(|s| !s.is_empty())
        .map(|s| percent_decode_str(s).decode_utf8().map(|c| c.into_owned()))
        .collect::<Result<_, _>>()
        .ok()?;
    if ecosystem.is_empty() || segments.is_empty() {
        return None;
    }
    let joiner = if ecosystem == "maven" { ":" } else { "/" };
    Some((ecosystem.to_string(), segments.join(joiner), version))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportedPackage {
    pub spdx_id: String,
    pub coords: Coordinates,
    pub declared: Option<LicenseExpression>,
    pub concluded: Option<LicenseExpression>,
    pub source_url: Option<String>,
    pub copyright: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SpdxImport {
    pub components: Vec<ImportedPackage>,
    /// `(from, to)`; `from = None` is the document (product) itself.
    pub edges: Vec<(Option<Coordinates>, Coordinates)>,
    pub warnings: Vec<String>,
}

impl SpdxImport {
    pub fn to_graph(&self) -> DependencyGraph {
        let mut graph = DependencyGraph::new();
        for c in &self.components {
            graph.add_node(c.coords.clone());
        }
        for (from, to) in &self.edges {
            // Self-edges were rejected during import; anything else is present.
            let _ = graph.add_edge(from.as_ref(), to, Scope::Runtime);
        }
        if graph.roots().is_empty() {
            // No document-level relationships: packages nobody depends on are roots.
            let targets: BTreeSet<&Coordinates> = self.edges.iter().map(|(_, to)| to).collect();
            let roots: Vec<Coordinates> = graph.nodes().iter().filter(|n| !targets.contains(n)).cloned().collect();
            for r in roots {
                let _ = graph.add_edge(None, &r, Scope::Runtime);
            }
        }
        graph
    }
}

fn str_field<'a>(obj: &'a Value, key: &str, path: &str) -> Result<&'a str, IngestError> {
    obj.get(key)
        .ok_or_else(|| schema(format!("{path}.{key}"), "required field missing"))?
        .as_str()
        .ok_or_else(|| schema(format!("{path}.{key}"), "expected a string"))
}

fn opt_str<'a>(obj: &'a Value, key: &str, path: &str) -> Result<Option<&'a str>, IngestError> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(_) => Err(schema(format!("{path}.{key}"), "expected a string")),
    }
}

fn assertion(value: Option<&str>) -> Option<&str> {
    value.filter(|v| !matches!(v.trim(), "" | "NOASSERTION" | "NONE"))
}

/// Reads the SPDX 2.3 JSON subset this crate also writes.
pub fn import_spdx(bytes: &[u8]) -> Result<SpdxImport, IngestError> {
    let doc: Value = serde_json::from_slice(bytes).map_err(|e| schema("$", e.to_string()))?;
    if !doc.is_object() {
        return Err(schema("$", "expected a JSON object"));
    }
    let version = str_field(&doc, "spdxVersion", "$")?;
    if !version.starts_with("SPDX-2.") {
        return Err(schema("$.spdxVersion", format!("unsupported version {version}")));
    }
    let document_id = str_field(&doc, "SPDXID", "$")?.to_string();

    let mut out = SpdxImport::default();
    let mut by_id: BTreeMap<String, Coordinates> = BTreeMap::new();
    let packages = match doc.get("packages") {
        None => &[][..],
        Some(Value::Array(items)) => items.as_slice(),
        Some(_) => return Err(schema("$.packages", "expected an array")),
    };
    for (i, pkg) in packages.iter().enumerate() {
        let path = format!("$.packages[{i}]");
        let spdx_id = str_field(pkg, "SPDXID", &path)?.to_string();
        let name = str_field(pkg, "name", &path)?.to_string();
        let mut version = opt_str(pkg, "versionInfo", &path)?.map(str::to_string);
        let mut ecosystem = "generic".to_string();
        if let Some(Value::Array(refs)) = pkg.get("externalRefs") {
            let purl = refs.iter().find_map(|r| {
                (r.get("referenceType")?.as_str()? == "purl")
                    .then(|| r.get("referenceLocator")?.as_str())
                    .flatten()
            });
            if let Some((eco, _, purl_version)) = purl.and_then(parse_purl) {
                ecosystem = eco;
                version = version.or(purl_version);
            }
        }
        let coords = Coordinates {
            ecosystem,
            name,
            version,
        };
        if !coords.is_valid() {
            return Err(schema(path, "package needs a non-empty name"));
        }

        let mut license = |key: &str| -> Result<Option<LicenseExpression>, IngestError> {
            let Some(text) = assertion(opt_str(pkg, key, &path)?) else {
                return Ok(None);
            };
            match parse_expression(text) {
                Ok(expr) => {
                    let (expr, case) = canonicalize_case(&expr);
                    out.warnings
                        .extend(case.into_iter().map(|w| format!("{path}.{key}: {w}")));
                    Ok(Some(expr))
                }
                Err(err) => {
                    out.warnings
                        .push(format!("{path}.{key}: unparseable expression `{text}`: {err}"));
                    Ok(None)
                }
            }
        };
        let declared = license("licenseDeclared")?;
        let concluded = license("licenseConcluded")?;
        let source_url = assertion(opt_str(pkg, "downloadLocation", &path)?).map(str::to_string);
        let copyright = assertion(opt_str(pkg, "copyrightText", &path)?).map(str::to_string);

        if by_id.insert(spdx_id.clone(), coords.clone()).is_some() {
            return Err(schema(format!("{path}.SPDXID"), format!("duplicate id {spdx_id}")));
        }
        out.components.push(ImportedPackage {
            spdx_id,
            coords,
            declared,
            concluded,
            source_url,
            copyright,
        });
    }

    let relationships = match doc.get("relationships") {
        None => &[][..],
        Some(Value::Array(items)) => items.as_slice(),
        Some(_) => return Err(schema("$.relationships", "expected an array")),
    };
    let resolve = |id: &str, path: String| -> Result<Option<Coordinates>, IngestError> {
        if id == document_id {
            return Ok(None);
        }
        by_id
            .get(id)
            .cloned()
            .map(Some)
            .ok_or_else(|| schema(path, format!("unknown element {id}")))
    };
    for (i, rel) in relationships.iter().enumerate() {
        let path = format!("$.relationships[{i}]");
        let element = str_field(rel, "spdxElementId", &path)?;
        let kind = str_field(rel, "relationshipType", &path)?;
        let related = str_field(rel, "relatedSpdxElement", &path)?;
        let (from, to, to_path) = match kind {
            "DEPENDS_ON" => (element, related, format!("{path}.relatedSpdxElement")),
            "DEPENDENCY_OF" => (related, element, format!("{path}.spdxElementId")),
            "DESCRIBES" if element == document_id => (element, related, format!("{path}.relatedSpdxElement")),
            _ => continue,
        };
        let from = resolve(from, format!("{path}.spdxElementId"))?;
        let Some(to) = resolve(to, to_path.clone())? else {
            return Err(schema(to_path, "the document cannot be a dependency"));
        };
        if from.as_ref() == Some(&to) {
            return Err(schema(path, format!("self-dependency on {to}")));
        }
        out.edges.push((from, to));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(name: &str) -> Coordinates {
        Coordinates::versioned("npm", name, "1.0.0")
    }

    fn neutral(json: &str) -> Result<DependencyGraph, IngestError> {
        parse_lockfile("neutral", json.as_bytes())
    }

    #[test]
    fn single_root() {
        let g = neutral(
            r#"{"schema_version":1,"roots":[{"ecosystem":"npm","name":"a","version":"1.0.0"}],
                "packages":[{"ecosystem":"npm","name":"a","version":"1.0.0"}]}"#,
        )
        .unwrap();
        assert_eq!(g.nodes().len(), 1);
        assert_eq!(g.edge_count(), 1);
        let edge = g.edges().next().unwrap();
        assert_eq!(edge.kind, EdgeKind::Direct);
        assert_eq!(edge.from, None);
    }

    #[test]
    fn self_dependency_is_a_schema_error() {
        let err = neutral(
            r#"{"roots":[{"ecosystem":"npm","name":"a","version":"1.0.0"}],
                "packages":[{"ecosystem":"npm","name":"a","version":"1.0.0","deps":[0]}]}"#,
        )
        .unwrap_err();
        assert!(
            matches!(err, IngestError::Schema { ref path, .. } if path == "packages[0].deps[0]"),
            "{err}"
        );
    }

    #[test]
    fn diamond_collapses_shared_node() {
        let g = neutral(
            r#"{"roots":[{"ecosystem":"npm","name":"a","version":"1.0.0"}],
                "packages":[
                  {"ecosystem":"npm","name":"a","version":"1.0.0","deps":[1,2]},
                  {"ecosystem":"npm","name":"b","version":"1.0.0","deps":[3]},
                  {"ecosystem":"npm","name":"c","version":"1.0.0","deps":[3]},
                  {"ecosystem":"npm","name":"d","version":"1.0.0"}]}"#,
        )
        .unwrap();
        assert_eq!(g.nodes().len(), 4);
        let between: Vec<_> = g.edges().filter(|e| e.from.is_some()).collect();
        assert_eq!(between.len(), 4);
        assert!(between.iter().all(|e| e.kind == EdgeKind::Transitive));
        assert_eq!(g.edges().filter(|e| e.from.is_none()).count(), 1);
        assert_eq!(g.product_closure(&ScopeFilter::default()).len(), 4);
    }

    #[test]
    fn neutral_errors() {
        assert!(matches!(
            parse_lockfile("yarn", b"{}"),
            Err(IngestError::UnknownFormat(_))
        ));
        assert!(matches!(neutral("{"), Err(IngestError::Schema { .. })));
        assert!(matches!(
            neutral(r#"{"roots":[],"packages":[{"ecosystem":"npm","name":"a","version":"1","deps":[7]}]}"#),
            Err(IngestError::Schema { .. })
        ));
        assert!(matches!(
            neutral(r#"{"roots":[{"ecosystem":"npm","name":"zz","version":"1"}],"packages":[]}"#),
            Err(IngestError::Schema { ref path, .. }) if path == "roots[0]"
        ));
        assert!(matches!(
            neutral(r#"{"roots":[],"packages":[],"extra":1}"#),
            Err(IngestError::Schema { .. })
        ));
        assert!(matches!(
            neutral(r#"{"schema_version":2,"roots":[],"packages":[]}"#),
            Err(IngestError::Schema { ref path, .. }) if path == "schema_version"
        ));
    }

    #[test]
    fn closure_edges_cases() {
        let mut g = DependencyGraph::new();
        for n in ["a", "b", "c"] {
            g.add_node(c(n));
        }
        let scopes = ScopeFilter::default();
        assert_eq!(
            resolve_transitive(&g, &[c("a"), c("b")], &scopes),
            BTreeSet::from([c("a"), c("b")])
        );
        g.add_edge(Some(&c("a")), &c("b"), Scope::Runtime).unwrap();
        g.add_edge(Some(&c("b")), &c("a"), Scope::Runtime).unwrap();
        assert_eq!(
            resolve_transitive(&g, &[c("a")], &scopes),
            BTreeSet::from([c("a"), c("b")])
        );
        assert!(g.add_edge(Some(&c("a")), &c("a"), Scope::Runtime).is_err());
        assert!(g.add_edge(None, &c("zzz"), Scope::Runtime).is_err());
    }

    #[test]
    fn test_scope_is_excluded_by_default() {
        let g = neutral(
            r#"{"roots":[{"ecosystem":"npm","name":"a","version":"1"},{"ecosystem":"npm","name":"jest","version":"29"}],
                "packages":[
                  {"ecosystem":"npm","name":"a","version":"1","deps":[2]},
                  {"ecosystem":"npm","name":"jest","version":"29","deps":[2],"scope":"test"},
                  {"ecosystem":"npm","name":"shared","version":"1"},
                  {"ecosystem":"npm","name":"mock","version":"1","scope":"test"}]}"#,
        )
        .unwrap();
        let runtime = g.product_closure(&ScopeFilter::default());
        let names: Vec<&str> = runtime.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["a", "shared"]);
        assert_eq!(g.product_closure(&ScopeFilter::all()).len(), 3);
    }

    #[test]
    fn cargo_lock_adapter() {
        let lock = r#"
version = 3

[[package]]
name = "app"
version = "0.1.0"
dependencies = ["serde", "util"]

[[package]]
name = "util"
version = "0.1.0"
dependencies = ["itoa 1.0.0"]

[[package]]
name = "serde"
version = "1.0.200"
source = "registry+https://github.com/rust-lang/crates.io-index"
dependencies = ["serde_derive"]

[[package]]
name = "serde_derive"
version = "1.0.200"
source = "registry+https://github.com/rust-lang/crates.io-index"

[[package]]
name = "itoa"
version = "1.0.0"
source = "registry+https://github.com/rust-lang/crates.io-index"
"#;
        let g = parse_lockfile("cargo", lock.as_bytes()).unwrap();
        let nodes: Vec<String> = g.nodes().iter().map(ToString::to_string).collect();
        assert_eq!(
            nodes,
            ["cargo/itoa@1.0.0", "cargo/serde@1.0.200", "cargo/serde_derive@1.0.200"]
        );
        let roots: Vec<String> = g.roots().iter().map(|c| c.name.clone()).collect();
        assert_eq!(roots, ["itoa", "serde"]);
        assert_eq!(g.edge_count(), 3);
        assert!(matches!(
            parse_lockfile("cargo", b"[[package]]\nname='a'\nversion='1'\ndependencies=['nope']\n"),
            Err(IngestError::Schema { .. })
        ));
    }

    #[test]
    fn purl_round_trip() {
        for coords in [
            Coordinates::versioned("npm", "@scope/pkg", "1.0.0"),
            Coordinates::versioned("maven", "org.acme:lib", "2.1"),
            Coordinates::versioned("generic", "weird name@x", "1.0+build"),
            Coordinates::new("cargo", "serde"),
        ] {
            let purl = purl_for(&coords);
            let (eco, name, version) = parse_purl(&purl).unwrap();
            assert_eq!(
                Coordinates {
                    ecosystem: eco,
                    name,
                    version
                },
                coords,
                "{purl}"
            );
        }
        assert_eq!(
            parse_purl("pkg:maven/org.acme/lib@1.0?type=jar"),
            Some(("maven".into(), "org.acme:lib".into(), Some("1.0".into())))
        );
        assert_eq!(parse_purl("not-a-purl"), None);
    }

    fn spdx(packages: &str, relationships: &str) -> String {
        format!(
            r#"{{"spdxVersion":"SPDX-2.3","SPDXID":"SPDXRef-DOCUMENT","name":"x",
                "packages":[{packages}],"relationships":[{relationships}]}}"#
        )
    }

    #[test]
    fn spdx_single_package() {
        let doc = spdx(
            r#"{"SPDXID":"SPDXRef-Package-0","name":"left-pad","versionInfo":"1.3.0","licenseDeclared":"MIT","downloadLocation":"NOASSERTION"}"#,
            "",
        );
        let imported = import_spdx(doc.as_bytes()).unwrap();
        assert_eq!(imported.components.len(), 1);
        assert!(imported.edges.is_empty());
        let pkg = &imported.components[0];
        assert_eq!(pkg.coords, Coordinates::versioned("generic", "left-pad", "1.3.0"));
        assert_eq!(pkg.declared.as_ref().unwrap().to_string(), "MIT");
        assert_eq!(pkg.source_url, None);
    }

    #[test]
    fn spdx_noassertion_and_bad_expressions() {
        let doc = spdx(
            r#"{"SPDXID":"SPDXRef-a","name":"a","licenseDeclared":"NOASSERTION"},
               {"SPDXID":"SPDXRef-b","name":"b","licenseDeclared":"MIT AND"}"#,
            "",
        );
        let imported = import_spdx(doc.as_bytes()).unwrap();
        assert!(imported.components.iter().all(|c| c.declared.is_none()));
        assert_eq!(imported.warnings.len(), 1);
    }

    #[test]
    fn spdx_chain_and_closure() {
        let doc = spdx(
            r#"{"SPDXID":"SPDXRef-A","name":"A","versionInfo":"1"},
               {"SPDXID":"SPDXRef-B","name":"B","versionInfo":"1"},
               {"SPDXID":"SPDXRef-C","name":"C","versionInfo":"1"}"#,
            r#"{"spdxElementId":"SPDXRef-A","relationshipType":"DEPENDS_ON","relatedSpdxElement":"SPDXRef-B"},
               {"spdxElementId":"SPDXRef-B","relationshipType":"DEPENDS_ON","relatedSpdxElement":"SPDXRef-C"}"#,
        );
        let imported = import_spdx(doc.as_bytes()).unwrap();
        assert_eq!(imported.edges.len(), 2);
        let g = imported.to_graph();
        let a = Coordinates::versioned("generic", "A", "1");
        let closure = resolve_transitive(&g, std::slice::from_ref(&a), &ScopeFilter::default());
        let mut without_root = closure.clone();
        without_root.remove(&a);
        let names: Vec<&str> = without_root.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["B", "C"]);
        // Without document relationships, A is inferred as the only root.
        assert_eq!(g.roots().into_iter().cloned().collect::<Vec<_>>(), vec![a]);
    }

    #[test]
    fn spdx_schema_errors() {
        let missing_name = spdx(r#"{"SPDXID":"SPDXRef-a"}"#, "");
        assert!(matches!(
            import_spdx(missing_name.as_bytes()),
            Err(IngestError::Schema { ref path, .. }) if path == "$.packages[0].name"
        ));
        let dangling = spdx(
            r#"{"SPDXID":"SPDXRef-a","name":"a"}"#,
            r#"{"spdxElementId":"SPDXRef-a","relationshipType":"DEPENDS_ON","relatedSpdxElement":"SPDXRef-zz"}"#,
        );
        assert!(matches!(
            import_spdx(dangling.as_bytes()),
            Err(IngestError::Schema { ref path, .. }) if path == "$.relationships[0].relatedSpdxElement"
        ));
        assert!(import_spdx(br#"{"SPDXID":"SPDXRef-DOCUMENT"}"#).is_err());
        assert!(import_spdx(b"[]").is_err());
    }

    #[test]
    fn manifest_validation() {
        let m = ProductManifest::from_json(
            br#"{"product_name":"shop","product_version":"1.0","channel":"distributed_binary"}"#,
        )
        .unwrap();
        assert_eq!(m.channel, Channel::DistributedBinary);
        assert!(
            ProductManifest::from_json(br#"{"product_name":"","product_version":"1.0","channel":"saas"}"#).is_err()
        );
        assert!(ProductManifest::from_json(
            br#"{"product_name":"a","product_version":"1.0","channel":"carrier_pigeon"}"#
        )
        .is_err());
    }
}
