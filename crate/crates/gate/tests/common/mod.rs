// Copyright (c) The Clearway Contributors
// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use clearway_core::inventory::{DecisionInput, DecisionVerdict, Inventory, ManualClock};
use clearway_core::{Coordinates, LicenseExpression};
use serde_json::Value;

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

pub fn shop(file: &str) -> String {
    fixture("shop").join(file).display().to_string()
}

pub fn schema(name: &str) -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../docs/schemas")
        .join(name);
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

pub fn schema_errors(schema: &Value, instance: &Value) -> Vec<String> {
    let validator = jsonschema::validator_for(schema).unwrap();
    validator
        .iter_errors(instance)
        .map(|e| format!("{e} at {}", e.instance_path))
        .collect()
}

pub fn frozen_now() -> DateTime<Utc> {
    "2026-10-15T12:00:00Z".parse().unwrap()
}

pub const TIMESTAMP: &str = "2026-10-15T12:00:00Z";

/// `coords -> expression` for every package in the shop lockfile.
pub fn shop_licenses() -> BTreeMap<Coordinates, String> {
    let raw: BTreeMap<String, String> =
        serde_json::from_str(&std::fs::read_to_string(shop("licenses.json")).unwrap()).unwrap();
    raw.into_iter().map(|(k, v)| (k.parse().unwrap(), v)).collect()
}

pub fn reviewer(verdict: DecisionVerdict) -> DecisionInput {
    DecisionInput {
        reviewer: "ospo@example.org".into(),
        role: "reviewer".into(),
        verdict,
        rationale: "reviewed against scan".into(),
        policy_version: "2026.10".into(),
    }
}

pub fn open(journal: &Path) -> Inventory {
    Inventory::open(journal, Arc::new(ManualClock::new(frozen_now()))).unwrap()
}

/// Registers each entry with its declared license and takes it through
/// review to CLEARED.
pub fn clear_all<'a>(inv: &mut Inventory, entries: impl IntoIterator<Item = (&'a Coordinates, &'a str)>) {
    for (coords, expr) in entries {
        let release = inv.register_component(coords, None).unwrap().release_id.unwrap();
        inv.set_declared_license(release, LicenseExpression::parse(expr).unwrap(), "fixture")
            .unwrap();
        inv.attach_scan(release, vec![], None, vec![]).unwrap();
        inv.request_clearance(release).unwrap();
        inv.decide(release, reviewer(DecisionVerdict::Cleared)).unwrap();
    }
}

/// A journal in which every shop package and the GPL widget are cleared.
pub fn cleared_shop_journal(dir: &Path) -> PathBuf {
    let path = dir.join("inventory.jsonl");
    let mut inv = open(&path);
    let licenses = shop_licenses();
    clear_all(&mut inv, licenses.iter().map(|(c, e)| (c, e.as_str())));
    let gpl = gpl_widget();
    clear_all(&mut inv, [(&gpl, "GPL-3.0-only")]);
    path
}

pub fn gpl_widget() -> Coordinates {
    Coordinates::versioned("npm", "gpl-widget", "3.1.0")
}

pub fn left_unknown() -> Coordinates {
    Coordinates::versioned("npm", "left-unknown", "0.0.1")
}

pub struct Run {
    pub code: u8,
    pub stdout: String,
    pub stderr: String,
}

/// Runs the CLI in-process.
pub fn clearway(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("clearway").chain(args.iter().copied());
    let code = clearway_gate::cli::run(argv, &mut out, &mut err);
    Run {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

pub fn check_args<'a>(journal: &'a str, extra_lockfiles: &[&'a str]) -> Vec<String> {
    let mut args = vec![
        "check".to_string(),
        "--policy".into(),
        shop("policy.json"),
        "--journal".into(),
        journal.to_string(),
        "--manifest".into(),
        shop("manifest.json"),
        "--lockfile".into(),
        format!("neutral:{}", shop("lockfile.json")),
        "--timestamp".into(),
        TIMESTAMP.into(),
    ];
    for l in extra_lockfiles {
        args.push("--lockfile".into());
        args.push(format!("neutral:{}", shop(l)));
    }
    args
}

pub fn clearway_owned(args: &[String]) -> Run {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    clearway(&refs)
}
