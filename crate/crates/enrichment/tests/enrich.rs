// Copyright (c) The Clearway Contributors
// SPDX-License-Identifier: Apache-2.0

use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use chrono::Duration;
use clearway_core::inventory::{ClearanceState, DecisionInput, DecisionVerdict, Inventory, ManualClock};
use clearway_core::Coordinates;
use clearway_enrichment::{apply, cache_key, Enricher, EnrichmentConfig, Source};

/// Minimal HTTP/1.1 endpoint that counts requests. Paths ending in
/// `/missing` answer 404, everything else a fixed definition.
struct Stub {
    url: String,
    hits: Arc<AtomicUsize>,
}

fn stub(license: &'static str) -> Stub {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            counter.fetch_add(1, Ordering::SeqCst);
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            let mut header = String::new();
            while reader.read_line(&mut header).unwrap() > 2 {
                header.clear();
            }
            let (status, body) = if request_line.contains("/missing ") {
                ("404 Not Found", "{}".to_string())
            } else {
                ("200 OK", format!(r#"{{"licensed":{{"declared":"{license}"}}}}"#))
            };
            let _ = write!(
                stream,
                "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
        }
    });
    Stub { url, hits }
}

fn coords() -> Coordinates {
    Coordinates::versioned("npm", "left-pad", "1.3.0")
}

fn clock() -> Arc<ManualClock> {
    Arc::new(ManualClock::new("2026-10-15T08:00:00Z".parse().unwrap()))
}

fn fixtures(dir: &std::path::Path) -> std::path::PathBuf {
    let path = dir.join("fixtures.json");
    std::fs::write(&path, r#"{"npm/left-pad/1.3.0": "WTFPL OR MIT"}"#).unwrap();
    path
}

#[test]
fn offline_uses_fixtures_only() {
    let dir = tempfile::tempdir().unwrap();
    let server = stub("Apache-2.0");
    let enricher = Enricher::with_clock(
        EnrichmentConfig {
            offline: true,
            base_url: Some(server.url.clone()),
            fixtures: Some(fixtures(dir.path())),
            ..EnrichmentConfig::default()
        },
        clock(),
    );
    let result = enricher.enrich(&coords());
    assert_eq!(result.source, Source::Fixture);
    assert_eq!(result.curated_license.unwrap().to_string(), "WTFPL OR MIT");
    assert!(result.warnings.is_empty());
    assert_eq!(server.hits.load(Ordering::SeqCst), 0);
}

#[test]
fn absent_everywhere_is_empty_with_warning() {
    let enricher = Enricher::with_clock(
        EnrichmentConfig {
            offline: true,
            ..EnrichmentConfig::default()
        },
        clock(),
    );
    let result = enricher.enrich(&Coordinates::versioned("pypi", "nothing", "0.1"));
    assert_eq!(result.source, Source::Unavailable);
    assert!(result.curated_license.is_none());
    assert_eq!(result.warnings.len(), 1);
}

#[test]
fn cache_within_ttl_skips_remote() {
    let dir = tempfile::tempdir().unwrap();
    let server = stub("Apache-2.0");
    let clock = clock();
    let enricher = Enricher::with_clock(
        EnrichmentConfig {
            base_url: Some(server.url.clone()),
            cache_dir: Some(dir.path().join("cache")),
            ..EnrichmentConfig::default()
        },
        clock.clone(),
    );
    let first = enricher.enrich(&coords());
    assert_eq!(first.source, Source::Remote, "{:?}", first.warnings);
    assert_eq!(first.curated_license.unwrap().to_string(), "Apache-2.0");
    assert_eq!(server.hits.load(Ordering::SeqCst), 1);
    assert!(dir
        .path()
        .join("cache")
        .join(format!("{}.json", cache_key(&coords())))
        .exists());

    clock.advance(Duration::days(6));
    let second = enricher.enrich(&coords());
    assert_eq!(second.source, Source::Cache);
    assert_eq!(second.curated_license.unwrap().to_string(), "Apache-2.0");
    assert_eq!(server.hits.load(Ordering::SeqCst), 1);

    clock.advance(Duration::days(2));
    assert_eq!(enricher.enrich(&coords()).source, Source::Remote);
    assert_eq!(server.hits.load(Ordering::SeqCst), 2);
}

#[test]
fn remote_failure_falls_back() {
    let dir = tempfile::tempdir().unwrap();
    let server = stub("MIT");
    let config = EnrichmentConfig {
        base_url: Some(server.url.clone()),
        path_template: "/{ecosystem}/{name}/missing".into(),
        fixtures: Some(fixtures(dir.path())),
        ..EnrichmentConfig::default()
    };
    let result = Enricher::with_clock(config.clone(), clock()).enrich(&coords());
    assert_eq!(result.source, Source::Fixture);
    assert!(result.warnings.iter().any(|w| w.contains("404")));

    // Nothing listening: still no error, just the fixture.
    let closed = TcpListener::bind("127.0.0.1:0").unwrap();
    let dead = format!("http://{}", closed.local_addr().unwrap());
    drop(closed);
    let result = Enricher::with_clock(
        EnrichmentConfig {
            base_url: Some(dead),
            timeout_secs: 1,
            ..config
        },
        clock(),
    )
    .enrich(&coords());
    assert_eq!(result.source, Source::Fixture);
}

#[test]
fn stale_cache_beats_fixture_when_remote_fails() {
    let dir = tempfile::tempdir().unwrap();
    let server = stub("BSD-3-Clause");
    let clock = clock();
    let mut config = EnrichmentConfig {
        base_url: Some(server.url.clone()),
        cache_dir: Some(dir.path().join("cache")),
        fixtures: Some(fixtures(dir.path())),
        ..EnrichmentConfig::default()
    };
    Enricher::with_clock(config.clone(), clock.clone()).enrich(&coords());
    clock.advance(Duration::days(30));
    config.path_template = "/x/missing".into();
    let result = Enricher::with_clock(config, clock).enrich(&coords());
    assert_eq!(result.source, Source::Cache);
    assert_eq!(result.curated_license.unwrap().to_string(), "BSD-3-Clause");
}

#[test]
fn url_template_encodes_segments() {
    let enricher = Enricher::new(EnrichmentConfig {
        base_url: Some("https://kb.example/api/".into()),
        ..EnrichmentConfig::default()
    });
    assert_eq!(
        enricher
            .url_for(&Coordinates::versioned("npm", "@scope/pkg", "1.0.0"))
            .unwrap(),
        "https://kb.example/api/definitions/npm/%40scope%2Fpkg/1.0.0"
    );
}

#[test]
fn enrich_all_keeps_order() {
    let server = stub("ISC");
    let enricher = Enricher::with_clock(
        EnrichmentConfig {
            base_url: Some(server.url.clone()),
            parallelism: 3,
            ..EnrichmentConfig::default()
        },
        clock(),
    );
    let all: Vec<Coordinates> = (0..10)
        .map(|i| Coordinates::versioned("npm", format!("p{i}"), "1"))
        .collect();
    let results = enricher.enrich_all(&all);
    let back: Vec<&Coordinates> = results.iter().map(|r| &r.coords).collect();
    assert_eq!(back, all.iter().collect::<Vec<_>>());
    assert!(results.iter().all(|r| r.source == Source::Remote));
    assert_eq!(server.hits.load(Ordering::SeqCst), 10);
}

#[test]
fn apply_never_touches_decided_or_declared_releases() {
    let dir = tempfile::tempdir().unwrap();
    let enricher = Enricher::with_clock(
        EnrichmentConfig {
            offline: true,
            fixtures: Some(fixtures(dir.path())),
            ..EnrichmentConfig::default()
        },
        clock(),
    );
    let result = enricher.enrich(&coords());

    let (mut inv, journal) = Inventory::in_memory(clock());
    let release = inv.register_component(&coords(), None).unwrap().release_id.unwrap();
    assert!(apply(&mut inv, &result).unwrap());
    assert_eq!(
        inv.store()
            .release(release)
            .unwrap()
            .declared_license
            .as_ref()
            .unwrap()
            .to_string(),
        "WTFPL OR MIT"
    );
    assert!(!apply(&mut inv, &result).unwrap());

    let other = Coordinates::versioned("npm", "left-pad", "1.3.0");
    let (mut cleared, _) = Inventory::in_memory(clock());
    let id = cleared.register_component(&other, None).unwrap().release_id.unwrap();
    cleared.attach_scan(id, vec![], None, vec![]).unwrap();
    cleared.request_clearance(id).unwrap();
    cleared
        .decide(
            id,
            DecisionInput {
                reviewer: "r".into(),
                role: "ospo".into(),
                verdict: DecisionVerdict::Cleared,
                rationale: String::new(),
                policy_version: "1".into(),
            },
        )
        .unwrap();
    let before = cleared.store().snapshot_json();
    assert!(!apply(&mut cleared, &result).unwrap());
    assert_eq!(cleared.store().snapshot_json(), before);
    assert_eq!(cleared.lookup(&other).unwrap().1, ClearanceState::Cleared);
    assert!(journal.lines().len() >= 2);
}
