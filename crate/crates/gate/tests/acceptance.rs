// Copyright (c) The Clearway Contributors
// SPDX-License-Identifier: Apache-2.0

//! Release acceptance checks. Each criterion prints one `PASS` or `FAIL`
//! line; the target exits non-zero if any criterion fails.
//!
//! Run with `cargo test -p clearway-gate --test acceptance`.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use clearway_core::artifacts::{generate_ccs_manifest, generate_sbom, SbomOptions};
use clearway_core::expr::{parse_expression, render};
use clearway_core::ingest::import_spdx;
use clearway_core::inventory::{
    replay, ClearanceState, DecisionInput, DecisionVerdict, Inventory, ManualClock, ReleaseId, SourceRef,
};
use clearway_core::policy::{
    evaluate_expression, evaluate_product, Channel, Class, EvaluationOptions, Obligation, ObligationKind,
    PolicyDocument, Status, Subject,
};
use clearway_core::scanner::{normalize_text, scan_tree, Corpus, ScanConfig};
use clearway_core::{Coordinates, Execution, LicenseExpression, LicenseTerm};
use clearway_gate::inputs::{load_product, read_policy, read_store, LockfileArg};
use clearway_gate::{run_check, CheckConfig};
use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const EXPRESSIONS: &str = include_str!("../../core/tests/fixtures/expressions.tsv");
const MIT_5PCT_DELETED: &str = include_str!("../../core/tests/fixtures/MIT-5pct-deleted.txt");

const ROUND_TRIP_BUDGET: Duration = Duration::from_secs(1);
const DNF_CASES: usize = 1000;
const DNF_MAX_TERMS: usize = 6;
const DNF_MAX_DEPTH: u32 = 5;
const DNF_BUDGET: Duration = Duration::from_secs(10);
const SELF_DETECT_MIN: f64 = 0.99;
const MUTATED_MIN: f64 = 0.80;
const MIN_CORPUS: usize = 10;
const GATE_BUDGET: Duration = Duration::from_secs(5);
const JOURNAL_SEQUENCES: usize = 500;
const PERSISTENCE_LOOKUPS: usize = 100;
const PERSISTENCE_RUNS: usize = 10;
const SEED: u64 = 0x00C1_EA12_2026;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn expression_round_trip() -> Outcome {
    let start = Instant::now();
    let mut count = 0;
    for line in EXPRESSIONS.lines() {
        let (input, expected) = line.split_once('\t').ok_or("fixture line without two columns")?;
        let first = parse_expression(input).map_err(|e| format!("{input}: {e}"))?;
        let text = render(&first);
        ensure!(text == expected, "{input}: rendered {text}, expected {expected}");
        let second = parse_expression(&text).map_err(|e| format!("{text}: {e}"))?;
        ensure!(first == second, "{input}: AST changed after a round trip");
        count += 1;
    }
    let elapsed = start.elapsed();
    ensure!(count == 200, "corpus has {count} expressions, expected 200");
    ensure!(elapsed < ROUND_TRIP_BUDGET, "took {elapsed:?}");
    Ok(format!("{count} expressions in {elapsed:?}"))
}

const POOL: [&str; DNF_MAX_TERMS] = ["MIT", "ISC", "Apache-2.0", "GPL-3.0-only", "BSD-3-Clause", "Zlib"];

fn random_expr(rng: &mut ChaCha8Rng, depth: u32) -> LicenseExpression {
    if depth == 0 || rng.gen_bool(0.3) {
        return LicenseExpression::term(POOL[rng.gen_range(0..POOL.len())]);
    }
    let left = random_expr(rng, depth - 1);
    let right = random_expr(rng, depth - 1);
    if rng.gen_bool(0.5) {
        left.and(right)
    } else {
        left.or(right)
    }
}

fn satisfied(expr: &LicenseExpression, chosen: &dyn Fn(&LicenseTerm) -> bool) -> bool {
    match expr {
        LicenseExpression::Term(t) => chosen(t),
        LicenseExpression::Conjunction(a, b) => satisfied(a, chosen) && satisfied(b, chosen),
        LicenseExpression::Disjunction(a, b) => satisfied(a, chosen) || satisfied(b, chosen),
    }
}

/// Tries every selection of the expression's terms: PASS if some satisfying
/// selection uses only allowed licenses, NEEDS_REVIEW if some uses no denied
/// one.
fn brute_force(expr: &LicenseExpression, class_of: &dyn Fn(&str) -> Class) -> Status {
    let terms: Vec<&str> = expr
        .terms()
        .map(|t| t.license_id.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut best = Status::Fail;
    for mask in 0u32..1 << terms.len() {
        let picked: Vec<&str> = (0..terms.len())
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| terms[i])
            .collect();
        if !satisfied(expr, &|t| picked.contains(&t.license_id.as_str())) {
            continue;
        }
        let status = if picked.iter().all(|id| class_of(id).is_allowed()) {
            Status::Pass
        } else if picked.iter().all(|id| class_of(id) != Class::Deny) {
            Status::NeedsReview
        } else {
            Status::Fail
        };
        best = best.min(status);
    }
    best
}

fn dnf_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut tally = BTreeMap::new();
    for case in 0..DNF_CASES {
        let expr = random_expr(&mut rng, DNF_MAX_DEPTH);
        let classes: Vec<Class> = (0..POOL.len())
            .map(|_| Class::ALL[rng.gen_range(0..Class::ALL.len())])
            .collect();
        let mut policy = PolicyDocument::new("oracle", Class::ReviewRequired);
        for (id, class) in POOL.iter().zip(&classes) {
            policy = policy.with_class(id, None, *class);
            if *class == Class::AllowWithObligations {
                policy = policy.with_obligations(id, vec![Obligation::new(ObligationKind::Attribution)]);
            }
        }
        let class_of = |id: &str| classes[POOL.iter().position(|p| *p == id).expect("pool id")];
        let got = evaluate_expression(&expr, Channel::DistributedBinary, &policy)
            .map_err(|e| format!("case {case}: {e}"))?
            .status;
        let want = brute_force(&expr, &class_of);
        ensure!(
            got == want,
            "case {case}: {expr} gave {got:?}, enumeration gave {want:?}"
        );
        *tally.entry(format!("{got:?}")).or_insert(0) += 1;
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < DNF_BUDGET, "took {elapsed:?}");
    Ok(format!("{DNF_CASES} cases agree {tally:?} in {elapsed:?}"))
}

fn scanner_detection() -> Outcome {
    let corpus = Corpus::bundled();
    ensure!(
        corpus.entries().len() >= MIN_CORPUS,
        "only {} bundled licenses",
        corpus.entries().len()
    );
    let mut lowest = 1.0f64;
    for entry in corpus.entries() {
        let (hit, score) = corpus
            .best_match(&normalize_text(&entry.canonical_text))
            .ok_or_else(|| format!("{} not detected", entry.license_id))?;
        ensure!(
            hit.license_id == entry.license_id,
            "{} detected as {}",
            entry.license_id,
            hit.license_id
        );
        ensure!(score >= SELF_DETECT_MIN, "{} scored {score}", entry.license_id);
        lowest = lowest.min(score);
    }
    let (hit, mutated) = corpus
        .best_match(&normalize_text(MIT_5PCT_DELETED))
        .ok_or("mutated MIT not detected")?;
    ensure!(hit.license_id == "MIT", "mutated MIT detected as {}", hit.license_id);
    ensure!(mutated >= MUTATED_MIN, "mutated MIT scored {mutated}");

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for entry in corpus.entries() {
        let sub = dir.path().join(&entry.license_id);
        fs::create_dir_all(&sub).map_err(|e| e.to_string())?;
        fs::write(sub.join("LICENSE"), &entry.canonical_text).map_err(|e| e.to_string())?;
    }
    fs::write(dir.path().join("COPYING"), MIT_5PCT_DELETED).map_err(|e| e.to_string())?;
    let scan = |execution| {
        scan_tree(
            dir.path(),
            &corpus,
            &ScanConfig {
                execution,
                ..ScanConfig::default()
            },
        )
        .map_err(|e| e.to_string())
    };
    let reference = scan(Execution::Sequential)?;
    for execution in [Execution::Sequential, Execution::Parallel, Execution::Parallel] {
        ensure!(
            scan(execution)? == reference,
            "{execution:?} scan differs from the first run"
        );
    }
    Ok(format!(
        "{} licenses self-detect (min {lowest:.4}); mutated MIT {mutated:.4}; {} findings stable",
        corpus.entries().len(),
        reference.findings.len()
    ))
}

fn e2e_gate() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let journal = cleared_shop_journal(dir.path()).display().to_string();

    let pass = clearway_owned(&check_args(&journal, &[]));
    ensure!(pass.code == 0, "all cleared: exit {} {}", pass.code, pass.stderr);

    let fail = clearway_owned(&check_args(&journal, &["extra-gpl.json"]));
    ensure!(fail.code == 1, "GPL dependency: exit {}", fail.code);
    ensure!(
        fail.stdout
            .lines()
            .any(|l| l.starts_with("FAIL npm/gpl-widget@3.1.0 DENIED_LICENSE")),
        "no FAIL line naming the GPL dependency:\n{}",
        fail.stdout
    );

    let mut strict = check_args(&journal, &["extra-unknown.json"]);
    strict.push("--strict".into());
    let review = clearway_owned(&strict);
    ensure!(review.code == 2, "unknown dependency, strict: exit {}", review.code);
    ensure!(
        review
            .stdout
            .lines()
            .any(|l| l.starts_with("REVIEW npm/left-unknown@0.0.1 ") && l.contains("UNCLEARED")),
        "no UNCLEARED line for the unknown dependency:\n{}",
        review.stdout
    );

    let elapsed = start.elapsed();
    ensure!(elapsed < GATE_BUDGET, "took {elapsed:?}");
    Ok(format!("exits 0/1/2 in {elapsed:?}"))
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Register,
    Scan,
    Request,
    Decide { clear: bool, reviewer: bool },
    Source,
    Declare,
}

/// The clearance state machine, independent of the implementation:
/// `None` means the operation must be refused.
fn expected(state: Option<ClearanceState>, op: Op) -> Option<Option<ClearanceState>> {
    use ClearanceState::*;
    match (op, state) {
        (Op::Register, None) => Some(Some(New)),
        (Op::Register, s) => Some(s),
        (_, None) => None,
        (Op::Scan, Some(New | Scanned)) => Some(Some(Scanned)),
        (Op::Request, Some(Scanned | Rejected)) => Some(Some(PendingReview)),
        (Op::Decide { reviewer: false, .. }, _) => None,
        (Op::Decide { clear, .. }, Some(PendingReview)) => Some(Some(if clear { Cleared } else { Rejected })),
        (Op::Source, s) => Some(s),
        (Op::Declare, Some(New | Scanned | PendingReview)) => Some(state),
        _ => None,
    }
}

fn random_op(rng: &mut ChaCha8Rng) -> Op {
    match rng.gen_range(0..6) {
        0 => Op::Register,
        1 => Op::Scan,
        2 => Op::Request,
        3 => Op::Decide {
            clear: rng.gen_bool(0.5),
            reviewer: rng.gen_bool(0.8),
        },
        4 => Op::Source,
        _ => Op::Declare,
    }
}

fn apply(inv: &mut Inventory, coords: &Coordinates, op: Op) -> bool {
    if let Op::Register = op {
        return inv.register_component(coords, None).is_ok();
    }
    let Some((release, _)) = inv.lookup(coords) else {
        return false;
    };
    match op {
        Op::Register => unreachable!(),
        Op::Scan => inv
            .attach_scan(
                release,
                vec![],
                Some(LicenseExpression::term("MIT")),
                vec!["Copyright 2020 A".into()],
            )
            .is_ok(),
        Op::Request => inv.request_clearance(release).is_ok(),
        Op::Decide { clear, reviewer } => inv
            .decide(
                release,
                DecisionInput {
                    reviewer: "r@example.org".into(),
                    role: if reviewer { "reviewer" } else { "developer" }.into(),
                    verdict: if clear {
                        DecisionVerdict::Cleared
                    } else {
                        DecisionVerdict::Rejected
                    },
                    rationale: "acceptance".into(),
                    policy_version: "1".into(),
                },
            )
            .is_ok(),
        Op::Source => inv
            .record_source(
                release,
                SourceRef {
                    url: format!("https://src.example/{}", coords.name),
                    content_hash: "sha256:00".into(),
                },
            )
            .is_ok(),
        Op::Declare => inv
            .set_declared_license(release, LicenseExpression::term("ISC"), "acceptance")
            .is_ok(),
    }
}

fn journal_determinism() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let nodes: Vec<Coordinates> = (0..6)
        .map(|i| Coordinates::versioned(["npm", "cargo"][i % 2], format!("pkg{}", i / 2), "1.0.0"))
        .collect();
    let (mut illegal, mut refused, mut applied) = (0usize, 0usize, 0usize);
    for seq in 0..JOURNAL_SEQUENCES {
        let clock = std::sync::Arc::new(ManualClock::new(frozen_now()));
        let (mut inv, journal) = Inventory::in_memory(clock.clone());
        let mut model: BTreeMap<usize, ClearanceState> = BTreeMap::new();
        for _ in 0..rng.gen_range(1..60) {
            clock.advance(chrono::Duration::seconds(1));
            // Mostly legal steps so sequences get deep into the lifecycle.
            let want_legal = rng.gen_bool(0.75);
            let (mut node, mut op) = (rng.gen_range(0..nodes.len()), random_op(&mut rng));
            for _ in 0..50 {
                if !want_legal || expected(model.get(&node).copied(), op).is_some() {
                    break;
                }
                (node, op) = (rng.gen_range(0..nodes.len()), random_op(&mut rng));
            }
            let ok = apply(&mut inv, &nodes[node], op);
            match expected(model.get(&node).copied(), op) {
                Some(after) => {
                    ensure!(ok, "sequence {seq}: legal {op:?} was refused");
                    applied += 1;
                    if let Some(s) = after {
                        model.insert(node, s);
                    }
                }
                None => {
                    illegal += 1;
                    refused += usize::from(!ok);
                }
            }
            let actual = inv.lookup(&nodes[node]).map(|(_, s)| s);
            ensure!(
                actual == model.get(&node).copied(),
                "sequence {seq}: state diverged after {op:?}"
            );
        }
        let contents = journal.contents();
        let first = replay(contents.as_bytes()).map_err(|e| format!("sequence {seq}: {e}"))?;
        let second = replay(contents.as_bytes()).map_err(|e| format!("sequence {seq}: {e}"))?;
        let live = inv.store().snapshot_json();
        ensure!(
            first.snapshot_json() == live,
            "sequence {seq}: replay differs from the in-memory fold"
        );
        ensure!(second.snapshot_json() == live, "sequence {seq}: second replay differs");
    }
    ensure!(illegal > 0, "no illegal operations were generated");
    ensure!(
        refused == illegal,
        "{} of {illegal} illegal operations were accepted",
        illegal - refused
    );
    Ok(format!(
        "{JOURNAL_SEQUENCES} sequences, {applied} operations applied, {refused}/{illegal} illegal refused"
    ))
}

fn lockfile_args(extra: &[&str]) -> Vec<LockfileArg> {
    std::iter::once("lockfile.json")
        .chain(extra.iter().copied())
        .map(|f| format!("neutral:{}", shop(f)).parse().expect("lockfile argument"))
        .collect()
}

fn sbom_round_trip() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store = read_store(&cleared_shop_journal(dir.path())).map_err(|e| format!("{e:#}"))?;
    let options = EvaluationOptions::at(frozen_now());
    let sbom_options = SbomOptions::at(frozen_now());
    let validator = jsonschema::validator_for(&schema("spdx-2.3-subset.schema.json")).map_err(|e| e.to_string())?;
    let mut summary = Vec::new();
    for extra in [&[][..], &["extra-gpl.json"], &["extra-unknown.json"]] {
        let inputs = load_product(Path::new(&shop("manifest.json")), &lockfile_args(extra), None)
            .map_err(|e| format!("{e:#}"))?;
        let closure = inputs.graph.product_closure(&options.scopes);
        let graph = inputs.graph.restricted_to(&closure, &options.scopes);
        let text = generate_sbom(&inputs.manifest, &graph, &store, &sbom_options);
        let again = generate_sbom(&inputs.manifest, &graph, &store, &sbom_options);
        ensure!(text == again, "{extra:?}: output is not byte-identical");

        let doc: Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        let errors: Vec<String> = validator.iter_errors(&doc).map(|e| e.to_string()).collect();
        ensure!(errors.is_empty(), "{extra:?}: schema errors {errors:?}");

        let imported = import_spdx(text.as_bytes()).map_err(|e| format!("{extra:?}: {e}"))?;
        let nodes: BTreeSet<Coordinates> = imported.components.iter().map(|c| c.coords.clone()).collect();
        ensure!(&nodes == graph.nodes(), "{extra:?}: node sets differ");
        let mut want: Vec<(Option<Coordinates>, Coordinates)> =
            graph.edges().map(|e| (e.from.clone(), e.to.clone())).collect();
        let mut got = imported.edges.clone();
        want.sort();
        got.sort();
        ensure!(
            got == want,
            "{extra:?}: edge multisets differ ({} vs {})",
            got.len(),
            want.len()
        );
        summary.push(format!("{}n/{}e", nodes.len(), got.len()));
    }
    Ok(format!("3 fixtures round-trip [{}]", summary.join(", ")))
}

/// Glob match for policy patterns: exact, or a prefix ending in `*`.
fn pattern_matches(pattern: &str, id: &str) -> bool {
    match pattern.strip_suffix('*') {
        Some(prefix) => id.starts_with(prefix),
        None => pattern == id,
    }
}

fn ccs_soundness() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store = read_store(&cleared_shop_journal(dir.path())).map_err(|e| format!("{e:#}"))?;
    let inputs =
        load_product(Path::new(&shop("manifest.json")), &lockfile_args(&[]), None).map_err(|e| format!("{e:#}"))?;
    let policy = read_policy(Path::new(&shop("policy.json"))).map_err(|e| format!("{e:#}"))?;
    let channel = inputs.manifest.channel;
    let evaluation = evaluate_product(
        &inputs.manifest,
        &inputs.graph,
        &store,
        &policy,
        &EvaluationOptions::at(frozen_now()),
    );
    let (ccs, _) = generate_ccs_manifest(&inputs.manifest, &evaluation, &store, "ospo@example.org");
    let in_manifest: BTreeSet<Coordinates> = ccs.entries.iter().map(|e| e.coords.clone()).collect();

    let component = |s: &Subject| match s {
        Subject::Component(c) => Some(c.clone()),
        Subject::Product { .. } => None,
    };
    let by_verdict: BTreeSet<Coordinates> = evaluation
        .nodes
        .iter()
        .filter(|v| v.obligations_due.iter().any(|d| d.kind.is_disclosure()))
        .filter_map(|v| component(&v.subject))
        .collect();

    // Re-derived from the raw policy document and the chosen licenses.
    let raw: Value = serde_json::from_str(&fs::read_to_string(shop("policy.json")).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let channel_name = serde_json::to_value(channel).map_err(|e| e.to_string())?;
    let disclosing: Vec<&str> = raw["obligations"]
        .as_object()
        .ok_or("policy has no obligations")?
        .iter()
        .filter(|(_, list)| {
            list.as_array().into_iter().flatten().any(|o| {
                matches!(o["kind"].as_str(), Some("source_disclosure" | "source_offer"))
                    && o.get("scope")
                        .is_none_or(|s| s.as_array().is_some_and(|a| a.contains(&channel_name)))
            })
        })
        .map(|(pattern, _)| pattern.as_str())
        .collect();
    let by_policy: BTreeSet<Coordinates> = evaluation
        .nodes
        .iter()
        .filter(|v| {
            v.chosen_licenses.as_ref().is_some_and(|set| {
                set.terms()
                    .any(|t| disclosing.iter().any(|p| pattern_matches(p, &t.license_id)))
            })
        })
        .filter_map(|v| component(&v.subject))
        .collect();

    ensure!(!in_manifest.is_empty(), "fixture produced no CCS entries");
    ensure!(
        in_manifest == by_verdict,
        "manifest {in_manifest:?} vs verdict obligations {by_verdict:?}"
    );
    ensure!(
        in_manifest == by_policy,
        "manifest {in_manifest:?} vs policy-derived {by_policy:?}"
    );
    let ids: Vec<String> = in_manifest.iter().map(ToString::to_string).collect();
    Ok(format!(
        "{} entries match verdicts and policy [{}]",
        ids.len(),
        ids.join(", ")
    ))
}

fn clearance_persistence() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let journal = cleared_shop_journal(dir.path());
    let target = left_unknown();
    let release: ReleaseId = {
        let mut inv = open(&journal);
        let id = inv
            .register_component(&target, None)
            .map_err(|e| e.to_string())?
            .release_id
            .ok_or("no release")?;
        inv.attach_scan(id, vec![], Some(LicenseExpression::term("MIT")), vec![])
            .map_err(|e| e.to_string())?;
        inv.request_clearance(id).map_err(|e| e.to_string())?;
        inv.decide(id, reviewer(DecisionVerdict::Cleared))
            .map_err(|e| e.to_string())?;
        for n in 0..PERSISTENCE_LOOKUPS {
            let state = inv.lookup(&target).map(|(_, s)| s);
            ensure!(state == Some(ClearanceState::Cleared), "lookup {n} returned {state:?}");
        }
        id
    };
    let before = fs::read(&journal).map_err(|e| e.to_string())?;
    let cfg = CheckConfig {
        policy: Some(shop("policy.json").into()),
        journal: Some(journal.clone()),
        manifest: Some(shop("manifest.json").into()),
        lockfiles: lockfile_args(&["extra-unknown.json"]),
        strict: true,
        now: Some(frozen_now()),
        ..Default::default()
    };
    for run in 0..PERSISTENCE_RUNS {
        let report = run_check(&cfg).map_err(|e| format!("run {run}: {e:#}"))?;
        ensure!(report.exit_code == 0, "run {run}: exit {}", report.exit_code);
        let node = report
            .nodes
            .iter()
            .find(|v| v.subject == Subject::Component(target.clone()))
            .ok_or_else(|| format!("run {run}: {target} missing from report"))?;
        ensure!(node.status == Status::Pass, "run {run}: {target} is {:?}", node.status);
        let state = open(&journal).store().find_release(&target).map(|r| (r.id, r.state));
        ensure!(
            state == Some((release, ClearanceState::Cleared)),
            "run {run}: state {state:?}"
        );
    }
    ensure!(
        fs::read(&journal).map_err(|e| e.to_string())? == before,
        "gate runs modified the journal"
    );
    Ok(format!(
        "{PERSISTENCE_LOOKUPS} lookups and {PERSISTENCE_RUNS} gate runs stay CLEARED"
    ))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("expression-round-trip", expression_round_trip),
        ("dnf-oracle-equivalence", dnf_oracle),
        ("scanner-self-detection", scanner_detection),
        ("end-to-end-gate", e2e_gate),
        ("journal-replay-determinism", journal_determinism),
        ("sbom-round-trip", sbom_round_trip),
        ("ccs-soundness", ccs_soundness),
        ("clearance-persistence", clearance_persistence),
    ];
    let mut failed = Vec::new();
    for (name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                println!("FAIL {name}: {detail}");
                failed.push(name);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
    println!("acceptance: {} criteria passed", criteria.len());
}
