// Copyright (c) The Clearway Contributors
// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

use std::collections::BTreeSet;

use clearway_core::{LicenseExpression, LicenseTerm};
use proptest::prelude::*;

pub const POOL: &[&str] = &["MIT", "ISC", "Apache-2.0", "GPL-3.0-only", "BSD-3-Clause", "Zlib"];

pub fn arb_term() -> impl Strategy<Value = LicenseTerm> {
    (
        0..POOL.len(),
        any::<bool>(),
        prop::option::weighted(0.15, Just("LLVM-exception")),
    )
        .prop_map(|(i, plus, exc)| {
            let mut t = LicenseTerm::new(POOL[i]);
            if plus {
                t = t.or_later();
            }
            if let Some(e) = exc {
                t = t.with_exception(e);
            }
            t
        })
}

/// Expressions over plain ids from [`POOL`], so at most six distinct terms.
pub fn arb_plain_expr(depth: u32) -> impl Strategy<Value = LicenseExpression> {
    let leaf = (0..POOL.len()).prop_map(|i| LicenseExpression::term(POOL[i]));
    leaf.prop_recursive(depth, 32, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.and(b)),
            (inner.clone(), inner).prop_map(|(a, b)| a.or(b)),
        ]
    })
}

pub fn arb_expr(depth: u32) -> impl Strategy<Value = LicenseExpression> {
    arb_term()
        .prop_map(LicenseExpression::Term)
        .prop_recursive(depth, 48, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a.and(b)),
                (inner.clone(), inner).prop_map(|(a, b)| a.or(b)),
            ]
        })
}

/// Direct AST semantics: OR is a choice, AND needs both sides.
pub fn acceptable(expr: &LicenseExpression, ok: &dyn Fn(&LicenseTerm) -> bool) -> bool {
    match expr {
        LicenseExpression::Term(t) => ok(t),
        LicenseExpression::Conjunction(a, b) => acceptable(a, ok) && acceptable(b, ok),
        LicenseExpression::Disjunction(a, b) => acceptable(a, ok) || acceptable(b, ok),
    }
}

pub fn distinct_terms(expr: &LicenseExpression) -> Vec<LicenseTerm> {
    expr.terms().cloned().collect::<BTreeSet<_>>().into_iter().collect()
}

use std::sync::Arc;

use chrono::{DateTime, Utc};
use clearway_core::inventory::{DecisionInput, DecisionVerdict, Inventory, ManualClock};
use clearway_core::Coordinates;

pub fn frozen_now() -> DateTime<Utc> {
    "2026-10-15T12:00:00Z".parse().unwrap()
}

pub fn reviewer_clears() -> DecisionInput {
    DecisionInput {
        reviewer: "rev@example.org".into(),
        role: "reviewer".into(),
        verdict: DecisionVerdict::Cleared,
        rationale: "reviewed".into(),
        policy_version: "test".into(),
    }
}

/// An in-memory inventory where each `(coords, expression)` is registered,
/// given a declared license and, when `clear` is set, cleared.
pub fn inventory_with(entries: &[(Coordinates, &str, bool)]) -> Inventory {
    let (mut inv, _) = Inventory::in_memory(Arc::new(ManualClock::new(frozen_now())));
    for (coords, expr, clear) in entries {
        let release = inv.register_component(coords, None).unwrap().release_id.unwrap();
        inv.set_declared_license(release, LicenseExpression::parse(expr).unwrap(), "test")
            .unwrap();
        if *clear {
            inv.attach_scan(release, vec![], None, vec![]).unwrap();
            inv.request_clearance(release).unwrap();
            inv.decide(release, reviewer_clears()).unwrap();
        }
    }
    inv
}
