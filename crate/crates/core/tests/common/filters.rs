//! Random events and filters, and a filter predicate written against the
//! JSON form of events rather than the library types.

use std::collections::BTreeSet;

use chrv::driver::FilterQuery;
use chrv::tracer::{ActualTraceEvent, Attributes, EventKind};
use proptest::prelude::*;
use serde_json::Value;

const TEXTS: [&str; 6] = ["leq(A,B)", "leq(B,C), leq(A,C)", "A=C", "A=C, C=B", "r2@ leq(X,Y) ==> X=Y", ""];
const NEEDLES: [&str; 7] = ["leq", "A=C", "r2", "B", ",", "1", "zzz"];

fn text() -> impl Strategy<Value = Option<String>> {
    prop::option::of(prop::sample::select(&TEXTS[..]).prop_map(String::from))
}

pub fn kind() -> impl Strategy<Value = EventKind> {
    prop::sample::select(EventKind::ALL.to_vec())
}

/// Attributes are not held to the per-kind discipline: filters must not
/// rely on it.
pub fn event() -> impl Strategy<Value = ActualTraceEvent> {
    (1..40u64, kind(), text(), text(), text(), text(), prop::option::of(1..20u64)).prop_map(
        |(chrono, kind, rule, goal, udc, bic, hind)| ActualTraceEvent {
            chrono,
            kind,
            attributes: Attributes { rule, goal, udc, bic, hind },
        },
    )
}

pub fn filter() -> impl Strategy<Value = FilterQuery> {
    let kinds = prop::option::of(prop::collection::btree_set(kind(), 0..=3));
    let range = prop::option::of((1..40u64, 0..20u64).prop_map(|(lo, len)| (lo, lo + len)));
    let contains = prop::collection::vec(
        (prop::sample::select(Attributes::NAMES.to_vec()), prop::sample::select(&NEEDLES[..]))
            .prop_map(|(a, n)| (a.to_string(), n.to_string())),
        0..=2,
    );
    (kinds, range, contains).prop_map(|(kinds, chrono_range, attr_contains)| FilterQuery {
        kinds,
        chrono_range,
        attr_contains,
    })
}

/// The reference predicate: kind in the set, chrono in the closed range,
/// every named attribute present with the needle as a substring.
pub fn reference(q: &FilterQuery, e: &ActualTraceEvent) -> bool {
    let json = serde_json::to_value(e).unwrap();
    let kind = json["kind"].as_str().unwrap().to_string();
    let chrono = json["chrono"].as_u64().unwrap();
    let kinds: Option<BTreeSet<String>> = q
        .kinds
        .as_ref()
        .map(|ks| ks.iter().map(|k| serde_json::to_value(k).unwrap().as_str().unwrap().to_string()).collect());
    let kind_ok = kinds.is_none_or(|ks| ks.contains(&kind));
    let range_ok = q.chrono_range.is_none_or(|(lo, hi)| (lo..=hi).contains(&chrono));
    let attrs_ok = q.attr_contains.iter().all(|(name, needle)| match &json["attributes"][name.as_str()] {
        Value::String(s) => s.contains(needle.as_str()),
        Value::Number(n) => n.to_string().contains(needle.as_str()),
        _ => false,
    });
    kind_ok && range_ok && attrs_ok
}
