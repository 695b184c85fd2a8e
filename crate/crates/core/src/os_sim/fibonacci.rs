//! Monthly growth of an idealised rabbit population.
//!
//! The state holds a single fluent `Fib(l)` whose list is stored newest
//! first, so `Fib([v,l,pl|x])` follows `Fib([l,pl|x])`. The only action `Mg`
//! is possible whenever the list has two elements `l, pl` at its head; it
//! pushes `v = l + pl` and extracts `mg v`.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::{Delta, Effect, FCState, Fluent, OSAction, OSSpec, Situation, Value};

pub const FIB: &str = "Fib";

fn fib(list: Vec<i64>) -> Fluent {
    Fluent::new(FIB, vec![Value::List(list)])
}

/// The newest-first list of the first `Fib` fluent whose list has at least
/// two elements starting with `l, pl`.
fn matching(z: &FCState, l: i64, pl: i64) -> Option<&[i64]> {
    z.with_symbol(FIB)
        .filter_map(|f| f.args.first()?.as_list())
        .find(|list| list.len() >= 2 && list[0] == l && list[1] == pl)
}

pub fn spec() -> OSSpec {
    let mg = OSAction {
        name: "Mg".into(),
        event_kind: "mg".into(),
        params: vec!["INT".into(), "INT".into()],
        poss: Arc::new(|args, z| match (args[0].as_int(), args[1].as_int()) {
            (Some(l), Some(pl)) => matching(z, l, pl).is_some(),
            _ => false,
        }),
        effect: Arc::new(|args, z| {
            let (l, pl) = (args[0].as_int().unwrap(), args[1].as_int().unwrap());
            let old = matching(z, l, pl).expect("Poss holds").to_vec();
            let v = l + pl;
            let mut new = vec![v];
            new.extend(&old);
            Effect {
                delta: Delta {
                    add: FCState::fluent(fib(new)),
                    remove: FCState::fluent(fib(old)),
                },
                attributes: vec![("v".into(), Value::Int(v))],
            }
        }),
        candidates: Some(Arc::new(|z| {
            z.with_symbol(FIB)
                .filter_map(|f| f.args.first()?.as_list())
                .filter(|l| l.len() >= 2)
                .map(|l| vec![Value::Int(l[0]), Value::Int(l[1])])
                .collect()
        })),
    };
    OSSpec {
        name: "fibonacci".into(),
        actions: vec![mg],
        initial: FCState::fluent(fib(vec![1, 1])),
        sorts: BTreeMap::new(),
    }
}

/// The population history in a state, oldest first.
pub fn population(z: &FCState) -> Option<Vec<i64>> {
    let f = z.with_symbol(FIB).next()?;
    let mut l = f.args.first()?.as_list()?.to_vec();
    l.reverse();
    Some(l)
}

/// `T^w`: `(chrono, v)` pairs.
pub fn actual_trace(sit: &Situation) -> Vec<(u64, i64)> {
    sit.history
        .iter()
        .filter_map(|h| Some((h.event.chrono, h.event.attributes.get("v")?.as_int()?)))
        .collect()
}

/// `T^v`: `(chrono, action, population)` triples.
pub fn virtual_trace(sit: &Situation) -> Vec<(u64, String, Vec<i64>)> {
    sit.history
        .iter()
        .map(|h| (h.event.chrono, h.event.kind.clone(), population(&h.state).unwrap_or_default()))
        .collect()
}
