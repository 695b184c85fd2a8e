//! Random fluents and states for the state algebra laws.

use chrv::os_sim::{FCState, Fluent, Value};
use proptest::prelude::*;

pub fn fluent() -> impl Strategy<Value = Fluent> {
    let value = prop_oneof![
        (0..5i64).prop_map(Value::Int),
        "[a-d][0-9]".prop_map(Value::Sym),
        prop::collection::vec(0..4i64, 0..3).prop_map(Value::List),
    ];
    ("[A-C]", prop::collection::vec(value, 0..3)).prop_map(|(s, args)| Fluent::new(&s, args))
}

pub fn state() -> impl Strategy<Value = FCState> {
    prop::collection::vec(fluent(), 0..10).prop_map(|fs| fs.into_iter().collect())
}
