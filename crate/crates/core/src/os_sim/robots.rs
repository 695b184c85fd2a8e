//! One robot moving between three rooms, carrying objects and opening
//! doors.
//!
//! Rooms r1, r2, r3 are joined by door d12 (r1-r2) and door d13 (r1-r3).
//! Events are `pickup a o r`, `drop a o r`, `walk a d`, `walk a r` and
//! `open a d`. `Request` fluents are carried in the state but no action
//! reads or changes them.
//!
//! Two departures from the axioms make the example trace replayable: the
//! robot starts in r1 with o1 and holds the key code for d12 as well as d13
//! ([`initial_state`]; [`axiomatic_initial_state`] is the state the axioms
//! give), and entering a room also leaves the door the robot stood at,
//! otherwise it could never walk to a door again.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::{Delta, Effect, FCState, Fluent, OSAction, OSSpec, Value};

pub const AGENTS: [&str; 1] = ["a1"];
pub const ROOMS: [&str; 3] = ["r1", "r2", "r3"];
pub const DOORS: [&str; 2] = ["d12", "d13"];
pub const OBJECTS: [&str; 3] = ["o1", "o2", "o3"];

/// `Connects(r, d, r')`, symmetric.
pub fn connects(r: &str, d: &str, r2: &str) -> bool {
    matches!(
        (r, d, r2),
        ("r1", "d12", "r2") | ("r2", "d12", "r1") | ("r1", "d13", "r3") | ("r3", "d13", "r1")
    )
}

fn f(symbol: &str, args: &[&str]) -> Fluent {
    Fluent::syms(symbol, args)
}

fn requests() -> Vec<Fluent> {
    vec![
        f("Request", &["r3", "o1", "r2"]),
        f("Request", &["r1", "o2", "r3"]),
        f("Request", &["r2", "o3", "r1"]),
    ]
}

/// `S_0` as the axioms state it: the robot in r2, o1 in r3, key code for d13
/// only. The example trace is not possible from it.
pub fn axiomatic_initial_state() -> FCState {
    let mut z: FCState = [
        f("AgentInRoom", &["a1", "r2"]),
        f("ObjectInRoom", &["o1", "r3"]),
        f("ObjectInRoom", &["o2", "r1"]),
        f("ObjectInRoom", &["o3", "r2"]),
        f("Closed", &["d12"]),
        f("HasKeyCode", &["a1", "d13"]),
    ]
    .into_iter()
    .collect();
    for r in requests() {
        z = z.with(r);
    }
    z
}

/// `S_0` consistent with the example trace: robot and o1 together in r1,
/// d12 closed, key codes for d12 and d13.
pub fn initial_state() -> FCState {
    axiomatic_initial_state()
        .without(&f("AgentInRoom", &["a1", "r2"]))
        .without(&f("ObjectInRoom", &["o1", "r3"]))
        .with(f("AgentInRoom", &["a1", "r1"]))
        .with(f("ObjectInRoom", &["o1", "r1"]))
        .with(f("HasKeyCode", &["a1", "d12"]))
}

fn names(args: &[Value]) -> Vec<&str> {
    args.iter()
        .map(|v| match v {
            Value::Sym(s) => s.as_str(),
            _ => "",
        })
        .collect()
}

fn attrs(pairs: &[(&str, &str)]) -> Vec<(String, Value)> {
    pairs.iter().map(|(k, v)| (k.to_string(), Value::sym(v))).collect()
}

fn action(
    name: &str,
    event_kind: &str,
    params: &[&str],
    poss: impl Fn(&[&str], &FCState) -> bool + Send + Sync + 'static,
    effect: impl Fn(&[&str]) -> (Delta, Vec<(String, Value)>) + Send + Sync + 'static,
) -> OSAction {
    OSAction {
        name: name.into(),
        event_kind: event_kind.into(),
        params: params.iter().map(|p| p.to_string()).collect(),
        poss: Arc::new(move |args, z| poss(&names(args), z)),
        effect: Arc::new(move |args, _| {
            let (delta, attributes) = effect(&names(args));
            Effect { delta, attributes }
        }),
        candidates: None,
    }
}

fn delta(add: &[Fluent], remove: &[Fluent]) -> Delta {
    Delta {
        add: add.iter().cloned().collect(),
        remove: remove.iter().cloned().collect(),
    }
}

pub fn spec_from(initial: FCState) -> OSSpec {
    let pickup = action(
        "Pickup",
        "pickup",
        &["AGENT", "OBJECT", "ROOM"],
        |x, z| {
            let [a, o, r] = [x[0], x[1], x[2]];
            z.holds(&f("AgentInRoom", &[a, r]))
                && z.holds(&f("ObjectInRoom", &[o, r]))
                && !z.holds(&f("Carries", &[a, o]))
        },
        |x| {
            let [a, o, r] = [x[0], x[1], x[2]];
            (delta(&[f("Carries", &[a, o])], &[]), attrs(&[("a", a), ("o", o), ("r", r)]))
        },
    );
    let drop = action(
        "Drop",
        "drop",
        &["AGENT", "OBJECT", "ROOM"],
        |x, z| {
            let [a, o, r] = [x[0], x[1], x[2]];
            z.holds(&f("Carries", &[a, o])) && z.holds(&f("AgentInRoom", &[a, r]))
        },
        |x| {
            let [a, o, r] = [x[0], x[1], x[2]];
            (delta(&[], &[f("Carries", &[a, o])]), attrs(&[("a", a), ("o", o), ("r", r)]))
        },
    );
    let go_to_door = action(
        "GoToDoor",
        "walk",
        &["AGENT", "DOOR", "ROOM"],
        |x, z| {
            let [a, d, r] = [x[0], x[1], x[2]];
            z.holds(&f("AgentInRoom", &[a, r]))
                && ROOMS.iter().any(|r2| connects(r, d, r2))
                && !DOORS.iter().any(|d2| z.holds(&f("AtDoor", &[a, d2])))
        },
        |x| {
            let [a, d] = [x[0], x[1]];
            (delta(&[f("AtDoor", &[a, d])], &[]), attrs(&[("a", a), ("d", d)]))
        },
    );
    let enter_room = action(
        "EnterRoom",
        "walk",
        &["AGENT", "ROOM", "DOOR", "ROOM"],
        |x, z| {
            let [a, r, d, r2] = [x[0], x[1], x[2], x[3]];
            z.holds(&f("AgentInRoom", &[a, r]))
                && z.holds(&f("AtDoor", &[a, d]))
                && connects(r, d, r2)
                && !z.holds(&f("Closed", &[d]))
        },
        |x| {
            let [a, r, d, r2] = [x[0], x[1], x[2], x[3]];
            (
                delta(
                    &[f("AgentInRoom", &[a, r2])],
                    &[f("AgentInRoom", &[a, r]), f("AtDoor", &[a, d])],
                ),
                attrs(&[("a", a), ("r", r2)]),
            )
        },
    );
    let open = action(
        "Open",
        "open",
        &["AGENT", "DOOR"],
        |x, z| {
            let [a, d] = [x[0], x[1]];
            z.holds(&f("AtDoor", &[a, d])) && z.holds(&f("HasKeyCode", &[a, d])) && z.holds(&f("Closed", &[d]))
        },
        |x| {
            let [a, d] = [x[0], x[1]];
            (delta(&[], &[f("Closed", &[d])]), attrs(&[("a", a), ("d", d)]))
        },
    );
    let sort = |xs: &[&str]| xs.iter().map(|x| Value::sym(x)).collect::<Vec<_>>();
    OSSpec {
        name: "robots".into(),
        actions: vec![pickup, drop, go_to_door, enter_room, open],
        initial,
        sorts: BTreeMap::from([
            ("AGENT".to_string(), sort(&AGENTS)),
            ("ROOM".to_string(), sort(&ROOMS)),
            ("DOOR".to_string(), sort(&DOORS)),
            ("OBJECT".to_string(), sort(&OBJECTS)),
        ]),
    }
}

pub fn spec() -> OSSpec {
    spec_from(initial_state())
}

/// The example ten-action run.
pub const SCRIPT: &str = include_str!("../../programs/robots.script");
/// The example ten-event trace.
pub const TRACE: &str = include_str!("../../programs/robots.trace");
