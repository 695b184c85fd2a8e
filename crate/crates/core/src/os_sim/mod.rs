//! Executable observational semantics in the simple fluent calculus.
//!
//! A state is a finite set of ground fluents, so composition is set union
//! and removal is set difference. An [`OSSpec`] lists actions with a
//! precondition (`Poss`) and a state update that also yields the extracted
//! trace event. Specifications are independent of the CHR engine and serve
//! as oracles for it.

pub mod fibonacci;
pub mod robots;
pub mod script;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A ground fluent argument.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    List(Vec<i64>),
    Sym(String),
}

impl Value {
    pub fn sym(s: &str) -> Value {
        Value::Sym(s.to_string())
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[i64]> {
        match self {
            Value::List(l) => Some(l),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Sym(s) => f.write_str(s),
            Value::List(l) => {
                let items: Vec<_> = l.iter().map(i64::to_string).collect();
                write!(f, "[{}]", items.join(","))
            }
        }
    }
}

impl std::str::FromStr for Value {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some(inner) = s.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            let items = inner
                .split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<i64>().map_err(|_| format!("bad list item `{t}`")))
                .collect::<Result<_, _>>()?;
            return Ok(Value::List(items));
        }
        if let Ok(i) = s.parse::<i64>() {
            return Ok(Value::Int(i));
        }
        if s.is_empty() || !s.chars().all(|c| c.is_alphanumeric() || c == '_') {
            return Err(format!("bad value `{s}`"));
        }
        Ok(Value::Sym(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Fluent {
    pub symbol: String,
    pub args: Vec<Value>,
}

impl Fluent {
    pub fn new(symbol: &str, args: Vec<Value>) -> Fluent {
        Fluent {
            symbol: symbol.to_string(),
            args,
        }
    }

    /// A fluent whose arguments are all symbols.
    pub fn syms(symbol: &str, args: &[&str]) -> Fluent {
        Fluent::new(symbol, args.iter().map(|a| Value::sym(a)).collect())
    }
}

impl fmt::Display for Fluent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let args: Vec<_> = self.args.iter().map(Value::to_string).collect();
        write!(f, "{}({})", self.symbol, args.join(","))
    }
}

/// A state: a set of fluents. `∅` is the empty set and `∘` is union.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FCState(BTreeSet<Fluent>);

impl FCState {
    pub fn empty() -> FCState {
        FCState::default()
    }

    pub fn fluent(f: Fluent) -> FCState {
        FCState(BTreeSet::from([f]))
    }

    /// `Holds(f, z)`.
    pub fn holds(&self, f: &Fluent) -> bool {
        self.0.contains(f)
    }

    /// `z1 ∘ z2`.
    pub fn compose(&self, other: &FCState) -> FCState {
        FCState(self.0.union(&other.0).cloned().collect())
    }

    /// `z1 - z2`: the fluents of `z1` that do not hold in `z2`.
    pub fn minus(&self, other: &FCState) -> FCState {
        FCState(self.0.difference(&other.0).cloned().collect())
    }

    pub fn with(&self, f: Fluent) -> FCState {
        self.compose(&FCState::fluent(f))
    }

    pub fn without(&self, f: &Fluent) -> FCState {
        let mut s = self.clone();
        s.0.remove(f);
        s
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Fluent> {
        self.0.iter()
    }

    /// Fluents with the given symbol.
    pub fn with_symbol<'a>(&'a self, symbol: &'a str) -> impl Iterator<Item = &'a Fluent> + 'a {
        self.0.iter().filter(move |f| f.symbol == symbol)
    }

    /// Fluents holding in exactly one of the two states.
    pub fn symmetric_difference(&self, other: &FCState) -> FCState {
        FCState(self.0.symmetric_difference(&other.0).cloned().collect())
    }
}

impl FromIterator<Fluent> for FCState {
    fn from_iter<I: IntoIterator<Item = Fluent>>(iter: I) -> Self {
        FCState(iter.into_iter().collect())
    }
}

impl fmt::Display for FCState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("∅");
        }
        let items: Vec<_> = self.0.iter().map(Fluent::to_string).collect();
        f.write_str(&items.join(" ∘ "))
    }
}

/// `ϑ+` and `ϑ-` of a state update: `State(s) ∘ ϑ+ - ϑ-`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Delta {
    pub add: FCState,
    pub remove: FCState,
}

impl Delta {
    pub fn apply(&self, z: &FCState) -> FCState {
        z.compose(&self.add).minus(&self.remove)
    }

    /// Fluents the update is allowed to touch.
    pub fn declared(&self) -> FCState {
        self.add.compose(&self.remove)
    }
}

/// A trace event `w`: its kind and attribute values.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OsEvent {
    pub chrono: u64,
    pub kind: String,
    pub attributes: BTreeMap<String, Value>,
    /// Attribute values in declaration order.
    #[serde(skip)]
    pub values: Vec<Value>,
}

impl fmt::Display for OsEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.chrono, self.kind)?;
        for v in &self.values {
            write!(f, " {v}")?;
        }
        Ok(())
    }
}

/// Result of a state update axiom: the update and the event attributes.
pub struct Effect {
    pub delta: Delta,
    pub attributes: Vec<(String, Value)>,
}

type Poss = dyn Fn(&[Value], &FCState) -> bool + Send + Sync;
type Update = dyn Fn(&[Value], &FCState) -> Effect + Send + Sync;
type Candidates = dyn Fn(&FCState) -> Vec<Vec<Value>> + Send + Sync;

/// One action type: `AType`, `ACond` (Poss), `VSEffect` and `Etrace`.
#[derive(Clone)]
pub struct OSAction {
    pub name: String,
    pub event_kind: String,
    /// Parameter sorts, used to enumerate ground argument lists.
    pub params: Vec<String>,
    pub poss: Arc<Poss>,
    pub effect: Arc<Update>,
    /// Overrides enumeration over `params` (for sorts with infinite domains).
    pub candidates: Option<Arc<Candidates>>,
}

impl fmt::Debug for OSAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OSAction")
            .field("name", &self.name)
            .field("event_kind", &self.event_kind)
            .field("params", &self.params)
            .finish()
    }
}

/// `<S, R_O, A, E, T, S_0>`
#[derive(Clone, Debug)]
pub struct OSSpec {
    pub name: String,
    pub actions: Vec<OSAction>,
    pub initial: FCState,
    /// Finite domain of each sort.
    pub sorts: BTreeMap<String, Vec<Value>>,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum OsError {
    #[error("{action}({}) is not possible", render_args(args))]
    NotPossible { action: String, args: Vec<Value> },
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("{action} takes {expected} arguments, got {got}")]
    Arity {
        action: String,
        expected: usize,
        got: usize,
    },
}

fn render_args(args: &[Value]) -> String {
    args.iter().map(Value::to_string).collect::<Vec<_>>().join(",")
}

impl OSSpec {
    pub fn action(&self, name: &str) -> Option<&OSAction> {
        self.actions.iter().find(|a| a.name.eq_ignore_ascii_case(name))
    }

    /// Ground argument lists for `a` in state `z`, possible or not.
    pub fn candidates(&self, a: &OSAction, z: &FCState) -> Vec<Vec<Value>> {
        if let Some(c) = &a.candidates {
            return c(z);
        }
        let mut out: Vec<Vec<Value>> = vec![Vec::new()];
        for sort in &a.params {
            let dom = self.sorts.get(sort).cloned().unwrap_or_default();
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    dom.iter().map(move |v| {
                        let mut p = prefix.clone();
                        p.push(v.clone());
                        p
                    })
                })
                .collect();
        }
        out
    }

    pub fn start(&self) -> Situation {
        Situation {
            initial: self.initial.clone(),
            history: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HistoryEntry {
    pub action: String,
    pub args: Vec<Value>,
    pub event: OsEvent,
    /// State after the action.
    pub state: FCState,
}

/// `Do(R_n, x_n, w_n, ... Do(R_1, x_1, w_1, S_0))`
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Situation {
    pub initial: FCState,
    pub history: Vec<HistoryEntry>,
}

impl Situation {
    /// `State(s)`.
    pub fn current(&self) -> &FCState {
        self.history.last().map_or(&self.initial, |h| &h.state)
    }
}

/// `Holds(f, z)`.
pub fn holds(f: &Fluent, z: &FCState) -> bool {
    z.holds(f)
}

/// Executes one action. An empty `args` list for an action with parameters
/// picks the first possible candidate argument list.
pub fn do_action(spec: &OSSpec, name: &str, args: &[Value], sit: &Situation) -> Result<Situation, OsError> {
    let action = spec.action(name).ok_or_else(|| OsError::UnknownAction(name.to_string()))?;
    let z = sit.current();
    let args: Vec<Value> = if args.is_empty() && !action.params.is_empty() {
        spec.candidates(action, z)
            .into_iter()
            .find(|c| (action.poss)(c, z))
            .ok_or_else(|| OsError::NotPossible {
                action: action.name.clone(),
                args: Vec::new(),
            })?
    } else {
        args.to_vec()
    };
    if args.len() != action.params.len() {
        return Err(OsError::Arity {
            action: action.name.clone(),
            expected: action.params.len(),
            got: args.len(),
        });
    }
    if !(action.poss)(&args, z) {
        return Err(OsError::NotPossible {
            action: action.name.clone(),
            args,
        });
    }
    let effect = (action.effect)(&args, z);
    let state = effect.delta.apply(z);
    let event = OsEvent {
        chrono: sit.history.len() as u64 + 1,
        kind: action.event_kind.clone(),
        values: effect.attributes.iter().map(|(_, v)| v.clone()).collect(),
        attributes: effect.attributes.into_iter().collect(),
    };
    let mut next = sit.clone();
    next.history.push(HistoryEntry {
        action: action.name.clone(),
        args,
        event,
        state,
    });
    Ok(next)
}

/// `Extraction(n, s)`: the events of the situation, chrono 1 first.
pub fn extraction(sit: &Situation) -> Vec<OsEvent> {
    sit.history.iter().map(|h| h.event.clone()).collect()
}

pub const OS_NS: &str = "http://orcas.org.br/chrv/os";

/// Events as XML: one `event` element per event carrying its chrono and
/// kind, with one child element per attribute.
pub fn events_to_xml(spec: &str, events: &[OsEvent]) -> String {
    use quick_xml::escape::escape;
    use std::fmt::Write as _;

    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = write!(out, "<trace xmlns=\"{OS_NS}\" spec=\"{}\"", escape(spec));
    if events.is_empty() {
        out.push_str("/>\n");
        return out;
    }
    out.push_str(">\n");
    for e in events {
        let _ = writeln!(out, "\t<event chrono=\"{}\" kind=\"{}\">", e.chrono, escape(&e.kind));
        for (name, value) in &e.attributes {
            let _ = writeln!(out, "\t\t<{name}>{}</{name}>", escape(value.to_string()));
        }
        out.push_str("\t</event>\n");
    }
    out.push_str("</trace>\n");
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScriptFailure {
    /// Zero-based position of the failing step.
    pub index: usize,
    pub error: OsError,
}

/// Runs a script from `S_0`, stopping at the first impossible action.
pub fn run_script(spec: &OSSpec, script: &[(String, Vec<Value>)]) -> (Situation, Option<ScriptFailure>) {
    let mut sit = spec.start();
    for (index, (name, args)) in script.iter().enumerate() {
        match do_action(spec, name, args, &sit) {
            Ok(next) => sit = next,
            Err(error) => return (sit, Some(ScriptFailure { index, error })),
        }
    }
    (sit, None)
}

/// Finds, for each observed event, an action that is possible in the
/// current state and extracts exactly that event. The first such action in
/// spec order, with argument lists in enumeration order, is taken.
pub fn replay(spec: &OSSpec, events: &[(String, Vec<Value>)]) -> (Situation, Option<usize>) {
    let mut sit = spec.start();
    'events: for (index, (kind, values)) in events.iter().enumerate() {
        let z = sit.current().clone();
        for action in spec.actions.iter().filter(|a| a.event_kind.eq_ignore_ascii_case(kind)) {
            for args in spec.candidates(action, &z) {
                if !(action.poss)(&args, &z) {
                    continue;
                }
                let effect = (action.effect)(&args, &z);
                let extracted: Vec<_> = effect.attributes.iter().map(|(_, v)| v.clone()).collect();
                if &extracted == values {
                    sit = do_action(spec, &action.name, &args, &sit).expect("possibility checked");
                    continue 'events;
                }
            }
        }
        return (sit, Some(index));
    }
    (sit, None)
}

/// The spec shipped under `name`.
pub fn builtin_spec(name: &str) -> Option<OSSpec> {
    match name.to_ascii_lowercase().as_str() {
        "fibonacci" | "fib" => Some(fibonacci::spec()),
        "robots" | "robot" => Some(robots::spec()),
        _ => None,
    }
}
