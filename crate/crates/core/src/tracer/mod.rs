//! Extraction of actual trace events from engine transitions, and the XML
//! trace format.

pub mod dom;
pub mod schema;
mod xml;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Action, EngineError, Engine, ExecutionState, FinalState, Transition};
use crate::lang::{render_list, Program, Query};

pub use schema::{Schema, SchemaError, CHRV_XSD};
pub use xml::{canonicalize, from_xml, to_xml, validate_xml, CHRV_NS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum EventKind {
    InitialState,
    Solve,
    Introduce,
    Apply,
    Fail,
}

impl EventKind {
    pub const ALL: [EventKind; 5] = [
        EventKind::InitialState,
        EventKind::Solve,
        EventKind::Introduce,
        EventKind::Apply,
        EventKind::Fail,
    ];

    /// Element name used in XML and JSON.
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::InitialState => "initialState",
            EventKind::Solve => "solve",
            EventKind::Introduce => "introduce",
            EventKind::Apply => "apply",
            EventKind::Fail => "fail",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s) || (s == "init" && *k == EventKind::InitialState))
            .ok_or_else(|| format!("unknown event kind `{s}`"))
    }
}

/// Attribute values of one event. Absent attributes are `None`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attributes {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub udc: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bic: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hind: Option<u64>,
}

impl Attributes {
    pub const NAMES: [&'static str; 5] = ["rule", "goal", "udc", "bic", "hind"];

    /// Looks an attribute up by name; `hind` is rendered in decimal.
    pub fn get(&self, name: &str) -> Option<String> {
        match name {
            "rule" => self.rule.clone(),
            "goal" => self.goal.clone(),
            "udc" => self.udc.clone(),
            "bic" => self.bic.clone(),
            "hind" => self.hind.map(|h| h.to_string()),
            _ => None,
        }
    }

    /// Present attributes in the order the schema lists them for `kind`.
    pub fn ordered(&self, kind: EventKind) -> Vec<(&'static str, String)> {
        let order: &[&str] = match kind {
            EventKind::InitialState => &["goal", "hind"],
            EventKind::Introduce => &["udc", "goal", "hind"],
            EventKind::Solve => &["bic", "goal"],
            EventKind::Apply => &["rule", "goal", "udc", "bic"],
            EventKind::Fail => &["rule", "goal"],
        };
        order
            .iter()
            .filter_map(|n| self.get(n).map(|v| (*n, v)))
            .collect()
    }

    fn present(&self) -> Vec<&'static str> {
        Self::NAMES
            .into_iter()
            .filter(|n| self.get(n).is_some())
            .collect()
    }
}

/// `(t, a_t)`
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActualTraceEvent {
    pub chrono: u64,
    pub kind: EventKind,
    pub attributes: Attributes,
}

impl ActualTraceEvent {
    /// Checks that the attributes present are exactly those allowed for the
    /// event kind.
    pub fn check_discipline(&self) -> Result<(), TraceError> {
        let present = self.attributes.present();
        let has = |n: &str| present.contains(&n);
        let (required, optional): (&[&str], &[&str]) = match self.kind {
            EventKind::InitialState => (&["goal", "hind"], &[]),
            EventKind::Introduce => (&["udc", "goal", "hind"], &[]),
            EventKind::Solve => (&["bic", "goal"], &[]),
            EventKind::Apply => (&["rule", "goal"], &["udc", "bic"]),
            EventKind::Fail => (&[], &["rule", "goal"]),
        };
        let bad = |message: String| TraceError::Schema {
            element: format!("event[@chrono={}]/{}", self.chrono, self.kind),
            message,
        };
        if let Some(missing) = required.iter().find(|n| !has(n)) {
            return Err(bad(format!("missing attribute `{missing}`")));
        }
        if let Some(extra) = present
            .iter()
            .find(|n| !required.contains(n) && !optional.contains(n))
        {
            return Err(bad(format!("attribute `{extra}` not allowed")));
        }
        if self.kind == EventKind::Fail && has("rule") == has("goal") {
            return Err(bad("fail carries exactly one of `rule` and `goal`".into()));
        }
        Ok(())
    }
}

/// The functional form `chrono kind attr((value)) ...`; empty attributes are
/// left out.
impl fmt::Display for ActualTraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.chrono, self.kind)?;
        for (name, value) in self.attributes.ordered(self.kind) {
            if value.is_empty() {
                continue;
            }
            if value.contains(", ") {
                write!(f, " {name}(({value}))")?;
            } else {
                write!(f, " {name}({value})")?;
            }
        }
        Ok(())
    }
}

/// `T^w = <s_0, w_1 ... w_n>`
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    pub initial_state: Option<ExecutionState>,
    pub events: Vec<ActualTraceEvent>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Chronos must run 1..n and every event must respect its kind.
    pub fn validate(&self) -> Result<(), TraceError> {
        check_chronos(self.events.iter().map(|e| e.chrono))?;
        self.events.iter().try_for_each(ActualTraceEvent::check_discipline)
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ChronoError {
    #[error("chrono {0} appears more than once")]
    Duplicate(u64),
    #[error("expected chrono {expected}, found {found}")]
    Gap { expected: u64, found: u64 },
    #[error("chrono `{0}` is not a positive integer")]
    NotNatural(String),
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum TraceError {
    #[error("{0}")]
    Xml(String),
    #[error("schema violation at {element}: {message}")]
    Schema { element: String, message: String },
    #[error(transparent)]
    Chrono(#[from] ChronoError),
}

pub(crate) fn check_chronos(chronos: impl IntoIterator<Item = u64>) -> Result<(), ChronoError> {
    let chronos: Vec<u64> = chronos.into_iter().collect();
    let mut seen = std::collections::HashSet::new();
    for &c in &chronos {
        if !seen.insert(c) {
            return Err(ChronoError::Duplicate(c));
        }
    }
    for (i, &c) in chronos.iter().enumerate() {
        let expected = i as u64 + 1;
        if c != expected {
            return Err(ChronoError::Gap { expected, found: c });
        }
    }
    Ok(())
}

/// Maps one transition to its trace event.
pub fn extract(t: &Transition, chrono: u64) -> ActualTraceEvent {
    let (pre, post) = (&t.pre, &t.post);
    let mut a = Attributes::default();
    let kind = match &t.action {
        Action::Init => {
            a.goal = Some(post.render_goal());
            a.hind = Some(post.next_id);
            EventKind::InitialState
        }
        Action::Solve(c) => {
            a.bic = Some(c.to_string());
            a.goal = Some(post.render_goal());
            EventKind::Solve
        }
        Action::Introduce { .. } => {
            a.udc = Some(post.render_store());
            a.goal = Some(post.render_goal());
            a.hind = Some(post.next_id);
            EventKind::Introduce
        }
        Action::Apply(m) => {
            let mut inst = m.instance();
            for c in inst.heads.iter_mut().chain(&mut inst.guard).chain(&mut inst.body) {
                *c = pre.bics.normalize_constraint(c);
            }
            a.rule = Some(inst.to_string());
            a.goal = Some(post.render_goal());
            let udc = post.render_store();
            if udc != pre.render_store() {
                a.udc = Some(udc);
            }
            if post.bics.equations != pre.bics.equations {
                a.bic = Some(post.render_bics());
            }
            EventKind::Apply
        }
        Action::Fail => {
            a.goal = Some(pre.render_goal());
            EventKind::Fail
        }
    };
    ActualTraceEvent {
        chrono,
        kind,
        attributes: a,
    }
}

/// Assigns chronos to transitions as they happen.
#[derive(Clone, Debug, Default)]
pub struct Tracer {
    trace: Trace,
}

impl Tracer {
    pub fn new() -> Self {
        Tracer::default()
    }

    pub fn next_chrono(&self) -> u64 {
        self.trace.events.len() as u64 + 1
    }

    pub fn record(&mut self, t: &Transition) -> &ActualTraceEvent {
        if t.action == Action::Init {
            self.trace.initial_state = Some(t.post.clone());
        }
        let e = extract(t, self.next_chrono());
        self.trace.events.push(e);
        self.trace.events.last().expect("just pushed")
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn into_trace(self) -> Trace {
        self.trace
    }
}

/// A traced run: the actual trace, the virtual state after every event and
/// how the run ended.
#[derive(Clone, Debug)]
pub struct TracedRun {
    pub trace: Trace,
    pub states: Vec<ExecutionState>,
    pub result: Result<FinalState, EngineError>,
}

pub fn run_traced(p: &Program, q: &Query, budget: usize) -> TracedRun {
    let mut tracer = Tracer::new();
    let mut states = Vec::new();
    let result = Engine::new(p.clone(), q.clone(), budget).and_then(|mut engine| {
        while let Some(t) = engine.step()? {
            tracer.record(&t);
            states.push(t.post);
        }
        Ok(FinalState {
            state: engine.state().cloned().expect("Init always runs"),
            outcome: engine.outcome().expect("finished"),
            transitions: engine.transitions(),
        })
    });
    TracedRun {
        trace: tracer.into_trace(),
        states,
        result,
    }
}

/// Renders the query as the initial goal attribute would.
pub fn render_query(q: &Query) -> String {
    render_list(&q.constraints)
}
