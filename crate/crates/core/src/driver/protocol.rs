//! Newline-delimited JSON messages for remote analyzers. The field names
//! here are the wire format; docs/protocol.md describes them.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Command, Driver, DriverConfig, DriverError, FilterQuery, Mailbox, SessionStatus};
use crate::engine::ExecutionState;
use crate::lang::{parse_program, parse_query};
use crate::tracer::ActualTraceEvent;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Request {
    Load {
        program: String,
        #[serde(default)]
        query: String,
        #[serde(default)]
        step: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        budget: Option<usize>,
    },
    Step,
    Control {
        cmd: Command,
    },
    Filter {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        analyzer: Option<String>,
        #[serde(default)]
        query: FilterQuery,
    },
    Fetch {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        range: Option<(u64, u64)>,
        #[serde(default)]
        query: FilterQuery,
        #[serde(default)]
        states: bool,
    },
    ExportXml,
    Status,
}

/// A request with its correlation id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<Value>,
    #[serde(flatten)]
    pub request: Request,
}

/// Full virtual state after one event.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub chrono: u64,
    pub goal: String,
    /// Store constraints with their ids, `c#i`.
    pub store: Vec<String>,
    pub bic: String,
    /// Propagation history entries, `r(i,j,...)`.
    pub history: Vec<String>,
    pub next_id: u64,
}

impl StateSnapshot {
    pub fn new(chrono: u64, s: &ExecutionState) -> Self {
        StateSnapshot {
            chrono,
            goal: s.render_goal(),
            store: s
                .store
                .iter()
                .map(|c| format!("{}#{}", s.bics.normalize_constraint(&c.constraint), c.id))
                .collect(),
            bic: s.render_bics(),
            history: s
                .history
                .iter()
                .map(|r| {
                    let ids: Vec<_> = r.ids.iter().map(u64::to_string).collect();
                    format!("{}({})", r.rule, ids.join(","))
                })
                .collect(),
            next_id: s.next_id,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Response {
    #[serde(default)]
    pub id: Option<Value>,
    pub ok: bool,
    pub status: Option<SessionStatus>,
    #[serde(default)]
    pub events: Vec<ActualTraceEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<Vec<StateSnapshot>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xml: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analyzer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Response {
    pub fn error(id: Option<Value>, message: impl Into<String>) -> Self {
        Response {
            id,
            ok: false,
            error: Some(message.into()),
            ..Response::default()
        }
    }
}

/// Per-connection state: the analyzer the connection owns and the events
/// delivered to it that have not been returned yet.
#[derive(Debug)]
pub struct Connection {
    pub analyzer: String,
    pub mailbox: Mailbox,
}

impl Connection {
    /// Registers a pass-everything analyzer for a new connection.
    pub fn open(driver: &mut Driver, analyzer: impl Into<String>) -> Result<Self, DriverError> {
        let mailbox = Mailbox::new();
        let analyzer = driver.register_analyzer(analyzer, FilterQuery::all(), mailbox.clone())?;
        Ok(Connection { analyzer, mailbox })
    }

    pub fn close(self, driver: &mut Driver) {
        let _ = driver.unregister_analyzer(&self.analyzer);
    }
}

fn dedup(mut events: Vec<ActualTraceEvent>) -> Vec<ActualTraceEvent> {
    events.sort_by_key(|e| e.chrono);
    events.dedup_by_key(|e| e.chrono);
    events
}

/// Executes one request. For `fetch`, `events` holds the query result. For
/// every other op it holds the events delivered to this connection's
/// analyzer since its previous response, whichever connection caused them.
pub fn handle(driver: &mut Driver, conn: &Connection, env: Envelope) -> Response {
    let id = env.id.clone();
    let is_fetch = matches!(env.request, Request::Fetch { .. });
    let mut resp = Response {
        id: id.clone(),
        ok: true,
        ..Response::default()
    };
    let result: Result<(), String> = (|| {
        match env.request {
            Request::Load {
                program,
                query,
                step,
                budget,
            } => {
                let p = parse_program(&program).map_err(|e| e.to_string())?;
                let q = parse_query(&query).map_err(|e| e.to_string())?;
                driver
                    .set_config(DriverConfig {
                        step_by_step: step,
                        budget: budget.unwrap_or(driver.config().budget),
                    })
                    .map_err(|e| e.to_string())?;
                driver.load(p, q).map_err(|e| e.to_string())?;
                conn.mailbox.take();
            }
            Request::Step => {
                driver.new_step().map_err(|e| e.to_string())?;
            }
            Request::Control { cmd } => {
                driver.control(cmd).map_err(|e| e.to_string())?;
            }
            Request::Filter { analyzer, query } => {
                let name = analyzer.unwrap_or_else(|| conn.analyzer.clone());
                if name != conn.analyzer && driver.filter_of(&name).is_none() {
                    return Err(DriverError::UnknownAnalyzer(name).to_string());
                }
                driver.update_filter(&name, query).map_err(|e| e.to_string())?;
                resp.analyzer = Some(name);
            }
            Request::Fetch { range, query, states } => {
                let events = driver.fetch(range, &query);
                if states {
                    resp.states = Some(
                        events
                            .iter()
                            .filter_map(|e| driver.snapshot(e.chrono).map(|s| StateSnapshot::new(e.chrono, s)))
                            .collect(),
                    );
                }
                resp.events = events;
            }
            Request::ExportXml => {
                resp.xml = Some(driver.export_xml().map_err(|e| e.to_string())?);
            }
            Request::Status => {}
        }
        Ok(())
    })();
    if !is_fetch {
        resp.events = dedup(conn.mailbox.take());
    }
    resp.status = Some(driver.status());
    if let Err(message) = result {
        resp.ok = false;
        resp.error = Some(message);
    }
    resp
}

/// Parses one request line and handles it.
pub fn handle_line(driver: &mut Driver, conn: &Connection, line: &str) -> Response {
    match serde_json::from_str::<Envelope>(line) {
        Ok(env) => handle(driver, conn, env),
        Err(e) => {
            let id = serde_json::from_str::<Value>(line)
                .ok()
                .and_then(|v| v.get("id").cloned());
            let mut r = Response::error(id, format!("bad request: {e}"));
            r.status = Some(driver.status());
            r
        }
    }
}
