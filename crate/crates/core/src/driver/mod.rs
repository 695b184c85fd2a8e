//! Mediates between a traced engine run and any number of analyzers.
//!
//! The driver owns one session at a time. Every transition of the session
//! is extracted into the full trace, then offered to each registered
//! analyzer whose filter matches. Filters never affect what is recorded.

mod filter;
pub mod protocol;
pub mod server;

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Action, Engine, EngineError, ExecutionState, DEFAULT_BUDGET};
use crate::lang::{Program, Query};
use crate::tracer::{to_xml, ActualTraceEvent, Trace, Tracer};

pub use filter::{FilterError, FilterQuery};

/// What an analyzer asks the driver to do after seeing an event.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Directive {
    #[default]
    Proceed,
    Pause,
    End,
}

/// Receives the events an analyzer asked for.
pub trait Sink: Send {
    fn deliver(&mut self, e: &ActualTraceEvent) -> Result<Directive, String>;
}

impl<F> Sink for F
where
    F: FnMut(&ActualTraceEvent) -> Result<Directive, String> + Send,
{
    fn deliver(&mut self, e: &ActualTraceEvent) -> Result<Directive, String> {
        self(e)
    }
}

/// A sink that stores what it receives; clones share the same buffer.
#[derive(Clone, Debug, Default)]
pub struct Mailbox(Arc<Mutex<Vec<ActualTraceEvent>>>);

impl Mailbox {
    pub fn new() -> Self {
        Mailbox::default()
    }

    pub fn events(&self) -> Vec<ActualTraceEvent> {
        self.0.lock().expect("mailbox lock").clone()
    }

    pub fn take(&self) -> Vec<ActualTraceEvent> {
        std::mem::take(&mut *self.0.lock().expect("mailbox lock"))
    }

    pub fn chronos(&self) -> Vec<u64> {
        self.events().iter().map(|e| e.chrono).collect()
    }
}

impl Sink for Mailbox {
    fn deliver(&mut self, e: &ActualTraceEvent) -> Result<Directive, String> {
        self.0.lock().map_err(|e| e.to_string())?.push(e.clone());
        Ok(Directive::Proceed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DriverConfig {
    pub step_by_step: bool,
    pub budget: usize,
}

impl Default for DriverConfig {
    fn default() -> Self {
        DriverConfig {
            step_by_step: false,
            budget: DEFAULT_BUDGET,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionStatus {
    /// No session loaded, or loaded and not yet started.
    Idle,
    Paused,
    Running,
    /// Reached a state where no transition applies.
    Finished,
    /// Took a Fail transition.
    Failed,
    /// Ran out of transition budget.
    Exhausted,
    /// Terminated by `end`.
    Ended,
}

impl SessionStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SessionStatus::Idle => "idle",
            SessionStatus::Paused => "paused",
            SessionStatus::Running => "running",
            SessionStatus::Finished => "finished",
            SessionStatus::Failed => "failed",
            SessionStatus::Exhausted => "exhausted",
            SessionStatus::Ended => "ended",
        }
    }

    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            SessionStatus::Finished | SessionStatus::Failed | SessionStatus::Exhausted | SessionStatus::Ended
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Pause,
    Continue,
    End,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum DriverError {
    #[error("analyzer `{0}` is already registered")]
    DuplicateAnalyzer(String),
    #[error("no analyzer `{0}`")]
    UnknownAnalyzer(String),
    #[error("the driver is not in step-by-step mode")]
    NotStepMode,
    #[error("no active session")]
    NoActiveSession,
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Lets another thread pause an auto-running session between transitions.
#[derive(Clone, Debug, Default)]
pub struct PauseHandle(Arc<AtomicBool>);

impl PauseHandle {
    pub fn pause(&self) {
        self.0.store(true, Ordering::SeqCst);
    }

    fn clear(&self) {
        self.0.store(false, Ordering::SeqCst);
    }

    pub fn is_requested(&self) -> bool {
        self.0.load(Ordering::SeqCst)
    }
}

struct Analyzer {
    id: String,
    request: FilterQuery,
    sink: Box<dyn Sink>,
}

struct Session {
    engine: Engine,
    tracer: Tracer,
    states: Vec<ExecutionState>,
    status: SessionStatus,
}

pub struct Driver {
    config: DriverConfig,
    analyzers: Vec<Analyzer>,
    session: Option<Session>,
    /// Trace of the most recent session, kept after it ends.
    finished: Option<(Trace, Vec<ExecutionState>)>,
    pause: PauseHandle,
}

impl Driver {
    pub fn new(config: DriverConfig) -> Result<Self, DriverError> {
        if config.budget == 0 {
            return Err(EngineError::InvalidBudget.into());
        }
        Ok(Driver {
            config,
            analyzers: Vec::new(),
            session: None,
            finished: None,
            pause: PauseHandle::default(),
        })
    }

    pub fn config(&self) -> DriverConfig {
        self.config
    }

    pub fn set_config(&mut self, config: DriverConfig) -> Result<(), DriverError> {
        if config.budget == 0 {
            return Err(EngineError::InvalidBudget.into());
        }
        self.config = config;
        Ok(())
    }

    pub fn pause_handle(&self) -> PauseHandle {
        self.pause.clone()
    }

    pub fn register_analyzer(
        &mut self,
        id: impl Into<String>,
        request: FilterQuery,
        sink: impl Sink + 'static,
    ) -> Result<String, DriverError> {
        let id = id.into();
        if self.analyzers.iter().any(|a| a.id == id) {
            return Err(DriverError::DuplicateAnalyzer(id));
        }
        request.check()?;
        self.analyzers.push(Analyzer {
            id: id.clone(),
            request,
            sink: Box::new(sink),
        });
        Ok(id)
    }

    pub fn unregister_analyzer(&mut self, id: &str) -> Result<(), DriverError> {
        let before = self.analyzers.len();
        self.analyzers.retain(|a| a.id != id);
        if self.analyzers.len() == before {
            return Err(DriverError::UnknownAnalyzer(id.to_string()));
        }
        Ok(())
    }

    pub fn analyzer_ids(&self) -> Vec<String> {
        self.analyzers.iter().map(|a| a.id.clone()).collect()
    }

    pub fn filter_of(&self, id: &str) -> Option<&FilterQuery> {
        self.analyzers.iter().find(|a| a.id == id).map(|a| &a.request)
    }

    pub fn update_filter(&mut self, id: &str, q: FilterQuery) -> Result<(), DriverError> {
        q.check()?;
        let a = self
            .analyzers
            .iter_mut()
            .find(|a| a.id == id)
            .ok_or_else(|| DriverError::UnknownAnalyzer(id.to_string()))?;
        a.request = q;
        Ok(())
    }

    /// Starts a new session, discarding any current one.
    pub fn load(&mut self, program: Program, query: Query) -> Result<(), DriverError> {
        let engine = Engine::new(program, query, self.config.budget)?;
        self.end_session();
        self.pause.clear();
        self.session = Some(Session {
            engine,
            tracer: Tracer::new(),
            states: Vec::new(),
            status: SessionStatus::Idle,
        });
        Ok(())
    }

    pub fn status(&self) -> SessionStatus {
        match (&self.session, &self.finished) {
            (Some(s), _) => s.status,
            (None, Some(_)) => SessionStatus::Ended,
            (None, None) => SessionStatus::Idle,
        }
    }

    fn active(&mut self) -> Result<&mut Session, DriverError> {
        self.session.as_mut().ok_or(DriverError::NoActiveSession)
    }

    /// Offers an event to every analyzer; returns the strongest directive.
    pub fn notify(&mut self, e: &ActualTraceEvent) -> Directive {
        let mut directive = Directive::Proceed;
        for a in &mut self.analyzers {
            if !a.request.matches(e) {
                continue;
            }
            match a.sink.deliver(e) {
                Ok(Directive::End) => directive = Directive::End,
                Ok(Directive::Pause) if directive == Directive::Proceed => directive = Directive::Pause,
                Ok(_) => {}
                Err(err) => log::warn!("analyzer `{}` failed on chrono {}: {err}", a.id, e.chrono),
            }
        }
        directive
    }

    /// Advances the engine by one transition without the step-mode check.
    fn advance(&mut self) -> Result<Option<(ActualTraceEvent, Directive)>, DriverError> {
        let session = self.active()?;
        if session.status.is_terminal() {
            return Ok(None);
        }
        let t = match session.engine.step() {
            Ok(Some(t)) => t,
            Ok(None) => {
                session.status = SessionStatus::Finished;
                return Ok(None);
            }
            Err(e) => {
                session.status = SessionStatus::Exhausted;
                return Err(e.into());
            }
        };
        let event = session.tracer.record(&t).clone();
        session.states.push(t.post.clone());
        session.status = if t.action == Action::Fail {
            SessionStatus::Failed
        } else if session.engine.is_finished() {
            SessionStatus::Finished
        } else {
            SessionStatus::Paused
        };
        let directive = self.notify(&event);
        Ok(Some((event, directive)))
    }

    /// Performs exactly one transition and returns its event, or `None`
    /// once the run is over.
    pub fn new_step(&mut self) -> Result<Option<ActualTraceEvent>, DriverError> {
        if !self.config.step_by_step {
            return Err(DriverError::NotStepMode);
        }
        let Some((event, directive)) = self.advance()? else {
            return Ok(None);
        };
        if directive == Directive::End {
            self.end_session();
        }
        Ok(Some(event))
    }

    pub fn control(&mut self, cmd: Command) -> Result<SessionStatus, DriverError> {
        let status = self.active()?.status;
        match cmd {
            Command::Pause => {
                self.pause.pause();
                if status == SessionStatus::Idle || status == SessionStatus::Running {
                    self.active()?.status = SessionStatus::Paused;
                }
            }
            Command::Continue => {
                self.pause.clear();
                if !status.is_terminal() {
                    self.active()?.status = SessionStatus::Running;
                }
                loop {
                    if self.pause.is_requested() {
                        let s = self.active()?;
                        if !s.status.is_terminal() {
                            s.status = SessionStatus::Paused;
                        }
                        break;
                    }
                    match self.advance() {
                        Ok(Some((_, Directive::Proceed))) => {}
                        Ok(Some((_, Directive::Pause))) => self.pause.pause(),
                        Ok(Some((_, Directive::End))) => {
                            self.end_session();
                            return Ok(SessionStatus::Ended);
                        }
                        Ok(None) | Err(DriverError::Engine(EngineError::BudgetExceeded { .. })) => break,
                        Err(e) => return Err(e),
                    }
                }
            }
            Command::End => {
                self.end_session();
                return Ok(SessionStatus::Ended);
            }
        }
        Ok(self.status())
    }

    fn end_session(&mut self) {
        if let Some(s) = self.session.take() {
            self.finished = Some((s.tracer.into_trace(), s.states));
        }
    }

    /// The full trace of the current session, or of the last ended one.
    pub fn trace(&self) -> Option<&Trace> {
        match (&self.session, &self.finished) {
            (Some(s), _) => Some(s.tracer.trace()),
            (None, Some((t, _))) => Some(t),
            (None, None) => None,
        }
    }

    /// Virtual state right after the event with the given chrono.
    pub fn snapshot(&self, chrono: u64) -> Option<&ExecutionState> {
        let states = match (&self.session, &self.finished) {
            (Some(s), _) => &s.states,
            (None, Some((_, st))) => st,
            (None, None) => return None,
        };
        states.get(usize::try_from(chrono).ok()?.checked_sub(1)?)
    }

    /// Retrospective query over the stored full trace.
    pub fn fetch(&self, range: Option<(u64, u64)>, query: &FilterQuery) -> Vec<ActualTraceEvent> {
        let Some(t) = self.trace() else {
            return Vec::new();
        };
        t.events
            .iter()
            .filter(|e| range.is_none_or(|(lo, hi)| lo <= e.chrono && e.chrono <= hi))
            .filter(|e| query.matches(e))
            .cloned()
            .collect()
    }

    pub fn export_xml(&self) -> Result<String, DriverError> {
        self.trace().map(to_xml).ok_or(DriverError::NoActiveSession)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{parse_program, parse_query};
    use crate::tracer::EventKind;

    const LEQ: &str = include_str!("../../programs/leq.chr");

    fn leq_driver(step: bool) -> Driver {
        let mut d = Driver::new(DriverConfig {
            step_by_step: step,
            budget: 100,
        })
        .unwrap();
        d.load(
            parse_program(LEQ).unwrap(),
            parse_query("leq(A,B), leq(B,C), leq(C,A)").unwrap(),
        )
        .unwrap();
        d
    }

    #[test]
    fn registration_errors() {
        let mut d = leq_driver(false);
        d.register_analyzer("a", FilterQuery::all(), Mailbox::new()).unwrap();
        assert_eq!(
            d.register_analyzer("a", FilterQuery::all(), Mailbox::new()),
            Err(DriverError::DuplicateAnalyzer("a".into()))
        );
        assert_eq!(
            d.update_filter("b", FilterQuery::all()),
            Err(DriverError::UnknownAnalyzer("b".into()))
        );
        assert!(d.update_filter("a", FilterQuery::range(3, 1)).is_err());
    }

    #[test]
    fn registered_but_not_run_receives_nothing() {
        let mut d = leq_driver(false);
        let m = Mailbox::new();
        d.register_analyzer("a", FilterQuery::all(), m.clone()).unwrap();
        assert!(m.events().is_empty());
        assert_eq!(d.status(), SessionStatus::Idle);
    }

    #[test]
    fn continue_runs_to_the_end() {
        let mut d = leq_driver(false);
        let all = Mailbox::new();
        let applies = Mailbox::new();
        let intros = Mailbox::new();
        d.register_analyzer("all", FilterQuery::all(), all.clone()).unwrap();
        d.register_analyzer("ap", FilterQuery::kinds([EventKind::Apply]), applies.clone()).unwrap();
        d.register_analyzer("in", FilterQuery::kinds([EventKind::Introduce]), intros.clone()).unwrap();
        assert_eq!(d.control(Command::Continue).unwrap(), SessionStatus::Finished);
        assert_eq!(all.chronos(), (1..=8).collect::<Vec<_>>());
        assert_eq!(applies.chronos(), [4, 7, 8]);
        assert_eq!(intros.chronos(), [2, 3, 5, 6]);
    }

    #[test]
    fn step_mode() {
        let mut d = leq_driver(false);
        assert_eq!(d.new_step(), Err(DriverError::NotStepMode));
        let mut d = leq_driver(true);
        for chrono in 1..=8 {
            assert_eq!(d.new_step().unwrap().unwrap().chrono, chrono);
        }
        assert_eq!(d.new_step().unwrap(), None);
        assert_eq!(d.status(), SessionStatus::Finished);
        let mut idle = Driver::new(DriverConfig {
            step_by_step: true,
            budget: 10,
        })
        .unwrap();
        assert_eq!(idle.new_step(), Err(DriverError::NoActiveSession));
        assert_eq!(idle.control(Command::Continue), Err(DriverError::NoActiveSession));
    }

    #[test]
    fn filter_swap_between_steps() {
        let mut d = leq_driver(true);
        let m = Mailbox::new();
        d.register_analyzer("a", FilterQuery::range(1, 3), m.clone()).unwrap();
        for _ in 0..3 {
            d.new_step().unwrap();
        }
        d.update_filter("a", FilterQuery::range(4, 8)).unwrap();
        d.control(Command::Continue).unwrap();
        assert_eq!(m.chronos(), (1..=8).collect::<Vec<_>>());
    }

    #[test]
    fn end_finalizes_the_trace() {
        let mut d = leq_driver(true);
        for _ in 0..3 {
            d.new_step().unwrap();
        }
        assert_eq!(d.control(Command::End).unwrap(), SessionStatus::Ended);
        assert_eq!(d.trace().unwrap().len(), 3);
        crate::tracer::validate_xml(&d.export_xml().unwrap()).unwrap();
        assert_eq!(d.new_step(), Err(DriverError::NoActiveSession));
        assert_eq!(d.snapshot(3).unwrap().next_id, 3);
    }

    #[test]
    fn pause_is_idempotent_and_analyzers_can_pause() {
        let mut d = leq_driver(false);
        assert_eq!(d.control(Command::Pause).unwrap(), SessionStatus::Paused);
        assert_eq!(d.control(Command::Pause).unwrap(), SessionStatus::Paused);
        d.register_analyzer(
            "stopper",
            FilterQuery::kinds([EventKind::Apply]),
            |_: &ActualTraceEvent| Ok(Directive::Pause),
        )
        .unwrap();
        assert_eq!(d.control(Command::Continue).unwrap(), SessionStatus::Paused);
        assert_eq!(d.trace().unwrap().len(), 4);
        d.control(Command::Continue).unwrap();
        assert_eq!(d.trace().unwrap().len(), 7);
    }

    #[test]
    fn failing_sink_is_isolated() {
        let mut d = leq_driver(false);
        let m = Mailbox::new();
        d.register_analyzer("bad", FilterQuery::all(), |_: &ActualTraceEvent| Err("boom".to_string()))
            .unwrap();
        d.register_analyzer("good", FilterQuery::all(), m.clone()).unwrap();
        d.control(Command::Continue).unwrap();
        assert_eq!(m.events().len(), 8);
    }

    #[test]
    fn budget_exhaustion() {
        let mut d = Driver::new(DriverConfig {
            step_by_step: false,
            budget: 5,
        })
        .unwrap();
        d.load(parse_program("r@ p <=> p.").unwrap(), parse_query("p").unwrap())
            .unwrap();
        assert_eq!(d.control(Command::Continue).unwrap(), SessionStatus::Exhausted);
        assert_eq!(d.trace().unwrap().len(), 5);
    }

    #[test]
    fn fetch_is_retrospective() {
        let mut d = leq_driver(false);
        d.control(Command::Continue).unwrap();
        let got: Vec<_> = d
            .fetch(None, &FilterQuery::contains("rule", "r2"))
            .iter()
            .map(|e| e.chrono)
            .collect();
        assert_eq!(got, [7, 8]);
        assert_eq!(d.fetch(Some((2, 3)), &FilterQuery::all()).len(), 2);
    }
}
