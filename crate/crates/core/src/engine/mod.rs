//! Execution of CHR programs under the theoretical operational semantics.
//!
//! The transition relation is non-deterministic; [`Engine`] fixes one
//! strategy:
//!
//! * the goal is processed newest rule body first (see [`Goal`]);
//! * after every transition, Apply is tried before the next goal constraint;
//! * rules are tried in program order and head partners oldest id first;
//! * builtin body constraints of a fired rule are told to the builtin store
//!   as part of the Apply transition, user-defined ones go to the goal.
//!
//! Every transition is reported exactly once to the caller, either as the
//! return value of [`Engine::step`] or through the sink passed to [`run`].

mod matching;
mod state;
mod unify;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lang::{Constraint, Program, Query};

pub use matching::{apply_step, find_apply, guard_entailed, MatchResult, RuleInstance};
pub use state::{
    init_state, introduce_step, solve_step, ExecutionState, Goal, IdentifiedConstraint,
    PropagationRecord,
};
pub use unify::{BuiltinStore, Substitution, UnifyError};

pub const DEFAULT_BUDGET: usize = 10_000;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("transition budget of {budget} exhausted (the program may not terminate)")]
    BudgetExceeded { budget: usize },
    #[error("transition precondition violated: {0}")]
    Precondition(String),
    #[error("budget must be positive")]
    InvalidBudget,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    Init,
    Solve(Constraint),
    Introduce { constraint: Constraint, id: u64 },
    Apply(Box<MatchResult>),
    Fail,
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::Init => "init",
            Action::Solve(_) => "solve",
            Action::Introduce { .. } => "introduce",
            Action::Apply(_) => "apply",
            Action::Fail => "fail",
        }
    }
}

/// One transition with the states on either side.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transition {
    pub action: Action,
    pub pre: ExecutionState,
    pub post: ExecutionState,
}

impl Transition {
    pub fn matched(&self) -> Option<&MatchResult> {
        match &self.action {
            Action::Apply(m) => Some(m),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    /// No transition applies and the builtin store is consistent.
    Quiescent,
    /// The builtin store became inconsistent; a Fail transition was taken.
    Failed,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FinalState {
    pub state: ExecutionState,
    pub outcome: Outcome,
    pub transitions: usize,
}

/// A steppable run of one program on one query.
#[derive(Clone, Debug)]
pub struct Engine {
    program: Program,
    query: Query,
    state: Option<ExecutionState>,
    outcome: Option<Outcome>,
    transitions: usize,
    budget: usize,
}

impl Engine {
    pub fn new(program: Program, query: Query, budget: usize) -> Result<Self, EngineError> {
        if budget == 0 {
            return Err(EngineError::InvalidBudget);
        }
        Ok(Engine {
            program,
            query,
            state: None,
            outcome: None,
            transitions: 0,
            budget,
        })
    }

    pub fn program(&self) -> &Program {
        &self.program
    }

    pub fn query(&self) -> &Query {
        &self.query
    }

    /// Current state; `None` before the Init transition.
    pub fn state(&self) -> Option<&ExecutionState> {
        self.state.as_ref()
    }

    pub fn outcome(&self) -> Option<Outcome> {
        self.outcome
    }

    pub fn transitions(&self) -> usize {
        self.transitions
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn is_finished(&self) -> bool {
        self.outcome.is_some()
    }

    fn next_transition(&self) -> Result<Option<Transition>, EngineError> {
        let Some(s) = &self.state else {
            return Ok(Some(Transition {
                action: Action::Init,
                pre: ExecutionState::default(),
                post: init_state(&self.query),
            }));
        };
        if !s.bics.consistent {
            return Ok(Some(Transition {
                action: Action::Fail,
                pre: s.clone(),
                post: s.clone(),
            }));
        }
        if let Some(m) = find_apply(s, &self.program) {
            let post = apply_step(s, &m)?;
            return Ok(Some(Transition {
                action: Action::Apply(Box::new(m)),
                pre: s.clone(),
                post,
            }));
        }
        let Some(top) = s.goal.top() else {
            return Ok(None);
        };
        let (action, post) = if top.is_builtin() {
            (Action::Solve(top.clone()), solve_step(s, top)?)
        } else {
            let action = Action::Introduce {
                constraint: top.clone(),
                id: s.next_id,
            };
            (action, introduce_step(s, top)?)
        };
        Ok(Some(Transition {
            action,
            pre: s.clone(),
            post,
        }))
    }

    /// Performs one transition. Returns `Ok(None)` once the run is over.
    pub fn step(&mut self) -> Result<Option<Transition>, EngineError> {
        if self.outcome.is_some() {
            return Ok(None);
        }
        let Some(t) = self.next_transition()? else {
            self.outcome = Some(Outcome::Quiescent);
            return Ok(None);
        };
        if self.transitions >= self.budget {
            return Err(EngineError::BudgetExceeded { budget: self.budget });
        }
        self.transitions += 1;
        if t.action == Action::Fail {
            self.outcome = Some(Outcome::Failed);
        }
        self.state = Some(t.post.clone());
        Ok(Some(t))
    }
}

/// Runs `p` on `q` to completion, reporting every transition to `sink`.
pub fn run(
    p: &Program,
    q: &Query,
    mut sink: impl FnMut(&Transition),
    budget: usize,
) -> Result<FinalState, EngineError> {
    let mut engine = Engine::new(p.clone(), q.clone(), budget)?;
    while let Some(t) = engine.step()? {
        sink(&t);
    }
    Ok(FinalState {
        state: engine.state.expect("Init always runs"),
        outcome: engine.outcome.expect("finished"),
        transitions: engine.transitions,
    })
}
