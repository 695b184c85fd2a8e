//! Reconstruction of virtual states from an actual trace, and the
//! faithfulness check that compares them with the engine's own states.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::engine::{BuiltinStore, EngineError, ExecutionState, Outcome};
use crate::lang::{parse_constraint_list, render_list, Constraint, ParseError, Program, Query, Term};
use crate::tracer::{check_chronos, run_traced, ChronoError, EventKind, Trace};

/// What can be recovered of `<Q, U, B, P>_n` from the events seen so far.
/// The propagation history and constraint ids are never recoverable.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PartialVirtualState {
    pub goal: Option<Vec<Constraint>>,
    pub udcs: Option<Vec<Constraint>>,
    /// Told equations in order.
    pub bics: Option<Vec<Constraint>>,
    pub next_id: Option<u64>,
}

impl PartialVirtualState {
    fn solved(&self) -> Option<BuiltinStore> {
        self.bics.as_ref().map(BuiltinStore::from_constraints)
    }
}

/// `goal(...) udc(...) bic(...) next_id(n)` with the parenthesisation of
/// the pretty event form; `?` marks components not yet known.
impl fmt::Display for PartialVirtualState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |cs: &Option<Vec<Constraint>>| match cs.as_ref().map(render_list) {
            None => "(?)".to_string(),
            Some(s) if s.contains(", ") => format!("(({s}))"),
            Some(s) => format!("({s})"),
        };
        write!(
            f,
            "goal{} udc{} bic{} next_id({})",
            show(&self.goal),
            show(&self.udcs),
            show(&self.bics),
            self.next_id.map_or("?".to_string(), |n| n.to_string())
        )
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum RebuildError {
    #[error("chrono {chrono}: cannot read attribute `{attribute}`: {source}")]
    Parse {
        chrono: u64,
        attribute: &'static str,
        source: ParseError,
    },
    #[error(transparent)]
    Chrono(#[from] ChronoError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

fn read(text: &Option<String>, chrono: u64, attribute: &'static str) -> Result<Option<Vec<Constraint>>, RebuildError> {
    text.as_deref()
        .map(|t| {
            parse_constraint_list(t).map_err(|source| RebuildError::Parse {
                chrono,
                attribute,
                source,
            })
        })
        .transpose()
}

/// One partial state per event, in chrono order.
pub fn rebuild(t: &Trace) -> Result<Vec<PartialVirtualState>, RebuildError> {
    check_chronos(t.events.iter().map(|e| e.chrono))?;
    let mut cur = PartialVirtualState::default();
    let mut out = Vec::with_capacity(t.events.len());
    for e in &t.events {
        let a = &e.attributes;
        let goal = read(&a.goal, e.chrono, "goal")?;
        match e.kind {
            EventKind::InitialState => {
                cur = PartialVirtualState {
                    goal,
                    udcs: Some(Vec::new()),
                    bics: Some(Vec::new()),
                    next_id: a.hind,
                };
            }
            EventKind::Introduce => {
                cur.goal = goal;
                cur.udcs = read(&a.udc, e.chrono, "udc")?;
                cur.next_id = a.hind;
            }
            EventKind::Solve => {
                cur.goal = goal;
                let told = read(&a.bic, e.chrono, "bic")?.unwrap_or_default();
                if let Some(b) = cur.bics.as_mut() {
                    b.extend(told.into_iter().filter(|c| !c.is_true()));
                }
            }
            EventKind::Apply => {
                cur.goal = goal;
                if let Some(u) = read(&a.udc, e.chrono, "udc")? {
                    cur.udcs = Some(u);
                }
                if let Some(b) = read(&a.bic, e.chrono, "bic")? {
                    cur.bics = Some(b);
                }
            }
            // Fail leaves the state as it was; its goal is the pre-state goal.
            EventKind::Fail => {
                if goal.is_some() {
                    cur.goal = goal;
                }
            }
        }
        out.push(cur.clone());
    }
    Ok(out)
}

/// A consistent one-to-one renaming of variables between two states.
#[derive(Default)]
struct Renaming {
    fwd: BTreeMap<String, String>,
    back: BTreeMap<String, String>,
}

impl Renaming {
    fn term(&mut self, a: &Term, b: &Term) -> bool {
        match (a, b) {
            (Term::Var(x), Term::Var(y)) => match (self.fwd.get(x), self.back.get(y)) {
                (Some(y2), _) => y2 == y,
                (None, Some(_)) => false,
                (None, None) => {
                    self.fwd.insert(x.clone(), y.clone());
                    self.back.insert(y.clone(), x.clone());
                    true
                }
            },
            (Term::Const(x), Term::Const(y)) => x == y,
            (Term::Fun(f, xs), Term::Fun(g, ys)) => {
                f == g && xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| self.term(x, y))
            }
            _ => false,
        }
    }

    fn list(&mut self, a: &[Constraint], b: &[Constraint]) -> bool {
        a.len() == b.len()
            && a.iter().zip(b).all(|(x, y)| {
                x.symbol == y.symbol
                    && x.args.len() == y.args.len()
                    && x.args.iter().zip(&y.args).all(|(s, t)| self.term(s, t))
            })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mismatch {
    pub chrono: u64,
    pub component: &'static str,
    pub engine: String,
    pub rebuilt: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FaithfulnessReport {
    pub events: usize,
    pub outcome: Outcome,
    pub mismatches: Vec<Mismatch>,
    /// State components the trace format cannot carry.
    pub unrecoverable: Vec<&'static str>,
}

impl FaithfulnessReport {
    pub fn is_faithful(&self) -> bool {
        self.mismatches.is_empty()
    }
}

impl fmt::Display for FaithfulnessReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.is_faithful() { "faithful" } else { "NOT faithful" };
        writeln!(f, "{verdict} on goal, store and builtin store over {} events", self.events)?;
        for m in &self.mismatches {
            writeln!(
                f,
                "  chrono {} {}: engine `{}`, rebuilt `{}`",
                m.chrono, m.component, m.engine, m.rebuilt
            )?;
        }
        write!(f, "not recoverable from the trace: {}", self.unrecoverable.join(", "))
    }
}

pub const UNRECOVERABLE: [&str; 2] = ["propagation history", "constraint identifiers"];

/// Compares rebuilt states with the engine's states chrono by chrono.
pub fn compare(engine: &[ExecutionState], rebuilt: &[PartialVirtualState]) -> Vec<Mismatch> {
    let mut out = Vec::new();
    let mut note = |chrono, component, engine: String, rebuilt: String| {
        out.push(Mismatch {
            chrono,
            component,
            engine,
            rebuilt,
        })
    };
    if engine.len() != rebuilt.len() {
        note(0, "length", engine.len().to_string(), rebuilt.len().to_string());
        return out;
    }
    for (i, (s, r)) in engine.iter().zip(rebuilt).enumerate() {
        let chrono = i as u64 + 1;
        let mut ren = Renaming::default();
        let solved = r.solved();
        let norm = |cs: &Option<Vec<Constraint>>| -> Option<Vec<Constraint>> {
            let store = solved.as_ref()?;
            Some(cs.as_ref()?.iter().map(|c| store.normalize_constraint(c)).collect())
        };
        let shown = |cs: &Option<Vec<Constraint>>| cs.as_ref().map_or("?".to_string(), render_list);
        let parts = [
            ("bics", s.bics.equations.clone(), r.bics.clone()),
            ("goal", s.normalized_goal(), norm(&r.goal)),
            ("udcs", s.normalized_store(), norm(&r.udcs)),
        ];
        for (component, want, got) in parts {
            let ok = got.as_ref().is_some_and(|g| ren.list(g, &want));
            if !ok {
                note(chrono, component, render_list(&want), shown(&got));
            }
        }
        if r.next_id != Some(s.next_id) {
            note(
                chrono,
                "next_id",
                s.next_id.to_string(),
                r.next_id.map_or("?".into(), |n| n.to_string()),
            );
        }
    }
    out
}

/// Runs `p` on `q`, rebuilds the states from the trace and compares.
pub fn check_faithful(p: &Program, q: &Query, budget: usize) -> Result<FaithfulnessReport, RebuildError> {
    let run = run_traced(p, q, budget);
    let fin = run.result?;
    let rebuilt = rebuild(&run.trace)?;
    Ok(FaithfulnessReport {
        events: run.trace.len(),
        outcome: fin.outcome,
        mismatches: compare(&run.states, &rebuilt),
        unrecoverable: UNRECOVERABLE.to_vec(),
    })
}
