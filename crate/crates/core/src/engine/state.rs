use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::unify::BuiltinStore;
use super::EngineError;
use crate::lang::{render_list, Constraint, Query};

/// The goal `Q`.
///
/// Constraints are grouped in frames: the initial query is the first frame
/// and every fired rule body pushes a new one. The next constraint to run is
/// the front of the newest frame. Iteration yields the oldest frame first,
/// which is also the order used when rendering.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Goal {
    frames: Vec<VecDeque<Constraint>>,
}

impl Goal {
    pub fn from_constraints(cs: impl IntoIterator<Item = Constraint>) -> Self {
        let mut g = Goal::default();
        g.push_frame(cs);
        g
    }

    /// Next constraint to be processed.
    pub fn top(&self) -> Option<&Constraint> {
        self.frames.last().and_then(|f| f.front())
    }

    pub fn pop(&mut self) -> Option<Constraint> {
        let frame = self.frames.last_mut()?;
        let c = frame.pop_front();
        if frame.is_empty() {
            self.frames.pop();
        }
        c
    }

    pub fn push_frame(&mut self, cs: impl IntoIterator<Item = Constraint>) {
        let frame: VecDeque<_> = cs.into_iter().collect();
        if !frame.is_empty() {
            self.frames.push(frame);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Constraint> {
        self.frames.iter().flatten()
    }

    pub fn len(&self) -> usize {
        self.frames.iter().map(VecDeque::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// `c#i`
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentifiedConstraint {
    pub constraint: Constraint,
    pub id: u64,
}

/// `id(H1) ++ id(H2) ++ [r]`
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PropagationRecord {
    pub ids: Vec<u64>,
    pub rule: String,
}

/// `<Q, U, B, P>_n`
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionState {
    pub goal: Goal,
    /// Ordered by ascending id.
    pub store: Vec<IdentifiedConstraint>,
    pub bics: BuiltinStore,
    pub history: BTreeSet<PropagationRecord>,
    pub next_id: u64,
    /// Counter for fresh variables introduced when a rule is instantiated.
    pub fresh: u64,
}

impl Default for ExecutionState {
    fn default() -> Self {
        ExecutionState {
            goal: Goal::default(),
            store: Vec::new(),
            bics: BuiltinStore::new(),
            history: BTreeSet::new(),
            next_id: 1,
            fresh: 0,
        }
    }
}

pub(crate) const FRESH_PREFIX: &str = "_G";

impl ExecutionState {
    pub fn store_constraint(&self, id: u64) -> Option<&Constraint> {
        self.store.iter().find(|c| c.id == id).map(|c| &c.constraint)
    }

    /// Goal constraints in rendering order, normalised by the builtin store.
    pub fn normalized_goal(&self) -> Vec<Constraint> {
        self.goal.iter().map(|c| self.bics.normalize_constraint(c)).collect()
    }

    /// `chr(U)` in id order, normalised by the builtin store.
    pub fn normalized_store(&self) -> Vec<Constraint> {
        self.store
            .iter()
            .map(|c| self.bics.normalize_constraint(&c.constraint))
            .collect()
    }

    pub fn render_goal(&self) -> String {
        render_list(&self.normalized_goal())
    }

    pub fn render_store(&self) -> String {
        render_list(&self.normalized_store())
    }

    pub fn render_bics(&self) -> String {
        self.bics.render()
    }
}

/// `<q, [], true, []>_1`
pub fn init_state(query: &Query) -> ExecutionState {
    let mut vars = Vec::new();
    query.constraints.iter().for_each(|c| c.collect_vars(&mut vars));
    let fresh = vars
        .iter()
        .filter_map(|v| v.strip_prefix(FRESH_PREFIX)?.parse::<u64>().ok())
        .max()
        .unwrap_or(0);
    ExecutionState {
        goal: Goal::from_constraints(query.constraints.iter().cloned()),
        fresh,
        ..ExecutionState::default()
    }
}

fn take_top(s: &ExecutionState, c: &Constraint) -> Result<ExecutionState, EngineError> {
    match s.goal.top() {
        Some(top) if top == c => {
            let mut next = s.clone();
            next.goal.pop();
            Ok(next)
        }
        Some(top) => Err(EngineError::Precondition(format!(
            "`{c}` is not on top of the goal (top is `{top}`)"
        ))),
        None => Err(EngineError::Precondition(format!(
            "`{c}` is not in the goal (goal is empty)"
        ))),
    }
}

/// Solve: moves the builtin on top of the goal into the builtin store.
pub fn solve_step(s: &ExecutionState, c: &Constraint) -> Result<ExecutionState, EngineError> {
    if !c.is_builtin() {
        return Err(EngineError::Precondition(format!("Solve on user-defined `{c}`")));
    }
    let mut next = take_top(s, c)?;
    next.bics.tell(c);
    Ok(next)
}

/// Introduce: moves the user-defined constraint on top of the goal into the store as `c#n`.
pub fn introduce_step(s: &ExecutionState, c: &Constraint) -> Result<ExecutionState, EngineError> {
    if !c.is_user_defined() {
        return Err(EngineError::Precondition(format!("Introduce on builtin `{c}`")));
    }
    let mut next = take_top(s, c)?;
    next.store.push(IdentifiedConstraint {
        constraint: c.clone(),
        id: next.next_id,
    });
    next.next_id += 1;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{parse_query, Term};

    fn q(src: &str) -> Query {
        parse_query(src).unwrap()
    }

    #[test]
    fn initial_state() {
        let s = init_state(&q("leq(A,B), leq(B,C), leq(C,A)"));
        assert_eq!(s.render_goal(), "leq(A,B), leq(B,C), leq(C,A)");
        assert_eq!(s.goal.top().unwrap().to_string(), "leq(A,B)");
        assert!(s.store.is_empty() && s.bics.is_empty() && s.history.is_empty());
        assert_eq!(s.next_id, 1);

        let s = init_state(&Query::default());
        assert!(s.goal.is_empty());
        assert_eq!(s.next_id, 1);

        let s = init_state(&q("X=a"));
        assert_eq!(s.goal.len(), 1);
        assert!(s.store.is_empty());
    }

    #[test]
    fn fresh_counter_skips_query_names() {
        let s = init_state(&q("p(_G7, X)"));
        assert_eq!(s.fresh, 7);
    }

    #[test]
    fn solve_extends_solved_form() {
        let s = init_state(&q("A=C"));
        let c = s.goal.top().unwrap().clone();
        let s = solve_step(&s, &c).unwrap();
        assert!(s.goal.is_empty());
        assert_eq!(s.bics.solved_form.get("A"), Some(&Term::var("C")));
        assert_eq!(s.render_bics(), "A=C");
    }

    #[test]
    fn solve_true_is_noop() {
        let s = init_state(&q("true, p"));
        let s2 = solve_step(&s, &Constraint::truth()).unwrap();
        assert_eq!(s2.bics, s.bics);
        assert_eq!(s2.goal.len(), 1);
    }

    #[test]
    fn solve_clash_is_inconsistent() {
        let s = init_state(&q("a=b"));
        let c = s.goal.top().unwrap().clone();
        assert!(!solve_step(&s, &c).unwrap().bics.consistent);
    }

    #[test]
    fn preconditions() {
        let s = init_state(&q("p, X=a"));
        let p = s.goal.top().unwrap().clone();
        assert!(solve_step(&s, &p).is_err());
        let eq = Constraint::eq(Term::var("X"), Term::constant("a"));
        assert!(introduce_step(&s, &eq).is_err());
        // builtin but not on top
        assert!(solve_step(&s, &eq).is_err());
        assert!(introduce_step(&init_state(&Query::default()), &p).is_err());
    }

    #[test]
    fn introduce_allocates_ids_in_order() {
        let mut s = init_state(&q("leq(A,B), leq(B,C), leq(C,A)"));
        for expected in 1..=3 {
            let c = s.goal.top().unwrap().clone();
            let before: Vec<_> = s.goal.iter().chain(s.store.iter().map(|i| &i.constraint)).cloned().collect();
            s = introduce_step(&s, &c).unwrap();
            assert_eq!(s.store.last().unwrap().id, expected);
            assert_eq!(s.next_id, expected + 1);
            let mut after: Vec<_> = s.goal.iter().chain(s.store.iter().map(|i| &i.constraint)).cloned().collect();
            let mut before = before;
            before.sort();
            after.sort();
            assert_eq!(before, after, "introduce conserves goal + store");
        }
        assert_eq!(s.render_store(), "leq(A,B), leq(B,C), leq(C,A)");
    }

    #[test]
    fn goal_frames_render_oldest_first() {
        let mut g = Goal::from_constraints(q("a, b").constraints);
        g.pop();
        g.push_frame(q("c, d").constraints);
        assert_eq!(render_list(g.iter()), "b, c, d");
        assert_eq!(g.pop().unwrap().to_string(), "c");
        assert_eq!(g.pop().unwrap().to_string(), "d");
        assert_eq!(g.pop().unwrap().to_string(), "b");
        assert!(g.pop().is_none());
    }
}
