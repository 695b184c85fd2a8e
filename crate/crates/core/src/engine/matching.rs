//! Rule selection (`find_apply`) and the Apply transition.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::state::{ExecutionState, PropagationRecord, FRESH_PREFIX};
use super::unify::{BuiltinStore, Substitution};
use super::EngineError;
use crate::lang::{render_list, Constraint, Program, Rule, Term};

/// A rule together with the store constraints it matched.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchResult {
    pub rule_index: usize,
    pub rule: Rule,
    pub kept_ids: Vec<u64>,
    pub removed_ids: Vec<u64>,
    /// Maps every rule variable to a term over the store's variables.
    /// Rule variables that no head binds get fresh `_G<n>` variables.
    pub substitution: Substitution,
    pub fresh_used: u64,
}

/// A fired rule instance as shown in traces: `name@ heads ==> guard | body`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleInstance {
    pub name: String,
    pub heads: Vec<Constraint>,
    pub guard: Vec<Constraint>,
    pub body: Vec<Constraint>,
}

impl fmt::Display for RuleInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@ {} ==> ", self.name, render_list(&self.heads))?;
        if !self.guard.is_empty() {
            write!(f, "{} | ", render_list(&self.guard))?;
        }
        if self.body.is_empty() {
            f.write_str("true")
        } else {
            f.write_str(&render_list(&self.body))
        }
    }
}

impl MatchResult {
    pub fn record(&self) -> PropagationRecord {
        PropagationRecord {
            ids: self.kept_ids.iter().chain(&self.removed_ids).copied().collect(),
            rule: self.rule.name.clone(),
        }
    }

    pub fn instance(&self) -> RuleInstance {
        let inst = |cs: &[Constraint]| -> Vec<Constraint> {
            cs.iter().map(|c| self.substitution.apply_constraint(c)).collect()
        };
        RuleInstance {
            name: self.rule.name.clone(),
            heads: self.rule.heads().map(|c| self.substitution.apply_constraint(c)).collect(),
            guard: inst(&self.rule.guard),
            body: inst(&self.rule.body),
        }
    }
}

fn match_term(pattern: &Term, target: &Term, e: &mut Substitution) -> bool {
    match (pattern, target) {
        (Term::Var(x), _) => match e.get(x) {
            Some(bound) => bound == target,
            None => {
                e.insert_matching(x, target.clone());
                true
            }
        },
        (Term::Const(a), Term::Const(b)) => a == b,
        (Term::Fun(f, xs), Term::Fun(g, ys)) => {
            f == g && xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| match_term(x, y, e))
        }
        _ => false,
    }
}

/// One-way matching of a head pattern against a (normalised) store constraint.
fn match_constraint(pattern: &Constraint, target: &Constraint, e: &mut Substitution) -> bool {
    pattern.symbol == target.symbol
        && pattern.args.len() == target.args.len()
        && pattern.args.iter().zip(&target.args).all(|(p, t)| match_term(p, t, e))
}

/// Ask-entailment of a guard. Only variables in `locals` may be bound;
/// on success returns their bindings.
fn entail(
    bics: &BuiltinStore,
    e: &Substitution,
    guard: &[Constraint],
    locals: &BTreeSet<String>,
) -> Option<Substitution> {
    let mut ext = Substitution::new();
    for g in guard {
        if g.is_true() {
            continue;
        }
        if g.is_false() {
            return None;
        }
        let (l, r) = g.as_equation()?;
        let l = bics.normalize(&e.apply(l));
        let r = bics.normalize(&e.apply(r));
        ext.unify_restricted(&l, &r, &|v| locals.contains(v)).ok()?;
    }
    Some(ext)
}

/// `CT |= B -> exists(e /\ g)` for the equality theory.
///
/// Guard variables outside the domain of `e` are existential and may be
/// bound; every other variable must already agree under the solved form.
pub fn guard_entailed(bics: &BuiltinStore, e: &Substitution, guard: &[Constraint]) -> bool {
    debug_assert!(bics.consistent);
    let mut full = e.clone();
    let mut locals = BTreeSet::new();
    for c in guard {
        for v in c.vars() {
            if !full.contains(&v) {
                // `?` cannot occur in parsed variable names
                let local = format!("?{v}");
                full.insert_matching(&v, Term::Var(local.clone()));
                locals.insert(local);
            }
        }
    }
    entail(bics, &full, guard, &locals).is_some()
}

struct Search<'a> {
    state: &'a ExecutionState,
    rule_index: usize,
    rule: &'a Rule,
    heads: Vec<&'a Constraint>,
    store: &'a [(u64, Constraint)],
}

impl Search<'_> {
    fn run(&self, chosen: &mut Vec<u64>, e: &Substitution) -> Option<MatchResult> {
        let depth = chosen.len();
        if depth == self.heads.len() {
            return self.complete(chosen, e);
        }
        for (id, c) in self.store {
            if chosen.contains(id) {
                continue;
            }
            let mut e2 = e.clone();
            if match_constraint(self.heads[depth], c, &mut e2) {
                chosen.push(*id);
                if let Some(m) = self.run(chosen, &e2) {
                    return Some(m);
                }
                chosen.pop();
            }
        }
        None
    }

    fn complete(&self, chosen: &[u64], e: &Substitution) -> Option<MatchResult> {
        let n_kept = self.rule.kept.len();
        let record = PropagationRecord {
            ids: chosen.to_vec(),
            rule: self.rule.name.clone(),
        };
        if self.state.history.contains(&record) {
            return None;
        }
        let mut full = e.clone();
        let mut locals = BTreeSet::new();
        let mut fresh_used = 0;
        for v in self.rule.vars() {
            if !full.contains(&v) {
                fresh_used += 1;
                let name = format!("{FRESH_PREFIX}{}", self.state.fresh + fresh_used);
                full.insert_matching(&v, Term::Var(name.clone()));
                locals.insert(name);
            }
        }
        let ext = entail(&self.state.bics, &full, &self.rule.guard, &locals)?;
        let substitution = full.map_values(|t| ext.apply(t));
        Some(MatchResult {
            rule_index: self.rule_index,
            rule: self.rule.clone(),
            kept_ids: chosen[..n_kept].to_vec(),
            removed_ids: chosen[n_kept..].to_vec(),
            substitution,
            fresh_used,
        })
    }
}

/// First applicable rule instance: rules in program order, head partners
/// enumerated oldest id first, skipping instances already in the history.
pub fn find_apply(s: &ExecutionState, p: &Program) -> Option<MatchResult> {
    if !s.bics.consistent {
        return None;
    }
    let store: Vec<(u64, Constraint)> = s
        .store
        .iter()
        .map(|ic| (ic.id, s.bics.normalize_constraint(&ic.constraint)))
        .collect();
    p.rules.iter().enumerate().find_map(|(rule_index, rule)| {
        let search = Search {
            state: s,
            rule_index,
            rule,
            heads: rule.heads().collect(),
            store: &store,
        };
        search.run(&mut Vec::new(), &Substitution::new())
    })
}

/// Apply: removes the matched removed heads, records the firing, tells the
/// instantiated guard and builtin body constraints, and pushes the
/// user-defined body constraints as a new goal frame.
pub fn apply_step(s: &ExecutionState, m: &MatchResult) -> Result<ExecutionState, EngineError> {
    let record = m.record();
    if s.history.contains(&record) {
        return Err(EngineError::Precondition(format!(
            "rule `{}` already fired on {:?}",
            record.rule, record.ids
        )));
    }
    let distinct: BTreeSet<_> = record.ids.iter().collect();
    if distinct.len() != record.ids.len() {
        return Err(EngineError::Precondition("a constraint matched two heads".into()));
    }
    let inst = m.instance();
    for (id, head) in record.ids.iter().zip(&inst.heads) {
        match s.store_constraint(*id) {
            Some(c) if s.bics.normalize_constraint(c) == *head => {}
            _ => {
                return Err(EngineError::Precondition(format!(
                    "stale match: `{head}` is no longer #{id}"
                )))
            }
        }
    }

    let mut next = s.clone();
    next.store.retain(|ic| !m.removed_ids.contains(&ic.id));
    next.history.insert(record);
    next.fresh += m.fresh_used;
    for g in &inst.guard {
        next.bics.tell(g);
    }
    let (builtins, user): (Vec<_>, Vec<_>) = inst.body.into_iter().partition(Constraint::is_builtin);
    for b in &builtins {
        next.bics.tell(b);
    }
    next.goal.push_frame(user);
    Ok(next)
}
