//! CHR surface language: terms, constraints, rules and programs.
//!
//! The concrete syntax accepted here is the usual one:
//!
//! ```text
//! % leq solver
//! reflexivity  r1@ leq(X,Y) <=> X=Y | true.
//! antisymmetry r2@ leq(X,Y), leq(Y,X) <=> X=Y.
//! idempotence  r3@ leq(X,Y) \ leq(X,Y) <=> true.
//! transitivity r4@ leq(X,Y), leq(Y,Z) ==> leq(X,Z).
//! ```
//!
//! A leading free identifier before the rule name is a label and is
//! discarded; the identifier immediately before `@` is the rule name.
//! Unnamed rules are called `rN` after their 1-based position.

mod parser;
mod render;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use parser::{parse_constraint_list, parse_program, parse_query};
pub use render::render_list;

/// A Herbrand term.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Term {
    Var(String),
    /// Arity-0 symbol or integer literal.
    Const(String),
    /// Compound term; always has at least one argument.
    Fun(String, Vec<Term>),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn constant(name: impl Into<String>) -> Self {
        Term::Const(name.into())
    }

    pub fn fun(symbol: impl Into<String>, args: Vec<Term>) -> Self {
        debug_assert!(!args.is_empty(), "compound terms need at least one argument");
        Term::Fun(symbol.into(), args)
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Const(_) => true,
            Term::Fun(_, args) => args.iter().all(Term::is_ground),
        }
    }

    /// Collects variable names in first-occurrence order.
    pub fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Term::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Term::Const(_) => {}
            Term::Fun(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    pub fn occurs(&self, var: &str) -> bool {
        match self {
            Term::Var(v) => v == var,
            Term::Const(_) => false,
            Term::Fun(_, args) => args.iter().any(|a| a.occurs(var)),
        }
    }

    /// Rebuilds the term, replacing every variable by `f(name)`.
    pub fn map_vars(&self, f: &mut impl FnMut(&str) -> Term) -> Term {
        match self {
            Term::Var(v) => f(v),
            Term::Const(_) => self.clone(),
            Term::Fun(s, args) => Term::Fun(s.clone(), args.iter().map(|a| a.map_vars(f)).collect()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ConstraintKind {
    Builtin,
    UserDefined,
}

/// A constraint `symbol(args)`; builtins are exactly `=/2`, `true/0` and `false/0`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Constraint {
    pub kind: ConstraintKind,
    pub symbol: String,
    pub args: Vec<Term>,
}

pub const EQ: &str = "=";
pub const TRUE: &str = "true";
pub const FALSE: &str = "false";

fn builtin_kind(symbol: &str, arity: usize) -> ConstraintKind {
    match (symbol, arity) {
        (EQ, 2) | (TRUE, 0) | (FALSE, 0) => ConstraintKind::Builtin,
        _ => ConstraintKind::UserDefined,
    }
}

impl Constraint {
    /// Builds a constraint, classifying it by symbol and arity.
    pub fn new(symbol: impl Into<String>, args: Vec<Term>) -> Self {
        let symbol = symbol.into();
        let kind = builtin_kind(&symbol, args.len());
        Constraint { kind, symbol, args }
    }

    pub fn eq(lhs: Term, rhs: Term) -> Self {
        Constraint::new(EQ, vec![lhs, rhs])
    }

    pub fn truth() -> Self {
        Constraint::new(TRUE, Vec::new())
    }

    pub fn falsity() -> Self {
        Constraint::new(FALSE, Vec::new())
    }

    pub fn is_builtin(&self) -> bool {
        self.kind == ConstraintKind::Builtin
    }

    pub fn is_user_defined(&self) -> bool {
        self.kind == ConstraintKind::UserDefined
    }

    pub fn is_true(&self) -> bool {
        self.is_builtin() && self.symbol == TRUE
    }

    pub fn is_false(&self) -> bool {
        self.is_builtin() && self.symbol == FALSE
    }

    /// The two sides of an equality, if this is one.
    pub fn as_equation(&self) -> Option<(&Term, &Term)> {
        match (self.is_builtin(), self.symbol.as_str(), self.args.as_slice()) {
            (true, EQ, [l, r]) => Some((l, r)),
            _ => None,
        }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn collect_vars(&self, out: &mut Vec<String>) {
        self.args.iter().for_each(|a| a.collect_vars(out));
    }

    pub fn vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn map_args(&self, mut f: impl FnMut(&Term) -> Term) -> Constraint {
        Constraint {
            kind: self.kind,
            symbol: self.symbol.clone(),
            args: self.args.iter().map(&mut f).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RuleKind {
    Simplification,
    Propagation,
    Simpagation,
}

/// A rule in simpagation normal form `name @ kept \ removed <=> guard | body`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub name: String,
    pub kept: Vec<Constraint>,
    pub removed: Vec<Constraint>,
    pub guard: Vec<Constraint>,
    pub body: Vec<Constraint>,
}

impl Rule {
    pub fn kind(&self) -> RuleKind {
        match (self.kept.is_empty(), self.removed.is_empty()) {
            (true, _) => RuleKind::Simplification,
            (false, true) => RuleKind::Propagation,
            (false, false) => RuleKind::Simpagation,
        }
    }

    /// Kept heads followed by removed heads.
    pub fn heads(&self) -> impl Iterator<Item = &Constraint> {
        self.kept.iter().chain(self.removed.iter())
    }

    /// All variables of the rule in first-occurrence order.
    pub fn vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.heads()
            .chain(self.guard.iter())
            .chain(self.body.iter())
            .for_each(|c| c.collect_vars(&mut out));
        out
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Program {
    pub rules: Vec<Rule>,
}

impl Program {
    pub fn rule(&self, name: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.name == name)
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub constraints: Vec<Constraint>,
}

impl Query {
    pub fn new(constraints: Vec<Constraint>) -> Self {
        Query { constraints }
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("semantic error in rule `{rule}`: {message}")]
    Semantic { rule: String, message: String },
}

/// Variable names occurring anywhere in `cs`, deduplicated and sorted.
pub fn vars_of(cs: &[Constraint]) -> BTreeSet<String> {
    let mut out = Vec::new();
    cs.iter().for_each(|c| c.collect_vars(&mut out));
    out.into_iter().collect()
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintKind::Builtin => f.write_str("builtin"),
            ConstraintKind::UserDefined => f.write_str("user-defined"),
        }
    }
}
