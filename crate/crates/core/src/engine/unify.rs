//! Substitutions, syntactic unification and the equality-only builtin store.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::lang::{render_list, Constraint, Term};

/// An idempotent substitution: no bound variable occurs in any binding.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Substitution {
    bindings: BTreeMap<String, Term>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum UnifyError {
    Clash(Term, Term),
    Occurs(String, Term),
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, var: &str) -> Option<&Term> {
        self.bindings.get(var)
    }

    pub fn contains(&self, var: &str) -> bool {
        self.bindings.contains_key(var)
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Term)> {
        self.bindings.iter()
    }

    pub fn apply(&self, t: &Term) -> Term {
        if self.bindings.is_empty() {
            return t.clone();
        }
        t.map_vars(&mut |v| {
            self.bindings
                .get(v)
                .cloned()
                .unwrap_or_else(|| Term::Var(v.to_string()))
        })
    }

    pub fn apply_constraint(&self, c: &Constraint) -> Constraint {
        c.map_args(|t| self.apply(t))
    }

    /// Records a matching binding as is, without normalising or composing.
    ///
    /// Used for rule-to-store matchings, whose domain (rule variables) and
    /// range (store terms) are separate name spaces.
    pub fn insert_matching(&mut self, var: &str, term: Term) {
        self.bindings.insert(var.to_string(), term);
    }

    pub fn map_values(&self, mut f: impl FnMut(&Term) -> Term) -> Substitution {
        Substitution {
            bindings: self.bindings.iter().map(|(k, v)| (k.clone(), f(v))).collect(),
        }
    }

    /// Binds `var` to `term`, keeping the substitution idempotent.
    ///
    /// `term` is normalised first; the binding fails the occurs check when
    /// the normalised term mentions `var`.
    pub fn bind(&mut self, var: &str, term: &Term) -> Result<(), UnifyError> {
        debug_assert!(!self.bindings.contains_key(var));
        let term = self.apply(term);
        if term == Term::Var(var.to_string()) {
            return Ok(());
        }
        if term.occurs(var) {
            return Err(UnifyError::Occurs(var.to_string(), term));
        }
        let single = Substitution {
            bindings: BTreeMap::from([(var.to_string(), term.clone())]),
        };
        for value in self.bindings.values_mut() {
            *value = single.apply(value);
        }
        self.bindings.insert(var.to_string(), term);
        Ok(())
    }

    /// Extends the substitution with a most general unifier of `a` and `b`.
    ///
    /// Variable/variable pairs bind the left variable to the right one.
    /// On failure the substitution may be partially extended.
    pub fn unify(&mut self, a: &Term, b: &Term) -> Result<(), UnifyError> {
        self.unify_restricted(a, b, &|_| true)
    }

    /// Like [`Substitution::unify`], but only variables accepted by
    /// `may_bind` can receive bindings. A pair that would need any other
    /// variable bound fails with [`UnifyError::Clash`].
    pub fn unify_restricted(
        &mut self,
        a: &Term,
        b: &Term,
        may_bind: &dyn Fn(&str) -> bool,
    ) -> Result<(), UnifyError> {
        let a = self.apply(a);
        let b = self.apply(b);
        match (&a, &b) {
            _ if a == b => Ok(()),
            (Term::Var(x), Term::Var(y)) => {
                if may_bind(x) {
                    self.bind(x, &b)
                } else if may_bind(y) {
                    self.bind(y, &a)
                } else {
                    Err(UnifyError::Clash(a.clone(), b.clone()))
                }
            }
            (Term::Var(x), _) if may_bind(x) => self.bind(x, &b),
            (_, Term::Var(y)) if may_bind(y) => self.bind(y, &a),
            (Term::Fun(f, xs), Term::Fun(g, ys)) if f == g && xs.len() == ys.len() => {
                for (x, y) in xs.iter().zip(ys) {
                    self.unify_restricted(x, y, may_bind)?;
                }
                Ok(())
            }
            _ => Err(UnifyError::Clash(a.clone(), b.clone())),
        }
    }
}

/// The builtin constraint store: the conjunction of builtins told so far and
/// its solved form.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuiltinStore {
    /// Told builtins in arrival order; `true` is never recorded.
    pub equations: Vec<Constraint>,
    pub solved_form: Substitution,
    pub consistent: bool,
}

impl Default for BuiltinStore {
    fn default() -> Self {
        BuiltinStore {
            equations: Vec::new(),
            solved_form: Substitution::new(),
            consistent: true,
        }
    }
}

impl BuiltinStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Conjoins a builtin constraint. Returns the resulting consistency.
    pub fn tell(&mut self, c: &Constraint) -> bool {
        debug_assert!(c.is_builtin());
        if c.is_true() {
            return self.consistent;
        }
        self.equations.push(c.clone());
        if !self.consistent {
            return false;
        }
        if c.is_false() {
            self.consistent = false;
        } else if let Some((l, r)) = c.as_equation() {
            if self.solved_form.unify(l, r).is_err() {
                self.consistent = false;
            }
        }
        self.consistent
    }

    pub fn normalize(&self, t: &Term) -> Term {
        self.solved_form.apply(t)
    }

    pub fn normalize_constraint(&self, c: &Constraint) -> Constraint {
        self.solved_form.apply_constraint(c)
    }

    pub fn is_empty(&self) -> bool {
        self.equations.is_empty()
    }

    pub fn render(&self) -> String {
        render_list(&self.equations)
    }

    /// Rebuilds a store by telling `cs` in order.
    pub fn from_constraints<'a>(cs: impl IntoIterator<Item = &'a Constraint>) -> Self {
        let mut store = BuiltinStore::new();
        for c in cs {
            store.tell(c);
        }
        store
    }

    /// Variables constrained by the store.
    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = Vec::new();
        self.equations.iter().for_each(|c| c.collect_vars(&mut out));
        out.into_iter().collect()
    }
}
