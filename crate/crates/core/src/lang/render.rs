use std::fmt;

use super::{Constraint, Program, Rule, RuleKind, Term};

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Const(c) => f.write_str(c),
            Term::Fun(s, args) => {
                write!(f, "{s}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some((l, r)) = self.as_equation() {
            return write!(f, "{l}={r}");
        }
        f.write_str(&self.symbol)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{a}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// Renders constraints separated by `", "`.
pub fn render_list<'a>(cs: impl IntoIterator<Item = &'a Constraint>) -> String {
    cs.into_iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

impl fmt::Display for Rule {
    /// `name@ kept \ removed <=> guard | body`, without the terminating dot.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@ ", self.name)?;
        match self.kind() {
            RuleKind::Simplification => write!(f, "{} <=> ", render_list(&self.removed))?,
            RuleKind::Propagation => write!(f, "{} ==> ", render_list(&self.kept))?,
            RuleKind::Simpagation => write!(
                f,
                "{} \\ {} <=> ",
                render_list(&self.kept),
                render_list(&self.removed)
            )?,
        }
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

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rules {
            writeln!(f, "{r}.")?;
        }
        Ok(())
    }
}
