use std::collections::HashSet;

use super::{Constraint, ParseError, Program, Query, Rule, Term};

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Atom(String),
    Var(String),
    Int(String),
    LParen,
    RParen,
    Comma,
    Dot,
    At,
    Backslash,
    Bar,
    Eq,
    Simplify,
    Propagate,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Atom(s) | Tok::Var(s) | Tok::Int(s) => format!("`{s}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::At => "`@`".into(),
            Tok::Backslash => "`\\`".into(),
            Tok::Bar => "`|`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Simplify => "`<=>`".into(),
            Tok::Propagate => "`==>`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    macro_rules! advance {
        ($n:expr) => {{
            for _ in 0..$n {
                if chars[i] == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                i += 1;
            }
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            advance!(1);
            continue;
        }
        if c == '%' {
            while i < chars.len() && chars[i] != '\n' {
                advance!(1);
            }
            continue;
        }
        let (start_line, start_col) = (line, col);
        let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
        let (tok, len) = if rest.starts_with("<=>") {
            (Tok::Simplify, 3)
        } else if rest.starts_with("==>") {
            (Tok::Propagate, 3)
        } else {
            match c {
                '(' => (Tok::LParen, 1),
                ')' => (Tok::RParen, 1),
                ',' => (Tok::Comma, 1),
                '.' => (Tok::Dot, 1),
                '@' => (Tok::At, 1),
                '\\' => (Tok::Backslash, 1),
                '|' => (Tok::Bar, 1),
                '=' => (Tok::Eq, 1),
                c if c.is_ascii_digit() => {
                    let len = chars[i..].iter().take_while(|c| c.is_ascii_digit()).count();
                    (Tok::Int(chars[i..i + len].iter().collect()), len)
                }
                c if c.is_alphabetic() || c == '_' => {
                    let len = chars[i..]
                        .iter()
                        .take_while(|c| c.is_alphanumeric() || **c == '_')
                        .count();
                    let word: String = chars[i..i + len].iter().collect();
                    if c.is_uppercase() || c == '_' {
                        (Tok::Var(word), len)
                    } else {
                        (Tok::Atom(word), len)
                    }
                }
                other => {
                    return Err(ParseError::Syntax {
                        line,
                        column: col,
                        message: format!("unexpected character `{other}`"),
                    })
                }
            }
        };
        advance!(len);
        out.push(Spanned {
            tok,
            line: start_line,
            column: start_col,
        });
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        column: col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn new(src: &str) -> Result<Self, ParseError> {
        Ok(Parser {
            toks: lex(src)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let idx = (self.pos + offset).min(self.toks.len() - 1);
        &self.toks[idx].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        let s = &self.toks[self.pos];
        ParseError::Syntax {
            line: s.line,
            column: s.column,
            message: message.into(),
        }
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!(
                "expected {}, found {}",
                want.describe(),
                self.peek().describe()
            )))
        }
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        match self.bump() {
            Tok::Var(v) => Ok(Term::Var(v)),
            Tok::Int(n) => Ok(Term::Const(n)),
            Tok::Atom(a) => {
                if *self.peek() == Tok::LParen {
                    self.bump();
                    let args = self.term_args()?;
                    Ok(Term::Fun(a, args))
                } else {
                    Ok(Term::Const(a))
                }
            }
            other => {
                self.pos -= 1;
                Err(self.error(format!("expected a term, found {}", other.describe())))
            }
        }
    }

    /// Arguments after an opening parenthesis, up to and including `)`.
    fn term_args(&mut self) -> Result<Vec<Term>, ParseError> {
        if *self.peek() == Tok::RParen {
            return Err(self.error("compound terms need at least one argument"));
        }
        let mut args = vec![self.term()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            args.push(self.term()?);
        }
        self.expect(Tok::RParen)?;
        Ok(args)
    }

    fn constraint(&mut self) -> Result<Constraint, ParseError> {
        let start = self.pos;
        let lhs = self.term()?;
        if *self.peek() == Tok::Eq {
            self.bump();
            let rhs = self.term()?;
            return Ok(Constraint::eq(lhs, rhs));
        }
        match lhs {
            Term::Const(name) if !name.starts_with(|c: char| c.is_ascii_digit()) => {
                Ok(Constraint::new(name, Vec::new()))
            }
            Term::Fun(name, args) => Ok(Constraint::new(name, args)),
            _ => {
                self.pos = start;
                Err(self.error("expected a constraint"))
            }
        }
    }

    fn constraint_list(&mut self) -> Result<Vec<Constraint>, ParseError> {
        let mut out = vec![self.constraint()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            out.push(self.constraint()?);
        }
        Ok(out)
    }

    /// Optional `[label] name @` prefix.
    fn rule_name(&mut self) -> Option<String> {
        match (self.peek(), self.peek_at(1), self.peek_at(2)) {
            (Tok::Atom(_), Tok::At, _) => {
                let Tok::Atom(name) = self.bump() else { unreachable!() };
                self.bump();
                Some(name)
            }
            (Tok::Atom(_), Tok::Atom(_), Tok::At) => {
                self.bump();
                let Tok::Atom(name) = self.bump() else { unreachable!() };
                self.bump();
                Some(name)
            }
            _ => None,
        }
    }

    fn rule(&mut self, position: usize) -> Result<Rule, ParseError> {
        let name = self.rule_name().unwrap_or_else(|| format!("r{position}"));
        let first = self.constraint_list()?;
        let second = if *self.peek() == Tok::Backslash {
            self.bump();
            Some(self.constraint_list()?)
        } else {
            None
        };
        let propagation = match self.bump() {
            Tok::Simplify => false,
            Tok::Propagate => true,
            other => {
                self.pos -= 1;
                return Err(self.error(format!(
                    "expected `<=>` or `==>`, found {}",
                    other.describe()
                )));
            }
        };
        let (kept, removed) = match (second, propagation) {
            (Some(_), true) => {
                return Err(self.error("simpagation rules use `<=>`, not `==>`"));
            }
            (Some(removed), false) => (first, removed),
            (None, false) => (Vec::new(), first),
            (None, true) => (first, Vec::new()),
        };
        let mut body = self.constraint_list()?;
        let mut guard = Vec::new();
        if *self.peek() == Tok::Bar {
            self.bump();
            guard = body;
            body = self.constraint_list()?;
        }
        self.expect(Tok::Dot)?;
        if body.len() == 1 && body[0].is_true() {
            body.clear();
        }
        let rule = Rule {
            name,
            kept,
            removed,
            guard,
            body,
        };
        check_rule(&rule)?;
        Ok(rule)
    }
}

fn check_rule(rule: &Rule) -> Result<(), ParseError> {
    if let Some(c) = rule.heads().find(|c| c.is_builtin()) {
        return Err(ParseError::Semantic {
            rule: rule.name.clone(),
            message: format!("builtin constraint `{c}` cannot appear in a head"),
        });
    }
    if let Some(c) = rule.guard.iter().find(|c| c.is_user_defined()) {
        return Err(ParseError::Semantic {
            rule: rule.name.clone(),
            message: format!("guard may only contain builtins, found `{c}`"),
        });
    }
    Ok(())
}

/// Parses a whole `.chr` source text.
pub fn parse_program(source: &str) -> Result<Program, ParseError> {
    let mut p = Parser::new(source)?;
    let mut rules = Vec::new();
    let mut seen = HashSet::new();
    while *p.peek() != Tok::Eof {
        let rule = p.rule(rules.len() + 1)?;
        if !seen.insert(rule.name.clone()) {
            return Err(ParseError::Semantic {
                rule: rule.name,
                message: "duplicate rule name".into(),
            });
        }
        rules.push(rule);
    }
    Ok(Program { rules })
}

/// Parses a comma-separated query with an optional trailing `.`; blank input is the empty query.
pub fn parse_query(source: &str) -> Result<Query, ParseError> {
    let mut p = Parser::new(source)?;
    if *p.peek() == Tok::Eof {
        return Ok(Query::default());
    }
    let constraints = p.constraint_list()?;
    if *p.peek() == Tok::Dot {
        p.bump();
    }
    if *p.peek() != Tok::Eof {
        return Err(p.error(format!("unexpected {}", p.peek().describe())));
    }
    Ok(Query { constraints })
}

/// Parses a rendered constraint list such as a trace attribute value.
pub fn parse_constraint_list(source: &str) -> Result<Vec<Constraint>, ParseError> {
    parse_query(source).map(|q| q.constraints)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{ConstraintKind, RuleKind};

    const LEQ: &str = "\
reflexivity r1@ leq(X,Y) <=> X=Y | true.
antisymmetry r2@ leq(X,Y), leq(Y,X) <=> X=Y.
idempotence r3@ leq(X,Y) \\ leq(X,Y) <=> true.
transitivity r4@ leq(X,Y), leq(Y,Z) ==> leq(X,Z).
";

    fn leq(a: &str, b: &str) -> Constraint {
        Constraint::new("leq", vec![Term::var(a), Term::var(b)])
    }

    #[test]
    fn reflexivity_is_guarded_simplification() {
        let p = parse_program("r1@ leq(X,Y) <=> X=Y | true.").unwrap();
        let r = &p.rules[0];
        assert_eq!(r.kind(), RuleKind::Simplification);
        assert_eq!(r.removed, vec![leq("X", "Y")]);
        assert_eq!(r.guard, vec![Constraint::eq(Term::var("X"), Term::var("Y"))]);
        assert!(r.body.is_empty());
    }

    #[test]
    fn idempotence_is_simpagation() {
        let p = parse_program("r3@ leq(X,Y) \\ leq(X,Y) <=> true.").unwrap();
        let r = &p.rules[0];
        assert_eq!(r.kind(), RuleKind::Simpagation);
        assert_eq!(r.kept, vec![leq("X", "Y")]);
        assert_eq!(r.removed, vec![leq("X", "Y")]);
        assert!(r.body.is_empty());
    }

    #[test]
    fn empty_source_has_no_rules() {
        assert!(parse_program("").unwrap().is_empty());
        assert!(parse_program("  % only a comment\n").unwrap().is_empty());
    }

    #[test]
    fn labelled_leq_program() {
        let p = parse_program(LEQ).unwrap();
        let names: Vec<_> = p.rules.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(names, ["r1", "r2", "r3", "r4"]);
        assert_eq!(p.rules[3].kind(), RuleKind::Propagation);
        assert_eq!(p.rules[3].body, vec![leq("X", "Z")]);
    }

    #[test]
    fn unnamed_rules_are_numbered() {
        let p = parse_program("p <=> q.\nq ==> r.").unwrap();
        assert_eq!(p.rules[0].name, "r1");
        assert_eq!(p.rules[1].name, "r2");
        assert_eq!(p.rules[0].removed[0].arity(), 0);
    }

    #[test]
    fn builtin_head_is_rejected() {
        let err = parse_program("bad@ X=Y <=> true.").unwrap_err();
        assert!(matches!(err, ParseError::Semantic { .. }), "{err}");
        let err = parse_program("bad@ true ==> p.").unwrap_err();
        assert!(matches!(err, ParseError::Semantic { .. }));
    }

    #[test]
    fn user_constraint_in_guard_is_rejected() {
        let err = parse_program("g@ p(X) <=> q(X) | true.").unwrap_err();
        assert!(matches!(err, ParseError::Semantic { .. }));
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let err = parse_program("a@ p <=> true.\na@ q <=> true.").unwrap_err();
        assert!(matches!(err, ParseError::Semantic { .. }));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = parse_program("r1@ leq(X,Y) <=> X=Y | true\nr2@ p <=> q.").unwrap_err();
        match err {
            ParseError::Syntax { line, column, .. } => assert_eq!((line, column), (2, 1)),
            other => panic!("unexpected {other}"),
        }
        assert!(matches!(
            parse_program("r@ p(X <=> true."),
            Err(ParseError::Syntax { .. })
        ));
        assert!(matches!(parse_program("r@ f() <=> true."), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse_program("r@ p # q."), Err(ParseError::Syntax { .. })));
    }

    #[test]
    fn queries() {
        let q = parse_query("leq(A,B), leq(B,C), leq(C,A)").unwrap();
        assert_eq!(q.constraints, vec![leq("A", "B"), leq("B", "C"), leq("C", "A")]);

        let q = parse_query("X = a").unwrap();
        assert_eq!(q.constraints, vec![Constraint::eq(Term::var("X"), Term::constant("a"))]);
        assert_eq!(q.constraints[0].kind, ConstraintKind::Builtin);

        let q = parse_query("leq(A,B), A=B.").unwrap();
        assert!(q.constraints[0].is_user_defined());
        assert!(q.constraints[1].is_builtin());

        assert!(parse_query("").unwrap().is_empty());
        assert!(parse_query("leq(A,").is_err());
        assert!(parse_query("X").is_err());
        assert!(parse_query("p, q r").is_err());
    }

    #[test]
    fn integers_are_constants() {
        let q = parse_query("fib(10, X)").unwrap();
        assert_eq!(q.constraints[0].args[0], Term::constant("10"));
        assert!(parse_query("42").is_err());
    }
}
