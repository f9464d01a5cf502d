//! Text format for knowledge bases.
//!
//! ```text
//! @concept zero/1.
//! @target digit/2.
//! digit(Pos, 0) :- zero(Pos).   % comment
//! ```

use super::kb::{KnowledgeBase, ProgramError};
use super::term::{ArithOp, Atom, CmpOp, Expr, Literal, Name, PredKey, Rule, Term};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Name(String),
    Var(String),
    Int(i64),
    Decl(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Bar,
    Comma,
    Dot,
    Neck,
    Slash,
    Cmp(CmpOp),
    Plus,
    Minus,
    Star,
    IntDiv,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Name(s) | Tok::Var(s) => format!("`{s}`"),
            Tok::Int(i) => format!("`{i}`"),
            Tok::Decl(s) => format!("`@{s}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Bar => "`|`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Neck => "`:-`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Cmp(op) => format!("`{}`", op.symbol()),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::IntDiv => "`//`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn syntax(line: usize, col: usize, message: impl Into<String>) -> ProgramError {
    ProgramError::Syntax {
        line,
        col,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<Spanned>, ProgramError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let ident = |c: char| c.is_ascii_alphanumeric() || c == '_';

    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
        let mut push = |tok: Tok, width: usize, i: &mut usize, col: &mut usize| {
            out.push(Spanned {
                tok,
                line: start_line,
                col: start_col,
            });
            *i += width;
            *col += width;
        };
        let next = chars.get(i + 1).copied();
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
            }
            '%' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '(' => push(Tok::LParen, 1, &mut i, &mut col),
            ')' => push(Tok::RParen, 1, &mut i, &mut col),
            '[' => push(Tok::LBracket, 1, &mut i, &mut col),
            ']' => push(Tok::RBracket, 1, &mut i, &mut col),
            '|' => push(Tok::Bar, 1, &mut i, &mut col),
            ',' => push(Tok::Comma, 1, &mut i, &mut col),
            '.' => push(Tok::Dot, 1, &mut i, &mut col),
            '+' => push(Tok::Plus, 1, &mut i, &mut col),
            '-' => push(Tok::Minus, 1, &mut i, &mut col),
            '*' => push(Tok::Star, 1, &mut i, &mut col),
            ':' if next == Some('-') => push(Tok::Neck, 2, &mut i, &mut col),
            '/' if next == Some('/') => push(Tok::IntDiv, 2, &mut i, &mut col),
            '/' => push(Tok::Slash, 1, &mut i, &mut col),
            '\\' if next == Some('=') => push(Tok::Cmp(CmpOp::Neq), 2, &mut i, &mut col),
            '=' if next == Some('<') => push(Tok::Cmp(CmpOp::Le), 2, &mut i, &mut col),
            '=' => push(Tok::Cmp(CmpOp::Eq), 1, &mut i, &mut col),
            '<' => push(Tok::Cmp(CmpOp::Lt), 1, &mut i, &mut col),
            '>' if next == Some('=') => push(Tok::Cmp(CmpOp::Ge), 2, &mut i, &mut col),
            '>' => push(Tok::Cmp(CmpOp::Gt), 1, &mut i, &mut col),
            '@' => {
                let len = chars[i + 1..].iter().take_while(|&&c| ident(c)).count();
                let word: String = chars[i + 1..i + 1 + len].iter().collect();
                if word != "concept" && word != "target" {
                    return Err(syntax(line, col, format!("unknown declaration `@{word}`")));
                }
                push(Tok::Decl(word), len + 1, &mut i, &mut col);
            }
            c if c.is_ascii_digit() => {
                let len = chars[i..].iter().take_while(|c| c.is_ascii_digit()).count();
                let digits: String = chars[i..i + len].iter().collect();
                let value = digits
                    .parse::<i64>()
                    .map_err(|_| syntax(line, col, format!("integer `{digits}` out of range")))?;
                push(Tok::Int(value), len, &mut i, &mut col);
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let len = chars[i..].iter().take_while(|&&c| ident(c)).count();
                let word: String = chars[i..i + len].iter().collect();
                let tok = if c.is_ascii_lowercase() {
                    Tok::Name(word)
                } else {
                    Tok::Var(word)
                };
                push(tok, len, &mut i, &mut col);
            }
            other => return Err(syntax(line, col, format!("unexpected character `{other}`"))),
        }
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    anon: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, ahead: usize) -> &Tok {
        let i = (self.pos + ahead).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn bump(&mut self) -> Tok {
        let tok = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn error(&self, message: impl Into<String>) -> ProgramError {
        let (line, col) = self.here();
        syntax(line, col, message)
    }

    fn unexpected(&self, wanted: &str) -> ProgramError {
        self.error(format!("expected {wanted}, found {}", self.peek().describe()))
    }

    fn expect(&mut self, tok: Tok, wanted: &str) -> Result<(), ProgramError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(wanted))
        }
    }

    fn name(&mut self) -> Result<String, ProgramError> {
        match self.peek() {
            Tok::Name(_) => match self.bump() {
                Tok::Name(s) => Ok(s),
                _ => unreachable!(),
            },
            _ => Err(self.unexpected("a name")),
        }
    }

    fn pred_key(&mut self) -> Result<PredKey, ProgramError> {
        let name = self.name()?;
        self.expect(Tok::Slash, "`/`")?;
        match self.bump() {
            Tok::Int(n) => Ok(PredKey::new(name.as_str(), n as usize)),
            _ => {
                self.pos -= 1;
                Err(self.unexpected("an arity"))
            }
        }
    }

    fn args(&mut self) -> Result<Vec<Term>, ProgramError> {
        let mut args = Vec::new();
        if *self.peek() == Tok::LParen {
            self.bump();
            args.push(self.term()?);
            while *self.peek() == Tok::Comma {
                self.bump();
                args.push(self.term()?);
            }
            self.expect(Tok::RParen, "`,` or `)`")?;
        }
        Ok(args)
    }

    fn atom(&mut self) -> Result<Atom, ProgramError> {
        let name = self.name()?;
        let args = self.args()?;
        Ok(Atom::new(&name, args))
    }

    fn var(&mut self, name: String) -> Term {
        if name == "_" {
            self.anon += 1;
            Term::Var(Name::new(&format!("_Anon{}", self.anon)))
        } else {
            Term::Var(Name::new(&name))
        }
    }

    fn term(&mut self) -> Result<Term, ProgramError> {
        match self.peek().clone() {
            Tok::Var(v) => {
                self.bump();
                Ok(self.var(v))
            }
            Tok::Int(i) => {
                self.bump();
                Ok(Term::Int(i))
            }
            Tok::Minus => match *self.peek_at(1) {
                Tok::Int(i) => {
                    self.bump();
                    self.bump();
                    Ok(Term::Int(-i))
                }
                _ => Err(self.unexpected("a term")),
            },
            Tok::Name(_) => {
                let name = self.name()?;
                let args = self.args()?;
                Ok(Term::compound(&name, args))
            }
            Tok::LBracket => {
                self.bump();
                if *self.peek() == Tok::RBracket {
                    self.bump();
                    return Ok(Term::List(Vec::new(), None));
                }
                let mut items = vec![self.term()?];
                while *self.peek() == Tok::Comma {
                    self.bump();
                    items.push(self.term()?);
                }
                let tail = if *self.peek() == Tok::Bar {
                    self.bump();
                    let (line, col) = self.here();
                    let tail = self.term()?;
                    if !matches!(tail, Term::Var(_) | Term::List(..)) {
                        return Err(syntax(line, col, "list tail must be a variable or a list"));
                    }
                    Some(tail)
                } else {
                    None
                };
                self.expect(Tok::RBracket, "`,`, `|` or `]`")?;
                Ok(Term::list(items, tail))
            }
            _ => Err(self.unexpected("a term")),
        }
    }

    fn expr(&mut self) -> Result<Expr, ProgramError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => ArithOp::Add,
                Tok::Minus => ArithOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::bin(op, lhs, self.product()?);
        }
    }

    fn product(&mut self) -> Result<Expr, ProgramError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => ArithOp::Mul,
                Tok::IntDiv => ArithOp::IntDiv,
                Tok::Name(n) if n == "mod" => ArithOp::Mod,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::bin(op, lhs, self.unary()?);
        }
    }

    fn unary(&mut self) -> Result<Expr, ProgramError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(match self.unary()? {
                Expr::Int(i) => Expr::Int(-i),
                e => Expr::Neg(Box::new(e)),
            });
        }
        match self.peek().clone() {
            Tok::Int(i) => {
                self.bump();
                Ok(Expr::Int(i))
            }
            Tok::Var(v) => {
                self.bump();
                match self.var(v) {
                    Term::Var(name) => Ok(Expr::Var(name)),
                    _ => unreachable!(),
                }
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Name(n) if n == "abs" && *self.peek_at(1) == Tok::LParen => {
                self.bump();
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(Expr::Abs(Box::new(e)))
            }
            _ => Err(self.unexpected("an arithmetic expression")),
        }
    }

    fn literal(&mut self) -> Result<Literal, ProgramError> {
        let (line, col) = self.here();
        let lhs = self.term()?;
        match self.peek().clone() {
            Tok::Name(n) if n == "is" => {
                self.bump();
                Ok(Literal::Is(lhs, self.expr()?))
            }
            Tok::Cmp(op) => {
                self.bump();
                Ok(Literal::Compare(op, lhs, self.term()?))
            }
            _ => match lhs {
                Term::Sym(name) => Ok(Literal::Atom(Atom {
                    predicate: name,
                    args: Vec::new(),
                })),
                Term::Compound(name, args) => Ok(Literal::Atom(Atom {
                    predicate: name,
                    args,
                })),
                _ => Err(syntax(line, col, "expected a literal")),
            },
        }
    }

    fn clause(&mut self) -> Result<Rule, ProgramError> {
        let head = self.atom()?;
        let mut body = Vec::new();
        if *self.peek() == Tok::Neck {
            self.bump();
            body.push(self.literal()?);
            while *self.peek() == Tok::Comma {
                self.bump();
                body.push(self.literal()?);
            }
        }
        self.expect(Tok::Dot, "`,`, `:-` or `.`")?;
        Ok(Rule { id: 0, head, body })
    }
}

/// Parses program text into a validated knowledge base.
pub fn parse_program(text: &str) -> Result<KnowledgeBase, ProgramError> {
    let mut parser = Parser {
        toks: lex(text)?,
        pos: 0,
        anon: 0,
    };
    let mut rules = Vec::new();
    let mut lines = Vec::new();
    let mut concepts = Vec::new();
    let mut target = None;

    while *parser.peek() != Tok::Eof {
        if let Tok::Decl(kind) = parser.peek().clone() {
            parser.bump();
            let key = parser.pred_key()?;
            parser.expect(Tok::Dot, "`.`")?;
            if kind == "concept" {
                if concepts.contains(&key) {
                    return Err(ProgramError::DuplicateConcept(key));
                }
                concepts.push(key);
            } else if target.replace(key).is_some() {
                return Err(ProgramError::DuplicateTarget);
            }
        } else {
            lines.push(parser.here().0);
            rules.push(parser.clause()?);
        }
    }
    let target = target.ok_or(ProgramError::MissingTarget)?;
    KnowledgeBase::validated(rules, concepts, target, Some(&lines))
}

/// Parses a single atom such as `digit(p1, 0)`.
pub fn parse_atom(text: &str) -> Result<Atom, ProgramError> {
    let mut parser = Parser {
        toks: lex(text)?,
        pos: 0,
        anon: 0,
    };
    let atom = parser.atom()?;
    if *parser.peek() == Tok::Dot {
        parser.bump();
    }
    if *parser.peek() != Tok::Eof {
        return Err(parser.unexpected("end of input"));
    }
    Ok(atom)
}

/// Parses a conjunction of literals such as `number([a, b], N), N > 3`.
pub fn parse_goal(text: &str) -> Result<Vec<Literal>, ProgramError> {
    let mut parser = Parser {
        toks: lex(text)?,
        pos: 0,
        anon: 0,
    };
    let mut goal = Vec::new();
    if *parser.peek() != Tok::Eof {
        goal.push(parser.literal()?);
        while *parser.peek() == Tok::Comma {
            parser.bump();
            goal.push(parser.literal()?);
        }
    }
    if *parser.peek() == Tok::Dot {
        parser.bump();
    }
    if *parser.peek() != Tok::Eof {
        return Err(parser.unexpected("`,` or end of input"));
    }
    Ok(goal)
}

/// Parses a single term.
pub fn parse_term(text: &str) -> Result<Term, ProgramError> {
    let mut parser = Parser {
        toks: lex(text)?,
        pos: 0,
        anon: 0,
    };
    let term = parser.term()?;
    if *parser.peek() != Tok::Eof {
        return Err(parser.unexpected("end of input"));
    }
    Ok(term)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_digit_rule() {
        let kb = parse_program("@concept zero/1.\n@target digit/2.\ndigit(Pos,0) :- zero(Pos).\n")
            .unwrap();
        assert_eq!(kb.len(), 1);
        assert_eq!(kb.concepts(), &[PredKey::new("zero", 1)]);
        assert_eq!(kb.rule(0).to_string(), "digit(Pos, 0) :- zero(Pos).");
    }

    #[test]
    fn declarations_without_target_rule() {
        let err = parse_program("@concept zero/1.\n@target digit/2.\n").unwrap_err();
        assert_eq!(err, ProgramError::UndefinedTarget(PredKey::new("digit", 2)));
        assert_eq!(parse_program("").unwrap_err(), ProgramError::MissingTarget);
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_program("@target p/0.\np :- q(X\n").unwrap_err();
        assert_eq!(
            err,
            ProgramError::Syntax {
                line: 3,
                col: 1,
                message: "expected `,` or `)`, found end of input".into()
            }
        );
        let err = parse_program("@target p/0.\n  p :- $.").unwrap_err();
        assert!(matches!(err, ProgramError::Syntax { line: 2, col: 8, .. }));
    }

    #[test]
    fn arity_conflict_reports_line() {
        let text = "@concept c/1.\n@target p/0.\np :- c(a).\np :- c(a, b).\n";
        let err = parse_program(text).unwrap_err();
        assert_eq!(err.to_string(), "line 4: c is declared with arity 1 but used with arity 2");
    }

    #[test]
    fn builtins_and_expressions() {
        let goal = parse_goal("S is DX*DX + DY*DY, 0 is A - -3 mod 2, X \\= Y, A =< B").unwrap();
        assert_eq!(goal.len(), 4);
        assert_eq!(goal[0].to_string(), "S is DX * DX + DY * DY");
        assert_eq!(goal[1].to_string(), "0 is A - (-3) mod 2");
        assert_eq!(goal[2].to_string(), "X \\= Y");
        assert_eq!(goal[3].to_string(), "A =< B");
    }

    #[test]
    fn lists_and_negative_ints() {
        let t = parse_term("[H|[a, -1|T]]").unwrap();
        assert_eq!(t.to_string(), "[H, a, -1|T]");
        assert!(parse_term("[a|b]").is_err());
    }

    #[test]
    fn anonymous_variables_are_distinct() {
        let goal = parse_goal("p(_, _)").unwrap();
        let Literal::Atom(a) = &goal[0] else { panic!() };
        assert_ne!(a.args[0], a.args[1]);
    }

    #[test]
    fn display_round_trips() {
        let text = "@concept one/1.\n@target n/2.\n\
                    n([H|T], R) :- one(H), n(T, R0), R is abs(R0 * 10 - 3) // 2.\nn([], 0).\n";
        let kb = parse_program(text).unwrap();
        assert_eq!(parse_program(&kb.to_source()).unwrap(), kb);
    }
}
