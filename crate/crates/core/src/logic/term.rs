//! Terms, atoms, literals and rules of the Horn-clause language.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{OnceLock, RwLock};

/// An interned identifier. Cheap to copy and compare; ordered by its text.
#[derive(Copy, Clone, PartialEq, Eq, Hash)]
pub struct Name(u32);

struct Interner {
    ids: HashMap<&'static str, u32>,
    names: Vec<&'static str>,
}

fn interner() -> &'static RwLock<Interner> {
    static INTERNER: OnceLock<RwLock<Interner>> = OnceLock::new();
    INTERNER.get_or_init(|| {
        RwLock::new(Interner {
            ids: HashMap::new(),
            names: Vec::new(),
        })
    })
}

impl Name {
    pub fn new(text: &str) -> Name {
        if let Some(&id) = interner().read().unwrap().ids.get(text) {
            return Name(id);
        }
        let mut table = interner().write().unwrap();
        if let Some(&id) = table.ids.get(text) {
            return Name(id);
        }
        let leaked: &'static str = Box::leak(text.to_owned().into_boxed_str());
        let id = table.names.len() as u32;
        table.names.push(leaked);
        table.ids.insert(leaked, id);
        Name(id)
    }

    pub fn as_str(self) -> &'static str {
        interner().read().unwrap().names[self.0 as usize]
    }
}

impl From<&str> for Name {
    fn from(text: &str) -> Self {
        Name::new(text)
    }
}

impl PartialOrd for Name {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Name {
    fn cmp(&self, other: &Self) -> Ordering {
        if self.0 == other.0 {
            Ordering::Equal
        } else {
            self.as_str().cmp(other.as_str())
        }
    }
}

impl fmt::Debug for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A predicate identified by name and arity, e.g. `number/3`.
#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PredKey {
    pub name: Name,
    pub arity: usize,
}

impl PredKey {
    pub fn new(name: impl Into<Name>, arity: usize) -> Self {
        PredKey {
            name: name.into(),
            arity,
        }
    }
}

impl fmt::Debug for PredKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

impl fmt::Display for PredKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Term {
    Var(Name),
    Sym(Name),
    Int(i64),
    /// Items plus an optional tail. Kept normalised: the tail is never a list.
    List(Vec<Term>, Option<Box<Term>>),
    Compound(Name, Vec<Term>),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(Name::new(name))
    }

    pub fn sym(name: &str) -> Term {
        Term::Sym(Name::new(name))
    }

    pub fn compound(functor: &str, args: Vec<Term>) -> Term {
        if args.is_empty() {
            Term::Sym(Name::new(functor))
        } else {
            Term::Compound(Name::new(functor), args)
        }
    }

    /// Builds a list, splicing a list-valued tail into the items. An empty
    /// list with a tail is the tail itself.
    pub fn list(mut items: Vec<Term>, tail: Option<Term>) -> Term {
        match tail {
            None => Term::List(items, None),
            Some(Term::List(more, rest)) => {
                items.extend(more);
                Term::List(items, rest)
            }
            Some(other) if items.is_empty() => other,
            Some(other) => Term::List(items, Some(Box::new(other))),
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Sym(_) | Term::Int(_) => true,
            Term::List(items, tail) => {
                items.iter().all(Term::is_ground) && tail.as_deref().is_none_or(Term::is_ground)
            }
            Term::Compound(_, args) => args.iter().all(Term::is_ground),
        }
    }

    pub fn occurs(&self, var: Name) -> bool {
        match self {
            Term::Var(v) => *v == var,
            Term::Sym(_) | Term::Int(_) => false,
            Term::List(items, tail) => {
                items.iter().any(|t| t.occurs(var)) || tail.as_deref().is_some_and(|t| t.occurs(var))
            }
            Term::Compound(_, args) => args.iter().any(|t| t.occurs(var)),
        }
    }

    pub fn variables(&self, out: &mut Vec<Name>) {
        match self {
            Term::Var(v) => {
                if !out.contains(v) {
                    out.push(*v)
                }
            }
            Term::Sym(_) | Term::Int(_) => {}
            Term::List(items, tail) => {
                items.iter().for_each(|t| t.variables(out));
                if let Some(t) = tail {
                    t.variables(out)
                }
            }
            Term::Compound(_, args) => args.iter().for_each(|t| t.variables(out)),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) | Term::Sym(v) => write!(f, "{v}"),
            Term::Int(i) => write!(f, "{i}"),
            Term::List(items, tail) => {
                f.write_str("[")?;
                write_joined(f, items)?;
                if let Some(t) = tail {
                    write!(f, "|{t}")?;
                }
                f.write_str("]")
            }
            Term::Compound(functor, args) => {
                write!(f, "{functor}(")?;
                write_joined(f, args)?;
                f.write_str(")")
            }
        }
    }
}

fn write_joined<T: fmt::Display>(f: &mut fmt::Formatter<'_>, items: &[T]) -> fmt::Result {
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{item}")?;
    }
    Ok(())
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Atom {
    pub predicate: Name,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: &str, args: Vec<Term>) -> Atom {
        Atom {
            predicate: Name::new(predicate),
            args,
        }
    }

    pub fn key(&self) -> PredKey {
        PredKey {
            name: self.predicate,
            arity: self.args.len(),
        }
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(Term::is_ground)
    }

    pub fn to_term(&self) -> Term {
        if self.args.is_empty() {
            Term::Sym(self.predicate)
        } else {
            Term::Compound(self.predicate, self.args.clone())
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.predicate)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            write_joined(f, &self.args)?;
            f.write_str(")")?;
        }
        Ok(())
    }
}

#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    IntDiv,
    Mod,
}

impl ArithOp {
    fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::IntDiv => "//",
            ArithOp::Mod => "mod",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            ArithOp::Add | ArithOp::Sub => 1,
            _ => 2,
        }
    }
}

/// Right-hand side of `is`.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Expr {
    Int(i64),
    Var(Name),
    Neg(Box<Expr>),
    Abs(Box<Expr>),
    Bin(ArithOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn bin(op: ArithOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Bin(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn variables(&self, out: &mut Vec<Name>) {
        match self {
            Expr::Int(_) => {}
            Expr::Var(v) => {
                if !out.contains(v) {
                    out.push(*v)
                }
            }
            Expr::Neg(e) | Expr::Abs(e) => e.variables(out),
            Expr::Bin(_, a, b) => {
                a.variables(out);
                b.variables(out);
            }
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, parent: u8) -> fmt::Result {
        match self {
            Expr::Int(i) if *i < 0 => write!(f, "({i})"),
            Expr::Int(i) => write!(f, "{i}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(e) => {
                f.write_str("-(")?;
                e.fmt_prec(f, 0)?;
                f.write_str(")")
            }
            Expr::Abs(e) => {
                f.write_str("abs(")?;
                e.fmt_prec(f, 0)?;
                f.write_str(")")
            }
            Expr::Bin(op, a, b) => {
                let prec = op.precedence();
                let wrap = prec < parent;
                if wrap {
                    f.write_str("(")?;
                }
                a.fmt_prec(f, prec)?;
                write!(f, " {} ", op.symbol())?;
                // left-associative: a right operand of equal precedence needs parentheses
                b.fmt_prec(f, prec + 1)?;
                if wrap {
                    f.write_str(")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug)]
pub enum CmpOp {
    Eq,
    Neq,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Neq => "\\=",
            CmpOp::Lt => "<",
            CmpOp::Le => "=<",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Literal {
    Atom(Atom),
    Is(Term, Expr),
    Compare(CmpOp, Term, Term),
}

impl Literal {
    pub fn as_atom(&self) -> Option<&Atom> {
        match self {
            Literal::Atom(a) => Some(a),
            _ => None,
        }
    }

    pub fn variables(&self, out: &mut Vec<Name>) {
        match self {
            Literal::Atom(a) => a.args.iter().for_each(|t| t.variables(out)),
            Literal::Is(t, e) => {
                t.variables(out);
                e.variables(out);
            }
            Literal::Compare(_, a, b) => {
                a.variables(out);
                b.variables(out);
            }
        }
    }
}

impl From<Atom> for Literal {
    fn from(atom: Atom) -> Self {
        Literal::Atom(atom)
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Atom(a) => write!(f, "{a}"),
            Literal::Is(t, e) => write!(f, "{t} is {e}"),
            Literal::Compare(op, a, b) => write!(f, "{a} {} {b}", op.symbol()),
        }
    }
}

/// Position of a rule in its knowledge base.
pub type RuleId = usize;

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Rule {
    pub id: RuleId,
    pub head: Atom,
    pub body: Vec<Literal>,
}

impl Rule {
    pub fn body_atoms(&self) -> impl Iterator<Item = &Atom> {
        self.body.iter().filter_map(Literal::as_atom)
    }

    pub fn is_fact(&self) -> bool {
        self.body.is_empty()
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        if !self.body.is_empty() {
            f.write_str(" :- ")?;
            write_joined(f, &self.body)?;
        }
        f.write_str(".")
    }
}

/// Variable bindings kept in solved form: no bound variable occurs in any value.
#[derive(Clone, Default, PartialEq, Eq, Debug)]
pub struct Substitution {
    bindings: BTreeMap<Name, Term>,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, var: Name) -> Option<&Term> {
        self.bindings.get(&var)
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Name, &Term)> {
        self.bindings.iter()
    }

    pub fn apply(&self, term: &Term) -> Term {
        match term {
            Term::Var(v) => match self.bindings.get(v) {
                Some(value) => value.clone(),
                None => term.clone(),
            },
            Term::Sym(_) | Term::Int(_) => term.clone(),
            Term::List(items, tail) => Term::list(
                items.iter().map(|t| self.apply(t)).collect(),
                tail.as_deref().map(|t| self.apply(t)),
            ),
            Term::Compound(functor, args) => {
                Term::Compound(*functor, args.iter().map(|t| self.apply(t)).collect())
            }
        }
    }

    pub fn apply_atom(&self, atom: &Atom) -> Atom {
        Atom {
            predicate: atom.predicate,
            args: atom.args.iter().map(|t| self.apply(t)).collect(),
        }
    }

    /// Adds `var ↦ value`, keeping the solved form. `value` must already have
    /// this substitution applied and must not contain `var`.
    pub(crate) fn bind(&mut self, var: Name, value: Term) {
        let single = Substitution {
            bindings: BTreeMap::from([(var, value.clone())]),
        };
        for existing in self.bindings.values_mut() {
            if existing.occurs(var) {
                *existing = single.apply(existing);
            }
        }
        self.bindings.insert(var, value);
    }

    pub(crate) fn insert_raw(&mut self, var: Name, value: Term) {
        self.bindings.insert(var, value);
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (var, value)) in self.bindings.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{var} ↦ {value}")?;
        }
        f.write_str("}")
    }
}
