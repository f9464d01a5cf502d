//! Depth-first SLD resolution with source-order clause selection.
//!
//! Clauses are compiled once into skeletons whose variables are slot numbers.
//! A clause is renamed apart by offsetting its slots into a growing binding
//! store; backtracking truncates the store and unwinds a trail.

use std::collections::{HashMap, HashSet};
use std::rc::Rc;
use std::sync::Arc;

use thiserror::Error;

use super::kb::KnowledgeBase;
use super::term::{ArithOp, Atom, CmpOp, Expr, Literal, Name, PredKey, RuleId, Substitution, Term};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SolveError {
    #[error("resolution budget of {0} steps exhausted")]
    DepthExceeded(usize),
    #[error("arithmetic argument is not sufficiently instantiated")]
    Instantiation,
    #[error("arithmetic argument `{0}` is not an integer")]
    Type(String),
    #[error("arithmetic {0}")]
    Arithmetic(&'static str),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct SolveLimits {
    /// Budget of clause tries plus builtin evaluations for one query.
    pub max_steps: usize,
    pub max_solutions: Option<usize>,
}

impl SolveLimits {
    pub fn new(max_steps: usize, max_solutions: Option<usize>) -> Self {
        assert!(max_steps > 0, "step budget must be positive");
        assert!(max_solutions != Some(0), "solution cap must be positive");
        SolveLimits {
            max_steps,
            max_solutions,
        }
    }

    pub fn steps(max_steps: usize) -> Self {
        Self::new(max_steps, None)
    }
}

impl Default for SolveLimits {
    fn default() -> Self {
        SolveLimits {
            max_steps: 10_000,
            max_solutions: None,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Entailment {
    True,
    False,
    /// The step budget ran out before a proof was found.
    Indeterminate,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum T {
    Var(u32),
    Sym(Name),
    Int(i64),
    Nil,
    Cons(Arc<(T, T)>),
    Fn(Name, Arc<[T]>),
}

/// Clause-level term: variables are slots relative to the clause's base.
#[derive(Debug)]
enum Ct {
    Var(u32),
    Ground(T),
    Cons(Box<(Ct, Ct)>),
    Fn(Name, Box<[Ct]>),
}

#[derive(Debug)]
enum CExpr {
    Int(i64),
    Var(u32),
    Neg(Box<CExpr>),
    Abs(Box<CExpr>),
    Bin(ArithOp, Box<CExpr>, Box<CExpr>),
}

#[derive(Debug)]
enum Goal {
    Call(u32, Box<[Ct]>),
    Is(Ct, CExpr),
    Cmp(CmpOp, Ct, Ct),
}

#[derive(Debug)]
struct Clause {
    pred: u32,
    nvars: u32,
    head: Box<[Ct]>,
    body: Box<[Goal]>,
}

#[derive(Default)]
struct Slots {
    names: Vec<Name>,
}

impl Slots {
    fn slot(&mut self, name: Name) -> u32 {
        match self.names.iter().position(|&n| n == name) {
            Some(i) => i as u32,
            None => {
                self.names.push(name);
                (self.names.len() - 1) as u32
            }
        }
    }
}

fn compile_term(term: &Term, slots: &mut Slots) -> Ct {
    let ct = match term {
        Term::Var(v) => return Ct::Var(slots.slot(*v)),
        Term::Sym(s) => return Ct::Ground(T::Sym(*s)),
        Term::Int(i) => return Ct::Ground(T::Int(*i)),
        Term::List(items, tail) => {
            let end = match tail {
                Some(t) => compile_term(t, slots),
                None => Ct::Ground(T::Nil),
            };
            items.iter().rev().fold(end, |acc, item| {
                Ct::Cons(Box::new((compile_term(item, slots), acc)))
            })
        }
        Term::Compound(f, args) => Ct::Fn(*f, args.iter().map(|a| compile_term(a, slots)).collect()),
    };
    match ground_value(&ct) {
        Some(t) => Ct::Ground(t),
        None => ct,
    }
}

fn ground_value(ct: &Ct) -> Option<T> {
    match ct {
        Ct::Var(_) => None,
        Ct::Ground(t) => Some(t.clone()),
        Ct::Cons(pair) => Some(T::Cons(Arc::new((ground_value(&pair.0)?, ground_value(&pair.1)?)))),
        Ct::Fn(f, args) => {
            let args: Option<Vec<T>> = args.iter().map(ground_value).collect();
            Some(T::Fn(*f, args?.into()))
        }
    }
}

fn compile_expr(expr: &Expr, slots: &mut Slots) -> CExpr {
    match expr {
        Expr::Int(i) => CExpr::Int(*i),
        Expr::Var(v) => CExpr::Var(slots.slot(*v)),
        Expr::Neg(e) => CExpr::Neg(Box::new(compile_expr(e, slots))),
        Expr::Abs(e) => CExpr::Abs(Box::new(compile_expr(e, slots))),
        Expr::Bin(op, a, b) => CExpr::Bin(
            *op,
            Box::new(compile_expr(a, slots)),
            Box::new(compile_expr(b, slots)),
        ),
    }
}

/// Predicate numbering shared by a compiled knowledge base and the queries run against it.
trait PredIds {
    fn pred_id(&mut self, key: PredKey) -> u32;
}

fn compile_clause(
    head: &Atom,
    body: &[Literal],
    ids: &mut impl PredIds,
    slots: &mut Slots,
) -> Clause {
    let pred = ids.pred_id(head.key());
    let head = head.args.iter().map(|a| compile_term(a, slots)).collect();
    let body = body
        .iter()
        .map(|lit| match lit {
            Literal::Atom(a) => Goal::Call(
                ids.pred_id(a.key()),
                a.args.iter().map(|t| compile_term(t, slots)).collect(),
            ),
            Literal::Is(lhs, e) => Goal::Is(compile_term(lhs, slots), compile_expr(e, slots)),
            Literal::Compare(op, a, b) => {
                Goal::Cmp(*op, compile_term(a, slots), compile_term(b, slots))
            }
        })
        .collect();
    Clause {
        pred,
        nvars: slots.names.len() as u32,
        head,
        body,
    }
}

#[derive(Debug, Default)]
struct Compiled {
    ids: HashMap<PredKey, u32>,
    keys: Vec<PredKey>,
    clauses: Vec<Clause>,
}

impl PredIds for Compiled {
    fn pred_id(&mut self, key: PredKey) -> u32 {
        if let Some(&id) = self.ids.get(&key) {
            return id;
        }
        let id = self.keys.len() as u32;
        self.keys.push(key);
        self.ids.insert(key, id);
        id
    }
}

/// A knowledge base compiled for querying, optionally restricted to a subset
/// of its rules. Cheap to clone and safe to share across threads.
#[derive(Clone, Debug)]
pub struct Theory {
    compiled: Arc<Compiled>,
    by_pred: Arc<Vec<Vec<u32>>>,
    occurs_check: bool,
}

impl Theory {
    pub fn new(kb: &KnowledgeBase) -> Self {
        let mut compiled = Compiled::default();
        for rule in kb.rules() {
            let clause = compile_clause(&rule.head, &rule.body, &mut compiled, &mut Slots::default());
            compiled.clauses.push(clause);
        }
        let mut theory = Theory {
            compiled: Arc::new(compiled),
            by_pred: Arc::new(Vec::new()),
            occurs_check: false,
        };
        theory.by_pred = Arc::new(theory.index(0..kb.len()));
        theory
    }

    fn index(&self, rules: impl IntoIterator<Item = RuleId>) -> Vec<Vec<u32>> {
        let mut active = vec![false; self.compiled.clauses.len()];
        for id in rules {
            active[id] = true;
        }
        let mut by_pred = vec![Vec::new(); self.compiled.keys.len()];
        for (id, clause) in self.compiled.clauses.iter().enumerate() {
            if active[id] {
                by_pred[clause.pred as usize].push(id as u32);
            }
        }
        by_pred
    }

    /// The same knowledge base with only the given rules active.
    pub fn restrict(&self, rules: impl IntoIterator<Item = RuleId>) -> Self {
        Theory {
            compiled: self.compiled.clone(),
            by_pred: Arc::new(self.index(rules)),
            occurs_check: self.occurs_check,
        }
    }

    pub fn with_occurs_check(mut self, on: bool) -> Self {
        self.occurs_check = on;
        self
    }

    /// Answers to `goal` with `facts` added after the rules.
    pub fn solve(&self, goal: &[Literal], facts: &[Atom], limits: SolveLimits) -> Solutions {
        Solutions::new(self.clone(), goal, facts, limits, false)
    }

    /// Whether the ground atom `q` follows. Other solver errors propagate.
    pub fn entails(
        &self,
        q: &Atom,
        facts: &[Atom],
        limits: SolveLimits,
    ) -> Result<Entailment, SolveError> {
        let limits = SolveLimits {
            max_solutions: Some(1),
            ..limits
        };
        match self.solve(&[Literal::Atom(q.clone())], facts, limits).next() {
            Some(Ok(_)) => Ok(Entailment::True),
            None => Ok(Entailment::False),
            Some(Err(SolveError::DepthExceeded(_))) => Ok(Entailment::Indeterminate),
            Some(Err(e)) => Err(e),
        }
    }

    /// Runs `goal` to exhaustion and returns every ground atom proven along
    /// the way, in display order. `complete` is false when the budget ran out.
    pub fn harvest(&self, goal: &[Literal], facts: &[Atom], limits: SolveLimits) -> Harvest {
        let mut solutions = Solutions::new(self.clone(), goal, facts, limits, true);
        let mut complete = true;
        for answer in solutions.by_ref() {
            if answer.is_err() {
                complete = false;
                break;
            }
        }
        let mut lemmas: Vec<Atom> = solutions.machine.lemmas.take().unwrap_or_default().into_iter().collect();
        lemmas.sort_by_cached_key(|a| a.to_string());
        Harvest { lemmas, complete }
    }
}

#[derive(Clone, Debug)]
pub struct Harvest {
    pub lemmas: Vec<Atom>,
    pub complete: bool,
}

/// Clauses local to one query: injected facts followed by the query itself.
struct Program {
    theory: Theory,
    extra: Vec<Clause>,
    extra_ids: HashMap<PredKey, u32>,
    facts_by_pred: HashMap<u32, Vec<u32>>,
    query_vars: Vec<Name>,
}

impl PredIds for Program {
    fn pred_id(&mut self, key: PredKey) -> u32 {
        if let Some(&id) = self.theory.compiled.ids.get(&key) {
            return id;
        }
        let next = (self.theory.compiled.keys.len() + self.extra_ids.len()) as u32;
        *self.extra_ids.entry(key).or_insert(next)
    }
}

impl Program {
    fn clause(&self, cref: u32) -> &Clause {
        let base = self.theory.compiled.clauses.len();
        match (cref as usize).checked_sub(base) {
            Some(i) => &self.extra[i],
            None => &self.theory.compiled.clauses[cref as usize],
        }
    }

    fn query_ref(&self) -> u32 {
        (self.theory.compiled.clauses.len() + self.extra.len() - 1) as u32
    }

    fn key_of(&self, pred: u32) -> PredKey {
        let keys = &self.theory.compiled.keys;
        match keys.get(pred as usize) {
            Some(&k) => k,
            None => *self.extra_ids.iter().find(|(_, &id)| id == pred).unwrap().0,
        }
    }

    fn candidates(&self, pred: u32) -> (&[u32], &[u32]) {
        let rules = self
            .theory
            .by_pred
            .get(pred as usize)
            .map(Vec::as_slice)
            .unwrap_or(&[]);
        let facts = self
            .facts_by_pred
            .get(&pred)
            .map(Vec::as_slice)
            .unwrap_or(&[]);
        (rules, facts)
    }
}

struct Cont {
    clause: u32,
    pos: usize,
    base: u32,
    next: Option<Rc<Cont>>,
}

struct Choice {
    pred: u32,
    args: Rc<[T]>,
    next: usize,
    cont: Option<Rc<Cont>>,
    trail: usize,
    vars: usize,
}

struct Machine {
    vars: Vec<Option<T>>,
    trail: Vec<u32>,
    cont: Option<Rc<Cont>>,
    choices: Vec<Choice>,
    steps: usize,
    limits: SolveLimits,
    occurs_check: bool,
    lemmas: Option<HashSet<Atom>>,
}

/// Stream of answer substitutions for one query.
pub struct Solutions {
    program: Program,
    machine: Machine,
    found: usize,
    started: bool,
    done: bool,
}

impl Solutions {
    fn new(theory: Theory, goal: &[Literal], facts: &[Atom], limits: SolveLimits, harvest: bool) -> Self {
        let occurs_check = theory.occurs_check;
        let base = theory.compiled.clauses.len() as u32;
        let mut program = Program {
            theory,
            extra: Vec::new(),
            extra_ids: HashMap::new(),
            facts_by_pred: HashMap::new(),
            query_vars: Vec::new(),
        };
        for fact in facts {
            let clause = compile_clause(fact, &[], &mut program, &mut Slots::default());
            let cref = base + program.extra.len() as u32;
            program.facts_by_pred.entry(clause.pred).or_default().push(cref);
            program.extra.push(clause);
        }
        let mut slots = Slots::default();
        let query_head = Atom {
            predicate: Name::new("$query"),
            args: Vec::new(),
        };
        let query = compile_clause(&query_head, goal, &mut program, &mut slots);
        program.query_vars = slots.names;
        let nvars = query.nvars as usize;
        program.extra.push(query);
        let machine = Machine {
            vars: vec![None; nvars],
            trail: Vec::new(),
            cont: Some(Rc::new(Cont {
                clause: program.query_ref(),
                pos: 0,
                base: 0,
                next: None,
            })),
            choices: Vec::new(),
            steps: 0,
            limits,
            occurs_check,
            lemmas: harvest.then(HashSet::new),
        };
        Solutions {
            program,
            machine,
            found: 0,
            started: false,
            done: false,
        }
    }

    fn answer(&self) -> Substitution {
        let mut s = Substitution::new();
        for (i, &name) in self.program.query_vars.iter().enumerate() {
            if name.as_str().starts_with("_Anon") {
                continue;
            }
            match self.machine.deref(&T::Var(i as u32)) {
                T::Var(v) if v == i as u32 => {}
                value => s.insert_raw(name, self.machine.to_term(&value)),
            }
        }
        s
    }
}

impl Iterator for Solutions {
    type Item = Result<Substitution, SolveError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done || self.machine.limits.max_solutions.is_some_and(|n| self.found >= n) {
            return None;
        }
        let outcome = if self.started {
            match self.machine.backtrack(&self.program) {
                Ok(true) => self.machine.run(&self.program),
                other => other,
            }
        } else {
            self.started = true;
            self.machine.run(&self.program)
        };
        match outcome {
            Ok(true) => {
                self.found += 1;
                Some(Ok(self.answer()))
            }
            Ok(false) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

impl Machine {
    fn tick(&mut self) -> Result<(), SolveError> {
        self.steps += 1;
        if self.steps > self.limits.max_steps {
            Err(SolveError::DepthExceeded(self.limits.max_steps))
        } else {
            Ok(())
        }
    }

    /// Drives resolution until the continuation is empty (an answer) or
    /// every alternative has failed.
    fn run(&mut self, program: &Program) -> Result<bool, SolveError> {
        loop {
            let Some(cont) = self.cont.clone() else {
                return Ok(true);
            };
            let clause = program.clause(cont.clause);
            if cont.pos == clause.body.len() {
                if self.lemmas.is_some() && cont.clause != program.query_ref() {
                    self.record(program, clause, cont.base);
                }
                self.cont = cont.next.clone();
                continue;
            }
            let base = cont.base;
            let rest = Some(Rc::new(Cont {
                clause: cont.clause,
                pos: cont.pos + 1,
                base,
                next: cont.next.clone(),
            }));
            let ok = match &clause.body[cont.pos] {
                Goal::Call(pred, args) => {
                    let args: Rc<[T]> = args.iter().map(|a| self.build(a, base)).collect();
                    self.resolve(program, *pred, args, 0, rest)?
                }
                Goal::Is(lhs, expr) => {
                    self.tick()?;
                    let value = T::Int(self.eval(expr, base)?);
                    let lhs = self.build(lhs, base);
                    self.unify(&lhs, &value) && {
                        self.cont = rest;
                        true
                    }
                }
                Goal::Cmp(op, a, b) => {
                    self.tick()?;
                    let a = self.build(a, base);
                    let b = self.build(b, base);
                    self.compare(*op, &a, &b)? && {
                        self.cont = rest;
                        true
                    }
                }
            };
            if !ok && !self.backtrack(program)? {
                return Ok(false);
            }
        }
    }

    fn resolve(
        &mut self,
        program: &Program,
        pred: u32,
        args: Rc<[T]>,
        start: usize,
        after: Option<Rc<Cont>>,
    ) -> Result<bool, SolveError> {
        let (rules, facts) = program.candidates(pred);
        let total = rules.len() + facts.len();
        for k in start..total {
            self.tick()?;
            let cref = if k < rules.len() { rules[k] } else { facts[k - rules.len()] };
            let clause = program.clause(cref);
            let (trail, vars) = (self.trail.len(), self.vars.len());
            let base = vars as u32;
            self.vars.resize(vars + clause.nvars as usize, None);
            let matched = clause
                .head
                .iter()
                .zip(args.iter())
                .all(|(h, a)| self.unify_ct(h, base, a));
            if matched {
                if k + 1 < total {
                    self.choices.push(Choice {
                        pred,
                        args: args.clone(),
                        next: k + 1,
                        cont: after.clone(),
                        trail,
                        vars,
                    });
                }
                self.cont = Some(Rc::new(Cont {
                    clause: cref,
                    pos: 0,
                    base,
                    next: after,
                }));
                return Ok(true);
            }
            self.undo(trail, vars);
        }
        Ok(false)
    }

    fn backtrack(&mut self, program: &Program) -> Result<bool, SolveError> {
        while let Some(choice) = self.choices.pop() {
            self.undo(choice.trail, choice.vars);
            if self.resolve(program, choice.pred, choice.args, choice.next, choice.cont)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn undo(&mut self, trail: usize, vars: usize) {
        for v in self.trail.drain(trail..) {
            if let Some(slot) = self.vars.get_mut(v as usize) {
                *slot = None;
            }
        }
        self.vars.truncate(vars);
    }

    fn bind(&mut self, v: u32, value: T) {
        self.vars[v as usize] = Some(value);
        self.trail.push(v);
    }

    fn deref(&self, t: &T) -> T {
        let mut t = t;
        while let T::Var(v) = t {
            match &self.vars[*v as usize] {
                Some(bound) => t = bound,
                None => break,
            }
        }
        t.clone()
    }

    fn build(&self, ct: &Ct, base: u32) -> T {
        match ct {
            Ct::Var(i) => self.deref(&T::Var(base + i)),
            Ct::Ground(t) => t.clone(),
            Ct::Cons(pair) => T::Cons(Arc::new((self.build(&pair.0, base), self.build(&pair.1, base)))),
            Ct::Fn(f, args) => T::Fn(*f, args.iter().map(|a| self.build(a, base)).collect()),
        }
    }

    fn occurs(&self, v: u32, t: &T) -> bool {
        match self.deref(t) {
            T::Var(w) => v == w,
            T::Cons(pair) => self.occurs(v, &pair.0) || self.occurs(v, &pair.1),
            T::Fn(_, args) => args.iter().any(|a| self.occurs(v, a)),
            _ => false,
        }
    }

    fn bind_checked(&mut self, v: u32, value: T) -> bool {
        if self.occurs_check && self.occurs(v, &value) {
            return false;
        }
        self.bind(v, value);
        true
    }

    fn unify(&mut self, a: &T, b: &T) -> bool {
        let a = self.deref(a);
        let b = self.deref(b);
        match (&a, &b) {
            (T::Var(x), T::Var(y)) => {
                if x != y {
                    let (older, younger) = if x < y { (*x, *y) } else { (*y, *x) };
                    self.bind(younger, T::Var(older));
                }
                true
            }
            (T::Var(x), t) | (t, T::Var(x)) => self.bind_checked(*x, t.clone()),
            (T::Sym(x), T::Sym(y)) => x == y,
            (T::Int(x), T::Int(y)) => x == y,
            (T::Nil, T::Nil) => true,
            (T::Cons(p), T::Cons(q)) => {
                Arc::ptr_eq(p, q) || (self.unify(&p.0, &q.0) && self.unify(&p.1, &q.1))
            }
            (T::Fn(f, xs), T::Fn(g, ys)) => {
                f == g
                    && xs.len() == ys.len()
                    && (Arc::ptr_eq(xs, ys) || xs.iter().zip(ys.iter()).all(|(x, y)| self.unify(x, y)))
            }
            _ => false,
        }
    }

    fn unify_ct(&mut self, ct: &Ct, base: u32, t: &T) -> bool {
        match ct {
            Ct::Var(i) => self.unify(&T::Var(base + i), t),
            Ct::Ground(g) => self.unify(g, t),
            Ct::Cons(pair) => match self.deref(t) {
                T::Var(v) => {
                    let value = self.build(ct, base);
                    self.bind_checked(v, value)
                }
                T::Cons(q) => self.unify_ct(&pair.0, base, &q.0) && self.unify_ct(&pair.1, base, &q.1),
                _ => false,
            },
            Ct::Fn(f, args) => match self.deref(t) {
                T::Var(v) => {
                    let value = self.build(ct, base);
                    self.bind_checked(v, value)
                }
                T::Fn(g, ys) => {
                    *f == g
                        && args.len() == ys.len()
                        && args.iter().zip(ys.iter()).all(|(a, y)| self.unify_ct(a, base, y))
                }
                _ => false,
            },
        }
    }

    fn int_value(&self, t: &T) -> Result<i64, SolveError> {
        match self.deref(t) {
            T::Int(i) => Ok(i),
            T::Var(_) => Err(SolveError::Instantiation),
            other => Err(SolveError::Type(self.to_term(&other).to_string())),
        }
    }

    fn eval(&self, e: &CExpr, base: u32) -> Result<i64, SolveError> {
        let overflow = SolveError::Arithmetic("overflow");
        Ok(match e {
            CExpr::Int(i) => *i,
            CExpr::Var(i) => self.int_value(&T::Var(base + i))?,
            CExpr::Neg(e) => self.eval(e, base)?.checked_neg().ok_or(overflow)?,
            CExpr::Abs(e) => self.eval(e, base)?.checked_abs().ok_or(overflow)?,
            CExpr::Bin(op, a, b) => {
                let (a, b) = (self.eval(a, base)?, self.eval(b, base)?);
                match op {
                    ArithOp::Add => a.checked_add(b).ok_or(overflow)?,
                    ArithOp::Sub => a.checked_sub(b).ok_or(overflow)?,
                    ArithOp::Mul => a.checked_mul(b).ok_or(overflow)?,
                    ArithOp::IntDiv | ArithOp::Mod if b == 0 => {
                        return Err(SolveError::Arithmetic("division by zero"))
                    }
                    ArithOp::IntDiv => a.checked_div(b).ok_or(overflow)?,
                    ArithOp::Mod => {
                        // result takes the sign of the divisor
                        let r = a.checked_rem(b).ok_or(overflow)?;
                        if r != 0 && (r < 0) != (b < 0) {
                            r + b
                        } else {
                            r
                        }
                    }
                }
            }
        })
    }

    fn compare(&mut self, op: CmpOp, a: &T, b: &T) -> Result<bool, SolveError> {
        Ok(match op {
            CmpOp::Eq => self.unify(a, b),
            CmpOp::Neq => {
                let (trail, vars) = (self.trail.len(), self.vars.len());
                let unifiable = self.unify(a, b);
                self.undo(trail, vars);
                !unifiable
            }
            _ => {
                let (x, y) = (self.int_value(a)?, self.int_value(b)?);
                match op {
                    CmpOp::Lt => x < y,
                    CmpOp::Le => x <= y,
                    CmpOp::Gt => x > y,
                    _ => x >= y,
                }
            }
        })
    }

    fn to_term(&self, t: &T) -> Term {
        self.term_of(t, &mut Vec::new())
    }

    /// Follows bindings from `t`, remembering the variables passed through.
    /// `Err(v)` means `v` was reached again, i.e. the term is cyclic.
    fn walk(&self, t: &T, path: &mut Vec<u32>) -> Result<T, u32> {
        let mut t = t;
        while let T::Var(v) = t {
            if path.contains(v) {
                return Err(*v);
            }
            match &self.vars[*v as usize] {
                Some(bound) => {
                    path.push(*v);
                    t = bound;
                }
                None => break,
            }
        }
        Ok(t.clone())
    }

    fn term_of(&self, t: &T, path: &mut Vec<u32>) -> Term {
        let depth = path.len();
        let var = |v: u32| Term::Var(Name::new(&format!("_G{v}")));
        let out = match self.walk(t, path) {
            Err(v) | Ok(T::Var(v)) => var(v),
            Ok(T::Sym(s)) => Term::Sym(s),
            Ok(T::Int(i)) => Term::Int(i),
            Ok(T::Nil) => Term::List(Vec::new(), None),
            Ok(T::Cons(pair)) => {
                let mut items = vec![self.term_of(&pair.0, path)];
                let mut rest = pair.1.clone();
                let tail = loop {
                    match self.walk(&rest, path) {
                        Err(v) => break Some(var(v)),
                        Ok(T::Cons(next)) => {
                            items.push(self.term_of(&next.0, path));
                            rest = next.1.clone();
                        }
                        Ok(T::Nil) => break None,
                        Ok(other) => break Some(self.term_of(&other, path)),
                    }
                };
                Term::list(items, tail)
            }
            Ok(T::Fn(f, args)) => {
                Term::Compound(f, args.iter().map(|a| self.term_of(a, path)).collect())
            }
        };
        path.truncate(depth);
        out
    }

    fn record(&mut self, program: &Program, clause: &Clause, base: u32) {
        let args: Vec<Term> = clause
            .head
            .iter()
            .map(|h| self.to_term(&self.build(h, base)))
            .collect();
        if args.iter().all(Term::is_ground) {
            let atom = Atom {
                predicate: program.key_of(clause.pred).name,
                args,
            };
            if let Some(lemmas) = self.lemmas.as_mut() {
                lemmas.insert(atom);
            }
        }
    }
}

/// Answers to `goal` against the whole of `kb`.
pub fn solve(kb: &KnowledgeBase, goal: &[Literal], limits: SolveLimits) -> Solutions {
    Theory::new(kb).solve(goal, &[], limits)
}

/// Whether ground `q` follows from `kb` plus `facts`.
pub fn entails(
    kb: &KnowledgeBase,
    facts: &[Atom],
    q: &Atom,
    limits: SolveLimits,
) -> Result<Entailment, SolveError> {
    Theory::new(kb).entails(q, facts, limits)
}
