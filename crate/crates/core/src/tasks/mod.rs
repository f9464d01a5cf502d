//! Benchmark tasks: knowledge bases, query templates and reference oracles
//! that work without the logic engine.

pub mod addition;
pub mod chess;

use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::logic::{
    deduce, parse_goal, parse_program, Answer, Atom, Deduction, KnowledgeBase, LabelId, Name,
    QueryTemplate, SolveError, SolveLimits, Target, Term, Theory,
};

pub use chess::Square;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TaskKind {
    Addition { base: u32, digits: usize },
    Chess { board: i64, pieces: usize },
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskKind::Addition { base, digits } => write!(f, "addition base={base} digits={digits}"),
            TaskKind::Chess { board, pieces } => write!(f, "chess board={board} pieces={pieces}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum TaskError {
    #[error("base must be 10 or 16, got {0}")]
    Base(u32),
    #[error("digits must be between 1 and {max}, got {got}")]
    Digits { got: usize, max: usize },
    #[error("board size must be at least 3, got {0}")]
    Board(i64),
    #[error("piece count must be between 2 and {max}, got {got}")]
    Pieces { got: usize, max: usize },
    #[error("two pieces share square ({0}, {1})")]
    Overlap(i64, i64),
    #[error("square ({0}, {1}) is off the board")]
    OffBoard(i64, i64),
    #[error("expected {expected} labels, got {got}")]
    Arity { expected: usize, got: usize },
}

/// Concept labels of one input sequence, plus piece squares for chess.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Instance {
    pub labels: Vec<LabelId>,
    pub squares: Vec<Square>,
}

#[derive(Clone, Debug)]
pub struct Task {
    kind: TaskKind,
    source: String,
    kb: KnowledgeBase,
    template: QueryTemplate,
    theory: Theory,
}

impl Task {
    pub fn new(kind: TaskKind) -> Result<Task, TaskError> {
        let (source, goal, answer) = match kind {
            TaskKind::Addition { base, digits } => {
                if base != 10 && base != 16 {
                    return Err(TaskError::Base(base));
                }
                // keeps every sum inside 64-bit arithmetic
                let max = if base == 10 { 17 } else { 14 };
                if digits == 0 || digits > max {
                    return Err(TaskError::Digits { got: digits, max });
                }
                let list = |range: std::ops::Range<usize>| {
                    range.map(|i| format!("p{i}")).collect::<Vec<_>>().join(", ")
                };
                let goal = format!("addition([{}], [{}], Y)", list(0..digits), list(digits..2 * digits));
                (addition::source(base, digits), goal, Answer::Var(Name::new("Y")))
            }
            TaskKind::Chess { board, pieces } => {
                if board < 3 {
                    return Err(TaskError::Board(board));
                }
                let max = (board * board) as usize;
                if pieces < 2 || pieces > max {
                    return Err(TaskError::Pieces { got: pieces, max });
                }
                (chess::SOURCE.to_owned(), "attack".to_owned(), Answer::Proof)
            }
        };
        let kb = parse_program(&source).expect("generated program parses");
        let template = QueryTemplate {
            positions: (0..kind.arity()).map(|i| Name::new(&format!("p{i}"))).collect(),
            goal: parse_goal(&goal).expect("generated goal parses"),
            answer,
        };
        let theory = Theory::new(&kb);
        Ok(Task {
            kind,
            source,
            kb,
            template,
            theory,
        })
    }

    pub fn addition(base: u32, digits: usize) -> Result<Task, TaskError> {
        Task::new(TaskKind::Addition { base, digits })
    }

    pub fn chess(board: i64, pieces: usize) -> Result<Task, TaskError> {
        Task::new(TaskKind::Chess { board, pieces })
    }

    pub fn kind(&self) -> TaskKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            TaskKind::Addition { .. } => "addition",
            TaskKind::Chess { .. } => "chess",
        }
    }

    /// Program text the knowledge base was parsed from.
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn kb(&self) -> &KnowledgeBase {
        &self.kb
    }

    pub fn template(&self) -> &QueryTemplate {
        &self.template
    }

    /// The full knowledge base, compiled.
    pub fn theory(&self) -> &Theory {
        &self.theory
    }

    /// Sequence length m.
    pub fn arity(&self) -> usize {
        self.kind.arity()
    }

    pub fn num_labels(&self) -> usize {
        self.kb.concepts().len()
    }

    pub fn label_names(&self, labels: &[LabelId]) -> Vec<Name> {
        labels.iter().map(|&l| self.kb.label_name(l)).collect()
    }

    /// Per-example facts besides the labels: piece squares for chess.
    pub fn context(&self, squares: &[Square]) -> Vec<Atom> {
        squares
            .iter()
            .zip(&self.template.positions)
            .map(|(&(x, y), &p)| Atom {
                predicate: Name::new("at"),
                args: vec![Term::Sym(p), Term::Int(x), Term::Int(y)],
            })
            .collect()
    }

    pub fn validate(&self, instance: &Instance) -> Result<(), TaskError> {
        let m = self.arity();
        if instance.labels.len() != m {
            return Err(TaskError::Arity {
                expected: m,
                got: instance.labels.len(),
            });
        }
        if let TaskKind::Chess { board, .. } = self.kind {
            if instance.squares.len() != m {
                return Err(TaskError::Arity {
                    expected: m,
                    got: instance.squares.len(),
                });
            }
            for (i, &(x, y)) in instance.squares.iter().enumerate() {
                if !(0..board).contains(&x) || !(0..board).contains(&y) {
                    return Err(TaskError::OffBoard(x, y));
                }
                if instance.squares[..i].contains(&(x, y)) {
                    return Err(TaskError::Overlap(x, y));
                }
            }
        }
        Ok(())
    }

    /// Target computed directly from labels and squares, without the logic engine.
    pub fn evaluate(&self, instance: &Instance) -> Target {
        match self.kind {
            TaskKind::Addition { base, .. } => Target::Int(addition::sum(&instance.labels, base)),
            TaskKind::Chess { .. } => Target::Bool(chess::any_attack(&instance.labels, &instance.squares)),
        }
    }

    /// Target deduced by `theory` (the full knowledge base or a sub-base).
    pub fn deduce(
        &self,
        theory: &Theory,
        labels: &[LabelId],
        squares: &[Square],
        limits: SolveLimits,
    ) -> Result<Deduction, SolveError> {
        deduce(
            theory,
            &self.template,
            &self.label_names(labels),
            &self.context(squares),
            limits,
        )
    }

    /// Uniform labels from `domain` and, for chess, distinct uniform squares.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, domain: &[LabelId]) -> Instance {
        assert!(!domain.is_empty(), "empty label domain");
        let m = self.arity();
        let labels = (0..m).map(|_| domain[rng.random_range(0..domain.len())]).collect();
        let squares = match self.kind {
            TaskKind::Addition { .. } => Vec::new(),
            TaskKind::Chess { board, .. } => {
                rand::seq::index::sample(rng, (board * board) as usize, m)
                    .into_iter()
                    .map(|i| ((i as i64) % board, (i as i64) / board))
                    .collect()
            }
        };
        Instance { labels, squares }
    }

    /// All label sequences over `domain` (indexed by label) whose target is
    /// `y`, in lexicographic label order, computed without the logic engine.
    pub fn oracle_space(&self, y: &Target, squares: &[Square], domain: &[bool]) -> Vec<Vec<LabelId>> {
        match (self.kind, y) {
            (TaskKind::Addition { base, digits }, Target::Int(y)) => {
                addition::decompositions(*y, base, digits, domain)
            }
            (TaskKind::Chess { .. }, Target::Bool(y)) => {
                let allowed: Vec<LabelId> = (0..domain.len()).filter(|&l| domain[l]).collect();
                let mut out = Vec::new();
                for_each_sequence(&allowed, self.arity(), |labels| {
                    if chess::any_attack(labels, squares) == *y {
                        out.push(labels.to_vec());
                    }
                });
                out
            }
            _ => Vec::new(),
        }
    }
}

impl TaskKind {
    pub fn arity(&self) -> usize {
        match *self {
            TaskKind::Addition { digits, .. } => 2 * digits,
            TaskKind::Chess { pieces, .. } => pieces,
        }
    }
}

/// Calls `f` on every sequence of length `m` over `alphabet`, in odometer order.
pub fn for_each_sequence(alphabet: &[LabelId], m: usize, mut f: impl FnMut(&[LabelId])) {
    if alphabet.is_empty() && m > 0 {
        return;
    }
    let mut idx = vec![0usize; m];
    let mut seq: Vec<LabelId> = vec![alphabet.first().copied().unwrap_or(0); m];
    loop {
        f(&seq);
        let mut pos = m;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < alphabet.len() {
                seq[pos] = alphabet[idx[pos]];
                break;
            }
            idx[pos] = 0;
            seq[pos] = alphabet[0];
        }
    }
}
