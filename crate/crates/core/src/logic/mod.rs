//! Horn-clause terms, parsing and resolution.

mod engine;
mod kb;
mod parser;
mod query;
mod term;
mod unify;

pub use engine::{entails, solve, Entailment, Harvest, SolveError, SolveLimits, Solutions, Theory};
pub use kb::{KnowledgeBase, LabelId, ProgramError};
pub use parser::{parse_atom, parse_goal, parse_program, parse_term};
pub use query::{deduce, Answer, Deduction, QueryTemplate, Target};
pub use term::{ArithOp, Atom, CmpOp, Expr, Literal, Name, PredKey, Rule, RuleId, Substitution, Term};
pub use unify::unify;
