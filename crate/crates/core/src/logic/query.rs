//! Query templates: how a label sequence becomes a goal with an answer.

use std::fmt;

use super::engine::{SolveError, SolveLimits, Theory};
use super::term::{Atom, Literal, Name, Term};

/// Value of a target label.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Target {
    Bool(bool),
    Int(i64),
    Other(String),
}

impl Target {
    fn from_term(t: &Term) -> Target {
        match t {
            Term::Int(i) => Target::Int(*i),
            Term::Sym(s) if s.as_str() == "true" => Target::Bool(true),
            Term::Sym(s) if s.as_str() == "false" => Target::Bool(false),
            other => Target::Other(other.to_string()),
        }
    }

    pub fn parse(text: &str) -> Target {
        match text {
            "true" => Target::Bool(true),
            "false" => Target::Bool(false),
            _ => text
                .parse()
                .map(Target::Int)
                .unwrap_or_else(|_| Target::Other(text.to_owned())),
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Bool(b) => write!(f, "{b}"),
            Target::Int(i) => write!(f, "{i}"),
            Target::Other(s) => f.write_str(s),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Deduction {
    Value(Target),
    NoProof,
}

/// Where the answer of a templated query comes from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Answer {
    /// The binding of this goal variable in the first answer.
    Var(Name),
    /// Provability of the goal, read under the closed-world assumption.
    Proof,
}

/// A goal over position constants `positions[i]`; label `i` of a sequence is
/// injected as the fact `label(positions[i])`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryTemplate {
    pub positions: Vec<Name>,
    pub goal: Vec<Literal>,
    pub answer: Answer,
}

impl QueryTemplate {
    pub fn arity(&self) -> usize {
        self.positions.len()
    }

    pub fn label_facts(&self, labels: &[Name]) -> Vec<Atom> {
        assert_eq!(labels.len(), self.positions.len(), "label sequence length");
        labels
            .iter()
            .zip(&self.positions)
            .map(|(&label, &pos)| Atom {
                predicate: label,
                args: vec![Term::Sym(pos)],
            })
            .collect()
    }
}

/// Runs the template with `labels` plus any per-example `context` facts.
pub fn deduce(
    theory: &Theory,
    template: &QueryTemplate,
    labels: &[Name],
    context: &[Atom],
    limits: SolveLimits,
) -> Result<Deduction, SolveError> {
    let mut facts = template.label_facts(labels);
    facts.extend_from_slice(context);
    let limits = SolveLimits {
        max_solutions: Some(1),
        ..limits
    };
    let first = theory.solve(&template.goal, &facts, limits).next().transpose()?;
    Ok(match (&template.answer, first) {
        (Answer::Proof, found) => Deduction::Value(Target::Bool(found.is_some())),
        (Answer::Var(_), None) => Deduction::NoProof,
        (Answer::Var(v), Some(s)) => match s.get(*v) {
            Some(t) => Deduction::Value(Target::from_term(t)),
            None => Deduction::NoProof,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parser::{parse_goal, parse_program};

    #[test]
    fn valued_and_boolean_templates() {
        let kb = parse_program(
            "@concept one/1.\n@concept two/1.\n@target v/2.\nv(P, 1) :- one(P).\nv(P, 2) :- two(P).\n",
        )
        .unwrap();
        let theory = Theory::new(&kb);
        let valued = QueryTemplate {
            positions: vec![Name::new("p0")],
            goal: parse_goal("v(p0, Y)").unwrap(),
            answer: Answer::Var(Name::new("Y")),
        };
        let limits = SolveLimits::default();
        let got = deduce(&theory, &valued, &[Name::new("two")], &[], limits).unwrap();
        assert_eq!(got, Deduction::Value(Target::Int(2)));

        let boolean = QueryTemplate {
            positions: vec![Name::new("p0")],
            goal: parse_goal("v(p0, 1)").unwrap(),
            answer: Answer::Proof,
        };
        let yes = deduce(&theory, &boolean, &[Name::new("one")], &[], limits).unwrap();
        let no = deduce(&theory, &boolean, &[Name::new("two")], &[], limits).unwrap();
        assert_eq!(yes, Deduction::Value(Target::Bool(true)));
        assert_eq!(no, Deduction::Value(Target::Bool(false)));

        let restricted = theory.restrict([1]);
        let none = deduce(&restricted, &valued, &[Name::new("one")], &[], limits).unwrap();
        assert_eq!(none, Deduction::NoProof);
    }

    #[test]
    fn target_text_round_trip() {
        for t in [Target::Bool(true), Target::Int(-86), Target::Other("f(a)".into())] {
            assert_eq!(Target::parse(&t.to_string()), t);
        }
    }
}
