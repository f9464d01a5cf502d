//! Knowledge bases: ordered rules plus concept and target declarations.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use super::term::{Atom, Name, PredKey, Rule, RuleId};

/// Index of a concept in declaration order.
pub type LabelId = usize;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ProgramError {
    #[error("line {line}, column {col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("{}", arity_message(*.line, *.name, *.declared, *.found))]
    ArityConflict {
        line: Option<usize>,
        name: Name,
        declared: usize,
        found: usize,
    },
    #[error("no @target declaration")]
    MissingTarget,
    #[error("more than one @target declaration")]
    DuplicateTarget,
    #[error("concept {0} declared twice")]
    DuplicateConcept(PredKey),
    #[error("{0} is declared both as a concept and as the target")]
    ConceptIsTarget(PredKey),
    #[error("target {0} has no defining rule")]
    UndefinedTarget(PredKey),
    #[error("concept {0} never appears in a rule body")]
    UnreferencedConcept(PredKey),
}

fn arity_message(line: Option<usize>, name: Name, declared: usize, found: usize) -> String {
    let prefix = line.map(|l| format!("line {l}: ")).unwrap_or_default();
    format!("{prefix}{name} is declared with arity {declared} but used with arity {found}")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KnowledgeBase {
    rules: Vec<Rule>,
    concepts: Vec<PredKey>,
    target: PredKey,
    head_index: BTreeMap<PredKey, Vec<RuleId>>,
}

impl KnowledgeBase {
    /// Builds and validates a knowledge base. Rule ids are reassigned to
    /// source positions.
    pub fn new(
        rules: Vec<Rule>,
        concepts: Vec<PredKey>,
        target: PredKey,
    ) -> Result<Self, ProgramError> {
        Self::validated(rules, concepts, target, None)
    }

    pub(crate) fn validated(
        mut rules: Vec<Rule>,
        concepts: Vec<PredKey>,
        target: PredKey,
        lines: Option<&[usize]>,
    ) -> Result<Self, ProgramError> {
        for (i, rule) in rules.iter_mut().enumerate() {
            rule.id = i;
        }
        let mut seen = BTreeSet::new();
        for &c in &concepts {
            if !seen.insert(c) {
                return Err(ProgramError::DuplicateConcept(c));
            }
            if c == target {
                return Err(ProgramError::ConceptIsTarget(c));
            }
        }

        let mut declared: BTreeMap<Name, usize> = BTreeMap::new();
        for key in concepts.iter().chain(std::iter::once(&target)) {
            if let Some(&arity) = declared.get(&key.name) {
                if arity != key.arity {
                    return Err(ProgramError::ArityConflict {
                        line: None,
                        name: key.name,
                        declared: arity,
                        found: key.arity,
                    });
                }
            }
            declared.insert(key.name, key.arity);
        }
        for rule in &rules {
            let atoms = std::iter::once(&rule.head).chain(rule.body_atoms());
            for atom in atoms {
                if let Some(&arity) = declared.get(&atom.predicate) {
                    if arity != atom.args.len() {
                        return Err(ProgramError::ArityConflict {
                            line: lines.map(|l| l[rule.id]),
                            name: atom.predicate,
                            declared: arity,
                            found: atom.args.len(),
                        });
                    }
                }
            }
        }

        let mut head_index: BTreeMap<PredKey, Vec<RuleId>> = BTreeMap::new();
        for rule in &rules {
            head_index.entry(rule.head.key()).or_default().push(rule.id);
        }
        if !head_index.contains_key(&target) {
            return Err(ProgramError::UndefinedTarget(target));
        }
        let referenced: BTreeSet<PredKey> = rules
            .iter()
            .flat_map(|r| r.body_atoms().map(Atom::key))
            .collect();
        if let Some(&c) = concepts.iter().find(|c| !referenced.contains(c)) {
            return Err(ProgramError::UnreferencedConcept(c));
        }

        Ok(KnowledgeBase {
            rules,
            concepts,
            target,
            head_index,
        })
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rule(&self, id: RuleId) -> &Rule {
        &self.rules[id]
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Concept predicates in declaration order; the position is the [`LabelId`].
    pub fn concepts(&self) -> &[PredKey] {
        &self.concepts
    }

    pub fn concept_id(&self, key: PredKey) -> Option<LabelId> {
        self.concepts.iter().position(|&c| c == key)
    }

    pub fn label_id(&self, name: &str) -> Option<LabelId> {
        self.concepts.iter().position(|c| c.name.as_str() == name)
    }

    pub fn label_name(&self, id: LabelId) -> Name {
        self.concepts[id].name
    }

    pub fn is_concept(&self, key: PredKey) -> bool {
        self.concepts.contains(&key)
    }

    pub fn target(&self) -> PredKey {
        self.target
    }

    pub fn head_index(&self) -> &BTreeMap<PredKey, Vec<RuleId>> {
        &self.head_index
    }

    pub fn defining_rules(&self, key: PredKey) -> &[RuleId] {
        self.head_index.get(&key).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Concepts referenced in the body of a rule, as label ids.
    pub fn rule_concepts(&self, id: RuleId) -> BTreeSet<LabelId> {
        self.rules[id]
            .body_atoms()
            .filter_map(|a| self.concept_id(a.key()))
            .collect()
    }

    /// A copy with more rules appended after the existing ones.
    pub fn extended(&self, extra: impl IntoIterator<Item = Rule>) -> Result<Self, ProgramError> {
        let mut rules = self.rules.clone();
        rules.extend(extra);
        Self::new(rules, self.concepts.clone(), self.target)
    }

    /// Program text that parses back to an equal knowledge base.
    pub fn to_source(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for KnowledgeBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.concepts {
            writeln!(f, "@concept {c}.")?;
        }
        writeln!(f, "@target {}.", self.target)?;
        for rule in &self.rules {
            writeln!(f, "{rule}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::term::{Literal, Term};

    fn rule(head: Atom, body: Vec<Literal>) -> Rule {
        Rule { id: 0, head, body }
    }

    #[test]
    fn head_index_matches_rules() {
        let p = Atom::new("p", vec![Term::var("X")]);
        let c = Atom::new("c", vec![Term::var("X")]);
        let kb = KnowledgeBase::new(
            vec![rule(p.clone(), vec![c.clone().into()]), rule(p.clone(), vec![c.into()])],
            vec![PredKey::new("c", 1)],
            PredKey::new("p", 1),
        )
        .unwrap();
        assert_eq!(kb.defining_rules(PredKey::new("p", 1)), &[0, 1]);
        assert_eq!(kb.rule(1).id, 1);
        assert!(kb.defining_rules(PredKey::new("c", 1)).is_empty());
    }

    #[test]
    fn concept_must_be_referenced() {
        let p = Atom::new("p", vec![]);
        let err = KnowledgeBase::new(
            vec![rule(p, vec![])],
            vec![PredKey::new("c", 1)],
            PredKey::new("p", 0),
        )
        .unwrap_err();
        assert_eq!(err, ProgramError::UnreferencedConcept(PredKey::new("c", 1)));
    }

    #[test]
    fn declared_arity_is_enforced() {
        let p = Atom::new("p", vec![]);
        let c = Atom::new("c", vec![Term::Int(1), Term::Int(2)]);
        let err = KnowledgeBase::new(
            vec![rule(p, vec![c.into()])],
            vec![PredKey::new("c", 1)],
            PredKey::new("p", 0),
        )
        .unwrap_err();
        assert!(matches!(err, ProgramError::ArityConflict { found: 2, .. }));
    }
}
