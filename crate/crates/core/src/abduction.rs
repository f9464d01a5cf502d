//! Abduction spaces and consistency-based candidate selection.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::logic::{Deduction, LabelId, SolveError, SolveLimits, Target, Theory};
use crate::tasks::{for_each_sequence, Square, Task};

pub type LabelSequence = Vec<LabelId>;

/// Largest number of candidate sequences the generic enumerator will check.
pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum AbductionError {
    #[error("{candidates} candidates exceed the enumeration cap of {cap}; use the task oracle")]
    EnumerationCapExceeded { candidates: u64, cap: u64 },
    #[error("abduction space is empty")]
    EmptySpace,
    #[error("invalid distribution: {0}")]
    Distribution(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Label sequences over `domain` consistent with `target`, in lexicographic
/// order of label ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AbductionSpace {
    pub target: Target,
    pub domain: Vec<LabelId>,
    pub members: Vec<LabelSequence>,
}

impl AbductionSpace {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// `|domain|^m`, saturating.
    pub fn bound(&self, m: usize) -> u64 {
        (self.domain.len() as u64).saturating_pow(m as u32)
    }
}

fn sorted_domain(domain: &[LabelId]) -> Vec<LabelId> {
    let mut d = domain.to_vec();
    d.sort_unstable();
    d.dedup();
    d
}

fn check_cap(domain: usize, m: usize, cap: u64) -> Result<(), AbductionError> {
    let candidates = (domain as u64).saturating_pow(m as u32);
    if candidates > cap {
        return Err(AbductionError::EnumerationCapExceeded { candidates, cap });
    }
    Ok(())
}

/// Every sequence over `domain` whose deduction under `theory` equals `y`.
pub fn abduction_space_generic(
    task: &Task,
    theory: &Theory,
    y: &Target,
    squares: &[Square],
    domain: &[LabelId],
    cap: u64,
    limits: SolveLimits,
) -> Result<AbductionSpace, AbductionError> {
    let domain = sorted_domain(domain);
    check_cap(domain.len(), task.arity(), cap)?;
    let wanted = Deduction::Value(y.clone());
    let mut members = Vec::new();
    let mut failure = None;
    for_each_sequence(&domain, task.arity(), |labels| {
        if failure.is_some() {
            return;
        }
        match task.deduce(theory, labels, squares, limits) {
            Ok(d) if d == wanted => members.push(labels.to_vec()),
            Ok(_) => {}
            Err(e) => failure = Some(e),
        }
    });
    if let Some(e) = failure {
        return Err(e.into());
    }
    Ok(AbductionSpace {
        target: y.clone(),
        domain,
        members,
    })
}

/// The generic spaces for every reachable target at once: each sequence over
/// `domain` is deduced a single time and filed under its result.
pub fn generic_spaces(
    task: &Task,
    theory: &Theory,
    squares: &[Square],
    domain: &[LabelId],
    cap: u64,
    limits: SolveLimits,
) -> Result<BTreeMap<Target, AbductionSpace>, AbductionError> {
    let domain = sorted_domain(domain);
    check_cap(domain.len(), task.arity(), cap)?;
    let mut spaces: BTreeMap<Target, AbductionSpace> = BTreeMap::new();
    let mut failure = None;
    for_each_sequence(&domain, task.arity(), |labels| {
        if failure.is_some() {
            return;
        }
        match task.deduce(theory, labels, squares, limits) {
            Ok(Deduction::Value(y)) => spaces
                .entry(y.clone())
                .or_insert_with(|| AbductionSpace {
                    target: y,
                    domain: domain.clone(),
                    members: Vec::new(),
                })
                .members
                .push(labels.to_vec()),
            Ok(Deduction::NoProof) => {}
            Err(e) => failure = Some(e),
        }
    });
    match failure {
        Some(e) => Err(e.into()),
        None => Ok(spaces),
    }
}

/// The same space as [`abduction_space_generic`] under the full knowledge
/// base, computed from task arithmetic or geometry instead of resolution.
pub fn abduction_space_oracle(task: &Task, y: &Target, squares: &[Square], domain: &[LabelId]) -> AbductionSpace {
    let domain = sorted_domain(domain);
    let mut mask = vec![false; task.num_labels()];
    for &l in &domain {
        mask[l] = true;
    }
    AbductionSpace {
        target: y.clone(),
        members: task.oracle_space(y, squares, &mask),
        domain,
    }
}

/// Members agreeing with `fixed` at each of its positions.
pub fn conditioned_space(space: &AbductionSpace, fixed: &BTreeMap<usize, LabelId>) -> AbductionSpace {
    AbductionSpace {
        target: space.target.clone(),
        domain: space.domain.clone(),
        members: space
            .members
            .iter()
            .filter(|z| fixed.iter().all(|(&i, &l)| z.get(i) == Some(&l)))
            .cloned()
            .collect(),
    }
}

/// Per-position probability vectors over all labels.
#[derive(Clone, Debug, PartialEq)]
pub struct ConceptDistribution {
    per_position: Vec<Vec<f64>>,
}

impl ConceptDistribution {
    pub const TOLERANCE: f64 = 1e-9;

    pub fn new(per_position: Vec<Vec<f64>>) -> Result<Self, AbductionError> {
        for (i, p) in per_position.iter().enumerate() {
            if p.iter().any(|&x| !x.is_finite() || x < 0.0) {
                return Err(AbductionError::Distribution(format!("position {i} has a negative or non-finite entry")));
            }
            let total: f64 = p.iter().sum();
            if (total - 1.0).abs() > Self::TOLERANCE {
                return Err(AbductionError::Distribution(format!("position {i} sums to {total}")));
            }
        }
        Ok(ConceptDistribution { per_position })
    }

    pub fn uniform(labels: usize, m: usize) -> Self {
        ConceptDistribution {
            per_position: vec![vec![1.0 / labels as f64; labels]; m],
        }
    }

    pub fn per_position(&self) -> &[Vec<f64>] {
        &self.per_position
    }

    pub fn len(&self) -> usize {
        self.per_position.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_position.is_empty()
    }
}

/// Product of the per-position probabilities of `z`.
pub fn consistency_score(z: &[LabelId], d: &ConceptDistribution) -> f64 {
    assert_eq!(z.len(), d.len(), "sequence length");
    z.iter().zip(d.per_position()).map(|(&l, p)| p[l]).product()
}

/// The member with the largest product of weights, earliest member on ties.
/// Weights need only be nonnegative; scaling one position leaves the choice
/// unchanged.
pub fn select_weighted<'s>(space: &'s AbductionSpace, weights: &[Vec<f64>]) -> Result<&'s LabelSequence, AbductionError> {
    let mut best: Option<(f64, &LabelSequence)> = None;
    for z in &space.members {
        // log-domain comparison keeps long sequences of small probabilities apart
        let score: f64 = z.iter().zip(weights).map(|(&l, w)| w[l].ln()).sum();
        if best.is_none_or(|(s, _)| score > s) {
            best = Some((score, z));
        }
    }
    best.map(|(_, z)| z).ok_or(AbductionError::EmptySpace)
}

/// The most consistent member of `space` under `d`.
pub fn select_candidate<'s>(space: &'s AbductionSpace, d: &ConceptDistribution) -> Result<&'s LabelSequence, AbductionError> {
    select_weighted(space, d.per_position())
}
