//! Sampled check that consecutive sub-bases, and each sub-base and the full
//! knowledge base, entail the same ground atoms over a phase's concepts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::logic::{Atom, Entailment, KnowledgeBase, Literal, Name, PredKey, SolveError, SolveLimits, Term, Theory};
use crate::partition::{partition, Curriculum, PartitionError};

#[derive(Debug, Error)]
pub enum EntailError {
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error("samples must be positive")]
    NoSamples,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntailOptions {
    /// Queries per phase, shared by both of its comparisons.
    pub samples: usize,
    pub seed: u64,
    /// Number of position constants `u0, u1, ...` in each sampled world.
    pub constants: usize,
    /// Integers are drawn from `0..int_range`.
    pub int_range: i64,
    pub queries_per_world: usize,
    pub harvest_limits: SolveLimits,
    pub query_limits: SolveLimits,
}

impl Default for EntailOptions {
    fn default() -> Self {
        EntailOptions {
            samples: 200,
            seed: 0,
            constants: 4,
            int_range: 8,
            queries_per_world: 4,
            harvest_limits: SolveLimits::steps(2_000),
            query_limits: SolveLimits::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairReport {
    /// 1-based phase indices; `None` stands for the full knowledge base.
    pub phase: usize,
    pub other: Option<usize>,
    pub agree: usize,
    pub disagree: usize,
    pub indeterminate: usize,
    pub first_disagreement: Option<String>,
}

impl PairReport {
    pub fn total(&self) -> usize {
        self.agree + self.disagree + self.indeterminate
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EntailReport {
    pub pairs: Vec<PairReport>,
    /// Phases for which fewer than the requested queries could be sampled.
    pub short_phases: Vec<usize>,
}

impl EntailReport {
    pub fn disagreements(&self) -> usize {
        self.pairs.iter().map(|p| p.disagree).sum()
    }

    pub fn indeterminate_fraction(&self) -> f64 {
        let total: usize = self.pairs.iter().map(PairReport::total).sum();
        let ind: usize = self.pairs.iter().map(|p| p.indeterminate).sum();
        if total == 0 {
            0.0
        } else {
            ind as f64 / total as f64
        }
    }

    pub fn passed(&self) -> bool {
        self.disagreements() == 0
    }
}

impl fmt::Display for EntailReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.pairs {
            let other = p.other.map_or("full".to_owned(), |o| o.to_string());
            writeln!(
                f,
                "phase {} vs {other}: {} queries, {} agree, {} disagree, {} indeterminate",
                p.phase,
                p.total(),
                p.agree,
                p.disagree,
                p.indeterminate
            )?;
            if let Some(q) = &p.first_disagreement {
                writeln!(f, "  first disagreement: {q}")?;
            }
        }
        for p in &self.short_phases {
            writeln!(f, "phase {p}: fewer queries than requested")?;
        }
        writeln!(
            f,
            "result: {} ({} disagreements, {:.2}% indeterminate)",
            if self.passed() { "PASS" } else { "FAIL" },
            self.disagreements(),
            100.0 * self.indeterminate_fraction()
        )
    }
}

struct Sampler<'a> {
    kb: &'a KnowledgeBase,
    opts: &'a EntailOptions,
    constants: Vec<Name>,
    /// Body predicates with no rules that are not concepts: sampled as facts.
    extensional: Vec<PredKey>,
}

impl Sampler<'_> {
    fn new<'a>(kb: &'a KnowledgeBase, opts: &'a EntailOptions) -> Sampler<'a> {
        let mut extensional = BTreeSet::new();
        for rule in kb.rules() {
            for atom in rule.body_atoms() {
                let key = atom.key();
                if !kb.is_concept(key) && kb.defining_rules(key).is_empty() {
                    extensional.insert(key);
                }
            }
        }
        Sampler {
            kb,
            opts,
            constants: (0..opts.constants.max(1)).map(|i| Name::new(&format!("u{i}"))).collect(),
            extensional: extensional.into_iter().collect(),
        }
    }

    fn int(&self, rng: &mut ChaCha8Rng) -> Term {
        Term::Int(rng.random_range(0..self.opts.int_range.max(1)))
    }

    fn constant(&self, rng: &mut ChaCha8Rng) -> Term {
        Term::Sym(*self.constants.choose(rng).expect("nonempty"))
    }

    /// One fact per constant for every concept-keyed predicate: the
    /// constant first, integers after.
    fn keyed(&self, rng: &mut ChaCha8Rng, name: Name, arity: usize, c: Name) -> Atom {
        let mut args = Vec::with_capacity(arity);
        if arity > 0 {
            args.push(Term::Sym(c));
            args.extend((1..arity).map(|_| self.int(rng)));
        }
        Atom { predicate: name, args }
    }

    fn world(&self, rng: &mut ChaCha8Rng, domain: &[usize]) -> Vec<Atom> {
        let mut facts = Vec::new();
        for &c in &self.constants {
            let label = *domain.choose(rng).expect("phase has concepts");
            let key = self.kb.concepts()[label];
            facts.push(self.keyed(rng, key.name, key.arity, c));
            for key in &self.extensional {
                if key.arity > 0 || rng.random_bool(0.5) {
                    facts.push(self.keyed(rng, key.name, key.arity, c));
                }
            }
        }
        facts
    }

    /// The target predicate with each argument a fresh variable, a short
    /// list of constants, a constant or an integer.
    fn goal(&self, rng: &mut ChaCha8Rng) -> Vec<Literal> {
        let target = self.kb.target();
        let args = (0..target.arity)
            .map(|i| match rng.random_range(0..4) {
                0 => Term::Var(Name::new(&format!("G{i}"))),
                1 => {
                    let len = rng.random_range(1..=3);
                    Term::List((0..len).map(|_| self.constant(rng)).collect(), None)
                }
                2 => self.constant(rng),
                _ => self.int(rng),
            })
            .collect();
        vec![Literal::Atom(Atom {
            predicate: target.name,
            args,
        })]
    }

    fn perturb(&self, rng: &mut ChaCha8Rng, atom: &Atom) -> Atom {
        let mut out = atom.clone();
        if out.args.is_empty() {
            return out;
        }
        let i = rng.random_range(0..out.args.len());
        out.args[i] = match &out.args[i] {
            Term::Int(v) => Term::Int(v + rng.random_range(1..=3) * if rng.random_bool(0.5) { 1 } else { -1 }),
            Term::List(items, None) if !items.is_empty() => {
                let mut items = items.clone();
                let k = rng.random_range(0..items.len());
                items[k] = self.constant(rng);
                Term::List(items, None)
            }
            _ => self.constant(rng),
        };
        out
    }
}

fn outcome(theory: &Theory, q: &Atom, facts: &[Atom], limits: SolveLimits) -> Result<Entailment, String> {
    theory.entails(q, facts, limits).map_err(|e: SolveError| e.to_string())
}

/// Compares each phase with the next one and with the full knowledge base.
pub fn check_curriculum(kb: &KnowledgeBase, curriculum: &Curriculum, opts: &EntailOptions) -> Result<EntailReport, EntailError> {
    if opts.samples == 0 {
        return Err(EntailError::NoSamples);
    }
    let full = Theory::new(kb);
    let theories: Vec<Theory> = (0..curriculum.len()).map(|p| curriculum.theory(&full, p)).collect();
    let sampler = Sampler::new(kb, opts);
    let mut pairs = Vec::new();
    let mut short_phases = Vec::new();

    for (p, sub) in curriculum.phases().iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(p as u64);
        let domain: Vec<usize> = sub.domain.iter().copied().collect();
        let heads: BTreeSet<PredKey> = sub.rules.iter().map(|&r| kb.rule(r).head.key()).collect();
        let mut others: Vec<(Option<usize>, &Theory)> = vec![(None, &full)];
        if p + 1 < theories.len() {
            others.insert(0, (Some(p + 2), &theories[p + 1]));
        }
        let mut reports: Vec<PairReport> = others
            .iter()
            .map(|&(other, _)| PairReport {
                phase: p + 1,
                other,
                agree: 0,
                disagree: 0,
                indeterminate: 0,
                first_disagreement: None,
            })
            .collect();

        let mut asked = 0;
        let mut worlds = 0;
        while asked < opts.samples && worlds < opts.samples * 50 {
            worlds += 1;
            let facts = sampler.world(&mut rng, &domain);
            let harvest = full.harvest(&sampler.goal(&mut rng), &facts, opts.harvest_limits);
            // predicate first, then one of its lemmas, so rare heads get asked
            let mut by_pred: BTreeMap<PredKey, Vec<&Atom>> = BTreeMap::new();
            for a in harvest.lemmas.iter().filter(|a| heads.contains(&a.key())) {
                by_pred.entry(a.key()).or_default().push(a);
            }
            let groups: Vec<Vec<&Atom>> = by_pred.into_values().collect();
            if groups.is_empty() {
                continue;
            }
            for k in 0..opts.queries_per_world.min(opts.samples - asked) {
                let group = groups.choose(&mut rng).expect("nonempty");
                let lemma = *group.choose(&mut rng).expect("nonempty");
                let q = if k % 2 == 0 { lemma.clone() } else { sampler.perturb(&mut rng, lemma) };
                let here = outcome(&theories[p], &q, &facts, opts.query_limits);
                for (report, (_, theory)) in reports.iter_mut().zip(&others) {
                    let there = outcome(theory, &q, &facts, opts.query_limits);
                    if here == Ok(Entailment::Indeterminate) || there == Ok(Entailment::Indeterminate) {
                        report.indeterminate += 1;
                    } else if here == there {
                        report.agree += 1;
                    } else {
                        report.disagree += 1;
                        report
                            .first_disagreement
                            .get_or_insert_with(|| format!("{q} ({here:?} vs {there:?})"));
                    }
                }
                asked += 1;
            }
        }
        if asked < opts.samples {
            short_phases.push(p + 1);
        }
        pairs.extend(reports);
    }
    Ok(EntailReport { pairs, short_phases })
}

pub fn entail_check(kb: &KnowledgeBase, tau: Option<usize>, opts: &EntailOptions) -> Result<EntailReport, EntailError> {
    let curriculum = partition(kb, tau)?;
    check_curriculum(kb, &curriculum, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::SubBase;
    use crate::tasks::Task;

    fn opts(samples: usize) -> EntailOptions {
        EntailOptions {
            samples,
            ..EntailOptions::default()
        }
    }

    #[test]
    fn addition_curriculum_agrees() {
        let task = Task::addition(10, 1).unwrap();
        let report = entail_check(task.kb(), Some(2), &opts(60)).unwrap();
        assert!(report.passed(), "{report}");
        assert_eq!(report.pairs.len(), 9);
        assert!(report.short_phases.is_empty(), "{report}");
        assert!(report.pairs.iter().all(|p| p.total() == 60));
    }

    #[test]
    fn single_phase_is_trivially_consistent() {
        let task = Task::chess(8, 2).unwrap();
        let report = entail_check(task.kb(), Some(6), &opts(30)).unwrap();
        assert_eq!(report.pairs.len(), 1);
        assert_eq!(report.pairs[0].other, None);
        assert!(report.passed());
    }

    #[test]
    fn broken_partition_is_detected() {
        let task = Task::chess(8, 2).unwrap();
        let kb = task.kb();
        let good = partition(kb, None).unwrap();
        let lshape = kb.defining_rules(PredKey::new("lshape", 4))[0];
        let mut phases = good.phases().to_vec();
        let first = SubBase {
            rules: phases[0].rules.iter().copied().filter(|&r| r != lshape).collect(),
            ..phases[0].clone()
        };
        phases[0] = first;
        let broken = Curriculum::from_phases(phases);
        let report = check_curriculum(kb, &broken, &opts(100)).unwrap();
        assert!(!report.passed(), "{report}");
        assert!(report.to_string().contains("result: FAIL"));
    }

    #[test]
    fn zero_samples_is_an_error() {
        let task = Task::addition(10, 1).unwrap();
        assert!(matches!(entail_check(task.kb(), None, &opts(0)), Err(EntailError::NoSamples)));
    }
}
