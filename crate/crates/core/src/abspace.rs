//! Abduction-space sizes per curriculum phase across operand lengths.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::ops::RangeInclusive;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::abduction::{abduction_space_oracle, conditioned_space, generic_spaces, AbductionError, AbductionSpace};
use crate::logic::{LabelId, SolveLimits, Target};
use crate::partition::{partition, PartitionError};
use crate::tasks::{Instance, Task, TaskError};

pub const ABSPACE_COLUMNS: [&str; 11] = [
    "task",
    "base",
    "d",
    "m",
    "tau",
    "phase",
    "domain_size",
    "space_size",
    "bound_Nm",
    "conditioned_size",
    "wall_ms",
];

#[derive(Debug, Error)]
pub enum AbspaceError {
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Abduction(#[from] AbductionError),
    #[error("samples must be positive")]
    NoSamples,
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct AbspaceOptions {
    pub base: u32,
    pub digits: RangeInclusive<usize>,
    pub tau: Option<usize>,
    /// Random targets per phase; ignored when `target` is set.
    pub samples: usize,
    pub seed: u64,
    pub target: Option<i64>,
    /// Phases with at most this many candidate sequences are enumerated
    /// through the sub-base itself; larger ones use the arithmetic oracle.
    pub generic_cap: u64,
}

impl AbspaceOptions {
    pub fn new(base: u32, digits: RangeInclusive<usize>) -> Self {
        AbspaceOptions {
            base,
            digits,
            tau: Some(2),
            samples: 200,
            seed: 0,
            target: None,
            generic_cap: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AbspaceRow {
    pub base: u32,
    pub d: usize,
    pub m: usize,
    pub tau: Option<usize>,
    pub phase: usize,
    pub domain_size: usize,
    /// Mean `|S_p|` over the sampled targets.
    pub space_size: f64,
    pub bound_nm: u64,
    /// Mean size after fixing positions whose true label belongs to an
    /// earlier phase.
    pub conditioned_size: f64,
    pub wall_ms: u64,
}

/// Spaces of one phase, built by whichever path the cap allows.
enum Source {
    Generic(BTreeMap<Target, AbductionSpace>),
    Oracle(HashMap<Target, AbductionSpace>),
}

impl Source {
    fn get(&mut self, task: &Task, y: &Target, domain: &[LabelId]) -> AbductionSpace {
        match self {
            Source::Generic(all) => all.get(y).cloned().unwrap_or_else(|| AbductionSpace {
                target: y.clone(),
                domain: domain.to_vec(),
                members: Vec::new(),
            }),
            Source::Oracle(cache) => cache
                .entry(y.clone())
                .or_insert_with(|| abduction_space_oracle(task, y, &[], domain))
                .clone(),
        }
    }
}

pub fn abspace_sweep(opts: &AbspaceOptions) -> Result<Vec<AbspaceRow>, AbspaceError> {
    if opts.samples == 0 && opts.target.is_none() {
        return Err(AbspaceError::NoSamples);
    }
    let mut rows = Vec::new();
    for d in opts.digits.clone() {
        let task = Task::addition(opts.base, d)?;
        let m = task.arity();
        let curriculum = partition(task.kb(), opts.tau)?;
        let mut earlier: Vec<LabelId> = Vec::new();
        for (p, sub) in curriculum.phases().iter().enumerate() {
            let start = Instant::now();
            let domain: Vec<LabelId> = sub.domain.iter().copied().collect();
            let bound = (domain.len() as u64).saturating_pow(m as u32);
            let mut source = if bound <= opts.generic_cap {
                let theory = curriculum.theory(task.theory(), p);
                Source::Generic(generic_spaces(&task, &theory, &[], &domain, bound, SolveLimits::default())?)
            } else {
                Source::Oracle(HashMap::new())
            };

            let (space_size, conditioned_size) = match opts.target {
                Some(y) => {
                    let n = source.get(&task, &Target::Int(y), &domain).len() as f64;
                    (n, n)
                }
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                    rng.set_stream(((d as u64) << 16) | p as u64);
                    let (mut total, mut conditioned) = (0usize, 0usize);
                    for _ in 0..opts.samples {
                        let Instance { labels, squares } = task.sample(&mut rng, &domain);
                        let y = task.evaluate(&Instance { labels: labels.clone(), squares });
                        let space = source.get(&task, &y, &domain);
                        let fixed: BTreeMap<usize, LabelId> = labels
                            .iter()
                            .enumerate()
                            .filter(|(_, l)| earlier.contains(l))
                            .map(|(i, &l)| (i, l))
                            .collect();
                        total += space.len();
                        conditioned += conditioned_space(&space, &fixed).len();
                    }
                    let k = opts.samples as f64;
                    (total as f64 / k, conditioned as f64 / k)
                }
            };
            rows.push(AbspaceRow {
                base: opts.base,
                d,
                m,
                tau: opts.tau,
                phase: p + 1,
                domain_size: domain.len(),
                space_size,
                bound_nm: bound,
                conditioned_size,
                wall_ms: start.elapsed().as_millis() as u64,
            });
            earlier = domain;
        }
    }
    Ok(rows)
}

pub fn write_abspace(rows: &[AbspaceRow], out: impl Write) -> Result<(), AbspaceError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ABSPACE_COLUMNS)?;
    for r in rows {
        w.write_record([
            "addition".to_owned(),
            r.base.to_string(),
            r.d.to_string(),
            r.m.to_string(),
            r.tau.map_or("none".into(), |t| t.to_string()),
            r.phase.to_string(),
            r.domain_size.to_string(),
            r.space_size.to_string(),
            r.bound_nm.to_string(),
            r.conditioned_size.to_string(),
            r.wall_ms.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Per operand length: the full space size (last phase) and the largest
/// conditioned size of any phase.
pub fn trend(rows: &[AbspaceRow]) -> Vec<(usize, f64, f64)> {
    let mut by_d: BTreeMap<usize, Vec<&AbspaceRow>> = BTreeMap::new();
    for r in rows {
        by_d.entry(r.d).or_default().push(r);
    }
    by_d.into_iter()
        .map(|(d, rs)| {
            let full = rs.iter().max_by_key(|r| r.phase).map_or(0.0, |r| r.space_size);
            let worst = rs.iter().map(|r| r.conditioned_size).fold(0.0, f64::max);
            (d, full, worst)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_target_reports_the_example_space() {
        let opts = AbspaceOptions {
            target: Some(86),
            ..AbspaceOptions::new(10, 2..=2)
        };
        let rows = abspace_sweep(&opts).unwrap();
        let last = rows.last().unwrap();
        assert_eq!((last.phase, last.space_size, last.bound_nm), (5, 87.0, 10_000));
        assert!(rows.iter().all(|r| r.space_size <= r.bound_nm as f64));
    }

    #[test]
    fn single_digit_rows() {
        let opts = AbspaceOptions {
            samples: 20,
            ..AbspaceOptions::new(10, 1..=1)
        };
        let rows = abspace_sweep(&opts).unwrap();
        assert_eq!(rows.len(), 5);
        assert_eq!(rows.last().unwrap().bound_nm, 100);
        assert_eq!(rows[0].domain_size, 2);
        // nothing is fixed in the first phase
        assert_eq!(rows[0].space_size, rows[0].conditioned_size);
        let mut out = Vec::new();
        write_abspace(&rows, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("task,base,d,m,tau,phase,domain_size,space_size,bound_Nm,conditioned_size,wall_ms\n"));
        assert!(text.lines().nth(1).unwrap().starts_with("addition,10,1,2,2,1,2,"));
    }

    #[test]
    fn zero_samples_is_an_error() {
        let opts = AbspaceOptions {
            samples: 0,
            ..AbspaceOptions::new(10, 1..=1)
        };
        assert!(matches!(abspace_sweep(&opts), Err(AbspaceError::NoSamples)));
    }
}
