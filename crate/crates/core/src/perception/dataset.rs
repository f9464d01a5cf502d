use std::collections::HashMap;
use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use super::{PerceptionError, PerceptionModel};
use crate::logic::{Deduction, LabelId, SolveError, SolveLimits, Target};
use crate::tasks::{Square, Task};

const TRAIN_STREAM: u64 = 1;
const VALIDATION_STREAM: u64 = 2;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid dataset spec: {0}")]
    Spec(String),
    #[error("labels {0:?} have no deducible target")]
    NoTarget(Vec<LabelId>),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("record {record}: {message}")]
    Format { record: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Gaussian clusters around the vertices of a regular simplex.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSpec {
    pub classes: usize,
    pub dim: usize,
    /// Distance between any two class means.
    pub separation: f64,
    pub sigma: f64,
    pub seed: u64,
    /// Uniformly sampled training sequences.
    pub train_size: usize,
    pub val_size: usize,
    /// Extra training sequences drawn from each restricted pool domain.
    pub pool_size: usize,
}

impl DatasetSpec {
    pub const DEFAULT_DIM: usize = 16;
    pub const DEFAULT_SEPARATION: f64 = 6.0;

    pub fn new(classes: usize, seed: u64) -> Self {
        DatasetSpec {
            classes,
            dim: Self::DEFAULT_DIM,
            separation: Self::DEFAULT_SEPARATION,
            sigma: 1.0,
            seed,
            train_size: 5000,
            val_size: 200,
            pool_size: 200,
        }
    }

    fn validate(&self) -> Result<(), DatasetError> {
        let fail = |m: &str| Err(DatasetError::Spec(m.to_owned()));
        if self.classes < 2 {
            return fail("at least two classes are needed");
        }
        if self.dim < self.classes {
            return fail("feature dimension must be at least the number of classes");
        }
        if !(self.separation > 0.0 && self.separation.is_finite()) {
            return fail("separation must be positive");
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return fail("sigma must be positive");
        }
        if self.train_size == 0 || self.val_size == 0 {
            return fail("train and validation sizes must be positive");
        }
        Ok(())
    }

    /// Mean of class `c`: the centred basis vector `e_c`, scaled so that
    /// neighbouring means are `separation` apart.
    pub fn class_mean(&self, c: LabelId) -> Vec<f64> {
        let scale = self.separation / std::f64::consts::SQRT_2;
        let centre = 1.0 / self.classes as f64;
        (0..self.dim)
            .map(|j| match j {
                _ if j >= self.classes => 0.0,
                _ if j == c => (1.0 - centre) * scale,
                _ => -centre * scale,
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub id: usize,
    pub features: Vec<Vec<f64>>,
    pub target: Target,
    /// Ground-truth labels; never used as a training signal.
    pub concepts: Vec<LabelId>,
    pub squares: Vec<Square>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub train: Vec<Example>,
    pub validation: Vec<Example>,
}

struct Sampler<'a> {
    task: &'a Task,
    means: Vec<Vec<f64>>,
    noise: Normal<f64>,
}

impl Sampler<'_> {
    fn example(&self, rng: &mut ChaCha8Rng, id: usize, domain: &[LabelId]) -> Result<Example, DatasetError> {
        let instance = self.task.sample(rng, domain);
        let features = instance
            .labels
            .iter()
            .map(|&l| self.means[l].iter().map(|mu| mu + self.noise.sample(rng)).collect())
            .collect();
        let target = match self.task.deduce(self.task.theory(), &instance.labels, &instance.squares, SolveLimits::default())? {
            Deduction::Value(y) => y,
            Deduction::NoProof => return Err(DatasetError::NoTarget(instance.labels)),
        };
        Ok(Example {
            id,
            features,
            target,
            concepts: instance.labels,
            squares: instance.squares,
        })
    }
}

/// Training sequences (uniform ones first, then `pool_size` per entry of
/// `pools`) and a validation set drawn from an independent stream.
pub fn generate_dataset(spec: &DatasetSpec, task: &Task, pools: &[Vec<LabelId>]) -> Result<Dataset, DatasetError> {
    spec.validate()?;
    if spec.classes != task.num_labels() {
        return Err(DatasetError::Spec(format!(
            "{} classes for a task with {} labels",
            spec.classes,
            task.num_labels()
        )));
    }
    let sampler = Sampler {
        task,
        means: (0..spec.classes).map(|c| spec.class_mean(c)).collect(),
        noise: Normal::new(0.0, spec.sigma).expect("validated sigma"),
    };
    let full: Vec<LabelId> = (0..spec.classes).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(TRAIN_STREAM);
    let mut train = Vec::with_capacity(spec.train_size + pools.len() * spec.pool_size);
    for _ in 0..spec.train_size {
        train.push(sampler.example(&mut rng, train.len(), &full)?);
    }
    for pool in pools {
        if pool.is_empty() {
            return Err(DatasetError::Spec("empty pool domain".into()));
        }
        for _ in 0..spec.pool_size {
            train.push(sampler.example(&mut rng, train.len(), pool)?);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(VALIDATION_STREAM);
    let validation = (0..spec.val_size)
        .map(|id| sampler.example(&mut rng, id, &full))
        .collect::<Result<_, _>>()?;
    Ok(Dataset { train, validation })
}

/// Per-label accuracy of argmax predictions over every validation position.
pub fn eval_concept_accuracy(model: &PerceptionModel, validation: &[Example]) -> Result<Vec<f64>, PerceptionError> {
    let n = model.classes();
    let mut correct = vec![0usize; n];
    let mut seen = vec![0usize; n];
    for ex in validation {
        for (x, &truth) in ex.features.iter().zip(&ex.concepts) {
            if truth >= n {
                return Err(PerceptionError::Label { label: truth, classes: n });
            }
            seen[truth] += 1;
            if model.classify(x)? == truth {
                correct[truth] += 1;
            }
        }
    }
    if let Some(missing) = seen.iter().position(|&s| s == 0) {
        return Err(PerceptionError::Uncovered(missing));
    }
    Ok(correct.iter().zip(&seen).map(|(&c, &s)| c as f64 / s as f64).collect())
}

/// Fraction of sequences whose every position is classified correctly.
pub fn sequence_accuracy(model: &PerceptionModel, validation: &[Example]) -> Result<f64, PerceptionError> {
    if validation.is_empty() {
        return Ok(0.0);
    }
    let mut right = 0;
    for ex in validation {
        let mut all = true;
        for (x, &truth) in ex.features.iter().zip(&ex.concepts) {
            all &= model.classify(x)? == truth;
        }
        right += usize::from(all);
    }
    Ok(right as f64 / validation.len() as f64)
}

fn format_squares(squares: &[Square]) -> String {
    squares.iter().map(|(x, y)| format!("{x}:{y}")).collect::<Vec<_>>().join(" ")
}

fn parse_squares(text: &str, record: u64) -> Result<Vec<Square>, DatasetError> {
    let bad = || DatasetError::Format {
        record,
        message: format!("bad squares {text:?}"),
    };
    text.split_whitespace()
        .map(|pair| {
            let (x, y) = pair.split_once(':').ok_or_else(bad)?;
            Ok((x.parse().map_err(|_| bad())?, y.parse().map_err(|_| bad())?))
        })
        .collect()
}

/// Writes one row per position plus a sidecar of per-sequence targets.
/// Features use shortest round-trip formatting, so reloading is exact.
pub fn save_dataset(examples: &[Example], rows: impl Write, sidecar: impl Write) -> Result<(), DatasetError> {
    let dim = examples
        .iter()
        .flat_map(|e| e.features.first())
        .map(Vec::len)
        .next()
        .unwrap_or(0);
    let mut out = csv::Writer::from_writer(rows);
    let mut header = vec!["example_id".to_owned(), "position".to_owned(), "true_label".to_owned()];
    header.extend((0..dim).map(|j| format!("f{j}")));
    out.write_record(&header)?;
    for ex in examples {
        for (pos, (x, label)) in ex.features.iter().zip(&ex.concepts).enumerate() {
            let mut row = vec![ex.id.to_string(), pos.to_string(), label.to_string()];
            row.extend(x.iter().map(f64::to_string));
            out.write_record(&row)?;
        }
    }
    out.flush().map_err(csv::Error::from)?;

    let mut side = csv::Writer::from_writer(sidecar);
    side.write_record(["example_id", "target", "squares"])?;
    for ex in examples {
        side.write_record([ex.id.to_string(), ex.target.to_string(), format_squares(&ex.squares)])?;
    }
    side.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Inverse of [`save_dataset`].
pub fn load_dataset(rows: impl Read, sidecar: impl Read) -> Result<Vec<Example>, DatasetError> {
    let mut examples: Vec<Example> = Vec::new();
    let mut index: HashMap<usize, usize> = HashMap::new();
    let mut reader = csv::Reader::from_reader(rows);
    let header = reader.headers()?.clone();
    let expected = ["example_id", "position", "true_label"];
    if header.len() < 4 || header.iter().take(3).ne(expected) {
        return Err(DatasetError::Format {
            record: 0,
            message: "expected example_id,position,true_label,f0,...".into(),
        });
    }
    let dim = header.len() - 3;
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let n = i as u64 + 1;
        let field = |k: usize| -> Result<usize, DatasetError> {
            record[k].parse().map_err(|_| DatasetError::Format {
                record: n,
                message: format!("column {} is not a non-negative integer", header[k].to_owned()),
            })
        };
        let (id, pos, label) = (field(0)?, field(1)?, field(2)?);
        let x = record
            .iter()
            .skip(3)
            .map(|v| v.parse::<f64>().ok().filter(|f| f.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .filter(|x| x.len() == dim)
            .ok_or_else(|| DatasetError::Format {
                record: n,
                message: "features must be finite numbers".into(),
            })?;
        let continues = examples
            .last()
            .is_some_and(|ex| ex.id == id && ex.features.len() == pos);
        if continues {
            let ex = examples.last_mut().expect("checked above");
            ex.features.push(x);
            ex.concepts.push(label);
        } else if pos == 0 && !index.contains_key(&id) {
            index.insert(id, examples.len());
            examples.push(Example {
                id,
                features: vec![x],
                target: Target::Bool(false),
                concepts: vec![label],
                squares: Vec::new(),
            });
        } else {
            return Err(DatasetError::Format {
                record: n,
                message: format!("position {pos} of example {id} is out of sequence"),
            });
        }
    }

    let mut side = csv::Reader::from_reader(sidecar);
    let mut seen = vec![false; examples.len()];
    for (i, record) in side.records().enumerate() {
        let record = record?;
        let n = i as u64 + 1;
        if record.len() < 2 {
            return Err(DatasetError::Format {
                record: n,
                message: "expected example_id,target[,squares]".into(),
            });
        }
        let id: usize = record[0].parse().map_err(|_| DatasetError::Format {
            record: n,
            message: "bad example_id".into(),
        })?;
        let k = index
            .get(&id)
            .copied()
            .filter(|&k| !seen[k])
            .ok_or_else(|| DatasetError::Format {
                record: n,
                message: format!("unknown or repeated example {id}"),
            })?;
        seen[k] = true;
        examples[k].target = Target::parse(&record[1]);
        examples[k].squares = parse_squares(record.get(2).unwrap_or(""), n)?;
    }
    if let Some(k) = seen.iter().position(|s| !s) {
        return Err(DatasetError::Format {
            record: 0,
            message: format!("example {} has no target", examples[k].id),
        });
    }
    Ok(examples)
}
