//! The abduce, select and update loop, with or without a curriculum.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::abduction::{abduction_space_oracle, select_candidate, AbductionSpace, ConceptDistribution};
use crate::logic::{Deduction, LabelId, SolveError, SolveLimits, Target, Theory};
use crate::partition::{partition, Curriculum, PartitionError};
use crate::perception::{
    eval_concept_accuracy, generate_dataset, sequence_accuracy, Dataset, DatasetError, DatasetSpec, Example,
    PerceptionError, PerceptionModel,
};
use crate::tasks::{Square, Task, TaskError, TaskKind};

const INIT_STREAM: u64 = 3;
const ORDER_STREAM: u64 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    /// Curriculum over the partitioned knowledge base.
    Cabl,
    /// The whole knowledge base and all data from the start.
    Abl,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Cabl => "cabl",
            Method::Abl => "abl",
        })
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cabl" => Ok(Method::Cabl),
            "abl" => Ok(Method::Abl),
            other => Err(format!("unknown method {other:?}; expected cabl or abl")),
        }
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("no training example fits the domain of phase {phase}")]
    EmptySchedule { phase: usize },
    #[error("label {0} is missing from the accuracy map")]
    MissingLabel(LabelId),
    #[error("pseudo-labels {labels:?} do not deduce target {target} at iteration {iteration}")]
    InvalidPseudoLabel {
        iteration: usize,
        labels: Vec<LabelId>,
        target: Target,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub task: TaskKind,
    pub method: Method,
    /// Minimum number of new concepts per phase; also shapes the phase
    /// pools in the shared training data.
    pub tau: Option<usize>,
    pub max_iterations: usize,
    pub gate_every: usize,
    pub max_phase_iterations: usize,
    pub learning_rate: f64,
    pub init_scale: f64,
    pub seed: u64,
    pub dataset: DatasetSpec,
    /// Wall-clock columns stay zero unless set, keeping metrics reproducible.
    pub record_wall_time: bool,
}

impl TrainConfig {
    pub const DEFAULT_TAU: usize = 2;

    pub fn new(task: TaskKind, method: Method, seed: u64) -> Self {
        let labels = match task {
            TaskKind::Addition { base, .. } => base as usize,
            TaskKind::Chess { .. } => crate::tasks::chess::PIECES.len(),
        };
        TrainConfig {
            task,
            method,
            tau: Some(Self::DEFAULT_TAU),
            max_iterations: 2000,
            gate_every: 50,
            max_phase_iterations: 1000,
            learning_rate: 0.1,
            init_scale: 0.01,
            seed,
            dataset: DatasetSpec::new(labels, seed),
            record_wall_time: false,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let fail = |m: String| Err(TrainError::Config(m));
        if self.gate_every == 0 {
            return fail("gate-every must be positive".into());
        }
        if !(self.gate_every <= self.max_phase_iterations && self.max_phase_iterations <= self.max_iterations) {
            return fail(format!(
                "need gate-every ({}) <= max-phase-iters ({}) <= iters ({})",
                self.gate_every, self.max_phase_iterations, self.max_iterations
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("lr must be positive".into());
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return fail("init-scale must be positive".into());
        }
        if self.tau == Some(0) {
            return fail("tau must be positive".into());
        }
        Ok(())
    }
}

/// True iff every label of `domain` is classified above the chance rate `1/total`.
pub fn phase_gate(acc: &[f64], domain: &BTreeSet<LabelId>, total: usize) -> Result<bool, TrainError> {
    let chance = 1.0 / total as f64;
    let mut pass = true;
    for &z in domain {
        let a = *acc.get(z).ok_or(TrainError::MissingLabel(z))?;
        pass &= a > chance;
    }
    Ok(pass)
}

/// Indices of the examples whose true labels all lie in `domain`; the final
/// phase takes everything.
pub fn schedule_data(
    examples: &[Example],
    domain: &BTreeSet<LabelId>,
    phase: usize,
    is_final: bool,
) -> Result<Vec<usize>, TrainError> {
    if is_final {
        return Ok((0..examples.len()).collect());
    }
    let chosen: Vec<usize> = examples
        .iter()
        .enumerate()
        .filter(|(_, e)| e.concepts.iter().all(|l| domain.contains(l)))
        .map(|(i, _)| i)
        .collect();
    if chosen.is_empty() {
        return Err(TrainError::EmptySchedule { phase });
    }
    Ok(chosen)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRecord {
    pub iteration: usize,
    /// 1-based phase index.
    pub phase: usize,
    pub seq_acc: f64,
    pub mean_acc: f64,
    /// Mean size of the abduction spaces built since the previous record.
    pub space_mean: f64,
    /// Examples skipped so far because their space was empty.
    pub skipped: usize,
    pub wall_ms: u64,
    pub per_label: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transition {
    pub iteration: usize,
    /// 1-based index of the phase being left.
    pub from: usize,
    pub forced: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub config: TrainConfig,
    pub label_names: Vec<String>,
    /// Concepts introduced by each phase that actually ran.
    pub phase_concepts: Vec<Vec<LabelId>>,
    pub records: Vec<MetricsRecord>,
    pub transitions: Vec<Transition>,
    pub final_accuracy: Vec<f64>,
    /// Steps after which some prediction failed to be a distribution.
    pub normalization_violations: usize,
    pub skipped: usize,
    pub model: PerceptionModel,
}

impl RunReport {
    pub fn forced_transitions(&self) -> usize {
        self.transitions.iter().filter(|t| t.forced).count()
    }

    pub fn last(&self) -> &MetricsRecord {
        self.records.last().expect("a run records at least its start")
    }
}

fn is_distribution(p: &[f64]) -> bool {
    p.iter().all(|&x| x.is_finite() && x >= 0.0) && (p.iter().sum::<f64>() - 1.0).abs() <= 1e-9
}

struct Loop<'a> {
    task: &'a Task,
    config: &'a TrainConfig,
    data: &'a Dataset,
    curriculum: Curriculum,
    theories: Vec<Theory>,
    cache: HashMap<(usize, Target, Vec<Square>), AbductionSpace>,
    model: PerceptionModel,
    order_rng: ChaCha8Rng,
    records: Vec<MetricsRecord>,
    transitions: Vec<Transition>,
    skipped: usize,
    violations: usize,
    window_spaces: (usize, usize),
    start: Instant,
}

impl Loop<'_> {
    fn space(&mut self, phase: usize, ex: &Example) -> AbductionSpace {
        let key = (phase, ex.target.clone(), ex.squares.clone());
        if let Some(s) = self.cache.get(&key) {
            return s.clone();
        }
        let domain: Vec<LabelId> = self.curriculum.phase(phase).domain.iter().copied().collect();
        let space = abduction_space_oracle(self.task, &ex.target, &ex.squares, &domain);
        self.cache.insert(key, space.clone());
        space
    }

    fn record(&mut self, iteration: usize, phase: usize) -> Result<Vec<f64>, TrainError> {
        let per_label = eval_concept_accuracy(&self.model, &self.data.validation)?;
        let (count, total) = std::mem::take(&mut self.window_spaces);
        self.records.push(MetricsRecord {
            iteration,
            phase: phase + 1,
            seq_acc: sequence_accuracy(&self.model, &self.data.validation)?,
            mean_acc: per_label.iter().sum::<f64>() / per_label.len() as f64,
            space_mean: if count == 0 { 0.0 } else { total as f64 / count as f64 },
            skipped: self.skipped,
            wall_ms: if self.config.record_wall_time {
                self.start.elapsed().as_millis() as u64
            } else {
                0
            },
            per_label: per_label.clone(),
        });
        Ok(per_label)
    }

    /// One example: keep the model's reading if it already explains the
    /// target, otherwise abduce, then take a gradient step.
    fn step(&mut self, iteration: usize, phase: usize, ex: &Example) -> Result<(), TrainError> {
        let probs = ex
            .features
            .iter()
            .map(|x| self.model.predict(x))
            .collect::<Result<Vec<_>, _>>()?;
        let guess: Vec<LabelId> = probs.iter().map(|p| crate::perception::argmax(p)).collect();
        let limits = SolveLimits::default();
        let theory = &self.theories[phase];
        let explained = self.task.deduce(theory, &guess, &ex.squares, limits)? == Deduction::Value(ex.target.clone());
        let pseudo = if explained {
            guess
        } else {
            let space = self.space(phase, ex);
            self.window_spaces.0 += 1;
            self.window_spaces.1 += space.len();
            let dist = ConceptDistribution::new(probs).map_err(|e| TrainError::Config(e.to_string()))?;
            match select_candidate(&space, &dist) {
                Ok(z) => {
                    let z = z.clone();
                    let check = self.task.deduce(&self.theories[phase], &z, &ex.squares, limits)?;
                    if check != Deduction::Value(ex.target.clone()) {
                        return Err(TrainError::InvalidPseudoLabel {
                            iteration,
                            labels: z,
                            target: ex.target.clone(),
                        });
                    }
                    z
                }
                Err(_) => {
                    self.skipped += 1;
                    return Ok(());
                }
            }
        };
        let batch: Vec<(&[f64], LabelId)> = ex.features.iter().map(Vec::as_slice).zip(pseudo).collect();
        self.model.train_step(&batch, self.config.learning_rate)?;
        let normalized = ex
            .features
            .iter()
            .all(|x| self.model.predict(x).is_ok_and(|p| is_distribution(&p)));
        if !normalized {
            self.violations += 1;
        }
        Ok(())
    }
}

/// Pool domains for the shared training data: one per non-final phase of
/// the curriculum at `tau`.
pub fn phase_pools(task: &Task, tau: Option<usize>) -> Result<Vec<Vec<LabelId>>, TrainError> {
    let curriculum = partition(task.kb(), tau.or(Some(TrainConfig::DEFAULT_TAU)))?;
    let phases = curriculum.phases();
    Ok(phases[..phases.len() - 1]
        .iter()
        .map(|s| s.domain.iter().copied().collect())
        .collect())
}

pub fn build_dataset(task: &Task, config: &TrainConfig) -> Result<Dataset, TrainError> {
    let pools = phase_pools(task, config.tau)?;
    Ok(generate_dataset(&config.dataset, task, &pools)?)
}

/// Runs training on freshly generated data.
pub fn run_training(config: &TrainConfig) -> Result<RunReport, TrainError> {
    let task = Task::new(config.task)?;
    let data = build_dataset(&task, config)?;
    run_training_on(&task, config, &data)
}

/// Runs training on `data`, which must come from `task`.
pub fn run_training_on(task: &Task, config: &TrainConfig, data: &Dataset) -> Result<RunReport, TrainError> {
    config.validate()?;
    let kb = task.kb();
    let curriculum = match config.method {
        Method::Cabl => partition(kb, config.tau)?,
        Method::Abl => partition(kb, Some(kb.concepts().len()))?,
    };
    let theories = (0..curriculum.len())
        .map(|p| curriculum.theory(task.theory(), p))
        .collect();
    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    init_rng.set_stream(INIT_STREAM);
    let mut order_rng = ChaCha8Rng::seed_from_u64(config.seed);
    order_rng.set_stream(ORDER_STREAM);
    let mut run = Loop {
        task,
        config,
        data,
        model: PerceptionModel::random(task.num_labels(), config.dataset.dim, config.init_scale, &mut init_rng),
        theories,
        curriculum,
        cache: HashMap::new(),
        order_rng,
        records: Vec::new(),
        transitions: Vec::new(),
        skipped: 0,
        violations: 0,
        window_spaces: (0, 0),
        start: Instant::now(),
    };

    let last_phase = run.curriculum.len() - 1;
    let total = task.num_labels();
    let mut phase = 0;
    let mut in_phase = 0;
    let mut schedule = schedule_data(&data.train, &run.curriculum.phase(0).domain, 1, last_phase == 0)?;
    let mut queue: Vec<usize> = Vec::new();
    run.record(0, phase)?;

    for iteration in 1..=config.max_iterations {
        if queue.is_empty() {
            queue = schedule.clone();
            queue.shuffle(&mut run.order_rng);
        }
        let ex = &data.train[queue.pop().expect("schedule is nonempty")];
        run.step(iteration, phase, ex)?;
        in_phase += 1;

        let mut advance = None;
        if iteration % config.gate_every == 0 || iteration == config.max_iterations {
            let acc = run.record(iteration, phase)?;
            if phase < last_phase && phase_gate(&acc, &run.curriculum.phase(phase).domain, total)? {
                advance = Some(false);
            }
        }
        if advance.is_none() && phase < last_phase && in_phase >= config.max_phase_iterations {
            advance = Some(true);
        }
        if let Some(forced) = advance {
            run.transitions.push(Transition {
                iteration,
                from: phase + 1,
                forced,
            });
            phase += 1;
            in_phase = 0;
            schedule = schedule_data(&data.train, &run.curriculum.phase(phase).domain, phase + 1, phase == last_phase)?;
            queue.clear();
        }
    }

    let final_accuracy = run.last_accuracy();
    let phase_concepts = run.curriculum.phases()[..=phase]
        .iter()
        .map(|s| s.introduced.clone())
        .collect();
    Ok(RunReport {
        config: config.clone(),
        label_names: (0..total).map(|l| kb.label_name(l).to_string()).collect(),
        phase_concepts,
        final_accuracy,
        normalization_violations: run.violations,
        skipped: run.skipped,
        records: run.records,
        transitions: run.transitions,
        model: run.model,
    })
}

impl Loop<'_> {
    fn last_accuracy(&self) -> Vec<f64> {
        self.records.last().map(|r| r.per_label.clone()).unwrap_or_default()
    }
}
