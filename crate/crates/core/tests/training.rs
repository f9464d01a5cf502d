//! End-to-end training runs on small configurations.

use cabl_core::partition::partition;
use cabl_core::tasks::{Task, TaskKind};
use cabl_core::trainer::{run_training, Method, RunReport, TrainConfig};

fn decimal(digits: usize, method: Method, seed: u64, iters: usize) -> TrainConfig {
    let mut c = TrainConfig::new(TaskKind::Addition { base: 10, digits }, method, seed);
    c.max_iterations = iters;
    c.max_phase_iterations = c.max_phase_iterations.min(iters);
    c
}

/// Structural invariants every finished run must satisfy.
fn assert_consistent(report: &RunReport) {
    let c = &report.config;
    let task = Task::new(c.task).unwrap();
    let tau = match c.method {
        Method::Cabl => c.tau,
        Method::Abl => Some(task.kb().concepts().len()),
    };
    let curriculum = partition(task.kb(), tau).unwrap();
    let chance = 1.0 / task.num_labels() as f64;

    assert_eq!(report.normalization_violations, 0);
    assert_eq!(report.records.first().unwrap().iteration, 0);
    assert_eq!(report.last().iteration, c.max_iterations);
    for pair in report.records.windows(2) {
        assert!(pair[0].iteration < pair[1].iteration);
        assert!(pair[0].phase <= pair[1].phase, "phases never go back");
        assert!(pair[0].skipped <= pair[1].skipped);
    }
    for (k, t) in report.transitions.iter().enumerate() {
        assert_eq!(t.from, k + 1, "transitions advance one phase at a time");
        if !t.forced {
            assert_eq!(t.iteration % c.gate_every, 0);
            let at = report.records.iter().find(|r| r.iteration == t.iteration).unwrap();
            let domain = &curriculum.phase(t.from - 1).domain;
            assert!(domain.iter().all(|&l| at.per_label[l] > chance), "gate passed without every concept above chance");
        }
    }
}

#[test]
fn noiseless_single_digit_run_is_learned() {
    let mut c = decimal(1, Method::Cabl, 0, 2000);
    c.dataset.sigma = 1e-3;
    let report = run_training(&c).unwrap();
    assert_consistent(&report);
    assert!(report.last().seq_acc >= 0.99, "{:?}", report.last());
    assert_eq!(report.forced_transitions(), 0);
}

#[test]
fn baseline_runs_one_phase_on_the_same_data() {
    let report = run_training(&decimal(1, Method::Abl, 3, 300)).unwrap();
    assert_consistent(&report);
    assert!(report.transitions.is_empty());
    assert!(report.records.iter().all(|r| r.phase == 1));
    assert_eq!(report.phase_concepts.len(), 1);
}

#[test]
fn later_concepts_start_untrained_and_improve_in_their_phase() {
    let report = run_training(&decimal(1, Method::Cabl, 1, 1000)).unwrap();
    assert_consistent(&report);
    assert!(report.transitions.len() >= 2);
    let second = &report.phase_concepts[1];
    let start = report.transitions[0].iteration;
    let before = report.records.iter().rfind(|r| r.iteration <= start).unwrap();
    let after = report.last();
    for &l in second {
        assert!(before.per_label[l] < 0.5, "{} already learned: {}", report.label_names[l], before.per_label[l]);
        assert!(after.per_label[l] > 0.9, "{} not learned: {}", report.label_names[l], after.per_label[l]);
    }
}

#[test]
fn two_digit_runs_are_reproducible_and_consistent() {
    let c = decimal(2, Method::Cabl, 2, 400);
    let a = run_training(&c).unwrap();
    assert_consistent(&a);
    assert_eq!(a, run_training(&c).unwrap());
}

#[test]
fn chess_runs_complete() {
    let mut c = TrainConfig::new(TaskKind::Chess { board: 8, pieces: 3 }, Method::Cabl, 0);
    c.max_iterations = 300;
    c.max_phase_iterations = 100;
    c.tau = None;
    let report = run_training(&c).unwrap();
    assert_consistent(&report);
}
