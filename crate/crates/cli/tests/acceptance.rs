//! Acceptance suite: one pass/fail line per criterion, tolerances pinned below.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode, Output};
use std::time::{Duration, Instant};

use cabl_core::abduction::{abduction_space_oracle, generic_spaces, AbductionSpace};
use cabl_core::entail::{entail_check, EntailOptions};
use cabl_core::logic::{parse_program, LabelId, SolveLimits, Target};
use cabl_core::partition::{partition, partition_timed};
use cabl_core::perception::PerceptionModel;
use cabl_core::report::iterations_to;
use cabl_core::tasks::{Task, TaskKind};
use cabl_core::trainer::{run_training, Method, RunReport, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EXACTNESS_BUDGET: Duration = Duration::from_secs(10);
const EXAMPLE_TARGET: i64 = 86;
const EXAMPLE_SIZE: usize = 87;
const RANDOM_TWO_DIGIT_TARGETS: usize = 50;

const ENTAIL_TAUS: [usize; 3] = [1, 2, 3];
const ENTAIL_SAMPLES: usize = 200;
const MAX_INDETERMINATE: f64 = 0.01;
const ENTAIL_BUDGET: Duration = Duration::from_secs(60);

const SWEEP_DIGITS: &str = "1..4";
const SWEEP_BUDGET: Duration = Duration::from_secs(300);

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const ITERATIONS: usize = 2000;
const ACCURACY_SLACK: f64 = 0.005;
const CONVERGENCE_FRACTION: f64 = 0.9;
const CONVERGENCE_BUDGET: Duration = Duration::from_secs(20 * 60);

const FORGETTING_SLACK: f64 = 0.05;
const SMOOTH_SHARE: f64 = 0.9;

const CHESS_PARTITION_BUDGET: Duration = Duration::from_secs(5);
const ADDITION_PARTITION_BUDGET: Duration = Duration::from_secs(1);
const ADDITION_RULES: usize = 14;

const FD_INSTANCES: usize = 100;
const FD_STEP: f64 = 1e-4;
const FD_TOLERANCE: f64 = 1e-5;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn cabl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cabl")).args(args).output().expect("binary runs")
}

/// Counts spaces checked against `|S| <= N^m` across every criterion.
#[derive(Default)]
struct BoundLedger {
    checked: usize,
    violations: Vec<String>,
}

impl BoundLedger {
    fn check(&mut self, space: &AbductionSpace, m: usize, what: &str) {
        self.checked += 1;
        if space.len() as u64 > space.bound(m) {
            self.violations.push(format!("{what}: |S|={} > {}", space.len(), space.bound(m)));
        }
    }
}

fn exactness(bounds: &mut BoundLedger) -> Verdict {
    let start = Instant::now();
    let mut mismatches = Vec::new();
    let mut compared = 0;

    for base in [10u32, 16] {
        let task = Task::addition(base, 1).unwrap();
        let all: Vec<LabelId> = (0..base as usize).collect();
        let generic = generic_spaces(&task, task.theory(), &[], &all, u64::MAX, SolveLimits::default()).unwrap();
        for y in 0..2 * i64::from(base) - 1 {
            let y = Target::Int(y);
            let oracle = abduction_space_oracle(&task, &y, &[], &all);
            let g = generic.get(&y).map_or(&[][..], |s| &s.members[..]);
            bounds.check(&oracle, 2, "d=1");
            compared += 1;
            if g != oracle.members.as_slice() {
                mismatches.push(format!("base {base} y={y}"));
            }
        }
    }

    let task = Task::addition(10, 2).unwrap();
    let all: Vec<LabelId> = (0..10).collect();
    let generic = generic_spaces(&task, task.theory(), &[], &all, u64::MAX, SolveLimits::default()).unwrap();
    let example = generic.get(&Target::Int(EXAMPLE_TARGET)).map_or(0, AbductionSpace::len);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..RANDOM_TWO_DIGIT_TARGETS {
        let y = Target::Int(rng.random_range(0..=198));
        let oracle = abduction_space_oracle(&task, &y, &[], &all);
        bounds.check(&oracle, 4, "d=2");
        bounds.check(&generic[&y], 4, "d=2 generic");
        compared += 1;
        if generic[&y].members != oracle.members {
            mismatches.push(format!("d=2 y={y}"));
        }
    }
    let elapsed = start.elapsed();
    verdict(
        example == EXAMPLE_SIZE && mismatches.is_empty() && elapsed < EXACTNESS_BUDGET,
        format!(
            "|S(y={EXAMPLE_TARGET})|={example} (want {EXAMPLE_SIZE}), {compared} spaces compared, {} mismatches {:?}, {:.1}s",
            mismatches.len(),
            mismatches,
            elapsed.as_secs_f64()
        ),
    )
}

fn bound_everywhere(bounds: &mut BoundLedger) -> Verdict {
    // every phase of the decimal curriculum, and random chess boards
    let task = Task::addition(10, 2).unwrap();
    let c = partition(task.kb(), Some(2)).unwrap();
    for p in 0..c.len() {
        let domain: Vec<LabelId> = c.phase(p).domain.iter().copied().collect();
        let theory = c.theory(task.theory(), p);
        for space in generic_spaces(&task, &theory, &[], &domain, u64::MAX, SolveLimits::default()).unwrap().values() {
            bounds.check(space, 4, &format!("phase {}", p + 1));
        }
    }
    let chess = Task::chess(8, 3).unwrap();
    let all: Vec<LabelId> = (0..6).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let squares = chess.sample(&mut rng, &all).squares;
        for space in generic_spaces(&chess, chess.theory(), &squares, &all, u64::MAX, SolveLimits::default()).unwrap().values() {
            bounds.check(space, 3, "chess");
        }
    }
    verdict(
        bounds.violations.is_empty(),
        format!("{} spaces checked, {} violations {:?}", bounds.checked, bounds.violations.len(), bounds.violations),
    )
}

fn equivalence() -> Verdict {
    let start = Instant::now();
    let mut failures = Vec::new();
    let (mut pairs, mut queries, mut indeterminate) = (0, 0, 0);
    for (name, file) in [("decimal", "addition_dec.pl"), ("hex", "addition_hex.pl"), ("chess", "chess.pl")] {
        let kb = parse_program(&fs::read_to_string(fixture(file)).unwrap()).unwrap();
        for tau in ENTAIL_TAUS {
            let opts = EntailOptions {
                samples: ENTAIL_SAMPLES,
                ..EntailOptions::default()
            };
            let report = entail_check(&kb, Some(tau), &opts).unwrap();
            for p in &report.pairs {
                pairs += 1;
                queries += p.total();
                indeterminate += p.indeterminate;
                if p.agree + p.disagree < ENTAIL_SAMPLES {
                    failures.push(format!("{name} tau={tau} phase {}: only {} decided", p.phase, p.agree + p.disagree));
                }
            }
            if !report.passed() {
                failures.push(format!("{name} tau={tau}: {} disagreements", report.disagreements()));
            }
            if report.indeterminate_fraction() >= MAX_INDETERMINATE {
                failures.push(format!("{name} tau={tau}: {:.2}% indeterminate", 100.0 * report.indeterminate_fraction()));
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        failures.is_empty() && elapsed < ENTAIL_BUDGET,
        format!(
            "{pairs} phase pairs, {queries} queries, {indeterminate} indeterminate, {:.1}s {failures:?}",
            elapsed.as_secs_f64()
        ),
    )
}

fn partition_fixture() -> Verdict {
    let out = cabl(&["partition", "--kb", fixture("chess.pl").to_str().unwrap()]);
    let text = String::from_utf8_lossy(&out.stdout);
    let phases: String = text.lines().filter(|l| l.starts_with("phase")).map(|l| format!("{l}\n")).collect();
    let golden = include_str!("golden/chess_partition.txt");

    let kb = parse_program(&fs::read_to_string(fixture("chess.pl")).unwrap()).unwrap();
    let c = partition(&kb, None).unwrap();
    let order: Vec<&str> = c
        .phases()
        .iter()
        .flat_map(|s| s.introduced.iter().map(|&l| kb.label_name(l).as_str()))
        .collect();
    let at = |name: &str| order.iter().position(|n| *n == name).unwrap();
    let ordered = at("knight") < at("rook") && at("rook") < at("bishop") && at("bishop") < at("queen");

    let count = |file: &str| {
        let kb = parse_program(&fs::read_to_string(fixture(file)).unwrap()).unwrap();
        partition(&kb, Some(2)).unwrap().len()
    };
    let (dec, hex) = (count("addition_dec.pl"), count("addition_hex.pl"));
    verdict(
        out.status.success() && phases == golden && ordered && dec == 5 && hex == 8,
        format!("order {}, golden match {}, tau=2 phases decimal {dec} hex {hex}", order.join(" -> "), phases == golden),
    )
}

fn space_trend() -> Verdict {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("abspace.csv");
    let out = cabl(&[
        "abspace",
        "--task",
        "addition",
        "--base",
        "10",
        "--digits",
        SWEEP_DIGITS,
        "--tau",
        "2",
        "--out",
        csv_path.to_str().unwrap(),
    ]);
    let elapsed = start.elapsed();
    if !out.status.success() {
        return verdict(false, format!("abspace failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    // per d: (last phase, full size, max conditioned)
    let mut by_d: BTreeMap<usize, (usize, f64, f64)> = BTreeMap::new();
    let mut reader = csv::Reader::from_path(&csv_path).unwrap();
    for row in reader.records() {
        let row = row.unwrap();
        let d: usize = row[2].parse().unwrap();
        let phase: usize = row[5].parse().unwrap();
        let space: f64 = row[7].parse().unwrap();
        let conditioned: f64 = row[9].parse().unwrap();
        let e = by_d.entry(d).or_insert((0, 0.0, 0.0));
        if phase > e.0 {
            e.0 = phase;
            e.1 = space;
        }
        e.2 = e.2.max(conditioned);
    }
    let series: Vec<(usize, f64, f64)> = by_d.into_iter().map(|(d, (_, full, worst))| (d, full, worst / full)).collect();
    let grows = series.windows(2).all(|w| w[1].1 > w[0].1);
    let shrinks = series.windows(2).all(|w| w[1].2 < w[0].2);
    let shown: Vec<String> = series.iter().map(|(d, f, r)| format!("d={d} full={f:.1} ratio={r:.4}")).collect();
    verdict(
        grows && shrinks && elapsed < SWEEP_BUDGET && series.len() == 4,
        format!("{}, {:.1}s", shown.join("; "), elapsed.as_secs_f64()),
    )
}

fn decimal_run(method: Method, seed: u64, iterations: usize, digits: usize) -> RunReport {
    let mut c = TrainConfig::new(TaskKind::Addition { base: 10, digits }, method, seed);
    c.max_iterations = iterations;
    run_training(&c).unwrap()
}

fn mean(v: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = v.into_iter().collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn convergence(runs: &[(RunReport, RunReport)], elapsed: Duration) -> Verdict {
    let final_acc = |r: &RunReport| r.last().mean_acc;
    let t90 = |r: &RunReport| iterations_to(&r.records, CONVERGENCE_FRACTION).unwrap() as f64;
    let (cabl_acc, abl_acc) = (mean(runs.iter().map(|r| final_acc(&r.0))), mean(runs.iter().map(|r| final_acc(&r.1))));
    let (cabl_t, abl_t) = (mean(runs.iter().map(|r| t90(&r.0))), mean(runs.iter().map(|r| t90(&r.1))));
    let per_seed: Vec<String> = runs
        .iter()
        .map(|(c, a)| format!("{:.3}/{}|{:.3}/{}", final_acc(c), t90(c), final_acc(a), t90(a)))
        .collect();
    verdict(
        cabl_acc >= abl_acc - ACCURACY_SLACK && cabl_t <= abl_t && elapsed < CONVERGENCE_BUDGET,
        format!(
            "final acc C-ABL {cabl_acc:.4} vs ABL {abl_acc:.4}; iters to 90% {cabl_t:.0} vs {abl_t:.0}; per seed (acc/t90 C-ABL|ABL) [{}]; {:.1}s",
            per_seed.join(", "),
            elapsed.as_secs_f64()
        ),
    )
}

fn smoothness(runs: &[(RunReport, RunReport)]) -> Verdict {
    let (mut held, mut total, mut excluded) = (0usize, 0usize, 0usize);
    let mut worst: Option<(String, f64)> = None;
    for (run, _) in runs {
        if run.forced_transitions() > 0 {
            excluded += 1;
            continue;
        }
        let last = run.last();
        for t in &run.transitions {
            let gate = run.records.iter().find(|r| r.iteration == t.iteration).expect("gate record");
            for &l in &run.phase_concepts[t.from - 1] {
                total += 1;
                let drop = gate.per_label[l] - last.per_label[l];
                if drop <= FORGETTING_SLACK {
                    held += 1;
                }
                if worst.as_ref().is_none_or(|w| drop > w.1) {
                    worst = Some((format!("seed {} {}", run.config.seed, run.label_names[l]), drop));
                }
            }
        }
    }
    let share = held as f64 / total.max(1) as f64;
    verdict(
        total > 0 && share >= SMOOTH_SHARE,
        format!(
            "{held}/{total} (seed, concept) pairs within {FORGETTING_SLACK} of their gate accuracy ({:.1}%), {excluded} runs excluded, largest drop {:?}",
            100.0 * share,
            worst
        ),
    )
}

fn partition_cost() -> Verdict {
    let chess = Task::chess(8, 3).unwrap();
    let addition = Task::addition(10, 1).unwrap();
    let (_, chess_t) = partition_timed(chess.kb(), None).unwrap();
    let (_, add_t) = partition_timed(addition.kb(), Some(2)).unwrap();
    verdict(
        chess_t < CHESS_PARTITION_BUDGET && add_t < ADDITION_PARTITION_BUDGET && addition.kb().len() == ADDITION_RULES,
        format!(
            "chess ({} rules) {:.3} ms, addition ({} rules) {:.3} ms",
            chess.kb().len(),
            chess_t.as_secs_f64() * 1e3,
            addition.kb().len(),
            add_t.as_secs_f64() * 1e3
        ),
    )
}

/// Relative error between the analytic gradient and central differences,
/// as vector norms: `|a - n| / max(|a|, |n|)`. Also returns the worst
/// per-component ratio, which near-zero components inflate to the
/// difference quotient's round-off.
fn gradient_gap(model: &PerceptionModel, batch: &[(&[f64], LabelId)]) -> (f64, f64) {
    let (_, grad) = model.loss_and_gradient(batch).unwrap();
    let analytic: Vec<f64> = grad.weights.iter().chain(&grad.bias).copied().collect();
    let numeric: Vec<f64> = (0..analytic.len())
        .map(|i| {
            let loss_at = |delta: f64| {
                let mut m = model.clone();
                *m.parameters_mut().nth(i).unwrap() += delta;
                m.loss_and_gradient(batch).unwrap().0
            };
            (loss_at(FD_STEP) - loss_at(-FD_STEP)) / (2.0 * FD_STEP)
        })
        .collect();
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut analytic.iter().zip(&numeric).map(|(a, n)| a - n));
    let scale = norm(&mut analytic.iter().copied()).max(norm(&mut numeric.iter().copied()));
    let component = analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
        .fold(0.0, f64::max);
    (diff / scale, component)
}

fn numerical_soundness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (mut worst, mut worst_component) = (0.0f64, 0.0f64);
    for _ in 0..FD_INSTANCES {
        let classes = rng.random_range(2..8);
        let dim = rng.random_range(1..10);
        let model = PerceptionModel::random(classes, dim, 1.0, &mut rng);
        let xs: Vec<(Vec<f64>, LabelId)> = (0..rng.random_range(1..6))
            .map(|_| ((0..dim).map(|_| rng.random_range(-3.0..3.0)).collect(), rng.random_range(0..classes)))
            .collect();
        let batch: Vec<(&[f64], LabelId)> = xs.iter().map(|(x, l)| (x.as_slice(), *l)).collect();
        let (gap, component) = gradient_gap(&model, &batch);
        worst = worst.max(gap);
        worst_component = worst_component.max(component);
    }
    let run = decimal_run(Method::Cabl, 0, ITERATIONS, 1);
    verdict(
        worst < FD_TOLERANCE && run.normalization_violations == 0,
        format!(
            "max relative gradient gap {worst:.2e} over {FD_INSTANCES} instances (worst single component {worst_component:.2e}); {} normalization violations in a {ITERATIONS}-step d=1 run",
            run.normalization_violations
        ),
    )
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let invocations: [&[&str]; 2] = [
        &["--task", "addition", "--base", "10", "--digits", "2", "--method", "cabl", "--iters", "500", "--seed", "3"],
        &["--task", "chess", "--method", "abl", "--iters", "200", "--seed", "8"],
    ];
    let mut identical = 0;
    for (i, flags) in invocations.iter().enumerate() {
        let metrics: Vec<Vec<u8>> = (0..2)
            .map(|k| {
                let out_dir = dir.path().join(format!("run{i}_{k}"));
                let mut args = vec!["train", "--out", out_dir.to_str().unwrap()];
                args.extend_from_slice(flags);
                assert!(cabl(&args).status.success());
                fs::read(out_dir.join("metrics.csv")).unwrap()
            })
            .collect();
        identical += usize::from(metrics[0] == metrics[1]);
    }
    verdict(
        identical == invocations.len(),
        format!("{identical}/{} repeated invocations byte-identical", invocations.len()),
    )
}

fn main() -> ExitCode {
    let mut bounds = BoundLedger::default();
    let mut results: Vec<(&str, Verdict)> = Vec::new();
    let mut report = |n: usize, name: &'static str, v: Verdict| {
        println!("criterion {n:>2} [{}] {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        results.push((name, v));
    };

    report(1, "abduction-space exactness", exactness(&mut bounds));
    report(2, "space size bound", bound_everywhere(&mut bounds));
    report(3, "sub-base entailment equivalence", equivalence());
    report(4, "partition fixture", partition_fixture());
    report(5, "abduction-space trend", space_trend());

    let start = Instant::now();
    let runs: Vec<(RunReport, RunReport)> = SEEDS
        .iter()
        .map(|&s| (decimal_run(Method::Cabl, s, ITERATIONS, 2), decimal_run(Method::Abl, s, ITERATIONS, 2)))
        .collect();
    report(6, "desk-scale convergence", convergence(&runs, start.elapsed()));
    report(7, "phase smoothness", smoothness(&runs));
    report(8, "partition cost", partition_cost());
    report(9, "numerical soundness", numerical_soundness());
    report(10, "determinism", determinism());

    let failed = results.iter().filter(|(_, v)| !v.pass).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
