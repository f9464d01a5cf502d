//! Run directories: metrics and phase CSVs, config echo, summaries, and
//! comparison of several runs.

use std::fmt::{self, Write as _};
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::{parse_config, render_config, train_config_to_map, ConfigError};
use crate::trainer::{MetricsRecord, RunReport};

pub const METRICS_FILE: &str = "metrics.csv";
pub const PHASES_FILE: &str = "phases.csv";
pub const CONFIG_FILE: &str = "config.txt";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const TIMING_FILE: &str = "timing.txt";

pub const METRICS_COLUMNS: [&str; 7] = ["iteration", "phase", "seq_acc", "mean_acc", "space_mean", "skipped", "wall_ms"];
pub const PHASES_COLUMNS: [&str; 5] = ["phase", "start", "end", "forced", "concepts"];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("record {record}: {message}")]
    Format { record: u64, message: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("need at least 2 runs to compare, got {0}")]
    TooFewRuns(usize),
    #[error("runs use different tasks: {0} and {1}")]
    TaskMismatch(String, String),
    #[error("run {0} has no metrics records")]
    NoRecords(String),
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.to_owned(),
        source,
    }
}

/// Metrics of one run, as stored in `metrics.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsTable {
    pub labels: Vec<String>,
    pub records: Vec<MetricsRecord>,
}

pub fn metrics_header(labels: &[String]) -> Vec<String> {
    METRICS_COLUMNS
        .iter()
        .map(|c| c.to_string())
        .chain(labels.iter().map(|l| format!("acc_{l}")))
        .collect()
}

pub fn write_metrics(table: &MetricsTable, out: impl Write) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(metrics_header(&table.labels))?;
    for r in &table.records {
        let mut row = vec![
            r.iteration.to_string(),
            r.phase.to_string(),
            format!("{:.6}", r.seq_acc),
            format!("{:.6}", r.mean_acc),
            format!("{:.6}", r.space_mean),
            r.skipped.to_string(),
            r.wall_ms.to_string(),
        ];
        row.extend(r.per_label.iter().map(|a| format!("{a:.6}")));
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads `metrics.csv`; iterations must strictly increase.
pub fn read_metrics(input: impl Read) -> Result<MetricsTable, ReportError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    let fixed_ok = header.len() >= METRICS_COLUMNS.len() && header.iter().zip(METRICS_COLUMNS).all(|(a, b)| a == b);
    let labels: Option<Vec<String>> = header
        .iter()
        .skip(METRICS_COLUMNS.len())
        .map(|c| c.strip_prefix("acc_").filter(|l| !l.is_empty()).map(str::to_owned))
        .collect();
    let labels = match (fixed_ok, labels) {
        (true, Some(l)) if !l.is_empty() => l,
        _ => {
            return Err(ReportError::Format {
                record: 0,
                message: format!("expected header {},acc_<label>...", METRICS_COLUMNS.join(",")),
            })
        }
    };
    let mut records: Vec<MetricsRecord> = Vec::new();
    for (i, row) in r.records().enumerate() {
        let row = row?;
        let n = i as u64 + 1;
        let bad = |what: &str| ReportError::Format {
            record: n,
            message: format!("bad {what}"),
        };
        if row.len() != header.len() {
            return Err(bad("column count"));
        }
        let int = |k: usize| row[k].parse::<usize>().map_err(|_| bad(METRICS_COLUMNS[k]));
        let real = |k: usize| {
            row[k]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(header.get(k).unwrap_or("value")))
        };
        let record = MetricsRecord {
            iteration: int(0)?,
            phase: int(1)?,
            seq_acc: real(2)?,
            mean_acc: real(3)?,
            space_mean: real(4)?,
            skipped: int(5)?,
            wall_ms: row[6].parse().map_err(|_| bad("wall_ms"))?,
            per_label: (METRICS_COLUMNS.len()..row.len()).map(real).collect::<Result<_, _>>()?,
        };
        if records.last().is_some_and(|p| p.iteration >= record.iteration) {
            return Err(bad("iteration order"));
        }
        records.push(record);
    }
    Ok(MetricsTable { labels, records })
}

/// One phase as it actually ran.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhaseRow {
    pub phase: usize,
    pub start: usize,
    pub end: usize,
    pub forced: bool,
    pub concepts: Vec<String>,
}

pub fn phase_rows(report: &RunReport) -> Vec<PhaseRow> {
    let mut start = 0;
    report
        .phase_concepts
        .iter()
        .enumerate()
        .map(|(p, concepts)| {
            let leave = report.transitions.get(p);
            let row = PhaseRow {
                phase: p + 1,
                start,
                end: leave.map_or(report.config.max_iterations, |t| t.iteration),
                forced: leave.is_some_and(|t| t.forced),
                concepts: concepts.iter().map(|&l| report.label_names[l].clone()).collect(),
            };
            start = row.end;
            row
        })
        .collect()
}

pub fn write_phases(rows: &[PhaseRow], out: impl Write) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PHASES_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.phase.to_string(),
            r.start.to_string(),
            r.end.to_string(),
            r.forced.to_string(),
            r.concepts.join(" "),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_phases(input: impl Read) -> Result<Vec<PhaseRow>, ReportError> {
    let mut r = csv::Reader::from_reader(input);
    if r.headers()?.iter().ne(PHASES_COLUMNS) {
        return Err(ReportError::Format {
            record: 0,
            message: format!("expected header {}", PHASES_COLUMNS.join(",")),
        });
    }
    r.records()
        .enumerate()
        .map(|(i, row)| {
            let row = row?;
            let bad = || ReportError::Format {
                record: i as u64 + 1,
                message: "bad phase row".into(),
            };
            if row.len() != PHASES_COLUMNS.len() {
                return Err(bad());
            }
            Ok(PhaseRow {
                phase: row[0].parse().map_err(|_| bad())?,
                start: row[1].parse().map_err(|_| bad())?,
                end: row[2].parse().map_err(|_| bad())?,
                forced: row[3].parse().map_err(|_| bad())?,
                concepts: row[4].split_whitespace().map(str::to_owned).collect(),
            })
        })
        .collect()
}

/// First recorded iteration whose mean accuracy reaches `fraction` of the
/// run's final mean accuracy.
pub fn iterations_to(records: &[MetricsRecord], fraction: f64) -> Option<usize> {
    let last = records.last()?;
    let goal = fraction * last.mean_acc;
    records.iter().find(|r| r.mean_acc >= goal).map(|r| r.iteration)
}

pub fn summary_text(report: &RunReport) -> String {
    let last = report.last();
    let mut s = String::new();
    let _ = writeln!(s, "task: {}", report.config.task);
    let _ = writeln!(s, "method: {}", report.config.method);
    let _ = writeln!(s, "seed: {}", report.config.seed);
    let _ = writeln!(s, "iterations: {}", last.iteration);
    for row in phase_rows(report) {
        let _ = writeln!(
            s,
            "phase {}: +{{{}}} iterations {}..{}{}",
            row.phase,
            row.concepts.join(", "),
            row.start,
            row.end,
            if row.forced { " (forced)" } else { "" }
        );
    }
    let _ = writeln!(s, "final mean concept accuracy: {:.4}", last.mean_acc);
    let _ = writeln!(s, "final sequence accuracy: {:.4}", last.seq_acc);
    if let Some(t) = iterations_to(&report.records, 0.9) {
        let _ = writeln!(s, "iterations to 90% of final: {t}");
    }
    let _ = writeln!(s, "skipped examples: {}", report.skipped);
    let _ = writeln!(s, "normalization violations: {}", report.normalization_violations);
    for (name, acc) in report.label_names.iter().zip(&report.final_accuracy) {
        let _ = writeln!(s, "  {name}: {acc:.4}");
    }
    s
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ReportError> {
    fs::write(path, bytes).map_err(io_error(path))
}

/// Writes every run file into `dir`, creating it if needed. `timing` goes to
/// its own file so the other files stay reproducible.
pub fn save_run(dir: &Path, report: &RunReport, timing: &str) -> Result<(), ReportError> {
    fs::create_dir_all(dir).map_err(io_error(dir))?;
    write_file(&dir.join(CONFIG_FILE), render_config(&train_config_to_map(&report.config)).as_bytes())?;
    let mut metrics = Vec::new();
    let table = MetricsTable {
        labels: report.label_names.clone(),
        records: report.records.clone(),
    };
    write_metrics(&table, &mut metrics)?;
    write_file(&dir.join(METRICS_FILE), &metrics)?;
    let mut phases = Vec::new();
    write_phases(&phase_rows(report), &mut phases)?;
    write_file(&dir.join(PHASES_FILE), &phases)?;
    write_file(&dir.join(SUMMARY_FILE), summary_text(report).as_bytes())?;
    write_file(&dir.join(TIMING_FILE), timing.as_bytes())
}

/// What `compare` needs from a run directory.
#[derive(Clone, Debug, PartialEq)]
pub struct RunView {
    pub name: String,
    pub task: String,
    pub method: String,
    pub seed: String,
    pub metrics: MetricsTable,
    pub phases: Vec<PhaseRow>,
    /// Total wall time, when the run recorded one.
    pub wall_ms: Option<u64>,
}

pub fn load_run(dir: &Path) -> Result<RunView, ReportError> {
    let read = |name: &str| {
        let path = dir.join(name);
        fs::read_to_string(&path).map_err(io_error(&path))
    };
    let config = parse_config(&read(CONFIG_FILE)?)?;
    let get = |k: &str| config.get(k).cloned().unwrap_or_default();
    let task = match get("task").as_str() {
        "chess" => format!("chess(board={}, pieces={})", get("board"), get("pieces")),
        other => format!("{other}(base={}, digits={})", get("base"), get("digits")),
    };
    let metrics = read_metrics(read(METRICS_FILE)?.as_bytes())?;
    let phases = read_phases(read(PHASES_FILE)?.as_bytes())?;
    let wall_ms = read(TIMING_FILE).ok().and_then(|t| {
        t.lines()
            .find_map(|l| l.strip_prefix("total_ms="))
            .and_then(|v| v.trim().parse().ok())
    });
    Ok(RunView {
        name: dir.display().to_string(),
        task,
        method: get("method"),
        seed: get("seed"),
        metrics,
        phases,
        wall_ms,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub name: String,
    pub method: String,
    pub seed: String,
    pub final_mean_acc: f64,
    pub iters_to_90: usize,
    pub wall_ms: u64,
    /// Per phase: mean over its concepts of peak minus final accuracy.
    pub forgetting: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub task: String,
    pub rows: Vec<ComparisonRow>,
}

fn forgetting(run: &RunView) -> Vec<f64> {
    let labels = &run.metrics.labels;
    let records = &run.metrics.records;
    let last = records.last().expect("checked nonempty");
    let groups: Vec<Vec<usize>> = if run.phases.is_empty() {
        vec![(0..labels.len()).collect()]
    } else {
        run.phases
            .iter()
            .map(|p| p.concepts.iter().filter_map(|c| labels.iter().position(|l| l == c)).collect())
            .collect()
    };
    groups
        .iter()
        .map(|g| {
            if g.is_empty() {
                return 0.0;
            }
            let drop: f64 = g
                .iter()
                .map(|&l| {
                    let peak = records.iter().map(|r| r.per_label[l]).fold(f64::NEG_INFINITY, f64::max);
                    peak - last.per_label[l]
                })
                .sum();
            drop / g.len() as f64
        })
        .collect()
}

pub fn compare_runs(runs: &[RunView]) -> Result<Comparison, ReportError> {
    if runs.len() < 2 {
        return Err(ReportError::TooFewRuns(runs.len()));
    }
    if let Some(other) = runs.iter().find(|r| r.task != runs[0].task) {
        return Err(ReportError::TaskMismatch(runs[0].task.clone(), other.task.clone()));
    }
    let rows = runs
        .iter()
        .map(|run| {
            let records = &run.metrics.records;
            let last = records.last().ok_or_else(|| ReportError::NoRecords(run.name.clone()))?;
            Ok(ComparisonRow {
                name: run.name.clone(),
                method: run.method.clone(),
                seed: run.seed.clone(),
                final_mean_acc: last.mean_acc,
                iters_to_90: iterations_to(records, 0.9).unwrap_or(last.iteration),
                wall_ms: run.wall_ms.unwrap_or(last.wall_ms),
                forgetting: forgetting(run),
            })
        })
        .collect::<Result<_, ReportError>>()?;
    Ok(Comparison {
        task: runs[0].task.clone(),
        rows,
    })
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "task: {}", self.task)?;
        writeln!(f, "run\tmethod\tseed\tfinal_acc\titers_to_90\twall_ms\tforgetting")?;
        for r in &self.rows {
            let forgetting: Vec<String> = r.forgetting.iter().map(|d| format!("{d:.4}")).collect();
            writeln!(
                f,
                "{}\t{}\t{}\t{:.4}\t{}\t{}\t{}",
                r.name,
                r.method,
                r.seed,
                r.final_mean_acc,
                r.iters_to_90,
                r.wall_ms,
                forgetting.join(" ")
            )?;
        }
        if let [a, b, ..] = self.rows.as_slice() {
            writeln!(
                f,
                "delta (second - first): final_acc {:+.4} iters_to_90 {:+}",
                b.final_mean_acc - a.final_mean_acc,
                b.iters_to_90 as i64 - a.iters_to_90 as i64
            )?;
        }
        Ok(())
    }
}
