//! `cabl`: partition knowledge bases, train C-ABL and ABL, and report.

use std::fs;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use cabl_core::abspace::{abspace_sweep, trend, write_abspace, AbspaceOptions};
use cabl_core::config::{parse_config, train_config_from_map, ConfigMap};
use cabl_core::entail::{entail_check, EntailOptions};
use cabl_core::logic::{parse_program, KnowledgeBase};
use cabl_core::partition::{build_dependency_graph, partition_timed};
use cabl_core::report::{compare_runs, load_run, save_run, summary_text};
use cabl_core::trainer::run_training;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "cabl", version, about = "Curriculum abductive learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Split a knowledge base into a curriculum of nested sub-bases.
    Partition {
        #[arg(long)]
        kb: PathBuf,
        /// Minimum number of new concepts per phase; omitted means one cluster per phase.
        #[arg(long)]
        tau: Option<usize>,
        /// Write the dependency graph, grouped by phase, in DOT format.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Train a perception model with abduction and write a run directory.
    Train(TrainArgs),
    /// Sweep abduction-space sizes over operand lengths.
    Abspace {
        #[arg(long, value_parser = ["addition"])]
        task: String,
        #[arg(long, default_value_t = 10)]
        base: u32,
        /// Operand lengths, `LO..HI` or a single value.
        #[arg(long, value_parser = parse_range)]
        digits: RangeInclusive<usize>,
        #[arg(long, default_value = "2", value_parser = parse_tau)]
        tau: Tau,
        #[arg(long)]
        out: PathBuf,
        /// Random targets per phase.
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Report the space of one fixed target instead of sampling.
        #[arg(long)]
        target: Option<i64>,
    },
    /// Check that consecutive sub-bases agree on sampled ground queries.
    EntailCheck {
        #[arg(long)]
        kb: PathBuf,
        /// A positive integer, or `none` for one cluster per phase.
        #[arg(long, value_parser = parse_tau)]
        tau: Tau,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        /// Constants per sampled world.
        #[arg(long, default_value_t = 4)]
        universe: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Tabulate two or more run directories side by side.
    Compare {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
    },
}

/// Every flag is optional here so a config file can supply it.
#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long, value_parser = ["addition", "chess"])]
    task: Option<String>,
    #[arg(long)]
    base: Option<u32>,
    #[arg(long)]
    digits: Option<usize>,
    #[arg(long)]
    board: Option<i64>,
    #[arg(long)]
    pieces: Option<usize>,
    #[arg(long, value_parser = ["cabl", "abl"])]
    method: Option<String>,
    /// A positive integer, or `none` for one cluster per phase.
    #[arg(long)]
    tau: Option<String>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Flat key=value file; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    gate_every: Option<usize>,
    #[arg(long)]
    max_phase_iters: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    train_size: Option<usize>,
    /// Record per-iteration wall time in the metrics (breaks byte-identical reruns).
    #[arg(long)]
    wall_time: bool,
}

impl TrainArgs {
    fn overrides(&self) -> ConfigMap {
        let mut map = ConfigMap::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                map.insert(k.to_owned(), v);
            }
        };
        put("task", self.task.clone());
        put("base", self.base.map(|v| v.to_string()));
        put("digits", self.digits.map(|v| v.to_string()));
        put("board", self.board.map(|v| v.to_string()));
        put("pieces", self.pieces.map(|v| v.to_string()));
        put("method", self.method.clone());
        put("tau", self.tau.clone());
        put("iters", self.iters.map(|v| v.to_string()));
        put("seed", self.seed.map(|v| v.to_string()));
        put("gate-every", self.gate_every.map(|v| v.to_string()));
        put("max-phase-iters", self.max_phase_iters.map(|v| v.to_string()));
        put("lr", self.lr.map(|v| v.to_string()));
        put("separation", self.separation.map(|v| v.to_string()));
        put("sigma", self.sigma.map(|v| v.to_string()));
        put("train-size", self.train_size.map(|v| v.to_string()));
        put("wall-time", self.wall_time.then(|| "true".to_owned()));
        map
    }
}

fn parse_range(s: &str) -> Result<RangeInclusive<usize>, String> {
    let bad = || format!("expected LO..HI or a single number, got {s:?}");
    let (lo, hi) = match s.split_once("..") {
        Some((lo, hi)) => (lo, hi.strip_prefix('=').unwrap_or(hi)),
        None => (s, s),
    };
    let lo: usize = lo.trim().parse().map_err(|_| bad())?;
    let hi: usize = hi.trim().parse().map_err(|_| bad())?;
    if lo == 0 || lo > hi {
        return Err(format!("empty or zero-based range {s:?}"));
    }
    Ok(lo..=hi)
}

/// A phase-size threshold where `none` disables merging.
#[derive(Clone, Copy, Debug)]
struct Tau(Option<usize>);

fn parse_tau(s: &str) -> Result<Tau, String> {
    match s {
        "none" => Ok(Tau(None)),
        _ => s.parse().map(|t| Tau(Some(t))).map_err(|_| format!("expected a number or `none`, got {s:?}")),
    }
}

/// Failures split by exit code: bad input is 2, anything that fails while running is 1.
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

type Outcome = Result<(), Failure>;

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

fn load_kb(path: &Path) -> Result<KnowledgeBase, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(usage)?;
    parse_program(&text)
        .with_context(|| format!("{}", path.display()))
        .map_err(usage)
}

fn cmd_partition(kb: &Path, tau: Option<usize>, dot: Option<&Path>) -> Outcome {
    let kb = load_kb(kb)?;
    let (curriculum, elapsed) = partition_timed(&kb, tau).map_err(usage)?;
    print!("{}", curriculum.summary(&kb));
    println!(
        "{} phases, {} rules, partitioned in {:.3} ms",
        curriculum.len(),
        kb.len(),
        elapsed.as_secs_f64() * 1e3
    );
    if let Some(path) = dot {
        let graph = build_dependency_graph(&kb);
        fs::write(path, curriculum.to_dot(&kb, &graph))
            .with_context(|| format!("writing {}", path.display()))
            .map_err(runtime)?;
    }
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> Outcome {
    let mut map = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(usage)?;
            parse_config(&text)
                .with_context(|| format!("{}", path.display()))
                .map_err(usage)?
        }
        None => ConfigMap::new(),
    };
    map.extend(args.overrides());
    let config = train_config_from_map(&map).map_err(usage)?;
    config.validate().map_err(usage)?;

    let start = Instant::now();
    let report = run_training(&config).map_err(runtime)?;
    let total_ms = start.elapsed().as_millis();
    let timing = format!("total_ms={total_ms}\n");
    save_run(&args.out, &report, &timing).map_err(runtime)?;
    print!("{}", summary_text(&report));
    println!("wrote {} in {total_ms} ms", args.out.display());
    Ok(())
}

fn cmd_abspace(opts: &AbspaceOptions, out: &Path) -> Outcome {
    let rows = abspace_sweep(opts).map_err(runtime)?;
    let file = fs::File::create(out)
        .with_context(|| format!("creating {}", out.display()))
        .map_err(runtime)?;
    write_abspace(&rows, file).map_err(runtime)?;
    for (d, full, worst) in trend(&rows) {
        println!("d={d}: full={full:.2} max_conditioned={worst:.2} ratio={:.6}", worst / full);
    }
    Ok(())
}

fn cmd_entail(kb: &Path, tau: Option<usize>, opts: &EntailOptions) -> Outcome {
    let kb = load_kb(kb)?;
    let report = entail_check(&kb, tau, opts).map_err(usage)?;
    print!("{report}");
    if report.passed() {
        Ok(())
    } else {
        Err(runtime(anyhow!("{} disagreements", report.disagreements())))
    }
}

fn cmd_compare(dirs: &[PathBuf]) -> Outcome {
    if dirs.len() < 2 {
        return Err(usage(anyhow!("compare needs at least 2 run directories")));
    }
    let runs = dirs
        .iter()
        .map(|d| load_run(d).with_context(|| format!("loading {}", d.display())))
        .collect::<Result<Vec<_>, _>>()
        .map_err(runtime)?;
    let table = compare_runs(&runs).map_err(runtime)?;
    print!("{table}");
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Partition { kb, tau, dot } => cmd_partition(&kb, tau, dot.as_deref()),
        Command::Train(args) => cmd_train(&args),
        Command::Abspace {
            task: _,
            base,
            digits,
            tau,
            out,
            samples,
            seed,
            target,
        } => {
            let opts = AbspaceOptions {
                tau: tau.0,
                samples,
                seed,
                target,
                ..AbspaceOptions::new(base, digits)
            };
            cmd_abspace(&opts, &out)
        }
        Command::EntailCheck {
            kb,
            tau,
            samples,
            universe,
            seed,
        } => {
            let opts = EntailOptions {
                samples,
                seed,
                constants: universe,
                ..EntailOptions::default()
            };
            cmd_entail(&kb, tau.0, &opts)
        }
        Command::Compare { dirs } => cmd_compare(&dirs),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
