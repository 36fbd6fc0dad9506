mod catalog;
mod config;
mod report;
mod run;

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use config::{Command, ExperimentConfig};
use report::{Provenance, Report, EXIT_ASSERTION, EXIT_CAP, EXIT_OK, EXIT_SCHEMA};
use run::Row;

#[derive(Parser)]
#[command(name = "meandim", version, about = "Mean-dimension and entropy experiments for Z^k actions")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// JSON experiment config.
    #[arg(long, conflicts_with = "example")]
    config: Option<PathBuf>,
    /// Name of a bundled config (see list-examples).
    #[arg(long)]
    example: Option<String>,
    /// Directory for `<name>.csv` and `<name>.json`; the CSV goes to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Subcommand)]
enum Sub {
    /// Scale entropy tables and topological entropy brackets.
    Entropy(RunArgs),
    /// Mean-dimension lower bounds from embeddings.
    Mdim(RunArgs),
    /// Metric mean dimension from scale-entropy slopes.
    MetricMdim(RunArgs),
    /// Directional mean dimension along a line in Z^2.
    Directional(RunArgs),
    /// Metrization of quasi-metrics.
    Frink(RunArgs),
    /// Expansivity certificates and moduli.
    Expansive(RunArgs),
    /// Coding constants, covering transfer and the upper bound.
    Coding(RunArgs),
    /// Banach density of index sets.
    Density(RunArgs),
    /// Tower constructions.
    Tower(RunArgs),
    /// Runs every bundled config.
    CheckAll {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Lists bundled configs.
    ListExamples,
}

fn execute(mut cfg: ExperimentConfig, seed: Option<u64>, threads: usize) -> Report {
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(|| run::run(&cfg)));
    let wall_ms = start.elapsed().as_millis();
    let provenance = Provenance { seed: cfg.seed, threads, caps: cfg.task.caps.clone(), wall_ms, version: env!("CARGO_PKG_VERSION") };
    let mut rep = Report {
        name: cfg.name.clone(),
        anchor: cfg.anchor.clone(),
        command: cfg.command.as_str().into(),
        config: cfg.clone(),
        rows: Vec::new(),
        passed: false,
        exit_code: EXIT_ASSERTION,
        failures: Vec::new(),
        error: None,
        details: Default::default(),
        provenance,
    };
    match result {
        Ok(Ok(out)) => {
            rep.passed = out.failures.is_empty();
            rep.exit_code = if rep.passed { EXIT_OK } else { EXIT_ASSERTION };
            rep.rows = out.rows;
            rep.failures = out.failures;
            rep.details = out.details;
        }
        Ok(Err(e)) => {
            rep.exit_code = report::exit_code_for(&e);
            rep.failures.push(e.to_string());
            rep.error = Some(report::error_info(&e));
        }
        Err(p) => {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default();
            rep.failures.push(format!("internal panic: {msg}"));
            rep.error = Some(report::ErrorInfo { kind: "Panic".into(), message: msg, triple: None });
        }
    }
    rep
}

fn load(args: &RunArgs, expected: Command) -> Result<ExperimentConfig, String> {
    let text = match (&args.config, &args.example) {
        (Some(p), None) => std::fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display()))?,
        (None, Some(n)) => catalog::lookup(n).ok_or_else(|| format!("no bundled config named {n:?}"))?.to_string(),
        _ => return Err("give --config <path> or --example <name>".into()),
    };
    let cfg = config::parse(&text)?;
    if cfg.command != expected {
        return Err(format!("config is for `{}`, not `{}`", cfg.command.as_str(), expected.as_str()));
    }
    Ok(cfg)
}

fn summary_line(rep: &Report) -> String {
    if rep.passed {
        format!("PASS {} ({})", rep.name, rep.command)
    } else {
        format!("FAIL {} ({}): {}", rep.name, rep.command, rep.failures.join("; "))
    }
}

fn emit(rep: &Report, out: &Option<PathBuf>) -> Result<(), String> {
    match out {
        Some(dir) => report::write_outputs(dir, rep).map_err(|e| e.to_string()),
        None => {
            let bytes = report::csv_bytes(&rep.rows).map_err(|e| e.to_string())?;
            std::io::stdout().write_all(&bytes).map_err(|e| e.to_string())
        }
    }
}

fn single(args: RunArgs, cmd: Command) -> u8 {
    let cfg = match load(&args, cmd) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return EXIT_SCHEMA;
        }
    };
    let rep = execute(cfg, args.seed, args.threads.max(1));
    if let Err(e) = emit(&rep, &args.out) {
        eprintln!("cannot write outputs: {e}");
        return EXIT_SCHEMA;
    }
    eprintln!("{}", summary_line(&rep));
    rep.exit_code
}

fn check_all(out: Option<PathBuf>, seed: Option<u64>, threads: usize) -> u8 {
    let mut configs = Vec::new();
    for (name, text) in catalog::CATALOG {
        match config::parse(text) {
            Ok(c) => configs.push(c),
            Err(e) => {
                eprintln!("bundled config {name} is invalid: {e}");
                return EXIT_SCHEMA;
            }
        }
    }
    let slots: Vec<Mutex<Option<Report>>> = configs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..threads.clamp(1, configs.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= configs.len() {
                    break;
                }
                let rep = execute(configs[i].clone(), seed, threads);
                *slots[i].lock().unwrap() = Some(rep);
            });
        }
    });
    let reports: Vec<Report> = slots.into_iter().map(|m| m.into_inner().unwrap().expect("every config ran")).collect();
    let mut rows = Vec::new();
    let mut worst = EXIT_OK;
    for rep in &reports {
        eprintln!("{}", summary_line(rep));
        let (lb, ub) = rep.rows.iter().find(|r| r.quantity == "headline").map_or((f64::NAN, f64::NAN), |r| (r.lb, r.ub));
        rows.push(Row { quantity: rep.name.clone(), grid: rep.command.clone(), lb, ub, verdict: if rep.passed { "pass".into() } else { format!("fail({})", rep.exit_code) } });
        let rank = |c: u8| match c {
            EXIT_OK => 0,
            EXIT_ASSERTION => 1,
            EXIT_CAP => 2,
            _ => 3,
        };
        if rank(rep.exit_code) > rank(worst) {
            worst = rep.exit_code;
        }
        if let Some(dir) = &out {
            if let Err(e) = report::write_outputs(dir, rep) {
                eprintln!("cannot write outputs: {e}");
                return EXIT_SCHEMA;
            }
        }
    }
    let bytes = match report::csv_bytes(&rows) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_SCHEMA;
        }
    };
    let written = match &out {
        Some(dir) => std::fs::write(dir.join("check-all.csv"), &bytes),
        None => std::io::stdout().write_all(&bytes),
    };
    if let Err(e) = written {
        eprintln!("cannot write summary: {e}");
        return EXIT_SCHEMA;
    }
    let passed = reports.iter().filter(|r| r.passed).count();
    eprintln!("{passed}/{} bundled configs passed", reports.len());
    worst
}

fn list_examples() -> u8 {
    for (name, text) in catalog::CATALOG {
        match config::parse(text) {
            Ok(c) => println!("{name}\t{}\t{}", c.command.as_str(), c.anchor),
            Err(e) => println!("{name}\tinvalid\t{e}"),
        }
    }
    EXIT_OK
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Sub::Entropy(a) => single(a, Command::Entropy),
        Sub::Mdim(a) => single(a, Command::Mdim),
        Sub::MetricMdim(a) => single(a, Command::MetricMdim),
        Sub::Directional(a) => single(a, Command::Directional),
        Sub::Frink(a) => single(a, Command::Frink),
        Sub::Expansive(a) => single(a, Command::Expansive),
        Sub::Coding(a) => single(a, Command::Coding),
        Sub::Density(a) => single(a, Command::Density),
        Sub::Tower(a) => single(a, Command::Tower),
        Sub::CheckAll { out, seed, threads } => check_all(out, seed, threads),
        Sub::ListExamples => list_examples(),
    };
    ExitCode::from(code)
}
