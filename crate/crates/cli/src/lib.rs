//! The `dlpar` command line: `learn`, `eval`, `stats`, `master`, `worker`.
//!
//! Exit codes: 0 success, 1 input error, 2 time budget exhausted, 3 cluster
//! failure.

pub mod report;

use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use dlpar_cluster::discovery::{DEFAULT_BROADCAST_PORT, DEFAULT_DATA_PORT};
use dlpar_cluster::{run_master, ClusterError, MasterConfig, Worker, WorkerConfig};
use dlpar_core::concept::{concept_length, parse_concept};
use dlpar_core::eval::evaluate;
use dlpar_core::kb::{parse_examples, parse_kb, KbError};
use dlpar_core::search::{SearchConfig, SearchOutcome, SearchStatus};
use dlpar_core::Dataset;
use serde::Serialize;

pub use report::RunReport;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 1;
pub const EXIT_BUDGET: u8 = 2;
pub const EXIT_CLUSTER: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "dlpar", version, about = "Parallel concept learner for description-logic knowledge bases")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn a class expression separating the examples.
    Learn {
        kb: PathBuf,
        examples: PathBuf,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Print the coverage of one class expression.
    Eval {
        kb: PathBuf,
        examples: PathBuf,
        concept: String,
        #[arg(long)]
        json: bool,
    },
    /// Print dataset statistics.
    Stats {
        kb: PathBuf,
        examples: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Learn with remote workers.
    Master {
        kb: PathBuf,
        examples: PathBuf,
        #[command(flatten)]
        search: SearchArgs,
        #[command(flatten)]
        cluster: MasterArgs,
    },
    /// Serve a master.
    Worker {
        #[arg(long, default_value_t = DEFAULT_BROADCAST_PORT)]
        broadcast_port: u16,
        #[arg(long, default_value_t = DEFAULT_DATA_PORT)]
        port: u16,
        /// Address to bind both sockets to.
        #[arg(long, default_value = "0.0.0.0")]
        bind: IpAddr,
        /// Reported core count; defaults to the machine's.
        #[arg(long)]
        cores: Option<usize>,
        /// Exit after serving this many masters.
        #[arg(long)]
        sessions: Option<usize>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub threads: Option<usize>,
    /// Beam width; defaults to the thread count.
    #[arg(long)]
    pub beam: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub limit: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 10)]
    pub max_length: usize,
    #[arg(long)]
    pub max_millis: Option<u64>,
    #[arg(long, default_value_t = 1.0)]
    pub target_accuracy: f64,
    #[arg(long)]
    pub no_disjunction: bool,
    #[arg(long)]
    pub no_cardinality: bool,
    #[arg(long)]
    pub no_inverse: bool,
    #[arg(long)]
    pub json: bool,
    /// Accepted for compatibility; the search is deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl SearchArgs {
    pub fn to_config(&self) -> Result<SearchConfig, String> {
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(format!("--noise must be within [0, 1], got {}", self.noise));
        }
        if self.max_length == 0 {
            return Err("--max-length must be at least 1".into());
        }
        let defaults = SearchConfig::default();
        let threads = self.threads.unwrap_or(defaults.threads).max(1);
        Ok(SearchConfig {
            beam_width: self.beam.unwrap_or(threads).max(1),
            limit: self.limit.max(1),
            noise: self.noise,
            max_execution_millis: self.max_millis,
            max_length: self.max_length,
            target_accuracy: self.target_accuracy,
            threads,
            use_inverse_roles: !self.no_inverse,
            use_cardinality: !self.no_cardinality,
            use_disjunction: !self.no_disjunction,
            ..defaults
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct MasterArgs {
    #[arg(long, default_value_t = DEFAULT_BROADCAST_PORT)]
    pub broadcast_port: u16,
    /// Port advertised to workers.
    #[arg(long, default_value_t = DEFAULT_DATA_PORT)]
    pub port: u16,
    #[arg(long, default_value_t = 2000)]
    pub discovery_millis: u64,
    #[arg(long)]
    pub expect_workers: Option<usize>,
    #[arg(long)]
    pub with_local_worker: bool,
    /// Discovery destination (repeatable); defaults to the broadcast address.
    #[arg(long = "discover")]
    pub targets: Vec<SocketAddr>,
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn load(kb: &Path, examples: &Path) -> Result<Dataset, String> {
    let kb_text = read(kb)?;
    let ex_text = read(examples)?;
    let (symbols, base) = parse_kb(&kb_text).map_err(|e| format!("{}: {e}", kb.display()))?;
    let ex = parse_examples(&ex_text, &symbols).map_err(|e| format!("{}: {e}", examples.display()))?;
    Dataset::new(symbols, base, ex).map_err(|e: KbError| format!("{}: {e}", kb.display()))
}

fn status_code(outcome: &SearchOutcome) -> u8 {
    match outcome.status {
        SearchStatus::Budget => EXIT_BUDGET,
        SearchStatus::Solved | SearchStatus::Exhausted => EXIT_OK,
    }
}

fn print_report(report: &RunReport, json: bool, out: &mut dyn Write) -> std::io::Result<()> {
    if json {
        report.write_json(out)
    } else {
        report.write_text(out)
    }
}

#[derive(Debug, Serialize)]
struct EvalReport {
    concept: String,
    pos_covered: u32,
    neg_covered: u32,
    accuracy: f64,
    length: usize,
}

#[derive(Debug, Default, Serialize, PartialEq, Eq)]
pub struct StatsReport {
    pub classes: usize,
    pub roles: usize,
    pub numeric_roles: usize,
    pub boolean_roles: usize,
    pub string_roles: usize,
    pub individuals: usize,
    pub class_assertions: usize,
    pub role_assertions: usize,
    pub concrete_assertions: usize,
    pub positives: usize,
    pub negatives: usize,
}

/// Runs the command line; returns the process exit code.
pub fn run(args: &[String], out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    match execute(cli.command, out, err) {
        Ok(code) => code,
        Err((code, message)) => {
            let _ = writeln!(err, "error: {message}");
            code
        }
    }
}

type CmdResult = Result<u8, (u8, String)>;

fn input<T>(r: Result<T, String>) -> Result<T, (u8, String)> {
    r.map_err(|m| (EXIT_INPUT, m))
}

fn io(r: std::io::Result<()>) -> Result<(), (u8, String)> {
    r.map_err(|e| (EXIT_INPUT, format!("write failed: {e}")))
}

fn execute(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    match cmd {
        Command::Learn { kb, examples, search } => {
            let cfg = input(search.to_config())?;
            let ds = input(load(&kb, &examples))?;
            let outcome = ds.search(&cfg).map_err(|e| (EXIT_INPUT, e.to_string()))?;
            io(print_report(&RunReport::new(&outcome, &ds.symbols), search.json, out))?;
            Ok(status_code(&outcome))
        }
        Command::Eval {
            kb,
            examples,
            concept,
            json,
        } => {
            let ds = input(load(&kb, &examples))?;
            let c = parse_concept(&concept, &ds.symbols)
                .map_err(|e| (EXIT_INPUT, format!("cannot parse concept\n{}", e.caret(&concept))))?;
            let cov = evaluate(&c, &ds.kb, &ds.examples);
            let r = EvalReport {
                concept: dlpar_core::concept::render(&c, &ds.symbols).unwrap_or(concept),
                pos_covered: cov.pos_covered,
                neg_covered: cov.neg_covered,
                accuracy: cov.accuracy(&ds.examples),
                length: concept_length(&c),
            };
            if json {
                io(serde_json::to_writer(&mut *out, &r).map_err(std::io::Error::other))?;
                io(writeln!(out))?;
            } else {
                io(writeln!(
                    out,
                    "{}\npos={} neg={} acc={} len={}",
                    r.concept, r.pos_covered, r.neg_covered, r.accuracy, r.length
                ))?;
            }
            Ok(EXIT_OK)
        }
        Command::Stats { kb, examples, json } => {
            let text = input(read(&kb))?;
            let (symbols, base) = input(parse_kb(&text).map_err(|e| format!("{}: {e}", kb.display())))?;
            let mut s = StatsReport {
                classes: base.num_classes(),
                roles: base.num_roles(),
                numeric_roles: base.num_numeric_roles(),
                boolean_roles: base.num_boolean_roles(),
                string_roles: base.num_string_roles(),
                individuals: base.num_individuals(),
                class_assertions: base.class_assertion_count(),
                role_assertions: base.role_assertion_count(),
                concrete_assertions: base.concrete_assertion_count(),
                ..StatsReport::default()
            };
            if let Some(path) = examples {
                let ex_text = input(read(&path))?;
                let ex = input(parse_examples(&ex_text, &symbols).map_err(|e| format!("{}: {e}", path.display())))?;
                s.positives = ex.num_positives();
                s.negatives = ex.num_negatives();
            }
            if json {
                io(serde_json::to_writer(&mut *out, &s).map_err(std::io::Error::other))?;
                io(writeln!(out))?;
            } else {
                for (k, v) in [
                    ("classes", s.classes),
                    ("roles", s.roles),
                    ("numeric roles", s.numeric_roles),
                    ("boolean roles", s.boolean_roles),
                    ("string roles", s.string_roles),
                    ("individuals", s.individuals),
                    ("class assertions", s.class_assertions),
                    ("role assertions", s.role_assertions),
                    ("concrete assertions", s.concrete_assertions),
                    ("positives", s.positives),
                    ("negatives", s.negatives),
                ] {
                    io(writeln!(out, "{k:<20} {v}"))?;
                }
            }
            Ok(EXIT_OK)
        }
        Command::Master {
            kb,
            examples,
            search,
            cluster,
        } => {
            let cfg = input(search.to_config())?;
            let ds = input(load(&kb, &examples))?;
            let targets = if cluster.targets.is_empty() {
                vec![SocketAddr::from(([255, 255, 255, 255], cluster.broadcast_port))]
            } else {
                cluster.targets.clone()
            };
            let mcfg = MasterConfig {
                discovery_targets: targets,
                discovery_timeout: Duration::from_millis(cluster.discovery_millis),
                expect_workers: cluster.expect_workers,
                with_local_worker: cluster.with_local_worker,
                advertised_port: cluster.port,
                search: cfg,
                ..MasterConfig::default()
            };
            match run_master(&ds, &mcfg) {
                Ok(result) => {
                    for w in &result.warnings {
                        let _ = writeln!(err, "warning: {w}");
                    }
                    for w in &result.workers {
                        let _ = writeln!(
                            err,
                            "worker {} cores={} wn={} probe={}ms",
                            w.address, w.cores, w.wn, w.probe_millis
                        );
                    }
                    io(print_report(&RunReport::new(&result.outcome, &ds.symbols), search.json, out))?;
                    Ok(status_code(&result.outcome))
                }
                Err(ClusterError::AllWorkersLost { partial }) => {
                    io(print_report(&RunReport::new(&partial, &ds.symbols), search.json, out))?;
                    Err((EXIT_CLUSTER, "all workers lost; partial results above".into()))
                }
                Err(e) => Err((EXIT_CLUSTER, e.to_string())),
            }
        }
        Command::Worker {
            broadcast_port,
            port,
            bind,
            cores,
            sessions,
        } => {
            let wcfg = WorkerConfig {
                discovery_addr: Some(SocketAddr::new(bind, broadcast_port)),
                listen_addr: SocketAddr::new(bind, port),
                cores,
                io_timeout: None,
            };
            let worker = Worker::bind(&wcfg).map_err(|e| (EXIT_CLUSTER, e.to_string()))?;
            let _ = writeln!(
                err,
                "worker listening on {} (discovery on {}), {} cores",
                worker.tcp_addr().map(|a| a.to_string()).unwrap_or_default(),
                worker
                    .discovery_addr()
                    .map(|a| a.to_string())
                    .unwrap_or_default(),
                worker.cores()
            );
            worker
                .serve(sessions, |e| eprintln!("worker session failed: {e}"))
                .map_err(|e| (EXIT_CLUSTER, e.to_string()))?;
            Ok(EXIT_OK)
        }
    }
}
