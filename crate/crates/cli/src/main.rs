//! Command-line driver: run the incremental engine, inspect plans, run the
//! brute-force reference, generate queries, or cross-check the two engines.

use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use tcmatch_core::engine::{EngineState, FlatEngine, QueryPlan};
use tcmatch_core::io::{self, RunMetrics, TimingMode};
use tcmatch_core::model::{LabelInterner, QueryGraph, SlidingWindow, StreamEdge};
use tcmatch_core::oracle::{self, Snapshot};
use tcmatch_core::sched::{run_stream, RunConfig, RunSummary};

#[derive(Parser)]
#[command(
    name = "tcmatch",
    version,
    about = "Continuous time-constrained subgraph matching over streaming graphs",
    after_help = "Environment:\n  \
        TCMATCH_CHECKS=1   enable the runtime invariant checker (threaded runs)\n  \
        TCMATCH_TRACE=FILE also write the lock access trace to FILE\n\n\
        Exit codes: 0 ok, 1 failure or check mismatch, 2 usage error."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Replay a stream against a query, printing one line per new match
    Run {
        stream: PathBuf,
        query: PathBuf,
        /// Window width in the stream's time units
        #[arg(long)]
        window: u64,
        /// Executor threads; 0 means the pure sequential path
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Write run metrics (key=value lines) here
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Store every partial match independently instead of in
        /// match-store trees (the uncompressed baseline; sequential only)
        #[arg(long)]
        flat: bool,
    },
    /// Compile a query and print its decomposition, join order, and cost
    Plan { query: PathBuf },
    /// Replay with the brute-force reference matcher, printing the full
    /// match set after every ingested edge
    Oracle {
        stream: PathBuf,
        query: PathBuf,
        #[arg(long)]
        window: u64,
    },
    /// Generate a query by random walk over a stream file
    Gen {
        stream: PathBuf,
        /// Number of query edges
        #[arg(long)]
        size: usize,
        /// Timing order: full, empty, or random
        #[arg(long)]
        mode: TimingMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output path (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay with both the engine and the reference, comparing the match
    /// set after every edge; exits 1 on the first divergence
    Check {
        stream: PathBuf,
        query: PathBuf,
        #[arg(long)]
        window: u64,
    },
}

fn load(
    stream: &PathBuf,
    query: &PathBuf,
) -> Result<(Vec<StreamEdge>, QueryGraph, LabelInterner)> {
    let mut labels = LabelInterner::new();
    let edges = io::read_stream(stream, &mut labels)
        .with_context(|| format!("reading stream {}", stream.display()))?;
    let q = io::read_query(query, &mut labels)
        .with_context(|| format!("reading query {}", query.display()))?;
    Ok((edges, q, labels))
}

fn env_run_config(threads: usize) -> RunConfig {
    let checks = std::env::var("TCMATCH_CHECKS").is_ok_and(|v| v == "1");
    let trace = std::env::var("TCMATCH_TRACE").is_ok();
    RunConfig {
        executors: threads,
        checks: checks || trace,
        trace,
    }
}

fn write_trace(summary: &RunSummary) -> Result<()> {
    if let (Ok(path), Some(trace)) = (std::env::var("TCMATCH_TRACE"), &summary.trace) {
        let mut f = std::fs::File::create(&path)
            .with_context(|| format!("creating trace file {}", path))?;
        for line in trace {
            writeln!(f, "{}", line)?;
        }
    }
    Ok(())
}

fn cmd_run(
    stream: PathBuf,
    query: PathBuf,
    window: u64,
    threads: usize,
    metrics: Option<PathBuf>,
    flat: bool,
) -> Result<()> {
    let (edges, q, _) = load(&stream, &query)?;
    let plan = Arc::new(QueryPlan::compile(q)?);
    if flat {
        if threads > 0 {
            eprintln!("error: --flat supports only --threads 0");
            std::process::exit(2);
        }
        return run_flat(plan, &edges, window, metrics);
    }
    let engine = Arc::new(EngineState::new(Arc::clone(&plan)));
    let cfg = env_run_config(threads);
    let plan_for_sink = Arc::clone(&plan);
    // println! holds the stdout lock for the whole line, so concurrent
    // executors cannot interleave within one report.
    let sink = Arc::new(move |r: &tcmatch_core::engine::MatchReport| {
        println!("{}", r.format(&plan_for_sink));
    });
    let summary = run_stream(&engine, window, edges, &cfg, sink)?;
    write_trace(&summary)?;
    if let Some(c) = &summary.checker {
        eprintln!(
            "checker: {} wait-list order violations, max {} locks held per transaction",
            c.order_violations, c.max_held_per_txn
        );
    }
    if let Some(path) = metrics {
        RunMetrics::from_summary(&summary)
            .write(&path)
            .with_context(|| format!("writing metrics {}", path.display()))?;
    }
    Ok(())
}

fn run_flat(
    plan: Arc<QueryPlan>,
    edges: &[StreamEdge],
    window: u64,
    metrics: Option<PathBuf>,
) -> Result<()> {
    let start = std::time::Instant::now();
    let mut engine = FlatEngine::new(Arc::clone(&plan));
    let mut w = SlidingWindow::new(window);
    let mut m = RunMetrics::default();
    let mut out = std::io::stdout().lock();
    for &e in edges {
        for ex in w.expire(e.timestamp)? {
            engine.on_expire(ex);
        }
        let reports = engine.on_insert(e);
        m.edges_ingested += 1;
        m.reports_emitted += reports.len() as u64;
        for r in &reports {
            writeln!(out, "{}", r.format(&plan))?;
        }
        w.push(e)?;
        m.peak_msnode_count = m.peak_msnode_count.max(engine.stored_edge_count());
    }
    m.peak_partial_matches = m.peak_msnode_count;
    m.throughput = m.edges_ingested as f64 / start.elapsed().as_secs_f64().max(1e-9);
    if let Some(path) = metrics {
        m.write(&path)
            .with_context(|| format!("writing metrics {}", path.display()))?;
    }
    Ok(())
}

fn cmd_plan(query: PathBuf) -> Result<()> {
    let mut labels = LabelInterner::new();
    let q = io::read_query(&query, &mut labels)
        .with_context(|| format!("reading query {}", query.display()))?;
    let plan = QueryPlan::compile(q)?;
    print!("{}", plan.describe());
    Ok(())
}

fn cmd_oracle(stream: PathBuf, query: PathBuf, window: u64) -> Result<()> {
    let (edges, q, _) = load(&stream, &query)?;
    let plan = QueryPlan::compile(q)?;
    let mut w = SlidingWindow::new(window);
    let mut out = std::io::stdout().lock();
    for e in edges {
        w.expire(e.timestamp)?;
        w.push(e)?;
        let snap = Snapshot::new(w.live_edges().copied().collect())?;
        for m in oracle::snapshot_matches(plan.query(), plan.closure(), &snap)? {
            let report = tcmatch_core::engine::MatchReport {
                assignment: m,
                detected_at: (e.timestamp, e.seq),
            };
            writeln!(out, "{}", report.format(&plan))?;
        }
    }
    Ok(())
}

fn cmd_gen(
    stream: PathBuf,
    size: usize,
    mode: TimingMode,
    seed: u64,
    out: Option<PathBuf>,
) -> Result<()> {
    let mut labels = LabelInterner::new();
    let edges = io::read_stream(&stream, &mut labels)
        .with_context(|| format!("reading stream {}", stream.display()))?;
    let q = io::generate_query(&edges, size, mode, seed)?;
    let text = io::serialize_query(&q, &labels);
    match out {
        Some(path) => std::fs::write(&path, text)
            .with_context(|| format!("writing query {}", path.display()))?,
        None => print!("{}", text),
    }
    Ok(())
}

fn cmd_check(stream: PathBuf, query: PathBuf, window: u64) -> Result<()> {
    let (edges, q, _) = load(&stream, &query)?;
    let plan = Arc::new(QueryPlan::compile(q)?);
    let out = io::differential_run(&plan, &edges, window)?;
    match out.mismatch {
        None => {
            println!(
                "check: OK ({} edges, {} reports, window {})",
                out.steps,
                out.reports.len(),
                window
            );
            Ok(())
        }
        Some(mm) => {
            eprintln!(
                "check: MISMATCH at t={} seq={}: engine has {} matches, reference has {}",
                mm.at_time,
                mm.at_seq,
                mm.engine.len(),
                mm.reference.len()
            );
            std::process::exit(1);
        }
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Run {
            stream,
            query,
            window,
            threads,
            metrics,
            flat,
        } => cmd_run(stream, query, window, threads, metrics, flat),
        Cmd::Plan { query } => cmd_plan(query),
        Cmd::Oracle {
            stream,
            query,
            window,
        } => cmd_oracle(stream, query, window),
        Cmd::Gen {
            stream,
            size,
            mode,
            seed,
            out,
        } => cmd_gen(stream, size, mode, seed, out),
        Cmd::Check {
            stream,
            query,
            window,
        } => cmd_check(stream, query, window),
    }
}
