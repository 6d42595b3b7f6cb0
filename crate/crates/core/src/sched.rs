//! Transaction scheduling: chronological wait-lists, shared/exclusive item
//! locks, and the stream runner.
//!
//! Streaming consistency requires that conflicting accesses to an
//! expansion-list item happen in the chronological order of the triggering
//! edges — stronger than serializability, which would accept any serial
//! order. The mechanism: a single dispatcher assigns every transaction a
//! monotone id in stream order and appends all of its lock requests to the
//! per-item wait-lists before the transaction starts, so every wait-list is
//! sorted by transaction id at all times. An executor may take an item lock
//! only when its request heads the wait-list and the item's current holders
//! are compatible, and it holds at most one item lock at a time, so
//! deadlock is impossible. There is no bypass of any kind: a shared request
//! behind an earlier exclusive one waits.
//!
//! Expiry transactions partially remove tree nodes level by level under
//! exclusive locks and reclaim them only after releasing their last lock.
//! By then every earlier transaction has finished with the affected trees
//! (its requests preceded ours in every shared wait-list), and later
//! transactions cannot see the unlinked nodes, so reclamation is safe.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::engine::{
    delete_script, insert_script, EngineState, ItemId, ListRef, LockMode, MatchReport, TxnScript,
};
use crate::model::{ModelError, SlidingWindow, StreamEdge};

#[derive(Debug, Error)]
pub enum SchedError {
    #[error(transparent)]
    Engine(#[from] crate::engine::EngineError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("released a lock that was not held")]
    NotHeld,
    #[error("executor failed: {0}")]
    Executor(String),
}

/// Transaction id; dispatch order equals chronological stream order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TxnId(pub u64);

struct ItemState {
    wait: VecDeque<(TxnId, LockMode)>,
    x_holder: Option<TxnId>,
    s_holders: Vec<TxnId>,
}

struct ItemLock {
    state: Mutex<ItemState>,
    cv: Condvar,
}

/// Test-mode observations: wait-list order violations and the maximum
/// number of item locks any transaction held at one instant.
#[derive(Debug, Clone, Copy, Default)]
pub struct CheckerReport {
    pub order_violations: usize,
    pub max_held_per_txn: usize,
}

struct Checks {
    held: Mutex<HashMap<u64, usize>>,
    order_violations: AtomicUsize,
    max_held: AtomicUsize,
    trace: Option<Mutex<Vec<String>>>,
}

/// Per-item FIFO lock table. The dispatcher enqueues, executors acquire in
/// their plan order and release after each elementary operation.
pub struct LockManager {
    items: Vec<ItemLock>,
    checks: Option<Checks>,
}

impl LockManager {
    pub fn new(n_items: usize, checks: bool, trace: bool) -> Self {
        LockManager {
            items: (0..n_items)
                .map(|_| ItemLock {
                    state: Mutex::new(ItemState {
                        wait: VecDeque::new(),
                        x_holder: None,
                        s_holders: Vec::new(),
                    }),
                    cv: Condvar::new(),
                })
                .collect(),
            checks: checks.then(|| Checks {
                held: Mutex::new(HashMap::new()),
                order_violations: AtomicUsize::new(0),
                max_held: AtomicUsize::new(0),
                trace: trace.then(|| Mutex::new(Vec::new())),
            }),
        }
    }

    /// Appends every lock request of a transaction, in plan order. Only the
    /// dispatcher calls this, in chronological transaction order, which is
    /// what keeps each wait-list sorted.
    pub fn enqueue_all(&self, txn: TxnId, requests: &[(ItemId, LockMode)]) {
        for &(item, mode) in requests {
            let mut st = self.items[item.0 as usize].state.lock().expect("lock poisoned");
            if let Some(checks) = &self.checks {
                if st.wait.back().is_some_and(|&(t, _)| t > txn) {
                    checks.order_violations.fetch_add(1, Ordering::Relaxed);
                }
            }
            st.wait.push_back((txn, mode));
        }
    }

    /// Blocks until the transaction's request heads the item's wait-list and
    /// the item's holders are compatible, then takes the lock.
    pub fn acquire(&self, item: ItemId, at: ListRef, txn: TxnId, mode: LockMode) {
        let it = &self.items[item.0 as usize];
        let mut st = it.state.lock().expect("lock poisoned");
        loop {
            let at_head = st.wait.front() == Some(&(txn, mode));
            let compatible = match mode {
                LockMode::Shared => st.x_holder.is_none(),
                LockMode::Exclusive => st.x_holder.is_none() && st.s_holders.is_empty(),
            };
            if at_head && compatible {
                st.wait.pop_front();
                match mode {
                    LockMode::Shared => st.s_holders.push(txn),
                    LockMode::Exclusive => st.x_holder = Some(txn),
                }
                // Popping the head can make the next request grantable right
                // away, but only a shared request behind a granted shared
                // one; anything behind an exclusive grant must wait for the
                // release anyway.
                let chain = mode == LockMode::Shared
                    && st.wait.front().is_some_and(|&(_, m)| m == LockMode::Shared);
                drop(st);
                if chain {
                    it.cv.notify_all();
                }
                break;
            }
            st = it.cv.wait(st).expect("lock poisoned");
        }
        if let Some(checks) = &self.checks {
            let mut held = checks.held.lock().expect("checks poisoned");
            let n = held.entry(txn.0).or_insert(0);
            *n += 1;
            let reached = *n;
            drop(held);
            checks.max_held.fetch_max(reached, Ordering::Relaxed);
            self.trace_line(checks, txn, at, mode, "acquire");
        }
    }

    /// Releases a held lock and wakes the item's waiters so the new head can
    /// re-check its grant condition.
    pub fn release(
        &self,
        item: ItemId,
        at: ListRef,
        txn: TxnId,
        mode: LockMode,
    ) -> Result<(), SchedError> {
        let it = &self.items[item.0 as usize];
        let mut st = it.state.lock().expect("lock poisoned");
        match mode {
            LockMode::Shared => {
                let pos = st
                    .s_holders
                    .iter()
                    .position(|&t| t == txn)
                    .ok_or(SchedError::NotHeld)?;
                st.s_holders.swap_remove(pos);
            }
            LockMode::Exclusive => {
                if st.x_holder != Some(txn) {
                    return Err(SchedError::NotHeld);
                }
                st.x_holder = None;
            }
        }
        drop(st);
        it.cv.notify_all();
        if let Some(checks) = &self.checks {
            let mut held = checks.held.lock().expect("checks poisoned");
            if let Some(n) = held.get_mut(&txn.0) {
                *n = n.saturating_sub(1);
            }
            drop(held);
            self.trace_line(checks, txn, at, mode, "release");
        }
        Ok(())
    }

    fn trace_line(&self, checks: &Checks, txn: TxnId, at: ListRef, mode: LockMode, what: &str) {
        if let Some(trace) = &checks.trace {
            let m = match mode {
                LockMode::Shared => "S",
                LockMode::Exclusive => "X",
            };
            trace
                .lock()
                .expect("trace poisoned")
                .push(format!("{}\t{}\t{}\t{}", txn.0, at, m, what));
        }
    }

    pub fn checker_report(&self) -> Option<CheckerReport> {
        self.checks.as_ref().map(|c| CheckerReport {
            order_violations: c.order_violations.load(Ordering::Relaxed),
            max_held_per_txn: c.max_held.load(Ordering::Relaxed),
        })
    }

    pub fn take_trace(&self) -> Option<Vec<String>> {
        self.checks
            .as_ref()
            .and_then(|c| c.trace.as_ref())
            .map(|t| std::mem::take(&mut *t.lock().expect("trace poisoned")))
    }
}

/// Where completed matches go. Concurrent executors emit in completion
/// order; tests compare multisets.
pub trait ReportSink: Send + Sync {
    fn emit(&self, report: &MatchReport);
}

/// Collects reports in emission order.
#[derive(Default)]
pub struct VecSink {
    inner: Mutex<Vec<MatchReport>>,
}

impl VecSink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn into_reports(self) -> Vec<MatchReport> {
        self.inner.into_inner().expect("sink poisoned")
    }
}

impl ReportSink for VecSink {
    fn emit(&self, report: &MatchReport) {
        self.inner.lock().expect("sink poisoned").push(report.clone());
    }
}

impl<F: Fn(&MatchReport) + Send + Sync> ReportSink for F {
    fn emit(&self, report: &MatchReport) {
        self(report)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunConfig {
    /// Executor threads; 0 runs the pure sequential path with no scheduler.
    pub executors: usize,
    /// Enables the global invariant checker.
    pub checks: bool,
    /// Records the access trace (implies nothing unless `checks` is set).
    pub trace: bool,
}

#[derive(Debug, Default)]
pub struct RunSummary {
    pub edges_ingested: u64,
    /// Edges that matched some query edge but produced no stored partial
    /// match anywhere (the prerequisite filter dropped everything).
    pub edges_discarded: u64,
    pub reports_emitted: u64,
    pub txns_dispatched: u64,
    pub peak_stored_matches: usize,
    pub peak_nodes: usize,
    pub elapsed: Duration,
    pub checker: Option<CheckerReport>,
    pub trace: Option<Vec<String>>,
}

struct SharedCounters {
    discarded: AtomicU64,
    reports: AtomicU64,
    peak_matches: AtomicUsize,
    peak_nodes: AtomicUsize,
}

impl SharedCounters {
    fn sample(&self, engine: &EngineState) {
        self.peak_matches
            .fetch_max(engine.stored_match_count(), Ordering::Relaxed);
        self.peak_nodes
            .fetch_max(engine.node_count(), Ordering::Relaxed);
    }
}

struct Job {
    txn: TxnId,
    script: TxnScript,
}

fn run_locked_script(
    engine: &EngineState,
    lm: &LockManager,
    job: &Job,
    sink: &dyn ReportSink,
    counters: &SharedCounters,
) -> Result<(), SchedError> {
    let mut scratch = crate::engine::TxnScratch::new(engine.plan());
    let mut failed: Option<SchedError> = None;
    for step in &job.script.steps {
        lm.acquire(step.item, step.at, job.txn, step.mode);
        if failed.is_none() {
            // A failure here still drains the remaining planned locks so no
            // later transaction waits forever behind this one's requests.
            if let Err(e) = engine.perform(step, &job.script.edge, &mut scratch) {
                failed = Some(e.into());
            }
        }
        lm.release(step.item, step.at, job.txn, step.mode)?;
    }
    if let Some(e) = failed {
        return Err(e);
    }
    engine.finalize(&mut scratch)?;
    if job.script.kind == crate::engine::TxnKind::Insert && scratch.reports.is_empty() {
        // Count filtered inserts: matched something, stored nothing.
        if !scratch.stored_any() {
            counters.discarded.fetch_add(1, Ordering::Relaxed);
        }
    }
    counters
        .reports
        .fetch_add(scratch.reports.len() as u64, Ordering::Relaxed);
    for r in &scratch.reports {
        sink.emit(r);
    }
    counters.sample(engine);
    Ok(())
}

/// Replays a stream against a compiled engine: expiries dispatch before the
/// insert carrying the same timestamp, and with `executors >= 1` every
/// transaction runs on a worker under the lock protocol. The report multiset
/// and detection times are identical to sequential chronological execution.
pub fn run_stream<I>(
    engine: &Arc<EngineState>,
    window_width: u64,
    edges: I,
    cfg: &RunConfig,
    sink: Arc<dyn ReportSink>,
) -> Result<RunSummary, SchedError>
where
    I: IntoIterator<Item = StreamEdge>,
{
    let start = Instant::now();
    let plan = Arc::clone(engine.plan());
    let mut window = SlidingWindow::new(window_width);
    let counters = Arc::new(SharedCounters {
        discarded: AtomicU64::new(0),
        reports: AtomicU64::new(0),
        peak_matches: AtomicUsize::new(0),
        peak_nodes: AtomicUsize::new(0),
    });
    let mut summary = RunSummary::default();

    if cfg.executors == 0 {
        for edge in edges {
            for expired in window.expire(edge.timestamp)? {
                if let Some(script) = delete_script(&plan, expired) {
                    summary.txns_dispatched += 1;
                    let scratch = engine.run_script(&script)?;
                    debug_assert!(scratch.reports.is_empty());
                    counters.sample(engine);
                }
            }
            summary.edges_ingested += 1;
            if let Some(script) = insert_script(&plan, edge) {
                summary.txns_dispatched += 1;
                let scratch = engine.run_script(&script)?;
                if scratch.reports.is_empty() && !scratch.stored_any() {
                    summary.edges_discarded += 1;
                }
                summary.reports_emitted += scratch.reports.len() as u64;
                for r in &scratch.reports {
                    sink.emit(r);
                }
                counters.sample(engine);
            }
            window.push(edge)?;
        }
        summary.peak_stored_matches = counters.peak_matches.load(Ordering::Relaxed);
        summary.peak_nodes = counters.peak_nodes.load(Ordering::Relaxed);
        summary.elapsed = start.elapsed();
        return Ok(summary);
    }

    let lm = Arc::new(LockManager::new(plan.items().len(), cfg.checks, cfg.trace));
    // Bounded so the dispatcher blocks instead of outrunning the pool
    // without limit, but deep enough that it is not the throttle.
    let (tx, rx) = crossbeam_channel::bounded::<Job>(cfg.executors * 32);
    let mut workers = Vec::with_capacity(cfg.executors);
    for _ in 0..cfg.executors {
        let rx = rx.clone();
        let engine = Arc::clone(engine);
        let lm = Arc::clone(&lm);
        let sink = Arc::clone(&sink);
        let counters = Arc::clone(&counters);
        workers.push(std::thread::spawn(move || -> Result<(), SchedError> {
            while let Ok(job) = rx.recv() {
                run_locked_script(&engine, &lm, &job, sink.as_ref(), &counters)?;
            }
            Ok(())
        }));
    }
    drop(rx);

    let mut next_txn = 0u64;
    let mut dispatch = |script: TxnScript, tx: &crossbeam_channel::Sender<Job>| {
        next_txn += 1;
        let txn = TxnId(next_txn);
        lm.enqueue_all(txn, &script.lock_requests());
        tx.send(Job { txn, script }).expect("workers alive");
    };
    let mut ingest_err: Option<SchedError> = None;
    for edge in edges {
        match window.expire(edge.timestamp) {
            Ok(expired) => {
                for ex in expired {
                    if let Some(script) = delete_script(&plan, ex) {
                        summary.txns_dispatched += 1;
                        dispatch(script, &tx);
                    }
                }
            }
            Err(e) => {
                ingest_err = Some(e.into());
                break;
            }
        }
        summary.edges_ingested += 1;
        if let Some(script) = insert_script(&plan, edge) {
            summary.txns_dispatched += 1;
            dispatch(script, &tx);
        }
        if let Err(e) = window.push(edge) {
            ingest_err = Some(e.into());
            break;
        }
    }
    drop(tx);
    for w in workers {
        match w.join() {
            Ok(Ok(())) => {}
            Ok(Err(e)) => return Err(e),
            Err(_) => return Err(SchedError::Executor("executor panicked".into())),
        }
    }
    if let Some(e) = ingest_err {
        return Err(e);
    }
    summary.edges_discarded = counters.discarded.load(Ordering::Relaxed);
    summary.reports_emitted = counters.reports.load(Ordering::Relaxed);
    summary.peak_stored_matches = counters.peak_matches.load(Ordering::Relaxed);
    summary.peak_nodes = counters.peak_nodes.load(Ordering::Relaxed);
    summary.elapsed = start.elapsed();
    summary.checker = lm.checker_report();
    summary.trace = lm.take_trace();
    Ok(summary)
}
