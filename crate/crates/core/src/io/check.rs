//! Differential replay: the incremental engine against the brute-force
//! reference at every ingestion step.

use std::sync::Arc;

use thiserror::Error;

use crate::engine::{EngineState, MatchReport, QueryPlan};
use crate::model::{ModelError, SlidingWindow, StreamEdge};
use crate::oracle::{self, OracleError, Snapshot};

#[derive(Debug, Error)]
pub enum CheckError {
    #[error(transparent)]
    Engine(#[from] crate::engine::EngineError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// First divergence found, if any.
#[derive(Debug)]
pub struct Mismatch {
    /// Seq of the edge whose ingestion exposed the divergence.
    pub at_seq: u64,
    pub at_time: i64,
    pub engine: Vec<Vec<(usize, u64)>>,
    pub reference: Vec<Vec<(usize, u64)>>,
}

#[derive(Debug)]
pub struct DiffOutcome {
    pub reports: Vec<MatchReport>,
    pub mismatch: Option<Mismatch>,
    pub steps: u64,
}

/// Replays the stream sequentially, comparing the engine's current matches
/// with the reference matcher's snapshot matches after every insertion.
/// Stops at the first mismatch.
pub fn differential_run(
    plan: &Arc<QueryPlan>,
    edges: &[StreamEdge],
    width: u64,
) -> Result<DiffOutcome, CheckError> {
    let engine = EngineState::new(Arc::clone(plan));
    let mut window = SlidingWindow::new(width);
    let mut reports = Vec::new();
    let mut steps = 0u64;
    for &edge in edges {
        for expired in window.expire(edge.timestamp)? {
            engine.on_expire(expired)?;
        }
        reports.extend(engine.on_insert(edge)?);
        window.push(edge)?;
        steps += 1;

        let mut got: Vec<Vec<(usize, u64)>> = engine
            .current_matches()?
            .iter()
            .map(|m| m.canonical_key())
            .collect();
        got.sort();
        let snap = Snapshot::new(window.live_edges().copied().collect())?;
        let mut want: Vec<Vec<(usize, u64)>> =
            oracle::snapshot_matches(plan.query(), plan.closure(), &snap)?
                .iter()
                .map(|m| m.canonical_key())
                .collect();
        want.sort();
        if got != want {
            return Ok(DiffOutcome {
                reports,
                mismatch: Some(Mismatch {
                    at_seq: edge.seq,
                    at_time: edge.timestamp,
                    engine: got,
                    reference: want,
                }),
                steps,
            });
        }
    }
    Ok(DiffOutcome {
        reports,
        mismatch: None,
        steps,
    })
}
