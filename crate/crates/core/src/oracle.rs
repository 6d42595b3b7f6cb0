//! Brute-force per-snapshot reference matcher: full edge-at-a-time
//! backtracking over the window contents with vertex-injectivity pruning,
//! followed by a timing post-filter. Ground truth for the differential
//! tests; built for desk-scale inputs, not speed.


use thiserror::Error;

use crate::model::{
    timing_satisfied, PartialMatch, QueryGraph, StreamEdge, TimingClosure,
};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("snapshot has {0} edges, above the reference cap of {1}")]
    SnapshotTooLarge(usize, usize),
    #[error("query has {0} edges, above the reference cap of {1}")]
    QueryTooLarge(usize, usize),
    #[error("edge {0} is not in the snapshot")]
    UnknownEdge(u64),
}

pub const MAX_SNAPSHOT_EDGES: usize = 10_000;
pub const MAX_ORACLE_QUERY_EDGES: usize = 8;

/// The window contents at one instant.
pub struct Snapshot {
    edges: Vec<StreamEdge>,
}

impl Snapshot {
    pub fn new(edges: Vec<StreamEdge>) -> Result<Self, OracleError> {
        if edges.len() > MAX_SNAPSHOT_EDGES {
            return Err(OracleError::SnapshotTooLarge(edges.len(), MAX_SNAPSHOT_EDGES));
        }
        Ok(Snapshot { edges })
    }

    pub fn edges(&self) -> &[StreamEdge] {
        &self.edges
    }

    pub fn contains(&self, seq: u64) -> bool {
        self.edges.iter().any(|e| e.seq == seq)
    }
}

/// Candidate stream-edge indices per query edge, for a chosen subset of
/// query edges.
fn candidates(q: &QueryGraph, s: &Snapshot, subset: &[usize]) -> Vec<Vec<usize>> {
    subset
        .iter()
        .map(|&e| {
            (0..s.edges.len())
                .filter(|&x| crate::model::edge_matches(&s.edges[x], &q.edges()[e]))
                .collect()
        })
        .collect()
}

/// Static matching order: ascending candidate frequency, preferring edges
/// adjacent to already-placed ones so intermediate assignments stay
/// connected wherever the subset allows. Computed once per call; it never
/// depends on the assignment state.
fn matching_order(q: &QueryGraph, subset: &[usize], cands: &[Vec<usize>], seed: &PartialMatch) -> Vec<usize> {
    let mut placed_verts: Vec<usize> = Vec::new();
    let note_placed = |e: usize, pv: &mut Vec<usize>| {
        let qe = &q.edges()[e];
        for v in [qe.src, qe.dst] {
            if !pv.contains(&v) {
                pv.push(v);
            }
        }
    };
    let mut remaining: Vec<usize> = Vec::new();
    for (slot, &e) in subset.iter().enumerate() {
        if seed.get(e).is_some() {
            note_placed(e, &mut placed_verts);
        } else {
            remaining.push(slot);
        }
    }
    let mut order = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let adjacent = |slot: usize| {
            let qe = &q.edges()[subset[slot]];
            placed_verts.contains(&qe.src) || placed_verts.contains(&qe.dst)
        };
        let pick = remaining
            .iter()
            .enumerate()
            .min_by_key(|&(_, &slot)| (!(placed_verts.is_empty() || adjacent(slot)), cands[slot].len()))
            .map(|(pos, _)| pos)
            .expect("non-empty");
        let slot = remaining.remove(pick);
        note_placed(subset[slot], &mut placed_verts);
        order.push(slot);
    }
    order
}

struct Search<'a> {
    q: &'a QueryGraph,
    s: &'a Snapshot,
    subset: &'a [usize],
    cands: Vec<Vec<usize>>,
    order: Vec<usize>,
}

impl Search<'_> {
    /// Depth-first over the static order; `found` returns true to stop.
    fn run(&self, depth: usize, acc: &PartialMatch, found: &mut impl FnMut(PartialMatch) -> bool) -> bool {
        if depth == self.order.len() {
            return found(acc.clone());
        }
        // Seeded slots are excluded from the order, so this edge is free.
        let slot = self.order[depth];
        let e = self.subset[slot];
        for &x in &self.cands[slot] {
            if let Some(next) = acc.extend_structural(self.q, e, self.s.edges[x]) {
                if self.run(depth + 1, &next, found) {
                    return true;
                }
            }
        }
        false
    }
}

fn enumerate(
    q: &QueryGraph,
    s: &Snapshot,
    subset: &[usize],
    seed: PartialMatch,
    mut found: impl FnMut(PartialMatch) -> bool,
) {
    let cands = candidates(q, s, subset);
    let order = matching_order(q, subset, &cands, &seed);
    let search = Search {
        q,
        s,
        subset,
        cands,
        order,
    };
    search.run(0, &seed, &mut found);
}

/// Every full time-constrained match of the query on the snapshot.
pub fn snapshot_matches(
    q: &QueryGraph,
    tc: &TimingClosure,
    s: &Snapshot,
) -> Result<Vec<PartialMatch>, OracleError> {
    let subset: Vec<usize> = (0..q.edge_count()).collect();
    subquery_matches(q, tc, s, &subset)
}

/// Every time-constrained match of the subquery induced by `subset`
/// (dense edge indices), with assignments expressed in the full query's
/// indices. Timing pairs outside the subset are vacuous because only
/// assigned pairs are checked.
pub fn subquery_matches(
    q: &QueryGraph,
    tc: &TimingClosure,
    s: &Snapshot,
    subset: &[usize],
) -> Result<Vec<PartialMatch>, OracleError> {
    if q.edge_count() > MAX_ORACLE_QUERY_EDGES {
        return Err(OracleError::QueryTooLarge(
            q.edge_count(),
            MAX_ORACLE_QUERY_EDGES,
        ));
    }
    let mut out = Vec::new();
    enumerate(q, s, subset, PartialMatch::empty(q), |m| {
        if timing_satisfied(&m, tc) {
            out.push(m);
        }
        false
    });
    Ok(out)
}

/// True iff some match of the induced prerequisite subquery of `eps`
/// assigns `eps` to `sigma`. The subquery may be disconnected; components
/// are handled by the same backtracking with injectivity checks across
/// them.
pub fn preq_match_exists(
    sigma: &StreamEdge,
    eps: usize,
    s: &Snapshot,
    q: &QueryGraph,
    tc: &TimingClosure,
) -> Result<bool, OracleError> {
    if q.edge_count() > MAX_ORACLE_QUERY_EDGES {
        return Err(OracleError::QueryTooLarge(
            q.edge_count(),
            MAX_ORACLE_QUERY_EDGES,
        ));
    }
    if !s.contains(sigma.seq) {
        return Err(OracleError::UnknownEdge(sigma.seq));
    }
    let subset: Vec<usize> = tc.preq(eps).to_vec();
    let seed = match PartialMatch::empty(q).extend_structural(q, eps, *sigma) {
        Some(m) => m,
        None => return Ok(false),
    };
    let mut hit = false;
    enumerate(q, s, &subset, seed, |m| {
        if timing_satisfied(&m, tc) {
            hit = true;
            true // stop at the first witness
        } else {
            false
        }
    });
    Ok(hit)
}
