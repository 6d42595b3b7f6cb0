//! Query compilation: timing-connected subquery enumeration, greedy
//! decomposition, joint-number join ordering, and the cost model.
//!
//! A timing-connected (TC) subquery is an edge sequence whose every prefix
//! is weakly connected and whose consecutive elements are ordered by the
//! timing closure. Such sequences can be maintained incrementally with one
//! join per arriving edge, so the planner covers the query with as few of
//! them as possible and then orders the cover for joining.

use std::collections::{HashSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::model::{QueryGraph, TimingClosure};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("TC-subquery enumeration exceeded the cap of {0} sequences")]
    EnumerationCap(usize),
    #[error("query has more than {0} edges")]
    TooManyEdges(usize),
    #[error("no prefix-connected permutation exists (query disconnected)")]
    NoPrefixConnectedOrder,
}

/// Edge sequence of a TC-subquery, as dense edge indices. Every prefix
/// induces a weakly connected subquery and consecutive elements satisfy
/// the timing closure.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TimingSequence(pub Vec<usize>);

impl TimingSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn edges(&self) -> &[usize] {
        &self.0
    }
}

/// Edge-disjoint cover of the query by TC-subqueries, in join order once
/// [`join_order`] has run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TcDecomposition {
    pub subqueries: Vec<TimingSequence>,
}

impl TcDecomposition {
    pub fn k(&self) -> usize {
        self.subqueries.len()
    }
}

/// Hard cap on the enumeration; the worst case is exponential in the edge
/// count and the source material never bounds it.
pub const DEFAULT_ENUMERATION_CAP: usize = 1_000_000;

/// Upper bound on query edges accepted by [`is_tc_query`]'s bitmask search.
pub const MAX_QUERY_EDGES: usize = 63;

/// Enumerates the timing sequences of every TC-subquery by dynamic
/// extension: a sequence ending in `e` grows by `x` iff `e` precedes `x` in
/// the closure and `x` shares a vertex with some earlier element. Different
/// extension paths can rebuild the same sequence, so results are deduped.
pub fn enumerate_tc_subqueries(
    q: &QueryGraph,
    tc: &TimingClosure,
    cap: usize,
) -> Result<Vec<TimingSequence>, AnalysisError> {
    let n = q.edge_count();
    let mut out: Vec<TimingSequence> = Vec::new();
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut queue: VecDeque<Vec<usize>> = (0..n).map(|e| vec![e]).collect();
    for s in &queue {
        seen.insert(s.clone());
    }
    while let Some(seq) = queue.pop_front() {
        out.push(TimingSequence(seq.clone()));
        if out.len() > cap {
            return Err(AnalysisError::EnumerationCap(cap));
        }
        let last = *seq.last().expect("sequences are non-empty");
        for x in 0..n {
            if seq.contains(&x) || !tc.before(last, x) {
                continue;
            }
            if !shares_vertex_with_any(q, x, &seq) {
                continue;
            }
            let mut next = seq.clone();
            next.push(x);
            if seen.insert(next.clone()) {
                queue.push_back(next);
            }
        }
    }
    Ok(out)
}

fn shares_vertex_with_any(q: &QueryGraph, x: usize, seq: &[usize]) -> bool {
    let (xs, xd) = (q.edges()[x].src, q.edges()[x].dst);
    seq.iter().any(|&e| {
        let (s, d) = (q.edges()[e].src, q.edges()[e].dst);
        s == xs || s == xd || d == xs || d == xd
    })
}

/// Greedy set cover: repeatedly select the largest remaining sequence that
/// is edge-disjoint from everything selected so far, until the query edges
/// are covered. Ties break lexicographically on the sequence's edge indices,
/// which makes planning deterministic.
pub fn greedy_decompose(tcsub: &[TimingSequence], q: &QueryGraph) -> TcDecomposition {
    let mut sorted: Vec<&TimingSequence> = tcsub.iter().collect();
    sorted.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.0.cmp(&b.0)));
    let mut covered = vec![false; q.edge_count()];
    let mut chosen = Vec::new();
    for seq in sorted {
        if seq.0.iter().any(|&e| covered[e]) {
            continue;
        }
        for &e in &seq.0 {
            covered[e] = true;
        }
        chosen.push(seq.clone());
        if covered.iter().all(|&c| c) {
            break;
        }
    }
    debug_assert!(covered.iter().all(|&c| c), "singletons guarantee coverage");
    TcDecomposition { subqueries: chosen }
}

/// Joint number between two edge sets: shared vertices plus edge pairs
/// related by the timing closure in either direction.
pub fn joint_number(a: &[usize], b: &[usize], q: &QueryGraph, tc: &TimingClosure) -> usize {
    let va = q.vertex_set(a);
    let vb = q.vertex_set(b);
    let n_v = va.iter().filter(|v| vb.contains(v)).count();
    let mut n_t = 0;
    for &ea in a {
        for &eb in b {
            if tc.related(ea, eb) {
                n_t += 1;
            }
        }
    }
    n_v + n_t
}

fn connected(a: &[usize], b: &[usize], q: &QueryGraph) -> bool {
    let va = q.vertex_set(a);
    let vb = q.vertex_set(b);
    va.iter().any(|v| vb.contains(v))
}

fn lowest_edge(seq: &TimingSequence) -> usize {
    *seq.0.iter().min().expect("non-empty")
}

/// Orders a decomposition into a prefix-connected permutation by joint
/// number: first the connected pair with the maximum joint number, then
/// repeatedly the remaining subquery with the maximum joint number against
/// the prefix union. Ties break by subquery size descending, then by lowest
/// edge index.
pub fn join_order(
    d: &TcDecomposition,
    q: &QueryGraph,
    tc: &TimingClosure,
) -> Result<TcDecomposition, AnalysisError> {
    let subs = &d.subqueries;
    if subs.len() <= 1 {
        return Ok(d.clone());
    }
    let mut best_pair: Option<(usize, usize, usize)> = None;
    for i in 0..subs.len() {
        for j in (i + 1)..subs.len() {
            if !connected(&subs[i].0, &subs[j].0, q) {
                continue;
            }
            let jn = joint_number(&subs[i].0, &subs[j].0, q, tc);
            let better = match best_pair {
                None => true,
                Some((bi, bj, bjn)) => {
                    let key = pair_key(subs, i, j, jn);
                    let best_key = pair_key(subs, bi, bj, bjn);
                    key > best_key
                }
            };
            if better {
                best_pair = Some((i, j, jn));
            }
        }
    }
    let (i, j, _) = best_pair.ok_or(AnalysisError::NoPrefixConnectedOrder)?;
    // Larger subquery leads; lowest edge index settles equal sizes.
    let (first, second) = if (subs[i].len(), std::cmp::Reverse(lowest_edge(&subs[i])))
        >= (subs[j].len(), std::cmp::Reverse(lowest_edge(&subs[j])))
    {
        (i, j)
    } else {
        (j, i)
    };
    let mut order = vec![first, second];
    let mut prefix: Vec<usize> = subs[first].0.iter().chain(&subs[second].0).copied().collect();
    let mut remaining: Vec<usize> = (0..subs.len()).filter(|x| *x != first && *x != second).collect();
    while !remaining.is_empty() {
        let mut best: Option<(usize, usize)> = None; // (position in remaining, jn)
        for (pos, &s) in remaining.iter().enumerate() {
            if !connected(&prefix, &subs[s].0, q) {
                continue;
            }
            let jn = joint_number(&prefix, &subs[s].0, q, tc);
            let better = match best {
                None => true,
                Some((bpos, bjn)) => {
                    let b = remaining[bpos];
                    (jn, subs[s].len(), std::cmp::Reverse(lowest_edge(&subs[s])))
                        > (bjn, subs[b].len(), std::cmp::Reverse(lowest_edge(&subs[b])))
                }
            };
            if better {
                best = Some((pos, jn));
            }
        }
        let (pos, _) = best.ok_or(AnalysisError::NoPrefixConnectedOrder)?;
        let s = remaining.remove(pos);
        prefix.extend_from_slice(&subs[s].0);
        order.push(s);
    }
    Ok(TcDecomposition {
        subqueries: order.into_iter().map(|s| subs[s].clone()).collect(),
    })
}

fn pair_key(
    subs: &[TimingSequence],
    i: usize,
    j: usize,
    jn: usize,
) -> (usize, (usize, usize), std::cmp::Reverse<usize>) {
    let mut sizes = (subs[i].len(), subs[j].len());
    if sizes.0 < sizes.1 {
        sizes = (sizes.1, sizes.0);
    }
    let low = lowest_edge(&subs[i]).min(lowest_edge(&subs[j]));
    (jn, sizes, std::cmp::Reverse(low))
}

/// An arbitrary prefix-connected permutation drawn under a seed: start from
/// a random subquery and repeatedly append a random one connected to the
/// prefix. Join-order ablations use this in place of [`join_order`];
/// correctness never depends on the order, only intermediate sizes do.
pub fn random_prefix_connected_order(
    d: &TcDecomposition,
    q: &QueryGraph,
    seed: u64,
) -> Result<TcDecomposition, AnalysisError> {
    use rand::seq::IndexedRandom;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let subs = &d.subqueries;
    if subs.len() <= 1 {
        return Ok(d.clone());
    }
    let mut remaining: Vec<usize> = (0..subs.len()).collect();
    let first = *remaining.choose(&mut rng).expect("non-empty");
    remaining.retain(|&x| x != first);
    let mut order = vec![first];
    let mut prefix: Vec<usize> = subs[first].0.clone();
    while !remaining.is_empty() {
        let eligible: Vec<usize> = remaining
            .iter()
            .copied()
            .filter(|&s| connected(&prefix, &subs[s].0, q))
            .collect();
        let pick = *eligible
            .choose(&mut rng)
            .ok_or(AnalysisError::NoPrefixConnectedOrder)?;
        remaining.retain(|&x| x != pick);
        prefix.extend_from_slice(&subs[pick].0);
        order.push(pick);
    }
    Ok(TcDecomposition {
        subqueries: order.into_iter().map(|s| subs[s].clone()).collect(),
    })
}

/// A full-length timing sequence for the whole query, if one exists.
pub fn is_tc_query(
    q: &QueryGraph,
    tc: &TimingClosure,
) -> Result<Option<TimingSequence>, AnalysisError> {
    let n = q.edge_count();
    if n > MAX_QUERY_EDGES {
        return Err(AnalysisError::TooManyEdges(MAX_QUERY_EDGES));
    }
    // DFS over (edge set, last edge) states; connectivity depends only on
    // the set and the chain condition only on the last element.
    let mut seen: HashSet<(u64, usize)> = HashSet::new();
    let mut stack: Vec<(u64, usize, Vec<usize>)> =
        (0..n).map(|e| (1u64 << e, e, vec![e])).collect();
    while let Some((mask, last, seq)) = stack.pop() {
        if seq.len() == n {
            return Ok(Some(TimingSequence(seq)));
        }
        for x in 0..n {
            if mask & (1 << x) != 0 || !tc.before(last, x) {
                continue;
            }
            if !shares_vertex_with_any(q, x, &seq) {
                continue;
            }
            let next_mask = mask | (1 << x);
            if seen.insert((next_mask, x)) {
                let mut next = seq.clone();
                next.push(x);
                stack.push((next_mask, x, next));
            }
        }
    }
    Ok(None)
}

/// Number of distinct term labels: `(source label, edge label, target
/// label)` triples over the query edges.
pub fn count_term_labels(q: &QueryGraph) -> usize {
    let mut triples: Vec<_> = q
        .edges()
        .iter()
        .map(|e| (e.src_label, e.edge_label, e.dst_label))
        .collect();
    triples.sort_unstable();
    triples.dedup();
    triples.len()
}

/// Exact rational, kept reduced. Enough arithmetic for the cost model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    num: i64,
    den: i64,
}

impl Ratio {
    pub fn new(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        let g = gcd(num.unsigned_abs(), den.unsigned_abs()).max(1) as i64;
        let sign = if den < 0 { -1 } else { 1 };
        Self {
            num: sign * num / g,
            den: sign * den / g,
        }
    }

    pub fn num(&self) -> i64 {
        self.num
    }

    pub fn den(&self) -> i64 {
        self.den
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Expected join operations per incoming edge for a query of `m` edges
/// decomposed into `k` TC-subqueries over `d` distinct term labels:
/// `((m - 1) + k(k - 1)/2) / d`.
pub fn expected_join_ops(m: usize, k: usize, d: usize) -> Ratio {
    assert!(m >= k && k >= 1 && d >= 1, "need m >= k >= 1 and d >= 1");
    let m = m as i64;
    let k = k as i64;
    Ratio::new((m - 1) + k * (k - 1) / 2, d as i64)
}

/// Cost summary attached to a compiled plan.
#[derive(Debug, Clone, Copy)]
pub struct CostEstimate {
    pub edge_count: usize,
    pub k: usize,
    pub d: usize,
    pub join_ops: Ratio,
}

impl CostEstimate {
    pub fn new(q: &QueryGraph, k: usize) -> Self {
        let d = count_term_labels(q);
        Self {
            edge_count: q.edge_count(),
            k,
            d,
            join_ops: expected_join_ops(q.edge_count(), k, d),
        }
    }
}
