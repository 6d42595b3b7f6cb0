//! Domain types for streams, windows, queries, and matches.
//!
//! Timestamps may collide in real inputs, so every comparison that the
//! matching semantics cares about runs on the lexicographic pair
//! `(timestamp, seq)`, which is a strict total order over stream edges.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

/// Vertex identifier in the data stream.
pub type VertexId = u64;
/// Event time in abstract units.
pub type Timestamp = i64;
/// Interned label.
pub type LabelId = u32;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("self-loop on vertex {0} is not supported")]
    SelfLoop(VertexId),
    #[error("edge {0} references undeclared vertex {1}")]
    DanglingVertex(u32, VertexId),
    #[error("duplicate query edge number {0}")]
    DuplicateEdge(u32),
    #[error("timing constraint references unknown edge {0}")]
    DanglingTiming(u32),
    #[error("timing order contains a cycle through edge {0}")]
    TimingCycle(u32),
    #[error("query graph is not weakly connected")]
    Disconnected,
    #[error("query graph has no edges")]
    Empty,
    #[error("window advanced backwards: {0} < current {1}")]
    TimeRegression(Timestamp, Timestamp),
    #[error("match does not cover every query edge")]
    IncompleteMatch,
}

/// One timestamped directed labelled edge of the stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamEdge {
    /// Arrival index, strictly increasing over the stream.
    pub seq: u64,
    pub timestamp: Timestamp,
    pub src_id: VertexId,
    pub dst_id: VertexId,
    pub src_label: LabelId,
    pub dst_label: LabelId,
    pub edge_label: Option<LabelId>,
}

impl StreamEdge {
    /// Strict total order key used wherever timestamps are compared.
    pub fn order_key(&self) -> (Timestamp, u64) {
        (self.timestamp, self.seq)
    }
}

/// Maps label strings to dense ids shared between a stream and its queries.
#[derive(Debug, Default, Clone)]
pub struct LabelInterner {
    names: Vec<String>,
    index: HashMap<String, LabelId>,
}

impl LabelInterner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, name: &str) -> LabelId {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len() as LabelId;
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        id
    }

    pub fn lookup(&self, name: &str) -> Option<LabelId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: LabelId) -> &str {
        &self.names[id as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Time-based sliding window over the stream.
///
/// At current time `t` the live timespan is `(t - width, t]`. Expiry is
/// driven by ingested event time, never by wall clock, so replays are
/// deterministic.
#[derive(Debug, Clone)]
pub struct SlidingWindow {
    width: u64,
    current_time: Timestamp,
    live: VecDeque<StreamEdge>,
}

impl SlidingWindow {
    pub fn new(width: u64) -> Self {
        Self {
            width,
            current_time: Timestamp::MIN,
            live: VecDeque::new(),
        }
    }

    pub fn width(&self) -> u64 {
        self.width
    }

    pub fn current_time(&self) -> Timestamp {
        self.current_time
    }

    pub fn live_edges(&self) -> impl Iterator<Item = &StreamEdge> {
        self.live.iter()
    }

    pub fn len(&self) -> usize {
        self.live.len()
    }

    pub fn is_empty(&self) -> bool {
        self.live.is_empty()
    }

    /// Advances the window to `t`, returning exactly the edges whose
    /// timestamp fell out of the timespan `(t - width, t]`, in arrival order.
    pub fn expire(&mut self, t: Timestamp) -> Result<Vec<StreamEdge>, ModelError> {
        if self.current_time != Timestamp::MIN && t < self.current_time {
            return Err(ModelError::TimeRegression(t, self.current_time));
        }
        self.current_time = t;
        let cutoff = t.saturating_sub(self.width as Timestamp);
        let mut out = Vec::new();
        while let Some(front) = self.live.front() {
            if front.timestamp <= cutoff {
                out.push(*front);
                self.live.pop_front();
            } else {
                break;
            }
        }
        Ok(out)
    }

    /// Appends a newly arrived edge. Callers expire to `edge.timestamp` first.
    pub fn push(&mut self, edge: StreamEdge) -> Result<(), ModelError> {
        if self.current_time != Timestamp::MIN && edge.timestamp < self.current_time {
            return Err(ModelError::TimeRegression(edge.timestamp, self.current_time));
        }
        self.current_time = edge.timestamp;
        self.live.push_back(edge);
        Ok(())
    }
}

/// A query vertex: user-visible id plus label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueryVertex {
    pub id: VertexId,
    pub label: LabelId,
}

/// A directed query edge. `src`/`dst` are dense vertex positions into
/// [`QueryGraph::vertices`]; endpoint labels are denormalized for matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueryEdge {
    /// User-visible edge number from the query file.
    pub num: u32,
    pub src: usize,
    pub dst: usize,
    pub src_label: LabelId,
    pub dst_label: LabelId,
    pub edge_label: Option<LabelId>,
}

/// Labelled directed pattern plus a strict partial timing order over its
/// edges. Edges are stored in ascending user-number order; all internal
/// indices are dense positions into `edges`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryGraph {
    vertices: Vec<QueryVertex>,
    edges: Vec<QueryEdge>,
    /// Declared timing pairs `(a, b)` meaning edge `a` precedes edge `b`,
    /// as dense indices.
    timing: Vec<(usize, usize)>,
}

impl QueryGraph {
    pub fn vertices(&self) -> &[QueryVertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[QueryEdge] {
        &self.edges
    }

    pub fn timing(&self) -> &[(usize, usize)] {
        &self.timing
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    /// Dense index of the edge with user number `num`.
    pub fn edge_by_num(&self, num: u32) -> Option<usize> {
        self.edges.iter().position(|e| e.num == num)
    }

    /// Dense indices of all query edges the stream edge is compatible with.
    pub fn matching_edges(&self, sigma: &StreamEdge) -> Vec<usize> {
        (0..self.edges.len())
            .filter(|&e| edge_matches(sigma, &self.edges[e]))
            .collect()
    }

    /// True if the edge set `subset` induces a weakly connected subgraph.
    pub fn weakly_connected(&self, subset: &[usize]) -> bool {
        if subset.is_empty() {
            return true;
        }
        let mut reached = vec![false; subset.len()];
        let mut stack = vec![0usize];
        reached[0] = true;
        while let Some(i) = stack.pop() {
            let (s1, d1) = (self.edges[subset[i]].src, self.edges[subset[i]].dst);
            for (j, r) in reached.iter_mut().enumerate() {
                if !*r {
                    let (s2, d2) = (self.edges[subset[j]].src, self.edges[subset[j]].dst);
                    if s1 == s2 || s1 == d2 || d1 == s2 || d1 == d2 {
                        *r = true;
                        stack.push(j);
                    }
                }
            }
        }
        reached.into_iter().all(|r| r)
    }

    /// Vertex positions touched by the given edge set.
    pub fn vertex_set(&self, subset: &[usize]) -> Vec<usize> {
        let mut seen = vec![false; self.vertices.len()];
        for &e in subset {
            seen[self.edges[e].src] = true;
            seen[self.edges[e].dst] = true;
        }
        (0..self.vertices.len()).filter(|&v| seen[v]).collect()
    }
}

/// Builder enforcing the query-graph invariants at construction time.
#[derive(Debug, Default)]
pub struct QueryGraphBuilder {
    vertices: Vec<QueryVertex>,
    vertex_index: HashMap<VertexId, usize>,
    edges: Vec<(u32, VertexId, VertexId, Option<LabelId>)>,
    timing: Vec<(u32, u32)>,
}

impl QueryGraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn vertex(&mut self, id: VertexId, label: LabelId) -> &mut Self {
        if let Some(&pos) = self.vertex_index.get(&id) {
            self.vertices[pos].label = label;
        } else {
            self.vertex_index.insert(id, self.vertices.len());
            self.vertices.push(QueryVertex { id, label });
        }
        self
    }

    pub fn edge(&mut self, num: u32, src: VertexId, dst: VertexId, label: Option<LabelId>) -> &mut Self {
        self.edges.push((num, src, dst, label));
        self
    }

    pub fn timing(&mut self, before: u32, after: u32) -> &mut Self {
        self.timing.push((before, after));
        self
    }

    pub fn build(&self) -> Result<QueryGraph, ModelError> {
        if self.edges.is_empty() {
            return Err(ModelError::Empty);
        }
        let mut edges = Vec::with_capacity(self.edges.len());
        let mut seen_nums = HashMap::new();
        for &(num, src, dst, edge_label) in &self.edges {
            if src == dst {
                return Err(ModelError::SelfLoop(src));
            }
            if seen_nums.insert(num, ()).is_some() {
                return Err(ModelError::DuplicateEdge(num));
            }
            let &sp = self
                .vertex_index
                .get(&src)
                .ok_or(ModelError::DanglingVertex(num, src))?;
            let &dp = self
                .vertex_index
                .get(&dst)
                .ok_or(ModelError::DanglingVertex(num, dst))?;
            edges.push(QueryEdge {
                num,
                src: sp,
                dst: dp,
                src_label: self.vertices[sp].label,
                dst_label: self.vertices[dp].label,
                edge_label,
            });
        }
        edges.sort_by_key(|e| e.num);
        let num_to_dense: HashMap<u32, usize> =
            edges.iter().enumerate().map(|(i, e)| (e.num, i)).collect();
        let mut timing = Vec::with_capacity(self.timing.len());
        for &(a, b) in &self.timing {
            let &da = num_to_dense.get(&a).ok_or(ModelError::DanglingTiming(a))?;
            let &db = num_to_dense.get(&b).ok_or(ModelError::DanglingTiming(b))?;
            if da == db {
                return Err(ModelError::TimingCycle(a));
            }
            timing.push((da, db));
        }
        let graph = QueryGraph {
            vertices: self.vertices.clone(),
            edges,
            timing,
        };
        let all: Vec<usize> = (0..graph.edges.len()).collect();
        if !graph.weakly_connected(&all) {
            return Err(ModelError::Disconnected);
        }
        // Rejects timing cycles as a side effect.
        compute_closure(&graph)?;
        Ok(graph)
    }
}

/// Transitive closure of the timing order plus the prerequisite sets.
#[derive(Debug, Clone)]
pub struct TimingClosure {
    n: usize,
    /// `before[a * n + b]` is true iff edge `a` precedes edge `b`.
    before: Vec<bool>,
    /// `preq[e]` holds `e` itself plus every edge that must precede it,
    /// sorted ascending.
    preq: Vec<Vec<usize>>,
}

impl TimingClosure {
    pub fn before(&self, a: usize, b: usize) -> bool {
        self.before[a * self.n + b]
    }

    /// True if the pair is ordered in either direction.
    pub fn related(&self, a: usize, b: usize) -> bool {
        self.before(a, b) || self.before(b, a)
    }

    pub fn preq(&self, e: usize) -> &[usize] {
        &self.preq[e]
    }

    pub fn edge_count(&self) -> usize {
        self.n
    }
}

/// Computes the transitive closure of the declared timing pairs, and the
/// prerequisite set of every edge. Fails on cycles.
pub fn compute_closure(q: &QueryGraph) -> Result<TimingClosure, ModelError> {
    let n = q.edge_count();
    let mut before = vec![false; n * n];
    for &(a, b) in q.timing() {
        before[a * n + b] = true;
    }
    for k in 0..n {
        for a in 0..n {
            if before[a * n + k] {
                for b in 0..n {
                    if before[k * n + b] {
                        before[a * n + b] = true;
                    }
                }
            }
        }
    }
    for e in 0..n {
        if before[e * n + e] {
            return Err(ModelError::TimingCycle(q.edges()[e].num));
        }
    }
    let preq = (0..n)
        .map(|e| {
            let mut set: Vec<usize> = (0..n).filter(|&a| before[a * n + e]).collect();
            set.push(e);
            set.sort_unstable();
            set
        })
        .collect();
    Ok(TimingClosure { n, before, preq })
}

/// True iff the stream edge's direction, endpoint labels, and (when the
/// query edge constrains it) edge label are compatible with the query edge.
pub fn edge_matches(sigma: &StreamEdge, eps: &QueryEdge) -> bool {
    if sigma.src_label != eps.src_label || sigma.dst_label != eps.dst_label {
        return false;
    }
    match eps.edge_label {
        None => true,
        Some(l) => sigma.edge_label == Some(l),
    }
}

/// An injective assignment from a subset of query edges to stream edges,
/// with the induced query-vertex to data-vertex mapping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialMatch {
    edges: Vec<Option<StreamEdge>>,
    verts: Vec<Option<VertexId>>,
    len: usize,
}

impl PartialMatch {
    pub fn empty(q: &QueryGraph) -> Self {
        Self {
            edges: vec![None; q.edge_count()],
            verts: vec![None; q.vertex_count()],
            len: 0,
        }
    }

    /// Single-edge match; `None` if labels or direction are incompatible.
    pub fn singleton(q: &QueryGraph, tc: &TimingClosure, e: usize, sigma: StreamEdge) -> Option<Self> {
        Self::empty(q).extend(q, tc, e, sigma)
    }

    pub fn assigned_len(&self) -> usize {
        self.len
    }

    pub fn get(&self, e: usize) -> Option<&StreamEdge> {
        self.edges[e].as_ref()
    }

    pub fn vertex(&self, v: usize) -> Option<VertexId> {
        self.verts[v]
    }

    pub fn assignments(&self) -> impl Iterator<Item = (usize, &StreamEdge)> {
        self.edges
            .iter()
            .enumerate()
            .filter_map(|(i, e)| e.as_ref().map(|s| (i, s)))
    }

    pub fn contains_edge(&self, seq: u64) -> bool {
        self.edges.iter().flatten().any(|s| s.seq == seq)
    }

    pub fn is_complete(&self, q: &QueryGraph) -> bool {
        self.len == q.edge_count()
    }

    /// Stable identity for set comparisons: `(edge index, stream seq)` pairs.
    pub fn canonical_key(&self) -> Vec<(usize, u64)> {
        self.assignments().map(|(e, s)| (e, s.seq)).collect()
    }

    fn bind_vertex(&mut self, v: usize, data: VertexId) -> bool {
        match self.verts[v] {
            Some(cur) => cur == data,
            None => {
                // Injectivity: no other query vertex may already map here.
                if self.verts.iter().flatten().any(|&d| d == data) {
                    return false;
                }
                self.verts[v] = Some(data);
                true
            }
        }
    }

    /// Extends by one assignment, checking labels, vertex consistency,
    /// injectivity, stream-edge reuse, and every closed timing pair that
    /// becomes decided. Returns `None` when any constraint fails.
    pub fn extend(
        &self,
        q: &QueryGraph,
        tc: &TimingClosure,
        e: usize,
        sigma: StreamEdge,
    ) -> Option<Self> {
        let mut next = self.extend_structural(q, e, sigma)?;
        for (other, s) in self.assignments() {
            if tc.before(other, e) && s.order_key() >= sigma.order_key() {
                return None;
            }
            if tc.before(e, other) && sigma.order_key() >= s.order_key() {
                return None;
            }
        }
        next.len = self.len + 1;
        Some(next)
    }

    /// Structure-only variant of [`extend`](Self::extend): timing is not
    /// checked. Used by the reference matcher, which post-filters timing.
    pub fn extend_structural(
        &self,
        q: &QueryGraph,
        e: usize,
        sigma: StreamEdge,
    ) -> Option<Self> {
        if self.edges[e].is_some() || !edge_matches(&sigma, &q.edges()[e]) {
            return None;
        }
        if self.contains_edge(sigma.seq) {
            return None;
        }
        let mut next = self.clone();
        let qe = &q.edges()[e];
        if !next.bind_vertex(qe.src, sigma.src_id) || !next.bind_vertex(qe.dst, sigma.dst_id) {
            return None;
        }
        next.edges[e] = Some(sigma);
        next.len = self.len + 1;
        Some(next)
    }

    /// Merges two matches over disjoint query-edge sets. `None` when the
    /// merged vertex map is inconsistent or non-injective, a stream edge is
    /// reused, or a closed timing pair spanning the two sides is violated.
    pub fn merge(&self, other: &Self, tc: &TimingClosure) -> Option<Self> {
        let mut merged = self.clone();
        for (v, &dv) in other.verts.iter().enumerate() {
            if let Some(dv) = dv {
                if !merged.bind_vertex(v, dv) {
                    return None;
                }
            }
        }
        for (e, s) in other.assignments() {
            if merged.edges[e].is_some() || merged.contains_edge(s.seq) {
                return None;
            }
            merged.edges[e] = Some(*s);
            merged.len += 1;
        }
        for (a, sa) in self.assignments() {
            for (b, sb) in other.assignments() {
                if tc.before(a, b) && sa.order_key() >= sb.order_key() {
                    return None;
                }
                if tc.before(b, a) && sb.order_key() >= sa.order_key() {
                    return None;
                }
            }
        }
        Some(merged)
    }

    /// Builds a match from known-consistent pairs. Debug builds re-verify.
    pub(crate) fn from_pairs_unchecked(
        q: &QueryGraph,
        pairs: impl IntoIterator<Item = (usize, StreamEdge)>,
    ) -> Self {
        let mut m = Self::empty(q);
        for (e, s) in pairs {
            debug_assert!(m.edges[e].is_none());
            let qe = &q.edges()[e];
            m.verts[qe.src] = Some(s.src_id);
            m.verts[qe.dst] = Some(s.dst_id);
            m.edges[e] = Some(s);
            m.len += 1;
        }
        m
    }
}

impl fmt::Display for PartialMatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .assignments()
            .map(|(e, s)| format!("{}:{}", e, s.seq))
            .collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// True iff every closed timing pair with both edges assigned respects the
/// strict `(timestamp, seq)` order.
pub fn timing_satisfied(m: &PartialMatch, tc: &TimingClosure) -> bool {
    let assigned: Vec<(usize, (Timestamp, u64))> =
        m.assignments().map(|(e, s)| (e, s.order_key())).collect();
    for &(a, ka) in &assigned {
        for &(b, kb) in &assigned {
            if tc.before(a, b) && ka >= kb {
                return false;
            }
        }
    }
    true
}

/// Full time-constrained match test: the assignment must cover every query
/// edge, be structurally valid by construction, and satisfy the timing order.
pub fn is_time_constrained_match(
    q: &QueryGraph,
    tc: &TimingClosure,
    g: &PartialMatch,
) -> Result<bool, ModelError> {
    if !g.is_complete(q) {
        return Err(ModelError::IncompleteMatch);
    }
    // Structure: rebuild through the checked path to verify labels,
    // injectivity and vertex consistency independently of how g was made.
    let mut rebuilt = PartialMatch::empty(q);
    for (e, s) in g.assignments() {
        match rebuilt.extend_structural(q, e, *s) {
            Some(m) => rebuilt = m,
            None => return Ok(false),
        }
    }
    Ok(timing_satisfied(g, tc))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edge(seq: u64, t: Timestamp, s: VertexId, d: VertexId, sl: LabelId, dl: LabelId) -> StreamEdge {
        StreamEdge {
            seq,
            timestamp: t,
            src_id: s,
            dst_id: d,
            src_label: sl,
            dst_label: dl,
            edge_label: None,
        }
    }

    /// Two-edge path a->b->c with edge 1 before edge 2.
    fn path_query() -> (QueryGraph, TimingClosure) {
        let mut b = QueryGraphBuilder::new();
        b.vertex(1, 0).vertex(2, 1).vertex(3, 2);
        b.edge(1, 1, 2, None).edge(2, 2, 3, None);
        b.timing(1, 2);
        let q = b.build().unwrap();
        let tc = compute_closure(&q).unwrap();
        (q, tc)
    }

    #[test]
    fn edge_matching_checks_direction_and_labels() {
        let (q, _) = path_query();
        // a->b matches edge 1, not edge 2.
        let s = edge(1, 1, 10, 11, 0, 1);
        assert!(edge_matches(&s, &q.edges()[0]));
        assert!(!edge_matches(&s, &q.edges()[1]));
        // b->a (reversed labels) matches neither.
        let r = edge(2, 2, 11, 10, 1, 0);
        assert!(!edge_matches(&r, &q.edges()[0]));
        assert!(!edge_matches(&r, &q.edges()[1]));
    }

    #[test]
    fn edge_label_wildcard_and_mismatch() {
        let mut b = QueryGraphBuilder::new();
        b.vertex(1, 0).vertex(2, 1);
        b.edge(1, 1, 2, Some(7));
        let q = b.build().unwrap();
        let mut s = edge(1, 1, 10, 11, 0, 1);
        assert!(!edge_matches(&s, &q.edges()[0]));
        s.edge_label = Some(7);
        assert!(edge_matches(&s, &q.edges()[0]));
        s.edge_label = Some(8);
        assert!(!edge_matches(&s, &q.edges()[0]));
    }

    #[test]
    fn timing_respects_order_and_seq_tiebreak() {
        let (q, tc) = path_query();
        let early = edge(1, 3, 10, 11, 0, 1);
        let late = edge(2, 5, 11, 12, 1, 2);
        let m = PartialMatch::singleton(&q, &tc, 0, early).unwrap();
        let full = m.extend(&q, &tc, 1, late).unwrap();
        assert!(timing_satisfied(&full, &tc));
        assert!(is_time_constrained_match(&q, &tc, &full).unwrap());

        // Violated order: edge 2 earlier than edge 1.
        let m = PartialMatch::singleton(&q, &tc, 0, edge(3, 5, 10, 11, 0, 1)).unwrap();
        assert!(m.extend(&q, &tc, 1, edge(4, 3, 11, 12, 1, 2)).is_none());

        // Equal timestamps break ties by seq.
        let m = PartialMatch::singleton(&q, &tc, 0, edge(5, 4, 10, 11, 0, 1)).unwrap();
        assert!(m.extend(&q, &tc, 1, edge(6, 4, 11, 12, 1, 2)).is_some());
        let m = PartialMatch::singleton(&q, &tc, 0, edge(8, 4, 10, 11, 0, 1)).unwrap();
        assert!(m.extend(&q, &tc, 1, edge(7, 4, 11, 12, 1, 2)).is_none());
    }

    #[test]
    fn injectivity_rejected_on_shared_data_vertex() {
        let (q, tc) = path_query();
        // Both endpoints of the second edge collapse onto vertex 10.
        let m = PartialMatch::singleton(&q, &tc, 0, edge(1, 1, 10, 11, 0, 1)).unwrap();
        assert!(m.extend(&q, &tc, 1, edge(2, 2, 11, 10, 1, 2)).is_none());
    }

    #[test]
    fn closure_preq_and_cycle_detection() {
        let mut b = QueryGraphBuilder::new();
        b.vertex(1, 0).vertex(2, 1).vertex(3, 2).vertex(4, 3);
        b.edge(1, 1, 2, None).edge(2, 2, 3, None).edge(3, 3, 4, None);
        b.timing(1, 2).timing(2, 3);
        let q = b.build().unwrap();
        let tc = compute_closure(&q).unwrap();
        assert!(tc.before(0, 2), "closure must be transitive");
        assert_eq!(tc.preq(2), &[0, 1, 2]);
        assert_eq!(tc.preq(0), &[0]);

        let mut b = QueryGraphBuilder::new();
        b.vertex(1, 0).vertex(2, 1).vertex(3, 2);
        b.edge(1, 1, 2, None).edge(2, 2, 3, None);
        b.timing(1, 2).timing(2, 1);
        assert!(matches!(b.build(), Err(ModelError::TimingCycle(_))));
    }

    #[test]
    fn closure_is_a_fixpoint() {
        let (q, tc) = path_query();
        // Re-declaring every closed pair changes nothing.
        let mut b = QueryGraphBuilder::new();
        for v in q.vertices() {
            b.vertex(v.id, v.label);
        }
        for e in q.edges() {
            b.edge(e.num, q.vertices()[e.src].id, q.vertices()[e.dst].id, e.edge_label);
        }
        for a in 0..q.edge_count() {
            for bb in 0..q.edge_count() {
                if tc.before(a, bb) {
                    b.timing(q.edges()[a].num, q.edges()[bb].num);
                }
            }
        }
        let q2 = b.build().unwrap();
        let tc2 = compute_closure(&q2).unwrap();
        for a in 0..q.edge_count() {
            for bb in 0..q.edge_count() {
                assert_eq!(tc.before(a, bb), tc2.before(a, bb));
            }
        }
    }

    #[test]
    fn empty_timing_means_singleton_preqs() {
        let mut b = QueryGraphBuilder::new();
        b.vertex(1, 0).vertex(2, 1).vertex(3, 2);
        b.edge(1, 1, 2, None).edge(2, 2, 3, None);
        let q = b.build().unwrap();
        let tc = compute_closure(&q).unwrap();
        for e in 0..q.edge_count() {
            assert_eq!(tc.preq(e), &[e]);
        }
    }

    #[test]
    fn window_expiry_half_open_interval() {
        let mut w = SlidingWindow::new(9);
        for i in 1..=9 {
            w.expire(i as Timestamp).unwrap();
            w.push(edge(i, i as Timestamp, 100 + i, 200 + i, 0, 1)).unwrap();
        }
        // Timespan (0, 9]: the t=1 edge survives.
        assert_eq!(w.len(), 9);
        // Advance to 10: exactly the t=1 edge expires.
        let gone = w.expire(10).unwrap();
        assert_eq!(gone.len(), 1);
        assert_eq!(gone[0].seq, 1);
        // Idempotent at the same time point.
        assert!(w.expire(10).unwrap().is_empty());
        assert!(w.live_edges().all(|e| e.timestamp > 10 - 9));
        // Going backwards is an error.
        assert!(w.expire(5).is_err());
    }

    #[test]
    fn self_loops_and_disconnected_queries_rejected() {
        let mut b = QueryGraphBuilder::new();
        b.vertex(1, 0);
        b.edge(1, 1, 1, None);
        assert!(matches!(b.build(), Err(ModelError::SelfLoop(1))));

        let mut b = QueryGraphBuilder::new();
        b.vertex(1, 0).vertex(2, 1).vertex(3, 2).vertex(4, 3);
        b.edge(1, 1, 2, None).edge(2, 3, 4, None);
        assert!(matches!(b.build(), Err(ModelError::Disconnected)));
    }

    #[test]
    fn complete_match_domain_is_enforced() {
        let (q, tc) = path_query();
        let m = PartialMatch::singleton(&q, &tc, 0, edge(1, 1, 10, 11, 0, 1)).unwrap();
        assert!(matches!(
            is_time_constrained_match(&q, &tc, &m),
            Err(ModelError::IncompleteMatch)
        ));
    }
}
