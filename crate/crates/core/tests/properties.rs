//! Property tests for the model and planning invariants.

mod common;

use std::collections::HashSet;

use proptest::prelude::*;

use tcmatch_core::analysis::{
    enumerate_tc_subqueries, expected_join_ops, greedy_decompose, join_order,
    DEFAULT_ENUMERATION_CAP,
};
use tcmatch_core::io;
use tcmatch_core::model::{
    compute_closure, timing_satisfied, LabelInterner, PartialMatch, QueryGraph,
    QueryGraphBuilder, SlidingWindow, StreamEdge, Timestamp,
};

fn mk_edge(seq: u64, t: Timestamp, s: u64, d: u64, sl: u32, dl: u32) -> StreamEdge {
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

/// Builds a connected query over `n` edges on a path of vertices, with the
/// given timing pairs (1-based edge numbers) filtered to the acyclic ones.
fn path_query(n: usize, pairs: &[(u32, u32)]) -> Option<QueryGraph> {
    let mut b = QueryGraphBuilder::new();
    for v in 1..=(n as u64 + 1) {
        b.vertex(v, v as u32);
    }
    for e in 1..=n {
        b.edge(e as u32, e as u64, e as u64 + 1, None);
    }
    for &(x, y) in pairs {
        if x != y && x >= 1 && y >= 1 && x <= n as u32 && y <= n as u32 {
            b.timing(x, y);
        }
    }
    b.build().ok()
}

/// Brute-force TC-subquery enumeration: all permutations of all subsets,
/// kept when prefix-connected and closure-chained.
fn brute_force_sequences(q: &QueryGraph) -> HashSet<Vec<usize>> {
    fn perms(items: &[usize]) -> Vec<Vec<usize>> {
        if items.len() <= 1 {
            return vec![items.to_vec()];
        }
        let mut out = Vec::new();
        for (i, &x) in items.iter().enumerate() {
            let mut rest = items.to_vec();
            rest.remove(i);
            for mut p in perms(&rest) {
                p.insert(0, x);
                out.push(p);
            }
        }
        out
    }
    let tc = compute_closure(q).unwrap();
    let n = q.edge_count();
    let mut out = HashSet::new();
    for mask in 1u32..(1 << n) {
        let subset: Vec<usize> = (0..n).filter(|e| mask & (1 << e) != 0).collect();
        for perm in perms(&subset) {
            let chained = perm.windows(2).all(|w| tc.before(w[0], w[1]));
            let prefix_conn = (1..=perm.len()).all(|j| q.weakly_connected(&perm[..j]));
            if chained && prefix_conn {
                out.insert(perm);
            }
        }
    }
    out
}

proptest! {
    /// After expiry to time t, nothing live is at or below t - width and
    /// everything returned is.
    #[test]
    fn window_expiry_bounds(width in 1u64..25, mut steps in prop::collection::vec(0i64..60, 1..60)) {
        steps.sort_unstable();
        let mut w = SlidingWindow::new(width);
        for (i, &t) in steps.iter().enumerate() {
            let gone = w.expire(t).unwrap();
            let cutoff = t - width as i64;
            prop_assert!(gone.iter().all(|e| e.timestamp <= cutoff));
            prop_assert!(w.live_edges().all(|e| e.timestamp > cutoff));
            w.push(mk_edge(i as u64 + 1, t, 100 + i as u64, 200 + i as u64, 0, 1)).unwrap();
        }
        // Survivors stay in arrival order.
        let seqs: Vec<u64> = w.live_edges().map(|e| e.seq).collect();
        let mut sorted = seqs.clone();
        sorted.sort_unstable();
        prop_assert_eq!(seqs, sorted);
    }

    /// Satisfied timing stays satisfied when constraints are dropped.
    #[test]
    fn timing_monotone_under_pair_removal(
        n in 2usize..5,
        pairs in prop::collection::vec((1u32..5, 1u32..5), 0..6),
        times in prop::collection::vec(0i64..20, 4),
        keep in prop::collection::vec(any::<bool>(), 6),
    ) {
        let Some(q) = path_query(n, &pairs) else { return Ok(()); };
        let tc = compute_closure(&q).unwrap();
        // One stream edge per query edge along the same path.
        let mut m = PartialMatch::empty(&q);
        for e in 0..n {
            let s = mk_edge(e as u64 + 1, times[e % times.len()], e as u64 + 1, e as u64 + 2,
                            e as u32 + 1, e as u32 + 2);
            m = m.extend_structural(&q, e, s).unwrap();
        }
        if timing_satisfied(&m, &tc) {
            let subset: Vec<(u32, u32)> = pairs
                .iter()
                .zip(keep.iter().chain(std::iter::repeat(&true)))
                .filter_map(|(&p, &k)| k.then_some(p))
                .collect();
            let Some(q2) = path_query(n, &subset) else { return Ok(()); };
            let tc2 = compute_closure(&q2).unwrap();
            prop_assert!(timing_satisfied(&m, &tc2));
        }
    }

    /// Merging is symmetric and enforces injectivity both ways.
    #[test]
    fn merge_is_symmetric(
        ts in prop::collection::vec(0i64..12, 3),
        ids in prop::collection::vec(1u64..8, 6),
    ) {
        let mut b = QueryGraphBuilder::new();
        b.vertex(1, 1).vertex(2, 2).vertex(3, 3).vertex(4, 1);
        b.edge(1, 1, 2, None).edge(2, 2, 3, None).edge(3, 3, 4, None);
        b.timing(1, 3);
        let q = b.build().unwrap();
        let tc = compute_closure(&q).unwrap();
        let e0 = mk_edge(1, ts[0], ids[0], ids[1], 1, 2);
        let e1 = mk_edge(2, ts[1], ids[2], ids[3], 2, 3);
        let e2 = mk_edge(3, ts[2], ids[4], ids[5], 3, 1);
        let a = PartialMatch::singleton(&q, &tc, 0, e0);
        let bscr = PartialMatch::empty(&q)
            .extend_structural(&q, 1, e1)
            .and_then(|m| m.extend_structural(&q, 2, e2));
        if let (Some(a), Some(bm)) = (a, bscr) {
            let ab = a.merge(&bm, &tc);
            let ba = bm.merge(&a, &tc);
            prop_assert_eq!(ab.is_some(), ba.is_some());
            if let (Some(x), Some(y)) = (ab, ba) {
                prop_assert_eq!(x.canonical_key(), y.canonical_key());
            }
        }
    }

    /// Fast enumeration equals the brute-force definition on small queries,
    /// every output validates independently, and every prefix of an output
    /// is itself an output.
    #[test]
    fn tcsub_enumeration_equals_brute_force(
        n in 1usize..5,
        pairs in prop::collection::vec((1u32..5, 1u32..5), 0..5),
    ) {
        let Some(q) = path_query(n, &pairs) else { return Ok(()); };
        let tc = compute_closure(&q).unwrap();
        let fast: HashSet<Vec<usize>> = enumerate_tc_subqueries(&q, &tc, DEFAULT_ENUMERATION_CAP)
            .unwrap()
            .into_iter()
            .map(|s| s.0)
            .collect();
        prop_assert_eq!(&fast, &brute_force_sequences(&q));
        for s in &fast {
            for j in 1..s.len() {
                prop_assert!(fast.contains(&s[..j]));
            }
        }
    }

    /// The greedy cover partitions the edges and the join order keeps every
    /// prefix union weakly connected.
    #[test]
    fn decomposition_partitions_and_order_stays_connected(
        n in 1usize..6,
        pairs in prop::collection::vec((1u32..6, 1u32..6), 0..8),
    ) {
        let Some(q) = path_query(n, &pairs) else { return Ok(()); };
        let tc = compute_closure(&q).unwrap();
        let seqs = enumerate_tc_subqueries(&q, &tc, DEFAULT_ENUMERATION_CAP).unwrap();
        let d = greedy_decompose(&seqs, &q);
        let mut all: Vec<usize> = d.subqueries.iter().flat_map(|s| s.0.clone()).collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        let ordered = join_order(&d, &q, &tc).unwrap();
        let mut prefix = Vec::new();
        for s in &ordered.subqueries {
            prefix.extend_from_slice(&s.0);
            prop_assert!(q.weakly_connected(&prefix));
        }
    }

    /// More subqueries always cost more joins.
    #[test]
    fn cost_increases_with_k(m in 1usize..30, d in 1usize..10) {
        for k in 1..m {
            let a = expected_join_ops(m, k, d);
            let b = expected_join_ops(m, k + 1, d);
            prop_assert!(a.to_f64() < b.to_f64());
        }
    }
}

proptest! {
    /// The parsers reject garbage with errors, never panics, and any text
    /// they accept survives a serialize/parse round trip.
    #[test]
    fn parsers_never_panic(lines in prop::collection::vec("[ -~]{0,30}", 0..12)) {
        let body = lines.join("\n");
        let mut labels = LabelInterner::new();
        if let Ok(edges) = io::parse_stream_str(&format!("#stream v1\n{}", body), &mut labels) {
            let text = io::serialize_stream(&edges, &labels);
            let mut fresh = LabelInterner::new();
            prop_assert!(io::parse_stream_str(&text, &mut fresh).is_ok());
        }
        let mut labels = LabelInterner::new();
        if let Ok(q) = io::parse_query_str(&body, &mut labels) {
            let text = io::serialize_query(&q, &labels);
            let mut fresh = LabelInterner::new();
            prop_assert!(io::parse_query_str(&text, &mut fresh).is_ok());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Parsing is a left inverse of serialization for both formats: the
    /// serialized text survives a parse/serialize round trip byte for byte,
    /// and re-parsing with the original label table reproduces the values.
    #[test]
    fn formats_roundtrip(seed in 0u64..500) {
        let inst = common::random_instance(seed);
        // The generated instance uses label ids below 8 directly (vertex
        // labels then edge labels); name them in id order so the table
        // lines up.
        let mut labels = LabelInterner::new();
        for i in 0..8 {
            labels.intern(&format!("l{}", i));
        }
        let text = io::serialize_stream(&inst.stream, &labels);
        let mut relabel = labels.clone();
        let parsed = io::parse_stream_str(&text, &mut relabel).unwrap();
        prop_assert_eq!(&inst.stream, &parsed);
        let mut fresh = LabelInterner::new();
        let reparsed = io::parse_stream_str(&text, &mut fresh).unwrap();
        prop_assert_eq!(io::serialize_stream(&reparsed, &fresh), text);

        let qtext = io::serialize_query(&inst.query, &labels);
        let mut relabel_q = labels.clone();
        let qparsed = io::parse_query_str(&qtext, &mut relabel_q).unwrap();
        prop_assert_eq!(&inst.query, &qparsed);
        let mut fresh_q = LabelInterner::new();
        let qreparsed = io::parse_query_str(&qtext, &mut fresh_q).unwrap();
        prop_assert_eq!(io::serialize_query(&qreparsed, &fresh_q), qtext);
    }
}
