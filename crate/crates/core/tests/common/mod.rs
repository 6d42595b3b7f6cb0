//! Shared fixtures: the worked demo instance and the seeded random corpus.

#![allow(dead_code)]

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tcmatch_core::engine::{EngineState, MatchReport, QueryPlan};
use tcmatch_core::io::{self, TimingMode};
use tcmatch_core::model::{LabelInterner, QueryGraph, SlidingWindow, StreamEdge};

/// Ten-edge demo stream. One full match of the demo query assembles by
/// t=8 and dies at t=10 when its oldest edge leaves a width-9 window.
pub const DEMO_STREAM: &str = "\
#stream v1
1 7 e 8 f
2 9 f 10 a
3 8 f 3 a
4 3 a 4 b
5 5 c 8 f
6 6 c 11 b
7 5 c 4 b
8 7 e 3 a
9 3 a 12 b
10 13 e 14 f
";

/// Six-edge demo query over five vertices with two timing chains:
/// e3 < e1 < e2 and e6 < e5 < e4.
pub const DEMO_QUERY: &str = "\
v 1 e
v 2 f
v 3 a
v 4 b
v 5 c
e 1 5 4
e 2 1 3
e 3 5 2
e 4 3 4
e 5 2 3
e 6 1 2
t 3 < 1
t 1 < 2
t 6 < 5
t 5 < 4
";

pub fn demo() -> (Vec<StreamEdge>, QueryGraph, LabelInterner) {
    let mut labels = LabelInterner::new();
    let stream = io::parse_stream_str(DEMO_STREAM, &mut labels).expect("demo stream");
    let query = io::parse_query_str(DEMO_QUERY, &mut labels).expect("demo query");
    (stream, query, labels)
}

pub fn demo_plan() -> (Vec<StreamEdge>, Arc<QueryPlan>) {
    let (stream, query, _) = demo();
    (stream, Arc::new(QueryPlan::compile(query).expect("demo plan")))
}

/// Sequential replay collecting reports; returns the engine still holding
/// the final window state.
pub fn replay(
    plan: &Arc<QueryPlan>,
    edges: &[StreamEdge],
    width: u64,
) -> (EngineState, SlidingWindow, Vec<MatchReport>) {
    let engine = EngineState::new(Arc::clone(plan));
    let mut window = SlidingWindow::new(width);
    let mut reports = Vec::new();
    for &e in edges {
        for ex in window.expire(e.timestamp).expect("monotone stream") {
            engine.on_expire(ex).expect("expire");
        }
        reports.extend(engine.on_insert(e).expect("insert"));
        window.push(e).expect("push");
    }
    (engine, window, reports)
}

/// One seeded random instance: a stream of up to 200 edges over at most 6
/// labels with occasional equal timestamps, plus a query generated from it.
pub struct Instance {
    pub stream: Vec<StreamEdge>,
    pub query: QueryGraph,
    pub width: u64,
}

pub fn random_instance(seed: u64) -> Instance {
    random_instance_sized(seed, 40, 200, 24)
}

/// Larger-stream variant used by the long concurrency stress.
pub fn big_instance(seed: u64) -> Instance {
    random_instance_sized(seed, 1000, 1000, 48)
}

fn random_instance_sized(seed: u64, min_edges: usize, max_edges: usize, max_vertices: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed);
    let n_edges = rng.random_range(min_edges..=max_edges);
    let n_labels = rng.random_range(2..=6u32);
    let n_vertices = rng.random_range(8..=max_vertices);
    // Labels are fixed per vertex id so matches can actually repeat.
    let vertex_label: Vec<u32> = (0..n_vertices).map(|_| rng.random_range(0..n_labels)).collect();
    // A slice of the stream carries edge labels, so generated queries
    // constrain them too.
    let edge_labeled = rng.random_bool(0.4);
    let mut stream = Vec::with_capacity(n_edges);
    let mut t = 1i64;
    for seq in 1..=n_edges as u64 {
        // Occasional equal timestamps exercise the seq tiebreak.
        if rng.random_bool(0.8) {
            t += rng.random_range(1..=2);
        }
        let src = rng.random_range(0..n_vertices);
        let mut dst = rng.random_range(0..n_vertices);
        while dst == src {
            dst = rng.random_range(0..n_vertices);
        }
        let edge_label = (edge_labeled && rng.random_bool(0.5))
            .then(|| 6 + rng.random_range(0..2u32));
        stream.push(StreamEdge {
            seq,
            timestamp: t,
            src_id: src,
            dst_id: dst,
            src_label: vertex_label[src as usize],
            dst_label: vertex_label[dst as usize],
            edge_label,
        });
    }
    let size = rng.random_range(2..=6);
    let mode = match seed % 3 {
        0 => TimingMode::Full,
        1 => TimingMode::Empty,
        _ => TimingMode::Random,
    };
    let query = io::generate_query(&stream, size, mode, seed.wrapping_mul(7919))
        .expect("random query");
    let width = [5u64, 9, 20][((seed / 3) % 3) as usize];
    Instance {
        stream,
        query,
        width,
    }
}

/// One report's identity: the assignment's canonical key plus the
/// detection point.
pub type ReportKey = (Vec<(usize, u64)>, (i64, u64));

/// Multiset identity of a report list.
pub fn report_multiset(reports: &[MatchReport]) -> Vec<ReportKey> {
    let mut v: Vec<_> = reports.iter().map(MatchReport::identity).collect();
    v.sort();
    v
}

/// Randomized insert/expire stress of one match-store tree against a plain
/// per-level path store, with multiset path equality asserted at every step
/// and every level. Expiry pressure keeps the live population bounded so
/// the per-step comparison stays cheap.
pub fn shadow_stress(total_ops: usize, seed: u64) {
    use tcmatch_core::model::Timestamp;
    use tcmatch_core::mstree::{MsTree, NodeRef, Payload};

    const DEPTH: usize = 4;
    const TARGET_LIVE: usize = 250;

    fn edge(seq: u64) -> StreamEdge {
        StreamEdge {
            seq,
            timestamp: seq as Timestamp,
            src_id: seq,
            dst_id: seq + 1,
            src_label: 0,
            dst_label: 0,
            edge_label: None,
        }
    }

    struct Shadow {
        levels: Vec<Vec<Vec<u64>>>,
    }

    impl Shadow {
        fn level_multiset(&self, level: usize) -> Vec<Vec<u64>> {
            let mut v = self.levels[level - 1].clone();
            v.sort();
            v
        }
    }

    fn tree_level_multiset(tree: &MsTree, level: usize) -> Vec<Vec<u64>> {
        let mut v: Vec<Vec<u64>> = tree
            .level_nodes(level)
            .into_iter()
            .map(|n| {
                tree.path(n)
                    .unwrap()
                    .into_iter()
                    .map(|p| p.as_edge().unwrap().seq)
                    .collect()
            })
            .collect();
        v.sort();
        v
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tree = MsTree::new(DEPTH);
    let mut shadow = Shadow {
        levels: vec![Vec::new(); DEPTH],
    };
    let mut alive: Vec<Vec<(NodeRef, Vec<u64>)>> = vec![Vec::new(); DEPTH];
    let mut next_seq = 0u64;
    let mut live_seqs: Vec<u64> = Vec::new();

    for op in 0..total_ops {
        let pressure = live_seqs.len() as f64 / TARGET_LIVE as f64;
        let do_insert =
            live_seqs.is_empty() || rng.random_bool((1.0 - pressure * 0.5).clamp(0.2, 0.95));
        if do_insert {
            next_seq += 1;
            let seq = next_seq;
            let mut lvl = rng.random_range(0..DEPTH);
            while lvl > 0 && alive[lvl - 1].is_empty() {
                lvl -= 1;
            }
            let (parent, ppath) = if lvl == 0 {
                (None, Vec::new())
            } else {
                let (n, p) = &alive[lvl - 1][rng.random_range(0..alive[lvl - 1].len())];
                (Some(*n), p.clone())
            };
            let level = ppath.len() + 1;
            let (node, created) = tree.attach(level, parent, Payload::Edge(edge(seq))).unwrap();
            assert!(created, "fresh seq can never be a duplicate");
            let mut path = ppath;
            path.push(seq);
            if !shadow.levels[level - 1].contains(&path) {
                shadow.levels[level - 1].push(path.clone());
            }
            alive[level - 1].push((node, path));
            live_seqs.push(seq);
        } else {
            let pick = rng.random_range(0..live_seqs.len());
            let seq = live_seqs.swap_remove(pick);
            let level =
                (1..=DEPTH).find(|&l| alive[l - 1].iter().any(|(_, p)| p.last() == Some(&seq)));
            match level {
                Some(level) => {
                    let stats = tree.delete_expired(seq, level).unwrap();
                    for lv in &mut shadow.levels {
                        lv.retain(|p| !p.contains(&seq));
                    }
                    for lv in alive.iter_mut() {
                        lv.retain(|(_, p)| !p.contains(&seq));
                    }
                    assert_eq!(stats.visited, stats.removed, "op {}", op);
                }
                None => {
                    let stats = tree.delete_expired(seq, 1).unwrap();
                    assert_eq!(stats.removed, 0, "op {}", op);
                }
            }
        }
        for level in 1..=DEPTH {
            assert_eq!(
                tree_level_multiset(&tree, level),
                shadow.level_multiset(level),
                "divergence at op {} level {}",
                op,
                level
            );
        }
    }
    // The path/level bijection makes node count equal stored match count,
    // which never exceeds the shadow's stored path entries.
    let total_paths: usize = (1..=DEPTH).map(|l| shadow.level_multiset(l).len()).sum();
    assert_eq!(tree.alive_count() as usize, total_paths);
    let shadow_edges: usize = (1..=DEPTH)
        .map(|l| shadow.level_multiset(l).iter().map(Vec::len).sum::<usize>())
        .sum();
    assert!(tree.alive_count() as usize <= shadow_edges);
}
