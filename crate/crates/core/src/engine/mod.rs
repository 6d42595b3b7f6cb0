//! The incremental matcher: expansion lists over a TC decomposition, the
//! insert/expire maintenance algorithms, and the stores behind them.
//!
//! A compiled [`QueryPlan`] assigns every query edge one position in one
//! TC-subquery. Each subquery with `m` edges owns an expansion list of `m`
//! items, where item `j` holds all live matches of the sequence's length-`j`
//! prefix; a global list over the join order holds the cross-subquery join
//! results, with item `i` covering the union of the first `i` subqueries.
//! Item `1` of the global list is the last item of the first subquery's
//! list — same content, same lock — so it is aliased rather than stored.
//!
//! The default store compresses every list into a match-store tree
//! ([`crate::mstree`]); [`flat`] keeps every match as its own edge vector
//! instead, which is the uncompressed baseline used for space comparisons.

pub mod exec;
pub mod flat;
pub mod script;

use std::fmt;

use thiserror::Error;

use crate::analysis::{
    self, AnalysisError, CostEstimate, TcDecomposition, DEFAULT_ENUMERATION_CAP,
};
use crate::model::{
    compute_closure, ModelError, PartialMatch, QueryGraph, StreamEdge, Timestamp, TimingClosure,
};

pub use exec::{EngineError, EngineState, ExpireStats, TxnScratch};
pub use flat::FlatEngine;
pub use script::{insert_script, delete_script, Action, LockMode, Step, TxnKind, TxnScript};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

/// Logical position of an expansion-list item: `list` 0 is the global list,
/// `list >= 1` the subquery lists; `idx` is 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ListRef {
    pub list: u8,
    pub idx: u8,
}

impl fmt::Display for ListRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}^{}", self.list, self.idx)
    }
}

/// Dense id of a lockable item. The global list's first position resolves
/// to the first subquery's last item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ItemId(pub u32);

#[derive(Debug, Clone)]
pub struct ItemTable {
    sub_items: Vec<Vec<ItemId>>,
    global_items: Vec<ItemId>,
    count: usize,
}

impl ItemTable {
    fn build(sub_lens: &[usize]) -> Self {
        let mut next = 0u32;
        let sub_items: Vec<Vec<ItemId>> = sub_lens
            .iter()
            .map(|&m| {
                (0..m)
                    .map(|_| {
                        let id = ItemId(next);
                        next += 1;
                        id
                    })
                    .collect()
            })
            .collect();
        let k = sub_lens.len();
        let mut global_items = Vec::new();
        if k >= 2 {
            // Position 1 aliases the first subquery's last item.
            global_items.push(*sub_items[0].last().expect("non-empty subquery"));
            for _ in 2..=k {
                global_items.push(ItemId(next));
                next += 1;
            }
        }
        ItemTable {
            sub_items,
            global_items,
            count: next as usize,
        }
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn resolve(&self, at: ListRef) -> ItemId {
        let idx = at.idx as usize;
        if at.list == 0 {
            self.global_items[idx - 1]
        } else {
            self.sub_items[at.list as usize - 1][idx - 1]
        }
    }
}

/// A compiled query: closure, join-ordered decomposition, per-edge dispatch,
/// and the lockable-item layout.
#[derive(Debug, Clone)]
pub struct QueryPlan {
    query: QueryGraph,
    closure: TimingClosure,
    /// Join-ordered timing sequences, dense edge indices.
    subqueries: Vec<Vec<usize>>,
    /// Dense edge index -> (subquery position in join order, position in
    /// its timing sequence), both 0-based.
    dispatch: Vec<(usize, usize)>,
    items: ItemTable,
    tcsub_count: usize,
    cost: CostEstimate,
}

/// How to order the decomposition for joining. The joint-number heuristic
/// is the default; the seeded-random variant exists for join-order
/// ablations and correctness tests, since results never depend on the
/// order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JoinOrderMode {
    JointNumber,
    SeededRandom(u64),
}

impl QueryPlan {
    pub fn compile(query: QueryGraph) -> Result<Self, PlanError> {
        Self::compile_with(query, DEFAULT_ENUMERATION_CAP, JoinOrderMode::JointNumber)
    }

    pub fn compile_with_cap(query: QueryGraph, cap: usize) -> Result<Self, PlanError> {
        Self::compile_with(query, cap, JoinOrderMode::JointNumber)
    }

    pub fn compile_with(
        query: QueryGraph,
        cap: usize,
        order: JoinOrderMode,
    ) -> Result<Self, PlanError> {
        let closure = compute_closure(&query)?;
        let tcsub = analysis::enumerate_tc_subqueries(&query, &closure, cap)?;
        let tcsub_count = tcsub.len();
        let decomposition = analysis::greedy_decompose(&tcsub, &query);
        let ordered = match order {
            JoinOrderMode::JointNumber => analysis::join_order(&decomposition, &query, &closure)?,
            JoinOrderMode::SeededRandom(seed) => {
                analysis::random_prefix_connected_order(&decomposition, &query, seed)?
            }
        };
        let cost = CostEstimate::new(&query, ordered.k());
        let subqueries: Vec<Vec<usize>> =
            ordered.subqueries.iter().map(|s| s.0.clone()).collect();
        let mut dispatch = vec![(usize::MAX, usize::MAX); query.edge_count()];
        for (i, seq) in subqueries.iter().enumerate() {
            for (j, &e) in seq.iter().enumerate() {
                dispatch[e] = (i, j);
            }
        }
        debug_assert!(dispatch.iter().all(|&(i, _)| i != usize::MAX));
        let items = ItemTable::build(&subqueries.iter().map(Vec::len).collect::<Vec<_>>());
        Ok(QueryPlan {
            query,
            closure,
            subqueries,
            dispatch,
            items,
            tcsub_count,
            cost,
        })
    }

    pub fn query(&self) -> &QueryGraph {
        &self.query
    }

    pub fn closure(&self) -> &TimingClosure {
        &self.closure
    }

    pub fn k(&self) -> usize {
        self.subqueries.len()
    }

    pub fn subqueries(&self) -> &[Vec<usize>] {
        &self.subqueries
    }

    pub fn sub_len(&self, i: usize) -> usize {
        self.subqueries[i].len()
    }

    /// Dispatch position of a dense edge index.
    pub fn dispatch(&self, e: usize) -> (usize, usize) {
        self.dispatch[e]
    }

    pub fn items(&self) -> &ItemTable {
        &self.items
    }

    pub fn tcsub_count(&self) -> usize {
        self.tcsub_count
    }

    pub fn cost(&self) -> &CostEstimate {
        &self.cost
    }

    pub fn decomposition(&self) -> TcDecomposition {
        TcDecomposition {
            subqueries: self
                .subqueries
                .iter()
                .map(|s| analysis::TimingSequence(s.clone()))
                .collect(),
        }
    }

    /// User-facing edge numbers of a dense-index sequence.
    pub fn edge_nums(&self, seq: &[usize]) -> Vec<u32> {
        seq.iter().map(|&e| self.query.edges()[e].num).collect()
    }

    /// Text dump of the decomposition, timing sequences, join order, item
    /// layout, and cost estimate.
    pub fn describe(&self) -> String {
        use std::fmt::Write;
        let q = &self.query;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "query: {} edges, {} vertices, {} declared timing pairs",
            q.edge_count(),
            q.vertex_count(),
            q.timing().len()
        );
        let _ = writeln!(out, "tcsub_count: {}", self.tcsub_count);
        let _ = writeln!(out, "k: {}", self.k());
        let _ = writeln!(out, "decomposition:");
        for (i, seq) in self.subqueries.iter().enumerate() {
            let names: Vec<String> = self
                .edge_nums(seq)
                .iter()
                .map(|n| format!("e{}", n))
                .collect();
            let _ = writeln!(out, "  Q{}: {{{}}}", i + 1, names.join(","));
        }
        let _ = writeln!(out, "term_labels: {}", self.cost.d);
        let _ = writeln!(
            out,
            "expected_join_ops: {} (~{:.4})",
            self.cost.join_ops,
            self.cost.join_ops.to_f64()
        );
        let mut names = Vec::new();
        for (i, seq) in self.subqueries.iter().enumerate() {
            for j in 1..=seq.len() {
                names.push(format!("L{}^{}", i + 1, j));
            }
        }
        if self.k() >= 2 {
            for l in 2..=self.k() {
                names.push(format!("L0^{}", l));
            }
            names.push(format!("(L0^1 = L1^{})", self.sub_len(0)));
        }
        let _ = writeln!(out, "items: {}", names.join(" "));
        out
    }
}

/// A completed match together with the order key of the edge whose arrival
/// completed it.
#[derive(Debug, Clone)]
pub struct MatchReport {
    pub assignment: PartialMatch,
    pub detected_at: (Timestamp, u64),
}

impl MatchReport {
    pub fn new(assignment: PartialMatch, completing: &StreamEdge) -> Self {
        debug_assert!(assignment
            .assignments()
            .all(|(_, s)| s.order_key() <= completing.order_key()));
        MatchReport {
            assignment,
            detected_at: completing.order_key(),
        }
    }

    /// One line per report: `t=<ts> seq=<seq> match=<edge-num>:<stream-seq>,...`
    /// in ascending edge-number order.
    pub fn format(&self, plan: &QueryPlan) -> String {
        let mut parts: Vec<(u32, u64)> = self
            .assignment
            .assignments()
            .map(|(e, s)| (plan.query().edges()[e].num, s.seq))
            .collect();
        parts.sort_unstable();
        let body: Vec<String> = parts.iter().map(|(n, s)| format!("{}:{}", n, s)).collect();
        format!(
            "t={} seq={} match={}",
            self.detected_at.0,
            self.detected_at.1,
            body.join(",")
        )
    }

    /// Multiset identity used by the consistency tests: the assignment's
    /// canonical key plus the detection point.
    pub fn identity(&self) -> (Vec<(usize, u64)>, (Timestamp, u64)) {
        (self.assignment.canonical_key(), self.detected_at)
    }
}
