//! Per-transaction access traces.
//!
//! Every insert or expiry is compiled into the worst-case ordered list of
//! item accesses it can perform (assuming every join produces results).
//! The list doubles as the transaction's lock plan: read steps take shared
//! locks, mutation steps exclusive ones. When a join comes up empty the
//! remaining steps still acquire and immediately release their locks so
//! that later transactions' head-of-queue conditions are eventually met.

use crate::model::StreamEdge;

use super::{ItemId, ListRef, QueryPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LockMode {
    Shared,
    Exclusive,
}

/// One elementary operation over one expansion-list item.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    /// Store the edge in a singleton subquery's candidate list; completes
    /// the subquery.
    CandInsert { sub: usize },
    /// Attach the edge under the tree root (position 1 of a multi-edge
    /// subquery).
    SubFirstInsert { sub: usize },
    /// Read item `pos` (1-based) of the subquery list and stage extensions
    /// of its matches by the incoming edge.
    SubRead { sub: usize, pos: usize },
    /// Attach the staged extensions at item `pos` (1-based).
    SubInsert { sub: usize, pos: usize },
    /// Read the global item below `sub`'s position and stage joins with the
    /// new subquery matches.
    GlobalSeedRead { sub: usize },
    /// Attach the staged joins at the global item of `sub`'s position.
    GlobalSeedInsert { sub: usize },
    /// Read all matches of subquery `sub` (its last item) and stage joins
    /// with the current global delta.
    SubOmegaRead { sub: usize },
    /// Attach the staged joins at global position `level` (1-based).
    GlobalInsert { level: usize },
    /// Remove the expired edge from a singleton subquery's candidate list.
    CandDelete { sub: usize },
    /// Remove expired paths at item `level` of the subquery list.
    SubDelete { sub: usize, level: usize },
    /// Placeholder for the aliased first global item during an expiry scan;
    /// content was already handled by the subquery sweep.
    GlobalDeleteAlias,
    /// Remove expired paths at global position `level` during the scan
    /// started for subquery `phase`.
    GlobalDelete { level: usize, phase: usize },
}

#[derive(Debug, Clone, Copy)]
pub struct Step {
    pub at: ListRef,
    pub item: ItemId,
    pub mode: LockMode,
    pub action: Action,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TxnKind {
    Insert,
    Delete,
}

/// A transaction: the triggering edge plus its ordered access trace.
#[derive(Debug, Clone)]
pub struct TxnScript {
    pub kind: TxnKind,
    pub edge: StreamEdge,
    pub steps: Vec<Step>,
}

impl TxnScript {
    /// The lock plan, in acquisition order.
    pub fn lock_requests(&self) -> Vec<(ItemId, LockMode)> {
        self.steps.iter().map(|s| (s.item, s.mode)).collect()
    }
}

fn step(plan: &QueryPlan, list: u8, idx: usize, mode: LockMode, action: Action) -> Step {
    let at = ListRef {
        list,
        idx: idx as u8,
    };
    Step {
        at,
        item: plan.items().resolve(at),
        mode,
        action,
    }
}

/// Builds the insertion trace for an incoming edge, or `None` when the edge
/// matches no query edge and is dropped before any storage.
pub fn insert_script(plan: &QueryPlan, sigma: StreamEdge) -> Option<TxnScript> {
    let matched = plan.query().matching_edges(&sigma);
    if matched.is_empty() {
        return None;
    }
    let k = plan.k();
    let mut steps = Vec::new();
    for &eps in &matched {
        let (i, j) = plan.dispatch(eps);
        let m = plan.sub_len(i);
        let si = i + 1; // 1-based subquery position
        if m == 1 {
            steps.push(step(plan, si as u8, 1, LockMode::Exclusive, Action::CandInsert { sub: i }));
        } else if j == 0 {
            steps.push(step(plan, si as u8, 1, LockMode::Exclusive, Action::SubFirstInsert { sub: i }));
        } else {
            steps.push(step(plan, si as u8, j, LockMode::Shared, Action::SubRead { sub: i, pos: j }));
            steps.push(step(plan, si as u8, j + 1, LockMode::Exclusive, Action::SubInsert { sub: i, pos: j + 1 }));
        }
        if j + 1 == m && k >= 2 {
            if i >= 1 {
                steps.push(step(plan, 0, si - 1, LockMode::Shared, Action::GlobalSeedRead { sub: i }));
                steps.push(step(plan, 0, si, LockMode::Exclusive, Action::GlobalSeedInsert { sub: i }));
            }
            for x in (i + 1)..k {
                steps.push(step(plan, (x + 1) as u8, plan.sub_len(x), LockMode::Shared, Action::SubOmegaRead { sub: x }));
                steps.push(step(plan, 0, x + 1, LockMode::Exclusive, Action::GlobalInsert { level: x + 1 }));
            }
        }
    }
    Some(TxnScript {
        kind: TxnKind::Insert,
        edge: sigma,
        steps,
    })
}

/// Builds the expiry trace for an edge leaving the window, or `None` when
/// the edge matches no query edge.
pub fn delete_script(plan: &QueryPlan, sigma: StreamEdge) -> Option<TxnScript> {
    let matched = plan.query().matching_edges(&sigma);
    if matched.is_empty() {
        return None;
    }
    let k = plan.k();
    let mut subs: Vec<usize> = matched.iter().map(|&e| plan.dispatch(e).0).collect();
    subs.sort_unstable();
    subs.dedup();
    let mut steps = Vec::new();
    for &i in &subs {
        let m = plan.sub_len(i);
        let si = i + 1;
        if m == 1 {
            steps.push(step(plan, si as u8, 1, LockMode::Exclusive, Action::CandDelete { sub: i }));
        } else {
            for level in 1..=m {
                steps.push(step(plan, si as u8, level, LockMode::Exclusive, Action::SubDelete { sub: i, level }));
            }
        }
        if k >= 2 {
            for level in si..=k {
                let action = if level == 1 {
                    Action::GlobalDeleteAlias
                } else {
                    Action::GlobalDelete { level, phase: si }
                };
                steps.push(step(plan, 0, level, LockMode::Exclusive, action));
            }
        }
    }
    Some(TxnScript {
        kind: TxnKind::Delete,
        edge: sigma,
        steps,
    })
}
