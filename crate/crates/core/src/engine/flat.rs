//! Uncompressed expansion-list store: every partial match is kept as its
//! own assignment vector, with no prefix sharing and no cross-references.
//! This is the baseline the compressed store is measured against; it runs
//! the same insert/expire algorithm sequentially and must produce the same
//! reports.

use std::collections::HashSet;
use std::sync::Arc;

use crate::model::{PartialMatch, StreamEdge};

use super::{MatchReport, QueryPlan};

#[derive(Default)]
struct FlatItem {
    matches: Vec<PartialMatch>,
    keys: HashSet<Vec<(usize, u64)>>,
}

impl FlatItem {
    fn insert(&mut self, m: PartialMatch) -> bool {
        if self.keys.insert(m.canonical_key()) {
            self.matches.push(m);
            true
        } else {
            false
        }
    }

    fn remove_containing(&mut self, seq: u64) -> usize {
        let before = self.matches.len();
        self.matches.retain(|m| !m.contains_edge(seq));
        self.keys.retain(|k| !k.iter().any(|&(_, s)| s == seq));
        before - self.matches.len()
    }

    fn stored_edges(&self) -> usize {
        self.matches.iter().map(|m| m.assigned_len()).sum()
    }
}

/// Sequential engine over flat per-item match lists.
pub struct FlatEngine {
    plan: Arc<QueryPlan>,
    /// `sub_items[i][j]` holds the matches of subquery `i`'s length-`j+1`
    /// prefix.
    sub_items: Vec<Vec<FlatItem>>,
    /// Global items for 1-based positions `2..=k`; position 1 aliases the
    /// first subquery's last item and stores nothing of its own.
    global_items: Vec<FlatItem>,
}

impl FlatEngine {
    pub fn new(plan: Arc<QueryPlan>) -> Self {
        let sub_items = plan
            .subqueries()
            .iter()
            .map(|seq| (0..seq.len()).map(|_| FlatItem::default()).collect())
            .collect();
        let globals = if plan.k() >= 2 { plan.k() - 1 } else { 0 };
        FlatEngine {
            plan,
            sub_items,
            global_items: (0..globals).map(|_| FlatItem::default()).collect(),
        }
    }

    pub fn plan(&self) -> &Arc<QueryPlan> {
        &self.plan
    }

    fn global_matches(&self, pos: usize) -> &[PartialMatch] {
        if pos == 1 {
            let last = self.sub_items[0].last().expect("non-empty subquery");
            &last.matches
        } else {
            &self.global_items[pos - 2].matches
        }
    }

    pub fn on_insert(&mut self, sigma: StreamEdge) -> Vec<MatchReport> {
        let plan = Arc::clone(&self.plan);
        let q = plan.query();
        let tc = plan.closure();
        let k = plan.k();
        let mut reports = Vec::new();
        for eps in q.matching_edges(&sigma) {
            let (i, j) = plan.dispatch(eps);
            let m = plan.sub_len(i);
            let delta: Vec<PartialMatch> = if j == 0 {
                PartialMatch::singleton(q, tc, eps, sigma).into_iter().collect()
            } else {
                self.sub_items[i][j - 1]
                    .matches
                    .iter()
                    .filter_map(|g| g.extend(q, tc, eps, sigma))
                    .collect()
            };
            let mut delta_new = Vec::new();
            for g in delta {
                if self.sub_items[i][j].insert(g.clone()) {
                    delta_new.push(g);
                }
            }
            if j + 1 < m || delta_new.is_empty() {
                continue;
            }
            if k == 1 {
                reports.extend(delta_new.into_iter().map(|g| MatchReport::new(g, &sigma)));
                continue;
            }
            // Seed the global list and propagate rightward.
            let mut delta0 = if i == 0 {
                delta_new
            } else {
                let joined: Vec<PartialMatch> = self
                    .global_matches(i)
                    .iter()
                    .flat_map(|g| delta_new.iter().filter_map(move |d| g.merge(d, tc)))
                    .collect();
                let mut fresh = Vec::new();
                for g in joined {
                    if self.global_items[i - 1].insert(g.clone()) {
                        fresh.push(g);
                    }
                }
                fresh
            };
            if i + 1 == k && i != 0 {
                reports.extend(delta0.iter().cloned().map(|g| MatchReport::new(g, &sigma)));
                continue;
            }
            for x in (i + 1)..k {
                if delta0.is_empty() {
                    break;
                }
                let omega: Vec<PartialMatch> =
                    self.sub_items[x].last().expect("non-empty").matches.clone();
                let joined: Vec<PartialMatch> = delta0
                    .iter()
                    .flat_map(|d| omega.iter().filter_map(move |g| d.merge(g, tc)))
                    .collect();
                let mut fresh = Vec::new();
                for g in joined {
                    if self.global_items[x - 1].insert(g.clone()) {
                        fresh.push(g);
                    }
                }
                delta0 = fresh;
                if x + 1 == k {
                    reports.extend(delta0.iter().cloned().map(|g| MatchReport::new(g, &sigma)));
                }
            }
        }
        reports
    }

    pub fn on_expire(&mut self, sigma: StreamEdge) -> usize {
        let plan = Arc::clone(&self.plan);
        let q = plan.query();
        let k = plan.k();
        let mut subs: Vec<usize> = q
            .matching_edges(&sigma)
            .into_iter()
            .map(|e| plan.dispatch(e).0)
            .collect();
        subs.sort_unstable();
        subs.dedup();
        let mut removed = 0usize;
        for i in subs {
            let m = plan.sub_len(i);
            let positions: Vec<usize> = q
                .matching_edges(&sigma)
                .into_iter()
                .filter_map(|e| {
                    let (s, j) = plan.dispatch(e);
                    (s == i).then_some(j)
                })
                .collect();
            let mut full_died = false;
            for j in 0..m {
                let gone = self.sub_items[i][j].remove_containing(sigma.seq);
                removed += gone;
                if j + 1 == m && gone > 0 {
                    full_died = true;
                }
                if gone == 0 && positions.iter().all(|&p| p <= j) {
                    break;
                }
            }
            if full_died && k >= 2 {
                for pos in (i + 1).max(2)..=k {
                    let gone = self.global_items[pos - 2].remove_containing(sigma.seq);
                    removed += gone;
                    if gone == 0 {
                        break;
                    }
                }
            }
        }
        removed
    }

    pub fn current_matches(&self) -> Vec<PartialMatch> {
        if self.plan.k() == 1 {
            self.sub_items[0].last().expect("non-empty").matches.clone()
        } else {
            self.global_matches(self.plan.k()).to_vec()
        }
    }

    /// Stored edges across all items; the flat analogue of the compressed
    /// store's node count.
    pub fn stored_edge_count(&self) -> usize {
        let subs: usize = self
            .sub_items
            .iter()
            .flat_map(|items| items.iter().map(FlatItem::stored_edges))
            .sum();
        let globals: usize = self.global_items.iter().map(FlatItem::stored_edges).sum();
        subs + globals
    }
}
