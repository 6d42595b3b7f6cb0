//! Step interpreter over the compressed stores.
//!
//! One [`EngineState`] owns every expansion-list store of a plan: one
//! match-store tree per multi-edge subquery, a candidate list per
//! single-edge subquery, and (for decompositions with at least two
//! subqueries) the global tree whose depth-`i` positions hold matches of
//! the first `i` subqueries. Global nodes reference subquery matches by
//! pointing at leaves of the subquery trees instead of copying edges; its
//! level-1 nodes are lazily created stubs that exist only while they have
//! children, since the first global item aliases the first subquery's last
//! item for reads.
//!
//! All mutation happens inside [`EngineState::perform`], which executes one
//! step of a transaction script. The sequential entry points run a whole
//! script inline; the concurrent runner in [`crate::sched`] interleaves
//! steps from many transactions under item locks, relying on the match-store
//! tree contract documented in [`crate::mstree`].

use std::cell::UnsafeCell;
use std::collections::BTreeMap;
use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use thiserror::Error;

use crate::model::{PartialMatch, StreamEdge};
use crate::mstree::{MsTree, NodeRef, Payload, PayloadKey, TreeError};

use super::script::{delete_script, insert_script, Action, Step, TxnScript};
use super::{MatchReport, QueryPlan};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("match-store tree: {0}")]
    Tree(#[from] TreeError),
    #[error("engine state corrupt: {0}")]
    Corrupt(&'static str),
}

/// Candidate list of a single-edge subquery: the live edges matching its
/// only query edge, keyed by arrival seq (iteration order equals arrival
/// order because seq is monotone). Access is guarded by the item lock of
/// the owning position, like a tree level.
pub struct CandList {
    inner: UnsafeCell<BTreeMap<u64, StreamEdge>>,
    len: AtomicUsize,
}

// SAFETY: mutation only under the owning item's exclusive lock.
unsafe impl Send for CandList {}
unsafe impl Sync for CandList {}

impl CandList {
    fn new() -> Self {
        CandList {
            inner: UnsafeCell::new(BTreeMap::new()),
            len: AtomicUsize::new(0),
        }
    }

    fn insert(&self, sigma: StreamEdge) {
        // SAFETY: exclusive item lock held by the caller.
        if unsafe { (*self.inner.get()).insert(sigma.seq, sigma) }.is_none() {
            self.len.fetch_add(1, Ordering::Relaxed);
        }
    }

    fn remove(&self, seq: u64) -> Option<StreamEdge> {
        // SAFETY: exclusive item lock held by the caller.
        let gone = unsafe { (*self.inner.get()).remove(&seq) };
        if gone.is_some() {
            self.len.fetch_sub(1, Ordering::Relaxed);
        }
        gone
    }

    fn edges(&self) -> Vec<StreamEdge> {
        // SAFETY: shared or exclusive item lock held by the caller.
        unsafe { (*self.inner.get()).values().copied().collect() }
    }

    pub fn len(&self) -> usize {
        self.len.load(Ordering::Relaxed)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

enum SubStore {
    Tree(MsTree),
    Cands(CandList),
}

#[derive(Debug, Clone, Copy)]
enum GParent {
    /// Level-2 attach under a (possibly not-yet-created) level-1 stub
    /// holding this subquery-match reference.
    Stub(Payload),
    Node(NodeRef),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum GlobalLeft {
    FromSub,
    FromNodes,
}

#[derive(Debug, Clone, Copy)]
enum Collected {
    Sub(usize, NodeRef),
    Global(NodeRef),
}

/// Removal accounting: `visited` counts unique nodes touched while
/// discovering expired paths, which the store keeps equal to the number it
/// removes (discovery goes through per-level payload indexes and child
/// maps, never level scans).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExpireStats {
    pub removed: usize,
    pub visited: usize,
}

/// Working state of one transaction as its steps execute.
#[derive(Default)]
pub struct TxnScratch {
    staged_sub: Vec<(Option<NodeRef>, PartialMatch)>,
    delta_sub: Vec<(Payload, PartialMatch)>,
    staged_global: Vec<(GParent, Payload, PartialMatch)>,
    delta_global: Vec<(NodeRef, PartialMatch)>,
    global_left: Option<GlobalLeft>,
    sub_frontier: Vec<NodeRef>,
    sub_active: bool,
    global_frontier: Vec<NodeRef>,
    global_active: bool,
    dead_refs: Vec<Vec<PayloadKey>>,
    collected: Vec<Collected>,
    stored_any: bool,
    pub reports: Vec<MatchReport>,
    pub stats: ExpireStats,
}

impl TxnScratch {
    pub fn new(plan: &QueryPlan) -> Self {
        TxnScratch {
            dead_refs: vec![Vec::new(); plan.k()],
            ..Default::default()
        }
    }

    fn begin_edge_section(&mut self) {
        self.staged_sub.clear();
        self.delta_sub.clear();
        self.staged_global.clear();
        self.delta_global.clear();
        self.global_left = None;
    }

    /// True if any step of the transaction stored something.
    pub fn stored_any(&self) -> bool {
        self.stored_any
    }
}

/// All expansion-list stores of one compiled plan.
pub struct EngineState {
    plan: Arc<QueryPlan>,
    subs: Vec<SubStore>,
    global: Option<MsTree>,
}

impl EngineState {
    pub fn new(plan: Arc<QueryPlan>) -> Self {
        let subs = plan
            .subqueries()
            .iter()
            .map(|seq| {
                if seq.len() == 1 {
                    SubStore::Cands(CandList::new())
                } else {
                    SubStore::Tree(MsTree::new(seq.len()))
                }
            })
            .collect();
        let global = if plan.k() >= 2 {
            Some(MsTree::new(plan.k()))
        } else {
            None
        };
        EngineState { plan, subs, global }
    }

    pub fn plan(&self) -> &Arc<QueryPlan> {
        &self.plan
    }

    fn tree(&self, sub: usize) -> Result<&MsTree, EngineError> {
        match &self.subs[sub] {
            SubStore::Tree(t) => Ok(t),
            SubStore::Cands(_) => Err(EngineError::Corrupt("expected tree store")),
        }
    }

    fn cands(&self, sub: usize) -> Result<&CandList, EngineError> {
        match &self.subs[sub] {
            SubStore::Cands(c) => Ok(c),
            SubStore::Tree(_) => Err(EngineError::Corrupt("expected candidate store")),
        }
    }

    fn global(&self) -> Result<&MsTree, EngineError> {
        self.global
            .as_ref()
            .ok_or(EngineError::Corrupt("no global list for k = 1"))
    }

    /// Match stored by a subquery-tree node (path of its level prefix).
    fn sub_prefix_match(&self, sub: usize, node: NodeRef) -> Result<PartialMatch, EngineError> {
        let tree = self.tree(sub)?;
        let path = tree.path(node)?;
        let seq = &self.plan.subqueries()[sub];
        let pairs = path.iter().enumerate().map(|(x, p)| {
            let edge = *p.as_edge().expect("subquery trees store edges");
            (seq[x], edge)
        });
        Ok(PartialMatch::from_pairs_unchecked(self.plan.query(), pairs))
    }

    /// Match referenced by a global-tree payload at 0-based subquery `sub`.
    fn resolve_sub_payload(&self, sub: usize, p: Payload) -> Result<PartialMatch, EngineError> {
        match p {
            Payload::Edge(sigma) => {
                let seq = &self.plan.subqueries()[sub];
                debug_assert_eq!(seq.len(), 1);
                Ok(PartialMatch::from_pairs_unchecked(
                    self.plan.query(),
                    [(seq[0], sigma)],
                ))
            }
            Payload::Sub { list, node } => {
                debug_assert_eq!(list as usize, sub + 1);
                self.sub_prefix_match(sub, node)
            }
        }
    }

    /// Combined match stored by a global-tree node: every path position
    /// resolves one subquery's match.
    fn global_match(&self, node: NodeRef) -> Result<PartialMatch, EngineError> {
        let g = self.global()?;
        let path = g.path(node)?;
        let mut acc = PartialMatch::empty(self.plan.query());
        for (x, p) in path.iter().enumerate() {
            let part = self.resolve_sub_payload(x, *p)?;
            acc = acc
                .merge(&part, self.plan.closure())
                .ok_or(EngineError::Corrupt("stored global path is inconsistent"))?;
        }
        Ok(acc)
    }

    /// All full matches of subquery `sub` with the payload that the global
    /// tree would use to reference each.
    fn sub_omega(&self, sub: usize) -> Result<Vec<(Payload, PartialMatch)>, EngineError> {
        match &self.subs[sub] {
            SubStore::Cands(c) => {
                let seq = &self.plan.subqueries()[sub];
                Ok(c
                    .edges()
                    .into_iter()
                    .map(|sigma| {
                        let m = PartialMatch::from_pairs_unchecked(
                            self.plan.query(),
                            [(seq[0], sigma)],
                        );
                        (Payload::Edge(sigma), m)
                    })
                    .collect())
            }
            SubStore::Tree(t) => {
                let last = t.depth();
                t.level_nodes(last)
                    .into_iter()
                    .map(|leaf| {
                        let m = self.sub_prefix_match(sub, leaf)?;
                        Ok((
                            Payload::Sub {
                                list: (sub + 1) as u16,
                                node: leaf,
                            },
                            m,
                        ))
                    })
                    .collect()
            }
        }
    }

    /// Executes one step of a transaction script.
    pub fn perform(
        &self,
        step: &Step,
        sigma: &StreamEdge,
        scratch: &mut TxnScratch,
    ) -> Result<(), EngineError> {
        let plan = &*self.plan;
        let q = plan.query();
        let tc = plan.closure();
        let k = plan.k();
        match step.action {
            Action::CandInsert { sub } => {
                scratch.begin_edge_section();
                let eps = plan.subqueries()[sub][0];
                let m = PartialMatch::singleton(q, tc, eps, *sigma)
                    .ok_or(EngineError::Corrupt("dispatched edge does not match"))?;
                self.cands(sub)?.insert(*sigma);
                scratch.stored_any = true;
                if k == 1 {
                    scratch.reports.push(MatchReport::new(m, sigma));
                } else {
                    scratch.delta_sub.push((Payload::Edge(*sigma), m));
                    scratch.global_left = Some(GlobalLeft::FromSub);
                }
            }
            Action::SubFirstInsert { sub } => {
                scratch.begin_edge_section();
                let (_, created) = self.tree(sub)?.attach(1, None, Payload::Edge(*sigma))?;
                scratch.stored_any |= created;
            }
            Action::SubRead { sub, pos } => {
                scratch.begin_edge_section();
                let eps = plan.subqueries()[sub][pos];
                let tree = self.tree(sub)?;
                for node in tree.level_nodes(pos) {
                    let prefix = self.sub_prefix_match(sub, node)?;
                    if let Some(ext) = prefix.extend(q, tc, eps, *sigma) {
                        scratch.staged_sub.push((Some(node), ext));
                    }
                }
            }
            Action::SubInsert { sub, pos } => {
                let tree = self.tree(sub)?;
                let last = pos == plan.sub_len(sub);
                for (parent, m) in std::mem::take(&mut scratch.staged_sub) {
                    let (node, created) = tree.attach(pos, parent, Payload::Edge(*sigma))?;
                    scratch.stored_any |= created;
                    if created && last {
                        if k == 1 {
                            scratch.reports.push(MatchReport::new(m, sigma));
                        } else {
                            scratch.delta_sub.push((
                                Payload::Sub {
                                    list: (sub + 1) as u16,
                                    node,
                                },
                                m,
                            ));
                        }
                    }
                }
                if last {
                    scratch.global_left = Some(GlobalLeft::FromSub);
                }
            }
            Action::GlobalSeedRead { sub } => {
                scratch.staged_global.clear();
                if scratch.delta_sub.is_empty() {
                    return Ok(());
                }
                let below = sub; // 1-based global position of the item read
                let left: Vec<(GParent, PartialMatch)> = if below == 1 {
                    self.sub_omega(0)?
                        .into_iter()
                        .map(|(p, m)| (GParent::Stub(p), m))
                        .collect()
                } else {
                    let g = self.global()?;
                    g.level_nodes(below)
                        .into_iter()
                        .map(|n| Ok((GParent::Node(n), self.global_match(n)?)))
                        .collect::<Result<_, EngineError>>()?
                };
                for (gp, gm) in &left {
                    for (sp, sm) in &scratch.delta_sub {
                        if let Some(merged) = gm.merge(sm, tc) {
                            scratch.staged_global.push((*gp, *sp, merged));
                        }
                    }
                }
            }
            Action::GlobalSeedInsert { sub } => {
                self.attach_global(sub + 1, sigma, scratch)?;
            }
            Action::SubOmegaRead { sub } => {
                scratch.staged_global.clear();
                let right = self.sub_omega(sub)?;
                match scratch.global_left {
                    Some(GlobalLeft::FromSub) => {
                        for (sp, sm) in &scratch.delta_sub {
                            for (rp, rm) in &right {
                                if let Some(merged) = sm.merge(rm, tc) {
                                    scratch.staged_global.push((GParent::Stub(*sp), *rp, merged));
                                }
                            }
                        }
                    }
                    Some(GlobalLeft::FromNodes) => {
                        for (gn, gm) in &scratch.delta_global {
                            for (rp, rm) in &right {
                                if let Some(merged) = gm.merge(rm, tc) {
                                    scratch.staged_global.push((GParent::Node(*gn), *rp, merged));
                                }
                            }
                        }
                    }
                    None => {}
                }
            }
            Action::GlobalInsert { level } => {
                self.attach_global(level, sigma, scratch)?;
            }
            Action::CandDelete { sub } => {
                scratch.sub_frontier.clear();
                if self.cands(sub)?.remove(sigma.seq).is_some() {
                    scratch.dead_refs[sub].push(PayloadKey::Edge(sigma.seq));
                    scratch.stats.removed += 1;
                    scratch.stats.visited += 1;
                }
            }
            Action::SubDelete { sub, level } => {
                if level == 1 {
                    scratch.sub_frontier.clear();
                    scratch.sub_active = true;
                }
                if !scratch.sub_active {
                    return Ok(());
                }
                let tree = self.tree(sub)?;
                let positions = self.matched_positions(sub, sigma);
                let mut targets: Vec<NodeRef> = Vec::new();
                if positions.contains(&level) {
                    targets.extend(tree.find_at_level(level, PayloadKey::Edge(sigma.seq)));
                }
                for &f in &scratch.sub_frontier {
                    targets.extend(tree.children_of(f)?);
                }
                dedup_refs(&mut targets);
                for &t in &targets {
                    tree.partial_remove(t)?;
                    scratch.collected.push(Collected::Sub(sub, t));
                }
                scratch.stats.removed += targets.len();
                scratch.stats.visited += targets.len();
                if level == plan.sub_len(sub) {
                    for &t in &targets {
                        scratch.dead_refs[sub].push(PayloadKey::Sub((sub + 1) as u16, t));
                    }
                }
                let extinct = targets.is_empty() && positions.iter().all(|&p| p <= level);
                scratch.sub_frontier = targets;
                if extinct {
                    scratch.sub_active = false;
                }
            }
            Action::GlobalDeleteAlias => {
                // Content lives in the first subquery's store and was swept
                // there; the lock acquisition is what matters at this item.
                scratch.global_frontier.clear();
                scratch.global_active = true;
            }
            Action::GlobalDelete { level, phase } => {
                if level == phase {
                    scratch.global_frontier.clear();
                    scratch.global_active = true;
                }
                if !scratch.global_active {
                    return Ok(());
                }
                let g = self.global()?;
                let mut targets: Vec<NodeRef> = Vec::new();
                if level == 2 && phase == 1 {
                    // Dead first-subquery matches take their stubs and every
                    // child with them.
                    for key in &scratch.dead_refs[0] {
                        for stub in g.find_at_level(1, *key) {
                            targets.extend(g.children_of(stub)?);
                            g.partial_remove(stub)?;
                            scratch.collected.push(Collected::Global(stub));
                            scratch.stats.removed += 1;
                            scratch.stats.visited += 1;
                        }
                    }
                }
                if level == phase && phase >= 2 {
                    for key in &scratch.dead_refs[phase - 1] {
                        targets.extend(g.find_at_level(level, *key));
                    }
                }
                for &f in &scratch.global_frontier {
                    targets.extend(g.children_of(f)?);
                }
                dedup_refs(&mut targets);
                for &t in &targets {
                    let parent = g.parent(t)?;
                    g.partial_remove(t)?;
                    scratch.collected.push(Collected::Global(t));
                    if level == 2 {
                        // A stub whose last child died goes too, so the
                        // compressed store never outgrows the flat one.
                        if let Some(p) = parent {
                            if g.state(p)? == crate::mstree::NodeState::Alive
                                && g.child_count(p)? == 0
                            {
                                g.partial_remove(p)?;
                                scratch.collected.push(Collected::Global(p));
                                scratch.stats.removed += 1;
                                scratch.stats.visited += 1;
                            }
                        }
                    }
                }
                scratch.stats.removed += targets.len();
                scratch.stats.visited += targets.len();
                let extinct = targets.is_empty() && level >= phase;
                scratch.global_frontier = targets;
                if extinct {
                    scratch.global_active = false;
                }
            }
        }
        Ok(())
    }

    fn attach_global(
        &self,
        level: usize,
        sigma: &StreamEdge,
        scratch: &mut TxnScratch,
    ) -> Result<(), EngineError> {
        let g = self.global()?;
        let k = self.plan.k();
        scratch.delta_global.clear();
        for (gp, child, merged) in std::mem::take(&mut scratch.staged_global) {
            let parent = match gp {
                GParent::Stub(p) => match g.root_child(p.key()) {
                    Some(n) => n,
                    None => g.attach(1, None, p)?.0,
                },
                GParent::Node(n) => n,
            };
            let (node, created) = g.attach(level, Some(parent), child)?;
            scratch.stored_any |= created;
            if created {
                if level == k {
                    scratch.reports.push(MatchReport::new(merged.clone(), sigma));
                }
                scratch.delta_global.push((node, merged));
            }
        }
        scratch.global_left = Some(GlobalLeft::FromNodes);
        Ok(())
    }

    /// 1-based positions of `sigma` within subquery `sub`.
    fn matched_positions(&self, sub: usize, sigma: &StreamEdge) -> Vec<usize> {
        self.plan
            .query()
            .matching_edges(sigma)
            .into_iter()
            .filter_map(|e| {
                let (i, j) = self.plan.dispatch(e);
                (i == sub).then_some(j + 1)
            })
            .collect()
    }

    /// Reclaims everything the script partially removed. Under concurrency
    /// this runs only after the transaction released its last item lock.
    pub fn finalize(&self, scratch: &mut TxnScratch) -> Result<(), EngineError> {
        for c in std::mem::take(&mut scratch.collected) {
            match c {
                Collected::Sub(sub, n) => self.tree(sub)?.finalize_remove(&[n])?,
                Collected::Global(n) => self.global()?.finalize_remove(&[n])?,
            }
        }
        Ok(())
    }

    /// Runs a whole script inline (no locks) and returns its scratch.
    pub fn run_script(&self, script: &TxnScript) -> Result<TxnScratch, EngineError> {
        let mut scratch = TxnScratch::new(&self.plan);
        for step in &script.steps {
            self.perform(step, &script.edge, &mut scratch)?;
        }
        self.finalize(&mut scratch)?;
        Ok(scratch)
    }

    /// Sequential insertion; edges matching no query edge are dropped.
    pub fn on_insert(&self, sigma: StreamEdge) -> Result<Vec<MatchReport>, EngineError> {
        match insert_script(&self.plan, sigma) {
            None => Ok(Vec::new()),
            Some(script) => Ok(self.run_script(&script)?.reports),
        }
    }

    /// Sequential expiry of an edge that just left the window.
    pub fn on_expire(&self, sigma: StreamEdge) -> Result<ExpireStats, EngineError> {
        match delete_script(&self.plan, sigma) {
            None => Ok(ExpireStats::default()),
            Some(script) => Ok(self.run_script(&script)?.stats),
        }
    }

    /// Stored matches of one subquery-list item: the live matches of the
    /// subquery's length-`level` prefix. Quiescent callers only.
    pub fn sub_level_matches(
        &self,
        sub: usize,
        level: usize,
    ) -> Result<Vec<PartialMatch>, EngineError> {
        match &self.subs[sub] {
            SubStore::Cands(c) => {
                let seq = &self.plan.subqueries()[sub];
                Ok(c
                    .edges()
                    .into_iter()
                    .map(|s| PartialMatch::from_pairs_unchecked(self.plan.query(), [(seq[0], s)]))
                    .collect())
            }
            SubStore::Tree(t) => t
                .level_nodes(level)
                .into_iter()
                .map(|n| self.sub_prefix_match(sub, n))
                .collect(),
        }
    }

    /// Stored matches of one global-list item (`level >= 2`): the live
    /// matches of the union of the first `level` subqueries. Quiescent
    /// callers only.
    pub fn global_level_matches(&self, level: usize) -> Result<Vec<PartialMatch>, EngineError> {
        let g = self.global()?;
        g.level_nodes(level)
            .into_iter()
            .map(|n| self.global_match(n))
            .collect()
    }

    /// Current full matches of the query. Callers must be quiescent (no
    /// in-flight transactions).
    pub fn current_matches(&self) -> Result<Vec<PartialMatch>, EngineError> {
        if self.plan.k() == 1 {
            Ok(self.sub_omega(0)?.into_iter().map(|(_, m)| m).collect())
        } else {
            let g = self.global()?;
            g.level_nodes(self.plan.k())
                .into_iter()
                .map(|n| self.global_match(n))
                .collect()
        }
    }

    /// True iff the edge cannot contribute to any future full match: for
    /// every query edge it matches, no live combination of stored prefix
    /// matches covers the edge's prerequisite subquery. Quiescent callers
    /// only.
    pub fn is_discardable(&self, sigma: &StreamEdge) -> Result<bool, EngineError> {
        for eps in self.plan.query().matching_edges(sigma) {
            if self.has_preq_support(eps, sigma)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Looks for one live match of the prerequisite subquery of `eps`
    /// assigning `eps` to `sigma`. The prerequisite set intersects every
    /// subquery in a prefix of its timing sequence (prerequisites are
    /// downward-closed along the chain), so each factor is exactly one
    /// stored item and the search is a join over stored lists.
    fn has_preq_support(&self, eps: usize, sigma: &StreamEdge) -> Result<bool, EngineError> {
        let plan = &*self.plan;
        let (i, j) = plan.dispatch(eps);
        let q = plan.query();
        let tc = plan.closure();
        let preq = tc.preq(eps);
        // Own-subquery side: prefix matches extended by sigma.
        let own: Vec<PartialMatch> = if j == 0 {
            PartialMatch::singleton(q, tc, eps, *sigma)
                .into_iter()
                .collect()
        } else {
            let tree = self.tree(i)?;
            tree.level_nodes(j)
                .into_iter()
                .filter_map(|n| {
                    self.sub_prefix_match(i, n)
                        .ok()
                        .and_then(|p| p.extend(q, tc, eps, *sigma))
                })
                .collect()
        };
        if own.is_empty() {
            return Ok(false);
        }
        let mut factors: Vec<Vec<PartialMatch>> = vec![own];
        for x in 0..plan.k() {
            if x == i {
                continue;
            }
            let seq = &plan.subqueries()[x];
            let p = seq.iter().take_while(|e| preq.contains(e)).count();
            debug_assert!(
                seq.iter().skip(p).all(|e| !preq.contains(e)),
                "prerequisites intersect a timing sequence in a prefix"
            );
            if p == 0 {
                continue;
            }
            let stored: Vec<PartialMatch> = match &self.subs[x] {
                SubStore::Cands(c) => c
                    .edges()
                    .into_iter()
                    .map(|s| PartialMatch::from_pairs_unchecked(q, [(seq[0], s)]))
                    .collect(),
                SubStore::Tree(t) => t
                    .level_nodes(p)
                    .into_iter()
                    .map(|n| self.sub_prefix_match(x, n))
                    .collect::<Result<_, _>>()?,
            };
            if stored.is_empty() {
                return Ok(false);
            }
            factors.push(stored);
        }
        fn search(
            acc: &PartialMatch,
            rest: &[Vec<PartialMatch>],
            tc: &crate::model::TimingClosure,
        ) -> bool {
            match rest.split_first() {
                None => true,
                Some((head, tail)) => head
                    .iter()
                    .any(|m| acc.merge(m, tc).is_some_and(|next| search(&next, tail, tc))),
            }
        }
        Ok(factors[0]
            .iter()
            .any(|m| search(m, &factors[1..], tc)))
    }

    /// Total stored partial matches across all items.
    pub fn stored_match_count(&self) -> usize {
        let mut total = 0usize;
        for s in &self.subs {
            total += match s {
                SubStore::Tree(t) => t.alive_count() as usize,
                SubStore::Cands(c) => c.len(),
            };
        }
        if let Some(g) = &self.global {
            total += g.alive_count() as usize - g.level_len(1);
        }
        total
    }

    /// Storage units held right now: one per tree node (edge or reference)
    /// plus one per candidate entry.
    pub fn node_count(&self) -> usize {
        let mut total = 0usize;
        for s in &self.subs {
            total += match s {
                SubStore::Tree(t) => t.alive_count() as usize,
                SubStore::Cands(c) => c.len(),
            };
        }
        if let Some(g) = &self.global {
            total += g.alive_count() as usize;
        }
        total
    }

    /// Debug dump of every store, for golden tests.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.subs.iter().enumerate() {
            out.push_str(&format!("# M{}\n", i + 1));
            match s {
                SubStore::Tree(t) => out.push_str(&t.dump()),
                SubStore::Cands(c) => {
                    for e in c.edges() {
                        out.push_str(&format!("1\t{}\t-\talive\n", e.seq));
                    }
                }
            }
        }
        if let Some(g) = &self.global {
            out.push_str("# M0\n");
            out.push_str(&g.dump());
        }
        out
    }
}

fn dedup_refs(v: &mut Vec<NodeRef>) {
    let mut seen = HashSet::with_capacity(v.len());
    v.retain(|r| seen.insert(*r));
}
