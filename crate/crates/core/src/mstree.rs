//! Match-store tree: a trie variant holding the partial matches of one
//! expansion list.
//!
//! Each node of depth `i` stores one assignment (a stream edge, or a
//! reference to a leaf of another tree) and the root-to-node path is one
//! partial match of the list's `i`-th item. Unlike a plain trie, every node
//! keeps a link to its parent and nodes of the same depth form a
//! doubly-linked list, because the engine reads the structure horizontally
//! (per level) and backtracks upward, never descending from the root.
//!
//! # Synchronization contract
//!
//! The tree has no internal locking. Callers serialize access per level
//! through the scheduler's item locks, under the following field/lock
//! mapping, where "level `d` lock" means the expansion-list item backed by
//! depth `d` of this tree:
//!
//! * a node's level links, state transition, occupant-index entry, and its
//!   membership in its parent's child map are only touched under the level
//!   `d` lock of the node's own depth `d`;
//! * a node's payload, depth, and parent pointer are immutable after
//!   [`MsTree::attach`] publishes it;
//! * upward traversal ([`MsTree::path`]) reads only immutable fields and may
//!   run under any deeper level's lock — partially-removed ancestors keep
//!   their parent links, which is what makes this safe;
//! * allocation and reclamation go through an internal mutex and are safe
//!   regardless of item locks; [`MsTree::finalize_remove`] must only be
//!   called once no other transaction can reach the nodes (the scheduler
//!   guarantees this by finalizing after the owning delete transaction's
//!   last lock release).
//!
//! Single-threaded users (tests, the sequential engine path) satisfy the
//! contract trivially.

use std::cell::UnsafeCell;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicI64, AtomicU32, AtomicU8, AtomicUsize, Ordering};
use std::sync::{Mutex, OnceLock};

use thiserror::Error;

use crate::model::StreamEdge;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("node reference is dead (reclaimed or never allocated)")]
    DeadNode,
    #[error("parent is not alive")]
    ParentNotAlive,
    #[error("node is not alive")]
    NotAlive,
    #[error("node is not partially removed")]
    NotPartiallyRemoved,
    #[error("level {0} out of range 1..={1}")]
    LevelRange(usize, usize),
    #[error("arena capacity exhausted")]
    ArenaFull,
}

/// What a node stores: a stream edge, or a reference to a leaf of another
/// tree (used by the global tree, whose positions hold whole subquery
/// matches).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Payload {
    Edge(StreamEdge),
    Sub { list: u16, node: NodeRef },
}

impl Payload {
    pub fn key(&self) -> PayloadKey {
        match *self {
            Payload::Edge(e) => PayloadKey::Edge(e.seq),
            Payload::Sub { list, node } => PayloadKey::Sub(list, node),
        }
    }

    pub fn as_edge(&self) -> Option<&StreamEdge> {
        match self {
            Payload::Edge(e) => Some(e),
            Payload::Sub { .. } => None,
        }
    }
}

/// Identity of a payload: duplicate-path suppression and the per-level
/// occupant index key off this.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PayloadKey {
    Edge(u64),
    Sub(u16, NodeRef),
}

/// Generation-checked handle to a tree node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeRef {
    idx: u32,
    gen: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeState {
    Alive,
    PartiallyRemoved,
}

const STATE_ALIVE: u8 = 0;
const STATE_PARTIAL: u8 = 1;

struct Links {
    prev: Option<NodeRef>,
    next: Option<NodeRef>,
}

struct Node {
    payload: Payload,
    depth: u16,
    parent: Option<NodeRef>,
    state: AtomicU8,
    links: UnsafeCell<Links>,
    children: UnsafeCell<HashMap<PayloadKey, NodeRef>>,
}

const CHUNK_BITS: u32 = 10;
const CHUNK_SIZE: u32 = 1 << CHUNK_BITS;
const MAX_CHUNKS: usize = 1 << 12;

struct Slot {
    gen: AtomicU32,
    node: UnsafeCell<Option<Node>>,
}

struct AllocState {
    free: Vec<u32>,
    next_fresh: u32,
}

/// Chunked arena with stable addresses and generation-checked slots.
/// Lookups are lock-free; allocation and reclamation take a short mutex.
struct Arena {
    chunks: Box<[OnceLock<Box<[Slot]>>]>,
    alloc: Mutex<AllocState>,
}

impl Arena {
    fn new() -> Self {
        let chunks: Box<[OnceLock<Box<[Slot]>>]> =
            (0..MAX_CHUNKS).map(|_| OnceLock::new()).collect();
        Arena {
            chunks,
            alloc: Mutex::new(AllocState {
                free: Vec::new(),
                next_fresh: 0,
            }),
        }
    }

    fn slot(&self, idx: u32) -> Option<&Slot> {
        let chunk = self.chunks.get((idx >> CHUNK_BITS) as usize)?.get()?;
        chunk.get((idx & (CHUNK_SIZE - 1)) as usize)
    }

    fn resolve(&self, r: NodeRef) -> Result<&Slot, TreeError> {
        let slot = self.slot(r.idx).ok_or(TreeError::DeadNode)?;
        if slot.gen.load(Ordering::Acquire) != r.gen {
            return Err(TreeError::DeadNode);
        }
        Ok(slot)
    }

    fn allocate(&self, node: Node) -> Result<NodeRef, TreeError> {
        let mut st = self.alloc.lock().expect("arena mutex poisoned");
        let idx = match st.free.pop() {
            Some(i) => i,
            None => {
                let i = st.next_fresh;
                if (i >> CHUNK_BITS) as usize >= MAX_CHUNKS {
                    return Err(TreeError::ArenaFull);
                }
                st.next_fresh += 1;
                i
            }
        };
        let chunk = self.chunks[(idx >> CHUNK_BITS) as usize].get_or_init(|| {
            (0..CHUNK_SIZE)
                .map(|_| Slot {
                    gen: AtomicU32::new(0),
                    node: UnsafeCell::new(None),
                })
                .collect()
        });
        let slot = &chunk[(idx & (CHUNK_SIZE - 1)) as usize];
        // SAFETY: the slot is vacant (gen even) and we hold the alloc mutex,
        // so nothing else references or touches it.
        unsafe {
            *slot.node.get() = Some(node);
        }
        let gen = slot.gen.load(Ordering::Relaxed) + 1;
        slot.gen.store(gen, Ordering::Release);
        Ok(NodeRef { idx, gen })
    }

    fn reclaim(&self, r: NodeRef) -> Result<(), TreeError> {
        let mut st = self.alloc.lock().expect("arena mutex poisoned");
        let slot = self.slot(r.idx).ok_or(TreeError::DeadNode)?;
        if slot.gen.load(Ordering::Acquire) != r.gen {
            return Err(TreeError::DeadNode);
        }
        // SAFETY: protocol guarantees no live references into this node;
        // the alloc mutex serializes against concurrent allocate().
        unsafe {
            *slot.node.get() = None;
        }
        slot.gen.store(r.gen + 1, Ordering::Release);
        st.free.push(r.idx);
        Ok(())
    }
}

struct Level {
    head: UnsafeCell<Option<NodeRef>>,
    tail: UnsafeCell<Option<NodeRef>>,
    len: AtomicUsize,
    /// Alive nodes at this depth keyed by their payloads; this is how
    /// expiry finds the nodes holding an edge without scanning the level.
    occupants: UnsafeCell<HashMap<PayloadKey, Vec<NodeRef>>>,
}

impl Level {
    fn new() -> Self {
        Level {
            head: UnsafeCell::new(None),
            tail: UnsafeCell::new(None),
            len: AtomicUsize::new(0),
            occupants: UnsafeCell::new(HashMap::new()),
        }
    }
}

/// Per-level removal statistics; `visited` counts every node touched during
/// target discovery, which stays equal to the number of removed nodes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DeleteStats {
    pub removed_per_level: Vec<usize>,
    pub removed: usize,
    pub visited: usize,
}

/// The match-store tree. See the module docs for the synchronization
/// contract; all methods take `&self`.
pub struct MsTree {
    depth: usize,
    levels: Vec<Level>,
    root_children: UnsafeCell<HashMap<PayloadKey, NodeRef>>,
    arena: Arena,
    alive: AtomicI64,
}

// SAFETY: all interior mutability is either atomic or guarded by the
// external per-level lock protocol documented on the module.
unsafe impl Send for MsTree {}
unsafe impl Sync for MsTree {}

impl MsTree {
    pub fn new(depth: usize) -> Self {
        MsTree {
            depth,
            levels: (0..depth).map(|_| Level::new()).collect(),
            root_children: UnsafeCell::new(HashMap::new()),
            arena: Arena::new(),
            alive: AtomicI64::new(0),
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn alive_count(&self) -> i64 {
        self.alive.load(Ordering::Relaxed)
    }

    pub fn level_len(&self, level: usize) -> usize {
        self.levels[level - 1].len.load(Ordering::Relaxed)
    }

    fn node(&self, r: NodeRef) -> Result<&Node, TreeError> {
        let slot = self.arena.resolve(r)?;
        // SAFETY: generation matched, so the slot holds a live node; shared
        // access to immutable fields is always sound, cells are guarded by
        // the protocol.
        unsafe { (*slot.node.get()).as_ref().ok_or(TreeError::DeadNode) }
    }

    pub fn payload(&self, r: NodeRef) -> Result<Payload, TreeError> {
        Ok(self.node(r)?.payload)
    }

    pub fn parent(&self, r: NodeRef) -> Result<Option<NodeRef>, TreeError> {
        Ok(self.node(r)?.parent)
    }

    pub fn node_depth(&self, r: NodeRef) -> Result<usize, TreeError> {
        Ok(self.node(r)?.depth as usize)
    }

    pub fn state(&self, r: NodeRef) -> Result<NodeState, TreeError> {
        let s = self.node(r)?.state.load(Ordering::Acquire);
        Ok(if s == STATE_ALIVE {
            NodeState::Alive
        } else {
            NodeState::PartiallyRemoved
        })
    }

    fn child_map(&self, parent: Option<NodeRef>) -> Result<*mut HashMap<PayloadKey, NodeRef>, TreeError> {
        Ok(match parent {
            None => self.root_children.get(),
            Some(p) => self.node(p)?.children.get(),
        })
    }

    /// Appends a new alive node under `parent` (`None` for the root) at
    /// `level`, without any path traversal. Re-inserting a payload already
    /// present as an alive child returns the existing node with `false`.
    ///
    /// The parent may be partially removed: a later delete transaction can
    /// unlink it while an earlier insert is still entitled to extend the
    /// path, and that delete's deeper sweep then collects the new child.
    /// A dead (reclaimed) parent is a scheduler contract violation.
    ///
    /// Caller holds the level lock of `level`.
    pub fn attach(
        &self,
        level: usize,
        parent: Option<NodeRef>,
        payload: Payload,
    ) -> Result<(NodeRef, bool), TreeError> {
        if level < 1 || level > self.depth {
            return Err(TreeError::LevelRange(level, self.depth));
        }
        match parent {
            None => debug_assert_eq!(level, 1),
            Some(p) => debug_assert_eq!(self.node_depth(p)? + 1, level),
        }
        let key = payload.key();
        let map = self.child_map(parent)?;
        // SAFETY: the child map of a node at depth level-1 is only touched
        // under the level lock we hold.
        if let Some(&existing) = unsafe { (*map).get(&key) } {
            return Ok((existing, false));
        }
        let node = Node {
            payload,
            depth: level as u16,
            parent,
            state: AtomicU8::new(STATE_ALIVE),
            links: UnsafeCell::new(Links {
                prev: None,
                next: None,
            }),
            children: UnsafeCell::new(HashMap::new()),
        };
        let r = self.arena.allocate(node)?;
        unsafe {
            (*map).insert(key, r);
        }
        self.link_tail(level, r)?;
        let lvl = &self.levels[level - 1];
        // SAFETY: occupant index of `level`, under that level's lock.
        unsafe {
            (*lvl.occupants.get()).entry(key).or_default().push(r);
        }
        lvl.len.fetch_add(1, Ordering::Relaxed);
        self.alive.fetch_add(1, Ordering::Relaxed);
        Ok((r, true))
    }

    /// Strict insertion: like [`attach`](Self::attach) but rejects a
    /// partially-removed parent. This is the single-transaction surface;
    /// hitting a removed parent here signals a scheduler bug.
    pub fn insert_child(
        &self,
        parent: Option<NodeRef>,
        payload: Payload,
    ) -> Result<(NodeRef, bool), TreeError> {
        let level = match parent {
            None => 1,
            Some(p) => {
                if self.state(p)? != NodeState::Alive {
                    return Err(TreeError::ParentNotAlive);
                }
                self.node_depth(p)? + 1
            }
        };
        self.attach(level, parent, payload)
    }

    fn link_tail(&self, level: usize, r: NodeRef) -> Result<(), TreeError> {
        let lvl = &self.levels[level - 1];
        // SAFETY: level list of `level`, under that level's lock.
        unsafe {
            let tail = *lvl.tail.get();
            match tail {
                None => {
                    *lvl.head.get() = Some(r);
                    *lvl.tail.get() = Some(r);
                }
                Some(t) => {
                    (*self.node(t)?.links.get()).next = Some(r);
                    (*self.node(r)?.links.get()).prev = Some(t);
                    *lvl.tail.get() = Some(r);
                }
            }
        }
        Ok(())
    }

    /// Alive nodes of a level in insertion order.
    pub fn level_nodes(&self, level: usize) -> Vec<NodeRef> {
        let lvl = &self.levels[level - 1];
        let mut out = Vec::with_capacity(lvl.len.load(Ordering::Relaxed));
        // SAFETY: level list read under that level's lock.
        unsafe {
            let mut cur = *lvl.head.get();
            while let Some(r) = cur {
                out.push(r);
                cur = match self.node(r) {
                    Ok(n) => (*n.links.get()).next,
                    Err(_) => None,
                };
            }
        }
        out
    }

    /// Alive nodes of a level holding the given payload.
    pub fn find_at_level(&self, level: usize, key: PayloadKey) -> Vec<NodeRef> {
        let lvl = &self.levels[level - 1];
        // SAFETY: occupant index read under that level's lock.
        unsafe { (*lvl.occupants.get()).get(&key).cloned().unwrap_or_default() }
    }

    pub fn root_child(&self, key: PayloadKey) -> Option<NodeRef> {
        // SAFETY: root child map read under the level-1 lock.
        unsafe { (*self.root_children.get()).get(&key).copied() }
    }

    /// Children handles of a node. Caller holds the lock of the level below
    /// the node.
    pub fn children_of(&self, r: NodeRef) -> Result<Vec<NodeRef>, TreeError> {
        let n = self.node(r)?;
        // SAFETY: child maps of depth-d nodes belong to the d+1 level lock.
        Ok(unsafe { (*n.children.get()).values().copied().collect() })
    }

    pub fn child_count(&self, r: NodeRef) -> Result<usize, TreeError> {
        let n = self.node(r)?;
        // SAFETY: as in children_of.
        Ok(unsafe { (*n.children.get()).len() })
    }

    /// Payloads along the root-to-node path, shallowest first. Works through
    /// partially-removed ancestors; a reclaimed ancestor is an error.
    pub fn path(&self, r: NodeRef) -> Result<Vec<Payload>, TreeError> {
        let mut out = Vec::new();
        let mut cur = Some(r);
        while let Some(c) = cur {
            let n = self.node(c)?;
            out.push(n.payload);
            cur = n.parent;
        }
        out.reverse();
        Ok(out)
    }

    /// Unlinks a node from its level list, the occupant index, and its
    /// parent's child map, keeping the upward parent link so that earlier
    /// in-flight transactions can still backtrack through it. Second call
    /// on the same node is an error.
    ///
    /// Caller holds the node's level lock.
    pub fn partial_remove(&self, r: NodeRef) -> Result<(), TreeError> {
        let n = self.node(r)?;
        if n
            .state
            .compare_exchange(STATE_ALIVE, STATE_PARTIAL, Ordering::AcqRel, Ordering::Acquire)
            .is_err()
        {
            return Err(TreeError::NotAlive);
        }
        let level = n.depth as usize;
        let lvl = &self.levels[level - 1];
        // SAFETY: level list, occupant index and the parent's child map all
        // belong to this node's level lock, which the caller holds.
        unsafe {
            let links = &mut *n.links.get();
            match links.prev {
                Some(p) => (*self.node(p)?.links.get()).next = links.next,
                None => *lvl.head.get() = links.next,
            }
            match links.next {
                Some(x) => (*self.node(x)?.links.get()).prev = links.prev,
                None => *lvl.tail.get() = links.prev,
            }
            links.prev = None;
            links.next = None;
            let key = n.payload.key();
            if let Some(bucket) = (*lvl.occupants.get()).get_mut(&key) {
                bucket.retain(|x| *x != r);
                if bucket.is_empty() {
                    (*lvl.occupants.get()).remove(&key);
                }
            }
            let map = self.child_map(n.parent)?;
            (*map).remove(&key);
        }
        lvl.len.fetch_sub(1, Ordering::Relaxed);
        self.alive.fetch_sub(1, Ordering::Relaxed);
        Ok(())
    }

    /// Reclaims partially-removed nodes. No link to them may remain
    /// anywhere; the scheduler guarantees this by finalizing only after the
    /// owning delete transaction released its last item lock.
    pub fn finalize_remove(&self, nodes: &[NodeRef]) -> Result<(), TreeError> {
        for &r in nodes {
            if self.state(r)? != NodeState::PartiallyRemoved {
                return Err(TreeError::NotPartiallyRemoved);
            }
        }
        for &r in nodes {
            self.arena.reclaim(r)?;
        }
        Ok(())
    }

    /// Single-phase expiry on a quiescent tree: removes every node at
    /// `level` holding the edge plus all descendants, then reclaims them.
    /// Equivalent to partial-removing the same set followed by
    /// [`finalize_remove`](Self::finalize_remove).
    pub fn delete_expired(&self, seq: u64, level: usize) -> Result<DeleteStats, TreeError> {
        if level < 1 || level > self.depth {
            return Err(TreeError::LevelRange(level, self.depth));
        }
        let mut stats = DeleteStats::default();
        let mut collected = Vec::new();
        let mut frontier = self.find_at_level(level, PayloadKey::Edge(seq));
        stats.visited += frontier.len();
        for d in level..=self.depth {
            let removed_here = frontier.len();
            stats
                .removed_per_level
                .resize(self.depth.max(stats.removed_per_level.len()), 0);
            stats.removed_per_level[d - 1] += removed_here;
            stats.removed += removed_here;
            let mut next = Vec::new();
            for &r in &frontier {
                if d < self.depth {
                    let kids = self.children_of(r)?;
                    stats.visited += kids.len();
                    next.extend(kids);
                }
                self.partial_remove(r)?;
                collected.push(r);
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        self.finalize_remove(&collected)?;
        Ok(stats)
    }

    /// One line per alive node: `depth<TAB>key<TAB>parent-key<TAB>state`,
    /// level by level in insertion order.
    pub fn dump(&self) -> String {
        fn key_str(p: Payload) -> String {
            match p {
                Payload::Edge(e) => e.seq.to_string(),
                Payload::Sub { list, node } => format!("r{}.{}", list, node.idx),
            }
        }
        let mut out = String::new();
        for level in 1..=self.depth {
            for r in self.level_nodes(level) {
                let n = match self.node(r) {
                    Ok(n) => n,
                    Err(_) => continue,
                };
                let parent = match n.parent {
                    None => "-".to_string(),
                    Some(p) => self.payload(p).map(key_str).unwrap_or_else(|_| "?".into()),
                };
                let state = match self.state(r).unwrap_or(NodeState::PartiallyRemoved) {
                    NodeState::Alive => "alive",
                    NodeState::PartiallyRemoved => "partial",
                };
                let _ = writeln!(out, "{}\t{}\t{}\t{}", level, key_str(n.payload), parent, state);
            }
        }
        out
    }
}
