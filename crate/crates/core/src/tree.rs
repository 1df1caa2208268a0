//! Phylogenetic trees over types.
//!
//! The dynamics never look at the tree, so the attachment rule is a choice
//! made after the fact: replaying a finished trajectory, each newborn type is
//! attached to one of the types alive at its birth.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::population::{EventKind, EventLog, TypeId, TypeRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AttachmentRule {
    /// Attach to the fittest alive type.
    MaxFitnessParent,
    /// Attach to an alive type chosen uniformly at random.
    RandomAliveParent,
}

/// Alive types with O(1) insert, remove and uniform pick.
#[derive(Debug, Clone, Default)]
pub struct AliveSet {
    members: Vec<TypeRecord>,
    slot: Vec<Option<usize>>,
    best: Option<usize>,
}

impl AliveSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[TypeRecord] {
        &self.members
    }

    pub fn contains(&self, id: TypeId) -> bool {
        matches!(self.slot.get(id as usize), Some(Some(_)))
    }

    pub fn fittest(&self) -> Option<&TypeRecord> {
        self.best.map(|i| &self.members[i])
    }

    pub fn insert(&mut self, record: TypeRecord) {
        let id = record.id as usize;
        if self.slot.len() <= id {
            self.slot.resize(id + 1, None);
        }
        if self.slot[id].is_some() {
            return;
        }
        let index = self.members.len();
        self.members.push(record);
        self.slot[id] = Some(index);
        let better = match self.best {
            None => true,
            Some(b) => {
                let cur = &self.members[b];
                record
                    .fitness
                    .total_cmp(&cur.fitness)
                    .then(record.id.cmp(&cur.id))
                    .is_gt()
            }
        };
        if better {
            self.best = Some(index);
        }
    }

    pub fn remove(&mut self, id: TypeId) -> Option<TypeRecord> {
        let index = self.slot.get_mut(id as usize)?.take()?;
        let removed = self.members.swap_remove(index);
        if let Some(moved) = self.members.get(index) {
            self.slot[moved.id as usize] = Some(index);
        }
        match self.best {
            Some(b) if b == index => self.best = self.scan_best(),
            Some(b) if b == self.members.len() => self.best = Some(index),
            _ => {}
        }
        Some(removed)
    }

    fn scan_best(&self) -> Option<usize> {
        self.members
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| a.fitness.total_cmp(&b.fitness).then(a.id.cmp(&b.id)))
            .map(|(i, _)| i)
    }
}

/// Choose the parent of `newborn` among the types alive at its birth.
///
/// `RandomAliveParent` consumes exactly one draw from `rng`.
pub fn attach<R: Rng + ?Sized>(
    rule: AttachmentRule,
    alive: &AliveSet,
    newborn: &TypeRecord,
    rng: &mut R,
) -> Result<TypeId> {
    if alive.is_empty() {
        return Err(Error::InvalidCall("attach needs a nonempty alive set"));
    }
    if alive.contains(newborn.id) {
        return Err(Error::InvalidCall("newborn is already in the alive set"));
    }
    Ok(match rule {
        AttachmentRule::MaxFitnessParent => alive.fittest().expect("nonempty").id,
        AttachmentRule::RandomAliveParent => alive.members()[rng.random_range(0..alive.len())].id,
    })
}

/// Types (with parent links filled in) observed on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhyloTree {
    pub nodes: Vec<TypeRecord>,
    pub horizon: f64,
    pub rule: AttachmentRule,
}

impl PhyloTree {
    pub fn root(&self) -> &TypeRecord {
        &self.nodes[0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Children of each node, in increasing id order.
    pub fn children(&self) -> Vec<Vec<TypeId>> {
        let mut kids = vec![Vec::new(); self.nodes.len()];
        for node in &self.nodes[1..] {
            if let Some(p) = node.parent_id {
                kids[p as usize].push(node.id);
            }
        }
        kids
    }

    pub fn is_alive_at_end(&self, id: TypeId) -> bool {
        self.nodes[id as usize].death_time.is_none()
    }

    /// Structural checks: one root, parents older and alive at each birth.
    pub fn validate(&self) -> Result<()> {
        let root = self
            .nodes
            .first()
            .ok_or_else(|| Error::Invariant("tree has no root".into()))?;
        if root.id != 0 || root.parent_id.is_some() {
            return Err(Error::Invariant("root must be t0 without parent".into()));
        }
        for (i, node) in self.nodes.iter().enumerate().skip(1) {
            if node.id != i as TypeId {
                return Err(Error::Invariant(format!("node {i} has id {}", node.id)));
            }
            let p = node
                .parent_id
                .ok_or_else(|| Error::Invariant(format!("t{i} has no parent")))?;
            if p >= node.id {
                return Err(Error::Invariant(format!("t{i} has younger parent t{p}")));
            }
            let parent = &self.nodes[p as usize];
            if parent.birth_time.partial_cmp(&node.birth_time) != Some(Ordering::Less) {
                return Err(Error::Invariant(format!(
                    "t{p} not born before its child t{i}"
                )));
            }
            if parent.death_time.is_some_and(|d| d <= node.birth_time) {
                return Err(Error::Invariant(format!(
                    "t{p} dead at the birth of its child t{i}"
                )));
            }
        }
        Ok(())
    }
}

/// Replay `log` over `ledger` and attach each newborn by `rule`.
pub fn build_tree<R: Rng + ?Sized>(
    ledger: &[TypeRecord],
    log: &EventLog,
    rule: AttachmentRule,
    rng: &mut R,
) -> Result<PhyloTree> {
    let root = *ledger
        .first()
        .ok_or(Error::InvalidCall("ledger is empty"))?;
    if ledger.len() != log.births() + 1 {
        return Err(Error::Argument(format!(
            "ledger holds {} types but the log has {} births",
            ledger.len(),
            log.births()
        )));
    }
    let mut nodes = ledger.to_vec();
    let mut alive = AliveSet::new();
    alive.insert(root);
    for event in &log.events {
        let record = ledger
            .get(event.type_id as usize)
            .ok_or_else(|| Error::Argument(format!("log references unknown t{}", event.type_id)))?;
        match event.kind {
            EventKind::Birth => {
                let parent = attach(rule, &alive, record, rng)?;
                nodes[record.id as usize].parent_id = Some(parent);
                alive.insert(*record);
            }
            EventKind::Death => {
                alive
                    .remove(record.id)
                    .ok_or_else(|| Error::Invariant(format!("t{} died twice", record.id)))?;
            }
        }
    }
    Ok(PhyloTree {
        nodes,
        horizon: log.horizon,
        rule,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NewickOptions {
    /// Export dead types too, not only those with a descendant alive at the horizon.
    pub include_dead: bool,
    /// Represent a type with children by a zero-length leaf under an unlabeled
    /// internal node instead of labeling the internal node itself.
    pub pendant_leaves: bool,
}

/// Newick text with branch lengths `child.birth_time - parent.birth_time`.
///
/// A type with children is written as an internal node carrying its own
/// label, e.g. `(t1:1.5)t0;`.
pub fn export_newick(tree: &PhyloTree, include_dead: bool) -> String {
    export_newick_with(
        tree,
        NewickOptions {
            include_dead,
            pendant_leaves: false,
        },
    )
}

pub fn export_newick_with(tree: &PhyloTree, options: NewickOptions) -> String {
    let children = tree.children();
    let mut keep: Vec<bool> = (0..tree.nodes.len())
        .map(|i| options.include_dead || tree.is_alive_at_end(i as TypeId))
        .collect();
    for node in tree.nodes.iter().skip(1).rev() {
        if keep[node.id as usize] {
            keep[node.parent_id.expect("non-root has a parent") as usize] = true;
        }
    }
    keep[0] = true;

    let kept_children = |id: TypeId| -> Vec<TypeId> {
        children[id as usize]
            .iter()
            .copied()
            .filter(|&c| keep[c as usize])
            .collect()
    };
    let branch = |id: TypeId| -> Option<f64> {
        let node = &tree.nodes[id as usize];
        node.parent_id
            .map(|p| node.birth_time - tree.nodes[p as usize].birth_time)
    };

    enum Frame {
        Enter(TypeId),
        Exit(TypeId),
        Comma,
    }

    let mut out = String::new();
    let mut stack = vec![Frame::Enter(0)];
    while let Some(frame) = stack.pop() {
        match frame {
            Frame::Enter(id) => {
                let kids = kept_children(id);
                if kids.is_empty() {
                    write_label(&mut out, id, branch(id));
                    continue;
                }
                out.push('(');
                if options.pendant_leaves {
                    write_label(&mut out, id, Some(0.0));
                    out.push(',');
                }
                stack.push(Frame::Exit(id));
                for (i, &c) in kids.iter().enumerate().rev() {
                    stack.push(Frame::Enter(c));
                    if i > 0 {
                        stack.push(Frame::Comma);
                    }
                }
            }
            Frame::Exit(id) => {
                out.push(')');
                if options.pendant_leaves {
                    if let Some(len) = branch(id) {
                        let _ = write!(out, ":{len}");
                    }
                } else {
                    write_label(&mut out, id, branch(id));
                }
            }
            Frame::Comma => out.push(','),
        }
    }
    out.push(';');
    out
}

fn write_label(out: &mut String, id: TypeId, length: Option<f64>) {
    let _ = write!(out, "t{id}");
    if let Some(len) = length {
        let _ = write!(out, ":{len}");
    }
}

/// Skinniness summaries of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeStats {
    /// Time average of the number of alive types over `[0, horizon]`.
    pub mean_coexisting: f64,
    /// Lengths of the maximal intervals with a constant record holder, ascending.
    pub dwell_lengths: Vec<f64>,
}

impl TreeStats {
    pub fn longest_dwell(&self) -> f64 {
        self.dwell_lengths.last().copied().unwrap_or(0.0)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["mean_coexisting", "dwells", "longest_dwell", "total_dwell"])?;
        let total: f64 = self.dwell_lengths.iter().sum();
        out.write_record([
            self.mean_coexisting.to_string(),
            self.dwell_lengths.len().to_string(),
            self.longest_dwell().to_string(),
            total.to_string(),
        ])?;
        out.flush()?;
        Ok(())
    }
}

pub fn tree_stats(tree: &PhyloTree, log: &EventLog) -> Result<TreeStats> {
    let horizon = log.horizon;
    let mut n = 1u64;
    let mut last = 0.0;
    let mut area = 0.0;
    let mut best = tree.root().fitness;
    let mut reign_start = 0.0;
    let mut dwell_lengths = Vec::new();
    for event in &log.events {
        area += n as f64 * (event.time - last);
        last = event.time;
        match event.kind {
            EventKind::Birth => {
                n += 1;
                let node = tree.nodes.get(event.type_id as usize).ok_or_else(|| {
                    Error::Argument(format!("log references unknown t{}", event.type_id))
                })?;
                if node.fitness > best {
                    best = node.fitness;
                    dwell_lengths.push(event.time - reign_start);
                    reign_start = event.time;
                }
            }
            EventKind::Death => n -= 1,
        }
    }
    area += n as f64 * (horizon - last);
    dwell_lengths.push(horizon - reign_start);
    dwell_lengths.sort_by(f64::total_cmp);
    let mean_coexisting = if horizon > 0.0 { area / horizon } else { 1.0 };
    Ok(TreeStats {
        mean_coexisting,
        dwell_lengths,
    })
}
