//! Aging-aware page remapping.
//!
//! Every pool frame carries an estimated age in sample units. When a frame has
//! collected `threshold_t` samples since its last fold, the samples are folded
//! into its age and the page living on it is swapped with the page on the
//! youngest frame, using a buffered three-copy exchange. Frames still holding
//! unfolded samples are passed over as targets unless no other frame is left.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::memspace::MemorySpace;

/// Frames ordered by `(estimated_age, frame)`.
#[derive(Debug, Clone, Default)]
pub struct AgeTree {
    order: BTreeSet<(u64, u64)>,
    ages: HashMap<u64, u64>,
}

impl AgeTree {
    pub fn new(frames: impl IntoIterator<Item = u64>) -> Self {
        let mut t = AgeTree::default();
        for f in frames {
            if t.ages.insert(f, 0).is_none() {
                t.order.insert((0, f));
            }
        }
        t
    }

    pub fn len(&self) -> usize {
        self.ages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ages.is_empty()
    }

    pub fn age(&self, frame: u64) -> Option<u64> {
        self.ages.get(&frame).copied()
    }

    pub fn add_age(&mut self, frame: u64, delta: u64) {
        let age = self.ages.get_mut(&frame).expect("frame is tracked");
        self.order.remove(&(*age, frame));
        *age += delta;
        self.order.insert((*age, frame));
    }

    /// Youngest frame; ties go to the lowest frame number.
    pub fn min(&self) -> Option<(u64, u64)> {
        self.order.first().copied()
    }

    /// Youngest frame other than `frame`.
    pub fn min_excluding(&self, frame: u64) -> Option<(u64, u64)> {
        self.order.iter().find(|&&(_, f)| f != frame).copied()
    }

    pub fn min_where(&self, mut keep: impl FnMut(u64) -> bool) -> Option<(u64, u64)> {
        self.order.iter().find(|&&(_, f)| keep(f)).copied()
    }

    /// `(min_age, max_age)`.
    pub fn extremes(&self) -> Result<(u64, u64)> {
        match (self.order.first(), self.order.last()) {
            (Some(lo), Some(hi)) => Ok((lo.0, hi.0)),
            _ => Err(Error::EmptyTree),
        }
    }

    pub fn frames(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.order.iter().map(|&(age, f)| (f, age))
    }
}

#[derive(Debug, Clone)]
pub struct RemapPolicy {
    pub threshold_t: u64,
    pending: HashMap<u64, u64>,
}

impl RemapPolicy {
    pub fn new(threshold_t: u64) -> Self {
        assert!(threshold_t >= 1, "remap threshold must be at least 1");
        RemapPolicy { threshold_t, pending: HashMap::new() }
    }

    pub fn pending(&self, frame: u64) -> u64 {
        self.pending.get(&frame).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RemapRequest {
    pub hot_frame: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RemapRecord {
    pub event_index: u64,
    pub hot_page: u64,
    pub cold_page: u64,
    pub hot_frame: u64,
    pub cold_frame: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RemapOutcome {
    Swapped(RemapRecord),
    Skipped,
}

/// Lines written by one exchange: hot->buffer, cold->hot, buffer->cold.
pub fn exchange_lines(mem: &MemorySpace) -> u64 {
    3 * mem.page_size() / mem.line_size()
}

#[derive(Debug, Clone)]
pub struct CoarseLeveler {
    pub policy: RemapPolicy,
    pub tree: AgeTree,
    log: Vec<RemapRecord>,
    copied_lines: u64,
}

impl CoarseLeveler {
    pub fn new(threshold_t: u64, pool: &[u64]) -> Self {
        CoarseLeveler { policy: RemapPolicy::new(threshold_t), tree: AgeTree::new(pool.iter().copied()), log: Vec::new(), copied_lines: 0 }
    }

    pub fn on_sample(&mut self, frame: u64) -> Option<RemapRequest> {
        let t = self.policy.threshold_t;
        let pending = self.policy.pending.entry(frame).or_insert(0);
        *pending += 1;
        if *pending < t {
            return None;
        }
        let folded = std::mem::take(pending);
        self.tree.add_age(frame, folded);
        Some(RemapRequest { hot_frame: frame })
    }

    /// Moves the page on the hot frame to the youngest other frame.
    pub fn perform_remap(&mut self, req: RemapRequest, mem: &mut MemorySpace, event_index: u64) -> Result<RemapOutcome> {
        if self.tree.len() < 2 {
            return Ok(RemapOutcome::Skipped);
        }
        let hot_frame = req.hot_frame;
        let policy = &self.policy;
        let (_, cold_frame) = self
            .tree
            .min_where(|f| f != hot_frame && policy.pending(f) == 0)
            .or_else(|| self.tree.min_excluding(hot_frame))
            .ok_or(Error::EmptyTree)?;
        let pt = &mem.page_table;
        let owner = |f: u64| pt.owner_of(f).ok_or_else(|| Error::Remap(format!("pool frame {f:#x} is unmapped")));
        let hot_page = owner(hot_frame)?;
        let cold_page = owner(cold_frame)?;

        mem.page_table.swap_frames(hot_page, cold_page)?;
        let buffer = mem.pool.buffer_frame;
        let mut lines = mem.copy_frame(hot_frame, buffer);
        lines += mem.copy_frame(cold_frame, hot_frame);
        lines += mem.copy_frame(buffer, cold_frame);
        self.copied_lines += lines;

        let rec = RemapRecord { event_index, hot_page, cold_page, hot_frame, cold_frame };
        self.log.push(rec);
        Ok(RemapOutcome::Swapped(rec))
    }

    pub fn rebalance_check(&self) -> Result<(u64, u64)> {
        self.tree.extremes()
    }

    pub fn remaps(&self) -> u64 {
        self.log.len() as u64
    }

    pub fn copied_lines(&self) -> u64 {
        self.copied_lines
    }

    pub fn log(&self) -> &[RemapRecord] {
        &self.log
    }

    /// `event_index,hot_page_hex,cold_page_hex,hot_frame,cold_frame`.
    pub fn log_csv(&self) -> String {
        let mut out = String::from("event_index,hot_page_hex,cold_page_hex,hot_frame,cold_frame\n");
        for r in &self.log {
            let _ = writeln!(out, "{},{:#x},{:#x},{},{}", r.event_index, r.hot_page, r.cold_page, r.hot_frame, r.cold_frame);
        }
        out
    }
}
