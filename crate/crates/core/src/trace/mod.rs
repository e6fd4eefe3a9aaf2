//! Write-trace data model, the text trace format, synthetic workloads and the
//! identity-translation aggregation used as the ground-truth oracle.

mod format;
mod workload;

pub use self::format::{emit_trace, parse_trace};
pub use self::workload::{gen_workload, WorkloadKind};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{LINE_SIZE, MIN_SEGMENT_ADDR, PAGE_SIZE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    Text,
    Data,
    Bss,
    Stack,
}

impl SegmentKind {
    pub const ALL: [SegmentKind; 4] = [SegmentKind::Text, SegmentKind::Data, SegmentKind::Bss, SegmentKind::Stack];

    pub fn name(self) -> &'static str {
        match self {
            SegmentKind::Text => "text",
            SegmentKind::Data => "data",
            SegmentKind::Bss => "bss",
            SegmentKind::Stack => "stack",
        }
    }
}

impl fmt::Display for SegmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SegmentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SegmentKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| format!("unknown segment {s:?}"))
    }
}

/// Half-open byte range `[start, end)` of one application segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub start: u64,
    pub end: u64,
}

impl Segment {
    pub fn new(kind: SegmentKind, start: u64, end: u64) -> Self {
        Segment { kind, start, end }
    }

    pub fn len(&self) -> u64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn contains(&self, addr: u64) -> bool {
        addr >= self.start && addr < self.end
    }

    pub fn pages(&self, page_size: u64) -> impl Iterator<Item = u64> {
        (self.start / page_size)..(self.end / page_size)
    }

    pub fn lines(&self, line_size: u64) -> impl Iterator<Item = u64> {
        (self.start / line_size)..(self.end / line_size)
    }
}

/// Segment placement of the traced application.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryLayout {
    segments: Vec<Segment>,
    page_size: u64,
    line_size: u64,
}

impl MemoryLayout {
    /// Validates and sorts the segments. Page and line size are the 4 KiB / 64 B defaults.
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        Self::with_geometry(segments, PAGE_SIZE, LINE_SIZE)
    }

    pub fn with_geometry(mut segments: Vec<Segment>, page_size: u64, line_size: u64) -> Result<Self> {
        if line_size == 0 || page_size == 0 || !page_size.is_multiple_of(line_size) {
            return Err(Error::Layout(format!("page size {page_size} is not a multiple of line size {line_size}")));
        }
        if segments.is_empty() {
            return Err(Error::Layout("no segments".into()));
        }
        segments.sort_by_key(|s| s.start);
        for s in &segments {
            if s.is_empty() {
                return Err(Error::Layout(format!("{} segment is empty", s.kind)));
            }
            if s.start % page_size != 0 || s.end % page_size != 0 {
                return Err(Error::Layout(format!("{} segment is not page aligned", s.kind)));
            }
            if s.start < MIN_SEGMENT_ADDR {
                return Err(Error::Layout(format!("{} segment starts below 4 GiB", s.kind)));
            }
        }
        for pair in segments.windows(2) {
            if pair[1].start < pair[0].end {
                return Err(Error::Layout(format!("overlapping segments {} and {}", pair[0].kind, pair[1].kind)));
            }
        }
        for (i, s) in segments.iter().enumerate() {
            if segments[..i].iter().any(|o| o.kind == s.kind) {
                return Err(Error::Layout(format!("duplicate {} segment", s.kind)));
            }
        }
        Ok(MemoryLayout { segments, page_size, line_size })
    }

    /// 64 pages: a 16-page stack just above 4 GiB + 64 KiB (leaving room for
    /// its shadow alias), followed by text, data and bss.
    pub fn default_layout() -> Self {
        let base = MIN_SEGMENT_ADDR;
        let page = PAGE_SIZE;
        let stack = Segment::new(SegmentKind::Stack, base + 16 * page, base + 32 * page);
        let text = Segment::new(SegmentKind::Text, stack.end, stack.end + 4 * page);
        let data = Segment::new(SegmentKind::Data, text.end, text.end + 16 * page);
        let bss = Segment::new(SegmentKind::Bss, data.end, data.end + 28 * page);
        MemoryLayout::new(vec![stack, text, data, bss]).expect("default layout is valid")
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn page_size(&self) -> u64 {
        self.page_size
    }

    pub fn line_size(&self) -> u64 {
        self.line_size
    }

    pub fn segment(&self, kind: SegmentKind) -> Option<&Segment> {
        self.segments.iter().find(|s| s.kind == kind)
    }

    pub fn stack(&self) -> Option<&Segment> {
        self.segment(SegmentKind::Stack)
    }

    pub fn segment_of(&self, addr: u64) -> Option<&Segment> {
        self.segments.iter().find(|s| s.contains(addr))
    }

    pub fn total_pages(&self) -> u64 {
        self.segments.iter().map(|s| s.len() / self.page_size).sum()
    }

    /// First byte past the highest segment.
    pub fn end(&self) -> u64 {
        self.segments.iter().map(|s| s.end).max().unwrap_or(0)
    }
}

impl Default for MemoryLayout {
    fn default() -> Self {
        MemoryLayout::default_layout()
    }
}

/// One whole-line write. `value` is the 8-byte word stored at the line base.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WriteEvent {
    pub address: u64,
    pub value: Option<u64>,
}

impl WriteEvent {
    pub fn new(address: u64) -> Self {
        WriteEvent { address, value: None }
    }

    pub fn with_value(address: u64, value: u64) -> Self {
        WriteEvent { address, value: Some(value) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TraceEvent {
    Write(WriteEvent),
    /// New logical stack pointer; the valid stack is `[sp, stack top)`.
    SpUpdate(u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub layout: MemoryLayout,
    pub events: Vec<TraceEvent>,
}

impl Trace {
    /// Builds a trace, checking every event against the layout.
    pub fn new(layout: MemoryLayout, events: Vec<TraceEvent>) -> Result<Self> {
        for ev in &events {
            check_event(&layout, ev)?;
        }
        Ok(Trace { layout, events })
    }

    pub fn writes(&self) -> impl Iterator<Item = &WriteEvent> + '_ {
        self.events.iter().filter_map(|e| match e {
            TraceEvent::Write(w) => Some(w),
            TraceEvent::SpUpdate(_) => None,
        })
    }

    pub fn write_count(&self) -> u64 {
        self.writes().count() as u64
    }

    pub fn has_sp_updates(&self) -> bool {
        self.events.iter().any(|e| matches!(e, TraceEvent::SpUpdate(_)))
    }
}

pub(crate) fn check_event(layout: &MemoryLayout, ev: &TraceEvent) -> Result<()> {
    match *ev {
        TraceEvent::Write(w) => {
            if w.address % layout.line_size() != 0 {
                return Err(Error::UnalignedAddress(w.address));
            }
            if layout.segment_of(w.address).is_none() {
                return Err(Error::OutsideSegments(w.address));
            }
        }
        TraceEvent::SpUpdate(sp) => {
            let stack = layout.stack().ok_or(Error::OutsideStack(sp))?;
            if sp % 8 != 0 {
                return Err(Error::UnalignedAddress(sp));
            }
            if sp < stack.start || sp > stack.end {
                return Err(Error::OutsideStack(sp));
            }
        }
    }
    Ok(())
}

/// Exact per-line write counts under identity translation.
pub fn aggregate_linecounts(trace: &Trace) -> BTreeMap<u64, u64> {
    let line = trace.layout.line_size();
    let mut counts = BTreeMap::new();
    for w in trace.writes() {
        *counts.entry(w.address / line).or_insert(0) += 1;
    }
    counts
}
