//! Synthetic workloads reproducing the qualitative write shapes of small
//! embedded benchmarks: a data hotspot, a streaming loop, deep call stacks and
//! a priority-queue style bss ring.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{MemoryLayout, Segment, SegmentKind, Trace, TraceEvent, WriteEvent};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WorkloadKind {
    Hotspot,
    Stream,
    Deepstack,
    Queue,
}

impl WorkloadKind {
    pub const ALL: [WorkloadKind; 4] = [WorkloadKind::Hotspot, WorkloadKind::Stream, WorkloadKind::Deepstack, WorkloadKind::Queue];

    pub fn name(self) -> &'static str {
        match self {
            WorkloadKind::Hotspot => "hotspot",
            WorkloadKind::Stream => "stream",
            WorkloadKind::Deepstack => "deepstack",
            WorkloadKind::Queue => "queue",
        }
    }
}

impl fmt::Display for WorkloadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WorkloadKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        WorkloadKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown workload kind {s:?} (expected hotspot, stream, deepstack or queue)"))
    }
}

/// Line offsets (within the first data page) of the hotspot's hot lines.
const HOT_LINES: [u64; 4] = [0, 8, 17, 40];
const STREAM_WINDOW_PAGES: u64 = 8;
const DEEPSTACK_MIN_PAGES: u64 = 4;

/// Generates `total_writes` write events (plus any stack-pointer updates).
/// Output is a pure function of the arguments.
pub fn gen_workload(kind: WorkloadKind, total_writes: u64, layout: &MemoryLayout, seed: u64) -> Result<Trace> {
    if total_writes == 0 {
        return Err(Error::Footprint { kind: kind.name(), msg: "total_writes must be positive".into() });
    }
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        events: Vec::with_capacity(total_writes as usize + total_writes as usize / 8),
        remaining: total_writes,
        line: layout.line_size(),
    };
    match kind {
        WorkloadKind::Hotspot => hotspot(&mut g, layout)?,
        WorkloadKind::Stream => stream(&mut g, layout)?,
        WorkloadKind::Deepstack => deepstack(&mut g, layout)?,
        WorkloadKind::Queue => queue(&mut g, layout)?,
    }
    debug_assert_eq!(g.remaining, 0);
    Ok(Trace { layout: layout.clone(), events: g.events })
}

struct Gen {
    rng: ChaCha8Rng,
    events: Vec<TraceEvent>,
    remaining: u64,
    line: u64,
}

impl Gen {
    fn done(&self) -> bool {
        self.remaining == 0
    }

    fn write(&mut self, address: u64, value: Option<u64>) {
        if self.remaining == 0 {
            return;
        }
        self.remaining -= 1;
        self.events.push(TraceEvent::Write(WriteEvent { address, value }));
    }

    fn sp(&mut self, sp: u64) {
        self.events.push(TraceEvent::SpUpdate(sp));
    }

    /// Plain data word: only the low 32 bits set.
    fn data_word(&mut self) -> u64 {
        u64::from(self.rng.gen::<u32>())
    }

    fn random_line(&mut self, seg: &Segment) -> u64 {
        let lines = seg.len() / self.line;
        seg.start + self.rng.gen_range(0..lines) * self.line
    }
}

fn require(layout: &MemoryLayout, kind: WorkloadKind, seg: SegmentKind, pages: u64) -> Result<&Segment> {
    let s = layout.segment(seg).ok_or_else(|| Error::Footprint { kind: kind.name(), msg: format!("layout has no {seg} segment") })?;
    let have = s.len() / layout.page_size();
    if have < pages {
        return Err(Error::Footprint { kind: kind.name(), msg: format!("{seg} segment has {have} pages, need {pages}") });
    }
    Ok(s)
}

fn hotspot(g: &mut Gen, layout: &MemoryLayout) -> Result<()> {
    let data = *require(layout, WorkloadKind::Hotspot, SegmentKind::Data, 1)?;
    let stack = *require(layout, WorkloadKind::Hotspot, SegmentKind::Stack, 1)?;
    const FRAME: u64 = 128;
    const MAX_DEPTH: u64 = 4;

    let mut depth = 1;
    g.sp(stack.end - FRAME);
    while !g.done() {
        let roll = g.rng.gen_range(0..100u32);
        if roll < 80 {
            let hot = HOT_LINES[g.rng.gen_range(0..HOT_LINES.len())];
            let v = g.data_word();
            g.write(data.start + hot * g.line, Some(v));
        } else if roll < 90 {
            let addr = g.random_line(&data);
            g.write(addr, None);
        } else {
            // Shallow LIFO stack traffic.
            let push = depth == 1 || (depth < MAX_DEPTH && g.rng.gen_bool(0.5));
            depth = if push { depth + 1 } else { depth - 1 };
            let sp = stack.end - depth * FRAME;
            g.sp(sp);
            let slot = g.rng.gen_range(0..FRAME / g.line) * g.line;
            let v = g.data_word();
            g.write(sp + slot, Some(v));
        }
    }
    Ok(())
}

fn stream(g: &mut Gen, layout: &MemoryLayout) -> Result<()> {
    let data = *require(layout, WorkloadKind::Stream, SegmentKind::Data, 1)?;
    let pages = (data.len() / layout.page_size()).min(STREAM_WINDOW_PAGES);
    let window_lines = pages * layout.page_size() / g.line;
    let mut i = 0;
    while !g.done() {
        g.write(data.start + (i % window_lines) * g.line, None);
        i += 1;
    }
    Ok(())
}

fn deepstack(g: &mut Gen, layout: &MemoryLayout) -> Result<()> {
    let stack = *require(layout, WorkloadKind::Deepstack, SegmentKind::Stack, DEEPSTACK_MIN_PAGES)?;
    let top = stack.end;
    let cap = stack.len() / 2;
    const MAIN_FRAME: u64 = 256;

    let mut frames = vec![MAIN_FRAME];
    let mut sp = top - MAIN_FRAME;
    g.sp(sp);
    while !g.done() {
        let r: f64 = g.rng.gen();
        let depth = top - sp;
        if r < 0.08 {
            let size = g.rng.gen_range(1..=4u64) * g.line;
            if depth + size > cap {
                continue;
            }
            let caller_sp = sp;
            sp -= size;
            frames.push(size);
            g.sp(sp);
            // Saved frame pointer: a pointer into the live stack.
            g.write(sp, Some(caller_sp));
        } else if r < 0.20 && frames.len() > 1 {
            sp += frames.pop().expect("more than one frame");
            g.sp(sp);
            let v = g.data_word();
            g.write(sp, Some(v));
        } else {
            let size = *frames.last().expect("main frame never pops");
            let addr = sp + g.rng.gen_range(0..size / g.line) * g.line;
            let v = if g.rng.gen_bool(0.03) { sp + g.rng.gen_range(0..(top - sp) / g.line) * g.line } else { g.data_word() };
            g.write(addr, Some(v));
        }
    }
    Ok(())
}

fn queue(g: &mut Gen, layout: &MemoryLayout) -> Result<()> {
    let bss = *require(layout, WorkloadKind::Queue, SegmentKind::Bss, 1)?;
    let lines = bss.len() / g.line;
    let head_meta = bss.start;
    let tail_meta = bss.start + g.line;
    let ring_base = bss.start + 2 * g.line;
    let ring_lines = (lines - 2).min(256);
    let dist_base = ring_base + ring_lines * g.line;
    let dist_lines = lines - 2 - ring_lines;

    let (mut head, mut tail) = (0u64, 0u64);
    while !g.done() {
        let roll = g.rng.gen_range(0..10u32);
        if roll < 4 || head == tail {
            let v = g.data_word();
            g.write(ring_base + (tail % ring_lines) * g.line, Some(v));
            tail += 1;
            g.write(tail_meta, Some(tail));
        } else if roll < 8 || dist_lines == 0 {
            head += 1;
            g.write(head_meta, Some(head));
        } else {
            // Skewed toward the low entries of the distance table.
            let u: f64 = g.rng.gen();
            let idx = ((u * u * u) * dist_lines as f64) as u64;
            let v = g.data_word();
            g.write(dist_base + idx.min(dist_lines - 1) * g.line, Some(v));
        }
    }
    Ok(())
}
