//! Circular stack relocation over a shadow-aliased region.
//!
//! The logical stack segment `[base, base + S)` is the real region. Its shadow
//! `[base - S, base)` maps to the same frames, page for page. Every relocation
//! shifts the valid stack down by `step` bytes (cumulative shift `delta`), so a
//! logical address `L` lives at virtual `L - delta`. Once the whole valid stack
//! sits in the shadow, `delta` drops by `S`: both views alias the same lines,
//! so nothing is copied.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::memspace::MemorySpace;
use crate::trace::Segment;
use crate::MIN_SEGMENT_ADDR;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StackState {
    region_base: u64,
    size: u64,
    shift_delta: u64,
    step: u64,
    line_size: u64,
    sp_logical: u64,
}

impl StackState {
    /// The valid stack starts out empty (`sp == top`).
    pub fn new(stack: &Segment, step: u64, line_size: u64) -> Result<Self> {
        let size = stack.len();
        if step == 0 || !step.is_multiple_of(line_size) {
            return Err(Error::Config(format!("stack step {step} is not a positive multiple of the {line_size}-byte line")));
        }
        if !size.is_multiple_of(step) {
            return Err(Error::Config(format!("stack size {size} is not a multiple of step {step}")));
        }
        if stack.start < MIN_SEGMENT_ADDR + size {
            return Err(Error::Layout("stack region leaves no room above 4 GiB for its shadow".into()));
        }
        Ok(StackState { region_base: stack.start, size, shift_delta: 0, step, line_size, sp_logical: stack.end })
    }

    pub fn region_base(&self) -> u64 {
        self.region_base
    }

    pub fn size(&self) -> u64 {
        self.size
    }

    pub fn shift_delta(&self) -> u64 {
        self.shift_delta
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn top(&self) -> u64 {
        self.region_base + self.size
    }

    pub fn sp(&self) -> u64 {
        self.sp_logical
    }

    pub fn valid_bytes(&self) -> u64 {
        self.top() - self.sp_logical
    }

    pub fn set_sp(&mut self, sp: u64) -> Result<()> {
        if sp < self.region_base || sp > self.top() {
            return Err(Error::OutsideStack(sp));
        }
        self.sp_logical = sp;
        Ok(())
    }

    pub fn contains(&self, logical: u64) -> bool {
        logical >= self.region_base && logical < self.top()
    }

    #[inline]
    pub fn translate(&self, logical: u64) -> Result<u64> {
        if !self.contains(logical) {
            return Err(Error::OutsideStack(logical));
        }
        Ok(logical - self.shift_delta)
    }

    /// Resolves a pointer captured in logical coordinates under the current shift.
    pub fn smart_deref(&self, raw_logical: u64) -> Result<u64> {
        self.translate(raw_logical)
    }

    /// Translated valid window `[sp - delta, top - delta)`.
    pub fn window(&self) -> (u64, u64) {
        (self.sp_logical - self.shift_delta, self.top() - self.shift_delta)
    }

    /// Converts a logical pointer into the valid stack to its current virtual
    /// address; other values pass through.
    pub fn virtualize(&self, value: u64) -> u64 {
        if value >= self.sp_logical && value < self.top() {
            value - self.shift_delta
        } else {
            value
        }
    }

    fn wraps_at(&self, delta: u64) -> bool {
        if delta < self.size {
            return false;
        }
        let hi = self.top() - delta;
        let lo = hi - self.valid_bytes();
        lo >= self.region_base - self.size && hi <= self.region_base
    }

    /// Drops the shift by `S` once the whole valid window sits in the shadow.
    pub fn wraparound_reset(&mut self) -> bool {
        if self.wraps_at(self.shift_delta) {
            self.shift_delta -= self.size;
            return true;
        }
        false
    }
}

#[inline]
fn in_window(v: u64, (lo, hi): (u64, u64)) -> bool {
    v >= lo && v < hi
}

/// Rewrites every word pointing into the pre-relocation window by `-step`.
pub fn adjust_inmemory_pointers(image: &[u64], st_before: &StackState) -> Vec<u64> {
    let window = st_before.window();
    image.iter().map(|&v| if in_window(v, window) { v - st_before.step } else { v }).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RelocationRecord {
    pub event_index: u64,
    /// Shift after the step (and after any reset).
    pub shift_delta: u64,
    pub valid_bytes: u64,
    pub copied_lines: u64,
    pub wrapped: bool,
}

/// Moves the valid stack down by one step, charging the copy to the wear map.
///
/// Words pointing into the old window are rewritten to follow the move; if the
/// step completes a wraparound, they are rebased onto the real region as well.
pub fn relocate_step(st: &mut StackState, mem: &mut MemorySpace) -> Result<RelocationRecord> {
    let u = st.valid_bytes();
    if u > st.size - st.step {
        return Err(Error::StackOverflow { valid: u, size: st.size, step: st.step });
    }
    let window = st.window();
    let (src_lo, src_hi) = window;
    let new_delta = st.shift_delta + st.step;
    let wraps = st.wraps_at(new_delta);
    let rebase = if wraps { st.size } else { 0 };

    let mut addr = src_lo & !7;
    while addr < src_hi {
        let from = mem.translate(addr)?;
        let to = mem.translate(addr - st.step)?;
        let word = mem.word_at(from).map(|v| if in_window(v, window) { v - st.step + rebase } else { v });
        mem.store_phys(to, word);
        addr += 8;
    }

    let line = st.line_size;
    let lines = u.div_ceil(line);
    let first = (src_lo - st.step) / line * line;
    for i in 0..lines {
        let phys = mem.translate(first + i * line)?;
        mem.wear.increment(phys / line);
    }

    st.shift_delta = new_delta;
    let wrapped = st.wraparound_reset();
    debug_assert_eq!(wrapped, wraps);
    Ok(RelocationRecord { event_index: 0, shift_delta: st.shift_delta, valid_bytes: u, copied_lines: lines, wrapped })
}

/// Stack state plus its relocation log.
#[derive(Debug, Clone)]
pub struct StackLeveler {
    pub state: StackState,
    log: Vec<RelocationRecord>,
    copied_lines: u64,
}

impl StackLeveler {
    pub fn new(state: StackState) -> Self {
        StackLeveler { state, log: Vec::new(), copied_lines: 0 }
    }

    pub fn relocate(&mut self, mem: &mut MemorySpace, event_index: u64) -> Result<RelocationRecord> {
        let mut rec = relocate_step(&mut self.state, mem)?;
        rec.event_index = event_index;
        self.copied_lines += rec.copied_lines;
        self.log.push(rec);
        Ok(rec)
    }

    pub fn relocations(&self) -> u64 {
        self.log.len() as u64
    }

    pub fn wraps(&self) -> u64 {
        self.log.iter().filter(|r| r.wrapped).count() as u64
    }

    pub fn copied_lines(&self) -> u64 {
        self.copied_lines
    }

    pub fn log(&self) -> &[RelocationRecord] {
        &self.log
    }

    /// `event_index,shift_delta,valid_bytes,copied_lines,wrapped`.
    pub fn log_csv(&self) -> String {
        let mut out = String::from("event_index,shift_delta,valid_bytes,copied_lines,wrapped\n");
        for r in &self.log {
            let _ = writeln!(out, "{},{},{},{},{}", r.event_index, r.shift_delta, r.valid_bytes, r.copied_lines, u8::from(r.wrapped));
        }
        out
    }
}
