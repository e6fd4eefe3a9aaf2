//! Physical memory model: the page table (with shadow-stack aliasing), the
//! ground-truth per-line wear map, the frame pool the coarse leveler permutes
//! and the sparse image of materialized 8-byte words.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::trace::{MemoryLayout, SegmentKind};
use crate::MIN_SEGMENT_ADDR;

/// Single-level map from virtual page numbers to physical frame numbers.
///
/// Canonical pages map injectively. A shadow page shares the frame of its
/// real-stack counterpart and follows it whenever that page is swapped.
#[derive(Debug, Clone, Default)]
pub struct PageTable {
    page_size: u64,
    entries: HashMap<u64, u64>,
    /// frame -> canonical page
    owners: HashMap<u64, u64>,
    /// real page -> shadow page
    shadow_of: HashMap<u64, u64>,
    /// shadow page -> real page
    real_of: HashMap<u64, u64>,
}

impl PageTable {
    pub fn new(page_size: u64) -> Self {
        PageTable { page_size, ..Default::default() }
    }

    pub fn page_size(&self) -> u64 {
        self.page_size
    }

    /// Maps a canonical page. Panics on double-mapping a frame, which would
    /// break the permutation invariant.
    pub fn map(&mut self, page: u64, frame: u64) {
        assert!(self.owners.insert(frame, page).is_none(), "frame {frame:#x} mapped twice");
        self.entries.insert(page, frame);
    }

    /// Makes `shadow` resolve to the same frame as `real`.
    pub fn alias(&mut self, shadow: u64, real: u64) -> Result<()> {
        let frame = self.frame_of(real)?;
        self.entries.insert(shadow, frame);
        self.shadow_of.insert(real, shadow);
        self.real_of.insert(shadow, real);
        Ok(())
    }

    pub fn frame_of(&self, page: u64) -> Result<u64> {
        self.entries.get(&page).copied().ok_or(Error::Unmapped(page))
    }

    /// Canonical (non-shadow) page currently backed by `frame`.
    pub fn owner_of(&self, frame: u64) -> Option<u64> {
        self.owners.get(&frame).copied()
    }

    pub fn is_shadow(&self, page: u64) -> bool {
        self.real_of.contains_key(&page)
    }

    pub fn shadow_of(&self, real: u64) -> Option<u64> {
        self.shadow_of.get(&real).copied()
    }

    #[inline]
    pub fn translate(&self, vaddr: u64) -> Result<u64> {
        let page = vaddr / self.page_size;
        let frame = self.frame_of(page)?;
        Ok(frame * self.page_size + vaddr % self.page_size)
    }

    /// Exchanges the frames behind two canonical pages; shadow aliases follow.
    pub fn swap_frames(&mut self, a: u64, b: u64) -> Result<()> {
        for p in [a, b] {
            if self.is_shadow(p) {
                return Err(Error::Remap(format!("page {p:#x} is a shadow alias")));
            }
        }
        let fa = self.frame_of(a)?;
        let fb = self.frame_of(b)?;
        if a == b {
            return Ok(());
        }
        self.entries.insert(a, fb);
        self.entries.insert(b, fa);
        self.owners.insert(fb, a);
        self.owners.insert(fa, b);
        if let Some(s) = self.shadow_of(a) {
            self.entries.insert(s, fb);
        }
        if let Some(s) = self.shadow_of(b) {
            self.entries.insert(s, fa);
        }
        Ok(())
    }

    /// Frames reachable from canonical pages, sorted.
    pub fn canonical_frames(&self) -> Vec<u64> {
        let mut v: Vec<u64> = self.owners.keys().copied().collect();
        v.sort_unstable();
        v
    }
}

/// Ground-truth write count of every physical line.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WearMap {
    line_size: u64,
    counts: HashMap<u64, u64>,
    total: u64,
}

impl WearMap {
    pub fn new(line_size: u64) -> Self {
        WearMap { line_size, counts: HashMap::new(), total: 0 }
    }

    pub fn line_size(&self) -> u64 {
        self.line_size
    }

    #[inline]
    pub fn increment(&mut self, line: u64) {
        *self.counts.entry(line).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn count(&self, line: u64) -> u64 {
        self.counts.get(&line).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Non-zero lines in ascending line order.
    pub fn sorted(&self) -> BTreeMap<u64, u64> {
        self.counts.iter().filter(|(_, &c)| c > 0).map(|(&l, &c)| (l, c)).collect()
    }

    /// Counts for `lines`, zeros included.
    pub fn counts_for(&self, lines: impl IntoIterator<Item = u64>) -> Vec<u64> {
        lines.into_iter().map(|l| self.count(l)).collect()
    }

    /// `line_index,physical_address_hex,count` rows plus a `#total` trailer.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("line_index,physical_address_hex,count\n");
        for (line, count) in self.sorted() {
            let _ = writeln!(out, "{line},{:#x},{count}", line * self.line_size);
        }
        let _ = writeln!(out, "#total,{}", self.total);
        out
    }
}

/// Frames the coarse leveler may permute, plus the dedicated copy buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FramePool {
    pub frames: Vec<u64>,
    pub buffer_frame: u64,
}

#[derive(Debug, Clone)]
pub struct MemorySpace {
    pub page_table: PageTable,
    pub wear: WearMap,
    pub pool: FramePool,
    image: HashMap<u64, u64>,
    page_size: u64,
    line_size: u64,
}

impl MemorySpace {
    /// Identity-maps every segment page.
    ///
    /// `pool_pages` of 0 means "exactly the layout's pages"; a larger value
    /// adds idle canonical pages above the highest segment whose frames give
    /// the coarse leveler extra cold targets. With `shadow` set, the stack
    /// segment gets an alias region of equal size directly below it.
    pub fn new(layout: &MemoryLayout, pool_pages: u64, shadow: bool) -> Result<Self> {
        let page = layout.page_size();
        let mut pt = PageTable::new(page);
        let mut frames = Vec::new();
        for seg in layout.segments() {
            for p in seg.pages(page) {
                pt.map(p, p);
                frames.push(p);
            }
        }
        let used = frames.len() as u64;
        if pool_pages != 0 && pool_pages < used {
            return Err(Error::Config(format!("pool of {pool_pages} pages cannot hold the layout's {used} pages")));
        }
        let mut next = layout.end() / page;
        for _ in used..pool_pages.max(used) {
            pt.map(next, next);
            frames.push(next);
            next += 1;
        }
        let buffer_frame = next;

        if shadow {
            let stack = layout.stack().ok_or_else(|| Error::Layout("shadow stack requested but layout has no stack".into()))?;
            let size = stack.len();
            if stack.start < MIN_SEGMENT_ADDR + size {
                return Err(Error::Layout("no room above 4 GiB for the shadow stack".into()));
            }
            let shadow_lo = stack.start - size;
            if let Some(s) = layout.segments().iter().find(|s| s.kind != SegmentKind::Stack && s.start < stack.start && s.end > shadow_lo) {
                return Err(Error::Layout(format!("{} segment overlaps the shadow stack", s.kind)));
            }
            for real in stack.pages(page) {
                pt.alias(real - size / page, real)?;
            }
        }

        frames.sort_unstable();
        Ok(MemorySpace {
            page_table: pt,
            wear: WearMap::new(layout.line_size()),
            pool: FramePool { frames, buffer_frame },
            image: HashMap::new(),
            page_size: page,
            line_size: layout.line_size(),
        })
    }

    pub fn page_size(&self) -> u64 {
        self.page_size
    }

    pub fn line_size(&self) -> u64 {
        self.line_size
    }

    #[inline]
    pub fn translate(&self, vaddr: u64) -> Result<u64> {
        self.page_table.translate(vaddr)
    }

    /// Charges one write to the physical line and stores the payload word.
    #[inline]
    pub fn record_write(&mut self, phys: u64, value: Option<u64>) {
        self.wear.increment(phys / self.line_size);
        if let Some(v) = value {
            self.image.insert(phys, v);
        }
    }

    /// Translates and records; returns the physical address.
    pub fn write(&mut self, vaddr: u64, value: Option<u64>) -> Result<u64> {
        let phys = self.translate(vaddr)?;
        self.record_write(phys, value);
        Ok(phys)
    }

    pub fn read_phys(&self, phys: u64) -> u64 {
        self.image.get(&(phys & !7)).copied().unwrap_or(0)
    }

    pub fn read(&self, vaddr: u64) -> Result<u64> {
        Ok(self.read_phys(self.translate(vaddr)?))
    }

    pub(crate) fn store_phys(&mut self, phys: u64, value: Option<u64>) {
        match value {
            Some(v) => self.image.insert(phys & !7, v),
            None => self.image.remove(&(phys & !7)),
        };
    }

    pub(crate) fn word_at(&self, phys: u64) -> Option<u64> {
        self.image.get(&(phys & !7)).copied()
    }

    /// Copies a whole frame, charging one write to every destination line.
    pub fn copy_frame(&mut self, src: u64, dst: u64) -> u64 {
        let (src_base, dst_base) = (src * self.page_size, dst * self.page_size);
        for off in (0..self.page_size).step_by(8) {
            let w = self.word_at(src_base + off);
            self.store_phys(dst_base + off, w);
        }
        let lines = self.page_size / self.line_size;
        let first = dst_base / self.line_size;
        for l in first..first + lines {
            self.wear.increment(l);
        }
        lines
    }

    /// Page-level copy between two mapped virtual pages.
    pub fn charge_page_copy(&mut self, src_page: u64, dst_page: u64) -> Result<u64> {
        let src = self.page_table.frame_of(src_page)?;
        let dst = self.page_table.frame_of(dst_page)?;
        Ok(self.copy_frame(src, dst))
    }

    /// Physical lines of the pool frames and the buffer frame, ascending.
    pub fn region_lines(&self) -> Vec<u64> {
        let per = self.page_size / self.line_size;
        let mut frames = self.pool.frames.clone();
        frames.push(self.pool.buffer_frame);
        frames.sort_unstable();
        frames.into_iter().flat_map(|f| f * per..(f + 1) * per).collect()
    }

    pub fn frame_lines(&self, frame: u64) -> std::ops::Range<u64> {
        let per = self.page_size / self.line_size;
        frame * per..(frame + 1) * per
    }
}
