//! Replay loop: logical address -> stack-shifted virtual -> physical, wear
//! recording, sampling, and the leveling actions a sample triggers.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::coarse::{exchange_lines, CoarseLeveler, RemapOutcome, RemapRecord};
use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::memspace::{MemorySpace, WearMap};
use crate::metrics::{EnduranceMetrics, MetricsReport, SegmentSummary, Totals};
use crate::sampler::Sampler;
use crate::stack::{RelocationRecord, StackLeveler, StackState};
use crate::trace::{MemoryLayout, Trace, TraceEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleRecord {
    pub event_index: u64,
    pub frame: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunTotals {
    pub app_writes: u64,
    pub remap_copy_lines: u64,
    pub relocation_copy_lines: u64,
    pub samples: u64,
    pub remaps: u64,
    pub relocations: u64,
    pub wraps: u64,
}

impl RunTotals {
    pub fn copy_lines(&self) -> u64 {
        self.remap_copy_lines + self.relocation_copy_lines
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub config: SimConfig,
    pub layout: MemoryLayout,
    pub memory: MemorySpace,
    pub totals: RunTotals,
    pub samples: Vec<SampleRecord>,
    pub remaps: Vec<RemapRecord>,
    pub relocations: Vec<RelocationRecord>,
    /// `(min_age, max_age)` of the age tree, when coarse leveling ran.
    pub age_extremes: Option<(u64, u64)>,
    /// Final stack state, when fine leveling ran.
    pub stack: Option<StackState>,
}

impl RunResult {
    pub fn wear(&self) -> &WearMap {
        &self.memory.wear
    }

    /// Counts over the pool frames and the buffer frame, zeros included.
    pub fn region_counts(&self) -> Vec<u64> {
        self.memory.wear.counts_for(self.memory.region_lines())
    }

    /// Counts over the physical lines a segment occupied at start (the
    /// identity-mapped frames).
    pub fn segment_counts(&self, name: &str) -> Option<Vec<u64>> {
        let seg = self.layout.segments().iter().find(|s| s.kind.name() == name)?;
        Some(self.memory.wear.counts_for(seg.lines(self.layout.line_size())))
    }

    pub fn sample_log_csv(&self) -> String {
        let mut out = String::from("event_index,frame\n");
        for s in &self.samples {
            let _ = writeln!(out, "{},{}", s.event_index, s.frame);
        }
        out
    }

    pub fn remap_log_csv(&self) -> String {
        let mut out = String::from("event_index,hot_page_hex,cold_page_hex,hot_frame,cold_frame\n");
        for r in &self.remaps {
            let _ = writeln!(out, "{},{:#x},{:#x},{},{}", r.event_index, r.hot_page, r.cold_page, r.hot_frame, r.cold_frame);
        }
        out
    }

    pub fn relocation_log_csv(&self) -> String {
        let mut out = String::from("event_index,shift_delta,valid_bytes,copied_lines,wrapped\n");
        for r in &self.relocations {
            let _ = writeln!(out, "{},{},{},{},{}", r.event_index, r.shift_delta, r.valid_bytes, r.copied_lines, u8::from(r.wrapped));
        }
        out
    }
}

/// Replays `trace` under `config`. A pure function of its inputs.
pub fn replay(trace: &Trace, config: &SimConfig) -> Result<RunResult> {
    config.validate()?;
    let layout = &trace.layout;
    let mut mem = MemorySpace::new(layout, config.pool_pages, config.enable_fine)?;
    let page = mem.page_size();
    let mut sampler = Sampler::new(config.sample_interval_n);
    let mut coarse = config.enable_coarse.then(|| CoarseLeveler::new(config.remap_threshold_t, &mem.pool.frames));
    let mut fine = if config.enable_fine {
        let seg = layout.stack().ok_or_else(|| Error::Config("fine leveling needs a stack segment".into()))?;
        let mut st = StackState::new(seg, config.stack_step, layout.line_size())?;
        if !trace.has_sp_updates() {
            let valid = config.fixed_valid_stack.min(seg.len());
            st.set_sp(seg.end - valid)?;
        }
        Some(StackLeveler::new(st))
    } else {
        None
    };

    let mut totals = RunTotals::default();
    let mut samples = Vec::new();
    let mut remaps = Vec::new();

    for (idx, ev) in trace.events.iter().enumerate() {
        let event_index = idx as u64;
        let w = match *ev {
            TraceEvent::SpUpdate(sp) => {
                if let Some(f) = fine.as_mut() {
                    f.state.set_sp(sp)?;
                }
                continue;
            }
            TraceEvent::Write(w) => w,
        };

        let (vaddr, value) = match fine.as_ref() {
            Some(f) if f.state.contains(w.address) => (f.state.translate(w.address)?, w.value.map(|v| f.state.virtualize(v))),
            _ => (w.address, w.value),
        };
        let phys = mem.translate(vaddr)?;
        mem.record_write(phys, value);
        totals.app_writes += 1;

        let Some(frame) = sampler.observe_write(phys / page) else {
            continue;
        };
        samples.push(SampleRecord { event_index, frame });
        if let Some(c) = coarse.as_mut() {
            if let Some(req) = c.on_sample(frame) {
                if let RemapOutcome::Swapped(rec) = c.perform_remap(req, &mut mem, event_index)? {
                    remaps.push(rec);
                    totals.remap_copy_lines += exchange_lines(&mem);
                }
            }
        }
        if let Some(f) = fine.as_mut() {
            let rec = f.relocate(&mut mem, event_index)?;
            totals.relocation_copy_lines += rec.copied_lines;
        }
    }

    totals.samples = sampler.samples_taken();
    totals.remaps = remaps.len() as u64;
    let relocations = fine.as_ref().map(|f| f.log().to_vec()).unwrap_or_default();
    totals.relocations = relocations.len() as u64;
    totals.wraps = relocations.iter().filter(|r| r.wrapped).count() as u64;
    debug_assert_eq!(mem.wear.total(), totals.app_writes + totals.copy_lines());

    Ok(RunResult {
        config: config.clone(),
        layout: layout.clone(),
        age_extremes: coarse.as_ref().map(|c| c.rebalance_check()).transpose()?,
        stack: fine.map(|f| f.state),
        memory: mem,
        totals,
        samples,
        remaps,
        relocations,
    })
}

#[derive(Debug, Clone)]
pub struct PairedRun {
    pub baseline: RunResult,
    pub leveled: RunResult,
    pub report: MetricsReport<f64>,
}

/// Runs the identity baseline and the configured replay on one trace and
/// compares them over the same physical region.
pub fn paired_run(trace: &Trace, config: &SimConfig) -> Result<PairedRun> {
    let baseline = replay(trace, &config.baseline())?;
    let leveled = replay(trace, config)?;
    let report = compare(&baseline, &leveled)?;
    Ok(PairedRun { baseline, leveled, report })
}

pub fn compare(baseline: &RunResult, leveled: &RunResult) -> Result<MetricsReport<f64>> {
    let metrics =
        EnduranceMetrics::compare(&baseline.region_counts(), &leveled.region_counts(), baseline.wear().total(), leveled.wear().total())?;
    let t = &leveled.totals;
    let totals = Totals {
        baseline: baseline.wear().total(),
        leveled: leveled.wear().total(),
        copies: t.copy_lines(),
        remaps: t.remaps,
        relocations: t.relocations,
        samples: t.samples,
    };
    let per_segment = leveled
        .layout
        .segments()
        .iter()
        .map(|s| {
            let counts = leveled.segment_counts(s.kind.name()).expect("segment exists");
            (s.kind.name().to_string(), SegmentSummary::of(&counts))
        })
        .collect::<BTreeMap<_, _>>();
    Ok(MetricsReport { totals, metrics, per_segment })
}

/// The report file: `{config, totals, metrics, per_segment}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub config: serde_json::Value,
    pub totals: Totals,
    pub metrics: EnduranceMetrics<f64>,
    pub per_segment: BTreeMap<String, SegmentSummary<f64>>,
}

impl ReportDocument {
    pub fn new(config: serde_json::Value, report: &MetricsReport<f64>) -> Self {
        ReportDocument { config, totals: report.totals, metrics: report.metrics, per_segment: report.per_segment.clone() }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
