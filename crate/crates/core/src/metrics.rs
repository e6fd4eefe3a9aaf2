//! Endurance metrics over per-line write counts.
//!
//! * achieved endurance `AE = mean / max` (zeros in the region count toward the mean)
//! * write overhead `WO = (leveled - baseline) / baseline`
//! * endurance improvement `EI = AE_leveled / AE_baseline`
//! * lifetime improvement `LI = EI / (WO + 1)`
//! * normalized endurance `NE = AE / (WO + 1)`

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Scalar;

fn from_u64<F: Scalar>(v: u64) -> F {
    F::from_u64(v).expect("u64 converts to float")
}

pub fn achieved_endurance<F: Scalar>(counts: &[u64]) -> Result<F> {
    let max = counts.iter().copied().max().unwrap_or(0);
    if max == 0 {
        return Err(Error::Metric("achieved endurance of an all-zero region"));
    }
    let sum: u64 = counts.iter().sum();
    let mean = from_u64::<F>(sum) / from_u64::<F>(counts.len() as u64);
    Ok(mean / from_u64(max))
}

pub fn write_overhead<F: Scalar>(baseline_total: u64, leveled_total: u64) -> Result<F> {
    if baseline_total == 0 {
        return Err(Error::Metric("write overhead with zero baseline writes"));
    }
    if leveled_total < baseline_total {
        return Err(Error::Metric("leveled run wrote less than the baseline"));
    }
    Ok(from_u64::<F>(leveled_total - baseline_total) / from_u64(baseline_total))
}

pub fn endurance_improvement<F: Scalar>(ae_analyzed: F, ae_baseline: F) -> Result<F> {
    if ae_baseline <= F::zero() {
        return Err(Error::Metric("endurance improvement over a zero baseline AE"));
    }
    Ok(ae_analyzed / ae_baseline)
}

pub fn lifetime_improvement<F: Scalar>(ei: F, wo: F) -> F {
    ei / (wo + F::one())
}

pub fn normalized_endurance<F: Scalar>(ae: F, wo: F) -> F {
    ae / (wo + F::one())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct EnduranceMetrics<F> {
    #[serde(rename = "AE")]
    pub ae: F,
    #[serde(rename = "WO")]
    pub wo: F,
    #[serde(rename = "EI")]
    pub ei: F,
    #[serde(rename = "NE")]
    pub ne: F,
    #[serde(rename = "LI")]
    pub li: F,
}

impl<F: Scalar> EnduranceMetrics<F> {
    /// Metrics of a leveled run against its baseline, both over the same region.
    pub fn compare(baseline_counts: &[u64], leveled_counts: &[u64], baseline_total: u64, leveled_total: u64) -> Result<Self> {
        let ae_base = achieved_endurance::<F>(baseline_counts)?;
        let ae = achieved_endurance::<F>(leveled_counts)?;
        let wo = write_overhead::<F>(baseline_total, leveled_total)?;
        let ei = endurance_improvement(ae, ae_base)?;
        Ok(EnduranceMetrics { ae, wo, ei, ne: normalized_endurance(ae, wo), li: lifetime_improvement(ei, wo) })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct SegmentSummary<F> {
    #[serde(rename = "AE")]
    pub ae: F,
    pub max: u64,
    pub mean: F,
}

impl<F: Scalar> SegmentSummary<F> {
    pub fn of(counts: &[u64]) -> Self {
        let max = counts.iter().copied().max().unwrap_or(0);
        let sum: u64 = counts.iter().sum();
        let mean = if counts.is_empty() { F::zero() } else { from_u64::<F>(sum) / from_u64(counts.len() as u64) };
        let ae = if max == 0 { F::zero() } else { mean / from_u64(max) };
        SegmentSummary { ae, max, mean }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub baseline: u64,
    pub leveled: u64,
    pub copies: u64,
    pub remaps: u64,
    pub relocations: u64,
    pub samples: u64,
}

/// Metrics of one baseline/leveled pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct MetricsReport<F> {
    pub totals: Totals,
    pub metrics: EnduranceMetrics<F>,
    pub per_segment: BTreeMap<String, SegmentSummary<F>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HistogramFormat {
    Csv,
    Json,
}

impl FromStr for HistogramFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(HistogramFormat::Csv),
            "json" => Ok(HistogramFormat::Json),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

#[derive(Serialize)]
struct JsonLine {
    line_index: u64,
    count: u64,
}

#[derive(Serialize)]
struct JsonHistogram {
    lines: Vec<JsonLine>,
    totals: JsonTotals,
}

#[derive(Serialize)]
struct JsonTotals {
    lines: u64,
    writes: u64,
}

/// Per-line counts as `line_index,count` CSV (with a `#total` trailer) or JSON.
pub fn export_histogram(counts: &BTreeMap<u64, u64>, format: HistogramFormat) -> String {
    let writes: u64 = counts.values().sum();
    match format {
        HistogramFormat::Csv => {
            let mut out = String::from("line_index,count\n");
            for (l, c) in counts {
                let _ = writeln!(out, "{l},{c}");
            }
            let _ = writeln!(out, "#total,{writes}");
            out
        }
        HistogramFormat::Json => {
            let h = JsonHistogram {
                lines: counts.iter().map(|(&line_index, &count)| JsonLine { line_index, count }).collect(),
                totals: JsonTotals { lines: counts.len() as u64, writes },
            };
            serde_json::to_string_pretty(&h).expect("histogram serializes")
        }
    }
}

/// Reads back the CSV written by [`export_histogram`].
pub fn parse_histogram_csv(text: &str) -> Result<BTreeMap<u64, u64>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.starts_with('#') || line.is_empty() {
            continue;
        }
        let bad = || Error::Parse { line: i + 1, msg: format!("bad histogram row {line:?}") };
        let (l, c) = line.split_once(',').ok_or_else(bad)?;
        out.insert(l.parse().map_err(|_| bad())?, c.parse().map_err(|_| bad())?);
    }
    Ok(out)
}

/// Bin 0 holds zero counts; otherwise `floor(log2(count)) + 1`.
pub fn log2_bin(count: u64) -> u32 {
    if count == 0 {
        0
    } else {
        64 - count.leading_zeros()
    }
}

/// Number of lines per log2 bin.
pub fn log2_histogram(counts: impl IntoIterator<Item = u64>) -> BTreeMap<u32, u64> {
    let mut bins = BTreeMap::new();
    for c in counts {
        *bins.entry(log2_bin(c)).or_insert(0) += 1;
    }
    bins
}
