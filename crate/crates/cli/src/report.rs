use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context};
use serde_json::Value;
use wearsim::metrics::{export_histogram, log2_histogram, HistogramFormat};

use crate::output::write_atomic;
use crate::{Bins, ReportArgs};

struct SegmentRange {
    name: String,
    start: u64,
    end: u64,
}

fn read_artifact(dir: &Path, name: &str) -> anyhow::Result<String> {
    let p = dir.join(name);
    std::fs::read_to_string(&p).with_context(|| format!("{} is not a run directory: cannot read {}", dir.display(), p.display()))
}

fn segments(report: &Value) -> anyhow::Result<(u64, Vec<SegmentRange>)> {
    let cfg = report.get("config").ok_or_else(|| anyhow!("report.json has no config"))?;
    let line_size = cfg.get("line_size").and_then(Value::as_u64).unwrap_or(wearsim::LINE_SIZE);
    let segs = cfg
        .get("segments")
        .and_then(Value::as_array)
        .ok_or_else(|| anyhow!("report.json lists no segments"))?
        .iter()
        .map(|s| {
            Some(SegmentRange {
                name: s.get("name")?.as_str()?.to_string(),
                start: s.get("start")?.as_u64()?,
                end: s.get("end")?.as_u64()?,
            })
        })
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| anyhow!("report.json has a malformed segment entry"))?;
    Ok((line_size, segs))
}

/// Reads `line_index,physical_address_hex,count` rows.
fn parse_wear_csv(text: &str) -> anyhow::Result<BTreeMap<u64, u64>> {
    let mut out = BTreeMap::new();
    for (i, row) in text.lines().enumerate().skip(1) {
        if row.is_empty() || row.starts_with('#') {
            continue;
        }
        let mut cols = row.split(',');
        let (Some(line), Some(_), Some(count), None) = (cols.next(), cols.next(), cols.next(), cols.next()) else {
            bail!("wear map row {}: expected 3 columns", i + 1);
        };
        let parse = |s: &str| s.parse::<u64>().with_context(|| format!("wear map row {}", i + 1));
        out.insert(parse(line)?, parse(count)?);
    }
    Ok(out)
}

pub fn cmd_report(a: ReportArgs) -> anyhow::Result<()> {
    let report: Value = serde_json::from_str(&read_artifact(&a.dir, "report.json")?).context("parsing report.json")?;
    let wear = parse_wear_csv(&read_artifact(&a.dir, &format!("wear_{}.csv", a.wear))?)?;
    let (line_size, segs) = segments(&report)?;

    let chosen: Vec<&SegmentRange> = match &a.segment {
        Some(name) => {
            let s = segs.iter().find(|s| &s.name == name).ok_or_else(|| {
                let known: Vec<_> = segs.iter().map(|s| s.name.as_str()).collect();
                anyhow!("no segment {name:?} in this run (have {})", known.join(", "))
            })?;
            vec![s]
        }
        None => segs.iter().collect(),
    };

    for seg in chosen {
        let lines: BTreeMap<u64, u64> =
            (seg.start / line_size..seg.end / line_size).map(|l| (l, wear.get(&l).copied().unwrap_or(0))).collect();
        let (file, body) = match a.bins {
            Bins::Linear => (format!("hist_{}.csv", seg.name), export_histogram(&lines, HistogramFormat::Csv)),
            Bins::Log2 => {
                let mut body = String::from("bin,lines\n");
                for (bin, n) in log2_histogram(lines.values().copied()) {
                    let _ = writeln!(body, "{bin},{n}");
                }
                (format!("hist_{}_log2.csv", seg.name), body)
            }
        };
        let path = a.dir.join(&file);
        write_atomic(&path, body.as_bytes())?;
        println!("{}", path.display());
    }
    Ok(())
}
