use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde_json::{json, Value};
use wearsim::engine::ReportDocument;
use wearsim::trace::{gen_workload, parse_trace, WorkloadKind};
use wearsim::{paired_run, MemoryLayout, SimConfig, Trace};

use crate::output::write_atomic;
use crate::{usage_error, ReportFormat, RunArgs};

#[derive(Debug, Clone, PartialEq)]
enum Source {
    File(PathBuf),
    Generated { kind: WorkloadKind, writes: u64 },
}

#[derive(Debug, Clone)]
struct Resolved {
    sim: SimConfig,
    source: Source,
}

impl Resolved {
    fn source_json(&self) -> Value {
        match &self.source {
            Source::File(p) => json!({ "trace": p.display().to_string() }),
            Source::Generated { kind, writes } => json!({ "kind": kind.name(), "writes": writes, "seed": self.sim.seed }),
        }
    }

    fn to_json(&self, layout: &MemoryLayout) -> Value {
        let segments: Vec<Value> =
            layout.segments().iter().map(|s| json!({ "name": s.kind.name(), "start": s.start, "end": s.end })).collect();
        json!({
            "sim": self.sim,
            "source": self.source_json(),
            "segments": segments,
            "line_size": layout.line_size(),
        })
    }

    fn to_kv(&self) -> String {
        let mut out = self.sim.to_kv();
        match &self.source {
            Source::File(p) => {
                let _ = writeln!(out, "trace = {}", p.display());
            }
            Source::Generated { kind, writes } => {
                let _ = writeln!(out, "kind = {kind}");
                let _ = writeln!(out, "writes = {writes}");
            }
        }
        out
    }
}

#[derive(Default)]
struct FileSource {
    trace: Option<PathBuf>,
    kind: Option<WorkloadKind>,
    writes: Option<u64>,
}

fn load_config_file(path: &Path) -> anyhow::Result<(SimConfig, FileSource)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut src = FileSource::default();
    if text.trim_start().starts_with('{') {
        let doc: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let cfg = doc.get("config").unwrap_or(&doc);
        let sim: SimConfig = serde_json::from_value(cfg.get("sim").cloned().unwrap_or(Value::Null))
            .with_context(|| format!("{}: no usable `sim` config", path.display()))?;
        sim.validate()?;
        let source = cfg.get("source").cloned().unwrap_or(Value::Null);
        if let Some(t) = source.get("trace").and_then(Value::as_str) {
            src.trace = Some(PathBuf::from(t));
        }
        if let Some(k) = source.get("kind").and_then(Value::as_str) {
            src.kind = Some(k.parse().map_err(|e: String| anyhow::anyhow!("{}: {e}", path.display()))?);
            src.writes = source.get("writes").and_then(Value::as_u64);
        }
        return Ok((sim, src));
    }
    let mut bad = None;
    let sim = SimConfig::parse_kv_with(&text, |k, v| {
        let r = match k {
            "trace" => {
                src.trace = Some(PathBuf::from(v));
                Ok(())
            }
            "kind" => v.parse().map(|kind| src.kind = Some(kind)),
            "writes" => v.parse().map(|w| src.writes = Some(w)).map_err(|e: std::num::ParseIntError| format!("writes: {e}")),
            _ => return false,
        };
        if let Err(e) = r {
            bad.get_or_insert(e);
        }
        true
    })
    .with_context(|| format!("in config {}", path.display()))?;
    if let Some(e) = bad {
        bail!("in config {}: {e}", path.display());
    }
    Ok((sim, src))
}

fn resolve(a: &RunArgs) -> anyhow::Result<Resolved> {
    let (mut sim, mut file) = match &a.config {
        Some(p) => load_config_file(p)?,
        None => (SimConfig::default(), FileSource::default()),
    };
    let set = |v: Option<u64>, slot: &mut u64| {
        if let Some(v) = v {
            *slot = v;
        }
    };
    set(a.n, &mut sim.sample_interval_n);
    set(a.t, &mut sim.remap_threshold_t);
    set(a.step, &mut sim.stack_step);
    set(a.pool_pages, &mut sim.pool_pages);
    set(a.valid_stack, &mut sim.fixed_valid_stack);
    set(a.seed, &mut sim.seed);
    if a.coarse {
        sim.enable_coarse = true;
    }
    if a.no_coarse {
        sim.enable_coarse = false;
    }
    if a.fine {
        sim.enable_fine = true;
    }
    if a.no_fine {
        sim.enable_fine = false;
    }
    sim.validate()?;

    if a.trace.is_some() || a.kind.is_some() {
        file = FileSource { trace: a.trace.clone(), kind: a.kind, writes: a.writes };
    }
    let source = match file {
        FileSource { trace: Some(_), kind: Some(_), .. } => usage_error("config names both a trace file and a generator"),
        FileSource { trace: Some(p), .. } => Source::File(p),
        FileSource { kind: Some(kind), writes: Some(writes), .. } => Source::Generated { kind, writes },
        FileSource { kind: Some(_), writes: None, .. } => usage_error("a generator source needs --writes"),
        _ => usage_error("no input: pass --trace <file> or --kind <kind> --writes <count>"),
    };
    Ok(Resolved { sim, source })
}

fn load_trace(r: &Resolved) -> anyhow::Result<Trace> {
    match &r.source {
        Source::File(p) => {
            let f = std::fs::File::open(p).with_context(|| format!("cannot open trace {}", p.display()))?;
            parse_trace(std::io::BufReader::new(f)).with_context(|| format!("in trace {}", p.display()))
        }
        Source::Generated { kind, writes } => Ok(gen_workload(*kind, *writes, &MemoryLayout::default_layout(), r.sim.seed)?),
    }
}

fn run_one(trace: &Trace, r: &Resolved, dir: &Path, format: ReportFormat) -> anyhow::Result<String> {
    let pr = paired_run(trace, &r.sim)?;
    let doc = ReportDocument::new(r.to_json(&trace.layout), &pr.report);
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let put = |name: &str, body: &str| write_atomic(&dir.join(name), body.as_bytes());
    put("config.txt", &r.to_kv())?;
    put("wear_baseline.csv", &pr.baseline.wear().to_csv())?;
    put("wear_leveled.csv", &pr.leveled.wear().to_csv())?;
    put("remaps.csv", &pr.leveled.remap_log_csv())?;
    put("relocations.csv", &pr.leveled.relocation_log_csv())?;
    put("samples.csv", &pr.leveled.sample_log_csv())?;
    if format == ReportFormat::Csv {
        put("report.csv", &report_csv(&doc))?;
    }
    put("report.json", &doc.to_json())?;
    let m = &doc.metrics;
    Ok(format!("AE={:.4} WO={:.4} EI={:.4} NE={:.4} LI={:.4}", m.ae, m.wo, m.ei, m.ne, m.li))
}

fn report_csv(doc: &ReportDocument) -> String {
    let mut out = String::from("section,key,value\n");
    let m = &doc.metrics;
    for (k, v) in [("AE", m.ae), ("WO", m.wo), ("EI", m.ei), ("NE", m.ne), ("LI", m.li)] {
        let _ = writeln!(out, "metrics,{k},{v}");
    }
    let t = &doc.totals;
    for (k, v) in [
        ("baseline", t.baseline),
        ("leveled", t.leveled),
        ("copies", t.copies),
        ("remaps", t.remaps),
        ("relocations", t.relocations),
        ("samples", t.samples),
    ] {
        let _ = writeln!(out, "totals,{k},{v}");
    }
    for (name, s) in &doc.per_segment {
        let _ = writeln!(out, "segment.{name},AE,{}", s.ae);
        let _ = writeln!(out, "segment.{name},max,{}", s.max);
        let _ = writeln!(out, "segment.{name},mean,{}", s.mean);
    }
    out
}

fn sweep_points(base: &SimConfig, specs: &[String]) -> anyhow::Result<Vec<(String, SimConfig)>> {
    let mut points = vec![(String::new(), base.clone())];
    for spec in specs {
        let Some((key, values)) = spec.split_once('=') else {
            usage_error(format!("--sweep expects key=v1,v2,..., got {spec:?}"));
        };
        let key = key.trim();
        let mut next = Vec::new();
        for (name, cfg) in &points {
            for v in values.split(',').map(str::trim).filter(|v| !v.is_empty()) {
                let mut c = cfg.clone();
                c.set(key, v)?;
                c.validate().with_context(|| format!("sweep point {key}={v}"))?;
                let label = if name.is_empty() { format!("{key}-{v}") } else { format!("{name}_{key}-{v}") };
                next.push((label, c));
            }
        }
        points = next;
    }
    Ok(points)
}

pub fn cmd_run(a: RunArgs) -> anyhow::Result<()> {
    let resolved = resolve(&a)?;
    let trace = load_trace(&resolved)?;
    if a.sweep.is_empty() {
        let line = run_one(&trace, &resolved, &a.out, a.format)?;
        println!("{line}");
        return Ok(());
    }
    let points = sweep_points(&resolved.sim, &a.sweep)?;
    let results: Vec<anyhow::Result<String>> = std::thread::scope(|s| {
        let handles: Vec<_> = points
            .iter()
            .map(|(name, sim)| {
                let r = Resolved { sim: sim.clone(), source: resolved.source.clone() };
                let dir = a.out.join(name);
                let trace = &trace;
                s.spawn(move || run_one(trace, &r, &dir, a.format))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    });
    let mut failed = 0;
    for ((name, _), res) in points.iter().zip(results) {
        match res {
            Ok(line) => println!("{name}: {line}"),
            Err(e) => {
                failed += 1;
                eprintln!("{name}: error: {e:#}");
            }
        }
    }
    if failed > 0 {
        bail!("{failed} of {} sweep points failed", points.len());
    }
    Ok(())
}
