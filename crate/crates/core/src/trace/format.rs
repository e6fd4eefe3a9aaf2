//! Line-oriented text format:
//!
//! ```text
//! # comment
//! @segment stack 0x100010000 0x100020000
//! W 0x100011000
//! W 0x100011040 0xdeadbeef
//! S 0x10001ff00
//! ```

use std::io::{self, BufRead, Write};

use super::{check_event, MemoryLayout, Segment, Trace, TraceEvent, WriteEvent};
use crate::error::{Error, Result};

pub fn parse_trace<R: BufRead>(reader: R) -> Result<Trace> {
    let mut segments = Vec::new();
    let mut layout: Option<MemoryLayout> = None;
    let mut events = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::Io(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let malformed = |msg: String| Error::Parse { line: lineno, msg };
        let mut fields = line.split_whitespace();
        let tag = fields.next().unwrap_or_default();
        let rest: Vec<&str> = fields.collect();

        if tag == "@segment" {
            if layout.is_some() {
                return Err(malformed("segment header after first event".into()));
            }
            let [name, start, end] = rest[..] else {
                return Err(malformed(format!("expected `@segment <name> <start> <end>`, got {line:?}")));
            };
            let kind = name.parse().map_err(malformed)?;
            let start = parse_hex(start).map_err(malformed)?;
            let end = parse_hex(end).map_err(malformed)?;
            segments.push(Segment::new(kind, start, end));
            continue;
        }

        let event = match (tag, &rest[..]) {
            ("W", [addr]) => TraceEvent::Write(WriteEvent::new(parse_hex(addr).map_err(malformed)?)),
            ("W", [addr, value]) => {
                TraceEvent::Write(WriteEvent::with_value(parse_hex(addr).map_err(malformed)?, parse_hex(value).map_err(malformed)?))
            }
            ("S", [sp]) => TraceEvent::SpUpdate(parse_hex(sp).map_err(malformed)?),
            _ => return Err(malformed(format!("unrecognized record {line:?}"))),
        };
        if layout.is_none() {
            layout = Some(finish_layout(&mut segments, lineno)?);
        }
        let l = layout.as_ref().expect("layout set above");
        check_event(l, &event).map_err(|e| Error::AtLine { line: lineno, source: Box::new(e) })?;
        events.push(event);
    }

    let layout = match layout {
        Some(l) => l,
        None => finish_layout(&mut segments, 0)?,
    };
    Ok(Trace { layout, events })
}

fn finish_layout(segments: &mut Vec<Segment>, lineno: usize) -> Result<MemoryLayout> {
    if segments.is_empty() {
        return Err(Error::Parse { line: lineno, msg: "no @segment header before events".into() });
    }
    MemoryLayout::new(std::mem::take(segments))
}

fn parse_hex(s: &str) -> Result<u64, String> {
    let digits = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")).ok_or_else(|| format!("expected 0x-prefixed hex, got {s:?}"))?;
    u64::from_str_radix(digits, 16).map_err(|e| format!("bad hex {s:?}: {e}"))
}

pub fn emit_trace<W: Write>(trace: &Trace, mut out: W) -> io::Result<()> {
    for s in trace.layout.segments() {
        writeln!(out, "@segment {} {:#x} {:#x}", s.kind, s.start, s.end)?;
    }
    for ev in &trace.events {
        match ev {
            TraceEvent::Write(WriteEvent { address, value: None }) => writeln!(out, "W {address:#x}")?,
            TraceEvent::Write(WriteEvent { address, value: Some(v) }) => writeln!(out, "W {address:#x} {v:#x}")?,
            TraceEvent::SpUpdate(sp) => writeln!(out, "S {sp:#x}")?,
        }
    }
    out.flush()
}

impl Trace {
    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        emit_trace(self, &mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("trace text is ASCII")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        parse_trace(text.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "@segment stack 0x100010000 0x100020000\n";

    #[test]
    fn single_write() {
        let t = Trace::from_text(&format!("{HEADER}W 0x100011000\n")).unwrap();
        assert_eq!(t.events, vec![TraceEvent::Write(WriteEvent::new(0x1_0001_1000))]);
        assert_eq!(t.layout.segments().len(), 1);
    }

    #[test]
    fn write_with_value() {
        let t = Trace::from_text(&format!("{HEADER}W 0x100011040 0xDEADBEEF\n")).unwrap();
        assert_eq!(t.events, vec![TraceEvent::Write(WriteEvent::with_value(0x1_0001_1040, 0xDEAD_BEEF))]);
    }

    #[test]
    fn unaligned_write_reports_line() {
        let err = Trace::from_text(&format!("{HEADER}# c\nW 0x100011001\n")).unwrap_err();
        assert_eq!(err, Error::AtLine { line: 3, source: Box::new(Error::UnalignedAddress(0x1_0001_1001)) });
        assert!(err.to_string().contains("unaligned address"));
    }

    #[test]
    fn outside_segments() {
        let err = Trace::from_text(&format!("{HEADER}W 0x200000000\n")).unwrap_err();
        assert!(matches!(err, Error::AtLine { source, .. } if *source == Error::OutsideSegments(0x2_0000_0000)));
    }

    #[test]
    fn malformed_lines() {
        for bad in ["W", "W 100011000", "X 0x1", "W 0x100011000 0x1 0x2", "S"] {
            let err = Trace::from_text(&format!("{HEADER}{bad}\n")).unwrap_err();
            assert!(matches!(err, Error::Parse { line: 2, .. }), "{bad}: {err}");
        }
    }

    #[test]
    fn header_after_event_rejected() {
        let text = format!("{HEADER}W 0x100011000\n@segment data 0x100020000 0x100030000\n");
        assert!(matches!(Trace::from_text(&text), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn overlapping_segments_rejected() {
        let text = "@segment data 0x100000000 0x100002000\n@segment bss 0x100001000 0x100003000\n";
        assert!(matches!(Trace::from_text(text), Err(Error::Layout(_))));
    }

    #[test]
    fn empty_trace_emits_headers_only() {
        let t = Trace::from_text(HEADER).unwrap();
        assert_eq!(t.to_text(), HEADER);
    }

    #[test]
    fn one_event_emit() {
        let t = Trace::from_text(&format!("{HEADER}W 0x100011000\n")).unwrap();
        assert_eq!(t.to_text(), format!("{HEADER}W 0x100011000\n"));
    }
}
