//! Flow ingestion: Zeek conn logs and the canonical labeled CSV.
//!
//! Both parsers are total. A malformed data row is logged with its line
//! number and counted in [`IngestStats::rows_rejected`]; only a missing or
//! unusable header aborts a parse.

use std::fmt;
use std::io::{self, BufRead, Write};
use std::net::IpAddr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("format error at line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Protocol {
    Tcp,
    Udp,
    Icmp,
    Other(String),
}

impl Protocol {
    pub fn parse(s: &str) -> Self {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "tcp" => Protocol::Tcp,
            "udp" => Protocol::Udp,
            "icmp" => Protocol::Icmp,
            _ => Protocol::Other(lower),
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            Protocol::Tcp => "tcp",
            Protocol::Udp => "udp",
            Protocol::Icmp => "icmp",
            Protocol::Other(name) => name,
        }
    }

    /// Name restricted to `[a-z0-9]+`, as used inside tokens.
    pub fn token_name(&self) -> String {
        let cleaned: String = self
            .as_str()
            .chars()
            .map(|c| c.to_ascii_lowercase())
            .filter(|c| c.is_ascii_lowercase() || c.is_ascii_digit())
            .collect();
        if cleaned.is_empty() {
            "other".to_string()
        } else {
            cleaned
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum Label {
    Normal,
    Attack,
    #[default]
    Unlabeled,
}

impl Label {
    /// Case-insensitive; anything other than `normal`/`attack` is unlabeled.
    pub fn parse(s: &str) -> Self {
        let s = s.trim();
        if s.eq_ignore_ascii_case("normal") {
            Label::Normal
        } else if s.eq_ignore_ascii_case("attack") {
            Label::Attack
        } else {
            Label::Unlabeled
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Normal => "normal",
            Label::Attack => "attack",
            Label::Unlabeled => "unlabeled",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One bidirectional flow (a Zeek CONN row).
#[derive(Debug, Clone, PartialEq)]
pub struct FlowRecord {
    pub ts: f64,
    pub src_ip: String,
    pub src_port: u16,
    pub dst_ip: String,
    pub dst_port: u16,
    pub protocol: Protocol,
    pub orig_bytes: u64,
    pub resp_bytes: u64,
    pub orig_pkts: u64,
    pub resp_pkts: u64,
    pub duration: f64,
    pub label: Label,
}

impl FlowRecord {
    pub fn total_bytes(&self) -> u64 {
        self.orig_bytes.saturating_add(self.resp_bytes)
    }

    pub fn total_pkts(&self) -> u64 {
        self.orig_pkts.saturating_add(self.resp_pkts)
    }
}

pub fn total_bytes(flow: &FlowRecord) -> u64 {
    flow.total_bytes()
}

pub fn total_pkts(flow: &FlowRecord) -> u64 {
    flow.total_pkts()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IngestStats {
    pub rows_read: usize,
    pub rows_parsed: usize,
    pub rows_rejected: usize,
    pub first_ts: f64,
    pub last_ts: f64,
}

impl IngestStats {
    fn accept(&mut self, ts: f64) {
        if self.rows_parsed == 0 {
            self.first_ts = ts;
            self.last_ts = ts;
        } else {
            self.first_ts = self.first_ts.min(ts);
            self.last_ts = self.last_ts.max(ts);
        }
        self.rows_read += 1;
        self.rows_parsed += 1;
    }

    fn reject(&mut self, line: usize, reason: &str) {
        log::warn!("line {line}: row rejected: {reason}");
        self.rows_read += 1;
        self.rows_rejected += 1;
    }
}

/// Header of the canonical labeled CSV, in column order.
pub const CSV_HEADER: [&str; 12] = [
    "ts",
    "src_ip",
    "src_port",
    "dst_ip",
    "dst_port",
    "protocol",
    "orig_bytes",
    "resp_bytes",
    "orig_pkts",
    "resp_pkts",
    "duration",
    "label",
];

fn is_missing(field: &str) -> bool {
    field.is_empty() || field == "-" || field == "(empty)"
}

fn parse_ts(field: &str) -> Result<f64, String> {
    if is_missing(field) {
        return Err("missing ts".into());
    }
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("bad ts {field:?}")),
    }
}

fn parse_ip(field: &str, what: &str) -> Result<String, String> {
    if is_missing(field) {
        return Err(format!("missing {what}"));
    }
    field
        .parse::<IpAddr>()
        .map(|_| field.to_string())
        .map_err(|_| format!("bad {what} {field:?}"))
}

fn parse_port(field: &str) -> Result<u16, String> {
    if is_missing(field) {
        return Ok(0);
    }
    let v: u64 = field.parse().map_err(|_| format!("bad port {field:?}"))?;
    u16::try_from(v).map_err(|_| format!("port {v} out of range"))
}

fn parse_count(field: &str) -> Result<u64, String> {
    if is_missing(field) {
        return Ok(0);
    }
    field.parse().map_err(|_| format!("bad count {field:?}"))
}

fn parse_duration(field: &str) -> Result<f64, String> {
    if is_missing(field) {
        return Ok(0.0);
    }
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
        _ => Err(format!("bad duration {field:?}")),
    }
}

/// Reads one `\n`-terminated line as raw bytes, stripping the terminator.
fn next_line<R: BufRead>(reader: &mut R, buf: &mut Vec<u8>) -> io::Result<bool> {
    buf.clear();
    if reader.read_until(b'\n', buf)? == 0 {
        return Ok(false);
    }
    if buf.last() == Some(&b'\n') {
        buf.pop();
    }
    if buf.last() == Some(&b'\r') {
        buf.pop();
    }
    Ok(true)
}

struct ZeekColumns {
    n_fields: usize,
    ts: usize,
    orig_h: usize,
    orig_p: usize,
    resp_h: usize,
    resp_p: usize,
    proto: usize,
    duration: Option<usize>,
    orig_bytes: Option<usize>,
    resp_bytes: Option<usize>,
    orig_pkts: Option<usize>,
    resp_pkts: Option<usize>,
    label: Option<usize>,
}

impl ZeekColumns {
    fn from_header(names: &[&str], line: usize) -> Result<Self, IngestError> {
        let find = |name: &str| names.iter().position(|n| *n == name);
        let need = |name: &str| {
            find(name).ok_or_else(|| IngestError::Format {
                line,
                msg: format!("#fields lacks required column {name}"),
            })
        };
        Ok(ZeekColumns {
            n_fields: names.len(),
            ts: need("ts")?,
            orig_h: need("id.orig_h")?,
            orig_p: need("id.orig_p")?,
            resp_h: need("id.resp_h")?,
            resp_p: need("id.resp_p")?,
            proto: need("proto")?,
            duration: find("duration"),
            orig_bytes: find("orig_bytes"),
            resp_bytes: find("resp_bytes"),
            orig_pkts: find("orig_pkts"),
            resp_pkts: find("resp_pkts"),
            label: find("label"),
        })
    }

    fn parse_row(&self, fields: &[&str]) -> Result<FlowRecord, String> {
        if fields.len() != self.n_fields {
            return Err(format!(
                "expected {} fields, found {}",
                self.n_fields,
                fields.len()
            ));
        }
        let opt = |idx: Option<usize>| idx.map_or("-", |i| fields[i]);
        let proto = fields[self.proto];
        Ok(FlowRecord {
            ts: parse_ts(fields[self.ts])?,
            src_ip: parse_ip(fields[self.orig_h], "source ip")?,
            src_port: parse_port(fields[self.orig_p])?,
            dst_ip: parse_ip(fields[self.resp_h], "destination ip")?,
            dst_port: parse_port(fields[self.resp_p])?,
            protocol: if is_missing(proto) {
                Protocol::Other("other".into())
            } else {
                Protocol::parse(proto)
            },
            orig_bytes: parse_count(opt(self.orig_bytes))?,
            resp_bytes: parse_count(opt(self.resp_bytes))?,
            orig_pkts: parse_count(opt(self.orig_pkts))?,
            resp_pkts: parse_count(opt(self.resp_pkts))?,
            duration: parse_duration(opt(self.duration))?,
            label: Label::parse(opt(self.label)),
        })
    }
}

/// Parses a tab-separated Zeek conn log.
///
/// Column positions come from the `#fields` line; other `#` directives are
/// skipped. `-` and `(empty)` mark missing values, which become 0 for counts,
/// ports and duration. Rows without a usable timestamp or IP are rejected. An
/// optional `label` column is honored when present.
pub fn parse_zeek_conn<R: BufRead>(
    mut reader: R,
) -> Result<(Vec<FlowRecord>, IngestStats), IngestError> {
    let mut stats = IngestStats::default();
    let mut records = Vec::new();
    let mut columns: Option<ZeekColumns> = None;
    let mut buf = Vec::new();
    let mut line_no = 0usize;

    while next_line(&mut reader, &mut buf)? {
        line_no += 1;
        if buf.iter().all(|b| b.is_ascii_whitespace()) {
            continue;
        }
        if buf.first() == Some(&b'#') {
            if let Some(rest) = buf.strip_prefix(b"#fields") {
                let text = std::str::from_utf8(rest).map_err(|_| IngestError::Format {
                    line: line_no,
                    msg: "#fields header is not UTF-8".into(),
                })?;
                let names: Vec<&str> = text.split('\t').filter(|s| !s.is_empty()).collect();
                columns = Some(ZeekColumns::from_header(&names, line_no)?);
            }
            continue;
        }
        let Some(cols) = columns.as_ref() else {
            return Err(IngestError::Format {
                line: line_no,
                msg: "data row before #fields header".into(),
            });
        };
        let Ok(text) = std::str::from_utf8(&buf) else {
            stats.reject(line_no, "not UTF-8");
            continue;
        };
        let fields: Vec<&str> = text.split('\t').collect();
        match cols.parse_row(&fields) {
            Ok(rec) => {
                stats.accept(rec.ts);
                records.push(rec);
            }
            Err(reason) => stats.reject(line_no, &reason),
        }
    }
    Ok((records, stats))
}

fn parse_csv_row(fields: &[&str]) -> Result<FlowRecord, String> {
    if fields.len() != CSV_HEADER.len() {
        return Err(format!(
            "expected {} fields, found {}",
            CSV_HEADER.len(),
            fields.len()
        ));
    }
    let proto = fields[5].trim();
    if proto.is_empty() {
        return Err("missing protocol".into());
    }
    Ok(FlowRecord {
        ts: parse_ts(fields[0].trim())?,
        src_ip: parse_ip(fields[1].trim(), "source ip")?,
        src_port: parse_port(fields[2].trim())?,
        dst_ip: parse_ip(fields[3].trim(), "destination ip")?,
        dst_port: parse_port(fields[4].trim())?,
        protocol: Protocol::parse(proto),
        orig_bytes: parse_count(fields[6].trim())?,
        resp_bytes: parse_count(fields[7].trim())?,
        orig_pkts: parse_count(fields[8].trim())?,
        resp_pkts: parse_count(fields[9].trim())?,
        duration: parse_duration(fields[10].trim())?,
        label: Label::parse(fields[11]),
    })
}

/// Parses the canonical labeled CSV (header [`CSV_HEADER`]).
///
/// A completely empty stream yields no records; otherwise the first line must
/// be the header.
pub fn parse_labeled_csv<R: io::Read>(
    reader: R,
) -> Result<(Vec<FlowRecord>, IngestStats), IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut stats = IngestStats::default();
    let mut records = Vec::new();
    let mut record = csv::ByteRecord::new();
    let mut seen_header = false;

    loop {
        let more = match rdr.read_byte_record(&mut record) {
            Ok(more) => more,
            Err(err) => {
                let line = err.position().map_or(0, |p| p.line() as usize);
                if let csv::ErrorKind::Io(_) = err.kind() {
                    if let csv::ErrorKind::Io(e) = err.into_kind() {
                        return Err(IngestError::Io(e));
                    }
                    unreachable!();
                }
                stats.reject(line, &err.to_string());
                continue;
            }
        };
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line() as usize);
        let fields: Option<Vec<&str>> = record
            .iter()
            .map(|f| std::str::from_utf8(f).ok())
            .collect();
        if !seen_header {
            let is_header = fields.as_ref().is_some_and(|f| {
                f.len() == CSV_HEADER.len()
                    && f.iter().zip(CSV_HEADER).all(|(a, b)| a.trim() == b)
            });
            if !is_header {
                return Err(IngestError::Format {
                    line,
                    msg: format!("missing header `{}`", CSV_HEADER.join(",")),
                });
            }
            seen_header = true;
            continue;
        }
        if record.len() == 1 && record[0].iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let Some(fields) = fields else {
            stats.reject(line, "not UTF-8");
            continue;
        };
        match parse_csv_row(&fields) {
            Ok(rec) => {
                stats.accept(rec.ts);
                records.push(rec);
            }
            Err(reason) => stats.reject(line, &reason),
        }
    }
    Ok((records, stats))
}

/// Writes records in the canonical labeled CSV format, header included.
pub fn write_labeled_csv<W: Write>(records: &[FlowRecord], writer: W) -> io::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.ts.to_string(),
            r.src_ip.clone(),
            r.src_port.to_string(),
            r.dst_ip.clone(),
            r.dst_port.to_string(),
            r.protocol.to_string(),
            r.orig_bytes.to_string(),
            r.resp_bytes.to_string(),
            r.orig_pkts.to_string(),
            r.resp_pkts.to_string(),
            r.duration.to_string(),
            r.label.to_string(),
        ])?;
    }
    w.flush()
}

/// Input formats recognised by [`sniff_format`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowFormat {
    ZeekConn,
    LabeledCsv,
}

/// Guesses the format from the first non-blank line of the input.
pub fn sniff_format(head: &[u8]) -> Option<FlowFormat> {
    let first = head
        .split(|&b| b == b'\n')
        .map(|l| l.strip_suffix(b"\r").unwrap_or(l))
        .find(|l| !l.iter().all(u8::is_ascii_whitespace))?;
    if first.starts_with(b"#") {
        // Zeek logs open with #separator, #fields, ... directives.
        return Some(FlowFormat::ZeekConn);
    }
    let text = std::str::from_utf8(first).ok()?;
    let cols: Vec<&str> = text.split(',').map(str::trim).collect();
    (cols == CSV_HEADER).then_some(FlowFormat::LabeledCsv)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ZEEK_HEADER: &str = "#fields\tts\tid.orig_h\tid.orig_p\tid.resp_h\tid.resp_p\tproto\tduration\torig_bytes\tresp_bytes\torig_pkts\tresp_pkts";

    fn zeek(rows: &[&str]) -> (Vec<FlowRecord>, IngestStats) {
        let mut text = String::from("#separator \\x09\n");
        text.push_str(ZEEK_HEADER);
        text.push('\n');
        for r in rows {
            text.push_str(&r.replace(' ', "\t"));
            text.push('\n');
        }
        parse_zeek_conn(text.as_bytes()).unwrap()
    }

    #[test]
    fn zeek_example_row() {
        let (recs, stats) = zeek(&["1000.5 10.0.0.1 5555 10.0.0.2 80 tcp 1.2 100 200 3 4"]);
        assert_eq!(stats.rows_parsed, 1);
        assert_eq!(
            recs[0],
            FlowRecord {
                ts: 1000.5,
                src_ip: "10.0.0.1".into(),
                src_port: 5555,
                dst_ip: "10.0.0.2".into(),
                dst_port: 80,
                protocol: Protocol::Tcp,
                orig_bytes: 100,
                resp_bytes: 200,
                orig_pkts: 3,
                resp_pkts: 4,
                duration: 1.2,
                label: Label::Unlabeled,
            }
        );
    }

    #[test]
    fn zeek_missing_values_become_zero() {
        let (recs, _) = zeek(&["1000.5 10.0.0.1 5555 10.0.0.2 80 udp - - (empty) 3 -"]);
        assert_eq!(recs[0].orig_bytes, 0);
        assert_eq!(recs[0].resp_bytes, 0);
        assert_eq!(recs[0].resp_pkts, 0);
        assert_eq!(recs[0].duration, 0.0);
    }

    #[test]
    fn zeek_rejects_rows_without_ts_or_ip() {
        let (recs, stats) = zeek(&[
            "- 10.0.0.1 5555 10.0.0.2 80 tcp 1 1 1 1 1",
            "5 nonsense 5555 10.0.0.2 80 tcp 1 1 1 1 1",
            "5 10.0.0.1 5555 10.0.0.2 80 tcp 1 1 1",
            "6 ::1 1 fe80::1 2 icmp 1 1 1 1 1",
        ]);
        assert_eq!(recs.len(), 1);
        assert_eq!(stats.rows_read, 4);
        assert_eq!(stats.rows_rejected, 3);
        assert_eq!(recs[0].protocol, Protocol::Icmp);
    }

    #[test]
    fn zeek_empty_input() {
        let (recs, stats) = parse_zeek_conn(&b""[..]).unwrap();
        assert!(recs.is_empty());
        assert_eq!(stats, IngestStats::default());
    }

    #[test]
    fn zeek_requires_fields_header() {
        let err = parse_zeek_conn(&b"1 10.0.0.1 1 10.0.0.2 2 tcp\n"[..]).unwrap_err();
        assert!(matches!(err, IngestError::Format { line: 1, .. }));
    }

    #[test]
    fn csv_examples() {
        let text = "ts,src_ip,src_port,dst_ip,dst_port,protocol,orig_bytes,resp_bytes,orig_pkts,resp_pkts,duration,label\n\
                    1000,1.2.3.4,40000,5.6.7.8,443,tcp,1024,2048,10,12,3.5,attack\n\
                    1001,1.2.3.4,40001,5.6.7.8,443,TCP,1,2,1,1,0,Normal\n\
                    1002,1.2.3.4,70000,5.6.7.8,443,tcp,1,2,1,1,0,normal\n\
                    1003,1.2.3.4,1,5.6.7.8,443,tcp,1,2,1,1,0,benign\n";
        let (recs, stats) = parse_labeled_csv(text.as_bytes()).unwrap();
        assert_eq!(stats.rows_read, 4);
        assert_eq!(stats.rows_rejected, 1);
        assert_eq!(recs[0].label, Label::Attack);
        assert_eq!(recs[0].total_bytes(), 3072);
        assert_eq!(recs[1].label, Label::Normal);
        assert_eq!(recs[1].protocol, Protocol::Tcp);
        assert_eq!(recs[2].label, Label::Unlabeled);
        assert_eq!((stats.first_ts, stats.last_ts), (1000.0, 1003.0));
    }

    #[test]
    fn csv_missing_header() {
        let err = parse_labeled_csv(&b"1000,1.2.3.4,1,5.6.7.8,2,tcp,1,1,1,1,1,normal\n"[..])
            .unwrap_err();
        assert!(matches!(err, IngestError::Format { .. }));
    }

    #[test]
    fn totals() {
        let mut f = zeek(&["1 10.0.0.1 1 10.0.0.2 2 tcp 0 100 200 3 4"]).0.remove(0);
        assert_eq!((total_bytes(&f), total_pkts(&f)), (300, 7));
        f.orig_bytes = 0;
        f.resp_bytes = 0;
        f.orig_pkts = 0;
        f.resp_pkts = 0;
        assert_eq!((total_bytes(&f), total_pkts(&f)), (0, 0));
        f.orig_bytes = 1024;
        f.orig_pkts = 10;
        assert_eq!((total_bytes(&f), total_pkts(&f)), (1024, 10));
    }

    #[test]
    fn sniffing() {
        assert_eq!(sniff_format(b"#separator \\x09\n"), Some(FlowFormat::ZeekConn));
        assert_eq!(
            sniff_format(CSV_HEADER.join(",").as_bytes()),
            Some(FlowFormat::LabeledCsv)
        );
        assert_eq!(sniff_format(&[0xff, 0x00, 0x13]), None);
        assert_eq!(sniff_format(b""), None);
    }
}
