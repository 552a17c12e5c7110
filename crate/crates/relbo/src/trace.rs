//! CSV trace files.
//!
//! One file per repeat with columns
//! `repeat,n,phase,y_1..y_d,v,acq_value,rule,x_rec_1..x_rec_d,p_hat,p_true,wall_ms`.
//! Floats are written with 17 significant digits so that reading a trace
//! back reproduces every value exactly; missing values are empty fields.
//! Rows are flushed one at a time and the last row of a finished repeat has
//! phase `done`, so a killed run leaves a valid prefix that can be resumed.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Seek, SeekFrom};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use relbo_core::harness::{Checkpoint, Phase, TraceRecord, TraceSink};

/// Formats a float with 17 significant digits; NaN becomes an empty field.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

pub fn parse_f64(s: &str) -> Result<f64> {
    if s.is_empty() {
        return Ok(f64::NAN);
    }
    s.parse().map_err(|_| anyhow!("not a number: `{s}`"))
}

pub fn header(d: usize) -> Vec<String> {
    let mut h: Vec<String> = vec!["repeat".into(), "n".into(), "phase".into()];
    h.extend((1..=d).map(|j| format!("y_{j}")));
    h.extend(["v", "acq_value", "rule"].map(String::from));
    h.extend((1..=d).map(|j| format!("x_rec_{j}")));
    h.extend(["p_hat", "p_true", "wall_ms"].map(String::from));
    h
}

/// Dimension encoded in a header row, if the header is well formed.
fn dim_of_header(h: &csv::StringRecord) -> Option<usize> {
    let fields: Vec<&str> = h.iter().collect();
    let n = fields.len();
    if n < 9 || (n - 9) % 2 != 0 {
        return None;
    }
    let d = (n - 9) / 2;
    (fields == header(d).iter().map(String::as_str).collect::<Vec<_>>()).then_some(d)
}

fn row_fields(r: &TraceRecord, d: usize) -> Vec<String> {
    let mut f = Vec::with_capacity(9 + 2 * d);
    f.push(r.repeat.to_string());
    f.push(r.n.to_string());
    f.push(r.phase.as_str().to_string());
    let done = r.phase == Phase::Done;
    for j in 0..d {
        f.push(if done { String::new() } else { fmt_f64(r.y[j]) });
    }
    f.push(fmt_f64(r.v));
    f.push(fmt_f64(r.acq_value));
    f.push(r.rule.clone());
    match &r.checkpoint {
        Some(cp) => {
            f.extend(cp.x.iter().map(|&x| fmt_f64(x)));
            f.push(fmt_f64(cp.p_hat));
            f.push(fmt_f64(cp.p_true));
        }
        None => f.extend(std::iter::repeat_n(String::new(), d + 2)),
    }
    f.push(fmt_f64(r.wall_ms));
    f
}

fn parse_row(rec: &csv::StringRecord, d: usize) -> Result<TraceRecord> {
    let get = |i: usize| rec.get(i).unwrap_or("");
    let phase: Phase = get(2).parse()?;
    let nums = |from: usize| -> Result<Vec<f64>> { (from..from + d).map(|i| parse_f64(get(i))).collect() };
    let y = if phase == Phase::Done { Vec::new() } else { nums(3)? };
    let x_rec = nums(6 + d)?;
    let checkpoint = if x_rec.iter().all(|v| v.is_nan()) {
        None
    } else {
        let p_true = parse_f64(get(6 + 2 * d + 1))?;
        // Only the clamped estimate is stored.
        Some(Checkpoint { x: x_rec, p_hat: parse_f64(get(6 + 2 * d))?, p_true, p_true_raw: p_true, p_true_se: f64::NAN })
    };
    Ok(TraceRecord {
        repeat: get(0).parse().context("repeat")?,
        n: get(1).parse().context("n")?,
        phase,
        y,
        v: parse_f64(get(3 + d))?,
        acq_value: parse_f64(get(4 + d))?,
        rule: get(5 + d).to_string(),
        checkpoint,
        wall_ms: parse_f64(get(8 + 2 * d))?,
    })
}

/// A parsed trace file.
#[derive(Debug, Clone)]
pub struct Trace {
    pub dim: usize,
    pub records: Vec<TraceRecord>,
    /// Bytes of the file covered by complete rows.
    pub valid_len: usize,
}

impl Trace {
    /// Whether the completion marker is present.
    pub fn is_complete(&self) -> bool {
        self.records.last().is_some_and(|r| r.phase == Phase::Done)
    }

    /// `(n, checkpoint)` of every checkpoint row.
    pub fn checkpoints(&self) -> impl Iterator<Item = (usize, &Checkpoint)> {
        self.records.iter().filter_map(|r| r.checkpoint.as_ref().map(|c| (r.n, c)))
    }
}

/// Parses trace text. A trailing line without a newline (an interrupted
/// write) is ignored.
pub fn parse_trace(text: &str) -> Result<Trace> {
    let valid_len = text.rfind('\n').map_or(0, |i| i + 1);
    let body = &text[..valid_len];
    let mut rd = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(body.as_bytes());
    let h = rd.headers()?.clone();
    let dim = dim_of_header(&h).ok_or_else(|| anyhow!("malformed trace header"))?;
    let mut records = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        records.push(parse_row(&rec, dim).with_context(|| format!("trace row {}", i + 1))?);
    }
    Ok(Trace { dim, records, valid_len })
}

pub fn read_trace(path: &Path) -> Result<Trace> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_trace(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Renders records as a complete trace document.
pub fn render(records: &[TraceRecord], d: usize) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header(d)).expect("in-memory write");
    for r in records {
        w.write_record(row_fields(r, d)).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii")
}

/// Appends rows to a trace file, flushing after each one.
pub struct TraceWriter {
    out: csv::Writer<BufWriter<File>>,
    d: usize,
    pub warnings: Vec<String>,
}

impl TraceWriter {
    /// Opens `path` for a repeat of dimension `d`. An existing file is parsed,
    /// cut back to its complete rows and returned for resumption.
    pub fn open(path: &Path, d: usize) -> Result<(Self, Vec<TraceRecord>)> {
        let text = if path.exists() { std::fs::read_to_string(path)? } else { String::new() };
        // Not even a complete header: start over.
        let existing = if text.contains('\n') {
            Some(parse_trace(&text).with_context(|| format!("parsing {}", path.display()))?)
        } else {
            None
        };
        let valid_len = existing.as_ref().map_or(0, |t| t.valid_len);
        let done = match existing {
            Some(t) if valid_len > 0 => {
                if t.dim != d {
                    bail!("{}: trace has dimension {}, configuration has {d}", path.display(), t.dim);
                }
                t.records
            }
            _ => Vec::new(),
        };
        let mut file = OpenOptions::new().create(true).write(true).truncate(false).open(path)?;
        file.set_len(valid_len as u64)?;
        file.seek(SeekFrom::End(0))?;
        let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(BufWriter::new(file));
        if valid_len == 0 {
            out.write_record(header(d))?;
            out.flush()?;
        }
        Ok((Self { out, d, warnings: Vec::new() }, done))
    }
}

impl TraceSink for TraceWriter {
    fn record(&mut self, rec: &TraceRecord) -> relbo_core::Result<()> {
        self.out.write_record(row_fields(rec, self.d)).map_err(|e| relbo_core::Error::Sink(e.to_string()))?;
        // Also flushes the underlying file buffer.
        self.out.flush().map_err(|e| relbo_core::Error::Sink(e.to_string()))
    }

    fn warn(&mut self, repeat: usize, n: usize, message: &str) {
        self.warnings.push(format!("repeat {repeat}, n = {n}: {message}"));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<TraceRecord> {
        let cp = Checkpoint { x: vec![0.25, -1.5e-300], p_hat: 1e-7, p_true: 0.1 + 0.2, p_true_raw: 0.1 + 0.2, p_true_se: f64::NAN };
        vec![
            TraceRecord {
                repeat: 1,
                n: 1,
                phase: Phase::Init,
                y: vec![0.1, 1.0 / 3.0],
                v: -2.5,
                acq_value: f64::NAN,
                rule: "init".into(),
                checkpoint: None,
                wall_ms: 0.0,
            },
            TraceRecord {
                repeat: 1,
                n: 2,
                phase: Phase::Iter,
                y: vec![f64::MIN_POSITIVE, 7.0],
                v: 1e300,
                acq_value: f64::INFINITY,
                rule: "LS".into(),
                checkpoint: Some(cp),
                wall_ms: 0.0,
            },
            TraceRecord {
                repeat: 1,
                n: 2,
                phase: Phase::Done,
                y: vec![],
                v: f64::NAN,
                acq_value: f64::NAN,
                rule: String::new(),
                checkpoint: None,
                wall_ms: 0.0,
            },
        ]
    }

    #[test]
    fn header_layout() {
        assert_eq!(header(2).join(","), "repeat,n,phase,y_1,y_2,v,acq_value,rule,x_rec_1,x_rec_2,p_hat,p_true,wall_ms");
    }

    #[test]
    fn round_trip_is_exact() {
        let recs = sample();
        let text = render(&recs, 2);
        let t = parse_trace(&text).unwrap();
        assert!(t.is_complete());
        assert_eq!(t.dim, 2);
        assert_eq!(format!("{:?}", t.records), format!("{recs:?}"));
        assert_eq!(render(&t.records, 2), text);
    }

    #[test]
    fn interrupted_line_is_dropped() {
        let text = render(&sample(), 2);
        let cut = &text[..text.len() - 5];
        let t = parse_trace(cut).unwrap();
        assert_eq!(t.records.len(), 2);
        assert!(!t.is_complete());
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-2.0), "-2.0000000000000000e0");
    }
}
