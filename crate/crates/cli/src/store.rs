//! Line-oriented curve store.
//!
//! ```text
//! #gl2census v1 ell=5 window=200 probe=1000 cexp=960 height=4
//! -4,-1
//! 1,1,1,S,7:-3;11:-2;13:-4,*;2;1;...,2^4;31^1,0,2^3264;5^960;31^384
//! ```
//!
//! Bare rows are `A,B`. Classified rows are
//! `A,B,ss,verdict,witnesses,fingerprint,serre,exact,disc` where `ss` is
//! `1`/`0`, `verdict` is `S`, `N:missing` or `N:cm`, `witnesses` is
//! `p:a_p;p:a_p;p:a_p` or `-`, the fingerprint lists residues with `*` at
//! bad primes, and the last three fields are `-` outside the census family.
//! Rows are strictly increasing in `(A, B)`. A final line without a newline
//! is treated as a torn write and dropped.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use gl2census_core::classify::ClassifiedCurve;
use gl2census_core::galois::{fingerprint_window, FrobeniusSample, NotCertifiedReason, SurjectivityVerdict};
use gl2census_core::levels::{ExponentLedger, LevelData};
use gl2census_core::{CurveRecord, Fingerprint};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("missing or malformed header line")]
    BadHeader,
    #[error("header mismatch: {0}")]
    HeaderMismatch(String),
    #[error("line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
    #[error("record ({0}, {1}) is not after the previous key")]
    DuplicateKey(i64, i64),
    #[error("store {0} already exists (pass --force to overwrite)")]
    Exists(String),
    #[error("store {0} holds bare rows; run classify first")]
    NotClassified(String),
    #[error("{0}")]
    Underpopulated(String),
}

impl StoreError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        StoreError::Io { path: path.display().to_string(), source }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoreHeader {
    pub format_version: u32,
    pub ell: u64,
    pub window_bound: u64,
    pub probe_bound: u64,
    pub c_ell_exponent: u64,
    /// The store holds every curve of height at most this.
    pub height_completed: f64,
}

impl StoreHeader {
    pub fn line(&self) -> String {
        format!(
            "#gl2census v{} ell={} window={} probe={} cexp={} height={}",
            self.format_version,
            self.ell,
            self.window_bound,
            self.probe_bound,
            self.c_ell_exponent,
            self.height_completed
        )
    }

    pub fn parse(line: &str) -> Result<Self, StoreError> {
        let mut parts = line.split(' ');
        if parts.next() != Some("#gl2census") {
            return Err(StoreError::BadHeader);
        }
        let format_version = parts
            .next()
            .and_then(|v| v.strip_prefix('v'))
            .and_then(|v| v.parse().ok())
            .ok_or(StoreError::BadHeader)?;
        if format_version != FORMAT_VERSION {
            return Err(StoreError::HeaderMismatch(format!("unsupported format v{format_version}")));
        }
        let mut field = |name: &str| {
            parts
                .next()
                .and_then(|kv| kv.strip_prefix(name))
                .and_then(|v| v.strip_prefix('='))
                .map(str::to_owned)
                .ok_or(StoreError::BadHeader)
        };
        let int = |s: String| s.parse::<u64>().map_err(|_| StoreError::BadHeader);
        let header = StoreHeader {
            format_version,
            ell: int(field("ell")?)?,
            window_bound: int(field("window")?)?,
            probe_bound: int(field("probe")?)?,
            c_ell_exponent: int(field("cexp")?)?,
            height_completed: field("height")?.parse().map_err(|_| StoreError::BadHeader)?,
        };
        if parts.next().is_some() {
            return Err(StoreError::BadHeader);
        }
        Ok(header)
    }

    /// Fails unless the classification parameters agree.
    pub fn check_compatible(&self, other: &StoreHeader) -> Result<(), StoreError> {
        let pairs = [
            ("ell", self.ell, other.ell),
            ("window", self.window_bound, other.window_bound),
            ("probe", self.probe_bound, other.probe_bound),
            ("cexp", self.c_ell_exponent, other.c_ell_exponent),
        ];
        for (name, a, b) in pairs {
            if a != b {
                return Err(StoreError::HeaderMismatch(format!("{name}: store has {a}, run uses {b}")));
            }
        }
        Ok(())
    }
}

#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StoreRecord {
    Bare(i64, i64),
    Classified(ClassifiedCurve),
}

impl StoreRecord {
    pub fn key(&self) -> (i64, i64) {
        match self {
            StoreRecord::Bare(a, b) => (*a, *b),
            StoreRecord::Classified(c) => c.key(),
        }
    }

    pub fn classified(&self) -> Option<&ClassifiedCurve> {
        match self {
            StoreRecord::Classified(c) => Some(c),
            StoreRecord::Bare(..) => None,
        }
    }

    pub fn to_line(&self) -> String {
        match self {
            StoreRecord::Bare(a, b) => format!("{a},{b}"),
            StoreRecord::Classified(c) => classified_line(c),
        }
    }
}

fn classified_line(c: &ClassifiedCurve) -> String {
    let mut s = format!("{},{},{},", c.a, c.b, c.semistable_away_23 as u8);
    s.push_str(match (c.verdict.is_certified(), c.verdict.reason) {
        (true, _) => "S",
        (false, Some(NotCertifiedReason::CmLike)) => "N:cm",
        (false, _) => "N:missing",
    });
    s.push(',');
    match &c.verdict.witnesses {
        Some(ws) => {
            let parts: Vec<String> = ws.iter().map(|w| format!("{}:{}", w.p, w.ap)).collect();
            s.push_str(&parts.join(";"));
        }
        None => s.push('-'),
    }
    s.push(',');
    for (i, v) in c.fingerprint.values.iter().enumerate() {
        if i > 0 {
            s.push(';');
        }
        match v {
            Some(t) => write!(s, "{t}").expect("string write"),
            None => s.push('*'),
        }
    }
    match &c.levels {
        Some(l) => write!(
            s,
            ",{},{},{}",
            l.serre_level_upper, l.serre_level_exact_away_23 as u8, l.disc_bound
        )
        .expect("string write"),
        None => s.push_str(",-,-,-"),
    }
    s
}

fn parse_pair(a: &str, b: &str) -> Option<(i64, i64)> {
    Some((a.parse().ok()?, b.parse().ok()?))
}

/// Parses one record line against the header configuration.
pub fn parse_record(line: &str, header: &StoreHeader) -> Result<StoreRecord, String> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() == 2 {
        let (a, b) = parse_pair(fields[0], fields[1]).ok_or("bad coefficients")?;
        CurveRecord::new(a, b).map_err(|e| e.to_string())?;
        return Ok(StoreRecord::Bare(a, b));
    }
    if fields.len() != 9 {
        return Err(format!("expected 2 or 9 fields, found {}", fields.len()));
    }
    let (a, b) = parse_pair(fields[0], fields[1]).ok_or("bad coefficients")?;
    CurveRecord::new(a, b).map_err(|e| e.to_string())?;
    let ell = header.ell;
    let semistable = match fields[2] {
        "1" => true,
        "0" => false,
        other => return Err(format!("bad semistability flag {other:?}")),
    };
    let witnesses = if fields[4] == "-" {
        None
    } else {
        let mut ws = Vec::with_capacity(3);
        for w in fields[4].split(';') {
            let (p, ap) = w.split_once(':').ok_or("bad witness")?;
            let (p, ap): (u64, i64) = (p.parse().map_err(|_| "bad witness prime")?, ap.parse().map_err(|_| "bad trace")?);
            if (ap as i128).pow(2) > 4 * p as i128 {
                return Err(format!("trace {ap} at {p} violates the Hasse bound"));
            }
            ws.push(FrobeniusSample::new(p, ap, ell));
        }
        Some(<[FrobeniusSample; 3]>::try_from(ws).map_err(|_| "expected three witnesses")?)
    };
    let verdict = match (fields[3], witnesses) {
        ("S", Some(ws)) => SurjectivityVerdict::certified(ws),
        ("N:missing", None) => SurjectivityVerdict::not_certified(NotCertifiedReason::WitnessMissing),
        ("N:cm", None) => SurjectivityVerdict::not_certified(NotCertifiedReason::CmLike),
        (v, _) => return Err(format!("verdict {v:?} inconsistent with witnesses")),
    };
    if !verdict.recheck(ell) {
        return Err("stored witnesses fail the certificate".into());
    }
    let values = fields[5]
        .split(';')
        .map(|v| match v {
            "*" => Ok(None),
            v => v.parse::<u8>().ok().filter(|&t| (t as u64) < ell).map(Some).ok_or("bad residue"),
        })
        .collect::<Result<Vec<_>, _>>()?;
    if values.len() != fingerprint_window(ell, header.window_bound).len() {
        return Err("fingerprint length does not match the window".into());
    }
    let fingerprint = Fingerprint { ell, window_bound: header.window_bound, values };
    let levels = match (fields[6], fields[7], fields[8]) {
        ("-", "-", "-") => None,
        (serre, exact, disc) => Some(LevelData {
            ell,
            serre_level_upper: serre.parse().map_err(|_| "bad serre ledger")?,
            serre_level_exact_away_23: match exact {
                "1" => true,
                "0" => false,
                _ => return Err("bad exactness flag".into()),
            },
            disc_bound: disc.parse::<ExponentLedger>().map_err(|_| "bad disc ledger")?,
            c_ell_exponent: header.c_ell_exponent,
        }),
    };
    let classified = ClassifiedCurve { a, b, semistable_away_23: semistable, verdict, fingerprint, levels };
    if classified.levels.is_some() != classified.in_family() {
        return Err("level data present iff semistable and certified".into());
    }
    Ok(StoreRecord::Classified(classified))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoreContents {
    pub header: StoreHeader,
    pub records: Vec<StoreRecord>,
    /// The last line was torn and has been dropped.
    pub truncated: bool,
}

impl StoreContents {
    /// All rows classified; `None` if some are bare.
    pub fn classified(&self) -> Option<Vec<ClassifiedCurve>> {
        self.records.iter().map(|r| r.classified().cloned()).collect()
    }

    pub fn is_classified(&self) -> bool {
        !self.records.is_empty() && self.records.iter().all(|r| r.classified().is_some())
    }
}

/// Reads a store, keeping records for which `keep` holds, in file order.
pub fn scan<F: FnMut(&StoreRecord) -> bool>(path: &Path, mut keep: F) -> Result<StoreContents, StoreError> {
    let file = File::open(path).map_err(|e| StoreError::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut line = String::new();
    let mut read = |buf: &mut String| {
        buf.clear();
        reader.read_line(buf).map_err(|e| StoreError::io(path, e))
    };
    if read(&mut line)? == 0 || !line.ends_with('\n') {
        return Err(StoreError::BadHeader);
    }
    let header = StoreHeader::parse(line.trim_end_matches('\n'))?;
    let mut records = Vec::new();
    let mut truncated = false;
    let mut last: Option<(i64, i64)> = None;
    let mut number = 1;
    while read(&mut line)? > 0 {
        number += 1;
        let Some(body) = line.strip_suffix('\n') else {
            truncated = true;
            break;
        };
        let record = parse_record(body, &header).map_err(|reason| StoreError::Corrupt { line: number, reason })?;
        if last.is_some_and(|k| k >= record.key()) {
            return Err(StoreError::Corrupt { line: number, reason: "keys out of order".into() });
        }
        last = Some(record.key());
        if keep(&record) {
            records.push(record);
        }
    }
    Ok(StoreContents { header, records, truncated })
}

pub fn read_store(path: &Path) -> Result<StoreContents, StoreError> {
    scan(path, |_| true)
}

/// Appends records in strictly increasing key order.
pub struct StoreWriter<W: Write> {
    out: W,
    header: StoreHeader,
    last: Option<(i64, i64)>,
}

impl StoreWriter<BufWriter<File>> {
    pub fn create(path: &Path, header: StoreHeader) -> Result<Self, StoreError> {
        let file = File::create(path).map_err(|e| StoreError::io(path, e))?;
        StoreWriter::new(BufWriter::new(file), header).map_err(|e| StoreError::io(path, e))
    }

    /// Reopens a store for appending after its last complete record,
    /// cutting off a torn final line.
    pub fn resume(path: &Path, expected: &StoreHeader) -> Result<(Self, StoreContents), StoreError> {
        let contents = read_store(path)?;
        contents.header.check_compatible(expected)?;
        let mut text = contents.header.line();
        text.push('\n');
        for r in &contents.records {
            text.push_str(&r.to_line());
            text.push('\n');
        }
        std::fs::write(path, &text).map_err(|e| StoreError::io(path, e))?;
        let file = File::options().append(true).open(path).map_err(|e| StoreError::io(path, e))?;
        let writer = StoreWriter {
            out: BufWriter::new(file),
            header: contents.header.clone(),
            last: contents.records.last().map(StoreRecord::key),
        };
        Ok((writer, contents))
    }
}

impl<W: Write> StoreWriter<W> {
    pub fn new(mut out: W, header: StoreHeader) -> io::Result<Self> {
        writeln!(out, "{}", header.line())?;
        Ok(StoreWriter { out, header, last: None })
    }

    pub fn header(&self) -> &StoreHeader {
        &self.header
    }

    pub fn append(&mut self, record: &StoreRecord) -> Result<(), StoreError> {
        let key = record.key();
        if self.last.is_some_and(|k| k >= key) {
            return Err(StoreError::DuplicateKey(key.0, key.1));
        }
        if let StoreRecord::Classified(c) = record {
            let h = &self.header;
            if c.fingerprint.ell != h.ell || c.fingerprint.window_bound != h.window_bound {
                return Err(StoreError::HeaderMismatch(format!(
                    "record ({}, {}) has ell={} window={}",
                    c.a, c.b, c.fingerprint.ell, c.fingerprint.window_bound
                )));
            }
            if c.levels.as_ref().is_some_and(|l| l.c_ell_exponent != h.c_ell_exponent) {
                return Err(StoreError::HeaderMismatch(format!("record ({}, {}) has a different cexp", c.a, c.b)));
            }
        }
        writeln!(self.out, "{}", record.to_line()).map_err(|e| StoreError::Io { path: "<store>".into(), source: e })?;
        self.last = Some(key);
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), StoreError> {
        self.out.flush().map_err(|e| StoreError::Io { path: "<store>".into(), source: e })
    }

    pub fn into_inner(mut self) -> Result<W, StoreError> {
        self.flush()?;
        Ok(self.out)
    }
}
