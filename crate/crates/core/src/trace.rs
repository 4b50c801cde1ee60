//! Per-iteration run records and their CSV form.
//!
//! The file is a header line `k,seconds,f,B,gap,rank,step,alpha,Na,Nb,Nc,Nd`,
//! one row per record, and a single trailing `# summary key=value ...` line.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

pub const CSV_HEADER: &str = "k,seconds,f,B,gap,rank,step,alpha,Na,Nb,Nc,Nd";
const SUMMARY_PREFIX: &str = "# summary";

/// `(f − B)/B` when `B > 0`, else the absolute gap `f − B`.
pub fn relative_gap(f: f64, bound: f64) -> f64 {
    if bound > 0.0 {
        (f - bound) / bound
    } else {
        f - bound
    }
}

/// How an iterate was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepKind {
    Init,
    /// Regular Frank-Wolfe (toward) step.
    FrankWolfe,
    /// Boundary in-face step that reached a lower-dimensional face.
    FaceDrop,
    /// Boundary in-face step that stayed in the face.
    FaceStay,
    /// In-face step taken from an interior iterate.
    Interior,
    /// Face optimization followed by a Frank-Wolfe step.
    FaceOptFw,
    /// Away step on the atomic weights.
    AtomAway,
}

/// Step classes for rank accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepClass {
    A,
    B,
    C,
    D,
}

impl StepKind {
    pub const ALL: [StepKind; 7] = [
        StepKind::Init,
        StepKind::FrankWolfe,
        StepKind::FaceDrop,
        StepKind::FaceStay,
        StepKind::Interior,
        StepKind::FaceOptFw,
        StepKind::AtomAway,
    ];

    pub fn label(self) -> &'static str {
        match self {
            StepKind::Init => "init",
            StepKind::FrankWolfe => "fw",
            StepKind::FaceDrop => "face-drop",
            StepKind::FaceStay => "face-stay",
            StepKind::Interior => "interior",
            StepKind::FaceOptFw => "face-opt+fw",
            StepKind::AtomAway => "atom-away",
        }
    }

    pub fn class(self) -> Option<StepClass> {
        match self {
            StepKind::Init => None,
            StepKind::FrankWolfe | StepKind::FaceOptFw => Some(StepClass::C),
            StepKind::FaceDrop => Some(StepClass::A),
            StepKind::FaceStay => Some(StepClass::B),
            StepKind::Interior | StepKind::AtomAway => Some(StepClass::D),
        }
    }
}

impl fmt::Display for StepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for StepKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StepKind::ALL.into_iter().find(|k| k.label() == s).ok_or_else(|| format!("unknown step kind `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepCounters {
    pub a: usize,
    pub b: usize,
    pub c: usize,
    pub d: usize,
}

impl StepCounters {
    pub fn total(&self) -> usize {
        self.a + self.b + self.c + self.d
    }

    pub fn count(&mut self, kind: StepKind) {
        match kind.class() {
            Some(StepClass::A) => self.a += 1,
            Some(StepClass::B) => self.b += 1,
            Some(StepClass::C) => self.c += 1,
            Some(StepClass::D) => self.d += 1,
            None => {}
        }
    }

    /// `k + 1 − 2N_a − N_b` with `k` the number of counted steps.
    pub fn rank_bound(&self) -> i64 {
        self.total() as i64 + 1 - 2 * self.a as i64 - self.b as i64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub seconds: f64,
    pub f: f64,
    pub bound: f64,
    pub gap: f64,
    pub rank: usize,
    /// Step that produced this iterate.
    pub step: StepKind,
    pub alpha: f64,
    /// Counts over the steps before this iterate.
    pub counters: StepCounters,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    GapReached,
    MaxIterations,
    TimeLimit,
    /// The gradient vanished.
    Optimal,
}

impl StopReason {
    pub fn label(self) -> &'static str {
        match self {
            StopReason::GapReached => "gap",
            StopReason::MaxIterations => "max-iters",
            StopReason::TimeLimit => "time-limit",
            StopReason::Optimal => "optimal",
        }
    }
}

impl FromStr for StopReason {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [StopReason::GapReached, StopReason::MaxIterations, StopReason::TimeLimit, StopReason::Optimal]
            .into_iter()
            .find(|r| r.label() == s)
            .ok_or_else(|| format!("unknown stop reason `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub method: String,
    pub reason: StopReason,
    pub iterations: usize,
    pub final_rank: usize,
    pub max_rank: usize,
    pub seconds: f64,
    pub final_f: f64,
    pub final_bound: f64,
    pub final_gap: f64,
    pub violations: usize,
    pub inexact_oracles: usize,
    pub face_opt_fallbacks: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    pub records: Vec<IterationRecord>,
    pub summary: Option<RunSummary>,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

impl RunTrace {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for r in &self.records {
            let c = r.counters;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.k, r.seconds, r.f, r.bound, r.gap, r.rank, r.step, r.alpha, c.a, c.b, c.c, c.d
            )?;
        }
        if let Some(s) = &self.summary {
            writeln!(
                w,
                "{SUMMARY_PREFIX} method={} reason={} iterations={} final_rank={} max_rank={} seconds={} final_f={} \
                 final_bound={} final_gap={} violations={} inexact_oracles={} face_opt_fallbacks={}",
                s.method,
                s.reason.label(),
                s.iterations,
                s.final_rank,
                s.max_rank,
                s.seconds,
                s.final_f,
                s.final_bound,
                s.final_gap,
                s.violations,
                s.inexact_oracles,
                s.face_opt_fallbacks
            )?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self, TraceError> {
        let mut trace = RunTrace::default();
        let mut seen_header = false;
        for (idx, line) in reader.lines().enumerate() {
            let lineno = idx + 1;
            let bad = |message: String| TraceError::Format { line: lineno, message };
            let line = line.map_err(|e| bad(e.to_string()))?;
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix(SUMMARY_PREFIX) {
                trace.summary = Some(parse_summary(rest).map_err(bad)?);
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            if !seen_header {
                if line != CSV_HEADER {
                    return Err(bad(format!("expected header `{CSV_HEADER}`")));
                }
                seen_header = true;
                continue;
            }
            trace.records.push(parse_row(line).map_err(bad)?);
        }
        if !seen_header {
            return Err(TraceError::Format { line: 0, message: "missing header".into() });
        }
        Ok(trace)
    }
}

fn field<T: FromStr>(value: &str, name: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("invalid {name} `{value}`"))
}

fn parse_row(line: &str) -> Result<IterationRecord, String> {
    let f: Vec<&str> = line.split(',').collect();
    if f.len() != 12 {
        return Err(format!("expected 12 fields, found {}", f.len()));
    }
    Ok(IterationRecord {
        k: field(f[0], "k")?,
        seconds: field(f[1], "seconds")?,
        f: field(f[2], "f")?,
        bound: field(f[3], "B")?,
        gap: field(f[4], "gap")?,
        rank: field(f[5], "rank")?,
        step: f[6].parse()?,
        alpha: field(f[7], "alpha")?,
        counters: StepCounters {
            a: field(f[8], "Na")?,
            b: field(f[9], "Nb")?,
            c: field(f[10], "Nc")?,
            d: field(f[11], "Nd")?,
        },
    })
}

fn parse_summary(rest: &str) -> Result<RunSummary, String> {
    let text: String = rest.split_whitespace().map(|kv| format!("{kv}\n")).collect();
    let map = crate::kv::parse_flat(&text)?;
    let get = |k: &str| map.get(k).map(String::as_str).ok_or_else(|| format!("summary lacks `{k}`"));
    Ok(RunSummary {
        method: get("method")?.to_string(),
        reason: get("reason")?.parse()?,
        iterations: field(get("iterations")?, "iterations")?,
        final_rank: field(get("final_rank")?, "final_rank")?,
        max_rank: field(get("max_rank")?, "max_rank")?,
        seconds: field(get("seconds")?, "seconds")?,
        final_f: field(get("final_f")?, "final_f")?,
        final_bound: field(get("final_bound")?, "final_bound")?,
        final_gap: field(get("final_gap")?, "final_gap")?,
        violations: field(get("violations")?, "violations")?,
        inexact_oracles: field(get("inexact_oracles")?, "inexact_oracles")?,
        face_opt_fallbacks: field(get("face_opt_fallbacks")?, "face_opt_fallbacks")?,
    })
}

pub fn export_trace(trace: &RunTrace, path: &Path) -> Result<(), TraceError> {
    let io = |source| TraceError::Io { path: path.to_path_buf(), source };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    trace.write_csv(&mut w).map_err(io)?;
    w.flush().map_err(io)
}

pub fn import_trace(path: &Path) -> Result<RunTrace, TraceError> {
    let file = File::open(path).map_err(|source| TraceError::Io { path: path.to_path_buf(), source })?;
    RunTrace::read_csv(BufReader::new(file))
}
