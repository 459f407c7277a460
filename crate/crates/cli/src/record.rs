use std::fmt;
use std::io;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SolverVerdict {
    Sat,
    Unsat,
    Timeout,
    Error,
}

impl SolverVerdict {
    /// Whether the row counts towards averages.
    pub fn is_decided(self) -> bool {
        matches!(self, SolverVerdict::Sat | SolverVerdict::Unsat)
    }
}

impl fmt::Display for SolverVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverVerdict::Sat => "SAT",
            SolverVerdict::Unsat => "UNSAT",
            SolverVerdict::Timeout => "TIMEOUT",
            SolverVerdict::Error => "ERROR",
        })
    }
}

impl FromStr for SolverVerdict {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "SAT" => Ok(SolverVerdict::Sat),
            "UNSAT" => Ok(SolverVerdict::Unsat),
            "TIMEOUT" => Ok(SolverVerdict::Timeout),
            "ERROR" => Ok(SolverVerdict::Error),
            _ => Err(format!("unknown verdict {s:?}")),
        }
    }
}

/// One CSV row. Sizes are AND-gate counts; times are milliseconds. Empty
/// cells deserialize to `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub problem: String,
    pub bit: Option<usize>,
    pub size_orig: Option<usize>,
    pub size_nf: Option<usize>,
    pub ol_norm_ms: Option<f64>,
    pub ol_prove_ms: Option<f64>,
    pub solver_verdict: Option<SolverVerdict>,
    pub solver_ms_orig: Option<f64>,
    pub solver_ms_nf: Option<f64>,
    pub speed_up: Option<f64>,
    pub speed_up_with_norm: Option<f64>,
}

pub const CSV_HEADER: &str = "problem,bit,size_orig,size_nf,ol_norm_ms,ol_prove_ms,solver_verdict,\
solver_ms_orig,solver_ms_nf,speed_up,speed_up_with_norm";

impl BenchRecord {
    pub fn new(problem: impl Into<String>, bit: Option<usize>) -> Self {
        BenchRecord {
            problem: problem.into(),
            bit,
            size_orig: None,
            size_nf: None,
            ol_norm_ms: None,
            ol_prove_ms: None,
            solver_verdict: None,
            solver_ms_orig: None,
            solver_ms_nf: None,
            speed_up: None,
            speed_up_with_norm: None,
        }
    }

    /// `orig / nf - 1`.
    pub fn compute_speed_up(&self) -> Option<f64> {
        Some(self.solver_ms_orig? / self.solver_ms_nf? - 1.0)
    }

    /// `orig / (nf + norm) - 1`.
    pub fn compute_speed_up_with_norm(&self) -> Option<f64> {
        Some(self.solver_ms_orig? / (self.solver_ms_nf? + self.ol_norm_ms?) - 1.0)
    }

    /// Fills both derived columns from the raw ones.
    pub fn with_speed_ups(mut self) -> Self {
        self.speed_up = self.compute_speed_up();
        self.speed_up_with_norm = self.compute_speed_up_with_norm();
        self
    }

    fn validate(&self) -> Result<(), String> {
        let times = [
            ("ol_norm_ms", self.ol_norm_ms),
            ("ol_prove_ms", self.ol_prove_ms),
            ("solver_ms_orig", self.solver_ms_orig),
            ("solver_ms_nf", self.solver_ms_nf),
        ];
        for (name, t) in times {
            if let Some(t) = t {
                if !(t.is_finite() && t >= 0.0) {
                    return Err(format!(
                        "{name} must be a finite non-negative time, got {t}"
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RecordError {
    #[error("row {row}: {msg}")]
    Row { row: usize, msg: String },
    #[error("bad header: expected {CSV_HEADER}")]
    Header,
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Reads records; `row` in errors counts data rows from 1.
pub fn read_records<R: io::Read>(reader: R) -> Result<Vec<BenchRecord>, RecordError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header.join(",") != CSV_HEADER {
        return Err(RecordError::Header);
    }
    let mut out = Vec::new();
    for (k, row) in rdr.deserialize::<BenchRecord>().enumerate() {
        let row_err = |msg: String| RecordError::Row { row: k + 1, msg };
        let rec = row.map_err(|e| row_err(e.to_string()))?;
        rec.validate().map_err(row_err)?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_records<W: io::Write>(writer: W, records: &[BenchRecord]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    if records.is_empty() {
        w.write_record(CSV_HEADER.split(','))?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
