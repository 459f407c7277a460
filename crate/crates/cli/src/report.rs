use std::fmt::Write as _;
use std::fs::File;
use std::path::Path;

use crate::record::{read_records, BenchRecord, RecordError};

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    /// The input row with both speed-up columns recomputed.
    pub record: BenchRecord,
    /// Whether the row enters the means.
    pub counted: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub rows: Vec<ReportRow>,
    /// Arithmetic mean of the per-row ratios over counted rows.
    pub mean_speed_up: Option<f64>,
    pub mean_speed_up_with_norm: Option<f64>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

impl Report {
    /// Rows whose verdict is TIMEOUT or ERROR are listed but not averaged.
    pub fn new(records: &[BenchRecord]) -> Self {
        let rows: Vec<ReportRow> = records
            .iter()
            .map(|r| {
                let record = r.clone().with_speed_ups();
                let counted = record.solver_verdict.is_none_or(|v| v.is_decided())
                    && record.speed_up.is_some()
                    && record.speed_up_with_norm.is_some();
                ReportRow { record, counted }
            })
            .collect();
        let counted = || rows.iter().filter(|r| r.counted).map(|r| &r.record);
        Report {
            mean_speed_up: mean(counted().filter_map(|r| r.speed_up)),
            mean_speed_up_with_norm: mean(counted().filter_map(|r| r.speed_up_with_norm)),
            rows,
        }
    }

    pub fn records(&self) -> Vec<BenchRecord> {
        self.rows.iter().map(|r| r.record.clone()).collect()
    }

    /// Aligned text table with a trailing mean row.
    pub fn table(&self) -> String {
        let cell = |v: Option<f64>| v.map_or("-".to_owned(), |v| format!("{v:.4}"));
        let mut lines: Vec<[String; 8]> = vec![[
            "problem",
            "bit",
            "verdict",
            "orig_ms",
            "nf_ms",
            "norm_ms",
            "speed_up",
            "with_norm",
        ]
        .map(str::to_owned)];
        for row in &self.rows {
            let r = &row.record;
            lines.push([
                r.problem.clone(),
                r.bit.map_or("-".to_owned(), |b| b.to_string()),
                r.solver_verdict.map_or("-".to_owned(), |v| v.to_string()),
                cell(r.solver_ms_orig),
                cell(r.solver_ms_nf),
                cell(r.ol_norm_ms),
                cell(r.speed_up),
                cell(r.speed_up_with_norm),
            ]);
        }
        let n = self.rows.iter().filter(|r| r.counted).count();
        let blank = || "".to_owned();
        lines.push([
            format!("mean ({n} rows)"),
            blank(),
            blank(),
            blank(),
            blank(),
            blank(),
            cell(self.mean_speed_up),
            cell(self.mean_speed_up_with_norm),
        ]);
        let mut width = [0; 8];
        for l in &lines {
            for (w, c) in width.iter_mut().zip(l) {
                *w = (*w).max(c.chars().count());
            }
        }
        let mut out = String::new();
        for l in &lines {
            let mut line = String::new();
            for (k, (c, w)) in l.iter().zip(width).enumerate() {
                if k == 0 {
                    let _ = write!(line, "{c:<w$}");
                } else {
                    let _ = write!(line, "  {c:>w$}");
                }
            }
            out.push_str(line.trim_end());
            out.push('\n');
        }
        out
    }
}

/// Reads a record CSV and computes the report.
pub fn report(csv_path: &Path) -> Result<Report, RecordError> {
    let file = File::open(csv_path).map_err(csv::Error::from)?;
    Ok(Report::new(&read_records(file)?))
}
