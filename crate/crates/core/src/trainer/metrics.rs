use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "step,loss,psnr_f32,psnr_f16,bpp,expected_bpp,lambda,feasible,wall_ms";

/// One evaluation checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub step: usize,
    pub loss: f64,
    pub psnr_f32: f64,
    /// PSNR of the decoded model: binary16 parameters, 8-bit output.
    pub psnr_f16: f64,
    pub bpp: f64,
    pub expected_bpp: f64,
    pub lambda: f64,
    pub feasible: bool,
    pub wall_ms: u64,
}

/// Multiplier update of a single constrained step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualRecord {
    pub step: usize,
    pub violation: f64,
    pub lambda_before: f64,
    pub lambda_after: f64,
}

/// Checkpoint records plus the running best-PSNR meters.
///
/// `best_feasible_psnr` only ever sees feasible checkpoints, so a constrained
/// run's meter starts counting the first time it meets its budget.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsLog {
    pub records: Vec<MetricsRecord>,
    /// Every multiplier update (empty for unconstrained methods).
    pub dual_trace: Vec<DualRecord>,
    best_psnr: Option<f64>,
    best_feasible_psnr: Option<f64>,
}

fn keep_max(slot: &mut Option<f64>, value: f64) {
    if !value.is_nan() && slot.is_none_or(|best| value > best) {
        *slot = Some(value);
    }
}

impl MetricsLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: MetricsRecord) {
        keep_max(&mut self.best_psnr, record.psnr_f16);
        if record.feasible {
            keep_max(&mut self.best_feasible_psnr, record.psnr_f16);
        }
        self.records.push(record);
    }

    /// Appends another log, shifting its steps by `step_offset`.
    pub fn extend_shifted(&mut self, other: MetricsLog, step_offset: usize) {
        for mut r in other.records {
            r.step += step_offset;
            self.push(r);
        }
        self.dual_trace
            .extend(other.dual_trace.into_iter().map(|mut d| {
                d.step += step_offset;
                d
            }));
    }

    pub fn best_psnr(&self) -> Option<f64> {
        self.best_psnr
    }

    pub fn best_feasible_psnr(&self) -> Option<f64> {
        self.best_feasible_psnr
    }

    pub fn last(&self) -> Option<&MetricsRecord> {
        self.records.last()
    }

    /// Writes the CSV, optionally preceded by a `# ` comment line.
    pub fn write_csv<W: Write>(&self, mut out: W, comment: Option<&str>) -> io::Result<()> {
        if let Some(comment) = comment {
            for line in comment.lines() {
                writeln!(out, "# {line}")?;
            }
        }
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.step,
                r.loss,
                r.psnr_f32,
                r.psnr_f16,
                r.bpp,
                r.expected_bpp,
                r.lambda,
                r.feasible,
                r.wall_ms
            )?;
        }
        Ok(())
    }

    /// Reads records back from [`write_csv`](Self::write_csv) output,
    /// skipping comment lines.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let bad = |line: &str| Error::InvalidConfig(format!("malformed metrics row {line:?}"));
        let mut log = Self::new();
        let mut seen_header = false;
        for line in input.lines() {
            let line = line.map_err(|source| Error::Io {
                path: "<metrics>".into(),
                source,
            })?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !seen_header {
                if line != CSV_HEADER {
                    return Err(Error::InvalidConfig(format!(
                        "unexpected metrics header {line:?}"
                    )));
                }
                seen_header = true;
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 9 {
                return Err(bad(line));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(line));
            log.push(MetricsRecord {
                step: f[0].parse().map_err(|_| bad(line))?,
                loss: num(f[1])?,
                psnr_f32: num(f[2])?,
                psnr_f16: num(f[3])?,
                bpp: num(f[4])?,
                expected_bpp: num(f[5])?,
                lambda: num(f[6])?,
                feasible: f[7].parse().map_err(|_| bad(line))?,
                wall_ms: f[8].parse().map_err(|_| bad(line))?,
            });
        }
        Ok(log)
    }
}
