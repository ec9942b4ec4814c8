use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bench::{BenchKind, DomainGapReport};
use crate::error::{Error, Result};
use crate::io::{write_atomic, write_json};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedAccuracy {
    pub seed: u64,
    pub accuracy: f64,
}

/// Accuracy of one method on one evaluation set, over seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitResult {
    pub split: String,
    pub kind: BenchKind,
    /// Background pool for SCUB and SCUF sets.
    pub pool: Option<String>,
    pub per_seed: Vec<SeedAccuracy>,
    pub mean: f64,
    /// Sample standard deviation; only with two or more seeds.
    pub std: Option<f64>,
}

impl SplitResult {
    pub fn new(split: impl Into<String>, kind: BenchKind, pool: Option<String>, per_seed: Vec<SeedAccuracy>) -> Result<Self> {
        let split = split.into();
        if per_seed.is_empty() {
            return Err(Error::EmptyInput(format!("no accuracies for {split}")));
        }
        if let Some(bad) = per_seed.iter().find(|s| !(0.0..=1.0).contains(&s.accuracy)) {
            return Err(Error::Validation(format!("accuracy {} on {split} is outside [0, 1]", bad.accuracy)));
        }
        let (mean, std) = mean_std(&per_seed.iter().map(|s| s.accuracy).collect::<Vec<_>>());
        Ok(SplitResult {
            split,
            kind,
            pool,
            per_seed,
            mean,
            std,
        })
    }
}

/// Mean and sample standard deviation (`None` below two values).
pub fn mean_std(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.len() >= 2).then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (mean, std)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodReport {
    pub method: String,
    pub splits: Vec<SplitResult>,
}

impl MethodReport {
    pub fn split(&self, name: &str) -> Option<&SplitResult> {
        self.splits.iter().find(|s| s.split == name)
    }

    /// Mean accuracy over every set of `kind`, averaging per-set means.
    pub fn mean_over(&self, kind: BenchKind) -> Option<f64> {
        let means: Vec<f64> = self.splits.iter().filter(|s| s.kind == kind).map(|s| s.mean).collect();
        (!means.is_empty()).then(|| means.iter().sum::<f64>() / means.len() as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunMetadata {
    /// SHA-256 of the canonical config JSON.
    pub config_hash: String,
    pub seeds: Vec<u64>,
    /// Seconds spent in each stage when it was computed, keyed by stage.
    pub durations: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalReport {
    pub methods: Vec<MethodReport>,
    pub domain_gaps: Vec<DomainGapReport>,
    pub metadata: RunMetadata,
}

impl EvalReport {
    pub fn method(&self, name: &str) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.method == name)
    }

    /// One row per method x split x seed.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["method", "split", "kind", "pool", "seed", "accuracy"])
            .map_err(csv_error)?;
        for m in &self.methods {
            for s in &m.splits {
                for r in &s.per_seed {
                    w.write_record([
                        m.method.as_str(),
                        s.split.as_str(),
                        kind_name(s.kind),
                        s.pool.as_deref().unwrap_or(""),
                        &r.seed.to_string(),
                        &r.accuracy.to_string(),
                    ])
                    .map_err(csv_error)?;
                }
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Validation(format!("csv: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::Validation(format!("csv: {e}")))
    }

    /// Methods as rows and evaluation sets as columns, in percent.
    pub fn to_table(&self) -> String {
        let mut columns: Vec<&str> = Vec::new();
        for m in &self.methods {
            for s in &m.splits {
                if !columns.contains(&s.split.as_str()) {
                    columns.push(&s.split);
                }
            }
        }
        let cell = |m: &MethodReport, col: &str| match m.split(col) {
            Some(s) => match s.std {
                Some(sd) => format!("{:.1}±{:.1}", 100.0 * s.mean, 100.0 * sd),
                None => format!("{:.1}", 100.0 * s.mean),
            },
            None => "-".to_string(),
        };
        let mut rows: Vec<Vec<String>> = vec![std::iter::once("method".to_string())
            .chain(columns.iter().map(|c| c.to_string()))
            .collect()];
        for m in &self.methods {
            rows.push(std::iter::once(m.method.clone()).chain(columns.iter().map(|c| cell(m, c))).collect());
        }
        let widths: Vec<usize> = (0..=columns.len())
            .map(|j| rows.iter().map(|r| r[j].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (i, row) in rows.iter().enumerate() {
            let line: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(j, (v, &w))| if j == 0 { format!("{v:<w$}") } else { format!("{v:>w$}") })
                .collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
            if i == 0 {
                let _ = writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * columns.len()));
            }
        }
        out.push_str("\nIID and SCUB: higher is better. SCUF: lower is better.\n");
        if !self.domain_gaps.is_empty() {
            out.push_str("\ndomain gap (static probe)\n");
            for g in &self.domain_gaps {
                let _ = writeln!(out, "  {:<24} acc_old {:.3}  acc_new {:.3}  gap {:.3}", g.set, g.acc_old, g.acc_new, g.gap);
            }
        }
        out
    }
}

fn kind_name(kind: BenchKind) -> &'static str {
    match kind {
        BenchKind::Iid => "iid",
        BenchKind::Scub => "scub",
        BenchKind::Scuf => "scuf",
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Validation(format!("csv: {e}"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Table,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [ReportFormat::Json, ReportFormat::Csv, ReportFormat::Table];

    pub fn file_name(self) -> &'static str {
        match self {
            ReportFormat::Json => "report.json",
            ReportFormat::Csv => "report.csv",
            ReportFormat::Table => "report.txt",
        }
    }
}

/// Writes the requested formats into `dir`, each atomically.
pub fn emit_report(report: &EvalReport, dir: &Path, formats: &[ReportFormat]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    formats
        .iter()
        .map(|&f| {
            let path = dir.join(f.file_name());
            match f {
                ReportFormat::Json => write_json(&path, report)?,
                ReportFormat::Csv => write_atomic(&path, report.to_csv()?.as_bytes())?,
                ReportFormat::Table => write_atomic(&path, report.to_table().as_bytes())?,
            }
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::ProbeSpec;
    use crate::io::read_json;

    fn sample() -> EvalReport {
        let seeds = |vals: &[f64]| -> Vec<SeedAccuracy> {
            vals.iter().enumerate().map(|(i, &a)| SeedAccuracy { seed: i as u64, accuracy: a }).collect()
        };
        let method = |name: &str, a: f64| MethodReport {
            method: name.into(),
            splits: vec![
                SplitResult::new("iid", BenchKind::Iid, None, seeds(&[a, a - 0.1])).unwrap(),
                SplitResult::new("scub-noise", BenchKind::Scub, Some("noise".into()), seeds(&[0.3, 0.1 + 0.2])).unwrap(),
                SplitResult::new("scuf-noise", BenchKind::Scuf, Some("noise".into()), seeds(&[0.2, 1.0 / 3.0])).unwrap(),
            ],
        };
        EvalReport {
            methods: vec![method("none", 0.9), method("stillmix", 0.7)],
            domain_gaps: vec![DomainGapReport::from_accuracies("scub-noise", 0.9, 0.0, ProbeSpec::default())],
            metadata: RunMetadata {
                config_hash: "abc".into(),
                seeds: vec![0, 1],
                durations: BTreeMap::from([("world".to_string(), 1.5)]),
            },
        }
    }

    #[test]
    fn mean_std_hand_values() {
        assert_eq!(mean_std(&[0.5]), (0.5, None));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s.unwrap() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_accuracy_is_rejected() {
        assert!(SplitResult::new("x", BenchKind::Iid, None, vec![SeedAccuracy { seed: 0, accuracy: 1.5 }]).is_err());
        assert!(SplitResult::new("x", BenchKind::Iid, None, vec![]).is_err());
    }

    #[test]
    fn csv_has_one_row_per_method_split_seed() {
        let report = sample();
        let text = report.to_csv().unwrap();
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let rows: Vec<csv::StringRecord> = r.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), 2 * 3 * 2);
        for row in rows {
            let v: f64 = row[5].parse().unwrap();
            assert!(v.is_finite());
        }
    }

    #[test]
    fn json_roundtrips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let report = sample();
        let paths = emit_report(&report, dir.path(), &ReportFormat::ALL).unwrap();
        assert_eq!(paths.len(), 3);
        let back: EvalReport = read_json(&dir.path().join("report.json")).unwrap();
        assert_eq!(back, report);
        assert!(back.domain_gaps[0].gap.is_infinite());
        let table = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
        assert!(table.contains("stillmix"));
        assert!(table.contains("scuf-noise"));
    }

    #[test]
    fn unwritable_directory_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("plain");
        std::fs::write(&file, b"x").unwrap();
        assert!(matches!(emit_report(&sample(), &file, &ReportFormat::ALL), Err(Error::Io(_))));
    }
}
