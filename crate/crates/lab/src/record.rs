//! Result records: JSON lines on disk, CSV for plotting.

use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::LabRunError;

/// One metric produced by one experiment run.
///
/// `index` is the position of the record in its experiment's output, which
/// is fixed for a given configuration; replay matches records by it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultRecord {
    pub experiment: String,
    pub index: usize,
    pub params: ExperimentConfig,
    pub family: Option<String>,
    /// Structural qualifier such as `sign=plus` or `case=17`.
    pub label: Option<String>,
    pub metric: String,
    pub x_name: Option<String>,
    pub x: Option<f64>,
    pub estimate: f64,
    pub stderr: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    /// The reference the estimate is compared against: an oracle value, a
    /// bound, or a threshold.
    pub bound: Option<f64>,
    pub samples: u64,
    pub seed: u64,
    /// Free-form provenance (rotation fingerprints and the like).
    pub note: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<u64>,
    pub pass: Option<bool>,
}

impl ResultRecord {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("records contain only finite numbers")
    }

    pub fn failed(&self) -> bool {
        self.pass == Some(false)
    }
}

pub fn write_jsonl<W: Write>(records: &[ResultRecord], mut w: W) -> std::io::Result<()> {
    for r in records {
        writeln!(w, "{}", r.to_line())?;
    }
    w.flush()
}

pub fn to_jsonl(records: &[ResultRecord]) -> String {
    let mut buf = Vec::new();
    write_jsonl(records, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

/// Parses a record stream; blank lines are skipped, anything else that is
/// not a well-formed record is a schema error.
pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<ResultRecord>, LabRunError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ResultRecord = serde_json::from_str(&line)
            .map_err(|e| LabRunError::Schema(format!("line {}: {e}", i + 1)))?;
        rec.params
            .validate()
            .map_err(|e| LabRunError::Schema(format!("line {}: {e}", i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

/// Flattened record as exported to CSV.
///
/// Column order is fixed: `experiment, index, family, label, metric, <x>,
/// estimate, stderr, ci_low, ci_high, bound, samples, seed, pass`. The
/// abscissa column is named after the records' common `x_name` (`t`, `p`,
/// `eps`, ...) and falls back to `x` when names are mixed or absent.
/// Missing values are empty cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub experiment: String,
    pub index: usize,
    pub family: Option<String>,
    pub label: Option<String>,
    pub metric: String,
    pub x: Option<f64>,
    pub estimate: f64,
    pub stderr: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub bound: Option<f64>,
    pub samples: u64,
    pub seed: u64,
    pub pass: Option<bool>,
}

impl From<&ResultRecord> for CsvRow {
    fn from(r: &ResultRecord) -> Self {
        CsvRow {
            experiment: r.experiment.clone(),
            index: r.index,
            family: r.family.clone(),
            label: r.label.clone(),
            metric: r.metric.clone(),
            x: r.x,
            estimate: r.estimate,
            stderr: r.stderr,
            ci_low: r.ci_low,
            ci_high: r.ci_high,
            bound: r.bound,
            samples: r.samples,
            seed: r.seed,
            pass: r.pass,
        }
    }
}

pub fn csv_header(records: &[ResultRecord]) -> Vec<String> {
    let mut names = records.iter().map(|r| r.x_name.as_deref());
    let x = match names.next() {
        Some(Some(first)) if names.all(|n| n == Some(first)) => first,
        _ => "x",
    };
    [
        "experiment", "index", "family", "label", "metric", x, "estimate", "stderr", "ci_low", "ci_high",
        "bound", "samples", "seed", "pass",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

// `Display` for f64 is the shortest string that parses back to the same bits.
fn num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn export_csv<W: Write>(records: &[ResultRecord], w: W) -> Result<(), LabRunError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(csv_header(records)).map_err(csv_err)?;
    for r in records {
        let row = CsvRow::from(r);
        out.write_record([
            row.experiment,
            row.index.to_string(),
            row.family.unwrap_or_default(),
            row.label.unwrap_or_default(),
            row.metric,
            num(row.x),
            row.estimate.to_string(),
            num(row.stderr),
            num(row.ci_low),
            num(row.ci_high),
            num(row.bound),
            row.samples.to_string(),
            row.seed.to_string(),
            row.pass.map(|p| p.to_string()).unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> LabRunError {
    LabRunError::Schema(format!("csv: {e}"))
}

pub fn import_csv<R: Read>(r: R) -> Result<Vec<CsvRow>, LabRunError> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.len() != 14 {
        return Err(LabRunError::Schema(format!("expected 14 columns, found {}", header.len())));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = i + 2;
        let field = |k: usize| rec.get(k).unwrap_or("");
        let text = |k: usize| Some(field(k).to_string()).filter(|s| !s.is_empty());
        let opt = |k: usize| -> Result<Option<f64>, LabRunError> {
            match field(k) {
                "" => Ok(None),
                s => s
                    .parse()
                    .map(Some)
                    .map_err(|_| LabRunError::Schema(format!("row {line}: bad number {s:?}"))),
            }
        };
        let int = |k: usize| -> Result<u64, LabRunError> {
            field(k)
                .parse()
                .map_err(|_| LabRunError::Schema(format!("row {line}: bad integer {:?}", field(k))))
        };
        rows.push(CsvRow {
            experiment: field(0).to_string(),
            index: int(1)? as usize,
            family: text(2),
            label: text(3),
            metric: field(4).to_string(),
            x: opt(5)?,
            estimate: opt(6)?.ok_or_else(|| LabRunError::Schema(format!("row {line}: missing estimate")))?,
            stderr: opt(7)?,
            ci_low: opt(8)?,
            ci_high: opt(9)?,
            bound: opt(10)?,
            samples: int(11)?,
            seed: int(12)?,
            pass: match field(13) {
                "" => None,
                "true" => Some(true),
                "false" => Some(false),
                s => return Err(LabRunError::Schema(format!("row {line}: bad flag {s:?}"))),
            },
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_record(estimate: f64) -> ResultRecord {
        ResultRecord {
            experiment: "small-ball".into(),
            index: 0,
            params: ExperimentConfig::parse("experiment = small-ball\n").unwrap(),
            family: Some("gaussian".into()),
            label: None,
            metric: "small_ball_prob".into(),
            x_name: Some("eps".into()),
            x: Some(0.1 + 0.2),
            estimate,
            stderr: Some(1.0 / 3.0),
            ci_low: None,
            ci_high: None,
            bound: Some(std::f64::consts::PI),
            samples: 100,
            seed: 1,
            note: None,
            wall_time_ms: None,
            pass: Some(true),
        }
    }

    #[test]
    fn floats_survive_a_text_round_trip() {
        let recs: Vec<_> = [0.1 + 0.2, 1e-300, 5e-324, 0.14287653950145296, 123456.78901234567]
            .into_iter()
            .map(sample_record)
            .collect();
        let back = read_jsonl(to_jsonl(&recs).as_bytes()).unwrap();
        for (a, b) in recs.iter().zip(&back) {
            assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
        }
        assert_eq!(back, recs);
        assert!(!to_jsonl(&recs).contains("wall_time_ms"));
    }

    #[test]
    fn bad_lines_name_their_position() {
        let good = sample_record(0.5).to_line();
        let text = format!("{good}\n\n{good}\nnot json\n");
        match read_jsonl(text.as_bytes()) {
            Err(LabRunError::Schema(msg)) => assert!(msg.starts_with("line 4:"), "{msg}"),
            other => panic!("expected a schema error, got {other:?}"),
        }
        let extra = good.replacen('{', "{\"colour\":1,", 1);
        assert!(read_jsonl(extra.as_bytes()).is_err());
    }
}
