//! Parsing of the metrics CSVs the runner emits, and a side-by-side
//! comparison report across runs.

use std::path::Path;

use crate::runner::CSV_HEADER;
use crate::HarnessError;

/// Who a row belongs to: one seed, the cross-seed mean, or the marker left
/// by a seed whose run failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeedField {
    Seed(u64),
    Mean,
    Error(u64),
}

#[derive(Clone, Copy, Debug)]
pub struct CsvRow {
    pub seed: SeedField,
    pub epoch: u64,
    pub loss: f64,
    pub accuracy: f64,
    pub delta: f64,
    pub accepted_ratio: f64,
    pub wall_s: f64,
}

#[derive(Clone, Debug)]
pub struct MetricsFile {
    /// Label used in reports; the file name for loaded files.
    pub name: String,
    pub rows: Vec<CsvRow>,
}

impl MetricsFile {
    pub fn mean_rows(&self) -> impl Iterator<Item = &CsvRow> {
        self.rows.iter().filter(|r| r.seed == SeedField::Mean)
    }

    pub fn final_mean(&self) -> Option<&CsvRow> {
        self.mean_rows().max_by_key(|r| r.epoch)
    }

    /// First epoch whose mean accuracy reaches `threshold`.
    pub fn accuracy_crossing(&self, threshold: f64) -> Option<u64> {
        let mut crossings: Vec<u64> = self
            .mean_rows()
            .filter(|r| r.accuracy >= threshold)
            .map(|r| r.epoch)
            .collect();
        crossings.sort_unstable();
        crossings.first().copied()
    }

    pub fn failed_seeds(&self) -> Vec<u64> {
        self.rows
            .iter()
            .filter_map(|r| match r.seed {
                SeedField::Error(s) => Some(s),
                _ => None,
            })
            .collect()
    }
}

fn parse_float(name: &str, line_no: usize, field: &str, what: &str) -> Result<f64, HarnessError> {
    field.trim().parse::<f64>().map_err(|_| {
        HarnessError::csv(
            name,
            format!("line {line_no}: cannot parse {what} `{field}`"),
        )
    })
}

/// Parses CSV text in the runner's format. The header line must match
/// exactly; every data row needs the same seven fields.
pub fn parse_metrics_csv(name: &str, text: &str) -> Result<MetricsFile, HarnessError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end() == CSV_HEADER => {}
        Some((_, header)) => {
            return Err(HarnessError::csv(
                name,
                format!("unexpected header `{header}` (expected `{CSV_HEADER}`)"),
            ))
        }
        None => return Err(HarnessError::csv(name, "empty file")),
    }

    let mut rows = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(HarnessError::csv(
                name,
                format!("line {line_no}: expected 7 fields, got {}", fields.len()),
            ));
        }
        let seed_field = fields[0].trim();
        let seed = if seed_field == "mean" {
            SeedField::Mean
        } else if let Some(s) = seed_field.strip_prefix("error:") {
            SeedField::Error(s.parse().map_err(|_| {
                HarnessError::csv(
                    name,
                    format!("line {line_no}: bad error marker `{seed_field}`"),
                )
            })?)
        } else {
            SeedField::Seed(seed_field.parse().map_err(|_| {
                HarnessError::csv(name, format!("line {line_no}: bad seed `{seed_field}`"))
            })?)
        };
        let epoch: u64 = fields[1].trim().parse().map_err(|_| {
            HarnessError::csv(name, format!("line {line_no}: bad epoch `{}`", fields[1]))
        })?;
        rows.push(CsvRow {
            seed,
            epoch,
            loss: parse_float(name, line_no, fields[2], "train_loss")?,
            accuracy: parse_float(name, line_no, fields[3], "train_accuracy")?,
            delta: parse_float(name, line_no, fields[4], "delta_G")?,
            accepted_ratio: parse_float(name, line_no, fields[5], "accepted_ratio")?,
            wall_s: parse_float(name, line_no, fields[6], "wall_time_s")?,
        });
    }
    Ok(MetricsFile {
        name: name.to_string(),
        rows,
    })
}

pub fn load_metrics_csv(path: &Path) -> Result<MetricsFile, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    parse_metrics_csv(&name, &text)
}

/// Accuracy level whose first crossing the comparison report lists.
pub const REPORT_ACCURACY_BAR: f64 = 0.90;

/// Renders a column-per-file comparison of the cross-seed mean metrics.
pub fn compare_report(files: &[MetricsFile]) -> Result<String, HarnessError> {
    if files.is_empty() {
        return Err(HarnessError::invalid("nothing to compare"));
    }
    for f in files {
        if f.final_mean().is_none() {
            return Err(HarnessError::csv(&f.name, "no mean rows to compare"));
        }
    }

    let metric_labels = [
        "epochs",
        "final_train_loss",
        "final_train_accuracy",
        "final_delta_G",
        "mean_accepted_ratio",
        "epoch_to_90pct_accuracy",
        "failed_seeds",
    ];
    let mut columns: Vec<Vec<String>> = Vec::new();
    for f in files {
        let last = f.final_mean().expect("checked above");
        let ratios: Vec<f64> = f
            .mean_rows()
            .filter(|r| r.epoch > 0)
            .map(|r| r.accepted_ratio)
            .collect();
        let mean_ratio = if ratios.is_empty() {
            f64::NAN
        } else {
            ratios.iter().sum::<f64>() / ratios.len() as f64
        };
        let crossing = f
            .accuracy_crossing(REPORT_ACCURACY_BAR)
            .map(|e| e.to_string())
            .unwrap_or_else(|| "-".to_string());
        let failed = f.failed_seeds();
        let failed = if failed.is_empty() {
            "-".to_string()
        } else {
            failed
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        columns.push(vec![
            last.epoch.to_string(),
            format!("{:.9}", last.loss),
            format!("{:.6}", last.accuracy),
            format!("{:.9}", last.delta),
            format!("{:.6}", mean_ratio),
            crossing,
            failed,
        ]);
    }

    let label_width = metric_labels
        .iter()
        .map(|l| l.len())
        .max()
        .unwrap_or(0)
        .max("metric".len());
    let col_widths: Vec<usize> = files
        .iter()
        .zip(&columns)
        .map(|(f, col)| {
            col.iter()
                .map(|v| v.len())
                .max()
                .unwrap_or(0)
                .max(f.name.len())
        })
        .collect();

    let mut out = String::new();
    out.push_str(&format!("{:<label_width$}", "metric"));
    for (f, w) in files.iter().zip(&col_widths) {
        out.push_str(&format!("  {:>w$}", f.name, w = w));
    }
    out.push('\n');
    for (row, label) in metric_labels.iter().enumerate() {
        out.push_str(&format!("{label:<label_width$}"));
        for (col, w) in columns.iter().zip(&col_widths) {
            out.push_str(&format!("  {:>w$}", col[row], w = w));
        }
        out.push('\n');
    }
    Ok(out)
}
