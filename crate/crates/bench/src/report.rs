//! Per (dataset, model) summaries with pooled standard errors.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use renet_core::cv::pooled_se;
use renet_core::Result;

use crate::bench::BenchRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Metric {
    R2,
    NCoef,
    Theta,
    Time,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::R2, Metric::NCoef, Metric::Theta, Metric::Time];

    pub fn key(self) -> &'static str {
        match self {
            Metric::R2 => "r2",
            Metric::NCoef => "n_coef",
            Metric::Theta => "theta",
            Metric::Time => "time_s",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Metric::R2 => "R²",
            Metric::NCoef => "Num. Coeff.",
            Metric::Theta => "Relaxation (θ)",
            Metric::Time => "Time (s)",
        }
    }

    fn value(self, r: &BenchRow) -> Option<f64> {
        match self {
            Metric::R2 => r.r2,
            Metric::NCoef => r.n_coef.map(|v| v as f64),
            Metric::Theta => r.theta,
            Metric::Time => r.time_s,
        }
    }

    fn precision(self) -> usize {
        match self {
            Metric::R2 | Metric::Time => 3,
            Metric::NCoef => 1,
            Metric::Theta => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryCell {
    pub mean: f64,
    pub se: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    /// Keyed by (dataset, model, metric).
    pub cells: BTreeMap<(String, String, Metric), SummaryCell>,
}

/// Pooled mean and SE of one metric; `se` is NaN when the seeds do not
/// share a common fold count of at least two.
fn summarize(by_seed: &BTreeMap<u64, Vec<f64>>) -> SummaryCell {
    let scores: Vec<Vec<f64>> = by_seed.values().cloned().collect();
    let count = scores.iter().map(Vec::len).sum();
    match pooled_se(&scores) {
        Ok((mean, se)) => SummaryCell { mean, se, count },
        Err(_) => SummaryCell {
            mean: scores.iter().flatten().sum::<f64>() / count as f64,
            se: f64::NAN,
            count,
        },
    }
}

pub fn aggregate_report(rows: &[BenchRow]) -> Report {
    let mut groups: BTreeMap<(String, String, Metric), BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
    for r in rows.iter().filter(|r| !r.is_error()) {
        for m in Metric::ALL {
            if let Some(v) = m.value(r) {
                groups
                    .entry((r.dataset.clone(), r.model.clone(), m))
                    .or_default()
                    .entry(r.seed)
                    .or_default()
                    .push(v);
            }
        }
    }
    Report {
        cells: groups.into_iter().map(|(k, g)| (k, summarize(&g))).collect(),
    }
}

impl Report {
    pub fn datasets(&self) -> Vec<&str> {
        let mut d: Vec<&str> = self.cells.keys().map(|(d, _, _)| d.as_str()).collect();
        d.dedup();
        d
    }

    pub fn models(&self, dataset: &str) -> Vec<&str> {
        let mut m: Vec<&str> = self
            .cells
            .keys()
            .filter(|(d, _, _)| d == dataset)
            .map(|(_, m, _)| m.as_str())
            .collect();
        m.sort();
        m.dedup();
        m
    }

    pub fn get(&self, dataset: &str, model: &str, metric: Metric) -> Option<&SummaryCell> {
        self.cells.get(&(dataset.to_string(), model.to_string(), metric))
    }

    /// Machine-readable summary; fit times are left to the text report.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let _ = w.write_record(["dataset", "model", "metric", "mean", "se", "count"]);
        for ((d, m, metric), c) in &self.cells {
            if *metric == Metric::Time {
                continue;
            }
            let _ = w.write_record([
                d.clone(),
                m.clone(),
                metric.key().to_string(),
                c.mean.to_string(),
                c.se.to_string(),
                c.count.to_string(),
            ]);
        }
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 output")
    }

    /// Metric rows per dataset, one column per model, `mean (se)` cells.
    pub fn to_text(&self, header: &str) -> String {
        let mut out = String::new();
        if !header.is_empty() {
            let _ = writeln!(out, "{header}\n");
        }
        for d in self.datasets() {
            let models = self.models(d);
            let mut table: Vec<Vec<String>> = vec![std::iter::once(d.to_string())
                .chain(models.iter().map(|m| m.to_string()))
                .collect()];
            for metric in Metric::ALL {
                let mut row = vec![metric.label().to_string()];
                for m in &models {
                    row.push(match self.get(d, m, metric) {
                        Some(c) => format!("{:.p$} ({:.p$})", c.mean, c.se, p = metric.precision()),
                        None => "-".to_string(),
                    });
                }
                table.push(row);
            }
            let widths: Vec<usize> = (0..table[0].len())
                .map(|j| table.iter().map(|r| r[j].chars().count()).max().unwrap_or(0))
                .collect();
            for row in &table {
                let cells: Vec<String> = row
                    .iter()
                    .zip(&widths)
                    .enumerate()
                    .map(|(j, (c, w))| {
                        let pad = w - c.chars().count();
                        if j == 0 {
                            format!("{c}{}", " ".repeat(pad))
                        } else {
                            format!("{}{c}", " ".repeat(pad))
                        }
                    })
                    .collect();
                let _ = writeln!(out, "{}", cells.join("  ").trim_end());
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, dir: &Path, header: &str) -> Result<()> {
        std::fs::write(dir.join("summary.csv"), self.to_csv())?;
        std::fs::write(dir.join("summary.txt"), self.to_text(header))?;
        Ok(())
    }
}
