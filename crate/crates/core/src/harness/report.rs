//! Per-cell records, aggregation, and CSV/Markdown output.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{near_top_frequency, near_top_marks, relative_mse};
use crate::error::{Result, Status};

/// One row of `report.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub env: String,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub gamma: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
    pub estimator: String,
    pub class: String,
    pub estimate: f64,
    pub true_value: f64,
    pub status: Status,
}

/// One row of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub env: String,
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub estimator: String,
    /// NaN when any seed failed to produce an estimate.
    pub rel_mse: f64,
    /// Within 10% of the best relative MSE of this condition.
    pub near_top: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
    /// `(estimator, class, frequency)` in report order.
    pub near_top_frequency: Vec<(String, String, f64)>,
}

fn first_seen<K: Clone + Eq + std::hash::Hash>(keys: impl Iterator<Item = K>) -> Vec<K> {
    let mut seen = HashMap::new();
    let mut out = Vec::new();
    for k in keys {
        if seen.insert(k.clone(), ()).is_none() {
            out.push(k);
        }
    }
    out
}

/// Relative MSE per `(condition, estimator)` and near-top marks, where a
/// condition is one `(env, T, N)` triple.
pub fn summarize(records: &[CellRecord]) -> Summary {
    type Condition = (String, usize, usize);
    let conditions: Vec<Condition> = first_seen(records.iter().map(|r| (r.env.clone(), r.horizon, r.n)));
    let estimators: Vec<(String, String)> = first_seen(records.iter().map(|r| (r.estimator.clone(), r.class.clone())));

    let mut groups: HashMap<(Condition, &str), Vec<&CellRecord>> = HashMap::new();
    for r in records {
        groups.entry(((r.env.clone(), r.horizon, r.n), r.estimator.as_str())).or_default().push(r);
    }

    let mut rows = Vec::new();
    let mut table = Vec::with_capacity(conditions.len());
    for cond in &conditions {
        let errors: Vec<f64> = estimators
            .iter()
            .map(|(name, _)| match groups.get(&(cond.clone(), name.as_str())) {
                Some(cells) if cells.iter().all(|c| c.status.has_estimate() && c.estimate.is_finite()) => {
                    let est: Vec<f64> = cells.iter().map(|c| c.estimate).collect();
                    let truth: Vec<f64> = cells.iter().map(|c| c.true_value).collect();
                    relative_mse(&est, &truth).unwrap_or(f64::NAN)
                }
                _ => f64::NAN,
            })
            .collect();
        let marks = near_top_marks(&errors);
        for (k, (name, _)) in estimators.iter().enumerate() {
            if groups.contains_key(&(cond.clone(), name.as_str())) {
                rows.push(SummaryRow {
                    env: cond.0.clone(),
                    horizon: cond.1,
                    n: cond.2,
                    estimator: name.clone(),
                    rel_mse: errors[k],
                    near_top: marks[k],
                });
            }
        }
        table.push(errors);
    }
    let freq = near_top_frequency(&table).unwrap_or_default();
    let near_top_frequency = estimators.into_iter().zip(freq).map(|((name, class), f)| (name, class, f)).collect();
    Summary { rows, near_top_frequency }
}

pub fn write_records<W: Write>(records: &[CellRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<CellRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

pub fn write_summary<W: Write>(summary: &Summary, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in &summary.rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Paper-style scientific notation, e.g. `3.2E-5`.
pub fn sci(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x:.1E}")
    }
}

const DM_ORDER: [&str; 8] = ["AM", "Q-Reg", "MRDR", "FQE", "R(lambda)", "Qpi(lambda)", "Tree", "IH"];
const IPS_ORDER: [&str; 5] = ["IS", "PDIS", "WIS", "PDWIS", "NAIVE"];

/// One block per condition: direct methods against their DR/WDR/MAGIC
/// corrections, followed by the IPS estimators, then near-top frequencies.
pub fn render_markdown(summary: &Summary) -> String {
    let mut out = String::new();
    let conditions = first_seen(summary.rows.iter().map(|r| (r.env.clone(), r.horizon, r.n)));
    for (env, horizon, n) in conditions {
        let lookup: HashMap<&str, &SummaryRow> = summary
            .rows
            .iter()
            .filter(|r| r.env == env && r.horizon == horizon && r.n == n)
            .map(|r| (r.estimator.as_str(), r))
            .collect();
        let cell = |name: &str| match lookup.get(name) {
            Some(r) if r.near_top => format!("**{}**", sci(r.rel_mse)),
            Some(r) => sci(r.rel_mse),
            None => "-".into(),
        };
        let _ = writeln!(out, "### {env}, T={horizon}, N={n}\n");
        let dms: Vec<&str> = DM_ORDER
            .iter()
            .copied()
            .filter(|d| ["", "DR/", "WDR/", "MAGIC/"].iter().any(|p| lookup.contains_key(format!("{p}{d}").as_str())))
            .collect();
        if !dms.is_empty() {
            out.push_str("| Method | DM | DR | WDR | MAGIC |\n|---|---|---|---|---|\n");
            for d in dms {
                let _ = writeln!(
                    out,
                    "| {d} | {} | {} | {} | {} |",
                    cell(d),
                    cell(&format!("DR/{d}")),
                    cell(&format!("WDR/{d}")),
                    cell(&format!("MAGIC/{d}"))
                );
            }
            out.push('\n');
        }
        let ips: Vec<&str> = IPS_ORDER.iter().copied().filter(|i| lookup.contains_key(i)).collect();
        if !ips.is_empty() {
            out.push_str("| IPS | Relative MSE |\n|---|---|\n");
            for i in ips {
                let _ = writeln!(out, "| {i} | {} |", cell(i));
            }
            out.push('\n');
        }
    }
    if !summary.near_top_frequency.is_empty() {
        out.push_str("### Near-top frequency\n\n| Estimator | Class | Frequency |\n|---|---|---|\n");
        for (name, class, f) in &summary.near_top_frequency {
            let _ = writeln!(out, "| {name} | {class} | {f:.2} |");
        }
    }
    out
}

/// Writes `report.csv`, `summary.csv` and `report.md` into `dir`.
pub fn write_outputs(dir: &Path, records: &[CellRecord], summary: &Summary) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_records(records, BufWriter::new(File::create(dir.join("report.csv"))?))?;
    write_summary(summary, BufWriter::new(File::create(dir.join("summary.csv"))?))?;
    std::fs::write(dir.join("report.md"), render_markdown(summary))?;
    Ok(())
}
