//! Long-format trajectory CSV (`t,node,comp_0..comp_{m-1}`, one row per node
//! per sample, optional metric columns) with a JSON sidecar.
//!
//! Values are written with the shortest representation that parses back to
//! the same `f64`, so a reloaded trace reproduces every metric bit for bit.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{io_err, HarnessError};
use crate::analysis::MetricSeries;
use crate::dynamics::{IntegratorStats, Trajectory};

/// Extra column; `values[k * n_nodes + i]` is the entry for sample `k`,
/// node `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceColumn {
    pub name: String,
    pub values: Vec<f64>,
}

impl TraceColumn {
    /// Network-wide series, repeated on every node's row.
    pub fn global(series: &MetricSeries<f64>, n_nodes: usize) -> Self {
        TraceColumn {
            name: series.name.clone(),
            values: series
                .values
                .iter()
                .flat_map(|v| std::iter::repeat_n(*v, n_nodes))
                .collect(),
        }
    }

    /// One series per node, interleaved into a single column.
    pub fn per_node(name: &str, series: &[MetricSeries<f64>]) -> Self {
        let len = series.first().map_or(0, |s| s.values.len());
        TraceColumn {
            name: name.to_string(),
            values: (0..len)
                .flat_map(|k| series.iter().map(move |s| s.values[k]))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsMeta {
    pub steps: usize,
    pub segments: usize,
    pub rhs_evals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub scenario: String,
    pub fingerprint: String,
    pub seed: u64,
    pub law: String,
    pub n_nodes: usize,
    pub m: usize,
    pub h: f64,
    pub t0: f64,
    pub tf: f64,
    pub samples: usize,
    pub stats: StatsMeta,
    pub columns: Vec<String>,
}

impl TraceMeta {
    pub fn new(scenario: &str, seed: u64, law: &str, h: f64, traj: &Trajectory<f64>) -> Self {
        TraceMeta {
            scenario: scenario.to_string(),
            fingerprint: traj.fingerprint.clone().unwrap_or_default(),
            seed,
            law: law.to_string(),
            n_nodes: traj.n_nodes,
            m: traj.m,
            h,
            t0: traj.times.first().copied().unwrap_or(f64::NAN),
            tf: traj.last_time(),
            samples: traj.len(),
            stats: StatsMeta {
                steps: traj.stats.steps,
                segments: traj.stats.segments,
                rhs_evals: traj.stats.rhs_evals,
            },
            columns: Vec::new(),
        }
    }
}

/// Sidecar path for a trace CSV (`run.csv` → `run.json`).
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

pub fn write_trace(
    path: &Path,
    traj: &Trajectory<f64>,
    meta: &TraceMeta,
    extra: &[TraceColumn],
) -> Result<(), HarnessError> {
    let rows = traj.len() * traj.n_nodes;
    if let Some(c) = extra.iter().find(|c| c.values.len() != rows) {
        return Err(HarnessError::Trace(format!(
            "column `{}` has {} entries, expected {rows}",
            c.name,
            c.values.len()
        )));
    }
    let csv_err = |e: csv::Error| HarnessError::Trace(e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header = vec!["t".to_string(), "node".to_string()];
    header.extend((0..traj.m).map(|j| format!("comp_{j}")));
    header.extend(extra.iter().map(|c| c.name.clone()));
    w.write_record(&header).map_err(csv_err)?;
    let mut record = Vec::with_capacity(header.len());
    for k in 0..traj.len() {
        for i in 0..traj.n_nodes {
            record.clear();
            record.push(traj.times[k].to_string());
            record.push(i.to_string());
            record.extend(traj.node(k, i).iter().map(f64::to_string));
            record.extend(
                extra
                    .iter()
                    .map(|c| c.values[k * traj.n_nodes + i].to_string()),
            );
            w.write_record(&record).map_err(csv_err)?;
        }
    }
    w.flush().map_err(io_err(path))?;
    let mut meta = meta.clone();
    meta.columns = extra.iter().map(|c| c.name.clone()).collect();
    let side = sidecar_path(path);
    let json =
        serde_json::to_string_pretty(&meta).map_err(|e| HarnessError::Trace(e.to_string()))?;
    std::fs::write(&side, json).map_err(io_err(&side))
}

/// Reloads a trace written by [`write_trace`].
pub fn read_trace(
    path: &Path,
) -> Result<(Trajectory<f64>, TraceMeta, Vec<TraceColumn>), HarnessError> {
    let side = sidecar_path(path);
    let text = std::fs::read_to_string(&side).map_err(io_err(&side))?;
    let meta: TraceMeta =
        serde_json::from_str(&text).map_err(|e| HarnessError::Trace(e.to_string()))?;
    let bad = |msg: String| HarnessError::Trace(format!("{}: {msg}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    let (n, m) = (meta.n_nodes, meta.m);
    let n_extra = meta.columns.len();
    if header.len() != 2 + m + n_extra {
        return Err(bad(format!(
            "expected {} columns, found {}",
            2 + m + n_extra,
            header.len()
        )));
    }
    let mut times = Vec::with_capacity(meta.samples);
    let mut states = Vec::with_capacity(meta.samples);
    let mut extra: Vec<TraceColumn> = meta
        .columns
        .iter()
        .map(|name| TraceColumn {
            name: name.clone(),
            values: Vec::new(),
        })
        .collect();
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let num = |j: usize| -> Result<f64, HarnessError> {
            rec[j]
                .parse::<f64>()
                .map_err(|e| bad(format!("row {row}, column {j}: {e}")))
        };
        let (k, i) = (row / n, row % n);
        let node: usize = rec[1].parse().map_err(|e| bad(format!("row {row}: {e}")))?;
        if node != i {
            return Err(bad(format!("row {row}: expected node {i}, found {node}")));
        }
        let t = num(0)?;
        if i == 0 {
            times.push(t);
            states.push(Vec::with_capacity(n * m));
        } else if t.to_bits() != times[k].to_bits() {
            return Err(bad(format!("row {row}: time differs within a sample")));
        }
        for j in 0..m {
            states[k].push(num(2 + j)?);
        }
        for (c, col) in extra.iter_mut().enumerate() {
            col.values.push(num(2 + m + c)?);
        }
    }
    if times.len() != meta.samples || states.last().is_some_and(|s| s.len() != n * m) {
        return Err(bad(format!("expected {} complete samples", meta.samples)));
    }
    let traj = Trajectory {
        n_nodes: n,
        m,
        times,
        states,
        stats: IntegratorStats {
            steps: meta.stats.steps,
            segments: meta.stats.segments,
            rhs_evals: meta.stats.rhs_evals,
        },
        fingerprint: Some(meta.fingerprint.clone()),
    };
    Ok((traj, meta, extra))
}
