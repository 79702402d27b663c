//! Machine-readable result files. Re-running the same configuration yields
//! byte-identical outputs: all iteration orders are fixed and floats are
//! written with the shortest round-trip formatting.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::cluster::ClusterModel;
use crate::error::{Error, Result};
use crate::harness::{BoundTracePoint, CellResult, RoundLog};
use crate::ingest::Pca2;

/// Round-log serialization format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Ndjson,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "ndjson" => Ok(OutputFormat::Ndjson),
            other => Err(Error::InvalidConfig(format!(
                "unknown format '{}'; expected csv or ndjson",
                other
            ))),
        }
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    Ok(())
}

/// One row per sweep cell:
/// `dataset,algo,N,m,alpha,missing_rate,seeds,acc_mean,acc_std,regret_mean`.
pub fn write_summary_csv(cells: &[CellResult], path: &Path) -> Result<()> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "dataset",
        "algo",
        "N",
        "m",
        "alpha",
        "missing_rate",
        "seeds",
        "acc_mean",
        "acc_std",
        "regret_mean",
    ])?;
    for cell in cells {
        let cfg = &cell.config;
        w.write_record([
            cfg.dataset.clone(),
            cfg.algorithm.to_string(),
            cfg.clusters.to_string(),
            cfg.neighbors.to_string(),
            cfg.alpha.to_string(),
            cfg.missing_rate.to_string(),
            cell.seeds.len().to_string(),
            cell.acc_mean.to_string(),
            cell.acc_std.to_string(),
            cell.regret_mean.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-round log records, one file per run.
pub fn write_rounds(logs: &[RoundLog], path: &Path, format: OutputFormat) -> Result<()> {
    ensure_parent(path)?;
    match format {
        OutputFormat::Ndjson => {
            let mut out = std::io::BufWriter::new(fs::File::create(path)?);
            for log in logs {
                let line = serde_json::to_string(log)
                    .map_err(|e| Error::InvalidConfig(format!("serialize round log: {e}")))?;
                writeln!(out, "{line}")?;
            }
            out.flush()?;
        }
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_path(path)?;
            for log in logs {
                w.serialize(log)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

/// 2D projection joined with labels and optional cluster assignments:
/// `pc1,pc2,label,cluster_id` (empty cluster column when none supplied).
pub fn write_pca_csv(
    pca: &Pca2,
    labels: &[usize],
    cluster_ids: Option<&[usize]>,
    path: &Path,
) -> Result<()> {
    if labels.len() != pca.coords.len() {
        return Err(Error::DimensionMismatch {
            expected: pca.coords.len(),
            got: labels.len(),
        });
    }
    if let Some(ids) = cluster_ids {
        if ids.len() != pca.coords.len() {
            return Err(Error::DimensionMismatch {
                expected: pca.coords.len(),
                got: ids.len(),
            });
        }
    }
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["pc1", "pc2", "label", "cluster_id"])?;
    for (i, coord) in pca.coords.iter().enumerate() {
        let cluster = cluster_ids
            .map(|ids| ids[i].to_string())
            .unwrap_or_default();
        w.write_record([
            coord[0].to_string(),
            coord[1].to_string(),
            labels[i].to_string(),
            cluster,
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-round regret-bound components as CSV.
pub fn write_bound_trace(points: &[BoundTracePoint], path: &Path) -> Result<()> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "t",
        "delta_logdet",
        "confidence_width",
        "theta_term",
        "radius",
        "bound",
        "phi",
    ])?;
    for p in points {
        w.write_record([
            p.t.to_string(),
            p.delta_logdet.to_string(),
            p.confidence_width.to_string(),
            p.theta_term.to_string(),
            p.radius.to_string(),
            p.bound.to_string(),
            p.phi.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Centroid dump: one NDJSON record per centroid with its mean vector,
/// assignment count, and per-arm average rewards (null where unobserved).
pub fn write_centroids(model: &ClusterModel, num_arms: usize, path: &Path) -> Result<()> {
    ensure_parent(path)?;
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for (j, c) in model.centroids().iter().enumerate() {
        let avgs: Vec<Option<f64>> = (0..num_arms).map(|k| c.reward_avg(k)).collect();
        let record = serde_json::json!({
            "cluster": j,
            "n": c.assign_count(),
            "mean": c.mean(),
            "arm_avgs": avgs,
        });
        writeln!(out, "{record}")?;
    }
    out.flush()?;
    Ok(())
}
