//! Dataset ingestion: an edge-list text file plus one columnar node table
//! whose header names the sensitive and label columns.

use super::{AttributedGraph, SplitMasks};
use crate::error::{CoreError, Result};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

/// Column mapping for [`load_graph`]: where the files live and which node
/// table columns hold sensitive attributes and the task label.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoadSchema {
    pub nodes_file: PathBuf,
    pub edges_file: PathBuf,
    pub sensitive_columns: Vec<String>,
    #[serde(default)]
    pub label_column: Option<String>,
}

/// Load and validate a graph from disk.
///
/// Sensitive columns are removed from the feature matrix and stored as class
/// indices; non-binary sensitive values are accepted and their cardinality
/// recorded. The edge list is symmetrized (a warning is logged when it was
/// not already symmetric) and deduplicated.
pub fn load_graph(schema: &LoadSchema) -> Result<AttributedGraph> {
    if !schema.nodes_file.exists() {
        return Err(CoreError::Schema(format!(
            "node table not found: {}",
            schema.nodes_file.display()
        )));
    }
    if !schema.edges_file.exists() {
        return Err(CoreError::Schema(format!(
            "edge list not found: {}",
            schema.edges_file.display()
        )));
    }

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(&schema.nodes_file)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.to_string()).collect();

    let mut sensitive_idx = Vec::with_capacity(schema.sensitive_columns.len());
    for name in &schema.sensitive_columns {
        let idx = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CoreError::Schema(format!("missing sensitive column '{name}'")))?;
        sensitive_idx.push(idx);
    }
    let label_idx = match &schema.label_column {
        Some(name) => Some(
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| CoreError::Schema(format!("missing label column '{name}'")))?,
        ),
        None => None,
    };

    let mut feature_rows: Vec<Vec<f64>> = Vec::new();
    let mut sensitive_rows: Vec<Vec<usize>> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    for (row_no, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(CoreError::Schema(format!(
                "row {row_no} has {} fields, header has {}",
                record.len(),
                headers.len()
            )));
        }
        let mut feats = Vec::with_capacity(headers.len());
        let mut sens = vec![0usize; sensitive_idx.len()];
        for (col, field) in record.iter().enumerate() {
            if let Some(si) = sensitive_idx.iter().position(|&i| i == col) {
                sens[si] = parse_class(field, &headers[col], row_no)?;
            } else if Some(col) == label_idx {
                labels.push(parse_class(field, &headers[col], row_no)?);
            } else {
                let v: f64 = field.parse().map_err(|_| {
                    CoreError::Data(format!(
                        "non-numeric value '{field}' in column '{}' row {row_no}",
                        headers[col]
                    ))
                })?;
                feats.push(v);
            }
        }
        feature_rows.push(feats);
        sensitive_rows.push(sens);
    }

    let node_count = feature_rows.len();
    let feat_width = feature_rows.first().map_or(0, |r| r.len());
    let mut features = Array2::<f64>::zeros((node_count, feat_width));
    for (r, row) in feature_rows.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            features[[r, c]] = v;
        }
    }

    let s_count = schema.sensitive_columns.len();
    let sensitive = if s_count > 0 {
        let mut s = Array2::<usize>::zeros((node_count, s_count));
        for (r, row) in sensitive_rows.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                s[[r, c]] = v;
            }
        }
        Some(s)
    } else {
        None
    };
    let cardinalities: Vec<usize> = (0..s_count)
        .map(|i| {
            let max = sensitive_rows.iter().map(|r| r[i]).max().unwrap_or(0);
            (max + 1).max(2)
        })
        .collect();

    let (raw_edges, was_asymmetric) = read_edge_list(&schema.edges_file, node_count)?;
    if was_asymmetric {
        log::warn!(
            "edge list {} is not symmetric; symmetrizing",
            schema.edges_file.display()
        );
    }

    AttributedGraph::new(
        node_count,
        &raw_edges,
        features,
        sensitive,
        if label_idx.is_some() { Some(labels) } else { None },
        cardinalities,
        SplitMasks::all_train(node_count),
    )
}

fn parse_class(field: &str, col: &str, row: usize) -> Result<usize> {
    // Accept both integer and float encodings of class indices.
    let v: f64 = field
        .parse()
        .map_err(|_| CoreError::Data(format!("non-numeric class '{field}' in '{col}' row {row}")))?;
    if v < 0.0 || v.fract().abs() > 1e-9 {
        return Err(CoreError::Data(format!(
            "class value '{field}' in '{col}' row {row} is not a non-negative integer"
        )));
    }
    Ok(v as usize)
}

fn read_edge_list(path: &Path, node_count: usize) -> Result<(Vec<(usize, usize)>, bool)> {
    let file = File::open(path)?;
    let mut edges = Vec::new();
    let mut directed = std::collections::HashSet::new();
    for (line_no, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = trimmed.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|p| !p.is_empty())
            .collect();
        if parts.len() != 2 {
            return Err(CoreError::Schema(format!(
                "edge line {line_no} has {} fields, expected 2",
                parts.len()
            )));
        }
        let u: usize = parts[0]
            .parse()
            .map_err(|_| CoreError::Data(format!("bad node id '{}' on line {line_no}", parts[0])))?;
        let v: usize = parts[1]
            .parse()
            .map_err(|_| CoreError::Data(format!("bad node id '{}' on line {line_no}", parts[1])))?;
        if u >= node_count || v >= node_count {
            return Err(CoreError::Data(format!(
                "edge ({u},{v}) on line {line_no} references a node >= {node_count}"
            )));
        }
        edges.push((u, v));
        directed.insert((u, v));
    }
    let asymmetric = edges
        .iter()
        .any(|&(u, v)| u != v && !directed.contains(&(v, u)) && directed.contains(&(u, v)));
    Ok((edges, asymmetric))
}
