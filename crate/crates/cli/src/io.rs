//! Graph JSONL, truth sidecar, metrics JSONL, and JSON/CSV writers.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rosgas_core::hetgraph::{build_graph, EdgeSpec, EdgeType, HetGraph, NodeSpec, NodeType};
use rosgas_core::trainer::MetricsLog;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// One line of a graph file. Nodes precede the edges that reference them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "lowercase", deny_unknown_fields)]
pub enum GraphRecord {
    Node {
        id: u64,
        #[serde(rename = "type")]
        node_type: NodeType,
        x: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        y: Option<u8>,
    },
    Edge {
        src: u64,
        dst: u64,
        rel: EdgeType,
    },
}

/// Ground truth of one user in the sidecar file.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthRecord {
    pub id: u64,
    pub y: u8,
}

pub fn graph_records(g: &HetGraph) -> Vec<GraphRecord> {
    let mut out: Vec<GraphRecord> = (0..g.n_nodes())
        .map(|v| GraphRecord::Node {
            id: g.external_id(v),
            node_type: g.node_type(v),
            x: g.features(v).to_vec(),
            y: g.label(v),
        })
        .collect();
    out.extend(g.edges().iter().map(|e| GraphRecord::Edge {
        src: g.external_id(e.src),
        dst: g.external_id(e.dst),
        rel: e.rel,
    }));
    out
}

pub fn write_graph(g: &HetGraph, path: &Path) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in graph_records(g) {
        serde_json::to_writer(&mut w, &r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_graph(path: &Path) -> Result<HetGraph, CliError> {
    let file = File::open(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let mut labels = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |m: String| CliError::Input(format!("{}:{}: {m}", path.display(), i + 1));
        let record: GraphRecord = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        match record {
            GraphRecord::Node { id, node_type, x, y } => {
                seen.insert(id);
                if let Some(y) = y {
                    labels.push((id, y));
                }
                nodes.push(NodeSpec {
                    id,
                    node_type,
                    features: x,
                });
            }
            GraphRecord::Edge { src, dst, rel } => {
                for end in [src, dst] {
                    if !seen.contains(&end) {
                        return Err(bad(format!("edge references node {end} before its record")));
                    }
                }
                edges.push(EdgeSpec { src, dst, rel });
            }
        }
    }
    build_graph(&nodes, &edges, &labels).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn write_truth(truth: &[(u64, u8)], path: &Path) -> Result<(), CliError> {
    let records: Vec<TruthRecord> = truth.iter().map(|&(id, y)| TruthRecord { id, y }).collect();
    write_json(&records, path)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn write_metrics(log: &MetricsLog, path: &Path) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in log.records() {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_line_format() {
        let r = GraphRecord::Node {
            id: 3,
            node_type: NodeType::User,
            x: vec![0.5, -1.0],
            y: Some(1),
        };
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            r#"{"t":"node","id":3,"type":"User","x":[0.5,-1.0],"y":1}"#
        );
        let e = GraphRecord::Edge {
            src: 3,
            dst: 4,
            rel: EdgeType::Follow,
        };
        assert_eq!(
            serde_json::to_string(&e).unwrap(),
            r#"{"t":"edge","src":3,"dst":4,"rel":"Follow"}"#
        );
    }

    #[test]
    fn unlabeled_node_omits_y() {
        let r: GraphRecord =
            serde_json::from_str(r#"{"t":"node","id":1,"type":"Tweet","x":[1.0]}"#).unwrap();
        assert!(matches!(r, GraphRecord::Node { y: None, .. }));
        assert!(!serde_json::to_string(&r).unwrap().contains("\"y\""));
    }

    #[test]
    fn edge_before_node_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.jsonl");
        std::fs::write(
            &p,
            "{\"t\":\"edge\",\"src\":0,\"dst\":1,\"rel\":\"Follow\"}\n",
        )
        .unwrap();
        assert!(matches!(read_graph(&p), Err(CliError::Input(_))));
    }
}
