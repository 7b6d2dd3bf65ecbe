//! On-disk dataset bundles: a directory holding `meta.json`, `edges.csv`,
//! `features.csv`, and `labels.csv`. Plain text so a bundle can be audited
//! with a pager; parse errors carry file and line.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphcore::{edge_homophily, Graph};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Meta {
    name: String,
    n_nodes: usize,
    n_features: usize,
    n_classes: usize,
    #[serde(default)]
    provenance: String,
}

#[derive(Debug, Clone)]
pub struct DatasetBundle {
    pub graph: Graph,
    pub name: String,
    pub provenance: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetStats {
    pub name: String,
    pub n_nodes: usize,
    pub n_edges: usize,
    pub n_features: usize,
    pub n_classes: usize,
    pub edge_homophily: f64,
}

impl DatasetBundle {
    pub fn stats(&self) -> Result<DatasetStats> {
        Ok(DatasetStats {
            name: self.name.clone(),
            n_nodes: self.graph.n_nodes,
            n_edges: self.graph.edges.len(),
            n_features: self.graph.n_features(),
            n_classes: self.graph.n_classes,
            edge_homophily: edge_homophily(&self.graph)?,
        })
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_dataset(dir: impl AsRef<Path>) -> Result<DatasetBundle> {
    let dir = dir.as_ref();
    let meta_path = dir.join("meta.json");
    let meta: Meta = serde_json::from_str(&read_to_string(&meta_path)?)
        .map_err(|e| Error::load(meta_path.display().to_string(), e.line(), e.to_string()))?;

    let edges_path = dir.join("edges.csv");
    let mut edges = Vec::new();
    for (lineno, line) in read_to_string(&edges_path)?.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let parse = |s: Option<&str>| -> Result<usize> {
            s.ok_or_else(|| {
                Error::load(edges_path.display().to_string(), lineno + 1, "expected two columns")
            })?
            .trim()
            .parse()
            .map_err(|e| {
                Error::load(
                    edges_path.display().to_string(),
                    lineno + 1,
                    format!("bad node index: {e}"),
                )
            })
        };
        let u = parse(parts.next())?;
        let v = parse(parts.next())?;
        if parts.next().is_some() {
            return Err(Error::load(
                edges_path.display().to_string(),
                lineno + 1,
                "expected exactly two columns",
            ));
        }
        if u >= meta.n_nodes || v >= meta.n_nodes {
            return Err(Error::load(
                edges_path.display().to_string(),
                lineno + 1,
                format!("node index out of range for {} nodes", meta.n_nodes),
            ));
        }
        edges.push((u, v));
    }

    let feat_path = dir.join("features.csv");
    let mut values = Vec::with_capacity(meta.n_nodes * meta.n_features);
    let mut n_rows = 0usize;
    for (lineno, line) in read_to_string(&feat_path)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut count = 0usize;
        for cell in line.split(',') {
            let x: f64 = cell.trim().parse().map_err(|e| {
                Error::load(
                    feat_path.display().to_string(),
                    lineno + 1,
                    format!("bad feature value: {e}"),
                )
            })?;
            values.push(x);
            count += 1;
        }
        if count != meta.n_features {
            return Err(Error::load(
                feat_path.display().to_string(),
                lineno + 1,
                format!("{count} features, expected {}", meta.n_features),
            ));
        }
        n_rows += 1;
    }
    if n_rows != meta.n_nodes {
        return Err(Error::load(
            feat_path.display().to_string(),
            n_rows,
            format!("{n_rows} feature rows for {} nodes", meta.n_nodes),
        ));
    }
    let features = Array2::from_shape_vec((meta.n_nodes, meta.n_features), values)
        .expect("counts validated above");

    let labels_path = dir.join("labels.csv");
    let mut labels = Vec::with_capacity(meta.n_nodes);
    for (lineno, line) in read_to_string(&labels_path)?.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let l: usize = line.parse().map_err(|e| {
            Error::load(
                labels_path.display().to_string(),
                lineno + 1,
                format!("bad label: {e}"),
            )
        })?;
        if l >= meta.n_classes {
            return Err(Error::load(
                labels_path.display().to_string(),
                lineno + 1,
                format!("label {l} out of range for {} classes", meta.n_classes),
            ));
        }
        labels.push(l);
    }
    if labels.len() != meta.n_nodes {
        return Err(Error::load(
            labels_path.display().to_string(),
            labels.len(),
            format!("{} labels for {} nodes", labels.len(), meta.n_nodes),
        ));
    }
    // Labels must cover 0..n_classes contiguously.
    for c in 0..meta.n_classes {
        if !labels.iter().any(|&l| l == c) {
            return Err(Error::load(
                labels_path.display().to_string(),
                0,
                format!("class {c} has no nodes; labels must be contiguous from 0"),
            ));
        }
    }

    let graph = Graph::new(meta.n_nodes, edges, features, labels, meta.n_classes)?;
    Ok(DatasetBundle {
        graph,
        name: meta.name,
        provenance: meta.provenance,
    })
}

/// Write a bundle in the same plain-text format `load_dataset` reads.
pub fn save_dataset(bundle: &DatasetBundle, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let write = |name: &str, content: String| -> Result<()> {
        let path = dir.join(name);
        let mut f = fs::File::create(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
        f.write_all(content.as_bytes())
            .map_err(|e| Error::io(path.display().to_string(), e))
    };

    let g = &bundle.graph;
    let meta = Meta {
        name: bundle.name.clone(),
        n_nodes: g.n_nodes,
        n_features: g.n_features(),
        n_classes: g.n_classes,
        provenance: bundle.provenance.clone(),
    };
    write("meta.json", serde_json::to_string_pretty(&meta).unwrap() + "\n")?;

    let mut edges = String::new();
    for &(u, v) in &g.edges {
        edges.push_str(&format!("{u},{v}\n"));
    }
    write("edges.csv", edges)?;

    let mut feats = String::with_capacity(g.n_nodes * g.n_features() * 4);
    for row in g.features.rows() {
        let cells: Vec<String> = row.iter().map(|x| format!("{x}")).collect();
        feats.push_str(&cells.join(","));
        feats.push('\n');
    }
    write("features.csv", feats)?;

    let mut labels = String::new();
    for &l in &g.labels {
        labels.push_str(&format!("{l}\n"));
    }
    write("labels.csv", labels)
}
