//! Sparse graph representation and the normalized graph operators the
//! spectral GNN variants consume.
//!
//! All operators are built in canonical CSR form (sorted, deduplicated
//! column indices per row) so that products are bitwise deterministic.
//! Degree-zero nodes use the convention `D^{-1/2} = 0`, so isolated nodes
//! only pass features through the identity term of the Laplacian.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetric graph operator in CSR format, 64-bit values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_offsets: Vec<usize>,
    pub col_indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseMatrix {
    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Entries of row `i` as (column, value) pairs, ascending column order.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.row_offsets[i];
        let hi = self.row_offsets[i + 1];
        self.col_indices[lo..hi]
            .iter()
            .copied()
            .zip(self.values[lo..hi].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i)
            .find(|&(c, _)| c == j)
            .map(|(_, v)| v)
            .unwrap_or(0.0)
    }

    /// Sparse-dense product `self * x`. Per-row summation runs in ascending
    /// column order, which keeps repeated products bitwise identical.
    pub fn spmm(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if self.n_cols != x.nrows() {
            return Err(Error::input(format!(
                "spmm shape mismatch: matrix is {}x{}, dense operand has {} rows",
                self.n_rows,
                self.n_cols,
                x.nrows()
            )));
        }
        let d = x.ncols();
        let mut out = Array2::zeros((self.n_rows, d));
        for i in 0..self.n_rows {
            let lo = self.row_offsets[i];
            let hi = self.row_offsets[i + 1];
            let mut row_out = out.row_mut(i);
            for idx in lo..hi {
                let j = self.col_indices[idx];
                let v = self.values[idx];
                let xr = x.row(j);
                for c in 0..d {
                    row_out[c] += v * xr[c];
                }
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n_rows, self.n_cols));
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                out[[i, j]] = v;
            }
        }
        out
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Crude power-iteration estimate of the spectral radius, used for the
    /// load-time sanity check that Chebyshev inputs stay inside [-1, 1].
    pub fn spectral_radius_estimate(&self, iters: usize) -> f64 {
        let n = self.n_rows;
        if n == 0 {
            return 0.0;
        }
        let mut v = Array2::from_shape_fn((n, 1), |(i, _)| 1.0 + (i as f64 % 7.0) * 0.1);
        let mut lambda = 0.0;
        for _ in 0..iters {
            let w = self.spmm(v.view()).expect("square operator");
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            lambda = norm / v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v = w / norm;
        }
        lambda
    }
}

/// Undirected graph with node features and class labels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Graph {
    pub n_nodes: usize,
    /// Deduplicated undirected pairs with u < v; no self-loops stored.
    pub edges: Vec<(usize, usize)>,
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl Graph {
    pub fn new(
        n_nodes: usize,
        edges: Vec<(usize, usize)>,
        features: Array2<f64>,
        labels: Vec<usize>,
        n_classes: usize,
    ) -> Result<Self> {
        if features.nrows() != n_nodes {
            return Err(Error::input(format!(
                "feature matrix has {} rows for {} nodes",
                features.nrows(),
                n_nodes
            )));
        }
        if labels.len() != n_nodes {
            return Err(Error::input(format!(
                "{} labels for {} nodes",
                labels.len(),
                n_nodes
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::input(format!(
                "label {bad} out of range for {n_classes} classes"
            )));
        }
        let edges = canonical_edges(&edges, n_nodes)?;
        Ok(Graph {
            n_nodes,
            edges,
            features,
            labels,
            n_classes,
        })
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }
}

/// Which normalized graph operator a filter family runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixVariant {
    /// `L-hat = I - D^{-1/2} A D^{-1/2}`
    NormLaplacian,
    /// `L-tilde = -D^{-1/2} A D^{-1/2}`
    ShiftedNormLaplacian,
    /// `A-tilde = D^{-1/2} A D^{-1/2}`
    NormAdjacency,
    /// `A-tilde' = (D+I)^{-1/2} (A+I) (D+I)^{-1/2}`
    NormAdjacencySelfLoop,
}

/// Deduplicate, symmetrize, and validate an undirected edge list into
/// canonical (u < v) pairs. Self-loops are dropped.
fn canonical_edges(edges: &[(usize, usize)], n: usize) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::with_capacity(edges.len());
    for &(u, v) in edges {
        if u >= n || v >= n {
            return Err(Error::input(format!(
                "edge ({u},{v}) out of range for {n} nodes"
            )));
        }
        if u == v {
            continue;
        }
        out.push(if u < v { (u, v) } else { (v, u) });
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Canonical CSR of the symmetrized, deduplicated adjacency (value 1.0 per
/// directed entry); self-loops added with value 1.0 iff `with_self_loops`.
pub fn build_csr(edges: &[(usize, usize)], n: usize, with_self_loops: bool) -> Result<SparseMatrix> {
    let undirected = canonical_edges(edges, n)?;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(u, v) in &undirected {
        adj[u].push(v);
        adj[v].push(u);
    }
    if with_self_loops {
        for (i, row) in adj.iter_mut().enumerate() {
            row.push(i);
        }
    }
    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut col_indices = Vec::new();
    row_offsets.push(0);
    for row in adj.iter_mut() {
        row.sort_unstable();
        col_indices.extend_from_slice(row);
        row_offsets.push(col_indices.len());
    }
    let values = vec![1.0; col_indices.len()];
    Ok(SparseMatrix {
        n_rows: n,
        n_cols: n,
        row_offsets,
        col_indices,
        values,
    })
}

/// Build the requested normalized operator for `g`.
pub fn graph_matrix(g: &Graph, variant: MatrixVariant) -> Result<SparseMatrix> {
    if g.n_nodes == 0 {
        return Err(Error::input("graph is empty"));
    }
    let with_loops = variant == MatrixVariant::NormAdjacencySelfLoop;
    let mut m = build_csr(&g.edges, g.n_nodes, with_loops)?;

    // Degrees from the unnormalized structure. For the self-loop variant the
    // loop contributes 1 to its own degree, which is exactly (D+I).
    let mut degree = vec![0.0f64; g.n_nodes];
    for i in 0..g.n_nodes {
        let lo = m.row_offsets[i];
        let hi = m.row_offsets[i + 1];
        degree[i] = (hi - lo) as f64;
    }
    let inv_sqrt: Vec<f64> = degree
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();

    let sign = match variant {
        MatrixVariant::NormLaplacian | MatrixVariant::ShiftedNormLaplacian => -1.0,
        MatrixVariant::NormAdjacency | MatrixVariant::NormAdjacencySelfLoop => 1.0,
    };
    for i in 0..g.n_nodes {
        let lo = m.row_offsets[i];
        let hi = m.row_offsets[i + 1];
        for idx in lo..hi {
            let j = m.col_indices[idx];
            m.values[idx] *= sign * inv_sqrt[i] * inv_sqrt[j];
        }
    }
    if variant == MatrixVariant::NormLaplacian {
        m = add_identity(&m);
    }
    Ok(m)
}

/// `m + I`, preserving canonical CSR form.
fn add_identity(m: &SparseMatrix) -> SparseMatrix {
    let n = m.n_rows;
    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut col_indices = Vec::new();
    let mut values = Vec::new();
    row_offsets.push(0);
    for i in 0..n {
        let mut placed = false;
        for (j, v) in m.row(i) {
            if !placed && j == i {
                col_indices.push(j);
                values.push(v + 1.0);
                placed = true;
            } else {
                if !placed && j > i {
                    col_indices.push(i);
                    values.push(1.0);
                    placed = true;
                }
                col_indices.push(j);
                values.push(v);
            }
        }
        if !placed {
            col_indices.push(i);
            values.push(1.0);
        }
        // Entries past the diagonal were already in ascending order; the
        // insert above keeps the row sorted.
        let lo = *row_offsets.last().unwrap();
        debug_assert!(col_indices[lo..].windows(2).all(|w| w[0] < w[1]));
        row_offsets.push(col_indices.len());
    }
    SparseMatrix {
        n_rows: n,
        n_cols: n,
        row_offsets,
        col_indices,
        values,
    }
}

/// Fraction of undirected edges whose endpoints share a label.
pub fn edge_homophily(g: &Graph) -> Result<f64> {
    if g.edges.is_empty() {
        return Err(Error::input("edge homophily undefined on a graph with no edges"));
    }
    let same = g
        .edges
        .iter()
        .filter(|&&(u, v)| g.labels[u] == g.labels[v])
        .count();
    Ok(same as f64 / g.edges.len() as f64)
}
