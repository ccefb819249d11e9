// SPDX-License-Identifier: Apache-2.0

//! Agent networks: left-stochastic combination matrices and their Perron
//! eigenvectors.
//!
//! Entry `a[l][k]` is the weight agent `k` places on information arriving
//! from agent `l`; every column sums to one.

use std::collections::VecDeque;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column-sum tolerance for [`CombinationMatrix`] validation.
pub const COLUMN_SUM_TOL: f64 = 1e-12;
/// Default power-iteration tolerance.
pub const PERRON_TOL: f64 = 1e-12;
/// Power-iteration cap.
pub const PERRON_MAX_ITER: usize = 1_000_000;

/// Left-stochastic combination matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinationMatrix {
    k: usize,
    // row-major: entries[l * k + col]
    entries: Vec<f64>,
}

/// On-disk form: `{"K": int, "rows": [[real,...],...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixFile {
    #[serde(rename = "K")]
    pub k: usize,
    pub rows: Vec<Vec<f64>>,
}

/// Result of [`is_strongly_connected`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Connectivity {
    pub strongly_connected: bool,
    /// Strongly connected and at least one self-loop.
    pub primitive: bool,
}

/// Perron eigenvector of a primitive left-stochastic matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PerronVector(Vec<f64>);

impl CombinationMatrix {
    /// Validates and wraps a dense matrix given by rows.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let k = rows.len();
        if k == 0 {
            return Err(Error::Empty("combination matrix"));
        }
        let mut entries = Vec::with_capacity(k * k);
        for (l, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::InvalidMatrix(format!(
                    "row {l} has {} entries, expected {k}",
                    row.len()
                )));
            }
            for (col, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidMatrix(format!(
                        "entry ({l},{col}) = {v} is negative or non-finite"
                    )));
                }
            }
            entries.extend_from_slice(row);
        }
        let m = CombinationMatrix { k, entries };
        for col in 0..k {
            let s: f64 = (0..k).map(|l| m.get(l, col)).sum();
            if (s - 1.0).abs() > COLUMN_SUM_TOL {
                return Err(Error::InvalidMatrix(format!(
                    "column {col} sums to {s}, expected 1"
                )));
            }
        }
        Ok(m)
    }

    pub fn identity(k: usize) -> Result<Self> {
        let rows = (0..k)
            .map(|l| (0..k).map(|c| if l == c { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::from_rows(rows)
    }

    /// Number of agents.
    pub fn size(&self) -> usize {
        self.k
    }

    /// Weight on information flowing from `from` into `to`.
    #[inline]
    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.entries[from * self.k + to]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.k).map(|r| r.to_vec()).collect()
    }

    /// Neighborhood `N_k`: agents with nonzero weight into `k`, self included
    /// when the self-loop is present.
    pub fn neighbors(&self, k: usize) -> Vec<usize> {
        (0..self.k).filter(|&l| self.get(l, k) != 0.0).collect()
    }

    /// `A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.k);
        self.entries
            .chunks(self.k)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `y_k = sum_l a[l][k] x_l`, the combination step of the diffusion
    /// recursions.
    pub fn combine(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.k);
        (0..self.k)
            .map(|k| (0..self.k).map(|l| self.get(l, k) * x[l]).sum())
            .collect()
    }

    pub fn is_doubly_stochastic(&self, tol: f64) -> bool {
        self.entries
            .chunks(self.k)
            .all(|row| (row.iter().sum::<f64>() - 1.0).abs() <= tol)
    }

    pub fn to_file(&self) -> MatrixFile {
        MatrixFile {
            k: self.k,
            rows: self.rows(),
        }
    }

    pub fn from_file_struct(f: MatrixFile) -> Result<Self> {
        if f.rows.len() != f.k {
            return Err(Error::InvalidMatrix(format!(
                "K = {} but {} rows given",
                f.k,
                f.rows.len()
            )));
        }
        Self::from_rows(f.rows)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_file_struct(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(&self.to_file())?)?;
        Ok(())
    }
}

impl PerronVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `sum_k pi_k x_k`.
    pub fn weighted_sum(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.0.len());
        self.0.iter().zip(x).map(|(p, v)| p * v).sum()
    }

    /// Wraps an externally supplied weight vector after checking positivity
    /// and normalization.
    pub fn from_weights(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::Empty("Perron vector"));
        }
        if w.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid("Perron weights must be positive"));
        }
        let s: f64 = w.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("Perron weights sum to {s}")));
        }
        Ok(PerronVector(w))
    }

    pub fn uniform(k: usize) -> Self {
        PerronVector(vec![1.0 / k as f64; k])
    }
}

impl std::ops::Index<usize> for PerronVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Uniform averaging rule: `a[l][k] = 1/|N_k|` for `l` in `N_k`.
///
/// `adjacency[l][k]` is true when `l` belongs to the neighborhood of `k`.
/// Self-loops must be present explicitly on the diagonal.
pub fn build_averaging_matrix(adjacency: &[Vec<bool>]) -> Result<CombinationMatrix> {
    let k = adjacency.len();
    if k == 0 {
        return Err(Error::Empty("graph"));
    }
    for (l, row) in adjacency.iter().enumerate() {
        if row.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                actual: row.len(),
                context: "adjacency row length",
            });
        }
        if !row[l] {
            return Err(Error::InvalidMatrix(format!(
                "agent {l} has no self-loop; add it explicitly"
            )));
        }
    }
    let degree: Vec<usize> = (0..k)
        .map(|col| (0..k).filter(|&l| adjacency[l][col]).count())
        .collect();
    let rows = (0..k)
        .map(|l| {
            (0..k)
                .map(|col| {
                    if adjacency[l][col] {
                        1.0 / degree[col] as f64
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    CombinationMatrix::from_rows(rows)
}

/// Adjacency of a directed ring with self-loops: `N_k = {k, k-1}`.
pub fn directed_ring_adjacency(k: usize) -> Vec<Vec<bool>> {
    (0..k)
        .map(|l| (0..k).map(|c| l == c || (c + k - 1) % k == l).collect())
        .collect()
}

/// Undirected `rows x cols` grid (4-neighborhood) with self-loops, agents
/// numbered row-major.
pub fn grid_adjacency(rows: usize, cols: usize) -> Vec<Vec<bool>> {
    let k = rows * cols;
    let mut adj = vec![vec![false; k]; k];
    for r in 0..rows {
        for c in 0..cols {
            let a = r * cols + c;
            adj[a][a] = true;
            if r + 1 < rows {
                adj[a][a + cols] = true;
                adj[a + cols][a] = true;
            }
            if c + 1 < cols {
                adj[a][a + 1] = true;
                adj[a + 1][a] = true;
            }
        }
    }
    adj
}

/// Random strongly connected adjacency: an undirected ring plus each
/// remaining pair with probability `edge_prob`, all self-loops present.
pub fn random_connected_adjacency<R: Rng + ?Sized>(
    k: usize,
    edge_prob: f64,
    rng: &mut R,
) -> Vec<Vec<bool>> {
    let mut adj = vec![vec![false; k]; k];
    for a in 0..k {
        adj[a][a] = true;
        let b = (a + 1) % k;
        adj[a][b] = true;
        adj[b][a] = true;
    }
    for a in 0..k {
        for b in (a + 1)..k {
            if rng.random::<f64>() < edge_prob {
                adj[a][b] = true;
                adj[b][a] = true;
            }
        }
    }
    adj
}

fn reachable_all(k: usize, edge: impl Fn(usize, usize) -> bool) -> bool {
    let mut seen = vec![false; k];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(u) = queue.pop_front() {
        for v in 0..k {
            if !seen[v] && edge(u, v) {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Strong connectivity of the support graph, plus primitivity
/// (strongly connected with at least one self-loop).
pub fn is_strongly_connected(matrix: &CombinationMatrix) -> Connectivity {
    let k = matrix.size();
    let forward = reachable_all(k, |u, v| matrix.get(u, v) != 0.0);
    let backward = reachable_all(k, |u, v| matrix.get(v, u) != 0.0);
    let strongly_connected = forward && backward;
    let self_loop = (0..k).any(|i| matrix.get(i, i) > 0.0);
    Connectivity {
        strongly_connected,
        primitive: strongly_connected && self_loop,
    }
}

/// Perron eigenvector by power iteration from the uniform vector.
pub fn perron_eigenvector(matrix: &CombinationMatrix, tol: f64) -> Result<PerronVector> {
    let k = matrix.size();
    perron_eigenvector_from(matrix, tol, &vec![1.0 / k as f64; k])
}

/// Power iteration `x <- A x` from a positive starting vector, stopping
/// when the max-norm change falls below `tol`.
pub fn perron_eigenvector_from(
    matrix: &CombinationMatrix,
    tol: f64,
    start: &[f64],
) -> Result<PerronVector> {
    if !(tol > 0.0) {
        return Err(Error::OutOfRange(format!("tolerance {tol} must be positive")));
    }
    let k = matrix.size();
    if start.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            actual: start.len(),
            context: "Perron start vector",
        });
    }
    if start.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::invalid("start vector must be positive"));
    }
    if !is_strongly_connected(matrix).primitive {
        return Err(Error::NotPrimitive);
    }
    let s: f64 = start.iter().sum();
    let mut x: Vec<f64> = start.iter().map(|v| v / s).collect();
    let mut residual = f64::INFINITY;
    for _ in 0..PERRON_MAX_ITER {
        let mut next = matrix.apply(&x);
        let sum: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= sum);
        residual = next
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        x = next;
        if residual < tol {
            return Ok(PerronVector(x));
        }
    }
    Err(Error::NoConvergence {
        iterations: PERRON_MAX_ITER,
        residual,
    })
}
