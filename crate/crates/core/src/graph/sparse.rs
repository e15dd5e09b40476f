//! CSR sparse matrices and the symmetric-adjacency operations built on them.

use std::collections::BTreeMap;

use super::GraphError;
use crate::graph::DenseMatrix;

/// Sparse matrix in CSR layout.
///
/// Invariants, enforced by every constructor:
/// - `row_offsets` has length `n_rows + 1`, is non-decreasing, and its last
///   entry equals `values.len()`;
/// - column indices are strictly increasing within each row and lie in
///   `[0, n_cols)`;
/// - no explicit zero values are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Empty matrix of the given shape.
    pub fn empty(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            row_offsets: vec![0; n_rows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Build from raw CSR parts, validating every invariant.
    pub fn from_raw(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self, GraphError> {
        if row_offsets.len() != n_rows + 1 {
            return Err(GraphError::MalformedCsr(format!(
                "row_offsets length {} for {} rows",
                row_offsets.len(),
                n_rows
            )));
        }
        if row_offsets[0] != 0 || *row_offsets.last().unwrap() != values.len() {
            return Err(GraphError::MalformedCsr(
                "row_offsets must start at 0 and end at nnz".into(),
            ));
        }
        if col_indices.len() != values.len() {
            return Err(GraphError::MalformedCsr(format!(
                "{} column indices but {} values",
                col_indices.len(),
                values.len()
            )));
        }
        for i in 0..n_rows {
            if row_offsets[i] > row_offsets[i + 1] {
                return Err(GraphError::MalformedCsr(format!(
                    "row_offsets decreasing at row {i}"
                )));
            }
            let mut prev: Option<usize> = None;
            for idx in row_offsets[i]..row_offsets[i + 1] {
                let c = col_indices[idx];
                if c >= n_cols {
                    return Err(GraphError::IndexOutOfRange {
                        index: c,
                        bound: n_cols,
                    });
                }
                if let Some(p) = prev {
                    if c <= p {
                        return Err(GraphError::MalformedCsr(format!(
                            "columns not strictly increasing in row {i}"
                        )));
                    }
                }
                prev = Some(c);
                let v = values[idx];
                if !v.is_finite() {
                    return Err(GraphError::NonFiniteValue { row: i, col: c });
                }
                if v == 0.0 {
                    return Err(GraphError::MalformedCsr(format!(
                        "explicit zero stored at ({i}, {c})"
                    )));
                }
            }
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Build from (row, col, value) triples; duplicates keep the last-seen
    /// value, zeros are dropped. No symmetrization.
    pub fn from_triples(
        n_rows: usize,
        n_cols: usize,
        triples: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self, GraphError> {
        let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (i, j, w) in triples {
            if i >= n_rows || j >= n_cols {
                return Err(GraphError::EdgeOutOfRange {
                    src: i,
                    dst: j,
                    n: n_rows.max(n_cols),
                });
            }
            if !w.is_finite() {
                return Err(GraphError::NonFiniteValue { row: i, col: j });
            }
            map.insert((i, j), w);
        }
        Ok(Self::from_sorted_map(n_rows, n_cols, &map))
    }

    fn from_sorted_map(n_rows: usize, n_cols: usize, map: &BTreeMap<(usize, usize), f64>) -> Self {
        let mut row_offsets = vec![0usize; n_rows + 1];
        let mut col_indices = Vec::with_capacity(map.len());
        let mut values = Vec::with_capacity(map.len());
        for (&(i, j), &w) in map {
            if w == 0.0 {
                continue;
            }
            row_offsets[i + 1] += 1;
            col_indices.push(j);
            values.push(w);
        }
        for i in 0..n_rows {
            row_offsets[i + 1] += row_offsets[i];
        }
        Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Densify a matrix, dropping entries with |v| < `tol` (`tol = 0.0`
    /// keeps every nonzero).
    pub fn from_dense(m: &DenseMatrix, tol: f64) -> Self {
        let mut map = BTreeMap::new();
        for i in 0..m.n_rows() {
            for (j, &v) in m.row(i).iter().enumerate() {
                if v != 0.0 && v.abs() >= tol {
                    map.insert((i, j), v);
                }
            }
        }
        Self::from_sorted_map(m.n_rows(), m.n_cols(), &map)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    /// Number of stored entries.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// (column, value) pairs of row `i`, ascending column.
    pub fn row_iter(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.row_offsets[i];
        let hi = self.row_offsets[i + 1];
        self.col_indices[lo..hi]
            .iter()
            .copied()
            .zip(self.values[lo..hi].iter().copied())
    }

    /// Stored value at (i, j), or 0.0.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let lo = self.row_offsets[i];
        let hi = self.row_offsets[i + 1];
        match self.col_indices[lo..hi].binary_search(&j) {
            Ok(pos) => self.values[lo + pos],
            Err(_) => 0.0,
        }
    }

    /// All stored (row, col, value) triples in row-major order.
    pub fn triples(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |i| self.row_iter(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for j in 0..self.n_cols {
            counts[j + 1] += counts[j];
        }
        let row_offsets = counts.clone();
        let mut col_indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0f64; self.nnz()];
        let mut cursor = counts;
        for (i, j, v) in self.triples() {
            let pos = cursor[j];
            col_indices[pos] = i;
            values[pos] = v;
            cursor[j] += 1;
        }
        // Rows of the transpose inherit ascending order because triples()
        // walks rows in ascending order.
        SparseMatrix {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Exact symmetry check: (i, j) stored iff (j, i) stored with bit-equal value.
    pub fn is_symmetric(&self) -> bool {
        if self.n_rows != self.n_cols {
            return false;
        }
        self.triples()
            .all(|(i, j, v)| self.get(j, i).to_bits() == v.to_bits())
    }

    /// Sum of squared stored entries.
    pub fn frobenius_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// Materialize as dense.
    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for (i, j, v) in self.triples() {
            out.set(i, j, v);
        }
        out
    }

    /// Undirected edge list: one (i, j, w) per stored pair with i < j.
    /// Diagonal entries are skipped.
    pub fn undirected_edges(&self) -> Vec<(usize, usize, f64)> {
        self.triples().filter(|&(i, j, _)| i < j).collect()
    }

    /// Number of undirected edges (stored pairs with i < j).
    pub fn undirected_edge_count(&self) -> usize {
        self.triples().filter(|&(i, j, _)| i < j).count()
    }
}

/// Build a symmetric CSR adjacency matrix from undirected edges.
///
/// Both (i, j, w) and (j, i, w) are stored for every input edge. Duplicate
/// edges (either orientation) keep the last-seen weight; diagonal entries
/// and zero weights are dropped.
pub fn build_symmetric(
    n: usize,
    edges: impl IntoIterator<Item = (usize, usize, f64)>,
) -> Result<SparseMatrix, GraphError> {
    let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (i, j, w) in edges {
        if i >= n || j >= n {
            return Err(GraphError::EdgeOutOfRange { src: i, dst: j, n });
        }
        if !w.is_finite() {
            return Err(GraphError::NonFiniteValue { row: i, col: j });
        }
        if i == j {
            continue;
        }
        let key = if i < j { (i, j) } else { (j, i) };
        map.insert(key, w);
    }
    let mut full: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (&(i, j), &w) in &map {
        full.insert((i, j), w);
        full.insert((j, i), w);
    }
    Ok(SparseMatrix::from_sorted_map(n, n, &full))
}

/// Row sums of a square matrix: degree i = sum of stored values in row i.
pub fn degree_vector(a: &SparseMatrix) -> Vec<f64> {
    assert_eq!(a.n_rows(), a.n_cols(), "degree_vector expects a square matrix");
    (0..a.n_rows())
        .map(|i| a.row_iter(i).map(|(_, v)| v).sum())
        .collect()
}

/// Counters reported by [`sym_normalize_with_stats`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NormalizeStats {
    /// Rows whose degree fell below the zero-degree threshold.
    pub zero_degree_rows: usize,
    /// Rows whose degree came out negative; treated as zero-degree.
    pub negative_degree_rows: usize,
}

/// Degrees at or below this magnitude are treated as zero; the corresponding
/// rows and columns come out empty instead of dividing by ~0.
pub const DEGREE_EPS: f64 = 1e-12;

/// Symmetric normalization `D^{-1/2} A D^{-1/2}` with per-row guards.
///
/// With `add_self_loops` the input is replaced by `A + I` before degrees are
/// taken. Rows with degree below [`DEGREE_EPS`] (or negative) are zeroed, and
/// so are their mirror columns, keeping the output symmetric.
pub fn sym_normalize(a: &SparseMatrix, add_self_loops: bool) -> SparseMatrix {
    sym_normalize_with_stats(a, add_self_loops).0
}

/// As [`sym_normalize`], also reporting how many rows hit a degree guard.
pub fn sym_normalize_with_stats(
    a: &SparseMatrix,
    add_self_loops: bool,
) -> (SparseMatrix, NormalizeStats) {
    assert_eq!(a.n_rows(), a.n_cols(), "sym_normalize expects a square matrix");
    let n = a.n_rows();
    let worked;
    let work: &SparseMatrix = if add_self_loops {
        let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (i, j, v) in a.triples() {
            map.insert((i, j), v);
        }
        for i in 0..n {
            let v = map.entry((i, i)).or_insert(0.0);
            *v += 1.0;
        }
        worked = SparseMatrix::from_sorted_map(n, n, &map);
        &worked
    } else {
        a
    };

    let degrees = degree_vector(work);
    let mut stats = NormalizeStats::default();
    let inv_sqrt: Vec<f64> = degrees
        .iter()
        .map(|&d| {
            if d < 0.0 {
                stats.negative_degree_rows += 1;
                0.0
            } else if d < DEGREE_EPS {
                stats.zero_degree_rows += 1;
                0.0
            } else {
                1.0 / d.sqrt()
            }
        })
        .collect();

    let mut row_offsets = vec![0usize; n + 1];
    let mut col_indices = Vec::with_capacity(work.nnz());
    let mut values = Vec::with_capacity(work.nnz());
    for i in 0..n {
        for (j, v) in work.row_iter(i) {
            // The symmetric scale is computed before touching v so that the
            // (i, j) and (j, i) entries round identically.
            let scale = inv_sqrt[i] * inv_sqrt[j];
            let nv = v * scale;
            if nv != 0.0 {
                col_indices.push(j);
                values.push(nv);
            }
        }
        row_offsets[i + 1] = col_indices.len();
    }
    (
        SparseMatrix {
            n_rows: n,
            n_cols: n,
            row_offsets,
            col_indices,
            values,
        },
        stats,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_graph_3() -> SparseMatrix {
        build_symmetric(3, vec![(0, 1, 1.0), (1, 2, 1.0)]).unwrap()
    }

    #[test]
    fn build_symmetric_single_edge() {
        let a = build_symmetric(2, vec![(0, 1, 1.0)]).unwrap();
        assert_eq!(a.get(0, 1), 1.0);
        assert_eq!(a.get(1, 0), 1.0);
        assert_eq!(a.nnz(), 2);
    }

    #[test]
    fn build_symmetric_empty() {
        let a = build_symmetric(3, vec![]).unwrap();
        assert_eq!(a.nnz(), 0);
        assert_eq!(a.row_offsets(), &[0, 0, 0, 0]);
    }

    #[test]
    fn build_symmetric_last_write_wins() {
        // Oracle: a dense accumulator applying the same last-write rule.
        let edges = vec![(0usize, 1usize, 1.0f64), (1, 0, 2.0)];
        let mut dense = [[0.0f64; 2]; 2];
        for &(i, j, w) in &edges {
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            dense[a][b] = w;
            dense[b][a] = w;
        }
        let m = build_symmetric(2, edges).unwrap();
        assert_eq!(m.get(0, 1), dense[0][1]);
        assert_eq!(m.get(1, 0), dense[1][0]);
        assert_eq!(m.get(0, 1), 2.0);
    }

    #[test]
    fn build_symmetric_drops_diagonal_and_zero_weights() {
        let a = build_symmetric(3, vec![(1, 1, 5.0), (0, 2, 0.0)]).unwrap();
        assert_eq!(a.nnz(), 0);
    }

    #[test]
    fn build_symmetric_rejects_out_of_range() {
        let err = build_symmetric(2, vec![(0, 2, 1.0)]).unwrap_err();
        assert!(matches!(err, GraphError::EdgeOutOfRange { src: 0, dst: 2, n: 2 }));
    }

    #[test]
    fn degree_single_edge() {
        let a = build_symmetric(2, vec![(0, 1, 1.0)]).unwrap();
        assert_eq!(degree_vector(&a), vec![1.0, 1.0]);
    }

    #[test]
    fn degree_empty() {
        let a = SparseMatrix::empty(3, 3);
        assert_eq!(degree_vector(&a), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn degree_path_graph_matches_dense_row_sums() {
        let a = path_graph_3();
        let dense = a.to_dense();
        let oracle: Vec<f64> = (0..3).map(|i| dense.row(i).iter().sum()).collect();
        assert_eq!(degree_vector(&a), oracle);
        assert_eq!(oracle, vec![1.0, 2.0, 1.0]);
    }

    #[test]
    fn normalize_unit_edge_unchanged() {
        let a = build_symmetric(2, vec![(0, 1, 1.0)]).unwrap();
        let n = sym_normalize(&a, false);
        assert_eq!(n, a);
    }

    #[test]
    fn normalize_path_graph() {
        let a = path_graph_3();
        let n = sym_normalize(&a, false);
        let expect = 1.0 / 2.0f64.sqrt();
        assert!((n.get(0, 1) - expect).abs() < 1e-15);
        assert!((n.get(1, 2) - expect).abs() < 1e-15);
        assert!(n.is_symmetric());
    }

    #[test]
    fn normalize_zeroes_isolated_rows() {
        let a = build_symmetric(3, vec![(0, 1, 1.0)]).unwrap();
        let (n, stats) = sym_normalize_with_stats(&a, false);
        assert_eq!(n.row_iter(2).count(), 0);
        assert_eq!(stats.zero_degree_rows, 1);
    }

    #[test]
    fn normalize_guards_negative_degree() {
        let a = SparseMatrix::from_triples(2, 2, vec![(0, 1, -1.0), (1, 0, -1.0)]).unwrap();
        let (n, stats) = sym_normalize_with_stats(&a, false);
        assert_eq!(n.nnz(), 0);
        assert_eq!(stats.negative_degree_rows, 2);
    }

    #[test]
    fn normalize_with_self_loops_matches_dense_oracle() {
        let a = path_graph_3();
        let n = sym_normalize(&a, true);
        // Dense oracle with degrees of A + I.
        let mut dense = a.to_dense();
        for i in 0..3 {
            dense.set(i, i, dense.get(i, i) + 1.0);
        }
        let deg: Vec<f64> = (0..3).map(|i| dense.row(i).iter().sum::<f64>()).collect();
        for (i, j, v) in n.triples() {
            let expect = dense.get(i, j) / (deg[i] * deg[j]).sqrt();
            assert!((v - expect).abs() < 1e-12);
        }
        assert!(n.is_symmetric());
    }

    #[test]
    fn transpose_of_rectangular() {
        let m = SparseMatrix::from_triples(2, 3, vec![(0, 2, 1.5), (1, 0, -2.0)]).unwrap();
        let t = m.transpose();
        assert_eq!(t.get(2, 0), 1.5);
        assert_eq!(t.get(0, 1), -2.0);
        assert_eq!(t.n_rows(), 3);
        assert_eq!(t.n_cols(), 2);
    }
}
