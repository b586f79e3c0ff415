//! Sparse symmetric matrices stored as per-row adjacency lists, plus the
//! rectangular coordinate matrices used by the least-squares extension.
//!
//! Neighbor lists are kept sorted by column index and every off-diagonal
//! entry knows the position of its mirrored twin, so message-passing code can
//! walk directed edges in a fixed order and find the reverse edge in O(1).

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BuildError {
    #[error("entry ({row}, {col}) is out of bounds for a {rows}x{cols} matrix")]
    IndexOutOfBounds {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("duplicate entry for ({row}, {col})")]
    DuplicateEntry { row: usize, col: usize },
    #[error("entry ({row}, {col}) is not finite")]
    NonFiniteValue { row: usize, col: usize },
    #[error("expected a vector of length {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("rectangular matrix must have rows >= cols, got {rows}x{cols}")]
    ColsExceedRows { rows: usize, cols: usize },
}

/// One directed edge (row -> `col`) of a [`SparseSymMatrix`].
///
/// `rev` is the storage position of the mirrored edge (`col` -> row), so a
/// message sent along this edge can look up the message coming back.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub col: usize,
    pub val: f64,
    pub rev: usize,
}

/// Symmetric sparse matrix with an explicit dense diagonal.
///
/// Off-diagonal entries are stored twice, once per direction, giving each row
/// a contiguous, column-sorted neighbor slice. An entry supplied to
/// [`SparseSymMatrix::from_entries`] as `(i, j, v)` stands for both `J_ij`
/// and `J_ji`; each unordered pair may appear at most once.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    n: usize,
    diag: Vec<f64>,
    offsets: Vec<usize>,
    neighbors: Vec<Neighbor>,
}

impl SparseSymMatrix {
    /// Builds an `n x n` symmetric matrix from `(row, col, value)` entries.
    ///
    /// Diagonal entries use `row == col`; off-diagonal entries may be given
    /// in either orientation. Off-diagonal entries equal to zero are dropped
    /// rather than stored. Rows without a diagonal entry get `J_ii = 0`.
    pub fn from_entries(
        n: usize,
        entries: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self, BuildError> {
        let mut diag = vec![0.0; n];
        let mut diag_seen = vec![false; n];
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (row, col, val) in entries {
            if row >= n || col >= n {
                return Err(BuildError::IndexOutOfBounds {
                    row,
                    col,
                    rows: n,
                    cols: n,
                });
            }
            if !val.is_finite() {
                return Err(BuildError::NonFiniteValue { row, col });
            }
            if row == col {
                if diag_seen[row] {
                    return Err(BuildError::DuplicateEntry { row, col });
                }
                diag_seen[row] = true;
                diag[row] = val;
            } else {
                if rows[row].iter().any(|&(c, _)| c == col) {
                    return Err(BuildError::DuplicateEntry { row, col });
                }
                if val != 0.0 {
                    rows[row].push((col, val));
                    rows[col].push((row, val));
                }
            }
        }

        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        let mut neighbors = Vec::new();
        for row in &mut rows {
            row.sort_unstable_by_key(|&(c, _)| c);
            for &(col, val) in row.iter() {
                neighbors.push(Neighbor { col, val, rev: 0 });
            }
            offsets.push(neighbors.len());
        }

        // Second pass: locate each edge's mirror within the target row.
        for i in 0..n {
            for p in offsets[i]..offsets[i + 1] {
                let j = neighbors[p].col;
                let row_j = &neighbors[offsets[j]..offsets[j + 1]];
                let q = row_j
                    .binary_search_by_key(&i, |nb| nb.col)
                    .expect("mirrored edge must exist");
                neighbors[p].rev = offsets[j] + q;
            }
        }

        Ok(Self {
            n,
            diag,
            offsets,
            neighbors,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// Number of directed edges (twice the number of stored off-diagonal
    /// pairs).
    pub fn directed_edges(&self) -> usize {
        self.neighbors.len()
    }

    /// Column-sorted neighbor slice of row `i`.
    pub fn neighbors(&self, i: usize) -> &[Neighbor] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Storage range of row `i` inside the directed-edge arrays.
    pub fn edge_range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    /// Looks up `J_ij` (zero when the entry is absent).
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diag[i];
        }
        match self.neighbors(i).binary_search_by_key(&j, |nb| nb.col) {
            Ok(q) => self.neighbors(i)[q].val,
            Err(_) => 0.0,
        }
    }

    /// Iterates the upper triangle: all diagonal entries, then each stored
    /// pair once with `row < col`.
    pub fn upper_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let diag = self
            .diag
            .iter()
            .enumerate()
            .map(|(i, &v)| (i, i, v));
        let off = (0..self.n).flat_map(move |i| {
            self.neighbors(i)
                .iter()
                .filter(move |nb| nb.col > i)
                .map(move |nb| (i, nb.col, nb.val))
        });
        diag.chain(off)
    }

    /// Returns a copy with `add[i]` added to each diagonal entry.
    pub fn with_diag_added(&self, add: &[f64]) -> Result<Self, BuildError> {
        if add.len() != self.n {
            return Err(BuildError::LengthMismatch {
                expected: self.n,
                got: add.len(),
            });
        }
        let mut out = self.clone();
        for (d, a) in out.diag.iter_mut().zip(add) {
            *d += a;
        }
        Ok(out)
    }

    /// Rebuilds the matrix with a new diagonal and a function applied to
    /// every off-diagonal value; the sparsity structure is preserved.
    pub(crate) fn map_structure(
        &self,
        diag: Vec<f64>,
        mut f: impl FnMut(usize, usize, f64) -> f64,
    ) -> Self {
        assert_eq!(diag.len(), self.n);
        let mut out = self.clone();
        out.diag = diag;
        for i in 0..self.n {
            for p in self.offsets[i]..self.offsets[i + 1] {
                let nb = self.neighbors[p];
                out.neighbors[p].val = f(i, nb.col, nb.val);
            }
        }
        out
    }

    /// Matrix-vector product `Jx` with a fixed ascending summation order.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "vector length must match dimension");
        let mut y = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let mut acc = self.diag[i] * x[i];
            for nb in self.neighbors(i) {
                acc += nb.val * x[nb.col];
            }
            y.push(acc);
        }
        y
    }

    /// Residual norm `||Jx - h||_inf`.
    pub fn residual_inf(&self, x: &[f64], h: &[f64]) -> f64 {
        assert_eq!(h.len(), self.n, "vector length must match dimension");
        self.matvec(x)
            .iter()
            .zip(h)
            .map(|(yi, hi)| (yi - hi).abs())
            .fold(0.0, f64::max)
    }

    /// Strict row diagonal dominance: `|J_ii| > sum_{j != i} |J_ij|` for
    /// every row.
    pub fn is_diag_dominant(&self) -> bool {
        (0..self.n).all(|i| {
            let off: f64 = self.neighbors(i).iter().map(|nb| nb.val.abs()).sum();
            self.diag[i].abs() > off
        })
    }
}

/// Rectangular matrix in row-major coordinate form, `rows >= cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct RectMatrix {
    rows: usize,
    cols: usize,
    offsets: Vec<usize>,
    entries: Vec<(usize, f64)>,
}

impl RectMatrix {
    pub fn from_entries(
        rows: usize,
        cols: usize,
        entries: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self, BuildError> {
        if cols > rows {
            return Err(BuildError::ColsExceedRows { rows, cols });
        }
        let mut per_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); rows];
        for (row, col, val) in entries {
            if row >= rows || col >= cols {
                return Err(BuildError::IndexOutOfBounds {
                    row,
                    col,
                    rows,
                    cols,
                });
            }
            if !val.is_finite() {
                return Err(BuildError::NonFiniteValue { row, col });
            }
            if per_row[row].iter().any(|&(c, _)| c == col) {
                return Err(BuildError::DuplicateEntry { row, col });
            }
            if val != 0.0 {
                per_row[row].push((col, val));
            }
        }
        let mut offsets = Vec::with_capacity(rows + 1);
        offsets.push(0);
        let mut flat = Vec::new();
        for row in &mut per_row {
            row.sort_unstable_by_key(|&(c, _)| c);
            flat.extend_from_slice(row);
            offsets.push(flat.len());
        }
        Ok(Self {
            rows,
            cols,
            offsets,
            entries: flat,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Column-sorted `(col, value)` entries of row `r`.
    pub fn row(&self, r: usize) -> &[(usize, f64)] {
        &self.entries[self.offsets[r]..self.offsets[r + 1]]
    }

    /// All entries as `(row, col, value)`, row-major.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| self.row(r).iter().map(move |&(c, v)| (r, c, v)))
    }

    /// Product `Ax` (length `rows`).
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "vector length must match cols");
        (0..self.rows)
            .map(|r| self.row(r).iter().map(|&(c, v)| v * x[c]).sum())
            .collect()
    }

    /// Product `A^T y` (length `cols`).
    pub fn t_matvec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows, "vector length must match rows");
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            for &(c, v) in self.row(r) {
                out[c] += v * y[r];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain2() -> SparseSymMatrix {
        SparseSymMatrix::from_entries(2, [(0, 0, 1.0), (1, 1, 1.0), (0, 1, 0.5)]).unwrap()
    }

    #[test]
    fn builds_mirrored_edges() {
        let m = chain2();
        assert_eq!(m.n(), 2);
        assert_eq!(m.directed_edges(), 2);
        let e01 = m.neighbors(0)[0];
        let e10 = m.neighbors(1)[0];
        assert_eq!(e01.col, 1);
        assert_eq!(e10.col, 0);
        assert_eq!(e01.val, 0.5);
        assert_eq!(m.neighbors(1)[e01.rev - m.edge_range(1).start].col, 0);
        assert_eq!(e10.rev, 0);
    }

    #[test]
    fn accepts_either_triangle() {
        let upper = SparseSymMatrix::from_entries(2, [(0, 0, 2.0), (1, 1, 2.0), (0, 1, -1.0)]);
        let lower = SparseSymMatrix::from_entries(2, [(0, 0, 2.0), (1, 1, 2.0), (1, 0, -1.0)]);
        assert_eq!(upper.unwrap(), lower.unwrap());
    }

    #[test]
    fn rejects_duplicates_and_bad_values() {
        let dup = SparseSymMatrix::from_entries(2, [(0, 1, 1.0), (1, 0, 2.0)]);
        assert_eq!(
            dup.unwrap_err(),
            BuildError::DuplicateEntry { row: 1, col: 0 }
        );
        let nan = SparseSymMatrix::from_entries(1, [(0, 0, f64::NAN)]);
        assert!(matches!(nan, Err(BuildError::NonFiniteValue { .. })));
        let oob = SparseSymMatrix::from_entries(1, [(0, 1, 1.0)]);
        assert!(matches!(oob, Err(BuildError::IndexOutOfBounds { .. })));
    }

    #[test]
    fn drops_explicit_off_diagonal_zeros() {
        let m = SparseSymMatrix::from_entries(2, [(0, 0, 1.0), (1, 1, 1.0), (0, 1, 0.0)]).unwrap();
        assert_eq!(m.directed_edges(), 0);
    }

    #[test]
    fn matvec_and_residual() {
        let m = chain2();
        let y = m.matvec(&[1.0, 2.0]);
        assert_eq!(y, vec![2.0, 2.5]);
        assert_eq!(m.residual_inf(&[1.0, 2.0], &[2.0, 2.0]), 0.5);
    }

    #[test]
    fn get_looks_up_entries() {
        let m = chain2();
        assert_eq!(m.get(0, 1), 0.5);
        assert_eq!(m.get(1, 0), 0.5);
        assert_eq!(m.get(0, 0), 1.0);
    }

    #[test]
    fn diag_dominance_is_strict() {
        assert!(chain2().is_diag_dominant());
        let tie = SparseSymMatrix::from_entries(2, [(0, 0, 0.5), (1, 1, 1.0), (0, 1, 0.5)]).unwrap();
        assert!(!tie.is_diag_dominant());
        let cycle = SparseSymMatrix::from_entries(
            3,
            [
                (0, 0, 1.0),
                (1, 1, 1.0),
                (2, 2, 1.0),
                (0, 1, 0.6),
                (0, 2, 0.6),
                (1, 2, 0.6),
            ],
        )
        .unwrap();
        assert!(!cycle.is_diag_dominant());
    }

    #[test]
    fn with_diag_added_shifts_only_diagonal() {
        let m = chain2().with_diag_added(&[0.5, 1.0]).unwrap();
        assert_eq!(m.diag(), &[1.5, 2.0]);
        assert_eq!(m.get(0, 1), 0.5);
    }

    #[test]
    fn rect_products() {
        // [[1,0],[0,1],[1,1]]
        let a = RectMatrix::from_entries(
            3,
            2,
            [(0, 0, 1.0), (1, 1, 1.0), (2, 0, 1.0), (2, 1, 1.0)],
        )
        .unwrap();
        assert_eq!(a.matvec(&[2.0, 3.0]), vec![2.0, 3.0, 5.0]);
        assert_eq!(a.t_matvec(&[1.0, 1.0, 2.0]), vec![3.0, 3.0]);
    }

    #[test]
    fn rect_rejects_wide_shapes() {
        let wide = RectMatrix::from_entries(2, 3, []);
        assert_eq!(
            wide.unwrap_err(),
            BuildError::ColsExceedRows { rows: 2, cols: 3 }
        );
    }
}
