//! Small dense linear algebra for the feasibility engine.
//!
//! Everything here works on row-major [`Mat`] values and plain `f64` slices.
//! Rank decisions use the singular values of the matrix with a tolerance
//! relative to the largest one, so results do not change when the whole
//! system is rescaled.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Default relative tolerance for rank decisions.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Dense row-major real matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data. Panics if the length does not
    /// match `rows * cols`.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "entry count must equal rows*cols");
        Self { rows, cols, data }
    }

    /// Stacks equally long rows. An empty slice yields a `0 x cols` matrix.
    pub fn from_rows(rows: &[Vec<f64>], cols: usize) -> Self {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "row length mismatch");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<f64>], rows: usize) -> Self {
        let mut m = Self::zeros(rows, columns.len());
        for (j, c) in columns.iter().enumerate() {
            assert_eq!(c.len(), rows, "column length mismatch");
            for (i, v) in c.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_vectors(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "dimension mismatch in mul_vec");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn mul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "dimension mismatch in mul");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    /// Vertical concatenation. Column counts must agree.
    pub fn vstack(&self, below: &Mat) -> Mat {
        assert_eq!(self.cols, below.cols, "column mismatch in vstack");
        let mut data = self.data.clone();
        data.extend_from_slice(&below.data);
        Mat {
            rows: self.rows + below.rows,
            cols: self.cols,
            data,
        }
    }

    /// Appends `col` as a new last column.
    pub fn with_column(&self, col: &[f64]) -> Mat {
        assert_eq!(col.len(), self.rows, "row mismatch in with_column");
        let mut out = Mat::zeros(self.rows, self.cols + 1);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] = self[(i, j)];
            }
            out[(i, self.cols)] = col[i];
        }
        out
    }

    /// Keeps only the listed columns, in the listed order.
    pub fn select_columns(&self, columns: &[usize]) -> Mat {
        let mut out = Mat::zeros(self.rows, columns.len());
        for i in 0..self.rows {
            for (k, &j) in columns.iter().enumerate() {
                out[(i, k)] = self[(i, j)];
            }
        }
        out
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Display for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            let cells: Vec<String> = self.row(i).iter().map(|v| format!("{v:>12.6}")).collect();
            writeln!(f, "[{}]", cells.join(" "))?;
        }
        Ok(())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// `a + s * b`, elementwise.
pub fn axpy(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

/// The linear system has no solution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Inconsistent {
    pub rank: usize,
    pub augmented_rank: usize,
}

impl fmt::Display for Inconsistent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "inconsistent linear system (rank {} < augmented rank {})",
            self.rank, self.augmented_rank
        )
    }
}

impl std::error::Error for Inconsistent {}

/// Full singular value decomposition data needed for rank, pseudo-inverse
/// and kernel computations: `a = U diag(s) Vᵀ`.
///
/// Singular values are sorted in decreasing order. `v` always holds all `n`
/// right singular vectors, including those spanning the kernel.
#[derive(Clone, Debug)]
pub struct Svd {
    pub singular_values: Vec<f64>,
    /// Left singular vectors paired with `singular_values`, each of length `m`.
    pub u: Vec<Vec<f64>>,
    /// All `n` right singular vectors; the first `singular_values.len()`
    /// are paired, any remaining ones span part of the kernel.
    pub v: Vec<Vec<f64>>,
    rows: usize,
}

impl Svd {
    pub fn new(a: &Mat) -> Self {
        let (m, n) = (a.rows(), a.cols());
        if n == 0 {
            return Self {
                singular_values: Vec::new(),
                u: Vec::new(),
                v: Vec::new(),
                rows: m,
            };
        }
        // Wide matrices are padded with zero rows so the factorization
        // returns a complete right basis.
        let padded_rows = m.max(n);
        let mut dm = DMatrix::<f64>::zeros(padded_rows, n);
        if m > 0 {
            dm.view_mut((0, 0), (m, n)).copy_from(&a.to_nalgebra());
        }
        let svd = dm.svd(true, true);
        let u_full = svd.u.expect("left vectors requested");
        let vt = svd.v_t.expect("right vectors requested");
        let k = svd.singular_values.len();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&i, &j| {
            svd.singular_values[j]
                .partial_cmp(&svd.singular_values[i])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(i.cmp(&j))
        });
        let paired = k.min(m);
        let mut singular_values = Vec::with_capacity(paired);
        let mut u = Vec::with_capacity(paired);
        let mut v = Vec::with_capacity(n);
        for (rank_pos, &idx) in order.iter().enumerate() {
            let right: Vec<f64> = (0..n).map(|c| vt[(idx, c)]).collect();
            if rank_pos < paired {
                singular_values.push(svd.singular_values[idx]);
                u.push((0..m).map(|r| u_full[(r, idx)]).collect());
            }
            v.push(right);
        }
        Self {
            singular_values,
            u,
            v,
            rows: m,
        }
    }

    /// Absolute cut-off below which a singular value counts as zero.
    pub fn threshold(&self, tol: f64) -> f64 {
        let largest = self.singular_values.first().copied().unwrap_or(0.0);
        let scale = if largest > 0.0 { largest } else { 1.0 };
        tol * scale
    }

    pub fn rank(&self, tol: f64) -> usize {
        let thr = self.threshold(tol);
        self.singular_values.iter().filter(|&&s| s > thr).count()
    }

    /// Minimum-norm least-squares solution using the first `rank` triplets.
    pub fn pseudo_solve(&self, b: &[f64], rank: usize) -> Vec<f64> {
        assert_eq!(b.len(), self.rows, "rhs length mismatch");
        let n = self.v.len();
        let mut x = vec![0.0; n];
        for k in 0..rank {
            let coef = dot(&self.u[k], b) / self.singular_values[k];
            for (xi, vi) in x.iter_mut().zip(&self.v[k]) {
                *xi += coef * vi;
            }
        }
        x
    }

    /// Orthonormal kernel vectors beyond the first `rank` right vectors.
    pub fn kernel(&self, rank: usize) -> Vec<Vec<f64>> {
        self.v[rank..].to_vec()
    }
}

/// Numerical rank of `a` with tolerance relative to its largest singular value.
pub fn rank_of(a: &Mat, tol: f64) -> usize {
    assert!(tol > 0.0, "tolerance must be positive");
    if a.rows() == 0 || a.cols() == 0 {
        return 0;
    }
    Svd::new(a).rank(tol)
}

/// Minimum-norm least-squares solution, without any consistency check.
pub fn least_squares(a: &Mat, b: &[f64], tol: f64) -> Vec<f64> {
    assert_eq!(a.rows(), b.len(), "rhs length mismatch");
    if a.cols() == 0 {
        return Vec::new();
    }
    let svd = Svd::new(a);
    let r = svd.rank(tol);
    svd.pseudo_solve(b, r)
}

/// Minimum-norm solution of `a x = b`, or [`Inconsistent`] when
/// `rank(a) < rank([a | b])`.
pub fn solve_particular(a: &Mat, b: &[f64], tol: f64) -> Result<Vec<f64>, Inconsistent> {
    assert_eq!(a.rows(), b.len(), "rhs length mismatch");
    assert!(tol > 0.0, "tolerance must be positive");
    if a.rows() == 0 {
        return Ok(vec![0.0; a.cols()]);
    }
    let svd = Svd::new(a);
    let rank = svd.rank(tol);
    let augmented_rank = rank_of(&a.with_column(b), tol);
    if augmented_rank > rank {
        return Err(Inconsistent {
            rank,
            augmented_rank,
        });
    }
    Ok(svd.pseudo_solve(b, rank))
}

/// Orthonormal basis of the kernel of `a`; `a.cols() - rank_of(a)` vectors.
pub fn null_basis(a: &Mat, tol: f64) -> Vec<Vec<f64>> {
    assert!(tol > 0.0, "tolerance must be positive");
    let n = a.cols();
    if a.rows() == 0 {
        return (0..n).map(|k| unit(n, k)).collect();
    }
    let svd = Svd::new(a);
    let r = svd.rank(tol);
    svd.kernel(r)
}

pub fn unit(n: usize, k: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[k] = 1.0;
    e
}

/// Rotates an orthonormal `basis` within its span so that it is as close
/// as possible (Frobenius norm) to `reference`, the orthogonal Procrustes
/// solution. Both sets must have the same count and length.
pub fn align_basis(basis: &[Vec<f64>], reference: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = basis.len();
    assert_eq!(k, reference.len(), "basis sizes differ");
    if k == 0 {
        return Vec::new();
    }
    let mut cross = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            cross[(i, j)] = dot(&basis[i], &reference[j]);
        }
    }
    let svd = cross.svd(true, true);
    let rot = svd.u.expect("requested") * svd.v_t.expect("requested");
    let n = basis[0].len();
    (0..k)
        .map(|j| {
            let mut out = vec![0.0; n];
            for (i, b) in basis.iter().enumerate() {
                let c = rot[(i, j)];
                for (o, v) in out.iter_mut().zip(b) {
                    *o += c * v;
                }
            }
            out
        })
        .collect()
}
