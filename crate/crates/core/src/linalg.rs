//! Small dense linear algebra over any [`Scalar`].
//!
//! Everything is elimination-based so the rational backend stays exact:
//! no square roots, no iterative decompositions. Rank decisions for floats use
//! a threshold relative to the largest entry of the matrix being reduced.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::scalar::{dot, Scalar};

#[derive(Clone, PartialEq)]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> fmt::Debug for Matrix<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<Vec<String>> = (0..self.rows)
            .map(|i| self.row(i).iter().map(Scalar::render).collect())
            .collect();
        write!(f, "Matrix{rows:?}")
    }
}

impl<S> Index<(usize, usize)> for Matrix<S> {
    type Output = S;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &S {
        &self.data[i * self.cols + j]
    }
}

impl<S> IndexMut<(usize, usize)> for Matrix<S> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        &mut self.data[i * self.cols + j]
    }
}

impl<S: Scalar> Matrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![S::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Builds a matrix from row vectors. `cols` is needed to express `k x 0` shapes.
    pub fn from_rows(rows: &[Vec<S>], cols: usize) -> Self {
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Matrix { rows: rows.len(), cols, data: rows.iter().flatten().cloned().collect() }
    }

    pub fn diag(entries: &[S]) -> Self {
        let mut m = Self::zeros(entries.len(), entries.len());
        for (i, e) in entries.iter().enumerate() {
            m[(i, i)] = e.clone();
        }
        m
    }

    pub fn column(v: &[S]) -> Self {
        Matrix { rows: v.len(), cols: 1, data: v.to_vec() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<S> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<S>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].clone())
    }

    pub fn mul(&self, rhs: &Matrix<S>) -> Matrix<S> {
        assert_eq!(self.cols, rhs.rows, "shape mismatch in matrix product");
        Self::from_fn(self.rows, rhs.cols, |i, j| {
            (0..self.cols).fold(S::zero(), |acc, k| acc + self[(i, k)].clone() * rhs[(k, j)].clone())
        })
    }

    pub fn mul_vec(&self, v: &[S]) -> Vec<S> {
        assert_eq!(self.cols, v.len(), "shape mismatch in matrix-vector product");
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    pub fn add(&self, rhs: &Matrix<S>) -> Matrix<S> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a.clone() + b.clone()).collect(),
        }
    }

    pub fn sub(&self, rhs: &Matrix<S>) -> Matrix<S> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a.clone() - b.clone()).collect(),
        }
    }

    pub fn scale(&self, c: &S) -> Matrix<S> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a.clone() * c.clone()).collect(),
        }
    }

    /// Largest absolute entry (zero for empty matrices).
    pub fn max_abs(&self) -> S {
        self.data.iter().map(|x| x.abs()).fold(S::zero(), |m, x| if x > m { x } else { m })
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Scalar::near_zero)
    }

    pub fn approx_eq(&self, other: &Matrix<S>) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self.data.iter().zip(&other.data).all(|(a, b)| a.approx_eq(b))
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (i + 1..self.cols).all(|j| self[(i, j)].approx_eq(&self[(j, i)])))
    }

    /// Quadratic form `x^T A y`.
    pub fn bilinear(&self, x: &[S], y: &[S]) -> S {
        dot(x, &self.mul_vec(y))
    }

    /// Reduced row echelon form; returns the reduced matrix and its pivot columns.
    pub fn rref(&self) -> (Matrix<S>, Vec<usize>) {
        let mut m = self.clone();
        let scale = self.max_abs();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..m.cols {
            if r == m.rows {
                break;
            }
            let Some(p) = pick_pivot(&m, r, c, &scale) else { continue };
            m.swap_rows(r, p);
            let inv = S::one() / m[(r, c)].clone();
            for j in 0..m.cols {
                m[(r, j)] = m[(r, j)].clone() * inv.clone();
            }
            for i in 0..m.rows {
                if i != r && !m[(i, c)].is_zero() {
                    let f = m[(i, c)].clone();
                    for j in 0..m.cols {
                        let v = m[(r, j)].clone() * f.clone();
                        m[(i, j)] = m[(i, j)].clone() - v;
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        (m, pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a != b {
            for j in 0..self.cols {
                self.data.swap(a * self.cols + j, b * self.cols + j);
            }
        }
    }

    /// Indices of a maximal linearly independent set of columns.
    pub fn column_basis(&self) -> Vec<usize> {
        self.rref().1
    }
}

fn pick_pivot<S: Scalar>(m: &Matrix<S>, from: usize, col: usize, scale: &S) -> Option<usize> {
    if S::EXACT {
        (from..m.rows).find(|&i| !m[(i, col)].is_zero())
    } else {
        let best = (from..m.rows).max_by(|&a, &b| {
            m[(a, col)].abs().partial_cmp(&m[(b, col)].abs()).unwrap_or(std::cmp::Ordering::Equal)
        })?;
        (!m[(best, col)].near_zero_rel(scale)).then_some(best)
    }
}

/// Any solution `x` of `A x = b`, free variables set to zero; `None` if inconsistent.
pub fn solve_any<S: Scalar>(a: &Matrix<S>, b: &[S]) -> Option<Vec<S>> {
    assert_eq!(a.rows(), b.len());
    let aug = Matrix::from_fn(a.rows(), a.cols() + 1, |i, j| {
        if j < a.cols() {
            a[(i, j)].clone()
        } else {
            b[i].clone()
        }
    });
    let (r, pivots) = aug.rref();
    if pivots.last() == Some(&a.cols()) {
        return None;
    }
    let mut x = vec![S::zero(); a.cols()];
    for (row, &c) in pivots.iter().enumerate() {
        x[c] = r[(row, a.cols())].clone();
    }
    Some(x)
}

/// Orthogonal projection of `v` onto the column space of `a`.
pub fn project_onto_columns<S: Scalar>(a: &Matrix<S>, v: &[S]) -> Vec<S> {
    if a.rank() == a.rows() {
        return v.to_vec();
    }
    let at = a.transpose();
    let gram = at.mul(a);
    // Normal equations are always consistent; a float failure means the
    // threshold misjudged rank, in which case the projection is taken as zero.
    let Some(mut beta) = solve_any(&gram, &at.mul_vec(v)) else { return vec![S::zero(); a.rows()] };
    if !S::EXACT {
        let r: Vec<S> = v.iter().zip(a.mul_vec(&beta)).map(|(x, y)| x.clone() - y).collect();
        if let Some(db) = solve_any(&gram, &at.mul_vec(&r)) {
            beta = beta.into_iter().zip(db).map(|(x, y)| x + y).collect();
        }
    }
    a.mul_vec(&beta)
}

/// Result of [`min_norm_solve`] when `b` is outside the column space.
#[derive(Debug, Clone, PartialEq)]
pub struct Inconsistent<S> {
    /// `b` minus its projection onto the column space.
    pub residual: Vec<S>,
}

/// Minimum-Euclidean-norm solution of `A x = b`.
///
/// The solution lies in the row space of `A`. When `b` is not in the column
/// space the orthogonal residual is returned instead.
pub fn min_norm_solve<S: Scalar>(a: &Matrix<S>, b: &[S]) -> Result<Vec<S>, Inconsistent<S>> {
    let projected = project_onto_columns(a, b);
    let residual: Vec<S> = b.iter().zip(&projected).map(|(x, y)| x.clone() - y.clone()).collect();
    let scale = a.max_abs();
    if !residual.iter().all(|r| r.near_zero_rel(&scale)) {
        return Err(Inconsistent { residual });
    }
    if a.cols() == 0 {
        return Ok(Vec::new());
    }
    if a.rows() == a.cols() && a.rank() == a.cols() {
        return solve_any(a, b).ok_or(Inconsistent { residual });
    }
    let mut x = row_space_solve(a, &projected).ok_or_else(|| Inconsistent { residual: residual.clone() })?;
    if !S::EXACT {
        // Both normal-equation steps square the condition number; a couple of
        // refinement passes recover the accuracy lost in floating point.
        for _ in 0..2 {
            let r: Vec<S> = projected.iter().zip(a.mul_vec(&x)).map(|(p, q)| p.clone() - q).collect();
            if r.iter().all(|v| v.is_zero()) {
                break;
            }
            let Some(dx) = row_space_solve(a, &project_onto_columns(a, &r)) else { break };
            x = x.into_iter().zip(dx).map(|(u, v)| u + v).collect();
        }
    }
    Ok(x)
}

/// A solution of `A x = b` in the row space of `A`, for `b` in the column space.
fn row_space_solve<S: Scalar>(a: &Matrix<S>, b: &[S]) -> Option<Vec<S>> {
    let x0 = solve_any(a, b)?;
    // x = A^T alpha with (A A^T) alpha = A x0.
    let aat = a.mul(&a.transpose());
    let alpha = solve_any(&aat, &a.mul_vec(&x0))?;
    Some(a.transpose().mul_vec(&alpha))
}

/// Positive-semidefiniteness test by symmetric elimination with diagonal pivoting.
///
/// Returns `false` for non-square or non-symmetric input.
pub fn is_psd<S: Scalar>(a: &Matrix<S>) -> bool {
    if !a.is_symmetric() {
        return false;
    }
    let n = a.rows();
    let scale = a.max_abs();
    let mut m = a.clone();
    let mut active: Vec<usize> = (0..n).collect();
    while !active.is_empty() {
        // Pick the largest remaining diagonal entry.
        let (pos, &k) = active
            .iter()
            .enumerate()
            .max_by(|(_, &x), (_, &y)| m[(x, x)].partial_cmp(&m[(y, y)]).unwrap_or(std::cmp::Ordering::Equal))
            .expect("non-empty");
        let pivot = m[(k, k)].clone();
        if pivot.near_zero_rel(&scale) {
            // All remaining diagonals are <= ~0: the remaining block must vanish.
            return active.iter().all(|&i| {
                !m[(i, i)].is_negative() || m[(i, i)].near_zero_rel(&scale)
            }) && active
                .iter()
                .all(|&i| active.iter().all(|&j| m[(i, j)].near_zero_rel(&scale)));
        }
        if pivot.is_negative() {
            return false;
        }
        active.swap_remove(pos);
        for &i in &active {
            let f = m[(i, k)].clone() / pivot.clone();
            if f.is_zero() {
                continue;
            }
            for &j in &active {
                let v = f.clone() * m[(k, j)].clone();
                m[(i, j)] = m[(i, j)].clone() - v;
            }
        }
    }
    true
}

/// Minimum-norm solution of `G x = b` for symmetric `G`; lies in the range of `G`.
pub fn pinv_apply<S: Scalar>(g: &Matrix<S>, b: &[S]) -> Result<Vec<S>, Inconsistent<S>> {
    min_norm_solve(g, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from_frac(n, d)
    }

    fn qm(rows: &[&[i64]]) -> Matrix<Rational> {
        let cols = rows.first().map_or(0, |r| r.len());
        Matrix::from_rows(&rows.iter().map(|r| r.iter().map(|&x| q(x, 1)).collect()).collect::<Vec<_>>(), cols)
    }

    #[test]
    fn rank_of_dependent_rows() {
        let m = qm(&[&[1, 2, 3], &[2, 4, 6], &[1, 0, 1]]);
        assert_eq!(m.rank(), 2);
        assert_eq!(Matrix::<Rational>::zeros(3, 2).rank(), 0);
    }

    #[test]
    fn solve_any_detects_inconsistency() {
        let m = qm(&[&[1, 1], &[1, 1]]);
        assert!(solve_any(&m, &[q(1, 1), q(2, 1)]).is_none());
        let x = solve_any(&m, &[q(2, 1), q(2, 1)]).unwrap();
        assert_eq!(m.mul_vec(&x), vec![q(2, 1), q(2, 1)]);
    }

    #[test]
    fn min_norm_picks_row_space_solution() {
        // x + y = 2 -> minimum norm (1, 1)
        let m = qm(&[&[1, 1]]);
        assert_eq!(min_norm_solve(&m, &[q(2, 1)]).unwrap(), vec![q(1, 1), q(1, 1)]);
    }

    #[test]
    fn min_norm_reports_residual() {
        let m = qm(&[&[1], &[1]]);
        let err = min_norm_solve(&m, &[q(1, 1), q(0, 1)]).unwrap_err();
        assert_eq!(err.residual, vec![q(1, 2), q(-1, 2)]);
    }

    #[test]
    fn projection_onto_axis() {
        let g = Matrix::diag(&[q(1, 1), q(0, 1)]);
        assert_eq!(project_onto_columns(&g, &[q(3, 1), q(5, 1)]), vec![q(3, 1), q(0, 1)]);
    }

    #[test]
    fn psd_classification() {
        assert!(is_psd(&qm(&[&[2, 1], &[1, 2]])));
        assert!(is_psd(&qm(&[&[1, 1], &[1, 1]])));
        assert!(is_psd(&qm(&[&[0, 0], &[0, 0]])));
        assert!(!is_psd(&qm(&[&[1, 2], &[2, 1]])));
        assert!(!is_psd(&qm(&[&[0, 1], &[1, 0]])));
        assert!(!is_psd(&qm(&[&[-1, 0], &[0, 1]])));
        assert!(!is_psd(&qm(&[&[1, 2], &[0, 1]])));
        assert!(is_psd(&Matrix::<Rational>::zeros(0, 0)));
    }

    #[test]
    fn float_psd_tolerates_roundoff() {
        let v = [0.1f64, 0.2, 0.3];
        let g = Matrix::from_fn(3, 3, |i, j| v[i] * v[j]);
        assert!(is_psd(&g));
        assert_eq!(g.rank(), 1);
    }
}
