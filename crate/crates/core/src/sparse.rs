//! Compressed sparse row storage and the direct solvers built on it.
//!
//! Construction from triplets sorts entries by `(row, col)` with a stable sort
//! and sums duplicates in input order, so assembly results do not depend on
//! anything but the order in which elements are visited.

use std::fmt::Debug;
use std::io::{BufRead, Write};
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Field scalar used by the sparse containers (`f64` or `Complex64`).
pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Default
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + faer::traits::ComplexField
    + 'static
{
    fn zero() -> Self;
    fn from_real(x: f64) -> Self;
    fn norm_sqr(self) -> f64;
    fn is_finite(self) -> bool;
    fn conj(self) -> Self;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn norm_sqr(self) -> f64 {
        self * self
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    fn conj(self) -> Self {
        self
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn norm_sqr(self) -> f64 {
        Complex64::norm_sqr(&self)
    }
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![T::from_real(1.0); n])
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let n = diag.len();
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    /// Explicit zeros produced by summation are kept so that the sparsity
    /// pattern reflects the element coupling structure.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, T)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<T> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                row_ptr[r + 1] += 1;
                col_idx.push(c);
                values.push(v);
                last = Some((r, c));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn row_len(&self, r: usize) -> usize {
        self.row_ptr[r + 1] - self.row_ptr[r]
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => T::zero(),
        }
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    /// Mutable access to an existing stored entry.
    pub fn entry_mut(&mut self, r: usize, c: usize) -> Option<&mut T> {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        let k = self.col_idx[span.clone()].binary_search(&c).ok()?;
        Some(&mut self.values[span.start + k])
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = T::zero();
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yr = acc;
        }
    }

    /// `Aᵀ x` without forming the transpose.
    pub fn tr_mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![T::zero(); self.ncols];
        for (r, &xr) in x.iter().enumerate() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                y[self.col_idx[k]] += self.values[k] * xr;
            }
        }
        y
    }

    pub fn transpose(&self) -> Self {
        let trip = self.iter().map(|(r, c, v)| (c, r, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, trip)
    }

    pub fn scale(&self, alpha: T) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = alpha * *v);
        out
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> CsrMatrix<U> {
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Sparse product `self * rhs`, accumulated row by row in column order.
    pub fn matmul(&self, rhs: &CsrMatrix<T>) -> CsrMatrix<T> {
        assert_eq!(self.ncols, rhs.nrows);
        let mut trip = Vec::new();
        let mut acc = vec![T::zero(); rhs.ncols];
        let mut touched = vec![false; rhs.ncols];
        let mut cols = Vec::new();
        for r in 0..self.nrows {
            for (k, a) in self.row(r) {
                for (c, b) in rhs.row(k) {
                    if !touched[c] {
                        touched[c] = true;
                        cols.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            cols.sort_unstable();
            for &c in &cols {
                trip.push((r, c, acc[c]));
                acc[c] = T::zero();
                touched[c] = false;
            }
            cols.clear();
        }
        CsrMatrix::from_triplets(self.nrows, rhs.ncols, trip)
    }

    pub fn add(&self, rhs: &CsrMatrix<T>, alpha: T) -> CsrMatrix<T> {
        assert_eq!((self.nrows, self.ncols), (rhs.nrows, rhs.ncols));
        let trip = self
            .iter()
            .chain(rhs.iter().map(|(r, c, v)| (r, c, alpha * v)))
            .collect();
        CsrMatrix::from_triplets(self.nrows, self.ncols, trip)
    }

    /// Restriction to the given rows and columns (in the given order).
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> CsrMatrix<T> {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (new, &old) in cols.iter().enumerate() {
            col_map[old] = new;
        }
        let mut trip = Vec::new();
        for (new_r, &r) in rows.iter().enumerate() {
            for (c, v) in self.row(r) {
                if col_map[c] != usize::MAX {
                    trip.push((new_r, col_map[c], v));
                }
            }
        }
        CsrMatrix::from_triplets(rows.len(), cols.len(), trip)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `‖A − Aᵀ‖_F / ‖A‖_F` (plain transpose, no conjugation).
    pub fn symmetry_deviation(&self) -> f64 {
        let norm = self.frobenius_norm();
        if norm == 0.0 {
            return 0.0;
        }
        let diff = self.add(&self.transpose(), T::from_real(-1.0));
        diff.frobenius_norm() / norm
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn to_faer(&self) -> SparseColMat<usize, T> {
        let trip: Vec<_> = self.iter().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &trip)
            .expect("valid sparse triplets")
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

impl CsrMatrix<f64> {
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.iter() {
            m[(r, c)] += v;
        }
        m
    }

    pub fn to_complex(&self) -> CsrMatrix<Complex64> {
        self.map(|v| Complex64::new(v, 0.0))
    }

    /// Coordinate-format dump: `declat-coo <rows> <cols> <nnz>` then
    /// `row col value` per line, zero-based.
    pub fn write_coo<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "declat-coo {} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (r, c, v) in self.iter() {
            writeln!(out, "{r} {c} {v:e}")?;
        }
        Ok(())
    }

    pub fn read_coo<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let parse_err = |line: usize, message: &str| Error::Parse {
            line: line + 1,
            message: message.to_string(),
        };
        let (_, header) = lines.next().ok_or_else(|| parse_err(0, "empty input"))?;
        let header = header.map_err(|e| parse_err(0, &e.to_string()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 || fields[0] != "declat-coo" {
            return Err(parse_err(0, "expected `declat-coo <rows> <cols> <nnz>`"));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|e| parse_err(0, &e.to_string()));
        let (nrows, ncols, nnz) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
        let mut trip = Vec::with_capacity(nnz);
        for (ln, line) in lines {
            let line = line.map_err(|e| parse_err(ln, &e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(parse_err(ln, "expected `row col value`"));
            }
            let r: usize = f[0].parse().map_err(|_| parse_err(ln, "bad row"))?;
            let c: usize = f[1].parse().map_err(|_| parse_err(ln, "bad col"))?;
            let v: f64 = f[2].parse().map_err(|_| parse_err(ln, "bad value"))?;
            if r >= nrows || c >= ncols {
                return Err(parse_err(ln, "index out of range"));
            }
            trip.push((r, c, v));
        }
        if trip.len() != nnz {
            return Err(parse_err(0, "entry count does not match header"));
        }
        Ok(Self::from_triplets(nrows, ncols, trip))
    }
}

/// Sparse Cholesky factorization of a real SPD matrix.
pub struct CholeskySolver {
    n: usize,
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
}

impl CholeskySolver {
    pub fn new(a: &CsrMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Dimension("Cholesky needs a square matrix".into()));
        }
        let llt = a
            .to_faer()
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::Solve(format!("{e:?}")))?;
        Ok(Self { n: a.nrows(), llt })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut rhs = Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]);
        self.llt.solve_in_place(rhs.as_mut());
        (0..self.n).map(|i| rhs[(i, 0)]).collect()
    }
}

/// Sparse LU with partial pivoting, real or complex.
pub struct LuSolver<T: Scalar> {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, T>,
}

impl<T: Scalar> LuSolver<T> {
    pub fn new(a: &CsrMatrix<T>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Dimension("LU needs a square matrix".into()));
        }
        let lu = a.to_faer().sp_lu().map_err(|e| Error::Solve(format!("{e:?}")))?;
        Ok(Self { n: a.nrows(), lu })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut rhs = Mat::<T>::from_fn(self.n, 1, |i, _| b[i]);
        self.lu.solve_in_place(rhs.as_mut());
        (0..self.n).map(|i| rhs[(i, 0)]).collect()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates_in_order() {
        let m = CsrMatrix::from_triplets(2, 2, vec![(1, 0, 1.0), (0, 1, 2.0), (1, 0, 3.0)]);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(1, 0), 4.0);
        assert_eq!(m.get(0, 1), 2.0);
        assert_eq!(m.get(0, 0), 0.0);
    }

    #[test]
    fn matmul_matches_dense() {
        let a = CsrMatrix::from_triplets(2, 3, vec![(0, 0, 1.0), (0, 2, 2.0), (1, 1, -1.0)]);
        let b = CsrMatrix::from_triplets(3, 2, vec![(0, 1, 1.0), (1, 0, 4.0), (2, 0, 0.5)]);
        let c = a.matmul(&b);
        assert_eq!(c.to_dense(), a.to_dense() * b.to_dense());
    }

    #[test]
    fn coo_round_trip() {
        let a = CsrMatrix::from_triplets(3, 2, vec![(0, 0, 1.5), (2, 1, -0.25)]);
        let mut buf = Vec::new();
        a.write_coo(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("declat-coo 3 2 2\n"));
        let b = CsrMatrix::read_coo(buf.as_slice()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cholesky_solves_spd() {
        let a = CsrMatrix::from_triplets(
            3,
            3,
            vec![(0, 0, 4.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0), (2, 2, 2.0)],
        );
        let x = CholeskySolver::new(&a).unwrap().solve(&[1.0, 2.0, 3.0]);
        let r = a.mul_vec(&x);
        for (ri, bi) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert!((ri - bi).abs() < 1e-14);
        }
    }

    #[test]
    fn symmetry_deviation_flags_asymmetry() {
        let s = CsrMatrix::from_triplets(2, 2, vec![(0, 1, 1.0), (1, 0, 1.0)]);
        assert_eq!(s.symmetry_deviation(), 0.0);
        let a = CsrMatrix::from_triplets(2, 2, vec![(0, 1, 1.0), (1, 0, 0.5)]);
        assert!(a.symmetry_deviation() > 0.1);
    }
}
