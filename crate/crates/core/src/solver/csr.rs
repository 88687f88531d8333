//! Compressed sparse row matrices.

use rayon::prelude::*;

use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    /// Builds from `(row, col, value)` triplets; duplicates are summed in input order.
    pub fn from_triplets(nrows: usize, ncols: usize, mut trip: Vec<(usize, usize, T)>) -> Self {
        trip.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(trip.len());
        let mut values: Vec<T> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in trip {
            debug_assert!(r < nrows && c < ncols);
            if last == Some((r, c)) {
                let k = values.len() - 1;
                values[k] = values[k] + v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        Self { nrows, ncols, indptr, indices, values }
    }

    fn from_rows(nrows: usize, ncols: usize, rows: Vec<Vec<(usize, T)>>) -> Self {
        let mut indptr = Vec::with_capacity(nrows + 1);
        indptr.push(0);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        for row in rows {
            for (c, v) in row {
                indices.push(c);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Self { nrows, ncols, indptr, indices, values }
    }

    pub fn identity(n: usize, s: T) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, s)).collect())
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

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[T]) {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let (cols, vals) = self.row(r);
        cols.binary_search(&c).map(|k| vals[k]).unwrap_or(T::zero())
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`, rows in parallel.
    pub fn matvec(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        y.par_iter_mut().enumerate().with_min_len(1024).for_each(|(r, yr)| {
            let (cols, vals) = self.row(r);
            let mut acc = T::zero();
            for (&c, &v) in cols.iter().zip(vals) {
                acc = acc + v * x[c];
            }
            *yr = acc;
        });
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.nrows];
        self.matvec(x, &mut y);
        y
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.ncols {
            counts[c + 1] += counts[c];
        }
        let mut next = counts.clone();
        let mut indices = vec![0usize; self.nnz()];
        let mut values = vec![T::zero(); self.nnz()];
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let k = next[c];
                indices[k] = r;
                values[k] = v;
                next[c] += 1;
            }
        }
        Self { nrows: self.ncols, ncols: self.nrows, indptr: counts, indices, values }
    }

    /// Row-by-row (Gustavson) product `A·B`.
    pub fn matmul(&self, b: &Self) -> Self {
        assert_eq!(self.ncols, b.nrows);
        let rows: Vec<Vec<(usize, T)>> = (0..self.nrows)
            .into_par_iter()
            .with_min_len(256)
            .map(|r| {
                let mut acc: Vec<(usize, T)> = Vec::new();
                let (ac, av) = self.row(r);
                for (&k, &a) in ac.iter().zip(av) {
                    let (bc, bv) = b.row(k);
                    acc.extend(bc.iter().zip(bv).map(|(&c, &v)| (c, a * v)));
                }
                acc.sort_by_key(|&(c, _)| c);
                let mut out: Vec<(usize, T)> = Vec::with_capacity(acc.len());
                for (c, v) in acc {
                    match out.last_mut() {
                        Some((lc, lv)) if *lc == c => *lv = *lv + v,
                        _ => out.push((c, v)),
                    }
                }
                out
            })
            .collect();
        Self::from_rows(self.nrows, b.ncols, rows)
    }

    /// `A + B` for matrices of equal shape.
    pub fn add(&self, b: &Self) -> Self {
        assert_eq!((self.nrows, self.ncols), (b.nrows, b.ncols));
        let rows = (0..self.nrows)
            .map(|r| {
                let (ac, av) = self.row(r);
                let (bc, bv) = b.row(r);
                let mut out = Vec::with_capacity(ac.len() + bc.len());
                let (mut i, mut j) = (0, 0);
                while i < ac.len() || j < bc.len() {
                    if j == bc.len() || (i < ac.len() && ac[i] < bc[j]) {
                        out.push((ac[i], av[i]));
                        i += 1;
                    } else if i == ac.len() || bc[j] < ac[i] {
                        out.push((bc[j], bv[j]));
                        j += 1;
                    } else {
                        out.push((ac[i], av[i] + bv[j]));
                        i += 1;
                        j += 1;
                    }
                }
                out
            })
            .collect();
        Self::from_rows(self.nrows, self.ncols, rows)
    }

    /// Submatrix on the given (sorted) row and column index sets.
    pub fn restrict(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut map = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            map[c] = k;
        }
        let out = rows
            .iter()
            .map(|&r| {
                let (rc, rv) = self.row(r);
                rc.iter().zip(rv).filter(|(&c, _)| map[c] != usize::MAX).map(|(&c, &v)| (map[c], v)).collect()
            })
            .collect();
        Self::from_rows(rows.len(), cols.len(), out)
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> T {
        (0..self.nrows)
            .map(|r| self.row(r).1.iter().map(|&v| num_traits::Float::abs(v)).sum::<T>())
            .fold(T::zero(), T::max)
    }

    /// `‖A − Aᵀ‖_∞`.
    pub fn asymmetry(&self) -> T {
        let t = self.transpose();
        let neg = Self { values: t.values.iter().map(|&v| -v).collect(), ..t };
        self.add(&neg).norm_inf()
    }
}
