//! Dense complex matrices and a row-pivoted LU factorization that is built
//! once and reused for many right-hand sides.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::par;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.cols);
        par::map_range(self.rows, |i| dot(self.row(i), x))
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub(crate) fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    // split accumulation into real arithmetic so the loop vectorizes
    let (mut re, mut im) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re - x.im * y.im;
        im += x.re * y.im + x.im * y.re;
    }
    Complex64::new(re, im)
}

/// `P·A = L·U` with unit lower-triangular `L`, stored packed.
#[derive(Debug, Clone)]
pub struct LuFactors {
    n: usize,
    lu: Vec<Complex64>,
    perm: Vec<usize>,
}

impl LuFactors {
    /// Factorizes `a` with partial (row) pivoting. A pivot magnitude below
    /// `pivot_floor` aborts with [`Error::SingularResolvent`].
    pub fn factor(a: DenseMatrix, pivot_floor: f64) -> Result<Self> {
        assert_eq!(a.rows, a.cols, "LU needs a square matrix");
        let n = a.rows;
        let mut lu = a.data;
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pmag) = (k..n)
                .map(|i| (i, lu[i * n + k].norm()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pmag >= pivot_floor) {
                return Err(Error::SingularResolvent { pivot: pmag.max(0.0), step: k });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let (head, tail) = lu.split_at_mut((k + 1) * n);
            let pivot_row = &head[k * n..];
            let inv_pivot = 1.0 / pivot_row[k];
            let upper = &pivot_row[k + 1..];
            par::for_each_chunk_mut(tail, n, |_, row| {
                let l = row[k] * inv_pivot;
                row[k] = l;
                if l.re == 0.0 && l.im == 0.0 {
                    return;
                }
                for (r, u) in row[k + 1..].iter_mut().zip(upper) {
                    r.re -= l.re * u.re - l.im * u.im;
                    r.im -= l.re * u.im + l.im * u.re;
                }
            });
        }
        Ok(Self { n, lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A·x = b`.
    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut x: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s = dot(&self.lu[i * n..i * n + i], &x[..i]);
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n..(i + 1) * n];
            let s = dot(&row[i + 1..], &x[i + 1..]);
            x[i] = (x[i] - s) / row[i];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(n: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..n * n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        DenseMatrix::from_rows(n, n, data)
    }

    #[test]
    fn solves_random_system() {
        let a = random_matrix(40, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<Complex64> = (0..40).map(|_| Complex64::new(rng.gen(), rng.gen())).collect();
        let b = a.matvec(&x);
        let lu = LuFactors::factor(a, 1e-14).unwrap();
        let y = lu.solve(&b);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).norm() < 1e-10);
        }
    }

    #[test]
    fn needs_pivoting() {
        let one = Complex64::new(1.0, 0.0);
        let a = DenseMatrix::from_rows(2, 2, vec![ZERO, one, one, ZERO]);
        let lu = LuFactors::factor(a, 1e-14).unwrap();
        let x = lu.solve(&[Complex64::new(3.0, 0.0), Complex64::new(5.0, 0.0)]);
        assert_eq!(x, vec![Complex64::new(5.0, 0.0), Complex64::new(3.0, 0.0)]);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let one = Complex64::new(1.0, 0.0);
        let a = DenseMatrix::from_rows(2, 2, vec![one, one, one, one]);
        assert!(matches!(LuFactors::factor(a, 1e-14), Err(Error::SingularResolvent { step: 1, .. })));
    }
}
