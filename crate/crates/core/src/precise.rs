//! Small dense double-double linear algebra.
//!
//! The Wronskian block matrices have condition numbers growing like `10^{3κ}`, so
//! determinants, solves and inverses are carried out in `TwoFloat` (about 32 digits).

use std::ops::{Index, IndexMut};

use nalgebra::{DMatrix, DVector};
use twofloat::TwoFloat;

use crate::error::{Error, Result};

pub type Dd = TwoFloat;

pub fn dd(x: f64) -> Dd {
    TwoFloat::from(x)
}

pub fn to_f64(x: Dd) -> f64 {
    x.hi() + x.lo()
}

/// `a / b` to double-double accuracy.
///
/// `TwoFloat`'s own `TwoFloat / TwoFloat` forms its reciprocal residual without an fma and
/// is only `f64`-accurate, so quotients are refined here by two correction steps that use
/// the exact `TwoFloat / f64` and `TwoFloat * TwoFloat` kernels.
pub fn div(a: Dd, b: Dd) -> Dd {
    let q1 = a / b.hi();
    let r1 = a - q1 * b;
    let q2 = r1 / b.hi();
    let r2 = r1 - q2 * b;
    let q3 = r2 / b.hi();
    q1 + q2 + q3
}

/// `x^y` for `x > 0`.
pub fn powf(x: Dd, y: Dd) -> Dd {
    if x == dd(1.0) {
        return dd(1.0);
    }
    x.powf(y)
}

/// Row-major dense matrix of double-doubles.
#[derive(Clone, Debug, PartialEq)]
pub struct DdMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Dd>,
}

impl Index<(usize, usize)> for DdMatrix {
    type Output = Dd;
    fn index(&self, (i, j): (usize, usize)) -> &Dd {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DdMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Dd {
        &mut self.data[i * self.cols + j]
    }
}

impl DdMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![dd(0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = dd(1.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Dd) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_f64(m: &DMatrix<f64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| dd(m[(i, j)]))
    }

    pub fn column_from_f64(v: &DVector<f64>) -> Self {
        Self::from_fn(v.len(), 1, |i, _| dd(v[i]))
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| to_f64(self[(i, j)]))
    }

    /// First column rounded to `f64`.
    pub fn column_to_f64(&self) -> DVector<f64> {
        DVector::from_fn(self.rows, |i, _| to_f64(self[(i, 0)]))
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }
    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == dd(0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)] + other[(i, j)])
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)] - other[(i, j)])
    }

    pub fn scale(&self, c: Dd) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)] * c)
    }

    /// Copy `block` into `self` with its top-left corner at `(r, c)`.
    pub fn set_block(&mut self, r: usize, c: usize, block: &Self) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r + i, c + j)] = block[(i, j)];
            }
        }
    }

    pub fn columns(&self, start: usize, n: usize) -> Self {
        Self::from_fn(self.rows, n, |i, j| self[(i, start + j)])
    }

    pub fn max_abs(&self) -> f64 {
        self.data
            .iter()
            .map(|x| to_f64(*x).abs())
            .fold(0.0, f64::max)
    }
}

/// LU factorisation with partial pivoting, `P A = L U`.
#[derive(Clone, Debug)]
pub struct Lu {
    lu: DdMatrix,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    pub fn new(a: &DdMatrix) -> Result<Self> {
        if a.rows != a.cols {
            return Err(Error::DimensionMismatch {
                expected: a.rows,
                got: a.cols,
            });
        }
        let n = a.rows;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for k in 0..n {
            let (p, pmax) =
                (k..n)
                    .map(|i| (i, lu[(i, k)].abs()))
                    .fold(
                        (k, dd(-1.0)),
                        |best, cur| if cur.1 > best.1 { cur } else { best },
                    );
            if pmax == dd(0.0) {
                return Err(Error::Singular(format!("zero pivot in column {k}")));
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let piv = lu[(k, k)];
            for i in k + 1..n {
                let l = div(lu[(i, k)], piv);
                lu[(i, k)] = l;
                if l == dd(0.0) {
                    continue;
                }
                for j in k + 1..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] -= l * u;
                }
            }
        }
        Ok(Self { lu, perm, sign })
    }

    pub fn det(&self) -> Dd {
        let mut d = dd(self.sign);
        for i in 0..self.lu.rows {
            d *= self.lu[(i, i)];
        }
        d
    }

    /// Solve `A X = B` for a matrix right-hand side.
    pub fn solve(&self, b: &DdMatrix) -> DdMatrix {
        let n = self.lu.rows;
        assert_eq!(b.rows, n);
        let mut x = DdMatrix::from_fn(n, b.cols, |i, j| b[(self.perm[i], j)]);
        for c in 0..b.cols {
            for i in 0..n {
                let mut acc = x[(i, c)];
                for k in 0..i {
                    acc -= self.lu[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = acc;
            }
            for i in (0..n).rev() {
                let mut acc = x[(i, c)];
                for k in i + 1..n {
                    acc -= self.lu[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = div(acc, self.lu[(i, i)]);
            }
        }
        x
    }

    pub fn inverse(&self) -> DdMatrix {
        self.solve(&DdMatrix::identity(self.lu.rows))
    }
}
