//! Dense Gaussian elimination with partial pivoting.

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("matrix is numerically singular at column {column} (pivot {pivot:e})")]
pub struct Singular {
    pub column: usize,
    pub pivot: f64,
}

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<S> {
    n: usize,
    data: Vec<S>,
}

impl<S: Scalar> Dense<S> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![S::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b`, consuming the matrix.
    pub fn solve(mut self, mut b: Vec<S>) -> Result<Vec<S>, Singular> {
        let n = self.n;
        assert_eq!(b.len(), n, "right-hand side length");
        let scale = self
            .data
            .iter()
            .fold(S::zero(), |m, &x| m.max(x.abs()))
            .max(S::min_positive_value());
        let floor = scale * S::epsilon() * S::lit(n.max(1) as f64);

        for col in 0..n {
            let (piv, pmax) = (col..n)
                .map(|r| (r, self[(r, col)].abs()))
                .fold((col, S::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmax <= floor {
                return Err(Singular {
                    column: col,
                    pivot: pmax.as_f64(),
                });
            }
            if piv != col {
                for k in 0..n {
                    self.data.swap(piv * n + k, col * n + k);
                }
                b.swap(piv, col);
            }
            let d = self[(col, col)];
            for r in col + 1..n {
                let f = self[(r, col)] / d;
                if f == S::zero() {
                    continue;
                }
                for k in col..n {
                    let t = self[(col, k)];
                    self[(r, k)] -= f * t;
                }
                let t = b[col];
                b[r] -= f * t;
            }
        }
        let mut x = vec![S::zero(); n];
        for r in (0..n).rev() {
            let mut acc = b[r];
            for k in r + 1..n {
                acc -= self[(r, k)] * x[k];
            }
            x[r] = acc / self[(r, r)];
        }
        Ok(x)
    }
}

impl<S> std::ops::Index<(usize, usize)> for Dense<S> {
    type Output = S;
    fn index(&self, (r, c): (usize, usize)) -> &S {
        &self.data[r * self.n + c]
    }
}

impl<S> std::ops::IndexMut<(usize, usize)> for Dense<S> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut S {
        &mut self.data[r * self.n + c]
    }
}
