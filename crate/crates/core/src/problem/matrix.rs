use crate::error::{invalid, Result};
use crate::Scalar;

/// Square row-major matrix, sized for Hessians of small synthetic instances.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn from_row_major(dim: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != dim * dim {
            return invalid(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                data.len()
            ));
        }
        Ok(Self { dim, data })
    }

    pub fn diagonal(values: &[T]) -> Self {
        let dim = values.len();
        let mut data = vec![T::zero(); dim * dim];
        for (i, v) in values.iter().enumerate() {
            data[i * dim + i] = *v;
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.dim + col]
    }

    pub fn row(&self, row: usize) -> &[T] {
        &self.data[row * self.dim..(row + 1) * self.dim]
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        debug_assert_eq!(v.len(), self.dim);
        (0..self.dim)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(T::zero(), |acc, (a, x)| acc + *a * *x)
            })
            .collect()
    }

    pub fn quadratic_form(&self, v: &[T]) -> T {
        self.matvec(v)
            .iter()
            .zip(v)
            .fold(T::zero(), |acc, (a, b)| acc + *a * *b)
    }

    /// Induced ℓ∞ operator norm: the maximal absolute row sum.
    pub fn inf_norm(&self) -> T {
        (0..self.dim)
            .map(|i| self.row(i).iter().fold(T::zero(), |acc, a| acc + a.abs()))
            .fold(T::zero(), T::max)
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.dim).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// `|A_ii| >= Σ_{j≠i} |A_ij|` for every row, checked with zero tolerance.
    pub fn is_diagonally_dominant(&self) -> bool {
        (0..self.dim).all(|i| {
            let off: T = (0..self.dim)
                .filter(|&j| j != i)
                .fold(T::zero(), |acc, j| acc + self.get(i, j).abs());
            self.get(i, i).abs() >= off
        })
    }

    pub fn scale(&mut self, factor: T) {
        for a in &mut self.data {
            *a = *a * factor;
        }
    }

    /// Solves `A x = b` by Gaussian elimination with partial pivoting.
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        let n = self.dim;
        if b.len() != n {
            return invalid("right-hand side dimension mismatch");
        }
        let mut a = self.data.clone();
        let mut x = b.to_vec();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&r, &s| {
                    a[r * n + col]
                        .abs()
                        .partial_cmp(&a[s * n + col].abs())
                        .expect("finite matrix")
                })
                .expect("non-empty range");
            if a[pivot * n + col].abs() <= T::epsilon() {
                return invalid("matrix is singular");
            }
            if pivot != col {
                for k in 0..n {
                    a.swap(pivot * n + k, col * n + k);
                }
                x.swap(pivot, col);
            }
            let diag = a[col * n + col];
            for r in col + 1..n {
                let factor = a[r * n + col] / diag;
                if factor == T::zero() {
                    continue;
                }
                for k in col..n {
                    a[r * n + k] = a[r * n + k] - factor * a[col * n + k];
                }
                x[r] = x[r] - factor * x[col];
            }
        }
        for col in (0..n).rev() {
            let mut acc = x[col];
            for k in col + 1..n {
                acc = acc - a[col * n + k] * x[k];
            }
            x[col] = acc / a[col * n + col];
        }
        Ok(x)
    }
}
