//! Symmetric block-tridiagonal systems arising from the Hessian of the
//! discrete action: `n x n` diagonal blocks and scalar multiples of the
//! identity off the diagonal.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct NotPositiveDefinite;

#[derive(Clone)]
pub(crate) struct BlockTridiagonal {
    block: usize,
    len: usize,
    /// Row-major diagonal blocks, `len * block * block` entries.
    pub diag: Vec<f64>,
    /// `coupling[i]` multiplies the identity between nodes `i` and `i + 1`.
    pub coupling: Vec<f64>,
}

impl BlockTridiagonal {
    pub fn zeros(block: usize, len: usize) -> Self {
        BlockTridiagonal {
            block,
            len,
            diag: vec![0.0; len * block * block],
            coupling: vec![0.0; len.saturating_sub(1)],
        }
    }

    pub fn diag_block_mut(&mut self, i: usize) -> &mut [f64] {
        let b2 = self.block * self.block;
        &mut self.diag[i * b2..(i + 1) * b2]
    }

    /// Solves `A x = rhs` in place by block Cholesky elimination. Fails if a
    /// Schur complement block is not positive definite, i.e. `A` is not.
    pub fn solve(&self, rhs: &mut [f64]) -> Result<(), NotPositiveDefinite> {
        let b = self.block;
        let mut factors: Vec<Cholesky<f64, Dyn>> = Vec::with_capacity(self.len);
        for i in 0..self.len {
            let mut s = DMatrix::from_row_slice(b, b, &self.diag[i * b * b..(i + 1) * b * b]);
            let mut z = DVector::from_column_slice(&rhs[i * b..(i + 1) * b]);
            if i > 0 {
                let c = self.coupling[i - 1];
                if c != 0.0 {
                    let prev = &factors[i - 1];
                    s -= prev.inverse() * (c * c);
                    let zp = DVector::from_column_slice(&rhs[(i - 1) * b..i * b]);
                    z -= prev.solve(&zp) * c;
                }
            }
            rhs[i * b..(i + 1) * b].copy_from_slice(z.as_slice());
            let chol = Cholesky::new(s).ok_or(NotPositiveDefinite)?;
            factors.push(chol);
        }
        for i in (0..self.len).rev() {
            let mut z = DVector::from_column_slice(&rhs[i * b..(i + 1) * b]);
            if i + 1 < self.len {
                let c = self.coupling[i];
                if c != 0.0 {
                    let next = DVector::from_column_slice(&rhs[(i + 1) * b..(i + 2) * b]);
                    z -= next * c;
                }
            }
            let x = factors[i].solve(&z);
            rhs[i * b..(i + 1) * b].copy_from_slice(x.as_slice());
        }
        Ok(())
    }
}
