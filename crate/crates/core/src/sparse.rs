//! Triplet-form operators for the hot loops of the integrators.
//!
//! The public surface stays dense ([`crate::quantum::Operator`]); drive and
//! jump operators are converted here once so each right-hand-side evaluation
//! costs `nnz · dim` instead of `dim³`. Duplicate coordinates are allowed and
//! simply accumulate.

use nalgebra::{DMatrix, DVector};

use crate::C64;

#[derive(Clone, Debug, Default)]
pub(crate) struct SparseOp {
    pub dim: usize,
    pub entries: Vec<(usize, usize, C64)>,
}

impl SparseOp {
    pub fn from_dense(m: &DMatrix<C64>) -> Self {
        let mut entries = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let v = m[(i, j)];
                if v.re != 0.0 || v.im != 0.0 {
                    entries.push((i, j, v));
                }
            }
        }
        Self { dim: m.nrows(), entries }
    }

    pub fn adjoint(&self) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|&(i, j, v)| (j, i, v.conj())).collect(),
        }
    }

    #[cfg(test)]
    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
        }
        m
    }

    /// `out += scale · self · x` for a vector.
    pub fn apply_acc(&self, x: &DVector<C64>, out: &mut DVector<C64>, scale: C64) {
        let xs = x.as_slice();
        let os = out.as_mut_slice();
        for &(i, j, v) in &self.entries {
            os[i] += scale * v * xs[j];
        }
    }

    /// `out += scale · self · rho`.
    pub fn left_mul_acc(&self, rho: &DMatrix<C64>, out: &mut DMatrix<C64>, scale: C64) {
        let d = self.dim;
        let scaled: Vec<(usize, usize, C64)> = self.entries.iter().map(|&(i, j, v)| (i, j, v * scale)).collect();
        let rs = rho.as_slice();
        let os = out.as_mut_slice();
        for col in 0..d {
            let r = &rs[col * d..(col + 1) * d];
            let o = &mut os[col * d..(col + 1) * d];
            for &(i, j, v) in &scaled {
                o[i] += v * r[j];
            }
        }
    }

    /// `out += scale · rho · self†`.
    pub fn right_mul_adjoint_acc(&self, rho: &DMatrix<C64>, out: &mut DMatrix<C64>, scale: C64) {
        // (rho · S†)[:, i] = Σ_j rho[:, j] · conj(S[i, j])
        let d = self.dim;
        let rs = rho.as_slice();
        let os = out.as_mut_slice();
        for &(i, j, v) in &self.entries {
            let w = v.conj() * scale;
            let (src, dst) = (j * d, i * d);
            for k in 0..d {
                os[dst + k] += w * rs[src + k];
            }
        }
    }
}
