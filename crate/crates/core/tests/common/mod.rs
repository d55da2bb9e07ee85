#![allow(dead_code)]

use blockev::simkern::{c, re, DenseOperator, C64};
use nalgebra::DMatrix;
use rand::Rng;

pub fn random_matrix<R: Rng>(dim: usize, rng: &mut R) -> DMatrix<C64> {
    DMatrix::from_fn(dim, dim, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
}

/// Random Hermitian matrix on `n` qubits with spectral norm `norm`.
pub fn random_hermitian<R: Rng>(n: usize, norm: f64, rng: &mut R) -> DenseOperator {
    let m = random_matrix(1 << n, rng);
    let h = DenseOperator::from_matrix((&m + m.adjoint()) * re(0.5)).unwrap();
    let s = h.spectral_norm();
    h.scale(norm / s)
}

pub fn random_unitary<R: Rng>(n: usize, rng: &mut R) -> DenseOperator {
    let q = random_matrix(1 << n, rng).qr().q();
    DenseOperator::from_matrix(q).unwrap()
}

pub fn random_state<R: Rng>(n: usize, rng: &mut R) -> Vec<C64> {
    let v: Vec<C64> = (0..1 << n)
        .map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

/// Hermitian matrix with the given eigenvalues in a random basis.
pub fn hermitian_with_spectrum<R: Rng>(eigs: &[f64], rng: &mut R) -> DenseOperator {
    let n = eigs.len().trailing_zeros() as usize;
    let u = random_unitary(n, rng);
    let d = DenseOperator::from_diagonal(&eigs.iter().map(|&e| re(e)).collect::<Vec<_>>()).unwrap();
    u.compose(&d).unwrap().compose(&u.adjoint()).unwrap()
}

/// `⟨ψ|M|ψ⟩` for `ψ = V|0⟩`.
pub fn expectation(m: &DenseOperator, v: &DenseOperator) -> f64 {
    let psi: Vec<C64> = (0..v.dim()).map(|i| v.get(i, 0)).collect();
    m.sandwich(&psi, &psi).re
}
