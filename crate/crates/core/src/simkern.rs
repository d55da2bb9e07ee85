//! Dense statevector and operator kernel.
//!
//! Qubit 0 is the most significant bit of a basis-state index, so for a
//! register laid out as `ancillas ⊗ system` the `|0^a⟩` block of an operator
//! is its upper-left `2^n × 2^n` submatrix.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::seeded;

pub type C64 = Complex64;

/// Largest statevector the kernel will allocate.
pub const MAX_QUBITS: usize = 22;
/// Largest dense operator (in qubits) the kernel will materialize.
pub const MAX_OPERATOR_QUBITS: usize = 12;

pub const UNITARY_TOL: f64 = 1e-9;
pub const HERMITIAN_TOL: f64 = 1e-12;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn qubits_for_dim(dim: usize) -> Option<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        None
    } else {
        Some(dim.trailing_zeros() as usize)
    }
}

fn check_targets(targets: &[usize], n_qubits: usize) -> Result<()> {
    for (i, &t) in targets.iter().enumerate() {
        if t >= n_qubits {
            return Err(Error::QubitOutOfRange { index: t, n_qubits });
        }
        if targets[..i].contains(&t) {
            return Err(Error::DuplicateQubit(t));
        }
    }
    Ok(())
}

/// Bit mask of qubit `q` inside an `n`-qubit index.
#[inline]
fn mask(n: usize, q: usize) -> usize {
    1 << (n - 1 - q)
}

/// For each local index `s` of a `targets` sub-register, the offset it
/// contributes to the global index.
fn local_offsets(n: usize, targets: &[usize]) -> Vec<usize> {
    let k = targets.len();
    (0..1usize << k)
        .map(|s| {
            targets
                .iter()
                .enumerate()
                .filter(|(i, _)| (s >> (k - 1 - i)) & 1 == 1)
                .map(|(_, &t)| mask(n, t))
                .sum()
        })
        .collect()
}

/// A square complex matrix whose dimension is a power of two.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    mat: DMatrix<C64>,
}

impl DenseOperator {
    pub fn from_matrix(mat: DMatrix<C64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch {
                expected: mat.nrows(),
                found: mat.ncols(),
            });
        }
        let n = qubits_for_dim(mat.nrows()).ok_or_else(|| {
            Error::invalid(format!("dimension {} is not a power of two", mat.nrows()))
        })?;
        if n > MAX_OPERATOR_QUBITS {
            return Err(Error::RegisterBudget {
                requested: n,
                limit: MAX_OPERATOR_QUBITS,
            });
        }
        Ok(Self { mat })
    }

    /// Row-major complex entries.
    pub fn from_rows(dim: usize, entries: &[C64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        Self::from_matrix(DMatrix::from_row_slice(dim, dim, entries))
    }

    /// Row-major real entries.
    pub fn from_real_rows(dim: usize, entries: &[f64]) -> Result<Self> {
        let cs: Vec<C64> = entries.iter().map(|&x| re(x)).collect();
        Self::from_rows(dim, &cs)
    }

    pub fn from_diagonal(diag: &[C64]) -> Result<Self> {
        Self::from_matrix(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn identity(n_qubits: usize) -> Self {
        let d = 1 << n_qubits;
        Self {
            mat: DMatrix::identity(d, d),
        }
    }

    pub fn zeros(n_qubits: usize) -> Self {
        let d = 1 << n_qubits;
        Self {
            mat: DMatrix::zeros(d, d),
        }
    }

    pub fn pauli_x() -> Self {
        Self::from_real_rows(2, &[0.0, 1.0, 1.0, 0.0]).unwrap()
    }

    pub fn pauli_y() -> Self {
        Self::from_rows(2, &[re(0.0), c(0.0, -1.0), c(0.0, 1.0), re(0.0)]).unwrap()
    }

    pub fn pauli_z() -> Self {
        Self::from_real_rows(2, &[1.0, 0.0, 0.0, -1.0]).unwrap()
    }

    pub fn hadamard() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self::from_real_rows(2, &[h, h, h, -h]).unwrap()
    }

    /// `H^{⊗n}`.
    pub fn hadamard_all(n_qubits: usize) -> Self {
        let h = Self::hadamard();
        (1..n_qubits).fold(
            if n_qubits == 0 {
                Self::identity(0)
            } else {
                h.clone()
            },
            |acc, _| acc.kron(&h),
        )
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn n_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.mat
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.mat[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        Self {
            mat: self.mat.adjoint(),
        }
    }

    /// Matrix product `self · rhs`.
    pub fn compose(&self, rhs: &Self) -> Result<Self> {
        if self.dim() != rhs.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: rhs.dim(),
            });
        }
        Ok(Self {
            mat: complex_product(&self.mat, &rhs.mat),
        })
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        if self.dim() != rhs.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: rhs.dim(),
            });
        }
        Ok(Self {
            mat: &self.mat + &rhs.mat,
        })
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            mat: self.mat.map(|z| z * factor),
        }
    }

    /// Kronecker product with `self` on the more significant qubits.
    pub fn kron(&self, rhs: &Self) -> Self {
        Self {
            mat: self.mat.kronecker(&rhs.mat),
        }
    }

    /// `self` acting on `targets` of an `n_total`-qubit register, identity
    /// elsewhere.
    pub fn embed(&self, targets: &[usize], n_total: usize) -> Result<Self> {
        self.embed_controlled(&[], targets, n_total)
    }

    /// `self` on `targets`, applied only where every `(qubit, value)` control
    /// condition holds; identity on the rest of the space.
    pub fn embed_controlled(
        &self,
        controls: &[(usize, bool)],
        targets: &[usize],
        n_total: usize,
    ) -> Result<Self> {
        if 1 << targets.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: 1 << targets.len(),
            });
        }
        let mut all: Vec<usize> = targets.to_vec();
        all.extend(controls.iter().map(|&(q, _)| q));
        check_targets(&all, n_total)?;
        if n_total > MAX_OPERATOR_QUBITS {
            return Err(Error::RegisterBudget {
                requested: n_total,
                limit: MAX_OPERATOR_QUBITS,
            });
        }
        let dim = 1usize << n_total;
        let offsets = local_offsets(n_total, targets);
        let target_mask: usize = offsets.iter().fold(0, |acc, &o| acc | o);
        let mut out = DMatrix::<C64>::zeros(dim, dim);
        for base in 0..dim {
            if base & target_mask != 0 {
                continue;
            }
            let active = controls
                .iter()
                .all(|&(q, v)| ((base & mask(n_total, q)) != 0) == v);
            for (r, &ro) in offsets.iter().enumerate() {
                for (cidx, &co) in offsets.iter().enumerate() {
                    out[(base | ro, base | co)] = if active {
                        self.mat[(r, cidx)]
                    } else if r == cidx {
                        re(1.0)
                    } else {
                        re(0.0)
                    };
                }
            }
        }
        Ok(Self { mat: out })
    }

    /// `|0⟩⟨0| ⊗ 1 + |1⟩⟨1| ⊗ self` with the control as the new qubit 0.
    pub fn controlled(&self) -> Self {
        let d = self.dim();
        let mut out = DMatrix::<C64>::identity(2 * d, 2 * d);
        out.view_mut((d, d), (d, d)).copy_from(&self.mat);
        Self { mat: out }
    }

    /// `⟨0^a| self |0^a⟩` where the first `ancillas` qubits are projected.
    pub fn top_left_block(&self, ancillas: usize) -> Result<Self> {
        if ancillas > self.n_qubits() {
            return Err(Error::invalid(format!(
                "{ancillas} ancillas exceed a {}-qubit operator",
                self.n_qubits()
            )));
        }
        let d = self.dim() >> ancillas;
        Self::from_matrix(self.mat.view((0, 0), (d, d)).into_owned())
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        let prod = complex_product(&self.mat.adjoint(), &self.mat);
        max_abs(&(prod - DMatrix::identity(self.dim(), self.dim()))) <= tol
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        max_abs(&(&self.mat - self.mat.adjoint())) <= tol
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        max_abs(&(&self.mat - &other.mat))
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> f64 {
        if self.dim() == 1 {
            return self.mat[(0, 0)].norm();
        }
        self.mat
            .clone()
            .singular_values()
            .iter()
            .fold(0.0f64, |a, &b| a.max(b))
    }

    /// Largest entry modulus.
    pub fn max_norm(&self) -> f64 {
        max_abs(&self.mat)
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }

    /// Eigenvalues (ascending) and orthonormal eigenvectors of the Hermitian
    /// part of `self`.
    pub fn hermitian_eigen(&self) -> (Vec<f64>, DMatrix<C64>) {
        let herm = (&self.mat + self.mat.adjoint()) * re(0.5);
        let eig = SymmetricEigen::new(herm);
        let mut order: Vec<usize> = (0..self.dim()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut vecs = DMatrix::zeros(self.dim(), self.dim());
        for (dst, &src) in order.iter().enumerate() {
            vecs.set_column(dst, &eig.eigenvectors.column(src));
        }
        (vals, vecs)
    }

    /// Eigenphases and an orthonormal eigenbasis of a unitary matrix, from the
    /// Hermitian pencil `(U + U†)/2 + μ(U − U†)/2i`, which shares the
    /// eigenvectors of `U` and separates its eigenphases for generic `μ`.
    pub fn unitary_eigen(&self) -> Result<(Vec<f64>, DMatrix<C64>)> {
        let herm = (&self.mat + self.mat.adjoint()) * re(0.5);
        let anti = (&self.mat - self.mat.adjoint()) * c(0.0, -0.5);
        for mu in [0.577_215_664_901_532_9, 0.271_828_182_845_904_5, 1.324_717_957_244_746] {
            let pencil = Self {
                mat: &herm + &anti * re(mu),
            };
            let (_, vecs) = pencil.hermitian_eigen();
            let uvecs = complex_product(&self.mat, &vecs);
            let mut phases = Vec::with_capacity(self.dim());
            let mut ok = true;
            for j in 0..self.dim() {
                let q = vecs.column(j);
                let uq = uvecs.column(j);
                let lambda = q.dotc(&uq);
                if (uq - q * lambda).norm() > 1e-9 {
                    ok = false;
                    break;
                }
                phases.push(lambda.arg());
            }
            if ok {
                return Ok((phases, vecs));
            }
        }
        Err(Error::invalid("eigenphases could not be separated; is the matrix unitary?"))
    }

    /// `f(self)` for Hermitian `self`, evaluated on the eigenbasis.
    pub fn hermitian_function(&self, f: impl Fn(f64) -> f64) -> Self {
        let (vals, vecs) = self.hermitian_eigen();
        let diag = DMatrix::from_diagonal(&DVector::from_iterator(
            vals.len(),
            vals.iter().map(|&l| re(f(l))),
        ));
        Self {
            mat: &vecs * diag * vecs.adjoint(),
        }
    }

    pub fn apply_to_vector(&self, v: &[C64]) -> Vec<C64> {
        let x = DVector::from_column_slice(v);
        (&self.mat * x).iter().copied().collect()
    }

    /// `⟨u| self |v⟩`.
    pub fn sandwich(&self, u: &[C64], v: &[C64]) -> C64 {
        let mv = self.apply_to_vector(v);
        u.iter().zip(mv.iter()).map(|(a, b)| a.conj() * b).sum()
    }
}

/// Below this size the generic complex product is fast enough.
const SPLIT_PRODUCT_DIM: usize = 32;

/// `a · b` through four real products, which take nalgebra's blocked `f64`
/// kernel instead of its generic complex loop.
pub fn complex_product(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    if a.nrows().max(b.ncols()) < SPLIT_PRODUCT_DIM {
        return a * b;
    }
    let (ar, ai) = (a.map(|z| z.re), a.map(|z| z.im));
    let (br, bi) = (b.map(|z| z.re), b.map(|z| z.im));
    let real = &ar * &br - &ai * &bi;
    let imag = &ar * &bi + &ai * &br;
    real.zip_map(&imag, c)
}

fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().fold(0.0f64, |a, z| a.max(z.norm()))
}

/// `op^k` by repeated squaring.
pub fn matrix_power(op: &DenseOperator, mut k: u64) -> DenseOperator {
    let mut result = DenseOperator::identity(op.n_qubits());
    let mut base = op.clone();
    while k > 0 {
        if k & 1 == 1 {
            result = result.compose(&base).expect("same dimension");
        }
        k >>= 1;
        if k > 0 {
            base = base.compose(&base).expect("same dimension");
        }
    }
    result
}

/// A normalized pure state over `n_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<C64>,
}

impl StateVector {
    /// `|0^n⟩`.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        Self::basis(n_qubits, 0)
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::invalid("a register needs at least one qubit"));
        }
        if n_qubits > MAX_QUBITS {
            return Err(Error::RegisterBudget {
                requested: n_qubits,
                limit: MAX_QUBITS,
            });
        }
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::invalid(format!(
                "basis index {index} out of range for {n_qubits} qubits"
            )));
        }
        let mut amps = vec![re(0.0); dim];
        amps[index] = re(1.0);
        Ok(Self { n_qubits, amps })
    }

    /// Wraps the given amplitudes; they must already be normalized.
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let n_qubits = qubits_for_dim(amps.len())
            .filter(|&n| n >= 1)
            .ok_or_else(|| Error::invalid("amplitude count must be a power of two >= 2"))?;
        if n_qubits > MAX_QUBITS {
            return Err(Error::RegisterBudget {
                requested: n_qubits,
                limit: MAX_QUBITS,
            });
        }
        let norm2: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
        if (norm2 - 1.0).abs() > UNITARY_TOL {
            return Err(Error::invalid(format!("state has squared norm {norm2}")));
        }
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &Self) -> C64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Applies `op` to `targets` (most significant first) in place.
    pub fn apply(&mut self, op: &DenseOperator, targets: &[usize]) -> Result<()> {
        self.apply_controlled(op, &[], targets)
    }

    /// Applies `op` to `targets` on the branch where every control condition
    /// holds.
    pub fn apply_controlled(
        &mut self,
        op: &DenseOperator,
        controls: &[(usize, bool)],
        targets: &[usize],
    ) -> Result<()> {
        if 1usize << targets.len() != op.dim() {
            return Err(Error::DimensionMismatch {
                expected: op.dim(),
                found: 1 << targets.len(),
            });
        }
        let mut all: Vec<usize> = targets.to_vec();
        all.extend(controls.iter().map(|&(q, _)| q));
        check_targets(&all, self.n_qubits)?;

        let n = self.n_qubits;
        let offsets = local_offsets(n, targets);
        let target_mask: usize = offsets.iter().fold(0, |acc, &o| acc | o);
        let (ctrl_mask, ctrl_value) = controls.iter().fold((0, 0), |(m, v), &(q, on)| {
            (m | mask(n, q), if on { v | mask(n, q) } else { v })
        });
        let k = op.dim();
        let mut buf = vec![re(0.0); k];
        let m = op.matrix();
        for base in 0..self.amps.len() {
            if base & target_mask != 0 || base & ctrl_mask != ctrl_value {
                continue;
            }
            for (s, &o) in offsets.iter().enumerate() {
                buf[s] = self.amps[base | o];
            }
            for (r, &o) in offsets.iter().enumerate() {
                let mut acc = re(0.0);
                for (col, b) in buf.iter().enumerate() {
                    acc += m[(r, col)] * b;
                }
                self.amps[base | o] = acc;
            }
        }
        Ok(())
    }

    /// Multiplies every amplitude whose index has all `qubits` set by `phase`.
    pub fn apply_phase_where_set(&mut self, qubits: &[usize], phase: C64) -> Result<()> {
        check_targets(qubits, self.n_qubits)?;
        let m = qubits.iter().fold(0, |acc, &q| acc | mask(self.n_qubits, q));
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & m == m {
                *a *= phase;
            }
        }
        Ok(())
    }

    /// Marginal distribution of `qubits`, indexed with `qubits[0]` as the
    /// most significant outcome bit.
    pub fn marginal(&self, qubits: &[usize]) -> Result<Vec<f64>> {
        check_targets(qubits, self.n_qubits)?;
        let n = self.n_qubits;
        let k = qubits.len();
        let mut probs = vec![0.0; 1 << k];
        for (i, a) in self.amps.iter().enumerate() {
            let mut s = 0usize;
            for &q in qubits {
                s = (s << 1) | usize::from(i & mask(n, q) != 0);
            }
            probs[s] += a.norm_sqr();
        }
        Ok(probs)
    }

    /// `‖(|s⟩⟨s| ⊗ 1)|ψ⟩‖²` for the outcome `bits` on `qubits`.
    pub fn measure_projector(&self, qubits: &[usize], bits: &[bool]) -> Result<f64> {
        if qubits.len() != bits.len() {
            return Err(Error::DimensionMismatch {
                expected: qubits.len(),
                found: bits.len(),
            });
        }
        let probs = self.marginal(qubits)?;
        Ok(probs[bits_to_index(bits)])
    }

    pub fn sample_bitstring<R: Rng + ?Sized>(
        &self,
        qubits: &[usize],
        rng: &mut R,
    ) -> Result<Vec<bool>> {
        let probs = self.marginal(qubits)?;
        let idx = sample_index(&probs, rng);
        Ok(index_to_bits(idx, qubits.len()))
    }

    /// Seeded variant of [`StateVector::sample_bitstring`].
    pub fn sample_bitstring_seeded(&self, qubits: &[usize], seed: u64) -> Result<Vec<bool>> {
        self.sample_bitstring(qubits, &mut seeded(seed))
    }
}

/// Functional form of [`StateVector::apply`].
pub fn apply_to_subset(
    op: &DenseOperator,
    state: &StateVector,
    targets: &[usize],
) -> Result<StateVector> {
    let mut out = state.clone();
    out.apply(op, targets)?;
    Ok(out)
}

/// Draws an index from a (possibly unnormalized) discrete distribution.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let total: f64 = probs.iter().sum();
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

pub fn bits_to_index(bits: &[bool]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | usize::from(b))
}

pub fn index_to_bits(index: usize, width: usize) -> Vec<bool> {
    (0..width).map(|i| (index >> (width - 1 - i)) & 1 == 1).collect()
}

/// Parses a `"0101"` literal.
pub fn parse_bits(s: &str) -> Result<Vec<bool>> {
    s.chars()
        .map(|ch| match ch {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(Error::invalid(format!("not a bit: {other:?}"))),
        })
        .collect()
}

/// Completes an isometry to a unitary: the result maps basis vector
/// `inputs[i]` to `columns[i]`. Columns must be orthonormal.
///
/// Built as a product of complex Householder reflections, so the
/// completion is exact to rounding.
pub fn complete_isometry(
    dim: usize,
    inputs: &[usize],
    columns: &[Vec<C64>],
) -> Result<DenseOperator> {
    if inputs.len() != columns.len() {
        return Err(Error::DimensionMismatch {
            expected: inputs.len(),
            found: columns.len(),
        });
    }
    let mut u = DMatrix::<C64>::identity(dim, dim);
    for (i, (&inp, col)) in inputs.iter().zip(columns).enumerate() {
        if col.len() != dim || inp >= dim || inputs[..i].contains(&inp) {
            return Err(Error::invalid("malformed isometry column"));
        }
        // Target expressed in the frame of the reflections applied so far.
        let target = u.adjoint() * DVector::from_column_slice(col);
        let overlap = target[inp];
        let phase = if overlap.norm() > 1e-300 {
            overlap / overlap.norm()
        } else {
            re(1.0)
        };
        let mut v = -target;
        v[inp] += phase;
        let vnorm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        // u ← u · (1 - 2 v v† / v†v) · diag(phase at inp), as a rank-1 update.
        if vnorm2 > 1e-28 {
            let uv = &u * &v;
            u.ger(re(-2.0 / vnorm2), &uv, &v.conjugate(), re(1.0));
        }
        let mut col_inp = u.column(inp).into_owned();
        col_inp *= phase;
        u.set_column(inp, &col_inp);
    }
    DenseOperator::from_matrix(u)
}

/// A unitary whose first column is `state`.
pub fn state_preparation(state: &[C64]) -> Result<DenseOperator> {
    let norm2: f64 = state.iter().map(|z| z.norm_sqr()).sum();
    if (norm2 - 1.0).abs() > UNITARY_TOL {
        return Err(Error::invalid(format!(
            "state to prepare has squared norm {norm2}"
        )));
    }
    complete_isometry(state.len(), &[0], &[state.to_vec()])
}
