//! Block encodings and the constructors built on them.
//!
//! Register convention: a block encoding on `a + n` qubits keeps its `a`
//! ancillas on the most significant qubits, so `⟨0^a|U|0^a⟩` is the
//! upper-left `2^n × 2^n` block of `U`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::oracle::{Charges, Counter, QueryCountedUnitary};
use crate::simkern::{complete_isometry, re, DenseOperator, C64, HERMITIAN_TOL};

/// `(α, a, δ, U)`: `‖H − α⟨0^a|U|0^a⟩‖ ≤ δ` for the encoded `H`.
#[derive(Clone, Debug)]
pub struct BlockAccess {
    pub alpha: f64,
    pub ancillas: usize,
    pub delta: f64,
    pub n: usize,
    pub u: QueryCountedUnitary,
}

impl BlockAccess {
    pub fn new(alpha: f64, ancillas: usize, delta: f64, u: QueryCountedUnitary) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::invalid(format!("scale must be positive, got {alpha}")));
        }
        if delta < 0.0 {
            return Err(Error::invalid(format!("encoding error must be >= 0, got {delta}")));
        }
        if u.n_qubits() < ancillas {
            return Err(Error::invalid(format!(
                "{ancillas} ancillas exceed a {}-qubit unitary",
                u.n_qubits()
            )));
        }
        let n = u.n_qubits() - ancillas;
        Ok(Self {
            alpha,
            ancillas,
            delta,
            n,
            u,
        })
    }

    /// `⟨0^a|U|0^a⟩`; reading it off is not a query.
    pub fn block(&self) -> DenseOperator {
        self.u
            .matrix()
            .top_left_block(self.ancillas)
            .expect("ancilla count validated at construction")
    }

    /// `α⟨0^a|U|0^a⟩`.
    pub fn encoded(&self) -> DenseOperator {
        self.block().scale(self.alpha)
    }

    fn require_exact(&self, what: &str) -> Result<()> {
        if self.delta != 0.0 {
            return Err(Error::invalid(format!(
                "{what} needs an exact block encoding, got delta = {}",
                self.delta
            )));
        }
        Ok(())
    }
}

/// `‖H − α⟨0^a|U|0^a⟩‖` in operator norm.
pub fn verify_block_encoding(b: &BlockAccess, h: &DenseOperator) -> Result<f64> {
    if h.n_qubits() != b.n || h.dim() != 1 << b.n {
        return Err(Error::DimensionMismatch {
            expected: 1 << b.n,
            found: h.dim(),
        });
    }
    Ok(h.add(&b.encoded().scale(-1.0))?.spectral_norm())
}

/// Exact one-ancilla dilation `[[B, √(1−B²)], [√(1−B²), −B]]` of `B = h/α`.
pub fn dilate_exact(h: &DenseOperator, alpha: f64, label: impl Into<String>) -> Result<BlockAccess> {
    if !h.is_hermitian(HERMITIAN_TOL.max(1e-12 * h.max_norm())) {
        return Err(Error::invalid("matrix to dilate is not Hermitian"));
    }
    let norm = h.spectral_norm();
    if !(alpha > 0.0) || norm > alpha * (1.0 + 1e-12) {
        return Err(Error::promise(format!(
            "scale {alpha} is below the spectral norm {norm}"
        )));
    }
    let b = h.scale(1.0 / alpha);
    let s = b.hermitian_function(|x| (1.0 - x * x).max(0.0).sqrt());
    let d = b.dim();
    let mut u = DMatrix::<C64>::zeros(2 * d, 2 * d);
    u.view_mut((0, 0), (d, d)).copy_from(b.matrix());
    u.view_mut((0, d), (d, d)).copy_from(s.matrix());
    u.view_mut((d, 0), (d, d)).copy_from(s.matrix());
    u.view_mut((d, d), (d, d)).copy_from(&(-b.matrix()));
    let op = DenseOperator::from_matrix(u)?;
    BlockAccess::new(alpha, 1, 0.0, QueryCountedUnitary::new(op, label)?)
}

/// Block access `(1, a_M, 0, U_{M'})` to `c-(M/α_M)` on `n + 1` system
/// qubits. The control sits between the ancillas and the system register.
pub fn control_block(b: &BlockAccess) -> Result<BlockAccess> {
    b.require_exact("control_block")?;
    control_block_inexact(b)
}

/// [`control_block`] for an approximate `U_M`; the error becomes `δ_M/α_M`.
pub fn control_block_inexact(b: &BlockAccess) -> Result<BlockAccess> {
    let a = b.ancillas;
    let total = a + 1 + b.n;
    let targets: Vec<usize> = (0..a).chain(a + 1..total).collect();
    let op = b
        .u
        .matrix()
        .embed_controlled(&[(a, true)], &targets, total)?;
    let u = QueryCountedUnitary::composite(op, format!("c-{}", b.u.label()), b.u.charges().clone())?;
    BlockAccess::new(1.0, a, b.delta / b.alpha, u)
}

/// Block access `(α_M, a_M + 1, 0)` to `|0^m⟩⟨0^m| ⊗ M`.
///
/// Qubit layout: `[flag][a_M ancillas][m projector qubits][n system]`. The
/// flag is flipped by a `0^m`-controlled NOT followed by `X`, so it stays
/// `|0⟩` exactly when the projector register is `|0^m⟩`.
pub fn tensor_projector(b: &BlockAccess, m: usize) -> Result<BlockAccess> {
    b.require_exact("tensor_projector")?;
    if m == 0 {
        return Err(Error::invalid("projector register needs m >= 1"));
    }
    let a = b.ancillas;
    let total = 1 + a + m + b.n;
    let x = DenseOperator::pauli_x();
    let zero_controls: Vec<(usize, bool)> = (1 + a..1 + a + m).map(|q| (q, false)).collect();
    let flag_cnot = x.embed_controlled(&zero_controls, &[0], total)?;
    let flag_x = x.embed(&[0], total)?;
    let um_targets: Vec<usize> = (1..1 + a).chain(1 + a + m..total).collect();
    let um = b.u.matrix().embed(&um_targets, total)?;
    let op = um.compose(&flag_x)?.compose(&flag_cnot)?;
    let u = QueryCountedUnitary::composite(
        op,
        format!("{}^({m})", b.u.label()),
        b.u.charges().clone(),
    )?;
    BlockAccess::new(b.alpha, a + 1, 0.0, u)
}

/// Block access `(α_Aα_B, a_A + a_B, 0)` to `AB`, one query to each of
/// `U_A` and `U_B`. Layout: `[a_A][a_B][n]`, `U_B` applied first.
pub fn multiply_blocks(ba: &BlockAccess, bb: &BlockAccess) -> Result<BlockAccess> {
    ba.require_exact("multiply_blocks")?;
    bb.require_exact("multiply_blocks")?;
    if ba.n != bb.n {
        return Err(Error::DimensionMismatch {
            expected: ba.n,
            found: bb.n,
        });
    }
    let (aa, ab, n) = (ba.ancillas, bb.ancillas, ba.n);
    let total = aa + ab + n;
    let ua_targets: Vec<usize> = (0..aa).chain(aa + ab..total).collect();
    let ub_targets: Vec<usize> = (aa..total).collect();
    let ua = ba.u.matrix().embed(&ua_targets, total)?;
    let ub = bb.u.matrix().embed(&ub_targets, total)?;
    let op = ua.compose(&ub)?;
    let charges = Charges::combined(&[(ba.u.charges(), 1), (bb.u.charges(), 1)]);
    let u = QueryCountedUnitary::composite(op, format!("{}·{}", ba.u.label(), bb.u.label()), charges)?;
    BlockAccess::new(ba.alpha * bb.alpha, aa + ab, 0.0, u)
}

pub type EntryFn = Arc<dyn Fn(usize, usize) -> C64 + Send + Sync>;
pub type LocationFn = Arc<dyn Fn(usize, usize) -> usize + Send + Sync>;

/// `(d, β, O_val, O_loc)` sparse access to a Hermitian matrix on `n` qubits.
///
/// `location(j, l)` must be a permutation of `l ∈ [2^n]` for every row `j`,
/// with the row's nonzero columns among `l ∈ [d]`.
#[derive(Clone)]
pub struct SparseAccess {
    pub n: usize,
    pub d: usize,
    pub beta: f64,
    values: EntryFn,
    locations: LocationFn,
    val_charges: Charges,
    loc_charges: Charges,
}

impl fmt::Debug for SparseAccess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SparseAccess")
            .field("n", &self.n)
            .field("d", &self.d)
            .field("beta", &self.beta)
            .field("val_charges", &self.val_charges)
            .field("loc_charges", &self.loc_charges)
            .finish()
    }
}

impl SparseAccess {
    pub fn new(
        n: usize,
        d: usize,
        beta: f64,
        values: EntryFn,
        locations: LocationFn,
        val_charges: Charges,
        loc_charges: Charges,
    ) -> Result<Self> {
        if n == 0 || d == 0 || d > 1 << n {
            return Err(Error::invalid(format!("sparsity {d} invalid for {n} qubits")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::invalid(format!("entry bound must be positive, got {beta}")));
        }
        Ok(Self {
            n,
            d,
            beta,
            values,
            locations,
            val_charges,
            loc_charges,
        })
    }

    /// Sparse access backed by a dense Hermitian matrix.
    pub fn from_dense(h: &DenseOperator, d: usize, beta: f64) -> Result<Self> {
        if !h.is_hermitian(HERMITIAN_TOL) {
            return Err(Error::invalid("sparse access needs a Hermitian matrix"));
        }
        let dim = h.dim();
        let mut rows = Vec::with_capacity(dim);
        for j in 0..dim {
            let mut cols: Vec<usize> = (0..dim).filter(|&k| h.get(j, k) != re(0.0)).collect();
            if cols.len() > d {
                return Err(Error::promise(format!(
                    "row {j} has {} nonzeros, sparsity bound is {d}",
                    cols.len()
                )));
            }
            cols.extend((0..dim).filter(|k| h.get(j, *k) == re(0.0)));
            rows.push(cols);
        }
        let mat = h.clone();
        let values: EntryFn = Arc::new(move |j, k| mat.get(j, k));
        let locations: LocationFn = Arc::new(move |j, l| rows[j][l]);
        Self::new(
            h.n_qubits(),
            d,
            beta,
            values,
            locations,
            Charges::single(&Counter::new("O_val")),
            Charges::single(&Counter::new("O_loc")),
        )
    }

    pub fn val_charges(&self) -> &Charges {
        &self.val_charges
    }

    pub fn loc_charges(&self) -> &Charges {
        &self.loc_charges
    }

    pub fn peek_value(&self, j: usize, k: usize) -> C64 {
        (self.values)(j, k)
    }

    pub fn peek_location(&self, j: usize, l: usize) -> usize {
        (self.locations)(j, l)
    }

    /// One `O_val` query.
    pub fn query_value(&self, j: usize, k: usize) -> C64 {
        self.val_charges.charge(1);
        self.peek_value(j, k)
    }

    /// One `O_loc` query.
    pub fn query_location(&self, j: usize, l: usize) -> usize {
        self.loc_charges.charge(1);
        self.peek_location(j, l)
    }

    /// Candidate nonzero columns of row `j`.
    pub fn row_columns(&self, j: usize) -> Vec<usize> {
        (0..self.d).map(|l| self.peek_location(j, l)).collect()
    }

    /// Dense matrix read through the value oracle (not counted).
    pub fn to_dense(&self) -> DenseOperator {
        let dim = 1 << self.n;
        DenseOperator::from_matrix(DMatrix::from_fn(dim, dim, |j, k| self.peek_value(j, k)))
            .expect("power-of-two dimension")
    }

    /// The in-place location oracle `|j⟩|l⟩ ↦ |j⟩|loc(j, l)⟩` on `2n` qubits.
    pub fn location_unitary(&self) -> Result<QueryCountedUnitary> {
        let dim = 1usize << self.n;
        let total = 2 * self.n;
        let mut mat = DMatrix::<C64>::zeros(dim * dim, dim * dim);
        for j in 0..dim {
            let mut seen = vec![false; dim];
            for l in 0..dim {
                let k = self.peek_location(j, l);
                if k >= dim || seen[k] {
                    return Err(Error::invalid(format!(
                        "location oracle is not a permutation on row {j}"
                    )));
                }
                seen[k] = true;
                mat[(j * dim + k, j * dim + l)] = re(1.0);
            }
        }
        debug_assert_eq!(1 << total, dim * dim);
        QueryCountedUnitary::composite(DenseOperator::from_matrix(mat)?, "O_loc", self.loc_charges.clone())
    }

    /// The XOR value oracle `|j⟩|k⟩|z⟩ ↦ |j⟩|k⟩|z ⊕ enc(H_jk/β)⟩` for real
    /// entries in `[0, β]`, with `bits`-bit fixed-point codes.
    pub fn value_unitary(&self, bits: u32) -> Result<QueryCountedUnitary> {
        let dim = 1usize << self.n;
        let total = 2 * self.n + bits as usize;
        if total > crate::simkern::MAX_OPERATOR_QUBITS {
            return Err(Error::RegisterBudget {
                requested: total,
                limit: crate::simkern::MAX_OPERATOR_QUBITS,
            });
        }
        let top = ((1u64 << bits) - 1) as f64;
        let zs = 1usize << bits;
        let full = dim * dim * zs;
        let mut mat = DMatrix::<C64>::zeros(full, full);
        for j in 0..dim {
            for k in 0..dim {
                let v = self.peek_value(j, k);
                if v.im != 0.0 || v.re < 0.0 || v.re > self.beta * (1.0 + 1e-12) {
                    return Err(Error::invalid(format!(
                        "entry ({j},{k}) = {v} has no fixed-point code in [0, β]"
                    )));
                }
                let code = ((v.re / self.beta).min(1.0) * top).round() as usize;
                for z in 0..zs {
                    let base = (j * dim + k) * zs;
                    mat[(base + (z ^ code), base + z)] = re(1.0);
                }
            }
        }
        QueryCountedUnitary::composite(DenseOperator::from_matrix(mat)?, "O_val", self.val_charges.clone())
    }
}

/// Oracle calls charged by one application of the walk unitary built in
/// [`sparse_to_block`]: four state preparations, each one location query and
/// a compute/uncompute pair of value queries.
pub const WALK_LOCATION_QUERIES: u64 = 4;
pub const WALK_VALUE_QUERIES: u64 = 8;

/// Block access `(dβ, n + 2, ε, U_H)` from sparse access, with
/// `U_H = T_L† · U_swap · R_T · T_R`.
///
/// Registers: `[f₁][x₁: n][f₂][x₂: n]`; the first `n + 2` qubits are the
/// ancillas and `x₂` is the system. `T_R` maps `|0^{n+2}⟩|k⟩` to
/// `|0⟩|k⟩|φᴿ_k⟩` and `T_L` maps `|0^{n+2}⟩|j⟩` to `|0⟩|j⟩|φᴸ_j⟩`, where
///
/// ```text
/// φᴸ_j = d^{-1/2} Σ_k  √(|H_jk|/β) |0⟩|k⟩ + √(1 − |H_jk|/β) |1⟩|k⟩
/// φᴿ_k = d^{-1/2} Σ_j  H*_kj/√(β|H_kj|) |0⟩|j⟩ + √(1 − |H_kj|/β) |1⟩|j⟩
/// ```
///
/// over the `d` listed columns of each row. The phase of every entry rides
/// on the right state, which keeps negative diagonal entries representable.
/// `R_T = 2 T_R Π₀ T_R† − 1` fixes the prepared states, so it leaves the block
/// unchanged.
pub fn sparse_to_block(s: &SparseAccess, eps: f64) -> Result<BlockAccess> {
    if !(eps > 0.0) {
        return Err(Error::invalid(format!("encoding error must be > 0, got {eps}")));
    }
    let n = s.n;
    let dim = 1usize << n;
    let total = 2 * n + 2;
    if total > crate::simkern::MAX_OPERATOR_QUBITS {
        return Err(Error::RegisterBudget {
            requested: total,
            limit: crate::simkern::MAX_OPERATOR_QUBITS,
        });
    }
    let max_entry = (0..dim)
        .flat_map(|j| (0..dim).map(move |k| (j, k)))
        .map(|(j, k)| s.peek_value(j, k).norm())
        .fold(0.0f64, f64::max);
    if max_entry > s.beta * (1.0 + 1e-12) {
        return Err(Error::promise(format!(
            "entry bound β = {} is below max |H_jk| = {max_entry}",
            s.beta
        )));
    }

    let full = 1usize << total;
    let half = 1usize << (n + 1);
    let inv_sqrt_d = 1.0 / (s.d as f64).sqrt();
    let beta = s.beta;
    let amplitude_pair = |h: C64| {
        let mag = (h.norm() / beta).min(1.0);
        (mag.sqrt(), (1.0 - mag).sqrt())
    };
    let out_index = |row: usize, flag: usize, col: usize| (row << (n + 1)) | (flag << n) | col;

    let mut left_cols = Vec::with_capacity(dim);
    let mut right_cols = Vec::with_capacity(dim);
    for j in 0..dim {
        let mut left = vec![re(0.0); full];
        let mut right = vec![re(0.0); full];
        for k in s.row_columns(j) {
            let h = s.peek_value(j, k);
            let (on, off) = amplitude_pair(h);
            left[out_index(j, 0, k)] = re(on * inv_sqrt_d);
            left[out_index(j, 1, k)] = re(off * inv_sqrt_d);
            let phase_amp = if h.norm() > 0.0 {
                h.conj() / (beta * h.norm()).sqrt()
            } else {
                re(0.0)
            };
            right[out_index(j, 0, k)] = phase_amp * inv_sqrt_d;
            right[out_index(j, 1, k)] = re(off * inv_sqrt_d);
        }
        left_cols.push(left);
        right_cols.push(right);
    }
    let inputs: Vec<usize> = (0..dim).collect();
    let t_left = complete_isometry(full, &inputs, &left_cols)?;
    let t_right = complete_isometry(full, &inputs, &right_cols)?;

    let mut reflect = DMatrix::<C64>::from_diagonal_element(full, full, re(-1.0));
    for col in &right_cols {
        let v = nalgebra::DVector::from_column_slice(col);
        reflect += (&v * v.adjoint()) * re(2.0);
    }
    let reflect = DenseOperator::from_matrix(reflect)?;

    let mut swap = DMatrix::<C64>::zeros(full, full);
    for idx in 0..full {
        let (hi, lo) = (idx / half, idx % half);
        swap[(lo * half + hi, idx)] = re(1.0);
    }
    let swap = DenseOperator::from_matrix(swap)?;

    let op = t_left
        .adjoint()
        .compose(&swap)?
        .compose(&reflect)?
        .compose(&t_right)?;
    let charges = Charges::combined(&[
        (s.val_charges(), WALK_VALUE_QUERIES),
        (s.loc_charges(), WALK_LOCATION_QUERIES),
    ]);
    let u = QueryCountedUnitary::composite(op, "U_H", charges)?;
    BlockAccess::new(s.d as f64 * beta, n + 2, eps, u)
}
