//! Expectation values `x†Mx` of linear-system solutions `x = A⁻¹b` from
//! block access to `A` and `M`, plus the dense classical reference.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::blockenc::{dilate_exact, tensor_projector, verify_block_encoding, BlockAccess};
use crate::error::{Error, Result};
use crate::estimate::{BevhmPlan, EstimationResult, QpeBackend};
use crate::matfun::inverse_block;
use crate::oracle::{Charges, QueryCountedUnitary};
use crate::rng::{seeded, trial_rng, SimRng};
use crate::simkern::{c, re, state_preparation, DenseOperator, C64, HERMITIAN_TOL};

/// Plain-data description of a B-SLEP instance; the serialized form.
#[derive(Clone, Debug, PartialEq)]
pub struct SlepData {
    pub n: usize,
    pub kappa: f64,
    pub alpha_a: f64,
    pub alpha_m: f64,
    pub eps: f64,
    pub a: DenseOperator,
    pub m: DenseOperator,
    pub b: Vec<C64>,
}

/// A B-SLEP instance with its oracles: block access to `A` and `M` and the
/// state preparer `U_b`.
#[derive(Clone, Debug)]
pub struct SlepInstance {
    pub n: usize,
    pub kappa: f64,
    pub block_a: BlockAccess,
    pub block_m: BlockAccess,
    pub eps: f64,
    pub u_b: QueryCountedUnitary,
}

impl SlepData {
    /// `A = Z`, `M = X`, `b = |+⟩`; the answer is `−1`.
    pub fn z_x_plus(eps: f64) -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            n: 1,
            kappa: 1.0,
            alpha_a: 1.0,
            alpha_m: 1.0,
            eps,
            a: DenseOperator::pauli_z(),
            m: DenseOperator::pauli_x(),
            b: vec![re(h), re(h)],
        }
    }

    /// `A` with eigenvalues drawn from `±[α_A/κ, α_A]` in a random basis,
    /// `M` random Hermitian with `‖M‖ ≤ α_M`, `b` a random unit vector.
    pub fn random<R: Rng + ?Sized>(
        n: usize,
        kappa: f64,
        alpha_a: f64,
        alpha_m: f64,
        eps: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if !(kappa >= 1.0) {
            return Err(Error::invalid(format!("condition number must be >= 1, got {kappa}")));
        }
        let dim = 1usize << n;
        let basis = random_unitary(dim, rng);
        let eigs: Vec<C64> = (0..dim)
            .map(|_| {
                let mag = 1.0 / kappa + rng.random::<f64>() * (1.0 - 1.0 / kappa);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                re(sign * mag * alpha_a)
            })
            .collect();
        let a = hermitian_from(&basis, &eigs);
        let raw = DMatrix::from_fn(dim, dim, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let herm = DenseOperator::from_matrix((&raw + raw.adjoint()) * re(0.5))?;
        let norm = herm.spectral_norm();
        let target = alpha_m * (0.5 + 0.5 * rng.random::<f64>());
        let m = if norm > 0.0 { herm.scale(target / norm) } else { herm };
        let b = random_state(dim, rng);
        Ok(Self {
            n,
            kappa,
            alpha_a,
            alpha_m,
            eps,
            a,
            m,
            b,
        })
    }

    /// Checks the promises and builds the oracles.
    pub fn instance(&self) -> Result<SlepInstance> {
        let dim = 1usize << self.n;
        if self.a.dim() != dim || self.m.dim() != dim || self.b.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: self.a.dim().max(self.m.dim()).max(self.b.len()),
            });
        }
        if !(self.eps > 0.0 && self.eps <= self.alpha_m) {
            return Err(Error::promise(format!(
                "eps = {} outside (0, α_M = {}]",
                self.eps, self.alpha_m
            )));
        }
        if !self.a.is_hermitian(HERMITIAN_TOL) || !self.m.is_hermitian(HERMITIAN_TOL) {
            return Err(Error::promise("A and M must be Hermitian"));
        }
        let (eigs, _) = self.a.hermitian_eigen();
        let gap = eigs.iter().fold(f64::INFINITY, |m, v| m.min(v.abs())) / self.alpha_a;
        if gap < 1.0 / self.kappa - 1e-9 {
            return Err(Error::promise(format!(
                "A/α_A has an eigenvalue of magnitude {gap} < 1/κ = {}",
                1.0 / self.kappa
            )));
        }
        let block_a = dilate_exact(&self.a, self.alpha_a, "U_A")?;
        let block_m = dilate_exact(&self.m, self.alpha_m, "U_M")?;
        let u_b = QueryCountedUnitary::new(state_preparation(&self.b)?, "U_b")?;
        Ok(SlepInstance {
            n: self.n,
            kappa: self.kappa,
            block_a,
            block_m,
            eps: self.eps,
            u_b,
        })
    }
}

fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<C64> {
    let m = DMatrix::from_fn(dim, dim, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    nalgebra::linalg::QR::new(m).q()
}

fn random_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<C64> {
    let v: Vec<C64> = (0..dim)
        .map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

fn hermitian_from(basis: &DMatrix<C64>, eigs: &[C64]) -> DenseOperator {
    let d = DMatrix::from_diagonal(&DVector::from_column_slice(eigs));
    let h = basis * d * basis.adjoint();
    // symmetrize away rounding so the Hermitian check is exact
    DenseOperator::from_matrix((&h + h.adjoint()) * re(0.5)).expect("square power-of-two matrix")
}

impl SlepInstance {
    /// `α_A⟨0|U_A|0⟩`, the `A` the oracles actually encode.
    pub fn a_matrix(&self) -> DenseOperator {
        self.block_a.encoded()
    }

    pub fn m_matrix(&self) -> DenseOperator {
        self.block_m.encoded()
    }

    pub fn b_vector(&self) -> Vec<C64> {
        self.u_b.matrix().matrix().column(0).iter().copied().collect()
    }

    /// `γ = α_M` for `α_M ≥ 1`, `√α_M` otherwise.
    pub fn gamma(&self) -> f64 {
        let am = self.block_m.alpha;
        if am >= 1.0 {
            am
        } else {
            am.sqrt()
        }
    }

    /// False when `eps` falls below `α_M/2^n`, the bottom of the problem's
    /// stated range.
    pub fn in_problem_range(&self) -> bool {
        self.eps >= self.block_m.alpha / (1u64 << self.n) as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalTruth {
    pub x: Vec<C64>,
    pub value: f64,
    pub residual: f64,
}

/// Dense solve of `Ax = b` and `x†Mx` for the unnormalized `x`.
pub fn classical_solve(inst: &SlepInstance) -> Result<ClassicalTruth> {
    solve_dense(&inst.a_matrix(), &inst.m_matrix(), &inst.b_vector())
}

pub fn solve_dense(a: &DenseOperator, m: &DenseOperator, b: &[C64]) -> Result<ClassicalTruth> {
    let bv = DVector::from_column_slice(b);
    let lu = a.matrix().clone().lu();
    let x = lu.solve(&bv).ok_or(Error::Singular)?;
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Singular);
    }
    let residual = (a.matrix() * &x - &bv).norm();
    let value = (x.adjoint() * m.matrix() * &x)[(0, 0)].re;
    Ok(ClassicalTruth {
        x: x.iter().copied().collect(),
        value,
        residual,
    })
}

/// Algorithm-4 pipeline for one instance: everything up to sampling.
#[derive(Clone, Debug)]
pub struct SlepPlan {
    bevhm: BevhmPlan,
    alpha_inv: f64,
    inverse_error: f64,
    inverse_budget: f64,
    degree: usize,
    eps: f64,
}

impl SlepPlan {
    pub fn new(inst: &SlepInstance, backend: QpeBackend) -> Result<Self> {
        let kappa = inst.kappa;
        let gamma = inst.gamma();
        let inverse_budget = inst.eps * inst.block_a.alpha.min(1.0) / (8.0 * gamma * kappa);
        let inv = inverse_block(&inst.block_a, kappa, inverse_budget)?;
        let ainv = inst
            .a_matrix()
            .matrix()
            .clone()
            .try_inverse()
            .ok_or(Error::Singular)?;
        let inverse_error = verify_block_encoding(&inv.block, &DenseOperator::from_matrix(ainv)?)?;

        let m = inv.block.ancillas;
        let projected = tensor_projector(&inst.block_m, m)?;
        let prep_matrix = inv
            .block
            .u
            .matrix()
            .compose(&DenseOperator::identity(m).kron(inst.u_b.matrix()))?;
        let charges = Charges::combined(&[(inv.block.u.charges(), 1), (inst.u_b.charges(), 1)]);
        let prep = QueryCountedUnitary::composite(prep_matrix, "U_x", charges)?;

        let alpha_inv = inv.block.alpha;
        let accuracy = 0.5 * inst.eps / (alpha_inv * alpha_inv);
        let bevhm = BevhmPlan::new(&projected, &prep, accuracy, backend)?;
        Ok(Self {
            bevhm,
            alpha_inv,
            inverse_error,
            inverse_budget,
            degree: inv.degree_used,
            eps: inst.eps,
        })
    }

    /// `‖α_inv⟨0|U_{A⁻¹}|0⟩ − A⁻¹‖`, measured when the plan was built.
    pub fn inverse_error(&self) -> f64 {
        self.inverse_error
    }

    /// The `ε/(8γκ)` the inverse encoding had to meet.
    pub fn inverse_budget(&self) -> f64 {
        self.inverse_budget
    }

    pub fn alpha_inv(&self) -> f64 {
        self.alpha_inv
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn bevhm(&self) -> &BevhmPlan {
        &self.bevhm
    }

    /// `α_inv² ⟨ψ|M⁽ᵐ⁾|ψ⟩` for the exact prepared state: what the estimator
    /// converges to.
    pub fn encoded_value(&self) -> f64 {
        self.alpha_inv * self.alpha_inv * self.bevhm.encoded_expectation()
    }

    pub fn run(&self, rng: &mut SimRng) -> EstimationResult {
        let mut r = self.bevhm.run(rng);
        r.value *= self.alpha_inv * self.alpha_inv;
        r.target_eps = self.eps;
        r
    }

    pub fn run_trial(&self, seed: u64, trial: u64) -> EstimationResult {
        self.run(&mut trial_rng(seed, trial))
    }
}

pub fn solve_bslep(inst: &SlepInstance, seed: u64) -> Result<EstimationResult> {
    Ok(SlepPlan::new(inst, QpeBackend::Auto)?.run(&mut seeded(seed)))
}

/// Calibrated constants for the query envelopes: `U_M ≤ C_M·α_Mκ²/ε`,
/// `U_b ≤ C_B·α_Mκ²/ε`, `U_A ≤ C_A·α_Mκ³·max(1, ln(α_Mκ²/ε))/ε`.
pub const C_M: f64 = 512.0;
pub const C_B: f64 = 1024.0;
pub const C_A: f64 = 16384.0;

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub label: String,
    pub count: u64,
    pub envelope: f64,
    pub constant: f64,
}

impl ReportRow {
    pub fn ratio(&self) -> f64 {
        self.count as f64 / self.envelope
    }

    pub fn within(&self) -> bool {
        self.ratio() <= self.constant
    }
}

/// Query counts of one run against the asymptotic envelopes.
pub fn query_report(inst: &SlepInstance, result: &EstimationResult) -> Vec<ReportRow> {
    let (am, k, eps) = (inst.block_m.alpha, inst.kappa, inst.eps);
    let base = am * k * k / eps;
    let log = (am * k * k / eps).ln().max(1.0);
    [
        ("U_M", base, C_M),
        ("U_A", base * k * log, C_A),
        ("U_b", base, C_B),
    ]
    .into_iter()
    .map(|(label, envelope, constant)| ReportRow {
        label: label.to_string(),
        count: result.queries(label),
        envelope,
        constant,
    })
    .collect()
}

/// Text form: header lines `n`, `kappa`, `alpha_a`, `alpha_m`, `eps`, then
/// sections `A`, `M` (row-major) and `b`, one `re im` pair per line.
pub fn write_slep(data: &SlepData) -> String {
    let mut out = String::new();
    writeln!(out, "n {}", data.n).unwrap();
    writeln!(out, "kappa {}", data.kappa).unwrap();
    writeln!(out, "alpha_a {}", data.alpha_a).unwrap();
    writeln!(out, "alpha_m {}", data.alpha_m).unwrap();
    writeln!(out, "eps {}", data.eps).unwrap();
    for (name, mat) in [("A", &data.a), ("M", &data.m)] {
        writeln!(out, "{name}").unwrap();
        let dim = mat.dim();
        for i in 0..dim {
            for j in 0..dim {
                let z = mat.get(i, j);
                writeln!(out, "{} {}", z.re, z.im).unwrap();
            }
        }
    }
    writeln!(out, "b").unwrap();
    for z in &data.b {
        writeln!(out, "{} {}", z.re, z.im).unwrap();
    }
    out
}

pub fn parse_slep(text: &str) -> Result<SlepData> {
    let mut header: [Option<f64>; 5] = [None; 5];
    let keys = ["n", "kappa", "alpha_a", "alpha_m", "eps"];
    let mut sections: [Vec<C64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut current: Option<usize> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        match line {
            "A" => current = Some(0),
            "M" => current = Some(1),
            "b" => current = Some(2),
            _ => {
                let parts: Vec<&str> = line.split_whitespace().collect();
                if let Some(slot) = keys.iter().position(|k| *k == parts[0]) {
                    if parts.len() != 2 {
                        return Err(err(format!("expected `{} <value>`", parts[0])));
                    }
                    header[slot] = Some(
                        parts[1]
                            .parse()
                            .map_err(|_| err(format!("bad number {:?}", parts[1])))?,
                    );
                    continue;
                }
                let sec = current.ok_or_else(|| err(format!("unexpected line {line:?}")))?;
                if parts.len() != 2 {
                    return Err(err("expected `re im`".into()));
                }
                let parse = |s: &str| s.parse::<f64>().map_err(|_| err(format!("bad number {s:?}")));
                sections[sec].push(c(parse(parts[0])?, parse(parts[1])?));
            }
        }
    }
    let get = |slot: usize| {
        header[slot].ok_or_else(|| Error::Parse {
            line: 0,
            message: format!("missing header {}", keys[slot]),
        })
    };
    let n = get(0)?;
    if n < 1.0 || n.fract() != 0.0 || n > 10.0 {
        return Err(Error::Parse {
            line: 0,
            message: format!("bad qubit count {n}"),
        });
    }
    let n = n as usize;
    let dim = 1usize << n;
    let [a, m, b] = sections;
    for (name, len, want) in [("A", a.len(), dim * dim), ("M", m.len(), dim * dim), ("b", b.len(), dim)] {
        if len != want {
            return Err(Error::Parse {
                line: 0,
                message: format!("section {name} has {len} entries, expected {want}"),
            });
        }
    }
    Ok(SlepData {
        n,
        kappa: get(1)?,
        alpha_a: get(2)?,
        alpha_m: get(3)?,
        eps: get(4)?,
        a: DenseOperator::from_rows(dim, &a)?,
        m: DenseOperator::from_rows(dim, &m)?,
        b,
    })
}
