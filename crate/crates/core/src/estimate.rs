//! Phase estimation, amplitude estimation, and the expectation-value
//! estimators built on them.
//!
//! Each estimator is split into a plan, which fixes the circuit and computes
//! the exact outcome distribution of its phase register once, and a run,
//! which samples that distribution and charges the oracle counters for one
//! execution of the circuit.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::blockenc::{control_block_inexact, sparse_to_block, BlockAccess, SparseAccess};
use crate::error::{Error, Result};
use crate::oracle::{Charges, QueryCountedUnitary, QueryLedger};
use crate::rng::{seeded, trial_rng, SimRng};
use crate::simkern::{
    c, re, sample_index, DenseOperator, StateVector, MAX_OPERATOR_QUBITS, MAX_QUBITS,
};

/// Largest phase + system register simulated by the statevector backend
/// under [`QpeBackend::Auto`].
pub const AUTO_CIRCUIT_QUBITS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum QpeBackend {
    /// Statevector when the register is small, spectral otherwise.
    #[default]
    Auto,
    /// Full statevector circuit. `faithful` applies `S` once per query
    /// instead of precomputing the powers `S^{2^k}`.
    Circuit { faithful: bool },
    /// Outcome distribution from the eigendecomposition of `S`: a mixture of
    /// Fejér kernels centred on its eigenphases.
    Spectral,
}

/// `⌈log₂(1/eps)⌉ + 3`.
pub fn register_width(eps: f64) -> Result<usize> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::invalid(format!("accuracy must be positive, got {eps}")));
    }
    let mut m = 0usize;
    while (-(m as f64)).exp2() > eps {
        m += 1;
    }
    Ok(m + 3)
}

/// Distribution of the `t`-qubit phase register after textbook phase
/// estimation of `s` on `prep|0⟩`; outcome `m` stands for `2πm/2^t`.
pub fn qpe_distribution(
    s: &DenseOperator,
    prep: &DenseOperator,
    t: usize,
    backend: QpeBackend,
) -> Result<Vec<f64>> {
    if s.dim() != prep.dim() {
        return Err(Error::DimensionMismatch {
            expected: s.dim(),
            found: prep.dim(),
        });
    }
    if t == 0 {
        return Err(Error::invalid("phase register needs at least one qubit"));
    }
    match backend {
        QpeBackend::Circuit { faithful } => circuit_distribution(s, prep, t, faithful),
        QpeBackend::Spectral => spectral_distribution(s, prep, t),
        QpeBackend::Auto if t + s.n_qubits() <= AUTO_CIRCUIT_QUBITS => {
            circuit_distribution(s, prep, t, false)
        }
        QpeBackend::Auto => spectral_distribution(s, prep, t),
    }
}

fn circuit_distribution(
    s: &DenseOperator,
    prep: &DenseOperator,
    t: usize,
    faithful: bool,
) -> Result<Vec<f64>> {
    let total = t + s.n_qubits();
    if total > MAX_QUBITS {
        return Err(Error::RegisterBudget {
            requested: total,
            limit: MAX_QUBITS,
        });
    }
    let mut st = StateVector::zero(total)?;
    let sys: Vec<usize> = (t..total).collect();
    st.apply(prep, &sys)?;
    let h = DenseOperator::hadamard();
    for q in 0..t {
        st.apply(&h, &[q])?;
    }
    // qubit q carries weight 2^{t-1-q}; walk from the least significant up
    let mut power = s.clone();
    for q in (0..t).rev() {
        if faithful {
            for _ in 0..1u64 << (t - 1 - q) {
                st.apply_controlled(s, &[(q, true)], &sys)?;
            }
        } else {
            st.apply_controlled(&power, &[(q, true)], &sys)?;
            if q > 0 {
                power = power.compose(&power)?;
            }
        }
    }
    inverse_qft(&mut st, t)?;
    st.marginal(&(0..t).collect::<Vec<_>>())
}

fn inverse_qft(st: &mut StateVector, t: usize) -> Result<()> {
    let swap = DenseOperator::from_real_rows(
        4,
        &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
    )?;
    for q in 0..t / 2 {
        st.apply(&swap, &[q, t - 1 - q])?;
    }
    let h = DenseOperator::hadamard();
    for q in (0..t).rev() {
        for r in (q + 1..t).rev() {
            let angle = -2.0 * PI / (1u64 << (r - q + 1)) as f64;
            st.apply_phase_where_set(&[q, r], c(angle.cos(), angle.sin()))?;
        }
        st.apply(&h, &[q])?;
    }
    Ok(())
}

/// `|N⁻¹ Σ_{x<N} e^{ixδ}|²`.
fn fejer(delta: f64, n: usize) -> f64 {
    let half = 0.5 * delta;
    let den = half.sin();
    if den.abs() < 1e-12 {
        return 1.0;
    }
    let v = (n as f64 * half).sin() / (n as f64 * den);
    v * v
}

fn spectral_distribution(s: &DenseOperator, prep: &DenseOperator, t: usize) -> Result<Vec<f64>> {
    if s.n_qubits() > MAX_OPERATOR_QUBITS {
        return Err(Error::RegisterBudget {
            requested: s.n_qubits(),
            limit: MAX_OPERATOR_QUBITS,
        });
    }
    if t > 24 {
        return Err(Error::RegisterBudget {
            requested: t,
            limit: 24,
        });
    }
    let (phases, q) = s.unitary_eigen()?;
    let psi = prep.matrix().column(0);
    let weights = q.adjoint() * psi;
    let n = 1usize << t;
    let mut probs = vec![0.0; n];
    for j in 0..s.dim() {
        let w = weights[j].norm_sqr();
        if w < 1e-18 {
            continue;
        }
        let phase = phases[j];
        for (m, p) in probs.iter_mut().enumerate() {
            *p += w * fejer(phase - 2.0 * PI * m as f64 / n as f64, n);
        }
    }
    Ok(probs)
}

/// Outcome distribution of a phase-estimation circuit, ready to sample.
#[derive(Clone, Debug)]
pub struct PhaseSampler {
    t: usize,
    probs: Vec<f64>,
}

impl PhaseSampler {
    pub fn new(s: &DenseOperator, prep: &DenseOperator, t: usize, backend: QpeBackend) -> Result<Self> {
        Ok(Self {
            t,
            probs: qpe_distribution(s, prep, t, backend)?,
        })
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    /// A phase in `[0, 2π)`.
    pub fn sample(&self, rng: &mut SimRng) -> f64 {
        let m = sample_index(&self.probs, rng);
        2.0 * PI * m as f64 / self.probs.len() as f64
    }
}

/// Samples an `eps`-accurate eigenphase of `v` weighted by `|⟨ψ|w|0⟩|²`.
/// Charges `2^t − 1` queries to `v` and one to `w`.
pub fn phase_estimate(
    v: &QueryCountedUnitary,
    w: &QueryCountedUnitary,
    eps: f64,
    seed: u64,
) -> Result<f64> {
    let t = register_width(eps)?;
    let sampler = PhaseSampler::new(v.matrix(), w.matrix(), t, QpeBackend::Auto)?;
    v.charge((1u64 << t) - 1);
    w.charge(1);
    Ok(sampler.sample(&mut seeded(seed)))
}

/// `S = W P₀ W† V W P₀ W† V†` with `P₀ = 1 − 2|0⟩⟨0|`.
pub fn ae_operator(v: &DenseOperator, w: &DenseOperator) -> Result<DenseOperator> {
    if v.dim() != w.dim() {
        return Err(Error::DimensionMismatch {
            expected: v.dim(),
            found: w.dim(),
        });
    }
    let mut p0 = DenseOperator::identity(v.n_qubits()).into_matrix();
    p0[(0, 0)] = re(-1.0);
    let p0 = DenseOperator::from_matrix(p0)?;
    let reflect = w.compose(&p0)?.compose(&w.adjoint())?;
    reflect
        .compose(v)?
        .compose(&reflect)?
        .compose(&v.adjoint())
}

/// `|⟨0|W†VW|0⟩|`.
pub fn exact_amplitude(v: &DenseOperator, w: &DenseOperator) -> Result<f64> {
    let psi = w.apply_to_vector(&unit(w.dim()));
    let vpsi = v.apply_to_vector(&psi);
    Ok(psi
        .iter()
        .zip(&vpsi)
        .map(|(a, b)| a.conj() * b)
        .sum::<crate::simkern::C64>()
        .norm())
}

fn unit(dim: usize) -> Vec<crate::simkern::C64> {
    let mut e = vec![re(0.0); dim];
    e[0] = re(1.0);
    e
}

/// Amplitude estimation of `|⟨0|W†VW|0⟩|` to accuracy `eps`.
#[derive(Clone, Debug)]
pub struct AmplitudeEstimator {
    sampler: PhaseSampler,
    v_charges: Charges,
    w_charges: Charges,
    eps: f64,
}

impl AmplitudeEstimator {
    pub fn new(
        v: &QueryCountedUnitary,
        w: &QueryCountedUnitary,
        eps: f64,
        backend: QpeBackend,
    ) -> Result<Self> {
        let t = register_width(2.0 * eps)?;
        let s = ae_operator(v.matrix(), w.matrix())?;
        let sampler = PhaseSampler::new(&s, w.matrix(), t, backend)?;
        Ok(Self {
            sampler,
            v_charges: v.charges().clone(),
            w_charges: w.charges().clone(),
            eps,
        })
    }

    pub fn t(&self) -> usize {
        self.sampler.t()
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn sampler(&self) -> &PhaseSampler {
        &self.sampler
    }

    /// Applications of `S` in one run.
    pub fn s_applications(&self) -> u64 {
        (1u64 << self.t()) - 1
    }

    /// One run: `r̃ = |cos(θ̃/2)|`. Each application of `S` costs two queries
    /// to `V` and four to `W`; state preparation costs one more `W`.
    pub fn run(&self, rng: &mut SimRng) -> f64 {
        let k = self.s_applications();
        self.v_charges.charge(2 * k);
        self.w_charges.charge(4 * k + 1);
        let theta = self.sampler.sample(rng);
        (0.5 * theta).cos().abs()
    }

    fn tracked(&self) -> [&Charges; 2] {
        [&self.v_charges, &self.w_charges]
    }
}

pub fn amplitude_estimate(
    n: usize,
    eps: f64,
    v: &QueryCountedUnitary,
    w: &QueryCountedUnitary,
    seed: u64,
) -> Result<f64> {
    for op in [v, w] {
        if op.n_qubits() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: op.n_qubits(),
            });
        }
    }
    let ae = AmplitudeEstimator::new(v, w, eps, QpeBackend::Auto)?;
    Ok(ae.run(&mut seeded(seed)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimationResult {
    pub value: f64,
    /// Counter deltas over the run, keyed by oracle label.
    pub query_counts: BTreeMap<String, u64>,
    pub trials_used: usize,
    pub target_eps: f64,
}

impl EstimationResult {
    pub fn queries(&self, label: &str) -> u64 {
        self.query_counts.get(label).copied().unwrap_or(0)
    }
}

/// Expectation `⟨0|V†MV|0⟩` from block access to `M`: amplitude estimation
/// on `c-(M/α_M)` with preparer `1_{a_M} ⊗ H ⊗ V`, then `ũ = α_M(2r̃ − 1)`.
#[derive(Clone, Debug)]
pub struct BevhmPlan {
    ae: AmplitudeEstimator,
    alpha: f64,
    eps: f64,
    amplitude: f64,
    register_qubits: usize,
}

impl BevhmPlan {
    pub fn new(
        block_m: &BlockAccess,
        v: &QueryCountedUnitary,
        eps: f64,
        backend: QpeBackend,
    ) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::invalid(format!("eps must be positive, got {eps}")));
        }
        if v.n_qubits() != block_m.n {
            return Err(Error::DimensionMismatch {
                expected: block_m.n,
                found: v.n_qubits(),
            });
        }
        let controlled = control_block_inexact(block_m)?;
        let a = block_m.ancillas;
        let prep = DenseOperator::identity(a)
            .kron(&DenseOperator::hadamard())
            .kron(v.matrix());
        let w = QueryCountedUnitary::composite(prep, "W", v.charges().clone())?;
        let ae = AmplitudeEstimator::new(&controlled.u, &w, eps / (2.0 * block_m.alpha), backend)?;
        let amplitude = exact_amplitude(controlled.u.matrix(), w.matrix())?;
        Ok(Self {
            ae,
            alpha: block_m.alpha,
            eps,
            amplitude,
            register_qubits: controlled.u.n_qubits(),
        })
    }

    /// `α(2r − 1)` for the exact amplitude `r`: the expectation of the
    /// matrix actually encoded by `U_M`.
    pub fn encoded_expectation(&self) -> f64 {
        self.alpha * (2.0 * self.amplitude - 1.0)
    }

    pub fn amplitude_estimator(&self) -> &AmplitudeEstimator {
        &self.ae
    }

    /// Qubits acted on by `c-(M/α_M)`: `n + a_M + 1`.
    pub fn register_qubits(&self) -> usize {
        self.register_qubits
    }

    pub fn run(&self, rng: &mut SimRng) -> EstimationResult {
        let ledger = QueryLedger::snapshot(self.ae.tracked());
        let r = self.ae.run(rng);
        EstimationResult {
            value: self.alpha * (2.0 * r - 1.0),
            query_counts: ledger.deltas(),
            trials_used: 1,
            target_eps: self.eps,
        }
    }

    /// The run for trial `trial` of an experiment seeded with `seed`.
    pub fn run_trial(&self, seed: u64, trial: u64) -> EstimationResult {
        self.run(&mut trial_rng(seed, trial))
    }
}

pub fn bevhm(
    n: usize,
    block_m: &BlockAccess,
    eps: f64,
    v: &QueryCountedUnitary,
    seed: u64,
) -> Result<EstimationResult> {
    if block_m.n != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: block_m.n,
        });
    }
    Ok(BevhmPlan::new(block_m, v, eps, QpeBackend::Auto)?.run(&mut seeded(seed)))
}

/// B-EVHM on the walk encoding of `sparse`, each half of the error budget
/// going to the encoding and to the estimate.
pub fn sevhm_plan(
    sparse: &SparseAccess,
    eps: f64,
    v: &QueryCountedUnitary,
    backend: QpeBackend,
) -> Result<BevhmPlan> {
    if !(eps > 0.0) {
        return Err(Error::invalid(format!("eps must be positive, got {eps}")));
    }
    let block = sparse_to_block(sparse, eps / 2.0)?;
    let mut plan = BevhmPlan::new(&block, v, eps / 2.0, backend)?;
    plan.eps = eps;
    Ok(plan)
}

pub fn sevhm(
    n: usize,
    sparse: &SparseAccess,
    eps: f64,
    v: &QueryCountedUnitary,
    seed: u64,
) -> Result<EstimationResult> {
    if sparse.n != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: sparse.n,
        });
    }
    Ok(sevhm_plan(sparse, eps, v, QpeBackend::Auto)?.run(&mut seeded(seed)))
}

/// Median of `values`; the upper median for even lengths.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

/// Median of `repetitions` independent runs, run `i` drawing from
/// `trial_rng(seed, i)`.
pub fn boost_median<F>(repetitions: usize, seed: u64, mut estimator: F) -> Result<f64>
where
    F: FnMut(&mut SimRng) -> Result<f64>,
{
    if repetitions == 0 || repetitions % 2 == 0 {
        return Err(Error::invalid(format!(
            "repetitions must be odd and positive, got {repetitions}"
        )));
    }
    let values = (0..repetitions as u64)
        .map(|i| estimator(&mut trial_rng(seed, i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(median(&values))
}
