//! Mean estimation (AM) reduced to sparse expectation values, and the
//! fixed-preparer form of block expectation values.

use crate::blockenc::{BlockAccess, SparseAccess};
use crate::error::{Error, Result};
use crate::estimate::{sevhm_plan, BevhmPlan, EstimationResult, QpeBackend};
use crate::oracle::{Charges, FunctionOracle, QueryCountedUnitary};
use crate::rng::{seeded, trial_rng, SimRng};
use crate::simkern::DenseOperator;
use crate::sparsemat::{encoding_oracles, mean_from_expectation, plus_expectation, MatrixEncoding};

/// Estimate the mean of `f: [N] → [0, 1]` to additive error `eps`.
#[derive(Clone, Debug)]
pub struct AMInstance {
    pub eps: f64,
    pub f: FunctionOracle,
}

impl AMInstance {
    pub fn new(f: FunctionOracle, eps: f64) -> Result<Self> {
        if (f.beta() - 1.0).abs() > 1e-12 {
            return Err(Error::promise(format!("AM needs range [0, 1], got [0, {}]", f.beta())));
        }
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::promise(format!("eps = {eps} outside (0, 1]")));
        }
        Ok(Self { eps, f })
    }

    pub fn domain_size(&self) -> usize {
        self.f.len()
    }

    /// `eps > 1/(2N)`. Smaller values are still runnable; below this the
    /// problem is solved exactly by reading every value.
    pub fn in_problem_range(&self) -> bool {
        self.eps > 1.0 / (2.0 * self.domain_size() as f64)
    }
}

/// Estimate the mean of `g: [N] → [0, β]` to additive error `eps`.
#[derive(Clone, Debug)]
pub struct SAMInstance {
    pub eps: f64,
    pub beta: f64,
    pub g: FunctionOracle,
}

impl SAMInstance {
    pub fn new(g: FunctionOracle, eps: f64) -> Result<Self> {
        let beta = g.beta();
        if !(eps > 0.0 && eps < beta) {
            return Err(Error::promise(format!("eps = {eps} outside (0, {beta})")));
        }
        Ok(Self { eps, beta, g })
    }

    pub fn domain_size(&self) -> usize {
        self.g.len()
    }

    /// `eps ≥ β/(2N)`.
    pub fn in_problem_range(&self) -> bool {
        self.eps >= self.beta / (2.0 * self.domain_size() as f64)
    }
}

/// `g = β·f`, one `f` query per `g` query. A SAM answer divided by `β`
/// answers the AM instance.
pub fn am_to_sam(am: &AMInstance, beta: f64) -> Result<SAMInstance> {
    let g = am.f.rescaled(beta / am.f.beta(), "g")?;
    // eps = 1 maps onto the open end of the SAM range; kept as is.
    Ok(SAMInstance {
        eps: am.eps * beta,
        beta,
        g,
    })
}

/// S-EVHM instance produced from a SAM instance: sparse access to the
/// encoding matrix `M` of `g`, preparer `H^⊗n`, and the accuracy at which
/// an S-EVHM answer converts back into a SAM answer.
#[derive(Clone, Debug)]
pub struct SevhmReduction {
    pub encoding: MatrixEncoding,
    pub sparse: SparseAccess,
    pub v: QueryCountedUnitary,
    /// `d·ε_SAM/2`, so that `|2ũ/d − μ_g| ≤ ε_SAM`.
    pub eps: f64,
}

impl SevhmReduction {
    /// `2ũ/d`.
    pub fn recover(&self, expectation: f64) -> f64 {
        mean_from_expectation(self.encoding.d, expectation)
    }

    /// The recovered mean when the estimator is replaced by the exact
    /// `⟨+^n|M|+^n⟩`.
    pub fn exact_mean(&self) -> f64 {
        self.recover(plus_expectation(&self.sparse.to_dense()))
    }
}

pub fn sam_to_sevhm(sam: &SAMInstance, n: usize, d: usize) -> Result<SevhmReduction> {
    if n == 0 || d == 0 || d > 1 << n {
        return Err(Error::invalid(format!("sparsity {d} invalid for n = {n}")));
    }
    let want = (d << n) >> 1;
    if sam.domain_size() != want {
        return Err(Error::DimensionMismatch {
            expected: want,
            found: sam.domain_size(),
        });
    }
    let encoding = MatrixEncoding::new(n, d, sam.g.clone())?;
    let sparse = encoding_oracles(&encoding)?;
    let v = QueryCountedUnitary::new(DenseOperator::hadamard_all(n), "V")?;
    Ok(SevhmReduction {
        encoding,
        sparse,
        v,
        eps: d as f64 * sam.eps / 2.0,
    })
}

/// The AM → SAM → S-EVHM chain with its estimator built once.
#[derive(Clone, Debug)]
pub struct MeanPlan {
    pub reduction: SevhmReduction,
    beta: f64,
    plan: BevhmPlan,
}

impl MeanPlan {
    /// `β` is chosen as 1, so `g = f` up to the extra counter.
    pub fn new(am: &AMInstance, n: usize, d: usize, backend: QpeBackend) -> Result<Self> {
        let beta = 1.0;
        let sam = am_to_sam(am, beta)?;
        let reduction = sam_to_sevhm(&sam, n, d)?;
        let plan = sevhm_plan(&reduction.sparse, reduction.eps, &reduction.v, backend)?;
        Ok(Self {
            reduction,
            beta,
            plan,
        })
    }

    pub fn bevhm(&self) -> &BevhmPlan {
        &self.plan
    }

    /// Recovered `μ̃_f` and the S-EVHM run it came from.
    pub fn run(&self, rng: &mut SimRng) -> (f64, EstimationResult) {
        let r = self.plan.run(rng);
        (self.reduction.recover(r.value) / self.beta, r)
    }

    pub fn run_trial(&self, seed: u64, trial: u64) -> (f64, EstimationResult) {
        self.run(&mut trial_rng(seed, trial))
    }
}

pub fn end_to_end_mean(am: &AMInstance, n: usize, d: usize, seed: u64) -> Result<f64> {
    let plan = MeanPlan::new(am, n, d, QpeBackend::Auto)?;
    Ok(plan.run(&mut seeded(seed)).0)
}

/// Block access `(α_M, a_M, 0)` to `F = V_n V† M V V_n†`, realized as the
/// sandwich `(1 ⊗ V_nV†)·U_M·(1 ⊗ VV_n†)`. One query to `U_M` and two to `V`
/// per application. Then `⟨0|V†MV|0⟩ = ⟨0|V_n†FV_n|0⟩`.
pub fn conjugate_block(
    b: &BlockAccess,
    v: &QueryCountedUnitary,
    v_fixed: &DenseOperator,
) -> Result<BlockAccess> {
    for found in [v.n_qubits(), v_fixed.n_qubits()] {
        if found != b.n {
            return Err(Error::DimensionMismatch { expected: b.n, found });
        }
    }
    let a = b.ancillas;
    let right = DenseOperator::identity(a).kron(&v.matrix().compose(&v_fixed.adjoint())?);
    let left = right.adjoint();
    let op = left.compose(b.u.matrix())?.compose(&right)?;
    let charges = Charges::combined(&[(b.u.charges(), 1), (v.charges(), 2)]);
    let u = QueryCountedUnitary::composite(op, format!("{}^V", b.u.label()), charges)?;
    BlockAccess::new(b.alpha, a, b.delta, u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockenc::{dilate_exact, verify_block_encoding};
    use crate::estimate::BevhmPlan;
    use crate::oracle::DEFAULT_VALUE_BITS;
    use crate::simkern::{c, re};
    use rand::{Rng, SeedableRng};

    fn table(values: &[f64], beta: f64) -> FunctionOracle {
        FunctionOracle::from_values(values, beta, DEFAULT_VALUE_BITS, "f").unwrap()
    }

    #[test]
    fn am_to_sam_examples() {
        let zero = AMInstance::new(table(&[0.0; 4], 1.0), 0.5).unwrap();
        assert_eq!(am_to_sam(&zero, 3.0).unwrap().g.mean(), 0.0);

        let one = AMInstance::new(table(&[1.0; 4], 1.0), 0.5).unwrap();
        assert!((am_to_sam(&one, 2.5).unwrap().g.mean() - 2.5).abs() < 1e-12);

        let am = AMInstance::new(table(&[0.0, 1.0, 1.0, 0.0], 1.0), 0.2).unwrap();
        let sam = am_to_sam(&am, 2.0).unwrap();
        assert!((sam.g.mean() - 1.0).abs() < 1e-12);
        assert!((sam.g.mean() / 2.0 - 0.5).abs() < 1e-12);
        assert!((sam.eps - 0.4).abs() < 1e-15);
        sam.g.query(2);
        assert_eq!(am.f.queries(), 1);
    }

    #[test]
    fn instance_ranges() {
        let f = table(&[0.5; 4], 1.0);
        assert!(!AMInstance::new(f.clone(), 0.125).unwrap().in_problem_range());
        assert!(AMInstance::new(f.clone(), 0.2).unwrap().in_problem_range());
        assert!(AMInstance::new(f.clone(), 1.5).is_err());
        assert!(AMInstance::new(f.clone(), 0.0).is_err());
        assert!(AMInstance::new(table(&[0.5; 4], 2.0), 0.5).is_err());
        assert!(SAMInstance::new(table(&[0.5; 4], 2.0), 2.0).is_err());
        assert!(SAMInstance::new(table(&[0.5; 4], 2.0), 0.25).unwrap().in_problem_range());
        assert!(!SAMInstance::new(table(&[0.5; 4], 2.0), 0.2).unwrap().in_problem_range());
    }

    #[test]
    fn exact_tier_recovers_means() {
        let g = table(&[0.4, 0.8, 0.2, 0.6], 1.0);
        let sam = SAMInstance::new(g, 0.1).unwrap();
        let red = sam_to_sevhm(&sam, 2, 2).unwrap();
        assert!((plus_expectation(&red.sparse.to_dense()) - 0.5).abs() < 1e-12);
        assert!((red.exact_mean() - 0.5).abs() < 1e-12);

        let flat = SAMInstance::new(table(&[1.5; 8], 1.5), 0.2).unwrap();
        assert!((sam_to_sevhm(&flat, 3, 2).unwrap().exact_mean() - 1.5).abs() < 1e-12);

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let vals: Vec<f64> = (0..16).map(|_| rng.random::<f64>()).collect();
        let sam = SAMInstance::new(table(&vals, 1.0), 0.1).unwrap();
        let red = sam_to_sevhm(&sam, 3, 4).unwrap();
        assert!((red.exact_mean() - sam.g.mean()).abs() < 1e-12);
        assert!((red.eps - 0.2).abs() < 1e-15);
        assert_eq!(sam.g.queries(), 0);
    }

    #[test]
    fn domain_mismatch_rejected() {
        let sam = SAMInstance::new(table(&[0.5; 6], 1.0), 0.2).unwrap();
        assert!(matches!(
            sam_to_sevhm(&sam, 2, 2),
            Err(Error::DimensionMismatch { expected: 4, found: 6 })
        ));
    }

    #[test]
    fn end_to_end_constant_and_counts() {
        let am = AMInstance::new(table(&[0.5; 4], 1.0), 0.1).unwrap();
        let plan = MeanPlan::new(&am, 2, 2, QpeBackend::Auto).unwrap();
        let before = am.f.queries();
        let (mean, r) = plan.run_trial(1, 0);
        assert_eq!(am.f.queries() - before, r.queries("O_val"));
        assert_eq!(r.queries("O_val"), r.queries("g"));
        assert_eq!(r.queries("O_loc") * 2, r.queries("O_val"));
        let hits = (0..60)
            .filter(|&i| (plan.run_trial(2, i).0 - 0.5).abs() <= 0.1)
            .count();
        assert!(hits >= 40, "{hits} {mean}");
    }

    #[test]
    fn end_to_end_mean_is_seeded() {
        let am = AMInstance::new(table(&[0.0, 1.0, 1.0, 0.0], 1.0), 0.1).unwrap();
        let a = end_to_end_mean(&am, 2, 2, 9).unwrap();
        let b = end_to_end_mean(&am, 2, 2, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn conjugation_examples() {
        let z = dilate_exact(&DenseOperator::pauli_z(), 1.0, "U_M").unwrap();
        let h = QueryCountedUnitary::new(DenseOperator::hadamard(), "V").unwrap();
        let f = conjugate_block(&z, &h, &DenseOperator::identity(1)).unwrap();
        assert!(f.block().max_abs_diff(&DenseOperator::pauli_x()) < 1e-12);
        assert!(verify_block_encoding(&f, &DenseOperator::pauli_x()).unwrap() < 1e-12);

        let same = conjugate_block(&z, &h, &DenseOperator::hadamard()).unwrap();
        assert!(same.block().max_abs_diff(&DenseOperator::pauli_z()) < 1e-12);

        f.u.charge(1);
        assert_eq!((z.u.queries(), h.queries()), (1, 2));
        assert!(conjugate_block(&z, &h, &DenseOperator::identity(2)).is_err());
    }

    #[test]
    fn conjugation_preserves_expectation() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let dim = 4;
        let raw = nalgebra::DMatrix::from_fn(dim, dim, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let m = DenseOperator::from_matrix((&raw + raw.adjoint()) * re(0.5)).unwrap();
        let alpha = m.spectral_norm() * 1.2;
        let b = dilate_exact(&m, alpha, "U_M").unwrap();
        let v = QueryCountedUnitary::new(
            crate::simkern::state_preparation(&[c(0.6, 0.0), c(0.0, 0.48), c(0.0, 0.0), c(0.64, 0.0)]).unwrap(),
            "V",
        )
        .unwrap();
        let vn = DenseOperator::hadamard_all(2);
        let f = conjugate_block(&b, &v, &vn).unwrap();
        let target = v.matrix().adjoint().compose(&m).unwrap().compose(v.matrix()).unwrap().get(0, 0).re;
        let fm = f.block().scale(alpha);
        let moved = vn.adjoint().compose(&fm).unwrap().compose(&vn).unwrap().get(0, 0).re;
        assert!((target - moved).abs() < 1e-9);

        let vn_unitary = QueryCountedUnitary::new(vn, "V_n").unwrap();
        let eps = 0.1;
        let plan = BevhmPlan::new(&f, &vn_unitary, eps, QpeBackend::Auto).unwrap();
        assert!((plan.encoded_expectation() - target).abs() < 1e-9);
        let hits = (0..60)
            .filter(|&i| (plan.run_trial(3, i).value - target).abs() <= eps)
            .count();
        assert!(hits >= 40, "{hits}");
    }
}
