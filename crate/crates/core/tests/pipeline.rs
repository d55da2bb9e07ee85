mod common;

use blockev::blockenc::{sparse_to_block, verify_block_encoding, WALK_LOCATION_QUERIES, WALK_VALUE_QUERIES};
use blockev::estimate::{boost_median, sevhm, sevhm_plan, BevhmPlan, QpeBackend};
use blockev::oracle::{FunctionOracle, QueryCountedUnitary};
use blockev::reduce::{end_to_end_mean, AMInstance};
use blockev::rng::seeded;
use blockev::simkern::DenseOperator;
use blockev::slep::{classical_solve, parse_slep, solve_bslep, write_slep, SlepData, SlepPlan};
use blockev::sparsemat::{build_matrix_encoding, encoding_oracles, plus_expectation, MatrixEncoding};
use blockev::Error;
use common::*;

fn encoding(n: usize, d: usize, seed: u64) -> MatrixEncoding {
    let g = FunctionOracle::random((d << n) >> 1, 1.0, 16, "g", &mut seeded(seed)).unwrap();
    MatrixEncoding::new(n, d, g).unwrap()
}

#[test]
fn walk_encoding_of_matrix_encoding() {
    let enc = encoding(2, 3, 1);
    let sparse = encoding_oracles(&enc).unwrap();
    let m = build_matrix_encoding(&enc);
    assert!(sparse.to_dense().max_abs_diff(&m) < 1e-15);
    let block = sparse_to_block(&sparse, 1e-6).unwrap();
    assert!((block.alpha - 3.0).abs() < 1e-15);
    assert!(verify_block_encoding(&block, &m).unwrap() <= 1e-6);
    block.u.charge(1);
    assert_eq!(enc.g.queries(), WALK_VALUE_QUERIES);
    let loc = sparse.loc_charges().counters().next().unwrap().get();
    assert_eq!(loc, WALK_LOCATION_QUERIES);
}

#[test]
fn sevhm_on_plus_state() {
    let enc = encoding(2, 2, 2);
    let sparse = encoding_oracles(&enc).unwrap();
    let truth = plus_expectation(&build_matrix_encoding(&enc));
    let v = QueryCountedUnitary::new(DenseOperator::hadamard_all(2), "V").unwrap();
    let eps = 0.1;
    let plan = sevhm_plan(&sparse, eps, &v, QpeBackend::Auto).unwrap();
    let hits = (0..100).filter(|&t| (plan.run_trial(4, t).value - truth).abs() <= eps).count();
    assert!(hits >= 67, "{hits}");
    let once = sevhm(2, &sparse, eps, &v, 9).unwrap();
    assert!(once.queries("O_val") > 0);
    assert_eq!(once.queries("O_val"), 2 * once.queries("O_loc"));
}

#[test]
fn backends_agree() {
    let mut rng = seeded(3);
    let m = random_hermitian(1, 0.7, &mut rng);
    let v = QueryCountedUnitary::new(random_unitary(1, &mut rng), "V").unwrap();
    let b = blockev::blockenc::dilate_exact(&m, 1.0, "U_M").unwrap();
    let eps = 0.1;
    let circuit = BevhmPlan::new(&b, &v, eps, QpeBackend::Circuit { faithful: false }).unwrap();
    let spectral = BevhmPlan::new(&b, &v, eps, QpeBackend::Spectral).unwrap();
    let pc = circuit.amplitude_estimator().sampler().probabilities();
    let ps = spectral.amplitude_estimator().sampler().probabilities();
    let gap = pc.iter().zip(ps).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(gap < 1e-9, "{gap}");
}

#[test]
fn slep_file_round_trip_and_solve() {
    let mut rng = seeded(8);
    let data = SlepData::random(1, 2.0, 1.0, 1.0, 0.1, &mut rng).unwrap();
    let back = parse_slep(&write_slep(&data)).unwrap();
    assert_eq!(back.n, data.n);
    assert!(back.a.max_abs_diff(&data.a) < 1e-15);
    assert!(back.m.max_abs_diff(&data.m) < 1e-15);

    let inst = back.instance().unwrap();
    let truth = classical_solve(&inst).unwrap().value;
    let plan = SlepPlan::new(&inst, QpeBackend::Auto).unwrap();
    let est = boost_median(15, 21, |rng| Ok(plan.run(rng).value)).unwrap();
    assert!((est - truth).abs() <= 0.1, "{est} vs {truth}");
    let single = solve_bslep(&inst, 5).unwrap();
    assert!(single.queries("U_A") > single.queries("U_b"));
}

#[test]
fn slep_promises() {
    let mut data = SlepData::z_x_plus(0.1);
    data.kappa = 0.5;
    assert!(data.instance().is_err());
    let mut data = SlepData::z_x_plus(0.1);
    data.eps = 2.0;
    assert!(matches!(data.instance(), Err(Error::Promise(_))));
    let mut data = SlepData::z_x_plus(0.1);
    data.a = DenseOperator::pauli_z().scale(0.3);
    assert!(matches!(data.instance(), Err(Error::Promise(_))));
}

#[test]
fn mean_through_the_chain() {
    let f = FunctionOracle::from_values(&[0.0, 1.0, 1.0, 0.0], 1.0, 16, "f").unwrap();
    let am = AMInstance::new(f.clone(), 0.1).unwrap();
    let hits = (0..12)
        .filter(|&s| (end_to_end_mean(&am, 2, 2, s).unwrap() - 0.5).abs() <= 0.1)
        .count();
    assert!(hits >= 8, "{hits}");
    assert!(f.queries() > 0);
}
