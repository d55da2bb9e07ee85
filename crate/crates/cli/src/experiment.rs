use std::path::Path;

use blockev::blockenc::{dilate_exact, BlockAccess, SparseAccess};
use blockev::estimate::{sevhm_plan, BevhmPlan, EstimationResult, QpeBackend};
use blockev::oracle::{FunctionOracle, QueryCountedUnitary, DEFAULT_VALUE_BITS};
use blockev::reduce::{AMInstance, MeanPlan};
use blockev::rng::seeded;
use blockev::simkern::{state_preparation, DenseOperator};
use blockev::slep::{classical_solve, parse_slep, SlepData, SlepPlan};
use blockev::sparsemat::{
    build_matrix_encoding, encoding_oracles, parse_encoding, plus_expectation, write_encoding, MatrixEncoding,
};

use crate::config::{Command, ExperimentConfig, Generator};
use crate::fit::{fit_scaling, points_from_rows};
use crate::report::{summary, Row};
use crate::CliError;

/// What a command produces: CSV rows, or an instance file for `encode`.
#[derive(Clone, Debug, PartialEq)]
pub enum Artifact {
    Rows(Vec<Row>),
    Text(String),
}

impl Artifact {
    pub fn render(&self) -> Result<String, CliError> {
        match self {
            Artifact::Rows(rows) => crate::report::to_csv(rows),
            Artifact::Text(t) => Ok(t.clone()),
        }
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<Artifact, CliError> {
    cfg.validate()?;
    match cfg.command {
        Command::Evhm => evhm(cfg).map(Artifact::Rows),
        Command::Scaling => scaling(cfg).map(Artifact::Rows),
        Command::Sevhm => sevhm(cfg).map(Artifact::Rows),
        Command::Reduce => reduce(cfg).map(Artifact::Rows),
        Command::Slep => slep(cfg).map(Artifact::Rows),
        Command::Encode => encode(cfg).map(Artifact::Text),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Trial rows for one eps value followed by their summary row.
fn trial_block(
    cfg: &ExperimentConfig,
    eps: f64,
    truth: f64,
    mut one: impl FnMut(u64) -> (f64, EstimationResult),
) -> Vec<Row> {
    let mut rows: Vec<Row> = (0..cfg.trials as u64)
        .map(|t| {
            let (estimate, r) = one(t);
            Row::trial(cfg.seed, t, eps, estimate, truth, &r)
        })
        .collect();
    rows.push(summary(cfg.seed, eps, truth, &rows));
    rows
}

/// `M`, `V` and the exact `⟨0|V†MV|0⟩` for the expectation commands.
struct EvhmInstance {
    block_m: BlockAccess,
    v: QueryCountedUnitary,
    truth: f64,
}

fn evhm_instance(cfg: &ExperimentConfig) -> Result<EvhmInstance, CliError> {
    let data = match &cfg.instance {
        Some(path) => parse_slep(&read(path)?)?,
        None => {
            let g = cfg.generator_or_default();
            SlepData::random(g.n, 1.0, 1.0, g.alpha_m, g.alpha_m, &mut seeded(g.instance_seed))?
        }
    };
    let block_m = dilate_exact(&data.m, data.alpha_m, "U_M")?;
    let v = QueryCountedUnitary::new(state_preparation(&data.b)?, "V")?;
    let truth = data.m.sandwich(&data.b, &data.b).re;
    Ok(EvhmInstance { block_m, v, truth })
}

fn evhm_rows(cfg: &ExperimentConfig, inst: &EvhmInstance, eps_list: &[f64]) -> Result<Vec<Row>, CliError> {
    let mut rows = Vec::new();
    for &eps in eps_list {
        let plan = BevhmPlan::new(&inst.block_m, &inst.v, eps, QpeBackend::Auto)?;
        rows.extend(trial_block(cfg, eps, inst.truth, |t| {
            let r = plan.run_trial(cfg.seed, t);
            (r.value, r)
        }));
    }
    Ok(rows)
}

fn evhm(cfg: &ExperimentConfig) -> Result<Vec<Row>, CliError> {
    let inst = evhm_instance(cfg)?;
    evhm_rows(cfg, &inst, &cfg.eps)
}

/// `evhm` over eps values given relative to `α_M`, plus a `fit` row for the
/// `U_M` counts.
fn scaling(cfg: &ExperimentConfig) -> Result<Vec<Row>, CliError> {
    let inst = evhm_instance(cfg)?;
    let eps: Vec<f64> = cfg.eps.iter().map(|e| e * inst.block_m.alpha).collect();
    let mut rows = evhm_rows(cfg, &inst, &eps)?;
    let fit = fit_scaling(&points_from_rows(&rows, "U_M"))?;
    rows.push(Row {
        kind: "fit",
        seed: Some(cfg.seed),
        slope: Some(fit.slope),
        ..Row::default()
    });
    Ok(rows)
}

fn random_encoding(g: &Generator, beta: f64) -> Result<MatrixEncoding, CliError> {
    if g.n >= usize::BITS as usize - 1 {
        return Err(blockev::Error::RegisterBudget {
            requested: g.n,
            limit: blockev::simkern::MAX_OPERATOR_QUBITS,
        }
        .into());
    }
    let len = (g.d << g.n) >> 1;
    let f = FunctionOracle::random(len, beta, DEFAULT_VALUE_BITS, "f", &mut seeded(g.instance_seed))?;
    Ok(MatrixEncoding::new(g.n, g.d, f)?)
}

fn load_encoding(cfg: &ExperimentConfig, beta: Option<f64>) -> Result<MatrixEncoding, CliError> {
    match &cfg.instance {
        Some(path) => Ok(parse_encoding(&read(path)?, "f")?),
        None => {
            let g = cfg.generator_or_default();
            random_encoding(&g, beta.unwrap_or(g.beta))
        }
    }
}

fn sevhm(cfg: &ExperimentConfig) -> Result<Vec<Row>, CliError> {
    let enc = load_encoding(cfg, None)?;
    let sparse: SparseAccess = encoding_oracles(&enc)?;
    let v = QueryCountedUnitary::new(DenseOperator::hadamard_all(enc.n), "V")?;
    let truth = plus_expectation(&build_matrix_encoding(&enc));
    let mut rows = Vec::new();
    for &eps in &cfg.eps {
        let plan = sevhm_plan(&sparse, eps, &v, QpeBackend::Auto)?;
        rows.extend(trial_block(cfg, eps, truth, |t| {
            let r = plan.run_trial(cfg.seed, t);
            (r.value, r)
        }));
    }
    Ok(rows)
}

fn reduce(cfg: &ExperimentConfig) -> Result<Vec<Row>, CliError> {
    let enc = load_encoding(cfg, Some(1.0))?;
    let truth = enc.g.mean();
    let mut rows = Vec::new();
    for &eps in &cfg.eps {
        let am = AMInstance::new(enc.g.clone(), eps)?;
        let plan = MeanPlan::new(&am, enc.n, enc.d, QpeBackend::Auto)?;
        rows.extend(trial_block(cfg, eps, truth, |t| plan.run_trial(cfg.seed, t)));
    }
    Ok(rows)
}

fn slep(cfg: &ExperimentConfig) -> Result<Vec<Row>, CliError> {
    let mut data = match (&cfg.instance, &cfg.generator) {
        (Some(path), _) => parse_slep(&read(path)?)?,
        (None, Some(g)) => SlepData::random(g.n, g.kappa, g.alpha_a, g.alpha_m, cfg.eps[0], &mut seeded(g.instance_seed))?,
        (None, None) => SlepData::z_x_plus(cfg.eps[0]),
    };
    let mut rows = Vec::new();
    for &eps in &cfg.eps {
        data.eps = eps;
        let inst = data.instance()?;
        let truth = classical_solve(&inst)?.value;
        let plan = SlepPlan::new(&inst, QpeBackend::Auto)?;
        rows.extend(trial_block(cfg, eps, truth, |t| {
            let r = plan.run_trial(cfg.seed, t);
            (r.value, r)
        }));
    }
    Ok(rows)
}

fn encode(cfg: &ExperimentConfig) -> Result<String, CliError> {
    let g = cfg.generator_or_default();
    Ok(write_encoding(&random_encoding(&g, g.beta)?))
}
