use blockev::estimate::{median, EstimationResult};
use serde::Serialize;

use crate::CliError;

/// Oracle labels with a query column, in column order.
pub const QUERY_LABELS: [&str; 7] = ["U_M", "U_A", "U_b", "V", "O_val", "O_loc", "f"];

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Row {
    pub kind: &'static str,
    pub seed: Option<u64>,
    pub trial: Option<u64>,
    pub eps: Option<f64>,
    pub estimate: Option<f64>,
    pub truth: Option<f64>,
    pub abs_error: Option<f64>,
    pub success: Option<bool>,
    #[serde(rename = "q_U_M")]
    pub q_u_m: Option<u64>,
    #[serde(rename = "q_U_A")]
    pub q_u_a: Option<u64>,
    #[serde(rename = "q_U_b")]
    pub q_u_b: Option<u64>,
    #[serde(rename = "q_V")]
    pub q_v: Option<u64>,
    #[serde(rename = "q_O_val")]
    pub q_o_val: Option<u64>,
    #[serde(rename = "q_O_loc")]
    pub q_o_loc: Option<u64>,
    pub q_f: Option<u64>,
    pub success_rate: Option<f64>,
    pub median_abs_error: Option<f64>,
    pub slope: Option<f64>,
}

impl Row {
    pub fn trial(seed: u64, trial: u64, eps: f64, estimate: f64, truth: f64, r: &EstimationResult) -> Self {
        let abs_error = (estimate - truth).abs();
        let mut row = Self {
            kind: "trial",
            seed: Some(seed),
            trial: Some(trial),
            eps: Some(eps),
            estimate: Some(estimate),
            truth: Some(truth),
            abs_error: Some(abs_error),
            success: Some(abs_error <= eps),
            ..Self::default()
        };
        for label in QUERY_LABELS {
            *row.query_slot(label).unwrap() = Some(r.queries(label));
        }
        row
    }

    fn query_slot(&mut self, label: &str) -> Option<&mut Option<u64>> {
        Some(match label {
            "U_M" => &mut self.q_u_m,
            "U_A" => &mut self.q_u_a,
            "U_b" => &mut self.q_u_b,
            "V" => &mut self.q_v,
            "O_val" => &mut self.q_o_val,
            "O_loc" => &mut self.q_o_loc,
            "f" => &mut self.q_f,
            _ => return None,
        })
    }

    pub fn query(&self, label: &str) -> Option<u64> {
        self.clone().query_slot(label).and_then(|s| *s)
    }
}

/// Summary over the trial rows of one eps value.
pub fn summary(seed: u64, eps: f64, truth: f64, trials: &[Row]) -> Row {
    let hits = trials.iter().filter(|r| r.success == Some(true)).count();
    let errors: Vec<f64> = trials.iter().filter_map(|r| r.abs_error).collect();
    Row {
        kind: "summary",
        seed: Some(seed),
        eps: Some(eps),
        truth: Some(truth),
        success_rate: Some(hits as f64 / trials.len().max(1) as f64),
        median_abs_error: (!errors.is_empty()).then(|| median(&errors)),
        ..Row::default()
    }
}

pub fn to_csv(rows: &[Row]) -> Result<String, CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| CliError::Output(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Output(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Output(e.to_string()))
}
