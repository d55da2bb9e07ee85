use crate::report::Row;
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Least squares of `ln(queries)` against `ln(1/eps)`.
pub fn fit_scaling(points: &[(f64, f64)]) -> Result<Fit, CliError> {
    let mut distinct: Vec<f64> = points.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(CliError::Config(format!(
            "a scaling fit needs at least 3 distinct eps values, got {}",
            distinct.len()
        )));
    }
    if let Some(&(e, q)) = points.iter().find(|(e, q)| !(*e > 0.0 && *q > 0.0)) {
        return Err(CliError::Config(format!("cannot take logs of eps = {e}, queries = {q}")));
    }
    let xs: Vec<f64> = points.iter().map(|p| (1.0 / p.0).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(Fit { slope, intercept, r2 })
}

/// `(eps, count)` pairs from the trial rows, using the query column `column`.
pub fn points_from_rows(rows: &[Row], column: &str) -> Vec<(f64, f64)> {
    rows.iter()
        .filter(|r| r.kind == "trial")
        .filter_map(|r| Some((r.eps?, r.query(column)? as f64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let pts: Vec<_> = [0.2, 0.1, 0.05, 0.025].iter().map(|&e| (e, 100.0 / e)).collect();
        let f = fit_scaling(&pts).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-9);
        assert!((f.intercept - 100f64.ln()).abs() < 1e-9);
        assert!((f.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_queries_give_zero_slope() {
        let pts: Vec<_> = [0.3, 0.2, 0.1].iter().map(|&e| (e, 7.0)).collect();
        assert!(fit_scaling(&pts).unwrap().slope.abs() < 1e-12);
    }

    #[test]
    fn too_few_points() {
        assert!(fit_scaling(&[(0.1, 10.0), (0.2, 5.0)]).is_err());
        assert!(fit_scaling(&[(0.1, 10.0), (0.1, 11.0), (0.2, 5.0)]).is_err());
    }
}
