use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use super::experiment::ResultRow;
use crate::error::Result;

/// Mean and standard error `s / √k`; the error is absent for a single trial.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub std_error: Option<f64>,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let k = values.len();
        if k == 0 {
            return Self { mean: f64::NAN, std_error: None };
        }
        let mean = values.iter().sum::<f64>() / k as f64;
        let std_error = (k > 1).then(|| {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
            (var / k as f64).sqrt()
        });
        Self { mean, std_error }
    }
}

/// Per `(configuration, alpha, iteration)` summary over successful trials.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AggregateRow {
    pub link: String,
    pub input: String,
    pub subspace: String,
    pub kernel: String,
    pub alpha: f64,
    pub iteration: usize,
    pub trials: usize,
    pub failed: usize,
    pub test_mse_mean: f64,
    pub test_mse_se: Option<f64>,
    pub sin_theta_mean: f64,
    pub sin_theta_se: Option<f64>,
    pub eig1_mean: f64,
    pub eig1_se: Option<f64>,
    pub eig2_mean: f64,
    pub eig2_se: Option<f64>,
    pub eig3_mean: f64,
    pub eig3_se: Option<f64>,
}

type GroupKey = (String, String, String, String, u64, usize);

/// Groups rows and summarizes each metric. Groups are ordered by
/// configuration, then alpha, then iteration.
pub fn aggregate(rows: &[ResultRow]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<GroupKey, Vec<&ResultRow>> = BTreeMap::new();
    for row in rows {
        // Non-negative floats order like their bit patterns.
        let key = (
            row.link.clone(),
            row.input.clone(),
            row.subspace.clone(),
            row.kernel.clone(),
            row.alpha.to_bits(),
            row.iteration,
        );
        groups.entry(key).or_default().push(row);
    }
    groups
        .into_iter()
        .map(|((link, input, subspace, kernel, alpha, iteration), members)| {
            let ok: Vec<&ResultRow> = members.iter().copied().filter(|r| r.is_ok()).collect();
            let summary = |f: fn(&ResultRow) -> f64| Summary::of(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
            let mse = summary(|r| r.test_mse);
            let sin = summary(|r| r.sin_theta);
            let e1 = summary(|r| r.eig1);
            let e2 = summary(|r| r.eig2);
            let e3 = summary(|r| r.eig3);
            AggregateRow {
                link,
                input,
                subspace,
                kernel,
                alpha: f64::from_bits(alpha),
                iteration,
                trials: ok.len(),
                failed: members.len() - ok.len(),
                test_mse_mean: mse.mean,
                test_mse_se: mse.std_error,
                sin_theta_mean: sin.mean,
                sin_theta_se: sin.std_error,
                eig1_mean: e1.mean,
                eig1_se: e1.std_error,
                eig2_mean: e2.mean,
                eig2_se: e2.std_error,
                eig3_mean: e3.mean,
                eig3_se: e3.std_error,
            }
        })
        .collect()
}

/// Absent standard errors are written as empty fields.
pub fn write_aggregate_csv(rows: &[AggregateRow], path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(alpha: f64, trial: usize, iteration: usize, mse: f64) -> ResultRow {
        ResultRow {
            link: "L1".into(),
            input: "hypercube".into(),
            subspace: "haar".into(),
            kernel: "gaussian".into(),
            alpha,
            trial,
            iteration,
            n: 10,
            test_mse: mse,
            sin_theta: mse / 2.0,
            eig1: 3.0,
            eig2: 2.0,
            eig3: 1.0,
            seed: 0,
            runtime_s: 0.0,
            status: "ok".into(),
        }
    }

    #[test]
    fn summary_examples() {
        assert_eq!(Summary::of(&[0.7]), Summary { mean: 0.7, std_error: None });
        assert_eq!(Summary::of(&[2.0, 2.0]), Summary { mean: 2.0, std_error: Some(0.0) });
        let s = Summary::of(&[0.0, 1.0]);
        assert_eq!(s.mean, 0.5);
        assert!((s.std_error.unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn groups_by_alpha_and_iteration() {
        let mut rows = vec![row(1.2, 0, 0, 1.0), row(1.0, 0, 0, 0.0), row(1.0, 1, 0, 1.0), row(1.0, 0, 1, 4.0)];
        let mut failed = row(1.0, 2, 0, f64::NAN);
        failed.status = "failed: singular".into();
        rows.push(failed);
        let agg = aggregate(&rows);
        let keys: Vec<(f64, usize)> = agg.iter().map(|a| (a.alpha, a.iteration)).collect();
        assert_eq!(keys, vec![(1.0, 0), (1.0, 1), (1.2, 0)]);
        assert_eq!(agg[0].trials, 2);
        assert_eq!(agg[0].failed, 1);
        assert_eq!(agg[0].test_mse_mean, 0.5);
        assert!(agg[1].test_mse_se.is_none());
    }

    #[test]
    fn absent_error_is_an_empty_field() {
        let agg = aggregate(&[row(1.0, 0, 0, 0.3)]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("agg.csv");
        write_aggregate_csv(&agg, &p).unwrap();
        let text = std::fs::read_to_string(p).unwrap();
        let line = text.lines().nth(1).unwrap();
        assert!(line.contains("0.3,,"), "{line}");
    }
}
