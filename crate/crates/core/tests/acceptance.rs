//! End-to-end acceptance criteria. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails. Set `AGOP_ACCEPTANCE_SKIP=A8` (comma separated)
//! to skip criteria while iterating locally.

use std::process::ExitCode;
use std::time::Instant;

use agop::harness::{self, ExperimentConfig};
use agop::verify::{self, CheckRecord};

const SEED: u64 = 20_240_601;

struct Outcome {
    id: &'static str,
    passed: bool,
    runtime_s: f64,
    limit_s: Option<f64>,
    detail: String,
}

impl Outcome {
    fn from_check(id: &'static str, limit_s: f64, rec: CheckRecord) -> Self {
        let mut detail: Vec<String> = rec.scalars.iter().map(|(k, v)| format!("{k}={v:.4e}")).collect();
        if !rec.detail.is_empty() {
            detail.push(rec.detail);
        }
        Self { id, passed: rec.passed, runtime_s: rec.runtime_s, limit_s: Some(limit_s), detail: detail.join(" ") }
    }

    fn within_limit(&self) -> bool {
        self.limit_s.is_none_or(|l| self.runtime_s <= l)
    }

    fn print(&self) {
        let ok = self.passed && self.within_limit();
        let limit = self.limit_s.map_or_else(|| "none".to_string(), |l| format!("{l:.0}s"));
        let over = if self.within_limit() { "" } else { " [over time limit]" };
        println!(
            "{} {:<4} {:>8.2}s (limit {limit}){over}  {}",
            if ok { "PASS" } else { "FAIL" },
            self.id,
            self.runtime_s,
            self.detail
        );
    }
}

/// A8, A9 and A11 share one experiment: the default grid, run twice.
fn experiment_criteria() -> Vec<Outcome> {
    let cfg = ExperimentConfig { record_runtime: false, base_seed: 0, ..Default::default() };
    let dir = tempfile::tempdir().expect("temp dir");
    let mut bytes = Vec::new();
    let mut first_run = None;
    let mut rows = Vec::new();
    for run in 0..2 {
        let start = Instant::now();
        let result = harness::run_experiment(&cfg, 1).and_then(|r| {
            let path = dir.path().join(format!("run{run}.csv"));
            harness::write_csv(&r, &path)?;
            bytes.push(std::fs::read(&path)?);
            Ok(r)
        });
        match result {
            Ok(r) if run == 0 => rows = r,
            Ok(_) => {}
            Err(e) => {
                return ["A8", "A9", "A11"]
                    .into_iter()
                    .map(|id| Outcome { id, passed: false, runtime_s: 0.0, limit_s: None, detail: format!("error: {e}") })
                    .collect();
            }
        }
        first_run.get_or_insert(start.elapsed().as_secs_f64());
    }
    let runtime = first_run.unwrap_or(0.0);

    let agg = harness::aggregate(&rows);
    let alpha_max = cfg.alphas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let at = |it: usize| agg.iter().find(|r| r.alpha == alpha_max && r.iteration == it);
    let failed: usize = agg.iter().filter(|r| r.iteration == 0).map(|r| r.failed).sum();
    let (first, last) = (at(0), at(cfg.iterations));

    let a8 = match first {
        Some(r) => Outcome {
            id: "A8",
            passed: r.sin_theta_mean < 0.3 && r.test_mse_mean > 0.5 && failed == 0,
            runtime_s: runtime,
            limit_s: Some(1800.0),
            detail: format!(
                "alpha={alpha_max}: mean sin_theta[0]={:.4} (< 0.3), mean test_mse[0]={:.4} (> 0.5), failed cells={failed}",
                r.sin_theta_mean, r.test_mse_mean
            ),
        },
        None => Outcome { id: "A8", passed: false, runtime_s: runtime, limit_s: Some(1800.0), detail: "no rows".into() },
    };
    let a9 = match (first, last) {
        (Some(f), Some(l)) => Outcome {
            id: "A9",
            passed: l.test_mse_mean <= 0.5 * f.test_mse_mean,
            runtime_s: 0.0,
            limit_s: None,
            detail: format!(
                "alpha={alpha_max}: mean test_mse[{}]={:.4} vs 0.5 * test_mse[0]={:.4}",
                cfg.iterations,
                l.test_mse_mean,
                0.5 * f.test_mse_mean
            ),
        },
        _ => Outcome { id: "A9", passed: false, runtime_s: 0.0, limit_s: None, detail: "no rows".into() },
    };
    let identical = bytes.len() == 2 && bytes[0] == bytes[1];
    let a11 = Outcome {
        id: "A11",
        passed: identical,
        runtime_s: 0.0,
        limit_s: None,
        detail: format!("two runs, jobs=1, {} bytes each, identical={identical}", bytes.first().map_or(0, Vec::len)),
    };
    vec![a8, a9, a11]
}

fn main() -> ExitCode {
    // `cargo test -- --list` and filters should not trigger a half-hour run.
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let skip: Vec<String> = std::env::var("AGOP_ACCEPTANCE_SKIP")
        .unwrap_or_default()
        .split(',')
        .map(|s| s.trim().to_uppercase())
        .filter(|s| !s.is_empty())
        .collect();
    let wanted = |id: &str| !skip.iter().any(|s| s == id);
    faer::set_global_parallelism(faer::Par::Seq);

    let mut outcomes = Vec::new();
    let mut check = |id: &'static str, limit: f64, f: &dyn Fn() -> CheckRecord| {
        if wanted(id) {
            let o = Outcome::from_check(id, limit, f());
            o.print();
            outcomes.push(o);
        } else {
            println!("SKIP {id}");
        }
    };
    check("A1", 10.0, &|| verify::walsh_oracle_check(20, 10, SEED));
    check("A2", 30.0, &|| verify::latent_sigma_check(1_000_000, SEED));
    check("A3", 1.0, &verify::gaussian_norm_check);
    check("A4", 10.0, &|| verify::gradient_fd_check(100, SEED));
    check("A5", 300.0, &|| verify::dk_chain_batch_check(14, 2000, 50, SEED));
    check("A6", 120.0, &|| verify::lemma32_scaling_check(&[8, 12, 16], 10, 4, SEED));
    check("A7", 120.0, &|| verify::fourier_residual_check(&[16, 32, 64], 5, SEED));
    check("A10", 600.0, &|| verify::prop42_scaling_check(&[20, 40, 80], 1.2, 5, SEED));

    if ["A8", "A9", "A11"].iter().any(|id| wanted(id)) {
        for o in experiment_criteria() {
            if wanted(o.id) {
                o.print();
                outcomes.push(o);
            } else {
                println!("SKIP {}", o.id);
            }
        }
    }

    let failed: Vec<&str> = outcomes.iter().filter(|o| !(o.passed && o.within_limit())).map(|o| o.id).collect();
    println!("acceptance: {} passed, {} failed", outcomes.len() - failed.len(), failed.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed: {}", failed.join(", "));
        ExitCode::FAILURE
    }
}
