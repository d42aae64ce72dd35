use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{sample_size, ExperimentConfig};
use crate::error::{Error, Result};
use crate::model::sample_dataset;
use crate::rfm::{self, RfmParams};
use crate::rng;

pub const CSV_HEADER: &str =
    "link,input,subspace,kernel,alpha,trial,iteration,n,test_mse,sin_theta,eig1,eig2,eig3,seed,runtime_s,status";

pub const STATUS_OK: &str = "ok";

/// One fit of one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub link: String,
    pub input: String,
    pub subspace: String,
    pub kernel: String,
    pub alpha: f64,
    pub trial: usize,
    pub iteration: usize,
    pub n: usize,
    pub test_mse: f64,
    pub sin_theta: f64,
    pub eig1: f64,
    pub eig2: f64,
    pub eig3: f64,
    pub seed: u64,
    pub runtime_s: f64,
    pub status: String,
}

impl ResultRow {
    pub fn is_ok(&self) -> bool {
        self.status == STATUS_OK
    }
}

/// Seed of cell `(alpha_index, trial)`. Sub-streams: 0 subspace, 1 training
/// set, 2 test set.
pub fn trial_seed(base_seed: u64, trial: usize, alpha_index: usize) -> u64 {
    rng::derive_seed(base_seed, &[trial as u64, alpha_index as u64])
}

fn run_cell(cfg: &ExperimentConfig, alpha_index: usize, trial: usize) -> Vec<ResultRow> {
    let alpha = cfg.alphas[alpha_index];
    let n = sample_size(cfg.d, alpha);
    let seed = trial_seed(cfg.base_seed, trial, alpha_index);
    let row = |iteration: usize| ResultRow {
        link: cfg.link.name().into(),
        input: cfg.input.name().into(),
        subspace: cfg.subspace.name().into(),
        kernel: cfg.kernel.name().into(),
        alpha,
        trial,
        iteration,
        n,
        test_mse: f64::NAN,
        sin_theta: f64::NAN,
        eig1: f64::NAN,
        eig2: f64::NAN,
        eig3: f64::NAN,
        seed,
        runtime_s: 0.0,
        status: STATUS_OK.into(),
    };
    let outcome = (|| -> Result<rfm::RfmHistory> {
        let link = cfg.link.poly();
        let u = cfg.subspace.generate(cfg.d, cfg.link.latent_dim(), rng::derive_seed(seed, &[0]))?;
        let train = sample_dataset(cfg.input, &u, &link, n, cfg.noise_var, rng::derive_seed(seed, &[1]))?;
        let test = sample_dataset(cfg.input, &u, &link, cfg.n_test, cfg.noise_var, rng::derive_seed(seed, &[2]))?;
        let params = RfmParams { ridge: cfg.ridge, eta: cfg.eta(), iterations: cfg.iterations };
        rfm::run_rfm(&train, &cfg.kernel_spec()?, params, &test, &u)
    })();
    match outcome {
        Ok(history) => history
            .records
            .iter()
            .map(|rec| {
                let [eig1, eig2, eig3] = rec.top_eigenvalues;
                ResultRow {
                    test_mse: rec.test_mse,
                    sin_theta: rec.sin_theta,
                    eig1,
                    eig2,
                    eig3,
                    runtime_s: if cfg.record_runtime { rec.runtime_s } else { 0.0 },
                    ..row(rec.iteration)
                }
            })
            .collect(),
        Err(e) => {
            let status = format!("failed: {e}").replace(['\n', '\r'], " ");
            (0..=cfg.iterations).map(|it| ResultRow { status: status.clone(), ..row(it) }).collect()
        }
    }
}

/// Runs every `alpha × trial` cell on up to `jobs` threads. Rows come back in
/// `(alpha, trial, iteration)` order regardless of scheduling; a failing cell
/// yields rows with `status = "failed: ..."` instead of aborting the grid.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    // Dense kernels run single-threaded so results do not depend on `jobs`.
    faer::set_global_parallelism(faer::Par::Seq);
    let cells: Vec<(usize, usize)> =
        (0..cfg.alphas.len()).flat_map(|a| (0..cfg.trials).map(move |t| (a, t))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let rows: Vec<Vec<ResultRow>> =
        pool.install(|| cells.par_iter().map(|&(a, t)| run_cell(cfg, a, t)).collect());
    Ok(rows.into_iter().flatten().collect())
}

pub fn write_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record(CSV_HEADER.split(','))?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::Config {
            path: path.display().to_string(),
            message: format!("unexpected header '{}'", header.join(",")),
        });
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
