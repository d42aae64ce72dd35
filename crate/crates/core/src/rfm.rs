//! Recursive Feature Machine: alternate KRR fits with safeguarded,
//! trace-normalized AGOP metric updates.

use std::time::Instant;

use faer::{Mat, MatRef};

use crate::agop::{self, AgopResult};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::krr::{self, KrrModel};
use crate::linalg;
use crate::model::{Dataset, Subspace};

const PSD_TOL: f64 = 1e-8;

/// `(d / tr(M̂ + ηI)) (M̂ + ηI)`.
pub fn metric_update(agop: MatRef<'_, f64>, eta: f64, d: usize) -> Result<Mat<f64>> {
    if !(eta > 0.0) {
        return Err(Error::InvalidArgument(format!("safeguard eta = {eta} must be positive")));
    }
    if agop.nrows() != d || agop.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: agop.nrows() });
    }
    let mut shifted = linalg::symmetrize(agop);
    for i in 0..d {
        shifted[(i, i)] += eta;
    }
    let c = linalg::trace(shifted.as_ref());
    Ok(shifted * faer::Scale(d as f64 / c))
}

/// Principal square root of a PSD matrix by eigendecomposition. Eigenvalues in
/// `[-1e-8 λ_max, 0)` are clamped to zero.
pub fn metric_sqrt(m: MatRef<'_, f64>) -> Result<Mat<f64>> {
    let (values, vectors) = linalg::sym_eigen_desc(linalg::symmetrize(m).as_ref())?;
    let lmax = values.first().copied().unwrap_or(0.0).max(0.0);
    if let Some(&min) = values.last() {
        if min < -PSD_TOL * lmax.max(f64::MIN_POSITIVE) && min < 0.0 {
            return Err(Error::NotPsd(min));
        }
    }
    let d = values.len();
    let roots: Vec<f64> = values.iter().map(|v| v.max(0.0).sqrt()).collect();
    let scaled = Mat::from_fn(d, d, |i, j| vectors[(i, j)] * roots[j]);
    Ok(linalg::symmetrize((&scaled * vectors.transpose()).as_ref()))
}

#[derive(Clone, Debug)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Metric used for this iteration's fit.
    pub metric: Mat<f64>,
    pub test_mse: f64,
    /// Largest principal-angle sine between the top-r AGOP eigenspace and the truth.
    pub sin_theta: f64,
    /// Three largest eigenvalues of the raw AGOP.
    pub top_eigenvalues: [f64; 3],
    /// `tr(M̂ + ηI)`.
    pub c_eta: f64,
    pub jitter_used: f64,
    pub runtime_s: f64,
}

#[derive(Clone, Debug)]
pub struct RfmHistory {
    pub records: Vec<IterationRecord>,
    pub eta: f64,
    /// The metric after the last update, not used for a fit.
    pub final_metric: Mat<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct RfmParams {
    pub ridge: f64,
    pub eta: f64,
    pub iterations: usize,
}

/// Runs `iterations + 1` fits. Iteration 0 uses the base kernel's own metric
/// (identity by default); each later iteration uses the updated AGOP metric.
pub fn run_rfm(
    train: &Dataset,
    base: &KernelSpec,
    params: RfmParams,
    test: &Dataset,
    truth: &Subspace,
) -> Result<RfmHistory> {
    if params.iterations == 0 {
        return Err(Error::InvalidArgument("RFM needs at least one iteration".into()));
    }
    let d = train.dim();
    if truth.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: truth.dim() });
    }
    let mut metric = base.metric_dense(d);
    let mut records = Vec::with_capacity(params.iterations + 1);
    for iteration in 0..=params.iterations {
        let start = Instant::now();
        let spec = base.clone().with_metric(metric.clone())?;
        let model = krr::fit(train, &spec, params.ridge)?;
        let test_mse = model.test_mse(test)?;
        let agop = training_agop(&model)?;
        let sin_theta = agop::sin_theta_op(&agop.top_subspace(truth.rank())?, truth)?;
        let next = metric_update(agop.matrix(), params.eta, d)?;
        check_safeguard_floor(next.as_ref(), agop.matrix(), params.eta)?;
        records.push(IterationRecord {
            iteration,
            metric: std::mem::replace(&mut metric, next),
            test_mse,
            sin_theta,
            top_eigenvalues: agop.top_eigenvalues::<3>(),
            c_eta: linalg::trace(agop.matrix()) + params.eta * d as f64,
            jitter_used: model.jitter_used(),
            runtime_s: start.elapsed().as_secs_f64(),
        });
    }
    Ok(RfmHistory { records, eta: params.eta, final_metric: metric })
}

/// AGOP of a fitted model evaluated at its own training inputs.
pub fn training_agop(model: &KrrModel) -> Result<AgopResult> {
    let grads = model.gradient_field(model.x_train())?;
    agop::empirical_agop(grads.as_ref())
}

fn check_safeguard_floor(next: MatRef<'_, f64>, agop: MatRef<'_, f64>, eta: f64) -> Result<()> {
    let d = next.nrows();
    let floor = d as f64 * eta / (linalg::trace(agop) + eta * d as f64);
    let min = *linalg::sym_eigenvalues_desc(next)?.last().unwrap_or(&floor);
    if min < floor * (1.0 - 1e-8) - 1e-12 {
        return Err(Error::NotPsd(min - floor));
    }
    Ok(())
}

/// Relative error `‖M₂^{1/2}x - √(d/c_η) x̂‖ / ‖√(d/c_η) x̂‖` over the rows of
/// `samples`, with `x̂ = Uᵀ√(Σ+ηI)Ux + √η U_⊥ᵀU_⊥x`.
pub fn prop42_residual(
    m2: MatRef<'_, f64>,
    u: &Subspace,
    sigma: MatRef<'_, f64>,
    eta: f64,
    c_eta: f64,
    samples: MatRef<'_, f64>,
) -> Result<f64> {
    let d = u.dim();
    let r = u.rank();
    if m2.nrows() != d || samples.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: samples.ncols() });
    }
    if sigma.nrows() != r || sigma.ncols() != r {
        return Err(Error::DimensionMismatch { expected: r, got: sigma.nrows() });
    }
    let root = metric_sqrt(m2)?;
    let mut shifted = sigma.to_owned();
    for i in 0..r {
        shifted[(i, i)] += eta;
    }
    let latent_root = metric_sqrt(shifted.as_ref())?;
    let scale = (d as f64 / c_eta).sqrt();
    let sqrt_eta = eta.sqrt();
    let x = samples;
    let mapped = x * &root;
    let ux = x * u.basis().transpose();
    let inside = &ux * &latent_root * u.basis();
    let projected = &ux * u.basis();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..x.nrows() {
        for j in 0..d {
            let xhat = inside[(i, j)] + sqrt_eta * (x[(i, j)] - projected[(i, j)]);
            let target = scale * xhat;
            num += (mapped[(i, j)] - target).powi(2);
            den += target * target;
        }
    }
    Ok((num / den).sqrt())
}
