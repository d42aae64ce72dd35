//! Kernel ridge regression `f̂(x) = K(x, X)(K(X, X) + λI)^{-1} y`.

use faer::linalg::solvers::Solve;
use faer::{Mat, MatRef, Side};
use rand::Rng;

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::model::Dataset;
use crate::rng;
use crate::walsh::{self, WalshPoly};

/// Jitter ladder, in units of the mean kernel diagonal.
pub const JITTER_LADDER: [f64; 3] = [1e-10, 1e-8, 1e-6];
/// Required relative dual residual `‖(K + (λ+jitter)I)α - y‖ / ‖y‖`.
pub const RESIDUAL_TOL: f64 = 1e-6;
/// Largest dimension evaluated exactly by [`truncation_gap`].
pub const EXACT_GAP_DIM: usize = 16;
pub const MC_GAP_SAMPLES: usize = 100_000;

const ROW_CHUNK: usize = 1024;
const REFINEMENT_STEPS: usize = 3;

#[derive(Clone, Debug)]
pub struct KrrModel {
    spec: KernelSpec,
    x_train: Mat<f64>,
    alpha: Vec<f64>,
    ridge: f64,
    jitter_used: f64,
}

/// Anything that maps a batch of rows to predictions.
pub trait Predictor {
    fn dim(&self) -> usize;
    fn predict_batch(&self, x: MatRef<'_, f64>) -> Result<Vec<f64>>;
}

impl KrrModel {
    /// Builds a model from given dual coefficients, without fitting.
    pub fn from_parts(spec: KernelSpec, x_train: Mat<f64>, alpha: Vec<f64>, ridge: f64) -> Result<Self> {
        if x_train.nrows() != alpha.len() {
            return Err(Error::DimensionMismatch { expected: x_train.nrows(), got: alpha.len() });
        }
        Ok(Self { spec, x_train, alpha, ridge, jitter_used: 0.0 })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn x_train(&self) -> MatRef<'_, f64> {
        self.x_train.as_ref()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn jitter_used(&self) -> f64 {
        self.jitter_used
    }

    pub fn dim(&self) -> usize {
        self.x_train.ncols()
    }

    /// `K(X_eval, X_train) α`.
    pub fn predict(&self, x_eval: MatRef<'_, f64>) -> Result<Vec<f64>> {
        if x_eval.ncols() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x_eval.ncols() });
        }
        let alpha = column(&self.alpha);
        let mut out = Vec::with_capacity(x_eval.nrows());
        for start in (0..x_eval.nrows()).step_by(ROW_CHUNK) {
            let rows = ROW_CHUNK.min(x_eval.nrows() - start);
            let k = self.spec.matrix(x_eval.subrows(start, rows), self.x_train.as_ref())?;
            let pred = &k * &alpha;
            out.extend((0..rows).map(|i| pred[(i, 0)]));
        }
        Ok(out)
    }

    pub fn test_mse(&self, test: &Dataset) -> Result<f64> {
        let pred = self.predict(test.x.as_ref())?;
        Ok(mse(&pred, &test.y))
    }

    /// Row `j` is `∇f̂(x_eval_j) = Σ_i α_i ∇_x K(x_eval_j, x_train_i)`.
    pub fn gradient_field(&self, x_eval: MatRef<'_, f64>) -> Result<Mat<f64>> {
        let d = self.dim();
        if x_eval.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: x_eval.ncols() });
        }
        let radial = self.spec.family().is_radial();
        let mut raw = Mat::<f64>::zeros(x_eval.nrows(), d);
        for start in (0..x_eval.nrows()).step_by(ROW_CHUNK) {
            let rows = ROW_CHUNK.min(x_eval.nrows() - start);
            let block = x_eval.subrows(start, rows);
            let terms = self.spec.cross_terms(block, self.x_train.as_ref(), true)?;
            let mut w = terms.slopes;
            for (j, &a) in self.alpha.iter().enumerate() {
                for i in 0..rows {
                    w[(i, j)] *= a;
                }
            }
            let wx = &w * &self.x_train;
            let mut dst = raw.as_mut().subrows_mut(start, rows);
            if radial {
                for i in 0..rows {
                    let total: f64 = (0..w.ncols()).map(|j| w[(i, j)]).sum();
                    for k in 0..d {
                        dst[(i, k)] = total * block[(i, k)] - wx[(i, k)];
                    }
                }
            } else {
                dst.copy_from(&wx);
            }
        }
        Ok(match self.spec.metric() {
            Some(m) => &raw * m,
            None => raw,
        })
    }
}

impl Predictor for KrrModel {
    fn dim(&self) -> usize {
        self.dim()
    }

    fn predict_batch(&self, x: MatRef<'_, f64>) -> Result<Vec<f64>> {
        self.predict(x)
    }
}

impl Predictor for WalshPoly {
    fn dim(&self) -> usize {
        WalshPoly::dim(self)
    }

    fn predict_batch(&self, x: MatRef<'_, f64>) -> Result<Vec<f64>> {
        Ok((0..x.nrows()).map(|i| self.eval_multilinear(&crate::linalg::row(x, i))).collect())
    }
}

pub fn mse(pred: &[f64], target: &[f64]) -> f64 {
    assert_eq!(pred.len(), target.len(), "prediction and target lengths differ");
    pred.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / pred.len() as f64
}

fn column(v: &[f64]) -> Mat<f64> {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

fn residual(k: &Mat<f64>, shift: f64, alpha: &Mat<f64>, y: &Mat<f64>) -> Mat<f64> {
    let mut r = y - k * alpha;
    for i in 0..r.nrows() {
        r[(i, 0)] -= shift * alpha[(i, 0)];
    }
    r
}

fn norm(v: &Mat<f64>) -> f64 {
    v.norm_l2()
}

/// Fits by Cholesky, escalating diagonal jitter through [`JITTER_LADDER`] if
/// the factorization fails or the refined dual residual stays above
/// [`RESIDUAL_TOL`].
pub fn fit(data: &Dataset, spec: &KernelSpec, ridge: f64) -> Result<KrrModel> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("cannot fit on an empty dataset".into()));
    }
    if !(ridge >= 0.0) {
        return Err(Error::InvalidArgument(format!("ridge {ridge} is negative")));
    }
    let n = data.len();
    let k = spec.matrix(data.x.as_ref(), data.x.as_ref())?;
    let mean_diag = (0..n).map(|i| k[(i, i)]).sum::<f64>() / n as f64;
    let y = column(&data.y);
    let y_norm = norm(&y);
    let ladder = std::iter::once(0.0).chain(JITTER_LADDER.iter().map(|j| j * mean_diag.abs().max(f64::MIN_POSITIVE)));
    let mut last_jitter = 0.0;
    for jitter in ladder {
        last_jitter = jitter;
        let shift = ridge + jitter;
        let mut shifted = k.clone();
        for i in 0..n {
            shifted[(i, i)] += shift;
        }
        let Ok(llt) = shifted.llt(Side::Lower) else { continue };
        let mut alpha = llt.solve(&y);
        let mut r = residual(&k, shift, &alpha, &y);
        for _ in 0..REFINEMENT_STEPS {
            if norm(&r) <= RESIDUAL_TOL * y_norm {
                break;
            }
            alpha += llt.solve(&r);
            r = residual(&k, shift, &alpha, &y);
        }
        let res = norm(&r);
        if res.is_finite() && res <= RESIDUAL_TOL * y_norm {
            return Ok(KrrModel {
                spec: spec.clone(),
                x_train: data.x.clone(),
                alpha: (0..n).map(|i| alpha[(i, 0)]).collect(),
                ridge,
                jitter_used: jitter,
            });
        }
    }
    Err(Error::SingularKernel { jitter: last_jitter })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GapEstimate {
    pub value: f64,
    /// Monte-Carlo standard error; `None` for exact enumeration.
    pub std_error: Option<f64>,
}

/// `‖f̂ - f*_{≤p}‖²` under the uniform cube measure. Exact for
/// `d ≤ EXACT_GAP_DIM`, otherwise a Monte-Carlo estimate from
/// [`MC_GAP_SAMPLES`] points drawn with `seed`.
pub fn truncation_gap<P: Predictor + ?Sized>(
    predictor: &P,
    fstar: &WalshPoly,
    p: usize,
    seed: u64,
) -> Result<GapEstimate> {
    let d = predictor.dim();
    if fstar.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: fstar.dim() });
    }
    let target = fstar.truncate(p);
    let exact = d <= EXACT_GAP_DIM;
    let total = if exact { 1usize << d } else { MC_GAP_SAMPLES };
    let mut stream = rng::stream(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut point = vec![0.0; d];
    for start in (0..total).step_by(ROW_CHUNK) {
        let rows = ROW_CHUNK.min(total - start);
        let mut block = Mat::<f64>::zeros(rows, d);
        for i in 0..rows {
            if exact {
                walsh::cube_point((start + i) as u64, d, &mut point);
            } else {
                for v in point.iter_mut() {
                    *v = if stream.random::<bool>() { 1.0 } else { -1.0 };
                }
            }
            for (j, &v) in point.iter().enumerate() {
                block[(i, j)] = v;
            }
        }
        let pred = predictor.predict_batch(block.as_ref())?;
        let truth = target.predict_batch(block.as_ref())?;
        for (a, b) in pred.iter().zip(&truth) {
            let e = (a - b).powi(2);
            sum += e;
            sum_sq += e * e;
        }
    }
    let mean = sum / total as f64;
    let std_error = (!exact).then(|| {
        let var = (sum_sq / total as f64 - mean * mean).max(0.0) * total as f64 / (total - 1) as f64;
        (var / total as f64).sqrt()
    });
    Ok(GapEstimate { value: mean, std_error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::Link;
    use crate::kernel::Profile;
    use crate::linalg;
    use crate::model::{haar_subspace, sample_dataset, InputDist, Subspace};

    fn cube_dataset(n: usize, d: usize, seed: u64) -> Dataset {
        let u = haar_subspace(d, 1, seed).unwrap();
        sample_dataset(InputDist::Hypercube, &u, &Link::L1.poly(), n, 0.01, seed + 1).unwrap()
    }

    fn distinct_rows(data: &Dataset) -> Dataset {
        let mut seen = std::collections::BTreeSet::new();
        let keep: Vec<usize> = (0..data.len())
            .filter(|&i| seen.insert(data.row(i).iter().map(|v| (*v > 0.0) as u8).collect::<Vec<_>>()))
            .collect();
        let x = Mat::from_fn(keep.len(), data.dim(), |i, j| data.x[(keep[i], j)]);
        let y = keep.iter().map(|&i| data.y[i]).collect();
        Dataset::new(x, y, data.input).unwrap()
    }

    #[test]
    fn single_point_fit() {
        let data = Dataset::new(Mat::from_fn(1, 3, |_, _| 1.0), vec![0.7], InputDist::Hypercube).unwrap();
        let model = fit(&data, &KernelSpec::gaussian(3.0).unwrap(), 0.0).unwrap();
        assert!((model.alpha()[0] - 0.7).abs() < 1e-15);
        assert!((model.predict(data.x.as_ref()).unwrap()[0] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn interpolates_without_ridge() {
        let data = distinct_rows(&cube_dataset(60, 8, 4));
        let model = fit(&data, &KernelSpec::laplace(8f64.sqrt()).unwrap(), 0.0).unwrap();
        let pred = model.predict(data.x.as_ref()).unwrap();
        for (p, y) in pred.iter().zip(&data.y) {
            assert!((p - y).abs() < 1e-6);
        }
    }

    #[test]
    fn huge_ridge_shrinks() {
        let data = cube_dataset(40, 6, 9);
        let model = fit(&data, &KernelSpec::gaussian(6.0).unwrap(), 1e12).unwrap();
        let pred = model.predict(data.x.as_ref()).unwrap();
        let ymax = data.y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let bound = data.len() as f64 * ymax / 1e12;
        assert!(pred.iter().all(|p| p.abs() <= bound));
    }

    #[test]
    fn dual_residual_within_tolerance() {
        let data = cube_dataset(400, 10, 2);
        for spec in [KernelSpec::gaussian(10.0).unwrap(), KernelSpec::laplace(10f64.sqrt()).unwrap()] {
            let model = fit(&data, &spec, 1e-6).unwrap();
            let k = spec.matrix(data.x.as_ref(), data.x.as_ref()).unwrap();
            let a = column(model.alpha());
            let r = residual(&k, model.ridge() + model.jitter_used(), &a, &column(&data.y));
            assert!(norm(&r) <= RESIDUAL_TOL * norm(&column(&data.y)));
        }
    }

    #[test]
    fn near_interpolation_training_mse() {
        let data = distinct_rows(&cube_dataset(300, 12, 6));
        let model = fit(&data, &KernelSpec::gaussian(12.0).unwrap(), 1e-6).unwrap();
        let train_mse = model.test_mse(&data).unwrap();
        assert!(train_mse <= 0.01 + 1e-3, "{train_mse}");
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(mse(&[0.0, 0.0, 0.0], &[1.0, -1.0, 1.0]), 1.0);
        let mut s = rng::stream(5);
        let n = 100_000;
        let target: Vec<f64> = (0..n).map(|_| 0.3 + 0.1 * rng::standard_normal(&mut s)).collect();
        let v = mse(&vec![0.3; n], &target);
        assert!((0.009..=0.011).contains(&v));
    }

    #[test]
    fn mse_is_permutation_invariant() {
        let data = cube_dataset(50, 6, 1);
        let model = fit(&data, &KernelSpec::gaussian(6.0).unwrap(), 1e-3).unwrap();
        let test = cube_dataset(30, 6, 1);
        let perm: Vec<usize> = (0..30).rev().collect();
        let x = Mat::from_fn(30, 6, |i, j| test.x[(perm[i], j)]);
        let y = perm.iter().map(|&i| test.y[i]).collect();
        let shuffled = Dataset::new(x, y, test.input).unwrap();
        let a = model.test_mse(&test).unwrap();
        let b = model.test_mse(&shuffled).unwrap();
        assert!((a - b).abs() <= 1e-14 * a.max(1.0));
    }

    #[test]
    fn linear_kernel_gradient_is_constant() {
        let data = cube_dataset(30, 5, 3);
        let spec = KernelSpec::inner_product(Profile::linear());
        let model = KrrModel::from_parts(spec, data.x.clone(), data.y.clone(), 0.0).unwrap();
        let g = model.gradient_field(data.x.as_ref()).unwrap();
        for k in 0..5 {
            let expected: f64 = (0..30).map(|i| data.y[i] * data.x[(i, k)]).sum::<f64>() / 5.0;
            for j in 0..30 {
                assert!((g[(j, k)] - expected).abs() < 1e-12);
            }
        }
        let zero = KrrModel::from_parts(KernelSpec::gaussian(5.0).unwrap(), data.x.clone(), vec![0.0; 30], 0.0).unwrap();
        let g = zero.gradient_field(data.x.as_ref()).unwrap();
        assert_eq!(linalg::frobenius(g.as_ref()), 0.0);
    }

    #[test]
    fn gradient_field_matches_finite_differences() {
        let d = 6;
        let data = cube_dataset(25, d, 8);
        let mut s = rng::stream(99);
        let a = Mat::from_fn(d, d, |_, _| rng::standard_normal(&mut s));
        let metric = linalg::symmetrize((&a * a.transpose() / d as f64).as_ref());
        let probes = Mat::from_fn(10, d, |_, _| rng::standard_normal(&mut s));
        for spec in [
            KernelSpec::gaussian(d as f64).unwrap(),
            KernelSpec::laplace((d as f64).sqrt()).unwrap(),
            KernelSpec::inner_product(Profile::Exp),
        ] {
            let spec = spec.with_metric(metric.clone()).unwrap();
            let model = fit(&data, &spec, 1e-3).unwrap();
            let g = model.gradient_field(probes.as_ref()).unwrap();
            for i in 0..10 {
                let mut num = 0.0;
                let mut den = 0.0;
                for k in 0..d {
                    let step = 1e-5;
                    let mut plus = probes.clone();
                    let mut minus = probes.clone();
                    plus[(i, k)] += step;
                    minus[(i, k)] -= step;
                    let fd = (model.predict(plus.subrows(i, 1)).unwrap()[0]
                        - model.predict(minus.subrows(i, 1)).unwrap()[0])
                        / (2.0 * step);
                    num += (g[(i, k)] - fd).powi(2);
                    den += fd * fd;
                }
                assert!(num.sqrt() <= 1e-4 * den.sqrt().max(1e-8), "{:?}", spec.family());
            }
        }
    }

    #[test]
    fn truncation_gap_identities() {
        let d = 8;
        let u = Subspace::axis_aligned(d, 1).unwrap();
        let link = Link::L1.poly();
        let fstar = walsh::walsh_coefficients(|x| crate::model::target_eval(&link, &u, x), d, d).unwrap();
        let low = fstar.truncate(1);
        let gap = truncation_gap(&low, &fstar, 1, 0).unwrap();
        assert!(gap.value < 1e-24 && gap.std_error.is_none());
        let tail = fstar.l2_norm_sq() - low.l2_norm_sq();
        let gap = truncation_gap(&fstar, &fstar, 1, 0).unwrap();
        assert!((gap.value - tail).abs() < 1e-12);
    }

    #[test]
    fn truncation_gap_monte_carlo_reports_error() {
        let d = 20;
        let fstar = WalshPoly::from_index_lists(d, &[(&[0], 1.0), (&[1, 2], 0.5)]).unwrap();
        let gap = truncation_gap(&fstar, &fstar, 1, 3).unwrap();
        let se = gap.std_error.unwrap();
        assert!((gap.value - 0.25).abs() < 1e-12 && se < 1e-12);
    }

    #[test]
    fn truncation_gap_falls_then_stays_below_tail() {
        // At d = 16 the gap to f*_{≤1} is U-shaped in n: it falls until the
        // predictor starts fitting degree-2 and higher structure, then climbs
        // toward ‖f*_{>1}‖² as n → ∞.
        let d = 16;
        let link = Link::L1.poly();
        let spec = KernelSpec::gaussian(d as f64).unwrap();
        let trials = 3;
        let mut gaps = [0.0; 3];
        let mut tail = 0.0;
        for t in 0..trials {
            let u = haar_subspace(d, 1, 11 + t).unwrap();
            let fstar = walsh::walsh_coefficients(|x| crate::model::target_eval(&link, &u, x), d, d).unwrap();
            tail += (fstar.l2_norm_sq() - fstar.truncate(1).l2_norm_sq()) / trials as f64;
            for (k, a) in [1.2f64, 1.5, 1.8].iter().enumerate() {
                let n = (d as f64).powf(*a).floor() as usize;
                let data = sample_dataset(InputDist::Hypercube, &u, &link, n, 0.0, 100 + t).unwrap();
                let model = fit(&data, &spec, 1e-6).unwrap();
                gaps[k] += truncation_gap(&model, &fstar, 1, 0).unwrap().value / trials as f64;
            }
        }
        assert!(gaps[1] < gaps[0], "{gaps:?}");
        assert!(gaps[2] < tail, "{gaps:?} vs tail {tail}");
    }
}
