//! Kernels with a positive-semidefinite input metric `M`.
//!
//! * Gaussian radial: `exp(-q_M / (2h))`
//! * Laplace radial: `exp(-√q_M / h)`
//! * inner product: `g(xᵀ M x' / d)`
//!
//! where `q_M = (x - x')ᵀ M (x - x')`. The metric enters only through `q_M` or
//! the bilinear form; `M^{1/2}` is never formed here.

use std::fmt;
use std::str::FromStr;

use faer::{Mat, MatRef};

use crate::error::{Error, Result};
use crate::linalg;

const METRIC_SYMMETRY_TOL: f64 = 1e-10;
const METRIC_PSD_TOL: f64 = 1e-8;

/// Kernel profile `g` for inner-product kernels.
#[derive(Clone, Debug)]
pub enum Profile {
    /// `g(t) = e^t`.
    Exp,
    /// `g(t) = Σ_k c_k t^k`, coefficients in increasing order.
    Polynomial(Vec<f64>),
    /// An arbitrary analytic profile known through its value, first derivative,
    /// and a finite table of derivatives at zero.
    Custom {
        name: &'static str,
        value: fn(f64) -> f64,
        derivative: fn(f64) -> f64,
        derivatives_at_zero: Vec<f64>,
    },
}

impl Profile {
    pub fn linear() -> Self {
        Profile::Polynomial(vec![0.0, 1.0])
    }

    pub fn name(&self) -> String {
        match self {
            Profile::Exp => "exp".into(),
            Profile::Polynomial(c) => format!("poly{c:?}"),
            Profile::Custom { name, .. } => (*name).into(),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            Profile::Exp => libm::exp(t),
            Profile::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &ck| acc * t + ck),
            Profile::Custom { value, .. } => value(t),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            Profile::Exp => libm::exp(t),
            Profile::Polynomial(c) => c
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, &ck)| acc * t + k as f64 * ck),
            Profile::Custom { derivative, .. } => derivative(t),
        }
    }

    /// `g^{(k)}(0)`, or `None` if the profile does not provide that order.
    pub fn derivative_at_zero(&self, k: usize) -> Option<f64> {
        match self {
            Profile::Exp => Some(1.0),
            Profile::Polynomial(c) => {
                Some(c.get(k).map_or(0.0, |&ck| ck * crate::hermite::factorial(k as u32) as f64))
            }
            Profile::Custom { derivatives_at_zero, .. } => derivatives_at_zero.get(k).copied(),
        }
    }

    /// Taylor truncation `g_m(t) = Σ_{k≤m} g^{(k)}(0) t^k / k!`.
    pub fn taylor_truncation(&self, m: usize, t: f64) -> Result<f64> {
        let mut acc = 0.0;
        let mut power_over_fact = 1.0;
        for k in 0..=m {
            if k > 0 {
                power_over_fact *= t / k as f64;
            }
            let dk = self.derivative_at_zero(k).ok_or(Error::MissingDerivative(k))?;
            acc += dk * power_over_fact;
        }
        Ok(acc)
    }
}

#[derive(Clone, Debug)]
pub enum KernelFamily {
    GaussianRadial,
    LaplaceRadial,
    InnerProduct(Profile),
}

impl KernelFamily {
    pub fn is_radial(&self) -> bool {
        !matches!(self, KernelFamily::InnerProduct(_))
    }
}

/// Bandwidth rule as written in configuration files.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bandwidth {
    /// `h = d`
    Dim,
    /// `h = √d`
    SqrtDim,
    Value(f64),
}

impl Bandwidth {
    pub fn resolve(self, d: usize) -> f64 {
        match self {
            Bandwidth::Dim => d as f64,
            Bandwidth::SqrtDim => (d as f64).sqrt(),
            Bandwidth::Value(h) => h,
        }
    }
}

impl FromStr for Bandwidth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "d" => Ok(Bandwidth::Dim),
            "sqrt_d" => Ok(Bandwidth::SqrtDim),
            other => other
                .parse::<f64>()
                .ok()
                .filter(|h| *h > 0.0 && h.is_finite())
                .map(Bandwidth::Value)
                .ok_or_else(|| Error::InvalidArgument(format!("invalid bandwidth '{other}'"))),
        }
    }
}

impl fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bandwidth::Dim => f.write_str("d"),
            Bandwidth::SqrtDim => f.write_str("sqrt_d"),
            Bandwidth::Value(h) => write!(f, "{h}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct KernelSpec {
    family: KernelFamily,
    bandwidth: f64,
    /// `None` is the identity metric.
    metric: Option<Mat<f64>>,
}

/// Pairwise kernel values together with the scalar factor of each gradient:
/// `∇_x K(a_i, b_j) = slope_ij · M (a_i - b_j)` for radial kernels and
/// `slope_ij · M b_j` for inner-product kernels.
pub(crate) struct CrossTerms {
    pub values: Mat<f64>,
    pub slopes: Mat<f64>,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidBandwidth(bandwidth));
        }
        Ok(Self { family, bandwidth, metric: None })
    }

    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        Self::new(KernelFamily::GaussianRadial, bandwidth)
    }

    pub fn laplace(bandwidth: f64) -> Result<Self> {
        Self::new(KernelFamily::LaplaceRadial, bandwidth)
    }

    /// Inner-product kernels carry no bandwidth; it is stored as 1.
    pub fn inner_product(profile: Profile) -> Self {
        Self { family: KernelFamily::InnerProduct(profile), bandwidth: 1.0, metric: None }
    }

    /// Replaces the metric, checking symmetry (1e-10) and PSD (-1e-8).
    pub fn with_metric(mut self, metric: Mat<f64>) -> Result<Self> {
        if metric.nrows() != metric.ncols() {
            return Err(Error::DimensionMismatch { expected: metric.nrows(), got: metric.ncols() });
        }
        let asym = linalg::max_asymmetry(metric.as_ref());
        if asym > METRIC_SYMMETRY_TOL {
            return Err(Error::NotSymmetric(asym));
        }
        let eig = linalg::sym_eigenvalues_desc(metric.as_ref())?;
        if let Some(&min) = eig.last() {
            if min < -METRIC_PSD_TOL * eig[0].abs().max(1.0) {
                return Err(Error::NotPsd(min));
            }
        }
        self.metric = if linalg::is_identity(metric.as_ref()) { None } else { Some(metric) };
        Ok(self)
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn metric(&self) -> Option<MatRef<'_, f64>> {
        self.metric.as_ref().map(Mat::as_ref)
    }

    /// The metric as a dense matrix (identity when unset).
    pub fn metric_dense(&self, d: usize) -> Mat<f64> {
        match &self.metric {
            Some(m) => m.clone(),
            None => Mat::identity(d, d),
        }
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        match &self.metric {
            Some(m) if m.nrows() != d => Err(Error::DimensionMismatch { expected: m.nrows(), got: d }),
            _ => Ok(()),
        }
    }

    fn apply_metric(&self, v: &[f64]) -> Vec<f64> {
        match &self.metric {
            Some(m) => linalg::mat_vec(m.as_ref(), v),
            None => v.to_vec(),
        }
    }

    fn radial_profile(&self, q: f64) -> f64 {
        match self.family {
            KernelFamily::GaussianRadial => libm::exp(-q / (2.0 * self.bandwidth)),
            KernelFamily::LaplaceRadial => libm::exp(-q.sqrt() / self.bandwidth),
            KernelFamily::InnerProduct(_) => unreachable!("radial profile of an inner-product kernel"),
        }
    }

    pub fn value(&self, x: &[f64], xp: &[f64]) -> Result<f64> {
        if x.len() != xp.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), got: xp.len() });
        }
        let d = x.len();
        self.check_dim(d)?;
        match &self.family {
            KernelFamily::InnerProduct(g) => {
                let mxp = self.apply_metric(xp);
                Ok(g.value(linalg::dot(x, &mxp) / d as f64))
            }
            _ => {
                let diff: Vec<f64> = x.iter().zip(xp).map(|(a, b)| a - b).collect();
                let q = linalg::dot(&diff, &self.apply_metric(&diff));
                if q < -METRIC_PSD_TOL {
                    return Err(Error::NotPsd(q));
                }
                Ok(self.radial_profile(q.max(0.0)))
            }
        }
    }

    /// `∇_x K(x, x')`.
    pub fn gradient_x(&self, x: &[f64], xp: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), xp.len(), "points have different dimensions");
        let d = x.len();
        match &self.family {
            KernelFamily::InnerProduct(g) => {
                let mxp = self.apply_metric(xp);
                let slope = g.derivative(linalg::dot(x, &mxp) / d as f64) / d as f64;
                mxp.into_iter().map(|v| slope * v).collect()
            }
            family => {
                let diff: Vec<f64> = x.iter().zip(xp).map(|(a, b)| a - b).collect();
                let mdiff = self.apply_metric(&diff);
                let q = linalg::dot(&diff, &mdiff).max(0.0);
                let k = self.radial_profile(q);
                let slope = match family {
                    KernelFamily::GaussianRadial => -k / self.bandwidth,
                    _ if q == 0.0 => 0.0,
                    _ => -k / (self.bandwidth * q.sqrt()),
                };
                mdiff.into_iter().map(|v| slope * v).collect()
            }
        }
    }

    /// `K(A, B)` with rows of `a` and `b` as points. Exactly symmetric when `a`
    /// and `b` are the same matrix.
    pub fn matrix(&self, a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Result<Mat<f64>> {
        Ok(self.cross_terms(a, b, false)?.values)
    }

    pub(crate) fn cross_terms(&self, a: MatRef<'_, f64>, b: MatRef<'_, f64>, with_slopes: bool) -> Result<CrossTerms> {
        if a.ncols() != b.ncols() {
            return Err(Error::DimensionMismatch { expected: a.ncols(), got: b.ncols() });
        }
        let d = a.ncols();
        self.check_dim(d)?;
        let same = a.as_ptr() == b.as_ptr()
            && a.nrows() == b.nrows()
            && a.row_stride() == b.row_stride()
            && a.col_stride() == b.col_stride();
        let (n, m) = (a.nrows(), b.nrows());
        let am = match &self.metric {
            Some(metric) => a * metric,
            None => a.to_owned(),
        };
        let mut values = &am * b.transpose();
        let mut slopes = if with_slopes { Mat::<f64>::zeros(n, m) } else { Mat::<f64>::zeros(0, 0) };
        match &self.family {
            KernelFamily::InnerProduct(g) => {
                let inv_d = 1.0 / d as f64;
                for j in 0..m {
                    for i in 0..n {
                        let t = values[(i, j)] * inv_d;
                        values[(i, j)] = g.value(t);
                        if with_slopes {
                            slopes[(i, j)] = g.derivative(t) * inv_d;
                        }
                    }
                }
            }
            family => {
                let norm_a: Vec<f64> = (0..n).map(|i| (0..d).map(|k| am[(i, k)] * a[(i, k)]).sum()).collect();
                let norm_b: Vec<f64> = if same {
                    norm_a.clone()
                } else {
                    let bm = match &self.metric {
                        Some(metric) => b * metric,
                        None => b.to_owned(),
                    };
                    (0..m).map(|j| (0..d).map(|k| bm[(j, k)] * b[(j, k)]).sum()).collect()
                };
                let h = self.bandwidth;
                for j in 0..m {
                    for i in 0..n {
                        let scale = norm_a[i] + norm_b[j];
                        let mut q = scale - 2.0 * values[(i, j)];
                        if q < -METRIC_PSD_TOL * scale.max(1.0) {
                            return Err(Error::NotPsd(q));
                        }
                        // coincident points up to round-off
                        if q <= 1e-12 * scale || (same && i == j) {
                            q = 0.0;
                        }
                        let k = self.radial_profile(q);
                        values[(i, j)] = k;
                        if with_slopes {
                            slopes[(i, j)] = match family {
                                KernelFamily::GaussianRadial => -k / h,
                                _ if q == 0.0 => 0.0,
                                _ => -k / (h * q.sqrt()),
                            };
                        }
                    }
                }
            }
        }
        if same {
            for j in 0..n {
                for i in (j + 1)..n {
                    values[(j, i)] = values[(i, j)];
                    if with_slopes {
                        slopes[(j, i)] = slopes[(i, j)];
                    }
                }
            }
        }
        Ok(CrossTerms { values, slopes })
    }
}
