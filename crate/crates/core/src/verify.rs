//! Numerical checks of the population identities and perturbation bounds
//! against exact small-dimension oracles.
//!
//! The building blocks (`lemma32_gap`, `kernel_fourier_residual`,
//! `dk_chain_check`, ...) return raw scalars. The `*_check` functions wrap them
//! into pass/fail [`CheckRecord`]s and are what `agop verify` runs.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use faer::{Mat, MatRef};
use rand::Rng;
use serde::Serialize;

use crate::agop::{self, AgopResult};
use crate::error::{Error, Result};
use crate::hermite::{GaussHermite, HermitePoly, Link};
use crate::kernel::{KernelSpec, Profile};
use crate::krr;
use crate::linalg;
use crate::model::{self, haar_subspace, sample_dataset, InputDist, Subspace};
use crate::rfm;
use crate::rng;
use crate::walsh::{self, WalshPoly};

/// Default column budget for [`build_walsh_design`].
pub const DESIGN_COLUMN_BUDGET: usize = 50_000;
/// Slack allowed on the perturbation inequality.
pub const DK_SLACK: f64 = 1e-8;

/// Multilinear representative of `h(Ux)` on the cube, by exact enumeration.
pub fn multilinear_target(link: &HermitePoly, u: &Subspace) -> Result<WalshPoly> {
    if link.latent_dim() != u.rank() {
        return Err(Error::DimensionMismatch { expected: u.rank(), got: link.latent_dim() });
    }
    let d = u.dim();
    walsh::walsh_coefficients(|x| model::target_eval(link, u, x), d, d.min(link.max_degree() as usize))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapReport {
    pub d: usize,
    pub r: usize,
    pub p: usize,
    pub mu: f64,
    pub fstar_norm_sq: f64,
    pub gap: f64,
    /// `gap · d / (μ ‖f*‖²)`.
    pub normalized_gap: f64,
}

/// `‖M_{≤p} - Uᵀ Σ_p U‖_op` between the cube AGOP of the multilinearized target
/// and the lifted latent Gaussian covariance.
pub fn lemma32_gap(link: &HermitePoly, u: &Subspace, p: usize) -> Result<GapReport> {
    let fstar = multilinear_target(link, u)?;
    let cube = fstar.population_agop_exact(p);
    let sigma = link.latent_sigma(p as u32);
    let lifted = u.basis().transpose() * &sigma * u.basis();
    let gap = linalg::op_norm_sym(linalg::symmetrize((&cube - &lifted).as_ref()).as_ref())?;
    let (d, r) = (u.dim(), u.rank());
    let mu = u.coherence();
    let fstar_norm_sq = fstar.l2_norm_sq();
    Ok(GapReport { d, r, p, mu, fstar_norm_sq, gap, normalized_gap: gap * d as f64 / (mu * fstar_norm_sq) })
}

/// `Φ_{≤p}`: one column per `|S| ≤ p` in [`walsh::enumerate_subsets`] order.
pub fn build_walsh_design(x: MatRef<'_, f64>, p: usize, column_budget: usize) -> Result<Mat<f64>> {
    let (n, d) = (x.nrows(), x.ncols());
    for j in 0..d {
        for i in 0..n {
            let v = x[(i, j)];
            if v != 1.0 && v != -1.0 {
                return Err(Error::NotOnHypercube { index: i * d + j, value: v });
            }
        }
    }
    let columns = walsh::count_subsets(d, p.min(d));
    if columns > column_budget {
        return Err(Error::BudgetExceeded { columns, budget: column_budget });
    }
    let subsets = walsh::enumerate_subsets(d, p.min(d))?;
    Ok(Mat::from_fn(n, subsets.len(), |i, c| subsets[c].members().iter().map(|&k| x[(i, k)]).product()))
}

/// Which block-diagonal `D` to subtract in [`kernel_fourier_residual`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagonalMode {
    /// The exact degree-k Walsh coefficient of `z ↦ g(Σz/d)` on the cube.
    Exact,
    /// `g^{(k)}(0) d^{-k}`.
    LeadingOrder,
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Exact degree-`k` coefficient `κ_k = 2^{-d} Σ_m g((d-2m)/d) K_k(m)` of the
/// inner-product kernel on the cube, `K_k` the Krawtchouk polynomial.
pub fn cube_kernel_coefficient(g: &Profile, d: usize, k: usize) -> f64 {
    let scale = 0.5f64.powi(d as i32);
    (0..=d)
        .map(|m| {
            let kraw: f64 = (0..=k.min(m))
                .map(|i| {
                    let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                    sign * binomial(k, i) * binomial(d - k, m - i)
                })
                .sum();
            g.value((d as f64 - 2.0 * m as f64) / d as f64) * kraw
        })
        .sum::<f64>()
        * scale
}

/// `‖K(X,X) - Φ_{≤p} D Φ_{≤p}ᵀ - (g(1) - g_p(1)) I‖_op` for the inner-product
/// kernel with profile `g` on cube points `X`.
pub fn kernel_fourier_residual(g: &Profile, x: MatRef<'_, f64>, p: usize, mode: DiagonalMode) -> Result<f64> {
    let d = x.ncols();
    let phi = build_walsh_design(x, p, DESIGN_COLUMN_BUDGET)?;
    let spec = KernelSpec::inner_product(g.clone());
    let k = spec.matrix(x, x)?;
    let mut block = Vec::with_capacity(p + 1);
    for deg in 0..=p.min(d) {
        block.push(match mode {
            DiagonalMode::Exact => cube_kernel_coefficient(g, d, deg),
            DiagonalMode::LeadingOrder => {
                g.derivative_at_zero(deg).ok_or(Error::MissingDerivative(deg))? / (d as f64).powi(deg as i32)
            }
        });
    }
    let subsets = walsh::enumerate_subsets(d, p.min(d))?;
    let scaled = Mat::from_fn(phi.nrows(), phi.ncols(), |i, c| phi[(i, c)] * block[subsets[c].degree()]);
    let low = &scaled * phi.transpose();
    let remainder = g.value(1.0) - g.taylor_truncation(p, 1.0)?;
    let mut resid = &k - &low;
    for i in 0..resid.nrows() {
        resid[(i, i)] -= remainder;
    }
    linalg::op_norm_sym(linalg::symmetrize(resid.as_ref()).as_ref())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DkReport {
    pub sin_theta: f64,
    pub eps_agop: f64,
    pub s_p: f64,
    pub rho_p: f64,
    /// `None` when `s_p ≤ 0`.
    pub bound: Option<f64>,
    pub violated: bool,
}

/// Compares the top-r eigenspace of `m_hat` with `u` against the
/// perturbation bound built from `m_pop`.
pub fn dk_check_matrices(m_hat: MatRef<'_, f64>, m_pop: MatRef<'_, f64>, u: &Subspace) -> Result<DkReport> {
    let top = AgopResult::from_matrix(linalg::symmetrize(m_hat))?.top_subspace(u.rank())?;
    let sin_theta = agop::sin_theta_op(&top, u)?;
    let eps_agop = linalg::op_norm_sym(linalg::symmetrize((m_hat - m_pop).as_ref()).as_ref())?;
    let (s_p, rho_p) = agop::s_rho(m_pop, u)?;
    let bound = agop::davis_kahan_bound(eps_agop, rho_p, s_p).ok();
    let violated = bound.is_some_and(|b| sin_theta > b + DK_SLACK);
    Ok(DkReport { sin_theta, eps_agop, s_p, rho_p, bound, violated })
}

#[derive(Clone, Copy, Debug)]
pub struct DkSetup {
    pub p: usize,
    pub n: usize,
    pub ridge: f64,
    pub noise_var: f64,
}

/// One KRR fit on cube data, then [`dk_check_matrices`] with the exact
/// `M_{≤p}` of the multilinearized target.
pub fn dk_chain_check(
    link: &HermitePoly,
    u: &Subspace,
    spec: &KernelSpec,
    setup: DkSetup,
    seed: u64,
) -> Result<DkReport> {
    let fstar = multilinear_target(link, u)?;
    let m_pop = fstar.population_agop_exact(setup.p);
    let data = sample_dataset(InputDist::Hypercube, u, link, setup.n, setup.noise_var, seed)?;
    let model = krr::fit(&data, spec, setup.ridge)?;
    let m_hat = rfm::training_agop(&model)?;
    dk_check_matrices(m_hat.matrix(), m_pop.as_ref(), u)
}

/// Outcome of one named check.
#[derive(Clone, Debug, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub passed: bool,
    pub scalars: BTreeMap<String, f64>,
    pub detail: String,
    pub runtime_s: f64,
}

impl CheckRecord {
    fn new(name: &str) -> Self {
        Self { name: name.into(), passed: true, scalars: BTreeMap::new(), detail: String::new(), runtime_s: 0.0 }
    }

    fn scalar(&mut self, key: impl Into<String>, value: f64) {
        self.scalars.insert(key.into(), value);
    }

    fn fail(&mut self, why: impl AsRef<str>) {
        self.passed = false;
        if !self.detail.is_empty() {
            self.detail.push_str("; ");
        }
        self.detail.push_str(why.as_ref());
    }

    fn errored(name: &str, err: Error) -> Self {
        let mut rec = Self::new(name);
        rec.fail(format!("error: {err}"));
        rec
    }
}

fn timed(name: &str, body: impl FnOnce(&mut CheckRecord) -> Result<()>) -> CheckRecord {
    let start = Instant::now();
    let mut rec = CheckRecord::new(name);
    if let Err(e) = body(&mut rec) {
        rec = CheckRecord::errored(name, e);
    }
    rec.runtime_s = start.elapsed().as_secs_f64();
    rec
}

/// Average of `∇p ∇pᵀ` over all cube points, `p` truncated to degree `cap`.
fn brute_force_agop(poly: &WalshPoly, cap: usize) -> Result<Mat<f64>> {
    let d = poly.dim();
    let low = poly.truncate(cap);
    let mut acc = Mat::<f64>::zeros(d, d);
    let mut x = vec![0.0; d];
    for mask in 0..(1u64 << d) {
        walsh::cube_point(mask, d, &mut x);
        let g = low.gradient(&x);
        for j in 0..d {
            for i in 0..d {
                acc[(i, j)] += g[i] * g[j];
            }
        }
    }
    Ok(acc * faer::Scale(0.5f64.powi(d as i32)))
}

/// Random multilinear polynomial with a handful of terms of degree ≤ `max_deg`.
pub fn random_walsh_poly(d: usize, max_deg: usize, terms: usize, seed: u64) -> Result<WalshPoly> {
    let mut s = rng::stream(seed);
    let mut entries = Vec::with_capacity(terms);
    for _ in 0..terms {
        let deg = s.random_range(0..=max_deg.min(d));
        let mut members: Vec<usize> = (0..d).collect();
        for i in 0..deg {
            let j = s.random_range(i..d);
            members.swap(i, j);
        }
        members.truncate(deg);
        entries.push((walsh::SubsetIndex::new(members, d)?, rng::standard_normal(&mut s)));
    }
    WalshPoly::from_terms(d, entries)
}

/// Exact population AGOP versus full enumeration of gradients.
pub fn walsh_oracle_check(polys: usize, max_dim: usize, seed: u64) -> CheckRecord {
    timed("walsh_agop_oracle", |rec| {
        let mut worst: f64 = 0.0;
        for k in 0..polys {
            let d = 2 + k % (max_dim - 1);
            let deg = 1 + k % 4;
            let poly = random_walsh_poly(d, deg, 3 + k % 6, rng::derive_seed(seed, &[k as u64]))?;
            let cap = deg.min(d);
            let exact = poly.population_agop_exact(cap);
            let brute = brute_force_agop(&poly, cap)?;
            worst = worst.max(linalg::max_abs_diff(exact.as_ref(), brute.as_ref()));
        }
        rec.scalar("max_abs_diff", worst);
        if worst > 1e-10 {
            rec.fail(format!("max entry difference {worst:e} > 1e-10"));
        }
        Ok(())
    })
}

/// Closed-form `Σ_p` against a Monte-Carlo gradient covariance, and the full
/// covariances `[[5]]` and `3I`.
pub fn latent_sigma_check(samples: usize, seed: u64) -> CheckRecord {
    timed("latent_sigma_monte_carlo", |rec| {
        let cases = [(Link::L1, 1u32), (Link::L1, 4), (Link::L2, 2), (Link::L2, 4)];
        let mut worst_z: f64 = 0.0;
        for (ci, (link, p)) in cases.into_iter().enumerate() {
            let poly = link.poly();
            let truncated = poly.truncate(p);
            let r = poly.latent_dim();
            let closed = poly.latent_sigma(p);
            let mut s = rng::stream(rng::derive_seed(seed, &[ci as u64]));
            let mut sum = vec![0.0; r * r];
            let mut sum_sq = vec![0.0; r * r];
            let mut z = vec![0.0; r];
            for _ in 0..samples {
                for v in z.iter_mut() {
                    *v = rng::standard_normal(&mut s);
                }
                let g = truncated.gradient(&z);
                for a in 0..r {
                    for b in 0..r {
                        let v = g[a] * g[b];
                        sum[a * r + b] += v;
                        sum_sq[a * r + b] += v * v;
                    }
                }
            }
            let n = samples as f64;
            for a in 0..r {
                for b in 0..r {
                    let mean = sum[a * r + b] / n;
                    let var = (sum_sq[a * r + b] / n - mean * mean).max(0.0) * n / (n - 1.0);
                    let se = (var / n).sqrt();
                    let diff = (mean - closed[(a, b)]).abs();
                    let z = if se > 0.0 { diff / se } else if diff < 1e-12 { 0.0 } else { f64::INFINITY };
                    worst_z = worst_z.max(z);
                }
            }
            rec.scalar(format!("{}_p{}_sigma00", link.name(), p), closed[(0, 0)]);
        }
        rec.scalar("max_standard_errors", worst_z);
        if worst_z > 4.0 {
            rec.fail(format!("Monte-Carlo deviation of {worst_z:.2} standard errors"));
        }
        let l1 = Link::L1.poly().latent_sigma(4);
        let l2 = Link::L2.poly().latent_sigma(4);
        let l1_dev = (l1[(0, 0)] - 5.0).abs();
        let l2_dev = linalg::max_abs_diff(l2.as_ref(), (Mat::<f64>::identity(2, 2) * faer::Scale(3.0)).as_ref());
        rec.scalar("l1_full_dev", l1_dev);
        rec.scalar("l2_full_dev", l2_dev);
        if l1_dev > 1e-12 || l2_dev > 1e-12 {
            rec.fail("full covariances differ from [[5]] and 3I");
        }
        Ok(())
    })
}

/// Gaussian norms of both links by 64-node Gauss–Hermite quadrature.
pub fn gaussian_norm_check() -> CheckRecord {
    timed("gaussian_norms", |rec| {
        let gh = GaussHermite::new(64)?;
        for link in [Link::L1, Link::L2] {
            let poly = link.poly();
            let closed = poly.gaussian_l2_norm_sq();
            let quad = gh.integrate_nd(poly.latent_dim(), |z| poly.eval(z).powi(2));
            let rel = (closed - quad).abs() / quad.abs();
            rec.scalar(format!("{}_closed", link.name()), closed);
            rec.scalar(format!("{}_quadrature", link.name()), quad);
            if rel > 1e-10 || (closed - 2.0).abs() > 1e-12 {
                rec.fail(format!("{}: closed {closed}, quadrature {quad}", link.name()));
            }
        }
        Ok(())
    })
}

fn random_psd(s: &mut rng::StreamRng, d: usize) -> Mat<f64> {
    let a = Mat::from_fn(d, d, |_, _| rng::standard_normal(s));
    linalg::symmetrize((&a * a.transpose() / d as f64).as_ref())
}

fn relative_l2(a: &[f64], b: &[f64]) -> f64 {
    let num = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// Kernel gradients and KRR gradient fields against central differences at
/// step 1e-5, over `cases` random instances per kernel family.
pub fn gradient_fd_check(cases: usize, seed: u64) -> CheckRecord {
    timed("gradient_finite_differences", |rec| {
        const STEP: f64 = 1e-5;
        let mut s = rng::stream(seed);
        let families = ["gaussian", "laplace", "exp_inner"];
        for name in families {
            let (mut worst_kernel, mut worst_field): (f64, f64) = (0.0, 0.0);
            for case in 0..cases {
                let d = 2 + case % 7;
                let metric = random_psd(&mut s, d);
                let base = match name {
                    "gaussian" => KernelSpec::gaussian(d as f64)?,
                    "laplace" => KernelSpec::laplace((d as f64).sqrt())?,
                    _ => KernelSpec::inner_product(Profile::Exp),
                };
                let spec = base.with_metric(metric)?;
                let x: Vec<f64> = (0..d).map(|_| rng::standard_normal(&mut s)).collect();
                let xp: Vec<f64> = (0..d).map(|_| rng::standard_normal(&mut s)).collect();
                let an = spec.gradient_x(&x, &xp);
                let mut fd = vec![0.0; d];
                for k in 0..d {
                    let (mut a, mut b) = (x.clone(), x.clone());
                    a[k] += STEP;
                    b[k] -= STEP;
                    fd[k] = (spec.value(&a, &xp)? - spec.value(&b, &xp)?) / (2.0 * STEP);
                }
                worst_kernel = worst_kernel.max(relative_l2(&an, &fd));

                let n = 8;
                let train = Mat::from_fn(n, d, |_, _| rng::standard_normal(&mut s));
                let alpha: Vec<f64> = (0..n).map(|_| rng::standard_normal(&mut s)).collect();
                let model = krr::KrrModel::from_parts(spec, train, alpha, 0.0)?;
                let probe = Mat::from_fn(1, d, |_, k| x[k]);
                let field = model.gradient_field(probe.as_ref())?;
                let mut fd = vec![0.0; d];
                for k in 0..d {
                    let (mut a, mut b) = (probe.clone(), probe.clone());
                    a[(0, k)] += STEP;
                    b[(0, k)] -= STEP;
                    fd[k] = (model.predict(a.as_ref())?[0] - model.predict(b.as_ref())?[0]) / (2.0 * STEP);
                }
                worst_field = worst_field.max(relative_l2(&linalg::row(field.as_ref(), 0), &fd));
            }
            rec.scalar(format!("{name}_kernel_rel"), worst_kernel);
            rec.scalar(format!("{name}_field_rel"), worst_field);
            if worst_kernel > 1e-4 || worst_field > 1e-4 {
                rec.fail(format!("{name}: relative errors {worst_kernel:e} / {worst_field:e}"));
            }
        }
        Ok(())
    })
}

/// Normalized gap of L1 under Haar subspaces stays within a factor 3 across
/// `dims` (per-dimension mean over `seeds`), and the axis-aligned `z²`
/// counterexample has gap exactly 4.
pub fn lemma32_scaling_check(dims: &[usize], seeds: usize, p: usize, base_seed: u64) -> CheckRecord {
    timed("lemma32_scaling", |rec| {
        let link = Link::L1.poly();
        let mut means = Vec::with_capacity(dims.len());
        for &d in dims {
            let mut total = 0.0;
            for t in 0..seeds {
                let u = haar_subspace(d, 1, rng::derive_seed(base_seed, &[d as u64, t as u64]))?;
                total += lemma32_gap(&link, &u, p)?.normalized_gap;
            }
            let mean = total / seeds as f64;
            rec.scalar(format!("normalized_gap_d{d}"), mean);
            means.push(mean);
        }
        let max = means.iter().copied().fold(f64::MIN, f64::max);
        let min = means.iter().copied().fold(f64::MAX, f64::min);
        rec.scalar("max_over_min", max / min);
        if !(max / min <= 3.0) {
            rec.fail(format!("normalized gap ratio {:.3} > 3", max / min));
        }
        let square = HermitePoly::from_terms(1, [(crate::hermite::MultiIndex::new(vec![2]), 1.0), (crate::hermite::MultiIndex::new(vec![0]), 1.0)])?;
        let axis = Subspace::axis_aligned(dims[0], 1)?;
        let counter = lemma32_gap(&square, &axis, 2)?;
        rec.scalar("square_axis_gap", counter.gap);
        if (counter.gap - 4.0).abs() > 1e-12 {
            rec.fail(format!("axis-aligned z² gap {} != 4", counter.gap));
        }
        Ok(())
    })
}

fn random_cube(n: usize, d: usize, seed: u64) -> Mat<f64> {
    let mut s = rng::stream(seed);
    Mat::from_fn(n, d, |_, _| if s.random::<bool>() { 1.0 } else { -1.0 })
}

/// Seed-averaged Fourier residual of the exponential inner-product kernel at
/// `p = 1`, `n = ⌈d^1.2⌉`, strictly decreasing in `d`.
pub fn fourier_residual_check(dims: &[usize], seeds: usize, base_seed: u64) -> CheckRecord {
    timed("kernel_fourier_residual", |rec| {
        let mut exact_means = Vec::with_capacity(dims.len());
        for &d in dims {
            let n = (d as f64).powf(1.2).ceil() as usize;
            let (mut exact, mut leading) = (0.0, 0.0);
            for t in 0..seeds {
                let x = random_cube(n, d, rng::derive_seed(base_seed, &[d as u64, t as u64]));
                exact += kernel_fourier_residual(&Profile::Exp, x.as_ref(), 1, DiagonalMode::Exact)?;
                leading += kernel_fourier_residual(&Profile::Exp, x.as_ref(), 1, DiagonalMode::LeadingOrder)?;
            }
            rec.scalar(format!("residual_d{d}"), exact / seeds as f64);
            rec.scalar(format!("leading_order_residual_d{d}"), leading / seeds as f64);
            exact_means.push(exact / seeds as f64);
        }
        if !exact_means.windows(2).all(|w| w[1] < w[0]) {
            rec.fail(format!("residuals not strictly decreasing: {exact_means:?}"));
        }
        Ok(())
    })
}

/// The perturbation inequality on `seeds` KRR fits of L1 with Haar subspaces.
pub fn dk_chain_batch_check(d: usize, n: usize, seeds: usize, base_seed: u64) -> CheckRecord {
    timed("davis_kahan_chain", |rec| {
        let link = Link::L1.poly();
        let spec = KernelSpec::gaussian(d as f64)?;
        let p = ((n as f64).ln() / (d as f64).ln()).floor().max(1.0) as usize;
        let setup = DkSetup { p, n, ridge: 1e-6, noise_var: 0.01 };
        let (mut violations, mut applicable) = (0usize, 0usize);
        let (mut max_sin, mut max_ratio): (f64, f64) = (0.0, 0.0);
        for t in 0..seeds {
            let seed = rng::derive_seed(base_seed, &[t as u64]);
            let u = haar_subspace(d, 1, seed)?;
            let report = dk_chain_check(&link, &u, &spec, setup, rng::derive_seed(seed, &[1]))?;
            max_sin = max_sin.max(report.sin_theta);
            if let Some(bound) = report.bound {
                applicable += 1;
                max_ratio = max_ratio.max(report.sin_theta / bound.max(f64::MIN_POSITIVE));
                if report.violated {
                    violations += 1;
                }
            }
        }
        rec.scalar("p", p as f64);
        rec.scalar("instances", seeds as f64);
        rec.scalar("applicable", applicable as f64);
        rec.scalar("violations", violations as f64);
        rec.scalar("max_sin_theta", max_sin);
        rec.scalar("max_sin_over_bound", max_ratio);
        if violations > 0 {
            rec.fail(format!("{violations} violations"));
        }
        if applicable < seeds {
            rec.fail(format!("spectral gap vanished on {} instances", seeds - applicable));
        }
        Ok(())
    })
}

/// Mean rescaling residual after one RFM step, per dimension.
pub fn prop42_mean_residual(d: usize, alpha: f64, trials: usize, base_seed: u64) -> Result<f64> {
    let link = Link::L1.poly();
    let sigma = link.latent_sigma(1);
    let eta = 0.01 * d as f64;
    let n = (d as f64).powf(alpha).floor() as usize;
    let spec = KernelSpec::gaussian(d as f64)?;
    let mut total = 0.0;
    for t in 0..trials {
        let seed = rng::derive_seed(base_seed, &[d as u64, t as u64]);
        let u = haar_subspace(d, 1, seed)?;
        let train = sample_dataset(InputDist::Hypercube, &u, &link, n, 0.01, rng::derive_seed(seed, &[1]))?;
        let model = krr::fit(&train, &spec, 1e-6)?;
        let m_hat = rfm::training_agop(&model)?;
        let c_eta = linalg::trace(m_hat.matrix()) + eta * d as f64;
        let m2 = rfm::metric_update(m_hat.matrix(), eta, d)?;
        let samples = random_cube(2000, d, rng::derive_seed(seed, &[2]));
        total += rfm::prop42_residual(m2.as_ref(), &u, sigma.as_ref(), eta, c_eta, samples.as_ref())?;
    }
    Ok(total / trials as f64)
}

pub fn prop42_scaling_check(dims: &[usize], alpha: f64, trials: usize, base_seed: u64) -> CheckRecord {
    timed("prop42_rescaling", |rec| {
        let mut means = Vec::with_capacity(dims.len());
        for &d in dims {
            let m = prop42_mean_residual(d, alpha, trials, base_seed)?;
            rec.scalar(format!("residual_d{d}"), m);
            means.push(m);
        }
        if !means.windows(2).all(|w| w[1] < w[0]) {
            rec.fail(format!("residuals not decreasing: {means:?}"));
        }
        Ok(())
    })
}

/// Runs every check. `fast` shrinks dimensions, sample sizes, and seed counts.
pub fn run_suite(fast: bool) -> Vec<CheckRecord> {
    let seed = 20_240_601;
    if fast {
        vec![
            walsh_oracle_check(8, 8, seed),
            latent_sigma_check(100_000, seed),
            gaussian_norm_check(),
            gradient_fd_check(20, seed),
            lemma32_scaling_check(&[8, 10], 3, 4, seed),
            fourier_residual_check(&[16, 32], 2, seed),
            dk_chain_batch_check(10, 300, 5, seed),
            prop42_scaling_check(&[20, 40], 1.2, 2, seed),
        ]
    } else {
        vec![
            walsh_oracle_check(20, 10, seed),
            latent_sigma_check(1_000_000, seed),
            gaussian_norm_check(),
            gradient_fd_check(100, seed),
            lemma32_scaling_check(&[8, 12, 16], 10, 4, seed),
            fourier_residual_check(&[16, 32, 64], 5, seed),
            dk_chain_batch_check(14, 2000, 50, seed),
            prop42_scaling_check(&[20, 40, 80], 1.2, 5, seed),
        ]
    }
}

/// One JSON object per line.
pub fn write_report<W: Write>(records: &[CheckRecord], mut out: W) -> std::io::Result<()> {
    for rec in records {
        serde_json::to_writer(&mut out, rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
