//! Probabilists' Hermite polynomials in `r` latent variables.
//!
//! `He_0 = 1`, `He_1 = t`, `He_{n+1}(t) = t He_n(t) - n He_{n-1}(t)`; these are
//! orthogonal under the standard Gaussian with `E[He_n^2] = n!`. A
//! [`HermitePoly`] stores `h(z) = Σ_λ a_λ He_λ(z)` with
//! `He_λ(z) = Π_j He_{λ_j}(z_j)`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use faer::Mat;
use itertools::Itertools;

use crate::error::{Error, Result};

/// Factorials and inversion coefficients are exact up to this total degree.
pub const MAX_DEGREE: usize = 20;

pub fn factorial(n: u32) -> u128 {
    (1..=n as u128).product()
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Self {
        Self(entries)
    }

    pub fn zeros(r: usize) -> Self {
        Self(vec![0; r])
    }

    pub fn unit(r: usize, s: usize) -> Self {
        let mut v = vec![0; r];
        v[s] = 1;
        Self(v)
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// `λ! = Π_j λ_j!`, exact in integers then promoted.
    pub fn factorial(&self) -> f64 {
        self.0.iter().map(|&k| factorial(k)).product::<u128>() as f64
    }

    pub fn incremented(&self, s: usize) -> Self {
        let mut v = self.0.clone();
        v[s] += 1;
        Self(v)
    }

    pub fn decremented(&self, s: usize) -> Option<Self> {
        let mut v = self.0.clone();
        v[s] = v[s].checked_sub(1)?;
        Some(Self(v))
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.degree().cmp(&other.degree()).then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.0.iter().join(","))
    }
}

/// `He_n(t)` by the three-term recursion.
pub fn hermite_eval(n: u32, t: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = t;
    for k in 1..n {
        let next = t * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `[He_0(t), ..., He_n(t)]`.
pub fn hermite_eval_all(n: u32, t: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n as usize + 1);
    out.push(1.0);
    if n >= 1 {
        out.push(t);
    }
    for k in 1..n as usize {
        let next = t * out[k] - k as f64 * out[k - 1];
        out.push(next);
    }
    out
}

/// Monomial coefficients of `He_n`: `He_n(t) = Σ_k c_k t^{n-2k}` with
/// `c_k = (-1)^k n! / (k! (n-2k)! 2^k)`. Returned as `(power, coefficient)`.
fn hermite_monomial_expansion(n: u32) -> Vec<(u32, f64)> {
    (0..=n / 2)
        .map(|k| {
            let mag = factorial(n) / (factorial(k) * factorial(n - 2 * k) * (1u128 << k));
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            (n - 2 * k, sign * mag as f64)
        })
        .collect()
}

/// Univariate inversion weight `a! / (l! 2^v v!)` with `v = (a - l)/2`, or
/// `None` when `a - l` is negative or odd.
fn univariate_inversion(a: u32, l: u32) -> Option<u128> {
    if l > a || (a - l) % 2 == 1 {
        return None;
    }
    let v = (a - l) / 2;
    let falling: u128 = (l as u128 + 1..=a as u128).product();
    Some(falling / ((1u128 << v) * factorial(v)))
}

/// `B_{α,λ}` in `z^α = Σ_{λ∈𝒜(α)} B_{α,λ} He_λ(z)`, or `None` if `λ ∉ 𝒜(α)`.
pub fn inversion_coefficient(alpha: &MultiIndex, lambda: &MultiIndex) -> Option<f64> {
    assert_eq!(alpha.len(), lambda.len());
    let mut prod: u128 = 1;
    for (&a, &l) in alpha.entries().iter().zip(lambda.entries()) {
        prod *= univariate_inversion(a, l)?;
    }
    Some(prod as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct HermitePoly {
    r: usize,
    coeffs: BTreeMap<MultiIndex, f64>,
}

impl HermitePoly {
    pub fn zero(r: usize) -> Self {
        Self { r, coeffs: BTreeMap::new() }
    }

    pub fn from_terms<I>(r: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (MultiIndex, f64)>,
    {
        let mut coeffs = BTreeMap::new();
        for (m, c) in terms {
            if m.len() != r {
                return Err(Error::DimensionMismatch { expected: r, got: m.len() });
            }
            *coeffs.entry(m).or_insert(0.0) += c;
        }
        Ok(Self { r, coeffs })
    }

    pub fn latent_dim(&self) -> usize {
        self.r
    }

    pub fn max_degree(&self) -> u32 {
        self.coeffs.keys().map(MultiIndex::degree).max().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.coeffs.iter().map(|(m, &c)| (m, c))
    }

    pub fn coefficient(&self, m: &MultiIndex) -> f64 {
        self.coeffs.get(m).copied().unwrap_or(0.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { r: self.r, coeffs: self.coeffs.iter().map(|(m, &c)| (m.clone(), c * factor)).collect() }
    }

    fn filtered(&self, keep: impl Fn(u32) -> bool) -> Self {
        Self {
            r: self.r,
            coeffs: self
                .coeffs
                .iter()
                .filter(|(m, _)| keep(m.degree()))
                .map(|(m, &c)| (m.clone(), c))
                .collect(),
        }
    }

    /// `h_q`, the homogeneous Hermite component of degree `q`.
    pub fn homogeneous(&self, q: u32) -> Self {
        self.filtered(|k| k == q)
    }

    /// `h_{≤p}`.
    pub fn truncate(&self, p: u32) -> Self {
        self.filtered(|k| k <= p)
    }

    /// `h_{>p}`.
    pub fn tail(&self, p: u32) -> Self {
        self.filtered(|k| k > p)
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        assert_eq!(z.len(), self.r, "latent point has wrong length");
        let deg = self.max_degree();
        let tables: Vec<Vec<f64>> = z.iter().map(|&t| hermite_eval_all(deg, t)).collect();
        self.coeffs
            .iter()
            .map(|(m, &c)| c * m.entries().iter().zip(&tables).map(|(&k, tab)| tab[k as usize]).product::<f64>())
            .sum()
    }

    /// Analytic gradient, using `He_n' = n He_{n-1}`.
    pub fn gradient(&self, z: &[f64]) -> Vec<f64> {
        assert_eq!(z.len(), self.r, "latent point has wrong length");
        let deg = self.max_degree();
        let tables: Vec<Vec<f64>> = z.iter().map(|&t| hermite_eval_all(deg, t)).collect();
        let mut g = vec![0.0; self.r];
        for (m, &c) in &self.coeffs {
            let e = m.entries();
            for s in 0..self.r {
                if e[s] == 0 {
                    continue;
                }
                let mut term = c * e[s] as f64 * tables[s][e[s] as usize - 1];
                for j in (0..self.r).filter(|&j| j != s) {
                    term *= tables[j][e[j] as usize];
                }
                g[s] += term;
            }
        }
        g
    }

    /// `E_{z~N(0,I_r)}[h(z)^2] = Σ_λ a_λ^2 λ!`.
    pub fn gaussian_l2_norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|(m, &c)| c * c * m.factorial()).sum()
    }

    /// Degree-≤p latent gradient covariance `Σ_p = Σ_{q=1}^p G_q` with
    ///
    /// `(G_q)_{s,t} = Σ_{|γ|=q-1} (γ_s+1)(γ_t+1) a_{γ+e_s} a_{γ+e_t} γ!`.
    pub fn latent_sigma(&self, p: u32) -> Mat<f64> {
        let r = self.r;
        let mut gammas: BTreeMap<MultiIndex, ()> = BTreeMap::new();
        for m in self.coeffs.keys().filter(|m| (1..=p).contains(&m.degree())) {
            for s in 0..r {
                if let Some(g) = m.decremented(s) {
                    gammas.insert(g, ());
                }
            }
        }
        let mut sigma = Mat::<f64>::zeros(r, r);
        for gamma in gammas.keys() {
            let w: Vec<f64> = (0..r)
                .map(|s| (gamma.entries()[s] + 1) as f64 * self.coefficient(&gamma.incremented(s)))
                .collect();
            let gf = gamma.factorial();
            for t in 0..r {
                for s in 0..r {
                    sigma[(s, t)] += gf * w[s] * w[t];
                }
            }
        }
        sigma
    }

    /// Expansion in the monomial basis `z^α`.
    pub fn to_monomials(&self) -> BTreeMap<MultiIndex, f64> {
        let mut out: BTreeMap<MultiIndex, f64> = BTreeMap::new();
        for (m, &c) in &self.coeffs {
            let per_axis: Vec<Vec<(u32, f64)>> =
                m.entries().iter().map(|&k| hermite_monomial_expansion(k)).collect();
            for combo in per_axis.iter().multi_cartesian_product() {
                let alpha = MultiIndex::new(combo.iter().map(|(pow, _)| *pow).collect());
                let coef: f64 = combo.iter().map(|(_, c)| *c).product();
                *out.entry(alpha).or_insert(0.0) += c * coef;
            }
        }
        out.retain(|_, c| *c != 0.0);
        out
    }
}

/// Converts monomial coefficients `b_α` into Hermite coefficients
/// `a_λ = Σ_α b_α B_{α,λ}`.
pub fn monomial_to_hermite(r: usize, monomials: &BTreeMap<MultiIndex, f64>) -> Result<HermitePoly> {
    let mut coeffs: BTreeMap<MultiIndex, f64> = BTreeMap::new();
    for (alpha, &b) in monomials {
        if alpha.len() != r {
            return Err(Error::DimensionMismatch { expected: r, got: alpha.len() });
        }
        if alpha.degree() as usize > MAX_DEGREE {
            return Err(Error::InvalidArgument(format!(
                "monomial degree {} exceeds the supported maximum {MAX_DEGREE}",
                alpha.degree()
            )));
        }
        let ranges: Vec<Vec<u32>> =
            alpha.entries().iter().map(|&a| (0..=a).rev().step_by(2).collect()).collect();
        for lambda in ranges.iter().multi_cartesian_product() {
            let lambda = MultiIndex::new(lambda.into_iter().copied().collect());
            let weight = inversion_coefficient(alpha, &lambda).expect("parity matched by construction");
            *coeffs.entry(lambda).or_insert(0.0) += b * weight;
        }
    }
    Ok(HermitePoly { r, coeffs })
}

/// The built-in link functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Link {
    /// `He_1(z_1) + He_4(z_1)/√24`, single index.
    L1,
    /// `He_1(z_1)He_1(z_2) + ½ He_2(z_1)He_2(z_2)`, two indices.
    L2,
}

impl Link {
    pub fn name(self) -> &'static str {
        match self {
            Link::L1 => "L1",
            Link::L2 => "L2",
        }
    }

    pub fn latent_dim(self) -> usize {
        match self {
            Link::L1 => 1,
            Link::L2 => 2,
        }
    }

    pub fn poly(self) -> HermitePoly {
        let terms = match self {
            Link::L1 => vec![
                (MultiIndex::new(vec![1]), 1.0),
                (MultiIndex::new(vec![4]), 1.0 / 24f64.sqrt()),
            ],
            Link::L2 => vec![(MultiIndex::new(vec![1, 1]), 1.0), (MultiIndex::new(vec![2, 2]), 0.5)],
        };
        HermitePoly::from_terms(self.latent_dim(), terms).expect("built-in links are well formed")
    }
}

impl FromStr for Link {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "L1" | "l1" => Ok(Link::L1),
            "L2" | "l2" => Ok(Link::L2),
            other => Err(Error::InvalidArgument(format!("unknown link '{other}' (expected L1 or L2)"))),
        }
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Gauss–Hermite rule for the standard Gaussian measure (weights sum to one).
///
/// Nodes come from the Golub–Welsch eigenproblem, polished by Newton steps on
/// `He_n`; weights use `w_k = n! / (n^2 He_{n-1}(x_k)^2)`.
#[derive(Clone, Debug)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("quadrature needs at least one node".into()));
        }
        let jacobi = Mat::from_fn(n, n, |i, j| {
            if i.abs_diff(j) == 1 {
                (i.max(j) as f64).sqrt()
            } else {
                0.0
            }
        });
        let mut nodes = crate::linalg::sym_eigenvalues_desc(jacobi.as_ref())?;
        nodes.reverse();
        let nn = n as u32;
        for x in nodes.iter_mut() {
            for _ in 0..3 {
                let he = hermite_eval_all(nn, *x);
                let deriv = n as f64 * he[n - 1];
                if deriv == 0.0 {
                    break;
                }
                *x -= he[n] / deriv;
            }
        }
        let log_nfact: f64 = (1..=n).map(|k| (k as f64).ln()).sum();
        let weights = nodes
            .iter()
            .map(|&x| {
                let prev = hermite_eval(nn - 1, x);
                (log_nfact - 2.0 * (n as f64).ln() - 2.0 * prev.abs().ln()).exp()
            })
            .collect();
        Ok(Self { nodes, weights })
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Tensor-product rule over `R^r`.
    pub fn integrate_nd(&self, r: usize, f: impl Fn(&[f64]) -> f64) -> f64 {
        let n = self.nodes.len();
        let mut idx = vec![0usize; r];
        let mut z = vec![0.0; r];
        let mut acc = 0.0;
        loop {
            let mut w = 1.0;
            for (k, &i) in idx.iter().enumerate() {
                z[k] = self.nodes[i];
                w *= self.weights[i];
            }
            acc += w * f(&z);
            let mut k = 0;
            loop {
                if k == r {
                    return acc;
                }
                idx[k] += 1;
                if idx[k] < n {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn mi(v: &[u32]) -> MultiIndex {
        MultiIndex::new(v.to_vec())
    }

    #[test]
    fn recursion_values() {
        assert_eq!(hermite_eval(0, 7.3), 1.0);
        assert_eq!(hermite_eval(2, 1.0), 0.0);
        assert_eq!(hermite_eval(4, 0.0), 3.0);
        assert_eq!(hermite_eval(4, 1.0), -2.0);
        let all = hermite_eval_all(5, 0.7);
        for (n, v) in all.iter().enumerate() {
            assert_eq!(*v, hermite_eval(n as u32, 0.7));
        }
    }

    #[test]
    fn inversion_examples() {
        let single = |pow: u32| {
            let mut m = BTreeMap::new();
            m.insert(mi(&[pow]), 1.0);
            monomial_to_hermite(1, &m).unwrap()
        };
        let z = single(1);
        assert_eq!(z.coefficient(&mi(&[1])), 1.0);
        assert_eq!(z.terms().count(), 1);

        let z2 = single(2);
        assert_eq!(z2.coefficient(&mi(&[2])), 1.0);
        assert_eq!(z2.coefficient(&mi(&[0])), 1.0);

        let z4 = single(4);
        assert_eq!(z4.coefficient(&mi(&[4])), 1.0);
        assert_eq!(z4.coefficient(&mi(&[2])), 6.0);
        assert_eq!(z4.coefficient(&mi(&[0])), 3.0);

        // Projection oracle: <z^4, He_k> / k! by 32-node quadrature.
        let gh = GaussHermite::new(32).unwrap();
        for k in 0..=4u32 {
            let proj = gh.integrate(|t| t.powi(4) * hermite_eval(k, t)) / factorial(k) as f64;
            assert!((proj - z4.coefficient(&mi(&[k]))).abs() < 1e-10, "k={k}");
        }
    }

    #[test]
    fn inversion_rejects_high_degree() {
        let mut m = BTreeMap::new();
        m.insert(mi(&[21]), 1.0);
        assert!(monomial_to_hermite(1, &m).is_err());
    }

    #[test]
    fn inversion_round_trip() {
        // Mixed bivariate polynomial of degree ≤ 6.
        let mut m = BTreeMap::new();
        m.insert(mi(&[0, 0]), 0.5);
        m.insert(mi(&[3, 1]), -1.5);
        m.insert(mi(&[2, 4]), 2.0);
        m.insert(mi(&[6, 0]), 0.25);
        m.insert(mi(&[1, 1]), 1.0);
        let h = monomial_to_hermite(2, &m).unwrap();
        let back = h.to_monomials();
        let keys: std::collections::BTreeSet<_> = m.keys().chain(back.keys()).cloned().collect();
        for k in keys {
            let a = m.get(&k).copied().unwrap_or(0.0);
            let b = back.get(&k).copied().unwrap_or(0.0);
            assert!((a - b).abs() < 1e-10, "{k}: {a} vs {b}");
        }
        // and pointwise
        let z = [0.3f64, -1.2];
        let direct: f64 = m
            .iter()
            .map(|(a, c)| c * z[0].powi(a.entries()[0] as i32) * z[1].powi(a.entries()[1] as i32))
            .sum();
        assert!((h.eval(&z) - direct).abs() < 1e-10);
    }

    #[test]
    fn sigma_examples() {
        let he1 = HermitePoly::from_terms(1, vec![(mi(&[1]), 1.0)]).unwrap();
        assert_eq!(he1.latent_sigma(1)[(0, 0)], 1.0);

        let l1 = Link::L1.poly();
        assert!((l1.latent_sigma(4)[(0, 0)] - 5.0).abs() < 1e-12);
        assert!((l1.latent_sigma(1)[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((l1.latent_sigma(3)[(0, 0)] - 1.0).abs() < 1e-12);

        let l2 = Link::L2.poly();
        let s2 = l2.latent_sigma(2);
        let s4 = l2.latent_sigma(4);
        for i in 0..2 {
            for j in 0..2 {
                let eye = if i == j { 1.0 } else { 0.0 };
                assert!((s2[(i, j)] - eye).abs() < 1e-12);
                assert!((s4[(i, j)] - 3.0 * eye).abs() < 1e-12);
            }
        }
        assert_eq!(l2.latent_sigma(0)[(0, 0)], 0.0);
    }

    #[test]
    fn norm_examples() {
        assert!((Link::L1.poly().gaussian_l2_norm_sq() - 2.0).abs() < 1e-14);
        assert!((Link::L2.poly().gaussian_l2_norm_sq() - 2.0).abs() < 1e-14);
        assert_eq!(HermitePoly::zero(3).gaussian_l2_norm_sq(), 0.0);
    }

    #[test]
    fn norm_splits_orthogonally() {
        for link in [Link::L1, Link::L2] {
            let h = link.poly();
            for p in 0..=5 {
                let total = h.truncate(p).gaussian_l2_norm_sq() + h.tail(p).gaussian_l2_norm_sq();
                assert!((total - h.gaussian_l2_norm_sq()).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn multivariate_eval_examples() {
        let l1 = Link::L1.poly();
        assert!((l1.eval(&[0.0]) - 3.0 / 24f64.sqrt()).abs() < 1e-15);
        let l2 = Link::L2.poly();
        assert!((l2.eval(&[1.0, 1.0]) - 1.0).abs() < 1e-15);
        let c = HermitePoly::from_terms(2, vec![(mi(&[0, 0]), 4.5)]).unwrap();
        assert_eq!(c.eval(&[0.1, -9.0]), 4.5);
    }

    #[test]
    fn quadrature_orthogonality() {
        let gh = GaussHermite::new(32).unwrap();
        assert!((gh.weights.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        for n in 0..=8u32 {
            for m in 0..=8u32 {
                let v = gh.integrate(|t| hermite_eval(n, t) * hermite_eval(m, t));
                if n == m {
                    let nf = factorial(n) as f64;
                    assert!((v - nf).abs() <= 1e-8 * nf, "n={n}: {v}");
                } else {
                    assert!(v.abs() < 1e-8, "n={n} m={m}: {v}");
                }
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut r = rng::stream(5);
        for link in [Link::L1, Link::L2] {
            let h = link.poly();
            for _ in 0..50 {
                let z: Vec<f64> = (0..h.latent_dim()).map(|_| rng::standard_normal(&mut r)).collect();
                let g = h.gradient(&z);
                for s in 0..z.len() {
                    let step = 1e-5;
                    let mut zp = z.clone();
                    let mut zm = z.clone();
                    zp[s] += step;
                    zm[s] -= step;
                    let fd = (h.eval(&zp) - h.eval(&zm)) / (2.0 * step);
                    assert!((fd - g[s]).abs() <= 1e-6 * g[s].abs().max(1.0), "{fd} vs {}", g[s]);
                }
            }
        }
    }

    #[test]
    fn link_parsing() {
        assert_eq!("L1".parse::<Link>().unwrap(), Link::L1);
        assert_eq!("L2".parse::<Link>().unwrap(), Link::L2);
        assert!("L3".parse::<Link>().is_err());
    }
}
