//! Fourier–Walsh analysis on the Boolean hypercube {-1, 1}^d.
//!
//! A [`WalshPoly`] stores a multilinear polynomial as a map from subsets
//! `S ⊆ [d]` to coefficients `c_S`, so that `p(x) = Σ_S c_S Π_{i∈S} x_i`.
//! Characters are orthonormal under the uniform measure, which makes Parseval
//! norms, degree truncations and the population gradient outer product purely
//! combinatorial in the coefficients.

use std::collections::BTreeMap;
use std::fmt;

use faer::Mat;
use itertools::Itertools;

use crate::error::{Error, Result};

/// Largest dimension for which coefficients are extracted by full enumeration.
pub const EXACT_ENUMERATION_CAP: usize = 20;

/// Extracted coefficients with magnitude below this are treated as round-off.
pub const COEFFICIENT_DROP_TOL: f64 = 1e-12;

/// A subset of coordinates, stored as a strictly increasing index list.
///
/// Ordering is by degree first, then lexicographic, which is also the column
/// order of Walsh design matrices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct SubsetIndex(Vec<usize>);

impl SubsetIndex {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// Builds a subset from arbitrary indices; duplicates and indices `>= dim`
    /// are rejected.
    pub fn new(mut members: Vec<usize>, dim: usize) -> Result<Self> {
        members.sort_unstable();
        if let Some(w) = members.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(format!("duplicate coordinate {}", w[0])));
        }
        if let Some(&last) = members.last() {
            if last >= dim {
                return Err(Error::DimensionMismatch { expected: dim, got: last + 1 });
            }
        }
        Ok(Self(members))
    }

    pub(crate) fn from_sorted(members: Vec<usize>) -> Self {
        debug_assert!(members.windows(2).all(|w| w[0] < w[1]));
        Self(members)
    }

    pub fn from_mask(mask: u64) -> Self {
        let mut members = Vec::with_capacity(mask.count_ones() as usize);
        let mut m = mask;
        while m != 0 {
            let i = m.trailing_zeros() as usize;
            members.push(i);
            m &= m - 1;
        }
        Self(members)
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn members(&self) -> &[usize] {
        &self.0
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn without(&self, i: usize) -> Self {
        Self(self.0.iter().copied().filter(|&j| j != i).collect())
    }

    /// The character `x^S = Π_{i∈S} x_i`.
    pub fn character(&self, x: &[f64]) -> f64 {
        self.0.iter().map(|&i| x[i]).product()
    }
}

impl Ord for SubsetIndex {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for SubsetIndex {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for SubsetIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.iter().join(","))
    }
}

/// Number of subsets of `[d]` with at most `max_deg` elements.
pub fn count_subsets(d: usize, max_deg: usize) -> usize {
    let mut total = 0usize;
    let mut binom = 1usize;
    for k in 0..=max_deg.min(d) {
        total = total.saturating_add(binom);
        binom = binom.saturating_mul(d - k) / (k + 1);
    }
    total
}

/// All subsets of `[d]` of degree at most `max_deg`, ordered by degree then
/// lexicographically.
pub fn enumerate_subsets(d: usize, max_deg: usize) -> Result<Vec<SubsetIndex>> {
    if max_deg > d {
        return Err(Error::DegreeTooLarge { degree: max_deg, dim: d });
    }
    let mut out = Vec::with_capacity(count_subsets(d, max_deg));
    for k in 0..=max_deg {
        out.extend((0..d).combinations(k).map(SubsetIndex::from_sorted));
    }
    Ok(out)
}

/// Multilinear reduction of a monomial on the hypercube: `x_i^2 = 1`, so only
/// coordinates with odd exponent survive.
pub fn multilinearize(exponents: &[u32]) -> SubsetIndex {
    SubsetIndex::from_sorted(
        exponents
            .iter()
            .enumerate()
            .filter(|(_, &e)| e % 2 == 1)
            .map(|(i, _)| i)
            .collect(),
    )
}

/// Maps a bitmask to a hypercube point: bit `i` set means `x_i = -1`.
pub fn cube_point(mask: u64, d: usize, out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate().take(d) {
        *o = if mask >> i & 1 == 1 { -1.0 } else { 1.0 };
    }
}

/// In-place unnormalized Walsh–Hadamard transform of a length-2^k buffer.
fn fwht(values: &mut [f64]) {
    let n = values.len();
    let mut h = 1;
    while h < n {
        for block in (0..n).step_by(2 * h) {
            for i in block..block + h {
                let a = values[i];
                let b = values[i + h];
                values[i] = a + b;
                values[i + h] = a - b;
            }
        }
        h *= 2;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WalshPoly {
    dim: usize,
    max_degree: usize,
    terms: BTreeMap<SubsetIndex, f64>,
}

impl WalshPoly {
    pub fn zero(dim: usize) -> Self {
        Self { dim, max_degree: 0, terms: BTreeMap::new() }
    }

    /// Builds a polynomial from `(subset, coefficient)` pairs. Repeated subsets
    /// accumulate; `max_degree` is the largest degree present.
    pub fn from_terms<I>(dim: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (SubsetIndex, f64)>,
    {
        let mut map = BTreeMap::new();
        for (s, c) in terms {
            if let Some(&last) = s.members().last() {
                if last >= dim {
                    return Err(Error::DimensionMismatch { expected: dim, got: last + 1 });
                }
            }
            *map.entry(s).or_insert(0.0) += c;
        }
        let max_degree = map.keys().map(SubsetIndex::degree).max().unwrap_or(0);
        Ok(Self { dim, max_degree, terms: map })
    }

    /// Convenience constructor from plain index lists.
    pub fn from_index_lists(dim: usize, terms: &[(&[usize], f64)]) -> Result<Self> {
        let parsed = terms
            .iter()
            .map(|(s, c)| SubsetIndex::new(s.to_vec(), dim).map(|s| (s, *c)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_terms(dim, parsed)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Declared degree bound ℓ; every stored term has degree at most this.
    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// Largest degree among nonzero terms.
    pub fn degree(&self) -> usize {
        self.terms.keys().map(SubsetIndex::degree).max().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&SubsetIndex, f64)> {
        self.terms.iter().map(|(s, &c)| (s, c))
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.values().all(|&c| c == 0.0)
    }

    pub fn coefficient(&self, s: &SubsetIndex) -> f64 {
        self.terms.get(s).copied().unwrap_or(0.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            max_degree: self.max_degree,
            terms: self.terms.iter().map(|(s, &c)| (s.clone(), c * factor)).collect(),
        }
    }

    /// Keeps exactly the terms of degree at most `degree`.
    pub fn truncate(&self, degree: usize) -> Self {
        Self {
            dim: self.dim,
            max_degree: degree.min(self.max_degree),
            terms: self
                .terms
                .iter()
                .filter(|(s, _)| s.degree() <= degree)
                .map(|(s, &c)| (s.clone(), c))
                .collect(),
        }
    }

    /// The homogeneous degree-`q` component.
    pub fn homogeneous(&self, q: usize) -> Self {
        Self {
            dim: self.dim,
            max_degree: q.min(self.max_degree),
            terms: self
                .terms
                .iter()
                .filter(|(s, _)| s.degree() == q)
                .map(|(s, &c)| (s.clone(), c))
                .collect(),
        }
    }

    /// Discrete derivative `D_i p`, which coincides with `∂_i` of the multilinear
    /// extension: `{S ∖ {i} → c_S : i ∈ S}`.
    pub fn partial_derivative(&self, i: usize) -> Self {
        assert!(i < self.dim, "coordinate {i} out of range for dimension {}", self.dim);
        Self {
            dim: self.dim,
            max_degree: self.max_degree.saturating_sub(1),
            terms: self
                .terms
                .iter()
                .filter(|(s, _)| s.contains(i))
                .map(|(s, &c)| (s.without(i), c))
                .collect(),
        }
    }

    /// Evaluates at a hypercube point, rejecting entries other than ±1.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        if let Some((index, &value)) = x.iter().enumerate().find(|(_, &v)| v != 1.0 && v != -1.0) {
            return Err(Error::NotOnHypercube { index, value });
        }
        Ok(self.eval_multilinear(x))
    }

    /// Evaluates the multilinear extension at an arbitrary real point.
    pub fn eval_multilinear(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(s, &c)| c * s.character(x)).sum()
    }

    /// Gradient of the multilinear extension at `x`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        for (s, &c) in &self.terms {
            for &i in s.members() {
                let rest: f64 = s.members().iter().filter(|&&j| j != i).map(|&j| x[j]).product();
                g[i] += c * rest;
            }
        }
        g
    }

    /// Parseval: `E[p^2] = Σ_S c_S^2` under the uniform measure.
    pub fn l2_norm_sq(&self) -> f64 {
        self.terms.values().map(|c| c * c).sum()
    }

    /// Exact population gradient outer product of the degree-≤`degree_cap`
    /// truncation:
    ///
    /// `M_{≤p} = Σ_{q≤p} M_q`, `(M_q)_{ij} = Σ_{|R|=q-1, i,j∉R} c_{R∪{i}} c_{R∪{j}}`.
    ///
    /// Equivalently `M_q = Σ_R v_R v_Rᵀ` with `v_R[i] = c_{R∪{i}}`, which is how
    /// it is accumulated here.
    pub fn population_agop_exact(&self, degree_cap: usize) -> Mat<f64> {
        let d = self.dim;
        let mut groups: BTreeMap<SubsetIndex, Vec<(usize, f64)>> = BTreeMap::new();
        for (s, &c) in &self.terms {
            if s.degree() == 0 || s.degree() > degree_cap || c == 0.0 {
                continue;
            }
            for &i in s.members() {
                groups.entry(s.without(i)).or_default().push((i, c));
            }
        }
        let mut m = Mat::<f64>::zeros(d, d);
        for v in groups.values() {
            for &(i, ci) in v {
                for &(j, cj) in v {
                    m[(i, j)] += ci * cj;
                }
            }
        }
        m
    }

    /// Debug dump, one line per term: `S=<indices> c=<value>`.
    pub fn dump(&self) -> String {
        self.terms
            .iter()
            .map(|(s, c)| format!("S={s} c={c}\n"))
            .collect()
    }
}

/// Walsh coefficients `c_S = 2^{-d} Σ_x f(x) x^S` for every `|S| ≤ max_deg`,
/// by full enumeration of the cube and a fast Walsh–Hadamard transform.
///
/// Coefficients below [`COEFFICIENT_DROP_TOL`] are dropped.
pub fn walsh_coefficients<F>(f: F, d: usize, max_deg: usize) -> Result<WalshPoly>
where
    F: Fn(&[f64]) -> f64,
{
    if d > EXACT_ENUMERATION_CAP {
        return Err(Error::DimensionTooLarge { dim: d, cap: EXACT_ENUMERATION_CAP });
    }
    let max_deg = max_deg.min(d);
    let size = 1usize << d;
    let mut values = vec![0.0; size];
    let mut x = vec![0.0; d];
    for (mask, v) in values.iter_mut().enumerate() {
        cube_point(mask as u64, d, &mut x);
        *v = f(&x);
    }
    fwht(&mut values);
    let scale = 1.0 / size as f64;
    let mut terms = BTreeMap::new();
    for (mask, &v) in values.iter().enumerate() {
        if (mask as u64).count_ones() as usize > max_deg {
            continue;
        }
        let c = v * scale;
        if c.abs() >= COEFFICIENT_DROP_TOL {
            terms.insert(SubsetIndex::from_mask(mask as u64), c);
        }
    }
    Ok(WalshPoly { dim: d, max_degree: max_deg, terms })
}

/// Uniform average of `f` over all 2^d cube points.
pub fn cube_mean<F>(d: usize, mut f: F) -> Result<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    if d > EXACT_ENUMERATION_CAP {
        return Err(Error::DimensionTooLarge { dim: d, cap: EXACT_ENUMERATION_CAP });
    }
    let size = 1u64 << d;
    let mut x = vec![0.0; d];
    let mut acc = 0.0;
    for mask in 0..size {
        cube_point(mask, d, &mut x);
        acc += f(&x);
    }
    Ok(acc / size as f64)
}
