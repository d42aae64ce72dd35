//! Multi-index targets `f*(x) = h(Ux)`, planted subspaces and data sampling.

use std::fmt;
use std::str::FromStr;

use faer::{Mat, MatRef};
use rand::Rng;

use crate::error::{Error, Result};
use crate::hermite::HermitePoly;
use crate::rng;

const ORTHONORMAL_TOL: f64 = 1e-10;

/// An `r × d` matrix with orthonormal rows.
#[derive(Clone, Debug)]
pub struct Subspace {
    basis: Mat<f64>,
}

impl Subspace {
    /// Wraps `basis`, checking `U Uᵀ = I_r` to 1e-10.
    pub fn new(basis: Mat<f64>) -> Result<Self> {
        let (r, d) = (basis.nrows(), basis.ncols());
        if r > d {
            return Err(Error::RankTooLarge { r, d });
        }
        let gram = &basis * basis.transpose();
        let mut worst = 0.0_f64;
        for j in 0..r {
            for i in 0..r {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - target).abs());
            }
        }
        if worst > ORTHONORMAL_TOL {
            return Err(Error::NotOrthonormal(worst));
        }
        Ok(Self { basis })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(crate::linalg::from_rows(rows))
    }

    /// The first `r` standard basis vectors of `R^d`.
    pub fn axis_aligned(d: usize, r: usize) -> Result<Self> {
        if r > d {
            return Err(Error::RankTooLarge { r, d });
        }
        Ok(Self { basis: Mat::from_fn(r, d, |i, j| if i == j { 1.0 } else { 0.0 }) })
    }

    pub fn rank(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> MatRef<'_, f64> {
        self.basis.as_ref()
    }

    /// `P = UᵀU`, the orthogonal projector onto row(U).
    pub fn projector(&self) -> Mat<f64> {
        self.basis.transpose() * &self.basis
    }

    /// `z = U x`.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        crate::linalg::mat_vec(self.basis.as_ref(), x)
    }

    /// Row-orthonormal basis of the orthogonal complement, `(d - r) × d`.
    pub fn complement(&self) -> Result<Mat<f64>> {
        let (r, d) = (self.rank(), self.dim());
        let mut residual = self.projector();
        for j in 0..d {
            for i in 0..d {
                residual[(i, j)] = if i == j { 1.0 } else { 0.0 } - residual[(i, j)];
            }
        }
        let (_, vectors) = crate::linalg::sym_eigen_desc(residual.as_ref())?;
        Ok(Mat::from_fn(d - r, d, |i, j| vectors[(j, i)]))
    }

    /// Coherence `μ(U) = (d/r) max_i ‖U_{:,i}‖²`.
    pub fn coherence(&self) -> f64 {
        let (r, d) = (self.rank(), self.dim());
        if r == 0 {
            return 0.0;
        }
        let max_col = (0..d)
            .map(|j| (0..r).map(|i| self.basis[(i, j)].powi(2)).sum::<f64>())
            .fold(0.0_f64, f64::max);
        d as f64 / r as f64 * max_col
    }
}

/// Orthonormalizes rows in place by modified Gram–Schmidt with a second
/// re-orthogonalization pass.
fn orthonormalize_rows(m: &mut Mat<f64>) -> Result<()> {
    let (r, d) = (m.nrows(), m.ncols());
    for i in 0..r {
        for _pass in 0..2 {
            for k in 0..i {
                let proj: f64 = (0..d).map(|j| m[(i, j)] * m[(k, j)]).sum();
                for j in 0..d {
                    let v = m[(k, j)];
                    m[(i, j)] -= proj * v;
                }
            }
        }
        let norm = (0..d).map(|j| m[(i, j)].powi(2)).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return Err(Error::Linalg("rank-deficient Gaussian draw".into()));
        }
        for j in 0..d {
            m[(i, j)] /= norm;
        }
    }
    Ok(())
}

/// First `r` rows of a Haar-distributed orthogonal `d × d` matrix.
pub fn haar_subspace(d: usize, r: usize, seed: u64) -> Result<Subspace> {
    if r == 0 || r > d {
        return Err(Error::RankTooLarge { r, d });
    }
    let mut stream = rng::stream(seed);
    let mut m = Mat::<f64>::zeros(r, d);
    for i in 0..r {
        for j in 0..d {
            m[(i, j)] = rng::standard_normal(&mut stream);
        }
    }
    orthonormalize_rows(&mut m)?;
    Subspace::new(m)
}

/// Default sparse support size `round(d^{3/10})`.
pub fn default_support_size(d: usize) -> usize {
    ((d as f64).powf(0.3).round() as usize).max(1)
}

/// Rows with pairwise disjoint supports: row `j` lives on coordinates
/// `[j·s, (j+1)·s)` with i.i.d. standard normal entries normalized to unit length.
pub fn sparse_subspace(d: usize, r: usize, support_size: usize, seed: u64) -> Result<Subspace> {
    if r == 0 || support_size == 0 || r * support_size > d {
        return Err(Error::InfeasibleSupport { d, r, support: support_size });
    }
    let mut stream = rng::stream(seed);
    let mut m = Mat::<f64>::zeros(r, d);
    for i in 0..r {
        let cols = i * support_size..(i + 1) * support_size;
        let mut norm = 0.0;
        for j in cols.clone() {
            let v = rng::standard_normal(&mut stream);
            m[(i, j)] = v;
            norm += v * v;
        }
        let norm = norm.sqrt();
        for j in cols {
            m[(i, j)] /= norm;
        }
    }
    Subspace::new(m)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputDist {
    Hypercube,
    Gaussian,
}

impl InputDist {
    pub fn name(self) -> &'static str {
        match self {
            InputDist::Hypercube => "hypercube",
            InputDist::Gaussian => "gaussian",
        }
    }
}

impl FromStr for InputDist {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hypercube" => Ok(InputDist::Hypercube),
            "gaussian" => Ok(InputDist::Gaussian),
            other => Err(Error::InvalidArgument(format!("unknown input distribution '{other}'"))),
        }
    }
}

impl fmt::Display for InputDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubspaceKind {
    Haar,
    Sparse,
}

impl SubspaceKind {
    pub fn name(self) -> &'static str {
        match self {
            SubspaceKind::Haar => "haar",
            SubspaceKind::Sparse => "sparse",
        }
    }

    pub fn generate(self, d: usize, r: usize, seed: u64) -> Result<Subspace> {
        match self {
            SubspaceKind::Haar => haar_subspace(d, r, seed),
            SubspaceKind::Sparse => sparse_subspace(d, r, default_support_size(d), seed),
        }
    }
}

impl FromStr for SubspaceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "haar" => Ok(SubspaceKind::Haar),
            "sparse" => Ok(SubspaceKind::Sparse),
            other => Err(Error::InvalidArgument(format!("unknown subspace kind '{other}'"))),
        }
    }
}

impl fmt::Display for SubspaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `f*(x) = h(Ux)`.
pub fn target_eval(link: &HermitePoly, subspace: &Subspace, x: &[f64]) -> f64 {
    assert_eq!(x.len(), subspace.dim(), "input has wrong dimension");
    link.eval(&subspace.project(x))
}

#[derive(Clone, Debug)]
pub struct Dataset {
    /// `n × d` design, one sample per row.
    pub x: Mat<f64>,
    pub y: Vec<f64>,
    pub input: InputDist,
    pub noise_var: f64,
    pub seed: u64,
}

impl Dataset {
    pub fn new(x: Mat<f64>, y: Vec<f64>, input: InputDist) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.nrows(), got: y.len() });
        }
        Ok(Self { x, y, input, noise_var: 0.0, seed: 0 })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        crate::linalg::row(self.x.as_ref(), i)
    }
}

/// Draws `n` i.i.d. inputs (uniform cube or standard Gaussian) and labels
/// `y = h(Ux) + ε`, `ε ~ N(0, noise_var)`.
pub fn sample_dataset(
    input: InputDist,
    subspace: &Subspace,
    link: &HermitePoly,
    n: usize,
    noise_var: f64,
    seed: u64,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("dataset needs at least one sample".into()));
    }
    if !(noise_var >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise variance {noise_var} is negative")));
    }
    if link.latent_dim() != subspace.rank() {
        return Err(Error::DimensionMismatch { expected: subspace.rank(), got: link.latent_dim() });
    }
    let d = subspace.dim();
    let mut stream = rng::stream(seed);
    let mut x = Mat::<f64>::zeros(n, d);
    let mut y = Vec::with_capacity(n);
    let noise_sd = noise_var.sqrt();
    let mut row = vec![0.0; d];
    for i in 0..n {
        for v in row.iter_mut() {
            *v = match input {
                InputDist::Hypercube => {
                    if stream.random::<bool>() {
                        1.0
                    } else {
                        -1.0
                    }
                }
                InputDist::Gaussian => rng::standard_normal(&mut stream),
            };
        }
        for (j, &v) in row.iter().enumerate() {
            x[(i, j)] = v;
        }
        let clean = target_eval(link, subspace, &row);
        let eps = if noise_sd > 0.0 { noise_sd * rng::standard_normal(&mut stream) } else { 0.0 };
        y.push(clean + eps);
    }
    Ok(Dataset { x, y, input, noise_var, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::{Link, MultiIndex};
    use crate::walsh;

    fn max_gram_deviation(s: &Subspace) -> f64 {
        let g = s.basis() * s.basis().transpose();
        let r = s.rank();
        let mut worst = 0.0_f64;
        for i in 0..r {
            for j in 0..r {
                worst = worst.max((g[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
        worst
    }

    #[test]
    fn haar_rows_orthonormal_and_deterministic() {
        let u = haar_subspace(5, 2, 1).unwrap();
        assert!(max_gram_deviation(&u) < 1e-12);
        let v = haar_subspace(5, 2, 1).unwrap();
        assert_eq!(crate::linalg::max_abs_diff(u.basis(), v.basis()), 0.0);
        assert!(matches!(haar_subspace(3, 4, 0), Err(Error::RankTooLarge { .. })));
    }

    #[test]
    fn haar_coherence_is_moderate() {
        let mean = (0..200).map(|s| haar_subspace(100, 1, s).unwrap().coherence()).sum::<f64>() / 200.0;
        assert!((1.0..=20.0).contains(&mean), "mean coherence {mean}");
    }

    #[test]
    fn sparse_supports() {
        let u = sparse_subspace(100, 2, 4, 9).unwrap();
        for i in 0..2 {
            let support: Vec<usize> = (0..100).filter(|&j| u.basis()[(i, j)] != 0.0).collect();
            assert_eq!(support, (i * 4..(i + 1) * 4).collect::<Vec<_>>());
        }
        assert!(max_gram_deviation(&u) < 1e-15);

        let small = sparse_subspace(8, 2, 4, 0).unwrap();
        assert!((0..4).all(|j| small.basis()[(1, j)] == 0.0));
        assert!((4..8).all(|j| small.basis()[(0, j)] == 0.0));
        assert!(matches!(sparse_subspace(7, 2, 4, 0), Err(Error::InfeasibleSupport { .. })));
        assert_eq!(default_support_size(100), 4);
    }

    #[test]
    fn coherence_examples() {
        assert_eq!(Subspace::axis_aligned(10, 2).unwrap().coherence(), 5.0);
        let flat = Subspace::from_rows(&[vec![1.0 / 10f64.sqrt(); 10]]).unwrap();
        assert!((flat.coherence() - 1.0).abs() < 1e-12);
        let mut row = vec![0.0; 100];
        row[0] = 0.5f64.sqrt();
        row[1] = 0.5f64.sqrt();
        let pair = Subspace::from_rows(&[row]).unwrap();
        assert!((pair.coherence() - 50.0).abs() < 1e-12);
        for seed in 0..20 {
            assert!(haar_subspace(30, 3, seed).unwrap().coherence() >= 1.0);
        }
    }

    #[test]
    fn rejects_non_orthonormal_rows() {
        assert!(matches!(
            Subspace::from_rows(&[vec![1.0, 1.0]]),
            Err(Error::NotOrthonormal(_))
        ));
    }

    #[test]
    fn complement_is_orthonormal_and_orthogonal() {
        let u = haar_subspace(7, 2, 4).unwrap();
        let c = u.complement().unwrap();
        assert_eq!((c.nrows(), c.ncols()), (5, 7));
        let cross = u.basis() * c.transpose();
        assert!(crate::linalg::frobenius(cross.as_ref()) < 1e-12);
        assert!(Subspace::new(c).is_ok());
    }

    #[test]
    fn target_examples() {
        let l1 = Link::L1.poly();
        let e0 = Subspace::axis_aligned(4, 1).unwrap();
        let v = target_eval(&l1, &e0, &[1.0, -1.0, 1.0, 1.0]);
        assert!((v - (1.0 - 2.0 / 24f64.sqrt())).abs() < 1e-15);

        let c = HermitePoly::from_terms(1, vec![(MultiIndex::new(vec![0]), 2.5)]).unwrap();
        assert_eq!(target_eval(&c, &e0, &[0.3, 0.1, 9.0, -2.0]), 2.5);

        let l2 = Link::L2.poly();
        let e01 = Subspace::axis_aligned(4, 2).unwrap();
        assert!((target_eval(&l2, &e01, &[1.0, 1.0, -1.0, 1.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn noiseless_labels_match_target() {
        let l1 = Link::L1.poly();
        let u = haar_subspace(12, 1, 3).unwrap();
        let ds = sample_dataset(InputDist::Hypercube, &u, &l1, 50, 0.0, 8).unwrap();
        for i in 0..ds.len() {
            let row = ds.row(i);
            assert!(row.iter().all(|v| v.abs() == 1.0));
            assert_eq!(ds.y[i], target_eval(&l1, &u, &row));
        }
    }

    #[test]
    fn noise_variance_is_respected() {
        let l1 = Link::L1.poly();
        let u = haar_subspace(10, 1, 3).unwrap();
        let ds = sample_dataset(InputDist::Gaussian, &u, &l1, 100_000, 0.01, 2).unwrap();
        let resid: Vec<f64> = (0..ds.len()).map(|i| ds.y[i] - target_eval(&l1, &u, &ds.row(i))).collect();
        let mean = resid.iter().sum::<f64>() / resid.len() as f64;
        let var = resid.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (resid.len() - 1) as f64;
        assert!((0.009..=0.011).contains(&var), "{var}");
    }

    #[test]
    fn sampling_is_reproducible() {
        let l2 = Link::L2.poly();
        let u = haar_subspace(9, 2, 1).unwrap();
        let a = sample_dataset(InputDist::Gaussian, &u, &l2, 40, 0.01, 77).unwrap();
        let b = sample_dataset(InputDist::Gaussian, &u, &l2, 40, 0.01, 77).unwrap();
        assert_eq!(crate::linalg::max_abs_diff(a.x.as_ref(), b.x.as_ref()), 0.0);
        assert_eq!(a.y, b.y);
    }

    #[test]
    fn multilinear_representative_is_exact_on_cube() {
        for link in [Link::L1, Link::L2] {
            let h = link.poly();
            let u = haar_subspace(8, link.latent_dim(), 13).unwrap();
            let f = |x: &[f64]| target_eval(&h, &u, x);
            let p = walsh::walsh_coefficients(f, 8, h.max_degree() as usize).unwrap();
            let worst = (0..256u64)
                .map(|mask| {
                    let mut x = vec![0.0; 8];
                    walsh::cube_point(mask, 8, &mut x);
                    (p.eval(&x).unwrap() - f(&x)).abs()
                })
                .fold(0.0_f64, f64::max);
            assert!(worst < 1e-8, "{link}: {worst}");
        }
    }
}
