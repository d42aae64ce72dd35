//! Empirical AGOP, eigenspace extraction, and subspace diagnostics.

use faer::{Mat, MatRef};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::Subspace;

/// Relative gap below which `λ_r` and `λ_{r+1}` are treated as tied.
pub const DEGENERACY_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct AgopResult {
    matrix: Mat<f64>,
    eigenvalues: Vec<f64>,
    /// Eigenvectors as columns, matching `eigenvalues`.
    eigenvectors: Mat<f64>,
}

impl AgopResult {
    /// Eigendecomposes a symmetric matrix.
    pub fn from_matrix(matrix: Mat<f64>) -> Result<Self> {
        let (eigenvalues, eigenvectors) = linalg::sym_eigen_desc(matrix.as_ref())?;
        Ok(Self { matrix, eigenvalues, eigenvectors })
    }

    pub fn matrix(&self) -> MatRef<'_, f64> {
        self.matrix.as_ref()
    }

    pub fn into_matrix(self) -> Mat<f64> {
        self.matrix
    }

    /// Descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// The `k` largest eigenvalues, zero-padded when `k > d`.
    pub fn top_eigenvalues<const K: usize>(&self) -> [f64; K] {
        std::array::from_fn(|i| self.eigenvalues.get(i).copied().unwrap_or(0.0))
    }

    /// Whether `λ_r = λ_{r+1}` within [`DEGENERACY_TOL`] (relative to `λ_1`).
    pub fn is_degenerate(&self, r: usize) -> bool {
        if r == 0 || r >= self.eigenvalues.len() {
            return false;
        }
        let scale = self.eigenvalues[0].abs().max(f64::MIN_POSITIVE);
        (self.eigenvalues[r - 1] - self.eigenvalues[r]).abs() <= DEGENERACY_TOL * scale
    }

    /// Rows span the top-`r` eigenspace. Ties keep the solver's ordering.
    pub fn top_subspace(&self, r: usize) -> Result<Subspace> {
        let d = self.dim();
        if r > d {
            return Err(Error::RankTooLarge { r, d });
        }
        Subspace::new(Mat::from_fn(r, d, |i, j| self.eigenvectors[(j, i)]))
    }
}

/// `M̂ = (1/m) Gᵀ G` for gradients stacked as rows of `G`.
pub fn empirical_agop(grads: MatRef<'_, f64>) -> Result<AgopResult> {
    let m = grads.nrows();
    if m == 0 {
        return Err(Error::InvalidArgument("AGOP needs at least one gradient".into()));
    }
    let gram = grads.transpose() * grads / m as f64;
    AgopResult::from_matrix(linalg::symmetrize(gram.as_ref()))
}

/// Largest principal-angle sine `√(1 - σ_min(Û Uᵀ)²)`.
pub fn sin_theta_op(u_hat: &Subspace, u: &Subspace) -> Result<f64> {
    if u_hat.rank() != u.rank() {
        return Err(Error::DimensionMismatch { expected: u.rank(), got: u_hat.rank() });
    }
    if u_hat.dim() != u.dim() {
        return Err(Error::DimensionMismatch { expected: u.dim(), got: u_hat.dim() });
    }
    let cross = u_hat.basis() * u.basis().transpose();
    let sv = linalg::singular_values(cross.as_ref())?;
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min).min(1.0);
    Ok((1.0 - smin * smin).max(0.0).sqrt())
}

/// `s = λ_min(U M Uᵀ)` and `ρ = ‖M - P M P‖_op` with `P = UᵀU`.
pub fn s_rho(m: MatRef<'_, f64>, u: &Subspace) -> Result<(f64, f64)> {
    if m.nrows() != u.dim() || m.ncols() != u.dim() {
        return Err(Error::DimensionMismatch { expected: u.dim(), got: m.nrows() });
    }
    let asym = linalg::max_asymmetry(m);
    if asym > 1e-10 * linalg::frobenius(m).max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    let inner = u.basis() * m * u.basis().transpose();
    let s = *linalg::sym_eigenvalues_desc(linalg::symmetrize(inner.as_ref()).as_ref())?
        .last()
        .unwrap_or(&0.0);
    let p = u.projector();
    let outside = m - &p * m * &p;
    let rho = linalg::op_norm_sym(linalg::symmetrize(outside.as_ref()).as_ref())?;
    Ok((s, rho))
}

/// `min(1, 4(ρ + ε)/s)`.
pub fn davis_kahan_bound(eps_agop: f64, rho_p: f64, s_p: f64) -> Result<f64> {
    if !(s_p > 0.0) {
        return Err(Error::UndefinedBound(s_p));
    }
    Ok((4.0 * (rho_p + eps_agop) / s_p).min(1.0))
}
