//! Core linear-model objects: the spiked covariance, joint second moments of
//! `(Y, X)`, and the population principal-component split of the best linear
//! predictor.

pub mod spectral;

use std::sync::Arc;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{PcrError, Result};
pub use spectral::{symmetric_eig, Eigensystem};

/// Relative eigenvalue cutoff for minimum-norm solves.
pub const PINV_CUTOFF: f64 = 1e-12;

/// Population covariance given through its eigensystem, with `K` eigenvalues
/// growing like `c_i p^alpha` and the remaining `p - K` bounded.
#[derive(Debug, Clone)]
pub struct CovarianceModel {
    k: usize,
    alpha: f64,
    spike_constants: Vec<f64>,
    tail_constants: Vec<f64>,
    eigen: Arc<Eigensystem>,
    identity_basis: bool,
}

impl CovarianceModel {
    /// Covariance with eigenvectors equal to the coordinate axes.
    pub fn with_identity_basis(alpha: f64, spike_constants: Vec<f64>, tail_constants: Vec<f64>) -> Result<Self> {
        let p = spike_constants.len() + tail_constants.len();
        Self::build(alpha, spike_constants, tail_constants, Array2::eye(p), true)
    }

    /// Covariance with a caller-supplied orthogonal eigenvector matrix.
    pub fn with_basis(
        alpha: f64,
        spike_constants: Vec<f64>,
        tail_constants: Vec<f64>,
        vectors: Array2<f64>,
    ) -> Result<Self> {
        let p = spike_constants.len() + tail_constants.len();
        if vectors.dim() != (p, p) {
            return Err(PcrError::Dimension(format!(
                "eigenvector matrix is {:?}, expected {p}x{p}",
                vectors.dim()
            )));
        }
        let gram = vectors.t().dot(&vectors);
        let dev = (&gram - &Array2::<f64>::eye(p))
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()));
        if dev > 1e-10 {
            return Err(PcrError::InvalidSpec(format!(
                "eigenvector matrix is not orthogonal (max |V'V - I| = {dev:e})"
            )));
        }
        Self::build(alpha, spike_constants, tail_constants, vectors, false)
    }

    fn build(
        alpha: f64,
        spike_constants: Vec<f64>,
        tail_constants: Vec<f64>,
        vectors: Array2<f64>,
        identity_basis: bool,
    ) -> Result<Self> {
        let k = spike_constants.len();
        let p = k + tail_constants.len();
        if k == 0 {
            return Err(PcrError::InvalidSpec("at least one spike constant is required".into()));
        }
        if !(alpha > 0.5 && alpha <= 1.0) {
            return Err(PcrError::InvalidSpec(format!("alpha = {alpha} is outside (1/2, 1]")));
        }
        check_non_increasing("spike constants", &spike_constants)?;
        check_non_increasing("tail constants", &tail_constants)?;
        if !(spike_constants[k - 1] > 0.0) {
            return Err(PcrError::InvalidSpec(
                "the last spike constant c_K must be positive".into(),
            ));
        }
        if tail_constants.iter().any(|c| !(*c >= 0.0) || !c.is_finite()) {
            return Err(PcrError::InvalidSpec(
                "tail constants must be finite and nonnegative".into(),
            ));
        }
        let scale = (p as f64).powf(alpha);
        let values: Array1<f64> = spike_constants
            .iter()
            .map(|c| c * scale)
            .chain(tail_constants.iter().copied())
            .collect();
        if let Some(&first_tail) = tail_constants.first() {
            if first_tail > values[k - 1] {
                return Err(PcrError::InvalidSpec(format!(
                    "tail constant {first_tail} exceeds the smallest spike eigenvalue {}",
                    values[k - 1]
                )));
            }
        }
        Ok(Self {
            k,
            alpha,
            spike_constants,
            tail_constants,
            eigen: Arc::new(Eigensystem { values, vectors }),
            identity_basis,
        })
    }

    pub fn p(&self) -> usize {
        self.eigen.dim()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn spike_constants(&self) -> &[f64] {
        &self.spike_constants
    }

    pub fn tail_constants(&self) -> &[f64] {
        &self.tail_constants
    }

    /// Eigenvalues, non-increasing.
    pub fn values(&self) -> &Array1<f64> {
        &self.eigen.values
    }

    pub fn vectors(&self) -> &Array2<f64> {
        &self.eigen.vectors
    }

    pub fn eigensystem(&self) -> Arc<Eigensystem> {
        Arc::clone(&self.eigen)
    }

    pub fn is_identity_basis(&self) -> bool {
        self.identity_basis
    }

    /// The covariance matrix itself.
    pub fn sigma(&self) -> Array2<f64> {
        if self.identity_basis {
            Array2::from_diag(&self.eigen.values)
        } else {
            self.eigen.reconstruct()
        }
    }

    /// `Sigma^{1/2}`-type factor `L = V Lambda^{1/2}` so that `L L' = Sigma`.
    pub fn factor(&self) -> Array2<f64> {
        let roots = self.eigen.values.mapv(f64::sqrt);
        &self.eigen.vectors * &roots.view().insert_axis(Axis(0))
    }

    /// `x' Sigma x` without forming `Sigma`.
    pub fn quadratic_form(&self, x: ArrayView1<f64>) -> f64 {
        let coords = self.eigen.vectors.t().dot(&x);
        coords
            .iter()
            .zip(self.eigen.values.iter())
            .map(|(c, l)| c * c * l)
            .sum()
    }

    /// `Sigma x` without forming `Sigma`.
    pub fn apply(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let coords = self.eigen.vectors.t().dot(&x) * &self.eigen.values;
        self.eigen.vectors.dot(&coords)
    }
}

fn check_non_increasing(what: &str, values: &[f64]) -> Result<()> {
    if values.windows(2).any(|w| w[1] > w[0]) {
        return Err(PcrError::InvalidSpec(format!("{what} must be non-increasing")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(PcrError::InvalidSpec(format!("{what} must be finite")));
    }
    Ok(())
}

/// Second moments of `(Y, X)`: `E[XX']`, `E[XY]` and `E[Y^2]`.
#[derive(Debug, Clone)]
pub struct JointMoments {
    sigma: Array2<f64>,
    sigma_xy: Array1<f64>,
    m_yy: f64,
    eigen: Arc<Eigensystem>,
}

impl JointMoments {
    /// Validated constructor for arbitrary moments.
    pub fn new(sigma: Array2<f64>, sigma_xy: Array1<f64>, m_yy: f64) -> Result<Self> {
        let p = sigma.nrows();
        if sigma.ncols() != p || sigma_xy.len() != p {
            return Err(PcrError::Dimension(format!(
                "moments: Sigma is {:?}, sigma_XY has length {}",
                sigma.dim(),
                sigma_xy.len()
            )));
        }
        let eigen = symmetric_eig(sigma.view())?;
        let top = eigen.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let bottom = eigen.values.iter().fold(f64::INFINITY, |m, v| m.min(*v));
        if p > 0 && bottom < -1e-10 * top.max(1.0) {
            return Err(PcrError::InvalidSpec(format!(
                "Sigma is not positive semidefinite (smallest eigenvalue {bottom:e})"
            )));
        }
        if !(m_yy >= 0.0) {
            return Err(PcrError::InvalidSpec(format!("E[Y^2] = {m_yy} is negative")));
        }
        let moments = Self {
            sigma,
            sigma_xy,
            m_yy,
            eigen: Arc::new(eigen),
        };
        let theta = min_norm_blp(&moments)?;
        let residual = m_yy - theta.dot(&moments.sigma_xy);
        if residual < -1e-10 * m_yy.max(1.0) {
            return Err(PcrError::InvalidSpec(format!(
                "moments violate Cauchy-Schwarz: E[Y^2] - theta*' Sigma theta* = {residual:e}"
            )));
        }
        Ok(moments)
    }

    /// Moments whose covariance is a known [`CovarianceModel`].
    pub fn from_covariance(cov: &CovarianceModel, sigma_xy: Array1<f64>, m_yy: f64) -> Self {
        Self {
            sigma: cov.sigma(),
            sigma_xy,
            m_yy,
            eigen: cov.eigensystem(),
        }
    }

    pub fn p(&self) -> usize {
        self.sigma_xy.len()
    }

    pub fn sigma(&self) -> &Array2<f64> {
        &self.sigma
    }

    pub fn sigma_xy(&self) -> &Array1<f64> {
        &self.sigma_xy
    }

    pub fn m_yy(&self) -> f64 {
        self.m_yy
    }

    pub fn eigensystem(&self) -> &Eigensystem {
        &self.eigen
    }
}

/// Minimum-norm solution of `Sigma theta = sigma_XY`: the canonical best
/// linear predictor coefficients.
pub fn min_norm_blp(moments: &JointMoments) -> Result<Array1<f64>> {
    let (theta, outside) = spectral::psd_pseudo_solve(moments.eigensystem(), moments.sigma_xy(), PINV_CUTOFF);
    let norm = moments.sigma_xy().dot(moments.sigma_xy()).sqrt();
    if outside > 1e-8 * norm {
        return Err(PcrError::InconsistentMoments { residual: outside });
    }
    Ok(theta)
}

/// Population principal-component decomposition for `K` components and a
/// coefficient vector `theta*`.
#[derive(Debug, Clone)]
pub struct PopulationPCA {
    pub v_k: Array2<f64>,
    pub lambda_k: Array1<f64>,
    pub v_r: Array2<f64>,
    pub lambda_r: Array1<f64>,
    /// Loadings `V_K Lambda_K^{1/2}`.
    pub b: Array2<f64>,
    pub theta_star: Array1<f64>,
    /// `Lambda_K^{1/2} V_K' theta*`.
    pub vartheta_star: Array1<f64>,
    /// `V_R V_R' theta*`.
    pub gamma_star: Array1<f64>,
}

/// Population PCA of a covariance model for `theta_star` and `k` components.
pub fn build_population_pca(cov: &CovarianceModel, theta_star: &Array1<f64>, k: usize) -> Result<PopulationPCA> {
    PopulationPCA::from_eigensystem(&cov.eigen, theta_star, k)
}

impl PopulationPCA {
    pub fn from_eigensystem(eig: &Eigensystem, theta_star: &Array1<f64>, k: usize) -> Result<Self> {
        let p = eig.dim();
        if k == 0 || k > p {
            return Err(PcrError::ComponentCount { k, max: p });
        }
        if theta_star.len() != p {
            return Err(PcrError::Dimension(format!(
                "theta* has length {}, expected {p}",
                theta_star.len()
            )));
        }
        if theta_star.iter().any(|v| !v.is_finite()) {
            return Err(PcrError::InvalidSpec("theta* has non-finite entries".into()));
        }
        if !(eig.values[k - 1] > 0.0) {
            return Err(PcrError::InvalidSpec(format!(
                "eigenvalue {k} is {}, the K-th eigenvalue must be positive",
                eig.values[k - 1]
            )));
        }
        let v_k = eig.vectors.slice(s![.., ..k]).to_owned();
        let v_r = eig.vectors.slice(s![.., k..]).to_owned();
        let lambda_k = eig.values.slice(s![..k]).to_owned();
        let lambda_r = eig.values.slice(s![k..]).to_owned();
        let roots = lambda_k.mapv(f64::sqrt);
        let b = &v_k * &roots.view().insert_axis(Axis(0));
        let vartheta_star = v_k.t().dot(theta_star) * &roots;
        let gamma_star = v_r.dot(&v_r.t().dot(theta_star));
        Ok(Self {
            v_k,
            lambda_k,
            v_r,
            lambda_r,
            b,
            theta_star: theta_star.clone(),
            vartheta_star,
            gamma_star,
        })
    }

    pub fn k(&self) -> usize {
        self.lambda_k.len()
    }

    pub fn p(&self) -> usize {
        self.v_k.nrows()
    }

    /// Population scores `P_t = Lambda_K^{-1/2} V_K' X_t` for every row of `x`.
    pub fn scores(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let inv_roots = self.lambda_k.mapv(|l| 1.0 / l.sqrt());
        x.dot(&self.v_k) * inv_roots.view().insert_axis(Axis(0))
    }

    /// Score map for a single vector.
    pub fn score_of(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.v_k.t().dot(&x) / &self.lambda_k.mapv(f64::sqrt)
    }

    /// Idiosyncratic component `u = V_R V_R' x` for a single vector.
    pub fn idiosyncratic_of(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.v_r.dot(&self.v_r.t().dot(&x))
    }

    /// Idiosyncratic components for every row of `x`.
    pub fn idiosyncratic(&self, x: ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.v_r).dot(&self.v_r.t())
    }

    /// `V_K Lambda_K^{-1/2} vartheta`: the `X`-space coefficients of a
    /// predictor written on population scores.
    pub fn score_coefficients(&self, vartheta: ArrayView1<f64>) -> Array1<f64> {
        self.v_k.dot(&(&vartheta / &self.lambda_k.mapv(f64::sqrt)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn spiked_4() -> CovarianceModel {
        CovarianceModel::with_identity_basis(1.0, vec![2.0], vec![1.0, 1.0, 1.0]).unwrap()
    }

    #[test]
    fn spike_eigenvalues_scale_with_dimension() {
        let cov = spiked_4();
        assert_eq!(cov.values(), &array![8.0, 1.0, 1.0, 1.0]);
        assert_eq!(cov.sigma(), Array2::from_diag(&array![8.0, 1.0, 1.0, 1.0]));
    }

    #[test]
    fn covariance_validation() {
        assert!(CovarianceModel::with_identity_basis(0.5, vec![1.0], vec![1.0]).is_err());
        assert!(CovarianceModel::with_identity_basis(1.1, vec![1.0], vec![1.0]).is_err());
        assert!(CovarianceModel::with_identity_basis(1.0, vec![1.0, 2.0], vec![1.0]).is_err());
        assert!(CovarianceModel::with_identity_basis(1.0, vec![0.0], vec![0.0]).is_err());
        assert!(CovarianceModel::with_identity_basis(1.0, vec![1.0], vec![0.5, 1.0]).is_err());
        assert!(CovarianceModel::with_identity_basis(1.0, vec![1.0], vec![0.0, 0.0]).is_ok());
        let skew = array![[1.0, 1.0], [0.0, 1.0]];
        assert!(CovarianceModel::with_basis(1.0, vec![1.0], vec![1.0], skew).is_err());
    }

    #[test]
    fn pca_theta_in_spike_space() {
        let cov = spiked_4();
        let pca = build_population_pca(&cov, &array![1.0, 0.0, 0.0, 0.0], 1).unwrap();
        let r8 = 8.0_f64.sqrt();
        assert!((pca.b[[0, 0]] - r8).abs() < 1e-15);
        assert!(pca.b.iter().skip(1).all(|v| *v == 0.0));
        assert!((pca.vartheta_star[0] - r8).abs() < 1e-15);
        assert!(pca.gamma_star.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn pca_theta_orthogonal_to_spike() {
        let cov = spiked_4();
        let pca = build_population_pca(&cov, &array![0.0, 1.0, 0.0, 0.0], 1).unwrap();
        assert_eq!(pca.vartheta_star[0], 0.0);
        assert_eq!(pca.gamma_star, array![0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn pca_two_by_two() {
        // eigenpairs of [[2,1],[1,2]]: (3, (1,1)/sqrt2), (1, (1,-1)/sqrt2)
        let sigma = array![[2.0, 1.0], [1.0, 2.0]];
        let eig = symmetric_eig(sigma.view()).unwrap();
        let pca = PopulationPCA::from_eigensystem(&eig, &array![1.0, 0.0], 1).unwrap();
        assert!((pca.vartheta_star[0] - 1.5_f64.sqrt()).abs() < 1e-14);
        assert!((pca.gamma_star[0] - 0.5).abs() < 1e-14);
        assert!((pca.gamma_star[1] + 0.5).abs() < 1e-14);
    }

    #[test]
    fn pca_rejects_bad_k() {
        let cov = CovarianceModel::with_identity_basis(1.0, vec![1.0], vec![0.0, 0.0]).unwrap();
        let theta = array![1.0, 0.0, 0.0];
        assert!(matches!(
            build_population_pca(&cov, &theta, 0),
            Err(PcrError::ComponentCount { .. })
        ));
        assert!(build_population_pca(&cov, &theta, 4).is_err());
        // second eigenvalue is zero
        assert!(build_population_pca(&cov, &theta, 2).is_err());
    }

    #[test]
    fn min_norm_blp_examples() {
        let m = JointMoments::new(Array2::eye(2), array![1.0, 2.0], 10.0).unwrap();
        let t = min_norm_blp(&m).unwrap();
        assert!((t[0] - 1.0).abs() < 1e-15 && (t[1] - 2.0).abs() < 1e-15);

        let m = JointMoments::new(Array2::from_diag(&array![1.0, 0.0]), array![1.0, 0.0], 1.0).unwrap();
        assert_eq!(min_norm_blp(&m).unwrap(), array![1.0, 0.0]);

        // solve [[2,1],[1,2]] t = (3,3): t = (1,1)
        let m = JointMoments::new(array![[2.0, 1.0], [1.0, 2.0]], array![3.0, 3.0], 10.0).unwrap();
        let t = min_norm_blp(&m).unwrap();
        assert!((t[0] - 1.0).abs() < 1e-14 && (t[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn inconsistent_moments_rejected() {
        let m = JointMoments {
            sigma: Array2::from_diag(&array![1.0, 0.0]),
            sigma_xy: array![1.0, 1.0],
            m_yy: 5.0,
            eigen: Arc::new(symmetric_eig(Array2::from_diag(&array![1.0, 0.0]).view()).unwrap()),
        };
        assert!(matches!(min_norm_blp(&m), Err(PcrError::InconsistentMoments { .. })));
        assert!(JointMoments::new(Array2::from_diag(&array![1.0, 0.0]), array![1.0, 1.0], 5.0).is_err());
    }

    #[test]
    fn moments_reject_cauchy_schwarz_violation() {
        assert!(JointMoments::new(Array2::eye(2), array![1.0, 2.0], 4.0).is_err());
        assert!(JointMoments::new(Array2::eye(2), array![1.0, 2.0], -1.0).is_err());
        assert!(JointMoments::new(array![[1.0, 0.0], [0.0, -1.0]], array![0.0, 0.0], 1.0).is_err());
    }
}
