//! Dense symmetric spectral routines.
//!
//! Every eigensystem produced here follows one convention: eigenvalues are
//! sorted non-increasing, eigenvectors are orthonormal columns, and each
//! column is signed so that its entry of largest magnitude is positive (ties
//! resolved towards the lowest index). Within a cluster of tied eigenvalues
//! the columns are ordered by the position of that largest entry, so the
//! identity matrix decomposes to itself.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use ndarray_linalg::{Eigh, QR, UPLO};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{PcrError, Result};

/// Relative asymmetry accepted by [`symmetric_eig`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;

/// Relative gap under which two eigenvalues are treated as tied for ordering.
const TIE_TOLERANCE: f64 = 1e-12;

/// Eigenvalues (non-increasing) with matching orthonormal eigenvector columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigensystem {
    pub values: Array1<f64>,
    pub vectors: Array2<f64>,
}

impl Eigensystem {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Rebuilds `V diag(values) V'`.
    pub fn reconstruct(&self) -> Array2<f64> {
        let scaled = &self.vectors * &self.values.view().insert_axis(Axis(0));
        scaled.dot(&self.vectors.t())
    }
}

/// Largest absolute entry of `a - a'` divided by the largest absolute entry of `a`.
pub fn relative_asymmetry(a: ArrayView2<f64>) -> f64 {
    let n = a.nrows();
    let mut scale = 0.0_f64;
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            scale = scale.max(a[[i, j]].abs());
            if j > i {
                worst = worst.max((a[[i, j]] - a[[j, i]]).abs());
            }
        }
    }
    if scale == 0.0 {
        0.0
    } else {
        worst / scale
    }
}

/// Eigendecomposition of a symmetric matrix under the crate-wide conventions.
pub fn symmetric_eig(m: ArrayView2<f64>) -> Result<Eigensystem> {
    if m.nrows() != m.ncols() {
        return Err(PcrError::Dimension(format!(
            "symmetric_eig expects a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let asymmetry = relative_asymmetry(m);
    if asymmetry > SYMMETRY_TOLERANCE {
        return Err(PcrError::NotSymmetric {
            asymmetry,
            tolerance: SYMMETRY_TOLERANCE,
        });
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(Eigensystem {
            values: Array1::zeros(0),
            vectors: Array2::zeros((0, 0)),
        });
    }
    let sym = (&m + &m.t()) * 0.5;
    let (values, vectors) = sym.eigh(UPLO::Lower)?;
    // LAPACK returns ascending order.
    let values: Array1<f64> = values.iter().rev().copied().collect();
    let vectors = vectors.slice(s![.., ..;-1]).to_owned();
    Ok(canonicalize(values, vectors))
}

/// Applies the sign and tie-ordering conventions to an eigensystem already
/// sorted non-increasing.
pub(crate) fn canonicalize(values: Array1<f64>, mut vectors: Array2<f64>) -> Eigensystem {
    fix_signs(&mut vectors);
    let n = values.len();
    let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut order: Vec<usize> = (0..n).collect();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (values[end - 1] - values[end]).abs() <= TIE_TOLERANCE * scale {
            end += 1;
        }
        if end - start > 1 {
            order[start..end].sort_by_key(|&c| dominant_index(vectors.column(c).iter().copied()));
        }
        start = end;
    }
    if order.iter().enumerate().all(|(i, &c)| i == c) {
        return Eigensystem { values, vectors };
    }
    let values = order.iter().map(|&c| values[c]).collect();
    let vectors = vectors.select(Axis(1), &order);
    Eigensystem { values, vectors }
}

/// Index of the entry of largest magnitude, lowest index among near-ties.
fn dominant_index<I: Iterator<Item = f64> + Clone>(mut entries: I) -> usize {
    let max = entries.clone().fold(0.0_f64, |m, v| m.max(v.abs()));
    let cutoff = max * (1.0 - 1e-10);
    entries.position(|v| v.abs() >= cutoff).unwrap_or(0)
}

/// Flips each column so that its dominant entry is positive.
pub fn fix_signs(vectors: &mut Array2<f64>) {
    for mut col in vectors.axis_iter_mut(Axis(1)) {
        let idx = dominant_index(col.iter().copied());
        if !col.is_empty() && col[idx] < 0.0 {
            col.mapv_inplace(|v| -v);
        }
    }
}

/// Spectral norm of a symmetric matrix (largest absolute eigenvalue).
pub fn symmetric_spectral_norm(m: ArrayView2<f64>) -> Result<f64> {
    let eig = symmetric_eig(m)?;
    Ok(eig.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())))
}

/// Spectral norm of a rectangular matrix via the smaller Gram matrix.
pub fn spectral_norm(a: ArrayView2<f64>) -> Result<f64> {
    if a.is_empty() {
        return Ok(0.0);
    }
    let gram = if a.nrows() <= a.ncols() {
        a.dot(&a.t())
    } else {
        a.t().dot(&a)
    };
    let top = symmetric_eig(gram.view())?.values[0];
    Ok(top.max(0.0).sqrt())
}

/// Minimum-norm solution of `a x = b` for symmetric PSD `a`, discarding
/// eigenvalues below `rel_cutoff * lambda_max`. Returns the solution and the
/// norm of the component of `b` outside the retained range.
pub fn psd_pseudo_solve(eig: &Eigensystem, b: &Array1<f64>, rel_cutoff: f64) -> (Array1<f64>, f64) {
    let top = eig.values.iter().fold(0.0_f64, |m, v| m.max(*v));
    let cutoff = rel_cutoff * top;
    let coords = eig.vectors.t().dot(b);
    let mut x = Array1::zeros(b.len());
    let mut in_range = Array1::zeros(b.len());
    for (i, (&lam, &c)) in eig.values.iter().zip(coords.iter()).enumerate() {
        if lam > cutoff && lam > 0.0 {
            let v = eig.vectors.column(i);
            x.scaled_add(c / lam, &v);
            in_range.scaled_add(c, &v);
        }
    }
    let outside = (b - &in_range).mapv(|v| v * v).sum().sqrt();
    (x, outside)
}

/// Orthonormal basis of the orthogonal complement of the column span of
/// `basis` (which must have orthonormal columns).
pub fn orthonormal_complement(basis: ArrayView2<f64>) -> Result<Array2<f64>> {
    let p = basis.nrows();
    let k = basis.ncols();
    let mut projector = Array2::<f64>::eye(p);
    projector -= &basis.dot(&basis.t());
    let eig = symmetric_eig(projector.view())?;
    Ok(eig.vectors.slice(s![.., ..p - k]).to_owned())
}

/// Thin QR orthonormalization of the columns of `a`.
pub(crate) fn orthonormalize(a: &Array2<f64>) -> Result<Array2<f64>> {
    let (q, _r) = a.qr()?;
    Ok(q)
}

/// Settings for [`leading_eigenpairs`].
#[derive(Debug, Clone, Copy)]
pub struct SubspaceOptions {
    pub block: usize,
    pub tolerance: f64,
    pub max_iter: usize,
}

/// Leading eigenpairs found by block subspace iteration.
#[derive(Debug, Clone)]
pub struct LeadingEigen {
    /// Ritz values of the whole block, non-increasing; the first `k` are converged.
    pub ritz_values: Array1<f64>,
    /// Converged leading eigenvectors, `dim x k`.
    pub vectors: Array2<f64>,
    pub iterations: usize,
}

/// Top-`k` eigenpairs of the symmetric PSD operator `apply` acting on
/// `dim x b` blocks. Returns `None` when the iteration does not reach the
/// residual tolerance within `max_iter` sweeps.
pub fn leading_eigenpairs<F>(apply: F, dim: usize, k: usize, opts: SubspaceOptions) -> Result<Option<LeadingEigen>>
where
    F: Fn(&Array2<f64>) -> Array2<f64>,
{
    let block = opts.block.clamp(k, dim);
    let mut rng = ChaCha8Rng::seed_from_u64(0x005e_ed0f_b10c);
    let start = Array2::from_shape_simple_fn((dim, block), || StandardNormal.sample(&mut rng));
    let mut q = orthonormalize(&start)?;
    for iter in 1..=opts.max_iter {
        let w = apply(&q);
        let small = q.t().dot(&w);
        let small = (&small + &small.t()) * 0.5;
        let ritz = symmetric_eig(small.view())?;
        let u = q.dot(&ritz.vectors);
        let au = w.dot(&ritz.vectors);
        let top = ritz.values[0].abs().max(f64::MIN_POSITIVE);
        let converged = (0..k).all(|i| {
            let r = &au.column(i) - &(&u.column(i) * ritz.values[i]);
            r.dot(&r).sqrt() <= opts.tolerance * top
        });
        if converged {
            let mut vectors = u.slice(s![.., ..k]).to_owned();
            fix_signs(&mut vectors);
            return Ok(Some(LeadingEigen {
                ritz_values: ritz.values,
                vectors,
                iterations: iter,
            }));
        }
        q = orthonormalize(&au)?;
    }
    Ok(None)
}
