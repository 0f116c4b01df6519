//! Small dense helpers shared by the reduction, solver and extraction code.

use nalgebra::{DMatrix, DVector};

use crate::edm::sym;

/// Symmetric eigendecomposition with eigenvalues in descending order and each
/// eigenvector's first nonzero component made positive.
pub fn sorted_sym_eigen(s: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = s.nrows();
    let eig = sym(s).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        let scale = col.amax();
        if let Some(first) = col.iter().find(|v| v.abs() > 1e-12 * scale.max(f64::MIN_POSITIVE)) {
            if *first < 0.0 {
                col.neg_mut();
            }
        }
        vectors.set_column(dst, &col);
    }
    (values, vectors)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LstsqInfo {
    pub rank: usize,
    pub largest_singular_value: f64,
    /// Smallest singular value retained in the solution.
    pub smallest_retained: f64,
    /// Smallest singular value overall.
    pub smallest_singular_value: f64,
}

impl LstsqInfo {
    pub fn rank_deficient(&self, cols: usize) -> bool {
        self.rank < cols
    }
}

/// Minimum-norm least-squares solution of `J d = b` via the SVD, dropping
/// singular values below `rcond * sigma_max`.
pub fn lstsq_min_norm(j: &DMatrix<f64>, b: &DVector<f64>, rcond: f64) -> (DVector<f64>, LstsqInfo) {
    let cols = j.ncols();
    if cols == 0 {
        return (
            DVector::zeros(0),
            LstsqInfo {
                rank: 0,
                largest_singular_value: 0.0,
                smallest_retained: 0.0,
                smallest_singular_value: 0.0,
            },
        );
    }
    let svd = j.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let sv = &svd.singular_values;
    let smax = sv.max();
    let cutoff = rcond * smax;
    let utb = u.transpose() * b;
    let mut coeff = DVector::zeros(sv.len());
    let mut rank = 0;
    let mut smallest_retained = f64::INFINITY;
    for k in 0..sv.len() {
        if sv[k] > cutoff && sv[k] > 0.0 {
            coeff[k] = utb[k] / sv[k];
            rank += 1;
            smallest_retained = smallest_retained.min(sv[k]);
        }
    }
    let d = vt.transpose() * coeff;
    let smallest = if sv.len() < cols { 0.0 } else { sv.min() };
    (
        d,
        LstsqInfo {
            rank,
            largest_singular_value: smax,
            smallest_retained,
            smallest_singular_value: smallest,
        },
    )
}

/// Conjugate gradients on the normal equations (CGLS) using only operator
/// actions. Returns the iterate and the number of iterations used.
pub fn cgls<F, G>(
    apply: F,
    apply_adj: G,
    b: &DVector<f64>,
    cols: usize,
    tol: f64,
    max_iter: usize,
) -> (DVector<f64>, usize)
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut x = DVector::zeros(cols);
    let mut r = b.clone();
    let mut s = apply_adj(&r);
    let mut p = s.clone();
    let norm_s0 = s.norm();
    let mut gamma = s.norm_squared();
    if norm_s0 == 0.0 {
        return (x, 0);
    }
    for it in 0..max_iter {
        let q = apply(&p);
        let qq = q.norm_squared();
        if qq == 0.0 {
            return (x, it);
        }
        let alpha = gamma / qq;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &q, 1.0);
        s = apply_adj(&r);
        let gamma_new = s.norm_squared();
        if gamma_new.sqrt() <= tol * norm_s0 {
            return (x, it + 1);
        }
        let beta = gamma_new / gamma;
        gamma = gamma_new;
        p = &s + &p * beta;
    }
    (x, max_iter)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_sorted_with_sign_convention() {
        let s = DMatrix::from_row_slice(2, 2, &[2.25, 1.75, 1.75, 2.25]);
        let (vals, vecs) = sorted_sym_eigen(&s);
        assert!((vals[0] - 4.0).abs() < 1e-12 && (vals[1] - 0.5).abs() < 1e-12);
        assert!(vecs[(0, 0)] > 0.0 && vecs[(0, 1)] > 0.0);
        let back = &vecs * DMatrix::from_diagonal(&vals) * vecs.transpose();
        assert!((back - s).amax() < 1e-12);
    }

    #[test]
    fn lstsq_min_norm_on_rank_deficient() {
        let j = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0, 2.0]);
        let (d, info) = lstsq_min_norm(&j, &b, 1e-12);
        assert_eq!(info.rank, 1);
        assert!((d[0] - 1.0).abs() < 1e-12 && (d[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cgls_matches_direct() {
        let j = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.5, -1.0, 3.0, 0.0]);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let (direct, _) = lstsq_min_norm(&j, &b, 1e-14);
        let (it, _) = cgls(|v| &j * v, |w| j.transpose() * w, &b, 2, 1e-14, 100);
        assert!((direct - it).amax() < 1e-10);
    }
}
