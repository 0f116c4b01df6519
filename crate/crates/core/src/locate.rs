//! Position extraction from an optimal Gram matrix and the three quality
//! measures.
//!
//! Method 1 reads the sensors off the sensor-anchor block by solving
//! `A X^T = Ybar_21`. Method 2 factors the best rank-`r` approximation of
//! `Ybar` and rotates the factor onto the anchors by orthogonal Procrustes.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::edm;
use crate::error::{Error, Result};
use crate::linalg::sorted_sym_eigen;
use crate::model::PartialEdm;
use crate::relax::x_from_gram;

/// Relative gap below which the `r`-th and `(r+1)`-th eigenvalues count as
/// tied.
pub const TIE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Method1 {
    pub x: DMatrix<f64>,
    /// `||A X^T - Ybar_21||_F`.
    pub residual: f64,
}

pub fn method1(ybar: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<Method1> {
    let (x, residual) = x_from_gram(ybar, a)?;
    Ok(Method1 { x, residual })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Method2 {
    pub x: DMatrix<f64>,
    pub a_est: DMatrix<f64>,
    pub q: DMatrix<f64>,
    /// All eigenvalues of `Ybar`, descending.
    pub eigenvalues: DVector<f64>,
    /// The `r`-th and `(r+1)`-th eigenvalues coincide, so the truncation
    /// depends on the eigensolver's ordering.
    pub tie: bool,
}

/// Orthogonal `Q` minimizing `||p2 Q - a||_F`: with `A^T P_2 = U_Q S V_Q^T`,
/// `Q = V_Q U_Q^T`.
pub fn procrustes(p2: &DMatrix<f64>, a: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = (a.transpose() * p2).svd(true, true);
    let uq = svd.u.expect("u requested");
    let vqt = svd.v_t.expect("v_t requested");
    vqt.transpose() * uq.transpose()
}

/// Best rank-`r` factor `U_r Sigma_r^{1/2}` of a symmetric matrix, with
/// negative eigenvalues clamped to zero.
pub fn rank_r_factor(s: &DMatrix<f64>, r: usize) -> (DMatrix<f64>, DVector<f64>) {
    let (vals, vecs) = sorted_sym_eigen(s);
    let k = r.min(vals.len());
    let mut p = vecs.columns(0, k).into_owned();
    for j in 0..k {
        p.column_mut(j).scale_mut(vals[j].max(0.0).sqrt());
    }
    (p, vals)
}

pub fn method2(ybar: &DMatrix<f64>, a: &DMatrix<f64>, r: usize) -> Result<Method2> {
    let (total, m) = (ybar.nrows(), a.nrows());
    if !ybar.is_square() || total <= m || a.ncols() != r {
        return Err(Error::Dimension(format!(
            "Gram matrix {}x{}, anchors {}x{}, r = {r}",
            ybar.nrows(),
            ybar.ncols(),
            a.nrows(),
            a.ncols()
        )));
    }
    let n = total - m;
    let (p, vals) = rank_r_factor(ybar, r);
    let tie = r < total && (vals[r - 1] - vals[r]).abs() <= TIE_TOL * vals[0].abs().max(f64::MIN_POSITIVE);
    let p1 = p.rows(0, n).into_owned();
    let p2 = p.rows(n, m).into_owned();
    let q = procrustes(&p2, a);
    Ok(Method2 { x: p1 * &q, a_est: p2 * &q, q, eigenvalues: vals, tie })
}

/// `||W o (K(P P^T) - E)||_F` with `P = [X; A]`.
pub fn weighted_fit(x: &DMatrix<f64>, a: &DMatrix<f64>, pe: &PartialEdm) -> f64 {
    let p = stack_rows(x, a);
    pe.w.component_mul(&(edm::k_op(&(&p * p.transpose())) - &pe.e)).norm()
}

fn stack_rows(x: &DMatrix<f64>, a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(x.nrows() + a.nrows(), x.ncols());
    p.rows_mut(0, x.nrows()).copy_from(x);
    p.rows_mut(x.nrows(), a.nrows()).copy_from(a);
    p
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measures {
    /// Fit with the estimated anchors.
    pub m1: f64,
    /// `||X_est - X*||_F`; absent without ground truth.
    pub m2: Option<f64>,
    /// Fit with the original anchors.
    pub m3: f64,
}

pub fn measures(
    x_est: &DMatrix<f64>,
    a_est: &DMatrix<f64>,
    a: &DMatrix<f64>,
    pe: &PartialEdm,
    x_true: Option<&DMatrix<f64>>,
) -> Measures {
    Measures {
        m1: weighted_fit(x_est, a_est, pe),
        m2: x_true.map(|xt| (x_est - xt).norm()),
        m3: weighted_fit(x_est, a, pe),
    }
}

/// Adds the recorded centering shift back to every row.
pub fn translate_back(points: &DMatrix<f64>, translation: &DVector<f64>) -> DMatrix<f64> {
    let mut out = points.clone();
    for mut row in out.row_iter_mut() {
        row += translation.transpose();
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationResult {
    pub method: u8,
    pub x_est: DMatrix<f64>,
    pub a_est: DMatrix<f64>,
    pub measures: Measures,
}

/// Both extraction methods with their measures. `pe` must be in the same node
/// order as `ybar`.
pub fn locate_both(
    ybar: &DMatrix<f64>,
    a: &DMatrix<f64>,
    pe: &PartialEdm,
    x_true: Option<&DMatrix<f64>>,
) -> Result<[LocalizationResult; 2]> {
    let m1 = method1(ybar, a)?;
    let m2 = method2(ybar, a, a.ncols())?;
    Ok([
        LocalizationResult { method: 1, measures: measures(&m1.x, a, a, pe, x_true), x_est: m1.x, a_est: a.clone() },
        LocalizationResult { method: 2, measures: measures(&m2.x, &m2.a_est, a, pe, x_true), x_est: m2.x, a_est: m2.a_est },
    ])
}

pub const RESULTS_HEADER: [&str; 5] = ["instance", "method", "measure1", "measure2", "measure3"];

/// Rows of `(instance id, method, m1, m2, m3)`; a missing Measure 2 is written
/// as `NA`.
pub fn write_results_csv<W: Write>(rows: &[(String, LocalizationResult)], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(RESULTS_HEADER)?;
    for (id, res) in rows {
        wtr.write_record([
            id.clone(),
            res.method.to_string(),
            format!("{:.17e}", res.measures.m1),
            res.measures.m2.map_or_else(|| "NA".to_string(), |v| format!("{v:.17e}")),
            format!("{:.17e}", res.measures.m3),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
