//! Linear maps between Gram matrices, Euclidean distance matrices and their
//! vectorizations.
//!
//! Every operator here comes with its adjoint under the trace inner product
//! `<A, B> = trace(A^T B)`. Symmetric matrices are stored as dense
//! `DMatrix<f64>`; callers are responsible for passing symmetric input where
//! an operator is defined on the symmetric space only.
//!
//! The symmetric vectorization `svec` scales strictly upper triangular entries
//! by `sqrt(2)` and walks the upper triangle row by row, which makes
//! `svec`/`smat` an isometry.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Trace inner product of two equally sized matrices.
pub fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.dot(b)
}

/// `t(n) = n(n+1)/2`.
pub fn tri(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Order `n` with `t(n) = len`, if `len` is a triangular number.
pub fn tri_inverse(len: usize) -> Option<usize> {
    let n = (((8 * len + 1) as f64).sqrt() as usize).saturating_sub(1) / 2;
    (n..=n + 1).find(|&k| tri(k) == len)
}

pub fn is_symmetric(s: &DMatrix<f64>, tol: f64) -> bool {
    s.is_square()
        && (0..s.nrows()).all(|i| (0..i).all(|j| (s[(i, j)] - s[(j, i)]).abs() <= tol))
}

/// `(De(B))_ij = B_ii + B_jj`.
pub fn de(b: &DMatrix<f64>) -> DMatrix<f64> {
    de_vec(&b.diagonal())
}

/// `De(v) = v e^T + e v^T`.
pub fn de_vec(v: &DVector<f64>) -> DMatrix<f64> {
    let n = v.len();
    DMatrix::from_fn(n, n, |i, j| v[i] + v[j])
}

/// `K(B) = De(B) - 2B`. Maps a Gram matrix to its distance matrix.
pub fn k_op(b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = b.nrows();
    DMatrix::from_fn(n, n, |i, j| b[(i, i)] + b[(j, j)] - 2.0 * b[(i, j)])
}

/// `K*(D) = 2(Diag(De) - D)`.
pub fn k_adj(d: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = d * -2.0;
    for i in 0..d.nrows() {
        out[(i, i)] += 2.0 * d.row(i).sum();
    }
    out
}

/// `De*(D) = 2 Diag(De)`.
pub fn de_adj(d: &DMatrix<f64>) -> DMatrix<f64> {
    let n = d.nrows();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        out[(i, i)] = 2.0 * d.row(i).sum();
    }
    out
}

pub fn off_diag(s: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = s.clone();
    out.fill_diagonal(0.0);
    out
}

/// Orthogonal projector `J = I - ee^T/n` onto the complement of `e`.
pub fn j_project(n: usize) -> DMatrix<f64> {
    let c = 1.0 / n as f64;
    DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 - c } else { -c })
}

/// Moore-Penrose inverse of `K`: `-1/2 J offDiag(D) J`.
pub fn k_dagger(d: &DMatrix<f64>) -> DMatrix<f64> {
    let j = j_project(d.nrows());
    &j * off_diag(d) * &j * -0.5
}

pub fn svec(s: &DMatrix<f64>) -> DVector<f64> {
    let n = s.nrows();
    let mut v = DVector::zeros(tri(n));
    let mut k = 0;
    for i in 0..n {
        v[k] = s[(i, i)];
        k += 1;
        for j in i + 1..n {
            v[k] = std::f64::consts::SQRT_2 * s[(i, j)];
            k += 1;
        }
    }
    v
}

/// Inverse (and adjoint) of [`svec`] for a vector whose length is known to be
/// `t(n)`.
pub fn smat_n(v: &DVector<f64>, n: usize) -> DMatrix<f64> {
    debug_assert_eq!(v.len(), tri(n));
    let mut s = DMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        s[(i, i)] = v[k];
        k += 1;
        for j in i + 1..n {
            let x = v[k] / std::f64::consts::SQRT_2;
            s[(i, j)] = x;
            s[(j, i)] = x;
            k += 1;
        }
    }
    s
}

pub fn smat(v: &DVector<f64>) -> Result<DMatrix<f64>> {
    let n = tri_inverse(v.len()).ok_or_else(|| {
        Error::Dimension(format!("svec length {} is not a triangular number", v.len()))
    })?;
    Ok(smat_n(v, n))
}

/// Column-major vectorization of a rectangular matrix.
pub fn vec_m(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

pub fn mat_v(v: &DVector<f64>, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    if v.len() != rows * cols {
        return Err(Error::Dimension(format!(
            "vector of length {} cannot be reshaped to {rows}x{cols}",
            v.len()
        )));
    }
    Ok(DMatrix::from_column_slice(rows, cols, v.as_slice()))
}

/// Partition of `0..order` into consecutive diagonal blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockLayout {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl BlockLayout {
    pub fn new(sizes: &[usize]) -> Self {
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut acc = 0;
        for &s in sizes {
            offsets.push(acc);
            acc += s;
        }
        Self { sizes: sizes.to_vec(), offsets }
    }

    pub fn order(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    /// `(offset, size)` of block `i` (1-based).
    pub fn block(&self, i: usize) -> Result<(usize, usize)> {
        if i == 0 || i > self.sizes.len() {
            return Err(Error::Dimension(format!(
                "block index {i} out of range 1..={}",
                self.sizes.len()
            )));
        }
        Ok((self.offsets[i - 1], self.sizes[i - 1]))
    }

    fn check(&self, s: &DMatrix<f64>) -> Result<()> {
        if s.nrows() != self.order() || s.ncols() != self.order() {
            return Err(Error::Dimension(format!(
                "matrix is {}x{}, layout has order {}",
                s.nrows(),
                s.ncols(),
                self.order()
            )));
        }
        Ok(())
    }
}

/// `sblk_i(S)`: the `i`-th diagonal block.
pub fn sblk_diag(layout: &BlockLayout, i: usize, s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    layout.check(s)?;
    let (o, k) = layout.block(i)?;
    Ok(s.view((o, o), (k, k)).into_owned())
}

/// `sBlk_i(T)`, adjoint of [`sblk_diag`].
pub fn sblk_diag_adj(layout: &BlockLayout, i: usize, t: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (o, k) = layout.block(i)?;
    if t.nrows() != k || t.ncols() != k {
        return Err(Error::Dimension(format!("block {i} is {k}x{k}")));
    }
    let n = layout.order();
    let mut out = DMatrix::zeros(n, n);
    out.view_mut((o, o), (k, k)).copy_from(t);
    Ok(out)
}

/// `sblk_ij(G)`: the `(i, j)` off-diagonal block scaled by `sqrt(2)`.
pub fn sblk_off(layout: &BlockLayout, i: usize, j: usize, g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    layout.check(g)?;
    if i == j {
        return Err(Error::Dimension("sblk_off needs distinct blocks".into()));
    }
    let (oi, ki) = layout.block(i)?;
    let (oj, kj) = layout.block(j)?;
    Ok(g.view((oi, oj), (ki, kj)) * std::f64::consts::SQRT_2)
}

/// `sBlk_ij(J)`, adjoint of [`sblk_off`]: places `J/sqrt(2)` at `(i, j)` and
/// its transpose at `(j, i)`.
pub fn sblk_off_adj(layout: &BlockLayout, i: usize, j: usize, jm: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if i == j {
        return Err(Error::Dimension("sblk_off_adj needs distinct blocks".into()));
    }
    let (oi, ki) = layout.block(i)?;
    let (oj, kj) = layout.block(j)?;
    if jm.nrows() != ki || jm.ncols() != kj {
        return Err(Error::Dimension(format!("block ({i},{j}) is {ki}x{kj}")));
    }
    let n = layout.order();
    let mut out = DMatrix::zeros(n, n);
    let scaled = jm * std::f64::consts::FRAC_1_SQRT_2;
    out.view_mut((oi, oj), (ki, kj)).copy_from(&scaled);
    out.view_mut((oj, oi), (kj, ki)).copy_from(&scaled.transpose());
    Ok(out)
}

/// Fixed ordered set of strictly upper triangular positions taken from a
/// symmetric 0/1 matrix, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Pattern {
    order: usize,
    pairs: Vec<(usize, usize)>,
}

impl Pattern {
    pub fn from_indicator(h: &DMatrix<f64>) -> Result<Self> {
        if !is_symmetric(h, 0.0) {
            return Err(Error::Dimension("pattern matrix must be symmetric".into()));
        }
        let n = h.nrows();
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let v = h[(i, j)];
                if v == 1.0 {
                    pairs.push((i, j));
                } else if v != 0.0 {
                    return Err(Error::Dimension(format!("pattern entry ({i},{j}) = {v} is not 0/1")));
                }
            }
        }
        Ok(Self { order: n, pairs })
    }

    /// Pattern from an explicit list of `(i, j)` pairs with `i != j`; pairs are
    /// normalized to `i < j` and sorted row-major.
    pub fn from_pairs(order: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut pairs: Vec<_> = pairs
            .into_iter()
            .map(|(i, j)| if i < j { (i, j) } else { (j, i) })
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        Self { order, pairs }
    }

    pub fn empty(order: usize) -> Self {
        Self { order, pairs: Vec::new() }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nz(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn indicator(&self) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.order, self.order);
        for &(i, j) in &self.pairs {
            h[(i, j)] = 1.0;
            h[(j, i)] = 1.0;
        }
        h
    }

    /// `svec_H(S)`: the patterned entries of `S`, scaled by `sqrt(2)`.
    pub fn svec(&self, s: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.pairs.len(),
            self.pairs.iter().map(|&(i, j)| std::f64::consts::SQRT_2 * s[(i, j)]),
        )
    }

    /// `sMat_H(v)`, adjoint of [`Pattern::svec`] and its inverse on the
    /// patterned subspace.
    pub fn smat(&self, v: &DVector<f64>) -> Result<DMatrix<f64>> {
        if v.len() != self.pairs.len() {
            return Err(Error::Dimension(format!(
                "pattern has {} entries, vector has {}",
                self.pairs.len(),
                v.len()
            )));
        }
        let mut s = DMatrix::zeros(self.order, self.order);
        for (&(i, j), &x) in self.pairs.iter().zip(v.iter()) {
            let x = x / std::f64::consts::SQRT_2;
            s[(i, j)] = x;
            s[(j, i)] = x;
        }
        Ok(s)
    }
}

pub fn svec_pattern(h: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<DVector<f64>> {
    Ok(Pattern::from_indicator(h)?.svec(s))
}

pub fn smat_pattern(h: &DMatrix<f64>, v: &DVector<f64>) -> Result<DMatrix<f64>> {
    Pattern::from_indicator(h)?.smat(v)
}

pub fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Smallest eigenvalue of a symmetric matrix (symmetrized first).
pub fn lambda_min(s: &DMatrix<f64>) -> f64 {
    if s.nrows() == 0 {
        return f64::INFINITY;
    }
    sym(s).symmetric_eigenvalues().min()
}

pub fn lambda_max(s: &DMatrix<f64>) -> f64 {
    if s.nrows() == 0 {
        return f64::NEG_INFINITY;
    }
    sym(s).symmetric_eigenvalues().max()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, data: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, data.len() / rows, data)
    }

    fn close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
        (a - b).amax() <= tol
    }

    #[test]
    fn de_examples() {
        assert_eq!(de(&m(2, &[0., 0., 0., 1.])), m(2, &[0., 1., 1., 2.]));
        assert_eq!(de(&DMatrix::zeros(3, 3)), DMatrix::zeros(3, 3));
        assert_eq!(de(&DMatrix::identity(2, 2)), m(2, &[2., 2., 2., 2.]));
    }

    #[test]
    fn k_examples() {
        assert_eq!(k_op(&m(2, &[0., 0., 0., 1.])), m(2, &[0., 1., 1., 0.]));
        let v = DVector::from_vec(vec![1.0, 2.0]);
        assert_eq!(k_op(&de_vec(&v)), DMatrix::zeros(2, 2));
        assert!(close(&k_op(&m(2, &[0.25, -0.25, -0.25, 0.25])), &m(2, &[0., 1., 1., 0.]), 1e-15));
    }

    #[test]
    fn adjoint_examples() {
        let d = m(2, &[0., 1., 1., 0.]);
        assert_eq!(k_adj(&d), m(2, &[2., -2., -2., 2.]));
        assert_eq!(k_adj(&DMatrix::zeros(2, 2)), DMatrix::zeros(2, 2));
        let b = m(2, &[0., 0., 0., 1.]);
        assert_eq!(inner(&k_op(&b), &d), 2.0);
        assert_eq!(inner(&b, &k_adj(&d)), 2.0);

        assert_eq!(de_adj(&d), m(2, &[2., 0., 0., 2.]));
        assert_eq!(de_adj(&DMatrix::zeros(2, 2)), DMatrix::zeros(2, 2));
        assert_eq!(de_adj(&DMatrix::from_element(3, 3, 1.0)), DMatrix::identity(3, 3) * 6.0);
    }

    #[test]
    fn k_dagger_examples() {
        let d = m(2, &[0., 1., 1., 0.]);
        let b = k_dagger(&d);
        assert!(close(&b, &m(2, &[0.25, -0.25, -0.25, 0.25]), 1e-15));
        assert_eq!(k_dagger(&DMatrix::zeros(2, 2)), DMatrix::zeros(2, 2));
        assert!(close(&k_op(&b), &d, 1e-15));
    }

    #[test]
    fn projector_examples() {
        assert_eq!(off_diag(&DMatrix::identity(3, 3)), DMatrix::zeros(3, 3));
        assert_eq!(j_project(2), m(2, &[0.5, -0.5, -0.5, 0.5]));
        let e = DVector::from_element(5, 1.0);
        assert!((j_project(5) * e).amax() < 1e-15);
    }

    #[test]
    fn svec_small() {
        let s = m(2, &[1., 2., 2., 3.]);
        let v = svec(&s);
        assert_eq!(v.len(), 3);
        assert!((v[1] - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-15);
        assert_eq!(smat(&v).unwrap(), s);
        assert!(smat(&DVector::zeros(4)).is_err());
    }

    #[test]
    fn vec_mat_round_trip() {
        let a = m(3, &[1., 2., 3., 4., 5., 6.]);
        let v = vec_m(&a);
        assert_eq!(v.as_slice(), &[1., 3., 5., 2., 4., 6.]);
        assert_eq!(mat_v(&v, 3, 2).unwrap(), a);
        assert!(mat_v(&v, 4, 2).is_err());
    }

    #[test]
    fn sblk_extraction() {
        let layout = BlockLayout::new(&[2, 2]);
        let mut s = DMatrix::zeros(4, 4);
        s.view_mut((0, 0), (2, 2)).fill_with_identity();
        s.view_mut((2, 2), (2, 2)).copy_from(&(DMatrix::identity(2, 2) * 3.0));
        assert_eq!(sblk_diag(&layout, 2, &s).unwrap(), DMatrix::identity(2, 2) * 3.0);
        assert!(sblk_diag(&layout, 3, &s).is_err());
        assert!(sblk_diag(&layout, 0, &s).is_err());
        assert!(sblk_off(&layout, 1, 1, &s).is_err());
    }

    #[test]
    fn pattern_examples() {
        let h = DMatrix::zeros(3, 3);
        assert_eq!(svec_pattern(&h, &DMatrix::identity(3, 3)).unwrap().len(), 0);

        let h = m(2, &[0., 1., 1., 0.]);
        let s = m(2, &[5., 7., 7., 9.]);
        let v = svec_pattern(&h, &s).unwrap();
        assert_eq!(v.len(), 1);
        assert!((v[0] - 7.0 * std::f64::consts::SQRT_2).abs() < 1e-14);
        assert!(smat_pattern(&h, &DVector::zeros(2)).is_err());
        assert!(Pattern::from_indicator(&m(2, &[0., 2., 2., 0.])).is_err());
    }

    #[test]
    fn tri_inverse_works() {
        for n in 0..40 {
            assert_eq!(tri_inverse(tri(n)), Some(n));
        }
        assert_eq!(tri_inverse(5), None);
    }
}
